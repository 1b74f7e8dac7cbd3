//! Asymptotic velocity and diffusion coefficient of the skeleton process.
//!
//! Three independent exact routes are provided: the one-cell route through the
//! embedded jump chain of the skeleton, the two-cell route through the
//! renewal structure of excursions from `0_*`, and (for the velocity only) the
//! two-cell graph with its linear chains removed.

use serde::Serialize;

use crate::cell::{build_one_cell, build_two_cell, Direction, ValidatedCell};
use crate::linsolve::{self, SolveError};
use crate::reduction::{find_linear_chains, reduce_graph, reduced_expected_time, reduced_hitting, ReductionError};
use crate::scalar::Scalar;

/// Moments of the first jump `J_1` of the skeleton, and the law of its direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SkeletonStats<T> {
    pub p_plus: T,
    pub q_minus: T,
    pub exit_rate: T,
    pub mean_j: T,
    pub second_moment_j: T,
    pub mean_j_plus: T,
    pub mean_j_minus: T,
}

impl<T: Scalar> SkeletonStats<T> {
    pub fn velocity(&self) -> T {
        (self.p_plus - self.q_minus) / self.mean_j
    }

    pub fn diffusion(&self) -> T {
        let v = self.velocity();
        let e = self.mean_j;
        let two = T::lit(2.0);
        (self.p_plus + self.q_minus) / e + v * v * self.second_moment_j / e
            - two * v * (self.mean_j_plus - self.mean_j_minus) / e
    }
}

/// Law of one excursion `(X_S, S)` from `0_*` to `{-1_*, 1_*}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CycleStats<T> {
    pub p_plus: T,
    pub p_minus: T,
    pub mean_s: T,
    pub second_moment_s: T,
    pub mean_s_plus: T,
    pub mean_s_minus: T,
}

impl<T: Scalar> CycleStats<T> {
    pub fn velocity(&self) -> T {
        (self.p_plus - self.p_minus) / self.mean_s
    }

    pub fn diffusion(&self) -> T {
        let v = self.velocity();
        let drift = self.p_plus - self.p_minus;
        let var_x = T::one() - drift * drift;
        let var_s = self.second_moment_s - self.mean_s * self.mean_s;
        let cov = self.mean_s_plus - self.mean_s_minus - drift * self.mean_s;
        (var_x + v * v * var_s - T::lit(2.0) * v * cov) / self.mean_s
    }
}

pub fn single_cell_stats<T: Scalar>(cell: &ValidatedCell<T>) -> Result<SkeletonStats<T>, SolveError> {
    let oc = build_one_cell(cell);
    let g = &oc.graph;
    let (lo, hi) = (oc.under, oc.over);
    let to_hi = linsolve::hitting_probability(g, &[hi], &[lo])?;
    let to_lo = linsolve::hitting_probability(g, &[lo], &[hi])?;
    let time = linsolve::expected_hitting_time(g, &[lo, hi])?;
    let time2 = linsolve::second_moment(g, &[lo, hi])?;
    let time_hi = linsolve::restricted_first_moment(g, &[hi], &[lo])?;
    let time_lo = linsolve::restricted_first_moment(g, &[lo], &[hi])?;

    let nu = oc.exit_rate;
    let (mut p, mut q) = (T::zero(), T::zero());
    let (mut after, mut after2, mut after_p, mut after_q) = (T::zero(), T::zero(), T::zero(), T::zero());
    for j in &oc.jumps {
        let w = j.rate / nu;
        let x = j.target;
        after += w * time.at(x);
        after2 += w * time2.at(x);
        match j.direction {
            Direction::Forward => {
                p += w * to_hi.at(x);
                after_p += w * time_hi.at(x);
            }
            Direction::Backward => {
                q += w * to_lo.at(x);
                after_q += w * time_lo.at(x);
            }
        }
    }
    let mean_j = T::one() / nu + after;
    Ok(SkeletonStats {
        p_plus: p,
        q_minus: q,
        exit_rate: nu,
        mean_j,
        second_moment_j: after2 + T::lit(2.0) * mean_j / nu,
        mean_j_plus: p / nu + after_p,
        mean_j_minus: q / nu + after_q,
    })
}

pub fn two_cell_stats<T: Scalar>(cell: &ValidatedCell<T>) -> Result<CycleStats<T>, SolveError> {
    let tc = build_two_cell(cell);
    let g = &tc.graph;
    let (m, z, p) = (tc.minus, tc.zero, tc.plus);
    Ok(CycleStats {
        p_plus: linsolve::hitting_probability(g, &[p], &[m])?.at(z),
        p_minus: linsolve::hitting_probability(g, &[m], &[p])?.at(z),
        mean_s: linsolve::expected_hitting_time(g, &[m, p])?.at(z),
        second_moment_s: linsolve::second_moment(g, &[m, p])?.at(z),
        mean_s_plus: linsolve::restricted_first_moment(g, &[p], &[m])?.at(z),
        mean_s_minus: linsolve::restricted_first_moment(g, &[m], &[p])?.at(z),
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReducedError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// Velocity from the two-cell graph after removing all maximal linear chains
/// that avoid `-1_*`, `0_*` and `1_*`. Also returns the number of chains removed.
pub fn reduced_velocity<T: Scalar>(cell: &ValidatedCell<T>) -> Result<(T, usize), ReducedError> {
    let tc = build_two_cell(cell);
    let chains = find_linear_chains(&tc.graph, &[tc.minus, tc.zero, tc.plus]);
    let rg = reduce_graph(&tc.graph, &chains)?;
    let at = |s| rg.index_of_original(s).expect("protected states are retained");
    let (m, z, p) = (at(tc.minus), at(tc.zero), at(tc.plus));
    let phi = reduced_hitting(&rg, &[p], &[m])?.at(z);
    let psi = reduced_expected_time(&rg, &[m, p])?.at(z);
    Ok(((T::lit(2.0) * phi - T::one()) / psi, chains.len()))
}

/// Which exact pipeline to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SingleCell,
    TwoCell,
    Reduced,
}

/// Velocity and (when available) diffusion coefficient from one pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Kinetics<T> {
    pub method: Method,
    pub v: T,
    pub sigma_sq: Option<T>,
}

pub fn compute<T: Scalar>(cell: &ValidatedCell<T>, method: Method) -> Result<Kinetics<T>, ReducedError> {
    Ok(match method {
        Method::SingleCell => {
            let s = single_cell_stats(cell)?;
            Kinetics { method, v: s.velocity(), sigma_sq: Some(s.diffusion()) }
        }
        Method::TwoCell => {
            let s = two_cell_stats(cell)?;
            Kinetics { method, v: s.velocity(), sigma_sq: Some(s.diffusion()) }
        }
        Method::Reduced => Kinetics { method, v: reduced_velocity(cell)?.0, sigma_sq: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{validate_cell, Edge, FundamentalCell};

    fn homogeneous(a: f64, b: f64) -> ValidatedCell<f64> {
        let e = vec![
            Edge { from: "0".into(), to: "1".into(), rate: a },
            Edge { from: "1".into(), to: "0".into(), rate: b },
        ];
        validate_cell(&FundamentalCell::new(vec!["0".into(), "1".into()], "0", "1", e)).unwrap()
    }

    #[test]
    fn homogeneous_walk() {
        let c = homogeneous(2.0, 1.0);
        for m in [Method::SingleCell, Method::TwoCell] {
            let k = compute(&c, m).unwrap();
            assert!((k.v - 1.0).abs() < 1e-14);
            assert!((k.sigma_sq.unwrap() - 3.0).abs() < 1e-13);
        }
        assert!((compute(&c, Method::Reduced).unwrap().v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn direct_forward_edge_counts_as_plus() {
        let s = single_cell_stats(&homogeneous(5.0, 0.5)).unwrap();
        assert!((s.p_plus - 5.0 / 5.5).abs() < 1e-15);
        assert!((s.mean_j - 1.0 / 5.5).abs() < 1e-15);
    }

    #[test]
    fn f32_pipeline() {
        let c = validate_cell(&homogeneous(2.0, 1.0).cell().cast::<f32>()).unwrap();
        let k = compute(&c, Method::TwoCell).unwrap();
        assert!((k.v - 1.0).abs() < 1e-5);
    }
}
