//! Closed forms for periodic nearest-neighbour walks and for two parallel chains.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::cell::{Edge, FundamentalCell, ValidatedCell};
use crate::linsolve::tridiagonal_recursion;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rate arrays must be non-empty and of equal length (got {plus} and {minus})")]
    LengthMismatch { plus: usize, minus: usize },
    #[error("rate {index} is not positive and finite")]
    BadRate { index: usize },
    #[error("each parallel chain needs at least two steps")]
    ChainTooShort,
}

fn check_rates<T: Scalar>(plus: &[T], minus: &[T]) -> Result<(), ModelError> {
    if plus.is_empty() || plus.len() != minus.len() {
        return Err(ModelError::LengthMismatch { plus: plus.len(), minus: minus.len() });
    }
    match plus.iter().chain(minus).position(|&r| !(r > T::zero()) || !r.is_finite()) {
        Some(i) => Err(ModelError::BadRate { index: i % plus.len() }),
        None => Ok(()),
    }
}

/// Nearest-neighbour walk on `Z` with `N`-periodic rates.
///
/// `xi_plus[k]` is the rate from site `k` to `k + 1` and `xi_minus[k]` the rate from
/// `k` to `k - 1`, for `k = 0..N-1`; other sites follow by periodicity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicLinearModel<T> {
    pub xi_plus: Vec<T>,
    pub xi_minus: Vec<T>,
}

/// Building blocks of the closed forms. Vectors are indexed by site `k`; unused entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicTerms<T> {
    pub n: usize,
    /// `rho[k] = xi_minus[k] / xi_plus[k]` for `k = 0..N-1`.
    pub rho: Vec<T>,
    pub delta: T,
    /// `k = 1..=N`.
    pub r: Vec<T>,
    /// `k = 1..=N`.
    pub lambda: Vec<T>,
    /// `k = 1..=N`.
    pub upsilon: Vec<T>,
    /// `k = 1..N-1`.
    pub w: Vec<T>,
    /// `k = 1..N-1`.
    pub z: Vec<T>,
    /// `k = 0..=N`.
    pub h: Vec<T>,
    /// `k = 0..=N`.
    pub kk: Vec<T>,
}

impl<T: Scalar> PeriodicLinearModel<T> {
    pub fn new(xi_plus: Vec<T>, xi_minus: Vec<T>) -> Result<Self, ModelError> {
        check_rates(&xi_plus, &xi_minus)?;
        Ok(PeriodicLinearModel { xi_plus, xi_minus })
    }

    /// Constant rates `alpha` forward and `beta` backward, seen with period `n`.
    pub fn homogeneous(alpha: T, beta: T, n: usize) -> Result<Self, ModelError> {
        Self::new(vec![alpha; n], vec![beta; n])
    }

    pub fn period(&self) -> usize {
        self.xi_plus.len()
    }

    pub fn xi_plus_at(&self, k: i64) -> T {
        self.xi_plus[k.rem_euclid(self.period() as i64) as usize]
    }

    pub fn xi_minus_at(&self, k: i64) -> T {
        self.xi_minus[k.rem_euclid(self.period() as i64) as usize]
    }

    pub fn rho_at(&self, k: i64) -> T {
        self.xi_minus_at(k) / self.xi_plus_at(k)
    }

    /// `1 + rho_lo (1 + rho_{lo+1} (1 + ... rho_hi))`, or 1 when the range is empty.
    fn nested(&self, lo: i64, hi: i64) -> T {
        (lo..=hi).rev().fold(T::one(), |acc, j| T::one() + self.rho_at(j) * acc)
    }

    pub fn terms(&self) -> PeriodicTerms<T> {
        let n = self.period();
        let ni = n as i64;
        let rho: Vec<T> = (0..ni).map(|k| self.rho_at(k)).collect();
        let delta = rho.iter().fold(T::one(), |p, &r| p * r);
        let mut r = vec![T::zero(); n + 1];
        for k in 1..=ni {
            r[k as usize] = self.nested(k + 1, k + ni - 1) / self.xi_plus_at(k);
        }
        let mut w = vec![T::zero(); n];
        let mut z = vec![T::zero(); n];
        for k in 1..ni {
            let lead = (k + 1..=ni).fold(T::one(), |p, j| p * self.rho_at(j));
            w[k as usize] = lead * self.nested(ni + 1, ni + k - 1) / self.xi_plus_at(k);
            z[k as usize] = self.nested(k + 1, ni - 1) / self.xi_plus_at(k);
        }
        let inner: Vec<T> = (1..ni).map(|k| self.rho_at(k)).collect();
        let inv: Vec<T> = (1..ni).map(|k| T::one() / self.xi_plus_at(k)).collect();
        let hrec = tridiagonal_recursion(T::one(), &inner, &vec![T::zero(); n - 1])
            .expect("rates were checked on construction");
        let krec = tridiagonal_recursion(T::zero(), &inner, &inv).expect("rates were checked on construction");
        PeriodicTerms {
            n,
            rho,
            delta,
            r,
            lambda: krec.lambda,
            upsilon: krec.upsilon,
            w,
            z,
            h: hrec.x,
            kk: krec.x,
        }
    }

    /// Cells crossed per unit time.
    pub fn velocity(&self) -> T {
        let t = self.terms();
        (T::one() - t.delta) / t.r.iter().copied().sum::<T>()
    }

    /// Sites crossed per unit time, `N` times the cell velocity.
    pub fn physical_velocity(&self) -> T {
        T::lit(self.period() as f64) * self.velocity()
    }

    /// Diffusion coefficient of the skeleton, in cells squared per unit time.
    pub fn diffusion(&self) -> T {
        let t = self.terms();
        let two = T::lit(2.0);
        let sum_r: T = t.r.iter().copied().sum();
        let v = (T::one() - t.delta) / sum_r;
        let mut quad = T::zero();
        let mut lin = T::zero();
        for k in 1..t.n {
            quad += two * t.kk[k] * t.r[k];
            lin += t.w[k] - t.h[k] * t.r[k];
        }
        ((T::one() + t.delta) + v * v * quad + two * v * lin) / sum_r
    }

    /// Cell with vertices `0..=N`, underline `0` and overline `N`.
    pub fn cell(&self) -> FundamentalCell<T> {
        let n = self.period();
        let id = |k: usize| k.to_string();
        let mut edges = Vec::with_capacity(2 * n);
        for k in 0..n {
            edges.push(Edge { from: id(k), to: id(k + 1), rate: self.xi_plus[k] });
        }
        for k in 1..=n {
            edges.push(Edge { from: id(k), to: id(k - 1), rate: self.xi_minus[k % n] });
        }
        FundamentalCell::new((0..=n).map(id).collect(), "0", &id(n), edges)
    }
}

/// Velocity and diffusion coefficient of a 2-periodic walk, in closed form.
pub fn two_periodic_closed_form<T: Scalar>(p0: T, p1: T, m0: T, m1: T) -> (T, T) {
    let s = p0 + p1 + m0 + m1;
    let fwd = p0 * p1;
    let bwd = m0 * m1;
    let v = (fwd - bwd) / s;
    let d = (fwd + bwd) / s - T::lit(2.0) * (fwd - bwd) * (fwd - bwd) / (s * s * s);
    (v, d)
}

/// Two linear chains joining `0_*` to `1_*` in parallel.
///
/// The upper chain has rates `xi_k^±` for `k = 0..N1-1`, where `xi_0^+` leaves `0_*` along the
/// upper chain and `xi_0^-` is the rate from `0_*` to the last upper vertex of the previous cell.
/// The lower chain is described the same way.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParallelChainModel<T> {
    pub upper: PeriodicLinearModel<T>,
    pub lower: PeriodicLinearModel<T>,
}

impl<T: Scalar> ParallelChainModel<T> {
    pub fn new(up_plus: Vec<T>, up_minus: Vec<T>, down_plus: Vec<T>, down_minus: Vec<T>) -> Result<Self, ModelError> {
        let upper = PeriodicLinearModel::new(up_plus, up_minus)?;
        let lower = PeriodicLinearModel::new(down_plus, down_minus)?;
        if upper.period() < 2 || lower.period() < 2 {
            return Err(ModelError::ChainTooShort);
        }
        Ok(ParallelChainModel { upper, lower })
    }

    /// Both chains of length 2 with rates `alpha` forward and `beta` backward.
    pub fn symmetric(alpha: T, beta: T) -> Self {
        Self::new(vec![alpha; 2], vec![beta; 2], vec![alpha; 2], vec![beta; 2]).expect("valid rates")
    }

    fn chains(&self) -> [&PeriodicLinearModel<T>; 2] {
        [&self.upper, &self.lower]
    }

    fn exit_rate(&self) -> T {
        self.chains().iter().map(|c| c.xi_plus[0] + c.xi_minus[0]).sum()
    }

    /// `Σ_i Σ_k r_k^(i) / r_N^(i) - 1`, which is `ν₀ E(J₁)`.
    fn weight(&self, terms: &[PeriodicTerms<T>; 2]) -> T {
        terms.iter().map(|t| t.r.iter().copied().sum::<T>() / t.r[t.n]).sum::<T>() - T::one()
    }

    pub fn velocity(&self) -> T {
        let terms = self.chains().map(|c| c.terms());
        let num: T = terms.iter().map(|t| (T::one() - t.delta) / t.r[t.n]).sum();
        num / self.weight(&terms)
    }

    pub fn diffusion(&self) -> T {
        let terms = self.chains().map(|c| c.terms());
        let two = T::lit(2.0);
        let nu = self.exit_rate();
        let weight = self.weight(&terms);
        let mean_j = weight / nu;
        let (mut r_plus, mut r_minus, mut split, mut extra2) = (T::zero(), T::zero(), T::zero(), T::zero());
        for (c, t) in self.chains().iter().zip(&terms) {
            let gamma = t.lambda[t.n];
            let enter = c.xi_plus[0] / gamma;
            r_plus += enter;
            r_minus += enter * t.delta;
            let mut lin = T::zero();
            let mut quad = T::zero();
            for k in 1..t.n {
                lin += t.h[k] * t.r[k] - t.w[k];
                quad += two * t.kk[k] * t.r[k];
            }
            split += enter / nu * ((T::one() - t.delta) / nu + lin);
            extra2 += enter / nu * quad;
        }
        let v = (r_plus - r_minus) / weight;
        let second = two * mean_j / nu + extra2;
        (r_plus + r_minus) / weight + v * v * second / mean_j - two * v * split / mean_j
    }

    /// Cell with underline `0`, overline `1`, upper vertices `a1..` and lower vertices `b1..`.
    pub fn cell(&self) -> FundamentalCell<T> {
        let mut vertices = vec!["0".to_string()];
        let mut edges = Vec::new();
        for (c, p) in self.chains().into_iter().zip(["a", "b"]) {
            let n = c.period();
            let id = |k: usize| match k {
                0 => "0".to_string(),
                k if k == n => "1".to_string(),
                k => format!("{p}{k}"),
            };
            vertices.extend((1..n).map(id));
            for k in 0..n {
                edges.push(Edge { from: id(k), to: id(k + 1), rate: c.xi_plus[k] });
            }
            for k in 1..=n {
                edges.push(Edge { from: id(k), to: id(k - 1), rate: c.xi_minus[k % n] });
            }
        }
        vertices.push("1".into());
        FundamentalCell::new(vertices, "0", "1", edges)
    }
}

/// The 2-periodic walk obtained by merging the two branches of the symmetric parallel model.
pub fn lump_identical<T: Scalar>(alpha: T, beta: T) -> PeriodicLinearModel<T> {
    let two = T::lit(2.0);
    PeriodicLinearModel::new(vec![two * alpha, alpha], vec![two * beta, beta]).expect("valid rates")
}

/// A diffusion coefficient for the symmetric parallel model found in earlier literature.
///
/// Kept for comparison only; it differs from the value derived here.
pub fn published_d_reference<T: Scalar>(alpha: T, beta: T) -> T {
    (T::lit(20.0) * alpha * alpha + T::lit(16.0) * alpha * beta + T::lit(12.0) * beta * beta)
        / (T::lit(27.0) * (alpha + beta))
}

/// A cell whose topology matches one of the closed-form models.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum RecognizedModel<T> {
    Periodic(PeriodicLinearModel<T>),
    Parallel(ParallelChainModel<T>),
}

impl<T: Scalar> RecognizedModel<T> {
    pub fn velocity(&self) -> T {
        match self {
            RecognizedModel::Periodic(m) => m.velocity(),
            RecognizedModel::Parallel(m) => m.velocity(),
        }
    }

    pub fn diffusion(&self) -> T {
        match self {
            RecognizedModel::Periodic(m) => m.diffusion(),
            RecognizedModel::Parallel(m) => m.diffusion(),
        }
    }
}

/// Detects a periodic nearest-neighbour cell or a two-branch parallel cell.
pub fn recognize<T: Scalar>(cell: &ValidatedCell<T>) -> Option<RecognizedModel<T>> {
    let n = cell.n_vertices();
    let nbrs: Vec<HashSet<usize>> = (0..n).map(|x| cell.out_edges(x).iter().map(|&(y, _)| y).collect()).collect();
    for x in 0..n {
        for &y in &nbrs[x] {
            if !nbrs[y].contains(&x) {
                return None;
            }
        }
    }
    let (lo, hi) = (cell.underline(), cell.overline());
    if (0..n).any(|x| x != lo && x != hi && nbrs[x].len() != 2) {
        return None;
    }
    // follows a branch from `lo` through `first` until it reaches `hi`
    let branch = |first: usize| -> Option<Vec<usize>> {
        let mut path = vec![lo, first];
        while *path.last().unwrap() != hi {
            let (prev, cur) = (path[path.len() - 2], *path.last().unwrap());
            if cur == lo {
                return None;
            }
            let next = *nbrs[cur].iter().find(|&&y| y != prev)?;
            path.push(next);
        }
        Some(path)
    };
    let chain = |path: &[usize]| {
        let m = path.len() - 1;
        let plus = (0..m).map(|k| cell.rate(path[k], path[k + 1])).collect();
        let mut minus: Vec<T> = (0..m).map(|k| if k == 0 { T::zero() } else { cell.rate(path[k], path[k - 1]) }).collect();
        minus[0] = cell.rate(hi, path[m - 1]);
        PeriodicLinearModel::new(plus, minus).ok()
    };
    match (nbrs[lo].len(), nbrs[hi].len()) {
        (1, 1) => {
            let path = branch(*nbrs[lo].iter().next()?)?;
            (path.len() == n).then(|| chain(&path)).flatten().map(RecognizedModel::Periodic)
        }
        (2, 2) if !nbrs[lo].contains(&hi) => {
            let mut firsts: Vec<usize> = nbrs[lo].iter().copied().collect();
            firsts.sort_by(|&a, &b| cell.vertex_id(a).cmp(cell.vertex_id(b)));
            let p = branch(firsts[0])?;
            let q = branch(firsts[1])?;
            if p.len() + q.len() - 2 != n {
                return None;
            }
            Some(RecognizedModel::Parallel(ParallelChainModel { upper: chain(&p)?, lower: chain(&q)? }))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::validate_cell;

    #[test]
    fn homogeneous_closed_form() {
        for n in 1..5 {
            let m = PeriodicLinearModel::homogeneous(2.0f64, 1.0, n).unwrap();
            let nf = n as f64;
            assert!((m.velocity() - 1.0 / nf).abs() < 1e-14);
            assert!((m.diffusion() - 3.0 / (nf * nf)).abs() < 1e-13);
            assert!((m.physical_velocity() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_periodic_spot_value() {
        let (v, d) = two_periodic_closed_form(2.0f64, 3.0, 1.0, 1.0);
        assert!((v - 5.0 / 7.0).abs() < 1e-15);
        assert!((d - 293.0 / 343.0).abs() < 1e-15);
        let m = PeriodicLinearModel::new(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert!((m.velocity() - v).abs() < 1e-14);
        assert!((m.diffusion() - d).abs() < 1e-14);
    }

    #[test]
    fn parallel_spot_values() {
        let m = ParallelChainModel::symmetric(2.0f64, 1.0);
        assert!((m.velocity() - 2.0 / 3.0).abs() < 1e-14);
        assert!((m.diffusion() - 82.0 / 81.0).abs() < 1e-14);
        assert_eq!(m.cell().vertices.len(), 4);
    }

    #[test]
    fn published_value_differs() {
        let d = published_d_reference(2.0f64, 1.0);
        assert!((d - 124.0 / 81.0).abs() < 1e-15);
        assert!((ParallelChainModel::symmetric(2.0f64, 1.0).diffusion() / 2.0 - d).abs() > 0.1);
    }

    #[test]
    fn recognizes_generated_cells() {
        let p = PeriodicLinearModel::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.7, 0.9]).unwrap();
        let c = validate_cell(&p.cell()).unwrap();
        assert_eq!(recognize(&c), Some(RecognizedModel::Periodic(p)));
        let q = ParallelChainModel::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.7, 0.9], vec![4.0, 5.0], vec![0.1, 0.2]).unwrap();
        let c = validate_cell(&q.cell()).unwrap();
        assert_eq!(recognize(&c), Some(RecognizedModel::Parallel(q)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PeriodicLinearModel::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert_eq!(PeriodicLinearModel::new(vec![1.0, -1.0], vec![1.0, 2.0]), Err(ModelError::BadRate { index: 1 }));
        assert_eq!(
            ParallelChainModel::new(vec![1.0], vec![1.0], vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(ModelError::ChainTooShort)
        );
    }
}
