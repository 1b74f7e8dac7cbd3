//! Exact first-passage quantities on finite absorbing graphs.
//!
//! Each quantity is the unique bounded solution of a Dirichlet problem for the
//! generator `Lf(x) = sum_y r(x, y) (f(y) - f(x))`, solved densely with partial
//! pivoting and accepted only if the residual check passes.

use thiserror::Error;

use crate::graph::AbsorbingWalkGraph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("linear system is singular (pivot {pivot} in a system of size {size})")]
    SingularSystem { size: usize, pivot: usize },
    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    ToleranceNotMet { residual: f64, tolerance: f64 },
    #[error("target set must be a non-empty set of absorbing states, disjoint from the avoided set")]
    InvalidTargetSet,
    #[error("expectation is infinite: the target cannot be reached from `{0}`")]
    InfiniteExpectation(String),
    #[error("recursion input invalid: {0}")]
    InvalidRecursion(&'static str),
}

/// Values of a first-passage quantity at every state of the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingSolution<T> {
    pub values: Vec<T>,
    /// `‖Ax - b‖∞ / (1 + ‖b‖∞)` of the accepted solve.
    pub residual: T,
}

impl<T: Scalar> HittingSolution<T> {
    pub fn at(&self, state: usize) -> T {
        self.values[state]
    }
}

/// Solves `a x = b` for a dense row-major `n x n` matrix by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &[T], b: &[T]) -> Result<Vec<T>, SolveError> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix shape does not match right-hand side");
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let tiny = T::epsilon() * scale * T::lit(n as f64);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().partial_cmp(&m[j * n + k].abs()).unwrap())
            .unwrap();
        let piv = m[p * n + k];
        if !(piv.abs() > tiny) {
            return Err(SolveError::SingularSystem { size: n, pivot: k });
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f == T::zero() {
                continue;
            }
            m[i * n + k] = T::zero();
            for c in k + 1..n {
                let v = m[k * n + c];
                m[i * n + c] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= m[k * n + c] * x[c];
        }
        x[k] = s / m[k * n + k];
    }
    Ok(x)
}

/// Solves `Lu + source = 0` on the free states with `u = boundary` on the fixed ones.
fn solve_dirichlet<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    fixed: &[bool],
    boundary: &[T],
    source: &[T],
) -> Result<HittingSolution<T>, SolveError> {
    let free: Vec<usize> = (0..g.len()).filter(|&i| !fixed[i]).collect();
    let mut pos = vec![usize::MAX; g.len()];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    let n = free.len();
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    for (k, &x) in free.iter().enumerate() {
        let mut rhs = source[x];
        let mut diag = T::zero();
        for &(y, r) in g.out_edges(x) {
            diag += r;
            if fixed[y] {
                rhs += r * boundary[y];
            } else {
                a[k * n + pos[y]] -= r;
            }
        }
        a[k * n + k] += diag;
        b[k] = rhs;
    }
    let sol = lu_solve(&a, &b)?;

    let mut res = T::zero();
    for k in 0..n {
        let mut s = -b[k];
        for c in 0..n {
            s += a[k * n + c] * sol[c];
        }
        res = res.max(s.abs());
    }
    let bnorm = b.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let residual = res / (T::one() + bnorm);
    if !(residual <= T::residual_tolerance()) {
        return Err(SolveError::ToleranceNotMet {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tolerance: T::residual_tolerance().to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut values = boundary.to_vec();
    for (k, &x) in free.iter().enumerate() {
        values[x] = sol[k];
    }
    Ok(HittingSolution { values, residual })
}

fn check_subsets<T: Scalar>(g: &AbsorbingWalkGraph<T>, a: &[usize], d: &[usize]) -> Result<(), SolveError> {
    let ok = !a.is_empty()
        && a.iter().chain(d).all(|&s| s < g.len() && g.is_absorbing(s))
        && !a.iter().any(|s| d.contains(s));
    if ok {
        Ok(())
    } else {
        Err(SolveError::InvalidTargetSet)
    }
}

/// Probability of being absorbed in `a` (as opposed to any other absorbing state).
///
/// `d` names the competing set explicitly; absorbing states outside `a` count as
/// failures whether or not they are listed.
pub fn hitting_probability<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    a: &[usize],
    d: &[usize],
) -> Result<HittingSolution<T>, SolveError> {
    check_subsets(g, a, d)?;
    let fixed: Vec<bool> = (0..g.len()).map(|i| g.is_absorbing(i)).collect();
    let mut boundary = vec![T::zero(); g.len()];
    for &s in a {
        boundary[s] = T::one();
    }
    let mut sol = solve_dirichlet(g, &fixed, &boundary, &vec![T::zero(); g.len()])?;
    for v in &mut sol.values {
        *v = v.max(T::zero()).min(T::one());
    }
    Ok(sol)
}

/// Free states for moments of the hitting time of `a`; every one of them must reach `a`.
fn time_domain<T: Scalar>(g: &AbsorbingWalkGraph<T>, a: &[usize]) -> Result<Vec<bool>, SolveError> {
    check_subsets(g, a, &[])?;
    let reach = g.can_reach(a);
    if let Some(i) = reach.iter().position(|&b| !b) {
        return Err(SolveError::InfiniteExpectation(g.label(i).to_string()));
    }
    let mut fixed = vec![false; g.len()];
    for &s in a {
        fixed[s] = true;
    }
    Ok(fixed)
}

/// Expected time to reach `a`.
pub fn expected_hitting_time<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    a: &[usize],
) -> Result<HittingSolution<T>, SolveError> {
    expected_hitting_time_with_costs(g, a, &vec![T::zero(); g.len()])
}

/// Expected time to reach `a` when each unit of time at `x` is supplemented by `cost[x]`
/// per unit exit rate, i.e. the solution of `Lw + 1 + cost = 0`.
pub fn expected_hitting_time_with_costs<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    a: &[usize],
    cost: &[T],
) -> Result<HittingSolution<T>, SolveError> {
    let fixed = time_domain(g, a)?;
    let zero = vec![T::zero(); g.len()];
    let source: Vec<T> =
        fixed.iter().zip(cost).map(|(&f, &c)| if f { T::zero() } else { T::one() + c }).collect();
    let mut sol = solve_dirichlet(g, &fixed, &zero, &source)?;
    clamp_nonneg(&mut sol);
    Ok(sol)
}

/// Second moment of the time to reach `a`.
pub fn second_moment<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    a: &[usize],
) -> Result<HittingSolution<T>, SolveError> {
    let first = expected_hitting_time(g, a)?;
    let fixed = time_domain(g, a)?;
    let zero = vec![T::zero(); g.len()];
    let source: Vec<T> = first.values.iter().map(|&w| w + w).collect();
    let mut sol = solve_dirichlet(g, &fixed, &zero, &source)?;
    clamp_nonneg(&mut sol);
    Ok(sol)
}

/// `E_x[tau 1{tau_a < tau_d}]` where `tau` is the hitting time of the absorbing set.
pub fn restricted_first_moment<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    a: &[usize],
    d: &[usize],
) -> Result<HittingSolution<T>, SolveError> {
    let w0 = hitting_probability(g, a, d)?;
    let fixed: Vec<bool> = (0..g.len()).map(|i| g.is_absorbing(i)).collect();
    let source: Vec<T> = (0..g.len()).map(|i| if fixed[i] { T::zero() } else { w0.values[i] }).collect();
    let mut sol = solve_dirichlet(g, &fixed, &vec![T::zero(); g.len()], &source)?;
    clamp_nonneg(&mut sol);
    Ok(sol)
}

fn clamp_nonneg<T: Scalar>(sol: &mut HittingSolution<T>) {
    for v in &mut sol.values {
        *v = v.max(T::zero());
    }
}

/// Closed-form solution of a second-order recursion together with its building blocks.
///
/// Vectors are indexed by `k` directly: `lambda[k]` is `Λ_k` for `k = 1..=N`,
/// and entry 0 is unused.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursionResult<T> {
    /// `x_0, ..., x_N`.
    pub x: Vec<T>,
    pub lambda: Vec<T>,
    pub upsilon: Vec<T>,
}

/// Solves `x_{i+1} - x_i = rho_i (x_i - x_{i-1}) - alpha_i` for `i = 1..N-1`
/// with `x_0 = 0` and `x_N = a`.
///
/// `rho` and `alpha` hold `rho_1..rho_{N-1}` and `alpha_1..alpha_{N-1}`.
pub fn tridiagonal_recursion<T: Scalar>(a: T, rho: &[T], alpha: &[T]) -> Result<RecursionResult<T>, SolveError> {
    if rho.len() != alpha.len() {
        return Err(SolveError::InvalidRecursion("rho and alpha lengths differ"));
    }
    if rho.iter().any(|&r| !(r > T::zero()) || !r.is_finite()) {
        return Err(SolveError::InvalidRecursion("rho must be positive and finite"));
    }
    let n = rho.len() + 1;
    let mut lambda = vec![T::zero(); n + 1];
    let mut upsilon = vec![T::zero(); n + 1];
    lambda[1] = T::one();
    let mut prod = T::one();
    // d_i = sum_{m<=i} alpha_m rho_{m+1}..rho_i
    let mut d = T::zero();
    for k in 1..n {
        prod = prod * rho[k - 1];
        lambda[k + 1] = lambda[k] + prod;
        d = rho[k - 1] * d + alpha[k - 1];
        upsilon[k + 1] = upsilon[k] + d;
    }
    let x1 = (a + upsilon[n]) / lambda[n];
    let mut x = vec![T::zero(); n + 1];
    for k in 1..n {
        x[k] = lambda[k] * x1 - upsilon[k];
    }
    x[n] = a;
    Ok(RecursionResult { x, lambda, upsilon })
}
