//! Removal of linear chains.
//!
//! A linear chain is a path `x_0, ..., x_n` whose intermediate states only jump to
//! their two path neighbours and are only entered from them. Deleting the
//! intermediates and adding effective rates between the endpoints preserves
//! hitting probabilities; expected hitting times are preserved once each
//! endpoint carries the mean time spent inside the chains it can enter.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::graph::{AbsorbingWalkGraph, GraphError};
use crate::linsolve::{self, HittingSolution, SolveError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("not a linear chain: {0}")]
    NotAChain(String),
    #[error("chains overlap at state `{0}`")]
    OverlappingChains(String),
    #[error("the start state `{0}` cannot be removed")]
    StartRemoved(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A path `x_0..x_n` with `n >= 2`, together with the rates of its intermediates.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearChain<T> {
    pub vertices: Vec<usize>,
    /// `r_minus[i - 1] = r(x_i, x_{i-1})` for `i = 1..n-1`.
    pub r_minus: Vec<T>,
    /// `r_plus[i - 1] = r(x_i, x_{i+1})` for `i = 1..n-1`.
    pub r_plus: Vec<T>,
}

impl<T: Scalar> LinearChain<T> {
    /// Checks the chain conditions for `path` in `g`.
    pub fn from_path(g: &AbsorbingWalkGraph<T>, path: &[usize]) -> Result<Self, ReductionError> {
        let fail = |m: String| Err(ReductionError::NotAChain(m));
        if path.len() < 3 {
            return fail("a chain needs at least one intermediate state".into());
        }
        if path.iter().any(|&s| s >= g.len()) {
            return fail("state index out of range".into());
        }
        let distinct: HashSet<_> = path.iter().collect();
        if distinct.len() != path.len() {
            return fail("states repeat along the path".into());
        }
        let inn = g.in_neighbors();
        let (mut r_minus, mut r_plus) = (Vec::new(), Vec::new());
        for i in 1..path.len() - 1 {
            let (prev, x, next) = (path[i - 1], path[i], path[i + 1]);
            let out = g.out_edges(x);
            let (rm, rp) = (g.rate(x, prev), g.rate(x, next));
            if out.len() != 2 || rm == T::zero() || rp == T::zero() {
                return fail(format!("`{}` must jump exactly to its two neighbours", g.label(x)));
            }
            if inn[x].iter().any(|&y| y != prev && y != next) {
                return fail(format!("`{}` is entered from outside the path", g.label(x)));
            }
            r_minus.push(rm);
            r_plus.push(rp);
        }
        Ok(LinearChain { vertices: path.to_vec(), r_minus, r_plus })
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn last(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    pub fn intermediates(&self) -> &[usize] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    /// The same path traversed from `x_n` to `x_0`.
    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut r_minus = self.r_plus.clone();
        let mut r_plus = self.r_minus.clone();
        r_minus.reverse();
        r_plus.reverse();
        LinearChain { vertices, r_minus, r_plus }
    }
}

/// `Γ = 1 + Σ_i Π_{j<=i} r_j^- / r_j^+`, evaluated innermost-first.
pub fn gamma<T: Scalar>(chain: &LinearChain<T>) -> T {
    chain
        .r_minus
        .iter()
        .zip(&chain.r_plus)
        .rev()
        .fold(T::one(), |acc, (&m, &p)| T::one() + m / p * acc)
}

/// Mean time spent inside the chain, up to the factor `1 / Γ`, by a walk entering it from `x_0`.
pub fn chain_cost<T: Scalar>(chain: &LinearChain<T>) -> T {
    let mut d = T::zero();
    let mut c = T::zero();
    for (&m, &p) in chain.r_minus.iter().zip(&chain.r_plus) {
        d = m / p * d + T::one() / p;
        c += d;
    }
    c
}

fn eligible<T: Scalar>(g: &AbsorbingWalkGraph<T>, inn: &[Vec<usize>], x: usize) -> Option<(usize, usize)> {
    let out = g.out_edges(x);
    if out.len() != 2 {
        return None;
    }
    let (a, b) = (out[0].0, out[1].0);
    inn[x].iter().all(|&y| y == a || y == b).then_some((a, b))
}

/// Finds every maximal linear chain whose intermediates avoid `protected`.
///
/// Each chain is reported once, oriented so that its `(first, last)` labels compare
/// lexicographically smaller than the reverse. Chains whose two endpoints coincide are skipped.
pub fn find_linear_chains<T: Scalar>(g: &AbsorbingWalkGraph<T>, protected: &[usize]) -> Vec<LinearChain<T>> {
    let inn = g.in_neighbors();
    let nbrs: Vec<Option<(usize, usize)>> = (0..g.len())
        .map(|x| if protected.contains(&x) { None } else { eligible(g, &inn, x) })
        .collect();
    let mut done = vec![false; g.len()];
    let mut chains = Vec::new();
    for v in 0..g.len() {
        let Some((a, b)) = nbrs[v] else { continue };
        if done[v] {
            continue;
        }
        done[v] = true;
        let mut closed = false;
        let mut walk = |first: usize| {
            let mut side = Vec::new();
            let (mut prev, mut cur) = (v, first);
            loop {
                side.push(cur);
                if cur == v {
                    closed = true;
                    break;
                }
                let Some((p, q)) = nbrs[cur] else { break };
                done[cur] = true;
                let next = if p == prev { q } else { p };
                prev = cur;
                cur = next;
            }
            side
        };
        let mut left = walk(a);
        let right = walk(b);
        if closed {
            continue;
        }
        left.reverse();
        left.push(v);
        left.extend(right);
        if left[0] == *left.last().unwrap() {
            continue;
        }
        let fwd = (g.label(left[0]), g.label(*left.last().unwrap()));
        if (fwd.1, fwd.0) < fwd {
            left.reverse();
        }
        if let Ok(c) = LinearChain::from_path(g, &left) {
            chains.push(c);
        }
    }
    chains
}

/// Graph left after removing chains, with the extra holding cost at each retained state.
#[derive(Clone, Debug)]
pub struct ReducedGraph<T> {
    pub graph: AbsorbingWalkGraph<T>,
    /// `source[x]` is the expected time spent in removed chains per visit to `x`, times the exit rate.
    pub source: Vec<T>,
    /// Index in the original graph of each retained state.
    pub original: Vec<usize>,
}

impl<T: Scalar> ReducedGraph<T> {
    pub fn index_of_original(&self, s: usize) -> Option<usize> {
        self.original.iter().position(|&o| o == s)
    }
}

/// Removes the intermediates of every chain in `family` and rewires the endpoints.
///
/// The family must consist of valid chains with pairwise disjoint intermediates, none of
/// which is an endpoint of another chain; this excludes a chain together with its reversal
/// or with one of its subchains.
pub fn reduce_graph<T: Scalar>(
    g: &AbsorbingWalkGraph<T>,
    family: &[LinearChain<T>],
) -> Result<ReducedGraph<T>, ReductionError> {
    let mut removed = vec![false; g.len()];
    for c in family {
        let fresh = LinearChain::from_path(g, &c.vertices)?;
        if &fresh != c {
            return Err(ReductionError::NotAChain("rates do not match the graph".into()));
        }
        for &x in c.intermediates() {
            if removed[x] {
                return Err(ReductionError::OverlappingChains(g.label(x).into()));
            }
            removed[x] = true;
        }
    }
    for c in family {
        for e in [c.first(), c.last()] {
            if removed[e] {
                return Err(ReductionError::OverlappingChains(g.label(e).into()));
            }
        }
    }
    if removed[g.start()] {
        return Err(ReductionError::StartRemoved(g.label(g.start()).into()));
    }

    let original: Vec<usize> = (0..g.len()).filter(|&i| !removed[i]).collect();
    let mut pos = vec![usize::MAX; g.len()];
    for (k, &i) in original.iter().enumerate() {
        pos[i] = k;
    }
    let mut rates: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for (x, y, r) in g.edges() {
        if !removed[x] && !removed[y] {
            rates.insert((pos[x], pos[y]), r);
        }
    }
    let mut source = vec![T::zero(); original.len()];
    for c in family {
        for ch in [c.clone(), c.reversed()] {
            let (x, x1, y) = (ch.first(), ch.vertices[1], ch.last());
            let enter = g.rate(x, x1);
            if enter == T::zero() {
                continue;
            }
            let gm = gamma(&ch);
            *rates.entry((pos[x], pos[y])).or_insert_with(T::zero) += enter / gm;
            source[pos[x]] += enter * chain_cost(&ch) / gm;
        }
    }
    let labels = original.iter().map(|&i| g.label(i).to_string()).collect();
    let absorbing: Vec<usize> = original.iter().filter(|&&i| g.is_absorbing(i)).map(|&i| pos[i]).collect();
    let edges = rates.into_iter().map(|((x, y), r)| (x, y, r)).collect();
    let graph = AbsorbingWalkGraph::new(labels, edges, &absorbing, pos[g.start()])?;
    Ok(ReducedGraph { graph, source, original })
}

/// Hitting probabilities on the reduced graph; they agree with the full graph on retained states.
pub fn reduced_hitting<T: Scalar>(
    rg: &ReducedGraph<T>,
    a: &[usize],
    d: &[usize],
) -> Result<HittingSolution<T>, SolveError> {
    linsolve::hitting_probability(&rg.graph, a, d)
}

/// Expected absorption time on the reduced graph, charging the chain costs at each visit.
pub fn reduced_expected_time<T: Scalar>(rg: &ReducedGraph<T>, a: &[usize]) -> Result<HittingSolution<T>, SolveError> {
    linsolve::expected_hitting_time_with_costs(&rg.graph, a, &rg.source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(rates: &[(f64, f64)]) -> AbsorbingWalkGraph<f64> {
        // states 0..=n, absorbing at both ends, rates[i] = (left, right) at state i + 1
        let n = rates.len() + 1;
        let labels = (0..=n).map(|i| format!("s{i}")).collect();
        let mut e = Vec::new();
        for (i, &(l, r)) in rates.iter().enumerate() {
            e.push((i + 1, i, l));
            e.push((i + 1, i + 2, r));
        }
        AbsorbingWalkGraph::new(labels, e, &[0, n], 1).unwrap()
    }

    #[test]
    fn unit_rate_chain() {
        let g = path_graph(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let c = LinearChain::from_path(&g, &[1, 2, 3, 4]).unwrap();
        assert_eq!(gamma(&c), 3.0);
        assert_eq!(chain_cost(&c), 3.0);
    }

    #[test]
    fn gamma_reversal_identity() {
        let g = path_graph(&[(1.0, 1.0), (0.3, 2.0), (4.0, 0.5), (1.5, 1.1), (1.0, 1.0)]);
        let c = LinearChain::from_path(&g, &[1, 2, 3, 4, 5]).unwrap();
        let prod: f64 = c.r_minus.iter().zip(&c.r_plus).map(|(m, p)| m / p).product();
        assert!((gamma(&c.reversed()) - gamma(&c) / prod).abs() < 1e-14);
    }

    #[test]
    fn start_cannot_be_removed() {
        let g = path_graph(&[(1.0, 1.0), (1.0, 1.0)]);
        let c = LinearChain::from_path(&g, &[0, 1, 2]).unwrap();
        assert!(matches!(reduce_graph(&g, &[c]), Err(ReductionError::StartRemoved(_))));
    }

    #[test]
    fn chain_and_reversal_rejected() {
        let g = path_graph(&[(1.0, 1.0), (1.0, 2.0), (1.0, 1.0)]);
        let c = LinearChain::from_path(&g, &[1, 2, 3, 4]).unwrap();
        let r = c.reversed();
        assert!(matches!(reduce_graph(&g, &[c, r]), Err(ReductionError::OverlappingChains(_))));
    }

    #[test]
    fn finds_one_chain_in_a_path() {
        let g = path_graph(&[(1.0, 2.0), (1.0, 2.0), (1.0, 2.0)]);
        let chains = find_linear_chains(&g, &[1]);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].vertices, vec![1, 2, 3, 4]);
    }
}
