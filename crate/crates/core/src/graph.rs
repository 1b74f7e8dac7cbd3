//! Finite continuous-time walks with absorbing states.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

/// Ways a state graph can fail its structural invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("edge endpoint index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("edge {from} -> {to} has non-positive or non-finite rate")]
    BadRate { from: String, to: String },
    #[error("self loop at `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: String, to: String },
    #[error("absorbing state `{0}` has outgoing edges")]
    AbsorbingHasExit(String),
    #[error("graph has no absorbing state")]
    NoAbsorbingStates,
    #[error("no absorbing state is reachable from `{0}`")]
    Trapped(String),
}

/// A finite directed graph with positive jump rates, a start state and a set of
/// absorbing states that have no outgoing edges.
#[derive(Clone, Debug)]
pub struct AbsorbingWalkGraph<T> {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<Vec<(usize, T)>>,
    absorbing: Vec<bool>,
    start: usize,
}

impl<T: Scalar> AbsorbingWalkGraph<T> {
    /// Builds the graph and checks its invariants.
    ///
    /// Every non-absorbing state must reach some absorbing state.
    pub fn new(
        labels: Vec<String>,
        edges: Vec<(usize, usize, T)>,
        absorbing: &[usize],
        start: usize,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        if start >= n {
            return Err(GraphError::IndexOutOfRange(start));
        }
        let mut is_abs = vec![false; n];
        for &a in absorbing {
            if a >= n {
                return Err(GraphError::IndexOutOfRange(a));
            }
            is_abs[a] = true;
        }
        if !is_abs.iter().any(|&b| b) {
            return Err(GraphError::NoAbsorbingStates);
        }
        let mut out: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (x, y, r) in edges {
            if x >= n || y >= n {
                return Err(GraphError::IndexOutOfRange(x.max(y)));
            }
            if x == y {
                return Err(GraphError::SelfLoop(labels[x].clone()));
            }
            if !(r > T::zero()) || !r.is_finite() {
                return Err(GraphError::BadRate { from: labels[x].clone(), to: labels[y].clone() });
            }
            if is_abs[x] {
                return Err(GraphError::AbsorbingHasExit(labels[x].clone()));
            }
            if out[x].iter().any(|&(t, _)| t == y) {
                return Err(GraphError::DuplicateEdge { from: labels[x].clone(), to: labels[y].clone() });
            }
            out[x].push((y, r));
        }
        for adj in &mut out {
            adj.sort_by_key(|&(t, _)| t);
        }
        let g = AbsorbingWalkGraph { labels, index, out, absorbing: is_abs, start };
        let reach = g.can_reach(&g.absorbing_states());
        if let Some(i) = reach.iter().position(|&b| !b) {
            return Err(GraphError::Trapped(g.labels[i].clone()));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.absorbing[i]
    }

    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.absorbing[i]).collect()
    }

    /// Outgoing edges of `i`, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, T)] {
        &self.out[i]
    }

    /// Jump rate from `i` to `j`, zero when there is no edge.
    pub fn rate(&self, i: usize, j: usize) -> T {
        self.out[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map(|k| self.out[i][k].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Total jump rate out of `i`.
    pub fn exit_rate(&self, i: usize) -> T {
        self.out[i].iter().map(|&(_, r)| r).sum()
    }

    /// All edges as `(from, to, rate)` triples.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(x, adj)| adj.iter().map(move |&(y, r)| (x, y, r)))
    }

    /// Predecessors of every state.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut inn = vec![Vec::new(); self.len()];
        for (x, y, _) in self.edges() {
            inn[y].push(x);
        }
        inn
    }

    /// Marks the states from which some state of `targets` is reachable.
    pub fn can_reach(&self, targets: &[usize]) -> Vec<bool> {
        let inn = self.in_neighbors();
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = targets.to_vec();
        for &t in targets {
            seen[t] = true;
        }
        while let Some(y) = stack.pop() {
            for &x in &inn[y] {
                if !seen[x] {
                    seen[x] = true;
                    stack.push(x);
                }
            }
        }
        seen
    }
}

impl<T: Scalar> fmt::Display for AbsorbingWalkGraph<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, y, r) in self.edges() {
            writeln!(f, "{} -> {} : {}", self.labels[x], self.labels[y], r)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn rejects_trapped_state() {
        let e = AbsorbingWalkGraph::new(labels(3), vec![(0, 1, 1.0), (1, 0, 1.0)], &[2], 0);
        assert_eq!(e.unwrap_err(), GraphError::Trapped("0".into()));
    }

    #[test]
    fn rejects_exit_from_absorbing() {
        let e = AbsorbingWalkGraph::new(labels(2), vec![(0, 1, 1.0), (1, 0, 1.0)], &[1], 0);
        assert!(matches!(e, Err(GraphError::AbsorbingHasExit(_))));
    }

    #[test]
    fn rate_lookup() {
        let g = AbsorbingWalkGraph::new(labels(3), vec![(0, 2, 2.0), (0, 1, 0.5)], &[1, 2], 0).unwrap();
        assert_eq!(g.rate(0, 2), 2.0);
        assert_eq!(g.rate(0, 1), 0.5);
        assert_eq!(g.rate(1, 0), 0.0);
        assert_eq!(g.exit_rate(0), 2.5);
    }
}
