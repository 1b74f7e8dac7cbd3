//! Fundamental cells, the lattice they generate, and the finite graphs used to
//! analyse one excursion of the skeleton process.
//!
//! A cell is a strongly connected graph with two marked vertices. Gluing the
//! overline of cell `n` to the underline of cell `n + 1` yields a periodic
//! quasi one-dimensional lattice. The skeleton process records the index of the
//! last visited copy of the underline (the "star" states `n_*`).

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::AbsorbingWalkGraph;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub from: String,
    pub to: String,
    pub rate: T,
}

/// Raw cell description, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalCell<T> {
    pub vertices: Vec<String>,
    pub underline: String,
    pub overline: String,
    pub edges: Vec<Edge<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Underline,
    Overline,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mark::Underline => "underline",
            Mark::Overline => "overline",
        })
    }
}

/// A single problem found while validating a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Error)]
#[serde(tag = "kind")]
pub enum Violation {
    #[error("cell has no vertices")]
    EmptyVertexSet,
    #[error("vertex `{id}` listed twice")]
    DuplicateVertex { id: String },
    #[error("{mark} vertex `{id}` is not in the vertex set")]
    MarkedVertexMissing { mark: Mark, id: String },
    #[error("underline and overline are both `{id}`")]
    UnderlineEqualsOverline { id: String },
    #[error("edge {from} -> {to} refers to unknown vertex `{missing}`")]
    UnknownEndpoint { from: String, to: String, missing: String },
    #[error("self loop at `{vertex}`")]
    SelfLoop { vertex: String },
    #[error("edge {from} -> {to} listed twice")]
    DuplicateEdge { from: String, to: String },
    #[error("edge {from} -> {to} has non-positive rate {rate}")]
    NonPositiveRate { from: String, to: String, rate: f64 },
    #[error("edge {from} -> {to} has a non-finite rate")]
    NonFiniteRate { from: String, to: String },
    #[error("`{to}` is not reachable from `{from}`")]
    NotStronglyConnected { from: String, to: String },
}

/// All violations found in a cell.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct CellError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid cell:")?;
        for v in &self.violations {
            write!(f, " {v};")?;
        }
        Ok(())
    }
}

impl<T: Scalar> FundamentalCell<T> {
    pub fn new(vertices: Vec<String>, underline: &str, overline: &str, edges: Vec<Edge<T>>) -> Self {
        FundamentalCell { vertices, underline: underline.into(), overline: overline.into(), edges }
    }

    /// Converts the rates to another scalar type.
    pub fn cast<U: Scalar>(&self) -> FundamentalCell<U> {
        FundamentalCell {
            vertices: self.vertices.clone(),
            underline: self.underline.clone(),
            overline: self.overline.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    rate: U::from(e.rate).unwrap_or_else(U::nan),
                })
                .collect(),
        }
    }

    /// Multiplies every rate by `lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        let mut c = self.clone();
        for e in &mut c.edges {
            e.rate = e.rate * lambda;
        }
        c
    }

    /// The mirror image of the lattice: same rates, underline and overline swapped.
    pub fn reflected(&self) -> Self {
        let mut c = self.clone();
        std::mem::swap(&mut c.underline, &mut c.overline);
        c
    }

    /// Turns every edge around, keeping its rate, so that `(u, v)` and `(v, u)` exchange rates.
    pub fn with_swapped_rates(&self) -> Self {
        let mut c = self.clone();
        for e in &mut c.edges {
            std::mem::swap(&mut e.from, &mut e.to);
        }
        c
    }
}

/// A cell that passed validation, with its adjacency precomputed.
#[derive(Clone, Debug)]
pub struct ValidatedCell<T> {
    cell: FundamentalCell<T>,
    under: usize,
    over: usize,
    out: Vec<Vec<(usize, T)>>,
}

/// Checks every structural requirement and collects all violations.
pub fn validate_cell<T: Scalar>(cell: &FundamentalCell<T>) -> Result<ValidatedCell<T>, CellError> {
    let mut vs = Vec::new();
    if cell.vertices.is_empty() {
        vs.push(Violation::EmptyVertexSet);
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in cell.vertices.iter().enumerate() {
        if index.insert(v.as_str(), i).is_some() {
            vs.push(Violation::DuplicateVertex { id: v.clone() });
        }
    }
    for (mark, id) in [(Mark::Underline, &cell.underline), (Mark::Overline, &cell.overline)] {
        if !index.contains_key(id.as_str()) {
            vs.push(Violation::MarkedVertexMissing { mark, id: id.clone() });
        }
    }
    if cell.underline == cell.overline {
        vs.push(Violation::UnderlineEqualsOverline { id: cell.underline.clone() });
    }

    let n = cell.vertices.len();
    let mut out: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for e in &cell.edges {
        let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
            let missing = if index.contains_key(e.from.as_str()) { &e.to } else { &e.from };
            vs.push(Violation::UnknownEndpoint {
                from: e.from.clone(),
                to: e.to.clone(),
                missing: missing.clone(),
            });
            continue;
        };
        if a == b {
            vs.push(Violation::SelfLoop { vertex: e.from.clone() });
            continue;
        }
        if !seen.insert((a, b)) {
            vs.push(Violation::DuplicateEdge { from: e.from.clone(), to: e.to.clone() });
            continue;
        }
        if !e.rate.is_finite() {
            vs.push(Violation::NonFiniteRate { from: e.from.clone(), to: e.to.clone() });
            continue;
        }
        if e.rate <= T::zero() {
            vs.push(Violation::NonPositiveRate {
                from: e.from.clone(),
                to: e.to.clone(),
                rate: e.rate.to_f64().unwrap_or(f64::NAN),
            });
            continue;
        }
        out[a].push((b, e.rate));
    }

    if n > 0 {
        if let Some((x, y)) = unreachable_pair(&out) {
            vs.push(Violation::NotStronglyConnected {
                from: cell.vertices[x].clone(),
                to: cell.vertices[y].clone(),
            });
        }
    }

    if !vs.is_empty() {
        return Err(CellError { violations: vs });
    }
    for adj in &mut out {
        adj.sort_by_key(|&(t, _)| t);
    }
    Ok(ValidatedCell {
        under: index[cell.underline.as_str()],
        over: index[cell.overline.as_str()],
        cell: cell.clone(),
        out,
    })
}

/// Returns an ordered pair `(x, y)` with `y` unreachable from `x`, if any.
fn unreachable_pair<T>(out: &[Vec<(usize, T)>]) -> Option<(usize, usize)> {
    let n = out.len();
    let mut inn = vec![Vec::new(); n];
    for (x, adj) in out.iter().enumerate() {
        for &(y, _) in adj {
            inn[y].push(x);
        }
    }
    let fwd: Vec<Vec<usize>> = out.iter().map(|a| a.iter().map(|&(y, _)| y).collect()).collect();
    let sweep = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    };
    if let Some(y) = sweep(&fwd).iter().position(|&b| !b) {
        return Some((0, y));
    }
    sweep(&inn).iter().position(|&b| !b).map(|x| (x, 0))
}

/// A vertex of the infinite lattice: a cell vertex other than the overline, in cell `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVertex {
    pub base: usize,
    pub cell: i64,
}

impl<T: Scalar> ValidatedCell<T> {
    pub fn cell(&self) -> &FundamentalCell<T> {
        &self.cell
    }

    pub fn n_vertices(&self) -> usize {
        self.cell.vertices.len()
    }

    pub fn vertex_id(&self, i: usize) -> &str {
        &self.cell.vertices[i]
    }

    pub fn underline(&self) -> usize {
        self.under
    }

    pub fn overline(&self) -> usize {
        self.over
    }

    /// Outgoing edges of cell vertex `i`, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, T)] {
        &self.out[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> T {
        self.out[i].iter().find(|&&(t, _)| t == j).map_or_else(T::zero, |&(_, r)| r)
    }

    /// The star state `n_*`.
    pub fn star(&self, n: i64) -> LatticeVertex {
        LatticeVertex { base: self.under, cell: n }
    }

    /// Places cell vertex `w` of cell `n` on the lattice, folding the overline into the next cell.
    pub fn lift(&self, w: usize, n: i64) -> LatticeVertex {
        if w == self.over {
            self.star(n + 1)
        } else {
            LatticeVertex { base: w, cell: n }
        }
    }

    /// Outgoing lattice edges of `x`.
    pub fn lattice_out_edges(&self, x: LatticeVertex) -> Vec<(LatticeVertex, T)> {
        debug_assert_ne!(x.base, self.over);
        let mut v: Vec<_> = self.out[x.base].iter().map(|&(w, r)| (self.lift(w, x.cell), r)).collect();
        if x.base == self.under {
            v.extend(self.out[self.over].iter().map(|&(w, r)| (self.lift(w, x.cell - 1), r)));
        }
        v
    }

    /// Printable name: `n_*` for star states, `id@n` otherwise.
    pub fn lattice_label(&self, x: LatticeVertex) -> String {
        if x.base == self.under {
            format!("{}_*", x.cell)
        } else {
            format!("{}@{}", self.cell.vertices[x.base], x.cell)
        }
    }
}

/// The finite graph on which one excursion `0_* -> {-1_*, 1_*}` takes place.
#[derive(Clone, Debug)]
pub struct TwoCellGraph<T> {
    pub graph: AbsorbingWalkGraph<T>,
    /// Lattice position of each state.
    pub sites: Vec<LatticeVertex>,
    pub minus: usize,
    pub zero: usize,
    pub plus: usize,
}

/// Builds the two-cell graph: cells `-1` and `0` plus the state `1_*`,
/// absorbing at `-1_*` and `1_*`, started at `0_*`.
pub fn build_two_cell<T: Scalar>(cell: &ValidatedCell<T>) -> TwoCellGraph<T> {
    let mut sites = Vec::new();
    for n in [-1, 0] {
        for b in 0..cell.n_vertices() {
            if b != cell.over {
                sites.push(LatticeVertex { base: b, cell: n });
            }
        }
    }
    sites.push(cell.star(1));
    let pos: HashMap<LatticeVertex, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let minus = pos[&cell.star(-1)];
    let zero = pos[&cell.star(0)];
    let plus = pos[&cell.star(1)];

    let mut edges = Vec::new();
    for (i, &s) in sites.iter().enumerate() {
        if i == minus || i == plus {
            continue;
        }
        for (t, r) in cell.lattice_out_edges(s) {
            edges.push((i, pos[&t], r));
        }
    }
    let labels = sites.iter().map(|&s| cell.lattice_label(s)).collect();
    let graph = AbsorbingWalkGraph::new(labels, edges, &[minus, plus], zero)
        .expect("a validated cell always yields a well-formed two-cell graph");
    TwoCellGraph { graph, sites, minus, zero, plus }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// First jump along an edge leaving the underline of cell 0.
    Forward,
    /// First jump along an edge leaving the overline of cell -1.
    Backward,
}

/// Result of one excursion from `0_*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Plus,
    Minus,
    Return,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstJump<T> {
    pub target: usize,
    pub rate: T,
    pub direction: Direction,
}

/// The cell with both marked vertices absorbing, and the law of the first jump from `0_*`.
///
/// Backward jumps land in cell `-1`, which is relabelled as a copy of the cell.
#[derive(Clone, Debug)]
pub struct OneCellGraph<T> {
    pub graph: AbsorbingWalkGraph<T>,
    pub under: usize,
    pub over: usize,
    pub exit_rate: T,
    pub jumps: Vec<FirstJump<T>>,
}

impl<T: Scalar> OneCellGraph<T> {
    /// Translates where a path was absorbed into a skeleton outcome.
    pub fn outcome(&self, direction: Direction, absorbed_at: usize) -> Outcome {
        match (direction, absorbed_at == self.over) {
            (Direction::Forward, true) => Outcome::Plus,
            (Direction::Backward, false) => Outcome::Minus,
            _ => Outcome::Return,
        }
    }
}

pub fn build_one_cell<T: Scalar>(cell: &ValidatedCell<T>) -> OneCellGraph<T> {
    let (under, over) = (cell.under, cell.over);
    let mut edges = Vec::new();
    for x in 0..cell.n_vertices() {
        if x != under && x != over {
            edges.extend(cell.out[x].iter().map(|&(y, r)| (x, y, r)));
        }
    }
    let graph = AbsorbingWalkGraph::new(cell.cell.vertices.clone(), edges, &[under, over], under)
        .expect("a validated cell always yields a well-formed one-cell graph");
    let mut jumps: Vec<FirstJump<T>> = cell.out[under]
        .iter()
        .map(|&(target, rate)| FirstJump { target, rate, direction: Direction::Forward })
        .collect();
    jumps.extend(
        cell.out[over]
            .iter()
            .map(|&(target, rate)| FirstJump { target, rate, direction: Direction::Backward }),
    );
    let exit_rate = jumps.iter().map(|j| j.rate).sum();
    OneCellGraph { graph, under, over, exit_rate, jumps }
}
