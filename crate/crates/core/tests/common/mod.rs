#![allow(dead_code)]

use motorwalk::cell::{Edge, FundamentalCell};
use motorwalk::{Parallel, Periodic};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log-uniform rate in `[0.1, 10]`.
pub fn rate<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.gen_range(-1.0..=1.0))
}

pub fn rates<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rate(rng)).collect()
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Strongly connected cell on `n` vertices: a random Hamiltonian cycle plus extra edges.
pub fn random_cell<R: Rng>(rng: &mut R, n: usize, density: f64) -> FundamentalCell<f64> {
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; n]; n];
    for k in 0..n {
        present[order[k]][order[(k + 1) % n]] = true;
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                present[a][b] = true;
            }
        }
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if present[a][b] {
                edges.push(Edge { from: ids[a].clone(), to: ids[b].clone(), rate: rate(rng) });
            }
        }
    }
    let u = rng.gen_range(0..n);
    let o = (u + rng.gen_range(1..n)) % n;
    FundamentalCell::new(ids.clone(), &ids[u], &ids[o], edges)
}

/// Random cell with `chains` extra bidirectional paths of 1..=3 new vertices between core vertices.
pub fn random_cell_with_chains<R: Rng>(rng: &mut R, core: usize, chains: usize) -> FundamentalCell<f64> {
    let mut cell = random_cell(rng, core, 0.3);
    for c in 0..chains {
        let x = rng.gen_range(0..core);
        let y = (x + rng.gen_range(1..core)) % core;
        let len = rng.gen_range(1..=3);
        let mut path = vec![format!("v{x}")];
        for k in 0..len {
            let id = format!("c{c}_{k}");
            cell.vertices.push(id.clone());
            path.push(id);
        }
        path.push(format!("v{y}"));
        for w in path.windows(2) {
            cell.edges.push(Edge { from: w[0].clone(), to: w[1].clone(), rate: rate(rng) });
            cell.edges.push(Edge { from: w[1].clone(), to: w[0].clone(), rate: rate(rng) });
        }
    }
    cell
}

pub fn random_periodic<R: Rng>(rng: &mut R, n: usize) -> Periodic {
    Periodic::new(rates(rng, n), rates(rng, n)).unwrap()
}

pub fn random_parallel<R: Rng>(rng: &mut R, n1: usize, n2: usize) -> Parallel {
    Parallel::new(rates(rng, n1), rates(rng, n1), rates(rng, n2), rates(rng, n2)).unwrap()
}
