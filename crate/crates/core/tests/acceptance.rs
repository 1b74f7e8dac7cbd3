//! Acceptance criteria, one line each. Run with `cargo test -p motorwalk --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use motorwalk::cell::{build_two_cell, validate_cell};
use motorwalk::kinetics::{compute, reduced_velocity, Method};
use motorwalk::mcsim::{clt_check_with_retry, estimate_v_sigma, simulate_cycles, CycleSimulator};
use motorwalk::models::{lump_identical, published_d_reference};
use motorwalk::reduction::{chain_cost, find_linear_chains, gamma};
use motorwalk::{Cell, Parallel, Periodic};
use rand::Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Largest relative deviation of the two exact pipelines from `(v, sigma_sq)`.
fn pipeline_error(cell: &Cell, v: f64, sigma_sq: f64) -> f64 {
    let c = validate_cell(cell).expect("generated cells are valid");
    let mut worst = 0.0f64;
    for m in [Method::SingleCell, Method::TwoCell] {
        let k = compute(&c, m).expect("solvable");
        worst = worst.max(rel(k.v, v)).max(rel(k.sigma_sq.unwrap(), sigma_sq));
    }
    worst
}

fn homogeneous() -> Outcome {
    let mut worst = 0.0f64;
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (5.0, 0.5)] {
        for n in [1usize, 2, 4] {
            let nf = n as f64;
            let v = (a - b) / nf;
            let s = if a == b { 2.0 * a / (nf * nf) } else { (a + b) / (nf * nf) };
            let m = Periodic::homogeneous(a, b, n).unwrap();
            let c = validate_cell(&m.cell()).unwrap();
            worst = worst
                .max(pipeline_error(&m.cell(), v, s))
                .max(rel(reduced_velocity(&c).unwrap().0, v))
                .max(rel(m.velocity(), v))
                .max(rel(m.diffusion(), s));
        }
    }
    Outcome { ok: worst <= 1e-12, detail: format!("max rel err {worst:.2e} (tol 1e-12)") }
}

fn derrida_formula(p0: f64, p1: f64, m0: f64, m1: f64) -> f64 {
    let s = p0 + p1 + m0 + m1;
    (p0 * p1 + m0 * m1) / s - 2.0 * (p0 * p1 - m0 * m1).powi(2) / s.powi(3)
}

fn two_periodic() -> Outcome {
    let mut rng = common::rng(1002);
    let (mut closed, mut pipe) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let r = common::rates(&mut rng, 4);
        let m = Periodic::new(vec![r[0], r[1]], vec![r[2], r[3]]).unwrap();
        closed = closed.max(rel(m.diffusion(), derrida_formula(r[0], r[1], r[2], r[3])));
        pipe = pipe.max(pipeline_error(&m.cell(), m.velocity(), m.diffusion()));
    }
    let m = Periodic::new(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
    let spot = rel(m.velocity(), 5.0 / 7.0).max(rel(m.diffusion(), 293.0 / 343.0));
    Outcome {
        ok: closed <= 1e-12 && pipe <= 1e-9 && spot <= 1e-12,
        detail: format!(
            "closed form vs formula {closed:.2e} (tol 1e-12), vs pipelines {pipe:.2e} (tol 1e-9), spot 5/7, 293/343 {spot:.2e}"
        ),
    }
}

fn periodic_general() -> Outcome {
    let mut rng = common::rng(1003);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let m = common::random_periodic(&mut rng, n);
        worst = worst.max(pipeline_error(&m.cell(), m.velocity(), m.diffusion()));
    }
    Outcome { ok: worst <= 1e-9, detail: format!("200 instances, max rel err {worst:.2e} (tol 1e-9)") }
}

fn parallel() -> Outcome {
    let mut rng = common::rng(1004);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n1, n2) = (rng.gen_range(2..=5), rng.gen_range(2..=5));
        let m = common::random_parallel(&mut rng, n1, n2);
        worst = worst.max(pipeline_error(&m.cell(), m.velocity(), m.diffusion()));
    }
    let m = Parallel::symmetric(2.0, 1.0);
    let spot = rel(m.velocity(), 2.0 / 3.0).max(rel(m.diffusion(), 82.0 / 81.0));
    Outcome {
        ok: worst <= 1e-9 && spot <= 1e-12,
        detail: format!("200 instances, max rel err {worst:.2e} (tol 1e-9), spot 2/3, 82/81 {spot:.2e}"),
    }
}

fn lumping() -> Outcome {
    let mut rng = common::rng(1005);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (a, b) = (common::rate(&mut rng), common::rate(&mut rng));
        worst = worst.max(rel(lump_identical(a, b).diffusion(), Parallel::symmetric(a, b).diffusion()));
    }
    Outcome { ok: worst <= 1e-12, detail: format!("50 pairs, max rel err {worst:.2e} (tol 1e-12)") }
}

fn discrepancy() -> Outcome {
    let half = Parallel::symmetric(2.0, 1.0).diffusion() / 2.0;
    let d = published_d_reference(2.0, 1.0);
    let at_zero = rel(published_d_reference(3.0, 0.0), 20.0 / 27.0 * 3.0);
    let ok = rel(half, 41.0 / 81.0) <= 1e-12 && rel(d, 124.0 / 81.0) <= 1e-12 && (d - half).abs() > 1e-6 && at_zero <= 1e-15;
    Outcome { ok, detail: format!("sigma^2/2 = {half:.6}, published D = {d:.6}, D(beta=0) = 20a/27 err {at_zero:.1e}") }
}

fn chain_removal() -> Outcome {
    let mut rng = common::rng(1007);
    let (mut worst, mut removed) = (0.0f64, 0usize);
    let mut without = 0;
    for _ in 0..100 {
        let core = rng.gen_range(2..6);
        let extra = rng.gen_range(1..4);
        let c = validate_cell(&common::random_cell_with_chains(&mut rng, core, extra)).unwrap();
        let full = compute(&c, Method::TwoCell).unwrap().v;
        let (v, k) = reduced_velocity(&c).unwrap();
        worst = worst.max((v - full).abs() / full.abs().max(1e-3));
        removed += k;
        without += usize::from(k == 0);
    }
    Outcome {
        ok: worst <= 1e-10 && without == 0,
        detail: format!("100 cells, {removed} chains removed, max rel err {worst:.2e} (tol 1e-10)"),
    }
}

fn monte_carlo_lln() -> Outcome {
    let mut rng = common::rng(1008);
    let mut covered = 0;
    let mut worst_z = 0.0f64;
    for i in 0..20u64 {
        let n = rng.gen_range(2..=6);
        let c = validate_cell(&common::random_cell(&mut rng, n, 0.3)).unwrap();
        let v = compute(&c, Method::TwoCell).unwrap().v;
        let samples = simulate_cycles(&c, 100_000, 8000 + i).unwrap();
        let (est, _) = estimate_v_sigma(&samples, 8000 + i).unwrap();
        let z = (est.value - v).abs() / est.std_error;
        worst_z = worst_z.max(z);
        covered += usize::from(z <= 3.0);
    }
    Outcome {
        ok: covered >= 19,
        detail: format!("{covered}/20 cells within 3 SE (need 19), worst |z| {worst_z:.2}"),
    }
}

fn clt() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut rng = common::rng(1009);
    let par = common::random_parallel(&mut rng, 2, 3);
    let cells = [("homogeneous", Periodic::homogeneous(2.0, 1.0, 1).unwrap().cell()), ("parallel", par.cell())];
    for (k, (name, cell)) in cells.iter().enumerate() {
        let c = validate_cell(cell).unwrap();
        let exact = compute(&c, Method::TwoCell).unwrap();
        let sim = CycleSimulator::new(&c);
        let reports = clt_check_with_retry(&sim, exact.v, exact.sigma_sq.unwrap(), 1e4, 1000, 9000 + k as u64).unwrap();
        let last = reports.last().unwrap();
        ok &= last.passed();
        parts.push(format!(
            "{name}: var rel err {:.3} (tol 0.05), AD {:.2} (crit 3.857), mean z {:.2}, attempts {}",
            last.variance_rel_err,
            last.ad_statistic,
            last.mean_z_score,
            reports.len()
        ));
    }
    Outcome { ok, detail: parts.join("; ") }
}

fn properties() -> Outcome {
    let mut rng = common::rng(1010);
    let (mut scaling, mut reversal) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let cell = common::random_cell(&mut rng, n, 0.3);
        let lambda = 10f64.powf(rng.gen_range(-2.0..2.0));
        let base = compute(&validate_cell(&cell).unwrap(), Method::TwoCell).unwrap();
        let scaled = compute(&validate_cell(&cell.scaled(lambda)).unwrap(), Method::SingleCell).unwrap();
        let mirror = compute(&validate_cell(&cell.reflected()).unwrap(), Method::TwoCell).unwrap();
        let (v, s) = (base.v, base.sigma_sq.unwrap());
        scaling = scaling
            .max((scaled.v - lambda * v).abs() / (lambda * v).abs().max(lambda * 1e-3))
            .max(rel(scaled.sigma_sq.unwrap(), lambda * s));
        reversal = reversal.max((mirror.v + v).abs() / v.abs().max(1e-3)).max(rel(mirror.sigma_sq.unwrap(), s));
    }

    let mut supersonico = 0.0f64;
    for _ in 0..100 {
        let core = rng.gen_range(2..6);
        let c = validate_cell(&common::random_cell_with_chains(&mut rng, core, 2)).unwrap();
        let tc = build_two_cell(&c);
        for ch in find_linear_chains(&tc.graph, &[tc.minus, tc.zero, tc.plus]) {
            let prod: f64 = ch.r_minus.iter().zip(&ch.r_plus).map(|(m, p)| m / p).product();
            supersonico = supersonico.max(rel(gamma(&ch.reversed()) * prod, gamma(&ch)));
        }
    }

    let (mut nani, mut rzw, mut derry) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let m = common::random_periodic(&mut rng, n);
        let t = m.terms();
        let ni = n as i64;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xa = |k: i64| x[k.rem_euclid(ni) as usize];
        let (mut l1, mut l2) = (0.0, 0.0);
        for i in 1..ni {
            for k in 1..=i {
                l1 += xa(k) / m.xi_plus_at(k) * (k + 1..=i).map(|j| m.rho_at(j)).product::<f64>();
                l2 += xa(-k) / m.xi_minus_at(-k) * (k + 1..=i).map(|j| 1.0 / m.rho_at(-j)).product::<f64>();
            }
        }
        let r1: f64 = (1..n).map(|k| x[k] * t.z[k]).sum();
        let r2: f64 = (1..n).map(|k| x[k] * t.w[k]).sum();
        nani = nani.max((l1 - r1).abs() / r1.abs().max(1.0)).max((t.delta * l2 - r2).abs() / r2.abs().max(1.0));
        for k in 1..n {
            rzw = rzw.max(rel(t.z[k] + t.w[k], t.r[k]));
        }
        rzw = rzw.max(rel(t.r[n], t.lambda[n] / m.xi_plus[0]));

        let tc = build_two_cell(&validate_cell(&m.cell()).unwrap());
        let up = find_linear_chains(&tc.graph, &[tc.minus, tc.zero, tc.plus])
            .into_iter()
            .map(|c| if c.first() == tc.zero { c } else { c.reversed() })
            .find(|c| c.last() == tc.plus)
            .unwrap();
        let sum_r: f64 = t.r[1..].iter().sum();
        let rhs = gamma(&up) / m.xi_plus[0] + chain_cost(&up) + t.delta * chain_cost(&up.reversed());
        derry = derry.max(rel(sum_r, rhs));
    }
    let worst = [scaling, reversal, supersonico, nani, rzw, derry].into_iter().fold(0.0, f64::max);
    Outcome {
        ok: worst <= 1e-10,
        detail: format!(
            "scaling {scaling:.1e}, reversal {reversal:.1e}, Gamma reversal {supersonico:.1e}, weighted sums {nani:.1e}, r=z+w {rzw:.1e}, sum of r {derry:.1e} (tol 1e-10)"
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("homogeneous model", 1, homogeneous),
        ("2-periodic closed form", 2, two_periodic),
        ("N-periodic closed form vs pipelines", 10, periodic_general),
        ("parallel chains vs pipelines", 10, parallel),
        ("lumping", 1, lumping),
        ("published D reference", 1, discrepancy),
        ("chain removal preserves v", 5, chain_removal),
        ("Monte Carlo LLN", 60, monte_carlo_lln),
        ("CLT at fixed time", 120, clt),
        ("property suites", 10, properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let ok = out.ok && in_time;
        failed += usize::from(!ok);
        println!(
            "[{}] {:>2}. {name}: {} [{:.2} s, limit {limit} s{}]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
