mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motorwalk::kinetics::{reduced_velocity, single_cell_stats, two_cell_stats};
use motorwalk::mcsim::{clt_check, estimate_v_sigma, simulate_cycles, CycleSimulator};
use motorwalk::models::recognize;
use motorwalk::reduction::{find_linear_chains, reduce_graph};
use motorwalk::{build_two_cell, validate_cell, Cell, Parallel, Periodic, Validated};
use serde::Serialize;
use serde_json::{json, Value};

use report::RunReport;

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_DISAGREE: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Exact and simulated velocity and diffusion coefficient of random walks on periodic graphs.
#[derive(Parser, Debug)]
#[command(name = "motorwalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Print a JSON run report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Length of one cell; v is multiplied by d and sigma^2 by d^2.
    #[arg(long, global = true, default_value_t = 1.0, value_name = "D")]
    cell_length: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a cell file and report every problem found.
    Validate {
        cell: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact v and sigma^2 of a cell.
    Compute {
        cell: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        #[command(flatten)]
        common: Common,
    },
    /// Two-cell graph of a cell with its linear chains removed.
    Reduce {
        cell: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form results for the built-in models.
    Model {
        #[command(subcommand)]
        model: ModelCommand,
    },
    /// Monte Carlo estimates of v and sigma^2.
    Simulate {
        cell: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check the central limit theorem at this time.
        #[arg(long, value_name = "T")]
        clt_t: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// All exact methods, the closed form when one applies, and Monte Carlo side by side.
    Compare {
        cell: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum ModelCommand {
    /// Nearest-neighbour walk with period N; `xi_plus[k]` is the rate from site k to k+1.
    Periodic {
        #[arg(long, value_delimiter = ',', required = true)]
        xi_plus: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        xi_minus: Vec<f64>,
        /// Also report the site velocity N v.
        #[arg(long)]
        physical: bool,
        /// Write the generated cell to this file.
        #[arg(long, value_name = "FILE")]
        emit: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Two linear chains in parallel between consecutive binding sites.
    Parallel {
        #[arg(long, value_delimiter = ',', required = true)]
        up_plus: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        up_minus: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        down_plus: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        down_minus: Vec<f64>,
        #[arg(long, value_name = "FILE")]
        emit: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    SingleCell,
    TwoCell,
    Reduced,
    All,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Invalid(Value, Vec<String>),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) | Failure::Invalid(..) => EXIT_INPUT,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }
}

fn solver<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Solver(e.to_string())
}

/// Results of a command plus the exit code it asks for.
struct Outcome {
    digest: Option<String>,
    results: Value,
    code: u8,
    table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
}

impl Outcome {
    fn ok(digest: Option<String>, results: Value) -> Self {
        Outcome { digest, results, code: 0, table: None }
    }
}

fn load(path: &Path) -> Result<(Cell, String), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let cell: Cell =
        serde_json::from_slice(&bytes).map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))?;
    Ok((cell, report::digest(&bytes)))
}

fn load_valid(path: &Path) -> Result<(Validated, String), Failure> {
    let (cell, digest) = load(path)?;
    let valid = validate_cell(&cell).map_err(|e| {
        let messages = e.violations.iter().map(ToString::to_string).collect();
        Failure::Invalid(json!({ "valid": false, "violations": e.violations }), messages)
    })?;
    Ok((valid, digest))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

/// `(v d, sigma^2 d^2)`.
fn scale(d: f64, v: f64, s: f64) -> (f64, f64) {
    (v * d, s * d * d)
}

fn validate(path: &Path) -> Result<Outcome, Failure> {
    let (c, digest) = load_valid(path)?;
    let model = recognize(&c).map(|m| to_value(&m));
    let results = json!({
        "valid": true,
        "vertices": c.n_vertices(),
        "edges": c.cell().edges.len(),
        "underline": c.cell().underline,
        "overline": c.cell().overline,
        "recognized": model,
    });
    Ok(Outcome::ok(Some(digest), results))
}

fn compute_cmd(path: &Path, method: MethodArg, d: f64) -> Result<Outcome, Failure> {
    let (c, digest) = load_valid(path)?;
    let mut out = serde_json::Map::new();
    let all = method == MethodArg::All;
    if all || method == MethodArg::SingleCell {
        let s = single_cell_stats(&c).map_err(solver)?;
        let (v, sig) = scale(d, s.velocity(), s.diffusion());
        out.insert("single-cell".into(), json!({ "v": v, "sigma_sq": sig, "intermediates": s }));
    }
    if all || method == MethodArg::TwoCell {
        let s = two_cell_stats(&c).map_err(solver)?;
        let (v, sig) = scale(d, s.velocity(), s.diffusion());
        out.insert("two-cell".into(), json!({ "v": v, "sigma_sq": sig, "intermediates": s }));
    }
    if all || method == MethodArg::Reduced {
        let (v, k) = reduced_velocity(&c).map_err(solver)?;
        out.insert("reduced".into(), json!({ "v": v * d, "intermediates": { "chains_removed": k } }));
    }
    Ok(Outcome::ok(Some(digest), json!({ "cell_length": d, "methods": out })))
}

fn reduce_cmd(path: &Path) -> Result<Outcome, Failure> {
    let (c, digest) = load_valid(path)?;
    let tc = build_two_cell(&c);
    let g = &tc.graph;
    let chains = find_linear_chains(g, &[tc.minus, tc.zero, tc.plus]);
    let rg = reduce_graph(g, &chains).map_err(solver)?;
    let r = &rg.graph;
    let edges: Vec<Value> =
        r.edges().map(|(x, y, rate)| json!({ "from": r.label(x), "to": r.label(y), "rate": rate })).collect();
    let sources: serde_json::Map<String, Value> =
        (0..r.len()).map(|i| (r.label(i).to_string(), json!(rg.source[i]))).collect();
    let chain_labels: Vec<Vec<&str>> = chains.iter().map(|ch| ch.vertices.iter().map(|&v| g.label(v)).collect()).collect();
    let (v, _) = reduced_velocity(&c).map_err(solver)?;
    let results = json!({
        "vertices": r.labels(),
        "absorbing": r.absorbing_states().iter().map(|&i| r.label(i)).collect::<Vec<_>>(),
        "start": r.label(r.start()),
        "edges": edges,
        "sources": sources,
        "chains": chain_labels,
        "velocity": v,
    });
    Ok(Outcome::ok(Some(digest), results))
}

fn emit(path: &Option<PathBuf>, cell: &Cell) -> Result<(), Failure> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(cell).expect("cells serialize");
        std::fs::write(p, text + "\n").map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn cell_digest(cell: &Cell) -> String {
    report::digest(serde_json::to_string(cell).expect("cells serialize").as_bytes())
}

fn model_cmd(model: &ModelCommand) -> Result<Outcome, Failure> {
    let bad = |e: motorwalk::models::ModelError| Failure::Input(e.to_string());
    match model {
        ModelCommand::Periodic { xi_plus, xi_minus, physical, emit: target, common } => {
            let m = Periodic::new(xi_plus.clone(), xi_minus.clone()).map_err(bad)?;
            let cell = m.cell();
            emit(target, &cell)?;
            let (v, s) = scale(common.cell_length, m.velocity(), m.diffusion());
            let mut results = json!({
                "model": "periodic",
                "period": m.period(),
                "cell_length": common.cell_length,
                "v": v,
                "sigma_sq": s,
                "intermediates": m.terms(),
            });
            if *physical {
                results["physical_v"] = json!(m.physical_velocity());
            }
            Ok(Outcome::ok(Some(cell_digest(&cell)), results))
        }
        ModelCommand::Parallel { up_plus, up_minus, down_plus, down_minus, emit: target, common } => {
            let m = Parallel::new(up_plus.clone(), up_minus.clone(), down_plus.clone(), down_minus.clone())
                .map_err(bad)?;
            let cell = m.cell();
            emit(target, &cell)?;
            let (v, s) = scale(common.cell_length, m.velocity(), m.diffusion());
            let results = json!({
                "model": "parallel",
                "cell_length": common.cell_length,
                "v": v,
                "sigma_sq": s,
                "intermediates": { "upper": m.upper.terms(), "lower": m.lower.terms() },
            });
            Ok(Outcome::ok(Some(cell_digest(&cell)), results))
        }
    }
}

fn simulate_cmd(path: &Path, cycles: u64, replicas: u64, seed: u64, clt_t: Option<f64>, d: f64) -> Result<Outcome, Failure> {
    let (c, digest) = load_valid(path)?;
    if cycles < 2 {
        return Err(Failure::Input("--cycles must be at least 2".into()));
    }
    let exact = two_cell_stats(&c).map_err(solver)?;
    let (ev, es) = (exact.velocity(), exact.diffusion());
    let samples = simulate_cycles(&c, cycles, seed).map_err(solver)?;
    let (v, s) = estimate_v_sigma(&samples, seed).map_err(solver)?;
    let clt = match clt_t {
        Some(t) => Some(clt_check(&CycleSimulator::new(&c), ev, es, t, replicas, seed).map_err(solver)?),
        None => None,
    };
    let z = |est: f64, se: f64, x: f64| if se > 0.0 { (est - x) / se } else { 0.0 };
    let results = json!({
        "cell_length": d,
        "cycles": cycles,
        "seed": seed,
        "v_hat": v.value * d,
        "se_v": v.std_error * d,
        "sigma_sq_hat": s.value * d * d,
        "se_sigma": s.std_error * d * d,
        "exact_v": ev * d,
        "exact_sigma_sq": es * d * d,
        "z_scores": { "v": z(v.value, v.std_error, ev), "sigma_sq": z(s.value, s.std_error, es) },
        "clt_report": clt,
    });
    Ok(Outcome::ok(Some(digest), results))
}

/// Relative agreement with a tiny absolute floor, so exact zeros compare equal.
fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1e-6)
}

fn compare_cmd(path: &Path, cycles: u64, seed: u64, d: f64) -> Result<Outcome, Failure> {
    let (c, digest) = load_valid(path)?;
    if cycles < 2 {
        return Err(Failure::Input("--cycles must be at least 2".into()));
    }
    let one = single_cell_stats(&c).map_err(solver)?;
    let two = two_cell_stats(&c).map_err(solver)?;
    let (reduced, _) = reduced_velocity(&c).map_err(solver)?;
    let closed = recognize(&c);
    let samples = simulate_cycles(&c, cycles, seed).map_err(solver)?;
    let (mv, ms) = estimate_v_sigma(&samples, seed).map_err(solver)?;

    let (rv, rs) = (two.velocity(), two.diffusion());
    let mut exact_v = vec![one.velocity(), reduced];
    let mut exact_s = vec![one.diffusion()];
    if let Some(m) = &closed {
        exact_v.push(m.velocity());
        exact_s.push(m.diffusion());
    }
    let exact_ok = exact_v.iter().all(|&x| agrees(x, rv)) && exact_s.iter().all(|&x| agrees(x, rs));
    let mc_v_ok = (mv.value - rv).abs() <= 3.0 * mv.std_error;
    let mc_s_ok = (ms.value - rs).abs() <= 3.0 * ms.std_error;
    let pass = exact_ok && mc_v_ok && mc_s_ok;

    let row = |single: f64, two: f64, red: Option<f64>, cf: Option<f64>, mc: f64, se: f64, p: f64| {
        json!({
            "single_cell": single * p,
            "two_cell": two * p,
            "reduced": red.map(|x| x * p),
            "closed_form": cf.map(|x| x * p),
            "mc": mc * p,
            "mc_se": se * p,
        })
    };
    let vrow = row(one.velocity(), rv, Some(reduced), closed.as_ref().map(|m| m.velocity()), mv.value, mv.std_error, d);
    let srow = row(one.diffusion(), rs, None, closed.as_ref().map(|m| m.diffusion()), ms.value, ms.std_error, d * d);
    let results = json!({
        "cell_length": d,
        "cycles": cycles,
        "seed": seed,
        "model": closed.as_ref().map(|m| match m {
            motorwalk::models::RecognizedModel::Periodic(_) => "periodic",
            motorwalk::models::RecognizedModel::Parallel(_) => "parallel",
        }),
        "v": vrow,
        "sigma_sq": srow,
        "exact_agreement": exact_ok,
        "mc_within_3se": { "v": mc_v_ok, "sigma_sq": mc_s_ok },
        "verdict": if pass { "PASS" } else { "FAIL" },
    });
    let cells = |r: &Value, name: &str| -> Vec<String> {
        let f = |k: &str| r[k].as_f64().map_or("-".to_string(), |x| format!("{x:.12}"));
        vec![name.into(), f("single_cell"), f("two_cell"), f("reduced"), f("closed_form"), format!("{} ± {}", f("mc"), f("mc_se"))]
    };
    let table = (
        vec!["", "single-cell", "two-cell", "reduced", "closed-form", "monte carlo"],
        vec![cells(&results["v"], "v"), cells(&results["sigma_sq"], "sigma^2")],
    );
    Ok(Outcome {
        digest: Some(digest),
        code: if pass { 0 } else { EXIT_DISAGREE },
        results,
        table: Some(table),
    })
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Validate { cell, .. } => validate(cell),
        Command::Compute { cell, method, common } => compute_cmd(cell, *method, common.cell_length),
        Command::Reduce { cell, .. } => reduce_cmd(cell),
        Command::Model { model } => model_cmd(model),
        Command::Simulate { cell, cycles, replicas, seed, clt_t, common } => {
            simulate_cmd(cell, *cycles, *replicas, *seed, *clt_t, common.cell_length)
        }
        Command::Compare { cell, cycles, seed, common } => compare_cmd(cell, *cycles, *seed, common.cell_length),
    }
}

fn common(cli: &Cli) -> &Common {
    match &cli.command {
        Command::Validate { common, .. }
        | Command::Compute { common, .. }
        | Command::Reduce { common, .. }
        | Command::Simulate { common, .. }
        | Command::Compare { common, .. } => common,
        Command::Model { model: ModelCommand::Periodic { common, .. } | ModelCommand::Parallel { common, .. } } => {
            common
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let opts = common(&cli).clone();
    if !(opts.cell_length > 0.0 && opts.cell_length.is_finite()) {
        eprintln!("error: --cell-length must be positive");
        return ExitCode::from(EXIT_USAGE);
    }
    let started = Instant::now();
    let outcome = run(&cli);
    let wall_time_s = started.elapsed().as_secs_f64();
    let command: Vec<String> = std::env::args().skip(1).collect();

    let (out, code) = match outcome {
        Ok(o) => (o, None),
        Err(Failure::Invalid(v, messages)) => {
            for m in messages {
                eprintln!("invalid cell: {m}");
            }
            let code = EXIT_INPUT;
            (Outcome { digest: None, results: v, code, table: None }, Some(code))
        }
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) | Failure::Solver(m) => m.clone(),
                Failure::Invalid(..) => unreachable!(),
            };
            eprintln!("error: {msg}");
            return ExitCode::from(f.code());
        }
    };
    if opts.json {
        let rep = RunReport {
            command,
            input_digest: out.digest.clone(),
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s,
            results: out.results.clone(),
        };
        println!("{}", serde_json::to_string_pretty(&rep).expect("reports serialize"));
    } else if let Some((header, rows)) = &out.table {
        report::print_table(header, rows);
        println!("verdict: {}", out.results["verdict"].as_str().unwrap_or("-"));
    } else {
        report::print_text(&out.results);
    }
    ExitCode::from(code.unwrap_or(out.code))
}
