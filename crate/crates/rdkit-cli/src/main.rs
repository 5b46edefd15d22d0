//! Command-line front end: sweep κ over a problem spec, emit rate-distortion
//! curves as CSV, print analytic oracle curves, and compare solver variants.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdkit_core::classical::{crd_solve, hamming_uniform_oracle};
use rdkit_core::instances::{ProblemKind, ProblemSpec};
use rdkit_core::solver::{
    solve, InnerMethod, SolveResult, SolveStatus, SolverOptions, SymmetryMode,
};
use rdkit_core::symmetry::maxmix_subspace_solve;
use rdkit_core::LOG2_E;

#[derive(Parser)]
#[command(name = "rdkit", about = "Classical and quantum rate-distortion solvers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the κ sweep described by a problem spec file.
    Run(RunArgs),
    /// Print analytic rate-distortion curves for symmetric instances.
    Oracle(OracleArgs),
    /// Benchmark Newton/gradient × exact/inexact on one spec.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Newton,
    Gd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SymmetryArg {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Bits,
    Nats,
}

#[derive(Args)]
struct RunArgs {
    /// Problem spec JSON file.
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "newton")]
    method: MethodArg,
    /// Solve every subproblem to the floor tolerance.
    #[arg(long, conflicts_with = "inexact")]
    exact: bool,
    /// Use the decaying error schedule (default).
    #[arg(long)]
    inexact: bool,
    #[arg(long, value_enum, default_value = "auto")]
    symmetry: SymmetryArg,
    /// Outer termination tolerance on the objective change.
    #[arg(long)]
    tol: Option<f64>,
    /// Wall-clock limit per κ point in seconds.
    #[arg(long, default_value = "3600")]
    max_time: f64,
    #[arg(long, value_enum, default_value = "bits")]
    units: UnitsArg,
    /// Override the seed of random inputs in the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads across κ values (each solve stays single-threaded).
    #[arg(long, default_value = "1")]
    threads: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Maximally mixed quantum input of this dimension.
    #[arg(long, conflicts_with = "hamming")]
    maxmix: Option<usize>,
    /// Uniform classical input with Hamming distortion of this dimension.
    #[arg(long)]
    hamming: Option<usize>,
    /// Number of distortion grid points.
    #[arg(long, default_value = "50")]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Problem spec JSON file (quantum).
    spec: PathBuf,
    /// Comma-separated methods to compare.
    #[arg(long, default_value = "newton,gd")]
    methods: String,
    #[arg(long, value_enum, default_value = "auto")]
    symmetry: SymmetryArg,
    /// Benchmark repetitions per configuration (median reported).
    #[arg(long, default_value = "3")]
    repeats: usize,
    #[arg(long, default_value = "3600")]
    max_time: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One row of the rate-distortion curve CSV.
struct CurveRow {
    kappa: f64,
    distortion: f64,
    rate_bits: f64,
    gap_bits: Option<f64>,
    outer_iters: usize,
    inner_iters: usize,
    time_s: f64,
    method: String,
    symmetry: String,
    failed: bool,
}

const CSV_HEADER: &str = "kappa,D,rate_bits,gap_bits,outer_iters,inner_iters,time_s,method,symmetry";

impl CurveRow {
    fn csv_line(&self, units: UnitsArg) -> String {
        let conv = match units {
            UnitsArg::Bits => 1.0,
            UnitsArg::Nats => 1.0 / LOG2_E,
        };
        let gap = self
            .gap_bits
            .map(|g| format!("{:.12e}", g * conv))
            .unwrap_or_default();
        format!(
            "{:.12e},{:.12e},{:.12e},{},{},{},{:.6},{},{}",
            self.kappa,
            self.distortion,
            self.rate_bits * conv,
            gap,
            self.outer_iters,
            self.inner_iters,
            self.time_s,
            self.method,
            self.symmetry
        )
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle(args) => oracle(args),
        Command::Compare(args) => compare(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn solver_options(
    method: MethodArg,
    exact: bool,
    symmetry: SymmetryArg,
    tol: Option<f64>,
    max_time: f64,
) -> SolverOptions {
    SolverOptions {
        inner_method: match method {
            MethodArg::Newton => InnerMethod::Newton,
            MethodArg::Gd => InnerMethod::GradientAscent,
        },
        inexact: !exact,
        outer_tol: tol,
        max_time_s: max_time,
        symmetry: match symmetry {
            SymmetryArg::Auto => SymmetryMode::Auto,
            SymmetryArg::On => SymmetryMode::On,
            SymmetryArg::Off => SymmetryMode::Off,
        },
        ..Default::default()
    }
}

fn method_name(method: MethodArg) -> &'static str {
    match method {
        MethodArg::Newton => "newton",
        MethodArg::Gd => "gd",
    }
}

fn load_spec(path: &PathBuf, seed_override: Option<u64>) -> Result<ProblemSpec, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read spec file {}: {e}", path.display()))?;
    let mut spec = ProblemSpec::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = seed_override {
        if let rdkit_core::instances::InputSpec::Random { n, .. } = spec.input {
            spec.input = rdkit_core::instances::InputSpec::Random { n, seed };
        }
    }
    Ok(spec)
}

fn quantum_row(
    spec: &ProblemSpec,
    kappa: f64,
    options: &SolverOptions,
    method: &str,
) -> Result<CurveRow, String> {
    let problem = spec.quantum_problem(kappa).map_err(|e| e.to_string())?;
    let started = std::time::Instant::now();
    let res: SolveResult = solve(&problem, options).map_err(|e| e.to_string())?;
    let symmetry_used = match (&options.symmetry, &problem.distortion) {
        (SymmetryMode::Off, _) => "off",
        (_, rdkit_core::solver::DistortionSpec::EntanglementFidelity) => "on",
        _ => "off",
    };
    Ok(CurveRow {
        kappa,
        distortion: res.distortion,
        rate_bits: res.rate_bits,
        gap_bits: res.gap_bits,
        outer_iters: res.outer_iters,
        inner_iters: res.inner_iters_total,
        time_s: started.elapsed().as_secs_f64(),
        method: method.to_string(),
        symmetry: symmetry_used.to_string(),
        failed: res.status != SolveStatus::Converged,
    })
}

fn classical_row(spec: &ProblemSpec, kappa: f64, tol: Option<f64>) -> Result<CurveRow, String> {
    let problem = spec.classical_problem(kappa).map_err(|e| e.to_string())?;
    let started = std::time::Instant::now();
    let sol = crd_solve(&problem, tol.unwrap_or(1e-12), 10_000_000).map_err(|e| e.to_string())?;
    Ok(CurveRow {
        kappa,
        distortion: sol.distortion,
        rate_bits: sol.rate_bits,
        gap_bits: Some(sol.gap_bits),
        outer_iters: sol.iters,
        inner_iters: 0,
        time_s: started.elapsed().as_secs_f64(),
        method: "ba".to_string(),
        symmetry: "-".to_string(),
        failed: false,
    })
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let spec = load_spec(&args.spec, args.seed)?;
    let mut kappas = spec.kappa_list.clone();
    kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let options = solver_options(args.method, args.exact, args.symmetry, args.tol, args.max_time);
    let method = method_name(args.method);

    let rows: Vec<Result<CurveRow, String>> = if args.threads > 1 {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<CurveRow, String>>>> =
            kappas.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..args.threads.min(kappas.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= kappas.len() {
                        break;
                    }
                    let row = match spec.kind {
                        ProblemKind::Quantum => quantum_row(&spec, kappas[i], &options, method),
                        ProblemKind::Classical => classical_row(&spec, kappas[i], args.tol),
                    };
                    *slots[i].lock().unwrap() = Some(row);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
            .collect()
    } else {
        kappas
            .iter()
            .map(|&k| match spec.kind {
                ProblemKind::Quantum => quantum_row(&spec, k, &options, method),
                ProblemKind::Classical => classical_row(&spec, k, args.tol),
            })
            .collect()
    };

    let mut out_lines = vec![CSV_HEADER.to_string()];
    let mut any_failed = false;
    let mut prev_d: Option<f64> = None;
    let mut ok_rows = Vec::new();
    for row in rows {
        let row = row?;
        if row.failed {
            any_failed = true;
            eprintln!("warning: kappa={} did not converge (row flagged)", row.kappa);
        }
        if let Some(prev) = prev_d {
            // D should be nonincreasing in κ for a fixed instance.
            if row.distortion > prev + 1e-8 {
                eprintln!(
                    "warning: distortion increased along kappa sweep ({prev:.6e} -> {:.6e})",
                    row.distortion
                );
            }
        }
        prev_d = Some(row.distortion);
        out_lines.push(row.csv_line(args.units));
        ok_rows.push(row);
    }
    let csv = out_lines.join("\n") + "\n";
    write_output(args.out.as_ref(), &csv)?;

    if let Some(json_path) = args.json {
        let rows_json: Vec<serde_json::Value> = ok_rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "kappa": r.kappa,
                    "D": r.distortion,
                    "rate_bits": r.rate_bits,
                    "gap_bits": r.gap_bits,
                    "outer_iters": r.outer_iters,
                    "inner_iters": r.inner_iters,
                    "time_s": r.time_s,
                    "method": r.method,
                    "symmetry": r.symmetry,
                    "converged": !r.failed,
                })
            })
            .collect();
        let text = serde_json::to_string_pretty(&rows_json).expect("json rows serialize");
        fs::write(&json_path, text)
            .map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;
    }

    Ok(if any_failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn oracle(args: OracleArgs) -> Result<ExitCode, String> {
    if args.grid < 2 {
        return Err("grid must have at least 2 points".into());
    }
    let mut lines = vec!["D,rate_bits".to_string()];
    if let Some(n) = args.maxmix {
        if n < 2 {
            return Err("maxmix dimension must be at least 2".into());
        }
        // Analytic curve sampled so the D grid covers (0, 1−1/n²].
        let dmax = 1.0 - 1.0 / (n * n) as f64;
        for i in 0..args.grid {
            let d = dmax * (i as f64 + 0.5) / args.grid as f64;
            // Invert D(κ) = (n²−1)/(eᵏ+n²−1).
            let kappa = (((n * n - 1) as f64) * (1.0 - d) / d).ln();
            let point = maxmix_subspace_solve(n, kappa.max(0.0));
            lines.push(format!("{:.12e},{:.12e}", point.distortion, point.rate_bits));
        }
    } else if let Some(n) = args.hamming {
        if n < 2 {
            return Err("hamming dimension must be at least 2".into());
        }
        for i in 0..args.grid {
            let d = (i as f64 + 0.5) / args.grid as f64;
            let (rate, _) = hamming_uniform_oracle(n, d).map_err(|e| e.to_string())?;
            lines.push(format!("{d:.12e},{rate:.12e}"));
        }
    } else {
        return Err("pass either --maxmix N or --hamming N".into());
    }
    write_output(args.out.as_ref(), &(lines.join("\n") + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<ExitCode, String> {
    let spec = load_spec(&args.spec, None)?;
    if spec.kind != ProblemKind::Quantum {
        return Err("compare requires a quantum spec".into());
    }
    let methods: Vec<MethodArg> = args
        .methods
        .split(',')
        .map(|m| match m.trim() {
            "newton" => Ok(MethodArg::Newton),
            "gd" => Ok(MethodArg::Gd),
            other => Err(format!("unknown method '{other}'")),
        })
        .collect::<Result<_, _>>()?;

    let mut lines =
        vec!["method,mode,kappa,median_time_s,gap_bits,outer_iters,inner_iters".to_string()];
    let mut any_failed = false;
    for &method in &methods {
        for exact in [true, false] {
            let options = solver_options(method, exact, args.symmetry, None, args.max_time);
            for &kappa in &spec.kappa_list {
                let mut times = Vec::new();
                let mut last: Option<CurveRow> = None;
                for _ in 0..args.repeats.max(1) {
                    let row = quantum_row(&spec, kappa, &options, method_name(method))?;
                    times.push(row.time_s);
                    last = Some(row);
                }
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = times[times.len() / 2];
                let row = last.expect("at least one repeat");
                any_failed |= row.failed;
                lines.push(format!(
                    "{},{},{:.6e},{:.6},{},{},{}",
                    method_name(method),
                    if exact { "exact" } else { "inexact" },
                    kappa,
                    median,
                    row.gap_bits.map(|g| format!("{g:.6e}")).unwrap_or_default(),
                    row.outer_iters,
                    row.inner_iters,
                ));
            }
        }
    }
    write_output(args.out.as_ref(), &(lines.join("\n") + "\n"))?;
    Ok(if any_failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write to stdout: {e}")),
    }
}
