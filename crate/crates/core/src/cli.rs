//! Command-line front end.
//!
//! Exit codes: 0 when everything succeeded and every trial passed, 1 when a
//! trial failed or a solver gave up, 2 for malformed input.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::barycenter::{barycenter, orthogonal_project};
use crate::error::{Error, Result};
use crate::extension::{extend_with, ExtendOptions};
use crate::io::{load_extension, load_manifest, load_measure, load_projection};
use crate::lab::{run_sweep, write_csv, write_json_lines, CheckKind, SweepConfig, SweepSummary};
use crate::model_space::{diameter_of_model, CurvatureClass, Extended};
use crate::transport::wasserstein;

#[derive(Parser, Debug)]
#[command(name = "catlab", version, about = "Barycenters, transport and convexity checks in CAT(kappa) spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fréchet barycenter of a measure given as JSON.
    Barycenter {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact Wasserstein distance between two measures.
    Wasserstein {
        /// Transport exponent, 1 or 2.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        p: u8,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest point of a convex set.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded randomized sweep of one inequality.
    Verify(VerifyArgs),
    /// Lipschitz extension of a partially defined map.
    Extend {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        epsilon: f64,
        /// Neighbors in the barycentric step (default min(4, |S| - 1)).
        #[arg(long)]
        neighbors: Option<usize>,
        /// Exponent of the inverse-distance weights.
        #[arg(long, default_value_t = 1.0)]
        power: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective constants of a curvature class.
    Constants {
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// convexity, phi, spcalc, variance, jensen, lipschitz, pisier, markov-type or cotype.
    check: Option<String>,
    /// Read the sweep (or a list of sweeps) from JSON instead of flags.
    #[arg(long, conflicts_with_all = ["space", "kappa", "epsilon", "radius", "trials", "seed", "tol", "z_at_center", "random_weight"])]
    manifest: Option<PathBuf>,
    /// sphere2, euclidean2, hyperbolic2, or a product such as sphere2xeuclidean1.
    #[arg(long)]
    space: Option<String>,
    /// Curvature bound of the class [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Safety margin in (0, 1) [default: 0.5].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sampling ball radius [default: per check].
    #[arg(long)]
    radius: Option<f64>,
    /// Number of trials [default: 1000].
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of every random draw in the sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// A trial passes when rhs - lhs >= -tol [default: per check].
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Write every trial report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Variance check with z at the center of a ball of radius D_(kappa,eps)/2.
    #[arg(long)]
    z_at_center: bool,
    /// Phi check with a uniformly drawn convex weight instead of 1/2.
    #[arg(long)]
    random_weight: bool,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverFailure { .. } | Error::NotImplemented(_) => 1,
        _ => 2,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| io_err(p, e)),
        None => writeln!(out, "{text}").map_err(|e| Error::Input(e.to_string())),
    }
}

fn class(kappa: f64, epsilon: f64) -> Result<CurvatureClass> {
    CurvatureClass::new(kappa, epsilon).map_err(|e| Error::Input(e.to_string()))
}

fn fmt_extended(x: Extended) -> String {
    match x {
        Extended::Finite(v) => format!("{v:.12}"),
        Extended::Infinite => "inf".into(),
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Barycenter { measure, out: path } => {
            let mu = load_measure(&measure)?;
            emit(&barycenter(&mu)?, path.as_deref(), out)?;
            Ok(0)
        }
        Command::Wasserstein { p, mu, nu, out: path } => {
            let (a, b) = (load_measure(&mu)?, load_measure(&nu)?);
            let w = wasserstein(f64::from(p), &a, &b)?;
            #[derive(Serialize)]
            struct Output<'a> {
                p: f64,
                cost: f64,
                duality_gap: f64,
                min_reduced_cost: f64,
                plan: &'a [Vec<f64>],
            }
            let o = Output {
                p: w.p,
                cost: w.cost,
                duality_gap: w.solution.duality_gap,
                min_reduced_cost: w.solution.min_reduced_cost,
                plan: &w.plan.matrix,
            };
            emit(&o, path.as_deref(), out)?;
            Ok(0)
        }
        Command::Project { input, out: path } => {
            let inp = load_projection(&input)?;
            let q = orthogonal_project(&inp.space, &inp.set, &inp.point)?;
            #[derive(Serialize)]
            struct Output {
                point: crate::space::SpacePoint,
                distance: f64,
            }
            let distance = inp.space.dist(&inp.point, &q);
            emit(&Output { point: q, distance }, path.as_deref(), out)?;
            Ok(0)
        }
        Command::Constants { kappa, epsilon, json } => {
            let cc = class(kappa, epsilon)?;
            let c = cc.constants();
            if json {
                emit(&c, None, out)?;
            } else {
                let rows = [
                    ("kappa", format!("{kappa}")),
                    ("epsilon", format!("{epsilon}")),
                    ("D_kappa", fmt_extended(diameter_of_model(kappa))),
                    ("D_kappa_eps", fmt_extended(cc.safe_diameter())),
                    ("k", format!("{:.12}", c.k)),
                    ("gamma", format!("{:.12}", c.gamma)),
                    ("cotype_N", format!("{:.12}", c.cotype)),
                    ("c_ext", format!("{:.12}", c.c_ext)),
                ];
                for (name, v) in rows {
                    writeln!(out, "{name:<12} {v}").map_err(|e| Error::Input(e.to_string()))?;
                }
            }
            Ok(0)
        }
        Command::Extend { instance, kappa, epsilon, neighbors, power, out: path } => {
            let cc = class(kappa, epsilon)?;
            let inst = load_extension(&instance)?;
            let opts = ExtendOptions { neighbors, inverse_power: power, ..ExtendOptions::default() };
            let r = extend_with(&inst, &cc, opts)?;
            emit(&r, path.as_deref(), out)?;
            if !r.certified {
                let _ = writeln!(err, "extension not certified: ratio {} > C_eps = {}", r.ratio, r.c_ext);
                return Ok(1);
            }
            Ok(0)
        }
        Command::Verify(args) => verify(args, out, err),
    }
}

fn sweeps_from(args: &VerifyArgs) -> Result<Vec<SweepConfig>> {
    let positional = args.check.as_deref().map(str::parse::<CheckKind>).transpose()?;
    if let Some(path) = &args.manifest {
        let sweeps = load_manifest(path)?;
        if let Some(c) = positional {
            if sweeps.iter().any(|s| s.check != c) {
                return Err(Error::Input(format!("manifest does not match the requested check {c}")));
            }
        }
        return Ok(sweeps);
    }
    let check = positional.ok_or_else(|| Error::Input("verify needs a check name or --manifest".into()))?;
    let seed = args.seed.ok_or_else(|| Error::Input("--seed is required".into()))?;
    let mut cfg = SweepConfig::new(
        check,
        args.space.as_deref().unwrap_or("sphere2"),
        args.kappa.unwrap_or(1.0),
        args.epsilon.unwrap_or(0.5),
        args.trials.unwrap_or(1000),
        seed,
    );
    cfg.radius = args.radius;
    cfg.tol = args.tol;
    cfg.z_at_center = args.z_at_center;
    cfg.random_weight = args.random_weight;
    Ok(vec![cfg])
}

fn verify(args: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let sweeps = sweeps_from(&args)?;
    let summaries = sweeps.iter().map(run_sweep).collect::<Result<Vec<_>>>()?;
    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        let reports: Vec<_> = summaries.iter().flat_map(|s| s.reports.iter().cloned()).collect();
        match args.format {
            Format::Csv => write_csv(&mut w, &reports),
            Format::Json => write_json_lines(&mut w, &reports),
        }
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))?;
    }
    print_table(&summaries, out).map_err(|e| Error::Input(e.to_string()))?;
    let mut code = 0;
    for s in &summaries {
        for fp in &s.failures {
            let _ = writeln!(err, "FAILED {fp}");
        }
        for (fp, msg) in &s.errors {
            let _ = writeln!(err, "ERROR {fp}: {msg}");
        }
        if !s.all_passed() {
            code = 1;
        }
    }
    Ok(code)
}

fn print_table(summaries: &[SweepSummary], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>14} {:>10}  tracked",
        "check", "trials", "passed", "failed", "errors", "worst slack", "tol"
    )?;
    for s in summaries {
        let failed = s.failures.len();
        let passed = s.reports.len() - failed;
        let worst = s.worst_slack.map_or("-".to_string(), |w| format!("{w:.6e}"));
        let tracked = match (s.tracked_name, s.tracked_min, s.tracked_max) {
            (Some(name), Some(lo), Some(hi)) => format!("{name} in [{lo:.6e}, {hi:.6e}]"),
            _ => String::new(),
        };
        writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>14} {:>10.1e}  {}",
            s.config.check.name(),
            s.config.trials,
            passed,
            failed,
            s.errors.len(),
            worst,
            s.tol,
            tracked
        )?;
        if s.degenerate > 0 {
            writeln!(out, "{:<12} {} trials used the 0/0 convention", "", s.degenerate)?;
        }
    }
    Ok(())
}
