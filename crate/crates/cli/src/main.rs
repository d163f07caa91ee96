//! `stablab`: stability audits, Monte Carlo sweeps, the bound catalog and
//! mechanism demos.
//!
//! Exit status: 0 when every check passes, 1 when a non-vacuous check fails,
//! 2 on usage or runtime errors.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stablab::audit::{audit_stability, enumeration_size, AuditPlan};
use stablab::bounds::{catalog, write_catalog_csv, BoundInputs};
use stablab::data::{FiniteDistribution, PointKind};
use stablab::exec::{with_workers, ExecMode};
use stablab::harness::{
    estimation_error_tail_check, make_distribution, make_statistic, sweep, DistributionSpec,
    ExperimentConfig, StatisticSpec,
};
use stablab::mechanism::{exp_mechanism_check, selector_sandwich_check, stable_max_check};
use stablab::summary::CheckReport;

/// Largest space `audit --exhaustive` will enumerate.
const MAX_FORCED_ENUMERATION: u64 = 100_000_000;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "stablab",
    version,
    about = "Stability audits, estimation-error sweeps and bound catalogs"
)]
struct Cli {
    /// Directory for output files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads; results do not depend on it
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run every loop on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Audit the declared uniform stability of a statistic
    Audit(AuditArgs),
    /// Run a Monte Carlo sweep from a JSON config
    Sweep(SweepArgs),
    /// Evaluate the bound catalog as CSV
    Bounds(BoundsArgs),
    /// Run a mechanism check
    Mech(MechArgs),
    /// Summarize a sweep directory as a markdown table
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StatisticId {
    Const,
    Identity,
    Mean,
    Absdev,
    Erm,
    Pgd,
    Rr,
}

#[derive(Args, Debug, Serialize)]
struct AuditArgs {
    #[arg(long, value_enum)]
    statistic: StatisticId,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    probes: u64,
    /// Enumerate every dataset, replacement and test point
    #[arg(long)]
    exhaustive: bool,
    /// Distribution spec or point set, as a JSON file or inline JSON
    #[arg(long)]
    dist: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "quadratic")]
    problem: String,
    #[arg(long, default_value_t = 0.4)]
    lambda: f64,
    #[arg(long, default_value_t = 16)]
    t: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value = "1nn")]
    base: String,
    /// Value of the constant statistic
    #[arg(long, default_value_t = 0.5)]
    value: f64,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    n: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Demo {
    Stablemax,
    Expmech,
    Lemma1,
    Lemma4,
}

#[derive(Args, Debug, Serialize)]
struct MechArgs {
    #[arg(long, value_enum)]
    demo: Demo,
    /// Vector length or number of sub-datasets
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Random vectors or Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Dataset size for the lemma demos
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    match with_workers(cli.workers, || run(&cli, mode)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Prints `text` and, with `--out`, writes it to `name` there too.
fn emit(out: Option<&Path>, name: &str, text: &str) -> CliResult<()> {
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn resolved(label: &str, value: &impl Serialize) -> CliResult<()> {
    eprintln!("{label}: {}", serde_json::to_string(value)?);
    Ok(())
}

fn run(cli: &Cli, mode: ExecMode) -> CliResult<bool> {
    resolved("args", cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Audit(a) => audit(a, out, mode),
        Command::Sweep(a) => {
            let config = ExperimentConfig::from_json(&fs::read_to_string(&a.config)?)?;
            resolved("config", &config)?;
            let dir = out.unwrap_or(Path::new("."));
            let report = sweep(&config, dir, mode)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.all_pass)
        }
        Command::Bounds(a) => {
            let mut inputs = BoundInputs::new(a.gamma, a.n)
                .delta(a.delta)
                .constants(a.c, a.c1, a.c2);
            inputs.eps = a.eps;
            resolved("inputs", &inputs)?;
            let mut buf = Vec::new();
            write_catalog_csv(&catalog(&inputs)?, &mut buf)?;
            emit(out, "bounds.csv", &String::from_utf8(buf)?)?;
            Ok(true)
        }
        Command::Mech(a) => {
            let checks = mech(a, mode)?;
            emit(
                out,
                "mech.json",
                &(serde_json::to_string_pretty(&checks)? + "\n"),
            )?;
            Ok(checks.iter().all(|c| c.pass))
        }
        Command::Report(a) => {
            let (table, pass) = report::render(&a.input)?;
            emit(out, "report.md", &table)?;
            Ok(pass)
        }
    }
}

fn load_distribution(arg: &str) -> CliResult<FiniteDistribution> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)?
    };
    match serde_json::from_str::<DistributionSpec>(&text) {
        Ok(spec) => Ok(make_distribution(&spec)?),
        Err(_) => Ok(FiniteDistribution::from_json(&text)?),
    }
}

fn statistic_spec(a: &AuditArgs) -> StatisticSpec {
    match a.statistic {
        StatisticId::Const => StatisticSpec::Const { value: a.value },
        StatisticId::Identity => StatisticSpec::Identity,
        StatisticId::Mean => StatisticSpec::Mean,
        StatisticId::Absdev => StatisticSpec::Absdev,
        StatisticId::Erm => StatisticSpec::Erm {
            problem: a.problem.clone(),
            lambda: a.lambda,
            tol: None,
        },
        StatisticId::Pgd => StatisticSpec::Pgd {
            problem: a.problem.clone(),
            t: a.t,
        },
        StatisticId::Rr => StatisticSpec::Rr {
            base: a.base.clone(),
            eps: a.eps,
        },
    }
}

fn default_distribution(a: &AuditArgs) -> DistributionSpec {
    let labeled = matches!(a.statistic, StatisticId::Rr)
        || (matches!(a.statistic, StatisticId::Erm | StatisticId::Pgd) && a.problem == "logistic");
    if labeled {
        DistributionSpec::LabeledThreshold { k: 4, noise: 0.1 }
    } else {
        DistributionSpec::TwoPoint {
            p: 0.5,
            z0: 0.0,
            z1: 1.0,
        }
    }
}

fn audit(a: &AuditArgs, out: Option<&Path>, mode: ExecMode) -> CliResult<bool> {
    let p = match &a.dist {
        Some(d) => load_distribution(d)?,
        None => make_distribution(&default_distribution(a))?,
    };
    let spec = statistic_spec(a);
    resolved("statistic", &spec)?;
    resolved("distribution", &p)?;
    if matches!(spec, StatisticSpec::Rr { .. }) && p.kind() != PointKind::Labeled {
        return Err("rr needs a labeled distribution".into());
    }
    let m = make_statistic(&spec, p.dim())?;
    let mut plan = AuditPlan::new(a.n, a.probes).seed(a.seed).mode(mode);
    if a.exhaustive {
        let space = enumeration_size(p.len(), a.n);
        if space > MAX_FORCED_ENUMERATION {
            return Err(format!("exhaustive audit would enumerate {space} cases").into());
        }
        plan = plan.exhaustive_limit(u64::MAX);
    }
    let report = audit_stability(m.as_ref(), &p, &plan)?;
    emit(
        out,
        "audit.json",
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    Ok(report.within_certificate)
}

fn mech(a: &MechArgs, mode: ExecMode) -> CliResult<Vec<CheckReport>> {
    let two_point = make_distribution(&DistributionSpec::TwoPoint {
        p: 0.5,
        z0: -1.0,
        z1: 1.0,
    })?;
    let erm = StatisticSpec::Erm {
        problem: "quadratic".into(),
        lambda: 0.4,
        tol: None,
    };
    Ok(match a.demo {
        Demo::Stablemax => stable_max_check(
            a.trials.unwrap_or(1000),
            a.m.unwrap_or(10),
            a.eps.unwrap_or(1.0),
            a.seed,
        )?,
        Demo::Expmech => exp_mechanism_check(
            a.trials.unwrap_or(1000),
            a.m.unwrap_or(10),
            a.eps.unwrap_or(1.0),
            a.seed,
        )?,
        Demo::Lemma1 => {
            let m = a.m.unwrap_or(5);
            let stat = make_statistic(&erm, 1)?;
            let r = estimation_error_tail_check(
                stat.as_ref(),
                &two_point,
                a.n.unwrap_or(100),
                m,
                a.trials.unwrap_or(2000),
                a.seed,
            )?;
            vec![r.to_check(&format!("lemma1_m{m}"))]
        }
        Demo::Lemma4 => {
            let stat = make_statistic(&erm, 1)?;
            let r = selector_sandwich_check(
                stat.as_ref(),
                &two_point,
                a.m.unwrap_or(5),
                a.n.unwrap_or(50),
                a.eps.unwrap_or(0.5),
                a.trials.unwrap_or(2000),
                a.seed,
                mode,
            )?;
            r.to_checks()
        }
    })
}
