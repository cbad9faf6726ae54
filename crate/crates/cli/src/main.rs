use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use mycocat::experiments::{
    parse_json, rows_to_csv, run_law_suite, run_order_asymmetry_scan, run_worked_example, to_pretty_json, write_atomic,
    write_worked_example, ExposureExperiment, LawSuite, ScalingMode, WorkedExampleConfig, INCONCLUSIVE,
};
use mycocat::graphcat::{pushout_along_monos, verify_pushout_universal_property, Cospan};
use mycocat::progsem::{evolve, Extractor, InternalState, Program, ReferenceDynamics};

/// Category-theoretic models of fungal networks: pushouts, program semantics,
/// order-asymmetry scans and law checks.
#[derive(Debug, Parser)]
#[command(name = "mycocat", version)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "MYCOCAT_SEED")]
    seed: Option<u64>,
    /// Directory receiving reports.
    #[arg(long, global = true, env = "MYCOCAT_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Overrides law tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pushout of a cospan of monomorphisms, checked against all small probes.
    Pushout {
        cospan: PathBuf,
        #[arg(long, default_value_t = 4)]
        probe_bound: usize,
    },
    /// Runs a program from a state and extracts the resulting network.
    Simulate {
        dynamics: PathBuf,
        program: PathBuf,
        state: PathBuf,
    },
    /// Order-asymmetry scan over the experiment's ε grid.
    OrderScan {
        experiment: PathBuf,
        #[arg(long, value_enum)]
        scaling: Option<Scaling>,
    },
    /// Two-pulse worked example on a path of electrodes.
    WorkedExample {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Runs one scaling mode instead of both.
        #[arg(long, value_enum)]
        scaling: Option<Scaling>,
    },
    /// Runs a law suite and writes one report per check.
    CheckLaws { suite: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scaling {
    Amplitude,
    Duration,
}

impl From<Scaling> for ScalingMode {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::Amplitude => ScalingMode::Amplitude,
            Scaling::Duration => ScalingMode::Duration,
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn run(cli: Cli) -> Result<bool> {
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Pushout { cospan, probe_bound } => {
            let c: Cospan = read_json(&cospan)?;
            let po = pushout_along_monos(&c)?;
            let ok = verify_pushout_universal_property(&c, &po, probe_bound)?;
            let report = json!({ "square": po, "probe_bound": probe_bound, "universal_property": ok });
            let path = write(out, "pushout.json", &to_pretty_json(&report))?;
            println!(
                "pushout: {} nodes, {} edges; universal property up to {probe_bound} nodes: {} -> {}",
                po.object.node_count(),
                po.object.edge_count(),
                status(ok),
                path.display()
            );
            Ok(ok)
        }
        Command::Simulate {
            dynamics,
            program,
            state,
        } => {
            let d: ReferenceDynamics = read_json(&dynamics)?;
            let p: Program = read_json(&program)?;
            let s: InternalState = read_json(&state)?;
            let end = evolve(&s, &p, &d)?;
            let network = Extractor::default().extract(&end)?;
            let report = json!({ "duration": p.duration(), "state": end, "network": network });
            let path = write(out, "simulation.json", &to_pretty_json(&report))?;
            println!("simulated {} time units -> {}", p.duration(), path.display());
            Ok(true)
        }
        Command::OrderScan { experiment, scaling } => {
            let mut exp: ExposureExperiment = read_json(&experiment)?;
            if let Some(seed) = cli.seed {
                exp.seed = seed;
            }
            if let Some(s) = scaling {
                exp.scaling = s.into();
            }
            let r = run_order_asymmetry_scan(&exp)?;
            write(out, &format!("scan_{}.csv", r.scaling.name()), &rows_to_csv(&r.rows))?;
            write(out, "scan.json", &to_pretty_json(&r))?;
            let ok = r.verdict != INCONCLUSIVE && r.is_consistent();
            match r.fit {
                Some(f) => println!(
                    "slope {:.4} (R² {:.6}), commutator {:.3e}: {} [{}]",
                    f.slope,
                    f.r_squared,
                    r.commutator_norm,
                    r.verdict,
                    status(ok)
                ),
                None => println!(
                    "fit skipped, commutator {:.3e}: {} [{}]",
                    r.commutator_norm,
                    r.verdict,
                    status(ok)
                ),
            }
            Ok(ok)
        }
        Command::WorkedExample { config, scaling } => {
            let mut c = match &config {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    WorkedExampleConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => WorkedExampleConfig::shipped_default(),
            };
            if let Some(seed) = cli.seed {
                c.seed = seed;
            }
            if let Some(tol) = cli.tol {
                c.laws.tolerance = tol;
            }
            let modes: Vec<ScalingMode> = match scaling {
                Some(s) => vec![s.into()],
                None => vec![ScalingMode::Amplitude, ScalingMode::Duration],
            };
            let r = run_worked_example(&c, &modes)?;
            for s in &r.scans {
                let slope = s.fit.map_or("skipped".to_string(), |f| {
                    format!("{:.4} (R² {:.6})", f.slope, f.r_squared)
                });
                println!(
                    "{} scan: slope {slope}, verdict {} (expected {})",
                    s.scaling.name(),
                    s.verdict,
                    r.expect
                );
            }
            for l in &r.laws {
                println!(
                    "{}: residual {:.3e} <= {:.1e}: {}",
                    l.law,
                    l.max_residual,
                    l.tolerance,
                    status(l.passed())
                );
            }
            for p in write_worked_example(&r, out)? {
                println!("wrote {}", p.display());
            }
            Ok(r.passed)
        }
        Command::CheckLaws { suite } => {
            let text = fs::read_to_string(&suite).with_context(|| format!("reading {}", suite.display()))?;
            let s = LawSuite::from_json(&text).with_context(|| format!("parsing {}", suite.display()))?;
            let reports = run_law_suite(&s, cli.seed, cli.tol)?;
            for l in &reports {
                println!(
                    "{}: residual {:.3e} <= {:.1e}: {}",
                    l.law,
                    l.max_residual,
                    l.tolerance,
                    status(l.passed())
                );
            }
            let path = write(out, "laws.json", &to_pretty_json(&reports))?;
            println!("wrote {}", path.display());
            Ok(reports.iter().all(|l| l.passed()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
