use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use rf_taxis::harness::export::{
    field_raster_csv, gradcheck_csv, record_json, trajectory_csv, write_atomic, write_ensemble,
};
use rf_taxis::harness::gradcheck::run_gradcheck;
use rf_taxis::harness::{run_ensemble, run_single, Scenario};
use rf_taxis::objectives::GridSpec;
use rf_taxis::record::RecordDetail;
use rf_taxis::sa::{check_schedule, series_evidence, GainSchedule};
use rf_taxis::Error;

/// Gradient-based taxis over simulated signal-strength fields.
#[derive(Parser)]
#[command(name = "rf-taxis", version)]
struct Cli {
    /// Output directory. Each scenario writes into `<out-dir>/<scenario name>/`.
    #[arg(long, global = true, env = "RF_TAXIS_OUT", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes trajectory.csv and record.json.
    Run {
        config: PathBuf,
        /// Run index; selects the derived seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Monte Carlo ensemble; writes summary.json and runs.csv.
    Mc {
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Checks the convergence conditions of a power-law gain schedule.
    CheckSchedule {
        #[arg(long)]
        alpha: f64,
        /// Probe-width exponent.
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long = "A", default_value_t = 10.0)]
        stability: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        h0: f64,
        /// Also sum the series numerically (10^6 terms).
        #[arg(long)]
        series: bool,
    },
    /// Samples a node's noise-free field on a grid; writes field.csv.
    Field {
        config: PathBuf,
        /// Comma separated: all minima, then all maxima (x0,y0,x1,y1 in 2-D).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        bbox: Vec<f64>,
        #[arg(long)]
        res: f64,
        #[arg(long, default_value_t = 0)]
        node: usize,
    },
    /// Monte Carlo variance and bias check; writes gradcheck.csv.
    Gradcheck { config: PathBuf },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidPosition(_),
        ) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn scenario_dir(out: &Path, s: &Scenario) -> PathBuf {
    out.join(&s.config.name)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run { config, index } => {
            let s = Scenario::load(config)?;
            let record = run_single(&s, *index, RecordDetail::Full)?;
            let dir = scenario_dir(&cli.out_dir, &s);
            write_atomic(&dir.join("trajectory.csv"), trajectory_csv(&record).as_bytes())?;
            write_atomic(&dir.join("record.json"), record_json(&record).as_bytes())?;
            let dist = record
                .final_distance()
                .map(|d| format!("{d:.6}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "{}: {} iterations, termination {:?}, final distance {dist} m -> {}",
                s.config.name,
                record.iterations(),
                record.termination,
                dir.display()
            );
        }
        Command::Mc { config, runs, workers } => {
            let s = Scenario::load(config)?;
            let e = run_ensemble(&s, *runs, *workers, RecordDetail::Trajectory)?;
            let dir = scenario_dir(&cli.out_dir, &s);
            write_ensemble(&e.records, &e.summary, &dir)?;
            let m = &e.summary;
            let rate = match (m.rate_exponent, m.rate_stderr) {
                (Some(r), Some(se)) => format!("{r:.4} +/- {se:.4}"),
                _ => "n/a".into(),
            };
            println!(
                "{}: {} runs ({} failed), success {:.3}, median final distance {}, rate {rate} -> {}",
                s.config.name,
                m.n_runs,
                m.n_failed,
                m.success_fraction,
                m.median_final_distance.map(|d| format!("{d:.6} m")).unwrap_or_else(|| "inf".into()),
                dir.display()
            );
        }
        Command::CheckSchedule {
            alpha,
            gamma,
            a,
            stability,
            h0,
            series,
        } => {
            let s = GainSchedule {
                a: *a,
                stability: *stability,
                alpha: *alpha,
                h0_m: *h0,
                gamma_s: *gamma,
            };
            if ![s.a, s.stability, s.alpha, s.h0_m, s.gamma_s].iter().all(|v| v.is_finite()) {
                return Err(Error::Config("schedule parameters must be finite".into()).into());
            }
            let v = check_schedule(&s);
            for (name, ok) in v.conditions() {
                println!("{:<24} {}", name, if ok { "pass" } else { "FAIL" });
            }
            println!("beta = {:.6}, predicted rate exponent = {:.6}", v.beta, v.predicted_rate_exponent);
            println!("valid = {}, asymptotically normal = {}", v.valid(), v.asymptotically_normal());
            if *series {
                let ev = series_evidence(&s);
                for (name, t) in [
                    ("sum a_k", &ev.sum_a),
                    ("sum a_k h_k", &ev.sum_ah),
                    ("sum a_k^2/h_k^2", &ev.sum_a2_over_h2),
                ] {
                    println!(
                        "{name:<16} S(1e6) = {:.6e}, local exponent {:.4} ({})",
                        t.partial_sums[3],
                        t.local_exponent,
                        if t.looks_divergent() { "diverges" } else { "converges" }
                    );
                }
            }
        }
        Command::Field { config, bbox, res, node } => {
            let s = Scenario::load(config)?;
            let p = s.dim();
            if bbox.len() != 2 * p {
                return Err(Error::Config(format!("--bbox needs {} numbers for dimension {p}", 2 * p)).into());
            }
            let field = s
                .fields
                .get(*node)
                .ok_or_else(|| Error::Config(format!("--node {node}: scenario has {} node(s)", s.fields.len())))?;
            let grid = GridSpec::new(bbox[..p].to_vec(), bbox[p..].to_vec(), *res)?;
            let path = scenario_dir(&cli.out_dir, &s).join("field.csv");
            write_atomic(&path, field_raster_csv(field, &grid)?.as_bytes())?;
            println!("{} grid points -> {}", grid.counts().iter().product::<usize>(), path.display());
        }
        Command::Gradcheck { config } => {
            let s = Scenario::load(config)?;
            let rows = run_gradcheck(&s)?;
            let path = scenario_dir(&cli.out_dir, &s).join("gradcheck.csv");
            write_atomic(&path, gradcheck_csv(&rows).as_bytes())?;
            let mut all = true;
            for r in &rows {
                println!(
                    "sigma {:>4} h {:>5}: var {:.5} vs {:.5} [{}], bias {:.3e} <= {:.3e} [{}]",
                    r.sigma,
                    r.h,
                    r.empirical_var,
                    r.predicted_var,
                    if r.variance_ok { "ok" } else { "FAIL" },
                    r.empirical_bias.abs(),
                    r.bias_bound,
                    if r.bias_ok { "ok" } else { "FAIL" },
                );
                all &= r.passed();
            }
            println!("-> {}", path.display());
            if !all {
                return Ok(ExitCode::from(EXIT_CHECK_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
