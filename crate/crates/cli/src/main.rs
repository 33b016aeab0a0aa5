mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use thumbaxis_core::config::RunConfig;
use thumbaxis_core::geom::AxisConfig;
use thumbaxis_core::grasp::is_valid_grasp;
use thumbaxis_core::manip::{manipulation_range, transition_report};
use thumbaxis_core::optimizer::{optimize, OptimizeOptions, Problem};
use thumbaxis_core::verify::{reports_to_csv, run_verify};

/// Thumb rotation-axis placement search
#[derive(Parser, Debug)]
#[command(name = "thumbaxis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search the configured grid and write result.json, topk.csv and heatmap.svg
    Optimize {
        config: PathBuf,
        /// Worker threads (default: available parallelism)
        #[arg(long, env = "THUMBAXIS_WORKERS")]
        workers: Option<usize>,
        /// Checkpoint file; an existing one is resumed
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Output directory (default: `output.dir` relative to the config file)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this many configurations, leaving the checkpoint for a later resume
        #[arg(long, hide = true)]
        stop_after: Option<u64>,
        /// Suppress progress on stderr
        #[arg(long, short)]
        quiet: bool,
    },
    /// Grasp verdict and transition analysis for one axis placement
    Check {
        config: PathBuf,
        /// x,y,z,roll,pitch,yaw in mm and degrees
        #[arg(long, value_parser = parse_omega, allow_hyphen_values = true)]
        omega: [f64; 6],
    },
    /// Compare the solvers against their independent oracles; CSV on stdout
    Verify {
        /// Shift the solver geometry by this many mm (negative control)
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_mm: f64,
    },
    /// Step-by-step hold check of object widths through the precision-lateral transition
    Transition {
        config: PathBuf,
        #[arg(long, value_parser = parse_omega, allow_hyphen_values = true)]
        omega: [f64; 6],
        /// Object width(s) in mm, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        width: Vec<f64>,
    },
}

fn parse_omega(s: &str) -> Result<[f64; 6], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    let values: [f64; 6] = values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 6 values x,y,z,roll,pitch,yaw, got {}", v.len()))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(values)
}

/// A run that completed but whose answer is negative (exit 2).
struct Negative;

fn load(config: &Path) -> Result<(RunConfig, Problem, PathBuf)> {
    let cfg = RunConfig::from_path(config)?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    let problem = cfg.build(&base)?;
    Ok((cfg, problem, base))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    config: &Path,
    workers: Option<usize>,
    checkpoint: Option<PathBuf>,
    top_k: Option<usize>,
    out: Option<PathBuf>,
    stop_after: Option<u64>,
    quiet: bool,
) -> Result<Result<(), Negative>> {
    let (cfg, problem, base) = load(config)?;
    let dims = cfg.output.heatmap_dims;
    if dims[0] == dims[1] {
        bail!("field `output.heatmap_dims`: the two dimensions must differ");
    }
    let workers = workers
        .or(cfg.run.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let top_k = top_k.unwrap_or(cfg.run.top_k);
    if top_k == 0 {
        bail!("top-k must be positive");
    }
    let mut options = OptimizeOptions { workers, top_k, stop_after, ..Default::default() };
    if let Some(cp) = &cfg.run.checkpoint {
        options.checkpoint = Some(base.join(&cp.path));
        options.checkpoint_every = cp.every;
    }
    if checkpoint.is_some() {
        options.checkpoint = checkpoint;
    }
    if !quiet {
        options.progress = Some(Arc::new(|done, total| eprintln!("thumbaxis: {done}/{total} configurations")));
    }
    let out = out.unwrap_or_else(|| base.join(&cfg.output.dir));

    let res = optimize(&problem, &options)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut doc = serde_json::to_value(&res)?;
    let runtime = doc.as_object_mut().and_then(|m| m.remove("runtime"));
    write(&out.join("result.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    let runtime = json!({ "problem_hash": res.metadata.problem_hash, "runtime": runtime });
    write(&out.join("runtime.json"), &(serde_json::to_string_pretty(&runtime)? + "\n"))?;
    write(&out.join("topk.csv"), &report::topk_csv(&res)?)?;
    if let Some(best) = &res.omega_opt {
        write(&out.join("heatmap.svg"), &report::heatmap_svg(&problem, &res, best, dims))?;
    }

    println!(
        "evaluated {} of {} configurations, {} valid ({:.0} configs/s on {} worker(s))",
        res.evaluated_count, res.metadata.grid_total, res.valid_count, res.runtime.configs_per_s, res.runtime.workers
    );
    if !res.complete {
        println!("run stopped early; rerun with the same checkpoint to resume");
    }
    match &res.omega_opt {
        Some(best) => {
            let v = best.config_mm_deg;
            let w = if best.interval.is_empty() { "empty".to_string() } else { format!("[{:.3}, {:.3}] mm", best.interval.lo, best.interval.hi) };
            println!(
                "omega_opt: x={:.3} y={:.3} z={:.3} mm, roll={:.3} pitch={:.3} yaw={:.3} deg, W={w}, |W|={:.3} mm",
                v[0], v[1], v[2], v[3], v[4], v[5], best.width
            );
            println!("artifacts written to {}", out.display());
            Ok(Ok(()))
        }
        None if res.complete => {
            println!("no valid configuration in the grid");
            Ok(Err(Negative))
        }
        None => Ok(Ok(())),
    }
}

fn cmd_check(config: &Path, omega: [f64; 6]) -> Result<Result<(), Negative>> {
    let (_, problem, _) = load(config)?;
    let cfg = AxisConfig::from_mm_deg(omega);
    let verdict = is_valid_grasp(&cfg, &problem.hand, &problem.req);
    let transition = manipulation_range(&cfg, &problem.hand, &problem.req, problem.delta_m);
    let valid = verdict.is_valid();
    let doc = json!({
        "omega_mm_deg": omega,
        "problem_hash": problem.hash(),
        "valid": valid,
        "verdict": verdict,
        "transition": transition,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(if valid { Ok(()) } else { Err(Negative) })
}

fn cmd_verify(perturb_mm: f64) -> Result<Result<(), Negative>> {
    let reports = run_verify(perturb_mm);
    print!("{}", reports_to_csv(&reports));
    let failed = reports.iter().filter(|r| !r.pass).count();
    eprintln!("{} comparisons, {failed} outside tolerance", reports.len());
    Ok(if failed == 0 { Ok(()) } else { Err(Negative) })
}

fn cmd_transition(config: &Path, omega: [f64; 6], widths: &[f64]) -> Result<Result<(), Negative>> {
    if let Some(w) = widths.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        bail!("width must be a non-negative number, got {w}");
    }
    let (_, problem, _) = load(config)?;
    let cfg = AxisConfig::from_mm_deg(omega);
    let thumb = problem.hand.thumb_trajectory(&cfg);
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["width_mm", "index_sample", "j", "distance_mm", "gap_mm", "hold_ok"])?;
    let mut capable = true;
    for &width in widths {
        let r = transition_report(&thumb, &problem.hand, &problem.req, problem.delta_m, width);
        for row in &r.rows {
            w.write_record([
                width.to_string(),
                row.index_sample.to_string(),
                row.j.to_string(),
                row.distance.to_string(),
                row.gap.to_string(),
                row.hold_ok.to_string(),
            ])?;
        }
        let range = if r.overall.is_empty() { "empty".to_string() } else { format!("[{:.3}, {:.3}] mm", r.overall.lo, r.overall.hi) };
        let verdict = if !r.capable {
            "NOT CAPABLE (an index pose lacks a lateral or following precision thumb pose)"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        eprintln!("width {width} mm: {verdict}; W = {range}");
        capable &= r.capable;
    }
    w.flush()?;
    Ok(if capable { Ok(()) } else { Err(Negative) })
}

fn run(cli: Cli) -> Result<Result<(), Negative>> {
    match cli.command {
        Command::Optimize { config, workers, checkpoint, top_k, out, stop_after, quiet } => {
            cmd_optimize(&config, workers, checkpoint, top_k, out, stop_after, quiet)
        }
        Command::Check { config, omega } => cmd_check(&config, omega),
        Command::Verify { perturb_mm } => cmd_verify(perturb_mm),
        Command::Transition { config, omega, width } => cmd_transition(&config, omega, &width),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Negative)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
