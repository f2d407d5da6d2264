use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use satground::diagnostics::{
    default_samples, inequality_suite, polar_suite, polar_test_profiles, verify_ground_state, DiagnosticsReport,
};
use satground::groundstate::{solve_ground_state, sweep, FlowConfig, GroundState, SweepOutcome};
use satground::propagator::{embed_profile, split_step_evolve, stationarity_report};
use satground::threshold::{classify_gamma, estimate_threshold, Classification, ThresholdConfig, ThresholdEstimate};
use serde::Serialize;

use crate::config::{set, RunConfig};
use crate::{Cli, CliError, Command, FlowArgs, PropagateArgs, SolveArgs, SweepArgs, ThresholdArgs, VerifyArgs};

/// Coupling of the polar check when neither a flag nor a state supplies one.
const DEFAULT_POLAR_GAMMA: f64 = -30.0;

type Outcome = Result<(), CliError>;

pub fn run(cli: Cli) -> Outcome {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Threshold(args) => cmd_threshold(cfg, args),
        Command::Solve(args) => cmd_solve(cfg, args),
        Command::Sweep(args) => cmd_sweep(cfg, args),
        Command::Verify(args) => cmd_verify(cfg, args),
        Command::Propagate(args) => cmd_propagate(cfg, args),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    let fail = |e: io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let mut out = BufWriter::new(fs::File::create(path).map_err(fail)?);
    body(&mut out).map_err(fail)?;
    out.flush().map_err(fail)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn flow_config(mut flow: FlowConfig, args: FlowArgs) -> FlowConfig {
    set(&mut flow.spacing, args.spacing);
    set(&mut flow.residual_tol, args.residual_tol);
    set(&mut flow.ball_schedule, args.schedule);
    set(&mut flow.max_iters, args.max_iters);
    flow
}

fn threshold(cfg: &ThresholdConfig) -> Result<ThresholdEstimate, CliError> {
    let est = estimate_threshold(cfg)?;
    log::info!("T0 ≈ {:.10} (bracket width {:.3e})", est.t0_estimate, est.bracket_width);
    Ok(est)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// One `gamma,classification,mu,lambda,decay_rate` row.
fn summary_row(gamma: f64, class: Classification, gs: Option<&GroundState>) -> String {
    format!(
        "{gamma},{class},{},{},{}",
        fmt_opt(gs.map(|g| g.mu)),
        fmt_opt(gs.map(|g| g.lambda)),
        fmt_opt(gs.and_then(|g| g.decay_rate().ok())),
    )
}

const SUMMARY_HEADER: &str = "gamma,classification,mu,lambda,decay_rate";

fn cmd_threshold(mut cfg: RunConfig, args: ThresholdArgs) -> Outcome {
    set(&mut cfg.threshold.tol, args.tol);
    set(&mut cfg.threshold.deltas, args.deltas);
    let est = threshold(&cfg.threshold)?;
    println!("T0 estimate (Townes mass): {:.10}", est.t0_estimate);
    println!("note: T0 is taken as the mass of the Townes profile; the trial quotients below bound it from above");
    println!("{:>14}  {:>16}", "delta", "Q(w_delta)");
    for (delta, q) in &est.upper_bounds {
        println!("{delta:>14.6e}  {q:>16.10}");
    }
    println!("bracket width: {:.6e}", est.bracket_width);
    if let Some(path) = args.output.or(cfg.output) {
        write_json(&path, &est)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassificationRecord {
    gamma: f64,
    classification: Classification,
    #[serde(rename = "T0_estimate")]
    t0_estimate: f64,
    bracket_width: f64,
}

fn cmd_solve(mut cfg: RunConfig, args: SolveArgs) -> Outcome {
    let gamma = args
        .gamma
        .or(cfg.gamma)
        .ok_or_else(|| CliError::usage("solve needs --gamma"))?;
    let flow = flow_config(cfg.flow, args.flow);
    flow.validate()?;
    let out_dir = args.output.or(cfg.output.take());
    let est = threshold(&cfg.threshold)?;
    let class = classify_gamma(gamma, &est);
    println!("Γ = {gamma}: {class} (T0 ≈ {:.6}, bracket width {:.3e})", est.t0_estimate, est.bracket_width);
    if let Some(dir) = &out_dir {
        create_dir(dir)?;
        let record = ClassificationRecord {
            gamma,
            classification: class,
            t0_estimate: est.t0_estimate,
            bracket_width: est.bracket_width,
        };
        write_json(&dir.join("classification.json"), &record)?;
    }
    match class {
        Classification::GroundStateExists => {}
        Classification::NoGroundState => {
            return Err(CliError::new(
                CliError::DOMAIN,
                format!("no ground state for Γ = {gamma}: the coupling lies above −T0"),
            ))
        }
        Classification::Marginal => {
            return Err(CliError::new(
                CliError::DOMAIN,
                format!("Γ = {gamma} is within the threshold uncertainty; existence is undecided"),
            ))
        }
    }
    let gs = solve_ground_state(gamma, &flow, &est)?;
    let report = verify_ground_state(&gs);
    if let Some(dir) = &out_dir {
        gs.save(dir)?;
        write_json(&dir.join("report.json"), &report)?;
    }
    print!("{}", report.render_table());
    println!("{SUMMARY_HEADER}");
    println!("{}", summary_row(gamma, class, Some(&gs)));
    diagnostics_outcome(&report)
}

fn diagnostics_outcome(report: &DiagnosticsReport) -> Outcome {
    if report.overall {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::new(
            CliError::DIAGNOSTICS,
            format!("diagnostics failed: {}", failed.join(", ")),
        ))
    }
}

fn cmd_sweep(cfg: RunConfig, args: SweepArgs) -> Outcome {
    let gammas = args
        .gamma
        .or(args.gamma_range.map(|r| r.0))
        .or(cfg.gammas)
        .ok_or_else(|| CliError::usage("sweep needs --gamma or --gamma-range"))?;
    let flow = flow_config(cfg.flow, args.flow);
    let est = threshold(&cfg.threshold)?;
    let entries = sweep(&gammas, &flow, &est)?;
    let mut rows = vec![SUMMARY_HEADER.to_string()];
    let mut failures = 0;
    for entry in &entries {
        let gs = match &entry.outcome {
            SweepOutcome::Solved(gs) => Some(gs.as_ref()),
            SweepOutcome::Skipped => None,
            SweepOutcome::Failed(msg) => {
                failures += 1;
                eprintln!("Γ = {}: {msg}", entry.gamma);
                None
            }
        };
        rows.push(summary_row(entry.gamma, entry.classification, gs));
    }
    match args.output.or(cfg.output) {
        Some(path) => write_file(&path, |out| rows.iter().try_for_each(|r| writeln!(out, "{r}")))?,
        None => rows.iter().for_each(|r| println!("{r}")),
    }
    if failures == entries.len() {
        return Err(CliError::new(CliError::NUMERICAL, "every coupling of the sweep failed"));
    }
    Ok(())
}

fn load_state(path: &Path) -> Result<GroundState, CliError> {
    GroundState::load(path).map_err(|e| CliError::io(format!("cannot load {}: {e}", path.display())))
}

fn cmd_verify(cfg: RunConfig, args: VerifyArgs) -> Outcome {
    let state = match args.state.or(cfg.state) {
        Some(path) => Some(load_state(&path)?),
        None => None,
    };
    let gamma = args
        .gamma
        .or(state.as_ref().map(|s| s.gamma))
        .or(cfg.gamma)
        .unwrap_or(DEFAULT_POLAR_GAMMA);
    let mut report = inequality_suite(&default_samples())?.merge(polar_suite(&polar_test_profiles()?, gamma)?);
    if let Some(gs) = &state {
        report = report.merge(verify_ground_state(gs));
    }
    print!("{}", report.render_table());
    if let Some(path) = args.output.or(cfg.output) {
        write_json(&path, &report)?;
    }
    diagnostics_outcome(&report)
}

fn cmd_propagate(mut cfg: RunConfig, args: PropagateArgs) -> Outcome {
    let state_path = args
        .state
        .or(cfg.state.take())
        .ok_or_else(|| CliError::usage("propagate needs --state"))?;
    let p = &mut cfg.propagation;
    set(&mut p.z, args.z);
    set(&mut p.dz, args.dz);
    set(&mut p.half_width, args.half_width);
    set(&mut p.m, args.m);
    if !(p.z > 0.0 && p.dz > 0.0 && p.z.is_finite()) {
        return Err(CliError::usage("--z and --dz must be positive"));
    }
    let steps = (p.z / p.dz).round();
    if steps < 1.0 || (steps * p.dz - p.z).abs() > 1e-9 * p.z {
        return Err(CliError::usage(format!("--dz {} does not divide --z {}", p.dz, p.z)));
    }
    let gs = load_state(&state_path)?;
    let f0 = embed_profile(&gs.profile, p.half_width, p.m)?;
    let (trace, _) = split_step_evolve(&f0, gs.gamma, p.dz, steps as usize)?;
    let report = stationarity_report(&gs, &trace)?;
    let dir = args
        .output
        .or(cfg.output)
        .unwrap_or_else(|| state_path.parent().map(Path::to_path_buf).unwrap_or_else(PathBuf::new));
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_file(&dir.join("trace.csv"), |out| {
        trace.write_csv(out).map_err(|e| io::Error::other(e.to_string()))
    })?;
    write_json(&dir.join("stationarity.json"), &report)?;
    println!(
        "λ = {:.10}, phase slope = {:.10}, steps = {}",
        gs.lambda,
        trace.phase_slope()?,
        trace.len()
    );
    print!("{}", report.render_table());
    diagnostics_outcome(&report)
}
