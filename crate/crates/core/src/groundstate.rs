//! Ground states by normalized gradient flow on expanding disks, with an
//! independent shooting solver for cross-validation.
//!
//! On a disk of radius `R` with `ρ(R) = 0` the flow
//! `ρ ← ρ + τ (Δρ − Γ ρ³/(1+ρ²))` followed by renormalization to unit power
//! is projected gradient descent for `H`. The radius is then increased
//! along a schedule, warm-starting each disk from the previous minimizer,
//! until the minimum energy stops changing and the profile has decayed well
//! inside the disk.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{multiplier_by_pairing, pohozaev_residual};
use crate::radial::{gradient_norm_sq_slice, integrate_radial_with, laplacian_into, RadialGrid, RadialProfile};
use crate::shooting::{assemble, bisect, find_bracket};
use crate::threshold::{classify_gamma, Classification, ThresholdEstimate};

/// Settings of the gradient flow and the disk continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Pseudo-time step in units of `dr²`.
    pub step_factor: f64,
    /// Mesh spacing shared by every disk of the schedule.
    pub spacing: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub ball_schedule: Vec<f64>,
    pub seed_width: f64,
    /// Largest change of the disk minimum between consecutive radii that
    /// counts as converged.
    pub ball_energy_tol: f64,
    /// Largest admissible `ρ(0.9 R)` for a converged state.
    pub boundary_tol: f64,
    /// Consecutive energy increases that abort the flow.
    pub divergence_window: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step_factor: 0.4,
            spacing: 1.0 / 128.0,
            max_iters: 2_000_000,
            residual_tol: 1e-10,
            ball_schedule: vec![8.0, 12.0, 16.0, 24.0],
            seed_width: 1.5,
            ball_energy_tol: 1e-8,
            boundary_tol: 1e-10,
            divergence_window: 50,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_factor > 0.0 && self.step_factor.is_finite()) {
            return Err(Error::invalid("step factor must be positive"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("spacing must be positive"));
        }
        if !(self.residual_tol > 1e-12 && self.residual_tol < 1e-2) {
            return Err(Error::invalid(format!(
                "residual tolerance must lie in (1e-12, 1e-2), got {}",
                self.residual_tol
            )));
        }
        if self.ball_schedule.is_empty() {
            return Err(Error::invalid("ball schedule is empty"));
        }
        if self.ball_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("ball schedule must be strictly increasing"));
        }
        if self.ball_schedule.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("ball radii must be positive"));
        }
        if !(self.seed_width > 0.0) {
            return Err(Error::invalid("seed width must be positive"));
        }
        if self.max_iters == 0 || self.divergence_window == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(())
    }

    fn grid(&self, radius: f64) -> Result<RadialGrid> {
        RadialGrid::with_spacing(radius, self.spacing)
    }
}

/// Energy and peak amplitude at every flow iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub energy: Vec<f64>,
    pub sup_rho: Vec<f64>,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Writes `iter,energy,sup_rho` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "iter,energy,sup_rho")?;
        for (i, (e, s)) in self.energy.iter().zip(&self.sup_rho).enumerate() {
            writeln!(out, "{i},{e:.17e},{s:.17e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Relative residual of `Δρ − Γρ³/(1+ρ²) − λρ` in the weighted norm over
/// every node except the Dirichlet one, divided by `‖ρ‖`.
pub fn el_residual(rho: &RadialProfile, gamma: f64, lambda: f64) -> f64 {
    let grid = rho.grid();
    let v = rho.values();
    let mut lap = vec![0.0; v.len()];
    laplacian_into(grid, v, &mut lap);
    residual_from_laplacian(grid, v, &lap, gamma, lambda)
}

fn residual_from_laplacian(grid: &RadialGrid, v: &[f64], lap: &[f64], gamma: f64, lambda: f64) -> f64 {
    let n = grid.intervals();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..=n {
        let w = grid.weight(j);
        den += w * v[j] * v[j];
        if j < n {
            let s = v[j] * v[j];
            let r = lap[j] - gamma * v[j] * s / (1.0 + s) - lambda * v[j];
            num += w * r * r;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Converged minimizer on one disk.
#[derive(Debug, Clone)]
pub struct BallSolution {
    pub radius: f64,
    pub profile: RadialProfile,
    /// Disk minimum `μ_{Γ,ε}`.
    pub mu: f64,
    pub lambda: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub trace: FlowTrace,
}

fn seed(grid: &RadialGrid, width: f64) -> Result<RadialProfile> {
    let mut p = RadialProfile::from_fn(*grid, |r| (-0.5 * (r / width).powi(2)).exp())?;
    p.values_mut()[grid.intervals()] = 0.0;
    p.normalized()
}

/// Resamples `init` onto `grid`. When the disk grows and `init` is a bound
/// state, the region past `min(0.8 R_old, 8/√λ)` is replaced by the decaying
/// tail `ρ(r_m) √(r_m/r) e^{−√λ (r − r_m)}`: the explicit stencil moves
/// support by one node per iteration, so a zero-padded start would keep an
/// exactly vanishing outer region long after the residual has converged.
fn warm_start(init: &RadialProfile, grid: RadialGrid, gamma: f64) -> Result<RadialProfile> {
    let old = init.grid().radius();
    let n = grid.intervals();
    let mut p = init.resample(grid);
    let lambda = multiplier_by_pairing(init, gamma);
    if grid.radius() > old && lambda > 0.0 {
        let kappa = lambda.sqrt();
        let r_m = grid.node(grid.nearest((0.8 * old).min(8.0 / kappa)));
        let anchor = p.sample(r_m);
        if anchor > 0.0 {
            for j in 0..n {
                let r = grid.node(j);
                if r > r_m {
                    p.values_mut()[j] = anchor * (r_m / r).sqrt() * (-kappa * (r - r_m)).exp();
                }
            }
        }
    }
    p.values_mut()[n] = 0.0;
    p.normalized()
}

/// Runs the flow on the disk of radius `radius`, from a Gaussian seed.
pub fn solve_ball(gamma: f64, radius: f64, cfg: &FlowConfig) -> Result<BallSolution> {
    solve_ball_from(gamma, radius, cfg, None)
}

/// Runs the flow on the disk of radius `radius`, starting from `init`
/// (resampled onto the disk) or from the Gaussian seed.
pub fn solve_ball_from(
    gamma: f64,
    radius: f64,
    cfg: &FlowConfig,
    init: Option<&RadialProfile>,
) -> Result<BallSolution> {
    cfg.validate()?;
    if !gamma.is_finite() {
        return Err(Error::invalid("coupling must be finite"));
    }
    let grid = cfg.grid(radius)?;
    let n = grid.intervals();
    let mut rho = match init {
        Some(p) => warm_start(p, grid, gamma)?,
        None => seed(&grid, cfg.seed_width)?,
    }
    .into_values();
    let weights = grid.weights();
    let dr = grid.spacing();
    let step = cfg.step_factor * dr * dr;
    let mut lap = vec![0.0; n + 1];
    let mut trace = FlowTrace::default();
    let mut prev_energy = f64::INFINITY;
    let mut rises = 0usize;

    for iter in 0..cfg.max_iters {
        laplacian_into(&grid, &rho, &mut lap);
        let kinetic = gradient_norm_sq_slice(&grid, &rho);
        let mut potential = 0.0;
        let mut quartic = 0.0;
        let mut sup = 0.0f64;
        for j in 0..=n {
            let s = rho[j] * rho[j];
            potential += weights[j] * crate::functionals::g_sat_unchecked(s);
            quartic += weights[j] * s * s / (1.0 + s);
            sup = sup.max(rho[j]);
        }
        let energy = kinetic + gamma * potential;
        let lambda = -kinetic - gamma * quartic;
        if !energy.is_finite() {
            return Err(Error::StepSize(format!("energy became non-finite at iteration {iter}")));
        }
        trace.energy.push(energy);
        trace.sup_rho.push(sup);

        if energy > prev_energy + 1e-12 * prev_energy.abs().max(1.0) {
            rises += 1;
            if rises >= cfg.divergence_window {
                return Err(Error::StepSize(format!(
                    "energy rose for {rises} consecutive iterations at step {step:.3e}"
                )));
            }
        } else {
            rises = 0;
        }
        prev_energy = energy;

        let residual = residual_from_laplacian(&grid, &rho, &lap, gamma, lambda);
        if residual < cfg.residual_tol {
            log::debug!(
                "disk R = {radius}: converged in {iter} iterations, μ = {energy:.12}, λ = {lambda:.10}"
            );
            return Ok(BallSolution {
                radius,
                profile: RadialProfile::new(grid, rho)?,
                mu: energy,
                lambda,
                el_residual: residual,
                iterations: iter,
                trace,
            });
        }

        for j in 0..n {
            let s = rho[j] * rho[j];
            rho[j] += step * (lap[j] - gamma * rho[j] * s / (1.0 + s));
        }
        rho[n] = 0.0;
        let p: f64 = (0..=n).map(|j| weights[j] * rho[j] * rho[j]).sum();
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::StepSize(format!("power degenerated to {p} at iteration {iter}")));
        }
        let scale = p.sqrt().recip();
        rho.iter_mut().for_each(|v| *v *= scale);
    }
    Err(Error::Convergence {
        iterations: cfg.max_iters,
        reason: format!("residual above {:.1e} on the disk of radius {radius}", cfg.residual_tol),
        trace: Some(Box::new(trace)),
    })
}

/// Runs every disk of the schedule with warm starts.
pub fn ball_continuation(gamma: f64, cfg: &FlowConfig) -> Result<Vec<BallSolution>> {
    cfg.validate()?;
    let mut out: Vec<BallSolution> = Vec::with_capacity(cfg.ball_schedule.len());
    for &radius in &cfg.ball_schedule {
        let sol = solve_ball_from(gamma, radius, cfg, out.last().map(|b| &b.profile))?;
        out.push(sol);
    }
    Ok(out)
}

/// Computed ground state with its multipliers and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub gamma: f64,
    pub profile: RadialProfile,
    /// Propagation constant `λ`.
    pub lambda: f64,
    /// Minimum energy `μ_Γ`.
    pub mu: f64,
    pub el_residual: f64,
    pub pohozaev: f64,
    /// `(R, μ_{Γ,ε})` along the schedule.
    pub ball_energies: Vec<(f64, f64)>,
    /// Global phase of the pair `(u, v) = ρ (cos φ, sin φ)`; the profile itself
    /// is always stored nonnegative.
    pub phase: f64,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    gamma: f64,
    lambda: f64,
    mu: f64,
    el_residual: f64,
    pohozaev: f64,
    ball_energies: Vec<(f64, f64)>,
    phase: f64,
    radius: f64,
    intervals: usize,
    profile: PathBuf,
}

impl GroundState {
    /// Decay rate of the tail, see [`decay_rate_scaled`].
    pub fn decay_rate(&self) -> Result<f64> {
        decay_rate_scaled(&self.profile, self.lambda)
    }

    /// Writes `state.json` and `profile.csv` into `dir` and returns the
    /// path of the JSON file.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let csv = dir.join("profile.csv");
        self.profile.write_csv(BufWriter::new(fs::File::create(&csv)?))?;
        let state = StateFile {
            gamma: self.gamma,
            lambda: self.lambda,
            mu: self.mu,
            el_residual: self.el_residual,
            pohozaev: self.pohozaev,
            ball_energies: self.ball_energies.clone(),
            phase: self.phase,
            radius: self.profile.grid().radius(),
            intervals: self.profile.grid().intervals(),
            profile: PathBuf::from("profile.csv"),
        };
        let path = dir.join("state.json");
        let mut out = BufWriter::new(fs::File::create(&path)?);
        serde_json::to_writer_pretty(&mut out, &state)?;
        writeln!(out)?;
        out.flush()?;
        Ok(path)
    }

    /// Reads a `state.json` written by [`GroundState::save`]; the profile
    /// path is resolved relative to the JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let state: StateFile = serde_json::from_reader(BufReader::new(fs::File::open(path)?))?;
        let csv = match path.parent() {
            Some(dir) if state.profile.is_relative() => dir.join(&state.profile),
            _ => state.profile.clone(),
        };
        let profile = RadialProfile::read_csv(BufReader::new(fs::File::open(csv)?))?;
        let grid = profile.grid();
        if grid.intervals() != state.intervals || (grid.radius() - state.radius).abs() > 1e-9 * state.radius {
            return Err(Error::Parse(format!(
                "profile grid (R = {}, n = {}) disagrees with the state file (R = {}, n = {})",
                grid.radius(),
                grid.intervals(),
                state.radius,
                state.intervals
            )));
        }
        Ok(GroundState {
            gamma: state.gamma,
            profile,
            lambda: state.lambda,
            mu: state.mu,
            el_residual: state.el_residual,
            pohozaev: state.pohozaev,
            ball_energies: state.ball_energies,
            phase: state.phase,
        })
    }
}

fn assemble_state(gamma: f64, balls: &[BallSolution]) -> GroundState {
    let last = balls.last().expect("at least one disk");
    GroundState {
        gamma,
        profile: last.profile.clone(),
        lambda: last.lambda,
        mu: last.mu,
        el_residual: last.el_residual,
        pohozaev: pohozaev_residual(&last.profile, gamma, last.lambda),
        ball_energies: balls.iter().map(|b| (b.radius, b.mu)).collect(),
        phase: 0.0,
    }
}

/// Ground state for a coupling below `−T₀`: disks along the schedule until
/// the disk minimum changes by less than `ball_energy_tol` and
/// `ρ(0.9 R) < boundary_tol`.
pub fn solve_ground_state(gamma: f64, cfg: &FlowConfig, est: &ThresholdEstimate) -> Result<GroundState> {
    cfg.validate()?;
    match classify_gamma(gamma, est) {
        Classification::GroundStateExists => {}
        Classification::NoGroundState => {
            return Err(Error::Domain(format!(
                "no ground state for Γ = {gamma}: the coupling is above −T₀ ≈ {:.6}",
                -est.t0_estimate
            )))
        }
        Classification::Marginal => {
            return Err(Error::Domain(format!(
                "Γ = {gamma} lies within {:.3} of −T₀ ≈ {:.6}; existence is undecided",
                est.bracket_width, -est.t0_estimate
            )))
        }
    }
    let mut balls: Vec<BallSolution> = Vec::with_capacity(cfg.ball_schedule.len());
    for &radius in &cfg.ball_schedule {
        let sol = solve_ball_from(gamma, radius, cfg, balls.last().map(|b| &b.profile))?;
        let grid = sol.profile.grid();
        let edge = sol.profile.values()[grid.nearest(0.9 * radius)];
        let settled = balls
            .last()
            .map(|prev| (prev.mu - sol.mu).abs() < cfg.ball_energy_tol)
            .unwrap_or(false);
        log::info!(
            "Γ = {gamma}, R = {radius}: μ = {:.12}, λ = {:.10}, ρ(0.9R) = {edge:.3e}",
            sol.mu,
            sol.lambda
        );
        balls.push(sol);
        if settled && edge < cfg.boundary_tol {
            return Ok(assemble_state(gamma, &balls));
        }
    }
    Err(Error::not_converged(
        balls.iter().map(|b| b.iterations).sum(),
        format!(
            "disk minimum did not settle along the schedule {:?}",
            cfg.ball_schedule
        ),
    ))
}

/// Decay rate `κ` from a least-squares fit of `ln(ρ √r) ≈ c − κ r` over
/// `[0.5 R, 0.8 R]`.
pub fn tail_decay_rate(profile: &RadialProfile) -> Result<f64> {
    tail_decay_rate_in(profile, 0.5, 0.8)
}

/// Tail fit over `[0.5 R_fit, 0.8 R_fit]` with `R_fit = min(R, 16/√λ)`.
///
/// Strongly bound states fall below roundoff well inside a fixed disk, so
/// the window follows the decay length instead of the disk.
pub fn decay_rate_scaled(profile: &RadialProfile, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("decay fit needs λ > 0, got {lambda}")));
    }
    let radius = profile.grid().radius();
    let fit = radius.min(16.0 / lambda.sqrt()) / radius;
    tail_decay_rate_in(profile, 0.5 * fit, 0.8 * fit)
}

/// Same fit over `[lo·R, hi·R]`.
pub fn tail_decay_rate_in(profile: &RadialProfile, lo: f64, hi: f64) -> Result<f64> {
    let grid = profile.grid();
    let (a, b) = (lo * grid.radius(), hi * grid.radius());
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .zip(profile.values())
        .filter(|&(r, _)| r >= a && r <= b && r > 0.0)
        .map(|(r, &v)| (r, v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("tail window holds fewer than two nodes"));
    }
    if let Some(&(r, _)) = pts.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::NumericalFailure(format!("profile is not positive at r = {r}")));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(r, v)| (sx + r, sy + (v * r.sqrt()).ln()));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(r, v) in &pts {
        let dx = r - mx;
        sxy += dx * ((v * r.sqrt()).ln() - my);
        sxx += dx * dx;
    }
    Ok(-sxy / sxx)
}

/// Shooting solve of the Euler–Lagrange equation on `grid`: the amplitude
/// is bisected between decay and zero crossing at fixed `λ`, and `λ` is
/// adjusted by secant steps on the power defect. Returns the unit-power
/// decaying profile.
pub fn shoot_ode(gamma: f64, lambda_guess: f64, amp_guess: f64, grid: &RadialGrid) -> Result<RadialProfile> {
    if !(gamma < 0.0) {
        return Err(Error::invalid(format!("shooting needs Γ < 0, got {gamma}")));
    }
    if !(lambda_guess > 0.0) || !(amp_guess > 0.0) {
        return Err(Error::invalid("shooting needs positive λ and amplitude guesses"));
    }
    let mut amp = amp_guess;
    let mut shoot = |lambda: f64| -> Result<(Vec<f64>, f64)> {
        let source = move |q: f64| gamma * q * q * q / (1.0 + q * q) + lambda * q;
        let bracket = find_bracket(grid, amp, 1.05, 400, &source)?;
        let bracket = bisect(grid, bracket, 0.0, &source);
        amp = bracket.lo;
        let q = assemble(grid, bracket, lambda, 1e-6, &source)?;
        let p = integrate_radial_with(grid, |j| q[j] * q[j]);
        Ok((q, p))
    };
    let (mut l0, mut l1) = (lambda_guess, lambda_guess * (1.0 + 1e-4));
    let (_, p0) = shoot(l0)?;
    let mut f0 = p0 - 1.0;
    for iter in 0..60 {
        let (q, p1) = shoot(l1)?;
        let f1 = p1 - 1.0;
        log::trace!("shooting iteration {iter}: λ = {l1:.14}, P − 1 = {f1:.3e}");
        if f1.abs() < 1e-12 {
            return RadialProfile::new(*grid, q)?.normalized();
        }
        if f1 == f0 {
            break;
        }
        let next = l1 - f1 * (l1 - l0) / (f1 - f0);
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        (l0, f0, l1) = (l1, f1, next);
    }
    Err(Error::not_converged(60, "secant on λ could not reach unit power"))
}

/// Per-coupling outcome of a sweep.
#[derive(Debug, Clone)]
pub enum SweepOutcome {
    Solved(Box<GroundState>),
    /// Outside the existence regime; nothing was solved.
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub gamma: f64,
    pub classification: Classification,
    pub outcome: SweepOutcome,
}

/// Classifies and, where a ground state exists, solves every coupling in
/// parallel. Results follow the input order and failures stay per entry.
pub fn sweep(gammas: &[f64], cfg: &FlowConfig, est: &ThresholdEstimate) -> Result<Vec<SweepEntry>> {
    if gammas.is_empty() {
        return Err(Error::invalid("empty coupling list"));
    }
    cfg.validate()?;
    Ok(gammas
        .par_iter()
        .map(|&gamma| {
            let classification = classify_gamma(gamma, est);
            let outcome = match classification {
                Classification::GroundStateExists => match solve_ground_state(gamma, cfg, est) {
                    Ok(gs) => SweepOutcome::Solved(Box::new(gs)),
                    Err(e) => SweepOutcome::Failed(e.to_string()),
                },
                _ => SweepOutcome::Skipped,
            };
            SweepEntry {
                gamma,
                classification,
                outcome,
            }
        })
        .collect())
}
