//! Pass/fail reports for computed states and for the pointwise inequalities
//! behind the threshold.
//!
//! Every check evaluates its quantity from the inputs directly, so a fault in
//! one stored field only fails the check that reads that field.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{f_aux, h_ratio, multiplier_by_pairing, pohozaev_multiplier, polar_energy, power};
use crate::groundstate::{decay_rate_scaled, el_residual, BallSolution, GroundState};
use crate::radial::RadialProfile;

/// One named measurement against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

/// Collection of uniquely named checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        DiagnosticsReport {
            checks: Vec::new(),
            overall: true,
        }
    }

    /// Appends a check.
    ///
    /// # Panics
    /// If a check of the same name is already present.
    pub fn push(&mut self, name: &str, passed: bool, measured: f64, tolerance: f64) {
        assert!(self.get(name).is_none(), "duplicate check name {name}");
        self.overall &= passed;
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            measured,
            tolerance,
        });
    }

    /// Check passing when `measured ≤ tolerance`.
    pub fn at_most(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.push(name, measured <= tolerance, measured, tolerance);
    }

    /// Check passing when `measured < bound` strictly.
    pub fn below(&mut self, name: &str, measured: f64, bound: f64) {
        self.push(name, measured < bound, measured, bound);
    }

    /// Check passing when `measured > bound` strictly.
    pub fn above(&mut self, name: &str, measured: f64, bound: f64) {
        self.push(name, measured > bound, measured, bound);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Concatenates two reports; names must stay unique.
    pub fn merge(mut self, other: DiagnosticsReport) -> Self {
        for c in other.checks {
            self.push(&c.name, c.passed, c.measured, c.tolerance);
        }
        self
    }

    /// Fixed-width text table.
    pub fn render_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:<6}  {:>14}  {:>14}", "check", "status", "measured", "tolerance");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:<6}  {:>14.6e}  {:>14.6e}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.measured,
                c.tolerance
            );
        }
        let _ = writeln!(out, "overall: {}", if self.overall { "PASS" } else { "FAIL" });
        out
    }
}

/// Tolerances applied by [`verify_ground_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateTolerances {
    pub normalization: f64,
    pub el_residual: f64,
    pub pohozaev: f64,
    pub multiplier_gap: f64,
    pub decay: f64,
}

impl Default for GroundStateTolerances {
    fn default() -> Self {
        GroundStateTolerances {
            normalization: 1e-8,
            el_residual: 1e-6,
            pohozaev: 1e-4,
            multiplier_gap: 1e-4,
            decay: 0.05,
        }
    }
}

/// Full report for a computed ground state with default tolerances.
pub fn verify_ground_state(gs: &GroundState) -> DiagnosticsReport {
    verify_ground_state_with(gs, &GroundStateTolerances::default())
}

pub fn verify_ground_state_with(gs: &GroundState, tol: &GroundStateTolerances) -> DiagnosticsReport {
    let rho = &gs.profile;
    let gamma = gs.gamma;
    let mut rep = DiagnosticsReport::new();

    rep.at_most("normalization", (power(rho) - 1.0).abs(), tol.normalization);

    let lambda_pz2 = multiplier_by_pairing(rho, gamma);
    let lambda_pz1 = pohozaev_multiplier(rho, gamma);
    rep.below("el_residual", el_residual(rho, gamma, lambda_pz2), tol.el_residual);
    rep.below(
        "pohozaev_residual",
        crate::functionals::pohozaev_residual(rho, gamma, lambda_pz2),
        tol.pohozaev,
    );
    let gap = (lambda_pz1 - lambda_pz2).abs() / lambda_pz1.abs().max(1e-12);
    rep.below("multiplier_consistency", gap, tol.multiplier_gap);

    rep.above("lambda_positive", gs.lambda, 0.0);
    rep.below("mu_negative", gs.mu, 0.0);

    let v = rho.values();
    let n = rho.grid().intervals();
    let min_interior = v[..n].iter().copied().fold(f64::INFINITY, f64::min);
    rep.above("positivity", min_interior, 0.0);
    let max_rise = v[..=n]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    rep.below("monotonicity", max_rise, 0.0);

    let decay_error = match (decay_rate_scaled(rho, lambda_pz2), lambda_pz2 > 0.0) {
        (Ok(rate), true) => (rate - lambda_pz2.sqrt()).abs() / lambda_pz2.sqrt(),
        _ => f64::INFINITY,
    };
    rep.below("decay_exponent", decay_error, tol.decay);
    rep
}

/// Amplitude and disk minimum of one disk of a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub radius: f64,
    pub mu: f64,
    pub sup_rho: f64,
}

impl From<&BallSolution> for BallSummary {
    fn from(b: &BallSolution) -> Self {
        BallSummary {
            radius: b.radius,
            mu: b.mu,
            sup_rho: b.profile.sup(),
        }
    }
}

/// Limits of the vanishing signature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingThresholds {
    /// Final over initial peak amplitude must fall below this.
    pub amplitude_ratio: f64,
    /// `|μ|` at the largest disk must fall below this.
    pub energy: f64,
}

impl Default for VanishingThresholds {
    fn default() -> Self {
        VanishingThresholds {
            amplitude_ratio: 0.1,
            energy: 1e-3,
        }
    }
}

/// Vanishing signature with the default thresholds.
pub fn detect_vanishing(series: &[BallSummary]) -> Result<bool> {
    detect_vanishing_with(series, &VanishingThresholds::default())
}

/// True when the peak amplitude decreases strictly along the radii, ends
/// below `amplitude_ratio` times its first value, and `|μ|` at the last
/// radius is below `energy`.
pub fn detect_vanishing_with(series: &[BallSummary], th: &VanishingThresholds) -> Result<bool> {
    if series.len() < 3 {
        return Err(Error::invalid(format!(
            "vanishing needs at least three disks, got {}",
            series.len()
        )));
    }
    let decreasing = series.windows(2).all(|w| w[1].sup_rho < w[0].sup_rho);
    let first = series[0].sup_rho;
    let last = series[series.len() - 1];
    let ratio = last.sup_rho / first;
    log::debug!(
        "vanishing: decreasing = {decreasing}, ratio = {ratio:.4}, final |μ| = {:.3e}",
        last.mu.abs()
    );
    Ok(decreasing && ratio < th.amplitude_ratio && last.mu.abs() < th.energy)
}

/// `count` points spaced logarithmically over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = (count.max(2) - 1) as f64;
    (0..count).map(|i| (a + (b - a) * i as f64 / last).exp()).collect()
}

/// The default sample set: 10⁴ points over `[1e-8, 1e6]`.
pub fn default_samples() -> Vec<f64> {
    log_grid(1e-8, 1e6, 10_000)
}

/// Checks `h(s) < ½`, `h` decreasing, `sup h → ½` (when some `s ≤ 1e-6`),
/// `F ≥ 0`, `F > 0` off the origin, `F(0) = 0` (when sampled) and `F`
/// increasing.
pub fn inequality_suite(samples: &[f64]) -> Result<DiagnosticsReport> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    if let Some(s) = samples.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::invalid(format!("sample {s} is not a finite nonnegative number")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let positive: Vec<f64> = sorted.iter().copied().filter(|&s| s > 0.0).collect();
    let mut rep = DiagnosticsReport::new();

    if !positive.is_empty() {
        let h: Vec<f64> = positive.iter().map(|&s| h_ratio(s)).collect::<Result<_>>()?;
        let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rep.below("h_below_half", h_max, 0.5);
        let max_step = h
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        if h.len() > 1 {
            rep.below("h_decreasing", max_step, 0.0);
        }
        if positive[0] <= 1e-6 {
            rep.at_most("h_sup_half", 0.5 - h_max, 1e-6);
        }
    }

    let f: Vec<f64> = sorted.iter().map(|&s| f_aux(s)).collect::<Result<_>>()?;
    let f_min = f.iter().copied().fold(f64::INFINITY, f64::min);
    rep.at_most("f_aux_nonnegative", -f_min, 0.0);
    if sorted[0] == 0.0 {
        rep.at_most("f_aux_zero_at_origin", f[0].abs(), 1e-14);
    }
    let off_zero: Vec<f64> = sorted
        .iter()
        .zip(&f)
        .filter(|&(&s, _)| s > 0.0)
        .map(|(_, &v)| v)
        .collect();
    if !off_zero.is_empty() {
        let min_pos = off_zero.iter().copied().fold(f64::INFINITY, f64::min);
        rep.above("f_aux_positive", min_pos, 0.0);
    }
    if off_zero.len() > 1 {
        let min_step = off_zero
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        rep.above("f_aux_increasing", min_step, 0.0);
    }
    Ok(rep)
}

/// Phases used by [`polar_suite`].
pub const POLAR_PHASES: [f64; 4] = [0.0, 0.7, std::f64::consts::FRAC_PI_4, 2.0];

/// Largest relative deviation of the pair energy over [`POLAR_PHASES`] from
/// its value at `φ = 0`, for each profile.
pub fn polar_suite(profiles: &[RadialProfile], gamma: f64) -> Result<DiagnosticsReport> {
    if profiles.is_empty() {
        return Err(Error::invalid("no profiles for the polar check"));
    }
    let mut worst = 0.0f64;
    for p in profiles {
        let base = polar_energy(p, 0.0, gamma);
        for &phi in &POLAR_PHASES[1..] {
            let e = polar_energy(p, phi, gamma);
            worst = worst.max((e - base).abs() / base.abs().max(f64::MIN_POSITIVE));
        }
    }
    let mut rep = DiagnosticsReport::new();
    rep.at_most("polar_invariance", worst, 1e-12);
    Ok(rep)
}

/// Five smooth unit-power profiles of different shapes on a disk of radius 10.
pub fn polar_test_profiles() -> Result<Vec<RadialProfile>> {
    let grid = crate::radial::RadialGrid::new(10.0, 1024)?;
    let shapes: [fn(f64) -> f64; 5] = [
        |r| (-0.5 * r * r).exp(),
        |r| (-r * r / 4.5).exp() * (1.0 + 0.3 * r * r),
        |r| 1.0 / (1.5 * r).cosh(),
        |r| (1.0 + r * r).powi(-3),
        |r| (-r).exp() * (1.0 + r),
    ];
    shapes
        .iter()
        .map(|f| RadialProfile::from_fn(grid, |r| 2.0 * f(r))?.normalized())
        .collect()
}
