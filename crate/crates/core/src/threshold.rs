//! The existence threshold `T₀`.
//!
//! `T₀` is reported as the mass `‖Q‖²` of the Townes profile
//! (`ΔQ − Q + Q³ = 0`), which is the small-amplitude limit of the
//! kinetic/potential quotient. A decreasing sequence of quotients of the
//! dilated trials `w_δ(r) = δ w(δr)` certifies the value from above.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{power, rayleigh_quotient};
use crate::radial::{integrate_radial_with, laplacian_into, solve_tridiagonal, RadialGrid, RadialProfile};
use crate::shooting::{assemble, bisect, march, Bracket};

/// Amplitude interval searched for the Townes profile.
pub const TOWNES_BRACKET: (f64, f64) = (1.0, 4.0);

fn townes_source(q: f64) -> f64 {
    q - q * q * q
}

/// Relative residual `‖ΔQ − Q + Q³‖ / ‖Q‖` over the non-boundary nodes.
pub fn townes_residual(q: &RadialProfile) -> f64 {
    let grid = q.grid();
    let v = q.values();
    let mut lap = vec![0.0; v.len()];
    laplacian_into(grid, v, &mut lap);
    let n = grid.intervals();
    let num = integrate_radial_with(grid, |j| {
        if j == n {
            0.0
        } else {
            let r = lap[j] - townes_source(v[j]);
            r * r
        }
    });
    let den = power(q);
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Townes profile on `grid` by amplitude bisection in `[1, 4]`, a linear
/// decaying tail, and Newton polishing of the discrete boundary-value
/// problem. Returns the profile and its mass `∫ Q²`.
pub fn townes_profile(grid: &RadialGrid, tol: f64) -> Result<(RadialProfile, f64)> {
    if !(tol > 1e-12 && tol < 1e-4) {
        return Err(Error::invalid(format!("tolerance must lie in (1e-12, 1e-4), got {tol}")));
    }
    let (lo, hi) = TOWNES_BRACKET;
    let mut buf = Vec::with_capacity(grid.len());
    let lo_shot = march(grid, lo, &townes_source, &mut buf);
    let hi_shot = march(grid, hi, &townes_source, &mut buf);
    if !matches!(hi_shot, crate::shooting::Shot::Crossed(_))
        || matches!(lo_shot, crate::shooting::Shot::Crossed(_))
    {
        return Err(Error::NumericalFailure(format!(
            "Townes amplitude not bracketed by [{lo}, {hi}] (low: {lo_shot:?}, high: {hi_shot:?})"
        )));
    }
    let bracket = bisect(grid, Bracket { lo, hi }, tol, &townes_source);
    let mut q = assemble(grid, bracket, 1.0, 1e-6, &townes_source)?;
    newton_polish(grid, &mut q, tol)?;
    if let Some(j) = (0..grid.intervals()).find(|&j| !(q[j] > q[j + 1] && q[j] > 0.0)) {
        return Err(Error::NumericalFailure(format!(
            "Townes profile lost monotonicity at node {j}"
        )));
    }
    let profile = RadialProfile::new(*grid, q)?;
    let mass = power(&profile);
    log::debug!("Townes profile: Q(0) = {:.10}, mass = {:.10}", profile.values()[0], mass);
    Ok((profile, mass))
}

/// Newton iterations on `Δ_h q − q + q³ = 0` with `q(R) = 0`.
fn newton_polish(grid: &RadialGrid, q: &mut [f64], tol: f64) -> Result<()> {
    let n = grid.intervals();
    let inv_dr2 = 1.0 / grid.spacing().powi(2);
    let mut lap = vec![0.0; n + 1];
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for iter in 0..30 {
        laplacian_into(grid, q, &mut lap);
        for j in 0..n {
            rhs[j] = -(lap[j] - townes_source(q[j]));
            let react = -1.0 + 3.0 * q[j] * q[j];
            if j == 0 {
                diag[0] = -4.0 * inv_dr2 + react;
                upper[0] = 4.0 * inv_dr2;
            } else {
                let h = 0.5 / j as f64;
                lower[j] = (1.0 - h) * inv_dr2;
                diag[j] = -2.0 * inv_dr2 + react;
                upper[j] = (1.0 + h) * inv_dr2;
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
        let mut step = 0.0f64;
        for j in 0..n {
            q[j] += rhs[j];
            step = step.max(rhs[j].abs());
        }
        log::trace!("Townes Newton iteration {iter}: |δq| = {step:.3e}");
        if step <= tol * q[0] || step < 1e-14 {
            return Ok(());
        }
    }
    Err(Error::not_converged(30, "Newton polishing of the Townes profile stalled"))
}

/// `π^{−1/2} e^{−r²/2}` sampled on `grid` and normalized to unit power there.
pub fn unit_gaussian(grid: &RadialGrid) -> Result<RadialProfile> {
    let c = std::f64::consts::PI.sqrt().recip();
    RadialProfile::from_fn(*grid, |r| c * (-0.5 * r * r).exp())?.normalized()
}

/// Dilation `w_δ(r) = δ w(δr)` realized exactly on the stretched grid of
/// radius `R/δ` with the same number of intervals.
pub fn dilate(w: &RadialProfile, delta: f64) -> Result<RadialProfile> {
    let grid = RadialGrid::new(w.grid().radius() / delta, w.grid().intervals())?;
    RadialProfile::new(grid, w.values().iter().map(|v| v * delta).collect())
}

/// Quotients `Q[w_δ]` for each scale. They decrease toward
/// `∫|∇w|² / (½ ∫ w⁴)` as `δ → 0`.
pub fn upper_bound_sequence(w: &RadialProfile, deltas: &[f64], max_radius: f64) -> Result<Vec<(f64, f64)>> {
    let p = power(w);
    if (p - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("trial profile must have unit power, got {p}")));
    }
    for &d in deltas {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::invalid(format!("scale {d} outside (0, 1]")));
        }
        let needed = w.grid().radius() / d;
        if needed > max_radius {
            return Err(Error::Resource(format!(
                "scale {d} needs radius {needed}, above the limit {max_radius}"
            )));
        }
    }
    deltas
        .par_iter()
        .map(|&d| {
            let wd = dilate(w, d)?;
            let wd = if (power(&wd) - 1.0).abs() > 1e-10 { wd.normalized()? } else { wd };
            Ok((d, rayleigh_quotient(&wd)?))
        })
        .collect()
}

/// Parameters of [`estimate_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub tol: f64,
    pub townes_radius: f64,
    pub townes_intervals: usize,
    pub trial_radius: f64,
    pub trial_intervals: usize,
    pub deltas: Vec<f64>,
    pub max_radius: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            tol: 1e-10,
            townes_radius: 12.0,
            townes_intervals: 1024,
            trial_radius: 10.0,
            trial_intervals: 1024,
            deltas: (0..6).map(|k| 0.5f64.powi(k)).collect(),
            max_radius: 1.0e4,
        }
    }
}

/// Threshold estimate with its upper-bound certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub townes_mass: f64,
    #[serde(rename = "T0_estimate")]
    pub t0_estimate: f64,
    pub upper_bounds: Vec<(f64, f64)>,
    pub bracket_width: f64,
}

impl ThresholdEstimate {
    /// Builds the estimate from a Townes mass and an upper-bound sequence.
    pub fn from_parts(townes_mass: f64, upper_bounds: Vec<(f64, f64)>) -> Result<Self> {
        let best = upper_bounds
            .iter()
            .map(|&(_, q)| q)
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Err(Error::invalid("the upper-bound sequence is empty"));
        }
        Ok(ThresholdEstimate {
            townes_mass,
            t0_estimate: townes_mass,
            upper_bounds,
            bracket_width: best - townes_mass,
        })
    }
}

/// Townes mass plus the Gaussian upper-bound sequence.
pub fn estimate_threshold(cfg: &ThresholdConfig) -> Result<ThresholdEstimate> {
    let grid = RadialGrid::new(cfg.townes_radius, cfg.townes_intervals)?;
    let (_, mass) = townes_profile(&grid, cfg.tol)?;
    let trial = unit_gaussian(&RadialGrid::new(cfg.trial_radius, cfg.trial_intervals)?)?;
    let bounds = upper_bound_sequence(&trial, &cfg.deltas, cfg.max_radius)?;
    if let Some(&(d, q)) = bounds.iter().find(|&&(_, q)| q <= mass) {
        return Err(Error::NumericalFailure(format!(
            "trial quotient {q} at scale {d} does not exceed the Townes mass {mass}"
        )));
    }
    ThresholdEstimate::from_parts(mass, bounds)
}

/// Existence regime of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    NoGroundState,
    GroundStateExists,
    Marginal,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::NoGroundState => "NoGroundState",
            Classification::GroundStateExists => "GroundStateExists",
            Classification::Marginal => "Marginal",
        })
    }
}

/// Nonnegative couplings never admit a ground state. Otherwise couplings
/// within `bracket_width` of `−T₀` are marginal, and the rest are decided
/// by the side of `−T₀` they fall on.
pub fn classify_gamma(gamma: f64, est: &ThresholdEstimate) -> Classification {
    if gamma >= 0.0 {
        Classification::NoGroundState
    } else if (gamma + est.t0_estimate).abs() <= est.bracket_width {
        Classification::Marginal
    } else if gamma < -est.t0_estimate {
        Classification::GroundStateExists
    } else {
        Classification::NoGroundState
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Frozen from an independent Newton solve of the same discrete problem.
    const ORACLE_AMPLITUDE: f64 = 2.206_262_133_5;
    const ORACLE_MASS: f64 = 11.700_072_981_4;

    #[test]
    fn townes_matches_the_newton_oracle() {
        let grid = RadialGrid::new(12.0, 1024).unwrap();
        let (q, mass) = townes_profile(&grid, 1e-10).unwrap();
        assert!((q.values()[0] - ORACLE_AMPLITUDE).abs() < 1e-8, "{}", q.values()[0]);
        assert!((mass - ORACLE_MASS).abs() < 1e-7, "{mass}");
        assert!((mass - 11.7008).abs() < 2e-3);
        assert!(townes_residual(&q) < 1e-6);
        let v = q.values();
        assert!(v.windows(2).take(1023).all(|p| p[0] > p[1] && p[1] > 0.0));
    }

    #[test]
    fn townes_rejects_bad_tolerance() {
        let grid = RadialGrid::new(12.0, 256).unwrap();
        assert!(townes_profile(&grid, 1e-3).is_err());
        assert!(townes_profile(&grid, 1e-13).is_err());
    }

    #[test]
    fn townes_bracket_failure_is_reported() {
        // On a tiny disk even Q(0) = 4 fails to cross zero before R.
        let grid = RadialGrid::new(0.3, 16).unwrap();
        let err = townes_profile(&grid, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)), "{err}");
    }

    #[test]
    fn gaussian_upper_bounds() {
        let w = unit_gaussian(&RadialGrid::new(10.0, 1024).unwrap()).unwrap();
        let deltas = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];
        let ub = upper_bound_sequence(&w, &deltas, 1e4).unwrap();
        let oracle = [
            14.285_829_003_5,
            13.006_587_466_8,
            12.677_021_773_3,
            12.593_931_950_3,
            12.573_114_199_7,
            12.567_906_904_2,
        ];
        for ((d, q), (&d0, &o)) in ub.iter().zip(deltas.iter().zip(&oracle)) {
            assert_eq!(*d, d0);
            assert!((q - o).abs() < 1e-8, "δ = {d}: {q} vs {o}");
        }
        assert!(ub.windows(2).all(|p| p[1].1 < p[0].1));
        assert!((ub[4].1 - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
        assert_eq!(ub[0].1, rayleigh_quotient(&w).unwrap());
    }

    #[test]
    fn dilation_preserves_power_and_scales_kinetic() {
        let w = unit_gaussian(&RadialGrid::new(8.0, 256).unwrap()).unwrap();
        let wd = dilate(&w, 0.3).unwrap();
        assert!((power(&wd) - 1.0).abs() < 1e-12);
        let k = crate::functionals::kinetic(&w);
        assert!((crate::functionals::kinetic(&wd) - 0.09 * k).abs() < 1e-12 * k);
    }

    #[test]
    fn upper_bounds_validate_arguments() {
        let w = unit_gaussian(&RadialGrid::new(10.0, 256).unwrap()).unwrap();
        assert!(matches!(
            upper_bound_sequence(&w, &[0.001], 100.0),
            Err(Error::Resource(_))
        ));
        assert!(upper_bound_sequence(&w, &[1.5], 100.0).is_err());
        assert!(upper_bound_sequence(&w, &[0.0], 100.0).is_err());
        assert!(upper_bound_sequence(&w.scaled(2.0), &[1.0], 100.0).is_err());
    }

    #[test]
    fn townes_trial_approaches_the_mass() {
        let grid = RadialGrid::new(12.0, 1024).unwrap();
        let (q, mass) = townes_profile(&grid, 1e-10).unwrap();
        let ub = upper_bound_sequence(&q.normalized().unwrap(), &[1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125], 1e4).unwrap();
        assert!(ub.windows(2).all(|p| p[1].1 < p[0].1));
        assert!(ub.iter().all(|&(_, v)| v > mass));
        assert!(ub[5].1 - mass < 5e-3, "{ub:?}");
    }

    fn estimate() -> ThresholdEstimate {
        ThresholdEstimate::from_parts(11.7, vec![(1.0, 14.29), (0.03125, 12.568)]).unwrap()
    }

    #[test]
    fn classification_regimes() {
        let est = estimate();
        assert_eq!(classify_gamma(-5.0, &est), Classification::NoGroundState);
        assert_eq!(classify_gamma(0.0, &est), Classification::NoGroundState);
        assert_eq!(classify_gamma(3.0, &est), Classification::NoGroundState);
        assert_eq!(classify_gamma(-30.0, &est), Classification::GroundStateExists);
        assert_eq!(classify_gamma(-15.0, &est), Classification::GroundStateExists);
        assert_eq!(classify_gamma(-11.7, &est), Classification::Marginal);
        assert_eq!(classify_gamma(-12.3, &est), Classification::Marginal);
    }

    #[test]
    fn estimate_serializes_with_expected_keys() {
        let json = serde_json::to_value(estimate()).unwrap();
        assert_eq!(json["T0_estimate"], 11.7);
        assert_eq!(json["townes_mass"], 11.7);
        assert_eq!(json["upper_bounds"][1][0], 0.03125);
        assert!(json["bracket_width"].as_f64().unwrap() > 0.86);
        let back: ThresholdEstimate = serde_json::from_value(json).unwrap();
        assert_eq!(back, estimate());
    }
}
