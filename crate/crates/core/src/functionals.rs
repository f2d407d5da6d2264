//! Scalar functionals of radial profiles and the pointwise auxiliary
//! functions they are built from.
//!
//! The energy is the stationary pair energy restricted to a common modulus,
//! `H[ρ] = ∫ |∇ρ|² + Γ [ρ² − ln(1 + ρ²)]`, with no factor ½ in front of either
//! term. Two multipliers follow from a solution of the Euler–Lagrange
//! equation: pairing with `ρ` gives
//! `λ = −∫|∇ρ|² − Γ ∫ ρ⁴/(1+ρ²)`, and pairing with the dilation field
//! `x·∇ρ` gives `λ = −Γ ∫ [ρ² − ln(1+ρ²)]`. Their disagreement measures
//! how far a profile is from a genuine solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{gradient_norm_sq, gradient_norm_sq_slice, integrate_radial_with, RadialProfile};

const SERIES_CUTOFF: f64 = 1e-4;

/// `G(s) = s − ln(1 + s)` for `s ≥ 0`.
pub fn g_sat(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("g_sat needs s >= 0, got {s}")));
    }
    Ok(g_sat_unchecked(s))
}

#[inline]
pub(crate) fn g_sat_unchecked(s: f64) -> f64 {
    if s < SERIES_CUTOFF {
        s * s * (0.5 - s * (1.0 / 3.0 - s * (0.25 - s * 0.2)))
    } else {
        s - s.ln_1p()
    }
}

/// `h(s) = (s − ln(1 + s)) / s²` for `s > 0`; decreases from ½ at the origin.
pub fn h_ratio(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("h_ratio needs s > 0, got {s}")));
    }
    if s < SERIES_CUTOFF {
        Ok(0.5 - s * (1.0 / 3.0 - s * (0.25 - s * 0.2)))
    } else {
        Ok((s - s.ln_1p()) / (s * s))
    }
}

/// `F(s) = 2[s − ln(1 + s)] − s²/(1 + s)`, nonnegative and increasing with
/// `F'(s) = s²/(1+s)²`.
pub fn f_aux(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("f_aux needs s >= 0, got {s}")));
    }
    if s < SERIES_CUTOFF {
        // ∫ t²(1 − 2t + 3t² − 4t³) dt
        Ok(s * s * s * (1.0 / 3.0 - s * (0.5 - s * (0.6 - s * (2.0 / 3.0)))))
    } else {
        Ok(2.0 * (s - s.ln_1p()) - s * s / (1.0 + s))
    }
}

/// Kinetic term `∫ |∇ρ|²`.
pub fn kinetic(rho: &RadialProfile) -> f64 {
    gradient_norm_sq(rho)
}

/// Saturable potential `∫ [ρ² − ln(1 + ρ²)]`; never negative.
pub fn potential(rho: &RadialProfile) -> f64 {
    let v = rho.values();
    integrate_radial_with(rho.grid(), |j| g_sat_unchecked(v[j] * v[j]))
}

/// `∫ ρ⁴/(1 + ρ²)`.
pub fn saturated_quartic(rho: &RadialProfile) -> f64 {
    let v = rho.values();
    integrate_radial_with(rho.grid(), |j| {
        let s = v[j] * v[j];
        s * s / (1.0 + s)
    })
}

/// Power `P[ρ] = ∫ ρ²`.
pub fn power(rho: &RadialProfile) -> f64 {
    let v = rho.values();
    integrate_radial_with(rho.grid(), |j| v[j] * v[j])
}

/// `∫ ρ⁴`.
pub fn quartic(rho: &RadialProfile) -> f64 {
    let v = rho.values();
    integrate_radial_with(rho.grid(), |j| v[j].powi(4))
}

/// Energy `H[ρ] = ∫ |∇ρ|² + Γ ∫ [ρ² − ln(1 + ρ²)]`.
pub fn energy(rho: &RadialProfile, gamma: f64) -> f64 {
    kinetic(rho) + gamma * potential(rho)
}

/// Quotient `∫|∇w|² / ∫[w² − ln(1 + w²)]` whose infimum over unit-power
/// profiles is the existence threshold.
pub fn rayleigh_quotient(w: &RadialProfile) -> Result<f64> {
    let p = power(w);
    if p == 0.0 {
        return Err(Error::invalid("Rayleigh quotient of the zero profile"));
    }
    if (p - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("trial profile must have unit power, got {p}")));
    }
    let pot = potential(w);
    if !(pot > 0.0) {
        return Err(Error::NumericalFailure(
            "saturable potential underflowed to zero".into(),
        ));
    }
    Ok(kinetic(w) / pot)
}

/// Multiplier from pairing the Euler–Lagrange equation with `ρ`:
/// `λ = −∫|∇ρ|² − Γ ∫ ρ⁴/(1+ρ²)`. Requires unit power to 1e-6.
pub fn lagrange_multiplier(rho: &RadialProfile, gamma: f64) -> Result<f64> {
    let p = power(rho);
    if (p - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("profile must have unit power, got {p}")));
    }
    Ok(multiplier_by_pairing(rho, gamma))
}

pub(crate) fn multiplier_by_pairing(rho: &RadialProfile, gamma: f64) -> f64 {
    -kinetic(rho) - gamma * saturated_quartic(rho)
}

/// Multiplier from the dilation (Pohozaev) identity: `λ = −Γ ∫[ρ² − ln(1+ρ²)]`.
pub fn pohozaev_multiplier(rho: &RadialProfile, gamma: f64) -> f64 {
    -gamma * potential(rho)
}

/// Relative defect `|λ + Γ ∫[ρ² − ln(1+ρ²)]| / max(|λ|, 1e-12)` of the
/// dilation identity.
pub fn pohozaev_residual(rho: &RadialProfile, gamma: f64, lambda: f64) -> f64 {
    (lambda + gamma * potential(rho)).abs() / lambda.abs().max(1e-12)
}

/// Pair energy `E[u, v]` evaluated from the fields `u = ρ cos φ`,
/// `v = ρ sin φ` for a constant phase `φ`.
pub fn polar_energy(rho: &RadialProfile, phi: f64, gamma: f64) -> f64 {
    let grid = rho.grid();
    let (s, c) = phi.sin_cos();
    let u: Vec<f64> = rho.values().iter().map(|r| r * c).collect();
    let v: Vec<f64> = rho.values().iter().map(|r| r * s).collect();
    let kinetic = gradient_norm_sq_slice(grid, &u) + gradient_norm_sq_slice(grid, &v);
    let potential = integrate_radial_with(grid, |j| g_sat_unchecked(u[j] * u[j] + v[j] * v[j]));
    kinetic + gamma * potential
}

/// Every functional of a unit-power profile at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    #[serde(rename = "energy_H")]
    pub energy: f64,
    #[serde(rename = "power_P")]
    pub power: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub lambda_pz2: f64,
    pub lambda_pz1: f64,
    pub pohozaev_residual: f64,
}

impl FunctionalReport {
    pub fn evaluate(rho: &RadialProfile, gamma: f64) -> Result<Self> {
        let lambda_pz2 = lagrange_multiplier(rho, gamma)?;
        let kin = kinetic(rho);
        let pot = potential(rho);
        Ok(FunctionalReport {
            energy: kin + gamma * pot,
            power: power(rho),
            kinetic: kin,
            potential: pot,
            lambda_pz2,
            lambda_pz1: -gamma * pot,
            pohozaev_residual: pohozaev_residual(rho, gamma, lambda_pz2),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn unit_gaussian(r: f64, n: usize) -> RadialProfile {
        let g = RadialGrid::new(r, n).unwrap();
        RadialProfile::from_fn(g, |r| (-0.5 * r * r).exp() / PI.sqrt()).unwrap()
    }

    #[test]
    fn g_sat_values() {
        assert_eq!(g_sat(0.0).unwrap(), 0.0);
        assert!((g_sat(1.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        // s²/2 − s³/3 at s = 1e-8 is 5e-17 − 3.3e-25.
        let small = g_sat(1e-8).unwrap();
        assert!((small - 4.999_999_966_666_667e-17).abs() < 1e-31);
        assert!(g_sat(-1e-3).is_err());
        assert!(g_sat(f64::NAN).is_err());
    }

    #[test]
    fn series_branch_is_continuous_at_the_cutoff() {
        let below = g_sat(SERIES_CUTOFF * (1.0 - 1e-12)).unwrap();
        let above = g_sat(SERIES_CUTOFF).unwrap();
        assert!(((above - below) / above).abs() < 1e-10);
        let below = f_aux(SERIES_CUTOFF * (1.0 - 1e-12)).unwrap();
        let above = f_aux(SERIES_CUTOFF).unwrap();
        assert!(((above - below) / above).abs() < 1e-6);
    }

    #[test]
    fn h_ratio_values() {
        assert!((h_ratio(1e-9).unwrap() - 0.5).abs() < 1e-9);
        assert!((h_ratio(1.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        let (a, b, c) = (h_ratio(0.5).unwrap(), h_ratio(1.0).unwrap(), h_ratio(2.0).unwrap());
        assert!(a > b && b > c);
        assert!(h_ratio(0.0).is_err());
        assert!(h_ratio(-2.0).is_err());
    }

    #[test]
    fn f_aux_values() {
        assert_eq!(f_aux(0.0).unwrap(), 0.0);
        let expected = 2.0 * (1.0 - 2f64.ln()) - 0.5;
        assert!((f_aux(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((f_aux(1.0).unwrap() - 0.113706).abs() < 1e-6);
        assert!(f_aux(2.0).unwrap() > f_aux(1.0).unwrap());
        assert!(f_aux(1.0).unwrap() > f_aux(0.5).unwrap());
        assert!(f_aux(-1.0).is_err());
    }

    #[test]
    fn zero_profile_functionals() {
        let z = RadialProfile::zeros(RadialGrid::new(4.0, 64).unwrap());
        assert_eq!(energy(&z, -3.0), 0.0);
        assert_eq!(power(&z), 0.0);
        assert_eq!(pohozaev_residual(&z, -3.0, 0.0), 0.0);
        assert!(rayleigh_quotient(&z).is_err());
    }

    #[test]
    fn gaussian_energy_and_power() {
        let g = unit_gaussian(10.0, 1024);
        let dr = g.grid().spacing();
        assert!((power(&g) - 1.0).abs() < 0.1 * dr * dr);
        assert!((energy(&g, 0.0) - 1.0).abs() < 0.1 * dr * dr);
        let w = g.normalized().unwrap();
        assert!(energy(&w, -30.0) >= -30.0);
    }

    #[test]
    fn unnormalized_inputs_are_rejected() {
        let g = unit_gaussian(10.0, 256).scaled(1.1);
        assert!(rayleigh_quotient(&g).is_err());
        assert!(lagrange_multiplier(&g, -30.0).is_err());
    }

    #[test]
    fn gaussian_multipliers_and_quotient() {
        // Frozen by evaluating the same quadrature in an independent script:
        // R = 10, n = 1024, normalized on the grid.
        let w = unit_gaussian(10.0, 1024).normalized().unwrap();
        let q = rayleigh_quotient(&w).unwrap();
        assert!(q > 4.0 * PI && q < 20.0, "Q = {q}");
        assert!((q - 14.285_829_004).abs() < 1e-6, "Q = {q}");
        let lambda0 = lagrange_multiplier(&w, 0.0).unwrap();
        assert!((lambda0 + kinetic(&w)).abs() < 1e-15);
        let lambda = lagrange_multiplier(&w, -30.0).unwrap();
        assert!((lambda - 2.954_592_335).abs() < 1e-6, "λ = {lambda}");
        let res = pohozaev_residual(&w, -30.0, lambda);
        assert!((res - 0.289_259_051_56).abs() < 1e-8, "residual {res}");
    }

    #[test]
    fn polar_energy_is_phase_independent() {
        let w = unit_gaussian(10.0, 512).normalized().unwrap();
        let h = energy(&w, -17.0);
        assert_eq!(polar_energy(&w, 0.0, -17.0), h);
        for phi in [0.7, FRAC_PI_4, 1.234, 2.0] {
            let e = polar_energy(&w, phi, -17.0);
            assert!(((e - h) / h).abs() < 1e-12, "φ = {phi}: {e} vs {h}");
        }
    }

    #[test]
    fn report_serializes_with_exact_keys() {
        let w = unit_gaussian(10.0, 256).normalized().unwrap();
        let rep = FunctionalReport::evaluate(&w, -30.0).unwrap();
        assert!((rep.energy - (rep.kinetic - 30.0 * rep.potential)).abs() <= 1e-12 * rep.energy.abs());
        let json = serde_json::to_value(rep).unwrap();
        let obj = json.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "energy_H",
                "kinetic",
                "lambda_pz1",
                "lambda_pz2",
                "pohozaev_residual",
                "potential",
                "power_P"
            ]
        );
    }
}
