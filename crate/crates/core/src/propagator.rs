//! Forward-beam propagation `i F_z + ΔF − Γ |F|²/(1+|F|²) F = 0` on a
//! periodic square by Strang splitting, plus the relaxation law
//! `∂_t E₀ + E₀ = −I₀/(1+I₀)` of the space-charge field.
//!
//! A stationary beam `F = e^{iλz} ρ(|x|)` keeps its modulus and turns its
//! phase at rate `λ`; [`stationarity_report`] checks both.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::radial::RadialProfile;

/// Largest admissible `|F|` on the outer frame `max(|x₁|,|x₂|) ≥ 0.9 L`.
pub const BOUNDARY_TOL: f64 = 1e-8;

const SNAPSHOT_MAGIC: &[u8; 4] = b"SATF";

/// Complex field on the periodic grid `x = −L + i·(2L/m)`, `i = 0..m`,
/// stored row-major (`x₁` slow, `x₂` fast).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    half_width: f64,
    m: usize,
    values: Vec<Complex64>,
}

impl Field2D {
    pub fn new(half_width: f64, m: usize, values: Vec<Complex64>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("box half-width must be positive, got {half_width}")));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::invalid(format!("samples per axis must be a power of two ≥ 4, got {m}")));
        }
        if values.len() != m * m {
            return Err(Error::invalid(format!("expected {} samples, got {}", m * m, values.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NumericalFailure("field holds non-finite values".into()));
        }
        Ok(Field2D { half_width, m, values })
    }

    /// Samples `f(x₁, x₂)` on the grid.
    pub fn from_fn(half_width: f64, m: usize, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let h = 2.0 * half_width / m as f64;
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                values.push(f(-half_width + i as f64 * h, -half_width + j as f64 * h));
            }
        }
        Self::new(half_width, m, values)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.m as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Value at the origin, which is the node `(m/2, m/2)`.
    pub fn center(&self) -> Complex64 {
        self.values[(self.m / 2) * self.m + self.m / 2]
    }

    /// `Σ |F|² h²`.
    pub fn power(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }

    /// Largest modulus on the outer frame of the box.
    pub fn boundary_amplitude(&self) -> f64 {
        let limit = 0.9 * self.half_width;
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let xi = self.coordinate(i).abs();
            for j in 0..self.m {
                if xi >= limit || self.coordinate(j).abs() >= limit {
                    worst = worst.max(self.values[i * self.m + j].norm());
                }
            }
        }
        worst
    }

    /// Largest difference between grid points related by the symmetries of
    /// the square (transpose and reflections).
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.m;
        let at = |i: usize, j: usize| self.values[i * m + j];
        let mut worst = 0.0f64;
        for i in 0..m {
            let ri = (m - i) % m;
            for j in 0..m {
                let rj = (m - j) % m;
                let v = at(i, j);
                worst = worst
                    .max((v - at(j, i)).norm())
                    .max((v - at(ri, j)).norm())
                    .max((v - at(i, rj)).norm());
            }
        }
        worst
    }

    /// Writes the flat binary snapshot: `"SATF"`, `u32 m`, `u32` reserved,
    /// `u32` padding, then `m²` little-endian `(re, im)` pairs, row-major.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let m = u32::try_from(self.m).map_err(|_| Error::invalid("grid too large for a snapshot"))?;
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&m.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    /// Reads a snapshot; the box size is not stored and must be supplied.
    pub fn read_snapshot<R: Read>(mut input: R, half_width: f64) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Parse("snapshot magic is not SATF".into()));
        }
        let m = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        if body.len() != 16 * m * m {
            return Err(Error::Parse(format!(
                "snapshot body has {} bytes, expected {}",
                body.len(),
                16 * m * m
            )));
        }
        let values = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Self::new(half_width, m, values)
    }
}

/// Places `ρ(|x|)` on the square by cubic interpolation in `r`.
pub fn embed_profile(profile: &RadialProfile, half_width: f64, m: usize) -> Result<Field2D> {
    Field2D::from_fn(half_width, m, |x, y| {
        Complex64::new(profile.sample((x * x + y * y).sqrt()), 0.0)
    })
}

/// Per-step record of a propagation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationTrace {
    pub initial_power: f64,
    pub z: Vec<f64>,
    pub power: Vec<f64>,
    /// Unwrapped `arg F(0)`.
    pub center_phase: Vec<f64>,
    /// `max |(|F| − |F₀|)| / max |F₀|`.
    pub profile_error: Vec<f64>,
}

impl PropagationTrace {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Least-squares slope of the center phase against `z`.
    pub fn phase_slope(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::invalid("phase slope needs at least two samples"));
        }
        let n = self.len() as f64;
        let mz = self.z.iter().sum::<f64>() / n;
        let mp = self.center_phase.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (z, p) in self.z.iter().zip(&self.center_phase) {
            sxy += (z - mz) * (p - mp);
            sxx += (z - mz) * (z - mz);
        }
        Ok(sxy / sxx)
    }

    pub fn max_profile_error(&self) -> f64 {
        self.profile_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_power_drift(&self) -> f64 {
        self.power
            .iter()
            .map(|p| (p - self.initial_power).abs() / self.initial_power)
            .fold(0.0, f64::max)
    }

    /// Writes `z,power,center_phase,profile_error` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "z,power,center_phase,profile_error")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.z[k], self.power[k], self.center_phase[k], self.profile_error[k]
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Stepper {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
    half_linear: Vec<Complex64>,
    nonlinear_rate: f64,
}

impl Stepper {
    fn new(half_width: f64, m: usize, gamma: f64, dz: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let dk = PI / half_width;
        let wave = |i: usize| {
            let k = if i < m / 2 { i as f64 } else { i as f64 - m as f64 };
            k * dk
        };
        let norm = 1.0 / (m * m) as f64;
        let mut half_linear = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let k2 = wave(i).powi(2) + wave(j).powi(2);
                half_linear.push(Complex64::from_polar(1.0, -0.5 * k2 * dz) * norm);
            }
        }
        Stepper {
            m,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            tmp: vec![Complex64::default(); m * m],
            half_linear,
            nonlinear_rate: gamma * dz,
        }
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
        for i in 0..m {
            for j in 0..m {
                dst[j * m + i] = src[i * m + j];
            }
        }
    }

    /// Half linear substep. The spectrum is held transposed between the two
    /// passes; the multiplier is symmetric so that is harmless.
    fn half_linear(&mut self, field: &mut [Complex64]) {
        let m = self.m;
        self.fwd.process_with_scratch(field, &mut self.scratch);
        Self::transpose(field, &mut self.tmp, m);
        self.fwd.process_with_scratch(&mut self.tmp, &mut self.scratch);
        for (v, k) in self.tmp.iter_mut().zip(&self.half_linear) {
            *v *= k;
        }
        self.inv.process_with_scratch(&mut self.tmp, &mut self.scratch);
        Self::transpose(&self.tmp, field, m);
        self.inv.process_with_scratch(field, &mut self.scratch);
    }

    fn nonlinear(&self, field: &mut [Complex64]) {
        for v in field.iter_mut() {
            let i = v.norm_sqr();
            *v *= Complex64::from_polar(1.0, -self.nonlinear_rate * i / (1.0 + i));
        }
    }

    fn step(&mut self, field: &mut [Complex64]) {
        self.half_linear(field);
        self.nonlinear(field);
        self.half_linear(field);
    }
}

fn check_resolution(f0: &Field2D) -> Result<()> {
    let edge = f0.boundary_amplitude();
    if edge >= BOUNDARY_TOL {
        return Err(Error::Domain(format!(
            "box too small: |F| reaches {edge:.3e} near the boundary (limit {BOUNDARY_TOL:.0e})"
        )));
    }
    Ok(())
}

/// Strang split-step evolution over `steps` steps of length `dz`, recording
/// power, center phase and profile deviation after every step.
pub fn split_step_evolve(f0: &Field2D, gamma: f64, dz: f64, steps: usize) -> Result<(PropagationTrace, Field2D)> {
    if !(dz > 0.0 && dz.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {dz}")));
    }
    if steps == 0 {
        return Err(Error::invalid("at least one step is required"));
    }
    check_resolution(f0)?;
    let m = f0.m;
    let mut stepper = Stepper::new(f0.half_width, m, gamma, dz);
    let mut field = f0.values.clone();
    let modulus0: Vec<f64> = field.iter().map(|v| v.norm()).collect();
    let peak0 = modulus0.iter().copied().fold(0.0, f64::max);
    if !(peak0 > 0.0) {
        return Err(Error::invalid("initial field is identically zero"));
    }
    let center = (m / 2) * m + m / 2;
    let mut phase = f0.values[center].arg();
    let mut trace = PropagationTrace {
        initial_power: f0.power(),
        ..Default::default()
    };
    let h2 = f0.spacing().powi(2);
    for k in 1..=steps {
        stepper.step(&mut field);
        let mut power = 0.0;
        let mut dev = 0.0f64;
        for (v, r0) in field.iter().zip(&modulus0) {
            let a = v.norm_sqr();
            power += a;
            dev = dev.max((a.sqrt() - r0).abs());
        }
        if !power.is_finite() {
            return Err(Error::NumericalFailure(format!("field became non-finite at step {k}")));
        }
        let arg = field[center].arg();
        phase += (arg - phase + PI).rem_euclid(2.0 * PI) - PI;
        trace.z.push(k as f64 * dz);
        trace.power.push(power * h2);
        trace.center_phase.push(phase);
        trace.profile_error.push(dev / peak0);
    }
    let out = Field2D::new(f0.half_width, m, field)?;
    Ok((trace, out))
}

/// Tolerances of [`stationarity_report`].
pub const PROFILE_ERROR_TOL: f64 = 1e-3;
pub const PHASE_SLOPE_TOL: f64 = 1e-2;
pub const POWER_DRIFT_TOL: f64 = 1e-10;

/// Checks that a run seeded with `gs` kept its modulus, turned its phase at
/// rate `λ`, and conserved power.
pub fn stationarity_report(gs: &GroundState, trace: &PropagationTrace) -> Result<DiagnosticsReport> {
    if trace.is_empty() {
        return Err(Error::invalid("empty propagation trace"));
    }
    let mut rep = DiagnosticsReport::new();
    rep.below("profile_error", trace.max_profile_error(), PROFILE_ERROR_TOL);
    let slope_error = match trace.phase_slope() {
        Ok(s) => (s - gs.lambda).abs() / gs.lambda.abs().max(1e-12),
        Err(_) => f64::INFINITY,
    };
    rep.below("phase_slope", slope_error, PHASE_SLOPE_TOL);
    rep.below("power_drift", trace.max_power_drift(), POWER_DRIFT_TOL);
    Ok(rep)
}

/// Error of each step size at distance `z_end` against a reference run with
/// an eighth of the smallest step: `max |F − F_ref| / max |F_ref|`.
pub fn splitting_errors(f0: &Field2D, gamma: f64, z_end: f64, dzs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if dzs.is_empty() {
        return Err(Error::invalid("no step sizes given"));
    }
    let steps_for = |dz: f64| -> Result<usize> {
        let s = (z_end / dz).round();
        if !(s >= 1.0) || ((s * dz - z_end).abs() > 1e-9 * z_end) {
            return Err(Error::invalid(format!("step {dz} does not divide distance {z_end}")));
        }
        Ok(s as usize)
    };
    let dz_ref = dzs.iter().copied().fold(f64::INFINITY, f64::min) / 8.0;
    let (_, reference) = split_step_evolve(f0, gamma, dz_ref, steps_for(dz_ref)?)?;
    let peak = reference.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    dzs.iter()
        .map(|&dz| {
            let (_, f) = split_step_evolve(f0, gamma, dz, steps_for(dz)?)?;
            let err = f
                .values
                .iter()
                .zip(&reference.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            Ok((dz, err / peak))
        })
        .collect()
}

/// Stationary space-charge field `E₀* = −I₀/(1+I₀)`.
pub fn e0_steady(i0: f64) -> f64 {
    -i0 / (1.0 + i0)
}

/// Integrates `∂_t E₀ + E₀ = −I₀/(1+I₀)` to `t_end` with exact exponential
/// steps of length `dt` (the last step is shortened to land on `t_end`).
pub fn relax_e0(i0: f64, e0_init: f64, t_end: f64, dt: f64) -> Result<f64> {
    let mut out = relax_e0_field(&[i0], &[e0_init], t_end, dt)?;
    Ok(out.pop().expect("one entry"))
}

/// Pointwise [`relax_e0`] over a field of intensities.
pub fn relax_e0_field(i0: &[f64], e0_init: &[f64], t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if i0.len() != e0_init.len() {
        return Err(Error::invalid("intensity and field shapes differ"));
    }
    if !(dt > 0.0 && dt <= t_end && t_end.is_finite()) {
        return Err(Error::invalid(format!("need 0 < dt ≤ t_end, got dt = {dt}, t_end = {t_end}")));
    }
    if let Some(v) = i0.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("intensity must be nonnegative, got {v}")));
    }
    let steady: Vec<f64> = i0.iter().map(|&i| e0_steady(i)).collect();
    let mut e = e0_init.to_vec();
    let mut t = 0.0;
    while t < t_end {
        let h = dt.min(t_end - t);
        let decay = (-h).exp();
        for (v, s) in e.iter_mut().zip(&steady) {
            *v = s + (*v - s) * decay;
        }
        t += h;
        if t_end - t < 1e-12 * t_end {
            break;
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_field(l: f64, m: usize, width: f64) -> Field2D {
        Field2D::from_fn(l, m, |x, y| {
            Complex64::new((-(x * x + y * y) / (2.0 * width * width)).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn field_validation() {
        assert!(Field2D::new(1.0, 6, vec![Complex64::default(); 36]).is_err());
        assert!(Field2D::new(0.0, 8, vec![Complex64::default(); 64]).is_err());
        assert!(Field2D::new(1.0, 8, vec![Complex64::default(); 63]).is_err());
        let f = gaussian_field(8.0, 64, 1.0);
        assert_eq!(f.center(), Complex64::new(1.0, 0.0));
        // ∫ e^{−r²} = π
        assert!((f.power() - PI).abs() < 1e-10);
    }

    #[test]
    fn free_propagation_conserves_power() {
        let f0 = Field2D::from_fn(10.0, 64, |x, y| {
            let r2 = x * x + (y - 0.5).powi(2);
            Complex64::from_polar((-r2).exp(), 0.3 * x)
        })
        .unwrap();
        let (trace, _) = split_step_evolve(&f0, 0.0, 1e-2, 200).unwrap();
        assert!(trace.max_power_drift() < 1e-12, "{}", trace.max_power_drift());
    }

    #[test]
    fn free_gaussian_spreads_as_predicted() {
        // |F(0, z)| = 1/√(1 + 4z²) for F₀ = e^{−r²/2} in 2D.
        let f0 = gaussian_field(12.0, 128, 1.0);
        let (_, f) = split_step_evolve(&f0, 0.0, 0.01, 50).unwrap();
        let amp = f.center().norm();
        assert!((amp - 0.5f64.sqrt()).abs() < 1e-10, "{amp}");
    }

    #[test]
    fn radial_symmetry_is_preserved() {
        let f0 = gaussian_field(10.0, 64, 1.2);
        assert!(f0.symmetry_defect() < 1e-15);
        let (_, f) = split_step_evolve(&f0, -20.0, 1e-2, 100).unwrap();
        assert!(f.symmetry_defect() < 1e-10, "{}", f.symmetry_defect());
    }

    #[test]
    fn unresolved_box_is_refused() {
        let f0 = gaussian_field(3.0, 32, 1.5);
        assert!(matches!(split_step_evolve(&f0, -5.0, 1e-2, 1), Err(Error::Domain(_))));
        let f0 = gaussian_field(10.0, 32, 1.0);
        assert!(split_step_evolve(&f0, -5.0, 0.0, 1).is_err());
        assert!(split_step_evolve(&f0, -5.0, 1e-2, 0).is_err());
    }

    #[test]
    fn empty_trace_is_rejected() {
        let grid = crate::radial::RadialGrid::new(4.0, 64).unwrap();
        let gs = GroundState {
            gamma: -30.0,
            profile: RadialProfile::zeros(grid),
            lambda: 7.0,
            mu: -2.5,
            el_residual: 0.0,
            pohozaev: 0.0,
            ball_energies: vec![],
            phase: 0.0,
        };
        assert!(stationarity_report(&gs, &PropagationTrace::default()).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let f = Field2D::from_fn(5.0, 16, |x, y| Complex64::new(x, -y)).unwrap();
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 256);
        assert_eq!(&buf[..4], b"SATF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), -5.0);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 5.0);
        let back = Field2D::read_snapshot(&buf[..], 5.0).unwrap();
        assert_eq!(back, f);
        assert!(Field2D::read_snapshot(&buf[..20], 5.0).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Field2D::read_snapshot(&bad[..], 5.0).is_err());
    }

    #[test]
    fn e0_relaxation() {
        let e = relax_e0(1.0, 0.0, 20.0, 0.01).unwrap();
        assert!((e + 0.5).abs() < 1e-8);
        let e = relax_e0(0.0, 0.7, 40.0, 0.5).unwrap();
        assert!(e.abs() < 1e-16);
        let out = relax_e0_field(&[0.0, 1.0, 3.0], &[1.0, 1.0, 1.0], 5.0, 0.1).unwrap();
        for (i0, e) in [0.0, 1.0, 3.0].iter().zip(out) {
            let s = e0_steady(*i0);
            assert!(((e - s) - (1.0 - s) * (-5.0f64).exp()).abs() < 1e-14);
        }
        assert!(relax_e0(-1.0, 0.0, 1.0, 0.1).is_err());
        assert!(relax_e0(1.0, 0.0, 1.0, 2.0).is_err());
        assert!(relax_e0(1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn trace_csv_and_slope() {
        let trace = PropagationTrace {
            initial_power: 1.0,
            z: vec![0.1, 0.2, 0.3],
            power: vec![1.0, 1.0, 1.0],
            center_phase: vec![0.7, 1.4, 2.1],
            profile_error: vec![0.0, 1e-5, 2e-5],
        };
        assert!((trace.phase_slope().unwrap() - 7.0).abs() < 1e-12);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "z,power,center_phase,profile_error");
        assert_eq!(text.lines().count(), 4);
    }
}
