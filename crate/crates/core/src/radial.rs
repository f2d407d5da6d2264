//! Uniform radial meshes on `[0, R]` and the discrete calculus of radially
//! symmetric functions in the plane.
//!
//! Node `j` sits at `r_j = j·dr` and owns the annulus
//! `[r_j − dr/2, r_j + dr/2] ∩ [0, R]`. The quadrature weight of a node is the
//! area of that annulus: `2π r_j dr` in the interior (the trapezoid rule for
//! `2π ∫ f r dr`), `π dr²/4` for the origin disk and `π dr (R − dr/4)` for the
//! outer half cell. The weights tile the disk exactly.
//!
//! The Laplacian is the centered stencil for `f'' + f'/r`, closed at the origin
//! by the even ghost node `f(−dr) = f(dr)` and at `R` by the odd ghost
//! `f(R + dr) = −f(R − dr)`. The kinetic form uses staggered differences,
//! `2π Σ r_{j+½} (f_{j+1} − f_j)² / dr`. With the annulus weights the two are
//! exact adjoints: `Σ w_j f_j (Δg)_j = −⟨∇f, ∇g⟩` whenever `f(R) = g(R) = 0`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Uniform mesh `r_j = j·dr`, `j = 0..=n`, on the disk of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    radius: f64,
    intervals: usize,
    spacing: f64,
}

impl RadialGrid {
    pub const MIN_INTERVALS: usize = 16;

    pub fn new(radius: f64, intervals: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("grid radius must be positive, got {radius}")));
        }
        if intervals < Self::MIN_INTERVALS {
            return Err(Error::invalid(format!(
                "grid needs at least {} intervals, got {intervals}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(RadialGrid {
            radius,
            intervals,
            spacing: radius / intervals as f64,
        })
    }

    /// Grid on `[0, radius]` whose spacing is as close to `spacing` as an
    /// integer number of intervals allows.
    pub fn with_spacing(radius: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        let intervals = (radius / spacing).round();
        if !intervals.is_finite() || intervals > 1e9 {
            return Err(Error::Resource(format!(
                "radius {radius} at spacing {spacing} needs too many nodes"
            )));
        }
        Self::new(radius, intervals as usize)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.radius
        } else {
            j as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Area of the annular cell owned by node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let dr = self.spacing;
        if j == 0 {
            0.25 * PI * dr * dr
        } else if j == self.intervals {
            PI * dr * (self.radius - 0.25 * dr)
        } else {
            2.0 * PI * self.node(j) * dr
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    /// Index of the node closest to `r` (clamped to the grid).
    pub fn nearest(&self, r: f64) -> usize {
        let j = (r / self.spacing).round();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.intervals)
        }
    }
}

/// Convenience wrapper for [`RadialGrid::new`].
pub fn make_grid(radius: f64, intervals: usize) -> Result<RadialGrid> {
    RadialGrid::new(radius, intervals)
}

/// Real samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "profile has {} samples but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite profile value at node {j}")));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        RadialProfile {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest sample.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RadialProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Profile rescaled to unit power, `∫ f² = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let p = integrate_radial_with(&self.grid, |j| self.values[j] * self.values[j]);
        if !(p > 0.0) {
            return Err(Error::invalid("cannot normalize a profile with zero power"));
        }
        Ok(self.scaled(1.0 / p.sqrt()))
    }

    /// Four-point cubic interpolation at radius `r`. The profile is extended
    /// evenly through the origin and by zero beyond `R`.
    pub fn sample(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.grid.intervals;
        if r > self.grid.radius {
            return 0.0;
        }
        let x = r / self.grid.spacing;
        let j = (x.floor() as usize).min(n - 1);
        let t = x - j as f64;
        let at = |k: isize| -> f64 {
            if k < 0 {
                self.values[(-k) as usize]
            } else if k as usize > n {
                0.0
            } else {
                self.values[k as usize]
            }
        };
        let j = j as isize;
        let (fm, f0, f1, f2) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        // Lagrange basis on nodes -1, 0, 1, 2.
        let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
        wm * fm + w0 * f0 + w1 * f1 + w2 * f2
    }

    /// Cubic resampling onto another grid (zero beyond this profile's radius).
    pub fn resample(&self, grid: RadialGrid) -> Self {
        RadialProfile {
            grid,
            values: grid.nodes().map(|r| self.sample(r)).collect(),
        }
    }

    /// Writes the `r,value` CSV form, one node per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.grid.nodes().zip(&self.values) {
            writeln!(out, "{r:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    /// Reads the `r,value` CSV form. The nodes must form a uniform grid
    /// starting at zero.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty profile file".into()))??;
        if header.trim() != "r,value" {
            return Err(Error::Parse(format!("unexpected profile header {header:?}")));
        }
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (r, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {} is not `r,value`", k + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))
            };
            radii.push(parse(r)?);
            values.push(parse(v)?);
        }
        if radii.len() < RadialGrid::MIN_INTERVALS + 1 {
            return Err(Error::Parse(format!("profile has only {} rows", radii.len())));
        }
        let grid = RadialGrid::new(*radii.last().unwrap(), radii.len() - 1)
            .map_err(|e| Error::Parse(e.to_string()))?;
        for (j, r) in radii.iter().enumerate() {
            if (r - grid.node(j)).abs() > 1e-9 * grid.radius() {
                return Err(Error::Parse(format!("node {j} at r = {r} is off the uniform grid")));
            }
        }
        RadialProfile::new(grid, values).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn integrate_radial_with(grid: &RadialGrid, f: impl Fn(usize) -> f64) -> f64 {
    (0..grid.len()).map(|j| grid.weight(j) * f(j)).sum()
}

/// `∫_{ℝ²} f = 2π ∫₀^R f(r) r dr` by annulus-weighted quadrature.
pub fn integrate_radial(f: &RadialProfile) -> f64 {
    integrate_radial_with(&f.grid, |j| f.values[j])
}

/// Discrete `f'' + f'/r` into `out` (same length as `f`).
pub(crate) fn laplacian_into(grid: &RadialGrid, f: &[f64], out: &mut [f64]) {
    let n = grid.intervals;
    let inv_dr2 = 1.0 / (grid.spacing * grid.spacing);
    out[0] = 4.0 * (f[1] - f[0]) * inv_dr2;
    for j in 1..n {
        let half_over_j = 0.5 / j as f64;
        out[j] = ((1.0 + half_over_j) * f[j + 1] - 2.0 * f[j] + (1.0 - half_over_j) * f[j - 1])
            * inv_dr2;
    }
    let half_over_n = 0.5 / n as f64;
    // Odd ghost f(R + dr) = −f(R − dr).
    out[n] = (-(1.0 + half_over_n) * f[n - 1] - 2.0 * f[n] + (1.0 - half_over_n) * f[n - 1])
        * inv_dr2;
}

/// Discrete radial Laplacian. The value at `R` is only meaningful for
/// profiles that vanish there.
pub fn radial_laplacian(f: &RadialProfile) -> RadialProfile {
    let mut out = vec![0.0; f.values.len()];
    laplacian_into(&f.grid, &f.values, &mut out);
    RadialProfile {
        grid: f.grid,
        values: out,
    }
}

pub(crate) fn gradient_norm_sq_slice(grid: &RadialGrid, f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.intervals {
        let d = f[j + 1] - f[j];
        acc += (j as f64 + 0.5) * d * d;
    }
    // r_{j+½}/dr = j + ½
    2.0 * PI * acc
}

/// `∫ |∇f|² = 2π ∫ f'² r dr` with staggered differences at the cell faces.
pub fn gradient_norm_sq(f: &RadialProfile) -> f64 {
    gradient_norm_sq_slice(&f.grid, &f.values)
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored. Returns the solution in `rhs`.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::NumericalFailure("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::NumericalFailure("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: f64, n: usize) -> RadialGrid {
        RadialGrid::new(r, n).unwrap()
    }

    #[test]
    fn grid_spacing_and_nodes() {
        let g = grid(16.0, 512);
        assert_eq!(g.spacing(), 0.03125);
        let g = grid(1.0, 16);
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes.len(), 17);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[1], 0.0625);
        assert_eq!(nodes[16], 1.0);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(RadialGrid::new(0.0, 64), Err(Error::InvalidArgument(_))));
        assert!(matches!(RadialGrid::new(-1.0, 64), Err(Error::InvalidArgument(_))));
        assert!(matches!(RadialGrid::new(1.0, 15), Err(Error::InvalidArgument(_))));
        assert!(matches!(RadialGrid::new(f64::NAN, 64), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn with_spacing_rounds_to_whole_intervals() {
        let g = RadialGrid::with_spacing(12.0, 1.0 / 128.0).unwrap();
        assert_eq!(g.intervals(), 1536);
        assert_eq!(g.spacing(), 1.0 / 128.0);
    }

    #[test]
    fn weights_tile_the_disk() {
        let g = grid(2.0, 100);
        let one = RadialProfile::from_fn(g, |_| 1.0).unwrap();
        let area = integrate_radial(&one);
        assert!((area - 4.0 * PI).abs() < 1e-12, "area {area}");
    }

    #[test]
    fn zero_integrates_to_zero() {
        let g = grid(3.0, 64);
        assert_eq!(integrate_radial(&RadialProfile::zeros(g)), 0.0);
    }

    #[test]
    fn gaussian_integral_is_second_order() {
        // 2π ∫ r e^{-r²} dr = π; the leading error is π dr²/12.
        let mut errs = Vec::new();
        for &n in &[256, 512, 1024] {
            let g = grid(8.0, n);
            let f = RadialProfile::from_fn(g, |r| (-r * r).exp()).unwrap();
            let err = integrate_radial(&f) - PI;
            let dr = g.spacing();
            assert!((err / (PI * dr * dr / 12.0) - 1.0).abs() < 1e-2, "err {err}");
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn laplacian_of_quadratic_is_four() {
        let g = grid(1.0, 32);
        let f = RadialProfile::from_fn(g, |r| r * r).unwrap();
        let lap = radial_laplacian(&f);
        for j in 0..g.intervals() {
            assert!((lap.values()[j] - 4.0).abs() < 1e-9, "node {j}: {}", lap.values()[j]);
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid(5.0, 64);
        let f = RadialProfile::from_fn(g, |_| 2.5).unwrap();
        let lap = radial_laplacian(&f);
        assert!(lap.values()[..g.intervals()].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn laplacian_of_gaussian_at_origin() {
        // Δe^{-r²} = (4r² − 4)e^{-r²}
        let mut errs = Vec::new();
        for n in [256, 512, 1024] {
            let g = grid(8.0, n);
            let f = RadialProfile::from_fn(g, |r| (-r * r).exp()).unwrap();
            let lap = radial_laplacian(&f);
            errs.push((lap.values()[0] + 4.0).abs());
        }
        assert!(errs[2] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn gradient_norm_cases() {
        let g = grid(1.0, 64);
        let one = RadialProfile::from_fn(g, |_| 1.0).unwrap();
        assert_eq!(gradient_norm_sq(&one), 0.0);
        let ramp = RadialProfile::from_fn(g, |r| r).unwrap();
        assert!((gradient_norm_sq(&ramp) - PI).abs() < 1e-12);
    }

    #[test]
    fn gradient_norm_of_unit_gaussian() {
        // f = π^{-1/2} e^{-r²/2}: ∫|∇f|² = 1 exactly; second-order discretization error.
        let g = grid(10.0, 1024);
        let f = RadialProfile::from_fn(g, |r| (-0.5 * r * r).exp() / PI.sqrt()).unwrap();
        let dr = g.spacing();
        assert!((gradient_norm_sq(&f) - 1.0).abs() < 0.1 * dr * dr);
    }

    #[test]
    fn summation_by_parts_is_exact_for_vanishing_profiles() {
        let g = grid(6.0, 200);
        let f = RadialProfile::from_fn(g, |r| (1.0 + r) * (-r * r).exp() * (6.0 - r)).unwrap();
        let h = RadialProfile::from_fn(g, |r| (0.5 * r).cos() * (6.0 - r)).unwrap();
        let lap = radial_laplacian(&h);
        let lhs: f64 = (0..g.len())
            .map(|j| g.weight(j) * f.values()[j] * lap.values()[j])
            .sum();
        let dr = g.spacing();
        let rhs: f64 = (0..g.intervals())
            .map(|j| {
                2.0 * PI * (g.node(j) + 0.5 * dr) / dr
                    * (f.values()[j + 1] - f.values()[j])
                    * (h.values()[j + 1] - h.values()[j])
            })
            .sum();
        assert!((lhs + rhs).abs() < 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn cubic_sampling_reproduces_cubics() {
        let g = grid(4.0, 64);
        let f = RadialProfile::from_fn(g, |r| 1.0 + 0.5 * r * r - 0.1 * r * r * r).unwrap();
        for &r in &[0.2, 1.013, 2.5, 3.3] {
            let exact = 1.0 + 0.5 * r * r - 0.1 * r * r * r;
            assert!((f.sample(r) - exact).abs() < 1e-12, "r = {r}");
        }
        assert_eq!(f.sample(4.5), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(3.0, 32);
        let f = RadialProfile::from_fn(g, |r| (-r).exp() / 3.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,value\n"));
        let back = RadialProfile::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(RadialProfile::read_csv(&b"x,y\n1,2\n"[..]).is_err());
        assert!(RadialProfile::read_csv(&b""[..]).is_err());
    }

    #[test]
    fn tridiagonal_solver_matches_direct_product() {
        let lower = [0.0, 1.0, -2.0, 0.5];
        let diag = [4.0, 5.0, 6.0, 3.0];
        let upper = [1.0, 0.3, 1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for i in 0..4 {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }
}
