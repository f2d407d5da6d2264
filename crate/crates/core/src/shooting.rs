//! Outward marching of `Δ_h q = s(q)` with the same radial stencil used by
//! the flow, amplitude bisection, and a linear decaying tail.

use crate::error::{Error, Result};
use crate::radial::{solve_tridiagonal, RadialGrid};

/// How an outward march ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shot {
    /// Went negative at this node: amplitude too large.
    Crossed(usize),
    /// Started increasing at this node: amplitude too small.
    TurnedUp(usize),
    /// Stayed positive and decreasing up to `R`.
    Reached,
}

impl Shot {
    fn too_high(self) -> bool {
        matches!(self, Shot::Crossed(_))
    }
}

/// Marches from `q(0) = amp` and writes the accepted nodes into `out`.
pub(crate) fn march(
    grid: &RadialGrid,
    amp: f64,
    source: &impl Fn(f64) -> f64,
    out: &mut Vec<f64>,
) -> Shot {
    let n = grid.intervals();
    let dr2 = grid.spacing() * grid.spacing();
    out.clear();
    out.push(amp);
    let q1 = amp + 0.25 * dr2 * source(amp);
    if q1 < 0.0 {
        return Shot::Crossed(1);
    }
    if q1 > amp {
        return Shot::TurnedUp(1);
    }
    out.push(q1);
    for j in 1..n {
        let h = 0.5 / j as f64;
        let (prev, cur) = (out[j - 1], out[j]);
        let next = (dr2 * source(cur) + 2.0 * cur - (1.0 - h) * prev) / (1.0 + h);
        if next < 0.0 {
            return Shot::Crossed(j + 1);
        }
        if next > cur {
            return Shot::TurnedUp(j + 1);
        }
        out.push(next);
    }
    Shot::Reached
}

/// Amplitudes `(lo, hi)` straddling the decaying solution: `lo` is not too
/// high and `hi` crosses zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

/// Grows a bracket geometrically around `guess`.
pub(crate) fn find_bracket(
    grid: &RadialGrid,
    guess: f64,
    factor: f64,
    max_expansions: usize,
    source: &impl Fn(f64) -> f64,
) -> Result<Bracket> {
    let mut buf = Vec::with_capacity(grid.len());
    let first = march(grid, guess, source, &mut buf);
    let (mut lo, mut hi) = (guess, guess);
    if first.too_high() {
        for _ in 0..max_expansions {
            lo /= factor;
            if !march(grid, lo, source, &mut buf).too_high() {
                return Ok(Bracket { lo, hi });
            }
            hi = lo;
        }
    } else {
        for _ in 0..max_expansions {
            hi *= factor;
            if march(grid, hi, source, &mut buf).too_high() {
                return Ok(Bracket { lo, hi });
            }
            lo = hi;
        }
    }
    Err(Error::Bracket(format!(
        "no crossing/turning change found within a factor {:.3e} of amplitude {guess}",
        factor.powi(max_expansions as i32)
    )))
}

/// Bisects until the bracket is narrower than `tol` (or float resolution).
pub(crate) fn bisect(
    grid: &RadialGrid,
    mut bracket: Bracket,
    tol: f64,
    source: &impl Fn(f64) -> f64,
) -> Bracket {
    let mut buf = Vec::with_capacity(grid.len());
    while bracket.hi - bracket.lo > tol {
        let mid = 0.5 * (bracket.lo + bracket.hi);
        if mid <= bracket.lo || mid >= bracket.hi {
            break;
        }
        if march(grid, mid, source, &mut buf).too_high() {
            bracket.hi = mid;
        } else {
            bracket.lo = mid;
        }
    }
    bracket
}

/// Builds a positive decaying profile on the whole grid from a tight
/// bracket. The two bounding trajectories are followed while they agree and
/// until the lower one drops below `cutoff·q(0)`; beyond that junction the
/// profile solves the linear problem `Δ_h q = κ² q` with `q(R) = 0`.
pub(crate) fn assemble(
    grid: &RadialGrid,
    bracket: Bracket,
    kappa_sq: f64,
    cutoff: f64,
    source: &impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let n = grid.intervals();
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    let lo_shot = march(grid, bracket.lo, source, &mut lo);
    march(grid, bracket.hi, source, &mut hi);
    if lo_shot == Shot::Reached {
        let mut q = lo;
        q[n] = 0.0;
        return Ok(q);
    }
    let amp = bracket.lo;
    let last = lo.len().min(hi.len()).saturating_sub(1);
    let mut junction = last;
    for j in 1..=last {
        let spread = (hi[j] - lo[j]).abs();
        if lo[j] <= cutoff * amp || spread > 1e-3 * lo[j] {
            junction = j;
            break;
        }
    }
    if junction < 2 {
        return Err(Error::NumericalFailure(
            "shooting trajectories separate immediately; bracket too wide".into(),
        ));
    }
    let mut q = vec![0.0; n + 1];
    q[..=junction].copy_from_slice(&lo[..=junction]);
    linear_tail(grid, &mut q, junction, kappa_sq)?;
    Ok(q)
}

/// Fills nodes `junction+1 .. n` with the solution of `Δ_h q = κ² q`,
/// given `q[junction]` and `q[n] = 0`.
pub(crate) fn linear_tail(grid: &RadialGrid, q: &mut [f64], junction: usize, kappa_sq: f64) -> Result<()> {
    let n = grid.intervals();
    q[n] = 0.0;
    if junction + 1 >= n {
        return Ok(());
    }
    let dr2 = grid.spacing() * grid.spacing();
    let m = n - 1 - junction;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for (i, j) in (junction + 1..n).enumerate() {
        let h = 0.5 / j as f64;
        lower[i] = 1.0 - h;
        diag[i] = -2.0 - kappa_sq * dr2;
        upper[i] = 1.0 + h;
    }
    rhs[0] = -lower[0] * q[junction];
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
    q[junction + 1..n].copy_from_slice(&rhs);
    Ok(())
}
