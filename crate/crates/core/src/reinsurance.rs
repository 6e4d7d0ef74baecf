//! Optimal proportional reinsurance level and the induced function φ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::CombinedMarket;
use crate::premia::PremiumModel;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITER: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// No reinsurance (Θ̄ = 0).
    D0,
    /// Full reinsurance (Θ̄ = 1).
    D1,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinsuranceSolution {
    pub theta: f64,
    pub region: Region,
    /// `∂b/∂Θ − λ·E[Z e^{γ(1−Θ)Z}]` at `theta`; zero on the boundary regions.
    pub residual: f64,
    pub iterations: u32,
}

/// Everything the control layers need at one `(t, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptimum {
    pub solution: ReinsuranceSolution,
    pub lambda: f64,
    /// `b(t, y, Θ̄)`
    pub b_bar: f64,
    pub phi: f64,
}

impl LocalOptimum {
    pub fn theta(&self) -> f64 {
        self.solution.theta
    }
}

/// `E[Z^k e^{sZ}]`, with divergence mapped to `+∞`.
fn moment_or_inf(market: &CombinedMarket, k: u32, s: f64) -> Result<f64> {
    match market.dist().tilted_moment(k, s) {
        Ok(v) => Ok(v),
        Err(Error::Domain { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// First-order residual `F(Θ) = ∂b/∂Θ − λ·E[Z e^{γ(1−Θ)Z}]`. Increasing in
/// Θ under the concavity condition; `−∞` where the tilted mean diverges.
pub fn foc_residual<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    theta: f64,
) -> Result<f64> {
    let (d1, _) = principle.premium_theta_derivatives(market, t, y, theta)?;
    let lam = market.lambda(t, y);
    let tm = moment_or_inf(market, 1, market.gamma * (1.0 - theta))?;
    if lam == 0.0 {
        return Ok(d1);
    }
    Ok(d1 - lam * tm)
}

fn foc_slope<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    theta: f64,
) -> Result<f64> {
    let (_, d2) = principle.premium_theta_derivatives(market, t, y, theta)?;
    let lam = market.lambda(t, y);
    let g = market.gamma;
    Ok(d2 + g * lam * moment_or_inf(market, 2, g * (1.0 - theta))?)
}

/// `−∂²b/∂Θ² < γλ·E[Z² e^{γ(1−Θ)Z}]` on a 21-point Θ probe grid. A
/// divergent second moment counts as `+∞`; invalid inputs are errors.
pub fn concavity_check<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
) -> Result<bool> {
    Ok(concavity_worst(market, principle, t, y)?.is_none())
}

fn concavity_worst<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
) -> Result<Option<f64>> {
    for i in 0..=20 {
        let theta = i as f64 / 20.0;
        let s = foc_slope(market, principle, t, y, theta)?;
        if s.is_nan() {
            return Err(Error::NonFinite(format!(
                "concavity probe at theta={theta}"
            )));
        }
        if s <= 0.0 {
            return Ok(Some(theta));
        }
    }
    Ok(None)
}

/// Region rule with ties assigned to the boundary regions.
pub fn classify_region<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
) -> Result<Region> {
    let lam = market.lambda(t, y);
    let (d1_at_0, _) = principle.premium_theta_derivatives(market, t, y, 0.0)?;
    let gain0 = if lam == 0.0 {
        0.0
    } else {
        lam * moment_or_inf(market, 1, market.gamma)?
    };
    if gain0 <= d1_at_0 {
        return Ok(Region::D0);
    }
    let (d1_at_1, _) = principle.premium_theta_derivatives(market, t, y, 1.0)?;
    if d1_at_1 <= lam * market.dist().mean() {
        return Ok(Region::D1);
    }
    Ok(Region::Interior)
}

/// Lower end of the root bracket: 0, or just above the smallest Θ with a
/// finite tilted mean when γ reaches the mgf bound.
pub fn bracket_lower(market: &CombinedMarket) -> f64 {
    let bound = market.dist().mgf_bound();
    if market.gamma < bound {
        0.0
    } else {
        1.0 - bound / market.gamma + 1e-9
    }
}

/// Θ̄ with the concavity condition verified first.
pub fn optimal_theta<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    tol: f64,
) -> Result<ReinsuranceSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    // Without claims the objective is −γb(Θ); concavity in the strict sense
    // is not needed because the region test settles the answer.
    if market.lambda(t, y) != 0.0 {
        if let Some(theta) = concavity_worst(market, principle, t, y)? {
            return Err(Error::ConcavityViolation { t, y, theta });
        }
    }
    solve_theta(market, principle, t, y, tol, None)
}

/// Θ̄ without the concavity probe, warm-started from `guess`. Callers are
/// responsible for having validated concavity over the region of interest.
pub fn solve_theta<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    tol: f64,
    guess: Option<f64>,
) -> Result<ReinsuranceSolution> {
    match classify_region(market, principle, t, y)? {
        Region::D0 => {
            return Ok(ReinsuranceSolution {
                theta: 0.0,
                region: Region::D0,
                residual: 0.0,
                iterations: 0,
            })
        }
        Region::D1 => {
            return Ok(ReinsuranceSolution {
                theta: 1.0,
                region: Region::D1,
                residual: 0.0,
                iterations: 0,
            })
        }
        Region::Interior => {}
    }
    let f = |th: f64| foc_residual(market, principle, t, y, th);
    let mut lo = bracket_lower(market);
    let mut hi = 1.0;
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoBracket { t, y, lo, hi });
    }
    let mut theta = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    let mut best = (f64::INFINITY, theta);
    for it in 1..=MAX_ITER {
        let r = f(theta)?;
        if r.abs() < best.0 {
            best = (r.abs(), theta);
        }
        if r.abs() <= tol {
            return Ok(interior(theta, r, it));
        }
        if r < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        if hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
        let slope = foc_slope(market, principle, t, y, theta)?;
        let newton = theta - r / slope;
        theta = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // Resolution limit reached: report the best iterate and its residual.
    let r = f(best.1)?;
    Ok(interior(best.1, r, MAX_ITER))
}

fn interior(theta: f64, residual: f64, iterations: u32) -> ReinsuranceSolution {
    ReinsuranceSolution {
        theta,
        region: Region::Interior,
        residual,
        iterations,
    }
}

/// `φ = γ·b(Θ̄) + λ·(E[e^{γ(1−Θ̄)Z}] − 1)` for a known Θ̄.
pub fn phi_at<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    theta: f64,
) -> Result<(f64, f64)> {
    let b = principle.reinsurance_premium(market, t, y, theta)?;
    let lam = market.lambda(t, y);
    let jump = if lam == 0.0 {
        0.0
    } else {
        lam * (market
            .dist()
            .tilted_moment(0, market.gamma * (1.0 - theta))?
            - 1.0)
    };
    Ok((market.gamma * b + jump, b))
}

pub fn phi<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
) -> Result<f64> {
    let sol = optimal_theta(market, principle, t, y, DEFAULT_TOL)?;
    Ok(phi_at(market, principle, t, y, sol.theta)?.0)
}

/// Θ̄, b(Θ̄) and φ in one pass, warm-started and without the concavity probe.
pub fn local_optimum<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    guess: Option<f64>,
) -> Result<LocalOptimum> {
    let solution = solve_theta(market, principle, t, y, DEFAULT_TOL, guess)?;
    let (phi, b_bar) = phi_at(market, principle, t, y, solution.theta)?;
    Ok(LocalOptimum {
        solution,
        lambda: market.lambda(t, y),
        b_bar,
        phi,
    })
}
