//! Classical (backward) exponential utility on a fixed horizon.
//!
//! The value function is `V = −exp(−γx − φ(t,y))` where `φ` solves
//!
//! ```text
//! φ_t + φ_y (α − ρμβ/σ) + ½β² φ_yy + ½(1−ρ²)β² φ_y² − g = 0,   φ(T, ·) = 0
//! ```
//!
//! with `g` the zero-volatility drift. Substituting `φ = ln ξ / (1−ρ²)`
//! makes the equation linear in `ξ`, so
//! `ξ(t,y) = Ẽ[exp(−(1−ρ²)∫_t^T g(s, Y_s) ds)]` with `Y` following the
//! drift `α − ρμβ/σ`. When `g` is quadratic in `y` and the adjusted drift is
//! affine, `φ` is quadratic in `y` and reduces to three Riccati-type ODEs.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::g_zero_vol;
use crate::market::CombinedMarket;
use crate::premia::PremiumModel;
use crate::reinsurance::local_optimum;
use crate::sim::rng::{path_rng, tag};
use crate::sim::stats::mean_stderr;

const BLOWUP: f64 = 1e12;

/// Coefficients of `φ(t,y) = φ0(t) + φ1(t)·y + φ2(t)·y²` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticValueCoeffs {
    pub t_grid: Vec<f64>,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub horizon: f64,
    /// Time derivatives at the nodes, for Hermite interpolation.
    dphi: Vec<[f64; 3]>,
}

impl QuadraticValueCoeffs {
    /// `(φ0, φ1, φ2)` at `t`, by cubic Hermite interpolation between nodes.
    pub fn at(&self, t: f64) -> [f64; 3] {
        self.interp(t).0
    }

    fn interp(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let g = &self.t_grid;
        let n = g.len();
        let t = t.clamp(g[0], g[n - 1]);
        let k = (g.partition_point(|&s| s <= t).max(1) - 1).min(n - 2);
        let h = g[k + 1] - g[k];
        let s = (t - g[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let cols = [&self.phi0, &self.phi1, &self.phi2];
        let mut v = [0.0; 3];
        let mut dv = [0.0; 3];
        for i in 0..3 {
            let (p0, p1) = (cols[i][k], cols[i][k + 1]);
            let (m0, m1) = (self.dphi[k][i], self.dphi[k + 1][i]);
            v[i] = h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
            dv[i] = d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1;
        }
        (v, dv)
    }

    pub fn phi(&self, t: f64, y: f64) -> f64 {
        let [a, b, c] = self.at(t);
        a + y * (b + c * y)
    }

    pub fn phi_y(&self, t: f64, y: f64) -> f64 {
        let [_, b, c] = self.at(t);
        b + 2.0 * c * y
    }

    pub fn phi_t(&self, t: f64, y: f64) -> f64 {
        let [a, b, c] = self.interp(t).1;
        a + y * (b + c * y)
    }
}

/// `c0 + c1·y + c2·y²` through `y ∈ {−1, 0, 1}`, verified at four more points.
fn fit_quadratic<F: Fn(f64) -> Result<f64>>(f: F, what: &str) -> Result<[f64; 3]> {
    let (fm, f0, fp) = (f(-1.0)?, f(0.0)?, f(1.0)?);
    let c = [f0, 0.5 * (fp - fm), 0.5 * (fp + fm) - f0];
    for y in [-2.0, -0.5, 0.5, 2.0] {
        let v = f(y)?;
        let q = c[0] + y * (c[1] + c[2] * y);
        let scale = 1.0 + v.abs().max(f0.abs()).max(fp.abs()).max(fm.abs());
        if !((v - q).abs() <= 1e-7 * scale) {
            return Err(Error::NotQuadratic(format!(
                "{what} is not quadratic in y (at y={y}: {v} vs fit {q})"
            )));
        }
    }
    Ok(c)
}

/// Adjusted factor drift `α − ρμβ/σ`.
pub fn adjusted_drift(market: &CombinedMarket, t: f64, y: f64) -> f64 {
    let beta = market.beta(t, y);
    market.alpha(t, y) - market.corr.rho * market.mu(t, y) * beta / market.sigma(t, y)
}

struct AnsatzFit {
    a: [f64; 2],
    beta2: f64,
    g: [f64; 3],
}

fn fit_at<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
) -> Result<AnsatzFit> {
    let beta0 = market.beta(t, 0.0);
    for y in [-2.0, -1.0, 1.0, 2.0] {
        if (market.beta(t, y) - beta0).abs() > 1e-12 * (1.0 + beta0.abs()) {
            return Err(Error::NotQuadratic("factor volatility depends on y".into()));
        }
    }
    let a = fit_quadratic(
        |y| Ok(adjusted_drift(market, t, y)),
        "adjusted factor drift",
    )?;
    if a[2].abs() > 1e-9 * (1.0 + a[0].abs() + a[1].abs()) {
        return Err(Error::NotQuadratic(
            "adjusted factor drift is not affine in y".into(),
        ));
    }
    let g = fit_quadratic(|y| g_zero_vol(market, principle, t, y), "g")?;
    Ok(AnsatzFit {
        a: [a[0], a[1]],
        beta2: beta0 * beta0,
        g,
    })
}

/// Time derivative of `(φ0, φ1, φ2)` obtained by matching powers of `y`.
fn ansatz_rhs(fit: &AnsatzFit, rho: f64, p: [f64; 3]) -> [f64; 3] {
    let [_, p1, p2] = p;
    let [a0, a1] = fit.a;
    let b2 = fit.beta2;
    let q = 1.0 - rho * rho;
    [
        -p1 * a0 - p2 * b2 - 0.5 * q * b2 * p1 * p1 + fit.g[0],
        -p1 * a1 - 2.0 * p2 * a0 - 2.0 * q * b2 * p1 * p2 + fit.g[1],
        -2.0 * p2 * a1 - 2.0 * q * b2 * p2 * p2 + fit.g[2],
    ]
}

/// Integrates the coefficient ODEs backward from `horizon` with classical
/// RK4 at a fixed step (the last step is shortened to land on 0 exactly).
pub fn solve_quadratic_ansatz<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    horizon: f64,
    dt: f64,
) -> Result<QuadraticValueCoeffs> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::invalid("horizon and dt must be > 0"));
    }
    let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let rho = market.corr.rho;
    let mut cache: Vec<(f64, std::rc::Rc<AnsatzFit>)> = Vec::new();
    let mut fit = |t: f64| -> Result<std::rc::Rc<AnsatzFit>> {
        if let Some((_, f)) = cache.iter().find(|(s, _)| *s == t) {
            return Ok(f.clone());
        }
        let f = std::rc::Rc::new(fit_at(market, principle, t)?);
        if cache.len() >= 4 {
            cache.remove(0);
        }
        cache.push((t, f.clone()));
        Ok(f)
    };
    let mut t_grid = vec![0.0; n + 1];
    let mut vals = vec![[0.0f64; 3]; n + 1];
    let mut dphi = vec![[0.0f64; 3]; n + 1];
    for (k, t) in t_grid.iter_mut().enumerate() {
        *t = if k == n { horizon } else { k as f64 * h };
    }
    dphi[n] = ansatz_rhs(&*fit(horizon)?, rho, vals[n]);
    let add =
        |p: [f64; 3], k: [f64; 3], s: f64| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
    for k in (0..n).rev() {
        let t1 = t_grid[k + 1];
        let t0 = t_grid[k];
        let step = t0 - t1;
        let tm = 0.5 * (t0 + t1);
        let p = vals[k + 1];
        let k1 = dphi[k + 1];
        let fm = fit(tm)?;
        let k2 = ansatz_rhs(&fm, rho, add(p, k1, 0.5 * step));
        let k3 = ansatz_rhs(&fm, rho, add(p, k2, 0.5 * step));
        let k4 = ansatz_rhs(&*fit(t0)?, rho, add(p, k3, step));
        let next =
            [0, 1, 2].map(|i| p[i] + step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        let worst = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(worst <= BLOWUP) {
            return Err(Error::BlowUp {
                t: t0,
                value: worst,
            });
        }
        vals[k] = next;
        dphi[k] = ansatz_rhs(&*fit(t0)?, rho, next);
    }
    Ok(QuadraticValueCoeffs {
        phi0: vals.iter().map(|v| v[0]).collect(),
        phi1: vals.iter().map(|v| v[1]).collect(),
        phi2: vals.iter().map(|v| v[2]).collect(),
        t_grid,
        horizon,
        dphi,
    })
}

/// `Π^B = μ/(γσ²) − ρβφ_y/(γσ)` for a given `φ_y`.
pub fn backward_pi_from_phi_y(market: &CombinedMarket, phi_y: f64, t: f64, y: f64) -> f64 {
    let sigma = market.sigma(t, y);
    let g = market.gamma;
    market.mu(t, y) / (g * sigma * sigma)
        - market.corr.rho * market.beta(t, y) * phi_y / (g * sigma)
}

pub fn backward_pi(coeffs: &QuadraticValueCoeffs, market: &CombinedMarket, t: f64, y: f64) -> f64 {
    backward_pi_from_phi_y(market, coeffs.phi_y(t, y), t, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkEstimate {
    pub xi: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// `φ` estimated by simulation, with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEstimate {
    pub phi: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// `g` along a fixed time grid: quadratic fits when `g(t,·)` is quadratic,
/// otherwise evaluated pointwise.
enum GridG {
    Fitted(Vec<[f64; 3]>),
    Direct,
}

fn grid_g<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    times: &[f64],
) -> GridG {
    let mut fits = Vec::with_capacity(times.len());
    for &t in times {
        match fit_quadratic(|y| g_zero_vol(market, principle, t, y), "g") {
            Ok(c) => fits.push(c),
            Err(_) => return GridG::Direct,
        }
    }
    GridG::Fitted(fits)
}

/// Samples of `∫_t^T g(s, Y_s) ds` (trapezoid rule) under the adjusted drift.
#[allow(clippy::too_many_arguments)]
fn integrated_g_samples<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    horizon: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) || n_paths == 0 || !(horizon >= t) {
        return Err(Error::invalid("need dt > 0, n_paths >= 1 and t <= horizon"));
    }
    let n = ((horizon - t) / dt - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return Ok(vec![0.0; n_paths]);
    }
    let h = (horizon - t) / n as f64;
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { horizon } else { t + k as f64 * h })
        .collect();
    let gg = grid_g(market, principle, &times);
    let sqh = h.sqrt();
    (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = path_rng(seed, tag::FEYNMAN_KAC, i as u64);
            let mut yk = y;
            let mut guess = None;
            let mut g_at = |k: usize, yv: f64| -> Result<f64> {
                match &gg {
                    GridG::Fitted(c) => Ok(c[k][0] + yv * (c[k][1] + c[k][2] * yv)),
                    GridG::Direct => {
                        let tk = times[k];
                        let opt = local_optimum(market, principle, tk, yv, guess)?;
                        guess = Some(opt.theta());
                        let a = principle.insurance_premium(market, tk, yv)?;
                        let s = market.mu(tk, yv) / market.sigma(tk, yv);
                        Ok(-0.5 * s * s - market.gamma * a + opt.phi)
                    }
                }
            };
            let mut g_prev = g_at(0, yk)?;
            let mut acc = 0.0;
            for (k, &tk) in times[..n].iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                yk += adjusted_drift(market, tk, yk) * h + market.beta(tk, yk) * sqh * z;
                let g_next = g_at(k + 1, yk)?;
                acc += 0.5 * (g_prev + g_next) * h;
                g_prev = g_next;
            }
            if acc.is_finite() {
                Ok(acc)
            } else {
                Err(Error::NonFinite("integrated g along a factor path".into()))
            }
        })
        .collect()
}

/// `ξ(t,y) = Ẽ[exp(−(1−ρ²)∫_t^T g ds)]` by Monte Carlo.
#[allow(clippy::too_many_arguments)]
pub fn xi_feynman_kac<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    horizon: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<FkEstimate> {
    let rho = market.corr.rho;
    if rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation(
            "the distortion transform needs |rho| < 1; use phi_feynman_kac".into(),
        ));
    }
    let q = 1.0 - rho * rho;
    let ints = integrated_g_samples(market, principle, t, y, horizon, n_paths, dt, seed)?;
    let vals: Vec<f64> = ints.iter().map(|v| (-q * v).exp()).collect();
    let e = mean_stderr(&vals);
    Ok(FkEstimate {
        xi: e.mean,
        stderr: e.stderr,
        n_paths,
    })
}

/// `φ = ln ξ / (1−ρ²)`.
pub fn phi_from_xi(xi: f64, rho: f64) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation(
            "kappa = 1/(1 - rho^2) is undefined".into(),
        ));
    }
    if !(xi > 0.0) {
        return Err(Error::invalid(format!("xi must be > 0, got {xi}")));
    }
    Ok(xi.ln() / (1.0 - rho * rho))
}

/// `φ(t,y)` by simulation. Uses the distortion transform for `|ρ| < 1` and
/// the linear representation `φ = −Ẽ[∫g ds]` when `|ρ| = 1`.
#[allow(clippy::too_many_arguments)]
pub fn phi_feynman_kac<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    horizon: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<PhiEstimate> {
    let rho = market.corr.rho;
    if rho.abs() < 1.0 {
        let e = xi_feynman_kac(market, principle, t, y, horizon, n_paths, dt, seed)?;
        let k = 1.0 / (1.0 - rho * rho);
        return Ok(PhiEstimate {
            phi: phi_from_xi(e.xi, rho)?,
            stderr: k * e.stderr / e.xi,
            n_paths,
        });
    }
    let ints = integrated_g_samples(market, principle, t, y, horizon, n_paths, dt, seed)?;
    let e = mean_stderr(&ints);
    Ok(PhiEstimate {
        phi: -e.mean,
        stderr: e.stderr,
        n_paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSteps {
    pub t: f64,
    pub y: f64,
}

impl Default for PdeSteps {
    fn default() -> Self {
        PdeSteps { t: 1e-4, y: 1e-3 }
    }
}

/// Residual of the backward PDE for a candidate `φ`, by central differences.
pub fn pde_residual<P: PremiumModel + ?Sized, F: Fn(f64, f64) -> f64>(
    phi: F,
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
    steps: PdeSteps,
) -> Result<f64> {
    let (ht, hy) = (steps.t, steps.y);
    let f0 = phi(t, y);
    let phi_t = (phi(t + ht, y) - phi(t - ht, y)) / (2.0 * ht);
    let (fp, fm) = (phi(t, y + hy), phi(t, y - hy));
    let phi_y = (fp - fm) / (2.0 * hy);
    let phi_yy = (fp - 2.0 * f0 + fm) / (hy * hy);
    let beta = market.beta(t, y);
    let rho = market.corr.rho;
    let g = g_zero_vol(market, principle, t, y)?;
    Ok(phi_t
        + phi_y * adjusted_drift(market, t, y)
        + 0.5 * beta * beta * phi_yy
        + 0.5 * (1.0 - rho * rho) * beta * beta * phi_y * phi_y
        - g)
}
