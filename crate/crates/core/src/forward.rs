//! Forward exponential utilities `U_t(x) = −exp(−γx − P_t)` with penalizer
//! `dP = g dt + h dW^P`, the optimal investment rule, and the generator of
//! `(X, Y, P)` used to check the HJB condition pointwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::CombinedMarket;
use crate::premia::PremiumModel;
use crate::reinsurance::{local_optimum, LocalOptimum};

/// Volatility `h` of the penalizing process; the drift `g` follows from the
/// coupling relation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenalizerSpec {
    /// `h = 0`: zero-volatility utility, myopic investment.
    #[default]
    H1Zero,
    /// `h = −2ρ^S/(1−(ρ^S)²)·μ/σ`
    H2DriftCoupled,
    /// `h = μ/(ρ^S σ) − sqrt(φ − γ b(Θ̄))/ρ^S`
    H3ClaimsCoupled,
    /// Affine in wealth, chosen so the optimal investment is `kbar·x`.
    H4Affine { kbar: f64 },
}

impl PenalizerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            PenalizerSpec::H1Zero => "h1",
            PenalizerSpec::H2DriftCoupled => "h2",
            PenalizerSpec::H3ClaimsCoupled => "h3",
            PenalizerSpec::H4Affine { .. } => "h4",
        }
    }

    pub fn is_zero_vol(&self) -> bool {
        matches!(self, PenalizerSpec::H1Zero)
    }
}

fn positive_sigma(market: &CombinedMarket, t: f64, y: f64) -> Result<f64> {
    let s = market.sigma(t, y);
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::invalid(format!(
            "volatility must be > 0, got {s} at (t={t}, y={y})"
        )))
    }
}

/// `h` given an already computed reinsurance optimum.
pub fn eval_h_at(
    spec: &PenalizerSpec,
    market: &CombinedMarket,
    opt: &LocalOptimum,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let rs = market.corr.rho_s;
    let needs_rho = !matches!(spec, PenalizerSpec::H1Zero);
    if needs_rho && rs == 0.0 {
        return Err(Error::DegenerateCorrelation(format!(
            "penalizer {} divides by rho_s = 0",
            spec.label()
        )));
    }
    let mu = market.mu(t, y);
    let sigma = positive_sigma(market, t, y)?;
    Ok(match *spec {
        PenalizerSpec::H1Zero => 0.0,
        PenalizerSpec::H2DriftCoupled => {
            if rs.abs() == 1.0 {
                return Err(Error::DegenerateCorrelation(
                    "penalizer h2 divides by 1 - rho_s^2 = 0".into(),
                ));
            }
            -2.0 * rs / (1.0 - rs * rs) * mu / sigma
        }
        PenalizerSpec::H3ClaimsCoupled => {
            let uncovered = (opt.phi - market.gamma * opt.b_bar).max(0.0);
            mu / (rs * sigma) - uncovered.sqrt() / rs
        }
        PenalizerSpec::H4Affine { kbar } => (mu / sigma - market.gamma * sigma * kbar * x) / rs,
    })
}

pub fn eval_h<P: PremiumModel + ?Sized>(
    spec: &PenalizerSpec,
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let opt = local_optimum(market, principle, t, y, None)?;
    eval_h_at(spec, market, &opt, t, x, y)
}

/// Zero-volatility drift `−½(μ/σ)² − γa + φ`.
pub fn g_zero_vol<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    t: f64,
    y: f64,
) -> Result<f64> {
    let opt = local_optimum(market, principle, t, y, None)?;
    let a = principle.insurance_premium(market, t, y)?;
    let sharpe = market.mu(t, y) / positive_sigma(market, t, y)?;
    Ok(-0.5 * sharpe * sharpe - market.gamma * a + opt.phi)
}

/// `g = −γa + ½h² − (μ − ρ^S σ h)²/(2σ²) + φ` for a known `h` and optimum.
pub fn g_given(
    market: &CombinedMarket,
    a: f64,
    opt: &LocalOptimum,
    h: f64,
    t: f64,
    y: f64,
) -> Result<f64> {
    let mu = market.mu(t, y);
    let sigma = positive_sigma(market, t, y)?;
    let k = mu - market.corr.rho_s * sigma * h;
    Ok(-market.gamma * a + 0.5 * h * h - k * k / (2.0 * sigma * sigma) + opt.phi)
}

pub fn g_from_h<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let opt = local_optimum(market, principle, t, y, None)?;
    let a = principle.insurance_premium(market, t, y)?;
    let h = eval_h_at(spec, market, &opt, t, x, y)?;
    g_given(market, a, &opt, h, t, y)
}

/// `Π* = μ/(γσ²) − ρ^S h/(γσ)` for a known `h`.
pub fn pi_given(market: &CombinedMarket, h: f64, t: f64, y: f64) -> Result<f64> {
    let sigma = positive_sigma(market, t, y)?;
    let g = market.gamma;
    Ok(market.mu(t, y) / (g * sigma * sigma) - market.corr.rho_s * h / (g * sigma))
}

pub fn optimal_pi<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    spec: &PenalizerSpec,
    principle: &P,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let h = eval_h(spec, market, principle, t, x, y)?;
    pi_given(market, h, t, y)
}

/// `−exp(−γx − p)`; underflows to `−0` for very large `γx + p`.
pub fn forward_value(gamma: f64, x: f64, p: f64) -> f64 {
    -(-gamma * x - p).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardUtilityState {
    pub x: f64,
    pub p: f64,
    pub value: f64,
}

impl ForwardUtilityState {
    pub fn new(gamma: f64, x: f64, p: f64) -> Self {
        ForwardUtilityState {
            x,
            p,
            value: forward_value(gamma, x, p),
        }
    }
}

/// Everything the forward layer produces at one `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardTerms {
    pub opt: LocalOptimum,
    pub a: f64,
    pub h: f64,
    pub g: f64,
    pub pi: f64,
}

pub fn forward_terms<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    t: f64,
    x: f64,
    y: f64,
    guess: Option<f64>,
) -> Result<ForwardTerms> {
    let opt = local_optimum(market, principle, t, y, guess)?;
    forward_terms_at(market, principle, spec, opt, t, x, y)
}

pub fn forward_terms_at<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    opt: LocalOptimum,
    t: f64,
    x: f64,
    y: f64,
) -> Result<ForwardTerms> {
    let a = principle.insurance_premium(market, t, y)?;
    let h = eval_h_at(spec, market, &opt, t, x, y)?;
    let g = g_given(market, a, &opt, h, t, y)?;
    let pi = pi_given(market, h, t, y)?;
    Ok(ForwardTerms { opt, a, h, g, pi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub theta: f64,
    pub pi: f64,
}

/// First and second partial derivatives of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub xx: f64,
    pub yy: f64,
    pub pp: f64,
    pub xy: f64,
    pub xp: f64,
    pub yp: f64,
}

/// A function `f(t, x, y, p)` the generator can act on.
pub trait TestFunction {
    fn partials(&self, pt: &StatePoint) -> Partials;
    /// `E[f(t, x − (1−Θ)Z, y, p)] − f(t, x, y, p)`
    fn jump_mean(&self, market: &CombinedMarket, pt: &StatePoint, theta: f64) -> Result<f64>;
}

/// `u = −exp(−γx − p)` with closed-form derivatives and jump term.
#[derive(Debug, Clone, Copy)]
pub struct ForwardUtilityFn {
    pub gamma: f64,
}

impl TestFunction for ForwardUtilityFn {
    fn partials(&self, pt: &StatePoint) -> Partials {
        let u = forward_value(self.gamma, pt.x, pt.p);
        let g = self.gamma;
        Partials {
            x: -g * u,
            p: -u,
            xx: g * g * u,
            pp: u,
            xp: g * u,
            ..Partials::default()
        }
    }

    fn jump_mean(&self, market: &CombinedMarket, pt: &StatePoint, theta: f64) -> Result<f64> {
        let u = forward_value(self.gamma, pt.x, pt.p);
        let m = market.dist().tilted_moment(0, self.gamma * (1.0 - theta))?;
        Ok(u * (m - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            t: 1e-4,
            x: 1e-4,
            y: 1e-4,
            p: 1e-4,
        }
    }
}

/// Central-difference derivatives and quadrature jump term for an arbitrary
/// closure.
pub struct FiniteDifference<F> {
    pub f: F,
    pub steps: FdSteps,
}

impl<F: Fn(f64, f64, f64, f64) -> f64> TestFunction for FiniteDifference<F> {
    fn partials(&self, pt: &StatePoint) -> Partials {
        let f = &self.f;
        let s = self.steps;
        let (t, x, y, p) = (pt.t, pt.x, pt.y, pt.p);
        let f0 = f(t, x, y, p);
        let d1 = |fp: f64, fm: f64, h: f64| (fp - fm) / (2.0 * h);
        let d2 = |fp: f64, fm: f64, h: f64| (fp - 2.0 * f0 + fm) / (h * h);
        let mixed = |g: &dyn Fn(f64, f64) -> f64, h1: f64, h2: f64| {
            (g(h1, h2) - g(h1, -h2) - g(-h1, h2) + g(-h1, -h2)) / (4.0 * h1 * h2)
        };
        let (xp_, xm) = (f(t, x + s.x, y, p), f(t, x - s.x, y, p));
        let (yp_, ym) = (f(t, x, y + s.y, p), f(t, x, y - s.y, p));
        let (pp_, pm) = (f(t, x, y, p + s.p), f(t, x, y, p - s.p));
        Partials {
            t: d1(f(t + s.t, x, y, p), f(t - s.t, x, y, p), s.t),
            x: d1(xp_, xm, s.x),
            y: d1(yp_, ym, s.y),
            p: d1(pp_, pm, s.p),
            xx: d2(xp_, xm, s.x),
            yy: d2(yp_, ym, s.y),
            pp: d2(pp_, pm, s.p),
            xy: mixed(&|a, b| f(t, x + a, y + b, p), s.x, s.y),
            xp: mixed(&|a, b| f(t, x + a, y, p + b), s.x, s.p),
            yp: mixed(&|a, b| f(t, x, y + a, p + b), s.y, s.p),
        }
    }

    fn jump_mean(&self, market: &CombinedMarket, pt: &StatePoint, theta: f64) -> Result<f64> {
        let f0 = (self.f)(pt.t, pt.x, pt.y, pt.p);
        let v = market
            .dist()
            .expect(|z| (self.f)(pt.t, pt.x - (1.0 - theta) * z, pt.y, pt.p) - f0);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("jump integral of test function".into()))
        }
    }
}

/// Generator of `(X, Y, P)` under control `(Θ, Π)` and penalizer `spec`,
/// applied to `f` at `pt`.
pub fn generator<P: PremiumModel + ?Sized, F: TestFunction + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    control: Control,
    pt: &StatePoint,
    f: &F,
) -> Result<f64> {
    let (t, x, y) = (pt.t, pt.x, pt.y);
    let opt = local_optimum(market, principle, t, y, None)?;
    let terms = forward_terms_at(market, principle, spec, opt, t, x, y)?;
    let b = principle.reinsurance_premium(market, t, y, control.theta)?;
    let (mu, sigma) = (market.mu(t, y), market.sigma(t, y));
    let (alpha, beta) = (market.alpha(t, y), market.beta(t, y));
    let c = &market.corr;
    let (h, g, pi) = (terms.h, terms.g, control.pi);
    let d = f.partials(pt);
    let lam = market.lambda(t, y);
    let jump = if lam == 0.0 {
        0.0
    } else {
        lam * f.jump_mean(market, pt, control.theta)?
    };
    Ok(d.t
        + (terms.a - b + pi * mu) * d.x
        + alpha * d.y
        + g * d.p
        + 0.5 * pi * pi * sigma * sigma * d.xx
        + 0.5 * beta * beta * d.yy
        + 0.5 * h * h * d.pp
        + c.rho * pi * sigma * beta * d.xy
        + c.rho_s * pi * sigma * h * d.xp
        + c.rho_y * beta * h * d.yp
        + jump)
}

/// Generator applied to `u = −exp(−γx − p)`. With `fd_steps` the derivatives
/// of `u` are taken numerically (a cross-check mode); otherwise analytically.
pub fn hjb_residual<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    control: Control,
    pt: &StatePoint,
    fd_steps: Option<FdSteps>,
) -> Result<f64> {
    let gamma = market.gamma;
    match fd_steps {
        None => generator(
            market,
            principle,
            spec,
            control,
            pt,
            &ForwardUtilityFn { gamma },
        ),
        Some(steps) => {
            let fd = FiniteDifference {
                f: move |_t: f64, x: f64, _y: f64, p: f64| forward_value(gamma, x, p),
                steps,
            };
            generator(market, principle, spec, control, pt, &fd)
        }
    }
}

/// The optimal feedback control `(Θ̄, Π*)` at a state.
pub fn optimal_control<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    spec: &PenalizerSpec,
    t: f64,
    x: f64,
    y: f64,
) -> Result<Control> {
    let terms = forward_terms(market, principle, spec, t, x, y, None)?;
    Ok(Control {
        theta: terms.opt.theta(),
        pi: terms.pi,
    })
}
