#![allow(dead_code)]

use fwdre_core::config::ModelConfig;
use fwdre_core::market::*;
use fwdre_core::premia::PremiumPrinciple;
use fwdre_core::presets;

pub fn build(cfg: &ModelConfig) -> (CombinedMarket, PremiumPrinciple) {
    (cfg.market().unwrap(), cfg.principle().unwrap())
}

/// Quadratic-intensity market with expected-value premia.
pub fn base(rho: f64) -> (CombinedMarket, PremiumPrinciple) {
    build(&presets::quadratic_intensity(rho))
}

pub fn small_claims(rho: f64) -> (CombinedMarket, PremiumPrinciple) {
    build(&presets::quadratic_intensity_small_claims(rho))
}

/// Exponential-intensity market with the dispersion-loaded premium.
pub fn rp_na(scale: f64) -> (CombinedMarket, PremiumPrinciple) {
    build(&presets::exponential_intensity(scale, 0.3, 0.5))
}

/// Claim-free constant-coefficient market.
pub fn merton(rho: f64) -> (CombinedMarket, PremiumPrinciple) {
    let mut cfg = presets::quadratic_intensity(rho);
    cfg.claims.intensity = Some(Coef::constant(0.0));
    cfg.stock.mu = Coef::constant(0.08);
    build(&cfg)
}

/// Tanh-sinh quadrature on `[a, b]`, kept separate from the library's
/// Gauss-Kronrod rule. Tolerates integrable endpoint singularities.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let level_sum = |h: f64, odd_only: bool| {
        let mut acc = 0.0;
        let n = (3.5 / h).ceil() as i64;
        for j in -n..=n {
            if odd_only && j % 2 == 0 {
                continue;
            }
            let t = j as f64 * h;
            let u = pi2 * t.sinh();
            let c = u.cosh();
            let w = pi2 * t.cosh() / (c * c);
            // Distance to the nearer endpoint, computed without cancellation.
            let d = half / (u.abs().exp() * c);
            let x = if t < 0.0 { a + d } else { b - d };
            if !(d > 0.0 && x > a && x < b) {
                continue;
            }
            let v = f(x);
            if v.is_finite() {
                acc += w * v;
            }
        }
        acc
    };
    let mut h = 0.5;
    let mut sum = level_sum(h, false);
    let mut est = half * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        sum += level_sum(h, true);
        let next = half * h * sum;
        if (next - est).abs() <= rel_tol * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// Bisection on a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if (f(m) < 0.0) == (flo < 0.0) {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}
