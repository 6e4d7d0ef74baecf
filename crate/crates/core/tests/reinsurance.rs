mod common;

use common::*;
use fwdre_core::market::*;
use fwdre_core::premia::*;
use fwdre_core::presets;
use fwdre_core::reinsurance::*;
use fwdre_core::{Error, Result};
use proptest::prelude::*;

/// Independent solution of the first-order condition for Gamma(1, scale)
/// claims and a premium linear in Θ with slope `slope`:
/// `slope = λ·scale·(1 − scale·γ(1−Θ))^{-2}`.
fn bisection_theta(lambda: f64, scale: f64, gamma: f64, slope: f64) -> f64 {
    let f = |th: f64| lambda * scale / (1.0 - scale * gamma * (1.0 - th)).powi(2) - slope;
    let lo = if scale * gamma >= 1.0 {
        1.0 - 1.0 / (scale * gamma) + 1e-12
    } else {
        0.0
    };
    if f(lo) <= 0.0 {
        return 0.0;
    }
    bisect(f, lo, 1.0)
}

#[test]
fn large_claims_retention_at_zero() {
    let (m, p) = rp_na(presets::LARGE_CLAIMS);
    let lam = 0.2f64.exp();
    // Closed form with scale·γ = 1.
    let closed = (1.0 + 0.5 / lam).powf(-0.5);
    let sol = optimal_theta(&m, &p, 0.0, 0.0, DEFAULT_TOL).unwrap();
    assert_eq!(sol.region, Region::Interior);
    assert!((sol.theta - closed).abs() < 1e-10);
    assert!((sol.theta - bisection_theta(lam, 2.0, 0.5, 2.0 * lam + 1.0)).abs() < 1e-9);
    assert!((sol.theta - 0.8423415061).abs() < 1e-6);
}

#[test]
fn small_claims_retention_at_zero() {
    let (m, p) = rp_na(presets::SMALL_CLAIMS);
    let lam = 0.2f64.exp();
    let u = (1.0 + 0.5 / lam).powf(-0.5);
    let closed = 1.0 - 6.0 * (1.0 - u);
    let sol = optimal_theta(&m, &p, 0.0, 0.0, DEFAULT_TOL).unwrap();
    assert!((sol.theta - closed).abs() < 1e-10);
    assert!((sol.theta - bisection_theta(lam, 1.0 / 3.0, 0.5, (lam + 0.5) / 3.0)).abs() < 1e-9);
    assert!((sol.theta - 0.054049037).abs() < 1e-6, "{}", sol.theta);
}

#[test]
fn small_claims_null_reinsurance_threshold() {
    let (m, p) = rp_na(presets::SMALL_CLAIMS);
    let y_star = (0.5f64 / 0.44).ln() - 0.2;
    assert!((y_star - -0.0721666).abs() < 1e-6);
    assert_eq!(
        classify_region(&m, &p, 0.0, y_star - 1e-6).unwrap(),
        Region::D0
    );
    assert_eq!(
        classify_region(&m, &p, 0.0, y_star + 1e-6).unwrap(),
        Region::Interior
    );
    assert_eq!(classify_region(&m, &p, 0.0, -0.2).unwrap(), Region::D0);
    let (ml, pl) = rp_na(presets::LARGE_CLAIMS);
    assert_eq!(
        classify_region(&ml, &pl, 0.0, -0.2).unwrap(),
        Region::Interior
    );
}

#[test]
fn expected_value_retention() {
    let (m, p) = base(0.0);
    let closed = 1.0 - 2.0 * (1.0 - 1.7f64.powf(-0.5));
    for y in [-0.3, 0.0, 0.3] {
        let sol = optimal_theta(&m, &p, 0.0, y, DEFAULT_TOL).unwrap();
        assert!((sol.theta - closed).abs() < 1e-10);
        assert!(
            (sol.theta - bisection_theta(m.lambda(0.0, y), 1.0, 0.5, 1.7 * m.lambda(0.0, y))).abs()
                < 1e-9
        );
    }
    assert!((closed - 0.53392998).abs() < 1e-8);
    // The tilted mean at the optimum equals the premium slope.
    let s = 0.5 * (1.0 - closed);
    assert!((tilted_mean(m.dist(), s).unwrap() - 1.7).abs() < 1e-12);
}

#[test]
fn phi_examples() {
    let (m, p) = base(0.0);
    let th = 1.0 - 2.0 * (1.0 - 1.7f64.powf(-0.5));
    let s = 0.5 * (1.0 - th);
    let oracle = 0.5 * 1.7 * th + s / (1.0 - s);
    let v = phi(&m, &p, 0.0, 0.0).unwrap();
    assert!((v - oracle).abs() < 1e-10);
    assert!((v - 0.75768096).abs() < 1e-7);

    // Full cover: φ = γ·b(1).
    let ev0 = PremiumPrinciple::expected_value(0.4, 0.0);
    let sol = optimal_theta(&m, &ev0, 0.0, 0.0, DEFAULT_TOL).unwrap();
    assert_eq!(sol.region, Region::D1);
    let b1 = ev0.reinsurance_premium(&m, 0.0, 0.0, 1.0).unwrap();
    assert!((phi(&m, &ev0, 0.0, 0.0).unwrap() - 0.5 * b1).abs() < 1e-15);

    // No claims: φ = 0.
    let (mm, pm) = merton(0.0);
    assert_eq!(phi(&mm, &pm, 0.0, 0.0).unwrap(), 0.0);
}

struct Concave;

impl PremiumModel for Concave {
    fn insurance_premium(&self, _: &CombinedMarket, _: f64, _: f64) -> Result<f64> {
        Ok(0.0)
    }
    fn reinsurance_premium(&self, _: &CombinedMarket, _: f64, _: f64, th: f64) -> Result<f64> {
        Ok(10.0 * th - 5.0 * th * th)
    }
    fn premium_theta_derivatives(
        &self,
        _: &CombinedMarket,
        _: f64,
        _: f64,
        th: f64,
    ) -> Result<(f64, f64)> {
        Ok((10.0 - 10.0 * th, -10.0))
    }
}

#[test]
fn concavity_examples() {
    let (m, p) = base(0.0);
    assert!(concavity_check(&m, &p, 0.0, 0.0).unwrap());
    let var = PremiumPrinciple::new(PremiumKind::Variance, 0.4, 0.7).unwrap();
    assert!(concavity_check(&m, &var, 0.0, 0.0).unwrap());

    let mut cfg = presets::quadratic_intensity(0.0);
    cfg.claims.intensity = Some(Coef::constant(0.01));
    let thin = cfg.market().unwrap();
    assert!(!concavity_check(&thin, &Concave, 0.0, 0.0).unwrap());
    assert!(matches!(
        optimal_theta(&thin, &Concave, 0.0, 0.0, DEFAULT_TOL),
        Err(Error::ConcavityViolation { .. })
    ));
}

#[test]
fn divergent_moment_is_not_null_reinsurance() {
    // γ = 1 with scale 2: the tilted mean at Θ = 0 diverges.
    let (m, p) = rp_na(presets::LARGE_CLAIMS);
    let m = m.with_gamma(1.0).unwrap();
    assert_ne!(classify_region(&m, &p, 0.0, 0.0).unwrap(), Region::D0);
    let lo = bracket_lower(&m);
    assert!((lo - (0.5 + 1e-9)).abs() < 1e-15);
    let sol = optimal_theta(&m, &p, 0.0, 0.0, DEFAULT_TOL).unwrap();
    assert!(sol.theta > lo && sol.theta < 1.0);
    let lam = 0.2f64.exp();
    assert!((sol.theta - bisection_theta(lam, 2.0, 1.0, 2.0 * lam + 1.0)).abs() < 1e-9);
}

#[test]
fn tolerance_refinement_is_stable() {
    let (m, p) = rp_na(presets::LARGE_CLAIMS);
    for y in linspace(-0.3, 0.3, 13) {
        let coarse = optimal_theta(&m, &p, 0.0, y, 1e-7).unwrap();
        let fine = optimal_theta(&m, &p, 0.0, y, 1e-8).unwrap();
        // |Θ error| ≤ residual / slope, and the slope is bounded below here.
        assert!((coarse.theta - fine.theta).abs() <= 1e-7);
    }
}

#[test]
fn retention_is_nondecreasing_in_the_factor() {
    for scale in [presets::LARGE_CLAIMS, presets::SMALL_CLAIMS] {
        let (m, p) = rp_na(scale);
        let mut prev = -1.0;
        for y in linspace(-0.3, 0.3, 100) {
            let th = optimal_theta(&m, &p, 0.0, y, DEFAULT_TOL).unwrap().theta;
            assert!(th >= prev - 1e-12, "scale {scale} y {y}: {th} < {prev}");
            prev = th;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interior_solutions_are_consistent(y in -0.3f64..0.3, t in 0.0f64..1.0, large in any::<bool>()) {
        let (m, p) = rp_na(if large { presets::LARGE_CLAIMS } else { presets::SMALL_CLAIMS });
        let sol = optimal_theta(&m, &p, t, y, DEFAULT_TOL).unwrap();
        prop_assert!((0.0..=1.0).contains(&sol.theta));
        match sol.region {
            Region::D0 => prop_assert_eq!(sol.theta, 0.0),
            Region::D1 => prop_assert_eq!(sol.theta, 1.0),
            Region::Interior => {
                prop_assert!(sol.theta > 0.0 && sol.theta < 1.0);
                prop_assert!(sol.residual.abs() <= DEFAULT_TOL);
                let lo = bracket_lower(&m);
                prop_assert!(foc_residual(&m, &p, t, y, lo).unwrap() < 0.0);
                prop_assert!(foc_residual(&m, &p, t, y, 1.0).unwrap() > 0.0);
            }
        }
        let opt = local_optimum(&m, &p, t, y, None).unwrap();
        prop_assert!(opt.phi - m.gamma * opt.b_bar >= 0.0);
        prop_assert_eq!(opt.theta(), sol.theta);
    }
}
