//! Ready-made model configurations used by the experiments and tests.

use serde::{Deserialize, Serialize};

use crate::config::{BackwardSection, ClaimsSection, CorrelationSection, ModelConfig, RiskSection};
use crate::forward::PenalizerSpec;
use crate::market::{ClaimSizeDist, Coef, FactorModel, StockModel};
use crate::premia::{PremiumKind, PremiumPrinciple};
use crate::sim::engine::SimConfig;

/// Claim scale for the large-claims case.
pub const LARGE_CLAIMS: f64 = 2.0;
/// Claim scale for the small-claims case.
pub const SMALL_CLAIMS: f64 = 1.0 / 3.0;

/// `(δ_I, δ_R)` pairs: default, expensive and cheap reinsurance.
pub const LOADINGS: [(f64, f64); 3] = [(0.3, 0.5), (0.6, 0.9), (0.07, 0.1)];

fn vasicek() -> FactorModel {
    FactorModel::vasicek(0.2, -1.0, 0.1, -0.2)
}

/// How the stock coefficients depend on the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StockRegime {
    /// Nearly constant drift, strongly factor-dependent volatility.
    VolatilityDriven,
    /// Factor-dependent drift, nearly constant volatility.
    DriftDriven,
    /// Both depend strongly on the factor.
    Both,
}

impl StockRegime {
    pub const ALL: [StockRegime; 3] = [
        StockRegime::VolatilityDriven,
        StockRegime::DriftDriven,
        StockRegime::Both,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StockRegime::VolatilityDriven => "volatility_driven",
            StockRegime::DriftDriven => "drift_driven",
            StockRegime::Both => "both",
        }
    }

    pub fn stock(&self) -> StockModel {
        let (mu1, mu2, eps2) = match self {
            StockRegime::VolatilityDriven => (0.1, 0.02, 2.0),
            StockRegime::DriftDriven => (0.08, 0.2, 0.02),
            StockRegime::Both => (0.08, 0.2, 2.0),
        };
        StockModel {
            mu: Coef::affine(mu1, mu2),
            sigma: Coef::scott(0.1, 0.01, eps2),
            s0: 1.0,
        }
    }
}

/// Vasicek factor, intensity `exp(y − y0)`, Gamma(1, `scale`) claims and
/// the dispersion-loaded reinsurance premium.
pub fn exponential_intensity(scale: f64, delta_i: f64, delta_r: f64) -> ModelConfig {
    ModelConfig {
        factor: vasicek(),
        stock: StockRegime::Both.stock(),
        claims: ClaimsSection {
            intensity: None,
            k: Some(1.0),
            dist: ClaimSizeDist::gamma(1.0, scale),
        },
        correlation: CorrelationSection {
            rho: 0.0,
            rho_s: 0.5,
            rho_y: 0.0,
        },
        risk: RiskSection {
            gamma: 0.5,
            x0: 1.0,
            r0: 1.0,
        },
        premium: PremiumPrinciple {
            kind: PremiumKind::RpNa,
            delta_i,
            delta_r,
        },
        penalizer: PenalizerSpec::H1Zero,
        backward: BackwardSection::default(),
        sim: SimConfig::default(),
    }
}

/// Vasicek factor, intensity `1 + y + y²/2`, exponential(1) claims,
/// constant volatility `0.27·sqrt(1.01)` and expected-value premia with
/// loadings 0.4 / 0.7. `rho` is the factor–stock correlation.
pub fn quadratic_intensity(rho: f64) -> ModelConfig {
    ModelConfig {
        factor: vasicek(),
        stock: StockModel {
            mu: Coef::affine(0.08, 0.2),
            sigma: Coef::scott(0.27, 0.01, 0.0),
            s0: 1.0,
        },
        claims: ClaimsSection {
            intensity: Some(Coef::quadratic(1.0, 1.0, 0.5)),
            k: None,
            dist: ClaimSizeDist::gamma(1.0, 1.0),
        },
        correlation: CorrelationSection {
            rho,
            rho_s: 0.0,
            rho_y: 0.0,
        },
        risk: RiskSection {
            gamma: 0.5,
            x0: 1.0,
            r0: 1.0,
        },
        premium: PremiumPrinciple {
            kind: PremiumKind::ExpectedValue,
            delta_i: 0.4,
            delta_r: 0.7,
        },
        penalizer: PenalizerSpec::H1Zero,
        backward: BackwardSection::default(),
        sim: SimConfig::default(),
    }
}

/// [`quadratic_intensity`] with low volatility (`c = 0.1`) and small claims,
/// where the zero-volatility drift `g` is negative.
pub fn quadratic_intensity_small_claims(rho: f64) -> ModelConfig {
    let mut cfg = quadratic_intensity(rho);
    cfg.stock.sigma = Coef::scott(0.1, 0.01, 0.0);
    cfg.claims.dist = ClaimSizeDist::gamma(1.0, SMALL_CLAIMS);
    cfg
}
