//! TOML model configuration.
//!
//! ```toml
//! [factor]
//! alpha = { kind = "affine", c0 = 0.2, c1 = -1.0 }
//! beta = { kind = "constant", value = 0.1 }
//! y0 = -0.2
//!
//! [stock]
//! mu = { kind = "affine", c0 = 0.08, c1 = 0.2 }
//! sigma = { kind = "scott", c = 0.1, eps1 = 0.01, eps2 = 2.0 }
//!
//! [claims]
//! k = 1.0            # λ(t,y) = k·exp(y − y0); or give `intensity = {...}`
//! dist = { kind = "gamma", shape = 1.0, scale = 2.0 }
//!
//! [correlation]
//! rho = 0.0
//! rho_s = 0.5
//!
//! [risk]
//! gamma = 0.5
//!
//! [premium]
//! kind = "rp_na"
//! delta_i = 0.3
//! delta_r = 0.5
//! ```
//!
//! Optional sections: `[penalizer]`, `[backward]`, `[sim]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::PenalizerSpec;
use crate::market::{
    build_correlation, ClaimModel, ClaimSizeDist, Coef, CombinedMarket, FactorModel, StockModel,
};
use crate::premia::PremiumPrinciple;
use crate::sim::engine::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimsSection {
    /// Explicit intensity coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<Coef>,
    /// Shorthand for `λ = k·exp(y − y0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub dist: ClaimSizeDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub rho_s: f64,
    #[serde(default)]
    pub rho_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    pub gamma: f64,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default = "one")]
    pub r0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackwardSection {
    pub horizon: f64,
    /// RK4 step for the coefficient ODEs.
    pub dt: f64,
    /// Paths and Euler step for the Feynman–Kac estimator.
    pub fk_paths: usize,
    pub fk_dt: f64,
}

impl Default for BackwardSection {
    fn default() -> Self {
        BackwardSection {
            horizon: 1.0,
            dt: 1e-4,
            fk_paths: 100_000,
            fk_dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub factor: FactorModel,
    pub stock: StockModel,
    pub claims: ClaimsSection,
    #[serde(default = "zero_corr")]
    pub correlation: CorrelationSection,
    pub risk: RiskSection,
    pub premium: PremiumPrinciple,
    #[serde(default)]
    pub penalizer: PenalizerSpec,
    #[serde(default)]
    pub backward: BackwardSection,
    #[serde(default)]
    pub sim: SimConfig,
}

fn zero_corr() -> CorrelationSection {
    CorrelationSection {
        rho: 0.0,
        rho_s: 0.0,
        rho_y: 0.0,
    }
}

impl ModelConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_value(v: toml::Value) -> Result<Self> {
        v.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn intensity(&self) -> Result<Coef> {
        match (&self.claims.intensity, self.claims.k) {
            (Some(c), None) => Ok(c.clone()),
            (None, Some(k)) => Ok(Coef::normalized_exponential(k, self.factor.y0)),
            _ => Err(Error::Config(
                "[claims] needs exactly one of `intensity` or `k`".into(),
            )),
        }
    }

    pub fn market(&self) -> Result<CombinedMarket> {
        let c = self.correlation;
        let corr = build_correlation(c.rho, c.rho_s, c.rho_y)?;
        CombinedMarket::new(
            self.factor.clone(),
            self.stock.clone(),
            ClaimModel {
                lambda: self.intensity()?,
                dist: self.claims.dist.clone(),
            },
            corr,
            self.risk.gamma,
            self.risk.x0,
            self.risk.r0,
        )
    }

    pub fn principle(&self) -> Result<PremiumPrinciple> {
        let p = self.premium;
        PremiumPrinciple::new(p.kind, p.delta_i, p.delta_r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn doc_example_parses() {
        let src = r#"
            [factor]
            alpha = { kind = "affine", c0 = 0.2, c1 = -1.0 }
            beta = { kind = "constant", value = 0.1 }
            y0 = -0.2
            [stock]
            mu = { kind = "affine", c0 = 0.08, c1 = 0.2 }
            sigma = { kind = "scott", c = 0.1, eps1 = 0.01, eps2 = 2.0 }
            [claims]
            k = 1.0
            dist = { kind = "gamma", shape = 1.0, scale = 2.0 }
            [correlation]
            rho_s = 0.5
            [risk]
            gamma = 0.5
            [premium]
            kind = "rp_na"
            delta_i = 0.3
            delta_r = 0.5
        "#;
        let cfg = ModelConfig::from_toml_str(src).unwrap();
        let m = cfg.market().unwrap();
        assert_eq!(m.lambda(0.0, -0.2), 1.0);
        assert_eq!(cfg.penalizer, PenalizerSpec::H1Zero);
        assert_eq!(cfg.sim, SimConfig::default());
    }

    #[test]
    fn round_trip_presets() {
        for cfg in [
            presets::exponential_intensity(2.0, 0.3, 0.5),
            presets::quadratic_intensity(0.4),
        ] {
            let s = cfg.to_toml_string().unwrap();
            assert_eq!(ModelConfig::from_toml_str(&s).unwrap(), cfg);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = presets::quadratic_intensity(0.0);
        cfg.claims.k = Some(1.0);
        assert!(matches!(cfg.market(), Err(Error::Config(_))));
        assert!(matches!(
            ModelConfig::from_toml_str("[factor]\ny0 = 'x'"),
            Err(Error::Config(_))
        ));
        let mut cfg = presets::quadratic_intensity(0.0);
        cfg.correlation = CorrelationSection {
            rho: 0.9,
            rho_s: 0.9,
            rho_y: -0.9,
        };
        assert!(matches!(cfg.market(), Err(Error::NotPsd { .. })));
    }
}
