//! Insurance and reinsurance premium principles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CombinedMarket, EvalGrid};

/// Anything that can price the ceded and retained risk.
///
/// The shipped principles live in [`PremiumPrinciple`]; tests and callers
/// may provide their own.
pub trait PremiumModel: Send + Sync {
    /// Insurance premium rate `a(t, y)`.
    fn insurance_premium(&self, market: &CombinedMarket, t: f64, y: f64) -> Result<f64>;
    /// Reinsurance premium rate `b(t, y, Θ)`.
    fn reinsurance_premium(
        &self,
        market: &CombinedMarket,
        t: f64,
        y: f64,
        theta: f64,
    ) -> Result<f64>;
    /// `(∂b/∂Θ, ∂²b/∂Θ²)`.
    fn premium_theta_derivatives(
        &self,
        market: &CombinedMarket,
        t: f64,
        y: f64,
        theta: f64,
    ) -> Result<(f64, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiumKind {
    ExpectedValue,
    Variance,
    ModifiedVariance,
    /// `b = E[Z]·λ·Θ + δ_R·d·Θ` where `d = Var(Z)/E[Z]` (the Gamma scale).
    RpNa,
}

impl fmt::Display for PremiumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PremiumKind::ExpectedValue => "expected_value",
            PremiumKind::Variance => "variance",
            PremiumKind::ModifiedVariance => "modified_variance",
            PremiumKind::RpNa => "rp_na",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumPrinciple {
    pub kind: PremiumKind,
    pub delta_i: f64,
    pub delta_r: f64,
}

impl PremiumPrinciple {
    pub fn new(kind: PremiumKind, delta_i: f64, delta_r: f64) -> Result<Self> {
        if !(delta_i >= 0.0 && delta_r >= 0.0 && delta_i.is_finite() && delta_r.is_finite()) {
            return Err(Error::invalid(format!(
                "safety loadings must be finite and >= 0 (got {delta_i}, {delta_r})"
            )));
        }
        Ok(PremiumPrinciple {
            kind,
            delta_i,
            delta_r,
        })
    }

    pub fn expected_value(delta_i: f64, delta_r: f64) -> Self {
        Self::new(PremiumKind::ExpectedValue, delta_i, delta_r).expect("valid loadings")
    }

    pub fn rp_na(delta_i: f64, delta_r: f64) -> Self {
        Self::new(PremiumKind::RpNa, delta_i, delta_r).expect("valid loadings")
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Range {
            name: "theta",
            value: theta,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

struct Moments {
    lambda: f64,
    m1: f64,
    m2: f64,
}

fn moments(market: &CombinedMarket, t: f64, y: f64) -> Result<Moments> {
    let d = market.dist();
    Ok(Moments {
        lambda: market.lambda(t, y),
        m1: d.tilted_moment(1, 0.0)?,
        m2: d.tilted_moment(2, 0.0)?,
    })
}

impl PremiumModel for PremiumPrinciple {
    fn insurance_premium(&self, market: &CombinedMarket, t: f64, y: f64) -> Result<f64> {
        let Moments { lambda, m1, m2 } = moments(market, t, y)?;
        let di = self.delta_i;
        Ok(match self.kind {
            PremiumKind::ExpectedValue => (1.0 + di) * lambda * m1,
            PremiumKind::Variance => lambda * (m1 + di * m2),
            // rp_na is a reinsurance-side form; the cedent's own premium
            // uses the modified-variance principle it is modelled on.
            PremiumKind::ModifiedVariance | PremiumKind::RpNa => lambda * m1 + di * m2 / m1,
        })
    }

    fn reinsurance_premium(
        &self,
        market: &CombinedMarket,
        t: f64,
        y: f64,
        theta: f64,
    ) -> Result<f64> {
        check_theta(theta)?;
        let Moments { lambda, m1, m2 } = moments(market, t, y)?;
        let dr = self.delta_r;
        Ok(match self.kind {
            PremiumKind::ExpectedValue => (1.0 + dr) * theta * lambda * m1,
            PremiumKind::Variance => theta * lambda * (m1 + theta * dr * m2),
            PremiumKind::ModifiedVariance => theta * lambda * m1 + dr * theta * m2 / m1,
            PremiumKind::RpNa => m1 * lambda * theta + dr * dispersion(m1, m2) * theta,
        })
    }

    fn premium_theta_derivatives(
        &self,
        market: &CombinedMarket,
        t: f64,
        y: f64,
        theta: f64,
    ) -> Result<(f64, f64)> {
        check_theta(theta)?;
        let Moments { lambda, m1, m2 } = moments(market, t, y)?;
        let dr = self.delta_r;
        Ok(match self.kind {
            PremiumKind::ExpectedValue => ((1.0 + dr) * lambda * m1, 0.0),
            PremiumKind::Variance => (
                lambda * (m1 + 2.0 * theta * dr * m2),
                2.0 * lambda * dr * m2,
            ),
            PremiumKind::ModifiedVariance => (lambda * m1 + dr * m2 / m1, 0.0),
            PremiumKind::RpNa => (m1 * lambda + dr * dispersion(m1, m2), 0.0),
        })
    }
}

/// Index of dispersion `Var(Z)/E[Z]`; equals the scale for Gamma claims.
fn dispersion(m1: f64, m2: f64) -> f64 {
    (m2 - m1 * m1) / m1
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumCondition {
    pub name: &'static str,
    pub passed: bool,
    /// Worst point `(t, y)` and the offending margin there.
    pub worst: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumReport {
    pub conditions: Vec<PremiumCondition>,
}

impl PremiumReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&PremiumCondition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for PremiumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            write!(f, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name)?;
            if let Some((t, y, m)) = c.worst {
                write!(f, " worst at (t={t}, y={y}) margin={m:.6e}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Checks (i) `b(·,·,0) = 0`, (ii) `∂b/∂Θ ≥ 0` on a Θ probe grid and
/// (iii) `b(·,·,1) > a` over the grid.
pub fn validate_premium_assumptions<P: PremiumModel + ?Sized>(
    principle: &P,
    market: &CombinedMarket,
    grid: &EvalGrid,
) -> PremiumReport {
    let thetas: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    // (margin, t, y): smaller margin is worse; a failure is margin < 0 (or
    // <= 0 for the strict condition).
    let mut worst = [(f64::INFINITY, 0.0, 0.0); 3];
    let mut errored = [false; 3];
    let note = |k: usize, m: f64, t: f64, y: f64, w: &mut [(f64, f64, f64); 3]| {
        if m < w[k].0 || m.is_nan() {
            w[k] = (m, t, y);
        }
    };
    for (t, y) in grid.points() {
        match principle.reinsurance_premium(market, t, y, 0.0) {
            Ok(b0) => note(0, -b0.abs(), t, y, &mut worst),
            Err(_) => errored[0] = true,
        }
        for &th in &thetas {
            match principle.premium_theta_derivatives(market, t, y, th) {
                Ok((d1, _)) => note(1, d1, t, y, &mut worst),
                Err(_) => errored[1] = true,
            }
        }
        match (
            principle.reinsurance_premium(market, t, y, 1.0),
            principle.insurance_premium(market, t, y),
        ) {
            (Ok(b1), Ok(a)) => note(2, b1 - a, t, y, &mut worst),
            _ => errored[2] = true,
        }
    }
    let names = [
        "zero_premium_at_zero",
        "nondecreasing_in_theta",
        "full_cover_exceeds_premium",
    ];
    let conditions = (0..3)
        .map(|k| {
            let (m, t, y) = worst[k];
            let passed = !errored[k]
                && match k {
                    0 => m == 0.0 || m.is_infinite(),
                    1 => m >= 0.0,
                    _ => m > 0.0,
                };
            PremiumCondition {
                name: names[k],
                passed,
                worst: m.is_finite().then_some((t, y, m)),
            }
        })
        .collect();
    PremiumReport { conditions }
}
