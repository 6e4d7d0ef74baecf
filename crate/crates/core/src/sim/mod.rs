pub mod cce;
pub mod diagnostics;
pub mod engine;
pub mod rng;
pub mod stats;

pub use cce::{
    cce_forward, cce_node, cce_ordering_conditions, cce_report, cce_static, certainty_equivalent,
    risk_aversion_process, time_consistency, CCEReport, CceEstimate, CceNode, OrderingReport,
    OrderingVerdict,
};
pub use diagnostics::{
    admissibility, compensator_gap, martingale_diagnostic, martingale_diagnostic_streamed,
    AdmissibilityReport, MartingaleDiagnostic,
};
pub use engine::{
    PathBundle, PathRecord, PathState, PiRule, SimConfig, Simulator, StrategyPolicy, ThetaRule,
};

use crate::error::Result;
use crate::forward::PenalizerSpec;
use crate::market::CombinedMarket;
use crate::premia::PremiumModel;

/// Simulates and stores every path.
pub fn simulate<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    policy: StrategyPolicy,
    penalizer: PenalizerSpec,
    cfg: SimConfig,
) -> Result<PathBundle> {
    Simulator::new(market, principle, policy, penalizer, cfg)?.simulate()
}
