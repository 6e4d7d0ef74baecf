//! Martingale, compensator and admissibility diagnostics.

use crate::error::Result;
use crate::forward::forward_value;
use crate::premia::PremiumModel;
use crate::sim::engine::{PathBundle, Simulator};
use crate::sim::stats::{batch_means, mean_stderr, Estimate};

/// Per-node sample mean of `U_t = −exp(−γX_t − P_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDiagnostic {
    pub t_nodes: Vec<f64>,
    pub mean: Vec<f64>,
    /// Batch-means standard errors (rounding-level at t = 0, where `U_0` is
    /// deterministic).
    pub stderr: Vec<f64>,
    pub batches: usize,
}

impl MartingaleDiagnostic {
    pub fn u0(&self) -> f64 {
        self.mean[0]
    }

    /// `(mean_t − U_0)/stderr_t` per node (0 where the stderr vanishes).
    pub fn deviations(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.stderr)
            .map(|(m, s)| if *s > 0.0 { (m - self.u0()) / s } else { 0.0 })
            .collect()
    }

    /// Largest absolute deviation from `U_0` in stderr units.
    pub fn flatness(&self) -> f64 {
        self.deviations().iter().fold(0.0f64, |a, d| a.max(d.abs()))
    }

    /// Drop from `U_0` at the final node in stderr units (positive when the
    /// mean decreased).
    pub fn final_drop(&self) -> f64 {
        -self.deviations().last().copied().unwrap_or(0.0)
    }

    fn from_batches(t_nodes: Vec<f64>, batches: &[Vec<f64>]) -> Self {
        let nb = batches.len();
        let width = t_nodes.len();
        let mut mean = vec![0.0; width];
        let mut stderr = vec![0.0; width];
        for k in 0..width {
            let col: Vec<f64> = batches.iter().map(|b| b[k]).collect();
            let e = mean_stderr(&col);
            mean[k] = e.mean;
            stderr[k] = e.stderr;
        }
        MartingaleDiagnostic {
            t_nodes,
            mean,
            stderr,
            batches: nb,
        }
    }
}

/// Diagnostic on a stored bundle, with batch means over `batches` groups.
pub fn martingale_diagnostic(
    bundle: &PathBundle,
    gamma: f64,
    batches: usize,
) -> MartingaleDiagnostic {
    let width = bundle.t_grid.len();
    let per_node: Vec<Vec<f64>> = (0..width)
        .map(|k| {
            let col: Vec<f64> = bundle
                .paths
                .iter()
                .map(|p| forward_value(gamma, p.x[k], p.p[k]))
                .collect();
            batch_means(&col, batches)
        })
        .collect();
    let nb = per_node.first().map_or(0, |c| c.len());
    let rows: Vec<Vec<f64>> = (0..nb)
        .map(|b| per_node.iter().map(|c| c[b]).collect())
        .collect();
    MartingaleDiagnostic::from_batches(bundle.t_grid.clone(), &rows)
}

/// Streaming version for large path counts.
pub fn martingale_diagnostic_streamed<P: PremiumModel + ?Sized>(
    sim: &Simulator<P>,
) -> Result<MartingaleDiagnostic> {
    let gamma = sim.market.gamma;
    let rows = sim.batched(|r| {
        r.x.iter()
            .zip(&r.p)
            .map(|(x, p)| forward_value(gamma, *x, *p))
            .collect()
    })?;
    let t_nodes = sim
        .recorded_nodes()
        .iter()
        .map(|&k| sim.cfg.time(k))
        .collect();
    Ok(MartingaleDiagnostic::from_batches(t_nodes, &rows))
}

/// `N_T − Λ_T` across paths; zero mean by the compensator identity.
pub fn compensator_gap<P: PremiumModel + ?Sized>(sim: &Simulator<P>) -> Result<Estimate> {
    let gaps = sim.map_paths(|r| r.n_claims as f64 - r.compensator)?;
    Ok(mean_stderr(&gaps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    /// Sample mean of `∫(|Π||μ| + Π²σ²) dt`.
    pub investment_integral: f64,
    /// Sample mean of `exp(−γX_T − P_T)`.
    pub terminal_exponential: f64,
}

impl AdmissibilityReport {
    pub fn finite(&self) -> bool {
        self.investment_integral.is_finite() && self.terminal_exponential.is_finite()
    }
}

pub fn admissibility<P: PremiumModel + ?Sized>(sim: &Simulator<P>) -> Result<AdmissibilityReport> {
    let gamma = sim.market.gamma;
    let rows = sim.batched(|r| {
        let k = r.x.len() - 1;
        vec![r.admissibility, (-gamma * r.x[k] - r.p[k]).exp()]
    })?;
    let nb = rows.len() as f64;
    Ok(AdmissibilityReport {
        investment_integral: rows.iter().map(|r| r[0]).sum::<f64>() / nb,
        terminal_exponential: rows.iter().map(|r| r[1]).sum::<f64>() / nb,
    })
}
