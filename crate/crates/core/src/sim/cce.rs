//! Conditional certainty equivalents under forward and static exponential
//! preferences, the risk-aversion process, and sufficient conditions for
//! their ordering.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{CombinedMarket, EvalGrid};
use crate::premia::PremiumModel;
use crate::reinsurance::local_optimum;
use crate::sim::engine::Simulator;
use crate::sim::rng::branch_rng;
use crate::sim::stats::{batch_means, mean_stderr, t_quantile};

pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CceEstimate {
    pub value: f64,
    /// 95% confidence interval.
    pub lo: f64,
    pub hi: f64,
}

impl CceEstimate {
    pub fn exact(v: f64) -> Self {
        CceEstimate {
            value: v,
            lo: v,
            hi: v,
        }
    }

    pub fn overlaps(&self, other: &CceEstimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Certainty equivalent `−(1/γ)·ln mean(exp(−γx_i − q_i))` of samples, with
/// a batch-means interval on the inner mean mapped through the (monotone)
/// logarithm. Computed with a log-sum-exp shift.
pub fn certainty_equivalent(gamma: f64, xs: &[f64], qs: &[f64], batches: usize) -> CceEstimate {
    let w: Vec<f64> = xs.iter().zip(qs).map(|(x, q)| -gamma * x - q).collect();
    let shift = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|v| (v - shift).exp()).collect();
    let bm = batch_means(&e, batches);
    let se = mean_stderr(&bm).stderr;
    let m = e.iter().sum::<f64>() / e.len() as f64;
    let q = t_quantile(CI_LEVEL, bm.len());
    let inv = |v: f64| {
        if v > 0.0 {
            -(v.ln() + shift) / gamma
        } else {
            f64::INFINITY
        }
    };
    CceEstimate {
        value: inv(m),
        lo: inv(m + q * se),
        hi: inv(m - q * se),
    }
}

/// Mean of per-unit estimates with a batch-means t interval.
fn mean_ci(vals: &[f64], batches: usize) -> CceEstimate {
    let bm = batch_means(vals, batches);
    let e = mean_stderr(&bm);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let q = t_quantile(CI_LEVEL, bm.len());
    CceEstimate {
        value: mean,
        lo: mean - q * e.stderr,
        hi: mean + q * e.stderr,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CceNode {
    pub t: f64,
    pub forward: CceEstimate,
    pub static_: CceEstimate,
    /// `E[X_T | F_t]`
    pub cond_mean: CceEstimate,
    /// `R_t = E[X_T | F_t] − C_t`
    pub risk_aversion: CceEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CCEReport {
    pub nodes: Vec<CceNode>,
    pub batches: usize,
}

impl CCEReport {
    pub fn t_nodes(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }
}

fn require_zero_vol<P: PremiumModel + ?Sized>(sim: &Simulator<P>) -> Result<()> {
    if sim.penalizer.is_zero_vol() {
        Ok(())
    } else {
        Err(Error::invalid(
            "certainty equivalents need the zero-volatility penalizer",
        ))
    }
}

/// CCE estimates at node `t` (snapped to the simulation grid).
///
/// At `t = 0` this is plain Monte Carlo over `n_paths`. For `0 < t < T`
/// each of `n_paths` outer paths is branched into `branch_count` sub-paths
/// and per-path conditional estimates are averaged. At `t = T` every
/// certainty equivalent equals `X_T`.
pub fn cce_node<P: PremiumModel + ?Sized>(sim: &Simulator<P>, t: f64) -> Result<CceNode> {
    require_zero_vol(sim)?;
    let cfg = &sim.cfg;
    let n = cfg.n_steps();
    let k = cfg.node_of(t);
    let gamma = sim.market.gamma;
    let nb = cfg.batches.min(cfg.n_paths);
    let t_snap = cfg.time(k);

    if k == 0 || k == n {
        let terminal: Vec<(f64, f64)> = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = sim.path_rng(i);
                let mut st = sim.initial_state();
                sim.advance(&mut st, n, &mut rng)?;
                Ok((st.x, st.p))
            })
            .collect::<Result<Vec<_>>>()?;
        let xs: Vec<f64> = terminal.iter().map(|v| v.0).collect();
        let ps: Vec<f64> = terminal.iter().map(|v| v.1).collect();
        let cond_mean = mean_ci(&xs, nb);
        if k == n {
            // C_T = X_T path-wise; the node summary is the mean of X_T.
            return Ok(CceNode {
                t: t_snap,
                forward: cond_mean,
                static_: cond_mean,
                cond_mean,
                risk_aversion: CceEstimate::exact(0.0),
            });
        }
        let forward = certainty_equivalent(gamma, &xs, &ps, nb);
        let static_ = certainty_equivalent(gamma, &xs, &vec![0.0; xs.len()], nb);
        let r_batches: Vec<f64> = batch_chunks(xs.len(), nb)
            .map(|(lo, hi)| {
                let m = xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
                m - certainty_equivalent(gamma, &xs[lo..hi], &ps[lo..hi], 2).value
            })
            .collect();
        let e = mean_stderr(&r_batches);
        let q = t_quantile(CI_LEVEL, r_batches.len());
        let r = cond_mean.value - forward.value;
        return Ok(CceNode {
            t: t_snap,
            forward,
            static_,
            cond_mean,
            risk_aversion: CceEstimate {
                value: r,
                lo: r - q * e.stderr,
                hi: r + q * e.stderr,
            },
        });
    }

    let per_path = nested_conditionals(sim, k)?;
    let col = |j: usize| per_path.iter().map(|v| v[j]).collect::<Vec<f64>>();
    Ok(CceNode {
        t: t_snap,
        forward: mean_ci(&col(0), nb),
        static_: mean_ci(&col(1), nb),
        cond_mean: mean_ci(&col(2), nb),
        risk_aversion: mean_ci(&col(3), nb),
    })
}

fn batch_chunks(n: usize, nb: usize) -> impl Iterator<Item = (usize, usize)> {
    let size = n / nb;
    (0..nb).map(move |b| (b * size, if b + 1 == nb { n } else { (b + 1) * size }))
}

/// Per outer path at node `k`: `[C_t, C̃_t, Ê[X_T|F_t], R_t]` from the same
/// `branch_count` sub-paths.
fn nested_conditionals<P: PremiumModel + ?Sized>(
    sim: &Simulator<P>,
    k: usize,
) -> Result<Vec<[f64; 4]>> {
    let cfg = &sim.cfg;
    let n = cfg.n_steps();
    let gamma = sim.market.gamma;
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sim.path_rng(i);
            let mut st = sim.initial_state();
            sim.advance(&mut st, k, &mut rng)?;
            let p_t = st.p;
            let mut xs = Vec::with_capacity(cfg.branch_count);
            let mut dps = Vec::with_capacity(cfg.branch_count);
            for j in 0..cfg.branch_count as u64 {
                let mut b = st;
                let mut brng = branch_rng(cfg.seed, i, k as u64, j);
                sim.advance(&mut b, n, &mut brng)?;
                xs.push(b.x);
                dps.push(b.p - p_t);
            }
            let zeros = vec![0.0; xs.len()];
            let cf = certainty_equivalent(gamma, &xs, &dps, 2).value;
            let cs = certainty_equivalent(gamma, &xs, &zeros, 2).value;
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            Ok([cf, cs, m, m - cf])
        })
        .collect()
}

pub fn cce_forward<P: PremiumModel + ?Sized>(sim: &Simulator<P>, t: f64) -> Result<CceEstimate> {
    Ok(cce_node(sim, t)?.forward)
}

pub fn cce_static<P: PremiumModel + ?Sized>(sim: &Simulator<P>, t: f64) -> Result<CceEstimate> {
    Ok(cce_node(sim, t)?.static_)
}

pub fn cce_report<P: PremiumModel + ?Sized>(
    sim: &Simulator<P>,
    t_nodes: &[f64],
) -> Result<CCEReport> {
    let nodes = t_nodes
        .iter()
        .map(|&t| cce_node(sim, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(CCEReport {
        nodes,
        batches: sim.cfg.batches.min(sim.cfg.n_paths),
    })
}

/// `R_t` series of a report.
pub fn risk_aversion_process(report: &CCEReport) -> Vec<(f64, CceEstimate)> {
    report
        .nodes
        .iter()
        .map(|n| (n.t, n.risk_aversion))
        .collect()
}

/// Property (i) check at `(0, s)`: the forward CCE at 0 of the time-`s`
/// certainty equivalent, against the direct estimate on independent paths.
pub fn time_consistency<P: PremiumModel + ?Sized>(
    sim: &Simulator<P>,
    s: f64,
) -> Result<(CceEstimate, CceEstimate)> {
    require_zero_vol(sim)?;
    let cfg = &sim.cfg;
    let k = cfg.node_of(s);
    let n = cfg.n_steps();
    let gamma = sim.market.gamma;
    let nb = cfg.batches.min(cfg.n_paths);
    // Outer: (C_s, P_s) per path, both from branching at node k.
    let outer = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sim.path_rng(i);
            let mut st = sim.initial_state();
            sim.advance(&mut st, k, &mut rng)?;
            let mut xs = Vec::with_capacity(cfg.branch_count);
            let mut dps = Vec::with_capacity(cfg.branch_count);
            for j in 0..cfg.branch_count as u64 {
                let mut b = st;
                let mut brng = branch_rng(cfg.seed, i, k as u64, j);
                sim.advance(&mut b, n, &mut brng)?;
                xs.push(b.x);
                dps.push(b.p - st.p);
            }
            Ok((certainty_equivalent(gamma, &xs, &dps, 2).value, st.p))
        })
        .collect::<Result<Vec<_>>>()?;
    let cs: Vec<f64> = outer.iter().map(|v| v.0).collect();
    let ps: Vec<f64> = outer.iter().map(|v| v.1).collect();
    let composed = certainty_equivalent(gamma, &cs, &ps, nb);
    // Direct: plain estimate on branch streams from a distinct node index.
    let direct_xs = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = sim.initial_state();
            let mut rng = branch_rng(cfg.seed, i, u64::MAX, 0);
            sim.advance(&mut st, n, &mut rng)?;
            Ok((st.x, st.p))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = direct_xs.iter().map(|v| v.0).collect();
    let qs: Vec<f64> = direct_xs.iter().map(|v| v.1).collect();
    let direct = certainty_equivalent(gamma, &xs, &qs, nb);
    Ok((direct, composed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingVerdict {
    /// Sufficient condition for `C̃_t ≥ C_t` holds on the grid.
    StaticDominates,
    /// Sufficient condition for `C_t ≥ C̃_t` holds on the grid.
    ForwardDominates,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    /// `(μ/σ)² ≥ −2γa + 2·min{b(1), λ(E[e^{γZ}]−1)}` at every grid point.
    pub cond_i_printed: bool,
    /// Same with `γ·b(1)` inside the minimum.
    pub cond_i_scaled: bool,
    /// `K = inf f(t, y, Θ̄)` over the grid.
    pub k_inf: f64,
    /// `a < K/γ` and `(μ/σ)² ≤ 2(K − γa)` at every grid point.
    pub cond_ii: bool,
    /// Range of the zero-volatility `g` over the grid.
    pub g_min: f64,
    pub g_max: f64,
    /// From the sufficient conditions.
    pub verdict: OrderingVerdict,
    /// From the sign of `g` on the grid: `∫g ≥ 0` along paths that stay in
    /// the sampled range makes the forward CCE the larger one.
    pub g_sign: OrderingVerdict,
}

pub fn cce_ordering_conditions<P: PremiumModel + ?Sized>(
    market: &CombinedMarket,
    principle: &P,
    grid: &EvalGrid,
) -> Result<OrderingReport> {
    let gamma = market.gamma;
    let mgf = market.dist().tilted_moment(0, gamma)?;
    struct Pt {
        sharpe2: f64,
        a: f64,
        b1: f64,
        jump: f64,
        f: f64,
    }
    let pts = grid
        .points()
        .map(|(t, y)| {
            let opt = local_optimum(market, principle, t, y, None)?;
            let s = market.mu(t, y) / market.sigma(t, y);
            Ok(Pt {
                sharpe2: s * s,
                a: principle.insurance_premium(market, t, y)?,
                b1: principle.reinsurance_premium(market, t, y, 1.0)?,
                jump: market.lambda(t, y) * (mgf - 1.0),
                f: opt.phi,
            })
        })
        .collect::<Result<Vec<Pt>>>()?;
    let cond_i_printed = pts
        .iter()
        .all(|p| p.sharpe2 >= -2.0 * gamma * p.a + 2.0 * p.b1.min(p.jump));
    let cond_i_scaled = pts
        .iter()
        .all(|p| p.sharpe2 >= -2.0 * gamma * p.a + 2.0 * (gamma * p.b1).min(p.jump));
    let k_inf = pts.iter().map(|p| p.f).fold(f64::INFINITY, f64::min);
    let cond_ii = pts
        .iter()
        .all(|p| p.a < k_inf / gamma && p.sharpe2 <= 2.0 * (k_inf - gamma * p.a));
    let gs: Vec<f64> = pts
        .iter()
        .map(|p| -0.5 * p.sharpe2 - gamma * p.a + p.f)
        .collect();
    let g_min = gs.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let verdict = if cond_i_scaled {
        OrderingVerdict::StaticDominates
    } else if cond_ii {
        OrderingVerdict::ForwardDominates
    } else {
        OrderingVerdict::Undetermined
    };
    let g_sign = if g_min >= 0.0 {
        OrderingVerdict::ForwardDominates
    } else if g_max <= 0.0 {
        OrderingVerdict::StaticDominates
    } else {
        OrderingVerdict::Undetermined
    };
    Ok(OrderingReport {
        cond_i_printed,
        cond_i_scaled,
        k_inf,
        cond_ii,
        g_min,
        g_max,
        verdict,
        g_sign,
    })
}
