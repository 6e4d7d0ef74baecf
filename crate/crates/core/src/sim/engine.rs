//! Euler simulation of `(Y, S, X, P)` with Cox-process claims.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::QuadraticValueCoeffs;
use crate::error::{Error, Result};
use crate::forward::{forward_terms_at, Control, PenalizerSpec};
use crate::market::{validate_standing_assumptions, ClaimSizeDist, CombinedMarket, EvalGrid};
use crate::premia::PremiumModel;
use crate::reinsurance::{concavity_check, local_optimum};
use crate::sim::rng::{path_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Multiplier on the step-endpoint intensity used as thinning bound.
    pub thinning_margin: f64,
    /// Sub-paths per node for nested conditional estimates.
    pub branch_count: usize,
    /// Record every `record_stride`-th node (the last node is always kept).
    pub record_stride: usize,
    /// Batches for batch-means confidence intervals.
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 10_000,
            seed: 20_240_601,
            thinning_margin: 1.5,
            branch_count: 200,
            record_stride: 1,
            batches: 100,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt.is_finite() && self.horizon.is_finite())
        {
            return Err(Error::invalid("dt and horizon must be finite and > 0"));
        }
        if self.n_paths == 0 || self.branch_count == 0 || self.record_stride == 0 {
            return Err(Error::invalid(
                "n_paths, branch_count and record_stride must be >= 1",
            ));
        }
        if !(self.thinning_margin >= 1.0) {
            return Err(Error::invalid("thinning_margin must be >= 1"));
        }
        if self.batches < 2 {
            return Err(Error::invalid("need at least 2 batches"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Effective step so that `n_steps` steps land on the horizon exactly.
    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        let n = self.n_steps();
        if k >= n {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    /// Index of the grid node closest to `t`.
    pub fn node_of(&self, t: f64) -> usize {
        ((t / self.step()).round().max(0.0) as usize).min(self.n_steps())
    }
}

pub type ThetaFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type PiFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ThetaRule {
    /// Θ̄(t, y)
    Optimal,
    Constant(f64),
    Custom(ThetaFn),
}

#[derive(Clone)]
pub enum PiRule {
    /// Forward-optimal Π* for the simulated penalizer.
    Optimal,
    Constant(f64),
    /// `k·x`
    Proportional(f64),
    /// Backward-optimal strategy from the quadratic ansatz.
    Backward(Arc<QuadraticValueCoeffs>),
    Custom(PiFn),
}

impl fmt::Debug for ThetaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaRule::Optimal => write!(f, "Optimal"),
            ThetaRule::Constant(v) => write!(f, "Constant({v})"),
            ThetaRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl fmt::Debug for PiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiRule::Optimal => write!(f, "Optimal"),
            PiRule::Constant(v) => write!(f, "Constant({v})"),
            PiRule::Proportional(k) => write!(f, "Proportional({k})"),
            PiRule::Backward(_) => write!(f, "Backward"),
            PiRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyPolicy {
    pub theta_rule: ThetaRule,
    pub pi_rule: PiRule,
    pub label: String,
}

impl StrategyPolicy {
    pub fn optimal() -> Self {
        StrategyPolicy {
            theta_rule: ThetaRule::Optimal,
            pi_rule: PiRule::Optimal,
            label: "optimal".into(),
        }
    }

    pub fn constant(theta: f64, pi: f64) -> Self {
        StrategyPolicy {
            theta_rule: ThetaRule::Constant(theta),
            pi_rule: PiRule::Constant(pi),
            label: format!("constant(theta={theta}, pi={pi})"),
        }
    }
}

/// Simulation state of one path at a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub p: f64,
    pub n_claims: u64,
    /// `∫λ(s, Y_s) ds` so far (trapezoid rule).
    pub compensator: f64,
    /// `∫(|Π||μ| + Π²σ²) ds` so far.
    pub admissibility: f64,
    theta_guess: Option<f64>,
}

/// One recorded path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path: u64,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub pi: Vec<f64>,
    /// `(T_n, Z_n)` for every accepted claim.
    pub claims: Vec<(f64, f64)>,
    pub n_claims: u64,
    pub compensator: f64,
    pub admissibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    /// Recorded nodes.
    pub t_grid: Vec<f64>,
    pub paths: Vec<PathRecord>,
    pub seed: u64,
    pub gamma: f64,
}

enum Sampler {
    Gamma(Gamma<f64>),
    Tabulated(ClaimSizeDist),
}

impl Sampler {
    fn new(d: &ClaimSizeDist) -> Result<Self> {
        match d.gamma_params() {
            Some((shape, scale)) => Gamma::new(shape, scale)
                .map(Sampler::Gamma)
                .map_err(|e| Error::invalid(format!("claim sampler: {e}"))),
            None => Ok(Sampler::Tabulated(d.clone())),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::Tabulated(ClaimSizeDist::Tabulated(t)) => t.quantile(rng.random::<f64>()),
            Sampler::Tabulated(_) => unreachable!(),
        }
    }
}

/// A validated simulation setup.
pub struct Simulator<'a, P: PremiumModel + ?Sized> {
    pub market: &'a CombinedMarket,
    pub principle: &'a P,
    pub policy: StrategyPolicy,
    pub penalizer: PenalizerSpec,
    pub cfg: SimConfig,
    sampler: Sampler,
}

impl<'a, P: PremiumModel + ?Sized> Simulator<'a, P> {
    /// Checks the configuration, the standing assumptions around the initial
    /// factor level and the concavity condition, once, up front.
    pub fn new(
        market: &'a CombinedMarket,
        principle: &'a P,
        policy: StrategyPolicy,
        penalizer: PenalizerSpec,
        cfg: SimConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let y0 = market.factor.y0;
        let grid = EvalGrid::uniform((0.0, cfg.horizon), 11, (y0 - 1.0, y0 + 1.0), 21);
        let report = validate_standing_assumptions(market, &grid);
        // A claim-free market (λ ≡ 0) is a legitimate degenerate case for the
        // simulator even though the intensity check requires λ > 0.
        let claim_free = grid.points().all(|(t, y)| market.lambda(t, y) == 0.0);
        let failures: Vec<String> = report
            .failures()
            .iter()
            .filter(|c| !(claim_free && c.name == "intensity_positive"))
            .map(|c| c.name.clone())
            .collect();
        if !failures.is_empty() {
            return Err(Error::AssumptionViolation(failures.join(", ")));
        }
        let probes: &[(f64, f64)] = if claim_free {
            &[]
        } else {
            &[
                (0.0, y0),
                (0.0, y0 - 0.5),
                (0.0, y0 + 0.5),
                (cfg.horizon, y0),
            ]
        };
        for &(t, y) in probes {
            if !concavity_check(market, principle, t, y)? {
                return Err(Error::ConcavityViolation {
                    t,
                    y,
                    theta: f64::NAN,
                });
            }
        }
        Ok(Simulator {
            market,
            principle,
            sampler: Sampler::new(market.dist())?,
            policy,
            penalizer,
            cfg,
        })
    }

    pub fn initial_state(&self) -> PathState {
        PathState {
            step: 0,
            x: self.market.x0,
            y: self.market.factor.y0,
            s: self.market.stock.s0,
            p: 0.0,
            n_claims: 0,
            compensator: 0.0,
            admissibility: 0.0,
            theta_guess: None,
        }
    }

    /// Controls and penalizer coefficients at the state's node.
    fn controls(&self, st: &mut PathState) -> Result<(Control, f64, f64, f64, f64)> {
        let m = self.market;
        let t = self.cfg.time(st.step);
        let opt = local_optimum(m, self.principle, t, st.y, st.theta_guess)?;
        st.theta_guess = Some(opt.theta());
        let terms = forward_terms_at(m, self.principle, &self.penalizer, opt, t, st.x, st.y)?;
        let theta = match &self.policy.theta_rule {
            ThetaRule::Optimal => opt.theta(),
            ThetaRule::Constant(v) => *v,
            ThetaRule::Custom(f) => f(t, st.y),
        };
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Range {
                name: "theta",
                value: theta,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let pi = match &self.policy.pi_rule {
            PiRule::Optimal => terms.pi,
            PiRule::Constant(v) => *v,
            PiRule::Proportional(k) => k * st.x,
            PiRule::Backward(c) => crate::backward::backward_pi(c, m, t, st.y),
            PiRule::Custom(f) => f(t, st.x, st.y),
        };
        if !pi.is_finite() {
            return Err(Error::NonFinite(format!("investment at t={t}")));
        }
        let b = self.principle.reinsurance_premium(m, t, st.y, theta)?;
        Ok((Control { theta, pi }, terms.a - b, terms.g, terms.h, t))
    }

    /// Advances one Euler step; returns the control applied on the step.
    fn step(
        &self,
        st: &mut PathState,
        rng: &mut ChaCha8Rng,
        mut claims: Option<&mut Vec<(f64, f64)>>,
    ) -> Result<Control> {
        let m = self.market;
        let h = self.cfg.step();
        let sq = h.sqrt();
        let (ctrl, net_premium, g, hv, t) = self.controls(st)?;
        let z: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let w = m.corr.correlate(z);
        let (dwy, dws, dwp) = (w[0] * sq, w[1] * sq, w[2] * sq);
        let (mu, sigma) = (m.mu(t, st.y), m.sigma(t, st.y));
        let (y0, lam0) = (st.y, m.lambda(t, st.y));

        let mut x = st.x + (net_premium + ctrl.pi * mu) * h + ctrl.pi * sigma * dws;
        let y1 = y0 + m.alpha(t, y0) * h + m.beta(t, y0) * dwy;
        st.s *= ((mu - 0.5 * sigma * sigma) * h + sigma * dws).exp();
        st.p += g * h + hv * dwp;
        st.admissibility += (ctrl.pi.abs() * mu.abs() + ctrl.pi * ctrl.pi * sigma * sigma) * h;

        let t1 = t + h;
        let lam1 = m.lambda(t1, y1);
        st.compensator += 0.5 * (lam0 + lam1) * h;
        let bound = self.cfg.thinning_margin * lam0.max(lam1);
        if bound > 0.0 {
            let mut tau = t;
            loop {
                let gap: f64 = rng.sample(Exp1);
                tau += gap / bound;
                if tau > t1 {
                    break;
                }
                let w = (tau - t) / h;
                let lam = m.lambda(tau, y0 + w * (y1 - y0));
                if lam > bound {
                    return Err(Error::ThinningBoundExceeded {
                        t: tau,
                        intensity: lam,
                        bound,
                    });
                }
                if rng.random::<f64>() * bound < lam {
                    let size = self.sampler.sample(rng);
                    x -= (1.0 - ctrl.theta) * size;
                    st.n_claims += 1;
                    if let Some(c) = claims.as_deref_mut() {
                        c.push((t1, size));
                    }
                }
            }
        }
        if !(x.is_finite() && y1.is_finite() && st.p.is_finite()) {
            return Err(Error::NonFinite(format!("state after step at t={t}")));
        }
        st.x = x;
        st.y = y1;
        st.step += 1;
        Ok(ctrl)
    }

    /// Runs `st` forward to node `until` without recording.
    pub fn advance(&self, st: &mut PathState, until: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let until = until.min(self.cfg.n_steps());
        while st.step < until {
            self.step(st, rng, None)?;
        }
        Ok(())
    }

    pub fn path_rng(&self, path: u64) -> ChaCha8Rng {
        path_rng(self.cfg.seed, tag::PATHS, path)
    }

    /// Recorded node indices.
    pub fn recorded_nodes(&self) -> Vec<usize> {
        let n = self.cfg.n_steps();
        let mut v: Vec<usize> = (0..=n).step_by(self.cfg.record_stride).collect();
        if *v.last().unwrap() != n {
            v.push(n);
        }
        v
    }

    /// Simulates one full path with recording at the stride nodes.
    pub fn simulate_path(&self, path: u64) -> Result<PathRecord> {
        let n = self.cfg.n_steps();
        let stride = self.cfg.record_stride;
        let cap = n / stride + 2;
        let mut rec = PathRecord {
            path,
            y: Vec::with_capacity(cap),
            s: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            p: Vec::with_capacity(cap),
            theta: Vec::with_capacity(cap),
            pi: Vec::with_capacity(cap),
            claims: Vec::new(),
            n_claims: 0,
            compensator: 0.0,
            admissibility: 0.0,
        };
        let mut rng = self.path_rng(path);
        let mut st = self.initial_state();
        for k in 0..=n {
            let keep = k % stride == 0 || k == n;
            if keep {
                rec.y.push(st.y);
                rec.s.push(st.s);
                rec.x.push(st.x);
                rec.p.push(st.p);
            }
            let ctrl = if k < n {
                self.step(&mut st, &mut rng, Some(&mut rec.claims))?
            } else {
                self.controls(&mut st)?.0
            };
            if keep {
                rec.theta.push(ctrl.theta);
                rec.pi.push(ctrl.pi);
            }
        }
        rec.n_claims = st.n_claims;
        rec.compensator = st.compensator;
        rec.admissibility = st.admissibility;
        Ok(rec)
    }

    /// Full path bundle. Memory grows with `n_paths × nodes`; use
    /// [`Simulator::batched`] for large runs.
    pub fn simulate(&self) -> Result<PathBundle> {
        let paths = (0..self.cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| self.simulate_path(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathBundle {
            t_grid: self
                .recorded_nodes()
                .iter()
                .map(|&k| self.cfg.time(k))
                .collect(),
            paths,
            seed: self.cfg.seed,
            gamma: self.market.gamma,
        })
    }

    /// Applies `f` to every path and averages the resulting vectors within
    /// each of `cfg.batches` contiguous batches. Paths are never all held in
    /// memory at once; the reduction order is fixed.
    pub fn batched<F>(&self, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&PathRecord) -> Vec<f64> + Sync,
    {
        let n = self.cfg.n_paths;
        let nb = self.cfg.batches.min(n);
        let size = n / nb;
        let mut out = Vec::with_capacity(nb);
        for b in 0..nb {
            let lo = b * size;
            let hi = if b + 1 == nb { n } else { lo + size };
            let rows = (lo as u64..hi as u64)
                .into_par_iter()
                .map(|i| self.simulate_path(i).map(|r| f(&r)))
                .collect::<Result<Vec<_>>>()?;
            let width = rows.first().map_or(0, |r| r.len());
            let mut acc = vec![0.0; width];
            for r in &rows {
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += v;
                }
            }
            let cnt = (hi - lo) as f64;
            acc.iter_mut().for_each(|a| *a /= cnt);
            out.push(acc);
        }
        Ok(out)
    }

    /// Applies `f` to every path and returns the values in path order.
    pub fn map_paths<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&PathRecord) -> T + Sync,
    {
        (0..self.cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| self.simulate_path(i).map(|r| f(&r)))
            .collect()
    }
}
