//! The experiment set: defaults, parameters and runners.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use toml::{Table, Value};

use fwdre_core::backward::{backward_pi, solve_quadratic_ansatz};
use fwdre_core::config::ModelConfig;
use fwdre_core::forward::{optimal_pi, PenalizerSpec};
use fwdre_core::market::{linspace, ClaimSizeDist, EvalGrid};
use fwdre_core::presets::{self, StockRegime, LARGE_CLAIMS, LOADINGS, SMALL_CLAIMS};
use fwdre_core::reinsurance::{optimal_theta, DEFAULT_TOL};
use fwdre_core::sim::{
    cce_ordering_conditions, cce_report, martingale_diagnostic_streamed, CceEstimate,
    OrderingVerdict, SimConfig, Simulator, StrategyPolicy,
};

use crate::error::{Result, XpError};
use crate::output::{PlotSpec, Table as Out};

pub struct ExperimentInfo {
    pub id: &'static str,
    pub summary: &'static str,
    /// What the experiment shows and how to read the output.
    pub details: &'static str,
    /// `(file, column description)`
    pub outputs: &'static [(&'static str, &'static str)],
}

pub const EXPERIMENTS: [ExperimentInfo; 7] = [
    ExperimentInfo {
        id: "theta-vs-y",
        summary: "optimal retention over the factor level",
        details: "Optimal retention level over a grid of factor values at a fixed time, \
                  for large and small claims and for the default, expensive and cheap \
                  reinsurance loadings. Small claims are fully reinsured below a threshold \
                  factor level; large-claim retentions sit near 0.85.",
        outputs: &[(
            "theta_vs_y.csv",
            "y, then one column `<scale label>_<delta_i>_<delta_r>` per loading pair and claim scale",
        )],
    },
    ExperimentInfo {
        id: "theta-paths",
        summary: "optimal retention along simulated factor paths",
        details: "Simulates the factor and evaluates the optimal retention at every grid \
                  node for each claim scale. Shows the range the retention actually \
                  visits over the horizon.",
        outputs: &[("theta_paths.csv", "path, t, y, then `theta_<scale label>` per claim scale")],
    },
    ExperimentInfo {
        id: "pi-vs-y",
        summary: "optimal investment for the h1/h2/h3 penalizers over the factor level",
        details: "Forward-optimal amount invested in the stock over the factor level for the \
                  zero-volatility (h1), drift-coupled (h2) and claims-coupled (h3) \
                  penalizers, under the volatility-driven, drift-driven and combined stock \
                  coefficient regimes.",
        outputs: &[("pi_vs_y.csv", "y, then `<regime>_pi1`, `<regime>_pi2`, `<regime>_pi3` per regime")],
    },
    ExperimentInfo {
        id: "fb-compare",
        summary: "forward myopic vs fixed-horizon investment",
        details: "Myopic forward investment against the fixed-horizon optimal investment from \
                  the quadratic value-function ansatz, over the factor level, for each \
                  factor-stock correlation. The gap grows with the correlation and \
                  vanishes at zero correlation.",
        outputs: &[(
            "fb_compare.csv",
            "y, forward, then `backward_rho<rho>` and `diff_rho<rho>` (backward minus forward) per correlation",
        )],
    },
    ExperimentInfo {
        id: "cce",
        summary: "certainty equivalents of forward and fixed-horizon preferences",
        details: "Conditional certainty equivalents over time for the forward utility and for \
                  the static exponential utility at the horizon, with 95% batch-means \
                  intervals, plus the sufficient ordering conditions evaluated on a grid. \
                  Run once with the default settings (positive zero-volatility drift) and \
                  once with low volatility and small claims (negative drift) to see both \
                  orderings.",
        outputs: &[
            (
                "cce.csv",
                "t, forward, forward_lo, forward_hi, static, static_lo, static_hi, mean, mean_lo, mean_hi",
            ),
            (
                "cce_ordering.csv",
                "cond_i_printed, cond_i_scaled, k_inf, cond_ii, g_min, g_max, verdict, g_sign \
                 (booleans as 0/1; verdicts +1 forward larger, -1 static larger, 0 undetermined)",
            ),
        ],
    },
    ExperimentInfo {
        id: "risk-aversion",
        summary: "risk-aversion process for several risk-aversion levels",
        details: "Conditional mean terminal wealth minus the forward certainty equivalent over \
                  time, for each risk-aversion coefficient. Zero at the horizon. A \
                  positive zero-volatility drift raises the forward certainty \
                  equivalent, so the process can turn negative when that drift outweighs \
                  the risk premium (the default settings at gamma = 1).",
        outputs: &[("risk_aversion.csv", "t, then `r_g<gamma>`, `r_g<gamma>_lo`, `r_g<gamma>_hi` per gamma")],
    },
    ExperimentInfo {
        id: "mg-check",
        summary: "martingale diagnostic of the forward utility",
        details: "Sample mean of the forward utility of wealth over time with batch-means \
                  standard errors, for the optimal strategy (flat) and for a fixed \
                  suboptimal strategy (decreasing). Deviations are in standard-error units.",
        outputs: &[(
            "mg_check.csv",
            "t, u_opt, se_opt, dev_opt, u_sub, se_sub, dev_sub",
        )],
    },
];

pub fn info(id: &str) -> Result<&'static ExperimentInfo> {
    EXPERIMENTS
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| XpError::UnknownExperiment(id.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    /// Evaluation time.
    pub t: f64,
}

impl Default for YGrid {
    fn default() -> Self {
        YGrid {
            y_min: -0.3,
            y_max: 0.3,
            n_y: 61,
            t: 0.0,
        }
    }
}

impl YGrid {
    fn ys(&self) -> Result<Vec<f64>> {
        if self.n_y == 0 || !(self.y_min <= self.y_max) {
            return Err(XpError::Config(
                "grid needs n_y >= 1 and y_min <= y_max".into(),
            ));
        }
        Ok(linspace(self.y_min, self.y_max, self.n_y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSet {
    /// Gamma scales of the claim sizes (the shape is taken from the model).
    pub scales: Vec<f64>,
    pub labels: Vec<String>,
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet {
            scales: vec![LARGE_CLAIMS, SMALL_CLAIMS],
            labels: vec!["large".into(), "small".into()],
        }
    }
}

impl ScaleSet {
    fn pairs(&self) -> Result<Vec<(&str, f64)>> {
        if self.scales.len() != self.labels.len() {
            return Err(XpError::Config(
                "`scales` and `labels` must have equal length".into(),
            ));
        }
        Ok(self
            .labels
            .iter()
            .map(String::as_str)
            .zip(self.scales.iter().copied())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaVsY {
    pub grid: YGrid,
    pub claims: ScaleSet,
    /// `[delta_i, delta_r]` pairs.
    pub loadings: Vec<[f64; 2]>,
}

impl Default for ThetaVsY {
    fn default() -> Self {
        ThetaVsY {
            grid: YGrid::default(),
            claims: ScaleSet::default(),
            loadings: LOADINGS.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaPaths {
    pub claims: ScaleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiVsY {
    pub grid: YGrid,
    pub regimes: Vec<StockRegime>,
}

impl Default for PiVsY {
    fn default() -> Self {
        PiVsY {
            grid: YGrid::default(),
            regimes: StockRegime::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbCompare {
    pub grid: YGrid,
    pub rhos: Vec<f64>,
}

impl Default for FbCompare {
    fn default() -> Self {
        FbCompare {
            grid: YGrid::default(),
            rhos: vec![0.4, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cce {
    pub t_nodes: Vec<f64>,
    /// Grid for the ordering conditions.
    pub ordering_y: [f64; 2],
    pub ordering_n_y: usize,
    pub ordering_n_t: usize,
}

impl Default for Cce {
    fn default() -> Self {
        Cce {
            t_nodes: linspace(0.0, 1.0, 11),
            ordering_y: [-0.25, 0.05],
            ordering_n_y: 31,
            ordering_n_t: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskAversion {
    pub t_nodes: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for RiskAversion {
    fn default() -> Self {
        RiskAversion {
            t_nodes: linspace(0.0, 1.0, 11),
            gammas: vec![0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgCheck {
    /// Constant retention and investment of the comparison strategy.
    pub suboptimal_theta: f64,
    pub suboptimal_pi: f64,
}

impl Default for MgCheck {
    fn default() -> Self {
        MgCheck {
            suboptimal_theta: 1.0,
            suboptimal_pi: 0.0,
        }
    }
}

fn to_table<T: Serialize>(v: &T) -> Table {
    match Value::try_from(v) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("parameter structs serialize to tables"),
    }
}

/// `{ model, params }` defaults for an experiment.
pub fn defaults(id: &str) -> Result<Table> {
    info(id)?;
    let sim = |n_paths, dt, record_stride, branch_count, batches| SimConfig {
        n_paths,
        dt,
        record_stride,
        branch_count,
        batches,
        ..SimConfig::default()
    };
    let (mut model, params) = match id {
        "theta-vs-y" => (
            presets::exponential_intensity(LARGE_CLAIMS, 0.3, 0.5),
            to_table(&ThetaVsY::default()),
        ),
        "theta-paths" => (
            presets::exponential_intensity(LARGE_CLAIMS, 0.3, 0.5),
            to_table(&ThetaPaths::default()),
        ),
        "pi-vs-y" => (
            presets::exponential_intensity(LARGE_CLAIMS, 0.3, 0.5),
            to_table(&PiVsY::default()),
        ),
        "fb-compare" => (
            presets::quadratic_intensity(0.0),
            to_table(&FbCompare::default()),
        ),
        "cce" => (presets::quadratic_intensity(0.0), to_table(&Cce::default())),
        "risk-aversion" => (
            presets::quadratic_intensity(0.0),
            to_table(&RiskAversion::default()),
        ),
        "mg-check" => (
            presets::quadratic_intensity(0.0),
            to_table(&MgCheck::default()),
        ),
        _ => unreachable!(),
    };
    model.sim = match id {
        "theta-paths" => sim(20, 1e-2, 1, 1, 2),
        "cce" => sim(1000, 1e-2, 1, 100, 20),
        "risk-aversion" => sim(500, 1e-2, 1, 100, 20),
        "mg-check" => sim(10_000, 1e-3, 10, 1, 50),
        _ => model.sim,
    };
    let mut t = Table::new();
    t.insert("model".into(), Value::Table(to_table(&model.to_value()?)));
    t.insert("params".into(), Value::Table(params));
    Ok(t)
}

pub fn parse_params<T: DeserializeOwned>(v: Value) -> Result<T> {
    v.try_into()
        .map_err(|e: toml::de::Error| XpError::Config(format!("[params]: {e}")))
}

fn with_scale(model: &ModelConfig, scale: f64) -> Result<ModelConfig> {
    let (shape, _) = model.claims.dist.gamma_params().ok_or_else(|| {
        XpError::Config("claim-scale sweeps need gamma or exponential claim sizes".into())
    })?;
    let mut m = model.clone();
    m.claims.dist = ClaimSizeDist::gamma(shape, scale);
    Ok(m)
}

fn theta_at(model: &ModelConfig, t: f64, y: f64) -> Result<f64> {
    let (m, p) = (model.market()?, model.principle()?);
    Ok(optimal_theta(&m, &p, t, y, DEFAULT_TOL)?.theta)
}

fn plot(title: &str, x_label: &str, y_label: &str, y_cols: Vec<usize>) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        x_col: 0,
        y_cols,
        group_col: None,
    }
}

pub fn theta_vs_y(model: &ModelConfig, p: &ThetaVsY) -> Result<Vec<Out>> {
    let ys = p.grid.ys()?;
    let mut cols = vec!["y".to_string()];
    let mut models = Vec::new();
    for &[di, dr] in &p.loadings {
        for (label, scale) in p.claims.pairs()? {
            let mut m = with_scale(model, scale)?;
            m.premium.delta_i = di;
            m.premium.delta_r = dr;
            cols.push(format!("{label}_{di}_{dr}"));
            models.push((m.market()?, m.principle()?));
        }
    }
    let n = cols.len();
    let mut out = Out::new("theta_vs_y", cols).with_plot(plot(
        "Optimal retention",
        "y",
        "theta",
        (1..n).collect(),
    ));
    for y in ys {
        let mut row = vec![y];
        for (m, pr) in &models {
            row.push(optimal_theta(m, pr, p.grid.t, y, DEFAULT_TOL)?.theta);
        }
        out.push(row);
    }
    Ok(vec![out])
}

pub fn theta_paths(model: &ModelConfig, p: &ThetaPaths) -> Result<Vec<Out>> {
    let (m, pr) = (model.market()?, model.principle()?);
    let sim = Simulator::new(
        &m,
        &pr,
        StrategyPolicy::optimal(),
        model.penalizer,
        model.sim,
    )?;
    let bundle = sim.simulate()?;
    let scaled = p
        .claims
        .pairs()?
        .into_iter()
        .map(|(label, s)| Ok((label, with_scale(model, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut cols: Vec<String> = ["path", "t", "y"].map(String::from).to_vec();
    cols.extend(scaled.iter().map(|(l, _)| format!("theta_{l}")));
    let mut out = Out::new("theta_paths", cols).with_plot(PlotSpec {
        title: "Optimal retention along factor paths".into(),
        x_label: "t".into(),
        y_label: "theta".into(),
        x_col: 1,
        y_cols: vec![3],
        group_col: Some(0),
    });
    for path in &bundle.paths {
        for (k, &t) in bundle.t_grid.iter().enumerate() {
            let y = path.y[k];
            let mut row = vec![path.path as f64, t, y];
            for (_, cfg) in &scaled {
                row.push(theta_at(cfg, t, y)?);
            }
            out.push(row);
        }
    }
    Ok(vec![out])
}

pub fn pi_vs_y(model: &ModelConfig, p: &PiVsY) -> Result<Vec<Out>> {
    let ys = p.grid.ys()?;
    let specs = [
        PenalizerSpec::H1Zero,
        PenalizerSpec::H2DriftCoupled,
        PenalizerSpec::H3ClaimsCoupled,
    ];
    let mut cols = vec!["y".to_string()];
    let mut markets = Vec::new();
    for r in &p.regimes {
        let mut m = model.clone();
        m.stock = r.stock();
        for i in 1..=3 {
            cols.push(format!("{}_pi{i}", r.name()));
        }
        markets.push(m.market()?);
    }
    let pr = model.principle()?;
    let n = cols.len();
    let mut out = Out::new("pi_vs_y", cols).with_plot(plot(
        "Optimal investment",
        "y",
        "pi",
        (1..n).collect(),
    ));
    for y in ys {
        let mut row = vec![y];
        for m in &markets {
            for spec in &specs {
                row.push(optimal_pi(m, spec, &pr, p.grid.t, model.risk.x0, y)?);
            }
        }
        out.push(row);
    }
    Ok(vec![out])
}

pub fn fb_compare(model: &ModelConfig, p: &FbCompare) -> Result<Vec<Out>> {
    let ys = p.grid.ys()?;
    let t = p.grid.t;
    let pr = model.principle()?;
    let fwd_market = model.market()?;
    let mut cols = vec!["y".to_string(), "forward".to_string()];
    let mut solved = Vec::new();
    for &rho in &p.rhos {
        let mut m = model.clone();
        m.correlation.rho = rho;
        let market = m.market()?;
        let coeffs =
            solve_quadratic_ansatz(&market, &pr, model.backward.horizon, model.backward.dt)?;
        cols.push(format!("backward_rho{rho}"));
        cols.push(format!("diff_rho{rho}"));
        solved.push((market, coeffs));
    }
    let k = p.rhos.len();
    let mut out = Out::new("fb_compare", cols).with_plot(plot(
        "Forward myopic vs fixed-horizon investment",
        "y",
        "pi",
        std::iter::once(1)
            .chain((0..k).map(|i| 2 + 2 * i))
            .collect(),
    ));
    for y in ys {
        let fwd = optimal_pi(
            &fwd_market,
            &PenalizerSpec::H1Zero,
            &pr,
            t,
            model.risk.x0,
            y,
        )?;
        let mut row = vec![y, fwd];
        for (market, coeffs) in &solved {
            let b = backward_pi(coeffs, market, t, y);
            row.extend([b, b - fwd]);
        }
        out.push(row);
    }
    Ok(vec![out])
}

fn est(e: &CceEstimate) -> [f64; 3] {
    [e.value, e.lo, e.hi]
}

fn verdict_code(v: OrderingVerdict) -> f64 {
    match v {
        OrderingVerdict::ForwardDominates => 1.0,
        OrderingVerdict::StaticDominates => -1.0,
        OrderingVerdict::Undetermined => 0.0,
    }
}

fn zero_vol(model: &ModelConfig) -> Result<()> {
    if model.penalizer.is_zero_vol() {
        Ok(())
    } else {
        Err(XpError::Config(
            "certainty equivalents need the zero-volatility penalizer (h1)".into(),
        ))
    }
}

pub fn cce(model: &ModelConfig, p: &Cce) -> Result<Vec<Out>> {
    zero_vol(model)?;
    let (m, pr) = (model.market()?, model.principle()?);
    let sim = Simulator::new(
        &m,
        &pr,
        StrategyPolicy::optimal(),
        model.penalizer,
        model.sim,
    )?;
    let report = cce_report(&sim, &p.t_nodes)?;
    let cols = [
        "t",
        "forward",
        "forward_lo",
        "forward_hi",
        "static",
        "static_lo",
        "static_hi",
        "mean",
        "mean_lo",
        "mean_hi",
    ]
    .map(String::from)
    .to_vec();
    let mut series = Out::new("cce", cols).with_plot(plot(
        "Conditional certainty equivalents",
        "t",
        "value",
        vec![1, 4, 7],
    ));
    for n in &report.nodes {
        let mut row = vec![n.t];
        row.extend(est(&n.forward));
        row.extend(est(&n.static_));
        row.extend(est(&n.cond_mean));
        series.push(row);
    }
    let grid = EvalGrid::uniform(
        (0.0, model.sim.horizon),
        p.ordering_n_t,
        (p.ordering_y[0], p.ordering_y[1]),
        p.ordering_n_y,
    );
    let o = cce_ordering_conditions(&m, &pr, &grid)?;
    let cols = [
        "cond_i_printed",
        "cond_i_scaled",
        "k_inf",
        "cond_ii",
        "g_min",
        "g_max",
        "verdict",
        "g_sign",
    ]
    .map(String::from)
    .to_vec();
    let mut ordering = Out::new("cce_ordering", cols);
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    ordering.push(vec![
        b(o.cond_i_printed),
        b(o.cond_i_scaled),
        o.k_inf,
        b(o.cond_ii),
        o.g_min,
        o.g_max,
        verdict_code(o.verdict),
        verdict_code(o.g_sign),
    ]);
    Ok(vec![series, ordering])
}

pub fn risk_aversion(model: &ModelConfig, p: &RiskAversion) -> Result<Vec<Out>> {
    zero_vol(model)?;
    let mut cols = vec!["t".to_string()];
    let mut reports = Vec::new();
    for &g in &p.gammas {
        let mut mc = model.clone();
        mc.risk.gamma = g;
        let (m, pr) = (mc.market()?, mc.principle()?);
        let sim = Simulator::new(&m, &pr, StrategyPolicy::optimal(), mc.penalizer, mc.sim)?;
        reports.push(cce_report(&sim, &p.t_nodes)?);
        cols.extend([
            format!("r_g{g}"),
            format!("r_g{g}_lo"),
            format!("r_g{g}_hi"),
        ]);
    }
    let k = p.gammas.len();
    let mut out = Out::new("risk_aversion", cols).with_plot(plot(
        "Risk-aversion process",
        "t",
        "R",
        (0..k).map(|i| 1 + 3 * i).collect(),
    ));
    for (i, &t) in p.t_nodes.iter().enumerate() {
        let mut row = vec![t];
        for r in &reports {
            row.extend(est(&r.nodes[i].risk_aversion));
        }
        out.push(row);
    }
    Ok(vec![out])
}

pub fn mg_check(model: &ModelConfig, p: &MgCheck) -> Result<Vec<Out>> {
    let (m, pr) = (model.market()?, model.principle()?);
    let run = |policy| -> Result<_> {
        let sim = Simulator::new(&m, &pr, policy, model.penalizer, model.sim)?;
        Ok(martingale_diagnostic_streamed(&sim)?)
    };
    let opt = run(StrategyPolicy::optimal())?;
    let sub = run(StrategyPolicy::constant(
        p.suboptimal_theta,
        p.suboptimal_pi,
    ))?;
    let cols = [
        "t", "u_opt", "se_opt", "dev_opt", "u_sub", "se_sub", "dev_sub",
    ]
    .map(String::from)
    .to_vec();
    let mut out =
        Out::new("mg_check", cols).with_plot(plot("Mean forward utility", "t", "E[U]", vec![1, 4]));
    let (d_opt, d_sub) = (opt.deviations(), sub.deviations());
    for k in 0..opt.t_nodes.len() {
        out.push(vec![
            opt.t_nodes[k],
            opt.mean[k],
            opt.stderr[k],
            d_opt[k],
            sub.mean[k],
            sub.stderr[k],
            d_sub[k],
        ]);
    }
    Ok(vec![out])
}

pub fn dispatch(id: &str, model: &ModelConfig, params: Value) -> Result<Vec<Out>> {
    match id {
        "theta-vs-y" => theta_vs_y(model, &parse_params(params)?),
        "theta-paths" => theta_paths(model, &parse_params(params)?),
        "pi-vs-y" => pi_vs_y(model, &parse_params(params)?),
        "fb-compare" => fb_compare(model, &parse_params(params)?),
        "cce" => cce(model, &parse_params(params)?),
        "risk-aversion" => risk_aversion(model, &parse_params(params)?),
        "mg-check" => mg_check(model, &parse_params(params)?),
        other => Err(XpError::UnknownExperiment(other.into())),
    }
}
