//! Combined insurance–financial market: factor, stock, claims and the
//! correlation between the three Brownian drivers.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad;

/// A coefficient function of `(t, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coef {
    Constant {
        value: f64,
    },
    /// `c0 + c1·y`
    Affine {
        c0: f64,
        c1: f64,
    },
    /// `c0 + c1·y + c2·y²`
    Quadratic {
        c0: f64,
        c1: f64,
        c2: f64,
    },
    /// Scott volatility `c·sqrt(eps1 + exp(eps2·y))`.
    Scott {
        c: f64,
        eps1: f64,
        eps2: f64,
    },
    /// `scale·exp(rate·y)`
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// Piecewise-linear in `y` (and in `t` when `t` is non-empty), flat
    /// outside the table. `values` is row-major with one row per `t` node.
    Tabulated {
        y: Vec<f64>,
        #[serde(default)]
        t: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Coef {
    pub fn constant(value: f64) -> Self {
        Coef::Constant { value }
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        Coef::Affine { c0, c1 }
    }

    pub fn quadratic(c0: f64, c1: f64, c2: f64) -> Self {
        Coef::Quadratic { c0, c1, c2 }
    }

    pub fn scott(c: f64, eps1: f64, eps2: f64) -> Self {
        Coef::Scott { c, eps1, eps2 }
    }

    pub fn exponential(scale: f64, rate: f64) -> Self {
        Coef::Exponential { scale, rate }
    }

    /// Intensity `λ₀·e^y` with `λ₀ = k·e^{−y0}`, so that `λ(·, y0) = k`.
    pub fn normalized_exponential(k: f64, y0: f64) -> Self {
        Coef::Exponential {
            scale: k * (-y0).exp(),
            rate: 1.0,
        }
    }

    /// Checks table shapes; built-in forms always pass.
    pub fn validate(&self) -> Result<()> {
        if let Coef::Tabulated { y, t, values } = self {
            let rows = t.len().max(1);
            if y.is_empty() || values.len() != rows * y.len() {
                return Err(Error::invalid(format!(
                    "tabulated coefficient needs {} values, got {}",
                    rows * y.len(),
                    values.len()
                )));
            }
            if !strictly_increasing(y) || !strictly_increasing(t) {
                return Err(Error::invalid("tabulated grid must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match *self {
            Coef::Constant { value } => value,
            Coef::Affine { c0, c1 } => c0 + c1 * y,
            Coef::Quadratic { c0, c1, c2 } => c0 + y * (c1 + c2 * y),
            Coef::Scott { c, eps1, eps2 } => c * (eps1 + (eps2 * y).exp()).sqrt(),
            Coef::Exponential { scale, rate } => scale * (rate * y).exp(),
            Coef::Tabulated {
                y: ref ys,
                t: ref ts,
                ref values,
            } => {
                let n = ys.len();
                if ts.is_empty() {
                    return lerp_table(ys, &values[..n], y);
                }
                let (i, w) = locate(ts, t);
                let lo = lerp_table(ys, &values[i * n..(i + 1) * n], y);
                if w == 0.0 {
                    return lo;
                }
                let hi = lerp_table(ys, &values[(i + 1) * n..(i + 2) * n], y);
                lo + w * (hi - lo)
            }
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

/// Index of the left node and the interpolation weight, clamped to the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

fn lerp_table(grid: &[f64], vals: &[f64], x: f64) -> f64 {
    if grid.len() == 1 {
        return vals[0];
    }
    let (i, w) = locate(grid, x);
    vals[i] + w * (vals[i + 1] - vals[i])
}

/// Factor dynamics `dY = α(t,Y)dt + β(t,Y)dW^Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub alpha: Coef,
    pub beta: Coef,
    pub y0: f64,
}

impl FactorModel {
    /// Vasicek factor `dY = (a1 + a2·Y)dt + β dW`.
    pub fn vasicek(a1: f64, a2: f64, beta: f64, y0: f64) -> Self {
        FactorModel {
            alpha: Coef::affine(a1, a2),
            beta: Coef::constant(beta),
            y0,
        }
    }
}

/// Stock dynamics `dS = μ(t,Y)S dt + σ(t,Y)S dW^S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockModel {
    pub mu: Coef,
    pub sigma: Coef,
    #[serde(default = "one")]
    pub s0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSpec", into = "TabulatedSpec")]
pub struct TabulatedDensity {
    z: Vec<f64>,
    f: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedSpec {
    z: Vec<f64>,
    density: Vec<f64>,
}

impl TryFrom<TabulatedSpec> for TabulatedDensity {
    type Error = Error;
    fn try_from(s: TabulatedSpec) -> Result<Self> {
        TabulatedDensity::new(s.z, s.density)
    }
}

impl From<TabulatedDensity> for TabulatedSpec {
    fn from(d: TabulatedDensity) -> Self {
        TabulatedSpec {
            z: d.z,
            density: d.f,
        }
    }
}

impl TabulatedDensity {
    /// Piecewise-linear density through `(z_i, f_i)`, renormalized to unit
    /// mass. Support must lie in `[0, ∞)`.
    pub fn new(z: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if z.len() < 2 || z.len() != density.len() {
            return Err(Error::invalid(
                "tabulated density needs >= 2 matching nodes",
            ));
        }
        if !strictly_increasing(&z) || z[0] < 0.0 {
            return Err(Error::invalid("density nodes must be increasing and >= 0"));
        }
        if density.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::invalid("density values must be finite and >= 0"));
        }
        let mut cdf = vec![0.0; z.len()];
        for i in 1..z.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (z[i] - z[i - 1]);
        }
        let mass = cdf[z.len() - 1];
        if mass <= 0.0 {
            return Err(Error::invalid("tabulated density has zero mass"));
        }
        let f = density.iter().map(|v| v / mass).collect();
        cdf.iter_mut().for_each(|c| *c /= mass);
        Ok(TabulatedDensity { z, f, cdf })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let n = self.z.len();
        if x < self.z[0] || x > self.z[n - 1] {
            return 0.0;
        }
        lerp_table(&self.z, &self.f, x)
    }

    /// Inverse CDF; exact for the piecewise-linear density.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = (self.cdf.partition_point(|&c| c <= u)).clamp(1, self.z.len() - 1) - 1;
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let target = u - self.cdf[i];
        let w = z1 - z0;
        let slope = (f1 - f0) / w;
        // Solve f0·d + ½·slope·d² = target for d in [0, w].
        let d = if slope.abs() < 1e-300 {
            if f0 > 0.0 {
                target / f0
            } else {
                0.0
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
            2.0 * target / (f0 + disc.sqrt()).max(1e-300)
        };
        z0 + d.clamp(0.0, w)
    }

    fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.z
            .windows(2)
            .map(|w| quad::integrate(|x| g(x) * self.pdf(x), w[0], w[1], 1e-300, 1e-13))
            .sum()
    }

    pub fn support_max(&self) -> f64 {
        self.z[self.z.len() - 1]
    }
}

/// Claim-size distribution. Gamma is parameterized by shape and SCALE
/// (mean = shape·scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimSizeDist {
    Gamma { shape: f64, scale: f64 },
    Exponential { mean: f64 },
    Tabulated(TabulatedDensity),
}

impl ClaimSizeDist {
    pub fn gamma(shape: f64, scale: f64) -> Self {
        ClaimSizeDist::Gamma { shape, scale }
    }

    /// `(shape, scale)` for the Gamma family, including the exponential.
    pub fn gamma_params(&self) -> Option<(f64, f64)> {
        match *self {
            ClaimSizeDist::Gamma { shape, scale } => Some((shape, scale)),
            ClaimSizeDist::Exponential { mean } => Some((1.0, mean)),
            ClaimSizeDist::Tabulated(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((shape, scale)) = self.gamma_params() {
            if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                return Err(Error::invalid(format!(
                    "gamma claims need shape, scale > 0 (got {shape}, {scale})"
                )));
            }
        }
        Ok(())
    }

    /// Supremum of tilts `s` with `E[e^{sZ}] < ∞`.
    pub fn mgf_bound(&self) -> f64 {
        match self.gamma_params() {
            Some((_, scale)) => 1.0 / scale,
            None => f64::INFINITY,
        }
    }

    /// `E[Z^k e^{sZ}]` for `k` in `0..=2`.
    pub fn tilted_moment(&self, k: u32, s: f64) -> Result<f64> {
        let bound = self.mgf_bound();
        if !(s < bound) {
            return Err(Error::Domain { tilt: s, bound });
        }
        match self.gamma_params() {
            Some((shape, scale)) => {
                let kf = k as f64;
                let rising: f64 = (0..k).map(|j| shape + j as f64).product();
                let base = 1.0 - scale * s;
                let tilt = if s == 0.0 {
                    1.0
                } else {
                    base.powf(-(shape + kf))
                };
                Ok(rising * scale.powi(k as i32) * tilt)
            }
            None => match self {
                ClaimSizeDist::Tabulated(d) => Ok(d.expect(|z| z.powi(k as i32) * (s * z).exp())),
                _ => unreachable!(),
            },
        }
    }

    pub fn mean(&self) -> f64 {
        self.tilted_moment(1, 0.0).expect("mean is finite")
    }

    pub fn second_moment(&self) -> f64 {
        self.tilted_moment(2, 0.0).expect("second moment is finite")
    }

    /// Density, for quadrature against arbitrary integrands.
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            ClaimSizeDist::Tabulated(d) => d.pdf(z),
            _ => {
                let (shape, scale) = self.gamma_params().unwrap();
                if z <= 0.0 {
                    return if z == 0.0 && shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                ((shape - 1.0) * z.ln() - z / scale - ln_gamma(shape) - shape * scale.ln()).exp()
            }
        }
    }

    /// `E[g(Z)]` by adaptive quadrature.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        match self {
            ClaimSizeDist::Tabulated(d) => d.expect(g),
            _ => {
                let (_, scale) = self.gamma_params().unwrap();
                // Put the near-origin behaviour in its own panel.
                let head = quad::integrate(|z| g(z) * self.pdf(z), 0.0, scale, 1e-300, 1e-13);
                head + quad::integrate_to_infinity(|z| g(z) * self.pdf(z), scale, 1e-13)
            }
        }
    }
}

pub fn exp_moment(dist: &ClaimSizeDist, s: f64) -> Result<f64> {
    dist.tilted_moment(0, s)
}

pub fn tilted_mean(dist: &ClaimSizeDist, s: f64) -> Result<f64> {
    dist.tilted_moment(1, s)
}

pub fn tilted_second_moment(dist: &ClaimSizeDist, s: f64) -> Result<f64> {
    dist.tilted_moment(2, s)
}

/// Cox claim process: intensity `λ(t, Y_t)` and i.i.d. sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimModel {
    pub lambda: Coef,
    pub dist: ClaimSizeDist,
}

impl ClaimModel {
    pub fn mgf_bound(&self) -> f64 {
        self.dist.mgf_bound()
    }
}

/// Correlations between the drivers, ordered `(W^Y, W^S, W^P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationStructure {
    /// corr(W^Y, W^S)
    pub rho: f64,
    /// corr(W^S, W^P)
    pub rho_s: f64,
    /// corr(W^Y, W^P)
    pub rho_y: f64,
    pub chol: [[f64; 3]; 3],
}

impl CorrelationStructure {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        corr_matrix(self.rho, self.rho_s, self.rho_y)
    }

    /// Maps independent standard normals to correlated `(dW^Y, dW^S, dW^P)`.
    #[inline]
    pub fn correlate(&self, z: [f64; 3]) -> [f64; 3] {
        let l = &self.chol;
        [
            l[0][0] * z[0],
            l[1][0] * z[0] + l[1][1] * z[1],
            l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
        ]
    }
}

fn corr_matrix(rho: f64, rho_s: f64, rho_y: f64) -> [[f64; 3]; 3] {
    [[1.0, rho, rho_y], [rho, 1.0, rho_s], [rho_y, rho_s, 1.0]]
}

/// Validates the correlation triple and factorizes it. Non-PSD triples are
/// rejected rather than repaired.
pub fn build_correlation(rho: f64, rho_s: f64, rho_y: f64) -> Result<CorrelationStructure> {
    for (name, v) in [("rho", rho), ("rho_s", rho_s), ("rho_y", rho_y)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::Range {
                name,
                value: v,
                lo: -1.0,
                hi: 1.0,
            });
        }
    }
    let c = corr_matrix(rho, rho_s, rho_y);
    let m = Matrix3::from_fn(|i, j| c[i][j]);
    let min_eig = SymmetricEigen::new(m).eigenvalues.min();
    if min_eig < -1e-12 {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    // Semidefinite Cholesky: zero pivots produce zero columns.
    let mut l = [[0.0f64; 3]; 3];
    for j in 0..3 {
        let d = c[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        l[j][j] = d.max(0.0).sqrt();
        for i in j + 1..3 {
            let num = c[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = if l[j][j] > 1e-14 { num / l[j][j] } else { 0.0 };
        }
    }
    let out = CorrelationStructure {
        rho,
        rho_s,
        rho_y,
        chol: l,
    };
    let err = reconstruction_error(&out);
    if err > 1e-12 {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    Ok(out)
}

/// `‖LLᵀ − C‖_∞` (max-abs entry).
pub fn reconstruction_error(c: &CorrelationStructure) -> f64 {
    let m = c.matrix();
    let l = &c.chol;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
            worst = worst.max((v - m[i][j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedMarket {
    pub factor: FactorModel,
    pub stock: StockModel,
    pub claims: ClaimModel,
    pub corr: CorrelationStructure,
    pub gamma: f64,
    pub x0: f64,
    pub r0: f64,
}

impl CombinedMarket {
    pub fn new(
        factor: FactorModel,
        stock: StockModel,
        claims: ClaimModel,
        corr: CorrelationStructure,
        gamma: f64,
        x0: f64,
        r0: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "risk aversion must be > 0, got {gamma}"
            )));
        }
        if !(stock.s0 > 0.0) {
            return Err(Error::invalid("initial stock price must be > 0"));
        }
        if !(r0 > 0.0) {
            return Err(Error::invalid("initial surplus must be > 0"));
        }
        if !x0.is_finite() || !factor.y0.is_finite() {
            return Err(Error::invalid("initial wealth and factor must be finite"));
        }
        for c in [
            &factor.alpha,
            &factor.beta,
            &stock.mu,
            &stock.sigma,
            &claims.lambda,
        ] {
            c.validate()?;
        }
        claims.dist.validate()?;
        Ok(CombinedMarket {
            factor,
            stock,
            claims,
            corr,
            gamma,
            x0,
            r0,
        })
    }

    #[inline]
    pub fn alpha(&self, t: f64, y: f64) -> f64 {
        self.factor.alpha.eval(t, y)
    }
    #[inline]
    pub fn beta(&self, t: f64, y: f64) -> f64 {
        self.factor.beta.eval(t, y)
    }
    #[inline]
    pub fn mu(&self, t: f64, y: f64) -> f64 {
        self.stock.mu.eval(t, y)
    }
    #[inline]
    pub fn sigma(&self, t: f64, y: f64) -> f64 {
        self.stock.sigma.eval(t, y)
    }
    #[inline]
    pub fn lambda(&self, t: f64, y: f64) -> f64 {
        self.claims.lambda.eval(t, y)
    }
    pub fn dist(&self) -> &ClaimSizeDist {
        &self.claims.dist
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        if !(gamma > 0.0) {
            return Err(Error::invalid("risk aversion must be > 0"));
        }
        m.gamma = gamma;
        Ok(m)
    }

    pub fn with_correlation(&self, corr: CorrelationStructure) -> Self {
        let mut m = self.clone();
        m.corr = corr;
        m
    }
}

/// Finite `(t, y)` evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub ts: Vec<f64>,
    pub ys: Vec<f64>,
}

impl EvalGrid {
    pub fn uniform(t_range: (f64, f64), nt: usize, y_range: (f64, f64), ny: usize) -> Self {
        EvalGrid {
            ts: linspace(t_range.0, t_range.1, nt),
            ys: linspace(y_range.0, y_range.1, ny),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts
            .iter()
            .flat_map(move |&t| self.ys.iter().map(move |&y| (t, y)))
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub min: f64,
    pub max: f64,
    pub note: String,
}

/// Per-assumption outcome over a grid. Callers decide what to do on FAIL.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub warnings: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, min: f64, max: f64, note: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name: name.to_string(),
            passed,
            min,
            max,
            note: note.into(),
        });
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<5} {:<28} min={:<14.6e} max={:<14.6e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.min,
                c.max,
                c.note
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "WARN  {w}")?;
        }
        Ok(())
    }
}

fn min_max<I: Iterator<Item = f64>>(it: I) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        if v.is_nan() {
            (f64::NAN, f64::NAN)
        } else {
            (lo.min(v), hi.max(v))
        }
    })
}

/// Checks positivity of λ and σ, finiteness of the coefficients and of the
/// Sharpe ratio, and the claim moments needed at tilt γ.
pub fn validate_standing_assumptions(market: &CombinedMarket, grid: &EvalGrid) -> AssumptionReport {
    let mut r = AssumptionReport::default();
    let pts: Vec<(f64, f64)> = grid.points().collect();

    let (lo, hi) = min_max(pts.iter().map(|&(t, y)| market.lambda(t, y)));
    r.push(
        "intensity_positive",
        lo > 0.0 && hi.is_finite(),
        lo,
        hi,
        "lambda > 0",
    );

    let (lo, hi) = min_max(pts.iter().map(|&(t, y)| market.sigma(t, y)));
    r.push(
        "volatility_positive",
        lo > 0.0 && hi.is_finite(),
        lo,
        hi,
        "sigma > 0",
    );

    let (lo, hi) = min_max(
        pts.iter()
            .map(|&(t, y)| market.mu(t, y) / market.sigma(t, y)),
    );
    r.push(
        "sharpe_ratio_finite",
        lo.is_finite() && hi.is_finite(),
        lo,
        hi,
        "mu / sigma finite",
    );

    let (alo, ahi) = min_max(pts.iter().map(|&(t, y)| market.alpha(t, y)));
    let (blo, bhi) = min_max(pts.iter().map(|&(t, y)| market.beta(t, y)));
    r.push(
        "factor_coefficients",
        alo.is_finite() && ahi.is_finite() && blo >= 0.0 && bhi.is_finite(),
        blo,
        bhi,
        format!("alpha in [{alo:.6e}, {ahi:.6e}], beta >= 0"),
    );

    let dist = market.dist();
    let bound = dist.mgf_bound();
    let g = market.gamma;
    let at_boundary = (g - bound).abs() <= 1e-12 * bound.max(1.0);
    if g < bound && !at_boundary {
        let vals: Vec<Result<f64>> = vec![
            dist.tilted_moment(1, 0.0),
            dist.tilted_moment(0, g),
            dist.tilted_moment(1, g),
            dist.tilted_moment(2, g),
        ];
        let ok = vals.iter().all(|v| matches!(v, Ok(x) if x.is_finite()));
        let nums: Vec<f64> = vals.iter().map(|v| v.clone().unwrap_or(f64::NAN)).collect();
        let (lo, hi) = min_max(nums.iter().copied());
        r.push(
            "claim_moments_at_gamma",
            ok,
            lo,
            hi,
            format!("E[Z], E[e^(gZ)], E[Z e^(gZ)], E[Z^2 e^(gZ)] at g={g}"),
        );
    } else if at_boundary {
        r.push(
            "claim_moments_at_gamma",
            true,
            f64::NAN,
            f64::INFINITY,
            format!("tilt {g} sits on the mgf bound"),
        );
        r.warnings.push(format!(
            "risk aversion {g} equals the claim mgf bound {bound}: exponential moments are finite \
             only for retention 1 - theta < 1, so full retention is never optimal"
        ));
    } else {
        r.push(
            "claim_moments_at_gamma",
            false,
            f64::NAN,
            f64::INFINITY,
            format!("tilt {g} exceeds the mgf bound {bound}"),
        );
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn gamma_moments_closed_form() {
        let e1 = ClaimSizeDist::gamma(1.0, 1.0);
        assert_close(exp_moment(&e1, 0.0).unwrap(), 1.0, 1e-15);
        assert_close(exp_moment(&e1, 0.5).unwrap(), 2.0, 1e-14);
        assert_close(
            tilted_mean(&ClaimSizeDist::gamma(1.0, 2.0), 0.0).unwrap(),
            2.0,
            1e-14,
        );
        assert_close(tilted_mean(&e1, 0.5).unwrap(), 4.0, 1e-13);
        assert_close(tilted_second_moment(&e1, 0.0).unwrap(), 2.0, 1e-14);
        assert_close(
            tilted_second_moment(&ClaimSizeDist::gamma(2.0, 1.0), 0.0).unwrap(),
            6.0,
            1e-13,
        );
        assert_close(tilted_second_moment(&e1, 0.5).unwrap(), 16.0, 1e-12);
    }

    #[test]
    fn moments_fail_at_bound() {
        let d = ClaimSizeDist::gamma(1.0, 2.0);
        assert!(matches!(exp_moment(&d, 0.5), Err(Error::Domain { .. })));
        assert!(matches!(tilted_mean(&d, 0.7), Err(Error::Domain { .. })));
    }

    #[test]
    fn exponential_alias() {
        let a = ClaimSizeDist::Exponential { mean: 3.0 };
        let b = ClaimSizeDist::gamma(1.0, 3.0);
        for s in [0.0, 0.1, 0.3] {
            assert_eq!(
                a.tilted_moment(2, s).unwrap(),
                b.tilted_moment(2, s).unwrap()
            );
        }
    }

    #[test]
    fn tabulated_density_moments_and_quantile() {
        // Uniform on [0, 2].
        let d = TabulatedDensity::new(vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        let dist = ClaimSizeDist::Tabulated(d.clone());
        assert_close(dist.mean(), 1.0, 1e-13);
        assert_close(dist.second_moment(), 4.0 / 3.0, 1e-13);
        let s: f64 = 0.7;
        assert_close(
            exp_moment(&dist, s).unwrap(),
            ((2.0 * s).exp() - 1.0) / (2.0 * s),
            1e-12,
        );
        assert_close(d.quantile(0.25), 0.5, 1e-14);
        // Triangular density on [0, 1] rising to 1: cdf = z².
        let t = TabulatedDensity::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_close(t.quantile(0.49), 0.7, 1e-12);
        assert!(dist.mgf_bound().is_infinite());
    }

    #[test]
    fn coefficient_forms() {
        assert_close(
            Coef::scott(0.27, 0.01, 0.0).eval(0.0, 3.0),
            0.27 * 1.01f64.sqrt(),
            1e-15,
        );
        let lam = Coef::normalized_exponential(1.0, -0.2);
        assert_eq!(lam.eval(0.0, -0.2), 1.0);
        assert_close(Coef::quadratic(1.0, 1.0, 0.5).eval(0.0, 0.2), 1.22, 1e-15);
        let tab = Coef::Tabulated {
            y: vec![0.0, 1.0],
            t: vec![0.0, 1.0],
            values: vec![0.0, 1.0, 2.0, 3.0],
        };
        tab.validate().unwrap();
        assert_close(tab.eval(0.5, 0.5), 1.5, 1e-15);
        assert_close(tab.eval(0.0, 9.0), 1.0, 1e-15);
        let bad = Coef::Tabulated {
            y: vec![0.0, 1.0],
            t: vec![],
            values: vec![1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn correlation_examples() {
        let id = build_correlation(0.0, 0.0, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(id.chol[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let c = build_correlation(0.9, 0.9, 0.9).unwrap();
        assert!(reconstruction_error(&c) <= 1e-12);
        assert!(matches!(
            build_correlation(0.9, 0.9, -0.9),
            Err(Error::NotPsd { .. })
        ));
        assert!(matches!(
            build_correlation(1.2, 0.0, 0.0),
            Err(Error::Range { .. })
        ));
        // Perfect correlation is singular but admissible.
        let p = build_correlation(1.0, 0.0, 0.0).unwrap();
        assert!(reconstruction_error(&p) <= 1e-12);
    }
}
