//! Gaussian-limit sampling, sup-norm tails `γ(u) = P(max_t |ζ(t)| > u)`,
//! quantiles `U(ε)`, uniform confidence bands for Monte-Carlo integrals and
//! an empirical CLT check.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::processes::{
    empirical_covariance, wiener_bridge_sup, CovarianceMatrix, Domain, PathEnsemble, Sampler,
};
use crate::rng::{derive_seed, stream_rng, StreamRng};

const LABEL_DRAWS: u64 = 0xD1;
const LABEL_LIMIT: u64 = 0xD2;
const LABEL_REFERENCE: u64 = 0xD3;
const LABEL_PILOT: u64 = 0xD4;
const LABEL_BRIDGE: u64 = 0xD5;
const LABEL_RUN: u64 = 0xD6;

/// Paths generated per matrix product; fixed so results do not depend on
/// scheduling.
const BATCH: usize = 256;

/// Centered Gaussian process with a given covariance, sampled as `L z`.
#[derive(Debug, Clone)]
pub struct GaussianLimitSampler {
    cov: CovarianceMatrix,
    /// Nodes with positive variance; the others are identically zero.
    active: Vec<usize>,
    chol: DMatrix<f64>,
    jitter_used: f64,
}

impl GaussianLimitSampler {
    /// Cholesky factor of the covariance restricted to its positive-variance
    /// nodes. Jitter starts at `10⁻¹²·max diag` and grows tenfold up to
    /// `10⁻⁶·max diag`.
    pub fn new(cov: CovarianceMatrix) -> Result<Self> {
        let r = cov.entries();
        let active: Vec<usize> = (0..cov.size()).filter(|&i| r[(i, i)] > 0.0).collect();
        let max_diag = cov.max_variance();
        let sub = DMatrix::from_fn(active.len(), active.len(), |a, b| r[(active[a], active[b])]);
        if active.is_empty() {
            return Ok(Self {
                cov,
                active,
                chol: DMatrix::zeros(0, 0),
                jitter_used: 0.0,
            });
        }
        let mut jitter = 0.0;
        loop {
            let mut m = sub.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(c) = m.cholesky() {
                return Ok(Self {
                    cov,
                    active,
                    chol: c.l(),
                    jitter_used: jitter,
                });
            }
            jitter = if jitter == 0.0 {
                1e-12 * max_diag
            } else {
                jitter * 10.0
            };
            if jitter > 1e-6 * max_diag * (1.0 + 1e-9) {
                let min_diagonal = sub.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
                return Err(Error::NotPositiveSemidefinite {
                    jitter: jitter / 10.0,
                    min_diagonal,
                });
            }
        }
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.cov
    }

    /// Lower-triangular factor over the positive-variance nodes.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// `count` paths; path `i` takes its normals from stream `i`.
    pub fn sample(&self, count: usize, master_seed: u64) -> PathEnsemble {
        let domain = self.cov.domain().clone();
        let m = domain.len();
        let a = self.active.len();
        let mut data = vec![0.0; count * m];
        if a > 0 {
            data.par_chunks_mut(BATCH * m)
                .enumerate()
                .for_each(|(b, chunk)| {
                    let rows = chunk.len() / m;
                    let mut z = DMatrix::zeros(a, rows);
                    for c in 0..rows {
                        let mut rng = stream_rng(master_seed, (b * BATCH + c) as u64);
                        for v in z.column_mut(c).iter_mut() {
                            *v = rng.sample(StandardNormal);
                        }
                    }
                    let x = &self.chol * z;
                    for c in 0..rows {
                        let out = &mut chunk[c * m..(c + 1) * m];
                        for (k, &node) in self.active.iter().enumerate() {
                            out[node] = x[(k, c)];
                        }
                    }
                });
        }
        PathEnsemble::new(domain, count, data, master_seed).expect("shape is consistent")
    }
}

/// Samples the centered Gaussian process with covariance `cov`.
pub fn gaussian_limit_sample(
    cov: &CovarianceMatrix,
    count: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    Ok(GaussianLimitSampler::new(cov.clone())?.sample(count, master_seed))
}

/// Empirical exceedance curve of a sup-norm sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub u_grid: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Wilson-interval half-width at one standard error.
    pub std_err: Vec<f64>,
    pub replicas: usize,
}

fn wilson_half_width(p: f64, r: f64) -> f64 {
    (p * (1.0 - p) / r + 1.0 / (4.0 * r * r)).sqrt() / (1.0 + 1.0 / r)
}

impl TailCurve {
    /// Curve on a given increasing grid.
    pub fn from_sups(sups: &[f64], u_grid: &[f64]) -> Result<Self> {
        if sups.is_empty() {
            return Err(Error::InsufficientData("empty sup sample".into()));
        }
        if u_grid.is_empty() || u_grid.windows(2).any(|w| w[1] <= w[0]) || u_grid[0] < 0.0 {
            return Err(Error::invalid(
                "u_grid",
                "need increasing nonnegative values",
            ));
        }
        let sorted = crate::stats::sorted(sups);
        let r = sorted.len() as f64;
        let gamma: Vec<f64> = u_grid
            .iter()
            .map(|&u| (sorted.len() - sorted.partition_point(|&s| s <= u)) as f64 / r)
            .collect();
        Ok(Self {
            u_grid: u_grid.to_vec(),
            std_err: gamma.iter().map(|&p| wilson_half_width(p, r)).collect(),
            gamma,
            replicas: sorted.len(),
        })
    }

    /// Curve evaluated at `0` and at every distinct sample value.
    pub fn empirical(sups: &[f64]) -> Result<Self> {
        let mut grid = vec![0.0];
        for s in crate::stats::sorted(sups) {
            if s > *grid.last().expect("non-empty") {
                grid.push(s);
            }
        }
        Self::from_sups(sups, &grid)
    }
}

/// Exceedance curve of `max_j |path(t_j)|`.
pub fn sup_tail(ens: &PathEnsemble, u_grid: &[f64]) -> Result<TailCurve> {
    TailCurve::from_sups(&ens.sup_norms(), u_grid)
}

/// Expected exceedances at the target level needed by [`quantile_u`].
pub const MIN_EXCEEDANCES: usize = 100;

/// Maximal root of `γ(u) = ε` by linear interpolation of the curve.
///
/// Requires `replicas · ε ≥ 100` so that about 100 exceedances support the
/// level; otherwise a resolution error asks for more replicas.
pub fn quantile_u(curve: &TailCurve, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1]"));
    }
    let expected = curve.replicas as f64 * epsilon;
    if expected < MIN_EXCEEDANCES as f64 {
        return Err(Error::Resolution {
            epsilon,
            observed: expected.floor() as usize,
            required: MIN_EXCEEDANCES,
        });
    }
    let g = &curve.gamma;
    let u = &curve.u_grid;
    if g[0] < epsilon {
        return Ok(u[0]);
    }
    let i = g
        .iter()
        .rposition(|&v| v >= epsilon)
        .expect("g[0] >= epsilon");
    if i + 1 == g.len() {
        return Err(Error::InsufficientData(format!(
            "tail curve stays above {epsilon} on its whole grid"
        )));
    }
    let (g0, g1) = (g[i], g[i + 1]);
    Ok(u[i] + (g0 - epsilon) / (g0 - g1) * (u[i + 1] - u[i]))
}

/// `γ(u) ≈ K u^{κ-1} exp(-u²/(2σ²))` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub k: f64,
    pub kappa: f64,
    pub kappa_minus_one: f64,
    pub rmse: f64,
    pub points: usize,
}

/// Fits `log γ(u) + u²/(2σ²) = log K + (κ-1) log u` on the points with
/// `γ ∈ [10⁻⁴, 10⁻¹]`.
pub fn tail_fit(curve: &TailCurve, sigma2: f64) -> Result<TailFit> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "must be positive"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .u_grid
        .iter()
        .zip(&curve.gamma)
        .filter(|(&u, &g)| u > 0.0 && (1e-4..=1e-1).contains(&g))
        .map(|(&u, &g)| (u.ln(), g.ln() + u * u / (2.0 * sigma2)))
        .unzip();
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "tail fit needs 5 points with gamma in [1e-4, 1e-1], found {}",
            x.len()
        )));
    }
    let f = crate::stats::linear_fit(&x, &y)
        .ok_or_else(|| Error::InsufficientData("degenerate tail points".into()))?;
    let rmse = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - f.intercept - f.slope * a).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    Ok(TailFit {
        k: f.intercept.exp(),
        kappa: f.slope + 1.0,
        kappa_minus_one: f.slope,
        rmse,
        points: x.len(),
    })
}

/// Law of the random parameter `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaLaw {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for BetaLaw {
    fn default() -> Self {
        BetaLaw::Uniform {
            low: -1.0,
            high: 1.0,
        }
    }
}

impl BetaLaw {
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            BetaLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            BetaLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BetaLaw::Uniform { low, high }
                if !(high > low && low.is_finite() && high.is_finite()) =>
            {
                Err(Error::invalid("beta", "need finite low < high"))
            }
            BetaLaw::Normal { mean, sd } if !(sd >= 0.0 && mean.is_finite() && sd.is_finite()) => {
                Err(Error::invalid("beta", "need finite mean and sd >= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Integrand `v(t, β)` together with the law of `β`.
pub trait BandModel: Sync {
    fn domain(&self) -> &Domain;
    /// Writes `v(t_j, β)` for one fresh draw of `β`.
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]);
}

/// `v(t, x) = cos(t) · x`.
#[derive(Debug, Clone)]
pub struct CosineTimesBeta {
    domain: Domain,
    cos: Vec<f64>,
    law: BetaLaw,
}

impl CosineTimesBeta {
    pub fn new(domain: Domain, law: BetaLaw) -> Result<Self> {
        law.validate()?;
        let cos = domain.positions().iter().map(|t| t.cos()).collect();
        Ok(Self { domain, cos, law })
    }
}

impl BandModel for CosineTimesBeta {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let x = self.law.draw(rng);
        for (o, c) in out.iter_mut().zip(&self.cos) {
            *o = c * x;
        }
    }
}

/// `v(t, x) = cos(t)`, free of the parameter.
#[derive(Debug, Clone)]
pub struct ParameterFree {
    domain: Domain,
    cos: Vec<f64>,
    law: BetaLaw,
}

impl ParameterFree {
    pub fn new(domain: Domain, law: BetaLaw) -> Result<Self> {
        law.validate()?;
        let cos = domain.positions().iter().map(|t| t.cos()).collect();
        Ok(Self { domain, cos, law })
    }
}

impl BandModel for ParameterFree {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let _ = self.law.draw(rng);
        out.copy_from_slice(&self.cos);
    }
}

/// Tabulated `v(t_j, x_i)`: a header row of nodes `t_j` and one row per
/// sample point `x_i`; `β` is drawn uniformly among the rows.
#[derive(Debug, Clone)]
pub struct TabulatedIntegrand {
    domain: Domain,
    rows: usize,
    values: Vec<f64>,
}

impl TabulatedIntegrand {
    pub fn from_csv(path: &Path) -> Result<Self> {
        // same layout as a table of paths, without centering
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let header: Vec<f64> = reader
            .headers()?
            .iter()
            .map(|h| {
                h.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("header `{h}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::new();
        let mut rows = 0;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(parse_err(format!("row {} has {} fields", i + 1, rec.len())));
            }
            for f in rec.iter() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(format!("row {}: `{f}`: {e}", i + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("row {}: non-finite value", i + 1)));
                }
                values.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(parse_err("no rows".into()));
        }
        Ok(Self {
            domain: Domain::points(header)?,
            rows,
            values,
        })
    }
}

impl BandModel for TabulatedIntegrand {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let m = out.len();
        let r = rng.random_range(0..self.rows);
        out.copy_from_slice(&self.values[r * m..(r + 1) * m]);
    }
}

/// Settings for [`param_integral_band`] and [`band_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandConfig {
    pub n: usize,
    pub epsilon: f64,
    /// Gaussian-limit replicas for the quantile.
    pub replicas: usize,
    /// The reference `I_N` uses `N = reference_factor · n`.
    pub reference_factor: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            epsilon: 0.05,
            replicas: 4000,
            reference_factor: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub epsilon: f64,
    pub u_eps: f64,
    pub n: usize,
    /// `U(ε) / √n`.
    pub band_halfwidth: f64,
    pub nodes: Vec<f64>,
    pub i_n: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub jitter_used: f64,
    pub limit_replicas: usize,
}

impl BandResult {
    /// `max_t |I_n(t) - reference(t)| ≤ halfwidth`.
    pub fn covers(&self, reference: &[f64]) -> bool {
        self.i_n
            .iter()
            .zip(reference)
            .all(|(a, b)| (a - b).abs() <= self.band_halfwidth)
    }
}

/// Mean of `count` draws of `v(·, β)`; draw `j` uses stream `j`.
pub fn integral_estimate(model: &dyn BandModel, count: usize, master_seed: u64) -> Vec<f64> {
    draws(model, count, master_seed).column_means()
}

fn draws(model: &dyn BandModel, count: usize, master_seed: u64) -> PathEnsemble {
    PathEnsemble::generate(model.domain().clone(), count, master_seed, |j, row| {
        let mut rng = stream_rng(master_seed, j as u64);
        model.draw(&mut rng, row);
    })
}

/// Uniform band `I_n ± U(ε)/√n`. The limit covariance is the unbiased
/// sample covariance of the same `n` draws that give `I_n`.
pub fn param_integral_band(
    model: &dyn BandModel,
    cfg: &BandConfig,
    master_seed: u64,
) -> Result<BandResult> {
    if cfg.n < 2 {
        return Err(Error::invalid("n", "need at least 2 draws"));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    let sample = draws(model, cfg.n, derive_seed(master_seed, LABEL_DRAWS));
    let i_n = sample.column_means();
    let cov = empirical_covariance(&sample)?;
    let limit = GaussianLimitSampler::new(cov)?;
    let sups = limit
        .sample(cfg.replicas, derive_seed(master_seed, LABEL_LIMIT))
        .sup_norms();
    let u_eps = quantile_u(&TailCurve::empirical(&sups)?, cfg.epsilon)?.max(0.0);
    let h = u_eps / (cfg.n as f64).sqrt();
    Ok(BandResult {
        epsilon: cfg.epsilon,
        u_eps,
        n: cfg.n,
        band_halfwidth: h,
        nodes: model.domain().positions(),
        lower: i_n.iter().map(|v| v - h).collect(),
        upper: i_n.iter().map(|v| v + h).collect(),
        i_n,
        jitter_used: limit.jitter_used(),
        limit_replicas: cfg.replicas,
    })
}

/// High-`N` reference value of `I(t)`.
pub fn reference_integral(model: &dyn BandModel, cfg: &BandConfig, master_seed: u64) -> Vec<f64> {
    integral_estimate(
        model,
        cfg.n * cfg.reference_factor,
        derive_seed(master_seed, LABEL_REFERENCE),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub runs: usize,
    pub covered: usize,
    pub coverage: f64,
    pub reference_n: usize,
    pub mean_u_eps: f64,
}

/// Fraction of independent runs whose band contains the reference `I_N`
/// uniformly in `t`. Run `r` uses the master seed derived from `(seed, r)`.
pub fn band_coverage(
    model: &dyn BandModel,
    cfg: &BandConfig,
    runs: usize,
    master_seed: u64,
) -> Result<CoverageReport> {
    let reference = reference_integral(model, cfg, master_seed);
    let run_seed = derive_seed(master_seed, LABEL_RUN);
    let results = (0..runs)
        .into_par_iter()
        .map(|r| param_integral_band(model, cfg, derive_seed(run_seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let covered = results.iter().filter(|b| b.covers(&reference)).count();
    Ok(CoverageReport {
        runs,
        covered,
        coverage: covered as f64 / runs.max(1) as f64,
        reference_n: cfg.n * cfg.reference_factor,
        mean_u_eps: results.iter().map(|b| b.u_eps).sum::<f64>() / runs.max(1) as f64,
    })
}

/// Two-sample Kolmogorov–Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = crate::stats::sorted(a);
    let b = crate::stats::sorted(b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "KS needs two nonempty samples".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Settings for [`clt_empirical_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub threshold: f64,
    /// Gaussian-limit sample size as a multiple of `replicas`.
    pub limit_factor: usize,
    /// Pilot sample size for the covariance, as a multiple of `replicas`.
    pub pilot_factor: usize,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            limit_factor: 10,
            pilot_factor: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltTestReport {
    pub n: usize,
    pub replicas: usize,
    pub limit_replicas: usize,
    pub pilot_replicas: usize,
    pub ks_distance: f64,
    pub threshold: f64,
    pub pass: bool,
    pub jitter_used: f64,
}

/// KS distance between `max_t |ζ_n(t)|` and the sup of the Gaussian process
/// with the pilot-sample covariance of the base process.
pub fn clt_empirical_test(
    sampler: &Sampler,
    n: usize,
    replicas: usize,
    master_seed: u64,
    cfg: &CltConfig,
) -> Result<CltTestReport> {
    if n == 0 || replicas < 2 {
        return Err(Error::invalid("n", "need n >= 1 and at least 2 replicas"));
    }
    let zeta = sampler
        .normalized_sum(n, replicas, master_seed)?
        .sup_norms();
    let pilot_replicas = cfg.pilot_factor.max(1) * replicas;
    let pilot = sampler.sample(pilot_replicas, derive_seed(master_seed, LABEL_PILOT));
    let limit = GaussianLimitSampler::new(empirical_covariance(&pilot)?)?;
    let limit_replicas = cfg.limit_factor.max(1) * replicas;
    let gauss = limit
        .sample(limit_replicas, derive_seed(master_seed, LABEL_LIMIT))
        .sup_norms();
    let ks_distance = ks_two_sample(&zeta, &gauss)?;
    Ok(CltTestReport {
        n,
        replicas,
        limit_replicas,
        pilot_replicas,
        ks_distance,
        threshold: cfg.threshold,
        pass: ks_distance < cfg.threshold,
        jitter_used: limit.jitter_used(),
    })
}

/// `P(sup_{[0,1]} W > level)` from Cholesky samples on `j/nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerSupReport {
    pub replicas: usize,
    pub nodes: usize,
    pub level: f64,
    /// With the exact Brownian-bridge maximum between nodes.
    pub bridge_estimate: f64,
    /// Maximum over the nodes only.
    pub discrete_estimate: f64,
    pub std_err: f64,
    /// `2(1 - Φ(level))`.
    pub oracle: f64,
    /// Oracle for node-only monitoring, `2(1 - Φ(level + 0.5826/√nodes))`.
    pub discrete_oracle: f64,
}

/// `-ζ(1/2)/√(2π)`, the shift of a Gaussian random walk's maximum.
const DISCRETE_MONITORING_SHIFT: f64 = 0.582_597_157_939_010_6;

/// Exceedance of the running maximum of Brownian motion over `[0, 1]`.
pub fn wiener_sup_exceedance(
    replicas: usize,
    nodes: usize,
    level: f64,
    master_seed: u64,
) -> Result<WienerSupReport> {
    if nodes < 2 || replicas < 2 {
        return Err(Error::invalid(
            "nodes",
            "need at least 2 nodes and 2 replicas",
        ));
    }
    let times: Vec<f64> = (1..=nodes).map(|j| j as f64 / nodes as f64).collect();
    let domain = Domain::points(times.clone())?;
    let cov = DMatrix::from_fn(nodes, nodes, |i, j| times[i].min(times[j]));
    let ens = gaussian_limit_sample(&CovarianceMatrix::new(domain, cov)?, replicas, master_seed)?;
    let bridge_seed = derive_seed(master_seed, LABEL_BRIDGE);
    let hits: Vec<(bool, bool)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let p = ens.path(i);
            let discrete = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > level;
            let mut rng = stream_rng(bridge_seed, i as u64);
            (wiener_bridge_sup(&times, p, &mut rng) > level, discrete)
        })
        .collect();
    let r = replicas as f64;
    let bridge = hits.iter().filter(|h| h.0).count() as f64 / r;
    let discrete = hits.iter().filter(|h| h.1).count() as f64 / r;
    let phi = Normal::standard();
    Ok(WienerSupReport {
        replicas,
        nodes,
        level,
        bridge_estimate: bridge,
        discrete_estimate: discrete,
        std_err: (bridge * (1.0 - bridge) / r).sqrt(),
        oracle: 2.0 * (1.0 - phi.cdf(level)),
        discrete_oracle: 2.0
            * (1.0 - phi.cdf(level + DISCRETE_MONITORING_SHIFT / (nodes as f64).sqrt())),
    })
}
