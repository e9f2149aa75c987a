//! Covering numbers, entropy profiles and the Dudley integral
//! `∫_0^1 H^{1/2}(T, ρ, z) dz`.
//!
//! Divergence of an improper integral cannot be decided from finitely many
//! values, so [`dudley_check`] returns a trend verdict from an explicit
//! extrapolation model of the small-`ε` end of the profile.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::processes::{eta0_nodes, ETA0_T_MAX};
use crate::stats::linear_fit;

/// Finite metric space given by its distance matrix.
#[derive(Debug, Clone)]
pub struct MetricSample {
    ids: Vec<String>,
    dist: DMatrix<f64>,
    eccentricity: Vec<f64>,
}

/// Absolute triangle-inequality tolerance, scaled by `max(1, diameter)`.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

impl MetricSample {
    /// Validates symmetry, zero diagonal, nonnegativity and the triangle
    /// inequality.
    pub fn new(ids: Vec<String>, dist: DMatrix<f64>) -> Result<Self> {
        let n = dist.nrows();
        if n == 0 || dist.ncols() != n {
            return Err(Error::invalid("dist", "need a nonempty square matrix"));
        }
        if ids.len() != n {
            return Err(Error::invalid("points", "one id per row required"));
        }
        for i in 0..n {
            if dist[(i, i)] != 0.0 {
                return Err(Error::invalid("dist", format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = dist[(i, j)];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::invalid("dist", format!("bad entry at ({i}, {j})")));
                }
                if d != dist[(j, i)] {
                    return Err(Error::invalid("dist", format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let diameter = dist.amax();
        let tol = TRIANGLE_TOLERANCE * diameter.max(1.0);
        // symmetric, so column i of the column-major storage is row i
        let row = |i: usize| &dist.as_slice()[i * n..(i + 1) * n];
        let (violations, worst) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut count = 0usize;
                let mut worst = 0.0f64;
                let ri = row(i);
                for (j, &dij) in ri.iter().enumerate() {
                    for (a, b) in ri.iter().zip(row(j)) {
                        let excess = a - dij - b;
                        if excess > tol {
                            count += 1;
                            worst = worst.max(excess);
                        }
                    }
                }
                (count, worst)
            })
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
        if violations > 0 {
            return Err(Error::TriangleInequality { violations, worst });
        }
        let eccentricity = (0..n)
            .map(|i| dist.row(i).iter().cloned().fold(0.0, f64::max))
            .collect();
        Ok(Self {
            ids,
            dist,
            eccentricity,
        })
    }

    /// Points of the real line with `|x - y|`.
    pub fn from_line(points: &[f64]) -> Result<Self> {
        let n = points.len();
        let dist = DMatrix::from_fn(n, n, |i, j| (points[i] - points[j]).abs());
        Self::new((0..n).map(|i| i.to_string()).collect(), dist)
    }

    /// Square matrix with a header row of point ids; rows may carry the id
    /// as an extra leading field.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let mut ids: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if ids.first().is_some_and(|s| s.is_empty()) {
            ids.remove(0);
        }
        let n = ids.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let skip = match rec.len() {
                l if l == n => 0,
                l if l == n + 1 => 1,
                l => {
                    return Err(parse_err(format!(
                        "row {} has {l} fields, expected {n}",
                        i + 1
                    )))
                }
            };
            for f in rec.iter().skip(skip) {
                values.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("row {}: `{f}`: {e}", i + 1)))?,
                );
            }
            rows += 1;
        }
        if rows != n {
            return Err(parse_err(format!("{rows} rows for {n} columns")));
        }
        Self::new(ids, DMatrix::from_row_slice(n, n, &values))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    /// Distances from point `i` to every point.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist.as_slice()[i * n..(i + 1) * n]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn diameter(&self) -> f64 {
        self.eccentricity.iter().cloned().fold(0.0, f64::max)
    }
}

/// Greedy cover size with a packing count for bracketing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverCount {
    pub greedy: usize,
    /// Size of a maximal `ε`-separated set (largest found).
    pub packing: usize,
}

/// Greedy centers of closed `ε`-balls covering every point.
///
/// Each step picks, among uncovered points, the one whose ball covers the
/// most uncovered points; ties go to larger eccentricity, then lower index.
/// Centers are therefore pairwise more than `ε` apart.
pub fn greedy_centers(ms: &MetricSample, eps: f64) -> Vec<usize> {
    let n = ms.len();
    let mut gain: Vec<usize> = (0..n)
        .map(|i| ms.row(i).iter().filter(|&&d| d <= eps).count())
        .collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut centers = Vec::new();
    while left > 0 {
        let c = (0..n)
            .filter(|&i| !covered[i])
            .max_by(|&a, &b| {
                gain[a]
                    .cmp(&gain[b])
                    .then(ms.eccentricity[a].total_cmp(&ms.eccentricity[b]))
                    .then(b.cmp(&a))
            })
            .expect("an uncovered point remains");
        centers.push(c);
        for (p, &dcp) in ms.row(c).iter().enumerate() {
            if !covered[p] && dcp <= eps {
                covered[p] = true;
                left -= 1;
                for (g, &d) in gain.iter_mut().zip(ms.row(p)) {
                    if d <= eps {
                        *g -= 1;
                    }
                }
            }
        }
    }
    centers
}

fn extend_packing(
    ms: &MetricSample,
    eps: f64,
    mut set: Vec<usize>,
    order: impl Iterator<Item = usize>,
) -> usize {
    for i in order {
        if set.iter().all(|&s| ms.row(i)[s] > eps) {
            set.push(i);
        }
    }
    set.len()
}

/// Greedy cover count and the largest maximal `ε`-packing over a few
/// deterministic orders. The packing search starts from the greedy centers,
/// so `greedy ≤ packing` always.
pub fn covering_number(ms: &MetricSample, eps: f64) -> Result<CoverCount> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let centers = greedy_centers(ms, eps);
    let greedy = centers.len();
    let n = ms.len();
    let mut by_ecc: Vec<usize> = (0..n).collect();
    by_ecc.sort_by(|&a, &b| {
        ms.eccentricity[b]
            .total_cmp(&ms.eccentricity[a])
            .then(a.cmp(&b))
    });
    let packing = [
        extend_packing(ms, eps, centers, 0..n),
        extend_packing(ms, eps, Vec::new(), 0..n),
        extend_packing(ms, eps, Vec::new(), by_ecc.iter().copied()),
        extend_packing(ms, eps, Vec::new(), by_ecc.iter().rev().copied()),
    ]
    .into_iter()
    .max()
    .expect("non-empty");
    Ok(CoverCount { greedy, packing })
}

/// `H(ε) = log N(ε)` on a decreasing grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    pub epsilons: Vec<f64>,
    pub h_values: Vec<f64>,
    pub n_greedy: Vec<usize>,
    pub n_packing: Vec<usize>,
}

impl EntropyProfile {
    /// Profile from given entropy values, e.g. a closed form.
    pub fn from_values(epsilons: Vec<f64>, h_values: Vec<f64>) -> Result<Self> {
        check_grid(&epsilons)?;
        if h_values.len() != epsilons.len() || h_values.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::invalid(
                "h_values",
                "need one nonnegative value per epsilon",
            ));
        }
        let n: Vec<usize> = h_values
            .iter()
            .map(|h| h.exp().round().min(usize::MAX as f64) as usize)
            .collect();
        Ok(Self {
            epsilons,
            h_values,
            n_greedy: n.clone(),
            n_packing: n,
        })
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }
}

fn check_grid(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::invalid("eps_grid", "empty"));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(
            "eps_grid",
            "values must be positive and finite",
        ));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_grid", "must be strictly decreasing"));
    }
    Ok(())
}

/// `n` geometric values from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| match i {
            0 => hi,
            i if i + 1 == n => lo,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Entropy profile on a decreasing `ε` grid. Counts are made monotone by a
/// running maximum toward small `ε`, which keeps `greedy ≤ packing` and both
/// sides valid as bounds.
pub fn entropy_profile(ms: &MetricSample, eps_grid: &[f64]) -> Result<EntropyProfile> {
    check_grid(eps_grid)?;
    let counts = eps_grid
        .par_iter()
        .map(|&e| covering_number(ms, e))
        .collect::<Result<Vec<_>>>()?;
    let mut g = 0;
    let mut p = 0;
    let mut n_greedy = Vec::with_capacity(counts.len());
    let mut n_packing = Vec::with_capacity(counts.len());
    for c in counts {
        g = g.max(c.greedy);
        p = p.max(c.packing);
        n_greedy.push(g);
        n_packing.push(p);
    }
    Ok(EntropyProfile {
        epsilons: eps_grid.to_vec(),
        h_values: n_greedy.iter().map(|&n| (n as f64).ln()).collect(),
        n_greedy,
        n_packing,
    })
}

/// Extrapolation model for `H` on `(0, ε_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GrowthModel {
    /// `H ≈ c`.
    Bounded { c: f64 },
    /// `H ≈ A (log 1/ε)^b`.
    LogPower { a: f64, b: f64, r_squared: f64 },
    /// `H ≈ A ε^{-a}`.
    Power {
        a: f64,
        exponent: f64,
        r_squared: f64,
    },
    /// `log H ≈ c + s ε^{-a}`.
    ExpPower {
        c: f64,
        s: f64,
        a: f64,
        r_squared: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DudleyTrend {
    FiniteTrend,
    DivergingTrend,
}

impl std::fmt::Display for DudleyTrend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DudleyTrend::FiniteTrend => "finite-trend",
            DudleyTrend::DivergingTrend => "diverging-trend",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DudleyReport {
    /// Trapezoid value of `∫ H^{1/2}` over the sampled part of `(0, 1]`.
    pub computed: f64,
    /// Extrapolated `∫_0^{ε_min} H^{1/2}`; infinite for divergent models.
    pub remainder: f64,
    /// `computed + remainder`.
    pub integral_estimate: f64,
    pub model: GrowthModel,
    pub trend: DudleyTrend,
}

/// Remainder above this multiple of the computed part means diverging.
pub const DUDLEY_REMAINDER_FACTOR: f64 = 10.0;

/// Trapezoid quadrature plus a fitted tail model.
///
/// The model is fitted on the last decade `[ε_min, 10 ε_min]`. If `H`
/// varies by less than 1% there it is `Bounded`; otherwise the best of
/// `LogPower`, `Power` and `ExpPower` (exponent scanned on `0.05..=3`) by
/// adjusted `R²` wins.
pub fn dudley_check(profile: &EntropyProfile) -> Result<DudleyReport> {
    let eps = &profile.epsilons;
    let h = &profile.h_values;
    check_grid(eps)?;
    let eps_min = *eps.last().expect("non-empty");
    if eps[0] / eps_min < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(
            "entropy profile must span at least two decades of epsilon".into(),
        ));
    }
    // ascending ε restricted to (0, 1]
    let mut pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(h)
        .filter(|(e, _)| **e <= 1.0)
        .map(|(&e, &h)| (e, h.max(0.0).sqrt()))
        .collect();
    pts.reverse();
    let computed: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();

    let tail: Vec<(f64, f64)> = eps
        .iter()
        .zip(h)
        .filter(|(e, _)| **e <= 10.0 * eps_min * (1.0 + 1e-12))
        .map(|(&e, &h)| (e, h))
        .collect();
    if tail.len() < 3 {
        return Err(Error::InsufficientData(
            "need at least 3 profile points in the last decade".into(),
        ));
    }
    let model = fit_growth(&tail);
    let remainder = remainder_integral(&model, eps_min);
    let trend = if remainder > DUDLEY_REMAINDER_FACTOR * computed {
        DudleyTrend::DivergingTrend
    } else {
        DudleyTrend::FiniteTrend
    };
    Ok(DudleyReport {
        computed,
        remainder,
        integral_estimate: computed + remainder,
        model,
        trend,
    })
}

fn adjusted_r2(r2: f64, n: usize, predictors: usize) -> f64 {
    if n <= predictors + 1 {
        return r2;
    }
    1.0 - (1.0 - r2) * (n - 1) as f64 / (n - predictors - 1) as f64
}

fn fit_growth(tail: &[(f64, f64)]) -> GrowthModel {
    let hmax = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let hmin = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if hmin <= 0.0 || hmax - hmin <= 0.01 * hmax {
        return GrowthModel::Bounded { c: hmax.max(0.0) };
    }
    let n = tail.len();
    let log_h: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let log_inv: Vec<f64> = tail.iter().map(|p| -p.0.ln()).collect();
    let mut best: Option<(f64, GrowthModel)> = None;
    let mut consider = |score: f64, m: GrowthModel| {
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, m));
        }
    };
    if log_inv.iter().all(|&l| l > 0.0) {
        let x: Vec<f64> = log_inv.iter().map(|l| l.ln()).collect();
        if let Some(f) = linear_fit(&x, &log_h) {
            consider(
                adjusted_r2(f.r_squared, n, 1),
                GrowthModel::LogPower {
                    a: f.intercept.exp(),
                    b: f.slope,
                    r_squared: f.r_squared,
                },
            );
        }
    }
    if let Some(f) = linear_fit(&log_inv, &log_h) {
        consider(
            adjusted_r2(f.r_squared, n, 1),
            GrowthModel::Power {
                a: f.intercept.exp(),
                exponent: f.slope,
                r_squared: f.r_squared,
            },
        );
    }
    for i in 1..=60 {
        let a = 0.05 * i as f64;
        let x: Vec<f64> = tail.iter().map(|p| p.0.powf(-a)).collect();
        if let Some(f) = linear_fit(&x, &log_h) {
            consider(
                adjusted_r2(f.r_squared, n, 2),
                GrowthModel::ExpPower {
                    c: f.intercept,
                    s: f.slope,
                    a,
                    r_squared: f.r_squared,
                },
            );
        }
    }
    best.map(|b| b.1)
        .unwrap_or(GrowthModel::Bounded { c: hmax })
}

fn remainder_integral(model: &GrowthModel, eps_min: f64) -> f64 {
    match *model {
        GrowthModel::Bounded { c } => eps_min * c.sqrt(),
        GrowthModel::LogPower { a, b, .. } => {
            // z = ε_min e^{-s}: ∫_0^∞ √a (L + s)^{b/2} ε_min e^{-s} ds
            let l = -eps_min.ln();
            let m = 4000;
            let top = 80.0;
            let step = top / m as f64;
            let f = |s: f64| (l + s).max(0.0).powf(b / 2.0) * (-s).exp();
            let mut acc = 0.5 * (f(0.0) + f(top));
            for i in 1..m {
                acc += f(i as f64 * step);
            }
            a.sqrt() * eps_min * acc * step
        }
        GrowthModel::Power { a, exponent, .. } => {
            let e = exponent.max(0.0) / 2.0;
            if e >= 1.0 {
                f64::INFINITY
            } else {
                a.sqrt() * eps_min.powf(1.0 - e) / (1.0 - e)
            }
        }
        GrowthModel::ExpPower { c, s, .. } => {
            if s > 0.0 {
                f64::INFINITY
            } else {
                // H decreasing toward 0: bounded by its value at ε_min
                eps_min * (c + s * eps_min.powf(-1.0)).exp().sqrt()
            }
        }
    }
}

/// Settings for [`example41_probe`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub node_count: usize,
    /// Nodes are `e^{-u}` for `u` uniform on `[4, u_max]`, plus `t = 0`.
    pub u_max: f64,
    pub eps_points: usize,
    /// Decades of `ε` below the diameter.
    pub decades: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            node_count: 801,
            u_max: 700.0,
            eps_points: 41,
            decades: 2.0,
        }
    }
}

/// Ball-volume bound `exp H ≥ μ(T) / h₊(ε)` at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallVolumeRow {
    pub epsilon: f64,
    pub exp_h: f64,
    pub h_plus: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example41Report {
    pub delta: f64,
    pub node_count: usize,
    pub diameter: f64,
    pub profile: EntropyProfile,
    pub dudley: DudleyReport,
    pub ball_volume: Vec<BallVolumeRow>,
    /// Smallest `ε` with `N(ε) < node_count / 2`.
    pub resolution_floor: f64,
    /// Some sampled `ε` is below the resolution floor.
    pub saturated: bool,
    /// Slope and `R²` of `log H` against `ε^{-1/(1+δ)}` on resolved points.
    pub growth_slope: f64,
    pub growth_r_squared: f64,
    pub growth_points: usize,
    /// Slope of `log τ(t, 0)` against `log log log(1/t)`; the variance
    /// formula gives `-(1+δ)/2`.
    pub tau_origin_exponent: f64,
}

/// `τ₀` on `{0} ∪ {e^{-u_i}}` from the exact variance `Var w(t) = t`:
/// with `b = (log u)^{-(1+δ)/2}`,
/// `τ² = (b_t² + b_s² - 2 e^{-|u_t - u_s|/2} b_t b_s) / 2` and `τ(t, 0)² = b_t²/2`.
pub fn eta0_tau_metric(
    delta: f64,
    node_count: usize,
    u_max: f64,
) -> Result<(Vec<f64>, MetricSample)> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1/4), got {delta}"),
        ));
    }
    let t = eta0_nodes(node_count, u_max)?.positions();
    let u: Vec<f64> = t
        .iter()
        .map(|&t| if t > 0.0 { -t.ln() } else { f64::INFINITY })
        .collect();
    let b: Vec<f64> = u
        .iter()
        .map(|&u| {
            if u.is_finite() {
                u.ln().powf(-(1.0 + delta) / 2.0)
            } else {
                0.0
            }
        })
        .collect();
    let n = t.len();
    let dist = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let (bi, bj) = (b[i], b[j]);
        let cross = if u[i].is_finite() && u[j].is_finite() {
            (-(u[i] - u[j]).abs() / 2.0).exp() * bi * bj
        } else {
            0.0
        };
        (0.5 * (bi * bi + bj * bj - 2.0 * cross)).max(0.0).sqrt()
    });
    // the formula is symmetric in (i, j) up to rounding; force exactness
    let dist = (dist.clone() + dist.transpose()) * 0.5;
    let ids = t.iter().map(|t| format!("{t:e}")).collect();
    Ok((t, MetricSample::new(ids, dist)?))
}

/// Entropy probe for the `eta0` process with the analytic `τ₀` metric.
pub fn example41_probe(delta: f64, cfg: &ProbeConfig) -> Result<Example41Report> {
    let (t, ms) = eta0_tau_metric(delta, cfg.node_count, cfg.u_max)?;
    let diameter = ms.diameter();
    let grid = geometric_grid(
        diameter,
        diameter * 10f64.powf(-cfg.decades),
        cfg.eps_points,
    );
    let profile = entropy_profile(&ms, &grid)?;
    let dudley = dudley_check(&profile)?;

    // Voronoi cells in t
    let n = t.len();
    let width: Vec<f64> = (0..n)
        .map(|i| {
            let lo = if i == 0 { 0.0 } else { 0.5 * (t[i - 1] + t[i]) };
            let hi = if i + 1 == n {
                ETA0_T_MAX
            } else {
                0.5 * (t[i] + t[i + 1])
            };
            hi - lo
        })
        .collect();
    let mu: f64 = width.iter().sum();
    let ball_volume = profile
        .epsilons
        .par_iter()
        .zip(&profile.n_greedy)
        .map(|(&e, &count)| {
            let h_plus = (0..n)
                .map(|i| {
                    ms.row(i)
                        .iter()
                        .zip(&width)
                        .filter(|(&d, _)| d <= e)
                        .map(|(_, w)| w)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let ratio = mu / h_plus;
            BallVolumeRow {
                epsilon: e,
                exp_h: count as f64,
                h_plus,
                ratio,
                holds: count as f64 >= ratio * (1.0 - 1e-12),
            }
        })
        .collect();

    let half = n / 2;
    let resolved: Vec<usize> = (0..profile.len())
        .filter(|&i| profile.n_greedy[i] < half && profile.h_values[i] > 0.0)
        .collect();
    let resolution_floor = resolved
        .iter()
        .map(|&i| profile.epsilons[i])
        .fold(f64::INFINITY, f64::min);
    let saturated = profile.n_greedy.iter().any(|&c| c >= half);
    let gamma = 1.0 / (1.0 + delta);
    let (x, y): (Vec<f64>, Vec<f64>) = resolved
        .iter()
        .map(|&i| (profile.epsilons[i].powf(-gamma), profile.h_values[i].ln()))
        .unzip();
    let fit = linear_fit(&x, &y);

    let (lx, ly): (Vec<f64>, Vec<f64>) = (1..n)
        .map(|i| ((-t[i].ln()).ln().ln(), ms.dist(i, 0).ln()))
        .unzip();
    let tau_origin_exponent = linear_fit(&lx, &ly).map(|f| f.slope).unwrap_or(f64::NAN);

    Ok(Example41Report {
        delta,
        node_count: n,
        diameter,
        profile,
        dudley,
        ball_volume,
        resolution_floor,
        saturated,
        growth_slope: fit.map(|f| f.slope).unwrap_or(f64::NAN),
        growth_r_squared: fit.map(|f| f.r_squared).unwrap_or(f64::NAN),
        growth_points: x.len(),
        tau_origin_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(n: usize) -> MetricSample {
        MetricSample::from_line(
            &(0..n)
                .map(|i| i as f64 / (n - 1) as f64)
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    /// Smallest cover by exhaustive search over center subsets.
    fn optimal_cover(ms: &MetricSample, eps: f64) -> usize {
        let n = ms.len();
        (1..=n)
            .find(|&size| {
                (0u32..1 << n)
                    .filter(|m| m.count_ones() as usize == size)
                    .any(|mask| {
                        (0..n).all(|p| (0..n).any(|c| mask >> c & 1 == 1 && ms.dist(c, p) <= eps))
                    })
            })
            .unwrap()
    }

    #[test]
    fn rejects_non_metrics() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]);
        let ids = vec!["a".into(), "b".into(), "c".into()];
        assert!(matches!(
            MetricSample::new(ids.clone(), d),
            Err(Error::TriangleInequality { violations: 2, .. })
        ));
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(MetricSample::new(ids[..2].to_vec(), d).is_err());
    }

    #[test]
    fn cover_examples() {
        let ms = interval(101);
        assert_eq!(covering_number(&ms, 1.0).unwrap().greedy, 1);
        assert_eq!(covering_number(&ms, 0.25).unwrap().greedy, 2);
        let counts: Vec<usize> = geometric_grid(1.0, 1e-3, 40)
            .iter()
            .map(|&e| covering_number(&ms, e).unwrap().greedy)
            .collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    }

    #[test]
    fn greedy_is_optimal_on_small_instances() {
        let pts = [0.0, 0.1, 0.15, 0.4, 0.45, 0.5, 0.8, 0.83, 1.0, 1.3, 1.31];
        let ms = MetricSample::from_line(&pts).unwrap();
        for e in [0.02, 0.05, 0.1, 0.2, 0.3, 0.5] {
            assert_eq!(
                covering_number(&ms, e).unwrap().greedy,
                optimal_cover(&ms, e),
                "eps {e}"
            );
        }
    }

    #[test]
    fn bracketing() {
        // a 2-d point cloud with the Euclidean metric
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let a = i as f64 * 2.399_963;
                let r = (i as f64 / 60.0).sqrt();
                (r * a.cos(), r * a.sin())
            })
            .collect();
        let d = DMatrix::from_fn(60, 60, |i, j| {
            (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1)
        });
        let ms = MetricSample::new((0..60).map(|i| i.to_string()).collect(), d).unwrap();
        for e in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let c = covering_number(&ms, e).unwrap();
            let c2 = covering_number(&ms, 2.0 * e).unwrap();
            assert!(c.greedy >= c2.packing, "eps {e}");
            assert!(c.greedy <= c.packing, "eps {e}");
        }
    }

    #[test]
    fn profile_properties() {
        let single = MetricSample::from_line(&[0.3]).unwrap();
        let p = entropy_profile(&single, &[1.0, 0.1, 0.01]).unwrap();
        assert!(p.h_values.iter().all(|&h| h == 0.0));

        let ms = interval(2001);
        let grid = geometric_grid(2.0, 1e-3, 30);
        let p = entropy_profile(&ms, &grid).unwrap();
        assert!(p.h_values.windows(2).all(|w| w[0] <= w[1]));
        for (&e, &h) in p.epsilons.iter().zip(&p.h_values) {
            if e >= 1.0 {
                assert_eq!(h, 0.0);
            } else if e >= 0.01 {
                // ⌈1/(2ε)⌉ intervals of length 2ε
                assert!((h - (1.0 / (2.0 * e)).ln()).abs() < 0.75, "eps {e}: {h}");
            }
        }
        assert!(entropy_profile(&ms, &[0.1, 0.2]).is_err());
    }

    fn closed_form(f: impl Fn(f64) -> f64) -> EntropyProfile {
        let eps = geometric_grid(1.0, 1e-4, 161);
        let h = eps.iter().map(|&e| f(e)).collect();
        EntropyProfile::from_values(eps, h).unwrap()
    }

    #[test]
    fn dudley_log_profile() {
        let rep = dudley_check(&closed_form(|z| (1.0 / z).ln())).unwrap();
        let gamma_3_2 = 0.886_226_925_452_758;
        assert!(
            (rep.integral_estimate / gamma_3_2 - 1.0).abs() < 0.05,
            "{rep:?}"
        );
        assert_eq!(rep.trend, DudleyTrend::FiniteTrend);
        assert!(matches!(rep.model, GrowthModel::LogPower { .. }));
    }

    #[test]
    fn dudley_zero_and_divergent_profiles() {
        let rep = dudley_check(&closed_form(|_| 0.0)).unwrap();
        assert_eq!(rep.integral_estimate, 0.0);
        assert_eq!(rep.trend, DudleyTrend::FiniteTrend);
        for delta in [0.05, 0.1, 0.2] {
            let g = 1.0 / (1.0 + delta);
            let eps = geometric_grid(1.0, 1e-2, 41);
            let h = eps.iter().map(|&e: &f64| e.powf(-g).exp()).collect();
            let rep = dudley_check(&EntropyProfile::from_values(eps, h).unwrap()).unwrap();
            assert_eq!(rep.trend, DudleyTrend::DivergingTrend, "δ={delta}: {rep:?}");
        }
        // power growth with integrable square root
        let rep = dudley_check(&closed_form(|z| z.powf(-1.0))).unwrap();
        assert_eq!(rep.trend, DudleyTrend::FiniteTrend);
        let exact = 2.0; // ∫_0^1 z^{-1/2}
        assert!(
            (rep.integral_estimate / exact - 1.0).abs() < 0.05,
            "{rep:?}"
        );
        let rep = dudley_check(&closed_form(|z| z.powf(-2.5))).unwrap();
        assert_eq!(rep.trend, DudleyTrend::DivergingTrend);
        let short = EntropyProfile::from_values(vec![1.0, 0.5, 0.1], vec![0.0; 3]).unwrap();
        assert!(dudley_check(&short).is_err());
    }

    #[test]
    fn tau_metric_origin_exponent() {
        let delta = 0.1;
        let (t, ms) = eta0_tau_metric(delta, 60, 200.0).unwrap();
        for (i, &ti) in t.iter().enumerate().skip(1) {
            let ll = (-ti.ln()).ln();
            let exact = (0.5 * ll.powf(-(1.0 + delta))).sqrt();
            assert!((ms.dist(i, 0) - exact).abs() < 1e-14);
        }
        assert!(eta0_tau_metric(0.3, 60, 200.0).is_err());
    }

    #[test]
    fn probe_small_instance() {
        let cfg = ProbeConfig {
            node_count: 121,
            u_max: 200.0,
            eps_points: 21,
            decades: 2.0,
        };
        let rep = example41_probe(0.1, &cfg).unwrap();
        assert!(rep.ball_volume.iter().all(|r| r.holds));
        assert!((rep.tau_origin_exponent + 0.55).abs() < 1e-9);
        assert!(rep.profile.h_values.windows(2).all(|w| w[0] <= w[1]));
    }
}
