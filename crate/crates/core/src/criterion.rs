//! Block statistics `Ψ` and `U`, the block series check and its uniform
//! version over normalized sums.
//!
//! For a block `Z_k = V_{n(k+1)} - V_{n(k)}` applied to every realization,
//!
//! ```text
//! Ψ_k(λ) = mean over nodes and realizations of exp(λ Z_k(t)),
//! U_k    = inf_λ (log n(k+1) + log Ψ_k(λ)) / λ.
//! ```
//!
//! The infimum runs over a geometric grid in `[λ_min, λ_max]` refined by a
//! golden-section pass. All verdicts are trend verdicts; their thresholds
//! are configuration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{sup_norm, DyadicSequence, FilterScratch, SpectralFilter};
use crate::error::{Error, Result};
use crate::processes::{PathEnsemble, Sampler};
use crate::stats::linear_fit;

/// Exponents `λz` above this are counted by the integrability warning.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Geometric search grid for the infimum over `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Golden-section pass around the grid minimizer.
    pub refine: bool,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            points: 61,
            refine: true,
        }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(Error::invalid("lambda", "need 0 < min < max < inf"));
        }
        if self.points < 3 {
            return Err(Error::invalid("lambda.points", "need at least 3 points"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (self.min.ln(), self.max.ln());
        let m = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| match i {
                0 => self.min,
                i if i + 1 == self.points => self.max,
                i => (a + (b - a) * i as f64 / m).exp(),
            })
            .collect()
    }

    /// The same grid for the process `c·ξ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            min: self.min / c,
            max: self.max / c,
            ..*self
        }
    }
}

/// Heuristic signs that `E exp(λξ)` may not exist at the chosen `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum PsiWarning {
    /// More than 1% of the terms had `λz` above [`EXPONENT_GUARD`].
    ExponentGuard { lambda: f64, fraction: f64 },
    /// One realization carries more than half of the estimate.
    Dominance { lambda: f64, share: f64 },
}

/// Estimate of `log Ψ(λ)` with a delta-method standard error computed from
/// the per-realization averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiEstimate {
    pub lambda: f64,
    pub log_psi: f64,
    pub std_err: f64,
    /// Fraction of terms with `λz >` [`EXPONENT_GUARD`].
    pub guard_fraction: f64,
    /// Largest single-realization share of the mean.
    pub dominance: f64,
}

impl PsiEstimate {
    pub fn warnings(&self) -> Vec<PsiWarning> {
        let mut w = Vec::new();
        if self.guard_fraction > 0.01 {
            w.push(PsiWarning::ExponentGuard {
                lambda: self.lambda,
                fraction: self.guard_fraction,
            });
        }
        if self.dominance > 0.5 {
            w.push(PsiWarning::Dominance {
                lambda: self.lambda,
                share: self.dominance,
            });
        }
        w
    }
}

/// `Z_k` evaluated on every realization of an ensemble.
#[derive(Debug, Clone)]
pub struct BlockField {
    pub k: usize,
    pub n_lo: usize,
    pub n_hi: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl BlockField {
    pub fn new(ens: &PathEnsemble, seq: &DyadicSequence, k: usize) -> Result<Self> {
        let grid = ens
            .domain()
            .periodic_grid()
            .ok_or_else(|| Error::invalid("domain", "blocks need a periodic grid"))?;
        if ens.rows() == 0 {
            return Err(Error::InsufficientData("empty ensemble".into()));
        }
        let (n_lo, n_hi) = seq.block_degrees(k)?;
        let filter = SpectralFilter::block(grid, seq, k)?;
        let cols = grid.size();
        let mut values = vec![0.0; ens.rows() * cols];
        values
            .par_chunks_mut(cols)
            .enumerate()
            .for_each_init(FilterScratch::default, |scratch, (i, out)| {
                filter.apply_into(ens.path(i), scratch, out)
            });
        Ok(Self {
            k,
            n_lo,
            n_hi,
            rows: ens.rows(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `E ‖Z_k‖_∞` over the realizations.
    pub fn mean_sup_norm(&self) -> f64 {
        let s: f64 = self.values.chunks_exact(self.cols).map(sup_norm).sum();
        s / self.rows as f64
    }

    pub fn psi(&self, lambda: f64) -> PsiEstimate {
        let per_row: Vec<(f64, usize)> = self
            .values
            .par_chunks(self.cols)
            .map(|row| {
                let shift = row
                    .iter()
                    .map(|z| lambda * z)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                let mut guarded = 0;
                for z in row {
                    let e = lambda * z;
                    if e > EXPONENT_GUARD {
                        guarded += 1;
                    }
                    s += (e - shift).exp();
                }
                (shift + (s / self.cols as f64).ln(), guarded)
            })
            .collect();
        let top = per_row
            .iter()
            .map(|r| r.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = per_row.iter().map(|r| (r.0 - top).exp()).collect();
        let r = w.len() as f64;
        let sum: f64 = w.iter().sum();
        let mean = sum / r;
        let std_err = if w.len() > 1 {
            let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt() / mean
        } else {
            0.0
        };
        let guarded: usize = per_row.iter().map(|r| r.1).sum();
        PsiEstimate {
            lambda,
            log_psi: top + mean.ln(),
            std_err,
            guard_fraction: guarded as f64 / (r * self.cols as f64),
            dominance: w.iter().cloned().fold(0.0, f64::max) / sum,
        }
    }

    fn objective(&self, lambda: f64) -> (f64, PsiEstimate) {
        let p = self.psi(lambda);
        (((self.n_hi as f64).ln() + p.log_psi) / lambda, p)
    }

    pub fn u_term(&self, grid: &LambdaGrid) -> Result<BlockStatistic> {
        grid.validate()?;
        let lambdas = grid.values();
        let evals: Vec<(f64, PsiEstimate)> = lambdas.iter().map(|&l| self.objective(l)).collect();
        let (imin, _) = evals
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, e)| {
                if e.0 < best.1 {
                    (i, e.0)
                } else {
                    best
                }
            });
        let mut best = evals[imin];
        if grid.refine {
            let lo = lambdas[imin.saturating_sub(1)].ln();
            let hi = lambdas[(imin + 1).min(lambdas.len() - 1)].ln();
            let cand = golden_section(lo, hi, 40, |x| self.objective(x.exp()).0);
            let refined = self.objective(cand.exp());
            if refined.0 < best.0 {
                best = refined;
            }
        }
        let (value, psi) = best;
        let mean_sup_norm = self.mean_sup_norm();
        let u_value = value.max(0.0);
        Ok(BlockStatistic {
            k: self.k,
            n_lo: self.n_lo,
            n_hi: self.n_hi,
            lambda_star: psi.lambda,
            u_value,
            psi_curve: evals.iter().map(|e| (e.1.lambda, e.1.log_psi)).collect(),
            mc_error: psi.std_err,
            cap_active: imin + 1 == lambdas.len(),
            warnings: psi.warnings(),
            mean_sup_norm,
            sup_to_u_ratio: if u_value > 0.0 {
                mean_sup_norm / u_value
            } else {
                0.0
            },
        })
    }
}

fn golden_section(mut a: f64, mut b: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// `U_k` with the data behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStatistic {
    pub k: usize,
    pub n_lo: usize,
    pub n_hi: usize,
    pub lambda_star: f64,
    pub u_value: f64,
    /// `(λ, log Ψ(λ))` on the search grid.
    pub psi_curve: Vec<(f64, f64)>,
    /// Standard error of `log Ψ(λ*)`.
    pub mc_error: f64,
    /// The grid minimizer sits at `λ_max`: the infimum is truncated.
    pub cap_active: bool,
    pub warnings: Vec<PsiWarning>,
    /// `E ‖Z_k‖_∞`.
    pub mean_sup_norm: f64,
    /// `E ‖Z_k‖_∞ / U_k`, zero when `U_k = 0`.
    pub sup_to_u_ratio: f64,
}

/// `log Ψ(λ)` for block `k` of `ens`.
pub fn psi_estimate(
    ens: &PathEnsemble,
    seq: &DyadicSequence,
    k: usize,
    lambda: f64,
) -> Result<PsiEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    Ok(BlockField::new(ens, seq, k)?.psi(lambda))
}

/// `U_k` for block `k` of `ens`.
pub fn u_term(
    ens: &PathEnsemble,
    seq: &DyadicSequence,
    k: usize,
    grid: &LambdaGrid,
) -> Result<BlockStatistic> {
    BlockField::new(ens, seq, k)?.u_term(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SeriesConvergingTrend,
    Inconclusive,
    DivergingTrend,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::SeriesConvergingTrend => "series-converging-trend",
            Verdict::Inconclusive => "inconclusive",
            Verdict::DivergingTrend => "diverging-trend",
        })
    }
}

/// Settings shared by [`series_check`] and [`equiconvergence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub lambda: LambdaGrid,
    /// Converging iff the last adjusted tail is below this share of the
    /// adjusted total.
    pub tail_ratio: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaGrid::default(),
            tail_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub sequence: Vec<usize>,
    pub blocks: Vec<BlockStatistic>,
    /// `Σ_{k≥m} U_k` for `m = 1..K`.
    pub tail_sums: Vec<f64>,
    /// Tail sums with cap-active blocks counted as zero.
    pub adjusted_tail_sums: Vec<f64>,
    pub verdict: Verdict,
}

/// Backward cumulative sums `Σ_{k≥m} u_k`; nonincreasing for `u ≥ 0`.
pub fn tail_sums(u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    let mut acc = 0.0;
    for (o, v) in out.iter_mut().zip(u).rev() {
        acc += v;
        *o = acc;
    }
    out
}

/// Verdict from adjusted terms: a cap-active block contributes zero because
/// its `U` only reflects the truncation of the `λ` range.
///
/// - diverging: the last three adjusted terms are nondecreasing and positive;
/// - converging: the adjusted total is zero, or the last adjusted tail is
///   below `tail_ratio` times the adjusted total;
/// - inconclusive otherwise.
///
/// The diverging pattern is tested first: with many blocks a single growing
/// term is still a small fraction of the total.
pub fn series_verdict(adjusted_terms: &[f64], tail_ratio: f64) -> Verdict {
    let tails = tail_sums(adjusted_terms);
    let (Some(&full), Some(&last)) = (tails.first(), tails.last()) else {
        return Verdict::Inconclusive;
    };
    let n = adjusted_terms.len();
    if n >= 3 {
        let t = &adjusted_terms[n - 3..];
        if t[0] <= t[1] && t[1] <= t[2] && t[2] > 0.0 {
            return Verdict::DivergingTrend;
        }
    }
    if full == 0.0 || last < tail_ratio * full {
        return Verdict::SeriesConvergingTrend;
    }
    Verdict::Inconclusive
}

fn build_report(
    seq: &DyadicSequence,
    blocks: Vec<BlockStatistic>,
    tail_ratio: f64,
) -> CriterionReport {
    let u: Vec<f64> = blocks.iter().map(|b| b.u_value).collect();
    let adjusted: Vec<f64> = blocks
        .iter()
        .map(|b| if b.cap_active { 0.0 } else { b.u_value })
        .collect();
    CriterionReport {
        sequence: seq.terms().to_vec(),
        tail_sums: tail_sums(&u),
        adjusted_tail_sums: tail_sums(&adjusted),
        verdict: series_verdict(&adjusted, tail_ratio),
        blocks,
    }
}

/// All `U_k`, their tail sums and the `E‖Z_k‖_∞ / U_k` diagnostic.
pub fn series_check(
    ens: &PathEnsemble,
    seq: &DyadicSequence,
    cfg: &SeriesConfig,
) -> Result<CriterionReport> {
    cfg.lambda.validate()?;
    if seq.block_count() < 3 {
        return Err(Error::invalid("sequence", "need at least 3 blocks"));
    }
    let blocks = (1..=seq.block_count())
        .map(|k| u_term(ens, seq, k, &cfg.lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(seq, blocks, cfg.tail_ratio))
}

/// Per-node variance of `ζ_n` against the reference variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceStability {
    pub n: usize,
    /// `max_t |Var ζ_n(t) - R(t,t)| / se(t)`.
    pub max_z_score: f64,
    pub max_relative_deviation: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquiconvergenceReport {
    pub n_list: Vec<usize>,
    pub reports: Vec<CriterionReport>,
    /// `sup_n Σ_{k≥m} U_k(ζ_n)`.
    pub sup_tail_sums: Vec<f64>,
    pub sup_adjusted_tail_sums: Vec<f64>,
    pub variance: Vec<VarianceStability>,
    /// True when the reference variance is the exact `R(t,t)` rather than
    /// the `n = 1` sample.
    pub exact_reference: bool,
    pub verdict: Verdict,
}

/// z-score above which a per-node variance counts as unstable.
pub const VARIANCE_Z_LIMIT: f64 = 5.0;

/// [`series_check`] on `ζ_n` for every `n` in `n_list`, the sup over `n` of
/// every tail sum and a variance-stability precondition.
///
/// The uniform verdict applies [`series_verdict`] to the increments of the
/// sup-over-`n` adjusted tails; any diverging member makes it diverging
/// unless the uniform rule already says converging.
pub fn equiconvergence_check(
    sampler: &Sampler,
    seq: &DyadicSequence,
    n_list: &[usize],
    replicas: usize,
    master_seed: u64,
    cfg: &SeriesConfig,
) -> Result<EquiconvergenceReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::invalid(
            "n_list",
            "need a nonempty list of positive sizes",
        ));
    }
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least 2"));
    }
    let exact = sampler
        .analytic_covariance()
        .map(|c| c.entries().diagonal().iter().cloned().collect::<Vec<f64>>());
    let exact_reference = exact.is_some();
    let mut reference = exact;
    let mut reports = Vec::new();
    let mut variance = Vec::new();
    for &n in n_list {
        let ens = sampler.normalized_sum(n, replicas, master_seed)?;
        let (var, se) = variance_with_error(&ens);
        let reference = reference.get_or_insert_with(|| var.clone());
        let mut max_z: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        for ((v, s), r) in var.iter().zip(&se).zip(reference.iter()) {
            let d = (v - r).abs();
            if d > 1e-12 * r.abs().max(1e-300) {
                max_z = max_z.max(if *s > 0.0 { d / s } else { f64::INFINITY });
            }
            if *r > 0.0 {
                max_rel = max_rel.max(d / r);
            }
        }
        variance.push(VarianceStability {
            n,
            max_z_score: max_z,
            max_relative_deviation: max_rel,
            stable: max_z <= VARIANCE_Z_LIMIT,
        });
        reports.push(series_check(&ens, seq, cfg)?);
    }
    let sup = |pick: fn(&CriterionReport) -> &Vec<f64>| -> Vec<f64> {
        let m = pick(&reports[0]).len();
        (0..m)
            .map(|i| reports.iter().map(|r| pick(r)[i]).fold(0.0, f64::max))
            .collect()
    };
    let sup_tail_sums = sup(|r| &r.tail_sums);
    let sup_adjusted_tail_sums = sup(|r| &r.adjusted_tail_sums);
    let increments: Vec<f64> = (0..sup_adjusted_tail_sums.len())
        .map(|i| {
            let next = sup_adjusted_tail_sums.get(i + 1).copied().unwrap_or(0.0);
            (sup_adjusted_tail_sums[i] - next).max(0.0)
        })
        .collect();
    let mut verdict = series_verdict(&increments, cfg.tail_ratio);
    if verdict != Verdict::SeriesConvergingTrend
        && reports.iter().any(|r| r.verdict == Verdict::DivergingTrend)
    {
        verdict = Verdict::DivergingTrend;
    }
    Ok(EquiconvergenceReport {
        n_list: n_list.to_vec(),
        reports,
        sup_tail_sums,
        sup_adjusted_tail_sums,
        variance,
        exact_reference,
        verdict,
    })
}

/// Unbiased per-node variances and their standard errors
/// `sqrt((m₄ - s⁴)/R)`.
fn variance_with_error(ens: &PathEnsemble) -> (Vec<f64>, Vec<f64>) {
    let mean = ens.column_means();
    let var = ens.column_variances();
    let r = ens.rows() as f64;
    let mut m4 = vec![0.0; ens.cols()];
    for p in ens.paths() {
        for ((a, x), m) in m4.iter_mut().zip(p).zip(&mean) {
            *a += (x - m).powi(4);
        }
    }
    let se = m4
        .iter()
        .zip(&var)
        .map(|(a, v)| ((a / r - v * v).max(0.0) / r).sqrt())
        .collect();
    (var, se)
}

/// Nonincreasing sequences `δ(n)` for [`decay_series_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayProfile {
    Zero,
    /// `δ(n) = [log(n + 2)]^{-exponent}`.
    LogPower {
        exponent: f64,
    },
    /// `δ(n) = n^{-exponent}`.
    Power {
        exponent: f64,
    },
    /// `δ(1), δ(2), ...`; limits `r_max` to `⌊log₂ len⌋`.
    Table {
        values: Vec<f64>,
    },
}

impl DecayProfile {
    /// `δ(2^r)`, evaluated without forming `2^r`.
    pub fn at_dyadic(&self, r: u32) -> Option<f64> {
        let rf = r as f64;
        let ln2 = std::f64::consts::LN_2;
        match self {
            DecayProfile::Zero => Some(0.0),
            DecayProfile::LogPower { exponent } => {
                // log(2^r + 2) = r log 2 + log(1 + 2^{1-r})
                let l = rf * ln2 + (2f64.powi(1 - r as i32)).ln_1p();
                Some(l.powf(-exponent))
            }
            DecayProfile::Power { exponent } => Some((-exponent * rf * ln2).exp()),
            DecayProfile::Table { values } => {
                let idx = 1usize.checked_shl(r)?;
                values.get(idx - 1).copied()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DecayProfile::LogPower { exponent } | DecayProfile::Power { exponent } => {
                if !(*exponent >= 0.0) {
                    return Err(Error::invalid("delta.exponent", "must be nonnegative"));
                }
            }
            DecayProfile::Table { values } => {
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::invalid(
                        "delta",
                        "values must be finite and nonnegative",
                    ));
                }
                if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
                    return Err(Error::invalid(
                        "delta",
                        format!("not nonincreasing at n = {}", i + 2),
                    ));
                }
            }
            DecayProfile::Zero => {}
        }
        Ok(())
    }
}

/// Thresholds of [`decay_series_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Converging requires the last-quarter increment below this share of
    /// the total.
    pub quarter_ratio: f64,
    /// Terms decaying like `r^{-s}` with `s` above this are summable;
    /// at or below it the series is treated as diverging.
    pub slope_threshold: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            quarter_ratio: 0.05,
            slope_threshold: 1.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub m: f64,
    pub m_tilde: f64,
    pub m_prime: f64,
    pub r_max: u32,
    pub value: f64,
    /// `(S(r_max) - S(3 r_max / 4)) / S(r_max)`.
    pub last_quarter_ratio: f64,
    /// `-d log term / d log r` over the last decade of `r`.
    pub tail_exponent: f64,
    pub verdict: Verdict,
}

/// `Σ_{r=1}^{r_max} δ(2^r) / r^{1/m̃}` with `m̃ = min(m, 2)` and a trend
/// verdict.
///
/// The last-quarter ratio alone cannot separate `Σ 1/r` from `Σ r^{-1.1}` at
/// any practical `r_max`, so the verdict also uses the log-log slope `s` of
/// the terms over the last decade: converging iff `s` exceeds
/// `slope_threshold` and the quarter ratio is small; diverging iff `s` is at
/// most `slope_threshold`.
pub fn decay_series_check(
    delta: &DecayProfile,
    m: f64,
    r_max: u32,
    cfg: &DecayConfig,
) -> Result<DecayReport> {
    if !(m > 1.0) {
        return Err(Error::invalid("m", "must exceed 1"));
    }
    if r_max < 4 {
        return Err(Error::invalid("r_max", "must be at least 4"));
    }
    delta.validate()?;
    let m_tilde = m.min(2.0);
    let m_prime = m_tilde / (m_tilde - 1.0);
    let terms = (1..=r_max)
        .map(|r| {
            delta
                .at_dyadic(r)
                .map(|d| d / (r as f64).powf(1.0 / m_tilde))
                .ok_or_else(|| Error::invalid("r_max", format!("table has no value at n = 2^{r}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut partial = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial.push(acc);
    }
    let value = acc;
    let q = (3 * r_max as usize) / 4;
    let last_quarter_ratio = if value > 0.0 {
        (value - partial[q - 1]) / value
    } else {
        0.0
    };

    let start = (r_max / 10).max(1);
    let (x, y): (Vec<f64>, Vec<f64>) = (start..=r_max)
        .zip(&terms[start as usize - 1..])
        .filter(|(_, &t)| t > 0.0)
        .map(|(r, &t)| ((r as f64).ln(), t.ln()))
        .unzip();
    let tail_exponent = linear_fit(&x, &y)
        .map(|f| -f.slope)
        .unwrap_or(f64::INFINITY);
    let verdict = if value == 0.0 || x.len() < 2 {
        Verdict::SeriesConvergingTrend
    } else if tail_exponent <= cfg.slope_threshold {
        Verdict::DivergingTrend
    } else if last_quarter_ratio < cfg.quarter_ratio {
        Verdict::SeriesConvergingTrend
    } else {
        Verdict::Inconclusive
    };
    Ok(DecayReport {
        m,
        m_tilde,
        m_prime,
        r_max,
        value,
        last_quarter_ratio,
        tail_exponent,
        verdict,
    })
}
