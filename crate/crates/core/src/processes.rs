//! Random processes, their ensembles and second-order structure.
//!
//! A [`ProcessSpec`] is plain configuration; [`Sampler`] is its compiled form
//! bound to a [`Domain`]. Realization `i` of any ensemble is drawn from the
//! random stream `(master_seed, i)` (see [`crate::rng`]), so ensembles are
//! reproducible bit for bit regardless of thread count.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::PeriodicGrid;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

/// Index set on which paths are tabulated.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Equispaced nodes of `[0, 2π)`.
    Periodic(PeriodicGrid),
    /// Arbitrary increasing positions. `+∞` is allowed as a last point.
    Points(Vec<f64>),
}

impl Domain {
    pub fn periodic(size: usize) -> Result<Self> {
        Ok(Domain::Periodic(PeriodicGrid::new(size)?))
    }

    pub fn points(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("domain", "no points"));
        }
        if positions.iter().any(|p| p.is_nan()) {
            return Err(Error::invalid("domain", "NaN position"));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "domain",
                "positions must be strictly increasing",
            ));
        }
        Ok(Domain::Points(positions))
    }

    pub fn len(&self) -> usize {
        match self {
            Domain::Periodic(g) => g.size(),
            Domain::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> Vec<f64> {
        match self {
            Domain::Periodic(g) => g.nodes(),
            Domain::Points(p) => p.clone(),
        }
    }

    pub fn periodic_grid(&self) -> Option<PeriodicGrid> {
        match self {
            Domain::Periodic(g) => Some(*g),
            Domain::Points(_) => None,
        }
    }
}

/// `R` realizations of a process tabulated on a [`Domain`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    domain: Domain,
    rows: usize,
    data: Vec<f64>,
    master_seed: u64,
}

impl PathEnsemble {
    pub fn new(domain: Domain, rows: usize, data: Vec<f64>, master_seed: u64) -> Result<Self> {
        if data.len() != rows * domain.len() {
            return Err(Error::invalid(
                "paths",
                format!(
                    "expected {} x {} values, got {}",
                    rows,
                    domain.len(),
                    data.len()
                ),
            ));
        }
        Ok(Self {
            domain,
            rows,
            data,
            master_seed,
        })
    }

    pub fn zeros(domain: Domain, rows: usize) -> Self {
        let data = vec![0.0; rows * domain.len()];
        Self {
            domain,
            rows,
            data,
            master_seed: 0,
        }
    }

    /// Fills row `i` with `fill(i, row)` in parallel.
    pub fn generate<F>(domain: Domain, rows: usize, master_seed: u64, fill: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let cols = domain.len();
        let mut data = vec![0.0; rows * cols];
        data.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| fill(i, row));
        Self {
            domain,
            rows,
            data,
            master_seed,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.domain.len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            domain: self.domain.clone(),
            rows: self.rows,
            data: self.data.iter().map(|v| v * factor).collect(),
            master_seed: self.master_seed,
        }
    }

    /// `max_j |path_i(t_j)|` for every realization.
    pub fn sup_norms(&self) -> Vec<f64> {
        self.paths().map(crate::approximation::sup_norm).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols()];
        for p in self.paths() {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v;
            }
        }
        let r = self.rows.max(1) as f64;
        m.iter_mut().for_each(|a| *a /= r);
        m
    }

    /// Unbiased per-node variances.
    pub fn column_variances(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut v = vec![0.0; self.cols()];
        for p in self.paths() {
            for ((a, x), m) in v.iter_mut().zip(p).zip(&mean) {
                *a += (x - m) * (x - m);
            }
        }
        let d = (self.rows.max(2) - 1) as f64;
        v.iter_mut().for_each(|a| *a /= d);
        v
    }
}

/// Distribution of the random coefficients of a `random_trig` process. All
/// laws are centered with unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    #[default]
    Normal,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

impl CoefficientLaw {
    fn draw(self, rng: &mut StreamRng) -> f64 {
        match self {
            CoefficientLaw::Normal => rng.sample(StandardNormal),
            CoefficientLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoefficientLaw::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Amplitudes `σ_k` of the harmonics of a `random_trig` process.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDecay {
    /// `σ_k = 1`.
    #[default]
    Flat,
    /// `σ_k = k^{-exponent}`.
    Power { exponent: f64 },
    /// `σ_k = ratio^k`.
    Geometric { ratio: f64 },
    /// Explicit `σ_1..σ_K`.
    Custom { scales: Vec<f64> },
}

impl SpectralDecay {
    fn scales(&self, max_degree: usize) -> Result<Vec<f64>> {
        let s: Vec<f64> = match self {
            SpectralDecay::Flat => vec![1.0; max_degree],
            SpectralDecay::Power { exponent } => (1..=max_degree)
                .map(|k| (k as f64).powf(-exponent))
                .collect(),
            SpectralDecay::Geometric { ratio } => {
                if !(0.0..=1.0).contains(ratio) {
                    return Err(Error::invalid("decay.ratio", "must lie in [0, 1]"));
                }
                (1..=max_degree).map(|k| ratio.powi(k as i32)).collect()
            }
            SpectralDecay::Custom { scales } => {
                if scales.len() != max_degree {
                    return Err(Error::invalid(
                        "decay.scales",
                        format!("need {max_degree} scales, got {}", scales.len()),
                    ));
                }
                scales.clone()
            }
        };
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("decay", "non-finite amplitude"));
        }
        Ok(s)
    }
}

/// Process families understood by the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// Standard Brownian motion started at 0.
    Wiener,
    /// `w(t) / ((2t)^{1/2} (log|log t|)^{1/2+δ/2})` on `[0, e^{-4}]`, zero at 0.
    Eta0 { delta: f64 },
    /// `Σ_{k=1}^{K} σ_k (A_k cos kt + B_k sin kt)` with i.i.d. coefficients.
    RandomTrig {
        max_degree: usize,
        #[serde(default)]
        law: CoefficientLaw,
        #[serde(default)]
        decay: SpectralDecay,
    },
    /// The sequence-space process `η_n = c(n) ε_n f(((x - a(n))/Δ(n))` indexed by
    /// `{1, 2, ..., ∞}`.
    SequenceExample { alpha: f64, p0: f64 },
    /// Precomputed paths from a CSV file; resampled with replacement.
    UserTable { path: PathBuf },
}

/// Upper end `e^{-4}` of the domain of `eta0`.
pub const ETA0_T_MAX: f64 = 0.018_315_638_888_734_18;

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Eta0 { delta } => {
                if !(*delta > 0.0 && *delta < 0.25) {
                    return Err(Error::invalid(
                        "delta",
                        format!("must lie in (0, 1/4), got {delta}"),
                    ));
                }
            }
            ProcessSpec::SequenceExample { alpha, p0 } => {
                SequenceExample::new(*alpha, *p0)?;
            }
            ProcessSpec::RandomTrig {
                max_degree, decay, ..
            } => {
                decay.scales(*max_degree)?;
            }
            ProcessSpec::Wiener | ProcessSpec::UserTable { .. } => {}
        }
        Ok(())
    }

    /// Natural domain of the process when the caller has no preference.
    pub fn default_domain(&self, grid_size: usize) -> Result<Domain> {
        match self {
            ProcessSpec::Eta0 { .. } => eta0_nodes(grid_size, 40.0),
            ProcessSpec::SequenceExample { .. } => sequence_domain(grid_size),
            ProcessSpec::UserTable { path } => Ok(UserTable::from_csv(path)?.domain().clone()),
            _ => Domain::periodic(grid_size),
        }
    }
}

/// `{0} ∪ {e^{-u}}` with `count - 1` values of `u` equispaced on `[4, u_max]`,
/// in increasing order of `t`.
pub fn eta0_nodes(count: usize, u_max: f64) -> Result<Domain> {
    if count < 3 {
        return Err(Error::invalid("node_count", "need at least 3 nodes"));
    }
    if !(u_max > 4.0) {
        return Err(Error::invalid("u_max", "must exceed 4"));
    }
    let m = count - 1;
    let mut t = vec![0.0];
    t.extend((0..m).map(|i| {
        let u = u_max - (u_max - 4.0) * i as f64 / (m - 1) as f64;
        (-u).exp()
    }));
    *t.last_mut().expect("non-empty") = ETA0_T_MAX;
    Domain::points(t)
}

/// `{1, ..., n_max, ∞}`.
pub fn sequence_domain(n_max: usize) -> Result<Domain> {
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be positive"));
    }
    let mut p: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    p.push(f64::INFINITY);
    Domain::points(p)
}

/// Parameters of the sequence-space example and its closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceExample {
    alpha: f64,
    p0: f64,
}

impl SequenceExample {
    pub fn new(alpha: f64, p0: f64) -> Result<Self> {
        if !(p0 > 1.0 && p0 < 2.0) {
            return Err(Error::invalid(
                "p0",
                format!("must lie in (1, 2), got {p0}"),
            ));
        }
        let upper = 1f64.min(p0 / (2.0 - p0));
        if !(alpha > 0.0 && alpha < upper) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in (0, {upper}), got {alpha}"),
            ));
        }
        Ok(Self { alpha, p0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// `a(n) = 1 - 0.5 n^{-α}`.
    pub fn a(&self, n: f64) -> f64 {
        1.0 - 0.5 * n.powf(-self.alpha)
    }

    /// `Δ(n) = a(n+1) - a(n)`, computed without cancellation.
    pub fn width(&self, n: f64) -> f64 {
        0.5 * n.powf(-self.alpha) * -(-self.alpha * (1.0 / n).ln_1p()).exp_m1()
    }

    /// `c(n) = n^{α/p₀}`.
    pub fn c(&self, n: f64) -> f64 {
        n.powf(self.alpha / self.p0)
    }

    /// `E η_n² = c(n)² Δ(n)`, since `∫_0^1 |log y| dy = 1`.
    pub fn second_moment(&self, n: f64) -> f64 {
        self.c(n).powi(2) * self.width(n)
    }

    /// For `x = 1 - v`, the unique `n` with `a(n) ≤ x < a(n+1)` and the local
    /// coordinate `y = (x - a(n))/Δ(n) ∈ [0, 1)`; `None` when `x < a(1)`.
    pub fn locate(&self, v: f64) -> Option<(f64, f64)> {
        if !(v > 0.0) || v > 0.5 {
            return None;
        }
        let upper = |n: f64| 0.5 * n.powf(-self.alpha);
        let mut n = (0.5 / v).powf(1.0 / self.alpha).floor().max(1.0);
        // unit steps stop resolving anything beyond 2^52
        if n < 4.5e15 {
            for _ in 0..4 {
                if n > 1.0 && upper(n) < v {
                    n -= 1.0;
                } else if upper(n + 1.0) >= v {
                    n += 1.0;
                } else {
                    break;
                }
            }
        }
        let y = ((upper(n) - v) / self.width(n)).clamp(0.0, 1.0);
        Some((n, y))
    }

    /// `‖η‖ = sup_n |η_n|` together with the active index, for `x = 1 - v`.
    pub fn norm_at(&self, v: f64) -> (f64, Option<f64>) {
        match self.locate(v) {
            Some((n, y)) if y > 0.0 && y < 1.0 => (self.c(n) * (-y.ln()).sqrt(), Some(n)),
            Some((n, _)) => (0.0, Some(n)),
            None => (0.0, None),
        }
    }
}

/// CSV of precomputed realizations: header row of node positions, one row per
/// realization. Columns are centered on load.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTable {
    domain: Domain,
    rows: usize,
    data: Vec<f64>,
}

impl UserTable {
    pub fn from_csv(path: &Path) -> Result<Self> {
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
            .map(|h| parse_f64(h.trim()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("header: {e}")))?;
        let cols = header.len();
        let mut data = Vec::new();
        let mut rows = 0;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(parse_err(format!(
                    "row {} has {} fields, expected {cols}",
                    i + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v = parse_f64(field.trim())
                    .map_err(|e| parse_err(format!("row {}: {e}", i + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("row {}: non-finite value", i + 1)));
                }
                data.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(parse_err("no data rows".into()));
        }
        let domain = periodic_if_matches(&header).unwrap_or(Domain::points(header)?);
        Self::from_rows(domain, rows, data)
    }

    pub fn from_rows(domain: Domain, rows: usize, mut data: Vec<f64>) -> Result<Self> {
        let raw = PathEnsemble::new(domain.clone(), rows, data.clone(), 0)?;
        let means = raw.column_means();
        for row in data.chunks_exact_mut(domain.len()) {
            for (v, m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        Ok(Self { domain, rows, data })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")),
    }
}

fn periodic_if_matches(header: &[f64]) -> Option<Domain> {
    let grid = PeriodicGrid::new(header.len()).ok()?;
    let same = header
        .iter()
        .enumerate()
        .all(|(j, &t)| (t - grid.node(j)).abs() <= 1e-9);
    same.then_some(Domain::Periodic(grid))
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Wiener,
    Eta0 {
        scale: Vec<f64>,
    },
    RandomTrig {
        law: CoefficientLaw,
        scales: Vec<f64>,
        // cos(k t_j), sin(k t_j), row k-1
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Sequence {
        model: SequenceExample,
        n_max: usize,
    },
    Table(Arc<UserTable>),
}

/// A [`ProcessSpec`] bound to a domain, ready to generate paths.
#[derive(Debug, Clone)]
pub struct Sampler {
    domain: Domain,
    kind: SamplerKind,
}

impl Sampler {
    pub fn new(spec: &ProcessSpec, domain: Domain) -> Result<Self> {
        spec.validate()?;
        let pos = domain.positions();
        let kind = match spec {
            ProcessSpec::Wiener => {
                if pos[0] < 0.0 || !pos.iter().all(|t| t.is_finite()) {
                    return Err(Error::invalid("domain", "wiener needs finite times >= 0"));
                }
                SamplerKind::Wiener
            }
            ProcessSpec::Eta0 { delta } => {
                if pos[0] < 0.0 || *pos.last().expect("non-empty") > ETA0_T_MAX * (1.0 + 1e-12) {
                    return Err(Error::invalid("domain", "eta0 nodes must lie in [0, e^-4]"));
                }
                let scale = pos
                    .iter()
                    .map(|&t| if t == 0.0 { 0.0 } else { eta0_scale(t, *delta) })
                    .collect();
                SamplerKind::Eta0 { scale }
            }
            ProcessSpec::RandomTrig {
                max_degree,
                law,
                decay,
            } => {
                let scales = decay.scales(*max_degree)?;
                let mut cos = Vec::with_capacity(max_degree * pos.len());
                let mut sin = Vec::with_capacity(max_degree * pos.len());
                for k in 1..=*max_degree {
                    for &t in &pos {
                        let (s, c) = (k as f64 * t).sin_cos();
                        cos.push(c);
                        sin.push(s);
                    }
                }
                SamplerKind::RandomTrig {
                    law: *law,
                    scales,
                    cos,
                    sin,
                }
            }
            ProcessSpec::SequenceExample { alpha, p0 } => {
                let model = SequenceExample::new(*alpha, *p0)?;
                let n_max = pos.len() - 1;
                if sequence_domain(n_max)? != domain {
                    return Err(Error::invalid(
                        "domain",
                        "sequence_example needs the index domain {1..n_max, inf}",
                    ));
                }
                SamplerKind::Sequence { model, n_max }
            }
            ProcessSpec::UserTable { path } => {
                let table = UserTable::from_csv(path)?;
                if table.domain != domain {
                    return Err(Error::invalid("domain", "user_table defines its own nodes"));
                }
                SamplerKind::Table(Arc::new(table))
            }
        };
        Ok(Self { domain, kind })
    }

    /// Sampler over the nodes of an already loaded table.
    pub fn from_table(table: UserTable) -> Self {
        Self {
            domain: table.domain.clone(),
            kind: SamplerKind::Table(Arc::new(table)),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// One realization drawn from `rng`.
    pub fn fill_path(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.kind {
            SamplerKind::RandomTrig { .. } => {
                let mut coef = Vec::new();
                self.accumulate_coefficients(rng, &mut coef);
                self.evaluate_trig(&coef, 1.0, out);
            }
            _ => self.fill_direct(rng, out),
        }
    }

    fn fill_direct(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.kind {
            SamplerKind::Wiener => brownian_path(&self.domain.positions(), rng, out),
            SamplerKind::Eta0 { scale } => {
                brownian_path(&self.domain.positions(), rng, out);
                for (o, s) in out.iter_mut().zip(scale) {
                    *o *= s;
                }
            }
            SamplerKind::Sequence { model, n_max } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let v = 1.0 - rng.random::<f64>();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if let (norm, Some(n)) = model.norm_at(v) {
                    if n <= *n_max as f64 {
                        out[n as usize - 1] = sign * norm;
                    }
                }
            }
            SamplerKind::Table(table) => {
                let row = rng.random_range(0..table.rows);
                let c = table.domain.len();
                out.copy_from_slice(&table.data[row * c..(row + 1) * c]);
            }
            SamplerKind::RandomTrig { .. } => unreachable!("handled in fill_path"),
        }
    }

    fn accumulate_coefficients(&self, rng: &mut StreamRng, acc: &mut Vec<f64>) {
        if let SamplerKind::RandomTrig { law, scales, .. } = &self.kind {
            acc.resize(2 * scales.len(), 0.0);
            for a in acc.iter_mut() {
                *a += law.draw(rng);
            }
        }
    }

    fn evaluate_trig(&self, coef: &[f64], factor: f64, out: &mut [f64]) {
        let SamplerKind::RandomTrig {
            scales, cos, sin, ..
        } = &self.kind
        else {
            unreachable!()
        };
        let m = out.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, s) in scales.iter().enumerate() {
            let a = factor * s * coef[2 * k];
            let b = factor * s * coef[2 * k + 1];
            let (ck, sk) = (&cos[k * m..(k + 1) * m], &sin[k * m..(k + 1) * m]);
            for ((o, c), sn) in out.iter_mut().zip(ck).zip(sk) {
                *o += a * c + b * sn;
            }
        }
    }

    /// `count` independent realizations; realization `i` uses stream `i`.
    pub fn sample(&self, count: usize, master_seed: u64) -> PathEnsemble {
        PathEnsemble::generate(self.domain.clone(), count, master_seed, |i, row| {
            let mut rng = stream_rng(master_seed, i as u64);
            self.fill_path(&mut rng, row);
        })
    }

    /// `count` realizations of `ζ_n = n^{-1/2} Σ_{j<n} η_j`; the copies behind
    /// realization `i` use streams `i·n .. i·n + n - 1`, so `n = 1`
    /// reproduces [`Sampler::sample`].
    pub fn normalized_sum(&self, n: usize, count: usize, master_seed: u64) -> Result<PathEnsemble> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let factor = 1.0 / (n as f64).sqrt();
        let n64 = n as u64;
        Ok(PathEnsemble::generate(
            self.domain.clone(),
            count,
            master_seed,
            |i, row| {
                match &self.kind {
                    SamplerKind::RandomTrig { .. } => {
                        // the process is linear in its coefficients
                        let mut coef = Vec::new();
                        for j in 0..n64 {
                            let mut rng = stream_rng(master_seed, i as u64 * n64 + j);
                            self.accumulate_coefficients(&mut rng, &mut coef);
                        }
                        self.evaluate_trig(&coef, factor, row);
                    }
                    _ => {
                        let mut tmp = vec![0.0; row.len()];
                        row.iter_mut().for_each(|o| *o = 0.0);
                        for j in 0..n64 {
                            let mut rng = stream_rng(master_seed, i as u64 * n64 + j);
                            self.fill_direct(&mut rng, &mut tmp);
                            for (o, v) in row.iter_mut().zip(&tmp) {
                                *o += v;
                            }
                        }
                        row.iter_mut().for_each(|o| *o *= factor);
                    }
                }
            },
        ))
    }

    /// Exact covariance `R(t, s)` where a closed form exists.
    pub fn analytic_covariance(&self) -> Option<CovarianceMatrix> {
        let pos = self.domain.positions();
        let m = pos.len();
        let entries = match &self.kind {
            SamplerKind::Wiener => DMatrix::from_fn(m, m, |i, j| pos[i].min(pos[j])),
            SamplerKind::Eta0 { scale } => {
                DMatrix::from_fn(m, m, |i, j| scale[i] * scale[j] * pos[i].min(pos[j]))
            }
            SamplerKind::RandomTrig { scales, .. } => DMatrix::from_fn(m, m, |i, j| {
                scales
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s * s * ((k + 1) as f64 * (pos[i] - pos[j])).cos())
                    .sum()
            }),
            SamplerKind::Sequence { model, n_max } => DMatrix::from_fn(m, m, |i, j| {
                if i == j && i < *n_max {
                    model.second_moment((i + 1) as f64)
                } else {
                    0.0
                }
            }),
            SamplerKind::Table(_) => return None,
        };
        Some(CovarianceMatrix {
            domain: self.domain.clone(),
            entries,
        })
    }
}

fn eta0_scale(t: f64, delta: f64) -> f64 {
    let ll = (-t.ln()).ln();
    1.0 / ((2.0 * t).sqrt() * ll.powf(0.5 + delta / 2.0))
}

/// Brownian motion on increasing times, `w(0) = 0`, independent Gaussian
/// increments with variance equal to the time step.
fn brownian_path(times: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
    let mut w = 0.0;
    let mut prev = 0.0;
    for (o, &t) in out.iter_mut().zip(times) {
        let dt = t - prev;
        if dt > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            w += dt.sqrt() * z;
        }
        *o = w;
        prev = t;
    }
}

/// Samples `spec` on `domain`.
pub fn sample(
    spec: &ProcessSpec,
    domain: Domain,
    count: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    Ok(Sampler::new(spec, domain)?.sample(count, master_seed))
}

/// Normalized sums `ζ_n` of independent copies drawn by `sampler`.
pub fn normalized_sum(
    sampler: &Sampler,
    n: usize,
    count: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    sampler.normalized_sum(n, count, master_seed)
}

/// Exact supremum over `[0, t_last]` of a Brownian path given its values at
/// the ensemble nodes: between consecutive nodes the path is a Brownian
/// bridge, whose maximum is sampled exactly. A virtual node `(0, 0)` is
/// prepended when the first node is positive.
pub fn wiener_bridge_sup(times: &[f64], values: &[f64], rng: &mut StreamRng) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut prev = (0.0, 0.0);
    if times.first().is_some_and(|&t| t == 0.0) {
        prev = (0.0, values[0]);
    }
    for (&t, &w) in times.iter().zip(values) {
        let dt = t - prev.0;
        if dt > 0.0 {
            let u: f64 = 1.0 - rng.random::<f64>();
            let (a, b) = (prev.1, w);
            let m = 0.5 * (a + b + ((b - a) * (b - a) - 2.0 * dt * u.ln()).sqrt());
            best = best.max(m);
        }
        best = best.max(w);
        prev = (t, w);
    }
    best
}

/// Symmetric covariance matrix `R(t_i, t_j)` over a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    domain: Domain,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(domain: Domain, entries: DMatrix<f64>) -> Result<Self> {
        let m = domain.len();
        if entries.nrows() != m || entries.ncols() != m {
            return Err(Error::invalid(
                "covariance",
                "shape does not match the domain",
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance", "non-finite entry"));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        for i in 0..m {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid("covariance", "matrix is not symmetric"));
                }
            }
        }
        Ok(Self { domain, entries })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_variance(&self) -> f64 {
        self.entries.diagonal().iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// PSD within `10⁻⁸ · ‖R‖`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-8 * self.entries.amax()
    }
}

/// Unbiased sample covariance across realizations, symmetrized.
pub fn empirical_covariance(ens: &PathEnsemble) -> Result<CovarianceMatrix> {
    if ens.rows() < 2 {
        return Err(Error::InsufficientData(
            "covariance needs at least 2 realizations".into(),
        ));
    }
    // shifting by the first realization is exact for constant columns
    let m = ens.cols();
    let first = ens.path(0);
    let shifted = DMatrix::from_fn(ens.rows(), m, |i, j| ens.path(i)[j] - first[j]);
    let means: Vec<f64> = shifted.column_iter().map(|c| c.mean()).collect();
    let centered = DMatrix::from_fn(ens.rows(), m, |i, j| shifted[(i, j)] - means[j]);
    let mut c = centered.tr_mul(&centered) / (ens.rows() - 1) as f64;
    let t = c.transpose();
    c = (c + t) * 0.5;
    CovarianceMatrix::new(ens.domain().clone(), c)
}

/// Canonical distance `τ(t, s) = (Var(η(t) - η(s)))^{1/2}`.
#[derive(Debug, Clone)]
pub struct TauDistance {
    pub matrix: DMatrix<f64>,
    /// Negative radicands clamped to zero (Monte-Carlo noise).
    pub clamped: usize,
}

pub fn tau_distance(cov: &CovarianceMatrix) -> TauDistance {
    let r = cov.entries();
    let m = cov.size();
    let mut clamped = 0;
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = r[(i, i)] + r[(j, j)] - 2.0 * r[(i, j)];
            if v < 0.0 {
                clamped += 1;
            }
            let d = v.max(0.0).sqrt();
            matrix[(i, j)] = d;
            matrix[(j, i)] = d;
        }
    }
    TauDistance { matrix, clamped }
}

/// Factorization `|η(t) - η(s)| ≤ L · q(t, s)` with
/// `L = sup_{t,s} |η(t) - η(s)|` per realization and `q` the largest observed
/// ratio, the sample proxy of the essential supremum.
#[derive(Debug, Clone)]
pub struct FactorizationPair {
    pub l_samples: Vec<f64>,
    pub q: DMatrix<f64>,
    /// All realizations have `L = 0`.
    pub trivial: bool,
    pub realizations: usize,
}

pub fn factorization_pair(ens: &PathEnsemble) -> FactorizationPair {
    let m = ens.cols();
    let l_samples: Vec<f64> = ens
        .paths()
        .map(|p| {
            let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let q = (0..ens.rows())
        .into_par_iter()
        .filter(|&i| l_samples[i] > 0.0)
        .fold(
            || DMatrix::zeros(m, m),
            |mut q: DMatrix<f64>, i| {
                let p = ens.path(i);
                let l = l_samples[i];
                for a in 0..m {
                    for b in 0..a {
                        let r = (p[a] - p[b]).abs() / l;
                        if r > q[(a, b)] {
                            q[(a, b)] = r;
                            q[(b, a)] = r;
                        }
                    }
                }
                q
            },
        )
        .reduce(|| DMatrix::zeros(m, m), |a, b| a.zip_map(&b, f64::max));
    FactorizationPair {
        trivial: l_samples.iter().all(|&l| l == 0.0),
        l_samples,
        q,
        realizations: ens.rows(),
    }
}

/// Settings for [`sequence_example_moments`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceMomentsConfig {
    /// Indices `1..=n_report` for the per-index moments.
    pub n_report: usize,
    pub replicas: usize,
    /// Exponents `p` for `E‖η‖^p`.
    pub p_grid: Vec<f64>,
    /// Running statistics are recorded at `replicas / 2^j`, `j < checkpoints`.
    pub checkpoints: usize,
    /// `|slope|` of log running mean vs log count below this ⇒ stabilized.
    pub stable_slope: f64,
    /// Slope of log running max vs log count at least this ⇒ growing maxima.
    pub growth_slope: f64,
    pub seed: u64,
}

impl Default for SequenceMomentsConfig {
    fn default() -> Self {
        Self {
            n_report: 32,
            replicas: 2_000_000,
            p_grid: vec![1.2, 1.5, 3.0],
            checkpoints: 12,
            stable_slope: 0.1,
            growth_slope: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexMoment {
    pub n: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub second_moment_exact: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormMoment {
    pub p: f64,
    pub counts: Vec<usize>,
    pub running_mean: Vec<f64>,
    pub running_max: Vec<f64>,
    pub mean_slope: f64,
    pub max_slope: f64,
    pub stabilized: bool,
    pub growing_maxima: bool,
    /// `E‖η‖^p < ∞` exactly when `p < p₀`.
    pub finite_in_theory: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceMomentsReport {
    pub alpha: f64,
    pub p0: f64,
    pub replicas: usize,
    pub a1: f64,
    pub per_index: Vec<IndexMoment>,
    /// Least-squares slope of `log E|η_n|²` against `log n`.
    pub decay_exponent: f64,
    /// Same slope for the exact second moments.
    pub decay_exponent_exact: f64,
    pub norms: Vec<NormMoment>,
}

/// Moment diagnostics for the sequence-space example: per-index second
/// moments with a power-law fit, and running means and maxima of `‖η‖^p`.
///
/// Each replica draws `x` and one Rademacher sign; because the supports of
/// the `η_n` are disjoint, `‖η‖` and the active index follow in closed form
/// with no truncation of the index set.
pub fn sequence_example_moments(
    alpha: f64,
    p0: f64,
    cfg: &SequenceMomentsConfig,
) -> Result<SequenceMomentsReport> {
    let model = SequenceExample::new(alpha, p0)?;
    if cfg.replicas < 1 << cfg.checkpoints.max(1) || cfg.checkpoints < 2 {
        return Err(Error::invalid(
            "replicas",
            "need at least 2 checkpoints and replicas >= 2^checkpoints",
        ));
    }
    let draws: Vec<(f64, Option<f64>, f64)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let v = 1.0 - rng.random::<f64>();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let (norm, n) = model.norm_at(v);
            (norm, n, sign)
        })
        .collect();

    let mut sum = vec![0.0; cfg.n_report];
    let mut sum_sq = vec![0.0; cfg.n_report];
    let mut hits = vec![0usize; cfg.n_report];
    for &(norm, n, sign) in &draws {
        if let Some(n) = n {
            if n <= cfg.n_report as f64 {
                let k = n as usize - 1;
                sum[k] += sign * norm;
                sum_sq[k] += norm * norm;
                hits[k] += 1;
            }
        }
    }
    let r = cfg.replicas as f64;
    let per_index: Vec<IndexMoment> = (0..cfg.n_report)
        .map(|k| IndexMoment {
            n: k + 1,
            mean: sum[k] / r,
            second_moment: sum_sq[k] / r,
            second_moment_exact: model.second_moment((k + 1) as f64),
            hits: hits[k],
        })
        .collect();
    let fit = |pick: &dyn Fn(&IndexMoment) -> f64| {
        let (x, y): (Vec<f64>, Vec<f64>) = per_index
            .iter()
            .filter(|m| pick(m) > 0.0)
            .map(|m| ((m.n as f64).ln(), pick(m).ln()))
            .unzip();
        crate::stats::linear_fit(&x, &y)
            .map(|f| f.slope)
            .unwrap_or(f64::NAN)
    };
    let decay_exponent = fit(&|m| m.second_moment);
    let decay_exponent_exact = fit(&|m| m.second_moment_exact);

    let counts: Vec<usize> = (0..cfg.checkpoints)
        .rev()
        .map(|j| cfg.replicas >> j)
        .collect();
    let norms = cfg
        .p_grid
        .iter()
        .map(|&p| {
            let mut running_mean = Vec::new();
            let mut running_max = Vec::new();
            let (mut s, mut mx) = (0.0, 0.0f64);
            let mut next = 0;
            for (i, &(norm, _, _)) in draws.iter().enumerate() {
                let z = norm.powf(p);
                s += z;
                mx = mx.max(z);
                if next < counts.len() && i + 1 == counts[next] {
                    running_mean.push(s / (i + 1) as f64);
                    running_max.push(mx);
                    next += 1;
                }
            }
            let slope = |ys: &[f64]| {
                let (x, y): (Vec<f64>, Vec<f64>) = counts
                    .iter()
                    .zip(ys)
                    .filter(|(_, &y)| y > 0.0)
                    .map(|(&c, &y)| ((c as f64).ln(), y.ln()))
                    .unzip();
                crate::stats::linear_fit(&x, &y)
                    .map(|f| f.slope)
                    .unwrap_or(0.0)
            };
            let mean_slope = slope(&running_mean);
            let max_slope = slope(&running_max);
            NormMoment {
                p,
                counts: counts.clone(),
                stabilized: mean_slope.abs() < cfg.stable_slope,
                growing_maxima: max_slope >= cfg.growth_slope,
                running_mean,
                running_max,
                mean_slope,
                max_slope,
                finite_in_theory: p < p0,
            }
        })
        .collect();

    Ok(SequenceMomentsReport {
        alpha,
        p0,
        replicas: cfg.replicas,
        a1: model.a(1.0),
        per_index,
        decay_exponent,
        decay_exponent_exact,
        norms,
    })
}

/// Positions of a periodic grid, for callers that only need `t_j`.
pub fn periodic_positions(size: usize) -> Vec<f64> {
    (0..size).map(|j| TAU * j as f64 / size as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig(max_degree: usize, law: CoefficientLaw) -> ProcessSpec {
        ProcessSpec::RandomTrig {
            max_degree,
            law,
            decay: SpectralDecay::Power { exponent: 1.0 },
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ProcessSpec::Eta0 { delta: 0.5 }.validate().is_err());
        assert!(ProcessSpec::Eta0 { delta: 0.0 }.validate().is_err());
        assert!(ProcessSpec::Eta0 { delta: 0.1 }.validate().is_ok());
        assert!(ProcessSpec::SequenceExample {
            alpha: 0.5,
            p0: 2.0
        }
        .validate()
        .is_err());
        // alpha must stay below min(1, p0/(2-p0)); p0 = 1.1 gives 11/9 so the cap is 1
        assert!(ProcessSpec::SequenceExample {
            alpha: 1.0,
            p0: 1.1
        }
        .validate()
        .is_err());
        assert!(ProcessSpec::SequenceExample {
            alpha: 0.99,
            p0: 1.1
        }
        .validate()
        .is_ok());
        assert!(ProcessSpec::SequenceExample {
            alpha: 0.0,
            p0: 1.5
        }
        .validate()
        .is_err());
        assert!(ProcessSpec::SequenceExample {
            alpha: 0.5,
            p0: 1.5
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn spec_json_roundtrip_and_unknown_keys() {
        let spec = trig(4, CoefficientLaw::Rademacher);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ProcessSpec>(&text).unwrap(), spec);
        let bad = r#"{"kind":"eta0","delta":0.1,"bogus":1}"#;
        assert!(serde_json::from_str::<ProcessSpec>(bad).is_err());
    }

    #[test]
    fn eta0_is_zero_at_origin() {
        let spec = ProcessSpec::Eta0 { delta: 0.1 };
        let ens = sample(&spec, eta0_nodes(50, 30.0).unwrap(), 200, 3).unwrap();
        assert!(ens.paths().all(|p| p[0] == 0.0));
        assert!(ens.paths().any(|p| p[10] != 0.0));
    }

    #[test]
    fn eta0_variance_matches_closed_form() {
        let delta = 0.1;
        let dom = eta0_nodes(20, 30.0).unwrap();
        let ens = sample(&ProcessSpec::Eta0 { delta }, dom.clone(), 40_000, 11).unwrap();
        let var = ens.column_variances();
        for (t, v) in dom.positions().iter().zip(var).skip(1) {
            let ll = (-t.ln()).ln();
            let exact = 1.0 / (2.0 * ll.powf(1.0 + delta));
            assert!((v - exact).abs() < 0.05 * exact, "t={t} {v} vs {exact}");
        }
    }

    #[test]
    fn wiener_variance_is_time() {
        let dom = Domain::points((1..=16).map(|j| j as f64 / 16.0).collect()).unwrap();
        let ens = sample(&ProcessSpec::Wiener, dom.clone(), 100_000, 5).unwrap();
        for (t, v) in dom.positions().iter().zip(ens.column_variances()) {
            assert!((v - t).abs() < 0.05 * t, "t={t} var={v}");
        }
    }

    #[test]
    fn built_in_processes_are_centered() {
        let r = 100_000;
        let cases = [
            (ProcessSpec::Wiener, Domain::periodic(16).unwrap()),
            (
                trig(5, CoefficientLaw::Uniform),
                Domain::periodic(16).unwrap(),
            ),
            (
                ProcessSpec::Eta0 { delta: 0.2 },
                eta0_nodes(16, 20.0).unwrap(),
            ),
            (
                ProcessSpec::SequenceExample {
                    alpha: 0.5,
                    p0: 1.5,
                },
                sequence_domain(15).unwrap(),
            ),
        ];
        for (spec, dom) in cases {
            let ens = sample(&spec, dom, r, 9).unwrap();
            let sd: Vec<f64> = ens.column_variances().iter().map(|v| v.sqrt()).collect();
            for (m, s) in ens.column_means().iter().zip(sd) {
                assert!(
                    m.abs() <= 4.0 * s / (r as f64).sqrt() + 1e-15,
                    "{spec:?}: mean {m} sd {s}"
                );
            }
        }
    }

    #[test]
    fn determinism_across_thread_counts() {
        let spec = trig(6, CoefficientLaw::Normal);
        let dom = Domain::periodic(32).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let s = Sampler::new(&spec, dom.clone()).unwrap();
                    (s.sample(300, 42), s.normalized_sum(7, 50, 42).unwrap())
                })
        };
        let (a1, b1) = run(1);
        let (a8, b8) = run(8);
        assert_eq!(a1, a8);
        assert_eq!(b1, b8);
    }

    #[test]
    fn normalized_sum_n1_reproduces_base() {
        for spec in [trig(3, CoefficientLaw::Rademacher), ProcessSpec::Wiener] {
            let s = Sampler::new(&spec, Domain::periodic(16).unwrap()).unwrap();
            assert_eq!(s.sample(20, 8), s.normalized_sum(1, 20, 8).unwrap());
        }
    }

    #[test]
    fn normalized_sum_preserves_variance() {
        let s = Sampler::new(
            &trig(4, CoefficientLaw::Rademacher),
            Domain::periodic(16).unwrap(),
        )
        .unwrap();
        let exact = s.analytic_covariance().unwrap();
        for n in [1, 5, 40] {
            let z = s.normalized_sum(n, 20_000, 1).unwrap();
            for (j, v) in z.column_variances().iter().enumerate() {
                let r = exact.entries()[(j, j)];
                assert!((v - r).abs() < 0.05 * r, "n={n} j={j} {v} vs {r}");
            }
            let sd = exact.max_variance().sqrt();
            assert!(z
                .column_means()
                .iter()
                .all(|m| m.abs() < 4.0 * sd / (20_000f64).sqrt()));
        }
        // generic path-summing route for a non-linear-coefficient process
        let w = Sampler::new(&ProcessSpec::Wiener, Domain::periodic(8).unwrap()).unwrap();
        let z = w.normalized_sum(9, 20_000, 2).unwrap();
        for (t, v) in periodic_positions(8)
            .iter()
            .zip(z.column_variances())
            .skip(1)
        {
            assert!((v - t).abs() < 0.05 * t);
        }
    }

    #[test]
    fn covariance_of_zero_ensemble() {
        let ens = PathEnsemble::zeros(Domain::periodic(8).unwrap(), 10);
        let c = empirical_covariance(&ens).unwrap();
        assert_eq!(c.entries().amax(), 0.0);
        assert!(
            empirical_covariance(&PathEnsemble::zeros(Domain::periodic(8).unwrap(), 1)).is_err()
        );
    }

    #[test]
    fn covariance_matches_random_trig_closed_form() {
        let s = Sampler::new(
            &trig(3, CoefficientLaw::Uniform),
            Domain::periodic(8).unwrap(),
        )
        .unwrap();
        let emp = empirical_covariance(&s.sample(100_000, 4)).unwrap();
        let exact = s.analytic_covariance().unwrap();
        let scale = exact.max_variance();
        let diff = (emp.entries() - exact.entries()).amax();
        assert!(diff < 0.05 * scale, "max diff {diff}");
        assert!(emp.is_psd());
        assert_eq!(emp.entries(), &emp.entries().transpose());
    }

    #[test]
    fn tau_examples() {
        let dom = Domain::periodic(16).unwrap();
        let zero = CovarianceMatrix::new(dom.clone(), DMatrix::zeros(16, 16)).unwrap();
        assert_eq!(tau_distance(&zero).matrix.amax(), 0.0);
        // η(t) = G cos t
        let pos = dom.positions();
        let r = DMatrix::from_fn(16, 16, |i, j| pos[i].cos() * pos[j].cos());
        let tau = tau_distance(&CovarianceMatrix::new(dom, r).unwrap());
        for i in 0..16 {
            for j in 0..16 {
                let exact = (pos[i].cos() - pos[j].cos()).abs();
                assert!((tau.matrix[(i, j)] - exact).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn tau_of_eta0_against_origin() {
        let delta = 0.1;
        let dom = eta0_nodes(12, 25.0).unwrap();
        let s = Sampler::new(&ProcessSpec::Eta0 { delta }, dom.clone()).unwrap();
        let tau = tau_distance(&s.analytic_covariance().unwrap());
        for (i, t) in dom.positions().iter().enumerate().skip(1) {
            let ll = (-t.ln()).ln();
            let exact = 1.0 / (2.0 * ll.powf(1.0 + delta));
            assert!((tau.matrix[(i, 0)].powi(2) - exact).abs() < 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn tau_is_semimetric_for_sampled_covariance() {
        let s = Sampler::new(
            &trig(6, CoefficientLaw::Normal),
            Domain::periodic(12).unwrap(),
        )
        .unwrap();
        let tau = tau_distance(&empirical_covariance(&s.sample(500, 1)).unwrap());
        let d = &tau.matrix;
        for i in 0..12 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..12 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                for k in 0..12 {
                    assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn factorization_examples() {
        let dom = Domain::periodic(4).unwrap();
        let flat = PathEnsemble::new(dom.clone(), 2, vec![1.0; 8], 0).unwrap();
        let fp = factorization_pair(&flat);
        assert!(fp.trivial);
        assert_eq!(fp.q.amax(), 0.0);

        let two = Domain::points(vec![0.0, 1.0]).unwrap();
        let ens = PathEnsemble::new(two, 2, vec![1.0, -1.0, -1.0, 1.0], 0).unwrap();
        let fp = factorization_pair(&ens);
        assert_eq!(fp.l_samples, vec![2.0, 2.0]);
        assert_eq!(fp.q[(0, 1)], 1.0);
    }

    #[test]
    fn factorization_inequality_and_triangle() {
        let s = Sampler::new(&ProcessSpec::Wiener, Domain::periodic(10).unwrap()).unwrap();
        let ens = s.sample(300, 77);
        let fp = factorization_pair(&ens);
        let q = &fp.q;
        for (p, l) in ens.paths().zip(&fp.l_samples) {
            for a in 0..10 {
                for b in 0..10 {
                    assert!((p[a] - p[b]).abs() <= l * q[(a, b)] * (1.0 + 1e-12) + 1e-15);
                }
            }
        }
        for a in 0..10 {
            assert_eq!(q[(a, a)], 0.0);
            for b in 0..10 {
                assert!(q[(a, b)] <= 1.0);
                for c in 0..10 {
                    assert!(q[(a, c)] <= q[(a, b)] + q[(b, c)] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn sequence_example_closed_forms() {
        let m = SequenceExample::new(0.5, 1.5).unwrap();
        assert_eq!(m.a(1.0), 0.5);
        for n in [1.0, 7.0, 1e6] {
            let w = m.a(n + 1.0) - m.a(n);
            assert!((m.width(n) - w).abs() < 1e-9 * w.max(1e-12) + 1e-15);
        }
        // locate inverts a(n) <= x < a(n+1)
        for &v in &[0.5, 0.3, 0.1, 1e-3, 1e-9] {
            let (n, y) = m.locate(v).unwrap();
            let x = 1.0 - v;
            assert!(
                m.a(n) <= x + 1e-12 && x < m.a(n + 1.0) + 1e-12,
                "v={v} n={n}"
            );
            assert!((0.0..1.0).contains(&y));
        }
        assert!(m.locate(0.7).is_none());
    }

    #[test]
    fn sequence_moments_decay_and_centering() {
        let cfg = SequenceMomentsConfig {
            replicas: 1 << 16,
            p_grid: vec![1.2],
            ..Default::default()
        };
        let rep = sequence_example_moments(0.5, 1.5, &cfg).unwrap();
        assert_eq!(rep.a1, 0.5);
        assert!(rep.decay_exponent < 0.0);
        // least-squares slope of log(c(n)^2 Δ(n)) over n = 1..32, computed offline
        assert!((rep.decay_exponent_exact + 0.722_837_74).abs() < 1e-6);
        assert!((rep.decay_exponent - rep.decay_exponent_exact).abs() < 0.15);
        for m in &rep.per_index {
            let sd = m.second_moment_exact.sqrt();
            assert!(m.mean.abs() <= 5.0 * sd / (cfg.replicas as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn user_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("paths.csv");
        std::fs::write(&path, "0,0.5,1\n1,2,3\n3,2,1\n").unwrap();
        let table = UserTable::from_csv(&path).unwrap();
        assert_eq!(table.rows(), 2);
        let s = Sampler::new(
            &ProcessSpec::UserTable { path: path.clone() },
            table.domain().clone(),
        )
        .unwrap();
        let ens = s.sample(50, 1);
        for p in ens.paths() {
            assert!(p == [-1.0, 0.0, 1.0] || p == [1.0, 0.0, -1.0]);
        }
        std::fs::write(&path, "0,1\n1,x\n").unwrap();
        assert!(matches!(
            UserTable::from_csv(&path),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bridge_sup_dominates_grid_max() {
        let dom = Domain::points((1..=8).map(|j| j as f64 / 8.0).collect()).unwrap();
        let ens = sample(&ProcessSpec::Wiener, dom.clone(), 100, 3).unwrap();
        let pos = dom.positions();
        for (i, p) in ens.paths().enumerate() {
            let mut rng = stream_rng(99, i as u64);
            let s = wiener_bridge_sup(&pos, p, &mut rng);
            assert!(s >= p.iter().cloned().fold(0.0, f64::max));
        }
    }
}
