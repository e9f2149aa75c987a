//! Trigonometric approximation on an equispaced periodic grid.
//!
//! Everything here works in coefficient space: a grid function is analyzed
//! with an FFT, its spectrum is multiplied by a real, even gain sequence and
//! synthesized back. Partial Fourier sums, de la Vallée-Poussin sums and the
//! dyadic block operators are all gain sequences of this kind. The closed-form
//! kernel [`vp_kernel_eval`] is kept for cross-checking the multipliers.
//!
//! Convolution normalization: with `V[f](t) = (1/π) ∫_0^{2π} f(s) K(t - s) ds`
//! the kernel reproduces the averaged partial sums, because
//! `K_{n,p}(t) = 1/2 + Σ_{j≥1} g_j cos(jt)` with the gains `g_j` of
//! [`VPOperatorSpec::gain`].

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 1024;

/// `N` equispaced nodes `t_j = 2πj/N` on `[0, 2π)`; index `N` wraps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PeriodicGrid {
    size: usize,
}

impl PeriodicGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_multiple_of(2) {
            return Err(Error::invalid(
                "grid_size",
                format!("must be even and at least 4, got {size}"),
            ));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self) -> f64 {
        TAU / self.size as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        TAU * (j % self.size) as f64 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|j| self.node(j)).collect()
    }

    /// Largest trigonometric degree `n` with `2n < N`.
    pub fn max_degree(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn check_degree(&self, degree: usize) -> Result<()> {
        if 2 * degree >= self.size {
            Err(Error::Aliasing {
                degree,
                grid_size: self.size,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for PeriodicGrid {
    fn default() -> Self {
        Self {
            size: DEFAULT_GRID_SIZE,
        }
    }
}

impl TryFrom<usize> for PeriodicGrid {
    type Error = Error;
    fn try_from(size: usize) -> Result<Self> {
        Self::new(size)
    }
}

impl From<PeriodicGrid> for usize {
    fn from(grid: PeriodicGrid) -> usize {
        grid.size
    }
}

/// Real values of a periodic function at the nodes of a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::invalid(
                "values",
                format!("expected {} values, got {}", grid.size(), values.len()),
            ));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("non-finite value at node {j}"),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.size()],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// `max_j |self(t_j) - other(t_j)|`.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Complex coefficients `c_k`, `k = -n..=n`, of a trigonometric polynomial
/// `Σ c_k e^{ikt}` of degree at most `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigCoefficients {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl TrigCoefficients {
    /// Builds from `c_{-n}..=c_n` (length `2n+1`).
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 != 1 {
            return Err(Error::invalid("coeffs", "length must be odd (2n+1)"));
        }
        Ok(Self {
            degree: coeffs.len() / 2,
            coeffs,
        })
    }

    /// Real trigonometric polynomial `a_0 + Σ_{k≥1} (a_k cos kt + b_k sin kt)`.
    /// `cos` holds `a_0..a_n`, `sin` holds `b_1..b_n`.
    pub fn from_real(cos: &[f64], sin: &[f64]) -> Result<Self> {
        if cos.is_empty() || sin.len() + 1 != cos.len() {
            return Err(Error::invalid(
                "coeffs",
                "need a_0..a_n and b_1..b_n with matching degree",
            ));
        }
        let n = cos.len() - 1;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        coeffs[n] = Complex64::new(cos[0], 0.0);
        for k in 1..=n {
            let c = Complex64::new(cos[k] / 2.0, -sin[k - 1] / 2.0);
            coeffs[n + k] = c;
            coeffs[n - k] = c.conj();
        }
        Ok(Self { degree: n, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `c_k`; zero outside `-n..=n`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.degree as i64;
        if k.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + n) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Evaluates the polynomial on the grid.
    pub fn synthesize(&self, grid: PeriodicGrid) -> Result<GridFunction> {
        partial_sum(self, self.degree, grid)
    }
}

/// Parameters of the de la Vallée-Poussin operator `V_{n,p}`: the average of
/// the partial sums `S_{n-p}, ..., S_n`.
///
/// `p = 0` gives the partial sum `S_n` and `p = n` the Fejér mean; the default
/// window is `p = ⌊n/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VPOperatorSpec {
    pub n: usize,
    pub p: usize,
}

impl VPOperatorSpec {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p > n {
            return Err(Error::invalid(
                "p",
                format!("window {p} exceeds degree {n}"),
            ));
        }
        Ok(Self { n, p })
    }

    pub fn with_default_window(n: usize) -> Self {
        Self { n, p: n / 2 }
    }

    /// Multiplier applied to frequency `±j`: 1 up to `n - p`, then decaying
    /// linearly to `1/(p+1)` at `j = n`, zero above.
    pub fn gain(&self, j: usize) -> f64 {
        if j + self.p <= self.n {
            1.0
        } else if j <= self.n {
            (self.n - j + 1) as f64 / (self.p + 1) as f64
        } else {
            0.0
        }
    }
}

impl fmt::Display for VPOperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V[n={}, p={}]", self.n, self.p)
    }
}

/// Strictly increasing degrees `n(1) = 1 < n(2) < ...` defining the blocks
/// `Z_k = V_{n(k+1)} - V_{n(k)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DyadicSequence {
    terms: Vec<usize>,
}

impl DyadicSequence {
    pub fn new(terms: Vec<usize>) -> Result<Self> {
        if terms.len() < 2 {
            return Err(Error::invalid("sequence", "need at least two terms"));
        }
        if terms[0] != 1 {
            return Err(Error::invalid("sequence", "first term must be 1"));
        }
        if let Some(w) = terms.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "sequence",
                format!("not strictly increasing at {} >= {}", w[0], w[1]),
            ));
        }
        Ok(Self { terms })
    }

    /// `n(k) = 2^{k-1}`, `k = 1..=len`.
    pub fn dyadic(len: usize) -> Result<Self> {
        if len >= 64 {
            return Err(Error::invalid("sequence", "dyadic length must be below 64"));
        }
        Self::new((0..len).map(|k| 1usize << k).collect())
    }

    /// Longest dyadic sequence whose blocks fit on `grid`.
    pub fn dyadic_for_grid(grid: PeriodicGrid) -> Self {
        let mut len = 1;
        while 2 * (1usize << len) < grid.size() {
            len += 1;
        }
        Self::dyadic(len.max(2)).expect("valid dyadic length")
    }

    pub fn terms(&self) -> &[usize] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of blocks `Z_1..Z_{K-1}`.
    pub fn block_count(&self) -> usize {
        self.terms.len() - 1
    }

    /// `(n(k), n(k+1))` for block `k` (1-based).
    pub fn block_degrees(&self, k: usize) -> Result<(usize, usize)> {
        if k == 0 || k >= self.terms.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                valid: format!("1..={}", self.block_count()),
            });
        }
        Ok((self.terms[k - 1], self.terms[k]))
    }

    /// Degree of the top VP sum, `n(K)`.
    pub fn top_degree(&self) -> usize {
        *self.terms.last().expect("non-empty")
    }
}

impl TryFrom<Vec<usize>> for DyadicSequence {
    type Error = Error;
    fn try_from(terms: Vec<usize>) -> Result<Self> {
        Self::new(terms)
    }
}

impl From<DyadicSequence> for Vec<usize> {
    fn from(seq: DyadicSequence) -> Vec<usize> {
        seq.terms
    }
}

/// Closed-form Vallée-Poussin kernel
/// `sin((2n+1-p)t/2) sin((p+1)t/2) / (2(p+1) sin²(t/2))`,
/// with the limit `(2n+1-p)/2` at `t ≡ 0 (mod 2π)`.
pub fn vp_kernel_eval(spec: VPOperatorSpec, t: f64) -> f64 {
    let mut r = t.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    let a = (2 * spec.n + 1 - spec.p) as f64;
    let b = (spec.p + 1) as f64;
    if r.abs() < 1e-100 {
        return a / 2.0;
    }
    let s = (r / 2.0).sin();
    (a * r / 2.0).sin() * (b * r / 2.0).sin() / (2.0 * b * s * s)
}

/// Same kernel from its cosine expansion `1/2 + Σ g_j cos(jt)`.
pub fn vp_kernel_series(spec: VPOperatorSpec, t: f64) -> f64 {
    0.5 + (1..=spec.n)
        .map(|j| spec.gain(j) * (j as f64 * t).cos())
        .sum::<f64>()
}

/// Forward/inverse FFT pair for one grid size.
#[derive(Clone)]
struct FftPair {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    /// Discrete Fourier coefficients `c_k = N^{-1} Σ_j f_j e^{-ikt_j}` in FFT
    /// order.
    fn analyze(&self, values: &[f64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(values.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward.process(buf);
        let scale = 1.0 / self.size as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Applies even gains `gains[j]` (frequency `±j`) to an analyzed spectrum
    /// and writes the real synthesis into `out`.
    fn filter(
        &self,
        spectrum: &[Complex64],
        gains: &[f64],
        work: &mut Vec<Complex64>,
        out: &mut [f64],
    ) {
        let n = self.size;
        work.clear();
        work.resize(n, Complex64::new(0.0, 0.0));
        work[0] = spectrum[0] * gains.first().copied().unwrap_or(0.0);
        for (j, &g) in gains.iter().enumerate().skip(1) {
            if g == 0.0 || j >= n - j {
                continue;
            }
            work[j] = spectrum[j] * g;
            work[n - j] = spectrum[n - j] * g;
        }
        self.inverse.process(work);
        for (o, w) in out.iter_mut().zip(work.iter()) {
            *o = w.re;
        }
    }
}

/// A real even multiplier operator on grid functions, `f ↦ Σ g_{|k|} c_k e^{ikt}`.
///
/// Instances are immutable and can be shared across threads.
#[derive(Clone)]
pub struct SpectralFilter {
    grid: PeriodicGrid,
    gains: Vec<f64>,
    fft: FftPair,
}

impl fmt::Debug for SpectralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralFilter")
            .field("grid", &self.grid)
            .field("gains", &self.gains)
            .finish()
    }
}

impl SpectralFilter {
    /// `gains[j]` multiplies frequencies `±j`; the highest nonzero gain must
    /// be alias-free on `grid`.
    pub fn from_gains(grid: PeriodicGrid, gains: Vec<f64>) -> Result<Self> {
        if let Some(top) = gains.iter().rposition(|&g| g != 0.0) {
            grid.check_degree(top)?;
        }
        Ok(Self {
            grid,
            gains,
            fft: FftPair::new(grid.size()),
        })
    }

    pub fn partial_sum(grid: PeriodicGrid, k: usize) -> Result<Self> {
        Self::from_gains(grid, vec![1.0; k + 1])
    }

    pub fn vallee_poussin(grid: PeriodicGrid, spec: VPOperatorSpec) -> Result<Self> {
        Self::from_gains(grid, (0..=spec.n).map(|j| spec.gain(j)).collect())
    }

    /// `Z_k = V_{n(k+1), p(n(k+1))} - V_{n(k), p(n(k))}`.
    pub fn block(grid: PeriodicGrid, seq: &DyadicSequence, k: usize) -> Result<Self> {
        let (lo, hi) = seq.block_degrees(k)?;
        let lo = VPOperatorSpec::with_default_window(lo);
        let hi = VPOperatorSpec::with_default_window(hi);
        Self::from_gains(grid, (0..=hi.n).map(|j| hi.gain(j) - lo.gain(j)).collect())
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.size()];
        let mut scratch = FilterScratch::default();
        self.apply_into(values, &mut scratch, &mut out);
        out
    }

    /// Allocation-free variant for batch use over ensembles.
    pub fn apply_into(&self, values: &[f64], scratch: &mut FilterScratch, out: &mut [f64]) {
        assert_eq!(values.len(), self.grid.size(), "length mismatch");
        self.fft.analyze(values, &mut scratch.spectrum);
        self.fft
            .filter(&scratch.spectrum, &self.gains, &mut scratch.work, out);
    }

    pub fn apply_fn(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != self.grid {
            return Err(Error::invalid("grid", "filter and function grids differ"));
        }
        Ok(GridFunction {
            grid: self.grid,
            values: self.apply(f.values()),
        })
    }
}

/// Reusable buffers for [`SpectralFilter::apply_into`].
#[derive(Debug, Default)]
pub struct FilterScratch {
    spectrum: Vec<Complex64>,
    work: Vec<Complex64>,
}

/// Discrete Fourier coefficients `c_{-n..=n}` of `f`.
pub fn fourier_analyze(f: &GridFunction, max_degree: usize) -> Result<TrigCoefficients> {
    let grid = f.grid();
    grid.check_degree(max_degree)?;
    let fft = FftPair::new(grid.size());
    let mut spec = Vec::new();
    fft.analyze(f.values(), &mut spec);
    let n = grid.size();
    let coeffs = (-(max_degree as i64)..=max_degree as i64)
        .map(|k| spec[k.rem_euclid(n as i64) as usize])
        .collect();
    Ok(TrigCoefficients {
        degree: max_degree,
        coeffs,
    })
}

/// `S_k` of the polynomial `c`, evaluated on `grid`.
pub fn partial_sum(c: &TrigCoefficients, k: usize, grid: PeriodicGrid) -> Result<GridFunction> {
    if k > c.degree() {
        return Err(Error::invalid(
            "k",
            format!(
                "partial sum order {k} exceeds coefficient degree {}",
                c.degree()
            ),
        ));
    }
    grid.check_degree(k)?;
    let n = grid.size();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for j in -(k as i64)..=k as i64 {
        buf[j.rem_euclid(n as i64) as usize] = c.coeff(j);
    }
    FftPair::new(n).inverse.process(&mut buf);
    GridFunction::new(grid, buf.iter().map(|z| z.re).collect())
}

/// `V_{n,⌊n/2⌋}[f]` via the coefficient multiplier.
pub fn vp_sum(f: &GridFunction, n: usize) -> Result<GridFunction> {
    vp_sum_with(f, VPOperatorSpec::with_default_window(n))
}

pub fn vp_sum_with(f: &GridFunction, spec: VPOperatorSpec) -> Result<GridFunction> {
    SpectralFilter::vallee_poussin(f.grid(), spec)?.apply_fn(f)
}

/// `V_{n,p}[f]` as the literal average `(p+1)^{-1} Σ_{k=n-p}^{n} S_k[f]`.
pub fn vp_sum_averaged(f: &GridFunction, spec: VPOperatorSpec) -> Result<GridFunction> {
    let grid = f.grid();
    let c = fourier_analyze(f, spec.n)?;
    let mut acc = vec![0.0; grid.size()];
    for k in spec.n - spec.p..=spec.n {
        let s = partial_sum(&c, k, grid)?;
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v;
        }
    }
    let w = 1.0 / (spec.p + 1) as f64;
    GridFunction::new(grid, acc.into_iter().map(|a| a * w).collect())
}

/// Block `Z_k[f] = V_{n(k+1)}[f] - V_{n(k)}[f]` (k is 1-based).
pub fn block_component(f: &GridFunction, seq: &DyadicSequence, k: usize) -> Result<GridFunction> {
    SpectralFilter::block(f.grid(), seq, k)?.apply_fn(f)
}

/// Upper bound on the best uniform approximation error `E(m, f)`.
///
/// Each candidate is a polynomial of degree at most `m`: the partial sums
/// `S_j`, the Vallée-Poussin sums `V_{j,⌊j/2⌋}` and the Fejér means `V_{j,j}`
/// for `j ≤ m`. The bound is the smallest sup-norm residual among them, so it
/// is nonincreasing in `m`. It is not the minimax value.
pub fn best_error_ub(f: &GridFunction, m: usize) -> Result<f64> {
    Ok(*best_error_profile(f, m)?.last().expect("m+1 entries"))
}

/// [`best_error_ub`] for every `m = 0..=m_max`.
pub fn best_error_profile(f: &GridFunction, m_max: usize) -> Result<Vec<f64>> {
    let grid = f.grid();
    grid.check_degree(m_max)?;
    let fft = FftPair::new(grid.size());
    let mut spectrum = Vec::new();
    fft.analyze(f.values(), &mut spectrum);
    let mut work = Vec::new();
    let mut approx = vec![0.0; grid.size()];
    let mut residual = |gains: &[f64], approx: &mut [f64]| {
        fft.filter(&spectrum, gains, &mut work, approx);
        f.values()
            .iter()
            .zip(approx.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let mut best = f64::INFINITY;
    let mut out = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        for spec in [
            VPOperatorSpec { n: m, p: 0 },
            VPOperatorSpec::with_default_window(m),
            VPOperatorSpec { n: m, p: m },
        ] {
            let gains: Vec<f64> = (0..=m).map(|j| spec.gain(j)).collect();
            best = best.min(residual(&gains, &mut approx));
        }
        out.push(best);
    }
    Ok(out)
}

/// Grid modulus of continuity
/// `max_{0 ≤ s·h ≤ δ} max_j |f(t_j + s·h) - f(t_j)|` over grid-aligned shifts.
///
/// This is a lower bound for the continuum modulus; the gap is at most one
/// grid-step oscillation. `delta` is clamped to `[0, 2π]`.
pub fn modulus_of_continuity(f: &GridFunction, delta: f64) -> f64 {
    let n = f.grid().size();
    let delta = if delta.is_nan() {
        0.0
    } else {
        delta.clamp(0.0, TAU)
    };
    let max_shift = ((delta / f.grid().step()) * (1.0 + 1e-12)).floor() as usize;
    // shifts s and n - s give the same set of differences
    let max_shift = max_shift.min(n / 2);
    let v = f.values();
    (1..=max_shift)
        .map(|s| {
            (0..n)
                .map(|j| (v[(j + s) % n] - v[j]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
