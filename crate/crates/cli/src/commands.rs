//! One pipeline per subcommand. Each returns the JSON result block and
//! writes its CSV tables through [`Output`].

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use vpclt::approximation::{
    best_error_profile, fourier_analyze, vp_sum, DyadicSequence, GridFunction, PeriodicGrid,
};
use vpclt::criterion::{
    decay_series_check, equiconvergence_check, series_check, CriterionReport, SeriesConfig,
};
use vpclt::entropy::{
    dudley_check, entropy_profile, example41_probe, geometric_grid, MetricSample,
};
use vpclt::io::{write_table_file, ToTable};
use vpclt::mc_bands::{
    band_coverage, clt_empirical_test, param_integral_band, BandConfig, BandModel, CosineTimesBeta,
    ParameterFree, TabulatedIntegrand,
};
use vpclt::processes::{
    empirical_covariance, eta0_nodes, sequence_example_moments, tau_distance, Domain, ProcessSpec,
    Sampler,
};
use vpclt::Result;

use crate::config::*;

/// Destination directory and the list of files written so far.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn table(&mut self, name: &str, table: &dyn ToTable) -> Result<()> {
        write_table_file(&self.dir.join(name), table)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("reports serialize");
        std::fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Ad hoc table from named columns of equal length.
struct Columns {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Columns {
    fn new(names: &[&str]) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.names.len());
        self.rows.push(row);
    }
}

impl ToTable for Columns {
    fn header(&self) -> Vec<String> {
        self.names.clone()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.rows.clone()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn sampler_for(process: &ProcessSpec, grid_size: usize) -> Result<Sampler> {
    process.validate()?;
    Sampler::new(process, process.default_domain(grid_size)?)
}

fn sequence_for(grid: PeriodicGrid, terms: &Option<Vec<usize>>) -> Result<DyadicSequence> {
    match terms {
        Some(t) => DyadicSequence::new(t.clone()),
        None => Ok(DyadicSequence::dyadic_for_grid(grid)),
    }
}

fn periodic_grid(process: &ProcessSpec, grid_size: usize) -> Result<PeriodicGrid> {
    process
        .default_domain(grid_size)?
        .periodic_grid()
        .ok_or_else(|| vpclt::Error::InvalidParameter {
            field: "process".into(),
            reason: "blocks need a process on a periodic grid".into(),
        })
}

/// Per-block rows in the published report layout.
fn criterion_json(rep: &CriterionReport) -> Value {
    let blocks: Vec<Value> = rep
        .blocks
        .iter()
        .map(|b| {
            json!({
                "k": b.k,
                "n_lo": b.n_lo,
                "n_hi": b.n_hi,
                "lambda_star": b.lambda_star,
                "U": b.u_value,
                "mc_error": b.mc_error,
                "cap_active": b.cap_active,
                "E_sup_Zk": b.mean_sup_norm,
                "ratio": b.sup_to_u_ratio,
                "warnings": b.warnings,
            })
        })
        .collect();
    json!({
        "sequence": rep.sequence,
        "blocks": blocks,
        "tail_sums": rep.tail_sums,
        "adjusted_tail_sums": rep.adjusted_tail_sums,
        "verdict": rep.verdict,
    })
}

pub fn approx(cfg: &ApproxConfig, out: &mut Output) -> Result<Value> {
    let grid = PeriodicGrid::new(cfg.grid_size)?;
    let f = match &cfg.function {
        FunctionSpec::Cosine { frequency } => {
            let m = *frequency as f64;
            GridFunction::from_fn(grid, |t| (m * t).cos())?
        }
        FunctionSpec::AbsSin { exponent } => {
            GridFunction::from_fn(grid, |t| t.sin().abs().powf(*exponent))?
        }
        FunctionSpec::Table { path } => GridFunction::new(grid, read_column(path)?)?,
    };
    let n_max = cfg.n_list.iter().copied().max().unwrap_or(0);
    grid.check_degree(n_max)?;
    let best = best_error_profile(&f, n_max / 2)?;
    let mut errors = Columns::new(&["n", "p", "sup_error", "best_error_ub", "ratio"]);
    let mut values = Columns::new(&["t", "f"]);
    values
        .names
        .extend(cfg.n_list.iter().map(|n| format!("V_{n}")));
    let nodes = grid.nodes();
    let mut approximations = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let v = vp_sum(&f, n)?;
        let err = v.sup_distance(&f);
        let e = best[n / 2];
        let ratio = if e > 0.0 { err / e } else { 0.0 };
        errors.push(vec![n as f64, (n / 2) as f64, err, e, ratio]);
        rows.push(
            json!({"n": n, "p": n / 2, "sup_error": err, "best_error_ub": e, "ratio": ratio}),
        );
        approximations.push(v);
    }
    for (j, t) in nodes.iter().enumerate() {
        let mut row = vec![*t, f.values()[j]];
        row.extend(approximations.iter().map(|v| v.values()[j]));
        values.push(row);
    }
    out.table("approx_errors.csv", &errors)?;
    out.table("approx_values.csv", &values)?;
    let top = fourier_analyze(&f, 1)?;
    Ok(json!({
        "sup_norm": f.sup_norm(),
        "mean": top.coeff(0).re,
        "errors": rows,
    }))
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| vpclt::Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn simulate(cfg: &SimulateConfig, out: &mut Output) -> Result<Value> {
    let sampler = sampler_for(&cfg.process, cfg.grid_size)?;
    let ens = if cfg.n > 1 {
        sampler.normalized_sum(cfg.n, cfg.replicas, cfg.seed)?
    } else {
        sampler.sample(cfg.replicas, cfg.seed)
    };
    out.table("paths.csv", &ens)?;
    if cfg.write_covariance {
        out.table("covariance.csv", &empirical_covariance(&ens)?)?;
    }
    let sups = ens.sup_norms();
    let mean_sup = sups.iter().sum::<f64>() / sups.len().max(1) as f64;
    let variances = ens.column_variances();
    Ok(json!({
        "rows": ens.rows(),
        "nodes": ens.cols(),
        "mean_sup_norm": mean_sup,
        "max_variance": variances.iter().cloned().fold(0.0, f64::max),
    }))
}

pub fn criterion(cfg: &CriterionConfig, out: &mut Output) -> Result<Value> {
    let grid = periodic_grid(&cfg.process, cfg.grid_size)?;
    let seq = sequence_for(grid, &cfg.sequence)?;
    let sampler = sampler_for(&cfg.process, cfg.grid_size)?;
    let ens = sampler.sample(cfg.replicas, cfg.seed);
    let series = SeriesConfig {
        lambda: cfg.lambda,
        tail_ratio: cfg.tail_ratio,
    };
    let rep = series_check(&ens, &seq, &series)?;
    out.table("criterion.csv", &rep)?;
    Ok(criterion_json(&rep))
}

pub fn equiconv(cfg: &EquiconvConfig, out: &mut Output) -> Result<Value> {
    let grid = periodic_grid(&cfg.process, cfg.grid_size)?;
    let seq = sequence_for(grid, &cfg.sequence)?;
    let sampler = sampler_for(&cfg.process, cfg.grid_size)?;
    let series = SeriesConfig {
        lambda: cfg.lambda,
        tail_ratio: cfg.tail_ratio,
    };
    let rep = equiconvergence_check(&sampler, &seq, &cfg.n_list, cfg.replicas, cfg.seed, &series)?;
    let mut table = Columns::new(&[
        "n",
        "k",
        "U",
        "tail_sum",
        "adjusted_tail_sum",
        "sup_tail_sum",
    ]);
    for (n, r) in rep.n_list.iter().zip(&rep.reports) {
        for (i, b) in r.blocks.iter().enumerate() {
            table.push(vec![
                *n as f64,
                b.k as f64,
                b.u_value,
                r.tail_sums[i],
                r.adjusted_tail_sums[i],
                rep.sup_tail_sums[i],
            ]);
        }
    }
    out.table("equiconv.csv", &table)?;
    Ok(json!({
        "n_list": rep.n_list,
        "members": rep.reports.iter().map(criterion_json).collect::<Vec<_>>(),
        "sup_tail_sums": rep.sup_tail_sums,
        "sup_adjusted_tail_sums": rep.sup_adjusted_tail_sums,
        "variance": rep.variance,
        "exact_reference": rep.exact_reference,
        "verdict": rep.verdict,
    }))
}

pub fn entropy(cfg: &EntropyConfig, out: &mut Output) -> Result<Value> {
    let (ms, clamped) = match &cfg.metric {
        MetricSource::Csv { path } => (MetricSample::from_csv(path)?, 0),
        MetricSource::Line { points } => (MetricSample::from_line(points)?, 0),
        MetricSource::Tau {
            process,
            grid_size,
            replicas,
        } => {
            let sampler = sampler_for(process, *grid_size)?;
            let ens = sampler.sample(*replicas, cfg.seed);
            let tau = tau_distance(&empirical_covariance(&ens)?);
            let ids = ens
                .domain()
                .positions()
                .iter()
                .map(|t| vpclt::io::format_float(*t))
                .collect();
            (MetricSample::new(ids, tau.matrix)?, tau.clamped)
        }
    };
    let eps = geometric_grid(cfg.epsilon.hi, cfg.epsilon.lo, cfg.epsilon.points);
    let profile = entropy_profile(&ms, &eps)?;
    let dudley = dudley_check(&profile)?;
    out.table("entropy.csv", &profile)?;
    Ok(json!({
        "points": ms.len(),
        "diameter": ms.diameter(),
        "clamped_radicands": clamped,
        "dudley": dudley,
        "verdict": dudley.trend,
    }))
}

fn ball_volume_table(rows: &[vpclt::entropy::BallVolumeRow]) -> Columns {
    let mut t = Columns::new(&["epsilon", "exp_H", "H_plus", "ratio", "holds"]);
    for r in rows {
        t.push(vec![
            r.epsilon,
            r.exp_h,
            r.h_plus,
            r.ratio,
            if r.holds { 1.0 } else { 0.0 },
        ]);
    }
    t
}

pub fn probe41(cfg: &Probe41Config, out: &mut Output) -> Result<Value> {
    let rep = example41_probe(cfg.delta, &cfg.probe)?;
    out.table("probe41_entropy.csv", &rep.profile)?;
    out.table(
        "probe41_ball_volume.csv",
        &ball_volume_table(&rep.ball_volume),
    )?;
    let mut v = to_value(&rep);
    v["verdict"] = to_value(&rep.dudley.trend);
    Ok(v)
}

fn band_model(spec: &BandModelSpec) -> Result<Box<dyn BandModel>> {
    Ok(match spec {
        BandModelSpec::CosineBeta { nodes, beta } => {
            Box::new(CosineTimesBeta::new(Domain::periodic(*nodes)?, *beta)?)
        }
        BandModelSpec::ParameterFree { nodes, beta } => {
            Box::new(ParameterFree::new(Domain::periodic(*nodes)?, *beta)?)
        }
        BandModelSpec::Table { path } => Box::new(TabulatedIntegrand::from_csv(path)?),
    })
}

fn band_pipeline(
    model: &dyn BandModel,
    band: &BandConfig,
    runs: usize,
    seed: u64,
    out: &mut Output,
) -> Result<Value> {
    let rep = param_integral_band(model, band, seed)?;
    out.table("band.csv", &rep)?;
    let coverage = if runs > 0 {
        Some(band_coverage(model, band, runs, seed)?)
    } else {
        None
    };
    Ok(json!({
        "epsilon": rep.epsilon,
        "u_eps": rep.u_eps,
        "n": rep.n,
        "band_halfwidth": rep.band_halfwidth,
        "jitter_used": rep.jitter_used,
        "limit_replicas": rep.limit_replicas,
        "coverage": coverage,
    }))
}

pub fn band(cfg: &BandCommandConfig, out: &mut Output) -> Result<Value> {
    let model = band_model(&cfg.model)?;
    band_pipeline(model.as_ref(), &cfg.band, cfg.coverage_runs, cfg.seed, out)
}

pub fn clt_test(cfg: &CltCommandConfig, _out: &mut Output) -> Result<Value> {
    let sampler = sampler_for(&cfg.process, cfg.grid_size)?;
    let rep = clt_empirical_test(&sampler, cfg.n, cfg.replicas, cfg.seed, &cfg.clt)?;
    Ok(to_value(&rep))
}

pub fn decay_check(cfg: &DecayCheckConfig, out: &mut Output) -> Result<Value> {
    let rep = decay_series_check(&cfg.delta, cfg.m, cfg.r_max, &cfg.decay)?;
    let mut terms = Columns::new(&["r", "delta_2r", "term"]);
    let m_tilde = cfg.m.min(2.0);
    for r in 1..=cfg.r_max {
        if let Some(d) = cfg.delta.at_dyadic(r) {
            terms.push(vec![r as f64, d, d / (r as f64).powf(1.0 / m_tilde)]);
        }
    }
    out.table("decay_terms.csv", &terms)?;
    Ok(to_value(&rep))
}

pub fn example1(cfg: &Example1Config, out: &mut Output) -> Result<Value> {
    let process = ProcessSpec::Eta0 { delta: cfg.delta };
    process.validate()?;
    let sampler = Sampler::new(&process, eta0_nodes(cfg.sample_nodes, cfg.probe.u_max)?)?;
    let ens = sampler.sample(cfg.replicas, cfg.seed);
    out.table("example1_paths.csv", &ens)?;
    let rep = example41_probe(cfg.delta, &cfg.probe)?;
    out.table("example1_entropy.csv", &rep.profile)?;
    out.table(
        "example1_ball_volume.csv",
        &ball_volume_table(&rep.ball_volume),
    )?;
    let sups = ens.sup_norms();
    Ok(json!({
        "mean_sup_norm": sups.iter().sum::<f64>() / sups.len().max(1) as f64,
        "probe": rep,
        "verdict": rep.dudley.trend,
    }))
}

pub fn example2(cfg: &Example2Config, out: &mut Output) -> Result<Value> {
    let model = CosineTimesBeta::new(Domain::periodic(cfg.nodes)?, cfg.beta)?;
    band_pipeline(&model, &cfg.band, cfg.coverage_runs, cfg.seed, out)
}

pub fn example3(cfg: &Example3Config, out: &mut Output) -> Result<Value> {
    let moments = vpclt::processes::SequenceMomentsConfig {
        seed: cfg.seed,
        ..cfg.moments.clone()
    };
    let rep = sequence_example_moments(cfg.alpha, cfg.p0, &moments)?;
    let mut per_index =
        Columns::new(&["n", "mean", "second_moment", "second_moment_exact", "hits"]);
    for m in &rep.per_index {
        per_index.push(vec![
            m.n as f64,
            m.mean,
            m.second_moment,
            m.second_moment_exact,
            m.hits as f64,
        ]);
    }
    out.table("example3_moments.csv", &per_index)?;
    let mut running = Columns::new(&["p", "count", "running_mean", "running_max"]);
    for nm in &rep.norms {
        for i in 0..nm.counts.len() {
            running.push(vec![
                nm.p,
                nm.counts[i] as f64,
                nm.running_mean[i],
                nm.running_max[i],
            ]);
        }
    }
    out.table("example3_norms.csv", &running)?;
    Ok(to_value(&rep))
}
