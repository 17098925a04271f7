//! Replication sweeps over design sizes and estimators.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use poince::design::{lhs_maximin, mc_sample, subsample_indices};
use poince::expansion::{
    average_der_expansions, fit_constant_residual, fit_poince, fit_poince_der, fit_projection_mc,
    fit_projection_mc_der, Expansion, InputSpace,
};
use poince::models::{dyke_marginals, Dyke, Model};
use poince::sensitivity::{input_partials, relmse_from_values, sample_variance, total_variance, InputPartials};
use poince::Marginal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Estimator, ExperimentConfig, ModelSource};
use crate::data::DataSet;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Offset separating the validation seed from the replication seeds.
const VALIDATION_SEED_OFFSET: u64 = 1 << 32;

/// One input of one fitted estimator in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: Estimator,
    pub input: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replication: usize,
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "Stot")]
    pub stot: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Dtot")]
    pub dtot: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    pub dgsm: f64,
    pub dgsm_ub: f64,
    pub relmse: Option<f64>,
    pub p_star: u32,
    pub n_active: usize,
}

pub fn named_model(name: &str, fd_step: f64) -> Result<(Box<dyn Model>, Vec<Marginal>)> {
    match name {
        "dyke" => Ok((Box::new(Dyke::new(fd_step)?), dyke_marginals())),
        other => bail!("unknown model `{other}` (built-in models: dyke)"),
    }
}

enum Source {
    Builtin { model: Box<dyn Model>, validation: Option<(Vec<Vec<f64>>, Vec<f64>)> },
    Data(DataSet),
}

/// A configured experiment with its input space and model resolved.
pub struct Experiment {
    config: ExperimentConfig,
    names: Vec<String>,
    space: InputSpace,
    source: Source,
}

struct Sample {
    points: Vec<Vec<f64>>,
    y: Vec<f64>,
    gradients: Option<Vec<Vec<f64>>>,
}

impl Experiment {
    /// Resolves the model (data paths relative to `base_dir`) and checks that
    /// every requested estimator can run, before any fit.
    pub fn new(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        config.validate()?;
        let needs_derivatives = config.estimators.iter().any(|e| e.needs_derivatives());
        let spec_marginals = config
            .marginals
            .as_ref()
            .map(|specs| specs.iter().map(|s| s.build()).collect::<poince::Result<Vec<_>>>())
            .transpose()
            .context("invalid marginal specification")?;

        let (names, marginals, source) = match &config.model {
            ModelSource::Named(name) => {
                let (model, default) = named_model(name, config.fd_step)?;
                let marginals = spec_marginals.unwrap_or(default);
                if marginals.len() != model.dim() {
                    bail!("model `{name}` has {} inputs but {} marginals were given", model.dim(), marginals.len());
                }
                (model.names(), marginals, Source::Builtin { model, validation: None })
            }
            ModelSource::Data { data, output } => {
                let path: PathBuf = if data.is_absolute() { data.clone() } else { base_dir.join(data) };
                let ds = DataSet::load(&path, output)?;
                if needs_derivatives && ds.gradients.is_none() {
                    bail!(
                        "derivative-based estimators need a `{}<input>` column for every input of {}",
                        crate::data::DERIVATIVE_PREFIX,
                        path.display()
                    );
                }
                let marginals = spec_marginals.expect("checked by validate");
                if marginals.len() != ds.dim() {
                    bail!("{} has {} input columns but {} marginals were given", path.display(), ds.dim(), marginals.len());
                }
                if let Some(&n) = config.sizes.iter().find(|&&n| n > ds.len()) {
                    bail!("design size {n} exceeds the {} rows of {}", ds.len(), path.display());
                }
                (ds.names.clone(), marginals, Source::Data(ds))
            }
        };
        let space = InputSpace::new(&marginals, config.p_max() as usize, config.grid_n)?;
        let mut exp = Self { config, names, space, source };
        exp.prepare_validation();
        Ok(exp)
    }

    fn prepare_validation(&mut self) {
        let n_val = self.config.validation_size;
        let seed = self.config.seed.wrapping_add(VALIDATION_SEED_OFFSET);
        let marginals = self.space.model_marginals();
        if let Source::Builtin { model, validation } = &mut self.source {
            if n_val > 0 {
                let points = mc_sample(&marginals, n_val, seed).points;
                let values = points.iter().map(|x| model.value(x)).collect();
                *validation = Some((points, values));
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn space(&self) -> &InputSpace {
        &self.space
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// All replications for all sizes, in (size, replication) order.
    pub fn run(&self, jobs: usize) -> Result<Vec<ResultRow>> {
        let tasks: Vec<(usize, usize)> = self
            .config
            .sizes
            .iter()
            .flat_map(|&n| (0..self.config.replications).map(move |r| (n, r)))
            .collect();
        let work = || -> Result<Vec<ResultRow>> {
            let chunks = tasks
                .par_iter()
                .map(|&(n, r)| self.replicate(n, r))
                .collect::<Result<Vec<_>>>()?;
            Ok(chunks.into_iter().flatten().collect())
        };
        if jobs == 1 {
            tasks.iter().map(|&(n, r)| self.replicate(n, r)).collect::<Result<Vec<_>>>().map(|v| v.concat())
        } else {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
            pool.install(work)
        }
    }

    fn seed(&self, replication: usize) -> u64 {
        self.config.seed.wrapping_add(replication as u64)
    }

    fn draw(&self, n: usize, replication: usize, mc: bool, with_gradients: bool) -> Result<(Sample, Option<Sample>)> {
        let seed = self.seed(replication);
        match &self.source {
            Source::Builtin { model, .. } => {
                let marginals = self.space.model_marginals();
                let points = if mc {
                    mc_sample(&marginals, n, seed).points
                } else {
                    lhs_maximin(&marginals, n, seed, self.config.lhs_restarts).points
                };
                let y = points.iter().map(|x| model.value(x)).collect();
                let gradients = with_gradients.then(|| points.iter().map(|x| model.gradient(x)).collect());
                Ok((Sample { points, y, gradients }, None))
            }
            Source::Data(ds) => {
                let picked = subsample_indices(ds.len(), n, seed)?;
                let mut taken = vec![false; ds.len()];
                for &k in &picked {
                    taken[k] = true;
                }
                let take = |rows: &[usize]| Sample {
                    points: rows.iter().map(|&k| ds.x[k].clone()).collect(),
                    y: rows.iter().map(|&k| ds.y[k]).collect(),
                    gradients: ds.gradients.as_ref().map(|g| rows.iter().map(|&k| g[k].clone()).collect()),
                };
                let held_out: Vec<usize> =
                    (0..ds.len()).filter(|&k| !taken[k]).take(self.config.validation_size).collect();
                let validation = (!held_out.is_empty()).then(|| take(&held_out));
                Ok((take(&picked), validation))
            }
        }
    }

    fn relmse(&self, surrogate: &Expansion, held_out: Option<&Sample>) -> Option<f64> {
        let (points, truth): (&[Vec<f64>], &[f64]) = match (&self.source, held_out) {
            (Source::Builtin { validation: Some((p, v)), .. }, _) => (p, v),
            (Source::Data(_), Some(s)) => (&s.points, &s.y),
            _ => return None,
        };
        // Held-out rows may fall outside the truncated supports; those are skipped.
        let mut t = Vec::with_capacity(truth.len());
        let mut p = Vec::with_capacity(truth.len());
        for (x, v) in points.iter().zip(truth) {
            if let Ok(s) = surrogate.eval(x) {
                t.push(*v);
                p.push(s);
            }
        }
        relmse_from_values(&t, &p).ok()
    }

    /// Fits every requested estimator on one design.
    pub fn replicate(&self, n: usize, replication: usize) -> Result<Vec<ResultRow>> {
        let estimators = &self.config.estimators;
        let cfg = self.config.fit_config();
        let d = self.space.dim();
        let mut rows = Vec::new();

        let regression: Vec<Estimator> = estimators.iter().copied().filter(|e| !e.is_mc()).collect();
        if !regression.is_empty() {
            let with_gradients = regression.iter().any(|e| e.needs_derivatives());
            let (sample, held_out) = self.draw(n, replication, false, with_gradients)?;
            let ctx = (n, replication, held_out.as_ref());
            if regression.contains(&Estimator::PoinceLars) {
                let e = fit_poince(&self.space, &sample.points, &sample.y, &cfg)
                    .with_context(|| format!("poince-lars at N = {n}, replication {replication}"))?;
                let partials = all_partials(&e)?;
                let p = e.p_star.unwrap_or(0);
                self.emit(&mut rows, Estimator::PoinceLars, ctx, total_variance(&e), &partials, &e, &vec![(p, e.n_active); d]);
            }
            if with_gradients {
                let grads = sample.gradients.as_ref().expect("gradients drawn");
                let ders = (0..d)
                    .map(|i| {
                        let dy: Vec<f64> = grads.iter().map(|g| g[i]).collect();
                        fit_poince_der(&self.space, &sample.points, &dy, i, &cfg)
                    })
                    .collect::<poince::Result<Vec<_>>>()
                    .with_context(|| format!("derivative fits at N = {n}, replication {replication}"))?;
                let avg = fit_constant_residual(&average_der_expansions(&ders)?, &sample.points, &sample.y)?;
                let d_avg = total_variance(&avg);
                if regression.contains(&Estimator::PoinceDerLars) {
                    let partials = ders.iter().enumerate().map(|(i, e)| input_partials(e, i)).collect::<poince::Result<Vec<_>>>()?;
                    let diag: Vec<(u32, usize)> = ders.iter().map(|e| (e.p_star.unwrap_or(0), e.n_active)).collect();
                    self.emit(&mut rows, Estimator::PoinceDerLars, ctx, d_avg, &partials, &avg, &diag);
                }
                if regression.contains(&Estimator::PoinceDerAvg) {
                    let partials = all_partials(&avg)?;
                    let diag = vec![(avg.p_star.unwrap_or(0), avg.n_active); d];
                    self.emit(&mut rows, Estimator::PoinceDerAvg, ctx, d_avg, &partials, &avg, &diag);
                }
            }
        }

        let mc: Vec<Estimator> = estimators.iter().copied().filter(|e| e.is_mc()).collect();
        if !mc.is_empty() {
            let p = self.config.mc_degree;
            let with_gradients = mc.contains(&Estimator::PoinceDerMc);
            let (sample, held_out) = self.draw(n, replication, true, with_gradients)?;
            let ctx = (n, replication, held_out.as_ref());
            let var = sample_variance(&sample.y);
            if mc.contains(&Estimator::PoinceMc) {
                let e = fit_projection_mc(&self.space, &sample.points, &sample.y, p)?;
                let partials = all_partials(&e)?;
                self.emit(&mut rows, Estimator::PoinceMc, ctx, var, &partials, &e, &vec![(p, e.n_active); d]);
            }
            if with_gradients {
                let grads = sample.gradients.as_ref().expect("gradients drawn");
                let ders = (0..d)
                    .map(|i| {
                        let dy: Vec<f64> = grads.iter().map(|g| g[i]).collect();
                        fit_projection_mc_der(&self.space, &sample.points, &dy, i, p)
                    })
                    .collect::<poince::Result<Vec<_>>>()?;
                let surrogate = fit_constant_residual(&average_der_expansions(&ders)?, &sample.points, &sample.y)?;
                let partials = ders.iter().enumerate().map(|(i, e)| input_partials(e, i)).collect::<poince::Result<Vec<_>>>()?;
                let diag: Vec<(u32, usize)> = ders.iter().map(|e| (p, e.n_active)).collect();
                self.emit(&mut rows, Estimator::PoinceDerMc, ctx, var, &partials, &surrogate, &diag);
            }
        }
        // Keep the configured estimator order within a replication.
        rows.sort_by_key(|r| estimators.iter().position(|e| *e == r.estimator));
        Ok(rows)
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &self,
        rows: &mut Vec<ResultRow>,
        estimator: Estimator,
        (n, replication, held_out): (usize, usize, Option<&Sample>),
        d: f64,
        partials: &[InputPartials],
        surrogate: &Expansion,
        diagnostics: &[(u32, usize)],
    ) {
        let relmse = self.relmse(surrogate, held_out);
        for (k, p) in partials.iter().enumerate() {
            let (s1, stot) = if d > 0.0 { (p.d1 / d, p.dtot / d) } else { (0.0, 0.0) };
            rows.push(ResultRow {
                estimator,
                input: self.names[k].clone(),
                n,
                replication,
                s1,
                stot,
                d,
                dtot: p.dtot,
                d1: p.d1,
                dgsm: p.dgsm,
                dgsm_ub: p.dgsm_ub,
                relmse,
                p_star: diagnostics[k].0,
                n_active: diagnostics[k].1,
            });
        }
    }
}

fn all_partials(e: &Expansion) -> Result<Vec<InputPartials>> {
    Ok((0..e.dim()).map(|i| input_partials(e, i)).collect::<poince::Result<Vec<_>>>()?)
}

pub fn write_results<W: std::io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Runs a configuration and writes the results and summary tables into `out_dir`.
pub fn run_to_dir(config: ExperimentConfig, base_dir: &Path, out_dir: &Path, jobs: usize) -> Result<Vec<ResultRow>> {
    let exp = Experiment::new(config, base_dir)?;
    let rows = exp.run(jobs)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let results = out_dir.join(RESULTS_FILE);
    write_results(&rows, std::fs::File::create(&results).with_context(|| format!("creating {}", results.display()))?)?;
    let summary = out_dir.join(SUMMARY_FILE);
    crate::summary::write_summary(
        &crate::summary::summarize(&rows)?,
        std::fs::File::create(&summary).with_context(|| format!("creating {}", summary.display()))?,
    )?;
    Ok(rows)
}
