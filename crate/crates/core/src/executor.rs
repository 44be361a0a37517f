//! Coupled ensemble execution.
//!
//! Term `l < L` of a plan draws `M_l` sample ids and evaluates the model at
//! levels `l` and `l + 1` with the *same* id, so both runs see the same
//! random event. The coarse term `L` evaluates level `L` alone. Ids are
//! derived with [`crate::seed::sample_id`], which keeps them disjoint across
//! terms.
//!
//! Evaluations run on a rayon pool; results are collected by sample index and
//! reduced single-threaded, so a report depends only on
//! `(model, plan, base_seed)` and never on the worker count.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::hierarchy::relative_dof;
use crate::planner::{LevelPlan, StrategyId};
use crate::seed::{sample_id, PILOT_TERM};
use crate::stats::{
    estimate_alpha, estimate_fine_error, multilevel_estimate, multilevel_std_error, variance_of, CompensatedSum,
    LevelTermStats, SolutionParameters, DEFAULT_SIGMA,
};

/// Failure reported by a model for a single evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct ModelError(pub String);

impl ModelError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// A stochastic solver: `(level, sample id) -> scalar quantity of interest`.
///
/// Implementations must be deterministic in `(level, sample_id)` and must
/// couple levels: `evaluate(l, s)` and `evaluate(l + 1, s)` use the same
/// random inputs at different resolutions. They are called concurrently.
pub trait QoIModel: Send + Sync {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError>;

    fn max_level(&self) -> u32;

    /// Cost of one level-`level` evaluation in units of a level-1 evaluation.
    fn cost_hint(&self, level: u32) -> f64 {
        relative_dof(level).unwrap_or(0.0)
    }

    fn name(&self) -> &str {
        "model"
    }
}

impl<M: QoIModel + ?Sized> QoIModel for &M {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError> {
        (**self).evaluate(level, sample_id)
    }
    fn max_level(&self) -> u32 {
        (**self).max_level()
    }
    fn cost_hint(&self, level: u32) -> f64 {
        (**self).cost_hint(level)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<M: QoIModel + ?Sized> QoIModel for Box<M> {
    fn evaluate(&self, level: u32, sample_id: u64) -> std::result::Result<f64, ModelError> {
        (**self).evaluate(level, sample_id)
    }
    fn max_level(&self) -> u32 {
        (**self).max_level()
    }
    fn cost_hint(&self, level: u32) -> f64 {
        (**self).cost_hint(level)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// One evaluation, as written to the sample log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub term: u32,
    pub level: u32,
    pub sample_index: u64,
    pub seed: u64,
    pub value: f64,
}

pub const SAMPLE_LOG_HEADER: &str = "term,level,sample_index,seed,value";

/// Writes records as CSV, sorted by `(term, sample_index, level)`.
pub fn write_sample_log<W: std::io::Write>(records: &[SampleRecord], mut w: W) -> std::io::Result<()> {
    let mut sorted: Vec<&SampleRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.term, r.sample_index, r.level));
    writeln!(w, "{SAMPLE_LOG_HEADER}")?;
    for r in sorted {
        writeln!(w, "{},{},{},{},{}", r.term, r.level, r.sample_index, r.seed, r.value)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSeedRange {
    pub term: u32,
    pub first_sample_index: u64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub base_seed: u64,
    pub scheme: String,
    pub terms: Vec<TermSeedRange>,
}

const SEED_SCHEME: &str = "splitmix64-counter/term<<40|index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: StrategyId,
    pub model: String,
    pub plan: Option<LevelPlan>,
    pub term_stats: Vec<LevelTermStats>,
    pub estimate: f64,
    pub estimated_std_error: Option<f64>,
    /// `error_bound_multiplier * e` of the plan, when a plan was supplied.
    pub a_priori_error_bound: Option<f64>,
    pub realized_load: f64,
    pub seeds: SeedInfo,
    /// Excluded from the serialized report so that reports are reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Populated only when sample recording is enabled.
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotEstimate {
    pub parameters: SolutionParameters,
    pub delta_12: f64,
    pub delta_23: f64,
    pub samples: usize,
    pub delta_level: u32,
}

/// Runs ensembles on a configurable worker pool.
#[derive(Debug, Clone, Default)]
pub struct Executor {
    workers: Option<usize>,
    record_samples: bool,
}

struct TermSpec {
    term: u32,
    fine_level: u32,
    coarse_level: Option<u32>,
    count: u64,
}

impl Executor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of worker threads; `None` uses rayon's global pool.
    pub fn workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn record_samples(mut self, on: bool) -> Self {
        self.record_samples = on;
        self
    }

    fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }

    /// Evaluates every sample of one term at each of `levels`, returning the
    /// values as `[sample][level]` in index order. The first failure by
    /// sample index wins, so the error is deterministic too.
    fn evaluate_term<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        base_seed: u64,
        term: u32,
        levels: &[u32],
        count: u64,
    ) -> Result<Vec<(u64, Vec<f64>)>> {
        let results: Vec<Result<(u64, Vec<f64>)>> = self.in_pool(|| {
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let id = sample_id(base_seed, term, i)?;
                    let mut vals = Vec::with_capacity(levels.len());
                    for &level in levels {
                        let v = model.evaluate(level, id).map_err(|e| Error::ModelFailure {
                            level,
                            seed: id,
                            message: e.0,
                        })?;
                        if !v.is_finite() {
                            return Err(Error::ModelFailure {
                                level,
                                seed: id,
                                message: format!("non-finite result {v}"),
                            });
                        }
                        vals.push(v);
                    }
                    Ok((id, vals))
                })
                .collect()
        })?;
        results.into_iter().collect()
    }

    fn run_terms<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        specs: &[TermSpec],
        base_seed: u64,
        strategy: StrategyId,
        plan: Option<&LevelPlan>,
    ) -> Result<RunOutcome> {
        let start = Instant::now();
        let mut term_stats = Vec::with_capacity(specs.len());
        let mut samples = Vec::new();
        let mut load = CompensatedSum::new();
        let mut ranges = Vec::with_capacity(specs.len());
        for spec in specs {
            let levels: Vec<u32> = std::iter::once(spec.fine_level).chain(spec.coarse_level).collect();
            let evals = self.evaluate_term(model, base_seed, spec.term, &levels, spec.count)?;
            let values: Vec<f64> = evals.iter().map(|(_, v)| if v.len() == 2 { v[0] - v[1] } else { v[0] }).collect();
            term_stats.push(LevelTermStats::from_values(spec.term, spec.fine_level, spec.coarse_level, &values)?);
            let per_sample: f64 = levels.iter().map(|&l| model.cost_hint(l)).sum();
            load.add(spec.count as f64 * per_sample);
            ranges.push(TermSeedRange { term: spec.term, first_sample_index: 0, sample_count: spec.count });
            if self.record_samples {
                for (i, (id, vals)) in evals.iter().enumerate() {
                    for (&level, &value) in levels.iter().zip(vals) {
                        samples.push(SampleRecord { term: spec.term, level, sample_index: i as u64, seed: *id, value });
                    }
                }
            }
        }
        let report = RunReport {
            strategy,
            model: model.name().to_string(),
            plan: plan.cloned(),
            estimate: multilevel_estimate(&term_stats)?,
            estimated_std_error: multilevel_std_error(&term_stats)?,
            a_priori_error_bound: plan.map(LevelPlan::error_bound),
            realized_load: load.value(),
            term_stats,
            seeds: SeedInfo { base_seed, scheme: SEED_SCHEME.to_string(), terms: ranges },
            wall_time: start.elapsed(),
        };
        Ok(RunOutcome { report, samples })
    }

    pub fn run_mlmc<M: QoIModel + ?Sized>(&self, model: &M, plan: &LevelPlan, base_seed: u64) -> Result<RunOutcome> {
        plan.validate()?;
        if plan.levels > model.max_level() as usize {
            return Err(Error::TooManyLevels { needed: plan.levels, available: model.max_level() });
        }
        let l_max = plan.levels as u32;
        let specs: Vec<TermSpec> = plan
            .samples
            .iter()
            .enumerate()
            .map(|(i, &count)| {
                let level = i as u32 + 1;
                TermSpec { term: level, fine_level: level, coarse_level: (level < l_max).then_some(level + 1), count }
            })
            .collect();
        self.run_terms(model, &specs, base_seed, plan.strategy, Some(plan))
    }

    pub fn run_classical_mc<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        level: u32,
        m: u64,
        base_seed: u64,
    ) -> Result<RunOutcome> {
        if level < 1 || level > model.max_level() {
            return Err(Error::InvalidLevel(i64::from(level)));
        }
        if m < 1 {
            return Err(Error::InvalidInput("classical MC needs at least one sample".into()));
        }
        let spec = TermSpec { term: 1, fine_level: level, coarse_level: None, count: m };
        self.run_terms(model, &[spec], base_seed, StrategyId::ClassicalMC, None)
    }

    /// Runs any plan. Classical MC plans run at level 1.
    pub fn run_plan<M: QoIModel + ?Sized>(&self, model: &M, plan: &LevelPlan, base_seed: u64) -> Result<RunOutcome> {
        self.run_mlmc(model, plan, base_seed)
    }

    /// Evaluates `pilot_m` shared-id samples on levels `1..=levels`.
    /// Returns `values[level - 1][sample]`.
    pub fn pilot_ensemble<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        levels: u32,
        pilot_m: usize,
        base_seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if levels < 1 || levels > model.max_level() {
            return Err(Error::TooManyLevels { needed: levels as usize, available: model.max_level() });
        }
        let ladder: Vec<u32> = (1..=levels).collect();
        let evals = self.evaluate_term(model, base_seed, PILOT_TERM, &ladder, pilot_m as u64)?;
        Ok((0..levels as usize).map(|l| evals.iter().map(|(_, v)| v[l]).collect()).collect())
    }

    /// Sample deviations `sqrt(var(U_l - U_{l+1}))` for `l = 1..levels-1`.
    pub fn difference_deviations<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        levels: u32,
        pilot_m: usize,
        base_seed: u64,
    ) -> Result<Vec<f64>> {
        if levels < 2 {
            return Err(Error::InvalidInput("need at least two levels for differences".into()));
        }
        let per_level = self.pilot_ensemble(model, levels, pilot_m, base_seed)?;
        per_level
            .windows(2)
            .map(|w| {
                let diff: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                Ok(variance_of(&diff)?.sqrt())
            })
            .collect()
    }

    /// Estimates `delta`, `alpha` and `e` from a three-level pilot.
    ///
    /// `delta` comes from level 2; `alpha` from the ratio of the two finest
    /// difference deviations; `e` from the finest difference deviation.
    pub fn pilot_estimate_parameters<M: QoIModel + ?Sized>(
        &self,
        model: &M,
        pilot_m: usize,
        base_seed: u64,
    ) -> Result<PilotEstimate> {
        if model.max_level() < 3 {
            return Err(Error::TooManyLevels { needed: 3, available: model.max_level() });
        }
        if pilot_m < 2 {
            return Err(Error::InsufficientSamples(pilot_m));
        }
        let per_level = self.pilot_ensemble(model, 3, pilot_m, base_seed)?;
        let deviation = |values: &[f64]| -> Result<f64> { Ok(variance_of(values)?.sqrt()) };
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let delta = deviation(&per_level[1])?;
        let delta_12 = deviation(&diff(&per_level[0], &per_level[1]))?;
        let delta_23 = deviation(&diff(&per_level[1], &per_level[2]))?;
        for (name, v) in [("delta[U_2]", delta), ("delta[U_1 - U_2]", delta_12), ("delta[U_2 - U_3]", delta_23)] {
            if v == 0.0 {
                return Err(Error::Degenerate(format!("{name} is zero; the pilot shows no variability")));
            }
        }
        let alpha = estimate_alpha(delta_12, delta_23)?;
        if alpha.nonconvergent {
            return Err(Error::Degenerate(format!(
                "nonconvergent hierarchy: estimated alpha = {} (delta_12 = {delta_12}, delta_23 = {delta_23})",
                alpha.alpha
            )));
        }
        let e = estimate_fine_error(delta_12, alpha.alpha)?;
        Ok(PilotEstimate {
            parameters: SolutionParameters::new(delta, e, alpha.alpha, DEFAULT_SIGMA)?,
            delta_12,
            delta_23,
            samples: pilot_m,
            delta_level: 2,
        })
    }
}

pub fn run_mlmc<M: QoIModel + ?Sized>(model: &M, plan: &LevelPlan, base_seed: u64) -> Result<RunReport> {
    Ok(Executor::new().run_mlmc(model, plan, base_seed)?.report)
}

pub fn run_classical_mc<M: QoIModel + ?Sized>(model: &M, level: u32, m: u64, base_seed: u64) -> Result<RunReport> {
    Ok(Executor::new().run_classical_mc(model, level, m, base_seed)?.report)
}

pub fn pilot_estimate_parameters<M: QoIModel + ?Sized>(
    model: &M,
    pilot_m: usize,
    base_seed: u64,
) -> Result<PilotEstimate> {
    Executor::new().pilot_estimate_parameters(model, pilot_m, base_seed)
}
