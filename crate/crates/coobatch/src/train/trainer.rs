//! The training loop: schedule a distribution and designation, build a
//! minibatch, apply one-sided updates, and evaluate on a fixed cadence.

use std::time::Instant;

use crate::arrange::{
    build_minibatch, schedule_next, ArrangementSchedule, CooSource, Distribution, IndSource,
    LshFamily, LshPool, MicrobatchSource, NegativeSampler, RefinedCooSource, ScheduleState,
};
use crate::data::{AssociationMatrix, TestSplit};
use crate::error::{Error, Result};
use crate::metrics::{cosine_gap, precision_at_k, MetricSample, PrecisionSpec, Trajectory};
use crate::rng;
use crate::train::model::{apply_minibatch, EmbeddingModel};

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    /// Minimum positives per minibatch (`b`).
    pub batch: usize,
    /// Negatives matched per positive (`lambda`).
    pub negatives: usize,
    /// Fixed learning rate.
    pub learning_rate: f64,
    pub bias: bool,
    pub seed: u64,
    pub schedule: ArrangementSchedule,
    /// Total gradient updates to perform.
    pub budget: u64,
    /// Number of evaluation points spread evenly over the budget.
    pub eval_points: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch == 0 {
            return Err(Error::Config("dim and batch must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.eval_points == 0 {
            return Err(Error::Config("at least one evaluation point".into()));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical parameter rendering, embedded in
    /// trajectory outputs for provenance.
    pub fn content_hash(&self) -> u64 {
        let text = format!(
            "dim={};batch={};neg={};lr={};bias={};seed={};schedule={};budget={};evals={}",
            self.dim,
            self.batch,
            self.negatives,
            self.learning_rate,
            self.bias,
            self.seed,
            self.schedule,
            self.budget,
            self.eval_points
        );
        fnv1a(text.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fixed test pairs and optional precision ground truth used at every
/// evaluation point.
#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
    pub precision: Option<PrecisionSpec>,
}

impl EvalSpec {
    /// Evaluate against the held-out pairs of a split.
    pub fn from_split(split: &TestSplit) -> Self {
        Self {
            positives: split.positives.clone(),
            negatives: split.negatives.clone(),
            precision: None,
        }
    }
}

/// Shared inputs the schedule's distributions may need: precomputed LSH
/// pools per axis, ground-truth block labels, and the part-order flag.
#[derive(Debug, Clone, Default)]
pub struct TrainResources<'a> {
    /// (focus-axis pool, context-axis pool) for Jaccard refinement.
    pub jaccard_pools: Option<(&'a LshPool, &'a LshPool)>,
    /// (focus-axis pool, context-axis pool) for angular refinement.
    pub angular_pools: Option<(&'a LshPool, &'a LshPool)>,
    /// Block label per entity id, covering both axes.
    pub block_labels: Option<&'a [u32]>,
    /// Consume refined parts in random order within a draw (default).
    pub shuffle_parts: Option<bool>,
}

impl<'a> TrainResources<'a> {
    fn build_source(
        &self,
        distribution: Distribution,
        matrix: &'a AssociationMatrix,
        batch: usize,
    ) -> Result<Box<dyn MicrobatchSource + 'a>> {
        let shuffle = self.shuffle_parts.unwrap_or(true);
        match distribution {
            Distribution::Ind => Ok(Box::new(IndSource::new(matrix)?)),
            Distribution::Coo => Ok(Box::new(CooSource::new(matrix)?)),
            Distribution::CooLsh { family, policy } => {
                let pools = match family {
                    LshFamily::Jaccard => self.jaccard_pools,
                    LshFamily::Angular => self.angular_pools,
                };
                let (fp, cp) = pools.ok_or_else(|| {
                    Error::Config(format!(
                        "schedule uses {family:?} LSH refinement but no pool was supplied"
                    ))
                })?;
                Ok(Box::new(RefinedCooSource::with_lsh(
                    CooSource::new(matrix)?,
                    fp,
                    cp,
                    policy,
                    batch,
                    shuffle,
                )?))
            }
            Distribution::CooOptLsh => {
                let labels = self.block_labels.ok_or_else(|| {
                    Error::Config(
                        "schedule uses oracle refinement but no labels were supplied".into(),
                    )
                })?;
                if labels.len() < matrix.n_focus() || labels.len() < matrix.n_context() {
                    return Err(Error::Config(
                        "block labels do not cover every entity".into(),
                    ));
                }
                Ok(Box::new(RefinedCooSource::with_oracle(
                    CooSource::new(matrix)?,
                    labels,
                    labels,
                    shuffle,
                )))
            }
        }
    }
}

fn evaluate(model: &EmbeddingModel, eval: &EvalSpec) -> Result<(f64, Option<f64>)> {
    let gap = cosine_gap(model, &eval.positives, &eval.negatives)?;
    let precision = eval
        .precision
        .as_ref()
        .map(|spec| precision_at_k(model, spec))
        .transpose()?;
    Ok((gap, precision))
}

/// Train an embedding on `matrix` under `config`, evaluating against
/// `eval` on the configured cadence. Deterministic per seed.
pub fn train(
    matrix: &AssociationMatrix,
    eval: &EvalSpec,
    resources: &TrainResources<'_>,
    config: &TrainConfig,
) -> Result<(Trajectory, EmbeddingModel)> {
    config.validate()?;
    let mut model = EmbeddingModel::init(
        matrix.n_focus(),
        matrix.n_context(),
        config.dim,
        config.seed,
        config.bias,
    );

    // One source per schedule segment, built up front so a mid-run switch
    // cannot fail.
    let mut sources: Vec<Box<dyn MicrobatchSource + '_>> = config
        .schedule
        .segments()
        .iter()
        .map(|&(_, dist)| resources.build_source(dist, matrix, config.batch))
        .collect::<Result<Vec<_>>>()?;
    let negatives = NegativeSampler::new(matrix)?;

    let mut train_rng = rng::stream(config.seed, "train-draws");
    let start = Instant::now();
    let mut state = ScheduleState::default();
    let mut samples = Vec::with_capacity(config.eval_points + 1);

    let (gap, precision) = evaluate(&model, eval)?;
    samples.push(MetricSample {
        update_count: 0,
        cosine_gap: gap,
        precision_at_k: precision,
        wall_time: start.elapsed().as_secs_f64(),
    });

    let boundaries: Vec<u64> = (1..=config.eval_points as u64)
        .map(|k| config.budget * k / config.eval_points as u64)
        .collect();
    let mut next_boundary = 0usize;

    while state.updates < config.budget {
        let (_, designation) = schedule_next(&config.schedule, &state);
        let segment = config.schedule.active_segment(state.updates);
        let minibatch = build_minibatch(
            sources[segment].as_mut(),
            &negatives,
            config.batch,
            config.negatives,
            designation,
            &mut train_rng,
        );
        let summary = apply_minibatch(&mut model, &minibatch, config.learning_rate)?;
        state.record(designation, summary.positives, summary.gradient_updates);

        if next_boundary < boundaries.len() && state.updates >= boundaries[next_boundary] {
            while next_boundary < boundaries.len() && state.updates >= boundaries[next_boundary] {
                next_boundary += 1;
            }
            let (gap, precision) = evaluate(&model, eval)?;
            samples.push(MetricSample {
                update_count: state.updates,
                cosine_gap: gap,
                precision_at_k: precision,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
    }

    Ok((
        Trajectory {
            samples,
            config_hash: config.content_hash(),
            seed: config.seed,
        },
        model,
    ))
}
