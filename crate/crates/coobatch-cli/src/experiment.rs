//! Assemble a training experiment from a config file: data source, test
//! pairs, methods, and hyperparameters.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use coobatch::arrange::ArrangementSchedule;
use coobatch::data::{
    generate_blocks, load_reviews, sample_block_pairs, split_train_test, AssociationMatrix,
    BlocksConfig, ReviewsConfig,
};
use coobatch::metrics::{PrecisionMode, PrecisionSpec};
use coobatch::train::EvalSpec;

use crate::config::ConfigFile;

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub dim: usize,
    pub batch: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub bias: bool,
    pub budget: u64,
    pub evals: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct LshParams {
    pub pool_size: usize,
    pub pool_seed: u64,
    pub coarse_checkpoint: Option<PathBuf>,
}

pub struct Experiment {
    pub matrix: AssociationMatrix,
    pub eval: EvalSpec,
    /// Ground-truth block labels when the data source is blocks.
    pub labels: Option<Vec<u32>>,
    pub methods: Vec<(String, ArrangementSchedule)>,
    pub params: TrainParams,
    pub lsh: LshParams,
    pub out_dir: PathBuf,
    pub config_hash: u64,
}

type EvalPairs = (Vec<(u32, u32)>, Vec<(u32, u32)>);

pub fn build(cfg: &ConfigFile) -> Result<Experiment> {
    let source = cfg.require("data", "source")?.to_ascii_lowercase();
    let (matrix, eval_pairs, labels): (AssociationMatrix, EvalPairs, Option<Vec<u32>>) =
        match source.as_str() {
            "blocks" => {
                let blocks = BlocksConfig {
                    n: cfg.parse_or("data", "n", 0usize)?,
                    blocks: cfg.parse_or("data", "blocks", 0usize)?,
                    interactions: cfg.parse_or("data", "interactions", 0u64)?,
                    in_block: cfg.parse_or("data", "inblock", 0.0f64)?,
                    seed: cfg.parse_or("data", "seed", 1u64)?,
                };
                let matrix = generate_blocks(&blocks)?;
                let pos = cfg.parse_or("eval", "positives", 2000usize)?;
                let neg = cfg.parse_or("eval", "negatives", 2000usize)?;
                let eval_seed = cfg.parse_or("eval", "seed", 1u64)?;
                let pairs = sample_block_pairs(&blocks, pos, neg, eval_seed);
                (matrix, pairs, Some(blocks.labels()))
            }
            "matrix" | "reviews" => {
                let path = cfg.require("data", "path")?;
                let full = if source == "matrix" {
                    AssociationMatrix::read_from(path)
                        .with_context(|| format!("loading matrix {path}"))?
                } else {
                    let reviews = ReviewsConfig {
                        delimiter: cfg
                            .get("data", "delimiter")
                            .and_then(|s| s.chars().next())
                            .unwrap_or(','),
                        score_threshold: cfg.parse_or("data", "threshold", 3.0f64)?,
                        reweight: cfg.parse_bool_or("data", "reweight", false)?,
                        reweight_exponent: cfg.parse_or("data", "exponent", 0.75f64)?,
                        raw_sums: cfg.parse_bool_or("data", "raw-sums", false)?,
                    };
                    let data = load_reviews(path, &reviews)
                        .with_context(|| format!("loading reviews {path}"))?;
                    if let Some(map_path) = cfg.get("data", "id-map") {
                        data.write_id_map(map_path)?;
                    }
                    data.matrix
                };
                let fraction = cfg.parse_or("split", "fraction", 0.2f64)?;
                let negatives: usize = cfg.parse_or("split", "negatives", 0usize)?;
                let seed = cfg.parse_or("split", "seed", 1u64)?;
                let split =
                    split_train_test(&full, fraction, (negatives > 0).then_some(negatives), seed)?;
                let eval = EvalSpec::from_split(&split);
                (split.train, (eval.positives, eval.negatives), None)
            }
            other => bail!("unknown data source '{other}'"),
        };

    let mut eval = EvalSpec {
        positives: eval_pairs.0,
        negatives: eval_pairs.1,
        precision: None,
    };
    let k = cfg.parse_or("eval", "precision-k", 0usize)?;
    if k > 0 {
        let labels = labels
            .clone()
            .ok_or_else(|| anyhow!("precision needs ground-truth labels (blocks source)"))?;
        let min_degree = cfg.parse_or("eval", "min-degree", 20usize)?;
        let count = cfg.parse_or("eval", "representatives", 500usize)?;
        let seed = cfg.parse_or("eval", "seed", 1u64)?;
        let mode = match cfg
            .get("eval", "precision-neighbors")
            .unwrap_or("focus")
            .to_ascii_lowercase()
            .as_str()
        {
            "focus" => PrecisionMode::FocusFocus,
            "context" => PrecisionMode::FocusContext,
            other => bail!("unknown precision-neighbors '{other}'"),
        };
        let representatives =
            PrecisionSpec::sample_representatives(&matrix, min_degree, count, seed);
        if representatives.is_empty() {
            bail!("no focus entity has {min_degree}+ entries for precision evaluation");
        }
        eval.precision = Some(PrecisionSpec {
            labels,
            k,
            mode,
            representatives,
        });
    }

    let mut methods = Vec::new();
    for (name, map) in cfg.subsections("method") {
        let schedule = map
            .get("schedule")
            .ok_or_else(|| anyhow!("[method.{name}] is missing a schedule"))?;
        if schedule.is_empty() {
            continue; // disabled, e.g. by a --schedule override
        }
        methods.push((name.clone(), ArrangementSchedule::parse(schedule)?));
    }
    if methods.is_empty() {
        bail!("config defines no [method.*] sections");
    }

    let params = TrainParams {
        dim: cfg.parse_or("train", "dim", 25usize)?,
        batch: cfg.parse_or("train", "batch", 64usize)?,
        negatives: cfg.parse_or("train", "neg", 10usize)?,
        learning_rate: cfg.parse_or("train", "lr", 0.02f64)?,
        bias: cfg.parse_bool_or("train", "bias", true)?,
        budget: cfg.parse_or("train", "budget", 1_000_000u64)?,
        evals: cfg.parse_or("train", "evals", 50usize)?,
        seeds: cfg.parse_seeds("train", "seeds", &[1])?,
    };
    let lsh = LshParams {
        pool_size: cfg.parse_or("lsh", "pool", 32usize)?,
        pool_seed: cfg.parse_or("lsh", "pool-seed", 1u64)?,
        coarse_checkpoint: cfg.get("lsh", "coarse-checkpoint").map(PathBuf::from),
    };
    let out_dir = PathBuf::from(cfg.get("output", "dir").unwrap_or("out"));

    Ok(Experiment {
        matrix,
        eval,
        labels,
        methods,
        params,
        lsh,
        out_dir,
        config_hash: cfg.content_hash(),
    })
}
