//! Monte-Carlo topology-recovery experiments: generate, simulate, estimate,
//! decide and compare over many seeded trials.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LrdnError, Result};
use crate::model::{random_model, true_graph, GeneratorConfig, LrdnModel, SupportSpec};
use crate::polymat::DEFAULT_ZERO_TOL;
use crate::sim::{derive_seed, simulate, DEFAULT_BURN_IN, NOISE_RNG};
use crate::topology::{compare_graphs, decide_graph, Correction, DecisionConfig};
use crate::wiener::{estimate_h, estimate_s, EstimationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    #[serde(rename = "T")]
    pub num_samples: usize,
    pub burn_in: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_samples: 200,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub sim: SimConfig,
    pub estimation: EstimationConfig,
    pub decision: DecisionConfig,
    pub trials: usize,
    pub master_seed: u64,
    /// Output directory; nothing is written when absent.
    pub outputs: Option<PathBuf>,
    /// Reuse the model drawn from `generator.rng_seed` in every trial instead
    /// of drawing a fresh one per trial.
    pub fixed_model: bool,
}

/// The frozen benchmark: `m = 8`, `l = 4`, 25 edges (19 in `E_m`, 6
/// in `E_l`), node 12 pinned to pure noise, first-order filters, `T = 200`,
/// Bonferroni-corrected tests at `alpha = 0.01`.
impl Default for ExperimentConfig {
    fn default() -> Self {
        let generator = GeneratorConfig {
            degree_ml: 1,
            degree_l: 1,
            support_ml: SupportSpec::Count(19),
            support_l: SupportSpec::Count(6),
            coeff_min: 0.5,
            coeff_max: 0.9,
            ..GeneratorConfig::default()
        };
        Self {
            generator,
            sim: SimConfig::default(),
            estimation: EstimationConfig { order_p: 1, ridge: 0.0 },
            decision: DecisionConfig {
                correction: Correction::Bonferroni,
                ..DecisionConfig::default()
            },
            trials: 20,
            master_seed: 0,
            outputs: None,
            fixed_model: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.decision.validate()?;
        if self.trials == 0 {
            return Err(LrdnError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.sim.num_samples == 0 {
            return Err(LrdnError::InvalidConfig("T must be at least 1".into()));
        }
        if self.estimation.ridge < 0.0 || !self.estimation.ridge.is_finite() {
            return Err(LrdnError::InvalidConfig("ridge must be nonnegative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.outputs = None;
        sha256_json(&c)
    }
}

pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types serialize");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub model_hash: String,
    pub true_edges: usize,
    pub estimated_edges: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub exact_match: bool,
    /// Empty on success.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    /// Failed trials count as mismatches.
    pub exact_match_rate: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub config_hash: String,
    pub master_seed: u64,
    pub noise_rng: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub runtime_secs: f64,
}

/// Seeds for one trial: `(model seed, noise seed)`.
pub fn trial_seeds(master_seed: u64, trial: usize) -> (u64, u64) {
    let base = derive_seed(master_seed, trial as u64);
    (derive_seed(base, 0), derive_seed(base, 1))
}

fn run_trial(cfg: &ExperimentConfig, fixed: Option<&LrdnModel>, trial: usize) -> TrialRecord {
    let (model_seed, noise_seed) = trial_seeds(cfg.master_seed, trial);
    let mut record = TrialRecord {
        trial,
        seed: noise_seed,
        model_hash: String::new(),
        true_edges: 0,
        estimated_edges: 0,
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
        precision: 0.0,
        recall: 0.0,
        exact_match: false,
        error: String::new(),
    };
    let outcome = (|| -> Result<()> {
        let model = match fixed {
            Some(m) => m.clone(),
            None => random_model(&GeneratorConfig {
                rng_seed: model_seed,
                ..cfg.generator.clone()
            })?,
        };
        record.model_hash = model.hash();
        let truth = true_graph(&model, DEFAULT_ZERO_TOL);
        record.true_edges = truth.num_edges();
        let ts = simulate(&model, cfg.sim.num_samples, cfg.sim.burn_in, noise_seed)?;
        let h = if model.m > 0 { Some(estimate_h(&ts, cfg.estimation)?) } else { None };
        let s = estimate_s(&ts, cfg.estimation)?;
        let decided = decide_graph(h.as_ref(), &s, &ts, &cfg.decision)?;
        let metrics = compare_graphs(&decided.graph, &truth)?;
        record.estimated_edges = decided.graph.num_edges();
        record.true_positives = metrics.true_positives;
        record.false_positives = metrics.false_positives;
        record.false_negatives = metrics.false_negatives;
        record.precision = metrics.precision;
        record.recall = metrics.recall;
        record.exact_match = metrics.exact_match;
        Ok(())
    })();
    if let Err(e) = outcome {
        record.error = e.to_string();
    }
    record
}

/// Runs all trials in parallel. Per-trial failures are recorded, not raised.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let fixed = if cfg.fixed_model { Some(random_model(&cfg.generator)?) } else { None };
    let mut records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, fixed.as_ref(), t))
        .collect();
    records.sort_by_key(|r| r.trial);
    let aggregate = aggregate(cfg, &records);
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        aggregate,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Aggregate {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.error.is_empty()).collect();
    let mean = |f: fn(&TrialRecord) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    Aggregate {
        trials: records.len(),
        completed: ok.len(),
        failed: records.len() - ok.len(),
        exact_match_rate: ok.iter().filter(|r| r.exact_match).count() as f64 / records.len() as f64,
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        noise_rng: NOISE_RNG.to_string(),
    }
}

#[derive(Serialize)]
struct Timing {
    config_hash: String,
    master_seed: u64,
    runtime_secs: f64,
}

impl ExperimentResult {
    /// Writes `config.json`, `trials.csv` and `aggregate.json`, which depend
    /// only on the config, plus the wall-clock `timing.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)? + "\n")?;
        self.write_trials_csv(fs::File::create(dir.join("trials.csv"))?)?;
        fs::write(dir.join("aggregate.json"), serde_json::to_string_pretty(&self.aggregate)? + "\n")?;
        let timing = Timing {
            config_hash: self.aggregate.config_hash.clone(),
            master_seed: self.aggregate.master_seed,
            runtime_secs: self.runtime_secs,
        };
        fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        Ok(())
    }

    /// One row per trial; every row carries the config hash and master seed.
    pub fn write_trials_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "trial",
            "seed",
            "model_hash",
            "true_edges",
            "estimated_edges",
            "true_positives",
            "false_positives",
            "false_negatives",
            "precision",
            "recall",
            "exact_match",
            "error",
            "config_hash",
            "master_seed",
        ])?;
        let (hash, master) = (&self.aggregate.config_hash, self.aggregate.master_seed.to_string());
        for r in &self.records {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.model_hash.clone(),
                r.true_edges.to_string(),
                r.estimated_edges.to_string(),
                r.true_positives.to_string(),
                r.false_positives.to_string(),
                r.false_negatives.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.exact_match.to_string(),
                r.error.clone(),
                hash.clone(),
                master.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
