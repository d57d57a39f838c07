//! Experiment orchestration.
//!
//! Repeats the train/test protocol over several seeded random splits of a
//! synthetic dataset: one model per training loss, every model evaluated
//! under every evaluation loss, and the resulting cross table reported as
//! mean ± standard error across splits. Loss statistics are bit-reproducible
//! from the config; wall-clock timings naturally are not.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::ADMMParams;
use crate::error::{Error, Result};
use crate::losses::LossFunction;
use crate::ssvm::{
    c_grid, evaluate_model, mean_and_std_error, train, Model, Sample, TrainConfig,
};
use crate::synth::{generate, SyntheticConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SyntheticConfig,
    pub train_losses: Vec<LossFunction>,
    pub eval_losses: Vec<LossFunction>,
    pub c: f64,
    pub eps_stop: f64,
    pub max_outer_iterations: usize,
    pub admm: ADMMParams,
    pub splits: usize,
    pub train_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(
        synth: SyntheticConfig,
        train_losses: Vec<LossFunction>,
        eval_losses: Vec<LossFunction>,
    ) -> Self {
        Self {
            synth,
            train_losses,
            eval_losses,
            c: 1.0,
            eps_stop: 1e-3,
            max_outer_iterations: 50,
            admm: ADMMParams::default(),
            splits: 5,
            train_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        if self.train_losses.is_empty() || self.eval_losses.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one training and one evaluation loss".into(),
            ));
        }
        if self.splits == 0 {
            return Err(Error::InvalidConfig("need at least one split".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.synth.samples < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 samples to split into train and test".into(),
            ));
        }
        self.train_config(&self.train_losses[0]).validate()
    }

    fn train_config(&self, loss: &LossFunction) -> TrainConfig {
        TrainConfig {
            c: self.c,
            eps_stop: self.eps_stop,
            max_outer_iterations: self.max_outer_iterations,
            loss: loss.clone(),
            admm: self.admm,
        }
    }
}

/// One cell of the cross table: mean ± standard error across splits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub train_loss_names: Vec<String>,
    pub eval_loss_names: Vec<String>,
    /// `table[t][e]`: statistics across splits for models trained with loss
    /// `t`, evaluated under loss `e`.
    pub table: Vec<Vec<CellStats>>,
    /// `per_split[t][e][s]`: the split-`s` test mean behind `table[t][e]`.
    pub per_split: Vec<Vec<Vec<f64>>>,
    /// Total training wall time per training loss, summed over splits.
    pub train_ms: Vec<f64>,
}

impl ExperimentResult {
    /// Render the cross table as aligned text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>12}", "train\\eval"));
        for name in &self.eval_loss_names {
            out.push_str(&format!("  {name:>18}"));
        }
        out.push('\n');
        for (t, name) in self.train_loss_names.iter().enumerate() {
            out.push_str(&format!("{name:>12}"));
            for cell in &self.table[t] {
                out.push_str(&format!(
                    "  {:>18}",
                    format!("{:.4} ± {:.4}", cell.mean, cell.std_error)
                ));
            }
            out.push('\n');
        }
        out
    }
}

/// Deterministic split of `n` indices for split number `split`.
fn split_indices(
    n: usize,
    train_fraction: f64,
    base_seed: u64,
    split: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n).collect();
    let seed = base_seed ^ (split + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_n = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let test = indices.split_off(train_n);
    (indices, test)
}

/// Per-split work product: one row of per-eval-loss test means per training
/// loss, plus the training time spent on each.
struct SplitOutcome {
    means: Vec<Vec<f64>>,
    train_ms: Vec<f64>,
}

fn run_split(
    samples: &[Sample],
    config: &ExperimentConfig,
    split: u64,
) -> Result<SplitOutcome> {
    let (train_idx, test_idx) = split_indices(
        samples.len(),
        config.train_fraction,
        config.synth.seed,
        split,
    );
    let train_set: Vec<Sample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let test_set: Vec<Sample> = test_idx.iter().map(|&i| samples[i].clone()).collect();
    let mut means = Vec::with_capacity(config.train_losses.len());
    let mut train_ms = Vec::with_capacity(config.train_losses.len());
    for loss in &config.train_losses {
        let started = Instant::now();
        let model = train(&train_set, &config.train_config(loss))?;
        train_ms.push(started.elapsed().as_secs_f64() * 1e3);
        let stats = evaluate_model(&model, &test_set, &config.eval_losses)?;
        means.push(stats.into_iter().map(|s| s.mean).collect());
    }
    Ok(SplitOutcome { means, train_ms })
}

/// Run the full protocol. Splits execute concurrently when the `parallel`
/// feature is enabled; results are assembled in split order either way.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let samples = generate(&config.synth)?;

    let split_numbers: Vec<u64> = (0..config.splits as u64).collect();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<SplitOutcome> = split_numbers
        .par_iter()
        .map(|&s| run_split(&samples, config, s))
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<SplitOutcome> = split_numbers
        .iter()
        .map(|&s| run_split(&samples, config, s))
        .collect::<Result<_>>()?;

    let t_count = config.train_losses.len();
    let e_count = config.eval_losses.len();
    let mut per_split = vec![vec![Vec::with_capacity(config.splits); e_count]; t_count];
    let mut train_ms = vec![0.0; t_count];
    for outcome in &outcomes {
        for t in 0..t_count {
            train_ms[t] += outcome.train_ms[t];
            for e in 0..e_count {
                per_split[t][e].push(outcome.means[t][e]);
            }
        }
    }
    let table = per_split
        .iter()
        .map(|row| {
            row.iter()
                .map(|values| {
                    let (mean, std_error) = mean_and_std_error(values);
                    CellStats { mean, std_error }
                })
                .collect()
        })
        .collect();

    Ok(ExperimentResult {
        config: config.clone(),
        train_loss_names: config.train_losses.iter().map(|l| l.name().into()).collect(),
        eval_loss_names: config.eval_losses.iter().map(|l| l.name().into()).collect(),
        table,
        per_split,
        train_ms,
    })
}

/// Outcome of a cross-validation sweep over the regularization grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CSelection {
    pub best: f64,
    /// `(c, mean validation loss)` per grid point.
    pub scores: Vec<(f64, f64)>,
}

/// K-fold cross-validation over the `10^-2..10^2` grid, scoring with the
/// training loss itself. Ties prefer the smaller (stronger-regularizing) C.
pub fn select_c(
    samples: &[Sample],
    base: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<CSelection> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig(
            "cross-validation needs at least 2 samples".into(),
        ));
    }
    let folds = folds.clamp(2, samples.len());
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let fold_of = |position: usize| position % folds;
    let mut scores = Vec::new();
    for c in c_grid() {
        let mut fold_means = Vec::with_capacity(folds);
        for fold in 0..folds {
            let train_set: Vec<Sample> = indices
                .iter()
                .enumerate()
                .filter(|&(pos, _)| fold_of(pos) != fold)
                .map(|(_, &i)| samples[i].clone())
                .collect();
            let validate_set: Vec<Sample> = indices
                .iter()
                .enumerate()
                .filter(|&(pos, _)| fold_of(pos) == fold)
                .map(|(_, &i)| samples[i].clone())
                .collect();
            let mut config = base.clone();
            config.c = c;
            let model = train(&train_set, &config)?;
            let stats = evaluate_model(&model, &validate_set, &[base.loss.clone()])?;
            fold_means.push(stats[0].mean);
        }
        let (mean, _) = mean_and_std_error(&fold_means);
        scores.push((c, mean));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(c, mean)| match acc {
            Some((_, best_mean)) if best_mean <= mean => acc,
            _ => Some((c, mean)),
        })
        .map(|(c, _)| c)
        .expect("non-empty grid");
    Ok(CSelection { best, scores })
}

/// Serialize a model to pretty JSON.
pub fn model_to_json(model: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

/// Load a model back from JSON.
pub fn model_from_json(json: &str) -> Result<Model> {
    Ok(serde_json::from_str(json)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridShape;
    use crate::synth::StructureKind;

    fn small_config() -> ExperimentConfig {
        let synth = SyntheticConfig {
            shape: GridShape::new(6, 5).unwrap(),
            samples: 6,
            structure: StructureKind::Polylines,
            noise: 0.0,
            seed: 17,
        };
        let shape = synth.shape;
        let mut config = ExperimentConfig::new(
            synth,
            vec![LossFunction::Hamming],
            vec![
                LossFunction::Hamming,
                LossFunction::delta8_grid(0.5, shape).unwrap(),
                LossFunction::IouEval,
            ],
        );
        config.splits = 2;
        config.c = 10.0;
        config
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut config = small_config();
        config.splits = 0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.train_fraction = 1.0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.eval_losses.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn split_indices_partition_the_dataset() {
        for split in 0..5 {
            let (train, test) = split_indices(11, 0.5, 99, split);
            assert_eq!(train.len(), 6);
            assert_eq!(test.len(), 5);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..11).collect::<Vec<_>>());
        }
        // Deterministic per (seed, split), different across splits.
        assert_eq!(split_indices(11, 0.5, 99, 3), split_indices(11, 0.5, 99, 3));
        assert_ne!(
            split_indices(11, 0.5, 99, 0).0,
            split_indices(11, 0.5, 99, 1).0
        );
    }

    #[test]
    fn separable_data_gives_near_zero_diagonal() {
        let config = small_config();
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.table.len(), 1);
        assert_eq!(result.table[0].len(), 3);
        // Hamming-trained model on noiseless separable data: Hamming test
        // loss should be essentially zero.
        assert!(
            result.table[0][0].mean <= 0.5,
            "diagonal cell too large: {}",
            result.table[0][0].mean
        );
    }

    #[test]
    fn result_round_trips_through_json() {
        let result = run_experiment(&small_config()).unwrap();
        let json = serde_json::to_string(&result).unwrap();
        let restored: ExperimentResult = serde_json::from_str(&json).unwrap();
        assert_eq!(restored, result);
    }

    #[test]
    fn loss_statistics_are_reproducible() {
        let config = small_config();
        let first = run_experiment(&config).unwrap();
        let second = run_experiment(&config).unwrap();
        assert_eq!(first.per_split, second.per_split);
        assert_eq!(first.table, second.table);
    }

    #[test]
    fn render_contains_headers_and_rows() {
        let result = run_experiment(&small_config()).unwrap();
        let text = result.render();
        assert!(text.contains("hamming"));
        assert!(text.contains("delta8"));
        assert!(text.contains('±'));
    }

    #[test]
    fn c_selection_picks_from_the_grid() {
        let synth = SyntheticConfig {
            shape: GridShape::new(5, 4).unwrap(),
            samples: 4,
            structure: StructureKind::Bars,
            noise: 0.0,
            seed: 3,
        };
        let samples = generate(&synth).unwrap();
        let base = TrainConfig::new(LossFunction::Hamming);
        let selection = select_c(&samples, &base, 2, 7).unwrap();
        assert!(c_grid().contains(&selection.best));
        assert_eq!(selection.scores.len(), 5);
        // Separable data: the best C should achieve zero validation loss.
        let best_score = selection
            .scores
            .iter()
            .find(|(c, _)| *c == selection.best)
            .unwrap()
            .1;
        assert!(best_score <= 0.5);
    }
}
