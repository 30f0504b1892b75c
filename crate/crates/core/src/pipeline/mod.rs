//! End-to-end building blocks shared by the command line and the tests:
//! simulation settings, baseline predictors, teacher-forced evaluation
//! and the bundled benchmark.

mod benchmark;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use benchmark::{quickstart, run_benchmark, BenchmarkConfig, BenchmarkResult, QUICKSTART_JSON};

use crate::classical::{sample_thinning, ClassicalError, ClassicalModel};
use crate::data::{generate_synthetic, DataError, Dataset, EventSequence, SynthConfig};
use crate::markov::{fit_markov, Labeled, MarkovError, MarkovTable};
use crate::metrics::{EvalReport, MetricsError};
use crate::tpm::{DensityGrid, LoadedModel, PredictionRecord, RegressionModel, TpmError, TpmModel};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Tpm(#[from] TpmError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("class table mismatch: model has {model:?}, dataset has {data:?}")]
    ClassMismatch { model: Vec<String>, data: Vec<String> },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// What `simulate` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SimulateConfig {
    Synthetic(SynthConfig),
    /// Thinning samples of a classical process on `[0, duration]`, one
    /// frame per event. Sequences without events are dropped.
    Classical {
        model: ClassicalModel,
        n_sequences: usize,
        duration: f64,
        seed: u64,
    },
}

pub fn simulate(config: &SimulateConfig) -> Result<Dataset, PipelineError> {
    match config {
        SimulateConfig::Synthetic(s) => Ok(generate_synthetic(s)?),
        SimulateConfig::Classical {
            model,
            n_sequences,
            duration,
            seed,
        } => {
            model.validate()?;
            if *n_sequences == 0 || !(*duration > 0.0) {
                return Err(PipelineError::Config("need n_sequences ≥ 1 and duration > 0".into()));
            }
            let runs = (0..*n_sequences)
                .map(|i| {
                    let s = seed.wrapping_add(i as u64);
                    Ok((format!("seq-{i:05}"), sample_thinning(model, 0.0, *duration, s)?))
                })
                .collect::<Result<Vec<_>, ClassicalError>>()?;
            let runs: Vec<_> = runs.into_iter().filter(|(_, t)| !t.is_empty()).collect();
            if runs.is_empty() {
                return Err(PipelineError::Config("simulation produced no events".into()));
            }
            let mut ds = Dataset::from_event_times(runs);
            ds.header.provenance = Some(serde_json::json!({ "generator": "thinning", "config": config }));
            Ok(ds)
        }
    }
}

/// Category names and locations of every sequence.
pub fn markov_corpus(dataset: &Dataset) -> Vec<Vec<Labeled>> {
    dataset
        .sequences
        .iter()
        .map(|s| {
            s.events
                .iter()
                .map(|e| (dataset.header.classes[e.category].clone(), e.location()))
                .collect()
        })
        .collect()
}

pub fn fit_markov_dataset(dataset: &Dataset, k: usize) -> Result<MarkovTable, PipelineError> {
    Ok(fit_markov(&markov_corpus(dataset), k)?)
}

/// Category and space predictor for the baselines.
#[derive(Debug, Clone)]
pub struct MarkovPredictor {
    pub table: MarkovTable,
    /// Context cap; 0 gives the majority vote.
    pub max_order: usize,
}

/// Anything that can produce teacher-forced records for a sequence.
#[derive(Debug, Clone)]
pub enum Predictor<'a> {
    Tpm(&'a TpmModel),
    Regression(&'a RegressionModel),
    /// Classical time model; categories and locations from the Markov
    /// table when given, else uniform and unchanged.
    Baseline {
        time: Option<&'a ClassicalModel>,
        markov: Option<&'a MarkovPredictor>,
    },
    /// Ground truth, for checking the metric plumbing.
    Oracle,
}

impl<'a> Predictor<'a> {
    pub fn from_loaded(model: &'a LoadedModel) -> Self {
        match model {
            LoadedModel::Tpm(m) => Predictor::Tpm(m),
            LoadedModel::Regression(m) => Predictor::Regression(m),
        }
    }

    pub fn records(
        &self,
        seq: &EventSequence,
        classes: &[String],
        density: Option<DensityGrid>,
    ) -> Result<Vec<PredictionRecord>, PipelineError> {
        match self {
            Predictor::Tpm(m) => Ok(m.evaluate_teacher_forced(seq, density)?),
            Predictor::Regression(m) => Ok(m.evaluate_teacher_forced(seq)?),
            Predictor::Baseline { time, markov } => baseline_records(seq, classes, *time, *markov),
            Predictor::Oracle => Ok(oracle_records(seq, classes.len())),
        }
    }
}

fn oracle_records(seq: &EventSequence, k: usize) -> Vec<PredictionRecord> {
    seq.events
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let mut dist = vec![0.0; k];
            dist[w[1].category] = 1.0;
            PredictionRecord {
                sequence_id: seq.id.clone(),
                event_index: j,
                current_time: w[0].t,
                predicted_time: w[1].t,
                truth_time: w[1].t,
                predicted_category: w[1].category,
                category_distribution: dist,
                truth_category: w[1].category,
                current_location: w[0].location(),
                predicted_location: w[1].location(),
                truth_location: w[1].location(),
                time_distribution: None,
                time_density_samples: None,
            }
        })
        .collect()
}

fn baseline_records(
    seq: &EventSequence,
    classes: &[String],
    time: Option<&ClassicalModel>,
    markov: Option<&MarkovPredictor>,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    let history = seq.history();
    let names: Vec<String> = seq.events.iter().map(|e| classes[e.category].clone()).collect();
    let k = classes.len();
    let mut out = Vec::with_capacity(seq.n_transitions());
    for (j, w) in seq.events.windows(2).enumerate() {
        let (cur, next) = (w[0], w[1]);
        let predicted_time = match time {
            Some(m) => m.expected_next_time(&history.prefix(j))?,
            None => cur.t,
        };
        let (dist, location, predicted_category) = match markov {
            Some(mp) => {
                let p = mp.table.predict_with_order(&names[..=j], cur.location(), mp.max_order);
                let total: u64 = p.counts.values().sum();
                let dist: Vec<f64> = classes
                    .iter()
                    .map(|c| *p.counts.get(c).unwrap_or(&0) as f64 / total as f64)
                    .collect();
                let chosen = classes.iter().position(|c| *c == p.category).unwrap_or(0);
                (dist, p.location, chosen)
            }
            None => (vec![1.0 / k as f64; k], cur.location(), 0),
        };
        out.push(PredictionRecord {
            sequence_id: seq.id.clone(),
            event_index: j,
            current_time: cur.t,
            predicted_time,
            truth_time: next.t,
            predicted_category,
            category_distribution: dist,
            truth_category: next.category,
            current_location: cur.location(),
            predicted_location: location,
            truth_location: next.location(),
            time_distribution: None,
            time_density_samples: None,
        });
    }
    Ok(out)
}

/// Records for every sequence, evaluated in parallel and returned in
/// input order.
pub fn evaluate_records(
    predictor: &Predictor<'_>,
    dataset: &Dataset,
    density: Option<DensityGrid>,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    let per_seq = dataset
        .sequences
        .par_iter()
        .map(|s| predictor.records(s, dataset.classes(), density))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_seq.into_iter().flatten().collect())
}

pub fn report(name: &str, records: &[PredictionRecord], classes: &[String]) -> Result<EvalReport, PipelineError> {
    let outcomes: Vec<_> = records.iter().map(PredictionRecord::outcome).collect();
    Ok(EvalReport::from_outcomes(name, &outcomes, classes)?)
}

pub fn check_classes(model: &[String], dataset: &Dataset) -> Result<(), PipelineError> {
    if model != dataset.classes() {
        return Err(PipelineError::ClassMismatch {
            model: model.to_vec(),
            data: dataset.classes().to_vec(),
        });
    }
    Ok(())
}
