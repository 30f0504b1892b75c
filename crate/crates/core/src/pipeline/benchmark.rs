use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate_records, fit_markov_dataset, report, MarkovPredictor, PipelineError, Predictor};
use crate::classical::{fit_mle, Family};
use crate::data::{generate_synthetic, SynthConfig};
use crate::metrics::EvalReport;
use crate::neural::BackboneConfig;
use crate::tpm::{train, train_regression_baseline, HeadKind, RegressionConfig, TpmConfig, TrainConfig};

/// The bundled benchmark settings.
pub const QUICKSTART_JSON: &str = include_str!("../../../../configs/quickstart.json");

pub fn quickstart() -> BenchmarkConfig {
    serde_json::from_str(QUICKSTART_JSON).expect("bundled quickstart config parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub backbone: BackboneConfig,
    pub sigma: [f64; 2],
    pub seed: u64,
}

/// Simulate, split, train every model and score it on the held-out part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub synth: SynthConfig,
    /// Share of sequences used for training; the rest is held out.
    pub train_fraction: f64,
    pub heads: Vec<HeadKind>,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub regression_train: TrainConfig,
    pub markov_orders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub reports: Vec<EvalReport>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

impl BenchmarkResult {
    pub fn get(&self, name: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.model == name)
    }

    /// Markov reports of order at least 1.
    pub fn markov_chains(&self) -> impl Iterator<Item = &EvalReport> {
        self.reports.iter().filter(|r| r.model.starts_with("markov_k"))
    }
}

/// Report names: `tpm_a`/`tpm_b`, `regression`, `poisson`, `hawkes`,
/// `self_correcting` (time only), `markov_k<k>` and `majority` (category
/// and space only).
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult, PipelineError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(PipelineError::Config("train_fraction must lie in (0, 1)".into()));
    }
    let data = generate_synthetic(&cfg.synth)?;
    let cut = ((data.sequences.len() as f64) * cfg.train_fraction).round() as usize;
    let (train_set, test_set) = data.split_at(cut);
    if train_set.sequences.is_empty() || test_set.sequences.is_empty() {
        return Err(PipelineError::Config("split leaves an empty part".into()));
    }
    let classes = data.classes().to_vec();
    lap("simulate", &mut timings);

    let mut reports = Vec::new();
    for &head in &cfg.heads {
        let tc = TpmConfig {
            head,
            backbone: cfg.model.backbone,
            sigma: cfg.model.sigma,
            seed: cfg.model.seed,
        };
        let (model, _) = train(&train_set, tc, &cfg.train)?;
        let name = match head {
            HeadKind::A => "tpm_a",
            HeadKind::B => "tpm_b",
        };
        let recs = evaluate_records(&Predictor::Tpm(&model), &test_set, None)?;
        reports.push(report(name, &recs, &classes)?);
        lap(name, &mut timings);
    }

    let rc = RegressionConfig {
        backbone: cfg.model.backbone,
        seed: cfg.model.seed,
    };
    let (reg, _) = train_regression_baseline(&train_set, rc, &cfg.regression_train)?;
    let recs = evaluate_records(&Predictor::Regression(&reg), &test_set, None)?;
    reports.push(report("regression", &recs, &classes)?);
    lap("regression", &mut timings);

    let histories = train_set.histories();
    for (family, name) in [
        (Family::Poisson, "poisson"),
        (Family::Hawkes, "hawkes"),
        (Family::SelfCorrecting, "self_correcting"),
    ] {
        let fit = fit_mle(&histories, family)?;
        let p = Predictor::Baseline {
            time: Some(&fit.model),
            markov: None,
        };
        reports.push(report(name, &evaluate_records(&p, &test_set, None)?, &classes)?);
        lap(name, &mut timings);
    }

    let top = cfg.markov_orders.iter().copied().max().unwrap_or(1).max(1);
    let table = fit_markov_dataset(&train_set, top)?;
    let mut orders: Vec<(usize, String)> = cfg.markov_orders.iter().map(|&k| (k, format!("markov_k{k}"))).collect();
    orders.push((0, "majority".to_string()));
    for (k, name) in orders {
        let mp = MarkovPredictor {
            table: table.clone(),
            max_order: k,
        };
        let p = Predictor::Baseline {
            time: None,
            markov: Some(&mp),
        };
        reports.push(report(&name, &evaluate_records(&p, &test_set, None)?, &classes)?);
    }
    lap("markov", &mut timings);
    Ok(BenchmarkResult { reports, timings })
}
