use serde::{Deserialize, Serialize};

use super::infer::PredictionRecord;
use super::model::Normalization;
use super::train::{optimize, TrainConfig, TrainingLog};
use super::TpmError;
use crate::data::{Dataset, EventSequence};
use crate::neural::{hier_forward, BackboneConfig, Grads, HierarchicalRnn, Init, ParamCheckpoint, ParamId, ParamStore, Tape};

/// Shortest waiting time the regression baseline may predict.
pub const MIN_INTERVAL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub backbone: BackboneConfig,
    pub seed: u64,
}

/// The hierarchical backbone with a linear head regressing the waiting
/// time, trained on squared error.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    pub config: RegressionConfig,
    pub classes: Vec<String>,
    pub normalization: Normalization,
    store: ParamStore,
    backbone: HierarchicalRnn,
    w: ParamId,
    b: ParamId,
}

impl RegressionModel {
    pub fn new(config: RegressionConfig, classes: Vec<String>, normalization: Normalization) -> Result<Self, TpmError> {
        let mut store = ParamStore::new(config.seed);
        let backbone = HierarchicalRnn::register(&mut store, config.backbone)?;
        let hd = config.backbone.upper_hidden;
        let w = store.register("head.regression.w", &[hd], Init::Uniform(1.0 / (hd as f64).sqrt()))?;
        let b = store.register("head.regression.b", &[1], Init::Constant(1.0))?;
        Ok(Self {
            config,
            classes,
            normalization,
            store,
            backbone,
            w,
            b,
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub(crate) fn from_parts(
        config: RegressionConfig,
        classes: Vec<String>,
        normalization: Normalization,
        params: &ParamCheckpoint,
    ) -> Result<Self, TpmError> {
        let mut model = Self::new(config, classes, normalization)?;
        model.store.load_checkpoint(params)?;
        Ok(model)
    }

    /// Raw (unclamped) predicted waiting time from `h_j`.
    pub fn raw_interval(&self, h: &[f64]) -> f64 {
        let w = &self.store.get(self.w).values;
        let b = self.store.get(self.b).values[0];
        self.normalization.time_scale * (w.iter().zip(h).map(|(a, x)| a * x).sum::<f64>() + b)
    }

    /// Summed squared error of one sequence in units of the time scale.
    pub fn loss_and_grads(&self, store: &ParamStore, seq: &EventSequence) -> Result<(f64, Grads), TpmError> {
        let m = seq.events.len();
        if m < 2 {
            return Ok((0.0, store.zero_grads()));
        }
        let mut tape = Tape::new();
        let bound = self.backbone.bind(&mut tape, store);
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let upto = seq.events[m - 2].frame + 1;
        let frames: Vec<Vec<f64>> = seq.frames[..upto].iter().map(|f| f.features.clone()).collect();
        let idx: Vec<usize> = seq.events[..m - 1].iter().map(|e| e.frame).collect();
        let hs = bound.forward(&mut tape, &frames, &idx, &self.normalization.features)?;
        let preds: Vec<_> = hs
            .iter()
            .map(|&h| {
                let wh = tape.dot(w, h);
                tape.add(wh, b)
            })
            .collect();
        let pred = tape.concat(&preds);
        let targets = seq
            .events
            .windows(2)
            .map(|e| (e[1].t - e[0].t) / self.normalization.time_scale)
            .collect();
        let target = tape.constant(targets);
        let d = tape.sub(pred, target);
        let sq = tape.mul(d, d);
        let loss = tape.sum(sq);
        let adj = tape.backward(loss);
        Ok((tape.scalar_value(loss), tape.param_grads(&adj, store)))
    }

    /// Time-only records: the category distribution is uniform and the
    /// location is carried over unchanged.
    pub fn evaluate_teacher_forced(&self, seq: &EventSequence) -> Result<Vec<PredictionRecord>, TpmError> {
        let m = seq.events.len();
        if m < 2 {
            return Ok(Vec::new());
        }
        let upto = seq.events[m - 2].frame + 1;
        let frames: Vec<Vec<f64>> = seq.frames[..upto].iter().map(|f| f.features.clone()).collect();
        let idx: Vec<usize> = seq.events[..m - 1].iter().map(|e| e.frame).collect();
        let state = hier_forward(&self.store, &self.backbone, &frames, &idx, &self.normalization.features)?;
        let k = self.classes.len();
        Ok(state
            .upper_hidden
            .iter()
            .enumerate()
            .map(|(j, h)| {
                let (cur, next) = (seq.events[j], seq.events[j + 1]);
                PredictionRecord {
                    sequence_id: seq.id.clone(),
                    event_index: j,
                    current_time: cur.t,
                    predicted_time: cur.t + self.raw_interval(h).max(MIN_INTERVAL),
                    truth_time: next.t,
                    predicted_category: 0,
                    category_distribution: vec![1.0 / k as f64; k],
                    truth_category: next.category,
                    current_location: cur.location(),
                    predicted_location: cur.location(),
                    truth_location: next.location(),
                    time_distribution: None,
                    time_density_samples: None,
                }
            })
            .collect())
    }
}

pub fn train_regression_baseline(
    dataset: &Dataset,
    config: RegressionConfig,
    train_cfg: &TrainConfig,
) -> Result<(RegressionModel, TrainingLog), TpmError> {
    if dataset.n_transitions() == 0 {
        return Err(TpmError::EmptyData);
    }
    let mut model = RegressionModel::new(config, dataset.classes().to_vec(), Normalization::fit(dataset))?;
    let mut store = model.store.clone();
    let log = {
        let m = &model;
        optimize(
            &mut store,
            dataset.sequences.len(),
            dataset.n_transitions(),
            |s, i| m.loss_and_grads(s, &dataset.sequences[i]),
            train_cfg,
        )?
    };
    model.store = store;
    Ok((model, log))
}
