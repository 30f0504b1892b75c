use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Normalization, Objective, TpmConfig, TpmModel};
use super::TpmError;
use crate::data::Dataset;
use crate::neural::{Grads, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Gradients with a larger norm are rescaled to this norm.
    pub clip_norm: f64,
    #[serde(default)]
    pub objective: Objective,
    /// Return the parameters with the lowest training loss seen instead of
    /// the last iterate.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            clip_norm: 5.0,
            objective: Objective::Joint,
            keep_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TpmError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TpmError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(TpmError::Config(format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss per transition before this epoch's update.
    pub nll: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub initial_nll: f64,
    /// Loss of the returned parameters.
    pub final_nll: f64,
    pub n_transitions: usize,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(store: &ParamStore) -> Self {
        Self {
            m: store.zero_grads().0,
            v: store.zero_grads().0,
            step: 0,
        }
    }

    fn update(&mut self, store: &mut ParamStore, grads: &Grads, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let g = grads.get(id);
            let values = store.values_mut(id);
            for k in 0..values.len() {
                let m = &mut self.m[i][k];
                let v = &mut self.v[i][k];
                *m = Self::B1 * *m + (1.0 - Self::B1) * g[k];
                *v = Self::B2 * *v + (1.0 - Self::B2) * g[k] * g[k];
                values[k] -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Full-batch Adam on the mean per-unit loss. `loss(store, i)` returns the
/// summed loss of item `i` and its gradient; items are evaluated in
/// parallel and reduced in index order, so results do not depend on the
/// thread count.
pub(crate) fn optimize<F>(
    store: &mut ParamStore,
    n_items: usize,
    n_units: usize,
    loss: F,
    cfg: &TrainConfig,
) -> Result<TrainingLog, TpmError>
where
    F: Fn(&ParamStore, usize) -> Result<(f64, Grads), TpmError> + Sync,
{
    cfg.validate()?;
    if n_units == 0 {
        return Err(TpmError::EmptyData);
    }
    let scale = 1.0 / n_units as f64;
    let evaluate = |store: &ParamStore| -> Result<(f64, Grads), TpmError> {
        let parts = (0..n_items)
            .into_par_iter()
            .map(|i| loss(store, i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut total = 0.0;
        let mut grads = store.zero_grads();
        for (l, g) in &parts {
            total += l;
            grads.add_assign(g);
        }
        grads.scale(scale);
        Ok((total * scale, grads))
    };

    let mut adam = Adam::new(store);
    let mut records = Vec::with_capacity(cfg.epochs + 1);
    let mut best: Option<(f64, ParamStore)> = None;
    for epoch in 0..=cfg.epochs {
        let (nll, mut grads) = evaluate(store)?;
        let grad_norm = grads.norm();
        if !nll.is_finite() || !grads.is_finite() {
            return Err(TpmError::Diverged {
                epoch,
                detail: format!("loss {nll}, gradient norm {grad_norm}"),
            });
        }
        records.push(EpochRecord { epoch, nll, grad_norm });
        if cfg.keep_best && best.as_ref().is_none_or(|(b, _)| nll < *b) {
            best = Some((nll, store.clone()));
        }
        if epoch == cfg.epochs {
            break;
        }
        if grad_norm > cfg.clip_norm {
            grads.scale(cfg.clip_norm / grad_norm);
        }
        adam.update(store, &grads, cfg.learning_rate);
    }
    let mut final_nll = records.last().map(|r| r.nll).unwrap_or(f64::NAN);
    if let Some((b, params)) = best {
        if b < final_nll {
            *store = params;
            final_nll = b;
        }
    }
    Ok(TrainingLog {
        initial_nll: records[0].nll,
        final_nll,
        epochs: records,
        n_transitions: n_units,
    })
}

/// Fits the normalization to `dataset`, builds a model and trains it.
pub fn train(dataset: &Dataset, config: TpmConfig, train_cfg: &TrainConfig) -> Result<(TpmModel, TrainingLog), TpmError> {
    if dataset.n_transitions() == 0 {
        return Err(TpmError::EmptyData);
    }
    let normalization = Normalization::fit(dataset);
    let mut model = TpmModel::new(config, dataset.classes().to_vec(), normalization)?;
    let mut store = model.store().clone();
    let log = {
        let m = &model;
        optimize(
            &mut store,
            dataset.sequences.len(),
            dataset.n_transitions(),
            |s, i| m.loss_and_grads(s, &dataset.sequences[i], train_cfg.objective),
            train_cfg,
        )?
    };
    *model.store_mut() = store;
    Ok((model, log))
}
