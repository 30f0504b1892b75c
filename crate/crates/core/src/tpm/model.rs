use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::heads::{CategoryHead, IntensityHeadA, IntensityHeadB, SpaceHead, TimeHead};
use super::TpmError;
use crate::data::{Dataset, EventSequence};
use crate::neural::{
    hier_forward, BackboneConfig, Grads, HierarchicalRnn, Init, Normalizer, ParamId, ParamStore, Tape, Var,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    A,
    B,
}

impl FromStr for HeadKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(HeadKind::A),
            "B" | "b" => Ok(HeadKind::B),
            other => Err(format!("unknown head {other}, expected A or B")),
        }
    }
}

/// Terms included in the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Joint,
    TimeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpmConfig {
    pub head: HeadKind,
    pub backbone: BackboneConfig,
    /// Fixed standard deviations of the space-shift Gaussian.
    pub sigma: [f64; 2],
    /// Seed of the parameter initialization.
    pub seed: u64,
}

impl TpmConfig {
    pub fn new(head: HeadKind, frame_dim: usize) -> Self {
        Self {
            head,
            backbone: BackboneConfig::new(frame_dim),
            sigma: [2.0, 2.0],
            seed: 0,
        }
    }
}

/// Data-derived rescalings. Frame features are standardized, waiting
/// times are measured in units of `time_scale` inside the heads, and the
/// space head's output is multiplied by `space_scale`. Likelihoods and
/// predictions stay in the data's own units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub features: Normalizer,
    pub time_scale: f64,
    pub space_scale: f64,
}

impl Normalization {
    pub fn identity(feature_dim: usize) -> Self {
        Self {
            features: Normalizer::identity(feature_dim),
            time_scale: 1.0,
            space_scale: 1.0,
        }
    }

    /// Feature mean/std over all frames, mean waiting time, and the root
    /// mean square of the shift components.
    pub fn fit(dataset: &Dataset) -> Self {
        let dim = dataset.header.feature_dim;
        let features = Normalizer::fit(
            dim,
            dataset.sequences.iter().flat_map(|s| s.frames.iter().map(|f| f.features.as_slice())),
        );
        let (mut n, mut dt, mut sq) = (0.0, 0.0, 0.0);
        for s in &dataset.sequences {
            for w in s.events.windows(2) {
                n += 1.0;
                dt += w[1].t - w[0].t;
                sq += 0.5 * ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2));
            }
        }
        let positive = |v: f64| if v > 1e-12 && v.is_finite() { v } else { 1.0 };
        Self {
            features,
            time_scale: positive(if n > 0.0 { dt / n } else { 1.0 }),
            space_scale: positive(if n > 0.0 { (sq / n).sqrt() } else { 1.0 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeParams {
    A { v: ParamId, rho: ParamId, b: ParamId },
    B { w: ParamId, b: ParamId },
}

/// Hierarchical backbone with one intensity head, a category head and a
/// space-shift head.
#[derive(Debug, Clone)]
pub struct TpmModel {
    pub config: TpmConfig,
    pub classes: Vec<String>,
    pub normalization: Normalization,
    store: ParamStore,
    backbone: HierarchicalRnn,
    time: TimeParams,
    cat_w: ParamId,
    cat_b: ParamId,
    space_w: ParamId,
    space_b: ParamId,
}

/// Per-transition log-likelihood terms; the space term omits the
/// Gaussian normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionTerms {
    pub time: f64,
    pub category: f64,
    pub space: f64,
}

struct BoundHeads {
    time: BoundTime,
    cat_w: Var,
    cat_b: Var,
    space_w: Var,
    space_b: Var,
}

enum BoundTime {
    A { v: Var, rho: Var, b: Var },
    B { w: Var, b: Var },
}

impl TpmModel {
    pub fn new(config: TpmConfig, classes: Vec<String>, normalization: Normalization) -> Result<Self, TpmError> {
        if classes.is_empty() {
            return Err(TpmError::Config("at least one class is required".into()));
        }
        if !(config.sigma[0] > 0.0 && config.sigma[1] > 0.0) {
            return Err(TpmError::Config(format!("sigma must be positive, got {:?}", config.sigma)));
        }
        if normalization.features.offset.len() != config.backbone.frame_dim {
            return Err(TpmError::Config(format!(
                "normalization has {} features, backbone expects {}",
                normalization.features.offset.len(),
                config.backbone.frame_dim
            )));
        }
        let mut store = ParamStore::new(config.seed);
        let backbone = HierarchicalRnn::register(&mut store, config.backbone)?;
        let hd = config.backbone.upper_hidden;
        let k = 1.0 / (hd as f64).sqrt();
        let time = match config.head {
            HeadKind::A => TimeParams::A {
                v: store.register("head.time.v", &[hd], Init::Uniform(k))?,
                rho: store.register("head.time.rho", &[1], Init::Zeros)?,
                b: store.register("head.time.b", &[1], Init::Zeros)?,
            },
            HeadKind::B => TimeParams::B {
                w: store.register("head.time.w", &[hd], Init::Uniform(k))?,
                b: store.register("head.time.b", &[1], Init::Zeros)?,
            },
        };
        let n_classes = classes.len();
        let cat_w = store.register("head.category.w", &[n_classes, hd], Init::Uniform(k))?;
        let cat_b = store.register("head.category.b", &[n_classes], Init::Zeros)?;
        let space_w = store.register("head.space.w", &[2, hd], Init::Uniform(k))?;
        let space_b = store.register("head.space.b", &[2], Init::Zeros)?;
        Ok(Self {
            config,
            classes,
            normalization,
            store,
            backbone,
            time,
            cat_w,
            cat_b,
            space_w,
            space_b,
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn head_kind(&self) -> HeadKind {
        self.config.head
    }

    fn values(&self, id: ParamId) -> &[f64] {
        &self.store.get(id).values
    }

    /// Time head with the time normalization folded into its parameters.
    pub fn time_head(&self) -> TimeHead {
        let ln_s = self.normalization.time_scale.ln();
        match self.time {
            TimeParams::A { v, rho, b } => TimeHead::A(IntensityHeadA {
                v: self.values(v).to_vec(),
                rho: self.values(rho)[0] - ln_s,
                b: self.values(b)[0] - ln_s,
            }),
            TimeParams::B { w, b } => TimeHead::B(IntensityHeadB {
                w: self.values(w).to_vec(),
                b: self.values(b)[0] - ln_s,
            }),
        }
    }

    pub fn category_head(&self) -> CategoryHead {
        CategoryHead {
            w: self.values(self.cat_w).to_vec(),
            b: self.values(self.cat_b).to_vec(),
        }
    }

    pub fn space_head(&self) -> SpaceHead {
        let b = self.values(self.space_b);
        SpaceHead {
            w: self.values(self.space_w).to_vec(),
            b: [b[0], b[1]],
            sigma: self.config.sigma,
            scale: self.normalization.space_scale,
        }
    }

    /// `h_j` for the first `n_events` events, reading frames only up to
    /// the frame of event `n_events − 1`.
    pub fn hidden_states(&self, seq: &EventSequence, n_events: usize) -> Result<Vec<Vec<f64>>, TpmError> {
        let n = n_events.min(seq.events.len());
        if n == 0 {
            return Ok(Vec::new());
        }
        let upto = seq.events[n - 1].frame + 1;
        let frames: Vec<Vec<f64>> = seq.frames[..upto].iter().map(|f| f.features.clone()).collect();
        let idx: Vec<usize> = seq.events[..n].iter().map(|e| e.frame).collect();
        let state = hier_forward(&self.store, &self.backbone, &frames, &idx, &self.normalization.features)?;
        Ok(state.upper_hidden)
    }

    /// Value-level terms of every transition `j → j+1`.
    pub fn transition_terms(&self, seq: &EventSequence) -> Result<Vec<TransitionTerms>, TpmError> {
        let m = seq.events.len();
        if m < 2 {
            return Ok(Vec::new());
        }
        let hs = self.hidden_states(seq, m - 1)?;
        let (time, cat, space) = (self.time_head(), self.category_head(), self.space_head());
        let c0 = -(2.0 * std::f64::consts::PI * self.config.sigma[0] * self.config.sigma[1]).ln();
        hs.iter()
            .enumerate()
            .map(|(j, h)| {
                let (cur, next) = (seq.events[j], seq.events[j + 1]);
                Ok(TransitionTerms {
                    time: super::heads::time_log_likelihood(&time, h, cur.t, next.t)?,
                    category: super::heads::category_log_likelihood(&cat, h, next.category)?,
                    space: super::heads::space_log_likelihood(&space, h, (next.x - cur.x, next.y - cur.y)) - c0,
                })
            })
            .collect()
    }

    /// Negative summed log-likelihood of all transitions with constants
    /// dropped. Sequences with a single event contribute 0.
    pub fn joint_nll(&self, seq: &EventSequence) -> Result<f64, TpmError> {
        Ok(-self
            .transition_terms(seq)?
            .iter()
            .map(|t| t.time + t.category + t.space)
            .sum::<f64>())
    }

    fn bind_heads(&self, tape: &mut Tape, store: &ParamStore) -> BoundHeads {
        let time = match self.time {
            TimeParams::A { v, rho, b } => BoundTime::A {
                v: tape.param(store, v),
                rho: tape.param(store, rho),
                b: tape.param(store, b),
            },
            TimeParams::B { w, b } => BoundTime::B {
                w: tape.param(store, w),
                b: tape.param(store, b),
            },
        };
        BoundHeads {
            time,
            cat_w: tape.param(store, self.cat_w),
            cat_b: tape.param(store, self.cat_b),
            space_w: tape.param(store, self.space_w),
            space_b: tape.param(store, self.space_b),
        }
    }

    /// Summed NLL of one sequence and its gradient with respect to
    /// `store`, which must share this model's layout.
    pub fn loss_and_grads(
        &self,
        store: &ParamStore,
        seq: &EventSequence,
        objective: Objective,
    ) -> Result<(f64, Grads), TpmError> {
        let m = seq.events.len();
        if m < 2 {
            return Ok((0.0, store.zero_grads()));
        }
        let mut tape = Tape::new();
        let bound = self.backbone.bind(&mut tape, store);
        let heads = self.bind_heads(&mut tape, store);
        let upto = seq.events[m - 2].frame + 1;
        let frames: Vec<Vec<f64>> = seq.frames[..upto].iter().map(|f| f.features.clone()).collect();
        let idx: Vec<usize> = seq.events[..m - 1].iter().map(|e| e.frame).collect();
        let hs = bound.forward(&mut tape, &frames, &idx, &self.normalization.features)?;

        let ln_s = self.normalization.time_scale.ln();
        let inv_s = 1.0 / self.normalization.time_scale;
        let inv_sigma = vec![1.0 / self.config.sigma[0], 1.0 / self.config.sigma[1]];
        let mut terms = Vec::with_capacity(3 * hs.len());
        for (j, &h) in hs.iter().enumerate() {
            let (cur, next) = (seq.events[j], seq.events[j + 1]);
            let dt = next.t - cur.t;
            let time_ll = match heads.time {
                BoundTime::A { v, rho, b } => {
                    let vh = tape.dot(v, h);
                    let a = tape.add(vh, b);
                    let a = tape.offset(a, -ln_s);
                    let w = tape.exp(rho);
                    let w = tape.scale(w, inv_s);
                    let wdt = tape.scale(w, dt);
                    let grow = tape.expm1(wdt);
                    let ea = tape.exp(a);
                    let num = tape.mul(ea, grow);
                    let comp = tape.div(num, w);
                    let lin = tape.add(a, wdt);
                    tape.sub(lin, comp)
                }
                BoundTime::B { w, b } => {
                    let wh = tape.dot(w, h);
                    let a = tape.add(wh, b);
                    let a = tape.offset(a, -ln_s);
                    let ea = tape.exp(a);
                    let comp = tape.scale(ea, dt);
                    tape.sub(a, comp)
                }
            };
            terms.push(time_ll);
            if objective == Objective::Joint {
                let z = tape.matvec(heads.cat_w, h);
                let z = tape.add(z, heads.cat_b);
                let ls = tape.log_softmax(z);
                terms.push(tape.pick(ls, next.category));

                let mu = tape.matvec(heads.space_w, h);
                let mu = tape.add(mu, heads.space_b);
                let mu = tape.scale(mu, self.normalization.space_scale);
                let shift = tape.constant(vec![next.x - cur.x, next.y - cur.y]);
                let d = tape.sub(shift, mu);
                let z = tape.mul_const(d, inv_sigma.clone());
                let sq = tape.mul(z, z);
                let s = tape.sum(sq);
                terms.push(tape.scale(s, -0.5));
            }
        }
        let all = tape.concat(&terms);
        let total = tape.sum(all);
        let nll = tape.scale(total, -1.0);
        let adj = tape.backward(nll);
        Ok((tape.scalar_value(nll), tape.param_grads(&adj, store)))
    }

    /// Rebuilds a model from stored settings and parameters.
    pub(crate) fn from_parts(
        config: TpmConfig,
        classes: Vec<String>,
        normalization: Normalization,
        params: &crate::neural::ParamCheckpoint,
    ) -> Result<Self, TpmError> {
        let mut model = Self::new(config, classes, normalization)?;
        model.store.load_checkpoint(params)?;
        Ok(model)
    }
}
