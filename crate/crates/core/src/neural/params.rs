use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

pub const PARAMS_FORMAT: &str = "tpm-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Param {
    /// `(rows, cols)`; vectors are treated as a single column.
    pub fn dims(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (*n, 1),
            [r, c] => (*r, *c),
            _ => (self.values.len(), 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform in `[−k, k]`.
    Uniform(f64),
}

/// Named dense parameters. Initial values are drawn in registration order
/// from a generator seeded once, so the same seed and registration
/// sequence always reproduce the same store.
#[derive(Debug, Clone)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.seed == other.seed
    }
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn register(&mut self, name: &str, shape: &[usize], init: Init) -> Result<ParamId, NeuralError> {
        if self.index.contains_key(name) {
            return Err(NeuralError::DuplicateParam(name.to_string()));
        }
        if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
            return Err(NeuralError::Shape(format!("parameter {name} has invalid shape {shape:?}")));
        }
        let len = shape.iter().product();
        let values = match init {
            Init::Zeros => vec![0.0; len],
            Init::Constant(c) => vec![c; len],
            Init::Uniform(k) => (0..len).map(|_| self.rng.random_range(-k..=k)).collect(),
        };
        let id = ParamId(self.params.len());
        self.index.insert(name.to_string(), id.0);
        self.params.push(Param {
            name: name.to_string(),
            shape: shape.to_vec(),
            values,
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].values
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params.iter().map(|p| vec![0.0; p.values.len()]).collect())
    }

    pub fn to_checkpoint(&self) -> ParamCheckpoint {
        ParamCheckpoint {
            format: PARAMS_FORMAT.to_string(),
            version: PARAMS_VERSION,
            seed: self.seed,
            params: self
                .params
                .iter()
                .map(|p| {
                    (
                        p.name.clone(),
                        TensorEntry {
                            shape: p.shape.clone(),
                            values: p.values.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Overwrites every registered parameter from a checkpoint. The
    /// checkpoint must hold exactly the registered names with identical
    /// shapes.
    pub fn load_checkpoint(&mut self, ckpt: &ParamCheckpoint) -> Result<(), NeuralError> {
        if ckpt.format != PARAMS_FORMAT || ckpt.version != PARAMS_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported parameter format {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if ckpt.params.len() != self.params.len() {
            return Err(NeuralError::Checkpoint(format!(
                "checkpoint has {} parameters, model expects {}",
                ckpt.params.len(),
                self.params.len()
            )));
        }
        for p in &mut self.params {
            let entry = ckpt
                .params
                .get(&p.name)
                .ok_or_else(|| NeuralError::Checkpoint(format!("missing parameter {}", p.name)))?;
            if entry.shape != p.shape || entry.values.len() != p.values.len() {
                return Err(NeuralError::Checkpoint(format!(
                    "shape mismatch for {}: {:?} vs {:?}",
                    p.name, entry.shape, p.shape
                )));
            }
            p.values.clone_from(&entry.values);
        }
        self.seed = ckpt.seed;
        Ok(())
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// On-disk parameter map: name → shape + row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub params: BTreeMap<String, TensorEntry>,
}
