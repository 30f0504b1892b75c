use serde::{Deserialize, Serialize};

use super::{Init, NeuralError, ParamId, ParamStore, Tape, Var};

/// How a raw frame vector is turned into the lower LSTM's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    /// One perceptron over the whole (normalized) frame vector.
    Concat,
    /// Frame is a list of `(x, y)` pairs. A perceptron shared by all
    /// players encodes each pair; the encodings are max-pooled.
    PerPlayer { max_players: usize },
}

/// Per-dimension affine map `(x − offset) / scale` applied to raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation per dimension over `rows`. Dimensions
    /// with zero spread keep unit scale.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0.0;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for r in rows {
            n += 1.0;
            for (k, &v) in r.iter().enumerate().take(dim) {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        if n == 0.0 {
            return Self::identity(dim);
        }
        let offset: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&offset)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { offset, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((v, o), s)| (v - o) / s)
            .collect()
    }
}

/// Single-layer perceptron frame encoder, `tanh(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEncoderParams {
    pub kind: EncoderKind,
    pub input_dim: usize,
    pub output_dim: usize,
    weights: ParamId,
    bias: ParamId,
}

impl FrameEncoderParams {
    /// `frame_dim` is the raw frame length; for the per-player encoder it
    /// must be even (pairs of coordinates).
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        kind: EncoderKind,
        frame_dim: usize,
        output_dim: usize,
    ) -> Result<Self, NeuralError> {
        let input_dim = match kind {
            EncoderKind::Concat => frame_dim,
            EncoderKind::PerPlayer { max_players } => {
                if max_players < 1 {
                    return Err(NeuralError::Shape("max_players must be at least 1".into()));
                }
                if frame_dim % 2 != 0 {
                    return Err(NeuralError::Shape(format!(
                        "per-player encoder needs (x, y) pairs, frame has {frame_dim} values"
                    )));
                }
                2
            }
        };
        let k = 1.0 / (input_dim as f64).sqrt();
        let weights = store.register(&format!("{prefix}.w"), &[output_dim, input_dim], Init::Uniform(k))?;
        let bias = store.register(&format!("{prefix}.b"), &[output_dim], Init::Uniform(k))?;
        Ok(Self {
            kind,
            input_dim,
            output_dim,
            weights,
            bias,
        })
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundEncoder {
        BoundEncoder {
            w: tape.param(store, self.weights),
            b: tape.param(store, self.bias),
            kind: self.kind,
            output_dim: self.output_dim,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundEncoder {
    w: Var,
    b: Var,
    kind: EncoderKind,
    output_dim: usize,
}

impl BoundEncoder {
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn perceptron(&self, tape: &mut Tape, x: Var) -> Var {
        let z = tape.matvec(self.w, x);
        let z = tape.add(z, self.b);
        tape.tanh(z)
    }

    /// Encodes one raw frame. The normalizer is applied per dimension for
    /// the concatenated encoder and per axis (`x` on even, `y` on odd
    /// slots) for the per-player encoder, after player selection on raw
    /// coordinates.
    pub fn encode(
        &self,
        tape: &mut Tape,
        raw: &[f64],
        normalizer: &Normalizer,
    ) -> Result<Var, NeuralError> {
        match self.kind {
            EncoderKind::Concat => {
                let x = tape.constant(normalizer.apply(raw));
                Ok(self.perceptron(tape, x))
            }
            EncoderKind::PerPlayer { max_players } => {
                let players: Vec<(f64, f64)> = raw.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                let chosen = select_players_closeness(&players, max_players)?;
                let mut encoded = Vec::with_capacity(max_players);
                for &i in &chosen {
                    let slot = 2 * i;
                    let (x, y) = players[i];
                    let nx = (x - normalizer.offset[slot]) / normalizer.scale[slot];
                    let ny = (y - normalizer.offset[slot + 1]) / normalizer.scale[slot + 1];
                    let v = tape.constant(vec![nx, ny]);
                    encoded.push(self.perceptron(tape, v));
                }
                // absent players enter as zeroed inputs
                for _ in chosen.len()..max_players {
                    let v = tape.constant(vec![0.0, 0.0]);
                    encoded.push(self.perceptron(tape, v));
                }
                Ok(tape.max_pool(&encoded))
            }
        }
    }
}

/// Indices of the `n_p` players with the highest closeness centrality in
/// the complete graph weighted by Euclidean distance, returned in
/// ascending index order. Closeness is the reciprocal of the summed
/// distance to every other player; ties favor the lower index.
pub fn select_players_closeness(positions: &[(f64, f64)], n_p: usize) -> Result<Vec<usize>, NeuralError> {
    if n_p < 1 {
        return Err(NeuralError::Shape("player cap must be at least 1".into()));
    }
    if positions.is_empty() {
        return Err(NeuralError::EmptyFrame);
    }
    if positions.len() <= n_p {
        return Ok((0..positions.len()).collect());
    }
    let closeness: Vec<f64> = positions
        .iter()
        .map(|&(xi, yi)| {
            let total: f64 = positions
                .iter()
                .map(|&(xj, yj)| ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt())
                .sum();
            if total > 0.0 {
                1.0 / total
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| closeness[b].total_cmp(&closeness[a]).then(a.cmp(&b)));
    let mut chosen = order[..n_p].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Encodes a list of player coordinates with the shared per-player
/// perceptron and max pooling, padding with zeroed players up to the cap.
pub fn encode_frame(
    store: &ParamStore,
    encoder: &FrameEncoderParams,
    player_coordinates: &[(f64, f64)],
) -> Result<Vec<f64>, NeuralError> {
    let EncoderKind::PerPlayer { max_players } = encoder.kind else {
        return Err(NeuralError::Shape("encode_frame needs a per-player encoder".into()));
    };
    if player_coordinates.is_empty() {
        return Err(NeuralError::EmptyFrame);
    }
    let raw: Vec<f64> = player_coordinates.iter().flat_map(|&(x, y)| [x, y]).collect();
    let normalizer = Normalizer::identity(raw.len().max(2 * max_players));
    let mut tape = Tape::new();
    let bound = encoder.bind(&mut tape, store);
    let out = bound.encode(&mut tape, &raw, &normalizer)?;
    Ok(tape.value(out).to_vec())
}

/// The shared perceptron applied to a single player.
pub fn encode_player(store: &ParamStore, encoder: &FrameEncoderParams, player: (f64, f64)) -> Vec<f64> {
    let mut tape = Tape::new();
    let bound = encoder.bind(&mut tape, store);
    let x = tape.constant(vec![player.0, player.1]);
    let out = bound.perceptron(&mut tape, x);
    tape.value(out).to_vec()
}
