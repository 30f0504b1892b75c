use serde::{Deserialize, Serialize};

use super::{
    BoundEncoder, BoundLstm, EncoderKind, FrameEncoderParams, LstmCellParams, NeuralError, Normalizer, ParamStore, Tape,
    Var,
};

/// Sizes of the frame encoder and the two LSTM levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub encoder: EncoderKind,
    /// Length of a raw frame feature vector.
    pub frame_dim: usize,
    pub encoder_dim: usize,
    pub lower_hidden: usize,
    pub upper_hidden: usize,
}

impl BackboneConfig {
    pub fn new(frame_dim: usize) -> Self {
        Self {
            encoder: EncoderKind::Concat,
            frame_dim,
            encoder_dim: 32,
            lower_hidden: 32,
            upper_hidden: 32,
        }
    }
}

/// Frame encoder, a lower LSTM over every frame and an upper LSTM that
/// steps once per event on the lower hidden state at the event frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalRnn {
    pub config: BackboneConfig,
    pub encoder: FrameEncoderParams,
    pub lower: LstmCellParams,
    pub upper: LstmCellParams,
}

impl HierarchicalRnn {
    pub fn register(store: &mut ParamStore, config: BackboneConfig) -> Result<Self, NeuralError> {
        if config.frame_dim == 0 || config.encoder_dim == 0 || config.lower_hidden == 0 || config.upper_hidden == 0 {
            return Err(NeuralError::Shape(format!("backbone sizes must be positive: {config:?}")));
        }
        let encoder = FrameEncoderParams::register(store, "encoder", config.encoder, config.frame_dim, config.encoder_dim)?;
        let lower = LstmCellParams::register(store, "lower", config.encoder_dim, config.lower_hidden)?;
        let upper = LstmCellParams::register(store, "upper", config.lower_hidden, config.upper_hidden)?;
        Ok(Self {
            config,
            encoder,
            lower,
            upper,
        })
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundBackbone {
        BoundBackbone {
            encoder: self.encoder.bind(tape, store),
            lower: self.lower.bind(tape, store),
            upper: self.upper.bind(tape, store),
            lower_hidden: self.config.lower_hidden,
            upper_hidden: self.config.upper_hidden,
            frame_dim: self.config.frame_dim,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundBackbone {
    encoder: BoundEncoder,
    lower: BoundLstm,
    upper: BoundLstm,
    lower_hidden: usize,
    upper_hidden: usize,
    frame_dim: usize,
}

/// Tape nodes produced by one backbone pass.
#[derive(Debug, Clone)]
pub struct BackboneTrace {
    pub lower: Vec<(Var, Var)>,
    pub upper: Vec<(Var, Var)>,
}

pub(crate) fn check_events(n_frames: usize, events: &[usize]) -> Result<(), NeuralError> {
    if let Some(w) = events.windows(2).find(|w| w[0] >= w[1]) {
        return Err(NeuralError::EventIndices(format!("{} then {} is not increasing", w[0], w[1])));
    }
    if let Some(&last) = events.last() {
        if last >= n_frames {
            return Err(NeuralError::EventIndices(format!("index {last} with {n_frames} frames")));
        }
    }
    Ok(())
}

impl BoundBackbone {
    /// Runs the lower LSTM over frames `0..=last event frame` and returns
    /// the states of both levels. Frames after the last event are never
    /// read.
    pub fn trace(
        &self,
        tape: &mut Tape,
        frames: &[Vec<f64>],
        events: &[usize],
        normalizer: &Normalizer,
    ) -> Result<BackboneTrace, NeuralError> {
        check_events(frames.len(), events)?;
        let mut trace = BackboneTrace {
            lower: Vec::new(),
            upper: Vec::with_capacity(events.len()),
        };
        let Some(&last) = events.last() else {
            return Ok(trace);
        };
        let mut lh = tape.constant(vec![0.0; self.lower_hidden]);
        let mut lc = tape.constant(vec![0.0; self.lower_hidden]);
        let mut uh = tape.constant(vec![0.0; self.upper_hidden]);
        let mut uc = tape.constant(vec![0.0; self.upper_hidden]);
        let mut next_event = 0;
        for (i, frame) in frames.iter().enumerate().take(last + 1) {
            if frame.len() != self.frame_dim {
                return Err(NeuralError::Shape(format!(
                    "frame {i} has {} features, expected {}",
                    frame.len(),
                    self.frame_dim
                )));
            }
            let x = self.encoder.encode(tape, frame, normalizer)?;
            (lh, lc) = self.lower.step(tape, x, lh, lc);
            trace.lower.push((lh, lc));
            if events[next_event] == i {
                (uh, uc) = self.upper.step(tape, lh, uh, uc);
                trace.upper.push((uh, uc));
                next_event += 1;
            }
        }
        Ok(trace)
    }

    /// Upper hidden states `h_j`, one per event.
    pub fn forward(
        &self,
        tape: &mut Tape,
        frames: &[Vec<f64>],
        events: &[usize],
        normalizer: &Normalizer,
    ) -> Result<Vec<Var>, NeuralError> {
        Ok(self.trace(tape, frames, events, normalizer)?.upper.into_iter().map(|(h, _)| h).collect())
    }
}

/// Plain-value states of a backbone pass.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalState {
    pub lower_hidden: Vec<Vec<f64>>,
    pub lower_cell: Vec<Vec<f64>>,
    pub upper_hidden: Vec<Vec<f64>>,
    pub upper_cell: Vec<Vec<f64>>,
    pub event_frame_indices: Vec<usize>,
}

/// Value-level forward pass; `upper_hidden[j]` is `h_j`.
pub fn hier_forward(
    store: &ParamStore,
    rnn: &HierarchicalRnn,
    frames: &[Vec<f64>],
    event_frame_indices: &[usize],
    normalizer: &Normalizer,
) -> Result<HierarchicalState, NeuralError> {
    let mut tape = Tape::new();
    let bound = rnn.bind(&mut tape, store);
    let trace = bound.trace(&mut tape, frames, event_frame_indices, normalizer)?;
    let unzip = |states: &[(Var, Var)]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        states
            .iter()
            .map(|&(h, c)| (tape.value(h).to_vec(), tape.value(c).to_vec()))
            .unzip()
    };
    let (lower_hidden, lower_cell) = unzip(&trace.lower);
    let (upper_hidden, upper_cell) = unzip(&trace.upper);
    Ok(HierarchicalState {
        lower_hidden,
        lower_cell,
        upper_hidden,
        upper_cell,
        event_frame_indices: event_frame_indices.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, Grads};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(kind: EncoderKind) -> (ParamStore, HierarchicalRnn, Vec<Vec<f64>>) {
        let mut store = ParamStore::new(17);
        let cfg = BackboneConfig {
            encoder: kind,
            frame_dim: 6,
            encoder_dim: 5,
            lower_hidden: 4,
            upper_hidden: 3,
        };
        let rnn = HierarchicalRnn::register(&mut store, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frames = (0..12)
            .map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        (store, rnn, frames)
    }

    fn run(store: &ParamStore, rnn: &HierarchicalRnn, frames: &[Vec<f64>], ev: &[usize]) -> HierarchicalState {
        hier_forward(store, rnn, frames, ev, &Normalizer::identity(6)).unwrap()
    }

    #[test]
    fn one_upper_state_per_event() {
        let (store, rnn, frames) = setup(EncoderKind::Concat);
        assert_eq!(run(&store, &rnn, &frames, &[1, 4, 9]).upper_hidden.len(), 3);
        let all: Vec<usize> = (0..frames.len()).collect();
        let s = run(&store, &rnn, &frames, &all);
        assert_eq!(s.upper_hidden.len(), frames.len());
        assert!(run(&store, &rnn, &frames, &[]).upper_hidden.is_empty());
    }

    #[test]
    fn bad_indices_rejected() {
        let (store, rnn, frames) = setup(EncoderKind::Concat);
        let n = Normalizer::identity(6);
        assert!(hier_forward(&store, &rnn, &frames, &[3, 3], &n).is_err());
        assert!(hier_forward(&store, &rnn, &frames, &[5, 2], &n).is_err());
        assert!(hier_forward(&store, &rnn, &frames, &[12], &n).is_err());
    }

    #[test]
    fn causal_in_frames() {
        for kind in [EncoderKind::Concat, EncoderKind::PerPlayer { max_players: 3 }] {
            let (store, rnn, frames) = setup(kind);
            let ev = [2, 5, 8, 10];
            let base = run(&store, &rnn, &frames, &ev);
            for k in 0..frames.len() {
                let mut pert = frames.clone();
                pert[k][1] += 0.1;
                let s = run(&store, &rnn, &pert, &ev);
                for (j, &fj) in ev.iter().enumerate() {
                    if k > fj {
                        assert_eq!(s.upper_hidden[j], base.upper_hidden[j], "h_{j} moved for frame {k}");
                    } else {
                        let d: f64 = s.upper_hidden[j]
                            .iter()
                            .zip(&base.upper_hidden[j])
                            .map(|(a, b)| (a - b).abs())
                            .sum();
                        assert!(d > 0.0, "h_{j} ignored frame {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let (store, rnn, frames) = setup(EncoderKind::Concat);
        let a = run(&store, &rnn, &frames, &[0, 3, 7]);
        let (store2, rnn2, frames2) = setup(EncoderKind::Concat);
        assert_eq!(a, run(&store2, &rnn2, &frames2, &[0, 3, 7]));
    }

    #[test]
    fn backbone_gradients() {
        let (store, rnn, frames) = setup(EncoderKind::PerPlayer { max_players: 3 });
        let loss = |s: &ParamStore| -> (f64, Grads) {
            let mut tape = Tape::new();
            let b = rnn.bind(&mut tape, s);
            let hs = b.forward(&mut tape, &frames, &[1, 6, 11], &Normalizer::identity(6)).unwrap();
            let parts: Vec<Var> = hs.iter().map(|&h| tape.sum(h)).collect();
            let all = tape.concat(&parts);
            let sq = tape.mul(all, all);
            let r = tape.sum(sq);
            let adj = tape.backward(r);
            (tape.scalar_value(r), tape.param_grads(&adj, s))
        };
        let r = grad_check(&store, loss, 1e-5, None);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
