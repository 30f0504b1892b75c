//! Reverse-mode autodiff, LSTM cells, frame encoders and the two-level
//! recurrent backbone.

mod encoder;
mod gradcheck;
mod hier;
mod lstm;
mod params;
mod tape;

pub use encoder::{
    encode_frame, encode_player, select_players_closeness, BoundEncoder, EncoderKind, FrameEncoderParams,
    Normalizer,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use hier::{hier_forward, BackboneConfig, BackboneTrace, BoundBackbone, HierarchicalRnn, HierarchicalState};
pub use lstm::{lstm_step, BoundLstm, LstmCellParams};
pub use params::{Grads, Init, Param, ParamCheckpoint, ParamId, ParamStore, TensorEntry, PARAMS_FORMAT, PARAMS_VERSION};
pub use tape::{Adjoints, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("parameter {0} registered twice")]
    DuplicateParam(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("frame has no players")]
    EmptyFrame,
    #[error("invalid event indices: {0}")]
    EventIndices(String),
}
