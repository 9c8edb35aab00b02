//! Diverse moment regression: encoder, multi-output decoder, set matching
//! and the regression/attention losses.

pub mod decoder;
pub mod encoder;
pub mod hungarian;
pub mod loss;

pub use decoder::{Decoder, DecoderCache, DecoderConfig, DecoderOutput, Prediction, PredictionSet, MIN_WIDTH};
pub use encoder::{positional_encoding, Encoded, Encoder, EncoderCache, EncoderConfig};
pub use hungarian::{hungarian_match, linear_assignment, match_cost, MatchAssignment};
pub use loss::{attention_loss, dmr_loss, DmrGrads, DmrLoss, MomentTerms};
