//! Positive moment estimation: proposal scoring, semantic reconstruction
//! and pseudo-label extraction.

pub mod bleu;
pub mod estimate;
pub mod features;
pub mod generator;
pub mod head;

pub use bleu::bleu1;
pub use estimate::{
    augment_interval_features, estimate_positives, mean_interval_feature, pme_loss, semantic_scores,
    EstimateParams, PseudoLabelSet, SemanticReference, SemanticScores,
};
pub use features::ProposalPooling;
pub use generator::{Generator, GeneratorCache, GeneratorConfig};
pub use head::{assume_negative_bce, epr_loss, MatchCache, MatchHead, MatchScores, LOG_EPS};
