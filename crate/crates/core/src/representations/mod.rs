//! Encoders mapping inputs to the representation the prediction head sees.

mod checkpoint;
mod encoder;
mod finetune;
mod pca;
mod schedule;
mod vae;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use encoder::{EncoderKind, EncoderModel, Standardizer};
pub use finetune::{
    finetune_loss, fit_td_ft, FineTuneConfig, FineTuneOutcome, PretrainedAutoencoder,
};
pub use pca::fit_pca;
pub use schedule::{interleave, upsample_balanced, BatchKind};
pub use vae::{
    elbo, fit_td_split, kl_standard_normal, ClassifierTerm, DecoderLikelihood, ElboOutput,
    SplitObjective, SplitVae, SplitVaeConfig,
};
