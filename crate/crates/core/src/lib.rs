//! Conformal-prediction ensembles of naive Bayes classifiers with abstention.
//!
//! Each ensemble member is a conformal predictor trained on a random patch of
//! the data (a bootstrap sample of examples and a random feature subset).
//! Only members whose credibility clears a threshold vote; an example with no
//! such member is reported as unpredictable.

pub mod conformal;
pub mod data;
pub mod ensemble;
mod error;
pub mod evaluation;
pub mod naive_bayes;
mod rng;
mod text_format;

pub use conformal::{ConformalPredictor, ForcedPrediction, PValues};
pub use data::{Dataset, Example, FeatureKind, FeatureSpec, Label, Schema, Value};
pub use ensemble::{
    BaseMode, ConformalEnsemble, EnsembleConfig, EnsembleVerdict, EstimatorVote, Outcome, Patch, Sampling,
};
pub use error::{Error, Result};
pub use evaluation::{CvPlan, GridResult, GridSpec, MetricsReport};
pub use naive_bayes::{NaiveBayesModel, NbParams, Posterior};
