//! Numerical consistency: the external score ledger, the rule-based event
//! oracle and a small trainable event predictor.

pub mod features;
pub mod ledger;
pub mod oracle;
pub mod predictor;

pub use features::{action_dim, featurize, feature_len, POOL};
pub use ledger::{decompose_digits, logic_calculate, LedgerUpdate, ScoreRecord, SCORE_MAX};
pub use oracle::oracle_event;
pub use predictor::{
    predict_event, train_event_predictor, EventPredictorModel, Mlp, Sample, TrainConfig,
};
