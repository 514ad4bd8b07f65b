//! Training loop and random hyperparameter search.

mod history;
mod run;
mod search;

pub use history::{EpochRecord, TrainHistory};
pub use run::{epoch_order, evaluate_loss, train_from, train_model, RunSpec, TrainOutcome};
pub use search::{random_search, Leaderboard, LeaderboardEntry, SearchOutcome, SearchSpace};
