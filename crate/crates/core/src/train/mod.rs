//! Joint optimization of the graph learner and the message-passing stack.

mod adam;
mod fit;
mod loss;
mod model;

pub use adam::Adam;
pub use fit::{evaluate, evaluate_with, fit, fit_from, EpochRecord, FitResult, TrainConfig};
pub use loss::{
    accuracy, graph_loss, graph_loss_terms, prediction_loss, prediction_loss_grad, reward,
    LossBreakdown, RewardVector, ScoreGrads,
};
pub use model::{
    GraphContext, LearnerState, ModelGrads, ModelInit, ModelMode, ModelParams, RewardSource,
    StepOutput,
};
