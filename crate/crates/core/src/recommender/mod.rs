//! Embedding-based winner recommender: a four-layer network trained with a
//! cosine max-margin ranking loss, averaged across nodes with FedAvg.

mod fedavg;
mod federated;
mod loss;
mod model;
mod rank;
mod train;

pub use fedavg::fedavg;
pub use federated::{train_federated, uniform_guess_baseline, FederatedConfig, FederatedRun};
pub use loss::{cosine_similarity, margin_loss, mean_margin_loss};
pub use model::{DenseLayer, Embedding, FeatureScaler, ModelConfig, ModelParams};
pub use rank::{accuracy, rank_nodes, reference_embedding, EvalSet};
pub use train::{
    plan_loss, plan_loss_and_gradient, plan_triplets, train_local, train_local_traced, TripletPlan,
};
