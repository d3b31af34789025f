//! Minimal neural toolkit: tensors, a reverse-mode tape, LSTM layers, Adam,
//! gradient checking and checkpoints. Everything is generic over [`Scalar`].
//!
//! [`Scalar`]: crate::Scalar

pub mod adam;
pub mod checkpoint;
pub mod embeddings;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod layers;
pub mod loss;
pub mod params;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use embeddings::load_word2vec;
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{softmax, Graph, NodeId};
pub use layers::{bilinear_score, bilstm_encode, dropout, lstm_run, lstm_step, BiLstm, BiLstmOutput, LstmWeights};
pub use loss::softmax_xent;
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use rng::Rng;
pub use tensor::Tensor;
