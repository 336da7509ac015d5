//! Mining subjectively interesting activation rules from the hidden layers
//! of graph convolutional networks, turning them into explanation masks and
//! describing them with subgraph and numerical subgroups.

pub mod background;
pub mod components;
pub mod error;
pub mod explain;
pub mod gcn;
pub mod graph;
pub mod miner;
pub mod subgroup;

pub use background::BackgroundModel;
pub use components::Components;
pub use error::{Error, Result};
pub use gcn::{ActivationMatrix, GcnModel, Inference, Mask, MaskMode, MaskPayload};
pub use graph::{EgoGraph, GraphDataset, LabeledGraph};
