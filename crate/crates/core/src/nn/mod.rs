//! Dense networks with hand-derived backpropagation.

mod adam;
pub mod loss;
mod mlp;

pub use adam::Adam;
pub use mlp::{sigmoid, Activation, Dense, ForwardCache, Gradients, LayerDoc, Mlp, NetworkDoc, NETWORK_FORMAT_VERSION};
