//! Model assembly: linear part, cross branches, SK layer, DNN, sigmoid output.
//!
//! `ŷ = σ(w0 + Σ_i w[i, x_i] + y_d)` where the linear weights are one scalar
//! per (field, value) and `y_d` is the variant-specific deep term:
//!
//! | variant   | `y_d`                                                  |
//! |-----------|--------------------------------------------------------|
//! | FiiNet    | DNN over the SK-weighted cross map `V`                 |
//! | FiiNet-SH | DNN over both branches concatenated, no SK layer       |
//! | FiiNet-S  | DNN over third-order crosses only                      |
//! | FiiNet-H  | DNN over second-order crosses only                     |
//! | FM        | `Σ_{i<j} ⟨e_i, e_j⟩`                                   |
//! | LR        | 0                                                      |

mod loss;
mod model;
mod variant;

pub use loss::bce_loss;
pub use model::{Batch, ForwardNodes, Mode, Model, ModelConfig, DNN_HEAD, LINEAR_BIAS};
pub use variant::Variant;

use crate::engine::Real;
use crate::error::Result;
use crate::ingest::FieldSchema;

/// Builds and initializes a model of the given kind.
pub fn make_variant<T: Real>(
    kind: Variant,
    schema: &[FieldSchema],
    config: &ModelConfig,
    seed: u64,
) -> Result<Model<T>> {
    let config = ModelConfig {
        variant: kind,
        ..config.clone()
    };
    Model::new(config, schema, seed)
}
