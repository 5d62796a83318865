use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The full model, its three ablations, and the two baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Both cross branches, SK attention, DNN.
    FiiNet,
    /// Both branches fed straight to the DNN, no SK layer.
    FiiNetSh,
    /// Third-order branch only.
    FiiNetS,
    /// Second-order branch only.
    FiiNetH,
    /// Logistic regression over one-hot fields.
    Lr,
    /// Factorization machine: linear part plus pairwise embedding inner products.
    Fm,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::FiiNet,
        Variant::FiiNetSh,
        Variant::FiiNetS,
        Variant::FiiNetH,
        Variant::Lr,
        Variant::Fm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FiiNet => "fiinet",
            Variant::FiiNetSh => "fiinet-sh",
            Variant::FiiNetS => "fiinet-s",
            Variant::FiiNetH => "fiinet-h",
            Variant::Lr => "lr",
            Variant::Fm => "fm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::FiiNet => "FiiNet",
            Variant::FiiNetSh => "FiiNet-SH",
            Variant::FiiNetS => "FiiNet-S",
            Variant::FiiNetH => "FiiNet-H",
            Variant::Lr => "LR",
            Variant::Fm => "FM",
        }
    }

    pub fn uses_second_order(self) -> bool {
        matches!(self, Variant::FiiNet | Variant::FiiNetSh | Variant::FiiNetH)
    }

    pub fn uses_third_order(self) -> bool {
        matches!(self, Variant::FiiNet | Variant::FiiNetSh | Variant::FiiNetS)
    }

    pub fn has_dnn(self) -> bool {
        !matches!(self, Variant::Lr | Variant::Fm)
    }

    pub fn has_sk(self) -> bool {
        self == Variant::FiiNet
    }

    pub fn has_embeddings(self) -> bool {
        self != Variant::Lr
    }

    pub fn min_fields(self) -> usize {
        match self {
            Variant::Lr => 1,
            Variant::Fm | Variant::FiiNetH => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Accepts the canonical names and the ablation shorthands `sh`, `s`, `h`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fiinet" => Ok(Variant::FiiNet),
            "fiinet-sh" | "sh" => Ok(Variant::FiiNetSh),
            "fiinet-s" | "s" => Ok(Variant::FiiNetS),
            "fiinet-h" | "h" => Ok(Variant::FiiNetH),
            "lr" => Ok(Variant::Lr),
            "fm" => Ok(Variant::Fm),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}
