use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Armnet,
    Mambanet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Armnet, ModelKind::Mambanet];

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Armnet => "ARM-Net",
            ModelKind::Mambanet => "MambaNet",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Armnet => "armnet",
            ModelKind::Mambanet => "mambanet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "armnet" => Ok(ModelKind::Armnet),
            "mambanet" => Ok(ModelKind::Mambanet),
            other => Err(Error::Config(format!("unknown model {other:?} (expected armnet or mambanet)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// MambaNet body: conv + LSTM over the field sequence, or plain dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MambaVariant {
    CnnLstm,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Encoded column count; filled in from the schema when 0.
    pub input_dim: usize,
    /// ARM-Net residual width.
    pub hidden_dim: usize,
    /// MambaNet dense head widths.
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    /// ARM-Net residual blocks.
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_cross: usize,
    pub conv_layers: usize,
    pub conv_width: usize,
    pub lstm_hidden: usize,
    pub mamba_variant: MambaVariant,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            input_dim: 0,
            hidden_dim: 128,
            hidden_dims: vec![128, 64],
            output_dim: NUM_CLASSES,
            num_layers: 4,
            dropout_rate: 0.3,
            lr: 1e-3,
            weight_decay: 1e-4,
            epochs: 50,
            batch_size: 32,
            embed_dim: 16,
            num_heads: 4,
            num_cross: 8,
            conv_layers: 2,
            conv_width: 3,
            lstm_hidden: 64,
            mamba_variant: MambaVariant::CnnLstm,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("num_cross", self.num_cross),
            ("conv_layers", self.conv_layers),
            ("lstm_hidden", self.lstm_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Param(format!("{name} must be positive")));
            }
        }
        if self.output_dim != NUM_CLASSES {
            return Err(Error::Param(format!("output_dim must be {NUM_CLASSES}")));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Param("hidden_dims must be non-empty and positive".into()));
        }
        if self.conv_width % 2 == 0 {
            return Err(Error::Param("conv_width must be odd".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Param(format!("dropout_rate {} not in [0, 1)", self.dropout_rate)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() || !(self.weight_decay >= 0.0) {
            return Err(Error::Param("lr must be positive and weight_decay nonnegative".into()));
        }
        Ok(())
    }
}
