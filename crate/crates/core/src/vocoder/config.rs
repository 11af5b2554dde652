use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology of the gated dilated-convolution excitation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub n_blocks: usize,
    pub layers_per_block: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub condition_dim: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default = "default_levels")]
    pub quant_levels: usize,
}

fn default_kernel() -> usize {
    2
}

fn default_levels() -> usize {
    256
}

impl NetConfig {
    /// 2 blocks × 6 layers, 64 residual / 64 skip channels.
    pub fn desk(condition_dim: usize) -> Self {
        Self {
            n_blocks: 2,
            layers_per_block: 6,
            residual_channels: 64,
            skip_channels: 64,
            condition_dim,
            kernel_size: 2,
            quant_levels: 256,
        }
    }

    /// 3 blocks × 10 layers (dilations up to 512), 512 residual / 256 skip channels.
    pub fn full_scale(condition_dim: usize) -> Self {
        Self {
            n_blocks: 3,
            layers_per_block: 10,
            residual_channels: 512,
            skip_channels: 256,
            condition_dim,
            kernel_size: 2,
            quant_levels: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("n_blocks", self.n_blocks),
            ("layers_per_block", self.layers_per_block),
            ("residual_channels", self.residual_channels),
            ("skip_channels", self.skip_channels),
            ("condition_dim", self.condition_dim),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.layers_per_block > 20 {
            problems.push("layers_per_block above 20".into());
        }
        if self.kernel_size != 2 {
            problems.push(format!("kernel_size must be 2, got {}", self.kernel_size));
        }
        if self.quant_levels != 256 {
            problems.push(format!("quant_levels must be 256, got {}", self.quant_levels));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetConfig(problems.join("; ")))
        }
    }

    pub fn n_layers(&self) -> usize {
        self.n_blocks * self.layers_per_block
    }

    /// `1, 2, 4, …, 2^(layers_per_block-1)` repeated for every block.
    pub fn dilations(&self) -> Vec<usize> {
        (0..self.n_blocks)
            .flat_map(|_| (0..self.layers_per_block).map(|i| 1usize << i))
            .collect()
    }

    /// `1 + Σ dilation·(kernel - 1)` over all layers.
    pub fn receptive_field(&self) -> usize {
        1 + self
            .dilations()
            .iter()
            .map(|d| d * (self.kernel_size - 1))
            .sum::<usize>()
    }
}
