//! Two-level stochastic projection quantizers (QSGD and TernGrad with two
//! buckets).
//!
//! Each entry maps to `sign(g_i) * zeta_i * ||g||_q` where
//! `zeta_i ~ Bernoulli(|g_i| / ||g||_q)`, so every output entry is one of
//! `-||g||_q`, `0`, `+||g||_q` and `E[g_hat] = g`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gradient::{dist_sq, GradientVector};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// QSGD scaling.
    L2,
    /// TernGrad scaling.
    LInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoLevelQuantizer {
    pub norm_kind: NormKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub quantized: GradientVector,
    /// `||g - g_hat||^2`
    pub objective: f64,
    pub bits: u64,
}

impl TwoLevelQuantizer {
    pub fn qsgd(seed: u64) -> Self {
        TwoLevelQuantizer {
            norm_kind: NormKind::L2,
            seed,
        }
    }

    pub fn terngrad(seed: u64) -> Self {
        TwoLevelQuantizer {
            norm_kind: NormKind::LInf,
            seed,
        }
    }

    pub fn scale(&self, g: &GradientVector) -> f64 {
        match self.norm_kind {
            NormKind::L2 => g.l2_norm(),
            NormKind::LInf => g.linf_norm(),
        }
    }

    /// One uniform draw per entry, in index order, from the quantizer seed.
    pub fn quantize(&self, g: &GradientVector) -> ProjectionResult {
        let scale = self.scale(g);
        let values = if scale == 0.0 {
            vec![0.0; g.dim()]
        } else {
            let mut rng = rng_from(self.seed);
            g.as_slice()
                .iter()
                .map(|&v| {
                    let p = v.abs() / scale;
                    let u: f64 = rng.random();
                    if u < p {
                        scale.copysign(v)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let quantized = GradientVector::new(values).expect("quantized entries are finite");
        let objective = dist_sq(g.as_slice(), quantized.as_slice()).expect("same dimension");
        ProjectionResult {
            quantized,
            objective,
            bits: two_level_bits(g.dim()),
        }
    }
}

pub fn two_level_quantize(g: &GradientVector, q: &TwoLevelQuantizer) -> ProjectionResult {
    q.quantize(g)
}

/// Dense 2-bit code per entry plus one 32-bit scale.
pub fn two_level_bits(dim: usize) -> u64 {
    2 * dim as u64 + 32
}

/// `||g - g_hat||_2^2`, the projection objective.
pub fn projection_objective(g: &GradientVector, g_hat: &GradientVector) -> Result<f64> {
    dist_sq(g.as_slice(), g_hat.as_slice())
}
