use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::GradientVector;
use crate::quantize::{NormKind, TwoLevelQuantizer};
use crate::sparse::{sparse_decompress, SparseConfig};

use super::stats::{run_trials, SampleStats};

const CS_STREAM: u64 = 0x4353_4253;
const QUANT_STREAM: u64 = 0x5142_4953;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexBias {
    pub index: usize,
    pub mean_error: f64,
    pub se: f64,
    /// `mean_error / se`; zero when both vanish.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub name: String,
    pub trials: usize,
    pub k: f64,
    pub indices: Vec<IndexBias>,
}

impl BiasReport {
    /// Every index's mean error lies within `k` standard errors of zero.
    pub fn pass(&self) -> bool {
        self.indices.iter().all(|b| b.z.abs() <= self.k)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.indices.iter().map(|b| b.z.abs()).fold(0.0, f64::max)
    }

    fn from_errors(name: &str, indices: &[usize], errors: &[Vec<f64>], k: f64) -> Self {
        let per_index = indices
            .iter()
            .enumerate()
            .map(|(col, &index)| {
                let column: Vec<f64> = errors.iter().map(|row| row[col]).collect();
                let s = SampleStats::from_slice(&column);
                let z = if s.se_mean > 0.0 {
                    s.mean / s.se_mean
                } else if s.mean == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                IndexBias {
                    index,
                    mean_error: s.mean,
                    se: s.se_mean,
                    z,
                }
            })
            .collect();
        BiasReport {
            name: name.to_string(),
            trials: errors.len(),
            k,
            indices: per_index,
        }
    }
}

fn check_indices(indices: &[usize], dim: usize, trials: usize) -> Result<()> {
    if let Some(&index) = indices.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index, dim });
    }
    if trials < 2 {
        return Err(Error::Config("need at least 2 trials".into()));
    }
    Ok(())
}

/// Sparse-sketch estimate error `g_hat(i) - sparse(g)(i)` at `indices` over
/// fresh sketch seeds, for a fixed `g` and therefore a fixed mask.
pub fn cs_unbiasedness(
    g: &GradientVector,
    config: &SparseConfig,
    indices: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BiasReport> {
    check_indices(indices, g.dim(), trials)?;
    config.validate()?;
    let errors = run_trials(trials, seed, CS_STREAM, |s| -> Result<Vec<f64>> {
        let cfg = SparseConfig { seed: s, ..*config };
        let p = cfg.compress(g)?;
        let est = sparse_decompress(&p, 1)?;
        Ok(indices
            .iter()
            .map(|&i| {
                let truth = if p.mask().contains(i) {
                    g.as_slice()[i]
                } else {
                    0.0
                };
                est.as_slice()[i] - truth
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BiasReport::from_errors(
        "count-sketch estimate",
        indices,
        &errors,
        4.0,
    ))
}

/// Two-level quantizer error `q(g)(i) - g(i)` over fresh quantizer seeds.
pub fn quantizer_unbiasedness(
    g: &GradientVector,
    norm: NormKind,
    indices: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BiasReport> {
    check_indices(indices, g.dim(), trials)?;
    let errors = run_trials(trials, seed, QUANT_STREAM, |s| {
        let q = TwoLevelQuantizer {
            norm_kind: norm,
            seed: s,
        }
        .quantize(g);
        indices
            .iter()
            .map(|&i| q.quantized.as_slice()[i] - g.as_slice()[i])
            .collect::<Vec<f64>>()
    });
    let name = match norm {
        NormKind::L2 => "qsgd estimate",
        NormKind::LInf => "terngrad estimate",
    };
    Ok(BiasReport::from_errors(name, indices, &errors, 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizers_are_unbiased() {
        let g = GradientVector::new(vec![0.5, -1.0, 2.0, 0.0, 0.25]).unwrap();
        for norm in [NormKind::L2, NormKind::LInf] {
            let r = quantizer_unbiasedness(&g, norm, &[0, 1, 2, 3, 4], 20_000, 3).unwrap();
            assert!(r.pass(), "{r:?}");
            assert_eq!(r.indices[3].z, 0.0);
        }
    }

    #[test]
    fn sketch_is_unbiased_on_small_case() {
        let g =
            GradientVector::new((0..64).map(|i| ((i * 37) % 13) as f64 - 6.0).collect()).unwrap();
        let cfg = SparseConfig::new(8, 4, 0);
        let r = cs_unbiasedness(&g, &cfg, &[0, 9, 20, 63], 5000, 11).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn out_of_range_indices_fail() {
        let g = GradientVector::zeros(4);
        assert!(quantizer_unbiasedness(&g, NormKind::L2, &[4], 10, 0).is_err());
    }
}
