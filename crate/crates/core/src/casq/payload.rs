use crate::cluster::ClusterAssignment;
use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;
use crate::hash::{HashMapping, HashingMode};
use crate::merge::{FlatBuffer, Mergeable};
use crate::sketch::AveragedSketch;

use super::window::{window_mapping, CasWindow};

/// Cluster assignment as sent by one worker or accumulated over many.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignmentCode {
    /// One label per entry.
    Labels(Vec<u32>),
    /// `N x K` row-major vote counts: `votes[j*K + k]` workers put entry `j`
    /// in cluster `k`.
    Votes(Vec<u32>),
}

impl AssignmentCode {
    fn votes(&self, num_clusters: usize) -> Vec<u32> {
        match self {
            AssignmentCode::Votes(v) => v.clone(),
            AssignmentCode::Labels(labels) => {
                let mut v = vec![0u32; labels.len() * num_clusters];
                for (j, &l) in labels.iter().enumerate() {
                    v[j * num_clusters + l as usize] = 1;
                }
                v
            }
        }
    }
}

/// Per-cluster bucket means plus the assignment that routes entries back to
/// them. `bucket_sums` holds `Σ_i S^i` over the `workers` payloads merged
/// in; the averaged sketch `S` is that divided by `workers`.
#[derive(Debug, Clone, PartialEq)]
pub struct CasPayload {
    pub(crate) window_id: u64,
    pub(crate) dim: usize,
    pub(crate) global_seed: u64,
    pub(crate) hashing: HashingMode,
    pub(crate) bucket_counts: Vec<u32>,
    pub(crate) bucket_sums: Vec<Vec<f64>>,
    pub(crate) assignment: AssignmentCode,
    pub(crate) workers: u64,
}

impl CasPayload {
    pub fn window_id(&self) -> u64 {
        self.window_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_clusters(&self) -> usize {
        self.bucket_counts.len()
    }

    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn hashing(&self) -> HashingMode {
        self.hashing
    }

    /// `m_k` for every cluster.
    pub fn bucket_counts(&self) -> &[u32] {
        &self.bucket_counts
    }

    pub fn total_buckets(&self) -> usize {
        self.bucket_counts.iter().map(|&m| m as usize).sum()
    }

    pub fn bucket_sums(&self) -> &[Vec<f64>] {
        &self.bucket_sums
    }

    /// `S[k] = (1/W) Σ_i S^i[k]`.
    pub fn averaged(&self, cluster: usize) -> Vec<f64> {
        let w = self.workers as f64;
        self.bucket_sums[cluster].iter().map(|s| s / w).collect()
    }

    pub fn assignment(&self) -> &AssignmentCode {
        &self.assignment
    }

    pub fn workers(&self) -> u64 {
        self.workers
    }

    /// Vote matrix `C` in row-major `N x K` form; one-hot for a single worker.
    pub fn votes(&self) -> Vec<u32> {
        self.assignment.votes(self.num_clusters())
    }

    pub(crate) fn mappings(&self) -> Result<Vec<Option<HashMapping>>> {
        self.bucket_counts
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                window_mapping(
                    self.global_seed,
                    self.window_id,
                    k,
                    m as usize,
                    self.hashing,
                )
            })
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.num_clusters();
        if k == 0 || self.dim == 0 {
            return Err(Error::Empty);
        }
        if self.workers == 0 {
            return Err(Error::Decode("worker count is zero".into()));
        }
        ensure_dim(k, self.bucket_sums.len())?;
        for (sums, &m) in self.bucket_sums.iter().zip(&self.bucket_counts) {
            ensure_dim(m as usize, sums.len())?;
        }
        match &self.assignment {
            AssignmentCode::Labels(labels) => {
                ensure_dim(self.dim, labels.len())?;
                if let Some(&l) = labels.iter().find(|&&l| l as usize >= k) {
                    return Err(Error::Decode(format!(
                        "label {l} out of range for {k} clusters"
                    )));
                }
            }
            AssignmentCode::Votes(votes) => ensure_dim(self.dim * k, votes.len())?,
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.window_id != other.window_id {
            return Err(Error::incompatible(
                "window_id",
                self.window_id,
                other.window_id,
            ));
        }
        if self.dim != other.dim {
            return Err(Error::incompatible("dim", self.dim, other.dim));
        }
        if self.bucket_counts != other.bucket_counts {
            return Err(Error::incompatible(
                "bucket_counts",
                format!("{:?}", self.bucket_counts),
                format!("{:?}", other.bucket_counts),
            ));
        }
        if self.global_seed != other.global_seed {
            return Err(Error::incompatible(
                "seed",
                self.global_seed,
                other.global_seed,
            ));
        }
        if self.hashing != other.hashing {
            return Err(Error::incompatible(
                "hashing",
                format!("{:?}", self.hashing),
                format!("{:?}", other.hashing),
            ));
        }
        Ok(())
    }
}

/// Insert each cluster's entries of `g` into that cluster's averaged sketch
/// and keep the bucket means. Clusters without entries send zeros.
pub fn cas_compress(
    g: &GradientVector,
    window: &CasWindow,
    assignment: &ClusterAssignment,
) -> Result<CasPayload> {
    ensure_dim(g.dim(), assignment.dim())?;
    let k = window.num_clusters();
    ensure_dim(k, assignment.num_clusters())?;
    let mut subsets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (j, (&label, &v)) in assignment.labels().iter().zip(g.as_slice()).enumerate() {
        subsets[label as usize].push((j, v));
    }
    let mut bucket_sums = Vec::with_capacity(k);
    for (cluster, subset) in subsets.iter().enumerate() {
        match window.mapping(cluster) {
            Some(mapping) => {
                let mut sketch = AveragedSketch::new(g.dim(), *mapping)?;
                sketch.insert(subset)?;
                bucket_sums.push(sketch.means());
            }
            None if subset.is_empty() => bucket_sums.push(Vec::new()),
            None => {
                return Err(Error::Config(format!(
                    "cluster {cluster} has {} entries but no buckets",
                    subset.len()
                )))
            }
        }
    }
    Ok(CasPayload {
        window_id: window.id(),
        dim: g.dim(),
        global_seed: window.global_seed(),
        hashing: window.hashing(),
        bucket_counts: window
            .allocation()
            .per_cluster()
            .iter()
            .map(|&m| m as u32)
            .collect(),
        bucket_sums,
        assignment: AssignmentCode::Labels(assignment.labels().to_vec()),
        workers: 1,
    })
}

impl Mergeable for CasPayload {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (acc, add) in self.bucket_sums.iter_mut().zip(&other.bucket_sums) {
            for (a, b) in acc.iter_mut().zip(add) {
                *a += b;
            }
        }
        let k = self.num_clusters();
        let mut votes = self.assignment.votes(k);
        for (a, b) in votes.iter_mut().zip(other.assignment.votes(k)) {
            *a += b;
        }
        self.assignment = AssignmentCode::Votes(votes);
        self.workers += other.workers;
        Ok(())
    }
}

impl FlatBuffer for CasPayload {
    /// `Σ S^i` for every cluster, then the vote matrix, then the worker count.
    fn to_flat(&self) -> Vec<f64> {
        let mut flat: Vec<f64> = self.bucket_sums.iter().flatten().copied().collect();
        flat.extend(self.votes().into_iter().map(f64::from));
        flat.push(self.workers as f64);
        flat
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let m = self.total_buckets();
        let nk = self.dim * self.num_clusters();
        ensure_dim(m + nk + 1, flat.len())?;
        let mut offset = 0;
        let bucket_sums = self
            .bucket_counts
            .iter()
            .map(|&mk| {
                let s = flat[offset..offset + mk as usize].to_vec();
                offset += mk as usize;
                s
            })
            .collect();
        let votes = flat[m..m + nk].iter().map(|&v| v as u32).collect();
        Ok(CasPayload {
            bucket_sums,
            assignment: AssignmentCode::Votes(votes),
            workers: flat[m + nk] as u64,
            ..self.clone()
        })
    }
}

/// Combine payloads from one window: `S = (1/W) Σ S^i`, `C = Σ C^i`.
pub fn cas_merge(payloads: &[CasPayload]) -> Result<CasPayload> {
    CasPayload::merge_all(payloads)
}

/// `g_hat(j) = (1/W) Σ_k C[j,k] S[k][h_k(j)]`.
pub fn cas_decompress(payload: &CasPayload) -> Result<GradientVector> {
    payload.validate()?;
    let mappings = payload.mappings()?;
    let k = payload.num_clusters();
    let w = payload.workers as f64;
    let averaged: Vec<Vec<f64>> = (0..k).map(|c| payload.averaged(c)).collect();
    let lookup = |j: usize, c: usize| -> f64 {
        mappings[c]
            .as_ref()
            .map_or(0.0, |mapping| averaged[c][mapping.bucket(j)])
    };
    let values = match &payload.assignment {
        AssignmentCode::Labels(labels) if payload.workers == 1 => labels
            .iter()
            .enumerate()
            .map(|(j, &l)| lookup(j, l as usize))
            .collect(),
        code => {
            let votes = code.votes(k);
            (0..payload.dim)
                .map(|j| {
                    let row = &votes[j * k..(j + 1) * k];
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v > 0)
                        .map(|(c, &v)| f64::from(v) * lookup(j, c))
                        .sum::<f64>()
                        / w
                })
                .collect()
        }
    };
    GradientVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casq::window::CasConfig;
    use crate::cluster::{BucketAllocation, ClusterModel};
    use rand::{Rng, SeedableRng};

    fn two_cluster_window(m: Vec<usize>, seed: u64) -> CasWindow {
        let model = ClusterModel::new(vec![-1.0, 1.0], 64).unwrap();
        CasWindow::from_parts(
            3,
            model,
            BucketAllocation::new(m),
            seed,
            HashingMode::Random,
        )
        .unwrap()
    }

    fn gv(v: Vec<f64>) -> GradientVector {
        GradientVector::new(v).unwrap()
    }

    #[test]
    fn lossless_config_round_trips_exactly() {
        let g = gv((0..50).map(|i| (i as f64 * 0.37).sin()).collect());
        let window = CasWindow::build(&CasConfig::lossless(50), 0, &g).unwrap();
        let p = cas_compress(&g, &window, &window.assign(&g)).unwrap();
        assert_eq!(cas_decompress(&p).unwrap(), g);
    }

    #[test]
    fn bucket_means_match_materialized_matrix() {
        let g = gv(vec![-0.5, 0.8, -1.5, 1.2, 0.9, -0.7]);
        let window = two_cluster_window(vec![2, 2], 11);
        let assignment = window.assign(&g);
        let p = cas_compress(&g, &window, &assignment).unwrap();
        for k in 0..2 {
            let map = window.mapping(k).unwrap();
            // A_k[j][b] = 1 if entry j belongs to k and hashes to b
            let mut ata = [0.0f64; 2];
            let mut atg = [0.0f64; 2];
            for j in 0..6 {
                if assignment.labels()[j] as usize == k {
                    ata[map.bucket(j)] += 1.0;
                    atg[map.bucket(j)] += g.as_slice()[j];
                }
            }
            for b in 0..2 {
                let expected = if ata[b] > 0.0 { atg[b] / ata[b] } else { 0.0 };
                assert!((p.bucket_sums()[k][b] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_cluster_decodes_exactly() {
        let g = gv(vec![2.0, -3.0, 2.0, 2.0, -3.0, 2.0, 2.0]);
        let window = two_cluster_window(vec![1, 3], 5);
        let p = cas_compress(&g, &window, &window.assign(&g)).unwrap();
        assert_eq!(cas_decompress(&p).unwrap(), g);
    }

    #[test]
    fn merge_averages_sums_and_counts_votes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let window = two_cluster_window(vec![3, 4], 1);
        let gs: Vec<GradientVector> = (0..3)
            .map(|_| gv((0..20).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect();
        let ps: Vec<CasPayload> = gs
            .iter()
            .map(|g| cas_compress(g, &window, &window.assign(g)).unwrap())
            .collect();
        let merged = cas_merge(&ps).unwrap();
        assert_eq!(merged.workers(), 3);
        for k in 0..2 {
            let avg = merged.averaged(k);
            for b in 0..avg.len() {
                let naive = ps.iter().map(|p| p.bucket_sums()[k][b]).sum::<f64>() / 3.0;
                assert!((avg[b] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
            }
        }
        let votes = merged.votes();
        for j in 0..20 {
            assert_eq!(votes[j * 2] + votes[j * 2 + 1], 3);
        }
    }

    #[test]
    fn single_payload_merge_is_identity() {
        let g = gv(vec![1.0, -1.0, 0.5]);
        let window = two_cluster_window(vec![1, 1], 2);
        let p = cas_compress(&g, &window, &window.assign(&g)).unwrap();
        assert_eq!(cas_merge(std::slice::from_ref(&p)).unwrap(), p);
    }

    #[test]
    fn identical_payloads_keep_average_and_double_votes() {
        let g = gv(vec![1.0, -1.0, 0.5, -0.25]);
        let window = two_cluster_window(vec![1, 2], 2);
        let p = cas_compress(&g, &window, &window.assign(&g)).unwrap();
        let merged = cas_merge(&[p.clone(), p.clone()]).unwrap();
        for k in 0..2 {
            assert_eq!(merged.averaged(k), p.bucket_sums()[k]);
        }
        assert!(p
            .votes()
            .iter()
            .zip(merged.votes())
            .all(|(a, b)| 2 * a == b));
        assert_eq!(
            cas_decompress(&merged).unwrap(),
            cas_decompress(&p).unwrap()
        );
    }

    #[test]
    fn disagreeing_votes_average_both_clusters() {
        let window = two_cluster_window(vec![2, 2], 4);
        let g1 = gv(vec![-0.1, 1.0, 2.0]);
        let g2 = gv(vec![0.1, 3.0, 4.0]);
        let p1 = cas_compress(&g1, &window, &window.assign(&g1)).unwrap();
        let p2 = cas_compress(&g2, &window, &window.assign(&g2)).unwrap();
        let merged = cas_merge(&[p1, p2]).unwrap();
        let got = cas_decompress(&merged).unwrap();
        let s0 = merged.averaged(0);
        let s1 = merged.averaged(1);
        let expected = (s0[window.mapping(0).unwrap().bucket(0)]
            + s1[window.mapping(1).unwrap().bucket(0)])
            / 2.0;
        assert!((got.as_slice()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn flat_round_trip_preserves_payload() {
        let g = gv(vec![0.3, -0.2, 0.9, -1.1, 0.05]);
        let window = two_cluster_window(vec![2, 1], 8);
        let p = cas_compress(&g, &window, &window.assign(&g)).unwrap();
        let merged = cas_merge(&[p.clone(), p.clone()]).unwrap();
        assert_eq!(merged.with_flat(&merged.to_flat()).unwrap(), merged);
    }

    #[test]
    fn incompatible_windows_are_rejected() {
        let g = gv(vec![0.3, -0.2]);
        let a = two_cluster_window(vec![1, 1], 8);
        let b = two_cluster_window(vec![1, 1], 9);
        let mut pa = cas_compress(&g, &a, &a.assign(&g)).unwrap();
        let pb = cas_compress(&g, &b, &b.assign(&g)).unwrap();
        assert!(matches!(
            pa.merge_from(&pb),
            Err(Error::Incompatible { field: "seed", .. })
        ));
    }
}
