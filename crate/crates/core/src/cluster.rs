//! Sampled 1-D clustering of gradient values and per-cluster bucket budgets.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const DEFAULT_SAMPLE_CAP: usize = 4096;
pub const DEFAULT_REFRESH_INTERVAL: usize = 64;
pub const ENTROPY_BINS: usize = 32;

/// Number of clusters for a `bits`-bit assignment code.
pub fn clusters_for_bits(bits: u32) -> usize {
    1usize << bits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Sorted ascending, at least one.
    centers: Vec<f64>,
    refresh_interval: usize,
}

impl ClusterModel {
    pub fn new(mut centers: Vec<f64>, refresh_interval: usize) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config(
                "cluster model needs at least one center".into(),
            ));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("cluster centers must be finite".into()));
        }
        centers.sort_by(f64::total_cmp);
        Ok(ClusterModel {
            centers,
            refresh_interval: refresh_interval.max(1),
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn num_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn refresh_interval(&self) -> usize {
        self.refresh_interval
    }

    /// Whether iteration `t` starts a new clustering window.
    pub fn is_refresh_step(&self, t: usize) -> bool {
        t % self.refresh_interval == 0
    }

    /// Keep only the centers whose flag is set.
    pub fn retain(&self, keep: &[bool]) -> Result<ClusterModel> {
        let centers = self
            .centers
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(&c, _)| c)
            .collect();
        ClusterModel::new(centers, self.refresh_interval)
    }
}

/// Uniform sample without replacement of `min(len, max_samples)` values.
pub fn sample_for_clustering(values: &[f64], max_samples: usize, seed: u64) -> Vec<f64> {
    if values.len() <= max_samples {
        return values.to_vec();
    }
    let mut rng = rng_from(seed);
    sample(&mut rng, values.len(), max_samples)
        .into_iter()
        .map(|i| values[i])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iters: 50,
            tol: 1e-9,
        }
    }
}

/// Lloyd iterations on scalars with k-means++ seeding. Returns fewer than
/// `k` centers when the sample has fewer than `k` distinct values.
pub fn kmeans_1d(
    sample: &[f64],
    k: usize,
    config: KMeansConfig,
    refresh_interval: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if sample.is_empty() {
        return Err(Error::Config("k-means needs a non-empty sample".into()));
    }
    let mut distinct = sample.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= k && k > 1 {
        return ClusterModel::new(distinct, refresh_interval);
    }

    let mut rng = rng_from(seed);
    let mut centers = Vec::with_capacity(k);
    centers.push(sample[rng.random_range(0..sample.len())]);
    let mut d2: Vec<f64> = sample.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total == 0.0 {
            sample[rng.random_range(0..sample.len())]
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = sample.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            sample[pick]
        };
        centers.push(next);
        for (d, &x) in d2.iter_mut().zip(sample) {
            *d = d.min((x - next).powi(2));
        }
    }

    for _ in 0..config.max_iters {
        centers.sort_by(f64::total_cmp);
        let mut sums = vec![0.0; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for &x in sample {
            let c = nearest(&centers, x);
            sums[c] += x;
            counts[c] += 1;
        }
        let mut shift = 0.0_f64;
        for c in 0..centers.len() {
            if counts[c] > 0 {
                let updated = sums[c] / counts[c] as f64;
                shift = shift.max((updated - centers[c]).abs());
                centers[c] = updated;
            }
        }
        if shift < config.tol {
            break;
        }
    }
    centers.sort_by(f64::total_cmp);
    centers.dedup();
    ClusterModel::new(centers, refresh_interval)
}

/// Index of the center nearest `x` among sorted `centers`; ties go to the
/// smaller index.
fn nearest(centers: &[f64], x: f64) -> usize {
    let p = centers.partition_point(|&c| c < x);
    if p == 0 {
        0
    } else if p == centers.len() {
        centers.len() - 1
    } else if x - centers[p - 1] <= centers[p] - x {
        p - 1
    } else {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub size: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Natural-log entropy of a 32-bin equal-width histogram over the
    /// cluster's value range.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<u32>,
    num_clusters: usize,
    stats: Option<Vec<ClusterStats>>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<u32>, num_clusters: usize) -> Result<Self> {
        if num_clusters == 0 {
            return Err(Error::Config(
                "assignment needs at least one cluster".into(),
            ));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_clusters) {
            return Err(Error::Config(format!(
                "label {l} out of range for {num_clusters} clusters"
            )));
        }
        Ok(ClusterAssignment {
            labels,
            num_clusters,
            stats: None,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Filled in by [`ClusterAssignment::with_stats`].
    pub fn stats(&self) -> Option<&[ClusterStats]> {
        self.stats.as_deref()
    }

    pub fn with_stats(mut self, values: &[f64]) -> Result<Self> {
        self.stats = Some(cluster_stats(values, &self)?);
        Ok(self)
    }
}

/// Nearest center with the same sign as the value; values without a
/// same-signed center, and zeros, fall back to the globally nearest center.
pub fn assign_clusters(values: &[f64], model: &ClusterModel) -> ClusterAssignment {
    let centers = model.centers();
    let neg_end = centers.partition_point(|&c| c < 0.0);
    let pos_start = centers.partition_point(|&c| c <= 0.0);
    let labels = values
        .iter()
        .map(|&x| {
            let (lo, hi) = if x > 0.0 && pos_start < centers.len() {
                (pos_start, centers.len())
            } else if x < 0.0 && neg_end > 0 {
                (0, neg_end)
            } else {
                (0, centers.len())
            };
            (lo + nearest(&centers[lo..hi], x)) as u32
        })
        .collect();
    ClusterAssignment {
        labels,
        num_clusters: centers.len(),
        stats: None,
    }
}

pub fn cluster_stats(values: &[f64], assignment: &ClusterAssignment) -> Result<Vec<ClusterStats>> {
    crate::error::ensure_dim(assignment.dim(), values.len())?;
    let k = assignment.num_clusters();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&x, &l) in values.iter().zip(assignment.labels()) {
        members[l as usize].push(x);
    }
    Ok(members.iter().map(|m| stats_of(m)).collect())
}

fn stats_of(values: &[f64]) -> ClusterStats {
    if values.is_empty() {
        return ClusterStats {
            size: 0,
            mean: 0.0,
            std: 0.0,
            entropy: 0.0,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    ClusterStats {
        size: values.len(),
        mean,
        std: var.sqrt(),
        entropy: histogram_entropy(values, ENTROPY_BINS),
    }
}

pub fn histogram_entropy(values: &[f64], bins: usize) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if values.len() < 2 || hi <= lo {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &x in values {
        let b = (((x - lo) / width) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketAllocation {
    per_cluster: Vec<usize>,
    total: usize,
}

impl BucketAllocation {
    pub fn new(per_cluster: Vec<usize>) -> Self {
        let total = per_cluster.iter().sum();
        BucketAllocation { per_cluster, total }
    }

    pub fn per_cluster(&self) -> &[usize] {
        &self.per_cluster
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// `sqrt(N_k) * |mu_k| * (1 + H_k)`: more entries, larger magnitude and
/// flatter histograms all earn more buckets.
pub fn allocation_weight(stats: &ClusterStats) -> f64 {
    (stats.size as f64).sqrt() * stats.mean.abs() * (1.0 + stats.entropy)
}

/// Split `total` buckets across clusters in proportion to
/// [`allocation_weight`]. Non-empty clusters get at least one bucket, empty
/// clusters none, and the rounding residue is settled by weight per bucket
/// so the counts sum to `total` exactly.
pub fn allocate_buckets(stats: &[ClusterStats], total: usize) -> Result<BucketAllocation> {
    let weights: Vec<f64> = stats.iter().map(allocation_weight).collect();
    allocate_by_weight(
        &weights,
        &stats.iter().map(|s| s.size > 0).collect::<Vec<_>>(),
        total,
    )
}

pub fn allocate_by_weight(
    weights: &[f64],
    non_empty: &[bool],
    total: usize,
) -> Result<BucketAllocation> {
    let active = non_empty.iter().filter(|&&a| a).count();
    if active == 0 {
        return Err(Error::Config(
            "no non-empty clusters to allocate buckets to".into(),
        ));
    }
    if total < active {
        return Err(Error::Config(format!(
            "bucket budget {total} is below the {active} non-empty clusters"
        )));
    }
    let mut w: Vec<f64> = weights
        .iter()
        .zip(non_empty)
        .map(|(&w, &a)| if a { w.max(0.0) } else { 0.0 })
        .collect();
    // every non-empty cluster has zero weight (e.g. all means are zero): split evenly
    if w.iter().sum::<f64>() <= 0.0 {
        w = non_empty
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .collect();
    }
    let sum: f64 = w.iter().sum();
    let mut m: Vec<usize> = w
        .iter()
        .zip(non_empty)
        .map(|(&wk, &a)| {
            if a {
                ((total as f64 * wk / sum).round() as usize).max(1)
            } else {
                0
            }
        })
        .collect();

    // Settle the rounding residue one bucket at a time by Webster priority:
    // add where weight per (m + 1/2) buckets is largest, remove where weight
    // per (m - 1/2) is smallest. This keeps m_k monotone in w_k.
    let active_ids: Vec<usize> = (0..w.len()).filter(|&k| non_empty[k]).collect();
    let mut assigned: usize = m.iter().sum();
    while assigned < total {
        let k = *active_ids
            .iter()
            .max_by(|&&a, &&b| {
                let pa = w[a] / (m[a] as f64 + 0.5);
                let pb = w[b] / (m[b] as f64 + 0.5);
                pa.total_cmp(&pb).then(b.cmp(&a))
            })
            .expect("at least one active cluster");
        m[k] += 1;
        assigned += 1;
    }
    while assigned > total {
        let k = *active_ids
            .iter()
            .filter(|&&k| m[k] > 1)
            .min_by(|&&a, &&b| {
                let pa = w[a] / (m[a] as f64 - 0.5);
                let pb = w[b] / (m[b] as f64 - 0.5);
                pa.total_cmp(&pb).then(b.cmp(&a))
            })
            .expect("total >= active clusters leaves a cluster above one bucket");
        m[k] -= 1;
        assigned -= 1;
    }
    Ok(BucketAllocation::new(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn small_vectors_are_sampled_whole() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(sample_for_clustering(&v, 10, 1), v);
    }

    #[test]
    fn sampling_is_deterministic() {
        let v: Vec<f64> = (0..10_000).map(f64::from).collect();
        let a = sample_for_clustering(&v, 100, 5);
        assert_eq!(a, sample_for_clustering(&v, 100, 5));
        assert_eq!(a.len(), 100);
        let mut sorted = a.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), 100, "sampled without replacement");
    }

    #[test]
    fn sample_mean_tracks_vector_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.4, 2.0).unwrap();
        let v: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let s = sample_for_clustering(&v, 4096, 77);
        let sm = s.iter().sum::<f64>() / s.len() as f64;
        let sd = (s.iter().map(|x| (x - sm).powi(2)).sum::<f64>() / (s.len() - 1) as f64).sqrt();
        let se = sd / (s.len() as f64).sqrt();
        assert!(
            (sm - mean).abs() <= 4.0 * se,
            "sample mean {sm} vs {mean} (se {se})"
        );
    }

    #[test]
    fn kmeans_separated_pair() {
        let mut s = vec![-1.0; 50];
        s.extend(vec![1.0; 50]);
        let m = kmeans_1d(&s, 2, KMeansConfig::default(), 64, 0).unwrap();
        assert_eq!(m.centers(), &[-1.0, 1.0]);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let s = vec![1.0, 2.0, 6.0, 7.0];
        let m = kmeans_1d(&s, 1, KMeansConfig::default(), 64, 0).unwrap();
        assert_eq!(m.centers(), &[4.0]);
    }

    #[test]
    fn kmeans_three_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let means = [-1.0, 0.0, 1.0];
        let mut s = Vec::new();
        for &mu in &means {
            let d = Normal::new(mu, 0.01).unwrap();
            s.extend((0..300).map(|_| d.sample(&mut rng)));
        }
        for seed in 0..10 {
            let m = kmeans_1d(&s, 3, KMeansConfig::default(), 64, seed).unwrap();
            assert_eq!(m.num_clusters(), 3);
            for (c, mu) in m.centers().iter().zip(means) {
                assert!((c - mu).abs() < 0.1, "seed {seed}: center {c} vs blob {mu}");
            }
        }
    }

    #[test]
    fn kmeans_degenerate_input_reduces_k() {
        let s = vec![2.0; 10];
        let m = kmeans_1d(&s, 4, KMeansConfig::default(), 64, 0).unwrap();
        assert_eq!(m.centers(), &[2.0]);
        let s = vec![1.0, 3.0, 1.0];
        assert_eq!(
            kmeans_1d(&s, 3, KMeansConfig::default(), 64, 0)
                .unwrap()
                .centers(),
            &[1.0, 3.0]
        );
        assert!(kmeans_1d(&[], 2, KMeansConfig::default(), 64, 0).is_err());
    }

    fn model(c: &[f64]) -> ClusterModel {
        ClusterModel::new(c.to_vec(), 64).unwrap()
    }

    #[test]
    fn assignment_prefers_same_sign() {
        let a = assign_clusters(&[0.1], &model(&[-1.0, 1.0]));
        assert_eq!(a.labels(), &[1]);
        // no positive center: fall back to global nearest
        let a = assign_clusters(&[0.5], &model(&[-2.0, -1.0]));
        assert_eq!(a.labels(), &[1]);
        // sign constraint binds even though -0.01 is closer
        let a = assign_clusters(&[0.05], &model(&[-0.01, 1.0]));
        assert_eq!(a.labels(), &[1]);
        // zero uses global nearest
        let a = assign_clusters(&[0.0], &model(&[-0.5, 2.0]));
        assert_eq!(a.labels(), &[0]);
        // equidistant tie goes to the smaller index
        let a = assign_clusters(&[0.0], &model(&[-1.0, 1.0]));
        assert_eq!(a.labels(), &[0]);
        let a = assign_clusters(&[1.5], &model(&[1.0, 2.0]));
        assert_eq!(a.labels(), &[0]);
    }

    #[test]
    fn identical_values_have_zero_spread() {
        let a = ClusterAssignment::new(vec![0; 5], 1).unwrap();
        let st = cluster_stats(&[3.0; 5], &a).unwrap();
        assert_eq!(st[0].std, 0.0);
        assert_eq!(st[0].entropy, 0.0);
        assert_eq!(st[0].mean, 3.0);
    }

    #[test]
    fn uniform_histogram_has_max_entropy() {
        let values: Vec<f64> = (0..32).flat_map(|k| vec![k as f64 + 0.5; 3]).collect();
        let h = histogram_entropy(&values, 32);
        assert!((h - 32f64.ln()).abs() < 1e-12, "{h}");
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let values: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<u32> = (0..500).map(|_| rng.random_range(0..3)).collect();
        let a = ClusterAssignment::new(labels.clone(), 3).unwrap();
        let st = cluster_stats(&values, &a).unwrap();
        for k in 0..3u32 {
            let members: Vec<f64> = values
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == k)
                .map(|(&v, _)| v)
                .collect();
            let n = members.len() as f64;
            let mut s = 0.0;
            for x in &members {
                s += x;
            }
            let mean = s / n;
            let mut ss = 0.0;
            for x in &members {
                ss += (x - mean) * (x - mean);
            }
            let std = (ss / n).sqrt();
            let got = st[k as usize];
            assert_eq!(got.size, members.len());
            assert!((got.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert!((got.std - std).abs() <= 1e-12 * std.max(1.0));
            assert!(got.entropy >= 0.0);
        }
    }

    fn stat(size: usize, mean: f64) -> ClusterStats {
        ClusterStats {
            size,
            mean,
            std: 0.0,
            entropy: 0.0,
        }
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(
            allocate_buckets(&[stat(10, 1.0)], 16)
                .unwrap()
                .per_cluster(),
            &[16]
        );
        let two = allocate_buckets(&[stat(10, 1.0), stat(10, 1.0)], 8).unwrap();
        assert_eq!(two.per_cluster(), &[4, 4]);
        let by_w = allocate_by_weight(&[1.0, 3.0], &[true, true], 8).unwrap();
        assert_eq!(by_w.per_cluster(), &[2, 6]);
        let with_empty = allocate_buckets(&[stat(10, 1.0), stat(0, 0.0)], 5).unwrap();
        assert_eq!(with_empty.per_cluster(), &[5, 0]);
        assert!(allocate_buckets(&[stat(1, 1.0), stat(1, 1.0)], 1).is_err());
    }

    proptest! {
        #[test]
        fn allocation_conserves_budget(
            weights in prop::collection::vec(0.0f64..100.0, 1..10),
            extra in 0usize..200,
        ) {
            let active = vec![true; weights.len()];
            let total = weights.len() + extra;
            let a = allocate_by_weight(&weights, &active, total).unwrap();
            prop_assert_eq!(a.per_cluster().iter().sum::<usize>(), total);
            prop_assert!(a.per_cluster().iter().all(|&m| m >= 1));
        }

        #[test]
        fn allocation_is_monotone_in_own_weight(
            weights in prop::collection::vec(0.01f64..100.0, 2..8),
            which in any::<prop::sample::Index>(),
            bump in 0.0f64..50.0,
            extra in 0usize..100,
        ) {
            let k = which.index(weights.len());
            let active = vec![true; weights.len()];
            let total = weights.len() + extra;
            let before = allocate_by_weight(&weights, &active, total).unwrap();
            let mut heavier = weights.clone();
            heavier[k] += bump;
            let after = allocate_by_weight(&heavier, &active, total).unwrap();
            prop_assert!(after.per_cluster()[k] >= before.per_cluster()[k],
                "cluster {} went {} -> {}", k, before.per_cluster()[k], after.per_cluster()[k]);
        }

        #[test]
        fn sign_rule_and_partition(values in prop::collection::vec(-10.0f64..10.0, 1..200),
                                   centers in prop::collection::vec(-5.0f64..5.0, 1..6)) {
            let m = ClusterModel::new(centers, 64).unwrap();
            let a = assign_clusters(&values, &m);
            prop_assert_eq!(a.sizes().iter().sum::<usize>(), values.len());
            let has_pos = m.centers().iter().any(|&c| c > 0.0);
            let has_neg = m.centers().iter().any(|&c| c < 0.0);
            for (&x, &l) in values.iter().zip(a.labels()) {
                let c = m.centers()[l as usize];
                if x > 0.0 && has_pos { prop_assert!(c > 0.0); }
                if x < 0.0 && has_neg { prop_assert!(c < 0.0); }
            }
        }
    }
}
