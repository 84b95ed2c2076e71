use serde::{Deserialize, Serialize};

use crate::cluster::{
    allocate_buckets, assign_clusters, kmeans_1d, sample_for_clustering, BucketAllocation,
    ClusterAssignment, ClusterModel, KMeansConfig, DEFAULT_REFRESH_INTERVAL, DEFAULT_SAMPLE_CAP,
};
use crate::error::{Error, Result};
use crate::gradient::GradientVector;
use crate::hash::{derive_seed, HashMapping, HashingMode};

const SAMPLE_STREAM: u64 = 0x5341_4d50;
const KMEANS_STREAM: u64 = 0x4b4d_4e53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasConfig {
    pub num_clusters: usize,
    pub total_buckets: usize,
    pub refresh_interval: usize,
    pub sample_cap: usize,
    pub kmeans: KMeansConfig,
    pub hashing: HashingMode,
    pub seed: u64,
}

impl CasConfig {
    pub fn new(num_clusters: usize, total_buckets: usize, seed: u64) -> Self {
        CasConfig {
            num_clusters,
            total_buckets,
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            sample_cap: DEFAULT_SAMPLE_CAP,
            kmeans: KMeansConfig::default(),
            hashing: HashingMode::Random,
            seed,
        }
    }

    /// `2^bits` clusters.
    pub fn with_bits(bits: u32, total_buckets: usize, seed: u64) -> Self {
        Self::new(crate::cluster::clusters_for_bits(bits), total_buckets, seed)
    }

    /// One cluster, one bucket per entry, identity hashing.
    pub fn lossless(dim: usize) -> Self {
        CasConfig {
            hashing: HashingMode::Identity,
            ..Self::new(1, dim, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::Config("num_clusters must be >= 1".into()));
        }
        if self.total_buckets < self.num_clusters {
            return Err(Error::Config(format!(
                "total_buckets={} is below num_clusters={}",
                self.total_buckets, self.num_clusters
            )));
        }
        if self.refresh_interval == 0 {
            return Err(Error::Config("refresh_interval must be >= 1".into()));
        }
        if self.sample_cap < self.num_clusters {
            return Err(Error::Config("sample_cap must be >= num_clusters".into()));
        }
        Ok(())
    }
}

/// Per-cluster hash seed shared by every worker of a window.
pub fn cluster_seed(global_seed: u64, window_id: u64, cluster: usize) -> u64 {
    derive_seed(&[global_seed, window_id, cluster as u64])
}

/// Everything workers must agree on between two clustering refreshes.
#[derive(Debug, Clone, PartialEq)]
pub struct CasWindow {
    id: u64,
    model: ClusterModel,
    allocation: BucketAllocation,
    mappings: Vec<Option<HashMapping>>,
    global_seed: u64,
    hashing: HashingMode,
}

impl CasWindow {
    /// Cluster a sample of `g`, drop centers no entry of `g` maps to and
    /// size each remaining cluster's sketch from its statistics.
    pub fn build(config: &CasConfig, window_id: u64, g: &GradientVector) -> Result<Self> {
        config.validate()?;
        let values = g.as_slice();
        let sample = sample_for_clustering(
            values,
            config.sample_cap,
            derive_seed(&[config.seed, window_id, SAMPLE_STREAM]),
        );
        let model = kmeans_1d(
            &sample,
            config.num_clusters,
            config.kmeans,
            config.refresh_interval,
            derive_seed(&[config.seed, window_id, KMEANS_STREAM]),
        )?;
        let sizes = assign_clusters(values, &model).sizes();
        let model = model.retain(&sizes.iter().map(|&n| n > 0).collect::<Vec<_>>())?;
        let assignment = assign_clusters(values, &model).with_stats(values)?;
        let stats = assignment.stats().expect("stats just computed");
        let allocation = allocate_buckets(stats, config.total_buckets)?;
        Self::from_parts(window_id, model, allocation, config.seed, config.hashing)
    }

    pub fn from_parts(
        id: u64,
        model: ClusterModel,
        allocation: BucketAllocation,
        global_seed: u64,
        hashing: HashingMode,
    ) -> Result<Self> {
        if allocation.per_cluster().len() != model.num_clusters() {
            return Err(Error::DimMismatch {
                expected: model.num_clusters(),
                actual: allocation.per_cluster().len(),
            });
        }
        let mappings = allocation
            .per_cluster()
            .iter()
            .enumerate()
            .map(|(k, &m)| window_mapping(global_seed, id, k, m, hashing))
            .collect::<Result<_>>()?;
        Ok(CasWindow {
            id,
            model,
            allocation,
            mappings,
            global_seed,
            hashing,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn allocation(&self) -> &BucketAllocation {
        &self.allocation
    }

    pub fn num_clusters(&self) -> usize {
        self.model.num_clusters()
    }

    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn hashing(&self) -> HashingMode {
        self.hashing
    }

    /// `None` for a cluster with no buckets.
    pub fn mapping(&self, cluster: usize) -> Option<&HashMapping> {
        self.mappings[cluster].as_ref()
    }

    pub fn assign(&self, g: &GradientVector) -> ClusterAssignment {
        assign_clusters(g.as_slice(), &self.model)
    }
}

pub(crate) fn window_mapping(
    global_seed: u64,
    window_id: u64,
    cluster: usize,
    buckets: usize,
    hashing: HashingMode,
) -> Result<Option<HashMapping>> {
    if buckets == 0 {
        return Ok(None);
    }
    Ok(Some(match hashing {
        HashingMode::Random => {
            HashMapping::bucket_only(cluster_seed(global_seed, window_id, cluster), buckets)?
        }
        HashingMode::Identity => HashMapping::identity(buckets)?,
    }))
}

/// Tracks the current window and rebuilds it every `refresh_interval`
/// iterations. Iteration 0 always builds.
#[derive(Debug, Clone)]
pub struct CasSession {
    config: CasConfig,
    window: Option<CasWindow>,
}

impl CasSession {
    pub fn new(config: CasConfig) -> Result<Self> {
        config.validate()?;
        Ok(CasSession {
            config,
            window: None,
        })
    }

    pub fn config(&self) -> &CasConfig {
        &self.config
    }

    pub fn needs_refresh(&self, t: usize) -> bool {
        self.window.is_none() || t % self.config.refresh_interval == 0
    }

    /// Window for iteration `t`, refreshed from `leader` when due.
    pub fn window_for(&mut self, t: usize, leader: &GradientVector) -> Result<&CasWindow> {
        if self.needs_refresh(t) {
            let id = (t / self.config.refresh_interval) as u64;
            self.window = Some(CasWindow::build(&self.config, id, leader)?);
        }
        Ok(self.window.as_ref().expect("window built above"))
    }

    pub fn current(&self) -> Option<&CasWindow> {
        self.window.as_ref()
    }
}
