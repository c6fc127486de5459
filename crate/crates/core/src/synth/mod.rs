//! Planted-partition multi-view graphs with known clusters, and scalar
//! reference implementations of the update rules.

mod oracle;

pub use oracle::{oracle_update, ORACLE_MAX_DIM};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::error::{Error, Result};
use crate::factors::{init_factors, FactorDims, LatentFactors};
use crate::graph::MultiViewGraph;
use crate::model::ModelData;

/// One feature view: `features_per_cluster` indicator features per cluster,
/// each bit flipped with probability `flip_noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub features_per_cluster: usize,
    pub flip_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_vertices: usize,
    pub k_clusters: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub views: Vec<ViewSpec>,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.k_clusters == 0 {
            return fail("k must be at least 1".into());
        }
        if self.k_clusters > self.n_vertices {
            return fail(format!(
                "k = {} exceeds n = {}",
                self.k_clusters, self.n_vertices
            ));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return fail(format!(
                "need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            ));
        }
        if self.views.is_empty() {
            return fail("at least one view is required".into());
        }
        for (i, v) in self.views.iter().enumerate() {
            if v.features_per_cluster == 0 {
                return fail(format!("view {}: features_per_cluster must be >= 1", i + 1));
            }
            if !(0.0..0.5).contains(&v.flip_noise) {
                return fail(format!(
                    "view {}: flip_noise must be in [0, 0.5), got {}",
                    i + 1,
                    v.flip_noise
                ));
            }
        }
        Ok(())
    }
}

/// Cluster of `vertex` under a balanced contiguous split: the first
/// `n % k` clusters hold one extra vertex.
pub fn planted_cluster(vertex: usize, n: usize, k: usize) -> usize {
    let (base, extra) = (n / k, n % k);
    let big = extra * (base + 1);
    if vertex < big {
        vertex / (base + 1)
    } else {
        extra + (vertex - big) / base
    }
}

/// Samples a planted-partition graph and its truth labels.
pub fn generate(spec: &PlantedSpec) -> Result<(MultiViewGraph, Vec<usize>)> {
    spec.validate()?;
    let (n, k) = (spec.n_vertices, spec.k_clusters);
    let labels: Vec<usize> = (0..n).map(|v| planted_cluster(v, n, k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }

    let views = spec
        .views
        .iter()
        .map(|view| {
            let rows = view.features_per_cluster * k;
            let mut tri = TriMat::new((rows, n));
            for feature in 0..rows {
                let owner = feature / view.features_per_cluster;
                for (vertex, &label) in labels.iter().enumerate() {
                    let member = label == owner;
                    if member != rng.random_bool(view.flip_noise) {
                        tri.add_triplet(feature, vertex, 1.0);
                    }
                }
            }
            tri.to_csr()
        })
        .collect();

    let graph = MultiViewGraph::from_edges(n, &edges, views)?;
    Ok((graph, labels))
}

/// A small unstructured instance for exercising the update rules: every
/// vertex pair is an edge with probability 1/2, feature entries are present
/// with probability 1/2 and valued in (0, 1], and the factors come from
/// [`init_factors`] with the same seed.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub graph: MultiViewGraph,
    pub data: ModelData,
    pub factors: LatentFactors,
}

pub fn random_instance(
    seed: u64,
    n_vertices: usize,
    view_sizes: &[usize],
    k_clusters: usize,
    s_dim: usize,
) -> Result<RandomInstance> {
    let n = n_vertices;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                edges.push((i, j));
            }
        }
    }
    let views = view_sizes
        .iter()
        .map(|&m| {
            let mut tri = TriMat::new((m, n));
            for f in 0..m {
                for v in 0..n {
                    if rng.random_bool(0.5) {
                        tri.add_triplet(f, v, 1.0 - rng.random::<f64>());
                    }
                }
            }
            tri.to_csr()
        })
        .collect();
    let graph = MultiViewGraph::from_edges(n, &edges, views)?;
    let data = ModelData::prepare(&graph)?;
    let dims = FactorDims {
        n_vertices: n,
        view_sizes: view_sizes.to_vec(),
        k_clusters,
        s_dim,
    };
    let factors = init_factors(&dims, seed)?;
    Ok(RandomInstance {
        graph,
        data,
        factors,
    })
}
