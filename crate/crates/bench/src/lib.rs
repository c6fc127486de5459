//! Fixed benchmark instances shared by the criterion benches.

use viewprop_core::{
    generate, init_factors, FactorDims, Hyperparams, LatentFactors, ModelData, MultiViewGraph,
    PlantedSpec, ViewSpec,
};

/// Planted graph with `k` clusters, one 10-features-per-cluster view and the
/// default edge probabilities used throughout the tests.
pub fn planted(n: usize, k: usize) -> MultiViewGraph {
    let spec = PlantedSpec {
        n_vertices: n,
        k_clusters: k,
        p_in: 0.3,
        p_out: 0.02,
        views: vec![ViewSpec {
            features_per_cluster: 10,
            flip_noise: 0.05,
        }],
        seed: 1,
    };
    generate(&spec).expect("valid spec").0
}

pub struct Prepared {
    pub data: ModelData,
    pub factors: LatentFactors,
    pub hp: Hyperparams,
}

pub fn prepared(n: usize, k: usize) -> Prepared {
    let data = ModelData::prepare(&planted(n, k)).expect("planted graphs have no isolated edges");
    let hp = Hyperparams::new(k);
    let dims = FactorDims {
        n_vertices: n,
        view_sizes: data.view_sizes(),
        k_clusters: k,
        s_dim: hp.s_dim,
    };
    let factors = init_factors(&dims, hp.seed).expect("nonzero dims");
    Prepared { data, factors, hp }
}
