//! Clustering of multi-view attributed graphs by joint non-negative
//! factorization of structure, features and cross-view feature propagation.
//!
//! The pipeline is: load a [`MultiViewGraph`], re-weight its edges by
//! degree and common-neighbor diffusion, propagate each feature view along
//! the re-weighted edges, then fit six nonnegative factors with
//! multiplicative updates and read clusters off the membership factor `V`.
//!
//! ```no_run
//! use viewprop_core::{extract_clusters, fit, io, Hyperparams};
//!
//! let (graph, _) = io::load_graph("edges.txt", &["view_1.txt"], Default::default())?;
//! let result = fit(&graph, &Hyperparams::new(5))?;
//! let (clusters, _) = extract_clusters(&result.factors.v)?;
//! # Ok::<(), viewprop_core::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod factors;
pub mod graph;
pub mod io;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    evaluate, extract_clusters, matched_accuracy, nmi, partition_nmi, ClusterAssignment, EvalReport,
};
pub use factors::{init_factors, EpsilonMode, FactorDims, Hyperparams, LatentFactors};
pub use graph::{
    diffusion_reweight, propagate_features, DiffusionWeights, EdgeCleanup, MultiViewGraph,
    PropagatedFeatures, ViewFeatures,
};
pub use model::ModelData;
pub use objective::{objective, relaxed_cw_objective, ObjectiveBreakdown};
pub use optimizer::{fit, fit_from, fit_with, FitResult, FitTrace, GuardPolicy, Rule, StopReason};
pub use synth::{generate, random_instance, PlantedSpec, RandomInstance, ViewSpec};
