//! Preprocessed inputs consumed by the objective and the update rules.

use std::ops::Range;

use sprs::CsMat;

use crate::error::{Error, Result};
use crate::graph::{diffusion_reweight, propagate_features, MultiViewGraph};

/// `F`, `{H^i}` and the re-weighted adjacency `D`, plus the transposes the
/// update rules need. `D` stands in for the adjacency in every downstream
/// formula.
#[derive(Debug, Clone)]
pub struct ModelData {
    features: CsMat<f64>,
    features_t: CsMat<f64>,
    propagated: Vec<CsMat<f64>>,
    propagated_t: Vec<CsMat<f64>>,
    weights: CsMat<f64>,
    view_offsets: Vec<usize>,
}

fn transpose(m: &CsMat<f64>) -> CsMat<f64> {
    m.transpose_view().to_csr()
}

impl ModelData {
    /// Runs diffusion re-weighting and view-wise propagation on `graph`.
    pub fn prepare(graph: &MultiViewGraph) -> Result<Self> {
        let weights = diffusion_reweight(graph)?;
        let propagated = propagate_features(graph, &weights)?.into_inner();
        let views = graph.views().iter().map(|v| v.matrix().clone()).collect();
        Self::from_parts(views, propagated, weights.into_matrix())
    }

    /// Assembles model data from explicit matrices.
    ///
    /// `views[i]` is `M^i x N`, `propagated[i]` must have the same shape and
    /// `weights` is a symmetric `N x N` matrix.
    pub fn from_parts(
        views: Vec<CsMat<f64>>,
        propagated: Vec<CsMat<f64>>,
        weights: CsMat<f64>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Shape("at least one feature view is required".into()));
        }
        if views.len() != propagated.len() {
            return Err(Error::Shape(format!(
                "{} views but {} propagated matrices",
                views.len(),
                propagated.len()
            )));
        }
        let n = weights.rows();
        if weights.cols() != n {
            return Err(Error::Shape(format!("weights are {:?}", weights.shape())));
        }
        let mut view_offsets = vec![0];
        for (i, (f, h)) in views.iter().zip(&propagated).enumerate() {
            if f.cols() != n || f.shape() != h.shape() {
                return Err(Error::Shape(format!(
                    "view {}: features {:?}, propagated {:?}, {n} vertices",
                    i + 1,
                    f.shape(),
                    h.shape()
                )));
            }
            view_offsets.push(view_offsets[i] + f.rows());
        }
        let blocks: Vec<_> = views.iter().map(|v| v.view()).collect();
        let features = sprs::vstack(&blocks).to_csr();
        let propagated: Vec<_> = propagated.into_iter().map(|h| h.to_csr()).collect();
        Ok(ModelData {
            features_t: transpose(&features),
            features,
            propagated_t: propagated.iter().map(transpose).collect(),
            propagated,
            weights: weights.to_csr(),
            view_offsets,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.rows()
    }

    pub fn n_views(&self) -> usize {
        self.propagated.len()
    }

    pub fn view_sizes(&self) -> Vec<usize> {
        self.view_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Rows of `F` (and `U`) that belong to view `i` (0-based).
    pub fn view_rows(&self, i: usize) -> Range<usize> {
        self.view_offsets[i]..self.view_offsets[i + 1]
    }

    /// Stacked features `F`, `M x N`.
    pub fn features(&self) -> &CsMat<f64> {
        &self.features
    }

    pub fn features_t(&self) -> &CsMat<f64> {
        &self.features_t
    }

    /// `H^i`, `M^i x N`.
    pub fn propagated(&self) -> &[CsMat<f64>] {
        &self.propagated
    }

    pub fn propagated_t(&self) -> &[CsMat<f64>] {
        &self.propagated_t
    }

    /// Re-weighted adjacency `D`, `N x N`.
    pub fn weights(&self) -> &CsMat<f64> {
        &self.weights
    }
}
