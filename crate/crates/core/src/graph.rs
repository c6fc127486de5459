//! Graph data model: adjacency, feature views, diffusion re-weighting and
//! view-wise feature propagation.

use log::warn;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

/// One view of vertex features, stored as a sparse `M^i x N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFeatures {
    view_index: usize,
    matrix: CsMat<f64>,
}

impl ViewFeatures {
    /// 1-based position of this view in its graph.
    pub fn view_index(&self) -> usize {
        self.view_index
    }

    pub fn n_features(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    /// True when every stored entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.matrix.data().iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Counts of input problems repaired while building the adjacency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

/// Simple undirected graph with `D` ordered views of nonnegative vertex features.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewGraph {
    n_vertices: usize,
    adjacency: CsMat<f64>,
    views: Vec<ViewFeatures>,
    vertex_ids: Option<Vec<String>>,
}

impl MultiViewGraph {
    /// Builds a graph from an edge list, symmetrizing and deduplicating it.
    /// Self-loops are dropped with a warning.
    pub fn from_edges(
        n_vertices: usize,
        edges: &[(usize, usize)],
        views: Vec<CsMat<f64>>,
    ) -> Result<Self> {
        Self::build(n_vertices, edges, views).map(|(g, _)| g)
    }

    /// Like [`MultiViewGraph::from_edges`], also reporting what was cleaned up.
    pub fn build(
        n_vertices: usize,
        edges: &[(usize, usize)],
        views: Vec<CsMat<f64>>,
    ) -> Result<(Self, EdgeCleanup)> {
        let mut cleanup = EdgeCleanup::default();
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= n_vertices {
                    return Err(Error::Bounds {
                        index: idx,
                        n_vertices,
                        context: format!("edge ({a}, {b})"),
                    });
                }
            }
            if a == b {
                cleanup.self_loops_dropped += 1;
                continue;
            }
            pairs.push((a, b));
            pairs.push((b, a));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        cleanup.duplicates_merged = (before - pairs.len()) / 2;
        if cleanup.self_loops_dropped > 0 {
            warn!("dropped {} self-loop(s)", cleanup.self_loops_dropped);
        }

        let mut tri = TriMat::with_capacity((n_vertices, n_vertices), pairs.len());
        for (a, b) in pairs {
            tri.add_triplet(a, b, 1.0);
        }
        let adjacency = tri.to_csr();

        let mut checked = Vec::with_capacity(views.len());
        for (i, matrix) in views.into_iter().enumerate() {
            if matrix.cols() != n_vertices {
                return Err(Error::Shape(format!(
                    "view {} has {} columns, graph has {} vertices",
                    i + 1,
                    matrix.cols(),
                    n_vertices
                )));
            }
            if matrix.rows() == 0 {
                return Err(Error::Shape(format!("view {} has no features", i + 1)));
            }
            if let Some(bad) = matrix.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidValue(format!(
                    "view {} contains entry {bad}; features must be finite and nonnegative",
                    i + 1
                )));
            }
            checked.push(ViewFeatures {
                view_index: i + 1,
                matrix: matrix.to_csr(),
            });
        }

        let graph = MultiViewGraph {
            n_vertices,
            adjacency,
            views: checked,
            vertex_ids: None,
        };
        Ok((graph, cleanup))
    }

    pub fn with_vertex_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_vertices {
            return Err(Error::Shape(format!(
                "{} vertex ids for {} vertices",
                ids.len(),
                self.n_vertices
            )));
        }
        self.vertex_ids = Some(ids);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Binary symmetric adjacency with zero diagonal.
    pub fn adjacency(&self) -> &CsMat<f64> {
        &self.adjacency
    }

    pub fn views(&self) -> &[ViewFeatures] {
        &self.views
    }

    pub fn vertex_ids(&self) -> Option<&[String]> {
        self.vertex_ids.as_deref()
    }

    /// `M^i` for every view, in order.
    pub fn view_sizes(&self) -> Vec<usize> {
        self.views.iter().map(ViewFeatures::n_features).collect()
    }

    pub fn n_features(&self) -> usize {
        self.views.iter().map(ViewFeatures::n_features).sum()
    }

    /// Sorted neighbor indices of `vertex`.
    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        self.adjacency
            .outer_view(vertex)
            .map(|row| row.into_raw_storage().0)
            .unwrap_or(&[])
    }

    /// Number of neighbors of every vertex.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_vertices)
            .map(|i| self.neighbors(i).len())
            .collect()
    }

    /// Fails unless every feature entry is exactly 0 or 1.
    pub fn require_binary_features(&self) -> Result<()> {
        match self.views.iter().find(|v| !v.is_binary()) {
            Some(v) => Err(Error::InvalidValue(format!(
                "view {} has non-binary feature values (strict mode)",
                v.view_index
            ))),
            None => Ok(()),
        }
    }

    /// Row-wise concatenation `[F^1; ...; F^D]`.
    pub fn stack_features(&self) -> Result<CsMat<f64>> {
        if self.views.is_empty() {
            return Err(Error::Shape("graph has no feature views".into()));
        }
        let blocks: Vec<_> = self.views.iter().map(|v| v.matrix.view()).collect();
        Ok(sprs::vstack(&blocks))
    }
}

/// Edge weights obtained by diffusion re-weighting of the binary adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionWeights {
    matrix: CsMat<f64>,
    source_degrees: Vec<usize>,
}

impl DiffusionWeights {
    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn source_degrees(&self) -> &[usize] {
        &self.source_degrees
    }

    pub fn into_matrix(self) -> CsMat<f64> {
        self.matrix
    }
}

fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Re-weights every edge `(i, j)` by
/// `(d_i + d_j) * (common_neighbors(i, j) + 1) / (2 d_i d_j)`.
///
/// Numerator and denominator are formed in integer arithmetic so the result
/// is exactly symmetric. Non-edges stay zero; isolated vertices become empty
/// rows.
pub fn diffusion_reweight(graph: &MultiViewGraph) -> Result<DiffusionWeights> {
    let degrees = graph.degrees();
    let isolated = degrees.iter().filter(|&&d| d == 0).count();
    if isolated > 0 {
        warn!("{isolated} isolated vertex/vertices kept as empty rows");
    }

    let adj = graph.adjacency();
    let mut data = Vec::with_capacity(adj.nnz());
    for i in 0..graph.n_vertices() {
        let ni = graph.neighbors(i);
        for &j in ni {
            let (di, dj) = (degrees[i] as u64, degrees[j] as u64);
            if di == 0 || dj == 0 {
                return Err(Error::Inconsistent(format!(
                    "edge ({i}, {j}) has an endpoint of degree 0"
                )));
            }
            let common = count_common(ni, graph.neighbors(j)) as u64;
            let num = (di + dj) * (common + 1);
            let den = 2 * di * dj;
            data.push(num as f64 / den as f64);
        }
    }
    let mut matrix = adj.clone();
    matrix.data_mut().copy_from_slice(&data);
    Ok(DiffusionWeights {
        matrix,
        source_degrees: degrees,
    })
}

/// Per-view propagated features `H^i = F^i D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedFeatures {
    per_view: Vec<CsMat<f64>>,
}

impl PropagatedFeatures {
    pub fn per_view(&self) -> &[CsMat<f64>] {
        &self.per_view
    }

    pub fn into_inner(self) -> Vec<CsMat<f64>> {
        self.per_view
    }
}

/// Spreads each view's features along the re-weighted edges: `H^i = F^i D`.
/// Entry `(j, k)` measures how much feature `j` propagates through vertex `k`.
pub fn propagate_features(
    graph: &MultiViewGraph,
    weights: &DiffusionWeights,
) -> Result<PropagatedFeatures> {
    let d = weights.matrix();
    let per_view = graph
        .views()
        .iter()
        .map(|view| {
            let f = view.matrix();
            if f.cols() != d.rows() {
                return Err(Error::Shape(format!(
                    "view {} has {} columns, weights have {} rows",
                    view.view_index(),
                    f.cols(),
                    d.rows()
                )));
            }
            Ok(f * d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagatedFeatures { per_view })
}
