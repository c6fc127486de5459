//! The unified objective and the relaxed `C`/`W` objective.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::factors::{Hyperparams, LatentFactors};
use crate::model::ModelData;

/// Every term of the unified objective, plus the orthogonality penalties.
///
/// `total` covers the five reconstruction/coupling terms only; `ortho_c` and
/// `ortho_w` are reported alongside, unweighted. `penalized` adds
/// `delta * (ortho_c + ortho_w)` to `total`; this is the quantity every update
/// rule is built to decrease, and the one the fitting loop tests for
/// convergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    /// `||F - U V^T||^2`
    pub feature_term: f64,
    /// `||H^i - P^i X^T||^2` per view
    pub propagation_terms: Vec<f64>,
    /// `||P W - U||^2`
    pub coupling_u: f64,
    /// `alpha ||D - V V^T||^2`
    pub structural: f64,
    /// `lambda ||X C - V||^2`
    pub coupling_v: f64,
    /// `||C C^T - I||^2`
    pub ortho_c: f64,
    /// `||W W^T - I||^2`
    pub ortho_w: f64,
    pub penalized: f64,
}

fn sq_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn sparse_sq_norm(m: &CsMat<f64>) -> f64 {
    m.data().iter().map(|v| v * v).sum()
}

/// `||S - A B^T||^2` for sparse `S`, expanded as
/// `||S||^2 - 2 <S B, A> + <A^T A, B^T B>`.
fn low_rank_residual(s: &CsMat<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let sb: Array2<f64> = s * &b;
    let cross: f64 = (&sb * &a).sum();
    let gram = (&a.t().dot(&a) * &b.t().dot(&b)).sum();
    (sparse_sq_norm(s) - 2.0 * cross + gram).max(0.0)
}

/// `||M M^T - I||^2`
pub(crate) fn orthogonality_gap(m: &Array2<f64>) -> f64 {
    let mut g = m.dot(&m.t());
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    sq_norm(&g)
}

fn finite(term: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::non_finite(term))
    }
}

fn check_shapes(factors: &LatentFactors, data: &ModelData) -> Result<()> {
    factors.check_shapes()?;
    let dims = factors.dims();
    if dims.n_vertices != data.n_vertices() || dims.view_sizes != data.view_sizes() {
        return Err(Error::Shape(format!(
            "factors are for N={} views {:?}, data has N={} views {:?}",
            dims.n_vertices,
            dims.view_sizes,
            data.n_vertices(),
            data.view_sizes()
        )));
    }
    Ok(())
}

/// Evaluates every term of the unified objective.
pub fn objective(
    factors: &LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
) -> Result<ObjectiveBreakdown> {
    check_shapes(factors, data)?;
    let f = factors;

    let feature_term = finite(
        "feature_term",
        low_rank_residual(data.features(), f.u.view(), f.v.view()),
    )?;
    let propagation_terms = data
        .propagated()
        .iter()
        .zip(&f.p_views)
        .enumerate()
        .map(|(i, (h, p))| {
            finite(
                &format!("propagation_terms[{i}]"),
                low_rank_residual(h, p.view(), f.x.view()),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let coupling_u = finite("coupling_u", sq_norm(&(f.stacked_p().dot(&f.w) - &f.u)))?;
    let structural = finite(
        "structural",
        hp.alpha * low_rank_residual(data.weights(), f.v.view(), f.v.view()),
    )?;
    let coupling_v = finite("coupling_v", hp.lambda * sq_norm(&(f.x.dot(&f.c) - &f.v)))?;
    let ortho_c = finite("ortho_c", orthogonality_gap(&f.c))?;
    let ortho_w = finite("ortho_w", orthogonality_gap(&f.w))?;

    let total = finite(
        "total",
        feature_term + propagation_terms.iter().sum::<f64>() + coupling_u + structural + coupling_v,
    )?;
    let penalized = finite("penalized", total + hp.delta * (ortho_c + ortho_w))?;
    Ok(ObjectiveBreakdown {
        total,
        feature_term,
        propagation_terms,
        coupling_u,
        structural,
        coupling_v,
        ortho_c,
        ortho_w,
        penalized,
    })
}

/// The relaxed objective minimized by the `C` and `W` updates:
/// `||P W - U||^2 + lambda ||X C - V||^2 + delta (||C C^T - I||^2 + ||W W^T - I||^2)`.
pub fn relaxed_cw_objective(factors: &LatentFactors, hp: &Hyperparams) -> Result<f64> {
    factors.check_shapes()?;
    let f = factors;
    let coupling_u = sq_norm(&(f.stacked_p().dot(&f.w) - &f.u));
    let coupling_v = hp.lambda * sq_norm(&(f.x.dot(&f.c) - &f.v));
    let penalty = hp.delta * (orthogonality_gap(&f.c) + orthogonality_gap(&f.w));
    finite("relaxed_cw_objective", coupling_u + coupling_v + penalty)
}
