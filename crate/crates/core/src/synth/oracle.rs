//! Scalar transcriptions of the six update rules.
//!
//! Everything here is written as explicit index loops over plain nested
//! vectors, following each rule's textbook form term by term (including the
//! `(sqrt(Delta) - b) / a` shape of the square-root rules). It exists to
//! cross-check the vectorized kernels in `optimizer` and is deliberately
//! slow, so instance sizes are capped.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::factors::{Hyperparams, LatentFactors};
use crate::model::ModelData;
use crate::optimizer::{GuardPolicy, Rule};

/// Largest `N`, `M`, `K` or `S` accepted by [`oracle_update`].
pub const ORACLE_MAX_DIM: usize = 48;

type Dense = Vec<Vec<f64>>;

fn dense(m: &Array2<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[[i, j]]).collect())
        .collect()
}

fn dense_sparse(m: &sprs::CsMat<f64>) -> Dense {
    let mut out = vec![vec![0.0; m.cols()]; m.rows()];
    for (&v, (i, j)) in m.iter() {
        out[i][j] = v;
    }
    out
}

fn cols(m: &Dense) -> usize {
    m.first().map_or(0, Vec::len)
}

fn transpose(m: &Dense) -> Dense {
    let mut out = vec![vec![0.0; m.len()]; cols(m)];
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j][i] = v;
        }
    }
    out
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, inner, m) = (a.len(), b.len(), cols(b));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..inner {
                acc += a[i][t] * b[t][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn mul3(a: &Dense, b: &Dense, c: &Dense) -> Dense {
    mul(&mul(a, b), c)
}

fn to_array(m: Dense, rows: usize, ncols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, ncols));
    for i in 0..rows {
        for j in 0..ncols {
            out[[i, j]] = m[i][j];
        }
    }
    out
}

/// `base * num / den`, entry by entry.
fn multiplicative(base: &Dense, num: &Dense, den: &Dense, guard: &GuardPolicy) -> Dense {
    let mut out = base.clone();
    for i in 0..base.len() {
        for j in 0..cols(base) {
            out[i][j] = base[i][j] * guard.ratio(num[i][j], den[i][j]);
        }
    }
    out
}

/// `base * sqrt(sqrt(Delta) - b) / sqrt(a)` with
/// `Delta = b^2 + eight_w_cube * c`.
fn root_rule(
    base: &Dense,
    a: &Dense,
    b: &Dense,
    eight_w_cube: &Dense,
    c: &Dense,
    guard: &GuardPolicy,
) -> Dense {
    let mut out = base.clone();
    for i in 0..base.len() {
        for j in 0..cols(base) {
            let delta = b[i][j] * b[i][j] + eight_w_cube[i][j] * c[i][j];
            let top = guard.sqrt(delta) - b[i][j];
            let top = if guard.clamp_negative_radicand {
                top.max(0.0)
            } else {
                top
            };
            out[i][j] = base[i][j] * guard.sqrt(guard.ratio(top, a[i][j]));
        }
    }
    out
}

fn check_size(factors: &LatentFactors) -> Result<()> {
    let d = factors.dims();
    let dims = [d.n_vertices, d.n_features(), d.k_clusters, d.s_dim];
    if dims.iter().any(|&x| x > ORACLE_MAX_DIM) {
        return Err(Error::TooLarge(format!(
            "N={}, M={}, K={}, S={} (limit {ORACLE_MAX_DIM})",
            dims[0], dims[1], dims[2], dims[3]
        )));
    }
    factors.check_shapes()
}

/// Computes one update rule with explicit scalar loops.
pub fn oracle_update(
    rule: Rule,
    factors: &LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    check_size(factors)?;
    let v = dense(&factors.v);
    let u = dense(&factors.u);
    let x = dense(&factors.x);
    let c = dense(&factors.c);
    let w = dense(&factors.w);
    let p_views: Vec<Dense> = factors.p_views.iter().map(dense).collect();
    let p = dense(&factors.stacked_p());
    let f = dense_sparse(data.features());
    let d = dense_sparse(data.weights());
    let h: Vec<Dense> = data.propagated().iter().map(dense_sparse).collect();
    let (al, la, de) = (hp.alpha, hp.lambda, hp.delta);

    let scale = |m: &Dense, s: f64| -> Dense {
        m.iter()
            .map(|r| r.iter().map(|x| x * s).collect())
            .collect()
    };
    let add = |a: &Dense, b: &Dense| -> Dense {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
            .collect()
    };

    let (out, rows, ncols) = match rule {
        Rule::V => {
            let vvtv = mul3(&v, &transpose(&v), &v);
            let b = add(&mul3(&v, &transpose(&u), &u), &scale(&v, la));
            let a = scale(&vvtv, 4.0 * al);
            let eight = scale(&vvtv, 8.0 * al);
            let rhs = add(
                &add(&scale(&mul(&d, &v), 2.0 * al), &mul(&transpose(&f), &u)),
                &scale(&mul(&x, &c), la),
            );
            (
                root_rule(&v, &a, &b, &eight, &rhs, guard),
                v.len(),
                cols(&v),
            )
        }
        Rule::U => {
            let num = add(&mul(&f, &v), &mul(&p, &w));
            let den = add(&mul3(&u, &transpose(&v), &v), &u);
            (multiplicative(&u, &num, &den, guard), u.len(), cols(&u))
        }
        Rule::P(i) => {
            if i >= p_views.len() {
                return Err(Error::Shape(format!("view {i} out of range")));
            }
            let rows = data.view_rows(i);
            let u_i: Dense = u[rows].to_vec();
            let pi = &p_views[i];
            let num = add(&mul(&h[i], &x), &mul(&u_i, &transpose(&w)));
            let den = add(&mul3(pi, &transpose(&x), &x), &mul3(pi, &w, &transpose(&w)));
            (multiplicative(pi, &num, &den, guard), pi.len(), cols(pi))
        }
        Rule::X => {
            let mut num = scale(&mul(&v, &transpose(&c)), la);
            let mut den = scale(&mul3(&x, &c, &transpose(&c)), la);
            for (hi, pi) in h.iter().zip(&p_views) {
                num = add(&num, &mul(&transpose(hi), pi));
                den = add(&den, &mul3(&x, &transpose(pi), pi));
            }
            (multiplicative(&x, &num, &den, guard), x.len(), cols(&x))
        }
        Rule::C => {
            let ccc = mul3(&c, &transpose(&c), &c);
            let b = scale(&mul3(&transpose(&x), &x, &c), la);
            let rhs = add(&scale(&c, 2.0 * de), &scale(&mul(&transpose(&x), &v), la));
            let out = root_rule(
                &c,
                &scale(&ccc, 4.0 * de),
                &b,
                &scale(&ccc, 8.0 * de),
                &rhs,
                guard,
            );
            (out, c.len(), cols(&c))
        }
        Rule::W => {
            let www = mul3(&w, &transpose(&w), &w);
            let b = mul3(&transpose(&p), &p, &w);
            let rhs = add(&scale(&w, 2.0 * de), &mul(&transpose(&p), &u));
            let out = root_rule(
                &w,
                &scale(&www, 4.0 * de),
                &b,
                &scale(&www, 8.0 * de),
                &rhs,
                guard,
            );
            (out, w.len(), cols(&w))
        }
    };
    Ok(to_array(out, rows, ncols))
}
