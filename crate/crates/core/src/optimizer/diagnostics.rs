use ndarray::Array2;

use crate::factors::{Hyperparams, LatentFactors};
use crate::model::ModelData;

/// Gradient of the unified objective with respect to `V`:
/// `4a VV^TV - 4a DV + 2l V + 2 VU^TU - 2 F^TU - 2l XC`.
pub fn v_gradient(factors: &LatentFactors, data: &ModelData, hp: &Hyperparams) -> Array2<f64> {
    let f = factors;
    let dv: Array2<f64> = data.weights() * &f.v;
    let ftu: Array2<f64> = data.features_t() * &f.u;
    let vvtv = f.v.dot(&f.v.t().dot(&f.v));
    (vvtv - dv) * (4.0 * hp.alpha) + &f.v * (2.0 * hp.lambda) + f.v.dot(&f.u.t().dot(&f.u)) * 2.0
        - ftu * 2.0
        - f.x.dot(&f.c) * (2.0 * hp.lambda)
}

/// Largest `|dO/dV_jk|` over entries with `V_jk > rho`, divided by the largest
/// gradient magnitude over all entries. Zero at an exact KKT point.
pub fn v_stationarity_residual(
    factors: &LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
    rho: f64,
) -> f64 {
    let g = v_gradient(factors, data, hp);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    g.iter()
        .zip(factors.v.iter())
        .filter(|(_, &v)| v > rho)
        .fold(0.0f64, |m, (g, _)| m.max(g.abs()))
        / scale
}

/// The `U` update multipliers `[FV + PW] / [UV^TV + U]` for entries with
/// `U_jk > rho`. All equal 1 at a fixed point.
pub fn u_fixed_point_ratios(factors: &LatentFactors, data: &ModelData, rho: f64) -> Vec<f64> {
    let f = factors;
    let fv: Array2<f64> = data.features() * &f.v;
    let num = fv + f.stacked_p().dot(&f.w);
    let den = f.u.dot(&f.v.t().dot(&f.v)) + &f.u;
    f.u.iter()
        .zip(num.iter().zip(den.iter()))
        .filter(|(&u, _)| u > rho)
        .map(|(_, (n, d))| n / d)
        .collect()
}

/// Mean over nonzero rows of `max(row) / ||row||_2`. Equals 1 when every row
/// has a single nonzero entry and `1/sqrt(cols)` for constant rows.
pub fn row_peakedness(m: &Array2<f64>) -> f64 {
    let scores: Vec<f64> = m
        .rows()
        .into_iter()
        .filter_map(|row| {
            let norm = row.dot(&row).sqrt();
            (norm > 0.0).then(|| row.fold(f64::MIN, |a, &b| a.max(b)) / norm)
        })
        .collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}
