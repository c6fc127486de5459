use std::fmt;

use ndarray::{s, Array2, Zip};

use crate::error::{Error, Result};
use crate::factors::{Hyperparams, LatentFactors};
use crate::model::ModelData;

/// Safeguards applied inside every update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardPolicy {
    /// Added to every nonzero denominator.
    pub denom_floor: f64,
    /// Clamp square-root arguments at zero.
    pub clamp_negative_radicand: bool,
}

impl Default for GuardPolicy {
    fn default() -> Self {
        GuardPolicy {
            denom_floor: 1e-12,
            clamp_negative_radicand: true,
        }
    }
}

impl GuardPolicy {
    /// Multiplier `num / (den + floor)`; an exactly zero denominator keeps
    /// the entry unchanged.
    #[inline]
    pub(crate) fn ratio(&self, num: f64, den: f64) -> f64 {
        if den == 0.0 {
            1.0
        } else {
            num / (den + self.denom_floor)
        }
    }

    #[inline]
    pub(crate) fn sqrt(&self, x: f64) -> f64 {
        if self.clamp_negative_radicand {
            x.max(0.0).sqrt()
        } else {
            x.sqrt()
        }
    }
}

/// Which factor an update rule targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    V,
    U,
    /// `P^i` for the given 0-based view.
    P(usize),
    X,
    C,
    W,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::V => write!(f, "V"),
            Rule::U => write!(f, "U"),
            Rule::P(i) => write!(f, "P{}", i + 1),
            Rule::X => write!(f, "X"),
            Rule::C => write!(f, "C"),
            Rule::W => write!(f, "W"),
        }
    }
}

fn ensure_finite(rule: Rule, m: Array2<f64>) -> Result<Array2<f64>> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::non_finite(format!("update of {rule}")))
    }
}

/// `base * num / den`, elementwise.
fn multiplicative(
    rule: Rule,
    base: &Array2<f64>,
    num: &Array2<f64>,
    den: &Array2<f64>,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let mut out = base.clone();
    Zip::from(&mut out)
        .and(num)
        .and(den)
        .for_each(|o, &n, &d| *o *= guard.ratio(n, d));
    ensure_finite(rule, out)
}

/// Square-root rule shared by `V`, `C` and `W`. With `a = 4 w [M M^T M]`
/// (`w` the quartic weight), `b` the quadratic part and `c` the gradient's
/// negative part, the multiplier is
///
/// `sqrt((sqrt(b^2 + 2 a c) - b) / a)`,
///
/// evaluated as `sqrt(2 c / (sqrt(b^2 + 2 a c) + b))`. The two are equal
/// whenever `a > 0`; the second avoids cancellation when `a c << b^2` and
/// reduces to the plain `sqrt(c / b)` rule when the quartic weight is zero.
fn root_rule(
    rule: Rule,
    base: &Array2<f64>,
    a: &Array2<f64>,
    b: &Array2<f64>,
    c: &Array2<f64>,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let mut out = base.clone();
    Zip::from(&mut out)
        .and(a)
        .and(b)
        .and(c)
        .for_each(|o, &a, &b, &c| {
            let root = guard.sqrt(b * b + 2.0 * a * c);
            *o *= guard.sqrt(guard.ratio(2.0 * c, root + b));
        });
    ensure_finite(rule, out)
}

/// Update for the cluster membership `V`.
pub fn update_v(
    factors: &LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let f = factors;
    let vvtv = f.v.dot(&f.v.t().dot(&f.v));
    let a = vvtv * (4.0 * hp.alpha);
    let b = f.v.dot(&f.u.t().dot(&f.u)) + &f.v * hp.lambda;
    let dv: Array2<f64> = data.weights() * &f.v;
    let ftu: Array2<f64> = data.features_t() * &f.u;
    let c = dv * (2.0 * hp.alpha) + ftu + f.x.dot(&f.c) * hp.lambda;
    root_rule(Rule::V, &f.v, &a, &b, &c, guard)
}

/// Update for the feature-cluster contribution `U`.
pub fn update_u(
    factors: &LatentFactors,
    data: &ModelData,
    _hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let f = factors;
    let fv: Array2<f64> = data.features() * &f.v;
    let num = fv + f.stacked_p().dot(&f.w);
    let den = f.u.dot(&f.v.t().dot(&f.v)) + &f.u;
    multiplicative(Rule::U, &f.u, &num, &den, guard)
}

/// Update for the propagation contribution `P^i` of one view (0-based).
pub fn update_p(
    factors: &LatentFactors,
    data: &ModelData,
    _hp: &Hyperparams,
    guard: &GuardPolicy,
    view: usize,
) -> Result<Array2<f64>> {
    let f = factors;
    if view >= f.p_views.len() || view >= data.n_views() {
        return Err(Error::Shape(format!(
            "view {view} out of range for {} views",
            f.p_views.len()
        )));
    }
    let p = &f.p_views[view];
    let u_view = f.u.slice(s![data.view_rows(view), ..]);
    let hx: Array2<f64> = &data.propagated()[view] * &f.x;
    let num = hx + u_view.dot(&f.w.t());
    let gram = f.x.t().dot(&f.x) + f.w.dot(&f.w.t());
    let den = p.dot(&gram);
    multiplicative(Rule::P(view), p, &num, &den, guard)
}

/// Update for the vertex propagation preference `X`.
pub fn update_x(
    factors: &LatentFactors,
    data: &ModelData,
    hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let f = factors;
    let mut num = f.v.dot(&f.c.t()) * hp.lambda;
    let mut gram = f.c.dot(&f.c.t()) * hp.lambda;
    for (ht, p) in data.propagated_t().iter().zip(&f.p_views) {
        let htp: Array2<f64> = ht * p;
        num += &htp;
        gram += &p.t().dot(p);
    }
    let den = f.x.dot(&gram);
    multiplicative(Rule::X, &f.x, &num, &den, guard)
}

/// Update for the coupling `C` under the relaxed orthogonality penalty.
pub fn update_c(
    factors: &LatentFactors,
    hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let f = factors;
    let a = f.c.dot(&f.c.t().dot(&f.c)) * (4.0 * hp.delta);
    let b = f.x.t().dot(&f.x).dot(&f.c) * hp.lambda;
    let c = &f.c * (2.0 * hp.delta) + f.x.t().dot(&f.v) * hp.lambda;
    root_rule(Rule::C, &f.c, &a, &b, &c, guard)
}

/// Update for the coupling `W` under the relaxed orthogonality penalty.
pub fn update_w(
    factors: &LatentFactors,
    hp: &Hyperparams,
    guard: &GuardPolicy,
) -> Result<Array2<f64>> {
    let f = factors;
    let p = f.stacked_p();
    let a = f.w.dot(&f.w.t().dot(&f.w)) * (4.0 * hp.delta);
    let b = p.t().dot(&p).dot(&f.w);
    let c = &f.w * (2.0 * hp.delta) + p.t().dot(&f.u);
    root_rule(Rule::W, &f.w, &a, &b, &c, guard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{oracle_update, random_instance};
    use ndarray::array;

    const ALL: [Rule; 6] = [Rule::V, Rule::U, Rule::P(0), Rule::X, Rule::C, Rule::W];

    fn apply(
        rule: Rule,
        f: &LatentFactors,
        data: &ModelData,
        hp: &Hyperparams,
        g: &GuardPolicy,
    ) -> Array2<f64> {
        match rule {
            Rule::V => update_v(f, data, hp, g),
            Rule::U => update_u(f, data, hp, g),
            Rule::P(i) => update_p(f, data, hp, g, i),
            Rule::X => update_x(f, data, hp, g),
            Rule::C => update_c(f, hp, g),
            Rule::W => update_w(f, hp, g),
        }
        .unwrap()
    }

    fn max_rel(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
            .fold(0.0, f64::max)
    }

    #[test]
    fn vectorized_rules_match_loop_oracle() {
        let g = GuardPolicy::default();
        for seed in 0..6 {
            let inst = random_instance(seed, 4 + seed as usize, &[3, 2], 2, 2).unwrap();
            let mut hp = Hyperparams::new(2);
            hp.alpha = 0.5 + seed as f64;
            hp.delta = [10.0, 1e5][seed as usize % 2];
            for rule in ALL.into_iter().chain([Rule::P(1)]) {
                let fast = apply(rule, &inst.factors, &inst.data, &hp, &g);
                let slow = oracle_update(rule, &inst.factors, &inst.data, &hp, &g).unwrap();
                assert!(max_rel(&fast, &slow) < 1e-10, "{rule} seed {seed}");
            }
        }
    }

    #[test]
    fn zero_entries_are_absorbing() {
        let inst = random_instance(3, 6, &[4], 3, 2).unwrap();
        let mut f = inst.factors.clone();
        f.v[[1, 2]] = 0.0;
        f.u[[0, 0]] = 0.0;
        f.p_views[0][[3, 1]] = 0.0;
        f.x[[5, 0]] = 0.0;
        f.c[[1, 1]] = 0.0;
        f.w[[0, 2]] = 0.0;
        let hp = Hyperparams::new(3);
        let g = GuardPolicy::default();
        assert_eq!(apply(Rule::V, &f, &inst.data, &hp, &g)[[1, 2]], 0.0);
        assert_eq!(apply(Rule::U, &f, &inst.data, &hp, &g)[[0, 0]], 0.0);
        assert_eq!(apply(Rule::P(0), &f, &inst.data, &hp, &g)[[3, 1]], 0.0);
        assert_eq!(apply(Rule::X, &f, &inst.data, &hp, &g)[[5, 0]], 0.0);
        assert_eq!(apply(Rule::C, &f, &inst.data, &hp, &g)[[1, 1]], 0.0);
        assert_eq!(apply(Rule::W, &f, &inst.data, &hp, &g)[[0, 2]], 0.0);
    }

    #[test]
    fn outputs_stay_nonnegative() {
        let g = GuardPolicy::default();
        for seed in 10..14 {
            let inst = random_instance(seed, 7, &[2, 3, 2], 3, 3).unwrap();
            let hp = Hyperparams::new(3);
            for rule in ALL.into_iter().chain([Rule::P(1), Rule::P(2)]) {
                assert!(apply(rule, &inst.factors, &inst.data, &hp, &g)
                    .iter()
                    .all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn u_is_unchanged_at_its_fixed_point() {
        // With F = 0 and P W = U V^T V + U the multiplier is exactly one.
        let n = 3;
        let zero = sprs::CsMat::csr_from_dense(Array2::<f64>::zeros((2, n)).view(), 0.0);
        let data = ModelData::from_parts(
            vec![zero.clone()],
            vec![zero],
            sprs::CsMat::csr_from_dense(Array2::<f64>::eye(n).view(), 0.0),
        )
        .unwrap();
        let v = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let u = array![[0.5, 0.25], [1.0, 2.0]];
        let w: Array2<f64> = Array2::eye(2);
        let p = u.dot(&v.t().dot(&v)) + &u;
        let f = LatentFactors {
            v,
            u: u.clone(),
            x: Array2::ones((n, 2)),
            p_views: vec![p],
            c: Array2::eye(2),
            w,
        };
        let out = update_u(&f, &data, &Hyperparams::new(2), &GuardPolicy::default()).unwrap();
        assert!(max_rel(&out, &u) < 1e-10);
    }

    #[test]
    fn p_denominator_identity_case() {
        // W W^T = I and X^T X = I: the denominator is P (X^T X + I) = 2 P.
        let inst = random_instance(5, 4, &[3], 2, 2).unwrap();
        let mut f = inst.factors.clone();
        f.w = Array2::eye(2);
        f.x = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let g = GuardPolicy {
            denom_floor: 0.0,
            ..GuardPolicy::default()
        };
        let out = update_p(&f, &inst.data, &Hyperparams::new(2), &g, 0).unwrap();
        let hx: Array2<f64> = &inst.data.propagated()[0] * &f.x;
        let num = hx + f.u.slice(s![0..3, ..]).dot(&f.w.t());
        let expect = &f.p_views[0] * &num / (&f.p_views[0] * 2.0);
        assert!(max_rel(&out, &expect) < 1e-12);
    }

    #[test]
    fn x_without_lambda_ignores_coupling() {
        let inst = random_instance(6, 5, &[2, 2], 2, 3).unwrap();
        let mut hp = Hyperparams::new(2);
        hp.lambda = 0.0;
        let g = GuardPolicy::default();
        let base = update_x(&inst.factors, &inst.data, &hp, &g).unwrap();
        let mut f = inst.factors.clone();
        f.v *= 7.0;
        f.c *= 3.0;
        assert_eq!(update_x(&f, &inst.data, &hp, &g).unwrap(), base);
    }

    #[test]
    fn w_drift_shrinks_as_delta_grows() {
        let inst = random_instance(8, 6, &[4], 2, 2).unwrap();
        let mut f = inst.factors.clone();
        // Near row-orthonormal W.
        f.w = array![[0.98, 0.05], [0.03, 1.01]];
        let g = GuardPolicy::default();
        let step = |delta: f64| {
            let mut hp = Hyperparams::new(2);
            hp.delta = delta;
            let w = update_w(&f, &hp, &g).unwrap();
            (&w - &f.w).iter().map(|d| d * d).sum::<f64>().sqrt()
        };
        let (coarse, fine) = (step(1e3), step(1e5));
        assert!(fine < coarse, "{fine} vs {coarse}");
    }

    #[test]
    fn zero_denominator_keeps_entry() {
        let g = GuardPolicy::default();
        assert_eq!(g.ratio(0.0, 0.0), 1.0);
        assert_eq!(g.ratio(3.0, 0.0), 1.0);
        assert!((g.ratio(2.0, 4.0) - 0.5).abs() < 1e-12);
        assert_eq!(g.sqrt(-1.0), 0.0);
    }

    #[test]
    fn root_rule_matches_literal_form() {
        let g = GuardPolicy {
            denom_floor: 0.0,
            ..GuardPolicy::default()
        };
        let base = array![[1.0, 2.0]];
        let a = array![[3.0, 0.5]];
        let b = array![[0.7, 4.0]];
        let c = array![[2.0, 9.0]];
        let out = root_rule(Rule::V, &base, &a, &b, &c, &g).unwrap();
        for j in 0..2 {
            let (a, b, c) = (a[[0, j]], b[[0, j]], c[[0, j]]);
            let literal = base[[0, j]] * (((b * b + 2.0 * a * c).sqrt() - b) / a).sqrt();
            assert!((out[[0, j]] - literal).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_quartic_weight_gives_plain_root() {
        let inst = random_instance(12, 5, &[3], 2, 2).unwrap();
        let f = &inst.factors;
        let mut hp = Hyperparams::new(2);
        hp.alpha = 0.0;
        hp.delta = 0.0;
        let g = GuardPolicy {
            denom_floor: 0.0,
            ..GuardPolicy::default()
        };

        let b = f.v.dot(&f.u.t().dot(&f.u)) + &f.v * hp.lambda;
        let ftu: Array2<f64> = inst.data.features_t() * &f.u;
        let c = ftu + f.x.dot(&f.c) * hp.lambda;
        let expect = &f.v * &(c / b).mapv(f64::sqrt);
        assert!(max_rel(&update_v(f, &inst.data, &hp, &g).unwrap(), &expect) < 1e-12);

        let b = f.x.t().dot(&f.x).dot(&f.c) * hp.lambda;
        let c = f.x.t().dot(&f.v) * hp.lambda;
        let expect = &f.c * &(c / b).mapv(f64::sqrt);
        assert!(max_rel(&update_c(f, &hp, &g).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn rule_names() {
        let names: Vec<String> = [Rule::V, Rule::P(0), Rule::P(2), Rule::W]
            .iter()
            .map(|r| r.to_string())
            .collect();
        assert_eq!(names, ["V", "P1", "P3", "W"]);
    }
}
