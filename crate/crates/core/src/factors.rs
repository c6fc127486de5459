//! Hyperparameters, latent factor matrices and their text container.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 5.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 1e5;
pub const DEFAULT_T_MAX: usize = 300;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 20240611;

/// How the convergence threshold is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMode {
    /// Stop when the decrease is at most `epsilon` times the initial
    /// penalized objective.
    Relative,
    /// Stop when the decrease is at most `epsilon`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of the structural reconstruction term.
    pub alpha: f64,
    /// Weight of the `X C ~ V` coupling.
    pub lambda: f64,
    /// Orthogonality penalty on `C` and `W`.
    pub delta: f64,
    pub k_clusters: usize,
    pub s_dim: usize,
    pub t_max: usize,
    pub epsilon: f64,
    pub epsilon_mode: EpsilonMode,
    pub seed: u64,
}

impl Hyperparams {
    /// Defaults for `k` clusters, with `S = K`.
    pub fn new(k_clusters: usize) -> Self {
        Hyperparams {
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            delta: DEFAULT_DELTA,
            k_clusters,
            s_dim: k_clusters,
            t_max: DEFAULT_T_MAX,
            epsilon: DEFAULT_EPSILON,
            epsilon_mode: EpsilonMode::Relative,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg("alpha", self.alpha)?;
        nonneg("lambda", self.lambda)?;
        nonneg("delta", self.delta)?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Validation(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.k_clusters < 2 {
            return Err(Error::Validation("k must be at least 2".into()));
        }
        if self.s_dim < 1 {
            return Err(Error::Validation("s must be at least 1".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Validation("t_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Shapes of every factor matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorDims {
    pub n_vertices: usize,
    pub view_sizes: Vec<usize>,
    pub k_clusters: usize,
    pub s_dim: usize,
}

impl FactorDims {
    pub fn n_features(&self) -> usize {
        self.view_sizes.iter().sum()
    }
}

/// The six nonnegative factor blocks.
///
/// `v` is `N x K` cluster membership, `u` is `M x K` feature-cluster
/// contribution, `x` is `N x S` vertex propagation preference, `p_views[i]`
/// is `M^i x S` per-view feature propagation contribution, and `c`, `w` are
/// `S x K` couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub v: Array2<f64>,
    pub u: Array2<f64>,
    pub x: Array2<f64>,
    pub p_views: Vec<Array2<f64>>,
    pub c: Array2<f64>,
    pub w: Array2<f64>,
}

impl LatentFactors {
    /// All-zero factors of the given shape.
    pub fn zeros(dims: &FactorDims) -> Self {
        let (n, m, k, s) = (
            dims.n_vertices,
            dims.n_features(),
            dims.k_clusters,
            dims.s_dim,
        );
        LatentFactors {
            v: Array2::zeros((n, k)),
            u: Array2::zeros((m, k)),
            x: Array2::zeros((n, s)),
            p_views: dims
                .view_sizes
                .iter()
                .map(|&mi| Array2::zeros((mi, s)))
                .collect(),
            c: Array2::zeros((s, k)),
            w: Array2::zeros((s, k)),
        }
    }

    pub fn dims(&self) -> FactorDims {
        FactorDims {
            n_vertices: self.v.nrows(),
            view_sizes: self.p_views.iter().map(|p| p.nrows()).collect(),
            k_clusters: self.v.ncols(),
            s_dim: self.x.ncols(),
        }
    }

    /// `P = [P^1; ...; P^D]`.
    pub fn stacked_p(&self) -> Array2<f64> {
        let views: Vec<_> = self.p_views.iter().map(|p| p.view()).collect();
        concatenate(Axis(0), &views).expect("view blocks share S columns")
    }

    /// Every block with its container name, in serialization order.
    pub fn blocks(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("V".to_string(), &self.v),
            ("U".to_string(), &self.u),
            ("X".to_string(), &self.x),
        ];
        for (i, p) in self.p_views.iter().enumerate() {
            out.push((format!("P{}", i + 1), p));
        }
        out.push(("C".to_string(), &self.c));
        out.push(("W".to_string(), &self.w));
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, m)| m.iter().all(|&v| v >= 0.0))
    }

    pub fn check_shapes(&self) -> Result<()> {
        let dims = self.dims();
        let (n, m, k, s) = (
            dims.n_vertices,
            dims.n_features(),
            dims.k_clusters,
            dims.s_dim,
        );
        let expect = [
            ("U", &self.u, (m, k)),
            ("X", &self.x, (n, s)),
            ("C", &self.c, (s, k)),
            ("W", &self.w, (s, k)),
        ];
        for (name, mat, shape) in expect {
            if mat.dim() != shape {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, expected {shape:?}",
                    mat.dim()
                )));
            }
        }
        if let Some((i, p)) = self
            .p_views
            .iter()
            .enumerate()
            .find(|(_, p)| p.ncols() != s)
        {
            return Err(Error::Shape(format!(
                "P{} has {} columns, expected {s}",
                i + 1,
                p.ncols()
            )));
        }
        Ok(())
    }

    /// Serializes to the text container: a `viewprop-factors 1` line, then
    /// per block a `matrix <name> <rows> <cols>` line followed by one line
    /// of space-separated values per row. Values round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("viewprop-factors 1\n");
        for (name, m) in self.blocks() {
            writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
            for row in m.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<factors>".into(),
            line,
            message: msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "viewprop-factors 1")) => {}
            _ => return Err(bad(1, "missing \"viewprop-factors 1\" header".into())),
        }
        let mut blocks: Vec<(String, Array2<f64>)> = Vec::new();
        while let Some((ln, header)) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let f: Vec<_> = header.split_whitespace().collect();
            if f.len() != 4 || f[0] != "matrix" {
                return Err(bad(ln, format!("expected matrix header, got {header:?}")));
            }
            let rows: usize = f[2].parse().map_err(|_| bad(ln, "bad row count".into()))?;
            let cols: usize = f[3]
                .parse()
                .map_err(|_| bad(ln, "bad column count".into()))?;
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = lines
                    .next()
                    .ok_or_else(|| bad(ln, format!("truncated matrix {}", f[1])))?;
                let before = values.len();
                for tok in row.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| bad(ln, format!("bad value {tok:?}")))?;
                    values.push(v);
                }
                if values.len() - before != cols {
                    return Err(bad(ln, format!("expected {cols} values")));
                }
            }
            let m = Array2::from_shape_vec((rows, cols), values).expect("counted");
            blocks.push((f[1].to_string(), m));
        }

        let mut take = |name: &str| -> Result<Array2<f64>> {
            let pos = blocks
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::Shape(format!("container has no block {name}")))?;
            Ok(blocks.remove(pos).1)
        };
        let v = take("V")?;
        let u = take("U")?;
        let x = take("X")?;
        let c = take("C")?;
        let w = take("W")?;
        let mut p_views = Vec::new();
        while let Ok(p) = take(&format!("P{}", p_views.len() + 1)) {
            p_views.push(p);
        }
        let factors = LatentFactors {
            v,
            u,
            x,
            p_views,
            c,
            w,
        };
        factors.check_shapes()?;
        Ok(factors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Random strictly positive initialization, fully determined by `seed`.
///
/// Entries are uniform on `(0, 1]`, scaled by `1/sqrt(K)` for `V`, `U`, `C`,
/// `W` and by `1/sqrt(S)` for `X` and the `P^i`. Draw order: V, U, X, P^1..P^D,
/// C, W.
pub fn init_factors(dims: &FactorDims, seed: u64) -> Result<LatentFactors> {
    let (n, m, k, s) = (
        dims.n_vertices,
        dims.n_features(),
        dims.k_clusters,
        dims.s_dim,
    );
    if n == 0 || m == 0 || k == 0 || s == 0 || dims.view_sizes.contains(&0) {
        return Err(Error::Shape(format!("zero factor dimension in {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_scale = 1.0 / (k as f64).sqrt();
    let s_scale = 1.0 / (s as f64).sqrt();
    let mut draw = |shape: (usize, usize), scale: f64| {
        Array2::from_shape_simple_fn(shape, || (1.0 - rng.random::<f64>()) * scale)
    };
    let v = draw((n, k), k_scale);
    let u = draw((m, k), k_scale);
    let x = draw((n, s), s_scale);
    let p_views = dims
        .view_sizes
        .iter()
        .map(|&mi| draw((mi, s), s_scale))
        .collect();
    let c = draw((s, k), k_scale);
    let w = draw((s, k), k_scale);
    Ok(LatentFactors {
        v,
        u,
        x,
        p_views,
        c,
        w,
    })
}
