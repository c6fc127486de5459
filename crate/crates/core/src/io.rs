//! Plain-text dataset formats.
//!
//! * Edge file: one edge per line, two whitespace-separated 0-based vertex
//!   indices. Lines starting with `#` and blank lines are ignored.
//! * View file: a header line `M N`, then one `feature vertex value` triple
//!   per line (0-based coordinates). Omitted entries are zero.
//! * Label file: one integer per line, line number = vertex index. A
//!   negative value marks a vertex without a label.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::graph::{EdgeCleanup, MultiViewGraph};

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject feature values other than 0 and 1.
    pub strict_binary: bool,
    /// Vertex count to use when no view file fixes it.
    pub n_vertices: Option<usize>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct LineParser<'a> {
    path: &'a Path,
    line: usize,
}

impl LineParser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn fields<'t>(&self, text: &'t str, expected: usize) -> Result<Vec<&'t str>> {
        let fields: Vec<_> = text.split_whitespace().collect();
        if fields.len() != expected {
            return Err(self.error(format!(
                "expected {expected} fields, found {}",
                fields.len()
            )));
        }
        Ok(fields)
    }

    fn parse<T: FromStr>(&self, token: &str, what: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.error(format!("invalid {what} {token:?}")))
    }

    fn value(&self, token: &str) -> Result<f64> {
        let v: f64 = self.parse(token, "value")?;
        if !v.is_finite() || v < 0.0 {
            return Err(self.error(format!("value {token:?} must be finite and nonnegative")));
        }
        Ok(v)
    }
}

pub fn read_edge_file(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = read(path)?;
    data_lines(&text)
        .map(|(line, l)| {
            let p = LineParser { path, line };
            let f = p.fields(l, 2)?;
            Ok((
                p.parse(f[0], "vertex index")?,
                p.parse(f[1], "vertex index")?,
            ))
        })
        .collect()
}

/// Reads an `M x N` sparse feature matrix. Duplicate coordinates are an error.
pub fn read_view_file(path: impl AsRef<Path>) -> Result<CsMat<f64>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = data_lines(&text);
    let (line, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "missing \"M N\" header".into(),
    })?;
    let p = LineParser { path, line };
    let h = p.fields(header, 2)?;
    let rows: usize = p.parse(h[0], "feature count")?;
    let cols: usize = p.parse(h[1], "vertex count")?;

    let mut seen = std::collections::HashSet::new();
    let mut tri = TriMat::new((rows, cols));
    for (line, l) in lines {
        let p = LineParser { path, line };
        let f = p.fields(l, 3)?;
        let feature: usize = p.parse(f[0], "feature index")?;
        let vertex: usize = p.parse(f[1], "vertex index")?;
        let value = p.value(f[2])?;
        if feature >= rows {
            return Err(p.error(format!("feature index {feature} >= {rows}")));
        }
        if vertex >= cols {
            return Err(Error::Bounds {
                index: vertex,
                n_vertices: cols,
                context: format!("{}:{line}", path.display()),
            });
        }
        if !seen.insert((feature, vertex)) {
            return Err(p.error(format!("duplicate entry ({feature}, {vertex})")));
        }
        if value != 0.0 {
            tri.add_triplet(feature, vertex, value);
        }
    }
    Ok(tri.to_csr())
}

/// Reads labels; negative entries become `None`.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Option<usize>>> {
    let path = path.as_ref();
    let text = read(path)?;
    data_lines(&text)
        .map(|(line, l)| {
            let p = LineParser { path, line };
            let f = p.fields(l, 1)?;
            let v: i64 = p.parse(f[0], "label")?;
            Ok(usize::try_from(v).ok())
        })
        .collect()
}

/// Loads and validates a multi-view graph.
///
/// The vertex count comes from the view headers (which must agree), falling
/// back to `options.n_vertices` and then to the largest edge index + 1.
pub fn load_graph<P: AsRef<Path>>(
    edge_path: impl AsRef<Path>,
    view_paths: &[P],
    options: LoadOptions,
) -> Result<(MultiViewGraph, EdgeCleanup)> {
    let edges = read_edge_file(edge_path)?;
    let views = view_paths
        .iter()
        .map(read_view_file)
        .collect::<Result<Vec<_>>>()?;

    let n_vertices = match views.first() {
        Some(first) => {
            if let Some((i, v)) = views
                .iter()
                .enumerate()
                .find(|(_, v)| v.cols() != first.cols())
            {
                return Err(Error::Shape(format!(
                    "view {} declares {} vertices, view 1 declares {}",
                    i + 1,
                    v.cols(),
                    first.cols()
                )));
            }
            first.cols()
        }
        None => options
            .n_vertices
            .unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0)),
    };

    let (graph, cleanup) = MultiViewGraph::build(n_vertices, &edges, views)?;
    if options.strict_binary {
        graph.require_binary_features()?;
    }
    Ok((graph, cleanup))
}

/// Writes each undirected edge once, smaller index first.
pub fn write_edge_file(path: impl AsRef<Path>, graph: &MultiViewGraph) -> Result<()> {
    let mut out = String::new();
    for i in 0..graph.n_vertices() {
        for &j in graph.neighbors(i).iter().filter(|&&j| j > i) {
            writeln!(out, "{i} {j}").unwrap();
        }
    }
    write(path.as_ref(), &out)
}

pub fn write_view_file(path: impl AsRef<Path>, features: &CsMat<f64>) -> Result<()> {
    let mut out = format!("{} {}\n", features.rows(), features.cols());
    let csr = features.to_csr();
    for (row, vec) in csr.outer_iterator().enumerate() {
        for (col, v) in vec.iter() {
            writeln!(out, "{row} {col} {v}").unwrap();
        }
    }
    write(path.as_ref(), &out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(out, "{l}").unwrap();
    }
    write(path.as_ref(), &out)
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub views: Vec<PathBuf>,
    pub labels: PathBuf,
}

/// Writes `edges.txt`, `view_<i>.txt` and `labels.txt` into `dir`.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    graph: &MultiViewGraph,
    labels: &[usize],
) -> Result<DatasetPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths {
        edges: dir.join("edges.txt"),
        views: (1..=graph.views().len())
            .map(|i| dir.join(format!("view_{i}.txt")))
            .collect(),
        labels: dir.join("labels.txt"),
    };
    write_edge_file(&paths.edges, graph)?;
    for (view, path) in graph.views().iter().zip(&paths.views) {
        write_view_file(path, view.matrix())?;
    }
    write_labels(&paths.labels, labels)?;
    Ok(paths)
}
