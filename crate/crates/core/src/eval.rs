//! Hard cluster extraction and partition scoring (NMI, matched accuracy).

use log::warn;
use ndarray::Array2;
use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::Serialize;

use crate::error::{Error, Result};

/// A hard partition of `N` vertices into `K` clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k_clusters: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k_clusters: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k_clusters) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {k_clusters} clusters"
            )));
        }
        Ok(ClusterAssignment { labels, k_clusters })
    }

    /// Uses `max(label) + 1` as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k_clusters = labels.iter().max().map_or(0, |m| m + 1);
        ClusterAssignment { labels, k_clusters }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k_clusters(&self) -> usize {
        self.k_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Row-wise argmax of the membership matrix, ties going to the smallest
/// column. Also returns how many rows were entirely zero (those get
/// cluster 0).
pub fn extract_clusters(v: &Array2<f64>) -> Result<(ClusterAssignment, usize)> {
    if v.ncols() == 0 {
        return Err(Error::Shape("membership matrix has no columns".into()));
    }
    let mut zero_rows = 0;
    let labels = v
        .rows()
        .into_iter()
        .map(|row| {
            if row.iter().all(|&x| x == 0.0) {
                zero_rows += 1;
            }
            let mut best = 0;
            for (k, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    if zero_rows > 0 {
        warn!("{zero_rows} vertex/vertices with all-zero membership assigned to cluster 0");
    }
    Ok((
        ClusterAssignment {
            labels,
            k_clusters: v.ncols(),
        },
        zero_rows,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub nmi: f64,
    pub accuracy: f64,
    /// Rows are predicted clusters, columns are truth classes.
    pub contingency: Vec<Vec<usize>>,
    pub n_scored: usize,
}

fn scored_pairs(pred: &ClusterAssignment, truth: &[Option<usize>]) -> Result<Vec<(usize, usize)>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predicted labels but {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    let pairs: Vec<_> = pred
        .labels()
        .iter()
        .zip(truth)
        .filter_map(|(&p, t)| t.map(|t| (p, t)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Validation("no vertex has a truth label".into()));
    }
    Ok(pairs)
}

fn contingency(pairs: &[(usize, usize)], rows: usize) -> Vec<Vec<usize>> {
    let rows = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0).max(rows);
    let cols = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    let mut table = vec![vec![0; cols]; rows];
    for &(a, b) in pairs {
        table[a][b] += 1;
    }
    table
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// True when each row and each column has at most one nonzero cell, i.e.
/// the two partitions agree up to relabeling.
fn is_relabeling(table: &[Vec<usize>]) -> bool {
    let cols = table.first().map_or(0, Vec::len);
    let row_ok = table
        .iter()
        .all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
    let col_ok = (0..cols).all(|j| table.iter().filter(|r| r[j] > 0).count() <= 1);
    row_ok && col_ok
}

fn nmi_from_table(table: &[Vec<usize>]) -> f64 {
    if is_relabeling(table) {
        return 1.0;
    }
    let n: usize = table.iter().flatten().sum();
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let h = 0.5 * (entropy(&rows, n) + entropy(&cols, n));
    if h == 0.0 {
        return 0.0;
    }
    // Terms are summed in sorted order so that transposing the table gives a
    // bit-identical result.
    let mut terms: Vec<f64> = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate().filter(|(_, &c)| c > 0) {
            let ratio = (n * nij) as f64 / (rows[i] * cols[j]) as f64;
            terms.push(nij as f64 / n as f64 * ratio.ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    (mi / h).clamp(0.0, 1.0)
}

/// NMI between two label vectors of equal length, normalized by the
/// arithmetic mean of the two entropies (natural logs). Exactly symmetric.
pub fn partition_nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} labels", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Validation("empty partitions".into()));
    }
    let pairs: Vec<_> = a.iter().copied().zip(b.iter().copied()).collect();
    Ok(nmi_from_table(&contingency(&pairs, 0)))
}

/// NMI of `pred` against `truth`, skipping vertices whose truth is `None`.
pub fn nmi(pred: &ClusterAssignment, truth: &[Option<usize>]) -> Result<f64> {
    let pairs = scored_pairs(pred, truth)?;
    Ok(nmi_from_table(&contingency(&pairs, pred.k_clusters())))
}

fn best_matching(table: &[Vec<usize>]) -> usize {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let weights = if rows <= cols {
        Matrix::from_fn(rows, cols, |(i, j)| table[i][j] as i64)
    } else {
        Matrix::from_fn(cols, rows, |(i, j)| table[j][i] as i64)
    };
    kuhn_munkres(&weights).0 as usize
}

/// Largest fraction of scored vertices labeled correctly under a one-to-one
/// mapping of predicted clusters onto truth classes.
pub fn matched_accuracy(pred: &ClusterAssignment, truth: &[Option<usize>]) -> Result<f64> {
    let pairs = scored_pairs(pred, truth)?;
    let table = contingency(&pairs, pred.k_clusters());
    Ok(best_matching(&table) as f64 / pairs.len() as f64)
}

pub fn evaluate(pred: &ClusterAssignment, truth: &[Option<usize>]) -> Result<EvalReport> {
    let pairs = scored_pairs(pred, truth)?;
    let table = contingency(&pairs, pred.k_clusters());
    Ok(EvalReport {
        nmi: nmi_from_table(&table),
        accuracy: best_matching(&table) as f64 / pairs.len() as f64,
        n_scored: pairs.len(),
        contingency: table,
    })
}
