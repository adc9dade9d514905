//! Dense reference implementations and fixtures shared by the integration
//! tests. Everything here is written with plain loops over `Vec<Vec<f64>>`
//! so it shares no code with the library kernels.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use ndarray::Array2;
use ppgnn::data::SparseAdjacency;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn to_array(d: &Dense) -> Array2<f64> {
    let cols = d.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((d.len(), cols), |(i, j)| d[i][j])
}

pub fn from_array(a: &Array2<f64>) -> Dense {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Random undirected graph without self-loops.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SparseAdjacency {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    SparseAdjacency::from_undirected_edges(n, &edges).unwrap()
}

/// 0/1 dense matrix of a pattern.
pub fn dense_pattern(a: &SparseAdjacency) -> Dense {
    let mut d = vec![vec![0.0; a.num_cols()]; a.num_rows()];
    for (i, j) in a.iter() {
        d[i][j] = 1.0;
    }
    d
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols)
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn add_bias(a: &Dense, b: &[f64]) -> Dense {
    a.iter()
        .map(|r| r.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn relu(a: &Dense) -> Dense {
    a.iter()
        .map(|r| r.iter().map(|&v| v.max(0.0)).collect())
        .collect()
}

/// `D⁻¹(A + I)` with the diagonal set, not incremented.
pub fn row_stochastic_with_loops(a: &SparseAdjacency) -> Dense {
    let mut d = dense_pattern(a);
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 1.0;
        let deg: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= deg;
        }
    }
    d
}

/// `D^{-1/2}(A ∪ Aᵀ ∪ I)D^{-1/2}`
pub fn gcn_dense(a: &SparseAdjacency) -> Dense {
    let n = a.num_rows();
    let mut d = dense_pattern(a);
    for i in 0..n {
        for j in 0..n {
            if d[i][j] == 1.0 {
                d[j][i] = 1.0;
            }
        }
        d[i][i] = 1.0;
    }
    let deg: Vec<f64> = d.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            d[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    d
}

pub fn kernel(z: &Dense, cols: &[usize], t: f64) -> Dense {
    z.iter()
        .map(|zi| {
            cols.iter()
                .map(|&c| {
                    let d2: f64 = zi.iter().zip(&z[c]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2 / t).exp()
                })
                .collect()
        })
        .collect()
}

/// `Λ⁻¹AᵀU` with `Λ⁻¹ = 0` for empty columns.
pub fn aggregate_dense(sel: &Dense, u: &Dense) -> Dense {
    let st = transpose(sel);
    let mut v = matmul(&st, u);
    for (row, srow) in v.iter_mut().zip(&st) {
        let count: f64 = srow.iter().sum();
        for x in row.iter_mut() {
            *x = if count > 0.0 { *x / count } else { 0.0 };
        }
    }
    v
}

/// `Δ⁻¹AV`
pub fn broadcast_dense(sel: &Dense, v: &Dense) -> Dense {
    let mut u = matmul(sel, v);
    for (row, srow) in u.iter_mut().zip(sel) {
        let count: f64 = srow.iter().sum();
        for x in row.iter_mut() {
            *x /= count;
        }
    }
    u
}

/// `‖a − b‖∞ / ‖b‖∞`
pub fn rel_err(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len(), "row count");
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len(), "column count");
        for (x, y) in ra.iter().zip(rb) {
            diff = diff.max((x - y).abs());
            scale = scale.max(y.abs());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Softmax cross-entropy without max-shift, averaged over `nodes`.
pub fn cross_entropy(logits: &Dense, labels: &[usize], nodes: &[usize]) -> f64 {
    let total: f64 = nodes
        .iter()
        .map(|&i| {
            let z: f64 = logits[i].iter().map(|v| v.exp()).sum();
            -(logits[i][labels[i]].exp() / z).ln()
        })
        .sum();
    total / nodes.len() as f64
}

/// Mean and standard deviation of a Bernoulli(p) frequency over `n` draws.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
