//! Pair construction: exact k-NN graph, precomputed mid-near (hard negative)
//! indices, and per-batch uniform further-pair sampling.
//!
//! Mid-near selection follows the detailed training pseudocode: draw 6
//! distinct points, keep the second closest to the anchor. Per-anchor RNG
//! streams make the precomputation independent of worker count.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MIDNEAR_DRAWS: usize = 6;

/// NN and MN index tables plus the per-batch further-pair count.
#[derive(Debug, Clone)]
pub struct PairSet {
    /// n x n_nb, rows sorted by ascending distance, ties by ascending index.
    pub nn_idx: Array2<usize>,
    /// n x n_mn, precomputed once before training.
    pub mn_idx: Array2<usize>,
    /// Further pairs sampled per anchor per batch.
    pub n_fp: usize,
}

impl PairSet {
    pub fn build(x: ArrayView2<f64>, n_nb: usize, n_mn: usize, n_fp: usize, seed: u64) -> Result<Self> {
        Ok(PairSet {
            nn_idx: build_knn_exact(x, n_nb)?,
            mn_idx: precompute_midnears(x, n_mn, seed)?,
            n_fp,
        })
    }
}

fn sq_dist(x: ArrayView2<f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (x.row(i), x.row(j));
    let mut acc = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        acc += d * d;
    }
    acc
}

/// Exact Euclidean k-NN per row, self excluded, deterministic ordering
/// (ascending distance, ties broken by ascending index).
pub fn build_knn_exact(x: ArrayView2<f64>, n_nb: usize) -> Result<Array2<usize>> {
    let n = x.nrows();
    if n_nb == 0 {
        return Err(Error::InvalidArgument("n_nb must be >= 1".into()));
    }
    if n <= n_nb {
        return Err(Error::DatasetTooSmall { need: n_nb + 1, have: n });
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(x, i, j), j))
                .collect();
            // Selection by partial sort keeps the O(n log k) path obvious.
            dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            dists.truncate(n_nb);
            dists.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut out = Array2::zeros((n, n_nb));
    for (i, row) in rows.into_iter().enumerate() {
        for (k, j) in row.into_iter().enumerate() {
            out[(i, k)] = j;
        }
    }
    Ok(out)
}

/// Draws 6 distinct indices (none equal to the anchor) uniformly without
/// replacement and returns the second closest to the anchor.
pub fn sample_midnear<R: Rng>(x: ArrayView2<f64>, anchor: usize, rng: &mut R) -> Result<usize> {
    let n = x.nrows();
    if n < MIDNEAR_DRAWS + 1 {
        return Err(Error::DatasetTooSmall { need: MIDNEAR_DRAWS + 1, have: n });
    }
    let mut picks: Vec<usize> = Vec::with_capacity(MIDNEAR_DRAWS);
    while picks.len() < MIDNEAR_DRAWS {
        let j = rng.gen_range(0..n);
        if j != anchor && !picks.contains(&j) {
            picks.push(j);
        }
    }
    let mut ranked: Vec<(f64, usize)> = picks
        .into_iter()
        .map(|j| (sq_dist(x, anchor, j), j))
        .collect();
    ranked.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ranked[1].1)
}

/// Applies `sample_midnear` n_mn times per anchor, once before training.
/// Each anchor gets its own RNG stream so the result does not depend on the
/// worker count.
pub fn precompute_midnears(x: ArrayView2<f64>, n_mn: usize, seed: u64) -> Result<Array2<usize>> {
    let n = x.nrows();
    if n < MIDNEAR_DRAWS + 1 {
        return Err(Error::DatasetTooSmall { need: MIDNEAR_DRAWS + 1, have: n });
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            (0..n_mn)
                .map(|_| sample_midnear(x, i, &mut rng).expect("n checked above"))
                .collect()
        })
        .collect();
    let mut out = Array2::zeros((n, n_mn));
    for (i, row) in rows.into_iter().enumerate() {
        for (k, j) in row.into_iter().enumerate() {
            out[(i, k)] = j;
        }
    }
    Ok(out)
}

/// For each anchor, draws `n_fp` indices uniformly from [0, n) excluding
/// only the anchor itself; fresh every batch.
pub fn sample_fp_batch<R: Rng>(
    n: usize,
    anchors: &[usize],
    n_fp: usize,
    rng: &mut R,
) -> Result<Array2<usize>> {
    if n < 2 {
        return Err(Error::DatasetTooSmall { need: 2, have: n });
    }
    let mut out = Array2::zeros((anchors.len(), n_fp));
    for (r, &a) in anchors.iter().enumerate() {
        for c in 0..n_fp {
            loop {
                let j = rng.gen_range(0..n);
                if j != a {
                    out[(r, c)] = j;
                    break;
                }
            }
        }
    }
    Ok(out)
}
