//! Embedding evaluation: 10-NN accuracy, linear-SVM cross-validation
//! accuracy, 30-NN kept ratio, random triplet preservation, centroid
//! distance rank correlation, and the NN/MN/FP scaled pair-distance
//! analysis.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::ArrayView2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pairs::{build_knn_exact, sample_midnear};

pub const DEFAULT_KNN_K: usize = 10;
pub const DEFAULT_NEIGHBOR_KEPT_K: usize = 30;
pub const DEFAULT_TRIPLETS_PER_POINT: usize = 5;
pub const DEFAULT_SVM_FOLDS: usize = 5;
pub const SVM_LAMBDA: f64 = 1e-4;
pub const SVM_ITERS: usize = 10_000;

/// Named metric values plus the parameters they were computed with.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MetricReport {
    pub values: BTreeMap<String, f64>,
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn insert(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k}\t{v:.6}")?;
        }
        for (k, v) in &self.params {
            writeln!(f, "param.{k}\t{v}")?;
        }
        for n in &self.notes {
            writeln!(f, "note\t{n}")?;
        }
        Ok(())
    }
}

fn euclid(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Leave-one-out k-NN classification accuracy in the embedding. Majority
/// ties are broken by the nearest neighbor whose label is in the tied set.
/// A single-class input scores 1.0 and sets the warning flag.
pub fn knn_accuracy(y: ArrayView2<f64>, labels: &[i64], k: usize) -> Result<(f64, bool)> {
    let n = y.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
            context: "labels".into(),
        });
    }
    if n <= k {
        return Err(Error::DatasetTooSmall { need: k + 1, have: n });
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Ok((1.0, true));
    }
    let nn = build_knn_exact(y, k)?;
    let mut correct = 0usize;
    for i in 0..n {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for &j in nn.row(i) {
            *counts.entry(labels[j]).or_insert(0) += 1;
        }
        let max_count = *counts.values().max().unwrap();
        let tied: Vec<i64> = counts
            .iter()
            .filter(|(_, &c)| c == max_count)
            .map(|(&l, _)| l)
            .collect();
        let predicted = if tied.len() == 1 {
            tied[0]
        } else {
            // Nearest neighbor whose label is among the tied labels.
            nn.row(i)
                .iter()
                .map(|&j| labels[j])
                .find(|l| tied.contains(l))
                .unwrap()
        };
        if predicted == labels[i] {
            correct += 1;
        }
    }
    Ok((correct as f64 / n as f64, false))
}

/// Mean overlap between the k-NN sets of the original space and the
/// embedding.
pub fn neighbor_kept(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.nrows(),
            context: "embedding rows".into(),
        });
    }
    if n <= k {
        return Err(Error::DatasetTooSmall { need: k + 1, have: n });
    }
    let nn_x = build_knn_exact(x, k)?;
    let nn_y = build_knn_exact(y, k)?;
    let mut total = 0usize;
    for i in 0..n {
        let set: std::collections::HashSet<usize> = nn_x.row(i).iter().copied().collect();
        total += nn_y.row(i).iter().filter(|j| set.contains(j)).count();
    }
    Ok(total as f64 / (n * k) as f64)
}

/// Fraction of random triplets (i, j, k) whose distance-order sign is the
/// same in both spaces; exact ties count as preserved. The flag marks a
/// constant (degenerate) embedding.
pub fn triplet_preservation(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    triplets_per_point: usize,
    seed: u64,
) -> Result<(f64, bool)> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.nrows(),
            context: "embedding rows".into(),
        });
    }
    if n < 3 {
        return Err(Error::DatasetTooSmall { need: 3, have: n });
    }
    let first = y.row(0);
    let degenerate = y.outer_iter().all(|r| r == first);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preserved = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for _ in 0..triplets_per_point {
            let j = loop {
                let j = rng.gen_range(0..n);
                if j != i {
                    break j;
                }
            };
            let k = loop {
                let k = rng.gen_range(0..n);
                if k != i && k != j {
                    break k;
                }
            };
            let dx = euclid(x.row(i), x.row(j)) - euclid(x.row(i), x.row(k));
            let dy = euclid(y.row(i), y.row(j)) - euclid(y.row(i), y.row(k));
            total += 1;
            if dx == 0.0 || dy == 0.0 || (dx > 0.0) == (dy > 0.0) {
                preserved += 1;
            }
        }
    }
    Ok((preserved as f64 / total as f64, degenerate))
}

/// Average ranks, ties sharing the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs two equal-length vectors".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InvalidArgument("constant rank vector".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Spearman correlation of concatenated per-centroid distance rankings
/// between the two spaces.
pub fn centroid_distance_correlation(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    labels: &[i64],
) -> Result<f64> {
    let n = x.nrows();
    if labels.len() != n || y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len().min(y.nrows()),
            context: "labels/embedding rows".into(),
        });
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 classes".into()));
    }
    let centroid = |m: ArrayView2<f64>, class: i64| -> Vec<f64> {
        let mut c = vec![0.0; m.ncols()];
        let mut count = 0usize;
        for i in 0..n {
            if labels[i] == class {
                for (k, v) in c.iter_mut().enumerate() {
                    *v += m[(i, k)];
                }
                count += 1;
            }
        }
        c.iter_mut().for_each(|v| *v /= count as f64);
        c
    };
    let cx: Vec<Vec<f64>> = classes.iter().map(|&c| centroid(x, c)).collect();
    let cy: Vec<Vec<f64>> = classes.iter().map(|&c| centroid(y, c)).collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let mut rank_x = Vec::new();
    let mut rank_y = Vec::new();
    for i in 0..classes.len() {
        let dx: Vec<f64> = (0..classes.len()).filter(|&j| j != i).map(|j| dist(&cx[i], &cx[j])).collect();
        let dy: Vec<f64> = (0..classes.len()).filter(|&j| j != i).map(|j| dist(&cy[i], &cy[j])).collect();
        rank_x.extend(average_ranks(&dx));
        rank_y.extend(average_ranks(&dy));
    }
    spearman(&rank_x, &rank_y)
}

/// One-vs-rest linear SVM trained by deterministic full-batch subgradient
/// descent on the hinge loss, evaluated with stratified k-fold CV.
pub fn svm_accuracy(y: ArrayView2<f64>, labels: &[i64], folds: usize, seed: u64) -> Result<f64> {
    let n = y.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
            context: "labels".into(),
        });
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("svm needs at least 2 classes".into()));
    }
    // Stratified fold assignment: shuffle within class, deal round-robin.
    let mut fold_of = vec![0usize; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &class in &classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} members, needs >= {folds}",
                members.len()
            )));
        }
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        for (pos, &idx) in members.iter().enumerate() {
            fold_of[idx] = pos % folds;
        }
    }
    let d = y.ncols();
    let mut correct = 0usize;
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        // One weight vector + bias per class.
        let mut models: Vec<(Vec<f64>, f64)> = Vec::with_capacity(classes.len());
        for &class in &classes {
            let targets: Vec<f64> = train
                .iter()
                .map(|&i| if labels[i] == class { 1.0 } else { -1.0 })
                .collect();
            models.push(train_linear_svm(y, &train, &targets, d));
        }
        for &i in &test {
            let mut best = (f64::NEG_INFINITY, classes[0]);
            for (ci, (w, b)) in models.iter().enumerate() {
                let mut score = *b;
                for c in 0..d {
                    score += w[c] * y[(i, c)];
                }
                if score > best.0 {
                    best = (score, classes[ci]);
                }
            }
            if best.1 == labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / n as f64)
}

fn train_linear_svm(
    y: ArrayView2<f64>,
    train: &[usize],
    targets: &[f64],
    d: usize,
) -> (Vec<f64>, f64) {
    let n = train.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for t in 0..SVM_ITERS {
        let lr = 1.0 / (SVM_LAMBDA * (t as f64 + 1.0));
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (pos, &i) in train.iter().enumerate() {
            let mut margin = b;
            for c in 0..d {
                margin += w[c] * y[(i, c)];
            }
            if targets[pos] * margin < 1.0 {
                for c in 0..d {
                    gw[c] += targets[pos] * y[(i, c)];
                }
                gb += targets[pos];
            }
        }
        for c in 0..d {
            w[c] -= lr * (SVM_LAMBDA * w[c] - gw[c] / n);
        }
        b += lr * gb / n;
    }
    (w, b)
}

/// NN/MN/FP scaled-distance samples between two classes of an embedding.
#[derive(Debug, Clone, Serialize)]
pub struct PairDistanceReport {
    pub nn: Vec<f64>,
    pub mn: Vec<f64>,
    pub fp: Vec<f64>,
    /// mean(FP) / mean(NN) and mean(MN) / mean(NN); None when the
    /// embedding is degenerate (zero scale).
    pub fp_nn_ratio: Option<f64>,
    pub mn_nn_ratio: Option<f64>,
    pub degenerate: bool,
}

/// Samples NN (10-NN), MN (mid-near procedure) and FP (uniform) pairs from
/// the points of two classes, scales embedded distances by the RMS pairwise
/// distance of the sampled pool, and reports FP/NN and MN/NN mean ratios.
pub fn pair_distance_report(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    labels: &[i64],
    class_pair: (i64, i64),
    n_samples: usize,
    seed: u64,
) -> Result<PairDistanceReport> {
    let n = x.nrows();
    if labels.len() != n || y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len().min(y.nrows()),
            context: "labels/embedding rows".into(),
        });
    }
    let subset: Vec<usize> = (0..n)
        .filter(|&i| labels[i] == class_pair.0 || labels[i] == class_pair.1)
        .collect();
    for class in [class_pair.0, class_pair.1] {
        if !subset.iter().any(|&i| labels[i] == class) {
            return Err(Error::InvalidArgument(format!("class {class} absent")));
        }
    }
    let m = subset.len();
    if m < 12 {
        return Err(Error::DatasetTooSmall { need: 12, have: m });
    }
    let xs = x.select(ndarray::Axis(0), &subset);
    let ys = y.select(ndarray::Axis(0), &subset);
    let k = DEFAULT_KNN_K.min(m - 1);
    let nn_idx = build_knn_exact(xs.view(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nn_pairs = Vec::with_capacity(n_samples);
    let mut mn_pairs = Vec::with_capacity(n_samples);
    let mut fp_pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = rng.gen_range(0..m);
        let j = nn_idx[(a, rng.gen_range(0..k))];
        nn_pairs.push((a, j));
        let a = rng.gen_range(0..m);
        mn_pairs.push((a, sample_midnear(xs.view(), a, &mut rng)?));
        let a = rng.gen_range(0..m);
        let j = loop {
            let j = rng.gen_range(0..m);
            if j != a {
                break j;
            }
        };
        fp_pairs.push((a, j));
    }
    // Scale: RMS pairwise embedded distance over the pool of sampled
    // endpoints.
    let mut pool: Vec<usize> = nn_pairs
        .iter()
        .chain(&mn_pairs)
        .chain(&fp_pairs)
        .flat_map(|&(a, b)| [a, b])
        .collect();
    pool.sort_unstable();
    pool.dedup();
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    for (ai, &a) in pool.iter().enumerate() {
        for &b in &pool[ai + 1..] {
            let d = euclid(ys.row(a), ys.row(b));
            sq_sum += d * d;
            count += 1;
        }
    }
    let rms = if count > 0 { (sq_sum / count as f64).sqrt() } else { 0.0 };
    let degenerate = rms == 0.0;
    let dists = |pairs: &[(usize, usize)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(a, b)| {
                let d = euclid(ys.row(a), ys.row(b));
                if degenerate {
                    d
                } else {
                    d / rms
                }
            })
            .collect()
    };
    let nn = dists(&nn_pairs);
    let mn = dists(&mn_pairs);
    let fp = dists(&fp_pairs);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (fp_nn_ratio, mn_nn_ratio) = if degenerate || mean(&nn) == 0.0 {
        (None, None)
    } else {
        (Some(mean(&fp) / mean(&nn)), Some(mean(&mn) / mean(&nn)))
    };
    Ok(PairDistanceReport { nn, mn, fp, fp_nn_ratio, mn_nn_ratio, degenerate })
}
