//! Acceptance gate: nine checks covering the loss equivalences, the
//! false-negative probability analysis, gradient correctness through the
//! projector, embedding quality on the synthetic datasets, the hard-negative
//! repulsion signature, metric oracles, and CLI determinism. Each test
//! prints one pass line; a failed assertion marks the criterion failed.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parrep::data::{synth_circle, synth_hierarchy, synth_lineage, Dataset};
use parrep::fnanalysis::{
    crossover_size, fn_prob_mn_closed, fn_prob_mn_closed_rational, fn_prob_mn_hypergeom_rational,
    fn_prob_uniform_rational, monte_carlo_fn,
};
use parrep::losses::{neg_equivalence_kernels, pacmap_pair_loss, Method, PairKind};
use parrep::metrics::{
    centroid_distance_correlation, knn_accuracy, neighbor_kept,
    svm_accuracy, triplet_preservation, SVM_ITERS, SVM_LAMBDA,
};
use parrep::nncore::{kaiming_init, Activation};
use parrep::trainer::{batch_loss_and_grads, fit, TrainConfig};

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Richardson-extrapolated central difference of f at x with step h.
fn richardson(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[test]
fn criterion_1_neg_derivative_identity() {
    let t = Instant::now();
    let grid: Vec<f64> = (0..1000)
        .map(|i| 10f64.powf(6.0 * i as f64 / 999.0))
        .collect();
    let nn_form = |d2: f64| {
        let (q, _) = neg_equivalence_kernels(d2);
        -(q / (1.0 + q)).ln()
    };
    let fp_form = |d2: f64| {
        let (_, q) = neg_equivalence_kernels(d2);
        (1.0 + q).ln()
    };
    let mut max_err = 0f64;
    for &d2 in &grid {
        let h = 1e-4 * d2;
        let (_, d_nn) = pacmap_pair_loss(d2, PairKind::NN).unwrap();
        let (_, d_fp) = pacmap_pair_loss(d2, PairKind::FP).unwrap();
        max_err = max_err.max((richardson(&nn_form, d2, h) - d_nn).abs());
        max_err = max_err.max((richardson(&fp_form, d2, h) - d_fp).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(max_err < 1e-9, "criterion 1: FAIL (max abs err {max_err:.3e})");
    assert!(secs < 1.0, "criterion 1: FAIL (runtime {secs:.2}s >= 1s)");
    println!("criterion 1: PASS (max abs err {max_err:.3e}, {secs:.2}s)");
}

#[test]
fn criterion_2_closed_form_vs_hypergeometric() {
    let t = Instant::now();
    let grid: Vec<u64> = (0..200)
        .map(|i| {
            (16.0 * (1e6f64 / 16.0).powf(i as f64 / 199.0)).round() as u64
        })
        .collect();
    let mut rate_dev = 0f64;
    for &n in &grid {
        let a: BigRational = fn_prob_mn_closed_rational(n).unwrap();
        let b: BigRational = fn_prob_mn_hypergeom_rational(n).unwrap();
        assert_eq!(a, b, "criterion 2: FAIL (rational mismatch at n = {n})");
        if n >= 10_000 {
            let scaled = (n as f64).powi(2) * fn_prob_mn_closed(n).unwrap();
            let dev = (scaled - 1350.0).abs() / 1350.0;
            rate_dev = rate_dev.max(dev);
            assert!(
                dev < 0.05,
                "criterion 2: FAIL (n^2 P = {scaled:.1} at n = {n}, dev {dev:.3})"
            );
        }
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 5.0, "criterion 2: FAIL (runtime {secs:.2}s >= 5s)");
    println!("criterion 2: PASS (200 exact matches, max n^2 P deviation {rate_dev:.4}, {secs:.2}s)");
}

#[test]
fn criterion_3_monte_carlo_vs_closed_form() {
    let t = Instant::now();
    for (n, seed) in [(100u64, 11u64), (1000, 12)] {
        let closed = fn_prob_mn_closed(n).unwrap();
        let mc = monte_carlo_fn(n, 1_000_000, seed).unwrap();
        let dev = (mc.estimate - closed).abs();
        assert!(
            dev <= 3.0 * mc.stderr,
            "criterion 3: FAIL (n = {n}: |{:.3e} - {closed:.3e}| > 3 x {:.3e})",
            mc.estimate,
            mc.stderr
        );
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 30.0, "criterion 3: FAIL (runtime {secs:.2}s >= 30s)");
    println!("criterion 3: PASS (both n within 3 stderr, {secs:.2}s)");
}

#[test]
fn criterion_4_uniform_baseline_and_crossover() {
    for n in [16u64, 100, 1330, 54321, 1_000_000] {
        let p = fn_prob_uniform_rational(n).unwrap();
        let expected = BigRational::new(10.into(), n.into());
        assert_eq!(p, expected, "criterion 4: FAIL (uniform probability at n = {n})");
    }
    let a = crossover_size(1, 1).unwrap();
    let b = crossover_size(1, 1).unwrap();
    assert_eq!(a, b, "criterion 4: FAIL (crossover not stable across runs)");
    let n_star = a.expect("criterion 4: FAIL (no crossover found)");
    println!("criterion 4: PASS (uniform = 10/n exactly, per-sample crossover n* = {n_star})");
}

#[test]
fn criterion_5_projector_gradients_match_finite_differences() {
    let t = Instant::now();
    let n = 64usize;
    let d_in = 20usize;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let x = Array2::from_shape_fn((n, d_in), |_| rng.gen::<f64>() * 2.0 - 1.0);
    let b = 16usize;
    let anchors: Vec<usize> = (0..b).collect();
    let rand_idx = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0..n))
    };
    let nn = rand_idx(&mut rng, b, 2);
    let mn = rand_idx(&mut rng, b, 2);
    let fp = rand_idx(&mut rng, b, 4);
    let weights = (1.0, 0.5, 0.5, 1.0);
    let methods = [
        Method::ParamRepulsor,
        Method::ParamPaCMAP,
        Method::Umap,
        Method::NegTSNE,
        Method::InfoNCTSNE,
        Method::NCVis,
    ];
    let h = 1e-6;
    let mut worst = 0f64;
    for (mi, &method) in methods.iter().enumerate() {
        for &activation in &[Activation::ReLU, Activation::SiLU] {
            if (activation == Activation::SiLU) != (method == Method::ParamRepulsor) {
                continue;
            }
            let mut mlp =
                kaiming_init(&[d_in, 16, 16, 16, 2], activation, 100 + mi as u64).unwrap();
            let loss_of = |mlp: &parrep::nncore::Mlp| -> f64 {
                let (y, _) = mlp.forward(x.view()).unwrap();
                batch_loss_and_grads(method, y.view(), &anchors, &nn, &mn, &fp, weights)
                    .unwrap()
                    .0
            };
            let (y, cache) = mlp.forward(x.view()).unwrap();
            let (_, dl_dy) =
                batch_loss_and_grads(method, y.view(), &anchors, &nn, &mn, &fp, weights).unwrap();
            let grads = mlp.backward(&cache, dl_dy.view()).unwrap();
            for l in 0..mlp.weights.len() {
                let (rows, cols) = mlp.weights[l].dim();
                for i in 0..rows {
                    for j in 0..cols {
                        let orig = mlp.weights[l][(i, j)];
                        mlp.weights[l][(i, j)] = orig + h;
                        let up = loss_of(&mlp);
                        mlp.weights[l][(i, j)] = orig - h;
                        let down = loss_of(&mlp);
                        mlp.weights[l][(i, j)] = orig;
                        let fd = (up - down) / (2.0 * h);
                        let an = grads.weights[l][(i, j)];
                        let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-4);
                        worst = worst.max(rel);
                        assert!(
                            rel < 1e-4,
                            "criterion 5: FAIL ({method:?} W{l}[{i},{j}]: fd {fd:.6e} vs {an:.6e})"
                        );
                    }
                    let orig = mlp.biases[l][i];
                    mlp.biases[l][i] = orig + h;
                    let up = loss_of(&mlp);
                    mlp.biases[l][i] = orig - h;
                    let down = loss_of(&mlp);
                    mlp.biases[l][i] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = grads.biases[l][i];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-4);
                    worst = worst.max(rel);
                    assert!(
                        rel < 1e-4,
                        "criterion 5: FAIL ({method:?} b{l}[{i}]: fd {fd:.6e} vs {an:.6e})"
                    );
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 5: FAIL (runtime {secs:.2}s >= 60s)");
    println!("criterion 5: PASS (worst rel err {worst:.3e} over 6 methods, {secs:.2}s)");
}

#[test]
#[allow(clippy::type_complexity)]
fn criterion_6_synthetic_dataset_accuracy() {
    let cases: [(&str, fn(u64) -> Dataset, f64); 3] = [
        ("lineage", synth_lineage, 0.99),
        ("hierarchy", synth_hierarchy, 0.99),
        ("circle", synth_circle, 0.85),
    ];
    for (name, make, threshold) in cases {
        let mut accs = Vec::new();
        let mut times = Vec::new();
        for seed in 0..3u64 {
            let ds = make(seed);
            let cfg = TrainConfig { seed, ..TrainConfig::default() };
            let t = Instant::now();
            let res = fit(&ds, &cfg).unwrap();
            times.push(t.elapsed().as_secs_f64());
            let (acc, _) =
                knn_accuracy(res.embedding.view(), ds.labels.as_ref().unwrap(), 10).unwrap();
            accs.push(acc);
        }
        let acc = median(&mut accs);
        let secs = median(&mut times);
        assert!(
            acc >= threshold,
            "criterion 6: FAIL ({name}: median 10-NN acc {acc:.4} < {threshold})"
        );
        assert!(
            secs < 600.0,
            "criterion 6: FAIL ({name}: median fit time {secs:.1}s >= 600s)"
        );
        println!("criterion 6: PASS ({name}: median 10-NN acc {acc:.4} >= {threshold}, median fit {secs:.1}s)");
    }
}

fn two_gaussians(n_per: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per;
    let mut x = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i >= n_per) as i64;
        for k in 0..dim {
            let v: f64 = rng.sample(StandardNormal);
            x[(i, k)] = v + if k == 0 { class as f64 * separation } else { 0.0 };
        }
        labels.push(class);
    }
    Dataset::new(x, Some(labels), "two-gaussians").unwrap()
}

fn mean_cross_cluster_distance(y: ArrayView2<f64>, labels: &[i64]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..y.nrows() {
        for j in 0..y.nrows() {
            if labels[i] == 0 && labels[j] == 1 {
                sum += naive_euclid(y.row(i), y.row(j));
                count += 1;
            }
        }
    }
    sum / count as f64
}

#[test]
fn criterion_7_repulsion_strengthening_signature() {
    let ds = two_gaussians(200, 10, 3.0, 5);
    let labels = ds.labels.as_ref().unwrap();
    let mut cross_rep = Vec::new();
    let mut cross_base = Vec::new();
    // Ablation baseline: identical NN and FP losses, mid-near weight zeroed.
    for seed in 0..3u64 {
        for (w_mn, out) in [(1.0, &mut cross_rep), (0.0, &mut cross_base)] {
            let cfg = TrainConfig {
                method: Method::ParamRepulsor,
                w_mn,
                seed,
                ..TrainConfig::default()
            };
            let res = fit(&ds, &cfg).unwrap();
            out.push(mean_cross_cluster_distance(res.embedding.view(), labels));
        }
    }
    let rep = median(&mut cross_rep);
    let base = median(&mut cross_base);
    assert!(
        rep > base,
        "criterion 7: FAIL (mean cross-cluster distance {rep:.3} vs {base:.3} without mid-near repulsion)"
    );
    println!(
        "criterion 7: PASS (median cross-cluster distance {rep:.3} > {base:.3} without mid-near repulsion)"
    );
}

// --- Naive metric oracles for criterion 8 ---

fn naive_euclid(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn naive_knn_sets(y: ArrayView2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = y.nrows();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (naive_euclid(y.row(i), y.row(j)), j))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[..k].iter().map(|&(_, j)| j).collect()
        })
        .collect()
}

fn naive_knn_accuracy(y: ArrayView2<f64>, labels: &[i64], k: usize) -> f64 {
    let neigh = naive_knn_sets(y, k);
    let n = y.nrows();
    let mut correct = 0usize;
    for i in 0..n {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for &j in &neigh[i] {
            *counts.entry(labels[j]).or_insert(0) += 1;
        }
        let max = *counts.values().max().unwrap();
        let tied: Vec<i64> = counts.iter().filter(|(_, &c)| c == max).map(|(&l, _)| l).collect();
        let pred = neigh[i].iter().map(|&j| labels[j]).find(|l| tied.contains(l)).unwrap();
        if pred == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

fn naive_neighbor_kept(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> f64 {
    let nx = naive_knn_sets(x, k);
    let ny = naive_knn_sets(y, k);
    let n = x.nrows();
    let mut total = 0usize;
    for i in 0..n {
        total += ny[i].iter().filter(|j| nx[i].contains(j)).count();
    }
    total as f64 / (n * k) as f64
}

fn naive_triplets(x: ArrayView2<f64>, y: ArrayView2<f64>, per_point: usize, seed: u64) -> f64 {
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preserved = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for _ in 0..per_point {
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
            let dx = naive_euclid(x.row(i), x.row(j)) - naive_euclid(x.row(i), x.row(k));
            let dy = naive_euclid(y.row(i), y.row(j)) - naive_euclid(y.row(i), y.row(k));
            total += 1;
            if dx == 0.0 || dy == 0.0 || (dx > 0.0) == (dy > 0.0) {
                preserved += 1;
            }
        }
    }
    preserved as f64 / total as f64
}

fn naive_ranks(v: &[f64]) -> Vec<f64> {
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

fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = naive_ranks(a);
    let rb = naive_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..ra.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    cov / (va * vb).sqrt()
}

fn naive_centroid_correlation(x: ArrayView2<f64>, y: ArrayView2<f64>, labels: &[i64]) -> f64 {
    let n = x.nrows();
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
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
        let dx: Vec<f64> =
            (0..classes.len()).filter(|&j| j != i).map(|j| dist(&cx[i], &cx[j])).collect();
        let dy: Vec<f64> =
            (0..classes.len()).filter(|&j| j != i).map(|j| dist(&cy[i], &cy[j])).collect();
        rank_x.extend(naive_ranks(&dx));
        rank_y.extend(naive_ranks(&dy));
    }
    naive_spearman(&rank_x, &rank_y)
}

fn naive_svm_accuracy(y: ArrayView2<f64>, labels: &[i64], folds: usize, seed: u64) -> f64 {
    let n = y.nrows();
    let d = y.ncols();
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut fold_of = vec![0usize; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &class in &classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        for (pos, &idx) in members.iter().enumerate() {
            fold_of[idx] = pos % folds;
        }
    }
    let train_one = |train: &[usize], targets: &[f64]| -> (Vec<f64>, f64) {
        let nt = train.len() as f64;
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
                w[c] -= lr * (SVM_LAMBDA * w[c] - gw[c] / nt);
            }
            b += lr * gb / nt;
        }
        (w, b)
    };
    let mut correct = 0usize;
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let mut models = Vec::new();
        for &class in &classes {
            let targets: Vec<f64> = train
                .iter()
                .map(|&i| if labels[i] == class { 1.0 } else { -1.0 })
                .collect();
            models.push(train_one(&train, &targets));
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
    correct as f64 / n as f64
}

#[test]
fn criterion_8_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for instance in 0..50u64 {
        let n = rng.gen_range(60..=200);
        let dx = rng.gen_range(2..=4);
        let dy = 2;
        let x = Array2::from_shape_fn((n, dx), |_| rng.gen::<f64>());
        // Embedding: noisy projection of the first two input columns.
        let y = Array2::from_shape_fn((n, dy), |(i, c)| x[(i, c)] + 0.1 * rng.gen::<f64>());
        let labels: Vec<i64> = (0..n).map(|i| (i % 3) as i64).collect();
        let seed = instance;

        let (acc, _) = knn_accuracy(y.view(), &labels, 10).unwrap();
        assert_eq!(
            acc,
            naive_knn_accuracy(y.view(), &labels, 10),
            "criterion 8: FAIL (knn mismatch, instance {instance})"
        );

        let kept = neighbor_kept(x.view(), y.view(), 30).unwrap();
        assert_eq!(
            kept,
            naive_neighbor_kept(x.view(), y.view(), 30),
            "criterion 8: FAIL (neighbor-kept mismatch, instance {instance})"
        );

        let (trip, _) = triplet_preservation(x.view(), y.view(), 5, seed).unwrap();
        assert_eq!(
            trip,
            naive_triplets(x.view(), y.view(), 5, seed),
            "criterion 8: FAIL (triplet mismatch, instance {instance})"
        );

        let rho = centroid_distance_correlation(x.view(), y.view(), &labels).unwrap();
        assert_eq!(
            rho,
            naive_centroid_correlation(x.view(), y.view(), &labels),
            "criterion 8: FAIL (centroid correlation mismatch, instance {instance})"
        );

        let svm = svm_accuracy(y.view(), &labels, 5, seed).unwrap();
        assert_eq!(
            svm,
            naive_svm_accuracy(y.view(), &labels, 5, seed),
            "criterion 8: FAIL (svm mismatch, instance {instance})"
        );
    }
    println!("criterion 8: PASS (all five metrics exact on 50 instances)");
}

#[test]
fn criterion_9_cli_fit_determinism_across_thread_counts() {
    let dir = std::env::temp_dir().join("parrep_acceptance_c9");
    std::fs::create_dir_all(&dir).unwrap();
    let data_path = dir.join("blobs.csv");
    let mut csv = String::from("x0,x1,x2,x3,x4,label\n");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..240 {
        let class = (i >= 120) as i64;
        let shift = class as f64 * 8.0;
        for k in 0..5 {
            let v: f64 = rng.gen::<f64>() + if k == 0 { shift } else { 0.0 };
            csv.push_str(&format!("{v:.17e},"));
        }
        csv.push_str(&format!("{class}\n"));
    }
    std::fs::write(&data_path, csv).unwrap();
    let config_path = dir.join("run.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{"data": {:?}, "label_column": "label", "method": "paramrepulsor",
                "n_epochs": 5, "seed": 7, "out_dir": "unused"}}"#,
            data_path
        ),
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_parrep");
    let run = |out: &std::path::Path, threads: &str| {
        let status = Command::new(bin)
            .args(["fit", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .env("PARREP_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success(), "criterion 9: FAIL (fit exited nonzero)");
        std::fs::read(out.join("embedding.csv")).unwrap()
    };
    let a = run(&dir.join("run_a"), "1");
    let b = run(&dir.join("run_b"), "1");
    let c = run(&dir.join("run_c"), "4");
    assert_eq!(a, b, "criterion 9: FAIL (same thread count, different bytes)");
    assert_eq!(a, c, "criterion 9: FAIL (thread count changed the bytes)");
    println!("criterion 9: PASS (byte-identical embeddings with 1 and 4 threads)");
    std::fs::remove_dir_all(&dir).ok();
}
