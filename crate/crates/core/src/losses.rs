//! Pair and batch losses with analytic derivatives in `d2`, the squared
//! embedded distance plus one: PaCMAP, ParamRepulsor, UMAP (NEG),
//! Neg-t-SNE, Info-NC-t-SNE (InfoNCE), NCVis (NCE), plus the generalized-NEG
//! kernels that reproduce the PaCMAP pair losses.
//!
//! All derivatives returned here are with respect to `d2`. Callers chain
//! through `d d2 / d y = 2 (y_i - y_j)`.

use ndarray::{Array2, Array3, ArrayView1, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attraction constant in the NN kernel.
pub const C1: f64 = 10.0;
/// Repulsion constant in the FP kernel.
pub const C2: f64 = 1.0;
/// Saturation constant for the mid-near attraction phase.
pub const C_MN_ATTRACT: f64 = 10_000.0;
/// Clamp for the UMAP squared distance (q = 1/(d2-1) is singular at d2 = 1).
pub const EPS_D: f64 = 1e-6;
/// Clamp for the NCE probability, keeping both logs finite.
pub const EPS_P: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ParamRepulsor,
    ParamPaCMAP,
    Umap,
    NegTSNE,
    InfoNCTSNE,
    NCVis,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "paramrepulsor" | "repulsor" | "p-rep" => Ok(Method::ParamRepulsor),
            "parampacmap" | "pacmap" | "p-pacmap" => Ok(Method::ParamPaCMAP),
            "umap" | "p-umap" => Ok(Method::Umap),
            "negtsne" | "neg-t-sne" | "p-ntsne" => Ok(Method::NegTSNE),
            "infonctsne" | "info-nc-t-sne" | "p-itsne" => Ok(Method::InfoNCTSNE),
            "ncvis" | "p-ncvis" => Ok(Method::NCVis),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    NN,
    FP,
}

/// Squared Euclidean distance plus one.
pub fn dist2(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        acc += d * d;
    }
    acc + 1.0
}

/// PaCMAP pair losses: NN `d2/(d2+10)`, FP `1/(d2+1)`.
pub fn pacmap_pair_loss(d2: f64, kind: PairKind) -> Result<(f64, f64)> {
    if d2 < 1.0 {
        return Err(Error::InvalidArgument(format!("d2 = {d2} < 1")));
    }
    Ok(match kind {
        PairKind::NN => (d2 / (d2 + C1), C1 / ((d2 + C1) * (d2 + C1))),
        PairKind::FP => (1.0 / (d2 + C2), -1.0 / ((d2 + C2) * (d2 + C2))),
    })
}

/// Saturating mid-near attraction `d2/(d2 + 10000)` used by the ParamPaCMAP
/// schedule's early phases.
pub fn pacmap_mn_attract_loss(d2: f64) -> (f64, f64) {
    let denom = d2 + C_MN_ATTRACT;
    (d2 / denom, C_MN_ATTRACT / (denom * denom))
}

/// ParamRepulsor repulsion term `-d2/(1+d2)` applied to both MN and FP
/// pairs; its derivative `-1/(1+d2)^2` is identical to the PaCMAP FP
/// derivative.
pub fn repulsor_repulsion_loss(d2: f64) -> (f64, f64) {
    let denom = 1.0 + d2;
    (-d2 / denom, -1.0 / (denom * denom))
}

/// UMAP NEG losses with kernel q = 1/(d2 - 1); the squared distance
/// u = d2 - 1 is clamped to EPS_D.
pub fn umap_pair_loss(d2: f64, kind: PairKind) -> (f64, f64) {
    let u = d2 - 1.0;
    let (uc, clamped) = if u < EPS_D { (EPS_D, true) } else { (u, false) };
    match kind {
        PairKind::NN => ((1.0 + uc).ln(), if clamped { 0.0 } else { 1.0 / (1.0 + uc) }),
        PairKind::FP => (
            ((uc + 1.0) / uc).ln(),
            if clamped { 0.0 } else { -1.0 / (uc * (uc + 1.0)) },
        ),
    }
}

/// Neg-t-SNE: NEG with the Cauchy kernel q = 1/d2.
pub fn negtsne_pair_loss(d2: f64, kind: PairKind) -> (f64, f64) {
    match kind {
        PairKind::NN => ((1.0 + d2).ln(), 1.0 / (1.0 + d2)),
        PairKind::FP => ((1.0 + d2).ln() - d2.ln(), 1.0 / (1.0 + d2) - 1.0 / d2),
    }
}

/// Info-NC-t-SNE batch term for one NN pair against m negatives:
/// `-log(1/d2_nn) + log(1/d2_nn + sum_c 1/d2_fp_c)`.
///
/// Returns `(loss, d/d d2_nn, d/d d2_fp)`.
pub fn infonce_tsne_batch_loss(d2_nn: f64, d2_fp: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if d2_fp.is_empty() {
        return Err(Error::InvalidArgument("InfoNCE needs m >= 1 negatives".into()));
    }
    let q_nn = 1.0 / d2_nn;
    let s: f64 = q_nn + d2_fp.iter().map(|&d| 1.0 / d).sum::<f64>();
    let loss = d2_nn.ln() + s.ln();
    let d_nn = 1.0 / d2_nn - q_nn * q_nn / s;
    let d_fp = d2_fp.iter().map(|&d| -1.0 / (d * d * s)).collect();
    Ok((loss, d_nn, d_fp))
}

/// NCVis NCE batch term. With T = sum_c d2_nn/d2_fp_c and P = 1/(1+T), the
/// loss is `-(log P - m log(1 - P))`, with P clamped away from {0, 1}.
pub fn nce_ncvis_batch_loss(d2_nn: f64, d2_fp: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if d2_fp.is_empty() {
        return Err(Error::InvalidArgument("NCE needs m >= 1 negatives".into()));
    }
    let m = d2_fp.len() as f64;
    let t: f64 = d2_fp.iter().map(|&d| d2_nn / d).sum();
    let p = (1.0 / (1.0 + t)).clamp(EPS_P, 1.0 - EPS_P);
    let loss = -(p.ln() - m * (1.0 - p).ln());
    // dL/dT for L = (1-m) ln(1+T) + m ln T.
    let dl_dt = (1.0 - m) / (1.0 + t) + m / t;
    let d_nn = dl_dt * d2_fp.iter().map(|&d| 1.0 / d).sum::<f64>();
    let d_fp = d2_fp
        .iter()
        .map(|&d| dl_dt * (-d2_nn / (d * d)))
        .collect();
    Ok((loss, d_nn, d_fp))
}

/// Generalized-NEG similarity kernels whose NEG pair terms reproduce the
/// PaCMAP NN/FP losses up to an additive constant.
///
/// `q_nn = exp(-d2/(d2+C1)) / (1 - exp(-d2/(d2+C1)))`, so that
/// `-log(q_nn/(1+q_nn)) = d2/(d2+C1)`;
/// `q_fp = (1 - exp(s))/exp(s)` with `s = d2/(d2+C2)`, so that
/// `-log(1/(1+q_fp)) = -s`.
pub fn neg_equivalence_kernels(d2: f64) -> (f64, f64) {
    let e_nn = (-d2 / (d2 + C1)).exp();
    let q_nn = e_nn / (1.0 - e_nn);
    let s = d2 / (d2 + C2);
    let q_fp = (1.0 - s.exp()) / s.exp();
    (q_nn, q_fp)
}

/// The NEG pair terms built from the equivalence kernels, with derivatives in
/// d2: NN `-log(q_nn/(1+q_nn))`, FP `-log(1/(1+q_fp))`.
pub fn neg_equivalence_losses(d2: f64) -> ((f64, f64), (f64, f64)) {
    // -log(q_nn/(1+q_nn)) simplifies to d2/(d2+C1).
    let nn = (d2 / (d2 + C1), C1 / ((d2 + C1) * (d2 + C1)));
    // -log(1/(1+q_fp)) simplifies to -d2/(d2+C2).
    let fp = (-d2 / (d2 + C2), -C2 / ((d2 + C2) * (d2 + C2)));
    (nn, fp)
}

/// ParamRepulsor batch loss over explicit coordinates, with gradients
/// flowing to both endpoints of every pair.
///
/// Shapes: `y` is (b, d); `y_nn`, `y_mn`, `y_fp` are (b, k, d).
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn parrep_batch_loss(
    y: ArrayView2<f64>,
    y_nn: ArrayView3<f64>,
    y_mn: ArrayView3<f64>,
    y_fp: ArrayView3<f64>,
    w_nb: f64,
    w_mn: f64,
    w_fp: f64,
) -> Result<(f64, Array2<f64>, Array3<f64>, Array3<f64>, Array3<f64>)> {
    let (b, d) = y.dim();
    for (name, dim) in [("y_nn", y_nn.dim()), ("y_mn", y_mn.dim()), ("y_fp", y_fp.dim())] {
        if dim.0 != b || dim.2 != d {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: dim.0,
                context: format!("{name} batch shape"),
            });
        }
    }
    if w_nb < 0.0 || w_mn < 0.0 || w_fp < 0.0 {
        return Err(Error::InvalidArgument("negative loss weight".into()));
    }
    let mut loss = 0.0;
    let mut g_y = Array2::zeros(y.dim());
    let mut g_nn = Array3::zeros(y_nn.dim());
    let mut g_mn = Array3::zeros(y_mn.dim());
    let mut g_fp = Array3::zeros(y_fp.dim());

    let accumulate = |pairs: &ArrayView3<f64>,
                          grads: &mut Array3<f64>,
                          g_y: &mut Array2<f64>,
                          weight: f64,
                          loss: &mut f64,
                          attract: bool| {
        for k in 0..b {
            for t in 0..pairs.dim().1 {
                let other = pairs.slice(ndarray::s![k, t, ..]);
                let d2 = dist2(y.row(k), other);
                let (l, dl_dd2) = if attract {
                    let denom = C1 + d2;
                    (d2 / denom, C1 / (denom * denom))
                } else {
                    repulsor_repulsion_loss(d2)
                };
                *loss += weight * l;
                let g = weight * dl_dd2 * 2.0;
                for c in 0..d {
                    let diff = y[(k, c)] - other[c];
                    g_y[(k, c)] += g * diff;
                    grads[(k, t, c)] -= g * diff;
                }
            }
        }
    };
    accumulate(&y_nn, &mut g_nn, &mut g_y, w_nb, &mut loss, true);
    accumulate(&y_mn, &mut g_mn, &mut g_y, w_mn, &mut loss, false);
    accumulate(&y_fp, &mut g_fp, &mut g_y, w_fp, &mut loss, false);
    Ok((loss, g_y, g_nn, g_mn, g_fp))
}
