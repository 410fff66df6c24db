//! Mini-batch training loop shared by every configured method, epoch
//! weight schedules, model persistence and out-of-sample projection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{pca_fit, standardize_fit, Dataset, Preprocessing};
use crate::error::{Error, Result};
use crate::losses::{
    infonce_tsne_batch_loss, nce_ncvis_batch_loss, negtsne_pair_loss, pacmap_mn_attract_loss,
    pacmap_pair_loss, repulsor_repulsion_loss, umap_pair_loss, Method, PairKind,
};
use crate::nncore::{
    adam_step, kaiming_init, Activation, AdamState, LookupTable, Mlp, Projector,
};
use crate::pairs::{sample_fp_batch, PairSet};

pub const DEFAULT_N_NB: usize = 10;
pub const DEFAULT_N_MN: usize = 5;
pub const DEFAULT_N_FP: usize = 20;
pub const DEFAULT_N_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 1024;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_HIDDEN_DIMS: [usize; 3] = [100, 100, 100];
pub const DEFAULT_EMBEDDING_DIM: usize = 2;

pub const MODEL_MAGIC: [u8; 4] = *b"PRPJ";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: Method,
    pub n_nb: usize,
    pub n_mn: usize,
    pub n_fp: usize,
    pub n_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// (w_NB, w_MN, w_FP); the MN weight is repulsive under ParamRepulsor
    /// and ignored by the fixed schedules of the other methods.
    pub w_nb: f64,
    pub w_mn: f64,
    pub w_fp: f64,
    pub hidden_dims: Vec<usize>,
    pub embedding_dim: usize,
    pub seed: u64,
    /// Per-point embedding table instead of an MLP; no out-of-sample
    /// projection.
    pub lookup: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::ParamRepulsor,
            n_nb: DEFAULT_N_NB,
            n_mn: DEFAULT_N_MN,
            n_fp: DEFAULT_N_FP,
            n_epochs: DEFAULT_N_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            w_nb: 1.0,
            w_mn: 1.0,
            w_fp: 1.0,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            seed: 0,
            lookup: false,
        }
    }
}

impl TrainConfig {
    pub fn activation(&self) -> Activation {
        match self.method {
            Method::ParamRepulsor => Activation::SiLU,
            _ => Activation::ReLU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 || self.n_epochs < 1 {
            return Err(Error::InvalidArgument(
                "batch_size and n_epochs must be >= 1".into(),
            ));
        }
        if self.n_nb < 1 {
            return Err(Error::InvalidArgument("n_nb must be >= 1".into()));
        }
        if self.embedding_dim < 1 {
            return Err(Error::InvalidArgument("embedding_dim must be >= 1".into()));
        }
        if self.w_nb < 0.0 || self.w_mn < 0.0 || self.w_fp < 0.0 {
            return Err(Error::InvalidArgument("weights must be >= 0".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if matches!(self.method, Method::InfoNCTSNE | Method::NCVis) && self.n_fp < 1 {
            return Err(Error::InvalidArgument(
                "normalized contrastive methods need n_fp >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Trained projector plus the preprocessing it expects on raw input.
#[derive(Debug, Clone)]
pub struct Model {
    pub projector: Projector,
    pub preprocessing: Preprocessing,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    pub embedding: Array2<f64>,
    pub loss_trace: Vec<f64>,
}

/// Per-epoch pair weights (w_NB, w_MN_attract, w_MN_repulse, w_FP).
///
/// ParamPaCMAP uses a three-phase schedule: first tenth of the epochs
/// (2, 1000 -> 3 linearly, 0, 1), next three tenths (3, 3, 0, 1), remainder
/// (1, 0, 0, 1). ParamRepulsor keeps the configured constants with the MN
/// force repulsive. All other methods are constant (1, 0, 0, 1).
pub fn weights_at(
    epoch: usize,
    n_epochs: usize,
    method: Method,
    configured: (f64, f64, f64),
) -> Result<(f64, f64, f64, f64)> {
    if epoch >= n_epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} out of range for {n_epochs} epochs"
        )));
    }
    Ok(match method {
        Method::ParamRepulsor => (configured.0, 0.0, configured.1, configured.2),
        Method::ParamPaCMAP => {
            let phase1 = (n_epochs / 10).max(1);
            let phase2_end = (n_epochs * 4 / 10).max(phase1);
            if epoch < phase1 {
                let frac = epoch as f64 / phase1 as f64;
                (2.0, 1000.0 * (1.0 - frac) + 3.0 * frac, 0.0, 1.0)
            } else if epoch < phase2_end {
                (3.0, 3.0, 0.0, 1.0)
            } else {
                (1.0, 0.0, 0.0, 1.0)
            }
        }
        _ => (1.0, 0.0, 0.0, 1.0),
    })
}

fn d2_between(y: ArrayView2<f64>, a: usize, b: usize) -> f64 {
    crate::losses::dist2(y.row(a), y.row(b))
}

/// Batch loss over embedded coordinates with the gradient flowing to both
/// endpoints of every pair. `y` holds the unique embedded points of the
/// batch; all index arguments are positions into `y`. Loss and gradients
/// are normalized by the number of anchors.
pub fn batch_loss_and_grads(
    method: Method,
    y: ArrayView2<f64>,
    anchors: &[usize],
    nn: &Array2<usize>,
    mn: &Array2<usize>,
    fp: &Array2<usize>,
    weights: (f64, f64, f64, f64),
) -> Result<(f64, Array2<f64>)> {
    let b = anchors.len();
    if nn.nrows() != b || mn.nrows() != b || fp.nrows() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            got: nn.nrows().min(mn.nrows()).min(fp.nrows()),
            context: "pair index rows".into(),
        });
    }
    let (w_nb, w_mn_a, w_mn_r, w_fp) = weights;
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(y.raw_dim());
    // Adds w * l(d2(pa, po)) to the loss and the matching gradient to both
    // endpoints; dl is the derivative of l in d2.
    let add_pair = |grad: &mut Array2<f64>, loss: &mut f64, pa: usize, po: usize, w: f64, l: f64, dl: f64| {
        *loss += w * l * inv_b;
        let c = w * dl * inv_b * 2.0;
        for k in 0..y.ncols() {
            let diff = y[(pa, k)] - y[(po, k)];
            grad[(pa, k)] += c * diff;
            grad[(po, k)] -= c * diff;
        }
    };
    match method {
        Method::ParamRepulsor | Method::ParamPaCMAP => {
            for (r, &pa) in anchors.iter().enumerate() {
                for &po in nn.row(r) {
                    let (l, dl) = pacmap_pair_loss(d2_between(y, pa, po), PairKind::NN)?;
                    add_pair(&mut grad, &mut loss, pa, po, w_nb, l, dl);
                }
                for &po in mn.row(r) {
                    let d2 = d2_between(y, pa, po);
                    if w_mn_a != 0.0 {
                        let (l, dl) = pacmap_mn_attract_loss(d2);
                        add_pair(&mut grad, &mut loss, pa, po, w_mn_a, l, dl);
                    }
                    if w_mn_r != 0.0 {
                        let (l, dl) = repulsor_repulsion_loss(d2);
                        add_pair(&mut grad, &mut loss, pa, po, w_mn_r, l, dl);
                    }
                }
                for &po in fp.row(r) {
                    let d2 = d2_between(y, pa, po);
                    let (l, dl) = match method {
                        Method::ParamRepulsor => repulsor_repulsion_loss(d2),
                        _ => pacmap_pair_loss(d2, PairKind::FP)?,
                    };
                    add_pair(&mut grad, &mut loss, pa, po, w_fp, l, dl);
                }
            }
        }
        Method::Umap | Method::NegTSNE => {
            let pair = |d2: f64, kind: PairKind| match method {
                Method::Umap => umap_pair_loss(d2, kind),
                _ => negtsne_pair_loss(d2, kind),
            };
            for (r, &pa) in anchors.iter().enumerate() {
                for &po in nn.row(r) {
                    let (l, dl) = pair(d2_between(y, pa, po), PairKind::NN);
                    add_pair(&mut grad, &mut loss, pa, po, w_nb, l, dl);
                }
                for &po in fp.row(r) {
                    let (l, dl) = pair(d2_between(y, pa, po), PairKind::FP);
                    add_pair(&mut grad, &mut loss, pa, po, w_fp, l, dl);
                }
            }
        }
        Method::InfoNCTSNE | Method::NCVis => {
            for (r, &pa) in anchors.iter().enumerate() {
                let fps: Vec<usize> = fp.row(r).iter().copied().collect();
                let d2_fp: Vec<f64> = fps.iter().map(|&po| d2_between(y, pa, po)).collect();
                for &po in nn.row(r) {
                    let d2_nn = d2_between(y, pa, po);
                    let (l, d_nn, d_fp) = match method {
                        Method::InfoNCTSNE => infonce_tsne_batch_loss(d2_nn, &d2_fp)?,
                        _ => nce_ncvis_batch_loss(d2_nn, &d2_fp)?,
                    };
                    add_pair(&mut grad, &mut loss, pa, po, 1.0, l, d_nn);
                    for (c, &pf) in fps.iter().enumerate() {
                        add_pair(&mut grad, &mut loss, pa, pf, 1.0, 0.0, d_fp[c]);
                    }
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Dense Adam over a lookup table, mirroring the MLP optimizer constants.
struct TableAdam {
    m: Array2<f64>,
    v: Array2<f64>,
    step: u64,
    lr: f64,
}

impl TableAdam {
    fn new(shape: (usize, usize), lr: f64) -> Self {
        TableAdam { m: Array2::zeros(shape), v: Array2::zeros(shape), step: 0, lr }
    }

    fn update(&mut self, table: &mut Array2<f64>, grad: &Array2<f64>) -> Result<()> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("lookup-table gradient".into()));
        }
        self.step += 1;
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for ((t, m), (v, g)) in table
            .iter_mut()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut().zip(grad.iter()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *t -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
        Ok(())
    }
}

/// Deduplicated batch: the union of anchor, NN, MN and FP indices in first
/// appearance order, with every index array remapped to positions.
struct BatchIndex {
    unique: Vec<usize>,
    anchors: Vec<usize>,
    nn: Array2<usize>,
    mn: Array2<usize>,
    fp: Array2<usize>,
}

fn build_batch_index(
    batch: &[usize],
    nn_idx: &Array2<usize>,
    mn_idx: &Array2<usize>,
    fp_idx: &Array2<usize>,
    pos_buf: &mut [usize],
) -> BatchIndex {
    const NONE: usize = usize::MAX;
    let b = batch.len();
    let mut unique = Vec::with_capacity(b * (1 + nn_idx.ncols() + mn_idx.ncols() + fp_idx.ncols()));
    let pos = |i: usize, unique: &mut Vec<usize>, pos_buf: &mut [usize]| -> usize {
        if pos_buf[i] == NONE {
            pos_buf[i] = unique.len();
            unique.push(i);
        }
        pos_buf[i]
    };
    let mut anchors = Vec::with_capacity(b);
    let mut nn = Array2::zeros((b, nn_idx.ncols()));
    let mut mn = Array2::zeros((b, mn_idx.ncols()));
    let mut fp = Array2::zeros((b, fp_idx.ncols()));
    for (r, &a) in batch.iter().enumerate() {
        anchors.push(pos(a, &mut unique, pos_buf));
        for (c, &j) in nn_idx.row(a).iter().enumerate() {
            nn[(r, c)] = pos(j, &mut unique, pos_buf);
        }
        for (c, &j) in mn_idx.row(a).iter().enumerate() {
            mn[(r, c)] = pos(j, &mut unique, pos_buf);
        }
        for (c, &j) in fp_idx.row(r).iter().enumerate() {
            fp[(r, c)] = pos(j, &mut unique, pos_buf);
        }
    }
    for &i in &unique {
        pos_buf[i] = NONE;
    }
    BatchIndex { unique, anchors, nn, mn, fp }
}

/// Trains the configured method on preprocessed data. The caller is
/// responsible for preprocessing; `FitResult.model.preprocessing` is empty.
pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<FitResult> {
    config.validate()?;
    let n = dataset.n();
    let d_in = dataset.dim();
    let need = (config.n_nb + 2).max(8);
    if n < need {
        return Err(Error::DatasetTooSmall { need, have: n });
    }
    let x = dataset.x.view();
    let pairs = PairSet::build(x, config.n_nb, config.n_mn, config.n_fp, config.seed)?;

    enum Net {
        Mlp(Mlp, AdamState),
        Lookup(Array2<f64>, TableAdam),
    }
    let mut net = if config.lookup {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let table = Array2::from_shape_fn((n, config.embedding_dim), |_| {
            1e-2 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let adam = TableAdam::new(table.dim(), config.learning_rate);
        Net::Lookup(table, adam)
    } else {
        let mut dims = Vec::with_capacity(config.hidden_dims.len() + 2);
        dims.push(d_in);
        dims.extend_from_slice(&config.hidden_dims);
        dims.push(config.embedding_dim);
        let mlp = kaiming_init(&dims, config.activation(), config.seed)?;
        let adam = AdamState::new(&mlp, config.learning_rate);
        Net::Mlp(mlp, adam)
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut pos_buf = vec![usize::MAX; n];
    let mut loss_trace = Vec::with_capacity(config.n_epochs);
    for epoch in 0..config.n_epochs {
        let weights = weights_at(epoch, config.n_epochs, config.method, (config.w_nb, config.w_mn, config.w_fp))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((1u64 << 32) + epoch as u64);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let fp_idx = sample_fp_batch(n, batch, config.n_fp, &mut rng)?;
            let bi = build_batch_index(batch, &pairs.nn_idx, &pairs.mn_idx, &fp_idx, &mut pos_buf);
            let x_u = x.select(ndarray::Axis(0), &bi.unique);
            let bad_loss = |loss: f64| {
                Error::NonFinite(format!("loss at epoch {epoch}, batch {batch_no} ({loss})"))
            };
            let loss = match &mut net {
                Net::Mlp(mlp, adam) => {
                    let (y_u, cache) = mlp.forward(x_u.view())?;
                    let (loss, grad_y) =
                        batch_loss_and_grads(config.method, y_u.view(), &bi.anchors, &bi.nn, &bi.mn, &bi.fp, weights)?;
                    if !loss.is_finite() {
                        return Err(bad_loss(loss));
                    }
                    let grads = mlp.backward(&cache, grad_y.view())?;
                    adam_step(mlp, &grads, adam)?;
                    loss
                }
                Net::Lookup(table, adam) => {
                    let y_u = Array2::from_shape_fn((bi.unique.len(), config.embedding_dim), |(r, c)| {
                        table[(bi.unique[r], c)]
                    });
                    let (loss, grad_y) =
                        batch_loss_and_grads(config.method, y_u.view(), &bi.anchors, &bi.nn, &bi.mn, &bi.fp, weights)?;
                    if !loss.is_finite() {
                        return Err(bad_loss(loss));
                    }
                    let mut full = Array2::zeros(table.raw_dim());
                    for (r, &i) in bi.unique.iter().enumerate() {
                        for c in 0..config.embedding_dim {
                            full[(i, c)] = grad_y[(r, c)];
                        }
                    }
                    adam.update(table, &full)?;
                    loss
                }
            };
            epoch_loss += loss * batch.len() as f64;
        }
        loss_trace.push(epoch_loss / n as f64);
    }

    let (projector, embedding) = match net {
        Net::Mlp(mlp, _) => {
            let (y, _) = mlp.forward(x)?;
            (Projector::Mlp(mlp), y)
        }
        Net::Lookup(table, _) => (Projector::Lookup(LookupTable { table: table.clone() }), table),
    };
    Ok(FitResult {
        model: Model {
            projector,
            preprocessing: Preprocessing { standardize: None, pca: None },
        },
        embedding,
        loss_trace,
    })
}

/// Fits preprocessing on the raw data, trains on the transformed matrix,
/// and returns a model that applies the same pipeline on unseen input.
pub fn fit_with_preprocessing(
    dataset: &Dataset,
    config: &TrainConfig,
    standardize: bool,
    pca_dims: Option<usize>,
) -> Result<FitResult> {
    let mut prep = Preprocessing { standardize: None, pca: None };
    let mut x = dataset.x.clone();
    if standardize {
        let s = standardize_fit(x.view())?;
        x = crate::data::standardize_apply(&s, x.view())?;
        prep.standardize = Some(s);
    }
    if let Some(k) = pca_dims {
        let p = pca_fit(x.view(), k)?;
        x = crate::data::pca_apply(&p, x.view())?;
        prep.pca = Some(p);
    }
    let inner = Dataset::new(x, dataset.labels.clone(), dataset.name.clone())?;
    let mut result = fit(&inner, config)?;
    result.model.preprocessing = prep;
    Ok(result)
}

/// Projects new rows through the stored preprocessing and projector.
pub fn transform(model: &Model, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if matches!(model.projector, Projector::Lookup(_)) {
        return Err(Error::LookupTransformUnsupported);
    }
    let expected = model
        .preprocessing
        .input_dim()
        .unwrap_or_else(|| model.projector.input_dim());
    if x.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.ncols(),
            context: "transform input width".into(),
        });
    }
    let xp = model.preprocessing.apply(x)?;
    match &model.projector {
        Projector::Mlp(mlp) => Ok(mlp.forward(xp.view())?.0),
        Projector::Lookup(_) => Err(Error::LookupTransformUnsupported),
    }
}

fn write_f32_slice<W: Write>(w: &mut W, values: impl Iterator<Item = f64>, path: &Path) -> Result<()> {
    for v in values {
        w.write_f32::<LittleEndian>(v as f32).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Serializes an MLP model with its preprocessing to the binary format.
/// Lookup-table models are memory-bound to their training set and are not
/// persistable.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mlp = match &model.projector {
        Projector::Mlp(m) => m,
        Projector::Lookup(_) => {
            return Err(Error::InvalidArgument(
                "lookup-table models cannot be saved".into(),
            ))
        }
    };
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    w.write_all(&MODEL_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(MODEL_VERSION).map_err(|e| Error::io(path, e))?;
    let act = match mlp.activation {
        Activation::ReLU => 0u8,
        Activation::SiLU => 1u8,
    };
    w.write_all(&[act]).map_err(|e| Error::io(path, e))?;
    let mut flags = 0u8;
    if model.preprocessing.standardize.is_some() {
        flags |= 1;
    }
    if model.preprocessing.pca.is_some() {
        flags |= 2;
    }
    w.write_all(&[flags]).map_err(|e| Error::io(path, e))?;
    w.write_u32::<LittleEndian>(mlp.weights.len() as u32).map_err(|e| Error::io(path, e))?;
    for (wt, b) in mlp.weights.iter().zip(&mlp.biases) {
        let (rows, cols) = wt.dim();
        w.write_u32::<LittleEndian>(rows as u32).map_err(|e| Error::io(path, e))?;
        w.write_u32::<LittleEndian>(cols as u32).map_err(|e| Error::io(path, e))?;
        write_f32_slice(&mut w, wt.iter().copied(), path)?;
        write_f32_slice(&mut w, b.iter().copied(), path)?;
    }
    if let Some(s) = &model.preprocessing.standardize {
        w.write_u32::<LittleEndian>(s.mean.len() as u32).map_err(|e| Error::io(path, e))?;
        write_f32_slice(&mut w, s.mean.iter().copied(), path)?;
        write_f32_slice(&mut w, s.scale.iter().copied(), path)?;
    }
    if let Some(p) = &model.preprocessing.pca {
        w.write_u32::<LittleEndian>(p.components.len() as u32).map_err(|e| Error::io(path, e))?;
        w.write_u32::<LittleEndian>(p.mean.len() as u32).map_err(|e| Error::io(path, e))?;
        write_f32_slice(&mut w, p.mean.iter().copied(), path)?;
        for row in &p.components {
            write_f32_slice(&mut w, row.iter().copied(), path)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct ModelReader<'a> {
    r: BufReader<File>,
    path: &'a Path,
}

impl ModelReader<'_> {
    fn map(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated(format!("unexpected end of {}", self.path.display()))
        } else {
            Error::io(self.path, e)
        }
    }

    fn u32(&mut self) -> Result<u32> {
        self.r.read_u32::<LittleEndian>().map_err(|e| self.map(e))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.r.read_f32::<LittleEndian>().map_err(|e| self.map(e))? as f64);
        }
        Ok(out)
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.r.read_exact(&mut buf).map_err(|e| self.map(e))?;
        Ok(buf)
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = ModelReader { r: BufReader::new(file), path };
    if rd.bytes::<4>()? != MODEL_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = rd.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::BadVersion(version));
    }
    let [act_byte] = rd.bytes::<1>()?;
    let activation = match act_byte {
        0 => Activation::ReLU,
        1 => Activation::SiLU,
        other => {
            return Err(Error::Truncated(format!("unknown activation byte {other}")))
        }
    };
    let [flags] = rd.bytes::<1>()?;
    if flags & !3 != 0 {
        return Err(Error::Truncated(format!("unknown preprocessing flags {flags:#x}")));
    }
    let layer_count = rd.u32()? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(Error::Truncated(format!("implausible layer count {layer_count}")));
    }
    let mut weights = Vec::with_capacity(layer_count);
    let mut biases = Vec::with_capacity(layer_count);
    let mut layer_dims = Vec::with_capacity(layer_count + 1);
    for li in 0..layer_count {
        let rows = rd.u32()? as usize;
        let cols = rd.u32()? as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Truncated(format!("layer {li} has zero dimension")));
        }
        if li == 0 {
            layer_dims.push(cols);
        } else if layer_dims[li] != cols {
            return Err(Error::Truncated(format!(
                "layer {li} input width {cols} does not match previous output {}",
                layer_dims[li]
            )));
        }
        layer_dims.push(rows);
        let flat = rd.f32s(rows * cols)?;
        weights.push(Array2::from_shape_vec((rows, cols), flat).expect("shape"));
        biases.push(ndarray::Array1::from_vec(rd.f32s(rows)?));
    }
    let mut preprocessing = Preprocessing { standardize: None, pca: None };
    if flags & 1 != 0 {
        let d = rd.u32()? as usize;
        preprocessing.standardize = Some(crate::data::Standardize {
            mean: rd.f32s(d)?,
            scale: rd.f32s(d)?,
        });
    }
    if flags & 2 != 0 {
        let k = rd.u32()? as usize;
        let d = rd.u32()? as usize;
        let mean = rd.f32s(d)?;
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            components.push(rd.f32s(d)?);
        }
        preprocessing.pca = Some(crate::data::Pca {
            mean,
            components,
            explained_variance: vec![0.0; k],
        });
    }
    let mlp = Mlp { layer_dims, weights, biases, activation };
    Ok(Model { projector: Projector::Mlp(mlp), preprocessing })
}
