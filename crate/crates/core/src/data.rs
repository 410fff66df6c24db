//! Dataset ingestion (CSV, IDX images), synthetic generators and the
//! standardization / PCA preprocessing pipeline.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major numeric matrix with optional integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<i64>>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Array2<f64>, labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset entry".into()));
        }
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: l.len(),
                    context: "label vector length".into(),
                });
            }
        }
        Ok(Dataset { x, labels, name: name.into() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Which CSV column holds labels.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    pub fn parse(s: &str) -> LabelColumn {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

/// Loads a comma-separated file. A header row is detected by any
/// non-numeric cell in the first record; the label column may be named
/// (requires a header) or given by index.
pub fn load_csv(path: &Path, label_column: Option<&LabelColumn>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(BufReader::new(file));
    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in raw.records() {
        records.push(rec.map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })?);
    }
    if records.is_empty() {
        return Err(Error::Parse { path: path.into(), msg: "no rows".into() });
    }
    let has_header = records[0].iter().any(|c| c.trim().parse::<f64>().is_err());
    let header: Option<Vec<String>> =
        has_header.then(|| records[0].iter().map(|s| s.trim().to_string()).collect());
    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(Error::Parse { path: path.into(), msg: "header but no data rows".into() });
    }
    let width = body[0].len();
    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::Parse {
                    path: path.into(),
                    msg: format!("label column {i} out of range (width {width})"),
                });
            }
            Some(*i)
        }
        Some(LabelColumn::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| Error::Parse {
                path: path.into(),
                msg: format!("label column {name:?} needs a header row"),
            })?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| Error::Parse {
                path: path.into(),
                msg: format!("label column {name:?} not in header"),
            })?)
        }
    };
    let feat_width = width - label_idx.map_or(0, |_| 1);
    let mut x = Array2::zeros((body.len(), feat_width));
    let mut labels = label_idx.map(|_| Vec::with_capacity(body.len()));
    for (r, rec) in body.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                msg: format!("row {r} has {} cells, expected {width}", rec.len()),
            });
        }
        let mut c_out = 0;
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                let v = cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    msg: format!("non-numeric label {cell:?} at row {r}"),
                })?;
                labels.as_mut().unwrap().push(v.round() as i64);
            } else {
                x[(r, c_out)] = cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    msg: format!("non-numeric cell {cell:?} at row {r}, column {c}"),
                })?;
                c_out += 1;
            }
        }
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(x, labels, name)
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads the big-endian IDX image + label pair; pixels are flattened
/// row-major and scaled to [0, 1].
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut img = BufReader::new(File::open(images_path).map_err(|e| Error::io(images_path, e))?);
    let magic = img.read_u32::<BigEndian>().map_err(|e| Error::io(images_path, e))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            path: images_path.into(),
            msg: format!("bad images magic {magic:#010x}"),
        });
    }
    let count = img.read_u32::<BigEndian>().map_err(|e| Error::io(images_path, e))? as usize;
    let rows = img.read_u32::<BigEndian>().map_err(|e| Error::io(images_path, e))? as usize;
    let cols = img.read_u32::<BigEndian>().map_err(|e| Error::io(images_path, e))? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    img.read_exact(&mut pixels).map_err(|e| Error::io(images_path, e))?;

    let mut lab = BufReader::new(File::open(labels_path).map_err(|e| Error::io(labels_path, e))?);
    let magic = lab.read_u32::<BigEndian>().map_err(|e| Error::io(labels_path, e))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            path: labels_path.into(),
            msg: format!("bad labels magic {magic:#010x}"),
        });
    }
    let lab_count = lab.read_u32::<BigEndian>().map_err(|e| Error::io(labels_path, e))? as usize;
    if lab_count != count {
        return Err(Error::Parse {
            path: labels_path.into(),
            msg: format!("label count {lab_count} != image count {count}"),
        });
    }
    let mut label_bytes = vec![0u8; count];
    lab.read_exact(&mut label_bytes).map_err(|e| Error::io(labels_path, e))?;

    let x = Array2::from_shape_fn((count, rows * cols), |(i, j)| {
        pixels[i * rows * cols + j] as f64 / 255.0
    });
    let labels = label_bytes.into_iter().map(|b| b as i64).collect();
    let name = images_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(x, Some(labels), name)
}

/// Writes a 2-D embedding as CSV with columns `y0,y1[,label]`.
pub fn write_embedding_csv(path: &Path, y: ArrayView2<f64>, labels: Option<&[i64]>) -> Result<()> {
    let mut out = File::create(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = (0..y.ncols()).map(|c| format!("y{c}")).collect();
    let mut line = header.join(",");
    if labels.is_some() {
        line.push_str(",label");
    }
    writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    for (i, row) in y.outer_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        let mut line = cells.join(",");
        if let Some(l) = labels {
            line.push_str(&format!(",{}", l[i]));
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// 5000 points on the unit circle, stratified into ten arcs of 500 points
/// each (angles jittered within the arc); labels are arc indices.
pub fn synth_circle(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_arc = 500;
    let mut x = Array2::zeros((10 * per_arc, 2));
    let mut labels = Vec::with_capacity(10 * per_arc);
    for arc in 0..10usize {
        for p in 0..per_arc {
            let theta = (arc as f64 + rng.gen::<f64>()) * std::f64::consts::TAU / 10.0;
            let row = arc * per_arc + p;
            x[(row, 0)] = theta.cos();
            x[(row, 1)] = theta.sin();
            labels.push(arc as i64);
        }
    }
    Dataset { x, labels: Some(labels), name: "circle".into() }
}

pub const LINEAGE_SPACING: f64 = 6.0;

/// 10000 points: twenty unit-covariance 50-D Gaussians with centers spaced
/// along the first axis.
pub fn synth_lineage(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (classes, per_class, d) = (20usize, 500usize, 50usize);
    let mut x = Array2::zeros((classes * per_class, d));
    let mut labels = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        for p in 0..per_class {
            let row = class * per_class + p;
            for c in 0..d {
                x[(row, c)] = normal(&mut rng);
            }
            x[(row, 0)] += class as f64 * LINEAGE_SPACING;
            labels.push(class as i64);
        }
    }
    Dataset { x, labels: Some(labels), name: "lineage".into() }
}

pub const HIERARCHY_SIGMA_MACRO: f64 = 50.0;
pub const HIERARCHY_SIGMA_MESO: f64 = 15.0;
pub const HIERARCHY_SIGMA_MICRO: f64 = 5.0;

/// 12500 points in 50 dims: 5 macro clusters, each with 5 meso clusters,
/// each with 5 micro clusters of 100 unit-covariance points. Labels are
/// micro indices; macro = micro / 25, meso = micro / 5.
pub fn synth_hierarchy(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 50usize;
    let per_micro = 100usize;
    let mut x = Array2::zeros((125 * per_micro, d));
    let mut labels = Vec::with_capacity(125 * per_micro);
    let mut micro = 0usize;
    for _macro_i in 0..5 {
        let macro_center: Vec<f64> = (0..d).map(|_| HIERARCHY_SIGMA_MACRO * normal(&mut rng)).collect();
        for _meso_i in 0..5 {
            let meso_offset: Vec<f64> = (0..d).map(|_| HIERARCHY_SIGMA_MESO * normal(&mut rng)).collect();
            for _micro_i in 0..5 {
                let micro_offset: Vec<f64> = (0..d).map(|_| HIERARCHY_SIGMA_MICRO * normal(&mut rng)).collect();
                for p in 0..per_micro {
                    let row = micro * per_micro + p;
                    for c in 0..d {
                        x[(row, c)] = macro_center[c] + meso_offset[c] + micro_offset[c] + normal(&mut rng);
                    }
                    labels.push(micro as i64);
                }
                micro += 1;
            }
        }
    }
    Dataset { x, labels: Some(labels), name: "hierarchy".into() }
}

/// Per-feature standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardize {
    pub mean: Vec<f64>,
    /// Per-feature standard deviation; zero-variance features keep scale 1.
    pub scale: Vec<f64>,
}

/// Centered top-k principal component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// k x D component matrix, rows orthonormal.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// The preprocessing applied before the projector, stored with the model so
/// transform can reproduce it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub standardize: Option<Standardize>,
    pub pca: Option<Pca>,
}

impl Preprocessing {
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut cur = x.to_owned();
        if let Some(s) = &self.standardize {
            cur = standardize_apply(s, cur.view())?;
        }
        if let Some(p) = &self.pca {
            cur = pca_apply(p, cur.view())?;
        }
        Ok(cur)
    }

    /// Input width the pipeline expects.
    pub fn input_dim(&self) -> Option<usize> {
        if let Some(s) = &self.standardize {
            return Some(s.mean.len());
        }
        self.pca.as_ref().map(|p| p.mean.len())
    }
}

pub fn standardize_fit(x: ArrayView2<f64>) -> Result<Standardize> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DatasetTooSmall { need: 2, have: n });
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut scale = Vec::with_capacity(x.ncols());
    for c in 0..x.ncols() {
        let var = x.column(c).iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        scale.push(if sd > 0.0 { sd } else { 1.0 });
    }
    Ok(Standardize { mean: mean.to_vec(), scale })
}

pub fn standardize_apply(s: &Standardize, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != s.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: s.mean.len(),
            got: x.ncols(),
            context: "standardize input width".into(),
        });
    }
    let mut out = x.to_owned();
    for mut row in out.outer_iter_mut() {
        for c in 0..row.len() {
            row[c] = (row[c] - s.mean[c]) / s.scale[c];
        }
    }
    Ok(out)
}

/// Top-k eigendecomposition of the sample covariance, with the sign of each
/// component fixed so its largest-magnitude entry is positive.
pub fn pca_fit(x: ArrayView2<f64>, k: usize) -> Result<Pca> {
    let (n, d) = x.dim();
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "pca k = {k} out of range [1, {}]",
            n.min(d)
        )));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / ((n - 1).max(1) as f64);
    if cov.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("zero-variance input".into()));
    }
    let cov_na = nalgebra::DMatrix::from_fn(d, d, |r, c| cov[(r, c)]);
    let eig = cov_na.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let col = eig.eigenvectors.column(i);
        let mut comp: Vec<f64> = col.iter().copied().collect();
        let max_idx = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if comp[max_idx] < 0.0 {
            comp.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(comp);
        explained.push(eig.eigenvalues[i].max(0.0));
    }
    Ok(Pca { mean: mean.to_vec(), components, explained_variance: explained })
}

pub fn pca_apply(p: &Pca, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = p.mean.len();
    if x.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.ncols(),
            context: "pca input width".into(),
        });
    }
    let k = p.components.len();
    let mut comp = Array2::zeros((k, d));
    for (r, c) in p.components.iter().enumerate() {
        for (j, &v) in c.iter().enumerate() {
            comp[(r, j)] = v;
        }
    }
    let mean = Array1::from_vec(p.mean.clone());
    let centered = &x - &mean.view().insert_axis(Axis(0));
    Ok(centered.dot(&comp.t()))
}
