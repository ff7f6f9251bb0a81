//! Seeded 2-D synthetic distributions and tabular CSV ingestion.
//!
//! The six synthetic samplers are fixed reconstructions:
//!
//! | name   | definition |
//! |--------|------------|
//! | mog    | 8 equal Gaussians, σ = 0.2, centers on the radius-2 circle |
//! | banana | `(z₁, z₂ + z₁²/2 − 1)` for standard normal `z` |
//! | rings  | radius 1 or 2 with equal probability, radial noise σ = 0.05 |
//! | square | uniform on the boundary of `[−2, 2]²`, noise σ = 0.05 |
//! | cosine | `x₁ ~ U(−4, 4)`, `x₂ = 2 cos(2x₁) + N(0, 0.2²)` |
//! | funnel | `x₁ ~ N(0, 1)`, `x₂ ~ N(0, e^{x₁})` (variance `e^{x₁}`) |

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csvfmt::fmt_f64;
use crate::gradcore::Tensor;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("{path}: no data rows")]
    Empty { path: String },
    #[error("config error: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticName {
    Mog,
    Banana,
    Rings,
    Square,
    Cosine,
    Funnel,
}

impl SyntheticName {
    pub const ALL: [SyntheticName; 6] = [
        SyntheticName::Mog,
        SyntheticName::Banana,
        SyntheticName::Rings,
        SyntheticName::Square,
        SyntheticName::Cosine,
        SyntheticName::Funnel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticName::Mog => "mog",
            SyntheticName::Banana => "banana",
            SyntheticName::Rings => "rings",
            SyntheticName::Square => "square",
            SyntheticName::Cosine => "cosine",
            SyntheticName::Funnel => "funnel",
        }
    }
}

impl fmt::Display for SyntheticName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntheticName {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SyntheticName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DataError::Config(format!("unknown synthetic dataset {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: SyntheticName,
    pub n_samples: usize,
    pub seed: u64,
}

const MOG_SIGMA: f64 = 0.2;
const MOG_RADIUS: f64 = 2.0;
const SHAPE_NOISE: f64 = 0.05;
const COSINE_NOISE: f64 = 0.2;

fn mog_center(k: usize) -> (f64, f64) {
    let a = 2.0 * PI * k as f64 / 8.0;
    (MOG_RADIUS * a.cos(), MOG_RADIUS * a.sin())
}

fn draw<R: Rng>(name: SyntheticName, rng: &mut R) -> [f64; 2] {
    fn n<R: Rng>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }
    match name {
        SyntheticName::Mog => {
            let (cx, cy) = mog_center(rng.gen_range(0..8));
            let (zx, zy): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            [cx + MOG_SIGMA * zx, cy + MOG_SIGMA * zy]
        }
        SyntheticName::Banana => {
            let (z1, z2) = (n(rng), n(rng));
            [z1, z2 + 0.5 * z1 * z1 - 1.0]
        }
        SyntheticName::Rings => {
            let radius = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
            let angle = rng.gen_range(0.0..2.0 * PI);
            let eps: f64 = rng.sample(StandardNormal);
            let rho = radius + SHAPE_NOISE * eps;
            [rho * angle.cos(), rho * angle.sin()]
        }
        SyntheticName::Square => {
            let side = rng.gen_range(0..4);
            let t = rng.gen_range(-2.0..2.0);
            let (x, y) = match side {
                0 => (t, -2.0),
                1 => (t, 2.0),
                2 => (-2.0, t),
                _ => (2.0, t),
            };
            let (ex, ey): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            [x + SHAPE_NOISE * ex, y + SHAPE_NOISE * ey]
        }
        SyntheticName::Cosine => {
            let x1 = rng.gen_range(-4.0..4.0);
            let e: f64 = rng.sample(StandardNormal);
            [x1, 2.0 * (2.0 * x1).cos() + COSINE_NOISE * e]
        }
        SyntheticName::Funnel => {
            let x1 = n(rng);
            let z = n(rng);
            [x1, (0.5 * x1).exp() * z]
        }
    }
}

/// Draws `n_samples` points; deterministic in `(name, n_samples, seed)`.
pub fn sample_synthetic(spec: &SyntheticSpec) -> Result<Tensor, DataError> {
    if spec.n_samples == 0 {
        return Err(DataError::Config("n_samples must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(sample_with(spec.name, spec.n_samples, &mut rng))
}

/// Draws `n` points from an existing stream.
pub fn sample_with<R: Rng>(name: SyntheticName, n: usize, rng: &mut R) -> Tensor {
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        data.extend_from_slice(&draw(name, rng));
    }
    Tensor::new(n, 2, data).expect("n × 2")
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Analytic density at `(x, y)` where it has a closed form (not for rings
/// and square, whose noise is a convolution with a curve).
pub fn synthetic_density(name: SyntheticName, x: f64, y: f64) -> Option<f64> {
    let v = MOG_SIGMA * MOG_SIGMA;
    match name {
        SyntheticName::Mog => Some(
            (0..8)
                .map(|k| {
                    let (cx, cy) = mog_center(k);
                    normal_pdf(x, cx, v) * normal_pdf(y, cy, v)
                })
                .sum::<f64>()
                / 8.0,
        ),
        SyntheticName::Banana => Some(normal_pdf(x, 0.0, 1.0) * normal_pdf(y, 0.5 * x * x - 1.0, 1.0)),
        SyntheticName::Cosine => Some(if x.abs() <= 4.0 {
            normal_pdf(y, 2.0 * (2.0 * x).cos(), COSINE_NOISE * COSINE_NOISE) / 8.0
        } else {
            0.0
        }),
        SyntheticName::Funnel => Some(normal_pdf(x, 0.0, 1.0) * normal_pdf(y, 0.0, x.exp())),
        SyntheticName::Rings | SyntheticName::Square => None,
    }
}

/// Analytic mean and covariance `[[xx, xy], [xy, yy]]` of each sampler.
pub fn synthetic_moments(name: SyntheticName) -> ([f64; 2], [[f64; 2]; 2]) {
    let n2 = SHAPE_NOISE * SHAPE_NOISE;
    match name {
        SyntheticName::Mog => {
            let v = 0.5 * MOG_RADIUS * MOG_RADIUS + MOG_SIGMA * MOG_SIGMA;
            ([0.0, 0.0], [[v, 0.0], [0.0, v]])
        }
        SyntheticName::Banana => ([0.0, -0.5], [[1.0, 0.0], [0.0, 1.5]]),
        SyntheticName::Rings => {
            let v = (2.5 + n2) / 2.0;
            ([0.0, 0.0], [[v, 0.0], [0.0, v]])
        }
        SyntheticName::Square => {
            let v = 8.0 / 3.0 + n2;
            ([0.0, 0.0], [[v, 0.0], [0.0, v]])
        }
        SyntheticName::Cosine => {
            let mean_y = 8f64.sin() / 4.0;
            let second_y = 4.0 * (0.5 + 16f64.sin() / 32.0) + COSINE_NOISE * COSINE_NOISE;
            // E[x cos 2x] = 0 by symmetry.
            ([0.0, mean_y], [[16.0 / 3.0, 0.0], [0.0, second_y - mean_y * mean_y]])
        }
        SyntheticName::Funnel => ([0.0, 0.0], [[1.0, 0.0], [0.0, 0.5f64.exp()]]),
    }
}

/// Parses a rectangular numeric CSV into an `n × d` matrix.
pub fn load_csv(path: &Path, has_header: bool, delimiter: u8) -> Result<Tensor, DataError> {
    let p = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DataError::Io { path: p.clone(), source },
            other => DataError::Parse { path: p.clone(), line: 0, msg: format!("{other:?}") },
        })?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            path: p.clone(),
            line: e.position().map_or(0, |pos| pos.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(DataError::Parse {
                    path: p,
                    line,
                    msg: format!("expected {c} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| DataError::Parse {
                path: p.clone(),
                line,
                msg: format!("non-numeric field {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(DataError::Empty { path: p });
    };
    Ok(Tensor::new(rows, cols, data).expect("rectangular"))
}

/// Writes points as CSV with columns `x0, x1, …`.
pub fn write_points_csv(path: &Path, points: &Tensor) -> Result<(), DataError> {
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let header: Vec<String> = (0..points.cols()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for i in 0..points.rows() {
        let row: Vec<String> = points.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Train/validation split standardized with training-split statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub train: Tensor,
    pub valid: Tensor,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
}

/// Floor applied to column standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Shuffles rows with `seed`, holds out `round(n · valid_fraction)` of them,
/// and standardizes both splits with the training columns' mean and
/// population standard deviation.
pub fn standardize_split(data: &Tensor, valid_fraction: f64, seed: u64) -> Result<TabularDataset, DataError> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(DataError::Config(format!("valid_fraction {valid_fraction} must be in (0, 1)")));
    }
    let n = data.rows();
    let n_valid = (n as f64 * valid_fraction).round() as usize;
    if n_valid == 0 || n - n_valid < 2 {
        return Err(DataError::Config(format!(
            "{n} rows cannot be split with valid_fraction {valid_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let valid_idx = idx[..n_valid].to_vec();
    let train_idx = idx[n_valid..].to_vec();

    let d = data.cols();
    let train_raw = data.select_rows(&train_idx);
    let nt = train_raw.rows() as f64;
    let mut means = vec![0.0; d];
    for i in 0..train_raw.rows() {
        for (m, v) in means.iter_mut().zip(train_raw.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nt);
    let mut stds = vec![0.0; d];
    for i in 0..train_raw.rows() {
        for ((s, v), m) in stds.iter_mut().zip(train_raw.row(i)).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / nt).sqrt().max(STD_FLOOR));

    let standardize = |t: Tensor| {
        let mut t = t;
        for (k, v) in t.data_mut().iter_mut().enumerate() {
            let j = k % d;
            *v = (*v - means[j]) / stds[j];
        }
        t
    };
    Ok(TabularDataset {
        train: standardize(train_raw),
        valid: standardize(data.select_rows(&valid_idx)),
        means,
        stds,
        train_idx,
        valid_idx,
    })
}
