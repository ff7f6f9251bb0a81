//! Sample-quality metrics and density-ratio fields.
//!
//! Kernel sums run in a fixed order over the inputs, so every metric is a
//! deterministic function of its arguments.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csvfmt::{fmt_f64, fmt_opt};
use crate::gradcore::Tensor;

/// Default MMD bandwidth for 2-D data.
pub const DEFAULT_H_MMD: f64 = 0.5;
/// Default KDE bandwidth for 2-D data.
pub const DEFAULT_H_KDE: f64 = 0.25;
/// Tables report MMD multiplied by this factor.
pub const MMD_REPORT_SCALE: f64 = 1e3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_kernel(x: &Tensor, y: &Tensor, inv_two_h2: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        let xi = x.row(i);
        let mut row = 0.0;
        for j in 0..y.rows() {
            row += (-sq_dist(xi, y.row(j)) * inv_two_h2).exp();
        }
        total += row;
    }
    total / (x.rows() * y.rows()) as f64
}

fn canonical_first(x: &Tensor, y: &Tensor) -> bool {
    match x.rows().cmp(&y.rows()) {
        std::cmp::Ordering::Equal => {
            for (a, b) in x.data().iter().zip(y.data()) {
                match a.total_cmp(b) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o.is_lt(),
                }
            }
            true
        }
        o => o.is_lt(),
    }
}

/// Biased (V-statistic) squared MMD with the kernel
/// `k(a, b) = exp(−‖a − b‖² / (2h²))`. Not scaled; see [`MMD_REPORT_SCALE`].
pub fn mmd2_gaussian(x: &Tensor, y: &Tensor, h: f64) -> Result<f64, EvalError> {
    if !(h > 0.0) {
        return Err(EvalError::Invalid(format!("bandwidth {h} must be > 0")));
    }
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::Invalid("empty sample".into()));
    }
    if x.cols() != y.cols() {
        return Err(EvalError::Dimension(format!("{} vs {} columns", x.cols(), y.cols())));
    }
    let g = 1.0 / (2.0 * h * h);
    let kxx = mean_kernel(x, x, g);
    let kyy = mean_kernel(y, y, g);
    // Cross term in a canonical argument order so swapping X and Y is
    // bit-identical.
    let kxy = if canonical_first(x, y) {
        mean_kernel(x, y, g)
    } else {
        mean_kernel(y, x, g)
    };
    Ok(kxx + kyy - 2.0 * kxy)
}

/// Mean negative log-likelihood of `validation` under a Gaussian KDE with
/// bandwidth `h` fitted on `generated`.
pub fn kde_nll(generated: &Tensor, validation: &Tensor, h: f64) -> Result<f64, EvalError> {
    if !(h > 0.0) {
        return Err(EvalError::Invalid(format!("bandwidth {h} must be > 0")));
    }
    if generated.is_empty() || validation.is_empty() {
        return Err(EvalError::Invalid("empty sample".into()));
    }
    if generated.cols() != validation.cols() {
        return Err(EvalError::Dimension(format!(
            "{} vs {} columns",
            generated.cols(),
            validation.cols()
        )));
    }
    let d = generated.cols() as f64;
    let n = generated.rows();
    let log_norm = -0.5 * d * (2.0 * PI * h * h).ln() - (n as f64).ln();
    let g = 1.0 / (2.0 * h * h);
    let mut exps = vec![0.0; n];
    let mut total = 0.0;
    for j in 0..validation.rows() {
        let v = validation.row(j);
        let mut max = f64::NEG_INFINITY;
        for (i, e) in exps.iter_mut().enumerate() {
            *e = -sq_dist(v, generated.row(i)) * g;
            max = max.max(*e);
        }
        let s: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        total += log_norm + max + s.ln();
    }
    Ok(-total / validation.rows() as f64)
}

/// Gaussian KDE density with bandwidth `h`, fitted on `samples`, evaluated
/// at every row of `points`; returns `[k × 1]`.
pub fn kde_density(samples: &Tensor, points: &Tensor, h: f64) -> Result<Tensor, EvalError> {
    let nll_rows: Result<Vec<f64>, EvalError> = (0..points.rows())
        .map(|i| kde_nll(samples, &points.select_rows(&[i]), h).map(|v| (-v).exp()))
        .collect();
    if points.is_empty() {
        return Err(EvalError::Invalid("no evaluation points".into()));
    }
    Ok(Tensor::column(&nll_rows?))
}

/// Median pairwise Euclidean distance over (at most the first 1000) rows.
pub fn median_heuristic(x: &Tensor) -> f64 {
    let n = x.rows().min(1000);
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Regular 2-D grid; points are ordered row-major (`y` outer, `x` inner).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub res_x: usize,
    pub res_y: usize,
}

impl Grid2D {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), res_x: usize, res_y: usize) -> Result<Self, EvalError> {
        if res_x < 2 || res_y < 2 || !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(EvalError::Invalid("grid needs ≥ 2 points per axis and increasing ranges".into()));
        }
        Ok(Grid2D { x_range, y_range, res_x, res_y })
    }

    fn axis(range: (f64, f64), res: usize, k: usize) -> f64 {
        range.0 + (range.1 - range.0) * k as f64 / (res - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.res_x * self.res_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.res_x - 1) as f64
            * (self.y_range.1 - self.y_range.0)
            / (self.res_y - 1) as f64
    }

    pub fn points(&self) -> Tensor {
        let mut data = Vec::with_capacity(2 * self.len());
        for iy in 0..self.res_y {
            let y = Self::axis(self.y_range, self.res_y, iy);
            for ix in 0..self.res_x {
                data.push(Self::axis(self.x_range, self.res_x, ix));
                data.push(y);
            }
        }
        Tensor::new(self.len(), 2, data).expect("k × 2")
    }
}

/// `r̂(x) = exp(T(x)/temp) / mean_{y ∈ reference} exp(T(y)/temp)` at every
/// row of `points`. `critic` maps a batch `[k × d]` to scores `[k × 1]`.
pub fn ratio_field<F>(critic: F, points: &Tensor, reference: &Tensor, temp: f64) -> Result<Tensor, EvalError>
where
    F: Fn(&Tensor) -> Tensor,
{
    if !(temp > 0.0) {
        return Err(EvalError::Invalid(format!("temperature {temp} must be > 0")));
    }
    if reference.is_empty() {
        return Err(EvalError::Invalid("no reference samples".into()));
    }
    let t_ref = critic(reference).scale(1.0 / temp);
    let log_norm = t_ref.logsumexp() - (t_ref.len() as f64).ln();
    let t = critic(points);
    if t.len() != points.rows() {
        return Err(EvalError::Dimension(format!(
            "critic returned {} scores for {} points",
            t.len(),
            points.rows()
        )));
    }
    Ok(t.map(|v| (v / temp - log_norm).exp()))
}

/// Per-epoch record; `nll` and `mmd` are present only on evaluation epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub divergence: f64,
    pub nll: Option<f64>,
    /// Squared MMD, unscaled.
    pub mmd: Option<f64>,
}

pub fn negative_estimate_count(log: &[MetricRecord]) -> usize {
    log.iter().filter(|r| r.divergence < 0.0).count()
}

const METRICS_HEADER: &str = "epoch,divergence,nll,mmd_x1e3";

pub fn write_metrics_csv(path: &Path, log: &[MetricRecord]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{METRICS_HEADER}").map_err(io)?;
    for r in log {
        writeln!(
            out,
            "{},{},{},{}",
            r.epoch,
            fmt_f64(r.divergence),
            fmt_opt(r.nll),
            fmt_opt(r.mmd.map(|m| m * MMD_REPORT_SCALE))
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>, EvalError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: p.clone(), source })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => {
            return Err(EvalError::Parse { path: p, line: 1, msg: format!("expected header {METRICS_HEADER}") });
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| EvalError::Parse { path: p.clone(), line: i + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>, EvalError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| err(format!("{s:?}: {e}")))
            }
        };
        out.push(MetricRecord {
            epoch: f[0].parse().map_err(|e| err(format!("epoch {:?}: {e}", f[0])))?,
            divergence: f[1].parse().map_err(|e| err(format!("divergence {:?}: {e}", f[1])))?,
            nll: opt(f[2])?,
            mmd: opt(f[3])?.map(|m| m / MMD_REPORT_SCALE),
        });
    }
    Ok(out)
}
