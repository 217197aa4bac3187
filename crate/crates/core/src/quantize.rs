//! Uniform grid quantization of sampled continuous sources.
//!
//! Samples are binned onto cell centers, yielding a finite [`JointPmf`], and
//! the quantization error is summarized as an [`ErrorBudget`] whose `epsilon`
//! bounds the gap between the discrete and the continuous optimum:
//!
//! ```text
//! epsilon = (2 ||z_q|| + ||e||) ||V||_2 ||e||
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::dnn::spectral_norm;
use crate::error::{Error, Result};
use crate::model::{CostVariant, JointPmf};

const CHUNK: usize = 1 << 14;

/// Axis-aligned box split into `bins[d]` equal cells along dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridQuantizer {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins: Vec<usize>,
}

impl GridQuantizer {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || d % 2 != 0 || upper.len() != d || bins.len() != d {
            return Err(Error::Dimension(format!(
                "grid needs matching even dimensions, got lower {}, upper {}, bins {}",
                d,
                upper.len(),
                bins.len()
            )));
        }
        for i in 0..d {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidArgument(format!(
                    "box side {i} is [{}, {}]",
                    lower[i], upper[i]
                )));
            }
            if bins[i] == 0 {
                return Err(Error::InvalidArgument(format!("bins[{i}] must be positive")));
            }
        }
        bins.iter().try_fold(1usize, |acc, &b| acc.checked_mul(b)).ok_or_else(|| {
            Error::InvalidArgument("total cell count overflows".into())
        })?;
        Ok(Self { lower, upper, bins })
    }

    /// The same `[lo, hi]` interval and bin count on every axis.
    pub fn uniform(dim: usize, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![bins; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn cell_count(&self) -> usize {
        self.bins.iter().product()
    }

    /// Row-major linear cell index of `point`, or `None` outside the box.
    /// The upper face belongs to the last cell.
    pub fn cell_of(&self, point: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for d in 0..self.dim() {
            let v = point[d];
            if !(v >= self.lower[d] && v <= self.upper[d]) {
                return None;
            }
            let t = (v - self.lower[d]) / (self.upper[d] - self.lower[d]);
            let b = ((t * self.bins[d] as f64) as usize).min(self.bins[d] - 1);
            idx = idx * self.bins[d] + b;
        }
        Some(idx)
    }

    pub fn center(&self, mut cell: usize) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for k in (0..d).rev() {
            let b = cell % self.bins[k];
            cell /= self.bins[k];
            let w = (self.upper[k] - self.lower[k]) / self.bins[k] as f64;
            out[k] = self.lower[k] + (b as f64 + 0.5) * w;
        }
        out
    }
}

/// A nonempty set of finite points of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    /// `data` is row-major with `dim` coordinates per point.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("sample dimension must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptySamples);
        }
        if data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {} is not finite", i / dim)));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.is_empty() {
            return Err(Error::EmptySamples);
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("points have different lengths".into()));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Little-endian `count: u64, dim: u64` header followed by row-major `f64`s.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.count() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let count = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        let len = count
            .checked_mul(dim)
            .ok_or_else(|| Error::Parse("sample header overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(Error::Parse(format!(
                "header announces {count} x {dim} values but the body holds {} bytes",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::new(dim, data)
    }

    /// One point per line, comma separated. Blank lines and `#` comments are skipped.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut dim = 0;
        let mut data = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if dim == 0 {
                dim = row.len();
            } else if row.len() != dim {
                return Err(Error::Parse(format!(
                    "line {} has {} values, expected {dim}",
                    lineno + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.is_empty() {
            return Err(Error::EmptySamples);
        }
        Self::new(dim, data)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the binary format, or CSV when the extension is `.csv`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::read_csv(std::io::BufReader::new(file))
        } else {
            Self::read_binary(std::io::BufReader::new(file))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            self.write_csv(file)
        } else {
            self.write_binary(file)
        }
    }
}

/// Empirical quantization error summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    /// `sqrt(mean ||z - z_q||^2)`.
    pub e_norm: f64,
    /// `sqrt(mean ||z_q||^2)`.
    pub zq_norm: f64,
    /// Largest absolute eigenvalue of the weight matrix.
    pub v_spectral: f64,
    pub epsilon: f64,
}

impl ErrorBudget {
    pub fn new(e_norm: f64, zq_norm: f64, v_spectral: f64) -> Self {
        Self {
            e_norm,
            zq_norm,
            v_spectral,
            epsilon: epsilon_of(e_norm, zq_norm, v_spectral),
        }
    }
}

pub fn epsilon_of(e_norm: f64, zq_norm: f64, v_spectral: f64) -> f64 {
    (2.0 * zq_norm + e_norm) * v_spectral * e_norm
}

/// Bins `samples` onto `grid`, returning the pmf over occupied cell centers
/// (ordered by cell index) and the error budget for `variant`.
pub fn quantize(samples: &SampleSet, grid: &GridQuantizer, variant: CostVariant) -> Result<(JointPmf, ErrorBudget)> {
    if samples.dim() != grid.dim() {
        return Err(Error::Dimension(format!(
            "samples have dimension {}, grid {}",
            samples.dim(),
            grid.dim()
        )));
    }
    let count = samples.count();
    if count == 0 {
        return Err(Error::EmptySamples);
    }
    let cells: Vec<Option<usize>> = samples.data.par_chunks(samples.dim).map(|p| grid.cell_of(p)).collect();
    if let Some(i) = cells.iter().position(Option::is_none) {
        return Err(Error::OutOfBox(i));
    }
    let cells: Vec<usize> = cells.into_iter().flatten().collect();

    // per-chunk partial sums, merged in chunk order
    let partial: Vec<(f64, f64)> = samples
        .data
        .par_chunks(CHUNK * samples.dim)
        .zip(cells.par_chunks(CHUNK))
        .map(|(pts, idx)| {
            let mut e2 = 0.0;
            let mut q2 = 0.0;
            for (p, &c) in pts.chunks_exact(samples.dim).zip(idx) {
                let center = grid.center(c);
                e2 += p.iter().zip(center.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                q2 += center.norm_squared();
            }
            (e2, q2)
        })
        .collect();
    let (e2, q2) = partial.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));

    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &c in &cells {
        *counts.entry(c).or_default() += 1;
    }
    let total = count as f64;
    let states = counts.keys().map(|&c| grid.center(c)).collect();
    let probs = counts.values().map(|&k| k as f64 / total).collect();
    let pmf = JointPmf::new(grid.dim() / 2, states, probs)?;

    let v_spectral = spectral_norm(&variant.weight_matrix(grid.dim() / 2))?;
    let budget = ErrorBudget::new((e2 / total).sqrt(), (q2 / total).sqrt(), v_spectral);
    Ok((pmf, budget))
}

/// Interval `[discrete_value - epsilon, discrete_value]` that contains the
/// continuous optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedInterval {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
}

impl CertifiedInterval {
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lower - slack && v <= self.upper + slack
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

pub fn certify(discrete_value: f64, budget: &ErrorBudget) -> CertifiedInterval {
    CertifiedInterval {
        lower: discrete_value - budget.epsilon,
        upper: discrete_value,
        epsilon: budget.epsilon,
    }
}
