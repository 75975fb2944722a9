//! Sampled trajectories of a model's output process.
//!
//! Noise is Gaussian, drawn from [`NOISE_RNG`] in time-major order
//! (`e_1(0), .., e_l(0), e_1(1), ..`), so the recursive simulator and the
//! factor-based simulator consume identical streams for the same seed.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LrdnError, Result};
use crate::model::{validate, LrdnModel};
use crate::polymat::{invert_checked, PolynomialMatrix};

/// Default number of discarded warm-up samples.
pub const DEFAULT_BURN_IN: usize = 500;
/// Identifies the noise generator recorded in output metadata.
pub const NOISE_RNG: &str = "ChaCha8Rng::seed_from_u64 + rand_distr::StandardNormal, time-major";

/// `T x (m + l)` samples; columns `0..m` are `y_m`, columns `m..m+l` are `y_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub m: usize,
    pub l: usize,
    pub data: DMatrix<f64>,
    /// Seed of the generating run (0 for external data).
    pub seed: u64,
    pub burn_in: usize,
}

/// Sidecar metadata written next to a CSV trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub m: usize,
    pub l: usize,
    #[serde(rename = "T")]
    pub num_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub model_hash: Option<String>,
    pub rng: String,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>, m: usize, l: usize) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(LrdnError::InsufficientData {
                available: 0,
                required: 1,
            });
        }
        if data.ncols() != m + l {
            return Err(LrdnError::ShapeMismatch(format!(
                "data has {} columns, expected m + l = {}",
                data.ncols(),
                m + l
            )));
        }
        Ok(Self {
            m,
            l,
            data,
            seed: 0,
            burn_in: 0,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.m + self.l
    }

    /// Column of `y_m(i)` (0-based `i`).
    pub fn y_m(&self, i: usize) -> DVector<f64> {
        self.data.column(i).into_owned()
    }

    /// Column of `y_l(j)` (0-based `j`).
    pub fn y_l(&self, j: usize) -> DVector<f64> {
        self.data.column(self.m + j).into_owned()
    }

    /// The `y_l` block as a `T x l` matrix.
    pub fn l_block(&self) -> DMatrix<f64> {
        self.data.columns(self.m, self.l).into_owned()
    }

    /// Reorders channels into `[m_indices; l_indices]` (0-based original indices).
    pub fn reordered(&self, m_indices: &[usize], l_indices: &[usize]) -> Result<Self> {
        let n = self.num_channels();
        let mut seen = vec![false; n];
        for &c in m_indices.iter().chain(l_indices) {
            if c >= n || seen[c] {
                return Err(LrdnError::InvalidConfig(format!("channel {c} is out of range or repeated")));
            }
            seen[c] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(LrdnError::InvalidConfig("partition does not cover every channel".into()));
        }
        let order: Vec<usize> = m_indices.iter().chain(l_indices).copied().collect();
        let data = self.data.select_columns(&order);
        Ok(Self {
            m: m_indices.len(),
            l: l_indices.len(),
            data,
            seed: self.seed,
            burn_in: self.burn_in,
        })
    }

    pub fn meta(&self, model_hash: Option<String>) -> SeriesMeta {
        SeriesMeta {
            m: self.m,
            l: self.l,
            num_samples: self.num_samples(),
            burn_in: self.burn_in,
            seed: self.seed,
            model_hash,
            rng: NOISE_RNG.to_string(),
        }
    }

    /// Writes `t,y1,..,y{m+l}` with one sample per row (t from 1).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.num_channels()).map(|c| format!("y{c}")));
        w.write_record(&header)?;
        for t in 0..self.num_samples() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(self.data.row(t).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`TimeSeries::write_csv`]. The partition is
    /// taken from `meta` when given; otherwise every channel is placed in `y_l`.
    pub fn read_csv<R: Read>(reader: R, meta: Option<&SeriesMeta>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0).map(str::trim) != Some("t") || header.len() < 2 {
            return Err(LrdnError::Parse("expected header `t,y1,...`".into()));
        }
        let channels = header.len() - 1;
        let mut values = Vec::new();
        let mut rows = 0;
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(LrdnError::Parse(format!("row {} has {} fields", line + 1, record.len())));
            }
            for field in record.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| LrdnError::Parse(format!("row {}: bad number `{field}`", line + 1)))?;
                values.push(v);
            }
            rows += 1;
        }
        let data = DMatrix::from_row_slice(rows, channels, &values);
        let (m, l) = match meta {
            Some(meta) => (meta.m, meta.l),
            None => (0, channels),
        };
        let mut ts = Self::new(data, m, l)?;
        if let Some(meta) = meta {
            ts.seed = meta.seed;
            ts.burn_in = meta.burn_in;
        }
        Ok(ts)
    }
}

/// Per-trial seed as a pure function of the master seed and trial index
/// (SplitMix64 finalizer over `master + (index + 1) * 0x9E3779B97F4A7C15`).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `total x l` Gaussian noise with variances `sigma`, drawn time-major.
fn draw_noise(sigma: &[f64], total: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
    let l = sigma.len();
    let mut e = DMatrix::zeros(total, l);
    for t in 0..total {
        for j in 0..l {
            let z: f64 = StandardNormal.sample(&mut rng);
            e[(t, j)] = scale[j] * z;
        }
    }
    e
}

/// Simulates the network recursion from zero initial history and drops the
/// first `burn_in` samples. `y_m` uses the full history, so the retained
/// window satisfies `y_m = G_ml y_l` exactly.
pub fn simulate(model: &LrdnModel, num_samples: usize, burn_in: usize, seed: u64) -> Result<TimeSeries> {
    validate(model).into_result()?;
    if num_samples == 0 {
        return Err(LrdnError::InvalidConfig("T must be at least 1".into()));
    }
    let (m, l) = (model.m, model.l);
    let total = burn_in + num_samples;
    let w = draw_noise(&model.sigma_l, total, seed);
    let lead_inv = invert_checked(&(DMatrix::identity(l, l) - model.g_l.coeff(0)))?;

    // rows are time, columns are channels
    let mut yl = DMatrix::<f64>::zeros(total, l);
    let mut rhs = DVector::<f64>::zeros(l);
    for t in 0..total {
        rhs.copy_from(&w.row(t).transpose());
        for k in 1..=model.g_l.degree().min(t) {
            rhs.gemv(1.0, model.g_l.coeff(k), &yl.row(t - k).transpose(), 1.0);
        }
        yl.set_row(t, &(&lead_inv * &rhs).transpose());
    }

    let mut data = DMatrix::<f64>::zeros(num_samples, m + l);
    for s in 0..num_samples {
        let t = burn_in + s;
        let mut ym = DVector::<f64>::zeros(m);
        for k in 0..=model.g_ml.degree().min(t) {
            ym.gemv(1.0, model.g_ml.coeff(k), &yl.row(t - k).transpose(), 1.0);
        }
        data.view_mut((s, 0), (1, m)).copy_from(&ym.transpose());
        data.view_mut((s, m), (1, l)).copy_from(&yl.row(t));
    }
    Ok(TimeSeries {
        m,
        l,
        data,
        seed,
        burn_in,
    })
}

/// Simulates `y(t) = sum_k C_k e(t - k)` directly from a stacked transfer
/// with `l` columns; the top `rows - l` outputs become `y_m`.
pub fn simulate_from_factor(
    full_transfer: &PolynomialMatrix,
    sigma: &[f64],
    num_samples: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeries> {
    let (rows, l) = full_transfer.shape();
    if sigma.len() != l {
        return Err(LrdnError::ShapeMismatch(format!(
            "sigma has length {}, transfer has {l} columns",
            sigma.len()
        )));
    }
    if rows < l {
        return Err(LrdnError::ShapeMismatch(format!(
            "transfer has {rows} rows, fewer than its {l} columns"
        )));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(LrdnError::InvalidConfig("sigma entries must be positive".into()));
    }
    if num_samples == 0 {
        return Err(LrdnError::InvalidConfig("T must be at least 1".into()));
    }
    let total = burn_in + num_samples;
    let e = draw_noise(sigma, total, seed);
    let mut data = DMatrix::<f64>::zeros(num_samples, rows);
    let mut y = DVector::<f64>::zeros(rows);
    for s in 0..num_samples {
        let t = burn_in + s;
        y.fill(0.0);
        for k in 0..=full_transfer.degree().min(t) {
            y.gemv(1.0, full_transfer.coeff(k), &e.row(t - k).transpose(), 1.0);
        }
        data.set_row(s, &y.transpose());
    }
    Ok(TimeSeries {
        m: rows - l,
        l,
        data,
        seed,
        burn_in,
    })
}
