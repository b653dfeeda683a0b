//! Electrical low-pass models for the transceiver front ends.
//!
//! Attenuation figures (-3 dB, -20 dB) always refer to the power response
//! `|H(f)|^2`. Butterworth filters carry their minimum-phase response; the
//! super-Gaussian profile `exp(-(f/f0)^(2n) / 2)` is zero-phase.

use std::f64::consts::{LN_10, LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::FreqGrid;

/// Power attenuation at the -3 dB point.
pub const HALF_POWER: f64 = 0.5;
/// Power attenuation at the -20 dB point.
pub const TWENTY_DB_POWER: f64 = 0.01;

/// Default fitting window for [`fit_equivalent_gf`], in dB below DC.
pub const FIT_FLOOR_DB: f64 = -25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    Butterworth { poles: u32, f3db: f64 },
    SuperGaussian { order: f64, f0: f64 },
    /// No filtering.
    Bypass,
}

impl FilterSpec {
    pub fn butterworth(poles: u32, f3db: f64) -> Result<Self> {
        if poles < 1 {
            return Err(Error::InvalidParameter("Butterworth filter needs at least one pole".into()));
        }
        if !(f3db.is_finite() && f3db > 0.0) {
            return Err(Error::InvalidParameter(format!("f3dB must be positive, got {f3db}")));
        }
        Ok(FilterSpec::Butterworth { poles, f3db })
    }

    /// Super-Gaussian filter with the given -3 dB and -20 dB frequencies.
    pub fn super_gaussian(f3db: f64, f20db: f64) -> Result<Self> {
        let (order, f0) = supergaussian_params(f3db, f20db)?;
        Ok(FilterSpec::SuperGaussian { order, f0 })
    }

    /// Super-Gaussian filter from bit-rate-normalized bandwidths in percent.
    pub fn from_normalized(b3db_pct: f64, b20db_pct: f64, bit_rate: f64) -> Result<Self> {
        Self::super_gaussian(b3db_pct / 100.0 * bit_rate, b20db_pct / 100.0 * bit_rate)
    }

    pub fn f3db(&self) -> f64 {
        match *self {
            FilterSpec::Butterworth { f3db, .. } => f3db,
            FilterSpec::SuperGaussian { order, f0 } => f0 * LN_2.powf(1.0 / (2.0 * order)),
            FilterSpec::Bypass => f64::INFINITY,
        }
    }

    pub fn f20db(&self) -> f64 {
        match *self {
            FilterSpec::Butterworth { poles, f3db } => f3db * 99f64.powf(1.0 / (2.0 * poles as f64)),
            FilterSpec::SuperGaussian { order, f0 } => {
                f0 * (2.0 * LN_10).powf(1.0 / (2.0 * order))
            }
            FilterSpec::Bypass => f64::INFINITY,
        }
    }

    /// Complex response at frequency `f` [Hz] (two-sided).
    pub fn response_at(&self, f: f64) -> Complex64 {
        match *self {
            FilterSpec::Butterworth { poles, f3db } => butterworth_at(poles, f3db, f),
            FilterSpec::SuperGaussian { order, f0 } => {
                Complex64::new(supergaussian_at(order, f0, f), 0.0)
            }
            FilterSpec::Bypass => Complex64::new(1.0, 0.0),
        }
    }

    pub fn power_response_at(&self, f: f64) -> f64 {
        self.response_at(f).norm_sqr()
    }

    pub fn response(&self, grid: &FreqGrid) -> Vec<Complex64> {
        grid.sample(|f| self.response_at(f))
    }

    pub fn normalized(&self, bit_rate: f64) -> NormalizedBandwidths {
        to_normalized(self.f3db(), self.f20db(), bit_rate)
    }
}

/// Bandwidths as a percentage of the bit rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedBandwidths {
    pub b3db_pct: f64,
    pub b20db_pct: f64,
    pub bit_rate: f64,
}

pub fn to_normalized(f3db: f64, f20db: f64, bit_rate: f64) -> NormalizedBandwidths {
    NormalizedBandwidths {
        b3db_pct: 100.0 * f3db / bit_rate,
        b20db_pct: 100.0 * f20db / bit_rate,
        bit_rate,
    }
}

fn butterworth_at(poles: u32, f3db: f64, f: f64) -> Complex64 {
    let n = poles as f64;
    let s = Complex64::new(0.0, f / f3db);
    (1..=poles).fold(Complex64::new(1.0, 0.0), |acc, k| {
        let theta = PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
        let p = Complex64::from_polar(1.0, theta);
        // (-p) normalizes each section to unit DC gain since |p| = 1.
        acc * (-p) / (s - p)
    })
}

fn supergaussian_at(order: f64, f0: f64, f: f64) -> f64 {
    (-0.5 * (f.abs() / f0).powf(2.0 * order)).exp()
}

/// Minimum-phase Butterworth response on `grid`.
pub fn butterworth_response(poles: u32, f3db: f64, grid: &FreqGrid) -> Result<Vec<Complex64>> {
    FilterSpec::butterworth(poles, f3db).map(|spec| spec.response(grid))
}

/// Order and corner frequency of the super-Gaussian meeting `f3db`, `f20db`.
pub fn supergaussian_params(f3db: f64, f20db: f64) -> Result<(f64, f64)> {
    if !(f3db.is_finite() && f3db > 0.0 && f20db.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidths must be positive and finite, got {f3db}, {f20db}"
        )));
    }
    if f20db <= f3db {
        return Err(Error::BandwidthOrder { f3db, f20db });
    }
    let order = (2.0 * LN_10 / LN_2).ln() / (2.0 * (f20db / f3db).ln());
    let f0 = f3db / LN_2.powf(1.0 / (2.0 * order));
    Ok((order, f0))
}

/// Zero-phase super-Gaussian response on `grid`.
pub fn supergaussian_response(order: f64, f0: f64, grid: &FreqGrid) -> Vec<Complex64> {
    grid.sample(|f| Complex64::new(supergaussian_at(order, f0, f), 0.0))
}

/// Cascade of two identical super-Gaussians, in dB of the power response.
fn gf_pair_db(order: f64, f0: f64, f: f64) -> f64 {
    -(20.0 / LN_10) * (f.abs() / f0).powf(2.0 * order)
}

/// Fit an identical super-Gaussian TX/RX pair to a measured cascade.
///
/// `mag_db` is `20 log10 |H_TX(f) H_RX(f)|` at `freqs`. Points down to
/// [`FIT_FLOOR_DB`] enter a uniform least-squares cost in dB. Returns the
/// single filter's `(f3dB, f20dB)`.
pub fn fit_equivalent_gf(freqs: &[f64], mag_db: &[f64]) -> Result<(f64, f64)> {
    if freqs.len() != mag_db.len() || freqs.is_empty() {
        return Err(Error::InvalidParameter(
            "frequency and magnitude tables must be nonempty and equally long".into(),
        ));
    }
    // Reference everything to the lowest-frequency point.
    let (i0, _) = freqs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let ref_db = mag_db[i0];
    let rel: Vec<f64> = mag_db.iter().map(|m| m - ref_db).collect();
    if rel.iter().fold(f64::INFINITY, |m, &v| m.min(v)) > -20.0 {
        return Err(Error::FitRange { level_db: -20.0 });
    }
    let points: Vec<(f64, f64)> = freqs
        .iter()
        .zip(&rel)
        .filter(|(&f, &m)| f >= 0.0 && m >= FIT_FLOOR_DB)
        .map(|(&f, &m)| (f, m))
        .collect();

    // Start from a log-log line through the attenuating points:
    // ln(-dB ln10 / 20) = 2n ln f - 2n ln f0.
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut count = 0.0;
    for &(f, m) in &points {
        if f > 0.0 && m < -0.1 {
            let x = f.ln();
            let y = (-m * LN_10 / 20.0).ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            count += 1.0;
        }
    }
    let (order0, f0_0) = if count >= 2.0 && (count * sxx - sx * sx).abs() > 1e-12 {
        let slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
        let intercept = (sy - slope * sx) / count;
        let order = (slope / 2.0).max(0.2);
        (order, (-intercept / slope).exp())
    } else {
        (1.0, points.last().map(|p| p.0).unwrap_or(1.0))
    };
    let spec0 = FilterSpec::SuperGaussian {
        order: order0,
        f0: f0_0,
    };
    let start = [spec0.f3db().ln(), (spec0.f20db() / spec0.f3db() - 1.0).ln()];

    let decode = |p: &[f64; 2]| -> (f64, f64) {
        let f3 = p[0].exp();
        (f3, f3 * (1.0 + p[1].exp()))
    };
    let cost = |p: &[f64; 2]| -> f64 {
        let (f3, f20) = decode(p);
        match supergaussian_params(f3, f20) {
            Ok((order, f0)) => points
                .iter()
                .map(|&(f, m)| (gf_pair_db(order, f0, f) - m).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let best = nelder_mead(cost, start, 0.1, 1e-14, 4000);
    Ok(decode(&best))
}

/// Minimize `cost` over two parameters with the Nelder–Mead simplex.
fn nelder_mead<F: Fn(&[f64; 2]) -> f64>(
    cost: F,
    start: [f64; 2],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> [f64; 2] {
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = simplex.map(|p| cost(&p));
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() <= ftol * (values[0].abs() + ftol) {
            break;
        }
        let centroid = [
            (simplex[0][0] + simplex[1][0]) / 2.0,
            (simplex[0][1] + simplex[1][1]) / 2.0,
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = cost(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = cost(&expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = cost(&contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    values[i] = cost(&simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    simplex[best]
}

/// `20 log10 |H(f)|^2` of two cascaded copies of `spec`, sampled at `freqs`.
pub fn cascade_db(spec: &FilterSpec, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| 20.0 * spec.power_response_at(f).log10())
        .collect()
}
