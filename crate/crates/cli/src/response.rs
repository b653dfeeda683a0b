//! Measured device magnitude responses and equivalent-filter fitting.
//!
//! A response file holds one `frequency_Hz magnitude_dB` pair per line,
//! separated by whitespace or a comma. `#` starts a comment; a header line
//! naming the two columns is accepted.

use ponsim::filter::{fit_equivalent_gf, to_normalized, NormalizedBandwidths};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub freqs_hz: Vec<f64>,
    pub mag_db: Vec<f64>,
}

impl Response {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut freqs_hz = Vec::new();
        let mut mag_db = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if freqs_hz.is_empty() && fields == ["frequency_Hz", "magnitude_dB"] {
                continue;
            }
            let bad = || CliError::Config(format!("line {}: expected `frequency_Hz magnitude_dB`, got `{line}`", idx + 1));
            let [f, m] = fields.as_slice() else {
                return Err(bad());
            };
            let (f, m): (f64, f64) = (f.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
            if !(f.is_finite() && f >= 0.0 && m.is_finite()) {
                return Err(bad());
            }
            if freqs_hz.last().is_some_and(|&prev| f <= prev) {
                return Err(CliError::Config(format!(
                    "line {}: frequencies must be strictly increasing",
                    idx + 1
                )));
            }
            freqs_hz.push(f);
            mag_db.push(m);
        }
        if freqs_hz.len() < 2 {
            return Err(CliError::Config("a response needs at least two points".into()));
        }
        Ok(Self { freqs_hz, mag_db })
    }

    /// Linear interpolation in dB; `None` outside the measured span.
    pub fn at(&self, f: f64) -> Option<f64> {
        let (first, last) = (self.freqs_hz[0], *self.freqs_hz.last()?);
        if !(first..=last).contains(&f) {
            return None;
        }
        let k = self.freqs_hz.partition_point(|&x| x < f);
        if self.freqs_hz[k] == f {
            return Some(self.mag_db[k]);
        }
        let (f0, f1) = (self.freqs_hz[k - 1], self.freqs_hz[k]);
        let t = (f - f0) / (f1 - f0);
        Some(self.mag_db[k - 1] + t * (self.mag_db[k] - self.mag_db[k - 1]))
    }

    /// TX followed by RX, on the TX grid points covered by both.
    pub fn cascade(tx: &Response, rx: &Response) -> CliResult<Response> {
        let (freqs_hz, mag_db): (Vec<f64>, Vec<f64>) = tx
            .freqs_hz
            .iter()
            .zip(&tx.mag_db)
            .filter_map(|(&f, &m)| rx.at(f).map(|r| (f, m + r)))
            .unzip();
        if freqs_hz.len() < 2 {
            return Err(CliError::Config("TX and RX responses share fewer than two frequency points".into()));
        }
        Ok(Response { freqs_hz, mag_db })
    }
}

/// Single identical super-Gaussian filter equivalent to a TX/RX pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentFilter {
    pub f3db_hz: f64,
    pub f20db_hz: f64,
}

impl EquivalentFilter {
    pub fn normalized(&self, rb_gbps: f64) -> NormalizedBandwidths {
        to_normalized(self.f3db_hz, self.f20db_hz, rb_gbps * 1e9)
    }
}

pub fn fit_pair(tx: &Response, rx: &Response) -> CliResult<EquivalentFilter> {
    let c = Response::cascade(tx, rx)?;
    let (f3db_hz, f20db_hz) = fit_equivalent_gf(&c.freqs_hz, &c.mag_db).map_err(CliError::runtime)?;
    Ok(EquivalentFilter { f3db_hz, f20db_hz })
}
