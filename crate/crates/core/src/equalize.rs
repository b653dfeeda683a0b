//! Receiver DSP: timing alignment, 2-sps FFE trained by LMS on a pilot,
//! per-format slicing and bit error counting.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{fft_forward, fft_inverse, filter_real, FreqGrid, SampledSignal};
use crate::tx::{gray_bits, gray_index, precode_db, ModFormat};

/// Minimum normalized correlation accepted by [`downsample_align`].
pub const ALIGNMENT_FLOOR: f64 = 0.1;

/// Bits counted per BER estimate.
pub const BER_COUNT: usize = 130_000;

/// Consecutive runaway symbols that flag LMS divergence.
const DIVERGENCE_RUN: usize = 500;
const DIVERGENCE_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerConfig {
    pub taps: usize,
    /// Input oversampling; the FFE is fractionally spaced at T/2.
    pub samples_per_symbol: usize,
    /// LMS step on unit-RMS input.
    pub step: f64,
    pub training_symbols: usize,
    /// Index of the tap aligned with the current symbol.
    pub center_tap: usize,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            taps: 20,
            samples_per_symbol: 2,
            step: 1e-3,
            training_symbols: 60_000,
            center_tap: 10,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps < 1 {
            return Err(Error::InvalidParameter("equalizer needs at least one tap".into()));
        }
        if self.samples_per_symbol != 2 {
            return Err(Error::InvalidParameter(
                "the FFE runs at two samples per symbol".into(),
            ));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidParameter(format!("LMS step must be positive, got {}", self.step)));
        }
        if self.center_tap >= self.taps {
            return Err(Error::InvalidParameter(format!(
                "center tap {} outside 0..{}",
                self.center_tap, self.taps
            )));
        }
        Ok(())
    }
}

/// Known training targets, normalized to unit peak.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotStream {
    pub format: ModFormat,
    pub symbols: Vec<f64>,
}

impl PilotStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Ideal decision levels for this format.
    pub fn levels(&self) -> &'static [f64] {
        target_levels(self.format)
    }
}

fn target_levels(format: ModFormat) -> &'static [f64] {
    match format {
        ModFormat::Pam2 | ModFormat::Odb => &[-1.0, 1.0],
        ModFormat::Pam4 => &[-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0],
        ModFormat::Edb => &[-1.0, 0.0, 1.0],
    }
}

fn antipodal(b: u8) -> f64 {
    if b & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Training targets for the transmitted data bits.
///
/// PAM-2 and ODB use the antipodal data; PAM-4 the Gray-mapped levels; EDB
/// the add-and-delay of the antipodal precoded stream, halved to {-1, 0, 1}.
pub fn make_pilot(data: &[u8], format: ModFormat) -> Result<PilotStream> {
    let symbols = match format {
        ModFormat::Pam2 | ModFormat::Odb => data.iter().map(|&b| antipodal(b)).collect(),
        ModFormat::Pam4 => {
            if !data.len().is_multiple_of(2) {
                return Err(Error::OddBitCount(data.len()));
            }
            let levels = target_levels(format);
            data.chunks_exact(2)
                .map(|p| levels[gray_index(p[0], p[1])])
                .collect()
        }
        ModFormat::Edb => {
            let mut prev = antipodal(0);
            precode_db(data)
                .into_iter()
                .map(|b| {
                    let cur = antipodal(b);
                    let c = 0.5 * (cur + prev);
                    prev = cur;
                    c
                })
                .collect()
        }
    };
    Ok(PilotStream { format, symbols })
}

/// Output of [`downsample_align`].
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    /// Two samples per symbol; even indices sit on symbol centers.
    pub samples: Vec<f64>,
    /// Offset of symbol 0 in the input, in input samples.
    pub delay: usize,
    /// Normalized correlation magnitude at the chosen delay.
    pub correlation: f64,
}

fn zero_mean(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Circular cross-correlation `c[l] = sum_k a[k + l] b[k]`.
fn circular_xcorr(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut fa);
    fft_forward(&mut fb);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    fft_inverse(&mut prod);
    prod.into_iter().map(|c| c.re / n as f64).collect()
}

/// Ideal decimation low-pass: passes `|f| < symbol_rate`, the Nyquist
/// frequency at two samples per symbol. Band-edge bins get 1/2.
pub fn antialias_response(grid: &FreqGrid, symbol_rate: f64) -> Vec<Complex64> {
    let edge = 1e-9 * symbol_rate;
    grid.sample(|f| {
        let d = f.abs() - symbol_rate;
        let g = if d < -edge {
            1.0
        } else if d <= edge {
            0.5
        } else {
            0.0
        };
        Complex64::new(g, 0.0)
    })
}

/// Band-limit to the 2-sps Nyquist frequency, pick the sampling phase and
/// bulk delay that best match the pilot, then decimate to two samples per
/// symbol.
pub fn downsample_align(current: &SampledSignal, pilot: &PilotStream) -> Result<Aligned> {
    let x = current.as_real().ok_or(Error::WrongDomain {
        expected: "real current",
        got: "complex",
    })?;
    if pilot.is_empty() || x.len() % pilot.len() != 0 {
        return align_samples(x, pilot);
    }
    let symbol_rate = current.sample_rate() / (x.len() / pilot.len()) as f64;
    let h = antialias_response(&current.grid(), symbol_rate);
    align_samples(&filter_real(x, &h), pilot)
}

pub(crate) fn align_samples(x: &[f64], pilot: &PilotStream) -> Result<Aligned> {
    let n_sym = pilot.len();
    if n_sym == 0 || !x.len().is_multiple_of(n_sym) {
        return Err(Error::InvalidParameter(format!(
            "signal of {} samples is not an integer number of {} symbols",
            x.len(),
            n_sym
        )));
    }
    let sps = x.len() / n_sym;
    if sps < 2 || !sps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "need an even oversampling of at least 2, got {sps}"
        )));
    }
    let total = x.len();
    let p = zero_mean(&pilot.symbols);
    let p_norm = norm(&p);
    let mean_x = x.iter().sum::<f64>() / total as f64;

    let phase_samples = |delay: usize| -> Vec<f64> {
        (0..n_sym)
            .map(|k| x[(delay + k * sps) % total] - mean_x)
            .collect()
    };
    let score = |delay: usize| -> f64 {
        let r = phase_samples(delay);
        let denom = norm(&r) * p_norm;
        if denom == 0.0 {
            return 0.0;
        }
        r.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>().abs() / denom
    };

    // Coarse: symbol-rate lag from two half-symbol-apart phases.
    let mut coarse_lag = 0usize;
    let mut coarse_best = -1.0;
    for phase in [0, sps / 2] {
        let r = phase_samples(phase);
        let c = circular_xcorr(&r, &p);
        for (lag, v) in c.iter().enumerate() {
            if v.abs() > coarse_best {
                coarse_best = v.abs();
                coarse_lag = (lag * sps + phase) / sps;
            }
        }
    }

    // Fine: every phase within one symbol either side of the coarse lag.
    let mut best_delay = 0usize;
    let mut best = -1.0;
    for lag_offset in [0usize, n_sym - 1, 1] {
        let lag = (coarse_lag + lag_offset) % n_sym;
        for phase in 0..sps {
            let delay = (lag * sps + phase) % total;
            let s = score(delay);
            if s > best {
                best = s;
                best_delay = delay;
            }
        }
    }
    if best < ALIGNMENT_FLOOR {
        return Err(Error::AlignmentFailure {
            peak: best,
            floor: ALIGNMENT_FLOOR,
        });
    }
    let half = sps / 2;
    let samples = (0..2 * n_sym)
        .map(|m| x[(best_delay + m * half) % total])
        .collect();
    Ok(Aligned {
        samples,
        delay: best_delay,
        correlation: best,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfeOutput {
    /// One equalized value per symbol, on the pilot's scale.
    pub symbols: Vec<f64>,
    pub taps: Vec<f64>,
    /// Squared error per training symbol.
    pub training_mse: Vec<f64>,
}

/// Fractionally spaced FFE adapted by LMS during the training symbols and
/// frozen afterwards. The input is taken as circular and normalized to
/// zero mean and unit RMS.
pub fn ffe_lms(input: &[f64], pilot: &PilotStream, cfg: &EqualizerConfig) -> Result<FfeOutput> {
    cfg.validate()?;
    let sps = cfg.samples_per_symbol;
    if input.len() < sps || !input.len().is_multiple_of(sps) {
        return Err(Error::InvalidParameter(format!(
            "input of {} samples is not a whole number of symbols",
            input.len()
        )));
    }
    let n_sym = input.len() / sps;
    if pilot.len() < cfg.training_symbols || n_sym < cfg.training_symbols {
        return Err(Error::InvalidParameter(format!(
            "training needs {} symbols, have {} pilot / {} received",
            cfg.training_symbols,
            pilot.len(),
            n_sym
        )));
    }
    let x = {
        let centred = zero_mean(input);
        let rms = (centred.iter().map(|v| v * v).sum::<f64>() / centred.len() as f64).sqrt();
        if rms == 0.0 {
            centred
        } else {
            centred.into_iter().map(|v| v / rms).collect::<Vec<_>>()
        }
    };
    let len = x.len();
    let mut w = vec![0.0; cfg.taps];
    let mut window = vec![0.0; cfg.taps];
    let fill = |window: &mut [f64], k: usize| {
        // Tap j sees sample 2k + center - j, so tap `center` is on symbol k.
        let base = (sps * k + cfg.center_tap) % len;
        for (j, slot) in window.iter_mut().enumerate() {
            *slot = x[(base + len - j) % len];
        }
    };

    let initial =
        pilot.symbols[..cfg.training_symbols].iter().map(|v| v * v).sum::<f64>() / cfg.training_symbols.max(1) as f64;
    let limit = DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE);
    let mut run = 0usize;
    let mut training_mse = Vec::with_capacity(cfg.training_symbols);
    for k in 0..cfg.training_symbols {
        fill(&mut window, k);
        let y: f64 = w.iter().zip(&window).map(|(a, b)| a * b).sum();
        let e = pilot.symbols[k] - y;
        let e2 = e * e;
        if !e2.is_finite() {
            return Err(Error::Diverged { symbol: k });
        }
        run = if e2 > limit { run + 1 } else { 0 };
        if run >= DIVERGENCE_RUN {
            return Err(Error::Diverged { symbol: k });
        }
        training_mse.push(e2);
        let g = cfg.step * e;
        for (wj, xj) in w.iter_mut().zip(&window) {
            *wj += g * xj;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            symbol: cfg.training_symbols,
        });
    }
    let symbols = (0..n_sym)
        .map(|k| {
            fill(&mut window, k);
            w.iter().zip(&window).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(FfeOutput {
        symbols,
        taps: w,
        training_mse,
    })
}

fn nearest(levels: &[f64], y: f64) -> usize {
    let mut best = 0;
    for (i, l) in levels.iter().enumerate() {
        if (y - l).abs() < (y - levels[best]).abs() {
            best = i;
        }
    }
    best
}

/// Hard decisions mapped back to data bits.
pub fn decide_decode(symbols: &[f64], format: ModFormat) -> Vec<u8> {
    let levels = target_levels(format);
    match format {
        ModFormat::Pam2 | ModFormat::Odb => symbols.iter().map(|&y| u8::from(y >= 0.0)).collect(),
        ModFormat::Pam4 => symbols
            .iter()
            .flat_map(|&y| gray_bits(nearest(levels, y)))
            .collect(),
        // Outer duobinary levels carry a 0, the middle level a 1.
        ModFormat::Edb => symbols
            .iter()
            .map(|&y| u8::from(nearest(levels, y) == 1))
            .collect(),
    }
}

/// Fraction of mismatches over exactly `count` bits.
pub fn count_ber(rx: &[u8], tx: &[u8], count: usize) -> Result<f64> {
    let available = rx.len().min(tx.len());
    if available < count || count == 0 {
        return Err(Error::InsufficientBits {
            needed: count.max(1),
            available,
        });
    }
    let errors = rx[..count]
        .iter()
        .zip(&tx[..count])
        .filter(|(a, b)| (*a & 1) != (*b & 1))
        .count();
    Ok(errors as f64 / count as f64)
}
