//! Uniformly sampled waveforms and frequency-domain filtering.
//!
//! Every block of the link works on one period of a periodic test pattern,
//! so filtering is circular: the signal is transformed with a full-length
//! FFT, multiplied by a transfer function sampled on the two-sided grid
//! (FFT order, resolution `fs / N`) and transformed back.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Physical meaning of a signal's samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Drive voltage [V].
    Electrical,
    /// Optical field [sqrt(W)].
    Field,
    /// Optical power [W].
    Power,
    /// Photocurrent [A].
    Current,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Electrical => "electrical",
            Domain::Field => "field",
            Domain::Power => "power",
            Domain::Current => "current",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A uniformly sampled real or complex waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Samples,
    sample_rate: f64,
    domain: Domain,
}

impl SampledSignal {
    pub fn new(samples: Samples, sample_rate: f64, domain: Domain) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let bad = match &samples {
            Samples::Real(v) => v.iter().position(|x| !x.is_finite()),
            Samples::Complex(v) => v.iter().position(|x| !(x.re.is_finite() && x.im.is_finite())),
        };
        if let Some(index) = bad {
            return Err(Error::NonFinite(index));
        }
        Ok(Self {
            samples,
            sample_rate,
            domain,
        })
    }

    pub fn real(samples: Vec<f64>, sample_rate: f64, domain: Domain) -> Result<Self> {
        Self::new(Samples::Real(samples), sample_rate, domain)
    }

    pub fn complex(samples: Vec<Complex64>, sample_rate: f64, domain: Domain) -> Result<Self> {
        Self::new(Samples::Complex(samples), sample_rate, domain)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn is_real(&self) -> bool {
        matches!(self.samples, Samples::Real(_))
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Real(v) => Some(v),
            Samples::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.samples {
            Samples::Complex(v) => Some(v),
            Samples::Real(_) => None,
        }
    }

    pub fn into_samples(self) -> Samples {
        self.samples
    }

    /// Samples promoted to complex, regardless of storage.
    pub fn to_complex(&self) -> Vec<Complex64> {
        match &self.samples {
            Samples::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Samples::Complex(v) => v.clone(),
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        match &self.samples {
            Samples::Real(v) => v.iter().map(|x| x * x).sum(),
            Samples::Complex(v) => v.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    pub fn grid(&self) -> FreqGrid {
        FreqGrid::new(self.len(), self.sample_rate)
    }

    pub(crate) fn with_samples(&self, samples: Samples, domain: Domain) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            domain,
        }
    }
}

/// Two-sided frequency grid in FFT order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    len: usize,
    sample_rate: f64,
}

impl FreqGrid {
    pub fn new(len: usize, sample_rate: f64) -> Self {
        Self { len, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn resolution(&self) -> f64 {
        self.sample_rate / self.len as f64
    }

    /// Frequency of bin `k`; bins at and above `N/2` are negative.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.len as i64;
        let k = k as i64;
        let signed = if 2 * k >= n { k - n } else { k };
        signed as f64 * self.resolution()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.freq(k))
    }

    /// Sample `h(f)` on every bin.
    pub fn sample<F: Fn(f64) -> Complex64>(&self, h: F) -> Vec<Complex64> {
        self.frequencies().map(h).collect()
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = planner().lock().unwrap_or_else(|e| e.into_inner());
    (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
}

/// Unnormalized forward FFT.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    plans(buf.len()).0.process(buf);
}

/// Unnormalized inverse FFT.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    plans(buf.len()).1.process(buf);
}

/// In-place circular filtering of a complex buffer by `h`.
pub fn filter_in_place(buf: &mut [Complex64], h: &[Complex64]) {
    filter_spectrum(buf, h, false);
}

fn filter_spectrum(buf: &mut [Complex64], h: &[Complex64], real_nyquist: bool) {
    debug_assert_eq!(buf.len(), h.len());
    let n = buf.len();
    let (fwd, inv) = plans(n);
    fwd.process(buf);
    let scale = 1.0 / n as f64;
    for (x, hk) in buf.iter_mut().zip(h) {
        *x *= hk * scale;
    }
    if real_nyquist && n.is_multiple_of(2) {
        // Undo the imaginary part at the self-paired bin.
        let k = n / 2;
        if h[k].norm_sqr() > 0.0 {
            buf[k] *= h[k].re * h[k].conj() / h[k].norm_sqr();
        }
    }
    inv.process(buf);
}

/// Hermitian check: `h[k] == conj(h[N-k])` within `tol` relative to `max |h|`.
///
/// The self-paired Nyquist bin of an even-length grid is skipped; a real
/// signal only sees the real part of `h` there.
pub fn hermitian_violation(h: &[Complex64], tol: f64) -> Option<usize> {
    let n = h.len();
    let peak = h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if h[0].im.abs() > tol * peak {
        return Some(0);
    }
    for k in 1..n {
        let mirror = n - k;
        if mirror == k {
            continue;
        }
        if (h[k] - h[mirror].conj()).norm() > tol * peak {
            return Some(k);
        }
    }
    None
}

const HERMITIAN_TOL: f64 = 1e-9;

/// Filter two real sequences of equal length with one complex transform.
///
/// `h` must be Hermitian so each output stays real.
pub fn filter_real_pair(a: &[f64], b: &[f64], h: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    filter_spectrum(&mut buf, h, true);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Filter one real sequence; `h` must be Hermitian.
pub fn filter_real(a: &[f64], h: &[Complex64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    filter_spectrum(&mut buf, h, true);
    buf.into_iter().map(|c| c.re).collect()
}

/// Multiply the spectrum of `sig` by `h` and return to the time domain.
///
/// Real signals stay real and require a Hermitian-symmetric `h`; complex
/// signals accept any `h`. Length, sample rate and domain are preserved.
pub fn apply_response(sig: &SampledSignal, h: &[Complex64]) -> Result<SampledSignal> {
    if h.len() != sig.len() {
        return Err(Error::GridMismatch {
            expected: sig.len(),
            got: h.len(),
        });
    }
    let samples = match sig.samples() {
        Samples::Real(v) => {
            if let Some(bin) = hermitian_violation(h, HERMITIAN_TOL) {
                return Err(Error::NonHermitian { bin });
            }
            Samples::Real(filter_real(v, h))
        }
        Samples::Complex(v) => {
            let mut buf = v.clone();
            filter_in_place(&mut buf, h);
            Samples::Complex(buf)
        }
    };
    Ok(sig.with_samples(samples, sig.domain()))
}

/// Time-average of a power signal [W].
pub fn mean_power(sig: &SampledSignal) -> Result<f64> {
    if sig.domain() != Domain::Power {
        return Err(Error::WrongDomain {
            expected: Domain::Power.name(),
            got: sig.domain().name(),
        });
    }
    let v = sig.as_real().ok_or(Error::WrongDomain {
        expected: "real power",
        got: "complex",
    })?;
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, &p)| p < 0.0) {
        return Err(Error::NegativePower { index, value });
    }
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Instantaneous power `|E|^2` of an optical field.
pub fn intensity(field: &SampledSignal) -> Result<SampledSignal> {
    if field.domain() != Domain::Field {
        return Err(Error::WrongDomain {
            expected: Domain::Field.name(),
            got: field.domain().name(),
        });
    }
    let p = match field.samples() {
        Samples::Real(v) => v.iter().map(|x| x * x).collect(),
        Samples::Complex(v) => v.iter().map(|x| x.norm_sqr()).collect(),
    };
    Ok(field.with_samples(Samples::Real(p), Domain::Power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, cycles: f64) -> Vec<f64> {
        (0..n).map(|k| (2.0 * PI * cycles * k as f64 / n as f64).cos()).collect()
    }

    #[test]
    fn grid_is_fft_ordered() {
        let g = FreqGrid::new(8, 8.0);
        let f: Vec<f64> = g.frequencies().collect();
        assert_eq!(f, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let g = FreqGrid::new(5, 5.0);
        let f: Vec<f64> = g.frequencies().collect();
        assert_eq!(f, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn identity_response_returns_input() {
        let x: Vec<f64> = (0..257).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let sig = SampledSignal::real(x.clone(), 1.0, Domain::Electrical).unwrap();
        let h = vec![Complex64::new(1.0, 0.0); x.len()];
        let y = apply_response(&sig, &h).unwrap();
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in x.iter().zip(y.as_real().unwrap()) {
            assert!((a - b).abs() < 1e-12 * peak);
        }
    }

    #[test]
    fn linear_phase_delays_impulse() {
        let n = 64;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let sig = SampledSignal::real(x, 1.0, Domain::Electrical).unwrap();
        let tau = 4.0;
        let grid = sig.grid();
        let h = grid.sample(|f| Complex64::from_polar(1.0, -2.0 * PI * f * tau));
        let y = apply_response(&sig, &h).unwrap();
        let y = y.as_real().unwrap();
        for (k, v) in y.iter().enumerate() {
            let want = if k == 4 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "k={k} v={v}");
        }
    }

    #[test]
    fn brickwall_passes_inband_tone() {
        let n = 1024;
        let fs = 1024.0;
        let x = tone(n, fs / 8.0);
        let sig = SampledSignal::real(x.clone(), fs, Domain::Electrical).unwrap();
        let h = sig
            .grid()
            .sample(|f| Complex64::new(if f.abs() <= fs / 4.0 { 1.0 } else { 0.0 }, 0.0));
        let y = apply_response(&sig, &h).unwrap();
        let ratio = y.energy().sqrt() / sig.energy().sqrt();
        assert!((ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brickwall_removes_outband_tone() {
        let n = 1024;
        let x = tone(n, 300.0);
        let sig = SampledSignal::real(x, 1024.0, Domain::Electrical).unwrap();
        let h = sig
            .grid()
            .sample(|f| Complex64::new(if f.abs() <= 256.0 { 1.0 } else { 0.0 }, 0.0));
        let y = apply_response(&sig, &h).unwrap();
        assert!(y.energy() < 1e-20);
    }

    #[test]
    fn non_hermitian_rejected_for_real_signal() {
        let sig = SampledSignal::real(vec![1.0; 16], 1.0, Domain::Electrical).unwrap();
        let h = sig.grid().sample(|f| {
            if f > 0.0 {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        assert!(matches!(apply_response(&sig, &h), Err(Error::NonHermitian { .. })));
        // The same response is fine on a complex field.
        let field = SampledSignal::complex(vec![Complex64::new(1.0, 0.0); 16], 1.0, Domain::Field)
            .unwrap();
        assert!(apply_response(&field, &h).is_ok());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let sig = SampledSignal::real(vec![1.0; 16], 1.0, Domain::Electrical).unwrap();
        let h = vec![Complex64::new(1.0, 0.0); 15];
        assert_eq!(
            apply_response(&sig, &h),
            Err(Error::GridMismatch {
                expected: 16,
                got: 15
            })
        );
    }

    #[test]
    fn construction_rejects_empty_and_nan() {
        assert_eq!(
            SampledSignal::real(vec![], 1.0, Domain::Power),
            Err(Error::EmptySignal)
        );
        assert_eq!(
            SampledSignal::real(vec![0.0, f64::NAN], 1.0, Domain::Power),
            Err(Error::NonFinite(1))
        );
    }

    #[test]
    fn mean_power_cases() {
        let p = SampledSignal::real(vec![1e-3; 10], 1.0, Domain::Power).unwrap();
        assert!((mean_power(&p).unwrap() - 1e-3).abs() < 1e-18);
        let p = SampledSignal::real(
            (0..10).map(|k| if k % 2 == 0 { 0.0 } else { 2e-3 }).collect(),
            1.0,
            Domain::Power,
        )
        .unwrap();
        assert!((mean_power(&p).unwrap() - 1e-3).abs() < 1e-18);
        let bad = SampledSignal::real(vec![1.0, -1e-9], 1.0, Domain::Power).unwrap();
        assert!(matches!(mean_power(&bad), Err(Error::NegativePower { index: 1, .. })));
        let wrong = SampledSignal::real(vec![1.0], 1.0, Domain::Current).unwrap();
        assert!(matches!(mean_power(&wrong), Err(Error::WrongDomain { .. })));
    }

    #[test]
    fn pair_filter_matches_single() {
        let a: Vec<f64> = (0..100).map(|k| (k as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..100).map(|k| (k as f64 * 0.7).cos()).collect();
        let grid = FreqGrid::new(100, 1.0);
        let h = grid.sample(|f| Complex64::new((-f * f * 20.0).exp(), 0.0));
        let (fa, fb) = filter_real_pair(&a, &b, &h);
        let sa = filter_real(&a, &h);
        let sb = filter_real(&b, &h);
        for i in 0..100 {
            assert!((fa[i] - sa[i]).abs() < 1e-12);
            assert!((fb[i] - sb[i]).abs() < 1e-12);
        }
    }
}
