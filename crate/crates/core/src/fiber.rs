//! Dispersive single-mode fiber and the variable optical attenuator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{self, Domain, FreqGrid, SampledSignal, Samples};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Telecom wavelength bands used for the dispersion presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    O,
    C,
    L,
}

impl Band {
    pub fn wavelength_nm(self) -> f64 {
        match self {
            Band::O => 1310.0,
            Band::C => 1550.0,
            Band::L => 1590.0,
        }
    }

    /// Accumulated dispersion over 20 km of standard fiber [ps/nm].
    pub fn dispersion_20km_ps_nm(self) -> f64 {
        match self {
            Band::O => 100.0,
            Band::C => 360.0,
            Band::L => 460.0,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Band::O => "O",
            Band::C => "C",
            Band::L => "L",
        };
        f.write_str(s)
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "O" | "o" => Ok(Band::O),
            "C" | "c" => Ok(Band::C),
            "L" | "l" => Ok(Band::L),
            other => Err(Error::InvalidParameter(format!("unknown band `{other}`"))),
        }
    }
}

/// Accumulated chromatic dispersion at a carrier wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    /// D·L [ps/nm]; zero for back-to-back.
    pub dispersion_ps_nm: f64,
    pub wavelength_nm: f64,
}

impl FiberSpec {
    pub fn new(dispersion_ps_nm: f64, wavelength_nm: f64) -> Result<Self> {
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) || !dispersion_ps_nm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid fiber: D = {dispersion_ps_nm} ps/nm, lambda = {wavelength_nm} nm"
            )));
        }
        Ok(Self {
            dispersion_ps_nm,
            wavelength_nm,
        })
    }

    pub fn back_to_back() -> Self {
        Self {
            dispersion_ps_nm: 0.0,
            wavelength_nm: Band::C.wavelength_nm(),
        }
    }

    pub fn in_band(dispersion_ps_nm: f64, band: Band) -> Self {
        Self {
            dispersion_ps_nm,
            wavelength_nm: band.wavelength_nm(),
        }
    }

    /// Coefficient `k` of the spectral phase `k f^2` [s^2].
    pub fn phase_coefficient(&self) -> f64 {
        let lambda = self.wavelength_nm * 1e-9;
        // 1 ps/nm = 1e-3 s/m
        let d = self.dispersion_ps_nm * 1e-3;
        PI * lambda * lambda * d / SPEED_OF_LIGHT
    }

    /// Group-velocity dispersion times length, `beta2 L` [s^2].
    pub fn beta2_length(&self) -> f64 {
        let lambda = self.wavelength_nm * 1e-9;
        -self.dispersion_ps_nm * 1e-3 * lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT)
    }
}

/// All-pass dispersion response `exp(j pi lambda^2 D f^2 / c)` on `grid`.
pub fn dispersion_response(spec: &FiberSpec, grid: &FreqGrid) -> Vec<Complex64> {
    let k = spec.phase_coefficient();
    grid.sample(|f| Complex64::from_polar(1.0, k * f * f))
}

/// Propagate an optical field through the fiber.
pub fn propagate(field: &SampledSignal, spec: &FiberSpec) -> Result<SampledSignal> {
    if field.domain() != Domain::Field {
        return Err(Error::WrongDomain {
            expected: Domain::Field.name(),
            got: field.domain().name(),
        });
    }
    if spec.dispersion_ps_nm == 0.0 {
        return Ok(field.clone());
    }
    let h = dispersion_response(spec, &field.grid());
    let complex = SampledSignal::complex(field.to_complex(), field.sample_rate(), Domain::Field)?;
    signal::apply_response(&complex, &h)
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Convert watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Scale a field so its mean power equals `target_dbm`.
pub fn set_rop(field: &SampledSignal, target_dbm: f64) -> Result<SampledSignal> {
    if field.domain() != Domain::Field {
        return Err(Error::WrongDomain {
            expected: Domain::Field.name(),
            got: field.domain().name(),
        });
    }
    let mean = field.energy() / field.len() as f64;
    if mean <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let gain = (dbm_to_watts(target_dbm) / mean).sqrt();
    let samples = match field.samples() {
        Samples::Real(v) => Samples::Real(v.iter().map(|x| x * gain).collect()),
        Samples::Complex(v) => Samples::Complex(v.iter().map(|x| x * gain).collect()),
    };
    SampledSignal::new(samples, field.sample_rate(), Domain::Field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::intensity;

    fn field(v: Vec<Complex64>, fs: f64) -> SampledSignal {
        SampledSignal::complex(v, fs, Domain::Field).unwrap()
    }

    #[test]
    fn zero_dispersion_is_identity() {
        let grid = FreqGrid::new(32, 1e12);
        let h = dispersion_response(&FiberSpec::back_to_back(), &grid);
        assert!(h.iter().all(|x| *x == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn dispersion_is_all_pass() {
        let grid = FreqGrid::new(1024, 200e9);
        let h = dispersion_response(&FiberSpec::in_band(460.0, Band::L), &grid);
        assert!(h.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn energy_conserved() {
        let v: Vec<Complex64> = (0..4096)
            .map(|k| Complex64::new(((k * 7919) % 13) as f64, ((k * 31) % 5) as f64 - 2.0))
            .collect();
        let e = field(v, 200e9);
        let out = propagate(&e, &FiberSpec::in_band(360.0, Band::C)).unwrap();
        assert!(((out.energy() - e.energy()) / e.energy()).abs() < 1e-12);
    }

    /// RMS width of |E|^2 around its centroid.
    fn rms_width(p: &[f64], dt: f64) -> f64 {
        let total: f64 = p.iter().sum();
        let mean: f64 = p.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>() / total;
        let var: f64 = p
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64 - mean).powi(2) * v)
            .sum::<f64>()
            / total;
        var.sqrt() * dt
    }

    #[test]
    fn gaussian_pulse_broadening() {
        let fs = 2e12;
        let n = 1 << 14;
        let dt = 1.0 / fs;
        let t0 = 20e-12;
        let centre = n as f64 / 2.0;
        let v: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = (k as f64 - centre) * dt;
                Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
            })
            .collect();
        let spec = FiberSpec::new(360.0, 1550.0).unwrap();
        let out = propagate(&field(v.clone(), fs), &spec).unwrap();
        let p_in = intensity(&field(v, fs)).unwrap();
        let p_out = intensity(&out).unwrap();
        let w_in = rms_width(p_in.as_real().unwrap(), dt);
        let w_out = rms_width(p_out.as_real().unwrap(), dt);
        let b2l = spec.beta2_length();
        let expected_ratio = (1.0 + (b2l / (t0 * t0)).powi(2)).sqrt();
        // Intensity RMS width of a Gaussian field of 1/e half-width T is T/sqrt(2).
        assert!(((w_in * 2f64.sqrt()) / t0 - 1.0).abs() < 1e-3);
        let measured = w_out / w_in;
        assert!(
            (measured / expected_ratio - 1.0).abs() < 0.01,
            "measured {measured}, expected {expected_ratio}"
        );
    }

    #[test]
    fn rop_setting() {
        let e = field(vec![Complex64::new(1e-3f64.sqrt(), 0.0); 16], 1.0);
        let out = set_rop(&e, -10.0).unwrap();
        let gain = out.as_complex().unwrap()[0].re / e.as_complex().unwrap()[0].re;
        assert!((gain - 10f64.powf(-0.5)).abs() < 1e-12);
        assert!((out.energy() / 16.0 - 1e-4).abs() < 1e-16);

        let same = set_rop(&e, 0.0).unwrap();
        for (a, b) in same.as_complex().unwrap().iter().zip(e.as_complex().unwrap()) {
            assert!((a - b).norm() < 1e-15);
        }
        let twice = set_rop(&set_rop(&e, -3.0).unwrap(), -17.0).unwrap();
        let once = set_rop(&e, -17.0).unwrap();
        for (a, b) in twice.as_complex().unwrap().iter().zip(once.as_complex().unwrap()) {
            assert!((a - b).norm() < 1e-15);
        }
        let dark = field(vec![Complex64::new(0.0, 0.0); 4], 1.0);
        assert_eq!(set_rop(&dark, -10.0), Err(Error::ZeroPower));
    }

    #[test]
    fn band_presets() {
        assert_eq!("C".parse::<Band>().unwrap().wavelength_nm(), 1550.0);
        assert_eq!(Band::O.wavelength_nm(), 1310.0);
        assert_eq!(Band::L.wavelength_nm(), 1590.0);
        assert!("X".parse::<Band>().is_err());
    }
}
