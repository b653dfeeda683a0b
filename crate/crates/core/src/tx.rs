//! Transmitter: test pattern, symbol mapping, duobinary precoding, MZM
//! pre-distortion and the chirp-free MZM.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{Domain, SampledSignal};

/// Waveform oversampling, samples per bit period.
pub const SAMPLES_PER_BIT: usize = 8;

/// PRBS register width.
pub const PRBS_ORDER: u32 = 17;

/// Length of one PRBS17 period.
pub const PRBS_LEN: usize = (1 << PRBS_ORDER) - 1;

/// Tolerance for drive samples slightly outside [0, 1].
const DRIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModFormat {
    Pam2,
    Pam4,
    /// Electrical duobinary.
    Edb,
    /// Optical duobinary.
    Odb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMode {
    Quadrature,
    Null,
}

impl ModFormat {
    pub const ALL: [ModFormat; 4] = [ModFormat::Pam2, ModFormat::Pam4, ModFormat::Edb, ModFormat::Odb];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModFormat::Pam4 => 2,
            _ => 1,
        }
    }

    pub fn bias_mode(self) -> BiasMode {
        match self {
            ModFormat::Odb => BiasMode::Null,
            _ => BiasMode::Quadrature,
        }
    }

    /// Normalized drive amplitudes, lowest first.
    pub fn levels(self) -> &'static [f64] {
        match self {
            ModFormat::Pam4 => &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            _ => &[0.0, 1.0],
        }
    }

    pub fn is_duobinary(self) -> bool {
        matches!(self, ModFormat::Edb | ModFormat::Odb)
    }

    pub fn samples_per_symbol(self) -> usize {
        SAMPLES_PER_BIT * self.bits_per_symbol()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModFormat::Pam2 => "pam2",
            ModFormat::Pam4 => "pam4",
            ModFormat::Edb => "edb",
            ModFormat::Odb => "odb",
        }
    }
}

impl fmt::Display for ModFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "pam2" => Ok(ModFormat::Pam2),
            "pam4" => Ok(ModFormat::Pam4),
            "edb" => Ok(ModFormat::Edb),
            "odb" => Ok(ModFormat::Odb),
            other => Err(Error::InvalidParameter(format!("unknown modulation format `{other}`"))),
        }
    }
}

/// Mach-Zehnder modulator drive settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzmParams {
    /// Half-wave voltage [V].
    pub v_pi: f64,
    /// Pre-distortion amplitude `A` [V].
    pub amplitude: f64,
    /// Bias voltage `V_b` [V].
    pub bias: f64,
    /// CW laser power [W].
    pub cw_power: f64,
}

impl MzmParams {
    pub const DEFAULT_V_PI: f64 = 4.0;
    pub const DEFAULT_CW_POWER: f64 = 1e-3;

    pub fn new(v_pi: f64, bias: BiasMode, cw_power: f64) -> Result<Self> {
        if !(v_pi > 0.0 && cw_power > 0.0) {
            return Err(Error::InvalidParameter(
                "V_pi and CW power must be positive".into(),
            ));
        }
        let swing = match bias {
            BiasMode::Quadrature => v_pi / 2.0,
            BiasMode::Null => v_pi,
        };
        Ok(Self {
            v_pi,
            amplitude: swing,
            bias: swing,
            cw_power,
        })
    }

    pub fn for_format(format: ModFormat) -> Self {
        Self::new(Self::DEFAULT_V_PI, format.bias_mode(), Self::DEFAULT_CW_POWER)
            .expect("default MZM parameters are valid")
    }
}

/// One period of PRBS17 (`x^17 + x^14 + 1`) starting from register `seed`.
pub fn gen_prbs(seed: u32) -> Result<Vec<u8>> {
    let mask = (1u32 << PRBS_ORDER) - 1;
    if seed == 0 {
        return Err(Error::ZeroSeed);
    }
    if seed > mask {
        return Err(Error::InvalidParameter(format!(
            "PRBS seed {seed} does not fit a {PRBS_ORDER}-bit register"
        )));
    }
    let mut state = seed;
    let bits = (0..PRBS_LEN)
        .map(|_| {
            let fb = ((state >> 16) ^ (state >> 13)) & 1;
            state = ((state << 1) | fb) & mask;
            fb as u8
        })
        .collect();
    Ok(bits)
}

/// The transmitted data pattern: PRBS17 repeated twice.
pub fn test_pattern(seed: u32) -> Result<Vec<u8>> {
    let one = gen_prbs(seed)?;
    let mut bits = Vec::with_capacity(2 * one.len());
    bits.extend_from_slice(&one);
    bits.extend_from_slice(&one);
    Ok(bits)
}

/// Duobinary precoder `b_k = d_k XOR b_{k-1}`, `b_{-1} = 0`.
pub fn precode_db(data: &[u8]) -> Vec<u8> {
    let mut prev = 0u8;
    data.iter()
        .map(|&d| {
            prev ^= d & 1;
            prev
        })
        .collect()
}

/// Gray-coded PAM-4 level index for a bit pair (first bit is the MSB).
pub fn gray_index(msb: u8, lsb: u8) -> usize {
    match (msb & 1, lsb & 1) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

/// Inverse of [`gray_index`].
pub fn gray_bits(index: usize) -> [u8; 2] {
    match index {
        0 => [0, 0],
        1 => [0, 1],
        2 => [1, 1],
        _ => [1, 0],
    }
}

/// Symbol amplitudes in [0, 1], one per symbol.
pub fn symbol_levels(bits: &[u8], format: ModFormat) -> Result<Vec<f64>> {
    match format {
        ModFormat::Pam2 => Ok(bits.iter().map(|&b| f64::from(b & 1)).collect()),
        ModFormat::Pam4 => {
            if !bits.len().is_multiple_of(2) {
                return Err(Error::OddBitCount(bits.len()));
            }
            let levels = format.levels();
            Ok(bits
                .chunks_exact(2)
                .map(|p| levels[gray_index(p[0], p[1])])
                .collect())
        }
        ModFormat::Edb | ModFormat::Odb => {
            Ok(precode_db(bits).into_iter().map(f64::from).collect())
        }
    }
}

/// Rectangular NRZ drive `x(t)` in [0, 1] at [`SAMPLES_PER_BIT`] samples per bit.
pub fn map_to_drive(bits: &[u8], format: ModFormat, bit_rate: f64) -> Result<SampledSignal> {
    let levels = symbol_levels(bits, format)?;
    let hold = format.samples_per_symbol();
    let mut x = Vec::with_capacity(levels.len() * hold);
    for level in levels {
        x.extend(std::iter::repeat_n(level, hold));
    }
    SampledSignal::real(x, SAMPLES_PER_BIT as f64 * bit_rate, Domain::Electrical)
}

/// MZM pre-distortion `x_D = (A/pi) acos(1 - 2x) - V_b`.
pub fn predistort(x: &SampledSignal, p: &MzmParams) -> Result<SampledSignal> {
    let xs = x.as_real().ok_or(Error::WrongDomain {
        expected: "real drive",
        got: "complex",
    })?;
    let mut out = Vec::with_capacity(xs.len());
    for (index, &value) in xs.iter().enumerate() {
        if !(-DRIVE_TOL..=1.0 + DRIVE_TOL).contains(&value) {
            return Err(Error::DriveOutOfRange { index, value });
        }
        let v = value.clamp(0.0, 1.0);
        out.push(p.amplitude / PI * (1.0 - 2.0 * v).acos() - p.bias);
    }
    SampledSignal::real(out, x.sample_rate(), Domain::Electrical)
}

/// Chirp-free MZM: `E = sqrt(P_cw) cos(pi x_F / V_pi)`.
pub fn mzm_modulate(x_f: &SampledSignal, p: &MzmParams) -> Result<SampledSignal> {
    let xs = x_f.as_real().ok_or(Error::WrongDomain {
        expected: "real drive",
        got: "complex",
    })?;
    let amp = p.cw_power.sqrt();
    let field = xs
        .iter()
        .map(|&v| Complex64::new(amp * (PI * v / p.v_pi).cos(), 0.0))
        .collect();
    SampledSignal::complex(field, x_f.sample_rate(), Domain::Field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prbs_length_balance_and_period() {
        let bits = gen_prbs(1).unwrap();
        assert_eq!(bits.len(), 131_071);
        let ones = bits.iter().filter(|&&b| b == 1).count();
        assert_eq!(ones, 65_536);
        assert_eq!(bits.len() - ones, 65_535);
        // Maximal length: the longest zero run is order-1, the longest one run is order.
        let mut run0 = 0;
        let mut max0 = 0;
        let mut run1 = 0;
        let mut max1 = 0;
        for &b in bits.iter().chain(bits.iter()) {
            if b == 0 {
                run0 += 1;
                run1 = 0;
            } else {
                run1 += 1;
                run0 = 0;
            }
            max0 = max0.max(run0);
            max1 = max1.max(run1);
        }
        assert_eq!(max1, 17);
        assert_eq!(max0, 16);
    }

    #[test]
    fn prbs_is_deterministic_and_seed_dependent() {
        assert_eq!(gen_prbs(0x1ACE).unwrap(), gen_prbs(0x1ACE).unwrap());
        assert_ne!(gen_prbs(1).unwrap(), gen_prbs(2).unwrap());
        assert_eq!(gen_prbs(0), Err(Error::ZeroSeed));
        assert!(gen_prbs(1 << 17).is_err());
    }

    #[test]
    fn precoder_examples() {
        assert_eq!(precode_db(&[1, 0, 1, 1, 0]), vec![1, 1, 0, 1, 1]);
        assert_eq!(precode_db(&[0; 6]), vec![0; 6]);
    }

    #[test]
    fn pam2_drive() {
        let x = map_to_drive(&[0, 1], ModFormat::Pam2, 25e9).unwrap();
        let v = x.as_real().unwrap();
        assert_eq!(v.len(), 16);
        assert!(v[..8].iter().all(|&s| s == 0.0));
        assert!(v[8..].iter().all(|&s| s == 1.0));
        assert_eq!(x.sample_rate(), 200e9);
    }

    #[test]
    fn pam4_drive_and_gray_adjacency() {
        let x = map_to_drive(&[0, 1, 1, 0], ModFormat::Pam4, 25e9).unwrap();
        let v = x.as_real().unwrap();
        assert_eq!(v.len(), 32);
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((v[16] - 1.0).abs() < 1e-15);
        for i in 0..3 {
            let a = gray_bits(i);
            let b = gray_bits(i + 1);
            let diff = (a[0] ^ b[0]) + (a[1] ^ b[1]);
            assert_eq!(diff, 1, "levels {i} and {} differ in {diff} bits", i + 1);
            assert_eq!(gray_index(a[0], a[1]), i);
        }
        assert_eq!(
            map_to_drive(&[0, 1, 1], ModFormat::Pam4, 25e9),
            Err(Error::OddBitCount(3))
        );
    }

    #[test]
    fn edb_drive_is_precoded() {
        let x = map_to_drive(&[1, 0, 1], ModFormat::Edb, 25e9).unwrap();
        let v = x.as_real().unwrap();
        assert_eq!([v[0], v[8], v[16]], [1.0, 1.0, 0.0]);
    }

    #[test]
    fn predistortion_endpoints() {
        let p = MzmParams::for_format(ModFormat::Pam2);
        let x = SampledSignal::real(vec![0.0, 1.0, 0.5], 1.0, Domain::Electrical).unwrap();
        let d = predistort(&x, &p).unwrap();
        let d = d.as_real().unwrap();
        assert!((d[0] + p.bias).abs() < 1e-15);
        assert!((d[1] - (p.amplitude - p.bias)).abs() < 1e-15);
        assert!((d[2] + p.v_pi / 4.0).abs() < 1e-15);
        let bad = SampledSignal::real(vec![1.1], 1.0, Domain::Electrical).unwrap();
        assert!(matches!(predistort(&bad, &p), Err(Error::DriveOutOfRange { .. })));
        let edge = SampledSignal::real(vec![1.0 + 1e-13, -1e-13], 1.0, Domain::Electrical).unwrap();
        assert!(predistort(&edge, &p).is_ok());
    }

    #[test]
    fn mzm_zero_drive_is_cw() {
        let p = MzmParams::for_format(ModFormat::Pam2);
        let x = SampledSignal::real(vec![0.0; 4], 1.0, Domain::Electrical).unwrap();
        let e = mzm_modulate(&x, &p).unwrap();
        for s in e.as_complex().unwrap() {
            assert!((s.re - p.cw_power.sqrt()).abs() < 1e-18);
            assert_eq!(s.im, 0.0);
        }
    }

    #[test]
    fn mzm_params_bias_points() {
        let q = MzmParams::for_format(ModFormat::Edb);
        assert_eq!(q.amplitude, q.v_pi / 2.0);
        assert_eq!(q.bias, q.v_pi / 2.0);
        let n = MzmParams::for_format(ModFormat::Odb);
        assert_eq!(n.amplitude, n.v_pi);
        assert_eq!(n.bias, n.v_pi);
    }

    proptest! {
        #[test]
        fn precoder_inverts_by_add_and_delay(data in proptest::collection::vec(0u8..2, 1..500)) {
            let b = precode_db(&data);
            let mut prev = 0u8;
            for (k, &bk) in b.iter().enumerate() {
                prop_assert_eq!((bk + prev) % 2, data[k]);
                prev = bk;
            }
        }

        #[test]
        fn quadrature_power_and_null_field_are_linear(x in proptest::collection::vec(0.0f64..=1.0, 1..64)) {
            let sig = SampledSignal::real(x.clone(), 1.0, Domain::Electrical).unwrap();
            let q = MzmParams::for_format(ModFormat::Pam4);
            let e = mzm_modulate(&predistort(&sig, &q).unwrap(), &q).unwrap();
            for (xi, ei) in x.iter().zip(e.as_complex().unwrap()) {
                prop_assert!((ei.norm_sqr() / q.cw_power - xi).abs() < 1e-12);
            }
            let n = MzmParams::for_format(ModFormat::Odb);
            let e = mzm_modulate(&predistort(&sig, &n).unwrap(), &n).unwrap();
            for (xi, ei) in x.iter().zip(e.as_complex().unwrap()) {
                prop_assert!((ei.re / n.cw_power.sqrt() - (2.0 * xi - 1.0)).abs() < 1e-12);
            }
        }
    }
}
