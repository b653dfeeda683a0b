//! APD + TIA photodetection and the receiver low-pass filter.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::signal::{self, Domain, SampledSignal};
use crate::tx::SAMPLES_PER_BIT;

/// Elementary charge [C].
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApdParams {
    /// [A/W]
    pub responsivity: f64,
    pub gain: f64,
    pub excess_noise: f64,
    /// Input-referred thermal current PSD [A^2/Hz].
    pub thermal_psd: f64,
    /// [C]
    pub electron_charge: f64,
}

impl Default for ApdParams {
    fn default() -> Self {
        let gain = 25.0;
        Self {
            responsivity: 0.8,
            gain,
            excess_noise: f64::powf(gain, 0.75),
            thermal_psd: 1.024e-21,
            electron_charge: ELECTRON_CHARGE,
        }
    }
}

impl ApdParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.responsivity,
            self.gain,
            self.excess_noise,
            self.thermal_psd,
            self.electron_charge,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("APD parameters must be positive: {self:?}")))
        }
    }

    /// Simulation bandwidth `spb * Rb` [Hz].
    pub fn noise_bandwidth(bit_rate: f64) -> f64 {
        SAMPLES_PER_BIT as f64 * bit_rate
    }

    /// Current per watt of optical power, `G R` [A/W].
    pub fn conversion_gain(&self) -> f64 {
        self.gain * self.responsivity
    }

    /// Shot-noise variance per watt of instantaneous power, `q G^2 F R df` [A^2/W].
    pub fn shot_variance_per_watt(&self, bandwidth: f64) -> f64 {
        self.electron_charge * self.gain * self.gain * self.excess_noise * self.responsivity * bandwidth
    }

    /// Thermal-noise variance `N0 df` [A^2].
    pub fn thermal_variance(&self, bandwidth: f64) -> f64 {
        self.thermal_psd * bandwidth
    }
}

/// Independent standard-normal draws for the shot and thermal terms.
#[derive(Debug, Clone)]
pub struct UnitNoise {
    pub shot: Vec<f64>,
    pub thermal: Vec<f64>,
}

impl UnitNoise {
    /// Deterministic per `seed`: shot draws first, then thermal draws.
    pub fn draw(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let shot = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let thermal = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { shot, thermal }
    }
}

/// Photocurrent `i = G R P + n_s + n_T` with per-sample Gaussian noise.
///
/// The noise bandwidth is the simulation bandwidth, i.e. the signal's
/// sample rate. With `noise_enabled == false` only `G R P` is returned.
pub fn detect(
    power: &SampledSignal,
    params: &ApdParams,
    seed: u64,
    noise_enabled: bool,
) -> Result<SampledSignal> {
    params.validate()?;
    if power.domain() != Domain::Power {
        return Err(Error::WrongDomain {
            expected: Domain::Power.name(),
            got: power.domain().name(),
        });
    }
    let p = power.as_real().ok_or(Error::WrongDomain {
        expected: "real power",
        got: "complex",
    })?;
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativePower { index, value });
    }
    let gr = params.conversion_gain();
    let current: Vec<f64> = if noise_enabled {
        let bw = power.sample_rate();
        let shot_per_watt = params.shot_variance_per_watt(bw);
        let sigma_t = params.thermal_variance(bw).sqrt();
        let noise = UnitNoise::draw(p.len(), seed);
        p.iter()
            .zip(noise.shot.iter().zip(&noise.thermal))
            .map(|(&pk, (&ns, &nt))| gr * pk + (shot_per_watt * pk).sqrt() * ns + sigma_t * nt)
            .collect()
    } else {
        p.iter().map(|&pk| gr * pk).collect()
    };
    SampledSignal::real(current, power.sample_rate(), Domain::Current)
}

/// Receiver electrical low-pass.
pub fn rx_filter(current: &SampledSignal, spec: &FilterSpec) -> Result<SampledSignal> {
    if matches!(spec, FilterSpec::Bypass) {
        return Ok(current.clone());
    }
    signal::apply_response(current, &spec.response(&current.grid()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    fn constant_power(p: f64, n: usize, bit_rate: f64) -> SampledSignal {
        SampledSignal::real(vec![p; n], 8.0 * bit_rate, Domain::Power).unwrap()
    }

    #[test]
    fn defaults() {
        let apd = ApdParams::default();
        assert!((apd.excess_noise - 25f64.powf(0.75)).abs() < 1e-12);
        assert!((10.0 * apd.excess_noise.log10() - 10.48).abs() < 0.01);
        assert!((apd.excess_noise - 11.180).abs() < 1e-3);
    }

    #[test]
    fn noiseless_current() {
        let p = constant_power(10e-6, 64, 25e9);
        let i = detect(&p, &ApdParams::default(), 1, false).unwrap();
        for &v in i.as_real().unwrap() {
            assert!((v - 2.0e-4).abs() < 1e-18);
        }
    }

    #[test]
    fn noise_variance_at_ten_microwatts() {
        let apd = ApdParams::default();
        let bw = ApdParams::noise_bandwidth(25e9);
        assert_eq!(bw, 2e11);
        let shot = apd.shot_variance_per_watt(bw) * 10e-6;
        let thermal = apd.thermal_variance(bw);
        assert!((shot / 1.791e-9 - 1.0).abs() < 1e-3, "shot {shot}");
        assert!((thermal / 2.048e-10 - 1.0).abs() < 1e-12);
        assert!(((shot + thermal) / 1.996e-9 - 1.0).abs() < 1e-3);

        let p = constant_power(10e-6, 1_000_000, 25e9);
        let i = detect(&p, &apd, 42, true).unwrap();
        let v = variance(i.as_real().unwrap());
        // Sample-variance relative sd is sqrt(2/N) = 0.14 %.
        assert!((v / (shot + thermal) - 1.0).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn thermal_only_in_the_dark() {
        let apd = ApdParams::default();
        let p = constant_power(0.0, 400_000, 25e9);
        let i = detect(&p, &apd, 7, true).unwrap();
        let v = variance(i.as_real().unwrap());
        assert!((v / 2.048e-10 - 1.0).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn detection_is_seeded() {
        let apd = ApdParams::default();
        let p = constant_power(1e-6, 1000, 25e9);
        assert_eq!(detect(&p, &apd, 3, true), detect(&p, &apd, 3, true));
        assert_ne!(detect(&p, &apd, 3, true), detect(&p, &apd, 4, true));
    }

    #[test]
    fn negative_power_rejected() {
        let p = SampledSignal::real(vec![1e-6, -1e-9], 2e11, Domain::Power).unwrap();
        assert!(matches!(
            detect(&p, &ApdParams::default(), 1, true),
            Err(Error::NegativePower { index: 1, .. })
        ));
    }

    #[test]
    fn wide_filter_is_transparent() {
        let v: Vec<f64> = (0..512).map(|k| ((k * 17 % 29) as f64).cos()).collect();
        let i = SampledSignal::real(v.clone(), 2e11, Domain::Current).unwrap();
        let spec = FilterSpec::super_gaussian(1e14, 2e14).unwrap();
        let out = rx_filter(&i, &spec).unwrap();
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in v.iter().zip(out.as_real().unwrap()) {
            assert!((a - b).abs() < 1e-6 * peak);
        }
    }

    #[test]
    fn filtered_white_noise_follows_noise_bandwidth() {
        let n = 1 << 18;
        let bit_rate = 25e9;
        let apd = ApdParams::default();
        let p = constant_power(0.0, n, bit_rate);
        let i = detect(&p, &apd, 11, true).unwrap();
        let spec = FilterSpec::super_gaussian(8.5e9, 17e9).unwrap();
        let out = rx_filter(&i, &spec).unwrap();
        let h = spec.response(&i.grid());
        let neb = h.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        let expected = variance(i.as_real().unwrap()) * neb;
        let got = variance(out.as_real().unwrap());
        assert!((got / expected - 1.0).abs() < 0.02, "got {got}, expected {expected}");
    }

    #[test]
    fn narrower_filter_less_thermal_noise() {
        let n = 1 << 16;
        let p = constant_power(0.0, n, 25e9);
        let i = detect(&p, &ApdParams::default(), 5, true).unwrap();
        let vars: Vec<f64> = [20e9, 12e9, 6e9]
            .iter()
            .map(|&f3| {
                let spec = FilterSpec::super_gaussian(f3, 2.0 * f3).unwrap();
                variance(rx_filter(&i, &spec).unwrap().as_real().unwrap())
            })
            .collect();
        assert!(vars[0] > vars[1] && vars[1] > vars[2]);
    }

    #[test]
    fn asymmetric_butterworth_cascade() {
        // 1-pole TX with 2-pole RX behaves as a 3-pole cascade.
        let tx = FilterSpec::butterworth(1, 7e9).unwrap();
        let rx = FilterSpec::butterworth(2, 7e9).unwrap();
        let f = 7e9;
        let cascade = tx.power_response_at(f) * rx.power_response_at(f);
        assert!((cascade - 0.25).abs() < 1e-12);
        let v: Vec<f64> = (0..256).map(|k| if k % 32 < 16 { 1.0 } else { 0.0 }).collect();
        let i = SampledSignal::real(v, 2e11, Domain::Current).unwrap();
        let a = rx_filter(&rx_filter(&i, &tx).unwrap(), &rx).unwrap();
        let b = rx_filter(&rx_filter(&i, &rx).unwrap(), &tx).unwrap();
        for (x, y) in a.as_real().unwrap().iter().zip(b.as_real().unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
