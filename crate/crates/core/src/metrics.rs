//! End-to-end BER evaluation, sensitivity search and power penalties.

use crate::equalize::{
    align_samples, antialias_response, count_ber, decide_decode, downsample_align, ffe_lms,
    make_pilot, Aligned, EqualizerConfig, PilotStream, BER_COUNT,
};
use crate::error::{Error, Result};
use crate::fiber::{self, dbm_to_watts, FiberSpec};
use crate::filter::FilterSpec;
use crate::rx::{self, ApdParams, UnitNoise};
use crate::signal::{self, intensity, SampledSignal};
use crate::tx::{self, ModFormat, MzmParams};

/// Target BER defining the sensitivity.
pub const TARGET_BER: f64 = 1e-3;

/// Full description of one simulated link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    /// [bit/s]
    pub bit_rate: f64,
    pub format: ModFormat,
    pub tx_filter: FilterSpec,
    pub rx_filter: FilterSpec,
    pub fiber: FiberSpec,
    pub apd: ApdParams,
    pub equalizer: EqualizerConfig,
    pub mzm: MzmParams,
    pub prbs_seed: u32,
    pub noise_seed: u64,
    pub noise_enabled: bool,
}

impl LinkScenario {
    /// Back-to-back link with identical TX and RX filters and default devices.
    pub fn new(format: ModFormat, bit_rate: f64, filter: FilterSpec) -> Self {
        Self {
            bit_rate,
            format,
            tx_filter: filter,
            rx_filter: filter,
            fiber: FiberSpec::back_to_back(),
            apd: ApdParams::default(),
            equalizer: EqualizerConfig::default(),
            mzm: MzmParams::for_format(format),
            prbs_seed: 1,
            noise_seed: 1,
            noise_enabled: true,
        }
    }

    pub fn with_fiber(mut self, fiber: FiberSpec) -> Self {
        self.fiber = fiber;
        self
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bit_rate.is_finite() && self.bit_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("bit rate must be positive, got {}", self.bit_rate)));
        }
        let expected = MzmParams::new(self.mzm.v_pi, self.format.bias_mode(), self.mzm.cw_power)?;
        if (expected.amplitude - self.mzm.amplitude).abs() > 1e-12 * expected.amplitude
            || (expected.bias - self.mzm.bias).abs() > 1e-12 * expected.bias
        {
            return Err(Error::InvalidParameter(format!(
                "{} needs the MZM biased at {:?}",
                self.format,
                self.format.bias_mode()
            )));
        }
        self.apd.validate()?;
        self.equalizer.validate()?;
        let available = tx::PRBS_LEN * 2 / self.format.bits_per_symbol();
        let needed = self.equalizer.training_symbols + BER_COUNT / self.format.bits_per_symbol();
        if needed > available {
            return Err(Error::InsufficientBits {
                needed: needed * self.format.bits_per_symbol(),
                available: available * self.format.bits_per_symbol(),
            });
        }
        Ok(())
    }
}

/// Result of one BER evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum BerOutcome {
    Measured(f64),
    /// The receiver could not lock or train.
    NonOperable(String),
}

impl BerOutcome {
    pub fn ber(&self) -> Option<f64> {
        match self {
            BerOutcome::Measured(b) => Some(*b),
            BerOutcome::NonOperable(_) => None,
        }
    }

    /// BER, counting a failed receiver as a coin flip.
    pub fn ber_or_worst(&self) -> f64 {
        self.ber().unwrap_or(0.5)
    }
}

/// Transmitted data bits and the optical field at the fiber output.
pub fn transmit(s: &LinkScenario) -> Result<(Vec<u8>, SampledSignal)> {
    s.validate()?;
    let data = tx::test_pattern(s.prbs_seed)?;
    let x = tx::map_to_drive(&data, s.format, s.bit_rate)?;
    let x_d = tx::predistort(&x, &s.mzm)?;
    let x_f = match s.tx_filter {
        FilterSpec::Bypass => x_d,
        spec => signal::apply_response(&x_d, &spec.response(&x_d.grid()))?,
    };
    let field = tx::mzm_modulate(&x_f, &s.mzm)?;
    let field = fiber::propagate(&field, &s.fiber)?;
    Ok((data, field))
}

/// Equalize aligned 2-sps samples and count errors against `data`.
fn receive(
    aligned: Result<Aligned>,
    data: &[u8],
    pilot: &PilotStream,
    s: &LinkScenario,
) -> Result<BerOutcome> {
    let aligned = match aligned {
        Ok(a) => a,
        Err(e @ Error::AlignmentFailure { .. }) => return Ok(BerOutcome::NonOperable(e.to_string())),
        Err(e) => return Err(e),
    };
    let ffe = match ffe_lms(&aligned.samples, pilot, &s.equalizer) {
        Ok(out) => out,
        Err(e @ Error::Diverged { .. }) => return Ok(BerOutcome::NonOperable(e.to_string())),
        Err(e) => return Err(e),
    };
    let bits = decide_decode(&ffe.symbols, s.format);
    let start = s.equalizer.training_symbols * s.format.bits_per_symbol();
    count_ber(&bits[start..], &data[start..], BER_COUNT).map(BerOutcome::Measured)
}

/// Run the whole chain at one received optical power.
pub fn simulate_ber(s: &LinkScenario, rop_dbm: f64) -> Result<BerOutcome> {
    let (data, field) = transmit(s)?;
    let field = fiber::set_rop(&field, rop_dbm)?;
    let power = intensity(&field)?;
    let current = rx::detect(&power, &s.apd, s.noise_seed, s.noise_enabled)?;
    let current = rx::rx_filter(&current, &s.rx_filter)?;
    let pilot = make_pilot(&data, s.format)?;
    receive(downsample_align(&current, &pilot), &data, &pilot, s)
}

/// A link with everything upstream of the VOA computed once.
///
/// The band-limited photocurrent at mean received power `p` is
/// `p * signal + sqrt(p) * shot + thermal`, since the RX filter and the
/// decimation low-pass are linear and the shot-noise deviation scales with
/// `sqrt(P)`. Noise draws are shared across all powers.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    scenario: LinkScenario,
    data: Vec<u8>,
    pilot: PilotStream,
    signal: Vec<f64>,
    shot: Vec<f64>,
    thermal: Vec<f64>,
}

impl PreparedLink {
    pub fn new(s: &LinkScenario) -> Result<Self> {
        let (data, field) = transmit(s)?;
        let power = intensity(&field)?;
        let p = power.as_real().expect("power is real");
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        if mean <= 0.0 {
            return Err(Error::ZeroPower);
        }
        // Unit mean power.
        let p_ref: Vec<f64> = p.iter().map(|v| (v / mean).max(0.0)).collect();
        let bw = power.sample_rate();
        let grid = power.grid();
        let symbol_rate = s.bit_rate / s.format.bits_per_symbol() as f64;
        let mut h = antialias_response(&grid, symbol_rate);
        if s.rx_filter != FilterSpec::Bypass {
            for (a, b) in h.iter_mut().zip(s.rx_filter.response(&grid)) {
                *a *= b;
            }
        }
        let gr = s.apd.conversion_gain();
        let clean: Vec<f64> = p_ref.iter().map(|v| gr * v).collect();
        let (signal, shot, thermal) = if s.noise_enabled {
            let noise = UnitNoise::draw(p_ref.len(), s.noise_seed);
            let shot_per_watt = s.apd.shot_variance_per_watt(bw);
            let sigma_t = s.apd.thermal_variance(bw).sqrt();
            let shot: Vec<f64> = p_ref
                .iter()
                .zip(&noise.shot)
                .map(|(v, n)| (shot_per_watt * v).sqrt() * n)
                .collect();
            let thermal: Vec<f64> = noise.thermal.iter().map(|n| sigma_t * n).collect();
            let (signal, shot) = signal::filter_real_pair(&clean, &shot, &h);
            (signal, shot, signal::filter_real(&thermal, &h))
        } else {
            let signal = signal::filter_real(&clean, &h);
            let n = signal.len();
            (signal, vec![0.0; n], vec![0.0; n])
        };
        let pilot = make_pilot(&data, s.format)?;
        Ok(Self {
            scenario: s.clone(),
            data,
            pilot,
            signal,
            shot,
            thermal,
        })
    }

    pub fn scenario(&self) -> &LinkScenario {
        &self.scenario
    }

    /// Band-limited photocurrent at the given received power.
    pub fn current_at(&self, rop_dbm: f64) -> Vec<f64> {
        let p = dbm_to_watts(rop_dbm);
        let sp = p.sqrt();
        self.signal
            .iter()
            .zip(self.shot.iter().zip(&self.thermal))
            .map(|(s, (n_s, n_t))| p * s + sp * n_s + n_t)
            .collect()
    }

    pub fn ber_at(&self, rop_dbm: f64) -> Result<BerOutcome> {
        let current = self.current_at(rop_dbm);
        receive(align_samples(&current, &self.pilot), &self.data, &self.pilot, &self.scenario)
    }
}

/// Sensitivity search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub target_ber: f64,
    /// First ROP probed [dBm].
    pub start_dbm: f64,
    pub min_dbm: f64,
    pub max_dbm: f64,
    pub coarse_step_db: f64,
    pub resolution_db: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            target_ber: TARGET_BER,
            start_dbm: -24.0,
            min_dbm: -35.0,
            max_dbm: 0.0,
            coarse_step_db: 1.0,
            resolution_db: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    /// ROP reaching the target BER; `None` when not bracketed in range.
    pub sensitivity_dbm: Option<f64>,
    /// Every evaluated `(rop_dbm, ber)`, sorted by power.
    pub ber_curve: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Sensitivity with the default search.
pub fn sensitivity(s: &LinkScenario) -> Result<SensitivityResult> {
    sensitivity_with(s, &SearchConfig::default())
}

pub fn sensitivity_with(s: &LinkScenario, cfg: &SearchConfig) -> Result<SensitivityResult> {
    let link = PreparedLink::new(s)?;
    search(|rop| link.ber_at(rop).map(|o| o.ber_or_worst()), cfg)
}

/// Bracket the target with coarse steps, bisect to the resolution, then
/// interpolate `log10(BER)` linearly in dBm.
pub fn search<F>(mut ber_at: F, cfg: &SearchConfig) -> Result<SensitivityResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let target = cfg.target_ber;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut eval = |rop: f64, curve: &mut Vec<(f64, f64)>| -> Result<f64> {
        let b = ber_at(rop)?;
        curve.push((rop, b));
        Ok(b)
    };
    let finish = |mut curve: Vec<(f64, f64)>, s: Option<f64>| {
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        SensitivityResult {
            sensitivity_dbm: s,
            ber_curve: curve,
            converged: s.is_some(),
        }
    };

    let start = cfg.start_dbm.clamp(cfg.min_dbm, cfg.max_dbm);
    let b0 = eval(start, &mut curve)?;
    // (failing ROP, its BER), (passing ROP, its BER)
    let (mut lo, mut hi);
    if b0 > target {
        let mut rop = start;
        let mut prev = (start, b0);
        loop {
            rop += cfg.coarse_step_db;
            if rop > cfg.max_dbm + 1e-9 {
                return Ok(finish(curve, None));
            }
            let b = eval(rop, &mut curve)?;
            if b <= target {
                lo = prev;
                hi = (rop, b);
                break;
            }
            prev = (rop, b);
        }
    } else {
        let mut rop = start;
        let mut prev = (start, b0);
        loop {
            rop -= cfg.coarse_step_db;
            if rop < cfg.min_dbm - 1e-9 {
                return Ok(finish(curve, None));
            }
            let b = eval(rop, &mut curve)?;
            if b > target {
                lo = (rop, b);
                hi = prev;
                break;
            }
            prev = (rop, b);
        }
    }
    while hi.0 - lo.0 > cfg.resolution_db {
        let mid = 0.5 * (lo.0 + hi.0);
        let b = eval(mid, &mut curve)?;
        if b > target {
            lo = (mid, b);
        } else {
            hi = (mid, b);
        }
    }
    let floor = 0.5 / BER_COUNT as f64;
    let (l_lo, l_hi) = (lo.1.max(floor).log10(), hi.1.max(floor).log10());
    let s = if (l_lo - l_hi).abs() < 1e-12 {
        0.5 * (lo.0 + hi.0)
    } else {
        lo.0 + (target.log10() - l_lo) * (hi.0 - lo.0) / (l_hi - l_lo)
    };
    Ok(finish(curve, Some(s.clamp(lo.0, hi.0))))
}

/// Penalty of sensitivity `s_dbm` relative to the reference `s0_dbm` [dB].
pub fn power_penalty(s_dbm: f64, s0_dbm: f64) -> f64 {
    s_dbm - s0_dbm
}
