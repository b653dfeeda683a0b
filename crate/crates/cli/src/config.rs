//! Flat `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! # comment
//! [scenario]
//! format = pam4
//! rb_gbps = 50
//! [filter]
//! b3db_pct = 30
//! b20db_pct = 70
//! ```
//!
//! Command-line flags override file values, which override the defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use ponsim::equalize::EqualizerConfig;
use ponsim::fiber::{Band, FiberSpec};
use ponsim::filter::FilterSpec;
use ponsim::metrics::LinkScenario;
use ponsim::rx::ApdParams;
use ponsim::tx::ModFormat;

use crate::error::{CliError, CliResult};

const KEYS: &[(&str, &[&str])] = &[
    ("scenario", &["format", "rb_gbps", "rop_dbm", "prbs_seed", "noise_seed", "noise"]),
    ("filter", &["b3db_pct", "b20db_pct", "poles", "rx_b3db_pct", "rx_b20db_pct", "rx_poles"]),
    ("fiber", &["dispersion_ps_nm", "band", "wavelength_nm"]),
    ("apd", &["responsivity", "gain", "excess_noise", "thermal_psd"]),
    ("equalizer", &["taps", "step", "training_symbols", "center_tap"]),
    ("sweep", &["formats", "rb_gbps", "b3db_pct", "b20db_pct", "dispersion_ps_nm", "seed", "workers", "out"]),
];

/// Bit rates with bundled reference anchors.
pub const SUPPORTED_RATES_GBPS: [f64; 2] = [25.0, 50.0];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut unknown = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {line_no}: malformed section header `{line}`")))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(CliError::Config(format!("line {line_no}: unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| CliError::Config(format!("line {line_no}: `{key}` appears before any [section]")))?;
            let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                unknown.push(format!("{sec}.{key} (line {line_no})"));
                continue;
            }
            let slot = (sec.to_string(), key.to_string());
            if let Some((_, first)) = entries.get(&slot) {
                return Err(CliError::Config(format!(
                    "line {line_no}: {sec}.{key} already set on line {first}"
                )));
            }
            entries.insert(slot, (value.to_string(), line_no));
        }
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        Ok(Self { entries })
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some((v, line)) => parse_value(v)
                .map(Some)
                .map_err(|e| CliError::Config(format!("{section}.{key} (line {line}): {e}"))),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, section: &str, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| parse_value(item.trim()))
                .collect::<Result<Vec<T>, String>>()
                .map(Some)
                .map_err(|e| CliError::Config(format!("{section}.{key} (line {line}): {e}"))),
        }
    }
}

fn parse_value<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("invalid value `{v}`: {e}"))
}

/// Values taken from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub format: Option<ModFormat>,
    pub rb_gbps: Option<f64>,
    pub b3db_pct: Option<f64>,
    pub b20db_pct: Option<f64>,
    pub poles: Option<u32>,
    pub dispersion_ps_nm: Option<f64>,
    pub band: Option<Band>,
    pub rop_dbm: Option<f64>,
    pub seed: Option<u64>,
}

/// TX or RX filter as given in percent of the bit rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSetting {
    pub b3db_pct: f64,
    pub b20db_pct: f64,
    /// Butterworth order; `None` selects the super-Gaussian.
    pub poles: Option<u32>,
}

impl FilterSetting {
    pub fn validate(&self, side: &str) -> CliResult<()> {
        if !(self.b3db_pct.is_finite() && self.b3db_pct > 0.0) {
            return Err(CliError::Config(format!("{side} b3db_pct must be positive, got {}", self.b3db_pct)));
        }
        match self.poles {
            Some(0) => Err(CliError::Config(format!("{side} poles must be at least 1"))),
            Some(_) => Ok(()),
            None if self.b20db_pct <= self.b3db_pct => Err(CliError::Config(format!(
                "{side} b20db_pct ({}) must exceed b3db_pct ({})",
                self.b20db_pct, self.b3db_pct
            ))),
            None => Ok(()),
        }
    }

    pub fn to_spec(&self, bit_rate: f64) -> CliResult<FilterSpec> {
        match self.poles {
            Some(n) => FilterSpec::butterworth(n, self.b3db_pct / 100.0 * bit_rate),
            None => FilterSpec::from_normalized(self.b3db_pct, self.b20db_pct, bit_rate),
        }
        .map_err(CliError::config)
    }
}

/// Fully resolved single-link settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSettings {
    pub format: ModFormat,
    pub rb_gbps: f64,
    pub rop_dbm: Option<f64>,
    pub prbs_seed: u32,
    pub noise_seed: u64,
    pub noise: bool,
    pub tx: FilterSetting,
    pub rx: FilterSetting,
    pub dispersion_ps_nm: f64,
    pub wavelength_nm: f64,
    pub apd: ApdParams,
    pub equalizer: EqualizerConfig,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        let filter = FilterSetting {
            b3db_pct: 50.0,
            b20db_pct: 120.0,
            poles: None,
        };
        Self {
            format: ModFormat::Pam2,
            rb_gbps: 25.0,
            rop_dbm: None,
            prbs_seed: 1,
            noise_seed: 1,
            noise: true,
            tx: filter,
            rx: filter,
            dispersion_ps_nm: 0.0,
            wavelength_nm: Band::C.wavelength_nm(),
            apd: ApdParams::default(),
            equalizer: EqualizerConfig::default(),
        }
    }
}

impl ScenarioSettings {
    /// Defaults, then `file`, then `flags`; validated.
    pub fn resolve(file: Option<&ConfigFile>, flags: &Overrides) -> CliResult<Self> {
        let mut s = Self::default();
        if let Some(f) = file {
            s.apply_file(f)?;
        }
        s.apply_overrides(flags);
        s.validate()?;
        Ok(s)
    }

    fn apply_file(&mut self, f: &ConfigFile) -> CliResult<()> {
        macro_rules! set {
            ($field:expr, $sec:literal, $key:literal) => {
                if let Some(v) = f.get($sec, $key)? {
                    $field = v;
                }
            };
        }
        set!(self.format, "scenario", "format");
        set!(self.rb_gbps, "scenario", "rb_gbps");
        self.rop_dbm = f.get("scenario", "rop_dbm")?.or(self.rop_dbm);
        set!(self.prbs_seed, "scenario", "prbs_seed");
        set!(self.noise_seed, "scenario", "noise_seed");
        set!(self.noise, "scenario", "noise");

        set!(self.tx.b3db_pct, "filter", "b3db_pct");
        set!(self.tx.b20db_pct, "filter", "b20db_pct");
        self.tx.poles = f.get("filter", "poles")?.or(self.tx.poles);
        self.rx = self.tx;
        set!(self.rx.b3db_pct, "filter", "rx_b3db_pct");
        set!(self.rx.b20db_pct, "filter", "rx_b20db_pct");
        self.rx.poles = f.get("filter", "rx_poles")?.or(self.rx.poles);

        set!(self.dispersion_ps_nm, "fiber", "dispersion_ps_nm");
        if let Some(band) = f.get::<Band>("fiber", "band")? {
            self.wavelength_nm = band.wavelength_nm();
        }
        set!(self.wavelength_nm, "fiber", "wavelength_nm");

        set!(self.apd.responsivity, "apd", "responsivity");
        if let Some(g) = f.get::<f64>("apd", "gain")? {
            self.apd.gain = g;
            self.apd.excess_noise = g.powf(0.75);
        }
        set!(self.apd.excess_noise, "apd", "excess_noise");
        set!(self.apd.thermal_psd, "apd", "thermal_psd");

        set!(self.equalizer.taps, "equalizer", "taps");
        set!(self.equalizer.step, "equalizer", "step");
        set!(self.equalizer.training_symbols, "equalizer", "training_symbols");
        match f.get("equalizer", "center_tap")? {
            Some(c) => self.equalizer.center_tap = c,
            None => self.equalizer.center_tap = self.equalizer.taps / 2,
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        let rx_follows_tx = self.rx == self.tx;
        if let Some(v) = o.format {
            self.format = v;
        }
        if let Some(v) = o.rb_gbps {
            self.rb_gbps = v;
        }
        if let Some(v) = o.b3db_pct {
            self.tx.b3db_pct = v;
        }
        if let Some(v) = o.b20db_pct {
            self.tx.b20db_pct = v;
        }
        if let Some(v) = o.poles {
            self.tx.poles = Some(v);
        }
        if rx_follows_tx {
            self.rx = self.tx;
        }
        if let Some(v) = o.dispersion_ps_nm {
            self.dispersion_ps_nm = v;
        }
        if let Some(b) = o.band {
            self.wavelength_nm = b.wavelength_nm();
        }
        if let Some(v) = o.rop_dbm {
            self.rop_dbm = Some(v);
        }
        if let Some(v) = o.seed {
            self.noise_seed = v;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !SUPPORTED_RATES_GBPS.contains(&self.rb_gbps) {
            return Err(CliError::Config(format!(
                "rb_gbps must be 25 or 50, got {}",
                self.rb_gbps
            )));
        }
        self.tx.validate("TX")?;
        self.rx.validate("RX")?;
        self.to_scenario()?.validate().map_err(CliError::config)
    }

    pub fn bit_rate(&self) -> f64 {
        self.rb_gbps * 1e9
    }

    pub fn to_scenario(&self) -> CliResult<LinkScenario> {
        let rb = self.bit_rate();
        let mut s = LinkScenario::new(self.format, rb, self.tx.to_spec(rb)?);
        s.rx_filter = self.rx.to_spec(rb)?;
        s.fiber = FiberSpec::new(self.dispersion_ps_nm, self.wavelength_nm).map_err(CliError::config)?;
        s.apd = self.apd;
        s.equalizer = self.equalizer;
        s.prbs_seed = self.prbs_seed;
        s.noise_seed = self.noise_seed;
        s.noise_enabled = self.noise;
        Ok(s)
    }

    /// The settings as a config file that reproduces them.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "[scenario]");
        let _ = writeln!(w, "format = {}", self.format);
        let _ = writeln!(w, "rb_gbps = {}", self.rb_gbps);
        if let Some(r) = self.rop_dbm {
            let _ = writeln!(w, "rop_dbm = {r}");
        }
        let _ = writeln!(w, "prbs_seed = {}", self.prbs_seed);
        let _ = writeln!(w, "noise_seed = {}", self.noise_seed);
        let _ = writeln!(w, "noise = {}", self.noise);
        let _ = writeln!(w, "[filter]");
        let _ = writeln!(w, "b3db_pct = {}", self.tx.b3db_pct);
        let _ = writeln!(w, "b20db_pct = {}", self.tx.b20db_pct);
        if let Some(n) = self.tx.poles {
            let _ = writeln!(w, "poles = {n}");
        }
        let _ = writeln!(w, "rx_b3db_pct = {}", self.rx.b3db_pct);
        let _ = writeln!(w, "rx_b20db_pct = {}", self.rx.b20db_pct);
        if let Some(n) = self.rx.poles {
            let _ = writeln!(w, "rx_poles = {n}");
        }
        let _ = writeln!(w, "[fiber]");
        let _ = writeln!(w, "dispersion_ps_nm = {}", self.dispersion_ps_nm);
        let _ = writeln!(w, "wavelength_nm = {}", self.wavelength_nm);
        let _ = writeln!(w, "[apd]");
        let _ = writeln!(w, "responsivity = {}", self.apd.responsivity);
        let _ = writeln!(w, "gain = {}", self.apd.gain);
        let _ = writeln!(w, "excess_noise = {}", self.apd.excess_noise);
        let _ = writeln!(w, "thermal_psd = {:e}", self.apd.thermal_psd);
        let _ = writeln!(w, "[equalizer]");
        let _ = writeln!(w, "taps = {}", self.equalizer.taps);
        let _ = writeln!(w, "step = {:e}", self.equalizer.step);
        let _ = writeln!(w, "training_symbols = {}", self.equalizer.training_symbols);
        let _ = writeln!(w, "center_tap = {}", self.equalizer.center_tap);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_types() {
        let f = ConfigFile::parse(
            "# top\n[scenario]\nformat = edb # inline\nrb_gbps=50\n\n[sweep]\nb3db_pct = 15, 20,25\n",
        )
        .unwrap();
        assert_eq!(f.get::<ModFormat>("scenario", "format").unwrap(), Some(ModFormat::Edb));
        assert_eq!(f.get::<f64>("scenario", "rb_gbps").unwrap(), Some(50.0));
        assert_eq!(f.get::<f64>("fiber", "dispersion_ps_nm").unwrap(), None);
        assert_eq!(f.get_list::<f64>("sweep", "b3db_pct").unwrap(), Some(vec![15.0, 20.0, 25.0]));
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = ConfigFile::parse("[filter]\nb3 = 1\nb3db_pct = 2\n[apd]\ngian = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("filter.b3 (line 2)") && msg.contains("apd.gian (line 5)"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn structural_errors() {
        for text in ["format = pam2\n", "[nope]\n", "[scenario\n", "[scenario]\nformat\n", "[scenario]\nformat = pam2\nformat = pam4\n"] {
            assert!(ConfigFile::parse(text).is_err(), "{text:?}");
        }
        let f = ConfigFile::parse("[scenario]\nrb_gbps = fast\n").unwrap();
        let msg = f.get::<f64>("scenario", "rb_gbps").unwrap_err().to_string();
        assert!(msg.contains("scenario.rb_gbps (line 2)"), "{msg}");
    }

    #[test]
    fn flags_override_file_and_rx_follows_tx() {
        let f = ConfigFile::parse("[filter]\nb3db_pct = 30\nb20db_pct = 70\n[fiber]\nband = O\n").unwrap();
        let o = Overrides {
            b3db_pct: Some(35.0),
            dispersion_ps_nm: Some(100.0),
            ..Default::default()
        };
        let s = ScenarioSettings::resolve(Some(&f), &o).unwrap();
        assert_eq!(s.tx.b3db_pct, 35.0);
        assert_eq!(s.rx, s.tx);
        assert_eq!(s.wavelength_nm, 1310.0);
        assert_eq!(s.dispersion_ps_nm, 100.0);
    }

    #[test]
    fn separate_rx_filter() {
        let f = ConfigFile::parse("[filter]\nb3db_pct = 30\npoles = 1\nrx_poles = 2\n").unwrap();
        let s = ScenarioSettings::resolve(Some(&f), &Overrides::default()).unwrap();
        assert_eq!(s.tx.poles, Some(1));
        assert_eq!(s.rx.poles, Some(2));
        assert_eq!(s.rx.b3db_pct, 30.0);
        let link = s.to_scenario().unwrap();
        assert_eq!(link.rx_filter, FilterSpec::butterworth(2, 7.5e9).unwrap());
    }

    #[test]
    fn echo_round_trips() {
        let o = Overrides {
            format: Some(ModFormat::Odb),
            rb_gbps: Some(50.0),
            b3db_pct: Some(32.0),
            b20db_pct: Some(56.0),
            rop_dbm: Some(-21.5),
            ..Default::default()
        };
        let s = ScenarioSettings::resolve(None, &o).unwrap();
        let again = ScenarioSettings::resolve(Some(&ConfigFile::parse(&s.echo()).unwrap()), &Overrides::default()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn validation_names_the_constraint() {
        let o = Overrides {
            b3db_pct: Some(40.0),
            b20db_pct: Some(30.0),
            ..Default::default()
        };
        let msg = ScenarioSettings::resolve(None, &o).unwrap_err().to_string();
        assert!(msg.contains("b20db_pct (30) must exceed b3db_pct (40)"), "{msg}");
        let o = Overrides {
            rb_gbps: Some(10.0),
            ..Default::default()
        };
        assert!(ScenarioSettings::resolve(None, &o).is_err());
    }
}
