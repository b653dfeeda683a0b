//! Parallel sensitivity sweeps over filter bandwidths, formats, bit rates
//! and dispersion, written as CSV.

use std::fmt::Write as _;
use std::path::Path;

use ponsim::filter::FilterSpec;
use ponsim::metrics::{power_penalty, sensitivity};
use ponsim::tx::ModFormat;
use rayon::prelude::*;

use crate::config::{ConfigFile, FilterSetting, ScenarioSettings, SUPPORTED_RATES_GBPS};
use crate::error::{write_file, CliError, CliResult};
use crate::reference;

/// Penalty above which a cell counts as non-operable [dB].
pub const NON_OPERABLE_PENALTY_DB: f64 = 12.0;

pub const CSV_HEADER: [&str; 10] = [
    "format",
    "Rb_gbps",
    "b3db_pct",
    "b20db_pct",
    "dispersion_ps_nm",
    "wavelength_nm",
    "sensitivity_dbm",
    "penalty_db",
    "status",
    "seed",
];

pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub formats: Vec<ModFormat>,
    pub rates_gbps: Vec<f64>,
    pub b3db_pct: Vec<f64>,
    /// Ignored when `poles` selects a Butterworth filter.
    pub b20db_pct: Vec<f64>,
    pub poles: Option<u32>,
    pub dispersion_ps_nm: Vec<f64>,
    pub seed: u64,
    /// Settings shared by every cell: wavelength, APD, equalizer, PRBS.
    pub base: ScenarioSettings,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            formats: ModFormat::ALL.to_vec(),
            rates_gbps: SUPPORTED_RATES_GBPS.to_vec(),
            b3db_pct: vec![15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            b20db_pct: vec![40.0, 60.0, 80.0, 100.0, 120.0, 140.0],
            poles: None,
            dispersion_ps_nm: vec![0.0],
            seed: 1,
            base: ScenarioSettings::default(),
        }
    }
}

/// Grid values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct GridOverrides {
    pub formats: Option<Vec<ModFormat>>,
    pub rates_gbps: Option<Vec<f64>>,
    pub b3db_pct: Option<Vec<f64>>,
    pub b20db_pct: Option<Vec<f64>>,
    pub dispersion_ps_nm: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl SweepGrid {
    /// Defaults, then the `[sweep]` section, then flags. `base` carries the
    /// already resolved shared settings.
    pub fn resolve(file: Option<&ConfigFile>, flags: &GridOverrides, base: ScenarioSettings) -> CliResult<Self> {
        let mut g = SweepGrid {
            poles: base.tx.poles,
            base,
            ..Default::default()
        };
        if let Some(f) = file {
            if let Some(v) = f.get_list("sweep", "formats")? {
                g.formats = v;
            }
            if let Some(v) = f.get_list("sweep", "rb_gbps")? {
                g.rates_gbps = v;
            }
            if let Some(v) = f.get_list("sweep", "b3db_pct")? {
                g.b3db_pct = v;
            }
            if let Some(v) = f.get_list("sweep", "b20db_pct")? {
                g.b20db_pct = v;
            }
            if let Some(v) = f.get_list("sweep", "dispersion_ps_nm")? {
                g.dispersion_ps_nm = v;
            }
            if let Some(v) = f.get("sweep", "seed")? {
                g.seed = v;
            }
        }
        let o = flags.clone();
        g.formats = o.formats.unwrap_or(g.formats);
        g.rates_gbps = o.rates_gbps.unwrap_or(g.rates_gbps);
        g.b3db_pct = o.b3db_pct.unwrap_or(g.b3db_pct);
        g.b20db_pct = o.b20db_pct.unwrap_or(g.b20db_pct);
        g.dispersion_ps_nm = o.dispersion_ps_nm.unwrap_or(g.dispersion_ps_nm);
        g.seed = o.seed.unwrap_or(g.seed);
        g.normalize();
        g.validate()?;
        Ok(g)
    }

    fn normalize(&mut self) {
        fn sort_dedup(v: &mut Vec<f64>) {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        self.formats.sort();
        self.formats.dedup();
        sort_dedup(&mut self.rates_gbps);
        sort_dedup(&mut self.b3db_pct);
        sort_dedup(&mut self.b20db_pct);
        sort_dedup(&mut self.dispersion_ps_nm);
    }

    pub fn validate(&self) -> CliResult<()> {
        let empty = [
            ("formats", self.formats.is_empty()),
            ("rb_gbps", self.rates_gbps.is_empty()),
            ("b3db_pct", self.b3db_pct.is_empty()),
            ("b20db_pct", self.b20db_pct.is_empty() && self.poles.is_none()),
            ("dispersion_ps_nm", self.dispersion_ps_nm.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(CliError::Config(format!("sweep axis {name} is empty")));
        }
        if let Some(rb) = self.rates_gbps.iter().find(|rb| reference::bundled().s0_dbm(**rb).is_none()) {
            return Err(CliError::Config(format!("no S0 anchor for {rb} Gb/s; rb_gbps must be 25 or 50")));
        }
        let bad = |v: &f64| !(v.is_finite() && *v > 0.0);
        if self.b3db_pct.iter().chain(&self.b20db_pct).any(bad) {
            return Err(CliError::Config("sweep bandwidths must be positive".into()));
        }
        if self.dispersion_ps_nm.iter().any(|d| !d.is_finite()) {
            return Err(CliError::Config("sweep dispersion values must be finite".into()));
        }
        if self.poles == Some(0) {
            return Err(CliError::Config("poles must be at least 1".into()));
        }
        Ok(())
    }

    /// Every cell in output order, including ones that will be skipped.
    pub fn cells(&self) -> Vec<Cell> {
        let b20_axis: Vec<Option<f64>> = match self.poles {
            Some(_) => vec![None],
            None => self.b20db_pct.iter().copied().map(Some).collect(),
        };
        let mut cells = Vec::new();
        for &format in &self.formats {
            for &rb in &self.rates_gbps {
                for &b3 in &self.b3db_pct {
                    for &b20 in &b20_axis {
                        for &d in &self.dispersion_ps_nm {
                            let index = cells.len() as u64;
                            cells.push(Cell {
                                format,
                                rb_gbps: rb,
                                filter: FilterSetting {
                                    b3db_pct: b3,
                                    b20db_pct: b20.unwrap_or(f64::NAN),
                                    poles: self.poles,
                                },
                                dispersion_ps_nm: d,
                                seed: cell_seed(self.seed, index),
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub format: ModFormat,
    pub rb_gbps: f64,
    pub filter: FilterSetting,
    pub dispersion_ps_nm: f64,
    pub seed: u64,
}

impl Cell {
    fn is_valid(&self) -> bool {
        self.filter.poles.is_some() || self.filter.b20db_pct > self.filter.b3db_pct
    }
}

/// SplitMix64 finalizer of `base` combined with the cell index.
pub fn cell_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NonOperable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NonOperable => "non-operable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub format: ModFormat,
    pub rb_gbps: f64,
    pub b3db_pct: f64,
    pub b20db_pct: f64,
    pub dispersion_ps_nm: f64,
    pub wavelength_nm: f64,
    pub sensitivity_dbm: Option<f64>,
    pub penalty_db: Option<f64>,
    pub status: Status,
    pub seed: u64,
}

fn evaluate(cell: &Cell, base: &ScenarioSettings) -> SweepRow {
    let bit_rate = cell.rb_gbps * 1e9;
    // Butterworth cells report their own -20 dB point.
    let b20db_pct = match cell.filter.poles {
        Some(n) => FilterSpec::butterworth(n, cell.filter.b3db_pct / 100.0 * bit_rate)
            .map(|f| f.normalized(bit_rate).b20db_pct)
            .unwrap_or(f64::NAN),
        None => cell.filter.b20db_pct,
    };
    let mut row = SweepRow {
        format: cell.format,
        rb_gbps: cell.rb_gbps,
        b3db_pct: cell.filter.b3db_pct,
        b20db_pct,
        dispersion_ps_nm: cell.dispersion_ps_nm,
        wavelength_nm: base.wavelength_nm,
        sensitivity_dbm: None,
        penalty_db: None,
        status: Status::NonOperable,
        seed: cell.seed,
    };
    let settings = ScenarioSettings {
        format: cell.format,
        rb_gbps: cell.rb_gbps,
        tx: cell.filter,
        rx: cell.filter,
        dispersion_ps_nm: cell.dispersion_ps_nm,
        noise_seed: cell.seed,
        ..base.clone()
    };
    let result = settings
        .to_scenario()
        .and_then(|s| sensitivity(&s).map_err(CliError::runtime));
    match result {
        Err(e) => log::warn!("{} {} Gb/s {}%/{}%: {e}", cell.format, cell.rb_gbps, row.b3db_pct, row.b20db_pct),
        Ok(r) => {
            if let Some(sens) = r.sensitivity_dbm {
                let s0 = reference::bundled().s0_dbm(cell.rb_gbps).expect("validated rate");
                let penalty = power_penalty(sens, s0);
                row.sensitivity_dbm = Some(sens);
                row.penalty_db = Some(penalty);
                if penalty <= NON_OPERABLE_PENALTY_DB {
                    row.status = Status::Ok;
                }
            }
        }
    }
    row
}

/// Run every valid cell on `workers` threads (0: one per core).
pub fn run_sweep(grid: &SweepGrid, workers: usize) -> CliResult<Vec<SweepRow>> {
    let cells: Vec<Cell> = grid
        .cells()
        .into_iter()
        .filter(|c| {
            let ok = c.is_valid();
            if !ok {
                log::warn!(
                    "skipping {} {} Gb/s cell: b20db_pct {} does not exceed b3db_pct {}",
                    c.format,
                    c.rb_gbps,
                    c.filter.b20db_pct,
                    c.filter.b3db_pct
                );
            }
            ok
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(CliError::runtime)?;
    log::info!("running {} sweep cells", cells.len());
    let mut rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|c| evaluate(c, &grid.base)).collect());
    rows.sort_by(|a, b| {
        a.format
            .cmp(&b.format)
            .then(a.rb_gbps.total_cmp(&b.rb_gbps))
            .then(a.b3db_pct.total_cmp(&b.b3db_pct))
            .then(a.b20db_pct.total_cmp(&b.b20db_pct))
            .then(a.dispersion_ps_nm.total_cmp(&b.dispersion_ps_nm))
    });
    Ok(rows)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.to_string()
    }
}

fn measured(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.3}"))
}

pub fn to_csv(rows: &[SweepRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(CliError::runtime)?;
    for r in rows {
        w.write_record([
            r.format.as_str().to_string(),
            num(r.rb_gbps),
            num(r.b3db_pct),
            num((r.b20db_pct * 1e6).round() / 1e6),
            num(r.dispersion_ps_nm),
            num(r.wavelength_nm),
            measured(r.sensitivity_dbm),
            measured(r.penalty_db),
            r.status.as_str().to_string(),
            r.seed.to_string(),
        ])
        .map_err(CliError::runtime)?;
    }
    w.into_inner().map_err(CliError::runtime)
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> CliResult<()> {
    write_file(path, &to_csv(rows)?)
}

/// Matplotlib script drawing penalty contours from the CSV at `csv_path`,
/// with the bundled table cases marked at their nearest grid cell.
pub fn plot_script(csv_path: &Path, grid: &SweepGrid) -> String {
    let mut marks = String::new();
    for r in &reference::bundled().rows {
        let (Some(b3), Some(b20)) = (
            reference::nearest(&grid.b3db_pct, r.b3db_pct),
            reference::nearest(&grid.b20db_pct, r.b20db_pct),
        ) else {
            continue;
        };
        let _ = writeln!(
            marks,
            "    ({}, {}, {}, {b3}, {b20}, {}, {}),",
            r.table, r.case, r.rb_gbps, r.b3db_pct, r.b20db_pct
        );
    }
    let csv_literal = format!("{:?}", csv_path.display().to_string());
    PLOT_TEMPLATE
        .replace("@CSV@", &csv_literal)
        .replace("@MARKS@", &marks)
}

const PLOT_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Penalty contours over (b3db_pct, b20db_pct) from a ponsim sweep CSV."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

CSV_PATH = @CSV@

# (table, case, Rb_gbps, nearest b3db_pct, nearest b20db_pct, b3db_pct, b20db_pct)
TABLE_CASES = [
@MARKS@]

groups = defaultdict(list)
with open(CSV_PATH, newline="") as f:
    for row in csv.DictReader(f):
        key = (row["format"], row["Rb_gbps"], row["dispersion_ps_nm"], row["wavelength_nm"])
        groups[key].append(row)

for (fmt, rb, disp, wl), rows in sorted(groups.items()):
    x = [float(r["b3db_pct"]) for r in rows]
    y = [float(r["b20db_pct"]) for r in rows]
    ok = [r["status"] == "ok" and r["penalty_db"] != "NA" for r in rows]
    z = [float(r["penalty_db"]) if k else float("nan") for r, k in zip(rows, ok)]
    fig, ax = plt.subplots()
    xs = [a for a, k in zip(x, ok) if k]
    ys = [b for b, k in zip(y, ok) if k]
    zs = [c for c, k in zip(z, ok) if k]
    if len(zs) >= 3 and len(set(xs)) > 1 and len(set(ys)) > 1:
        cs = ax.tricontourf(xs, ys, zs, levels=12, cmap="viridis")
        ax.tricontour(xs, ys, zs, levels=12, colors="k", linewidths=0.5)
        fig.colorbar(cs, ax=ax, label="penalty [dB]")
    bad = [(a, b) for a, b, k in zip(x, y, ok) if not k]
    if bad:
        ax.plot(*zip(*bad), "rx", label="non-operable")
    cases = [c for c in TABLE_CASES if str(c[2]) == rb or float(c[2]) == float(rb)]
    for table, case, _, nb3, nb20, b3, b20 in cases:
        ax.plot(nb3, nb20, "wo" if table == 1 else "ws", mec="k")
        ax.annotate(f"{table}.{case}", (nb3, nb20), fontsize=7)
    ax.set_xlabel("B3dB [% of Rb]")
    ax.set_ylabel("B20dB [% of Rb]")
    ax.set_title(f"{fmt} {rb} Gb/s, {disp} ps/nm @ {wl} nm")
    fig.savefig(f"penalty_{fmt}_{rb}G_{disp}psnm.png", dpi=150)
    plt.close(fig)
"#;
