//! Argument definitions and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ponsim::fiber::Band;
use ponsim::metrics::{power_penalty, sensitivity, simulate_ber, BerOutcome};
use ponsim::tx::ModFormat;

use crate::config::{ConfigFile, Overrides, ScenarioSettings};
use crate::error::{read_file, write_file, CliError, CliResult};
use crate::reference::{self, ReferenceData};
use crate::response::{fit_pair, Response};
use crate::sweep::{self, GridOverrides, SweepGrid};

#[derive(Debug, Parser)]
#[command(name = "ponsim", version, about = "25G/50G PON IM/DD link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER of one scenario at one received optical power.
    Ber(ScenarioArgs),
    /// ROP reaching BER 1e-3 and the penalty against the PAM-2 anchor.
    Sensitivity(ScenarioArgs),
    /// Sensitivity grid over bandwidths, formats, bit rates and dispersion.
    Sweep(SweepArgs),
    /// Equivalent identical super-Gaussian pair for measured TX/RX responses.
    Fit(FitArgs),
    /// Dump the bundled reference tables and anchors.
    Tables(TablesArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<ModFormat>,
    #[arg(long)]
    pub rb_gbps: Option<f64>,
    #[arg(long)]
    pub b3db_pct: Option<f64>,
    #[arg(long)]
    pub b20db_pct: Option<f64>,
    /// Butterworth order; selects a Butterworth filter at b3db_pct.
    #[arg(long)]
    pub poles: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub dispersion_ps_nm: Option<f64>,
    /// Carrier wavelength preset: O 1310 nm, C 1550 nm, L 1590 nm.
    #[arg(long)]
    pub band: Option<Band>,
    #[arg(long, allow_negative_numbers = true)]
    pub rop_dbm: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// sensitivity: write the probed BER curve here as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<ModFormat>>,
    #[arg(long, value_delimiter = ',')]
    pub rb_gbps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub b3db_pct: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub b20db_pct: Option<Vec<f64>>,
    #[arg(long)]
    pub poles: Option<u32>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub dispersion_ps_nm: Option<Vec<f64>>,
    #[arg(long)]
    pub band: Option<Band>,
    /// Base seed; each cell derives its own.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    pub emit_plot_script: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TX response: `frequency_Hz magnitude_dB` per line.
    pub tx: PathBuf,
    /// RX response, same format.
    pub rx: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> CliResult<Option<ConfigFile>> {
    path.map(|p| {
        let text = read_file(p)?;
        ConfigFile::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot write output: {e}"))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Ber(a) => cmd_ber(&a, out),
        Command::Sensitivity(a) => cmd_sensitivity(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Tables(a) => cmd_tables(&a, out),
    }
}

fn resolve_scenario(a: &ScenarioArgs) -> CliResult<ScenarioSettings> {
    let file = load_config(a.config.as_deref())?;
    let flags = Overrides {
        format: a.format,
        rb_gbps: a.rb_gbps,
        b3db_pct: a.b3db_pct,
        b20db_pct: a.b20db_pct,
        poles: a.poles,
        dispersion_ps_nm: a.dispersion_ps_nm,
        band: a.band,
        rop_dbm: a.rop_dbm,
        seed: a.seed,
    };
    ScenarioSettings::resolve(file.as_ref(), &flags)
}

fn cmd_ber(a: &ScenarioArgs, out: &mut dyn Write) -> CliResult<()> {
    let s = resolve_scenario(a)?;
    let rop = s
        .rop_dbm
        .ok_or_else(|| CliError::Config("ber needs --rop-dbm or scenario.rop_dbm".into()))?;
    write!(out, "{}", s.echo()).map_err(io_err)?;
    let outcome = simulate_ber(&s.to_scenario()?, rop).map_err(CliError::runtime)?;
    match outcome {
        BerOutcome::Measured(b) => writeln!(out, "# result\nber = {b:e}"),
        BerOutcome::NonOperable(why) => writeln!(out, "# result\nber = NA\nstatus = non-operable ({why})"),
    }
    .map_err(io_err)
}

fn cmd_sensitivity(a: &ScenarioArgs, out: &mut dyn Write) -> CliResult<()> {
    let s = resolve_scenario(a)?;
    write!(out, "{}", s.echo()).map_err(io_err)?;
    let r = sensitivity(&s.to_scenario()?).map_err(CliError::runtime)?;
    let s0 = reference::bundled().s0_dbm(s.rb_gbps).expect("validated rate");
    writeln!(out, "# result").map_err(io_err)?;
    match r.sensitivity_dbm {
        Some(sens) => writeln!(
            out,
            "sensitivity_dbm = {sens:.3}\npenalty_db = {:.3}\ns0_dbm = {s0}\nconverged = {}",
            power_penalty(sens, s0),
            r.converged
        ),
        None => writeln!(out, "sensitivity_dbm = NA\npenalty_db = NA\nstatus = non-operable"),
    }
    .map_err(io_err)?;
    if let Some(path) = &a.out {
        let mut csv = String::from("rop_dbm,ber\n");
        for (p, b) in &r.ber_curve {
            csv.push_str(&format!("{p},{b:e}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let file = load_config(a.config.as_deref())?;
    let flags = Overrides {
        poles: a.poles,
        band: a.band,
        ..Default::default()
    };
    let base = ScenarioSettings::resolve(file.as_ref(), &flags)?;
    let grid_flags = GridOverrides {
        formats: a.format.clone(),
        rates_gbps: a.rb_gbps.clone(),
        b3db_pct: a.b3db_pct.clone(),
        b20db_pct: a.b20db_pct.clone(),
        dispersion_ps_nm: a.dispersion_ps_nm.clone(),
        seed: a.seed,
    };
    let grid = SweepGrid::resolve(file.as_ref(), &grid_flags, base)?;
    let workers = match a.workers {
        Some(w) => w,
        None => file.as_ref().map(|f| f.get("sweep", "workers")).transpose()?.flatten().unwrap_or(0),
    };
    let path = match &a.out {
        Some(p) => p.clone(),
        None => file
            .as_ref()
            .map(|f| f.get::<PathBuf>("sweep", "out"))
            .transpose()?
            .flatten()
            .unwrap_or_else(|| PathBuf::from("sweep.csv")),
    };
    let rows = sweep::run_sweep(&grid, workers)?;
    sweep::write_csv(&rows, &path)?;
    let operable = rows.iter().filter(|r| r.status == sweep::Status::Ok).count();
    writeln!(out, "wrote {} rows ({operable} ok) to {}", rows.len(), path.display()).map_err(io_err)?;
    if a.emit_plot_script {
        let script = path.with_extension("py");
        write_file(&script, sweep::plot_script(&path, &grid).as_bytes())?;
        writeln!(out, "wrote plot script {}", script.display()).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let parse = |p: &Path| Response::parse(&read_file(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
    let (tx, rx) = (parse(&a.tx)?, parse(&a.rx)?);
    let fit = fit_pair(&tx, &rx)?;
    let mut text = format!(
        "f3db_ghz = {:.3}\nf20db_ghz = {:.3}\nrb_gbps,b3db_pct,b20db_pct\n",
        fit.f3db_hz / 1e9,
        fit.f20db_hz / 1e9
    );
    for rb in crate::config::SUPPORTED_RATES_GBPS {
        let n = fit.normalized(rb);
        text.push_str(&format!("{rb},{:.1},{:.1}\n", n.b3db_pct, n.b20db_pct));
    }
    out.write_all(text.as_bytes()).map_err(io_err)?;
    if let Some(path) = &a.out {
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_tables(a: &TablesArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut text = ReferenceData::tables_csv().to_string();
    text.push_str("# S0 anchors\nrb_gbps,s0_dbm\n");
    for (rb, s0) in &reference::bundled().s0 {
        text.push_str(&format!("{rb},{s0}\n"));
    }
    match &a.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}
