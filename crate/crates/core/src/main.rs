use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringqkd::config::{load_config, Parsed, PRESETS};
use ringqkd::experiments::{Mode, ResultTable};
use ringqkd::optics::{fit_to_measurement, FitOptions, SpectrumAxis, SpectrumTable, TransferFunction};
use ringqkd::output::{execute, render_results, replay, resolve_out_path, RunManifest};
use ringqkd::qkd::{secure_rate, LinkParams, DEFAULT_F_EC};
use ringqkd::scalar::linear_to_db;
use ringqkd::{Error, SpadModel};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error
  3  input file missing or unreadable
  4  syntax error in a configuration or data file
  5  unknown configuration key (strict mode)
  6  invalid parameter value (the offending key is named)
  7  output could not be written
  8  ring fit failed or no ring matches the requested figures
  9  simulation error

Configuration arguments accept a file path or `preset:NAME`.
Relative --out paths are placed under $RINGQKD_OUT_DIR when it is set.";

#[derive(Parser)]
#[command(name = "ringqkd", version, about = "DPS-QKD link simulator with a micro-ring demodulator", after_help = EXIT_CODES)]
struct Cli {
    /// Reject configuration files with unknown keys.
    #[arg(long, global = true)]
    strict: bool,

    /// Write output here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a ring model to a measured through-port spectrum.
    Fit {
        spectrum: PathBuf,
        /// Free spectral range; estimated from notch spacing when omitted.
        #[arg(long)]
        fsr_hz: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        max_rms_db: f64,
    },
    /// Tabulate the demodulator power response (dB) over a detuning range.
    Respond {
        config: String,
        /// Start detuning in GHz.
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        /// End detuning in GHz.
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        /// Step in GHz.
        #[arg(long)]
        step: f64,
    },
    /// Run one scenario.
    Simulate {
        config: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the sweep described by the configuration's [sweep] table.
    Sweep {
        config: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Secure key rate at a given QBER and loss.
    Keyrate {
        #[arg(long)]
        qber: f64,
        /// Total transmitter-to-SPAD loss in dB.
        #[arg(long)]
        loss: f64,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 1e9)]
        symbol_rate_hz: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 550.0)]
        dark_cps: f64,
        #[arg(long, default_value_t = 0.02)]
        afterpulse_prob: f64,
        #[arg(long, default_value_t = DEFAULT_F_EC)]
        f_ec: f64,
    },
    /// List the shipped presets, or print one.
    Preset { name: Option<String> },
    /// Regenerate a result file from its embedded manifest.
    Replay { results: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// analytic, mc or both.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}` (expected analytic, mc or both)"))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Read { .. } => 3,
        Error::Syntax { .. } => 4,
        Error::UnknownKeys(_) => 5,
        Error::Invariant { .. } => 6,
        Error::Write { .. } => 7,
        Error::FitFailure(_) | Error::NoSolution(_) => 8,
        Error::Input(_) => 9,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> ringqkd::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Write {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(source: &str, strict: bool) -> ringqkd::Result<Parsed> {
    let parsed = load_config(source, strict)?;
    for key in &parsed.unknown_keys {
        eprintln!("warning: ignoring unknown configuration key `{key}`");
    }
    Ok(parsed)
}

fn run(cli: Cli) -> ringqkd::Result<()> {
    let out = cli.out.as_deref().map(resolve_out_path);
    let out = out.as_deref();
    match cli.command {
        Command::Fit {
            spectrum,
            fsr_hz,
            max_rms_db,
        } => {
            let table = SpectrumTable::read(&spectrum).map_err(|e| match e {
                Error::Input(message) => Error::Syntax { path: spectrum.clone(), message },
                other => other,
            })?;
            let opts = FitOptions {
                fsr_hz,
                max_residual_rms_db: max_rms_db,
                ..FitOptions::default()
            };
            let fit = fit_to_measurement(&table, &opts)?;
            let m = fit.model;
            let report = format!(
                "fsr_hz = {}\nt_self = {}\na_rt = {}\nresonance_offset_hz = {}\nexcess_loss_db = {}\n\
                 baseline_db = {}\nfwhm_hz = {}\nnotch_extinction_db = {}\nphoton_lifetime_s = {}\n\
                 residual_rms_db = {}\niterations = {}\n",
                m.fsr_hz,
                m.t_self,
                m.a_rt,
                m.resonance_offset_hz,
                m.excess_loss_db,
                fit.baseline_db,
                m.fwhm_hz(),
                m.notch_extinction_db(),
                m.photon_lifetime_s(),
                fit.residual_rms_db,
                fit.iterations
            );
            emit(out, &report)
        }
        Command::Respond { config, from, to, step } => {
            let parsed = load(&config, cli.strict)?;
            if !(step > 0.0 && to > from && step.is_finite() && from.is_finite() && to.is_finite()) {
                return Err(Error::Input("need --from < --to and --step > 0".into()));
            }
            let demod = parsed.config.scenario.demodulator.build()?;
            let n = ((to - from) / step + 1e-9).floor() as usize + 1;
            let mut text = format!("{}\n", SpectrumAxis::DetuningGhz.header());
            for i in 0..n {
                let ghz = ((from + i as f64 * step) * 1e9).round() / 1e9;
                let db = linear_to_db(demod.response(ghz * 1e9).norm_sqr());
                text.push_str(&format!("{ghz},{db}\n"));
            }
            emit(out, &text)
        }
        Command::Simulate { config, run } => run_config("simulate", &config, &run, cli.strict, out),
        Command::Sweep { config, run } => run_config("sweep", &config, &run, cli.strict, out),
        Command::Keyrate {
            qber,
            loss,
            mu,
            symbol_rate_hz,
            eta,
            dark_cps,
            afterpulse_prob,
            f_ec,
        } => {
            let link = LinkParams {
                mu,
                symbol_rate_hz,
                total_loss_db: loss,
                extinction_db: f64::INFINITY,
                ..LinkParams::default()
            };
            let spad = SpadModel {
                eta,
                dark_cps,
                afterpulse_prob,
                ..SpadModel::default()
            };
            let r = secure_rate(&link, &spad, qber, f_ec)?;
            emit(
                out,
                &format!(
                    "qber_used = {}\nsifted_rate_bps = {}\nsecure_fraction = {}\nsecure_rate_bps = {}\nsecure_bits_per_symbol = {}\n",
                    r.qber_used, r.sifted_rate_bps, r.secure_fraction, r.secure_rate_bps, r.secure_bits_per_symbol
                ),
            )
        }
        Command::Preset { name } => match name {
            None => emit(out, &PRESETS.iter().map(|(n, _)| format!("{n}\n")).collect::<String>()),
            Some(n) => {
                let parsed = load(&format!("preset:{n}"), true)?;
                emit(out, &parsed.config.to_toml())
            }
        },
        Command::Replay { results } => {
            let text = std::fs::read_to_string(&results).map_err(|source| Error::Read {
                path: results.clone(),
                source,
            })?;
            let (mut manifest, table) = replay(&text, &results)?;
            manifest.outputs = out.map(|p| vec![p.display().to_string()]).unwrap_or_default();
            emit(out, &render_results(&table, &manifest))
        }
    }
}

fn run_config(command: &str, source: &str, args: &RunArgs, strict: bool, out: Option<&Path>) -> ringqkd::Result<()> {
    let mut config = load(source, strict)?.config;
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.scenario.mode = mode;
    }
    config.validate()?;
    let table: ResultTable = execute(command, &config)?;
    for row in table.rows.iter().filter(|r| r.status != "ok") {
        eprintln!("row {} ({}): {}", row.index, row.mode, row.status);
    }
    let outputs = out.map(|p| vec![p.display().to_string()]).unwrap_or_default();
    let manifest = RunManifest::new(command, &config, outputs);
    emit(out, &render_results(&table, &manifest))
}
