use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use biphoton_dispersion::extraction::format_measured;
use biphoton_dispersion::io::{
    extract_all, histogram_to_csv, measure, phase_trace_to_csv, read_spectrum, roundtrip, simulate,
    spectrum_to_csv, write_atomic, PumpData, Report, RunConfig,
};
use biphoton_dispersion::Exec;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_ACCEPTANCE: u8 = 5;

/// Biphoton interferometer simulator and fiber dispersion extraction.
#[derive(Parser, Debug)]
#[command(name = "bpdisp", version)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write noiseless spectra with and without the FUT for every pump
    Simulate,
    /// Measure spectrum files with the time-of-flight spectrometer
    Spectrometer {
        /// Spectrum CSV files
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
    /// Extract the FUT dispersion from with/without spectrum pairs
    Extract {
        /// Spectra measured with the FUT, one per pump
        #[arg(long = "with", required = true, num_args = 1..)]
        with_fut: Vec<PathBuf>,
        /// Reference spectra without the FUT, in the same order
        #[arg(long = "without", required = true, num_args = 1..)]
        without_fut: Vec<PathBuf>,
    },
    /// Simulate, measure and extract in memory, then compare with the model
    Roundtrip,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn numeric(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_CONFIG,
            error: e.into(),
        })
    }

    fn numeric(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_NUMERIC,
            error: e.into(),
        })
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
    exec: Exec,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn notice(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("notice: {}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, contents.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn load(cli: &Cli) -> Result<Ctx, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config PATH is required"))
        .config()?;
    let mut cfg = RunConfig::load(path).config()?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Ctx {
        cfg,
        out,
        quiet: cli.quiet,
        exec: Exec::default(),
    })
}

fn provenance(ctx: &Ctx) -> Vec<(&'static str, String)> {
    vec![
        ("config_hash", ctx.cfg.hash()),
        ("seed", ctx.cfg.seed.to_string()),
        ("experiment", ctx.cfg.name.clone()),
    ]
}

fn cmd_simulate(ctx: &Ctx) -> Result<(), Failure> {
    if ctx.cfg.setup.fut.is_none() {
        ctx.notice("config has no [setup.fut] block; writing reference spectra only");
    }
    let spectra = simulate(&ctx.cfg, ctx.exec).numeric()?;
    for s in &spectra {
        let text = spectrum_to_csv(&s.spectrum, s.pump_nm, &provenance(ctx));
        let path = ctx
            .write(&format!("{}.csv", s.file_stem()), &text)
            .numeric()?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "spectrum".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_spectrometer(ctx: &Ctx, inputs: &[PathBuf]) -> Result<(), Failure> {
    for input in inputs {
        let file = read_spectrum(input).config()?;
        let pump = file
            .pump_nm()
            .ok_or_else(|| anyhow!("{}: header has no 'pump_nm' entry", input.display()))
            .config()?;
        let m = measure(&ctx.cfg, &file.spectrum, pump, ctx.exec)
            .with_context(|| format!("measuring {}", input.display()))
            .numeric()?;
        let stem = stem_of(input);
        let mut extra = provenance(ctx);
        extra.push(("rng_seed", m.histogram.config.rng_seed.to_string()));
        let h = ctx
            .write(
                &format!("histogram_{stem}.csv"),
                &histogram_to_csv(&m.histogram, &extra),
            )
            .numeric()?;
        extra.push(("kind", "recovered from histogram".to_string()));
        let r = ctx
            .write(
                &format!("recovered_{stem}.csv"),
                &spectrum_to_csv(&m.recovered, pump, &extra),
            )
            .numeric()?;
        ctx.say(format!(
            "{}: {} counts -> {}, {}",
            input.display(),
            m.histogram.total_counts,
            h.display(),
            r.display()
        ));
    }
    Ok(())
}

fn print_report(ctx: &Ctx, report: &Report) {
    for p in &report.pumps {
        match &p.estimate {
            Some(e) => ctx.say(format!(
                "lambda_deg {:.2} nm: D = {} ps/(nm km), k2 = {} ps^2/km{}",
                p.lambda_deg_nm,
                format_measured(e.d, e.sigma_d),
                format_measured(e.k2, e.sigma_k2),
                e.sigma_d_bootstrap
                    .map(|b| format!(", bootstrap sigma_D = {b:.2e}"))
                    .unwrap_or_default()
            )),
            None => ctx.say(format!(
                "lambda_deg {:.2} nm: delta_c2 = {} rad ps^2 (no FUT length)",
                p.lambda_deg_nm,
                format_measured(p.delta_c2, p.sigma_delta_c2)
            )),
        }
    }
    if let Some(s) = &report.slope {
        ctx.say(format!(
            "slope at {:.1} nm: S = {} ps/(nm^2 km)",
            s.lambda_mid_nm,
            format_measured(s.s, s.sigma_s)
        ));
    }
    for w in &report.warnings {
        if !ctx.quiet {
            eprintln!("warning: {w}");
        }
    }
}

fn write_outputs(
    ctx: &Ctx,
    report_name: &str,
    outcome: &biphoton_dispersion::io::ExtractOutcome,
) -> Result<(), Failure> {
    for (p, x) in outcome.report.pumps.iter().zip(&outcome.extractions) {
        let n = &x.normalized_with;
        let text = phase_trace_to_csv(
            &n.detuning,
            n.omega_deg,
            &x.difference,
            x.pointwise.as_ref(),
            &provenance(ctx),
        );
        ctx.write(&format!("phase_{}nm.csv", p.pump_nm), &text)
            .numeric()?;
    }
    let path = ctx
        .write(report_name, &outcome.report.to_json())
        .numeric()?;
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

fn cmd_extract(ctx: &Ctx, with_fut: &[PathBuf], without_fut: &[PathBuf]) -> Result<(), Failure> {
    if with_fut.len() != without_fut.len() {
        return Err(anyhow!(
            "got {} --with files but {} --without files",
            with_fut.len(),
            without_fut.len()
        ))
        .config();
    }
    if with_fut.len() > 2 {
        return Err(anyhow!("at most two pump settings are supported")).config();
    }
    let mut data = Vec::new();
    for (i, (w, wo)) in with_fut.iter().zip(without_fut).enumerate() {
        let fw = read_spectrum(w).config()?;
        let fwo = read_spectrum(wo).config()?;
        let pump = match fw
            .pump_nm()
            .or(fwo.pump_nm())
            .or(ctx.cfg.pumps_nm.get(i).copied())
        {
            Some(p) => p,
            None => {
                return Err(anyhow!("{}: cannot tell the pump wavelength", w.display())).config()
            }
        };
        data.push(PumpData {
            pump_nm: pump,
            with_fut: fw.spectrum,
            without_fut: fwo.spectrum,
        });
    }
    let outcome = extract_all(&ctx.cfg, &data, ctx.exec).numeric()?;
    print_report(ctx, &outcome.report);
    write_outputs(ctx, "report.json", &outcome)
}

fn cmd_roundtrip(ctx: &Ctx) -> Result<(), Failure> {
    let outcome = roundtrip(&ctx.cfg, ctx.exec).numeric()?;
    print_report(ctx, &outcome.report);
    write_outputs(ctx, "roundtrip_report.json", &outcome)?;
    let summary = outcome
        .report
        .roundtrip
        .as_ref()
        .expect("roundtrip attaches a summary");
    for c in &summary.checks {
        ctx.say(format!(
            "{} {}: measured {:.6}, expected {:.6}, tolerance {:.2e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.expected,
            c.tolerance
        ));
    }
    if summary.passed {
        ctx.say("roundtrip: PASS");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_ACCEPTANCE,
            error: anyhow!("roundtrip: FAIL"),
        })
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = load(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Spectrometer { inputs } => cmd_spectrometer(&ctx, inputs),
        Command::Extract {
            with_fut,
            without_fut,
        } => cmd_extract(&ctx, with_fut, without_fut),
        Command::Roundtrip => cmd_roundtrip(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "bpdisp",
            "roundtrip",
            "--config",
            "c.toml",
            "--seed",
            "3",
            "--quiet",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(3));
        assert!(cli.quiet);
        assert!(matches!(cli.command, Command::Roundtrip));
    }

    #[test]
    fn extract_requires_pairs() {
        assert!(Cli::try_parse_from(["bpdisp", "extract", "--with", "a.csv"]).is_err());
    }
}
