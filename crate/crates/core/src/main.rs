use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blesim::channel::{InterfererConfig, ProfileKind};
use blesim::harness::{
    emit_results, generate_frame, paper_scenarios, receiver_config, run_campaign, to_csv, to_json,
    OutputFormat, PerResult, ProfileSpec, ScenarioConfig,
};
use blesim::rx::Receiver;
use blesim::{iqfile, Error, PhyMode, Result};

#[derive(Parser)]
#[command(
    name = "blesim",
    version,
    about = "BLE 5 baseband simulator and PER harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point of a JSON scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// List or write out the built-in experiment scenarios.
    PaperScenarios {
        #[arg(long, conflicts_with = "emit", required_unless_present = "emit")]
        list: bool,
        #[arg(long, value_name = "DIR")]
        emit: Option<PathBuf>,
    },
    /// Quick PER sweep for one PHY mode.
    Per {
        #[arg(long)]
        phy: PhyMode,
        /// `a:step:b` in dB, or a single value.
        #[arg(long)]
        snr: String,
        /// Comma-separated SIR values in dB; enables the WLAN interferer.
        #[arg(long)]
        sir: Option<String>,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 2040)]
        pdu_bits: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Write each receiver stage's IQ for one frame of a scenario.
    DumpStages {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        frame: u64,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the config's first mode.
        #[arg(long)]
        phy: Option<PhyMode>,
    },
}

#[derive(Args)]
struct Jobs {
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blesim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Param(_)
        | Error::PduLength(_)
        | Error::Profile(_)
        | Error::Map(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            out,
            format,
            seed,
            jobs,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let results = with_jobs(jobs.jobs, || run_campaign(&cfg))?;
            emit_results(&results, format, &out)
        }
        Command::PaperScenarios { emit, .. } => match emit {
            None => {
                for s in paper_scenarios() {
                    let modes: Vec<String> = s.phy_modes.iter().map(PhyMode::to_string).collect();
                    println!("{}\t{}", s.name, modes.join(","));
                }
                Ok(())
            }
            Some(dir) => {
                std::fs::create_dir_all(&dir)?;
                for s in paper_scenarios() {
                    let path = dir.join(format!("{}.json", s.name));
                    std::fs::write(&path, s.to_json() + "\n")?;
                    println!("{}", path.display());
                }
                Ok(())
            }
        },
        Command::Per {
            phy,
            snr,
            sir,
            frames,
            profile,
            pdu_bits,
            seed,
            out,
            format,
            jobs,
        } => {
            let mut cfg = ScenarioConfig::new(
                "per",
                vec![phy],
                ProfileSpec::Named(parse_profile(&profile)?),
                seed,
            );
            cfg.snr_sweep = parse_range(&snr)?.into_iter().map(Some).collect();
            if let Some(list) = sir {
                cfg.sir_sweep = Some(parse_list(&list, "sir")?);
                cfg.interferer = Some(InterfererConfig::default());
            }
            cfg.frames = frames;
            cfg.pdu_bits = pdu_bits;
            cfg.validate()?;
            let results = with_jobs(jobs.jobs, || run_campaign(&cfg))?;
            match out {
                Some(path) => emit_results(&results, format, &path),
                None => {
                    print!("{}", render(&results, format));
                    Ok(())
                }
            }
        }
        Command::DumpStages {
            config,
            frame,
            out,
            phy,
        } => {
            let cfg = load_config(&config)?;
            dump_stages(&cfg, phy.unwrap_or(cfg.phy_modes[0]), frame, &out)
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn render(results: &[PerResult], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(results),
        OutputFormat::Json => to_json(results),
    }
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::config("jobs", "must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Param(e.to_string()))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == Some(0) {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    f()
}

fn parse_profile(s: &str) -> Result<ProfileKind> {
    match s.to_ascii_lowercase().as_str() {
        "los" => Ok(ProfileKind::Los),
        "nlos" => Ok(ProfileKind::Nlos),
        "reverb" | "reverberant" => Ok(ProfileKind::Reverberant),
        _ => Err(Error::config(
            "profile",
            format!("unknown profile `{s}` (los, nlos, reverb)"),
        )),
    }
}

fn parse_num(s: &str, field: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::config(field, format!("`{s}` is not a number")))
}

fn parse_list(s: &str, field: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| parse_num(v, field)).collect()
}

/// `a:step:b` inclusive of `b` (to within half a step), or one value.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![parse_num(v, "snr")?]),
        [a, step, b] => {
            let (a, step, b) = (
                parse_num(a, "snr")?,
                parse_num(step, "snr")?,
                parse_num(b, "snr")?,
            );
            if step == 0.0 || (b - a) * step < 0.0 {
                return Err(Error::config(
                    "snr",
                    "step must be non-zero and point from a to b",
                ));
            }
            let n = ((b - a) / step + 0.5).floor() as usize;
            if n > 10_000 {
                return Err(Error::config("snr", "too many points"));
            }
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => Err(Error::config(
            "snr",
            format!("expected a:step:b, got `{s}`"),
        )),
    }
}

fn dump_stages(cfg: &ScenarioConfig, mode: PhyMode, index: u64, out: &Path) -> Result<()> {
    if !cfg.phy_modes.contains(&mode) {
        return Err(Error::config(
            "phy",
            format!("{mode} not in the config's phy_modes"),
        ));
    }
    if index >= cfg.frames as u64 {
        return Err(Error::config(
            "frame",
            format!("index {index} beyond {} frames", cfg.frames),
        ));
    }
    let point = cfg.sweep_points()[0];
    let generated = generate_frame(cfg, mode, point, index)?;
    let mut rx = Receiver::new(receiver_config(cfg, mode, generated.channel))?.capture_stages(true);
    let report = rx.receive(&generated.frame);

    std::fs::create_dir_all(out)?;
    let mut stages = Vec::new();
    for (i, stage) in rx.trace().iter().enumerate() {
        let file = stage.frame.as_ref().map(|f| {
            let name = format!("{i:02}_{}.iq", stage.name);
            iqfile::write(&out.join(&name), f).map(|()| name)
        });
        let file = file.transpose()?;
        stages.push(serde_json::json!({ "stage": stage.name, "file": file }));
    }
    let summary = serde_json::json!({
        "scenario": cfg.name,
        "phy": mode,
        "frame": index,
        "snr_db": point.0,
        "sir_db": point.1,
        "channel": generated.channel.index(),
        "lead_samples": generated.lead_samples,
        "cfo_hz": generated.cfo_hz,
        "detected": report.detected,
        "aa_ok": report.aa_ok,
        "crc_ok": report.crc_ok,
        "cfo_estimate_hz": report.cfo_estimate_hz,
        "timing_offset": report.timing_offset,
        "sync_peak": report.sync_peak,
        "stages": stages,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    std::fs::write(out.join("report.json"), text)?;
    println!("{}", out.display());
    Ok(())
}
