use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cadenza_core::affect::{AffectState, Interpolation, Trajectory};
use cadenza_core::harmony::validate_matrix;
use cadenza_core::render::live::{EventLogSink, MidiSink};
use cadenza_core::render::smf::write_smf;
use cadenza_core::render::{render_offline, FixturePaths, Fixtures, Generator};
use cadenza_control::analysis::{analyze, read_ratings, AnalysisReport, NormalizeMode};
use cadenza_control::server::{serve_live, LiveConfig};
use cadenza_control::stimuli::{generate_stimuli, Manifest, StimulusSpec, MANIFEST_FILE};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cadenza", version, about = "Affect-driven four-voice MIDI generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct FixtureArgs {
    /// Chord progression matrix (TOML).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Alto motive transition matrices (TOML).
    #[arg(long)]
    motives: Option<PathBuf>,
    /// Soprano rhythm lick bank (TOML).
    #[arg(long)]
    licks: Option<PathBuf>,
    /// Register table (TOML).
    #[arg(long)]
    registers: Option<PathBuf>,
}

impl FixtureArgs {
    fn load(&self) -> Result<Fixtures> {
        Ok(Fixtures::load(&FixturePaths {
            matrix: self.matrix.clone(),
            motives: self.motives.clone(),
            licks: self.licks.clone(),
            registers: self.registers.clone(),
        })?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a trajectory (or a fixed affect) to a Standard MIDI File.
    Render {
        /// CSV of `time_seconds,valence,arousal`.
        #[arg(long, conflicts_with_all = ["valence", "arousal"])]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        valence: f64,
        #[arg(long, default_value_t = 0.5)]
        arousal: f64,
        #[arg(long, default_value = "hold")]
        interp: Interpolation,
        #[arg(long, default_value_t = 16)]
        bars: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write every event as JSON lines.
        #[arg(long)]
        event_log: Option<PathBuf>,
        #[command(flatten)]
        fixtures: FixtureArgs,
    },
    /// Generate in real time, steered over a websocket at /live.
    Live {
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: SocketAddr,
        /// Raw MIDI output: a rawmidi device node, FIFO or file.
        #[arg(long)]
        port: Option<PathBuf>,
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Stop after this many bars.
        #[arg(long)]
        bars: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Affect until the first update arrives.
        #[arg(long, default_value_t = 0.5)]
        valence: f64,
        #[arg(long, default_value_t = 0.5)]
        arousal: f64,
        #[command(flatten)]
        fixtures: FixtureArgs,
    },
    /// Render the listening-study stimulus batch plus its manifest.
    Stimuli {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        variants: usize,
        #[command(flatten)]
        fixtures: FixtureArgs,
    },
    /// Regress listener ratings on the settings recorded in a manifest.
    Analyze {
        /// CSV with `participant_id,stimulus_id,rated_valence,rated_arousal`.
        #[arg(long)]
        ratings: PathBuf,
        /// manifest.json from `cadenza stimuli`, or its directory.
        #[arg(long)]
        manifest: PathBuf,
        /// Normalize as r/(max-min) instead of (r-min)/(max-min).
        #[arg(long)]
        literal: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check fixture files against every structural constraint.
    Validate {
        #[command(flatten)]
        fixtures: FixtureArgs,
    },
}

fn affect(v: f64, a: f64) -> Result<AffectState> {
    Ok(AffectState::clamped(v, a)?)
}

fn print_report(r: &AnalysisReport) {
    println!("{} ratings from {} participants ({:?} normalization)", r.ratings, r.participants, r.mode);
    for (name, levels, fit) in [
        ("valence", &r.valence_levels, &r.valence),
        ("arousal", &r.arousal_levels, &r.arousal),
    ] {
        println!("\n{name}: mean rating per setting");
        for (s, m) in levels.settings.iter().zip(&levels.mean_ratings) {
            println!("  {s:.2}  {m:.4}");
        }
        println!(
            "  slope {:.4}  intercept {:.4}  R^2 {:.4}  F({}, {}) = {:.3}",
            fit.slope, fit.intercept, fit.r_squared, fit.df_regression, fit.df_residual, fit.f_statistic
        );
    }
    for (name, m) in [("valence", &r.valence_on_both), ("arousal", &r.arousal_on_both)] {
        println!(
            "\n{name} on both settings: intercept {:.4}  b_v {:.4} (F {:.3})  b_a {:.4} (F {:.3})  R^2 {:.4}  F(2, {}) = {:.3}",
            m.intercept,
            m.valence_coefficient,
            m.valence_f,
            m.arousal_coefficient,
            m.arousal_f,
            m.r_squared,
            m.df_residual,
            m.f_statistic
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Render {
            trajectory,
            valence,
            arousal,
            interp,
            bars,
            seed,
            output,
            event_log,
            fixtures,
        } => {
            let traj = match trajectory {
                Some(path) => {
                    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    Trajectory::parse(file, interp).with_context(|| format!("reading {}", path.display()))?
                }
                None => Trajectory::constant(affect(valence, arousal)?),
            };
            let mut generator = Generator::new(Arc::new(fixtures.load()?), seed);
            let rendering = render_offline(&mut generator, &traj, bars);
            fs::write(&output, write_smf(&rendering.events)).with_context(|| format!("writing {}", output.display()))?;
            if let Some(path) = event_log {
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                let mut sink = EventLogSink::new(BufWriter::new(file));
                for e in &rendering.events {
                    sink.send(e)?;
                }
                sink.into_inner().flush()?;
            }
            let warnings: usize = rendering.plans.iter().map(|p| p.warnings.len()).sum();
            println!(
                "{}: {} bars, {:.2} s, {} events, {} warnings",
                output.display(),
                rendering.plans.len(),
                rendering.duration_seconds,
                rendering.events.len(),
                warnings
            );
        }
        Command::Live {
            listen,
            port,
            event_log,
            bars,
            seed,
            valence,
            arousal,
            fixtures,
        } => {
            let config = LiveConfig {
                fixtures: Arc::new(fixtures.load()?),
                initial: affect(valence, arousal)?,
                midi_out: port,
                event_log,
                max_bars: bars,
                ..LiveConfig::new(listen, seed)
            };
            let runtime = tokio::runtime::Runtime::new()?;
            let report = runtime.block_on(serve_live(config))?;
            println!(
                "stopped ({:?}) after {} bars, {} events; median boundary error {:.3} ms",
                report.stop,
                report.bars.len(),
                report.events_sent,
                report.median_boundary_error().unwrap_or(0.0) * 1e3
            );
        }
        Command::Stimuli {
            out,
            seed,
            variants,
            fixtures,
        } => {
            let spec = StimulusSpec {
                variants_per_point: variants,
                ..StimulusSpec::study(seed)
            };
            let manifest = generate_stimuli(&spec, Arc::new(fixtures.load()?), &out)?;
            println!(
                "{} stimuli in {} (mean duration {:.1} s)",
                manifest.stimuli.len(),
                out.display(),
                manifest.mean_duration()
            );
        }
        Command::Analyze {
            ratings,
            manifest,
            literal,
            json,
        } => {
            let manifest_path = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest };
            let manifest = Manifest::read(&manifest_path)?;
            let file = File::open(&ratings).with_context(|| format!("opening {}", ratings.display()))?;
            let records = read_ratings(file)?;
            let mode = if literal { NormalizeMode::Literal } else { NormalizeMode::Range };
            let report = analyze(&records, &manifest, mode)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_report(&report);
            }
        }
        Command::Validate { fixtures } => {
            let loaded = fixtures.load()?;
            let report = validate_matrix(&loaded.matrix);
            if !report.is_empty() {
                bail!("chord matrix violates {} constraint(s):\n{report}", report.len());
            }
            println!(
                "fixtures ok: chord matrix, motive matrices, lick bank, register table ({} rows)",
                loaded.registers.rows().len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already embed their source; skip repeated causes
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
