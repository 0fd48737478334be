//! `swingtest`: build schedules, simulate sessions, calibrate displays, score
//! recordings and summarise cohorts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use swingtest_core::calibration::{
    fit_luminance_model, read_luminance_samples_file, CalibrationModel,
};
use swingtest_core::cohort::{read_manifest, run_cohort, CohortMetrics, LabeledOutcome};
use swingtest_core::io::{self, read_schedule, read_session, schedule_to_json, write_session};
use swingtest_core::plot::{emit_plot, PlotSpec};
use swingtest_core::protocol::{build_protocol, Eye, Protocol};
use swingtest_core::scoring::{score_session, CaMode, PipelineParams, RapdReport};
use swingtest_core::signal::SignalParams;
use swingtest_core::sim::{simulate_session, PupilModelParams, DEFAULT_REFERENCE_LUMINANCE};

/// Bad flag combinations clap cannot express; reported with the usage exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Relative output paths are resolved against this directory when set.
const OUT_DIR_ENV: &str = "SWINGTEST_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "swingtest",
    version,
    about = "Dichoptic swinging-flashlight test toolkit"
)]
struct Cli {
    /// Random seed for simulation (overridden by `simulate --seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output; repeat for debug detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the illumination schedule as JSON.
    Schedule {
        /// Seconds the light dwells on each eye (the standard protocols use 3 and 2).
        #[arg(long, default_value_t = 3.0)]
        pause: f64,
        /// Calibration model JSON; adds display drive values to each interval.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a recording session and write it as CSV.
    Simulate(Box<SimulateArgs>),
    /// Fit a logarithmic luminance model to `drive,luminance` measurements.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        /// Drive value of the unattenuated stimulus.
        #[arg(long)]
        reference_drive: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one session against its schedule.
    Score {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the regression figure as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score every session in a manifest and report cohort metrics.
    Cohort {
        /// CSV with columns `subject,session_path,label`.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Draw a trace or regression figure.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Report JSON (regression plots).
        #[arg(long, required_if_eq("kind", "regression"))]
        report: Option<PathBuf>,
        /// Session CSV (trace plots).
        #[arg(long, required_if_eq("kind", "trace"))]
        session: Option<PathBuf>,
        /// Schedule JSON (trace plots).
        #[arg(long, required_if_eq("kind", "trace"))]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Trace,
    Regression,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DefectEye {
    None,
    Left,
    Right,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Blink-detection window in samples.
    #[arg(long)]
    blink_window: Option<usize>,
    /// Pupil speed (mm/s) treated as blink artifact.
    #[arg(long)]
    blink_velocity: Option<f64>,
    /// Gaussian smoothing sigma in samples.
    #[arg(long)]
    smooth_sigma: Option<f64>,
    /// Score from the illuminated eye only instead of averaging both pupils.
    #[arg(long)]
    direct_only: bool,
}

impl PipelineArgs {
    fn params(&self) -> PipelineParams {
        let d = SignalParams::default();
        PipelineParams {
            signal: SignalParams {
                blink_window: self.blink_window.unwrap_or(d.blink_window),
                blink_velocity: self.blink_velocity.unwrap_or(d.blink_velocity),
                smooth_sigma: self.smooth_sigma.unwrap_or(d.smooth_sigma),
            },
            ca_mode: if self.direct_only {
                CaMode::DirectOnly
            } else {
                CaMode::Averaged
            },
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// 1 = 3 s pause (95 s), 2 = 2 s pause (65 s).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    protocol: u8,
    #[arg(long, value_enum, default_value_t = DefectEye::None)]
    defect_eye: DefectEye,
    /// Afferent defect in log units.
    #[arg(long, default_value_t = 0.0)]
    defect: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the schedule used for the simulation.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
    /// Calibration model JSON; sets the reference luminance and adds drive
    /// values to `--schedule-out`.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Luminance (cd/m²) of the unattenuated stimulus.
    #[arg(long, conflicts_with = "calibration")]
    reference_luminance: Option<f64>,
    /// Full parameter set as JSON; individual flags override it.
    #[arg(long)]
    params: Option<PathBuf>,

    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    d_min: Option<f64>,
    #[arg(long)]
    half_luminance: Option<f64>,
    #[arg(long)]
    steepness: Option<f64>,
    #[arg(long)]
    tau_constrict: Option<f64>,
    #[arg(long)]
    tau_dilate: Option<f64>,
    #[arg(long)]
    tau_adapt: Option<f64>,
    #[arg(long)]
    adaptation: Option<f64>,
    #[arg(long)]
    latency: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    anisocoria: Option<f64>,
    #[arg(long, conflicts_with = "defect")]
    defect_left: Option<f64>,
    #[arg(long, conflicts_with = "defect")]
    defect_right: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    blink_rate: Option<f64>,
    #[arg(long)]
    blink_duration: Option<f64>,
    #[arg(long)]
    sample_rate: Option<f64>,
}

impl SimulateArgs {
    fn model_params(&self, seed: Option<u64>) -> Result<PupilModelParams> {
        let mut p: PupilModelParams = match &self.params {
            Some(path) => {
                io::read_json(path).with_context(|| format!("reading {}", path.display()))?
            }
            None => PupilModelParams::default(),
        };
        let overrides = [
            (&mut p.d_max, self.d_max),
            (&mut p.d_min, self.d_min),
            (&mut p.half_luminance, self.half_luminance),
            (&mut p.steepness, self.steepness),
            (&mut p.tau_constrict, self.tau_constrict),
            (&mut p.tau_dilate, self.tau_dilate),
            (&mut p.tau_adapt, self.tau_adapt),
            (&mut p.adaptation, self.adaptation),
            (&mut p.latency, self.latency),
            (&mut p.anisocoria, self.anisocoria),
            (&mut p.defect_left, self.defect_left),
            (&mut p.defect_right, self.defect_right),
            (&mut p.noise_sd, self.noise_sd),
            (&mut p.blink_rate, self.blink_rate),
            (&mut p.blink_duration, self.blink_duration),
            (&mut p.sample_rate, self.sample_rate),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        match self.defect_eye {
            DefectEye::None if self.defect != 0.0 => {
                return Err(UsageError(format!(
                    "--defect {} given without --defect-eye left|right",
                    self.defect
                ))
                .into())
            }
            DefectEye::None => {}
            DefectEye::Left => p = p.with_defect(Eye::Left, self.defect),
            DefectEye::Right => p = p.with_defect(Eye::Right, self.defect),
        }
        if let Some(seed) = seed {
            p.rng_seed = seed;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(serde::Serialize)]
struct CohortSummary<'a> {
    #[serde(flatten)]
    metrics: &'a CohortMetrics,
    subjects: &'a [LabeledOutcome],
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json(value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn read_calibration(path: &Path) -> Result<CalibrationModel> {
    io::read_json(path).with_context(|| format!("reading calibration {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Schedule {
            pause,
            calibration,
            out,
        } => {
            let schedule = build_protocol(pause)?;
            let model = calibration.as_deref().map(read_calibration).transpose()?;
            emit(
                out.as_deref(),
                &schedule_to_json(&schedule, model.as_ref())?,
            )
        }
        Command::Simulate(args) => {
            let params = args.model_params(cli.seed)?;
            let protocol = if args.protocol == 1 {
                Protocol::One
            } else {
                Protocol::Two
            };
            let schedule = protocol.schedule();
            let model = args
                .calibration
                .as_deref()
                .map(read_calibration)
                .transpose()?;
            let reference = model
                .as_ref()
                .map(|m| m.reference_luminance)
                .or(args.reference_luminance)
                .unwrap_or(DEFAULT_REFERENCE_LUMINANCE);
            let session = simulate_session(&params, &schedule, reference)?;
            info!(
                "simulated {} samples (defect right {}, left {}, seed {})",
                session.len(),
                params.defect_right,
                params.defect_left,
                params.rng_seed
            );
            if let Some(path) = &args.schedule_out {
                emit(Some(path), &schedule_to_json(&schedule, model.as_ref())?)?;
            }
            match &args.out {
                Some(path) => {
                    let path = resolve_out(path);
                    write_session(&session, &path)
                        .with_context(|| format!("writing {}", path.display()))?;
                    Ok(())
                }
                None => Ok(io::write_session_to(&session, std::io::stdout().lock())?),
            }
        }
        Command::Calibrate {
            input,
            reference_drive,
            out,
        } => {
            let samples = read_luminance_samples_file(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let model = fit_luminance_model(&samples, reference_drive)?;
            if model.pearson_r < 0.99 {
                log::warn!("weak logarithmic fit: r = {:.4}", model.pearson_r);
            }
            emit(out.as_deref(), &json(&model)?)
        }
        Command::Score {
            session,
            schedule,
            report,
            plot,
            pipeline,
        } => {
            let sched = read_schedule(&schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let sess =
                read_session(&session).with_context(|| format!("reading {}", session.display()))?;
            let result = score_session(&sess, &sched, &pipeline.params())?;
            for d in &result.dropped_levels {
                log::warn!("level x = {} dropped: {}", d.x, d.reason);
            }
            info!(
                "final score {:.3} ({})",
                result.final_score, result.classification
            );
            emit(report.as_deref(), &json(&result)?)?;
            if let Some(path) = plot {
                emit(
                    Some(&path),
                    &emit_plot(&PlotSpec::Regression { report: &result })?,
                )?;
            }
            Ok(())
        }
        Command::Cohort {
            manifest,
            schedule,
            out,
            pipeline,
        } => {
            let sched = read_schedule(&schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let file = fs::File::open(&manifest)
                .with_context(|| format!("opening {}", manifest.display()))?;
            let entries =
                read_manifest(file).with_context(|| format!("reading {}", manifest.display()))?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let (outcomes, metrics) = run_cohort(&entries, base, &sched, &pipeline.params())?;
            info!(
                "accuracy {:.4}, sensitivity {:?}, specificity {:?}",
                metrics.accuracy, metrics.sensitivity, metrics.specificity
            );
            let summary = CohortSummary {
                metrics: &metrics,
                subjects: &outcomes,
            };
            emit(out.as_deref(), &json(&summary)?)
        }
        Command::Plot {
            kind,
            report,
            session,
            schedule,
            out,
            pipeline,
        } => {
            let svg = match kind {
                PlotKind::Regression => {
                    let path = report.expect("required by clap");
                    let r: RapdReport = io::read_json(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    emit_plot(&PlotSpec::Regression { report: &r })?
                }
                PlotKind::Trace => {
                    let (session, schedule) =
                        (session.expect("required"), schedule.expect("required"));
                    let sess = read_session(&session)
                        .with_context(|| format!("reading {}", session.display()))?;
                    let sched = read_schedule(&schedule)
                        .with_context(|| format!("reading {}", schedule.display()))?;
                    emit_plot(&PlotSpec::Trace {
                        session: &sess,
                        schedule: &sched,
                        signal: pipeline.params().signal,
                    })?
                }
            };
            emit(Some(&out), &svg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 1 } else { 2 })
        }
    }
}
