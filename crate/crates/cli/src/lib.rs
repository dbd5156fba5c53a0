//! Subcommands of the `shuttlesense` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use shuttlesense::config::Config;
use shuttlesense::court::accumulate_landings;
use shuttlesense::ingest::{Role, ValidationReport};
use shuttlesense::pipeline::{
    analyze_session, load_session, score_session, session_heatmaps, validate_loaded, write_heatmaps, write_stroke_csv,
    SessionAnalysis, SessionData, HEATMAP_DIR,
};
use shuttlesense::reference::{build_envelope, EnvelopeModel};
use shuttlesense::report::{
    assemble_report, compare_sessions, parse_report, render_markdown, render_progress_markdown, to_canonical_json,
    ProgressEntry, ProgressTrack,
};
use shuttlesense::shuttlesim::{generate_fixture_session, FixtureSpec};

pub const CONFIG_ENV: &str = "SHUTTLESENSE_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "shuttlesense", version, about = "Badminton stroke assessment from pose, shuttle and IMU data")]
pub struct Cli {
    /// JSON config layered over the defaults. Falls back to $SHUTTLESENSE_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Md,
    Both,
}

impl Format {
    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    fn md(self) -> bool {
        matches!(self, Format::Md | Format::Both)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a session against the data criteria.
    Validate { manifest: PathBuf },
    /// Build a reference envelope from one or more reference sessions.
    BuildRef {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Envelope file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trainee session against an envelope and write the assessment.
    Analyze {
        manifest: PathBuf,
        #[arg(long)]
        envelope: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long, value_enum, default_value = "both")]
        format: Format,
        /// Also write angles.csv and strokes.csv.
        #[arg(long)]
        dump: bool,
    },
    /// Landing heatmaps over one or more sessions.
    Heatmap {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic session from a fixture spec.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize accuracy across assessment reports, oldest first.
    Progress {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// One per report, comma separated. Defaults to the report order.
        #[arg(long, value_delimiter = ',')]
        timestamps: Option<Vec<String>>,
        /// Directory for progress.json / progress.md; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation failed\n{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

fn data<E: fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file or directory", path.display())))
    }
}

pub fn resolve_config(flag: Option<&Path>) -> Result<Config, CliError> {
    let path = flag
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(p) => {
            require(&p)?;
            Config::from_file(&p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))
        }
        None => Ok(Config::default()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn canonical<S: Serialize>(value: &S) -> Result<String, CliError> {
    to_canonical_json(value).map_err(data)
}

fn load_checked(manifest: &Path, cfg: &Config) -> Result<(SessionData<f64>, ValidationReport), CliError> {
    require(manifest)?;
    let session = load_session::<f64>(manifest, cfg.ingest.confidence_floor).map_err(data)?;
    let report = validate_loaded(&session, cfg);
    if report.has_failures() {
        return Err(CliError::Validation(report.render_text()));
    }
    Ok((session, report))
}

struct Analyzed {
    session: SessionData<f64>,
    analysis: SessionAnalysis<f64>,
    validation: ValidationReport,
}

fn analyze(manifest: &Path, cfg: &Config) -> Result<Analyzed, CliError> {
    let (session, validation) = load_checked(manifest, cfg)?;
    let analysis = analyze_session(&session, cfg).map_err(data)?;
    Ok(Analyzed {
        session,
        analysis,
        validation,
    })
}

/// Runs one subcommand. `Ok` carries text for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = resolve_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Validate { manifest } => {
            require(manifest)?;
            let session = load_session::<f64>(manifest, cfg.ingest.confidence_floor).map_err(data)?;
            let report = validate_loaded(&session, &cfg);
            let text = report.render_text();
            if report.has_failures() {
                Err(CliError::Validation(text))
            } else {
                Ok(text)
            }
        }
        Command::BuildRef { manifests, out } => {
            let mut features = Vec::new();
            let mut notes = String::new();
            for m in manifests {
                let Analyzed { session, analysis, .. } = analyze(m, &cfg)?;
                if session.manifest.role != Role::Reference {
                    notes.push_str(&format!("warning: {} is not a reference session\n", m.display()));
                }
                features.extend(analysis.strokes.into_iter().map(|s| s.features));
            }
            let model = build_envelope(&features, &cfg.reference.envelope_params()).map_err(data)?;
            let mut text = serde_json::to_string_pretty(&model).map_err(data)?;
            text.push('\n');
            write_file(out, &text)?;
            Ok(format!(
                "{notes}{} strokes, {} bands, {} excluded pairs -> {}\n",
                features.len(),
                model.bands.len(),
                model.excluded.len(),
                out.display()
            ))
        }
        Command::Analyze {
            manifest,
            envelope,
            out,
            top_k,
            format,
            dump,
        } => {
            require(envelope)?;
            if let Some(k) = top_k {
                cfg.report.top_k = *k;
            }
            let text = fs::read_to_string(envelope).map_err(|e| data(format!("{}: {e}", envelope.display())))?;
            let model: EnvelopeModel<f64> =
                serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", envelope.display())))?;
            model.check_version().map_err(data)?;

            let Analyzed {
                analysis, validation, ..
            } = analyze(manifest, &cfg)?;
            let (scored, unscored) = score_session(&analysis, &model, cfg.reference.d_norm);
            let maps = session_heatmaps(&analysis, &cfg).map_err(data)?;
            let heat_dir = out.join(HEATMAP_DIR);
            if heat_dir.exists() {
                fs::remove_dir_all(&heat_dir).map_err(|e| data(format!("{}: {e}", heat_dir.display())))?;
            }
            let refs = write_heatmaps(&maps, &cfg, out).map_err(data)?;

            let mut warnings = validation.warnings();
            if analysis.imu_gaps > 0 {
                warnings.push(format!("imu: {} strokes had no IMU samples", analysis.imu_gaps));
            }
            for d in &analysis.dropped {
                warnings.push(format!("stroke {}-{} dropped: {}", d.start_frame, d.end_frame, d.reason));
            }
            let report = assemble_report(&analysis, &scored, &unscored, refs, maps.skipped, warnings, &cfg);
            if format.json() {
                write_file(&out.join("report.json"), &canonical(&report)?)?;
            }
            if format.md() {
                write_file(&out.join("report.md"), &render_markdown(&report))?;
            }
            if *dump {
                let mut buf = Vec::new();
                shuttlesense::kinematics::write_angle_csv(&mut buf, &analysis.frame_indices, &analysis.angles)
                    .map_err(data)?;
                write_file(&out.join("angles.csv"), &String::from_utf8_lossy(&buf))?;
                let mut buf = Vec::new();
                write_stroke_csv(&mut buf, &analysis).map_err(data)?;
                write_file(&out.join("strokes.csv"), &String::from_utf8_lossy(&buf))?;
            }
            Ok(format!(
                "{}: {} strokes, accuracy {} -> {}\n",
                report.session_id,
                report.strokes.len(),
                report.accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{a:.2}")),
                out.display()
            ))
        }
        Command::Heatmap { manifests, out } => {
            let mut obs = Vec::new();
            for m in manifests {
                let analysis = analyze(m, &cfg)?.analysis;
                obs.extend(analysis.strokes.iter().map(|s| s.landing));
            }
            let maps = accumulate_landings(&obs, &cfg.court.geometry(), &cfg.court.grid(), &cfg.court.heatmap())
                .map_err(data)?;
            let heat_dir = out.join(HEATMAP_DIR);
            if heat_dir.exists() {
                fs::remove_dir_all(&heat_dir).map_err(|e| data(format!("{}: {e}", heat_dir.display())))?;
            }
            let refs = write_heatmaps(&maps, &cfg, out).map_err(data)?;
            write_file(&out.join("heatmaps.json"), &canonical(&refs)?)?;
            Ok(format!("{} heatmaps, {} strokes skipped -> {}\n", refs.len(), maps.skipped, out.display()))
        }
        Command::Simulate { spec, out, seed } => {
            require(spec)?;
            let text = fs::read_to_string(spec).map_err(|e| data(format!("{}: {e}", spec.display())))?;
            let mut spec: FixtureSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("fixture spec: {e}")))?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let truth = generate_fixture_session(&spec, out).map_err(data)?;
            Ok(format!(
                "{} strokes over {} frames -> {}\n",
                truth.strokes.len(),
                truth.frame_count,
                out.display()
            ))
        }
        Command::Progress {
            reports,
            timestamps,
            out,
            format,
        } => {
            if let Some(ts) = timestamps {
                if ts.len() != reports.len() {
                    return Err(CliError::Usage(format!(
                        "{} timestamps for {} reports",
                        ts.len(),
                        reports.len()
                    )));
                }
            }
            let mut entries = Vec::new();
            for (i, p) in reports.iter().enumerate() {
                require(p)?;
                let text = fs::read_to_string(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
                let report = parse_report(&text).map_err(|e| data(format!("{}: {e}", p.display())))?;
                let ts = timestamps.as_ref().map_or_else(|| format!("{i:04}"), |t| t[i].clone());
                entries.push(ProgressEntry::from_report(&report, ts).map_err(data)?);
            }
            let summary = compare_sessions(&ProgressTrack { entries }).map_err(data)?;
            match out {
                Some(dir) => {
                    if format.json() {
                        write_file(&dir.join("progress.json"), &canonical(&summary)?)?;
                    }
                    if format.md() {
                        write_file(&dir.join("progress.md"), &render_progress_markdown(&summary))?;
                    }
                    Ok(format!("progress over {} sessions -> {}\n", summary.entries.len(), dir.display()))
                }
                None => match format {
                    Format::Json => canonical(&summary),
                    _ => Ok(render_progress_markdown(&summary)),
                },
            }
        }
    }
}
