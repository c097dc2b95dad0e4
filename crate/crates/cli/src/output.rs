//! Text artifacts: event and command logs, plot series, analysis reports and
//! ground-truth sidecars.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use equilivest::pipeline::PipelineReport;
use equilivest::simulator::GroundTruth;
use equilivest::{Error, GaitEvent, GaitEventKind, ImuSample, TimedCommand};
use serde::{Deserialize, Serialize};

pub const EVENTS_HEADER: &str = "t_ms,kind,value";
pub const COMMANDS_HEADER: &str = "t_ms,frequency_hz,intensity,duration_ms";
pub const SERIES_HEADER: &str = "t_ms,roll,pitch,yaw,gx,gz";

/// Opens `path` for writing, or stdout when `path` is `None` or `-`.
pub fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(BufWriter::new(File::create(p)?))),
        _ => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

pub fn write_events(mut out: impl Write, events: &[GaitEvent]) -> io::Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(out, "{e}")?;
    }
    out.flush()
}

pub fn write_commands(mut out: impl Write, commands: &[TimedCommand]) -> io::Result<()> {
    writeln!(out, "{COMMANDS_HEADER}")?;
    for c in commands {
        writeln!(out, "{c}")?;
    }
    out.flush()
}

/// Per-sample orientation next to the raw gyro channels the step detector
/// sees.
pub fn write_series(mut out: impl Write, samples: &[ImuSample], report: &PipelineReport) -> io::Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for (s, o) in samples.iter().zip(&report.orientations) {
        writeln!(out, "{},{:.4},{:.4},{:.4},{},{}", s.t_ms, o.roll_deg, o.pitch_deg, o.yaw_deg, s.gyro.x, s.gyro.z)?;
    }
    out.flush()
}

pub fn write_report(mut out: impl Write, samples: &[ImuSample], report: &PipelineReport) -> io::Result<()> {
    let duration = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => b.t_ms - a.t_ms,
        _ => 0,
    };
    writeln!(out, "samples = {}", report.samples_processed)?;
    writeln!(out, "duration_ms = {duration}")?;
    writeln!(out, "steps = {}", report.count(GaitEventKind::StepDetected))?;
    writeln!(out, "cadence_sps = {:.3}", report.mean_cadence())?;
    writeln!(out, "breakpoints = {}", report.count(GaitEventKind::BreakpointCrossed))?;
    writeln!(out, "falls = {}", report.count(GaitEventKind::FallDetected))?;
    writeln!(out, "commands = {}", report.commands.len())?;
    if let Some(max) = report.risk.iter().map(|r| r.1).reduce(f64::max) {
        writeln!(out, "risk_max = {max:.4}")?;
    }
    writeln!(out)?;
    writeln!(out, "[events]")?;
    write_events(&mut out, &report.events)
}

/// Sidecar written next to a simulated recording; `train` reads the onset
/// annotation from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub scenario: String,
    pub seed: u64,
    #[serde(flatten)]
    pub truth: GroundTruth,
}

pub fn truth_path(recording: &Path) -> PathBuf {
    let mut s = recording.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

impl TruthFile {
    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let text = toml::to_string(self).map_err(|e| Error::Annotation(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Annotation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Annotation(format!("{}: {}", path.display(), e.message())))
    }
}
