//! Text recording format: one header line, then one line per sample,
//! `seq,t_ms,ax,ay,az,gx,gy,gz[,roll,pitch,yaw]`. Floats use the shortest
//! representation that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::types::{ImuSample, OrientationState, SessionMetadata, SessionRecording, Vec3};

pub const HEADER: &str = "seq,t_ms,ax,ay,az,gx,gy,gz";
pub const HEADER_WITH_ORIENTATION: &str = "seq,t_ms,ax,ay,az,gx,gy,gz,roll,pitch,yaw";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordedSample {
    pub sample: ImuSample,
    /// Device-side angles, when the line carried them.
    pub orientation: Option<OrientationState>,
}

impl From<ImuSample> for RecordedSample {
    fn from(sample: ImuSample) -> Self {
        Self { sample, orientation: None }
    }
}

/// Append-only writer for the recording format.
pub struct RecordingWriter<W: Write> {
    out: W,
    last: Option<(u32, u64)>,
}

impl RecordingWriter<BufWriter<File>> {
    pub fn create(path: &Path, with_orientation: bool) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), with_orientation)
    }
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut out: W, with_orientation: bool) -> Result<Self> {
        writeln!(out, "{}", if with_orientation { HEADER_WITH_ORIENTATION } else { HEADER })?;
        Ok(Self { out, last: None })
    }

    pub fn append(&mut self, sample: &ImuSample, orientation: Option<&OrientationState>) -> Result<()> {
        if let Some((seq, t_ms)) = self.last {
            if sample.t_ms < t_ms || sample.seq <= seq {
                return Err(Error::InvalidArgument(format!(
                    "sample seq {} at {} ms does not follow seq {seq} at {t_ms} ms",
                    sample.seq, sample.t_ms
                )));
            }
        }
        self.last = Some((sample.seq, sample.t_ms));
        let a = sample.accel;
        let g = sample.gyro;
        write!(self.out, "{},{},{},{},{},{},{},{}", sample.seq, sample.t_ms, a.x, a.y, a.z, g.x, g.y, g.z)?;
        if let Some(o) = orientation {
            write!(self.out, ",{},{},{}", o.roll_deg, o.pitch_deg, o.yaw_deg)?;
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_recording<W: Write>(out: W, samples: &[RecordedSample]) -> Result<W> {
    let with_orientation = samples.iter().any(|r| r.orientation.is_some());
    let mut w = RecordingWriter::new(out, with_orientation)?;
    for r in samples {
        w.append(&r.sample, r.orientation.as_ref())?;
    }
    w.finish()
}

/// Writes `samples` to `path` and returns the in-memory session.
pub fn record_session(samples: &[ImuSample], path: &Path, metadata: SessionMetadata) -> Result<SessionRecording> {
    let mut w = RecordingWriter::create(path, false)?;
    for s in samples {
        w.append(s, None)?;
    }
    w.finish()?;
    Ok(SessionRecording::new(metadata, samples.to_vec()))
}

fn field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse { line, reason: format!("invalid {name} `{raw}`") })
}

/// Parses a recording. Line numbers in errors are 1-based and count the
/// header.
pub fn read_recording<R: Read>(input: R) -> Result<Vec<RecordedSample>> {
    let mut out: Vec<RecordedSample> = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if i == 0 {
            let header = line.trim();
            if header != HEADER && header != HEADER_WITH_ORIENTATION {
                return Err(Error::Parse { line: 1, reason: format!("unexpected header `{header}`") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 && cols.len() != 11 {
            return Err(Error::Parse { line: line_no, reason: format!("expected 8 or 11 fields, got {}", cols.len()) });
        }
        let seq: u32 = field(cols[0], "seq", line_no)?;
        let t_ms: u64 = field(cols[1], "t_ms", line_no)?;
        let mut f = [0f32; 6];
        for (k, name) in ["ax", "ay", "az", "gx", "gy", "gz"].iter().enumerate() {
            f[k] = field(cols[2 + k], name, line_no)?;
        }
        let sample = ImuSample::new(seq, t_ms, Vec3::new(f[0], f[1], f[2]), Vec3::new(f[3], f[4], f[5]));
        let orientation = if cols.len() == 11 {
            Some(OrientationState::new(
                field(cols[8], "roll", line_no)?,
                field(cols[9], "pitch", line_no)?,
                field(cols[10], "yaw", line_no)?,
                t_ms,
            ))
        } else {
            None
        };
        if let Some(prev) = out.last() {
            if t_ms < prev.sample.t_ms {
                return Err(Error::StreamOrder { index: out.len(), t_ms, previous_ms: prev.sample.t_ms });
            }
            if seq <= prev.sample.seq {
                return Err(Error::Parse { line: line_no, reason: format!("sequence number {seq} does not increase") });
            }
        }
        out.push(RecordedSample { sample, orientation });
    }
    Ok(out)
}

pub fn read_recording_file(path: &Path) -> Result<Vec<RecordedSample>> {
    read_recording(File::open(path)?)
}

/// Paced iterator over a parsed recording.
pub struct Replay {
    samples: std::vec::IntoIter<RecordedSample>,
    rate: f64,
    origin: Option<(Instant, u64)>,
}

impl Iterator for Replay {
    type Item = RecordedSample;

    fn next(&mut self) -> Option<RecordedSample> {
        let next = self.samples.next()?;
        if self.rate > 0.0 {
            let (start, t0) = *self.origin.get_or_insert((Instant::now(), next.sample.t_ms));
            let due = Duration::from_secs_f64((next.sample.t_ms - t0) as f64 / 1000.0 / self.rate);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
        Some(next)
    }
}

/// Opens a recording for replay at `rate` times real time; `0` replays as
/// fast as possible. The file is parsed up front so format errors surface
/// here rather than mid-stream.
pub fn replay_session(path: &Path, rate: f64) -> Result<Replay> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("replay rate {rate} must be >= 0")));
    }
    let samples = read_recording_file(path)?;
    Ok(Replay { samples: samples.into_iter(), rate, origin: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(seq: u32, t_ms: u64) -> ImuSample {
        ImuSample::new(seq, t_ms, Vec3::new(0.1, 0.99, -0.0), Vec3::new(1.0e-7, -3.5, 250.125))
    }

    fn parse(text: &str) -> Result<Vec<RecordedSample>> {
        read_recording(text.as_bytes())
    }

    #[test]
    fn empty_and_header_only() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("seq,t_ms,ax,ay,az,gx,gy,gz\n").unwrap().is_empty());
    }

    #[test]
    fn round_trip_bits() {
        let rows: Vec<RecordedSample> = (0..5).map(|i| s(i, u64::from(i) * 10).into()).collect();
        let bytes = write_recording(Vec::new(), &rows).unwrap();
        let back = read_recording(bytes.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert!(back[0].sample.accel.z.is_sign_negative());
        assert_eq!(write_recording(Vec::new(), &back).unwrap(), bytes);
    }

    #[test]
    fn orientation_columns() {
        let rows = vec![
            RecordedSample {
                sample: s(0, 0),
                orientation: Some(OrientationState::new(0.5, f64::from(10.98f32), -3.0, 0)),
            },
            RecordedSample { sample: s(1, 10), orientation: None },
        ];
        let bytes = write_recording(Vec::new(), &rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(HEADER_WITH_ORIENTATION));
        let back = read_recording(bytes.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse("seq,t_ms,ax,ay,az,gx,gy,gz\n0,0,0,1,0,0,0,0\n1,10,0,abc,0,0,0,0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("t,x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("seq,t_ms,ax,ay,az,gx,gy,gz\n0,0,0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn order_errors() {
        let text = "seq,t_ms,ax,ay,az,gx,gy,gz\n0,20,0,1,0,0,0,0\n1,10,0,1,0,0,0,0\n";
        assert!(matches!(parse(text), Err(Error::StreamOrder { index: 1, .. })));
        let text = "seq,t_ms,ax,ay,az,gx,gy,gz\n4,0,0,1,0,0,0,0\n4,10,0,1,0,0,0,0\n";
        assert!(matches!(parse(text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.csv");
        let samples: Vec<_> = (0..20).map(|i| s(i, u64::from(i) * 10)).collect();
        let rec = record_session(&samples, &path, SessionMetadata::default()).unwrap();
        assert_eq!(rec.samples, samples);
        let replayed: Vec<_> = replay_session(&path, 0.0).unwrap().map(|r| r.sample).collect();
        assert_eq!(replayed, samples);
        assert!(replay_session(&path, -1.0).is_err());
    }

    #[test]
    fn paced_replay_takes_real_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("paced.csv");
        let samples: Vec<_> = (0..11).map(|i| s(i, u64::from(i) * 10)).collect();
        record_session(&samples, &path, SessionMetadata::default()).unwrap();
        let start = Instant::now();
        assert_eq!(replay_session(&path, 2.0).unwrap().count(), 11);
        assert!(start.elapsed() >= Duration::from_millis(45));
    }

    #[test]
    fn writer_rejects_out_of_order() {
        let mut w = RecordingWriter::new(Vec::new(), false).unwrap();
        w.append(&s(1, 10), None).unwrap();
        assert!(w.append(&s(1, 20), None).is_err());
        assert!(w.append(&s(2, 5), None).is_err());
    }
}
