//! Shared vocabulary for every pipeline stage.
//!
//! Body frame: X points to the subject's left (medio-lateral), Y points up
//! (vertical) and Z points forward (anterior). At quiet stance the
//! accelerometer reads `(0, +1, 0)` g. Pitch is rotation about X (sagittal
//! plane, forward lean positive), roll is rotation about Z (coronal plane)
//! and yaw is rotation about Y (horizontal plane).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accelerometer full-scale bound of the MPU-6050, in g.
pub const ACCEL_LIMIT_G: f32 = 16.0;
/// Gyroscope full-scale bound of the MPU-6050, in °/s.
pub const GYRO_LIMIT_DPS: f32 = 2000.0;

/// Wraps an angle in degrees into `(-180, 180]`.
///
/// Angles already inside the interval are returned unchanged, bit for bit.
pub fn wrap_angle(angle_deg: f64) -> Result<f64> {
    if !angle_deg.is_finite() {
        return Err(Error::InvalidArgument(format!("angle {angle_deg} is not finite")));
    }
    Ok(wrap_finite(angle_deg))
}

pub(crate) fn wrap_finite(angle_deg: f64) -> f64 {
    if angle_deg > -180.0 && angle_deg <= 180.0 {
        return angle_deg;
    }
    let r = angle_deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// A three-component vector in body coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        let [x, y, z] = self.to_array().map(f64::from);
        (x * x + y * y + z * z).sqrt()
    }

    fn within(self, limit: f32) -> bool {
        self.to_array().iter().all(|c| c.is_finite() && c.abs() <= limit)
    }
}

/// One timestamped accelerometer (g) and gyroscope (°/s) reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub seq: u32,
    pub t_ms: u64,
    pub accel: Vec3,
    pub gyro: Vec3,
}

impl ImuSample {
    pub fn new(seq: u32, t_ms: u64, accel: Vec3, gyro: Vec3) -> Self {
        Self { seq, t_ms, accel, gyro }
    }

    /// Checks the sensor full-scale bounds.
    pub fn validate(&self) -> Result<()> {
        if !self.accel.within(ACCEL_LIMIT_G) {
            return Err(Error::InvalidArgument(format!("accel {:?} outside ±{ACCEL_LIMIT_G} g", self.accel)));
        }
        if !self.gyro.within(GYRO_LIMIT_DPS) {
            return Err(Error::InvalidArgument(format!("gyro {:?} outside ±{GYRO_LIMIT_DPS} °/s", self.gyro)));
        }
        Ok(())
    }
}

/// Roll/pitch/yaw estimate, in degrees, each wrapped to `(-180, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrientationState {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub t_ms: u64,
}

impl OrientationState {
    pub fn new(roll_deg: f64, pitch_deg: f64, yaw_deg: f64, t_ms: u64) -> Self {
        Self { roll_deg, pitch_deg, yaw_deg, t_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaitEventKind {
    StepDetected,
    BreakpointCrossed,
    FallDetected,
}

impl GaitEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GaitEventKind::StepDetected => "step",
            GaitEventKind::BreakpointCrossed => "breakpoint",
            GaitEventKind::FallDetected => "fall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "step" => Some(GaitEventKind::StepDetected),
            "breakpoint" => Some(GaitEventKind::BreakpointCrossed),
            "fall" => Some(GaitEventKind::FallDetected),
            _ => None,
        }
    }
}

impl fmt::Display for GaitEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A discrete detection.
///
/// `value` is the smoothed step peak magnitude (°/s) for steps, the pitch at
/// the crossing for breakpoints, and the peak pitch for falls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub kind: GaitEventKind,
    pub t_ms: u64,
    pub value: f64,
}

impl GaitEvent {
    pub fn new(kind: GaitEventKind, t_ms: u64, value: f64) -> Self {
        Self { kind, t_ms, value }
    }
}

impl fmt::Display for GaitEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.t_ms, self.kind, self.value)
    }
}

/// A vibrotactile actuation request. `frequency_hz == 0` means off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorCommand {
    pub frequency_hz: f64,
    pub intensity: f64,
    pub duration_ms: f64,
}

impl MotorCommand {
    pub const OFF: MotorCommand = MotorCommand { frequency_hz: 0.0, intensity: 0.0, duration_ms: 0.0 };

    pub fn is_off(&self) -> bool {
        self.frequency_hz == 0.0
    }

    pub fn validate(&self, f_max_hz: f64) -> Result<()> {
        let ok = self.frequency_hz >= 0.0
            && self.frequency_hz <= f_max_hz
            && (0.0..=1.0).contains(&self.intensity)
            && (self.frequency_hz == 0.0 || self.duration_ms > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("motor command {self:?} violates bounds")))
        }
    }
}

/// A motor command pinned to the time it takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub t_ms: f64,
    pub command: MotorCommand,
}

impl fmt::Display for TimedCommand {
    /// `t_ms,frequency_hz,intensity,duration_ms`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.command;
        write!(f, "{},{},{},{}", self.t_ms, c.frequency_hz, c.intensity, c.duration_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetadata {
    pub session_id: String,
    /// Wall-clock start, milliseconds since the Unix epoch.
    pub started_unix_ms: u64,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionRecording {
    pub metadata: SessionMetadata,
    pub samples: Vec<ImuSample>,
    pub events: Vec<GaitEvent>,
    pub commands: Vec<TimedCommand>,
}

impl SessionRecording {
    pub fn new(metadata: SessionMetadata, samples: Vec<ImuSample>) -> Self {
        Self { metadata, samples, ..Default::default() }
    }

    /// Checks ordering: samples by time, strictly increasing sequence
    /// numbers, and time-ordered events and commands.
    pub fn validate(&self) -> Result<()> {
        check_order(&self.samples)?;
        for (i, w) in self.samples.windows(2).enumerate() {
            if w[1].seq <= w[0].seq {
                return Err(Error::InvalidArgument(format!(
                    "sequence number {} at index {} does not increase",
                    w[1].seq,
                    i + 1
                )));
            }
        }
        if self.events.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
            return Err(Error::InvalidArgument("events are not time-ordered".into()));
        }
        if self.commands.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
            return Err(Error::InvalidArgument("commands are not time-ordered".into()));
        }
        Ok(())
    }
}

/// Returns an order error naming the first index whose timestamp goes
/// backwards.
pub fn check_order(samples: &[ImuSample]) -> Result<()> {
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].t_ms < w[0].t_ms {
            return Err(Error::StreamOrder { index: i + 1, t_ms: w[1].t_ms, previous_ms: w[0].t_ms });
        }
    }
    Ok(())
}
