//! Synthetic IMU streams with known ground truth for the three desk-scale
//! experiments: lean until falling, a ten-meter walk, and a walk that ends in
//! a fall.
//!
//! Gait is modelled as one raised-cosine angular-rate burst per step on the
//! pitch (X) and roll (Z) channels, alternating in sign so the trunk sways
//! back and forth without drifting. The accelerometer always points along
//! the true gravity direction, scaled by a small vertical bounce, so filter
//! output can be compared against exact kinematics.

mod rng;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ImuSample, Vec3};

pub use rng::{splitmix64, XorShift64Star};

/// Roll-channel amplitude relative to the configured stride amplitude is 1;
/// the pitch channel carries this fraction of it.
pub const PITCH_SWAY_FRACTION: f64 = 0.5;
/// Burst width as a fraction of the step period.
pub const BURST_WIDTH_FRACTION: f64 = 0.6;
/// Peak relative change of the gravity magnitude during a step.
pub const BOUNCE_FRACTION: f64 = 0.08;
/// Pitch reached at the end of a collapse (lying face down).
pub const FALLEN_PITCH_DEG: f64 = 90.0;

/// Noise standard deviation per channel: `ax ay az` in g, `gx gy gz` in °/s.
pub type ChannelNoise = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitScenario {
    pub cadence_sps: f64,
    /// Peak angular rate of a step burst, °/s.
    pub stride_rate_amplitude: f64,
    pub duration_ms: u64,
    pub noise_std: ChannelNoise,
    pub rate_hz: f64,
}

impl Default for GaitScenario {
    fn default() -> Self {
        Self { cadence_sps: 1.4, stride_rate_amplitude: 40.0, duration_ms: 5000, noise_std: [0.0; 6], rate_hz: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeanFallScenario {
    pub lean_rate_dps: f64,
    pub theta_fall_deg: f64,
    pub collapse_duration_ms: u64,
    pub duration_ms: u64,
    pub noise_std: ChannelNoise,
    pub rate_hz: f64,
}

impl Default for LeanFallScenario {
    fn default() -> Self {
        Self {
            lean_rate_dps: 5.0,
            theta_fall_deg: 20.0,
            collapse_duration_ms: 600,
            duration_ms: 6000,
            noise_std: [0.0; 6],
            rate_hz: 100.0,
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config { field, reason: format!("{v} must be positive") })
    }
}

fn check_noise(noise: &ChannelNoise) -> Result<()> {
    if noise.iter().all(|n| *n >= 0.0 && n.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config { field: "noise_std", reason: format!("{noise:?} must be non-negative") })
    }
}

impl GaitScenario {
    pub fn validate(&self) -> Result<()> {
        positive("cadence_sps", self.cadence_sps)?;
        positive("stride_rate_amplitude", self.stride_rate_amplitude)?;
        positive("duration_ms", self.duration_ms as f64)?;
        positive("rate_hz", self.rate_hz)?;
        check_noise(&self.noise_std)
    }

    pub fn step_count(&self) -> usize {
        (self.cadence_sps * self.duration_ms as f64 / 1000.0 + 1e-9).floor() as usize
    }

    fn period_s(&self) -> f64 {
        1.0 / self.cadence_sps
    }

    fn width_s(&self) -> f64 {
        BURST_WIDTH_FRACTION * self.period_s()
    }

    /// Pitch change contributed by a full burst.
    fn pitch_swing(&self) -> f64 {
        PITCH_SWAY_FRACTION * self.stride_rate_amplitude * self.width_s() / 2.0
    }

    fn roll_swing(&self) -> f64 {
        self.stride_rate_amplitude * self.width_s() / 2.0
    }

    /// Step `k` peaks at `(k + 0.5) / cadence`, in ms.
    pub fn step_times_ms(&self) -> Vec<f64> {
        (0..self.step_count()).map(|k| (k as f64 + 0.5) * self.period_s() * 1000.0).collect()
    }

    fn kinematics(&self, t_s: f64) -> Kinematics {
        let period = self.period_s();
        let width = self.width_s();
        let mut kin = Kinematics {
            pitch_deg: -self.pitch_swing() / 2.0,
            roll_deg: -self.roll_swing() / 2.0,
            ..Default::default()
        };
        let n = self.step_count();
        // completed bursts leave the angle alternating between -swing/2 and +swing/2
        let mut sign = 1.0;
        for k in 0..n {
            let center = (k as f64 + 0.5) * period;
            let tau = t_s - center;
            if tau >= width / 2.0 {
                kin.pitch_deg += sign * self.pitch_swing();
                kin.roll_deg += sign * self.roll_swing();
            } else if tau > -width / 2.0 {
                let shape = 0.5 * (1.0 + (TAU * tau / width).cos());
                let area = 0.5 * (tau + width / 2.0) + width / (4.0 * PI) * (TAU * tau / width).sin();
                let a = self.stride_rate_amplitude;
                kin.roll_rate_dps = sign * a * shape;
                kin.pitch_rate_dps = sign * PITCH_SWAY_FRACTION * a * shape;
                kin.roll_deg += sign * a * area;
                kin.pitch_deg += sign * PITCH_SWAY_FRACTION * a * area;
                kin.bounce = BOUNCE_FRACTION * shape;
                break;
            } else {
                break;
            }
            sign = -sign;
        }
        kin
    }
}

impl LeanFallScenario {
    pub fn validate(&self) -> Result<()> {
        positive("lean_rate_dps", self.lean_rate_dps)?;
        positive("theta_fall_deg", self.theta_fall_deg)?;
        positive("collapse_duration_ms", self.collapse_duration_ms as f64)?;
        positive("duration_ms", self.duration_ms as f64)?;
        positive("rate_hz", self.rate_hz)?;
        if self.theta_fall_deg >= FALLEN_PITCH_DEG {
            return Err(Error::Config {
                field: "theta_fall_deg",
                reason: format!("{} must be below {FALLEN_PITCH_DEG}", self.theta_fall_deg),
            });
        }
        check_noise(&self.noise_std)
    }

    /// Seconds from the start of the lean at `start_pitch` to the
    /// instability angle.
    fn crossing_s(&self, start_pitch: f64) -> f64 {
        ((self.theta_fall_deg - start_pitch) / self.lean_rate_dps).max(0.0)
    }

    fn kinematics(&self, t_s: f64, start_pitch: f64, start_roll: f64) -> Kinematics {
        let cross = self.crossing_s(start_pitch);
        let collapse = self.collapse_duration_ms as f64 / 1000.0;
        let rate = self.lean_rate_dps;
        // quadratic runaway continuing the lean rate and ending on the mattress
        let accel = ((FALLEN_PITCH_DEG - self.theta_fall_deg - rate * collapse) / (collapse * collapse)).max(0.0);
        let (pitch, pitch_rate) = if t_s <= cross {
            (start_pitch + rate * t_s, rate)
        } else if t_s <= cross + collapse {
            let tau = t_s - cross;
            (self.theta_fall_deg + rate * tau + accel * tau * tau, rate + 2.0 * accel * tau)
        } else {
            (self.theta_fall_deg + rate * collapse + accel * collapse * collapse, 0.0)
        };
        Kinematics { pitch_deg: pitch, roll_deg: start_roll, pitch_rate_dps: pitch_rate, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Kinematics {
    pitch_deg: f64,
    roll_deg: f64,
    pitch_rate_dps: f64,
    roll_rate_dps: f64,
    bounce: f64,
}

/// What actually happened in a generated stream. Absent quantities are
/// empty or `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub step_times_ms: Vec<f64>,
    /// Start of the unrecoverable collapse; coincides with the instability
    /// crossing.
    pub fall_onset_ms: Option<f64>,
    /// Time the pitch reaches the scenario's instability angle.
    pub instability_ms: Option<f64>,
    /// End of the collapse.
    pub impact_ms: Option<f64>,
}

/// Exact pitch of the generating kinematics, for checks against filter
/// output.
pub trait PitchTruth {
    fn true_pitch_deg(&self, t_ms: f64) -> f64;
}

/// A generated stream plus the kinematics that produced it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub samples: Vec<ImuSample>,
    pub truth: GroundTruth,
    kind: SegmentPlan,
}

impl PitchTruth for Simulation {
    fn true_pitch_deg(&self, t_ms: f64) -> f64 {
        self.kind.at(t_ms / 1000.0).pitch_deg
    }
}

#[derive(Debug, Clone)]
enum SegmentPlan {
    Gait(GaitScenario),
    Lean(LeanFallScenario),
    WalkThenFall { gait: GaitScenario, fall: LeanFallScenario, start_pitch: f64, start_roll: f64 },
}

impl SegmentPlan {
    fn at(&self, t_s: f64) -> Kinematics {
        match self {
            SegmentPlan::Gait(g) => g.kinematics(t_s),
            SegmentPlan::Lean(f) => f.kinematics(t_s, 0.0, 0.0),
            SegmentPlan::WalkThenFall { gait, fall, start_pitch, start_roll } => {
                let walk_s = gait.duration_ms as f64 / 1000.0;
                if t_s <= walk_s {
                    gait.kinematics(t_s)
                } else {
                    fall.kinematics(t_s - walk_s, *start_pitch, *start_roll)
                }
            }
        }
    }
}

/// Sample `k` sits at `round(k * 1000 / rate_hz)` ms.
pub fn grid_time_ms(k: u64, rate_hz: f64) -> u64 {
    (k as f64 * 1000.0 / rate_hz).round() as u64
}

fn sample_plan(plan: &SegmentPlan, rate_hz: f64, duration_ms: u64, noise: &ChannelNoise, seed: u64) -> Vec<ImuSample> {
    let mut rng = XorShift64Star::new(seed);
    let mut out = Vec::new();
    for k in 0.. {
        let t_ms = grid_time_ms(k, rate_hz);
        if t_ms > duration_ms {
            break;
        }
        let kin = plan.at(t_ms as f64 / 1000.0);
        let (pitch, roll) = (kin.pitch_deg.to_radians(), kin.roll_deg.to_radians());
        let g = 1.0 + kin.bounce;
        let clean = [
            -g * pitch.cos() * roll.sin(),
            g * pitch.cos() * roll.cos(),
            g * pitch.sin(),
            kin.pitch_rate_dps,
            0.0,
            kin.roll_rate_dps,
        ];
        let mut ch = [0f32; 6];
        for i in 0..6 {
            ch[i] = (clean[i] + rng.gaussian(noise[i])) as f32;
        }
        out.push(ImuSample::new(k as u32, t_ms, Vec3::new(ch[0], ch[1], ch[2]), Vec3::new(ch[3], ch[4], ch[5])));
    }
    out
}

pub fn gen_gait(scenario: &GaitScenario, seed: u64) -> Result<Simulation> {
    scenario.validate()?;
    let plan = SegmentPlan::Gait(*scenario);
    let samples = sample_plan(&plan, scenario.rate_hz, scenario.duration_ms, &scenario.noise_std, seed);
    let truth = GroundTruth { step_times_ms: scenario.step_times_ms(), ..Default::default() };
    Ok(Simulation { samples, truth, kind: plan })
}

fn fall_truth(fall: &LeanFallScenario, offset_ms: f64, start_pitch: f64, total_ms: u64) -> GroundTruth {
    let cross_ms = offset_ms + fall.crossing_s(start_pitch) * 1000.0;
    if cross_ms > total_ms as f64 {
        return GroundTruth::default();
    }
    GroundTruth {
        fall_onset_ms: Some(cross_ms),
        instability_ms: Some(cross_ms),
        impact_ms: Some(cross_ms + fall.collapse_duration_ms as f64),
        ..Default::default()
    }
}

pub fn gen_lean_fall(scenario: &LeanFallScenario, seed: u64) -> Result<Simulation> {
    scenario.validate()?;
    let plan = SegmentPlan::Lean(*scenario);
    let samples = sample_plan(&plan, scenario.rate_hz, scenario.duration_ms, &scenario.noise_std, seed);
    let truth = fall_truth(scenario, 0.0, 0.0, scenario.duration_ms);
    Ok(Simulation { samples, truth, kind: plan })
}

/// A walk immediately followed by a lean and fall. The lean starts from the
/// trunk attitude at the end of the walk. Sampling rate and noise come from
/// the gait scenario.
pub fn gen_walk_then_fall(gait: &GaitScenario, fall: &LeanFallScenario, seed: u64) -> Result<Simulation> {
    gait.validate()?;
    fall.validate()?;
    let walk_s = gait.duration_ms as f64 / 1000.0;
    let end = gait.kinematics(walk_s);
    if end.pitch_deg >= fall.theta_fall_deg {
        return Err(Error::Config { field: "theta_fall_deg", reason: "below the pitch reached while walking".into() });
    }
    let plan =
        SegmentPlan::WalkThenFall { gait: *gait, fall: *fall, start_pitch: end.pitch_deg, start_roll: end.roll_deg };
    let total_ms = gait.duration_ms + fall.duration_ms;
    let samples = sample_plan(&plan, gait.rate_hz, total_ms, &gait.noise_std, seed);
    let mut truth = fall_truth(fall, gait.duration_ms as f64, end.pitch_deg, total_ms);
    truth.step_times_ms = gait.step_times_ms();
    Ok(Simulation { samples, truth, kind: plan })
}

/// Per-participant variation used to build populations of runs: instability
/// angle 17 to 24°, lean rate 3.5 to 6.5 °/s, cadence ±15 %, stride amplitude
/// ±20 %. Deterministic per `run_seed`.
pub fn participant_variation(
    gait: &GaitScenario,
    fall: &LeanFallScenario,
    run_seed: u64,
) -> (GaitScenario, LeanFallScenario) {
    let mut rng = XorShift64Star::new(splitmix64(run_seed ^ 0x005E_ED0F_FA11));
    let mut span = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
    let fall = LeanFallScenario { theta_fall_deg: span(17.0, 24.0), lean_rate_dps: span(3.5, 6.5), ..*fall };
    let gait = GaitScenario {
        cadence_sps: gait.cadence_sps * span(0.85, 1.15),
        stride_rate_amplitude: gait.stride_rate_amplitude * span(0.8, 1.2),
        ..*gait
    };
    (gait, fall)
}
