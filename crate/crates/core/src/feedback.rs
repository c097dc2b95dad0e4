//! Stimulation strategies for the single belly-mounted vibration motor.
//!
//! * artificial vestibular feedback: pulse rate rises as pitch approaches
//!   the fall breakpoint;
//! * gait pacemaker: a fixed-rate cue at the target cadence;
//! * risk alert: a saturated pattern when the predictor flags a fall.
//!
//! All intensities pass through an assist-as-needed gain that fades with
//! sustained good performance and snaps back to 1 on any failure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GaitEvent, MotorCommand, TimedCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapping {
    Linear,
    Quadratic,
}

impl Mapping {
    fn exponent(self) -> i32 {
        match self {
            Mapping::Linear => 1,
            Mapping::Quadratic => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VestibularFeedbackConfig {
    pub pitch_floor_deg: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub mapping: Mapping,
}

impl Default for VestibularFeedbackConfig {
    fn default() -> Self {
        Self { pitch_floor_deg: 2.0, f_min_hz: 1.0, f_max_hz: 9.0, mapping: Mapping::Linear }
    }
}

impl VestibularFeedbackConfig {
    pub fn validate(&self, theta_star_deg: f64) -> Result<()> {
        if !(self.pitch_floor_deg >= 0.0 && self.pitch_floor_deg < theta_star_deg) {
            return Err(Error::Config {
                field: "pitch_floor_deg",
                reason: format!("{} must lie in [0, theta_star = {theta_star_deg})", self.pitch_floor_deg),
            });
        }
        if !(self.f_min_hz > 0.0 && self.f_min_hz < self.f_max_hz && self.f_max_hz.is_finite()) {
            return Err(Error::Config {
                field: "f_min_hz",
                reason: format!("need 0 < f_min ({}) < f_max ({})", self.f_min_hz, self.f_max_hz),
            });
        }
        Ok(())
    }
}

/// Off at or below the floor, `f_max` at or above the breakpoint, and
/// `f_min + (f_max - f_min) * u^k` in between, with `u` the normalized
/// position between floor and breakpoint.
pub fn vestibular_frequency(pitch_deg: f64, theta_star_deg: f64, cfg: &VestibularFeedbackConfig) -> Result<f64> {
    cfg.validate(theta_star_deg)?;
    if pitch_deg <= cfg.pitch_floor_deg {
        return Ok(0.0);
    }
    if pitch_deg >= theta_star_deg {
        return Ok(cfg.f_max_hz);
    }
    let u = (pitch_deg - cfg.pitch_floor_deg) / (theta_star_deg - cfg.pitch_floor_deg);
    Ok(cfg.f_min_hz + (cfg.f_max_hz - cfg.f_min_hz) * u.powi(cfg.mapping.exponent()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacemakerConfig {
    pub target_cadence_sps: f64,
    pub pulse_duration_ms: f64,
    pub intensity: f64,
}

impl Default for PacemakerConfig {
    fn default() -> Self {
        Self { target_cadence_sps: 1.8, pulse_duration_ms: 100.0, intensity: 0.8 }
    }
}

impl PacemakerConfig {
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.target_cadence_sps
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_cadence_sps > 0.0 && self.target_cadence_sps.is_finite()) {
            return Err(Error::Config {
                field: "target_cadence_sps",
                reason: format!("{} must be positive", self.target_cadence_sps),
            });
        }
        if !(self.pulse_duration_ms > 0.0 && self.pulse_duration_ms < self.period_ms()) {
            return Err(Error::Config {
                field: "pulse_duration_ms",
                reason: format!("{} must lie in (0, period = {})", self.pulse_duration_ms, self.period_ms()),
            });
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::Config { field: "intensity", reason: format!("{} not in [0, 1]", self.intensity) });
        }
        Ok(())
    }

    /// The pacemaker pulse itself: repeats at the cue rate.
    pub fn pulse(&self, gain: f64) -> MotorCommand {
        MotorCommand {
            frequency_hz: self.target_cadence_sps,
            intensity: self.intensity * gain,
            duration_ms: self.pulse_duration_ms,
        }
    }

    /// Time of pulse `k` in a schedule starting at `start_t_ms`.
    pub fn pulse_time(&self, start_t_ms: f64, k: u64) -> f64 {
        start_t_ms + k as f64 * self.period_ms()
    }
}

/// Pulses at `start + k * period` for `k = 0..=floor(horizon / period)`.
pub fn pacemaker_schedule(cfg: &PacemakerConfig, start_t_ms: f64, horizon_ms: f64) -> Result<Vec<TimedCommand>> {
    cfg.validate()?;
    if !(horizon_ms > 0.0 && horizon_ms.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon_ms} ms must be positive")));
    }
    // horizon / period, evaluated as a product so integral ratios stay integral
    let periods = (horizon_ms * cfg.target_cadence_sps / 1000.0 + 1e-9).floor() as u64;
    Ok((0..=periods).map(|k| TimedCommand { t_ms: cfg.pulse_time(start_t_ms, k), command: cfg.pulse(1.0) }).collect())
}

/// Mean signed offset from each step to its nearest scheduled pulse, in ms.
/// A step exactly midway between two pulses is attributed to the earlier
/// one, so each offset lies in `(-period/2, period/2]`.
pub fn pacemaker_phase_error(steps: &[GaitEvent], schedule: &[TimedCommand]) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::UndefinedMeasure("no steps"));
    }
    if schedule.is_empty() {
        return Err(Error::UndefinedMeasure("empty pulse schedule"));
    }
    let total: f64 = steps
        .iter()
        .map(|s| {
            let t = s.t_ms as f64;
            let idx = schedule.partition_point(|p| p.t_ms <= t);
            let before = idx.checked_sub(1).map(|i| t - schedule[i].t_ms);
            let after = schedule.get(idx).map(|p| t - p.t_ms);
            match (before, after) {
                (Some(b), Some(a)) => {
                    if b <= -a {
                        b
                    } else {
                        a
                    }
                }
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (None, None) => unreachable!("schedule is non-empty"),
            }
        })
        .sum();
    Ok(total / steps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistPolicy {
    pub decay: f64,
    pub gain_min: f64,
}

impl Default for AssistPolicy {
    fn default() -> Self {
        Self { decay: 0.8, gain_min: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssistFadeState {
    pub gain: f64,
    pub success_streak: u32,
}

impl Default for AssistFadeState {
    fn default() -> Self {
        Self { gain: 1.0, success_streak: 0 }
    }
}

pub fn assist_update(state: &AssistFadeState, window_success: bool, policy: &AssistPolicy) -> AssistFadeState {
    if !window_success {
        return AssistFadeState::default();
    }
    let streak = state.success_streak.saturating_add(1);
    let gain = policy.decay.powi(streak.min(i32::MAX as u32) as i32).max(policy.gain_min).clamp(0.0, 1.0);
    AssistFadeState { gain, success_streak: streak }
}

/// An evaluation window succeeds when no breakpoint fired and, if a target
/// cadence is set, the measured cadence is within ±20 % of it.
pub fn window_success(breakpoints: usize, cadence_sps: f64, target_cadence_sps: Option<f64>) -> bool {
    breakpoints == 0 && target_cadence_sps.is_none_or(|target| (cadence_sps - target).abs() <= 0.2 * target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskFeedbackConfig {
    pub threshold: f64,
    pub f_max_hz: f64,
    pub alert_duration_ms: f64,
}

impl Default for RiskFeedbackConfig {
    fn default() -> Self {
        Self { threshold: 0.5, f_max_hz: 9.0, alert_duration_ms: 800.0 }
    }
}

pub fn risk_feedback(risk: f64, threshold: f64, cfg: &RiskFeedbackConfig, gain: f64) -> Result<MotorCommand> {
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::InvalidArgument(format!("risk {risk} not in [0, 1]")));
    }
    if risk < threshold {
        return Ok(MotorCommand::OFF);
    }
    Ok(MotorCommand { frequency_hz: cfg.f_max_hz, intensity: gain.clamp(0.0, 1.0), duration_ms: cfg.alert_duration_ms })
}

/// Strategies in descending priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stimulus {
    RiskAlert,
    Vestibular,
    Pacemaker,
}

/// Picks the highest-priority command that is not off.
pub fn arbitrate<I>(candidates: I) -> Option<(Stimulus, MotorCommand)>
where
    I: IntoIterator<Item = (Stimulus, MotorCommand)>,
{
    candidates.into_iter().filter(|(_, c)| !c.is_off()).min_by_key(|(s, _)| *s)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::types::GaitEventKind;

    fn vcfg() -> VestibularFeedbackConfig {
        VestibularFeedbackConfig { pitch_floor_deg: 2.0, f_min_hz: 1.0, f_max_hz: 9.0, mapping: Mapping::Linear }
    }

    fn step(t_ms: u64) -> GaitEvent {
        GaitEvent::new(GaitEventKind::StepDetected, t_ms, 1.0)
    }

    #[test]
    fn vestibular_examples() {
        assert_eq!(vestibular_frequency(0.0, 18.0, &vcfg()).unwrap(), 0.0);
        assert_eq!(vestibular_frequency(2.0, 18.0, &vcfg()).unwrap(), 0.0);
        assert_eq!(vestibular_frequency(18.0, 18.0, &vcfg()).unwrap(), 9.0);
        assert_eq!(vestibular_frequency(40.0, 18.0, &vcfg()).unwrap(), 9.0);
        assert_eq!(vestibular_frequency(10.0, 18.0, &vcfg()).unwrap(), 5.0);
        let quad = VestibularFeedbackConfig { mapping: Mapping::Quadratic, ..vcfg() };
        assert_eq!(vestibular_frequency(10.0, 18.0, &quad).unwrap(), 3.0);
    }

    #[test]
    fn vestibular_rejects_bad_config() {
        assert!(vestibular_frequency(5.0, 1.0, &vcfg()).is_err());
        let bad = VestibularFeedbackConfig { f_min_hz: 9.0, f_max_hz: 1.0, ..vcfg() };
        assert!(matches!(vestibular_frequency(5.0, 18.0, &bad), Err(Error::Config { .. })));
        let bad = VestibularFeedbackConfig { f_min_hz: 0.0, ..vcfg() };
        assert!(vestibular_frequency(5.0, 18.0, &bad).is_err());
    }

    #[test]
    fn linear_map_limits_at_endpoints() {
        let below_top = vestibular_frequency(18.0 - 1e-9, 18.0, &vcfg()).unwrap();
        assert!((below_top - 9.0).abs() < 1e-6);
        let above_floor = vestibular_frequency(2.0 + 1e-9, 18.0, &vcfg()).unwrap();
        assert!((above_floor - 1.0).abs() < 1e-6);
    }

    #[test]
    fn schedule_examples() {
        let cfg = PacemakerConfig { target_cadence_sps: 2.0, ..Default::default() };
        assert_eq!(cfg.period_ms(), 500.0);

        let cfg = PacemakerConfig { target_cadence_sps: 1.8, ..Default::default() };
        let sched = pacemaker_schedule(&cfg, 0.0, 5000.0).unwrap();
        assert_eq!(sched.len(), 10);
        assert!((sched[1].t_ms - 555.555_555_555).abs() < 1e-6);
        assert!((sched[2].t_ms - 1_111.111_111_111).abs() < 1e-6);

        let sched = pacemaker_schedule(&cfg, 250.0, 100.0).unwrap();
        assert_eq!(sched.len(), 1);
        assert_eq!(sched[0].t_ms, 250.0);
        assert_eq!(sched[0].command.duration_ms, 100.0);
        assert_eq!(sched[0].command.intensity, 0.8);
    }

    #[test]
    fn schedule_rejects_bad_config() {
        let zero = PacemakerConfig { target_cadence_sps: 0.0, ..Default::default() };
        assert!(matches!(pacemaker_schedule(&zero, 0.0, 1000.0), Err(Error::Config { .. })));
        let neg = PacemakerConfig { target_cadence_sps: -1.0, ..Default::default() };
        assert!(pacemaker_schedule(&neg, 0.0, 1000.0).is_err());
        let long = PacemakerConfig { target_cadence_sps: 2.0, pulse_duration_ms: 500.0, ..Default::default() };
        assert!(pacemaker_schedule(&long, 0.0, 1000.0).is_err());
        assert!(pacemaker_schedule(&PacemakerConfig::default(), 0.0, 0.0).is_err());
    }

    #[test]
    fn phase_error_examples() {
        let cfg = PacemakerConfig { target_cadence_sps: 2.0, ..Default::default() };
        let sched = pacemaker_schedule(&cfg, 0.0, 5000.0).unwrap();
        let on: Vec<_> = (0..10).map(|k| step(k * 500)).collect();
        assert_eq!(pacemaker_phase_error(&on, &sched).unwrap(), 0.0);
        let late: Vec<_> = (0..10).map(|k| step(k * 500 + 50)).collect();
        assert_eq!(pacemaker_phase_error(&late, &sched).unwrap(), 50.0);
        let anti: Vec<_> = (0..10).map(|k| step(k * 500 + 250)).collect();
        assert_eq!(pacemaker_phase_error(&anti, &sched).unwrap(), 250.0);
        let early: Vec<_> = (1..10).map(|k| step(k * 500 - 40)).collect();
        assert_eq!(pacemaker_phase_error(&early, &sched).unwrap(), -40.0);
        assert!(pacemaker_phase_error(&[], &sched).is_err());
        assert!(pacemaker_phase_error(&on, &[]).is_err());
    }

    #[test]
    fn assist_examples() {
        let p = AssistPolicy::default();
        let fresh = AssistFadeState::default();
        assert_eq!(assist_update(&fresh, false, &p), AssistFadeState { gain: 1.0, success_streak: 0 });

        let mut s = fresh;
        for _ in 0..3 {
            s = assist_update(&s, true, &p);
        }
        assert!((s.gain - 0.512).abs() < 1e-12);
        assert_eq!(s.success_streak, 3);

        for _ in 0..97 {
            s = assist_update(&s, true, &p);
        }
        assert_eq!(s.gain, 0.1);
        assert_eq!(assist_update(&s, false, &p).gain, 1.0);
    }

    #[test]
    fn success_criterion() {
        assert!(window_success(0, 1.9, Some(1.8)));
        assert!(!window_success(1, 1.8, Some(1.8)));
        assert!(!window_success(0, 1.0, Some(1.8)));
        assert!(window_success(0, 0.0, None));
    }

    #[test]
    fn risk_examples() {
        let cfg = RiskFeedbackConfig::default();
        assert!(risk_feedback(0.0, 0.5, &cfg, 1.0).unwrap().is_off());
        let full = risk_feedback(1.0, 0.5, &cfg, 1.0).unwrap();
        assert_eq!((full.frequency_hz, full.intensity, full.duration_ms), (9.0, 1.0, 800.0));
        let half = risk_feedback(0.7, 0.5, &cfg, 0.5).unwrap();
        assert_eq!((half.frequency_hz, half.intensity), (9.0, 0.5));
        assert!(risk_feedback(1.2, 0.5, &cfg, 1.0).is_err());
        assert!(risk_feedback(-0.1, 0.5, &cfg, 1.0).is_err());
    }

    #[test]
    fn arbitration_prefers_safety() {
        let on = MotorCommand { frequency_hz: 3.0, intensity: 1.0, duration_ms: 100.0 };
        let picked = arbitrate([(Stimulus::Pacemaker, on), (Stimulus::Vestibular, on), (Stimulus::RiskAlert, on)]);
        assert_eq!(picked.unwrap().0, Stimulus::RiskAlert);
        let picked = arbitrate([(Stimulus::Pacemaker, on), (Stimulus::RiskAlert, MotorCommand::OFF)]);
        assert_eq!(picked.unwrap().0, Stimulus::Pacemaker);
        assert!(arbitrate([(Stimulus::Vestibular, MotorCommand::OFF)]).is_none());
    }

    proptest! {
        #[test]
        fn vestibular_monotone(a in -10.0f64..40.0, b in -10.0f64..40.0, quad in any::<bool>()) {
            let cfg = VestibularFeedbackConfig { mapping: if quad { Mapping::Quadratic } else { Mapping::Linear }, ..vcfg() };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (flo, fhi) = (vestibular_frequency(lo, 18.0, &cfg).unwrap(), vestibular_frequency(hi, 18.0, &cfg).unwrap());
            prop_assert!(flo <= fhi);
            if lo > 2.0 && hi < 18.0 && lo < hi {
                prop_assert!(flo < fhi);
            }
        }

        #[test]
        fn schedule_is_arithmetic(cadence in 0.5f64..3.0, start in 0.0f64..10_000.0, horizon in 1.0f64..20_000.0) {
            let cfg = PacemakerConfig { target_cadence_sps: cadence, pulse_duration_ms: 100.0, intensity: 1.0 };
            let sched = pacemaker_schedule(&cfg, start, horizon).unwrap();
            let period = cfg.period_ms();
            for (k, p) in sched.iter().enumerate() {
                prop_assert_eq!(p.t_ms, start + k as f64 * period);
            }
            for w in sched.windows(2) {
                prop_assert!(w[0].t_ms + w[0].command.duration_ms < w[1].t_ms);
            }
        }

        #[test]
        fn assist_gain_fades_then_resets(n in 0usize..60) {
            let p = AssistPolicy::default();
            let mut s = AssistFadeState::default();
            let mut prev = s.gain;
            for _ in 0..n {
                s = assist_update(&s, true, &p);
                prop_assert!(s.gain <= prev && s.gain >= p.gain_min);
                prev = s.gain;
            }
            prop_assert_eq!(assist_update(&s, false, &p).gain, 1.0);
        }

        #[test]
        fn risk_intensity_linear_in_gain(risk in 0.5f64..=1.0, g1 in 0.0f64..=1.0, g2 in 0.0f64..=1.0) {
            let cfg = RiskFeedbackConfig::default();
            let a = risk_feedback(risk, 0.5, &cfg, g1).unwrap();
            let b = risk_feedback(risk, 0.5, &cfg, g2).unwrap();
            let mid = risk_feedback(risk, 0.5, &cfg, (g1 + g2) / 2.0).unwrap();
            prop_assert!((mid.intensity - (a.intensity + b.intensity) / 2.0).abs() < 1e-12);
        }
    }
}
