//! The closed loop: filter → detectors → risk predictor → feedback
//! arbitration. Live and offline processing both drive a [`Pipeline`] one
//! sample at a time, so a recording replayed offline reproduces the live
//! event and command logs exactly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::detection::{
    estimate_cadence_at, BreakpointConfig, BreakpointDetector, FallConfig, FallDetector, StepDetector,
    StepDetectorConfig,
};
use crate::error::{Error, Result};
use crate::feedback::{
    arbitrate, assist_update, risk_feedback, vestibular_frequency, window_success, AssistFadeState, AssistPolicy,
    PacemakerConfig, RiskFeedbackConfig, Stimulus, VestibularFeedbackConfig,
};
use crate::fusion::{ComplementaryFilter, FilterConfig};
use crate::riskmodel::{predict, window_features, RiskModel, WindowParams};
use crate::types::{GaitEvent, GaitEventKind, ImuSample, MotorCommand, OrientationState, TimedCommand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    pub vestibular_enabled: bool,
    pub pacemaker_enabled: bool,
    pub risk_enabled: bool,
    pub assist_enabled: bool,
    pub vestibular: VestibularFeedbackConfig,
    pub pacemaker: PacemakerConfig,
    pub risk: RiskFeedbackConfig,
    pub assist: AssistPolicy,
    /// Vestibular and risk commands are re-evaluated at this period.
    pub control_period_ms: u64,
    /// Length of one assist-as-needed evaluation window.
    pub assist_window_ms: u64,
    pub cadence_window_ms: u64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            vestibular_enabled: false,
            pacemaker_enabled: false,
            risk_enabled: false,
            assist_enabled: true,
            vestibular: VestibularFeedbackConfig::default(),
            pacemaker: PacemakerConfig::default(),
            risk: RiskFeedbackConfig::default(),
            assist: AssistPolicy::default(),
            control_period_ms: 100,
            assist_window_ms: 5000,
            cadence_window_ms: 3000,
        }
    }
}

impl FeedbackConfig {
    pub fn any_enabled(&self) -> bool {
        self.vestibular_enabled || self.pacemaker_enabled || self.risk_enabled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub breakpoint: BreakpointConfig,
    pub steps: StepDetectorConfig,
    pub fall: FallConfig,
    pub windows: WindowParams,
    pub feedback: FeedbackConfig,
}

impl PipelineConfig {
    pub fn validate(&self, has_model: bool) -> Result<()> {
        self.filter.validate()?;
        self.breakpoint.validate()?;
        self.steps.validate()?;
        self.windows.validate()?;
        let fb = &self.feedback;
        if fb.vestibular_enabled {
            fb.vestibular.validate(self.breakpoint.theta_star_deg)?;
        }
        if fb.pacemaker_enabled {
            fb.pacemaker.validate()?;
        }
        if fb.risk_enabled && !has_model {
            return Err(Error::Config { field: "risk_enabled", reason: "risk feedback needs a trained model".into() });
        }
        if fb.control_period_ms == 0 {
            return Err(Error::Config { field: "control_period_ms", reason: "must be positive".into() });
        }
        if fb.assist_window_ms == 0 {
            return Err(Error::Config { field: "assist_window_ms", reason: "must be positive".into() });
        }
        Ok(())
    }
}

/// Everything a session produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineReport {
    pub events: Vec<GaitEvent>,
    pub commands: Vec<TimedCommand>,
    pub risk: Vec<(u64, f64)>,
    pub orientations: Vec<OrientationState>,
    pub samples_processed: usize,
}

impl PipelineReport {
    pub fn count(&self, kind: GaitEventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn steps(&self) -> Vec<GaitEvent> {
        self.events.iter().filter(|e| e.kind == GaitEventKind::StepDetected).copied().collect()
    }

    /// Mean step rate between the first and last step; 0 with fewer than two.
    pub fn mean_cadence(&self) -> f64 {
        let steps = self.steps();
        match (steps.first(), steps.last()) {
            (Some(a), Some(b)) if steps.len() >= 2 && b.t_ms > a.t_ms => {
                (steps.len() - 1) as f64 / ((b.t_ms - a.t_ms) as f64 / 1000.0)
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct RiskStage {
    model: RiskModel,
    buffer: VecDeque<(ImuSample, f64)>,
    next_eval_ms: Option<u64>,
    latest: Option<f64>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    filter: ComplementaryFilter,
    breakpoint: BreakpointDetector,
    steps: StepDetector,
    fall: FallDetector,
    risk: Option<RiskStage>,
    keep_series: bool,

    report: PipelineReport,
    last_t_ms: Option<u64>,
    next_tick_ms: u64,
    next_pulse: u64,
    pulse_origin_ms: f64,
    alert_until_ms: f64,
    vestibular_until_ms: f64,
    assist: AssistFadeState,
    next_assist_ms: u64,
    breakpoints_in_window: usize,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, model: Option<RiskModel>) -> Result<Self> {
        cfg.validate(model.is_some())?;
        Ok(Self {
            filter: ComplementaryFilter::new(cfg.filter)?,
            breakpoint: BreakpointDetector::new(cfg.breakpoint),
            steps: StepDetector::new(cfg.steps),
            fall: FallDetector::new(cfg.fall),
            risk: model.map(|model| RiskStage { model, buffer: VecDeque::new(), next_eval_ms: None, latest: None }),
            keep_series: false,
            report: PipelineReport::default(),
            last_t_ms: None,
            next_tick_ms: 0,
            next_pulse: 0,
            pulse_origin_ms: 0.0,
            alert_until_ms: f64::NEG_INFINITY,
            vestibular_until_ms: f64::NEG_INFINITY,
            assist: AssistFadeState::default(),
            next_assist_ms: 0,
            breakpoints_in_window: 0,
            cfg,
        })
    }

    /// Keeps every orientation state in the report (for plotting).
    pub fn with_series(mut self) -> Self {
        self.keep_series = true;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn events(&self) -> &[GaitEvent] {
        &self.report.events
    }

    pub fn commands(&self) -> &[TimedCommand] {
        &self.report.commands
    }

    pub fn latest_risk(&self) -> Option<f64> {
        self.risk.as_ref().and_then(|r| r.latest)
    }

    pub fn assist_state(&self) -> AssistFadeState {
        self.assist
    }

    /// Processes one sample. A sample older than its predecessor is rejected
    /// with a stream-order error and leaves the pipeline untouched.
    pub fn push(&mut self, sample: &ImuSample) -> Result<OrientationState> {
        let t = sample.t_ms;
        if let Some(prev) = self.last_t_ms {
            if t < prev {
                return Err(Error::StreamOrder { index: self.report.samples_processed, t_ms: t, previous_ms: prev });
            }
        } else {
            self.next_tick_ms = t;
            self.pulse_origin_ms = t as f64;
            self.next_assist_ms = t + self.cfg.feedback.assist_window_ms;
        }
        self.last_t_ms = Some(t);
        self.report.samples_processed += 1;

        let orientation = self.filter.push(sample)?;
        if self.keep_series {
            self.report.orientations.push(orientation);
        }
        let pitch = orientation.pitch_deg;

        if let Some(ev) = self.breakpoint.push(t, pitch) {
            self.breakpoints_in_window += 1;
            self.report.events.push(ev);
        }
        let [gx, _, gz] = sample.gyro.to_array().map(f64::from);
        if let Some(ev) = self.steps.push(t, gx, gz) {
            self.report.events.push(ev);
        }
        if let Some(ev) = self.fall.push(t, pitch) {
            self.report.events.push(ev);
        }

        self.update_risk(sample, pitch)?;
        self.update_assist(t);
        self.emit_feedback(t, pitch)?;
        Ok(orientation)
    }

    fn update_risk(&mut self, sample: &ImuSample, pitch: f64) -> Result<()> {
        let Some(stage) = self.risk.as_mut() else { return Ok(()) };
        let w = self.cfg.windows;
        let t = sample.t_ms;
        let next = *stage.next_eval_ms.get_or_insert(t + w.window_ms);
        if t >= next {
            // the window [t - window, t) excludes the current sample
            let start = t.saturating_sub(w.window_ms);
            while stage.buffer.front().is_some_and(|(s, _)| s.t_ms < start) {
                stage.buffer.pop_front();
            }
            let (samples, pitches): (Vec<ImuSample>, Vec<f64>) = stage.buffer.iter().copied().unzip();
            match window_features(&samples, &pitches, w.window_ms, w.rate_hz) {
                Ok(features) => {
                    let r = predict(&stage.model, &features)?;
                    stage.latest = Some(r);
                    self.report.risk.push((t, r));
                }
                Err(Error::InsufficientData { .. }) => stage.latest = None,
                Err(e) => return Err(e),
            }
            let mut n = next;
            while n <= t {
                n += w.stride_ms;
            }
            stage.next_eval_ms = Some(n);
        }
        stage.buffer.push_back((*sample, pitch));
        Ok(())
    }

    fn update_assist(&mut self, t: u64) {
        let fb = &self.cfg.feedback;
        while t >= self.next_assist_ms {
            let steps = self.report.steps();
            let cadence = estimate_cadence_at(&steps, fb.cadence_window_ms, self.next_assist_ms);
            let target = fb.pacemaker_enabled.then_some(fb.pacemaker.target_cadence_sps);
            let ok = window_success(self.breakpoints_in_window, cadence, target);
            self.assist = assist_update(&self.assist, ok, &fb.assist);
            self.breakpoints_in_window = 0;
            self.next_assist_ms += fb.assist_window_ms;
        }
    }

    fn gain(&self) -> f64 {
        if self.cfg.feedback.assist_enabled {
            self.assist.gain
        } else {
            1.0
        }
    }

    fn emit_feedback(&mut self, t: u64, pitch: f64) -> Result<()> {
        let fb = self.cfg.feedback;
        let gain = self.gain();
        let now = t as f64;

        if fb.pacemaker_enabled {
            loop {
                let due = fb.pacemaker.pulse_time(self.pulse_origin_ms, self.next_pulse);
                if due > now {
                    break;
                }
                self.next_pulse += 1;
                let overridden = due < self.alert_until_ms || due < self.vestibular_until_ms;
                if !overridden {
                    self.report.commands.push(TimedCommand { t_ms: due, command: fb.pacemaker.pulse(gain) });
                }
            }
        }

        if t < self.next_tick_ms {
            return Ok(());
        }
        while self.next_tick_ms <= t {
            self.next_tick_ms += fb.control_period_ms;
        }
        let mut candidates = Vec::with_capacity(2);
        if fb.risk_enabled && now >= self.alert_until_ms {
            if let Some(r) = self.latest_risk() {
                candidates.push((Stimulus::RiskAlert, risk_feedback(r, fb.risk.threshold, &fb.risk, gain)?));
            }
        }
        if fb.vestibular_enabled && now >= self.alert_until_ms {
            let f = vestibular_frequency(pitch, self.cfg.breakpoint.theta_star_deg, &fb.vestibular)?;
            let cmd = if f > 0.0 {
                MotorCommand { frequency_hz: f, intensity: gain, duration_ms: fb.control_period_ms as f64 }
            } else {
                MotorCommand::OFF
            };
            candidates.push((Stimulus::Vestibular, cmd));
        }
        if let Some((which, command)) = arbitrate(candidates) {
            match which {
                Stimulus::RiskAlert => self.alert_until_ms = now + command.duration_ms,
                Stimulus::Vestibular => self.vestibular_until_ms = now + command.duration_ms,
                Stimulus::Pacemaker => {}
            }
            self.report.commands.push(TimedCommand { t_ms: now, command });
        }
        Ok(())
    }

    /// Flushes the detectors and returns the time-ordered report.
    pub fn finish(mut self) -> PipelineReport {
        self.report.events.extend(self.steps.finish());
        self.report.events.extend(self.fall.finish());
        self.report.events.sort_by_key(|e| e.t_ms);
        self.report
    }
}

/// Runs a whole recording through a fresh pipeline.
pub fn analyze(
    samples: &[ImuSample],
    cfg: &PipelineConfig,
    model: Option<RiskModel>,
    keep_series: bool,
) -> Result<PipelineReport> {
    let mut p = Pipeline::new(*cfg, model)?;
    if keep_series {
        p = p.with_series();
    }
    for (index, s) in samples.iter().enumerate() {
        p.push(s).map_err(|e| match e {
            Error::StreamOrder { t_ms, previous_ms, .. } => Error::StreamOrder { index, t_ms, previous_ms },
            e => e,
        })?;
    }
    Ok(p.finish())
}
