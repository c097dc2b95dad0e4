//! Discrete gait events from orientation and angular-rate streams.
//!
//! Every detector is a small push-driven state machine so the live pipeline
//! and offline analysis share one code path. The batch functions
//! ([`detect_breakpoint`], [`detect_steps`], [`detect_falls`]) are thin
//! wrappers.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GaitEvent, GaitEventKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakpointConfig {
    pub theta_star_deg: f64,
    /// Pitch must fall below `theta_star_deg - hysteresis_deg` to re-arm.
    pub hysteresis_deg: f64,
    pub min_dwell_ms: u64,
}

impl Default for BreakpointConfig {
    fn default() -> Self {
        Self { theta_star_deg: 18.0, hysteresis_deg: DEFAULT_HYSTERESIS_DEG, min_dwell_ms: DEFAULT_DWELL_MS }
    }
}

pub const DEFAULT_HYSTERESIS_DEG: f64 = 2.0;
pub const DEFAULT_DWELL_MS: u64 = 50;
pub const DEFAULT_CALIBRATION_PERCENTILE: f64 = 10.0;

impl BreakpointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_star_deg > 0.0 && self.theta_star_deg.is_finite()) {
            return Err(Error::Config {
                field: "theta_star_deg",
                reason: format!("{} must be positive", self.theta_star_deg),
            });
        }
        if !(self.hysteresis_deg >= 0.0 && self.hysteresis_deg.is_finite()) {
            return Err(Error::Config {
                field: "hysteresis_deg",
                reason: format!("{} must be >= 0", self.hysteresis_deg),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BreakpointDetector {
    cfg: BreakpointConfig,
    armed: bool,
    above_since: Option<u64>,
}

impl BreakpointDetector {
    pub fn new(cfg: BreakpointConfig) -> Self {
        Self { cfg, armed: true, above_since: None }
    }

    pub fn config(&self) -> &BreakpointConfig {
        &self.cfg
    }

    pub fn push(&mut self, t_ms: u64, pitch_deg: f64) -> Option<GaitEvent> {
        let cfg = &self.cfg;
        if !self.armed {
            if pitch_deg < cfg.theta_star_deg - cfg.hysteresis_deg {
                self.armed = true;
            }
            return None;
        }
        if pitch_deg >= cfg.theta_star_deg {
            let since = *self.above_since.get_or_insert(t_ms);
            if t_ms - since >= cfg.min_dwell_ms {
                self.armed = false;
                self.above_since = None;
                return Some(GaitEvent::new(GaitEventKind::BreakpointCrossed, t_ms, pitch_deg));
            }
        } else {
            self.above_since = None;
        }
        None
    }
}

/// One event per excursion above the threshold that lasts at least the
/// dwell time.
pub fn detect_breakpoint(pitch: &[(u64, f64)], cfg: &BreakpointConfig) -> Vec<GaitEvent> {
    let mut det = BreakpointDetector::new(*cfg);
    pitch.iter().filter_map(|&(t, p)| det.push(t, p)).collect()
}

/// A pitch trace with its labeled fall onset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFallRun {
    pub pitch: Vec<(u64, f64)>,
    pub onset_ms: u64,
}

impl LabeledFallRun {
    /// Pitch of the last sample at or before onset (the first sample when
    /// onset precedes the trace).
    pub fn pitch_at_onset(&self) -> Option<f64> {
        let idx = self.pitch.partition_point(|&(t, _)| t <= self.onset_ms);
        self.pitch.get(idx.saturating_sub(1)).map(|&(_, p)| p)
    }
}

/// Nearest-rank percentile: the value at rank `ceil(p/100 * n)` (1-based,
/// at least 1) of the ascending data.
pub fn nearest_rank_percentile(values: &[f64], percentile: f64) -> Option<f64> {
    if values.is_empty() || !(percentile > 0.0 && percentile <= 100.0) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Threshold at the given percentile of per-run onset pitch, with default
/// hysteresis and dwell.
pub fn calibrate_breakpoint(runs: &[LabeledFallRun], percentile: f64) -> Result<BreakpointConfig> {
    if runs.is_empty() {
        return Err(Error::Calibration("no labeled fall runs"));
    }
    let onset: Vec<f64> = runs
        .iter()
        .map(|r| r.pitch_at_onset().ok_or(Error::Calibration("run with empty pitch trace")))
        .collect::<Result<_>>()?;
    let theta = nearest_rank_percentile(&onset, percentile).ok_or(Error::Calibration("percentile outside (0, 100]"))?;
    let cfg = BreakpointConfig { theta_star_deg: theta, ..Default::default() };
    cfg.validate().map_err(|_| Error::Calibration("calibrated threshold is not positive"))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepDetectorConfig {
    /// Minimum smoothed X/Z angular-rate magnitude (°/s).
    pub peak_threshold: f64,
    pub refractory_ms: u64,
    /// Centered moving-average length, in samples.
    pub smoothing_window: usize,
}

impl Default for StepDetectorConfig {
    fn default() -> Self {
        Self { peak_threshold: 15.0, refractory_ms: 300, smoothing_window: 5 }
    }
}

impl StepDetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_threshold > 0.0) {
            return Err(Error::Config {
                field: "peak_threshold",
                reason: format!("{} must be positive", self.peak_threshold),
            });
        }
        if self.refractory_ms == 0 {
            return Err(Error::Config { field: "refractory_ms", reason: "must be positive".into() });
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config { field: "smoothing_window", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Streaming peak picker over the smoothed `sqrt(gx² + gz²)`.
///
/// Smoothing is centered, so an event for sample `i` is only available once
/// sample `i + window/2 + 1` has arrived; [`StepDetector::finish`] flushes
/// the tail with a truncated window.
#[derive(Debug, Clone)]
pub struct StepDetector {
    cfg: StepDetectorConfig,
    raw: VecDeque<(u64, f64, f64)>,
    raw_base: usize,
    pushed: usize,
    next_smooth: usize,
    recent: VecDeque<(u64, f64)>,
    last_step: Option<u64>,
}

impl StepDetector {
    pub fn new(cfg: StepDetectorConfig) -> Self {
        Self {
            cfg,
            raw: VecDeque::new(),
            raw_base: 0,
            pushed: 0,
            next_smooth: 0,
            recent: VecDeque::with_capacity(3),
            last_step: None,
        }
    }

    fn half_before(&self) -> usize {
        (self.cfg.smoothing_window.max(1) - 1) / 2
    }

    fn half_after(&self) -> usize {
        self.cfg.smoothing_window.max(1) / 2
    }

    fn smoothed(&self, i: usize) -> (u64, f64) {
        let lo = i.saturating_sub(self.half_before()).max(self.raw_base);
        let hi = (i + self.half_after()).min(self.pushed - 1);
        let (mut sx, mut sz) = (0.0, 0.0);
        for k in lo..=hi {
            let (_, gx, gz) = self.raw[k - self.raw_base];
            sx += gx;
            sz += gz;
        }
        let n = (hi - lo + 1) as f64;
        let (mx, mz) = (sx / n, sz / n);
        (self.raw[i - self.raw_base].0, (mx * mx + mz * mz).sqrt())
    }

    fn advance(&mut self, i: usize) -> Option<GaitEvent> {
        let m = self.smoothed(i);
        if self.recent.len() == 3 {
            self.recent.pop_front();
        }
        self.recent.push_back(m);
        self.next_smooth = i + 1;
        let keep_from = self.next_smooth.saturating_sub(self.half_before());
        while self.raw_base < keep_from {
            self.raw.pop_front();
            self.raw_base += 1;
        }
        if self.recent.len() < 3 {
            return None;
        }
        let (_, left) = self.recent[0];
        let (t, mid) = self.recent[1];
        let (_, right) = self.recent[2];
        if mid > left && mid >= right && mid > self.cfg.peak_threshold {
            if self.last_step.is_some_and(|last| t - last < self.cfg.refractory_ms) {
                return None;
            }
            self.last_step = Some(t);
            return Some(GaitEvent::new(GaitEventKind::StepDetected, t, mid));
        }
        None
    }

    pub fn push(&mut self, t_ms: u64, gx: f64, gz: f64) -> Option<GaitEvent> {
        self.raw.push_back((t_ms, gx, gz));
        self.pushed += 1;
        // with at most one new sample, at most one index becomes computable
        if self.next_smooth + self.half_after() < self.pushed {
            self.advance(self.next_smooth)
        } else {
            None
        }
    }

    pub fn finish(&mut self) -> Vec<GaitEvent> {
        let mut out = Vec::new();
        while self.next_smooth < self.pushed {
            out.extend(self.advance(self.next_smooth));
        }
        out
    }
}

pub fn detect_steps(gyro: &[(u64, f64, f64)], cfg: &StepDetectorConfig) -> Vec<GaitEvent> {
    let mut det = StepDetector::new(*cfg);
    let mut events: Vec<GaitEvent> = gyro.iter().filter_map(|&(t, gx, gz)| det.push(t, gx, gz)).collect();
    events.extend(det.finish());
    events
}

/// Per-recording threshold: `fraction` of the 95th-percentile smoothed
/// X/Z magnitude. Returns `None` for an empty or motionless stream.
pub fn calibrate_step_threshold(gyro: &[(u64, f64, f64)], smoothing_window: usize, fraction: f64) -> Option<f64> {
    let mut det = StepDetector::new(StepDetectorConfig { smoothing_window, ..Default::default() });
    let mut mags = Vec::with_capacity(gyro.len());
    for &(t, gx, gz) in gyro {
        det.raw.push_back((t, gx, gz));
        det.pushed += 1;
    }
    for i in 0..det.pushed {
        mags.push(det.smoothed(i).1);
    }
    let p95 = nearest_rank_percentile(&mags, 95.0)?;
    (p95 > 0.0).then_some(fraction * p95)
}

/// Steps per second over the trailing window ending at the last step.
pub fn estimate_cadence(steps: &[GaitEvent], window_ms: u64) -> f64 {
    match steps.last() {
        Some(last) => estimate_cadence_at(steps, window_ms, last.t_ms),
        None => 0.0,
    }
}

/// Steps per second over `(now_ms - window_ms, now_ms]`; 0 when fewer than
/// two steps fall inside.
pub fn estimate_cadence_at(steps: &[GaitEvent], window_ms: u64, now_ms: u64) -> f64 {
    if window_ms == 0 {
        return 0.0;
    }
    let start = now_ms.saturating_sub(window_ms);
    let n = steps
        .iter()
        .filter(|e| {
            e.kind == GaitEventKind::StepDetected && e.t_ms <= now_ms && (e.t_ms > start || (start == 0 && e.t_ms == 0))
        })
        .count();
    if n < 2 {
        0.0
    } else {
        n as f64 / (window_ms as f64 / 1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FallConfig {
    pub fall_pitch_deg: f64,
    /// The peak is reported once pitch has not exceeded it for this long.
    pub settle_ms: u64,
    pub rearm_pitch_deg: f64,
}

impl Default for FallConfig {
    fn default() -> Self {
        Self { fall_pitch_deg: 60.0, settle_ms: 200, rearm_pitch_deg: 30.0 }
    }
}

/// Reports the peak pitch of each excursion above `fall_pitch_deg`.
#[derive(Debug, Clone)]
pub struct FallDetector {
    cfg: FallConfig,
    peak: Option<(u64, f64)>,
    armed: bool,
}

impl FallDetector {
    pub fn new(cfg: FallConfig) -> Self {
        Self { cfg, peak: None, armed: true }
    }

    pub fn push(&mut self, t_ms: u64, pitch_deg: f64) -> Option<GaitEvent> {
        if !self.armed {
            if pitch_deg < self.cfg.rearm_pitch_deg {
                self.armed = true;
            }
            return None;
        }
        match self.peak {
            None if pitch_deg >= self.cfg.fall_pitch_deg => self.peak = Some((t_ms, pitch_deg)),
            None => {}
            Some((_, p)) if pitch_deg > p => self.peak = Some((t_ms, pitch_deg)),
            Some((t, _)) if t_ms - t >= self.cfg.settle_ms || pitch_deg < self.cfg.rearm_pitch_deg => {
                return self.emit();
            }
            Some(_) => {}
        }
        None
    }

    fn emit(&mut self) -> Option<GaitEvent> {
        let (t, p) = self.peak.take()?;
        self.armed = false;
        Some(GaitEvent::new(GaitEventKind::FallDetected, t, p))
    }

    pub fn finish(&mut self) -> Option<GaitEvent> {
        self.emit()
    }
}

pub fn detect_falls(pitch: &[(u64, f64)], cfg: &FallConfig) -> Vec<GaitEvent> {
    let mut det = FallDetector::new(*cfg);
    let mut events: Vec<GaitEvent> = pitch.iter().filter_map(|&(t, p)| det.push(t, p)).collect();
    events.extend(det.finish());
    events
}
