//! Accelerometer tilt angles blended with gyroscope integration.
//!
//! Pitch and roll are corrected by the accelerometer with weight `1 - alpha`;
//! yaw is pure gyro integration and drifts, since gravity carries no heading
//! information and the vest has no magnetometer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_finite, ImuSample, OrientationState};

/// Gaps longer than this many nominal periods restart the filter.
pub const REINIT_GAP_PERIODS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Gyroscope weight.
    pub alpha: f64,
    pub nominal_rate_hz: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { alpha: 0.98, nominal_rate_hz: 100.0 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config { field: "alpha", reason: format!("{} not in [0, 1]", self.alpha) });
        }
        if !(self.nominal_rate_hz > 0.0 && self.nominal_rate_hz.is_finite()) {
            return Err(Error::Config {
                field: "nominal_rate_hz",
                reason: format!("{} must be positive", self.nominal_rate_hz),
            });
        }
        Ok(())
    }

    pub fn nominal_period_s(&self) -> f64 {
        1.0 / self.nominal_rate_hz
    }
}

/// Roll and pitch implied by the gravity direction, in degrees.
///
/// `roll = atan2(-ax, ay)`, `pitch = atan2(az, sqrt(ax² + ay²))`; forward
/// lean gives positive pitch.
pub fn accel_angles(sample: &ImuSample) -> Result<(f64, f64)> {
    let [ax, ay, az] = sample.accel.to_array().map(f64::from);
    if !(ax * ax + ay * ay + az * az > 0.0) {
        return Err(Error::DegenerateInput("zero accelerometer vector"));
    }
    let roll = (-ax).atan2(ay).to_degrees();
    let pitch = az.atan2((ax * ax + ay * ay).sqrt()).to_degrees();
    Ok((roll, pitch))
}

/// One complementary filter step over `dt_s` seconds.
pub fn complementary_update(
    state: &OrientationState,
    sample: &ImuSample,
    dt_s: f64,
    cfg: &FilterConfig,
) -> Result<OrientationState> {
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt {dt_s} s must be positive")));
    }
    if sample.t_ms <= state.t_ms {
        return Err(Error::InvalidArgument(format!(
            "sample at {} ms does not follow state at {} ms",
            sample.t_ms, state.t_ms
        )));
    }
    Ok(blend(state, sample, dt_s, cfg.alpha))
}

fn blend(state: &OrientationState, sample: &ImuSample, dt_s: f64, alpha: f64) -> OrientationState {
    let [gx, gy, gz] = sample.gyro.to_array().map(f64::from);
    let pitch_gyro = state.pitch_deg + gx * dt_s;
    let roll_gyro = state.roll_deg + gz * dt_s;
    let (roll, pitch) = match accel_angles(sample) {
        Ok((roll_acc, pitch_acc)) => {
            (alpha * roll_gyro + (1.0 - alpha) * roll_acc, alpha * pitch_gyro + (1.0 - alpha) * pitch_acc)
        }
        // hold the gyro-only estimate
        Err(_) => (roll_gyro, pitch_gyro),
    };
    OrientationState {
        roll_deg: wrap_finite(roll),
        pitch_deg: wrap_finite(pitch),
        yaw_deg: wrap_finite(state.yaw_deg + gy * dt_s),
        t_ms: sample.t_ms,
    }
}

fn initial_state(sample: &ImuSample, yaw_deg: f64) -> OrientationState {
    let (roll, pitch) = accel_angles(sample).unwrap_or((0.0, 0.0));
    OrientationState::new(roll, pitch, yaw_deg, sample.t_ms)
}

/// Streaming form of [`run_filter`]: one state out per sample in.
#[derive(Debug, Clone)]
pub struct ComplementaryFilter {
    cfg: FilterConfig,
    state: Option<OrientationState>,
}

impl ComplementaryFilter {
    pub fn new(cfg: FilterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: None })
    }

    pub fn state(&self) -> Option<&OrientationState> {
        self.state.as_ref()
    }

    /// Consumes the next sample. Timestamps must not go backwards.
    pub fn push(&mut self, sample: &ImuSample) -> Result<OrientationState> {
        let next = match &self.state {
            None => initial_state(sample, 0.0),
            Some(prev) => {
                if sample.t_ms < prev.t_ms {
                    return Err(Error::StreamOrder { index: 0, t_ms: sample.t_ms, previous_ms: prev.t_ms });
                }
                let period = self.cfg.nominal_period_s();
                let gap_s = (sample.t_ms - prev.t_ms) as f64 / 1000.0;
                if gap_s > REINIT_GAP_PERIODS * period {
                    initial_state(sample, prev.yaw_deg)
                } else {
                    let dt = gap_s.clamp(0.5 * period, 2.0 * period);
                    blend(prev, sample, dt, self.cfg.alpha)
                }
            }
        };
        self.state = Some(next);
        Ok(next)
    }
}

/// Filters a whole stream. The first state comes from the first sample's
/// accelerometer angles with yaw 0; later steps use the measured sample gap
/// clamped to `[0.5, 2]` nominal periods.
pub fn run_filter(stream: &[ImuSample], cfg: &FilterConfig) -> Result<Vec<OrientationState>> {
    let mut filter = ComplementaryFilter::new(*cfg)?;
    stream
        .iter()
        .enumerate()
        .map(|(index, s)| {
            filter.push(s).map_err(|e| match e {
                Error::StreamOrder { t_ms, previous_ms, .. } => Error::StreamOrder { index, t_ms, previous_ms },
                e => e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec3;

    fn sample(t_ms: u64, accel: (f32, f32, f32), gyro: (f32, f32, f32)) -> ImuSample {
        ImuSample::new(t_ms as u32, t_ms, Vec3::new(accel.0, accel.1, accel.2), Vec3::new(gyro.0, gyro.1, gyro.2))
    }

    fn tilt(deg: f64) -> (f32, f32, f32) {
        let r = deg.to_radians();
        (0.0, r.cos() as f32, r.sin() as f32)
    }

    #[test]
    fn accel_angle_examples() {
        let (r, p) = accel_angles(&sample(0, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0))).unwrap();
        assert_eq!((r, p), (0.0, 0.0));

        let (r, p) = accel_angles(&sample(0, tilt(30.0), (0.0, 0.0, 0.0))).unwrap();
        assert!(r.abs() < 1e-12);
        assert!((p - 30.0).abs() < 1e-5);

        let h = std::f32::consts::FRAC_1_SQRT_2;
        let (r, p) = accel_angles(&sample(0, (-h, h, 0.0), (0.0, 0.0, 0.0))).unwrap();
        assert!((r - 45.0).abs() < 1e-9);
        assert!(p.abs() < 1e-12);

        assert!(matches!(accel_angles(&sample(0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn update_examples() {
        let cfg = FilterConfig::default();
        let zero = OrientationState::default();
        let next = complementary_update(&zero, &sample(10, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0)), 0.01, &cfg).unwrap();
        assert_eq!((next.roll_deg, next.pitch_deg, next.yaw_deg), (0.0, 0.0, 0.0));
        assert_eq!(next.t_ms, 10);

        // 0.98 * (10 + 100 * 0.01) + 0.02 * 10
        let at10 = OrientationState::new(0.0, 10.0, 0.0, 0);
        let s = sample(10, tilt(10.0), (100.0, 0.0, 0.0));
        let (_, pitch_acc) = accel_angles(&s).unwrap();
        let next = complementary_update(&at10, &s, 0.01, &cfg).unwrap();
        let expected = 0.98 * 11.0 + 0.02 * pitch_acc;
        assert!((next.pitch_deg - expected).abs() < 1e-12);
        assert!((next.pitch_deg - 10.98).abs() < 1e-6);

        let cfg0 = FilterConfig { alpha: 0.0, ..cfg };
        let s = sample(10, (-0.3, 0.8, 0.4), (300.0, -50.0, 120.0));
        let (r, p) = accel_angles(&s).unwrap();
        let next = complementary_update(&at10, &s, 0.01, &cfg0).unwrap();
        assert_eq!((next.roll_deg, next.pitch_deg), (r, p));
    }

    #[test]
    fn update_rejects_bad_dt() {
        let cfg = FilterConfig::default();
        let st = OrientationState::default();
        let s = sample(10, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0));
        assert!(complementary_update(&st, &s, 0.0, &cfg).is_err());
        assert!(complementary_update(&st, &s, -0.01, &cfg).is_err());
        let stale = sample(0, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0));
        assert!(complementary_update(&st, &stale, 0.01, &cfg).is_err());
    }

    #[test]
    fn degenerate_accel_falls_back_to_gyro() {
        let cfg = FilterConfig::default();
        let st = OrientationState::new(1.0, 2.0, 3.0, 0);
        let s = sample(10, (0.0, 0.0, 0.0), (10.0, 20.0, 30.0));
        let next = complementary_update(&st, &s, 0.01, &cfg).unwrap();
        assert!((next.pitch_deg - 2.1).abs() < 1e-12);
        assert!((next.yaw_deg - 3.2).abs() < 1e-12);
        assert!((next.roll_deg - 1.3).abs() < 1e-12);
    }

    #[test]
    fn run_filter_static_stream() {
        let stream: Vec<_> = (0..1000).map(|i| sample(i * 10, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0))).collect();
        let out = run_filter(&stream, &FilterConfig::default()).unwrap();
        assert_eq!(out.len(), 1000);
        assert!(out.iter().all(|s| s.roll_deg == 0.0 && s.pitch_deg == 0.0 && s.yaw_deg == 0.0));
        assert!(run_filter(&[], &FilterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn run_filter_constant_rate_matches_geometric_series() {
        // p[n+1] = a (p[n] + g dt) with the accelerometer pinned at 0:
        // p[n] = a g dt / (1 - a) * (1 - a^n)
        let a = 0.98f64;
        let stream: Vec<_> = (0..100).map(|i| sample(i * 10, (0.0, 1.0, 0.0), (90.0, 0.0, 0.0))).collect();
        let out = run_filter(&stream, &FilterConfig::default()).unwrap();
        let last = out.last().unwrap().pitch_deg;
        let n = 99;
        let closed = a * 0.9 / (1.0 - a) * (1.0 - a.powi(n));
        assert!((last - closed).abs() < 1e-9, "{last} vs {closed}");
        assert!(last > 0.0 && last < 90.0);
    }

    #[test]
    fn run_filter_reports_offending_index() {
        let stream = vec![
            sample(0, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0)),
            sample(10, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0)),
            sample(5, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0)),
        ];
        match run_filter(&stream, &FilterConfig::default()) {
            Err(Error::StreamOrder { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_filter_initializes_from_accel_and_reinitializes_after_gap() {
        let stream = vec![
            sample(0, tilt(12.0), (0.0, 0.0, 0.0)),
            sample(10, tilt(12.0), (0.0, 5.0, 0.0)),
            sample(1000, tilt(-7.0), (0.0, 0.0, 0.0)),
        ];
        let out = run_filter(&stream, &FilterConfig::default()).unwrap();
        assert!((out[0].pitch_deg - 12.0).abs() < 1e-5);
        assert_eq!(out[0].yaw_deg, 0.0);
        // 990 ms gap > 20 periods: pitch restarts from the accelerometer, yaw carries over
        assert!((out[2].pitch_deg + 7.0).abs() < 1e-5);
        assert!((out[2].yaw_deg - out[1].yaw_deg).abs() < 1e-12);
    }

    #[test]
    fn dt_is_clamped() {
        let cfg = FilterConfig { alpha: 1.0, ..Default::default() };
        let gyro = (100.0, 0.0, 0.0);
        // duplicate timestamp -> 5 ms, 150 ms gap -> 20 ms
        let stream = vec![
            sample(0, (0.0, 1.0, 0.0), gyro),
            sample(0, (0.0, 1.0, 0.0), gyro),
            sample(150, (0.0, 1.0, 0.0), gyro),
        ];
        let out = run_filter(&stream, &cfg).unwrap();
        assert!((out[1].pitch_deg - 0.5).abs() < 1e-12);
        assert!((out[2].pitch_deg - 2.5).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig { alpha: 1.5, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { nominal_rate_hz: 0.0, ..Default::default() }.validate().is_err());
        assert!(ComplementaryFilter::new(FilterConfig { alpha: -0.1, ..Default::default() }).is_err());
    }
}
