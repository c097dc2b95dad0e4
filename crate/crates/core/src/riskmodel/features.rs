use crate::error::{Error, Result};
use crate::types::ImuSample;

pub const CHANNELS: [&str; 7] = ["ax", "ay", "az", "gx", "gy", "gz", "pitch"];
pub const PER_CHANNEL: [&str; 6] = ["mean", "var", "rms", "min", "max", "dom_freq"];
/// 7 channels × 6 statistics + pitch slope.
pub const FEATURE_LEN: usize = CHANNELS.len() * PER_CHANNEL.len() + 1;
/// Fraction of the nominal sample count a window needs.
pub const MIN_COVERAGE: f64 = 0.8;

/// Fixed-order feature vector. Window features are laid out channel-major
/// (`ax_mean, ax_var, …, pitch_dom_freq`) followed by `pitch_slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn names() -> Vec<String> {
        let mut names: Vec<String> =
            CHANNELS.iter().flat_map(|c| PER_CHANNEL.iter().map(move |f| format!("{c}_{f}"))).collect();
        names.push("pitch_slope".to_string());
        names
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Index of `stat` for `channel` in a window feature vector.
pub fn feature_index(channel: &str, stat: &str) -> Option<usize> {
    let c = CHANNELS.iter().position(|&x| x == channel)?;
    let s = PER_CHANNEL.iter().position(|&x| x == stat)?;
    Some(c * PER_CHANNEL.len() + s)
}

pub const PITCH_SLOPE_INDEX: usize = FEATURE_LEN - 1;

/// Frequency of the largest non-DC bin of the mean-removed signal, or 0
/// when the signal carries no measurable oscillation.
pub fn dominant_frequency(signal: &[f64], rate_hz: f64) -> f64 {
    let n = signal.len();
    if n < 2 {
        return 0.0;
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let scale = signal.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let twiddle: Vec<(f64, f64)> = (0..n).map(|m| (std::f64::consts::TAU * m as f64 / n as f64).sin_cos()).collect();
    let mut best = (0usize, 0.0f64);
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, x) in signal.iter().enumerate() {
            let (sin, cos) = twiddle[k * j % n];
            re += (x - mean) * cos;
            im -= (x - mean) * sin;
        }
        let mag = re.hypot(im);
        if mag > best.1 {
            best = (k, mag);
        }
    }
    if best.1 <= 1e-9 * scale * n as f64 {
        0.0
    } else {
        best.0 as f64 * rate_hz / n as f64
    }
}

fn channel_stats(x: &[f64], rate_hz: f64, out: &mut Vec<f64>) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.extend([mean, var, rms, min, max, dominant_frequency(x, rate_hz)]);
}

/// Least-squares slope of `y` against time in seconds since the first
/// sample.
pub fn slope_per_second(t_ms: &[u64], y: &[f64]) -> f64 {
    let n = t_ms.len() as f64;
    if t_ms.len() < 2 {
        return 0.0;
    }
    let t0 = t_ms[0];
    let ts: Vec<f64> = t_ms.iter().map(|&t| (t - t0) as f64 / 1000.0).collect();
    let mt = ts.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let sxy: f64 = ts.iter().zip(y).map(|(t, v)| (t - mt) * (v - my)).sum();
    sxy / sxx
}

/// Features for one window. `pitch_deg[i]` is the filtered pitch at
/// `samples[i]`.
pub fn window_features(
    samples: &[ImuSample],
    pitch_deg: &[f64],
    window_ms: u64,
    rate_hz: f64,
) -> Result<FeatureVector> {
    if pitch_deg.len() != samples.len() {
        return Err(Error::InvalidArgument(format!("{} pitch values for {} samples", pitch_deg.len(), samples.len())));
    }
    let expected = window_ms as f64 * rate_hz / 1000.0;
    let need = (MIN_COVERAGE * expected).ceil().max(2.0) as usize;
    if samples.len() < need {
        return Err(Error::InsufficientData { got: samples.len(), need });
    }
    let mut out = Vec::with_capacity(FEATURE_LEN);
    let mut column = Vec::with_capacity(samples.len());
    for c in 0..6 {
        column.clear();
        column.extend(samples.iter().map(|s| {
            let v = if c < 3 { s.accel.to_array()[c] } else { s.gyro.to_array()[c - 3] };
            f64::from(v)
        }));
        channel_stats(&column, rate_hz, &mut out);
    }
    channel_stats(pitch_deg, rate_hz, &mut out);
    let times: Vec<u64> = samples.iter().map(|s| s.t_ms).collect();
    out.push(slope_per_second(&times, pitch_deg));
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec3;

    fn window(n: usize, f: impl Fn(f64) -> f64) -> (Vec<ImuSample>, Vec<f64>) {
        let samples: Vec<_> = (0..n)
            .map(|i| {
                let t = i as f64 / 100.0;
                let v = f(t) as f32;
                ImuSample::new(i as u32, i as u64 * 10, Vec3::new(v, 1.0, 0.0), Vec3::new(v, 0.0, -v))
            })
            .collect();
        let pitch = (0..n).map(|i| f(i as f64 / 100.0)).collect();
        (samples, pitch)
    }

    #[test]
    fn layout() {
        assert_eq!(FEATURE_LEN, 43);
        assert_eq!(FeatureVector::names().len(), 43);
        assert_eq!(feature_index("pitch", "mean"), Some(36));
        assert_eq!(feature_index("ax", "dom_freq"), Some(5));
        assert_eq!(FeatureVector::names()[PITCH_SLOPE_INDEX], "pitch_slope");
    }

    #[test]
    fn constant_signal() {
        let (s, p) = window(100, |_| 2.5);
        let f = window_features(&s, &p, 1000, 100.0).unwrap();
        let pm = feature_index("pitch", "mean").unwrap();
        assert_eq!(f.0[pm], 2.5);
        assert_eq!(f.0[pm + 1], 0.0);
        assert_eq!(f.0[pm + 2], 2.5);
        assert_eq!(f.0[pm + 5], 0.0);
        assert_eq!(f.0[PITCH_SLOPE_INDEX], 0.0);
        let (s, p) = window(100, |_| -3.0);
        let f = window_features(&s, &p, 1000, 100.0).unwrap();
        assert_eq!(f.0[pm + 2], 3.0);
    }

    #[test]
    fn sinusoid_frequency() {
        // oracle: a pure tone of k cycles over the window lands in bin k
        let (s, p) = window(200, |t| (std::f64::consts::TAU * 2.0 * t).sin());
        let f = window_features(&s, &p, 2000, 100.0).unwrap();
        assert_eq!(f.0[feature_index("pitch", "dom_freq").unwrap()], 2.0);
        assert_eq!(f.0[feature_index("gx", "dom_freq").unwrap()], 2.0);
        assert_eq!(f.0[feature_index("ay", "dom_freq").unwrap()], 0.0);
    }

    #[test]
    fn ramp_slope() {
        let (s, p) = window(100, |t| 5.0 * t + 1.0);
        let f = window_features(&s, &p, 1000, 100.0).unwrap();
        assert!((f.0[PITCH_SLOPE_INDEX] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_window_rejected() {
        let (s, p) = window(79, |_| 0.0);
        assert!(matches!(window_features(&s, &p, 1000, 100.0), Err(Error::InsufficientData { got: 79, need: 80 })));
        let (s, p) = window(80, |_| 0.0);
        assert!(window_features(&s, &p, 1000, 100.0).is_ok());
        assert!(window_features(&s, &p[..10], 1000, 100.0).is_err());
    }

    #[test]
    fn shift_invariance() {
        let (s, p) = window(100, |t| (7.0 * t).sin() * 3.0 + t);
        let shifted: Vec<_> = s.iter().map(|x| ImuSample { t_ms: x.t_ms + 123_456, ..*x }).collect();
        assert_eq!(window_features(&s, &p, 1000, 100.0).unwrap(), window_features(&shifted, &p, 1000, 100.0).unwrap());
    }
}
