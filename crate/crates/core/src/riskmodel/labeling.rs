use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{run_filter, FilterConfig};
use crate::types::ImuSample;

use super::features::{window_features, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    pub window_ms: u64,
    pub stride_ms: u64,
    /// Windows ending within this long before onset are positive.
    pub horizon_ms: u64,
    pub rate_hz: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self { window_ms: 1000, stride_ms: 250, horizon_ms: 1000, rate_hz: 100.0 }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_ms == 0 {
            return Err(Error::Config { field: "window_ms", reason: "must be positive".into() });
        }
        if self.stride_ms == 0 {
            return Err(Error::Config { field: "stride_ms", reason: "must be positive".into() });
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::Config { field: "rate_hz", reason: format!("{} must be positive", self.rate_hz) });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub features: FeatureVector,
    /// 1 = pre-fall, 0 = safe.
    pub label: u8,
    /// Time from window end to onset; 0 for safe windows.
    pub lead_time_ms: f64,
    pub end_ms: u64,
}

/// Slides `[end - window, end)` windows across the stream, first ending one
/// window after the first sample and stepping by `stride`. A window is
/// positive iff its end lies in `(onset - horizon, onset]`; windows ending
/// after onset are dropped, as are windows too sparse to featurize.
pub fn label_windows(
    samples: &[ImuSample],
    onset_ms: Option<f64>,
    params: &WindowParams,
    filter: &FilterConfig,
) -> Result<Vec<LabeledWindow>> {
    params.validate()?;
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return match onset_ms {
            Some(t) => Err(Error::Annotation(format!("onset {t} ms outside an empty recording"))),
            None => Ok(Vec::new()),
        };
    };
    if let Some(onset) = onset_ms {
        if !(onset >= first.t_ms as f64 && onset <= last.t_ms as f64) {
            return Err(Error::Annotation(format!(
                "onset {onset} ms outside recording span [{}, {}] ms",
                first.t_ms, last.t_ms
            )));
        }
    }
    let pitch: Vec<f64> = run_filter(samples, filter)?.iter().map(|s| s.pitch_deg).collect();

    let mut out = Vec::new();
    let mut end = first.t_ms + params.window_ms;
    while end <= last.t_ms {
        if onset_ms.is_some_and(|onset| end as f64 > onset) {
            break;
        }
        let start = end - params.window_ms;
        let lo = samples.partition_point(|s| s.t_ms < start);
        let hi = samples.partition_point(|s| s.t_ms < end);
        if let Ok(features) = window_features(&samples[lo..hi], &pitch[lo..hi], params.window_ms, params.rate_hz) {
            let lead = onset_ms.map(|onset| onset - end as f64);
            let positive = lead.is_some_and(|l| l < params.horizon_ms as f64);
            out.push(LabeledWindow {
                features,
                label: u8::from(positive),
                lead_time_ms: if positive { lead.unwrap_or(0.0) } else { 0.0 },
                end_ms: end,
            });
        }
        end += params.stride_ms;
    }
    Ok(out)
}
