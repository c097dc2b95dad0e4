//! Fall-risk prediction from sliding windows of the multichannel IMU
//! stream: hand-crafted window features, pre-fall horizon labeling, and an
//! L2-regularized logistic regression trained by deterministic full-batch
//! gradient descent.

mod features;
mod labeling;
mod model;

pub use features::{
    dominant_frequency, feature_index, slope_per_second, window_features, FeatureVector, CHANNELS, FEATURE_LEN,
    MIN_COVERAGE, PER_CHANNEL, PITCH_SLOPE_INDEX,
};
pub use labeling::{label_windows, LabeledWindow, WindowParams};
pub use model::{
    evaluate, metrics_at, predict, sigmoid, standardization, threshold_sweep, train, train_with_history, Metrics,
    RiskModel, TrainParams,
};
