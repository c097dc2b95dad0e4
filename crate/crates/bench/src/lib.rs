//! Shared inputs for the criterion benches.

use equilivest::simulator::{gen_gait, gen_walk_then_fall, GaitScenario, LeanFallScenario};
use equilivest::ImuSample;

const NOISE: [f64; 6] = [0.01, 0.01, 0.01, 1.0, 1.0, 1.0];

/// Ten seconds of noisy walking at 100 Hz.
pub fn walking() -> Vec<ImuSample> {
    let scenario = GaitScenario { duration_ms: 10_000, noise_std: NOISE, ..Default::default() };
    gen_gait(&scenario, 1).expect("valid scenario").samples
}

/// A noisy walk that ends in a fall.
pub fn walk_then_fall() -> Vec<ImuSample> {
    let gait = GaitScenario { duration_ms: 10_000, noise_std: NOISE, ..Default::default() };
    let fall = LeanFallScenario { duration_ms: 8000, ..Default::default() };
    gen_walk_then_fall(&gait, &fall, 1).expect("valid scenario").samples
}
