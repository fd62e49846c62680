//! Shared fixtures for the criterion benches.

use hydrarm_core::model::JointState;

/// A deterministic in-limit state for the shipped arm.
pub fn sample_state() -> JointState {
    JointState::from_slices(
        1.25,
        &[0.4, -0.5, 0.3, 0.1, -0.2, 0.15],
        &[0.12, -0.08, 0.15, 0.3, -0.25, 0.4],
        &[0.05, 0.07, -0.06, 0.5, 0.3, -0.6],
    )
}
