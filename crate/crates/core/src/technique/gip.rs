use crate::drive::{integrate, twist, wheel_speeds, DriveParams, Pose, Twist};
use crate::pressure::PressureFrame;
use crate::signal::{chain_step, ChainConfig, ChainState, WheelCommand};

use super::TechniqueError;

/// Continuous foot steering: filter chain into the differential-drive model.
#[derive(Debug, Clone, Default)]
pub struct GipState {
    pub chain: ChainState,
    pub pose: Pose,
    pub twist: Twist,
    pub command: WheelCommand,
}

impl GipState {
    pub fn new(pose: Pose) -> Self {
        Self { pose, ..Default::default() }
    }
}

/// Advances the avatar by one frame. The twist derived from this frame is
/// held over the preceding `dt_s`.
pub fn gip_update(
    state: &mut GipState,
    frame: &PressureFrame,
    dt_s: f64,
    chain: &ChainConfig,
    drive: &DriveParams,
) -> Result<Pose, TechniqueError> {
    let cmd = chain_step(&mut state.chain, frame, chain)?;
    let tw = twist(wheel_speeds(cmd, drive), drive);
    if dt_s > 0.0 {
        state.pose = integrate(&state.pose, &tw, dt_s, drive);
    }
    state.command = cmd;
    state.twist = tw;
    Ok(state.pose)
}
