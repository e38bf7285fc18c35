use crate::world::{Kinematics, PedestrianState, RoadGeometry};

/// Heading and speed imposed on a crossing pedestrian for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingOverride {
    pub heading: f64,
    pub speed: f64,
    /// Target pavement reached; the crossing flag clears.
    pub finished: bool,
}

/// Scripted crossing: walk straight across at full speed until the target
/// pavement is reached, then stop facing along the road.
pub fn crossing_macro_step(
    state: &PedestrianState,
    geometry: &RoadGeometry,
    kin: &Kinematics,
) -> Option<CrossingOverride> {
    let target = state.crossing?;
    if geometry.region(state.position) == target.region() {
        Some(CrossingOverride {
            heading: 0.0,
            speed: 0.0,
            finished: true,
        })
    } else {
        Some(CrossingOverride {
            heading: target.heading_towards(),
            speed: kin.v_max,
            finished: false,
        })
    }
}

pub fn apply_crossing_override(state: &mut PedestrianState, ov: CrossingOverride) {
    state.heading = ov.heading;
    state.speed = ov.speed;
    if ov.finished {
        state.crossing = None;
    }
}
