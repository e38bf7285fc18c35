//! Road geometry, fixed-timestep kinematics, spawning and test-event
//! classification.
//!
//! Coordinates: `x` runs along the road (the car drives towards `+x`), `y`
//! runs across it. From `y = 0` upwards the corridor is the near pavement,
//! the car's lane, the opposite lane and the far pavement.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::PedestrianAction;
use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Normalizes an angle into `(-PI, PI]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Shortest signed angular difference `to - from`, in `(-PI, PI]`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    normalize_angle(to - from)
}

/// Lateral band of the corridor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    PavementNear,
    RoadLane1,
    RoadLane2,
    PavementFar,
}

impl Region {
    pub const ALL: [Region; 4] = [
        Region::PavementNear,
        Region::RoadLane1,
        Region::RoadLane2,
        Region::PavementFar,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_road(self) -> bool {
        matches!(self, Region::RoadLane1 | Region::RoadLane2)
    }

    pub fn code(self) -> char {
        match self {
            Region::PavementNear => 'N',
            Region::RoadLane1 => '1',
            Region::RoadLane2 => '2',
            Region::PavementFar => 'F',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    pub road_length: f64,
    pub lane_width: f64,
    pub pavement_width: f64,
    pub lane_count: u32,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            road_length: 99.0,
            lane_width: 3.65,
            pavement_width: 2.0,
            lane_count: 2,
        }
    }
}

impl RoadGeometry {
    pub fn new(road_length: f64, lane_width: f64, pavement_width: f64) -> Result<Self> {
        let g = Self {
            road_length,
            lane_width,
            pavement_width,
            lane_count: 2,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.road_length)
            || !positive(self.lane_width)
            || !positive(self.pavement_width)
        {
            return Err(SimError::Config(format!(
                "road dimensions must be positive: {self:?}"
            )));
        }
        if self.lane_count != 2 {
            return Err(SimError::Config("lane_count is fixed at 2".into()));
        }
        Ok(())
    }

    /// Total corridor height: both lanes plus both pavements.
    pub fn height(&self) -> f64 {
        self.lane_count as f64 * self.lane_width + 2.0 * self.pavement_width
    }

    fn road_top(&self) -> f64 {
        self.pavement_width + self.lane_count as f64 * self.lane_width
    }

    pub fn region(&self, p: Vec2) -> Region {
        let y = p.y;
        if y < self.pavement_width {
            Region::PavementNear
        } else if y < self.pavement_width + self.lane_width {
            Region::RoadLane1
        } else if y < self.road_top() {
            Region::RoadLane2
        } else {
            Region::PavementFar
        }
    }

    pub fn in_road(&self, p: Vec2) -> bool {
        p.y >= self.pavement_width && p.y < self.road_top()
    }

    pub fn in_pavement(&self, p: Vec2) -> bool {
        !self.in_road(p)
    }

    /// `[lo, hi)` band of the lane the car drives in.
    pub fn car_lane(&self) -> (f64, f64) {
        (self.pavement_width, self.pavement_width + self.lane_width)
    }

    pub fn car_lane_center(&self) -> f64 {
        self.pavement_width + 0.5 * self.lane_width
    }

    pub fn in_car_lane(&self, p: Vec2) -> bool {
        self.region(p) == Region::RoadLane1
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(0.0, self.road_length),
            p.y.clamp(0.0, self.height()),
        )
    }

    /// `y` band `[lo, hi)` of a pavement.
    pub fn pavement_band(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Near => (0.0, self.pavement_width),
            Side::Far => (self.road_top(), self.height()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Near,
    Far,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Near => Side::Far,
            Side::Far => Side::Near,
        }
    }

    /// Heading pointing across the road towards this side.
    pub fn heading_towards(self) -> f64 {
        match self {
            Side::Near => -FRAC_PI_2,
            Side::Far => FRAC_PI_2,
        }
    }

    pub fn region(self) -> Region {
        match self {
            Side::Near => Region::PavementNear,
            Side::Far => Region::PavementFar,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
    pub max_decel: f64,
    pub reaction_time: f64,
}

impl Default for CarState {
    fn default() -> Self {
        Self {
            position: Vec2::default(),
            speed: 10.0,
            heading: 0.0,
            max_decel: 6.0,
            reaction_time: 1.0,
        }
    }
}

impl CarState {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0) || !(self.max_decel > 0.0) || !(self.reaction_time >= 0.0) {
            return Err(SimError::Config(format!(
                "invalid car parameters: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Reaction distance plus braking distance.
pub fn stopping_distance(car: &CarState) -> f64 {
    car.speed * car.reaction_time + car.speed * car.speed / (2.0 * car.max_decel)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PedId(pub u32);

impl fmt::Display for PedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState {
    pub id: PedId,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Target pavement of a crossing in progress.
    pub crossing: Option<Side>,
}

impl PedestrianState {
    pub fn crossing_flag(&self) -> bool {
        self.crossing.is_some()
    }
}

/// Per-step motion limits shared by the simulator and the planner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub v_max: f64,
    pub delta_v: f64,
    pub delta_theta: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Self {
            v_max: 2.5,
            delta_v: 0.5,
            delta_theta: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Which pavement a crossing started at `position` should end on.
pub fn crossing_target(position: Vec2, geometry: &RoadGeometry) -> Side {
    match geometry.region(position) {
        Region::PavementNear | Region::RoadLane1 => Side::Far,
        Region::RoadLane2 | Region::PavementFar => Side::Near,
    }
}

/// Applies one action to a pedestrian and integrates its motion over `dt`.
pub fn advance_pedestrian(
    ped: &PedestrianState,
    action: PedestrianAction,
    kin: &Kinematics,
    geometry: &RoadGeometry,
    dt: f64,
) -> PedestrianState {
    let mut next = *ped;
    match action {
        PedestrianAction::Noop => {}
        PedestrianAction::Accel => next.speed = (next.speed + kin.delta_v).min(kin.v_max),
        PedestrianAction::Decel => next.speed = (next.speed - kin.delta_v).max(0.0),
        PedestrianAction::TurnLeft => {
            next.heading = normalize_angle(next.heading + kin.delta_theta)
        }
        PedestrianAction::TurnRight => {
            next.heading = normalize_angle(next.heading - kin.delta_theta)
        }
        PedestrianAction::StartCrossing => {
            if next.crossing.is_none() {
                next.crossing = Some(crossing_target(next.position, geometry));
            }
        }
    }
    next.speed = next.speed.clamp(0.0, kin.v_max);
    let moved = next.position + Vec2::from_heading(next.heading) * (next.speed * dt);
    next.position = geometry.clamp(moved);
    next
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub car: CarState,
    pub pedestrians: Vec<PedestrianState>,
    pub step_index: u64,
    pub dt: f64,
}

impl WorldState {
    pub fn elapsed(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn pedestrian(&self, id: PedId) -> Option<&PedestrianState> {
        self.pedestrians.iter().find(|p| p.id == id)
    }
}

/// Advances the world by one timestep. Pure: the input is not modified.
pub fn step(
    state: &WorldState,
    actions: &[(PedId, PedestrianAction)],
    kin: &Kinematics,
    geometry: &RoadGeometry,
) -> Result<WorldState> {
    if !(state.dt > 0.0) {
        return Err(SimError::Contract(format!(
            "dt must be positive, got {}",
            state.dt
        )));
    }
    let mut seen = BTreeSet::new();
    for (id, _) in actions {
        if !seen.insert(*id) {
            return Err(SimError::Contract(format!("duplicate action for {id}")));
        }
        if state.pedestrian(*id).is_none() {
            return Err(SimError::Contract(format!(
                "action for unknown pedestrian {id}"
            )));
        }
    }
    let mut next = state.clone();
    next.car.position.x += state.car.speed * state.dt;
    for ped in next.pedestrians.iter_mut() {
        let action = actions
            .iter()
            .find(|(id, _)| *id == ped.id)
            .map(|(_, a)| *a)
            .ok_or_else(|| SimError::Contract(format!("missing action for {}", ped.id)))?;
        *ped = advance_pedestrian(ped, action, kin, geometry, state.dt);
    }
    next.step_index += 1;
    Ok(next)
}

/// Everything the simulator needs besides the dynamic state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub geometry: RoadGeometry,
    /// Car parameters; its position is ignored and replaced at spawn.
    pub car: CarState,
    pub kinematics: Kinematics,
    pub dt: f64,
    pub max_steps: u64,
    pub spawn_margin: f64,
    pub min_separation: f64,
    pub max_pedestrians: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            geometry: RoadGeometry::default(),
            car: CarState::default(),
            kinematics: Kinematics::default(),
            dt: 0.1,
            max_steps: 200,
            spawn_margin: 5.0,
            min_separation: 1.0,
            max_pedestrians: 5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.car.validate()?;
        let k = &self.kinematics;
        if !(k.v_max > 0.0) || !(k.delta_v > 0.0) || !(k.delta_theta > 0.0) {
            return Err(SimError::Config(format!("invalid kinematics: {k:?}")));
        }
        if !(self.dt > 0.0) || self.max_steps == 0 {
            return Err(SimError::Config("dt and max_steps must be positive".into()));
        }
        if !(self.spawn_margin >= 0.0) || !(self.min_separation >= 0.0) {
            return Err(SimError::Config("spawn margins must be nonnegative".into()));
        }
        Ok(())
    }

    /// The car at the left end of its lane.
    pub fn initial_car(&self) -> CarState {
        CarState {
            position: Vec2::new(0.0, self.geometry.car_lane_center()),
            heading: 0.0,
            ..self.car
        }
    }

    /// Longitudinal `[lo, hi]` window pedestrians may spawn in.
    pub fn spawn_window(&self) -> (f64, f64) {
        let car = self.initial_car();
        (
            car.position.x + stopping_distance(&car) + self.spawn_margin,
            self.geometry.road_length - self.spawn_margin,
        )
    }
}

/// Places the car and `n` pedestrians for a fresh test.
///
/// Pedestrians land on either pavement with equal probability, ahead of the
/// car's stopping distance, standing still and facing along the road.
/// Pedestrians on the same pavement are at least `min_separation` apart.
pub fn spawn_initial<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    cfg: &WorldConfig,
) -> Result<WorldState> {
    if n == 0 || n > cfg.max_pedestrians {
        return Err(SimError::Contract(format!(
            "pedestrian count {n} outside [1, {}]",
            cfg.max_pedestrians
        )));
    }
    cfg.validate()?;
    let car = cfg.initial_car();
    let (lo, hi) = cfg.spawn_window();
    if hi < lo {
        return Err(SimError::Spawn(format!(
            "empty spawn window [{lo:.3}, {hi:.3}]"
        )));
    }
    let per_side = if cfg.min_separation > 0.0 {
        ((hi - lo) / cfg.min_separation).floor() as usize + 1
    } else {
        usize::MAX
    };
    if n > per_side.saturating_mul(2) {
        return Err(SimError::Spawn(format!(
            "{n} pedestrians do not fit in [{lo:.3}, {hi:.3}] at separation {}",
            cfg.min_separation
        )));
    }

    const MAX_ATTEMPTS: usize = 10_000;
    let mut pedestrians: Vec<PedestrianState> = Vec::with_capacity(n);
    let mut attempts = 0;
    while pedestrians.len() < n {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(SimError::Spawn(format!(
                "could not place {n} separated pedestrians after {MAX_ATTEMPTS} draws"
            )));
        }
        let side = if rng.gen_bool(0.5) {
            Side::Near
        } else {
            Side::Far
        };
        let x = rng.gen_range(lo..=hi);
        let (ylo, yhi) = cfg.geometry.pavement_band(side);
        let y = rng.gen_range(ylo..yhi);
        let clash = pedestrians.iter().any(|p| {
            cfg.geometry.region(p.position) == side.region()
                && (p.position.x - x).abs() < cfg.min_separation
        });
        if clash {
            continue;
        }
        pedestrians.push(PedestrianState {
            id: PedId(pedestrians.len() as u32),
            position: Vec2::new(x, y),
            heading: 0.0,
            speed: 0.0,
            crossing: None,
        });
    }
    Ok(WorldState {
        car,
        pedestrians,
        step_index: 0,
        dt: cfg.dt,
    })
}

fn longitudinal_gap(ped: &PedestrianState, car: &CarState) -> f64 {
    ped.position.x - car.position.x
}

/// True when the pedestrian stands in the car's lane ahead of it, far enough
/// away that the car could still stop.
pub fn in_precondition_zone(
    ped: &PedestrianState,
    car: &CarState,
    geometry: &RoadGeometry,
) -> bool {
    let gap = longitudinal_gap(ped, car);
    geometry.in_road(ped.position)
        && geometry.in_car_lane(ped.position)
        && gap >= 0.0
        && gap > stopping_distance(car)
}

/// In the car's lane ahead of it but inside its stopping distance.
pub fn is_unavoidable_intrusion(
    ped: &PedestrianState,
    car: &CarState,
    geometry: &RoadGeometry,
) -> bool {
    let gap = longitudinal_gap(ped, car);
    geometry.in_car_lane(ped.position) && gap >= 0.0 && gap <= stopping_distance(car)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestEvent {
    None,
    InterestingIntrusion,
    UnavoidableIntrusion,
    CarExited,
    Timeout,
}

impl TestEvent {
    pub fn name(self) -> &'static str {
        match self {
            TestEvent::None => "NONE",
            TestEvent::InterestingIntrusion => "INTERESTING_INTRUSION",
            TestEvent::UnavoidableIntrusion => "UNAVOIDABLE_INTRUSION",
            TestEvent::CarExited => "CAR_EXITED",
            TestEvent::Timeout => "TIMEOUT",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            TestEvent::None,
            TestEvent::InterestingIntrusion,
            TestEvent::UnavoidableIntrusion,
            TestEvent::CarExited,
            TestEvent::Timeout,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }

    pub fn is_terminal(self) -> bool {
        self != TestEvent::None
    }
}

/// Decides whether a test continues. The first matching rule wins:
/// avoidable intrusion, unavoidable intrusion, car off the road, step cap.
pub fn classify_test_event(
    state: &WorldState,
    geometry: &RoadGeometry,
    max_steps: u64,
) -> TestEvent {
    let car = &state.car;
    if state
        .pedestrians
        .iter()
        .any(|p| in_precondition_zone(p, car, geometry))
    {
        TestEvent::InterestingIntrusion
    } else if state
        .pedestrians
        .iter()
        .any(|p| is_unavoidable_intrusion(p, car, geometry))
    {
        TestEvent::UnavoidableIntrusion
    } else if car.position.x >= geometry.road_length {
        TestEvent::CarExited
    } else if state.step_index >= max_steps {
        TestEvent::Timeout
    } else {
        TestEvent::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ped_at(x: f64, y: f64) -> PedestrianState {
        PedestrianState {
            id: PedId(0),
            position: Vec2::new(x, y),
            heading: 0.0,
            speed: 0.0,
            crossing: None,
        }
    }

    fn world(peds: Vec<PedestrianState>) -> WorldState {
        let cfg = WorldConfig::default();
        WorldState {
            car: cfg.initial_car(),
            pedestrians: peds,
            step_index: 0,
            dt: 0.1,
        }
    }

    #[test]
    fn car_moves_linearly() {
        let mut s = world(vec![]);
        s.car.position.x = 0.0;
        let next = step(&s, &[], &Kinematics::default(), &RoadGeometry::default()).unwrap();
        assert_relative_eq!(next.car.position.x, 1.0);
        assert_eq!(next.step_index, 1);
    }

    #[test]
    fn pedestrian_noop_displacement() {
        let mut p = ped_at(5.0, 0.0);
        p.speed = 1.4;
        let s = world(vec![p]);
        let next = step(
            &s,
            &[(PedId(0), PedestrianAction::Noop)],
            &Kinematics::default(),
            &RoadGeometry::default(),
        )
        .unwrap();
        assert_relative_eq!(next.pedestrians[0].position.x, 5.14, epsilon = 1e-12);
        assert_relative_eq!(next.pedestrians[0].position.y, 0.0);
    }

    #[test]
    fn decel_at_rest_stays_at_rest() {
        let s = world(vec![ped_at(5.0, 1.0)]);
        let next = step(
            &s,
            &[(PedId(0), PedestrianAction::Decel)],
            &Kinematics::default(),
            &RoadGeometry::default(),
        )
        .unwrap();
        assert_eq!(next.pedestrians[0].speed, 0.0);
    }

    #[test]
    fn step_rejects_bad_action_maps() {
        let s = world(vec![ped_at(5.0, 1.0)]);
        let k = Kinematics::default();
        let g = RoadGeometry::default();
        assert!(matches!(step(&s, &[], &k, &g), Err(SimError::Contract(_))));
        let dup = [
            (PedId(0), PedestrianAction::Noop),
            (PedId(0), PedestrianAction::Accel),
        ];
        assert!(matches!(step(&s, &dup, &k, &g), Err(SimError::Contract(_))));
        let stranger = [
            (PedId(0), PedestrianAction::Noop),
            (PedId(7), PedestrianAction::Noop),
        ];
        assert!(matches!(
            step(&s, &stranger, &k, &g),
            Err(SimError::Contract(_))
        ));
        let mut zero_dt = s.clone();
        zero_dt.dt = 0.0;
        assert!(step(&zero_dt, &[(PedId(0), PedestrianAction::Noop)], &k, &g).is_err());
    }

    #[test]
    fn positions_clamp_to_corridor() {
        let g = RoadGeometry::default();
        let mut p = ped_at(98.9, 0.05);
        p.speed = 2.5;
        p.heading = -FRAC_PI_2 / 2.0;
        let next = advance_pedestrian(&p, PedestrianAction::Noop, &Kinematics::default(), &g, 1.0);
        assert!(next.position.x <= g.road_length && next.position.y >= 0.0);
    }

    #[test]
    fn stopping_distance_cases() {
        let car = |speed, max_decel, reaction_time| CarState {
            speed,
            max_decel,
            reaction_time,
            ..CarState::default()
        };
        assert_relative_eq!(stopping_distance(&car(10.0, 5.0, 1.0)), 20.0);
        assert_eq!(stopping_distance(&car(0.0, 5.0, 1.0)), 0.0);
        assert_relative_eq!(
            stopping_distance(&car(13.9, 6.0, 0.0)),
            13.9 * 13.9 / 12.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            stopping_distance(&car(13.9, 6.0, 0.0)),
            16.100833333,
            epsilon = 1e-8
        );
    }

    fn car_with_stop_20() -> CarState {
        CarState {
            position: Vec2::new(0.0, RoadGeometry::default().car_lane_center()),
            speed: 10.0,
            max_decel: 5.0,
            reaction_time: 1.0,
            heading: 0.0,
        }
    }

    #[test]
    fn precondition_zone_cases() {
        let g = RoadGeometry::default();
        let car = car_with_stop_20();
        let lane_y = g.car_lane_center();
        assert!(!in_precondition_zone(&ped_at(40.0, 1.0), &car, &g));
        assert!(in_precondition_zone(&ped_at(40.0, lane_y), &car, &g));
        assert!(!in_precondition_zone(&ped_at(5.0, lane_y), &car, &g));
        assert!(is_unavoidable_intrusion(&ped_at(5.0, lane_y), &car, &g));
        // Opposite lane is road but not the car's path.
        assert!(!in_precondition_zone(&ped_at(40.0, 7.0), &car, &g));
    }

    #[test]
    fn classification_priority() {
        let g = RoadGeometry::default();
        let lane_y = g.car_lane_center();
        let mut s = world(vec![ped_at(50.0, 1.0)]);
        s.car = car_with_stop_20();
        s.car.position.x = 30.0;
        assert_eq!(classify_test_event(&s, &g, 200), TestEvent::None);

        s.pedestrians[0].position = Vec2::new(70.0, lane_y);
        assert_eq!(
            classify_test_event(&s, &g, 200),
            TestEvent::InterestingIntrusion
        );

        let mut close = ped_at(35.0, lane_y);
        close.id = PedId(1);
        s.pedestrians.push(close);
        assert_eq!(
            classify_test_event(&s, &g, 200),
            TestEvent::InterestingIntrusion
        );

        s.pedestrians.remove(0);
        assert_eq!(
            classify_test_event(&s, &g, 200),
            TestEvent::UnavoidableIntrusion
        );

        // Both exit and timeout hold: exit wins.
        let mut done = world(vec![ped_at(50.0, 1.0)]);
        done.car.position.x = 99.5;
        done.step_index = 500;
        assert_eq!(classify_test_event(&done, &g, 200), TestEvent::CarExited);
        done.car.position.x = 10.0;
        assert_eq!(classify_test_event(&done, &g, 200), TestEvent::Timeout);
    }

    #[test]
    fn spawn_is_deterministic() {
        let cfg = WorldConfig::default();
        let a = spawn_initial(&mut ChaCha8Rng::seed_from_u64(9), 1, &cfg).unwrap();
        let b = spawn_initial(&mut ChaCha8Rng::seed_from_u64(9), 1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spawn_window_from_stopping_distance() {
        let mut cfg = WorldConfig::default();
        cfg.car.max_decel = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = spawn_initial(&mut rng, 3, &cfg).unwrap();
            for p in &s.pedestrians {
                assert!(p.position.x >= s.car.position.x + 25.0 && p.position.x <= 94.0);
                assert!(cfg.geometry.in_pavement(p.position));
                assert_eq!(p.speed, 0.0);
            }
        }
    }

    #[test]
    fn spawn_rejects_bad_counts() {
        let cfg = WorldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            spawn_initial(&mut rng, 0, &cfg),
            Err(SimError::Contract(_))
        ));
        assert!(matches!(
            spawn_initial(&mut rng, 6, &cfg),
            Err(SimError::Contract(_))
        ));

        let mut cramped = cfg.clone();
        cramped.max_pedestrians = 50;
        cramped.min_separation = 40.0;
        assert!(matches!(
            spawn_initial(&mut rng, 5, &cramped),
            Err(SimError::Spawn(_))
        ));
    }

    #[test]
    fn spawn_side_split_is_even() {
        let cfg = WorldConfig::default();
        let (mut near, mut total) = (0usize, 0usize);
        for seed in 0..10_000u64 {
            let s = spawn_initial(&mut ChaCha8Rng::seed_from_u64(seed), 5, &cfg).unwrap();
            for p in &s.pedestrians {
                total += 1;
                if cfg.geometry.region(p.position) == Region::PavementNear {
                    near += 1;
                }
            }
        }
        let frac = near as f64 / total as f64;
        assert!((frac - 0.5).abs() <= 0.02, "near fraction {frac}");
    }

    #[test]
    fn angle_helpers() {
        assert_relative_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI), PI);
        assert_relative_eq!(angle_diff(3.0, -3.0), 2.0 * PI - 6.0, epsilon = 1e-12);
    }
}
