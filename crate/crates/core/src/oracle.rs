//! Desk-scale test oracle.
//!
//! Roads come from a seeded rejection sampler over straight and circular-arc
//! primitives. A kinematic driver then tries to keep the right lane: it plans
//! a speed profile from the friction-limited cornering speed
//! `v = rf · sqrt(mu · r · g)`, tracks the lane center with pure pursuit, and
//! is bound by a physical lateral grip limit. Planning above that limit makes
//! the car run wide; leaving the lane labels the test unsafe.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{analyze_road, FeatureVector};
use crate::geometry::{
    interpolate_spine, self_intersects, GeometryConfig, GeometryError, RoadPoints, RoadSpine,
};
use crate::{derive_seed, Label};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("turn radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("invalid driver configuration: {0}")]
    InvalidConfig(String),
    #[error("no valid road after {0} attempts")]
    GenerationExhausted(usize),
    #[error("dataset size must be at least 1")]
    EmptyDataset,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dataset file: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    /// Friction coefficient the driver assumes when planning corner speeds.
    pub mu: f64,
    pub g: f64,
    /// Multiplies planned corner speed; also divides the base lookahead.
    pub risk_factor: f64,
    pub v_max: f64,
    pub a_accel: f64,
    pub a_brake: f64,
    /// Base pure-pursuit lookahead, meters.
    pub lookahead: f64,
    /// Extra lookahead per m/s of speed.
    pub lookahead_speed_gain: f64,
    pub timestep: f64,
    pub lane_width: f64,
    pub vehicle_width: f64,
    pub wheelbase: f64,
    /// Steering angle limit, radians.
    pub max_steering: f64,
    /// Steering actuator slew limit, radians per second.
    pub max_steering_rate: f64,
    /// Lateral acceleration the tyres can actually deliver, in units of g.
    pub tire_grip: f64,
    /// Share of the vehicle width outside the lane that counts as failure.
    pub oob_fraction: f64,
    /// Drives longer than this are cut off.
    pub max_duration: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            mu: 0.6,
            g: 9.81,
            risk_factor: 1.0,
            v_max: 30.0,
            a_accel: 3.0,
            a_brake: 6.0,
            lookahead: 8.0,
            lookahead_speed_gain: 0.2,
            timestep: 0.05,
            lane_width: 4.0,
            vehicle_width: 2.0,
            wheelbase: 2.7,
            max_steering: 0.6,
            max_steering_rate: 0.15,
            tire_grip: 1.4,
            oob_fraction: 0.5,
            max_duration: 1200.0,
        }
    }
}

impl DriverConfig {
    pub fn with_risk_factor(risk_factor: f64) -> Self {
        DriverConfig {
            risk_factor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidConfig(m.to_string()));
        if !(self.mu > 0.0 && self.mu <= 2.0) {
            return bad("mu must lie in (0, 2]");
        }
        if !(0.5..=2.5).contains(&self.risk_factor) {
            return bad("risk_factor must lie in [0.5, 2.5]");
        }
        if !(self.timestep > 0.0 && self.timestep <= 0.1) {
            return bad("timestep must lie in (0, 0.1]");
        }
        if !(self.oob_fraction > 0.0 && self.oob_fraction <= 1.0) {
            return bad("oob_fraction must lie in (0, 1]");
        }
        let positive = [
            (self.g, "g"),
            (self.v_max, "v_max"),
            (self.a_accel, "a_accel"),
            (self.lookahead, "lookahead"),
            (self.lane_width, "lane_width"),
            (self.vehicle_width, "vehicle_width"),
            (self.wheelbase, "wheelbase"),
            (self.max_steering, "max_steering"),
            (self.max_steering_rate, "max_steering_rate"),
            (self.tire_grip, "tire_grip"),
            (self.max_duration, "max_duration"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.a_brake >= 0.0) || !(self.lookahead_speed_gain >= 0.0) {
            return bad("a_brake and lookahead_speed_gain must be non-negative");
        }
        Ok(())
    }
}

/// Cornering speed for a turn of the given radius, capped at `v_max`.
pub fn safe_speed(radius: f64, cfg: &DriverConfig) -> Result<f64, OracleError> {
    if !(radius > 0.0) {
        return Err(OracleError::NonPositiveRadius(radius));
    }
    Ok((cfg.risk_factor * (cfg.mu * radius * cfg.g).sqrt()).min(cfg.v_max))
}

/// Per-sample target speeds: cornering limit, then braking and acceleration
/// feasibility passes. The first sample is `start_speed`.
fn plan_profile(spine: &RoadSpine, cfg: &DriverConfig, start_speed: f64, braking: bool) -> Vec<f64> {
    let samples = &spine.samples;
    let mut v: Vec<f64> = samples
        .iter()
        .map(|p| {
            let k = p.curvature.abs();
            if k < 1e-9 {
                cfg.v_max
            } else {
                safe_speed(1.0 / k, cfg).unwrap_or(cfg.v_max)
            }
        })
        .collect();
    if let Some(first) = v.first_mut() {
        *first = start_speed.min(*first).max(0.0);
        if !braking {
            *first = start_speed;
        }
    }
    if braking {
        for i in (0..v.len().saturating_sub(1)).rev() {
            let ds = samples[i + 1].s - samples[i].s;
            let reachable = (v[i + 1].powi(2) + 2.0 * cfg.a_brake * ds).sqrt();
            if v[i] > reachable {
                v[i] = reachable;
            }
        }
    }
    for i in 0..v.len().saturating_sub(1) {
        let ds = samples[i + 1].s - samples[i].s;
        let reachable = (v[i].powi(2) + 2.0 * cfg.a_accel * ds).sqrt();
        if v[i + 1] > reachable {
            v[i + 1] = reachable;
        }
    }
    v
}

/// Target speed per spine sample, starting from standstill.
pub fn plan_speed_profile(spine: &RoadSpine, cfg: &DriverConfig) -> Vec<f64> {
    plan_profile(spine, cfg, 0.0, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
    pub throttle: f64,
    pub brake: f64,
    /// Signed distance from the road centerline, positive = left.
    #[serde(default)]
    pub lateral_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub label: Label,
    /// Simulated drive time, seconds.
    pub duration: f64,
    pub max_abs_lateral_offset: f64,
    pub trace: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub road: RoadPoints,
    pub features: Option<FeatureVector>,
    pub outcome: Option<TestOutcome>,
}

impl TestCase {
    pub fn label(&self) -> Option<Label> {
        self.outcome.as_ref().map(|o| o.label)
    }
}

/// Share of the vehicle's width outside the right lane `[-lane_width, 0]`.
pub fn out_of_bound_fraction(lateral_offset: f64, lane_width: f64, vehicle_width: f64) -> f64 {
    let half = 0.5 * vehicle_width;
    let over_center = (lateral_offset + half).max(0.0);
    let over_edge = (-lane_width - (lateral_offset - half)).max(0.0);
    ((over_center + over_edge) / vehicle_width).min(1.0)
}

/// Starting conditions that deviate from a standstill launch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveOptions {
    pub initial_speed: f64,
    pub braking: bool,
    pub record_trace: bool,
}

impl Default for DriveOptions {
    fn default() -> Self {
        DriveOptions {
            initial_speed: 0.0,
            braking: true,
            record_trace: true,
        }
    }
}

pub fn simulate_drive(road: &RoadPoints, cfg: &DriverConfig) -> Result<TestOutcome, OracleError> {
    simulate_drive_with(road, cfg, &DriveOptions::default())
}

pub fn simulate_drive_with(
    road: &RoadPoints,
    cfg: &DriverConfig,
    options: &DriveOptions,
) -> Result<TestOutcome, OracleError> {
    cfg.validate()?;
    let spine = interpolate_spine(road, &GeometryConfig::default())?;
    if self_intersects(&spine, road.lane_width) {
        return Err(GeometryError::SelfIntersecting.into());
    }
    let cfg = DriverConfig {
        lane_width: road.lane_width,
        ..*cfg
    };
    Ok(drive_spine(&spine, &cfg, options))
}

struct Projection {
    s: f64,
    offset: f64,
    edge: usize,
}

fn project(spine: &RoadSpine, p: [f64; 2], hint: usize) -> Projection {
    let samples = &spine.samples;
    let lo = hint.saturating_sub(10);
    let hi = (hint + 60).min(samples.len() - 1);
    let mut best = (f64::INFINITY, 0.0, 0.0, hint.min(samples.len() - 2));
    for e in lo..hi {
        let (a, b) = (&samples[e], &samples[e + 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = (((p[0] - a.x) * dx + (p[1] - a.y) * dy) / len2).clamp(0.0, 1.0);
        let (qx, qy) = (a.x + t * dx, a.y + t * dy);
        let d = (p[0] - qx).hypot(p[1] - qy);
        if d < best.0 {
            let cross = dx * (p[1] - a.y) - dy * (p[0] - a.x);
            let len = len2.sqrt();
            best = (d, a.s + t * len, d.copysign(cross), e);
        }
    }
    Projection {
        s: best.1,
        offset: best.2,
        edge: best.3,
    }
}

fn interpolate_profile(spine: &RoadSpine, profile: &[f64], s: f64) -> f64 {
    if s >= spine.total_length {
        return *profile.last().unwrap();
    }
    let i = spine.index_before(s.max(0.0));
    let (a, b) = (&spine.samples[i], &spine.samples[i + 1]);
    let t = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
    profile[i] + t * (profile[i + 1] - profile[i])
}

fn drive_spine(spine: &RoadSpine, cfg: &DriverConfig, options: &DriveOptions) -> TestOutcome {
    let profile = plan_profile(spine, cfg, options.initial_speed, options.braking);
    let lane_center = -0.5 * cfg.lane_width;
    let first = spine.samples[0];
    let n0 = spine.left_normal_at(0.0);
    let mut x = first.x + lane_center * n0[0];
    let mut y = first.y + lane_center * n0[1];
    let mut heading = first.heading;
    let mut steering: f64 = 0.0;
    let mut speed = options.initial_speed;
    let mut t = 0.0;
    let mut hint = 0;
    let mut trace = Vec::new();
    let mut max_offset: f64 = 0.0;
    let mut label = Label::Safe;
    let dt = cfg.timestep;
    // Cautious drivers do not look further ahead than the base distance.
    let lookahead_base = cfg.lookahead / cfg.risk_factor.max(1.0);
    let grip = cfg.tire_grip * cfg.g;

    loop {
        let proj = project(spine, [x, y], hint);
        hint = proj.edge;
        let offset = proj.offset;
        max_offset = max_offset.max(offset.abs());

        // Pure pursuit towards the lane center, `lookahead` ahead by arc length.
        let ld = lookahead_base + cfg.lookahead_speed_gain * speed;
        let ahead = proj.s + ld;
        let c = spine.point_at(ahead);
        let n = spine.left_normal_at(ahead);
        let goal = [c[0] + lane_center * n[0], c[1] + lane_center * n[1]];
        let (gx, gy) = (goal[0] - x, goal[1] - y);
        let gd2 = (gx * gx + gy * gy).max(1e-9);
        let lateral = -heading.sin() * gx + heading.cos() * gy;
        let commanded = 2.0 * lateral / gd2;
        let wanted = (cfg.wheelbase * commanded).atan().clamp(-cfg.max_steering, cfg.max_steering);
        let slew = cfg.max_steering_rate * dt;
        steering += (wanted - steering).clamp(-slew, slew);

        let target = interpolate_profile(spine, &profile, proj.s + 1.0);
        let min_accel = if options.braking { -cfg.a_brake } else { 0.0 };
        let accel = ((target - speed) / dt).clamp(min_accel, cfg.a_accel);
        let (throttle, brake) = if accel > 0.0 {
            (accel / cfg.a_accel, 0.0)
        } else if accel < 0.0 && cfg.a_brake > 0.0 {
            (0.0, -accel / cfg.a_brake)
        } else {
            (0.0, 0.0)
        };

        let state = VehicleState {
            t,
            x,
            y,
            heading,
            speed,
            steering,
            throttle,
            brake,
            lateral_offset: offset,
        };
        if options.record_trace {
            trace.push(state);
        }
        if out_of_bound_fraction(offset, cfg.lane_width, cfg.vehicle_width) >= cfg.oob_fraction {
            label = Label::Unsafe;
            break;
        }
        if proj.s >= spine.total_length - 0.5 || t >= cfg.max_duration {
            break;
        }

        // Tyres deliver at most `grip` of lateral acceleration.
        let mut path_curvature = steering.tan() / cfg.wheelbase;
        if speed > 1e-6 {
            let limit = grip / (speed * speed);
            path_curvature = path_curvature.clamp(-limit, limit);
        }
        let yaw = speed * path_curvature * dt;
        let mid = heading + 0.5 * yaw;
        x += speed * mid.cos() * dt;
        y += speed * mid.sin() * dt;
        heading = wrap(heading + yaw);
        speed = (speed + accel * dt).max(0.0);
        t += dt;
    }
    if !options.record_trace {
        // keep the final instant so duration and verdict stay checkable
        let proj = project(spine, [x, y], hint);
        trace.push(VehicleState {
            t,
            x,
            y,
            heading,
            speed,
            steering,
            throttle: 0.0,
            brake: 0.0,
            lateral_offset: proj.offset,
        });
    }
    TestOutcome {
        label,
        duration: t.max(dt),
        max_abs_lateral_offset: max_offset,
        trace,
    }
}

fn wrap(a: f64) -> f64 {
    crate::geometry::normalize_angle(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorBounds {
    pub map_size: f64,
    pub lane_width: f64,
    pub min_primitives: usize,
    pub max_primitives: usize,
    pub straight_length: (f64, f64),
    pub arc_radius: (f64, f64),
    /// Degrees.
    pub arc_angle: (f64, f64),
    /// Roads keep at least this distance from the map border.
    pub margin: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorBounds {
    fn default() -> Self {
        GeneratorBounds {
            map_size: 250.0,
            lane_width: 4.0,
            min_primitives: 2,
            max_primitives: 12,
            straight_length: (20.0, 100.0),
            arc_radius: (7.0, 47.0),
            arc_angle: (15.0, 270.0),
            margin: 8.0,
            max_attempts: 1000,
        }
    }
}

impl GeneratorBounds {
    pub fn validate(&self) -> Result<(), OracleError> {
        let ok = self.map_size > 2.0 * self.margin
            && self.lane_width > 0.0
            && self.min_primitives >= 1
            && self.min_primitives <= self.max_primitives
            && 0.0 < self.straight_length.0
            && self.straight_length.0 <= self.straight_length.1
            && 0.0 < self.arc_radius.0
            && self.arc_radius.0 <= self.arc_radius.1
            && 0.0 < self.arc_angle.0
            && self.arc_angle.0 <= self.arc_angle.1
            && self.max_attempts >= 1;
        if ok {
            Ok(())
        } else {
            Err(OracleError::InvalidConfig("inconsistent generator bounds".into()))
        }
    }
}

/// One building block of a generated road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Straight { length: f64 },
    /// Positive angle turns left.
    Arc { radius: f64, angle_deg: f64 },
}

fn sample_primitives(rng: &mut ChaCha8Rng, bounds: &GeneratorBounds) -> Vec<Primitive> {
    let count = rng.gen_range(bounds.min_primitives..=bounds.max_primitives);
    let mut out: Vec<Primitive> = Vec::with_capacity(count);
    for _ in 0..count {
        let prev_straight = matches!(out.last(), Some(Primitive::Straight { .. }));
        if !prev_straight && rng.gen_bool(0.5) {
            out.push(Primitive::Straight {
                length: rng.gen_range(bounds.straight_length.0..=bounds.straight_length.1),
            });
        } else {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            out.push(Primitive::Arc {
                radius: rng.gen_range(bounds.arc_radius.0..=bounds.arc_radius.1),
                angle_deg: sign * rng.gen_range(bounds.arc_angle.0..=bounds.arc_angle.1),
            });
        }
    }
    if !out.iter().any(|p| matches!(p, Primitive::Arc { .. })) {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        out.push(Primitive::Arc {
            radius: rng.gen_range(bounds.arc_radius.0..=bounds.arc_radius.1),
            angle_deg: sign * rng.gen_range(bounds.arc_angle.0..=bounds.arc_angle.1),
        });
    }
    out
}

/// Control points tracing `primitives` from `start` with initial `heading`.
pub fn primitives_to_points(start: [f64; 2], heading: f64, primitives: &[Primitive]) -> Vec<[f64; 2]> {
    const STRAIGHT_SPACING: f64 = 10.0;
    const ARC_SPACING: f64 = 4.0;
    const ARC_MAX_STEP: f64 = 15.0 * PI / 180.0;
    let mut points = vec![start];
    let (mut x, mut y, mut h) = (start[0], start[1], heading);
    for p in primitives {
        match *p {
            Primitive::Straight { length } => {
                let n = (length / STRAIGHT_SPACING).ceil().max(1.0) as usize;
                let step = length / n as f64;
                for _ in 0..n {
                    x += step * h.cos();
                    y += step * h.sin();
                    points.push([x, y]);
                }
            }
            Primitive::Arc { radius, angle_deg } => {
                let total = angle_deg.to_radians();
                let side = total.signum();
                let max_step = (ARC_SPACING / radius).min(ARC_MAX_STEP);
                let n = (total.abs() / max_step).ceil().max(1.0) as usize;
                let cx = x - side * radius * h.sin();
                let cy = y + side * radius * h.cos();
                let a0 = (y - cy).atan2(x - cx);
                for k in 1..=n {
                    let a = a0 + total * k as f64 / n as f64;
                    points.push([cx + radius * a.cos(), cy + radius * a.sin()]);
                }
                h += total;
                [x, y] = *points.last().unwrap();
            }
        }
    }
    points
}

/// Seeded random valid road.
pub fn generate_road(seed: u64, bounds: &GeneratorBounds) -> Result<RoadPoints, OracleError> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = GeometryConfig::default();
    let lo = bounds.margin;
    let hi = bounds.map_size - bounds.margin;
    for _ in 0..bounds.max_attempts {
        let primitives = sample_primitives(&mut rng, bounds);
        let start = [rng.gen_range(lo..hi), rng.gen_range(lo..hi)];
        let heading = rng.gen_range(-PI..PI);
        let points = primitives_to_points(start, heading, &primitives);
        if points.iter().any(|p| p[0] < lo || p[0] > hi || p[1] < lo || p[1] > hi) {
            continue;
        }
        let Ok(road) = RoadPoints::new(points, bounds.lane_width, bounds.map_size) else {
            continue;
        };
        let Ok(spine) = interpolate_spine(&road, &geometry) else {
            continue;
        };
        let inside = spine
            .samples
            .iter()
            .all(|p| (0.0..=bounds.map_size).contains(&p.x) && (0.0..=bounds.map_size).contains(&p.y));
        if inside && !self_intersects(&spine, bounds.lane_width) {
            return Ok(road);
        }
    }
    Err(OracleError::GenerationExhausted(bounds.max_attempts))
}

/// Generates, analyses and labels one test.
pub fn build_case(
    id: String,
    seed: u64,
    cfg: &DriverConfig,
    bounds: &GeneratorBounds,
    record_trace: bool,
) -> Result<TestCase, OracleError> {
    let road = generate_road(seed, bounds)?;
    let analysis = analyze_road(&road, &GeometryConfig::default())?;
    let cfg = DriverConfig {
        lane_width: road.lane_width,
        ..*cfg
    };
    let options = DriveOptions {
        record_trace,
        ..DriveOptions::default()
    };
    let outcome = drive_spine(&analysis.spine, &cfg, &options);
    Ok(TestCase {
        id,
        road,
        features: Some(analysis.features),
        outcome: Some(outcome),
    })
}

/// Options for [`build_dataset_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub bounds: GeneratorBounds,
    pub record_trace: bool,
    /// Index of the first test; ids and seeds continue from here.
    pub first_index: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            bounds: GeneratorBounds::default(),
            record_trace: true,
            first_index: 0,
        }
    }
}

/// `n` labeled tests with features; ids `test_00000`, `test_00001`, ...
pub fn build_dataset(n: usize, cfg: &DriverConfig, seed: u64) -> Result<Vec<TestCase>, OracleError> {
    build_dataset_with(n, cfg, seed, &DatasetOptions::default())
}

pub fn build_dataset_with(
    n: usize,
    cfg: &DriverConfig,
    seed: u64,
    options: &DatasetOptions,
) -> Result<Vec<TestCase>, OracleError> {
    if n == 0 {
        return Err(OracleError::EmptyDataset);
    }
    cfg.validate()?;
    (options.first_index..options.first_index + n)
        .into_par_iter()
        .map(|i| {
            build_case(
                format!("test_{i:05}"),
                derive_seed(seed, i as u64),
                cfg,
                &options.bounds,
                options.record_trace,
            )
        })
        .collect()
}

/// Unsafe share of a labeled dataset.
pub fn unsafe_fraction(cases: &[TestCase]) -> f64 {
    let labeled: Vec<Label> = cases.iter().filter_map(TestCase::label).collect();
    if labeled.is_empty() {
        return 0.0;
    }
    labeled.iter().filter(|l| l.is_unsafe()).count() as f64 / labeled.len() as f64
}

/// One entry of the labeled-dataset JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub road_points: Vec<[f64; 2]>,
    pub lane_width: f64,
    #[serde(default = "default_map_size")]
    pub map_size: f64,
    pub features: BTreeMap<String, f64>,
    pub label: Label,
    pub duration_s: f64,
    pub trace: Vec<VehicleState>,
}

fn default_map_size() -> f64 {
    GeneratorBounds::default().map_size
}

impl DatasetRecord {
    pub fn from_case(case: &TestCase) -> Result<Self, OracleError> {
        let outcome = case
            .outcome
            .as_ref()
            .ok_or_else(|| OracleError::Format(format!("test {} has no outcome", case.id)))?;
        let features = case
            .features
            .ok_or_else(|| OracleError::Format(format!("test {} has no features", case.id)))?;
        Ok(DatasetRecord {
            id: case.id.clone(),
            road_points: case.road.points.clone(),
            lane_width: case.road.lane_width,
            map_size: case.road.map_size,
            features: features.to_map(),
            label: outcome.label,
            duration_s: outcome.duration,
            trace: outcome.trace.clone(),
        })
    }

    pub fn into_case(self) -> Result<TestCase, OracleError> {
        let features = FeatureVector::from_map(&self.features)
            .ok_or_else(|| OracleError::Format(format!("test {} lacks feature columns", self.id)))?;
        let max_abs_lateral_offset = self
            .trace
            .iter()
            .map(|s| s.lateral_offset.abs())
            .fold(0.0, f64::max);
        Ok(TestCase {
            road: RoadPoints {
                points: self.road_points,
                lane_width: self.lane_width,
                map_size: self.map_size,
            },
            id: self.id,
            features: Some(features),
            outcome: Some(TestOutcome {
                label: self.label,
                duration: self.duration_s,
                max_abs_lateral_offset,
                trace: self.trace,
            }),
        })
    }
}

pub fn write_dataset(cases: &[TestCase], path: impl AsRef<Path>) -> Result<(), OracleError> {
    let records = cases
        .iter()
        .map(DatasetRecord::from_case)
        .collect::<Result<Vec<_>, _>>()?;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, &records)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<TestCase>, OracleError> {
    let file = std::fs::File::open(path)?;
    let records: Vec<DatasetRecord> = serde_json::from_reader(std::io::BufReader::new(file))?;
    records.into_iter().map(DatasetRecord::into_case).collect()
}
