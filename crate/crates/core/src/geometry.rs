//! Road centerline interpolation and segmentation.
//!
//! A test road is described by a handful of control points. The centerline
//! (the *spine*) is a centripetal Catmull–Rom spline through those points,
//! sampled densely; each sample carries the polyline arc length, the analytic
//! heading and the signed curvature (positive = turning left). The spine is
//! then cut into maximal straight / left / right runs.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate road: {0}")]
    DegenerateRoad(String),
    #[error("road point {index} ({x}, {y}) lies outside the {map_size} m map")]
    OutOfMap {
        index: usize,
        x: f64,
        y: f64,
        map_size: f64,
    },
    #[error("road self-intersects")]
    SelfIntersecting,
    #[error("invalid road file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid road file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Sparse control points of a single flat road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadPoints {
    pub points: Vec<[f64; 2]>,
    /// Width of one lane (the road carries two).
    pub lane_width: f64,
    /// Side of the square map the road must fit in.
    pub map_size: f64,
}

const MIN_POINT_GAP: f64 = 1e-9;

impl RoadPoints {
    pub fn new(points: Vec<[f64; 2]>, lane_width: f64, map_size: f64) -> Result<Self, GeometryError> {
        let road = RoadPoints {
            points,
            lane_width,
            map_size,
        };
        road.validate()?;
        Ok(road)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.points.len() < 3 {
            return Err(GeometryError::DegenerateRoad(format!(
                "need at least 3 road points, got {}",
                self.points.len()
            )));
        }
        if !(self.lane_width > 0.0) {
            return Err(GeometryError::DegenerateRoad(format!(
                "lane width must be positive, got {}",
                self.lane_width
            )));
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if dist(w[0], w[1]) <= MIN_POINT_GAP {
                return Err(GeometryError::DegenerateRoad(format!(
                    "road points {} and {} coincide",
                    i,
                    i + 1
                )));
            }
        }
        for (index, p) in self.points.iter().enumerate() {
            let inside = |v: f64| v.is_finite() && (0.0..=self.map_size).contains(&v);
            if !inside(p[0]) || !inside(p[1]) {
                return Err(GeometryError::OutOfMap {
                    index,
                    x: p[0],
                    y: p[1],
                    map_size: self.map_size,
                });
            }
        }
        Ok(())
    }

    /// Applies `f` to every control point, keeping lane width and map size.
    /// Does not re-validate.
    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> RoadPoints {
        RoadPoints {
            points: self.points.iter().map(|&p| f(p)).collect(),
            lane_width: self.lane_width,
            map_size: self.map_size,
        }
    }
}

/// On-disk road description: `{"id", "lane_width", "map_size", "road_points"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadFile {
    pub id: String,
    pub lane_width: f64,
    pub map_size: f64,
    pub road_points: Vec<[f64; 2]>,
}

impl RoadFile {
    pub fn new(id: impl Into<String>, road: &RoadPoints) -> Self {
        RoadFile {
            id: id.into(),
            lane_width: road.lane_width,
            map_size: road.map_size,
            road_points: road.points.clone(),
        }
    }

    pub fn road(&self) -> Result<RoadPoints, GeometryError> {
        RoadPoints::new(self.road_points.clone(), self.lane_width, self.map_size)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Maximum arc-length spacing between spine samples, meters.
    pub sampling_step: f64,
    /// |curvature| below this is "straight", 1/m.
    pub straight_curvature_threshold: f64,
    /// Curvature is clamped to ±1/min_radius.
    pub min_radius: f64,
    /// Runs shorter than this are absorbed by their longer neighbor, meters.
    pub min_segment_length: f64,
    /// Polygon areas below this are reported as zero, m².
    pub straight_area_epsilon: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            sampling_step: 1.0,
            straight_curvature_threshold: 0.005,
            min_radius: 2.0,
            min_segment_length: 5.0,
            straight_area_epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineSample {
    /// Arc length from the road start (cumulative polyline distance).
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// Radians in (−π, π].
    pub heading: f64,
    /// Signed, 1/m, positive = left.
    pub curvature: f64,
    /// Spline parameter: piece index plus local parameter in [0, 1].
    pub param: f64,
}

impl SpineSample {
    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpine {
    pub samples: Vec<SpineSample>,
    pub total_length: f64,
}

impl RoadSpine {
    /// Position at arc length `s` by linear interpolation between samples.
    /// Beyond either end the spine is extended along its end heading.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let samples = &self.samples;
        if s <= 0.0 {
            let first = &samples[0];
            return [first.x + s * first.heading.cos(), first.y + s * first.heading.sin()];
        }
        if s >= self.total_length {
            let last = samples.last().unwrap();
            let extra = s - self.total_length;
            return [last.x + extra * last.heading.cos(), last.y + extra * last.heading.sin()];
        }
        let i = self.index_before(s);
        let (a, b) = (&samples[i], &samples[i + 1]);
        let t = (s - a.s) / (b.s - a.s);
        [a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)]
    }

    /// Index of the last sample with `sample.s <= s` (clamped to a valid edge start).
    pub fn index_before(&self, s: f64) -> usize {
        let n = self.samples.len();
        let i = self.samples.partition_point(|p| p.s <= s);
        i.saturating_sub(1).min(n - 2)
    }

    /// Unit left normal at arc length `s`.
    pub fn left_normal_at(&self, s: f64) -> [f64; 2] {
        let i = self.index_before(s.clamp(0.0, self.total_length));
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        [-dy / len, dx / len]
    }
}

/// One cubic piece `p(u) = a u³ + b u² + c u + d`, `u ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
struct CubicPiece {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    d: [f64; 2],
}

impl CubicPiece {
    fn position(&self, u: f64) -> [f64; 2] {
        std::array::from_fn(|k| ((self.a[k] * u + self.b[k]) * u + self.c[k]) * u + self.d[k])
    }

    fn derivative(&self, u: f64) -> [f64; 2] {
        std::array::from_fn(|k| (3.0 * self.a[k] * u + 2.0 * self.b[k]) * u + self.c[k])
    }

    fn second_derivative(&self, u: f64) -> [f64; 2] {
        std::array::from_fn(|k| 6.0 * self.a[k] * u + 2.0 * self.b[k])
    }

    fn speed(&self, u: f64) -> f64 {
        let d = self.derivative(u);
        d[0].hypot(d[1])
    }
}

/// Centripetal Catmull–Rom spline through every control point.
///
/// End tangents come from phantom points reflected through the first and
/// last control points. Each piece is stored in Hermite/power form so that
/// derivatives are exact polynomials.
#[derive(Debug, Clone)]
pub struct CatmullRom {
    pieces: Vec<CubicPiece>,
}

impl CatmullRom {
    pub fn centripetal(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::DegenerateRoad("spline needs at least 2 points".into()));
        }
        let n = points.len();
        let mut ext = Vec::with_capacity(n + 2);
        ext.push(sub(scale(points[0], 2.0), points[1]));
        ext.extend_from_slice(points);
        ext.push(sub(scale(points[n - 1], 2.0), points[n - 2]));

        let pieces = ext
            .windows(4)
            .map(|w| {
                let [p0, p1, p2, p3] = [w[0], w[1], w[2], w[3]];
                let dt0 = dist(p0, p1).sqrt();
                let dt1 = dist(p1, p2).sqrt();
                let dt2 = dist(p2, p3).sqrt();
                if dt0 <= 0.0 || dt1 <= 0.0 || dt2 <= 0.0 {
                    return Err(GeometryError::DegenerateRoad("coincident control points".into()));
                }
                let m1: [f64; 2] = std::array::from_fn(|k| {
                    dt1 * ((p1[k] - p0[k]) / dt0 - (p2[k] - p0[k]) / (dt0 + dt1)
                        + (p2[k] - p1[k]) / dt1)
                });
                let m2: [f64; 2] = std::array::from_fn(|k| {
                    dt1 * ((p2[k] - p1[k]) / dt1 - (p3[k] - p1[k]) / (dt1 + dt2)
                        + (p3[k] - p2[k]) / dt2)
                });
                Ok(CubicPiece {
                    a: std::array::from_fn(|k| 2.0 * (p1[k] - p2[k]) + m1[k] + m2[k]),
                    b: std::array::from_fn(|k| 3.0 * (p2[k] - p1[k]) - 2.0 * m1[k] - m2[k]),
                    c: m1,
                    d: p1,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CatmullRom { pieces })
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    fn locate(&self, param: f64) -> (usize, f64) {
        let last = self.pieces.len() - 1;
        let p = param.clamp(0.0, self.pieces.len() as f64);
        let i = (p.floor() as usize).min(last);
        (i, p - i as f64)
    }

    /// Position at global parameter `param ∈ [0, piece_count]`.
    pub fn position(&self, param: f64) -> [f64; 2] {
        let (i, u) = self.locate(param);
        self.pieces[i].position(u)
    }

    pub fn derivative(&self, param: f64) -> [f64; 2] {
        let (i, u) = self.locate(param);
        self.pieces[i].derivative(u)
    }

    pub fn second_derivative(&self, param: f64) -> [f64; 2] {
        let (i, u) = self.locate(param);
        self.pieces[i].second_derivative(u)
    }
}

// 5-point Gauss–Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683,
    0.538_469_310_105_683,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
    0.236_926_885_056_189,
];

fn arc_length(piece: &CubicPiece, u0: f64, u1: f64) -> f64 {
    let half = 0.5 * (u1 - u0);
    let mid = 0.5 * (u1 + u0);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&x, w)| w * piece.speed(mid + half * x))
        .sum::<f64>()
        * half
}

/// Local parameters of a piece spaced evenly by arc length, at most `step` apart.
/// Includes `u = 0`, excludes `u = 1`.
fn even_arc_params(piece: &CubicPiece, step: f64) -> Vec<f64> {
    const TABLE: usize = 256;
    let mut cumulative = Vec::with_capacity(TABLE + 1);
    cumulative.push(0.0);
    for k in 0..TABLE {
        let (u0, u1) = (k as f64 / TABLE as f64, (k + 1) as f64 / TABLE as f64);
        let prev = *cumulative.last().unwrap();
        cumulative.push(prev + arc_length(piece, u0, u1));
    }
    let total = cumulative[TABLE];
    let count = ((total / step) * (1.0 + 1e-9)).ceil().max(1.0) as usize;
    let mut params = Vec::with_capacity(count);
    params.push(0.0);
    for j in 1..count {
        let target = total * j as f64 / count as f64;
        let k = cumulative.partition_point(|&c| c <= target).clamp(1, TABLE) - 1;
        let (u0, l0) = (k as f64 / TABLE as f64, cumulative[k]);
        let width = 1.0 / TABLE as f64;
        let mut u = u0 + width * (target - l0) / (cumulative[k + 1] - l0).max(f64::MIN_POSITIVE);
        for _ in 0..3 {
            let err = l0 + arc_length(piece, u0, u) - target;
            let speed = piece.speed(u);
            if speed <= 1e-12 {
                break;
            }
            u = (u - err / speed).clamp(u0, u0 + width);
        }
        params.push(u);
    }
    params
}

fn make_sample(spline: &CatmullRom, param: f64, max_curvature: f64) -> SpineSample {
    let p = spline.position(param);
    let d = spline.derivative(param);
    let dd = spline.second_derivative(param);
    let speed = d[0].hypot(d[1]);
    let (heading, curvature) = if speed > 1e-12 {
        let k = (d[0] * dd[1] - d[1] * dd[0]) / speed.powi(3);
        (d[1].atan2(d[0]), k.clamp(-max_curvature, max_curvature))
    } else {
        // Cusp: fall back to the secant direction.
        let q = spline.position(param + 1e-6);
        ((q[1] - p[1]).atan2(q[0] - p[0]), 0.0)
    };
    SpineSample {
        s: 0.0,
        x: p[0],
        y: p[1],
        heading: normalize_angle(heading),
        curvature,
        param,
    }
}

/// Interpolates road points into a densely sampled spine.
pub fn interpolate_spine(road: &RoadPoints, config: &GeometryConfig) -> Result<RoadSpine, GeometryError> {
    road.validate()?;
    let spline = CatmullRom::centripetal(&road.points)?;
    let max_curvature = 1.0 / config.min_radius;
    let mut samples = Vec::new();
    for (i, piece) in spline.pieces.iter().enumerate() {
        for u in even_arc_params(piece, config.sampling_step) {
            samples.push(make_sample(&spline, i as f64 + u, max_curvature));
        }
    }
    samples.push(make_sample(&spline, spline.piece_count() as f64, max_curvature));

    let mut s = 0.0;
    for i in 1..samples.len() {
        s += dist(samples[i - 1].xy(), samples[i].xy());
        samples[i].s = s;
    }
    Ok(RoadSpine {
        samples,
        total_length: s,
    })
}

/// True if two non-adjacent stretches of the spine come within `2 * lane_width`.
///
/// Stretches count as non-adjacent when more than `π * lane_width` of road
/// separates them: a curve that bends back on itself closer than that must
/// have turned through more than a half circle.
pub fn self_intersects(spine: &RoadSpine, lane_width: f64) -> bool {
    let clearance = 2.0 * lane_width;
    let separation = PI * lane_width;
    let samples = &spine.samples;
    if samples.len() < 2 {
        return false;
    }
    let cell = clearance.max(1e-6);
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for e in 0..samples.len() - 1 {
        let (a, b) = (samples[e].xy(), samples[e + 1].xy());
        let (ka, kb) = (key(a), key(b));
        for gx in ka.0.min(kb.0)..=ka.0.max(kb.0) {
            for gy in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                grid.entry((gx, gy)).or_default().push(e);
            }
        }
    }
    for e in 0..samples.len() - 1 {
        let (a, b) = (samples[e].xy(), samples[e + 1].xy());
        let (ka, kb) = (key(a), key(b));
        for gx in ka.0.min(kb.0) - 1..=ka.0.max(kb.0) + 1 {
            for gy in ka.1.min(kb.1) - 1..=ka.1.max(kb.1) + 1 {
                let Some(edges) = grid.get(&(gx, gy)) else { continue };
                for &f in edges {
                    if f <= e || samples[f].s - samples[e + 1].s <= separation {
                        continue;
                    }
                    let (c, d) = (samples[f].xy(), samples[f + 1].xy());
                    if segment_distance(a, b, c, d) < clearance {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Straight,
    LeftTurn,
    RightTurn,
}

impl SegmentKind {
    pub fn is_turn(self) -> bool {
        self != SegmentKind::Straight
    }

    fn classify(curvature: f64, threshold: f64) -> Self {
        if curvature.abs() < threshold {
            SegmentKind::Straight
        } else if curvature > 0.0 {
            SegmentKind::LeftTurn
        } else {
            SegmentKind::RightTurn
        }
    }
}

/// A maximal run of spine samples `start_index..=end_index`.
///
/// Length, angle and area are measured up to the next segment's first
/// sample (or the last sample), so segment lengths add up to the spine
/// length exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub kind: SegmentKind,
    pub start_index: usize,
    pub end_index: usize,
    pub length: f64,
    /// Absolute net heading change, degrees.
    pub turn_angle: f64,
    /// `length / turn_angle` (radians); `None` for straights.
    pub radius: Option<f64>,
    pub chord_area: f64,
}

impl RoadSegment {
    /// Index of the last sample covered by this segment's measurements.
    pub fn closing_index(&self, spine: &RoadSpine) -> usize {
        (self.end_index + 1).min(spine.samples.len() - 1)
    }
}

/// Splits a spine into straight / left / right segments.
pub fn segment_spine(spine: &RoadSpine, config: &GeometryConfig) -> Vec<RoadSegment> {
    let samples = &spine.samples;
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    // (kind, start, end) runs
    let mut runs: Vec<(SegmentKind, usize, usize)> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let kind = SegmentKind::classify(sample.curvature, config.straight_curvature_threshold);
        match runs.last_mut() {
            Some(run) if run.0 == kind => run.2 = i,
            _ => runs.push((kind, i, i)),
        }
    }

    let run_length = |runs: &[(SegmentKind, usize, usize)], r: usize| {
        let (_, a, b) = runs[r];
        samples[(b + 1).min(n - 1)].s - samples[a].s
    };
    while runs.len() > 1 {
        let shortest = (0..runs.len())
            .filter(|&r| run_length(&runs, r) < config.min_segment_length)
            .min_by(|&p, &q| run_length(&runs, p).total_cmp(&run_length(&runs, q)));
        let Some(r) = shortest else { break };
        let target = match (r.checked_sub(1), (r + 1 < runs.len()).then_some(r + 1)) {
            (Some(l), Some(rt)) => {
                if run_length(&runs, rt) > run_length(&runs, l) {
                    rt
                } else {
                    l
                }
            }
            (Some(l), None) => l,
            (None, Some(rt)) => rt,
            (None, None) => break,
        };
        let kind = runs[target].0;
        let (lo, hi) = (r.min(target), r.max(target));
        runs[lo] = (kind, runs[lo].1, runs[hi].2);
        runs.remove(hi);
        // coalesce equal neighbours
        let mut merged: Vec<(SegmentKind, usize, usize)> = Vec::with_capacity(runs.len());
        for run in runs.drain(..) {
            match merged.last_mut() {
                Some(last) if last.0 == run.0 => last.2 = run.2,
                _ => merged.push(run),
            }
        }
        runs = merged;
    }

    runs.into_iter()
        .map(|(kind, start, end)| measure_segment(spine, kind, start, end, config))
        .collect()
}

fn measure_segment(
    spine: &RoadSpine,
    kind: SegmentKind,
    start: usize,
    end: usize,
    config: &GeometryConfig,
) -> RoadSegment {
    let samples = &spine.samples;
    let close = (end + 1).min(samples.len() - 1);
    let length = samples[close].s - samples[start].s;
    let net: f64 = (start..close)
        .map(|i| normalize_angle(samples[i + 1].heading - samples[i].heading))
        .sum();
    let angle_rad = net.abs();
    let radius = kind.is_turn().then(|| length / angle_rad.max(f64::MIN_POSITIVE));
    let chord_area = if kind.is_turn() {
        let polygon: Vec<[f64; 2]> = samples[start..=close].iter().map(SpineSample::xy).collect();
        let area = shoelace_area(&polygon);
        if area < config.straight_area_epsilon {
            0.0
        } else {
            area
        }
    } else {
        0.0
    };
    RoadSegment {
        kind,
        start_index: start,
        end_index: end,
        length,
        turn_angle: angle_rad.to_degrees(),
        radius,
        chord_area,
    }
}

/// Absolute area of the closed polygon through `points` (last joined to first).
pub fn shoelace_area(points: &[[f64; 2]]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let origin = points[0];
    let twice: f64 = (0..points.len())
        .map(|i| {
            let a = sub(points[i], origin);
            let b = sub(points[(i + 1) % points.len()], origin);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    0.5 * twice.abs()
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale(a: [f64; 2], k: f64) -> [f64; 2] {
    [a[0] * k, a[1] * k]
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn segment_distance(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn road(points: Vec<[f64; 2]>) -> RoadPoints {
        RoadPoints::new(points, 4.0, 1000.0).unwrap()
    }

    fn arc_points(cx: f64, cy: f64, r: f64, from_deg: f64, to_deg: f64, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| {
                let a = (from_deg + (to_deg - from_deg) * k as f64 / (n - 1) as f64).to_radians();
                [cx + r * a.cos(), cy + r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn collinear_points_give_straight_spine() {
        let spine = interpolate_spine(
            &road(vec![[0.0, 500.0], [50.0, 500.0], [100.0, 500.0]]),
            &GeometryConfig::default(),
        )
        .unwrap();
        assert!((spine.total_length - 100.0).abs() < 0.01);
        assert!(spine.samples.iter().all(|s| s.curvature.abs() < 1e-6));
        assert_eq!(spine.samples[0].s, 0.0);
        assert!(spine.samples.windows(2).all(|w| w[1].s > w[0].s && w[1].s - w[0].s <= 1.0));
    }

    #[test]
    fn half_circle_has_reciprocal_radius_curvature() {
        // counter-clockwise → left turn
        let spine = interpolate_spine(
            &road(arc_points(500.0, 500.0, 20.0, -90.0, 90.0, 19)),
            &GeometryConfig::default(),
        )
        .unwrap();
        let mid = &spine.samples[spine.samples.len() / 2];
        assert!((mid.curvature - 0.05).abs() < 0.05 * 0.05, "curvature {}", mid.curvature);
    }

    #[test]
    fn two_points_are_degenerate() {
        let err = RoadPoints::new(vec![[0.0, 0.0], [1.0, 1.0]], 4.0, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateRoad(_)));
        let err = RoadPoints::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]], 4.0, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateRoad(_)));
    }

    #[test]
    fn points_outside_map_rejected() {
        let err = RoadPoints::new(vec![[0.0, 0.0], [50.0, 0.0], [150.0, 0.0]], 4.0, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::OutOfMap { index: 2, .. }));
    }

    #[test]
    fn straight_road_does_not_self_intersect() {
        let spine = interpolate_spine(
            &road(vec![[0.0, 500.0], [100.0, 500.0], [200.0, 500.0]]),
            &GeometryConfig::default(),
        )
        .unwrap();
        assert!(!self_intersects(&spine, 4.0));
    }

    #[test]
    fn figure_eight_self_intersects() {
        let pts = vec![
            [400.0, 400.0],
            [500.0, 500.0],
            [600.0, 600.0],
            [650.0, 550.0],
            [600.0, 500.0],
            [500.0, 500.0 + 1e-3],
            [400.0, 600.0],
            [350.0, 550.0],
        ];
        let spine = interpolate_spine(&road(pts), &GeometryConfig::default()).unwrap();
        assert!(self_intersects(&spine, 4.0));
    }

    fn hairpin(gap: f64) -> RoadPoints {
        let r = gap / 2.0;
        let mut pts: Vec<[f64; 2]> = (0..6).map(|k| [400.0 - 10.0 * (5 - k) as f64, 500.0]).collect();
        pts.extend(arc_points(400.0, 500.0 + r, r, -90.0, 90.0, 7).into_iter().skip(1));
        pts.extend((1..6).map(|k| [400.0 - 10.0 * k as f64, 500.0 + gap]));
        road(pts)
    }

    #[test]
    fn hairpin_with_close_legs_self_intersects() {
        let spine = interpolate_spine(&hairpin(5.0), &GeometryConfig::default()).unwrap();
        // brute force: the two legs are 5 m apart, far below 2 × 4 m.
        let legs_close = spine.samples.iter().any(|p| {
            spine
                .samples
                .iter()
                .any(|q| q.s - p.s > PI * 4.0 && dist(p.xy(), q.xy()) < 8.0)
        });
        assert!(legs_close);
        assert!(self_intersects(&spine, 4.0));
        let wide = interpolate_spine(&hairpin(30.0), &GeometryConfig::default()).unwrap();
        assert!(!self_intersects(&wide, 4.0));
    }

    #[test]
    fn straight_road_is_one_segment() {
        let spine = interpolate_spine(
            &road(vec![[0.0, 500.0], [50.0, 500.0], [100.0, 500.0]]),
            &GeometryConfig::default(),
        )
        .unwrap();
        let segs = segment_spine(&spine, &GeometryConfig::default());
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].kind, SegmentKind::Straight);
        assert!((segs[0].length - 100.0).abs() < 0.01);
        assert!(segs[0].turn_angle < 1e-6);
        assert_eq!(segs[0].radius, None);
    }

    #[test]
    fn quarter_arc_between_straights() {
        let r = 30.0;
        let mut pts: Vec<[f64; 2]> = (0..26).map(|k| [300.0 + 2.0 * k as f64, 300.0]).collect();
        pts.extend(arc_points(350.0, 300.0 + r, r, -90.0, 0.0, 19).into_iter().skip(1));
        pts.extend((1..26).map(|k| [350.0 + r, 300.0 + r + 2.0 * k as f64]));
        let spine = interpolate_spine(&road(pts), &GeometryConfig::default()).unwrap();
        let segs = segment_spine(&spine, &GeometryConfig::default());
        let kinds: Vec<_> = segs.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, [SegmentKind::Straight, SegmentKind::LeftTurn, SegmentKind::Straight]);
        let turn = &segs[1];
        assert!((turn.turn_angle - 90.0).abs() <= 2.0, "angle {}", turn.turn_angle);
        let radius = turn.radius.unwrap();
        assert!((radius - r).abs() <= 0.05 * r, "radius {radius}");
        let total: f64 = segs.iter().map(|s| s.length).sum();
        assert!((total - spine.total_length).abs() <= 1e-9 * spine.total_length);
    }

    #[test]
    fn shoelace_of_unit_square() {
        assert_eq!(shoelace_area(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), 1.0);
        assert_eq!(shoelace_area(&[[0.0, 0.0], [1.0, 0.0]]), 0.0);
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
