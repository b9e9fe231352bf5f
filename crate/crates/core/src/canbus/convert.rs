use serde::{Deserialize, Serialize};

use super::{encode_signal, CanDatabase, CanError, PlaybackRecord, RangePolicy};
use crate::oracle::{TestCase, VehicleState};

/// 50 Hz.
pub const DEFAULT_SAMPLE_PERIOD_MS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceField {
    T,
    X,
    Y,
    Heading,
    Speed,
    Steering,
    Throttle,
    Brake,
    LateralOffset,
}

impl TraceField {
    pub fn read(self, s: &VehicleState) -> f64 {
        match self {
            TraceField::T => s.t,
            TraceField::X => s.x,
            TraceField::Y => s.y,
            TraceField::Heading => s.heading,
            TraceField::Speed => s.speed,
            TraceField::Steering => s.steering,
            TraceField::Throttle => s.throttle,
            TraceField::Brake => s.brake,
            TraceField::LateralOffset => s.lateral_offset,
        }
    }
}

fn unit_factor() -> f64 {
    1.0
}

/// Physical signal value = trace field * `factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    pub field: TraceField,
    pub message: String,
    pub signal: String,
    #[serde(default = "unit_factor")]
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalMapping {
    pub entries: Vec<MappingEntry>,
}

impl Default for SignalMapping {
    /// Speed in km/h, road-wheel angle in degrees, pedals in percent, onto
    /// the built-in database.
    fn default() -> Self {
        let entry = |field, message: &str, signal: &str, factor| MappingEntry {
            field,
            message: message.into(),
            signal: signal.into(),
            factor,
        };
        SignalMapping {
            entries: vec![
                entry(TraceField::Speed, "VEHICLE_DYNAMICS", "speed_kmh", 3.6),
                entry(TraceField::Steering, "STEERING", "angle_deg", 180.0 / std::f64::consts::PI),
                entry(TraceField::Throttle, "PEDALS", "throttle_pct", 100.0),
                entry(TraceField::Brake, "PEDALS", "brake_pct", 100.0),
            ],
        }
    }
}

impl SignalMapping {
    /// Resolves every entry to `(message index, signal index)`.
    fn resolve(&self, db: &CanDatabase) -> Result<Vec<(usize, usize)>, CanError> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !e.factor.is_finite() {
                return Err(CanError::Mapping(format!("factor of {}.{} is not finite", e.message, e.signal)));
            }
            let m = db
                .messages
                .iter()
                .position(|m| m.name == e.message)
                .ok_or_else(|| CanError::Mapping(format!("unknown message {}", e.message)))?;
            let s = db.messages[m]
                .signals
                .iter()
                .position(|s| s.name == e.signal)
                .ok_or_else(|| CanError::Mapping(format!("message {} has no signal {}", e.message, e.signal)))?;
            if seen.contains(&(m, s)) {
                return Err(CanError::Mapping(format!("{}.{} is mapped twice", e.message, e.signal)));
            }
            seen.push((m, s));
        }
        Ok(seen)
    }

    pub fn validate(&self, db: &CanDatabase) -> Result<(), CanError> {
        self.resolve(db).map(|_| ())
    }
}

/// Resamples the test's trace every `sample_period_ms` (zero-order hold)
/// and emits one frame per mapped message per instant, ordered by
/// timestamp then frame id. Trace times map to `round(t * 1000)` ms.
pub fn convert_trace(
    case: &TestCase,
    db: &CanDatabase,
    mapping: &SignalMapping,
    sample_period_ms: u32,
    policy: RangePolicy,
) -> Result<Vec<PlaybackRecord>, CanError> {
    let targets = mapping.resolve(db)?;
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    if sample_period_ms == 0 {
        return Err(CanError::Mapping("sample period must be positive".into()));
    }
    let trace = case.outcome.as_ref().map(|o| &o.trace[..]).unwrap_or(&[]);
    if trace.is_empty() {
        return Err(CanError::Mapping(format!("test {} has no trace", case.id)));
    }
    let ms: Vec<i64> = trace.iter().map(|s| (s.t * 1000.0).round() as i64).collect();
    if ms[0] < 0 || ms.windows(2).any(|w| w[1] < w[0]) || ms[ms.len() - 1] > u32::MAX as i64 {
        return Err(CanError::Mapping(format!("trace times of {} are not ascending within range", case.id)));
    }

    let mut messages: Vec<usize> = targets.iter().map(|&(m, _)| m).collect();
    messages.sort_by_key(|&m| db.messages[m].frame_id());
    messages.dedup();
    let groups: Vec<(usize, Vec<usize>)> = messages
        .into_iter()
        .map(|m| (m, (0..targets.len()).filter(|&e| targets[e].0 == m).collect()))
        .collect();

    let period = sample_period_ms as i64;
    let instants = (ms[ms.len() - 1] - ms[0]) / period + 1;
    let mut records = Vec::with_capacity(instants as usize * groups.len());
    let mut j = 0;
    for k in 0..instants {
        let now = ms[0] + k * period;
        while j + 1 < trace.len() && ms[j + 1] <= now {
            j += 1;
        }
        let state = &trace[j];
        for (m, entries) in &groups {
            let msg = &db.messages[*m];
            let mut frame = [0u8; 8];
            for &e in entries {
                let entry = &mapping.entries[e];
                let def = &msg.signals[targets[e].1];
                encode_signal(def, entry.field.read(state) * entry.factor, &mut frame, policy)?;
            }
            records.push(PlaybackRecord {
                timestamp_ms: now as u32,
                can_id: msg.frame_id(),
                data: frame[..msg.dlc as usize].to_vec(),
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canbus::decode_signal;
    use crate::geometry::RoadPoints;
    use crate::oracle::TestOutcome;
    use crate::Label;

    fn state(t: f64, speed: f64) -> VehicleState {
        VehicleState {
            t,
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed,
            steering: -0.05,
            throttle: 0.4,
            brake: 0.0,
            lateral_offset: 0.0,
        }
    }

    fn case(trace: Vec<VehicleState>) -> TestCase {
        TestCase {
            id: "t".into(),
            road: RoadPoints {
                points: vec![],
                lane_width: 4.0,
                map_size: 200.0,
            },
            features: None,
            outcome: Some(TestOutcome {
                label: Label::Safe,
                duration: trace.last().map_or(0.0, |s| s.t),
                max_abs_lateral_offset: 0.0,
                trace,
            }),
        }
    }

    #[test]
    fn ten_seconds_at_100ms_three_messages() {
        let trace = (0..=200).map(|i| state(i as f64 * 0.05, 10.0)).collect();
        let r = convert_trace(&case(trace), &CanDatabase::default(), &SignalMapping::default(), 100, RangePolicy::Clamp).unwrap();
        assert_eq!(r.len(), 303);
        assert_eq!(r[3].timestamp_ms, 100);
        assert_eq!(r.iter().map(|r| r.can_id).take(4).collect::<Vec<_>>(), [0x100, 0x101, 0x102, 0x100]);
        assert!(r.windows(2).all(|w| (w[0].timestamp_ms, w[0].can_id) < (w[1].timestamp_ms, w[1].can_id)));
    }

    #[test]
    fn zero_order_hold_and_decode_back() {
        let trace = vec![state(0.0, 10.0), state(0.05, 20.0), state(0.1, 30.0)];
        let db = CanDatabase::default();
        let r = convert_trace(&case(trace), &db, &SignalMapping::default(), 20, RangePolicy::Clamp).unwrap();
        let speed = db.message("VEHICLE_DYNAMICS").unwrap().signal("speed_kmh").unwrap();
        let speeds: Vec<f64> = r
            .iter()
            .filter(|r| r.can_id == 0x100)
            .map(|r| decode_signal(speed, &r.data).unwrap())
            .collect();
        // instants 0, 20, 40, 60, 80, 100 ms
        let want = [36.0, 36.0, 36.0, 72.0, 72.0, 108.0];
        assert_eq!(speeds.len(), want.len());
        for (a, b) in speeds.iter().zip(want) {
            assert!((a - b).abs() <= 0.005, "{a} vs {b}");
        }
        let angle = db.message("STEERING").unwrap().signal("angle_deg").unwrap();
        let first = r.iter().find(|r| r.can_id == 0x101).unwrap();
        assert!((decode_signal(angle, &first.data).unwrap() - (-0.05f64).to_degrees()).abs() <= 0.05);
    }

    #[test]
    fn empty_mapping_gives_no_records() {
        let r = convert_trace(
            &case(vec![]),
            &CanDatabase::default(),
            &SignalMapping { entries: vec![] },
            20,
            RangePolicy::Clamp,
        )
        .unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn bad_mappings() {
        let db = CanDatabase::default();
        let mut m = SignalMapping::default();
        m.entries[0].signal = "nope".into();
        assert!(matches!(m.validate(&db), Err(CanError::Mapping(_))));
        let mut m = SignalMapping::default();
        m.entries[1] = m.entries[0].clone();
        assert!(matches!(m.validate(&db), Err(CanError::Mapping(_))));
        assert!(convert_trace(&case(vec![]), &db, &SignalMapping::default(), 20, RangePolicy::Clamp).is_err());
    }

    #[test]
    fn mapping_json_rejects_unknown_keys() {
        let ok: SignalMapping =
            serde_json::from_str(r#"{"entries":[{"field":"lateral_offset","message":"M","signal":"s"}]}"#).unwrap();
        assert_eq!(ok.entries[0].factor, 1.0);
        assert!(serde_json::from_str::<SignalMapping>(r#"{"entries":[],"extra":1}"#).is_err());
    }
}
