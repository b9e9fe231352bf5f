//! The 18 static road features: attributes, segment statistics and
//! diversity (area between each segment and its chord).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    interpolate_spine, segment_spine, self_intersects, GeometryConfig, GeometryError, RoadPoints,
    RoadSegment, RoadSpine, SegmentKind,
};

pub const FEATURE_NAMES: [&str; 18] = [
    "direct_distance",
    "length",
    "num_l_turns",
    "num_r_turns",
    "num_straights",
    "total_angle",
    "median_angle",
    "std_angle",
    "max_angle",
    "min_angle",
    "mean_angle",
    "median_radius",
    "std_radius",
    "max_radius",
    "min_radius",
    "mean_radius",
    "full_road_diversity",
    "mean_road_diversity",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub direct_distance: f64,
    pub length: f64,
    pub num_l_turns: f64,
    pub num_r_turns: f64,
    pub num_straights: f64,
    pub total_angle: f64,
    pub median_angle: f64,
    pub std_angle: f64,
    pub max_angle: f64,
    pub min_angle: f64,
    pub mean_angle: f64,
    pub median_radius: f64,
    pub std_radius: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    pub mean_radius: f64,
    pub full_road_diversity: f64,
    pub mean_road_diversity: f64,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 18] {
        [
            self.direct_distance,
            self.length,
            self.num_l_turns,
            self.num_r_turns,
            self.num_straights,
            self.total_angle,
            self.median_angle,
            self.std_angle,
            self.max_angle,
            self.min_angle,
            self.mean_angle,
            self.median_radius,
            self.std_radius,
            self.max_radius,
            self.min_radius,
            self.mean_radius,
            self.full_road_diversity,
            self.mean_road_diversity,
        ]
    }

    pub fn from_array(v: [f64; 18]) -> Self {
        FeatureVector {
            direct_distance: v[0],
            length: v[1],
            num_l_turns: v[2],
            num_r_turns: v[3],
            num_straights: v[4],
            total_angle: v[5],
            median_angle: v[6],
            std_angle: v[7],
            max_angle: v[8],
            min_angle: v[9],
            mean_angle: v[10],
            median_radius: v[11],
            std_radius: v[12],
            max_radius: v[13],
            min_radius: v[14],
            mean_radius: v[15],
            full_road_diversity: v[16],
            mean_road_diversity: v[17],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.to_array()[i])
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        FEATURE_NAMES
            .iter()
            .zip(self.to_array())
            .map(|(n, v)| (n.to_string(), v))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Option<Self> {
        let mut v = [0.0; 18];
        for (slot, name) in v.iter_mut().zip(FEATURE_NAMES) {
            *slot = *map.get(name)?;
        }
        Some(Self::from_array(v))
    }
}

/// Table 1 fields: distance, length, segment counts and total angle.
pub fn extract_attributes(spine: &RoadSpine, segments: &[RoadSegment], out: &mut FeatureVector) {
    let first = spine.samples.first().map(|s| s.xy()).unwrap_or_default();
    let last = spine.samples.last().map(|s| s.xy()).unwrap_or_default();
    out.direct_distance = (last[0] - first[0]).hypot(last[1] - first[1]);
    out.length = spine.total_length;
    let count = |k: SegmentKind| segments.iter().filter(|s| s.kind == k).count() as f64;
    out.num_l_turns = count(SegmentKind::LeftTurn);
    out.num_r_turns = count(SegmentKind::RightTurn);
    out.num_straights = count(SegmentKind::Straight);
    out.total_angle = segments
        .iter()
        .filter(|s| s.kind.is_turn())
        .map(|s| s.turn_angle)
        .sum();
}

/// Median, population std, max, min and mean. All zero for an empty slice.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Summary {
        median,
        std: var.sqrt(),
        max: sorted[n - 1],
        min: sorted[0],
        mean,
    }
}

/// Table 2 fields: angle and radius statistics over turn segments only.
pub fn extract_statistics(segments: &[RoadSegment], out: &mut FeatureVector) {
    let turns = || segments.iter().filter(|s| s.kind.is_turn());
    let angles: Vec<f64> = turns().map(|s| s.turn_angle).collect();
    let radii: Vec<f64> = turns().filter_map(|s| s.radius).collect();
    let a = summarize(&angles);
    let r = summarize(&radii);
    out.median_angle = a.median;
    out.std_angle = a.std;
    out.max_angle = a.max;
    out.min_angle = a.min;
    out.mean_angle = a.mean;
    out.median_radius = r.median;
    out.std_radius = r.std;
    out.max_radius = r.max;
    out.min_radius = r.min;
    out.mean_radius = r.mean;
}

/// Table 3 fields: summed and mean segment chord areas.
pub fn extract_diversity(segments: &[RoadSegment], out: &mut FeatureVector) {
    let full: f64 = segments.iter().map(|s| s.chord_area).sum();
    out.full_road_diversity = full;
    out.mean_road_diversity = if segments.is_empty() {
        0.0
    } else {
        full / segments.len() as f64
    };
}

/// Spine, segments and feature vector of one road.
#[derive(Debug, Clone)]
pub struct RoadAnalysis {
    pub spine: RoadSpine,
    pub segments: Vec<RoadSegment>,
    pub features: FeatureVector,
}

pub fn analyze_road(road: &RoadPoints, config: &GeometryConfig) -> Result<RoadAnalysis, GeometryError> {
    let spine = interpolate_spine(road, config)?;
    if self_intersects(&spine, road.lane_width) {
        return Err(GeometryError::SelfIntersecting);
    }
    let segments = segment_spine(&spine, config);
    let features = features_of(&spine, &segments);
    Ok(RoadAnalysis {
        spine,
        segments,
        features,
    })
}

pub fn features_of(spine: &RoadSpine, segments: &[RoadSegment]) -> FeatureVector {
    let mut features = FeatureVector::default();
    extract_attributes(spine, segments, &mut features);
    extract_statistics(segments, &mut features);
    extract_diversity(segments, &mut features);
    features
}

pub fn extract_features(road: &RoadPoints, config: &GeometryConfig) -> Result<FeatureVector, GeometryError> {
    Ok(analyze_road(road, config)?.features)
}

#[derive(Debug, Error)]
pub enum FeatureCsvError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("feature CSV line {line}: {message}")]
    Format { line: usize, message: String },
}

/// One row of the feature matrix CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub test_id: String,
    pub values: Vec<f64>,
    /// `"safe"`, `"unsafe"`, or `None` when unlabeled.
    pub label: Option<String>,
}

/// A feature matrix as read from CSV: arbitrary named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn from_vectors<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a FeatureVector, Option<&'a str>)>,
    ) -> Self {
        FeatureTable {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .into_iter()
                .map(|(id, fv, label)| FeatureRow {
                    test_id: id.to_string(),
                    values: fv.to_array().to_vec(),
                    label: label.map(str::to_string),
                })
                .collect(),
        }
    }

    /// Writes `test_id,<features...>,label`. Numbers use the shortest
    /// representation that parses back to the identical `f64`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FeatureCsvError> {
        writeln!(w, "test_id,{},label", self.feature_names.join(","))?;
        for row in &self.rows {
            write!(w, "{}", row.test_id)?;
            for v in &row.values {
                write!(w, ",{v:?}")?;
            }
            writeln!(w, ",{}", row.label.as_deref().unwrap_or(""))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FeatureCsvError> {
        let mut lines = r.lines().enumerate();
        let Some((_, header)) = lines.next() else {
            return Err(FeatureCsvError::Format {
                line: 1,
                message: "missing header".into(),
            });
        };
        let header = header?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 3 || cols[0] != "test_id" || *cols.last().unwrap() != "label" {
            return Err(FeatureCsvError::Format {
                line: 1,
                message: "header must start with test_id and end with label".into(),
            });
        }
        let feature_names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != cols.len() {
                return Err(FeatureCsvError::Format {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", cols.len(), fields.len()),
                });
            }
            let values = fields[1..fields.len() - 1]
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| FeatureCsvError::Format {
                        line: i + 1,
                        message: format!("not a number: {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let label = fields[fields.len() - 1];
            rows.push(FeatureRow {
                test_id: fields[0].to_string(),
                values,
                label: (!label.is_empty()).then(|| label.to_string()),
            });
        }
        Ok(FeatureTable { feature_names, rows })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), FeatureCsvError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, FeatureCsvError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
