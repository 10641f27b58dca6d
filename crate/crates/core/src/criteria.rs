//! The four scores of a candidate path against a measurement segment.
//!
//! * LC: length gap, anchors included (meters)
//! * RC: mean absolute turn at interior nodes (radians)
//! * SC: mean absolute angle between each link and the segment (radians)
//! * AC: unsigned area between the path and the segment's line (m²)
//!
//! Lower is better for all four.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{absolute_area, angle_sequence, Point};
use crate::matcher::CandidatePath;
use crate::network::{MeasurementSegment, StreetNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionId {
    Lc,
    Rc,
    Sc,
    Ac,
}

impl CriterionId {
    pub const ALL: [CriterionId; 4] = [CriterionId::Lc, CriterionId::Rc, CriterionId::Sc, CriterionId::Ac];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::Lc => "lc",
            CriterionId::Rc => "rc",
            CriterionId::Sc => "sc",
            CriterionId::Ac => "ac",
        }
    }

    /// Default worst-N extract size: 50 for the length and area criteria, 300 for the angular ones.
    pub fn default_worst_n(self) -> usize {
        match self {
            CriterionId::Lc | CriterionId::Ac => 50,
            CriterionId::Rc | CriterionId::Sc => 300,
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for CriterionId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lc" => Ok(CriterionId::Lc),
            "rc" => Ok(CriterionId::Rc),
            "sc" => Ok(CriterionId::Sc),
            "ac" => Ok(CriterionId::Ac),
            _ => Err(format!("unknown criterion {s:?} (expected lc, rc, sc or ac)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub lc: f64,
    pub rc: f64,
    pub sc: f64,
    pub ac: f64,
}

impl CriterionScores {
    pub fn get(&self, c: CriterionId) -> f64 {
        match c {
            CriterionId::Lc => self.lc,
            CriterionId::Rc => self.rc,
            CriterionId::Sc => self.sc,
            CriterionId::Ac => self.ac,
        }
    }
}

/// Mean of absolute values, 0 for an empty slice. The running form returns
/// exactly `|x|` for a constant sequence, so equal-angle paths tie exactly.
fn mean_abs(values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .fold(0.0, |m, (i, v)| m + (v.abs() - m) / (i + 1) as f64)
}

fn path_points(net: &StreetNetwork, cand: &CandidatePath) -> Vec<Point> {
    cand.nodes.iter().map(|&n| net.point(n)).collect()
}

pub fn score_lc(cand: &CandidatePath, seg: &MeasurementSegment) -> f64 {
    (cand.anchor_start_m + cand.path_length_m + cand.anchor_end_m - seg.length_m).abs()
}

pub fn score_rc(net: &StreetNetwork, cand: &CandidatePath, seg: &MeasurementSegment) -> Result<f64> {
    let seq = angle_sequence(&path_points(net, cand), &cand.orientation.base(seg)?)?;
    Ok(mean_abs(&seq.running))
}

pub fn score_sc(net: &StreetNetwork, cand: &CandidatePath, seg: &MeasurementSegment) -> Result<f64> {
    let seq = angle_sequence(&path_points(net, cand), &cand.orientation.base(seg)?)?;
    Ok(mean_abs(&seq.straight))
}

/// Area between the path proper and the segment line; anchor gaps are left to LC.
pub fn score_ac(net: &StreetNetwork, cand: &CandidatePath, seg: &MeasurementSegment) -> Result<f64> {
    absolute_area(&path_points(net, cand), &cand.orientation.base(seg)?)
}

pub fn score_all(net: &StreetNetwork, cand: &CandidatePath, seg: &MeasurementSegment) -> Result<CriterionScores> {
    let points = path_points(net, cand);
    let base = cand.orientation.base(seg)?;
    let seq = angle_sequence(&points, &base)?;
    Ok(CriterionScores {
        lc: score_lc(cand, seg),
        rc: mean_abs(&seq.running),
        sc: mean_abs(&seq.straight),
        ac: absolute_area(&points, &base)?,
    })
}
