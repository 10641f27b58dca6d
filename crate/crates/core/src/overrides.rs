//! Reviewer decisions and their append-only log.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, CriterionScores};
use crate::error::{Error, Result};
use crate::matcher::{select, MatchResult, MatchStatus, Matcher, PathRecord, SearchSpace, UnmatchedReason};
use crate::network::MeasurementSegment;

/// File name of the override log inside a run directory.
pub const LOG_FILE: &str = "overrides.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    AcceptChosen,
    /// Replace the chosen path by the candidate with this node-id sequence.
    PickCandidate { fingerprint: Vec<String> },
    MarkUnmatchable,
}

/// A picked candidate as regenerated at decision time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPick {
    pub path: PathRecord,
    pub scores: CriterionScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub seg_id: String,
    #[serde(flatten)]
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<ResolvedPick>,
}

pub fn now_utc_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Finds the regenerated candidate whose node ids equal `fingerprint`.
/// When both orientations yield that node sequence the one preferred under
/// `criterion` is returned.
pub fn resolve_pick(
    matcher: &Matcher,
    seg: &MeasurementSegment,
    criterion: CriterionId,
    fingerprint: &[String],
    space: &mut SearchSpace,
) -> Option<ResolvedPick> {
    let net = matcher.network();
    let hits: Vec<_> = matcher
        .evaluate(seg, space)
        .into_iter()
        .filter(|c| c.path.nodes.len() == fingerprint.len() && c.path.nodes.iter().zip(fingerprint).all(|(&n, id)| net.node_id(n) == id))
        .collect();
    select(criterion, &hits).map(|i| ResolvedPick {
        path: hits[i].path.record(net),
        scores: hits[i].scores,
    })
}

/// Append-only JSON-lines log of overrides.
#[derive(Clone, Debug)]
pub struct OverrideLog {
    path: PathBuf,
}

impl OverrideLog {
    pub fn in_dir(run_dir: &Path) -> Self {
        OverrideLog {
            path: run_dir.join(LOG_FILE),
        }
    }

    pub fn at(path: impl Into<PathBuf>) -> Self {
        OverrideLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record and syncs it to disk before returning.
    pub fn append(&self, record: &Override) -> Result<()> {
        let mut line = serde_json::to_vec(record).expect("override serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))
    }

    /// Every record in write order. A missing log is empty; a torn final line
    /// (interrupted append) is ignored.
    pub fn read(&self) -> Result<Vec<Override>> {
        let f = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        let lines: Vec<String> = BufReader::new(f)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(&self.path, e))?;
        let name = self.path.display().to_string();
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(rec) => out.push(rec),
                Err(_) if i + 1 == lines.len() => break,
                Err(e) => return Err(Error::schema(&name, Some(i as u64 + 1), e.to_string())),
            }
        }
        Ok(out)
    }
}

/// The active override per segment: the last one written.
pub fn effective(history: &[Override]) -> BTreeMap<&str, &Override> {
    let mut out = BTreeMap::new();
    for o in history {
        out.insert(o.seg_id.as_str(), o);
    }
    out
}

/// Results with the active overrides applied; overrides for unknown segments
/// are ignored.
pub fn apply_overrides(results: &[MatchResult], history: &[Override]) -> Vec<MatchResult> {
    let active = effective(history);
    results
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let Some(o) = active.get(r.seg_id.as_str()) else {
                return r;
            };
            match &o.decision {
                Decision::AcceptChosen => r.overridden = true,
                Decision::PickCandidate { .. } => {
                    if let Some(pick) = &o.resolved {
                        r.status = MatchStatus::Matched;
                        r.chosen = Some(pick.path.clone());
                        r.scores = Some(pick.scores);
                        r.overridden = true;
                    }
                }
                Decision::MarkUnmatchable => {
                    r.status = MatchStatus::Unmatched(UnmatchedReason::MarkedUnmatchable);
                    r.chosen = None;
                    r.scores = None;
                    r.overridden = true;
                }
            }
            r
        })
        .collect()
}
