use std::path::Path;
use std::sync::{Arc, RwLock};

use lowres_match::matcher::{MatchResult, Matcher};
use lowres_match::network::SpatialIndex;
use lowres_match::overrides::{apply_overrides, now_utc_seconds, resolve_pick, Decision, Override, OverrideLog};
use lowres_match::report::OutputCoords;
use lowres_match::run::{PreparedData, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error(transparent)]
    Core(#[from] lowres_match::Error),
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("no candidate of segment {seg_id:?} has node sequence {fingerprint:?}")]
    InvalidFingerprint { seg_id: String, fingerprint: Vec<String> },
}

/// Results with overrides applied, swapped whole so readers never see a
/// partially applied override.
#[derive(Debug)]
pub struct View {
    pub results: Vec<MatchResult>,
    pub history_len: usize,
}

/// Everything the service reads, plus the override log it appends to.
pub struct AppState {
    pub run: RunRecord,
    pub prepared: PreparedData,
    pub index: SpatialIndex,
    log: OverrideLog,
    view: RwLock<Arc<View>>,
    writer: tokio::sync::Mutex<Vec<Override>>,
}

impl AppState {
    /// Loads a run and its prepared inputs and replays `{run_dir}/overrides.jsonl`.
    pub fn open(run_file: &Path, prepared_dir: &Path, run_dir: &Path) -> Result<Self, StateError> {
        let run = RunRecord::load(run_file)?;
        let prepared = PreparedData::load(prepared_dir)?;
        Self::new(run, prepared, OverrideLog::in_dir(run_dir))
    }

    pub fn new(run: RunRecord, prepared: PreparedData, log: OverrideLog) -> Result<Self, StateError> {
        let index = SpatialIndex::build(&prepared.network);
        let history = log.read()?;
        let view = View {
            results: apply_overrides(&run.results, &history),
            history_len: history.len(),
        };
        Ok(AppState {
            run,
            prepared,
            index,
            log,
            view: RwLock::new(Arc::new(view)),
            writer: tokio::sync::Mutex::new(history),
        })
    }

    pub fn view(&self) -> Arc<View> {
        self.view.read().expect("view lock").clone()
    }

    pub fn coords(&self) -> OutputCoords<'_> {
        OutputCoords::new(self.prepared.projection.as_ref())
    }

    pub fn matcher(&self) -> Result<Matcher<'_>, StateError> {
        Ok(Matcher::new(&self.prepared.network, &self.index, self.run.k)?)
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    /// Validates, persists and applies one decision. Writes are serialized;
    /// the record is on disk before the new view becomes visible.
    pub async fn record(&self, seg_id: &str, decision: Decision, note: String) -> Result<Override, StateError> {
        let seg = self
            .prepared
            .measurements
            .get(seg_id)
            .ok_or_else(|| StateError::UnknownSegment(seg_id.to_string()))?;
        if !self.run.results.iter().any(|r| r.seg_id == seg_id) {
            return Err(StateError::UnknownSegment(seg_id.to_string()));
        }
        let resolved = match &decision {
            Decision::PickCandidate { fingerprint } => {
                let m = self.matcher()?;
                let pick = resolve_pick(&m, seg, self.run.criterion, fingerprint, &mut m.search_space());
                Some(pick.ok_or_else(|| StateError::InvalidFingerprint {
                    seg_id: seg_id.to_string(),
                    fingerprint: fingerprint.clone(),
                })?)
            }
            _ => None,
        };
        let record = Override {
            seg_id: seg_id.to_string(),
            decision,
            note,
            timestamp: now_utc_seconds(),
            resolved,
        };

        let mut history = self.writer.lock().await;
        self.log.append(&record)?;
        history.push(record.clone());
        let view = View {
            results: apply_overrides(&self.run.results, &history),
            history_len: history.len(),
        };
        *self.view.write().expect("view lock") = Arc::new(view);
        Ok(record)
    }

    pub async fn history(&self) -> Vec<Override> {
        self.writer.lock().await.clone()
    }
}
