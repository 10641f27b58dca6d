//! Run configuration: defaults, the flat config file and the thread override.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::error::{Error, Result};
use crate::matcher::DEFAULT_K;
use crate::network::Coords;

/// Environment variable that overrides the configured worker thread count.
pub const THREADS_ENV: &str = "LOWRES_MATCH_THREADS";

/// Consolidation tolerance used when none is configured, in meters.
pub const DEFAULT_TOLERANCE_M: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub criterion: CriterionId,
    pub consolidation_tolerance: f64,
    pub coords: Coords,
    pub worst_n_lc: usize,
    pub worst_n_rc: usize,
    pub worst_n_sc: usize,
    pub worst_n_ac: usize,
    /// Worker threads for matching; `None` uses one per core.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_K,
            criterion: CriterionId::Rc,
            consolidation_tolerance: DEFAULT_TOLERANCE_M,
            coords: Coords::Metric,
            worst_n_lc: CriterionId::Lc.default_worst_n(),
            worst_n_rc: CriterionId::Rc.default_worst_n(),
            worst_n_sc: CriterionId::Sc.default_worst_n(),
            worst_n_ac: CriterionId::Ac.default_worst_n(),
            threads: None,
        }
    }
}

/// Settings read from a config file; every key is optional.
///
/// ```text
/// k = 4
/// criterion = "rc"
/// tolerance = 4.0
/// coords = "lonlat"
/// threads = 8
/// worst_n_rc = 300
/// ```
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k: Option<usize>,
    pub criterion: Option<CriterionId>,
    pub tolerance: Option<f64>,
    pub coords: Option<Coords>,
    pub threads: Option<usize>,
    pub worst_n_lc: Option<usize>,
    pub worst_n_rc: Option<usize>,
    pub worst_n_sc: Option<usize>,
    pub worst_n_ac: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::schema(name, None, e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

impl RunConfig {
    /// Overlays the keys present in `file`.
    pub fn apply_file(&mut self, file: &ConfigFile) {
        let ConfigFile {
            k,
            criterion,
            tolerance,
            coords,
            threads,
            worst_n_lc,
            worst_n_rc,
            worst_n_sc,
            worst_n_ac,
        } = file.clone();
        self.k = k.unwrap_or(self.k);
        self.criterion = criterion.unwrap_or(self.criterion);
        self.consolidation_tolerance = tolerance.unwrap_or(self.consolidation_tolerance);
        self.coords = coords.unwrap_or(self.coords);
        self.threads = threads.or(self.threads);
        self.worst_n_lc = worst_n_lc.unwrap_or(self.worst_n_lc);
        self.worst_n_rc = worst_n_rc.unwrap_or(self.worst_n_rc);
        self.worst_n_sc = worst_n_sc.unwrap_or(self.worst_n_sc);
        self.worst_n_ac = worst_n_ac.unwrap_or(self.worst_n_ac);
    }

    /// Applies a value of the threads environment variable, if set.
    pub fn apply_threads_env(&mut self, value: Option<&str>) -> Result<()> {
        let Some(v) = value else { return Ok(()) };
        let v = v.trim();
        if v.is_empty() || v.eq_ignore_ascii_case("auto") {
            self.threads = None;
            return Ok(());
        }
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                self.threads = Some(n);
                Ok(())
            }
            _ => Err(Error::schema(THREADS_ENV, None, format!("expected a positive integer or \"auto\", got {v:?}"))),
        }
    }

    pub fn worst_n(&self, c: CriterionId) -> usize {
        match c {
            CriterionId::Lc => self.worst_n_lc,
            CriterionId::Rc => self.worst_n_rc,
            CriterionId::Sc => self.worst_n_sc,
            CriterionId::Ac => self.worst_n_ac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::schema("config", None, m));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.consolidation_tolerance >= 0.0 && self.consolidation_tolerance.is_finite()) {
            return bad("tolerance must be a finite number >= 0");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if CriterionId::ALL.iter().any(|&c| self.worst_n(c) < 1) {
            return bad("worst-n counts must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.k, 4);
        assert_eq!(c.criterion, CriterionId::Rc);
        assert_eq!(c.consolidation_tolerance, 4.0);
        assert_eq!(
            CriterionId::ALL.map(|x| c.worst_n(x)),
            [50, 300, 300, 50]
        );
        c.validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults() {
        let f = ConfigFile::parse("k = 2\ncriterion = \"ac\"\ntolerance = 1.5\ncoords = \"lonlat\"\nworst_n_sc = 10\n", "cfg").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&f);
        assert_eq!(c.k, 2);
        assert_eq!(c.criterion, CriterionId::Ac);
        assert_eq!(c.consolidation_tolerance, 1.5);
        assert_eq!(c.coords, Coords::Lonlat);
        assert_eq!(c.worst_n_sc, 10);
        assert_eq!(c.worst_n_rc, 300);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ConfigFile::parse("kk = 3\n", "cfg").unwrap_err().to_string();
        assert!(err.contains("kk"), "{err}");
    }

    #[test]
    fn threads_env() {
        let mut c = RunConfig::default();
        c.apply_threads_env(Some("3")).unwrap();
        assert_eq!(c.threads, Some(3));
        c.apply_threads_env(Some("auto")).unwrap();
        assert_eq!(c.threads, None);
        assert!(c.apply_threads_env(Some("0")).is_err());
        c.apply_threads_env(None).unwrap();
        assert_eq!(c.threads, None);
    }

    #[test]
    fn validation() {
        let c = RunConfig {
            k: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            consolidation_tolerance: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
