//! Pipeline configuration.
//!
//! Plain-text `key = value` files with dotted keys mirroring the structure of
//! [`PipelineConfig`], `#` comments and `include <path>` lines (relative to
//! the including file). Environment variables `SOCCER_SUMMARY_<KEY>` override
//! file values, with `.` in the key written as `__`. Unknown keys are
//! rejected. The hash of the resolved configuration is stamped on every
//! artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{AudioConfig, FieldConfig};
use crate::hma::HmaConfig;
use crate::proposals::MilConfig;
use crate::ranking::{AssemblyConfig, SamplingConfig};
use crate::synth::GenConfig;

pub const ENV_PREFIX: &str = "SOCCER_SUMMARY_";
const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub audio: AudioConfig,
    pub field: FieldConfig,
    /// Width of the qualifier one-hot block.
    pub qualifiers: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            audio: AudioConfig::default(),
            field: FieldConfig::default(),
            qualifiers: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    /// How many of the folds to run, starting at fold 0.
    pub run_folds: usize,
    /// Minimum share of a proposal inside a summary action for a positive
    /// stage-2 label.
    pub label_overlap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            run_folds: 10,
            label_overlap: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub synth: GenConfig,
    pub features: FeatureConfig,
    pub mil: MilConfig,
    pub hma: HmaConfig,
    pub sampling: SamplingConfig,
    pub assembly: AssemblyConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    /// Defaults, then the file (if any), then environment overrides.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut entries = Vec::new();
        if let Some(p) = path {
            read_entries(p, 0, &mut Vec::new(), &mut entries)?;
        }
        for (k, v) in env {
            if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
                let key = rest.to_ascii_lowercase().replace("__", ".");
                entries.push((key, v, format!("environment variable {k}")));
            }
        }
        Self::from_entries(entries)
    }

    pub fn from_str_entries(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(line, Path::new("<inline>"), n + 1)? {
                entries.push((k, v, format!("line {}", n + 1)));
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<(String, String, String)>) -> Result<Self> {
        let mut tree = serde_json::to_value(Self::default()).expect("config serializes");
        for (key, value, origin) in entries {
            set_path(&mut tree, &key, &value).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        }
        let cfg: Self = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate(&crate::model::Vocabulary::soccer_default())?;
        let e = &self.eval;
        if e.folds < 3 {
            return Err(Error::Config(format!("eval.folds must be >= 3, got {}", e.folds)));
        }
        if e.run_folds == 0 || e.run_folds > e.folds {
            return Err(Error::Config(format!(
                "eval.run_folds must lie in 1..={}, got {}",
                e.folds, e.run_folds
            )));
        }
        if !(0.0..=1.0).contains(&e.label_overlap) {
            return Err(Error::Config("eval.label_overlap must lie in [0, 1]".into()));
        }
        if self.sampling.k == 0 || !(self.sampling.sigma >= 0.0) {
            return Err(Error::Config("sampling.k must be >= 1 and sampling.sigma >= 0".into()));
        }
        if !(self.assembly.tolerance >= 0.0) {
            return Err(Error::Config("assembly.tolerance must be >= 0".into()));
        }
        if self.features.qualifiers == 0 {
            return Err(Error::Config("features.qualifiers must be >= 1".into()));
        }
        if self.mil.window == 0 || self.mil.stride == 0 || self.mil.stride >= self.mil.window {
            return Err(Error::Config("need 0 < mil.stride < mil.window".into()));
        }
        if self.mil.r_grid.is_empty() || self.mil.r_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("mil.r_grid must be a non-empty list of positive values".into()));
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical_json().as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every settable key with its current value, sorted.
    pub fn keys(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        flatten("", &serde_json::to_value(self).expect("config serializes"), &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        Value::Null => {
            out.insert(prefix.to_string(), "none".into());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn set_path(tree: &mut Value, key: &str, raw: &str) -> std::result::Result<(), String> {
    let mut node = tree;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part).ok_or_else(|| format!("unknown config key `{key}`"))?,
            _ => return Err(format!("unknown config key `{key}`")),
        };
    }
    let new = match node {
        Value::Object(_) => return Err(format!("`{key}` is a section, not a value")),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Bool(_) => Value::Bool(
            raw.parse()
                .map_err(|_| format!("`{key}` expects true or false, got `{raw}`"))?,
        ),
        Value::Null if raw == "none" => Value::Null,
        Value::Number(_) | Value::Null | Value::Array(_) => {
            if raw == "none" {
                Value::Null
            } else {
                serde_json::from_str(raw).map_err(|_| format!("`{key}`: cannot parse `{raw}`"))?
            }
        }
    };
    if let (Value::Number(old), Value::Number(newn)) = (&*node, &new) {
        if (old.is_u64() || old.is_i64()) && !(newn.is_u64() || newn.is_i64()) {
            return Err(format!("`{key}` expects an integer, got `{raw}`"));
        }
    }
    *node = new;
    Ok(())
}

fn parse_line(line: &str, path: &Path, n: usize) -> Result<Option<(String, String)>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: n,
        column: 1,
        message: format!("expected `key = value`, got `{line}`"),
    })?;
    Ok(Some((k.trim().to_string(), v.trim().to_string())))
}

fn read_entries(
    path: &Path,
    depth: usize,
    stack: &mut Vec<PathBuf>,
    out: &mut Vec<(String, String, String)>,
) -> Result<()> {
    let canon = fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
    if depth > MAX_INCLUDE_DEPTH || stack.contains(&canon) {
        return Err(Error::Config(format!("include cycle at {}", path.display())));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    stack.push(canon);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(target) = line.strip_prefix("include ") {
            let base = path.parent().unwrap_or(Path::new("."));
            read_entries(&base.join(target.trim()), depth + 1, stack, out)?;
            continue;
        }
        if let Some((k, v)) = parse_line(raw, path, i + 1)? {
            out.push((k, v, format!("{}:{}", path.display(), i + 1)));
        }
    }
    stack.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let a = PipelineConfig::load(None, no_env()).unwrap();
        assert_eq!(a, PipelineConfig::default());
        assert_eq!(a.hash(), PipelineConfig::default().hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn values_and_includes_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.cfg"), "mil.epochs = 7\nsynth.matches = 12 # small\n").unwrap();
        std::fs::write(
            dir.path().join("run.cfg"),
            "include base.cfg\nmil.epochs = 9\nmil.fusion = literal\nmil.adam.clip_norm = 5.0\n",
        )
        .unwrap();
        let c = PipelineConfig::load(Some(&dir.path().join("run.cfg")), no_env()).unwrap();
        assert_eq!(c.mil.epochs, 9);
        assert_eq!(c.synth.matches, 12);
        assert_eq!(c.mil.fusion, crate::proposals::Fusion::Literal);
        assert_eq!(c.mil.adam.clip_norm, Some(5.0));
        assert_ne!(c.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn environment_overrides_file() {
        let env = vec![
            ("SOCCER_SUMMARY_MIL__EPOCHS".to_string(), "3".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = PipelineConfig::load(None, env).unwrap();
        assert_eq!(c.mil.epochs, 3);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for text in [
            "mil.epochz = 3",
            "mil = 3",
            "mil.epochs = 2.5",
            "mil.epochs = many",
            "assembly.skip_non_fitting = maybe",
            "mil.fusion = cubic",
            "eval.folds = 2",
            "synth.insert_rate = 1.5",
            "just words",
        ] {
            let r = PipelineConfig::from_str_entries(text);
            assert!(matches!(r, Err(Error::Config(_)) | Err(Error::Parse { .. })), "{text}: {r:?}");
        }
        let env = vec![("SOCCER_SUMMARY_NOPE".to_string(), "1".to_string())];
        assert!(PipelineConfig::load(None, env).is_err());
    }

    #[test]
    fn include_cycles_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.cfg"), "include b.cfg\n").unwrap();
        std::fs::write(dir.path().join("b.cfg"), "include a.cfg\n").unwrap();
        assert!(PipelineConfig::load(Some(&dir.path().join("a.cfg")), no_env()).is_err());
    }

    #[test]
    fn every_listed_key_is_settable_to_its_own_value() {
        let c = PipelineConfig::default();
        let text: String = c
            .keys()
            .into_iter()
            .filter(|(_, v)| !v.starts_with('['))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(PipelineConfig::from_str_entries(&text).unwrap(), c);
    }
}
