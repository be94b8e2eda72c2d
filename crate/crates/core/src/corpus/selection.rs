use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::kv::KvConfig;
use super::quality::write_text;
use crate::error::{Error, Result};
use crate::fmt::sig17;

/// The chosen subset plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    selected: Vec<usize>,
    pub budget: usize,
    pub achieved: BTreeMap<String, f64>,
    pub seed: u64,
    pub epochs: usize,
    pub lambda: f64,
    pub method: String,
    /// Effective configuration, echoed into the metadata sidecar.
    pub config: KvConfig,
}

impl SelectionResult {
    /// Sorts `selected` and checks it has exactly `budget >= 1` unique entries.
    pub fn new(mut selected: Vec<usize>, budget: usize, method: impl Into<String>) -> Result<Self> {
        selected.sort_unstable();
        let r = SelectionResult {
            selected,
            budget,
            achieved: BTreeMap::new(),
            seed: 0,
            epochs: 0,
            lambda: 0.0,
            method: method.into(),
            config: KvConfig::new(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("selection budget must be at least 1"));
        }
        if self.selected.len() != self.budget {
            return Err(Error::invalid(format!(
                "selection has {} indices but budget is {}",
                self.selected.len(),
                self.budget
            )));
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "selection indices are not strictly ascending",
            ));
        }
        Ok(())
    }

    fn metadata(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.insert("method", &self.method);
        kv.insert("budget", self.budget);
        kv.insert("seed", self.seed);
        kv.insert("epochs", self.epochs);
        kv.insert("lambda", sig17(self.lambda));
        for (name, v) in &self.achieved {
            kv.insert(format!("achieved.{name}"), sig17(*v));
        }
        for (k, v) in self.config.iter() {
            kv.insert(format!("config.{k}"), v);
        }
        kv
    }
}

/// `<selection path>.meta`
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes one ascending index per line, plus the metadata sidecar.
pub fn write_selection(r: &SelectionResult, path: impl AsRef<Path>) -> Result<()> {
    r.validate()?;
    let path = path.as_ref();
    let mut text = String::with_capacity(r.selected.len() * 8);
    for i in &r.selected {
        text.push_str(&i.to_string());
        text.push('\n');
    }
    write_text(path, &text)?;
    write_text(&metadata_path(path), &r.metadata().to_string())
}

pub fn read_selection(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg: format!("not an index: {line:?}"),
        })?;
        if !seen.insert(idx) {
            return Err(Error::Parse {
                path: path.into(),
                line: i + 1,
                msg: format!("duplicate index {idx}"),
            });
        }
        out.push(idx);
    }
    out.sort_unstable();
    Ok(out)
}

/// Reads a selection and its sidecar back into a [`SelectionResult`].
pub fn read_selection_result(path: impl AsRef<Path>) -> Result<SelectionResult> {
    let path = path.as_ref();
    let selected = read_selection(path)?;
    let meta = KvConfig::load(metadata_path(path))?;
    let budget = meta.get_parsed("budget")?.unwrap_or(selected.len());
    let mut r = SelectionResult::new(selected, budget, meta.get("method").unwrap_or(""))?;
    r.seed = meta.get_parsed("seed")?.unwrap_or(0);
    r.epochs = meta.get_parsed("epochs")?.unwrap_or(0);
    r.lambda = meta.get_parsed("lambda")?.unwrap_or(0.0);
    for (k, v) in meta.iter() {
        if let Some(name) = k.strip_prefix("achieved.") {
            let v = v
                .parse()
                .map_err(|_| Error::invalid(format!("bad metric value {v}")))?;
            r.achieved.insert(name.to_string(), v);
        } else if let Some(key) = k.strip_prefix("config.") {
            r.config.insert(key, v);
        }
    }
    Ok(r)
}
