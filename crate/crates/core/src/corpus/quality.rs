//! Per-sample quality scores and the 0–15 composite scale.
//!
//! The composite is `edu + map(dclm) + map(wiki)`, where `map` sends each
//! sample's rank in its own score distribution to the edu score holding the
//! same rank. Ties share their midpoint rank; fractional ranks interpolate
//! linearly between neighbouring edu order statistics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig17;

pub const EDU_MAX: f64 = 5.0;
pub const COMPOSITE_MAX: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawScores {
    pub dclm: f64,
    pub edu: f64,
    pub wiki: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityTable {
    raw: Option<Vec<RawScores>>,
    composite: Vec<f64>,
}

impl QualityTable {
    /// Builds a table from precomposed scores in `[0, 15]`.
    pub fn from_composite(composite: Vec<f64>) -> Result<Self> {
        if composite.is_empty() {
            return Err(Error::invalid("quality table is empty"));
        }
        for (i, &c) in composite.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("quality score of sample {i}")));
            }
            if !(0.0..=COMPOSITE_MAX).contains(&c) {
                return Err(Error::invalid(format!(
                    "quality score {c} of sample {i} is outside [0, 15]"
                )));
            }
        }
        Ok(QualityTable {
            raw: None,
            composite,
        })
    }

    pub fn len(&self) -> usize {
        self.composite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.composite.is_empty()
    }

    pub fn composite(&self) -> &[f64] {
        &self.composite
    }

    pub fn raw(&self) -> Option<&[RawScores]> {
        self.raw.as_deref()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let pick = |i: usize| {
            if i < self.len() {
                Ok(i)
            } else {
                Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                })
            }
        };
        let composite = rows
            .iter()
            .map(|&i| pick(i).map(|i| self.composite[i]))
            .collect::<Result<_>>()?;
        let raw = self
            .raw
            .as_ref()
            .map(|raw| rows.iter().map(|&i| raw[i]).collect());
        Ok(QualityTable { raw, composite })
    }
}

/// Midpoint ranks (0-based) of `values`; tied values share the mean of their
/// positions in sorted order.
pub fn midpoint_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mid = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Maps `values` onto the distribution of `reference` by rank matching.
/// Both slices must have the same length.
pub fn quantile_map(values: &[f64], reference: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), reference.len());
    let mut sorted = reference.to_vec();
    sorted.sort_by(f64::total_cmp);
    midpoint_ranks(values)
        .into_iter()
        .map(|r| {
            let lo = r.floor() as usize;
            let hi = r.ceil() as usize;
            let frac = r - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        })
        .collect()
}

/// Composes the 0–15 quality scale from raw `(dclm, edu, wiki)` triples.
pub fn compose_quality(raw: Vec<RawScores>) -> Result<QualityTable> {
    if raw.is_empty() {
        return Err(Error::invalid("cannot compose quality of an empty table"));
    }
    for (i, r) in raw.iter().enumerate() {
        if !(r.dclm.is_finite() && r.edu.is_finite() && r.wiki.is_finite()) {
            return Err(Error::NonFinite(format!("raw score of sample {i}")));
        }
        if !(0.0..=EDU_MAX).contains(&r.edu) {
            return Err(Error::invalid(format!(
                "edu score {} of sample {i} is outside [0, 5]",
                r.edu
            )));
        }
    }
    let edu: Vec<f64> = raw.iter().map(|r| r.edu).collect();
    let dclm: Vec<f64> = raw.iter().map(|r| r.dclm).collect();
    let wiki: Vec<f64> = raw.iter().map(|r| r.wiki).collect();
    let mapped_dclm = quantile_map(&dclm, &edu);
    let mapped_wiki = quantile_map(&wiki, &edu);
    let composite = (0..raw.len())
        .map(|i| {
            let c =
                edu[i] + mapped_dclm[i].clamp(0.0, EDU_MAX) + mapped_wiki[i].clamp(0.0, EDU_MAX);
            c.clamp(0.0, COMPOSITE_MAX)
        })
        .collect();
    Ok(QualityTable {
        raw: Some(raw),
        composite,
    })
}

/// Indices whose composite score is at least `threshold`, ascending.
pub fn prune_by_quality(q: &QualityTable, threshold: f64) -> Vec<usize> {
    q.composite
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Reads either a raw (`index,dclm,edu,wiki`) or a composite
/// (`index,quality`) score file, detected from the header.
pub fn load_scores(path: impl AsRef<Path>) -> Result<QualityTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let raw_layout = header == ["index", "dclm", "edu", "wiki"];
    if !raw_layout && header != ["index", "quality"] {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("unrecognized header {header:?}"),
        });
    }
    let mut raw = Vec::new();
    let mut composite = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("bad value in column {}", header[k]),
                })
        };
        let index = record.get(0).and_then(|s| s.parse::<usize>().ok());
        if index != Some(row) {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("expected index {row}"),
            });
        }
        if raw_layout {
            raw.push(RawScores {
                dclm: field(1)?,
                edu: field(2)?,
                wiki: field(3)?,
            });
        } else {
            composite.push(field(1)?);
        }
    }
    if raw_layout {
        compose_quality(raw)
    } else {
        QualityTable::from_composite(composite)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.into(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

pub fn write_raw_scores(raw: &[RawScores], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("index,dclm,edu,wiki\n");
    for (i, r) in raw.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            sig17(r.dclm),
            sig17(r.edu),
            sig17(r.wiki)
        ));
    }
    write_text(path.as_ref(), &out)
}

pub fn write_composite_scores(q: &QualityTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("index,quality\n");
    for (i, c) in q.composite.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", sig17(*c)));
    }
    write_text(path.as_ref(), &out)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
