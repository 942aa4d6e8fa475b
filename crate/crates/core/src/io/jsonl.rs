use std::collections::btree_map::Entry;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{rank_predictions, Predictions};
use crate::types::{GroundTruthEntry, PredictionWindow, QueryId, Segment};

/// One ground-truth line. Unknown fields (e.g. saliency annotations) are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub qid: u64,
    #[serde(default)]
    pub query: String,
    pub vid: String,
    pub duration: f64,
    pub relevant_windows: Vec<[f64; 2]>,
}

/// One prediction line: windows as `[start, end, score]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub qid: u64,
    pub pred_relevant_windows: Vec<[f64; 3]>,
}

impl GroundTruthRecord {
    pub fn into_entry(self) -> Result<GroundTruthEntry> {
        let qid = QueryId(self.qid);
        GroundTruthEntry::from_windows(qid, self.vid, self.duration, &self.relevant_windows).map_err(|e| Error::Record {
            qid,
            source: Box::new(e),
        })
    }

    pub fn from_entry(entry: &GroundTruthEntry, query: impl Into<String>) -> Self {
        GroundTruthRecord {
            qid: entry.query_id().0,
            query: query.into(),
            vid: entry.video_id().to_string(),
            duration: entry.duration(),
            relevant_windows: entry.segments().iter().map(|s| [s.start(), s.end()]).collect(),
        }
    }
}

impl PredictionRecord {
    pub fn from_windows(qid: QueryId, windows: &[PredictionWindow]) -> Self {
        PredictionRecord {
            qid: qid.0,
            pred_relevant_windows: windows
                .iter()
                .map(|w| [w.segment.start(), w.segment.end(), w.score])
                .collect(),
        }
    }

    fn into_windows(self) -> Result<(QueryId, Vec<PredictionWindow>)> {
        let qid = QueryId(self.qid);
        let windows = self
            .pred_relevant_windows
            .iter()
            .enumerate()
            .map(|(i, &[s, e, score])| {
                Segment::new(s, e)
                    .and_then(|seg| PredictionWindow::new(seg, score))
                    .map_err(|err| err.at_segment(i))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Record {
                qid,
                source: Box::new(e),
            })?;
        Ok((qid, windows))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines as `(1-based line number, record)`.
fn records<'a, T: Deserialize<'a>>(text: &'a str, path: &Path) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map(|r| (i + 1, r)).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Ground truth from JSONL text; `path` only labels errors.
pub fn ground_truth_from_str(text: &str, path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (_, rec) in records::<GroundTruthRecord>(text, path)? {
        let qid = QueryId(rec.qid);
        if !seen.insert(qid) {
            return Err(Error::DuplicateQuery(qid));
        }
        out.push(rec.into_entry()?);
    }
    Ok(out)
}

pub fn parse_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEntry>> {
    let path = path.as_ref();
    ground_truth_from_str(&read_text(path)?, path)
}

/// Predictions from JSONL text, each query ranked by score and cut to `cap`.
pub fn predictions_from_str(text: &str, path: &Path, cap: usize) -> Result<Predictions> {
    let mut out = Predictions::new();
    for (_, rec) in records::<PredictionRecord>(text, path)? {
        let (qid, windows) = rec.into_windows()?;
        match out.entry(qid) {
            Entry::Occupied(_) => return Err(Error::DuplicateQuery(qid)),
            Entry::Vacant(slot) => {
                let mut ranked = rank_predictions(&windows);
                ranked.truncate(cap);
                slot.insert(ranked);
            }
        }
    }
    Ok(out)
}

pub fn parse_predictions(path: impl AsRef<Path>, cap: usize) -> Result<Predictions> {
    let path = path.as_ref();
    predictions_from_str(&read_text(path)?, path, cap)
}

fn to_lines<T: Serialize>(records: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn ground_truth_to_string(entries: &[GroundTruthEntry]) -> String {
    to_lines(entries.iter().map(|e| GroundTruthRecord::from_entry(e, "")))
}

pub fn predictions_to_string(preds: &Predictions) -> String {
    to_lines(preds.iter().map(|(q, w)| PredictionRecord::from_windows(*q, w)))
}

pub fn write_ground_truth(path: impl AsRef<Path>, entries: &[GroundTruthEntry]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ground_truth_to_string(entries)).map_err(|e| Error::io(path, e))
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &Predictions) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, predictions_to_string(preds)).map_err(|e| Error::io(path, e))
}
