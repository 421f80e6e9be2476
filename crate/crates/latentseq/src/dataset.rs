//! Corpus ingestion and the JSON-lines dataset file.
//!
//! One record per line: `{"id": "...", "source": "...", "pattern": [0, 1, ...]}`.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use latentseq_core::pattern::{quantize_to_steps, seconds_to_ticks};
use latentseq_core::{ManyHotPattern, TimeBase};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::load_loop;
use crate::error::{Error, Result};
use crate::onset::OnsetDetector;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub source: PathBuf,
    pub pattern: ManyHotPattern,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    source: String,
    pattern: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<Record>,
}

impl Dataset {
    /// Fails if two records share an id.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Input(format!("duplicate record id `{}`", r.id)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn patterns(&self) -> Vec<ManyHotPattern> {
        self.records.iter().map(|r| r.pattern).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = RecordLine {
                id: r.id.clone(),
                source: r.source.to_string_lossy().into_owned(),
                pattern: r.pattern.bits().to_vec(),
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine =
                serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
            let pattern = ManyHotPattern::from_bits(&rec.pattern)
                .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
            records.push(Record { id: rec.id, source: rec.source.into(), pattern });
        }
        Dataset::new(records).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// A loop that could not be ingested.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub skipped: Vec<Skipped>,
    /// Ids of loops whose length is more than 2% off the expected bars.
    pub duration_flagged: Vec<String>,
}

fn is_wav(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav") || e.eq_ignore_ascii_case("wave"))
}

/// Loads one loop and encodes it as a pattern, returning the duration flag.
pub fn encode_loop(path: &Path, tb: &TimeBase, detector: &OnsetDetector) -> Result<(ManyHotPattern, bool)> {
    let audio = load_loop(path)?;
    let onsets = detector.detect(&audio);
    let ticks = seconds_to_ticks(&onsets.times_sec, tb)?;
    Ok((quantize_to_steps(&ticks, tb)?, audio.duration_mismatch(tb)))
}

/// Encodes every `.wav` file directly inside `dir`, in file-name order.
/// Files that fail to load are skipped with a warning.
pub fn ingest_corpus(dir: &Path, tb: &TimeBase) -> Result<IngestReport> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_wav(p))
        .collect();
    paths.sort();

    let detector = OnsetDetector::default();
    let results: Vec<(PathBuf, Result<(ManyHotPattern, bool)>)> =
        paths.into_par_iter().map(|p| {
            let r = encode_loop(&p, tb, &detector);
            (p, r)
        }).collect();

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut used = HashSet::new();
    for (path, result) in results {
        match result {
            Ok((pattern, flagged)) => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let mut id = stem.clone();
                let mut n = 2;
                while !used.insert(id.clone()) {
                    id = format!("{stem}-{n}");
                    n += 1;
                }
                if flagged {
                    log::warn!("{}: duration differs from {:.3} s by more than 2%", path.display(), tb.loop_seconds());
                    report.duration_flagged.push(id.clone());
                }
                records.push(Record { id, source: path, pattern });
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                report.skipped.push(Skipped { path, reason: e.to_string() });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Corpus(format!("no loops ingested from {}", dir.display())));
    }
    report.dataset = Dataset::new(records)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_duplicate_ids() {
        let recs = vec![
            Record { id: "a".into(), source: "x/a.wav".into(), pattern: ManyHotPattern::from_steps([0, 4]).unwrap() },
            Record { id: "b".into(), source: "x/b.wav".into(), pattern: ManyHotPattern::empty() },
        ];
        let ds = Dataset::new(recs.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        ds.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"id":"a","source":"x/a.wav","pattern":[1,0,0,0,1,"#));
        assert_eq!(Dataset::load(&p).unwrap(), ds);
        assert!(Dataset::new(vec![recs[0].clone(), recs[0].clone()]).is_err());
    }

    #[test]
    fn bad_lines_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(&p, "{\"id\":\"a\",\"source\":\"s\",\"pattern\":[0,1]}\n").unwrap();
        assert!(matches!(Dataset::load(&p), Err(Error::Format { .. })));
        std::fs::write(&p, "not json\n").unwrap();
        assert!(matches!(Dataset::load(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn empty_directory_is_a_corpus_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest_corpus(dir.path(), &TimeBase::default()).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
        assert!(err.to_string().contains("no loops ingested"));
    }
}
