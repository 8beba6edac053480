//! Recording data model and the manifest + CSV on-disk format.
//!
//! A dataset on disk is one JSON manifest listing per-subject metadata, plus
//! one two-column CSV (`elapsed_seconds,voltage_volts`) per subject. Signal
//! paths in the manifest are relative to the manifest's directory.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGNAL_HEADER: [&str; 2] = ["elapsed_seconds", "voltage_volts"];

/// One subject's raw voltage trace and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub variety: String,
    pub storage_temp_c: i32,
    pub sample_rate_hz: f64,
    pub start_day: NaiveDate,
    /// Ground-truth event day; absent for inference-only subjects.
    pub sprouting_day: Option<NaiveDate>,
    pub samples: Vec<f64>,
}

impl Recording {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: &str| Error::InvalidRecording {
            subject_id: self.subject_id.clone(),
            message: message.to_string(),
        };
        if self.subject_id.is_empty() {
            return Err(invalid("empty subject id"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(invalid("sample_rate_hz must be positive"));
        }
        if self.samples.is_empty() {
            return Err(invalid("no samples"));
        }
        if let Some(pos) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(&format!("non-finite sample at index {pos}")));
        }
        if let Some(sprouting_day) = self.sprouting_day {
            if sprouting_day < self.start_day {
                return Err(Error::SproutingBeforeStart {
                    subject_id: self.subject_id.clone(),
                    start_day: self.start_day,
                    sprouting_day,
                });
            }
        }
        Ok(())
    }

    /// Ground-truth event day as a whole-day offset from `start_day`.
    pub fn sprouting_offset(&self) -> Option<i64> {
        self.sprouting_day
            .map(|d| (d - self.start_day).num_days())
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// A labelled collection of recordings with unique subject ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub label: String,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn new(label: impl Into<String>, recordings: Vec<Recording>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (index, rec) in recordings.iter().enumerate() {
            if !seen.insert(rec.subject_id.as_str()) {
                return Err(Error::DuplicateSubject {
                    subject_id: rec.subject_id.clone(),
                    index,
                });
            }
            rec.validate()?;
        }
        Ok(Self {
            label: label.into(),
            recordings,
        })
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Training and evaluation need every subject's event day.
    pub fn require_ground_truth(&self) -> Result<()> {
        match self.recordings.iter().find(|r| r.sprouting_day.is_none()) {
            Some(r) => Err(Error::MissingGroundTruth {
                subject_id: r.subject_id.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Distinct storage temperatures, ascending.
    pub fn storage_temps(&self) -> Vec<i32> {
        let mut temps: Vec<i32> = self.recordings.iter().map(|r| r.storage_temp_c).collect();
        temps.sort_unstable();
        temps.dedup();
        temps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub label: String,
    pub subjects: Vec<ManifestSubject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub variety: String,
    pub storage_temp_c: i32,
    pub sample_rate_hz: f64,
    pub start_day: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sprouting_day: Option<NaiveDate>,
    pub signal_path: String,
}

impl ManifestSubject {
    pub fn from_recording(rec: &Recording, signal_path: impl Into<String>) -> Self {
        Self {
            id: rec.subject_id.clone(),
            variety: rec.variety.clone(),
            storage_temp_c: rec.storage_temp_c,
            sample_rate_hz: rec.sample_rate_hz,
            start_day: rec.start_day,
            sprouting_day: rec.sprouting_day,
            signal_path: signal_path.into(),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Directory that relative `signal_path` entries resolve against.
pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

/// Read one two-column signal CSV. Every data row becomes one sample.
pub fn read_signal_csv(path: &Path, subject_id: &str) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::with_capacity(1 << 20, file));

    let file_err = |line: u64, message: String| Error::SignalFile {
        subject_id: subject_id.to_string(),
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = reader
        .byte_headers()
        .map_err(|e| file_err(1, e.to_string()))?
        .clone();
    let names: Vec<&[u8]> = header.iter().collect();
    if names != [SIGNAL_HEADER[0].as_bytes(), SIGNAL_HEADER[1].as_bytes()] {
        return Err(file_err(
            1,
            format!("expected header `{}`", SIGNAL_HEADER.join(",")),
        ));
    }

    let mut samples = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(file_err(line, e.to_string())),
        }
        if record.len() != 2 {
            return Err(file_err(
                line,
                format!("expected 2 columns, found {}", record.len()),
            ));
        }
        let value = std::str::from_utf8(&record[1])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| file_err(line, "unparseable voltage".to_string()))?;
        if !value.is_finite() {
            return Err(Error::NonFiniteSample {
                subject_id: subject_id.to_string(),
                path: path.to_path_buf(),
                line,
            });
        }
        samples.push(value);
    }
    Ok(samples)
}

pub fn write_signal_csv(path: &Path, samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let io_err = |e| Error::io(path, e);
    writeln!(out, "{}", SIGNAL_HEADER.join(",")).map_err(io_err)?;
    for (i, v) in samples.iter().enumerate() {
        writeln!(out, "{},{}", i as f64 / sample_rate_hz, v).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Load a single manifest entry, resolving its signal path against `base_dir`.
pub fn load_subject(subject: &ManifestSubject, base_dir: &Path) -> Result<Recording> {
    let path = base_dir.join(&subject.signal_path);
    let samples = read_signal_csv(&path, &subject.id)?;
    let rec = Recording {
        subject_id: subject.id.clone(),
        variety: subject.variety.clone(),
        storage_temp_c: subject.storage_temp_c,
        sample_rate_hz: subject.sample_rate_hz,
        start_day: subject.start_day,
        sprouting_day: subject.sprouting_day,
        samples,
    };
    rec.validate()?;
    Ok(rec)
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);

    // Reject duplicates before touching any signal file.
    let mut seen = HashSet::new();
    for (index, s) in manifest.subjects.iter().enumerate() {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateSubject {
                subject_id: s.id.clone(),
                index,
            });
        }
    }

    let recordings = manifest
        .subjects
        .iter()
        .map(|s| load_subject(s, &base))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(manifest.label, recordings)
}

/// Write `dataset` as `dir/manifest.json` plus one `<id>.csv` per subject.
/// Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut subjects = Vec::with_capacity(dataset.len());
    for rec in &dataset.recordings {
        let file_name = format!("{}.csv", rec.subject_id);
        write_signal_csv(&dir.join(&file_name), &rec.samples, rec.sample_rate_hz)?;
        subjects.push(ManifestSubject::from_recording(rec, file_name));
    }
    let manifest_path = dir.join("manifest.json");
    write_manifest(
        &manifest_path,
        &Manifest {
            label: dataset.label.clone(),
            subjects,
        },
    )?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str) -> Recording {
        Recording {
            subject_id: id.to_string(),
            variety: "Agria".into(),
            storage_temp_c: 8,
            sample_rate_hz: 1.0,
            start_day: NaiveDate::from_ymd_opt(2023, 10, 1).unwrap(),
            sprouting_day: NaiveDate::from_ymd_opt(2023, 10, 31),
            samples: vec![0.1, -0.2, 0.3],
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new("d", vec![rec("p01"), rec("p02"), rec("p01")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateSubject { ref subject_id, index: 2 } if subject_id == "p01"));
        assert!(err.to_string().contains("p01"));
    }

    #[test]
    fn sprouting_before_start_rejected() {
        let mut r = rec("p01");
        r.sprouting_day = NaiveDate::from_ymd_opt(2023, 9, 30);
        assert!(matches!(r.validate(), Err(Error::SproutingBeforeStart { .. })));
    }

    #[test]
    fn sprouting_offset_in_days() {
        assert_eq!(rec("a").sprouting_offset(), Some(30));
        let mut r = rec("a");
        r.sprouting_day = None;
        assert_eq!(r.sprouting_offset(), None);
    }

    #[test]
    fn invalid_samples_and_rate() {
        let mut r = rec("a");
        r.samples.push(f64::NAN);
        assert!(r.validate().is_err());
        let mut r = rec("a");
        r.samples.clear();
        assert!(r.validate().is_err());
        let mut r = rec("a");
        r.sample_rate_hz = 0.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn ground_truth_requirement() {
        let mut r = rec("b");
        r.sprouting_day = None;
        let ds = Dataset::new("d", vec![rec("a"), r]).unwrap();
        assert!(matches!(
            ds.require_ground_truth(),
            Err(Error::MissingGroundTruth { ref subject_id }) if subject_id == "b"
        ));
    }
}
