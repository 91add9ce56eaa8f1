//! Clinical metadata, survival classes and the per-slice feature table.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::AGE_FEATURE;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("clinical CSV lacks a {0} column")]
    MissingColumn(&'static str),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("no clinical record for subject '{0}'")]
    UnknownSubject(String),
    #[error("row for subject '{subject}' slice {z} has {got} features, expected {expected}")]
    FeatureLength {
        subject: String,
        z: usize,
        got: usize,
        expected: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Three survival bins, ordered from worst to best prognosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurvivalClass {
    Short,
    Mid,
    Long,
}

impl SurvivalClass {
    pub const ALL: [SurvivalClass; 3] = [SurvivalClass::Short, SurvivalClass::Mid, SurvivalClass::Long];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SurvivalClass::Short => "short",
            SurvivalClass::Mid => "mid",
            SurvivalClass::Long => "long",
        }
    }
}

impl fmt::Display for SurvivalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurvivalClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "short" | "0" => Ok(SurvivalClass::Short),
            "mid" | "medium" | "1" => Ok(SurvivalClass::Mid),
            "long" | "2" => Ok(SurvivalClass::Long),
            other => Err(format!("unknown survival class '{other}'")),
        }
    }
}

/// Day boundaries of the half-open bins `[0, mid)`, `[mid, long)`, `[long, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalThresholds {
    pub mid_days: u32,
    pub long_days: u32,
}

impl Default for SurvivalThresholds {
    fn default() -> Self {
        SurvivalThresholds {
            mid_days: 600,
            long_days: 1300,
        }
    }
}

impl SurvivalThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if self.mid_days == 0 || self.mid_days >= self.long_days {
            return Err(format!(
                "survival thresholds must be strictly increasing and positive, got {} and {}",
                self.mid_days, self.long_days
            ));
        }
        Ok(())
    }

    pub fn classify(&self, days: Option<u32>) -> SurvivalClass {
        match days {
            None => SurvivalClass::Short,
            Some(d) if d < self.mid_days => SurvivalClass::Short,
            Some(d) if d < self.long_days => SurvivalClass::Mid,
            Some(_) => SurvivalClass::Long,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub subject_id: String,
    pub age: f64,
    /// Absent when the source row carries no numeric survival.
    pub survival_days: Option<u32>,
}

/// Class of a record; missing survival counts as short.
pub fn bin_survival(r: &ClinicalRecord, t: &SurvivalThresholds) -> SurvivalClass {
    t.classify(r.survival_days)
}

const MAX_SURVIVAL_DAYS: f64 = 40_000.0;

fn find_column(headers: &csv::StringRecord, accept: impl Fn(&str) -> bool) -> Option<usize> {
    headers
        .iter()
        .position(|h| accept(&h.trim().to_ascii_lowercase()))
}

/// Parse clinical rows with columns for subject id, age and survival days.
///
/// The id column is `subject_id`, `id`, or any name ending in `id`
/// (`BraTS19ID`). Extra columns are ignored.
pub fn parse_clinical<R: Read>(reader: R) -> Result<Vec<ClinicalRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = find_column(&headers, |h| h == "subject_id" || h.ends_with("id"))
        .ok_or(DatasetError::MissingColumn("subject id"))?;
    let age_col = find_column(&headers, |h| h == "age").ok_or(DatasetError::MissingColumn("Age"))?;
    let surv_col = find_column(&headers, |h| h == "survival" || h == "survival_days")
        .ok_or(DatasetError::MissingColumn("Survival"))?;

    let mut out: Vec<ClinicalRecord> = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| DatasetError::MalformedRow { line, reason };
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let subject_id = rec.get(id_col).unwrap_or("").to_string();
        if subject_id.is_empty() {
            return Err(bad("empty subject id".into()));
        }
        let age_text = rec.get(age_col).unwrap_or("");
        let age: f64 = age_text
            .parse()
            .map_err(|_| bad(format!("age '{age_text}' is not a number")))?;
        if !(age > 0.0 && age < 130.0) {
            return Err(bad(format!("age {age} outside (0, 130)")));
        }
        let survival_days = match rec.get(surv_col).unwrap_or("").parse::<f64>() {
            Ok(d) if d.is_finite() => {
                if !(0.0..=MAX_SURVIVAL_DAYS).contains(&d) || d.fract() != 0.0 {
                    return Err(bad(format!("survival {d} is not a day count in [0, 40000]")));
                }
                Some(d as u32)
            }
            // Empty or free text such as "ALIVE (361 days later)".
            _ => None,
        };
        if seen.insert(subject_id.clone(), line).is_some() {
            return Err(bad(format!("duplicate subject '{subject_id}'")));
        }
        out.push(ClinicalRecord {
            subject_id,
            age,
            survival_days,
        });
    }
    Ok(out)
}

pub fn read_clinical_csv(path: impl AsRef<Path>) -> Result<Vec<ClinicalRecord>, DatasetError> {
    parse_clinical(std::fs::File::open(path)?)
}

/// Radiomic vector of one slice before clinical data is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceFeatures {
    pub subject_id: String,
    pub z_index: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub subject_id: String,
    pub z_index: usize,
    pub features: Vec<f64>,
    pub label: SurvivalClass,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<DatasetRow>) -> Result<Self, DatasetError> {
        let f = feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.features.len() != f) {
            return Err(DatasetError::FeatureLength {
                subject: r.subject_id.clone(),
                z: r.z_index,
                got: r.features.len(),
                expected: f,
            });
        }
        Ok(Dataset {
            feature_names,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> Vec<SurvivalClass> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.features.as_slice()).collect()
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Slice count per subject, sorted by subject id.
    pub fn subject_counts(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.subject_id.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.rows {
            c[r.label.index()] += 1;
        }
        c
    }

    /// CSV with header `subject_id,z_index,label,<feature names>`.
    ///
    /// Values use the shortest representation that parses back to the same f64.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["subject_id".to_string(), "z_index".into(), "label".into()];
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for r in &self.rows {
            rec.clear();
            rec.push(r.subject_id.clone());
            rec.push(r.z_index.to_string());
            rec.push(r.label.to_string());
            rec.extend(r.features.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        let expect = ["subject_id", "z_index", "label"];
        for (i, name) in expect.iter().enumerate() {
            if headers.get(i) != Some(*name) {
                return Err(DatasetError::MissingColumn(name));
            }
        }
        let feature_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |reason: String| DatasetError::MalformedRow { line, reason };
            let z_index = rec[1]
                .parse()
                .map_err(|_| bad(format!("z_index '{}'", &rec[1])))?;
            let label = rec[2].parse().map_err(bad)?;
            let features = rec
                .iter()
                .skip(3)
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| bad(format!("feature value '{v}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(DatasetRow {
                subject_id: rec[0].to_string(),
                z_index,
                features,
                label,
            });
        }
        Dataset::new(feature_names, rows)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

/// Attach age and survival class to each slice vector.
///
/// Rows come out sorted by subject id, then slice index, whatever the input order.
pub fn assemble(
    slices: &[SliceFeatures],
    radiomic_names: &[String],
    clinical: &[ClinicalRecord],
    thresholds: &SurvivalThresholds,
) -> Result<Dataset, DatasetError> {
    let by_id: HashMap<&str, &ClinicalRecord> =
        clinical.iter().map(|r| (r.subject_id.as_str(), r)).collect();
    let mut rows = Vec::with_capacity(slices.len());
    for s in slices {
        let rec = by_id
            .get(s.subject_id.as_str())
            .ok_or_else(|| DatasetError::UnknownSubject(s.subject_id.clone()))?;
        if s.features.len() != radiomic_names.len() {
            return Err(DatasetError::FeatureLength {
                subject: s.subject_id.clone(),
                z: s.z_index,
                got: s.features.len(),
                expected: radiomic_names.len(),
            });
        }
        let mut features = s.features.clone();
        features.push(rec.age);
        rows.push(DatasetRow {
            subject_id: s.subject_id.clone(),
            z_index: s.z_index,
            features,
            label: bin_survival(rec, thresholds),
        });
    }
    rows.sort_by(|a, b| {
        a.subject_id
            .cmp(&b.subject_id)
            .then(a.z_index.cmp(&b.z_index))
    });
    let mut names = radiomic_names.to_vec();
    names.push(AGE_FEATURE.to_string());
    Dataset::new(names, rows)
}
