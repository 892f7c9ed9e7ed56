use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjudicate::{
    adjudicate_instance, validate_counterexample, CEVerdict, Classification, GroundTruth,
    ResultStatus, Submission, Tolerances,
};
use crate::netir::{load_network, Network};
use crate::vnnlib::{parse_counterexample, Property};

use super::instances::read_property;
use super::HarnessError;

/// One tool's outcome on one instance. Runtimes are seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub tool: String,
    pub benchmark: String,
    pub instance: usize,
    pub network: PathBuf,
    pub spec: PathBuf,
    pub timeout: f64,
    pub status: ResultStatus,
    pub raw: f64,
    /// `max(raw - overhead, 0)`.
    pub corrected: f64,
    /// Counterexample file; `None` on a `violated` record means the tool
    /// wrote none.
    pub ce: Option<PathBuf>,
}

const RUN_HEADER: [&str; 10] = [
    "tool",
    "benchmark",
    "instance",
    "network",
    "spec",
    "timeout",
    "status",
    "raw",
    "corrected",
    "ce",
];

/// A run record after counterexample validation and ground-truth
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjudicatedRecord {
    pub run: RunRecord,
    /// Verdict on the tool's own counterexample: empty unless the tool
    /// claimed a violation, `absent` if it wrote no file.
    pub ce_verdict: String,
    /// `violated`, `holds` or `unknown`.
    pub ground_truth: String,
    /// Tool whose counterexample established a violation.
    pub witness_tool: Option<String>,
    pub classification: Classification,
}

const ADJUDICATED_EXTRA: [&str; 4] = [
    "ce_verdict",
    "ground_truth",
    "witness_tool",
    "classification",
];

pub const CE_ABSENT: &str = "absent";

fn seconds(v: f64) -> String {
    format!("{v:.6}")
}

/// Paths below `base` are written relative to it, others absolute.
fn rel(path: &Path, base: &Path) -> String {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    abs.strip_prefix(base).unwrap_or(&abs).display().to_string()
}

fn record_dir(path: &Path) -> PathBuf {
    let dir = path.parent().unwrap_or(Path::new(""));
    fs::canonicalize(dir).unwrap_or_else(|_| dir.to_path_buf())
}

fn run_fields(r: &RunRecord, base: &Path) -> Vec<String> {
    vec![
        r.tool.clone(),
        r.benchmark.clone(),
        r.instance.to_string(),
        rel(&r.network, base),
        rel(&r.spec, base),
        r.timeout.to_string(),
        r.status.to_string(),
        seconds(r.raw),
        seconds(r.corrected),
        r.ce.as_deref().map(|p| rel(p, base)).unwrap_or_default(),
    ]
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(header)
        .map_err(|e| HarnessError::csv(path, e))?;
    for row in rows {
        w.write_record(&row)
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes records as CSV. Paths inside the file's directory are stored
/// relative to it.
pub fn write_records(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let base = record_dir(path);
    write_rows(
        path,
        &RUN_HEADER,
        records.iter().map(|r| run_fields(r, &base)),
    )
}

pub fn write_adjudicated(
    path: impl AsRef<Path>,
    records: &[AdjudicatedRecord],
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let base = record_dir(path);
    let header: Vec<&str> = RUN_HEADER
        .iter()
        .chain(&ADJUDICATED_EXTRA)
        .copied()
        .collect();
    write_rows(
        path,
        &header,
        records.iter().map(|a| {
            let mut row = run_fields(&a.run, &base);
            row.extend([
                a.ce_verdict.clone(),
                a.ground_truth.clone(),
                a.witness_tool.clone().unwrap_or_default(),
                a.classification.to_string(),
            ]);
            row
        }),
    )
}

struct Rows {
    path: PathBuf,
    base: PathBuf,
    columns: BTreeMap<String, usize>,
    records: Vec<(usize, csv::StringRecord)>,
}

impl Rows {
    fn read(path: &Path, required: &[&str]) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        let header = r.headers().map_err(|e| HarnessError::csv(path, e))?.clone();
        let columns: BTreeMap<String, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
            return Err(HarnessError::Row {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column `{missing}`"),
            });
        }
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            records.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            base: record_dir(path),
            columns,
            records,
        })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, column: &str) -> &'r str {
        rec.get(self.columns[column]).unwrap_or("")
    }

    fn error(&self, line: usize, message: String) -> HarnessError {
        HarnessError::Row {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn parse<T: std::str::FromStr>(
        &self,
        line: usize,
        rec: &csv::StringRecord,
        column: &str,
    ) -> Result<T, HarnessError> {
        let text = self.get(rec, column);
        text.parse()
            .map_err(|_| self.error(line, format!("invalid {column} `{text}`")))
    }

    fn run(&self, line: usize, rec: &csv::StringRecord) -> Result<RunRecord, HarnessError> {
        let path = |column: &str| self.base.join(self.get(rec, column));
        let ce = self.get(rec, "ce");
        Ok(RunRecord {
            tool: self.get(rec, "tool").to_string(),
            benchmark: self.get(rec, "benchmark").to_string(),
            instance: self.parse(line, rec, "instance")?,
            network: path("network"),
            spec: path("spec"),
            timeout: self.parse(line, rec, "timeout")?,
            status: self.parse(line, rec, "status")?,
            raw: self.parse(line, rec, "raw")?,
            corrected: self.parse(line, rec, "corrected")?,
            ce: (!ce.is_empty()).then(|| self.base.join(ce)),
        })
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, HarnessError> {
    let rows = Rows::read(path.as_ref(), &RUN_HEADER)?;
    rows.records
        .iter()
        .map(|(line, rec)| rows.run(*line, rec))
        .collect()
}

pub fn read_adjudicated(path: impl AsRef<Path>) -> Result<Vec<AdjudicatedRecord>, HarnessError> {
    let required: Vec<&str> = RUN_HEADER
        .iter()
        .chain(&ADJUDICATED_EXTRA)
        .copied()
        .collect();
    let rows = Rows::read(path.as_ref(), &required)?;
    rows.records
        .iter()
        .map(|(line, rec)| {
            let witness = rows.get(rec, "witness_tool");
            Ok(AdjudicatedRecord {
                run: rows.run(*line, rec)?,
                ce_verdict: rows.get(rec, "ce_verdict").to_string(),
                ground_truth: rows.get(rec, "ground_truth").to_string(),
                witness_tool: (!witness.is_empty()).then(|| witness.to_string()),
                classification: rows.parse(*line, rec, "classification")?,
            })
        })
        .collect()
}

/// Validates one record's counterexample. `None` unless the record claims a
/// violation.
fn verdict_for(
    r: &RunRecord,
    net: &Network,
    p: &Property,
    tol: Tolerances,
) -> Result<Option<(CEVerdict, Option<crate::vnnlib::Assignment>)>, HarnessError> {
    if r.status != ResultStatus::Violated {
        return Ok(None);
    }
    let Some(ce) = &r.ce else {
        return Ok(None);
    };
    let text = match fs::read_to_string(ce) {
        Ok(t) => t,
        Err(e) => {
            let reason = format!("cannot read {}: {e}", ce.display());
            return Ok(Some((CEVerdict::Malformed { reason }, None)));
        }
    };
    match parse_counterexample(&text, p.num_inputs(), p.num_outputs()) {
        Ok(a) => {
            let v = validate_counterexample(net, p, &a, tol)?;
            Ok(Some((v, Some(a))))
        }
        Err(e) => Ok(Some((
            CEVerdict::Malformed {
                reason: e.to_string(),
            },
            None,
        ))),
    }
}

/// Groups records by instance, validates every claimed counterexample, and
/// classifies each answer. Output order follows the input order.
pub fn adjudicate_records(
    records: &[RunRecord],
    tol: Tolerances,
) -> Result<Vec<AdjudicatedRecord>, HarnessError> {
    let mut groups: BTreeMap<(&str, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups
            .entry((r.benchmark.as_str(), r.instance))
            .or_default()
            .push(i);
    }
    let mut out: Vec<Option<AdjudicatedRecord>> = vec![None; records.len()];
    for members in groups.values() {
        let first = &records[members[0]];
        let net = load_network(&first.network).map_err(|source| HarnessError::Network {
            path: first.network.clone(),
            source,
        })?;
        let p = read_property(&first.spec)?;
        let mut submissions = Vec::with_capacity(members.len());
        let mut verdict_text = Vec::with_capacity(members.len());
        for &i in members {
            let r = &records[i];
            let checked = verdict_for(r, &net, &p, tol)?;
            verdict_text.push(match (&checked, r.status) {
                (Some((v, _)), _) => v.to_string(),
                (None, ResultStatus::Violated) => CE_ABSENT.to_string(),
                (None, _) => String::new(),
            });
            let (verdict, witness) = checked.map_or((None, None), |(v, a)| (Some(v), a));
            submissions.push(Submission {
                tool: r.tool.clone(),
                status: r.status,
                witness,
                verdict,
            });
        }
        let (gt, classes) = adjudicate_instance(&submissions);
        let witness_tool = match &gt {
            GroundTruth::Violated { tool, .. } => Some(tool.clone()),
            _ => None,
        };
        for ((&i, class), ce_verdict) in members.iter().zip(classes).zip(verdict_text) {
            out[i] = Some(AdjudicatedRecord {
                run: records[i].clone(),
                ce_verdict,
                ground_truth: gt.label().to_string(),
                witness_tool: witness_tool.clone(),
                classification: class,
            });
        }
    }
    Ok(out
        .into_iter()
        .map(|r| r.expect("every record is grouped"))
        .collect())
}
