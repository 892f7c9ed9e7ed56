use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjudicate::check_arity;
use crate::netir::{load_network, Network};
use crate::vnnlib::{parse_vnnlib, Property};

use super::HarnessError;

/// Upper limit on the sum of a benchmark's timeouts, in seconds.
pub const BENCHMARK_TIME_CAP: f64 = 21_600.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub benchmark: String,
    /// Row number in the instances file, from 0.
    pub index: usize,
    pub network: PathBuf,
    pub spec: PathBuf,
    /// Seconds.
    pub timeout: f64,
}

impl Instance {
    pub fn load(&self) -> Result<(Network, Property), HarnessError> {
        let net = load_network(&self.network).map_err(|source| HarnessError::Network {
            path: self.network.clone(),
            source,
        })?;
        let p = read_property(&self.spec)?;
        Ok((net, p))
    }
}

pub(crate) fn read_property(path: &Path) -> Result<Property, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_vnnlib(&text).map_err(|source| HarnessError::Spec {
        path: path.to_path_buf(),
        source,
    })
}

/// Name of the benchmark an instances file describes: its directory name,
/// or the file stem when the file has no named parent.
pub fn benchmark_name(csv: &Path) -> String {
    csv.parent()
        .and_then(Path::file_name)
        .or_else(|| csv.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "benchmark".into())
}

/// Reads `network,spec,timeout` rows (paths relative to the file, no header
/// or a header whose first field is `network`). Every network and spec is
/// loaded once to check that they exist, parse, and agree in arity.
pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>, HarnessError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let benchmark = benchmark_name(path);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| HarnessError::csv(path, e))?;

    let mut nets: HashMap<PathBuf, Network> = HashMap::new();
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        let bad = |message: String| HarnessError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row == 0
            && record
                .get(0)
                .is_some_and(|f| f.eq_ignore_ascii_case("network"))
        {
            continue;
        }
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let timeout: f64 = record[2]
            .parse()
            .map_err(|_| bad(format!("invalid timeout `{}`", &record[2])))?;
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(bad(format!("timeout must be positive, got {timeout}")));
        }
        let resolve = |field: &str| {
            let file = base.join(field);
            match file.is_file() {
                true => fs::canonicalize(&file).map_err(|e| HarnessError::io(&file, e)),
                false => Err(bad(format!("missing file {}", file.display()))),
            }
        };
        let network = resolve(&record[0])?;
        let spec = resolve(&record[1])?;
        if !nets.contains_key(&network) {
            let net = load_network(&network).map_err(|source| HarnessError::Network {
                path: network.clone(),
                source,
            })?;
            nets.insert(network.clone(), net);
        }
        let p = read_property(&spec)?;
        check_arity(&nets[&network], &p).map_err(|e| bad(e.to_string()))?;
        out.push(Instance {
            benchmark: benchmark.clone(),
            index: out.len(),
            network,
            spec,
            timeout,
        });
    }
    let total: f64 = out.iter().map(|i| i.timeout).sum();
    if total > BENCHMARK_TIME_CAP {
        log::warn!(
            "benchmark `{benchmark}`: timeouts sum to {total} s, above the {BENCHMARK_TIME_CAP} s cap"
        );
    }
    Ok(out)
}
