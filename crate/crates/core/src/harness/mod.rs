//! Running tools on benchmark instances.
//!
//! Instances come from `network,spec,timeout` CSV files. Each tool is either
//! the built-in solver or a pair of shell command templates; both write a
//! result file whose first line is the status word and, for `violated`, a
//! counterexample file next to it. Runtimes are wall clock around the run
//! command and are corrected by the tool's overhead, its fastest time on a
//! suite of trivial probe instances.

mod adapter;
mod generate;
mod instances;
mod overhead;
mod records;
pub mod synth;

use std::path::{Path, PathBuf};

pub use adapter::{
    expand_template, run_instance, shell_quote, Invocation, RunFiles, ToolAdapter, PLACEHOLDERS,
    PREPARE_LIMIT, SEED_VAR,
};
pub use generate::{gen_benchmark, read_manifest, GenConfig, ManifestEntry, EPSILONS};
pub use instances::{benchmark_name, load_instances, Instance, BENCHMARK_TIME_CAP};
pub use overhead::{
    apply_overhead, measure_overhead, minimum_runtime, write_probes, PROBE_BENCHMARK, PROBE_COUNT,
    PROBE_TIMEOUT,
};
pub use records::{
    adjudicate_records, read_adjudicated, read_records, write_adjudicated, write_records,
    AdjudicatedRecord, RunRecord, CE_ABSENT,
};

use crate::adjudicate::AdjudicateError;
use crate::netir::NetError;
use crate::solvers::SolverError;
use crate::vnnlib::VnnlibError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}:{line}: {message}", path.display())]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Network { path: PathBuf, source: NetError },
    #[error("{}: {source}", path.display())]
    Spec { path: PathBuf, source: VnnlibError },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Property(#[from] VnnlibError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Adjudicate(#[from] AdjudicateError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Overhead and overhead-corrected records for one tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolRun {
    pub tool: String,
    pub overhead: f64,
    pub records: Vec<RunRecord>,
}

fn run_tool(adapter: &ToolAdapter, instances: &[Instance]) -> Result<ToolRun, HarnessError> {
    let longest = instances.iter().map(|i| i.timeout).fold(0.0, f64::max);
    let probe_timeout = if longest > 0.0 {
        longest.min(PROBE_TIMEOUT)
    } else {
        PROBE_TIMEOUT
    };
    let overhead = measure_overhead(adapter, probe_timeout)?;
    log::info!("tool `{}`: overhead {overhead:.3} s", adapter.name);
    let mut records = Vec::with_capacity(instances.len());
    for inst in instances {
        let r = run_instance(adapter, inst)?;
        log::info!(
            "{} {}#{}: {} in {:.3} s",
            adapter.name,
            inst.benchmark,
            inst.index,
            r.status,
            r.raw
        );
        records.push(r);
    }
    Ok(ToolRun {
        tool: adapter.name.clone(),
        overhead,
        records: apply_overhead(records, overhead),
    })
}

/// Runs every tool on every instance, one instance at a time per tool, after
/// measuring its overhead with probes limited to the longest instance timeout
/// (at most [`PROBE_TIMEOUT`]). With
/// `parallel`, different tools run concurrently; timings are then not fit
/// for official scoring. Results are in tool order either way.
pub fn run_all(
    adapters: &[ToolAdapter],
    instances: &[Instance],
    parallel: bool,
) -> Result<Vec<ToolRun>, HarnessError> {
    if !parallel {
        return adapters.iter().map(|a| run_tool(a, instances)).collect();
    }
    log::warn!("parallel mode: runtimes are not suitable for official scoring");
    std::thread::scope(|s| {
        let handles: Vec<_> = adapters
            .iter()
            .map(|a| s.spawn(move || run_tool(a, instances)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tool runner panicked"))
            .collect()
    })
}
