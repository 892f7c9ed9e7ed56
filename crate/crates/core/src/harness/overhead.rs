use std::fs;
use std::path::Path;

use crate::adjudicate::ResultStatus;
use crate::netir::{save_onnx, trivial_network};
use crate::vnnlib::{write_vnnlib, Clause, LinearConstraint, Property, VarKind};

use super::{run_instance, HarnessError, Instance, RunRecord, ToolAdapter};

pub const PROBE_COUNT: usize = 5;
pub const PROBE_TIMEOUT: f64 = 60.0;
pub const PROBE_BENCHMARK: &str = "_probes";

/// Writes the probe suite into `dir`: `trivial_network(k)` for `k = 1..=5`,
/// each with inputs in `[0, 1]` and the unreachable output `Y_0 >= 2`.
pub fn write_probes(dir: &Path, timeout: f64) -> Result<Vec<Instance>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    (1..=PROBE_COUNT)
        .map(|k| {
            let network = dir.join(format!("probe_{k}.onnx"));
            let spec = dir.join(format!("probe_{k}.vnnlib"));
            save_onnx(&trivial_network(k), &network).map_err(|source| HarnessError::Network {
                path: network.clone(),
                source,
            })?;
            let mut constraints: Vec<LinearConstraint> = (0..k)
                .flat_map(|i| {
                    [
                        LinearConstraint::lower(VarKind::Input, i, 0.0),
                        LinearConstraint::upper(VarKind::Input, i, 1.0),
                    ]
                })
                .collect();
            constraints.push(LinearConstraint::lower(VarKind::Output, 0, 2.0));
            let p = Property::new(k, k, vec![Clause::from_constraints(constraints)])?;
            fs::write(&spec, write_vnnlib(&p)).map_err(|e| HarnessError::io(&spec, e))?;
            Ok(Instance {
                benchmark: PROBE_BENCHMARK.into(),
                index: k - 1,
                network,
                spec,
                timeout,
            })
        })
        .collect()
}

/// Minimum over the runs that finished (status other than error or timeout).
pub fn minimum_runtime(runs: &[(ResultStatus, f64)]) -> Option<f64> {
    runs.iter()
        .filter(|(s, _)| !matches!(s, ResultStatus::Error | ResultStatus::Timeout))
        .map(|&(_, t)| t)
        .min_by(f64::total_cmp)
}

/// The tool's fastest raw runtime on the probe suite, each probe limited to
/// `timeout` seconds, or 0 with a warning if every probe failed.
pub fn measure_overhead(adapter: &ToolAdapter, timeout: f64) -> Result<f64, HarnessError> {
    let probes = write_probes(
        &adapter.results_dir.join(PROBE_BENCHMARK).join("instances"),
        timeout,
    )?;
    let mut runs = Vec::with_capacity(probes.len());
    for inst in &probes {
        let r = run_instance(adapter, inst)?;
        runs.push((r.status, r.raw));
    }
    Ok(minimum_runtime(&runs).unwrap_or_else(|| {
        log::warn!(
            "tool `{}`: every overhead probe failed; using overhead 0",
            adapter.name
        );
        0.0
    }))
}

/// Sets `corrected = max(raw - overhead, 0)`.
pub fn apply_overhead(mut records: Vec<RunRecord>, overhead: f64) -> Vec<RunRecord> {
    assert!(overhead >= 0.0, "overhead must be nonnegative");
    for r in &mut records {
        r.corrected = (r.raw - overhead).max(0.0);
    }
    records
}
