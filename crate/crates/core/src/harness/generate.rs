use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netir::save_onnx;
use crate::solvers::{oracle_decide, ORACLE_MAX_INPUTS, ORACLE_MAX_RELUS};
use crate::vnnlib::write_vnnlib;

use super::synth::{random_center, random_network, robustness_property};
use super::HarnessError;

/// Shape of a synthetic robustness benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub count: usize,
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    /// Per-instance timeout in seconds.
    pub timeout: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 30,
            inputs: 2,
            hidden: vec![4, 4],
            outputs: 3,
            timeout: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub instance: usize,
    pub network: String,
    pub spec: String,
    /// `holds` or `violated`, decided by the exact oracle.
    pub label: String,
}

pub const EPSILONS: [f64; 4] = [0.0625, 0.125, 0.25, 0.5];

fn check(cfg: &GenConfig) -> Result<(), HarnessError> {
    let relus: usize = cfg.hidden.iter().sum();
    let problem = if cfg.count == 0 {
        Some("empty benchmark: count must be at least 1".to_string())
    } else if cfg.inputs == 0 || cfg.inputs > ORACLE_MAX_INPUTS {
        Some(format!(
            "inputs must be in 1..={ORACLE_MAX_INPUTS}, got {}",
            cfg.inputs
        ))
    } else if relus > ORACLE_MAX_RELUS {
        Some(format!(
            "{relus} ReLUs exceed the oracle limit of {ORACLE_MAX_RELUS}"
        ))
    } else if cfg.hidden.contains(&0) {
        Some("hidden layers must be nonempty".to_string())
    } else if cfg.outputs < 2 {
        Some("robustness properties need at least 2 outputs".to_string())
    } else if !(cfg.timeout > 0.0 && cfg.timeout.is_finite()) {
        Some(format!("timeout must be positive, got {}", cfg.timeout))
    } else {
        None
    };
    problem.map_or(Ok(()), |p| Err(HarnessError::Config(p)))
}

/// Writes `count` seeded robustness instances to `dir` as ONNX networks and
/// VNN-LIB specs, plus `instances.csv` and `manifest.csv` with the oracle's
/// label for each instance. Output is byte-identical for equal configs.
pub fn gen_benchmark(dir: &Path, cfg: &GenConfig) -> Result<Vec<ManifestEntry>, HarnessError> {
    check(cfg)?;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut manifest = Vec::with_capacity(cfg.count);
    let mut listing = String::new();
    for i in 0..cfg.count {
        let net = random_network(&mut rng, cfg.inputs, &cfg.hidden, cfg.outputs);
        let center = random_center(&mut rng, cfg.inputs);
        let eps = EPSILONS[rng.gen_range(0..EPSILONS.len())];
        let p = robustness_property(&net, &center, eps)?;
        let label = if oracle_decide(&net, &p)?.is_holds() {
            "holds"
        } else {
            "violated"
        };

        let network = format!("net_{i:03}.onnx");
        let spec = format!("prop_{i:03}.vnnlib");
        let net_path = dir.join(&network);
        save_onnx(&net, &net_path).map_err(|source| HarnessError::Network {
            path: net_path,
            source,
        })?;
        let spec_path = dir.join(&spec);
        fs::write(&spec_path, write_vnnlib(&p)).map_err(|e| HarnessError::io(&spec_path, e))?;
        listing.push_str(&format!("{network},{spec},{}\n", cfg.timeout));
        manifest.push(ManifestEntry {
            instance: i,
            network,
            spec,
            label: label.into(),
        });
    }
    let path = dir.join("instances.csv");
    fs::write(&path, listing).map_err(|e| HarnessError::io(&path, e))?;
    let mut text = String::from("instance,network,spec,label\n");
    for m in &manifest {
        text.push_str(&format!(
            "{},{},{},{}\n",
            m.instance, m.network, m.spec, m.label
        ));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(manifest)
}

/// Reads a `manifest.csv` written by [`gen_benchmark`].
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let bad = || HarnessError::Row {
            path: path.to_path_buf(),
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: "expected instance,network,spec,label".into(),
        };
        if rec.len() != 4 {
            return Err(bad());
        }
        out.push(ManifestEntry {
            instance: rec[0].parse().map_err(|_| bad())?,
            network: rec[1].to_string(),
            spec: rec[2].to_string(),
            label: rec[3].to_string(),
        });
    }
    Ok(out)
}
