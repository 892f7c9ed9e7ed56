use std::fs::{self, File};
use std::io;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use crate::adjudicate::ResultStatus;
use crate::solvers::{builtin_solve, Mode, SolveStatus};
use crate::vnnlib::write_counterexample;

use super::{HarnessError, Instance, RunRecord};

/// Placeholders substituted into external command templates.
pub const PLACEHOLDERS: [&str; 5] = ["network", "spec", "timeout", "result", "ce"];

/// Environment variable carrying the seed to tools.
pub const SEED_VAR: &str = "VNNARENA_SEED";

/// Limit on an untimed prepare command.
pub const PREPARE_LIMIT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    /// Runs [`builtin_solve`] in process.
    Builtin(Mode),
    /// Shell command templates run with `sh -c`. `prepare` is run before each
    /// instance and is not timed.
    External {
        prepare: Option<String>,
        run: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolAdapter {
    pub name: String,
    pub invocation: Invocation,
    /// Result, counterexample and log files go under
    /// `<results_dir>/<benchmark>/`.
    pub results_dir: PathBuf,
    pub seed: u64,
}

/// Files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub result: PathBuf,
    pub ce: PathBuf,
    pub log: PathBuf,
}

impl ToolAdapter {
    pub fn builtin(name: impl Into<String>, mode: Mode, results_dir: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            invocation: Invocation::Builtin(mode),
            results_dir: results_dir.into(),
            seed: 0,
        }
    }

    /// Templates missing placeholders are accepted with a warning; the tool
    /// then simply cannot see that value.
    pub fn external(
        name: impl Into<String>,
        prepare: Option<String>,
        run: impl Into<String>,
        results_dir: impl Into<PathBuf>,
    ) -> Result<Self, HarnessError> {
        let name = name.into();
        let run = run.into();
        if run.trim().is_empty() {
            return Err(HarnessError::Config(format!(
                "tool `{name}`: empty run command"
            )));
        }
        let missing: Vec<&str> = PLACEHOLDERS
            .iter()
            .copied()
            .filter(|p| !run.contains(&format!("{{{p}}}")))
            .collect();
        if !missing.is_empty() {
            log::warn!(
                "tool `{name}`: run command lacks placeholders {}",
                missing
                    .iter()
                    .map(|p| format!("{{{p}}}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        Ok(Self {
            name,
            invocation: Invocation::External { prepare, run },
            results_dir: results_dir.into(),
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn files(&self, inst: &Instance) -> RunFiles {
        let dir = self.results_dir.join(&inst.benchmark);
        let stem = format!("{:04}", inst.index);
        RunFiles {
            result: dir.join(format!("{stem}.result")),
            ce: dir.join(format!("{stem}.ce")),
            log: dir.join(format!("{stem}.log")),
        }
    }
}

/// Quotes `s` for `sh` unless it consists only of safe characters.
pub fn shell_quote(s: &str) -> String {
    let safe = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "_-./:=+,@%".contains(c));
    if safe {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Replaces each `{name}` placeholder with its shell-quoted value.
pub fn expand_template(template: &str, inst: &Instance, files: &RunFiles) -> String {
    let values = [
        ("network", inst.network.display().to_string()),
        ("spec", inst.spec.display().to_string()),
        ("timeout", inst.timeout.to_string()),
        ("result", files.result.display().to_string()),
        ("ce", files.ce.display().to_string()),
    ];
    values.iter().fold(template.to_string(), |cmd, (k, v)| {
        cmd.replace(&format!("{{{k}}}"), &shell_quote(v))
    })
}

fn record(
    adapter: &ToolAdapter,
    inst: &Instance,
    status: ResultStatus,
    raw: f64,
    ce: Option<PathBuf>,
) -> RunRecord {
    RunRecord {
        tool: adapter.name.clone(),
        benchmark: inst.benchmark.clone(),
        instance: inst.index,
        network: inst.network.clone(),
        spec: inst.spec.clone(),
        timeout: inst.timeout,
        status,
        raw,
        corrected: raw,
        ce,
    }
}

fn remove_stale(path: &Path) -> Result<(), HarnessError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(HarnessError::io(path, e)),
        _ => Ok(()),
    }
}

/// Runs one tool on one instance and times it. The result is read back from
/// the result file in both modes, so built-in and external tools go through
/// the same contract.
pub fn run_instance(adapter: &ToolAdapter, inst: &Instance) -> Result<RunRecord, HarnessError> {
    let files = adapter.files(inst);
    let dir = files.result.parent().expect("files live in a directory");
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for f in [&files.result, &files.ce, &files.log] {
        remove_stale(f)?;
    }
    let (raw, killed) = match &adapter.invocation {
        Invocation::Builtin(mode) => run_builtin(*mode, adapter.seed, inst, &files)?,
        Invocation::External { prepare, run } => {
            if let Some(prepare) = prepare {
                let cmd = expand_template(prepare, inst, &files);
                match run_shell(&cmd, adapter.seed, &files.log, PREPARE_LIMIT) {
                    Ok(Finished::Exited(s, _)) if s.success() => {}
                    outcome => {
                        log::warn!(
                            "tool `{}`: prepare failed ({outcome:?}): {cmd}",
                            adapter.name
                        );
                        return Ok(record(adapter, inst, ResultStatus::Error, 0.0, None));
                    }
                }
            }
            let cmd = expand_template(run, inst, &files);
            let limit = Duration::from_secs_f64(inst.timeout);
            match run_shell(&cmd, adapter.seed, &files.log, limit) {
                Err(e) => {
                    log::warn!("tool `{}`: cannot start `{cmd}`: {e}", adapter.name);
                    return Ok(record(adapter, inst, ResultStatus::Error, 0.0, None));
                }
                Ok(Finished::Killed) => (inst.timeout, true),
                Ok(Finished::Exited(status, elapsed)) => {
                    if !status.success() {
                        log::info!(
                            "tool `{}` exited with {status} on instance {}",
                            adapter.name,
                            inst.index
                        );
                    }
                    (elapsed, false)
                }
            }
        }
    };
    if killed {
        return Ok(record(adapter, inst, ResultStatus::Timeout, raw, None));
    }
    let status = match fs::read_to_string(&files.result) {
        Ok(text) => match text.lines().find(|l| !l.trim().is_empty()).map(str::parse) {
            Some(Ok(s)) => s,
            _ => {
                log::warn!(
                    "tool `{}`: unparseable result file {}",
                    adapter.name,
                    files.result.display()
                );
                ResultStatus::Error
            }
        },
        Err(_) => {
            log::warn!(
                "tool `{}`: no result file {}",
                adapter.name,
                files.result.display()
            );
            ResultStatus::Error
        }
    };
    let raw = if status == ResultStatus::Timeout {
        inst.timeout
    } else {
        raw.min(inst.timeout)
    };
    let ce = (status == ResultStatus::Violated && files.ce.is_file()).then(|| files.ce.clone());
    Ok(record(adapter, inst, status, raw, ce))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Returns wall-clock seconds; never reports a kill.
fn run_builtin(
    mode: Mode,
    seed: u64,
    inst: &Instance,
    files: &RunFiles,
) -> Result<(f64, bool), HarnessError> {
    let start = Instant::now();
    let outcome = inst.load().and_then(|(net, p)| {
        Ok(builtin_solve(
            mode,
            &net,
            &p,
            Duration::from_secs_f64(inst.timeout),
            seed,
        )?)
    });
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => {
            if let SolveStatus::Violated(a) = &o.status {
                write_file(&files.ce, &write_counterexample(a))?;
            }
            write_file(&files.result, &format!("{}\n", o.status.result_status()))?;
        }
        Err(e) => {
            write_file(&files.log, &format!("{e}\n"))?;
            write_file(&files.result, "error\n")?;
        }
    }
    Ok((elapsed, false))
}

#[derive(Debug)]
enum Finished {
    Exited(ExitStatus, f64),
    Killed,
}

fn kill_group(child: &Child) {
    // SAFETY: plain syscall; the child leads its own process group.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs `sh -c cmd` in a fresh process group, killing the whole group once
/// `limit` has elapsed.
fn run_shell(cmd: &str, seed: u64, log: &Path, limit: Duration) -> io::Result<Finished> {
    let out = File::options().create(true).append(true).open(log)?;
    let err = out.try_clone()?;
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .env(SEED_VAR, seed.to_string())
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(err)
        .process_group(0)
        .spawn()?;
    let deadline = start + limit;
    loop {
        if let Some(status) = child.try_wait()? {
            let elapsed = start.elapsed().as_secs_f64();
            kill_group(&child);
            return Ok(Finished::Exited(status, elapsed));
        }
        let now = Instant::now();
        if now >= deadline {
            kill_group(&child);
            child.wait()?;
            return Ok(Finished::Killed);
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(5)));
    }
}
