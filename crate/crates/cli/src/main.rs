//! `vnnarena`: run verification tools on benchmarks, adjudicate their
//! answers, and score them.
//!
//! Tools are configured in a TOML file with one `[[tool]]` table each:
//!
//! ```toml
//! [[tool]]
//! name = "bab"
//! builtin = "verify-first"        # or "attack-first"
//!
//! [[tool]]
//! name = "mytool"
//! prepare = "prepare.sh {network} {spec} {timeout}"   # optional, untimed
//! run = "run.sh {network} {spec} {timeout} {result} {ce}"
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use vnnarena::adjudicate::{check_arity, validate_counterexample, Tolerances, DEFAULT_TOLERANCE};
use vnnarena::harness::{
    adjudicate_records, gen_benchmark, load_instances, measure_overhead, read_adjudicated,
    read_records, run_all, write_adjudicated, write_records, AdjudicatedRecord, GenConfig,
    Instance, RunRecord, ToolAdapter, PROBE_TIMEOUT,
};
use vnnarena::netir::load_network;
use vnnarena::report::{
    emit_benchmark_table, emit_overall, scoreboard, write_report, write_scoreboard,
};
use vnnarena::solvers::Mode;
use vnnarena::vnnlib::{parse_counterexample, parse_vnnlib};

#[derive(Parser)]
#[command(version, about = "Neural network verification competition harness")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Tol {
    /// Absolute tolerance on input constraints.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol_in: f64,
    /// Absolute tolerance on output constraints.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol_out: f64,
}

impl Tol {
    fn get(&self) -> Result<Tolerances> {
        if !(self.tol_in >= 0.0 && self.tol_out >= 0.0) {
            bail!("tolerances must be nonnegative");
        }
        Ok(Tolerances {
            input: self.tol_in,
            output: self.tol_out,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Tool configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Instance lists (`network,spec,timeout`); repeatable.
    #[arg(long, required = true)]
    instances: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "VNNARENA_SEED", default_value_t = 0)]
    seed: u64,
    /// Run different tools concurrently (not for official timing).
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a VNN-LIB spec or a network and print a summary.
    Parse { file: PathBuf },
    /// Validate a counterexample file.
    CheckCe {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        ce: PathBuf,
        #[command(flatten)]
        tol: Tol,
    },
    /// Write a synthetic robustness benchmark with oracle labels.
    GenBenchmark {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "VNNARENA_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        inputs: usize,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "4,4")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        outputs: usize,
        /// Per-instance timeout in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
    },
    /// Measure each tool's overhead on the probe instances.
    MeasureOverhead {
        #[arg(long)]
        config: PathBuf,
        /// Only these tools.
        #[arg(long)]
        tool: Vec<String>,
        /// Where probe files and results go.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "VNNARENA_SEED", default_value_t = 0)]
        seed: u64,
        /// Per-probe timeout in seconds.
        #[arg(long, default_value_t = PROBE_TIMEOUT)]
        timeout: f64,
    },
    /// Run tools on instances and write `records.csv`.
    Run(RunArgs),
    /// Validate counterexamples and classify every answer.
    Adjudicate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tol: Tol,
    },
    /// Print benchmark tables and the overall ranking.
    Score {
        /// Adjudicated records.
        #[arg(long)]
        records: PathBuf,
        /// Also write table files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write tables, cactus plots and per-instance detail.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// run, adjudicate and report in one go.
    All {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        tol: Tol,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolConfig {
    name: String,
    builtin: Option<String>,
    prepare: Option<String>,
    run: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    #[serde(default)]
    tool: Vec<ToolConfig>,
}

fn load_tools(path: &Path, results: &Path, seed: u64) -> Result<Vec<ToolAdapter>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let config: Config = toml::from_str(&text).with_context(|| path.display().to_string())?;
    if config.tool.is_empty() {
        bail!("{}: no [[tool]] entries", path.display());
    }
    let mut tools: Vec<ToolAdapter> = Vec::new();
    for t in config.tool {
        if t.name.is_empty()
            || !t
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            bail!(
                "tool name `{}` must be nonempty and use only letters, digits, `-`, `_`, `.`",
                t.name
            );
        }
        if tools.iter().any(|o| o.name == t.name) {
            bail!("duplicate tool `{}`", t.name);
        }
        let dir = results.join(&t.name);
        let adapter = match (t.builtin, t.run) {
            (Some(mode), None) => {
                if t.prepare.is_some() {
                    bail!("tool `{}`: built-in tools take no prepare command", t.name);
                }
                let mode: Mode = mode.parse().map_err(anyhow::Error::msg)?;
                ToolAdapter::builtin(&t.name, mode, dir)
            }
            (None, Some(run)) => ToolAdapter::external(&t.name, t.prepare, run, dir)?,
            _ => bail!("tool `{}`: give exactly one of `builtin` and `run`", t.name),
        };
        tools.push(adapter.with_seed(seed));
    }
    Ok(tools)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Instance>> {
    let mut all: Vec<Instance> = Vec::new();
    for p in paths {
        let insts = load_instances(p)?;
        if let Some(first) = insts.first() {
            if all.iter().any(|i| i.benchmark == first.benchmark) {
                bail!(
                    "{}: benchmark name `{}` used twice",
                    p.display(),
                    first.benchmark
                );
            }
        }
        all.extend(insts);
    }
    Ok(all)
}

fn run(args: &RunArgs) -> Result<Vec<RunRecord>> {
    let tools = load_tools(&args.config, &args.out.join("results"), args.seed)?;
    let instances = load_all(&args.instances)?;
    let runs = run_all(&tools, &instances, args.parallel)?;
    for r in &runs {
        println!("{}: overhead {:.3} s", r.tool, r.overhead);
    }
    let records: Vec<RunRecord> = runs.into_iter().flat_map(|r| r.records).collect();
    let path = args.out.join("records.csv");
    write_records(&path, &records)?;
    println!("wrote {}", path.display());
    Ok(records)
}

fn print_scoreboard(records: &[AdjudicatedRecord]) {
    let board = scoreboard(records);
    for (name, rows) in &board.tables {
        println!("Benchmark {name}\n{}", emit_benchmark_table(rows).0);
    }
    print!("Overall\n{}", emit_overall(&board.overall).0);
}

fn parse_file(file: &Path) -> Result<()> {
    let is_network = file
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| ["onnx", "net", "txt"].contains(&e.to_ascii_lowercase().as_str()));
    if is_network {
        let net = load_network(file).with_context(|| file.display().to_string())?;
        println!(
            "network: {} inputs, {} outputs, {} nodes, {} ReLUs",
            net.num_inputs(),
            net.num_outputs(),
            net.nodes().len(),
            net.relu_count()
        );
    } else {
        let text = fs::read_to_string(file).with_context(|| file.display().to_string())?;
        let p = parse_vnnlib(&text).with_context(|| file.display().to_string())?;
        println!(
            "property: {} inputs, {} outputs, {} clauses",
            p.num_inputs(),
            p.num_outputs(),
            p.clauses().len()
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parse { file } => parse_file(&file)?,
        Command::CheckCe {
            network,
            spec,
            ce,
            tol,
        } => {
            let net = load_network(&network).with_context(|| network.display().to_string())?;
            let text = fs::read_to_string(&spec).with_context(|| spec.display().to_string())?;
            let p = parse_vnnlib(&text).with_context(|| spec.display().to_string())?;
            check_arity(&net, &p)?;
            let text = fs::read_to_string(&ce).with_context(|| ce.display().to_string())?;
            let a = parse_counterexample(&text, p.num_inputs(), p.num_outputs())
                .with_context(|| ce.display().to_string())?;
            let verdict = validate_counterexample(&net, &p, &a, tol.get()?)?;
            println!("{verdict}");
            if !verdict.is_valid() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::GenBenchmark {
            out,
            seed,
            count,
            inputs,
            hidden,
            outputs,
            timeout,
        } => {
            let cfg = GenConfig {
                seed,
                count,
                inputs,
                hidden,
                outputs,
                timeout,
            };
            let manifest = gen_benchmark(&out, &cfg)?;
            let holds = manifest.iter().filter(|m| m.label == "holds").count();
            println!(
                "wrote {} instances to {} ({holds} holds, {} violated)",
                manifest.len(),
                out.display(),
                manifest.len() - holds
            );
        }
        Command::MeasureOverhead {
            config,
            tool,
            out,
            seed,
            timeout,
        } => {
            if !(timeout > 0.0 && timeout.is_finite()) {
                bail!("--timeout must be positive");
            }
            let tools = load_tools(&config, &out, seed)?;
            if let Some(unknown) = tool.iter().find(|t| !tools.iter().any(|a| &a.name == *t)) {
                bail!("no tool named `{unknown}` in {}", config.display());
            }
            for adapter in tools
                .iter()
                .filter(|a| tool.is_empty() || tool.contains(&a.name))
            {
                println!(
                    "{}: {:.3} s",
                    adapter.name,
                    measure_overhead(adapter, timeout)?
                );
            }
        }
        Command::Run(args) => {
            run(&args)?;
        }
        Command::Adjudicate { records, out, tol } => {
            let adjudicated = adjudicate_records(&read_records(&records)?, tol.get()?)?;
            write_adjudicated(&out, &adjudicated)?;
            println!("wrote {}", out.display());
        }
        Command::Score { records, out } => {
            let adjudicated = read_adjudicated(&records)?;
            print_scoreboard(&adjudicated);
            if let Some(dir) = out {
                write_scoreboard(&dir, &scoreboard(&adjudicated))?;
            }
        }
        Command::Report { records, out } => {
            let adjudicated = read_adjudicated(&records)?;
            let base = records.parent().unwrap_or(Path::new(""));
            write_report(&out, &adjudicated, base)?;
            print_scoreboard(&adjudicated);
            println!("report written to {}", out.display());
        }
        Command::All { run: args, tol } => {
            let tol = tol.get()?;
            let records = run(&args)?;
            let adjudicated = adjudicate_records(&records, tol)?;
            write_adjudicated(args.out.join("adjudicated.csv"), &adjudicated)?;
            write_report(&args.out.join("report"), &adjudicated, &args.out)?;
            print_scoreboard(&adjudicated);
            println!("report written to {}", args.out.join("report").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
