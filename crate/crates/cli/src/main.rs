use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gaslab::analysis::classify_trace;
use gaslab::asm::corpus::{
    corpus_contract, corpus_sender, write_corpus, write_programs, CorpusProgram,
};
use gaslab::asm::random::random_corpus;
use gaslab::asm::{assemble, disassemble};
use gaslab::estimators::{
    classify_budget, estimate_gas, min_gas_limit_exact, non_reverting_intervals, SearchBounds,
};
use gaslab::harness::synthetic::{synthetic_scenario, DEFAULT_SEED, GENESIS_TIMESTAMP};
use gaslab::harness::{
    compute_metrics, csv_to_json, divergence_report, divergence_summary, emit_report, json_to_csv,
    kruskal_rows, load_scenario, metrics_table, metrics_to_csv, run_experiment, ContextMode,
    Estimator, ExperimentConfig, LoadOptions, ReportFormat, Scenario, DEFAULT_DELTAS,
};
use gaslab::interpreter::{execute_with, ExecOptions, ExecutionOutcome, HaltReason};
use gaslab::schedule::ScheduleOverrides;
use gaslab::types::{parse_hex_bytes, parse_wei, to_hex_prefixed};
use gaslab::{BlockContext, Gas, GasSchedule, Transaction, WorldState};

#[derive(Parser)]
#[command(name = "gaslab", version, about = "EVM gas laboratory: interpreter, gas-limit estimators and replay harness")]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// JSON file of gas schedule overrides.
    #[arg(long, global = true)]
    schedule: Option<PathBuf>,
    /// Seed for generated programs and scenarios.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Warn about unknown scenario fields instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    /// Block context for replays: the state's block (prev) or the transaction's own block.
    #[arg(long, global = true, default_value_t = ContextMode::Prev)]
    context: ContextMode,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble mnemonics into hex bytecode.
    Assemble {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Disassemble hex bytecode (inline or from a file).
    Disassemble { input: String },
    /// Execute a transaction and print the outcome.
    Run(TargetArgs),
    /// Execute with a per-step trace (JSON lines), then the outcome.
    Trace(TargetArgs),
    /// Binary-search gas estimate.
    Estimate(TargetArgs),
    /// Smallest committing gas limit by linear scan.
    Oracle {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 1_000_000)]
        scan_cap: Gas,
    },
    /// Runs of committing gas limits over a range.
    Intervals {
        #[command(flatten)]
        target: TargetArgs,
        /// Defaults to the intrinsic gas.
        #[arg(long)]
        lo: Option<Gas>,
        /// Defaults to the search upper bound.
        #[arg(long)]
        hi: Option<Gas>,
    },
    /// Dataset class of a transaction and the outcome class of its budget.
    Classify {
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Replay a scenario at several state offsets and compare estimators.
    Evaluate {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTAS.to_vec())]
        deltas: Vec<u64>,
        /// Comma-separated, e.g. EstimateGas,TraceCall,RGUM-mean. Default: all.
        #[arg(long, value_delimiter = ',')]
        estimators: Vec<Estimator>,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Per-record report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregated metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Gas used versus minimum gas limit for every scenario transaction.
    Divergence {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a record report between JSON and CSV, by file extension.
    ReportConvert { input: PathBuf, output: PathBuf },
    /// Write the seeded synthetic scenario.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the corpus programs as assembly files.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        /// Also write this many seeded random single-interval programs.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// Scenario transaction id.
    #[arg(long)]
    tx: Option<String>,
    /// Replay against the state at the end of this block; defaults to the
    /// block before the transaction's.
    #[arg(long, requires = "tx")]
    at_block: Option<u64>,
    /// Assembly or hex bytecode file, installed at the corpus contract address.
    #[arg(long, conflicts_with = "tx")]
    code: Option<PathBuf>,
    /// Gas limit; defaults to the transaction's own, or 1000000 with --code.
    #[arg(long)]
    gas: Option<Gas>,
    /// Call data as hex (with --code).
    #[arg(long, requires = "code")]
    data: Option<String>,
    /// Value in wei (with --code).
    #[arg(long, requires = "code")]
    value: Option<String>,
    /// Block gas limit (with --code).
    #[arg(long, default_value_t = 30_000_000)]
    block_gas_limit: Gas,
}

struct Target {
    state: WorldState,
    block: BlockContext,
    tx: Transaction,
    schedule: GasSchedule,
}

struct Globals {
    scenario: Option<PathBuf>,
    schedule: Option<PathBuf>,
    lenient: bool,
    context: ContextMode,
    threads: usize,
}

impl Globals {
    fn overrides(&self) -> Result<Option<ScheduleOverrides>> {
        let Some(path) = &self.schedule else {
            return Ok(None);
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overrides = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(overrides))
    }

    fn scenario(&self) -> Result<Scenario> {
        let path = self
            .scenario
            .as_ref()
            .ok_or_else(|| anyhow!("--scenario is required"))?;
        let options = LoadOptions {
            lenient: self.lenient,
            schedule: self.overrides()?,
        };
        load_scenario(path, &options).with_context(|| format!("loading {}", path.display()))
    }

    fn target(&self, args: &TargetArgs) -> Result<Target> {
        if let Some(id) = &args.tx {
            let scenario = self.scenario()?;
            let stx = scenario
                .tx(id)
                .ok_or_else(|| anyhow!("no transaction {id:?} in the scenario"))?;
            let at = match args.at_block {
                Some(n) => n,
                None => stx
                    .block
                    .checked_sub(1)
                    .ok_or_else(|| anyhow!("transaction {id} is in block 0"))?,
            };
            let state = scenario.state_at(at)?;
            let ctx_block = match self.context {
                ContextMode::Prev => at,
                ContextMode::Own => stx.block,
            };
            let block = scenario
                .block(ctx_block)
                .ok_or_else(|| anyhow!("scenario has no block {ctx_block} for the {} context", self.context))?
                .clone();
            let mut tx = stx.tx.clone();
            if let Some(g) = args.gas {
                tx.gas_limit = g;
            }
            return Ok(Target {
                state,
                block,
                tx,
                schedule: scenario.schedule.clone(),
            });
        }

        let path = args
            .code
            .as_ref()
            .ok_or_else(|| anyhow!("give either --tx (with --scenario) or --code"))?;
        let program = load_program(path)?;
        let schedule = match self.overrides()? {
            Some(o) => o.apply(&GasSchedule::default())?,
            None => GasSchedule::default(),
        };
        let mut tx = Transaction::call(corpus_sender(), corpus_contract(), args.gas.unwrap_or(1_000_000));
        if let Some(d) = &args.data {
            tx.data = parse_hex_bytes(d)?;
        }
        if let Some(v) = &args.value {
            tx.value = parse_wei(v)?;
        }
        Ok(Target {
            state: program.state(),
            block: BlockContext::new(1, GENESIS_TIMESTAMP, args.block_gas_limit),
            tx,
            schedule,
        })
    }
}

/// Assembly (with optional storage header) or a hex bytecode file.
fn load_program(path: &Path) -> Result<CorpusProgram> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let trimmed = text.trim();
    if trimmed.starts_with("0x") && !trimmed.contains(char::is_whitespace) {
        let code = parse_hex_bytes(trimmed)?;
        return Ok(CorpusProgram {
            name,
            source: disassemble(&code),
            code,
            storage: Vec::new(),
        });
    }
    CorpusProgram::parse(name, &text).with_context(|| format!("assembling {}", path.display()))
}

fn outcome_json(o: &ExecutionOutcome) -> Value {
    let mut v = json!({
        "z": o.z,
        "gas_used": o.gas_used,
        "gas_cost": o.gas_cost,
        "refund": o.refund_applied,
        "halt": o.halt.to_string(),
        "intrinsic_gas": o.intrinsic_gas,
        "remaining_gas": o.remaining_gas,
    });
    if let HaltReason::Return(data) | HaltReason::Revert(data) = &o.halt {
        v["output"] = json!(to_hex_prefixed(data));
    }
    v
}

fn execute_target(t: &Target, options: ExecOptions) -> Result<ExecutionOutcome> {
    let mut state = t.state.fork();
    Ok(execute_with(&mut state, &t.block, &t.tx, &t.schedule, options)?)
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(v)?)?;
    Ok(())
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn format_of(path: &Path) -> Result<ReportFormat> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_default();
    ext.parse()
        .map_err(|_| anyhow!("cannot tell the format of {} (expected .csv or .json)", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = Globals {
        scenario: cli.scenario,
        schedule: cli.schedule,
        lenient: cli.lenient,
        context: cli.context,
        threads: cli.threads,
    };

    match cli.command {
        Command::Assemble { input, output } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let code = assemble(&text).with_context(|| format!("assembling {}", input.display()))?;
            write_or_print(output.as_deref(), &(to_hex_prefixed(&code) + "\n"))?;
        }
        Command::Disassemble { input } => {
            let hex = if Path::new(&input).is_file() {
                fs::read_to_string(&input)?.trim().to_string()
            } else {
                input
            };
            let code = parse_hex_bytes(&hex)?;
            let text = disassemble(&code);
            if !text.is_empty() {
                println!("{text}");
            }
        }
        Command::Run(args) => {
            let t = g.target(&args)?;
            print_json(&outcome_json(&execute_target(&t, ExecOptions::QUIET)?))?;
        }
        Command::Trace(args) => {
            let t = g.target(&args)?;
            let outcome = execute_target(&t, ExecOptions::TRACE)?;
            let mut out = io::stdout().lock();
            for step in &outcome.trace {
                writeln!(out, "{}", serde_json::to_string(step)?)?;
            }
            writeln!(out, "{}", serde_json::to_string(&outcome_json(&outcome))?)?;
        }
        Command::Estimate(args) => {
            let t = g.target(&args)?;
            let estimate = estimate_gas(&t.state, &t.block, &t.tx, &t.schedule)?;
            print_json(&json!({ "estimate": estimate }))?;
        }
        Command::Oracle { target, scan_cap } => {
            let t = g.target(&target)?;
            let estimate = min_gas_limit_exact(&t.state, &t.block, &t.tx, &t.schedule, scan_cap)?;
            print_json(&json!({ "estimate": estimate }))?;
        }
        Command::Intervals { target, lo, hi } => {
            let t = g.target(&target)?;
            let bounds = SearchBounds::compute(&t.state, &t.block, &t.tx, &t.schedule);
            let lo = lo.unwrap_or(bounds.g0);
            let hi = hi.unwrap_or(bounds.g_top);
            if hi < lo {
                bail!("empty range {lo}..={hi}");
            }
            let intervals = non_reverting_intervals(&t.state, &t.block, &t.tx, &t.schedule, lo, hi)?;
            print_json(&json!({ "lo": lo, "hi": hi, "intervals": intervals }))?;
        }
        Command::Classify { target } => {
            let t = g.target(&target)?;
            let bounds = SearchBounds::compute(&t.state, &t.block, &t.tx, &t.schedule);
            let g_min = estimate_gas(&t.state, &t.block, &t.tx, &t.schedule).ok().flatten();
            let run = execute_with(&mut t.state.fork(), &t.block, &t.tx, &t.schedule, ExecOptions::TRACE);
            let class = run.as_ref().ok().map(|o| classify_trace(&o.trace));
            let outcome = classify_budget(t.tx.gas_limit, &bounds, g_min, run.as_ref())?;
            print_json(&json!({
                "gas_limit": t.tx.gas_limit,
                "bounds": bounds,
                "g_min": g_min,
                "outcome": outcome,
                "dataset": class.as_ref().map(|c| c.dataset),
                "triggering_opcodes": class.map(|c| c.triggering_opcodes),
            }))?;
        }
        Command::Evaluate {
            deltas,
            estimators,
            format,
            out,
            metrics,
        } => {
            let scenario = g.scenario()?;
            let config = ExperimentConfig {
                deltas,
                estimators: if estimators.is_empty() { Estimator::all() } else { estimators },
                context: g.context,
                threads: g.threads,
            };
            let report = run_experiment(&scenario, &config)?;
            if let Some(path) = &out {
                emit_report(&report.records, format, path)?;
            }
            let rows = compute_metrics(&report.records);
            if let Some(path) = &metrics {
                fs::write(path, metrics_to_csv(&rows)?).with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{}", metrics_table(&rows));
            for k in kruskal_rows(&report.records) {
                println!(
                    "kruskal-wallis {} delta={} {}: H={:.4} p={:.4e}{}",
                    k.experiment,
                    k.delta,
                    k.dataset,
                    k.h,
                    k.p,
                    if k.degenerate { " (all tied)" } else { "" }
                );
            }
            for e in &report.exclusions {
                eprintln!(
                    "{} delta={}: {} evaluated, {} excluded",
                    e.experiment, e.delta, e.evaluated, e.excluded
                );
            }
            eprintln!("{} skipped", report.skipped.len());
            for s in &report.skipped {
                log::info!("skipped {} at {:?}: {}", s.tx_id, s.delta, s.reason);
            }
        }
        Command::Divergence { out } => {
            let scenario = g.scenario()?;
            let (rows, skipped) = divergence_report(&scenario, g.context, g.threads)?;
            let doc = json!({
                "rows": rows,
                "summary": divergence_summary(&rows),
                "skipped": skipped,
            });
            write_or_print(out.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        Command::ReportConvert { input, output } => {
            let (from, to) = (format_of(&input)?, format_of(&output)?);
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let converted = match (from, to) {
                (ReportFormat::Json, ReportFormat::Csv) => json_to_csv(&text)?,
                (ReportFormat::Csv, ReportFormat::Json) => csv_to_json(&text)?,
                _ => bail!("input and output are both {from}"),
            };
            fs::write(&output, converted).with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Synth { out } => {
            fs::write(&out, synthetic_scenario(cli.seed).to_json())
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Corpus { out, random } => {
            let mut written = write_corpus(&out)?;
            written.extend(write_programs(&out, &random_corpus(cli.seed, random))?);
            for p in written {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
