//! Command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 filesystem error,
//! 3 internal error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::audit::{run_audit, AuditConfig};
use crate::cohort::{balance_cohort, join_metrics, load_cohort, AuditTable};
use crate::error::{Error, Result};
use crate::metrics::{compute_case_metrics, read_metrics_csv, write_metrics_csv, CaseMetrics};
use crate::report::render_report;
use crate::synth::{find_scenario, scenario_library, write_scenario, ScenarioConfig};
use crate::volume::read_mask;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "segaudit",
    version,
    about = "Fairness audits of segmentation quality across demographic groups"
)]
pub struct Cli {
    /// Format of diagnostics on stderr.
    #[arg(long, value_enum, default_value_t = LogFormat::Text, global = true)]
    pub log_format: LogFormat,

    /// Only report warnings and errors on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute Dice and HD95 for every matching gold/silver mask pair.
    Metrics(MetricsArgs),
    /// Run the fairness audit and write audit.json, audit.md and tables/.
    Audit(AuditArgs),
    /// Generate a synthetic cohort with known group-dependent degradation.
    Synth(SynthArgs),
    /// Downsample every level of an attribute to the smallest level.
    Balance(BalanceArgs),
    /// Print the tool version.
    Version,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory with `<case_id>_gold.mhd` headers.
    #[arg(long)]
    pub gold_dir: PathBuf,
    /// Directory with `<case_id>_silver.mhd` headers (may equal --gold-dir).
    #[arg(long)]
    pub silver_dir: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Joined audit table CSV.
    #[arg(long, conflicts_with_all = ["cohort", "metrics"], required_unless_present = "cohort")]
    pub table: Option<PathBuf>,
    /// Cohort CSV (case_id, age_years, ethnicity, data_source[, expert_rating]).
    #[arg(long, requires = "metrics")]
    pub cohort: Option<PathBuf>,
    /// Metrics CSV from `segaudit metrics`.
    #[arg(long, requires = "cohort")]
    pub metrics: Option<PathBuf>,
    /// Audit configuration JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated sensitive attributes.
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// Column naming the data source.
    #[arg(long)]
    pub source_column: Option<String>,
    /// Minimum group size for worst-case DPD/DIR pairs.
    #[arg(long)]
    pub min_group_size: Option<usize>,
    /// Minimum included cases for per-source analyses.
    #[arg(long)]
    pub min_source_size: Option<usize>,
    /// Seed for any resampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config", required_unless_present_any = ["config", "list"])]
    pub scenario: Option<String>,
    /// Scenario configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, required_unless_present_any = ["list", "print_config"])]
    pub out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of cases.
    #[arg(long)]
    pub n_cases: Option<usize>,
    /// List built-in scenarios and exit.
    #[arg(long)]
    pub list: bool,
    /// Print the resolved scenario JSON to stdout instead of generating.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// Audit table CSV.
    #[arg(long)]
    pub table: PathBuf,
    /// Attribute whose levels are equalised.
    #[arg(long, default_value = "age_group")]
    pub attribute: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging(format: LogFormat, quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let mut b = env_logger::Builder::new();
    b.filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr);
    if format == LogFormat::Json {
        b.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    } else {
        b.format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()));
    }
    // repeated initialisation (tests) keeps the first logger
    let _ = b.try_init();
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.log_format, cli.quiet);
    log::info!("segaudit {}", env!("CARGO_PKG_VERSION"));
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            log::error!("{e}");
            exit_code(&e)
        }
        Err(_) => {
            log::error!("internal error");
            EXIT_INTERNAL
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Audit(a) => cmd_audit(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Balance(a) => cmd_balance(&a),
        Command::Version => {
            println!("segaudit {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

/// Case ids of `<id><suffix>.mhd` files in `dir`.
fn case_ids(dir: &Path, suffix: &str) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name
            .strip_suffix(".mhd")
            .and_then(|s| s.strip_suffix(suffix))
        {
            if !id.is_empty() {
                ids.insert(id.to_string());
            }
        }
    }
    Ok(ids)
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    log::info!(
        "metrics: gold_dir={} silver_dir={} out={} jobs={}",
        a.gold_dir.display(),
        a.silver_dir.display(),
        a.out.display(),
        a.jobs
    );
    let gold = case_ids(&a.gold_dir, "_gold")?;
    let silver = case_ids(&a.silver_dir, "_silver")?;
    for id in gold.symmetric_difference(&silver) {
        let side = if gold.contains(id) { "silver" } else { "gold" };
        log::warn!("case {id}: no {side} mask");
    }
    let matched: Vec<&String> = gold.intersection(&silver).collect();
    if matched.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no matched gold/silver pairs ({} gold, {} silver)",
            gold.len(),
            silver.len()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let rows: Vec<CaseMetrics> = pool.install(|| {
        matched
            .par_iter()
            .map(|id| {
                let g = read_mask(a.gold_dir.join(format!("{id}_gold.mhd")))?;
                let s = read_mask(a.silver_dir.join(format!("{id}_silver.mhd")))?;
                compute_case_metrics(id, &g, &s)
                    .map_err(|e| Error::invalid(format!("case {id}: {e}")))
            })
            .collect::<Result<_>>()
    })?;
    write_file(&a.out, |f| write_metrics_csv(&rows, f))?;
    log::info!("metrics: wrote {} rows", rows.len());
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    body(&mut f)
}

pub fn resolve_audit_config(a: &AuditArgs) -> Result<AuditConfig> {
    let mut cfg = match &a.config {
        Some(p) => AuditConfig::load(p)?,
        None => AuditConfig::default(),
    };
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = &a.attributes {
        cfg.attributes = v.clone();
    }
    if let Some(v) = &a.source_column {
        cfg.source_column = v.clone();
    }
    if let Some(v) = a.min_group_size {
        cfg.min_group_size = v;
    }
    if let Some(v) = a.min_source_size {
        cfg.min_source_size = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_audit(a: &AuditArgs) -> Result<()> {
    let cfg = resolve_audit_config(a)?;
    log::info!("audit config: {}", serde_json::to_string(&cfg)?);
    let table = match (&a.table, &a.cohort, &a.metrics) {
        (Some(t), _, _) => AuditTable::load(t)?,
        (None, Some(c), Some(m)) => {
            let cohort = load_cohort(c)?;
            let metrics = read_metrics_csv(m)?;
            let (table, report) = join_metrics(&cohort, &metrics)?;
            for id in &report.cohort_only {
                log::warn!("case {id}: in cohort but has no metrics");
            }
            for id in &report.metrics_only {
                log::warn!("case {id}: has metrics but no cohort record");
            }
            table
        }
        _ => {
            return Err(Error::invalid(
                "give --table or both --cohort and --metrics",
            ))
        }
    };
    let report = run_audit(&table, &cfg)?;
    render_report(&report, &a.out)?;
    table.save(a.out.join("audit_table.csv"))?;
    log::info!(
        "audit: {} cases, {} exclusions, report in {}",
        report.n_cases,
        report.exclusions.len(),
        a.out.display()
    );
    Ok(())
}

pub fn resolve_scenario(a: &SynthArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&a.scenario, &a.config) {
        (Some(name), _) => find_scenario(name)?,
        (None, Some(p)) => ScenarioConfig::load(p)?,
        (None, None) => return Err(Error::invalid("give --scenario or --config")),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_cases {
        cfg.n_cases = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.list {
        for s in scenario_library() {
            println!("{}\t{} cases\tseed {}", s.name, s.n_cases, s.seed);
        }
        return Ok(());
    }
    let cfg = resolve_scenario(a)?;
    log::info!("synth config: {}", serde_json::to_string(&cfg)?);
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let out = a
        .out
        .as_ref()
        .ok_or_else(|| Error::invalid("--out is required"))?;
    let manifest = write_scenario(&cfg, out)?;
    log::info!(
        "synth: wrote {} cases to {}",
        manifest.cases.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_balance(a: &BalanceArgs) -> Result<()> {
    log::info!(
        "balance: table={} attribute={} seed={} out={}",
        a.table.display(),
        a.attribute,
        a.seed,
        a.out.display()
    );
    let table = AuditTable::load(&a.table)?;
    let balanced = balance_cohort(&table, &a.attribute, a.seed)?;
    write_file(&a.out, |f| balanced.write_csv(f))?;
    log::info!("balance: {} of {} rows kept", balanced.len(), table.len());
    Ok(())
}
