use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use daf_core::engine::{mitigate, run_plan, write_reports};
use daf_core::error::Error;
use daf_core::plan::{validate_plan, AuditPlan};
use daf_core::registry::registry;
use daf_core::report::{AnalysisCard, CardOutput, MitigationMode, SelectionSpec};

/// Audit text and image-caption datasets for human representation.
#[derive(Parser)]
#[command(name = "daf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis in a plan and write report.json and report.md.
    Run {
        plan: PathBuf,
        /// Output directory (overrides the plan's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the plan's `threads`).
        #[arg(long)]
        threads: Option<usize>,
        /// Log progress and skipped lines.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Check a plan without scanning any data.
    Validate { plan: PathBuf },
    /// Print the analysis registry.
    ListAnalyses,
    /// Remove or tag selected records, writing a copy of the dataset and a manifest.
    Mitigate {
        plan: PathBuf,
        /// pii | hateful | duplicates | signal:NAME>=T | ids:PATH
        #[arg(long)]
        selection: SelectionSpec,
        #[arg(long, value_parser = ["remove", "tag"])]
        mode: String,
        /// Output dataset path (default: <output_dir>/mitigated.<ext>).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, short)]
        verbose: bool,
    },
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

/// Exit status: 2 for an invalid plan, 1 for any other failure.
fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::InvalidPlan(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(path: &Path) -> Result<AuditPlan, ExitCode> {
    validate_plan(path).map_err(|e| fail(&e))
}

fn summary(card: &AnalysisCard) -> String {
    let detail = match &card.output {
        CardOutput::Unsupported { .. } => "unsupported".to_owned(),
        CardOutput::DisaggregatedTable(t) => format!("{} flagged association(s)", t.flagged().count()),
        _ => format!("{} record(s)", card.provenance.records_scanned),
    };
    format!(
        "{:<24} {:<20} {detail}; {} action(s)",
        card.analysis_id,
        card.output.kind().as_str(),
        card.action.len()
    )
}

fn cmd_run(plan: &Path, out: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    let mut plan = match load(plan) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if let Some(out) = out {
        plan.output_dir = out;
    }
    if let Some(t) = threads {
        plan.threads = t.max(1);
    }
    let output = match run_plan(&plan) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    for card in &output.cards {
        println!("{}", summary(card));
    }
    match write_reports(&output, &plan.output_dir) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn cmd_validate(plan: &Path) -> ExitCode {
    match load(plan) {
        Ok(p) => {
            println!(
                "plan is valid: {} analyses, config digest {}",
                p.analyses.len(),
                p.config_digest
            );
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn cmd_list() -> ExitCode {
    println!("id\ttitle\tanalysis_object\teffort\tdependencies");
    for spec in registry() {
        let objects: Vec<String> = spec.objects.iter().map(|o| format!("{o:?}")).collect();
        let effort = match spec.effort_note {
            Some(note) => format!("{:?} ({note})", spec.effort),
            None => format!("{:?}", spec.effort),
        };
        let deps = if spec.dependencies.is_empty() {
            "none".to_owned()
        } else {
            spec.dependencies.join("; ")
        };
        println!("{}\t{}\t{}\t{effort}\t{deps}", spec.id, spec.title, objects.join(", "));
    }
    ExitCode::SUCCESS
}

fn cmd_mitigate(plan: &Path, selection: &SelectionSpec, mode: &str, output: Option<PathBuf>) -> ExitCode {
    let plan = match load(plan) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mode: MitigationMode = match mode.parse() {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let output = output.unwrap_or_else(|| {
        let ext = plan.dataset.path.extension().and_then(|e| e.to_str()).unwrap_or("txt");
        plan.output_dir.join(format!("mitigated.{ext}"))
    });
    match mitigate(&plan, selection, mode, &output) {
        Ok((m, manifest)) => {
            println!(
                "{}: {} records in, {} out, {} affected",
                m.selection, m.records_in, m.records_out, m.affected
            );
            println!("wrote {}", output.display());
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            plan,
            out,
            threads,
            verbose,
        } => {
            init_logging(verbose);
            cmd_run(&plan, out, threads)
        }
        Command::Validate { plan } => {
            init_logging(false);
            cmd_validate(&plan)
        }
        Command::ListAnalyses => cmd_list(),
        Command::Mitigate {
            plan,
            selection,
            mode,
            output,
            verbose,
        } => {
            init_logging(verbose);
            cmd_mitigate(&plan, &selection, &mode, output)
        }
    }
}
