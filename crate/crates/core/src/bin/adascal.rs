use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adascal::audit;
use adascal::harness::{emit_report, recompute_report, run_scenario, ExperimentConfig};
use adascal::{Error, RunHistory};

const EXIT_VALIDATION: u8 = 1;
const EXIT_AUDIT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "adascal",
    version,
    about = "Bi-level adaptive scalarization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set runs=50`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a stored run history against the regret bounds.
    Audit {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the pure equilibria of the scalarized games of a config.
    Nash {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Recompute aggregates from a report directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Validation(Error),
    Audit(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e)
    }
}

fn simulate(config: PathBuf, overrides: Vec<String>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_file(&config, &overrides)?;
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::config("out_dir", "no output directory; pass --out"))?;
    let output = run_scenario(&cfg)?;
    emit_report(&output, &cfg, &dir)?;
    for e in &output.histogram.entries {
        println!("{:<6} {:>6} {:.4}", e.label, e.count, e.fraction);
    }
    println!("wrote {}", dir.display());
    match &output.audit {
        Some(a) if !a.runs_with_violations.is_empty() => Err(Failure::Audit(format!(
            "bound violations in runs {:?}",
            a.runs_with_violations
        ))),
        _ => Ok(()),
    }
}

fn audit_history(history: PathBuf, out: PathBuf) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&history).map_err(|e| Error::io(history.clone(), e))?;
    let h: RunHistory = serde_json::from_str(&text)
        .map_err(|e| Error::Serde(format!("{}: {e}", history.display())))?;
    let report = audit::audit(&h)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(&out, json + "\n").map_err(|e| Error::io(out.clone(), e))?;
    if report.passed() {
        println!("audit passed");
        Ok(())
    } else {
        let replay = report
            .log_integrity_error
            .as_deref()
            .map_or(String::new(), |e| format!("; log replay failed: {e}"));
        Err(Failure::Audit(format!(
            "{} bound violations{replay}",
            report.violations
        )))
    }
}

fn nash(config: PathBuf, overrides: Vec<String>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_file(&config, &overrides)?;
    let r = cfg.resolve()?;
    let print = |name: String, w: &adascal::WeightVector| -> Result<(), Failure> {
        let g = r.game.scalarize(&[w.clone(), r.opponent.clone()])?;
        let labels: Vec<String> = g
            .pure_nash()?
            .iter()
            .map(|p| r.game.profile_label(p))
            .collect();
        println!("{name} {:?}: {{{}}}", w.coords(), labels.join(", "));
        Ok(())
    };
    print("objective".into(), &r.objective)?;
    for (j, c) in r.candidates.iter().enumerate() {
        print(format!("candidate[{j}]"), c)?;
    }
    Ok(())
}

fn report(input: PathBuf) -> Result<(), Failure> {
    let s = recompute_report(&input)?;
    let json = serde_json::to_string_pretty(&s).map_err(|e| Error::Serde(e.to_string()))?;
    println!("{json}");
    if s.matches_stored == Some(false) {
        return Err(Error::InvalidArgument(
            "stored histogram.json disagrees with outcomes.csv".into(),
        )
        .into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            overrides,
            out,
        } => simulate(config, overrides, out),
        Command::Audit { history, out } => audit_history(history, out),
        Command::Nash { config, overrides } => nash(config, overrides),
        Command::Report { input } => report(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Audit(msg)) => {
            eprintln!("audit: {msg}");
            ExitCode::from(EXIT_AUDIT)
        }
    }
}
