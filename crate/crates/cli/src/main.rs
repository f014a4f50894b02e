//! `rgt`: solve sessions, run scenarios, check and export group graphs, or
//! start the HTTP service.
//!
//! Exit codes: 0 success, 2 invalid input, 3 group not decomposable,
//! 4 containment guard exceeded. Errors print one `<Code>: message` line
//! on stderr.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rgt_core::report::render_session_text;
use rgt_core::schema::from_json;
use rgt_core::{render_diagonal_form, run_scenario, GraphFile, ScenarioFile, SessionFile};

#[derive(Debug, Parser)]
#[command(name = "rgt", version, about = "Reflexive game theory decision engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a single session file and list every subject's decision interval.
    Solve(ReportArgs),
    /// Run a multi-stage scenario file.
    Run(ReportArgs),
    /// Print the group polynomial of a graph file.
    Check {
        /// Any file with `subjects` and `relations`.
        graph: PathBuf,
    },
    /// Write a graph file as DOT: solid edges for alliance, dashed for conflict.
    ExportDot {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Start the HTTP/JSON service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Directory for per-scenario snapshots, reloaded at start-up.
        #[arg(long, env = "RGT_SNAPSHOT_DIR")]
        snapshot_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    input: PathBuf,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    /// Override the enumeration bound for interval influences.
    #[arg(long, value_name = "N")]
    bound: Option<u64>,
    /// Include diagonal-form renderings.
    #[arg(long)]
    trace: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Engine(rgt_core::Error),
    Io(String),
}

impl From<rgt_core::Error> for Failure {
    fn from(err: rgt_core::Error) -> Self {
        Failure::Engine(err)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Engine(rgt_core::Error::NotDecomposable(_)) => 3,
            Failure::Engine(rgt_core::Error::GuardExceeded(_)) => 4,
            _ => 2,
        }
    }

    fn line(&self) -> String {
        let (code, message) = match self {
            Failure::Engine(e) => (e.code(), e.to_string()),
            Failure::Io(m) => ("IoError", m.clone()),
        };
        // Keep the message on one line for grepping.
        format!("{code}: {}", message.replace('\n', " "))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

fn solve(args: &ReportArgs) -> Result<(), Failure> {
    let mut file: SessionFile = from_json(&read(&args.input)?)?;
    if let Some(bound) = args.bound {
        file.enumeration_bound = bound;
    }
    let output = rgt_server::solve_payload(&file)?;
    let text = if args.json {
        to_json(&output)
    } else {
        let diagonal = render_diagonal_form(&output.session.polynomial);
        render_session_text(&output.session, args.trace, diagonal.lines())
    };
    write(args.output.as_deref(), &text)
}

fn run(args: &ReportArgs) -> Result<(), Failure> {
    let mut file: ScenarioFile = from_json(&read(&args.input)?)?;
    if let Some(bound) = args.bound {
        file = file.with_bound(bound);
    }
    let report = run_scenario(&file.resolve()?)?;
    let text = if args.json {
        to_json(&report)
    } else {
        report.render_text(args.trace)
    };
    write(args.output.as_deref(), &text)
}

fn graph(path: &Path) -> Result<rgt_core::RelationshipGraph, Failure> {
    let file: GraphFile = from_json(&read(path)?)?;
    Ok(file.to_graph()?)
}

fn serve(listen: SocketAddr, snapshot_dir: Option<PathBuf>) -> Result<(), Failure> {
    use std::io::IsTerminal;
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime
        .block_on(rgt_server::serve(listen, snapshot_dir))
        .map_err(|e| Failure::Io(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Run(args) => run(args),
        Command::Check { graph: path } => graph(path)
            .and_then(|g| Ok(g.decompose()?))
            .map(|p| println!("{p}")),
        Command::ExportDot {
            graph: path,
            output,
        } => graph(path).and_then(|g| write(output.as_deref(), &g.to_dot())),
        Command::Serve {
            listen,
            snapshot_dir,
        } => serve(*listen, snapshot_dir.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.line());
            ExitCode::from(failure.exit_code())
        }
    }
}
