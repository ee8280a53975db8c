//! `cpc`: validate, convert, render and serve conditional parallel
//! coordinates datasets.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use cpc_core::model::DatasetError;
use cpc_core::{
    compute_layout, from_automl_log, from_flat_csv, parse_column_kinds, parse_cpc_json, to_cpc_json, to_svg, Canvas,
    Dataset, ExpansionState, IngestError, LayoutError, LayoutOptions, Style,
};
use cpc_server::ServerConfig;

#[derive(Debug, Parser)]
#[command(name = "cpc", version, about = "Conditional parallel coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a CPC-JSON file; violations go to stderr.
    Validate {
        /// Input file, or `-` for stdin.
        file: PathBuf,
        #[arg(long, default_value_t = cpc_core::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
    /// Convert an AutoML log or flat CSV to CPC-JSON.
    Convert {
        #[arg(long, value_enum)]
        from: Source,
        /// Input file, or `-` for stdin.
        input: PathBuf,
        /// Output file, or `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Column kinds for CSV input, e.g. `cylinders=categorical,weight=numeric`.
        #[arg(long)]
        kinds: Option<String>,
    },
    /// Render one view to SVG.
    Render {
        /// Input CPC-JSON file, or `-` for stdin.
        file: PathBuf,
        /// `all`, or comma-separated branch paths such as `Axis_3/Enabled`.
        #[arg(long, default_value = "")]
        expand: String,
        #[arg(long, default_value_t = 1200.0)]
        width: f64,
        #[arg(long, default_value_t = 600.0)]
        height: f64,
        #[arg(long, default_value_t = 40.0)]
        margin: f64,
        /// Output file, or `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Run the HTTP/JSON server.
    Serve {
        #[arg(long, env = "CPC_PORT", default_value_t = 8765)]
        port: u16,
        #[arg(long, env = "CPC_HOST", default_value = "127.0.0.1")]
        host: String,
        /// Directory of CPC-JSON files loaded at startup.
        #[arg(long, env = "CPC_DATA")]
        data: Option<PathBuf>,
        /// Static assets for the web UI.
        #[arg(long, env = "CPC_STATIC_DIR")]
        static_dir: Option<PathBuf>,
        /// Directory that receives a snapshot of all datasets on shutdown.
        #[arg(long, env = "CPC_SNAPSHOT_DIR")]
        snapshot: Option<PathBuf>,
        #[arg(long, env = "CPC_MAX_BODY_BYTES", default_value_t = 16 * 1024 * 1024)]
        max_body_bytes: usize,
        #[arg(long, env = "CPC_MAX_OBSERVATIONS", default_value_t = 100_000)]
        max_observations: usize,
        #[arg(long, env = "CPC_MAX_DEPTH", default_value_t = cpc_core::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Automl,
    Csv,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(anyhow::Error),
    Usage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Usage(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Usage(e)
    }
}

fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
        Ok(buf)
    } else {
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(path: &Path, text: &str) -> anyhow::Result<()> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())?;
        out.flush()?;
        Ok(())
    } else {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// One line per violation, so reports diff cleanly.
fn report(e: &IngestError) -> String {
    match e {
        IngestError::Dataset(DatasetError::InvalidObservations(issues)) => issues
            .iter()
            .flat_map(|i| i.report.violations.iter().map(move |v| format!("{}: {v}", i.id)))
            .collect::<Vec<_>>()
            .join("\n"),
        other => other.to_string(),
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    let bytes = read_input(path)?;
    parse_cpc_json(&bytes).map_err(|e| Failure::Validation(anyhow::anyhow!(report(&e))))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file, max_depth } => {
            let ds = load(&file)?;
            let depth = ds.schema().depth();
            if depth > max_depth {
                return Err(Failure::Validation(anyhow::anyhow!(
                    "branch nesting {depth} exceeds the limit of {max_depth}"
                )));
            }
            println!(
                "ok: {} dimensions, {} observations",
                ds.schema().axis_paths().len(),
                ds.observations().len()
            );
        }
        Command::Convert {
            from,
            input,
            out,
            kinds,
        } => {
            let bytes = read_input(&input)?;
            let ds = match from {
                Source::Automl => from_automl_log(&bytes),
                Source::Csv => {
                    let spec = kinds.ok_or_else(|| anyhow::anyhow!("--kinds is required for csv input"))?;
                    let kinds = parse_column_kinds(&spec).map_err(|e| Failure::Usage(e.into()))?;
                    from_flat_csv(&bytes, &kinds)
                }
            }
            .map_err(|e| Failure::Validation(anyhow::anyhow!(report(&e))))?;
            write_output(&out, &to_cpc_json(&ds))?;
        }
        Command::Render {
            file,
            expand,
            width,
            height,
            margin,
            out,
        } => {
            let ds = load(&file)?;
            let expansion = ExpansionState::parse_spec(ds.schema(), &expand).context("--expand")?;
            let canvas = Canvas::new(width, height, margin);
            let geometry = compute_layout(&ds, &expansion, canvas, LayoutOptions::default()).map_err(|e| match e {
                LayoutError::InvalidCanvas(_) | LayoutError::CanvasTooSmall { .. } => Failure::Usage(e.into()),
                other => Failure::Validation(other.into()),
            })?;
            let svg = to_svg(&geometry, None, None, &Style::default()).map_err(|e| Failure::Validation(e.into()))?;
            write_output(&out, &svg)?;
        }
        Command::Serve {
            port,
            host,
            data,
            static_dir,
            snapshot,
            max_body_bytes,
            max_observations,
            max_depth,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let config = ServerConfig {
                host,
                port,
                max_body_bytes,
                max_observations,
                max_depth,
                static_dir,
                data_dir: data,
                snapshot_dir: snapshot,
            };
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime
                .block_on(cpc_server::serve(config))
                .map_err(|e| Failure::Usage(e.into()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Validation(e) | Failure::Usage(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
