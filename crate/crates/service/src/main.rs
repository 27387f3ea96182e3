use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand};
use seglab_core::ingest::{parse_transactions, summarize, Schema};
use seglab_core::pipeline::BuildConfig;
use seglab_core::store::compare_versions;
use seglab_service::{router, AppState, Store};
use serde_json::json;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "seglab", version, about = "B2B customer segmentation workbench")]
struct Cli {
    /// Workspace directory holding datasets and model versions.
    #[arg(long, global = true, env = "SEGLAB_WORKSPACE", default_value = "seglab-workspace")]
    workspace: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Store a transactions CSV in the workspace and print its summary.
    Ingest {
        file: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Run a build config (JSON) and save the result as a new model version.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Ingest this CSV first and build against it instead of `dataset_id`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Compare two stored model versions.
    Compare { a: u64, b: u64 },
    /// Serve the HTTP API under /api/v1.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print(value: &impl serde::Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not a failure of the command
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { file, delimiter } => {
            let store = Store::open(&cli.workspace)?;
            let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let schema = Schema { delimiter, ..Schema::default() };
            let parsed = parse_transactions(bytes.as_slice(), &schema)?;
            let id = store.put_dataset(&bytes)?;
            print(&json!({ "dataset_id": id, "summary": summarize(&parsed) }))?;
        }
        Command::Build { config, dataset } => {
            let store = Store::open(&cli.workspace)?;
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: BuildConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing build config {}", config.display()))?;
            if let Some(path) = dataset {
                let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
                cfg.dataset_id = store.put_dataset(&bytes)?;
            }
            if let Err(fields) = cfg.validate() {
                for f in &fields {
                    eprintln!("invalid {}: {}", f.field, f.message);
                }
                return Ok(ExitCode::from(2));
            }
            let id = store.build(&cfg, Utc::now())?;
            let v = store.workspace().load_version(id)?;
            let sizes: Vec<usize> = v.stats.clusters.iter().map(|c| c.size).collect();
            print(&json!({
                "version_id": id,
                "cluster_labels": v.labeling().cluster_labels(&v.overrides),
                "cluster_sizes": sizes,
                "noise_size": v.stats.noise_size,
                "metrics": v.metrics,
            }))?;
        }
        Command::Compare { a, b } => {
            let store = Store::open(&cli.workspace)?;
            let ws = store.workspace();
            print(&compare_versions(&ws.load_version(a)?, &ws.load_version(b)?)?)?;
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(cli.workspace, SocketAddr::new(host, port)))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(workspace: PathBuf, addr: SocketAddr) -> Result<()> {
    let state = AppState::open(&workspace)?;
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, workspace = %workspace.display(), "serving /api/v1");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
