use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;

use riskbn_service::{router, ServiceConfig, SessionModel, DEFAULT_INFLUENCE_BUDGET};

/// Serve queries, risk maps and influence rankings for one fitted model.
#[derive(Parser, Debug)]
#[command(name = "riskbn-serve", version)]
struct Args {
    /// Model document written by `riskbn fit`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Influence requests above this many rows × iterations run as background jobs.
    #[arg(long, default_value_t = DEFAULT_INFLUENCE_BUDGET)]
    influence_budget: usize,
    /// Allowed CORS origin; repeat for several. Any origin when omitted.
    #[arg(long = "allow-origin")]
    allow_origin: Vec<String>,
    /// Directory of built UI assets to serve at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let model = match &args.model {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let m = SessionModel::from_document(&text).with_context(|| format!("loading {}", p.display()))?;
            tracing::info!(model_id = %m.model_id, "model loaded from {}", p.display());
            Some(m)
        }
        None => {
            tracing::warn!("no --model given; model endpoints answer 503");
            None
        }
    };
    let config = ServiceConfig {
        influence_budget: args.influence_budget,
        allowed_origins: (!args.allow_origin.is_empty()).then_some(args.allow_origin),
        static_dir: args.static_dir,
    };
    let listener = tokio::net::TcpListener::bind(args.addr)
        .await
        .with_context(|| format!("binding {}", args.addr))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(model, &config)).await?;
    Ok(())
}
