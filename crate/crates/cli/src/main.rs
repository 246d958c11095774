use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use layoutforge::extract::ExtractionParams;
use layoutforge::hyper::ThreadPoolExecutor;
use layoutforge::layout::LayoutConfig;
use layoutforge::store::PriorStore;
use layoutforge_cli::commands::{self, CmdResult, Failure};
use layoutforge_cli::server::{router, AppState};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "layoutforge", version, about = "Learn furniture placement priors and lay out rooms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine pairwise priors and pattern chains from a scene corpus.
    Extract(ExtractArgs),
    /// Lay out one scene against an extracted store.
    Layout(LayoutArgs),
    /// Serve the HTTP interface.
    Serve(ServeArgs),
    /// Write a synthetic corpus and the layout fixtures.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Meters per radian in the pose distance.
    #[arg(long, default_value_t = 1.0)]
    angle_weight: f64,
    #[arg(long, default_value_t = 0.10)]
    rho_q: f64,
    #[arg(long, default_value_t = 0.90)]
    delta_q: f64,
    /// Maximum dominant-to-secondary distance for a sample (meters).
    #[arg(long, default_value_t = 3.0)]
    proximity: f64,
    #[arg(long, default_value_t = 4)]
    min_samples: usize,
    /// Store unaligned pattern chains.
    #[arg(long)]
    no_align: bool,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    n_max: u32,
    #[arg(long)]
    no_align: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    scenes: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

fn run_extract(a: ExtractArgs) -> CmdResult<()> {
    let params = ExtractionParams {
        angle_weight: a.angle_weight,
        rho_quantile: a.rho_q,
        delta_quantile: a.delta_q,
        proximity: a.proximity,
        min_samples: a.min_samples,
        ..ExtractionParams::default()
    };
    let report = commands::extract(&a.corpus, &a.store, &params, !a.no_align)?;
    print!("{}", commands::format_report(&report));
    Ok(())
}

fn run_layout(a: LayoutArgs) -> CmdResult<()> {
    let config = LayoutConfig {
        n_max: a.n_max,
        align: !a.no_align,
        ..LayoutConfig::default()
    };
    let r = commands::layout(&a.scene, &a.store, a.seed, &a.out, a.svg.as_deref(), &config)?;
    print!("{}", commands::format_layout(&r));
    Ok(())
}

fn run_serve(a: ServeArgs) -> CmdResult<()> {
    let corpus = commands::load_corpus(&a.corpus)?;
    let store = Arc::new(PriorStore::open(&a.store).with_context(|| format!("cannot open store {}", a.store.display()))?);
    let state = Arc::new(AppState::new(store, corpus, Arc::new(ThreadPoolExecutor::with_default_size())));
    let rt = tokio::runtime::Runtime::new().context("start runtime")?;
    rt.block_on(async move {
        let addr: SocketAddr = a
            .bind
            .parse()
            .with_context(|| format!("bad bind address `{}`", a.bind))
            .map_err(|e| Failure::new(Failure::BIND, e))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))
            .map_err(|e| Failure::new(Failure::BIND, e))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(anyhow::Error::from)?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server error")?;
        Ok(())
    })
}

fn run_synth(a: SynthArgs) -> CmdResult<()> {
    for p in commands::synth(&a.out, a.scenes, a.seed, a.noise)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => run_extract(a),
        Command::Layout(a) => run_layout(a),
        Command::Serve(a) => run_serve(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
