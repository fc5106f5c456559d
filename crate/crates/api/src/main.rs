use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nephro_api::{build_state, config::Config, mailer, open_diary, router};
use nephro_core::{Actor, PatientId, SystemClock};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "nephrocare", version, about = "Digital diary service for children with nephrotic syndrome")]
struct Cli {
    /// Config file; every key can also be set as NEPHRO_<KEY> or NEPHRO_<SECTION>__<KEY>.
    #[arg(long, global = true, env = "NEPHRO_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Write one patient's diary as CSV.
    Export {
        #[arg(long)]
        patient: PatientId,
        /// Output file; `-` (the default) for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Load and validate the configuration, reference tables and store, then exit.
    CheckConfig,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => {
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(serve(config))
        }
        Command::Export { patient, out } => {
            let diary = open_diary(&config, Arc::new(SystemClock))?;
            let csv = diary.export_csv(&Actor::System, &patient)?;
            if out.as_os_str() == "-" {
                use std::io::Write;
                std::io::stdout().write_all(csv.as_bytes())?;
            } else {
                std::fs::write(&out, csv)?;
            }
            Ok(())
        }
        Command::CheckConfig => {
            let diary = open_diary(&config, Arc::new(SystemClock))?;
            let problems = diary.audit();
            for p in &problems {
                eprintln!("{p}");
            }
            if !problems.is_empty() {
                return Err(format!("{} integrity problem(s) in the store", problems.len()).into());
            }
            if let Some(path) = &config.hospitals {
                nephro_api::state::load_hospitals(path)?;
            }
            println!("ok: {} patients", diary.patient_ids().len());
            Ok(())
        }
    }
}

async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error>> {
    let mailer = Arc::from(mailer::from_settings(&config.mailer)?);
    let listen = config.listen;
    let (state, worker) = build_state(config, Arc::new(SystemClock), mailer)?;
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(%listen, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    // the router and its queue handles are gone; let pending alerts finish
    if let Some(worker) = worker {
        let _ = worker.await;
    }
    Ok(())
}
