use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use evoscape_core::provider::{
    self, Backend, DirImageStore, ImageStore, MockFixtures, ProviderConfig, RateLimiter, SystemClock,
};
use evoscape_core::Gateway;
use evoscape_service::{router, AppState, GalleryMode, JsonStore, SeedSource};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "evoscape-server", version, about = "Serve the prompt-evolution REST API")]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// JSON document holding sessions, jobs and the gallery.
    #[arg(long, default_value = "evoscape-store.json")]
    store_path: PathBuf,
    /// Directory for cached image bytes. Defaults to `images/` next to the store.
    #[arg(long)]
    image_dir: Option<PathBuf>,
    #[arg(long, env = provider::ENV_BACKEND, default_value = "mock")]
    backend: Backend,
    /// Seed every session (and the mock backend) with this value.
    #[arg(long, env = provider::ENV_SEED)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = GalleryMode::Favourites)]
    gallery_mode: GalleryMode,
    /// Image requests allowed per 60 s. Live defaults to 5; mock is unlimited unless set.
    #[arg(long)]
    images_per_minute: Option<usize>,
    /// Mock vocabulary and tables; the built-in set is used when omitted.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();

    let mut config = ProviderConfig::from_env()?;
    config.backend = args.backend;
    config.validate()?;

    let image_dir = args.image_dir.clone().unwrap_or_else(|| {
        args.store_path.parent().map(|p| p.join("images")).unwrap_or_else(|| PathBuf::from("images"))
    });
    let images: Arc<dyn ImageStore> = Arc::new(DirImageStore::new(&image_dir)?);
    let fixtures = args.fixtures.as_deref().map(MockFixtures::load).transpose()?;
    let limiter = args
        .images_per_minute
        .map(|n| Arc::new(RateLimiter::new(n, Duration::from_secs(60), Arc::new(SystemClock::new()))));
    let mock_seed = args.seed.unwrap_or_else(rand::random);
    let gateway = Gateway::from_config(&config, mock_seed, fixtures, limiter, Some(images.clone()))?;

    let store = Arc::new(JsonStore::open(&args.store_path)?);
    let seeds = args.seed.map_or(SeedSource::Random, SeedSource::Fixed);
    let state = AppState::new(store, gateway, images, args.gallery_mode, seeds);
    let resumed = state.recover()?;
    if resumed > 0 {
        tracing::info!(resumed, "resumed interrupted jobs");
    }

    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, backend = ?config.backend, store = %args.store_path.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
