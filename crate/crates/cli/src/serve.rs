//! `uno serve`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;
use uno_server::{start, HubConfig, ServerConfig, DEFAULT_UDP_PORT, DEFAULT_WS_PORT};

use crate::{CliError, ServeArgs};

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeFile {
    pub udp: Option<String>,
    pub ws: Option<String>,
    pub static_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub turn_timeout_ms: Option<u64>,
    pub bot_delay_ms: Option<u64>,
    pub log_dir: Option<PathBuf>,
}

fn addr(flag: &str, s: &str) -> Result<SocketAddr, CliError> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("--{flag}: not a socket address: {s}")))
}

pub fn server_config(args: &ServeArgs) -> Result<ServerConfig, CliError> {
    let file = match &args.config {
        None => ServeFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))?
        }
    };
    let udp = args
        .udp
        .clone()
        .or(file.udp)
        .unwrap_or_else(|| format!("0.0.0.0:{DEFAULT_UDP_PORT}"));
    let ws = args
        .ws
        .clone()
        .or(file.ws)
        .unwrap_or_else(|| format!("0.0.0.0:{DEFAULT_WS_PORT}"));
    let config = ServerConfig {
        hub: HubConfig {
            master_seed: args.seed.or(file.seed).unwrap_or(0),
            turn_timeout: args.turn_timeout_ms.or(file.turn_timeout_ms).map(Duration::from_millis),
            bot_delay: Duration::from_millis(args.bot_delay_ms.or(file.bot_delay_ms).unwrap_or(0)),
            log_dir: args.log_dir.clone().or(file.log_dir),
        },
        udp: if args.no_udp { None } else { Some(addr("udp", &udp)?) },
        ws: if args.no_ws { None } else { Some(addr("ws", &ws)?) },
        static_dir: args.static_dir.clone().or(file.static_dir),
        ..ServerConfig::default()
    };
    if config.udp.is_none() && config.ws.is_none() {
        return Err(CliError::Usage("both transports are disabled".into()));
    }
    Ok(config)
}

pub async fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = server_config(args)?;
    if let Some(dir) = &config.hub.log_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    let handle = start(config)
        .await
        .map_err(|e| CliError::Runtime(format!("cannot bind: {e}")))?;
    if let Some(a) = handle.udp_addr {
        println!("udp listening on {a}");
    }
    if let Some(a) = handle.ws_addr {
        println!("websocket listening on ws://{a}/ws");
    }
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {
            println!("shutting down");
            Ok(())
        }
        _ = handle.join() => Err(CliError::Runtime("server stopped".into())),
    }
}
