use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pmrball_core::config::HostConfig;
use pmrball_core::history::HistoryStore;
use pmrball_core::protocol::crc16;
use pmrball_core::sim::{gen_trace, parse_script, read_trace, run, write_event_log, write_trace, Profile, SimRun};
use pmrball_sim::{serve, ServeError, ServeOptions};

const EXIT_INPUT: u8 = 2;
const EXIT_BIND: u8 = 3;

#[derive(Parser)]
#[command(name = "pmrball", version, about = "Stress-ball relaxation trainer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a pressure trace through the device and write the event log.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Real-time multiplier; 0 runs as fast as possible.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        /// Serve raw protocol frames on this TCP address.
        #[arg(long, value_name = "HOST:PORT")]
        listen: Option<String>,
        /// Serve the JSON mirror on this WebSocket address.
        #[arg(long, value_name = "HOST:PORT")]
        ws: Option<String>,
        /// Button presses / app commands as `t_ms,input` lines.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Stop after this virtual time instead of the last trace sample.
        #[arg(long)]
        duration_ms: Option<u64>,
        /// Wall-clock epoch milliseconds of device boot, used for history.
        #[arg(long, default_value_t = 0)]
        epoch_ms: u64,
        /// When serving, hold the clock until this many clients connect.
        #[arg(long, default_value_t = 0)]
        wait_clients: usize,
    },
    /// Synthesize a pressure trace.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        profile: Profile,
        #[arg(long)]
        duration_ms: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the CRC-16/CCITT-FALSE of hex-encoded bytes.
    Crc {
        #[arg(long)]
        hex: String,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { trace, config, out, speed, listen, ws, script, duration_ms, epoch_ms, wait_clients } => {
            let cfg = match HostConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", config.display())),
            };
            let trace = match File::open(&trace).map_err(|e| e.to_string()).and_then(|f| read_trace(f).map_err(|e| e.to_string())) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", trace.display())),
            };
            let script = match script.map(|p| {
                std::fs::read_to_string(&p)
                    .map_err(|e| e.to_string())
                    .and_then(|s| parse_script(&s).map_err(|e| e.to_string()))
                    .map_err(|e| format!("{}: {e}", p.display()))
            }) {
                Some(Ok(s)) => s,
                Some(Err(e)) => return fail(EXIT_INPUT, e),
                None => Vec::new(),
            };
            if !(speed >= 0.0 && speed.is_finite()) {
                return fail(EXIT_INPUT, "--speed must be a finite number >= 0");
            }
            if let Some(path) = &cfg.history_path {
                match HistoryStore::load(path) {
                    Ok((_, report)) => {
                        if let Some((line, len)) = report.torn_line {
                            log::warn!("{}: ignoring torn final line {line} ({len} bytes)", path.display());
                        }
                    }
                    Err(e) => return fail(EXIT_INPUT, e),
                }
            }

            let sim = SimRun {
                config: cfg.device,
                history_path: cfg.history_path,
                history_flush: cfg.history_flush,
                trace,
                script,
                speed,
                duration_ms,
                epoch_ms,
            };

            if listen.is_some() || ws.is_some() {
                let opts = ServeOptions {
                    tcp_addr: listen,
                    ws_addr: ws,
                    wait_for_clients: wait_clients,
                    log_path: Some(out),
                    collect_outputs: false,
                };
                let server = match serve(sim, opts) {
                    Ok(s) => s,
                    Err(e @ ServeError::Bind { .. }) => return fail(EXIT_BIND, e),
                    Err(e) => return fail(EXIT_INPUT, e),
                };
                if let Some(addr) = server.tcp_addr() {
                    eprintln!("tcp: listening on {addr}");
                }
                if let Some(addr) = server.ws_addr() {
                    eprintln!("ws: listening on {addr}");
                }
                return match server.wait() {
                    Ok(_) => ExitCode::SUCCESS,
                    Err(e) => fail(1, e),
                };
            }

            let output = match run(&sim) {
                Ok(o) => o,
                Err(e) => return fail(EXIT_INPUT, e),
            };
            let written = File::create(&out).and_then(|f| write_event_log(&output, BufWriter::new(f)));
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(1, format!("{}: {e}", out.display())),
            }
        }
        Command::Gen { seed, profile, duration_ms, out } => {
            let trace = gen_trace(seed, profile, duration_ms, &Default::default());
            match File::create(&out).map_err(|e| e.to_string()).and_then(|f| write_trace(&trace, BufWriter::new(f)).map_err(|e| e.to_string())) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(1, format!("{}: {e}", out.display())),
            }
        }
        Command::Crc { hex } => {
            let cleaned: String = hex.chars().filter(|c| !c.is_whitespace() && *c != ':').collect();
            match ::hex::decode(cleaned) {
                Ok(bytes) => {
                    println!("0x{:04X}", crc16(&bytes));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_INPUT, format!("bad hex: {e}")),
            }
        }
    }
}
