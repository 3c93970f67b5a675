//! Live protocol server.
//!
//! One thread owns the simulator and its history store. TCP and WebSocket
//! acceptors and per-client threads only talk to it through a single FIFO
//! channel, and every broadcast fans out from that thread, so all clients see
//! the same messages in the same order.
//!
//! TCP clients exchange raw protocol frames. WebSocket clients receive each
//! broadcast frame decoded and rendered as one canonical JSON text message,
//! and may send `Command` / `HistoryRequest` JSON objects back.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use pmrball_core::device::{AppCommand, Event, Output};
use pmrball_core::history::HistoryStore;
use pmrball_core::protocol::{encode, Decoder, Message};
use pmrball_core::sim::{RunError, RunOutput, SimRun, Simulator};
use thiserror::Error;
use tungstenite::protocol::WebSocket;

const POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub tcp_addr: Option<String>,
    pub ws_addr: Option<String>,
    /// Hold the clock at zero until this many clients have connected.
    pub wait_for_clients: usize,
    /// Append every output's JSON line here as it is produced.
    pub log_path: Option<std::path::PathBuf>,
    /// Keep all outputs in memory for [`Server::shutdown`] to return.
    pub collect_outputs: bool,
}

type ClientId = u64;

enum Outbound {
    Frame(Vec<u8>),
    Json(String),
}

enum Inbound {
    Connected { id: ClientId, tx: Sender<Outbound>, websocket: bool },
    Disconnected { id: ClientId },
    Request { id: ClientId, message: Message },
}

pub struct Server {
    tcp: Option<SocketAddr>,
    ws: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    device: Option<JoinHandle<Result<RunOutput, RunError>>>,
}

impl Server {
    pub fn tcp_addr(&self) -> Option<SocketAddr> {
        self.tcp
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws
    }

    /// Stops the clock and returns everything the device produced.
    pub fn shutdown(mut self) -> Result<RunOutput, RunError> {
        self.stop.store(true, Ordering::SeqCst);
        self.device.take().expect("device thread").join().expect("device thread panicked")
    }

    /// Blocks until the device loop ends (it only ends on shutdown or error).
    pub fn wait(mut self) -> Result<RunOutput, RunError> {
        self.device.take().expect("device thread").join().expect("device thread panicked")
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    let bind_err = |source| ServeError::Bind { addr: addr.to_string(), source };
    let resolved: Vec<SocketAddr> = addr.to_socket_addrs().map_err(bind_err)?.collect();
    TcpListener::bind(&resolved[..]).map_err(bind_err)
}

/// Binds the requested endpoints and starts the device loop.
///
/// The clock advances in `tick_ms` steps: paced by `speed` when it is
/// positive, otherwise as fast as possible through the trace and in real time
/// afterwards, so clients can keep interacting with the device.
pub fn serve(sim: SimRun, opts: ServeOptions) -> Result<Server, ServeError> {
    let tcp = opts.tcp_addr.as_deref().map(bind).transpose()?;
    let ws = opts.ws_addr.as_deref().map(bind).transpose()?;
    let local = |l: &Option<TcpListener>| l.as_ref().and_then(|l| l.local_addr().ok());
    let (tcp_addr, ws_addr) = (local(&tcp), local(&ws));

    let stop = Arc::new(AtomicBool::new(false));
    let (fifo_tx, fifo_rx) = mpsc::channel::<Inbound>();
    let next_id = Arc::new(std::sync::atomic::AtomicU64::new(1));

    if let Some(listener) = tcp {
        spawn_acceptor(listener, stop.clone(), fifo_tx.clone(), next_id.clone(), false);
    }
    if let Some(listener) = ws {
        spawn_acceptor(listener, stop.clone(), fifo_tx.clone(), next_id, true);
    }
    drop(fifo_tx);

    let device_stop = stop.clone();
    let device = thread::Builder::new()
        .name("device".into())
        .spawn(move || device_loop(sim, opts, fifo_rx, device_stop))
        .expect("spawn device thread");

    Ok(Server { tcp: tcp_addr, ws: ws_addr, stop, device: Some(device) })
}

fn spawn_acceptor(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    fifo: Sender<Inbound>,
    next_id: Arc<std::sync::atomic::AtomicU64>,
    websocket: bool,
) {
    let handler = if websocket { ws_client } else { tcp_client };
    listener.set_nonblocking(true).expect("nonblocking listener");
    thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let id = next_id.fetch_add(1, Ordering::SeqCst);
                    debug!("client {id} connected from {peer}");
                    let _ = stream.set_nonblocking(false);
                    let (tx, rx) = mpsc::channel();
                    if fifo.send(Inbound::Connected { id, tx, websocket }).is_err() {
                        return;
                    }
                    let (fifo, stop) = (fifo.clone(), stop.clone());
                    thread::spawn(move || handler(stream, id, fifo, rx, stop));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    });
}

fn tcp_client(stream: TcpStream, id: ClientId, fifo: Sender<Inbound>, rx: Receiver<Outbound>, stop: Arc<AtomicBool>) {
    let Ok(mut writer) = stream.try_clone() else {
        let _ = fifo.send(Inbound::Disconnected { id });
        return;
    };
    thread::spawn(move || {
        for out in rx {
            if let Outbound::Frame(bytes) = out {
                if writer.write_all(&bytes).is_err() {
                    break;
                }
            }
        }
        let _ = writer.shutdown(std::net::Shutdown::Both);
    });

    let mut reader = stream;
    let _ = reader.set_read_timeout(Some(Duration::from_millis(50)));
    let mut decoder = Decoder::new();
    let mut buf = [0u8; 512];
    while !stop.load(Ordering::SeqCst) {
        match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                for message in decoder.push(&buf[..n]).messages {
                    if fifo.send(Inbound::Request { id, message }).is_err() {
                        return;
                    }
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    let _ = fifo.send(Inbound::Disconnected { id });
}

fn ws_client(stream: TcpStream, id: ClientId, fifo: Sender<Inbound>, rx: Receiver<Outbound>, stop: Arc<AtomicBool>) {
    let mut ws: WebSocket<TcpStream> = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            debug!("client {id}: websocket handshake failed: {e}");
            let _ = fifo.send(Inbound::Disconnected { id });
            return;
        }
    };
    let _ = ws.get_ref().set_read_timeout(Some(POLL));

    'session: while !stop.load(Ordering::SeqCst) {
        loop {
            match rx.try_recv() {
                Ok(Outbound::Json(text)) => {
                    if ws.send(tungstenite::Message::text(text)).is_err() {
                        break 'session;
                    }
                }
                Ok(Outbound::Frame(_)) => {}
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => break 'session,
            }
        }
        match ws.read() {
            Ok(tungstenite::Message::Text(text)) => match serde_json::from_str::<Message>(text.as_str()) {
                Ok(message) => {
                    if fifo.send(Inbound::Request { id, message }).is_err() {
                        break;
                    }
                }
                Err(e) => debug!("client {id}: ignoring bad JSON: {e}"),
            },
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    let _ = ws.close(None);
    let _ = fifo.send(Inbound::Disconnected { id });
}

struct Client {
    id: ClientId,
    tx: Sender<Outbound>,
    websocket: bool,
}

impl Client {
    fn send(&self, frame: &[u8], json: &[String]) -> bool {
        if self.websocket {
            json.iter().all(|j| self.tx.send(Outbound::Json(j.clone())).is_ok())
        } else {
            self.tx.send(Outbound::Frame(frame.to_vec())).is_ok()
        }
    }
}

struct Broadcaster {
    clients: Vec<Client>,
    mirror: Decoder,
}

impl Broadcaster {
    /// Sends one message to every client: the frame to TCP clients and the
    /// decoded frame as JSON to WebSocket clients.
    fn broadcast(&mut self, message: &Message) {
        let Ok(frame) = encode(message) else { return };
        let mirrored = self.mirror.push(&frame).messages;
        let json: Vec<String> = mirrored.iter().map(|m| serde_json::to_string(m).expect("json")).collect();
        self.clients.retain(|c| c.send(&frame, &json));
    }

    fn reply(&mut self, id: ClientId, message: &Message) {
        let Ok(frame) = encode(message) else { return };
        let json = serde_json::to_string(message).expect("json");
        if let Some(c) = self.clients.iter().find(|c| c.id == id) {
            c.send(&frame, &[json]);
        }
    }
}

fn device_loop(
    sim: SimRun,
    opts: ServeOptions,
    fifo: Receiver<Inbound>,
    stop: Arc<AtomicBool>,
) -> Result<RunOutput, RunError> {
    let mut store = match &sim.history_path {
        Some(path) => HistoryStore::open(path, sim.history_flush)?.0,
        None => HistoryStore::in_memory(),
    };
    let mut log = match &opts.log_path {
        Some(path) => Some(io::BufWriter::new(std::fs::File::create(path)?)),
        None => None,
    };
    let trace_end = sim.end_ms();
    let (mut device, boot) = Simulator::new(sim.config.clone(), sim.trace.clone(), sim.script.clone(), sim.epoch_ms)?;
    let tick = Duration::from_millis(sim.config.tick_ms);
    let mut net = Broadcaster { clients: Vec::new(), mirror: Decoder::new() };
    let mut outputs: Vec<Output> = Vec::new();
    let mut connected = 0usize;
    let mut pending_boot = Some(boot);

    while !stop.load(Ordering::SeqCst) {
        let mut injected = Vec::new();
        loop {
            match fifo.try_recv() {
                Ok(Inbound::Connected { id, tx, websocket }) => {
                    connected += 1;
                    net.clients.push(Client { id, tx, websocket });
                }
                Ok(Inbound::Disconnected { id }) => {
                    debug!("client {id} disconnected");
                    net.clients.retain(|c| c.id != id);
                }
                Ok(Inbound::Request { id, message }) => match message {
                    Message::Command { cmd } => injected.push(Event::App { t_ms: device.now_ms(), command: AppCommand::from(cmd) }),
                    Message::HistoryRequest { from_ms, to_ms } => {
                        for reply in Message::history_responses(&store.query_range(from_ms, to_ms)) {
                            net.reply(id, &reply);
                        }
                    }
                    other => debug!("client {id}: ignoring {:?}", other.msg_type()),
                },
                Err(_) => break,
            }
        }
        if connected < opts.wait_for_clients {
            thread::sleep(POLL);
            continue;
        }

        let produced = match pending_boot.take() {
            Some(mut boot) => {
                boot.extend(device.tick(&injected));
                boot
            }
            None => device.tick(&injected),
        };
        for o in &produced {
            match o {
                Output::Message(m) => net.broadcast(m),
                Output::History(r) => store.append(*r)?,
                _ => {}
            }
            if let Some(log) = &mut log {
                writeln!(log, "{}", o.to_json())?;
            }
        }
        if let Some(log) = &mut log {
            log.flush()?;
        }
        if opts.collect_outputs {
            outputs.extend(produced);
        }

        if sim.speed > 0.0 {
            thread::sleep(tick.div_f64(sim.speed));
        } else if device.now_ms() > trace_end {
            thread::sleep(tick);
        }
    }
    store.flush()?;
    Ok(RunOutput { outputs, final_state: device.state().clone() })
}
