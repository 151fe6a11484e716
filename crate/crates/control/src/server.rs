//! Live session: the generation loop on its own thread, steered over a
//! websocket at `/live`.
//!
//! The endpoint and the loop share only the affect mailbox (written by the
//! endpoint, read once per bar by the loop) and a broadcast channel the loop
//! publishes bar status and note records on.

use std::fs::File;
use std::io::{self, LineWriter};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use cadenza_core::affect::{clamp_affect, AffectMailbox, AffectState};
use cadenza_core::render::live::{
    run_live, EventLogSink, LiveControl, LiveOptions, LiveReport, MidiSink, RawMidiSink, SinkError,
};
use cadenza_core::render::{BarPlan, Fixtures, Generator, TimedEvent};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, watch};

use crate::protocol::{parse_inbound, BarStatus, Inbound, NoteRecord, Outbound, PROTO_VERSION};

const CHANNEL_CAPACITY: usize = 4096;

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub bind: SocketAddr,
    pub seed: u64,
    pub fixtures: Arc<Fixtures>,
    pub initial: AffectState,
    /// Raw MIDI output (device node, FIFO or file).
    pub midi_out: Option<PathBuf>,
    /// JSON-lines log of every emitted event.
    pub event_log: Option<PathBuf>,
    pub max_bars: Option<u64>,
}

impl LiveConfig {
    pub fn new(bind: SocketAddr, seed: u64) -> Self {
        Self {
            bind,
            seed,
            fixtures: Arc::new(Fixtures::shipped()),
            initial: AffectState::default(),
            midi_out: None,
            event_log: None,
            max_bars: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: SinkError },
    #[error("server: {0}")]
    Server(io::Error),
    #[error("generation thread panicked")]
    EnginePanicked,
}

/// Publishes bar status and note records to every connected client.
struct BroadcastSink(broadcast::Sender<Arc<str>>);

impl BroadcastSink {
    fn publish(&self, msg: Outbound) {
        // no subscribers is fine
        let _ = self.0.send(msg.to_json().into());
    }
}

impl MidiSink for BroadcastSink {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        if let Some(note) = NoteRecord::from_event(event) {
            self.publish(Outbound::Note(note));
        }
        Ok(())
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        self.publish(Outbound::Bar(BarStatus::from(plan)));
        Ok(())
    }
}

struct Fanout(Vec<Box<dyn MidiSink + Send>>);

impl MidiSink for Fanout {
    fn send(&mut self, event: &TimedEvent) -> Result<(), SinkError> {
        self.0.iter_mut().try_for_each(|s| s.send(event))
    }

    fn bar(&mut self, plan: &BarPlan) -> Result<(), SinkError> {
        self.0.iter_mut().try_for_each(|s| s.bar(plan))
    }
}

#[derive(Clone)]
struct Shared {
    mailbox: AffectMailbox,
    control: LiveControl,
    seed: Arc<AtomicU64>,
    updates: Arc<broadcast::Receiver<Arc<str>>>,
}

impl Shared {
    fn handle(&self, text: &str) -> Outbound {
        match parse_inbound(text) {
            Err(message) => Outbound::Error { message },
            Ok(Inbound::Affect { v, a }) => match clamp_affect(v, a) {
                Ok(state) => {
                    self.mailbox.store(state);
                    Outbound::Ack {
                        v: state.valence(),
                        a: state.arousal(),
                    }
                }
                Err(e) => Outbound::Error { message: e.to_string() },
            },
            Ok(Inbound::Seed { value: None }) => Outbound::Seed {
                value: self.seed.load(Ordering::SeqCst),
            },
            Ok(Inbound::Seed { value: Some(value) }) => {
                self.control.request_reseed(value);
                self.seed.store(value, Ordering::SeqCst);
                Outbound::Seed { value }
            }
            Ok(Inbound::Stop) => {
                self.control.stop();
                Outbound::Stopping
            }
        }
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| session(socket, shared))
}

async fn send(socket: &mut WebSocket, msg: &Outbound) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn session(mut socket: WebSocket, shared: Shared) {
    let mut updates = shared.updates.resubscribe();
    let hello = Outbound::Hello {
        proto: PROTO_VERSION,
        seed: shared.seed.load(Ordering::SeqCst),
    };
    if !send(&mut socket, &hello).await {
        return;
    }
    loop {
        tokio::select! {
            inbound = socket.recv() => match inbound {
                Some(Ok(Message::Text(text))) => {
                    if !send(&mut socket, &shared.handle(text.as_str())).await {
                        return;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let err = Outbound::Error { message: "expected a text message".into() };
                    if !send(&mut socket, &err).await {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
            update = updates.recv() => match update {
                Ok(json) => {
                    if socket.send(Message::Text(json.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagging, dropped {n} updates"),
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
        }
    }
}

/// A running live session.
pub struct LiveServer {
    addr: SocketAddr,
    control: LiveControl,
    mailbox: AffectMailbox,
    done: watch::Receiver<bool>,
    engine: thread::JoinHandle<LiveReport>,
    server: tokio::task::JoinHandle<io::Result<()>>,
}

impl LiveServer {
    /// Binds the endpoint, opens outputs and starts generating.
    pub async fn start(config: LiveConfig) -> Result<Self, ServeError> {
        let listener = TcpListener::bind(config.bind).await.map_err(|source| ServeError::Bind {
            addr: config.bind,
            source,
        })?;
        let addr = listener.local_addr().map_err(ServeError::Server)?;

        let (tx, rx) = broadcast::channel(CHANNEL_CAPACITY);
        let mut sinks: Vec<Box<dyn MidiSink + Send>> = vec![Box::new(BroadcastSink(tx))];
        if let Some(path) = &config.midi_out {
            let sink = RawMidiSink::open(path).map_err(|source| ServeError::Output {
                path: path.clone(),
                source,
            })?;
            sinks.push(Box::new(sink));
        }
        if let Some(path) = &config.event_log {
            let file = File::create(path).map_err(|e| ServeError::Output {
                path: path.clone(),
                source: e.into(),
            })?;
            sinks.push(Box::new(EventLogSink::new(LineWriter::new(file))));
        }

        let mailbox = AffectMailbox::new(config.initial);
        let control = LiveControl::default();
        let (done_tx, done) = watch::channel(false);
        let engine = {
            let mut source = mailbox.clone();
            let control = control.clone();
            let fixtures = Arc::clone(&config.fixtures);
            let options = LiveOptions {
                max_bars: config.max_bars,
                ..LiveOptions::default()
            };
            let seed = config.seed;
            thread::Builder::new()
                .name("cadenza-live".into())
                .spawn(move || {
                    let mut generator = Generator::new(fixtures, seed);
                    let mut sink = Fanout(sinks);
                    let report = run_live(&mut generator, &mut source, &mut sink, &control, &options);
                    drop(sink);
                    let _ = done_tx.send(true);
                    report
                })
                .map_err(ServeError::Server)?
        };

        let shared = Shared {
            mailbox: mailbox.clone(),
            control: control.clone(),
            seed: Arc::new(AtomicU64::new(config.seed)),
            updates: Arc::new(rx),
        };
        let app = Router::new().route("/live", get(upgrade)).with_state(shared);
        let mut shutdown = done.clone();
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = shutdown.wait_for(|d| *d).await;
                })
                .await
        });
        log::info!("live control on ws://{addr}/live");
        Ok(Self {
            addr,
            control,
            mailbox,
            done,
            engine,
            server,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn control(&self) -> &LiveControl {
        &self.control
    }

    pub fn mailbox(&self) -> &AffectMailbox {
        &self.mailbox
    }

    /// Resolves once the generation loop has ended.
    pub async fn finished(&self) {
        let mut done = self.done.clone();
        let _ = done.wait_for(|d| *d).await;
    }

    /// Waits for the loop and the endpoint to wind down.
    pub async fn wait(self) -> Result<LiveReport, ServeError> {
        let engine = self.engine;
        let report = tokio::task::spawn_blocking(move || engine.join())
            .await
            .map_err(|_| ServeError::EnginePanicked)?
            .map_err(|_| ServeError::EnginePanicked)?;
        match self.server.await {
            Ok(result) => result.map_err(ServeError::Server)?,
            Err(e) => return Err(ServeError::Server(io::Error::other(e))),
        }
        Ok(report)
    }
}

/// Runs a live session until a client sends stop, the bar limit is reached,
/// or the process receives Ctrl-C.
pub async fn serve_live(config: LiveConfig) -> Result<LiveReport, ServeError> {
    let server = LiveServer::start(config).await?;
    tokio::select! {
        _ = server.finished() => {}
        _ = tokio::signal::ctrl_c() => server.control().stop(),
    }
    server.wait().await
}
