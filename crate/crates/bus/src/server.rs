//! Threaded socket service: one thread per node, one reader and one writer
//! thread per client.

use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use palmjog_core::arm::SimConfig;
use palmjog_core::control::ControllerConfig;
use palmjog_core::GestureEvent;
use thiserror::Error;

use crate::clock::{Clock, WallClock};
use crate::latency::{LatencyReport, LatencyTracker, Stage};
use crate::nodes::{Classifier, ControllerNode, NodeError, SimNode};
use crate::wire::{check_hello, encode, frame_from_wire, parse_inbound, ErrorCode, Inbound, Outbound, WireError};
use crate::{Bus, BusError, Payload, RecvError, RobotState, SafetyEvent, Topic};

const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    /// `host:port`; port 0 picks a free one.
    pub bind: String,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub tick_ms: u64,
    pub stale_jog_ms: u64,
    pub queue_capacity: usize,
    pub latency_capacity: usize,
    /// Reports with no sample newer than this are flagged stale.
    pub stale_report_after: Duration,
    pub max_line_bytes: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7070".into(),
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
            tick_ms: 10,
            stale_jog_ms: 500,
            queue_capacity: crate::DEFAULT_QUEUE_CAPACITY,
            latency_capacity: 4096,
            stale_report_after: Duration::from_secs(1),
            max_line_bytes: 64 * 1024,
        }
    }
}

struct Shared {
    bus: Bus,
    clock: Arc<dyn Clock>,
    latency: LatencyTracker,
    shutdown: AtomicBool,
    clients: AtomicUsize,
    node_errors: AtomicU64,
    max_line_bytes: usize,
}

impl Shared {
    fn stopping(&self) -> bool {
        self.shutdown.load(Ordering::Acquire)
    }
}

/// A running service. Dropping it shuts it down.
pub struct Service {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stale_report_after: Duration,
    threads: Vec<JoinHandle<()>>,
    client_threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl Service {
    pub fn start(classifier: Arc<Classifier>, config: ServeConfig) -> Result<Self, ServeError> {
        Self::start_with_clock(classifier, config, Arc::new(WallClock::new()))
    }

    pub fn start_with_clock(
        classifier: Arc<Classifier>,
        config: ServeConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServeError> {
        let controller = ControllerNode::new(config.controller.clone())?;
        let sim = SimNode::new(config.sim.clone(), config.stale_jog_ms)?;
        let listener = TcpListener::bind(&config.bind)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            bus: Bus::with_capacity(config.queue_capacity)?,
            clock,
            latency: LatencyTracker::new(config.latency_capacity),
            shutdown: AtomicBool::new(false),
            clients: AtomicUsize::new(0),
            node_errors: AtomicU64::new(0),
            max_line_bytes: config.max_line_bytes,
        });
        let client_threads = Arc::new(Mutex::new(Vec::new()));
        let tick = Duration::from_millis(config.tick_ms.max(1));

        // subscribe before spawning so nothing published after start() is missed
        let landmarks = shared.bus.subscribe(&[Topic::Landmarks]);
        let gestures = shared.bus.subscribe(&[Topic::Gesture]);
        let jogs = shared.bus.subscribe(&[Topic::Jog]);

        let mut threads = Vec::new();
        let s = Arc::clone(&shared);
        threads.push(spawn("perception", move || perception_loop(&s, &classifier, landmarks))?);
        let s = Arc::clone(&shared);
        threads.push(spawn("controller", move || controller_loop(&s, controller, gestures, tick))?);
        let s = Arc::clone(&shared);
        threads.push(spawn("sim", move || sim_loop(&s, sim, jogs, tick))?);
        let s = Arc::clone(&shared);
        let ct = Arc::clone(&client_threads);
        threads.push(spawn("acceptor", move || accept_loop(&s, listener, &ct))?);

        Ok(Self {
            addr,
            shared,
            stale_report_after: config.stale_report_after,
            threads,
            client_threads,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn bus(&self) -> &Bus {
        &self.shared.bus
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.load(Ordering::Acquire)
    }

    /// Classification or stepping failures swallowed by node threads.
    pub fn node_errors(&self) -> u64 {
        self.shared.node_errors.load(Ordering::Acquire)
    }

    /// Latency percentiles over the last `window` samples per stage.
    pub fn measure_latency(&self, window: usize) -> Result<LatencyReport, BusError> {
        self.shared.latency.report(window, self.stale_report_after)
    }

    pub fn reset_latency(&self) {
        self.shared.latency.clear();
    }

    /// Stops accepting, closes the bus and joins every thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.shutdown.swap(true, Ordering::AcqRel) {
            return;
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        self.shared.bus.close();
        let clients: Vec<_> = self.client_threads.lock().unwrap_or_else(|e| e.into_inner()).drain(..).collect();
        for t in clients {
            let _ = t.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.stop();
    }
}

fn spawn(name: &str, f: impl FnOnce() + Send + 'static) -> io::Result<JoinHandle<()>> {
    thread::Builder::new().name(format!("palmjog-{name}")).spawn(f)
}

fn perception_loop(s: &Shared, classifier: &Classifier, sub: crate::Subscription) {
    while !s.stopping() {
        let env = match sub.recv_timeout(POLL) {
            Ok(env) => env,
            Err(RecvError::Timeout) => continue,
            Err(RecvError::Closed) => break,
        };
        let Payload::Landmarks(frame) = env.payload.as_ref() else { continue };
        match classifier.classify(frame) {
            Ok(ev) => {
                let now = s.clock.now_ms();
                if s.bus.publish_traced(Topic::Gesture, Payload::Gesture(ev), now, env.origin).is_ok() {
                    if let Some(origin) = env.origin {
                        s.latency.record_since(Stage::FrameToGesture, origin);
                    }
                }
            }
            Err(_) => {
                s.node_errors.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

fn controller_loop(s: &Shared, mut node: ControllerNode, sub: crate::Subscription, tick: Duration) {
    while !s.stopping() {
        let (event, cause) = match sub.recv_timeout(tick) {
            Ok(env) => match env.payload.as_ref() {
                Payload::Gesture(ev) => (Some(*ev), Some(env)),
                _ => continue,
            },
            Err(RecvError::Timeout) => (None, None),
            Err(RecvError::Closed) => break,
        };
        let now = s.clock.now_ms();
        match node.on_event(event.as_ref(), now) {
            Ok(Some(cmd)) => {
                let origin = cause.as_ref().and_then(|c| c.origin);
                if s.bus.publish_traced(Topic::Jog, Payload::Jog(cmd), now, origin).is_ok() {
                    if let Some(c) = &cause {
                        s.latency.record_since(Stage::GestureToJog, c.published_at);
                    }
                    if let Some(o) = origin {
                        s.latency.record_since(Stage::FrameToJog, o);
                    }
                }
            }
            Ok(None) => {}
            Err(_) => {
                s.node_errors.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

fn sim_loop(s: &Shared, mut node: SimNode, sub: crate::Subscription, tick: Duration) {
    let start = Instant::now();
    let mut k: u32 = 0;
    let _ = s.bus.publish(
        Topic::RobotState,
        Payload::State(RobotState::from_sim(node.state(), s.clock.now_ms())),
        s.clock.now_ms(),
    );
    while !s.stopping() {
        k += 1;
        let deadline = start + tick * k;
        if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
        let now = s.clock.now_ms();
        let mut latest_jog = None;
        for env in sub.drain() {
            if let Payload::Jog(cmd) = env.payload.as_ref() {
                node.on_jog(cmd, now);
                latest_jog = Some(env.published_at);
            }
        }
        let out = match node.tick(now) {
            Ok(out) => out,
            Err(_) => {
                s.node_errors.fetch_add(1, Ordering::Relaxed);
                continue;
            }
        };
        let state = Payload::State(RobotState::from_sim(&out.state, now));
        if s.bus.publish(Topic::RobotState, state, now).is_ok() {
            if let Some(at) = latest_jog {
                s.latency.record_since(Stage::JogToState, at);
            }
        }
        if out.has_safety_event() {
            let ev = SafetyEvent::from_verdict(&out.verdict, now);
            let _ = s.bus.publish(Topic::SafetyEvents, Payload::Safety(ev), now);
        }
    }
}

fn accept_loop(s: &Arc<Shared>, listener: TcpListener, handles: &Mutex<Vec<JoinHandle<()>>>) {
    while !s.stopping() {
        match listener.accept() {
            Ok((stream, _)) => {
                let sc = Arc::clone(s);
                if let Ok(h) = spawn("client", move || {
                    sc.clients.fetch_add(1, Ordering::AcqRel);
                    let _ = serve_client(&sc, stream);
                    sc.clients.fetch_sub(1, Ordering::AcqRel);
                }) {
                    let mut hs = handles.lock().unwrap_or_else(|e| e.into_inner());
                    hs.retain(|h| !h.is_finished());
                    hs.push(h);
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

type Writer = Arc<Mutex<TcpStream>>;

fn send(w: &Writer, msg: &Outbound) -> io::Result<()> {
    let mut line = encode(msg);
    line.push('\n');
    w.lock().unwrap_or_else(|e| e.into_inner()).write_all(line.as_bytes())
}

enum Line {
    Text(String, Instant),
    TooLong,
    Closed,
}

fn next_line(s: &Shared, reader: &mut BufReader<TcpStream>, buf: &mut Vec<u8>) -> Line {
    loop {
        match reader.read_until(b'\n', buf) {
            Ok(0) if buf.is_empty() => return Line::Closed,
            Ok(_) => {
                let at = Instant::now();
                let text = String::from_utf8_lossy(buf).trim_end_matches(['\r', '\n']).to_string();
                buf.clear();
                return Line::Text(text, at);
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {
                if s.stopping() {
                    return Line::Closed;
                }
                if buf.len() > s.max_line_bytes {
                    return Line::TooLong;
                }
            }
            Err(_) => return Line::Closed,
        }
    }
}

fn serve_client(s: &Arc<Shared>, stream: TcpStream) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_write_timeout(Some(Duration::from_secs(2)))?;
    let writer: Writer = Arc::new(Mutex::new(stream.try_clone()?));
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut buf = Vec::new();
    send(&writer, &Outbound::hello())?;

    let refuse = |e: WireError| {
        let _ = send(&writer, &e.to_outbound());
        let _ = stream.shutdown(std::net::Shutdown::Both);
    };
    match next_line(s, &mut reader, &mut buf) {
        Line::Text(text, _) => {
            if let Err(e) = check_hello(&text) {
                refuse(e);
                return Ok(());
            }
        }
        Line::TooLong => {
            refuse(WireError::new(ErrorCode::LineTooLong, "line exceeds limit"));
            return Ok(());
        }
        Line::Closed => return Ok(()),
    }

    let sub = s.bus.subscribe(&[Topic::Gesture, Topic::Jog, Topic::RobotState, Topic::SafetyEvents]);
    let done = Arc::new(AtomicBool::new(false));
    let pump = {
        let (w, d, s) = (Arc::clone(&writer), Arc::clone(&done), Arc::clone(s));
        spawn("client-writer", move || {
            while !d.load(Ordering::Acquire) && !s.stopping() {
                match sub.recv_timeout(POLL) {
                    Ok(env) => {
                        if let Some(msg) = Outbound::from_envelope(&env) {
                            if send(&w, &msg).is_err() {
                                break;
                            }
                        }
                    }
                    Err(RecvError::Timeout) => {}
                    Err(RecvError::Closed) => break,
                }
            }
            d.store(true, Ordering::Release);
        })?
    };

    while !done.load(Ordering::Acquire) {
        let (text, received) = match next_line(s, &mut reader, &mut buf) {
            Line::Text(t, at) => (t, at),
            Line::TooLong => {
                let _ = send(&writer, &WireError::new(ErrorCode::LineTooLong, "line exceeds limit").to_outbound());
                break;
            }
            Line::Closed => break,
        };
        if text.trim().is_empty() {
            continue;
        }
        let now = s.clock.now_ms();
        let published = match parse_inbound(&text) {
            Ok(Inbound::Frame { t, hand, pts }) => frame_from_wire(t, hand, &pts).map(|f| {
                s.bus.publish_traced(Topic::Landmarks, Payload::Landmarks(f), now, Some(received))
            }),
            Ok(Inbound::GestureHold { label, .. }) => {
                let ev = GestureEvent {
                    label: palmjog_core::GestureLabel::new(label as usize).expect("validated by parse_inbound"),
                    confidence: 1.0,
                };
                Ok(s.bus.publish_traced(Topic::Gesture, Payload::Gesture(ev), now, Some(received)))
            }
            Ok(Inbound::Hello { .. }) => continue,
            Err(e) => Err(e),
        };
        match published {
            Ok(Ok(_)) => {}
            Ok(Err(_)) => break,
            Err(e) => {
                if send(&writer, &e.to_outbound()).is_err() || e.code.is_fatal() {
                    break;
                }
            }
        }
    }
    done.store(true, Ordering::Release);
    let _ = pump.join();
    let _ = stream.shutdown(std::net::Shutdown::Both);
    Ok(())
}
