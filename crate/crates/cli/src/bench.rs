use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use palmjog_bus::latency::percentile;
use palmjog_bus::wire::{encode, frame_to_wire, Outbound};
use palmjog_bus::{Classifier, LatencyReport, ServeConfig, Service};
use palmjog_core::synth::jittered_frame;
use palmjog_core::GestureLabel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Gestures cycled during a run, one second each, so the arm wanders but returns.
const CYCLE: [GestureLabel; 6] = [
    GestureLabel::POINT_UP,
    GestureLabel::POINT_DOWN,
    GestureLabel::POINT_LEFT,
    GestureLabel::POINT_RIGHT,
    GestureLabel::PEACE,
    GestureLabel::THUMB_UP,
];

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub count: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl Timing {
    fn from_ms(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        Self {
            count: v.len(),
            p50_ms: percentile(&v, 0.5),
            p99_ms: percentile(&v, 0.99),
            max_ms: *v.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub fps: u32,
    pub seconds: f64,
    pub frames_sent: usize,
    pub messages_received: usize,
    /// Normalization plus inference, timed in-process.
    pub classify: Timing,
    /// Stage latencies measured inside the running service.
    pub service: LatencyReport,
}

/// Streams synthetic frames at `fps` into a fresh service over TCP and
/// reports latency percentiles.
pub fn run_bench(
    classifier: Arc<Classifier>,
    mut serve: ServeConfig,
    fps: u32,
    seconds: f64,
    seed: u64,
) -> anyhow::Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (f64::from(fps) * seconds).round().max(1.0) as usize;
    let period = Duration::from_secs_f64(1.0 / f64::from(fps));
    let frames: Vec<_> = (0..n)
        .map(|k| {
            let label = CYCLE[(k / fps as usize) % CYCLE.len()];
            jittered_frame(label, 0.005, (k as f64 * period.as_secs_f64() * 1e3) as u64, &mut rng)
        })
        .collect();

    let mut classify_ms = Vec::with_capacity(n);
    for f in &frames {
        let t = Instant::now();
        classifier.classify(f)?;
        classify_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }

    serve.bind = "127.0.0.1:0".into();
    let svc = Service::start(classifier, serve)?;
    let stream = TcpStream::connect(svc.local_addr())?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    anyhow::ensure!(serde_json::from_str::<Outbound>(line.trim())? == Outbound::hello(), "bad server hello");
    writeln!(writer, "{}", encode(&Outbound::hello()))?;

    let drain = thread::spawn(move || {
        let mut count = 0usize;
        let mut l = String::new();
        while reader.read_line(&mut l).is_ok_and(|k| k > 0) {
            count += 1;
            l.clear();
        }
        count
    });

    let start = Instant::now();
    for (k, f) in frames.iter().enumerate() {
        let deadline = start + period * k as u32;
        thread::sleep(deadline.saturating_duration_since(Instant::now()));
        writeln!(writer, "{}", encode(&frame_to_wire(f)))?;
    }
    thread::sleep(Duration::from_millis(100));
    let service = svc.measure_latency(n)?;
    let _ = writer.shutdown(std::net::Shutdown::Both);
    svc.shutdown();
    let messages_received = drain.join().unwrap_or(0);

    Ok(BenchReport {
        fps,
        seconds,
        frames_sent: n,
        messages_received,
        classify: Timing::from_ms(classify_ms),
        service,
    })
}
