#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use palmjog_bus::wire::{encode, frame_to_wire, Outbound};
use palmjog_bus::Classifier;
use palmjog_core::dataset::split_dataset;
use palmjog_core::nn::{train, LayerSpec, TrainConfig};
use palmjog_core::quant::quantize;
use palmjog_core::synth::{jittered_frame, generate_synthetic_dataset};
use palmjog_core::{GestureLabel, LandmarkFrame};
use rand_chacha::ChaCha8Rng;

/// Default-recipe quantized model.
pub fn classifier() -> Arc<Classifier> {
    let d = generate_synthetic_dataset(200, 0.02, 7).unwrap();
    let (tr, va) = split_dataset(&d, 50, 7).unwrap();
    let (p, _) = train(&tr, &va, &LayerSpec::gesture_default(), &TrainConfig::default()).unwrap();
    Arc::new(Classifier::quantized(quantize(&p, &tr).unwrap()).unwrap())
}

pub fn frame(label: GestureLabel, t: u64, rng: &mut ChaCha8Rng) -> LandmarkFrame {
    jittered_frame(label, 0.005, t, rng)
}

pub struct Client {
    pub reader: BufReader<TcpStream>,
    pub stream: TcpStream,
}

impl Client {
    pub fn connect(addr: std::net::SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        stream.set_nodelay(true).unwrap();
        Self {
            reader: BufReader::new(stream.try_clone().unwrap()),
            stream,
        }
    }

    pub fn handshake(addr: std::net::SocketAddr) -> Self {
        let mut c = Self::connect(addr);
        assert_eq!(c.next(), Some(Outbound::hello()));
        c.send_raw(r#"{"type":"hello","proto":1}"#);
        c
    }

    pub fn send_raw(&mut self, line: &str) {
        self.stream.write_all(line.as_bytes()).unwrap();
        self.stream.write_all(b"\n").unwrap();
    }

    pub fn send_frame(&mut self, f: &LandmarkFrame) {
        let line = encode(&frame_to_wire(f));
        self.send_raw(&line);
    }

    /// Next server message, `None` on EOF or timeout.
    pub fn next(&mut self) -> Option<Outbound> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(line.trim_end()).expect("server sends valid json")),
        }
    }

    /// Skips messages until `pred` matches.
    pub fn wait_for(&mut self, mut pred: impl FnMut(&Outbound) -> bool) -> Option<Outbound> {
        while let Some(m) = self.next() {
            if pred(&m) {
                return Some(m);
            }
        }
        None
    }
}
