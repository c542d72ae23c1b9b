use std::sync::Arc;
use std::thread;

use palmjog_bus::{Bus, BusError, Payload, Topic};
use palmjog_core::control::JogCommand;
use palmjog_core::{GestureEvent, GestureLabel};
use proptest::prelude::*;

fn jog(i: u64) -> Payload {
    Payload::Jog(JogCommand::stop(i))
}

fn gesture() -> Payload {
    Payload::Gesture(GestureEvent {
        label: GestureLabel::FIST,
        confidence: 1.0,
    })
}

fn stamp(env: &palmjog_bus::Envelope) -> u64 {
    match env.payload.as_ref() {
        Payload::Jog(c) => c.stamp_ms,
        _ => panic!("cross-talk: {:?}", env.topic),
    }
}

#[test]
fn ten_thousand_in_order() {
    let bus = Arc::new(Bus::new());
    let sub = bus.subscribe(&[Topic::Jog]);
    let b = Arc::clone(&bus);
    let producer = thread::spawn(move || {
        for i in 0..10_000 {
            b.publish(Topic::Jog, jog(i), i).unwrap();
        }
    });
    let mut seen = Vec::with_capacity(10_000);
    loop {
        match sub.recv_timeout(std::time::Duration::from_millis(20)) {
            Ok(env) => seen.push(env.seq),
            Err(_) if producer.is_finished() && sub.is_empty() => break,
            Err(_) => {}
        }
    }
    producer.join().unwrap();
    // a live consumer can fall behind, so count drops too
    let c = sub.counters(Topic::Jog);
    assert_eq!(c.published, 10_000);
    assert_eq!(c.delivered, seen.len() as u64);
    assert_eq!(c.delivered + c.dropped, 10_000);
    assert_eq!(*seen.last().unwrap(), 10_000);
    assert!(seen.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn ten_thousand_lockstep_none_lost() {
    let bus = Bus::new();
    let sub = bus.subscribe(&[Topic::Jog]);
    let mut seqs = Vec::new();
    for i in 0..10_000u64 {
        bus.publish(Topic::Jog, jog(i), i).unwrap();
        if i % 50 == 49 {
            seqs.extend(sub.drain().iter().map(|e| e.seq));
        }
    }
    assert_eq!(seqs, (1..=10_000).collect::<Vec<u64>>());
    assert_eq!(sub.dropped(), 0);
}

#[test]
fn slow_consumer_drops_oldest() {
    let bus = Bus::new();
    let sub = bus.subscribe(&[Topic::Jog]);
    for i in 0..1_000 {
        bus.publish(Topic::Jog, jog(i), i).unwrap();
    }
    let c = sub.counters(Topic::Jog);
    assert_eq!(c.dropped, 936);
    let kept: Vec<u64> = sub.drain().iter().map(stamp).collect();
    assert_eq!(kept, (936..1_000).collect::<Vec<u64>>());
    let c = sub.counters(Topic::Jog);
    assert_eq!(c.delivered + c.dropped, c.published);
}

#[test]
fn fan_out_is_identical() {
    let bus = Bus::new();
    let a = bus.subscribe(&[Topic::Jog]);
    let b = bus.subscribe(&[Topic::Jog]);
    for i in 0..50 {
        bus.publish(Topic::Jog, jog(i), i).unwrap();
    }
    let sa: Vec<(u64, u64)> = a.drain().iter().map(|e| (e.seq, stamp(e))).collect();
    let sb: Vec<(u64, u64)> = b.drain().iter().map(|e| (e.seq, stamp(e))).collect();
    assert_eq!(sa.len(), 50);
    assert_eq!(sa, sb);
}

#[test]
fn no_replay_and_no_subscribers() {
    let bus = Bus::new();
    assert_eq!(bus.publish(Topic::Jog, jog(0), 0).unwrap(), 1);
    let sub = bus.subscribe(&[Topic::Jog]);
    assert!(sub.try_recv().is_none());
    bus.publish(Topic::Jog, jog(1), 1).unwrap();
    assert_eq!(sub.try_recv().unwrap().seq, 2);
}

#[test]
fn no_cross_talk() {
    let bus = Bus::new();
    let jogs = bus.subscribe(&[Topic::Jog]);
    let gestures = bus.subscribe_named(&["perception/gesture"]).unwrap();
    for i in 0..10 {
        bus.publish(Topic::Jog, jog(i), i).unwrap();
        bus.publish(Topic::Gesture, gesture(), i).unwrap();
    }
    assert!(jogs.drain().iter().all(|e| e.topic == Topic::Jog));
    assert!(gestures.drain().iter().all(|e| e.topic == Topic::Gesture));
}

#[test]
fn unknown_topic_rejected() {
    let bus = Bus::new();
    assert!(matches!(bus.subscribe_named(&["robot/joints"]), Err(BusError::UnknownTopic(t)) if t == "robot/joints"));
}

#[test]
fn concurrent_publishers_keep_topic_order() {
    let bus = Arc::new(Bus::with_capacity(100_000).unwrap());
    let sub = bus.subscribe(&[Topic::Jog, Topic::Gesture]);
    let handles: Vec<_> = (0..4)
        .map(|k| {
            let b = Arc::clone(&bus);
            thread::spawn(move || {
                for i in 0..2_000 {
                    if k % 2 == 0 {
                        b.publish(Topic::Jog, jog(i), i).unwrap();
                    } else {
                        b.publish(Topic::Gesture, gesture(), i).unwrap();
                    }
                }
            })
        })
        .collect();
    handles.into_iter().for_each(|h| h.join().unwrap());
    let all = sub.drain();
    assert_eq!(all.len(), 8_000);
    for t in [Topic::Jog, Topic::Gesture] {
        let seqs: Vec<u64> = all.iter().filter(|e| e.topic == t).map(|e| e.seq).collect();
        assert_eq!(seqs, (1..=4_000).collect::<Vec<u64>>());
    }
}

#[derive(Debug, Clone)]
enum Op {
    Publish(bool),
    Recv,
}

proptest! {
    #[test]
    fn accounting_holds_for_any_interleaving(
        cap in 1usize..16,
        ops in proptest::collection::vec(prop_oneof![
            3 => any::<bool>().prop_map(Op::Publish),
            1 => Just(Op::Recv),
        ], 0..300),
    ) {
        let bus = Bus::with_capacity(cap).unwrap();
        let sub = bus.subscribe(&[Topic::Jog, Topic::Gesture]);
        let mut last = [0u64; 2];
        for op in ops {
            match op {
                Op::Publish(true) => { bus.publish(Topic::Jog, jog(0), 0).unwrap(); }
                Op::Publish(false) => { bus.publish(Topic::Gesture, gesture(), 0).unwrap(); }
                Op::Recv => {
                    if let Some(e) = sub.try_recv() {
                        let k = usize::from(e.topic == Topic::Gesture);
                        prop_assert!(e.seq > last[k]);
                        last[k] = e.seq;
                    }
                }
            }
            prop_assert!(sub.len() <= cap);
        }
        for t in [Topic::Jog, Topic::Gesture] {
            let c = sub.counters(t);
            let queued = sub.drain().iter().filter(|e| e.topic == t).count() as u64;
            let c2 = sub.counters(t);
            prop_assert_eq!(c.delivered + c.dropped + queued, c.published);
            prop_assert_eq!(c2.delivered + c2.dropped, c2.published);
            prop_assert_eq!(c.published, bus.last_seq(t));
        }
    }
}
