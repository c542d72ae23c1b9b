use palmjog_core::arm::{step, SimConfig, SimState};
use palmjog_core::control::{
    check_payload, validate_jog, ControllerConfig, ControllerState, JogCommand, SafetyReason,
    SHOULDER_LIFT,
};
use palmjog_core::{GestureEvent, GestureLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fuzzed_streams_never_break_the_envelope() {
    let mut cfg = SimConfig::default();
    let env = cfg.envelope.clone();
    let (lo, hi) = env.joint_limits_deg[SHOULDER_LIFT];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let ctl_cfg = ControllerConfig::default();
    let mut ctl = ControllerState::new();
    let mut state = SimState::home(&cfg.dh);
    let mut now = 0u64;
    let mut limit_events = 0usize;
    let mut speed_events = 0usize;

    for i in 0..20_000u32 {
        now += rng.gen_range(0..60);
        if rng.gen_bool(0.01) {
            // restart somewhere inside the envelope, often right next to a shoulder bound
            let mut q: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            q[SHOULDER_LIFT] = match rng.gen_range(0..3) {
                0 => rng.gen_range(lo..lo + 0.5),
                1 => rng.gen_range(hi - 0.5..hi),
                _ => rng.gen_range(lo..hi),
            }
            .to_radians();
            state = SimState::at(q, &cfg.dh);
        }
        cfg.payload_mass = if rng.gen_bool(0.05) { rng.gen_range(0.0..1.5) } else { 0.3 };
        let cmd = if rng.gen_bool(0.5) {
            let ev = rng.gen_bool(0.8).then(|| GestureEvent {
                label: GestureLabel::new(rng.gen_range(0..8)).unwrap(),
                confidence: rng.gen_range(0.5..1.0),
            });
            ctl.update(ev.as_ref(), now, &ctl_cfg).unwrap().unwrap_or(JogCommand::stop(now))
        } else {
            let scale = if rng.gen_bool(0.3) { 2.0 } else { 0.1 };
            JogCommand {
                linear_velocity: std::array::from_fn(|_| rng.gen_range(-scale..scale)),
                gripper_action: None,
                stamp_ms: now,
            }
        };
        let out = step(&state, &cmd, &cfg).unwrap();
        let deg = out.state.q[SHOULDER_LIFT].to_degrees();
        assert!((lo..=hi).contains(&deg), "step {i}: shoulder {deg}");
        for j in 0..6 {
            assert!(out.state.qdot[j].abs() <= env.speed_cap(j), "step {i} joint {j}");
        }
        let reasons = &out.verdict.reasons;
        limit_events += reasons.contains(&SafetyReason::JointLimit) as usize;
        speed_events += reasons.contains(&SafetyReason::SpeedLimit) as usize;
        assert_eq!(reasons.contains(&SafetyReason::Payload), cfg.payload_mass > env.payload_cap);
        state = out.state;
    }
    println!("joint_limit events {limit_events}, speed_limit events {speed_events}");
    assert!(limit_events > 0 && speed_events > 0);
}

#[test]
fn payload_boundary() {
    let env = SimConfig::default().envelope;
    assert!(check_payload(1.0, &env).unwrap().accepted);
    let v = check_payload(1.2, &env).unwrap();
    assert!(!v.accepted);
    assert_eq!(v.reasons, vec![SafetyReason::Payload]);
    let q = SimState::HOME;
    let cmd = JogCommand {
        linear_velocity: [0.0, 0.0, 0.05],
        gripper_action: None,
        stamp_ms: 0,
    };
    let arm = SimConfig::default().arm();
    let m = validate_jog(&cmd, &q, 2.0, &env, &arm, 0.01).unwrap();
    assert!(m.is_stop());
    assert_eq!((m.qdot, m.next_q), ([0.0; 6], q));
}

#[test]
fn shoulder_pinned_at_lower_bound() {
    let cfg = SimConfig::default();
    let env = &cfg.envelope;
    let mut q = SimState::HOME;
    q[SHOULDER_LIFT] = (-182.99f64).to_radians();
    // resolver that drives the shoulder straight down
    let resolver = |_: &[f64; 3], _: &[f64; 6]| [0.0, -0.6, 0.0, 0.0, 0.0, 0.0];
    let cmd = JogCommand {
        linear_velocity: [0.0, 0.0, -0.05],
        gripper_action: None,
        stamp_ms: 0,
    };
    let m = validate_jog(&cmd, &q, 0.3, env, &resolver, 0.01).unwrap();
    assert!(m.verdict.reasons.contains(&SafetyReason::JointLimit));
    assert_eq!(m.qdot[SHOULDER_LIFT], 0.0);
    let deg = m.next_q[SHOULDER_LIFT].to_degrees();
    assert!(deg >= -183.0 && deg < -182.999_999);
}
