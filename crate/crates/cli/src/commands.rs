use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use palmjog_bus::wire::encode;
use palmjog_bus::{Classifier, Service};
use palmjog_core::dataset::{read_dataset, split_dataset, write_dataset};
use palmjog_core::gesture::GESTURE_COUNT;
use palmjog_core::nn::{argmax, evaluate, forward, train, EvalReport, MlpParams, FLOAT_MAGIC};
use palmjog_core::quant::{
    agreement_rate, prune_magnitude, quantize, PruneConfig, QuantizedModel, QUANT_MAGIC,
};
use palmjog_core::synth::{generate_synthetic_dataset, TEMPLATE_VERSION};
use palmjog_core::Dataset;
use serde_json::json;

use crate::bench::run_bench;
use crate::config::AppConfig;
use crate::error::{CmdResult, Failure};
use crate::manifest::{FileRecord, RunManifest};
use crate::scenario::{run_scenario, InputMode, ScenarioScript};
use crate::{AgreeArgs, BenchArgs, Cli, Command, EvalArgs, GenDataArgs, QuantizeArgs, ServeArgs, SimArgs, TrainArgs};

/// Max serialized size of the quantized default model.
pub const QUANT_BUDGET_BYTES: usize = 7_168;

pub enum LoadedModel {
    Float(MlpParams),
    Quantized(QuantizedModel),
}

/// Reads a model file, telling the formats apart by magic.
pub fn load_model(path: &Path) -> CmdResult<LoadedModel> {
    let bytes = std::fs::read(path).map_err(|e| Failure::from(e).context(format!("reading {}", path.display())))?;
    let ctx = |f: Failure| f.context(format!("loading {}", path.display()));
    if bytes.starts_with(FLOAT_MAGIC) {
        Ok(LoadedModel::Float(MlpParams::from_bytes(&bytes).map_err(|e| ctx(e.into()))?))
    } else if bytes.starts_with(QUANT_MAGIC) {
        Ok(LoadedModel::Quantized(QuantizedModel::from_bytes(&bytes).map_err(|e| ctx(e.into()))?))
    } else {
        Err(ctx(Failure::invalid("not a palmjog model file")))
    }
}

pub fn load_classifier(path: &Path) -> CmdResult<Arc<Classifier>> {
    let c = match load_model(path)? {
        LoadedModel::Float(p) => Classifier::float(p),
        LoadedModel::Quantized(q) => Classifier::quantized(q),
    };
    Ok(Arc::new(c?))
}

struct Ctx {
    cfg: AppConfig,
    quiet: bool,
    argv: Vec<String>,
    started: Instant,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.argv.clone(), self.cfg.seed, self.cfg.snapshot())
    }

    fn finish(
        &self,
        mut m: RunManifest,
        inputs: &[&Path],
        outputs: &[&Path],
        summary: serde_json::Value,
        at: &Path,
    ) -> CmdResult<()> {
        m.inputs = inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_, _>>()?;
        m.outputs = outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_, _>>()?;
        m.summary = summary;
        m.elapsed_ms = self.started.elapsed().as_secs_f64() * 1e3;
        m.write(at).map_err(|e| Failure::from(e).context(format!("writing {}", at.display())))
    }

    fn read_data(&self, path: &Path, class_count: usize) -> CmdResult<Dataset> {
        read_dataset(path, class_count).map_err(|e| Failure::from(e).context(format!("reading {}", path.display())))
    }

    /// Held-out split, or the whole set when `all`.
    fn eval_set(&self, data: Dataset, all: bool, val_per_class: Option<usize>) -> CmdResult<Dataset> {
        if all {
            return Ok(data);
        }
        let v = val_per_class.unwrap_or(self.cfg.data.val_per_class);
        Ok(split_dataset(&data, v, self.cfg.seed)?.1)
    }
}

pub(crate) fn dispatch(cli: Cli, argv: Vec<String>) -> CmdResult<()> {
    let cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    }
    .with_seed(cli.seed);
    let ctx = Ctx {
        cfg,
        quiet: cli.quiet,
        argv,
        started: Instant::now(),
    };
    match cli.command {
        Command::GenData(a) => gen_data(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Quantize(a) => quantize_cmd(&ctx, a),
        Command::Agree(a) => agree_cmd(&ctx, a),
        Command::Sim(a) => sim_cmd(&ctx, a),
        Command::Serve(a) => serve_cmd(&ctx, a),
        Command::Bench(a) => bench_cmd(&ctx, a),
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(v).expect("reports serialize");
    std::fs::write(path, text + "\n").map_err(|e| Failure::from(e).context(format!("writing {}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn gen_data(ctx: &Ctx, a: GenDataArgs) -> CmdResult<()> {
    let per_class = a.per_class.unwrap_or(ctx.cfg.data.per_class);
    let sigma = a.sigma.unwrap_or(ctx.cfg.data.sigma);
    let data = generate_synthetic_dataset(per_class, sigma, ctx.cfg.seed).map_err(|e| Failure::Validation(e.into()))?;
    write_dataset(&data, &a.output).map_err(|e| Failure::from(e).context(format!("writing {}", a.output.display())))?;
    ctx.say(format!("wrote {} rows ({per_class} per class, sigma {sigma}) to {}", data.len(), a.output.display()));
    let summary = json!({ "rows": data.len(), "per_class": per_class, "sigma": sigma, "templates": TEMPLATE_VERSION });
    ctx.finish(ctx.manifest("gen-data"), &[], &[&a.output], summary, &RunManifest::path_for(&a.output, None))
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> CmdResult<()> {
    let mut cfg = ctx.cfg.train.clone();
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let spec = match &a.spec {
        Some(s) => palmjog_core::nn::LayerSpec::parse(s)?,
        None => ctx.cfg.layer_spec()?,
    };
    let data = ctx.read_data(&a.input, spec.output_len().min(GESTURE_COUNT))?;
    let v = a.val_per_class.unwrap_or(ctx.cfg.data.val_per_class);
    if v == 0 {
        return Err(Failure::invalid("val_per_class must be positive"));
    }
    let (tr, va) = split_dataset(&data, v, ctx.cfg.seed)?;
    let (params, history) = train(&tr, &va, &spec, &cfg)?;
    let report = evaluate(&params, &va)?;
    std::fs::write(&a.output, params.to_bytes())
        .map_err(|e| Failure::from(e).context(format!("writing {}", a.output.display())))?;
    let hist_path = sibling(&a.output, ".history.json");
    write_json(&hist_path, &history)?;
    ctx.say(format!(
        "trained {} ({} params) for {} epochs: train acc {:.4}, val acc {:.4}",
        spec.sizes().iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-"),
        params.param_count(),
        history.epochs(),
        history.train_accuracy.last().copied().unwrap_or(0.0),
        report.accuracy,
    ));
    print_confusion(ctx, &report);
    let mut m = ctx.manifest("train");
    m.seed = cfg.seed;
    let summary = json!({
        "spec": spec.sizes(),
        "param_count": params.param_count(),
        "train": cfg,
        "train_rows": tr.len(),
        "val_rows": va.len(),
        "val_accuracy": report.accuracy,
        "confusion": report.confusion,
    });
    ctx.finish(m, &[&a.input], &[&a.output, &hist_path], summary, &RunManifest::path_for(&a.output, None))
}

fn print_confusion(ctx: &Ctx, r: &EvalReport) {
    if ctx.quiet {
        return;
    }
    println!("confusion (rows true, columns predicted):");
    for (i, row) in r.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:4}")).collect();
        let name = palmjog_core::GestureLabel::new(i).map_or("?", |l| l.name());
        println!("  {name:>10} {}", cells.join(""));
    }
    if let Some((t, p, n)) = r.worst_confusion() {
        let nm = |i| palmjog_core::GestureLabel::new(i).map_or("?", |l| l.name());
        println!("most frequent confusion: {} -> {} ({n})", nm(t), nm(p));
    }
}

fn quantized_report(q: &QuantizedModel, data: &Dataset) -> CmdResult<EvalReport> {
    let mut pairs = Vec::with_capacity(data.len());
    for s in &data.samples {
        pairs.push((s.label.id(), argmax(&q.logits(&s.features)?)));
    }
    Ok(EvalReport::from_predictions(q.spec.output_len().max(data.class_count), pairs))
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> CmdResult<()> {
    let model = load_model(&a.model)?;
    let width = match &model {
        LoadedModel::Float(p) => p.spec.output_len(),
        LoadedModel::Quantized(q) => q.spec.output_len(),
    };
    let data = ctx.read_data(&a.input, width.min(GESTURE_COUNT))?;
    let set = ctx.eval_set(data, a.all, a.val_per_class)?;
    let report = match &model {
        LoadedModel::Float(p) => evaluate(p, &set)?,
        LoadedModel::Quantized(q) => quantized_report(q, &set)?,
    };
    ctx.say(format!("accuracy {:.4} on {} rows", report.accuracy, report.total()));
    print_confusion(ctx, &report);
    let summary = serde_json::to_value(&report).expect("report serializes");
    let mut outputs = Vec::new();
    if let Some(r) = &a.report {
        write_json(r, &report)?;
        outputs.push(r.as_path());
    }
    let at = match &a.report {
        Some(r) => RunManifest::path_for(r, None),
        None => RunManifest::path_for(&a.model, Some("eval")),
    };
    ctx.finish(ctx.manifest("eval"), &[&a.model, &a.input], &outputs, summary, &at)
}

/// Mean absolute difference between float and dequantized logits.
fn logit_mae(p: &MlpParams, q: &QuantizedModel, data: &Dataset) -> CmdResult<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in &data.samples {
        let (z, _) = forward(p, &s.features)?;
        for (a, b) in z.0.iter().zip(q.logits(&s.features)?) {
            sum += (a - b).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

fn quantize_cmd(ctx: &Ctx, a: QuantizeArgs) -> CmdResult<()> {
    let LoadedModel::Float(mut params) = load_model(&a.input)? else {
        return Err(Failure::invalid(format!("{} is already quantized", a.input.display())));
    };
    let data = ctx.read_data(&a.calib, params.spec.output_len().min(GESTURE_COUNT))?;
    let v = a.val_per_class.unwrap_or(ctx.cfg.data.val_per_class);
    let (calib, val) = if v == 0 { (data.clone(), data) } else { split_dataset(&data, v, ctx.cfg.seed)? };
    let base_acc = evaluate(&params, &val)?.accuracy;
    let mut pruned_acc = None;
    if let Some(s) = a.prune {
        let cfg = PruneConfig::new(s).map_err(Failure::from)?;
        params = prune_magnitude(&params, &cfg);
        pruned_acc = Some(evaluate(&params, &val)?.accuracy);
    }
    let q = quantize(&params, &calib)?;
    let bytes = q.to_bytes();
    std::fs::write(&a.output, &bytes).map_err(|e| Failure::from(e).context(format!("writing {}", a.output.display())))?;
    let agreement = agreement_rate(&params, &q, &val)?;
    let mae = logit_mae(&params, &q, &val)?;
    let q_acc = quantized_report(&q, &val)?.accuracy;
    ctx.say(format!(
        "wrote {} bytes to {} (budget {QUANT_BUDGET_BYTES}{})",
        bytes.len(),
        a.output.display(),
        if bytes.len() <= QUANT_BUDGET_BYTES { "" } else { ", OVER BUDGET" }
    ));
    if let Some(pa) = pruned_acc {
        ctx.say(format!("pruning: accuracy {base_acc:.4} -> {pa:.4} ({:+.2} points)", 100.0 * (pa - base_acc)));
    }
    ctx.say(format!(
        "agreement {agreement:.4} on {} rows, logit MAE {mae:.4}, quantized accuracy {q_acc:.4}",
        val.len()
    ));
    let summary = json!({
        "bytes": bytes.len(),
        "budget_bytes": QUANT_BUDGET_BYTES,
        "prune": a.prune,
        "float_accuracy": base_acc,
        "pruned_accuracy": pruned_acc,
        "quantized_accuracy": q_acc,
        "agreement": agreement,
        "logit_mae": mae,
        "calibration_rows": calib.len(),
    });
    ctx.finish(ctx.manifest("quantize"), &[&a.input, &a.calib], &[&a.output], summary, &RunManifest::path_for(&a.output, None))
}

fn agree_cmd(ctx: &Ctx, a: AgreeArgs) -> CmdResult<()> {
    let LoadedModel::Float(params) = load_model(&a.model)? else {
        return Err(Failure::invalid(format!("{} is not a float model", a.model.display())));
    };
    let LoadedModel::Quantized(q) = load_model(&a.quantized)? else {
        return Err(Failure::invalid(format!("{} is not a quantized model", a.quantized.display())));
    };
    if params.spec != q.spec {
        return Err(Failure::invalid("float and quantized models have different layer specs"));
    }
    let data = ctx.read_data(&a.input, params.spec.output_len().min(GESTURE_COUNT))?;
    let set = ctx.eval_set(data, a.all, a.val_per_class)?;
    let agreement = agreement_rate(&params, &q, &set)?;
    let mae = logit_mae(&params, &q, &set)?;
    ctx.say(format!("agreement {agreement:.4} on {} rows, logit MAE {mae:.4}", set.len()));
    let summary = json!({ "agreement": agreement, "logit_mae": mae, "rows": set.len() });
    let at = RunManifest::path_for(&a.quantized, Some("agree"));
    ctx.finish(ctx.manifest("agree"), &[&a.model, &a.quantized, &a.input], &[], summary, &at)
}

fn sim_cmd(ctx: &Ctx, a: SimArgs) -> CmdResult<()> {
    let mut script = match (&a.script, a.builtin.as_deref()) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::from(e).context(format!("reading {}", p.display())))?;
            ScenarioScript::parse(&text).map_err(|e| Failure::from(e).context(p.display().to_string()))?
        }
        (None, Some("pick-and-place")) => ScenarioScript::pick_and_place(),
        (None, Some("limit-seek")) => ScenarioScript::limit_seek(),
        (None, Some(other)) => return Err(Failure::invalid(format!("unknown builtin script \"{other}\""))),
        (None, None) => return Err(Failure::invalid("give --script or --builtin")),
    };
    if a.hold {
        script.input = InputMode::Hold;
    }
    let classifier = a.model.as_deref().map(load_classifier).transpose()?;
    let run = run_scenario(&script, classifier, ctx.cfg.pipeline(), ctx.cfg.seed)?;
    let v = &run.verdict;
    ctx.say(format!(
        "{}: {} ({} states, {} safety events, {} joint_limit, {} violations)",
        v.script,
        if v.success { "success" } else { "FAILED" },
        v.states,
        v.safety.events,
        v.safety.joint_limit,
        v.violations.len()
    ));
    for g in &v.goals {
        ctx.say(format!("  goal {}: reached {:?} ms, gripper {:?} ms", g.name, g.reached_at_ms, g.gripper_at_ms));
    }
    for line in v.violations.iter().take(10) {
        ctx.say(format!("  violation: {line}"));
    }
    let mut inputs: Vec<&Path> = a.script.iter().map(|p| p.as_path()).collect();
    inputs.extend(a.model.as_deref());
    let summary = serde_json::to_value(v).expect("verdict serializes");
    if let Some(out) = &a.output {
        let mut text = String::new();
        for m in run.wire_log() {
            text.push_str(&encode(&m));
            text.push('\n');
        }
        std::fs::write(out, text).map_err(|e| Failure::from(e).context(format!("writing {}", out.display())))?;
        let vpath = sibling(out, ".verdict.json");
        write_json(&vpath, v)?;
        ctx.finish(ctx.manifest("sim"), &inputs, &[out, &vpath], summary, &RunManifest::path_for(out, None))?;
    } else if !ctx.quiet {
        println!("{}", serde_json::to_string_pretty(v).expect("verdict serializes"));
    }
    if v.success {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("scenario {} did not succeed", v.script)))
    }
}

fn serve_cmd(ctx: &Ctx, a: ServeArgs) -> CmdResult<()> {
    let classifier = load_classifier(&a.model)?;
    let port = a.port.unwrap_or(ctx.cfg.runtime.port);
    let svc = Service::start(classifier, ctx.cfg.serve(port))?;
    ctx.say(format!("listening on {} (proto {})", svc.local_addr(), palmjog_bus::wire::PROTO_VERSION));
    ctx.say(format!("gesture map:\n{}", ctx.cfg.controller.gesture_map));
    let (tx, rx) = std::sync::mpsc::channel();
    let _ = ctrlc::set_handler(move || {
        let _ = tx.send(());
    });
    match a.duration_s {
        Some(s) if s.is_finite() && s >= 0.0 => {
            let _ = rx.recv_timeout(Duration::from_secs_f64(s));
        }
        Some(_) => return Err(Failure::invalid("duration must be finite and non-negative")),
        None => {
            let _ = rx.recv();
        }
    }
    let latency = svc.measure_latency(usize::MAX).ok();
    let states = svc.bus().last_seq(palmjog_bus::Topic::RobotState);
    svc.shutdown();
    ctx.say(format!("stopped after {states} state messages"));
    let summary = json!({ "port": port, "states_published": states, "latency": latency });
    ctx.finish(ctx.manifest("serve"), &[&a.model], &[], summary, &RunManifest::path_for(&a.model, Some("serve")))
}

fn bench_cmd(ctx: &Ctx, a: BenchArgs) -> CmdResult<()> {
    let classifier = load_classifier(&a.model)?;
    let fps = a.fps.unwrap_or(ctx.cfg.bench.fps);
    let seconds = a.seconds.unwrap_or(ctx.cfg.bench.seconds);
    if fps == 0 || !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Failure::invalid("fps and seconds must be positive"));
    }
    let report = run_bench(classifier, ctx.cfg.serve(0), fps, seconds, ctx.cfg.seed).map_err(Failure::Runtime)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    ctx.say(&text);
    let mut outputs = Vec::new();
    if let Some(r) = &a.report {
        write_json(r, &report)?;
        outputs.push(r.as_path());
    }
    let at = match &a.report {
        Some(r) => RunManifest::path_for(r, None),
        None => RunManifest::path_for(&a.model, Some("bench")),
    };
    let summary = serde_json::to_value(&report).expect("report serializes");
    ctx.finish(ctx.manifest("bench"), &[&a.model], &outputs, summary, &at)
}
