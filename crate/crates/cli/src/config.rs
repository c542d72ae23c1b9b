use std::path::{Path, PathBuf};

use palmjog_bus::{PipelineConfig, ServeConfig};
use palmjog_core::arm::SimConfig;
use palmjog_core::control::{default_gesture_map, parse_gesture_map, ControllerConfig};
use palmjog_core::nn::{LayerSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CmdResult, Failure};

/// Whole-application settings. Every section and key is optional; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub seed: u64,
    /// `label_id = intent` file, relative to the config file.
    pub gesture_map: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub runtime: RuntimeConfig,
    pub bench: BenchConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            gesture_map: None,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
            runtime: RuntimeConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub per_class: usize,
    pub sigma: f64,
    /// Held-out samples per class for validation.
    pub val_per_class: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            per_class: 200,
            sigma: 0.02,
            val_per_class: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Layer widths, comma separated.
    pub spec: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            spec: "42,20,10,8".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    pub tick_ms: u64,
    pub stale_jog_ms: u64,
    pub queue_capacity: usize,
    pub host: String,
    pub port: u16,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            tick_ms: 10,
            stale_jog_ms: 500,
            queue_capacity: palmjog_bus::DEFAULT_QUEUE_CAPACITY,
            host: "127.0.0.1".into(),
            port: 7070,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub fps: u32,
    pub seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { fps: 30, seconds: 10.0 }
    }
}

impl AppConfig {
    /// Reads a TOML file, resolving the gesture map relative to it.
    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).context(format!("reading {}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| e.context(format!("in {}", path.display())))?;
        if let Some(map) = &cfg.gesture_map {
            let resolved = path.parent().unwrap_or(Path::new(".")).join(map);
            let text = std::fs::read_to_string(&resolved)
                .map_err(|e| Failure::from(e).context(format!("reading {}", resolved.display())))?;
            cfg.controller.gesture_map = parse_gesture_map(&text)
                .map_err(|e| Failure::Validation(anyhow::Error::new(e).context(resolved.display().to_string())))?;
            cfg.gesture_map = Some(resolved);
        }
        Ok(cfg)
    }

    /// Parses TOML text; a `gesture_map` path is kept but not read.
    pub fn parse(text: &str) -> CmdResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Failure::Validation(e.into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CmdResult<()> {
        self.layer_spec()?;
        self.train.validate().map_err(Failure::from)?;
        self.controller.validate().map_err(|e| Failure::Validation(e.into()))?;
        self.sim.validate().map_err(|e| Failure::Validation(e.into()))?;
        if self.data.per_class == 0 || !(self.data.sigma >= 0.0 && self.data.sigma.is_finite()) {
            return Err(Failure::invalid("data.per_class must be positive and data.sigma finite and non-negative"));
        }
        if self.runtime.tick_ms == 0 || self.runtime.queue_capacity == 0 {
            return Err(Failure::invalid("runtime.tick_ms and runtime.queue_capacity must be positive"));
        }
        if self.bench.fps == 0 || !(self.bench.seconds > 0.0 && self.bench.seconds.is_finite()) {
            return Err(Failure::invalid("bench.fps and bench.seconds must be positive"));
        }
        Ok(())
    }

    pub fn layer_spec(&self) -> CmdResult<LayerSpec> {
        Ok(LayerSpec::parse(&self.model.spec)?)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.train.seed = s;
        }
        self
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            controller: self.controller.clone(),
            sim: self.sim.clone(),
            tick_ms: self.runtime.tick_ms,
            stale_jog_ms: self.runtime.stale_jog_ms,
            initial_q: None,
        }
    }

    pub fn serve(&self, port: u16) -> ServeConfig {
        ServeConfig {
            bind: format!("{}:{}", self.runtime.host, port),
            controller: self.controller.clone(),
            sim: self.sim.clone(),
            tick_ms: self.runtime.tick_ms,
            stale_jog_ms: self.runtime.stale_jog_ms,
            queue_capacity: self.runtime.queue_capacity,
            ..ServeConfig::default()
        }
    }

    /// Snapshot for manifests; the gesture map is written out as its table.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let table = self.controller.gesture_map.to_string();
        if self.controller.gesture_map != default_gesture_map() || self.gesture_map.is_some() {
            v["gesture_map_table"] = serde_json::Value::String(table);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_all_defaults() {
        assert_eq!(AppConfig::parse("").unwrap(), AppConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = AppConfig::parse(
            "seed = 3\n[train]\nepochs = 10\n[controller]\ndebounce_frames = 5\n[sim.envelope]\npayload_cap = 2.0\n",
        )
        .unwrap();
        assert_eq!((cfg.seed, cfg.train.epochs, cfg.controller.debounce_frames), (3, 10, 5));
        assert_eq!(cfg.sim.envelope.payload_cap, 2.0);
        assert_eq!(cfg.train.learning_rate, 0.01);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["sed = 1", "[train]\nepoch = 3", "[sim.envelope]\ncap = 1", "[nope]"] {
            assert!(matches!(AppConfig::parse(text), Err(Failure::Validation(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in ["[controller]\ndebounce_frames = 0", "[model]\nspec = \"42,x\"", "[train]\nlearning_rate = -1.0"] {
            assert!(matches!(AppConfig::parse(text), Err(Failure::Validation(_))), "{text}");
        }
    }

    #[test]
    fn gesture_map_file_is_resolved() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("map.txt"), "0 = jog z +\n").unwrap();
        let cfg_path = dir.path().join("app.toml");
        std::fs::write(&cfg_path, "gesture_map = \"map.txt\"\n").unwrap();
        let cfg = AppConfig::load(&cfg_path).unwrap();
        assert_eq!(
            cfg.controller.map_gesture(palmjog_core::GestureLabel::FIST).to_string(),
            "jog z +"
        );
        assert!(cfg.snapshot()["gesture_map_table"].is_string());
    }
}
