//! Validated pipeline configuration and its flat `key = value` file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain gradient descent with decoupled weight decay.
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub frames_t: usize,
    pub max_duration_d: f64,
    pub feature_dim_cf: usize,
    pub boundary_hidden_dims: [usize; 2],
    pub samples_n: usize,
    pub learning_rate: f64,
    pub frame_loss_weight: f64,
    pub boundary_loss_weight: f64,
    pub contrastive_loss_weight: f64,
    pub contrastive_margin: f64,
    pub weight_decay: f64,
    pub nms_alpha: f64,
    pub nms_t1: f64,
    pub nms_t2: f64,
    pub erf_fake_threshold: f64,
    pub erf_real_append_conf: f64,
    pub erf_fake_append_conf: f64,
    pub rng_seed: u64,

    pub attention_heads: usize,
    pub visual_input_dim: usize,
    pub audio_input_dim: usize,
    pub decode_top_k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frames_t: 512,
            max_duration_d: 40.0,
            feature_dim_cf: 256,
            boundary_hidden_dims: [512, 128],
            samples_n: 10,
            learning_rate: 1e-5,
            frame_loss_weight: 2.0,
            boundary_loss_weight: 1.0,
            contrastive_loss_weight: 0.1,
            contrastive_margin: 0.99,
            weight_decay: 1e-4,
            nms_alpha: 0.7234,
            nms_t1: 0.1968,
            nms_t2: 0.4123,
            erf_fake_threshold: 0.5,
            erf_real_append_conf: 0.95,
            erf_fake_append_conf: 0.55,
            rng_seed: 0,
            attention_heads: 4,
            visual_input_dim: 16,
            audio_input_dim: 16,
            decode_top_k: 100,
            epochs: 50,
            batch_size: 4,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl PipelineConfig {
    /// Desk-scale shape used by tests and the synthetic benchmark: 64 frames
    /// over 8 seconds with 32 feature channels.
    pub fn toy() -> Self {
        PipelineConfig {
            frames_t: 64,
            max_duration_d: 8.0,
            feature_dim_cf: 32,
            boundary_hidden_dims: [32, 16],
            ..PipelineConfig::default()
        }
    }

    /// Seconds covered by one network frame.
    pub fn frame_seconds(&self) -> f64 {
        self.max_duration_d / self.frames_t as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.frames_t < 2 {
            return bad(format!("frames_t = {} must be at least 2", self.frames_t));
        }
        if self.feature_dim_cf == 0 || self.samples_n == 0 || self.visual_input_dim == 0 || self.audio_input_dim == 0 {
            return bad("dimensions and samples_n must be positive".into());
        }
        if self.boundary_hidden_dims.iter().any(|&h| h == 0) {
            return bad("boundary_hidden_dims entries must be positive".into());
        }
        if self.attention_heads == 0 || self.feature_dim_cf % self.attention_heads != 0 {
            return bad(format!(
                "attention_heads = {} must divide feature_dim_cf = {}",
                self.attention_heads, self.feature_dim_cf
            ));
        }
        let positive = [
            ("max_duration_d", self.max_duration_d),
            ("learning_rate", self.learning_rate),
            ("frame_loss_weight", self.frame_loss_weight),
            ("boundary_loss_weight", self.boundary_loss_weight),
            ("contrastive_loss_weight", self.contrastive_loss_weight),
            ("contrastive_margin", self.contrastive_margin),
            ("weight_decay", self.weight_decay),
            ("nms_alpha", self.nms_alpha),
            ("nms_t1", self.nms_t1),
            ("nms_t2", self.nms_t2),
            ("erf_fake_threshold", self.erf_fake_threshold),
            ("erf_real_append_conf", self.erf_real_append_conf),
            ("erf_fake_append_conf", self.erf_fake_append_conf),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be strictly positive"));
            }
        }
        if !(self.nms_t1 < self.nms_t2 && self.nms_t2 < 1.0) {
            return bad(format!("need nms_t1 < nms_t2 < 1, got {} and {}", self.nms_t1, self.nms_t2));
        }
        if self.contrastive_margin > 1.0 {
            return bad(format!("contrastive_margin = {} must lie in (0, 1]", self.contrastive_margin));
        }
        for (name, v) in [
            ("erf_fake_threshold", self.erf_fake_threshold),
            ("erf_real_append_conf", self.erf_real_append_conf),
            ("erf_fake_append_conf", self.erf_fake_append_conf),
        ] {
            if v > 1.0 {
                return bad(format!("{name} = {v} must not exceed 1"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }

    /// Applies `key = value` overrides. Keys that are not configuration
    /// fields are returned untouched so callers can claim them.
    pub fn apply_entries(&mut self, entries: &ConfigFile) -> Result<Vec<(String, String)>> {
        let mut rest = Vec::new();
        for (key, value) in &entries.entries {
            if !self.set(key, value)? {
                rest.push((key.clone(), value.clone()));
            }
        }
        Ok(rest)
    }

    /// Sets one field by name. Returns `Ok(false)` when `key` is not a field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "frames_t" => self.frames_t = num(key, value)?,
            "max_duration_d" => self.max_duration_d = num(key, value)?,
            "feature_dim_cf" => self.feature_dim_cf = num(key, value)?,
            "boundary_hidden_dims" => {
                let dims: Vec<usize> = value
                    .trim()
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|p| num(key, p))
                    .collect::<Result<_>>()?;
                let [a, b] = dims[..] else {
                    return Err(Error::Config(format!("{key}: expected two hidden widths, got {value:?}")));
                };
                self.boundary_hidden_dims = [a, b];
            }
            "samples_n" => self.samples_n = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "frame_loss_weight" => self.frame_loss_weight = num(key, value)?,
            "boundary_loss_weight" => self.boundary_loss_weight = num(key, value)?,
            "contrastive_loss_weight" => self.contrastive_loss_weight = num(key, value)?,
            "contrastive_margin" => self.contrastive_margin = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "nms_alpha" => self.nms_alpha = num(key, value)?,
            "nms_t1" => self.nms_t1 = num(key, value)?,
            "nms_t2" => self.nms_t2 = num(key, value)?,
            "erf_fake_threshold" => self.erf_fake_threshold = num(key, value)?,
            "erf_real_append_conf" => self.erf_real_append_conf = num(key, value)?,
            "erf_fake_append_conf" => self.erf_fake_append_conf = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "attention_heads" => self.attention_heads = num(key, value)?,
            "visual_input_dim" => self.visual_input_dim = num(key, value)?,
            "audio_input_dim" => self.audio_input_dim = num(key, value)?,
            "decode_top_k" => self.decode_top_k = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "optimizer" => {
                self.optimizer = match value.trim() {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    other => return Err(Error::Config(format!("optimizer: unknown kind {other:?}"))),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Loads a config file on top of the defaults. Unknown keys are an error.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = ConfigFile::read(path)?;
        let mut cfg = PipelineConfig::default();
        let rest = cfg.apply_entries(&file)?;
        if let Some((key, _)) = rest.first() {
            return Err(Error::Config(format!("{}: unknown key {key:?}", path.display())));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the configuration in the file format accepted by [`ConfigFile`].
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let opt = match self.optimizer {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        };
        let [h1, h2] = self.boundary_hidden_dims;
        let fields: [(&str, String); 25] = [
            ("frames_t", self.frames_t.to_string()),
            ("max_duration_d", self.max_duration_d.to_string()),
            ("feature_dim_cf", self.feature_dim_cf.to_string()),
            ("boundary_hidden_dims", format!("[{h1}, {h2}]")),
            ("samples_n", self.samples_n.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("frame_loss_weight", self.frame_loss_weight.to_string()),
            ("boundary_loss_weight", self.boundary_loss_weight.to_string()),
            ("contrastive_loss_weight", self.contrastive_loss_weight.to_string()),
            ("contrastive_margin", self.contrastive_margin.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("nms_alpha", self.nms_alpha.to_string()),
            ("nms_t1", self.nms_t1.to_string()),
            ("nms_t2", self.nms_t2.to_string()),
            ("erf_fake_threshold", self.erf_fake_threshold.to_string()),
            ("erf_real_append_conf", self.erf_real_append_conf.to_string()),
            ("erf_fake_append_conf", self.erf_fake_append_conf.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
            ("attention_heads", self.attention_heads.to_string()),
            ("visual_input_dim", self.visual_input_dim.to_string()),
            ("audio_input_dim", self.audio_input_dim.to_string()),
            ("decode_top_k", self.decode_top_k.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("optimizer", opt.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Parsed `key = value` lines. `#` starts a comment; blank lines are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if let Some(prev) = seen.insert(key.clone(), lineno + 1) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?} (first on line {prev})",
                    lineno + 1
                )));
            }
            entries.push((key, v.trim().to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.frames_t, 512);
        assert_eq!(c.max_duration_d, 40.0);
        assert_eq!(c.feature_dim_cf, 256);
        assert_eq!(c.boundary_hidden_dims, [512, 128]);
        assert_eq!(c.samples_n, 10);
        assert_eq!(c.learning_rate, 1e-5);
        assert_eq!((c.frame_loss_weight, c.boundary_loss_weight, c.contrastive_loss_weight), (2.0, 1.0, 0.1));
        assert_eq!(c.contrastive_margin, 0.99);
        assert_eq!(c.weight_decay, 1e-4);
        assert_eq!((c.nms_alpha, c.nms_t1, c.nms_t2), (0.7234, 0.1968, 0.4123));
        assert_eq!((c.erf_fake_threshold, c.erf_real_append_conf, c.erf_fake_append_conf), (0.5, 0.95, 0.55));
        PipelineConfig::toy().validate().unwrap();
    }

    #[test]
    fn invariants_rejected() {
        let mut c = PipelineConfig::default();
        c.nms_t1 = 0.5;
        c.nms_t2 = 0.4;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.frames_t = 1;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.contrastive_margin = 1.5;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.frame_loss_weight = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_round_trip_and_unknown_key() {
        let mut c = PipelineConfig::toy();
        c.optimizer = OptimizerKind::Adam;
        c.rng_seed = 17;
        let text = c.to_config_text();
        let mut back = PipelineConfig::default();
        let rest = back.apply_entries(&ConfigFile::parse(&text).unwrap()).unwrap();
        assert!(rest.is_empty());
        assert_eq!(back, c);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "frames_t = 64\n# comment\nbogus = 1\n").unwrap();
        let err = PipelineConfig::from_file(&p).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn parse_errors() {
        assert!(ConfigFile::parse("frames_t 64").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let mut c = PipelineConfig::default();
        assert!(c.set("boundary_hidden_dims", "[1, 2, 3]").is_err());
        assert!(c.set("frames_t", "sixty").is_err());
        assert!(c.set("boundary_hidden_dims", "64, 16").unwrap());
        assert_eq!(c.boundary_hidden_dims, [64, 16]);
    }
}
