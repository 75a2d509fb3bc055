//! Pipeline configuration: built-in defaults, overridden by a
//! `key = value` config file (`#` comments), overridden by CLI flags.

use srmap::casal::SaliencyConfig;
use srmap::error::{Result, SrError};
use srmap::lrp::{LrpOptions, ScoreSource};
use srmap::metrics::SsimConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub epsilon: f64,
    pub logit_start: bool,
    pub saliency: SaliencyConfig,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub ssim: SsimConfig,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            weights: None,
            epsilon: 1e-9,
            logit_start: false,
            saliency: SaliencyConfig::default(),
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.2,
            ssim: SsimConfig::default(),
            output_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn lrp_options(&self) -> LrpOptions {
        LrpOptions {
            epsilon: self.epsilon,
            score: if self.logit_start {
                ScoreSource::PreSoftmaxLogit
            } else {
                ScoreSource::FinalOutput
            },
        }
    }

    /// Apply `key = value` pairs from a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SrError::io(path.display().to_string(), e.to_string()))?;
        let entries = parse_kv_file(&text, path)?;
        for (key, value) in entries {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| SrError::invalid(format!("config key `{key}`: {what} `{value}`"));
        let as_f64 = || value.parse::<f64>().map_err(|_| bad("bad number"));
        let as_usize = || value.parse::<usize>().map_err(|_| bad("bad integer"));
        let as_bool = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad("bad boolean")),
        };
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "weights" => self.weights = Some(PathBuf::from(value)),
            "epsilon" => self.epsilon = as_f64()?,
            "logit_start" => self.logit_start = as_bool()?,
            "patch_radius" => self.saliency.patch_radius = as_usize()?,
            "position_weight" => self.saliency.position_weight = as_f64()?,
            "k_nearest" => self.saliency.k_nearest = as_usize()?,
            "scales" => {
                self.saliency.scales = value
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad scale list")))
                    .collect::<Result<Vec<_>>>()?;
            }
            "attention_threshold" => self.saliency.attention_threshold = as_f64()?,
            "working_width" => self.saliency.working_width = as_usize()?,
            "canny_sigma" => self.canny_sigma = as_f64()?,
            "canny_low" => self.canny_low = as_f64()?,
            "canny_high" => self.canny_high = as_f64()?,
            "ssim_window" => self.ssim.window = as_usize()?,
            "ssim_sigma" => self.ssim.sigma = as_f64()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(SrError::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(SrError::invalid("epsilon must be non-negative".to_string()));
        }
        if !(self.canny_low > 0.0) || self.canny_high < self.canny_low {
            return Err(SrError::invalid(format!(
                "canny thresholds must satisfy high >= low > 0, got low={} high={}",
                self.canny_low, self.canny_high
            )));
        }
        if !(self.canny_sigma > 0.0) {
            return Err(SrError::invalid("canny sigma must be positive".to_string()));
        }
        self.saliency.validate()?;
        self.ssim.validate()?;
        Ok(())
    }
}

fn parse_kv_file(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SrError::invalid(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Ordered key/value view of a config, used for the metadata files.
pub fn describe(cfg: &PipelineConfig) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("epsilon", format!("{}", cfg.epsilon));
    m.insert("logit_start", format!("{}", cfg.logit_start));
    m.insert("patch_radius", format!("{}", cfg.saliency.patch_radius));
    m.insert("position_weight", format!("{}", cfg.saliency.position_weight));
    m.insert("k_nearest", format!("{}", cfg.saliency.k_nearest));
    m.insert(
        "scales",
        cfg.saliency
            .scales
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.insert(
        "attention_threshold",
        format!("{}", cfg.saliency.attention_threshold),
    );
    m.insert("working_width", format!("{}", cfg.saliency.working_width));
    m.insert("canny_sigma", format!("{}", cfg.canny_sigma));
    m.insert("canny_low", format!("{}", cfg.canny_low));
    m.insert("canny_high", format!("{}", cfg.canny_high));
    m
}
