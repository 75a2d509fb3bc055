//! The end-to-end run: forward, relevance, SR map, edges, overlay.
//!
//! All maps are produced at the network's input resolution; the source
//! image is resized (and channel-adapted) to that canvas first. Output
//! files share the input image's stem: `<stem>.relevance.raw/.png`,
//! `<stem>.sr.raw/.png`, `<stem>.edges.png`, `<stem>.overlay.png`, and
//! `<stem>.meta.txt`.

use crate::config::{describe, PipelineConfig};
use srmap::casal::{context_aware_saliency, saliency_of_map, SaliencyMap};
use srmap::edges::{canny, fuse};
use srmap::error::{Result, SrError};
use srmap::io;
use srmap::lrp::{conservation_check, propagate_with, PixelRelevanceMap, RelevanceState};
use srmap::netrt::{load_network, Network};
use srmap::tensor::{normalize_minmax, resize_bilinear, Image, Tensor};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct RunOutput {
    pub predicted_class: usize,
    pub predicted_label: String,
    pub probability: f64,
    pub relevance: PixelRelevanceMap,
    pub state: RelevanceState,
    pub sr: Option<SaliencyMap>,
    pub written: Vec<PathBuf>,
}

pub fn load_configured_network(cfg: &PipelineConfig) -> Result<Network> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| SrError::invalid("missing network manifest path".to_string()))?;
    let weights = cfg
        .weights
        .as_ref()
        .ok_or_else(|| SrError::invalid("missing network weights path".to_string()))?;
    load_network(manifest, weights)
}

/// Resize and channel-adapt an image to the network input shape.
pub fn image_to_input(img: &Image, shape: &[usize]) -> Result<(Tensor, Image)> {
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let resized = resize_bilinear(img, h, w)?;
    let adapted = match c {
        1 => Image::new(h, w, 1, resized.to_gray().into_data())?,
        3 => resized.to_rgb(),
        other => {
            return Err(SrError::invalid(format!(
                "network expects {other} channels; images supply 1 or 3"
            )))
        }
    };
    let tensor = adapted.tensor().reshape(vec![h, w, c])?;
    Ok((tensor, adapted))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output")
        .to_string()
}

/// Tag component errors with the pipeline stage that raised them.
fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        SrError::InvalidArgument(m) => SrError::InvalidArgument(format!("[{name}] {m}")),
        SrError::Numeric(m) => SrError::Numeric(format!("[{name}] {m}")),
        SrError::Unsupported(m) => SrError::Unsupported(format!("[{name}] {m}")),
        other => other,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| SrError::io(dir.display().to_string(), e.to_string()))
}

fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.12e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_meta(
    cfg: &PipelineConfig,
    path: &Path,
    image_path: &Path,
    net: &Network,
    out: &RunOutput,
) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "image = {}", image_path.display());
    let _ = writeln!(text, "network_input = {:?}", net.input_shape);
    let _ = writeln!(text, "predicted_class = {}", out.predicted_class);
    let _ = writeln!(text, "predicted_label = {}", out.predicted_label);
    let _ = writeln!(text, "probability = {:.12e}", out.probability);
    let _ = writeln!(text, "source_score = {:.12e}", out.state.source_score);
    let _ = writeln!(
        text,
        "relevance_range = {:.12e} {:.12e}",
        out.relevance.values.min(),
        out.relevance.values.max()
    );
    let _ = writeln!(text, "layer_sums = {}", fmt_floats(&out.state.layer_sums()));
    let _ = writeln!(
        text,
        "conservation_residuals = {}",
        fmt_floats(&conservation_check(&out.state))
    );
    if let Some(sr) = &out.sr {
        let attended = sr.attended_mask.iter().filter(|&&a| a).count();
        let _ = writeln!(text, "attended_pixels = {attended}");
        let _ = writeln!(text, "used_k = {}", sr.used_k);
    }
    for (k, v) in describe(cfg) {
        let _ = writeln!(text, "{k} = {v}");
    }
    std::fs::write(path, text).map_err(|e| SrError::io(path.display().to_string(), e.to_string()))
}

fn save_map(map: &Tensor, dir: &Path, stem: &str, kind: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let raw = dir.join(format!("{stem}.{kind}.raw"));
    io::save_raw_map(map, &raw)?;
    written.push(raw);
    let png = dir.join(format!("{stem}.{kind}.png"));
    let norm = normalize_minmax(map);
    io::save_png(
        &Image::new(map.shape()[0], map.shape()[1], 1, norm.into_data())?,
        &png,
    )?;
    written.push(png);
    Ok(())
}

/// Step 1 only: relevance map plus metadata.
pub fn cmd_lrp(cfg: &PipelineConfig, image_path: &Path) -> Result<RunOutput> {
    run_impl(cfg, image_path, false)
}

/// The full pipeline: relevance, SR map, edge map, fused overlay.
pub fn cmd_run(cfg: &PipelineConfig, image_path: &Path) -> Result<RunOutput> {
    run_impl(cfg, image_path, true)
}

fn run_impl(cfg: &PipelineConfig, image_path: &Path, full: bool) -> Result<RunOutput> {
    stage("config", cfg.validate())?;
    let net = stage("netrt", load_configured_network(cfg))?;
    let img = io::load_image(image_path)?;
    let (input, canvas) = stage("netrt", image_to_input(&img, &net.input_shape))?;

    let trace = stage("netrt", net.forward(&input))?;
    let class = trace.output.argmax();
    let probability = trace.output.data()[class];
    let (relevance, state) = stage("lrp", propagate_with(&net, &trace, class, &cfg.lrp_options()))?;

    ensure_dir(&cfg.output_dir)?;
    let stem = stem_of(image_path);
    let mut written = Vec::new();
    save_map(&relevance.values, &cfg.output_dir, &stem, "relevance", &mut written)?;

    let sr = if full {
        let sr = stage("casal", saliency_of_map(&relevance.values, &cfg.saliency))?;
        save_map(&sr.values, &cfg.output_dir, &stem, "sr", &mut written)?;

        let edge_map = stage(
            "edges",
            canny(&canvas, cfg.canny_sigma, cfg.canny_low, cfg.canny_high),
        )?;
        let edges_png = cfg.output_dir.join(format!("{stem}.edges.png"));
        io::save_bilevel_png(&edge_map.edges, edge_map.height, edge_map.width, &edges_png)?;
        written.push(edges_png);

        let overlay = stage("edges", fuse(&sr, &edge_map))?;
        let overlay_png = cfg.output_dir.join(format!("{stem}.overlay.png"));
        io::save_png(&overlay, &overlay_png)?;
        written.push(overlay_png);
        Some(sr)
    } else {
        None
    };

    let mut out = RunOutput {
        predicted_class: class,
        predicted_label: net.label(class),
        probability,
        relevance,
        state,
        sr,
        written,
    };
    let meta = cfg.output_dir.join(format!("{stem}.meta.txt"));
    write_meta(cfg, &meta, image_path, &net, &out)?;
    out.written.push(meta);
    Ok(out)
}

/// Standalone saliency detection on an image (no network involved).
pub fn cmd_saliency(cfg: &PipelineConfig, image_path: &Path) -> Result<(SaliencyMap, Vec<PathBuf>)> {
    cfg.validate()?;
    let img = io::load_image(image_path)?;
    let map = context_aware_saliency(&img, &cfg.saliency)?;
    ensure_dir(&cfg.output_dir)?;
    let stem = stem_of(image_path);
    let mut written = Vec::new();
    save_map(&map.values, &cfg.output_dir, &stem, "saliency", &mut written)?;
    Ok((map, written))
}
