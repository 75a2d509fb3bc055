//! Corpus evaluation: per-image SSIM records plus the aggregate ratio.

use crate::config::PipelineConfig;
use crate::pipeline::{image_to_input, load_configured_network};
use rayon::prelude::*;
use srmap::casal::{context_aware_saliency, saliency_of_map};
use srmap::error::{Result, SrError};
use srmap::io;
use srmap::lrp::propagate_with;
use srmap::metrics::{aggregate, evaluate_image, EvalRecord, EvalSummary};
use srmap::netrt::Network;
use std::path::{Path, PathBuf};

enum Row {
    Ok(EvalRecord),
    Error { id: String, message: String },
}

fn eval_one(cfg: &PipelineConfig, net: &Network, path: &Path) -> Result<EvalRecord> {
    let id = path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string();
    let img = io::load_image(path)?;
    let (input, canvas) = image_to_input(&img, &net.input_shape)?;

    // Gold standard: saliency of the (network-sized) original image.
    let reference = context_aware_saliency(&canvas, &cfg.saliency)?;

    let trace = net.forward(&input)?;
    let class = trace.output.argmax();
    let (relevance, _) = propagate_with(net, &trace, class, &cfg.lrp_options())?;
    let sr = saliency_of_map(&relevance.values, &cfg.saliency)?;

    evaluate_image(&id, &relevance.values, &sr.values, &reference.values, &cfg.ssim)
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| SrError::io(dir.display().to_string(), e.to_string()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png") | Some("pgm") | Some("ppm") | Some("pnm")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn format_ratio(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.6}"),
        None => "undefined".to_string(),
    }
}

/// Evaluate every readable image in the corpus directory, in filename
/// order, and write `eval.csv` with one record per image plus a final
/// `mean` row. Unreadable images become `error` rows and a warning.
pub fn cmd_eval(cfg: &PipelineConfig, corpus: &Path) -> Result<(PathBuf, EvalSummary)> {
    cfg.validate()?;
    let net = load_configured_network(cfg)?;
    let files = corpus_files(corpus)?;

    let rows: Vec<Row> = files
        .par_iter()
        .map(|path| {
            let id = path
                .file_name()
                .and_then(|s| s.to_str())
                .unwrap_or("image")
                .to_string();
            match eval_one(cfg, &net, path) {
                Ok(record) => Row::Ok(record),
                Err(e) => Row::Error {
                    id,
                    message: e.to_string(),
                },
            }
        })
        .collect();

    let mut csv = String::from("id,ssim1,ssim2,ratio\n");
    let mut records = Vec::new();
    for row in rows {
        match row {
            Row::Ok(r) => {
                csv.push_str(&format!(
                    "{},{:.6},{:.6},{}\n",
                    r.id,
                    r.ssim_lrp,
                    r.ssim_sr,
                    format_ratio(r.ratio)
                ));
                records.push(r);
            }
            Row::Error { id, message } => {
                eprintln!("warning: skipping {id}: {message}");
                csv.push_str(&format!("{id},error,,\n"));
            }
        }
    }
    let summary = aggregate(&records);
    csv.push_str(&format!(
        "mean,,,{}\n",
        format_ratio(summary.mean_ratio)
    ));

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| SrError::io(cfg.output_dir.display().to_string(), e.to_string()))?;
    let csv_path = cfg.output_dir.join("eval.csv");
    std::fs::write(&csv_path, csv)
        .map_err(|e| SrError::io(csv_path.display().to_string(), e.to_string()))?;
    Ok((csv_path, summary))
}
