//! `srmap` command line: run the two-step pipeline, evaluate a corpus,
//! train the fixture network, or run the individual steps.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O failure,
//! 4 numeric failure.

mod config;
mod evalcmd;
mod fixture;
mod pipeline;

use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use fixture::{ShapeClass, TrainSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srmap::error::SrError;
use srmap::netrt::save_network;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Print a status line, tolerating a closed stdout (e.g. `| head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "srmap", version, about = "Salient relevance maps for small CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: relevance map, SR map, edge map, fused overlay.
    Run(RunArgs),
    /// Stop after step 1: the LRP relevance map only.
    Lrp(RunArgs),
    /// Context-aware saliency of an image, no network involved.
    Saliency(SaliencyArgs),
    /// Evaluate a corpus directory: per-image SSIM ratios plus the mean.
    Eval(EvalArgs),
    /// Train the synthetic-shape fixture network.
    TrainFixture(TrainArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Start relevance from the pre-softmax logit instead of the probability.
    #[arg(long)]
    logit_start: bool,
    #[arg(long)]
    patch_radius: Option<usize>,
    #[arg(long)]
    position_weight: Option<f64>,
    #[arg(long)]
    k_nearest: Option<usize>,
    /// Comma-separated scale list, e.g. `1,0.5,0.25`.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long)]
    attention_threshold: Option<f64>,
    #[arg(long)]
    working_width: Option<usize>,
    #[arg(long)]
    canny_sigma: Option<f64>,
    #[arg(long)]
    canny_low: Option<f64>,
    #[arg(long)]
    canny_high: Option<f64>,
    #[arg(long)]
    ssim_window: Option<usize>,
    #[arg(long)]
    ssim_sigma: Option<f64>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<PipelineConfig, SrError> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = &self.manifest {
            cfg.manifest = Some(v.clone());
        }
        if let Some(v) = &self.weights {
            cfg.weights = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if self.logit_start {
            cfg.logit_start = true;
        }
        if let Some(v) = self.patch_radius {
            cfg.saliency.patch_radius = v;
        }
        if let Some(v) = self.position_weight {
            cfg.saliency.position_weight = v;
        }
        if let Some(v) = self.k_nearest {
            cfg.saliency.k_nearest = v;
        }
        if let Some(v) = &self.scales {
            cfg.apply("scales", v)?;
        }
        if let Some(v) = self.attention_threshold {
            cfg.saliency.attention_threshold = v;
        }
        if let Some(v) = self.working_width {
            cfg.saliency.working_width = v;
        }
        if let Some(v) = self.canny_sigma {
            cfg.canny_sigma = v;
        }
        if let Some(v) = self.canny_low {
            cfg.canny_low = v;
        }
        if let Some(v) = self.canny_high {
            cfg.canny_high = v;
        }
        if let Some(v) = self.ssim_window {
            cfg.ssim.window = v;
        }
        if let Some(v) = self.ssim_sigma {
            cfg.ssim.sigma = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input image (PNG, or ASCII PGM/PPM).
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SaliencyArgs {
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of corpus images.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory for fixture.manifest.txt and fixture.weights.bin.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    samples_per_class: usize,
    /// Comma-separated class list from {square, disc}.
    #[arg(long, default_value = "square,disc")]
    classes: String,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.95)]
    target_accuracy: f64,
    /// Also write this many held-out scenes per class to out-dir/scenes.
    #[arg(long, default_value_t = 0)]
    scenes: usize,
}

fn run(cli: Cli) -> Result<(), SrError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.common.build_config()?;
            let out = pipeline::cmd_run(&cfg, &args.image)?;
            say!(
                "predicted {} ({}) with probability {:.4}",
                out.predicted_class, out.predicted_label, out.probability
            );
            for p in &out.written {
                say!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Lrp(args) => {
            let cfg = args.common.build_config()?;
            let out = pipeline::cmd_lrp(&cfg, &args.image)?;
            say!(
                "predicted {} ({}) with probability {:.4}",
                out.predicted_class, out.predicted_label, out.probability
            );
            for p in &out.written {
                say!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Saliency(args) => {
            let cfg = args.common.build_config()?;
            let (map, written) = pipeline::cmd_saliency(&cfg, &args.image)?;
            let attended = map.attended_mask.iter().filter(|&&a| a).count();
            say!("attended pixels: {attended} (used_k = {})", map.used_k);
            for p in &written {
                say!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Eval(args) => {
            let cfg = args.common.build_config()?;
            let (csv, summary) = evalcmd::cmd_eval(&cfg, &args.corpus)?;
            match summary.mean_ratio {
                Some(mean) => say!(
                    "{} images ({} defined, {} undefined), mean SSIM ratio {:.4}",
                    summary.count, summary.defined, summary.undefined, mean
                ),
                None => say!("{} images, no defined ratios", summary.count),
            }
            say!("wrote {}", csv.display());
            Ok(())
        }
        Command::TrainFixture(args) => {
            let classes = args
                .classes
                .split(',')
                .map(|t| ShapeClass::parse(t.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = TrainSpec {
                seed: args.seed,
                samples_per_class: args.samples_per_class,
                classes: classes.clone(),
                epochs: args.epochs,
                learning_rate: args.learning_rate,
                target_accuracy: args.target_accuracy,
            };
            let outcome = fixture::train_fixture(&spec)?;
            std::fs::create_dir_all(&args.out_dir)
                .map_err(|e| SrError::io(args.out_dir.display().to_string(), e.to_string()))?;
            let manifest = args.out_dir.join("fixture.manifest.txt");
            let weights = args.out_dir.join("fixture.weights.bin");
            save_network(&outcome.network, &manifest, &weights)?;
            say!(
                "trained to accuracy {:.4} in {} epochs",
                outcome.accuracy, outcome.epochs_run
            );
            say!("wrote {}", manifest.display());
            say!("wrote {}", weights.display());

            if args.scenes > 0 {
                let scenes_dir = args.out_dir.join("scenes");
                std::fs::create_dir_all(&scenes_dir)
                    .map_err(|e| SrError::io(scenes_dir.display().to_string(), e.to_string()))?;
                // Held out: a different stream than the training data.
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x9E37_79B9);
                for (label, class) in classes.iter().enumerate() {
                    for i in 0..args.scenes {
                        let scene = fixture::generate_scene(&mut rng, *class);
                        let img = fixture::scene_to_image(&scene);
                        let path = scenes_dir.join(format!("scene_{}_{:03}.png", label, i));
                        srmap::io::save_png(&img, &path)?;
                    }
                }
                say!(
                    "wrote {} scenes to {}",
                    args.scenes * classes.len(),
                    scenes_dir.display()
                );
            }
            Ok(())
        }
    }
}

fn exit_code(err: &SrError) -> u8 {
    match err {
        SrError::InvalidArgument(_) | SrError::Schema { .. } | SrError::Unsupported(_) => 2,
        SrError::Io { .. } => 3,
        SrError::Numeric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
