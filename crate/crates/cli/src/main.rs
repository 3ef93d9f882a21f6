use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acc_core::config::{PipelineConfig, Threads};
use acc_core::evaluation::write_metrics_csv;
use acc_core::pipeline::{evaluate_saved_masks, run_batch};
use acc_core::synth::{generate, write_dishes, SynthSpec};
use acc_core::AccError;
use clap::{Parser, Subcommand};
use log::{error, info};

/// Automated colony counting for dish images.
#[derive(Parser, Debug)]
#[command(name = "acc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count colonies in a batch of images.
    Run {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Image directory or glob pattern (overrides the file).
        #[arg(long)]
        input: Option<String>,
        /// Output directory (overrides the file).
        #[arg(long)]
        output: Option<PathBuf>,
        /// CSV of ground-truth marks with header image,x,y.
        #[arg(long, conflicts_with = "gt_masks")]
        gt_marks: Option<PathBuf>,
        /// Directory of ground-truth masks named after the images.
        #[arg(long)]
        gt_masks: Option<PathBuf>,
        /// Worker count or "auto".
        #[arg(long)]
        threads: Option<Threads>,
    },
    /// Score saved `<image>_mask.png` files against ground truth.
    Eval {
        /// Directory holding the saved masks.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long, conflicts_with = "gt_masks", required_unless_present = "gt_masks")]
        gt_marks: Option<PathBuf>,
        #[arg(long)]
        gt_masks: Option<PathBuf>,
        /// Metrics CSV to write.
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Generate synthetic dishes with ground truth.
    Synth {
        /// TOML generator spec; defaults are used for missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of dishes; dish i uses seed `seed + i`.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

/// Failures that should exit with the usage code rather than 1.
fn is_usage_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<AccError>(),
            Some(AccError::Config(_) | AccError::Parameter(_))
        )
    })
}

/// The error chain without causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for c in e.chain() {
        let s = c.to_string();
        if !msg.ends_with(&s) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&s);
        }
    }
    msg
}

fn run(
    config: &Path,
    input: Option<String>,
    output: Option<PathBuf>,
    gt_marks: Option<PathBuf>,
    gt_masks: Option<PathBuf>,
    threads: Option<Threads>,
) -> anyhow::Result<u8> {
    let mut cfg = PipelineConfig::load(config).map_err(|e| match e {
        AccError::Io { .. } => AccError::Config(format!("cannot read {}: {e}", config.display())),
        other => other,
    })?;
    if input.is_some() {
        cfg.input = input;
    }
    if output.is_some() {
        cfg.output = output;
    }
    if gt_marks.is_some() {
        cfg.evaluation.gt_marks = gt_marks;
        cfg.evaluation.gt_masks = None;
    }
    if gt_masks.is_some() {
        cfg.evaluation.gt_masks = gt_masks;
        cfg.evaluation.gt_marks = None;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(p) = &cfg.evaluation.gt_marks {
        if !p.is_file() {
            return Err(AccError::Config(format!("ground-truth marks {} not found", p.display())).into());
        }
    }
    if let Some(p) = &cfg.evaluation.gt_masks {
        if !p.is_dir() {
            return Err(AccError::Config(format!("ground-truth mask directory {} not found", p.display())).into());
        }
    }

    let report = run_batch(&cfg)?;
    let ok = report.outcomes.len() - report.failures();
    info!("{ok}/{} images processed, outputs in {}", report.outcomes.len(), report.out_dir.display());
    for o in &report.outcomes {
        match &o.result {
            Ok(r) => println!("{}\t{}", o.image, r.colony_count()),
            Err(e) => error!("{}: {e}", o.path.display()),
        }
    }
    if !report.metrics.is_empty() {
        let n = report.metrics.len() as f64;
        let mean_f1 = report.metrics.iter().map(|m| m.scores.f1).sum::<f64>() / n;
        println!("mean F1 {mean_f1:.4}");
    }
    Ok(report.exit_code() as u8)
}

fn eval(masks: &Path, gt_marks: Option<&Path>, gt_masks: Option<&Path>, out: &Path) -> anyhow::Result<u8> {
    let metrics = evaluate_saved_masks(masks, gt_marks, gt_masks)?;
    write_metrics_csv(out, &metrics)?;
    for m in &metrics {
        println!(
            "{}\tpre {:.3}\trec {:.3}\tF1 {:.3}\tcount {}/{}",
            m.image, m.scores.precision, m.scores.recall, m.scores.f1, m.pred_count, m.gt_count
        );
    }
    Ok(0)
}

fn synth(spec: Option<&Path>, out: &Path, count: u64) -> anyhow::Result<u8> {
    let base = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AccError::Config(format!("cannot read {}: {e}", p.display())))?;
            SynthSpec::from_toml(&text)?
        }
        None => SynthSpec::default(),
    };
    let mut dishes = Vec::with_capacity(count as usize);
    for i in 0..count {
        let s = SynthSpec {
            seed: base.seed + i,
            ..base.clone()
        };
        dishes.push((format!("dish_{i:03}"), generate(&s)?));
    }
    write_dishes(&dishes, out)?;
    info!("wrote {count} dishes to {}", out.display());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            input,
            output,
            gt_marks,
            gt_masks,
            threads,
        } => run(&config, input, output, gt_marks, gt_masks, threads),
        Command::Eval {
            masks,
            gt_marks,
            gt_masks,
            out,
        } => eval(&masks, gt_marks.as_deref(), gt_masks.as_deref(), &out),
        Command::Synth { spec, out, count } => synth(spec.as_deref(), &out, count),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{}", describe(&e));
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
