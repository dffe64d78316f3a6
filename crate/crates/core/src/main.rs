use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radar_lfista::commands::{self, Context, Overrides};
use radar_lfista::eval::MetricsReport;
use radar_lfista::model::ModelKind;
use radar_lfista::Result;

#[derive(Parser)]
#[command(name = "radar-lfista", version, about = "Radar echo synthesis, FISTA and L-FISTA-ResNet imaging")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// 200/50/100 split, 20 epochs.
    #[arg(long, global = true)]
    fast: bool,
    /// Directory holding the four MNIST IDX files.
    #[arg(long, global = true)]
    mnist_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set epochs=5`.
    #[arg(long, global = true, value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize train/val/test echoes into <out-dir>/data.
    Synth {
        /// Noise the stored test echoes at this SNR.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        f0_ghz: Option<f64>,
    },
    /// FISTA reconstruction of an echo container (default: test split).
    Fista {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write the energy trace of the first echo.
        #[arg(long)]
        record_objective: bool,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train one model kind or all three.
    Train {
        #[arg(long, default_value = "all")]
        model: String,
    },
    /// Reconstruct with a trained checkpoint.
    Infer {
        #[arg(long, default_value = "lfista-resnet")]
        model: ModelKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Four-method comparison on the test split.
    Eval {
        #[arg(long, default_value_t = 20)]
        timing_samples: usize,
    },
    /// Metrics against SNR.
    SweepSnr {
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, value_delimiter = ',')]
        snr_db: Option<Vec<f64>>,
    },
    /// Metrics against start frequency with the array held fixed.
    SweepFreq {
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, value_delimiter = ',')]
        f0_ghz: Option<Vec<f64>>,
    },
    /// Unseen targets: built-in shapes and letters plus PGM rasters.
    Shapes {
        #[arg(long)]
        raster: Vec<PathBuf>,
        #[arg(long)]
        no_builtin: bool,
    },
}

fn print_reports(reports: &[MetricsReport]) {
    for r in reports {
        match r.runtime_per_sample {
            Some(t) => println!("{:<16} mse {:.5}  ssim {:.4}  {:.3e} s/sample", r.method, r.mean_mse, r.mean_ssim, t),
            None => println!("{:<16} mse {:.5}  ssim {:.4}", r.method, r.mean_mse, r.mean_ssim),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let s = cli.shared;
    let mut o = Overrides {
        config: s.config,
        fast: s.fast,
        seed: s.seed,
        out_dir: s.out_dir,
        mnist_dir: s.mnist_dir,
        set: s.set,
    };
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.set.push((k.to_string(), v));
        }
    };
    match &cli.command {
        Command::Synth { f0_ghz, .. } => push("f0_ghz", f0_ghz.map(|v| v.to_string())),
        Command::Fista { lambda, max_iter, .. } => {
            push("fista_lambda", lambda.map(|v| v.to_string()));
            push("fista_max_iter", max_iter.map(|v| v.to_string()));
        }
        _ => {}
    }
    let ctx = Context::new(&o)?;
    match cli.command {
        Command::Synth { snr_db, .. } => {
            let sp = commands::synth(&ctx, snr_db)?;
            println!(
                "wrote {} train, {} val, {} test samples to {}",
                sp.train.len(),
                sp.val.len(),
                sp.test.len(),
                ctx.dir("data").display()
            );
        }
        Command::Fista {
            record_objective,
            input,
            count,
            ..
        } => {
            let r = commands::fista(&ctx, input.as_deref(), count, record_objective)?;
            print_reports(r.as_slice());
        }
        Command::Train { model } => {
            let kinds = match model.as_str() {
                "all" => ModelKind::ALL.to_vec(),
                k => vec![k.parse()?],
            };
            for t in commands::train(&ctx, &kinds)? {
                println!(
                    "{:<14} val mse {:.5} -> {:.5}  ssim {:.4} -> {:.4}  best epoch {}  {}",
                    t.kind,
                    t.initial.val_mse,
                    t.last.val_mse,
                    t.initial.val_ssim,
                    t.last.val_ssim,
                    t.best_epoch,
                    t.checkpoint.display()
                );
            }
        }
        Command::Infer {
            model,
            checkpoint,
            input,
            count,
        } => {
            let r = commands::infer(&ctx, model, checkpoint.as_deref(), input.as_deref(), count)?;
            print_reports(r.as_slice());
        }
        Command::Eval { timing_samples } => print_reports(&commands::eval(&ctx, timing_samples)?),
        Command::SweepSnr { samples, snr_db } => {
            for p in commands::sweep_snr_cmd(&ctx, samples, snr_db.as_deref())? {
                println!("snr {:?} dB", p.value);
                print_reports(&p.reports);
            }
        }
        Command::SweepFreq { samples, f0_ghz } => {
            for p in commands::sweep_freq_cmd(&ctx, samples, f0_ghz.as_deref())? {
                println!("f0 {:?} GHz", p.value);
                print_reports(&p.reports);
            }
        }
        Command::Shapes { raster, no_builtin } => print_reports(&commands::shapes(&ctx, &raster, !no_builtin)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
