//! Noise robustness: every method on the same test digits as the SNR drops.
//! Expects trained checkpoints (see `compare_methods` or `train_model`).
//!
//! cargo run --release --example snr_sweep -- [samples]

use std::path::PathBuf;

use radar_lfista::commands::{self, Context, Overrides};

fn main() -> radar_lfista::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ctx = Context::new(&Overrides {
        fast: true,
        out_dir: Some(PathBuf::from("out/examples")),
        ..Overrides::default()
    })?;
    let points = commands::sweep_snr_cmd(&ctx, samples, None)?;
    print!("{:>8}", "snr dB");
    for r in &points[0].reports {
        print!("{:>16}", r.method);
    }
    println!();
    for p in &points {
        print!("{:>8}", p.value.map_or("clean".into(), |v| v.to_string()));
        for r in &p.reports {
            print!("{:>16.4}", r.mean_ssim);
        }
        println!();
    }
    println!("mean SSIM; curves in {}", ctx.dir("sweep_snr").display());
    Ok(())
}
