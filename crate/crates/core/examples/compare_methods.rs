//! Trains the three networks on the fast profile (unless checkpoints are
//! already in `out/examples/checkpoints`) and compares them with FISTA on
//! the test split: metrics, timing and reconstruction grids.
//!
//! cargo run --release --example compare_methods

use std::path::PathBuf;

use radar_lfista::commands::{self, Context, Overrides};
use radar_lfista::eval::harness::checkpoint_path;
use radar_lfista::model::ModelKind;

fn main() -> radar_lfista::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let ctx = Context::new(&Overrides {
        fast: true,
        out_dir: Some(PathBuf::from("out/examples")),
        ..Overrides::default()
    })?;
    let missing: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|&k| !checkpoint_path(ctx.dir("checkpoints"), k).is_file())
        .collect();
    commands::train(&ctx, &missing)?;

    for r in commands::eval(&ctx, 10)? {
        println!(
            "{:<16} mse {:.5}  ssim {:.4}  {:.2e} s/sample",
            r.method,
            r.mean_mse,
            r.mean_ssim,
            r.runtime_per_sample.unwrap_or(f64::NAN)
        );
    }
    println!("artifacts in {}", ctx.dir("eval").display());
    Ok(())
}
