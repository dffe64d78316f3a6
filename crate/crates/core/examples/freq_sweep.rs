//! Center-frequency generalization: echoes synthesized with a shifted sweep
//! start, reconstructed by models trained at 30 GHz. Expects trained
//! checkpoints (see `compare_methods`).
//!
//! cargo run --release --example freq_sweep -- [samples]

use std::path::PathBuf;

use radar_lfista::commands::{self, Context, Overrides};

fn main() -> radar_lfista::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ctx = Context::new(&Overrides {
        fast: true,
        out_dir: Some(PathBuf::from("out/examples")),
        ..Overrides::default()
    })?;
    for p in commands::sweep_freq_cmd(&ctx, samples, Some(&[29.0, 30.0, 31.0]))? {
        let f0 = p.value.unwrap_or(ctx.cfg.f0_ghz);
        for r in &p.reports {
            println!("f0 {f0:>4} GHz  {:<16} mse {:.5}  ssim {:.4}", r.method, r.mean_mse, r.mean_ssim);
        }
    }
    Ok(())
}
