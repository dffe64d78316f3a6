//! Reconstructs targets unlike the training digits: geometric shapes and
//! block letters. Expects trained checkpoints (see `compare_methods`).
//!
//! cargo run --release --example unseen_shapes

use std::path::PathBuf;

use radar_lfista::commands::{self, Context, Overrides};
use radar_lfista::eval::shapes::builtin_set;

fn main() -> radar_lfista::Result<()> {
    let ctx = Context::new(&Overrides {
        fast: true,
        out_dir: Some(PathBuf::from("out/examples")),
        ..Overrides::default()
    })?;
    let names: Vec<String> = builtin_set().into_iter().map(|(n, _)| n).collect();
    println!("targets: {}", names.join(", "));
    for r in commands::shapes(&ctx, &[], true)? {
        println!("{:<16} mse {:.5}  ssim {:.4}", r.method, r.mean_mse, r.mean_ssim);
        for (name, s) in names.iter().zip(&r.ssim) {
            println!("    {name:<12} ssim {s:.4}");
        }
    }
    println!("grids in {}", ctx.dir("shapes").display());
    Ok(())
}
