//! Trains one reconstructor on synthesized MNIST echoes and saves the
//! best-validation checkpoint to `out/examples/checkpoints`, where the
//! evaluation examples look for it.
//!
//! cargo run --release --example train_model -- [lfista-resnet|fista-resnet|dnn] [--full]

use std::path::PathBuf;

use radar_lfista::config::ExperimentConfig;
use radar_lfista::dataset::build_splits;
use radar_lfista::model::{Model, ModelKind};
use radar_lfista::train::{fit, save_checkpoint};

fn main() -> radar_lfista::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ModelKind = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map_or(Ok(ModelKind::LFistaResNet), |s| s.parse())?;
    let cfg = if args.iter().any(|a| a == "--full") {
        ExperimentConfig::default()
    } else {
        ExperimentConfig::fast()
    };

    let a = cfg.sensing_matrix()?;
    let splits = build_splits(&cfg, &a)?;
    let model = Model::new(kind, &a, cfg.side_cells, cfg.seed)?;
    let out = PathBuf::from(&cfg.out_dir).join("examples/checkpoints");
    std::fs::create_dir_all(&out).map_err(|e| radar_lfista::Error::io(&out, e))?;

    let result = fit(model, &a, &splits.train, &splits.val, &cfg, Some(&out.join(format!("{kind}.log.csv"))))?;
    let first = result.history.first().unwrap();
    let best = &result.best;
    println!(
        "{kind}: val mse {:.5} -> {:.5} (best epoch {}), val ssim {:.4} -> {:.4}",
        first.val_mse,
        result.history[best.epoch].val_mse,
        best.epoch,
        first.val_ssim,
        result.history[best.epoch].val_ssim
    );
    save_checkpoint(out.join(format!("{kind}.ckpt")), best)?;
    Ok(())
}
