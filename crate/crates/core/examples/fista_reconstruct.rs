//! Reconstructs a few test digits with FISTA and prints the energy trace
//! and image quality.
//!
//! cargo run --release --example fista_reconstruct -- [count] [lambda]

use radar_lfista::config::ExperimentConfig;
use radar_lfista::dataset::build_splits;
use radar_lfista::eval::metrics::score;
use radar_lfista::eval::render_image;
use radar_lfista::fista::{default_step, fista_solve, FistaConfig};

fn main() -> radar_lfista::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let lambda: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.001);

    let cfg = ExperimentConfig::fast();
    let a = cfg.sensing_matrix()?;
    let test = build_splits(&cfg, &a)?.test.head(count);
    let mu = default_step(&a)?;
    println!("step 1/lambda_max = {mu:.4e}");

    let fista = FistaConfig {
        lambda,
        mu: Some(mu),
        record_objective: true,
        ..FistaConfig::default()
    };
    let out = cfg.out_dir.join("examples");
    std::fs::create_dir_all(&out).map_err(|e| radar_lfista::Error::io(&out, e))?;
    for (i, (map, echo)) in test.maps.iter().zip(&test.echoes).enumerate() {
        let r = fista_solve(&a, echo, &fista)?;
        let trace = r.objective_trace.unwrap_or_default();
        let (mse, ssim) = score(map.values(), r.estimate.as_slice().unwrap(), cfg.side_cells)?;
        println!(
            "digit {i}: energy {:.3} -> {:.3} -> {:.3} (iterations 0, 100, {}), mse {mse:.5}, ssim {ssim:.4}",
            trace[0],
            trace[100.min(trace.len() - 1)],
            trace[trace.len() - 1],
            r.iterations_run
        );
        render_image(&r.estimate.to_vec(), cfg.side_cells, out.join(format!("fista_{i}.pgm")))?;
    }
    Ok(())
}
