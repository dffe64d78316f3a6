//! Builds the sensing matrix, turns one MNIST digit into an RCS map and
//! synthesizes its clean and noisy echoes.
//!
//! cargo run --release --example synthesize_echo -- [digit-index] [snr-db]

use radar_lfista::config::ExperimentConfig;
use radar_lfista::eval::render_image;
use radar_lfista::forward::{add_awgn, synthesize_echo};
use radar_lfista::geometry::mnist_to_rcs;
use radar_lfista::mnist::load_mnist_dir;

fn main() -> radar_lfista::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let index: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let snr_db: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);

    let cfg = ExperimentConfig::default();
    let a = cfg.sensing_matrix()?;
    println!(
        "sensing matrix {}x{} ({} antennas x {} frequencies, {} cells)",
        a.rows(),
        a.cols(),
        a.n_antennas(),
        a.n_freqs(),
        a.cols()
    );

    let pool = load_mnist_dir(&cfg.mnist_dir)?;
    let map = mnist_to_rcs(&pool.images[index])?;
    let clean = synthesize_echo(&a, &map)?;
    let noisy = add_awgn(&clean, snr_db, cfg.seed)?;
    let noise: f64 = clean
        .samples
        .iter()
        .zip(&noisy.samples)
        .map(|(c, n)| (n - c).norm_sqr())
        .sum::<f64>()
        / clean.len() as f64;
    println!("digit {index}: label {}", pool.labels[index]);
    println!("clean echo mean power {:.3}", clean.mean_power());
    println!("noise power {:.3} (target SNR {snr_db} dB, measured {:.2} dB)", noise, 10.0 * (clean.mean_power() / noise).log10());
    for k in 0..a.n_antennas() {
        let s = clean.samples[k * a.n_freqs()];
        println!("antenna {k}, first frequency: {:+.3} {:+.3}j", s.re, s.im);
    }

    let out = cfg.out_dir.join("examples");
    std::fs::create_dir_all(&out).map_err(|e| radar_lfista::Error::io(&out, e))?;
    render_image(map.values(), cfg.side_cells, out.join("digit.pgm"))?;
    println!("wrote {}", out.join("digit.pgm").display());
    Ok(())
}
