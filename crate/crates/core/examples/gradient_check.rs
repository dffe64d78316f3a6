//! Compares the hand-written backward pass of each network with central
//! finite differences of the training loss on a few parameters per array.
//!
//! cargo run --release --example gradient_check

use ndarray::Array2;
use radar_lfista::config::ExperimentConfig;
use radar_lfista::forward::{synthesize_echo, Echo};
use radar_lfista::geometry::RcsMap;
use radar_lfista::model::{Model, ModelKind};
use radar_lfista::train::{hybrid_loss_batch, loss_weights};

const H: f64 = 1e-6;

fn main() -> radar_lfista::Result<()> {
    let cfg = ExperimentConfig::default();
    let a = cfg.sensing_matrix()?;
    let maps: Vec<RcsMap> = (0..2)
        .map(|k| RcsMap::new((0..a.cols()).map(|p| ((p * 7 + k * 3) % 11) as f64 / 10.0).collect()))
        .collect::<radar_lfista::Result<_>>()?;
    let echoes: Vec<Echo> = maps.iter().map(|m| synthesize_echo(&a, m)).collect::<radar_lfista::Result<_>>()?;
    let refs: Vec<&Echo> = echoes.iter().collect();
    let truth = Array2::from_shape_fn((2, a.cols()), |(i, j)| maps[i].values()[j]);
    let w = loss_weights(&cfg, &a)?;

    for kind in ModelKind::ALL {
        let model = Model::new(kind, &a, cfg.side_cells, 1)?;
        let loss = |m: &Model| -> radar_lfista::Result<f64> {
            let pred = m.predict_batch(&a, &refs)?;
            Ok(hybrid_loss_batch(truth.view(), pred.view(), &refs, &a, w)?.0)
        };
        let (pred, cache) = model.forward_batch(&a, &refs, true)?;
        let (_, d_pred, _) = hybrid_loss_batch(truth.view(), pred.view(), &refs, &a, w)?;
        let grads = model.backward(&a, &cache.expect("cache requested"), d_pred.view());
        println!("{kind}");
        for (i, p) in model.params().iter().enumerate() {
            if !p.trainable {
                println!("    {:<22} frozen", p.name);
                continue;
            }
            let j = p.value.len() / 3;
            let mut plus = model.clone();
            plus.params_mut().get_mut(i).as_slice_mut().unwrap()[j] += H;
            let mut minus = model.clone();
            minus.params_mut().get_mut(i).as_slice_mut().unwrap()[j] -= H;
            let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * H);
            let g = grads.0[i].as_slice().unwrap()[j];
            println!("    {:<22} [{j:>4}] analytic {g:+.6e}  numeric {fd:+.6e}", p.name);
        }
    }
    Ok(())
}
