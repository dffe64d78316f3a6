mod common;

use common::{finite_difference_check, generic_point, random_dataset, toy_matrix, TOY_SIDE};
use ndarray::Array2;
use radar_lfista::model::{Model, ModelKind};
use radar_lfista::train::{hybrid_loss_batch, LossWeights};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check(kind: ModelKind) {
    let a = toy_matrix();
    let data = random_dataset(&a, 3, 7);
    let model = generic_point(&Model::new(kind, &a, TOY_SIDE, 11).unwrap(), 12);
    let report = finite_difference_check(&model, &a, &data.echo_refs(), H, None, 3);
    assert!(!report.is_empty());
    for (name, rel, n, skipped) in report {
        assert!(rel < TOL, "{kind} {name}: relative error {rel:.3e} over {n} entries");
        assert!(skipped * 10 <= n, "{kind} {name}: {skipped} kink-straddling entries");
    }
}

#[test]
fn lfista_resnet_gradients_match_finite_differences() {
    check(ModelKind::LFistaResNet);
}

#[test]
fn dnn_gradients_match_finite_differences() {
    check(ModelKind::Dnn);
}

#[test]
fn fista_resnet_has_no_trainable_step_parameters() {
    let a = toy_matrix();
    let model = Model::new(ModelKind::FistaResNet, &a, TOY_SIDE, 1).unwrap();
    let names: Vec<_> = model.params().iter().filter(|p| !p.trainable).map(|p| p.name.clone()).collect();
    assert_eq!(names, ["lfista.mu_raw", "lfista.theta_raw"]);
    check(ModelKind::FistaResNet);
}

#[test]
fn mse_only_loss_gradient_through_model() {
    let a = toy_matrix();
    let data = random_dataset(&a, 2, 5);
    let echoes = data.echo_refs();
    let truth = Array2::from_shape_fn((2, a.cols()), |(i, j)| data.maps[i].values()[j]);
    let w = LossWeights::mse_only();
    let loss = |m: &Model| {
        let (pred, _) = m.forward_batch(&a, &echoes, false).unwrap();
        hybrid_loss_batch(truth.view(), pred.view(), &echoes, &a, w).unwrap().0
    };
    let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 2).unwrap();
    let (pred, cache) = model.forward_batch(&a, &echoes, true).unwrap();
    let (_, d_pred, _) = hybrid_loss_batch(truth.view(), pred.view(), &echoes, &a, w).unwrap();
    let grads = model.backward(&a, &cache.unwrap(), d_pred.view());
    for (i, p) in model.params().iter().enumerate() {
        for j in [0, p.value.len() / 2, p.value.len() - 1] {
            let mut plus = model.clone();
            plus.params_mut().get_mut(i).as_slice_mut().unwrap()[j] += H;
            let mut minus = model.clone();
            minus.params_mut().get_mut(i).as_slice_mut().unwrap()[j] -= H;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * H);
            let g = grads.0[i].as_slice().unwrap()[j];
            assert!((fd - g).abs() <= TOL * g.abs().max(1e-6), "{} [{j}]: fd {fd:.6e} vs {g:.6e}", p.name);
        }
    }
}

#[test]
fn raising_thresholds_shrinks_the_coarse_estimate() {
    let a = toy_matrix();
    let data = random_dataset(&a, 4, 9);
    let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 4).unwrap();
    let base = model.coarse_batch(&a, &data.echo_refs()).unwrap();
    let mut raised = model.clone();
    raised.params_mut().get_mut(1).mapv_inplace(|v| v + 2.0);
    let shrunk = raised.coarse_batch(&a, &data.echo_refs()).unwrap();
    let l1 = |x: &Array2<f64>| x.iter().map(|v| v.abs()).sum::<f64>();
    assert!(l1(&shrunk) < l1(&base));
}
