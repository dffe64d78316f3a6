mod common;

use common::{random_dataset, toy_matrix, TOY_SIDE};
use num_complex::Complex64;
use radar_lfista::config::ExperimentConfig;
use radar_lfista::model::{Model, ModelKind};
use radar_lfista::train::{encode_checkpoint, fit, load_checkpoint, save_checkpoint};
use radar_lfista::Error;

fn toy_config() -> ExperimentConfig {
    ExperimentConfig {
        side_cells: TOY_SIDE,
        epochs: 3,
        batch_size: 4,
        ..ExperimentConfig::default()
    }
}

#[test]
fn fista_resnet_keeps_its_blocks_frozen() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 12, 1), random_dataset(&a, 4, 2));
    let model = Model::new(ModelKind::FistaResNet, &a, TOY_SIDE, 3).unwrap();
    let out = fit(model.clone(), &a, &train, &val, &toy_config(), None).unwrap();
    for i in 0..2 {
        assert_eq!(out.final_model.params().get(i), model.params().get(i));
    }
    assert_ne!(out.final_model.params(), model.params());
}

#[test]
fn lfista_resnet_moves_its_step_sizes() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 12, 1), random_dataset(&a, 4, 2));
    let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 3).unwrap();
    let out = fit(model.clone(), &a, &train, &val, &toy_config(), None).unwrap();
    assert_ne!(out.final_model.params().get(0), model.params().get(0));
}

#[test]
fn nan_echo_aborts_with_non_finite_loss() {
    let a = toy_matrix();
    let (mut train, val) = (random_dataset(&a, 8, 1), random_dataset(&a, 4, 2));
    for e in &mut train.echoes {
        e.samples[0] = Complex64::new(f64::NAN, 0.0);
    }
    let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 3).unwrap();
    let err = fit(model, &a, &train, &val, &toy_config(), None).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, batch: 0 }), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn training_is_deterministic() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 10, 5), random_dataset(&a, 4, 6));
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let log = dir.path().join(name);
        let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 9).unwrap();
        let out = fit(model, &a, &train, &val, &toy_config(), Some(&log)).unwrap();
        (encode_checkpoint(&out.best), std::fs::read(log).unwrap())
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn log_has_one_row_per_epoch_plus_baseline() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 8, 5), random_dataset(&a, 4, 6));
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let model = Model::new(ModelKind::Dnn, &a, TOY_SIDE, 9).unwrap();
    let out = fit(model, &a, &train, &val, &toy_config(), Some(&log)).unwrap();
    let text = std::fs::read_to_string(log).unwrap();
    assert_eq!(text.lines().count(), 1 + 1 + 3);
    assert_eq!(out.history.len(), 4);
    assert!(out.best.best_val_loss <= out.history[0].val_loss);
}

#[test]
fn checkpoint_file_round_trip() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 8, 5), random_dataset(&a, 4, 6));
    let model = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 9).unwrap();
    let out = fit(model.clone(), &a, &train, &val, &toy_config(), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &out.best).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(encode_checkpoint(&back), encode_checkpoint(&out.best));
    let restored = back.model_for(&model).unwrap();
    let e = val.echo_refs();
    assert_eq!(
        restored.predict_batch(&a, &e).unwrap(),
        out.best.model.predict_batch(&a, &e).unwrap()
    );
}

#[test]
fn checkpoint_for_another_kind_is_refused() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 4, 5), random_dataset(&a, 4, 6));
    let cfg = ExperimentConfig {
        epochs: 1,
        ..toy_config()
    };
    let out = fit(Model::new(ModelKind::Dnn, &a, TOY_SIDE, 1).unwrap(), &a, &train, &val, &cfg, None).unwrap();
    let template = Model::new(ModelKind::LFistaResNet, &a, TOY_SIDE, 1).unwrap();
    assert!(out.best.model_for(&template).is_err());
}

#[test]
fn nan_mid_training_reports_its_epoch() {
    let a = toy_matrix();
    let (train, val) = (random_dataset(&a, 8, 1), random_dataset(&a, 4, 2));
    let mut model = Model::new(ModelKind::Dnn, &a, TOY_SIDE, 3).unwrap();
    let cfg = ExperimentConfig {
        learning_rate: 1e300,
        ..toy_config()
    };
    model.params_mut().get_mut(0).mapv_inplace(|v| v * 1e150);
    let err = fit(model, &a, &train, &val, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 1.., .. }), "{err}");
}
