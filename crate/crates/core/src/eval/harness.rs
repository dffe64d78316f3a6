//! The evaluation experiments: four-method comparison, SNR and
//! center-frequency sweeps and the unseen-shape test.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use super::metrics::score;
use super::render::{error_map, render_grid, render_plot};
use crate::config::ExperimentConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fista::{default_step, fista_solve, fista_solve_batch, FistaConfig};
use crate::forward::{Echo, SensingMatrix};
use crate::geometry::RcsMap;
use crate::model::{Model, ModelKind};
use crate::train::load_checkpoint;

pub const SNR_GRID_DB: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 30.0];
pub const F0_GRID_GHZ: [f64; 5] = [28.0, 29.0, 30.0, 31.0, 32.0];
/// Published reference values, written into comparison CSV headers.
pub const REFERENCE_NOTE: &str =
    "# published reference: FISTA mse 0.0124 ssim 0.872; L-FISTA-ResNet mse 0.0049 ssim 0.945";
const GRID_SAMPLES: usize = 6;
const BATCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fista,
    FistaResNet,
    LFistaResNet,
    Dnn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fista, Method::FistaResNet, Method::LFistaResNet, Method::Dnn];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Fista => "FISTA",
            Method::FistaResNet => "FISTA-ResNet",
            Method::LFistaResNet => "L-FISTA-ResNet",
            Method::Dnn => "DNN",
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            Method::Fista => "fista",
            Method::FistaResNet => "fista-resnet",
            Method::LFistaResNet => "lfista-resnet",
            Method::Dnn => "dnn",
        }
    }

    pub fn model_kind(&self) -> Option<ModelKind> {
        match self {
            Method::Fista => None,
            Method::FistaResNet => Some(ModelKind::FistaResNet),
            Method::LFistaResNet => Some(ModelKind::LFistaResNet),
            Method::Dnn => Some(ModelKind::Dnn),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub mse: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mean_mse: f64,
    pub mean_ssim: f64,
    /// Seconds per sample; `None` when the method was not timed.
    pub runtime_per_sample: Option<f64>,
}

impl MetricsReport {
    pub fn from_samples(method: impl Into<String>, mse: Vec<f64>, ssim: Vec<f64>) -> Self {
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        MetricsReport {
            method: method.into(),
            mean_mse: mean(&mse),
            mean_ssim: mean(&ssim),
            mse,
            ssim,
            runtime_per_sample: None,
        }
    }
}

/// Something that maps echoes to reconstructions.
#[derive(Debug, Clone)]
pub enum Reconstructor<'m> {
    Fista(FistaConfig),
    Model(&'m Model),
}

impl Reconstructor<'_> {
    /// One reconstruction per echo, row-aligned.
    pub fn run(&self, a: &SensingMatrix, echoes: &[&Echo]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((echoes.len(), a.cols()));
        for (k, chunk) in echoes.chunks(BATCH).enumerate() {
            let part = match self {
                Reconstructor::Fista(cfg) => fista_solve_batch(a, chunk, cfg)?,
                Reconstructor::Model(m) => m.predict_batch(a, chunk)?,
            };
            out.slice_mut(ndarray::s![k * BATCH..k * BATCH + chunk.len(), ..])
                .assign(&part);
        }
        Ok(out)
    }

    /// Mean wall-clock seconds per single-echo reconstruction over `echoes`,
    /// after one untimed warm-up call.
    pub fn time_per_sample(&self, a: &SensingMatrix, echoes: &[&Echo]) -> Result<f64> {
        let once = |e: &Echo| -> Result<()> {
            match self {
                Reconstructor::Fista(cfg) => fista_solve(a, e, cfg).map(|_| ()),
                Reconstructor::Model(m) => m.predict(a, e).map(|_| ()),
            }
        };
        let Some(first) = echoes.first() else {
            return Ok(0.0);
        };
        once(first)?;
        let start = Instant::now();
        for e in echoes {
            once(e)?;
        }
        Ok(start.elapsed().as_secs_f64() / echoes.len() as f64)
    }
}

/// FISTA with its step fixed from `a`, so repeated runs skip power iteration.
pub fn fista_for(a: &SensingMatrix, base: &FistaConfig) -> Result<FistaConfig> {
    Ok(FistaConfig {
        mu: Some(match base.mu {
            Some(mu) => mu,
            None => default_step(a)?,
        }),
        ..base.clone()
    })
}

/// Reconstructs every sample and scores it against its map.
pub fn evaluate_method(
    label: &str,
    rec: &Reconstructor<'_>,
    a: &SensingMatrix,
    data: &Dataset,
) -> Result<(MetricsReport, Array2<f64>)> {
    let side = (a.cols() as f64).sqrt().round() as usize;
    let recon = rec.run(a, &data.echo_refs())?;
    let scores: Vec<(f64, f64)> = (0..data.len())
        .into_par_iter()
        .map(|i| score(data.maps[i].values(), recon.row(i).as_slice().expect("row-major"), side))
        .collect::<Result<_>>()?;
    let (mse, ssim) = scores.into_iter().unzip();
    Ok((MetricsReport::from_samples(label, mse, ssim), recon))
}

/// The three trained reconstructors.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub lfista_resnet: Model,
    pub fista_resnet: Model,
    pub dnn: Model,
}

impl TrainedModels {
    pub fn get(&self, kind: ModelKind) -> &Model {
        match kind {
            ModelKind::LFistaResNet => &self.lfista_resnet,
            ModelKind::FistaResNet => &self.fista_resnet,
            ModelKind::Dnn => &self.dnn,
        }
    }
}

pub fn checkpoint_path(dir: impl AsRef<Path>, kind: ModelKind) -> PathBuf {
    dir.as_ref().join(format!("{kind}.ckpt"))
}

/// Loads `<dir>/<kind>.ckpt` for every model kind, checking each against a
/// fresh model for the grid of `a`.
pub fn load_trained_models(dir: impl AsRef<Path>, a: &SensingMatrix, side: usize) -> Result<TrainedModels> {
    let load = |kind: ModelKind| -> Result<Model> {
        let path = checkpoint_path(&dir, kind);
        if !path.is_file() {
            return Err(Error::MissingCheckpoint {
                method: kind.to_string(),
                path,
            });
        }
        let ckpt = load_checkpoint(&path)?;
        ckpt.model_for(&Model::new(kind, a, side, 0)?)
    };
    Ok(TrainedModels {
        lfista_resnet: load(ModelKind::LFistaResNet)?,
        fista_resnet: load(ModelKind::FistaResNet)?,
        dnn: load(ModelKind::Dnn)?,
    })
}

fn reconstructor<'m>(method: Method, models: &'m TrainedModels, fista: &FistaConfig) -> Reconstructor<'m> {
    match method.model_kind() {
        None => Reconstructor::Fista(fista.clone()),
        Some(kind) => Reconstructor::Model(models.get(kind)),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn grid_rows(maps: &[RcsMap], recon: &Array2<f64>, n: usize) -> Vec<Vec<Vec<f64>>> {
    maps.iter()
        .take(n)
        .enumerate()
        .map(|(i, m)| {
            let r = recon.row(i).to_vec();
            vec![m.values().to_vec(), r.iter().map(|v| v.clamp(0.0, 1.0)).collect(), error_map(m.values(), &r)]
        })
        .collect()
}

/// Runs all four methods on `test`, writing `compare.csv`,
/// `compare_samples.csv`, `timing.txt` and one `grid_<method>.pgm` per
/// method into `out_dir`. Timing uses the first `timing_samples` echoes for
/// every method.
pub fn compare_methods(
    a: &SensingMatrix,
    test: &Dataset,
    models: &TrainedModels,
    fista: &FistaConfig,
    out_dir: impl AsRef<Path>,
    timing_samples: usize,
) -> Result<Vec<MetricsReport>> {
    let out_dir = out_dir.as_ref();
    let side = (a.cols() as f64).sqrt().round() as usize;
    let fista = fista_for(a, fista)?;
    let echoes = test.echo_refs();
    let timed = &echoes[..timing_samples.min(echoes.len())];
    let mut reports = Vec::new();
    for method in Method::ALL {
        let rec = reconstructor(method, models, &fista);
        let (mut report, recon) = evaluate_method(method.label(), &rec, a, test)?;
        report.runtime_per_sample = Some(rec.time_per_sample(a, timed)?);
        render_grid(&grid_rows(&test.maps, &recon, GRID_SAMPLES), side, out_dir.join(format!("grid_{}.pgm", method.slug())))?;
        reports.push(report);
    }

    let mut csv = format!("{REFERENCE_NOTE}\nmethod,samples,mean_mse,mean_ssim\n");
    let mut per = String::from("sample,method,mse,ssim\n");
    for r in &reports {
        writeln!(csv, "{},{},{},{}", r.method, r.mse.len(), r.mean_mse, r.mean_ssim).unwrap();
        for (i, (m, s)) in r.mse.iter().zip(&r.ssim).enumerate() {
            writeln!(per, "{i},{},{m},{s}", r.method).unwrap();
        }
    }
    write_text(&out_dir.join("compare.csv"), &csv)?;
    write_text(&out_dir.join("compare_samples.csv"), &per)?;

    let fista_time = reports[0].runtime_per_sample.unwrap_or(f64::NAN);
    let mut timing = String::from("method,samples,seconds_per_sample,speedup_vs_fista\n");
    for r in &reports {
        let t = r.runtime_per_sample.unwrap_or(f64::NAN);
        writeln!(timing, "{},{},{:.6e},{:.2}", r.method, timed.len(), t, fista_time / t).unwrap();
    }
    write_text(&out_dir.join("timing.txt"), &timing)?;
    Ok(reports)
}

/// One sweep point: the swept value and the per-method reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub reports: Vec<MetricsReport>,
}

fn sweep_csv(column: &str, points: &[SweepPoint]) -> String {
    let mut csv = format!("{column},method,samples,mean_mse,mean_ssim\n");
    for p in points {
        let v = p.value.map_or("noise-free".to_string(), |v| v.to_string());
        for r in &p.reports {
            writeln!(csv, "{v},{},{},{},{}", r.method, r.mse.len(), r.mean_mse, r.mean_ssim).unwrap();
        }
    }
    csv
}

fn sweep_plot(points: &[SweepPoint], path: &Path) -> Result<()> {
    let finite: Vec<&SweepPoint> = points.iter().filter(|p| p.value.is_some()).collect();
    let xs: Vec<f64> = finite.iter().map(|p| p.value.unwrap()).collect();
    let n_methods = finite.first().map_or(0, |p| p.reports.len());
    let series: Vec<Vec<f64>> = (0..n_methods)
        .map(|m| finite.iter().map(|p| p.reports[m].mean_ssim).collect())
        .collect();
    render_plot(&xs, &series, path)
}

/// Evaluates every method on `data` with echoes corrupted at each SNR in
/// `snrs_db` plus the noise-free echoes. Writes `sweep_snr.csv` and
/// `sweep_snr.pgm` (mean SSIM against SNR, one curve per method).
pub fn sweep_snr(
    a: &SensingMatrix,
    models: &TrainedModels,
    fista: &FistaConfig,
    data: &Dataset,
    snrs_db: &[f64],
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<SweepPoint>> {
    let out_dir = out_dir.as_ref();
    let fista = fista_for(a, fista)?;
    let mut points = Vec::new();
    let levels = snrs_db.iter().map(|&s| Some(s)).chain(std::iter::once(None));
    for (k, snr) in levels.enumerate() {
        let noisy = match snr {
            Some(s) => data.with_noise(s, seed.wrapping_add(k as u64))?,
            None => data.clone(),
        };
        let reports = Method::ALL
            .iter()
            .map(|&m| Ok(evaluate_method(m.label(), &reconstructor(m, models, &fista), a, &noisy)?.0))
            .collect::<Result<Vec<_>>>()?;
        log::info!(
            "snr {}: {}",
            snr.map_or("noise-free".into(), |s| format!("{s} dB")),
            summary(&reports)
        );
        points.push(SweepPoint { value: snr, reports });
    }
    write_text(&out_dir.join("sweep_snr.csv"), &sweep_csv("snr_db", &points))?;
    sweep_plot(&points, &out_dir.join("sweep_snr.pgm"))?;
    Ok(points)
}

fn summary(reports: &[MetricsReport]) -> String {
    reports
        .iter()
        .map(|r| format!("{} {:.4}", r.method, r.mean_ssim))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Re-synthesizes `maps` at each start frequency with the array left in
/// place and evaluates every method. FISTA and FISTA-ResNet take their step
/// from the rebuilt matrix; trained weights are otherwise unchanged.
/// Writes `sweep_freq.csv` and `sweep_freq.pgm`.
pub fn sweep_center_frequency(
    cfg: &ExperimentConfig,
    models: &TrainedModels,
    fista: &FistaConfig,
    maps: &[RcsMap],
    f0s_ghz: &[f64],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<SweepPoint>> {
    let out_dir = out_dir.as_ref();
    let mut points = Vec::new();
    for &f0 in f0s_ghz {
        let a = cfg.sensing_matrix_at(f0)?;
        let data = Dataset::synthesize(&a, maps.to_vec())?;
        let mu = default_step(&a)?;
        let fista_f = FistaConfig {
            mu: Some(mu),
            ..fista.clone()
        };
        let fista_resnet = models.fista_resnet.with_fista_step(mu)?;
        let reports = Method::ALL
            .iter()
            .map(|&m| {
                let rec = match m {
                    Method::Fista => Reconstructor::Fista(fista_f.clone()),
                    Method::FistaResNet => Reconstructor::Model(&fista_resnet),
                    _ => reconstructor(m, models, &fista_f),
                };
                Ok(evaluate_method(m.label(), &rec, &a, &data)?.0)
            })
            .collect::<Result<Vec<_>>>()?;
        log::info!("f0 {f0} GHz: {}", summary(&reports));
        points.push(SweepPoint {
            value: Some(f0),
            reports,
        });
    }
    write_text(&out_dir.join("sweep_freq.csv"), &sweep_csv("f0_ghz", &points))?;
    sweep_plot(&points, &out_dir.join("sweep_freq.pgm"))?;
    Ok(points)
}

/// Runs every method on named non-digit targets. Writes `shapes.csv` (one
/// row per shape and method) and `grid_shapes_<method>.pgm`.
pub fn unseen_shape_eval(
    a: &SensingMatrix,
    models: &TrainedModels,
    fista: &FistaConfig,
    shapes: &[(String, RcsMap)],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<MetricsReport>> {
    let out_dir = out_dir.as_ref();
    let side = (a.cols() as f64).sqrt().round() as usize;
    let fista = fista_for(a, fista)?;
    let data = Dataset::synthesize(a, shapes.iter().map(|(_, m)| m.clone()).collect())?;
    let mut csv = String::from("shape,method,mse,ssim\n");
    let mut reports = Vec::new();
    for method in Method::ALL {
        let (report, recon) = evaluate_method(method.label(), &reconstructor(method, models, &fista), a, &data)?;
        for (i, (name, _)) in shapes.iter().enumerate() {
            writeln!(csv, "{name},{},{},{}", method.label(), report.mse[i], report.ssim[i]).unwrap();
        }
        render_grid(
            &grid_rows(&data.maps, &recon, shapes.len()),
            side,
            out_dir.join(format!("grid_shapes_{}.pgm", method.slug())),
        )?;
        reports.push(report);
    }
    write_text(&out_dir.join("shapes.csv"), &csv)?;
    Ok(reports)
}
