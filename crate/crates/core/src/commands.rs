//! The experiment commands behind the command-line tool. Every artifact
//! lands under the configured output directory:
//!
//! ```text
//! data/{train,val,test}.{maps,echoes}   synthesized datasets
//! checkpoints/<model>.ckpt, <model>.log.csv
//! fista/, infer/                        reconstructions (.images + .pgm)
//! eval/, sweep_snr/, sweep_freq/, shapes/
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::config::ExperimentConfig;
use crate::dataset::{build_splits, load_dataset, read_echoes, save_dataset, write_images, Dataset, Splits};
use crate::error::{Error, Result};
use crate::eval::harness::{
    checkpoint_path, compare_methods, fista_for, load_trained_models, sweep_center_frequency, sweep_snr,
    unseen_shape_eval, MetricsReport, Reconstructor, SweepPoint, F0_GRID_GHZ, SNR_GRID_DB,
};
use crate::eval::render::{decode_pgm, render_image};
use crate::eval::shapes::builtin_set;
use crate::fista::{fista_solve, FistaConfig};
use crate::forward::{Echo, SensingMatrix};
use crate::geometry::RcsMap;
use crate::model::{Model, ModelKind};
use crate::train::{fit, load_checkpoint, save_checkpoint, EpochLog};

const SPLITS: [&str; 3] = ["train", "val", "test"];
const PREVIEW_IMAGES: usize = 8;
const FINGERPRINT: &str = "source.txt";

/// Resolved configuration plus the sensing matrix it implies.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub a: SensingMatrix,
}

/// Overrides applied on top of a config file or the defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub fast: bool,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub mnist_dir: Option<PathBuf>,
    /// Raw `key = value` settings applied last.
    pub set: Vec<(String, String)>,
}

impl Context {
    pub fn new(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if o.fast {
            cfg = cfg.into_fast();
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(d) = &o.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(d) = &o.mnist_dir {
            cfg.mnist_dir = d.clone();
        }
        for (k, v) in &o.set {
            cfg.set(k, v).map_err(Error::Config)?;
        }
        cfg.validate()?;
        let a = cfg.sensing_matrix()?;
        Ok(Context { cfg, a })
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    pub fn fista_config(&self) -> FistaConfig {
        FistaConfig {
            lambda: self.cfg.fista_lambda,
            max_iter: self.cfg.fista_max_iter,
            ..FistaConfig::default()
        }
    }

    fn expected(&self, split: &str) -> usize {
        match split {
            "train" => self.cfg.n_train,
            "val" => self.cfg.n_val,
            _ => self.cfg.n_test,
        }
    }

    /// The settings that determine the synthesized data.
    pub fn data_fingerprint(&self) -> String {
        let c = &self.cfg;
        format!(
            "side_cells {}\ncell_size_m {}\nstandoff_m {}\nantennas {}\nf0_ghz {}\nbandwidth_ghz {}\nn_freqs {}\nmnist_dir {}\nsplit {} {} {}\nseed {}\n",
            c.side_cells,
            c.cell_size_m,
            c.standoff_m,
            c.antennas,
            c.f0_ghz,
            c.bandwidth_ghz,
            c.n_freqs,
            c.mnist_dir.display(),
            c.n_train,
            c.n_val,
            c.n_test,
            c.seed
        )
    }

    /// Cached splits from `data/` when they were synthesized with the same
    /// settings, otherwise freshly synthesized (and cached).
    pub fn splits(&self) -> Result<Splits> {
        let dir = self.dir("data");
        if fs::read_to_string(dir.join(FINGERPRINT)).ok().as_deref() != Some(self.data_fingerprint().as_str()) {
            log::info!("synthesizing datasets into {}", dir.display());
            return synth(self, None);
        }
        let cached = SPLITS
            .iter()
            .map(|s| load_dataset(&dir, s).ok().filter(|d| d.len() == self.expected(s)))
            .collect::<Option<Vec<Dataset>>>();
        if let Some(mut parts) = cached {
            if parts.iter().all(|d| d.echoes.iter().all(|e| e.len() == self.a.rows())) {
                let test = parts.pop().expect("three parts");
                let val = parts.pop().expect("three parts");
                let train = parts.pop().expect("three parts");
                return Ok(Splits { train, val, test });
            }
        }
        log::info!("synthesizing datasets into {}", dir.display());
        synth(self, None)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Draws the configured split, synthesizes noise-free echoes and writes
/// them to `data/`. With `test_snr_db`, the stored test echoes are noised.
pub fn synth(ctx: &Context, test_snr_db: Option<f64>) -> Result<Splits> {
    let mut splits = build_splits(&ctx.cfg, &ctx.a)?;
    if let Some(snr) = test_snr_db {
        splits.test = splits.test.with_noise(snr, ctx.cfg.seed)?;
    }
    let dir = ctx.dir("data");
    create_dir(&dir)?;
    for (name, data) in SPLITS.iter().zip([&splits.train, &splits.val, &splits.test]) {
        save_dataset(&dir, name, &ctx.cfg, data, ctx.cfg.seed)?;
    }
    write_text(&dir.join(FINGERPRINT), &ctx.data_fingerprint())?;
    write_text(&ctx.cfg.out_dir.join("config.txt"), &ctx.cfg.to_text())?;
    Ok(splits)
}

/// Summary of one training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub best_epoch: usize,
    pub initial: EpochLog,
    pub last: EpochLog,
    pub checkpoint: PathBuf,
}

/// Trains each model kind, writing `checkpoints/<kind>.ckpt` (best
/// validation epoch) and `checkpoints/<kind>.log.csv`.
pub fn train(ctx: &Context, kinds: &[ModelKind]) -> Result<Vec<TrainSummary>> {
    let splits = ctx.splits()?;
    let dir = ctx.dir("checkpoints");
    create_dir(&dir)?;
    kinds
        .iter()
        .map(|&kind| {
            log::info!("training {kind}");
            let model = Model::new(kind, &ctx.a, ctx.cfg.side_cells, ctx.cfg.seed)?;
            let log = dir.join(format!("{kind}.log.csv"));
            let out = fit(model, &ctx.a, &splits.train, &splits.val, &ctx.cfg, Some(&log))?;
            let path = checkpoint_path(&dir, kind);
            save_checkpoint(&path, &out.best)?;
            Ok(TrainSummary {
                kind,
                best_epoch: out.best.epoch,
                initial: out.history[0],
                last: *out.history.last().expect("epoch 0 is always logged"),
                checkpoint: path,
            })
        })
        .collect()
}

fn input_echoes(ctx: &Context, input: Option<&Path>, count: Option<usize>) -> Result<(Vec<Echo>, Option<Vec<RcsMap>>)> {
    let (echoes, maps) = match input {
        Some(p) => (read_echoes(p)?.1, None),
        None => {
            let test = ctx.splits()?.test;
            (test.echoes, Some(test.maps))
        }
    };
    let n = count.unwrap_or(echoes.len()).min(echoes.len());
    Ok((echoes[..n].to_vec(), maps.map(|m| m[..n].to_vec())))
}

fn save_reconstructions(dir: &Path, recon: &Array2<f64>, side: usize) -> Result<()> {
    create_dir(dir)?;
    write_images(dir.join("recon.images"), recon.view())?;
    for (i, row) in recon.rows().into_iter().take(PREVIEW_IMAGES).enumerate() {
        render_image(&row.to_vec(), side, dir.join(format!("recon_{i:03}.pgm")))?;
    }
    Ok(())
}

fn report_if_known(label: &str, recon: &Array2<f64>, maps: Option<&[RcsMap]>, side: usize) -> Result<Option<MetricsReport>> {
    let Some(maps) = maps else {
        return Ok(None);
    };
    let (mse, ssim) = maps
        .iter()
        .zip(recon.rows())
        .map(|(m, r)| crate::eval::metrics::score(m.values(), r.as_slice().expect("row-major"), side))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Some(MetricsReport::from_samples(label, mse, ssim)))
}

/// FISTA reconstructions of stored echoes (the test split by default),
/// written to `fista/`. With `record_objective`, the energy trace of the
/// first echo goes to `fista/objective.csv`. Returns metrics when ground
/// truth is at hand.
pub fn fista(
    ctx: &Context,
    input: Option<&Path>,
    count: Option<usize>,
    record_objective: bool,
) -> Result<Option<MetricsReport>> {
    let (echoes, maps) = input_echoes(ctx, input, count)?;
    let cfg = fista_for(&ctx.a, &ctx.fista_config())?;
    let refs: Vec<&Echo> = echoes.iter().collect();
    let recon = Reconstructor::Fista(cfg.clone()).run(&ctx.a, &refs)?;
    let dir = ctx.dir("fista");
    save_reconstructions(&dir, &recon, ctx.cfg.side_cells)?;
    if let (true, Some(first)) = (record_objective, echoes.first()) {
        let traced = FistaConfig {
            record_objective: true,
            ..cfg
        };
        let trace = fista_solve(&ctx.a, first, &traced)?.objective_trace.unwrap_or_default();
        let mut csv = String::from("iteration,objective\n");
        for (i, e) in trace.iter().enumerate() {
            csv.push_str(&format!("{i},{e:.12e}\n"));
        }
        write_text(&dir.join("objective.csv"), &csv)?;
    }
    report_if_known("FISTA", &recon, maps.as_deref(), ctx.cfg.side_cells)
}

/// Trained-model reconstructions, written to `infer/<kind>/`.
pub fn infer(
    ctx: &Context,
    kind: ModelKind,
    checkpoint: Option<&Path>,
    input: Option<&Path>,
    count: Option<usize>,
) -> Result<Option<MetricsReport>> {
    let path = checkpoint.map_or_else(|| checkpoint_path(ctx.dir("checkpoints"), kind), Path::to_path_buf);
    if !path.is_file() {
        return Err(Error::MissingCheckpoint {
            method: kind.to_string(),
            path,
        });
    }
    let model = load_checkpoint(&path)?.model_for(&Model::new(kind, &ctx.a, ctx.cfg.side_cells, 0)?)?;
    let (echoes, maps) = input_echoes(ctx, input, count)?;
    let refs: Vec<&Echo> = echoes.iter().collect();
    let recon = Reconstructor::Model(&model).run(&ctx.a, &refs)?;
    save_reconstructions(&ctx.dir("infer").join(kind.as_str()), &recon, ctx.cfg.side_cells)?;
    report_if_known(kind.as_str(), &recon, maps.as_deref(), ctx.cfg.side_cells)
}

/// Four-method comparison on the test split, written to `eval/`.
pub fn eval(ctx: &Context, timing_samples: usize) -> Result<Vec<MetricsReport>> {
    let models = load_trained_models(ctx.dir("checkpoints"), &ctx.a, ctx.cfg.side_cells)?;
    let test = ctx.splits()?.test;
    compare_methods(&ctx.a, &test, &models, &ctx.fista_config(), ctx.dir("eval"), timing_samples)
}

/// SNR sweep over the first `samples` test digits, written to `sweep_snr/`.
pub fn sweep_snr_cmd(ctx: &Context, samples: usize, snrs_db: Option<&[f64]>) -> Result<Vec<SweepPoint>> {
    let models = load_trained_models(ctx.dir("checkpoints"), &ctx.a, ctx.cfg.side_cells)?;
    let data = ctx.splits()?.test.head(samples);
    sweep_snr(
        &ctx.a,
        &models,
        &ctx.fista_config(),
        &data,
        snrs_db.unwrap_or(&SNR_GRID_DB),
        ctx.cfg.seed,
        ctx.dir("sweep_snr"),
    )
}

/// Center-frequency sweep over the first `samples` test digits, written
/// to `sweep_freq/`.
pub fn sweep_freq_cmd(ctx: &Context, samples: usize, f0s_ghz: Option<&[f64]>) -> Result<Vec<SweepPoint>> {
    let models = load_trained_models(ctx.dir("checkpoints"), &ctx.a, ctx.cfg.side_cells)?;
    let maps = ctx.splits()?.test.head(samples).maps;
    sweep_center_frequency(
        &ctx.cfg,
        &models,
        &ctx.fista_config(),
        &maps,
        f0s_ghz.unwrap_or(&F0_GRID_GHZ),
        ctx.dir("sweep_freq"),
    )
}

/// Reads a PGM raster as an RCS map on the configured grid.
pub fn load_raster(path: &Path, side: usize) -> Result<RcsMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (values, w, h) = decode_pgm(&bytes)?;
    if (w, h) != (side, side) {
        return Err(Error::format(
            0,
            format!("{}: raster is {w}x{h}, grid is {side}x{side}", path.display()),
        ));
    }
    RcsMap::new(values)
}

/// Unseen-target evaluation on the built-in shapes (when `builtin`) plus
/// any PGM rasters given, written to `shapes/`.
pub fn shapes(ctx: &Context, rasters: &[PathBuf], builtin: bool) -> Result<Vec<MetricsReport>> {
    let models = load_trained_models(ctx.dir("checkpoints"), &ctx.a, ctx.cfg.side_cells)?;
    let mut targets = if builtin && ctx.cfg.side_cells == crate::geometry::MNIST_SIDE {
        builtin_set()
    } else {
        Vec::new()
    };
    for p in rasters {
        let name = p.file_stem().map_or("raster".into(), |s| s.to_string_lossy().into_owned());
        targets.push((name, load_raster(p, ctx.cfg.side_cells)?));
    }
    if targets.is_empty() {
        return Err(Error::invalid("no targets: pass rasters or enable the built-in shapes"));
    }
    unseen_shape_eval(&ctx.a, &models, &ctx.fista_config(), &targets, ctx.dir("shapes"))
}
