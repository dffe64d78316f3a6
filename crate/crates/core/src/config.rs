//! Experiment configuration as a flat `key = value` text file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::{build_sensing_matrix, SensingMatrix};
use crate::geometry::{build_doi_grid, build_ula, ArrayGeometry, DoiGrid, FrequencySweep};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub side_cells: usize,
    pub cell_size_m: f64,
    pub standoff_m: f64,
    pub antennas: usize,
    pub f0_ghz: f64,
    pub bandwidth_ghz: f64,
    pub n_freqs: usize,
    pub mnist_dir: PathBuf,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    pub fista_lambda: f64,
    pub fista_max_iter: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub loss_lambda1: f64,
    pub loss_lambda2: f64,
    /// Divide the data-consistency residual by `lambda_max(A^H A)`.
    pub normalize_physics: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            side_cells: 28,
            cell_size_m: 0.01,
            standoff_m: 2.0,
            antennas: 4,
            f0_ghz: 30.0,
            bandwidth_ghz: 5.0,
            n_freqs: 50,
            mnist_dir: PathBuf::from("data/mnist"),
            n_train: 800,
            n_val: 200,
            n_test: 1000,
            seed: 2024,
            fista_lambda: 0.001,
            fista_max_iter: 2000,
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-2,
            lr_factor: 0.1,
            lr_patience: 10,
            loss_lambda1: 0.1,
            loss_lambda2: 0.05,
            normalize_physics: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

macro_rules! fields {
    ($mac:ident) => {
        $mac!(
            side_cells,
            cell_size_m,
            standoff_m,
            antennas,
            f0_ghz,
            bandwidth_ghz,
            n_freqs,
            mnist_dir,
            n_train,
            n_val,
            n_test,
            seed,
            fista_lambda,
            fista_max_iter,
            epochs,
            batch_size,
            learning_rate,
            lr_factor,
            lr_patience,
            loss_lambda1,
            loss_lambda2,
            normalize_physics,
            out_dir
        )
    };
}

trait ConfigValue: Sized {
    fn render(&self) -> String;
    fn parse_value(s: &str) -> Option<Self>;
}

macro_rules! simple_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn render(&self) -> String {
                self.to_string()
            }
            fn parse_value(s: &str) -> Option<Self> {
                s.parse().ok()
            }
        }
    )*};
}
simple_value!(usize, u64, f64, bool);

impl ConfigValue for PathBuf {
    fn render(&self) -> String {
        self.display().to_string()
    }
    fn parse_value(s: &str) -> Option<Self> {
        Some(PathBuf::from(s))
    }
}

impl ExperimentConfig {
    /// Desk-scale profile for quick runs and CI: 200/50/100 split, 20 epochs.
    pub fn fast() -> Self {
        ExperimentConfig::default().into_fast()
    }

    pub fn into_fast(mut self) -> Self {
        self.n_train = 200;
        self.n_val = 50;
        self.n_test = 100;
        self.epochs = 20;
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        macro_rules! emit {
            ($($f:ident),*) => {$(
                writeln!(out, "{} = {}", stringify!($f), self.$f.render()).unwrap();
            )*};
        }
        fields!(emit);
        out
    }

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys and malformed values are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        macro_rules! assign {
            ($($f:ident),*) => {
                match key {
                    $(stringify!($f) => {
                        self.$f = ConfigValue::parse_value(value)
                            .ok_or_else(|| format!("bad value '{value}' for {key}"))?;
                    })*
                    _ => return Err(format!("unknown key '{key}'")),
                }
            };
        }
        fields!(assign);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.side_cells == 0 || !(self.cell_size_m > 0.0) {
            return bad("grid needs side_cells >= 1 and cell_size_m > 0");
        }
        if self.antennas == 0 || self.n_freqs == 0 {
            return bad("antennas and n_freqs must be >= 1");
        }
        if !(self.f0_ghz > 0.0 && self.bandwidth_ghz > 0.0) {
            return bad("f0_ghz and bandwidth_ghz must be > 0");
        }
        if self.batch_size == 0 || self.fista_max_iter == 0 {
            return bad("batch_size and fista_max_iter must be >= 1");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad("learning_rate must be > 0 and lr_factor in (0, 1)");
        }
        if self.loss_lambda1 < 0.0 || self.loss_lambda2 < 0.0 || self.fista_lambda < 0.0 {
            return bad("loss and sparsity weights must be >= 0");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<DoiGrid> {
        build_doi_grid(self.side_cells, self.cell_size_m)
    }

    /// Array laid out for the configured `f0`.
    pub fn array(&self) -> Result<ArrayGeometry> {
        build_ula(self.antennas, self.f0_ghz * 1e9, self.standoff_m)
    }

    pub fn sweep(&self) -> Result<FrequencySweep> {
        self.sweep_at(self.f0_ghz)
    }

    pub fn sweep_at(&self, f0_ghz: f64) -> Result<FrequencySweep> {
        FrequencySweep::new(f0_ghz * 1e9, self.bandwidth_ghz * 1e9, self.n_freqs)
    }

    pub fn sensing_matrix(&self) -> Result<SensingMatrix> {
        Ok(build_sensing_matrix(&self.sweep()?, &self.array()?, &self.grid()?))
    }

    /// Sensing matrix for a shifted start frequency with the array left where
    /// the configured `f0` put it.
    pub fn sensing_matrix_at(&self, f0_ghz: f64) -> Result<SensingMatrix> {
        Ok(build_sensing_matrix(&self.sweep_at(f0_ghz)?, &self.array()?, &self.grid()?))
    }
}
