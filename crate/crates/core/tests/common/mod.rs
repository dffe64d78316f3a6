#![allow(dead_code)]

use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radar_lfista::dataset::Dataset;
use radar_lfista::forward::{build_sensing_matrix, Echo, SensingMatrix};
use radar_lfista::geometry::{build_doi_grid, build_ula, FrequencySweep, RcsMap};
use radar_lfista::model::Model;

pub const TOY_SIDE: usize = 6;

/// 3 antennas, 5 frequencies, 6x6 cells of 2 cm.
pub fn toy_matrix() -> SensingMatrix {
    let sweep = FrequencySweep::new(30e9, 5e9, 5).unwrap();
    let array = build_ula(3, 30e9, 2.0).unwrap();
    let grid = build_doi_grid(TOY_SIDE, 0.02).unwrap();
    build_sensing_matrix(&sweep, &array, &grid)
}

/// Sparse-ish maps with values in [0, 1], never all zero.
pub fn random_maps(n: usize, cells: usize, seed: u64) -> Vec<RcsMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..cells)
                .map(|_| if rng.random::<f64>() < 0.3 { rng.random() } else { 0.0 })
                .collect();
            v[rng.random_range(0..cells)] = 1.0;
            RcsMap::new(v).unwrap()
        })
        .collect()
}

pub fn random_dataset(a: &SensingMatrix, n: usize, seed: u64) -> Dataset {
    Dataset::synthesize(a, random_maps(n, a.cols(), seed)).unwrap()
}

/// Copy of `model` with every array nudged by seeded noise of size
/// `0.02 * rms + 0.02`, so no activation sits exactly on a ReLU kink (zero
/// biases over exactly-zero pixels do at initialization).
pub fn generic_point(model: &Model, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for i in 0..out.params().len() {
        let v = out.params_mut().get_mut(i);
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        let scale = 0.02 * rms + 0.02;
        v.mapv_inplace(|x| x + scale * rng.random_range(-1.0..1.0));
    }
    out
}

/// `sum(c * model(echoes))` for fixed weights `c`.
fn linear_functional(model: &Model, a: &SensingMatrix, echoes: &[&Echo], c: &Array2<f64>) -> f64 {
    let (out, _) = model.forward_batch(a, echoes, false).unwrap();
    (&out * c).sum()
}

pub struct FdGroup {
    pub name: String,
    pub rel: f64,
    pub compared: Vec<usize>,
    pub skipped: Vec<usize>,
}

/// Central-difference check of parameter entries against the analytic
/// backward pass. Entries whose stencil straddles a ReLU kink (the forward
/// and backward one-sided differences disagree by more than `KINK_TOL`) are
/// skipped and recorded; the rest are compared. Each trainable array is
/// visited in seeded random order, or only at the entries listed in `only`
/// when given (arrays missing from `only` are left out). `max_entries` caps
/// the compared entries per array.
pub fn finite_difference_groups(
    model: &Model,
    a: &SensingMatrix,
    echoes: &[&Echo],
    h: f64,
    max_entries: Option<usize>,
    seed: u64,
    only: Option<&HashMap<String, Vec<usize>>>,
) -> Vec<FdGroup> {
    const KINK_TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Array2::from_shape_fn((echoes.len(), a.cols()), |_| rng.random_range(-1.0..1.0));
    let (_, cache) = model.forward_batch(a, echoes, true).unwrap();
    let grads = model.backward(a, &cache.unwrap(), c.view());
    let f0 = linear_functional(model, a, echoes, &c);

    let mut report = Vec::new();
    for (i, p) in model.params().iter().enumerate() {
        if !p.trainable {
            continue;
        }
        let mut order: Vec<usize> = (0..p.value.len()).collect();
        order.shuffle(&mut rng);
        if let Some(only) = only {
            match only.get(&p.name) {
                Some(entries) => order = entries.clone(),
                None => continue,
            }
        }
        let want = max_entries.unwrap_or(order.len()).min(order.len());
        let analytic = grads.0[i].as_slice().unwrap();
        let (mut diff, mut norm) = (0.0, 0.0);
        let (mut compared, mut skipped) = (Vec::new(), Vec::new());
        for &j in &order {
            if compared.len() == want {
                break;
            }
            let shifted = |d: f64| {
                let mut m = model.clone();
                m.params_mut().get_mut(i).as_slice_mut().unwrap()[j] += d;
                linear_functional(&m, a, echoes, &c)
            };
            let (fp, fm) = (shifted(h), shifted(-h));
            let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
            let fd = (fp - fm) / (2.0 * h);
            if (fwd - bwd).abs() > KINK_TOL * fwd.abs().max(bwd.abs()).max(1e-6) {
                skipped.push(j);
                continue;
            }
            diff += (fd - analytic[j]).powi(2);
            norm += analytic[j].powi(2).max(fd * fd);
            compared.push(j);
        }
        let rel = if norm == 0.0 { 0.0 } else { (diff / norm).sqrt() };
        report.push(FdGroup {
            name: p.name.clone(),
            rel,
            compared,
            skipped,
        });
    }
    report
}

/// [`finite_difference_groups`] over every array, as `(name, relative
/// error, compared, skipped)`.
pub fn finite_difference_check(
    model: &Model,
    a: &SensingMatrix,
    echoes: &[&Echo],
    h: f64,
    max_entries: Option<usize>,
    seed: u64,
) -> Vec<(String, f64, usize, usize)> {
    finite_difference_groups(model, a, echoes, h, max_entries, seed, None)
        .into_iter()
        .map(|g| (g.name, g.rel, g.compared.len(), g.skipped.len()))
        .collect()
}

/// Direct evaluation of `s_k(f_n) = sum_p eps_p exp(-j 4 pi f_n R_kp / c)`
/// from first principles: a centered half-wavelength ULA on `y = standoff`,
/// a centered square grid, frequencies `f0 + n B / Nf`.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_echo(
    k: usize,
    nf: usize,
    f0: f64,
    bw: f64,
    standoff: f64,
    side: usize,
    cell: f64,
    eps: &[f64],
) -> Vec<num_complex::Complex64> {
    let c = 3.0e8;
    let mut out = Vec::new();
    for ant in 0..k {
        let ax = (ant as f64 - (k as f64 - 1.0) / 2.0) * c / (2.0 * f0);
        for n in 0..nf {
            let f = f0 + bw * n as f64 / nf as f64;
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for row in 0..side {
                for col in 0..side {
                    let half = (side as f64 - 1.0) / 2.0;
                    let (x, y) = ((col as f64 - half) * cell, (half - row as f64) * cell);
                    let r = ((ax - x).powi(2) + (standoff - y).powi(2)).sqrt();
                    let phase = -4.0 * std::f64::consts::PI * f * r / c;
                    acc += eps[row * side + col] * num_complex::Complex64::from_polar(1.0, phase);
                }
            }
            out.push(acc);
        }
    }
    out
}
