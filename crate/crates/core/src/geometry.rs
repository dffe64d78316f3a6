//! Imaging scene: the domain-of-interest grid, the uniform linear array,
//! the stepped-frequency sweep and ground-truth RCS maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Propagation speed (m/s), rounded to 3e8 so that half-wavelength
/// spacing at 30 GHz is exactly 5 mm.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Side length of an MNIST raster.
pub const MNIST_SIDE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Square grid of cells centered on the origin.
///
/// Cells are stored row-major (`p = row * side + col`). Row 0 is the top of
/// the image and sits at the largest `y`, i.e. nearest the array.
#[derive(Debug, Clone, PartialEq)]
pub struct DoiGrid {
    side_cells: usize,
    cell_size: f64,
    centers: Vec<Point>,
}

impl DoiGrid {
    pub fn new(side_cells: usize, cell_size: f64) -> Result<Self> {
        if side_cells == 0 {
            return Err(Error::invalid("DOI grid needs at least one cell per side"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        let half = (side_cells as f64 - 1.0) / 2.0;
        let centers = (0..side_cells)
            .flat_map(|row| {
                (0..side_cells).map(move |col| {
                    Point::new(
                        (col as f64 - half) * cell_size,
                        (half - row as f64) * cell_size,
                    )
                })
            })
            .collect();
        Ok(DoiGrid {
            side_cells,
            cell_size,
            centers,
        })
    }

    pub fn side_cells(&self) -> usize {
        self.side_cells
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of cells `P`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side_cells + col
    }

    /// Length of the DOI diagonal (outer cell edges).
    pub fn diagonal(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.side_cells as f64 * self.cell_size
    }
}

pub fn build_doi_grid(side_cells: usize, cell_size: f64) -> Result<DoiGrid> {
    DoiGrid::new(side_cells, cell_size)
}

/// Antenna positions of a uniform linear array parallel to the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Point>,
}

impl ArrayGeometry {
    pub fn from_positions(positions: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("array needs at least one antenna"));
        }
        Ok(ArrayGeometry { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `k` antennas on `y = standoff`, half-wavelength spaced at `f0` and
/// centered on `x = 0`.
pub fn build_ula(k: usize, f0: f64, standoff: f64) -> Result<ArrayGeometry> {
    if k == 0 {
        return Err(Error::invalid("array needs at least one antenna"));
    }
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::invalid(format!("f0 must be positive, got {f0}")));
    }
    let spacing = SPEED_OF_LIGHT / (2.0 * f0);
    let half = (k as f64 - 1.0) / 2.0;
    let positions = (0..k)
        .map(|i| Point::new((i as f64 - half) * spacing, standoff))
        .collect();
    Ok(ArrayGeometry { positions })
}

/// Stepped frequency grid `f_n = f0 + (B / Nf) * n`, `n = 0..Nf`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep {
    f0: f64,
    bandwidth: f64,
    freqs: Vec<f64>,
}

impl FrequencySweep {
    pub fn new(f0: f64, bandwidth: f64, n_freqs: usize) -> Result<Self> {
        if n_freqs == 0 {
            return Err(Error::invalid("sweep needs at least one frequency"));
        }
        if !(f0 > 0.0 && bandwidth > 0.0 && f0.is_finite() && bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "f0 and bandwidth must be positive, got {f0} / {bandwidth}"
            )));
        }
        let step = bandwidth / n_freqs as f64;
        let freqs = (0..n_freqs).map(|n| f0 + step * n as f64).collect();
        Ok(FrequencySweep {
            f0,
            bandwidth,
            freqs,
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn step(&self) -> f64 {
        self.bandwidth / self.freqs.len() as f64
    }

    /// Real-time ADC sample rate `B / Nf`. Recorded only; the
    /// frequency-domain model never uses it.
    pub fn adc_rate(&self) -> f64 {
        self.step()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }
}

/// `distances[k][p]`: range from antenna `k` to cell center `p`.
pub fn distances(array: &ArrayGeometry, grid: &DoiGrid) -> Vec<Vec<f64>> {
    array
        .positions()
        .iter()
        .map(|ant| grid.centers().iter().map(|c| ant.distance(c)).collect())
        .collect()
}

/// Real, nonnegative RCS amplitudes over the DOI grid, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcsMap {
    values: Vec<f64>,
}

impl RcsMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "RCS value {v} at cell {i} outside [0, 1]"
            )));
        }
        Ok(RcsMap { values })
    }

    pub fn zeros(len: usize) -> Self {
        RcsMap {
            values: vec![0.0; len],
        }
    }

    /// Unit scatterer in a single cell.
    pub fn point(len: usize, cell: usize) -> Self {
        let mut values = vec![0.0; len];
        values[cell] = 1.0;
        RcsMap { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Back to 8-bit raster; exact inverse of [`mnist_to_rcs`].
    pub fn to_raster(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect()
    }
}

/// 28x28 byte raster to RCS map, `values[row * 28 + col] = byte / 255`.
pub fn mnist_to_rcs(raster: &[u8]) -> Result<RcsMap> {
    if raster.len() != MNIST_SIDE * MNIST_SIDE {
        return Err(Error::invalid(format!(
            "expected a 28x28 raster ({} bytes), got {} bytes",
            MNIST_SIDE * MNIST_SIDE,
            raster.len()
        )));
    }
    Ok(RcsMap {
        values: raster.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    /// Training/validation/test sizes used for the published experiments.
    pub const PAPER_SIZES: (usize, usize, usize) = (800, 200, 1000);
}

/// Draws disjoint random index sets of the requested sizes from `0..n_available`.
pub fn split_dataset(
    n_available: usize,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplit> {
    let (n_train, n_val, n_test) = sizes;
    let need = n_train + n_val + n_test;
    if need > n_available {
        return Err(Error::invalid(format!(
            "split needs {need} rasters, only {n_available} available"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n_available).collect();
    idx.shuffle(&mut rng);
    idx.truncate(need);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(DatasetSplit {
        train: idx,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_28_spans_expected_extent() {
        let g = build_doi_grid(28, 0.01).unwrap();
        assert_eq!(g.len(), 784);
        for (p, c) in g.centers().iter().enumerate() {
            let (row, col) = (p / 28, p % 28);
            assert_abs_diff_eq!(c.x, (col as f64 - 13.5) * 0.01, epsilon = 1e-15);
            assert_abs_diff_eq!(c.y, (13.5 - row as f64) * 0.01, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(g.centers()[0].x, -0.135, epsilon = 1e-15);
        assert_abs_diff_eq!(g.centers()[783].x, 0.135, epsilon = 1e-15);
        assert_abs_diff_eq!(g.centers()[0].y, 0.135, epsilon = 1e-15);
    }

    #[test]
    fn grid_small_cases() {
        let g = build_doi_grid(1, 0.01).unwrap();
        assert_eq!(g.centers(), &[Point::new(0.0, 0.0)]);

        let g = build_doi_grid(2, 0.02).unwrap();
        let expect = [(-0.01, 0.01), (0.01, 0.01), (-0.01, -0.01), (0.01, -0.01)];
        for (c, (x, y)) in g.centers().iter().zip(expect) {
            assert_abs_diff_eq!(c.x, x, epsilon = 1e-15);
            assert_abs_diff_eq!(c.y, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_rejects_bad_cell_size() {
        assert!(matches!(build_doi_grid(28, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_doi_grid(28, -1.0), Err(Error::InvalidArgument(_))));
        assert!(build_doi_grid(0, 0.01).is_err());
    }

    #[test]
    fn grid_symmetric_and_adjacent_spacing() {
        let g = build_doi_grid(28, 0.01).unwrap();
        let n = g.len();
        for p in 0..n {
            let a = g.centers()[p];
            let b = g.centers()[n - 1 - p];
            assert_abs_diff_eq!(a.x, -b.x, epsilon = 1e-15);
            assert_abs_diff_eq!(a.y, -b.y, epsilon = 1e-15);
        }
        let right = g.centers()[1].x - g.centers()[0].x;
        let down = g.centers()[0].y - g.centers()[28].y;
        assert_abs_diff_eq!(right, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(down, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn ula_positions() {
        let a = build_ula(4, 30e9, 2.0).unwrap();
        let xs: Vec<f64> = a.positions().iter().map(|p| p.x).collect();
        let d = SPEED_OF_LIGHT / 60e9;
        assert_abs_diff_eq!(d, 0.005, epsilon = 1e-15);
        for (x, k) in xs.iter().zip([-1.5, -0.5, 0.5, 1.5]) {
            assert_abs_diff_eq!(*x, k * d, epsilon = 1e-15);
        }
        for w in a.positions().windows(2) {
            assert!((w[1].x - w[0].x - d).abs() < 1e-12);
        }
        assert!(a.positions().iter().all(|p| p.y == 2.0));

        let one = build_ula(1, 30e9, 2.0).unwrap();
        assert_eq!(one.positions(), &[Point::new(0.0, 2.0)]);

        let two = build_ula(2, 15e9, 2.0).unwrap();
        let d = SPEED_OF_LIGHT / 30e9;
        assert_abs_diff_eq!(two.positions()[0].x, -d / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(two.positions()[1].x, d / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn ula_rejects_bad_input() {
        assert!(build_ula(0, 30e9, 2.0).is_err());
        assert!(build_ula(4, 0.0, 2.0).is_err());
    }

    #[test]
    fn sweep_grid() {
        let s = FrequencySweep::new(30e9, 5e9, 50).unwrap();
        assert_eq!(s.freqs().len(), 50);
        assert_eq!(s.freqs()[0], 30e9);
        assert_eq!(s.step(), 1e8);
        assert!(s.freqs().windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(s.freqs()[49], 34.9e9, epsilon = 1e-3);
    }

    #[test]
    fn distance_examples() {
        let ant = ArrayGeometry::from_positions(vec![Point::new(0.0, 2.0)]).unwrap();
        let g = build_doi_grid(1, 0.01).unwrap();
        assert_eq!(distances(&ant, &g)[0][0], 2.0);

        let r = Point::new(0.0, 2.0).distance(&Point::new(0.03, 0.04));
        assert_abs_diff_eq!(r, (0.03f64.powi(2) + 1.96f64.powi(2)).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r, 1.96023, epsilon = 1e-5);

        let l = Point::new(0.0, 2.0).distance(&Point::new(-0.07, 0.02));
        let rr = Point::new(0.0, 2.0).distance(&Point::new(0.07, 0.02));
        assert_eq!(l, rr);
    }

    #[test]
    fn distances_within_bounds_4x4_brute_force() {
        let g = build_doi_grid(4, 0.05).unwrap();
        let arr = build_ula(4, 30e9, 2.0).unwrap();
        let d = distances(&arr, &g);
        let diag = g.diagonal();
        for (k, ant) in arr.positions().iter().enumerate() {
            for (p, c) in g.centers().iter().enumerate() {
                let brute = ((ant.x - c.x).powi(2) + (ant.y - c.y).powi(2)).sqrt();
                assert_abs_diff_eq!(d[k][p], brute, epsilon = 1e-14);
                assert!(d[k][p] > 2.0 - diag / 2.0 && d[k][p] < 2.0 + diag);
            }
        }
    }

    #[test]
    fn mnist_conversion() {
        let zero = mnist_to_rcs(&[0u8; 784]).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let mut r = [0u8; 784];
        r[0] = 255;
        let e = mnist_to_rcs(&r).unwrap();
        assert_eq!(e.values()[0], 1.0);
        assert!(e.values()[1..].iter().all(|&v| v == 0.0));

        let mut r = [0u8; 784];
        r[2 * 28 + 3] = 128;
        let e = mnist_to_rcs(&r).unwrap();
        assert_abs_diff_eq!(e.values()[59], 0.50196, epsilon = 1e-5);

        assert!(matches!(mnist_to_rcs(&[0u8; 100]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn split_sizes_disjoint_deterministic() {
        let a = split_dataset(5000, DatasetSplit::PAPER_SIZES, 3).unwrap();
        let b = split_dataset(5000, DatasetSplit::PAPER_SIZES, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (800, 200, 1000));
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 2000);
        assert!(all.iter().all(|&i| i < 5000));
        assert!(split_dataset(1999, DatasetSplit::PAPER_SIZES, 0).is_err());
    }

    #[test]
    fn split_depends_on_seed() {
        for s in 0..5u64 {
            let a = split_dataset(5000, DatasetSplit::PAPER_SIZES, 2 * s).unwrap();
            let b = split_dataset(5000, DatasetSplit::PAPER_SIZES, 2 * s + 1).unwrap();
            assert_ne!(a, b);
        }
    }

    proptest! {
        #[test]
        fn raster_round_trip(bytes in proptest::collection::vec(any::<u8>(), 784)) {
            let e = mnist_to_rcs(&bytes).unwrap();
            prop_assert_eq!(e.to_raster(), bytes);
        }
    }
}
