//! Periodic grids, fields and the spectral transform.
//!
//! Forward transform: `c(k) = h^d sum_x f(x) e^{-ik.x}`.
//! Inverse transform: `f(x) = M^{-d} sum_k c(k) e^{ik.x}`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{param, Error, Result};

/// Largest `N^d` accepted by [`TorusGrid::new`].
pub const MAX_POINTS: usize = 1 << 28;

struct GridInner {
    d: usize,
    n: usize,
    m: f64,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k2: OnceLock<Vec<f64>>,
    radius: OnceLock<Vec<f64>>,
    centered_r2: OnceLock<Vec<f64>>,
}

/// The box `[0, M)^d` sampled by `N` points per axis.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("d", &self.d())
            .field("n", &self.n())
            .field("m", &self.m())
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.d() == other.d() && self.n() == other.n() && self.m() == other.m())
    }
}

impl TorusGrid {
    pub fn new(d: usize, m: f64, n: usize) -> Result<Self> {
        if !(2..=5).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 2..=5")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {m} must be positive")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {n} must be a power of two >= 4")));
        }
        let len = (0..d)
            .try_fold(1usize, |acc, _| acc.checked_mul(n))
            .filter(|&l| l <= MAX_POINTS)
            .ok_or_else(|| Error::InvalidGrid(format!("N^d = {n}^{d} is too large")))?;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                d,
                n,
                m,
                len,
                fwd,
                inv,
                k2: OnceLock::new(),
                radius: OnceLock::new(),
                centered_r2: OnceLock::new(),
            }),
        })
    }

    pub fn d(&self) -> usize {
        self.inner.d
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn m(&self) -> f64 {
        self.inner.m
    }

    pub fn h(&self) -> f64 {
        self.inner.m / self.inner.n as f64
    }

    /// Number of grid points, `N^d`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d() as i32)
    }

    /// Box volume `M^d`.
    pub fn volume(&self) -> f64 {
        self.m().powi(self.d() as i32)
    }

    /// `2 pi / M`.
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.m()
    }

    /// Integer mode of axis index `i`: `i` below `N/2`, `i - N` otherwise.
    pub fn mode_of(&self, i: usize) -> i64 {
        let n = self.n();
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Axis index of integer mode `kappa` (taken modulo `N`).
    pub fn index_of_mode(&self, kappa: i64) -> usize {
        kappa.rem_euclid(self.n() as i64) as usize
    }

    /// Multi-index of flat position `idx`, last axis fastest.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        let n = self.n();
        for slot in out.iter_mut().rev() {
            *slot = idx % n;
            idx /= n;
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n() + i)
    }

    /// Flat index of the mode `-kappa` for the mode at `idx`.
    pub fn partner(&self, idx: usize) -> usize {
        let n = self.n();
        let mut multi = [0usize; 5];
        let d = self.d();
        self.unravel(idx, &mut multi[..d]);
        for i in multi[..d].iter_mut() {
            *i = (n - *i) % n;
        }
        self.ravel(&multi[..d])
    }

    /// Integer modes of the lattice point at `idx`.
    pub fn modes(&self, idx: usize, out: &mut [i64]) {
        let mut multi = [0usize; 5];
        let d = self.d();
        self.unravel(idx, &mut multi[..d]);
        for (o, &i) in out.iter_mut().zip(&multi[..d]) {
            *o = self.mode_of(i);
        }
    }

    /// `|k|^2` in physical units for every lattice point.
    pub fn k2(&self) -> &[f64] {
        self.inner.k2.get_or_init(|| {
            let dk2 = self.dk() * self.dk();
            self.radius().iter().map(|r| r * r * dk2).collect()
        })
    }

    /// Euclidean length of the integer mode vector for every lattice point.
    pub fn radius(&self) -> &[f64] {
        self.inner.radius.get_or_init(|| {
            let d = self.d();
            let mut modes = [0i64; 5];
            (0..self.len())
                .map(|idx| {
                    self.modes(idx, &mut modes[..d]);
                    let s: i64 = modes[..d].iter().map(|k| k * k).sum();
                    (s as f64).sqrt()
                })
                .collect()
        })
    }

    /// Coordinate of axis index `i` wrapped into `[-M/2, M/2)`.
    pub fn centered(&self, i: usize) -> f64 {
        self.mode_of(i) as f64 * self.h()
    }

    /// Squared centered distance to the origin for every grid point.
    pub fn centered_r2(&self) -> &[f64] {
        self.inner.centered_r2.get_or_init(|| {
            let d = self.d();
            let mut multi = [0usize; 5];
            (0..self.len())
                .map(|idx| {
                    self.unravel(idx, &mut multi[..d]);
                    multi[..d].iter().map(|&i| self.centered(i).powi(2)).sum()
                })
                .collect()
        })
    }

    fn check(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch("operands live on different grids"))
        }
    }

    /// In-place unnormalized multidimensional DFT.
    ///
    /// Each pass transforms the contiguous last axis and then rotates the axes by one
    /// (a transpose of the `N^{d-1} x N` matrix), so after `d` passes the layout is restored.
    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.inner.fwd } else { &self.inner.inv };
        let n = self.n();
        let rows = self.len() / n;
        let scratch_len = plan.get_inplace_scratch_len();
        let lines_per_task = (4096 / n).max(1);
        let mut buf = vec![Complex64::default(); data.len()];
        for _ in 0..self.d() {
            data.par_chunks_mut(n * lines_per_task).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, lines| plan.process_with_scratch(lines, scratch),
            );
            transpose_into(data, &mut buf, rows, n);
            data.copy_from_slice(&buf);
        }
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, tiled over row blocks.
fn transpose_into(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 256;
    let tiles = rows.div_ceil(TILE);
    let chunks: Vec<Vec<Complex64>> = (0..tiles)
        .into_par_iter()
        .map(|t| {
            let r0 = t * TILE;
            let r1 = (r0 + TILE).min(rows);
            let mut out = vec![Complex64::default(); (r1 - r0) * cols];
            for c in 0..cols {
                for r in r0..r1 {
                    out[c * (r1 - r0) + (r - r0)] = src[r * cols + c];
                }
            }
            out
        })
        .collect();
    for (t, chunk) in chunks.iter().enumerate() {
        let r0 = t * TILE;
        let len = chunk.len() / cols;
        for c in 0..cols {
            dst[c * rows + r0..c * rows + r0 + len].copy_from_slice(&chunk[c * len..(c + 1) * len]);
        }
    }
}

/// Real scalar field on a grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_vec(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch("value count differs from N^d"));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Evaluates `f` at the centered coordinates of every grid point.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let d = grid.d();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let mut multi = [0usize; 5];
                let mut x = [0f64; 5];
                grid.unravel(idx, &mut multi[..d]);
                for (xi, &i) in x.iter_mut().zip(&multi[..d]) {
                    *xi = grid.centered(i);
                }
                f(&x[..d])
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(h^d sum f^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Plain `l2` norm of the value vector.
    pub fn ell2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `sup_x |w(x) f(x)|`.
    pub fn weighted_sup(&self, w: &Field) -> f64 {
        self.values.iter().zip(&w.values).fold(0.0, |m, (v, w)| m.max((v * w).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Field {
        Field { grid: self.grid.clone(), values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Result<Field> {
        self.grid.check(&other.grid)?;
        let values = self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.grid.check(&other.grid)?;
        self.values.par_iter_mut().zip(&other.values).for_each(|(a, &b)| *a += c * b);
        Ok(())
    }

    pub fn fft(&self) -> SpectralField {
        fft_forward(self)
    }
}

/// Fourier coefficients over the full lattice, same layout as [`Field`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: grid.clone(), coeffs: vec![Complex64::default(); grid.len()] }
    }

    pub fn from_vec(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch("coefficient count differs from N^d"));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Pointwise product with a real multiplier given per lattice point.
    pub fn multiply(&self, symbol: &[f64]) -> SpectralField {
        assert_eq!(symbol.len(), self.coeffs.len());
        let coeffs = self.coeffs.par_iter().zip(symbol).map(|(c, s)| c * s).collect();
        SpectralField { grid: self.grid.clone(), coeffs }
    }

    /// Applies a radial multiplier `g(|k|^2)`.
    pub fn map_k2(&self, g: impl Fn(f64) -> f64 + Sync + Send) -> SpectralField {
        let k2 = self.grid.k2();
        let coeffs = self.coeffs.par_iter().zip(k2).map(|(c, &q)| c * g(q)).collect();
        SpectralField { grid: self.grid.clone(), coeffs }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralField { grid: self.grid.clone(), coeffs })
    }

    pub fn scale(&self, c: f64) -> SpectralField {
        SpectralField { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    /// Largest `|c(-k) - conj c(k)|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.partner(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max);
        worst / scale
    }

    pub fn ifft(&self) -> Field {
        fft_inverse(self)
    }
}

pub fn fft_forward(f: &Field) -> SpectralField {
    let grid = f.grid();
    let hd = grid.cell_volume();
    let mut data: Vec<Complex64> = f.values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.transform(&mut data, true);
    data.par_iter_mut().for_each(|c| *c *= hd);
    SpectralField { grid: grid.clone(), coeffs: data }
}

/// Inverse transform; the imaginary part (rounding for Hermitian input) is dropped.
pub fn fft_inverse(c: &SpectralField) -> Field {
    let grid = c.grid();
    let scale = 1.0 / grid.volume();
    let mut data = c.coeffs.clone();
    grid.transform(&mut data, false);
    let values = data.par_iter().map(|z| z.re * scale).collect();
    Field { grid: grid.clone(), values }
}

/// Inverse transform keeping the complex values.
pub fn fft_inverse_complex(c: &SpectralField) -> Vec<Complex64> {
    let grid = c.grid();
    let scale = 1.0 / grid.volume();
    let mut data = c.coeffs.clone();
    grid.transform(&mut data, false);
    data.par_iter_mut().for_each(|z| *z *= scale);
    data
}

fn check_mass(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(param("mu", format!("mass must be positive, got {mu}")))
    }
}

/// `(mu - Laplacian)^{-1} f`.
pub fn helmholtz_solve(f: &Field, mu: f64) -> Result<Field> {
    check_mass(mu)?;
    Ok(f.fft().map_k2(|q| 1.0 / (mu + q)).ifft())
}

/// `(mu - Laplacian) f`, evaluated spectrally.
pub fn apply_q(f: &Field, mu: f64) -> Field {
    f.fft().map_k2(|q| mu + q).ifft()
}

/// `e^{t(Laplacian - mu)} f`.
pub fn heat_step(f: &Field, t: f64, mu: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(param("t", format!("time must be non-negative, got {t}")));
    }
    Ok(f.fft().map_k2(|q| (-t * (mu + q)).exp()).ifft())
}

/// Time-dependent field with an optional thinning stride.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: TorusGrid,
    times: Vec<f64>,
    snapshots: Vec<Field>,
    stride: usize,
}

impl Trajectory {
    pub fn new(grid: &TorusGrid, stride: usize) -> Self {
        Self { grid: grid.clone(), times: Vec::new(), snapshots: Vec::new(), stride: stride.max(1) }
    }

    pub fn from_parts(times: Vec<f64>, snapshots: Vec<Field>) -> Result<Self> {
        let grid = snapshots
            .first()
            .map(|f| f.grid().clone())
            .ok_or_else(|| Error::Unavailable("empty trajectory".into()))?;
        let mut t = Self::new(&grid, 1);
        for (time, snap) in times.into_iter().zip(snapshots) {
            t.push(time, snap)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, t: f64, f: Field) -> Result<()> {
        self.grid.check(f.grid())?;
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(param("t", format!("times must increase: {t} after {last}")));
            }
        }
        self.times.push(t);
        self.snapshots.push(f);
        Ok(())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    pub fn same_mesh(&self, other: &Trajectory) -> bool {
        self.grid == other.grid && self.times == other.times
    }
}

/// Sizes the global rayon pool from `PHI4LAB_THREADS`, if set.
///
/// Returns the thread count in effect. Calling it after the pool is running is harmless.
pub fn init_threads_from_env() -> usize {
    if let Some(n) = std::env::var("PHI4LAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    rayon::current_num_threads()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn noise(grid: &TorusGrid, seed: u64) -> Field {
        let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let values = (0..grid.len())
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        Field::from_vec(grid, values).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = TorusGrid::new(2, 2.0 * PI, 8).unwrap();
        assert!((g.dk() - 1.0).abs() < 1e-15);
        let kmax = (0..g.n()).map(|i| g.mode_of(i).abs()).max().unwrap();
        assert_eq!(kmax, 4);
        let g = TorusGrid::new(4, 1.0, 4).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.h(), 0.25);
        assert!(TorusGrid::new(2, 2.0 * PI, 7).is_err());
        assert!(TorusGrid::new(6, 1.0, 8).is_err());
        assert!(TorusGrid::new(5, 1.0, 1 << 12).is_err());
    }

    #[test]
    fn partner_is_involution() {
        let g = TorusGrid::new(3, 1.0, 8).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.partner(g.partner(i)), i);
        }
    }

    #[test]
    fn constant_and_cosine_transforms() {
        let g = TorusGrid::new(2, 3.0, 16).unwrap();
        let c = Field::constant(&g, 2.5).fft();
        assert!((c.coeffs()[0].re - 2.5 * g.volume()).abs() < 1e-12);
        assert!(c.coeffs()[1..].iter().all(|z| z.norm() < 1e-12));

        let k0 = g.dk() * 3.0;
        let f = Field::from_fn(&g, |x| (k0 * x[1]).cos());
        let c = f.fft();
        let plus = g.ravel(&[0, 3]);
        let minus = g.ravel(&[0, g.index_of_mode(-3)]);
        assert!((c.coeffs()[plus].re - g.volume() / 2.0).abs() < 1e-12);
        assert!((c.coeffs()[minus].re - g.volume() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_and_parseval() {
        for d in 2..=4 {
            let g = TorusGrid::new(d, 1.7, 8).unwrap();
            let f = noise(&g, d as u64);
            let c = f.fft();
            assert!(c.hermitian_defect() < 1e-12);
            let back = c.ifft();
            let err = back.sub(&f).unwrap().ell2() / f.ell2();
            assert!(err < 1e-12, "d={d} err={err}");
            let lhs = f.l2_norm().powi(2);
            let rhs = c.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>() / g.volume();
            assert!(((lhs - rhs) / lhs).abs() < 1e-10);
        }
    }

    #[test]
    fn helmholtz_inverts_q() {
        let g = TorusGrid::new(2, 2.0, 32).unwrap();
        let f = noise(&g, 9);
        let u = helmholtz_solve(&f, 1.0).unwrap();
        let back = apply_q(&u, 1.0);
        assert!(back.sub(&f).unwrap().ell2() / f.ell2() < 1e-10);
        let c = helmholtz_solve(&Field::constant(&g, 3.0 * 2.0), 3.0).unwrap();
        assert!(c.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(helmholtz_solve(&f, 0.0).is_err());
    }

    #[test]
    fn heat_eigenfunction_and_semigroup() {
        let g = TorusGrid::new(2, 2.0 * PI, 16).unwrap();
        let f = Field::from_fn(&g, |x| (2.0 * x[0] + x[1]).cos());
        let out = heat_step(&f, 0.5, 1.0).unwrap();
        let factor = (-0.5f64 * (1.0 + 5.0)).exp();
        let err = out.sub(&f.scale(factor)).unwrap().sup_norm();
        assert!(err < 1e-13);
        let r = noise(&g, 3);
        let two = heat_step(&heat_step(&r, 0.3, 1.0).unwrap(), 0.7, 1.0).unwrap();
        let one = heat_step(&r, 1.0, 1.0).unwrap();
        assert!(two.sub(&one).unwrap().sup_norm() < 1e-12 * r.sup_norm().max(1.0));
        assert_eq!(heat_step(&r, 0.0, 1.0).unwrap().sub(&r).unwrap().sup_norm() < 1e-14, true);
        assert!(heat_step(&r, -1.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_times_increase() {
        let g = TorusGrid::new(2, 1.0, 4).unwrap();
        let mut t = Trajectory::new(&g, 1);
        t.push(0.0, Field::zeros(&g)).unwrap();
        assert!(t.push(0.0, Field::zeros(&g)).is_err());
        t.push(0.5, Field::zeros(&g)).unwrap();
        assert_eq!(t.len(), 2);
    }
}
