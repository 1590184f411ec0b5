//! Littlewood-Paley blocks, weights and Besov-type norms.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::grid::{Field, SpectralField, TorusGrid};

/// Inner and outer radius of the raised-cosine profile.
pub const PROFILE_INNER: f64 = 3.0 / 4.0;
pub const PROFILE_OUTER: f64 = 4.0 / 3.0;

/// Annulus bounds in dyadic units that every block `j >= 0` below the top one respects.
pub const ANNULUS_INNER: f64 = 3.0 / 8.0;
pub const ANNULUS_OUTER: f64 = 8.0 / 3.0;

/// Radial profile: 1 on `[0, 3/4]`, 0 beyond `4/3`, raised cosine in between.
///
/// Since `4/3 < 2 * 3/4`, every block `0 <= j < j_max` equals 1 on the shell
/// `4/3 * 2^j <= r <= 3/2 * 2^j`.
pub fn profile(r: f64) -> f64 {
    profile_with(r, PROFILE_INNER, PROFILE_OUTER)
}

pub(crate) fn profile_with(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        1.0
    } else if r >= b {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - a) / (b - a)).cos())
    }
}

/// Dyadic partition of unity on the frequency lattice.
///
/// Block `j` for `0 <= j < j_max` is `chi(r/2^{j+1}) - chi(r/2^j)` with `r` the integer mode
/// length. The top block collects everything above, so the corners of the cube lattice
/// (where `r` reaches `sqrt(d) N/2`) are covered.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: TorusGrid,
    j_max: i32,
    blocks: Arc<Vec<Vec<f64>>>,
}

impl DyadicPartition {
    pub fn new(grid: &TorusGrid) -> Result<Self> {
        let n = grid.n();
        if n < 8 {
            return Err(Error::InvalidGrid(format!("partition needs N >= 8, got {n}")));
        }
        let j_max = (n / 2).trailing_zeros() as i32 - 1;
        let radius = grid.radius();
        let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(j_max as usize + 2);
        blocks.push(radius.iter().map(|&r| profile(r)).collect());
        for j in 0..j_max {
            let lo = f64::powi(2.0, j);
            blocks.push(radius.iter().map(|&r| profile(r / (2.0 * lo)) - profile(r / lo)).collect());
        }
        let top = f64::powi(2.0, j_max);
        blocks.push(radius.iter().map(|&r| 1.0 - profile(r / top)).collect());
        for idx in 0..grid.len() {
            let s: f64 = blocks.iter().map(|b| b[idx]).sum();
            for b in blocks.iter_mut() {
                b[idx] /= s;
            }
        }
        Ok(Self { grid: grid.clone(), j_max, blocks: Arc::new(blocks) })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Block indices `-1..=j_max`.
    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    /// Multiplier of block `j`; out-of-range levels are empty.
    pub fn symbol(&self, j: i32) -> Option<&[f64]> {
        if j < -1 || j > self.j_max {
            None
        } else {
            Some(&self.blocks[(j + 1) as usize])
        }
    }

    /// Sum of the multipliers of all blocks `j` with `keep(j)`.
    pub fn symbol_where(&self, keep: impl Fn(i32) -> bool) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for j in self.levels().filter(|&j| keep(j)) {
            for (o, s) in out.iter_mut().zip(&self.blocks[(j + 1) as usize]) {
                *o += s;
            }
        }
        out
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid() == &self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("field and partition grids differ"))
        }
    }

    /// `Delta_j f`.
    pub fn block(&self, f: &Field, j: i32) -> Result<Field> {
        self.check(f)?;
        Ok(self.block_spectral(&f.fft(), j))
    }

    pub fn block_spectral(&self, c: &SpectralField, j: i32) -> Field {
        match self.symbol(j) {
            Some(s) => c.multiply(s).ifft(),
            None => Field::zeros(&self.grid),
        }
    }

    /// All blocks `Delta_{-1} f, ..., Delta_{j_max} f`.
    pub fn decompose(&self, f: &Field) -> Result<Vec<Field>> {
        self.check(f)?;
        let c = f.fft();
        Ok(self.levels().map(|j| self.block_spectral(&c, j)).collect())
    }

    /// `S_j f = sum_{i <= j-1} Delta_i f`.
    pub fn low(&self, f: &Field, j: i32) -> Result<Field> {
        self.check(f)?;
        Ok(f.fft().multiply(&self.symbol_where(|i| i <= j - 1)).ifft())
    }

    /// `Delta_{>L} f = sum_{j > L} Delta_j f`, strict inequality, real-valued threshold.
    pub fn above(&self, f: &Field, l: f64) -> Result<Field> {
        self.check(f)?;
        Ok(f.fft().multiply(&self.symbol_where(|j| j as f64 > l)).ifft())
    }
}

/// Weight families used by the weighted norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Constant,
    /// `<x>^{-nu}`.
    PolySpace(f64),
    /// `<(t, x)>^{-nu}`.
    PolySpacetime(f64),
    /// `(1 - e^{-t})^theta`.
    TauPower(f64),
}

fn japanese(r2: f64) -> f64 {
    (1.0 + r2).sqrt()
}

impl Weight {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Weight::Constant => Ok(()),
            Weight::PolySpace(e) | Weight::PolySpacetime(e) | Weight::TauPower(e) => {
                if e.is_finite() && e >= 0.0 {
                    Ok(())
                } else {
                    Err(param("nu", format!("weight exponent must be >= 0, got {e}")))
                }
            }
        }
    }

    /// The weight raised to the power `p`.
    pub fn pow(&self, p: f64) -> Weight {
        match *self {
            Weight::Constant => Weight::Constant,
            Weight::PolySpace(nu) => Weight::PolySpace(nu * p),
            Weight::PolySpacetime(nu) => Weight::PolySpacetime(nu * p),
            Weight::TauPower(th) => Weight::TauPower(th * p),
        }
    }

    /// Value at time `t` and squared centered radius `r2`.
    pub fn value(&self, t: f64, r2: f64) -> f64 {
        match *self {
            Weight::Constant => 1.0,
            Weight::PolySpace(nu) => japanese(r2).powf(-nu),
            Weight::PolySpacetime(nu) => japanese(r2 + t * t).powf(-nu),
            Weight::TauPower(th) => (1.0 - (-t).exp()).powf(th),
        }
    }

    pub fn eval(&self, grid: &TorusGrid, t: f64) -> Field {
        let values = grid.centered_r2().iter().map(|&r2| self.value(t, r2)).collect();
        Field::from_vec(grid, values).expect("length matches grid")
    }

    /// `sup |grad rho / rho|` and `sup |Laplacian rho / rho|` over the fundamental domain,
    /// for the spatial weights; `None` for the time-only families.
    pub fn log_derivative_bounds(&self, grid: &TorusGrid) -> Option<(f64, f64)> {
        match *self {
            Weight::Constant => Some((0.0, 0.0)),
            Weight::PolySpace(nu) => {
                // rho = (1+r^2)^{-nu/2}; grad rho/rho = -nu x/(1+r^2),
                // Lap rho/rho = -nu d/(1+r^2) + nu(nu+2) r^2/(1+r^2)^2.
                let d = grid.d() as f64;
                let mut g: f64 = 0.0;
                let mut l: f64 = 0.0;
                for &r2 in grid.centered_r2() {
                    let q = 1.0 + r2;
                    g = g.max(nu * r2.sqrt() / q);
                    l = l.max((-nu * d / q + nu * (nu + 2.0) * r2 / (q * q)).abs());
                }
                Some((g, l))
            }
            Weight::PolySpacetime(_) | Weight::TauPower(_) => None,
        }
    }
}

/// `sup_j 2^{j alpha} sup_x w |Delta_j f|`.
pub fn besov_norm(p: &DyadicPartition, f: &Field, alpha: f64, w: &Weight, t: f64) -> Result<f64> {
    let wf = w.eval(p.grid(), t);
    let blocks = p.decompose(f)?;
    Ok(p.levels()
        .zip(&blocks)
        .map(|(j, b)| f64::powf(2.0, j as f64 * alpha) * b.weighted_sup(&wf))
        .fold(0.0, f64::max))
}

/// `(sum_j (2^{j alpha} |w Delta_j f|_{L^2})^2)^{1/2}` with measure `h^d`.
pub fn l2_besov_norm(p: &DyadicPartition, f: &Field, alpha: f64, w: &Weight, t: f64) -> Result<f64> {
    let wf = w.eval(p.grid(), t);
    let hd = p.grid().cell_volume();
    let blocks = p.decompose(f)?;
    let total: f64 = p
        .levels()
        .zip(&blocks)
        .map(|(j, b)| {
            let l2: f64 = b.values().iter().zip(wf.values()).map(|(v, w)| (v * w).powi(2)).sum::<f64>() * hd;
            f64::powf(2.0, 2.0 * j as f64 * alpha) * l2
        })
        .sum();
    Ok(total.sqrt())
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Finite-difference norm `|f|_{L^inf(w)} + sup_s |s|^{-alpha} |Delta_s^m f|_{L^inf(w)}`.
///
/// Shifts are `s = m h e_i` for `1 <= m <= N/4` along each axis.
pub fn fd_norm(f: &Field, alpha: f64, order: u32, w: &Weight, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < order as f64) {
        return Err(param("alpha", format!("alpha = {alpha} outside (0, {order})")));
    }
    let grid = f.grid();
    let n = grid.n();
    let d = grid.d();
    let wf = w.eval(grid, t);
    let base = f.weighted_sup(&wf);
    let coeffs: Vec<f64> = (0..=order)
        .map(|i| binomial(order, i) * if (order - i) % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let vals = f.values();
    let mut best: f64 = 0.0;
    let mut multi = [0usize; 5];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for m in 1..=n / 4 {
            let size = m as f64 * grid.h();
            let mut sup: f64 = 0.0;
            for idx in 0..grid.len() {
                grid.unravel(idx, &mut multi[..d]);
                let i0 = multi[axis];
                let mut acc = 0.0;
                for (i, c) in coeffs.iter().enumerate() {
                    let shifted = (i0 + i * m) % n;
                    acc += c * vals[idx - i0 * stride + shifted * stride];
                }
                sup = sup.max((acc * wf.values()[idx]).abs());
            }
            best = best.max(sup / size.powf(alpha));
        }
    }
    Ok(base + best)
}

/// How a single block is summarized in regularity fits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BlockNorm {
    /// `sup_x |Delta_j f|`.
    #[default]
    Sup,
    /// Root mean square of `Delta_j f` over the grid.
    Rms,
}

impl BlockNorm {
    pub fn of(&self, f: &Field) -> f64 {
        match self {
            BlockNorm::Sup => f.sup_norm(),
            BlockNorm::Rms => (f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64).sqrt(),
        }
    }
}

/// One row per level: `(j, mean log2 block norm)` plus the fit.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub levels: Vec<(i32, f64)>,
    pub slope: f64,
    pub stderr: f64,
}

/// Default fit window `[1, j_max - 1]`, widened to `[0, j_max]` when it holds fewer than three levels.
pub fn default_j_range(p: &DyadicPartition) -> (i32, i32) {
    let (lo, hi) = (1, p.j_max() - 1);
    if hi - lo + 1 >= 3 {
        (lo, hi)
    } else {
        (0, p.j_max())
    }
}

/// Least-squares slope and its standard error.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let stderr = (ssr / (n - 2) as f64 / sxx).sqrt();
    Ok((slope, icpt, stderr))
}

/// Fits `mean_samples log2 |Delta_j f|` against `j` over `j_range` (inclusive).
pub fn estimate_regularity(
    p: &DyadicPartition,
    ensemble: &[Field],
    j_range: (i32, i32),
    norm: BlockNorm,
) -> Result<RegularityReport> {
    if ensemble.is_empty() {
        return Err(param("ensemble", "empty ensemble"));
    }
    let (lo, hi) = j_range;
    if lo < -1 || hi > p.j_max() || hi - lo + 1 < 3 {
        return Err(Error::DegenerateFit(format!("j range [{lo}, {hi}] has fewer than 3 usable levels")));
    }
    let mut sums = vec![0.0; (hi - lo + 1) as usize];
    for f in ensemble {
        let c = f.fft();
        let norms: Vec<f64> = (lo..=hi).map(|j| norm.of(&p.block_spectral(&c, j))).collect();
        // Blocks at rounding level carry no scaling information.
        let floor = 1e-12 * norms.iter().cloned().fold(0.0, f64::max);
        for ((slot, j), &v) in sums.iter_mut().zip(lo..=hi).zip(&norms) {
            if !(v.is_finite() && v > floor) {
                return Err(Error::DegenerateFit(format!("block {j} has norm {v:e}")));
            }
            *slot += v.log2();
        }
    }
    let levels: Vec<(i32, f64)> = (lo..=hi).zip(sums.iter().map(|s| s / ensemble.len() as f64)).collect();
    let xs: Vec<f64> = levels.iter().map(|l| l.0 as f64).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.1).collect();
    let (slope, _, stderr) = fit_line(&xs, &ys)?;
    Ok(RegularityReport { levels, slope, stderr })
}

/// Rows `(j, sup |Delta_j f|, sup w |Delta_j f|)`.
pub fn norm_table(p: &DyadicPartition, f: &Field, w: &Weight, t: f64) -> Result<Vec<(i32, f64, f64)>> {
    let wf = w.eval(p.grid(), t);
    let blocks = p.decompose(f)?;
    Ok(p.levels().zip(&blocks).map(|(j, b)| (j, b.sup_norm(), b.weighted_sup(&wf))).collect())
}

/// Both sides of the interpolation bound for a single field `g`:
/// `sup rho^{1+alpha}|g|` and `(sup rho|g|)^{1-theta} (sup rho^{3+kappa}|g|)^theta`, `theta = alpha/(2+kappa)`.
pub fn interpolation_sides(g: &Field, rho: &Weight, alpha: f64, kappa: f64) -> (f64, f64) {
    let theta = alpha / (2.0 + kappa);
    let grid = g.grid();
    let lhs = g.weighted_sup(&rho.pow(1.0 + alpha).eval(grid, 0.0));
    let a = g.weighted_sup(&rho.eval(grid, 0.0));
    let b = g.weighted_sup(&rho.pow(3.0 + kappa).eval(grid, 0.0));
    (lhs, a.powf(1.0 - theta) * b.powf(theta))
}

/// `sup|Delta_j f| / (2^{dj/p} |Delta_j f|_{L^p})`, the empirical Bernstein constant of one block.
pub fn bernstein_ratio(p: &DyadicPartition, f: &Field, j: i32, exponent: f64) -> Result<f64> {
    let b = p.block(f, j)?;
    let hd = p.grid().cell_volume();
    let lp = (b.values().iter().map(|v| v.abs().powf(exponent)).sum::<f64>() * hd).powf(1.0 / exponent);
    let d = p.grid().d() as f64;
    Ok(b.sup_norm() / (f64::powf(2.0, d * j as f64 / exponent) * lp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, n: usize) -> TorusGrid {
        TorusGrid::new(d, 2.0 * PI, n).unwrap()
    }

    fn smooth_random(g: &TorusGrid, seed: u64) -> Field {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let vals = (0..g.len()).map(|_| next()).collect();
        Field::from_vec(g, vals).unwrap()
    }

    #[test]
    fn level_counts() {
        let p = DyadicPartition::new(&grid(2, 8)).unwrap();
        assert_eq!(p.levels().collect::<Vec<_>>(), vec![-1, 0, 1]);
        assert_eq!(DyadicPartition::new(&grid(2, 64)).unwrap().j_max(), 4);
        assert!(DyadicPartition::new(&grid(2, 4)).is_err());
    }

    #[test]
    fn partition_of_unity_and_supports() {
        for (d, n) in [(2, 8), (2, 64), (3, 16), (4, 8)] {
            let g = grid(d, n);
            let p = DyadicPartition::new(&g).unwrap();
            let r = g.radius();
            for idx in 0..g.len() {
                let s: f64 = p.levels().map(|j| p.symbol(j).unwrap()[idx]).sum();
                assert!((s - 1.0).abs() < 1e-12);
                for i in p.levels() {
                    let vi = p.symbol(i).unwrap()[idx];
                    assert!((0.0..=1.0).contains(&vi));
                    for j in p.levels().filter(|&j| j >= i + 2) {
                        assert_eq!(vi * p.symbol(j).unwrap()[idx], 0.0);
                    }
                    if vi > 0.0 {
                        if i == -1 {
                            assert!(r[idx] < PROFILE_OUTER);
                        } else if i < p.j_max() {
                            let u = r[idx] / f64::powi(2.0, i);
                            assert!((ANNULUS_INNER..=ANNULUS_OUTER).contains(&u), "j={i} r={}", r[idx]);
                        } else {
                            assert!(r[idx] / f64::powi(2.0, i) >= ANNULUS_INNER);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = grid(2, 16);
        let p = DyadicPartition::new(&g).unwrap();
        let f = Field::constant(&g, 3.0);
        let blocks = p.decompose(&f).unwrap();
        assert!(blocks[0].values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(blocks[1..].iter().all(|b| b.sup_norm() < 1e-12));
        let n = besov_norm(&p, &f, 0.7, &Weight::Constant, 0.0).unwrap();
        assert!((n - 3.0 * f64::powf(2.0, -0.7)).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_in_block_interior() {
        let g = grid(2, 32);
        let p = DyadicPartition::new(&g).unwrap();
        let idx = g.ravel(&[0, 3]);
        let j = 1;
        assert_eq!(p.symbol(j).unwrap()[idx], 1.0);
        let f = Field::from_fn(&g, |x| (3.0 * x[1]).cos());
        for i in p.levels() {
            let b = p.block(&f, i).unwrap();
            if i == j {
                assert!(b.sub(&f).unwrap().sup_norm() < 1e-12);
            } else {
                assert!(b.sup_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn resolution_identity_and_low_above() {
        let g = grid(3, 16);
        let p = DyadicPartition::new(&g).unwrap();
        let f = smooth_random(&g, 5);
        let mut sum = Field::zeros(&g);
        for b in p.decompose(&f).unwrap() {
            sum.axpy(1.0, &b).unwrap();
        }
        assert!(sum.sub(&f).unwrap().sup_norm() < 1e-12 * f.sup_norm());
        let split = p.low(&f, 2).unwrap().add(&p.above(&f, 1.0).unwrap()).unwrap();
        assert!(split.sub(&f).unwrap().sup_norm() < 1e-12 * f.sup_norm());
    }

    #[test]
    fn l2_besov_matches_parseval() {
        let g = grid(2, 32);
        let p = DyadicPartition::new(&g).unwrap();
        let f = smooth_random(&g, 11);
        let c = f.fft();
        let mut oracle = 0.0;
        for j in p.levels() {
            let s = p.symbol(j).unwrap();
            oracle += c.coeffs().iter().zip(s).map(|(z, s)| s * s * z.norm_sqr()).sum::<f64>() / g.volume();
        }
        let got = l2_besov_norm(&p, &f, 0.0, &Weight::Constant, 0.0).unwrap();
        assert!((got - oracle.sqrt()).abs() < 1e-8 * got);
        assert_eq!(l2_besov_norm(&p, &Field::zeros(&g), 1.0, &Weight::Constant, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn weight_examples() {
        let g = grid(2, 8);
        assert_eq!(Weight::PolySpace(2.0).value(0.0, 0.0), 1.0);
        assert!((Weight::PolySpace(2.0).value(0.0, 3.0) - 0.25).abs() < 1e-15);
        assert_eq!(Weight::TauPower(0.5).value(0.0, 0.0), 0.0);
        assert!(Weight::PolySpace(1.0).eval(&g, 0.0).values().iter().all(|&v| v > 0.0));
        assert!(Weight::PolySpace(-1.0).validate().is_err());
    }

    #[test]
    fn fd_norm_examples() {
        let g = grid(2, 16);
        let c = Field::constant(&g, -2.0);
        let w = Weight::PolySpace(1.0);
        assert!((fd_norm(&c, 0.5, 2, &w, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(fd_norm(&c, 2.0, 2, &w, 0.0).is_err());
        assert!(fd_norm(&c, 0.0, 2, &w, 0.0).is_err());
    }

    #[test]
    fn single_block_fit_is_degenerate() {
        let g = grid(2, 32);
        let p = DyadicPartition::new(&g).unwrap();
        let f = Field::from_fn(&g, |x| (3.0 * x[0]).sin());
        let fields = vec![f];
        assert!(estimate_regularity(&p, &fields, (0, 3), BlockNorm::Sup).is_err());
        assert!(estimate_regularity(&p, &fields, (1, 2), BlockNorm::Sup).is_err());
        assert_eq!(default_j_range(&p), (0, 3));
    }

    #[test]
    fn log_derivatives_of_constant_weight_vanish() {
        let g = grid(2, 8);
        assert_eq!(Weight::Constant.log_derivative_bounds(&g), Some((0.0, 0.0)));
        let (gr, _) = Weight::PolySpace(1.0).log_derivative_bounds(&g).unwrap();
        assert!(gr <= 0.5 + 1e-12);
    }
}
