//! Paraproducts, resonant products, commutators and localization operators.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::grid::{Field, Trajectory};
use crate::lp::{profile, DyadicPartition, Weight, PROFILE_INNER};

fn check_pair(p: &DyadicPartition, f: &Field, g: &Field) -> Result<()> {
    if f.grid() != p.grid() || g.grid() != p.grid() {
        return Err(Error::GridMismatch("paraproduct operands and partition differ"));
    }
    Ok(())
}

/// Littlewood-Paley blocks of one field, shared between several products.
#[derive(Clone, Debug)]
pub struct Blocks {
    blocks: Vec<Field>,
}

impl Blocks {
    pub fn new(p: &DyadicPartition, f: &Field) -> Result<Self> {
        Ok(Self { blocks: p.decompose(f)? })
    }

    pub fn blocks(&self) -> &[Field] {
        &self.blocks
    }

    /// `f < g`.
    pub fn lt(&self, p: &DyadicPartition, g: &Blocks) -> Result<Field> {
        pair_sum_blocks(p, self, g, |i, j| i <= j - 2)
    }

    /// `f >= g`.
    pub fn ge(&self, p: &DyadicPartition, g: &Blocks) -> Result<Field> {
        pair_sum_blocks(p, self, g, |i, j| j <= i + 1)
    }

    /// `f o g`.
    pub fn res(&self, p: &DyadicPartition, g: &Blocks) -> Result<Field> {
        pair_sum_blocks(p, self, g, |i, j| (i - j).abs() <= 1)
    }
}

fn pair_sum_blocks(p: &DyadicPartition, f: &Blocks, g: &Blocks, pair: impl Fn(i32, i32) -> bool + Sync) -> Result<Field> {
    let levels: Vec<i32> = p.levels().collect();
    if f.blocks.len() != levels.len() || g.blocks.len() != levels.len() {
        return Err(Error::GridMismatch("block count differs from the partition"));
    }
    if f.blocks.iter().chain(&g.blocks).any(|b| b.grid() != p.grid()) {
        return Err(Error::GridMismatch("paraproduct operands and partition differ"));
    }
    let mut pairs = Vec::new();
    for (a, &i) in levels.iter().enumerate() {
        for (b, &j) in levels.iter().enumerate() {
            if pair(i, j) {
                pairs.push((a, b));
            }
        }
    }
    let (fb, gb) = (&f.blocks, &g.blocks);
    let values = (0..p.grid().len())
        .into_par_iter()
        .map(|x| pairs.iter().map(|&(a, b)| fb[a].values()[x] * gb[b].values()[x]).sum())
        .collect();
    Field::from_vec(p.grid(), values)
}

/// Sum over block pairs `(i, j)` selected by `pair` of `Delta_i f * Delta_j g`.
fn pair_sum(p: &DyadicPartition, f: &Field, g: &Field, pair: impl Fn(i32, i32) -> bool + Sync) -> Result<Field> {
    check_pair(p, f, g)?;
    pair_sum_blocks(p, &Blocks::new(p, f)?, &Blocks::new(p, g)?, pair)
}

/// `f < g = sum_i (S_{i-1} f) Delta_i g`, with `S_{i-1} = sum_{j <= i-2} Delta_j`.
pub fn para_lt(p: &DyadicPartition, f: &Field, g: &Field) -> Result<Field> {
    pair_sum(p, f, g, |i, j| i <= j - 2)
}

/// `f > g = g < f`.
pub fn para_gt(p: &DyadicPartition, f: &Field, g: &Field) -> Result<Field> {
    para_lt(p, g, f)
}

/// `f o g = sum_{|i-j| <= 1} Delta_i f Delta_j g`.
pub fn para_res(p: &DyadicPartition, f: &Field, g: &Field) -> Result<Field> {
    pair_sum(p, f, g, |i, j| (i - j).abs() <= 1)
}

/// `f >= g = f o g + f > g`.
pub fn para_ge(p: &DyadicPartition, f: &Field, g: &Field) -> Result<Field> {
    pair_sum(p, f, g, |i, j| j <= i + 1)
}

/// `com(f, g, h) = (f < g) o h - f (g o h)`.
pub fn commutator(p: &DyadicPartition, f: &Field, g: &Field, h: &Field) -> Result<Field> {
    let lhs = para_res(p, &para_lt(p, f, g)?, h)?;
    lhs.sub(&f.mul(&para_res(p, g, h)?)?)
}

/// Time mollifier `Q(s) = 35/32 (1 - s^2)^3` on `[-1, 1]`.
pub fn time_kernel(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        35.0 / 32.0 * (1.0 - s * s).powi(3)
    }
}

/// `int_{-1}^{s} Q`.
pub fn time_kernel_cdf(s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    0.5 + 35.0 / 32.0 * (s - s.powi(3) + 0.6 * s.powi(5) - s.powi(7) / 7.0)
}

/// Time scale of block `i`: `(2 pi 2^i / M)^2`, the parabolic scaling of the block's frequency.
pub fn block_time_scale(m: f64, i: i32) -> f64 {
    (2.0 * std::f64::consts::PI * f64::powi(2.0, i) / m).powi(2)
}

/// Quadrature weights of `s -> lambda Q(lambda (t - s))` on the mesh `times`.
///
/// Mass outside the mesh interval lands on the end points; weights sum to one.
pub fn mollifier_weights(times: &[f64], t: f64, lambda: f64) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    if n == 1 {
        w[0] = 1.0;
        return w;
    }
    for m in 0..n {
        let left = if m > 0 { times[m] - times[m - 1] } else { 0.0 };
        let right = if m + 1 < n { times[m + 1] - times[m] } else { 0.0 };
        w[m] = lambda * time_kernel(lambda * (t - times[m])) * 0.5 * (left + right);
    }
    // Kernel mass beyond each end of the mesh.
    w[0] += 1.0 - time_kernel_cdf(lambda * (t - times[0]));
    w[n - 1] += time_kernel_cdf(lambda * (t - times[n - 1]));
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        let nearest = (0..n)
            .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
            .unwrap_or(0);
        w.iter_mut().for_each(|v| *v = 0.0);
        w[nearest] = 1.0;
    } else {
        w.iter_mut().for_each(|v| *v /= total);
    }
    w
}

/// `f << g = sum_i (S_{i-1} Q_i f) Delta_i g`, evaluated on the shared time mesh.
pub fn para_lt_time(p: &DyadicPartition, f: &Trajectory, g: &Trajectory) -> Result<Trajectory> {
    if !f.same_mesh(g) || f.grid() != p.grid() {
        return Err(Error::GridMismatch("trajectories must share grid and time mesh"));
    }
    let times = f.times();
    let m = p.grid().m();
    // S_{i-1} f at every time, for every i.
    let lows: Vec<Vec<Field>> = f
        .snapshots()
        .iter()
        .map(|s| p.levels().map(|i| p.low(s, i - 1)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut out = Trajectory::new(p.grid(), 1);
    for (n, &t) in times.iter().enumerate() {
        let gb = p.decompose(&g.snapshots()[n])?;
        let mut acc = Field::zeros(p.grid());
        for (a, i) in p.levels().enumerate() {
            let weights = mollifier_weights(times, t, block_time_scale(m, i));
            let mut smooth = Field::zeros(p.grid());
            for (mi, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    smooth.axpy(w, &lows[mi][a])?;
                }
            }
            acc = acc.add(&smooth.mul(&gb[a])?)?;
        }
        out.push(t, acc)?;
    }
    Ok(out)
}

/// Physical-space radial slices `w_{-1}, w_0, ...` on the fundamental domain.
///
/// Built from the same profile as the frequency blocks, with base radius 1 and ratio 2.
/// The last slice absorbs everything up to the domain corner.
pub fn spatial_slices(grid: &crate::grid::TorusGrid) -> Vec<Field> {
    let radius: Vec<f64> = grid.centered_r2().iter().map(|r2| r2.sqrt()).collect();
    let rmax = radius.iter().cloned().fold(0.0, f64::max);
    dyadic_slices(&radius, rmax)
        .into_iter()
        .map(|v| Field::from_vec(grid, v).expect("slice length"))
        .collect()
}

/// Dyadic slices of the samples `x >= 0`, truncated once `chi(x / 2^K) = 1` up to `xmax`.
fn dyadic_slices(xs: &[f64], xmax: f64) -> Vec<Vec<f64>> {
    let mut count = 0;
    while PROFILE_INNER * f64::powi(2.0, count) < xmax {
        count += 1;
    }
    let mut out = vec![xs.iter().map(|&x| profile(x)).collect::<Vec<_>>()];
    for k in 0..count {
        let s = f64::powi(2.0, k);
        out.push(xs.iter().map(|&x| profile(x / (2.0 * s)) - profile(x / s)).collect());
    }
    for i in 0..xs.len() {
        let total: f64 = out.iter().map(|v| v[i]).sum();
        out.iter_mut().for_each(|v| v[i] /= total);
    }
    out
}

/// Dyadic time slices `v_{-1}, v_0, ...` covering `[0, horizon]`, evaluated at `t`.
pub fn time_slices_at(horizon: f64, t: f64) -> Vec<f64> {
    dyadic_slices(&[t.clamp(0.0, horizon)], horizon).into_iter().map(|v| v[0]).collect()
}

fn cut_of(l: f64) -> i64 {
    l.floor() as i64
}

/// Applies `sum_k w_k Delta_{>L_k}` (or `<=`) given per-slice thresholds and slice coefficients.
fn localize(p: &DyadicPartition, f: &Field, slices: &[(f64, Field)], above: bool) -> Result<Field> {
    if f.grid() != p.grid() {
        return Err(Error::GridMismatch("field and localizer grids differ"));
    }
    let c = f.fft();
    let mut cache: BTreeMap<i64, Field> = BTreeMap::new();
    let mut out = Field::zeros(p.grid());
    for (l, w) in slices {
        let cut = cut_of(*l);
        if !cache.contains_key(&cut) {
            let sym = p.symbol_where(|j| (j as i64 > cut) == above);
            cache.insert(cut, c.multiply(&sym).ifft());
        }
        let part = &cache[&cut];
        out.values_mut()
            .par_iter_mut()
            .zip(part.values())
            .zip(w.values())
            .for_each(|((o, v), w)| *o += w * v);
    }
    Ok(out)
}

/// `U_> f = sum_k w_k Delta_{>L_k} f` with `L_k = c_k + L`, `c_k = -log2 sup rho w_k`.
#[derive(Clone, Debug)]
pub struct Localizer {
    partition: DyadicPartition,
    slices: Vec<Field>,
    offsets: Vec<f64>,
    base: f64,
}

impl Localizer {
    pub fn new(p: &DyadicPartition, rho: &Weight, base: f64) -> Result<Self> {
        rho.validate()?;
        if !base.is_finite() {
            return Err(param("L", "localizer base must be finite"));
        }
        let rho_f = rho.eval(p.grid(), 0.0);
        let mut slices = Vec::new();
        let mut offsets = Vec::new();
        for w in spatial_slices(p.grid()) {
            let sup = w.weighted_sup(&rho_f);
            if sup > 0.0 {
                offsets.push(-sup.log2());
                slices.push(w);
            }
        }
        Ok(Self { partition: p.clone(), slices, offsets, base })
    }

    pub fn partition(&self) -> &DyadicPartition {
        &self.partition
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn with_base(&self, base: f64) -> Self {
        Self { base, ..self.clone() }
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    /// `c_k`.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `L_k = c_k + L`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.offsets.iter().map(|c| c + self.base).collect()
    }

    fn pairs(&self) -> Vec<(f64, Field)> {
        self.thresholds().into_iter().zip(self.slices.iter().cloned()).collect()
    }

    pub fn above(&self, f: &Field) -> Result<Field> {
        localize(&self.partition, f, &self.pairs(), true)
    }

    pub fn below(&self, f: &Field) -> Result<Field> {
        localize(&self.partition, f, &self.pairs(), false)
    }
}

/// `V_> f = sum_{k,l} v_l w_k Delta_{>L_{k,l}} f` on the horizon `[0, T]`.
///
/// `L_{k,l} = c_{k,l} + L` with `c_{k,l} = -log2 sup_{t,x} rho v~_l w_k`,
/// where `v~_l` sums the neighbouring time slices.
#[derive(Clone, Debug)]
pub struct SpaceTimeLocalizer {
    partition: DyadicPartition,
    slices: Vec<Field>,
    horizon: f64,
    /// `offsets[l][k]`, indexed by time slice then space slice.
    offsets: Vec<Vec<f64>>,
    base: f64,
}

/// Number of time samples used to evaluate the sup defining `c_{k,l}`.
const TIME_SAMPLES: usize = 257;

impl SpaceTimeLocalizer {
    pub fn new(p: &DyadicPartition, rho: &Weight, horizon: f64, base: f64) -> Result<Self> {
        rho.validate()?;
        if !(horizon > 0.0) {
            return Err(param("T", format!("horizon must be positive, got {horizon}")));
        }
        let slices = spatial_slices(p.grid());
        let n_time = time_slices_at(horizon, 0.0).len();
        let mut sup = vec![vec![0.0f64; slices.len()]; n_time];
        for s in 0..TIME_SAMPLES {
            let t = horizon * s as f64 / (TIME_SAMPLES - 1) as f64;
            let v = time_slices_at(horizon, t);
            let rho_t = rho.eval(p.grid(), t);
            let ws: Vec<f64> = slices.iter().map(|w| w.weighted_sup(&rho_t)).collect();
            for l in 0..n_time {
                let lo = l.saturating_sub(1);
                let hi = (l + 1).min(n_time - 1);
                let vt: f64 = v[lo..=hi].iter().sum();
                for (k, wk) in ws.iter().enumerate() {
                    sup[l][k] = sup[l][k].max(vt * wk);
                }
            }
        }
        let offsets = sup
            .into_iter()
            .map(|row| row.into_iter().map(|s| if s > 0.0 { -s.log2() } else { 0.0 }).collect())
            .collect();
        Ok(Self { partition: p.clone(), slices, horizon, offsets, base })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_base(&self, base: f64) -> Self {
        Self { base, ..self.clone() }
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    fn pairs_at(&self, t: f64) -> Vec<(f64, Field)> {
        let v = time_slices_at(self.horizon, t);
        let mut out = Vec::new();
        for (l, &vl) in v.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let row = &self.offsets[l.min(self.offsets.len() - 1)];
            for (k, w) in self.slices.iter().enumerate() {
                out.push((row[k] + self.base, w.scale(vl)));
            }
        }
        out
    }

    pub fn above_at(&self, f: &Field, t: f64) -> Result<Field> {
        localize(&self.partition, f, &self.pairs_at(t), true)
    }

    pub fn below_at(&self, f: &Field, t: f64) -> Result<Field> {
        localize(&self.partition, f, &self.pairs_at(t), false)
    }

    pub fn above(&self, f: &Trajectory) -> Result<Trajectory> {
        self.map(f, true)
    }

    pub fn below(&self, f: &Trajectory) -> Result<Trajectory> {
        self.map(f, false)
    }

    fn map(&self, f: &Trajectory, above: bool) -> Result<Trajectory> {
        let mut out = Trajectory::new(f.grid(), f.stride());
        for (&t, s) in f.times().iter().zip(f.snapshots()) {
            let v = if above { self.above_at(s, t)? } else { self.below_at(s, t)? };
            out.push(t, v)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    fn rough(g: &TorusGrid, seed: u64) -> Field {
        let mut s = seed | 1;
        let vals = (0..g.len())
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        Field::from_vec(g, vals).unwrap()
    }

    #[test]
    fn product_decomposes_exactly() {
        let g = TorusGrid::new(2, 2.0 * PI, 32).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = rough(&g, 3);
        let h = rough(&g, 8);
        let sum = para_lt(&p, &f, &h).unwrap().add(&para_res(&p, &f, &h).unwrap()).unwrap();
        let sum = sum.add(&para_gt(&p, &f, &h).unwrap()).unwrap();
        let prod = f.mul(&h).unwrap();
        assert!(sum.sub(&prod).unwrap().sup_norm() < 1e-11 * prod.sup_norm());
        let ge = para_ge(&p, &f, &h).unwrap();
        let alt = para_res(&p, &f, &h).unwrap().add(&para_gt(&p, &f, &h).unwrap()).unwrap();
        assert!(ge.sub(&alt).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn one_para_g_is_high_blocks() {
        let g = TorusGrid::new(2, 2.0 * PI, 32).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let h = rough(&g, 4);
        let got = para_lt(&p, &Field::constant(&g, 1.0), &h).unwrap();
        let mut oracle = Field::zeros(&g);
        for j in 1..=p.j_max() {
            oracle.axpy(1.0, &p.block(&h, j).unwrap()).unwrap();
        }
        assert!(got.sub(&oracle).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn commutator_of_zero_is_zero() {
        let g = TorusGrid::new(2, 2.0 * PI, 16).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let z = Field::zeros(&g);
        let c = commutator(&p, &z, &rough(&g, 1), &rough(&g, 2)).unwrap();
        assert_eq!(c.sup_norm(), 0.0);
    }

    #[test]
    fn kernel_integrates_to_one() {
        assert!((time_kernel_cdf(1.0) - 1.0).abs() < 1e-15);
        assert!(time_kernel_cdf(-1.0).abs() < 1e-15);
        let n = 20000;
        let s: f64 = (0..n).map(|i| time_kernel(-1.0 + (i as f64 + 0.5) * 2.0 / n as f64) * 2.0 / n as f64).sum();
        assert!((s - 1.0).abs() < 1e-8);
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        for lambda in [0.5, 3.0, 100.0] {
            let w = mollifier_weights(&times, 0.35, lambda);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(w.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn slices_sum_to_one() {
        for m in [1.0, 2.0 * PI, 20.0] {
            let g = TorusGrid::new(2, m, 16).unwrap();
            let s = spatial_slices(&g);
            for i in 0..g.len() {
                let t: f64 = s.iter().map(|w| w.values()[i]).sum();
                assert!((t - 1.0).abs() < 1e-14);
            }
        }
        let v = time_slices_at(1.0, 0.6);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn localizer_splits_identity() {
        let g = TorusGrid::new(2, 2.0 * PI, 32).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = rough(&g, 12);
        let loc = Localizer::new(&p, &Weight::PolySpace(1.0), 1.5).unwrap();
        let sum = loc.above(&f).unwrap().add(&loc.below(&f).unwrap()).unwrap();
        assert!(sum.sub(&f).unwrap().sup_norm() < 1e-12 * f.sup_norm());
        let flat = Localizer::new(&p, &Weight::Constant, 1.0).unwrap();
        // Slices need not reach 1 on the lattice, so c_k is small but not zero.
        assert!(flat.offsets().iter().all(|&c| (0.0..1.0).contains(&c)));
        let direct = p.above(&f, 1.0).unwrap();
        assert!(flat.above(&f).unwrap().sub(&direct).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn spacetime_localizer_splits_identity() {
        let g = TorusGrid::new(2, 2.0 * PI, 16).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let loc = SpaceTimeLocalizer::new(&p, &Weight::PolySpacetime(1.0), 2.0, 1.0).unwrap();
        let f = rough(&g, 2);
        for t in [0.0, 0.4, 1.3, 2.0] {
            let s = loc.above_at(&f, t).unwrap().add(&loc.below_at(&f, t).unwrap()).unwrap();
            assert!(s.sub(&f).unwrap().sup_norm() < 1e-12 * f.sup_norm());
        }
    }
}
