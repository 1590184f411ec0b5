//! White noise, Gaussian free fields, Ornstein-Uhlenbeck trajectories and Wick powers.
//!
//! Every Fourier mode draws from a ChaCha stream selected by its physical mode vector, so a
//! sample does not depend on the worker count and two resolutions with the same box share
//! their common modes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::grid::{Field, SpectralField, TorusGrid, Trajectory};

/// Largest `N` for which mode vectors fit the 12-bit-per-axis stream code.
pub const MAX_CODED_N: usize = 4096;

/// Words reserved per time index inside one ChaCha stream.
const WORDS_PER_STEP: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseKind {
    Spatial,
    Spacetime,
}

impl NoiseKind {
    fn tag(self) -> u64 {
        match self {
            NoiseKind::Spatial => 0x5350_4154,
            NoiseKind::Spacetime => 0x5354_494d,
        }
    }
}

/// Seed, kind and grid of a noise realisation; `dt` only for space-time noise.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub seed: u64,
    pub kind: NoiseKind,
    pub grid: TorusGrid,
    pub dt: Option<f64>,
}

impl NoiseSpec {
    pub fn spatial(seed: u64, grid: &TorusGrid) -> Self {
        Self { seed, kind: NoiseKind::Spatial, grid: grid.clone(), dt: None }
    }

    pub fn spacetime(seed: u64, grid: &TorusGrid, dt: f64) -> Self {
        Self { seed, kind: NoiseKind::Spacetime, grid: grid.clone(), dt: Some(dt) }
    }

    fn require(&self, kind: NoiseKind) -> Result<()> {
        if self.kind != kind {
            return Err(param("kind", format!("expected {kind:?} noise, got {:?}", self.kind)));
        }
        if self.grid.n() > MAX_CODED_N {
            return Err(param("N", format!("samplers support N <= {MAX_CODED_N}")));
        }
        Ok(())
    }

    fn dt(&self) -> Result<f64> {
        match self.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => Ok(dt),
            other => Err(param("dt", format!("time step must be positive, got {other:?}"))),
        }
    }
}

/// Counter-based source of standard normals indexed by (mode code, time index).
#[derive(Clone, Debug)]
pub struct ModeRng {
    base: ChaCha8Rng,
}

impl ModeRng {
    pub fn new(seed: u64, kind: NoiseKind) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&kind.tag().to_le_bytes());
        Self { base: ChaCha8Rng::from_seed(key) }
    }

    /// Two independent standard normals for mode `code` at time index `step`.
    pub fn pair(&self, code: u64, step: u64) -> (f64, f64) {
        let mut r = self.base.clone();
        r.set_stream(code);
        r.set_word_pos(step as u128 * WORDS_PER_STEP);
        (r.sample(StandardNormal), r.sample(StandardNormal))
    }
}

/// Packs the integer mode vector, each component offset by 2048 into 12 bits.
pub fn mode_code(modes: &[i64]) -> u64 {
    modes.iter().enumerate().fold(0u64, |acc, (a, &k)| acc | (((k + 2048) as u64) << (12 * a)))
}

/// Modes kept by the mollifier: `|kappa| < radius` in lattice units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub radius: f64,
}

impl Cutoff {
    /// The largest ball inside the lattice cube, `|kappa| < N/2`; it drops every Nyquist mode.
    pub fn ball(grid: &TorusGrid) -> Self {
        Self { radius: grid.n() as f64 / 2.0 }
    }

    /// Keeps all lattice modes.
    pub fn full() -> Self {
        Self { radius: f64::INFINITY }
    }

    pub fn mask(&self, grid: &TorusGrid) -> Vec<f64> {
        grid.radius().iter().map(|&r| if r < self.radius { 1.0 } else { 0.0 }).collect()
    }
}

/// Hermitian Gaussian coefficients with `E|c(k)|^2 = M^d` on every lattice mode.
pub fn gaussian_modes(grid: &TorusGrid, rng: &ModeRng, step: u64) -> SpectralField {
    let d = grid.d();
    let var = grid.volume();
    let s = (var / 2.0).sqrt();
    // Each Hermitian pair is drawn once, from the mode with the larger code.
    let draws: Vec<Option<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let partner = grid.partner(idx);
            let mut modes = [0i64; 5];
            grid.modes(idx, &mut modes[..d]);
            let own = mode_code(&modes[..d]);
            if partner == idx {
                let (z, _) = rng.pair(own, step);
                return Some((var.sqrt() * z, 0.0));
            }
            grid.modes(partner, &mut modes[..d]);
            let other = mode_code(&modes[..d]);
            if own > other {
                let (a, b) = rng.pair(own, step);
                Some((s * a, s * b))
            } else {
                None
            }
        })
        .collect();
    let mut coeffs = vec![Complex64::default(); grid.len()];
    for (idx, draw) in draws.iter().enumerate() {
        if let Some((re, im)) = *draw {
            coeffs[idx] = Complex64::new(re, im);
            let partner = grid.partner(idx);
            if partner != idx {
                coeffs[partner] = Complex64::new(re, -im);
            }
        }
    }
    SpectralField::from_vec(grid, coeffs).expect("length matches grid")
}

/// Discrete white noise: `Cov(xi(x), xi(y)) = delta_{xy} / h^d`.
pub fn sample_space_white_noise(spec: &NoiseSpec) -> Result<Field> {
    spec.require(NoiseKind::Spatial)?;
    Ok(gaussian_modes(&spec.grid, &ModeRng::new(spec.seed, spec.kind), 0).ifft())
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(param("mu", format!("mass must be positive, got {mu}")))
    }
}

/// `X = Q^{-1} xi` restricted to the cutoff, as Fourier coefficients.
pub fn sample_x_elliptic_modes(spec: &NoiseSpec, mu: f64, cutoff: Cutoff) -> Result<SpectralField> {
    spec.require(NoiseKind::Spatial)?;
    check_mu(mu)?;
    let grid = &spec.grid;
    let mask = cutoff.mask(grid);
    let xi = gaussian_modes(grid, &ModeRng::new(spec.seed, spec.kind), 0);
    let symbol: Vec<f64> = grid.k2().iter().zip(&mask).map(|(q, m)| m / (mu + q)).collect();
    Ok(xi.multiply(&symbol))
}

pub fn sample_x_elliptic(spec: &NoiseSpec, mu: f64, cutoff: Cutoff) -> Result<Field> {
    Ok(sample_x_elliptic_modes(spec, mu, cutoff)?.ifft())
}

/// `a = M^{-d} sum_k 1/(mu + |k|^2)^2` over the retained modes.
pub fn wick_constant_elliptic(grid: &TorusGrid, mu: f64, cutoff: Cutoff) -> Result<f64> {
    check_mu(mu)?;
    let mask = cutoff.mask(grid);
    let s: f64 = grid.k2().iter().zip(&mask).map(|(q, m)| m / (mu + q).powi(2)).sum();
    Ok(s / grid.volume())
}

/// `a = M^{-d} sum_k 1/(2(mu + |k|^2))` over the retained modes.
pub fn wick_constant_parabolic(grid: &TorusGrid, mu: f64, cutoff: Cutoff) -> Result<f64> {
    check_mu(mu)?;
    let mask = cutoff.mask(grid);
    let s: f64 = grid.k2().iter().zip(&mask).map(|(q, m)| m / (2.0 * (mu + q))).sum();
    Ok(s / grid.volume())
}

/// `(X^2 - a, X^3 - 3aX)`.
pub fn wick_powers(x: &Field, a: f64) -> (Field, Field) {
    (x.map(|v| v * v - a), x.map(|v| v * v * v - 3.0 * a * v))
}

/// Stationary Ornstein-Uhlenbeck field `L X = xi` advanced by the exact per-mode recursion.
///
/// Time index 0 is the stationary initial draw; index `n >= 1` drives the step to `n dt`.
#[derive(Clone, Debug)]
pub struct OuProcess {
    rng: ModeRng,
    dt: f64,
    step: u64,
    decay: Vec<f64>,
    kick: Vec<f64>,
    state: SpectralField,
}

impl OuProcess {
    pub fn new(spec: &NoiseSpec, mu: f64, cutoff: Cutoff) -> Result<Self> {
        spec.require(NoiseKind::Spacetime)?;
        check_mu(mu)?;
        let dt = spec.dt()?;
        let grid = &spec.grid;
        let mask = cutoff.mask(grid);
        let rng = ModeRng::new(spec.seed, spec.kind);
        let lambda: Vec<f64> = grid.k2().iter().map(|q| mu + q).collect();
        let stationary: Vec<f64> = lambda.iter().zip(&mask).map(|(l, m)| m * (0.5 / l).sqrt()).collect();
        let decay = lambda.iter().map(|l| (-l * dt).exp()).collect();
        let kick = lambda
            .iter()
            .zip(&mask)
            .map(|(l, m)| m * (-(-2.0 * l * dt).exp_m1() / (2.0 * l)).sqrt())
            .collect();
        let state = gaussian_modes(grid, &rng, 0).multiply(&stationary);
        Ok(Self { rng, dt, step: 0, decay, kick, state })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn modes(&self) -> &SpectralField {
        &self.state
    }

    pub fn field(&self) -> Field {
        self.state.ifft()
    }

    pub fn advance(&mut self) {
        self.step += 1;
        let noise = gaussian_modes(self.state.grid(), &self.rng, self.step);
        self.state
            .coeffs_mut()
            .par_iter_mut()
            .zip(noise.coeffs())
            .zip(self.decay.par_iter().zip(&self.kick))
            .for_each(|((c, z), (e, k))| *c = *c * *e + *z * *k);
    }
}

/// Stationary OU trajectory on `[0, T]`, keeping every `stride`-th snapshot and the last one.
pub fn sample_x_parabolic(spec: &NoiseSpec, mu: f64, horizon: f64, cutoff: Cutoff, stride: usize) -> Result<Trajectory> {
    let mut ou = OuProcess::new(spec, mu, cutoff)?;
    if !(horizon >= 0.0) {
        return Err(param("T", format!("horizon must be non-negative, got {horizon}")));
    }
    let steps = (horizon / ou.dt()).round() as u64;
    let stride = stride.max(1) as u64;
    let mut traj = Trajectory::new(&spec.grid, stride as usize);
    traj.push(0.0, ou.field())?;
    for n in 1..=steps {
        ou.advance();
        if n % stride == 0 || n == steps {
            traj.push(ou.time(), ou.field())?;
        }
    }
    Ok(traj)
}

/// Sample mean and standard error.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Embeds a coarse field into a finer grid with the same box by zero-padding its modes.
///
/// Nyquist modes of the coarse grid are split evenly between `+N/2` and `-N/2`.
pub fn prolong(f: &Field, fine: &TorusGrid) -> Result<Field> {
    let coarse = f.grid();
    if coarse.d() != fine.d() || coarse.m() != fine.m() || fine.n() < coarse.n() {
        return Err(Error::GridMismatch("prolongation needs the same box and a finer grid"));
    }
    if fine.n() == coarse.n() {
        return Ok(f.clone());
    }
    let c = f.fft();
    let d = coarse.d();
    let nc = coarse.n() as i64;
    let mut out = SpectralField::zeros(fine);
    let mut modes = [0i64; 5];
    for idx in 0..coarse.len() {
        coarse.modes(idx, &mut modes[..d]);
        let nyq: Vec<usize> = (0..d).filter(|&a| modes[a] == -nc / 2).collect();
        let share = 0.5f64.powi(nyq.len() as i32);
        for mask in 0..(1usize << nyq.len()) {
            let mut target = [0usize; 5];
            for a in 0..d {
                let mut k = modes[a];
                if let Some(pos) = nyq.iter().position(|&x| x == a) {
                    if mask >> pos & 1 == 1 {
                        k = nc / 2;
                    }
                }
                target[a] = fine.index_of_mode(k);
            }
            out.coeffs_mut()[fine.ravel(&target[..d])] += c.coeffs()[idx] * share;
        }
    }
    Ok(out.ifft())
}
