//! Deterministic solvers driven by the stochastic objects: the elliptic fixed point in `d = 4`,
//! the parabolic equation in `d = 2` (monolithic and split), and the experiments built on them.

mod coming_down;
mod elliptic;
mod parabolic;

pub use coming_down::{coming_down_experiment, prepare_coming_down_ic, random_profile, ComingDownReport, PreparedData};
pub use elliptic::{
    check_max_principle, energy, energy_gradient, solve_elliptic_monotone, solve_elliptic_monotone_from,
    solve_elliptic_phi44, MaxPrincipleReport, MonotoneReport, Phi44Report,
};
pub use parabolic::{
    solve_phi42_monolithic, solve_phi42_split, uniqueness_probe, NormRecord, ParabolicRun, ProbeReport,
    SplitRun,
};

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::grid::{Field, SpectralField, TorusGrid};
use crate::lp::{DyadicPartition, Weight};
use crate::para::Blocks;

/// Regularity loss `kappa` of the noise terms used to set the localizer scale.
pub const KAPPA: f64 = 0.1;
/// Target regularity `alpha` of the irregular component.
pub const ALPHA: f64 = 0.2;

/// Parameters shared by the solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub mu: f64,
    pub grid: TorusGrid,
    pub seed: u64,
    /// Localizer base `L`; with `adaptive` the running scale `K` is added on top.
    pub base: f64,
    pub adaptive: bool,
    /// `false` sets the Wick constant to zero (raw powers).
    pub renormalize: bool,
    pub dt: f64,
    pub horizon: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Exponent `nu` of the weight `<x>^{-nu}`.
    pub nu: f64,
    /// Snapshot stride; `None` keeps every `ceil(T / (100 dt))`-th step.
    pub stride: Option<usize>,
}

impl SolverConfig {
    pub fn new(grid: &TorusGrid, mu: f64) -> Self {
        Self {
            mu,
            grid: grid.clone(),
            seed: 0,
            base: 0.0,
            adaptive: true,
            renormalize: true,
            dt: 1e-3,
            horizon: 1.0,
            theta: 0.5,
            tol: 1e-8,
            max_iter: 200,
            nu: 1.0,
            stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(param("mu", format!("mass must be positive, got {}", self.mu)));
        }
        if !(self.base.is_finite() && self.base >= 0.0) {
            return Err(param("L", format!("localizer base must be >= 0, got {}", self.base)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(param("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(param("T", format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(param("theta", format!("damping must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(param("tol", format!("tolerance must be positive, got {}", self.tol)));
        }
        self.weight().validate()
    }

    pub fn weight(&self) -> Weight {
        if self.nu == 0.0 {
            Weight::Constant
        } else {
            Weight::PolySpace(self.nu)
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn snapshot_stride(&self) -> usize {
        self.stride.unwrap_or_else(|| (self.horizon / (100.0 * self.dt)).ceil().max(1.0) as usize)
    }
}

/// Localizer scale `K` with `1 + |v|_{L^inf(rho)} = 2^{(2 - kappa - alpha) K / 2}`.
pub fn localizer_scale(sup: f64) -> f64 {
    2.0 * (1.0 + sup).log2() / (2.0 - KAPPA - ALPHA)
}

/// Exponential Euler step for `(d/dt + mu - Laplacian) y = f` with `f` frozen over the step.
#[derive(Clone, Debug)]
pub struct ExpEuler {
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl ExpEuler {
    pub fn new(grid: &TorusGrid, dt: f64, mu: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(param("dt", format!("time step must be positive, got {dt}")));
        }
        let lambda = grid.k2().iter().map(|q| mu + q);
        let decay = lambda.clone().map(|l| (-l * dt).exp()).collect();
        // (1 - e^{-l dt}) / l, with the l -> 0 limit dt.
        let gain = lambda.map(|l| if l == 0.0 { dt } else { -(-l * dt).exp_m1() / l }).collect();
        Ok(Self { decay, gain })
    }

    /// In-place update of Fourier coefficients.
    pub fn advance(&self, y: &mut SpectralField, f: &SpectralField) {
        y.coeffs_mut()
            .par_iter_mut()
            .zip(f.coeffs())
            .zip(self.decay.par_iter().zip(&self.gain))
            .for_each(|((c, g), (e, w))| *c = *c * *e + *g * *w);
    }

    pub fn step(&self, state: &Field, forcing: &Field) -> Field {
        let mut y = state.fft();
        self.advance(&mut y, &forcing.fft());
        y.ifft()
    }
}

/// `psi^+ = P_dt psi + (1 - e^{-lambda dt})/lambda * forcing`, mode by mode.
pub fn step_parabolic(state: &Field, forcing: &Field, dt: f64, mu: f64) -> Result<Field> {
    if state.grid() != forcing.grid() {
        return Err(crate::error::Error::GridMismatch("state and forcing grids differ"));
    }
    Ok(ExpEuler::new(state.grid(), dt, mu)?.step(state, forcing))
}

/// The two forcings of the split system at `(phi, psi)`:
///
/// `Phi = [[X^3]] + 3 v < U_> [[X^2]] + 3 v^2 < U_> X`,
/// `Psi = phi^3 + 3 psi phi^2 + 3 psi^2 phi + 3 v < U_<= [[X^2]] + 3 v^2 < U_<= X + 3 v >= [[X^2]] + 3 v^2 >= X`,
/// with `v = phi + psi`. `Phi + Psi + psi^3` is the full nonlinearity.
#[derive(Clone, Debug)]
pub struct SplitForcing {
    pub phi: Field,
    pub psi: Field,
}

/// `x` and `x2` are `(f, U_> f, U_<= f)`.
pub fn split_forcing(
    p: &DyadicPartition,
    x: (&Field, &Field, &Field),
    x2: (&Field, &Field, &Field),
    x3: &Field,
    phi: &Field,
    psi: &Field,
) -> Result<SplitForcing> {
    let v = phi.add(psi)?;
    let vb = Blocks::new(p, &v)?;
    let v2b = Blocks::new(p, &v.mul(&v)?)?;
    let b = |f: &Field| Blocks::new(p, f);
    let mut big = x3.clone();
    big.axpy(3.0, &vb.lt(p, &b(x2.1)?)?)?;
    big.axpy(3.0, &v2b.lt(p, &b(x.1)?)?)?;
    let mut small = phi.zip_map(psi, |f, s| f * f * f + 3.0 * s * f * f + 3.0 * s * s * f)?;
    small.axpy(3.0, &vb.lt(p, &b(x2.2)?)?)?;
    small.axpy(3.0, &v2b.lt(p, &b(x.2)?)?)?;
    small.axpy(3.0, &vb.ge(p, &b(x2.0)?)?)?;
    small.axpy(3.0, &v2b.ge(p, &b(x.0)?)?)?;
    Ok(SplitForcing { phi: big, psi: small })
}
