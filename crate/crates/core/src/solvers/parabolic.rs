//! `(d/dt + Q) v = -([[X^3]] + 3 [[X^2]] v + 3 X v^2 + v^3)` in `d = 2`, directly and through the
//! localized split `v = phi + psi`.

use std::collections::HashMap;

use super::{localizer_scale, split_forcing, ExpEuler, SolverConfig, ALPHA};
use crate::error::{param, Error, Result};
use crate::grid::{Field, Trajectory};
use crate::lp::{besov_norm, DyadicPartition};
use crate::para::SpaceTimeLocalizer;
use crate::stochastic::wick_powers;

/// Solutions above this sup norm are treated as blown up.
pub const BLOW_UP: f64 = 1e12;

/// One row of the norm series: `t, |v|_inf, |v|_{L^inf(rho)}, |v|_{C^alpha(rho)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    pub sup_norm: f64,
    pub weighted_sup: f64,
    pub besov_alpha: f64,
}

#[derive(Clone, Debug)]
pub struct ParabolicRun {
    pub solution: Trajectory,
    /// One record per time step, including `t = 0`.
    pub series: Vec<NormRecord>,
    pub substeps: usize,
    /// Wick constant actually used (0 for raw powers).
    pub a: f64,
}

fn check_inputs(p: &DyadicPartition, x: &Trajectory, cfg: &SolverConfig, init: &[&Field]) -> Result<()> {
    cfg.validate()?;
    if cfg.grid.d() != 2 {
        return Err(param("d", format!("the parabolic solver runs in d = 2, got d = {}", cfg.grid.d())));
    }
    if p.grid() != &cfg.grid || x.grid() != &cfg.grid || init.iter().any(|f| f.grid() != &cfg.grid) {
        return Err(Error::GridMismatch("noise, data and configuration grids differ"));
    }
    let steps = cfg.steps();
    if x.len() < steps + 1 {
        return Err(param("X", format!("noise has {} snapshots, the run needs {}", x.len(), steps + 1)));
    }
    for (n, t) in x.times().iter().take(steps + 1).enumerate() {
        if (t - n as f64 * cfg.dt).abs() > 1e-9 * cfg.dt.max(1.0) {
            return Err(param("X", format!("noise snapshot {n} is at t = {t}, expected every dt = {}", cfg.dt)));
        }
    }
    Ok(())
}

/// Substeps keeping `h <= 0.5 / (mu + 3 |v|_inf^2)`.
fn substeps(dt: f64, mu: f64, sup: f64) -> usize {
    (dt * (mu + 3.0 * sup * sup) / 0.5).ceil().max(1.0) as usize
}

struct Steppers {
    grid_dt: f64,
    mu: f64,
    grid: crate::grid::TorusGrid,
    cache: HashMap<usize, ExpEuler>,
}

impl Steppers {
    fn get(&mut self, m: usize) -> Result<&ExpEuler> {
        if !self.cache.contains_key(&m) {
            let e = ExpEuler::new(&self.grid, self.grid_dt / m as f64, self.mu)?;
            self.cache.insert(m, e);
        }
        Ok(&self.cache[&m])
    }
}

fn record(p: &DyadicPartition, cfg: &SolverConfig, rho: &Field, t: f64, v: &Field) -> Result<NormRecord> {
    Ok(NormRecord {
        t,
        sup_norm: v.sup_norm(),
        weighted_sup: v.weighted_sup(rho),
        besov_alpha: besov_norm(p, v, ALPHA, &cfg.weight(), t)?,
    })
}

fn guard(t: f64, v: &Field) -> Result<()> {
    let norm = v.sup_norm();
    if !v.is_finite() || norm > BLOW_UP {
        return Err(Error::BlowUp { t, norm });
    }
    Ok(())
}

/// Exponential Euler with the whole nonlinearity explicit; the noise is frozen on each step.
///
/// `x` must hold a snapshot at every multiple of `cfg.dt` up to `cfg.horizon`.
/// With `cfg.renormalize = false` the constant `a` is replaced by 0.
pub fn solve_phi42_monolithic(
    p: &DyadicPartition,
    x: &Trajectory,
    a: f64,
    v0: &Field,
    cfg: &SolverConfig,
) -> Result<ParabolicRun> {
    check_inputs(p, x, cfg, &[v0])?;
    let a = if cfg.renormalize { a } else { 0.0 };
    let rho = cfg.weight().eval(&cfg.grid, 0.0);
    let stride = cfg.snapshot_stride();
    let steps = cfg.steps();
    let mut st = Steppers { grid_dt: cfg.dt, mu: cfg.mu, grid: cfg.grid.clone(), cache: HashMap::new() };
    let mut v = v0.clone();
    guard(0.0, &v)?;
    let mut traj = Trajectory::new(&cfg.grid, stride);
    traj.push(0.0, v.clone())?;
    let mut series = vec![record(p, cfg, &rho, 0.0, &v)?];
    let mut total = 0;
    for n in 0..steps {
        let xn = &x.snapshots()[n];
        let (x2, x3) = wick_powers(xn, a);
        let m = substeps(cfg.dt, cfg.mu, v.sup_norm());
        total += m;
        let stepper = st.get(m)?;
        for _ in 0..m {
            let mut f = x3.clone();
            f.values_mut()
                .iter_mut()
                .zip(x2.values().iter().zip(xn.values()).zip(v.values()))
                .for_each(|(f, ((x2, x), v))| *f = -(*f + 3.0 * x2 * v + 3.0 * x * v * v + v * v * v));
            v = stepper.step(&v, &f);
        }
        let t = (n + 1) as f64 * cfg.dt;
        guard(t, &v)?;
        series.push(record(p, cfg, &rho, t, &v)?);
        if (n + 1) % stride == 0 || n + 1 == steps {
            traj.push(t, v.clone())?;
        }
    }
    Ok(ParabolicRun { solution: traj, series, substeps: total, a })
}

#[derive(Clone, Debug)]
pub struct SplitRun {
    pub phi: Trajectory,
    pub psi: Trajectory,
    /// `phi + psi`.
    pub total: Trajectory,
    /// Norms of `phi + psi` at every step.
    pub series: Vec<NormRecord>,
    /// `(t, |phi|_{C^alpha(rho)}, |psi|_{L^inf(rho)})` at the stored snapshots.
    pub components: Vec<(f64, f64, f64)>,
    /// Localizer base `K` used on each step.
    pub scales: Vec<f64>,
    pub substeps: usize,
    pub a: f64,
}

/// Steps `L phi + Phi = 0` and `L psi + psi^3 + Psi = 0` together with space-time localizers.
///
/// The localizer base is `L` (`cfg.base`) plus, when `cfg.adaptive`, the scale recomputed from
/// the running `|phi + psi|_{L^inf(rho)}`; `X` is localized at `K` and `[[X^2]]` at `K / 2`.
pub fn solve_phi42_split(
    p: &DyadicPartition,
    x: &Trajectory,
    a: f64,
    phi0: &Field,
    psi0: &Field,
    cfg: &SolverConfig,
) -> Result<SplitRun> {
    check_inputs(p, x, cfg, &[phi0, psi0])?;
    let a = if cfg.renormalize { a } else { 0.0 };
    let w = cfg.weight();
    let rho = w.eval(&cfg.grid, 0.0);
    let loc = SpaceTimeLocalizer::new(p, &w, cfg.horizon.max(cfg.dt), 0.0)?;
    let stride = cfg.snapshot_stride();
    let steps = cfg.steps();
    let mut st = Steppers { grid_dt: cfg.dt, mu: cfg.mu, grid: cfg.grid.clone(), cache: HashMap::new() };
    let (mut phi, mut psi) = (phi0.clone(), psi0.clone());
    let mut v = phi.add(&psi)?;
    guard(0.0, &v)?;
    let mut trajs = [Trajectory::new(&cfg.grid, stride), Trajectory::new(&cfg.grid, stride), Trajectory::new(&cfg.grid, stride)];
    let mut components = Vec::new();
    let mut store = |t: f64, phi: &Field, psi: &Field, v: &Field, trajs: &mut [Trajectory; 3]| -> Result<()> {
        trajs[0].push(t, phi.clone())?;
        trajs[1].push(t, psi.clone())?;
        trajs[2].push(t, v.clone())?;
        components.push((t, besov_norm(p, phi, ALPHA, &w, t)?, psi.weighted_sup(&rho)));
        Ok(())
    };
    store(0.0, &phi, &psi, &v, &mut trajs)?;
    let mut series = vec![record(p, cfg, &rho, 0.0, &v)?];
    let mut scales = Vec::with_capacity(steps);
    let mut total = 0;
    for n in 0..steps {
        let t0 = n as f64 * cfg.dt;
        let xn = &x.snapshots()[n];
        let (x2, x3) = wick_powers(xn, a);
        let m = substeps(cfg.dt, cfg.mu, v.sup_norm());
        total += m;
        let h = cfg.dt / m as f64;
        for s in 0..m {
            let t = t0 + s as f64 * h;
            let k = cfg.base + if cfg.adaptive { localizer_scale(v.weighted_sup(&rho)) } else { 0.0 };
            if s == 0 {
                scales.push(k);
            }
            let lx = loc.with_base(k);
            let lx2 = loc.with_base(k / 2.0);
            let xp = (lx.above_at(xn, t)?, lx.below_at(xn, t)?);
            let x2p = (lx2.above_at(&x2, t)?, lx2.below_at(&x2, t)?);
            let f = split_forcing(p, (xn, &xp.0, &xp.1), (&x2, &x2p.0, &x2p.1), &x3, &phi, &psi)?;
            let stepper = st.get(m)?;
            let psi_force = psi.zip_map(&f.psi, |s, g| -(s * s * s + g))?;
            phi = stepper.step(&phi, &f.phi.scale(-1.0));
            psi = stepper.step(&psi, &psi_force);
            v = phi.add(&psi)?;
        }
        let t = (n + 1) as f64 * cfg.dt;
        guard(t, &v)?;
        series.push(record(p, cfg, &rho, t, &v)?);
        if (n + 1) % stride == 0 || n + 1 == steps {
            store(t, &phi, &psi, &v, &mut trajs)?;
        }
    }
    let [phi_t, psi_t, total_t] = trajs;
    Ok(SplitRun { phi: phi_t, psi: psi_t, total: total_t, series, components, scales, substeps: total, a })
}

/// `max_t |f(t) - g(t)|_inf` over common snapshots.
pub(crate) fn sup_distance(f: &Trajectory, g: &Trajectory) -> Result<f64> {
    if !f.same_mesh(g) {
        return Err(Error::GridMismatch("trajectories are stored on different meshes"));
    }
    let mut d: f64 = 0.0;
    for (a, b) in f.snapshots().iter().zip(g.snapshots()) {
        d = d.max(a.sub(b)?.sup_norm());
    }
    Ok(d)
}

pub(crate) fn sup_over_time(f: &Trajectory) -> f64 {
    f.snapshots().iter().map(Field::sup_norm).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub l_values: Vec<f64>,
    /// `discrepancy[i][j] = max_t |v_i - v_j|_inf / scale`.
    pub discrepancy: Vec<Vec<f64>>,
    pub scale: f64,
    pub max: f64,
}

/// Reruns the split system with fixed localizer bases and compares the totals `phi + psi`.
pub fn uniqueness_probe(
    p: &DyadicPartition,
    x: &Trajectory,
    a: f64,
    phi0: &Field,
    cfg: &SolverConfig,
    l_values: &[f64],
) -> Result<ProbeReport> {
    let zero = Field::zeros(&cfg.grid);
    let runs: Vec<Trajectory> = l_values
        .iter()
        .map(|&l| {
            let c = SolverConfig { base: l, adaptive: false, ..cfg.clone() };
            solve_phi42_split(p, x, a, phi0, &zero, &c).map(|r| r.total)
        })
        .collect::<Result<_>>()?;
    let scale = runs.iter().map(sup_over_time).fold(0.0, f64::max);
    let k = runs.len();
    let mut discrepancy = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = if scale > 0.0 { sup_distance(&runs[i], &runs[j])? / scale } else { 0.0 };
            discrepancy[i][j] = d;
            discrepancy[j][i] = d;
        }
    }
    let max = discrepancy.iter().flatten().cloned().fold(0.0, f64::max);
    Ok(ProbeReport { l_values: l_values.to_vec(), discrepancy, scale, max })
}
