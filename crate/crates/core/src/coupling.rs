//! Coupled resolutions: the same per-mode randomness drives every grid, so objects at `N` and `2N`
//! can be compared after zero-padding the coarse one.

use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};
use crate::grid::{Field, TorusGrid, Trajectory};
use crate::lp::{besov_norm, l2_besov_norm, DyadicPartition, Weight};
use crate::solvers::{solve_phi42_monolithic, SolverConfig};
use crate::stochastic::{
    prolong, sample_x_elliptic, sample_x_parabolic, wick_constant_elliptic, wick_constant_parabolic, wick_powers,
    Cutoff, NoiseSpec,
};

/// Free field driving the coupled objects.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FreeField {
    /// `Q X = xi` with space white noise.
    Elliptic,
    /// Stationary `L X = xi`, observed at `horizon` after steps of `dt`.
    Parabolic { horizon: f64, dt: f64 },
}

/// Objects available for coupled comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledSymbol {
    X,
    /// `X^2 - a_N`.
    Wick2,
    /// `X^2` without the counterterm.
    RawSquare,
    /// Parabolic solution trajectory `v` from `v(0) = 0`, renormalized.
    Solution,
    /// The same trajectory driven by raw powers.
    RawSolution,
}

impl CoupledSymbol {
    pub fn name(self) -> &'static str {
        match self {
            CoupledSymbol::X => "X",
            CoupledSymbol::Wick2 => "X2",
            CoupledSymbol::RawSquare => "X2raw",
            CoupledSymbol::Solution => "v",
            CoupledSymbol::RawSolution => "vraw",
        }
    }

    pub fn is_trajectory(self) -> bool {
        matches!(self, CoupledSymbol::Solution | CoupledSymbol::RawSolution)
    }
}

impl fmt::Display for CoupledSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoupledSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" => Ok(CoupledSymbol::X),
            "X2" => Ok(CoupledSymbol::Wick2),
            "X2raw" => Ok(CoupledSymbol::RawSquare),
            "v" => Ok(CoupledSymbol::Solution),
            "vraw" => Ok(CoupledSymbol::RawSolution),
            other => Err(Error::Unavailable(format!("no coupled object named {other}"))),
        }
    }
}

/// Samples `symbol` on `grid`; the ball cutoff `|kappa| < N/2` plays the role of the mollifier.
///
/// For the solution symbols this is the final snapshot of [`coupled_solution`].
pub fn coupled_sample(field: FreeField, symbol: CoupledSymbol, grid: &TorusGrid, seed: u64, mu: f64) -> Result<Field> {
    if symbol.is_trajectory() {
        let traj = coupled_solution(field, symbol, grid, seed, mu)?;
        return traj.last().cloned().ok_or_else(|| param("T", "empty trajectory"));
    }
    let cutoff = Cutoff::ball(grid);
    let (x, a) = match field {
        FreeField::Elliptic => {
            (sample_x_elliptic(&NoiseSpec::spatial(seed, grid), mu, cutoff)?, wick_constant_elliptic(grid, mu, cutoff)?)
        }
        FreeField::Parabolic { horizon, dt } => {
            let traj = sample_x_parabolic(&NoiseSpec::spacetime(seed, grid, dt), mu, horizon, cutoff, usize::MAX)?;
            let last = traj.last().cloned().ok_or_else(|| param("T", "empty trajectory"))?;
            (last, wick_constant_parabolic(grid, mu, cutoff)?)
        }
    };
    Ok(match symbol {
        CoupledSymbol::X => x,
        CoupledSymbol::Wick2 => wick_powers(&x, a).0,
        CoupledSymbol::RawSquare => wick_powers(&x, 0.0).0,
        CoupledSymbol::Solution | CoupledSymbol::RawSolution => unreachable!("handled above"),
    })
}

/// Monolithic `d = 2` solution from `v(0) = 0` driven by the coupled parabolic free field, with
/// snapshots every `ceil(T / (100 dt))` steps.
pub fn coupled_solution(field: FreeField, symbol: CoupledSymbol, grid: &TorusGrid, seed: u64, mu: f64) -> Result<Trajectory> {
    let FreeField::Parabolic { horizon, dt } = field else {
        return Err(Error::Unavailable(format!("{symbol} needs the parabolic free field")));
    };
    if !symbol.is_trajectory() {
        return Err(Error::Unavailable(format!("{symbol} is not a trajectory")));
    }
    let p = DyadicPartition::new(grid)?;
    let mut cfg = SolverConfig::new(grid, mu);
    cfg.dt = dt;
    cfg.horizon = horizon;
    cfg.renormalize = symbol == CoupledSymbol::Solution;
    let cutoff = Cutoff::ball(grid);
    let x = sample_x_parabolic(&NoiseSpec::spacetime(seed, grid, dt), mu, horizon, cutoff, 1)?;
    let a = wick_constant_parabolic(grid, mu, cutoff)?;
    Ok(solve_phi42_monolithic(&p, &x, a, &Field::zeros(grid), &cfg)?.solution)
}

/// Integrability of the Besov norm used for distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BesovKind {
    /// `sup_j 2^{j alpha} |w Delta_j f|_inf`.
    Sup,
    /// `(sum_j 2^{2 j alpha} |w Delta_j f|_{L^2}^2)^{1/2}`; free of the extreme-value growth of the sup.
    #[default]
    L2,
}

impl BesovKind {
    pub fn norm(self, p: &DyadicPartition, f: &Field, alpha: f64, w: &Weight) -> Result<f64> {
        match self {
            BesovKind::Sup => besov_norm(p, f, alpha, w, 0.0),
            BesovKind::L2 => l2_besov_norm(p, f, alpha, w, 0.0),
        }
    }
}

/// `|prolong(coarse) - fine|` in the weighted Besov norm of exponent `alpha` on the fine grid.
pub fn coupled_distance(coarse: &Field, fine: &Field, alpha: f64, w: &Weight, kind: BesovKind) -> Result<f64> {
    let p = DyadicPartition::new(fine.grid())?;
    let diff = prolong(coarse, fine.grid())?.sub(fine)?;
    kind.norm(&p, &diff, alpha, w)
}

/// `max_t` of [`coupled_distance`] over the common snapshots.
pub fn coupled_trajectory_distance(
    coarse: &Trajectory,
    fine: &Trajectory,
    alpha: f64,
    w: &Weight,
    kind: BesovKind,
) -> Result<f64> {
    if coarse.times() != fine.times() {
        return Err(Error::GridMismatch("coupled trajectories must share their snapshot times"));
    }
    let mut d: f64 = 0.0;
    for (c, f) in coarse.snapshots().iter().zip(fine.snapshots()) {
        d = d.max(coupled_distance(c, f, alpha, w, kind)?);
    }
    Ok(d)
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub symbol: CoupledSymbol,
    pub resolutions: Vec<usize>,
    /// Exponent of the distance norm.
    pub alpha: f64,
    /// Seed-averaged distance between consecutive resolutions.
    pub distances: Vec<f64>,
    /// Seed-averaged `|tau_N|_inf` at each resolution (maximal over time for trajectories).
    pub sup_norms: Vec<f64>,
    /// Seed-averaged `|Delta_{-1} tau_N|_inf`, the large-scale part (maximal over time for trajectories).
    pub low_norms: Vec<f64>,
}

impl ConvergenceReport {
    pub fn decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    pub fn norms_increasing(&self) -> bool {
        self.sup_norms.windows(2).all(|w| w[1] > w[0])
    }

    pub fn low_norms_increasing(&self) -> bool {
        self.low_norms.windows(2).all(|w| w[1] > w[0])
    }
}

/// Distances `|tau_{N_{i+1}} - tau_{N_i}|_{C^alpha(w)}` along `resolutions`, averaged over `seeds`.
///
/// For trajectories the distance is the maximum over the common snapshot times.
#[allow(clippy::too_many_arguments)]
pub fn coupled_convergence(
    field: FreeField,
    symbol: CoupledSymbol,
    d: usize,
    m: f64,
    resolutions: &[usize],
    mu: f64,
    seeds: &[u64],
    alpha: f64,
    w: &Weight,
    kind: BesovKind,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 2 || resolutions.windows(2).any(|r| r[1] <= r[0]) {
        return Err(param("N", "need at least two increasing resolutions"));
    }
    if seeds.is_empty() {
        return Err(param("seed", "need at least one seed"));
    }
    let grids: Vec<TorusGrid> = resolutions.iter().map(|&n| TorusGrid::new(d, m, n)).collect::<Result<_>>()?;
    let mut distances = vec![0.0; resolutions.len() - 1];
    let mut sup_norms = vec![0.0; resolutions.len()];
    let mut low_norms = vec![0.0; resolutions.len()];
    for &seed in seeds {
        let runs: Vec<Trajectory> = grids
            .iter()
            .map(|g| {
                if symbol.is_trajectory() {
                    coupled_solution(field, symbol, g, seed, mu)
                } else {
                    Trajectory::from_parts(vec![0.0], vec![coupled_sample(field, symbol, g, seed, mu)?])
                }
            })
            .collect::<Result<_>>()?;
        for (i, run) in runs.iter().enumerate() {
            let p = DyadicPartition::new(run.grid())?;
            let mut sup: f64 = 0.0;
            let mut low: f64 = 0.0;
            for s in run.snapshots() {
                sup = sup.max(s.sup_norm());
                low = low.max(p.block(s, -1)?.sup_norm());
            }
            sup_norms[i] += sup / seeds.len() as f64;
            low_norms[i] += low / seeds.len() as f64;
        }
        for i in 0..distances.len() {
            distances[i] += coupled_trajectory_distance(&runs[i], &runs[i + 1], alpha, w, kind)? / seeds.len() as f64;
        }
    }
    Ok(ConvergenceReport { symbol, resolutions: resolutions.to_vec(), alpha, distances, sup_norms, low_norms })
}
