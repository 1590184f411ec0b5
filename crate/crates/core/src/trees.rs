//! Higher-order stochastic objects built from the free field: `Y3`, `Y2` and the resonant trees.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};
use crate::grid::{Field, SpectralField, TorusGrid, Trajectory};
use crate::lp::DyadicPartition;
use crate::para::para_res;
use crate::solvers::ExpEuler;
use crate::stochastic::{
    mean_and_se, sample_x_elliptic_modes, wick_constant_elliptic, wick_constant_parabolic, wick_powers, Cutoff,
    NoiseSpec, OuProcess,
};

/// Names of the stochastic objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    X,
    X2,
    X3,
    Y3,
    Y2,
    /// `Y3 o X`.
    Y3X,
    /// `Y2 o [[X^2]] - b/3`.
    Y2X2,
    /// `Y3 o [[X^2]] - b X`.
    Y3X2,
}

impl Symbol {
    pub const ALL: [Symbol; 8] =
        [Symbol::X, Symbol::X2, Symbol::X3, Symbol::Y3, Symbol::Y2, Symbol::Y3X, Symbol::Y2X2, Symbol::Y3X2];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::X => "X",
            Symbol::X2 => "X2",
            Symbol::X3 => "X3",
            Symbol::Y3 => "Y3",
            Symbol::Y2 => "Y2",
            Symbol::Y3X => "Y3oX",
            Symbol::Y2X2 => "Y2oX2",
            Symbol::Y3X2 => "Y3oX2",
        }
    }

    /// Regularity exponent in the five-dimensional elliptic / three-dimensional parabolic setting.
    pub fn alpha(self, kappa: f64) -> f64 {
        match self {
            Symbol::X => -0.5 - kappa,
            Symbol::X2 => -1.0 - kappa,
            Symbol::X3 => -1.5 - kappa,
            Symbol::Y3 => 0.5 - kappa,
            Symbol::Y2 => 1.0 - kappa,
            Symbol::Y3X | Symbol::Y2X2 => -kappa,
            Symbol::Y3X2 => -0.5 - kappa,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Symbol::ALL
            .into_iter()
            .find(|sym| sym.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| param("symbol", format!("unknown symbol `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeDomain {
    /// `Q Y = [[X^n]]` in five dimensions.
    EllipticD5,
    /// `L Y = [[X^n]]`, `Y(0) = 0`, in three dimensions.
    ParabolicD3,
}

impl TreeDomain {
    pub fn dimension(self) -> usize {
        match self {
            TreeDomain::EllipticD5 => 5,
            TreeDomain::ParabolicD3 => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    pub mu: f64,
    pub cutoff: Cutoff,
    /// Parabolic horizon `T`.
    pub horizon: f64,
    pub dt: f64,
    /// Record every `stride`-th step (parabolic); the final time is always recorded.
    pub stride: usize,
    /// Build the resonant trees (needed for `b`, skipped for pure regularity runs).
    pub resonant: bool,
}

/// Raw objects of one sample; resonant trees are not yet centred.
#[derive(Clone, Debug)]
pub struct TreeSample {
    pub a: f64,
    /// `(t, objects)` at each recorded time; the last entry is the final time.
    pub records: Vec<(f64, BTreeMap<Symbol, Field>)>,
}

impl TreeSample {
    pub fn last(&self) -> &BTreeMap<Symbol, Field> {
        &self.records.last().expect("at least one record").1
    }
}

fn resonant(p: &DyadicPartition, out: &mut BTreeMap<Symbol, Field>, x: &Field, x2: &Field, y3: &Field, y2: &Field) -> Result<()> {
    out.insert(Symbol::Y3X, para_res(p, y3, x)?);
    out.insert(Symbol::Y2X2, para_res(p, y2, x2)?);
    out.insert(Symbol::Y3X2, para_res(p, y3, x2)?);
    Ok(())
}

/// Draws one sample of every object for `domain`.
pub fn tree_sample(p: &DyadicPartition, domain: TreeDomain, seed: u64, params: &TreeParams) -> Result<TreeSample> {
    let grid = p.grid();
    if grid.d() != domain.dimension() {
        return Err(Error::GridMismatch("grid dimension does not match the tree domain"));
    }
    let mu = params.mu;
    match domain {
        TreeDomain::EllipticD5 => {
            let a = wick_constant_elliptic(grid, mu, params.cutoff)?;
            let x = sample_x_elliptic_modes(&NoiseSpec::spatial(seed, grid), mu, params.cutoff)?.ifft();
            let (x2, x3) = wick_powers(&x, a);
            let inv = |f: &Field| f.fft().map_k2(|q| 1.0 / (mu + q)).ifft();
            let y3 = inv(&x3);
            let y2 = inv(&x2);
            let mut m = BTreeMap::new();
            if params.resonant {
                resonant(p, &mut m, &x, &x2, &y3, &y2)?;
            }
            m.insert(Symbol::X, x);
            m.insert(Symbol::X2, x2);
            m.insert(Symbol::X3, x3);
            m.insert(Symbol::Y3, y3);
            m.insert(Symbol::Y2, y2);
            Ok(TreeSample { a, records: vec![(0.0, m)] })
        }
        TreeDomain::ParabolicD3 => {
            if !(params.horizon >= 0.0) {
                return Err(param("T", "horizon must be non-negative"));
            }
            let a = wick_constant_parabolic(grid, mu, params.cutoff)?;
            let mut ou = OuProcess::new(&NoiseSpec::spacetime(seed, grid, params.dt), mu, params.cutoff)?;
            let steps = (params.horizon / params.dt).round() as usize;
            let stride = params.stride.max(1);
            let stepper = ExpEuler::new(grid, params.dt, mu)?;
            let mut y3 = SpectralField::zeros(grid);
            let mut y2 = SpectralField::zeros(grid);
            let mut records = Vec::new();
            for n in 0..=steps {
                let x = ou.field();
                let (x2, x3) = wick_powers(&x, a);
                if n % stride == 0 || n == steps {
                    let mut m = BTreeMap::new();
                    let (y3f, y2f) = (y3.ifft(), y2.ifft());
                    if params.resonant {
                        resonant(p, &mut m, &x, &x2, &y3f, &y2f)?;
                    }
                    m.insert(Symbol::X, x.clone());
                    m.insert(Symbol::X2, x2.clone());
                    m.insert(Symbol::Y3, y3f);
                    m.insert(Symbol::Y2, y2f);
                    records.push((ou.time(), m));
                }
                if n == steps {
                    break;
                }
                stepper.advance(&mut y3, &x3.fft());
                stepper.advance(&mut y2, &x2.fft());
                ou.advance();
            }
            Ok(TreeSample { a, records })
        }
    }
}

/// Monte-Carlo estimate of `b = 3 E[(Y2 o [[X^2]])(0)]` at each recorded time.
///
/// Spatial means of each sample are used as the per-sample estimate (stationarity in space).
#[derive(Clone, Debug)]
pub struct BEstimate {
    /// `(t, b, standard error)`.
    pub series: Vec<(f64, f64, f64)>,
}

impl BEstimate {
    pub fn at_end(&self) -> (f64, f64) {
        let last = self.series.last().expect("non-empty series");
        (last.1, last.2)
    }

    pub fn at(&self, record: usize) -> f64 {
        self.series[record].1
    }
}

pub fn estimate_b(samples: &[TreeSample]) -> Result<BEstimate> {
    let first = samples.first().ok_or_else(|| param("ensemble", "empty ensemble"))?;
    let mut series = Vec::new();
    for (r, (t, _)) in first.records.iter().enumerate() {
        let vals: Vec<f64> = samples
            .iter()
            .map(|s| {
                s.records[r]
                    .1
                    .get(&Symbol::Y2X2)
                    .map(|f| 3.0 * f.mean())
                    .ok_or_else(|| Error::Unavailable("resonant trees were not built".into()))
            })
            .collect::<Result<_>>()?;
        let (b, se) = mean_and_se(&vals);
        series.push((*t, b, se));
    }
    Ok(BEstimate { series })
}

/// Renormalized objects of one sample.
#[derive(Clone, Debug)]
pub struct WickData {
    pub a: f64,
    pub b: Option<BEstimate>,
    pub objects: BTreeMap<Symbol, Field>,
    /// Recorded history of every object (parabolic case), empty otherwise.
    pub trajectories: BTreeMap<Symbol, Trajectory>,
}

fn centre(objects: &mut BTreeMap<Symbol, Field>, b: f64) -> Result<()> {
    if let Some(f) = objects.get_mut(&Symbol::Y2X2) {
        *f = f.map(|v| v - b / 3.0);
    }
    let x = objects.get(&Symbol::X).cloned();
    if let (Some(f), Some(x)) = (objects.get_mut(&Symbol::Y3X2), x) {
        f.axpy(-b, &x)?;
    }
    Ok(())
}

/// Subtracts `b/3` and `b X` from the resonant trees of `sample`.
pub fn renormalize(sample: &TreeSample, b: Option<&BEstimate>) -> Result<WickData> {
    let mut records = sample.records.clone();
    if let Some(b) = b {
        if b.series.len() != records.len() {
            return Err(Error::GridMismatch("b series and sample records differ in length"));
        }
        for (r, (_, objs)) in records.iter_mut().enumerate() {
            centre(objs, b.at(r))?;
        }
    }
    let mut trajectories = BTreeMap::new();
    if records.len() > 1 {
        for sym in records[0].1.keys() {
            let times = records.iter().map(|r| r.0).collect();
            let snaps = records.iter().map(|r| r.1[sym].clone()).collect();
            trajectories.insert(*sym, Trajectory::from_parts(times, snaps)?);
        }
    }
    let objects = records.pop().expect("at least one record").1;
    Ok(WickData { a: sample.a, b: b.cloned(), objects, trajectories })
}

/// `X`, `[[X^2]]` and `[[X^3]]` of the elliptic free field in any dimension; `a = 0` gives raw powers.
pub fn wick_data_elliptic(grid: &TorusGrid, seed: u64, mu: f64, cutoff: Cutoff, renormalize: bool) -> Result<WickData> {
    let a = if renormalize { wick_constant_elliptic(grid, mu, cutoff)? } else { 0.0 };
    let x = sample_x_elliptic_modes(&NoiseSpec::spatial(seed, grid), mu, cutoff)?.ifft();
    let (x2, x3) = wick_powers(&x, a);
    let objects = BTreeMap::from([(Symbol::X, x), (Symbol::X2, x2), (Symbol::X3, x3)]);
    Ok(WickData { a, b: None, objects, trajectories: BTreeMap::new() })
}

/// Builds `count` samples with seeds `seed, seed+1, ...`, estimates `b` when resonant trees are on,
/// and returns the renormalized data of every sample.
pub fn tree_objects(
    p: &DyadicPartition,
    domain: TreeDomain,
    seed: u64,
    count: usize,
    params: &TreeParams,
) -> Result<(Vec<WickData>, Option<BEstimate>)> {
    let samples: Vec<TreeSample> =
        (0..count as u64).map(|i| tree_sample(p, domain, seed.wrapping_add(i), params)).collect::<Result<_>>()?;
    let b = if params.resonant { Some(estimate_b(&samples)?) } else { None };
    let data = samples.iter().map(|s| renormalize(s, b.as_ref())).collect::<Result<_>>()?;
    Ok((data, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn symbol_names_round_trip() {
        for s in Symbol::ALL {
            assert_eq!(s.name().parse::<Symbol>().unwrap(), s);
        }
        assert!("Z".parse::<Symbol>().is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let g = TorusGrid::new(2, 1.0, 8).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let params = TreeParams { mu: 1.0, cutoff: Cutoff::ball(&g), horizon: 0.1, dt: 0.01, stride: 1, resonant: false };
        assert!(tree_sample(&p, TreeDomain::ParabolicD3, 1, &params).is_err());
    }

    #[test]
    fn parabolic_trees_start_at_zero() {
        let g = TorusGrid::new(3, 1.0, 8).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let params = TreeParams { mu: 1.0, cutoff: Cutoff::ball(&g), horizon: 0.02, dt: 0.01, stride: 1, resonant: true };
        let s = tree_sample(&p, TreeDomain::ParabolicD3, 3, &params).unwrap();
        assert_eq!(s.records.len(), 3);
        assert_eq!(s.records[0].1[&Symbol::Y3].sup_norm(), 0.0);
        assert!(s.records[2].1[&Symbol::Y3].sup_norm() > 0.0);
        assert!(!s.last().contains_key(&Symbol::X3));
        let (data, b) = tree_objects(&p, TreeDomain::ParabolicD3, 3, 2, &params).unwrap();
        assert_eq!(b.unwrap().series.len(), 3);
        assert_eq!(data[0].trajectories[&Symbol::X].len(), 3);
    }

    #[test]
    fn elliptic_trees_invert_q() {
        let g = TorusGrid::new(5, 1.0, 8).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let params = TreeParams { mu: 2.0, cutoff: Cutoff::ball(&g), horizon: 0.0, dt: 1.0, stride: 1, resonant: false };
        let s = tree_sample(&p, TreeDomain::EllipticD5, 1, &params).unwrap();
        let m = s.last();
        let back = crate::grid::apply_q(&m[&Symbol::Y3], 2.0);
        assert!(back.sub(&m[&Symbol::X3]).unwrap().sup_norm() < 1e-10 * m[&Symbol::X3].sup_norm());
    }
}
