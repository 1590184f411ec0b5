//! Large initial data: preparation of `(phi_0, psi_0)` and the collapse of the sup-norm series.

use rayon::prelude::*;

use super::parabolic::solve_phi42_split;
use super::SolverConfig;
use crate::error::{param, Result};
use crate::grid::{Field, Trajectory};
use crate::lp::{besov_norm, DyadicPartition, Weight};
use crate::para::Localizer;
use crate::stochastic::{sample_x_elliptic, Cutoff, NoiseSpec};

#[derive(Clone, Debug)]
pub struct PreparedData {
    pub phi0: Field,
    pub psi0: Field,
    /// Localizer base `L` with `2^{eps L} = |phi_0|_{C^{-1+eps}(rho^{1+eps})}` (0 if that is below 1).
    pub base: f64,
}

/// `phi_0 := U_> rough - X_0`, `psi_0 := U_<= rough`, so that `phi_0 + psi_0 = rough - X_0`.
pub fn prepare_coming_down_ic(
    p: &DyadicPartition,
    rough: &Field,
    x0: &Field,
    eps: f64,
    w: &Weight,
) -> Result<PreparedData> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(param("eps", format!("eps must lie in (0, 1), got {eps}")));
    }
    let norm = besov_norm(p, rough, -1.0 + eps, &w.pow(1.0 + eps), 0.0)?;
    let base = if norm > 1.0 { norm.log2() / eps } else { 0.0 };
    let loc = Localizer::new(p, w, base)?;
    let phi0 = loc.above(rough)?.sub(x0)?;
    let psi0 = loc.below(rough)?;
    Ok(PreparedData { phi0, psi0, base })
}

/// Physical wavenumber above which [`random_profile`] has no content.
pub const PROFILE_WAVENUMBER: f64 = 2.0;

/// A smooth random profile with sup norm 1, shared across magnitudes: `offset + zeta` rescaled,
/// where `zeta` is the elliptic free field restricted to `|k| <= PROFILE_WAVENUMBER`, centered
/// and normalized to sup norm 1.
pub fn random_profile(p: &DyadicPartition, seed: u64, offset: f64) -> Result<Field> {
    let g = p.grid();
    let x = sample_x_elliptic(&NoiseSpec::spatial(seed, g), 1.0, Cutoff::ball(g))?;
    let mask: Vec<f64> =
        g.k2().iter().map(|&k2| if k2 <= PROFILE_WAVENUMBER * PROFILE_WAVENUMBER { 1.0 } else { 0.0 }).collect();
    let zeta = x.fft().multiply(&mask).ifft();
    let mean = zeta.mean();
    let zeta = zeta.map(|v| v - mean);
    let s = zeta.sup_norm();
    let zeta = if s > 0.0 { zeta.scale(1.0 / s) } else { zeta };
    let f = zeta.map(|v| v + offset);
    let s = f.sup_norm();
    Ok(if s > 0.0 { f.scale(1.0 / s) } else { f })
}

#[derive(Clone, Debug)]
pub struct ComingDownReport {
    pub magnitudes: Vec<f64>,
    pub times: Vec<f64>,
    /// `s_m(t) = |(phi + psi)(t)|_{L^inf(rho)}` per magnitude, at every step.
    pub series: Vec<Vec<f64>>,
    /// `max_m s_m(t) / min_m s_m(t)`.
    pub spread: Vec<f64>,
    /// First time after which the spread stays `<= collapse_factor`.
    pub t_star: Option<f64>,
    pub collapse_factor: f64,
    /// `C` fitted on the largest magnitude: `max_{t > 0} s(t) / (1 + t^{-1/2})`.
    pub envelope_c: f64,
    /// `max_{m, t > 0} s_m(t) / (C (1 + t^{-1/2}))`; at most 1 when the envelope holds.
    pub envelope_ratio: f64,
    pub bases: Vec<f64>,
    /// `|phi_0 + X_0|_{C^{-1}(rho)}` per magnitude.
    pub prepared_norms: Vec<f64>,
}

impl ComingDownReport {
    pub fn collapsed_by(&self, t: f64) -> bool {
        self.t_star.is_some_and(|s| s <= t)
    }

    pub fn envelope_holds(&self) -> bool {
        self.envelope_ratio <= 1.0 + 1e-12
    }
}

fn envelope(t: f64) -> f64 {
    1.0 + t.powf(-0.5)
}

/// Runs the split solver from `m g` for every magnitude `m`, all driven by the same noise `x`.
pub fn coming_down_experiment(
    p: &DyadicPartition,
    x: &Trajectory,
    a: f64,
    profile: &Field,
    magnitudes: &[f64],
    eps: f64,
    cfg: &SolverConfig,
) -> Result<ComingDownReport> {
    if magnitudes.is_empty() {
        return Err(param("magnitudes", "at least one magnitude is needed"));
    }
    let w = cfg.weight();
    let x0 = x.snapshots().first().ok_or_else(|| param("X", "noise trajectory is empty"))?;
    let runs: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = magnitudes
        .par_iter()
        .map(|&m| -> Result<_> {
            let rough = profile.scale(m);
            let prep = prepare_coming_down_ic(p, &rough, x0, eps, &w)?;
            let prepared = besov_norm(p, &prep.phi0.add(x0)?, -1.0, &w, 0.0)?;
            let run = solve_phi42_split(p, x, a, &prep.phi0, &prep.psi0, cfg)?;
            let times = run.series.iter().map(|r| r.t).collect();
            let s = run.series.iter().map(|r| r.weighted_sup).collect();
            Ok((times, s, prep.base, prepared))
        })
        .collect::<Result<_>>()?;
    let times = runs[0].0.clone();
    let series: Vec<Vec<f64>> = runs.iter().map(|r| r.1.clone()).collect();
    let spread: Vec<f64> = (0..times.len())
        .map(|i| {
            let hi = series.iter().map(|s| s[i]).fold(f64::MIN, f64::max);
            let lo = series.iter().map(|s| s[i]).fold(f64::MAX, f64::min);
            if hi == lo {
                1.0
            } else if lo > 0.0 {
                hi / lo
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let collapse_factor = 2.0;
    let mut t_star = None;
    for i in (0..times.len()).rev() {
        if spread[i] > collapse_factor {
            break;
        }
        t_star = Some(times[i]);
    }
    let largest = magnitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    let envelope_c = times
        .iter()
        .zip(&series[largest])
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, s)| s / envelope(*t))
        .fold(0.0, f64::max);
    let envelope_ratio = series
        .iter()
        .flat_map(|s| times.iter().zip(s).filter(|(t, _)| **t > 0.0).map(|(t, v)| v / (envelope_c * envelope(*t))))
        .fold(0.0, f64::max);
    Ok(ComingDownReport {
        magnitudes: magnitudes.to_vec(),
        times,
        series,
        spread,
        t_star,
        collapse_factor,
        envelope_c,
        envelope_ratio,
        bases: runs.iter().map(|r| r.2).collect(),
        prepared_norms: runs.iter().map(|r| r.3).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    fn setup() -> (TorusGrid, DyadicPartition) {
        let g = TorusGrid::new(2, std::f64::consts::TAU, 16).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        (g, p)
    }

    #[test]
    fn zero_input_prepares_zero() {
        let (g, p) = setup();
        let z = Field::zeros(&g);
        let d = prepare_coming_down_ic(&p, &z, &z, 0.5, &Weight::PolySpace(1.0)).unwrap();
        assert_eq!(d.base, 0.0);
        assert_eq!(d.phi0.sup_norm() + d.psi0.sup_norm(), 0.0);
    }

    #[test]
    fn preparation_reconstructs_and_is_uniform() {
        let (g, p) = setup();
        let w = Weight::PolySpace(1.0);
        let rough = random_profile(&p, 9, 0.0).unwrap();
        let x0 = sample_x_elliptic(&NoiseSpec::spatial(10, &g), 1.0, Cutoff::ball(&g)).unwrap();
        let mut norms = Vec::new();
        for m in [1.0, 100.0] {
            let r = rough.scale(m);
            let d = prepare_coming_down_ic(&p, &r, &x0, 0.5, &w).unwrap();
            let back = d.phi0.add(&d.psi0).unwrap().add(&x0).unwrap();
            assert!(back.sub(&r).unwrap().sup_norm() < 1e-11 * m);
            norms.push(besov_norm(&p, &d.phi0.add(&x0).unwrap(), -1.0, &w, 0.0).unwrap());
        }
        assert!(norms[1] < 3.0 * norms[0].max(1e-300) || norms[1] < 1e-12, "{norms:?}");
        assert!(prepare_coming_down_ic(&p, &rough, &x0, 1.0, &w).is_err());
    }

    #[test]
    fn single_magnitude_is_collapsed() {
        let (g, p) = setup();
        let mut cfg = SolverConfig::new(&g, 1.0);
        cfg.dt = 0.01;
        cfg.horizon = 0.1;
        let times = (0..=cfg.steps()).map(|n| n as f64 * cfg.dt).collect();
        let x = Trajectory::from_parts(times, vec![Field::zeros(&g); cfg.steps() + 1]).unwrap();
        let prof = random_profile(&p, 1, 2.0).unwrap();
        let r = coming_down_experiment(&p, &x, 0.0, &prof, &[1.0], 0.5, &cfg).unwrap();
        assert_eq!(r.t_star, Some(0.0));
        assert!(r.envelope_holds());
    }
}
