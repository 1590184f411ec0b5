//! `Q psi + psi^3 + Psi = 0` by energy minimization, and the damped fixed point for `(phi, psi)`.

use super::{localizer_scale, split_forcing, SolverConfig, SplitForcing, ALPHA};
use crate::error::{param, Error, Result};
use crate::grid::{apply_q, helmholtz_solve, Field};
use crate::lp::{besov_norm, DyadicPartition, Weight};
use crate::para::Localizer;
use crate::trees::{Symbol, WickData};

fn dot(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// `I(u) = h^d sum [ u Q u / 2 + u^4 / 4 + Psi u ]`.
pub fn energy(u: &Field, forcing: &Field, mu: f64) -> Result<f64> {
    if u.grid() != forcing.grid() {
        return Err(Error::GridMismatch("energy operands differ"));
    }
    let qu = apply_q(u, mu);
    let s: f64 = u
        .values()
        .iter()
        .zip(qu.values())
        .zip(forcing.values())
        .map(|((u, q), f)| 0.5 * u * q + 0.25 * u.powi(4) + f * u)
        .sum();
    Ok(s * u.grid().cell_volume())
}

/// `Q u + u^3 + Psi`, the gradient of `I` for the pairing `h^d sum f g`.
pub fn energy_gradient(u: &Field, forcing: &Field, mu: f64) -> Result<Field> {
    apply_q(u, mu).zip_map(u, |q, u| q + u * u * u)?.add(forcing)
}

#[derive(Clone, Debug)]
pub struct MonotoneReport {
    pub solution: Field,
    pub iterations: usize,
    /// `|Q u + u^3 + Psi|_{l^2} / |Psi|_{l^2}`.
    pub residual: f64,
    /// Energy after each accepted step, starting from the initial guess.
    pub energies: Vec<f64>,
}

/// Preconditioned conjugate gradients for `(Q + 3 u^2) x = b`, started at zero.
fn newton_direction(u: &Field, rhs: &Field, mu: f64, rtol: f64) -> Result<Field> {
    let pot = u.map(|v| 3.0 * v * v);
    let shift = pot.mean();
    let apply = |x: &Field| -> Result<Field> { apply_q(x, mu).add(&x.mul(&pot)?) };
    let precond = |r: &Field| r.fft().map_k2(|q| 1.0 / (mu + shift + q)).ifft();
    let mut x = Field::zeros(u.grid());
    let mut r = rhs.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = rtol * rhs.ell2();
    for _ in 0..200 {
        if r.ell2() <= target {
            break;
        }
        let ap = apply(&p)?;
        let step = rz / dot(&p, &ap);
        x.axpy(step, &p)?;
        r.axpy(-step, &ap)?;
        z = precond(&r);
        let rz_new = dot(&r, &z);
        p = z.zip_map(&p, |z, p| z + rz_new / rz * p)?;
        rz = rz_new;
    }
    Ok(x)
}

/// Minimizes `I` by damped Newton steps with a `Q`-preconditioned inner solve.
pub fn solve_elliptic_monotone(forcing: &Field, mu: f64, tol: f64, max_iter: usize) -> Result<MonotoneReport> {
    solve_elliptic_monotone_from(forcing, mu, &Field::zeros(forcing.grid()), tol, max_iter)
}

pub fn solve_elliptic_monotone_from(
    forcing: &Field,
    mu: f64,
    init: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<MonotoneReport> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(param("mu", format!("mass must be positive, got {mu}")));
    }
    if init.grid() != forcing.grid() {
        return Err(Error::GridMismatch("initial guess and forcing grids differ"));
    }
    let scale = forcing.ell2();
    if scale == 0.0 {
        let zero = Field::zeros(forcing.grid());
        return Ok(MonotoneReport { solution: zero, iterations: 0, residual: 0.0, energies: vec![0.0] });
    }
    let mut u = init.clone();
    let mut e = energy(&u, forcing, mu)?;
    let mut energies = vec![e];
    let mut grad = energy_gradient(&u, forcing, mu)?;
    let mut residual = grad.ell2() / scale;
    let hd = forcing.grid().cell_volume();
    for it in 0..max_iter {
        if residual < tol {
            return Ok(MonotoneReport { solution: u, iterations: it, residual, energies });
        }
        let rtol = residual.sqrt().min(0.1);
        let delta = newton_direction(&u, &grad.scale(-1.0), mu, rtol)?;
        let slope = hd * dot(&grad, &delta);
        let mut s = 1.0;
        let accepted = loop {
            let trial = {
                let mut t = u.clone();
                t.axpy(s, &delta)?;
                t
            };
            let et = energy(&trial, forcing, mu)?;
            if et <= e + 1e-4 * s * slope {
                break Some((trial, et));
            }
            // Energy differences below rounding: accept a full step that lowers the gradient.
            if s == 1.0 && (et - e).abs() <= 1e-13 * e.abs().max(hd) {
                let g = energy_gradient(&trial, forcing, mu)?;
                if g.ell2() < grad.ell2() {
                    break Some((trial, e.min(et)));
                }
            }
            s *= 0.5;
            if s < 1e-12 {
                break None;
            }
        };
        let Some((next, et)) = accepted else {
            return Err(Error::NoConvergence { iterations: it, residual });
        };
        u = next;
        e = et;
        energies.push(e);
        grad = energy_gradient(&u, forcing, mu)?;
        residual = grad.ell2() / scale;
    }
    if residual < tol {
        Ok(MonotoneReport { solution: u, iterations: max_iter, residual, energies })
    } else {
        Err(Error::NoConvergence { iterations: max_iter, residual })
    }
}

/// Maximum-principle bound `max |rho psi|^3 <= |rho^3 Psi|_inf + c |rho^3 psi|_inf`.
#[derive(Clone, Debug)]
pub struct MaxPrincipleReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `c = |mu| + |grad rho / rho|^2_inf + |Lap rho / rho|_inf`.
    pub constant: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks the weighted maximum principle for a solution of `Q psi + psi^3 + Psi = 0`.
///
/// The equation residual must be below `tol`; both signs of `psi` are covered.
pub fn check_max_principle(psi: &Field, forcing: &Field, mu: f64, w: &Weight, tol: f64) -> Result<MaxPrincipleReport> {
    let scale = forcing.ell2().max(psi.ell2());
    let residual = energy_gradient(psi, forcing, mu)?.ell2();
    if residual > tol * scale.max(f64::MIN_POSITIVE) {
        return Err(param("psi", format!("residual {residual:.3e} exceeds {tol:.1e} relative to {scale:.3e}")));
    }
    let (g, l) = w
        .log_derivative_bounds(psi.grid())
        .ok_or_else(|| param("weight", "maximum principle needs a spatial weight"))?;
    let constant = mu.abs() + g * g + l;
    let rho = w.eval(psi.grid(), 0.0);
    let rho_psi = psi.mul(&rho)?;
    let lhs = rho_psi.sup_norm().powi(3);
    let rho3 = rho.map(|r| r.powi(3));
    let rhs = forcing.weighted_sup(&rho3) + constant * psi.weighted_sup(&rho3);
    let slack = 1e-6 * rhs.max(lhs);
    Ok(MaxPrincipleReport { lhs, rhs, constant, slack, holds: lhs <= rhs + slack })
}

#[derive(Clone, Debug)]
pub struct Phi44Report {
    pub phi: Field,
    pub psi: Field,
    pub iterations: usize,
    /// `(|Q phi + Phi| + |Q psi + psi^3 + Psi|) / (|Phi| + |Psi| + |psi^3|)` in `l^2`.
    pub residual: f64,
    pub residuals: Vec<f64>,
    /// Localizer scale `K` at the end (`L = K` for `X`, `K / 2` for `[[X^2]]`).
    pub scale: f64,
    pub theta: f64,
    pub phi_holder: f64,
    pub psi_sup: f64,
    pub max_principle: MaxPrincipleReport,
}

fn object<'a>(w: &'a WickData, s: Symbol) -> Result<&'a Field> {
    w.objects.get(&s).ok_or_else(|| Error::Unavailable(format!("object {s} missing")))
}

/// Localized forcing at the iterate `(phi, psi)` with scale `k`.
fn elliptic_forcing(
    p: &DyadicPartition,
    loc: &Localizer,
    k: f64,
    objs: (&Field, &Field, &Field),
    phi: &Field,
    psi: &Field,
) -> Result<SplitForcing> {
    let (x, x2, x3) = objs;
    let lx = loc.with_base(k);
    let lx2 = loc.with_base(k / 2.0);
    let x_parts = (lx.above(x)?, lx.below(x)?);
    let x2_parts = (lx2.above(x2)?, lx2.below(x2)?);
    split_forcing(p, (x, &x_parts.0, &x_parts.1), (x2, &x2_parts.0, &x2_parts.1), x3, phi, psi)
}

const THETA_FLOOR: f64 = 1.0 / 64.0;
const ANDERSON_DEPTH: usize = 6;
const K_ADAPT_MAX: usize = 12;

/// Anderson mixing for `x = K(x)`: combines the last few iterates so that the update
/// also converges when `K` is expanding along a handful of directions.
struct Anderson {
    depth: usize,
    xs: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson { depth, xs: Vec::new(), gs: Vec::new() }
    }

    fn clear(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }

    /// Next iterate from `x` and the fixed-point defect `g = K(x) - x`, mixing with weight `theta`.
    fn next(&mut self, x: Vec<f64>, g: Vec<f64>, theta: f64) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + theta * b).collect();
        let m = self.xs.len();
        if m > 0 {
            // Differences against the current iterate; minimize |g - sum gamma_i dg_i|.
            let dx: Vec<Vec<f64>> = self.xs.iter().map(|xi| x.iter().zip(xi).map(|(a, b)| a - b).collect()).collect();
            let dg: Vec<Vec<f64>> = self.gs.iter().map(|gi| g.iter().zip(gi).map(|(a, b)| a - b).collect()).collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let mut a = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                for j in 0..=i {
                    a[i][j] = dot(&dg[i], &dg[j]);
                    a[j][i] = a[i][j];
                }
                rhs[i] = dot(&dg[i], &g);
            }
            let trace: f64 = (0..m).map(|i| a[i][i]).sum();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += 1e-10 * trace.max(f64::MIN_POSITIVE);
            }
            if let Some(gamma) = solve_dense(a, rhs) {
                for i in 0..m {
                    for (o, (x, g)) in out.iter_mut().zip(dx[i].iter().zip(&dg[i])) {
                        *o -= gamma[i] * (x + theta * g);
                    }
                }
            }
        }
        self.xs.push(x);
        self.gs.push(g);
        if self.xs.len() > self.depth {
            self.xs.remove(0);
            self.gs.remove(0);
        }
        out
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 || !a[piv][c].is_finite() {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Damped Picard iteration `(phi, psi) <- (1 - theta)(phi, psi) + theta K(phi, psi)`.
///
/// `K` solves `Q phi + Phi = 0` spectrally and `Q psi + psi^3 + Psi = 0` by energy minimization.
/// The scale `K` follows `|phi + psi|_{L^inf(rho)}` until it moves by less than 10%, then stays fixed.
pub fn solve_elliptic_phi44(p: &DyadicPartition, wick: &WickData, cfg: &SolverConfig) -> Result<Phi44Report> {
    cfg.validate()?;
    if p.grid() != &cfg.grid {
        return Err(Error::GridMismatch("partition and configuration grids differ"));
    }
    let objs = (object(wick, Symbol::X)?, object(wick, Symbol::X2)?, object(wick, Symbol::X3)?);
    let grid = p.grid();
    let w = cfg.weight();
    let rho = w.eval(grid, 0.0);
    let loc = Localizer::new(p, &w, cfg.base)?;
    let mu = cfg.mu;
    let inner_tol = (cfg.tol * 1e-2).max(1e-14);
    let mut phi = Field::zeros(grid);
    let mut psi = Field::zeros(grid);
    let mut k = cfg.base;
    let mut frozen = !cfg.adaptive;
    let mut theta = cfg.theta;
    let mut residuals = Vec::new();
    let mut prev = f64::INFINITY;
    let mut mixer = Anderson::new(ANDERSON_DEPTH);
    for it in 0..cfg.max_iter {
        let v = phi.add(&psi)?;
        let mut k_changed = false;
        if !frozen {
            // Non-decreasing, so the scale cannot oscillate between two iterates.
            let next = (cfg.base + localizer_scale(v.weighted_sup(&rho))).max(k);
            frozen = it >= K_ADAPT_MAX || (it > 0 && next - k <= 0.1 * k.abs().max(1e-12));
            k_changed = next != k;
            k = next;
        }
        let f = elliptic_forcing(p, &loc, k, objs, &phi, &psi)?;
        let r1 = apply_q(&phi, mu).add(&f.phi)?;
        let psi3 = psi.map(|v| v * v * v);
        let r2 = apply_q(&psi, mu).add(&psi3)?.add(&f.psi)?;
        let scale = f.phi.ell2() + f.psi.ell2() + psi3.ell2();
        let residual = if scale == 0.0 { 0.0 } else { (r1.ell2() + r2.ell2()) / scale };
        residuals.push(residual);
        if residual < cfg.tol && frozen {
            let mp = check_max_principle(&psi, &f.psi, mu, &w, cfg.tol.max(1e-6))?;
            let phi_holder = besov_norm(p, &phi, ALPHA, &w, 0.0)?;
            let psi_sup = psi.weighted_sup(&rho);
            return Ok(Phi44Report {
                phi,
                psi,
                iterations: it,
                residual,
                residuals,
                scale: k,
                theta,
                phi_holder,
                psi_sup,
                max_principle: mp,
            });
        }
        if residual > 2.0 * prev {
            theta = (theta * 0.5).max(THETA_FLOOR);
            mixer.clear();
        } else if residual < prev && theta < cfg.theta {
            theta = (theta * 1.25).min(cfg.theta);
        }
        if k_changed {
            mixer.clear();
        }
        prev = residual;
        let phi_new = helmholtz_solve(&f.phi, mu)?.scale(-1.0);
        let psi_new = match solve_elliptic_monotone_from(&f.psi, mu, &psi, inner_tol, 100) {
            Ok(r) => r.solution,
            Err(Error::NoConvergence { .. }) => solve_elliptic_monotone(&f.psi, mu, inner_tol, 200)?.solution,
            Err(e) => return Err(e),
        };
        let n = phi.values().len();
        let mut x = Vec::with_capacity(2 * n);
        x.extend_from_slice(phi.values());
        x.extend_from_slice(psi.values());
        let mut g = Vec::with_capacity(2 * n);
        g.extend(phi_new.values().iter().zip(phi.values()).map(|(a, b)| a - b));
        g.extend(psi_new.values().iter().zip(psi.values()).map(|(a, b)| a - b));
        let next = mixer.next(x, g, theta);
        phi = Field::from_vec(grid, next[..n].to_vec())?;
        psi = Field::from_vec(grid, next[n..].to_vec())?;
    }
    let residual = residuals.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence { iterations: cfg.max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::stochastic::Cutoff;
    use crate::trees::wick_data_elliptic;

    fn grid(d: usize, n: usize) -> TorusGrid {
        TorusGrid::new(d, std::f64::consts::TAU, n).unwrap()
    }

    #[test]
    fn constant_solutions() {
        let g = grid(2, 16);
        for (mu, c) in [(2.0, -3.0), (1.0, -2.0)] {
            let r = solve_elliptic_monotone(&Field::constant(&g, c), mu, 1e-12, 50).unwrap();
            for v in r.solution.values() {
                assert!((v - 1.0).abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = grid(2, 8);
        let r = solve_elliptic_monotone(&Field::zeros(&g), 1.0, 1e-10, 10).unwrap();
        assert_eq!(r.solution.sup_norm(), 0.0);
    }

    fn smooth_forcing(g: &TorusGrid) -> Field {
        Field::from_fn(g, |x| 3.0 * x[0].sin() * (2.0 * x[1]).cos() - 1.5 * (x[0] + x[1]).cos() + 0.4)
    }

    #[test]
    fn minimizer_and_energy_descent() {
        let g = grid(2, 32);
        let f = smooth_forcing(&g);
        let r = solve_elliptic_monotone(&f, 0.5, 1e-10, 100).unwrap();
        assert!(r.residual < 1e-10);
        for w in r.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{:?}", r.energies);
        }
        let e0 = energy(&r.solution, &f, 0.5).unwrap();
        for s in 0..5u64 {
            let d = Field::from_fn(&g, |x| 1e-3 * ((s + 1) as f64 * x[0]).sin() * (x[1] + s as f64).cos());
            let e1 = energy(&r.solution.add(&d).unwrap(), &f, 0.5).unwrap();
            assert!(e1 >= e0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = grid(2, 16);
        let f = smooth_forcing(&g);
        let u = Field::from_fn(&g, |x| (x[0] - x[1]).sin() + 0.3);
        let dir = Field::from_fn(&g, |x| (2.0 * x[0]).cos() * x[1].sin() + (x[0] - x[1]).sin() + 0.5);
        let grad = energy_gradient(&u, &f, 1.3).unwrap();
        let exact = g.cell_volume() * dot(&grad, &dir);
        let eps = 1e-4;
        let plus = energy(&u.add(&dir.scale(eps)).unwrap(), &f, 1.3).unwrap();
        let minus = energy(&u.sub(&dir.scale(eps)).unwrap(), &f, 1.3).unwrap();
        let fd = (plus - minus) / (2.0 * eps);
        assert!(((fd - exact) / exact).abs() < 1e-6, "{fd} {exact}");
    }

    #[test]
    fn max_principle_constant_case() {
        let g = grid(2, 8);
        let psi = Field::constant(&g, 1.0);
        let r = check_max_principle(&psi, &Field::constant(&g, -3.0), 2.0, &Weight::Constant, 1e-10).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 5.0);
        assert!(r.holds);
        let zero = check_max_principle(&Field::zeros(&g), &Field::zeros(&g), 1.0, &Weight::Constant, 1e-10).unwrap();
        assert!(zero.holds && zero.lhs == 0.0);
        assert!(check_max_principle(&Field::zeros(&g), &Field::constant(&g, 1.0), 1.0, &Weight::Constant, 1e-10).is_err());
    }

    #[test]
    fn fixed_point_with_zero_noise_is_zero() {
        let g = grid(4, 8);
        let p = DyadicPartition::new(&g).unwrap();
        let mut w = wick_data_elliptic(&g, 1, 1.0, Cutoff::ball(&g), true).unwrap();
        for f in w.objects.values_mut() {
            *f = Field::zeros(&g);
        }
        let cfg = SolverConfig::new(&g, 1.0);
        let r = solve_elliptic_phi44(&p, &w, &cfg).unwrap();
        assert_eq!(r.phi.sup_norm() + r.psi.sup_norm(), 0.0);
    }

    #[test]
    fn fixed_point_solves_full_equation() {
        let g = TorusGrid::new(4, 1.0, 8).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let w = wick_data_elliptic(&g, 5, 1.0, Cutoff::ball(&g), true).unwrap();
        let mut cfg = SolverConfig::new(&g, 1.0);
        cfg.tol = 1e-9;
        let r = solve_elliptic_phi44(&p, &w, &cfg).unwrap();
        assert!(r.max_principle.holds);
        // v = phi + psi solves Q v + [[X^3]] + 3 [[X^2]] v + 3 X v^2 + v^3 = 0.
        let v = r.phi.add(&r.psi).unwrap();
        let (x, x2, x3) = (&w.objects[&Symbol::X], &w.objects[&Symbol::X2], &w.objects[&Symbol::X3]);
        let mut res = apply_q(&v, 1.0).add(x3).unwrap();
        for i in 0..g.len() {
            let vv = v.values()[i];
            res.values_mut()[i] += 3.0 * x2.values()[i] * vv + 3.0 * x.values()[i] * vv * vv + vv.powi(3);
        }
        assert!(res.ell2() < 1e-7 * x3.ell2(), "{}", res.ell2() / x3.ell2());
    }
}
