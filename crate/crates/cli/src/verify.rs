//! Invariant suite behind `phi4lab verify`.

use std::fs;
use std::path::Path;

use phi4lab::grid::{apply_q, heat_step, helmholtz_solve};
use phi4lab::io::{decode_fld1, encode_fld1, ExperimentManifest};
use phi4lab::lp::interpolation_sides;
use phi4lab::para::{para_gt, para_lt, para_res, Localizer, SpaceTimeLocalizer};
use phi4lab::solvers::{check_max_principle, solve_elliptic_monotone, solve_phi42_monolithic, step_parabolic, SolverConfig};
use phi4lab::stochastic::{sample_space_white_noise, sample_x_elliptic, Cutoff, NoiseSpec};
use phi4lab::{DyadicPartition, Error, Field, Result, TorusGrid, Trajectory, Weight};

use crate::{Context, Outcome};

struct Suite {
    failures: usize,
}

impl Suite {
    /// Prints one line; `value` must not exceed `bound`.
    fn check(&mut self, name: &str, value: f64, bound: f64) {
        let ok = value <= bound;
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {value:.3e} (bound {bound:.1e})", if ok { "PASS" } else { "FAIL" });
    }

    fn flag(&mut self, name: &str, ok: bool, detail: &str) {
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn rel(a: &Field, b: &Field) -> Result<f64> {
    let scale = b.sup_norm().max(f64::MIN_POSITIVE);
    Ok(a.sub(b)?.sup_norm() / scale)
}

/// Parses the `--grid` value `d=2,N=32,M=6.28` into `(d, N, M)`.
pub fn parse_grid(text: &str) -> Result<(usize, usize, f64)> {
    let bad = |why: &str| Error::Config { key: "grid".into(), reason: format!("{why} in `{text}`") };
    let (mut d, mut n, mut m) = (None, None, None);
    for part in text.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match k.trim() {
            "d" => d = Some(v.trim().parse().map_err(|_| bad("bad d"))?),
            "N" => n = Some(v.trim().parse().map_err(|_| bad("bad N"))?),
            "M" => m = Some(v.trim().parse().map_err(|_| bad("bad M"))?),
            other => return Err(bad(&format!("unknown entry `{other}`"))),
        }
    }
    Ok((d.ok_or_else(|| bad("missing d"))?, n.ok_or_else(|| bad("missing N"))?, m.ok_or_else(|| bad("missing M"))?))
}

pub(crate) fn verify(ctx: &mut Context) -> Result<Outcome> {
    let mut suite = Suite { failures: 0 };
    if ctx.cfg.contains("manifest") {
        let path = ctx.cfg.text("manifest")?.to_string();
        let m = ExperimentManifest::parse(&fs::read_to_string(&path)?)?;
        let dir = Path::new(&path).parent().unwrap_or(Path::new("."));
        let bad = m.verify(dir)?;
        suite.flag(
            "manifest_checksums",
            bad.is_empty(),
            &format!("{} artifacts, {} mismatched {:?}", m.artifacts.len(), bad.len(), bad),
        );
        if !ctx.cfg.contains("grid") && !ctx.cfg.contains("N") {
            return Ok(Outcome::from_bool(suite.failures == 0));
        }
    }
    let (d, n, m) = if ctx.cfg.contains("grid") {
        parse_grid(ctx.cfg.text("grid")?)?
    } else {
        ctx.default("d", "2")?;
        ctx.default("N", "32")?;
        ctx.default("M", &format!("{:?}", std::f64::consts::TAU))?;
        (ctx.cfg.usize("d")?, ctx.cfg.usize("N")?, ctx.cfg.f64("M")?)
    };
    ctx.default("seed", "1")?;
    let seed = ctx.seeds()?[0];
    let g = TorusGrid::new(d, m, n)?;
    let p = DyadicPartition::new(&g)?;
    let cut = Cutoff::ball(&g);
    println!("grid d={d} N={n} M={m:?} seed {seed}");
    let white = sample_space_white_noise(&NoiseSpec::spatial(seed, &g))?;
    let x = sample_x_elliptic(&NoiseSpec::spatial(seed.wrapping_add(1), &g), 1.0, cut)?;
    let y = sample_x_elliptic(&NoiseSpec::spatial(seed.wrapping_add(2), &g), 1.0, cut)?;
    let smooth = heat_step(&x, 0.05, 1.0)?;

    // Spectral layer.
    suite.check("fft_round_trip", rel(&white.fft().ifft(), &white)?, 1e-12);
    let c = white.fft();
    let lhs = g.cell_volume() * white.values().iter().map(|v| v * v).sum::<f64>();
    let rhs = c.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>() / g.volume();
    suite.check("parseval", (lhs - rhs).abs() / rhs, 1e-10);
    suite.check("hermitian_symmetry", c.hermitian_defect(), 1e-12);
    let semigroup = heat_step(&heat_step(&white, 0.3, 1.0)?, 0.7, 1.0)?;
    suite.check("heat_semigroup", rel(&semigroup, &heat_step(&white, 1.0, 1.0)?)?, 1e-12);
    let contraction = heat_step(&smooth, 0.1, 1.0)?.sup_norm() / smooth.sup_norm();
    suite.check("heat_contraction", contraction - 1.0, 1e-9);
    suite.check("helmholtz_inverse", rel(&helmholtz_solve(&apply_q(&white, 2.0), 2.0)?, &white)?, 1e-11);
    let fld = decode_fld1(&encode_fld1(&white))?;
    suite.flag("fld1_round_trip", fld.values() == white.values() && fld.grid() == white.grid(), "bitwise");

    // Littlewood-Paley and paraproducts.
    let sum = p.decompose(&white)?.into_iter().try_fold(Field::zeros(&g), |acc, b| acc.add(&b))?;
    suite.check("partition_resolution", rel(&sum, &white)?, 1e-11);
    let prod = x.mul(&y)?;
    let split = para_lt(&p, &x, &y)?.add(&para_res(&p, &x, &y)?)?.add(&para_gt(&p, &x, &y)?)?;
    suite.check("paraproduct_decomposition", rel(&split, &prod)?, 1e-11);
    let w = Weight::PolySpace(1.0);
    let loc = Localizer::new(&p, &w, 1.5)?;
    suite.check("localizer_identity", rel(&loc.above(&white)?.add(&loc.below(&white)?)?, &white)?, 1e-11);
    let st = SpaceTimeLocalizer::new(&p, &w, 1.0, 1.5)?;
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.3, 1.0] {
        worst = worst.max(rel(&st.above_at(&white, t)?.add(&st.below_at(&white, t)?)?, &white)?);
    }
    suite.check("spacetime_localizer_identity", worst, 1e-11);
    let mut excess: f64 = 0.0;
    for (alpha, kappa) in [(0.3, 0.1), (1.0, 0.5), (2.0, 0.2)] {
        for b in p.decompose(&white)? {
            let (l, r) = interpolation_sides(&b, &w, alpha, kappa);
            if r > 0.0 {
                excess = excess.max(l / r - 1.0);
            }
        }
    }
    suite.check("interpolation_constant_one", excess, 1e-12);

    // Solvers, on the constant and closed-form cases.
    let ones = Field::constant(&g, 1.0);
    let mono = solve_elliptic_monotone(&Field::constant(&g, -3.0), 2.0, 1e-12, 100)?;
    suite.check("monotone_constant_solution", rel(&mono.solution, &ones)?, 1e-10);
    let mp = check_max_principle(&ones, &Field::constant(&g, -3.0), 2.0, &Weight::Constant, 1e-9)?;
    suite.flag("max_principle_constant", mp.holds, &format!("{:.3} <= {:.3}", mp.lhs, mp.rhs));
    let dt = 0.1;
    let stepped = step_parabolic(&ones, &Field::constant(&g, 2.0), dt, 1.0)?;
    let exact = (-dt).exp() + (1.0 - (-dt).exp()) * 2.0;
    suite.check("exponential_euler_scalar_ode", rel(&stepped, &Field::constant(&g, exact))?, 1e-13);
    if d == 2 {
        let small = TorusGrid::new(2, 1.0, 8)?;
        let sp = DyadicPartition::new(&small)?;
        let mut cfg = SolverConfig::new(&small, 1.0);
        cfg.dt = 1e-3;
        cfg.horizon = 1.0;
        let times: Vec<f64> = (0..=cfg.steps()).map(|k| k as f64 * cfg.dt).collect();
        let zero = Trajectory::from_parts(times, vec![Field::zeros(&small); cfg.steps() + 1])?;
        let run = solve_phi42_monolithic(&sp, &zero, 0.0, &Field::constant(&small, 2.0), &cfg)?;
        let ode = |t: f64| {
            let e = (-2.0 * t).exp();
            (4.0 * e / (1.0 + 4.0 * (1.0 - e))).sqrt()
        };
        let err = run.series.iter().map(|r| (r.sup_norm - ode(r.t)).abs()).fold(0.0, f64::max);
        suite.check("cubic_ode_closed_form", err, 5.0 * cfg.dt);
    }
    let again = sample_space_white_noise(&NoiseSpec::spatial(seed, &g))?;
    suite.flag("sampler_determinism", again.values() == white.values(), "bitwise");

    println!("{} failure(s)", suite.failures);
    Ok(Outcome::from_bool(suite.failures == 0))
}
