use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use phi4lab::coupling::{coupled_convergence, BesovKind, CoupledSymbol, FreeField};
use phi4lab::io::csv::{norm_table_csv, regularity_csv, series_csv, table_csv};
use phi4lab::io::{decode_fld1, encode_fld1, EnsembleRecord, FLD1_MAGIC};
use phi4lab::lp::{besov_norm, default_j_range, estimate_regularity, l2_besov_norm, norm_table, BlockNorm};
use phi4lab::solvers::{
    coming_down_experiment, random_profile, solve_elliptic_phi44, solve_phi42_monolithic, solve_phi42_split,
    uniqueness_probe, SolverConfig, ALPHA,
};
use phi4lab::stochastic::{
    mean_and_se, sample_space_white_noise, sample_x_elliptic, sample_x_parabolic, wick_constant_elliptic,
    wick_constant_parabolic, wick_powers, Cutoff, NoiseSpec,
};
use phi4lab::trees::{estimate_b, renormalize, tree_sample, wick_data_elliptic, Symbol, TreeDomain, TreeParams, TreeSample, WickData};
use phi4lab::{DyadicPartition, Error, Field, Result, TorusGrid, Trajectory, Weight};

use crate::{Context, Outcome};

pub(crate) fn dispatch(ctx: &mut Context) -> Result<Outcome> {
    let outcome = match ctx.command {
        "sample-noise" => sample_noise(ctx)?,
        "build-objects" => build_objects(ctx)?,
        "norms" => norms(ctx)?,
        "solve-elliptic" => solve_elliptic(ctx)?,
        "solve-parabolic" => solve_parabolic(ctx)?,
        "coming-down" => coming_down(ctx)?,
        "uniqueness-probe" => probe(ctx)?,
        "convergence" => convergence(ctx)?,
        "verify" => crate::verify::verify(ctx)?,
        other => unreachable!("unknown subcommand {other}"),
    };
    ctx.finish()?;
    Ok(outcome)
}

fn usage(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.into(), reason: reason.into() }
}

/// Grid from `d`, `N`, `M` after defaults.
fn grid(ctx: &mut Context, d: &str, n: &str, m: &str) -> Result<TorusGrid> {
    ctx.default("d", d)?;
    ctx.default("N", n)?;
    ctx.default("M", m)?;
    TorusGrid::new(ctx.cfg.usize("d")?, ctx.cfg.f64("M")?, ctx.cfg.usize("N")?)
}

fn require_d2(g: &TorusGrid) -> Result<()> {
    if g.d() != 2 {
        return Err(usage("d", format!("this command runs in d = 2, got {}", g.d())));
    }
    Ok(())
}

fn weight(ctx: &Context) -> Result<Weight> {
    let nu = ctx.cfg.f64("nu")?;
    let w = if nu == 0.0 { Weight::Constant } else { Weight::PolySpace(nu) };
    w.validate()?;
    Ok(w)
}

fn tau_str() -> String {
    format!("{TAU:?}")
}

/// `SolverConfig` from the resolved keys; defaults follow `SolverConfig::new`.
fn solver_config(ctx: &mut Context, g: &TorusGrid, seed: u64) -> Result<SolverConfig> {
    let base = SolverConfig::new(g, 1.0);
    ctx.default("mu", "1.0")?;
    ctx.default("nu", &format!("{:?}", base.nu))?;
    let c = &ctx.cfg;
    let get_f = |k: &str, d: f64| if c.contains(k) { c.f64(k) } else { Ok(d) };
    let get_b = |k: &str, d: bool| if c.contains(k) { c.bool(k) } else { Ok(d) };
    let cfg = SolverConfig {
        mu: c.f64("mu")?,
        grid: g.clone(),
        seed,
        base: get_f("base", base.base)?,
        adaptive: get_b("adaptive", base.adaptive)?,
        renormalize: get_b("renormalize", base.renormalize)?,
        dt: get_f("dt", base.dt)?,
        horizon: get_f("T", base.horizon)?,
        theta: get_f("theta", base.theta)?,
        tol: get_f("tol", base.tol)?,
        max_iter: if c.contains("max_iter") { c.usize("max_iter")? } else { base.max_iter },
        nu: c.f64("nu")?,
        stride: if c.contains("stride") { Some(c.usize("stride")?.max(1)) } else { None },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit_field(ctx: &mut Context, name: &str, f: &Field) -> Result<()> {
    ctx.emit(name, &encode_fld1(f))
}

/// Reads an optional initial datum, checking it lives on `g`.
fn init_field(ctx: &Context, g: &TorusGrid) -> Result<Field> {
    match ctx.cfg.get("init") {
        None => Ok(Field::zeros(g)),
        Some(_) => {
            let f = decode_fld1(&fs::read(ctx.cfg.text("init")?)?)?;
            if f.grid() != g {
                return Err(usage("init", "initial datum lives on a different grid"));
            }
            Ok(f)
        }
    }
}

fn noise_trajectory(seed: u64, cfg: &SolverConfig) -> Result<(Trajectory, f64)> {
    let g = &cfg.grid;
    let cut = Cutoff::ball(g);
    let x = sample_x_parabolic(&NoiseSpec::spacetime(seed, g, cfg.dt), cfg.mu, cfg.horizon, cut, 1)?;
    let a = if cfg.renormalize { wick_constant_parabolic(g, cfg.mu, cut)? } else { 0.0 };
    Ok((x, a))
}

fn sample_noise(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    ctx.default("field", "elliptic")?;
    ctx.default("mu", "1.0")?;
    let field = ctx.cfg.text("field")?.to_string();
    let g = grid(ctx, "2", "64", &tau_str())?;
    let mu = ctx.cfg.f64("mu")?;
    let cut = Cutoff::ball(&g);
    let mut records = Vec::new();
    let record = |seed, dt, symbol: &str, path: &str| EnsembleRecord {
        seed,
        n: g.n(),
        m: g.m(),
        mu,
        dt,
        symbol: symbol.to_string(),
        path: path.to_string(),
    };
    match field.as_str() {
        "white" | "elliptic" => {
            let a = wick_constant_elliptic(&g, mu, cut)?;
            if field == "elliptic" {
                println!("a = {a:?}");
            }
            for seed in seeds {
                let spec = NoiseSpec::spatial(seed, &g);
                let (sym, f) = if field == "white" {
                    ("xi", sample_space_white_noise(&spec)?)
                } else {
                    ("X", sample_x_elliptic(&spec, mu, cut)?)
                };
                let name = format!("{sym}_seed{seed}.fld1");
                println!("seed {seed}: sup {:?} mean {:?}", f.sup_norm(), f.mean());
                emit_field(ctx, &name, &f)?;
                records.push(record(seed, 0.0, sym, &name));
            }
        }
        "parabolic" => {
            ctx.default("T", "1.0")?;
            ctx.default("dt", "0.001")?;
            let mut cfg = SolverConfig::new(&g, mu);
            cfg.horizon = ctx.cfg.f64("T")?;
            cfg.dt = ctx.cfg.f64("dt")?;
            if ctx.cfg.contains("stride") {
                cfg.stride = Some(ctx.cfg.usize("stride")?.max(1));
            }
            cfg.validate()?;
            let a = wick_constant_parabolic(&g, mu, cut)?;
            println!("a = {a:?}");
            for seed in seeds {
                let x = sample_x_parabolic(&NoiseSpec::spacetime(seed, &g, cfg.dt), mu, cfg.horizon, cut, cfg.snapshot_stride())?;
                for (i, (t, f)) in x.times().iter().zip(x.snapshots()).enumerate() {
                    let name = format!("X_seed{seed}_{i:05}.fld1");
                    emit_field(ctx, &name, f)?;
                    records.push(record(seed, cfg.dt, &format!("X@{t:?}"), &name));
                }
                println!("seed {seed}: {} snapshots, final sup {:?}", x.len(), x.last().map(Field::sup_norm).unwrap_or(0.0));
            }
        }
        other => return Err(usage("field", format!("expected white | elliptic | parabolic, got `{other}`"))),
    }
    ctx.emit("ensemble.txt", EnsembleRecord::write_all(&records).as_bytes())?;
    Ok(Outcome::Pass)
}

fn build_objects(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    ctx.default("domain", "parabolic-d2")?;
    ctx.default("mu", "1.0")?;
    ctx.default("renormalize", "true")?;
    let domain = ctx.cfg.text("domain")?.to_string();
    let (d, n, m) = match domain.as_str() {
        "elliptic-d4" => (4, "16", "1.0".to_string()),
        "parabolic-d2" => (2, "64", tau_str()),
        "elliptic-d5" => (5, "16", "1.0".to_string()),
        "parabolic-d3" => (3, "32", "1.0".to_string()),
        other => {
            return Err(usage("domain", format!("expected elliptic-d4 | parabolic-d2 | elliptic-d5 | parabolic-d3, got `{other}`")))
        }
    };
    ctx.default("N", n)?;
    ctx.default("M", &m)?;
    let g = TorusGrid::new(d, ctx.cfg.f64("M")?, ctx.cfg.usize("N")?)?;
    let mu = ctx.cfg.f64("mu")?;
    let renorm = ctx.cfg.bool("renormalize")?;
    let cut = Cutoff::ball(&g);
    let mut samples: Vec<(u64, BTreeMap<Symbol, Field>)> = Vec::new();
    let mut dt = 0.0;
    match domain.as_str() {
        "elliptic-d4" => {
            for &seed in &seeds {
                samples.push((seed, wick_data_elliptic(&g, seed, mu, cut, renorm)?.objects));
            }
            println!("a = {:?}", wick_constant_elliptic(&g, mu, cut)?);
        }
        "parabolic-d2" => {
            ctx.default("T", "1.0")?;
            ctx.default("dt", "0.001")?;
            let mut cfg = SolverConfig::new(&g, mu);
            cfg.horizon = ctx.cfg.f64("T")?;
            cfg.dt = ctx.cfg.f64("dt")?;
            cfg.renormalize = renorm;
            cfg.validate()?;
            dt = cfg.dt;
            let a = wick_constant_parabolic(&g, mu, cut)?;
            println!("a = {a:?}");
            for &seed in &seeds {
                let (x, a) = noise_trajectory(seed, &cfg)?;
                let x = x.last().cloned().expect("non-empty");
                let (x2, x3) = wick_powers(&x, a);
                samples.push((seed, BTreeMap::from([(Symbol::X, x), (Symbol::X2, x2), (Symbol::X3, x3)])));
            }
        }
        _ => {
            let parabolic = domain == "parabolic-d3";
            if parabolic {
                ctx.default("T", "0.5")?;
                ctx.default("dt", "0.002")?;
                dt = ctx.cfg.f64("dt")?;
            }
            let p = DyadicPartition::new(&g)?;
            let horizon = if parabolic { ctx.cfg.f64("T")? } else { 0.0 };
            let params = TreeParams {
                mu,
                cutoff: cut,
                horizon,
                dt: if parabolic { dt } else { 1.0 },
                stride: usize::MAX,
                resonant: renorm && seeds.len() >= 2,
            };
            let kind = if parabolic { TreeDomain::ParabolicD3 } else { TreeDomain::EllipticD5 };
            let raw: Vec<TreeSample> = seeds.iter().map(|&seed| tree_sample(&p, kind, seed, &params)).collect::<Result<_>>()?;
            let b = if params.resonant { Some(estimate_b(&raw)?) } else { None };
            if let Some(b) = &b {
                let (b, se) = b.at_end();
                println!("b = {b:?} +- {se:?} over {} samples", seeds.len());
            }
            let all: Vec<(u64, WickData)> =
                seeds.iter().zip(&raw).map(|(&seed, s)| Ok((seed, renormalize(s, b.as_ref())?))).collect::<Result<_>>()?;
            let a = all.first().map(|(_, d)| d.a).unwrap_or(0.0);
            println!("a = {a:?}");
            for (seed, data) in all {
                let mut objs = data.objects;
                if !renorm {
                    // Raw powers; the trees are reported as built from raw inputs.
                    let x = objs[&Symbol::X].clone();
                    let (x2, x3) = wick_powers(&x, 0.0);
                    objs.insert(Symbol::X2, x2);
                    objs.insert(Symbol::X3, x3);
                }
                if parabolic {
                    // Fixed-time snapshots of the cubic power are not meaningful in d = 3.
                    objs.remove(&Symbol::X3);
                }
                samples.push((seed, objs));
            }
        }
    }
    let mut records = Vec::new();
    for (seed, objs) in &samples {
        for (sym, f) in objs {
            let name = format!("{}_seed{seed}.fld1", sym.name());
            emit_field(ctx, &name, f)?;
            records.push(EnsembleRecord {
                seed: *seed,
                n: g.n(),
                m: g.m(),
                mu,
                dt,
                symbol: sym.name().to_string(),
                path: name,
            });
        }
        let sups: Vec<String> = objs.iter().map(|(s, f)| format!("{}={:.4}", s.name(), f.sup_norm())).collect();
        println!("seed {seed}: sup {}", sups.join(" "));
    }
    ctx.emit("ensemble.txt", EnsembleRecord::write_all(&records).as_bytes())?;
    Ok(Outcome::Pass)
}

fn norms(ctx: &mut Context) -> Result<Outcome> {
    ctx.cfg.require(&["input"])?;
    ctx.default("alpha", "0.0")?;
    ctx.default("nu", "1.0")?;
    let input = ctx.cfg.text("input")?.to_string();
    let alpha = ctx.cfg.f64("alpha")?;
    let w = weight(ctx)?;
    let bytes = fs::read(&input)?;
    if bytes.starts_with(&FLD1_MAGIC) {
        let f = decode_fld1(&bytes)?;
        let p = DyadicPartition::new(f.grid())?;
        let table = norm_table(&p, &f, &w, 0.0)?;
        let csv = norm_table_csv(&table);
        print!("{csv}");
        println!("besov_norm(alpha = {alpha:?}) = {:?}", besov_norm(&p, &f, alpha, &w, 0.0)?);
        println!("l2_besov_norm(alpha = {alpha:?}) = {:?}", l2_besov_norm(&p, &f, alpha, &w, 0.0)?);
        ctx.emit("norms.csv", csv.as_bytes())?;
        return Ok(Outcome::Pass);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{input} is neither FLD1 nor an ensemble manifest")))?;
    let records = EnsembleRecord::parse_all(&text)?;
    if records.is_empty() {
        return Err(Error::Format(format!("{input} lists no fields")));
    }
    let dir = Path::new(&input).parent().unwrap_or(Path::new("."));
    let mut by_symbol: BTreeMap<String, Vec<Field>> = BTreeMap::new();
    for r in &records {
        by_symbol.entry(r.symbol.clone()).or_default().push(decode_fld1(&fs::read(dir.join(&r.path))?)?);
    }
    for (sym, fields) in &by_symbol {
        let p = DyadicPartition::new(fields[0].grid())?;
        if fields.iter().any(|f| f.grid() != p.grid()) {
            return Err(Error::GridMismatch("ensemble members of one symbol must share a grid"));
        }
        let report = estimate_regularity(&p, fields, default_j_range(&p), BlockNorm::Rms)?;
        println!("{sym}: {} samples, slope {:?} +- {:?}", fields.len(), report.slope, report.stderr);
        let safe: String = sym.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        ctx.emit(&format!("regularity_{safe}.csv"), regularity_csv(&report).as_bytes())?;
    }
    Ok(Outcome::Pass)
}

fn solve_elliptic(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    let g = grid(ctx, "4", "16", "1.0")?;
    let p = DyadicPartition::new(&g)?;
    let mut ok = true;
    let mut psi_sups = Vec::new();
    for seed in seeds {
        let cfg = solver_config(ctx, &g, seed)?;
        let wick = wick_data_elliptic(&g, seed, cfg.mu, Cutoff::ball(&g), cfg.renormalize)?;
        let r = match solve_elliptic_phi44(&p, &wick, &cfg) {
            Ok(r) => r,
            Err(e @ Error::NoConvergence { .. }) => {
                println!("seed {seed}: {e}");
                ok = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mp = &r.max_principle;
        println!(
            "seed {seed}: iterations {} residual {:.3e} K {:.4} |phi|_C^{ALPHA}(rho) {:.4} |psi|_Linf(rho) {:.4}",
            r.iterations, r.residual, r.scale, r.phi_holder, r.psi_sup
        );
        println!(
            "seed {seed}: max principle {} lhs {:.4e} rhs {:.4e} constant {:.4}",
            if mp.holds { "holds" } else { "FAILS" },
            mp.lhs,
            mp.rhs,
            mp.constant
        );
        ok &= mp.holds;
        psi_sups.push(r.psi.sup_norm());
        emit_field(ctx, &format!("phi_seed{seed}.fld1"), &r.phi)?;
        emit_field(ctx, &format!("psi_seed{seed}.fld1"), &r.psi)?;
        let rows: Vec<Vec<f64>> = r.residuals.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
        ctx.emit(&format!("residuals_seed{seed}.csv"), table_csv(&["iteration", "residual"], &rows).as_bytes())?;
        let v = r.phi.add(&r.psi)?;
        let table = norm_table(&p, &v, &cfg.weight(), 0.0)?;
        ctx.emit(&format!("norms_seed{seed}.csv"), norm_table_csv(&table).as_bytes())?;
    }
    if psi_sups.len() > 1 {
        let (m, se) = mean_and_se(&psi_sups);
        let sd = se * (psi_sups.len() as f64).sqrt();
        println!("|psi|_inf across seeds: mean {m:.4} coefficient of variation {:.4}", if m > 0.0 { sd / m } else { 0.0 });
    }
    Ok(Outcome::from_bool(ok))
}

fn solve_parabolic(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    ctx.default("method", "monolithic")?;
    ctx.default("T", "1.0")?;
    let g = grid(ctx, "2", "64", &tau_str())?;
    require_d2(&g)?;
    let p = DyadicPartition::new(&g)?;
    let method = ctx.cfg.text("method")?.to_string();
    if method != "monolithic" && method != "split" {
        return Err(usage("method", format!("expected monolithic | split, got `{method}`")));
    }
    let v0 = init_field(ctx, &g)?;
    for seed in seeds {
        let cfg = solver_config(ctx, &g, seed)?;
        let (x, a) = noise_trajectory(seed, &cfg)?;
        let (solution, series) = if method == "monolithic" {
            let r = solve_phi42_monolithic(&p, &x, a, &v0, &cfg)?;
            println!("seed {seed}: a {a:?} substeps {}", r.substeps);
            (r.solution, r.series)
        } else {
            let r = solve_phi42_split(&p, &x, a, &v0, &Field::zeros(&g), &cfg)?;
            println!("seed {seed}: a {a:?} substeps {}", r.substeps);
            let rows: Vec<Vec<f64>> = r.components.iter().map(|c| vec![c.0, c.1, c.2]).collect();
            ctx.emit(&format!("components_seed{seed}.csv"), table_csv(&["t", "phi_holder", "psi_weighted_sup"], &rows).as_bytes())?;
            (r.total, r.series)
        };
        let last = series.last().expect("series has t = 0");
        println!(
            "seed {seed}: t {:?} |v|_inf {:.4} |v|_Linf(rho) {:.4} max_t |v|_inf {:.4}",
            last.t,
            last.sup_norm,
            last.weighted_sup,
            series.iter().map(|r| r.sup_norm).fold(0.0, f64::max)
        );
        ctx.emit(&format!("series_seed{seed}.csv"), series_csv(&series).as_bytes())?;
        let mut times = Vec::new();
        for (i, (t, f)) in solution.times().iter().zip(solution.snapshots()).enumerate() {
            emit_field(ctx, &format!("v_seed{seed}_{i:05}.fld1"), f)?;
            times.push(vec![i as f64, *t]);
        }
        ctx.emit(&format!("snapshots_seed{seed}.csv"), table_csv(&["index", "t"], &times).as_bytes())?;
    }
    Ok(Outcome::Pass)
}

fn coming_down(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    let seed = seeds[0];
    ctx.default("T", "2.0")?;
    ctx.default("magnitudes", "1,10,100")?;
    ctx.default("eps", "0.5")?;
    ctx.default("profile_seed", &seed.to_string())?;
    ctx.default("profile_offset", "0.0")?;
    ctx.default("collapse_by", "1.0")?;
    let g = grid(ctx, "2", "64", &tau_str())?;
    require_d2(&g)?;
    let p = DyadicPartition::new(&g)?;
    let cfg = solver_config(ctx, &g, seed)?;
    let magnitudes = ctx.cfg.f64_list("magnitudes")?;
    let eps = ctx.cfg.f64("eps")?;
    let profile_seed = u64::try_from(ctx.cfg.i64("profile_seed")?).map_err(|_| usage("profile_seed", "must be non-negative"))?;
    let profile = random_profile(&p, profile_seed, ctx.cfg.f64("profile_offset")?)?;
    let (x, a) = noise_trajectory(seed, &cfg)?;
    let r = coming_down_experiment(&p, &x, a, &profile, &magnitudes, eps, &cfg)?;
    let collapse_by = ctx.cfg.f64("collapse_by")?;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(magnitudes.iter().map(|m| format!("s_{m:?}")));
    header.push("spread".into());
    let rows: Vec<Vec<f64>> = (0..r.times.len())
        .map(|i| {
            let mut row = vec![r.times[i]];
            row.extend(r.series.iter().map(|s| s[i]));
            row.push(r.spread[i]);
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.emit("coming_down.csv", table_csv(&header_refs, &rows).as_bytes())?;
    let spread_at = r
        .times
        .iter()
        .position(|&t| t >= collapse_by - 1e-12)
        .map(|i| r.spread[i..].iter().cloned().fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    println!("localizer bases {:?}", r.bases);
    println!("prepared |phi0 + X0|_C^-1(rho) {:?}", r.prepared_norms);
    match r.t_star {
        Some(t) => println!("collapse time t* = {t:?} (factor {:?})", r.collapse_factor),
        None => println!("no collapse within factor {:?} by T", r.collapse_factor),
    }
    println!("max spread after t = {collapse_by:?}: {spread_at:.4}");
    println!("envelope C = {:?}, max s / (C (1 + t^-1/2)) = {:?}", r.envelope_c, r.envelope_ratio);
    let collapsed = r.collapsed_by(collapse_by);
    let envelope = r.envelope_holds();
    println!("collapse by {collapse_by:?}: {}", if collapsed { "yes" } else { "no" });
    println!("envelope: {}", if envelope { "holds" } else { "violated" });
    Ok(Outcome::from_bool(collapsed && envelope))
}

fn probe(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    ctx.default("L", "0,2,4")?;
    ctx.default("tolerance", "0.02")?;
    let g = grid(ctx, "2", "32", &tau_str())?;
    require_d2(&g)?;
    let p = DyadicPartition::new(&g)?;
    let ls = ctx.cfg.f64_list("L")?;
    let tol = ctx.cfg.f64("tolerance")?;
    let v0 = init_field(ctx, &g)?;
    let mut ok = true;
    for seed in seeds {
        let cfg = solver_config(ctx, &g, seed)?;
        let (x, a) = noise_trajectory(seed, &cfg)?;
        let r = uniqueness_probe(&p, &x, a, &v0, &cfg, &ls)?;
        let mut header = vec!["L".to_string()];
        header.extend(ls.iter().map(|l| format!("L_{l:?}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = ls.iter().zip(&r.discrepancy).map(|(l, row)| std::iter::once(*l).chain(row.iter().cloned()).collect()).collect();
        ctx.emit(&format!("discrepancy_seed{seed}.csv"), table_csv(&header_refs, &rows).as_bytes())?;
        println!("seed {seed}: scale {:.4} max relative discrepancy {:.3e} (tolerance {tol:?})", r.scale, r.max);
        ok &= r.max < tol;
    }
    Ok(Outcome::from_bool(ok))
}

fn convergence(ctx: &mut Context) -> Result<Outcome> {
    let seeds = ctx.seeds()?;
    ctx.default("symbol", "X2")?;
    ctx.default("field", "parabolic")?;
    ctx.default("resolutions", "16,32,64")?;
    ctx.default("kind", "l2")?;
    ctx.default("mu", "1.0")?;
    ctx.default("nu", "0.0")?;
    let symbol: CoupledSymbol = ctx.cfg.text("symbol")?.parse().map_err(|e: Error| usage("symbol", e.to_string()))?;
    let field_name = ctx.cfg.text("field")?.to_string();
    let field = match field_name.as_str() {
        "elliptic" => {
            ctx.default("d", "4")?;
            ctx.default("M", "1.0")?;
            FreeField::Elliptic
        }
        "parabolic" => {
            ctx.default("d", "2")?;
            ctx.default("M", &tau_str())?;
            ctx.default("T", if symbol.is_trajectory() { "0.5" } else { "1.0" })?;
            ctx.default("dt", "0.001")?;
            FreeField::Parabolic { horizon: ctx.cfg.f64("T")?, dt: ctx.cfg.f64("dt")? }
        }
        other => return Err(usage("field", format!("expected elliptic | parabolic, got `{other}`"))),
    };
    // Distances are measured slightly below the regularity of the object.
    ctx.default("alpha", if symbol.is_trajectory() { "0.1" } else { "-0.4" })?;
    let kind = match ctx.cfg.text("kind")? {
        "l2" => BesovKind::L2,
        "sup" => BesovKind::Sup,
        other => return Err(usage("kind", format!("expected l2 | sup, got `{other}`"))),
    };
    let resolutions: Vec<usize> = ctx
        .cfg
        .u64_list("resolutions")?
        .into_iter()
        .map(|n| usize::try_from(n).map_err(|_| usage("resolutions", "too large")))
        .collect::<Result<_>>()?;
    let w = weight(ctx)?;
    let r = coupled_convergence(
        field,
        symbol,
        ctx.cfg.usize("d")?,
        ctx.cfg.f64("M")?,
        &resolutions,
        ctx.cfg.f64("mu")?,
        &seeds,
        ctx.cfg.f64("alpha")?,
        &w,
        kind,
    )?;
    let rows: Vec<Vec<f64>> = (0..r.distances.len())
        .map(|i| vec![resolutions[i] as f64, resolutions[i + 1] as f64, r.distances[i], r.sup_norms[i + 1], r.low_norms[i + 1]])
        .collect();
    let csv = table_csv(&["N_coarse", "N_fine", "distance", "fine_sup", "fine_low_block_sup"], &rows);
    print!("{csv}");
    println!("coarse sup {:?} low block {:?}", r.sup_norms[0], r.low_norms[0]);
    println!(
        "{}: distances {}, sup norms {}",
        symbol,
        if r.decreasing() { "decrease" } else { "do not decrease" },
        if r.norms_increasing() { "increase" } else { "do not increase" }
    );
    ctx.emit("convergence.csv", csv.as_bytes())?;
    Ok(Outcome::Pass)
}
