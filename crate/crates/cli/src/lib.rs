//! `phi4lab` command-line driver.
//!
//! Every flag is also a key of the flat `key = value` config accepted by `--config`; flags win over
//! file values. Runs that pass `--out DIR` write their artifacts there together with `config.txt`
//! (the resolved configuration, reusable as `--config`) and `manifest.txt` (configuration, seeds,
//! wall-clock time and the SHA-256 of every artifact).

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Arg, ArgAction, Command};
use phi4lab::io::{Artifact, Config, ConfigSchema, ExperimentManifest, KeySpec, ValueKind};
use phi4lab::Error;

mod commands;
mod verify;

pub use verify::parse_grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const fn key(name: &'static str, kind: ValueKind, help: &'static str) -> KeySpec {
    KeySpec { name, kind, help }
}

/// Every configuration key understood by some subcommand.
pub fn schema() -> ConfigSchema {
    use ValueKind::*;
    ConfigSchema::new(vec![
        key("d", Int, "space dimension"),
        key("N", Int, "grid points per dimension (power of two)"),
        key("M", Float, "side length of the box"),
        key("mu", Float, "mass, > 0"),
        key("nu", Float, "exponent of the weight <x>^-nu (0 for no weight)"),
        key("seed", IntList, "seed, or comma-separated seeds"),
        key("out", Text, "output directory"),
        key("field", Text, "white | elliptic | parabolic"),
        key("T", Float, "time horizon"),
        key("dt", Float, "time step"),
        key("stride", Int, "keep every stride-th snapshot"),
        key("domain", Text, "elliptic-d4 | parabolic-d2 | elliptic-d5 | parabolic-d3"),
        key("input", Text, "FLD1 file or ensemble manifest"),
        key("alpha", Float, "Besov exponent"),
        key("base", Float, "localizer base L"),
        key("adaptive", Bool, "adapt the localizer scale to the running sup norm"),
        key("renormalize", Bool, "subtract the Wick counterterms"),
        key("theta", Float, "initial damping in (0, 1]"),
        key("tol", Float, "residual tolerance"),
        key("max_iter", Int, "outer iteration cap"),
        key("method", Text, "monolithic | split"),
        key("init", Text, "FLD1 file with the initial datum (default zero)"),
        key("magnitudes", FloatList, "initial-data magnitudes"),
        key("eps", Float, "preparation exponent in (0, 1)"),
        key("profile_seed", Int, "seed of the initial-data profile (default: the noise seed)"),
        key("profile_offset", Float, "constant added to the centred profile before normalization"),
        key("collapse_by", Float, "time by which the series must collapse"),
        key("L", FloatList, "localizer bases to compare"),
        key("tolerance", Float, "acceptance threshold"),
        key("symbol", Text, "X | X2 | X2raw | v | vraw"),
        key("resolutions", IntList, "increasing list of N"),
        key("kind", Text, "l2 | sup"),
        key("grid", Text, "d=..,N=..,M=.."),
        key("manifest", Text, "manifest whose artifacts are re-checked"),
    ])
}

pub(crate) struct Sub {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [&'static str],
}

pub(crate) const SUBCOMMANDS: &[Sub] = &[
    Sub {
        name: "sample-noise",
        about: "Sample white noise or the free field X for each seed",
        keys: &["d", "N", "M", "mu", "seed", "field", "T", "dt", "stride", "out"],
    },
    Sub {
        name: "build-objects",
        about: "Build the Wick powers and tree objects of a domain",
        keys: &["domain", "N", "M", "mu", "seed", "T", "dt", "stride", "renormalize", "out"],
    },
    Sub { name: "norms", about: "Besov norms of a field, or regularity fits of an ensemble", keys: &["input", "alpha", "nu", "out"] },
    Sub {
        name: "solve-elliptic",
        about: "Solve the elliptic equation with the localized decomposition",
        keys: &["d", "N", "M", "mu", "seed", "base", "adaptive", "renormalize", "theta", "tol", "max_iter", "nu", "out"],
    },
    Sub {
        name: "solve-parabolic",
        about: "Solve the d = 2 parabolic equation",
        keys: &["d", "N", "M", "mu", "seed", "T", "dt", "stride", "method", "renormalize", "base", "adaptive", "nu", "init", "out"],
    },
    Sub {
        name: "coming-down",
        about: "Run the large-data experiment over several magnitudes",
        keys: &[
            "d", "N", "M", "mu", "seed", "T", "dt", "magnitudes", "eps", "profile_seed", "profile_offset", "collapse_by", "nu", "base",
            "out",
        ],
    },
    Sub {
        name: "uniqueness-probe",
        about: "Compare split solutions across localizer bases",
        keys: &["d", "N", "M", "mu", "seed", "T", "dt", "L", "tolerance", "init", "nu", "out"],
    },
    Sub {
        name: "convergence",
        about: "Coupled-resolution distances of a stochastic object or solution",
        keys: &["symbol", "field", "d", "M", "mu", "seed", "resolutions", "alpha", "kind", "T", "dt", "nu", "out"],
    },
    Sub { name: "verify", about: "Run the invariant suite; optionally re-check a manifest", keys: &["grid", "d", "N", "M", "seed", "manifest"] },
];

fn value_name(kind: ValueKind) -> &'static str {
    match kind {
        ValueKind::Int => "INT",
        ValueKind::Float => "NUM",
        ValueKind::Bool => "BOOL",
        ValueKind::Text => "TEXT",
        ValueKind::IntList => "INTS",
        ValueKind::FloatList => "NUMS",
    }
}

fn command(schema: &ConfigSchema) -> Command {
    let mut cmd = Command::new("phi4lab")
        .about("Paracontrolled-calculus toolkit and Phi^4 solvers on periodic boxes")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        let mut c = Command::new(sub.name).about(sub.about).arg(
            Arg::new("config").long("config").value_name("PATH").help("flat key = value file; flags override it"),
        );
        for name in sub.keys {
            let spec = schema.get(name).expect("subcommand keys are in the schema");
            c = c.arg(
                Arg::new(spec.name)
                    .long(spec.name)
                    .value_name(value_name(spec.kind))
                    .help(spec.help)
                    .allow_hyphen_values(true)
                    .action(ArgAction::Set),
            );
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

/// Errors raised while resolving flags and files are usage errors; everything after is a run failure.
pub(crate) fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidGrid(_) | Error::InvalidParameter { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv` (including the program name), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let schema = schema();
    let matches = match command(&schema).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let spec = SUBCOMMANDS.iter().find(|s| s.name == name).expect("known subcommand");
    phi4lab::grid::init_threads_from_env();
    let cfg = match resolve(&schema, spec, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let mut ctx = Context::new(spec.name, cfg);
    let result = commands::dispatch(&mut ctx);
    let _ = std::io::stdout().flush();
    match result {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve(schema: &ConfigSchema, spec: &Sub, m: &clap::ArgMatches) -> phi4lab::Result<Config> {
    let mut flags = Config::empty(schema);
    for name in spec.keys {
        if let Some(raw) = m.get_one::<String>(name) {
            flags.set_raw(name, raw)?;
        }
    }
    let cfg = match m.get_one::<String>("config") {
        Some(path) => phi4lab::io::load_config(path, schema, &flags)?,
        None => flags,
    };
    if let Some((k, _)) = cfg.iter().find(|(k, _)| !spec.keys.contains(k)) {
        return Err(Error::Config { key: k.to_string(), reason: format!("not used by `{}`", spec.name) });
    }
    Ok(cfg)
}

/// Whether the run met its acceptance conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Resolved configuration plus the artifact sink of one run.
pub(crate) struct Context {
    pub command: &'static str,
    pub cfg: Config,
    out: Option<PathBuf>,
    artifacts: Vec<Artifact>,
    seeds: Vec<u64>,
    start: Instant,
}

impl Context {
    fn new(command: &'static str, cfg: Config) -> Self {
        let out = cfg.text("out").ok().map(PathBuf::from);
        Context { command, cfg, out, artifacts: Vec::new(), seeds: Vec::new(), start: Instant::now() }
    }

    /// Fills `key` with `raw` unless it was given.
    pub fn default(&mut self, key: &str, raw: &str) -> phi4lab::Result<()> {
        if !self.cfg.contains(key) {
            self.cfg.set_raw(key, raw)?;
        }
        Ok(())
    }

    pub fn seeds(&mut self) -> phi4lab::Result<Vec<u64>> {
        let s = self.cfg.u64_list("seed")?;
        if s.is_empty() {
            return Err(Error::Config { key: "seed".into(), reason: "at least one seed is required".into() });
        }
        self.seeds = s.clone();
        Ok(s)
    }

    /// Writes `contents` to `name` inside the output directory, if any, and records its checksum.
    pub fn emit(&mut self, name: &str, contents: &[u8]) -> phi4lab::Result<()> {
        let Some(dir) = &self.out else { return Ok(()) };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.artifacts.push(Artifact::of(name, contents));
        Ok(())
    }

    /// Writes `config.txt` and `manifest.txt`.
    pub fn finish(&mut self) -> phi4lab::Result<()> {
        let Some(dir) = self.out.clone() else { return Ok(()) };
        fs::create_dir_all(&dir)?;
        let mut echo = self.cfg.clone();
        echo.remove("out");
        let config: Vec<(String, String)> = echo.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let manifest = ExperimentManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: self.seeds.clone(),
            config,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            artifacts: self.artifacts.clone(),
        };
        fs::write(dir.join("config.txt"), manifest.config_text())?;
        fs::write(dir.join("manifest.txt"), manifest.to_text())?;
        Ok(())
    }
}
