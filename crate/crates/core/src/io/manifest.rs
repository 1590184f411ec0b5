//! Experiment and ensemble manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::key_value_lines;
use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// One emitted file, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &str, contents: &[u8]) -> Self {
        Artifact { path: path.to_string(), bytes: contents.len() as u64, sha256: sha256_hex(contents) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub command: String,
    pub version: String,
    pub seeds: Vec<u64>,
    /// Fully resolved configuration, `(key, value)` in key order.
    pub config: Vec<(String, String)>,
    pub wall_clock_s: f64,
    pub artifacts: Vec<Artifact>,
}

const HEADER: &str = "# phi4lab experiment manifest";

impl ExperimentManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\ncommand = {}\nversion = {}\n", self.command, self.version);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "wall_clock_s = {:.3}", self.wall_clock_s);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact = {} {} {}", a.sha256, a.bytes, a.path);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = ExperimentManifest {
            command: String::new(),
            version: String::new(),
            seeds: Vec::new(),
            config: Vec::new(),
            wall_clock_s: 0.0,
            artifacts: Vec::new(),
        };
        let bad = |line: usize, what: &str| Error::Format(format!("manifest line {line}: {what}"));
        for (line, key, value) in key_value_lines(text)? {
            match key {
                "command" => m.command = value.to_string(),
                "version" => m.version = value.to_string(),
                "seeds" => {
                    m.seeds = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|s| s.trim().parse().map_err(|_| bad(line, "bad seed"))).collect::<Result<_>>()?
                    }
                }
                "wall_clock_s" => {
                    m.wall_clock_s = value.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| bad(line, "bad time"))?
                }
                "artifact" => {
                    let mut parts = value.splitn(3, ' ');
                    let (Some(sha), Some(bytes), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(bad(line, "artifact needs `sha256 bytes path`"));
                    };
                    if sha.len() != 64 || !sha.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                        return Err(bad(line, "bad sha256"));
                    }
                    let bytes = bytes.parse().map_err(|_| bad(line, "bad byte count"))?;
                    if path.is_empty() || path.starts_with('/') || path.split('/').any(|c| c == "..") {
                        return Err(bad(line, "artifact paths must be relative and stay inside the run directory"));
                    }
                    m.artifacts.push(Artifact { path: path.to_string(), bytes, sha256: sha.to_string() });
                }
                k => match k.strip_prefix("config.") {
                    Some(c) if !c.is_empty() => m.config.push((c.to_string(), value.to_string())),
                    _ => return Err(bad(line, &format!("unknown entry `{k}`"))),
                },
            }
        }
        if m.command.is_empty() {
            return Err(Error::Format("manifest has no command".into()));
        }
        Ok(m)
    }

    /// The resolved configuration as a `key = value` file.
    pub fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Re-reads every artifact under `dir`; returns the paths whose size or checksum differ.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            match fs::read(dir.as_ref().join(&a.path)) {
                Ok(bytes) if bytes.len() as u64 == a.bytes && sha256_hex(&bytes) == a.sha256 => {}
                Ok(_) | Err(_) => bad.push(a.path.clone()),
            }
        }
        Ok(bad)
    }
}

/// One line of an ensemble manifest: `seed N M mu dt symbol path`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRecord {
    pub seed: u64,
    pub n: usize,
    pub m: f64,
    pub mu: f64,
    /// Time step of the driving noise; 0 for spatial objects.
    pub dt: f64,
    pub symbol: String,
    pub path: String,
}

pub const ENSEMBLE_HEADER: &str = "# seed N M mu dt symbol path";

impl EnsembleRecord {
    pub fn to_line(&self) -> String {
        format!("{} {} {:?} {:?} {:?} {} {}", self.seed, self.n, self.m, self.mu, self.dt, self.symbol, self.path)
    }

    pub fn write_all(records: &[EnsembleRecord]) -> String {
        let mut s = format!("{ENSEMBLE_HEADER}\n");
        for r in records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }

    pub fn parse_all(text: &str) -> Result<Vec<EnsembleRecord>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("ensemble line {}: {what}", i + 1));
            let f: Vec<&str> = line.splitn(7, ' ').collect();
            if f.len() != 7 || f[6].is_empty() {
                return Err(bad("expected `seed N M mu dt symbol path`"));
            }
            let num = |s: &str, what: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(what));
            out.push(EnsembleRecord {
                seed: f[0].parse().map_err(|_| bad("bad seed"))?,
                n: f[1].parse().map_err(|_| bad("bad N"))?,
                m: num(f[2], "bad M")?,
                mu: num(f[3], "bad mu")?,
                dt: num(f[4], "bad dt")?,
                symbol: f[5].to_string(),
                path: f[6].to_string(),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vectors() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    fn sample() -> ExperimentManifest {
        ExperimentManifest {
            command: "solve-parabolic".into(),
            version: "0.1.0".into(),
            seeds: vec![7, 8],
            config: vec![("N".into(), "64".into()), ("mu".into(), "1.0".into())],
            wall_clock_s: 1.25,
            artifacts: vec![Artifact::of("norms.csv", b"t\n"), Artifact::of("snap/v 0.fld1", b"x")],
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = sample();
        assert_eq!(ExperimentManifest::parse(&m.to_text()).unwrap(), m);
        assert_eq!(m.config_text(), "N = 64\nmu = 1.0\n");
    }

    #[test]
    fn manifest_rejects_garbage() {
        assert!(ExperimentManifest::parse("").is_err());
        assert!(ExperimentManifest::parse("command = x\nartifact = abc 1 p").is_err());
        assert!(ExperimentManifest::parse("command = x\nbogus = 1").is_err());
        let sha = sha256_hex(b"");
        assert!(ExperimentManifest::parse(&format!("command = x\nartifact = {sha} 1 ../p")).is_err());
        assert!(ExperimentManifest::parse(&format!("command = x\nartifact = {sha} 1 /p")).is_err());
    }

    #[test]
    fn verify_detects_changes() {
        let dir = std::env::temp_dir().join(format!("phi4lab-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("a.csv"), b"1\n").unwrap();
        let m = ExperimentManifest { artifacts: vec![Artifact::of("a.csv", b"1\n"), Artifact::of("b", b"")], ..sample() };
        assert_eq!(m.verify(&dir).unwrap(), vec!["b".to_string()]);
        fs::write(dir.join("a.csv"), b"2\n").unwrap();
        assert_eq!(m.verify(&dir).unwrap().len(), 2);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn ensemble_round_trip() {
        let r = vec![
            EnsembleRecord { seed: 1, n: 32, m: 6.5, mu: 1.0, dt: 0.0, symbol: "X".into(), path: "X_1.fld1".into() },
            EnsembleRecord { seed: 2, n: 32, m: 0.1, mu: 2.5, dt: 1e-3, symbol: "X2".into(), path: "dir/with space.fld1".into() },
        ];
        assert_eq!(EnsembleRecord::parse_all(&EnsembleRecord::write_all(&r)).unwrap(), r);
        assert!(EnsembleRecord::parse_all("1 2 3").is_err());
        assert!(EnsembleRecord::parse_all("1 32 inf 1 0 X p").is_err());
    }
}
