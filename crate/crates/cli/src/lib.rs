//! Command implementations behind the `distchaos` binary.
//!
//! Each command returns its stdout text or a [`Failure`] carrying the exit code.
//! Exit codes: 0 success, 1 I/O or internal error, 2 parse error, 3 domain
//! violation, 4 expected/actual mismatch.

pub mod presets;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use distchaos::classify::{classify_pair, classify_sample_set, density_stats, implication_check, ClassifyError};
use distchaos::csv_float;
use distchaos::density::{estimate_profile, exact_profile, prefix_ratio_series, DensityConfig};
use distchaos::lattice::run_lattice;
use distchaos::natset::parse_set;
use distchaos::orbits::{generate_orbit, generate_pair, OrbitError};
use distchaos::scenario::{Built, Scenario, ScenarioError};

pub const EXIT_IO: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Output produced before the failure, still printed to stdout.
    pub stdout: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into(), stdout: String::new() }
    }

    pub fn parse(m: impl Into<String>) -> Self {
        Self::new(EXIT_PARSE, m)
    }

    pub fn domain(m: impl Into<String>) -> Self {
        Self::new(EXIT_DOMAIN, m)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    pub fn from_scenario(e: ScenarioError) -> Self {
        Self::parse(e.to_string())
    }

    pub fn from_orbit(e: OrbitError) -> Self {
        match e {
            OrbitError::DomainExit { .. } | OrbitError::Offset(_) | OrbitError::Certification { .. } => {
                Self::domain(e.to_string())
            }
            OrbitError::Dimension(_) | OrbitError::OutsideSubspace(_) | OrbitError::Empty => Self::parse(e.to_string()),
            _ => Self::new(EXIT_IO, e.to_string()),
        }
    }

    pub fn from_classify(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Orbit(o) => Self::from_orbit(o),
            ClassifyError::TooShort { .. } => Self::new(EXIT_IO, e.to_string()),
            _ => Self::parse(e.to_string()),
        }
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let name = path.file_name().ok_or_else(|| Failure::new(EXIT_IO, format!("{}: not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Failure::io(path, e));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output types serialize");
    s.push('\n');
    s
}

pub struct DensityArgs<'a> {
    pub spec: &'a str,
    pub horizon: u64,
    pub window: u64,
    pub tail: f64,
    pub exact: bool,
    pub csv: Option<&'a Path>,
    pub stride: Option<u64>,
}

/// Density profile JSON for a set spec. With `exact`, falls back to
/// estimation when no closed form is known; `mode` reports which was used.
pub fn density(a: &DensityArgs) -> Result<(String, Vec<String>), Failure> {
    let set = parse_set(a.spec).map_err(|e| Failure::parse(e.to_string()))?;
    let cfg = DensityConfig::new(a.horizon, a.window, a.tail).map_err(|e| Failure::parse(e.to_string()))?;
    let mut notes = vec![];
    let profile = match a.exact.then(|| exact_profile(&set)) {
        Some(Ok(p)) => p,
        other => {
            if other.is_some() {
                notes.push("no closed form for this set; estimating".to_string());
            }
            estimate_profile(&set, &cfg).map_err(|e| Failure::parse(e.to_string()))?
        }
    };
    if let Some(path) = a.csv {
        let stride = a.stride.unwrap_or((a.horizon / 1000).max(1));
        let series = prefix_ratio_series(&set, &cfg, stride).map_err(|e| Failure::parse(e.to_string()))?;
        let mut out = String::from("n,ratio\n");
        for (n, r) in series {
            out.push_str(&format!("{n},{}\n", csv_float(r)));
        }
        write_atomic(path, out.as_bytes())?;
    }
    Ok((to_json(&profile), notes))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Scenario::from_json(&text).map_err(Failure::from_scenario)
}

fn resolve(flag: Option<&Path>, from_scenario: &Option<String>, base: &Path) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| {
        from_scenario.as_ref().map(|p| base.parent().unwrap_or(Path::new(".")).join(p))
    })
}

fn pair_stats_csv(b: &Built) -> Result<String, Failure> {
    let n = b.config.density.horizon as usize;
    let pair = generate_pair(&b.seq, &b.vectors[0], &b.vectors[1], &b.policy, &b.metric, n, b.seed)
        .map_err(Failure::from_orbit)?;
    let stats = density_stats(&pair.distances, &b.config).map_err(Failure::from_classify)?;
    Ok(stats.to_csv())
}

/// Classifies a scenario. Two vectors give a pair verdict; more vectors or a
/// manifold basis give a sample-set verdict. The verdict goes to `verdict`
/// (or `output.verdict` of the scenario) when set, else to stdout; the stats
/// CSV of the first pair goes to `stats` likewise.
pub fn classify(path: &Path, verdict: Option<&Path>, stats: Option<&Path>) -> Result<String, Failure> {
    let s = load_scenario(path)?;
    let b = s.build().map_err(Failure::from_scenario)?;
    if b.vectors.len() < 2 {
        return Err(Failure::parse("classification needs at least two vectors"));
    }
    let json = if b.vectors.len() == 2 && s.manifold_basis.is_none() {
        let n = b.config.density.horizon as usize;
        let pair = generate_pair(&b.seq, &b.vectors[0], &b.vectors[1], &b.policy, &b.metric, n, b.seed)
            .map_err(Failure::from_orbit)?;
        let v = classify_pair(&pair, &b.config).map_err(Failure::from_classify)?;
        let violations = implication_check(&v);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Failure::new(EXIT_MISMATCH, format!("implication violated: {}", list.join(", "))));
        }
        to_json(&v)
    } else {
        let v = classify_sample_set(&b.seq, &b.metric, &b.policy, &b.vectors, &b.config, b.seed)
            .map_err(Failure::from_classify)?;
        to_json(&v)
    };
    if let Some(p) = resolve(stats, &s.output.stats, path) {
        write_atomic(&p, pair_stats_csv(&b)?.as_bytes())?;
    }
    match resolve(verdict, &s.output.verdict, path) {
        Some(p) => {
            write_atomic(&p, json.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(json),
    }
}

/// Orbit CSV of the first vector: `k, p_1..p_M` and `d_k` against the second
/// vector when there is one.
pub fn orbit(path: &Path, csv: Option<&Path>, seminorms: Option<u32>) -> Result<String, Failure> {
    let s = load_scenario(path)?;
    let b = s.build().map_err(Failure::from_scenario)?;
    let n = b.config.density.horizon as usize;
    let dim = b.vectors[0].len();
    let m = seminorms.unwrap_or_else(|| b.metric.top_index(dim));
    if m == 0 {
        return Err(Failure::parse("at least one seminorm is required"));
    }
    let (ox, distances) = if b.vectors.len() >= 2 {
        let pair = generate_pair(&b.seq, &b.vectors[0], &b.vectors[1], &b.policy, &b.metric, n, b.seed)
            .map_err(Failure::from_orbit)?;
        (pair.x, Some(pair.distances))
    } else {
        let o = generate_orbit(&b.seq, &b.vectors[0], &b.policy, &b.metric, n, b.seed).map_err(Failure::from_orbit)?;
        (o, None)
    };
    let series: Vec<Vec<f64>> = (1..=m).map(|j| ox.seminorm_series(&b.metric, j)).collect();
    let mut out = String::from("k");
    for j in 1..=m {
        out.push_str(&format!(",p_{j}"));
    }
    if distances.is_some() {
        out.push_str(",d_k");
    }
    out.push('\n');
    for k in 0..n {
        out.push_str(&(k + 1).to_string());
        for s in &series {
            out.push(',');
            out.push_str(&csv_float(s[k]));
        }
        if let Some(d) = &distances {
            out.push(',');
            out.push_str(&csv_float(d[k]));
        }
        out.push('\n');
    }
    match resolve(csv, &s.output.orbit_csv, path) {
        Some(p) => {
            write_atomic(&p, out.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(out),
    }
}

/// PASS/FAIL lines for a preset; a mismatch fails with exit 4 and keeps the lines.
pub fn examples(p: presets::Preset, horizon: u64, scenario_out: Option<&Path>) -> Result<String, Failure> {
    if let Some(path) = scenario_out {
        let s = presets::scenario(p, horizon)
            .ok_or_else(|| Failure::parse(format!("{} has no single scenario", p.name())))?;
        let mut json = s.to_json();
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
    }
    let checks = presets::run(p, horizon)?;
    let mut out = String::new();
    for c in &checks {
        out.push_str(&format!("{} {}\n", p.name(), c.line()));
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    out.push_str(&format!("{} horizon={horizon} checks={} failed={failed}\n", p.name(), checks.len()));
    if failed > 0 {
        return Err(Failure { code: EXIT_MISMATCH, message: format!("{failed} check(s) failed"), stdout: out });
    }
    Ok(out)
}

/// Lattice self-check; one line per violation or error plus a summary. Any
/// violation fails with exit 4.
pub fn lattice(samples: usize, seed: u64, inject: bool, report: Option<&Path>) -> Result<String, Failure> {
    if samples == 0 {
        return Err(Failure::parse("samples must be positive"));
    }
    let r = run_lattice(samples, seed, inject);
    if let Some(p) = report {
        write_atomic(p, to_json(&r).as_bytes())?;
    }
    let mut out = String::new();
    for e in &r.entries {
        for v in &e.violations {
            out.push_str(&format!("VIOLATION seed={} kind={} edge={v}\n", e.seed, e.kind));
        }
        if let Some(err) = &e.error {
            out.push_str(&format!("ERROR seed={} kind={} {err}\n", e.seed, e.kind));
        }
    }
    out.push_str(&format!(
        "lattice samples={} seed={} injected={} violations={} errors={}\n",
        r.samples, r.seed, r.injected, r.violation_count, r.error_count
    ));
    if r.violation_count > 0 {
        return Err(Failure { code: EXIT_MISMATCH, message: "implication lattice violated".into(), stdout: out });
    }
    if r.error_count > 0 {
        return Err(Failure { code: EXIT_DOMAIN, message: "some scenarios failed to run".into(), stdout: out });
    }
    Ok(out)
}
