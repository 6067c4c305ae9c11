//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distchaos::config::ChaosConfig;
use distchaos::density::{estimate_profile, exact_profile, DensityConfig, DensityProfile};
use distchaos::lattice::run_lattice;
use distchaos::classify::{Flag, Violation};
use distchaos::linalg::{c, CMat, CVec};
use distchaos::metric::{frechet_distance, Metric, NormKind, SeminormFamily, Weights};
use distchaos::natset::{LengthRule, NatSetExpr, PositionRule};
use distchaos::orbits::{
    eigen_witness_default, generate_orbit, subsequence_to_zero, unbounded_verdict, DensityMode, OperatorSeq,
    SelectionPolicy,
};
use distchaos::relations::{FiniteRelation, LinearRelation};
use distchaos::sampling;
use distchaos_cli::presets::{self, Preset};

const N5: u64 = 100_000;
const N6: u64 = 1_000_000;
const WINDOW: u64 = 1_000;
const DENSITY_BUDGET: Duration = Duration::from_secs(30);
const PRESET_BUDGET: Duration = Duration::from_secs(60);
const EIG_TOL: f64 = 1e-8;
const RECI_RTOL: f64 = 1e-6;
const RECI_STEPS: usize = 50;
const ULPS: f64 = 4.0;
const METRIC_TUPLES: usize = 10_000;

type Outcome = Result<String, String>;

fn seeded(s: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(s)
}

fn cfg(n: u64) -> DensityConfig {
    DensityConfig::new(n, WINDOW, 0.5).unwrap()
}

/// `a + b == 1` on the stored fractions, without reduction.
fn sums_to_one(a: num_rational::Ratio<u64>, b: num_rational::Ratio<u64>) -> bool {
    let (an, ad) = (*a.numer() as u128, *a.denom() as u128);
    let (bn, bd) = (*b.numer() as u128, *b.denom() as u128);
    an * bd + bn * ad == ad * bd
}

fn duality(a: &DensityProfile, ac: &DensityProfile) -> bool {
    sums_to_one(a.lower, ac.upper)
        && sums_to_one(a.upper, ac.lower)
        && sums_to_one(a.lower_banach, ac.upper_banach)
        && sums_to_one(a.upper_banach, ac.lower_banach)
}

fn c1_density_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(1);
    let (mut exact_seen, mut bad) = (0, vec![]);
    for i in 0..100 {
        let a = sampling::natset(&mut rng, 3);
        let ac = NatSetExpr::complement(a.clone());
        let (pa, pc) = (estimate_profile(&a, &cfg(N5)).unwrap(), estimate_profile(&ac, &cfg(N5)).unwrap());
        if !duality(&pa, &pc) || !pa.chain_holds() || !pc.chain_holds() {
            bad.push(format!("#{i} {a}"));
        }
        if let Ok(e) = exact_profile(&a) {
            exact_seen += 1;
            if !e.chain_holds() {
                bad.push(format!("#{i} exact chain {a}"));
            }
        }
    }
    let t = start.elapsed();
    if !bad.is_empty() {
        return Err(format!("{} sets failed: {}", bad.len(), bad.join("; ")));
    }
    if t > DENSITY_BUDGET {
        return Err(format!("runtime {t:.1?} > {DENSITY_BUDGET:?}"));
    }
    Ok(format!("100 sets, {exact_seen} with closed form, {t:.1?}"))
}

fn c2_periodic_convergence() -> Outcome {
    let mut rng = seeded(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(1..=50u64);
        let mut r: BTreeSet<u64> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
        r.insert(rng.random_range(0..m));
        let target = r.len() as f64 / m as f64;
        let set = NatSetExpr::periodic(m, r.into_iter().collect()).unwrap();
        let p = estimate_profile(&set, &cfg(N5)).unwrap();
        let tol = 2.0 * m as f64 / N5 as f64;
        for v in p.values() {
            let err = (v - target).abs();
            worst = worst.max(err / tol);
            if err > tol {
                return Err(format!("periodic:{m} off by {err:e} > {tol:e}"));
            }
        }
    }
    Ok(format!("50 sets, worst error {worst:.3} of the 2m/N bound"))
}

fn c3_syndetic() -> Outcome {
    let mut rng = seeded(3);
    let mut cases: Vec<(NatSetExpr, bool)> = vec![];
    for _ in 0..20 {
        cases.push((sampling::periodic_set(&mut rng, 30), true));
    }
    while cases.len() < 40 {
        let pos = PositionRule::Geometric { c: rng.random_range(1..=20), r: rng.random_range(2..=4) };
        let len = if rng.random_bool(0.5) {
            LengthRule::Const(rng.random_range(1..=5))
        } else {
            LengthRule::Linear { scale: 1, offset: 0 }
        };
        if let Ok(s) = NatSetExpr::blocks(pos, len) {
            cases.push((s, false));
        }
    }
    for _ in 0..20 {
        cases.push((sampling::finite_set(&mut rng, 1000), false));
    }
    let mut disagreements = vec![];
    for (s, expected) in &cases {
        let synd = s.is_syndetic(N5).verdict;
        let p = exact_profile(s).unwrap_or_else(|_| estimate_profile(s, &cfg(N5)).unwrap());
        let positive = p.lower_banach_f64() > 0.0;
        if synd != positive || synd != *expected {
            disagreements.push(format!("{s}: syndetic={synd} Bd>0={positive}"));
        }
    }
    if disagreements.is_empty() {
        Ok(format!("{} cases, 0 disagreements", cases.len()))
    } else {
        Err(disagreements.join("; "))
    }
}

fn preset_flags(p: Preset, n: u64, flags: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let checks = presets::run(p, n).map_err(|f| f.message)?;
    let t = start.elapsed();
    for f in flags {
        let c = checks.iter().find(|c| c.name == *f).ok_or(format!("{} has no {f} check", p.name()))?;
        if !c.passed() {
            return Err(format!("{} N={n}: {}", p.name(), c.line()));
        }
    }
    Ok(t)
}

fn c4_primeran() -> Outcome {
    let mut times = vec![];
    for p in [Preset::PrimeranA, Preset::PrimeranB] {
        for n in [N5, N6] {
            let t = preset_flags(p, n, &["RDC", "RDC1", "RDC2"])?;
            if t > PRESET_BUDGET {
                return Err(format!("{} N={n} took {t:.1?}", p.name()));
            }
            times.push(format!("{}@{n}:{t:.1?}", p.name()));
        }
    }
    Ok(times.join(" "))
}

fn c5_alternating() -> Outcome {
    preset_flags(Preset::Alternating, N5, &["LY", "sLY", "RDC", "DC"]).map(|t| format!("LY only, {t:.1?}"))
}

fn c6_lattice() -> Outcome {
    let r = run_lattice(200, 0, false);
    if !r.ok() {
        return Err(format!("violations={} errors={} seeds={:?}", r.violation_count, r.error_count, r.violating_seeds));
    }
    let inj = run_lattice(3, 500, true);
    let edge = Violation { from: Flag::Dc, to: Flag::Ly };
    if inj.violating_seeds != vec![500] || !inj.entries[0].violations.contains(&edge) {
        return Err(format!("injection reported {:?}", inj.entries[0].violations));
    }
    Ok(format!("200 scenarios clean; injection reports {edge} at seed 500"))
}

/// Brute-force composition by pair chasing: first `r`, then `s`.
fn chase(s: &BTreeSet<(usize, usize)>, r: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for &(x, y) in r {
        for &(y2, z) in s {
            if y == y2 {
                out.insert((x, z));
            }
        }
    }
    out
}

fn support(m: &CMat) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for y in 0..m.nrows() {
        for x in 0..m.ncols() {
            if m[(y, x)].norm() > 0.5 {
                out.insert((x, y));
            }
        }
    }
    out
}

/// Orthonormal column basis spans exactly the coordinate subspace `idx`.
fn spans_coordinates(q: &CMat, n: usize, idx: &BTreeSet<usize>) -> bool {
    let p = q * q.adjoint();
    (0..n).all(|i| {
        (0..n).all(|j| {
            let want = if i == j && idx.contains(&i) { 1.0 } else { 0.0 };
            (p[(i, j)] - c(want)).norm() < 1e-9
        })
    })
}

fn c7_relations() -> Outcome {
    let mut rng = seeded(7);
    for case in 0..200 {
        let n = rng.random_range(1..=6);
        let r = sampling::finite_relation(&mut rng, n, 0.3);
        let s = sampling::finite_relation(&mut rng, n, 0.3);
        let (mr, ms) = (LinearRelation::from_matrix(&r.to_matrix()), LinearRelation::from_matrix(&s.to_matrix()));

        let composed = ms.compose(&mr).map_err(|e| e.to_string())?.as_matrix().ok_or("composition not a matrix")?;
        if support(&composed) != chase(&s.pairs, &r.pairs) {
            return Err(format!("case {case}: compose"));
        }
        let k = rng.random_range(0..=4);
        let mut brute: BTreeSet<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for _ in 0..k {
            brute = chase(&r.pairs, &brute);
        }
        let pw = mr.power(k).map_err(|e| e.to_string())?.as_matrix().ok_or("power not a matrix")?;
        if support(&pw) != brute {
            return Err(format!("case {case}: power {k}"));
        }

        let span = r.to_pair_span();
        let inv_brute = FiniteRelation::new(n, n, r.pairs.iter().map(|&(x, y)| (y, x)).collect()).unwrap();
        if !span.inverse().same_graph(&inv_brute.to_pair_span()) {
            return Err(format!("case {case}: inverse"));
        }
        let dom: BTreeSet<usize> = r.pairs.iter().map(|p| p.0).collect();
        let ran: BTreeSet<usize> = r.pairs.iter().map(|p| p.1).collect();
        let parts = span.parts();
        if !spans_coordinates(&parts.domain, n, &dom) || !spans_coordinates(&parts.range, n, &ran) {
            return Err(format!("case {case}: domain/range"));
        }
    }

    let mut worst = 0.0f64;
    for case in 0..100 {
        let d = rng.random_range(1..=8);
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let mc = m.map(c);
        let rel = LinearRelation::from_matrix(&mc);
        let direct = m.complex_eigenvalues();
        let spec = rel.eigenvalues().map_err(|e| e.to_string())?;
        let count: usize = spec.eigenpairs.iter().map(|p| p.multiplicity).sum();
        if spec.continuum || count != d {
            return Err(format!("matrix {case}: {count} eigenvalues for dimension {d}"));
        }
        for z in direct.iter() {
            let err = spec.eigenpairs.iter().map(|p| (p.lambda - z).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
            if err > EIG_TOL {
                return Err(format!("matrix {case}: eigenvalue {z} off by {err:e}"));
            }
        }
        if !rel.adjoint().same_graph(&LinearRelation::from_matrix(&mc.transpose())) {
            return Err(format!("matrix {case}: adjoint"));
        }
    }
    Ok(format!("200 finite relations exact; 100 matrices, worst eigenvalue error {worst:.1e}"))
}

fn c8_eigen_witness() -> Outcome {
    let mut rng = seeded(8);
    let n = 10_000;
    let cfg = ChaosConfig::default().with_horizon(n as u64);
    let metric = Metric::euclidean();
    for case in 0..20 {
        let modulus = rng.random_range(1.1..=3.0);
        let lambda = c(if rng.random_bool(0.5) { modulus } else { -modulus });
        let d = rng.random_range(2..=5);
        let extra = rng.random_range(0..=1);
        let (rel, x) = sampling::planted_relation(&mut rng, d, lambda, extra);
        let orbit = eigen_witness_default(&rel, lambda, &x, n).map_err(|e| format!("case {case}: {e}"))?;
        let mut prev = CVec::from_column_slice(&x);
        for k in 1..=16 {
            let next = CVec::from_vec(orbit.vector(k));
            if !rel.graph_member(&prev, &next).member {
                return Err(format!("case {case}: step {k} not in the graph"));
            }
            prev = next;
        }
        if !unbounded_verdict(&orbit.sizes(&metric), DensityMode::Plain, &cfg).verdict {
            return Err(format!("case {case}: not unbounded"));
        }
    }
    Ok("20 planted eigenpairs certified and unbounded".into())
}

fn c9_reci() -> Outcome {
    let mut rng = seeded(9);
    let n = 10_000;
    let cfg = ChaosConfig::default().with_horizon(n as u64);
    let metric = Metric::euclidean();
    let mut worst = 0.0f64;
    for case in 0..50 {
        let inst = sampling::adjoint_instance(&mut rng);
        let pair = |v: &[Complex64]| -> Complex64 { inst.xstar.iter().zip(v).map(|(a, b)| a * b.conj()).sum() };
        let seq = OperatorSeq::RelationPowers(inst.relation.clone());
        let orbit = generate_orbit(&seq, &inst.x, &SelectionPolicy::Canonical, &metric, n, 0)
            .map_err(|e| format!("case {case}: {e}"))?;
        let base = pair(&inst.x).norm();
        for k in 1..=RECI_STEPS {
            let want = inst.lambda.norm().powi(k as i32) * base;
            let got = pair(&orbit.vector(k)).norm();
            let rel = (got - want).abs() / want;
            worst = worst.max(rel);
            if rel > RECI_RTOL {
                return Err(format!("case {case}: n={k} relative error {rel:e}"));
            }
        }
        if subsequence_to_zero(&orbit.sizes(&metric), &cfg) {
            return Err(format!("case {case}: subsequence to zero"));
        }
    }
    Ok(format!("50 instances, worst relative error {worst:.1e}, SUB0 false throughout"))
}

fn ulps_slack(x: f64) -> f64 {
    ULPS * f64::EPSILON * x.abs()
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<Complex64> {
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    (0..d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale).collect()
}

fn random_family(rng: &mut ChaCha8Rng) -> SeminormFamily {
    match rng.random_range(0..4) {
        0 => SeminormFamily::CoordinateMax,
        1 => SeminormFamily::Weighted(Weights::PowersOfTwo),
        2 => SeminormFamily::SingleNorm(NormKind::Euclidean),
        _ => SeminormFamily::SingleNorm(NormKind::Sup),
    }
}

/// Direct evaluation of `Σ_{n≤M} 2^{-n} p_n/(1+p_n)` for `CoordinateMax`.
fn coordmax_oracle(m: u32, x: &[Complex64], y: &[Complex64]) -> f64 {
    (1..=m)
        .map(|n| {
            let p = x.iter().zip(y).take(n as usize).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            0.5f64.powi(n as i32) * p / (1.0 + p)
        })
        .sum()
}

fn c10_metric() -> Outcome {
    let mut rng = seeded(10);
    let d = |f: &SeminormFamily, m: u32, x: &[Complex64], y: &[Complex64]| frechet_distance(f, m, x, y).unwrap();
    let add = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> { a.iter().zip(b).map(|(p, q)| p + q).collect() };
    let mul = |s: Complex64, a: &[Complex64]| -> Vec<Complex64> { a.iter().map(|p| p * s).collect() };
    let mut fails = [0usize; 5];
    for _ in 0..METRIC_TUPLES {
        let dim = rng.random_range(1..=6);
        let m = rng.random_range(1..=60);
        let f = random_family(&mut rng);
        let (x, y, u, v) =
            (random_point(&mut rng, dim), random_point(&mut rng, dim), random_point(&mut rng, dim), random_point(&mut rng, dim));

        let want = coordmax_oracle(m, &x, &y);
        let got = d(&SeminormFamily::CoordinateMax, m, &x, &y);
        if (got - want).abs() > ulps_slack(want) {
            fails[0] += 1;
        }

        let rhs = d(&f, m, &x, &y) + d(&f, m, &u, &v);
        if d(&f, m, &add(&x, &u), &add(&y, &v)) > rhs + ulps_slack(rhs) {
            fails[1] += 1;
        }

        let s = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let rhs = (s.norm() + 1.0) * d(&f, m, &x, &y);
        if d(&f, m, &mul(s, &x), &mul(s, &y)) > rhs + ulps_slack(rhs) {
            fails[2] += 1;
        }

        let (a, b) = (c(rng.random_range(-5.0..5.0)), c(rng.random_range(-5.0..5.0)));
        let gap = (a - b).norm();
        let zero = vec![c(0.0); dim];
        let lhs = gap / (1.0 + gap) * d(&f, m, &zero, &x);
        if d(&f, m, &mul(a, &x), &mul(b, &x)) < lhs - ulps_slack(lhs) {
            fails[3] += 1;
        }

        let diff = (d(&f, m, &x, &y) - d(&f, m + 20, &x, &y)).abs();
        if diff > 0.5f64.powi(m as i32) {
            fails[4] += 1;
        }
    }
    if fails.iter().any(|&k| k > 0) {
        return Err(format!("violations [formula, translation, scalar, lower scalar, truncation] = {fails:?}"));
    }
    Ok(format!("{METRIC_TUPLES} tuples x 5 properties, 0 violations"))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_distchaos")
}

fn run_twice(args: &[&str], outputs: &[&Path]) -> Result<(), String> {
    let mut runs = vec![];
    for _ in 0..2 {
        let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
        let mut bytes = vec![out.stdout];
        for p in outputs {
            bytes.push(std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?);
            std::fs::remove_file(p).ok();
        }
        runs.push((out.status.code(), bytes));
    }
    if runs[0] != runs[1] {
        return Err(format!("`distchaos {}` differs between runs", args.join(" ")));
    }
    Ok(())
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let scen = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let s = |name: &str| scen.join(name).to_string_lossy().into_owned();
    let (csv, verdict, stats, orbit, report) =
        (p("ratio.csv"), p("verdict.json"), p("stats.csv"), p("orbit.csv"), p("lattice.json"));
    let str = |x: &Path| x.to_string_lossy().into_owned();
    run_twice(
        &["density", "blocks:pos=geom(3,2):len=linear", "--horizon", "50000", "--csv", &str(&csv)],
        &[&csv],
    )?;
    run_twice(
        &["classify", &s("manifold.json"), "--verdict", &str(&verdict), "--stats", &str(&stats)],
        &[&verdict, &stats],
    )?;
    run_twice(&["orbit", &s("manifold.json"), "--csv", &str(&orbit)], &[&orbit])?;
    run_twice(&["lattice", "--samples", "40", "--seed", "11", "--report", &str(&report)], &[&report])?;
    run_twice(&["examples", "alternating", "--horizon", "20000"], &[])?;
    Ok("density, classify, orbit, lattice, examples byte-identical across runs".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("density identities", c1_density_identities),
        ("periodic convergence", c2_periodic_convergence),
        ("syndetic vs lower Banach density", c3_syndetic),
        ("primeran presets", c4_primeran),
        ("alternating counterexample", c5_alternating),
        ("implication lattice", c6_lattice),
        ("relation algebra oracles", c7_relations),
        ("eigenvalue witness", c8_eigen_witness),
        ("adjoint eigenpair invariant", c9_reci),
        ("metric properties", c10_metric),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{t:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{t:.1?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
