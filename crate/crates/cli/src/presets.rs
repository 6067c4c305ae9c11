//! Built-in example scenarios with their expected flags.

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distchaos::classify::{classify_pair, ChaosVerdict, Flag};
use distchaos::config::ChaosConfig;
use distchaos::density::{estimate_profile, DensityConfig, DensityProfile};
use distchaos::natset::{parse_set, NatSetExpr};
use distchaos::orbits::{
    eigen_witness_default, generate_orbit, generate_pair, irregular_class, subsequence_to_zero, unbounded_verdict,
    DensityMode, SelectionPolicy,
};
use distchaos::metric::Metric;
use distchaos::sampling::{adjoint_instance, pairing};
use distchaos::scenario::{CoefSpec, GateSpec, Num, OperatorSpec, RelationSpec, Scenario};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PrimeranA,
    PrimeranB,
    Alternating,
    EigenWitness,
    Reci,
    BlocksetBanach,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::PrimeranA => "primeran-a",
            Preset::PrimeranB => "primeran-b",
            Preset::Alternating => "alternating",
            Preset::EigenWitness => "eigen-witness",
            Preset::Reci => "reci",
            Preset::BlocksetBanach => "blockset-banach",
        }
    }
}

pub const PRIMERAN_A_SET: &str = "blocks:pos=geom(25000,2):len=ratio(1,50)";
pub const PRIMERAN_B_SET: &str = "blocks:pos=poly(1000,2):len=linear(1000)";
pub const BLOCKSET_B: &str = "blocks:pos=poly(2,3):len=affine(1,1)";
pub const BLOCKSET_A: &str = "inter(blocks:pos=poly(3,3):len=linear,compl(blocks:pos=poly(2,3):len=affine(1,1)))";
pub const BLOCKSET_WINDOW: u64 = 16;
/// Growth threshold of the primeran presets; `k·x` passes it inside the horizon.
pub const PRIMERAN_GROWTH: f64 = 1e4;
pub const RECI_INSTANCES: usize = 10;
pub const RECI_STEPS: usize = 50;
pub const RECI_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: bool,
    pub actual: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: bool, actual: bool) -> Self {
        Check { name: name.into(), expected, actual }
    }

    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} expected={} actual={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.expected,
            self.actual
        )
    }
}

fn real(x: f64) -> Num {
    Num::Real(x)
}

fn gated(gates: Vec<(&str, CoefSpec)>, default: CoefSpec) -> OperatorSpec {
    OperatorSpec::ScalarGated {
        dim: 1,
        gates: gates.into_iter().map(|(s, coef)| GateSpec { set: s.to_string(), coef }).collect(),
        default,
    }
}

fn base(operator: OperatorSpec, vectors: Vec<Vec<Num>>, config: ChaosConfig) -> Scenario {
    Scenario {
        operator,
        metric: Default::default(),
        vectors: Some(vectors),
        manifold_basis: None,
        policy: Default::default(),
        config,
        seed: 0,
        output: Default::default(),
    }
}

fn config(horizon: u64, window: u64) -> ChaosConfig {
    ChaosConfig { density: DensityConfig { horizon, window, ..DensityConfig::default() }, ..ChaosConfig::default() }
}

/// The scenario behind a preset, when it has one (`reci` is a random family).
pub fn scenario(p: Preset, horizon: u64) -> Option<Scenario> {
    let window = DensityConfig::default().window;
    let s = match p {
        Preset::PrimeranA | Preset::PrimeranB => {
            let set = if p == Preset::PrimeranA { PRIMERAN_A_SET } else { PRIMERAN_B_SET };
            let cfg = ChaosConfig { growth: PRIMERAN_GROWTH, ..config(horizon, window) };
            base(
                gated(vec![(set, CoefSpec::Linear(real(1.0)))], CoefSpec::Const(real(0.0))),
                vec![vec![real(1.0)], vec![real(2.0)], vec![real(3.0)]],
                cfg,
            )
        }
        Preset::Alternating => base(
            OperatorSpec::Alternating { matrices: vec![vec![vec![real(1.0)]], vec![vec![real(0.0)]]] },
            vec![vec![real(1.0)], vec![real(0.0)]],
            config(horizon, window),
        ),
        Preset::EigenWitness => base(
            OperatorSpec::RelationPowers { relation: RelationSpec::Text(eigen_matrix().to_string()) },
            vec![vec![real(1.0), real(0.0)], vec![real(0.0), real(0.0)]],
            config(horizon, window),
        ),
        Preset::BlocksetBanach => base(
            gated(
                vec![(BLOCKSET_A, CoefSpec::Geometric(real(0.5))), (BLOCKSET_B, CoefSpec::Geometric(real(2.0)))],
                CoefSpec::Const(real(1.0)),
            ),
            vec![vec![real(1.0)], vec![real(0.0)]],
            config(horizon, BLOCKSET_WINDOW),
        ),
        Preset::Reci => return None,
    };
    Some(s)
}

fn eigen_matrix() -> &'static str {
    "matrix:[[2,0],[0,0.3333333333333333]]"
}

fn set(s: &str) -> NatSetExpr {
    parse_set(s).expect("preset sets parse")
}

fn profile(s: &NatSetExpr, cfg: &DensityConfig) -> Result<DensityProfile, Failure> {
    estimate_profile(s, cfg).map_err(|e| Failure::domain(e.to_string()))
}

/// Checks that `A` and its companion `B` form a partition of `[1, N]`.
fn partition_checks(a: &NatSetExpr, b: &NatSetExpr, cfg: &DensityConfig) -> Vec<Check> {
    let (ia, ib) = (a.indicator(cfg.horizon), b.indicator(cfg.horizon));
    let disjoint = ia.iter().zip(&ib).skip(1).all(|(x, y)| !(x & y));
    let cover = ia.iter().zip(&ib).skip(1).all(|(x, y)| x | y);
    vec![Check::new("A and B disjoint", true, disjoint), Check::new("A ∪ B covers [1,N]", true, cover)]
}

fn flag_checks(v: &ChaosVerdict, expected: &[(Flag, bool)]) -> Vec<Check> {
    expected.iter().map(|&(f, e)| Check::new(f.name(), e, v.get(f))).collect()
}

fn classify_first_pair(s: &Scenario) -> Result<ChaosVerdict, Failure> {
    let b = s.build().map_err(Failure::from_scenario)?;
    let n = b.config.density.horizon as usize;
    let pair = generate_pair(&b.seq, &b.vectors[0], &b.vectors[1], &b.policy, &b.metric, n, b.seed)
        .map_err(Failure::from_orbit)?;
    classify_pair(&pair, &b.config).map_err(Failure::from_classify)
}

fn primeran(p: Preset, horizon: u64) -> Result<Vec<Check>, Failure> {
    let s = scenario(p, horizon).expect("primeran has a scenario");
    let cfg = s.config.clone();
    let a = set(if p == Preset::PrimeranA { PRIMERAN_A_SET } else { PRIMERAN_B_SET });
    let b = NatSetExpr::complement(a.clone());
    let mut out = partition_checks(&a, &b, &cfg.density);
    let (pa, pb) = (profile(&a, &cfg.density)?, profile(&b, &cfg.density)?);
    let high = 1.0 - cfg.theta1;
    let subcase_a = p == Preset::PrimeranA;
    out.push(Check::new("Bd(A) upper >= 1-θ1", true, pa.upper_banach_f64() >= high));
    out.push(Check::new("Bd(B) upper >= 1-θ1", true, pb.upper_banach_f64() >= high));
    out.push(Check::new("d(A) upper <= 0.6", true, pa.upper_f64() <= 0.6));
    out.push(Check::new("d(B) upper >= 1-θ1", subcase_a, pb.upper_f64() >= high));

    let v = classify_first_pair(&s)?;
    let expect = if subcase_a {
        [(Flag::Rdc, true), (Flag::Rdc1, true), (Flag::Rdc2, false)]
    } else {
        [(Flag::Rdc, true), (Flag::Rdc1, false), (Flag::Rdc2, false)]
    };
    out.extend(flag_checks(&v, &expect));

    let b = s.build().map_err(Failure::from_scenario)?;
    let orbit = generate_orbit(&b.seq, &b.vectors[0], &b.policy, &b.metric, horizon as usize, b.seed)
        .map_err(Failure::from_orbit)?;
    let rep = irregular_class(&orbit, &b.metric, 1, &cfg).map_err(Failure::from_orbit)?;
    out.push(Check::new("near zero (plain)", subcase_a, rep.near_zero));
    out.push(Check::new("near zero (reiterative)", true, rep.near_zero_reiterative));
    out.push(Check::new("irregular iii_reit", true, rep.labels.iter().any(|l| l == "iii_reit")));
    Ok(out)
}

fn alternating(horizon: u64) -> Result<Vec<Check>, Failure> {
    let s = scenario(Preset::Alternating, horizon).expect("alternating has a scenario");
    let v = classify_first_pair(&s)?;
    Ok(flag_checks(&v, &[(Flag::Ly, true), (Flag::SLy, false), (Flag::Rdc, false), (Flag::Dc, false)]))
}

fn eigen_witness(horizon: u64) -> Result<Vec<Check>, Failure> {
    let rel = RelationSpec::Text(eigen_matrix().to_string()).build().map_err(Failure::from_scenario)?;
    let cfg = config(horizon, DensityConfig::default().window);
    let x = [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)];
    let lambda = num_complex::Complex64::new(2.0, 0.0);
    let orbit = eigen_witness_default(&rel, lambda, &x, horizon as usize);
    let certified = orbit.is_ok();
    let mut out = vec![Check::new("eigen witness certified", true, certified)];
    let Ok(orbit) = orbit else { return Ok(out) };
    let metric = Metric::euclidean();
    let p1 = orbit.seminorm_series(&metric, 1);
    let doubling = p1.windows(2).take(60).all(|w| (w[1] / w[0] - 2.0).abs() <= 1e-12);
    out.push(Check::new("p_1 doubles", true, doubling));
    out.push(Check::new(
        "unbounded (plain)",
        true,
        unbounded_verdict(&p1, DensityMode::Plain, &cfg).verdict,
    ));
    Ok(out)
}

fn reci(horizon: u64) -> Result<Vec<Check>, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = config(horizon, DensityConfig::default().window);
    let metric = Metric::euclidean();
    let (mut law, mut sub0) = (true, false);
    for _ in 0..RECI_INSTANCES {
        let inst = adjoint_instance(&mut rng);
        let seq = distchaos::orbits::OperatorSeq::RelationPowers(inst.relation.clone());
        let orbit = generate_orbit(&seq, &inst.x, &SelectionPolicy::Canonical, &metric, horizon as usize, 0)
            .map_err(Failure::from_orbit)?;
        let base = pairing(&inst.xstar, &inst.x).norm().log2();
        let rate = inst.lambda.norm().log2();
        for n in 1..=RECI_STEPS.min(horizon as usize) {
            let got = orbit.pairing_log2(n, &inst.xstar).unwrap_or(f64::NEG_INFINITY);
            let want = base + n as f64 * rate;
            law &= ((got - want) * std::f64::consts::LN_2).exp_m1().abs() <= RECI_RTOL;
        }
        sub0 |= subsequence_to_zero(&orbit.sizes(&metric), &cfg);
    }
    Ok(vec![
        Check::new("|<x*,x_n>| = |λ|^n |<x*,x>|", true, law),
        Check::new("SUB0", false, sub0),
    ])
}

fn blockset(horizon: u64) -> Result<Vec<Check>, Failure> {
    let s = scenario(Preset::BlocksetBanach, horizon).expect("blockset has a scenario");
    let (a, b) = (set(BLOCKSET_A), set(BLOCKSET_B));
    let (ia, ib) = (a.indicator(horizon), b.indicator(horizon));
    let mut out = vec![Check::new("A and B disjoint", true, ia.iter().zip(&ib).all(|(x, y)| !(x & y)))];
    let high = 1.0 - s.config.theta1;
    let (pa, pb) = (profile(&a, &s.config.density)?, profile(&b, &s.config.density)?);
    out.push(Check::new("Bd(A) upper >= 1-θ1", true, pa.upper_banach_f64() >= high));
    out.push(Check::new("Bd(B) upper >= 1-θ1", true, pb.upper_banach_f64() >= high));
    let v = classify_first_pair(&s)?;
    out.extend(flag_checks(&v, &[(Flag::Rdc, true), (Flag::Mix1, true), (Flag::Mix3, true), (Flag::Ly, true)]));
    Ok(out)
}

/// Runs every check of a preset at horizon `N`.
pub fn run(p: Preset, horizon: u64) -> Result<Vec<Check>, Failure> {
    DensityConfig::new(horizon, 1, 0.5).map_err(|e| Failure::parse(e.to_string()))?;
    match p {
        Preset::PrimeranA | Preset::PrimeranB => primeran(p, horizon),
        Preset::Alternating => alternating(horizon),
        Preset::EigenWitness => eigen_witness(horizon),
        Preset::Reci => reci(horizon),
        Preset::BlocksetBanach => blockset(horizon),
    }
}
