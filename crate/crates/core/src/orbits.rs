//! Orbits of operator sequences, representative selection for multivalued
//! steps, and the irregular-vector verdicts built on one frozen orbit.
//!
//! Orbit vectors are stored as `2^e · v` with `max |v_i| ∈ [1, 2)`, so
//! geometric growth over tens of thousands of steps never overflows;
//! magnitudes derived from them saturate at `f64::MAX`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::ChaosConfig;
use crate::density::{profile_from_indicator, DensityProfile};
use crate::linalg::{self, complement, null_space, orth, residual, CMat, CVec};
use crate::metric::{ldexp_sat, Metric};
use crate::natset::NatSetExpr;
use crate::relations::{LinearRelation, RelationError, DEFAULT_POWER_CAP};

/// Relative tolerance for "x lies in D(A)".
const DOMAIN_TOL: f64 = 1e-8;
const ZERO_EXP: i64 = i64::MIN / 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("vector leaves the domain at k={k} (residual {residual:.3e})")]
    DomainExit { k: usize, residual: f64 },
    #[error("offset is not in the multivalued part at k={0}")]
    Offset(usize),
    #[error("selected representative failed certification at k={k} (relative residual {relative:.3e})")]
    Certification { k: usize, relative: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("orbit horizons differ: {0} vs {1}")]
    Horizon(usize, usize),
    #[error("(x, λx) is not in the graph (relative residual {0:.3e})")]
    NotEigenpair(f64),
    #[error("vector {0} is outside the subspace")]
    OutsideSubspace(usize),
    #[error("empty operator list")]
    Empty,
    #[error(transparent)]
    Relation(#[from] RelationError),
}

/// Scalar coefficient `c_k` of a gated scalar sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefRule {
    Const(Complex64),
    /// `c_k = a·k`
    Linear(Complex64),
    /// `c_k = r^k`
    Geometric(Complex64),
}

impl CoefRule {
    /// `c_k` as `(e, m)` with value `2^e · m`.
    fn scaled(&self, k: usize) -> (i64, Complex64) {
        match self {
            CoefRule::Const(c) => (0, *c),
            CoefRule::Linear(a) => (0, *a * k as f64),
            CoefRule::Geometric(r) => {
                if r.norm() == 0.0 {
                    return (0, Complex64::new(0.0, 0.0));
                }
                let lg = r.norm().log2() * k as f64;
                let e = lg.floor();
                let phase = Complex64::from_polar(1.0, r.arg() * k as f64);
                (e as i64, phase * (lg - e).exp2())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub set: NatSetExpr,
    pub coef: CoefRule,
}

/// `k ↦ T_k`; orbits are `x_k ∈ T_k x`.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSeq {
    /// `T_k = M^k`
    Powers(CMat),
    /// `T_k = c_k I`, with `c_k` from the first gate whose set contains `k`.
    ScalarGated { dim: usize, gates: Vec<Gate>, default: CoefRule },
    /// `T_k = list[(k−1) mod len]`
    Alternating(Vec<CMat>),
    /// `T_k = A^k`
    RelationPowers(LinearRelation),
    /// `T_k = list[(k−1) mod len]`
    ExplicitRelSeq(Vec<LinearRelation>),
}

impl OperatorSeq {
    pub fn dim(&self) -> Result<usize, OrbitError> {
        let square = |r: usize, c: usize| {
            if r == c {
                Ok(r)
            } else {
                Err(OrbitError::Dimension(format!("{r}x{c} member is not square")))
            }
        };
        let same = |dims: Vec<usize>| {
            let d = *dims.first().ok_or(OrbitError::Empty)?;
            if dims.iter().any(|&x| x != d) {
                return Err(OrbitError::Dimension("members differ in dimension".into()));
            }
            Ok(d)
        };
        match self {
            OperatorSeq::Powers(m) => square(m.nrows(), m.ncols()),
            OperatorSeq::ScalarGated { dim, .. } => Ok(*dim),
            OperatorSeq::Alternating(l) => {
                let dims = l.iter().map(|m| square(m.nrows(), m.ncols())).collect::<Result<Vec<_>, _>>()?;
                same(dims)
            }
            OperatorSeq::RelationPowers(a) => square(a.dx(), a.dy()),
            OperatorSeq::ExplicitRelSeq(l) => {
                let dims = l.iter().map(|a| square(a.dx(), a.dy())).collect::<Result<Vec<_>, _>>()?;
                same(dims)
            }
        }
    }

    /// Single-valued sequences whose orbits scale linearly with the base vector.
    pub fn is_matrix_seq(&self) -> bool {
        matches!(
            self,
            OperatorSeq::Powers(_) | OperatorSeq::ScalarGated { .. } | OperatorSeq::Alternating(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    /// Minimal-norm representative: the component orthogonal to `A_k0`.
    Canonical,
    /// Canonical representative plus a fixed element of `A_k0`.
    Offset(Vec<Complex64>),
    /// Best of `budget` lattice offsets in `A_k0` of radius `2^k`, by current pair distance.
    MaximizeGap { budget: usize },
}

/// `2^exp · v`; the zero vector carries `ZERO_EXP`.
#[derive(Debug, Clone, PartialEq)]
struct Scaled {
    exp: i64,
    v: Vec<Complex64>,
}

impl Scaled {
    fn new(exp: i64, v: Vec<Complex64>) -> Self {
        let mut s = Scaled { exp, v };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        let m = self.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if m == 0.0 || !m.is_finite() {
            self.exp = ZERO_EXP;
            self.v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            return;
        }
        let e = m.log2().floor() as i32;
        let f = 2f64.powi(-e);
        self.v.iter_mut().for_each(|z| *z *= f);
        self.exp += e as i64;
    }

    /// `a·2^{ea} + b·2^{eb}` at the larger exponent.
    fn add(a: &Scaled, b: &Scaled, sign: f64) -> Scaled {
        let e = a.exp.max(b.exp);
        if e == ZERO_EXP {
            return Scaled { exp: ZERO_EXP, v: vec![Complex64::new(0.0, 0.0); a.v.len()] };
        }
        let fa = ldexp_sat(1.0, a.exp - e);
        let fb = ldexp_sat(1.0, b.exp - e) * sign;
        let v = a.v.iter().zip(&b.v).map(|(x, y)| x * fa + y * fb).collect();
        Scaled::new(e, v)
    }
}

/// A selected orbit `(x_k)_{1 ≤ k ≤ N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub base: Vec<Complex64>,
    pub horizon: usize,
    pub dim: usize,
    exps: Vec<i64>,
    coords: Vec<Complex64>,
}

impl Orbit {
    fn with_capacity(base: Vec<Complex64>, horizon: usize) -> Self {
        let dim = base.len();
        Orbit { base, horizon, dim, exps: Vec::with_capacity(horizon), coords: Vec::with_capacity(horizon * dim) }
    }

    fn push(&mut self, s: Scaled) {
        self.exps.push(s.exp);
        self.coords.extend(s.v);
    }

    fn scaled(&self, k: usize) -> Scaled {
        let i = k - 1;
        Scaled { exp: self.exps[i], v: self.coords[i * self.dim..(i + 1) * self.dim].to_vec() }
    }

    /// `(e, v)` with `x_k = 2^e · v`; `k` is 1-based.
    pub fn parts(&self, k: usize) -> (i64, &[Complex64]) {
        let i = k - 1;
        (self.exps[i], &self.coords[i * self.dim..(i + 1) * self.dim])
    }

    /// `x_k` as plain floats, saturating at `f64::MAX` per coordinate.
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        let (e, v) = self.parts(k);
        if e == ZERO_EXP {
            return vec![Complex64::new(0.0, 0.0); self.dim];
        }
        v.iter().map(|z| Complex64::new(ldexp_sat(z.re, e), ldexp_sat(z.im, e))).collect()
    }

    /// `log2 ‖x_k‖_2`, `-∞` for the zero vector.
    pub fn log2_norm(&self, k: usize) -> f64 {
        let (e, v) = self.parts(k);
        if e == ZERO_EXP {
            return f64::NEG_INFINITY;
        }
        e as f64 + v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().log2()
    }

    /// `distance(x_k, 0)` for `k = 1..=N`.
    pub fn sizes(&self, metric: &Metric) -> Vec<f64> {
        (1..=self.horizon).map(|k| size_of(metric, self.parts(k))).collect()
    }

    /// `p_m(x_k)` for `k = 1..=N`.
    pub fn seminorm_series(&self, metric: &Metric, m: u32) -> Vec<f64> {
        (1..=self.horizon)
            .map(|k| {
                let (e, v) = self.parts(k);
                if e == ZERO_EXP {
                    return 0.0;
                }
                let p = metric.family.eval(m, v).expect("index >= 1");
                ldexp_sat(p, e)
            })
            .collect()
    }

    /// `⟨f, x_k⟩ = Σ f_i conj(x_i)` as `(log2 |·|, phase)`; `None` when zero.
    pub fn pairing_log2(&self, k: usize, f: &[Complex64]) -> Option<f64> {
        let (e, v) = self.parts(k);
        if e == ZERO_EXP {
            return None;
        }
        let s: Complex64 = f.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
        (s.norm() > 0.0).then(|| e as f64 + s.norm().log2())
    }
}

fn size_of(metric: &Metric, (e, v): (i64, &[Complex64])) -> f64 {
    if e == ZERO_EXP {
        0.0
    } else {
        metric.size_scaled(e, v)
    }
}

fn top_of(metric: &Metric, (e, v): (i64, &[Complex64])) -> f64 {
    if e == ZERO_EXP {
        0.0
    } else {
        metric.top_seminorm_scaled(e, v)
    }
}

/// Precomputed canonical selection for one relation.
struct Selector {
    rel: LinearRelation,
    domain: CMat,
    lift: CMat,
    a0: CMat,
}

impl Selector {
    fn new(rel: &LinearRelation) -> Self {
        let d = rel.dx();
        let g = rel.basis();
        let p = g.rows(0, d).into_owned();
        let q = g.rows(d, rel.dy()).into_owned();
        let ker_p = null_space(&p);
        let dom = complement(&ker_p, rel.graph_dim());
        let pd = &p * &dom;
        let a0 = orth(&(&q * &ker_p));
        let pinv = pd.clone().pseudo_inverse(1e-12).expect("pseudo-inverse with nonnegative eps");
        let proj = CMat::identity(rel.dy(), rel.dy()) - &a0 * a0.adjoint();
        Selector { rel: rel.clone(), domain: orth(&pd), lift: proj * (&q * &dom) * pinv, a0 }
    }

    fn in_domain(&self, v: &[Complex64]) -> Result<(), f64> {
        let x = CVec::from_column_slice(v);
        let r = residual(&self.domain, &x);
        if r <= DOMAIN_TOL * (1.0 + x.norm()) {
            Ok(())
        } else {
            Err(r)
        }
    }

    fn canonical(&self, v: &[Complex64]) -> Vec<Complex64> {
        (&self.lift * CVec::from_column_slice(v)).as_slice().to_vec()
    }

    fn certify(&self, k: usize, input: &Scaled, out: &Scaled) -> Result<(), OrbitError> {
        if input.exp == ZERO_EXP {
            // 0 ∈ A0 ⊆ A·0; any representative of A0 is admissible
            if out.exp == ZERO_EXP {
                return Ok(());
            }
            let y = CVec::from_column_slice(&out.v);
            let r = residual(&self.a0, &y);
            return if r <= linalg::TAU_RES * (1.0 + y.norm()) {
                Ok(())
            } else {
                Err(OrbitError::Certification { k, relative: r / y.norm() })
            };
        }
        // membership is homogeneous, so test both at the larger scale
        let e = input.exp.max(out.exp);
        let (fx, fy) = (ldexp_sat(1.0, input.exp - e), ldexp_sat(1.0, out.exp - e));
        let x = CVec::from_iterator(input.v.len(), input.v.iter().map(|z| z * fx));
        let y = CVec::from_iterator(out.v.len(), out.v.iter().map(|z| z * fy));
        let m = self.rel.graph_member(&x, &y);
        if m.member {
            Ok(())
        } else {
            Err(OrbitError::Certification { k, relative: m.relative })
        }
    }
}

/// Lattice points of `(1/4)ℤ^n` in the closed unit ball, drawn from a seeded stream.
fn lattice_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64 / 4.0).collect();
        if t.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return t;
        }
    }
}

struct Stepper<'a> {
    seq: &'a OperatorSeq,
    selectors: Vec<Selector>,
    gate_sets: Vec<Vec<bool>>,
}

impl<'a> Stepper<'a> {
    /// With `restriction`, the first power (or every listed relation) has its
    /// domain cut down to the given subspace.
    fn new(seq: &'a OperatorSeq, n: usize, restriction: Option<&CMat>) -> Self {
        let selectors = match (seq, restriction) {
            (OperatorSeq::RelationPowers(a), None) => vec![Selector::new(a)],
            (OperatorSeq::RelationPowers(a), Some(q)) => {
                vec![Selector::new(&restrict_relation(a, q)), Selector::new(a)]
            }
            (OperatorSeq::ExplicitRelSeq(l), None) => l.iter().map(Selector::new).collect(),
            (OperatorSeq::ExplicitRelSeq(l), Some(q)) => {
                l.iter().map(|a| Selector::new(&restrict_relation(a, q))).collect()
            }
            _ => vec![],
        };
        let gate_sets = match seq {
            OperatorSeq::ScalarGated { gates, .. } => gates.iter().map(|g| g.set.indicator(n as u64)).collect(),
            _ => vec![],
        };
        Stepper { seq, selectors, gate_sets }
    }
}

/// Generates `x_k ∈ T_k x` for `k = 1..=n`.
///
/// With [`SelectionPolicy::MaximizeGap`] the offsets maximize the distance to
/// `partner` (or to the origin when absent).
pub fn generate_orbit(
    seq: &OperatorSeq,
    x: &[Complex64],
    policy: &SelectionPolicy,
    metric: &Metric,
    n: usize,
    seed: u64,
) -> Result<Orbit, OrbitError> {
    generate_against(seq, x, policy, metric, n, seed, None, None)
}

fn generate_against(
    seq: &OperatorSeq,
    x: &[Complex64],
    policy: &SelectionPolicy,
    metric: &Metric,
    n: usize,
    seed: u64,
    partner: Option<&Orbit>,
    restriction: Option<&CMat>,
) -> Result<Orbit, OrbitError> {
    let d = seq.dim()?;
    if x.len() != d {
        return Err(OrbitError::Dimension(format!("vector has {} coordinates, space has {d}", x.len())));
    }
    if let SelectionPolicy::Offset(o) = policy {
        if o.len() != d {
            return Err(OrbitError::Dimension("offset has the wrong dimension".into()));
        }
    }
    let st = Stepper::new(seq, n, restriction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Scaled::new(0, x.to_vec());
    let mut orbit = Orbit::with_capacity(x.to_vec(), n);
    let mut prev = base.clone();
    for k in 1..=n {
        let next = match st.seq {
            OperatorSeq::Powers(m) => {
                let v = m * CVec::from_column_slice(&prev.v);
                Scaled::new(prev.exp, v.as_slice().to_vec())
            }
            OperatorSeq::ScalarGated { gates, default, .. } => {
                let rule = st
                    .gate_sets
                    .iter()
                    .position(|s| s[k - 1])
                    .map_or(default, |i| &gates[i].coef);
                let (e, c) = rule.scaled(k);
                Scaled::new(e, base.v.iter().map(|z| z * c).collect())
                    .with_offset_exp(base.exp)
            }
            OperatorSeq::Alternating(list) => {
                let m = &list[(k - 1) % list.len()];
                let v = m * CVec::from_column_slice(&base.v);
                Scaled::new(base.exp, v.as_slice().to_vec())
            }
            OperatorSeq::RelationPowers(_) | OperatorSeq::ExplicitRelSeq(_) => {
                let (sel, input) = match st.seq {
                    OperatorSeq::RelationPowers(_) => (&st.selectors[if k == 1 { 0 } else { st.selectors.len() - 1 }], &prev),
                    _ => (&st.selectors[(k - 1) % st.selectors.len()], &base),
                };
                select(sel, k, input, policy, metric, partner, &mut rng)?
            }
        };
        orbit.push(next.clone());
        prev = next;
    }
    Ok(orbit)
}

impl Scaled {
    fn with_offset_exp(mut self, e: i64) -> Self {
        if self.exp != ZERO_EXP && e != ZERO_EXP {
            self.exp += e;
        }
        if e == ZERO_EXP {
            self.exp = ZERO_EXP;
        }
        self
    }
}

fn select(
    sel: &Selector,
    k: usize,
    input: &Scaled,
    policy: &SelectionPolicy,
    metric: &Metric,
    partner: Option<&Orbit>,
    rng: &mut ChaCha8Rng,
) -> Result<Scaled, OrbitError> {
    if input.exp != ZERO_EXP {
        sel.in_domain(&input.v).map_err(|residual| OrbitError::DomainExit { k, residual })?;
    }
    let canon = if input.exp == ZERO_EXP {
        Scaled { exp: ZERO_EXP, v: vec![Complex64::new(0.0, 0.0); input.v.len()] }
    } else {
        Scaled::new(input.exp, sel.canonical(&input.v))
    };
    let out = match policy {
        SelectionPolicy::Canonical => canon,
        SelectionPolicy::Offset(o) => {
            let ov = CVec::from_column_slice(o);
            if residual(&sel.a0, &ov) > linalg::TAU_RES * (1.0 + ov.norm()) {
                return Err(OrbitError::Offset(k));
            }
            Scaled::add(&canon, &Scaled::new(0, o.clone()), 1.0)
        }
        SelectionPolicy::MaximizeGap { budget } => {
            let a0 = &sel.a0;
            let target = partner.map(|p| p.scaled(k));
            let score = |s: &Scaled| match &target {
                Some(t) => {
                    let diff = Scaled::add(s, t, -1.0);
                    size_of(metric, (diff.exp, &diff.v))
                }
                None => size_of(metric, (s.exp, &s.v)),
            };
            let mut best = canon.clone();
            let mut best_score = score(&best);
            if a0.ncols() > 0 {
                for _ in 0..*budget {
                    let t = lattice_sample(rng, a0.ncols());
                    let tv = CVec::from_iterator(t.len(), t.iter().map(|&v| Complex64::new(v, 0.0)));
                    let off = Scaled::new(k as i64, (a0 * tv).as_slice().to_vec());
                    let cand = Scaled::add(&canon, &off, 1.0);
                    let sc = score(&cand);
                    if sc > best_score {
                        best = cand;
                        best_score = sc;
                    }
                }
            }
            best
        }
    };
    sel.certify(k, input, &out)?;
    Ok(out)
}

/// Two orbits over the same sequence plus `d_k = distance(x_k, y_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPair {
    pub x: Orbit,
    pub y: Orbit,
    pub distances: Vec<f64>,
    /// Top seminorm of `x_k − y_k`.
    pub gap_top: Vec<f64>,
}

pub fn pair_distance_sequence(a: Orbit, b: Orbit, metric: &Metric) -> Result<OrbitPair, OrbitError> {
    if a.horizon != b.horizon {
        return Err(OrbitError::Horizon(a.horizon, b.horizon));
    }
    if a.dim != b.dim {
        return Err(OrbitError::Dimension("orbits live in different spaces".into()));
    }
    let mut distances = Vec::with_capacity(a.horizon);
    let mut gap_top = Vec::with_capacity(a.horizon);
    for k in 1..=a.horizon {
        let diff = Scaled::add(&a.scaled(k), &b.scaled(k), -1.0);
        distances.push(size_of(metric, (diff.exp, &diff.v)));
        gap_top.push(top_of(metric, (diff.exp, &diff.v)));
    }
    Ok(OrbitPair { x: a, y: b, distances, gap_top })
}

/// Orbits of `x` and `y` under one selection; with `MaximizeGap` the `y`
/// orbit is canonical and `x` picks offsets against it.
pub fn generate_pair(
    seq: &OperatorSeq,
    x: &[Complex64],
    y: &[Complex64],
    policy: &SelectionPolicy,
    metric: &Metric,
    n: usize,
    seed: u64,
) -> Result<OrbitPair, OrbitError> {
    let (ox, oy) = match policy {
        SelectionPolicy::MaximizeGap { .. } => {
            let oy = generate_orbit(seq, y, &SelectionPolicy::Canonical, metric, n, seed)?;
            let ox = generate_against(seq, x, policy, metric, n, seed, Some(&oy), None)?;
            (ox, oy)
        }
        _ => (
            generate_orbit(seq, x, policy, metric, n, seed)?,
            generate_orbit(seq, y, policy, metric, n, seed)?,
        ),
    };
    pair_distance_sequence(ox, oy, metric)
}

/// Graph of `A` with its domain intersected with `span(basis)`.
pub fn restrict_relation(a: &LinearRelation, basis: &CMat) -> LinearRelation {
    let q = orth(basis);
    let (dx, dy) = (a.dx(), a.dy());
    let mut v = CMat::zeros(dx + dy, q.ncols() + dy);
    v.view_mut((0, 0), (dx, q.ncols())).copy_from(&q);
    v.view_mut((dx, q.ncols()), (dy, dy)).copy_from(&CMat::identity(dy, dy));
    let g = linalg::intersect(&orth(a.basis()), &v);
    LinearRelation::from_graph_basis(dx, dy, &g).expect("intersection keeps the ambient dimensions")
}

/// `T_k` applied to `x = Q t` through the images `T_k Q` of the subspace basis.
fn coordinate_orbit(seq: &OperatorSeq, q: &CMat, t: &CVec, n: usize) -> Orbit {
    let base: Vec<Complex64> = (q * t).as_slice().to_vec();
    let st = Stepper::new(seq, n, None);
    let mut orbit = Orbit::with_capacity(base.clone(), n);
    let apply = |exp: i64, img: &CMat| Scaled::new(exp, (img * t).as_slice().to_vec());
    let mut img = q.clone();
    let mut img_exp = 0i64;
    for k in 1..=n {
        let next = match seq {
            OperatorSeq::Powers(m) => {
                img = m * &img;
                let mx = img.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if mx > 0.0 && mx.is_finite() {
                    let e = mx.log2().floor() as i32;
                    img *= Complex64::new(2f64.powi(-e), 0.0);
                    img_exp += e as i64;
                }
                apply(img_exp, &img)
            }
            OperatorSeq::ScalarGated { gates, default, .. } => {
                let rule = st.gate_sets.iter().position(|s| s[k - 1]).map_or(default, |i| &gates[i].coef);
                let (e, c) = rule.scaled(k);
                apply(e, &(q * c))
            }
            OperatorSeq::Alternating(list) => apply(0, &(&list[(k - 1) % list.len()] * q)),
            _ => unreachable!("relation sequences take the selector path"),
        };
        orbit.push(next);
    }
    orbit
}

/// Coordinates `t` with `x = B t` for a full-rank basis `B`, by the normal equations.
fn subspace_coordinates(b: &CMat, q: &CMat, x: &[Complex64], which: usize) -> Result<CVec, OrbitError> {
    let xv = CVec::from_column_slice(x);
    if residual(q, &xv) > DOMAIN_TOL * (1.0 + xv.norm()) {
        return Err(OrbitError::OutsideSubspace(which));
    }
    (b.adjoint() * b)
        .lu()
        .solve(&(b.adjoint() * xv))
        .ok_or_else(|| OrbitError::Dimension("subspace basis is rank deficient".into()))
}

/// Pair orbits under the sequence restricted to `span(basis)`; both vectors must lie in it.
pub fn generate_restricted_pair(
    seq: &OperatorSeq,
    basis: &CMat,
    x: &[Complex64],
    y: &[Complex64],
    policy: &SelectionPolicy,
    metric: &Metric,
    n: usize,
    seed: u64,
) -> Result<OrbitPair, OrbitError> {
    let d = seq.dim()?;
    if basis.nrows() != d || x.len() != d || y.len() != d {
        return Err(OrbitError::Dimension("subspace basis or vectors do not match the space".into()));
    }
    let q = orth(basis);
    if q.ncols() != basis.ncols() {
        return Err(OrbitError::Dimension("subspace basis is rank deficient".into()));
    }
    let tx = subspace_coordinates(basis, &q, x, 0)?;
    let ty = subspace_coordinates(basis, &q, y, 1)?;
    if seq.is_matrix_seq() {
        // the raw basis keeps exact zeros that an orthonormalized one may blur
        return pair_distance_sequence(coordinate_orbit(seq, basis, &tx, n), coordinate_orbit(seq, basis, &ty, n), metric);
    }
    let (ox, oy) = match policy {
        SelectionPolicy::MaximizeGap { .. } => {
            let oy = generate_against(seq, y, &SelectionPolicy::Canonical, metric, n, seed, None, Some(&q))?;
            let ox = generate_against(seq, x, policy, metric, n, seed, Some(&oy), Some(&q))?;
            (ox, oy)
        }
        _ => (
            generate_against(seq, x, policy, metric, n, seed, None, Some(&q))?,
            generate_against(seq, y, policy, metric, n, seed, None, Some(&q))?,
        ),
    };
    pair_distance_sequence(ox, oy, metric)
}

/// `x_k = λ^k x`, certified against `A^k` for `k ≤ min(n, cap)`.
pub fn eigen_witness_orbit(
    a: &LinearRelation,
    lambda: Complex64,
    x: &[Complex64],
    n: usize,
    cap: usize,
) -> Result<Orbit, OrbitError> {
    let xv = CVec::from_column_slice(x);
    let m = a.graph_member(&xv, &(&xv * lambda));
    if !m.member || xv.norm() == 0.0 {
        return Err(OrbitError::NotEigenpair(m.relative));
    }
    let rule = CoefRule::Geometric(lambda);
    let base = Scaled::new(0, x.to_vec());
    let mut orbit = Orbit::with_capacity(x.to_vec(), n);
    let mut pw = LinearRelation::identity(a.dx());
    for k in 1..=n {
        let (e, c) = rule.scaled(k);
        let s = Scaled::new(e, base.v.iter().map(|z| z * c).collect()).with_offset_exp(base.exp);
        if k <= cap {
            pw = a.compose(&pw)?;
            // membership is homogeneous: test (2^{-e} x, v) instead of (x, 2^e v)
            let f = ldexp_sat(1.0, -s.exp);
            let xs = CVec::from_iterator(x.len(), x.iter().map(|z| z * f));
            let mk = pw.graph_member(&xs, &CVec::from_column_slice(&s.v));
            if !mk.member {
                return Err(OrbitError::Certification { k, relative: mk.relative });
            }
        }
        orbit.push(s);
    }
    Ok(orbit)
}

pub fn eigen_witness_default(a: &LinearRelation, lambda: Complex64, x: &[Complex64], n: usize) -> Result<Orbit, OrbitError> {
    eigen_witness_orbit(a, lambda, x, n, DEFAULT_POWER_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    Plain,
    Reiterative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetVerdict {
    pub verdict: bool,
    /// Threshold defining the witness set (δ_min, or the growth level).
    pub level: f64,
    pub witness: DensityProfile,
}

fn one_density(p: &DensityProfile, mode: DensityMode) -> f64 {
    match mode {
        DensityMode::Plain => p.upper_f64(),
        DensityMode::Reiterative => p.upper_banach_f64(),
    }
}

/// Near-zero test: for every δ of the σ-grid the set `{k : distance(x_k,0) < δ}`
/// has upper (plain) or upper Banach (reiterative) density at least `1 − θ1`.
pub fn near_zero_verdict(sizes: &[f64], mode: DensityMode, cfg: &ChaosConfig) -> SetVerdict {
    let n = cfg.density.horizon as usize;
    let mut ok = true;
    let mut witness = None;
    for &delta in &cfg.sigma_grid {
        let ind: Vec<bool> = sizes[..n].iter().map(|&s| s < delta).collect();
        let p = profile_from_indicator(&ind, &cfg.density);
        ok &= one_density(&p, mode) >= 1.0 - cfg.theta1;
        witness.get_or_insert(p);
    }
    SetVerdict { verdict: ok, level: cfg.sigma_min(), witness: witness.expect("grid is nonempty") }
}

/// Unboundedness test on `p_m(x_k)`: the set `{k : p_m(x_k) > G}` is dense
/// enough and the maxima over the three thirds of it keep growing (or saturate).
pub fn unbounded_verdict(series: &[f64], mode: DensityMode, cfg: &ChaosConfig) -> SetVerdict {
    let n = cfg.density.horizon as usize;
    let g = cfg.growth;
    let ind: Vec<bool> = series[..n].iter().map(|&p| p > g).collect();
    let p = profile_from_indicator(&ind, &cfg.density);
    let dense = one_density(&p, mode) >= 1.0 - cfg.theta1;
    let hits: Vec<f64> = series[..n].iter().copied().filter(|&v| v > g).collect();
    let escapes = if hits.len() < 3 {
        false
    } else {
        let t = hits.len() / 3;
        let mx = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
        let (m1, m2, m3) = (mx(&hits[..t]), mx(&hits[t..2 * t]), mx(&hits[2 * t..]));
        let up = |a: f64, b: f64| a < b || b == f64::MAX;
        up(m1, m2) && up(m2, m3)
    };
    SetVerdict { verdict: dense && escapes, level: g, witness: p }
}

fn tail_range(h: usize, tail: f64) -> std::ops::RangeInclusive<usize> {
    let start = ((tail * h as f64).ceil() as usize).clamp(1, h);
    start..=h
}

/// Decreasing-minimum evidence for `liminf distance(x_k, 0) = 0`: tail minima at
/// horizons `N/4, N/2, N` are strictly decreasing (or already zero) and the
/// last is below `θ0`.
pub fn subsequence_to_zero(sizes: &[f64], cfg: &ChaosConfig) -> bool {
    let n = cfg.density.horizon as usize;
    let mins: Vec<f64> = [n / 4, n / 2, n]
        .iter()
        .map(|&h| {
            tail_range(h.max(1), cfg.density.tail).map(|k| sizes[k - 1]).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let dec = |a: f64, b: f64| b < a || b == 0.0;
    dec(mins[0], mins[1]) && dec(mins[1], mins[2]) && mins[2] < cfg.theta0
}

/// `sup` of `distance(x_k, 0)` over the tail is at least `θ+`.
pub fn non_convergent(sizes: &[f64], cfg: &ChaosConfig) -> bool {
    let n = cfg.density.horizon as usize;
    tail_range(n, cfg.density.tail).any(|k| sizes[k - 1] >= cfg.theta_plus)
}

/// `sup` of the top seminorm over the tail exceeds `G`.
pub fn unbounded_tail(top: &[f64], cfg: &ChaosConfig) -> bool {
    let n = cfg.density.horizon as usize;
    tail_range(n, cfg.density.tail).any(|k| top[k - 1] > cfg.growth)
}

/// Irregular-vector labels for one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrregularReport {
    pub near_zero: bool,
    pub near_zero_reiterative: bool,
    pub unbounded: bool,
    pub unbounded_reiterative: bool,
    pub subsequence_to_zero: bool,
    pub non_convergent: bool,
    pub unbounded_sequence: bool,
    /// Labels `i`..`xiv` that hold; `iii` is the plain reading, `iii_reit` the reiterative one.
    pub labels: Vec<String>,
}

/// Composes the labels from one frozen orbit; `m` is the seminorm index for unboundedness.
pub fn irregular_class(orbit: &Orbit, metric: &Metric, m: u32, cfg: &ChaosConfig) -> Result<IrregularReport, OrbitError> {
    let n = cfg.density.horizon as usize;
    if orbit.horizon < n {
        return Err(OrbitError::Horizon(orbit.horizon, n));
    }
    let sizes = orbit.sizes(metric);
    let series = orbit.seminorm_series(metric, m);
    let top: Vec<f64> = (1..=orbit.horizon).map(|k| top_of(metric, orbit.parts(k))).collect();
    let nz = near_zero_verdict(&sizes, DensityMode::Plain, cfg).verdict;
    let nzr = near_zero_verdict(&sizes, DensityMode::Reiterative, cfg).verdict;
    let ub = unbounded_verdict(&series, DensityMode::Plain, cfg).verdict;
    let ubr = unbounded_verdict(&series, DensityMode::Reiterative, cfg).verdict;
    let sub0 = subsequence_to_zero(&sizes, cfg);
    let nonconv = non_convergent(&sizes, cfg);
    let unb = unbounded_tail(&top, cfg);
    let table = [
        ("i", nz),
        ("i_reit", nzr),
        ("ii", ub),
        ("ii_reit", ubr),
        ("iii", nz && ub),
        ("iii_reit", nzr && ubr),
        ("iv", nz && ubr),
        ("v", nzr && ub),
        ("vi", unb && sub0),
        ("vii", nonconv && sub0),
        ("viii", ubr && sub0),
        ("ix", ub && sub0),
        ("x", nonconv && nzr),
        ("xi", nonconv && nz),
        ("xii", unb && nzr),
        ("xiii", unb && nz),
        ("xiv", sub0),
    ];
    Ok(IrregularReport {
        near_zero: nz,
        near_zero_reiterative: nzr,
        unbounded: ub,
        unbounded_reiterative: ubr,
        subsequence_to_zero: sub0,
        non_convergent: nonconv,
        unbounded_sequence: unb,
        labels: table.iter().filter(|(_, b)| *b).map(|(l, _)| l.to_string()).collect(),
    })
}
