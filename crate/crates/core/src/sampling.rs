//! Seeded random inputs: matrices with planted spectra, relations, finite
//! relations and set expressions.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, hcat, vcat, CMat, CVec};
use crate::natset::{LengthRule, NatSetExpr, PositionRule};
use crate::relations::{FiniteRelation, LinearRelation};

pub fn real_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
    CMat::from_fn(m, n, |_, _| c(rng.random_range(-1.0..1.0)))
}

pub fn complex_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
    CMat::from_fn(m, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn real_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0))).collect()
}

/// `I + 0.3 R`: invertible with condition number of order one.
fn well_conditioned(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    CMat::identity(d, d) + real_matrix(rng, d, d) * c(0.3 / (d as f64).sqrt())
}

/// `S diag(eigs) S^{-1}` with a random well-conditioned `S`; returns `(M, S)`.
pub fn planted_matrix(rng: &mut ChaCha8Rng, eigs: &[Complex64]) -> (CMat, CMat) {
    let d = eigs.len();
    let s = well_conditioned(rng, d);
    let inv = s.clone().try_inverse().expect("I + small perturbation is invertible");
    let diag = CMat::from_diagonal(&CVec::from_column_slice(eigs));
    (&s * diag * inv, s)
}

/// A random square relation with eigenpair `(λ, x)`, plus a multivalued part
/// of dimension `extra` when requested.
pub fn planted_relation(rng: &mut ChaCha8Rng, d: usize, lambda: Complex64, extra: usize) -> (LinearRelation, Vec<Complex64>) {
    let mut eigs: Vec<Complex64> = vec![lambda];
    eigs.extend((1..d).map(|_| c(rng.random_range(-0.9..0.9))));
    let (m, s) = planted_matrix(rng, &eigs);
    let x: Vec<Complex64> = s.column(0).iter().copied().collect();
    if extra == 0 {
        return (LinearRelation::from_matrix(&m), x);
    }
    let a0 = real_matrix(rng, d, extra);
    let xs = hcat(&CMat::identity(d, d), &CMat::zeros(d, extra));
    let ys = hcat(&m, &a0);
    let rel = LinearRelation::from_graph_basis(d, d, &vcat(&xs, &ys)).expect("square blocks");
    (rel, x)
}

/// Relation with full domain and a nonzero multivalued part: `x ↦ Mx + span(a0)`.
pub fn multivalued_relation(rng: &mut ChaCha8Rng, d: usize, m: &CMat, extra: usize) -> LinearRelation {
    let a0 = real_matrix(rng, d, extra);
    let xs = hcat(&CMat::identity(d, d), &CMat::zeros(d, extra));
    let ys = hcat(m, &a0);
    LinearRelation::from_graph_basis(d, d, &vcat(&xs, &ys)).expect("square blocks")
}

/// A relation `A`, an eigenpair `(λ, x*)` of its adjoint with `|λ| ≥ 1`, and a
/// vector `x` of the domain with `|⟨x*, x⟩| ≥ 0.1 ‖x*‖ ‖x‖`.
#[derive(Debug, Clone)]
pub struct AdjointInstance {
    pub relation: LinearRelation,
    pub lambda: Complex64,
    pub xstar: Vec<Complex64>,
    pub x: Vec<Complex64>,
}

/// `⟨f, x⟩ = Σ f_i conj(x_i)`, the pairing used by the adjoint.
pub fn pairing(f: &[Complex64], x: &[Complex64]) -> Complex64 {
    f.iter().zip(x).map(|(a, b)| a * b.conj()).sum()
}

pub fn adjoint_instance(rng: &mut ChaCha8Rng) -> AdjointInstance {
    loop {
        let d = rng.random_range(2..=5);
        let eigs: Vec<Complex64> = (0..d)
            .map(|i| {
                let m = if i == 0 { rng.random_range(1.0..2.0) } else { rng.random_range(0.2..2.0) };
                c(if rng.random_bool(0.5) { m } else { -m })
            })
            .collect();
        let (m, _) = planted_matrix(rng, &eigs);
        let relation = if rng.random_bool(0.5) {
            LinearRelation::from_matrix(&m)
        } else {
            multivalued_relation(rng, d, &m, 1)
        };
        let Ok(spec) = relation.adjoint().eigenvalues() else { continue };
        let Some(pair) = spec
            .eigenpairs
            .iter()
            .filter(|p| p.lambda.norm() >= 1.0)
            .max_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()))
        else {
            continue;
        };
        let xstar: Vec<Complex64> = pair.vector().iter().copied().collect();
        let fnorm = xstar.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _ in 0..20 {
            let x = real_vector(rng, d);
            let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if pairing(&xstar, &x).norm() >= 0.1 * fnorm * xn {
                return AdjointInstance { relation, lambda: pair.lambda, xstar, x };
            }
        }
    }
}

/// Random pair set on `{0..n}²` with each pair kept with probability `p`.
pub fn finite_relation(rng: &mut ChaCha8Rng, n: usize, p: f64) -> FiniteRelation {
    let pairs = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect::<Vec<_>>();
    let kept = pairs.into_iter().filter(|_| rng.random_bool(p)).collect();
    FiniteRelation::new(n, n, kept).expect("pairs are in range and distinct")
}

pub fn periodic_set(rng: &mut ChaCha8Rng, max_modulus: u64) -> NatSetExpr {
    let m = rng.random_range(1..=max_modulus);
    let mut r: Vec<u64> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
    if r.is_empty() {
        r.push(rng.random_range(0..m));
    }
    NatSetExpr::periodic(m, r).expect("residues below the modulus")
}

pub fn block_set(rng: &mut ChaCha8Rng) -> NatSetExpr {
    loop {
        let pos = if rng.random_bool(0.5) {
            PositionRule::Geometric { c: rng.random_range(1..=50), r: rng.random_range(2..=4) }
        } else {
            PositionRule::Polynomial { c: rng.random_range(1..=20), p: rng.random_range(2..=3) }
        };
        let len = match rng.random_range(0..4) {
            0 => LengthRule::Const(rng.random_range(1..=10)),
            1 => LengthRule::Linear { scale: 1, offset: 0 },
            2 => LengthRule::Linear { scale: rng.random_range(1..=5), offset: rng.random_range(0..=5) },
            _ => LengthRule::Ratio { num: 1, den: rng.random_range(2..=20) },
        };
        if let Ok(s) = NatSetExpr::blocks(pos, len) {
            return s;
        }
    }
}

pub fn finite_set(rng: &mut ChaCha8Rng, max: u64) -> NatSetExpr {
    let mut v: Vec<u64> = (0..rng.random_range(0..20)).map(|_| rng.random_range(1..=max)).collect();
    v.sort_unstable();
    v.dedup();
    NatSetExpr::finite(v).expect("sorted and positive")
}

/// Mixed expression tree of depth at most `depth`.
pub fn natset(rng: &mut ChaCha8Rng, depth: u32) -> NatSetExpr {
    let leaf = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
        0 => finite_set(rng, 1000),
        1 => periodic_set(rng, 24),
        _ => block_set(rng),
    };
    if depth == 0 || rng.random_bool(0.4) {
        return leaf(rng);
    }
    match rng.random_range(0..3) {
        0 => NatSetExpr::union(natset(rng, depth - 1), natset(rng, depth - 1)),
        1 => NatSetExpr::intersection(natset(rng, depth - 1), natset(rng, depth - 1)),
        _ => NatSetExpr::complement(natset(rng, depth - 1)),
    }
}
