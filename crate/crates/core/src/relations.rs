//! Binary relations: explicit finite ones, and linear relations (MLOs) on
//! `K^d` stored as orthonormal bases of their graph subspaces.

use std::collections::BTreeSet;

use nalgebra::Schur;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{
    self, c, complement, contains, hcat, intersect, null_space, null_space_abs, orth, residual,
    smallest_singular_value, subspace_eq, vcat, CMat, CVec, TAU_RES,
};

pub const MAX_DIM: usize = 64;
/// Power cap used for `D_∞` and for certifying orbits against `A^k`.
pub const DEFAULT_POWER_CAP: usize = 16;

const EIGEN_SEED: u64 = 0x6569_6765_6e00;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelationError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("relation is not square ({0} -> {1})")]
    NotSquare(usize, usize),
    #[error("dimension {0} exceeds the cap of {MAX_DIM}")]
    TooLarge(usize),
    #[error("pair ({0},{1}) outside the ground sets")]
    OutOfBounds(usize, usize),
    #[error("duplicate pair ({0},{1})")]
    Duplicate(usize, usize),
}

/// A relation between `{0..nx}` and `{0..ny}` as an explicit pair set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteRelation {
    pub nx: usize,
    pub ny: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl FiniteRelation {
    pub fn new(nx: usize, ny: usize, pairs: Vec<(usize, usize)>) -> Result<Self, RelationError> {
        let mut set = BTreeSet::new();
        for (x, y) in pairs {
            if x >= nx || y >= ny {
                return Err(RelationError::OutOfBounds(x, y));
            }
            if !set.insert((x, y)) {
                return Err(RelationError::Duplicate(x, y));
            }
        }
        Ok(FiniteRelation { nx, ny, pairs: set })
    }

    pub fn identity(n: usize) -> Self {
        FiniteRelation { nx: n, ny: n, pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn inverse(&self) -> Self {
        FiniteRelation {
            nx: self.ny,
            ny: self.nx,
            pairs: self.pairs.iter().map(|&(x, y)| (y, x)).collect(),
        }
    }

    /// `self ∘ rho`: first `rho`, then `self`.
    pub fn compose(&self, rho: &FiniteRelation) -> Result<Self, RelationError> {
        if rho.ny != self.nx {
            return Err(RelationError::Dimension(format!("{} vs {}", rho.ny, self.nx)));
        }
        let mut pairs = BTreeSet::new();
        for &(x, y) in &rho.pairs {
            for &(_, z) in self.pairs.range((y, 0)..(y + 1, 0)) {
                pairs.insert((x, z));
            }
        }
        Ok(FiniteRelation { nx: rho.nx, ny: self.ny, pairs })
    }

    pub fn power(&self, n: i64) -> Result<Self, RelationError> {
        if self.nx != self.ny {
            return Err(RelationError::NotSquare(self.nx, self.ny));
        }
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = FiniteRelation::identity(self.nx);
        for _ in 0..n.unsigned_abs() {
            acc = base.compose(&acc)?;
        }
        Ok(acc)
    }

    pub fn domain(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn range(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// 0/1 matrix `M` with `M[y][x] = 1` for each pair; its graph composes like the relation.
    pub fn to_matrix(&self) -> CMat {
        let mut m = CMat::zeros(self.ny, self.nx);
        for &(x, y) in &self.pairs {
            m[(y, x)] = c(1.0);
        }
        m
    }

    /// The linear relation `span{(e_x, e_y) : (x,y) ∈ ρ}`.
    pub fn to_pair_span(&self) -> LinearRelation {
        let mut g = CMat::zeros(self.nx + self.ny, self.pairs.len());
        for (j, &(x, y)) in self.pairs.iter().enumerate() {
            g[(x, j)] = c(1.0);
            g[(self.nx + y, j)] = c(1.0);
        }
        LinearRelation::from_graph_basis(self.nx, self.ny, &g).expect("dimensions are consistent")
    }
}

/// A linear relation `A ⊆ K^dx × K^dy`, stored as an orthonormal basis of its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRelation {
    dx: usize,
    dy: usize,
    basis: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationParts {
    pub domain: CMat,
    pub range: CMat,
    pub kernel: CMat,
    pub multivalued: CMat,
    pub single_valued: bool,
    pub purely_multivalued: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    /// Euclidean distance from the pair to the graph.
    pub distance: f64,
    /// `distance / ‖(x,y)‖`, zero for the zero pair.
    pub relative: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: Complex64,
    /// Orthonormal basis of `{x : λx ∈ Ax}`.
    pub eigenspace: CMat,
    /// Number of pencil eigenvalues merged into this one.
    pub multiplicity: usize,
}

impl Eigenpair {
    pub fn vector(&self) -> CVec {
        self.eigenspace.column(0).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Every `λ` is an eigenvalue; no enumeration is attempted.
    pub continuum: bool,
    pub eigenpairs: Vec<Eigenpair>,
}

fn check_dim(d: usize) -> Result<(), RelationError> {
    if d > MAX_DIM {
        return Err(RelationError::TooLarge(d));
    }
    Ok(())
}

impl LinearRelation {
    /// Graph spanned by the columns of `g` (rows `0..dx` are `x`, the rest `y`).
    pub fn from_graph_basis(dx: usize, dy: usize, g: &CMat) -> Result<Self, RelationError> {
        check_dim(dx)?;
        check_dim(dy)?;
        if g.nrows() != dx + dy {
            return Err(RelationError::Dimension(format!(
                "graph basis has {} rows, expected {}",
                g.nrows(),
                dx + dy
            )));
        }
        Ok(LinearRelation { dx, dy, basis: linalg::orth_relative(g) })
    }

    pub fn from_parts(x_cols: &CMat, y_cols: &CMat) -> Result<Self, RelationError> {
        if x_cols.ncols() != y_cols.ncols() {
            return Err(RelationError::Dimension("x_cols and y_cols differ in count".into()));
        }
        LinearRelation::from_graph_basis(x_cols.nrows(), y_cols.nrows(), &vcat(x_cols, y_cols))
    }

    /// Graph of the matrix `m : K^ncols → K^nrows`.
    pub fn from_matrix(m: &CMat) -> Self {
        let (dy, dx) = m.shape();
        let g = vcat(&CMat::identity(dx, dx), m);
        LinearRelation::from_graph_basis(dx, dy, &g).expect("matrix within dimension cap")
    }

    pub fn identity(d: usize) -> Self {
        LinearRelation::from_matrix(&CMat::identity(d, d))
    }

    pub fn zero(dx: usize, dy: usize) -> Self {
        LinearRelation::from_matrix(&CMat::zeros(dy, dx))
    }

    pub fn dx(&self) -> usize {
        self.dx
    }
    pub fn dy(&self) -> usize {
        self.dy
    }
    pub fn basis(&self) -> &CMat {
        &self.basis
    }
    pub fn graph_dim(&self) -> usize {
        self.basis.ncols()
    }
    pub fn is_square(&self) -> bool {
        self.dx == self.dy
    }

    fn top(&self) -> CMat {
        self.basis.rows(0, self.dx).into_owned()
    }

    fn bottom(&self) -> CMat {
        self.basis.rows(self.dx, self.dy).into_owned()
    }

    pub fn same_graph(&self, other: &LinearRelation) -> bool {
        self.dx == other.dx && self.dy == other.dy && subspace_eq(&self.basis, &other.basis)
    }

    pub fn inverse(&self) -> Self {
        LinearRelation { dx: self.dy, dy: self.dx, basis: vcat(&self.bottom(), &self.top()) }
    }

    /// `self ∘ rho`, via the intersection of the two graphs lifted to `(x, y, t)`.
    pub fn compose(&self, rho: &LinearRelation) -> Result<Self, RelationError> {
        if rho.dy != self.dx {
            return Err(RelationError::Dimension(format!(
                "cannot compose: inner codomain {} vs outer domain {}",
                rho.dy, self.dx
            )));
        }
        let (dx, dy, dz) = (rho.dx, rho.dy, self.dy);
        let n = dx + dy + dz;
        let (r1, r2) = (rho.graph_dim(), self.graph_dim());
        let mut s1 = CMat::zeros(n, r1 + dz);
        s1.view_mut((0, 0), (dx + dy, r1)).copy_from(&rho.basis);
        s1.view_mut((dx + dy, r1), (dz, dz)).copy_from(&CMat::identity(dz, dz));
        let mut s2 = CMat::zeros(n, dx + r2);
        s2.view_mut((0, 0), (dx, dx)).copy_from(&CMat::identity(dx, dx));
        s2.view_mut((dx, dx), (dy + dz, r2)).copy_from(&self.basis);
        let w = intersect(&s1, &s2);
        let xt = vcat(&w.rows(0, dx).into_owned(), &w.rows(dx + dy, dz).into_owned());
        Ok(LinearRelation { dx, dy: dz, basis: orth(&xt) })
    }

    /// `A^n`; `A^0` is the identity and negative powers invert `A^{|n|}`.
    pub fn power(&self, n: i64) -> Result<Self, RelationError> {
        if !self.is_square() {
            return Err(RelationError::NotSquare(self.dx, self.dy));
        }
        let mut acc = LinearRelation::identity(self.dx);
        for _ in 0..n.unsigned_abs() {
            acc = self.compose(&acc)?;
        }
        Ok(if n < 0 { acc.inverse() } else { acc })
    }

    pub fn parts(&self) -> RelationParts {
        let (p, q) = (self.top(), self.bottom());
        let ker_p = null_space(&p);
        let ker_q = null_space(&q);
        let multivalued = orth(&(&q * &ker_p));
        let kernel = orth(&(&p * &ker_q));
        let single = multivalued.ncols() == 0;
        RelationParts {
            domain: orth(&p),
            range: orth(&q),
            kernel,
            multivalued,
            single_valued: single,
            purely_multivalued: !single,
        }
    }

    /// `A + B = {(x, y+z) : (x,y) ∈ A, (x,z) ∈ B}`.
    pub fn sum(&self, other: &LinearRelation) -> Result<Self, RelationError> {
        if self.dx != other.dx || self.dy != other.dy {
            return Err(RelationError::Dimension("sum of relations with different shapes".into()));
        }
        let (dx, dy) = (self.dx, self.dy);
        let n = dx + 2 * dy;
        let (ra, rb) = (self.graph_dim(), other.graph_dim());
        let mut sa = CMat::zeros(n, ra + dy);
        sa.view_mut((0, 0), (dx + dy, ra)).copy_from(&self.basis);
        sa.view_mut((dx + dy, ra), (dy, dy)).copy_from(&CMat::identity(dy, dy));
        let mut sb = CMat::zeros(n, rb + dy);
        sb.view_mut((0, 0), (dx, rb)).copy_from(&other.top());
        sb.view_mut((dx + dy, 0), (dy, rb)).copy_from(&other.bottom());
        sb.view_mut((dx, rb), (dy, dy)).copy_from(&CMat::identity(dy, dy));
        let w = intersect(&sa, &sb);
        let ys = w.rows(dx, dy) + w.rows(dx + dy, dy);
        let g = vcat(&w.rows(0, dx).into_owned(), &ys);
        Ok(LinearRelation { dx, dy, basis: orth(&g) })
    }

    /// `zA = {(x, z·y) : (x,y) ∈ A}`.
    pub fn scale(&self, z: Complex64) -> Self {
        let (p, q) = (self.top(), self.bottom());
        let ker_p = null_space(&p);
        let dom = complement(&ker_p, self.graph_dim());
        let single = vcat(&(&p * &dom), &(&q * &dom * z));
        let g = if z == Complex64::new(0.0, 0.0) {
            single
        } else {
            // zA0 = A0 for z != 0; scaling its basis would let tiny z erase it
            let a0 = orth(&(&q * &ker_p));
            hcat(&single, &vcat(&CMat::zeros(self.dx, a0.ncols()), &a0))
        };
        LinearRelation { dx: self.dx, dy: self.dy, basis: orth(&g) }
    }

    /// `A ⊆ B` as graphs.
    pub fn subset_of(&self, other: &LinearRelation) -> bool {
        self.dx == other.dx && self.dy == other.dy && contains(&other.basis, &self.basis)
    }

    pub fn graph_member(&self, x: &CVec, y: &CVec) -> Membership {
        assert_eq!(x.len(), self.dx, "x has the wrong dimension");
        assert_eq!(y.len(), self.dy, "y has the wrong dimension");
        let v = vcat(&CMat::from_column_slice(x.len(), 1, x.as_slice()), &CMat::from_column_slice(y.len(), 1, y.as_slice()));
        let v = v.column(0).into_owned();
        let distance = residual(&self.basis, &v);
        let norm = v.norm();
        Membership {
            distance,
            relative: if norm > 0.0 { distance / norm } else { 0.0 },
            member: distance <= TAU_RES * (1.0 + norm),
        }
    }

    /// Graph of the adjoint `A* : K^dy → K^dx` under `⟨a,b⟩ = Σ a_i conj(b_i)`.
    pub fn adjoint(&self) -> Self {
        let rows = hcat(&self.bottom().adjoint(), &(-self.top().adjoint()));
        let ns = if rows.nrows() == 0 {
            CMat::identity(self.dx + self.dy, self.dx + self.dy)
        } else {
            null_space(&rows)
        };
        LinearRelation { dx: self.dy, dy: self.dx, basis: orth(&ns) }
    }

    /// The matrix `M` with `A = graph(M)`, when `A` is single-valued with full domain.
    pub fn as_matrix(&self) -> Option<CMat> {
        if self.graph_dim() != self.dx {
            return None;
        }
        let p = self.top();
        if smallest_singular_value(&p) <= linalg::TAU_RANK {
            return None;
        }
        let inv = p.try_inverse()?;
        Some(self.bottom() * inv)
    }

    /// Smallest `n ≤ nmax` with `x ∈ A^n x`.
    pub fn periodic_point(&self, x: &CVec, nmax: usize) -> Result<Option<usize>, RelationError> {
        if !self.is_square() {
            return Err(RelationError::NotSquare(self.dx, self.dy));
        }
        let mut pw = LinearRelation::identity(self.dx);
        for n in 1..=nmax {
            pw = self.compose(&pw)?;
            if pw.graph_member(x, x).member {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    /// `D(A^1) ∩ ... ∩ D(A^cap)` and the first power after which the chain is constant.
    pub fn infinite_domain(&self, cap: usize) -> Result<(CMat, Option<usize>), RelationError> {
        if !self.is_square() {
            return Err(RelationError::NotSquare(self.dx, self.dy));
        }
        let mut pw = LinearRelation::identity(self.dx);
        let mut acc = CMat::identity(self.dx, self.dx);
        let mut last_change = 0;
        for n in 1..=cap {
            pw = self.compose(&pw)?;
            let next = intersect(&acc, &pw.parts().domain);
            if next.ncols() != acc.ncols() {
                last_change = n;
            }
            acc = next;
        }
        // a chain of subspaces that did not move at the final step is reported as settled
        let stable = (last_change < cap).then_some(last_change);
        Ok((acc, stable))
    }

    /// Point spectrum with eigenspaces.
    ///
    /// On the domain coordinates `u` the condition `λx ∈ Ax` reads
    /// `(M2 − λ M1) u = 0` after projecting away the multivalued part; the
    /// pencil is compressed to a square one, solved through a random shift,
    /// and every candidate is re-checked on the uncompressed pencil and by
    /// graph membership.
    pub fn eigenvalues(&self) -> Result<Spectrum, RelationError> {
        if !self.is_square() {
            return Err(RelationError::NotSquare(self.dx, self.dy));
        }
        let d = self.dx;
        let (p, q) = (self.top(), self.bottom());
        let r = self.graph_dim();
        let ker_p = null_space(&p);
        let a0 = orth(&(&q * &ker_p));
        let dom = complement(&ker_p, r);
        let pi = complement(&a0, d);
        let k = dom.ncols();
        let empty = Spectrum { continuum: false, eigenpairs: vec![] };
        if k == 0 {
            return Ok(empty);
        }
        let px = &p * &dom;
        let m1 = pi.adjoint() * &px;
        let m2 = pi.adjoint() * &q * &dom;
        let pdim = m1.nrows();
        if pdim < k {
            return Ok(Spectrum { continuum: true, eigenpairs: vec![] });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
        let compress = if pdim == k {
            CMat::identity(k, k)
        } else {
            CMat::from_fn(k, pdim, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let a = &compress * &m1;
        let b = &compress * &m2;
        let (na, nb) = (a.norm(), b.norm());
        let scale = if na > 0.0 { (nb / na).max(1e-3) } else { 1.0 };

        let mut shifted = None;
        for _ in 0..4 {
            let mu = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            let cm = &b - &a * mu;
            let smin = smallest_singular_value(&cm);
            if smin > 1e-10 * (nb + mu.norm() * na) {
                shifted = Some((mu, cm));
                break;
            }
        }
        let Some((mu, cm)) = shifted else {
            return Ok(Spectrum { continuum: true, eigenpairs: vec![] });
        };
        let lu = cm.lu();
        let kmat = lu.solve(&a).expect("shifted pencil is nonsingular");
        let knorm = kmat.norm();
        let nus = Schur::new(kmat).eigenvalues().expect("complex Schur form is triangular");

        let (n1, n2) = (m1.norm(), m2.norm());
        let mut cands: Vec<Complex64> = nus
            .iter()
            .filter(|nu| nu.norm() > 1e-12 * knorm.max(f64::MIN_POSITIVE))
            .map(|nu| mu + nu.inv())
            .filter(|lam| {
                let pencil = &m2 - &m1 * *lam;
                smallest_singular_value(&pencil) <= 1e-8 * (n2 + lam.norm() * n1)
            })
            .collect();
        cands.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

        let mut groups: Vec<(Complex64, usize)> = vec![];
        for lam in cands {
            let merged = groups.iter_mut().find(|(g, _)| (*g - lam).norm() <= 1e-6 * g.norm().max(1.0));
            match merged {
                Some(g) => g.1 += 1,
                None => groups.push((lam, 1)),
            }
        }

        let mut eigenpairs = vec![];
        for (lam, mult) in groups {
            let pencil = &m2 - &m1 * lam;
            let u = null_space_abs(&pencil, 1e-8 * (n2 + lam.norm() * n1));
            if u.ncols() == 0 {
                continue;
            }
            let xs = orth(&(&px * &u));
            let ok = (0..xs.ncols()).all(|j| {
                let x = xs.column(j).into_owned();
                self.graph_member(&x, &(&x * lam)).member
            });
            if ok && xs.ncols() > 0 {
                eigenpairs.push(Eigenpair { lambda: lam, eigenspace: xs, multiplicity: mult });
            }
        }
        Ok(Spectrum { continuum: false, eigenpairs })
    }
}
