//! Symbolic subsets of ℕ = {1, 2, 3, ...} with exact membership and counting.
//!
//! A [`NatSetExpr`] is a small expression tree over four kinds of leaves
//! (finite, periodic, closed-form block families) combined with union,
//! intersection and complement. Every operation here is integer-exact.
//!
//! Block families are validated for the first 2^20 blocks or up to position
//! 2^40, whichever comes first; horizons beyond 2^40 are not supported.

use std::fmt;

use thiserror::Error;

/// Largest position a block family is validated (and evaluated) against.
pub const MAX_POSITION: u64 = 1 << 40;
const MAX_VALIDATED_BLOCKS: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NatSetError {
    #[error("finite set must be strictly increasing and start at 1 or above")]
    Finite,
    #[error("periodic set: {0}")]
    Periodic(String),
    #[error("block family: {0}")]
    Blocks(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Start position rule `a_k` for `k = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionRule {
    /// `a_k = c * r^k`
    Geometric { c: u64, r: u64 },
    /// `a_k = c * k^p`
    Polynomial { c: u64, p: u32 },
}

/// Length rule `len_k` for the block starting at `a_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthRule {
    Const(u64),
    /// `len_k = scale * k + offset`; plain `linear` is scale 1, offset 0.
    Linear { scale: u64, offset: u64 },
    /// `len_k = k * 2^k`
    SuperExp,
    /// `len_k = max(1, floor(a_k * num / den))`
    Ratio { num: u64, den: u64 },
}

impl PositionRule {
    pub fn start(&self, k: u64) -> Option<u64> {
        let v = match *self {
            PositionRule::Geometric { c, r } => {
                let e = u32::try_from(k).ok()?;
                r.checked_pow(e)?.checked_mul(c)?
            }
            PositionRule::Polynomial { c, p } => k.checked_pow(p)?.checked_mul(c)?,
        };
        (v <= MAX_POSITION).then_some(v)
    }
}

impl LengthRule {
    pub fn length(&self, k: u64, start: u64) -> Option<u64> {
        match *self {
            LengthRule::Const(l) => Some(l),
            LengthRule::Linear { scale, offset } => scale.checked_mul(k)?.checked_add(offset),
            LengthRule::SuperExp => {
                let e = u32::try_from(k).ok()?;
                2u64.checked_pow(e)?.checked_mul(k)
            }
            LengthRule::Ratio { num, den } => {
                let v = (start as u128 * num as u128 / den as u128).max(1);
                u64::try_from(v).ok()
            }
        }
    }
}

/// A monotone family of pairwise disjoint intervals `[a_k, a_k + len_k - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockFamily {
    pub position: PositionRule,
    pub length: LengthRule,
}

impl BlockFamily {
    pub fn new(position: PositionRule, length: LengthRule) -> Result<Self, NatSetError> {
        match position {
            PositionRule::Geometric { c, r } => {
                if c == 0 || r < 2 {
                    return Err(NatSetError::Blocks("geom(c,r) needs c >= 1 and r >= 2".into()));
                }
            }
            PositionRule::Polynomial { c, p } => {
                if c == 0 || p == 0 {
                    return Err(NatSetError::Blocks("poly(c,p) needs c >= 1 and p >= 1".into()));
                }
            }
        }
        match length {
            LengthRule::Const(0) => {
                return Err(NatSetError::Blocks("const(L) needs L >= 1".into()))
            }
            LengthRule::Linear { scale: 0, offset: 0 } => {
                return Err(NatSetError::Blocks("linear length must be positive".into()))
            }
            LengthRule::Ratio { den: 0, .. } => {
                return Err(NatSetError::Blocks("ratio(p,q) needs q >= 1".into()))
            }
            _ => {}
        }
        let fam = BlockFamily { position, length };
        let mut k = 1;
        let mut prev_end: Option<u64> = None;
        while k <= MAX_VALIDATED_BLOCKS {
            let Some((a, b)) = fam.block(k) else { break };
            if let Some(e) = prev_end {
                if a <= e {
                    return Err(NatSetError::Blocks(format!(
                        "blocks {} and {} overlap (next start {a} <= previous end {e})",
                        k - 1,
                        k
                    )));
                }
            }
            prev_end = Some(b);
            k += 1;
        }
        Ok(fam)
    }

    /// Closed interval of block `k >= 1`, or `None` past the supported range.
    pub fn block(&self, k: u64) -> Option<(u64, u64)> {
        let a = self.position.start(k)?;
        let len = self.length.length(k, a)?;
        let b = a.checked_add(len - 1)?;
        Some((a, b))
    }

    fn member(&self, n: u64) -> bool {
        // largest k with a_k <= n, by doubling then bisection
        match self.position.start(1) {
            Some(a1) if a1 <= n => {}
            _ => return false,
        }
        let mut hi = 2u64;
        while matches!(self.position.start(hi), Some(a) if a <= n) {
            hi *= 2;
        }
        let mut lo = 1u64;
        // invariant: a_lo <= n < a_hi (or a_hi out of range)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            match self.position.start(mid) {
                Some(a) if a <= n => lo = mid,
                _ => hi = mid,
            }
        }
        matches!(self.block(lo), Some((_, b)) if n <= b)
    }

    fn count_prefix(&self, n: u64) -> u64 {
        let mut total = 0;
        let mut k = 1;
        while let Some((a, b)) = self.block(k) {
            if a > n {
                break;
            }
            total += b.min(n) - a + 1;
            k += 1;
        }
        total
    }

    fn mark(&self, buf: &mut [bool]) {
        let n = buf.len() as u64;
        let mut k = 1;
        while let Some((a, b)) = self.block(k) {
            if a > n {
                break;
            }
            for slot in &mut buf[(a - 1) as usize..b.min(n) as usize] {
                *slot = true;
            }
            k += 1;
        }
    }
}

/// Symbolic subset of ℕ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NatSetExpr {
    Finite(Vec<u64>),
    Periodic { modulus: u64, residues: Vec<u64> },
    Blocks(BlockFamily),
    Union(Box<NatSetExpr>, Box<NatSetExpr>),
    Intersection(Box<NatSetExpr>, Box<NatSetExpr>),
    Complement(Box<NatSetExpr>),
}

impl NatSetExpr {
    pub fn finite(elements: Vec<u64>) -> Result<Self, NatSetError> {
        let increasing = elements.windows(2).all(|w| w[0] < w[1]);
        if !increasing || elements.first().is_some_and(|&e| e == 0) {
            return Err(NatSetError::Finite);
        }
        Ok(NatSetExpr::Finite(elements))
    }

    /// `{k : k mod m ∈ R}`; residues are sorted and deduplicated on entry.
    pub fn periodic(modulus: u64, mut residues: Vec<u64>) -> Result<Self, NatSetError> {
        if modulus == 0 {
            return Err(NatSetError::Periodic("modulus must be >= 1".into()));
        }
        residues.sort_unstable();
        if residues.windows(2).any(|w| w[0] == w[1]) {
            return Err(NatSetError::Periodic("residues must be distinct".into()));
        }
        if let Some(&r) = residues.iter().find(|&&r| r >= modulus) {
            return Err(NatSetError::Periodic(format!("residue {r} not in [0, {modulus})")));
        }
        Ok(NatSetExpr::Periodic { modulus, residues })
    }

    pub fn blocks(position: PositionRule, length: LengthRule) -> Result<Self, NatSetError> {
        BlockFamily::new(position, length).map(NatSetExpr::Blocks)
    }

    pub fn union(a: NatSetExpr, b: NatSetExpr) -> Self {
        NatSetExpr::Union(Box::new(a), Box::new(b))
    }

    pub fn intersection(a: NatSetExpr, b: NatSetExpr) -> Self {
        NatSetExpr::Intersection(Box::new(a), Box::new(b))
    }

    pub fn complement(a: NatSetExpr) -> Self {
        NatSetExpr::Complement(Box::new(a))
    }

    /// Membership of `k >= 1`.
    pub fn member(&self, k: u64) -> bool {
        debug_assert!(k >= 1);
        match self {
            NatSetExpr::Finite(v) => v.binary_search(&k).is_ok(),
            NatSetExpr::Periodic { modulus, residues } => {
                residues.binary_search(&(k % modulus)).is_ok()
            }
            NatSetExpr::Blocks(f) => f.member(k),
            NatSetExpr::Union(a, b) => a.member(k) || b.member(k),
            NatSetExpr::Intersection(a, b) => a.member(k) && b.member(k),
            NatSetExpr::Complement(a) => !a.member(k),
        }
    }

    /// `|A ∩ [1, n]|`; `n = 0` gives 0.
    pub fn count_prefix(&self, n: u64) -> u64 {
        match self {
            NatSetExpr::Finite(v) => v.partition_point(|&e| e <= n) as u64,
            NatSetExpr::Periodic { modulus, residues } => {
                let (q, rem) = (n / modulus, n % modulus);
                q * residues.len() as u64
                    + residues.iter().filter(|&&r| r >= 1 && r <= rem).count() as u64
            }
            NatSetExpr::Blocks(f) => f.count_prefix(n),
            NatSetExpr::Complement(a) => n - a.count_prefix(n),
            NatSetExpr::Union(a, b) => {
                a.count_prefix(n) + b.count_prefix(n) - Self::count_both(a, b, n)
            }
            NatSetExpr::Intersection(a, b) => Self::count_both(a, b, n),
        }
    }

    fn count_both(a: &NatSetExpr, b: &NatSetExpr, n: u64) -> u64 {
        let ia = a.indicator(n);
        let ib = b.indicator(n);
        ia.iter().zip(&ib).filter(|(x, y)| **x && **y).count() as u64
    }

    /// `|A ∩ [n+1, n+s]|`.
    pub fn count_window(&self, n: u64, s: u64) -> u64 {
        self.count_prefix(n + s) - self.count_prefix(n)
    }

    /// Indicator of `A ∩ [1, n]`; slot `i` holds membership of `i + 1`.
    pub fn indicator(&self, n: u64) -> Vec<bool> {
        let mut buf = vec![false; n as usize];
        self.fill_indicator(&mut buf);
        buf
    }

    fn fill_indicator(&self, buf: &mut [bool]) {
        match self {
            NatSetExpr::Finite(v) => {
                for &e in v {
                    if let Some(slot) = buf.get_mut((e - 1) as usize) {
                        *slot = true;
                    } else {
                        break;
                    }
                }
            }
            NatSetExpr::Periodic { modulus, residues } => {
                let m = *modulus as usize;
                let mut table = vec![false; m];
                for &r in residues {
                    table[r as usize] = true;
                }
                for (i, slot) in buf.iter_mut().enumerate() {
                    *slot = table[(i + 1) % m];
                }
            }
            NatSetExpr::Blocks(f) => {
                buf.iter_mut().for_each(|s| *s = false);
                f.mark(buf);
            }
            NatSetExpr::Union(a, b) => {
                a.fill_indicator(buf);
                let other = b.indicator(buf.len() as u64);
                buf.iter_mut().zip(other).for_each(|(s, o)| *s |= o);
            }
            NatSetExpr::Intersection(a, b) => {
                a.fill_indicator(buf);
                let other = b.indicator(buf.len() as u64);
                buf.iter_mut().zip(other).for_each(|(s, o)| *s &= o);
            }
            NatSetExpr::Complement(a) => {
                a.fill_indicator(buf);
                buf.iter_mut().for_each(|s| *s = !*s);
            }
        }
    }

    /// Prefix counts `c[0..=n]` with `c[0] = 0` and `c[k] = |A ∩ [1, k]|`.
    pub fn prefix_counts(&self, n: u64) -> Vec<u32> {
        prefix_counts_of(&self.indicator(n))
    }

    /// Elements of `A ∩ [1, n]` in increasing order.
    pub fn elements_up_to(&self, n: u64) -> Vec<u64> {
        self.indicator(n)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i as u64 + 1))
            .collect()
    }

    /// Consecutive differences of the elements of `A ∩ [1, horizon]`.
    pub fn difference_set(&self, horizon: u64) -> Vec<u64> {
        self.elements_up_to(horizon).windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bounded-gap test at a finite horizon.
    ///
    /// Gaps include the leading gap `d_1 - 0` and the trailing gap
    /// `horizon + 1 - d_last`. The bound is the largest gap that closes in the
    /// first half of the horizon; the verdict holds iff no gap over the whole
    /// horizon exceeds it.
    pub fn is_syndetic(&self, horizon: u64) -> SyndeticReport {
        let elems = self.elements_up_to(horizon);
        if elems.len() < 2 {
            return SyndeticReport {
                stats: GapStats { horizon, max_gap: None, element_count: elems.len() as u64 },
                bound: None,
                verdict: false,
            };
        }
        let half = horizon / 2;
        let mut max_gap = elems[0];
        let mut bound = (elems[0] <= half).then_some(elems[0]);
        for w in elems.windows(2) {
            let g = w[1] - w[0];
            max_gap = max_gap.max(g);
            if w[1] <= half {
                bound = Some(bound.map_or(g, |b| b.max(g)));
            }
        }
        let trailing = horizon + 1 - elems[elems.len() - 1];
        max_gap = max_gap.max(trailing);
        let verdict = bound.is_some_and(|b| max_gap <= b);
        SyndeticReport {
            stats: GapStats { horizon, max_gap: Some(max_gap), element_count: elems.len() as u64 },
            bound,
            verdict,
        }
    }

    /// Decides `self ⊆ other` when both sides are finite or periodic leaves.
    pub fn subset_of(&self, other: &NatSetExpr) -> Option<bool> {
        use NatSetExpr::*;
        match (self, other) {
            (Finite(a), _) if other.is_leaf_decidable() => Some(a.iter().all(|&k| other.member(k))),
            (Periodic { modulus: m1, .. }, Periodic { modulus: m2, .. }) => {
                let l = lcm(*m1, *m2);
                Some((1..=l).all(|k| !self.member(k) || other.member(k)))
            }
            (Periodic { residues, .. }, Finite(_)) => Some(residues.is_empty()),
            _ => None,
        }
    }

    fn is_leaf_decidable(&self) -> bool {
        matches!(self, NatSetExpr::Finite(_) | NatSetExpr::Periodic { .. })
    }
}

pub(crate) fn prefix_counts_of(indicator: &[bool]) -> Vec<u32> {
    let mut out = Vec::with_capacity(indicator.len() + 1);
    let mut c = 0u32;
    out.push(0);
    for &m in indicator {
        c += m as u32;
        out.push(c);
    }
    out
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct GapStats {
    pub horizon: u64,
    /// `None` is the unbounded flag (fewer than two elements below the horizon).
    pub max_gap: Option<u64>,
    pub element_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SyndeticReport {
    pub stats: GapStats,
    pub bound: Option<u64>,
    pub verdict: bool,
}

impl fmt::Display for PositionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositionRule::Geometric { c, r } => write!(f, "geom({c},{r})"),
            PositionRule::Polynomial { c, p } => write!(f, "poly({c},{p})"),
        }
    }
}

impl fmt::Display for LengthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthRule::Const(l) => write!(f, "const({l})"),
            LengthRule::Linear { scale: 1, offset: 0 } => write!(f, "linear"),
            LengthRule::Linear { scale, offset: 0 } => write!(f, "linear({scale})"),
            LengthRule::Linear { scale, offset } => write!(f, "affine({scale},{offset})"),
            LengthRule::SuperExp => write!(f, "superexp"),
            LengthRule::Ratio { num, den } => write!(f, "ratio({num},{den})"),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[u64]) -> fmt::Result {
    write!(f, "{{")?;
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{v}")?;
    }
    write!(f, "}}")
}

/// Renders the expression in the set-spec grammar accepted by [`parse_set`].
impl fmt::Display for NatSetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatSetExpr::Finite(v) => {
                write!(f, "finite:")?;
                write_list(f, v)
            }
            NatSetExpr::Periodic { modulus, residues } => {
                write!(f, "periodic:{modulus}:")?;
                write_list(f, residues)
            }
            NatSetExpr::Blocks(b) => write!(f, "blocks:pos={}:len={}", b.position, b.length),
            NatSetExpr::Union(a, b) => write!(f, "union({a},{b})"),
            NatSetExpr::Intersection(a, b) => write!(f, "inter({a},{b})"),
            NatSetExpr::Complement(a) => write!(f, "compl({a})"),
        }
    }
}

/// Parses a set spec such as `union(periodic:2:{0},compl(finite:{3,7}))`.
pub fn parse_set(input: &str) -> Result<NatSetExpr, NatSetError> {
    let mut p = Parser { src: input.as_bytes(), pos: 0 };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> NatSetError {
        NatSetError::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), NatSetError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{tok}`")))
        }
    }

    fn number(&mut self) -> Result<u64, NatSetError> {
        self.skip_ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| NatSetError::Parse { pos: start, msg: "number out of range".into() })
    }

    fn list(&mut self) -> Result<Vec<u64>, NatSetError> {
        self.expect("{")?;
        let mut out = Vec::new();
        if self.eat("}") {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if self.eat("}") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn pair(&mut self) -> Result<(u64, u64), NatSetError> {
        self.expect("(")?;
        let a = self.number()?;
        self.expect(",")?;
        let b = self.number()?;
        self.expect(")")?;
        Ok((a, b))
    }

    fn expr(&mut self) -> Result<NatSetExpr, NatSetError> {
        let at = self.pos;
        let wrap = |e: NatSetError| match e {
            NatSetError::Parse { .. } => e,
            other => NatSetError::Parse { pos: at, msg: other.to_string() },
        };
        if self.eat("finite:") {
            let v = self.list()?;
            return NatSetExpr::finite(v).map_err(wrap);
        }
        if self.eat("periodic:") {
            let m = self.number()?;
            self.expect(":")?;
            let r = self.list()?;
            return NatSetExpr::periodic(m, r).map_err(wrap);
        }
        if self.eat("blocks:") {
            self.expect("pos=")?;
            let pos = if self.eat("geom") {
                let (c, r) = self.pair()?;
                PositionRule::Geometric { c, r }
            } else if self.eat("poly") {
                let (c, p) = self.pair()?;
                let p = u32::try_from(p).map_err(|_| self.err("exponent too large"))?;
                PositionRule::Polynomial { c, p }
            } else {
                return Err(self.err("expected geom(c,r) or poly(c,p)"));
            };
            self.expect(":")?;
            self.expect("len=")?;
            let len = if self.eat("const") {
                self.expect("(")?;
                let l = self.number()?;
                self.expect(")")?;
                LengthRule::Const(l)
            } else if self.eat("linear") {
                self.skip_ws();
                if self.src.get(self.pos) == Some(&b'(') {
                    self.expect("(")?;
                    let scale = self.number()?;
                    self.expect(")")?;
                    LengthRule::Linear { scale, offset: 0 }
                } else {
                    LengthRule::Linear { scale: 1, offset: 0 }
                }
            } else if self.eat("affine") {
                let (scale, offset) = self.pair()?;
                LengthRule::Linear { scale, offset }
            } else if self.eat("superexp") {
                LengthRule::SuperExp
            } else if self.eat("ratio") {
                let (num, den) = self.pair()?;
                LengthRule::Ratio { num, den }
            } else {
                return Err(self.err("expected const(L), linear, affine(c,d), superexp or ratio(p,q)"));
            };
            return NatSetExpr::blocks(pos, len).map_err(wrap);
        }
        for (kw, binary) in [("union(", true), ("inter(", true), ("compl(", false)] {
            if self.eat(kw) {
                let a = self.expr()?;
                if !binary {
                    self.expect(")")?;
                    return Ok(NatSetExpr::complement(a));
                }
                self.expect(",")?;
                let b = self.expr()?;
                self.expect(")")?;
                return Ok(if kw == "union(" {
                    NatSetExpr::union(a, b)
                } else {
                    NatSetExpr::intersection(a, b)
                });
            }
        }
        Err(self.err("expected finite:, periodic:, blocks:, union(, inter( or compl("))
    }
}
