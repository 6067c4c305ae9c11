//! Lower/upper density and lower/upper Banach density.
//!
//! Estimates are exact rationals computed from prefix counts, so the
//! complement identities `d̲(A) + d̄(Aᶜ) = 1` and `Bd̲(A) + B̄d(Aᶜ) = 1` hold
//! without rounding whenever both sides use the same configuration.
//!
//! Estimator layout at horizon `N`, tail fraction `τ`, window cap `S`:
//! prefix ratios are taken over `n ∈ [⌈τN⌉, N]`; Banach windows
//! `[n+1, n+s]` start at `n ∈ [⌈τN⌉, N−s]` for the 64 window lengths
//! `s ∈ [max(1, S−63), S]`. The lower Banach value is the best of the per-length
//! minima and is clamped to at most `d̲`; the upper Banach value is the least
//! per-length maximum, clamped to at least `d̄`.

use std::cmp::Ordering;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::natset::{lcm, prefix_counts_of, LengthRule, NatSetExpr, PositionRule};

/// Number of consecutive window lengths scanned below the cap.
pub const WINDOW_SPREAD: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid density config: {0}")]
    Config(String),
    #[error("stride must be >= 1")]
    Stride,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub horizon: u64,
    pub window: u64,
    pub tail: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { horizon: 100_000, window: 1_000, tail: 0.5 }
    }
}

impl DensityConfig {
    pub fn new(horizon: u64, window: u64, tail: f64) -> Result<Self, DensityError> {
        let cfg = DensityConfig { horizon, window, tail };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        if self.horizon < 10 {
            return Err(DensityError::Config("horizon must be >= 10".into()));
        }
        if !(self.tail > 0.0 && self.tail < 1.0) {
            return Err(DensityError::Config("tail fraction must lie in (0,1)".into()));
        }
        if self.window == 0 {
            return Err(DensityError::Config("window must be >= 1".into()));
        }
        let n0 = self.tail_start();
        if self.window as f64 > self.tail * self.horizon as f64 || self.window > self.horizon - n0 {
            return Err(DensityError::Config(format!(
                "window {} does not fit in the tail [{n0}, {}]",
                self.window, self.horizon
            )));
        }
        Ok(())
    }

    /// First index `⌈τN⌉` of the tail range.
    pub fn tail_start(&self) -> u64 {
        ((self.tail * self.horizon as f64).ceil() as u64).clamp(1, self.horizon)
    }

    fn window_lengths(&self) -> std::ops::RangeInclusive<u64> {
        self.window.saturating_sub(WINDOW_SPREAD - 1).max(1)..=self.window
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Estimated,
}

/// The four densities of a set, as exact rationals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityProfile {
    pub lower: Ratio<u64>,
    pub upper: Ratio<u64>,
    pub lower_banach: Ratio<u64>,
    pub upper_banach: Ratio<u64>,
    pub mode: Mode,
    /// `None` for exact profiles.
    pub config: Option<DensityConfig>,
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn one_minus(r: Ratio<u64>) -> Ratio<u64> {
    Ratio::new_raw(r.denom() - r.numer(), *r.denom())
}

impl DensityProfile {
    fn constant(r: Ratio<u64>) -> Self {
        DensityProfile {
            lower: r,
            upper: r,
            lower_banach: r,
            upper_banach: r,
            mode: Mode::Exact,
            config: None,
        }
    }

    fn exact(lower: u64, upper: u64, lb: u64, ub: u64) -> Self {
        let r = |v| Ratio::from_integer(v);
        DensityProfile {
            lower: r(lower),
            upper: r(upper),
            lower_banach: r(lb),
            upper_banach: r(ub),
            mode: Mode::Exact,
            config: None,
        }
    }

    pub fn lower_f64(&self) -> f64 {
        to_f64(self.lower)
    }
    pub fn upper_f64(&self) -> f64 {
        to_f64(self.upper)
    }
    pub fn lower_banach_f64(&self) -> f64 {
        to_f64(self.lower_banach)
    }
    pub fn upper_banach_f64(&self) -> f64 {
        to_f64(self.upper_banach)
    }

    /// `(d̲, d̄, Bd̲, B̄d)` as floats.
    pub fn values(&self) -> [f64; 4] {
        [self.lower_f64(), self.upper_f64(), self.lower_banach_f64(), self.upper_banach_f64()]
    }

    /// Profile of the complement, by the complement identities.
    pub fn complement(&self) -> Self {
        DensityProfile {
            lower: one_minus(self.upper),
            upper: one_minus(self.lower),
            lower_banach: one_minus(self.upper_banach),
            upper_banach: one_minus(self.lower_banach),
            ..*self
        }
    }

    pub fn chain_holds(&self) -> bool {
        self.lower_banach <= self.lower && self.lower <= self.upper && self.upper <= self.upper_banach
    }
}

impl Serialize for DensityProfile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DensityProfile", 7)?;
        st.serialize_field("lower", &self.lower_f64())?;
        st.serialize_field("upper", &self.upper_f64())?;
        st.serialize_field("lower_banach", &self.lower_banach_f64())?;
        st.serialize_field("upper_banach", &self.upper_banach_f64())?;
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("horizon", &self.config.map(|c| c.horizon))?;
        st.serialize_field("window", &self.config.map(|c| c.window))?;
        st.end()
    }
}

/// Fraction `num/den` compared by cross multiplication, no reduction.
#[derive(Debug, Clone, Copy)]
struct Frac {
    num: u64,
    den: u64,
}

impl Frac {
    fn cmp(&self, o: &Frac) -> Ordering {
        (self.num as u128 * o.den as u128).cmp(&(o.num as u128 * self.den as u128))
    }
    fn min(self, o: Frac) -> Frac {
        if o.cmp(&self) == Ordering::Less {
            o
        } else {
            self
        }
    }
    fn max(self, o: Frac) -> Frac {
        if o.cmp(&self) == Ordering::Greater {
            o
        } else {
            self
        }
    }
    fn ratio(self) -> Ratio<u64> {
        Ratio::new(self.num, self.den)
    }
}

/// Estimated profile of a set given its prefix counts `c[0..=N]`.
pub fn profile_from_prefix(counts: &[u32], cfg: &DensityConfig) -> DensityProfile {
    let n = cfg.horizon as usize;
    assert!(counts.len() > n, "prefix counts shorter than the horizon");
    let n0 = cfg.tail_start() as usize;

    let mut lo = Frac { num: counts[n0] as u64, den: n0 as u64 };
    let mut hi = lo;
    for (k, &c) in counts.iter().enumerate().take(n + 1).skip(n0 + 1) {
        let f = Frac { num: c as u64, den: k as u64 };
        lo = lo.min(f);
        hi = hi.max(f);
    }

    let per_length: Vec<(Frac, Frac)> = cfg
        .window_lengths()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| {
            let s_us = s as usize;
            let mut wmin = u32::MAX;
            let mut wmax = 0u32;
            for start in n0..=n - s_us {
                let w = counts[start + s_us] - counts[start];
                wmin = wmin.min(w);
                wmax = wmax.max(w);
            }
            (Frac { num: wmin as u64, den: s }, Frac { num: wmax as u64, den: s })
        })
        .collect();
    let mut lb = per_length[0].0;
    let mut ub = per_length[0].1;
    for &(a, b) in &per_length[1..] {
        lb = lb.max(a);
        ub = ub.min(b);
    }
    lb = lb.min(lo);
    ub = ub.max(hi);

    DensityProfile {
        lower: lo.ratio(),
        upper: hi.ratio(),
        lower_banach: lb.ratio(),
        upper_banach: ub.ratio(),
        mode: Mode::Estimated,
        config: Some(*cfg),
    }
}

/// Estimated profile of a set given its indicator on `[1, N]`.
pub fn profile_from_indicator(indicator: &[bool], cfg: &DensityConfig) -> DensityProfile {
    profile_from_prefix(&prefix_counts_of(indicator), cfg)
}

pub fn estimate_profile(a: &NatSetExpr, cfg: &DensityConfig) -> Result<DensityProfile, DensityError> {
    cfg.validate()?;
    Ok(profile_from_prefix(&a.prefix_counts(cfg.horizon), cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no closed form for this expression")]
pub struct NotClosedForm;

const MAX_PERIOD: u64 = 1_000_000;

/// Closed-form profile where one is derivable, otherwise [`NotClosedForm`].
pub fn exact_profile(a: &NatSetExpr) -> Result<DensityProfile, NotClosedForm> {
    if let Some((m, table)) = periodic_form(a) {
        let r = table.iter().filter(|&&b| b).count() as u64;
        return Ok(DensityProfile::constant(Ratio::new(r, m)));
    }
    match a {
        NatSetExpr::Finite(_) => Ok(DensityProfile::exact(0, 0, 0, 0)),
        NatSetExpr::Periodic { .. } => unreachable!("periodic leaves have a periodic form"),
        NatSetExpr::Blocks(b) => blocks_profile(b.position, b.length),
        NatSetExpr::Complement(x) => exact_profile(x).map(|p| p.complement()),
        NatSetExpr::Union(x, y) => {
            let (px, py) = (exact_profile(x), exact_profile(y));
            for (p, other) in [(&px, &py), (&py, &px)] {
                if let Ok(p) = p {
                    if is_null(p) {
                        return *other;
                    }
                    if is_full(p) {
                        return Ok(DensityProfile::exact(1, 1, 1, 1));
                    }
                }
            }
            Err(NotClosedForm)
        }
        NatSetExpr::Intersection(x, y) => {
            let (px, py) = (exact_profile(x), exact_profile(y));
            for (p, other) in [(&px, &py), (&py, &px)] {
                if let Ok(p) = p {
                    if is_null(p) {
                        return Ok(DensityProfile::exact(0, 0, 0, 0));
                    }
                    if is_full(p) {
                        return *other;
                    }
                }
            }
            Err(NotClosedForm)
        }
    }
}

fn is_null(p: &DensityProfile) -> bool {
    p.upper_banach == Ratio::from_integer(0)
}

fn is_full(p: &DensityProfile) -> bool {
    p.lower_banach == Ratio::from_integer(1)
}

/// Period and one-period membership table (indexed by residue) for boolean
/// combinations of periodic leaves.
fn periodic_form(a: &NatSetExpr) -> Option<(u64, Vec<bool>)> {
    match a {
        NatSetExpr::Periodic { modulus, residues } => {
            let mut t = vec![false; *modulus as usize];
            residues.iter().for_each(|&r| t[r as usize] = true);
            Some((*modulus, t))
        }
        NatSetExpr::Complement(x) => {
            let (m, t) = periodic_form(x)?;
            Some((m, t.into_iter().map(|b| !b).collect()))
        }
        NatSetExpr::Union(x, y) | NatSetExpr::Intersection(x, y) => {
            let (m1, t1) = periodic_form(x)?;
            let (m2, t2) = periodic_form(y)?;
            let m = lcm(m1, m2);
            if m > MAX_PERIOD {
                return None;
            }
            let union = matches!(a, NatSetExpr::Union(..));
            let t = (0..m)
                .map(|r| {
                    let (p, q) = (t1[(r % m1) as usize], t2[(r % m2) as usize]);
                    if union {
                        p || q
                    } else {
                        p && q
                    }
                })
                .collect();
            Some((m, t))
        }
        _ => None,
    }
}

fn blocks_profile(pos: PositionRule, len: LengthRule) -> Result<DensityProfile, NotClosedForm> {
    let len = match len {
        LengthRule::Linear { scale: 0, offset } => LengthRule::Const(offset),
        other => other,
    };
    let zeros = DensityProfile::exact(0, 0, 0, 0);
    let runs = DensityProfile::exact(0, 0, 0, 1);
    match (pos, len) {
        (PositionRule::Geometric { .. }, LengthRule::Const(_)) => Ok(zeros),
        (PositionRule::Geometric { .. }, LengthRule::Linear { .. } | LengthRule::SuperExp) => {
            Ok(runs)
        }
        // blocks [ck, ck+L-1] agree with residues {0..L-1} mod c up to a finite set
        (PositionRule::Polynomial { c, p: 1 }, LengthRule::Const(l)) => {
            Ok(DensityProfile::constant(Ratio::new(l, c)))
        }
        (PositionRule::Polynomial { p, .. }, LengthRule::Const(_)) if p >= 2 => Ok(zeros),
        (PositionRule::Polynomial { p, .. }, LengthRule::Linear { .. }) if p >= 3 => Ok(runs),
        _ => Err(NotClosedForm),
    }
}

/// Points `(n, |A ∩ [1,n]| / n)` for `n = stride, 2·stride, ..., ≤ N`.
pub fn prefix_ratio_series(
    a: &NatSetExpr,
    cfg: &DensityConfig,
    stride: u64,
) -> Result<Vec<(u64, f64)>, DensityError> {
    if stride == 0 {
        return Err(DensityError::Stride);
    }
    let counts = a.prefix_counts(cfg.horizon);
    Ok((1..=cfg.horizon / stride)
        .map(|j| {
            let n = j * stride;
            (n, counts[n as usize] as f64 / n as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::natset::parse_set;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn evens_estimate() {
        let p = estimate_profile(&parse_set("periodic:2:{0}").unwrap(), &DensityConfig::default())
            .unwrap();
        for v in p.values() {
            assert!((v - 0.5).abs() <= 0.01);
        }
        assert_eq!(p.mode, Mode::Estimated);
    }

    #[test]
    fn finite_estimate_is_zero() {
        let f = NatSetExpr::finite((1..=100).collect()).unwrap();
        let p = estimate_profile(&f, &DensityConfig::default()).unwrap();
        assert!(p.values().iter().all(|v| *v <= 0.01));
        assert_eq!(p.lower_banach_f64(), 0.0);
    }

    #[test]
    fn geometric_blocks_estimate() {
        let a = parse_set("blocks:pos=geom(1,2):len=linear").unwrap();
        let cfg = DensityConfig::new(1_000_000, 1_000, 0.5).unwrap();
        let p = estimate_profile(&a, &cfg).unwrap();
        assert!(p.upper_f64() <= 0.001);
        // the only tail block has length 19, so long windows cannot see a run
        assert!(p.upper_banach_f64() <= 19.0 / 937.0 + 1e-12);
        let short = DensityConfig::new(1_000_000, 10, 0.5).unwrap();
        assert!(estimate_profile(&a, &short).unwrap().upper_banach_f64() >= 0.95);
    }

    #[test]
    fn exact_examples() {
        let p = exact_profile(&parse_set("periodic:6:{0,3}").unwrap()).unwrap();
        assert_eq!(p.values(), [1.0 / 3.0; 4]);
        let c = exact_profile(&parse_set("compl(periodic:2:{0})").unwrap()).unwrap();
        assert_eq!(c.lower, r(1, 2));
        assert_eq!(c.upper_banach, r(1, 2));
        let b = exact_profile(&parse_set("blocks:pos=geom(1,2):len=linear").unwrap()).unwrap();
        assert_eq!(b.values(), [0.0, 0.0, 0.0, 1.0]);
        let lin = parse_set("blocks:pos=poly(5,1):len=const(2)").unwrap();
        assert_eq!(exact_profile(&lin).unwrap().lower, r(2, 5));
        assert_eq!(exact_profile(&parse_set("blocks:pos=geom(1,2):len=ratio(1,2)").unwrap()), Err(NotClosedForm));
    }

    #[test]
    fn exact_boolean_rules() {
        let e = exact_profile(&parse_set("inter(periodic:2:{0},periodic:3:{0})").unwrap()).unwrap();
        assert_eq!(e.lower, r(1, 6));
        let u = exact_profile(&parse_set("union(periodic:4:{1},finite:{2,3})").unwrap()).unwrap();
        assert_eq!(u.lower, r(1, 4));
        let g = "blocks:pos=geom(1,2):len=linear";
        let i = exact_profile(&parse_set(&format!("inter({g},periodic:3:{{0,1}})")).unwrap());
        assert_eq!(i, Err(NotClosedForm));
        let w = exact_profile(&parse_set(&format!("union({g},compl(finite:{{1}}))")).unwrap()).unwrap();
        assert_eq!(w.values(), [1.0; 4]);
    }

    #[test]
    fn series_examples() {
        let f = NatSetExpr::finite(vec![1]).unwrap();
        let cfg = DensityConfig { horizon: 3, window: 1, tail: 0.5 };
        let s = prefix_ratio_series(&f, &cfg, 1).unwrap();
        assert_eq!(s, vec![(1, 1.0), (2, 0.5), (3, 1.0 / 3.0)]);
        let ev = parse_set("periodic:2:{0}").unwrap();
        let cfg = DensityConfig::default();
        let s = prefix_ratio_series(&ev, &cfg, cfg.horizon).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].1 - 0.5).abs() <= 1.0 / cfg.horizon as f64);
        assert_eq!(prefix_ratio_series(&ev, &cfg, 0), Err(DensityError::Stride));
    }

    #[test]
    fn config_validation() {
        assert!(DensityConfig::new(5, 1, 0.5).is_err());
        assert!(DensityConfig::new(100, 60, 0.5).is_err());
        assert!(DensityConfig::new(100, 10, 1.0).is_err());
        assert!(DensityConfig::new(100, 0, 0.5).is_err());
        assert!(DensityConfig::new(100, 50, 0.5).is_ok());
    }

    #[test]
    fn complement_duality_is_exact() {
        let cfg = DensityConfig::new(20_000, 300, 0.5).unwrap();
        let a = parse_set("union(blocks:pos=poly(7,2):len=linear(3),periodic:5:{1,2})").unwrap();
        let p = estimate_profile(&a, &cfg).unwrap();
        let q = estimate_profile(&NatSetExpr::complement(a), &cfg).unwrap();
        assert_eq!(p.lower + q.upper, r(1, 1));
        assert_eq!(p.lower_banach + q.upper_banach, r(1, 1));
        assert_eq!(p.complement(), q);
    }
}
