//! Chaos predicates on distance sequences and the implication lattice.
//!
//! For a pair with distances `d_k`, `L(σ) = {k ≤ N : d_k < σ}` and
//! `U(ε) = {k ≤ N : d_k ≥ ε}`. Every flag is a boolean combination of density
//! clauses on these sets; "= 0" means an estimate `≤ θ0`, "= 1" means `≥ 1 − θ1`
//! and "> 0" means `≥ θ+`. "For each ε > 0" is checked at the smallest grid ε,
//! which is the binding case because `U(ε)` shrinks as `ε` grows.
//!
//! Clauses used below (`σ` ranges over the σ-grid):
//!
//! * `L_Bd0(σ)`: `Bd̲(L(σ)) ≤ θ0`, `L_d0(σ)`: `d̲(L(σ)) ≤ θ0`
//! * `U_Bd0`: `Bd̲(U(ε_min)) ≤ θ0`, `U_d0`: `d̲(U(ε_min)) ≤ θ0`
//! * `LIMINF0`: tail minimum of `d_k` below `θ0·σ_min`, or `U_Bd0`
//! * `LIMSUP+`: some `B̄d(U(σ)) ≥ θ+`, or `UNB`
//! * `UNB`: tail supremum of the top seminorm of `x_k − y_k` above `G`
//!
//! The type 2½ flags hold on a direct gap certificate or when the matching
//! type 2 flag holds; type 3 holds on an interval certificate or the matching
//! 2½ flag. Witnesses record which route was taken.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::config::{ChaosConfig, ConfigError};
use crate::csv_float;
use crate::density::{profile_from_indicator, DensityProfile};
use crate::linalg::CMat;
use crate::metric::Metric;
use crate::orbits::{generate_pair, generate_restricted_pair, OperatorSeq, OrbitError, OrbitPair, SelectionPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("sequence has {len} terms, horizon needs {need}")]
    TooShort { len: usize, need: usize },
    #[error("a sample set needs at least two vectors")]
    TooFewVectors,
    #[error("sample vectors {0} and {1} are equal")]
    Duplicate(usize, usize),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    Dc,
    Rdc,
    Rdc1,
    Rdc2,
    Mix1,
    Mix2,
    Mix3,
    Mix4,
    Ly,
    SLy,
    Ang1,
    Ang2,
    Rdc02,
    Rdc12,
    Rdc22,
    Dc02,
    R2h,
    R2h1,
    R2h2,
    Dc2h,
    R3,
    R31,
    R32,
    Dc3,
}

impl Flag {
    pub const ALL: [Flag; 24] = [
        Flag::Dc,
        Flag::Rdc,
        Flag::Rdc1,
        Flag::Rdc2,
        Flag::Mix1,
        Flag::Mix2,
        Flag::Mix3,
        Flag::Mix4,
        Flag::Ly,
        Flag::SLy,
        Flag::Ang1,
        Flag::Ang2,
        Flag::Rdc02,
        Flag::Rdc12,
        Flag::Rdc22,
        Flag::Dc02,
        Flag::R2h,
        Flag::R2h1,
        Flag::R2h2,
        Flag::Dc2h,
        Flag::R3,
        Flag::R31,
        Flag::R32,
        Flag::Dc3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Flag::Dc => "DC",
            Flag::Rdc => "RDC",
            Flag::Rdc1 => "RDC1",
            Flag::Rdc2 => "RDC2",
            Flag::Mix1 => "MIX1",
            Flag::Mix2 => "MIX2",
            Flag::Mix3 => "MIX3",
            Flag::Mix4 => "MIX4",
            Flag::Ly => "LY",
            Flag::SLy => "sLY",
            Flag::Ang1 => "ANG1",
            Flag::Ang2 => "ANG2",
            Flag::Rdc02 => "RDC_0_2",
            Flag::Rdc12 => "RDC_1_2",
            Flag::Rdc22 => "RDC_2_2",
            Flag::Dc02 => "DC_0_2",
            Flag::R2h => "R2H",
            Flag::R2h1 => "R2H_1",
            Flag::R2h2 => "R2H_2",
            Flag::Dc2h => "DC_2H",
            Flag::R3 => "R3",
            Flag::R31 => "R3_1",
            Flag::R32 => "R3_2",
            Flag::Dc3 => "DC_3",
        }
    }

    pub fn from_name(s: &str) -> Option<Flag> {
        Flag::ALL.into_iter().find(|f| f.name() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Flag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Profiles of `L(σ)` over the σ-grid and `U(ε)` over the ε-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityStats {
    pub sigma: Vec<f64>,
    pub lower_sets: Vec<DensityProfile>,
    pub epsilon: Vec<f64>,
    pub upper_sets: Vec<DensityProfile>,
    /// `U(σ)` for each σ-grid point, the exact complement of `L(σ)`.
    pub upper_at_sigma: Vec<DensityProfile>,
}

impl DensityStats {
    /// Rows `sigma,dl,du,bdl,bdu,side`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,dl,du,bdl,bdu,side\n");
        let rows = self
            .sigma
            .iter()
            .zip(&self.lower_sets)
            .map(|(s, p)| (s, p, "L"))
            .chain(self.epsilon.iter().zip(&self.upper_sets).map(|(s, p)| (s, p, "U")));
        for (s, p, side) in rows {
            let v = p.values();
            out.push_str(&format!(
                "{},{},{},{},{},{side}\n",
                csv_float(*s),
                csv_float(v[0]),
                csv_float(v[1]),
                csv_float(v[2]),
                csv_float(v[3])
            ));
        }
        out
    }
}

fn set_profile(d: &[f64], cfg: &ChaosConfig, pred: impl Fn(f64) -> bool) -> DensityProfile {
    let ind: Vec<bool> = d.iter().map(|&v| pred(v)).collect();
    profile_from_indicator(&ind, &cfg.density)
}

pub fn density_stats(d: &[f64], cfg: &ChaosConfig) -> Result<DensityStats, ClassifyError> {
    cfg.validate()?;
    let n = cfg.density.horizon as usize;
    if d.len() < n {
        return Err(ClassifyError::TooShort { len: d.len(), need: n });
    }
    let d = &d[..n];
    let lower_sets: Vec<DensityProfile> =
        cfg.sigma_grid.par_iter().map(|&s| set_profile(d, cfg, |v| v < s)).collect();
    let upper_at_sigma: Vec<DensityProfile> = lower_sets.iter().map(|p| p.complement()).collect();
    let upper_sets = if cfg.grids_coincide() {
        upper_at_sigma.clone()
    } else {
        cfg.epsilon_grid.par_iter().map(|&e| set_profile(d, cfg, |v| v >= e)).collect()
    };
    Ok(DensityStats {
        sigma: cfg.sigma_grid.clone(),
        lower_sets,
        epsilon: cfg.epsilon_grid.clone(),
        upper_sets,
        upper_at_sigma,
    })
}

/// Parameters and realized values behind a true flag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Witness {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub r: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub via: Option<String>,
    pub values: Vec<(&'static str, f64)>,
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        if let Some(v) = self.sigma {
            m.serialize_entry("sigma", &v)?;
        }
        if let Some(v) = self.epsilon {
            m.serialize_entry("epsilon", &v)?;
        }
        if let Some(v) = self.c {
            m.serialize_entry("c", &v)?;
        }
        if let Some(v) = self.r {
            m.serialize_entry("r", &v)?;
        }
        if let Some((a, b)) = self.interval {
            m.serialize_entry("interval", &[a, b])?;
        }
        if let Some(v) = &self.via {
            m.serialize_entry("via", v)?;
        }
        for (k, v) in &self.values {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

/// Sequence-level evidence shared by the Li-Yorke type clauses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub tail_min: f64,
    pub tail_max: f64,
    pub gap_top_sup: f64,
    pub u_bd0: bool,
    pub u_d0: bool,
    pub liminf0: bool,
    pub limsup_plus: bool,
    pub unb: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVerdict {
    flags: [bool; 24],
    witnesses: Vec<Option<Witness>>,
    pub evidence: Evidence,
    pub config: ChaosConfig,
}

impl ChaosVerdict {
    pub fn get(&self, f: Flag) -> bool {
        self.flags[f.index()]
    }

    pub fn witness(&self, f: Flag) -> Option<&Witness> {
        self.witnesses[f.index()].as_ref()
    }

    /// Overrides a flag; used to inject lattice violations in self-tests.
    pub fn set(&mut self, f: Flag, value: bool) {
        self.flags[f.index()] = value;
    }

    pub fn true_flags(&self) -> Vec<Flag> {
        Flag::ALL.into_iter().filter(|f| self.get(*f)).collect()
    }
}

struct FlagMap<'a>(&'a ChaosVerdict);

impl Serialize for FlagMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(24))?;
        for f in Flag::ALL {
            m.serialize_entry(f.name(), &self.0.get(f))?;
        }
        m.end()
    }
}

struct WitnessMap<'a>(&'a ChaosVerdict);

impl Serialize for WitnessMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        for f in Flag::ALL {
            if let (true, Some(w)) = (self.0.get(f), self.0.witness(f)) {
                m.serialize_entry(f.name(), w)?;
            }
        }
        m.end()
    }
}

impl Serialize for ChaosVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ChaosVerdict", 4)?;
        st.serialize_field("flags", &FlagMap(self))?;
        st.serialize_field("witnesses", &WitnessMap(self))?;
        st.serialize_field("evidence", &self.evidence)?;
        st.serialize_field("config", &self.config)?;
        st.end()
    }
}

/// Which pair of densities a gap certificate compares.
#[derive(Clone, Copy)]
struct GapVariant {
    lower: fn(&DensityProfile) -> f64,
    upper: fn(&DensityProfile) -> f64,
    lower_name: &'static str,
    upper_name: &'static str,
}

const GAP_R: GapVariant = GapVariant {
    lower: DensityProfile::lower_banach_f64,
    upper: DensityProfile::upper_banach_f64,
    lower_name: "L.bdl",
    upper_name: "L.bdu",
};
const GAP_1: GapVariant = GapVariant {
    lower: DensityProfile::lower_banach_f64,
    upper: DensityProfile::upper_f64,
    lower_name: "L.bdl",
    upper_name: "L.du",
};
const GAP_2: GapVariant = GapVariant {
    lower: DensityProfile::lower_f64,
    upper: DensityProfile::upper_banach_f64,
    lower_name: "L.dl",
    upper_name: "L.bdu",
};
const GAP_DC: GapVariant = GapVariant {
    lower: DensityProfile::lower_f64,
    upper: DensityProfile::upper_f64,
    lower_name: "L.dl",
    upper_name: "L.du",
};

fn gap_over(stats: &DensityStats, v: GapVariant, lo: usize, hi: usize) -> (f64, f64) {
    let sets = &stats.lower_sets[lo..=hi];
    let sup_lower = sets.iter().map(v.lower).fold(f64::NEG_INFINITY, f64::max);
    let inf_upper = sets.iter().map(v.upper).fold(f64::INFINITY, f64::min);
    (sup_lower, inf_upper)
}

/// Type 2½: a grid point `r` with at least two grid points below it and a gap
/// of `γ` between lower and upper values of `L(σ)` for all of them.
fn half_certificate(stats: &DensityStats, v: GapVariant, gamma: f64) -> Option<Witness> {
    (2..stats.sigma.len()).find_map(|j| {
        let (lo, up) = gap_over(stats, v, 0, j - 1);
        (lo + gamma <= up).then(|| Witness {
            r: Some(stats.sigma[j]),
            c: Some(0.5 * (lo + up)),
            values: vec![(v.lower_name, lo), (v.upper_name, up)],
            ..Witness::default()
        })
    })
}

/// Type 3: a grid interval `[a, b]`, `a < b`, carrying the gap; reports the longest.
fn interval_certificate(stats: &DensityStats, v: GapVariant, gamma: f64) -> Option<Witness> {
    let n = stats.sigma.len();
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for a in 0..n {
        let mut b = a + 1;
        let mut last = None;
        while b < n {
            let (lo, up) = gap_over(stats, v, a, b);
            if lo + gamma > up {
                break;
            }
            last = Some((a, b, lo, up));
            b += 1;
        }
        if let Some(c) = last {
            if best.is_none_or(|x| c.1 - c.0 > x.1 - x.0) {
                best = Some(c);
            }
        }
    }
    best.map(|(a, b, lo, up)| Witness {
        interval: Some((stats.sigma[a], stats.sigma[b])),
        c: Some(0.5 * (lo + up)),
        values: vec![(v.lower_name, lo), (v.upper_name, up)],
        ..Witness::default()
    })
}

fn tail_bounds(cfg: &ChaosConfig) -> std::ops::Range<usize> {
    let n = cfg.density.horizon as usize;
    let start = (cfg.density.tail_start() as usize).clamp(1, n);
    start - 1..n
}

/// Flags from a distance sequence and the top seminorm of `x_k − y_k`.
pub fn classify_sequences(d: &[f64], gap_top: &[f64], cfg: &ChaosConfig) -> Result<ChaosVerdict, ClassifyError> {
    let stats = density_stats(d, cfg)?;
    let n = cfg.density.horizon as usize;
    if gap_top.len() < n {
        return Err(ClassifyError::TooShort { len: gap_top.len(), need: n });
    }
    Ok(classify_stats(&stats, d, gap_top, cfg))
}

pub fn classify_pair(pair: &OrbitPair, cfg: &ChaosConfig) -> Result<ChaosVerdict, ClassifyError> {
    classify_sequences(&pair.distances, &pair.gap_top, cfg)
}

fn classify_stats(stats: &DensityStats, d: &[f64], gap_top: &[f64], cfg: &ChaosConfig) -> ChaosVerdict {
    let (t0, tp) = (cfg.theta0, cfg.theta_plus);
    let tail = tail_bounds(cfg);
    let tail_min = d[tail.clone()].iter().copied().fold(f64::INFINITY, f64::min);
    let tail_max = d[tail.clone()].iter().copied().fold(0.0, f64::max);
    let gap_top_sup = gap_top[tail].iter().copied().fold(0.0, f64::max);

    let ue = &stats.upper_sets[0];
    let eps = stats.epsilon[0];
    let u_bd0 = ue.lower_banach_f64() <= t0;
    let u_d0 = ue.lower_f64() <= t0;
    let unb = gap_top_sup > cfg.growth;
    let liminf_direct = tail_min < t0 * cfg.sigma_min();
    let liminf0 = liminf_direct || u_bd0;

    let first_sigma = |pred: &dyn Fn(usize) -> bool| (0..stats.sigma.len()).find(|&i| pred(i));
    let l_bd0 = first_sigma(&|i| stats.lower_sets[i].lower_banach_f64() <= t0);
    let l_d0 = first_sigma(&|i| stats.lower_sets[i].lower_f64() <= t0);
    let u_bdu = first_sigma(&|i| stats.upper_at_sigma[i].upper_banach_f64() >= tp);
    let u_du = first_sigma(&|i| stats.upper_at_sigma[i].upper_f64() >= tp);
    let limsup_plus = u_bdu.is_some() || unb;

    let mut flags = [false; 24];
    let mut witnesses: Vec<Option<Witness>> = vec![None; 24];
    let mut put = |f: Flag, w: Option<Witness>| {
        flags[f.index()] = w.is_some();
        witnesses[f.index()] = w;
    };

    let u_values = |w: &mut Witness, bd: bool| {
        w.epsilon = Some(eps);
        w.values.push(if bd { ("U.bdl", ue.lower_banach_f64()) } else { ("U.dl", ue.lower_f64()) });
    };
    let sigma_clause = |i: usize, name: &'static str, val: f64| Witness {
        sigma: Some(stats.sigma[i]),
        values: vec![(name, val)],
        ..Witness::default()
    };
    let l_bd0_w = l_bd0.map(|i| sigma_clause(i, "L.bdl", stats.lower_sets[i].lower_banach_f64()));
    let l_d0_w = l_d0.map(|i| sigma_clause(i, "L.dl", stats.lower_sets[i].lower_f64()));
    let liminf_w = |w: &mut Witness| {
        if liminf_direct {
            w.values.push(("tail_min", tail_min));
        } else {
            w.epsilon = Some(eps);
            w.values.push(("U.bdl", ue.lower_banach_f64()));
        }
    };
    let limsup_w = |w: &mut Witness| match u_bdu {
        Some(i) => {
            w.sigma.get_or_insert(stats.sigma[i]);
            w.values.push(("U(sigma).bdu", stats.upper_at_sigma[i].upper_banach_f64()));
        }
        None => w.values.push(("gap_top_sup", gap_top_sup)),
    };
    let unb_w = |w: &mut Witness| w.values.push(("gap_top_sup", gap_top_sup));

    let both = |base: &Option<Witness>, cond: bool, bd: bool| {
        base.clone().filter(|_| cond).map(|mut w| {
            u_values(&mut w, bd);
            w
        })
    };
    put(Flag::Dc, both(&l_d0_w, u_d0, false));
    put(Flag::Rdc, both(&l_bd0_w, u_bd0, true));
    put(Flag::Rdc1, both(&l_bd0_w, u_d0, false));
    put(Flag::Rdc2, both(&l_d0_w, u_bd0, true));

    let with_liminf = |base: &Option<Witness>| {
        base.clone().filter(|_| liminf0).map(|mut w| {
            liminf_w(&mut w);
            w
        })
    };
    put(Flag::Mix1, with_liminf(&l_bd0_w));
    put(Flag::Mix2, with_liminf(&l_d0_w));

    let limsup_and = |cond: bool, bd: bool| {
        (limsup_plus && cond).then(|| {
            let mut w = Witness::default();
            limsup_w(&mut w);
            u_values(&mut w, bd);
            w
        })
    };
    put(Flag::Mix3, limsup_and(u_bd0, true));
    put(Flag::Mix4, limsup_and(u_d0, false));
    put(
        Flag::Ly,
        (liminf0 && limsup_plus).then(|| {
            let mut w = Witness::default();
            liminf_w(&mut w);
            limsup_w(&mut w);
            w
        }),
    );
    put(
        Flag::SLy,
        (unb && liminf0).then(|| {
            let mut w = Witness::default();
            unb_w(&mut w);
            liminf_w(&mut w);
            w
        }),
    );
    let unb_and = |cond: bool, bd: bool| {
        (unb && cond).then(|| {
            let mut w = Witness::default();
            unb_w(&mut w);
            u_values(&mut w, bd);
            w
        })
    };
    put(Flag::Ang1, unb_and(u_bd0, true));
    put(Flag::Ang2, unb_and(u_d0, false));

    let type2 = |idx: Option<usize>, name: &'static str, val: fn(&DensityProfile) -> f64, cond: bool, bd: bool| {
        idx.filter(|_| cond).map(|i| {
            let mut w = sigma_clause(i, name, val(&stats.upper_at_sigma[i]));
            u_values(&mut w, bd);
            w
        })
    };
    let t2 = [
        type2(u_bdu, "U(sigma).bdu", DensityProfile::upper_banach_f64, u_bd0, true),
        type2(u_bdu, "U(sigma).bdu", DensityProfile::upper_banach_f64, u_d0, false),
        type2(u_du, "U(sigma).du", DensityProfile::upper_f64, u_bd0, true),
        type2(u_du, "U(sigma).du", DensityProfile::upper_f64, u_d0, false),
    ];
    let families = [
        (Flag::Rdc02, Flag::R2h, Flag::R3, GAP_R),
        (Flag::Rdc12, Flag::R2h1, Flag::R31, GAP_1),
        (Flag::Rdc22, Flag::R2h2, Flag::R32, GAP_2),
        (Flag::Dc02, Flag::Dc2h, Flag::Dc3, GAP_DC),
    ];
    let via = |mut w: Witness, f: Flag| {
        w.via = Some(format!("type {}", f.name()));
        w
    };
    for (w2, (f2, fh, f3, gv)) in t2.into_iter().zip(families) {
        let wh = half_certificate(stats, gv, cfg.gamma).or_else(|| w2.clone().map(|w| via(w, f2)));
        let w3 = interval_certificate(stats, gv, cfg.gamma).or_else(|| wh.clone().map(|w| via(w, fh)));
        put(f2, w2);
        put(fh, wh);
        put(f3, w3);
    }

    ChaosVerdict {
        flags,
        witnesses,
        evidence: Evidence {
            tail_min,
            tail_max,
            gap_top_sup,
            u_bd0,
            u_d0,
            liminf0,
            limsup_plus,
            unb,
        },
        config: cfg.clone(),
    }
}

/// Directed edges `from → to` of the implication lattice.
pub fn implication_edges() -> Vec<(Flag, Flag)> {
    use Flag::*;
    let mut e = vec![
        (Dc, Rdc1),
        (Dc, Rdc2),
        (Dc, Rdc),
        (Dc, Mix1),
        (Dc, Mix2),
        (Dc, Mix3),
        (Dc, Mix4),
        (Dc, Ly),
        (Rdc1, Rdc),
        (Rdc1, Mix1),
        (Rdc1, Mix3),
        (Rdc1, Mix4),
        (Rdc1, Ly),
        (Rdc2, Rdc),
        (Rdc2, Mix1),
        (Rdc2, Mix2),
        (Rdc2, Mix3),
        (Rdc2, Ly),
        (Rdc, Mix1),
        (Rdc, Mix3),
        (Rdc, Ly),
        (Mix1, Ly),
        (Mix3, Ly),
        (Mix4, Ly),
        (Mix2, Mix1),
        (Mix2, Ly),
        (SLy, Ly),
        (Ang1, SLy),
        (Ang2, Ang1),
        (Ang2, SLy),
    ];
    let ladders = [
        [Rdc, Rdc02, R2h, R3],
        [Rdc1, Rdc12, R2h1, R31],
        [Rdc2, Rdc22, R2h2, R32],
        [Dc, Dc02, Dc2h, Dc3],
    ];
    for l in ladders {
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((l[i], l[j]));
            }
        }
    }
    for s in 1..4 {
        let [r, r1, r2, dc] = [ladders[0][s], ladders[1][s], ladders[2][s], ladders[3][s]];
        e.extend([(dc, r1), (dc, r2), (r1, r), (r2, r)]);
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub from: Flag,
    pub to: Flag,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

pub fn implication_check(v: &ChaosVerdict) -> Vec<Violation> {
    implication_edges()
        .into_iter()
        .filter(|&(a, b)| v.get(a) && !v.get(b))
        .map(|(from, to)| Violation { from, to })
        .collect()
}

/// Flags whose σ is an existential "there is σ > 0 for every pair".
pub const SCRAMBLED_FLAGS: [Flag; 4] = [Flag::Dc, Flag::Rdc, Flag::Rdc1, Flag::Rdc2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateFlag {
    pub flag: Flag,
    pub value: bool,
    /// Grid σ shared by every sampled pair.
    pub sigma: Option<f64>,
    /// Same σ also works for points on the line through the first two vectors.
    pub line_family: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    pub verdict: ChaosVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSetVerdict {
    pub pairs: Vec<PairVerdict>,
    pub aggregate: Vec<AggregateFlag>,
    /// Evidence on a finite sample only, never a proof of uncountability.
    pub sampled_only: bool,
}

impl SampleSetVerdict {
    pub fn aggregate(&self, f: Flag) -> Option<&AggregateFlag> {
        self.aggregate.iter().find(|a| a.flag == f)
    }
}

/// Per-pair σ-clause table for the scrambled flags.
#[derive(Clone)]
struct PairClauses {
    l_bd0: Vec<bool>,
    l_d0: Vec<bool>,
    u_bd0: bool,
    u_d0: bool,
}

impl PairClauses {
    fn new(stats: &DensityStats, cfg: &ChaosConfig) -> Self {
        let ue = &stats.upper_sets[0];
        PairClauses {
            l_bd0: stats.lower_sets.iter().map(|p| p.lower_banach_f64() <= cfg.theta0).collect(),
            l_d0: stats.lower_sets.iter().map(|p| p.lower_f64() <= cfg.theta0).collect(),
            u_bd0: ue.lower_banach_f64() <= cfg.theta0,
            u_d0: ue.lower_f64() <= cfg.theta0,
        }
    }

    fn holds(&self, f: Flag, i: usize) -> bool {
        match f {
            Flag::Dc => self.l_d0[i] && self.u_d0,
            Flag::Rdc => self.l_bd0[i] && self.u_bd0,
            Flag::Rdc1 => self.l_bd0[i] && self.u_d0,
            Flag::Rdc2 => self.l_d0[i] && self.u_bd0,
            _ => unreachable!("only scrambled flags carry a shared σ"),
        }
    }
}

fn shared_sigmas(clauses: &[PairClauses], f: Flag, grid: usize) -> Vec<usize> {
    (0..grid).filter(|&i| clauses.iter().all(|c| c.holds(f, i))).collect()
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Pairwise verdicts on a finite sample plus the shared-σ aggregate.
///
/// The line check samples `u + t(v − u)` for `t ∈ {−1, 1/2, 2}` through the
/// first two vectors and requires the same σ to work for all those pairs too.
pub fn classify_sample_set(
    seq: &OperatorSeq,
    metric: &Metric,
    policy: &SelectionPolicy,
    vectors: &[Vec<Complex64>],
    cfg: &ChaosConfig,
    seed: u64,
) -> Result<SampleSetVerdict, ClassifyError> {
    cfg.validate()?;
    if vectors.len() < 2 {
        return Err(ClassifyError::TooFewVectors);
    }
    for (i, j) in all_pairs(vectors.len()) {
        if vectors[i] == vectors[j] {
            return Err(ClassifyError::Duplicate(i, j));
        }
    }
    let n = cfg.density.horizon as usize;
    let run = |pts: &[Vec<Complex64>]| -> Result<Vec<(usize, usize, ChaosVerdict, PairClauses)>, ClassifyError> {
        all_pairs(pts.len())
            .into_par_iter()
            .map(|(i, j)| {
                let pair = generate_pair(seq, &pts[i], &pts[j], policy, metric, n, seed)?;
                let stats = density_stats(&pair.distances, cfg)?;
                let v = classify_stats(&stats, &pair.distances, &pair.gap_top, cfg);
                Ok((i, j, v, PairClauses::new(&stats, cfg)))
            })
            .collect()
    };
    let results = run(vectors)?;
    let clauses: Vec<PairClauses> = results.iter().map(|r| r.3.clone()).collect();

    let (u, v) = (&vectors[0], &vectors[1]);
    let mut line: Vec<Vec<Complex64>> = vec![u.clone(), v.clone()];
    for t in [-1.0, 0.5, 2.0] {
        line.push(u.iter().zip(v).map(|(a, b)| a + (b - a) * t).collect());
    }
    let line_clauses: Vec<PairClauses> = run(&line)?.into_iter().map(|r| r.3).collect();

    let grid = cfg.sigma_grid.len();
    let aggregate = SCRAMBLED_FLAGS
        .iter()
        .map(|&f| {
            let shared = shared_sigmas(&clauses, f, grid);
            let on_line = shared_sigmas(&line_clauses, f, grid);
            let first = shared.first().copied();
            AggregateFlag {
                flag: f,
                value: first.is_some(),
                sigma: first.map(|i| cfg.sigma_grid[i]),
                line_family: first.is_some_and(|i| on_line.contains(&i)),
            }
        })
        .collect();
    Ok(SampleSetVerdict {
        pairs: results.into_iter().map(|(i, j, verdict, _)| PairVerdict { i, j, verdict }).collect(),
        aggregate,
        sampled_only: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionReport {
    pub equal: bool,
    pub original: Vec<Flag>,
    pub restricted: Vec<Flag>,
}

/// Compares flags of the pair under the full sequence with flags under the
/// sequence whose domains are cut down to `span(basis)`.
pub fn restriction_check(
    seq: &OperatorSeq,
    metric: &Metric,
    policy: &SelectionPolicy,
    basis: &CMat,
    x: &[Complex64],
    y: &[Complex64],
    cfg: &ChaosConfig,
    seed: u64,
) -> Result<RestrictionReport, ClassifyError> {
    let n = cfg.density.horizon as usize;
    let restricted = generate_restricted_pair(seq, basis, x, y, policy, metric, n, seed)?;
    let original = generate_pair(seq, x, y, policy, metric, n, seed)?;
    let a = classify_pair(&original, cfg)?.true_flags();
    let b = classify_pair(&restricted, cfg)?.true_flags();
    Ok(RestrictionReport { equal: a == b, original: a, restricted: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::metric::real_point;

    fn cfg(n: u64) -> ChaosConfig {
        let mut cfg = ChaosConfig::default().with_horizon(n);
        cfg.density.window = (n / 20).max(1);
        cfg
    }

    #[test]
    fn stats_examples() {
        let cfg = cfg(10_000);
        let zeros = vec![0.0; 10_000];
        let s = density_stats(&zeros, &cfg).unwrap();
        for p in &s.lower_sets {
            assert_eq!(p.values(), [1.0; 4]);
        }
        let alt: Vec<f64> = (1..=10_000).map(|k| if k % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let s = density_stats(&alt, &cfg).unwrap();
        for v in s.lower_sets[0].values() {
            assert!((v - 0.5).abs() < 1e-3);
        }
        for (l, u) in s.lower_sets.iter().zip(&s.upper_at_sigma) {
            assert_eq!(l.lower + u.upper, 1.into());
            assert_eq!(l.lower_banach + u.upper_banach, 1.into());
        }
        assert!(matches!(density_stats(&alt[..10], &cfg), Err(ClassifyError::TooShort { .. })));
        let csv = s.to_csv();
        assert!(csv.starts_with("sigma,dl,du,bdl,bdu,side\n"));
        assert_eq!(csv.lines().count(), 33);
    }

    #[test]
    fn alternating_sequence_is_li_yorke_only() {
        let cfg = cfg(10_000);
        let d: Vec<f64> = (1..=10_000).map(|k| if k % 2 == 0 { 0.0 } else { 2.0 }).collect();
        let v = classify_sequences(&d, &d, &cfg).unwrap();
        assert!(v.get(Flag::Ly));
        assert!(!v.get(Flag::SLy) && !v.get(Flag::Rdc) && !v.get(Flag::Dc));
        assert!(implication_check(&v).is_empty());
        assert!(v.witness(Flag::Ly).is_some());
    }

    #[test]
    fn contraction_has_no_flags() {
        let cfg = cfg(10_000);
        let d: Vec<f64> = (1..=10_000).map(|k| 0.5f64.powi(k.min(1000))).collect();
        let v = classify_sequences(&d, &d, &cfg).unwrap();
        assert!(v.true_flags().is_empty(), "{:?}", v.true_flags());
    }

    #[test]
    fn injected_violations_are_named() {
        let cfg = cfg(1000);
        let d = vec![0.0; 1000];
        let mut v = classify_sequences(&d, &d, &cfg).unwrap();
        v.set(Flag::Dc, true);
        assert!(implication_check(&v).contains(&Violation { from: Flag::Dc, to: Flag::Ly }));
        let mut v = classify_sequences(&d, &d, &cfg).unwrap();
        v.set(Flag::Ang2, true);
        assert!(implication_check(&v).contains(&Violation { from: Flag::Ang2, to: Flag::Ang1 }));
    }

    #[test]
    fn flag_names_round_trip() {
        for f in Flag::ALL {
            assert_eq!(Flag::from_name(f.name()), Some(f));
        }
        assert_eq!(Flag::ALL.iter().map(|f| f.index()).collect::<Vec<_>>(), (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn sample_set_rejects_bad_input() {
        let seq = OperatorSeq::Powers(CMat::identity(1, 1));
        let m = Metric::euclidean();
        let one = vec![real_point(&[1.0])];
        let r = classify_sample_set(&seq, &m, &SelectionPolicy::Canonical, &one, &cfg(100), 0);
        assert_eq!(r.unwrap_err(), ClassifyError::TooFewVectors);
        let dup = vec![real_point(&[1.0]), real_point(&[2.0]), real_point(&[1.0])];
        let r = classify_sample_set(&seq, &m, &SelectionPolicy::Canonical, &dup, &cfg(100), 0);
        assert_eq!(r.unwrap_err(), ClassifyError::Duplicate(0, 2));
    }

    #[test]
    fn restriction_examples() {
        let seq = OperatorSeq::Powers(CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(2.0), c(0.5)])));
        let m = Metric::euclidean();
        let cfg = cfg(1000);
        let e1 = CMat::from_column_slice(2, 1, &[c(1.0), c(0.0)]);
        let e2 = CMat::from_column_slice(2, 1, &[c(0.0), c(1.0)]);
        let r = restriction_check(&seq, &m, &SelectionPolicy::Canonical, &e1, &real_point(&[1.0, 0.0]), &real_point(&[2.0, 0.0]), &cfg, 0).unwrap();
        assert!(r.equal);
        let r = restriction_check(&seq, &m, &SelectionPolicy::Canonical, &e2, &real_point(&[0.0, 1.0]), &real_point(&[0.0, 2.0]), &cfg, 0).unwrap();
        assert!(r.equal && r.original.is_empty(), "{r:?}");
        let whole = CMat::identity(2, 2);
        let r = restriction_check(&seq, &m, &SelectionPolicy::Canonical, &whole, &real_point(&[1.0, 3.0]), &real_point(&[2.0, 1.0]), &cfg, 0).unwrap();
        assert!(r.equal);
    }
}
