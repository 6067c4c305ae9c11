//! Seminorm families and the Fréchet metric
//! `d(x,y) = Σ_{n=1}^{M} 2^{-n} p_n(x−y) / (1 + p_n(x−y))`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vec<Complex64>;

pub const DEFAULT_TRUNCATION: u32 = 53;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("banach_norm distance needs a single-norm family, got {0}")]
    ModeMismatch(String),
    #[error("bad family spec `{0}`")]
    Spec(String),
    #[error("seminorm index must be >= 1")]
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Euclidean,
    Sup,
    P(f64),
}

impl NormKind {
    pub fn eval(&self, x: &[Complex64]) -> f64 {
        match *self {
            NormKind::Euclidean => x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            NormKind::Sup => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
            NormKind::P(p) => x.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// `w_i = 2^i`, `i` counted from 1.
    PowersOfTwo,
    Explicit(Vec<f64>),
}

impl Weights {
    fn get(&self, i: usize) -> f64 {
        match self {
            Weights::PowersOfTwo => 2f64.powi(i as i32 + 1),
            Weights::Explicit(w) => w.get(i).copied().unwrap_or_else(|| *w.last().unwrap_or(&1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeminormFamily {
    SingleNorm(NormKind),
    /// `p_n(x) = max_{i ≤ min(n,d)} |x_i|`
    CoordinateMax,
    /// `p_n(x) = max_{i ≤ min(n,d)} w_i |x_i|`
    Weighted(Weights),
}

impl SeminormFamily {
    pub fn weighted(w: Vec<f64>) -> Result<Self, MetricError> {
        let ok = w.iter().all(|v| v.is_finite() && *v > 0.0) && w.windows(2).all(|p| p[0] <= p[1]);
        if !ok || w.is_empty() {
            return Err(MetricError::Spec("weights must be positive and nondecreasing".into()));
        }
        Ok(SeminormFamily::Weighted(Weights::Explicit(w)))
    }

    /// `p_n(x)` for `n >= 1`.
    pub fn eval(&self, n: u32, x: &[Complex64]) -> Result<f64, MetricError> {
        if n == 0 {
            return Err(MetricError::Index);
        }
        Ok(match self {
            SeminormFamily::SingleNorm(k) => k.eval(x),
            SeminormFamily::CoordinateMax => {
                x.iter().take(n as usize).map(|z| z.norm()).fold(0.0, f64::max)
            }
            SeminormFamily::Weighted(w) => x
                .iter()
                .take(n as usize)
                .enumerate()
                .map(|(i, z)| w.get(i) * z.norm())
                .fold(0.0, f64::max),
        })
    }

    /// `p_1(x), ..., p_m(x)` in one pass.
    pub fn eval_all(&self, m: u32, x: &[Complex64]) -> Vec<f64> {
        match self {
            SeminormFamily::SingleNorm(k) => vec![k.eval(x); m as usize],
            _ => {
                let mut out = Vec::with_capacity(m as usize);
                let mut run = 0.0f64;
                for n in 0..m as usize {
                    if let Some(z) = x.get(n) {
                        let w = match self {
                            SeminormFamily::Weighted(w) => w.get(n),
                            _ => 1.0,
                        };
                        run = run.max(w * z.norm());
                    }
                    out.push(run);
                }
                out
            }
        }
    }
}

impl fmt::Display for SeminormFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeminormFamily::SingleNorm(NormKind::Euclidean) => write!(f, "norm:euclidean"),
            SeminormFamily::SingleNorm(NormKind::Sup) => write!(f, "norm:sup"),
            SeminormFamily::SingleNorm(NormKind::P(p)) => write!(f, "norm:{p}"),
            SeminormFamily::CoordinateMax => write!(f, "coordmax"),
            SeminormFamily::Weighted(Weights::PowersOfTwo) => write!(f, "weighted:2^i"),
            SeminormFamily::Weighted(Weights::Explicit(w)) => {
                let parts: Vec<String> = w.iter().map(|v| v.to_string()).collect();
                write!(f, "weighted:[{}]", parts.join(","))
            }
        }
    }
}

impl FromStr for SeminormFamily {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetricError::Spec(s.to_string());
        match s.trim() {
            "norm:euclidean" => Ok(SeminormFamily::SingleNorm(NormKind::Euclidean)),
            "norm:sup" => Ok(SeminormFamily::SingleNorm(NormKind::Sup)),
            "coordmax" => Ok(SeminormFamily::CoordinateMax),
            "weighted:2^i" => Ok(SeminormFamily::Weighted(Weights::PowersOfTwo)),
            other => {
                if let Some(p) = other.strip_prefix("norm:") {
                    let p: f64 = p.parse().map_err(|_| bad())?;
                    if !(p >= 1.0 && p.is_finite()) {
                        return Err(bad());
                    }
                    return Ok(SeminormFamily::SingleNorm(NormKind::P(p)));
                }
                if let Some(list) = other.strip_prefix("weighted:") {
                    let w: Vec<f64> = serde_json::from_str(list).map_err(|_| bad())?;
                    return SeminormFamily::weighted(w);
                }
                Err(bad())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    BanachNorm,
    Frechet,
}

/// A distance on `K^d`: either a norm distance or a truncated Fréchet sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub mode: MetricMode,
    pub family: SeminormFamily,
    pub truncation: u32,
}

impl Metric {
    pub fn new(mode: MetricMode, family: SeminormFamily, truncation: u32) -> Result<Self, MetricError> {
        if mode == MetricMode::BanachNorm && !matches!(family, SeminormFamily::SingleNorm(_)) {
            return Err(MetricError::ModeMismatch(family.to_string()));
        }
        if truncation == 0 {
            return Err(MetricError::Index);
        }
        Ok(Metric { mode, family, truncation })
    }

    pub fn euclidean() -> Self {
        Metric {
            mode: MetricMode::BanachNorm,
            family: SeminormFamily::SingleNorm(NormKind::Euclidean),
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn frechet(family: SeminormFamily) -> Self {
        Metric { mode: MetricMode::Frechet, family, truncation: DEFAULT_TRUNCATION }
    }

    pub fn distance(&self, x: &[Complex64], y: &[Complex64]) -> Result<f64, MetricError> {
        check_dims(x, y)?;
        let diff: Point = x.iter().zip(y).map(|(a, b)| a - b).collect();
        Ok(self.size(&diff))
    }

    /// Distance from `v` to the origin.
    pub fn size(&self, v: &[Complex64]) -> f64 {
        match self.mode {
            MetricMode::BanachNorm => match &self.family {
                SeminormFamily::SingleNorm(k) => k.eval(v),
                _ => unreachable!("validated in Metric::new"),
            },
            MetricMode::Frechet => frechet_sum(&self.family.eval_all(self.truncation, v)),
        }
    }

    /// `size(2^exp · v)`, saturating at `f64::MAX` instead of overflowing.
    pub fn size_scaled(&self, exp: i64, v: &[Complex64]) -> f64 {
        match self.mode {
            MetricMode::BanachNorm => match &self.family {
                SeminormFamily::SingleNorm(k) => ldexp_sat(k.eval(v), exp),
                _ => unreachable!("validated in Metric::new"),
            },
            MetricMode::Frechet => {
                let p: Vec<f64> =
                    self.family.eval_all(self.truncation, v).into_iter().map(|x| ldexp_sat(x, exp)).collect();
                frechet_sum(&p)
            }
        }
    }

    /// `top_seminorm(2^exp · v)`, saturating.
    pub fn top_seminorm_scaled(&self, exp: i64, v: &[Complex64]) -> f64 {
        ldexp_sat(self.top_seminorm(v), exp)
    }

    /// Index of the top seminorm: 1 for a single norm, otherwise `max(M, d)`.
    pub fn top_index(&self, dim: usize) -> u32 {
        match self.family {
            SeminormFamily::SingleNorm(_) => 1,
            _ => self.truncation.max(dim as u32),
        }
    }

    /// The seminorm used for unboundedness: the norm itself, or `p_M`.
    pub fn top_seminorm(&self, v: &[Complex64]) -> f64 {
        match &self.family {
            SeminormFamily::SingleNorm(k) => k.eval(v),
            fam => fam.eval(self.truncation.max(v.len() as u32), v).expect("index >= 1"),
        }
    }
}

/// `x · 2^e`, saturating at `f64::MAX` and flushing to zero far below the subnormals.
pub fn ldexp_sat(x: f64, e: i64) -> f64 {
    if x == 0.0 || e == 0 || !x.is_finite() {
        return if x.is_infinite() { f64::MAX } else { x };
    }
    if e > 2100 {
        return f64::MAX;
    }
    if e < -2200 {
        return 0.0;
    }
    let e1 = (e / 2) as i32;
    let e2 = (e - e / 2) as i32;
    let y = x * 2f64.powi(e1) * 2f64.powi(e2);
    if y.is_infinite() {
        f64::MAX
    } else {
        y
    }
}

fn check_dims(x: &[Complex64], y: &[Complex64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::Dimension(x.len(), y.len()));
    }
    Ok(())
}

fn frechet_sum(p: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut w = 1.0;
    for &v in p {
        w *= 0.5;
        if v.is_infinite() {
            sum += w;
        } else {
            sum += w * v / (1.0 + v);
        }
    }
    sum
}

/// Truncated Fréchet distance; the untruncated value differs by at most `2^{-M}`.
pub fn frechet_distance(
    family: &SeminormFamily,
    truncation: u32,
    x: &[Complex64],
    y: &[Complex64],
) -> Result<f64, MetricError> {
    check_dims(x, y)?;
    if truncation == 0 {
        return Err(MetricError::Index);
    }
    let diff: Point = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(frechet_sum(&family.eval_all(truncation, &diff)))
}

pub fn real_point(v: &[f64]) -> Point {
    v.iter().map(|&r| Complex64::new(r, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seminorm_examples() {
        let x = real_point(&[3.0, -4.0, 10.0]);
        assert_eq!(SeminormFamily::CoordinateMax.eval(2, &x).unwrap(), 4.0);
        let w = SeminormFamily::Weighted(Weights::PowersOfTwo);
        assert_eq!(w.eval(3, &real_point(&[1.0, 1.0, 1.0])).unwrap(), 8.0);
        for f in [SeminormFamily::CoordinateMax, w.clone(), "norm:sup".parse().unwrap()] {
            assert_eq!(f.eval(5, &real_point(&[0.0, 0.0])).unwrap(), 0.0);
        }
        assert_eq!(w.eval(0, &x), Err(MetricError::Index));
    }

    #[test]
    fn frechet_examples() {
        let abs = SeminormFamily::SingleNorm(NormKind::Euclidean);
        let d = frechet_distance(&abs, 1, &real_point(&[1.0]), &real_point(&[0.0])).unwrap();
        assert_eq!(d, 0.25);
        let x = real_point(&[1.0, 0.0]);
        let d = frechet_distance(&SeminormFamily::CoordinateMax, 30, &x, &real_point(&[0.0, 0.0])).unwrap();
        assert!((d - 0.5 * (1.0 - 2f64.powi(-30))).abs() < 1e-15);
        assert_eq!(frechet_distance(&abs, 53, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let e = Metric::euclidean();
        assert_eq!(e.distance(&real_point(&[3.0, 4.0]), &real_point(&[0.0, 0.0])).unwrap(), 5.0);
        let sup = Metric::new(MetricMode::BanachNorm, "norm:sup".parse().unwrap(), 53).unwrap();
        assert_eq!(sup.distance(&real_point(&[1.0, -2.0]), &real_point(&[1.0, 1.0])).unwrap(), 3.0);
        let f = Metric::frechet(SeminormFamily::CoordinateMax);
        let x = real_point(&[1.5, 2.0]);
        assert_eq!(f.distance(&x, &x).unwrap(), 0.0);
        assert!(Metric::new(MetricMode::BanachNorm, SeminormFamily::CoordinateMax, 53).is_err());
        assert!(Metric::new(MetricMode::Frechet, "norm:euclidean".parse().unwrap(), 53).is_ok());
        assert_eq!(e.distance(&x, &real_point(&[1.0])), Err(MetricError::Dimension(2, 1)));
    }

    #[test]
    fn family_specs_roundtrip() {
        for s in ["norm:euclidean", "norm:sup", "coordmax", "weighted:2^i", "norm:3", "weighted:[1,2,5]"] {
            let f: SeminormFamily = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("norm:0.5".parse::<SeminormFamily>().is_err());
        assert!("weighted:[3,1]".parse::<SeminormFamily>().is_err());
        assert!("chebyshev".parse::<SeminormFamily>().is_err());
    }

    #[test]
    fn saturating_scale() {
        assert_eq!(ldexp_sat(1.5, 3), 12.0);
        assert_eq!(ldexp_sat(1.0, 5000), f64::MAX);
        assert_eq!(ldexp_sat(1.0, -5000), 0.0);
        assert_eq!(ldexp_sat(1.0, 1500) , f64::MAX);
        assert_eq!(ldexp_sat(3.0, -1030), 3.0 * 2f64.powi(-1030));
        let m = Metric::frechet(SeminormFamily::CoordinateMax);
        assert_eq!(m.size_scaled(4000, &real_point(&[1.0])), 1.0 - 2f64.powi(-53));
    }

    #[test]
    fn families_increase() {
        let x = real_point(&[0.5, -3.0, 2.0, 7.0]);
        for f in [SeminormFamily::CoordinateMax, SeminormFamily::Weighted(Weights::PowersOfTwo)] {
            let p = f.eval_all(8, &x);
            assert!(p.windows(2).all(|w| w[0] <= w[1]));
            for (n, v) in p.iter().enumerate() {
                assert_eq!(*v, f.eval(n as u32 + 1, &x).unwrap());
            }
        }
    }
}
