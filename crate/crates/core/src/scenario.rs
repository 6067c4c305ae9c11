//! JSON scenario files: operator sequence, metric, sample vectors, policy, config.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ChaosConfig;
use crate::linalg::{CMat, CVec};
use crate::metric::{Metric, MetricMode, SeminormFamily, DEFAULT_TRUNCATION};
use crate::natset::parse_set;
use crate::orbits::{CoefRule, Gate, OperatorSeq, SelectionPolicy};
use crate::relations::{LinearRelation, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(String),
    #[error("scenario: {0}")]
    Spec(String),
}

fn spec_err(m: impl Into<String>) -> ScenarioError {
    ScenarioError::Spec(m.into())
}

/// A real number or a complex `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Real(f64),
    Complex([f64; 2]),
}

impl Num {
    pub fn value(self) -> Complex64 {
        match self {
            Num::Real(r) => Complex64::new(r, 0.0),
            Num::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.im == 0.0 {
            Num::Real(z.re)
        } else {
            Num::Complex([z.re, z.im])
        }
    }
}

/// Row-major matrix.
pub type MatrixSpec = Vec<Vec<Num>>;

pub fn matrix_from_rows(rows: &MatrixSpec) -> Result<CMat, ScenarioError> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(spec_err("matrix rows must be nonempty and of equal length"));
    }
    Ok(CMat::from_fn(m, n, |i, j| rows[i][j].value()))
}

pub fn matrix_to_rows(m: &CMat) -> MatrixSpec {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Num::from_complex(m[(i, j)])).collect()).collect()
}

fn columns_to_matrix(cols: &[Vec<Num>], rows: usize) -> Result<CMat, ScenarioError> {
    if cols.iter().any(|c| c.len() != rows) {
        return Err(spec_err(format!("every column needs {rows} entries")));
    }
    Ok(CMat::from_fn(rows, cols.len(), |i, j| cols[j][i].value()))
}

pub fn vector(v: &[Num]) -> Vec<Complex64> {
    v.iter().map(|z| z.value()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBasisSpec {
    pub x_cols: Vec<Vec<Num>>,
    pub y_cols: Vec<Vec<Num>>,
}

/// `"matrix:[[...]]"`, `"graph_basis:{x_cols:[[...]], y_cols:[[...]]}"`, or the same as JSON objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelationSpec {
    Text(String),
    Matrix { matrix: MatrixSpec },
    GraphBasis { graph_basis: GraphBasisSpec },
}

impl RelationSpec {
    pub fn build(&self) -> Result<LinearRelation, ScenarioError> {
        match self {
            RelationSpec::Text(s) => {
                let s = s.trim();
                if let Some(rest) = s.strip_prefix("matrix:") {
                    let m: MatrixSpec = serde_json::from_str(rest).map_err(|e| spec_err(format!("matrix: {e}")))?;
                    RelationSpec::Matrix { matrix: m }.build()
                } else if let Some(rest) = s.strip_prefix("graph_basis:") {
                    let quoted = rest
                        .replace("\"x_cols\"", "x_cols")
                        .replace("\"y_cols\"", "y_cols")
                        .replace("x_cols", "\"x_cols\"")
                        .replace("y_cols", "\"y_cols\"");
                    let g: GraphBasisSpec =
                        serde_json::from_str(&quoted).map_err(|e| spec_err(format!("graph_basis: {e}")))?;
                    RelationSpec::GraphBasis { graph_basis: g }.build()
                } else {
                    Err(spec_err(format!("unknown relation spec `{s}`")))
                }
            }
            RelationSpec::Matrix { matrix } => {
                let m = matrix_from_rows(matrix)?;
                if m.nrows() > MAX_DIM || m.ncols() > MAX_DIM {
                    return Err(spec_err("matrix exceeds the dimension cap"));
                }
                Ok(LinearRelation::from_matrix(&m))
            }
            RelationSpec::GraphBasis { graph_basis: g } => {
                let dx = g.x_cols.first().map_or(0, |c| c.len());
                let dy = g.y_cols.first().map_or(0, |c| c.len());
                if g.x_cols.len() != g.y_cols.len() {
                    return Err(spec_err("x_cols and y_cols must have the same count"));
                }
                let x = columns_to_matrix(&g.x_cols, dx)?;
                let y = columns_to_matrix(&g.y_cols, dy)?;
                LinearRelation::from_parts(&x, &y).map_err(|e| spec_err(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefSpec {
    Const(Num),
    Linear(Num),
    Geometric(Num),
}

impl CoefSpec {
    fn build(&self) -> CoefRule {
        match self {
            CoefSpec::Const(c) => CoefRule::Const(c.value()),
            CoefSpec::Linear(a) => CoefRule::Linear(a.value()),
            CoefSpec::Geometric(r) => CoefRule::Geometric(r.value()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub set: String,
    pub coef: CoefSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Powers { matrix: MatrixSpec },
    ScalarGated { dim: usize, gates: Vec<GateSpec>, default: CoefSpec },
    Alternating { matrices: Vec<MatrixSpec> },
    RelationPowers { relation: RelationSpec },
    ExplicitRelSeq { relations: Vec<RelationSpec> },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<OperatorSeq, ScenarioError> {
        let seq = match self {
            OperatorSpec::Powers { matrix } => OperatorSeq::Powers(matrix_from_rows(matrix)?),
            OperatorSpec::ScalarGated { dim, gates, default } => {
                if *dim == 0 || *dim > MAX_DIM {
                    return Err(spec_err("dim must lie in 1..=64"));
                }
                let gates = gates
                    .iter()
                    .map(|g| {
                        let set = parse_set(&g.set).map_err(|e| spec_err(format!("gate set: {e}")))?;
                        Ok(Gate { set, coef: g.coef.build() })
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                OperatorSeq::ScalarGated { dim: *dim, gates, default: default.build() }
            }
            OperatorSpec::Alternating { matrices } => {
                OperatorSeq::Alternating(matrices.iter().map(matrix_from_rows).collect::<Result<_, _>>()?)
            }
            OperatorSpec::RelationPowers { relation } => OperatorSeq::RelationPowers(relation.build()?),
            OperatorSpec::ExplicitRelSeq { relations } => {
                OperatorSeq::ExplicitRelSeq(relations.iter().map(RelationSpec::build).collect::<Result<_, _>>()?)
            }
        };
        let d = seq.dim().map_err(|e| spec_err(e.to_string()))?;
        if d > MAX_DIM {
            return Err(spec_err("dimension exceeds the cap"));
        }
        Ok(seq)
    }
}

/// A family string (norm families give a norm distance, others the Fréchet
/// metric), or an explicit `{mode, family, truncation}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Family(String),
    Full {
        mode: MetricMode,
        family: String,
        #[serde(default = "default_truncation")]
        truncation: u32,
    },
}

fn default_truncation() -> u32 {
    DEFAULT_TRUNCATION
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Family("norm:euclidean".into())
    }
}

impl MetricSpec {
    pub fn build(&self) -> Result<Metric, ScenarioError> {
        let (mode, family, trunc) = match self {
            MetricSpec::Family(f) => {
                let fam: SeminormFamily = f.parse().map_err(|e: crate::metric::MetricError| spec_err(e.to_string()))?;
                let mode = if matches!(fam, SeminormFamily::SingleNorm(_)) {
                    MetricMode::BanachNorm
                } else {
                    MetricMode::Frechet
                };
                (mode, fam, DEFAULT_TRUNCATION)
            }
            MetricSpec::Full { mode, family, truncation } => {
                let fam = family.parse().map_err(|e: crate::metric::MetricError| spec_err(e.to_string()))?;
                (*mode, fam, *truncation)
            }
        };
        Metric::new(mode, family, trunc).map_err(|e| spec_err(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    #[default]
    Canonical,
    Offset(Vec<Num>),
    MaximizeGap {
        #[serde(default = "default_budget")]
        budget: usize,
    },
}

fn default_budget() -> usize {
    64
}

impl PolicySpec {
    pub fn build(&self) -> SelectionPolicy {
        match self {
            PolicySpec::Canonical => SelectionPolicy::Canonical,
            PolicySpec::Offset(v) => SelectionPolicy::Offset(vector(v)),
            PolicySpec::MaximizeGap { budget } => SelectionPolicy::MaximizeGap { budget: *budget },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub operator: OperatorSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<Num>>>,
    /// Columns spanning a candidate manifold; samples are drawn from their span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold_basis: Option<Vec<Vec<Num>>>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub config: ChaosConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A scenario with every spec resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Built {
    pub seq: OperatorSeq,
    pub metric: Metric,
    pub policy: SelectionPolicy,
    pub vectors: Vec<Vec<Complex64>>,
    pub config: ChaosConfig,
    pub seed: u64,
}

/// Number of random combinations added to the basis columns of a manifold.
pub const MANIFOLD_EXTRA_SAMPLES: usize = 2;

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(s).map_err(|e| ScenarioError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn build(&self) -> Result<Built, ScenarioError> {
        let seq = self.operator.build()?;
        let d = seq.dim().map_err(|e| spec_err(e.to_string()))?;
        let metric = self.metric.build()?;
        self.config.validate().map_err(|e| spec_err(e.to_string()))?;
        let vectors = match (&self.vectors, &self.manifold_basis) {
            (Some(v), None) => v.iter().map(|x| vector(x)).collect::<Vec<_>>(),
            (None, Some(b)) => manifold_samples(&columns_to_matrix(b, d)?, self.seed),
            _ => return Err(spec_err("exactly one of `vectors` and `manifold_basis` is required")),
        };
        if vectors.is_empty() {
            return Err(spec_err("no sample vectors"));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(spec_err(format!("vector of length {} in a space of dimension {d}", v.len())));
        }
        if let PolicySpec::Offset(o) = &self.policy {
            if o.len() != d {
                return Err(spec_err("offset has the wrong dimension"));
            }
        }
        Ok(Built { seq, metric, policy: self.policy.build(), vectors, config: self.config.clone(), seed: self.seed })
    }
}

/// Basis columns plus seeded integer combinations of them.
pub fn manifold_samples(basis: &CMat, seed: u64) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = basis.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < basis.ncols() + MANIFOLD_EXTRA_SAMPLES && basis.ncols() > 0 {
        let t = CVec::from_iterator(basis.ncols(), (0..basis.ncols()).map(|_| Complex64::new(rng.random_range(-3i32..=3) as f64, 0.0)));
        let v: Vec<Complex64> = (basis * t).iter().copied().collect();
        if v.iter().any(|z| z.norm() > 0.0) && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
