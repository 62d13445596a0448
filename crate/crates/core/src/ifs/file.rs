//! JSON model description.
//!
//! ```json
//! { "dim": 1, "ambient": [[0, 1]], "kind": "finite",
//!   "maps": [ { "ratio": {"num": 1, "den": 3}, "orientation": 1, "translation": [0] },
//!             { "ratio": {"num": 1, "den": 3}, "orientation": 1, "translation": [{"num": 2, "den": 3}] } ],
//!   "probs": [ {"num": 1, "den": 2}, {"num": 1, "den": 2} ] }
//!
//! { "dim": 1, "ambient": [[0, 1]], "kind": "geometric",
//!   "params": { "a": 0.5, "b": {"num": 1, "den": 3}, "c": 1 } }
//! ```
//!
//! Every scalar is either a JSON number or an exact rational `{num, den}`.
//! Rationals survive a parse/serialize cycle unchanged. Maps in dimension
//! k >= 2 give an `orthogonal` row-major matrix instead of `orientation`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::map::{Interval, SimilarityMap};
use super::model::{Family, IfsModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Rational { num: i64, den: i64 },
    Float(f64),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match *self {
            Scalar::Float(v) => Ok(v),
            Scalar::Rational { num, den } => {
                if den == 0 {
                    return Err(Error::ModelFile("rational with zero denominator".into()));
                }
                Ok(num as f64 / den as f64)
            }
        }
    }

    fn ratio(&self) -> Option<Ratio<i128>> {
        match *self {
            Scalar::Rational { num, den } if den != 0 => Some(Ratio::new(num as i128, den as i128)),
            _ => None,
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub ratio: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Vec<Vec<Scalar>>>,
    pub translation: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head: Vec<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Finite,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    pub ambient: Vec<[Scalar; 2]>,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<MapSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GeometricParams>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn build(&self) -> Result<IfsModel> {
        if self.ambient.len() != self.dim {
            return Err(Error::ModelFile(format!("ambient has {} intervals for dim {}", self.ambient.len(), self.dim)));
        }
        let ambient = self
            .ambient
            .iter()
            .map(|[lo, hi]| {
                let (lo, hi) = (lo.value()?, hi.value()?);
                if !(lo < hi) {
                    return Err(Error::ModelFile(format!("empty ambient interval [{lo}, {hi}]")));
                }
                Ok(Interval::new(lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        match self.kind {
            ModelKind::Finite => {
                let maps = self.maps.as_ref().ok_or_else(|| Error::ModelFile("finite model needs `maps`".into()))?;
                let probs = self.probs.as_ref().ok_or_else(|| Error::ModelFile("finite model needs `probs`".into()))?;
                check_rational_sum(probs)?;
                let maps = maps
                    .iter()
                    .enumerate()
                    .map(|(i, m)| build_map(m, self.dim).map_err(|e| reindex(e, i + 1)))
                    .collect::<Result<Vec<_>>>()?;
                let probs = probs.iter().map(Scalar::value).collect::<Result<Vec<_>>>()?;
                IfsModel::finite(ambient, maps, probs)
            }
            ModelKind::Geometric => {
                if self.dim != 1 || ambient[0] != Interval::unit() {
                    return Err(Error::ModelFile("geometric families live on [0, 1]".into()));
                }
                let p = self.params.as_ref().ok_or_else(|| Error::ModelFile("geometric model needs `params`".into()))?;
                let head = p.head.iter().map(Scalar::value).collect::<Result<Vec<_>>>()?;
                IfsModel::geometric(p.a.value()?, p.b.value()?, p.c.value()?, head)
            }
        }
    }

    /// Describes a model with plain floating-point scalars.
    pub fn describe(model: &IfsModel) -> ModelFile {
        let ambient = model.ambient().iter().map(|i| [Scalar::Float(i.lo), Scalar::Float(i.hi)]).collect();
        match model.family() {
            Family::ExplicitFinite(f) => {
                let k = model.dim();
                let maps = f
                    .maps()
                    .iter()
                    .map(|m| MapSpec {
                        ratio: m.ratio().into(),
                        orientation: (k == 1).then(|| m.orthogonal()[0].into()),
                        orthogonal: (k > 1).then(|| {
                            m.orthogonal().chunks(k).map(|row| row.iter().map(|v| Scalar::Float(*v)).collect()).collect()
                        }),
                        translation: m.translation().iter().map(|v| Scalar::Float(*v)).collect(),
                    })
                    .collect();
                ModelFile {
                    dim: k,
                    ambient,
                    kind: ModelKind::Finite,
                    maps: Some(maps),
                    probs: Some(f.probs().iter().map(|p| Scalar::Float(*p)).collect()),
                    params: None,
                }
            }
            Family::Geometric(g) => ModelFile {
                dim: 1,
                ambient,
                kind: ModelKind::Geometric,
                maps: None,
                probs: None,
                params: Some(GeometricParams {
                    a: g.a().into(),
                    b: g.b().into(),
                    c: g.c().into(),
                    head: g.head().iter().map(|q| Scalar::Float(*q)).collect(),
                }),
            },
        }
    }
}

fn build_map(m: &MapSpec, dim: usize) -> Result<SimilarityMap> {
    if m.translation.len() != dim {
        return Err(Error::ModelFile(format!("translation has {} entries for dim {dim}", m.translation.len())));
    }
    let orthogonal = match (&m.orientation, &m.orthogonal) {
        (Some(o), None) if dim == 1 => vec![o.value()?],
        (None, Some(rows)) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::ModelFile("orthogonal matrix has the wrong shape".into()));
            }
            rows.iter().flatten().map(Scalar::value).collect::<Result<Vec<_>>>()?
        }
        (None, None) if dim == 1 => vec![1.0],
        _ => return Err(Error::ModelFile("give `orientation` (1-D) or `orthogonal`, not both".into())),
    };
    let translation = m.translation.iter().map(Scalar::value).collect::<Result<Vec<_>>>()?;
    SimilarityMap::new(m.ratio.value()?, orthogonal, translation)
}

fn reindex(e: Error, index: usize) -> Error {
    match e {
        Error::NonContractive { ratio, .. } => Error::NonContractive { index, ratio },
        Error::NotOrthogonal { defect, .. } => Error::NotOrthogonal { index, defect },
        other => other,
    }
}

/// When every probability is rational the sum-to-one check is done exactly.
fn check_rational_sum(probs: &[Scalar]) -> Result<()> {
    let exact: Option<Vec<Ratio<i128>>> = probs.iter().map(Scalar::ratio).collect();
    if let Some(rs) = exact {
        let total: Ratio<i128> = rs.iter().sum();
        if total != Ratio::from_integer(1) {
            return Err(Error::BadProbabilities(format!("rational probabilities sum to {total}")));
        }
    }
    Ok(())
}
