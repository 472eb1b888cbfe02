//! JSON layouts for start sets, solution lists and problem instances.
//! Complex numbers are written as `[re, im]` pairs.

use serde::{Deserialize, Serialize};

use crate::engine::{SolveReport, StartSet};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::polysys::{VarGroup, VarStructure};
use crate::problems::{PointPair, ProblemKind, SyntheticInstance};

pub fn to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn from_pairs(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

fn parse<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Invalid(e.to_string()))
}

fn render<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSetFile {
    pub problem: Option<String>,
    pub groups: Vec<VarGroup>,
    pub p_star: Vec<[f64; 2]>,
    pub points: Vec<Vec<[f64; 2]>>,
    pub residuals: Vec<f64>,
}

impl StartSetFile {
    pub fn new(problem: Option<ProblemKind>, structure: &VarStructure, start: &StartSet) -> Self {
        Self {
            problem: problem.map(|p| p.name().to_string()),
            groups: structure.groups.clone(),
            p_star: to_pairs(&start.p_star),
            points: start.points.iter().map(to_pairs).collect(),
            residuals: start.residuals.clone(),
        }
    }

    /// Start set, checked against the structure it is meant for.
    pub fn to_start_set(&self, structure: &VarStructure) -> Result<StartSet> {
        if self.groups != structure.groups {
            return Err(Error::Invalid("start set was computed for a different variable structure".into()));
        }
        if self.p_star.len() != structure.param_count {
            return Err(Error::DimensionMismatch { expected: structure.param_count, got: self.p_star.len() });
        }
        let n = structure.num_vars();
        let points: Vec<CVector> = self.points.iter().map(|p| from_pairs(p)).collect();
        if let Some(bad) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        if self.residuals.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: self.residuals.len() });
        }
        Ok(StartSet { p_star: from_pairs(&self.p_star), points, residuals: self.residuals.clone() })
    }

    pub fn to_json(&self) -> String {
        render(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        parse(s)
    }
}

/// One reported solution, coordinates split by variable group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub coords: Vec<Vec<[f64; 2]>>,
    pub residual: f64,
    pub real: bool,
    pub path_id: usize,
}

pub fn solution_records(structure: &VarStructure, report: &SolveReport) -> Vec<SolutionRecord> {
    report
        .solutions
        .iter()
        .map(|s| SolutionRecord {
            coords: structure
                .group_ranges()
                .into_iter()
                .map(|r| to_pairs(&s.point.rows(r.start, r.len()).clone_owned()))
                .collect(),
            residual: s.residual,
            real: s.real,
            path_id: s.path_id,
        })
        .collect()
}

pub fn solutions_json(records: &[SolutionRecord]) -> String {
    render(&records)
}

pub fn solutions_from_json(s: &str) -> Result<Vec<SolutionRecord>> {
    parse(s)
}

/// Target of a solve: image correspondences or raw parameters, with an
/// optional known solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PointPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<[f64; 2]>>,
}

impl InstanceFile {
    pub fn from_synthetic(kind: ProblemKind, inst: &SyntheticInstance) -> Self {
        Self {
            problem: kind.name().to_string(),
            pairs: Some(inst.correspondences.pairs.clone()),
            params: None,
            ground_truth: Some(to_pairs(&inst.ground_truth())),
        }
    }

    pub fn kind(&self) -> Result<ProblemKind> {
        self.problem.parse().map_err(Error::Invalid)
    }

    /// Target parameters of the problem's family.
    pub fn target(&self) -> Result<CVector> {
        let kind = self.kind()?;
        match (&self.pairs, &self.params) {
            (Some(pairs), None) => {
                let expected = kind
                    .correspondence_count()
                    .ok_or_else(|| Error::Invalid(format!("{kind} takes parameters, not correspondences")))?;
                if pairs.len() != expected {
                    return Err(Error::CountMismatch { expected, got: pairs.len() });
                }
                let c = crate::problems::Correspondences { pairs: pairs.clone() };
                match kind {
                    ProblemKind::FivePoint => Ok(crate::problems::five_point(&c)?.1),
                    _ => Ok(crate::problems::six_point(&c)?.1),
                }
            }
            (None, Some(p)) => {
                let want = kind.family().param_count();
                if p.len() != want {
                    return Err(Error::DimensionMismatch { expected: want, got: p.len() });
                }
                let v = from_pairs(p);
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Invalid("non-finite parameter".into()));
                }
                Ok(v)
            }
            _ => Err(Error::Invalid("instance needs exactly one of `pairs` or `params`".into())),
        }
    }

    pub fn to_json(&self) -> String {
        render(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ab_initio, AbInitioConfig};
    use crate::problems::{synth_instance, twisted_cubic_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn start_set_round_trip() {
        let f = twisted_cubic_family();
        let ai = ab_initio(&f, &AbInitioConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let file = StartSetFile::new(Some(ProblemKind::TwistedCubic), f.structure(), &ai.start);
        let back = StartSetFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.to_start_set(f.structure()).unwrap(), ai.start);
        let other = crate::problems::five_point_family();
        assert!(back.to_start_set(other.structure()).is_err());
    }

    #[test]
    fn instance_round_trip_and_validation() {
        let inst = synth_instance(ProblemKind::FivePoint, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let file = InstanceFile::from_synthetic(ProblemKind::FivePoint, &inst);
        let back = InstanceFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.target().unwrap(), inst.correspondences.params());

        let mut short = back.clone();
        short.pairs.as_mut().unwrap().pop();
        assert_eq!(short.target(), Err(Error::CountMismatch { expected: 5, got: 4 }));
        let both = InstanceFile { params: Some(vec![[0.0, 0.0]; 3]), ..back };
        assert!(both.target().is_err());
        let raw = InstanceFile {
            problem: "twisted-cubic".into(),
            pairs: None,
            params: Some(vec![[-1.0, 0.0], [0.0, 0.1], [0.0, 0.0]]),
            ground_truth: None,
        };
        assert_eq!(raw.target().unwrap().len(), 3);
        assert!(InstanceFile::from_json("{\"problem\": 3}").is_err());
    }
}
