//! Built-in problem families: the twisted-cubic hyperplane family and the
//! calibrated 5-point / radially distorted 6-point relative pose systems.

pub mod fixtures;
mod vision;

pub use vision::{
    five_point, five_point_family, six_point, six_point_family, synth_instance, Correspondences,
    PointPair, SyntheticInstance,
};

use std::fmt;
use std::str::FromStr;

use crate::linalg::C64;
use crate::polysys::{ParamPolySystem, Poly, VarGroup, VarStructure};

/// Slot-indexed polynomial construction for a fixed layout.
pub(crate) struct Builder {
    nvars: usize,
    width: usize,
}

impl Builder {
    pub(crate) fn new(structure: &VarStructure) -> Self {
        Self { nvars: structure.num_vars(), width: structure.width() }
    }

    pub(crate) fn x(&self, i: usize) -> Poly {
        Poly::var(self.width, i)
    }

    pub(crate) fn p(&self, k: usize) -> Poly {
        Poly::var(self.width, self.nvars + k)
    }

    pub(crate) fn c(&self, re: f64) -> Poly {
        Poly::constant(self.width, C64::new(re, 0.0))
    }
}

/// `x2 + p1 x0 + p2 x1 + p3 x3` intersected with the twisted cubic on `P^3`.
pub fn twisted_cubic_family() -> ParamPolySystem {
    let s = VarStructure::new(vec![VarGroup::projective(4)], 3).unwrap();
    let b = Builder::new(&s);
    let x = |i| b.x(i);
    let polys = vec![
        &(&x(0) * &x(2)) - &(&x(1) * &x(1)),
        &(&x(1) * &x(2)) - &(&x(0) * &x(3)),
        &(&x(1) * &x(3)) - &(&x(2) * &x(2)),
        &(&(&x(2) + &(&b.p(0) * &x(0))) + &(&b.p(1) * &x(1))) + &(&b.p(2) * &x(3)),
    ];
    ParamPolySystem::new(s, polys).unwrap()
}

/// Selector for the built-in problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    TwistedCubic,
    FivePoint,
    SixPoint,
}

impl ProblemKind {
    pub fn family(self) -> ParamPolySystem {
        match self {
            ProblemKind::TwistedCubic => twisted_cubic_family(),
            ProblemKind::FivePoint => five_point_family(),
            ProblemKind::SixPoint => six_point_family(),
        }
    }

    /// Generic number of nonsingular isolated solutions.
    pub fn expected_roots(self) -> usize {
        match self {
            ProblemKind::TwistedCubic => 3,
            ProblemKind::FivePoint => 10,
            ProblemKind::SixPoint => 52,
        }
    }

    pub fn correspondence_count(self) -> Option<usize> {
        match self {
            ProblemKind::TwistedCubic => None,
            ProblemKind::FivePoint => Some(5),
            ProblemKind::SixPoint => Some(6),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::TwistedCubic => "twisted-cubic",
            ProblemKind::FivePoint => "five-point",
            ProblemKind::SixPoint => "six-point",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "twisted-cubic" => Ok(ProblemKind::TwistedCubic),
            "five-point" => Ok(ProblemKind::FivePoint),
            "six-point" => Ok(ProblemKind::SixPoint),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;

    #[test]
    fn family_at_unit_parameters_is_the_fixture() {
        let f = twisted_cubic_family();
        let ones = CVector::from_element(3, C64::new(1.0, 0.0));
        assert_eq!(f.substitute_params(&ones).unwrap(), fixtures::twisted_cubic());
        for pt in fixtures::twisted_cubic_points() {
            assert!(f.evaluate(&pt, &ones).unwrap().norm() < 1e-15);
        }
        assert_eq!(f.homogeneity(), vec![vec![Some(2)], vec![Some(2)], vec![Some(2)], vec![Some(1)]]);
    }
}
