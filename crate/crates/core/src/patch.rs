//! Affine coordinate patches `v . x = v^H x = 1` for projective variable groups.
//!
//! A fixed patch is drawn once and kept; the orthogonal and coordinate-wise
//! patches are re-fitted to the current point after every accepted step.
//! Optionally the adaptive patch is rescaled by the factor minimizing
//! `kappa_inf_1` of the patched Jacobian.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::polysys::{Poly, VarStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatchKind {
    Fixed,
    Orthogonal,
    CoordinateWise,
}

impl PatchKind {
    pub fn label(self) -> &'static str {
        match self {
            PatchKind::Fixed => "FP",
            PatchKind::Orthogonal => "OP",
            PatchKind::CoordinateWise => "CWP",
        }
    }
}

impl FromStr for PatchKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(PatchKind::Fixed),
            "orthogonal" => Ok(PatchKind::Orthogonal),
            "coordwise" => Ok(PatchKind::CoordinateWise),
            other => Err(format!("unknown patch strategy '{other}'")),
        }
    }
}

impl fmt::Display for PatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchKind::Fixed => "fixed",
            PatchKind::Orthogonal => "orthogonal",
            PatchKind::CoordinateWise => "coordwise",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchStrategy {
    pub kind: PatchKind,
    pub optimal_scaling: bool,
}

impl PatchStrategy {
    pub fn new(kind: PatchKind) -> Self {
        Self { kind, optimal_scaling: false }
    }
}

/// Patch of one projective group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPatch {
    pub range: Range<usize>,
    pub v: CVector,
    /// Coordinate `j` of a coordinate-wise patch `v = lambda e_j`.
    pub chosen_coord: Option<usize>,
    /// Scaling `lambda > 0`; 1 unless optimal scaling is on.
    pub lambda: f64,
}

impl GroupPatch {
    /// `v^H x_g - 1`.
    pub fn residual(&self, x: &CVector) -> C64 {
        self.v.dotc(&x.rows(self.range.start, self.range.len()).clone_owned()) - C64::new(1.0, 0.0)
    }
}

/// Patches of all projective groups of a structure, in group order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchState {
    pub groups: Vec<GroupPatch>,
}

/// Random patch vector with unit-modulus entries.
pub fn init_fixed<R: Rng + ?Sized>(size: usize, rng: &mut R) -> CVector {
    CVector::from_fn(size, |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
}

/// Orthogonal patch through `x`: returns `(v, representative)` with
/// `v = x / ||x||` and the representative equal to `v`.
pub fn update_orthogonal(x: &CVector) -> Result<(CVector, CVector)> {
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let v = x / C64::new(norm, 0.0);
    Ok((v.clone(), v))
}

/// Coordinate-wise patch `x_j = 1` on the largest-modulus coordinate (lowest
/// index on ties): returns `(j, representative x / x_j)`.
pub fn update_coordwise(x: &CVector) -> Result<(usize, CVector)> {
    let mut j = 0;
    let mut best = -1.0;
    for (k, z) in x.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            j = k;
        }
    }
    if best <= 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut rep = x / x[j];
    rep[j] = C64::new(1.0, 0.0);
    Ok((j, rep))
}

/// Rule for the optimal scaling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRule {
    /// General patch `alpha`: uses `beta` from `M(1)^{-1} = [K beta]`.
    General,
    /// `alpha = z` with `||alpha||_2 = 1`, where `beta = alpha`.
    Orthogonal,
}

/// Result of [`optimal_scale`], with the norms that determine it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPatch {
    pub lambda: f64,
    pub v: CVector,
    pub point: CVector,
    pub norm_j: f64,
    pub norm_k: f64,
    pub norm_alpha: f64,
    pub norm_beta: f64,
}

/// `M(lambda) = [J; lambda^d alpha^H]`.
pub fn scaled_matrix(j: &CMatrix, alpha: &CVector, d: u32, lambda: f64) -> CMatrix {
    let (n, cols) = j.shape();
    let mut m = CMatrix::zeros(n + 1, cols);
    m.rows_mut(0, n).copy_from(j);
    let s = lambda.powi(d as i32);
    for c in 0..cols {
        m[(n, c)] = alpha[c].conj() * s;
    }
    m
}

/// Scaling `lambda` minimizing `kappa_inf_1(M(lambda))` for `M(lambda) = [J; lambda^d alpha^H]`,
/// with `J` the Jacobian of the group's degree-`d` polynomials at the on-patch
/// point `z` (`alpha . z = 1`). Returns the scaled patch `v = lambda alpha`
/// and point `z / lambda`.
///
/// `J` may have more rows than the group dimension; `[K beta]` is then the
/// pseudoinverse of `M(1)`, which is a left inverse scaling the same way.
pub fn optimal_scale(j: &CMatrix, alpha: &CVector, z: &CVector, d: u32, rule: ScaleRule) -> Result<ScaledPatch> {
    if d == 0 {
        return Err(Error::MixedDegrees);
    }
    if j.ncols() != alpha.len() || z.len() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: j.ncols() });
    }
    let m1 = scaled_matrix(j, alpha, d, 1.0);
    let inv = if m1.is_square() {
        linalg::inverse(&m1)?
    } else {
        linalg::pseudoinverse(&m1).map_err(|_| Error::Singular)?
    };
    let n = j.nrows();
    let k = inv.columns(0, n).clone_owned();
    let beta = inv.column(n).clone_owned();
    let norm_j = linalg::norm_inf(j);
    let norm_k = linalg::norm_1(&k);
    let norm_alpha = linalg::vec_norm_1(alpha);
    let norm_beta = match rule {
        ScaleRule::General => linalg::vec_norm_1(&beta),
        ScaleRule::Orthogonal => norm_alpha,
    };
    let lambda = ((norm_j * norm_beta) / (norm_k * norm_alpha)).powf(1.0 / (2.0 * d as f64));
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Singular);
    }
    Ok(ScaledPatch {
        lambda,
        v: alpha * C64::new(lambda, 0.0),
        point: z / C64::new(lambda, 0.0),
        norm_j,
        norm_k,
        norm_alpha,
        norm_beta,
    })
}

/// Common degree `d > 0` of all rows in a projective group, or `MixedDegrees`.
pub fn common_degree(degrees: impl IntoIterator<Item = Option<u32>>) -> Result<u32> {
    let mut common = None;
    for d in degrees {
        match (d, common) {
            (None, _) | (Some(0), _) => return Err(Error::MixedDegrees),
            (Some(d), None) => common = Some(d),
            (Some(d), Some(c)) if d != c => return Err(Error::MixedDegrees),
            _ => {}
        }
    }
    common.ok_or(Error::MixedDegrees)
}

impl PatchState {
    /// Fixed patches with random unit-modulus vectors.
    pub fn fixed<R: Rng + ?Sized>(structure: &VarStructure, rng: &mut R) -> Self {
        let vs = structure.projective_ranges().iter().map(|r| init_fixed(r.len(), rng)).collect();
        Self::from_vectors(structure, vs).expect("sizes match")
    }

    /// Patches with explicitly supplied vectors.
    pub fn from_vectors(structure: &VarStructure, vectors: Vec<CVector>) -> Result<Self> {
        let ranges = structure.projective_ranges();
        if ranges.len() != vectors.len() {
            return Err(Error::DimensionMismatch { expected: ranges.len(), got: vectors.len() });
        }
        let groups = ranges
            .into_iter()
            .zip(vectors)
            .map(|(range, v)| {
                if v.len() != range.len() {
                    return Err(Error::DimensionMismatch { expected: range.len(), got: v.len() });
                }
                if v.norm() == 0.0 {
                    return Err(Error::ZeroVector);
                }
                Ok(GroupPatch { range, v, chosen_coord: None, lambda: 1.0 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { groups })
    }

    /// Adaptive patches fitted to `x`; `x` is rescaled onto them in place.
    pub fn adaptive(structure: &VarStructure, kind: PatchKind, x: &mut CVector) -> Result<Self> {
        let groups = structure
            .projective_ranges()
            .into_iter()
            .map(|range| GroupPatch {
                v: CVector::zeros(range.len()),
                range,
                chosen_coord: None,
                lambda: 1.0,
            })
            .collect();
        let mut state = Self { groups };
        state.refit(kind, x)?;
        Ok(state)
    }

    /// Re-fits adaptive patches to `x` and moves `x` onto them. Fixed patches
    /// only rescale `x`.
    pub fn refit(&mut self, kind: PatchKind, x: &mut CVector) -> Result<()> {
        for g in &mut self.groups {
            let xg = x.rows(g.range.start, g.range.len()).clone_owned();
            let rep = match kind {
                PatchKind::Fixed => {
                    let s = g.v.dotc(&xg);
                    if s.norm() == 0.0 {
                        return Err(Error::ZeroVector);
                    }
                    &xg / s
                }
                PatchKind::Orthogonal => {
                    let (v, rep) = update_orthogonal(&xg)?;
                    g.v = v;
                    g.chosen_coord = None;
                    g.lambda = 1.0;
                    rep
                }
                PatchKind::CoordinateWise => {
                    let (j, rep) = update_coordwise(&xg)?;
                    let mut v = CVector::zeros(xg.len());
                    v[j] = C64::new(1.0, 0.0);
                    g.v = v;
                    g.chosen_coord = Some(j);
                    g.lambda = 1.0;
                    rep
                }
            };
            x.rows_mut(g.range.start, g.range.len()).copy_from(&rep);
        }
        Ok(())
    }

    /// Applies the optimal rescaling to group `index`, given the Jacobian of
    /// the group's polynomials (all of degree `d`) at the current on-patch point.
    pub fn rescale_group(&mut self, index: usize, kind: PatchKind, jac: &CMatrix, d: u32, x: &mut CVector) -> Result<()> {
        let g = &mut self.groups[index];
        let z = x.rows(g.range.start, g.range.len()).clone_owned();
        let rule = match kind {
            PatchKind::Orthogonal => ScaleRule::Orthogonal,
            _ => ScaleRule::General,
        };
        let scaled = optimal_scale(jac, &g.v, &z, d, rule)?;
        g.lambda = scaled.lambda;
        g.v = scaled.v;
        x.rows_mut(g.range.start, g.range.len()).copy_from(&scaled.point);
        Ok(())
    }

    /// Largest `|v^H x_g - 1|` over groups.
    pub fn residual(&self, x: &CVector) -> f64 {
        self.groups.iter().map(|g| g.residual(x).norm()).fold(0.0, f64::max)
    }

    /// `conj(v) . x_g - 1` per group as polynomials of the given slot width.
    pub fn patch_equations(&self, width: usize) -> Vec<Poly> {
        self.groups
            .iter()
            .map(|g| {
                let mut p = Poly::constant(width, C64::new(-1.0, 0.0));
                for (k, vk) in g.v.iter().enumerate() {
                    p = &p + &Poly::var(width, g.range.start + k).scale(vk.conj());
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::VarGroup;
    use crate::problems::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(v: &[f64]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&r| C64::new(r, 0.0)))
    }

    fn p3() -> VarStructure {
        VarStructure::new(vec![VarGroup::projective(4)], 0).unwrap()
    }

    #[test]
    fn fixed_patch_entries_are_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = init_fixed(6, &mut rng);
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let w = init_fixed(6, &mut ChaCha8Rng::seed_from_u64(2));
        assert!((v - w).norm() > 1e-3);
    }

    #[test]
    fn explicit_vector_is_kept_verbatim() {
        let v = fixtures::demo_fixed_patch();
        let st = PatchState::from_vectors(&p3(), vec![v.clone()]).unwrap();
        assert_eq!(st.groups[0].v, v);
        let eq = &st.patch_equations(4)[0];
        // (0.3509 + 0.1476i) x0 + ... is conj(v) . x
        let x = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(eq.eval_naive(&x), v[0].conj() - C64::new(1.0, 0.0));
    }

    #[test]
    fn orthogonal_update() {
        let x = real(&[1.0, -1.0, 1.0, -1.0]);
        let (v, rep) = update_orthogonal(&x).unwrap();
        assert_eq!(v, real(&[0.5, -0.5, 0.5, -0.5]));
        assert!((v.dotc(&rep) - C64::new(1.0, 0.0)).norm() < 1e-15);
        // a second point on the same patch differs by a vector orthogonal to v
        let y = &rep + real(&[0.1, 0.1, 0.0, 0.0]);
        assert!((y - &rep).dotc(&v).norm() < 1e-15);
        assert_eq!(update_orthogonal(&CVector::zeros(3)), Err(Error::ZeroVector));
    }

    #[test]
    fn coordwise_update_and_ties() {
        let (j, rep) = update_coordwise(&real(&[1.0, -1.0, 1.0, -1.0])).unwrap();
        assert_eq!(j, 0);
        assert_eq!(rep, real(&[1.0, -1.0, 1.0, -1.0]));
        let (j, _) = update_coordwise(&real(&[0.1, 5.0, 0.2])).unwrap();
        assert_eq!(j, 1);
        let x = CVector::from_vec(vec![C64::new(0.3, 0.4), C64::new(0.0, -2.0), C64::new(1.0, 1.0)]);
        let (j1, r1) = update_coordwise(&x).unwrap();
        let (j2, r2) = update_coordwise(&r1).unwrap();
        assert_eq!((j1, j2), (1, 1));
        assert!((r1 - r2).norm() < 1e-15);
        assert_eq!(update_coordwise(&CVector::zeros(2)), Err(Error::ZeroVector));
    }

    #[test]
    fn patch_equation_forms() {
        let st = PatchState::from_vectors(&p3(), vec![real(&[1.0, 0.0, 0.0, 0.0])]).unwrap();
        let e0 = &st.patch_equations(4)[0];
        let expected = &Poly::var(4, 0) - &Poly::constant(4, C64::new(1.0, 0.0));
        assert_eq!(e0, &expected);

        let mut x = real(&[1.0, -1.0, 1.0, -1.0]);
        let st = PatchState::adaptive(&p3(), PatchKind::Orthogonal, &mut x).unwrap();
        let e = &st.patch_equations(4)[0];
        let vals = [C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert!((e.eval_naive(&vals) - C64::new(0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn refit_keeps_projective_point() {
        let s = VarStructure::new(vec![VarGroup::projective(3), VarGroup::affine(1)], 0).unwrap();
        let orig = CVector::from_vec(vec![
            C64::new(0.2, 1.0),
            C64::new(-3.0, 0.5),
            C64::new(0.7, 0.0),
            C64::new(4.0, 1.0),
        ]);
        for kind in [PatchKind::Orthogonal, PatchKind::CoordinateWise] {
            let mut x = orig.clone();
            let st = PatchState::adaptive(&s, kind, &mut x).unwrap();
            assert!(st.residual(&x) <= 1e-14);
            assert!(s.distance(&x, &orig) < 1e-12);
            assert_eq!(x[3], orig[3]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = PatchState::fixed(&s, &mut rng);
        let mut x = orig.clone();
        st.refit(PatchKind::Fixed, &mut x).unwrap();
        assert!(st.residual(&x) <= 1e-14 * st.groups[0].v.norm() * x.norm());
    }

    #[test]
    fn optimal_scale_equal_norms_gives_one() {
        // J = [1 0], alpha = e1, z = (0, 1): M(1) = I, ||J|| ||beta|| = ||K|| ||alpha||
        let j = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let alpha = real(&[0.0, 1.0]);
        let s = optimal_scale(&j, &alpha, &alpha, 2, ScaleRule::General).unwrap();
        assert!((s.lambda - 1.0).abs() < 1e-15);
        assert_eq!(optimal_scale(&j, &alpha, &alpha, 0, ScaleRule::General), Err(Error::MixedDegrees));
    }

    #[test]
    fn common_degree_detects_mixing() {
        assert_eq!(common_degree([Some(2), Some(2)]), Ok(2));
        assert_eq!(common_degree([Some(3), Some(1)]), Err(Error::MixedDegrees));
        assert_eq!(common_degree([Some(2), None]), Err(Error::MixedDegrees));
    }
}
