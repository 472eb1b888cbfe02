use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::polysys::{ParamPolySystem, Poly, VarGroup, VarStructure};

use super::{Builder, ProblemKind};

const MAX_DRAWS: usize = 100;

/// Largest relative rotation angle between the two synthetic cameras (radians).
const MAX_ROTATION: f64 = 0.5;

/// Observation of one scene point: `x` in the first image, `y` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondences {
    pub pairs: Vec<PointPair>,
}

impl Correspondences {
    /// Parameter vector `(x_1, y_1, x_2, y_2, ...)`, two coordinates each.
    pub fn params(&self) -> CVector {
        let mut v = Vec::with_capacity(4 * self.pairs.len());
        for pp in &self.pairs {
            v.extend_from_slice(&[pp.x[0], pp.x[1], pp.y[0], pp.y[1]]);
        }
        CVector::from_iterator(v.len(), v.into_iter().map(|r| C64::new(r, 0.0)))
    }

    fn expect(&self, n: usize) -> Result<()> {
        if self.pairs.len() != n {
            return Err(Error::CountMismatch { expected: n, got: self.pairs.len() });
        }
        if self.pairs.iter().any(|pp| pp.x.iter().chain(&pp.y).any(|v| !v.is_finite())) {
            return Err(Error::Invalid("non-finite image coordinate".into()));
        }
        Ok(())
    }
}

/// Noise-free two-view instance with known relative pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub correspondences: Correspondences,
    /// Row-major rotation of the second camera.
    pub rotation: [[f64; 3]; 3],
    /// Unit translation of the second camera.
    pub translation: [f64; 3],
    /// `[t]_x R`, row-major.
    pub essential: [[f64; 3]; 3],
    pub scene: Vec<[f64; 3]>,
    /// Radial distortion of the division model (6-point only).
    pub distortion: Option<f64>,
}

impl SyntheticInstance {
    /// `E_0` flattened row-major, followed by the distortion when present.
    pub fn ground_truth(&self) -> CVector {
        let mut v: Vec<f64> = self.essential.iter().flatten().copied().collect();
        if let Some(l) = self.distortion {
            v.push(l);
        }
        CVector::from_iterator(v.len(), v.into_iter().map(|r| C64::new(r, 0.0)))
    }
}

/// `2 E E^T E - trace(E E^T) E` entries, with `E_ab` at variable `3a + b`.
fn demazure(b: &Builder) -> Vec<Poly> {
    let e: Vec<Vec<Poly>> = (0..3).map(|a| (0..3).map(|c| b.x(3 * a + c)).collect()).collect();
    let zero = b.c(0.0);
    let mut eet = vec![vec![zero.clone(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                eet[i][j] = &eet[i][j] + &(&e[i][k] * &e[j][k]);
            }
        }
    }
    let trace = &(&eet[0][0] + &eet[1][1]) + &eet[2][2];
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let mut eete = zero.clone();
            for k in 0..3 {
                eete = &eete + &(&eet[i][k] * &e[k][j]);
            }
            out.push(&eete.scale(C64::new(2.0, 0.0)) - &(&trace * &e[i][j]));
        }
    }
    out
}

/// `u^T E w` for polynomial 3-vectors `u`, `w`.
fn bilinear(b: &Builder, u: &[Poly; 3], w: &[Poly; 3]) -> Poly {
    let mut acc = b.c(0.0);
    for a in 0..3 {
        for c in 0..3 {
            acc = &acc + &(&(&u[a] * &b.x(3 * a + c)) * &w[c]);
        }
    }
    acc
}

/// Demazure cubics plus `y_i^T E x_i` (points lifted by a trailing 1) on `P^8`,
/// parameterized by the 20 image coordinates.
pub fn five_point_family() -> ParamPolySystem {
    let s = VarStructure::new(vec![VarGroup::projective(9)], 20).unwrap();
    let b = Builder::new(&s);
    let mut polys = demazure(&b);
    for i in 0..5 {
        let x = [b.p(4 * i), b.p(4 * i + 1), b.c(1.0)];
        let y = [b.p(4 * i + 2), b.p(4 * i + 3), b.c(1.0)];
        polys.push(bilinear(&b, &y, &x));
    }
    ParamPolySystem::new(s, polys).unwrap()
}

/// Demazure cubics plus the lifted constraints `p_i(l)^T E q_i(l)` with
/// `q_i(l) = (x_i, 1 + l |x_i|^2)`, on `P^8 x C` (the distortion `l` is the
/// affine variable), parameterized by the 24 image coordinates.
pub fn six_point_family() -> ParamPolySystem {
    let s = VarStructure::new(vec![VarGroup::projective(9), VarGroup::affine(1)], 24).unwrap();
    let b = Builder::new(&s);
    let lam = b.x(9);
    let mut polys = demazure(&b);
    for i in 0..6 {
        let lift = |k: usize| {
            let sq = &(&b.p(k) * &b.p(k)) + &(&b.p(k + 1) * &b.p(k + 1));
            &b.c(1.0) + &(&lam * &sq)
        };
        let q = [b.p(4 * i), b.p(4 * i + 1), lift(4 * i)];
        let p = [b.p(4 * i + 2), b.p(4 * i + 3), lift(4 * i + 2)];
        polys.push(bilinear(&b, &p, &q));
    }
    ParamPolySystem::new(s, polys).unwrap()
}

/// The 5-point family and the parameter vector of `c`.
pub fn five_point(c: &Correspondences) -> Result<(ParamPolySystem, CVector)> {
    c.expect(5)?;
    Ok((five_point_family(), c.params()))
}

/// The 6-point family and the parameter vector of `c`.
pub fn six_point(c: &Correspondences) -> Result<(ParamPolySystem, CVector)> {
    c.expect(6)?;
    Ok((six_point_family(), c.params()))
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Distorted radius preimage of an undistorted point under the division
/// model `u = x_d / (1 + l |x_d|^2)`.
fn distort(u: [f64; 2], lambda: f64) -> [f64; 2] {
    let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if lambda == 0.0 || ru == 0.0 {
        return u;
    }
    // l ru rd^2 - rd + ru = 0, branch continuous at l = 0
    let rd = 2.0 * ru / (1.0 + (1.0 - 4.0 * lambda * ru * ru).sqrt());
    [u[0] * rd / ru, u[1] * rd / ru]
}

/// Random noise-free instance with ground truth for the 5- or 6-point problem.
pub fn synth_instance<R: Rng + ?Sized>(kind: ProblemKind, rng: &mut R) -> Result<SyntheticInstance> {
    let n = kind
        .correspondence_count()
        .ok_or_else(|| Error::Invalid(format!("{kind} has no image correspondences")))?;
    for _ in 0..MAX_DRAWS {
        let axis = Unit::new_normalize(gaussian3(rng));
        let rot = UnitQuaternion::from_axis_angle(&axis, rng.random_range(0.0..MAX_ROTATION));
        let r: Matrix3<f64> = rot.to_rotation_matrix().into_inner();
        let t = gaussian3(rng).normalize();

        let mut scene = Vec::with_capacity(n);
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let mut found = None;
            for _ in 0..50 {
                let depth = rng.random_range(3.0..8.0);
                let u = [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)];
                let p1 = Vector3::new(u[0] * depth, u[1] * depth, depth);
                let p2 = r * p1 + t;
                if p2.z > 0.5 && (p2.x / p2.z).abs() <= 1.2 && (p2.y / p2.z).abs() <= 1.2 {
                    found = Some((p1, p2));
                    break;
                }
            }
            let Some((p1, p2)) = found else { break };
            scene.push([p1.x, p1.y, p1.z]);
            pairs.push(([p1.x / p1.z, p1.y / p1.z], [p2.x / p2.z, p2.y / p2.z]));
        }
        if pairs.len() < n || coplanar(&scene) {
            continue;
        }

        let distortion = (kind == ProblemKind::SixPoint).then(|| rng.random_range(-0.5..0.0));
        let lam = distortion.unwrap_or(0.0);
        let pairs = pairs
            .into_iter()
            .map(|(x, y)| PointPair { x: distort(x, lam), y: distort(y, lam) })
            .collect();

        let tx = Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0);
        let e = tx * r;
        let rows = |m: &Matrix3<f64>| std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        return Ok(SyntheticInstance {
            correspondences: Correspondences { pairs },
            rotation: rows(&r),
            translation: [t.x, t.y, t.z],
            essential: rows(&e),
            scene,
            distortion,
        });
    }
    Err(Error::Degenerate(MAX_DRAWS))
}

fn coplanar(points: &[[f64; 3]]) -> bool {
    if points.len() < 4 {
        return false;
    }
    let p: Vec<Vector3<f64>> = points.iter().map(|q| Vector3::from(*q)).collect();
    let (a, b) = (p[1] - p[0], p[2] - p[0]);
    let normal = a.cross(&b);
    let scale = a.norm() * b.norm();
    if normal.norm() < 1e-9 * scale {
        return true;
    }
    p[3..].iter().all(|q| (normal.dot(&(q - p[0]))).abs() < 1e-9 * scale * (q - p[0]).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn essential_of(inst: &SyntheticInstance) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| inst.essential[i][j])
    }

    #[test]
    fn generated_essential_satisfies_demazure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let inst = synth_instance(ProblemKind::FivePoint, &mut rng).unwrap();
            let e = essential_of(&inst);
            let d = 2.0 * e * e.transpose() * e - (e * e.transpose()).trace() * e;
            assert!(d.norm() < 1e-12);
            let r = Matrix3::from_fn(|i, j| inst.rotation[i][j]);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn five_point_vanishes_at_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = synth_instance(ProblemKind::FivePoint, &mut rng).unwrap();
        let (f, p) = five_point(&inst.correspondences).unwrap();
        assert_eq!(f.len(), 14);
        let v = f.evaluate(&inst.ground_truth(), &p).unwrap();
        assert!(v.norm() < 1e-10, "{}", v.norm());
        let prof = f.homogeneity();
        assert!(prof[..9].iter().all(|d| d == &vec![Some(3)]));
        assert!(prof[9..].iter().all(|d| d == &vec![Some(1)]));
    }

    #[test]
    fn six_point_vanishes_at_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let inst = synth_instance(ProblemKind::SixPoint, &mut rng).unwrap();
            let lam = inst.distortion.unwrap();
            assert!((-0.5..=0.0).contains(&lam));
            let (f, p) = six_point(&inst.correspondences).unwrap();
            assert_eq!(f.len(), 15);
            let v = f.evaluate(&inst.ground_truth(), &p).unwrap();
            assert!(v.norm() < 1e-10, "{}", v.norm());
            for poly in &f.polys()[9..] {
                assert_eq!(poly.homogeneous_degree_in(0..9), Some(1));
                assert!(poly.degree_in(9..10).unwrap() <= 2);
            }
        }
    }

    #[test]
    fn zero_distortion_is_pinhole() {
        let inst = synth_instance(ProblemKind::FivePoint, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut c = inst.correspondences.clone();
        c.pairs.push(c.pairs[0]);
        let (f6, p6) = six_point(&c).unwrap();
        let mut x = inst.ground_truth();
        x = x.push(C64::new(0.0, 0.0));
        let v6 = f6.evaluate(&x, &p6).unwrap();
        let (f5, p5) = five_point(&inst.correspondences).unwrap();
        let v5 = f5.evaluate(&inst.ground_truth(), &p5).unwrap();
        for i in 0..14 {
            assert!((v6[i] - v5[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn count_mismatch() {
        let c = Correspondences { pairs: vec![PointPair { x: [0.0; 2], y: [0.0; 2] }; 4] };
        assert!(matches!(five_point(&c), Err(Error::CountMismatch { expected: 5, got: 4 })));
        assert!(matches!(six_point(&c), Err(Error::CountMismatch { expected: 6, got: 4 })));
        assert!(synth_instance(ProblemKind::TwistedCubic, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn distortion_inverts_division_model() {
        let u = [0.3, -0.7];
        let lam = -0.4;
        let d = distort(u, lam);
        let r2 = d[0] * d[0] + d[1] * d[1];
        let back = [d[0] / (1.0 + lam * r2), d[1] / (1.0 + lam * r2)];
        assert!((back[0] - u[0]).abs() < 1e-14 && (back[1] - u[1]).abs() < 1e-14);
    }
}
