//! Small literal systems, points and matrices used for regression checks of
//! the patch and randomization strategies.

use crate::linalg::{CMatrix, CVector, C64};
use crate::polysys::{ParamPolySystem, Poly, VarGroup, VarStructure};

use super::Builder;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn real(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&r| c(r, 0.0)))
}

fn p3() -> VarStructure {
    VarStructure::new(vec![VarGroup::projective(4)], 0).unwrap()
}

/// Twisted cubic cut by `x0 + x1 + x2 + x3`.
pub fn twisted_cubic() -> ParamPolySystem {
    let s = p3();
    let b = Builder::new(&s);
    let x = |i| b.x(i);
    let polys = vec![
        &(&x(0) * &x(2)) - &(&x(1) * &x(1)),
        &(&x(1) * &x(2)) - &(&x(0) * &x(3)),
        &(&x(1) * &x(3)) - &(&x(2) * &x(2)),
        &(&(&x(0) + &x(1)) + &x(2)) + &x(3),
    ];
    ParamPolySystem::new(s, polys).unwrap()
}

/// `v . x - 1 = conj(v)^T x - 1` for a patch vector `v`.
pub fn patch_poly(width: usize, v: &CVector) -> Poly {
    let mut p = Poly::constant(width, c(-1.0, 0.0));
    for (j, vj) in v.iter().enumerate() {
        p = &p + &Poly::var(width, j).scale(vj.conj());
    }
    p
}

/// The twisted cubic system with the patch `v . x = 1` appended.
pub fn twisted_cubic_g(v: &CVector) -> ParamPolySystem {
    let f = twisted_cubic();
    f.append(vec![patch_poly(4, v)]).unwrap()
}

/// The twisted cubic system with `x0 - 1` appended.
pub fn twisted_cubic_h() -> ParamPolySystem {
    twisted_cubic_g(&real(&[1.0, 0.0, 0.0, 0.0]))
}

/// The three intersection points, in the chart `x0 = 1`.
pub fn twisted_cubic_points() -> Vec<CVector> {
    vec![
        real(&[1.0, -1.0, 1.0, -1.0]),
        CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]),
        CVector::from_vec(vec![c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)]),
    ]
}

/// Patch vectors compared on the twisted cubic, with the 2-norm condition
/// numbers reported for them at `[1, -1, 1, -1]`.
pub fn table1_patches() -> Vec<(CVector, f64)> {
    vec![
        (real(&[1.0, 0.0, 0.0, 0.0]), 10.2),
        (real(&[0.8695, 0.4670, -0.0231, 0.1592]), 158.2),
        (real(&[0.1947, 0.3999, -0.5268, -0.7243]), 113_574.2),
    ]
}

/// Columns `Q` of `[I Q]` randomizations of `h`, with the reported condition numbers.
pub fn table2_q() -> Vec<(CVector, f64)> {
    vec![
        (real(&[1.0, 1.0, 1.0, 1.0]), 33.3),
        (real(&[-0.0109, 0.5208, 0.4013, 0.7534]), 185.6),
        (real(&[-0.0889, 0.6266, 0.7152, 0.2966]), 67_193.2),
    ]
}

/// Small-integer randomizing matrix applied to `h`.
pub fn integer_randomizer() -> CMatrix {
    let rows: [[f64; 5]; 4] = [
        [2.0, -1.0, -3.0, 2.0, 2.0],
        [-2.0, -1.0, 0.0, 3.0, -4.0],
        [5.0, 3.0, -1.0, -2.0, -4.0],
        [-5.0, 3.0, 2.0, 2.0, 0.0],
    ];
    CMatrix::from_fn(4, 5, |i, j| c(rows[i][j], 0.0))
}

/// `integer_randomizer() * h` as a square system on `C^4`.
pub fn integer_randomized_h() -> ParamPolySystem {
    let h = twisted_cubic_h();
    let a = integer_randomizer();
    let polys = (0..4)
        .map(|i| {
            h.polys()
                .iter()
                .enumerate()
                .fold(Poly::zero(4), |acc, (j, p)| &acc + &p.scale(a[(i, j)]))
        })
        .collect();
    let s = VarStructure::new(vec![VarGroup::affine(4)], 0).unwrap();
    ParamPolySystem::new(s, polys).unwrap()
}

/// Approximate extra roots of `integer_randomized_h()` (printed to 4 decimals).
pub fn extraneous_points() -> Vec<CVector> {
    [1.0, -1.0]
        .iter()
        .map(|&s| {
            CVector::from_vec(vec![
                c(0.7955, s * 0.0744),
                c(0.3755, -s * 0.6315),
                c(-1.2239, -s * 0.1598),
                c(-0.6730, s * 0.9810),
            ])
        })
        .collect()
}

/// Pseudoinverse of `Jh` at `(1, -1, 1, -1)`.
pub fn h_pseudoinverse() -> CMatrix {
    let rows: [[f64; 5]; 4] = [
        [0.0, 0.0, 0.0, 0.0, 1.0],
        [1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0, 0.5, -1.0],
        [1.0 / 3.0, -1.0 / 3.0, -2.0 / 3.0, -1.0, 1.0],
        [-0.5, 0.0, 0.5, 1.5, -1.0],
    ];
    CMatrix::from_fn(4, 5, |i, j| c(rows[i][j], 0.0))
}

/// `x0 x2 - x1^2`, `x0^2 + x1^2 + x2^2 - x3^2`, `x1 x2 + x1 x3 - x0^2` on `P^3`.
pub fn quadric_system() -> ParamPolySystem {
    let s = p3();
    let b = Builder::new(&s);
    let x = |i| b.x(i);
    let sq = |i| &x(i) * &x(i);
    let polys = vec![
        &(&x(0) * &x(2)) - &sq(1),
        &(&(&sq(0) + &sq(1)) + &sq(2)) - &sq(3),
        &(&(&x(1) * &x(2)) + &(&x(1) * &x(3))) - &sq(0),
    ];
    ParamPolySystem::new(s, polys).unwrap()
}

/// Solution of [`quadric_system`] in the chart `x3 = 1`.
pub fn quadric_solution() -> CVector {
    let r5 = 5f64.sqrt();
    real(&[(r5 + 1.0) / 4.0, 0.5, (r5 - 1.0) / 4.0, 1.0])
}

/// Fixed general patch used for the twisted-cubic family demo.
pub fn demo_fixed_patch() -> CVector {
    CVector::from_vec(vec![c(0.3509, 0.1476), c(0.4524, -0.4487), c(-0.4159, -0.2470), c(0.4609, 0.0523)])
}

/// `Q` of the fixed `[I Q]` randomization used in the twisted-cubic family demo.
pub fn demo_fixed_q() -> CMatrix {
    CMatrix::from_column_slice(
        4,
        1,
        &[c(0.1792, -0.1432), c(-0.7159, -0.5784), c(0.1866, -0.4692), c(0.4524, 0.9864)],
    )
}

/// Start and target parameters of the twisted-cubic family demo.
pub fn demo_parameters() -> (CVector, CVector) {
    (
        real(&[1.0, 1.0, 1.0]),
        CVector::from_vec(vec![c(-1.0, 0.0), c(0.0, 0.1), c(0.0, 0.0)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadric_solution_solves() {
        let v = quadric_system().evaluate(&quadric_solution(), &CVector::zeros(0)).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn h_vanishes_at_first_point() {
        let h = twisted_cubic_h();
        assert!(h.evaluate(&real(&[1.0, -1.0, 1.0, -1.0]), &CVector::zeros(0)).unwrap().norm() == 0.0);
    }

    #[test]
    fn integer_randomized_system_keeps_the_three_points() {
        let g = integer_randomized_h();
        for pt in twisted_cubic_points() {
            assert!(g.evaluate(&pt, &CVector::zeros(0)).unwrap().norm() < 1e-10);
        }
        for pt in extraneous_points() {
            assert!(g.evaluate(&pt, &CVector::zeros(0)).unwrap().norm() < 1e-3);
        }
    }

    #[test]
    fn patch_polynomial_conjugates() {
        let v = CVector::from_vec(vec![c(0.0, 1.0), c(2.0, 0.0)]);
        let p = patch_poly(2, &v);
        let x = [c(1.0, 0.0), c(0.5, 0.0)];
        assert_eq!(p.eval_naive(&x), c(0.0, -1.0));
    }
}
