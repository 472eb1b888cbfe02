//! Shared fixtures for the criterion benchmarks.

use adaptrack::engine::{ab_initio, AbInitioConfig};
use adaptrack::problems::synth_instance;
use adaptrack::{CMatrix, CVector, ParamPolySystem, ProblemKind, StartSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A problem family with a start set and synthetic targets.
pub struct Fixture {
    pub system: ParamPolySystem,
    pub start: StartSet,
    pub targets: Vec<CVector>,
}

/// Runs the ab initio solve for `kind` and draws `count` synthetic targets,
/// all from `seed`.
pub fn vision_fixture(kind: ProblemKind, count: usize, seed: u64) -> Fixture {
    let system = kind.family();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = ab_initio(&system, &AbInitioConfig::default(), &mut rng).expect("ab initio solve").start;
    let targets = (0..count)
        .map(|_| synth_instance(kind, &mut rng).expect("synthetic instance").correspondences.params())
        .collect();
    Fixture { system, start, targets }
}

/// Jacobian of the patched system at the first start point, with the
/// patch row `x_j = 1` for the largest coordinate appended.
pub fn start_jacobian(f: &Fixture) -> CMatrix {
    let x = &f.start.points[0];
    let jac = f.system.jacobian_x(x, &f.start.p_star).expect("shapes agree");
    let j = (0..x.len()).max_by(|&a, &b| x[a].norm().total_cmp(&x[b].norm())).unwrap_or(0);
    let mut out = CMatrix::zeros(jac.nrows() + 1, jac.ncols());
    out.rows_mut(0, jac.nrows()).copy_from(&jac);
    out[(jac.nrows(), j)] = adaptrack::C64::new(1.0, 0.0);
    out
}
