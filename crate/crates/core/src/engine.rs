//! End-to-end solves: the one-time ab initio solve at generic parameters,
//! the parameter homotopy to a target, endpoint classification and the
//! strategy benchmark.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::patch::{PatchKind, PatchState};
use crate::polysys::{ParamPolySystem, Poly, Term, VarGroup, VarStructure};
use crate::randomize::{self, RandomizerKind};
use crate::tracker::{FixedChoices, Homotopy, PathOutcome, PathResult, Strategies, Tracker, TrackerConfig};

/// Coefficients below this fraction of the largest one are dropped during
/// the degree-reducing row reduction.
const ELIMINATION_DROP: f64 = 1e-12;

/// Endpoints with `|h| <= AT_INFINITY * ||y||` lie at infinity.
const AT_INFINITY: f64 = 1e-8;

fn unit_random<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..TAU))
}

/// Solutions of `F(x; p*)` at generic parameters, used as start points.
#[derive(Debug, Clone, PartialEq)]
pub struct StartSet {
    pub p_star: CVector,
    /// Representatives with unit-norm projective groups.
    pub points: Vec<CVector>,
    pub residuals: Vec<f64>,
}

impl StartSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `DeficientCount` unless exactly `expected` points were found.
    pub fn check_count(&self, expected: usize) -> Result<()> {
        if self.points.len() == expected {
            Ok(())
        } else {
            Err(Error::DeficientCount { found: self.points.len(), expected })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbInitioConfig {
    pub tracker: TrackerConfig,
    /// Relative residual bound of a start point in the original system.
    pub residual_tol: f64,
    /// Largest 2-norm condition number of the patched Jacobian.
    pub max_cond: f64,
    pub dedup_tol: f64,
    /// Parameters to solve at; drawn at random when absent.
    pub p_star: Option<CVector>,
}

impl Default for AbInitioConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig { max_steps: 3000, ..TrackerConfig::default() },
            residual_tol: 1e-10,
            max_cond: 1e10,
            dedup_tol: 1e-6,
            p_star: None,
        }
    }
}

/// Start set plus bookkeeping of the total-degree solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AbInitio {
    pub start: StartSet,
    /// Degrees of the square system solved by the total-degree homotopy.
    pub degrees: Vec<u32>,
    pub paths: usize,
    pub converged: usize,
    pub at_infinity: usize,
    /// Finite endpoints rejected by the original-system residual.
    pub extraneous: usize,
    pub singular: usize,
    pub duplicates: usize,
    pub wall_seconds: f64,
}

/// Total degree of a polynomial in its first `n` slots.
fn total_degree(p: &Poly, n: usize) -> u32 {
    p.degree_in(0..n).unwrap_or(0)
}

/// Row-reduces polynomials (with no parameters) over monomials ordered by
/// descending degree, so that each row's leading monomial fixes its degree.
/// Returns nonzero rows with their degrees, sorted by ascending degree.
pub fn degree_reduce(polys: &[Poly], n: usize) -> Vec<(Poly, u32)> {
    let width = n;
    let mut monos: Vec<Vec<u32>> = polys.iter().flat_map(|p| p.terms().iter().map(|t| t.exps.clone())).collect();
    monos.sort_by(|a, b| {
        let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
        db.cmp(&da).then_with(|| b.cmp(a))
    });
    monos.dedup();
    let col = |e: &Vec<u32>| monos.binary_search_by(|m| {
        let (dm, de): (u32, u32) = (m.iter().sum(), e.iter().sum());
        de.cmp(&dm).then_with(|| e.cmp(m))
    });
    let mut a = CMatrix::zeros(polys.len(), monos.len());
    for (i, p) in polys.iter().enumerate() {
        for t in p.terms() {
            a[(i, col(&t.exps).expect("monomial present"))] = t.coeff;
        }
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let drop = ELIMINATION_DROP * scale;
    let mut pivot_row = 0;
    for c in 0..monos.len() {
        if pivot_row == a.nrows() {
            break;
        }
        let (best, mag) = (pivot_row..a.nrows())
            .map(|r| (r, a[(r, c)].norm()))
            .fold((pivot_row, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if mag <= drop {
            for r in pivot_row..a.nrows() {
                a[(r, c)] = C64::new(0.0, 0.0);
            }
            continue;
        }
        a.swap_rows(pivot_row, best);
        let piv = a[(pivot_row, c)];
        let prow = a.row(pivot_row).clone_owned() / piv;
        a.row_mut(pivot_row).copy_from(&prow);
        for r in 0..a.nrows() {
            if r != pivot_row {
                let f = a[(r, c)];
                if f != C64::new(0.0, 0.0) {
                    let upd = a.row(r) - &prow * f;
                    a.row_mut(r).copy_from(&upd);
                    a[(r, c)] = C64::new(0.0, 0.0);
                }
            }
        }
        pivot_row += 1;
    }
    let mut rows: Vec<(Poly, u32)> = (0..pivot_row)
        .map(|r| {
            let terms = (0..monos.len())
                .filter(|&c| a[(r, c)].norm() > drop)
                .map(|c| Term { coeff: a[(r, c)], exps: monos[c].clone() })
                .collect();
            let p = Poly::from_terms(width, terms);
            let d = total_degree(&p, n);
            (p, d)
        })
        .collect();
    rows.sort_by_key(|(_, d)| *d);
    rows
}

/// Squares up degree-sorted rows to `k` polynomials: output `r` is row `r`
/// plus random multiples of the surplus rows of equal or lower degree.
fn square_up<R: Rng + ?Sized>(rows: &[(Poly, u32)], k: usize, width: usize, rng: &mut R) -> Result<Vec<(Poly, u32)>> {
    if rows.len() < k {
        return Err(Error::Invalid(format!("{} independent equations for {} unknowns", rows.len(), k)));
    }
    Ok((0..k)
        .map(|r| {
            let (base, d) = &rows[r];
            let mut p = base.clone();
            for (extra, de) in &rows[k..] {
                if de <= d {
                    p = &p + &extra.scale(unit_random(rng));
                }
            }
            debug_assert_eq!(p.width(), width);
            (p, *d)
        })
        .collect())
}

/// Homogenizes `p` (width `n`, degree `d`) with `h` in slot 0 and multiplies
/// by the parameter in `param_slot` of a width-`n + 3` layout.
fn homogenize(p: &Poly, n: usize, d: u32, param_slot: usize) -> Poly {
    let width = n + 3;
    let terms = p
        .terms()
        .iter()
        .map(|t| {
            let mut exps = vec![0u32; width];
            let deg: u32 = t.exps.iter().sum();
            exps[0] = d - deg;
            exps[1..=n].copy_from_slice(&t.exps);
            exps[param_slot] = 1;
            Term { coeff: t.coeff, exps }
        })
        .collect();
    Poly::from_terms(width, terms)
}

/// Start points `(1, w_0, ..., w_{n-1})` of `x_i^{d_i} - h^{d_i}` with `w_i` a `d_i`-th root of unity.
fn total_degree_starts(degrees: &[u32]) -> Vec<CVector> {
    let total: usize = degrees.iter().map(|&d| d as usize).product();
    (0..total)
        .map(|mut idx| {
            let mut y = CVector::zeros(degrees.len() + 1);
            y[0] = C64::new(1.0, 0.0);
            for (i, &d) in degrees.iter().enumerate() {
                let a = idx % d as usize;
                idx /= d as usize;
                y[i + 1] = C64::from_polar(1.0, TAU * a as f64 / d as f64);
            }
            y
        })
        .collect()
}

/// Square patched system on `C^n` (patch rows appended) and the affine chart
/// it lives in.
struct SquareSystem {
    affine: ParamPolySystem,
    patch: PatchState,
    degrees: Vec<u32>,
}

fn build_square<R: Rng + ?Sized>(f_star: &ParamPolySystem, rng: &mut R) -> Result<SquareSystem> {
    let s = f_star.structure();
    let n = s.num_vars();
    let patch = PatchState::fixed(s, rng);
    let reduced = degree_reduce(f_star.polys(), n);
    let k = n - s.num_projective();
    let mut rows = square_up(&reduced, k, n, rng)?;
    for eq in patch.patch_equations(n) {
        rows.push((eq, 1));
    }
    let degrees = rows.iter().map(|(_, d)| *d).collect();
    let structure = VarStructure::new(vec![VarGroup::affine(n)], 0)?;
    let affine = ParamPolySystem::new(structure, rows.into_iter().map(|(p, _)| p).collect())?;
    Ok(SquareSystem { affine, patch, degrees })
}

/// Relative residual `||F(x; p)|| / (1 + ||x||^maxdeg)`.
pub fn relative_residual(system: &ParamPolySystem, x: &CVector, p: &CVector) -> Result<f64> {
    let v = system.evaluate(x, p)?;
    Ok(v.norm() / (1.0 + x.norm().powi(system.max_degree() as i32)))
}

/// Condition number of `[J_x F; patch rows]` at `x`.
fn patched_cond(system: &ParamPolySystem, patch: &PatchState, x: &CVector, p: &CVector) -> Result<f64> {
    let jf = system.jacobian_x(x, p)?;
    let m = jf.nrows();
    let mut j = CMatrix::zeros(m + patch.groups.len(), jf.ncols());
    j.rows_mut(0, m).copy_from(&jf);
    for (gi, g) in patch.groups.iter().enumerate() {
        for (k, vk) in g.v.iter().enumerate() {
            j[(m + gi, g.range.start + k)] = vk.conj();
        }
    }
    Ok(linalg::cond2(&j))
}

/// Ab initio solve of `F` at generic parameters by a total-degree homotopy.
///
/// `F(x; p*)` is row-reduced so that no row has a higher degree than needed,
/// squared up to `n - #groups` equations mixing only rows of equal degree,
/// completed with random fixed patches, homogenized and solved from
/// `x_i^{d_i} - h^{d_i}` with a random `gamma`. Endpoints are kept when they
/// are finite, solve the original `F` and are nonsingular.
pub fn ab_initio<R: Rng + ?Sized>(system: &ParamPolySystem, config: &AbInitioConfig, rng: &mut R) -> Result<AbInitio> {
    let clock = Instant::now();
    let s = system.structure().clone();
    let n = s.num_vars();
    let p_star = match &config.p_star {
        Some(p) if p.len() == s.param_count => p.clone(),
        Some(p) => return Err(Error::DimensionMismatch { expected: s.param_count, got: p.len() }),
        None => CVector::from_fn(s.param_count, |_, _| unit_random(rng)),
    };
    let f_star = system.substitute_params(&p_star)?;
    let square = build_square(&f_star, rng)?;

    let width = n + 3;
    let (s0, s1) = (n + 1, n + 2);
    let mut polys = Vec::with_capacity(n);
    for (i, (p, &d)) in square.affine.polys().iter().zip(&square.degrees).enumerate() {
        let target = homogenize(p, n, d, s1);
        let mut e = vec![0u32; width];
        e[i + 1] = d;
        e[s0] = 1;
        let mut e_h = vec![0u32; width];
        e_h[0] = d;
        e_h[s0] = 1;
        let start = Poly::from_terms(
            width,
            vec![Term { coeff: C64::new(1.0, 0.0), exps: e }, Term { coeff: C64::new(-1.0, 0.0), exps: e_h }],
        );
        polys.push(&start + &target);
    }
    let td = ParamPolySystem::new(VarStructure::new(vec![VarGroup::projective(n + 1)], 2)?, polys)?;
    let gamma = unit_random(rng);
    let hom = Homotopy::new(
        &td,
        CVector::from_vec(vec![gamma, C64::new(0.0, 0.0)]),
        CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
    )?;
    let strategies = Strategies::new(PatchKind::Orthogonal, RandomizerKind::Fixed);
    let fixed = FixedChoices {
        patch: None,
        randomizer: Some(randomize::fixed_randomizer_from(&CMatrix::zeros(n + 1, 0))?),
    };
    let tracker = Tracker::new(&hom, strategies, &fixed, &config.tracker)?;
    let starts = total_degree_starts(&square.degrees);
    let results: Vec<PathResult> = starts.par_iter().enumerate().map(|(i, y)| tracker.track(i, y)).collect();

    let mut out = AbInitio {
        start: StartSet { p_star: p_star.clone(), points: Vec::new(), residuals: Vec::new() },
        degrees: square.degrees.clone(),
        paths: starts.len(),
        converged: 0,
        at_infinity: 0,
        extraneous: 0,
        singular: 0,
        duplicates: 0,
        wall_seconds: 0.0,
    };
    let empty = CVector::zeros(0);
    for r in &results {
        let PathOutcome::Converged { endpoint, .. } = &r.outcome else { continue };
        out.converged += 1;
        let y = endpoint / C64::new(endpoint.norm(), 0.0);
        if y[0].norm() <= AT_INFINITY {
            out.at_infinity += 1;
            continue;
        }
        let mut x: CVector = y.rows(1, n) / y[0];
        // refine on the square system in the affine chart
        for _ in 0..4 {
            let (v, j) = (square.affine.evaluate(&x, &empty)?, square.affine.jacobian_x(&x, &empty)?);
            match linalg::solve(&j, &(-v)) {
                Ok(dx) => {
                    x += &dx;
                    if dx.norm() <= 1e-14 * (1.0 + x.norm()) {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        let xu = s.unit_representative(&x);
        let res = relative_residual(system, &xu, &p_star)?;
        if !(res <= config.residual_tol) {
            out.extraneous += 1;
            continue;
        }
        if !(patched_cond(&f_star, &square.patch, &x, &empty)? <= config.max_cond) {
            out.singular += 1;
            continue;
        }
        if out.start.points.iter().any(|q| s.distance(q, &xu) <= config.dedup_tol) {
            out.duplicates += 1;
            continue;
        }
        out.start.points.push(xu);
        out.start.residuals.push(res);
    }
    out.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub tracker: TrackerConfig,
    /// Relative residual bound in the original system for a reported solution.
    pub residual_tol: f64,
    pub dedup_tol: f64,
    pub real_tol: f64,
    /// Seed of the fixed patch and randomizer draws.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tracker: TrackerConfig::default(), residual_tol: 1e-8, dedup_tol: 1e-6, real_tol: 1e-6, seed: 0 }
    }
}

/// A distinct endpoint solving the original system at the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub path_id: usize,
    /// Representative with unit-norm projective groups.
    pub point: CVector,
    pub residual: f64,
    pub real: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub strategies: Strategies,
    pub truncation: bool,
    pub paths: Vec<PathResult>,
    pub solutions: Vec<Solution>,
    pub converged: usize,
    pub truncated: usize,
    pub failed: usize,
    /// Converged endpoints that do not solve the original system.
    pub extraneous: usize,
    pub duplicates: usize,
    pub avg_steps: f64,
    pub total_ops: u64,
    pub wall_seconds: f64,
}

impl SolveReport {
    pub fn real_solutions(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.real)
    }
}

/// Phase-normalizes each projective group; real iff `||imag|| <= tol ||x||`.
pub fn classify_real(structure: &VarStructure, x: &CVector, tol: f64) -> bool {
    let xn = structure.phase_normalized(x);
    let imag = xn.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    imag <= tol * xn.norm()
}

/// Greedy clustering by [`VarStructure::distance`]; returns the indices of
/// the first representative of each cluster.
pub fn dedup(structure: &VarStructure, points: &[CVector], tol: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !kept.iter().any(|&k| structure.distance(&points[k], p) <= tol) {
            kept.push(i);
        }
    }
    kept
}

/// Parameter homotopy from `start` to `p_hat`, with the fixed strategy
/// components drawn from `config.seed`.
pub fn param_solve(
    system: &ParamPolySystem,
    start: &StartSet,
    p_hat: &CVector,
    strategies: Strategies,
    config: &SolveConfig,
) -> Result<SolveReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let fixed = FixedChoices::draw(system, &strategies, &mut rng)?;
    param_solve_with(system, start, p_hat, strategies, &fixed, config)
}

/// [`param_solve`] with explicitly supplied fixed components.
pub fn param_solve_with(
    system: &ParamPolySystem,
    start: &StartSet,
    p_hat: &CVector,
    strategies: Strategies,
    fixed: &FixedChoices,
    config: &SolveConfig,
) -> Result<SolveReport> {
    let clock = Instant::now();
    let hom = Homotopy::new(system, start.p_star.clone(), p_hat.clone())?;
    let tracker = Tracker::new(&hom, strategies, fixed, &config.tracker)?;
    let paths: Vec<PathResult> = start.points.par_iter().enumerate().map(|(i, x)| tracker.track(i, x)).collect();
    let s = system.structure();
    let mut report = SolveReport {
        strategies,
        truncation: config.tracker.truncation_enabled,
        paths: Vec::new(),
        solutions: Vec::new(),
        converged: 0,
        truncated: 0,
        failed: 0,
        extraneous: 0,
        duplicates: 0,
        avg_steps: 0.0,
        total_ops: 0,
        wall_seconds: 0.0,
    };
    for r in &paths {
        report.total_ops += r.ops;
        match &r.outcome {
            PathOutcome::Converged { endpoint, .. } => {
                report.converged += 1;
                let xu = s.unit_representative(endpoint);
                let res = relative_residual(system, &xu, p_hat)?;
                if !(res <= config.residual_tol) {
                    report.extraneous += 1;
                } else if report.solutions.iter().any(|q| s.distance(&q.point, &xu) <= config.dedup_tol) {
                    report.duplicates += 1;
                } else {
                    let real = classify_real(s, &xu, config.real_tol);
                    report.solutions.push(Solution { path_id: r.path_id, point: xu, residual: res, real });
                }
            }
            PathOutcome::Truncated { .. } => report.truncated += 1,
            _ => report.failed += 1,
        }
    }
    report.avg_steps = if paths.is_empty() {
        0.0
    } else {
        paths.iter().map(|r| r.steps as f64).sum::<f64>() / paths.len() as f64
    };
    report.paths = paths;
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// One column of the strategy comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub strategies: Strategies,
    pub truncation: bool,
}

impl Combo {
    pub fn new(patch: PatchKind, randomizer: RandomizerKind, truncation: bool) -> Self {
        Self { strategies: Strategies::new(patch, randomizer), truncation }
    }

    pub fn label(&self) -> String {
        let mut s = self.strategies.label();
        if self.truncation {
            s.push_str("/ET");
        }
        s
    }
}

/// FP/FR, OP/FR, CWP/FR, OP/PIR, CWP/LSR and CWP/LSR/ET.
pub fn default_combos() -> Vec<Combo> {
    use PatchKind::{CoordinateWise, Orthogonal};
    use RandomizerKind::{LeverageScore, Pseudoinverse};
    vec![
        Combo::new(PatchKind::Fixed, RandomizerKind::Fixed, false),
        Combo::new(Orthogonal, RandomizerKind::Fixed, false),
        Combo::new(CoordinateWise, RandomizerKind::Fixed, false),
        Combo::new(Orthogonal, Pseudoinverse, false),
        Combo::new(CoordinateWise, LeverageScore, false),
        Combo::new(CoordinateWise, LeverageScore, true),
    ]
}

/// Aggregates of one combination over an instance batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub label: String,
    pub instances: usize,
    pub paths: usize,
    pub avg_steps_per_path: f64,
    pub avg_ops_per_instance: f64,
    pub avg_seconds_per_instance: f64,
    pub truncated: usize,
    pub failed: usize,
    /// Real solutions found that are in the truncation-off baseline.
    pub real_found: usize,
    pub real_baseline: usize,
    pub recall: f64,
}

/// Runs every combination over the same target parameters. The recall
/// baseline of an instance is the union of real solutions over the
/// combinations without truncation.
pub fn bench(
    system: &ParamPolySystem,
    start: &StartSet,
    targets: &[CVector],
    combos: &[Combo],
    config: &SolveConfig,
) -> Result<Vec<BenchRow>> {
    let s = system.structure();
    let mut reports: Vec<Vec<SolveReport>> = Vec::with_capacity(combos.len());
    for combo in combos {
        let cfg = SolveConfig {
            tracker: TrackerConfig { truncation_enabled: combo.truncation, ..config.tracker.clone() },
            ..config.clone()
        };
        let runs = targets
            .iter()
            .map(|p| param_solve(system, start, p, combo.strategies, &cfg))
            .collect::<Result<Vec<_>>>()?;
        reports.push(runs);
    }
    let baselines: Vec<Vec<CVector>> = (0..targets.len())
        .map(|i| {
            let mut pts: Vec<CVector> = Vec::new();
            for (c, runs) in combos.iter().zip(&reports) {
                if c.truncation {
                    continue;
                }
                for sol in runs[i].real_solutions() {
                    if !pts.iter().any(|q| s.distance(q, &sol.point) <= config.dedup_tol) {
                        pts.push(sol.point.clone());
                    }
                }
            }
            pts
        })
        .collect();
    Ok(combos
        .iter()
        .zip(&reports)
        .map(|(c, runs)| {
            let paths: usize = runs.iter().map(|r| r.paths.len()).sum();
            let steps: usize = runs.iter().flat_map(|r| r.paths.iter().map(|p| p.steps)).sum();
            let n = runs.len().max(1) as f64;
            let real_baseline: usize = baselines.iter().map(|b| b.len()).sum();
            let real_found: usize = runs
                .iter()
                .zip(&baselines)
                .map(|(r, b)| b.iter().filter(|q| r.real_solutions().any(|s2| s.distance(q, &s2.point) <= config.dedup_tol)).count())
                .sum();
            BenchRow {
                label: c.label(),
                instances: runs.len(),
                paths,
                avg_steps_per_path: if paths == 0 { 0.0 } else { steps as f64 / paths as f64 },
                avg_ops_per_instance: runs.iter().map(|r| r.total_ops as f64).sum::<f64>() / n,
                avg_seconds_per_instance: runs.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
                truncated: runs.iter().map(|r| r.truncated).sum(),
                failed: runs.iter().map(|r| r.failed).sum(),
                real_found,
                real_baseline,
                recall: if real_baseline == 0 { 1.0 } else { real_found as f64 / real_baseline as f64 },
            }
        })
        .collect())
}

/// Fixed components from explicit patch vectors and `Q` of `[I Q]`.
pub fn fixed_from_parts(patch: Option<Vec<CVector>>, q: Option<&CMatrix>) -> Result<FixedChoices> {
    Ok(FixedChoices { patch, randomizer: q.map(randomize::fixed_randomizer_from).transpose()? })
}
