//! Predictor-corrector tracking of one path of the parameter homotopy
//! `H(x, t) = A G(x; t p* + (1 - t) p^)`, where `G` is `F` with one patch
//! equation per projective group appended and `A` a randomizing matrix.
//!
//! Patches and adaptive randomizers are refreshed after every accepted step.
//! Paths whose imaginary part keeps growing near `t = 0` can be abandoned
//! early by the truncation test.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::patch::{self, PatchKind, PatchState, PatchStrategy};
use crate::polysys::ParamPolySystem;
use crate::randomize::{self, Randomizer, RandomizerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub dt_initial: f64,
    pub dt_min: f64,
    /// Upper bound for `dt` after doubling.
    pub dt_max: f64,
    pub newton_max_iters: usize,
    /// Relative bound on the last Newton update, `||dx|| <= tol (1 + ||x||)`.
    pub newton_tol: f64,
    pub successes_to_double: u32,
    pub max_steps: usize,
    pub truncation_enabled: bool,
    pub truncation_t_start: f64,
    pub truncation_angle: f64,
    /// Relative residual bound for accepted iterates and endpoints.
    pub residual_accept_tol: f64,
    /// Update tolerance of the endpoint polish at `t = 0`.
    pub final_tol: f64,
    pub final_max_iters: usize,
    pub record_trace: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            dt_initial: 0.1,
            dt_min: 1e-10,
            dt_max: 0.1,
            newton_max_iters: 3,
            newton_tol: 1e-9,
            successes_to_double: 3,
            max_steps: 10_000,
            truncation_enabled: false,
            truncation_t_start: 0.3,
            truncation_angle: 5.0 * PI / 6.0,
            residual_accept_tol: 1e-8,
            final_tol: 1e-12,
            final_max_iters: 8,
            record_trace: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min < self.dt_initial
            && self.dt_initial <= 1.0
            && self.dt_initial <= self.dt_max
            && self.newton_tol > 0.0
            && self.residual_accept_tol > 0.0
            && self.final_tol > 0.0
            && self.newton_max_iters > 0
            && self.successes_to_double > 0
            && self.truncation_angle > 0.0
            && self.truncation_angle < PI;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("inconsistent tracker configuration".into()))
        }
    }
}

/// Patch and randomizer strategy of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategies {
    pub patch: PatchStrategy,
    pub randomizer: RandomizerKind,
}

impl Strategies {
    pub fn new(patch: PatchKind, randomizer: RandomizerKind) -> Self {
        Self { patch: PatchStrategy::new(patch), randomizer }
    }

    /// Short label such as `CWP/LSR`.
    pub fn label(&self) -> String {
        let mut s = format!("{}/{}", self.patch.kind.label(), self.randomizer.label());
        if self.patch.optimal_scaling {
            s.push_str("+S");
        }
        s
    }
}

/// Segment `p(t) = t p* + (1 - t) p^` through the parameters of a system.
#[derive(Debug, Clone)]
pub struct Homotopy<'a> {
    pub system: &'a ParamPolySystem,
    pub p_start: CVector,
    pub p_target: CVector,
}

impl<'a> Homotopy<'a> {
    pub fn new(system: &'a ParamPolySystem, p_start: CVector, p_target: CVector) -> Result<Self> {
        for p in [&p_start, &p_target] {
            if p.len() != system.param_count() {
                return Err(Error::DimensionMismatch { expected: system.param_count(), got: p.len() });
            }
        }
        Ok(Self { system, p_start, p_target })
    }

    pub fn params(&self, t: f64) -> CVector {
        &self.p_start * C64::new(t, 0.0) + &self.p_target * C64::new(1.0 - t, 0.0)
    }

    /// `dp/dt = p* - p^`.
    pub fn direction(&self) -> CVector {
        &self.p_start - &self.p_target
    }

    /// Rows of `G`: the polynomials of `F` plus one patch row per projective group.
    pub fn g_rows(&self) -> usize {
        self.system.len() + self.system.structure().num_projective()
    }
}

/// Patch vectors and randomizer drawn once per solve for the fixed strategies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedChoices {
    pub patch: Option<Vec<CVector>>,
    pub randomizer: Option<Randomizer>,
}

impl FixedChoices {
    /// Draws whatever the strategies keep fixed.
    pub fn draw<R: Rng + ?Sized>(system: &ParamPolySystem, strategies: &Strategies, rng: &mut R) -> Result<Self> {
        let s = system.structure();
        let patch = (strategies.patch.kind == PatchKind::Fixed)
            .then(|| s.projective_ranges().iter().map(|r| patch::init_fixed(r.len(), rng)).collect());
        let n_g = system.len() + s.num_projective();
        let randomizer = if strategies.randomizer == RandomizerKind::Fixed {
            Some(randomize::fixed_randomizer(system.num_vars(), n_g, rng)?)
        } else {
            None
        };
        Ok(Self { patch, randomizer })
    }
}

/// `A G` restricted to what the randomizer needs, at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: CVector,
    pub jac_x: CMatrix,
    pub jac_t: Option<CVector>,
}

/// Randomized patched homotopy at fixed patch and randomizer.
pub struct StepContext<'h, 'a> {
    hom: &'h Homotopy<'a>,
    patch: &'h PatchState,
    randomizer: &'h Randomizer,
    f_rows: Vec<usize>,
    g_rows: Vec<usize>,
}

impl<'h, 'a> StepContext<'h, 'a> {
    pub fn new(hom: &'h Homotopy<'a>, patch: &'h PatchState, randomizer: &'h Randomizer) -> Result<Self> {
        let n_g = hom.g_rows();
        if randomizer.source_len() != n_g || randomizer.output_len() != hom.system.num_vars() {
            return Err(Error::DimensionMismatch { expected: n_g, got: randomizer.source_len() });
        }
        let g_rows: Vec<usize> = match randomizer.needed_rows() {
            Some(rows) => rows.to_vec(),
            None => (0..n_g).collect(),
        };
        let m = hom.system.len();
        let f_rows = g_rows.iter().copied().filter(|&r| r < m).collect();
        Ok(Self { hom, patch, randomizer, f_rows, g_rows })
    }

    /// Rows `g_rows` of `G`, its `x`-Jacobian and optionally its `t`-derivative.
    fn eval_g(&self, x: &CVector, t: f64, want_t: bool, ops: &mut u64) -> Result<Evaluation> {
        let sys = self.hom.system;
        let dir = want_t.then(|| self.hom.direction());
        let fe = sys.eval_rows(x, &self.hom.params(t), &self.f_rows, dir.as_ref(), ops)?;
        let m = sys.len();
        let n = sys.num_vars();
        let mut value = CVector::zeros(self.g_rows.len());
        let mut jac_x = CMatrix::zeros(self.g_rows.len(), n);
        let mut jac_t = want_t.then(|| CVector::zeros(self.g_rows.len()));
        let mut fi = 0;
        for (i, &r) in self.g_rows.iter().enumerate() {
            if r < m {
                value[i] = fe.values[fi];
                jac_x.row_mut(i).copy_from(&fe.jacobian.row(fi));
                if let (Some(out), Some(d)) = (jac_t.as_mut(), fe.dir_derivative.as_ref()) {
                    out[i] = d[fi];
                }
                fi += 1;
            } else {
                let g = &self.patch.groups[r - m];
                value[i] = g.residual(x);
                for (k, vk) in g.v.iter().enumerate() {
                    jac_x[(i, g.range.start + k)] = vk.conj();
                }
                *ops += g.range.len() as u64;
            }
        }
        Ok(Evaluation { value, jac_x, jac_t })
    }

    /// `A G`, `A J_x G` and optionally `A J_t G` at `(x, t)`.
    pub fn evaluate(&self, x: &CVector, t: f64, want_t: bool, ops: &mut u64) -> Result<Evaluation> {
        let e = self.eval_g(x, t, want_t, ops)?;
        let value = self.randomizer.apply_vec(&e.value, ops)?;
        let jac_x = self.randomizer.apply(&e.jac_x, ops)?;
        let jac_t = match e.jac_t {
            Some(v) => Some(self.randomizer.apply_vec(&v, ops)?),
            None => None,
        };
        Ok(Evaluation { value, jac_x, jac_t })
    }

    /// `||A G(x, t)||` (values only).
    pub fn residual(&self, x: &CVector, t: f64, ops: &mut u64) -> Result<f64> {
        Ok(self.evaluate(x, t, false, ops)?.value.norm())
    }

    /// `dx/dt = -(J_x H)^{-1} J_t H`.
    fn velocity(&self, x: &CVector, t: f64, ops: &mut u64) -> Result<CVector> {
        let e = self.evaluate(x, t, true, ops)?;
        let rhs = -e.jac_t.expect("requested");
        *ops += linalg::lu_solve_ops(x.len());
        linalg::solve(&e.jac_x, &rhs)
    }
}

/// One classical Runge-Kutta step of the Davidenko equation from `t` to `t - h`.
pub fn rk4_predict(ctx: &StepContext, x: &CVector, t: f64, h: f64, ops: &mut u64) -> Result<CVector> {
    let hh = C64::new(h, 0.0);
    let half = C64::new(h / 2.0, 0.0);
    let k1 = ctx.velocity(x, t, ops)?;
    let k2 = ctx.velocity(&(x - &k1 * half), t - h / 2.0, ops)?;
    let k3 = ctx.velocity(&(x - &k2 * half), t - h / 2.0, ops)?;
    let k4 = ctx.velocity(&(x - &k3 * hh), t - h, ops)?;
    let sum = k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4;
    Ok(x - sum * C64::new(h / 6.0, 0.0))
}

/// Result of [`newton_correct`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub x: CVector,
    pub iterations: usize,
    pub last_update: f64,
    pub converged: bool,
}

/// Up to `max_iters` Newton iterations on `H(., t)`; converged iff the last
/// update satisfies `||dx|| <= tol (1 + ||x||)`. A singular Jacobian is an error.
pub fn newton_correct(
    ctx: &StepContext,
    x0: &CVector,
    t: f64,
    max_iters: usize,
    tol: f64,
    ops: &mut u64,
) -> Result<NewtonResult> {
    let mut x = x0.clone();
    let mut last = f64::INFINITY;
    for it in 0..max_iters {
        let e = ctx.evaluate(&x, t, false, ops)?;
        *ops += linalg::lu_solve_ops(x.len());
        let dx = linalg::solve(&e.jac_x, &(-e.value))?;
        x += &dx;
        last = dx.norm();
        if last <= tol * (1.0 + x.norm()) {
            return Ok(NewtonResult { x, iterations: it + 1, last_update: last, converged: true });
        }
    }
    Ok(NewtonResult { x, iterations: max_iters, last_update: last, converged: false })
}

/// Verdict of the truncation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Keep,
    Truncate { theta: f64 },
}

/// Angle between the direction vectors `P2 - P1` and `O - P2` in the `(t, r)` plane.
pub fn truncation_angle(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let a = (p2.0 - p1.0, p2.1 - p1.1);
    let b = (-p2.0, -p2.1);
    let na = a.0.hypot(a.1);
    let nb = b.0.hypot(b.1);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    ((a.0 * b.0 + a.1 * b.1) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Applies the angle test to the two most recent samples with `0 < t < t_start`.
pub fn truncation_test(history: &[(f64, f64)], t_start: f64, angle: f64) -> Truncation {
    let recent: Vec<(f64, f64)> = history
        .iter()
        .rev()
        .filter(|(t, _)| *t > 0.0 && *t < t_start)
        .take(2)
        .copied()
        .collect();
    if recent.len() < 2 {
        return Truncation::Keep;
    }
    let (p2, p1) = (recent[0], recent[1]);
    if !(p2.0 < p1.0) {
        return Truncation::Keep;
    }
    let theta = truncation_angle(p1, p2);
    if theta >= angle {
        Truncation::Truncate { theta }
    } else {
        Truncation::Keep
    }
}

/// How a path ended.
#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    /// Endpoint at `t = 0` with its relative residual in `A G`.
    Converged { endpoint: CVector, residual: f64 },
    Truncated { t: f64, theta: f64 },
    StepSizeFailure { t: f64 },
    MaxStepsExceeded { t: f64 },
}

impl PathOutcome {
    pub fn is_converged(&self) -> bool {
        matches!(self, PathOutcome::Converged { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PathOutcome::Converged { .. } => "converged",
            PathOutcome::Truncated { .. } => "truncated",
            PathOutcome::StepSizeFailure { .. } => "step-size-failure",
            PathOutcome::MaxStepsExceeded { .. } => "max-steps",
        }
    }
}

/// One row of the optional per-step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub path_id: usize,
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub cond2: f64,
    pub imag_norm: f64,
    pub newton_iters: usize,
}

/// Outcome plus statistics of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub path_id: usize,
    pub outcome: PathOutcome,
    /// Predictor-corrector attempts, accepted or not.
    pub steps: usize,
    pub rejects: usize,
    pub ops: u64,
    pub trace: Vec<TraceRow>,
}

/// Mutable state of a path between steps.
#[derive(Debug, Clone)]
pub struct PathState {
    pub t: f64,
    pub x: CVector,
    pub dt: f64,
    pub consecutive_successes: u32,
    pub imag_history: Vec<(f64, f64)>,
    pub step_count: usize,
    pub rejects: usize,
    pub op_count: u64,
    pub patch: PatchState,
    pub randomizer: Randomizer,
}

/// Tracks single paths of one homotopy under fixed strategies.
pub struct Tracker<'h, 'a> {
    hom: &'h Homotopy<'a>,
    strategies: Strategies,
    fixed: &'h FixedChoices,
    config: &'h TrackerConfig,
    /// Common degree of every row of `F` in each projective group, if any.
    group_degrees: Vec<Option<u32>>,
}

impl<'h, 'a> Tracker<'h, 'a> {
    pub fn new(
        hom: &'h Homotopy<'a>,
        strategies: Strategies,
        fixed: &'h FixedChoices,
        config: &'h TrackerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if strategies.patch.kind == PatchKind::Fixed && fixed.patch.is_none() {
            return Err(Error::Invalid("fixed patch strategy needs patch vectors".into()));
        }
        if strategies.randomizer == RandomizerKind::Fixed && fixed.randomizer.is_none() {
            return Err(Error::Invalid("fixed randomizer strategy needs a matrix".into()));
        }
        let profile = hom.system.homogeneity();
        let group_degrees = (0..hom.system.structure().num_projective())
            .map(|g| patch::common_degree(profile.iter().map(|row| row[g])).ok())
            .collect();
        Ok(Self { hom, strategies, fixed, config, group_degrees })
    }

    /// Full Jacobian `J_x G` (all rows, unrandomized).
    fn jacobian_g(&self, patch: &PatchState, x: &CVector, t: f64, ops: &mut u64) -> Result<CMatrix> {
        let n_g = self.hom.g_rows();
        let sys = self.hom.system;
        let m = sys.len();
        let rows: Vec<usize> = (0..m).collect();
        let fe = sys.eval_rows(x, &self.hom.params(t), &rows, None, ops)?;
        let mut j = CMatrix::zeros(n_g, sys.num_vars());
        j.rows_mut(0, m).copy_from(&fe.jacobian);
        for (gi, g) in patch.groups.iter().enumerate() {
            for (k, vk) in g.v.iter().enumerate() {
                j[(m + gi, g.range.start + k)] = vk.conj();
            }
        }
        Ok(j)
    }

    /// Re-fits the patch at `x` (moving `x` onto it) and applies optimal scaling.
    fn refit_patch(&self, patch: &mut PatchState, x: &mut CVector, t: f64, ops: &mut u64) -> Result<()> {
        let kind = self.strategies.patch.kind;
        patch.refit(kind, x)?;
        if self.strategies.patch.optimal_scaling && kind != PatchKind::Fixed {
            let p = self.hom.params(t);
            let rows: Vec<usize> = (0..self.hom.system.len()).collect();
            let fe = self.hom.system.eval_rows(x, &p, &rows, None, ops)?;
            for gi in 0..patch.groups.len() {
                if let Some(d) = self.group_degrees[gi] {
                    let r = patch.groups[gi].range.clone();
                    let jg = fe.jacobian.columns(r.start, r.len()).clone_owned();
                    // a singular M(1) leaves the unscaled patch in place
                    let _ = patch.rescale_group(gi, kind, &jg, d, x);
                }
            }
        }
        Ok(())
    }

    fn build_randomizer(&self, patch: &PatchState, x: &CVector, t: f64, ops: &mut u64) -> Result<Randomizer> {
        match self.strategies.randomizer {
            RandomizerKind::Fixed => Ok(self.fixed.randomizer.clone().expect("checked in new")),
            kind => {
                let jg = self.jacobian_g(patch, x, t, ops)?;
                let n = jg.ncols();
                *ops += (jg.nrows() * n * n) as u64;
                randomize::adaptive_randomizer(kind, &jg)
            }
        }
    }

    fn imag_norm(&self, x: &CVector) -> f64 {
        let xn = self.hom.system.structure().phase_normalized(x);
        xn.iter().map(|z| z.im * z.im).sum::<f64>().sqrt()
    }

    fn cond_at(&self, state: &PathState) -> f64 {
        let mut ops = 0;
        StepContext::new(self.hom, &state.patch, &state.randomizer)
            .and_then(|ctx| ctx.evaluate(&state.x, state.t, false, &mut ops))
            .map(|e| linalg::cond2(&e.jac_x))
            .unwrap_or(f64::INFINITY)
    }

    /// Prepares the state at `t = 1` from a start point.
    pub fn start(&self, start: &CVector) -> Result<PathState> {
        let mut ops = 0;
        let mut x = start.clone();
        if x.len() != self.hom.system.num_vars() {
            return Err(Error::DimensionMismatch { expected: self.hom.system.num_vars(), got: x.len() });
        }
        let mut patch = match &self.fixed.patch {
            Some(vs) if self.strategies.patch.kind == PatchKind::Fixed => {
                PatchState::from_vectors(self.hom.system.structure(), vs.clone())?
            }
            _ => PatchState::adaptive(self.hom.system.structure(), self.strategies.patch.kind, &mut x)?,
        };
        self.refit_patch(&mut patch, &mut x, 1.0, &mut ops)?;
        let randomizer = self.build_randomizer(&patch, &x, 1.0, &mut ops)?;
        let imag = self.imag_norm(&x);
        Ok(PathState {
            t: 1.0,
            x,
            dt: self.config.dt_initial,
            consecutive_successes: 0,
            imag_history: vec![(1.0, imag)],
            step_count: 0,
            rejects: 0,
            op_count: ops,
            patch,
            randomizer,
        })
    }

    /// One predictor-corrector attempt. Returns whether it was accepted and
    /// the Newton iteration count.
    pub fn step(&self, state: &mut PathState) -> Result<(bool, usize)> {
        let stationary = self.hom.direction().norm() == 0.0;
        let t_new = if stationary { 0.0 } else { (state.t - state.dt).max(0.0) };
        let h = state.t - t_new;
        state.step_count += 1;
        let mut ops = 0;
        let attempt = (|| -> Result<Option<NewtonResult>> {
            let ctx = StepContext::new(self.hom, &state.patch, &state.randomizer)?;
            let pred = rk4_predict(&ctx, &state.x, state.t, h, &mut ops)?;
            let nr = newton_correct(&ctx, &pred, t_new, self.config.newton_max_iters, self.config.newton_tol, &mut ops)?;
            if !nr.converged {
                return Ok(None);
            }
            let res = ctx.residual(&nr.x, t_new, &mut ops)?;
            Ok((res <= self.config.residual_accept_tol * (1.0 + nr.x.norm())).then_some(nr))
        })();
        state.op_count += ops;
        match attempt {
            Ok(Some(nr)) => {
                let iters = nr.iterations;
                state.x = nr.x;
                state.t = t_new;
                state.consecutive_successes += 1;
                if state.consecutive_successes >= self.config.successes_to_double {
                    state.dt = (2.0 * state.dt).min(self.config.dt_max);
                    state.consecutive_successes = 0;
                }
                let imag = self.imag_norm(&state.x);
                state.imag_history.push((state.t, imag));
                let mut ops = 0;
                let mut x = state.x.clone();
                let mut patch = state.patch.clone();
                if self.refit_patch(&mut patch, &mut x, state.t, &mut ops).is_ok() {
                    state.patch = patch;
                    state.x = x;
                }
                if self.strategies.randomizer.is_adaptive() {
                    // keep the previous randomizer if the new point is numerically rank deficient
                    if let Ok(r) = self.build_randomizer(&state.patch, &state.x, state.t, &mut ops) {
                        state.randomizer = r;
                    }
                }
                state.op_count += ops;
                Ok((true, iters))
            }
            Ok(None) | Err(Error::Singular) | Err(Error::RankDeficient { .. }) => {
                state.dt /= 2.0;
                state.consecutive_successes = 0;
                state.rejects += 1;
                Ok((false, self.config.newton_max_iters))
            }
            Err(e) => Err(e),
        }
    }

    /// Newton at `t = 0` to the final tolerance; returns the relative residual.
    fn polish(&self, state: &mut PathState) -> Result<f64> {
        let mut ops = 0;
        let ctx = StepContext::new(self.hom, &state.patch, &state.randomizer)?;
        let mut x = state.x.clone();
        for _ in 0..self.config.final_max_iters {
            let e = ctx.evaluate(&x, 0.0, false, &mut ops)?;
            ops += linalg::lu_solve_ops(x.len());
            let dx = match linalg::solve(&e.jac_x, &(-e.value)) {
                Ok(dx) => dx,
                Err(_) => break,
            };
            x += &dx;
            if dx.norm() <= self.config.final_tol * (1.0 + x.norm()) {
                break;
            }
        }
        let res = ctx.residual(&x, 0.0, &mut ops)?;
        let res0 = ctx.residual(&state.x, 0.0, &mut ops)?;
        state.op_count += ops;
        // keep whichever iterate fits better; polishing a singular endpoint can drift
        if res <= res0 {
            state.x = x;
            Ok(res / (1.0 + state.x.norm()))
        } else {
            Ok(res0 / (1.0 + state.x.norm()))
        }
    }

    /// Tracks one path from `t = 1` to `t = 0`.
    pub fn track(&self, path_id: usize, start: &CVector) -> PathResult {
        let mut trace = Vec::new();
        let mut state = match self.start(start) {
            Ok(s) => s,
            Err(_) => {
                return PathResult {
                    path_id,
                    outcome: PathOutcome::StepSizeFailure { t: 1.0 },
                    steps: 0,
                    rejects: 0,
                    ops: 0,
                    trace,
                }
            }
        };
        let mut cond = if self.config.record_trace { self.cond_at(&state) } else { f64::NAN };
        let outcome = loop {
            if state.t <= 0.0 {
                break match self.polish(&mut state) {
                    Ok(res) if res <= self.config.residual_accept_tol => {
                        PathOutcome::Converged { endpoint: state.x.clone(), residual: res }
                    }
                    _ => PathOutcome::StepSizeFailure { t: 0.0 },
                };
            }
            if state.step_count >= self.config.max_steps {
                break PathOutcome::MaxStepsExceeded { t: state.t };
            }
            let dt_used = state.dt;
            let (accepted, iters) = match self.step(&mut state) {
                Ok(v) => v,
                Err(_) => break PathOutcome::StepSizeFailure { t: state.t },
            };
            if self.config.record_trace {
                if accepted {
                    cond = self.cond_at(&state);
                }
                trace.push(TraceRow {
                    path_id,
                    step: state.step_count,
                    t: state.t,
                    dt: dt_used,
                    accepted,
                    cond2: cond,
                    imag_norm: state.imag_history.last().map(|s| s.1).unwrap_or(0.0),
                    newton_iters: iters,
                });
            }
            if !accepted && state.dt < self.config.dt_min {
                break PathOutcome::StepSizeFailure { t: state.t };
            }
            if accepted && self.config.truncation_enabled && state.t > 0.0 {
                if let Truncation::Truncate { theta } =
                    truncation_test(&state.imag_history, self.config.truncation_t_start, self.config.truncation_angle)
                {
                    break PathOutcome::Truncated { t: state.t, theta };
                }
            }
        };
        PathResult {
            path_id,
            outcome,
            steps: state.step_count,
            rejects: state.rejects,
            ops: state.op_count,
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::{Poly, VarGroup, VarStructure};
    use crate::problems::{fixtures, twisted_cubic_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// `x^2 - p` on an affine line; `x(t) = sqrt(p(t))`.
    fn sqrt_family() -> ParamPolySystem {
        let s = VarStructure::new(vec![VarGroup::affine(1)], 1).unwrap();
        let x = Poly::var(2, 0);
        ParamPolySystem::new(s, vec![&(&x * &x) - &Poly::var(2, 1)]).unwrap()
    }

    fn identity_fixed(n: usize) -> FixedChoices {
        FixedChoices {
            patch: Some(vec![]),
            randomizer: Some(randomize::fixed_randomizer_from(&CMatrix::zeros(n, 0)).unwrap()),
        }
    }

    fn one(v: C64) -> CVector {
        CVector::from_vec(vec![v])
    }

    #[test]
    fn constant_path_is_predicted_exactly() {
        let f = sqrt_family();
        let hom = Homotopy::new(&f, one(c(4.0, 0.0)), one(c(4.0, 0.0))).unwrap();
        let fixed = identity_fixed(1);
        let patch = PatchState { groups: vec![] };
        let ctx = StepContext::new(&hom, &patch, fixed.randomizer.as_ref().unwrap()).unwrap();
        let mut ops = 0;
        let y = rk4_predict(&ctx, &one(c(2.0, 0.0)), 1.0, 0.1, &mut ops).unwrap();
        assert_eq!(y, one(c(2.0, 0.0)));
        assert!(ops > 0);
    }

    #[test]
    fn rk4_error_shrinks_about_sixteenfold() {
        let f = sqrt_family();
        // p(t) = 4 t + (1 - t) = 1 + 3 t
        let hom = Homotopy::new(&f, one(c(4.0, 0.0)), one(c(1.0, 0.0))).unwrap();
        let fixed = identity_fixed(1);
        let patch = PatchState { groups: vec![] };
        let ctx = StepContext::new(&hom, &patch, fixed.randomizer.as_ref().unwrap()).unwrap();
        let span: f64 = 0.2;
        let exact = (1.0 + 3.0 * (1.0 - span)).sqrt();
        let err = |steps: usize| {
            let mut x = one(c(2.0, 0.0));
            let h = span / steps as f64;
            let mut ops = 0;
            for k in 0..steps {
                x = rk4_predict(&ctx, &x, 1.0 - k as f64 * h, h, &mut ops).unwrap();
            }
            (x[0] - c(exact, 0.0)).norm()
        };
        let ratio = err(1) / err(2);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn newton_squares_the_error() {
        let f = sqrt_family();
        let hom = Homotopy::new(&f, one(c(2.0, 0.0)), one(c(2.0, 0.0))).unwrap();
        let fixed = identity_fixed(1);
        let patch = PatchState { groups: vec![] };
        let ctx = StepContext::new(&hom, &patch, fixed.randomizer.as_ref().unwrap()).unwrap();
        let root = 2f64.sqrt();
        let mut x = one(c(1.5, 0.0));
        let mut errs = vec![(x[0].re - root).abs()];
        let mut ops = 0;
        for _ in 0..3 {
            x = newton_correct(&ctx, &x, 0.5, 1, 1e-300, &mut ops).unwrap().x;
            errs.push((x[0].re - root).abs());
        }
        // e_{k+1} = e_k^2 / (2 x_k) for x^2 - 2
        for k in 0..2 {
            let predicted = errs[k] * errs[k] / (2.0 * (root + errs[k]));
            assert!((errs[k + 1] - predicted).abs() <= 1e-3 * predicted + 1e-16);
        }
        let at_root = newton_correct(&ctx, &one(c(root, 0.0)), 0.5, 3, 1e-9, &mut ops).unwrap();
        assert!(at_root.converged && at_root.iterations == 1);
        assert!((at_root.x[0].re - root).abs() < 1e-15);
    }

    #[test]
    fn newton_fails_far_from_root() {
        let f = sqrt_family();
        let hom = Homotopy::new(&f, one(c(1.0, 0.0)), one(c(1.0, 0.0))).unwrap();
        let fixed = identity_fixed(1);
        let patch = PatchState { groups: vec![] };
        let ctx = StepContext::new(&hom, &patch, fixed.randomizer.as_ref().unwrap()).unwrap();
        let mut ops = 0;
        let r = newton_correct(&ctx, &one(c(1e6, 1e6)), 0.5, 3, 1e-9, &mut ops).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn truncation_geometry() {
        // straight descent to the origin
        let h = [(0.25, 0.5), (0.2, 0.4), (0.1, 0.2)];
        assert_eq!(truncation_test(&h, 0.3, 5.0 * PI / 6.0), Truncation::Keep);
        assert!(truncation_angle((0.2, 0.4), (0.1, 0.2)) < 1e-7);
        // imaginary part growing while t shrinks
        let h = [(0.2, 0.5), (0.1, 1.0)];
        match truncation_test(&h, 0.3, 5.0 * PI / 6.0) {
            Truncation::Truncate { theta } => assert!(theta >= 5.0 * PI / 6.0),
            Truncation::Keep => panic!("expected truncation"),
        }
        // same shape above the start threshold
        let h = [(0.5, 0.5), (0.4, 1.0)];
        assert_eq!(truncation_test(&h, 0.3, 5.0 * PI / 6.0), Truncation::Keep);
        assert_eq!(truncation_test(&[(0.1, 1.0)], 0.3, 2.0), Truncation::Keep);
    }

    #[test]
    fn truncation_angle_matches_dot_product_oracle() {
        let (p1, p2) = ((0.2, 0.10), (0.1, 0.12));
        let a: [f64; 2] = [p2.0 - p1.0, p2.1 - p1.1];
        let b: [f64; 2] = [-p2.0, -p2.1];
        let cos = (a[0] * b[0] + a[1] * b[1]) / ((a[0] * a[0] + a[1] * a[1]).sqrt() * (b[0] * b[0] + b[1] * b[1]).sqrt());
        assert!((truncation_angle(p1, p2) - cos.acos()).abs() < 1e-14);
    }

    #[test]
    fn step_control_rules() {
        let f = sqrt_family();
        let hom = Homotopy::new(&f, one(c(4.0, 0.0)), one(c(1.0, 0.0))).unwrap();
        let fixed = identity_fixed(1);
        let mut cfg = TrackerConfig { dt_initial: 0.025, ..TrackerConfig::default() };
        let strategies = Strategies::new(PatchKind::Fixed, RandomizerKind::Fixed);
        let tr = Tracker::new(&hom, strategies, &fixed, &cfg).unwrap();
        let mut st = tr.start(&one(c(2.0, 0.0))).unwrap();
        for _ in 0..3 {
            assert!(tr.step(&mut st).unwrap().0);
        }
        assert_eq!(st.dt, 0.05);
        assert!((st.t - 0.925).abs() < 1e-15);

        // a huge step from a point near a branch point is rejected
        cfg.dt_initial = 1.0;
        cfg.dt_max = 1.0;
        let hom2 = Homotopy::new(&f, one(c(1.0, 0.0)), one(c(-1.0, 1e-3))).unwrap();
        let tr = Tracker::new(&hom2, strategies, &fixed, &cfg).unwrap();
        let mut st = tr.start(&one(c(1.0, 0.0))).unwrap();
        let (x0, t0) = (st.x.clone(), st.t);
        assert!(!tr.step(&mut st).unwrap().0);
        assert_eq!((st.dt, st.t), (0.5, t0));
        assert_eq!(st.x, x0);

        // near the end a step targets exactly t = 0
        let default_cfg = TrackerConfig::default();
        let tr = Tracker::new(&hom, strategies, &fixed, &default_cfg).unwrap();
        let mut st = tr.start(&one(c(2.0, 0.0))).unwrap();
        st.t = 0.05;
        st.x = one(c((1.0f64 + 0.15).sqrt(), 0.0));
        assert!(tr.step(&mut st).unwrap().0);
        assert_eq!(st.t, 0.0);
    }

    #[test]
    fn trivial_homotopy_takes_one_step() {
        let f = twisted_cubic_family();
        let (p_star, _) = fixtures::demo_parameters();
        let hom = Homotopy::new(&f, p_star.clone(), p_star).unwrap();
        let strategies = Strategies::new(PatchKind::Orthogonal, RandomizerKind::Pseudoinverse);
        let fixed = FixedChoices::default();
        let cfg = TrackerConfig::default();
        let tr = Tracker::new(&hom, strategies, &fixed, &cfg).unwrap();
        for (i, x) in fixtures::twisted_cubic_points().iter().enumerate() {
            let r = tr.track(i, x);
            assert_eq!(r.steps, 1);
            match r.outcome {
                PathOutcome::Converged { endpoint, .. } => {
                    assert!(crate::polysys::projective_distance(&endpoint, x) < 1e-12)
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn twisted_cubic_paths_converge_under_fixed_strategies() {
        let f = twisted_cubic_family();
        let (p_star, p_hat) = fixtures::demo_parameters();
        let hom = Homotopy::new(&f, p_star, p_hat.clone()).unwrap();
        let strategies = Strategies::new(PatchKind::Fixed, RandomizerKind::Fixed);
        let fixed = FixedChoices::draw(&f, &strategies, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let cfg = TrackerConfig { record_trace: true, ..TrackerConfig::default() };
        let tr = Tracker::new(&hom, strategies, &fixed, &cfg).unwrap();
        for (i, x) in fixtures::twisted_cubic_points().iter().enumerate() {
            let r = tr.track(i, x);
            let PathOutcome::Converged { endpoint, .. } = &r.outcome else { panic!("{:?}", r.outcome) };
            let v = f.evaluate(&f.structure().unit_representative(endpoint), &p_hat).unwrap();
            assert!(v.norm() < 1e-8);
            assert!(!r.trace.is_empty());
            assert!(r.trace.iter().all(|row| row.cond2.is_finite() && row.cond2 >= 1.0));
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig { dt_min: 1.0, ..TrackerConfig::default() };
        assert!(bad.validate().is_err());
    }
}
