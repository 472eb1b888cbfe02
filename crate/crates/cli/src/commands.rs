use std::fmt;
use std::fs;
use std::path::Path;

use adaptrack::engine::{self, default_combos, fixed_from_parts, param_solve_with, BenchRow};
use adaptrack::io::{self, InstanceFile, StartSetFile};
use adaptrack::problems::{fixtures, synth_instance};
use adaptrack::tracker::PathResult;
use adaptrack::{
    ab_initio, param_solve, AbInitio, AbInitioConfig, CVector, ParamPolySystem, PatchKind, PathOutcome, ProblemKind,
    RandomizerKind, SolveConfig, SolveReport, StartSet, Strategies, TrackerConfig,
};
use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{AbInitioArgs, BenchArgs, DemoArgs, InstanceArgs, ProblemOpts, SolveArgs, Toggle};

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

/// A solve finished but did not produce what was asked for.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<NumericalFailure>().is_some() {
        return EXIT_NUMERICAL;
    }
    match e.downcast_ref::<adaptrack::Error>() {
        Some(adaptrack::Error::DeficientCount { .. })
        | Some(adaptrack::Error::Singular)
        | Some(adaptrack::Error::RankDeficient { .. }) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_system(opts: &ProblemOpts) -> Result<(ParamPolySystem, Option<ProblemKind>)> {
    match (opts.problem.kind(), &opts.system) {
        (Some(kind), None) => Ok((kind.family(), Some(kind))),
        (None, Some(path)) => Ok((ParamPolySystem::from_json(&read(path)?)?, None)),
        (None, None) => bail!("--problem file needs --system"),
        (Some(kind), Some(_)) => bail!("--system only applies to --problem file, not {kind}"),
    }
}

fn vision_kind(opts: &ProblemOpts) -> Result<ProblemKind> {
    match opts.problem.kind() {
        Some(k) if k.correspondence_count().is_some() => Ok(k),
        _ => bail!("synthetic instances exist only for five-point and six-point"),
    }
}

fn run_ab_initio(system: &ParamPolySystem, kind: Option<ProblemKind>, seed: u64) -> Result<AbInitio> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ai = ab_initio(system, &AbInitioConfig::default(), &mut rng)?;
    if let Some(k) = kind {
        ai.start.check_count(k.expected_roots())?;
    }
    Ok(ai)
}

fn demo_start() -> StartSet {
    let (p_star, _) = fixtures::demo_parameters();
    StartSet { p_star, residuals: vec![0.0; 3], points: fixtures::twisted_cubic_points() }
}

fn resolve_start(
    opts: &ProblemOpts,
    system: &ParamPolySystem,
    kind: Option<ProblemKind>,
    path: Option<&Path>,
) -> Result<StartSet> {
    if let Some(path) = path {
        let file = StartSetFile::from_json(&read(path)?)?;
        if let (Some(k), Some(name)) = (kind, &file.problem) {
            ensure!(name == k.name(), "start set is for {name}, not {k}");
        }
        return Ok(file.to_start_set(system.structure())?);
    }
    if kind == Some(ProblemKind::TwistedCubic) {
        return Ok(demo_start());
    }
    eprintln!("no --start given; running the ab initio solve with seed {}", opts.seed);
    Ok(run_ab_initio(system, kind, opts.seed)?.start)
}

/// Target parameters plus the ground truth when known.
fn resolve_target(
    opts: &ProblemOpts,
    system: &ParamPolySystem,
    kind: Option<ProblemKind>,
    path: Option<&Path>,
) -> Result<(CVector, Option<CVector>)> {
    if let Some(path) = path {
        let inst = InstanceFile::from_json(&read(path)?)?;
        let truth = inst.ground_truth.as_deref().map(io::from_pairs);
        return match kind {
            Some(k) => {
                ensure!(inst.kind()? == k, "instance is for {}, not {k}", inst.problem);
                Ok((inst.target()?, truth))
            }
            None => {
                let params = inst.params.as_deref().context("instance for a system file needs `params`")?;
                ensure!(
                    params.len() == system.param_count(),
                    "instance has {} parameters, the system takes {}",
                    params.len(),
                    system.param_count()
                );
                Ok((io::from_pairs(params), truth))
            }
        };
    }
    match kind {
        Some(ProblemKind::TwistedCubic) => Ok((fixtures::demo_parameters().1, None)),
        Some(k) => {
            let inst = synth_instance(k, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
            eprintln!("no --instance given; drew a synthetic {k} instance with seed {}", opts.seed);
            Ok((inst.correspondences.params(), Some(inst.ground_truth())))
        }
        None => bail!("--problem file needs --instance"),
    }
}

fn write_trace<'a>(path: &Path, blocks: impl IntoIterator<Item = (String, &'a [PathResult])>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["strategy", "path_id", "step", "t", "dt", "accepted", "cond2", "imag_norm", "newton_iters"])?;
    for (label, paths) in blocks {
        for row in paths.iter().flat_map(|p| &p.trace) {
            w.write_record([
                label.clone(),
                row.path_id.to_string(),
                row.step.to_string(),
                row.t.to_string(),
                row.dt.to_string(),
                row.accepted.to_string(),
                row.cond2.to_string(),
                row.imag_norm.to_string(),
                row.newton_iters.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn abinitio(args: &AbInitioArgs) -> Result<()> {
    let (system, kind) = load_system(&args.problem)?;
    let ai = run_ab_initio(&system, kind, args.problem.seed)?;
    let worst = ai.start.residuals.iter().copied().fold(0.0, f64::max);
    println!("{} start points", ai.start.len());
    println!(
        "  {} paths of degrees {:?}: {} converged, {} at infinity, {} extraneous, {} singular, {} duplicates",
        ai.paths, ai.degrees, ai.converged, ai.at_infinity, ai.extraneous, ai.singular, ai.duplicates
    );
    println!("  max residual {worst:.2e}, {:.2} s", ai.wall_seconds);
    if let Some(out) = &args.out {
        write(out, &StartSetFile::new(kind, system.structure(), &ai.start).to_json())?;
    }
    Ok(())
}

fn label(report: &SolveReport) -> String {
    let mut s = report.strategies.label();
    if report.truncation {
        s.push_str("/ET");
    }
    s
}

fn summarize(report: &SolveReport) -> String {
    let real = report.real_solutions().count();
    format!(
        "{}: {} paths, {} converged, {} real, {} nonreal, {} truncated, {} failed, {} extraneous, {} duplicates; {:.2} steps/path, {:.3} s",
        label(report),
        report.paths.len(),
        report.converged,
        real,
        report.solutions.len() - real,
        report.truncated,
        report.failed,
        report.extraneous,
        report.duplicates,
        report.avg_steps,
        report.wall_seconds
    )
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let (system, kind) = load_system(&args.problem)?;
    let (target, truth) = resolve_target(&args.problem, &system, kind, args.instance.as_deref())?;
    let start = resolve_start(&args.problem, &system, kind, args.start.as_deref())?;
    let s = &args.strategy;
    let mut strategies = Strategies::new(s.patch.into(), s.randomizer.into());
    strategies.patch.optimal_scaling = s.optimal_scaling;
    let config = SolveConfig {
        tracker: TrackerConfig {
            truncation_enabled: s.truncate == Toggle::On,
            record_trace: args.trace.is_some(),
            ..TrackerConfig::default()
        },
        seed: args.problem.seed,
        ..SolveConfig::default()
    };
    let report = param_solve(&system, &start, &target, strategies, &config)?;
    println!("{}", summarize(&report));
    if let Some(truth) = truth {
        let d = report
            .real_solutions()
            .map(|sol| system.structure().distance(&sol.point, &truth))
            .fold(f64::INFINITY, f64::min);
        let found = d <= config.dedup_tol;
        println!("  ground truth {} (nearest real solution at {d:.2e})", if found { "recovered" } else { "missed" });
    }
    if let Some(out) = &args.out {
        write(out, &io::solutions_json(&io::solution_records(system.structure(), &report)))?;
    }
    if let Some(path) = &args.trace {
        write_trace(path, [(label(&report), report.paths.as_slice())])?;
    }
    if args.strict && report.failed > 0 {
        let first = report.paths.iter().find(|p| {
            matches!(p.outcome, PathOutcome::StepSizeFailure { .. } | PathOutcome::MaxStepsExceeded { .. })
        });
        let detail = first.map(|p| format!(" (path {} ended with {})", p.path_id, p.outcome.name())).unwrap_or_default();
        return Err(NumericalFailure(format!("{} path(s) failed{detail}", report.failed)).into());
    }
    Ok(())
}

fn bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "strategy",
        "instances",
        "paths",
        "avg_steps_per_path",
        "avg_ops_per_instance",
        "avg_seconds_per_instance",
        "truncated",
        "failed",
        "real_found",
        "real_baseline",
        "recall",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.instances.to_string(),
            r.paths.to_string(),
            format!("{:.4}", r.avg_steps_per_path),
            format!("{:.1}", r.avg_ops_per_instance),
            format!("{:.6}", r.avg_seconds_per_instance),
            r.truncated.to_string(),
            r.failed.to_string(),
            r.real_found.to_string(),
            r.real_baseline.to_string(),
            format!("{:.4}", r.recall),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    ensure!(args.instances >= 1, "--instances must be at least 1");
    let kind = vision_kind(&args.problem)?;
    let system = kind.family();
    let start = resolve_start(&args.problem, &system, Some(kind), args.start.as_deref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.problem.seed);
    let targets = (0..args.instances)
        .map(|_| Ok(synth_instance(kind, &mut rng)?.correspondences.params()))
        .collect::<Result<Vec<_>>>()?;
    let config = SolveConfig { seed: args.problem.seed, ..SolveConfig::default() };
    let rows = engine::bench(&system, &start, &targets, &default_combos(), &config)?;
    println!(
        "{:<12} {:>10} {:>14} {:>12} {:>9} {:>7} {:>9}",
        "strategy", "steps/path", "ops/instance", "s/instance", "truncated", "failed", "recall"
    );
    for r in &rows {
        println!(
            "{:<12} {:>10.2} {:>14.3e} {:>12.5} {:>9} {:>7} {:>5}/{:<3}",
            r.label,
            r.avg_steps_per_path,
            r.avg_ops_per_instance,
            r.avg_seconds_per_instance,
            r.truncated,
            r.failed,
            r.real_found,
            r.real_baseline
        );
    }
    if let Some(out) = &args.out {
        bench_csv(out, &rows)?;
    }
    Ok(())
}

pub fn instance(args: &InstanceArgs) -> Result<()> {
    let kind = vision_kind(&args.problem)?;
    let inst = synth_instance(kind, &mut ChaCha8Rng::seed_from_u64(args.problem.seed))?;
    let json = InstanceFile::from_synthetic(kind, &inst).to_json();
    match &args.out {
        Some(out) => write(out, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

pub fn demo(args: &DemoArgs) -> Result<()> {
    let system = ProblemKind::TwistedCubic.family();
    let start = demo_start();
    let (_, target) = fixtures::demo_parameters();
    let fixed = fixed_from_parts(Some(vec![fixtures::demo_fixed_patch()]), Some(&fixtures::demo_fixed_q()))?;
    let config = SolveConfig {
        tracker: TrackerConfig { record_trace: true, ..TrackerConfig::default() },
        ..SolveConfig::default()
    };
    let mut reports = Vec::new();
    for patch in [PatchKind::Fixed, PatchKind::Orthogonal, PatchKind::CoordinateWise] {
        for randomizer in [RandomizerKind::Fixed, RandomizerKind::Pseudoinverse, RandomizerKind::LeverageScore] {
            let mut strategies = Strategies::new(patch, randomizer);
            strategies.patch.optimal_scaling = args.optimal_scaling;
            let report = param_solve_with(&system, &start, &target, strategies, &fixed, &config)?;
            let peak = report.paths.iter().flat_map(|p| p.trace.iter().map(|r| r.cond2)).fold(0.0, f64::max);
            println!(
                "{:<10} {} of {} converged, {:.1} steps/path, max cond2 {:.1}",
                report.strategies.label(),
                report.converged,
                report.paths.len(),
                report.avg_steps,
                peak
            );
            reports.push(report);
        }
    }
    println!("endpoints:");
    for sol in &reports[0].solutions {
        let coords: Vec<String> = sol.point.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
        println!("  [{}]", coords.join(", "));
    }
    if let Some(path) = &args.trace {
        write_trace(path, reports.iter().map(|r| (r.strategies.label(), r.paths.as_slice())))?;
    }
    if reports.iter().any(|r| r.converged != r.paths.len()) {
        return Err(NumericalFailure("a demo path failed".into()).into());
    }
    Ok(())
}
