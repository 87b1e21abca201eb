//! Command orchestration: single runs, parameter sweeps, GA searches and
//! potential-strength tables, with all their file outputs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{Command, RunSpec, Value};
use crate::error::{Error, Result};
use crate::field::make_ofw;
use crate::io::{fmt_f64, load_kernel_table, save_field, save_kernel_table, save_pgm, z_stem, CsvWriter};
use crate::metrics::{self, RunRecord};
use crate::optimizer::{display_value, evaluate, grid_scan, optimize, Scenario};
use crate::params::ghz_to_angular;
use crate::propagator::{kernel_table_for_grid, NonlocalOperator, SplitStep};
use crate::response::{kernel_cache_key, potential_strengths, KernelTable};

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Mismatch(_) => 2,
        Error::Divergence { .. } => 3,
        Error::Io(_) | Error::Format(_) => 4,
        _ => 1,
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Last metrics row of a single run.
    pub last_record: Option<RunRecord>,
    /// Best fitness of an optimisation.
    pub best_fitness: Option<f64>,
}

pub fn run_command(spec: &RunSpec) -> Result<Outcome> {
    fs::create_dir_all(&spec.output_dir)?;
    log::info!("{}", spec.banner());
    if let Some(w) = spec.grid.extent_warning(spec.physics.r0) {
        log::warn!("{w}");
    }
    match spec.command {
        Command::Run => run_single(spec, &spec.output_dir),
        Command::Sweep => run_sweep(spec),
        Command::Optimize => run_optimize(spec),
        Command::Potentials => run_potentials(spec),
    }
}

/// Loads the kernel table for `spec` from `<out>/cache`, computing and
/// storing it on a miss.
pub fn cached_kernel_table(spec: &RunSpec, cache_dir: &Path) -> Result<KernelTable> {
    let fresh = || kernel_table_for_grid(&spec.physics, &spec.grid, &spec.quadrature);
    let reach = spec.grid.extent_x().hypot(spec.grid.extent_y()).max(10.0 * spec.physics.blockade_radius());
    let key = kernel_cache_key(&spec.physics, reach, 256, spec.quadrature.rel_tol);
    let path = cache_dir.join(format!("kernel_{key}.bin"));
    if path.exists() {
        match load_kernel_table(&path) {
            Ok(t) => return Ok(t),
            Err(e) => log::warn!("ignoring unreadable kernel cache {}: {e}", path.display()),
        }
    }
    let table = fresh()?;
    fs::create_dir_all(cache_dir)?;
    save_kernel_table(&path, &table)?;
    Ok(table)
}

fn run_single(spec: &RunSpec, out: &Path) -> Result<Outcome> {
    let beam = spec.beam.ok_or_else(|| Error::Config("run needs beam.l1 and beam.l2".into()))?;
    let cfg = spec.propagation.clone().ok_or_else(|| Error::Config("run needs a propagation block".into()))?;
    fs::create_dir_all(out)?;
    let p = &spec.physics;
    let table = cached_kernel_table(spec, &spec.output_dir.join("cache"))?;
    let op = NonlocalOperator::with_part(&spec.grid, &table, p.kappa() * p.n_a, cfg.kernel_part)?;
    let mut stepper = SplitStep::new(&spec.grid, &cfg, p, op)?;

    let input = make_ofw(spec.grid, p, beam.l1, beam.l2);
    let steps = cfg.steps();
    let snapshot_steps: Vec<(usize, f64)> = spec.snapshots.iter().map(|&z| ((z / cfg.dz).round() as usize, z)).collect();
    let mut outcome = Outcome::default();
    let mut records = Vec::new();

    let mut field = input.clone();
    let mut result = Ok(());
    for n in 0..=steps {
        if n > 0 {
            if let Err(e) = stepper.step(&mut field) {
                result = Err(e);
                break;
            }
        }
        if n % cfg.record_every == 0 || n == steps {
            records.push(metrics::record(&field, &input, p.omega_p0)?);
        }
        for &(_, z) in snapshot_steps.iter().filter(|(s, _)| *s == n) {
            let stem = z_stem(z);
            let snap_dir = out.join("snapshots");
            fs::create_dir_all(&snap_dir)?;
            let path = snap_dir.join(format!("{stem}.bin"));
            save_field(&path, &field)?;
            outcome.files.push(path);
            if spec.images {
                let img_dir = out.join("images");
                fs::create_dir_all(&img_dir)?;
                let path = img_dir.join(format!("{stem}.pgm"));
                save_pgm(&path, &field)?;
                outcome.files.push(path);
            }
        }
    }

    let path = out.join("metrics.csv");
    write_records(&path, &records)?;
    outcome.files.push(path);
    outcome.last_record = records.last().copied();
    if let Some(r) = &outcome.last_record {
        log::info!("z = {:.1} um: J = {:.6}, power = {:.6e}, peak/I_p0 = {:.4}", r.z, r.j, r.power, r.peak_intensity);
    }
    result.map(|_| outcome)
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let header: Vec<&str> = RunRecord::CSV_HEADER.split(',').collect();
    let mut w = CsvWriter::new(BufWriter::new(File::create(path)?), &header)?;
    for r in records {
        w.float_row(&[r.z, r.j, r.power, r.peak_intensity, r.rms_radius])?;
    }
    w.finish()?;
    Ok(())
}

fn run_sweep(spec: &RunSpec) -> Result<Outcome> {
    let sweep = spec.sweep.clone().ok_or_else(|| Error::Config("sweep needs sweep.key and sweep.values".into()))?;
    let short = sweep.key.rsplit('.').next().unwrap_or(&sweep.key).to_string();
    let specs: Vec<(PathBuf, RunSpec)> = sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut s = spec.with_value(&sweep.key, Value::Number(v))?;
            s.command = Command::Run;
            let dir = spec.output_dir.join(format!("{i:03}_{short}_{v}"));
            s.output_dir = spec.output_dir.clone();
            Ok((dir, s))
        })
        .collect::<Result<_>>()?;
    // fill the kernel cache up front so parallel runs only read it
    for (_, s) in &specs {
        cached_kernel_table(s, &spec.output_dir.join("cache"))?;
    }
    let outcomes: Vec<Result<Outcome>> = specs.par_iter().map(|(dir, s)| run_single(s, dir)).collect();

    let mut total = Outcome::default();
    let path = spec.output_dir.join("sweep.csv");
    let mut w = CsvWriter::new(BufWriter::new(File::create(&path)?), &[&sweep.key, "status", "z_um", "J", "power", "peak_over_Ip0", "rms_radius_um"])?;
    let mut first_error = None;
    for (v, o) in sweep.values.iter().zip(outcomes) {
        match o {
            Ok(o) => {
                let r = o.last_record.expect("runs record their final step");
                let mut cells = vec![fmt_f64(*v), "ok".into()];
                cells.extend([r.z, r.j, r.power, r.peak_intensity, r.rms_radius].iter().map(|&x| fmt_f64(x)));
                w.row(&cells)?;
                total.files.extend(o.files);
            }
            Err(e) => {
                log::warn!("{} = {v}: {e}", sweep.key);
                let status = if matches!(e, Error::Divergence { .. }) { "diverged" } else { "failed" };
                let mut cells = vec![fmt_f64(*v), status.into()];
                cells.extend(std::iter::repeat_n("nan".to_string(), 5));
                w.row(&cells)?;
                if !matches!(e, Error::Divergence { .. }) && first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    w.finish()?;
    total.files.push(path);
    match first_error {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

pub fn scenario(spec: &RunSpec) -> Result<Scenario> {
    let beam = spec.beam.ok_or_else(|| Error::Config("optimize needs beam.l1 and beam.l2".into()))?;
    let cfg = spec.propagation.clone().ok_or_else(|| Error::Config("optimize needs a propagation block".into()))?;
    let opt = spec.optimizer.as_ref().ok_or_else(|| Error::Config("optimize needs an optimizer block".into()))?;
    Ok(Scenario {
        base: spec.physics.clone(),
        l1: beam.l1,
        l2: beam.l2,
        grid: spec.grid,
        z_target: opt.z_target,
        dz: cfg.dz,
        mode: cfg.mode,
        absorbing_boundary: cfg.absorbing_boundary,
        kernel_part: cfg.kernel_part,
        quadrature: spec.quadrature,
    })
}

fn run_optimize(spec: &RunSpec) -> Result<Outcome> {
    let opt = spec.optimizer.as_ref().ok_or_else(|| Error::Config("optimize needs an optimizer block".into()))?;
    let sc = scenario(spec)?;
    let result = optimize(&opt.space, &opt.ga, &sc)?;
    let mut outcome = Outcome { best_fitness: Some(result.best_fitness), ..Default::default() };

    let names: Vec<String> = opt.space.bounds.iter().map(|b| display_value(b.parameter, 0.0).0).collect();
    let mut header = vec!["generation", "best_J", "mean_J", "failed"];
    header.extend(names.iter().map(String::as_str));
    let path = spec.output_dir.join("optimization_history.csv");
    let mut w = CsvWriter::new(BufWriter::new(File::create(&path)?), &header)?;
    for g in &result.history {
        let mut cells = vec![g.generation.to_string(), fmt_f64(g.best_fitness), fmt_f64(g.mean_fitness), g.failed.to_string()];
        cells.extend(opt.space.bounds.iter().zip(&g.best_candidate).map(|(b, &v)| fmt_f64(display_value(b.parameter, v).1)));
        w.row(&cells)?;
    }
    w.finish()?;
    outcome.files.push(path);

    let mut fragment = format!("# best J = {} at z = {} um after {} evaluations\n", fmt_f64(result.best_fitness), opt.z_target, result.evaluations);
    for (b, &v) in opt.space.bounds.iter().zip(&result.best_candidate) {
        let key = match b.parameter {
            crate::optimizer::Parameter::Delta => "physics.delta_over_2pi_ghz",
            crate::optimizer::Parameter::Density => "physics.n_a_per_um3",
            crate::optimizer::Parameter::ProbeRabi => "physics.omega_p0_over_2pi_mhz",
            crate::optimizer::Parameter::CouplingRabi => "physics.omega_c_over_2pi_mhz",
        };
        fragment.push_str(&format!("{key} = {}\n", fmt_f64(display_value(b.parameter, v).1)));
    }
    if opt.grid_scan > 0 {
        let (best, j) = grid_scan(&opt.space, opt.grid_scan, |c| evaluate(c, &opt.space, &sc)).swap_remove(0);
        let shown: Vec<String> = opt.space.bounds.iter().zip(&best).map(|(b, &v)| format!("{} = {}", display_value(b.parameter, v).0, fmt_f64(display_value(b.parameter, v).1))).collect();
        fragment.push_str(&format!("# grid scan {n}x{n}: best J = {} at {}\n", fmt_f64(j), shown.join(", "), n = opt.grid_scan));
    }
    let path = spec.output_dir.join("best_candidate.conf");
    fs::write(&path, fragment)?;
    outcome.files.push(path);
    log::info!("best J = {:.6} after {} evaluations", result.best_fitness, result.evaluations);
    Ok(outcome)
}

fn run_potentials(spec: &RunSpec) -> Result<Outcome> {
    let deltas = spec.potentials.detunings_over_2pi_ghz();
    let rows: Vec<Result<[f64; 7]>> = deltas
        .par_iter()
        .map(|&d| {
            let p = crate::params::PhysicalParams { delta: ghz_to_angular(d), ..spec.physics.clone() };
            let k = potential_strengths(&p, &spec.quadrature)?;
            Ok([d, k.k1.re, k.k1.im, k.k2.re, k.k2.im, k.k3.re, k.k3.im])
        })
        .collect();
    let path = spec.output_dir.join("potentials.csv");
    let mut w = CsvWriter::new(
        BufWriter::new(File::create(&path)?),
        &["delta_over_2pi_ghz", "re_k1", "im_k1", "re_k2", "im_k2", "re_k3", "im_k3"],
    )?;
    for row in rows {
        w.float_row(&row?)?;
    }
    w.finish()?;
    Ok(Outcome { files: vec![path], ..Default::default() })
}
