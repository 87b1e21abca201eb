//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Long propagations (criteria 6 and 7) take tens of minutes on one core.

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use num_complex::Complex64;
use solitonlab::cli::run_command;
use solitonlab::config::parse_config;
use solitonlab::field::{make_ofw, ComplexField, Grid};
use solitonlab::metrics::beam_stats;
use solitonlab::optimizer::{
    evaluate, evaluate_params, grid_scan, optimize_two_stage, refine, Bound, GaConfig, Parameter, Scenario, SearchSpace,
};
use solitonlab::params::{ghz_to_angular, mhz_to_angular};
use solitonlab::propagator::{AbsorbingBoundary, KernelPart, Mode, NonlocalOperator, PropagationConfig, SplitStep};
use solitonlab::quadrature::QuadratureOptions;
use solitonlab::{fidelity, nonlocal_kernel, potential_strengths, KernelForm, PhysicalParams};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn strontium() -> PhysicalParams {
    PhysicalParams::default()
}

fn with(delta_ghz: f64, n_a: f64) -> PhysicalParams {
    PhysicalParams { delta: ghz_to_angular(delta_ghz), n_a, ..strontium() }
}

struct Run {
    j: f64,
    peak0: f64,
    peak: f64,
}

/// Propagates the (l1, l2) superposition to `z` with the default step,
/// absorbing edges and the full complex kernel.
fn propagate(p: &PhysicalParams, l1: i32, l2: i32, grid: Grid, z: f64) -> Result<Run, String> {
    let cfg = PropagationConfig { record_every: usize::MAX, ..PropagationConfig::new(p, z) }.fitted();
    let mut s = SplitStep::for_params(&grid, &cfg, p, &QuadratureOptions::default()).map_err(|e| e.to_string())?;
    let u0 = make_ofw(grid, p, l1, l2);
    let mut u = u0.clone();
    for _ in 0..cfg.steps() {
        s.step(&mut u).map_err(|e| e.to_string())?;
    }
    let peak0 = beam_stats(&u0, p.omega_p0).map_err(|e| e.to_string())?.peak_intensity;
    let peak = beam_stats(&u, p.omega_p0).map_err(|e| e.to_string())?.peak_intensity;
    Ok(Run { j: fidelity(&u, &u0).map_err(|e| e.to_string())?, peak0, peak })
}

fn diffraction_length() -> Verdict {
    let l = strontium().derive().unwrap().l_diff;
    let rel = (l - 122.665).abs() / 122.665;
    verdict(rel < 1e-4, format!("l_diff = {l:.4} um (rel {rel:.1e})"))
}

fn potential_hierarchy() -> Verdict {
    let opts = QuadratureOptions::default();
    let mut worst = f64::INFINITY;
    for i in 0..61 {
        let d = -3.0 + 0.1 * i as f64;
        let k = potential_strengths(&with(d, 2.0), &opts).unwrap();
        worst = worst.min(k.k3.norm() / k.k1.norm().max(k.k2.norm()));
    }
    let re_k3 = potential_strengths(&strontium(), &opts).unwrap().k3.re;
    verdict(
        worst >= 10.0 && re_k3 < 0.0,
        format!("min |K3|/max(|K1|,|K2|) = {worst:.3e}, Re K3(-2 GHz) = {re_k3:.4e}"),
    )
}

/// Prefactor, B, D₀ and the sign in front of iVB, from the raw parameters.
fn kernel_constants(p: &PhysicalParams) -> (Complex64, Complex64, Complex64, f64) {
    let i = Complex64::i();
    let gp = Complex64::new(p.gamma_e, -2.0 * p.delta);
    let oc2 = p.omega_c * p.omega_c;
    let gr = p.gamma_r;
    let printed = 256.0 * (gp + gr) * oc2 * oc2 / ((4.0 * i * oc2 - gp * gr) * (4.0 * oc2 + gp * gr).norm_sqr());
    let b = 4.0 * oc2 - gp * (gp + gr);
    let d0 = 4.0 * gp * oc2 + gr * b;
    match p.kernel_form {
        KernelForm::Printed => (printed, b, d0, 1.0),
        KernelForm::Dispersive => (-i * printed, b, d0, -1.0),
    }
}

/// 10⁶-interval trapezoid over z′ = R tan θ.
fn brute_kernel(p: &PhysicalParams, radius: f64) -> Complex64 {
    let (pref, b, d0, sign) = kernel_constants(p);
    let n = 1_000_000;
    let h = PI / n as f64;
    let mut sum = Complex64::default();
    for k in 1..n {
        let c = (-0.5 * PI + k as f64 * h).cos();
        let s2 = radius * radius / (c * c);
        let v = p.c6 / (s2 * s2 * s2);
        sum += v / (d0 + sign * Complex64::i() * v * b) * radius / (c * c);
    }
    pref * sum * h
}

fn kernel_correctness() -> Verdict {
    let opts = QuadratureOptions::default();
    let mut worst: f64 = 0.0;
    let mut tail_err: f64 = 0.0;
    for form in [KernelForm::Dispersive, KernelForm::Printed] {
        let p = PhysicalParams { kernel_form: form, ..strontium() };
        let rb = p.blockade_radius();
        for m in [0.5, 1.0, 2.0] {
            let got = nonlocal_kernel(&p, m * rb, &opts).unwrap();
            let want = brute_kernel(&p, m * rb);
            worst = worst.max((got - want).norm() / want.norm());
        }
        let (pref, _, d0, _) = kernel_constants(&p);
        let r = 20.0 * rb;
        let tail = pref * p.c6 * 3.0 * PI / (8.0 * d0 * r.powi(5));
        let got = nonlocal_kernel(&p, r, &opts).unwrap();
        tail_err = tail_err.max((got - tail).norm() / tail.norm());
    }
    verdict(
        worst < 1e-6 && tail_err < 1e-3,
        format!("max rel vs trapezoid {worst:.2e}, R^-5 tail rel {tail_err:.2e}"),
    )
}

fn solver_validation() -> Verdict {
    let p = strontium();
    let l_diff = p.derive().unwrap().l_diff;
    let step_cfg = |dz: f64, part: KernelPart| PropagationConfig {
        dz,
        z_end: 0.0,
        mode: Mode::Reduced,
        record_every: 1,
        absorbing_boundary: None,
        kernel_part: part,
    };

    // free Gaussian
    let grid = Grid::square(256, 200.0).unwrap();
    let mut free = SplitStep::new(&grid, &step_cfg(l_diff / 50.0, KernelPart::Complex), &p, NonlocalOperator::zero(&grid)).unwrap();
    let mut f = ComplexField::from_fn(grid, |x, y| Complex64::new((-(x * x + y * y) / (p.r0 * p.r0)).exp(), 0.0));
    let centre = grid.index(128, 128);
    let mut fresnel: f64 = 0.0;
    for _ in 0..200 {
        free.step(&mut f).unwrap();
        let expected = 1.0 / (1.0 + (2.0 * f.z / l_diff).powi(2));
        fresnel = fresnel.max((f.data[centre].norm_sqr() - expected).abs() / expected);
    }

    // unitarity with Re(kernel) only
    let strong = PhysicalParams { kappa_override: Some(60.0), ..p.clone() };
    let grid = Grid::square(256, 48.0).unwrap();
    let opts = QuadratureOptions::default();
    let c = PropagationConfig { z_end: 400.0, ..step_cfg(l_diff / 200.0, KernelPart::RealOnly) };
    let mut s = SplitStep::for_params(&grid, &c, &strong, &opts).unwrap();
    let u0 = make_ofw(grid, &strong, 2, -2);
    let mut u = u0.clone();
    for _ in 0..400 {
        s.step(&mut u).unwrap();
    }
    let drift = (u.power() - u0.power()).abs() / u0.power();

    // order of the full complex scheme
    let run = |n: usize| {
        let c = step_cfg(120.0 / n as f64, KernelPart::Complex);
        let mut s = SplitStep::for_params(&grid, &c, &strong, &opts).unwrap();
        let mut u = u0.clone();
        for _ in 0..n {
            s.step(&mut u).unwrap();
        }
        u
    };
    let (a, b, c) = (run(20), run(40), run(80));
    let diff = |x: &ComplexField, y: &ComplexField| x.data.iter().zip(&y.data).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let ratio = diff(&a, &b) / diff(&b, &c);

    verdict(
        fresnel < 1e-6 && drift < 1e-10 && (3.0..=5.0).contains(&ratio),
        format!("Fresnel rel {fresnel:.2e}, power drift {drift:.2e}, Strang ratio {ratio:.3}"),
    )
}

fn wheel_ordering() -> Verdict {
    let grid = Grid::default_for(3.0, 3);
    let z = 400.0;
    let cases = [("OFW -2 GHz", -2.0, 2, -2), ("OFW +2 GHz", 2.0, 2, -2), ("(2, 2) -2 GHz", -2.0, 2, 2), ("(2, -3) -2 GHz", -2.0, 2, -3)];
    let runs: Vec<Result<Run, String>> = cases.iter().map(|&(_, d, l1, l2)| propagate(&with(d, 2.0), l1, l2, grid, z)).collect();
    let shown: Vec<String> = cases
        .iter()
        .zip(&runs)
        .map(|((name, ..), r)| match r {
            Ok(r) => format!("J({name}) = {:.4}", r.j),
            Err(e) => format!("{name}: {e}"),
        })
        .collect();
    let verdict_line = |pass: bool, extra: String| verdict(pass, format!("{}{extra}", shown.join(", ")));
    match (&runs[0], &runs[1], &runs[2], &runs[3]) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => {
            let growth = d.peak / d.peak0;
            verdict_line(a.j > b.j && b.j > c.j && growth > 1.5, format!(", (2, -3) peak growth {growth:.3}"))
        }
        _ => verdict_line(false, String::new()),
    }
}

fn long_distance_contrast() -> Verdict {
    let z = 20_000.0;
    let stable = with(-2.19617, 1.4748);
    let unstable = with(-2.0, 2.0);
    let j_of = |p: &PhysicalParams, grid: Grid| propagate(p, 2, -2, grid, z).map(|r| r.j).unwrap_or(0.0);
    let contrast = |scale: f64, grid: Grid| -> (f64, Option<f64>) {
        let scaled = |p: &PhysicalParams| PhysicalParams { kappa_override: Some(scale * p.kappa()), ..p.clone() };
        let j_stable = j_of(&scaled(&stable), grid);
        // the unstable case only matters once the stable one holds
        let j_unstable = (j_stable >= 0.9).then(|| j_of(&scaled(&unstable), grid));
        (j_stable, j_unstable)
    };
    let holds = |(j_stable, j_unstable): (f64, Option<f64>)| j_stable >= 0.9 && j_unstable.is_some_and(|j| j <= 0.1);
    let show = |(j_stable, j_unstable): (f64, Option<f64>)| match j_unstable {
        Some(j) => format!("J(stable) = {j_stable:.4}, J(unstable) = {j:.4}"),
        None => format!("J(stable) = {j_stable:.4}"),
    };

    let derived = contrast(1.0, Grid::default_for(3.0, 3));
    if holds(derived) {
        return verdict(true, format!("derived kappa: {}", show(derived)));
    }
    let mut lines = vec![format!("derived kappa (256^2): {}", show(derived))];
    let coarse = Grid::square(128, 48.0).unwrap();
    let mut found = None;
    for scale in [0.5, 0.75, 1.25, 1.5] {
        let c = contrast(scale, coarse);
        lines.push(format!("{scale}x (128^2): {}", show(c)));
        if holds(c) && found.is_none() {
            found = Some(scale);
        }
    }
    let tail = match found {
        Some(s) => format!("contrast holds at kappa = {s} x derived"),
        None => "no kappa within +-50% gives the contrast".into(),
    };
    verdict(found.is_some(), format!("{}; {tail}", lines.join("; ")))
}

fn optimizer_efficacy() -> Verdict {
    let base = strontium();
    let l_diff = base.derive().unwrap().l_diff;
    let scenario = |n: usize, dz: f64| Scenario {
        base: base.clone(),
        l1: 2,
        l2: -2,
        grid: Grid::square(n, 48.0).unwrap(),
        z_target: 5000.0,
        dz,
        mode: Mode::Reduced,
        absorbing_boundary: Some(AbsorbingBoundary::default()),
        kernel_part: KernelPart::Complex,
        quadrature: QuadratureOptions::default(),
    };
    let coarse = scenario(64, l_diff / 25.0);
    let fine = scenario(128, l_diff / 100.0);
    let space = SearchSpace::new(vec![
        Bound { parameter: Parameter::Delta, lower: ghz_to_angular(-3.0), upper: ghz_to_angular(-0.5) },
        Bound { parameter: Parameter::Density, lower: 0.5, upper: 2.5 },
    ])
    .unwrap();
    let ga = GaConfig { seed: 1, ..GaConfig::default() };
    let top_k = 4;

    let baseline = evaluate_params(&with(-2.0, 2.0), &fine).fitness;
    let (result, best, j_ga) = match optimize_two_stage(&space, &ga, &coarse, &fine, top_k) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("optimizer failed: {e}")),
    };
    let scanned = grid_scan(&space, 8, |c| evaluate(c, &space, &coarse));
    let (_, j_scan) = refine(&scanned, top_k, |c| evaluate(c, &space, &fine)).expect("64 points");
    let p = space.apply(&base, &best);
    verdict(
        j_ga >= baseline + 0.2 && j_ga >= j_scan - 0.02,
        format!(
            "GA J = {j_ga:.4} at delta/2pi = {:.4} GHz, N_a = {:.4} um^-3 ({} evaluations); unstable-point J = {baseline:.4}; 8x8 scan J = {j_scan:.4}",
            solitonlab::params::angular_to_ghz(p.delta),
            p.n_a,
            result.evaluations
        ),
    )
}

fn higher_order_wheel() -> Verdict {
    let gamma_e = mhz_to_angular(16.0);
    let p = PhysicalParams {
        omega_c: 0.7579 * gamma_e,
        omega_p0: 0.1356 * gamma_e,
        ..with(-0.5545, 0.2851)
    };
    match propagate(&p, 5, -5, Grid::default_for(p.r0, 5), 400.0) {
        Ok(r) => verdict(r.j >= 0.95, format!("J(l = 5, 400 um) = {:.4}", r.j)),
        Err(e) => verdict(false, format!("run failed: {e}")),
    }
}

fn determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let text = |d: &std::path::Path| {
        format!(
            "command = run\noutput.dir = \"{}\"\n{}",
            d.display(),
            fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ofw_l2.conf"))
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("command") && !l.starts_with("output.dir"))
                .collect::<Vec<_>>()
                .join("\n")
        )
    };
    let mut csv = Vec::new();
    for d in &dirs {
        match parse_config(&text(d.path())).and_then(|s| run_command(&s)) {
            Ok(_) => csv.push(fs::read(d.path().join("metrics.csv")).unwrap()),
            Err(e) => return verdict(false, format!("run failed: {e}")),
        }
    }
    verdict(csv[0] == csv[1], format!("metrics.csv {} bytes, identical: {}", csv[0].len(), csv[0] == csv[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("diffraction length", diffraction_length),
        ("potential hierarchy", potential_hierarchy),
        ("kernel correctness", kernel_correctness),
        ("solver validation", solver_validation),
        ("wheel ordering at 400 um", wheel_ordering),
        ("20 mm stability contrast", long_distance_contrast),
        ("optimizer efficacy", optimizer_efficacy),
        ("l = 5 wheel", higher_order_wheel),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{name}]: {tag} ({}; {:.0} s)", i + 1, v.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
