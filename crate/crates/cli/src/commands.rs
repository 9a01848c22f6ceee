use std::fs;
use std::io::Write;
use std::path::PathBuf;

use kdvb_core::charroots::{
    char_roots, count_roots_argument_principle, standard_left_contour, standard_right_contour,
    WaveParams,
};
use kdvb_core::fracops::{apply_dalpha, FracParams};
use kdvb_core::grid::{Grid, GridFunction, TailModel};
use kdvb_core::linops::{assemble, exponential_error, null_space_check, solve_bvp, LeftBc, RightBc};
use kdvb_core::quadform::{
    build_kernel, energy_identity_residual, eval_i_direct, eval_i_kernel, HalfLineFunction,
    KernelQuadrature, RandomFamily,
};
use kdvb_core::special::gamma;
use kdvb_core::twsolve::{
    evolve_moving_frame, measure_decay_rate, refined_residual, solve_wave, stability_bound,
    DecaySide, EvolveConfig, NewtonConfig, Scheme,
};
use serde_json::{json, Value};

use crate::config::{pick, FileConfig};
use crate::{Cli, CliError, Command, OUT_DIR_ENV};

/// Version of the CSV column layouts documented in the README.
pub const CSV_SCHEMA: u32 = 1;

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(flag: Option<PathBuf>, file: Option<PathBuf>) -> Result<Self, CliError> {
        let dir = flag
            .or(file)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(Output { dir })
    }

    fn csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "{header}")?;
        for r in rows {
            writeln!(f, "{}", r.join(","))?;
        }
        f.flush()?;
        Ok(path)
    }

    /// Writes `<name>.json` and echoes the summary on stdout.
    fn summary(&self, name: &str, mut v: Value, files: &[PathBuf]) -> Result<Value, CliError> {
        v["csv_schema"] = json!(CSV_SCHEMA);
        v["files"] = json!(files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
        let text = serde_json::to_string_pretty(&v).expect("serialisable summary");
        fs::write(self.dir.join(format!("{name}.json")), &text)?;
        println!("{text}");
        Ok(v)
    }
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let out = Output::new(cli.out_dir, file.out_dir.clone())?;
    match cli.command {
        Command::Roots(a) => roots(&a, &file, &out),
        Command::Dalpha(a) => dalpha(&a, &file, &out),
        Command::Quadform(a) => quadform(&a, &file, &out),
        Command::Nullspace(a) => nullspace(&a, &file, &out),
        Command::Wave(a) => wave(&a, &file, &out),
    }
}

fn roots(a: &crate::RootsArgs, file: &FileConfig, out: &Output) -> Result<(), CliError> {
    let tau = pick(a.tau, file.tau, 1.0);
    let alpha = pick(a.alpha, file.alpha, 0.5);
    let hprime = pick(a.hprime, file.hprime, 1.0);
    let w = WaveParams::from_hprime(tau, alpha, hprime)?;
    let r = char_roots(&w)?;
    let right = count_roots_argument_principle(&w, &standard_right_contour())?;
    let left = count_roots_argument_principle(&w, &standard_left_contour())?;
    let pair = r.complex_pair.map(|p| json!({ "re": p.re, "im": p.im }));
    out.summary(
        "roots",
        json!({
            "tau": tau,
            "alpha": alpha,
            "hprime": hprime,
            "lambda": r.lambda,
            "pair": pair,
            "residuals": r.residuals,
            "contour_counts": { "right_half": right, "left_half": left },
        }),
        &[],
    )?;
    Ok(())
}

fn dalpha(a: &crate::DalphaArgs, file: &FileConfig, out: &Output) -> Result<(), CliError> {
    let alpha = pick(a.alpha, file.alpha, 0.5);
    let lambda = pick(a.lambda, file.lambda, 1.0);
    let function = pick(a.function.clone(), file.function.clone(), "exp".to_string());
    let length = pick(a.length, file.length, 20.0);
    let hs = pick(a.hs.clone().map(|s| s.0), file.hs.clone(), vec![0.04, 0.02, 0.01]);
    if hs.is_empty() {
        return Err(CliError::Usage("grid spec is empty".into()));
    }
    let p = FracParams::new(alpha)?;
    let exact_factor = match function.as_str() {
        "exp" => {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(CliError::Usage(format!("lambda must be positive (got {lambda})")));
            }
            lambda.powf(alpha)
        }
        "constant" => 0.0,
        other => return Err(CliError::Usage(format!("unknown function {other:?} (exp|constant)"))),
    };
    let mut table = Vec::new();
    let mut rows = Vec::new();
    let mut last_profile = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut min_order = f64::INFINITY;
    for &h in &hs {
        let grid = Grid::with_spacing(-length, 0.0, h)?;
        let (f, exact): (GridFunction, Vec<f64>) = if function == "exp" {
            let tail = TailModel::ExponentialApproach { level: 0.0, amplitude: 1.0, rate: lambda };
            let f = GridFunction::from_fn(grid, tail, |x| (lambda * x).exp())?;
            let ex = grid.points().iter().map(|x| exact_factor * (lambda * x).exp()).collect();
            (f, ex)
        } else {
            let f = GridFunction::from_fn(grid, TailModel::Constant { level: 1.0 }, |_| 1.0)?;
            (f, vec![0.0; grid.n()])
        };
        let g = apply_dalpha(&f, &p)?;
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_err = g.values().iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let err = if scale > 0.0 { abs_err / scale } else { abs_err };
        let order = match prev {
            Some((hp, ep)) if err > 0.0 && ep > 0.0 => (ep / err).ln() / (hp / h).ln(),
            _ => f64::NAN,
        };
        if order.is_finite() {
            min_order = min_order.min(order);
        }
        prev = Some((h, err));
        rows.push(vec![num(h), grid.n().to_string(), num(err), if order.is_finite() { num(order) } else { String::new() }]);
        table.push(json!({ "h": h, "n": grid.n(), "max_error": err, "order": finite_or_null(order) }));
        last_profile = grid
            .points()
            .into_iter()
            .zip(f.values())
            .zip(g.values())
            .zip(&exact)
            .map(|(((x, fv), gv), ev)| vec![num(x), num(*fv), num(*gv), num(*ev)])
            .collect();
    }
    let f1 = out.csv("dalpha.csv", "xi,f,dalpha_f,exact", &last_profile)?;
    let f2 = out.csv("dalpha_convergence.csv", "h,n,max_error,order", &rows)?;
    let required = 2.0 - alpha - 0.2;
    out.summary(
        "dalpha",
        json!({
            "alpha": alpha,
            "lambda": lambda,
            "function": function,
            "length": length,
            "convergence": table,
            "min_order": finite_or_null(min_order),
            "required_order": required,
            "order_ok": !min_order.is_finite() || min_order >= required,
        }),
        &[f1, f2],
    )?;
    Ok(())
}

fn quadform(a: &crate::QuadformArgs, file: &FileConfig, out: &Output) -> Result<(), CliError> {
    let alpha = pick(a.alpha, file.alpha, 0.5);
    let seed = pick(a.seed, file.seed, 2024);
    let samples = pick(a.samples, file.samples, 200);
    let halfwidth = pick(a.bump_halfwidth, file.bump_halfwidth, 1.0);
    let t_nodes = pick(a.t_nodes, file.t_nodes, KernelQuadrature::default().t_nodes);
    let p = FracParams::new(alpha)?;
    let kernel = build_kernel(&p, halfwidth)?;
    let quad = KernelQuadrature { t_nodes, ..KernelQuadrature::default() };
    let mut family = RandomFamily::new(seed, RandomFamily::default_grid())?;
    let mut rows = Vec::with_capacity(samples);
    let (mut all_nonneg, mut all_agree, mut max_diff) = (true, true, 0.0f64);
    for i in 0..samples {
        let (v, _) = family.next_member()?;
        let d = eval_i_direct(&v, &p)?;
        let k = eval_i_kernel(&v, &kernel, &quad)?;
        let diff = (d.value - k.value).abs();
        let tol = (3.0 * (d.estimated_error + k.estimated_error)).max(1e-3);
        let nonneg = d.value >= -d.estimated_error && k.value >= -k.estimated_error;
        let agree = diff <= tol;
        all_nonneg &= nonneg;
        all_agree &= agree;
        max_diff = max_diff.max(diff);
        rows.push(vec![
            i.to_string(),
            num(d.value),
            num(d.estimated_error),
            num(k.value),
            num(k.estimated_error),
            num(diff),
            num(tol),
            nonneg.to_string(),
            agree.to_string(),
        ]);
    }
    // ξ e^ξ against the closed form α Γ(1-α) / 4
    let grid = Grid::with_spacing(-30.0, 0.0, 0.002)?;
    let x0 = grid.xmin();
    let tail = TailModel::exponential_through(0.0, 1.0, x0, x0 * x0.exp());
    let xexp = HalfLineFunction::new_h2_0(GridFunction::from_fn(grid, tail, |x| x * x.exp())?)?;
    let fx = eval_i_direct(&xexp, &p)?;
    let oracle = alpha * gamma(1.0 - alpha) / 4.0;
    let rel = (fx.value - oracle).abs() / oracle;
    let f1 = out.csv(
        "quadform.csv",
        "index,direct,direct_error,kernel,kernel_error,difference,tolerance,nonnegative,agree",
        &rows,
    )?;
    let fixture_ok = rel <= 1e-4;
    let summary = out.summary(
        "quadform",
        json!({
            "alpha": alpha,
            "seed": seed,
            "family_version": RandomFamily::VERSION,
            "samples": samples,
            "bump_halfwidth": halfwidth,
            "kernel_raw_moment": kernel.raw_moment(),
            "all_nonnegative": all_nonneg,
            "all_agree": all_agree,
            "max_difference": max_diff,
            "fixture": { "function": "xi*exp(xi)", "value": fx.value, "estimated_error": fx.estimated_error, "closed_form": oracle, "relative_error": rel, "ok": fixture_ok },
        }),
        &[f1],
    )?;
    if all_nonneg && all_agree && fixture_ok {
        Ok(())
    } else {
        Err(CliError::Check(json!({ "error": "property_violation", "summary": summary })))
    }
}

fn nullspace(a: &crate::NullspaceArgs, file: &FileConfig, out: &Output) -> Result<(), CliError> {
    let tau = pick(a.tau, file.tau, 1.0);
    let alpha = pick(a.alpha, file.alpha, 0.5);
    let hprime = pick(a.hprime, file.hprime, 1.0);
    let length = pick(a.length, file.length, 40.0);
    let hs = pick(a.hs.clone().map(|s| s.0), file.hs.clone(), vec![0.04, 0.02, 0.01]);
    if hs.is_empty() {
        return Err(CliError::Usage("grid spec is empty".into()));
    }
    let w = WaveParams::from_hprime(tau, alpha, hprime)?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let (mut smin_lo, mut smin_hi, mut floor_ok) = (f64::INFINITY, 0.0f64, true);
    let mut lambda = f64::NAN;
    for &h in &hs {
        let grid = Grid::with_spacing(-length, 0.0, h)?;
        let op1 = assemble(&w, grid, LeftBc::AsymptoticExponential(kdvb_core::charroots::find_lambda(&w)?), RightBc::DirichletValue(1.0))?;
        lambda = op1.lambda();
        let v = solve_bvp(&op1)?;
        let err = exponential_error(&v, lambda, 1.0)?;
        let energy = energy_identity_residual(&HalfLineFunction::new(v)?, &w)?;
        let op0 = assemble(&w, grid, LeftBc::AsymptoticExponential(lambda), RightBc::DirichletValue(0.0))?;
        let zero = solve_bvp(&op0)?.max_abs();
        let ns = null_space_check(&op0)?;
        let order = match prev {
            Some((hp, ep)) => (ep / err).ln() / (hp / h).ln(),
            None => f64::NAN,
        };
        prev = Some((h, err));
        smin_lo = smin_lo.min(ns.smallest[0]);
        smin_hi = smin_hi.max(ns.smallest[0]);
        floor_ok &= ns.smallest[0] >= 1e-8 * ns.sigma_max;
        rows.push(vec![
            num(h),
            grid.n().to_string(),
            num(err),
            if order.is_finite() { num(order) } else { String::new() },
            num(zero),
            num(ns.smallest[0]),
            num(ns.smallest[1]),
            num(ns.smallest[2]),
            num(ns.sigma_max),
            ns.kernel_dim.to_string(),
            num(op1.consistency().residual),
            num(energy),
        ]);
        table.push(json!({
            "h": h, "n": grid.n(), "bvp_error": err, "order": finite_or_null(order),
            "zero_data_max": zero, "smallest_singular_values": ns.smallest,
            "sigma_max": ns.sigma_max, "kernel_dim": ns.kernel_dim,
            "consistency_residual": op1.consistency().residual,
            "consistency_warning": op1.consistency().warning,
            "energy_residual": energy,
        }));
    }
    let f1 = out.csv(
        "nullspace.csv",
        "h,n,bvp_error,order,zero_data_max,sigma_1,sigma_2,sigma_3,sigma_max,kernel_dim,consistency_residual,energy_residual",
        &rows,
    )?;
    out.summary(
        "nullspace",
        json!({
            "tau": tau, "alpha": alpha, "hprime": hprime, "length": length, "lambda": lambda,
            "sweep": table,
            "sigma_min_ratio": smin_hi / smin_lo,
            "sigma_floor_ok": floor_ok,
        }),
        &[f1],
    )?;
    Ok(())
}

fn wave(a: &crate::WaveArgs, file: &FileConfig, out: &Output) -> Result<(), CliError> {
    let phi_minus = pick(a.phi_minus, file.phi_minus, 1.0);
    let phi_plus = pick(a.phi_plus, file.phi_plus, 0.0);
    let tau = pick(a.tau, file.tau, 1.0);
    let alpha = pick(a.alpha, file.alpha, 0.5);
    let length = pick(a.length, file.length, 40.0);
    let h = pick(a.h, file.h, 0.01);
    let newton = NewtonConfig {
        tol: pick(a.tol, file.tol, 1e-8),
        max_iter: pick(a.max_iter, file.max_iter, 30),
        ..NewtonConfig::default()
    };
    let validate = a.validate_evolve || file.validate_evolve.unwrap_or(false);
    let w = WaveParams::new(phi_minus, phi_plus, tau, alpha)?;
    let grid = Grid::with_spacing(-length, length, h)?;
    let profile = solve_wave(&w, grid, &newton)?;
    let fit = measure_decay_rate(&profile, DecaySide::Left)?;
    let gap = (fit.rate - profile.lambda).abs() / profile.lambda;
    let refined = refined_residual(&profile)?;
    let rows: Vec<Vec<String>> = grid
        .points()
        .into_iter()
        .zip(profile.phi.values())
        .map(|(x, v)| vec![num(x), num(*v)])
        .collect();
    let mut files = vec![out.csv("wave.csv", "xi,phi", &rows)?];
    let evolve = if validate {
        let eh = pick(a.evolve_h, file.evolve_h, 0.02);
        let base = if eh == h {
            profile.clone()
        } else {
            solve_wave(&w, Grid::with_spacing(-length, length, eh)?, &newton)?
        };
        let bound = stability_bound(&base.phi, &w);
        let dt = pick(a.dt, file.dt, 0.9 * bound);
        let t_end = pick(a.t_end, file.t_end, 20.0 / w.hprime());
        let cfg = EvolveConfig { dt, t_end, scheme: Scheme::ImplicitLinearExplicitNonlinear };
        let s = evolve_moving_frame(&base.phi, &w, &cfg)?;
        let drift_rows: Vec<Vec<String>> = s.drift_samples.iter().map(|(t, d)| vec![num(*t), num(*d)]).collect();
        files.push(out.csv("wave_evolve_drift.csv", "t,drift", &drift_rows)?);
        Some(json!({
            "h": eh, "dt": s.dt, "t_end": t_end, "steps": s.steps,
            "stability_bound": s.stability_bound, "max_drift": s.max_drift,
            "final_residual": s.final_residual,
        }))
    } else {
        None
    };
    out.summary(
        "wave",
        json!({
            "phi_minus": phi_minus, "phi_plus": phi_plus, "tau": tau, "alpha": alpha,
            "length": length, "h": h, "n": grid.n(),
            "iterations": profile.iterations,
            "residual_norm": profile.residual_norm,
            "residual_history": profile.residual_history,
            "lambda": profile.lambda,
            "decay_rate": fit.rate,
            "decay_fit_points": fit.points,
            "relative_gap": gap,
            "far_field_gap_left": profile.far_field_gap_left,
            "far_field_gap_right": profile.far_field_gap_right,
            "far_field_attained": profile.far_field_attained(),
            "refined_residual": refined,
            "evolve": evolve,
        }),
        &files,
    )?;
    Ok(())
}

