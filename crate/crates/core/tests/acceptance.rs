//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p kdvb-core --test acceptance`.

use std::time::{Duration, Instant};

use kdvb_core::charroots::{
    char_roots, count_roots_argument_principle, eval_char, find_complex_pair, find_lambda,
    standard_left_contour, standard_right_contour, WaveParams,
};
use kdvb_core::fracops::{apply_dalpha, sobolev_norm, FracParams};
use kdvb_core::grid::{Grid, GridFunction, TailModel};
use kdvb_core::linops::{assemble, exponential_error, null_space_check, solve_bvp, LeftBc, RightBc};
use kdvb_core::quadform::{
    build_kernel, energy_identity_residual, eval_i_direct, eval_i_kernel, HalfLineFunction,
    KernelQuadrature, RandomFamily,
};
use kdvb_core::twsolve::{
    evolve_moving_frame, measure_decay_rate, solve_wave, stability_bound, DecaySide, EvolveConfig,
    NewtonConfig, Scheme,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(id: u32, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err("panicked".to_string()));
    let elapsed = start.elapsed();
    let (ok, detail) = match out {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over budget {budget:?}")),
        Err(d) => (false, d),
    };
    println!(
        "criterion {id} [{}] {title} ({:.1} s): {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn dalpha_rel_error(lambda: f64, alpha: f64, h: f64) -> f64 {
    let p = FracParams::new(alpha).unwrap();
    let g = Grid::with_spacing(-20.0, 0.0, h).unwrap();
    let tail = TailModel::ExponentialApproach { level: 0.0, amplitude: 1.0, rate: lambda };
    let f = GridFunction::from_fn(g, tail, |x| (lambda * x).exp()).unwrap();
    let d = apply_dalpha(&f, &p).unwrap();
    let m = lambda.powf(alpha);
    d.values()
        .iter()
        .zip(f.values())
        .map(|(di, fi)| ((di - m * fi) / (m * fi)).abs())
        .fold(0.0, f64::max)
}

fn eigen_relation() -> Outcome {
    let mut worst: (f64, f64, f64) = (f64::INFINITY, 0.0, 0.0);
    let mut ok = true;
    for &alpha in &[0.25, 0.5, 0.75] {
        for &lambda in &[0.5, 1.0, 2.0] {
            let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&h| dalpha_rel_error(lambda, alpha, h)).collect();
            let order = (e[0] / e[1]).log2().min((e[1] / e[2]).log2());
            let margin = order - (2.0 - alpha - 0.2);
            ok &= margin >= 0.0;
            if margin < worst.0 {
                worst = (margin, alpha, lambda);
            }
        }
    }
    check(
        ok,
        format!("smallest order margin {:.3} at alpha={} lambda={}", worst.0, worst.1, worst.2),
    )
}

fn characteristic_roots() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut closed = 0.0f64;
    for _ in 0..50 {
        let alpha = rng.gen_range(0.1..0.95);
        let hp = rng.gen_range(0.2..3.0);
        let w = WaveParams::from_hprime(0.0, alpha, hp).map_err(|e| e.to_string())?;
        let l = find_lambda(&w).map_err(|e| e.to_string())?;
        let want = hp.powf(1.0 / alpha);
        closed = closed.max((l - want).abs() / want);
    }
    let w = WaveParams::from_hprime(1.0, 0.5, 1.0).unwrap();
    let r = char_roots(&w).map_err(|e| e.to_string())?;
    let oracle_gap = (r.lambda - 0.524888598656404794).abs();
    let residual = eval_char(Complex64::new(r.lambda, 0.0), &w).unwrap().norm();
    let right = count_roots_argument_principle(&w, &standard_right_contour()).map_err(|e| e.to_string())?;
    let left = count_roots_argument_principle(&w, &standard_left_contour()).map_err(|e| e.to_string())?;
    let pair = find_complex_pair(&w).map_err(|e| e.to_string())?;
    let pu = eval_char(pair.upper(), &w).unwrap();
    let pl = eval_char(pair.lower(), &w).unwrap();
    let conj = (pl - pu.conj()).norm().max(pu.norm()).max(pl.norm());
    check(
        closed <= 1e-12 && oracle_gap <= 1e-10 && residual <= 1e-10 && right == 1 && left == 2
            && pair.re < 0.0 && conj <= 1e-10,
        format!(
            "tau=0 closed form {closed:.1e}; lambda {:.12} (oracle gap {oracle_gap:.1e}, |P| {residual:.1e}); \
             counts right {right} left {left}; pair {:.6}±{:.6}i, conjugacy {conj:.1e}",
            r.lambda, pair.re, pair.im
        ),
    )
}

fn positivity() -> Outcome {
    let p = FracParams::new(0.5).unwrap();
    let kernel = build_kernel(&p, 1.0).map_err(|e| e.to_string())?;
    let quad = KernelQuadrature::default();
    let mut fam = RandomFamily::new(2024, RandomFamily::default_grid()).unwrap();
    let (mut neg, mut disagree, mut worst_ratio) = (0, 0, 0.0f64);
    for _ in 0..200 {
        let (v, _) = fam.next_member().map_err(|e| e.to_string())?;
        let d = eval_i_direct(&v, &p).map_err(|e| e.to_string())?;
        let k = eval_i_kernel(&v, &kernel, &quad).map_err(|e| e.to_string())?;
        if d.value < -d.estimated_error {
            neg += 1;
        }
        let tol = (3.0 * (d.estimated_error + k.estimated_error)).max(1e-3);
        let diff = (d.value - k.value).abs();
        if diff > tol {
            disagree += 1;
        }
        worst_ratio = worst_ratio.max(diff / tol);
    }
    check(
        neg == 0 && disagree == 0,
        format!("200 members: {neg} negative, {disagree} disagreeing; worst |diff|/tol {worst_ratio:.3}"),
    )
}

fn energy_identity() -> Outcome {
    let h = 0.001;
    let grid = Grid::with_spacing(-12.0, 0.0, h).unwrap();
    let mut worst = 0.0f64;
    for &alpha in &[0.25, 0.5, 0.75] {
        for &tau in &[0.0, 1.0] {
            let w = WaveParams::from_hprime(tau, alpha, 1.0).unwrap();
            let l = find_lambda(&w).map_err(|e| e.to_string())?;
            let tail = TailModel::ExponentialApproach { level: 0.0, amplitude: 1.0, rate: l };
            let v = HalfLineFunction::from_fn(grid, tail, |x| (l * x).exp()).unwrap();
            worst = worst.max(energy_identity_residual(&v, &w).map_err(|e| e.to_string())?);
        }
    }
    let w = WaveParams::from_hprime(1.0, 0.5, 1.0).unwrap();
    let mut off = 0.0f64;
    for &mu in &[0.3, 0.8, 1.5] {
        let tail = TailModel::ExponentialApproach { level: 0.0, amplitude: 1.0, rate: mu };
        let v = HalfLineFunction::from_fn(grid, tail, |x| (mu * x).exp()).unwrap();
        let r = energy_identity_residual(&v, &w).map_err(|e| e.to_string())?;
        let half_p = eval_char(Complex64::new(mu, 0.0), &w).unwrap().re.abs() / 2.0;
        off = off.max((r - half_p).abs());
    }
    check(
        worst <= 1e-6 && off <= 2e-2,
        format!("max on-root residual {worst:.2e}; max off-root |residual - |P(mu)|/2| {off:.2e}"),
    )
}

fn null_space() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for &tau in &[1.0, 0.0] {
        let w = WaveParams::from_hprime(tau, 0.5, 1.0).unwrap();
        let l = find_lambda(&w).map_err(|e| e.to_string())?;
        let (mut errs, mut smins, mut zero, mut floor) = (Vec::new(), Vec::new(), 0.0f64, true);
        for &h in &[0.04, 0.02, 0.01] {
            let g = Grid::with_spacing(-40.0, 0.0, h).unwrap();
            let op = assemble(&w, g, LeftBc::AsymptoticExponential(l), RightBc::DirichletValue(1.0))
                .map_err(|e| e.to_string())?;
            let v = solve_bvp(&op).map_err(|e| e.to_string())?;
            errs.push(exponential_error(&v, l, 1.0).map_err(|e| e.to_string())?);
            let op0 = assemble(&w, g, LeftBc::AsymptoticExponential(l), RightBc::DirichletValue(0.0))
                .map_err(|e| e.to_string())?;
            zero = zero.max(solve_bvp(&op0).map_err(|e| e.to_string())?.max_abs());
            let ns = null_space_check(&op0).map_err(|e| e.to_string())?;
            smins.push(ns.smallest[0]);
            floor &= ns.smallest[0] >= 1e-8 * ns.sigma_max && ns.kernel_dim == 0;
        }
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        let band = smins.iter().cloned().fold(0.0, f64::max) / smins.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= errs[2] <= 1e-2 && order >= 1.3 && band <= 4.0 && floor && zero <= 1e-12;
        lines.push(format!(
            "tau={tau}: error {:.2e} at h=0.01, order {order:.2}, sigma_min band {band:.2}, zero data {zero:.1e}",
            errs[2]
        ));
    }
    check(ok, lines.join("; "))
}

fn travelling_wave() -> Outcome {
    let grid = Grid::new(-40.0, 40.0, 8001).unwrap();
    let newton = NewtonConfig::default();
    let w = WaveParams::new(1.0, 0.0, 1.0, 0.5).unwrap();
    let a = solve_wave(&w, grid, &newton).map_err(|e| e.to_string())?;
    let ra = measure_decay_rate(&a, DecaySide::Left).map_err(|e| e.to_string())?.rate;
    let w2 = WaveParams::new(2.0, 1.0, 1.0, 0.5).unwrap();
    let b = solve_wave(&w2, grid, &newton).map_err(|e| e.to_string())?;
    let rb = measure_decay_rate(&b, DecaySide::Left).map_err(|e| e.to_string())?.rate;
    let gap = (ra - a.lambda).abs() / a.lambda;
    let pair_gap = (ra - rb).abs() / ra;
    check(
        a.iterations <= 30 && a.residual_norm <= 1e-8 && b.residual_norm <= 1e-8 && gap <= 0.02 && pair_gap <= 0.01,
        format!(
            "{} iterations, residual {:.1e}; rate {ra:.5} vs lambda {:.5} (gap {gap:.1e}); (2,1) rate {rb:.5} (gap {pair_gap:.1e})",
            a.iterations, a.residual_norm, a.lambda
        ),
    )
}

fn moving_frame() -> Outcome {
    let w = WaveParams::new(1.0, 0.0, 1.0, 0.5).unwrap();
    let grid = Grid::with_spacing(-40.0, 40.0, 0.02).unwrap();
    let wave = solve_wave(&w, grid, &NewtonConfig::default()).map_err(|e| e.to_string())?;
    let dt = 0.9 * stability_bound(&wave.phi, &w);
    let cfg = EvolveConfig { dt, t_end: 20.0, scheme: Scheme::ImplicitLinearExplicitNonlinear };
    let s = evolve_moving_frame(&wave.phi, &w, &cfg).map_err(|e| e.to_string())?;
    let flat = GridFunction::from_fn(grid, TailModel::Constant { level: 1.0 }, |_| 1.0).unwrap();
    let c = evolve_moving_frame(&flat, &w, &cfg).map_err(|e| e.to_string())?;
    check(
        s.max_drift <= 1e-3 && c.max_drift <= 1e-12,
        format!("wave drift {:.2e} over {} steps (dt {dt:.4}); constant drift {:.1e}", s.max_drift, s.steps, c.max_drift),
    )
}

fn sobolev_identity() -> Outcome {
    let alpha = 0.5;
    let p = FracParams::new(alpha).unwrap();
    let g = Grid::with_spacing(-40.0, 40.0, 0.01).unwrap();
    let f = GridFunction::from_fn(g, TailModel::Zero, |x| (-x * x).exp()).unwrap();
    let d = apply_dalpha(&f, &p).map_err(|e| e.to_string())?;
    let lhs = sobolev_norm(&d, 1.0, true).map_err(|e| e.to_string())?;
    let rhs = sobolev_norm(&f, 1.0 + alpha, true).map_err(|e| e.to_string())?;
    let rel = (lhs - rhs).abs() / rhs;
    check(rel <= 1e-3, format!("|D^a f|_H1 = {lhs:.8}, |f|_H(1+a) = {rhs:.8}, relative {rel:.1e}"))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "fractional eigen-relation", s(10), eigen_relation),
        run(2, "characteristic roots", s(5), characteristic_roots),
        run(3, "positivity of the quadratic form", s(120), positivity),
        run(4, "energy identity", s(10), energy_identity),
        run(5, "null space of the linearisation", s(120), null_space),
        run(6, "travelling wave", s(300), travelling_wave),
        run(7, "moving-frame steadiness", s(300), moving_frame),
        run(8, "Sobolev symbol identity", s(60), sobolev_identity),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
