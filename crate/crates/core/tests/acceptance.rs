//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use modelkit_core::complex::{ComplexPoint, C64, I};
use modelkit_core::decider::{decide_multipliers, DecideConfig, MifPair, Rule, Verdict};
use modelkit_core::density::{
    counting_function, estimate_density_bracket, regularity_integral, star_point, star_transform,
    DensityMethod, DiscreteSequence, WindowSchedule, DEFAULT_REGULARITY_TOL,
};
use modelkit_core::error::Error;
use modelkit_core::hilbert::{hilbert_transform, PVSchedule, PiFunction};
use modelkit_core::inner::{
    arg_on_line, derivative_modulus_on_line, eval_inner, kernel_exprational, ArithFamily, InnerFunctionSpec,
    TruncationSchedule,
};
use modelkit_core::toeplitz::{
    carleson_for, discretize_toeplitz, kernel_triviality_probe, lemma1_construct, multiplier_residual,
    seeded_points, ProbeConfig, ProbeVerdict, ToeplitzSymbol, WeightedZero,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const C1_INTEGRAL_TOL: f64 = 1e-9;
const C1_RUNTIME: Duration = Duration::from_secs(10);
const C2_RUNTIME: Duration = Duration::from_secs(5);
const C3_MAX_ERR: f64 = 1e-3;
const C3_LINEARITY_TOL: f64 = 1e-8;
const C3_RUNTIME: Duration = Duration::from_secs(30);
const C4_ZERO_TOL: f64 = 1e-8;
const C4_HARDY_TOL: f64 = 1e-6;
const C4_RUNTIME: Duration = Duration::from_secs(10);
const C5_SIGMA_FLOOR: f64 = 1e-6;
const C5_MIN_BASIS: usize = 64;
const C5_RUNTIME: Duration = Duration::from_secs(60);
const C6_IN_TOL: f64 = 1e-4;
const C6_OUT_MIN: f64 = 1e-2;
const C6_CARLESON_DRIFT: f64 = 0.05;
const C6_RUNTIME: Duration = Duration::from_secs(60);
const C7_FD_REL: f64 = 1e-3;
const C7_RUNTIME: Duration = Duration::from_secs(60);

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let r = f();
    let el = t.elapsed();
    match r {
        Ok(s) if el <= limit => Ok(format!("{s}; {:.2}s", el.as_secs_f64())),
        Ok(s) => Err(format!("{s}; runtime {:.2}s exceeds {:?}", el.as_secs_f64(), limit)),
        Err(e) => Err(format!("{e}; {:.2}s", el.as_secs_f64())),
    }
}

fn lattice(mass: f64) -> InnerFunctionSpec {
    InnerFunctionSpec::arith(mass, ArithFamily::two_sided(1.0, 1.0)).unwrap()
}

fn s(a: f64) -> InnerFunctionSpec {
    InnerFunctionSpec::singular(a)
}

/// Adaptive Simpson on `[a, b]`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let d = left + right - whole;
        if depth == 0 || d.abs() <= 15.0 * tol {
            left + right + d / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 48)
}

fn criterion_1() -> Check {
    timed(C1_RUNTIME, || {
        let fam = ArithFamily { alpha: 1.0, beta: 1.0, nmin: Some(-10_000), nmax: Some(10_000) };
        let seq = DiscreteSequence::from_family(fam).map_err(|e| e.to_string())?;
        let est = estimate_density_bracket(&seq, None, None).map_err(|e| e.to_string())?;
        let b = est.bracket;
        ensure(
            b.exact && b.lower == 1.0 && b.upper == Some(1.0) && b.method == DensityMethod::SelfRegularity,
            format!("bracket {b:?}"),
        )?;
        let (real, _) = star_transform(&seq).map_err(|e| e.to_string())?;
        let sched = WindowSchedule::doubling(real.coverage(), DEFAULT_REGULARITY_TOL);
        let rep = regularity_integral(&real, 1.0, &sched).map_err(|e| e.to_string())?;
        // majorant: int_2^W <= sum_{n : n + 1/n < W} (3/2)(1 + 1/(n+1) - 1/n)/(n^2+1)
        let term = |n: f64| 1.5 * (1.0 + 1.0 / (n + 1.0) - 1.0 / n) / (n * n + 1.0);
        let mut worst_margin = f64::INFINITY;
        for &(w, i) in &rep.window_integrals {
            let tail = 0.5 * (i - 5f64.ln());
            let mut bound = 0.0;
            let mut n = 1.0;
            while n + 1.0 / n < w {
                bound += term(n);
                n += 1.0;
            }
            worst_margin = worst_margin.min(bound - tail);
            ensure(tail <= bound + C1_INTEGRAL_TOL, format!("window {w}: {tail} above majorant {bound}"))?;
        }
        // independent oracle for the closed-form step integration at W = 64
        let (w, i) = rep.window_integrals.iter().copied().find(|p| p.0 == 64.0).ok_or("no W = 64 window")?;
        let mut direct = 0.5 * 5f64.ln();
        let mut n = 1.0;
        while n + 1.0 / n < w {
            let lo = n + 1.0 / n;
            let hi = (n + 1.0 + 1.0 / (n + 1.0)).min(w);
            direct += simpson(&|x: f64| (x - n) / (1.0 + x * x), lo, hi, 1e-14);
            n += 1.0;
        }
        ensure((2.0 * direct - i).abs() < C1_INTEGRAL_TOL, format!("W=64: {i} vs quadrature {}", 2.0 * direct))?;
        for a in [0.9, 1.1] {
            let r = regularity_integral(&real, a, &sched).map_err(|e| e.to_string())?;
            ensure(!r.converged, format!("a = {a} reported convergent"))?;
        }
        Ok(format!(
            "bracket (1,1) by self-regularity, {} windows under the majorant (min margin {worst_margin:.3e}), a = 0.9 and 1.1 diverge",
            rep.window_integrals.len()
        ))
    })
}

fn criterion_2() -> Check {
    timed(C2_RUNTIME, || {
        let cfg = DecideConfig::default();
        let run = |u: InnerFunctionSpec, v: InnerFunctionSpec| {
            decide_multipliers(&MifPair::new(u, v).unwrap(), &cfg).map_err(|e| e.to_string())
        };
        let mut count = 0;
        let masses = [0.0, 0.5, 1.0, 2.0, PI];
        for &a in &masses {
            for &b in &masses {
                let c = run(s(a), s(b))?;
                let want = if b >= a { Verdict::Nontrivial } else { Verdict::Trivial };
                ensure(c.verdict == want && c.rule == Rule::SingularMasses, format!("singular pair a={a} b={b}: {:?}", c.verdict))?;
                count += 1;
            }
        }
        let fb = |m: f64, z: &[C64]| InnerFunctionSpec::new(m, C64::new(1.0, 0.0), modelkit_core::inner::BlaschkeData::explicit(z.to_vec()).unwrap()).unwrap();
        let finite = [
            (fb(1.0, &[I]), fb(2.0, &[C64::new(0.0, 2.0)])),
            (fb(2.0, &[C64::new(1.0, 1.0), C64::new(-1.0, 2.0)]), fb(0.5, &[I])),
            (fb(0.0, &[I]), fb(1.0, &[C64::new(0.0, 3.0), C64::new(2.0, 0.5)])),
        ];
        for (u, v) in &finite {
            let c = run(u.clone(), v.clone())?;
            let want = if v.mass > u.mass { Verdict::Nontrivial } else { Verdict::Trivial };
            ensure(c.verdict == want && c.rule == Rule::FiniteBlaschkeMasses, format!("finite pair: {:?}", c.verdict))?;
            let r = run(v.clone(), u.clone())?;
            if c.verdict == Verdict::Nontrivial {
                ensure(r.verdict == Verdict::Trivial, "symmetry: reversed pair not trivial")?;
            }
            count += 2;
        }
        let t = 2.0 * PI;
        for (b, want) in [(1.0 + t - 0.5, Verdict::Trivial), (1.0 + t, Verdict::UndecidedBoundary), (1.0 + t + 0.5, Verdict::Nontrivial)] {
            let c = run(lattice(1.0), s(b))?;
            ensure(c.verdict == want && c.rule == Rule::UpperDensityExcess, format!("upper density b={b}: {:?}", c.verdict))?;
            count += 1;
        }
        for (a, want) in [(1.0 + t - 0.5, Verdict::Nontrivial), (1.0 + t, Verdict::UndecidedBoundary), (1.0 + t + 0.5, Verdict::Trivial)] {
            let c = run(s(a), lattice(1.0))?;
            ensure(c.verdict == want && c.rule == Rule::LowerDensityExcess, format!("lower density a={a}: {:?}", c.verdict))?;
            count += 1;
        }
        for (a, want) in [(PI, Verdict::Nontrivial), (7.0, Verdict::Trivial)] {
            let c = run(s(a), lattice(0.0))?;
            ensure(c.verdict == want && c.rule == Rule::LatticeThreshold, format!("lattice a={a}: {:?}", c.verdict))?;
            count += 1;
        }
        Ok(format!("{count} decisions match the table"))
    })
}

/// Brute-force principal value with excision `eps` and window `w`, in the
/// variable `s = e^u` around `x`.
fn brute_force_pv(h: impl Fn(f64) -> f64, x: f64, eps: f64, w: f64) -> f64 {
    let g = |u: f64| {
        let s = u.exp();
        let (l, r) = (x - s, x + s);
        let sing = h(l) - h(r);
        let reg = (h(l) * l / (1.0 + l * l) + h(r) * r / (1.0 + r * r)) * s;
        sing + reg
    };
    let (a, b) = (eps.ln(), w.ln());
    let n = 64;
    let step = (b - a) / n as f64;
    let total: f64 = (0..n).map(|k| simpson(&g, a + k as f64 * step, a + (k + 1) as f64 * step, 1e-12)).sum();
    total / PI
}

fn criterion_3() -> Check {
    timed(C3_RUNTIME, || {
        let xs = [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0];
        let pair = |x: f64| x / (1.0 + x * x);
        let h = |t: f64| 1.0 / (1.0 + t * t);
        let mut brute_err: f64 = 0.0;
        for &x in &xs {
            brute_err = brute_err.max((brute_force_pv(h, x, 1e-6, 1e6) - pair(x)).abs());
        }
        ensure(brute_err < C3_MAX_ERR, format!("analytic pair fails brute-force check: {brute_err:.3e}"))?;
        let sched = PVSchedule::default();
        let poisson = PiFunction::poisson();
        let mut err: f64 = 0.0;
        for &x in &xs {
            let v = hilbert_transform(&poisson, x, &sched).map_err(|e| e.to_string())?;
            err = err.max((v.value - pair(x)).abs());
        }
        ensure(err < C3_MAX_ERR, format!("max error {err:.3e}"))?;
        let gauss = PiFunction::gaussian();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lin: f64 = 0.0;
        for _ in 0..20 {
            let (a, b, x) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-5.0..5.0));
            let comb = PiFunction::combine(a, &poisson, b, &gauss);
            let lhs = hilbert_transform(&comb, x, &sched).map_err(|e| e.to_string())?.value;
            let r1 = hilbert_transform(&poisson, x, &sched).map_err(|e| e.to_string())?.value;
            let r2 = hilbert_transform(&gauss, x, &sched).map_err(|e| e.to_string())?.value;
            lin = lin.max((lhs - a * r1 - b * r2).abs());
        }
        ensure(lin < C3_LINEARITY_TOL, format!("linearity defect {lin:.3e}"))?;
        Ok(format!("brute-force pair error {brute_err:.2e}, max error {err:.2e}, linearity defect {lin:.2e} over 20 combinations"))
    })
}

fn criterion_4() -> Check {
    timed(C4_RUNTIME, || {
        let z = [WeightedZero { at: ComplexPoint::new(0.0, 1.0), multiplicity: 1 }];
        let k = lemma1_construct(&s(1.0), &z, C4_ZERO_TOL, 11, 0, None).map_err(|e| e.to_string())?;
        let fi = k.eval(I).norm();
        ensure((k.norm - 1.0).abs() < 1e-12, format!("norm {}", k.norm))?;
        ensure(fi < C4_ZERO_TOL, format!("|f(i)| = {fi:.3e}"))?;
        ensure(k.hardy_residual < C4_HARDY_TOL, format!("Hardy residual {:.3e}", k.hardy_residual))?;
        let k0 = lemma1_construct(&s(1.0), &[], C4_ZERO_TOL, 11, 0, None).map_err(|e| e.to_string())?;
        ensure(k0.coefficients.len() == 1, "degenerate case is not a single kernel")?;
        // oracle: k_l(z) = (i/2pi)(1 - conj(e^{il}) e^{iz})/(z - conj l), scaled to unit norm
        let l = k0.basis_points[0].to_c64();
        let kern = |zz: C64| I / (2.0 * PI) * (1.0 - (I * l).exp().conj() * (I * zz).exp()) / (zz - l.conj());
        let knorm = ((1.0 - (-2.0 * l.im).exp()) / (4.0 * PI * l.im)).sqrt();
        let mut dev: f64 = 0.0;
        for zz in [C64::new(0.3, 0.7), C64::new(-2.0, 1.5), C64::new(4.0, 0.1)] {
            let ratio = k0.eval(zz) * knorm / kern(zz);
            dev = dev.max((ratio.norm() - 1.0).abs());
        }
        ensure(dev < 1e-10, format!("degenerate element is not a kernel: {dev:.3e}"))?;
        let rejected = matches!(
            lemma1_construct(&InnerFunctionSpec::b_i(), &z, C4_ZERO_TOL, 11, 0, None),
            Err(Error::Hypothesis(_))
        );
        ensure(rejected, "finite Blaschke Theta accepted")?;
        Ok(format!("|f(i)| = {fi:.2e}, Hardy residual {:.2e}, kernel residual {:.2e}", k.hardy_residual, k.kernel_residual))
    })
}

fn criterion_5() -> Check {
    timed(C5_RUNTIME, || {
        let cfg = ProbeConfig::default();
        let r = kernel_triviality_probe(&ToeplitzSymbol::anti_analytic(s(1.0)), &cfg).map_err(|e| e.to_string())?;
        let n = *r.basis_sizes.last().unwrap();
        let sig = *r.sigma_min.last().unwrap();
        ensure(r.verdict == ProbeVerdict::LikelyNontrivial, format!("conj(S): {:?}", r.verdict))?;
        ensure(n >= C5_MIN_BASIS && sig < C5_SIGMA_FLOOR, format!("conj(S): sigma {sig:.3e} at size {n}"))?;
        let t = kernel_triviality_probe(&ToeplitzSymbol::analytic(s(1.0)), &cfg).map_err(|e| e.to_string())?;
        ensure(t.verdict == ProbeVerdict::LikelyTrivial, format!("S: {:?}", t.verdict))?;
        let bound = t.lower_bound();
        let b3 = InnerFunctionSpec::blaschke(vec![C64::new(0.0, 1.0), C64::new(1.0, 2.0), C64::new(-2.0, 0.5)]).unwrap();
        let p1 = kernel_triviality_probe(&ToeplitzSymbol::ratio(b3.clone(), s(1.0)), &cfg).map_err(|e| e.to_string())?;
        let p2 = kernel_triviality_probe(&ToeplitzSymbol::ratio(b3, s(2.0)), &cfg).map_err(|e| e.to_string())?;
        if p1.verdict == ProbeVerdict::LikelyNontrivial {
            ensure(p2.verdict != ProbeVerdict::LikelyTrivial, "monotonicity violated")?;
        }
        Ok(format!(
            "conj(S) sigma {sig:.1e} at size {n}; S sigma >= {bound:.6}; monotone pair {:?} / {:?}",
            p1.verdict, p2.verdict
        ))
    })
}

fn criterion_6() -> Check {
    timed(C6_RUNTIME, || {
        let phi = kernel_exprational(Some(&s(1.0)), I, 0);
        let pts = seeded_points(2024, 10);
        let inside = multiplier_residual(&s(1.0), &s(2.0), &phi, &pts, 0).map_err(|e| e.to_string())?;
        let outside = multiplier_residual(&s(2.0), &s(1.0), &phi, &pts, 0).map_err(|e| e.to_string())?;
        let max_in = inside.iter().cloned().fold(0.0, f64::max);
        let min_out = outside.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(max_in < C6_IN_TOL, format!("max residual for (S, S^2) {max_in:.3e}"))?;
        ensure(min_out > C6_OUT_MIN, format!("min residual for (S^2, S) {min_out:.3e}"))?;
        let sups: Vec<f64> = [10.0, 50.0, 100.0]
            .iter()
            .map(|&x| carleson_for(|t| phi.eval(C64::new(t, 0.0)), x, 64).map(|r| r.sup))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let drift = sups.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).fold(0.0, f64::max);
        ensure(sups.iter().all(|v| v.is_finite()) && drift < C6_CARLESON_DRIFT, format!("Carleson sups {sups:?}"))?;
        Ok(format!("max in-residual {max_in:.2e}, min out-residual {min_out:.2e}, Carleson sup {:.6} (drift {drift:.1e})", sups[2]))
    })
}

fn random_spec(rng: &mut ChaCha8Rng) -> InnerFunctionSpec {
    let mass = if rng.gen_bool(0.5) { rng.gen_range(0.0..3.0) } else { 0.0 };
    let c = C64::from_polar(1.0, rng.gen_range(-PI..PI));
    if rng.gen_bool(0.2) {
        let f = ArithFamily::two_sided(rng.gen_range(0.5..2.0), rng.gen_range(0.3..2.0));
        return InnerFunctionSpec::arith(mass, f).unwrap().with_constant(c);
    }
    let n = rng.gen_range(0..6);
    let zeros: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.05..4.0))).collect();
    InnerFunctionSpec::new(mass, c, modelkit_core::inner::BlaschkeData::explicit(zeros).unwrap()).unwrap()
}

fn criterion_7() -> Check {
    timed(C7_RUNTIME, || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sched = TruncationSchedule::default();
        for k in 0..1000 {
            let spec = random_spec(&mut rng);
            let x = rng.gen_range(-20.0..20.0);
            let r = eval_inner(&spec, ComplexPoint::real(x), &sched).map_err(|e| e.to_string())?;
            ensure((r.c64().norm() - 1.0).abs() <= r.tolerance(), format!("unimodularity #{k} at {x}"))?;
            let z = ComplexPoint::new(rng.gen_range(-20.0..20.0), rng.gen_range(1e-3..10.0));
            let r = eval_inner(&spec, z, &sched).map_err(|e| e.to_string())?;
            ensure(r.c64().norm() <= 1.0 + r.tolerance(), format!("contractivity #{k} at {z}"))?;
        }
        // centered differences of the argument against the closed-form derivative
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let spec = random_spec(&mut rng);
            let x0 = rng.gen_range(-5.0..5.0);
            let grid: Vec<f64> = (0..=200).map(|k| x0 - 0.1 + k as f64 * h).collect();
            let arg = arg_on_line(&spec, &grid, &sched).map_err(|e| e.to_string())?;
            let d = derivative_modulus_on_line(&spec, &grid, &sched).map_err(|e| e.to_string())?;
            for k in 1..grid.len() - 1 {
                let fd = (arg[k + 1] - arg[k - 1]) / (2.0 * h);
                worst = worst.max((fd - d[k]).abs() / d[k].max(1e-300));
            }
        }
        ensure(worst < C7_FD_REL, format!("argument-derivative relative error {worst:.3e}"))?;
        // basis points spread on the scale of each space
        let line = |step: f64, h: f64| -> Vec<ComplexPoint> {
            (0..12).map(|j| ComplexPoint::new(step * (j as f64 - 5.5), h + 0.1 * (j % 3) as f64)).collect()
        };
        for (amb, pts) in [(None, line(0.8, 0.5)), (Some(s(1.5)), line(2.0 * PI / 1.5, 0.7)), (Some(lattice(0.0)), line(1.0, 0.5))] {
            let m = discretize_toeplitz(&ToeplitzSymbol::identity(), &pts, amb.as_ref(), 64).map_err(|e| e.to_string())?;
            let herm = (&m.gram - m.gram.adjoint()).norm();
            let min_eig = m.gram.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            ensure(herm < 1e-12 && min_eig > 0.0, format!("Gram not positive: {herm:.2e}, {min_eig:.2e}"))?;
        }
        let seq = DiscreteSequence::from_reals(&[-2.0, -1.0, 0.0, 1.0, 1.0, 2.5]).map_err(|e| e.to_string())?;
        let counts: Vec<i64> =
            [-3.0, -2.0, -1.5, 0.0, 0.5, 1.0, 2.5, 3.0].iter().map(|&x| counting_function(&seq, x).unwrap()).collect();
        ensure(counts == vec![-3, -3, -2, 1, 1, 3, 4, 4], format!("counting convention {counts:?}"))?;
        for n in 1..=50i32 {
            for sgn in [1.0, -1.0] {
                let nf = sgn * n as f64;
                let v = star_point(ComplexPoint::new(nf, 1.0));
                ensure(v == (nf * nf + 1.0) / nf, format!("star point of {nf}+i: {v}"))?;
            }
        }
        Ok(format!("2000 evaluations within bounds, derivative error {worst:.1e}, Gram positive, counting and star transform exact"))
    })
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 7] = [
        (1, "density of the shifted lattice", criterion_1),
        (2, "decision truth table", criterion_2),
        (3, "Hilbert transform oracle", criterion_3),
        (4, "constructive kernel element", criterion_4),
        (5, "probe calibration", criterion_5),
        (6, "multiplier residuals and Carleson windows", criterion_6),
        (7, "core invariant suites", criterion_7),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        match f() {
            Ok(msg) => println!("criterion {n} ({name}): PASS: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
