//! Regularized Hilbert transform on `L^1(dt/(1+t^2))`, outer functions built
//! from a boundary modulus, and a weak-`L^1` tail diagnostic.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{ComplexPoint, C64};
use crate::error::{Error, Result};
use crate::quad::integrate;

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function on the line together with a bound on its Poisson tail
/// mass `int_{|t|>W} |h(t)| dt/(1+t^2)`.
#[derive(Clone)]
pub struct PiFunction {
    name: String,
    eval: Eval,
    tail: Eval,
}

impl std::fmt::Debug for PiFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiFunction").field("name", &self.name).finish()
    }
}

/// Partial sums of `int_{|t|<=W} |h| dPi` over growing windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityWitness {
    pub windows: Vec<(f64, f64)>,
    pub tail_bound: f64,
    pub certified: bool,
}

impl PiFunction {
    pub fn new<F, T>(name: impl Into<String>, eval: F, tail_mass: T) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        T: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), eval: Arc::new(eval), tail: Arc::new(tail_mass) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// Upper bound on `int_{|t|>w} |h| dPi`.
    pub fn tail_mass(&self, w: f64) -> f64 {
        (self.tail)(w)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0)
    }

    /// `1/(1+t^2)`
    pub fn poisson() -> Self {
        // int_W^inf dt/(1+t^2)^2 <= int_W^inf t^-4 dt
        Self::new("poisson", |t| 1.0 / (1.0 + t * t), |w| 2.0 / (3.0 * w.powi(3)))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c, move |w| c.abs() * 2.0 * (FRAC_PI_2 - w.atan()))
    }

    /// `exp(-t^2)`
    pub fn gaussian() -> Self {
        Self::new("gaussian", |t| (-t * t).exp(), |w| 2.0 * (-w * w).exp() / (1.0 + w * w))
    }

    /// `a*h1 + b*h2`
    pub fn combine(a: f64, h1: &PiFunction, b: f64, h2: &PiFunction) -> Self {
        let (e1, e2, t1, t2) = (h1.eval.clone(), h2.eval.clone(), h1.tail.clone(), h2.tail.clone());
        Self::new(
            format!("{a}*{}+{b}*{}", h1.name, h2.name),
            move |t| a * e1(t) + b * e2(t),
            move |w| a.abs() * t1(w) + b.abs() * t2(w),
        )
    }

    /// Linearly interpolated table of `(t, h(t))` samples. Outside the table
    /// the function is continued as `h(edge) * (edge/|t|)^decay`.
    pub fn from_table(name: impl Into<String>, mut samples: Vec<(f64, f64)>, decay: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("table needs at least two samples".into()));
        }
        if !(decay.is_finite() && decay >= 0.0) {
            return Err(Error::InvalidInput("decay exponent must be finite and >= 0".into()));
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite table entry".into()));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if samples.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate abscissa in table".into()));
        }
        let table = Arc::new(samples);
        let (t0, v0) = table[0];
        let (t1, v1) = *table.last().unwrap();
        let tab = table.clone();
        let eval = move |t: f64| -> f64 {
            if t < t0 {
                return if t0 < 0.0 { v0 * (t0 / t).abs().powf(decay) } else { v0 };
            }
            if t > t1 {
                return if t1 > 0.0 { v1 * (t1 / t).abs().powf(decay) } else { v1 };
            }
            let k = tab.partition_point(|s| s.0 <= t).clamp(1, tab.len() - 1);
            let (a, fa) = tab[k - 1];
            let (b, fb) = tab[k];
            fa + (fb - fa) * (t - a) / (b - a)
        };
        let tab = table.clone();
        let tail = move |w: f64| -> f64 {
            // table part with |t| > w, by the trapezoid rule on |h|
            let mut inside = 0.0;
            for s in tab.windows(2) {
                let (a, fa) = s[0];
                let (b, fb) = s[1];
                for (l, r) in [(a, b.min(-w)), (a.max(w), b)] {
                    if r > l {
                        inside += fa.abs().max(fb.abs()) * (r.atan() - l.atan());
                    }
                }
            }
            let side = |edge: f64, v: f64| -> f64 {
                if decay == 0.0 {
                    return v.abs() * (FRAC_PI_2 - w.max(edge.abs()).atan());
                }
                let start = w.max(edge.abs());
                let amp = v.abs() * edge.abs().powf(decay);
                amp * start.powf(-decay - 1.0) / (decay + 1.0)
            };
            let left = if t0 < 0.0 { side(t0, v0) } else { v0.abs() * (FRAC_PI_2 - w.max(t0.abs()).atan()) };
            let right = if t1 > 0.0 { side(t1, v1) } else { v1.abs() * (FRAC_PI_2 - w.max(t1.abs()).atan()) };
            inside + left + right
        };
        Ok(Self::new(name, eval, tail))
    }

    /// Reads a `t,value` CSV table (header optional).
    pub fn from_csv(path: &Path, decay: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidInput("table rows need two columns".into()));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(t), Ok(v)) => samples.push((t, v)),
                _ if samples.is_empty() => continue,
                _ => return Err(Error::InvalidInput(format!("bad table row {:?}", rec))),
            }
        }
        Self::from_table(path.display().to_string(), samples, decay)
    }

    /// Certifies `h` in `L^1_Pi` numerically: window integrals must be
    /// Cauchy and the declared tail mass must vanish.
    pub fn witness(&self, windows: &[f64], tol: f64) -> IntegrabilityWitness {
        let sums: Vec<(f64, f64)> = windows
            .iter()
            .map(|&w| {
                let u = w.atan();
                let r = integrate(|s| self.eval(s.tan()).abs(), -u, u, 1e-12, 1e-10, 2000);
                (w, r.value)
            })
            .collect();
        let tail_bound = windows.last().map_or(f64::INFINITY, |&w| self.tail_mass(w));
        let cauchy = sums.windows(2).last().is_none_or(|p| (p[1].1 - p[0].1).abs() <= tol.max(p[0].1 * 1e-2));
        let finite = sums.iter().all(|s| s.1.is_finite());
        IntegrabilityWitness { windows: sums, tail_bound, certified: finite && tail_bound.is_finite() && tail_bound < tol && cauchy }
    }
}

/// Discretization of the principal value and the improper integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PVSchedule {
    /// Excision radii, a decreasing geometric sequence.
    pub epsilons: Vec<f64>,
    /// Integration window `|t| <= W`; the rest is bounded, not integrated.
    pub window: f64,
    /// Absolute tolerance of each adaptive quadrature.
    pub quad_tolerance: f64,
    /// Segment budget of each adaptive quadrature.
    pub max_segments: usize,
}

impl Default for PVSchedule {
    fn default() -> Self {
        Self {
            epsilons: (0..6).map(|k| 1e-2 / 2f64.powi(k)).collect(),
            window: 1e6,
            quad_tolerance: 1e-11,
            max_segments: 4000,
        }
    }
}

impl PVSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidInput("epsilons must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("epsilons must be strictly decreasing".into()));
        }
        if let [a, b, ..] = self.epsilons[..] {
            let q = a / b;
            if self.epsilons.windows(2).any(|w| ((w[0] / w[1]) / q - 1.0).abs() > 1e-9) {
                return Err(Error::InvalidInput("epsilons must form a geometric sequence".into()));
            }
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::InvalidInput("window must be finite and positive".into()));
        }
        if !(self.quad_tolerance > 0.0) || self.max_segments == 0 {
            return Err(Error::InvalidInput("quadrature settings must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilbertValue {
    pub value: f64,
    /// Extrapolation spread plus quadrature and window-tail bounds.
    pub richardson_error: f64,
}

const WITNESS_WINDOWS: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

fn certify(h: &PiFunction) -> Result<()> {
    let w = h.witness(&WITNESS_WINDOWS, 1e-3);
    if !w.certified {
        return Err(Error::NotIntegrable(format!(
            "{}: tail bound {:.3e} at W = 1e6",
            h.name(),
            w.tail_bound
        )));
    }
    Ok(())
}

/// `(1/pi) lim_{eps->0} int_{|x-t|>eps} [1/(x-t) + t/(1+t^2)] h(t) dt`
pub fn hilbert_transform(h: &PiFunction, x: f64, sched: &PVSchedule) -> Result<HilbertValue> {
    certify(h)?;
    hilbert_unchecked(h, x, sched)
}

fn hilbert_unchecked(h: &PiFunction, x: f64, sched: &PVSchedule) -> Result<HilbertValue> {
    sched.validate()?;
    if !x.is_finite() {
        return Err(Error::InvalidInput("non-finite evaluation point".into()));
    }
    let w = sched.window;
    let delta = 0.5f64.max(2.0 * sched.epsilons[0]);
    if w <= x.abs() + delta {
        return Err(Error::InvalidInput(format!("window {w} must exceed |x| + {delta}")));
    }
    let tol = sched.quad_tolerance;
    let hx = h.eval(x);
    if !hx.is_finite() {
        return Err(Error::SingularitySwamp(x));
    }

    // Symmetric pairing around x: the odd singular parts cancel.
    let paired = |s: f64| -> f64 {
        let (a, b) = (x - s, x + s);
        (h.eval(a) - h.eval(b)) / s + a / (1.0 + a * a) * h.eval(a) + b / (1.0 + b * b) * h.eval(b)
    };

    // Outer part with t = tan(u); the kernel times (1+t^2) is bounded.
    let outer_integrand = |u: f64| -> f64 {
        let t = u.tan();
        (1.0 + x * t) / (x - t) * h.eval(t)
    };
    let uw = w.atan();
    let left = integrate(outer_integrand, -uw, (x - delta).atan(), tol, 0.0, sched.max_segments);
    let right = integrate(outer_integrand, (x + delta).atan(), uw, tol, 0.0, sched.max_segments);
    if left.non_finite || right.non_finite {
        return Err(Error::SingularitySwamp(x));
    }
    let outer = left.value + right.value;
    let c_x = (1.0 + x.abs() * w) / (w - x.abs());
    let tail = c_x * h.tail_mass(w);

    let mut values = Vec::with_capacity(sched.epsilons.len());
    let mut quad_err = left.error + right.error;
    for &eps in &sched.epsilons {
        let r = integrate(paired, eps, delta, tol, 0.0, sched.max_segments);
        if r.non_finite || !r.value.is_finite() {
            return Err(Error::SingularitySwamp(x));
        }
        quad_err = quad_err.max(left.error + right.error + r.error);
        values.push(r.value + outer);
    }

    // The excised part is an odd function of eps: eliminate eps, eps^3, ...
    let (extrap, spread) = richardson_odd(&values, &sched.epsilons);
    Ok(HilbertValue { value: extrap / PI, richardson_error: (spread + quad_err + tail) / PI })
}

/// Richardson table for `I(eps) = I0 + c1 eps + c3 eps^3 + ...` on a
/// geometric eps sequence.
fn richardson_odd(values: &[f64], eps: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 1 {
        return (values[0], f64::INFINITY);
    }
    let mut table: Vec<Vec<f64>> = vec![values.to_vec()];
    for k in 1..n {
        let prev = &table[k - 1];
        let power = (2 * k - 1) as i32;
        let row: Vec<f64> = (0..n - k)
            .map(|j| {
                let r = (eps[j] / eps[j + 1]).powi(power);
                (r * prev[j + 1] - prev[j]) / (r - 1.0)
            })
            .collect();
        table.push(row);
    }
    let best = table[n - 1][0];
    let second = table[n - 2][table[n - 2].len() - 1];
    (best, (best - second).abs())
}

/// Per-sample outer function value `exp(h + i h~)` and its phase error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterSample {
    pub x: f64,
    pub value: ComplexPoint,
    pub phase_error: f64,
}

/// Samples of the outer function with boundary modulus `exp(h)`. The
/// modulus is exact; only the phase goes through quadrature.
pub fn outer_from_modulus(h: &PiFunction, grid: &[f64], sched: &PVSchedule) -> Result<Vec<OuterSample>> {
    certify(h)?;
    grid.par_iter()
        .map(|&x| {
            let t = hilbert_unchecked(h, x, sched)?;
            let v = C64::from_polar(h.eval(x).exp(), t.value);
            Ok(OuterSample { x, value: v.into(), phase_error: t.richardson_error })
        })
        .collect()
}

/// Number of evaluation points used by [`weak_l1_tail`].
pub const WEAK_TAIL_POINTS: usize = 1024;

/// Estimates `A * Pi{|h~| > A}` on a grid uniform in `u = arctan(x)`, where
/// each sample carries Poisson weight `pi/M`. A trend, not a proof.
pub fn weak_l1_tail(h: &PiFunction, a_grid: &[f64], sched: &PVSchedule) -> Result<Vec<(f64, f64)>> {
    certify(h)?;
    if a_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) || a_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("A grid must be increasing and positive".into()));
    }
    let m = WEAK_TAIL_POINTS;
    let du = PI / m as f64;
    let lim = 0.5 * sched.window;
    let xs: Vec<f64> = (0..m)
        .map(|k| (-FRAC_PI_2 + (k as f64 + 0.5) * du).tan())
        .filter(|x| x.abs() < lim)
        .collect();
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|&x| hilbert_unchecked(h, x, sched).map(|v| v.value.abs()))
        .collect::<Result<_>>()?;
    Ok(a_grid
        .iter()
        .map(|&a| {
            let count = vals.iter().filter(|v| **v > a).count();
            (a, a * count as f64 * du)
        })
        .collect())
}

/// Source description accepted by the command line and bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum PiSource {
    Zero,
    Poisson,
    Gaussian,
    Const { value: f64 },
    Table { path: String, decay: f64 },
}

impl PiSource {
    pub fn build(&self, base: Option<&Path>) -> Result<PiFunction> {
        Ok(match self {
            PiSource::Zero => PiFunction::zero(),
            PiSource::Poisson => PiFunction::poisson(),
            PiSource::Gaussian => PiFunction::gaussian(),
            PiSource::Const { value } => PiFunction::constant(*value),
            PiSource::Table { path, decay } => {
                let p = Path::new(path);
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                PiFunction::from_csv(&full, *decay)?
            }
        })
    }
}

/// Looks up a registered function by name.
pub fn registry(name: &str) -> Option<PiFunction> {
    match name {
        "zero" => Some(PiFunction::zero()),
        "poisson" => Some(PiFunction::poisson()),
        "gaussian" => Some(PiFunction::gaussian()),
        "const" => Some(PiFunction::constant(1.0)),
        _ => None,
    }
}
