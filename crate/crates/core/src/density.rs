//! Counting functions, the star projection of upper half-plane sequences to
//! the line, strong regularity integrals and density brackets.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::ComplexPoint;
use crate::error::{Error, Result};
use crate::inner::{ArithFamily, FamilyTag};

/// Registered point generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `scale * k`, `|k| <= n`
    Integers,
    /// `scale * sign(k) * k^2`, `|k| <= n`
    SignedSquares,
    /// `scale * k + i`, `|k| <= n`
    ShiftedLattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: GeneratorKind,
    pub n: u64,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// JSON form of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceSource {
    Explicit(Vec<ComplexPoint>),
    Family(FamilyTag),
    Generator(GeneratorSpec),
}

/// Locally finite sequence in the closed upper half-plane. Either an explicit
/// (possibly sampled) point list or an arithmetic progression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSequence {
    points: Vec<ComplexPoint>,
    family: Option<ArithFamily>,
    /// Radius on which an explicit list is taken to be the complete sequence.
    coverage: Option<f64>,
}

fn cmp_points(a: &ComplexPoint, b: &ComplexPoint) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

impl DiscreteSequence {
    pub fn from_points(mut points: Vec<ComplexPoint>) -> Result<Self> {
        for p in &points {
            if !p.is_finite() || p.im < 0.0 {
                return Err(Error::InvalidInput(format!("sequence point {p} is not in the closed upper half-plane")));
            }
        }
        points.sort_by(cmp_points);
        Ok(Self { points, family: None, coverage: None })
    }

    pub fn from_reals(xs: &[f64]) -> Result<Self> {
        Self::from_points(xs.iter().map(|&x| ComplexPoint::real(x)).collect())
    }

    pub fn from_family(f: ArithFamily) -> Result<Self> {
        if !(f.alpha.is_finite() && f.beta.is_finite()) || f.alpha == 0.0 || f.beta < 0.0 {
            return Err(Error::InvalidInput("progression needs alpha != 0 and beta >= 0".into()));
        }
        if let (Some(a), Some(b)) = (f.nmin, f.nmax) {
            if a > b {
                return Err(Error::InvalidInput("empty progression".into()));
            }
            let pts = (a..=b).map(|n| ComplexPoint::new(f.alpha * n as f64, f.beta)).collect();
            let mut s = Self::from_points(pts)?;
            s.family = Some(f);
            return Ok(s);
        }
        Ok(Self { points: Vec::new(), family: Some(f), coverage: None })
    }

    pub fn from_generator(g: &GeneratorSpec) -> Result<Self> {
        if !(g.scale.is_finite() && g.scale > 0.0) {
            return Err(Error::InvalidInput("generator scale must be positive".into()));
        }
        let n = g.n as i64;
        let (pts, cov): (Vec<ComplexPoint>, Option<f64>) = match g.generator {
            GeneratorKind::Integers => {
                ((-n..=n).map(|k| ComplexPoint::real(g.scale * k as f64)).collect(), Some(g.scale * n as f64))
            }
            GeneratorKind::SignedSquares => (
                (-n..=n).map(|k| ComplexPoint::real(g.scale * (k.signum() * k * k) as f64)).collect(),
                Some(g.scale * (n * n) as f64),
            ),
            GeneratorKind::ShiftedLattice => {
                ((-n..=n).map(|k| ComplexPoint::new(g.scale * k as f64, 1.0)).collect(), None)
            }
        };
        let mut s = Self::from_points(pts)?;
        s.coverage = cov;
        Ok(s)
    }

    pub fn from_source(src: &SequenceSource) -> Result<Self> {
        match src {
            SequenceSource::Explicit(p) => Self::from_points(p.clone()),
            SequenceSource::Family(FamilyTag::Arith(f)) => Self::from_family(*f),
            SequenceSource::Generator(g) => Self::from_generator(g),
        }
    }

    pub fn with_coverage(mut self, radius: f64) -> Self {
        self.coverage = Some(radius);
        self
    }

    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn family(&self) -> Option<ArithFamily> {
        self.family
    }

    pub fn is_infinite(&self) -> bool {
        self.family.is_some_and(|f| f.is_infinite())
    }

    pub fn is_real(&self) -> bool {
        match self.family {
            Some(f) if f.is_infinite() => f.beta == 0.0,
            _ => self.points.iter().all(|p| p.im == 0.0),
        }
    }

    /// Multiplies every point by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidInput("scale must be positive".into()));
        }
        let points = self.points.iter().map(|p| ComplexPoint::new(p.re * s, p.im * s)).collect();
        let family = self.family.map(|f| ArithFamily { alpha: f.alpha * s, beta: f.beta * s, ..f });
        Ok(Self { points, family, coverage: self.coverage.map(|c| c * s) })
    }

    /// Radius of the window on which the explicit list is complete. Sampled
    /// two-sided data is trusted up to the smaller of its two extents.
    pub fn coverage(&self) -> f64 {
        if let Some(c) = self.coverage {
            return c;
        }
        let pos = self.points.iter().filter(|p| p.re > 0.0).map(|p| p.re).fold(0.0, f64::max);
        let neg = self.points.iter().filter(|p| p.re < 0.0).map(|p| -p.re).fold(0.0, f64::max);
        match (pos > 0.0, neg > 0.0) {
            (true, true) => pos.min(neg),
            (true, false) => pos,
            (false, true) => neg,
            _ => 0.0,
        }
    }
}

/// Signed count: `#(L in [0,x])` for `x >= 0`, `-#(L in [x,0])` for `x < 0`.
pub fn counting_function(seq: &DiscreteSequence, x: f64) -> Result<i64> {
    if !seq.is_real() {
        let p = seq.points.iter().find(|p| p.im != 0.0).copied().unwrap_or(ComplexPoint::new(0.0, 1.0));
        return Err(Error::NonRealPoint(p.to_string()));
    }
    if let Some(f) = seq.family.filter(|f| f.is_infinite()) {
        return Ok(family_count(&f, x));
    }
    let re: Vec<f64> = seq.points.iter().map(|p| p.re).collect();
    let upper = |v: f64| re.partition_point(|r| *r <= v);
    let lower = |v: f64| re.partition_point(|r| *r < v);
    Ok(if x >= 0.0 {
        (upper(x) - lower(0.0)) as i64
    } else {
        -((upper(0.0) - lower(x)) as i64)
    })
}

fn family_count(f: &ArithFamily, x: f64) -> i64 {
    // indices n in [nmin, nmax] with alpha*n between 0 and x inclusive
    let (lo_v, hi_v) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
    let (a, b) = if f.alpha > 0.0 {
        ((lo_v / f.alpha).ceil(), (hi_v / f.alpha).floor())
    } else {
        ((hi_v / f.alpha).ceil(), (lo_v / f.alpha).floor())
    };
    let a = f.nmin.map_or(a, |m| a.max(m as f64));
    let b = f.nmax.map_or(b, |m| b.min(m as f64));
    let c = if b >= a { (b - a + 1.0) as i64 } else { 0 };
    if x >= 0.0 {
        c
    } else {
        -c
    }
}

/// `[Re(1/l)]^{-1} = |l|^2 / Re(l)`; points with zero real part are dropped.
/// Returns the real sequence and the number of dropped points.
pub fn star_transform(seq: &DiscreteSequence) -> Result<(DiscreteSequence, usize)> {
    if seq.is_infinite() {
        return Err(Error::InvalidInput("star transform needs an explicit point list".into()));
    }
    let mut dropped = 0;
    let mut out = Vec::with_capacity(seq.points.len());
    for p in &seq.points {
        if p.im == 0.0 {
            out.push(*p);
        } else if p.re == 0.0 {
            dropped += 1;
        } else {
            out.push(ComplexPoint::real(star_point(*p)));
        }
    }
    let mut s = DiscreteSequence::from_points(out)?;
    s.coverage = seq.coverage;
    Ok((s, dropped))
}

pub fn star_point(p: ComplexPoint) -> f64 {
    (p.re * p.re + p.im * p.im) / p.re
}

/// Windows `W` at which regularity integrals are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSchedule {
    pub windows: Vec<f64>,
    /// Bound on the extrapolated tail below which the integral is accepted
    /// as convergent.
    pub tolerance: f64,
}

impl WindowSchedule {
    /// Doubling windows from 4 up to `max_window`.
    pub fn doubling(max_window: f64, tolerance: f64) -> Self {
        let mut windows = Vec::new();
        let mut w = 4.0;
        while w <= max_window {
            windows.push(w);
            w *= 2.0;
        }
        Self { windows, tolerance }
    }

    fn validate(&self) -> Result<()> {
        if self.windows.iter().any(|w| !(*w > 0.0)) || self.windows.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidInput("windows must be positive and increasing".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_REGULARITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub a: f64,
    /// `(W, int_{|x|<=W} |n(x) - a x|/(1+x^2) dx)`
    pub window_integrals: Vec<(f64, f64)>,
    pub converged: bool,
    /// Value plus extrapolated tail; `None` when no finite limit is supported.
    pub extrapolated_value: Option<f64>,
    /// Fitted decay exponent `p` of the increments `c / W^p`.
    pub fitted_exponent: Option<f64>,
    pub tail_estimate: Option<f64>,
}

/// `int_u^v |k - a y|/(1+y^2) dy` for `0 <= u <= v`.
fn step_integral(k: f64, a: f64, u: f64, v: f64) -> f64 {
    if v <= u {
        return 0.0;
    }
    let d_atan = |l: f64, r: f64| if r.is_infinite() { std::f64::consts::FRAC_PI_2 - l.atan() } else { ((r - l) / (1.0 + l * r)).atan() };
    let d_log = |l: f64, r: f64| ((r - l) * (r + l) / (1.0 + l * l)).ln_1p();
    let signed = |l: f64, r: f64| {
        if a == 0.0 {
            k * d_atan(l, r)
        } else {
            k * d_atan(l, r) - 0.5 * a * d_log(l, r)
        }
    };
    if a != 0.0 {
        let y0 = k / a;
        if y0 > u && y0 < v {
            return signed(u, y0).abs() + signed(y0, v).abs();
        }
    }
    signed(u, v).abs()
}

/// Integrals over `[0, W]` of `|n(y) - a y|/(1+y^2)`, where `n(y)` counts
/// `breaks <= y` (sorted, nonnegative), for every window in `windows`.
fn one_side(breaks: &[f64], a: f64, windows: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(windows.len());
    let mut acc = 0.0;
    let mut comp = 0.0;
    let mut pos = 0.0;
    let mut idx = 0usize;
    for &w in windows {
        while idx < breaks.len() && breaks[idx] <= w {
            let b = breaks[idx];
            let v = step_integral(idx as f64, a, pos, b);
            // Neumaier accumulation keeps the sums order-stable
            let t = acc + v;
            comp += if acc.abs() >= v.abs() { (acc - t) + v } else { (v - t) + acc };
            acc = t;
            pos = pos.max(b);
            idx += 1;
        }
        let v = step_integral(idx as f64, a, pos, w);
        out.push(acc + comp + v);
    }
    out
}

/// Window integrals of `|n(x) - a x|/(1+x^2)`, integrated exactly step by
/// step, with a power-law fit of the increments to decide convergence.
pub fn regularity_integral(seq: &DiscreteSequence, a: f64, sched: &WindowSchedule) -> Result<RegularityReport> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidInput(format!("a must be finite and >= 0, got {a}")));
    }
    sched.validate()?;
    if !seq.is_real() {
        let p = seq.points.iter().find(|p| p.im != 0.0).copied().unwrap_or(ComplexPoint::new(0.0, 1.0));
        return Err(Error::NonRealPoint(p.to_string()));
    }
    if seq.is_infinite() {
        return Err(Error::InvalidInput("regularity integrals need an explicit point list".into()));
    }
    let mut pos: Vec<f64> = seq.points.iter().filter(|p| p.re >= 0.0).map(|p| p.re).collect();
    let mut neg: Vec<f64> = seq.points.iter().filter(|p| p.re <= 0.0).map(|p| -p.re).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let right = one_side(&pos, a, &sched.windows);
    let left = one_side(&neg, a, &sched.windows);
    let window_integrals: Vec<(f64, f64)> =
        sched.windows.iter().zip(right.iter().zip(&left)).map(|(&w, (r, l))| (w, r + l)).collect();
    let (converged, fitted_exponent, tail_estimate) = fit_tail(&window_integrals, sched.tolerance);
    let last = window_integrals.last().map(|p| p.1);
    let extrapolated_value = match (converged, last, tail_estimate) {
        (true, Some(v), Some(t)) => Some(v + t),
        _ => None,
    };
    Ok(RegularityReport { a, window_integrals, converged, extrapolated_value, fitted_exponent, tail_estimate })
}

const FIT_POINTS: usize = 4;

/// Fits the last increments to `c / W^p` and extrapolates the geometric tail.
fn fit_tail(values: &[(f64, f64)], tol: f64) -> (bool, Option<f64>, Option<f64>) {
    if values.len() < 3 {
        return (false, None, None);
    }
    let incs: Vec<(f64, f64)> = values.windows(2).map(|p| (p[1].0, p[1].1 - p[0].1)).collect();
    let recent = &incs[incs.len().saturating_sub(FIT_POINTS)..];
    let scale = 1.0 + values.last().unwrap().1.abs();
    if recent.iter().all(|(_, d)| d.abs() <= 1e-14 * scale) {
        return (true, None, Some(0.0));
    }
    let pts: Vec<(f64, f64)> = recent.iter().filter(|(_, d)| *d > 0.0).map(|(w, d)| (w.ln(), d.ln())).collect();
    if pts.len() < 2 {
        return (false, None, None);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let p = -sxy / sxx;
    let k = values.len();
    let ratio = values[k - 1].0 / values[k - 2].0;
    let d_last = recent.last().unwrap().1.max(0.0);
    if !(p > 0.0) || !(ratio > 1.0) {
        return (false, Some(p), None);
    }
    let r = ratio.powf(-p);
    let tail = d_last * r / (1.0 - r);
    (tail < tol, Some(p), Some(tail))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityMethod {
    FamilyClosedForm,
    SelfRegularity,
    Inconclusive,
}

/// Bounds `lower <= D_* <= D^* <= upper`; `upper = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityBracket {
    pub lower: f64,
    pub upper: Option<f64>,
    pub exact: bool,
    pub method: DensityMethod,
}

impl DensityBracket {
    pub fn exact_value(&self) -> Option<f64> {
        if self.exact {
            Some(self.lower)
        } else {
            None
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { lower: self.lower * s, upper: self.upper.map(|u| u * s), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub bracket: DensityBracket,
    pub reports: Vec<RegularityReport>,
    pub dropped_points: usize,
    pub coverage: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Nearest fraction `p/q` with `q <= 16`.
pub fn snap_rational(x: f64) -> f64 {
    let mut best = x.round();
    for q in 1..=16 {
        let c = (x * q as f64).round() / q as f64;
        if (c - x).abs() < (best - x).abs() - 1e-15 {
            best = c;
        }
    }
    best
}

/// Candidate densities: slope of the counting function over the covered
/// window snapped to a simple fraction, plus 0.
fn default_candidates(seq: &DiscreteSequence, radius: f64) -> Result<Vec<f64>> {
    let span = counting_function(seq, radius)? - counting_function(seq, -radius)?;
    let slope = span as f64 / (2.0 * radius);
    let mut c = vec![snap_rational(slope).max(0.0), 0.0];
    c.dedup();
    Ok(c)
}

/// Density bracket. Infinite progressions use their closed form; explicit
/// lists are star-transformed and tested for self-regularity on each
/// candidate `a`; nothing else is certified.
pub fn estimate_density_bracket(
    seq: &DiscreteSequence,
    a_grid: Option<&[f64]>,
    sched: Option<&WindowSchedule>,
) -> Result<DensityEstimate> {
    if let Some(f) = seq.family.filter(|f| f.is_infinite()) {
        let d = 1.0 / f.alpha.abs();
        let two_sided = f.is_two_sided_infinite();
        let (lower, diag) = if two_sided {
            (d, "two-sided progression: n(x) - x/|alpha| is bounded")
        } else {
            (0.0, "one-sided progression: interior density 0, exterior density 1/|alpha|")
        };
        return Ok(DensityEstimate {
            bracket: DensityBracket { lower, upper: Some(d), exact: two_sided, method: DensityMethod::FamilyClosedForm },
            reports: Vec::new(),
            dropped_points: 0,
            coverage: None,
            diagnostics: vec![diag.to_string()],
        });
    }
    let (real, dropped) = if seq.is_real() { (seq.clone(), 0) } else { star_transform(seq)? };
    let radius = real.coverage();
    let mut diagnostics = Vec::new();
    if dropped > 0 {
        diagnostics.push(format!("{dropped} purely imaginary point(s) dropped by the star transform"));
    }
    let inconclusive = |reports, diagnostics| DensityEstimate {
        bracket: DensityBracket { lower: 0.0, upper: None, exact: false, method: DensityMethod::Inconclusive },
        reports,
        dropped_points: dropped,
        coverage: Some(radius),
        diagnostics,
    };
    let schedule = match sched {
        Some(s) => s.clone(),
        None => WindowSchedule::doubling(radius, DEFAULT_REGULARITY_TOL),
    };
    if schedule.windows.len() < 3 {
        diagnostics.push(format!("coverage radius {radius} leaves fewer than three windows"));
        return Ok(inconclusive(Vec::new(), diagnostics));
    }
    let candidates = match a_grid {
        Some(g) => g.to_vec(),
        None => default_candidates(&real, radius)?,
    };
    let reports: Vec<RegularityReport> =
        candidates.par_iter().map(|&a| regularity_integral(&real, a, &schedule)).collect::<Result<_>>()?;
    let hits: Vec<f64> = reports.iter().filter(|r| r.converged).map(|r| r.a).collect();
    match hits.as_slice() {
        [a] => Ok(DensityEstimate {
            bracket: DensityBracket { lower: *a, upper: Some(*a), exact: true, method: DensityMethod::SelfRegularity },
            reports,
            dropped_points: dropped,
            coverage: Some(radius),
            diagnostics,
        }),
        [] => {
            diagnostics.push("no candidate a gives a convergent regularity integral".into());
            Ok(inconclusive(reports, diagnostics))
        }
        many => {
            diagnostics.push(format!(
                "inconsistent: regularity integrals converge for several a = {many:?}; \
                 the window schedule does not resolve the tail"
            ));
            Ok(inconclusive(reports, diagnostics))
        }
    }
}

/// Threshold `2 pi D` and the Toeplitz-kernel statements it separates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelThreshold {
    pub density: f64,
    pub threshold: f64,
    pub statements: Vec<String>,
}

pub fn density_to_kernel_threshold(bracket: &DensityBracket) -> Result<KernelThreshold> {
    let d = match bracket.exact_value() {
        Some(d) => d,
        None => {
            return Err(Error::InexactBracket { lower: bracket.lower, upper: bracket.upper.unwrap_or(f64::INFINITY) })
        }
    };
    let t = 2.0 * PI * d;
    Ok(KernelThreshold {
        density: d,
        threshold: t,
        statements: vec![
            format!("ker T[S^c conj(B)] != {{0}} for c < {t}"),
            format!("ker T[S^c conj(B)] = {{0}} for c > {t}"),
            format!("ker T[conj(S^c) B] = {{0}} for c < {t}"),
            format!("ker T[conj(S^c) B] != {{0}} for c > {t}"),
            format!("c = {t} is not decided"),
        ],
    })
}

/// Writes `(W, integral)` pairs as CSV.
pub fn write_report_csv(report: &RegularityReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["W", "integral"])?;
    for (win, v) in &report.window_integrals {
        w.write_record([format!("{win}"), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}
