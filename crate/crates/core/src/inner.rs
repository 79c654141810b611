//! Meromorphic inner functions on the upper half-plane.
//!
//! A function is stored in its exact parametric form
//! `U(z) = C exp(iaz) prod_n exp(i alpha_n) (z - w_n)/(z - conj(w_n))`,
//! where the phase `alpha_n` makes each factor positive at `z = i`. Zero sets
//! are either finite lists or arithmetic progressions `alpha*n + i*beta`;
//! infinite products are truncated symmetrically and every evaluation
//! carries an explicit bound on the discarded tail.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::complex::{wrap_angle, ComplexPoint, C64, I};
use crate::error::{Error, Result};
use crate::exprational::ExpRational;

/// Truncation levels for infinite products and series. For progressions a
/// level `N` keeps the indices `|n| <= N`. Explicit zero lists are always
/// used in full, except by the Blaschke sum, which reports partial sums over
/// the first `N` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSchedule {
    pub levels: Vec<usize>,
    pub tolerance: f64,
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self { levels: vec![64, 256, 1024, 4096], tolerance: 1e-3 }
    }
}

impl TruncationSchedule {
    pub fn single(level: usize) -> Self {
        Self { levels: vec![level], tolerance: 1e-3 }
    }

    /// Geometric schedule `4, 16, ..., 4^10` used for Blaschke sums.
    pub fn blaschke_default() -> Self {
        Self { levels: (1..=10).map(|k| 4usize.pow(k)).collect(), tolerance: 1e-5 }
    }

    pub fn final_level(&self) -> usize {
        self.levels.last().copied().unwrap_or(0)
    }
}

/// Zeros `alpha*n + i*beta` for `n` in `[nmin, nmax]`; a missing bound means
/// the progression is infinite in that direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArithFamily {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub nmin: Option<i64>,
    #[serde(default)]
    pub nmax: Option<i64>,
}

impl ArithFamily {
    pub fn two_sided(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, nmin: None, nmax: None }
    }

    pub fn is_infinite(&self) -> bool {
        self.nmin.is_none() || self.nmax.is_none()
    }

    pub fn is_two_sided_infinite(&self) -> bool {
        self.nmin.is_none() && self.nmax.is_none()
    }

    pub fn point(&self, n: i64) -> C64 {
        C64::new(self.alpha * n as f64, self.beta)
    }

    /// Index range kept at truncation level `level`.
    pub fn index_range(&self, level: usize) -> (i64, i64) {
        let l = level as i64;
        let lo = self.nmin.map_or(-l, |m| m.max(-l));
        let hi = self.nmax.map_or(l, |m| m.min(l));
        (lo, hi)
    }

    /// Number of indices with `|n| > level` on each side, `None` if infinite.
    fn outside(&self, level: usize) -> (Option<i64>, Option<i64>) {
        let l = level as i64;
        let left = self.nmin.map(|m| (-l - m).max(0));
        let right = self.nmax.map(|m| (m - l).max(0));
        (left, right)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidInput("non-finite progression parameters".into()));
        }
        if self.beta <= 0.0 {
            return Err(Error::NonUpperHalfZero(format!("progression with beta = {}", self.beta)));
        }
        if self.is_infinite() && self.alpha == 0.0 {
            return Err(Error::InvalidInput("infinite progression needs alpha != 0".into()));
        }
        if let (Some(a), Some(b)) = (self.nmin, self.nmax) {
            if a > b {
                return Err(Error::InvalidInput(format!("empty progression range [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

/// JSON form of a zero set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZeroSet {
    Explicit(Vec<ComplexPoint>),
    Family(FamilyTag),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyTag {
    Arith(ArithFamily),
}

/// Zeros of a Blaschke product together with their normalizing phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZeroSet", into = "ZeroSet")]
pub struct BlaschkeData {
    zeros: Zeros,
    phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Zeros {
    Explicit(Vec<C64>),
    Arith(ArithFamily),
}

impl TryFrom<ZeroSet> for BlaschkeData {
    type Error = Error;
    fn try_from(z: ZeroSet) -> Result<Self> {
        match z {
            ZeroSet::Explicit(pts) => BlaschkeData::explicit(pts.into_iter().map(C64::from).collect()),
            ZeroSet::Family(FamilyTag::Arith(f)) => BlaschkeData::arith(f),
        }
    }
}

impl From<BlaschkeData> for ZeroSet {
    fn from(b: BlaschkeData) -> Self {
        match b.zeros {
            Zeros::Explicit(v) => ZeroSet::Explicit(v.into_iter().map(ComplexPoint::from).collect()),
            Zeros::Arith(f) => ZeroSet::Family(FamilyTag::Arith(f)),
        }
    }
}

impl Default for BlaschkeData {
    fn default() -> Self {
        Self { zeros: Zeros::Explicit(Vec::new()), phases: Vec::new() }
    }
}

impl BlaschkeData {
    pub fn explicit(zeros: Vec<C64>) -> Result<Self> {
        for w in &zeros {
            if !(w.re.is_finite() && w.im.is_finite()) || w.im <= 0.0 {
                return Err(Error::NonUpperHalfZero(ComplexPoint::from(*w).to_string()));
            }
        }
        let phases = zeros.iter().map(|&w| phase_alpha_unchecked(w)).collect();
        Ok(Self { zeros: Zeros::Explicit(zeros), phases })
    }

    pub fn arith(family: ArithFamily) -> Result<Self> {
        family.validate()?;
        Ok(Self { zeros: Zeros::Arith(family), phases: Vec::new() })
    }

    pub fn is_empty(&self) -> bool {
        matches!(&self.zeros, Zeros::Explicit(v) if v.is_empty())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(&self.zeros, Zeros::Arith(f) if f.is_infinite())
    }

    /// Number of zeros, `None` when infinite.
    pub fn count(&self) -> Option<usize> {
        match &self.zeros {
            Zeros::Explicit(v) => Some(v.len()),
            Zeros::Arith(f) => match (f.nmin, f.nmax) {
                (Some(a), Some(b)) => Some((b - a + 1) as usize),
                _ => None,
            },
        }
    }

    pub fn family(&self) -> Option<ArithFamily> {
        match &self.zeros {
            Zeros::Arith(f) => Some(*f),
            Zeros::Explicit(_) => None,
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Zeros kept at a truncation level, in a fixed order.
    pub fn truncated(&self, level: usize) -> Vec<C64> {
        match &self.zeros {
            Zeros::Explicit(v) => v.iter().take(level).copied().collect(),
            Zeros::Arith(f) => {
                let (lo, hi) = f.index_range(level);
                (lo..=hi).map(|n| f.point(n)).collect()
            }
        }
    }

    /// All zeros; only for finite sets.
    pub fn all(&self) -> Option<Vec<C64>> {
        self.count().map(|n| match &self.zeros {
            Zeros::Explicit(v) => v.clone(),
            Zeros::Arith(f) => {
                let (lo, _) = (f.nmin.unwrap(), f.nmax.unwrap());
                (0..n as i64).map(|k| f.point(lo + k)).collect()
            }
        })
    }

    /// Level that keeps every zero of a finite set.
    pub fn full_level(&self) -> Option<usize> {
        match &self.zeros {
            Zeros::Explicit(v) => Some(v.len()),
            Zeros::Arith(f) => match (f.nmin, f.nmax) {
                (Some(a), Some(b)) => Some(a.unsigned_abs().max(b.unsigned_abs()) as usize),
                _ => None,
            },
        }
    }

    fn phase_of(&self, idx: usize, w: C64) -> f64 {
        match &self.zeros {
            Zeros::Explicit(_) => self.phases[idx],
            Zeros::Arith(_) => phase_alpha_unchecked(w),
        }
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        match &self.zeros {
            Zeros::Explicit(v) => Self::explicit(v.iter().map(|w| w * s).collect()),
            Zeros::Arith(f) => Self::arith(ArithFamily { alpha: f.alpha * s, beta: f.beta * s, ..*f }),
        }
    }
}

/// Parametric meromorphic inner function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerFunctionSpec {
    pub mass: f64,
    #[serde(default = "unit_constant")]
    pub constant: ComplexPoint,
    #[serde(default, rename = "zeros")]
    pub blaschke: BlaschkeData,
}

fn unit_constant() -> ComplexPoint {
    ComplexPoint::new(1.0, 0.0)
}

impl InnerFunctionSpec {
    pub fn new(mass: f64, constant: C64, blaschke: BlaschkeData) -> Result<Self> {
        let s = Self { mass, constant: constant.into(), blaschke };
        s.validate()?;
        Ok(s)
    }

    /// `exp(i*a*z)`
    pub fn singular(mass: f64) -> Self {
        Self { mass, constant: unit_constant(), blaschke: BlaschkeData::default() }
    }

    /// The elementary factor `(z - i)/(z + i)`.
    pub fn b_i() -> Self {
        Self::blaschke(vec![I]).expect("i is in the upper half-plane")
    }

    pub fn blaschke(zeros: Vec<C64>) -> Result<Self> {
        Ok(Self { mass: 0.0, constant: unit_constant(), blaschke: BlaschkeData::explicit(zeros)? })
    }

    pub fn arith(mass: f64, family: ArithFamily) -> Result<Self> {
        Ok(Self { mass, constant: unit_constant(), blaschke: BlaschkeData::arith(family)? })
    }

    pub fn with_constant(mut self, c: C64) -> Self {
        self.constant = c.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(Error::InvalidInput(format!("mass must be finite and >= 0, got {}", self.mass)));
        }
        let c = self.constant.to_c64();
        if !c.re.is_finite() || (c.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("constant {} is not unimodular", self.constant)));
        }
        if let Some(f) = self.blaschke.family() {
            f.validate()?;
        }
        Ok(())
    }

    pub fn is_finite_blaschke_product(&self) -> bool {
        self.mass == 0.0 && !self.blaschke.is_infinite()
    }

    /// Product of two specifications (masses add, zero lists concatenate).
    /// Only finite zero sets can be combined with other zeros.
    pub fn product(&self, other: &InnerFunctionSpec) -> Result<InnerFunctionSpec> {
        let c = self.constant.to_c64() * other.constant.to_c64();
        let blaschke = if self.blaschke.is_empty() {
            other.blaschke.clone()
        } else if other.blaschke.is_empty() {
            self.blaschke.clone()
        } else {
            match (self.blaschke.all(), other.blaschke.all()) {
                (Some(mut a), Some(b)) => {
                    a.extend(b);
                    BlaschkeData::explicit(a)?
                }
                _ => {
                    return Err(Error::InvalidInput(
                        "cannot merge an infinite zero set with further zeros".into(),
                    ))
                }
            }
        };
        InnerFunctionSpec::new(self.mass + other.mass, c, blaschke)
    }

    /// Truncation level that should be used for an operation, given a schedule.
    fn level(&self, schedule: &TruncationSchedule) -> usize {
        match &self.blaschke.zeros {
            Zeros::Explicit(v) => v.len(),
            Zeros::Arith(_) => schedule.final_level(),
        }
    }

    /// Converts the function to its closed exponential-rational form on the
    /// line; an infinite progression is truncated at `level`.
    pub fn to_exprational(&self, level: usize) -> ExpRational {
        let level = self.blaschke.full_level().unwrap_or(level);
        let zeros = self.blaschke.truncated(level);
        let k: C64 = (0..zeros.len())
            .map(|j| C64::from_polar(1.0, self.blaschke.phase_of(j, zeros[j])))
            .product();
        let lead = self.constant.to_c64() * k;
        let rational = blaschke_partial_fractions(&zeros);
        rational.scale(lead).shift(self.mass)
    }
}

/// `prod (x - w)/(x - conj w)` as `1 + sum of pole terms`.
fn blaschke_partial_fractions(zeros: &[C64]) -> ExpRational {
    let one = C64::new(1.0, 0.0);
    let distinct = zeros.iter().enumerate().all(|(j, a)| {
        zeros[..j].iter().all(|b| !crate::exprational::same_point(*a, *b))
    });
    if distinct {
        let mut out = ExpRational::constant(one);
        for (n, &w) in zeros.iter().enumerate() {
            let p = w.conj();
            let mut r = p - w;
            for (m, &v) in zeros.iter().enumerate() {
                if m != n {
                    r *= (p - v) / (p - v.conj());
                }
            }
            out.terms.push(crate::exprational::Term {
                coeff: r,
                freq: 0.0,
                pole: Some(crate::exprational::Pole { at: p, order: 1 }),
            });
        }
        out
    } else {
        let mut out = ExpRational::constant(one);
        for &w in zeros {
            let factor = ExpRational::constant(one).add(&ExpRational::pole(w.conj() - w, 0.0, w.conj(), 1));
            out = out.mul(&factor);
        }
        out
    }
}

/// Result of evaluating an infinite or finite product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: ComplexPoint,
    pub truncation_error_bound: f64,
    pub terms_used: usize,
}

impl EvalResult {
    pub fn c64(&self) -> C64 {
        self.value.to_c64()
    }

    /// Floating-point allowance for the factors actually multiplied.
    pub fn roundoff_allowance(&self) -> f64 {
        16.0 * f64::EPSILON * (self.terms_used as f64 + 2.0)
    }

    /// Truncation bound plus rounding allowance.
    pub fn tolerance(&self) -> f64 {
        self.truncation_error_bound + self.roundoff_allowance()
    }
}

pub fn phase_alpha(w: ComplexPoint) -> Result<f64> {
    if !w.is_finite() || !w.in_upper_half() {
        return Err(Error::NonUpperHalfZero(w.to_string()));
    }
    Ok(phase_alpha_unchecked(w.to_c64()))
}

fn phase_alpha_unchecked(w: C64) -> f64 {
    let num = I - w;
    // At w = i the defining ratio is 0/0 and the factor is already b_i.
    if num.norm() <= 1e-15 {
        return 0.0;
    }
    let r = num / (I - w.conj());
    wrap_angle(-r.arg())
}

/// Normalized factor `exp(i alpha)(z - w)/(z - conj w)` written as
/// `|r| (1 + q)` so that it stays accurate for large `|w|`.
fn factor(w: C64, z: C64) -> C64 {
    if (I - w).norm() <= 1e-15 {
        return (z - I) / (z + I);
    }
    let rmod = (I - w).norm() / (I - w.conj()).norm();
    let q = 2.0 * I * w.im * (z - I) / ((z - w.conj()) * (I - w));
    rmod * (1.0 + q)
}

/// Bound on `|factor(w, z) - 1|` for `z` in the closed upper half-plane.
fn factor_deviation(w: C64, z: C64) -> f64 {
    if (I - w).norm() <= 1e-15 {
        return 2.0 / (z + I).norm();
    }
    let e1 = 2.0 * w.im * (z - I).norm() / ((z - w.conj()).norm() * (I - w).norm());
    e1 + 4.0 * w.im / (I - w.conj()).norm_sqr()
}

/// Sum of `factor_deviation` over the zeros not kept at `level`.
fn tail_deviation(b: &BlaschkeData, level: usize, z: C64) -> f64 {
    match &b.zeros {
        Zeros::Explicit(v) => v.iter().skip(level).map(|&w| factor_deviation(w, z)).sum(),
        Zeros::Arith(f) => {
            let zmax = z.norm().max(1.0);
            let closed = |n0: i64| f.beta * (8.0 * (z - I).norm() + 16.0) / (f.alpha * f.alpha * n0 as f64);
            family_tail(f, level, zmax, |w| factor_deviation(w, z), closed)
        }
    }
}

/// Tail sum over indices `|n| > level` of a progression. Indices up to the
/// point where `alpha*|n| >= 2*scale` are summed exactly, the rest by the
/// closed-form majorant `closed(n0)` per infinite side.
fn family_tail<F, G>(f: &ArithFamily, level: usize, scale: f64, term: F, closed: G) -> f64
where
    F: Fn(C64) -> f64,
    G: Fn(i64) -> f64,
{
    let l = level as i64;
    let n0 = l.max((2.0 * scale / f.alpha.abs()).ceil() as i64 + 1);
    let mut sum = 0.0;
    let (left_out, right_out) = f.outside(level);
    // right side
    let right_end = match right_out {
        Some(0) => l,
        Some(k) => (l + k).min(n0),
        None => n0,
    };
    for n in (l + 1)..=right_end {
        sum += term(f.point(n));
    }
    match right_out {
        None => sum += closed(n0),
        Some(k) if l + k > n0 => sum += closed(n0),
        _ => {}
    }
    let left_end = match left_out {
        Some(0) => l,
        Some(k) => (l + k).min(n0),
        None => n0,
    };
    for n in (l + 1)..=left_end {
        sum += term(f.point(-n));
    }
    match left_out {
        None => sum += closed(n0),
        Some(k) if l + k > n0 => sum += closed(n0),
        _ => {}
    }
    sum
}

/// Partial sums of `Im(w)/(1+|w|^2)` along the schedule, plus whether the
/// last two stages agree within the schedule tolerance.
pub fn blaschke_condition_sum(zeros: &[ComplexPoint], schedule: &TruncationSchedule) -> Result<(Vec<f64>, bool)> {
    for w in zeros {
        if !w.is_finite() || !w.in_upper_half() {
            return Err(Error::NonUpperHalfZero(w.to_string()));
        }
    }
    if zeros.is_empty() {
        return Ok((vec![0.0], true));
    }
    let terms: Vec<f64> = zeros.iter().map(|w| w.im / (1.0 + w.re * w.re + w.im * w.im)).collect();
    let sums = partial_sums_at(&terms, &schedule.levels);
    let converged = converged_tail(&sums, schedule.tolerance);
    Ok((sums, converged))
}

/// Same as [`blaschke_condition_sum`] for a zero set of a specification;
/// progressions are summed over `|n| <= level`.
pub fn blaschke_condition_sum_for(data: &BlaschkeData, schedule: &TruncationSchedule) -> (Vec<f64>, bool) {
    if data.is_empty() {
        return (vec![0.0], true);
    }
    let term = |w: C64| w.im / (1.0 + w.norm_sqr());
    let sums: Vec<f64> = schedule
        .levels
        .iter()
        .map(|&l| crate::complex::compensated_sum(data.truncated(l).into_iter().map(term)))
        .collect();
    let converged = converged_tail(&sums, schedule.tolerance);
    (sums, converged)
}

fn partial_sums_at(terms: &[f64], levels: &[usize]) -> Vec<f64> {
    levels
        .iter()
        .map(|&l| crate::complex::compensated_sum(terms.iter().take(l).copied()))
        .collect()
}

fn converged_tail(sums: &[f64], tol: f64) -> bool {
    match sums {
        [] => true,
        [_] => true,
        [.., a, b] => (b - a).abs() < tol,
    }
}

/// Evaluates the truncated product at `z` in the closed upper half-plane
/// (or anywhere off the poles when the zero set is finite and fully kept).
pub fn eval_inner(spec: &InnerFunctionSpec, z: ComplexPoint, schedule: &TruncationSchedule) -> Result<EvalResult> {
    eval_at_level(spec, z.to_c64(), spec.level(schedule))
}

pub(crate) fn eval_at_level(spec: &InnerFunctionSpec, z: C64, level: usize) -> Result<EvalResult> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite evaluation point".into()));
    }
    let zeros = spec.blaschke.truncated(level);
    let complete = spec.blaschke.count().is_some_and(|n| zeros.len() == n);
    if z.im < 0.0 {
        if !complete {
            return Err(Error::TailNotBounded(format!(
                "truncated product evaluated in the lower half-plane at {}",
                ComplexPoint::from(z)
            )));
        }
        for w in &zeros {
            if (z - w.conj()).norm() <= 1e-14 * (1.0 + w.norm()) {
                return Err(Error::PoleHit(ComplexPoint::from(z).to_string()));
            }
        }
    }
    let mut value = spec.constant.to_c64() * (I * spec.mass * z).exp();
    for (j, &w) in zeros.iter().enumerate() {
        value *= if z.im < 0.0 {
            C64::from_polar(1.0, spec.blaschke.phase_of(j, w)) * (z - w) / (z - w.conj())
        } else {
            factor(w, z)
        };
    }
    let bound = if complete { 0.0 } else { tail_deviation(&spec.blaschke, level, z).exp_m1() };
    Ok(EvalResult { value: value.into(), truncation_error_bound: bound, terms_used: zeros.len() })
}

/// `a + sum 2 Im(w)/|x - w|^2` truncated, with a bound on the omitted part.
pub fn derivative_modulus_with_bounds(
    spec: &InnerFunctionSpec,
    grid: &[f64],
    schedule: &TruncationSchedule,
) -> Result<Vec<(f64, f64)>> {
    let level = spec.level(schedule);
    let zeros = spec.blaschke.truncated(level);
    grid.iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::InvalidInput("non-finite grid point".into()));
            }
            let term = |w: C64| 2.0 * w.im / (C64::new(x, 0.0) - w).norm_sqr();
            let sum = crate::complex::compensated_sum(zeros.iter().map(|&w| term(w)));
            let tail = match &spec.blaschke.zeros {
                Zeros::Explicit(v) => v.iter().skip(level).map(|&w| term(w)).sum(),
                Zeros::Arith(f) => family_tail(f, level, x.abs(), term, |n0| 8.0 * f.beta / (f.alpha * f.alpha * n0 as f64)),
            };
            Ok((spec.mass + sum, tail))
        })
        .collect()
}

pub fn derivative_modulus_on_line(
    spec: &InnerFunctionSpec,
    grid: &[f64],
    schedule: &TruncationSchedule,
) -> Result<Vec<f64>> {
    Ok(derivative_modulus_with_bounds(spec, grid, schedule)?.into_iter().map(|(v, _)| v).collect())
}

/// Upper bound for `|U'|` on `[x0, x1]`, including the truncated tail.
fn derivative_sup_on_interval(spec: &InnerFunctionSpec, x0: f64, x1: f64, level: usize) -> f64 {
    let term = |w: C64| {
        let d = w.re - w.re.clamp(x0, x1);
        2.0 * w.im / (d * d + w.im * w.im)
    };
    let head: f64 = spec.blaschke.truncated(level).into_iter().map(term).sum();
    let tail = match &spec.blaschke.zeros {
        Zeros::Explicit(v) => v.iter().skip(level).map(|&w| term(w)).sum(),
        Zeros::Arith(f) => {
            let scale = x0.abs().max(x1.abs());
            family_tail(f, level, scale, term, |n0| 8.0 * f.beta / (f.alpha * f.alpha * n0 as f64))
        }
    };
    spec.mass + head + tail
}

/// Continuous boundary argument on an increasing grid, pinned so the sample
/// nearest 0 lies in `(-pi, pi]`.
pub fn arg_on_line(spec: &InnerFunctionSpec, grid: &[f64], schedule: &TruncationSchedule) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    let level = spec.level(schedule);
    for w in grid.windows(2) {
        let jump = (w[1] - w[0]) * derivative_sup_on_interval(spec, w[0], w[1], level);
        if jump >= PI {
            return Err(Error::GridTooCoarse(format!(
                "argument may advance by up to {jump:.3} on [{}, {}]",
                w[0], w[1]
            )));
        }
    }
    let values: Vec<C64> = grid
        .iter()
        .map(|&x| eval_at_level(spec, C64::new(x, 0.0), level).map(|r| r.c64()))
        .collect::<Result<_>>()?;
    let anchor = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap();
    let mut theta = vec![0.0; grid.len()];
    theta[anchor] = values[anchor].arg();
    for k in anchor + 1..grid.len() {
        theta[k] = theta[k - 1] + (values[k] * values[k - 1].conj()).arg();
    }
    for k in (0..anchor).rev() {
        theta[k] = theta[k + 1] - (values[k + 1] * values[k].conj()).arg();
    }
    Ok(theta)
}

/// Which reproducing kernel to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum KernelSource<'a> {
    /// The Hardy space `H^2` of the upper half-plane.
    Hardy,
    /// The model space `K_U`.
    Model(&'a InnerFunctionSpec),
}

/// Reproducing kernel for `<f, g> = integral f conj(g) dx`:
/// `k(z) = (i/2pi) (1 - conj(U(lambda)) U(z)) / (z - conj(lambda))`.
pub fn reproducing_kernel(
    source: KernelSource<'_>,
    lambda: ComplexPoint,
    z: ComplexPoint,
    schedule: &TruncationSchedule,
) -> Result<ComplexPoint> {
    if !lambda.is_finite() || !lambda.in_upper_half() {
        return Err(Error::NonUpperHalfPoint(lambda.to_string()));
    }
    let (l, zc) = (lambda.to_c64(), z.to_c64());
    let denom = zc - l.conj();
    if denom.norm() == 0.0 {
        return Err(Error::PoleHit(z.to_string()));
    }
    let numer = match source {
        KernelSource::Hardy => C64::new(1.0, 0.0),
        KernelSource::Model(spec) => {
            let ul = eval_inner(spec, lambda, schedule)?.c64();
            let uz = eval_inner(spec, z, schedule)?.c64();
            1.0 - ul.conj() * uz
        }
    };
    Ok((I / (2.0 * PI) * numer / denom).into())
}

/// The Hardy-space kernel at `i` in the normalization `1/(pi (z + i))`.
/// It equals `-2i` times the reproducing kernel at `i`.
pub fn hardy_kernel_at_i(z: ComplexPoint) -> ComplexPoint {
    (1.0 / (PI * (z.to_c64() + I))).into()
}

/// Closed exponential-rational form of the model-space kernel at `lambda`,
/// with the function truncated at `level`.
pub fn kernel_exprational(spec: Option<&InnerFunctionSpec>, lambda: C64, level: usize) -> ExpRational {
    let c = I / (2.0 * PI);
    let base = ExpRational::pole(c, 0.0, lambda.conj(), 1);
    match spec {
        None => base,
        Some(u) => {
            let ur = u.to_exprational(level);
            let ul = ur.eval(lambda);
            let prod = ur.mul(&base).scale(ul.conj());
            base.sub(&prod)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new(re, im)
    }

    fn lattice(n: i64) -> InnerFunctionSpec {
        InnerFunctionSpec::arith(0.0, ArithFamily { alpha: 1.0, beta: 1.0, nmin: Some(-n), nmax: Some(n) }).unwrap()
    }

    #[test]
    fn empty_blaschke_sum() {
        let (s, c) = blaschke_condition_sum(&[], &TruncationSchedule::blaschke_default()).unwrap();
        assert_eq!(s, vec![0.0]);
        assert!(c);
    }

    #[test]
    fn rejects_lower_zero() {
        assert!(matches!(
            blaschke_condition_sum(&[cp(0.0, -1.0)], &TruncationSchedule::default()),
            Err(Error::NonUpperHalfZero(_))
        ));
        assert!(phase_alpha(cp(1.0, 0.0)).is_err());
    }

    #[test]
    fn geometric_imaginary_zeros_converge() {
        let zeros: Vec<ComplexPoint> = (0..60).map(|k| cp(0.0, 2f64.powi(k))).collect();
        let (sums, conv) = blaschke_condition_sum(&zeros, &TruncationSchedule::blaschke_default()).unwrap();
        assert!(conv);
        // Oracle: sum_k 2^k/(1+4^k) with the geometric tail bound 2^{-K+1}.
        let direct: f64 = (0..60).map(|k| 2f64.powi(k) / (1.0 + 4f64.powi(k))).sum();
        assert!((sums.last().unwrap() - direct).abs() < 1e-14);
        let head: f64 = (0..16).map(|k| 2f64.powi(k) / (1.0 + 4f64.powi(k))).sum();
        assert!((sums[1] - head).abs() < 1e-15);
    }

    #[test]
    fn phase_at_i_is_zero() {
        assert_eq!(phase_alpha(cp(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn phase_defining_identity() {
        for w in [cp(1.0, 1.0), cp(-3.0, 0.2), cp(0.5, 7.0)] {
            let a = phase_alpha(w).unwrap();
            let wc = w.to_c64();
            let r = (I - wc) / (I - wc.conj());
            let target = r.norm() / r;
            assert!((C64::from_polar(1.0, a) - target).norm() < 1e-15);
            assert!(a > -PI && a <= PI);
        }
        let a = phase_alpha(cp(1.0, 1.0)).unwrap();
        let b = phase_alpha(cp(-1.0, 1.0)).unwrap();
        assert!((a + b).abs() < 1e-15);
        // Direct evaluation of the defining formula at 1+i.
        let oracle = -(C64::new(-1.0, 0.0) / C64::new(-1.0, 2.0)).arg();
        assert!((a - oracle).abs() < 1e-15);
    }

    #[test]
    fn singular_at_i() {
        let r = eval_inner(&InnerFunctionSpec::singular(1.0), cp(0.0, 1.0), &TruncationSchedule::default()).unwrap();
        assert!((r.c64() - C64::new((-1.0f64).exp(), 0.0)).norm() < 1e-16);
        assert_eq!(r.truncation_error_bound, 0.0);
    }

    #[test]
    fn b_i_unimodular_on_line() {
        let b = InnerFunctionSpec::b_i();
        for x in [-100.0, -1.0, 0.0, 0.3, 42.0] {
            let r = eval_inner(&b, cp(x, 0.0), &TruncationSchedule::default()).unwrap();
            assert!((r.c64().norm() - 1.0).abs() < 1e-15);
            let direct = (C64::new(x, -1.0)) / C64::new(x, 1.0);
            assert!((r.c64() - direct).norm() < 1e-15);
        }
    }

    #[test]
    fn truncation_levels_within_bound() {
        let fam = InnerFunctionSpec::arith(0.0, ArithFamily::two_sided(1.0, 1.0)).unwrap();
        let z = cp(0.5, 0.0);
        let n = 200;
        let a = eval_inner(&fam, z, &TruncationSchedule::single(n)).unwrap();
        let b = eval_inner(&fam, z, &TruncationSchedule::single(2 * n)).unwrap();
        assert!(a.truncation_error_bound > 0.0);
        assert!((a.c64() - b.c64()).norm() <= a.truncation_error_bound);
        // inside the half-plane the value is strictly contractive
        let zi = eval_inner(&fam, cp(0.5, 0.5), &TruncationSchedule::single(n)).unwrap();
        assert!(zi.c64().norm() < 1.0);
    }

    #[test]
    fn bound_is_monotone_in_level() {
        let fam = InnerFunctionSpec::arith(0.0, ArithFamily::two_sided(0.7, 2.0)).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1, 2, 5, 10, 20, 40, 80, 160] {
            let r = eval_inner(&fam, cp(13.0, 0.4), &TruncationSchedule::single(n)).unwrap();
            assert!(r.truncation_error_bound <= prev + 1e-15);
            prev = r.truncation_error_bound;
        }
    }

    #[test]
    fn lower_half_plane_requires_finite_zeros() {
        let fam = InnerFunctionSpec::arith(0.0, ArithFamily::two_sided(1.0, 1.0)).unwrap();
        assert!(matches!(
            eval_inner(&fam, cp(0.0, -2.0), &TruncationSchedule::single(10)),
            Err(Error::TailNotBounded(_))
        ));
        let b = InnerFunctionSpec::b_i();
        assert!(matches!(eval_inner(&b, cp(0.0, -1.0), &TruncationSchedule::default()), Err(Error::PoleHit(_))));
    }

    #[test]
    fn arg_of_singular_is_linear() {
        let grid: Vec<f64> = (0..=400).map(|k| -20.0 + 0.1 * k as f64).collect();
        let th = arg_on_line(&InnerFunctionSpec::singular(2.5), &grid, &TruncationSchedule::default()).unwrap();
        for (x, t) in grid.iter().zip(&th) {
            assert!((t - 2.5 * x).abs() < 1e-10);
        }
    }

    #[test]
    fn arg_of_b_i_matches_arctan() {
        let grid: Vec<f64> = (0..=2000).map(|k| -10.0 + 0.01 * k as f64).collect();
        let th = arg_on_line(&InnerFunctionSpec::b_i(), &grid, &TruncationSchedule::default()).unwrap();
        let k0 = 1000;
        for (k, x) in grid.iter().enumerate() {
            assert!((th[k] - th[k0] - 2.0 * x.atan()).abs() < 1e-8);
        }
    }

    #[test]
    fn arg_is_additive() {
        let grid: Vec<f64> = (0..=300).map(|k| -15.0 + 0.1 * k as f64).collect();
        let s = InnerFunctionSpec::singular(1.0);
        let b = InnerFunctionSpec::b_i();
        let sb = s.product(&b).unwrap();
        let ts = arg_on_line(&s, &grid, &TruncationSchedule::default()).unwrap();
        let tb = arg_on_line(&b, &grid, &TruncationSchedule::default()).unwrap();
        let tsb = arg_on_line(&sb, &grid, &TruncationSchedule::default()).unwrap();
        let k0 = 150;
        for k in 0..grid.len() {
            let lhs = tsb[k] - tsb[k0];
            let rhs = ts[k] - ts[k0] + tb[k] - tb[k0];
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = [0.0, 1.0, 2.0];
        assert!(matches!(
            arg_on_line(&InnerFunctionSpec::singular(4.0), &grid, &TruncationSchedule::default()),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn derivative_examples() {
        let s = InnerFunctionSpec::singular(0.8);
        let d = derivative_modulus_on_line(&s, &[-5.0, 0.0, 7.0], &TruncationSchedule::default()).unwrap();
        assert!(d.iter().all(|v| *v == 0.8));
        let b = InnerFunctionSpec::b_i();
        let d = derivative_modulus_on_line(&b, &[0.0], &TruncationSchedule::default()).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-15);
        for n in [1i64, 10, 100] {
            let d = derivative_modulus_on_line(&lattice(n), &[0.0], &TruncationSchedule::single(1 << 20)).unwrap();
            let direct: f64 = (-n..=n).map(|k| 2.0 / (k as f64 * k as f64 + 1.0)).sum();
            assert!((d[0] - direct).abs() < 1e-12);
            assert!(d[0] >= 2.0 && d[0] <= 2.0 + 4.0 * PI * PI / 6.0);
        }
    }

    #[test]
    fn lattice_derivative_matches_closed_form() {
        // sum_n 2/((x-n)^2+1) = 2 pi sinh(2 pi)/(cosh(2 pi) - cos(2 pi x))
        let fam = InnerFunctionSpec::arith(0.0, ArithFamily::two_sided(1.0, 1.0)).unwrap();
        let grid = [0.0, 0.25, 0.5, 3.7];
        let r = derivative_modulus_with_bounds(&fam, &grid, &TruncationSchedule::single(4096)).unwrap();
        for (x, (v, tail)) in grid.iter().zip(r) {
            let exact = 2.0 * PI * (2.0 * PI).sinh() / ((2.0 * PI).cosh() - (2.0 * PI * x).cos());
            assert!(v <= exact + 1e-12 && exact <= v + tail + 1e-12, "{v} {tail} {exact}");
        }
    }

    #[test]
    fn hardy_kernel_normalizations() {
        let z = cp(0.3, 0.7);
        let k = reproducing_kernel(KernelSource::Hardy, cp(0.0, 1.0), z, &TruncationSchedule::default()).unwrap();
        let at_i = hardy_kernel_at_i(z).to_c64();
        assert!((k.to_c64() - 0.5 * I * at_i).norm() < 1e-16);
        assert!((at_i - 1.0 / (PI * (z.to_c64() + I))).norm() < 1e-16);
    }

    #[test]
    fn model_kernel_at_i_for_s() {
        let s = InnerFunctionSpec::singular(1.0);
        let k = reproducing_kernel(KernelSource::Model(&s), cp(0.0, 1.0), cp(0.0, 1.0), &TruncationSchedule::default())
            .unwrap();
        let expected = (1.0 - (-2.0f64).exp()) / (4.0 * PI);
        assert!((k.to_c64() - C64::new(expected, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn kernel_reduces_when_u_vanishes() {
        let b = InnerFunctionSpec::blaschke(vec![C64::new(0.5, 2.0)]).unwrap();
        let lam = cp(0.5, 2.0);
        for z in [cp(1.0, 0.0), cp(-2.0, 0.5)] {
            let k1 = reproducing_kernel(KernelSource::Model(&b), lam, z, &TruncationSchedule::default()).unwrap();
            let k2 = reproducing_kernel(KernelSource::Hardy, lam, z, &TruncationSchedule::default()).unwrap();
            assert!((k1.to_c64() - k2.to_c64()).norm() < 1e-15);
        }
    }

    #[test]
    fn exprational_form_matches_product() {
        let u = InnerFunctionSpec::new(
            0.7,
            C64::from_polar(1.0, 0.3),
            BlaschkeData::explicit(vec![C64::new(1.0, 1.0), C64::new(-2.0, 0.5), C64::new(1.0, 1.0)]).unwrap(),
        )
        .unwrap();
        let e = u.to_exprational(10);
        for z in [C64::new(0.2, 0.0), C64::new(-3.0, 2.0), C64::new(5.0, 0.1)] {
            let direct = eval_at_level(&u, z, 10).unwrap().c64();
            assert!((e.eval(z) - direct).norm() < 1e-13);
        }
    }
}
