//! Toeplitz operators with symbols built from inner factors: exact
//! compressions onto model-space bases, singular-value probes of kernel
//! triviality, the interpolation construction of kernel elements, the
//! Carleson window condition and multiplier residuals.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cayley::CayleyGrid;
use crate::complex::{ComplexPoint, C64, I};
use crate::error::{Error, Result};
use crate::exprational::{same_point, Dictionary, ExpRational};
use crate::inner::{
    eval_at_level, kernel_exprational, reproducing_kernel, ArithFamily, BlaschkeData, EvalResult,
    InnerFunctionSpec, KernelSource, TruncationSchedule,
};

/// One factor of a symbol; exponent `-1` means complex conjugation on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolFactor {
    pub spec: InnerFunctionSpec,
    pub exponent: i8,
}

/// Formal product of inner factors and conjugated inner factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToeplitzSymbol {
    pub factors: Vec<SymbolFactor>,
}

impl ToeplitzSymbol {
    pub fn new(factors: Vec<SymbolFactor>) -> Result<Self> {
        let s = Self { factors };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.factors {
            if f.exponent != 1 && f.exponent != -1 {
                return Err(Error::InvalidInput(format!("exponent must be +1 or -1, got {}", f.exponent)));
            }
            f.spec.validate()?;
        }
        Ok(())
    }

    pub fn identity() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn analytic(u: InnerFunctionSpec) -> Self {
        Self { factors: vec![SymbolFactor { spec: u, exponent: 1 }] }
    }

    pub fn anti_analytic(u: InnerFunctionSpec) -> Self {
        Self { factors: vec![SymbolFactor { spec: u, exponent: -1 }] }
    }

    /// `U * conj(V)`
    pub fn ratio(u: InnerFunctionSpec, v: InnerFunctionSpec) -> Self {
        Self { factors: vec![SymbolFactor { spec: u, exponent: 1 }, SymbolFactor { spec: v, exponent: -1 }] }
    }

    pub fn times(mut self, spec: InnerFunctionSpec, exponent: i8) -> Self {
        self.factors.push(SymbolFactor { spec, exponent });
        self
    }

    /// Symbol with every exponent flipped, i.e. the pointwise conjugate.
    pub fn conjugate(&self) -> Self {
        Self {
            factors: self.factors.iter().map(|f| SymbolFactor { spec: f.spec.clone(), exponent: -f.exponent }).collect(),
        }
    }
}

/// Net growth rate `sum exponent * mass`.
pub fn symbol_linear_coefficient(sym: &ToeplitzSymbol) -> f64 {
    sym.factors.iter().map(|f| f.exponent as f64 * f.spec.mass).sum()
}

/// Pointwise value on the line with a combined truncation bound.
pub fn symbol_eval(sym: &ToeplitzSymbol, x: f64, schedule: &TruncationSchedule) -> Result<EvalResult> {
    let mut value = C64::new(1.0, 0.0);
    let mut growth = 1.0;
    let mut terms = 0;
    for f in &sym.factors {
        let r = crate::inner::eval_inner(&f.spec, ComplexPoint::real(x), schedule)?;
        let v = if f.exponent < 0 { r.c64().conj() } else { r.c64() };
        value *= v;
        growth *= 1.0 + r.truncation_error_bound;
        terms += r.terms_used;
    }
    Ok(EvalResult { value: value.into(), truncation_error_bound: growth - 1.0, terms_used: terms })
}

/// Zeros attached to one side of a reduced symbol.
#[derive(Debug, Clone, Default, PartialEq)]
struct ZeroBag {
    explicit: Vec<C64>,
    family: Option<ArithFamily>,
}

impl ZeroBag {
    fn is_empty(&self) -> bool {
        self.explicit.is_empty() && self.family.is_none()
    }

    fn is_infinite(&self) -> bool {
        self.family.is_some_and(|f| f.is_infinite())
    }

    fn truncated(&self, level: usize) -> Vec<C64> {
        let mut z = self.explicit.clone();
        if let Some(f) = self.family {
            let (lo, hi) = f.index_range(level);
            z.extend((lo..=hi).map(|n| f.point(n)));
        }
        z
    }

    fn push(&mut self, data: &BlaschkeData) -> Result<()> {
        if let Some(f) = data.family().filter(|f| f.is_infinite()) {
            if self.family.is_some() {
                return Err(Error::InvalidInput("at most one infinite zero set per side of a symbol".into()));
            }
            self.family = Some(f);
        } else if let Some(all) = data.all() {
            self.explicit.extend(all);
        }
        Ok(())
    }
}

/// Symbol reduced to `C * S^{c+} B+ * conj(S^{c-} B-)` with common zeros
/// cancelled.
#[derive(Debug, Clone, PartialEq)]
struct Reduced {
    constant: C64,
    mass_plus: f64,
    mass_minus: f64,
    plus: ZeroBag,
    minus: ZeroBag,
}

fn reduce(sym: &ToeplitzSymbol) -> Result<Reduced> {
    sym.validate()?;
    let mut constant = C64::new(1.0, 0.0);
    let mut plus = ZeroBag::default();
    let mut minus = ZeroBag::default();
    for f in &sym.factors {
        let c = f.spec.constant.to_c64();
        if f.exponent > 0 {
            constant *= c;
            plus.push(&f.spec.blaschke)?;
        } else {
            constant *= c.conj();
            minus.push(&f.spec.blaschke)?;
        }
    }
    let c = symbol_linear_coefficient(sym);
    if plus.family.is_some() && plus.family == minus.family {
        plus.family = None;
        minus.family = None;
    }
    let mut keep_minus = vec![true; minus.explicit.len()];
    plus.explicit.retain(|w| {
        match minus.explicit.iter().enumerate().position(|(k, v)| keep_minus[k] && same_point(*w, *v)) {
            Some(k) => {
                keep_minus[k] = false;
                false
            }
            None => true,
        }
    });
    let mut k = 0;
    minus.explicit.retain(|_| {
        k += 1;
        keep_minus[k - 1]
    });
    Ok(Reduced { constant, mass_plus: c.max(0.0), mass_minus: (-c).max(0.0), plus, minus })
}

fn blaschke_exprational(zeros: &[C64]) -> ExpRational {
    let spec = InnerFunctionSpec::blaschke(zeros.to_vec()).expect("zeros validated upstream");
    spec.to_exprational(zeros.len())
}

impl Reduced {
    fn symbol_at(&self, level: usize) -> ExpRational {
        let up = blaschke_exprational(&self.plus.truncated(level)).shift(self.mass_plus);
        let vm = blaschke_exprational(&self.minus.truncated(level)).shift(self.mass_minus);
        up.mul(&vm.conj_on_line()).scale(self.constant)
    }

    /// The source space is `K_{S^{c-} B-}`, or `H^2` when that factor is trivial.
    fn source_is_finite(&self) -> bool {
        self.mass_minus == 0.0 && !self.minus.is_infinite() && !self.minus.is_empty()
    }

    fn source_is_hardy(&self) -> bool {
        self.mass_minus == 0.0 && self.minus.is_empty()
    }

    fn basis(&self, level: usize, cfg: &ProbeConfig) -> Vec<ExpRational> {
        if self.source_is_hardy() {
            return (-(level as i64)..=level as i64)
                .map(|j| {
                    let lam = C64::new(j as f64 * cfg.spacing, cfg.height);
                    kernel_exprational(None, lam, 0)
                })
                .collect();
        }
        let zeros = self.minus.truncated(level);
        let mut basis = Vec::new();
        // Cauchy kernels (with multiplicity) span K_B for finite B.
        let mut seen: Vec<C64> = Vec::new();
        for &w in &zeros {
            let mult = seen.iter().filter(|v| same_point(**v, w)).count() as u32;
            seen.push(w);
            basis.push(ExpRational::pole(C64::new(1.0, 0.0), 0.0, w.conj(), mult + 1));
        }
        if self.mass_minus > 0.0 {
            // B * K_{S^b}, with the orthogonal kernel system at spacing 2 pi / b
            let b = self.mass_minus;
            let bl = blaschke_exprational(&zeros);
            let s = InnerFunctionSpec::singular(b);
            for j in -(level as i64)..=level as i64 {
                let lam = C64::new(2.0 * PI * j as f64 / b, 1.0 / b);
                basis.push(bl.mul(&kernel_exprational(Some(&s), lam, 0)));
            }
        }
        basis
    }
}

/// Gram data of a compressed Toeplitz operator.
#[derive(Debug, Clone)]
pub struct ToeplitzMatrices {
    /// `G[l][j] = <e_j, e_l>`
    pub gram: DMatrix<C64>,
    /// `M[l][j] = <T e_j, e_l>`
    pub matrix: DMatrix<C64>,
    /// `Q[l][j] = <T e_j, T e_l>`
    pub image_gram: DMatrix<C64>,
    pub condition: f64,
}

impl ToeplitzMatrices {
    /// Smallest `sigma` with `Q v = sigma^2 G v`.
    pub fn sigma_min(&self) -> f64 {
        let n = self.gram.nrows();
        let eig = self.gram.clone().symmetric_eigen();
        let mut w = DMatrix::<C64>::zeros(n, n);
        for k in 0..n {
            let s = 1.0 / eig.eigenvalues[k].sqrt();
            for r in 0..n {
                w[(r, k)] = eig.eigenvectors[(r, k)] * s;
            }
        }
        let mut r = w.adjoint() * &self.image_gram * &w;
        let rh = r.adjoint();
        r = (r + rh) * C64::new(0.5, 0.0);
        let ev = r.symmetric_eigen().eigenvalues;
        ev.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
    }
}

fn to_matrix(rows: &[Vec<C64>], r0: usize, c0: usize, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |l, j| rows[r0 + l][c0 + j])
}

/// Compresses `T_phi` to the span of `basis` with exact projections.
pub fn discretize_with_basis(phi: &ExpRational, basis: &[ExpRational], cond_limit: f64) -> Result<ToeplitzMatrices> {
    let images: Vec<ExpRational> =
        basis.par_iter().map(|e| phi.mul(e).project_plus()).collect::<Result<_>>()?;
    let n = basis.len();
    let mut all = basis.to_vec();
    all.extend(images);
    let gram_all = Dictionary::build(&all).gram()?;
    let gram = to_matrix(&gram_all, 0, 0, n);
    let matrix = DMatrix::from_fn(n, n, |l, j| gram_all[l][n + j]);
    let image_gram = to_matrix(&gram_all, n, n, n);
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > cond_limit {
        return Err(Error::IllConditionedBasis { cond: condition, limit: cond_limit });
    }
    Ok(ToeplitzMatrices { gram, matrix, image_gram, condition })
}

/// Compression of `T_sym` onto reproducing kernels of `K_{U_K}` (or `H^2`)
/// at the given points; infinite products are truncated at `level`.
pub fn discretize_toeplitz(
    sym: &ToeplitzSymbol,
    points: &[ComplexPoint],
    ambient: Option<&InnerFunctionSpec>,
    level: usize,
) -> Result<ToeplitzMatrices> {
    for (k, p) in points.iter().enumerate() {
        if !p.is_finite() || !p.in_upper_half() {
            return Err(Error::NonUpperHalfPoint(p.to_string()));
        }
        if points[..k].iter().any(|q| same_point(q.to_c64(), p.to_c64())) {
            return Err(Error::InvalidInput(format!("repeated basis point {p}")));
        }
    }
    let red = reduce(sym)?;
    let phi = red.symbol_at(level);
    let basis: Vec<ExpRational> = points.iter().map(|p| kernel_exprational(ambient, p.to_c64(), level)).collect();
    discretize_with_basis(&phi, &basis, ProbeThresholds::default().condition_limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeThresholds {
    pub floor: f64,
    pub factor: f64,
    pub drift: f64,
    pub condition_limit: f64,
}

impl Default for ProbeThresholds {
    fn default() -> Self {
        Self { floor: 1e-6, factor: 0.5, drift: 0.2, condition_limit: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Refinement levels; infinite zero sets and kernel systems use `|j| <= level`.
    pub levels: Vec<usize>,
    pub thresholds: ProbeThresholds,
    /// Horizontal spacing of `H^2` kernel points.
    pub spacing: f64,
    /// Height of `H^2` kernel points.
    pub height: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { levels: vec![4, 8, 16, 32], thresholds: ProbeThresholds::default(), spacing: 0.5, height: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    LikelyNontrivial,
    LikelyTrivial,
    Inconclusive,
}

pub const PROBE_DISCLAIMER: &str =
    "singular-value trends of finite compressions are numerical evidence about the kernel, not a proof";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub basis_sizes: Vec<usize>,
    pub sigma_min: Vec<f64>,
    pub gram_condition: Vec<f64>,
    pub verdict: ProbeVerdict,
    pub thresholds: ProbeThresholds,
    pub levels: Vec<usize>,
    pub source_space: String,
    pub disclaimer: String,
}

impl ProbeReport {
    pub fn lower_bound(&self) -> f64 {
        self.sigma_min.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn classify_trend(sigmas: &[f64], t: &ProbeThresholds) -> ProbeVerdict {
    let last = *sigmas.last().expect("at least one level");
    if sigmas.len() == 1 {
        return if last < t.floor { ProbeVerdict::LikelyNontrivial } else { ProbeVerdict::LikelyTrivial };
    }
    let shrinking = sigmas.windows(2).all(|p| p[1] < t.floor || p[1] <= t.factor * p[0]);
    if last < t.floor && shrinking {
        return ProbeVerdict::LikelyNontrivial;
    }
    let above = sigmas.iter().all(|s| *s >= t.floor);
    let steady = sigmas.windows(2).all(|p| (p[1] - p[0]).abs() <= t.drift * p[0]);
    if above && steady {
        return ProbeVerdict::LikelyTrivial;
    }
    ProbeVerdict::Inconclusive
}

/// Smallest generalized singular value of `T_sym` on growing subspaces of
/// the space that must contain its kernel, with a three-valued verdict.
pub fn kernel_triviality_probe(sym: &ToeplitzSymbol, cfg: &ProbeConfig) -> Result<ProbeReport> {
    let red = reduce(sym)?;
    let finite = red.source_is_finite();
    let levels: Vec<usize> = if finite {
        vec![*cfg.levels.last().unwrap_or(&0)]
    } else {
        if cfg.levels.len() < 3 {
            return Err(Error::InvalidInput("the probe needs at least three refinement levels".into()));
        }
        if cfg.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        cfg.levels.clone()
    };
    let source_space = if red.source_is_hardy() {
        format!("H^2, kernels at j*{} + {}i", cfg.spacing, cfg.height)
    } else if finite {
        format!("K_B, B with {} zeros (finite dimensional)", red.minus.explicit.len())
    } else if red.minus.is_empty() {
        format!("K_V, V = S^{}", red.mass_minus)
    } else {
        format!("K_V, V = S^{} times a Blaschke product", red.mass_minus)
    };
    let mut basis_sizes = Vec::new();
    let mut sigma_min = Vec::new();
    let mut gram_condition = Vec::new();
    for &level in &levels {
        let phi = red.symbol_at(level);
        let basis = red.basis(level, cfg);
        if basis.is_empty() {
            return Err(Error::InvalidInput("empty source basis".into()));
        }
        let m = discretize_with_basis(&phi, &basis, cfg.thresholds.condition_limit)?;
        basis_sizes.push(basis.len());
        sigma_min.push(m.sigma_min());
        gram_condition.push(m.condition);
    }
    let verdict = classify_trend(&sigma_min, &cfg.thresholds);
    Ok(ProbeReport {
        basis_sizes,
        sigma_min,
        gram_condition,
        verdict,
        thresholds: cfg.thresholds,
        levels,
        source_space,
        disclaimer: PROBE_DISCLAIMER.to_string(),
    })
}

/// Nonzero function of `K_Theta` vanishing to the prescribed orders.
#[derive(Debug, Clone, Serialize)]
pub struct KernelElement {
    pub basis_points: Vec<ComplexPoint>,
    pub coefficients: Vec<ComplexPoint>,
    /// `|f^(s)(w_j)|` for every constraint, in input order.
    pub interpolation_residuals: Vec<f64>,
    /// `||P_-(f conj B)|| / ||f||`
    pub hardy_residual: f64,
    /// `||P_+(B conj(Theta) g)|| / ||g||` with `g = f conj B`
    pub kernel_residual: f64,
    pub norm: f64,
    #[serde(skip)]
    pub function: ExpRational,
}

impl KernelElement {
    pub fn eval(&self, z: C64) -> C64 {
        self.function.eval(z)
    }
}

/// Zero of the Blaschke factor with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedZero {
    pub at: ComplexPoint,
    pub multiplicity: u32,
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<ComplexPoint> {
    (0..n).map(|_| ComplexPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.5..2.5))).collect()
}

/// Builds `f in K_Theta` with `f^(s)(w_j) = 0` for `0 <= s < m_j` from
/// `N + 1` reproducing kernels, `N = sum m_j`, and certifies that
/// `g = f conj(B)` is analytic and lies in `ker T_{B conj(Theta)}`.
pub fn lemma1_construct(
    theta: &InnerFunctionSpec,
    zeros: &[WeightedZero],
    tolerance: f64,
    seed: u64,
    level: usize,
    points: Option<&[ComplexPoint]>,
) -> Result<KernelElement> {
    theta.validate()?;
    if theta.is_finite_blaschke_product() {
        return Err(Error::Hypothesis("Theta must not be a finite Blaschke product".into()));
    }
    for z in zeros {
        if !z.at.is_finite() || !z.at.in_upper_half() {
            return Err(Error::NonUpperHalfZero(z.at.to_string()));
        }
    }
    let n: usize = zeros.iter().map(|z| z.multiplicity as usize).sum();
    let pts: Vec<ComplexPoint> = match points {
        Some(p) if p.len() == n + 1 => p.to_vec(),
        Some(p) => {
            return Err(Error::InvalidInput(format!("need {} basis points, got {}", n + 1, p.len())));
        }
        None => random_points(&mut ChaCha8Rng::seed_from_u64(seed), n + 1),
    };
    for (k, p) in pts.iter().enumerate() {
        if !p.in_upper_half() {
            return Err(Error::NonUpperHalfPoint(p.to_string()));
        }
        let close = |a: ComplexPoint, b: ComplexPoint| (a.to_c64() - b.to_c64()).norm() < 1e-6;
        if zeros.iter().any(|z| close(z.at, *p)) || pts[..k].iter().any(|q| close(*q, *p)) {
            return Err(Error::DegenerateSystem(format!("basis point {p} collides with another node")));
        }
    }
    let kernels: Vec<ExpRational> = pts.iter().map(|p| kernel_exprational(Some(theta), p.to_c64(), level)).collect();
    let constraints: Vec<(C64, u32)> =
        zeros.iter().flat_map(|z| (0..z.multiplicity).map(move |s| (z.at.to_c64(), s))).collect();

    let coeffs: Vec<C64> = if n == 0 {
        vec![C64::new(1.0, 0.0)]
    } else {
        let derivs: Vec<Vec<ExpRational>> = kernels
            .iter()
            .map(|k| {
                let mut d = vec![k.clone()];
                let top = constraints.iter().map(|c| c.1).max().unwrap_or(0);
                for _ in 0..top {
                    let next = d.last().unwrap().derivative();
                    d.push(next);
                }
                d
            })
            .collect();
        let a = DMatrix::from_fn(n + 1, n + 1, |r, c| {
            if r < n {
                let (w, s) = constraints[r];
                derivs[c][s as usize].eval(w)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let svd = a.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::DegenerateSystem("SVD failed".into()))?;
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("nonempty");
        (0..n + 1).map(|c| v_t[(idx, c)].conj()).collect()
    };

    let gram = Dictionary::build(&kernels).gram()?;
    let cv = DVector::from_vec(coeffs.clone());
    let g = DMatrix::from_fn(n + 1, n + 1, |l, j| gram[l][j]);
    let norm_sqr = (cv.adjoint() * &g * &cv)[(0, 0)].re;
    if !(norm_sqr > 0.0) {
        return Err(Error::DegenerateSystem("null vector has zero norm".into()));
    }
    let scale = 1.0 / norm_sqr.sqrt();
    let coeffs: Vec<C64> = coeffs.iter().map(|c| c * scale).collect();
    let mut f = ExpRational::zero();
    for (c, k) in coeffs.iter().zip(&kernels) {
        f = f.add(&k.clone().scale(*c));
    }
    let f = f.simplify();
    let norm = f.norm()?;

    let interpolation_residuals: Vec<f64> =
        constraints.iter().map(|&(w, s)| f.nth_derivative(s).eval(w).norm()).collect();
    let bz: Vec<C64> = zeros.iter().flat_map(|z| std::iter::repeat_n(z.at.to_c64(), z.multiplicity as usize)).collect();
    let b = blaschke_exprational(&bz);
    let gfun = f.mul(&b.conj_on_line());
    let gnorm = gfun.norm()?;
    let hardy_residual = gfun.project_minus()?.norm()? / gnorm;
    let th = theta.to_exprational(level);
    let kernel_residual = b.mul(&th.conj_on_line()).mul(&gfun).project_plus()?.norm()? / gnorm;

    let worst = interpolation_residuals.iter().cloned().fold(0.0, f64::max);
    if worst > tolerance || hardy_residual > tolerance || kernel_residual > tolerance {
        return Err(Error::ToleranceNotMet(format!(
            "interpolation {worst:.3e}, Hardy {hardy_residual:.3e}, kernel {kernel_residual:.3e} against {tolerance:.1e}"
        )));
    }
    Ok(KernelElement {
        basis_points: pts,
        coefficients: coeffs.into_iter().map(ComplexPoint::from).collect(),
        interpolation_residuals,
        hardy_residual,
        kernel_residual,
        norm,
        function: f,
    })
}

/// Sliding-window sup of `int_x^{x+1} |Phi|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlesonReport {
    pub sup: f64,
    /// Left end of the maximizing window.
    pub argmax: f64,
    /// Largest window integral starting in the outer tenth of the grid.
    pub edge_sup: f64,
    /// Largest window integral starting in the inner half of the grid.
    pub inner_sup: f64,
    pub growing: bool,
}

/// Windows of length 1 over a uniform grid; the grid must resolve each window
/// with at least eight steps.
pub fn carleson_window_sup(grid: &[f64], values: &[C64]) -> Result<CarlesonReport> {
    if grid.len() != values.len() || grid.len() < 2 {
        return Err(Error::InvalidInput("grid and values must match and have two points".into()));
    }
    let dx = grid[1] - grid[0];
    if !(dx > 0.0) || grid.windows(2).any(|p| ((p[1] - p[0]) - dx).abs() > 1e-9 * dx.max(1.0)) {
        return Err(Error::InvalidInput("grid must be uniform and increasing".into()));
    }
    let x_cover = grid[0].abs().min(*grid.last().unwrap());
    if grid[0] > -10.0 || *grid.last().unwrap() < 10.0 {
        return Err(Error::InvalidInput(format!("grid must cover [-10, 10], covers radius {x_cover}")));
    }
    let steps = (1.0 / dx).round() as usize;
    if steps < 8 || ((steps as f64) * dx - 1.0).abs() > 1e-6 {
        return Err(Error::GridTooCoarse(format!("window of length 1 needs an integer number (>= 8) of steps, dx = {dx}")));
    }
    let sq: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    let mut prefix = vec![0.0; sq.len()];
    for k in 1..sq.len() {
        prefix[k] = prefix[k - 1] + 0.5 * dx * (sq[k] + sq[k - 1]);
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut edge: f64 = 0.0;
    let mut inner: f64 = 0.0;
    for k in 0..sq.len().saturating_sub(steps) {
        let w = prefix[k + steps] - prefix[k];
        let x = grid[k];
        if w > best.0 {
            best = (w, x);
        }
        let mid = x + 0.5;
        if mid.abs() >= 0.9 * x_cover {
            edge = edge.max(w);
        }
        if mid.abs() <= 0.5 * x_cover {
            inner = inner.max(w);
        }
    }
    Ok(CarlesonReport { sup: best.0, argmax: best.1, edge_sup: edge, inner_sup: inner, growing: edge > 1.01 * inner })
}

/// Samples `f` on `[-x, x]` with `per_unit` points per unit and runs the
/// window sup.
pub fn carleson_for<F: Fn(f64) -> C64 + Sync>(f: F, x: f64, per_unit: usize) -> Result<CarlesonReport> {
    let n = (2.0 * x * per_unit as f64).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| -x + k as f64 / per_unit as f64).collect();
    let values: Vec<C64> = grid.par_iter().map(|&t| f(t)).collect();
    carleson_window_sup(&grid, &values)
}

/// `(||P_-(w)|| + ||P_+(conj(V) w)||) / ||w||` for `w = Phi k_mu^U`: zero
/// exactly when `w` lies in `K_V`.
pub fn multiplier_residual(
    u: &InnerFunctionSpec,
    v: &InnerFunctionSpec,
    phi: &ExpRational,
    test_points: &[ComplexPoint],
    level: usize,
) -> Result<Vec<f64>> {
    let vbar = v.to_exprational(level).conj_on_line();
    test_points
        .par_iter()
        .map(|mu| {
            if !mu.in_upper_half() {
                return Err(Error::NonUpperHalfPoint(mu.to_string()));
            }
            let f = kernel_exprational(Some(u), mu.to_c64(), level);
            let w = phi.mul(&f);
            let wn = w.norm()?;
            let outside_h2 = w.project_minus()?.norm()?;
            let outside_conj = vbar.mul(&w).project_plus()?.norm()?;
            Ok((outside_h2 + outside_conj) / wn)
        })
        .collect()
}

/// Sampled version of [`multiplier_residual`] through the Cayley FFT, used
/// as an independent cross-check; `Phi` is only evaluated on the line.
pub fn multiplier_residual_sampled<F: Fn(f64) -> C64 + Sync>(
    u: &InnerFunctionSpec,
    v: &InnerFunctionSpec,
    phi: F,
    test_points: &[ComplexPoint],
    schedule: &TruncationSchedule,
    samples: usize,
) -> Result<Vec<f64>> {
    let grid = CayleyGrid::new(samples);
    let level = schedule.final_level();
    let vvals: Vec<C64> = grid
        .points()
        .iter()
        .map(|&x| eval_at_level(v, C64::new(x, 0.0), level).map(|r| r.c64()))
        .collect::<Result<_>>()?;
    test_points
        .iter()
        .map(|mu| {
            let kvals: Vec<C64> = grid
                .points()
                .iter()
                .map(|&x| reproducing_kernel(KernelSource::Model(u), *mu, ComplexPoint::real(x), schedule).map(|k| k.to_c64()))
                .collect::<Result<_>>()?;
            let g: Vec<C64> = grid.points().iter().zip(&kvals).map(|(&x, k)| (x + I) * phi(x) * k).collect();
            let (_, minus) = grid.split(&g);
            let gv: Vec<C64> = g.iter().zip(&vvals).map(|(a, b)| a * b.conj()).collect();
            let (plus, _) = grid.split(&gv);
            Ok((grid.norm(&minus) + grid.norm(&plus)) / grid.norm(&g))
        })
        .collect()
}

/// Candidate multiplier given in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum MultiplierSpec {
    Constant { value: ComplexPoint },
    /// Reproducing kernel at `at` of `K_spec`, or of `H^2` without a spec.
    Kernel {
        #[serde(default)]
        spec: Option<InnerFunctionSpec>,
        at: ComplexPoint,
    },
    Inner { spec: InnerFunctionSpec },
}

impl MultiplierSpec {
    pub fn to_exprational(&self, level: usize) -> Result<ExpRational> {
        Ok(match self {
            MultiplierSpec::Constant { value } => ExpRational::constant(value.to_c64()),
            MultiplierSpec::Kernel { spec, at } => {
                if !at.is_finite() || !at.in_upper_half() {
                    return Err(Error::NonUpperHalfPoint(at.to_string()));
                }
                kernel_exprational(spec.as_ref(), at.to_c64(), level)
            }
            MultiplierSpec::Inner { spec } => {
                spec.validate()?;
                spec.to_exprational(level)
            }
        })
    }
}

/// Seeded test points in a box of the upper half-plane.
pub fn seeded_points(seed: u64, count: usize) -> Vec<ComplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| ComplexPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.2..3.0))).collect()
}
