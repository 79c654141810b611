//! Finite sums of terms `c * exp(i*w*x) / (x - p)^m` on the real line.
//!
//! Every object the toolkit manipulates in closed form (model-space kernels,
//! inner functions with finitely many zeros, Toeplitz symbols built from
//! them, products of these) lives in this class. On it the Riesz projection
//! onto `H^2` splits term by term and `L^2` inner products reduce to finite
//! residue sums, so projections and norms are exact up to rounding.

use std::f64::consts::PI;

use crate::complex::{C64, I};
use crate::error::{Error, Result};

/// Relative tolerance under which two poles or two frequencies are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Poles closer than this to the real axis are rejected by projections and
/// inner products.
pub const LINE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub at: C64,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub freq: f64,
    pub pole: Option<Pole>,
}

impl Term {
    fn key_matches(&self, other: &Term) -> bool {
        same_freq(self.freq, other.freq)
            && match (self.pole, other.pole) {
                (None, None) => true,
                (Some(p), Some(q)) => p.order == q.order && same_point(p.at, q.at),
                _ => false,
            }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let e = (I * self.freq * z).exp();
        match self.pole {
            None => self.coeff * e,
            Some(p) => self.coeff * e / (z - p.at).powu(p.order),
        }
    }
}

pub fn same_point(a: C64, b: C64) -> bool {
    (a - b).norm() <= MERGE_TOL * (1.0 + a.norm().max(b.norm()))
}

pub fn same_freq(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * (1.0 + a.abs().max(b.abs()))
}

fn binom(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for j in 0..k {
        r *= (n - j) as f64 / (j + 1) as f64;
    }
    r
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Coefficients of the principal part at `p` of `(z-p)^{-m} (z-q)^{-n}`,
/// indexed by the power `m - j` of `1/(z-p)` for `j = 0..m`.
fn principal_part(p: C64, m: u32, q: C64, n: u32) -> Vec<(u32, C64)> {
    let d = p - q;
    (0..m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * binom(n + j - 1, j) * d.powi(-((n + j) as i32));
            (m - j, c)
        })
        .collect()
}

/// Finite sum of exponential-rational terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpRational {
    pub terms: Vec<Term>,
}

impl ExpRational {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::exponential(c, 0.0)
    }

    /// `c * exp(i*freq*x)`
    pub fn exponential(c: C64, freq: f64) -> Self {
        Self { terms: vec![Term { coeff: c, freq, pole: None }] }
    }

    /// `c * exp(i*freq*x) / (x - p)^order`
    pub fn pole(c: C64, freq: f64, p: C64, order: u32) -> Self {
        let pole = if order == 0 { None } else { Some(Pole { at: p, order }) };
        Self { terms: vec![Term { coeff: c, freq, pole }] }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.eval(z);
        }
        acc
    }

    pub fn scale(mut self, c: C64) -> Self {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }

    /// Multiplies by `exp(i*freq*x)`.
    pub fn shift(mut self, freq: f64) -> Self {
        for t in &mut self.terms {
            t.freq += freq;
        }
        self
    }

    pub fn add(mut self, other: &ExpRational) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.simplify()
    }

    pub fn sub(self, other: &ExpRational) -> Self {
        let neg = other.clone().scale(C64::new(-1.0, 0.0));
        self.add(&neg)
    }

    /// Complex conjugate of the boundary function on the real line.
    pub fn conj_on_line(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff.conj(),
                freq: -t.freq,
                pole: t.pole.map(|p| Pole { at: p.at.conj(), order: p.order }),
            })
            .collect();
        Self { terms }
    }

    pub fn mul(&self, other: &ExpRational) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len() * 2);
        for s in &self.terms {
            for t in &other.terms {
                let coeff = s.coeff * t.coeff;
                let freq = s.freq + t.freq;
                match (s.pole, t.pole) {
                    (None, None) => out.push(Term { coeff, freq, pole: None }),
                    (Some(p), None) | (None, Some(p)) => out.push(Term { coeff, freq, pole: Some(p) }),
                    (Some(p), Some(q)) => {
                        if same_point(p.at, q.at) {
                            out.push(Term {
                                coeff,
                                freq,
                                pole: Some(Pole { at: p.at, order: p.order + q.order }),
                            });
                        } else {
                            for (k, c) in principal_part(p.at, p.order, q.at, q.order) {
                                out.push(Term { coeff: coeff * c, freq, pole: Some(Pole { at: p.at, order: k }) });
                            }
                            for (k, c) in principal_part(q.at, q.order, p.at, p.order) {
                                out.push(Term { coeff: coeff * c, freq, pole: Some(Pole { at: q.at, order: k }) });
                            }
                        }
                    }
                }
            }
        }
        Self { terms: out }.simplify()
    }

    /// Merges like terms (same frequency, pole and order) in first-seen order
    /// and drops exact zeros.
    pub fn simplify(self) -> Self {
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            if let Some(m) = merged.iter_mut().find(|m| m.key_matches(&t)) {
                m.coeff += t.coeff;
            } else {
                merged.push(t);
            }
        }
        let scale = merged.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        merged.retain(|t| t.coeff.norm() > 1e-300 && t.coeff.norm() > scale * 1e-17);
        Self { terms: merged }
    }

    /// Complex derivative, term by term.
    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            if t.freq != 0.0 {
                out.push(Term { coeff: t.coeff * I * t.freq, freq: t.freq, pole: t.pole });
            }
            if let Some(p) = t.pole {
                out.push(Term {
                    coeff: -t.coeff * p.order as f64,
                    freq: t.freq,
                    pole: Some(Pole { at: p.at, order: p.order + 1 }),
                });
            }
        }
        Self { terms: out }.simplify()
    }

    pub fn nth_derivative(&self, s: u32) -> Self {
        let mut d = self.clone();
        for _ in 0..s {
            d = d.derivative();
        }
        d
    }

    /// Splits into the `H^2` part and the conjugate-`H^2` part on the line.
    pub fn split(&self) -> Result<(ExpRational, ExpRational)> {
        let me = self.clone().simplify();
        let scale = me.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for t in &me.terms {
            let Some(p) = t.pole else {
                if t.coeff.norm() <= 1e-13 * scale.max(1e-300) {
                    continue;
                }
                return Err(Error::NotSquareIntegrable(format!(
                    "non-decaying term {:e}*exp(i*{}*x)",
                    t.coeff, t.freq
                )));
            };
            if p.at.im.abs() <= LINE_TOL * (1.0 + p.at.norm()) {
                return Err(Error::NotSquareIntegrable(format!("pole on the real line at {}", p.at)));
            }
            let lower = p.at.im < 0.0;
            let c = if t.freq.abs() <= MERGE_TOL { 0.0 } else { t.freq };
            let analytic_side_whole = if lower { c >= 0.0 } else { c > 0.0 };
            let needs_taylor = (lower && c < 0.0) || (!lower && c > 0.0);
            if !needs_taylor {
                if analytic_side_whole {
                    plus.push(*t);
                } else {
                    minus.push(*t);
                }
                continue;
            }
            // Taylor part of exp(i c z) at the pole, as rational terms.
            let ep = (I * c * p.at).exp();
            let mut taylor = Vec::with_capacity(p.order as usize);
            let mut pw = C64::new(1.0, 0.0);
            for j in 0..p.order {
                let coeff = t.coeff * ep * pw / factorial(j);
                taylor.push(Term { coeff, freq: 0.0, pole: Some(Pole { at: p.at, order: p.order - j }) });
                pw *= I * c;
            }
            let neg: Vec<Term> = taylor.iter().map(|tt| Term { coeff: -tt.coeff, ..*tt }).collect();
            if lower {
                // exp(icz)/(z-p)^m minus its Taylor part is bounded and decaying in the lower half-plane.
                plus.extend(taylor);
                minus.push(*t);
                minus.extend(neg);
            } else {
                minus.extend(taylor);
                plus.push(*t);
                plus.extend(neg);
            }
        }
        Ok((Self { terms: plus }.simplify(), Self { terms: minus }.simplify()))
    }

    pub fn project_plus(&self) -> Result<ExpRational> {
        Ok(self.split()?.0)
    }

    pub fn project_minus(&self) -> Result<ExpRational> {
        Ok(self.split()?.1)
    }

    /// `<self, other> = integral of self * conj(other)` over the real line.
    pub fn inner(&self, other: &ExpRational) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for s in &self.terms {
            for t in &other.terms {
                acc += s.coeff * t.coeff.conj() * term_inner(s, t)?;
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> Result<f64> {
        Ok(self.inner(self)?.re.max(0.0))
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.norm_sqr()?.sqrt())
    }

    /// Largest pole order present (0 for pure exponentials).
    pub fn max_order(&self) -> u32 {
        self.terms.iter().filter_map(|t| t.pole.map(|p| p.order)).max().unwrap_or(0)
    }
}

/// `integral of exp(i*delta*x) (x-a)^{-m} (x-b)^{-n} dx` by residues.
pub fn residue_integral(delta: f64, a: C64, m: u32, b: C64, n: u32) -> Result<C64> {
    if m == 0 || n == 0 {
        return Err(Error::NotSquareIntegrable("term without decay in inner product".into()));
    }
    for p in [a, b] {
        if p.im.abs() <= LINE_TOL * (1.0 + p.norm()) {
            return Err(Error::NotSquareIntegrable(format!("pole on the real line at {p}")));
        }
    }
    let delta = if delta.abs() <= MERGE_TOL { 0.0 } else { delta };
    let upper = delta >= 0.0;
    let in_contour = |p: C64| if upper { p.im > 0.0 } else { p.im < 0.0 };
    let id = I * delta;
    let mut res = C64::new(0.0, 0.0);
    if same_point(a, b) {
        if in_contour(a) {
            let k = m + n - 1;
            res += id.powu(k) * (id * a).exp() / factorial(k);
        }
    } else {
        for (p, mp, q, nq) in [(a, m, b, n), (b, n, a, m)] {
            if !in_contour(p) {
                continue;
            }
            let ep = (id * p).exp();
            let d = p - q;
            let mut s = C64::new(0.0, 0.0);
            for k in 0..mp {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let left = id.powu(mp - 1 - k) / factorial(mp - 1 - k);
                let right = sign * binom(nq + k - 1, k) * d.powi(-((nq + k) as i32));
                s += left * right;
            }
            res += ep * s;
        }
    }
    let factor = if upper { 2.0 * PI * I } else { -2.0 * PI * I };
    Ok(factor * res)
}

fn term_inner(s: &Term, t: &Term) -> Result<C64> {
    let (Some(p), Some(q)) = (s.pole, t.pole) else {
        return Err(Error::NotSquareIntegrable("non-decaying term in inner product".into()));
    };
    residue_integral(s.freq - t.freq, p.at, p.order, q.at.conj(), q.order)
}

/// Shared dictionary of distinct terms for a family of functions; turns a
/// family Gram matrix into `A^H E A` with one residue sum per term pair.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub atoms: Vec<Term>,
    /// `coords[j][k]` is the coefficient of atom `k` in function `j`.
    pub coords: Vec<Vec<C64>>,
}

impl Dictionary {
    pub fn build(functions: &[ExpRational]) -> Self {
        let mut atoms: Vec<Term> = Vec::new();
        let mut coords = Vec::with_capacity(functions.len());
        for f in functions {
            let mut row: Vec<(usize, C64)> = Vec::with_capacity(f.terms.len());
            for t in &f.terms {
                let idx = match atoms.iter().position(|a| a.key_matches(t)) {
                    Some(i) => i,
                    None => {
                        atoms.push(Term { coeff: C64::new(1.0, 0.0), ..*t });
                        atoms.len() - 1
                    }
                };
                row.push((idx, t.coeff));
            }
            coords.push(row);
        }
        let d = atoms.len();
        let coords = coords
            .into_iter()
            .map(|row| {
                let mut v = vec![C64::new(0.0, 0.0); d];
                for (k, c) in row {
                    v[k] += c;
                }
                v
            })
            .collect();
        Self { atoms, coords }
    }

    /// Hermitian matrix `gram[l][j] = <f_j, f_l>`.
    pub fn gram(&self) -> Result<Vec<Vec<C64>>> {
        use rayon::prelude::*;
        let d = self.atoms.len();
        // atom_gram[r][s] = <atom_s, atom_r>
        let rows: Vec<Result<Vec<C64>>> = (0..d)
            .into_par_iter()
            .map(|r| (0..d).map(|s| term_inner(&self.atoms[s], &self.atoms[r])).collect())
            .collect();
        let atom_gram: Vec<Vec<C64>> = rows.into_iter().collect::<Result<_>>()?;
        let n = self.coords.len();
        // e_a[r][j] = sum_s atom_gram[r][s] * coords[j][s]
        let ea: Vec<Vec<C64>> = (0..d)
            .into_par_iter()
            .map(|r| {
                (0..n)
                    .map(|j| {
                        let mut acc = C64::new(0.0, 0.0);
                        for s in 0..d {
                            acc += atom_gram[r][s] * self.coords[j][s];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut g = vec![vec![C64::new(0.0, 0.0); n]; n];
        for l in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..d {
                    acc += self.coords[l][r].conj() * ea[r][j];
                }
                g[l][j] = acc;
            }
        }
        Ok(g)
    }
}
