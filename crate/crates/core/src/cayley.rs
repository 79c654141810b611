//! Sampled Riesz projections through the Cayley map.
//!
//! With `x = -cot(theta/2)` the line maps onto the circle and
//! `F -> (x + i) F` carries `L^2(R)` onto `L^2(T)` with
//! `||F||^2 = pi * mean |G|^2`. Functions in `H^2` of the half-plane become
//! series in nonnegative powers of `exp(i theta)`, so the projection is a
//! mask in the discrete Fourier domain.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::complex::{C64, I};

/// Uniform grid `theta_k = 2 pi (k + 1/2) / m` pulled back to the line.
#[derive(Debug, Clone)]
pub struct CayleyGrid {
    xs: Vec<f64>,
}

impl CayleyGrid {
    pub fn new(m: usize) -> Self {
        let xs = (0..m)
            .map(|k| {
                let theta = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                -1.0 / (0.5 * theta).tan()
            })
            .collect();
        Self { xs }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.xs
    }

    /// `G_k = (x_k + i) F(x_k)`
    pub fn lift<F: Fn(f64) -> C64>(&self, f: F) -> Vec<C64> {
        self.xs.iter().map(|&x| (x + I) * f(x)).collect()
    }

    /// `F_k = G_k / (x_k + i)`
    pub fn lower(&self, g: &[C64]) -> Vec<C64> {
        self.xs.iter().zip(g).map(|(&x, v)| v / (x + I)).collect()
    }

    /// `L^2(R)` norm of the function represented by `g`.
    pub fn norm(&self, g: &[C64]) -> f64 {
        let s = crate::complex::compensated_sum(g.iter().map(|v| v.norm_sqr()));
        (PI * s / g.len() as f64).sqrt()
    }

    /// Splits lifted samples into the `H^2` part and its complement.
    pub fn split(&self, g: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let m = g.len();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut spec = g.to_vec();
        fwd.process(&mut spec);
        let mut plus = spec.clone();
        for (n, v) in plus.iter_mut().enumerate() {
            if n >= m.div_ceil(2) {
                *v = C64::new(0.0, 0.0);
            }
        }
        inv.process(&mut plus);
        let scale = 1.0 / m as f64;
        let plus: Vec<C64> = plus.into_iter().map(|v| v * scale).collect();
        let minus = g.iter().zip(&plus).map(|(a, b)| a - b).collect();
        (plus, minus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_kernels_split_cleanly() {
        let grid = CayleyGrid::new(1 << 12);
        let w = C64::new(0.3, 1.7);
        // 1/(x - conj w) is analytic in the upper half-plane, 1/(x - w) is not
        let f = |x: f64| 1.0 / (x - w.conj()) + 2.0 / (x - w);
        let g = grid.lift(f);
        let (p, q) = grid.split(&g);
        let p_exact = grid.lift(|x| 1.0 / (x - w.conj()));
        let err: f64 = p.iter().zip(&p_exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        // ||1/(x - w)||^2 = pi / Im w
        let nq = grid.norm(&q);
        assert!((nq - 2.0 * (PI / w.im).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn grid_is_increasing() {
        let g = CayleyGrid::new(64);
        assert!(g.points().windows(2).all(|p| p[1] > p[0]));
    }
}
