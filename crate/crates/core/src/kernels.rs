//! Parabolic Riesz and Bessel kernels.
//!
//! `Γ^α(x, t) = c_α t^{-(n-α)/2} exp(-|x|²/4t)` for `t > 0` and zero otherwise,
//! with `c_α = (4π)^{-d/2} / Γ(α/2)`. Equivalently
//! `Γ^α(x, t) = t^{α/2 - 1} g_t(x) / Γ(α/2)` with `g_t` the Gauss–Weierstrass
//! kernel, which is the form the samplers below rely on.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::geometry::{parabolic_norm, sq_norm, ParabolicParams, SpaceTimePoint};
use crate::rng::seeded;
use crate::special::ln_gamma;

/// Exponents below this are flushed to zero.
const LOG_FLOOR: f64 = -700.0;

pub trait Kernel {
    fn params(&self) -> &ParabolicParams;
    /// Natural log of the kernel; `-inf` where it vanishes.
    fn log_eval(&self, x: &[f64], t: f64) -> f64;

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let l = self.log_eval(x, t);
        if l < LOG_FLOOR {
            0.0
        } else {
            l.exp()
        }
    }

    fn eval_diff(&self, z: &SpaceTimePoint, w: &SpaceTimePoint) -> f64 {
        let t = z.t - w.t;
        if t <= 0.0 {
            return 0.0;
        }
        let x2: f64 = z.x.iter().zip(&w.x).map(|(a, b)| (a - b) * (a - b)).sum();
        let l = self.log_from_parts(x2, t);
        if l < LOG_FLOOR {
            0.0
        } else {
            l.exp()
        }
    }

    /// Log-kernel from `|x|²` and `t > 0`.
    fn log_from_parts(&self, x2: f64, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszKernel {
    pub params: ParabolicParams,
    pub c_alpha: f64,
    ln_c: f64,
}

impl RieszKernel {
    pub fn new(params: ParabolicParams) -> Self {
        let d = params.d as f64;
        let ln_c = -0.5 * d * (4.0 * std::f64::consts::PI).ln() - ln_gamma(0.5 * params.alpha);
        Self {
            params,
            c_alpha: ln_c.exp(),
            ln_c,
        }
    }

    pub fn ln_c_alpha(&self) -> f64 {
        self.ln_c
    }
}

impl Kernel for RieszKernel {
    fn params(&self) -> &ParabolicParams {
        &self.params
    }

    fn log_eval(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_from_parts(sq_norm(x), t)
    }

    fn log_from_parts(&self, x2: f64, t: f64) -> f64 {
        let e = 0.5 * (self.params.nf() - self.params.alpha);
        self.ln_c - e * t.ln() - x2 / (4.0 * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselKernel {
    pub riesz: RieszKernel,
}

impl BesselKernel {
    pub fn new(params: ParabolicParams) -> Self {
        Self {
            riesz: RieszKernel::new(params),
        }
    }

    pub fn c_alpha(&self) -> f64 {
        self.riesz.c_alpha
    }
}

impl Kernel for BesselKernel {
    fn params(&self) -> &ParabolicParams {
        &self.riesz.params
    }

    fn log_eval(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_from_parts(sq_norm(x), t)
    }

    fn log_from_parts(&self, x2: f64, t: f64) -> f64 {
        self.riesz.log_from_parts(x2, t) - t
    }
}

pub fn riesz_eval(k: &RieszKernel, x: &[f64], t: f64) -> f64 {
    k.eval(x, t)
}

pub fn bessel_eval(k: &BesselKernel, x: &[f64], t: f64) -> f64 {
    k.eval(x, t)
}

/// Monte Carlo estimate of `∫ 𝒢_α` over `R^{d+1}` with its standard error.
///
/// Proposal: `t ~ Gamma(α/2, 1.3)`, `x | t ~ N(0, 2.4 t I)`; both are wider
/// than the kernel so the weights are bounded.
pub fn bessel_total_mass(k: &BesselKernel, samples: usize, seed: u64) -> (f64, f64) {
    let p = k.params();
    let a = 0.5 * p.alpha;
    let theta = 1.3;
    let var_scale = 1.2;
    let gamma = Gamma::new(a, theta).expect("valid gamma parameters");
    let mut rng = seeded(seed);
    let d = p.d;
    let ln_norm_t = -ln_gamma(a) - a * theta.ln();
    let mut x = vec![0.0; d];
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let t: f64 = gamma.sample(&mut rng);
        if t <= 0.0 {
            continue;
        }
        let sd = (2.0 * var_scale * t).sqrt();
        for v in x.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = sd * g;
        }
        let x2 = sq_norm(&x);
        let ln_pt = ln_norm_t + (a - 1.0) * t.ln() - t / theta;
        let ln_px = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * sd * sd).ln() - x2 / (2.0 * sd * sd);
        let w = (k.log_from_parts(x2, t) - ln_pt - ln_px).exp();
        sum += w;
        sum2 += w * w;
    }
    let m = sum / samples as f64;
    let var = (sum2 / samples as f64 - m * m).max(0.0);
    (m, (var / samples as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    /// Estimate of `∫_{1<ρ<R} K^{q'}`.
    pub value: f64,
    /// Same with `R` doubled.
    pub value_doubled: f64,
    /// Doubling `R` changed the estimate by less than 5%.
    pub converged: bool,
}

/// Shell-stratified Monte Carlo of `∫_{1 < ρ(z) < R} K(z)^{q'} dz`, with `R`
/// rounded up to a power of two so that shells are whole.
pub fn kernel_tail_lq_norm<K: Kernel>(
    kernel: &K,
    q_conj: f64,
    r_outer: f64,
    samples: usize,
    seed: u64,
) -> TailEstimate {
    assert!(r_outer > 1.0, "outer radius must exceed 1");
    let d = kernel.params().d;
    let shells = r_outer.log2().ceil().max(1.0) as usize;
    let per_shell = (samples / (shells + 1)).max(1);
    let mut rng = seeded(seed);
    let mut contrib = Vec::with_capacity(shells + 1);
    let mut z = SpaceTimePoint::origin(d);
    for j in 0..=shells {
        let lo = 2f64.powi(j as i32);
        let hi = 2.0 * lo;
        // box |x_i| < hi, 0 < t < hi², rejection against the shell
        let box_vol = (2.0 * hi).powi(d as i32) * hi * hi;
        let mut acc = 0.0;
        for _ in 0..per_shell {
            for v in z.x.iter_mut() {
                *v = rng.gen_range(-hi..hi);
            }
            z.t = rng.gen_range(0.0..hi * hi);
            let r = parabolic_norm(&z);
            if r >= lo && r < hi {
                let l = kernel.log_eval(&z.x, z.t) * q_conj;
                if l > LOG_FLOOR {
                    acc += l.exp();
                }
            }
        }
        contrib.push(acc / per_shell as f64 * box_vol);
    }
    let value: f64 = contrib[..shells].iter().sum();
    let value_doubled = value + contrib[shells];
    let converged = value > 0.0 && ((value_doubled - value) / value).abs() < 0.05;
    TailEstimate {
        value,
        value_doubled,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn riesz(d: usize, a: f64) -> RieszKernel {
        RieszKernel::new(ParabolicParams::new(d, a, 2.0).unwrap())
    }

    #[test]
    fn riesz_examples() {
        let k = riesz(1, 1.0);
        assert_eq!(riesz_eval(&k, &[0.0], -1.0), 0.0);
        assert!((riesz_eval(&k, &[0.0], 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let ratio = riesz_eval(&k, &[0.0], 4.0) / riesz_eval(&k, &[0.0], 1.0);
        assert!((ratio - 0.25).abs() < 1e-14);
    }

    #[test]
    fn bessel_examples() {
        let k = BesselKernel::new(ParabolicParams::new(1, 1.0, 2.0).unwrap());
        assert_eq!(bessel_eval(&k, &[0.0], 0.0), 0.0);
        let want = (-1f64).exp() / (2.0 * PI);
        assert!((bessel_eval(&k, &[0.0], 1.0) - want).abs() < 1e-15);
        assert!((want - 0.0585498).abs() < 1e-7);
    }

    #[test]
    fn constant_matches_closed_form() {
        // d = 2, α = 2: c = 1/(4π)
        let k = riesz(2, 2.0);
        assert!((k.c_alpha - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn gauss_weierstrass_form() {
        let k = riesz(3, 1.3);
        let (x, t) = ([0.3, -0.2, 0.9], 0.7);
        let g = (4.0 * PI * t).powf(-1.5) * (-sq_norm(&x) / (4.0 * t)).exp();
        let want = t.powf(0.65 - 1.0) / crate::special::gamma(0.65) * g;
        assert!((riesz_eval(&k, &x, t) - want).abs() / want < 1e-12);
    }

    #[test]
    fn underflow_is_zero_not_nan() {
        let k = riesz(2, 1.0);
        let v = riesz_eval(&k, &[1e3, 0.0], 1e-6);
        assert_eq!(v, 0.0);
        let b = BesselKernel::new(ParabolicParams::new(2, 1.0, 2.0).unwrap());
        assert_eq!(bessel_eval(&b, &[0.0, 0.0], 1e6), 0.0);
    }

    #[test]
    fn lower_semicontinuity_across_t_zero() {
        let k = riesz(1, 1.0);
        for &x0 in &[0.0, 0.5, -2.0] {
            let base = riesz_eval(&k, &[x0], 0.0);
            for i in 1..40 {
                let h = 2f64.powi(-i);
                assert!(riesz_eval(&k, &[x0 + h], h) >= base);
                assert!(riesz_eval(&k, &[x0 - h], -h) >= base);
            }
        }
    }

    #[test]
    fn tail_flags() {
        let pr = |d, a, q| ParabolicParams::new(d, a, q).unwrap();
        let t = kernel_tail_lq_norm(&RieszKernel::new(pr(1, 1.0, 2.0)), 2.0, 256.0, 40_000, 1);
        assert!(t.converged, "{t:?}");
        let t = kernel_tail_lq_norm(&RieszKernel::new(pr(1, 2.0, 2.0)), 2.0, 256.0, 40_000, 1);
        assert!(!t.converged, "{t:?}");
        let t = kernel_tail_lq_norm(&BesselKernel::new(pr(1, 2.0, 2.0)), 2.0, 256.0, 40_000, 1);
        assert!(t.converged, "{t:?}");
    }
}
