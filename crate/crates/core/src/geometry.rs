//! Parabolic metric primitives: points, distance, norm, dilation, backward
//! balls, rectangles and fractional heat balls.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Problem constants `(d, n = d + 2, α, q, q')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicParams {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub q: f64,
    pub q_conj: f64,
}

impl ParabolicParams {
    pub fn new(d: usize, alpha: f64, q: f64) -> Result<Self> {
        if d == 0 {
            return arg("spatial dimension must be at least 1");
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return arg(format!("alpha must be positive, got {alpha}"));
        }
        if !(q > 1.0) || !q.is_finite() {
            return arg(format!("q must satisfy 1 < q < inf, got {q}"));
        }
        Ok(Self {
            d,
            n: d + 2,
            alpha,
            q,
            q_conj: q / (q - 1.0),
        })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `n - αq`.
    pub fn codim(&self) -> f64 {
        self.nf() - self.alpha * self.q
    }

    /// Guard used by the nonlinear capacity and energy routines.
    pub fn require_nonlinear(&self) -> Result<()> {
        if self.alpha * self.q > self.nf() + 1e-12 {
            return Err(Error::Argument(format!(
                "alpha*q = {} exceeds n = {}",
                self.alpha * self.q,
                self.n
            )));
        }
        Ok(())
    }

    /// Same parameters with a different order `α`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

/// A point `z = (x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn origin(d: usize) -> Self {
        Self { x: vec![0.0; d], t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            t: self.t - other.t,
        }
    }

    pub fn add(&self, other: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            t: self.t + other.t,
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|u| u * u).sum()
}

/// `max(|x - y|, |t - s|^{1/2})`.
pub fn parabolic_distance(z1: &SpaceTimePoint, z2: &SpaceTimePoint) -> Result<f64> {
    if z1.dim() != z2.dim() {
        return Err(Error::Dimension {
            expected: z1.dim(),
            got: z2.dim(),
        });
    }
    Ok(sq_dist(&z1.x, &z2.x).sqrt().max((z1.t - z2.t).abs().sqrt()))
}

/// The unique `ρ > 0` with `|x|²/ρ² + t²/ρ⁴ = 1`; zero at the origin.
pub fn parabolic_norm(z: &SpaceTimePoint) -> f64 {
    let x2 = sq_norm(&z.x);
    if x2 == 0.0 && z.t == 0.0 {
        return 0.0;
    }
    let rho2 = 0.5 * (x2 + (x2 * x2 + 4.0 * z.t * z.t).sqrt());
    rho2.sqrt()
}

/// `δ_λ(x, t) = (λx, λ²t)`.
pub fn dilate(z: &SpaceTimePoint, lambda: f64) -> Result<SpaceTimePoint> {
    if !(lambda > 0.0) {
        return arg(format!("dilation factor must be positive, got {lambda}"));
    }
    Ok(SpaceTimePoint {
        x: z.x.iter().map(|v| v * lambda).collect(),
        t: z.t * lambda * lambda,
    })
}

/// Dilation about a center `c`: `c + δ_λ(z - c)`.
pub fn dilate_about(z: &SpaceTimePoint, c: &SpaceTimePoint, lambda: f64) -> Result<SpaceTimePoint> {
    Ok(c.add(&dilate(&z.sub(c), lambda)?))
}

/// `Q_r(z) = B_r(x) × (t - r², t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardBall {
    pub center: SpaceTimePoint,
    pub r: f64,
}

impl BackwardBall {
    pub fn new(center: SpaceTimePoint, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return arg(format!("ball radius must be positive, got {r}"));
        }
        Ok(Self { center, r })
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let dt = self.center.t - p.t;
        dt > 0.0 && dt < self.r * self.r && sq_dist(&self.center.x, &p.x) < self.r * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RectKind {
    Full,
    Backward,
    Forward,
}

/// Axis-parallel cube of side `ℓ` centered at `x`, times a time interval of
/// length `ℓ²` (one-sided) or `2ℓ²` (full) around `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicRectangle {
    pub center: SpaceTimePoint,
    pub side: f64,
    pub kind: RectKind,
}

impl ParabolicRectangle {
    pub fn new(center: SpaceTimePoint, side: f64, kind: RectKind) -> Result<Self> {
        if !(side > 0.0) {
            return arg(format!("rectangle side must be positive, got {side}"));
        }
        Ok(Self { center, side, kind })
    }

    pub fn time_range(&self) -> (f64, f64) {
        let l2 = self.side * self.side;
        let t = self.center.t;
        match self.kind {
            RectKind::Full => (t - l2, t + l2),
            RectKind::Backward => (t - l2, t),
            RectKind::Forward => (t, t + l2),
        }
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let (lo, hi) = self.time_range();
        if !(p.t > lo && p.t < hi) {
            return false;
        }
        let h = 0.5 * self.side;
        self.center.x.iter().zip(&p.x).all(|(c, y)| (y - c).abs() < h)
    }

    pub fn volume(&self) -> f64 {
        let d = self.center.dim() as i32;
        let base = self.side.powi(d + 2);
        match self.kind {
            RectKind::Full => 2.0 * base,
            _ => base,
        }
    }

    /// Scale about the geometric center by `δ_λ`.
    pub fn dilate(&self, lambda: f64) -> Result<ParabolicRectangle> {
        if !(lambda > 0.0) {
            return arg("dilation factor must be positive");
        }
        let (lo, hi) = self.time_range();
        let mid = 0.5 * (lo + hi);
        let side = self.side * lambda;
        let half_depth = 0.5 * (hi - lo) * lambda * lambda;
        let t = match self.kind {
            RectKind::Full => mid,
            RectKind::Backward => mid + half_depth,
            RectKind::Forward => mid - half_depth,
        };
        Ok(ParabolicRectangle {
            center: SpaceTimePoint::new(self.center.x.clone(), t),
            side,
            kind: self.kind,
        })
    }
}

/// Fractional heat ball `Θ^α_ρ(z)`: the super-level set
/// `{Γ^α(x - y, t - s) > c_α ρ^{-(n-α)/2}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatBall {
    pub center: SpaceTimePoint,
    pub rho: f64,
    pub alpha: f64,
}

impl HeatBall {
    pub fn new(center: SpaceTimePoint, rho: f64, alpha: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return arg(format!("heat ball radius must be positive, got {rho}"));
        }
        let n = center.dim() as f64 + 2.0;
        if !(alpha > 0.0 && alpha < n) {
            return arg(format!("heat ball order must lie in (0, n), got {alpha}"));
        }
        Ok(Self { center, rho, alpha })
    }

    fn n_minus_alpha(&self) -> f64 {
        self.center.dim() as f64 + 2.0 - self.alpha
    }

    /// `sqrt(2(n-α)/e)`: the profile maximum is this times `√ρ`.
    pub fn profile_constant(&self) -> f64 {
        (2.0 * self.n_minus_alpha() / std::f64::consts::E).sqrt()
    }

    pub fn max_radius(&self) -> f64 {
        self.profile_constant() * self.rho.sqrt()
    }
}

/// Spatial radius of the slice at time `s`; zero outside `(t - ρ, t)`.
pub fn heat_ball_profile(ball: &HeatBall, s: f64) -> f64 {
    let tau = ball.center.t - s;
    if !(tau > 0.0 && tau < ball.rho) {
        return 0.0;
    }
    let v = 2.0 * ball.n_minus_alpha() * tau * (ball.rho / tau).ln();
    v.max(0.0).sqrt()
}

/// Profile-form membership test.
pub fn heat_ball_contains(ball: &HeatBall, p: &SpaceTimePoint) -> bool {
    let tau = ball.center.t - p.t;
    if !(tau > 0.0 && tau < ball.rho) {
        return false;
    }
    let r = heat_ball_profile(ball, p.t);
    sq_dist(&ball.center.x, &p.x) < r * r
}

/// Backward ball enclosing the heat ball.
///
/// The slice radius is at most `c√ρ`, `c = sqrt(2(n-α)/e)`, but the time
/// extent is `ρ`, which exceeds `(c√ρ)²` when `n - α < e/2`; the radius is
/// therefore `max(c, 1)√ρ`.
pub fn heat_ball_in_backward_ball(ball: &HeatBall) -> BackwardBall {
    let c = ball.profile_constant().max(1.0);
    BackwardBall {
        center: ball.center.clone(),
        r: c * ball.rho.sqrt(),
    }
}

/// `z_k = ((2/k)(1 + 1/k) sqrt((n-α) log k) e, -1/k²)`, a point of
/// `Q_1(0)` (for `k` large) that is outside `Θ^α_1(0)`.
pub fn counterexample_point(k: u32, params: &ParabolicParams, e: &[f64]) -> Result<SpaceTimePoint> {
    if k < 1 {
        return arg("k must be at least 1");
    }
    if e.len() != params.d {
        return Err(Error::Dimension {
            expected: params.d,
            got: e.len(),
        });
    }
    let norm = sq_norm(e).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return arg(format!("direction must be a unit vector, |e| = {norm}"));
    }
    let kf = k as f64;
    let mag = (2.0 / kf) * (1.0 + 1.0 / kf) * ((params.nf() - params.alpha) * kf.ln()).sqrt();
    Ok(SpaceTimePoint {
        x: e.iter().map(|v| v * mag).collect(),
        t: -1.0 / (kf * kf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn distance_examples() {
        let a = p(&[0.0, 0.0], 0.0);
        assert_eq!(parabolic_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(parabolic_distance(&a, &p(&[0.0, 0.0], 4.0)).unwrap(), 2.0);
        assert_eq!(parabolic_distance(&a, &p(&[3.0, 0.0], -4.0)).unwrap(), 3.0);
        assert!(parabolic_distance(&a, &p(&[1.0], 0.0)).is_err());
    }

    #[test]
    fn norm_examples() {
        assert!((parabolic_norm(&p(&[1.0, 0.0], 0.0)) - 1.0).abs() < 1e-15);
        assert!((parabolic_norm(&p(&[0.0], 1.0)) - 1.0).abs() < 1e-15);
        let want = ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((parabolic_norm(&p(&[1.0], 1.0)) - want).abs() < 1e-14);
        assert!((want - 1.27202).abs() < 1e-5);
        assert_eq!(parabolic_norm(&p(&[0.0, 0.0], 0.0)), 0.0);
    }

    #[test]
    fn norm_solves_defining_equation() {
        for &(x, t) in &[(0.3, -2.0), (5.0, 0.1), (1e-3, 7.0)] {
            let z = p(&[x, 0.5 * x], t);
            let r = parabolic_norm(&z);
            let res = sq_norm(&z.x) / (r * r) + t * t / r.powi(4);
            assert!((res - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_examples() {
        let z = p(&[1.0, 0.0], 1.0);
        assert_eq!(dilate(&z, 1.0).unwrap(), z);
        assert_eq!(dilate(&z, 2.0).unwrap(), p(&[2.0, 0.0], 4.0));
        let r = parabolic_norm(&p(&[1.0], 1.0));
        let r2 = parabolic_norm(&dilate(&p(&[1.0], 1.0), 2.0).unwrap());
        assert!((r2 - 2.0 * r).abs() < 1e-14);
        assert!(dilate(&z, 0.0).is_err());
    }

    #[test]
    fn heat_ball_profile_examples() {
        let params = ParabolicParams::new(2, 2.0, 2.0).unwrap();
        let b = HeatBall::new(SpaceTimePoint::origin(2), 1.0, params.alpha).unwrap();
        assert_eq!(heat_ball_profile(&b, -1.0), 0.0);
        let peak = heat_ball_profile(&b, -1.0 / std::f64::consts::E);
        assert!((peak - (4.0 / std::f64::consts::E).sqrt()).abs() < 1e-14);
        assert!((peak - 1.21306).abs() < 1e-5);
        assert!((b.max_radius() - peak).abs() < 1e-14);
        // the maximum over a fine grid does not exceed c√ρ
        let m = (1..10_000)
            .map(|i| heat_ball_profile(&b, -(i as f64) / 10_000.0))
            .fold(0.0, f64::max);
        assert!(m <= peak + 1e-15);
    }

    #[test]
    fn heat_ball_membership_examples() {
        let b = HeatBall::new(p(&[0.5, 0.5], 1.0), 2.0, 1.0).unwrap();
        assert!(!heat_ball_contains(&b, &b.center));
        assert!(heat_ball_contains(&b, &p(&[0.5, 0.5], 0.0)));
    }

    #[test]
    fn enclosing_ball_radius() {
        let b = HeatBall::new(SpaceTimePoint::origin(2), 1.0, 2.0).unwrap();
        assert!((heat_ball_in_backward_ball(&b).r - 1.21306).abs() < 1e-5);
        let b = HeatBall::new(SpaceTimePoint::origin(1), 4.0, 1.0).unwrap();
        assert!((heat_ball_in_backward_ball(&b).r - 2.42612).abs() < 1e-5);
    }

    #[test]
    fn c_sqrt_rho_misses_the_past_tip_when_n_minus_alpha_is_small() {
        // d = 1, α = 2: n - α = 1 < e/2, so (c√ρ)² < ρ
        let b = HeatBall::new(SpaceTimePoint::origin(1), 1.0, 2.0).unwrap();
        let tip = p(&[0.0], -0.9);
        assert!(heat_ball_contains(&b, &tip));
        let naive = BackwardBall::new(b.center.clone(), b.max_radius()).unwrap();
        assert!(!naive.contains(&tip));
        assert!(heat_ball_in_backward_ball(&b).contains(&tip));
    }

    #[test]
    fn counterexample_examples() {
        let params = ParabolicParams::new(2, 2.0, 2.0).unwrap();
        let z = counterexample_point(10, &params, &[1.0, 0.0]).unwrap();
        assert!((z.x[0] - 0.2 * 1.1 * (2.0 * 10f64.ln()).sqrt()).abs() < 1e-15);
        assert!((z.x[0] - 0.4722).abs() < 1e-4);
        assert_eq!(z.t, -0.01);
        assert!(counterexample_point(3, &params, &[2.0, 0.0]).is_err());
    }

    #[test]
    fn rectangle_volume_and_membership() {
        let r = ParabolicRectangle::new(p(&[0.0, 0.0], 0.0), 0.5, RectKind::Full).unwrap();
        assert_eq!(r.volume(), 2.0 * 0.5f64.powi(4));
        assert!(r.contains(&p(&[0.2, -0.2], 0.2)));
        assert!(!r.contains(&p(&[0.25, 0.0], 0.0)));
        let b = ParabolicRectangle::new(p(&[0.0], 0.0), 1.0, RectKind::Backward).unwrap();
        assert!(b.contains(&p(&[0.0], -0.5)));
        assert!(!b.contains(&p(&[0.0], 0.5)));
        let f = ParabolicRectangle::new(p(&[0.0], 0.0), 1.0, RectKind::Forward).unwrap();
        assert!(f.contains(&p(&[0.0], 0.5)));
    }
}
