//! Discrete measures, their causal potentials, and region sets with samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::{
    heat_ball_contains, BackwardBall, HeatBall, ParabolicParams, ParabolicRectangle, SpaceTimePoint,
};
use crate::kernels::{BesselKernel, Kernel, RieszKernel};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: SpaceTimePoint,
    pub weight: f64,
}

/// Finite nonnegative combination of point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    d: usize,
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            atoms: Vec::new(),
            total_mass: 0.0,
        }
    }

    pub fn from_atoms(d: usize, atoms: impl IntoIterator<Item = (SpaceTimePoint, f64)>) -> Result<Self> {
        let mut m = Self::new(d);
        for (p, w) in atoms {
            m.push(p, w)?;
        }
        Ok(m)
    }

    pub fn dirac(point: SpaceTimePoint, weight: f64) -> Result<Self> {
        let d = point.dim();
        Self::from_atoms(d, [(point, weight)])
    }

    pub fn push(&mut self, point: SpaceTimePoint, weight: f64) -> Result<()> {
        if point.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: point.dim(),
            });
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return arg(format!("atom weight must be finite and nonnegative, got {weight}"));
        }
        if !point.is_finite() {
            return arg("atom coordinates must be finite");
        }
        self.total_mass += weight;
        self.atoms.push(Atom { point, weight });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Recompute the mass in insertion order; equals the running total exactly.
    pub fn verify_total(&self) -> bool {
        let mut s = 0.0;
        for a in &self.atoms {
            s += a.weight;
        }
        s == self.total_mass
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_atoms(self.d, self.atoms.iter().map(|a| (a.point.clone(), a.weight * c)))
    }

    pub fn mass_where(&self, pred: impl Fn(&SpaceTimePoint) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(&a.point)).map(|a| a.weight).sum()
    }

    pub fn restrict_by(&self, pred: impl Fn(&SpaceTimePoint) -> bool) -> Self {
        let mut m = Self::new(self.d);
        for a in &self.atoms {
            if pred(&a.point) {
                m.total_mass += a.weight;
                m.atoms.push(a.clone());
            }
        }
        m
    }

    pub fn points(&self) -> Vec<SpaceTimePoint> {
        self.atoms.iter().map(|a| a.point.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }
}

/// Keep the atoms inside `region`; weights are unchanged.
pub fn restrict(mu: &DiscreteMeasure, region: &RegionSet) -> DiscreteMeasure {
    mu.restrict_by(|p| region.contains(p))
}

pub fn restrict_ball(mu: &DiscreteMeasure, ball: &BackwardBall) -> DiscreteMeasure {
    mu.restrict_by(|p| ball.contains(p))
}

fn forward_sum<K: Kernel>(mu: &DiscreteMeasure, k: &K, z: &SpaceTimePoint, backward: bool) -> f64 {
    let mut s = 0.0;
    for a in &mu.atoms {
        if a.weight == 0.0 {
            continue;
        }
        if a.point == *z {
            return f64::INFINITY;
        }
        let v = if backward {
            k.eval_diff(&a.point, z)
        } else {
            k.eval_diff(z, &a.point)
        };
        s += a.weight * v;
    }
    s
}

/// `Σ w_i K(z - z_i)` over atoms in the past of `z` for an arbitrary kernel.
pub fn kernel_potential<K: Kernel>(mu: &DiscreteMeasure, k: &K, z: &SpaceTimePoint) -> f64 {
    forward_sum(mu, k, z, false)
}

/// `Σ w_i K(z_i - z)` over atoms in the future of `z`.
pub fn backward_kernel_potential<K: Kernel>(mu: &DiscreteMeasure, k: &K, z: &SpaceTimePoint) -> f64 {
    forward_sum(mu, k, z, true)
}

fn params_for(mu: &DiscreteMeasure, alpha: f64) -> Result<ParabolicParams> {
    let p = ParabolicParams::new(mu.dim(), alpha, 2.0)?;
    if alpha >= p.nf() {
        return arg(format!("alpha must be below n = {}", p.n));
    }
    Ok(p)
}

pub fn riesz_potential(mu: &DiscreteMeasure, alpha: f64, z: &SpaceTimePoint) -> Result<f64> {
    let k = RieszKernel::new(params_for(mu, alpha)?);
    Ok(kernel_potential(mu, &k, z))
}

pub fn backward_potential(mu: &DiscreteMeasure, alpha: f64, z: &SpaceTimePoint) -> Result<f64> {
    let k = RieszKernel::new(params_for(mu, alpha)?);
    Ok(backward_kernel_potential(mu, &k, z))
}

pub fn bessel_potential(mu: &DiscreteMeasure, alpha: f64, z: &SpaceTimePoint) -> Result<f64> {
    let k = BesselKernel::new(params_for(mu, alpha)?);
    Ok(kernel_potential(mu, &k, z))
}

pub fn backward_bessel_potential(mu: &DiscreteMeasure, alpha: f64, z: &SpaceTimePoint) -> Result<f64> {
    let k = BesselKernel::new(params_for(mu, alpha)?);
    Ok(backward_kernel_potential(mu, &k, z))
}

/// Log-spaced radii with a fixed number of points per decade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl LogGrid {
    /// Grid whose range brackets every atom's heat-ball entry radius, with the
    /// neglected tail beyond `r_max` below `1e-6` of the potential.
    pub fn covering(mu: &DiscreteMeasure, alpha: f64, z: &SpaceTimePoint, per_decade: usize) -> Result<Self> {
        let p = params_for(mu, alpha)?;
        let k = RieszKernel::new(p);
        let e = 0.5 * (p.nf() - alpha);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for a in mu.atoms() {
            let g = k.eval_diff(z, &a.point);
            if g > 0.0 && a.weight > 0.0 {
                let r = (g / k.c_alpha).powf(-1.0 / e);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if !lo.is_finite() {
            return Ok(Self {
                r_min: 1.0,
                r_max: 10.0,
                per_decade,
            });
        }
        Ok(Self {
            r_min: lo * 0.5,
            r_max: hi * 10f64.powf(6.0 / e),
            per_decade,
        })
    }

    pub fn midpoints(&self) -> (Vec<f64>, f64) {
        let decades = (self.r_max / self.r_min).log10();
        let m = ((decades * self.per_decade as f64).ceil() as usize).max(1);
        let h = (self.r_max / self.r_min).ln() / m as f64;
        let lr0 = self.r_min.ln();
        ((0..m).map(|i| (lr0 + (i as f64 + 0.5) * h).exp()).collect(), h)
    }
}

/// Riesz potential rebuilt from heat-ball masses:
/// `C Σ r^{-(n-α)/2} μ(Θ_r(z)) Δlog r`, `C = c_α (n-α)/2`.
///
/// Errors if the grid starts above some atom's entry radius or the tail past
/// `r_max` could exceed 1% of the result.
pub fn potential_via_heat_balls(
    mu: &DiscreteMeasure,
    alpha: f64,
    z: &SpaceTimePoint,
    grid: &LogGrid,
) -> Result<f64> {
    let p = params_for(mu, alpha)?;
    let k = RieszKernel::new(p);
    let e = 0.5 * (p.nf() - alpha);
    let c = k.c_alpha * e;
    let inside = |r: f64| -> Result<f64> {
        let ball = HeatBall::new(z.clone(), r, alpha)?;
        Ok(mu.mass_where(|q| heat_ball_contains(&ball, q)))
    };
    if inside(grid.r_min)? > 0.0 {
        return Err(Error::Range(format!(
            "grid starts at r = {} but mass is already inside the heat ball",
            grid.r_min
        )));
    }
    let (rs, h) = grid.midpoints();
    let mut s = 0.0;
    for r in rs {
        let m = inside(r)?;
        if m > 0.0 {
            s += r.powf(-e) * m * h;
        }
    }
    let value = c * s;
    let past = mu.mass_where(|q| q.t < z.t);
    let tail = k.c_alpha * grid.r_max.powf(-e) * past;
    if value > 0.0 && tail > 1e-2 * value {
        return Err(Error::Range(format!(
            "grid ends at r = {} leaving a tail up to {tail:e}",
            grid.r_max
        )));
    }
    Ok(value)
}

/// Spatial radius profile of a spine around its apex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpineProfile {
    /// `exp(-1/τ)`
    Exponential,
    /// `scale · τ^{exponent}`
    Power { scale: f64, exponent: f64 },
    Constant { radius: f64 },
}

impl SpineProfile {
    /// Radius at time lag `τ = t0 - t > 0`.
    pub fn radius(&self, tau: f64) -> f64 {
        match *self {
            SpineProfile::Exponential => (-1.0 / tau).exp(),
            SpineProfile::Power { scale, exponent } => scale * tau.powf(exponent),
            SpineProfile::Constant { radius } => radius,
        }
    }
}

/// `{(y, s): s < t0, t0 - s < depth, |y - x0| ≤ r(t0 - s)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spine {
    pub apex: SpaceTimePoint,
    pub profile: SpineProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
}

impl Spine {
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let tau = self.apex.t - p.t;
        if !(tau > 0.0) || self.depth.is_some_and(|d| tau >= d) {
            return false;
        }
        let r = self.profile.radius(tau);
        crate::geometry::sq_dist(&self.apex.x, &p.x) <= r * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    BackwardBall(BackwardBall),
    Rectangle(ParabolicRectangle),
    HeatBall(HeatBall),
    /// `{t ≤ t0}`
    TimeHalfSpace { d: usize, t0: f64 },
    Spine(Spine),
}

impl Shape {
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        match self {
            Shape::BackwardBall(b) => b.contains(p),
            Shape::Rectangle(r) => r.contains(p),
            Shape::HeatBall(h) => heat_ball_contains(h, p),
            Shape::TimeHalfSpace { t0, .. } => p.t <= *t0,
            Shape::Spine(s) => s.contains(p),
        }
    }

    /// Natural base point: the center, the apex, or `(0, t0)`.
    pub fn reference_point(&self) -> SpaceTimePoint {
        match self {
            Shape::BackwardBall(b) => b.center.clone(),
            Shape::Rectangle(r) => r.center.clone(),
            Shape::HeatBall(h) => h.center.clone(),
            Shape::TimeHalfSpace { d, t0 } => SpaceTimePoint::new(vec![0.0; *d], *t0),
            Shape::Spine(s) => s.apex.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::BackwardBall(b) => b.center.dim(),
            Shape::Rectangle(r) => r.center.dim(),
            Shape::HeatBall(h) => h.center.dim(),
            Shape::TimeHalfSpace { d, .. } => *d,
            Shape::Spine(s) => s.apex.dim(),
        }
    }
}

/// Axis-aligned space-time box `[lo, hi]^d × [t_lo, t_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    pub fn around_ball(b: &BackwardBall) -> Self {
        Self {
            x_lo: b.center.x.iter().map(|c| c - b.r).collect(),
            x_hi: b.center.x.iter().map(|c| c + b.r).collect(),
            t_lo: b.center.t - b.r * b.r,
            t_hi: b.center.t,
        }
    }

    pub fn around_rect(r: &ParabolicRectangle) -> Self {
        let (t_lo, t_hi) = r.time_range();
        Self {
            x_lo: r.center.x.iter().map(|c| c - 0.5 * r.side).collect(),
            x_hi: r.center.x.iter().map(|c| c + 0.5 * r.side).collect(),
            t_lo,
            t_hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }
}

/// Union of shapes standing in for a set `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub d: usize,
    pub shapes: Vec<Shape>,
}

impl RegionSet {
    pub fn new(d: usize) -> Self {
        Self { d, shapes: Vec::new() }
    }

    pub fn single(shape: Shape) -> Self {
        Self {
            d: shape.dim(),
            shapes: vec![shape],
        }
    }

    pub fn with(mut self, shape: Shape) -> Result<Self> {
        if shape.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: shape.dim(),
            });
        }
        self.shapes.push(shape);
        Ok(self)
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        self.shapes.iter().any(|s| s.contains(p))
    }

    /// Grid net of `E ∩ window ∩ {filter}`: the window is cut into cells of
    /// spatial side `eps` and time depth `eps²`; each cell draws up to
    /// `candidates` uniform points from its own random stream and keeps the
    /// first member. Thin parts of `E` are hit with probability proportional
    /// to their volume fraction in the cell.
    pub fn epsilon_net(
        &self,
        window: &Window,
        eps: f64,
        candidates: usize,
        seed: u64,
        filter: &dyn Fn(&SpaceTimePoint) -> bool,
    ) -> Vec<SpaceTimePoint> {
        let d = window.dim();
        let counts: Vec<usize> = (0..d)
            .map(|i| (((window.x_hi[i] - window.x_lo[i]) / eps).ceil() as usize).max(1))
            .collect();
        let nt = (((window.t_hi - window.t_lo) / (eps * eps)).ceil() as usize).max(1);
        let sides: Vec<f64> = (0..d)
            .map(|i| (window.x_hi[i] - window.x_lo[i]) / counts[i] as f64)
            .collect();
        let depth = (window.t_hi - window.t_lo) / nt as f64;
        let total_cells: usize = counts.iter().product::<usize>() * nt;
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        let mut p = SpaceTimePoint::origin(d);
        for cell in 0..total_cells {
            let mut c = cell;
            let it = c % nt;
            c /= nt;
            for i in 0..d {
                idx[i] = c % counts[i];
                c /= counts[i];
            }
            let mut rng = substream(seed, cell as u64);
            for _ in 0..candidates {
                for i in 0..d {
                    let lo = window.x_lo[i] + idx[i] as f64 * sides[i];
                    p.x[i] = lo + rng.gen::<f64>() * sides[i];
                }
                // draw in (0, 1] so the window top is reachable but not the floor
                let u = 1.0 - rng.gen::<f64>();
                p.t = window.t_lo + (it as f64 + u) * depth;
                if filter(&p) && self.contains(&p) {
                    out.push(p.clone());
                    break;
                }
            }
        }
        out
    }

    /// Uniform rejection samples of `E ∩ window`.
    pub fn sample(&self, window: &Window, count: usize, max_tries: usize, seed: u64) -> Vec<SpaceTimePoint> {
        let d = window.dim();
        let mut rng = substream(seed, u64::MAX);
        let mut out = Vec::with_capacity(count);
        let mut p = SpaceTimePoint::origin(d);
        for _ in 0..max_tries {
            if out.len() == count {
                break;
            }
            for i in 0..d {
                p.x[i] = rng.gen_range(window.x_lo[i]..window.x_hi[i]);
            }
            p.t = rng.gen_range(window.t_lo..window.t_hi);
            if self.contains(&p) {
                out.push(p.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn potentials_examples() {
        let empty = DiscreteMeasure::new(1);
        assert_eq!(riesz_potential(&empty, 1.0, &pt(&[0.0], 1.0)).unwrap(), 0.0);
        let mu = DiscreteMeasure::dirac(pt(&[0.0], 0.0), 1.0).unwrap();
        let v = riesz_potential(&mu, 1.0, &pt(&[0.0], 1.0)).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-13);
        assert_eq!(backward_potential(&mu, 1.0, &pt(&[0.0], 1.0)).unwrap(), 0.0);
        let b = bessel_potential(&mu, 1.0, &pt(&[0.0], 1.0)).unwrap();
        assert!((b - (-1f64).exp() / (2.0 * PI)).abs() < 1e-13);
        let fut = DiscreteMeasure::dirac(pt(&[0.0], 1.0), 1.0).unwrap();
        assert_eq!(riesz_potential(&fut, 1.0, &pt(&[0.0], 0.0)).unwrap(), 0.0);
        let v = backward_potential(&fut, 1.0, &pt(&[0.0], 0.0)).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn potential_at_atom_is_infinite() {
        let mu = DiscreteMeasure::dirac(pt(&[0.2], 0.3), 2.0).unwrap();
        let v = riesz_potential(&mu, 1.0, &pt(&[0.2], 0.3)).unwrap();
        assert!(v.is_infinite() && v > 0.0);
    }

    #[test]
    fn layer_cake_single_atom() {
        let mu = DiscreteMeasure::dirac(pt(&[0.0], 0.0), 1.0).unwrap();
        let z = pt(&[0.0], 1.0);
        let grid = LogGrid::covering(&mu, 1.0, &z, 400).unwrap();
        let v = potential_via_heat_balls(&mu, 1.0, &z, &grid).unwrap();
        assert!((v * 2.0 * PI - 1.0).abs() < 1e-2, "{v}");
        assert_eq!(
            potential_via_heat_balls(&DiscreteMeasure::new(1), 1.0, &z, &grid).unwrap(),
            0.0
        );
    }

    #[test]
    fn layer_cake_rejects_short_grid() {
        let mu = DiscreteMeasure::dirac(pt(&[0.0], 0.0), 1.0).unwrap();
        let z = pt(&[0.0], 1.0);
        let mut grid = LogGrid::covering(&mu, 1.0, &z, 100).unwrap();
        grid.r_max = grid.r_min * 4.0;
        assert!(potential_via_heat_balls(&mu, 1.0, &z, &grid).is_err());
        let mut grid = LogGrid::covering(&mu, 1.0, &z, 100).unwrap();
        grid.r_min = 1e3;
        assert!(potential_via_heat_balls(&mu, 1.0, &z, &grid).is_err());
    }

    #[test]
    fn restriction_examples() {
        let mu = DiscreteMeasure::from_atoms(
            1,
            [(pt(&[0.0], -0.5), 1.0), (pt(&[0.0], -1.0), 2.0), (pt(&[3.0], -0.5), 4.0)],
        )
        .unwrap();
        let all = RegionSet::single(Shape::TimeHalfSpace { d: 1, t0: 10.0 });
        assert_eq!(restrict(&mu, &all), mu);
        assert_eq!(restrict(&mu, &RegionSet::new(1)).total_mass(), 0.0);
        // the atom at t = -1 sits on the ball's floor and is excluded
        let ball = BackwardBall::new(pt(&[0.0], 0.0), 1.0).unwrap();
        let r = restrict_ball(&mu, &ball);
        assert_eq!(r.total_mass(), 1.0);
        assert!(r.verify_total());
    }

    #[test]
    fn weights_validated() {
        let mut mu = DiscreteMeasure::new(2);
        assert!(mu.push(pt(&[0.0, 0.0], 0.0), -1.0).is_err());
        assert!(mu.push(pt(&[0.0], 0.0), 1.0).is_err());
        assert!(mu.push(pt(&[0.0, 0.0], 0.0), f64::NAN).is_err());
    }

    #[test]
    fn net_points_are_members() {
        let e = RegionSet::single(Shape::BackwardBall(BackwardBall::new(pt(&[0.0, 0.0], 0.0), 1.0).unwrap()));
        let w = Window::around_ball(&BackwardBall::new(pt(&[0.0, 0.0], 0.0), 1.0).unwrap());
        let net = e.epsilon_net(&w, 0.25, 8, 3, &|_| true);
        assert!(!net.is_empty());
        assert!(net.iter().all(|p| e.contains(p)));
        let again = e.epsilon_net(&w, 0.25, 8, 3, &|_| true);
        assert_eq!(net, again);
    }

    #[test]
    fn spine_membership() {
        let s = Spine {
            apex: pt(&[0.0], 0.0),
            profile: SpineProfile::Exponential,
            depth: Some(1.0),
        };
        assert!(s.contains(&pt(&[0.3], -0.9)));
        assert!(!s.contains(&pt(&[0.3], -0.2)));
        assert!(!s.contains(&pt(&[0.0], 0.0)));
        assert!(!s.contains(&pt(&[0.0], -1.5)));
    }
}
