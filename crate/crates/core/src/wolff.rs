//! Wolff-type potentials and energies.
//!
//! Dyadic objects (`I^𝒟`, `Ẇ^𝒟`, the regularized `𝒲^𝒟` and `ℰ`) are finite
//! sums over the lattice and are computed exactly. Lebesgue integrals of
//! piecewise-constant dyadic potentials are also exact, by recursion over the
//! tree of rectangles that carry mass. Only integrals of kernel potentials use
//! Monte Carlo.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg, Error, Result};
use crate::geometry::{sq_dist, ParabolicParams, SpaceTimePoint};
use crate::kernels::{BesselKernel, Kernel, RieszKernel};
use crate::lattice::{ParabolicLattice, RectKey};
use crate::measure::DiscreteMeasure;
use crate::rng::seeded;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Every generation of the lattice window.
    Homogeneous,
    /// Only `ℓ_R < ℓ₀`, i.e. generations `k ≥ 1`.
    Inhomogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WolffContext {
    pub params: ParabolicParams,
    pub lattice: ParabolicLattice,
    pub truncation: Truncation,
    /// Upper limit for continuous truncated potentials.
    pub delta: f64,
}

impl WolffContext {
    pub fn new(
        params: ParabolicParams,
        lattice: ParabolicLattice,
        truncation: Truncation,
        delta: f64,
    ) -> Result<Self> {
        if lattice.dim() != params.d {
            return Err(Error::Dimension {
                expected: params.d,
                got: lattice.dim(),
            });
        }
        let aq = params.alpha * params.q;
        match truncation {
            Truncation::Homogeneous if aq >= params.nf() => {
                return arg(format!("homogeneous energies need αq < n, got αq = {aq}"))
            }
            Truncation::Inhomogeneous if aq > params.nf() => {
                return arg(format!("inhomogeneous energies need αq ≤ n, got αq = {aq}"))
            }
            Truncation::Inhomogeneous if lattice.k_max < 1 => {
                return arg("inhomogeneous truncation needs generations k ≥ 1")
            }
            _ => {}
        }
        if !(delta > 0.0) {
            return arg("delta must be positive");
        }
        Ok(Self {
            params,
            lattice,
            truncation,
            delta,
        })
    }

    /// Inhomogeneous context on the unit lattice with generations `1..=depth`
    /// and `δ = 1`.
    pub fn unit(params: ParabolicParams, depth: i32) -> Result<Self> {
        Self::new(
            params,
            ParabolicLattice::unit(params.d, depth)?,
            Truncation::Inhomogeneous,
            1.0,
        )
    }

    pub fn k_lo(&self) -> i32 {
        match self.truncation {
            Truncation::Homogeneous => self.lattice.k_min,
            Truncation::Inhomogeneous => self.lattice.k_min.max(1),
        }
    }

    pub fn generations(&self) -> std::ops::RangeInclusive<i32> {
        self.k_lo()..=self.lattice.k_max
    }

    pub fn side(&self, k: i32) -> f64 {
        self.lattice.side(k)
    }

    /// `(αq - n)(q' - 1)`
    pub fn wolff_exponent(&self) -> f64 {
        let p = &self.params;
        (p.alpha * p.q - p.nf()) * (p.q_conj - 1.0)
    }

    /// `b(R) = ℓ^{(αq-n)(q'-1)}`
    pub fn b(&self, k: i32) -> f64 {
        self.side(k).powf(self.wolff_exponent())
    }

    pub fn volume(&self, k: i32) -> f64 {
        self.side(k).powi(self.params.d as i32 + 2)
    }
}

/// `μ(R)` for every rectangle of the context's generations carrying mass.
pub fn dyadic_masses(ctx: &WolffContext, mu: &DiscreteMeasure) -> HashMap<RectKey, f64> {
    let mut m = HashMap::new();
    for a in mu.atoms() {
        if a.weight == 0.0 {
            continue;
        }
        for k in ctx.generations() {
            *m.entry(ctx.lattice.key_of(&a.point, k)).or_insert(0.0) += a.weight;
        }
    }
    m
}

/// `μ(η_R)` for every rectangle whose cutoff meets an atom.
pub fn bump_masses(ctx: &WolffContext, mu: &DiscreteMeasure) -> HashMap<RectKey, f64> {
    let mut m = HashMap::new();
    for a in mu.atoms() {
        if a.weight == 0.0 {
            continue;
        }
        for k in ctx.generations() {
            for (key, eta) in ctx.lattice.bump_support(&a.point, k) {
                *m.entry(key).or_insert(0.0) += a.weight * eta;
            }
        }
    }
    m
}

/// `Σ_R ℓ_R^{α-n} μ(R) 1_R(z)`
pub fn dyadic_potential(ctx: &WolffContext, mu: &DiscreteMeasure, z: &SpaceTimePoint) -> f64 {
    let e = ctx.params.alpha - ctx.params.nf();
    ctx.generations()
        .map(|k| {
            let key = ctx.lattice.key_of(z, k);
            let r = ctx.lattice.rect(&key);
            ctx.side(k).powf(e) * mu.mass_where(|p| r.contains(p))
        })
        .sum()
}

/// `Σ_R (ℓ_R^{αq-n} μ(R))^{q'-1} 1_R(z)`
pub fn dyadic_wolff(ctx: &WolffContext, mu: &DiscreteMeasure, z: &SpaceTimePoint) -> f64 {
    let masses = dyadic_masses(ctx, mu);
    dyadic_wolff_with(ctx, &masses, z)
}

pub fn dyadic_wolff_with(ctx: &WolffContext, masses: &HashMap<RectKey, f64>, z: &SpaceTimePoint) -> f64 {
    let p = &ctx.params;
    let e = p.alpha * p.q - p.nf();
    let mut s = 0.0;
    for k in ctx.generations() {
        if let Some(&m) = masses.get(&ctx.lattice.key_of(z, k)) {
            s += (ctx.side(k).powf(e) * m).powf(p.q_conj - 1.0);
        }
    }
    s
}

/// `Σ_R b(R) μ(R)^{q'}`
pub fn dyadic_energy_sum(ctx: &WolffContext, mu: &DiscreteMeasure) -> f64 {
    let masses = dyadic_masses(ctx, mu);
    let mut terms: Vec<(&RectKey, &f64)> = masses.iter().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));
    terms
        .into_iter()
        .map(|(key, m)| ctx.b(key.k) * m.powf(ctx.params.q_conj))
        .sum()
}

/// `∫ Ẇ^𝒟μ dμ`
pub fn dyadic_wolff_integral(ctx: &WolffContext, mu: &DiscreteMeasure) -> f64 {
    let masses = dyadic_masses(ctx, mu);
    mu.atoms()
        .iter()
        .map(|a| a.weight * dyadic_wolff_with(ctx, &masses, &a.point))
        .sum()
}

/// Nodes of the tree spanned by `marked` and their ancestors down to `k_lo`,
/// with each node's children inside the tree.
struct RectTree {
    children: HashMap<RectKey, Vec<RectKey>>,
    roots: Vec<RectKey>,
}

fn parent_key(key: &RectKey) -> RectKey {
    RectKey {
        k: key.k - 1,
        i: key.i.iter().map(|v| v.div_euclid(2)).collect(),
        j: key.j.div_euclid(4),
    }
}

impl RectTree {
    fn new<'a>(marked: impl IntoIterator<Item = &'a RectKey>, k_lo: i32) -> Self {
        let mut nodes: HashSet<RectKey> = HashSet::new();
        for key in marked {
            let mut cur = key.clone();
            // a node already present has its whole ancestor chain present
            while nodes.insert(cur.clone()) && cur.k > k_lo {
                cur = parent_key(&cur);
            }
        }
        let mut children: HashMap<RectKey, Vec<RectKey>> = HashMap::new();
        let mut roots = Vec::new();
        for key in &nodes {
            children.entry(key.clone()).or_default();
            if key.k > k_lo {
                children.entry(parent_key(key)).or_default().push(key.clone());
            } else {
                roots.push(key.clone());
            }
        }
        for v in children.values_mut() {
            v.sort();
        }
        roots.sort();
        Self { children, roots }
    }

    /// `Σ_nodes (|R| - Σ |children|) · f(acc)`, with `acc` threaded from the
    /// root through `step`.
    fn integrate(
        &self,
        volume: &dyn Fn(i32) -> f64,
        step: &dyn Fn(f64, &RectKey) -> f64,
        f: &dyn Fn(f64) -> f64,
        init: f64,
    ) -> f64 {
        let mut total = 0.0;
        let mut stack: Vec<(RectKey, f64)> = self.roots.iter().rev().map(|r| (r.clone(), init)).collect();
        while let Some((key, acc)) = stack.pop() {
            let acc = step(acc, &key);
            let ch = &self.children[&key];
            let free = volume(key.k) - ch.len() as f64 * volume(key.k + 1);
            if free > 0.0 {
                total += free * f(acc);
            }
            for c in ch.iter().rev() {
                stack.push((c.clone(), acc));
            }
        }
        total
    }
}


/// `∫ |I^𝒟μ|^{q'} dℒ` (homogeneous) or `∫ |𝒢^𝒟μ|^{q'} dℒ` (inhomogeneous),
/// exact: the potential is constant off the rectangles carrying mass.
pub fn dyadic_energy_integral(ctx: &WolffContext, mu: &DiscreteMeasure) -> f64 {
    let masses = dyadic_masses(ctx, mu);
    let tree = RectTree::new(masses.keys(), ctx.k_lo());
    let e = ctx.params.alpha - ctx.params.nf();
    let qc = ctx.params.q_conj;
    tree.integrate(
        &|k| ctx.volume(k),
        &|acc, key| acc + ctx.side(key.k).powf(e) * masses.get(key).copied().unwrap_or(0.0),
        &|v| v.powf(qc),
        0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyReport {
    /// `Σ_R b(R) μ(R)^{q'}`
    pub sum_form: f64,
    /// `∫ |I^𝒟μ|^{q'}` (or its inhomogeneous variant)
    pub integral_form: f64,
    pub ratio: f64,
    /// Zero: the integral form is evaluated exactly.
    pub mc_error: f64,
}

pub fn energy_report(ctx: &WolffContext, mu: &DiscreteMeasure) -> EnergyReport {
    let sum_form = dyadic_energy_sum(ctx, mu);
    let integral_form = dyadic_energy_integral(ctx, mu);
    EnergyReport {
        sum_form,
        integral_form,
        ratio: if sum_form > 0.0 { integral_form / sum_form } else { 0.0 },
        mc_error: 0.0,
    }
}

/// `𝒲^𝒟μ(z) = Σ_R (ℓ_R^{αq-n} μ(η_R))^{q'-1} η_R(z)`
pub fn regularized_wolff(ctx: &WolffContext, mu: &DiscreteMeasure, z: &SpaceTimePoint) -> f64 {
    regularized_wolff_with(ctx, &bump_masses(ctx, mu), z)
}

pub fn regularized_wolff_with(ctx: &WolffContext, masses: &HashMap<RectKey, f64>, z: &SpaceTimePoint) -> f64 {
    let p = &ctx.params;
    let e = p.alpha * p.q - p.nf();
    let mut s = 0.0;
    for k in ctx.generations() {
        let lk = ctx.side(k).powf(e);
        for (key, eta) in ctx.lattice.bump_support(z, k) {
            if let Some(&m) = masses.get(&key) {
                if m > 0.0 {
                    s += (lk * m).powf(p.q_conj - 1.0) * eta;
                }
            }
        }
    }
    s
}

/// `ℰμ = Σ_R b(R) μ(η_R)^{q'}`
pub fn regularized_energy(ctx: &WolffContext, mu: &DiscreteMeasure) -> f64 {
    let masses = bump_masses(ctx, mu);
    let mut terms: Vec<(&RectKey, &f64)> = masses.iter().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));
    terms
        .into_iter()
        .map(|(key, m)| ctx.b(key.k) * m.powf(ctx.params.q_conj))
        .sum()
}

/// Radius at which an atom enters the open backward ball `Q_r(z)`;
/// `None` for atoms not strictly in the past.
fn entry_radius(z: &SpaceTimePoint, p: &SpaceTimePoint) -> Option<f64> {
    let dt = z.t - p.t;
    if dt > 0.0 {
        Some(sq_dist(&z.x, &p.x).sqrt().max(dt.sqrt()))
    } else {
        None
    }
}

/// `∫_a^b r^{e-1} dr`
fn power_segment(a: f64, b: f64, e: f64) -> f64 {
    if e == 0.0 {
        (b / a).ln()
    } else if b.is_infinite() {
        if e < 0.0 {
            -a.powf(e) / e
        } else {
            f64::INFINITY
        }
    } else {
        (b.powf(e) - a.powf(e)) / e
    }
}

/// `∫_floor^δ (m(r) r^{αq-n})^{q'-1} dr/r` for a step function `m` given by
/// sorted `(entry radius, weight)` pairs plus `m0` present from the start.
fn wolff_steps(mut steps: Vec<(f64, f64)>, m0: f64, params: &ParabolicParams, floor: f64, delta: f64) -> f64 {
    let e = (params.alpha * params.q - params.nf()) * (params.q_conj - 1.0);
    steps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mass = m0;
    let mut idx = 0;
    while idx < steps.len() && steps[idx].0 <= floor {
        mass += steps[idx].1;
        idx += 1;
    }
    let mut r = floor;
    let mut total = 0.0;
    loop {
        let next = if idx < steps.len() { steps[idx].0.min(delta) } else { delta };
        if mass > 0.0 && next > r {
            total += mass.powf(params.q_conj - 1.0) * power_segment(r, next, e);
        }
        if next >= delta {
            break;
        }
        r = next;
        mass += steps[idx].1;
        idx += 1;
    }
    total
}

/// Truncated continuous Wolff potential
/// `W^δμ(z) = ∫_0^δ (μ(Q_r(z)) / r^{n-αq})^{q'-1} dr/r`, exact for discrete
/// `μ`. With `αq = n` and `δ = ∞` the integral diverges and an error is
/// returned.
pub fn continuous_wolff(mu: &DiscreteMeasure, z: &SpaceTimePoint, params: &ParabolicParams, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return arg("delta must be positive");
    }
    let e = params.alpha * params.q - params.nf();
    if e >= 0.0 && delta.is_infinite() {
        return Err(Error::Range("W^∞ diverges when αq ≥ n".into()));
    }
    let steps: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .filter(|a| a.weight > 0.0)
        .filter_map(|a| entry_radius(z, &a.point).map(|r| (r, a.weight)))
        .collect();
    if steps.is_empty() {
        return Ok(0.0);
    }
    Ok(wolff_steps(steps, 0.0, params, 0.0, delta))
}

/// `Σ_i w_i ∫_h^δ (μ(Q̄_r(z_i)) / r^{n-αq})^{q'-1} dr/r` where each atom
/// counts itself from `r = h` on. The floor `h` plays the role of the finest
/// lattice side so that the self term matches the dyadic self term in scale.
pub fn continuous_wolff_energy(mu: &DiscreteMeasure, params: &ParabolicParams, delta: f64, h: f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in mu.atoms().iter().enumerate() {
        if a.weight == 0.0 {
            continue;
        }
        let steps: Vec<(f64, f64)> = mu
            .atoms()
            .iter()
            .enumerate()
            .filter(|(j, b)| *j != i && b.weight > 0.0)
            .filter_map(|(_, b)| entry_radius(&a.point, &b.point).map(|r| (r, b.weight)))
            .collect();
        total += a.weight * wolff_steps(steps, a.weight, params, h, delta);
    }
    total
}

/// Continuous energy `∫ (Ǩ_h μ)^{q'} dℒ` for the Bessel kernel capped at
/// `c_α h^{α-n}` (the Riesz value at parabolic distance `h`), by importance
/// sampling around the atoms. Returns `(value, standard error)`.
pub fn continuous_energy(mu: &DiscreteMeasure, params: &ParabolicParams, h: f64, samples: usize, seed: u64) -> (f64, f64) {
    let k = BesselKernel::new(*params);
    let cap = k.c_alpha() * h.powf(params.alpha - params.nf());
    let ln_cap = cap.ln();
    let qc = params.q_conj;
    let atoms: Vec<_> = mu.atoms().iter().filter(|a| a.weight > 0.0).collect();
    if atoms.is_empty() || samples == 0 {
        return (0.0, 0.0);
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let cum: Vec<f64> = atoms
        .iter()
        .scan(0.0, |s, a| {
            *s += a.weight / total;
            Some(*s)
        })
        .collect();
    let d = params.d;
    let beta = 2.0;
    let tau_lo = (h * h * 1e-3).ln();
    let tau_hi = (60.0 / qc).ln();
    let span = tau_hi - tau_lo;
    let mut rng = seeded(seed);
    let mut y = SpaceTimePoint::origin(d);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let u: f64 = rng.gen();
        let i = cum.partition_point(|&c| c < u).min(atoms.len() - 1);
        let tau = (tau_lo + span * rng.gen::<f64>()).exp();
        let sd = (2.0 * beta * tau).sqrt();
        for (m, v) in y.x.iter_mut().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            *v = atoms[i].point.x[m] + sd * g;
        }
        y.t = atoms[i].point.t - tau;
        let mut pot = 0.0;
        let mut dens = 0.0;
        for a in &atoms {
            let dt = a.point.t - y.t;
            if dt <= 0.0 {
                continue;
            }
            let x2 = sq_dist(&a.point.x, &y.x);
            let lk = k.log_from_parts(x2, dt).min(ln_cap);
            pot += a.weight * lk.exp();
            if dt.ln() >= tau_lo && dt.ln() <= tau_hi {
                let ln_p = -(span * dt).ln() - 0.5 * d as f64 * (4.0 * std::f64::consts::PI * beta * dt).ln()
                    - x2 / (4.0 * beta * dt);
                dens += a.weight / total * ln_p.exp();
            }
        }
        let w = if dens > 0.0 { pot.powf(qc) / dens } else { 0.0 };
        s1 += w;
        s2 += w * w;
    }
    let n = samples as f64;
    let m = s1 / n;
    (m, ((s2 / n - m * m).max(0.0) / n).sqrt())
}

/// `∫ Γ^α(z - y) Γ^α(w - y) dy`: the kernel of `V̇_{α,2}`. With
/// `a = α/2`, `D = |t_z - t_w|` and `u` the lag below the earlier time,
/// it equals `Γ(a)^{-2} ∫_0^∞ u^{a-1} (u + D)^{a-1} g_{2u+D}(x_z - x_w) du`.
pub fn q2_correlation_kernel(params: &ParabolicParams, z: &SpaceTimePoint, w: &SpaceTimePoint) -> f64 {
    let a = 0.5 * params.alpha;
    let d = params.d as f64;
    let big_d = (z.t - w.t).abs();
    let x2 = sq_dist(&z.x, &w.x);
    let p = 2.0 * a - 2.0 - 0.5 * d;
    if p >= -1.0 {
        return f64::INFINITY;
    }
    if big_d == 0.0 && x2 == 0.0 && 2.0 * a - 1.0 - 0.5 * d <= 0.0 {
        return f64::INFINITY;
    }
    let ln_g = |tau: f64| -0.5 * d * (4.0 * std::f64::consts::PI * tau).ln() - x2 / (4.0 * tau);
    let integrand = |v: f64| {
        let u = v.exp();
        // du = u dv
        (a * v + (a - 1.0) * (u + big_d).ln() + ln_g(2.0 * u + big_d)).exp()
    };
    let scale = big_d.max(x2).max(1e-300);
    let lo = scale.ln() - 60.0 / a.min(1.0);
    let u_hi = scale * 1e8;
    let hi = u_hi.ln();
    let steps = 8000;
    let hstep = (hi - lo) / steps as f64;
    let mut s = 0.5 * (integrand(lo) + integrand(hi));
    for i in 1..steps {
        s += integrand(lo + i as f64 * hstep);
    }
    s *= hstep;
    // tail past u_hi: integrand ≈ u^{p} (8π)^{-d/2}
    let tail = (8.0 * std::f64::consts::PI).powf(-0.5 * d) * u_hi.powf(p + 1.0) / -(p + 1.0);
    (s + tail) * (-2.0 * ln_gamma(a)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HavinMazya {
    pub value: f64,
    pub std_error: f64,
    /// Samples that landed on an atom and were skipped.
    pub singular_hits: usize,
}

/// Monte Carlo of `V^δμ(z) = ∫ Γ^α_δ(z - y) [Γ̌^α_δ μ(y)]^{q'-1} dy` where
/// `Γ^α_δ` is the kernel restricted to `d_𝒫 < δ` (pass `δ = ∞` for the
/// untruncated potential when `αq < n`).
///
/// Infinite, with zero standard error, when an atom lies in the truncated
/// backward cone of `z` and `(q'-1)(n-α) ≥ n`.
///
/// Proposal: an equal mixture of the law `∝ Γ^α(z - ·)` and the laws
/// `∝ Γ^α(z_i - ·)` weighted by `μ`, all restricted in lag to `(0, δ²)`.
pub fn havin_mazya(
    mu: &DiscreteMeasure,
    z: &SpaceTimePoint,
    params: &ParabolicParams,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<HavinMazya> {
    if !(delta > 0.0) {
        return arg("delta must be positive");
    }
    let k = RieszKernel::new(*params);
    let a = 0.5 * params.alpha;
    let qc = params.q_conj;
    let atoms: Vec<_> = mu.atoms().iter().filter(|x| x.weight > 0.0).collect();
    if atoms.is_empty() {
        return Ok(HavinMazya {
            value: 0.0,
            std_error: 0.0,
            singular_hits: 0,
        });
    }
    // lag law: τ^{a-1} on (0, δ²), or a Pareto-tailed law when δ = ∞
    let t_max = if delta.is_finite() { delta * delta } else { f64::INFINITY };
    let tail_index = 0.5 * (params.nf() - params.alpha) - 0.5 * params.d as f64;
    if t_max.is_infinite() && tail_index <= 0.0 {
        return Err(Error::Range("untruncated V needs 2α < n".into()));
    }
    // density of τ for the finite case: a τ^{a-1} / T^a
    let lag_sample = |rng: &mut crate::rng::Rng| -> f64 {
        let u: f64 = 1.0 - rng.gen::<f64>();
        if t_max.is_finite() {
            t_max * u.powf(1.0 / a)
        } else {
            // density a τ^{a-1} on (0,1), then c τ^{-1-a} beyond, half each
            let v: f64 = rng.gen();
            if v < 0.5 {
                u.powf(1.0 / a)
            } else {
                u.powf(-1.0 / a)
            }
        }
    };
    let ln_lag_density = |tau: f64| -> f64 {
        if t_max.is_finite() {
            if tau >= t_max {
                return f64::NEG_INFINITY;
            }
            a.ln() + (a - 1.0) * tau.ln() - a * t_max.ln()
        } else if tau < 1.0 {
            (0.5 * a).ln() + (a - 1.0) * tau.ln()
        } else {
            (0.5 * a).ln() + (-1.0 - a) * tau.ln()
        }
    };
    // Γ̌μ ~ τ^{(α-n)/2} below an atom, so [Γ̌μ]^{q'-1} fails to be locally
    // integrable once (q'-1)(n-α) ≥ n; an atom seen from z then makes V infinite
    let blows_up = (qc - 1.0) * (params.nf() - params.alpha) >= params.nf();
    if blows_up
        && atoms.iter().any(|x| {
            let tau = z.t - x.point.t;
            tau >= 0.0 && tau < t_max && sq_dist(&z.x, &x.point.x) < delta * delta
        })
    {
        return Ok(HavinMazya {
            value: f64::INFINITY,
            std_error: 0.0,
            singular_hits: 0,
        });
    }
    let d = params.d;
    // proposal around a center c: lag law × N(x_c, 2τ) in space
    let ln_prop = |c: &SpaceTimePoint, y: &SpaceTimePoint| -> f64 {
        let tau = c.t - y.t;
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_lag_density(tau) - 0.5 * d as f64 * (4.0 * std::f64::consts::PI * tau).ln()
            - sq_dist(&c.x, &y.x) / (4.0 * tau)
    };
    let inside = |c: &SpaceTimePoint, y: &SpaceTimePoint| -> bool {
        let tau = c.t - y.t;
        tau > 0.0 && tau < t_max && sq_dist(&c.x, &y.x) < delta * delta
    };
    let total: f64 = atoms.iter().map(|x| x.weight).sum();
    let cum: Vec<f64> = atoms
        .iter()
        .scan(0.0, |s, x| {
            *s += x.weight / total;
            Some(*s)
        })
        .collect();
    let mut rng = seeded(seed);
    let mut y = SpaceTimePoint::origin(d);
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut hits = 0;
    for _ in 0..samples {
        let center = if rng.gen::<f64>() < 0.5 {
            z
        } else {
            let u: f64 = rng.gen();
            &atoms[cum.partition_point(|&c| c < u).min(atoms.len() - 1)].point
        };
        let tau = lag_sample(&mut rng);
        let sd = (2.0 * tau).sqrt();
        for (m, v) in y.x.iter_mut().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            *v = center.x[m] + sd * g;
        }
        y.t = center.t - tau;
        if !inside(z, &y) {
            continue;
        }
        let mut pot = 0.0;
        let mut mix = 0.5 * ln_prop(z, &y).exp();
        let mut singular = false;
        for x in &atoms {
            if x.point == y {
                singular = true;
                break;
            }
            if inside(&x.point, &y) {
                pot += x.weight * k.eval_diff(&x.point, &y);
            }
            mix += 0.5 * x.weight / total * ln_prop(&x.point, &y).exp();
        }
        if singular {
            hits += 1;
            continue;
        }
        if pot <= 0.0 || mix <= 0.0 {
            continue;
        }
        let f = k.eval_diff(z, &y) * pot.powf(qc - 1.0);
        let w = f / mix;
        s1 += w;
        s2 += w * w;
    }
    let n = samples as f64;
    let m = s1 / n;
    Ok(HavinMazya {
        value: m,
        std_error: ((s2 / n - m * m).max(0.0) / n).sqrt(),
        singular_hits: hits,
    })
}

/// `(A1, A2, A3)` for weights `λ_R` with `σ` = Lebesgue measure and exponent `s`.
///
/// `A1 = ∫ (Σ_R λ_R/|R| 1_R)^s`, `A2 = Σ_R λ_R (Λ(R)/|R|)^{s-1}`,
/// `A3 = ∫ (sup_{R ∋ z} Λ(R)/|R|)^s` with `Λ(R) = Σ_{R' ⊆ R} λ_{R'}`.
/// All three are exact finite computations.
pub fn a1_a2_a3(lattice: &ParabolicLattice, lambdas: &HashMap<RectKey, f64>, s: f64) -> Result<(f64, f64, f64)> {
    if !(s > 1.0) {
        return arg("exponent s must exceed 1");
    }
    let d = lattice.dim() as i32;
    let vol = |k: i32| lattice.side(k).powi(d + 2);
    let mut keys: Vec<&RectKey> = lambdas.keys().filter(|k| lambdas[*k] > 0.0).collect();
    keys.sort();
    for k in &keys {
        if k.k < lattice.k_min || k.k > lattice.k_max {
            return Err(Error::Range(format!("generation {} outside the lattice window", k.k)));
        }
        if lambdas[*k] < 0.0 {
            return arg("weights must be nonnegative");
        }
    }
    if keys.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let mut sub: HashMap<RectKey, f64> = HashMap::new();
    for key in &keys {
        let lam = lambdas[*key];
        let mut cur = (*key).clone();
        loop {
            *sub.entry(cur.clone()).or_insert(0.0) += lam;
            if cur.k <= lattice.k_min {
                break;
            }
            cur = parent_key(&cur);
        }
    }
    let a2: f64 = keys
        .iter()
        .map(|key| lambdas[*key] * (sub[*key] / vol(key.k)).powf(s - 1.0))
        .sum();
    let tree = RectTree::new(keys.iter().copied(), lattice.k_min);
    let a1 = tree.integrate(
        &vol,
        &|acc, key| acc + lambdas.get(key).copied().unwrap_or(0.0) / vol(key.k),
        &|v| v.powf(s),
        0.0,
    );
    let a3 = tree.integrate(
        &vol,
        &|acc, key| acc.max(sub.get(key).copied().unwrap_or(0.0) / vol(key.k)),
        &|v| v.powf(s),
        0.0,
    );
    Ok((a1, a2, a3))
}

pub enum Sigma<'a> {
    Lebesgue,
    Measure(&'a DiscreteMeasure),
}

/// `sup_k μ(R_k(z)) / σ(R_k(z))` over the lattice window, skipping `σ(R) = 0`.
pub fn dyadic_maximal(lattice: &ParabolicLattice, mu: &DiscreteMeasure, sigma: &Sigma, z: &SpaceTimePoint) -> Result<f64> {
    let mut best: Option<f64> = None;
    for k in lattice.generations() {
        let r = lattice.locate(z, k)?;
        let den = match sigma {
            Sigma::Lebesgue => r.volume(),
            Sigma::Measure(s) => s.mass_where(|p| r.contains(p)),
        };
        if den > 0.0 {
            let v = mu.mass_where(|p| r.contains(p)) / den;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or_else(|| Error::Degenerate("σ vanishes on every rectangle containing z".into()))
}

/// Regularized Wolff machinery restricted to measures carried by a fixed
/// cloud: the incidence `η_R(z_i)` is computed once.
#[derive(Debug, Clone)]
pub struct RegularizedCloud {
    pub ctx: WolffContext,
    pub points: Vec<SpaceTimePoint>,
    pub(crate) keys: Vec<RectKey>,
    pub(crate) index: HashMap<RectKey, usize>,
    pub(crate) b: Vec<f64>,
    pub(crate) incidence: Vec<Vec<(usize, f64)>>,
}

impl RegularizedCloud {
    pub fn new(ctx: &WolffContext, points: &[SpaceTimePoint]) -> Self {
        let mut index: HashMap<RectKey, usize> = HashMap::new();
        let mut keys = Vec::new();
        let mut b = Vec::new();
        let mut incidence = Vec::with_capacity(points.len());
        for p in points {
            let mut row = Vec::new();
            for k in ctx.generations() {
                for (key, eta) in ctx.lattice.bump_support(p, k) {
                    let id = *index.entry(key.clone()).or_insert_with(|| {
                        keys.push(key.clone());
                        b.push(ctx.b(key.k));
                        keys.len() - 1
                    });
                    row.push((id, eta));
                }
            }
            incidence.push(row);
        }
        Self {
            ctx: ctx.clone(),
            points: points.to_vec(),
            keys,
            index,
            b,
            incidence,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `ν(η_R)` for `ν = Σ w_i δ_{z_i}`.
    pub fn masses(&self, w: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.keys.len()];
        for (row, &wi) in self.incidence.iter().zip(w) {
            if wi != 0.0 {
                for &(id, eta) in row {
                    m[id] += wi * eta;
                }
            }
        }
        m
    }

    /// `η_R(z_i)` summed into `m` with factor `c`.
    pub fn add_point(&self, m: &mut [f64], i: usize, c: f64) {
        for &(id, eta) in &self.incidence[i] {
            m[id] += c * eta;
        }
    }

    pub fn energy(&self, m: &[f64]) -> f64 {
        let qc = self.ctx.params.q_conj;
        m.iter().zip(&self.b).filter(|(v, _)| **v > 0.0).map(|(v, b)| b * v.powf(qc)).sum()
    }

    /// `𝒲^𝒟ν(z_i)`
    pub fn potential(&self, m: &[f64], i: usize) -> f64 {
        let e = self.ctx.params.q_conj - 1.0;
        self.incidence[i]
            .iter()
            .filter(|(id, _)| m[*id] > 0.0)
            .map(|&(id, eta)| self.b[id] * m[id].powf(e) * eta)
            .sum()
    }

    /// `𝒲^𝒟ν` at an arbitrary point.
    pub fn potential_at(&self, m: &[f64], z: &SpaceTimePoint) -> f64 {
        let e = self.ctx.params.q_conj - 1.0;
        let mut s = 0.0;
        for k in self.ctx.generations() {
            for (key, eta) in self.ctx.lattice.bump_support(z, k) {
                if let Some(&id) = self.index.get(&key) {
                    if m[id] > 0.0 {
                        s += self.b[id] * m[id].powf(e) * eta;
                    }
                }
            }
        }
        s
    }

    pub fn measure(&self, w: &[f64]) -> DiscreteMeasure {
        let d = self.ctx.params.d;
        DiscreteMeasure::from_atoms(d, self.points.iter().cloned().zip(w.iter().copied()))
            .expect("cloud weights are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BackwardBall;
    use crate::measure::riesz_potential;
    use rand::Rng;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    fn ctx(d: usize, alpha: f64, q: f64, depth: i32) -> WolffContext {
        WolffContext::unit(ParabolicParams::new(d, alpha, q).unwrap(), depth).unwrap()
    }

    fn random_measure(d: usize, n: usize, seed: u64) -> DiscreteMeasure {
        let mut rng = seeded(seed);
        let mut mu = DiscreteMeasure::new(d);
        for _ in 0..n {
            let x = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            mu.push(pt_vec(x, rng.gen_range(-1.0..0.0)), rng.gen_range(0.5..1.5)).unwrap();
        }
        mu
    }

    fn pt_vec(x: Vec<f64>, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t)
    }

    #[test]
    fn dyadic_examples() {
        let c = ctx(2, 1.0, 2.0, 3);
        let z = pt(&[0.3, 0.3], -0.3);
        let mu = DiscreteMeasure::dirac(z.clone(), 1.0).unwrap();
        assert_eq!(dyadic_potential(&c, &mu, &z), 584.0);
        assert_eq!(dyadic_wolff(&c, &mu, &z), 84.0);
        assert_eq!(dyadic_potential(&c, &DiscreteMeasure::new(2), &z), 0.0);
        let far = DiscreteMeasure::dirac(pt(&[0.9, 0.9], -0.9), 1.0).unwrap();
        assert_eq!(dyadic_potential(&c, &far, &z), 0.0);
        assert_eq!(dyadic_wolff(&c, &far, &z), 0.0);
    }

    #[test]
    fn wolff_homogeneity_in_mass() {
        let c = ctx(2, 1.0, 1.5, 4);
        let mu = random_measure(2, 8, 3);
        let z = mu.atoms()[0].point.clone();
        let a = dyadic_wolff(&c, &mu, &z);
        let b = dyadic_wolff(&c, &mu.scaled(2.0).unwrap(), &z);
        assert!((b / a - 2f64.powf(c.params.q_conj - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn wolff_identity_exact() {
        for q in [1.5, 2.0, 3.0] {
            let c = ctx(2, 1.0, q, 6);
            let mu = random_measure(2, 15, 11);
            let lhs = dyadic_wolff_integral(&c, &mu);
            let rhs = dyadic_energy_sum(&c, &mu);
            assert!((lhs - rhs).abs() / rhs < 1e-12);
        }
    }

    #[test]
    fn energy_integral_single_atom() {
        let c = ctx(1, 1.0, 2.0, 4);
        let z = pt(&[0.2], -0.7);
        let mu = DiscreteMeasure::dirac(z, 1.5).unwrap();
        // nested rectangles: value on R_k \ R_{k+1} is Σ_{j≤k} ℓ_j^{α-n} · 1.5
        let n = 3.0;
        let mut want = 0.0;
        let mut acc = 0.0;
        for k in 1..=4 {
            let l = 0.5f64.powi(k);
            acc += l.powf(1.0 - n) * 1.5;
            let inner = if k < 4 { (0.5 * l).powi(3) } else { 0.0 };
            want += (l.powi(3) - inner) * acc * acc;
        }
        let got = dyadic_energy_integral(&c, &mu);
        assert!((got - want).abs() / want < 1e-12);
    }

    #[test]
    fn energy_integral_matches_grid() {
        // the potential is constant on finest cells, so a midpoint grid at a
        // quarter of the finest spacing integrates it exactly
        for q in [1.5, 2.0, 3.0] {
            let c = ctx(1, 1.0, q, 4);
            let mu = random_measure(1, 4, 5);
            let exact = dyadic_energy_integral(&c, &mu);
            let masses = dyadic_masses(&c, &mu);
            let mut roots: Vec<RectKey> = masses.keys().filter(|k| k.k == 1).cloned().collect();
            roots.sort();
            let hx = c.side(4) / 4.0;
            let ht = hx * hx;
            let mut s = 0.0;
            for r in &roots {
                let (lo, _, _, th) = c.lattice.rect(r).bounds();
                let (nx, nt) = ((c.side(1) / hx) as usize, ((c.side(1) * c.side(1)) / ht) as usize);
                for i in 0..nx {
                    for j in 0..nt {
                        let z = pt(&[lo[0] + (i as f64 + 0.5) * hx], th - (j as f64 + 0.5) * ht);
                        s += dyadic_potential(&c, &mu, &z).powf(c.params.q_conj) * hx * ht;
                    }
                }
            }
            assert!((s - exact).abs() / exact < 1e-9, "q={q}: {s} vs {exact}");
        }
    }

    #[test]
    fn regularized_dominates_plain() {
        let c = ctx(2, 1.0, 2.0, 4);
        let lat = &c.lattice;
        let r = lat.locate(&pt(&[0.3, 0.6], -0.4), 2).unwrap();
        let mu = DiscreteMeasure::dirac(r.center(), 1.0).unwrap();
        assert!(regularized_energy(&c, &mu) >= dyadic_energy_sum(&c, &mu));
        let mu = random_measure(2, 10, 2);
        for a in mu.atoms() {
            assert!(regularized_wolff(&c, &mu, &a.point) >= dyadic_wolff(&c, &mu, &a.point) - 1e-12);
        }
        let lhs: f64 = mu.atoms().iter().map(|a| a.weight * regularized_wolff(&c, &mu, &a.point)).sum();
        let rhs = regularized_energy(&c, &mu);
        assert!((lhs - rhs).abs() / rhs < 1e-12);
        let far = DiscreteMeasure::dirac(pt(&[50.0, 50.0], 10.0), 1.0).unwrap();
        assert_eq!(regularized_wolff(&c, &far, &pt(&[0.3, 0.3], -0.3)), 0.0);
    }

    #[test]
    fn continuous_wolff_examples() {
        let p = ParabolicParams::new(2, 1.0, 2.0).unwrap();
        let z = pt(&[0.0, 0.0], 0.0);
        assert_eq!(continuous_wolff(&DiscreteMeasure::new(2), &z, &p, 1.0).unwrap(), 0.0);
        let r0: f64 = 0.3;
        let mu = DiscreteMeasure::dirac(pt(&[r0, 0.0], -0.01), 1.0).unwrap();
        let v = continuous_wolff(&mu, &z, &p, 1.0).unwrap();
        assert!((v - (r0.powi(-2) - 1.0) / 2.0).abs() < 1e-12);
        let fut = DiscreteMeasure::dirac(pt(&[0.0, 0.0], 0.5), 1.0).unwrap();
        assert_eq!(continuous_wolff(&fut, &z, &p, 1.0).unwrap(), 0.0);
        let crit = ParabolicParams::new(2, 2.0, 2.0).unwrap();
        assert!(continuous_wolff(&mu, &z, &crit, f64::INFINITY).is_err());
        assert!(continuous_wolff(&mu, &z, &p, f64::INFINITY).unwrap() > v);
    }

    #[test]
    fn continuous_wolff_matches_quadrature() {
        let p = ParabolicParams::new(1, 1.0, 1.5).unwrap();
        let mu = random_measure(1, 6, 8);
        let z = pt(&[0.5], 0.2);
        let exact = continuous_wolff(&mu, &z, &p, 1.0).unwrap();
        // midpoint rule in log r with direct ball counts
        let n = 200_000;
        let (lo, hi) = (1e-4f64.ln(), 0.0);
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let r = (lo + (i as f64 + 0.5) * h).exp();
            let ball = BackwardBall::new(z.clone(), r).unwrap();
            let m = mu.mass_where(|q| ball.contains(q));
            if m > 0.0 {
                s += (m * r.powf(p.alpha * p.q - p.nf())).powf(p.q_conj - 1.0) * h;
            }
        }
        assert!((s - exact).abs() / exact < 1e-3, "{s} vs {exact}");
    }

    #[test]
    fn correlation_kernel_newtonian_case() {
        // d = 3, α = 2, equal times: ∫_0^∞ g_{2u}(x) du = 1/(8π|x|)
        let p = ParabolicParams::new(3, 2.0, 2.0).unwrap();
        let z = pt(&[0.0, 0.0, 0.0], 0.0);
        let w = pt(&[0.7, 0.0, 0.0], 0.0);
        let c = q2_correlation_kernel(&p, &z, &w);
        let want = 1.0 / (8.0 * std::f64::consts::PI * 0.7);
        assert!((c - want).abs() / want < 1e-6, "{c} vs {want}");
    }

    #[test]
    fn havin_mazya_q2_is_correlation() {
        let p = ParabolicParams::new(1, 1.0, 2.0).unwrap();
        let mu = DiscreteMeasure::from_atoms(1, [(pt(&[0.0], 0.0), 1.0), (pt(&[0.4], -0.3), 0.5)]).unwrap();
        let z = pt(&[0.2], 0.5);
        let hm = havin_mazya(&mu, &z, &p, f64::INFINITY, 200_000, 1).unwrap();
        let want: f64 = mu.atoms().iter().map(|a| a.weight * q2_correlation_kernel(&p, &z, &a.point)).sum();
        assert!((hm.value - want).abs() < 3.0 * hm.std_error + 1e-3 * want, "{hm:?} vs {want}");
        // it is not the Γ^{2α} potential
        let g2 = riesz_potential(&mu, 2.0, &z).unwrap();
        assert!((g2 - want).abs() / want > 0.05);
        assert_eq!(havin_mazya(&DiscreteMeasure::new(1), &z, &p, 1.0, 10, 1).unwrap().value, 0.0);
    }

    #[test]
    fn havin_mazya_is_infinite_at_atoms_for_small_q() {
        // d = 2, α = 1: (q'-1)(n-α) = 3(q'-1) ≥ 4 iff q ≤ 7/4
        let mu = DiscreteMeasure::dirac(pt(&[0.0, 0.0], -0.1), 1.0).unwrap();
        let z = pt(&[0.1, 0.0], 0.0);
        let low = ParabolicParams::new(2, 1.0, 1.5).unwrap();
        assert_eq!(havin_mazya(&mu, &z, &low, 1.0, 100, 1).unwrap().value, f64::INFINITY);
        // out of reach of the truncated cone: finite again
        let far = pt(&[0.1, 0.0], 0.5);
        assert!(havin_mazya(&mu, &far, &low, 0.5, 1000, 1).unwrap().value.is_finite());
        let high = ParabolicParams::new(2, 1.0, 3.0).unwrap();
        let v = havin_mazya(&mu, &z, &high, 1.0, 4000, 1).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
    }

    #[test]
    fn a_functionals_examples() {
        let lat = ParabolicLattice::unit(1, 4).unwrap();
        let r = lat.locate(&pt(&[0.3], -0.3), 2).unwrap();
        let v = r.volume();
        let mut lam = HashMap::new();
        lam.insert(r.key(), 1.0);
        let (a1, a2, a3) = a1_a2_a3(&lat, &lam, 2.0).unwrap();
        assert!((a2 - 1.0 / v).abs() < 1e-12 * a2);
        assert!((a1 - 1.0 / v).abs() < 1e-12 * a1);
        // ancestors of R also count in the supremum
        let p1 = lat.parent(&r).unwrap();
        let want3 = 1.0 / v + (p1.volume() - v) / (p1.volume() * p1.volume());
        assert!((a3 - want3).abs() < 1e-12 * a3);
        let child = lat.children(&r).unwrap()[3].clone();
        lam.insert(child.key(), 1.0);
        let (_, a2, _) = a1_a2_a3(&lat, &lam, 2.0).unwrap();
        let want = 2.0 / v + 1.0 / child.volume();
        assert!((a2 - want).abs() < 1e-12 * want);
        let zero: HashMap<RectKey, f64> = HashMap::new();
        assert_eq!(a1_a2_a3(&lat, &zero, 2.0).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn maximal_examples() {
        let lat = ParabolicLattice::unit(2, 5).unwrap();
        let mu = random_measure(2, 6, 4);
        let z = mu.atoms()[2].point.clone();
        assert!((dyadic_maximal(&lat, &mu, &Sigma::Measure(&mu), &z).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(dyadic_maximal(&lat, &DiscreteMeasure::new(2), &Sigma::Lebesgue, &z).unwrap(), 0.0);
        let dirac = DiscreteMeasure::dirac(z.clone(), 2.0).unwrap();
        let fine = lat.locate(&z, 5).unwrap().volume();
        assert_eq!(dyadic_maximal(&lat, &dirac, &Sigma::Lebesgue, &z).unwrap(), 2.0 / fine);
        let other = DiscreteMeasure::dirac(pt(&[9.0, 9.0], 9.0), 1.0).unwrap();
        assert!(dyadic_maximal(&lat, &dirac, &Sigma::Measure(&other), &z).is_err());
    }

    #[test]
    fn cloud_model_matches_direct() {
        let c = ctx(2, 1.0, 3.0, 4);
        let mu = random_measure(2, 7, 21);
        let cloud = RegularizedCloud::new(&c, &mu.points());
        let m = cloud.masses(&mu.weights());
        assert!((cloud.energy(&m) - regularized_energy(&c, &mu)).abs() < 1e-10 * cloud.energy(&m));
        for (i, a) in mu.atoms().iter().enumerate() {
            let direct = regularized_wolff(&c, &mu, &a.point);
            assert!((cloud.potential(&m, i) - direct).abs() < 1e-10 * direct);
            assert!((cloud.potential_at(&m, &a.point) - direct).abs() < 1e-10 * direct);
        }
    }
}
