//! Wiener-type series for parabolic thinness, the separation construction
//! and the sampled Kellogg and quasicontinuity experiments.
//!
//! Every level is an independent capacity problem on an ε-net whose spacing
//! follows the ball, `ε_j = ε₀·r_j`, on a lattice refined with the net.

use serde::Serialize;

use crate::capacity::{
    capacity_frank_wolfe, linear_capacity_q2, refined_context, CapacityEstimate, DiagonalPolicy, FwOptions,
    LinearOptions, Q2Kernel,
};
use crate::error::{Error, Result};
use crate::geometry::{heat_ball_contains, heat_ball_in_backward_ball, BackwardBall, HeatBall, SpaceTimePoint};
use crate::measure::{DiscreteMeasure, RegionSet, Window};
use crate::rng::mix;
use crate::tolerances::{
    KELLOGG_RATIO, VERDICT_CONV_RATIO, VERDICT_CONV_TAIL_REL, VERDICT_DIV_FLOOR, VERDICT_DIV_REL,
};
use crate::wolff::{bump_masses, RegularizedCloud, WolffContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienerForm {
    Integral,
    DyadicBalls,
    Annuli,
    HeatBalls,
}

impl WienerForm {
    pub fn name(self) -> &'static str {
        match self {
            WienerForm::Integral => "integral",
            WienerForm::DyadicBalls => "dyadic_balls",
            WienerForm::Annuli => "annuli",
            WienerForm::HeatBalls => "heat_balls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerTerm {
    pub j: usize,
    pub radius: f64,
    /// For the integral form: mean capacity over the octave's samples.
    pub capacity: f64,
    pub term: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerSeriesReport {
    pub form: WienerForm,
    pub depth: usize,
    pub terms: Vec<WienerTerm>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
}

impl WienerSeriesReport {
    fn new(form: WienerForm, depth: usize, terms: Vec<WienerTerm>) -> Self {
        let mut acc = 0.0;
        let partial_sums = terms
            .iter()
            .map(|t| {
                acc += t.term;
                acc
            })
            .collect();
        let values: Vec<f64> = terms.iter().map(|t| t.term).collect();
        Self {
            form,
            depth,
            terms,
            partial_sums,
            verdict: verdict(&values),
        }
    }

    pub fn term_values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.term).collect()
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Tail test on a finite list of nonnegative terms.
///
/// Divergent when every term of the trailing third exceeds
/// `max(10⁻³·t₁, 10⁻⁹)`. Convergent when the trailing third vanishes, or
/// when a geometric envelope `A·ρ^j` fitted to it (least squares in log,
/// then raised to dominate every trailing term) has `ρ ≤ 0.9` and a tail
/// beyond the last term below half the partial sum. Otherwise Inconclusive.
pub fn verdict(terms: &[f64]) -> Verdict {
    let n = terms.len();
    if n == 0 {
        return Verdict::Inconclusive;
    }
    let m = n.div_ceil(3);
    let trailing = &terms[n - m..];
    let floor = (VERDICT_DIV_REL * terms[0]).max(VERDICT_DIV_FLOOR);
    if trailing.iter().all(|&t| t > floor) {
        return Verdict::Divergent;
    }
    if trailing.iter().all(|&t| t == 0.0) {
        return Verdict::Convergent;
    }
    let pts: Vec<(f64, f64)> = trailing
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, &t)| ((n - m + i + 1) as f64, t.ln()))
        .collect();
    if pts.len() < 2 {
        return Verdict::Inconclusive;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _) = crate::capacity::fit_line(&x, &y);
    let rho = slope.exp();
    if !(rho <= VERDICT_CONV_RATIO) {
        return Verdict::Inconclusive;
    }
    // smallest A with A ρ^j ≥ t_j on the trailing third, in logs
    let ln_a = pts.iter().map(|&(j, l)| l - j * slope).fold(f64::NEG_INFINITY, f64::max);
    let tail = (ln_a + (n as f64 + 1.0) * slope).exp() / (1.0 - rho);
    let sum: f64 = terms.iter().sum();
    if tail < VERDICT_CONV_TAIL_REL * sum {
        Verdict::Convergent
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerConfig {
    /// Net spacing relative to the ball radius.
    pub eps0: f64,
    /// Candidates drawn per net cell.
    pub candidates: usize,
    pub seed: u64,
    /// Lattice generations below the net spacing.
    pub extra_depth: i32,
    /// Radii per octave for the integral form.
    pub per_octave: usize,
    pub fw: FwOptions,
    pub linear: LinearOptions,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            eps0: 0.5,
            candidates: 16,
            seed: 0,
            extra_depth: 2,
            per_octave: 2,
            fw: FwOptions::default(),
            linear: LinearOptions::default(),
        }
    }
}

fn level_err(level: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Level {
        level,
        message: e.to_string(),
    }
}

/// ε-net of `E ∩ Q_r(z0)`, minus `Q_{r/2}(z0)` for annuli.
pub fn ball_net(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    r: f64,
    annulus: bool,
    cfg: &WienerConfig,
    label: u64,
) -> Result<Vec<SpaceTimePoint>> {
    let ball = BackwardBall::new(z0.clone(), r)?;
    let inner = BackwardBall::new(z0.clone(), 0.5 * r)?;
    let filter = |p: &SpaceTimePoint| ball.contains(p) && !(annulus && inner.contains(p));
    Ok(e.epsilon_net(
        &Window::around_ball(&ball),
        cfg.eps0 * r,
        cfg.candidates,
        mix(cfg.seed, label),
        &filter,
    ))
}

fn dyadic_capacity(cloud: &[SpaceTimePoint], ctx: &WolffContext, spacing: f64, cfg: &WienerConfig) -> Result<(CapacityEstimate, WolffContext)> {
    let local = refined_context(ctx, spacing, cfg.extra_depth)?;
    let est = capacity_frank_wolfe(cloud, &local, &cfg.fw)?;
    Ok((est, local))
}

/// Wiener series of `E` at `z0` in one of the three dyadic forms.
///
/// `term_j = (𝒞(E ∩ S_j) / r_j^{n-αq})^{q'-1}` with `S_j = Q_{2^{-j}}(z0)`
/// or the annulus `Q_j \ Q_{j+1}`; the integral form sums
/// `∫ (𝒞(E ∩ Q_r)/r^{n-αq})^{q'-1} dr/r` over the octave `[2^{-j}, 2^{1-j}]`.
pub fn wiener_series(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    ctx: &WolffContext,
    form: WienerForm,
    depth: usize,
    cfg: &WienerConfig,
) -> Result<WienerSeriesReport> {
    if form == WienerForm::HeatBalls {
        return Err(Error::Argument("use wiener_series_heatball for the heat-ball form".into()));
    }
    ctx.params.require_nonlinear()?;
    if e.d != ctx.params.d || z0.dim() != ctx.params.d {
        return Err(Error::Dimension {
            expected: ctx.params.d,
            got: if e.d != ctx.params.d { e.d } else { z0.dim() },
        });
    }
    let codim = ctx.params.codim();
    let power = ctx.params.q_conj - 1.0;
    let f = |cap: f64, r: f64| (cap / r.powf(codim)).powf(power);
    let mut terms = Vec::with_capacity(depth);
    for j in 1..=depth {
        let term = match form {
            WienerForm::DyadicBalls | WienerForm::Annuli => {
                let r = 0.5f64.powi(j as i32);
                let annulus = form == WienerForm::Annuli;
                let cloud = ball_net(e, z0, r, annulus, cfg, j as u64).map_err(level_err(j))?;
                let (est, _) = dyadic_capacity(&cloud, ctx, cfg.eps0 * r, cfg).map_err(level_err(j))?;
                WienerTerm {
                    j,
                    radius: r,
                    capacity: est.value,
                    term: f(est.value, r),
                    points: cloud.len(),
                }
            }
            WienerForm::Integral => {
                let m = cfg.per_octave.max(1);
                let dlog = std::f64::consts::LN_2 / m as f64;
                let (mut sum, mut caps, mut pts) = (0.0, 0.0, 0);
                for k in 0..m {
                    let r = 2f64.powf(-((j - 1) as f64) - (k as f64 + 0.5) / m as f64);
                    let label = 1_000 + (j * m + k) as u64;
                    let cloud = ball_net(e, z0, r, false, cfg, label).map_err(level_err(j))?;
                    let (est, _) = dyadic_capacity(&cloud, ctx, cfg.eps0 * r, cfg).map_err(level_err(j))?;
                    sum += f(est.value, r) * dlog;
                    caps += est.value / m as f64;
                    pts += cloud.len();
                }
                WienerTerm {
                    j,
                    radius: 2f64.powi(1 - j as i32),
                    capacity: caps,
                    term: sum,
                    points: pts,
                }
            }
            WienerForm::HeatBalls => unreachable!(),
        };
        terms.push(term);
    }
    Ok(WienerSeriesReport::new(form, depth, terms))
}

fn heat_ball_nets(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    alpha: f64,
    r: f64,
    cfg: &WienerConfig,
    label: u64,
) -> Result<(HeatBall, f64, Vec<SpaceTimePoint>, Vec<SpaceTimePoint>)> {
    let ball = HeatBall::new(z0.clone(), r, 2.0 * alpha)?;
    let outer = heat_ball_in_backward_ball(&ball);
    let spacing = cfg.eps0 * r.sqrt();
    let outer_net = e.epsilon_net(
        &Window::around_ball(&outer),
        spacing,
        cfg.candidates,
        mix(cfg.seed, label),
        &|p| outer.contains(p),
    );
    let inner_net: Vec<SpaceTimePoint> = outer_net.iter().filter(|p| heat_ball_contains(&ball, p)).cloned().collect();
    Ok((ball, spacing, inner_net, outer_net))
}

fn linear_cap(cloud: &[SpaceTimePoint], alpha: f64, spacing: f64, cfg: &WienerConfig) -> Result<f64> {
    if cloud.is_empty() {
        return Ok(0.0);
    }
    let est = linear_capacity_q2(
        cloud,
        alpha,
        Q2Kernel::Riesz2Alpha,
        DiagonalPolicy::CellAverage { eps: spacing },
        &cfg.linear,
    )?;
    if !est.converged {
        return Err(Error::Degenerate(format!("active set did not settle, residual {}", est.duality_gap)));
    }
    Ok(est.value)
}

/// `q = 2` heat-ball series: `term_j = cap(E ∩ Θ^{2α}_{r_j}(z0)) / r_j^{(n-2α)/2}`,
/// `r_j = 2^{-j}`, with the linear `Γ^{2α}` capacity.
pub fn wiener_series_heatball(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    alpha: f64,
    depth: usize,
    cfg: &WienerConfig,
) -> Result<WienerSeriesReport> {
    let n = z0.dim() as f64 + 2.0;
    if !(alpha > 0.0 && 2.0 * alpha < n) {
        return Err(Error::Argument(format!("heat-ball series needs 0 < α < n/2, got {alpha}")));
    }
    let mut terms = Vec::with_capacity(depth);
    for j in 1..=depth {
        let r = 0.5f64.powi(j as i32);
        let (_, spacing, net, _) = heat_ball_nets(e, z0, alpha, r, cfg, 2_000 + j as u64).map_err(level_err(j))?;
        let cap = linear_cap(&net, alpha, spacing, cfg).map_err(level_err(j))?;
        terms.push(WienerTerm {
            j,
            radius: r,
            capacity: cap,
            term: cap / r.powf(0.5 * (n - 2.0 * alpha)),
            points: net.len(),
        });
    }
    Ok(WienerSeriesReport::new(WienerForm::HeatBalls, depth, terms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationRow {
    pub j: usize,
    pub heat_term: f64,
    /// Same normalization, set `E ∩ Q_{c√r}(z0)`.
    pub ball_term: f64,
}

/// Heat-ball terms against backward-ball terms over `Q_{c√r} ⊇ Θ^{2α}_r`,
/// both with the linear capacity; the heat-ball net is the part of the
/// ball net inside the heat ball.
pub fn heatball_domination(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    alpha: f64,
    depth: usize,
    cfg: &WienerConfig,
) -> Result<Vec<DominationRow>> {
    let n = z0.dim() as f64 + 2.0;
    if !(alpha > 0.0 && 2.0 * alpha < n) {
        return Err(Error::Argument(format!("heat-ball series needs 0 < α < n/2, got {alpha}")));
    }
    let mut rows = Vec::new();
    for j in 1..=depth {
        let r = 0.5f64.powi(j as i32);
        let (_, spacing, inner, outer) = heat_ball_nets(e, z0, alpha, r, cfg, 2_000 + j as u64).map_err(level_err(j))?;
        let norm = r.powf(0.5 * (n - 2.0 * alpha));
        let heat = linear_cap(&inner, alpha, spacing, cfg).map_err(level_err(j))?;
        let ball = linear_cap(&outer, alpha, spacing, cfg).map_err(level_err(j))?;
        rows.push(DominationRow {
            j,
            heat_term: heat / norm,
            ball_term: ball / norm,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    /// Capacitary measure of the chosen net; empty when vacuous.
    pub measure: DiscreteMeasure,
    pub level: Option<usize>,
    pub potential_at_z0: f64,
    /// Minimum of `𝒲^𝒟μ` over the net; `+∞` for an empty net.
    pub net_min: f64,
    pub net_size: usize,
    pub vacuous: bool,
    pub succeeded: bool,
    pub series: WienerSeriesReport,
}

/// Capacitary measure of `E ∩ Q_{2^{-N}}(z0)` for the first level
/// `N = 0, 1, …` whose net is nonempty and whose potential at `z0` is below
/// `epsilon`.
///
/// Refuses unless the dyadic-ball series at `z0` is Convergent.
pub fn build_separating_measure(
    e: &RegionSet,
    z0: &SpaceTimePoint,
    ctx: &WolffContext,
    epsilon: f64,
    depth: usize,
    cfg: &WienerConfig,
) -> Result<Separation> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    let series = wiener_series(e, z0, ctx, WienerForm::DyadicBalls, depth, cfg)?;
    if series.verdict != Verdict::Convergent {
        return Err(Error::Precondition(format!(
            "the Wiener series at z0 is {:?}, not Convergent",
            series.verdict
        )));
    }
    let mut any_points = false;
    for level in 0..=depth {
        let r = 0.5f64.powi(level as i32);
        let cloud = ball_net(e, z0, r, false, cfg, level as u64).map_err(level_err(level))?;
        if cloud.is_empty() {
            continue;
        }
        any_points = true;
        let (est, local) = dyadic_capacity(&cloud, ctx, cfg.eps0 * r, cfg).map_err(level_err(level))?;
        let model = RegularizedCloud::new(&local, &cloud);
        let m = model.masses(&est.capacitary_measure.weights());
        let at_z0 = model.potential_at(&m, z0);
        if at_z0 < epsilon {
            let net_min = (0..cloud.len()).map(|i| model.potential(&m, i)).fold(f64::INFINITY, f64::min);
            return Ok(Separation {
                measure: est.capacitary_measure,
                level: Some(level),
                potential_at_z0: at_z0,
                net_min,
                net_size: cloud.len(),
                vacuous: false,
                succeeded: true,
                series,
            });
        }
    }
    Ok(Separation {
        measure: DiscreteMeasure::new(ctx.params.d),
        level: None,
        potential_at_z0: 0.0,
        net_min: f64::INFINITY,
        net_size: 0,
        vacuous: !any_points,
        succeeded: !any_points,
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KelloggReport {
    pub samples: usize,
    pub convergent: usize,
    pub divergent: usize,
    pub inconclusive: usize,
    pub thin_points: Vec<SpaceTimePoint>,
    pub thin_capacity: f64,
    pub set_capacity: f64,
    pub set_net_size: usize,
    pub ratio: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Classify sampled points of `E` by their series verdict and compare the
/// capacity of the thin ones with that of a net of `E`.
#[allow(clippy::too_many_arguments)]
pub fn kellogg_experiment(
    e: &RegionSet,
    window: &Window,
    ctx: &WolffContext,
    sample_count: usize,
    set_eps: f64,
    depth: usize,
    seed: u64,
    cfg: &WienerConfig,
) -> Result<KelloggReport> {
    let samples = e.sample(window, sample_count, 1000 * sample_count.max(1), mix(seed, 1));
    let (mut conv, mut div, mut inc) = (0, 0, 0);
    let mut thin = Vec::new();
    for (i, z) in samples.iter().enumerate() {
        let local_cfg = WienerConfig {
            seed: mix(seed, 100 + i as u64),
            ..cfg.clone()
        };
        let rep = wiener_series(e, z, ctx, WienerForm::DyadicBalls, depth, &local_cfg)?;
        match rep.verdict {
            Verdict::Convergent => {
                conv += 1;
                thin.push(z.clone());
            }
            Verdict::Divergent => div += 1,
            Verdict::Inconclusive => inc += 1,
        }
    }
    let net = e.epsilon_net(window, set_eps, cfg.candidates, mix(seed, 2), &|_| true);
    let local = refined_context(ctx, set_eps, cfg.extra_depth)?;
    let set_capacity = capacity_frank_wolfe(&net, &local, &cfg.fw)?.value;
    let thin_capacity = capacity_frank_wolfe(&thin, &local, &cfg.fw)?.value;
    let ratio = if set_capacity > 0.0 { thin_capacity / set_capacity } else { 0.0 };
    Ok(KelloggReport {
        samples: samples.len(),
        convergent: conv,
        divergent: div,
        inconclusive: inc,
        thin_points: thin,
        thin_capacity,
        set_capacity,
        set_net_size: net.len(),
        ratio,
        threshold: KELLOGG_RATIO,
        passed: ratio <= KELLOGG_RATIO,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiReport {
    /// `ϑ_j = ϑ₀ 2^{-j}`.
    pub thresholds: Vec<f64>,
    /// Truncation level `N_j` chosen for each threshold.
    pub levels: Vec<i32>,
    /// `ℰ_{>N}μ` for `N = k_lo - 1 ..= k_max`.
    pub tail_energies: Vec<(i32, f64)>,
    /// `Σ_j ϑ_j^{-q} ℰ_{>N_j}μ`.
    pub capacity_bound: f64,
    pub epsilon: f64,
    pub exceptional: Vec<usize>,
    /// Sup over non-exceptional probes of `𝒲μ - 𝒲_Nμ`, per `N`.
    pub sup_tail_off_exceptional: Vec<(i32, f64)>,
    /// Frank–Wolfe capacity of the exceptional probes (lower estimate).
    pub exceptional_capacity: f64,
    pub uniform_convergence: bool,
}

/// Truncated regularized potentials `𝒲_N μ` (generations `≤ N`), their
/// tails on a probe grid, and the exceptional set of the summable-threshold
/// construction.
pub fn quasicontinuity_probe(
    mu: &DiscreteMeasure,
    ctx: &WolffContext,
    epsilon: f64,
    theta0: f64,
    probe_grid: &[SpaceTimePoint],
) -> Result<QuasiReport> {
    if !(epsilon > 0.0 && theta0 > 0.0) {
        return Err(Error::Argument("epsilon and theta0 must be positive".into()));
    }
    let p = ctx.params;
    let masses = bump_masses(ctx, mu);
    let gens: Vec<i32> = ctx.generations().collect();
    let k_lo = gens[0];
    let k_max = *gens.last().expect("nonempty generation range");
    // energy per generation
    let mut gen_energy = vec![0.0; gens.len()];
    for (key, &m) in &masses {
        if key.k >= k_lo && key.k <= k_max && m > 0.0 {
            gen_energy[(key.k - k_lo) as usize] += ctx.b(key.k) * m.powf(p.q_conj);
        }
    }
    // tail energies ℰ_{>N} for N = k_lo - 1 ..= k_max
    let mut tail_energies = Vec::new();
    for n in (k_lo - 1)..=k_max {
        let t: f64 = gen_energy.iter().skip((n - k_lo + 1) as usize).sum();
        tail_energies.push((n, t));
    }
    // per-probe, per-generation contributions
    let contrib: Vec<Vec<f64>> = probe_grid
        .iter()
        .map(|z| {
            gens.iter()
                .map(|&k| {
                    ctx.lattice
                        .bump_support(z, k)
                        .into_iter()
                        .filter_map(|(key, eta)| masses.get(&key).map(|&m| ctx.b(k) * m.powf(p.q_conj - 1.0) * eta))
                        .sum()
                })
                .collect()
        })
        .collect();
    let tail_at = |i: usize, n: i32| -> f64 { contrib[i].iter().skip((n - k_lo + 1).max(0) as usize).sum() };
    let count = gens.len();
    let mut thresholds = Vec::new();
    let mut levels = Vec::new();
    let mut bound = 0.0;
    for j in 1..=count {
        let th = theta0 * 0.5f64.powi(j as i32);
        let budget = epsilon * 0.5f64.powi(j as i32);
        let (n, t) = tail_energies
            .iter()
            .copied()
            .find(|&(_, t)| th.powf(-p.q) * t <= budget)
            .expect("the tail beyond the finest generation is empty");
        thresholds.push(th);
        levels.push(n);
        bound += th.powf(-p.q) * t;
    }
    let exceptional: Vec<usize> = (0..probe_grid.len())
        .filter(|&i| thresholds.iter().zip(&levels).any(|(&th, &n)| tail_at(i, n) > th))
        .collect();
    let mut sup_tail = Vec::new();
    for n in (k_lo - 1)..=k_max {
        let s = (0..probe_grid.len())
            .filter(|i| exceptional.binary_search(i).is_err())
            .map(|i| tail_at(i, n))
            .fold(0.0, f64::max);
        sup_tail.push((n, s));
    }
    let uniform = sup_tail.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-300)
        && thresholds.iter().zip(&levels).all(|(&th, &n)| {
            sup_tail.iter().find(|s| s.0 == n).is_some_and(|s| s.1 <= th)
        });
    let ex_points: Vec<SpaceTimePoint> = exceptional.iter().map(|&i| probe_grid[i].clone()).collect();
    let exceptional_capacity = capacity_frank_wolfe(&ex_points, ctx, &FwOptions::default())?.value;
    Ok(QuasiReport {
        thresholds,
        levels,
        tail_energies,
        capacity_bound: bound,
        epsilon,
        exceptional,
        sup_tail_off_exceptional: sup_tail,
        exceptional_capacity,
        uniform_convergence: uniform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParabolicParams;
    use crate::measure::{Shape, Spine, SpineProfile};

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    fn ctx2() -> WolffContext {
        WolffContext::unit(ParabolicParams::new(2, 1.0, 2.0).unwrap(), 1).unwrap()
    }

    fn half_space() -> RegionSet {
        RegionSet::single(Shape::TimeHalfSpace { d: 2, t0: 0.0 })
    }

    fn spine() -> RegionSet {
        RegionSet::single(Shape::Spine(Spine {
            apex: pt(&[0.0, 0.0], 0.0),
            profile: SpineProfile::Exponential,
            depth: Some(1.0),
        }))
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(&[1.0, 1.1, 0.9, 1.0, 1.05, 0.95]), Verdict::Divergent);
        let geo: Vec<f64> = (0..9).map(|j| 0.3f64.powi(j)).collect();
        assert_eq!(verdict(&geo), Verdict::Convergent);
        assert_eq!(verdict(&[1.0, 0.0, 0.0]), Verdict::Convergent);
        // below the divergence floor but decaying too slowly for an envelope
        let slow = [1.0, 0.5, 0.2, 0.1, 0.01, 1e-3, 5e-4, 4.9e-4, 4.8e-4];
        assert_eq!(verdict(&slow), Verdict::Inconclusive);
        assert_eq!(verdict(&[]), Verdict::Inconclusive);
    }

    #[test]
    fn empty_intersection_is_convergent() {
        let e = RegionSet::single(Shape::TimeHalfSpace { d: 2, t0: -5.0 });
        let rep = wiener_series(&e, &pt(&[0.0, 0.0], 0.0), &ctx2(), WienerForm::DyadicBalls, 4, &WienerConfig::default()).unwrap();
        assert!(rep.terms.iter().all(|t| t.term == 0.0));
        assert_eq!(rep.verdict, Verdict::Convergent);
    }

    #[test]
    fn half_space_diverges_and_spine_converges() {
        let cfg = WienerConfig::default();
        let z0 = pt(&[0.0, 0.0], 0.0);
        for form in [WienerForm::Integral, WienerForm::DyadicBalls, WienerForm::Annuli] {
            let h = wiener_series(&half_space(), &z0, &ctx2(), form, 5, &cfg).unwrap();
            assert_eq!(h.verdict, Verdict::Divergent, "{form:?} {:?}", h.term_values());
            for w in h.partial_sums.windows(2) {
                assert!(w[1] >= w[0]);
            }
            let s = wiener_series(&spine(), &z0, &ctx2(), form, 5, &cfg).unwrap();
            assert_eq!(s.verdict, Verdict::Convergent, "{form:?} {:?}", s.term_values());
        }
        let h = wiener_series_heatball(&half_space(), &z0, 1.0, 5, &cfg).unwrap();
        assert_eq!(h.verdict, Verdict::Divergent, "{:?}", h.term_values());
        let s = wiener_series_heatball(&spine(), &z0, 1.0, 5, &cfg).unwrap();
        assert_eq!(s.verdict, Verdict::Convergent, "{:?}", s.term_values());
    }

    #[test]
    fn heat_terms_below_ball_terms() {
        let z0 = pt(&[0.0, 0.0], 0.0);
        for e in [half_space(), spine()] {
            for row in heatball_domination(&e, &z0, 1.0, 4, &WienerConfig::default()).unwrap() {
                assert!(row.heat_term <= row.ball_term, "{row:?}");
            }
        }
    }

    #[test]
    fn annuli_terms_below_ball_terms() {
        let cfg = WienerConfig::default();
        let z0 = pt(&[0.0, 0.0], 0.0);
        let b = wiener_series(&half_space(), &z0, &ctx2(), WienerForm::DyadicBalls, 3, &cfg).unwrap();
        let a = wiener_series(&half_space(), &z0, &ctx2(), WienerForm::Annuli, 3, &cfg).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert!(x.term <= y.term * (1.0 + 0.05), "{x:?} {y:?}");
        }
    }

    #[test]
    fn separation_refused_on_divergent_series() {
        let r = build_separating_measure(&half_space(), &pt(&[0.0, 0.0], 0.0), &ctx2(), 0.1, 4, &WienerConfig::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn quasicontinuity_on_point_masses() {
        let c = WolffContext::unit(ParabolicParams::new(1, 1.0, 2.0).unwrap(), 6).unwrap();
        let mu = DiscreteMeasure::from_atoms(1, [(pt(&[0.3], -0.3), 1.0), (pt(&[0.7], -0.6), 0.5)]).unwrap();
        let probes: Vec<_> = (0..40).map(|i| pt(&[0.025 * i as f64], -0.2 - 0.01 * i as f64)).collect();
        let rep = quasicontinuity_probe(&mu, &c, 0.1, 1.0, &probes).unwrap();
        assert!(rep.capacity_bound <= 0.1 * (1.0 + 1e-12));
        assert!(rep.uniform_convergence);
        assert!(rep.exceptional_capacity <= rep.capacity_bound * (1.0 + 1e-9));
        // the finest tail is empty
        assert_eq!(rep.sup_tail_off_exceptional.last().unwrap().1, 0.0);
    }
}
