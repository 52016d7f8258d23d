//! Seeded experiments behind `parawolff verify`.
//!
//! Every check yields one or more [`Check`] rows `(name, passed, value,
//! bracket)`. Rows come out in a fixed order and carry no timing, so two runs
//! with the same [`SuiteConfig`] give identical rows.

use rand::Rng as _;
use serde::Serialize;

use crate::capacity::{
    ball_capacity_scaling, capacity_frank_wolfe, capacity_q2_frank_wolfe, clarkson_check, equilibrium_check,
    heat_ball_net, linear_capacity_q2, rectangle_net, refined_context, DiagonalPolicy, FwOptions, LinearOptions,
    Q2Kernel, ScalingConfig, ScalingMode, ScalingShape,
};
use crate::error::{Error, Result};
use crate::geometry::{
    counterexample_point, heat_ball_contains, heat_ball_in_backward_ball, BackwardBall, HeatBall, ParabolicParams,
    SpaceTimePoint,
};
use crate::kernels::{bessel_total_mass, BesselKernel, Kernel, RieszKernel};
use crate::measure::{potential_via_heat_balls, riesz_potential, DiscreteMeasure, LogGrid, RegionSet, Shape, Spine, SpineProfile, Window};
use crate::rng::{mix, substream, Rng};
use crate::thinness::{
    build_separating_measure, heatball_domination, kellogg_experiment, wiener_series, wiener_series_heatball, Verdict,
    WienerConfig, WienerForm,
};
use crate::tolerances::*;
use crate::wolff::{
    continuous_energy, continuous_wolff, continuous_wolff_energy, dyadic_energy_sum, dyadic_wolff_integral,
    energy_report, havin_mazya, regularized_energy, WolffContext,
};

/// Knobs of a `verify` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    /// Parameters of the `config.*` rows.
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    /// Lattice depth of the dyadic suites.
    pub depth: i32,
    /// Net resolution of the thinness suites.
    pub epsilon0: f64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            d: 2,
            alpha: 1.0,
            q: 2.0,
            depth: 6,
            epsilon0: 0.5,
            seed: 0,
        }
    }
}

impl SuiteConfig {
    /// Parameters for the nonlinear path; rejects `αq > n`.
    pub fn params(&self) -> Result<ParabolicParams> {
        let p = ParabolicParams::new(self.d, self.alpha, self.q)?;
        p.require_nonlinear()?;
        if self.depth < 1 {
            return Err(Error::Argument(format!("depth must be at least 1, got {}", self.depth)));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::Argument(format!("epsilon0 must lie in (0, 1), got {}", self.epsilon0)));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: String,
    pub bracket: String,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn row(name: impl Into<String>, passed: bool, value: String, bracket: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        value,
        bracket: bracket.into(),
    }
}

/// A named group of checks.
pub struct Group {
    pub name: &'static str,
    pub run: fn(&SuiteConfig, &mut Plots) -> Result<Vec<Check>>,
}

/// Chart data gathered along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Plots {
    /// `(label, partial sums)` of the Wiener series.
    pub series: Vec<(String, Vec<f64>)>,
    pub scaling: Vec<ScalingPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPlot {
    pub name: String,
    /// Abscissa of the fit: `log r`, or `log log(1/r)` in log mode.
    pub x: Vec<f64>,
    pub log_capacity: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

pub const GROUPS: &[Group] = &[
    Group { name: "kernels", run: kernels },
    Group { name: "measure", run: layer_cake },
    Group { name: "geometry", run: geometry },
    Group { name: "wolff.identity", run: wolff_identity },
    Group { name: "wolff.brackets", run: wolff_brackets },
    Group { name: "wolff.easy_part", run: easy_part },
    Group { name: "capacity.equilibrium", run: equilibrium },
    Group { name: "capacity.scaling", run: scaling },
    Group { name: "capacity.q2_routes", run: q2_routes },
    Group { name: "thinness.dichotomy", run: dichotomy },
    Group { name: "thinness.separation", run: separation },
    Group { name: "thinness.kellogg", run: kellogg },
    Group { name: "capacity.clarkson", run: clarkson },
    Group { name: "config", run: config_rows },
];

/// Every group in order. A group that errors contributes one failed row.
pub fn run_all(cfg: &SuiteConfig) -> Result<(Vec<Check>, Plots)> {
    cfg.params()?;
    let mut out = Vec::new();
    let mut plots = Plots::default();
    for g in GROUPS {
        match (g.run)(cfg, &mut plots) {
            Ok(rows) => out.extend(rows),
            Err(e) => out.push(row(format!("{}.error", g.name), false, format!("{e}"), "no error")),
        }
    }
    Ok((out, plots))
}

fn rng(cfg: &SuiteConfig, label: u64) -> Rng {
    substream(cfg.seed, label)
}

fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
    SpaceTimePoint::new(x.to_vec(), t)
}

fn random_measure(rng: &mut Rng, d: usize, atoms: usize, x: (f64, f64), t: (f64, f64)) -> DiscreteMeasure {
    let mut mu = DiscreteMeasure::new(d);
    for _ in 0..atoms {
        let p = SpaceTimePoint::new((0..d).map(|_| rng.gen_range(x.0..x.1)).collect(), rng.gen_range(t.0..t.1));
        mu.push(p, rng.gen_range(0.2..1.0)).expect("positive weight");
    }
    mu
}

fn kernels(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let d = 1 + i % 2;
        let n = d as f64 + 2.0;
        let alpha = r.gen_range(0.2..n - 0.2);
        let k = RieszKernel::new(ParabolicParams::new(d, alpha, 2.0)?);
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let t = r.gen_range(0.05..2.0);
        let lambda = r.gen_range(-2.3f64..2.3).exp();
        let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let base = k.eval(&x, t);
        let scaled = k.eval(&xs, lambda * lambda * t) * lambda.powf(n - alpha);
        worst = worst.max((scaled / base - 1.0).abs());
    }
    let mut rows = vec![row(
        "kernels.scaling_max_rel",
        worst < KERNEL_SCALING_REL,
        num(worst),
        format!("< {KERNEL_SCALING_REL:e}"),
    )];
    for (d, alpha) in [(1, 1.0), (2, 1.0), (2, 2.0)] {
        let k = BesselKernel::new(ParabolicParams::new(d, alpha, 2.0)?);
        let (m, se) = bessel_total_mass(&k, 1_000_000, mix(cfg.seed, 2 + d as u64 * 10 + alpha as u64));
        rows.push(row(
            format!("kernels.bessel_mass.d{d}.a{alpha}"),
            (m - 1.0).abs() < BESSEL_MASS_REL,
            num(m),
            format!("1 ± {BESSEL_MASS_REL} (se {se:.2e})"),
        ));
    }
    Ok(rows)
}

fn layer_cake(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 3);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let d = 1 + i % 2;
        let n = d as f64 + 2.0;
        let alpha = r.gen_range(0.3..(n - 0.3).min(3.0));
        let atoms = r.gen_range(1..6);
        let mu = random_measure(&mut r, d, atoms, (-1.0, 1.0), (-1.0, 0.0));
        let z = SpaceTimePoint::new((0..d).map(|_| r.gen_range(-1.0..1.0)).collect(), r.gen_range(0.05..1.0));
        let direct = riesz_potential(&mu, alpha, &z)?;
        let grid = LogGrid::covering(&mu, alpha, &z, LAYER_CAKE_PER_DECADE)?;
        let layered = potential_via_heat_balls(&mu, alpha, &z, &grid)?;
        worst = worst.max((layered / direct - 1.0).abs());
    }
    Ok(vec![row(
        "measure.layer_cake_max_rel",
        worst < LAYER_CAKE_REL,
        num(worst),
        format!("< {LAYER_CAKE_REL}"),
    )])
}

fn geometry(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 4);
    let mut violations = 0usize;
    let mut members = 0usize;
    for d in [1usize, 2] {
        for alpha in [0.5, 1.0, 2.0] {
            for rho in [0.25, 1.0, 4.0] {
                let z = SpaceTimePoint::origin(d);
                let ball = HeatBall::new(z.clone(), rho, alpha)?;
                let outer = heat_ball_in_backward_ball(&ball);
                let reach = ball.max_radius();
                let mut found = 0;
                while found < 10_000 {
                    let p = SpaceTimePoint::new((0..d).map(|_| r.gen_range(-reach..reach)).collect(), -r.gen_range(0.0..rho));
                    if heat_ball_contains(&ball, &p) {
                        found += 1;
                        if !outer.contains(&p) {
                            violations += 1;
                        }
                    }
                }
                members += found;
            }
        }
    }
    let mut rows = vec![row(
        "geometry.containment_violations",
        violations == 0,
        violations.to_string(),
        format!("0 of {members}"),
    )];
    let unit = BackwardBall::new(SpaceTimePoint::origin(2), 1.0)?;
    for alpha in [1.0, 2.0] {
        let p = ParabolicParams::new(2, alpha, 2.0)?;
        let theta = HeatBall::new(SpaceTimePoint::origin(2), 1.0, alpha)?;
        let bad: Vec<u32> = (5..=100)
            .filter(|&k| {
                let z = counterexample_point(k, &p, &[1.0, 0.0]).expect("k ≥ 1 and unit e");
                !unit.contains(&z) || heat_ball_contains(&theta, &z)
            })
            .collect();
        rows.push(row(
            format!("geometry.counterexample_violations.a{alpha}"),
            bad.is_empty(),
            bad.len().to_string(),
            if bad.is_empty() { "0".to_string() } else { format!("0 (k = {bad:?})") },
        ));
    }
    Ok(rows)
}

const BRACKET_QS: [f64; 3] = [1.5, 2.0, 3.0];

fn wolff_identity(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 5);
    let mut worst: f64 = 0.0;
    for i in 0..30 {
        let ctx = WolffContext::unit(ParabolicParams::new(2, 1.0, BRACKET_QS[i % 3])?, cfg.depth)?;
        let atoms = r.gen_range(1..12);
        let mu = random_measure(&mut r, 2, atoms, (0.0, 1.0), (-1.0, 0.0));
        let a = dyadic_wolff_integral(&ctx, &mu);
        let b = dyadic_energy_sum(&ctx, &mu);
        worst = worst.max((a - b).abs() / b);
    }
    Ok(vec![row(
        "wolff.identity_max_rel",
        worst <= WOLFF_IDENTITY_REL,
        num(worst),
        format!("≤ {WOLFF_IDENTITY_REL:e}"),
    )])
}

/// Ratios `(Ė^𝒟/Σ, E/∫W dμ, ℰ/E)` on the 30-measure suite for one seed.
fn bracket_ratios(seed: u64, depth: i32) -> Result<[Vec<f64>; 3]> {
    let mut r = substream(seed, 6);
    let h = 0.5f64.powi(depth);
    let mut out: [Vec<f64>; 3] = Default::default();
    for i in 0..30 {
        let p = ParabolicParams::new(2, 1.0, BRACKET_QS[i % 3])?;
        let ctx = WolffContext::unit(p, depth)?;
        let atoms = r.gen_range(2..9);
        let mu = random_measure(&mut r, 2, atoms, (0.05, 0.95), (-0.95, -0.05));
        let (e_cont, _) = continuous_energy(&mu, &p, h, 20_000, mix(seed, 100 + i as u64));
        out[0].push(energy_report(&ctx, &mu).ratio);
        out[1].push(e_cont / continuous_wolff_energy(&mu, &p, 1.0, h));
        out[2].push(regularized_energy(&ctx, &mu) / e_cont);
    }
    Ok(out)
}

fn bracket(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn wolff_brackets(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let names = ["dyadic", "continuous", "regularized"];
    let mut per_seed = Vec::new();
    for s in 0..3 {
        per_seed.push(bracket_ratios(mix(cfg.seed, 600 + s), cfg.depth)?);
    }
    let mut rows = Vec::new();
    // the constants depend on q, so each exponent gets its own bracket
    for (k, name) in names.iter().enumerate() {
        for (qi, q) in BRACKET_QS.iter().enumerate() {
            let bs: Vec<(f64, f64)> = per_seed
                .iter()
                .map(|r| bracket(&r[k].iter().skip(qi).step_by(3).copied().collect::<Vec<_>>()))
                .collect();
            let (c1, c2) = bs[0];
            let spread = c2 / c1;
            let lo = bs.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
            let hi_lo = bs.iter().map(|b| b.0).fold(0.0, f64::max);
            let lo_hi = bs.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
            let hi = bs.iter().map(|b| b.1).fold(0.0, f64::max);
            let factor = (hi_lo / lo).max(hi / lo_hi);
            let base = format!("wolff.bracket.{name}.q{q}");
            rows.push(row(format!("{base}.c1"), c1 > 0.0, num(c1), "> 0"));
            rows.push(row(format!("{base}.c2"), c2.is_finite(), num(c2), "finite"));
            rows.push(row(
                format!("{base}.spread"),
                spread < BRACKET_MAX_SPREAD,
                num(spread),
                format!("< {BRACKET_MAX_SPREAD}"),
            ));
            rows.push(row(
                format!("{base}.seed_factor"),
                factor <= BRACKET_SEED_FACTOR,
                num(factor),
                format!("≤ {BRACKET_SEED_FACTOR}"),
            ));
        }
    }
    Ok(rows)
}

fn easy_part(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 7);
    let mut c0 = f64::INFINITY;
    let mut violations = 0usize;
    let mut used = 0usize;
    let mut infinite = 0usize;
    for i in 0..200 {
        let p = ParabolicParams::new(2, 1.0, BRACKET_QS[i % 3])?;
        let delta = [0.25, 0.5, 1.0][(i / 3) % 3];
        let atoms = r.gen_range(1..6);
        let mu = random_measure(&mut r, 2, atoms, (-0.5, 0.5), (-0.5, 0.0));
        let z = SpaceTimePoint::new(
            (0..2).map(|_| r.gen_range(-0.3..0.3)).collect(),
            r.gen_range(0.01..0.3),
        );
        let w = continuous_wolff(&mu, &z, &p, delta)?;
        if w <= 0.0 {
            continue;
        }
        used += 1;
        let v = havin_mazya(&mu, &z, &p, delta, 4000, mix(cfg.seed, 700 + i as u64))?;
        if v.value.is_infinite() {
            infinite += 1;
        } else {
            c0 = c0.min(v.value / w);
        }
        if v.value - MC_SIGMAS * v.std_error <= 0.0 {
            violations += 1;
        }
    }
    Ok(vec![
        row("wolff.easy_part.c0", c0 > 0.0 && c0.is_finite(), num(c0), format!("> 0 over {used} triples ({infinite} with V = ∞)")),
        row(
            "wolff.easy_part.sign_violations",
            violations == 0,
            violations.to_string(),
            format!("0 (V - {MC_SIGMAS}·se ≤ 0 while W > 0)"),
        ),
    ])
}

/// The ten clouds of the equilibrium suite: `(name, d, q, cloud, spacing)`.
fn equilibrium_clouds(cfg: &SuiteConfig) -> Result<Vec<(String, usize, f64, Vec<SpaceTimePoint>, f64)>> {
    let mut v = Vec::new();
    for (i, (d, q, r)) in [(2, 2.0, 0.125), (2, 1.5, 0.25), (2, 3.0, 0.2), (1, 1.5, 0.25), (1, 2.0, 0.1)]
        .into_iter()
        .enumerate()
    {
        let c = SpaceTimePoint::new(vec![0.37; d], -0.4);
        v.push((format!("rect{i}"), d, q, rectangle_net(&c, r, 0.5), 0.5 * r));
    }
    for (i, (d, q, rho)) in [(2, 2.0, 0.05), (1, 2.0, 0.1)].into_iter().enumerate() {
        let ball = HeatBall::new(SpaceTimePoint::new(vec![0.41; d], -0.2), rho, 1.0)?;
        v.push((format!("heat{i}"), d, q, heat_ball_net(&ball, 0.4), 0.4 * rho.sqrt()));
    }
    let z = pt(&[0.5, 0.5], -0.3);
    let b1 = BackwardBall::new(z.clone(), 0.25)?;
    let b2 = BackwardBall::new(pt(&[0.7, 0.5], -0.25), 0.2)?;
    let union = RegionSet::single(Shape::BackwardBall(b1.clone())).with(Shape::BackwardBall(b2))?;
    let w = Window {
        x_lo: vec![0.25, 0.25],
        x_hi: vec![0.9, 0.75],
        t_lo: -0.37,
        t_hi: -0.2,
    };
    let eps = 0.08;
    v.push(("union".into(), 2, 2.0, union.epsilon_net(&w, eps, 16, mix(cfg.seed, 80), &|_| true), eps));
    let ball = RegionSet::single(Shape::BackwardBall(b1.clone()));
    v.push((
        "ball".into(),
        2,
        1.5,
        ball.epsilon_net(&Window::around_ball(&b1), eps, 16, mix(cfg.seed, 81), &|_| true),
        eps,
    ));
    let half = RegionSet::single(Shape::TimeHalfSpace { d: 1, t0: -0.3 });
    let w1 = Window {
        x_lo: vec![0.2],
        x_hi: vec![0.6],
        t_lo: -0.45,
        t_hi: -0.25,
    };
    v.push(("half".into(), 1, 2.0, half.epsilon_net(&w1, 0.04, 16, mix(cfg.seed, 82), &|_| true), 0.04));
    Ok(v)
}

fn equilibrium(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut rows = Vec::new();
    for (name, d, q, cloud, spacing) in equilibrium_clouds(cfg)? {
        let base = WolffContext::unit(ParabolicParams::new(d, 1.0, q)?, 1)?;
        let ctx = refined_context(&base, spacing, 2)?;
        let est = capacity_frank_wolfe(&cloud, &ctx, &FwOptions::default())?;
        let gap = est.duality_gap / est.energy;
        let rep = equilibrium_check(&est, &cloud, &ctx, EQUILIBRIUM_TOL)?;
        let prefix = format!("capacity.equilibrium.{name}");
        rows.push(row(
            format!("{prefix}.gap_rel"),
            est.converged && gap < FW_GAP_REL,
            num(gap),
            format!("< {FW_GAP_REL:e} ({} points)", cloud.len()),
        ));
        rows.push(row(
            format!("{prefix}.min_ratio"),
            rep.holds(crate::capacity::Condition::A),
            num(rep.min_ratio),
            format!("≥ {}", 1.0 - EQUILIBRIUM_TOL),
        ));
        rows.push(row(
            format!("{prefix}.max_support_ratio"),
            rep.holds(crate::capacity::Condition::B),
            num(rep.max_support_ratio),
            format!("≤ {}", 1.0 + EQUILIBRIUM_TOL),
        ));
    }
    Ok(rows)
}

fn scaling(_cfg: &SuiteConfig, plots: &mut Plots) -> Result<Vec<Check>> {
    let center = pt(&[0.3141, 0.2718], -0.1618);
    let mut rows = Vec::new();
    let cases = [
        ("rectangle", ScalingShape::FullRectangle, 1.0, (1..=8).collect::<Vec<i32>>(), RECT_SLOPE_TOL),
        ("heat_ball", ScalingShape::HeatBall, 1.0, (2..=8).collect(), HEATBALL_SLOPE_TOL),
        ("log_mode", ScalingShape::FullRectangle, 2.0, (1..=8).collect(), LOG_SLOPE_TOL),
    ];
    for (name, shape, alpha, ks, tol) in cases {
        let ctx = WolffContext::unit(ParabolicParams::new(2, alpha, 2.0)?, 1)?;
        let radii: Vec<f64> = ks.iter().map(|&k| 0.5f64.powi(k)).collect();
        let fit = ball_capacity_scaling(shape, &radii, &ctx, &ScalingConfig::new(center.clone(), shape))?;
        plots.scaling.push(ScalingPlot {
            name: name.into(),
            x: fit
                .rows
                .iter()
                .map(|r| match fit.mode {
                    ScalingMode::Power => r.radius.ln(),
                    ScalingMode::Log => (1.0 / r.radius).ln().ln(),
                })
                .collect(),
            log_capacity: fit.rows.iter().map(|r| r.capacity.ln()).collect(),
            slope: fit.slope,
            intercept: fit.intercept,
        });
        rows.push(row(
            format!("capacity.scaling.{name}.slope"),
            (fit.slope - fit.expected_slope).abs() <= tol,
            num(fit.slope),
            format!("{} ± {tol}", fit.expected_slope),
        ));
    }
    Ok(rows)
}

fn q2_routes(_cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut rows = Vec::new();
    let mut clouds: Vec<(String, Vec<SpaceTimePoint>, f64)> = Vec::new();
    for (i, r) in [0.2, 0.1].into_iter().enumerate() {
        let net = rectangle_net(&pt(&[0.0, 0.0], -0.1), r, 0.5);
        clouds.push((format!("rect{i}"), net.into_iter().step_by(4).collect(), 0.5 * r));
    }
    let ball = HeatBall::new(pt(&[0.0, 0.0], 0.0), 0.1, 2.0)?;
    let net = heat_ball_net(&ball, 0.4);
    let step = net.len().div_ceil(40).max(1);
    clouds.push(("heat".into(), net.into_iter().step_by(step).collect(), 0.4 * 0.1f64.sqrt()));
    for (name, cloud, eps) in clouds {
        for kernel in [Q2Kernel::Riesz2Alpha, Q2Kernel::Bessel2Alpha] {
            let diag = DiagonalPolicy::CellAverage { eps };
            let lin = linear_capacity_q2(&cloud, 1.0, kernel, diag, &LinearOptions::default())?;
            let fw = capacity_q2_frank_wolfe(&cloud, 1.0, kernel, diag, &FwOptions::default())?;
            let rel = (fw.value / lin.value - 1.0).abs();
            let kname = match kernel {
                Q2Kernel::Riesz2Alpha => "riesz",
                Q2Kernel::Bessel2Alpha => "bessel",
            };
            rows.push(row(
                format!("capacity.q2_routes.{name}.{kname}"),
                lin.converged && fw.converged && rel < Q2_ROUTE_REL && cloud.len() <= 40,
                num(rel),
                format!("< {Q2_ROUTE_REL} ({} points)", cloud.len()),
            ));
        }
    }
    Ok(rows)
}

fn thin_ctx() -> Result<WolffContext> {
    WolffContext::unit(ParabolicParams::new(2, 1.0, 2.0)?, 1)
}

fn wiener_cfg(cfg: &SuiteConfig) -> WienerConfig {
    WienerConfig {
        eps0: cfg.epsilon0,
        seed: cfg.seed,
        ..WienerConfig::default()
    }
}

fn spine_set() -> RegionSet {
    RegionSet::single(Shape::Spine(Spine {
        apex: pt(&[0.0, 0.0], 0.0),
        profile: SpineProfile::Exponential,
        depth: Some(1.0),
    }))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Convergent => "Convergent",
        Verdict::Divergent => "Divergent",
        Verdict::Inconclusive => "Inconclusive",
    }
}

fn dichotomy(cfg: &SuiteConfig, plots: &mut Plots) -> Result<Vec<Check>> {
    let ctx = thin_ctx()?;
    let wc = wiener_cfg(cfg);
    let z0 = pt(&[0.0, 0.0], 0.0);
    let half = RegionSet::single(Shape::TimeHalfSpace { d: 2, t0: 0.0 });
    let depth = cfg.depth as usize;
    let mut rows = Vec::new();
    for (set, e, want) in [("half_space", &half, Verdict::Divergent), ("spine", &spine_set(), Verdict::Convergent)] {
        for form in [WienerForm::Integral, WienerForm::DyadicBalls, WienerForm::Annuli] {
            let rep = wiener_series(e, &z0, &ctx, form, depth, &wc)?;
            plots.series.push((format!("{set}.{}", form.name()), rep.partial_sums.clone()));
            rows.push(row(
                format!("thinness.{set}.{}", form.name()),
                rep.verdict == want,
                verdict_name(rep.verdict).into(),
                verdict_name(want),
            ));
        }
        let rep = wiener_series_heatball(e, &z0, 1.0, depth, &wc)?;
        plots.series.push((format!("{set}.heat_balls"), rep.partial_sums.clone()));
        rows.push(row(
            format!("thinness.{set}.heat_balls"),
            rep.verdict == want,
            verdict_name(rep.verdict).into(),
            verdict_name(want),
        ));
        let dom = heatball_domination(e, &z0, 1.0, depth, &wc)?;
        let bad = dom.iter().filter(|r| r.heat_term > r.ball_term).count();
        rows.push(row(
            format!("thinness.{set}.heat_domination_violations"),
            bad == 0,
            bad.to_string(),
            format!("0 of {}", dom.len()),
        ));
    }
    Ok(rows)
}

fn separation(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let s = build_separating_measure(&spine_set(), &pt(&[0.0, 0.0], 0.0), &thin_ctx()?, SEPARATION_EPS, cfg.depth as usize, &wiener_cfg(cfg))?;
    Ok(vec![
        row(
            "thinness.separation.nonvacuous",
            !s.vacuous && s.level.is_some(),
            s.level.map_or("none".to_string(), |l| l.to_string()),
            "a level with a nonempty net",
        ),
        row(
            "thinness.separation.potential_at_apex",
            s.potential_at_z0 < SEPARATION_EPS,
            num(s.potential_at_z0),
            format!("< {SEPARATION_EPS}"),
        ),
        row(
            "thinness.separation.net_min",
            s.net_min >= SEPARATION_FLOOR,
            num(s.net_min),
            format!("≥ {SEPARATION_FLOOR} ({} points)", s.net_size),
        ),
    ])
}

fn kellogg(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let w = Window {
        x_lo: vec![-0.5, -0.5],
        x_hi: vec![0.5, 0.5],
        t_lo: -1.0,
        t_hi: 0.0,
    };
    let k = kellogg_experiment(&spine_set(), &w, &thin_ctx()?, 8, 0.2, cfg.depth as usize, cfg.seed, &wiener_cfg(cfg))?;
    Ok(vec![row(
        "thinness.kellogg.ratio",
        k.passed,
        num(k.ratio),
        format!(
            "< {KELLOGG_RATIO} ({} samples: {} thin, {} non-thin, {} open)",
            k.samples, k.convergent, k.divergent, k.inconclusive
        ),
    )])
}

fn clarkson(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let mut r = rng(cfg, 14);
    let mut bad = 0usize;
    for _ in 0..100_000 {
        let a = r.gen_range(-10.0..10.0);
        let b = r.gen_range(-10.0..10.0);
        let p = 1.0 + r.gen_range(-4.0f64..2.5).exp();
        if !clarkson_check(a, b, p) {
            bad += 1;
        }
    }
    Ok(vec![row("capacity.clarkson_violations", bad == 0, bad.to_string(), "0 of 100000")])
}

/// Identity and scaling rows at the configured `(d, α, q)`.
fn config_rows(cfg: &SuiteConfig, _plots: &mut Plots) -> Result<Vec<Check>> {
    let p = cfg.params()?;
    let ctx = WolffContext::unit(p, cfg.depth)?;
    let mut r = rng(cfg, 15);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let atoms = r.gen_range(1..10);
        let mu = random_measure(&mut r, p.d, atoms, (0.0, 1.0), (-1.0, 0.0));
        let a = dyadic_wolff_integral(&ctx, &mu);
        let b = dyadic_energy_sum(&ctx, &mu);
        worst = worst.max((a - b).abs() / b);
    }
    let k = RieszKernel::new(p);
    let mut scale: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..p.d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let t = r.gen_range(0.1..1.0);
        let lambda = r.gen_range(0.2..5.0);
        let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let got = k.log_eval(&xs, lambda * lambda * t) + (p.nf() - p.alpha) * f64::ln(lambda);
        scale = scale.max((got - k.log_eval(&x, t)).abs());
    }
    Ok(vec![
        row("config.identity_max_rel", worst <= WOLFF_IDENTITY_REL, num(worst), format!("≤ {WOLFF_IDENTITY_REL:e}")),
        row("config.scaling_max_log_err", scale < KERNEL_SCALING_REL, num(scale), format!("< {KERNEL_SCALING_REL:e}")),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_guards() {
        assert!(SuiteConfig { q: 1.0, ..Default::default() }.params().is_err());
        assert!(SuiteConfig { alpha: 3.0, ..Default::default() }.params().is_err());
        assert!(SuiteConfig { alpha: 2.0, ..Default::default() }.params().is_ok());
    }
}
