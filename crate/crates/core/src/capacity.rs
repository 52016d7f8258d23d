//! Capacities of point clouds.
//!
//! The nonlinear dyadic capacity minimizes `ℰν = Σ_R b(R) ν(η_R)^{q'}` over
//! probability measures on the cloud by Frank–Wolfe with away steps; the
//! capacity is `(ℰγ)^{1-q}` and the capacitary measure is `𝒞·γ`. The linear
//! `q = 2` capacity maximizes mass under `Γ^{2α} ∗ μ ≤ 1` on the support and
//! is solved by an active-set iteration.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{HeatBall, ParabolicParams, SpaceTimePoint};
use crate::kernels::{Kernel, RieszKernel};
use crate::lattice::ParabolicLattice;
use crate::measure::DiscreteMeasure;
use crate::special::gamma;
use crate::tolerances::{FW_GAP_REL, WEIGHT_FLOOR_REL};
use crate::wolff::{regularized_energy, regularized_wolff, RegularizedCloud, WolffContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    FrankWolfe,
    LinearQ2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub value: f64,
    /// Probability measure; atoms follow the cloud order, zero weights kept.
    pub extremal_measure: DiscreteMeasure,
    pub capacitary_measure: DiscreteMeasure,
    /// Energy of the extremal measure.
    pub energy: f64,
    pub iterations: usize,
    pub duality_gap: f64,
    pub method: Method,
    pub converged: bool,
    /// Objective after each iteration.
    pub trace: Vec<f64>,
}

impl CapacityEstimate {
    fn empty(d: usize, method: Method) -> Self {
        Self {
            value: 0.0,
            extremal_measure: DiscreteMeasure::new(d),
            capacitary_measure: DiscreteMeasure::new(d),
            energy: f64::INFINITY,
            iterations: 0,
            duality_gap: 0.0,
            method,
            converged: true,
            trace: Vec::new(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.extremal_measure.weights()
    }

    /// Number of atoms above the support floor.
    pub fn support_size(&self) -> usize {
        let floor = WEIGHT_FLOOR_REL * self.extremal_measure.total_mass();
        self.extremal_measure.atoms().iter().filter(|a| a.weight > floor).count()
    }
}

/// A convex, `q'`-homogeneous energy on measures carried by a fixed cloud.
///
/// `potentials` is the gradient divided by `q'`, so `Σ w_i P_i = ℰ`.
pub trait EnergyModel {
    type State: Clone;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn dim(&self) -> usize;
    /// Exponent `q` of the capacity `ℰ^{1-q}`.
    fn q(&self) -> f64;
    fn state(&self, w: &[f64]) -> Self::State;
    fn energy(&self, s: &Self::State) -> f64;
    fn potentials(&self, s: &Self::State) -> Vec<f64>;
    /// `ℰ(a·ν + c·δ_i)` where `s` is the state of `ν`.
    fn line_energy(&self, s: &Self::State, i: usize, a: f64, c: f64) -> f64;
    /// Replace `s` by the state of `a·ν + c·δ_i`.
    fn step(&self, s: &mut Self::State, i: usize, a: f64, c: f64);
    fn measure(&self, w: &[f64]) -> DiscreteMeasure;
}

/// Bump masses kept as `scale · mt` so that the global contraction of a
/// Frank–Wolfe step is O(1).
#[derive(Debug, Clone)]
pub struct CloudState {
    mt: Vec<f64>,
    scale: f64,
    energy: f64,
}

impl CloudState {
    fn mass(&self, id: usize) -> f64 {
        self.scale * self.mt[id]
    }
}

impl EnergyModel for RegularizedCloud {
    type State = CloudState;

    fn len(&self) -> usize {
        self.points.len()
    }

    fn dim(&self) -> usize {
        self.ctx.params.d
    }

    fn q(&self) -> f64 {
        self.ctx.params.q
    }

    fn state(&self, w: &[f64]) -> CloudState {
        let mt = self.masses(w);
        let energy = RegularizedCloud::energy(self, &mt);
        CloudState { mt, scale: 1.0, energy }
    }

    fn energy(&self, s: &CloudState) -> f64 {
        s.energy
    }

    fn potentials(&self, s: &CloudState) -> Vec<f64> {
        let e = self.ctx.params.q_conj - 1.0;
        let g: Vec<f64> = (0..s.mt.len())
            .map(|id| {
                let m = s.mass(id);
                if m > 0.0 {
                    self.b[id] * m.powf(e)
                } else {
                    0.0
                }
            })
            .collect();
        self.incidence
            .iter()
            .map(|row| row.iter().map(|&(id, eta)| g[id] * eta).sum())
            .collect()
    }

    fn line_energy(&self, s: &CloudState, i: usize, a: f64, c: f64) -> f64 {
        let qc = self.ctx.params.q_conj;
        let pw = |v: f64| if v > 0.0 { v.powf(qc) } else { 0.0 };
        let mut inside = 0.0;
        let mut moved = 0.0;
        for &(id, eta) in &self.incidence[i] {
            let m = s.mass(id);
            inside += self.b[id] * pw(m);
            moved += self.b[id] * pw(a * m + c * eta);
        }
        let rest = (s.energy - inside).max(0.0);
        pw(a) * rest + moved
    }

    fn step(&self, s: &mut CloudState, i: usize, a: f64, c: f64) {
        let energy = self.line_energy(s, i, a, c);
        s.scale *= a;
        if !(s.scale > 1e-150 && s.scale < 1e150) {
            let k = s.scale;
            s.mt.iter_mut().for_each(|v| *v *= k);
            s.scale = 1.0;
        }
        let f = c / s.scale;
        for &(id, eta) in &self.incidence[i] {
            s.mt[id] += f * eta;
        }
        s.energy = energy;
    }

    fn measure(&self, w: &[f64]) -> DiscreteMeasure {
        RegularizedCloud::measure(self, w)
    }
}

/// Which parabolic kernel of order `2α` the `q = 2` routes use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Q2Kernel {
    Riesz2Alpha,
    Bessel2Alpha,
}

/// Treatment of the self-interaction `K(z_i, z_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DiagonalPolicy {
    /// Self-interaction set to zero; point kernel elsewhere.
    Exclude,
    /// Each point carries a uniformly charged cell of spatial side `eps`
    /// and time depth `eps²` centred at it. Pairs closer than
    /// `CELL_NEAR · eps` (parabolic distance) interact through the exact
    /// cell-to-cell energy, farther pairs through the point kernel.
    CellAverage { eps: f64 },
}

/// Near-field radius in cells for [`DiagonalPolicy::CellAverage`].
pub const CELL_NEAR: f64 = 4.0;

/// `(1/ε²)∫∫ g_τ(δ + u - v) du dv` over `u, v ∈ [-ε/2, ε/2]`: the Gaussian
/// of variance `2τ` against the triangle of half-width `ε`, via the second
/// difference of `F(y) = yΦ(y/σ) + σ²φ_σ(y)`.
fn box_gauss(delta: f64, tau: f64, eps: f64) -> f64 {
    if tau <= 0.0 {
        return (eps - delta.abs()).max(0.0) / (eps * eps);
    }
    let sigma = (2.0 * tau).sqrt();
    let f = |y: f64| {
        let z = y / sigma;
        y * 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
            + sigma * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    ((f(delta + eps) - 2.0 * f(delta) + f(delta - eps)) / (eps * eps)).max(0.0)
}

/// Energy between two uniformly charged cells (side `eps`, depth `eps²`)
/// whose centres differ by `(dx, dt)`, for the symmetrized kernel
/// `½ Γ^{2α}(Δx, |Δt|)`.
pub fn cell_interaction(dx: &[f64], dt: f64, alpha: f64, eps: f64, kernel: Q2Kernel) -> f64 {
    // time lag τ = dt + s with s triangular on [-ε², ε²]; on each piece of
    // constant sign substitute v = |τ|^{α/2}, so τ^{α-1}dτ = (2/α) v dv
    // and the √τ edge behaviour of the cell profile becomes smooth
    let e2 = eps * eps;
    let mut cuts = vec![-e2, e2];
    for c in [0.0, -dt] {
        if c > -e2 && c < e2 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |tau: f64| -> f64 {
        let mut v: f64 = dx.iter().map(|&x| box_gauss(x, tau, eps)).product();
        if kernel == Q2Kernel::Bessel2Alpha {
            v *= (-tau).exp();
        }
        v
    };
    let steps = 64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let (t0, t1) = (dt + s0, dt + s1);
        let sign = if t0 + t1 >= 0.0 { 1.0 } else { -1.0 };
        let half = 0.5 * alpha;
        let (u0, u1) = ((sign * t0).max(0.0).powf(half), (sign * t1).max(0.0).powf(half));
        let h = (u1 - u0) / steps as f64;
        let mut acc = 0.0;
        for k in 0..=steps {
            let u = u0 + k as f64 * h;
            let tau = u.max(0.0).powf(1.0 / half);
            let s = sign * tau - dt;
            let tri = (1.0 - s.abs() / e2).max(0.0) / e2;
            let wgt = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += wgt * tri * g(tau) * 2.0 * u;
        }
        total += (acc * h / 3.0).abs();
    }
    0.5 * total / (alpha * gamma(alpha))
}

fn q2_check(d: usize, alpha: f64) -> Result<ParabolicParams> {
    let n = d as f64 + 2.0;
    if !(alpha > 0.0 && 2.0 * alpha < n) {
        return Err(Error::Argument(format!("the q = 2 routes need 0 < α < n/2, got α = {alpha}")));
    }
    ParabolicParams::new(d, 2.0 * alpha, 2.0)
}

/// Symmetrized `(K(z_i - z_j) + K(z_j - z_i))/2` with the chosen diagonal.
pub fn q2_matrix(
    cloud: &[SpaceTimePoint],
    alpha: f64,
    kernel: Q2Kernel,
    diagonal: DiagonalPolicy,
) -> Result<DMatrix<f64>> {
    let n = cloud.len();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let d = cloud[0].dim();
    if let Some(p) = cloud.iter().find(|p| p.dim() != d) {
        return Err(Error::Dimension { expected: d, got: p.dim() });
    }
    let riesz = RieszKernel::new(q2_check(d, alpha)?);
    let k = |z: &SpaceTimePoint, w: &SpaceTimePoint| -> f64 {
        let v = riesz.eval_diff(z, w);
        match kernel {
            Q2Kernel::Riesz2Alpha => v,
            Q2Kernel::Bessel2Alpha => v * (-(z.t - w.t)).exp(),
        }
    };
    let eps = match diagonal {
        DiagonalPolicy::Exclude => None,
        DiagonalPolicy::CellAverage { eps } if eps > 0.0 => Some(eps),
        DiagonalPolicy::CellAverage { .. } => return Err(Error::Argument("cell size must be positive".into())),
    };
    let mut m = DMatrix::zeros(n, n);
    if let Some(eps) = eps {
        let self_energy = cell_interaction(&vec![0.0; d], 0.0, alpha, eps, kernel);
        for i in 0..n {
            m[(i, i)] = self_energy;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (&cloud[i], &cloud[j]);
            let near = eps.filter(|&e| {
                let dist = crate::geometry::sq_dist(&a.x, &b.x).sqrt().max((a.t - b.t).abs().sqrt());
                dist < CELL_NEAR * e
            });
            let v = match near {
                Some(e) => {
                    let dx: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect();
                    cell_interaction(&dx, a.t - b.t, alpha, e, kernel)
                }
                None => 0.5 * (k(a, b) + k(b, a)),
            };
            if !v.is_finite() {
                return Err(Error::Degenerate(format!("cloud points {j} and {i} coincide")));
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Quadratic energy `νᵀKν` with the symmetrized `Γ^{2α}` matrix: the
/// nonlinear route at `q = 2`.
#[derive(Debug, Clone)]
pub struct KernelQ2 {
    pub points: Vec<SpaceTimePoint>,
    pub matrix: DMatrix<f64>,
    d: usize,
}

#[derive(Debug, Clone)]
pub struct KernelState {
    p: Vec<f64>,
    energy: f64,
}

impl KernelQ2 {
    pub fn new(cloud: &[SpaceTimePoint], alpha: f64, kernel: Q2Kernel, diagonal: DiagonalPolicy) -> Result<Self> {
        let matrix = q2_matrix(cloud, alpha, kernel, diagonal)?;
        Ok(Self {
            points: cloud.to_vec(),
            matrix,
            d: cloud.first().map_or(0, |p| p.dim()),
        })
    }
}

impl EnergyModel for KernelQ2 {
    type State = KernelState;

    fn len(&self) -> usize {
        self.points.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn q(&self) -> f64 {
        2.0
    }

    fn state(&self, w: &[f64]) -> KernelState {
        let wv = DVector::from_column_slice(w);
        let p = &self.matrix * &wv;
        let energy = wv.dot(&p);
        KernelState {
            p: p.as_slice().to_vec(),
            energy,
        }
    }

    fn energy(&self, s: &KernelState) -> f64 {
        s.energy
    }

    fn potentials(&self, s: &KernelState) -> Vec<f64> {
        s.p.clone()
    }

    fn line_energy(&self, s: &KernelState, i: usize, a: f64, c: f64) -> f64 {
        a * a * s.energy + 2.0 * a * c * s.p[i] + c * c * self.matrix[(i, i)]
    }

    fn step(&self, s: &mut KernelState, i: usize, a: f64, c: f64) {
        s.energy = self.line_energy(s, i, a, c);
        let col = self.matrix.column(i);
        for (pj, kj) in s.p.iter_mut().zip(col.iter()) {
            *pj = a * *pj + c * kj;
        }
    }

    fn measure(&self, w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms(self.d, self.points.iter().cloned().zip(w.iter().copied()))
            .expect("cloud weights are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    /// Stop when both the Frank–Wolfe gap and the away gap are below
    /// `tol · ℰ`.
    pub tol: f64,
    pub max_iter: usize,
    /// Exact line search with away steps; otherwise plain steps `2/(k+2)`.
    pub line_search: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self {
            tol: FW_GAP_REL,
            max_iter: 20_000,
            line_search: true,
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-14 * hi {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    // the end points are candidates too: drop steps and full steps
    [0.0, mid, hi]
        .into_iter()
        .map(|x| (f(x), x))
        .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
        .1
}

fn argmin_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Frank–Wolfe with away steps over the probability simplex of the model's
/// cloud, started from the uniform measure.
pub fn minimize_energy<M: EnergyModel>(model: &M, opts: &FwOptions, method: Method) -> Result<CapacityEstimate> {
    let n = model.len();
    if n == 0 {
        return Ok(CapacityEstimate::empty(model.dim(), method));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let q = model.q();
    let qc = q / (q - 1.0);
    let mut w = vec![1.0 / n as f64; n];
    let mut s = model.state(&w);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..=opts.max_iter {
        if k > 0 && k % 64 == 0 {
            // drop accumulated rounding in the cached state
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            s = model.state(&w);
        }
        let e = model.energy(&s);
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::Degenerate(format!("energy {e} on the cloud")));
        }
        let p = model.potentials(&s);
        let fw = argmin_lowest(&p);
        gap = qc * (e - p[fw]).max(0.0);
        let floor = WEIGHT_FLOOR_REL;
        let mut away = None;
        for i in 0..n {
            if w[i] > floor && away.is_none_or(|a: usize| p[i] > p[a]) {
                away = Some(i);
            }
        }
        let away = away.expect("a probability vector has an atom above the floor");
        let away_gap = qc * (p[away] - e).max(0.0);
        iterations = k;
        if gap <= opts.tol * e && (!opts.line_search || away_gap <= opts.tol * e) {
            converged = true;
            break;
        }
        if k == opts.max_iter {
            break;
        }
        let use_away = opts.line_search && away_gap > gap && w[away] < 1.0;
        let (i, a_of, c_of, hi): (usize, fn(f64) -> f64, fn(f64) -> f64, f64) = if use_away {
            (away, |g| 1.0 + g, |g| -g, w[away] / (1.0 - w[away]))
        } else {
            (fw, |g| 1.0 - g, |g| g, 1.0)
        };
        let step = if opts.line_search {
            golden_min(|g| model.line_energy(&s, i, a_of(g), c_of(g)), hi)
        } else {
            2.0 / (k as f64 + 2.0)
        };
        if step == 0.0 {
            // no descent along the chosen direction at working precision
            break;
        }
        let (a, c) = (a_of(step), c_of(step));
        model.step(&mut s, i, a, c);
        w.iter_mut().for_each(|v| *v *= a);
        w[i] += c;
        if use_away && step == hi {
            w[i] = 0.0;
        }
        w.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v = 0.0
            }
        });
        trace.push(model.energy(&s));
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let s = model.state(&w);
    let energy = model.energy(&s);
    let value = energy.powf(1.0 - q);
    let extremal_measure = model.measure(&w);
    let capacitary_measure = extremal_measure.scaled(value)?;
    Ok(CapacityEstimate {
        value,
        extremal_measure,
        capacitary_measure,
        energy,
        iterations,
        duality_gap: gap,
        method,
        converged,
        trace,
    })
}

/// Dyadic capacity of a cloud: minimize the regularized energy.
pub fn capacity_frank_wolfe(cloud: &[SpaceTimePoint], ctx: &WolffContext, opts: &FwOptions) -> Result<CapacityEstimate> {
    ctx.params.require_nonlinear()?;
    if let Some(p) = cloud.iter().find(|p| p.dim() != ctx.params.d) {
        return Err(Error::Dimension {
            expected: ctx.params.d,
            got: p.dim(),
        });
    }
    let model = RegularizedCloud::new(ctx, cloud);
    minimize_energy(&model, opts, Method::FrankWolfe)
}

/// Nonlinear route at `q = 2`: Frank–Wolfe on `νᵀKν`.
pub fn capacity_q2_frank_wolfe(
    cloud: &[SpaceTimePoint],
    alpha: f64,
    kernel: Q2Kernel,
    diagonal: DiagonalPolicy,
    opts: &FwOptions,
) -> Result<CapacityEstimate> {
    let model = KernelQ2::new(cloud, alpha, kernel, diagonal)?;
    minimize_energy(&model, opts, Method::FrankWolfe)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `𝒲γ ≥ ℰγ(1 - tol)` on the cloud.
    A,
    /// `𝒲γ ≤ ℰγ(1 + tol)` on the support.
    B,
    /// `𝒲μ^K ≥ 1 - tol` on the cloud.
    CapacitaryLower,
    /// `𝒲μ^K ≤ 1 + tol` on the support.
    CapacitaryUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub condition: Condition,
    /// Potential over its target (`ℰγ` or 1).
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub energy: f64,
    pub support_size: usize,
    /// Smallest `𝒲γ / ℰγ` over the cloud.
    pub min_ratio: f64,
    /// Largest `𝒲γ / ℰγ` over the support.
    pub max_support_ratio: f64,
    /// Range of `𝒲μ^K` over the support.
    pub capacitary_range: (f64, f64),
    pub capacitary_min_cloud: f64,
    pub violations: Vec<Violation>,
    pub worst: Option<Violation>,
}

impl EquilibriumReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn holds(&self, c: Condition) -> bool {
        !self.violations.iter().any(|v| v.condition == c)
    }
}

/// Check the equilibrium conditions of `weights` (a probability vector on
/// the model's cloud). The capacitary potentials are recomputed from
/// `𝒞·γ`, not rescaled.
pub fn equilibrium_check_with<M: EnergyModel>(model: &M, weights: &[f64], tol: f64) -> Result<EquilibriumReport> {
    if weights.len() != model.len() {
        return Err(Error::Dimension {
            expected: model.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if model.is_empty() || !(total > 0.0) {
        return Ok(EquilibriumReport {
            energy: 0.0,
            support_size: 0,
            min_ratio: f64::NAN,
            max_support_ratio: f64::NAN,
            capacitary_range: (f64::NAN, f64::NAN),
            capacitary_min_cloud: f64::NAN,
            violations: Vec::new(),
            worst: None,
        });
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let s = model.state(&w);
    let e = model.energy(&s);
    let p = model.potentials(&s);
    let cap = e.powf(1.0 - model.q());
    let wk: Vec<f64> = w.iter().map(|v| v * cap).collect();
    let pk = model.potentials(&model.state(&wk));
    let floor = WEIGHT_FLOOR_REL;
    let mut violations = Vec::new();
    let mut min_ratio = f64::INFINITY;
    let mut max_support_ratio: f64 = 0.0;
    let mut cap_lo = f64::INFINITY;
    let mut cap_hi: f64 = 0.0;
    let mut cap_min_cloud = f64::INFINITY;
    let mut support_size = 0;
    for i in 0..w.len() {
        let r = p[i] / e;
        min_ratio = min_ratio.min(r);
        cap_min_cloud = cap_min_cloud.min(pk[i]);
        if r < 1.0 - tol {
            violations.push(Violation { index: i, condition: Condition::A, ratio: r });
        }
        if pk[i] < 1.0 - tol {
            violations.push(Violation {
                index: i,
                condition: Condition::CapacitaryLower,
                ratio: pk[i],
            });
        }
        if w[i] > floor {
            support_size += 1;
            max_support_ratio = max_support_ratio.max(r);
            cap_lo = cap_lo.min(pk[i]);
            cap_hi = cap_hi.max(pk[i]);
            if r > 1.0 + tol {
                violations.push(Violation { index: i, condition: Condition::B, ratio: r });
            }
            if pk[i] > 1.0 + tol {
                violations.push(Violation {
                    index: i,
                    condition: Condition::CapacitaryUpper,
                    ratio: pk[i],
                });
            }
        }
    }
    let worst = violations
        .iter()
        .copied()
        .fold(None, |best: Option<Violation>, v| {
            let dev = (v.ratio - 1.0).abs();
            match best {
                Some(b) if (b.ratio - 1.0).abs() >= dev => Some(b),
                _ => Some(v),
            }
        });
    Ok(EquilibriumReport {
        energy: e,
        support_size,
        min_ratio,
        max_support_ratio,
        capacitary_range: (cap_lo, cap_hi),
        capacitary_min_cloud: cap_min_cloud,
        violations,
        worst,
    })
}

/// Equilibrium conditions for a dyadic estimate on `cloud`.
pub fn equilibrium_check(
    est: &CapacityEstimate,
    cloud: &[SpaceTimePoint],
    ctx: &WolffContext,
    tol: f64,
) -> Result<EquilibriumReport> {
    let model = RegularizedCloud::new(ctx, cloud);
    equilibrium_check_with(&model, &est.weights(), tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    /// Feasibility slack on `Kμ`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// `K_SS s = 1` on the index set `idx`.
fn solve_on(k: &DMatrix<f64>, idx: &[usize]) -> Result<DVector<f64>> {
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| k[(idx[a], idx[b])]);
    let scale = sub.amax();
    let sol = sub.lu().solve(&DVector::from_element(idx.len(), 1.0));
    match sol {
        // a near-singular system shows up as a huge solution
        Some(s) if s.iter().all(|v| v.is_finite()) && scale > 0.0 && s.amax() * scale <= 1e12 => Ok(s),
        _ => Err(Error::Degenerate("unbounded mass: interaction matrix is singular on the active set".into())),
    }
}

/// Largest shortfall `1 - (Kμ)_i` off the active set and the complementarity
/// residual.
fn kkt(k: &DMatrix<f64>, mu: &[f64], active: &[bool], tol: f64) -> (Option<usize>, f64) {
    let pot = k * DVector::from_column_slice(mu);
    let mut worst: Option<(usize, f64)> = None;
    let mut residual: f64 = 0.0;
    for i in 0..mu.len() {
        if active[i] {
            residual = residual.max((pot[i] - 1.0).abs());
        } else {
            let short = 1.0 - pot[i];
            residual = residual.max(short.max(0.0));
            if short > tol && worst.is_none_or(|(_, s)| short > s) {
                worst = Some((i, short));
            }
        }
    }
    (worst.map(|w| w.0), residual)
}

type Solution = (Vec<f64>, usize, f64, bool);

/// Lawson–Hanson active set for `min ½μᵀKμ - Σμ`, `μ ≥ 0`; the objective
/// decreases strictly, so it terminates for positive definite `K`.
fn lawson_hanson(k: &DMatrix<f64>, opts: &LinearOptions) -> Result<Solution> {
    let n = k.nrows();
    let mut active = vec![false; n];
    let mut mu = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let (worst, residual) = kkt(k, &mu, &active, opts.tol);
        let Some(j) = worst else {
            return Ok((mu, iterations, residual, true));
        };
        if iterations >= opts.max_iter {
            return Ok((mu, iterations, residual, false));
        }
        active[j] = true;
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
            let sol = solve_on(k, &idx)?;
            if sol.iter().all(|&v| v > 0.0) {
                mu.iter_mut().for_each(|v| *v = 0.0);
                for (&i, &v) in idx.iter().zip(sol.iter()) {
                    mu[i] = v;
                }
                break;
            }
            // move toward the unconstrained solution until a weight hits zero
            let mut step = 1.0f64;
            for (&i, &v) in idx.iter().zip(sol.iter()) {
                if v <= 0.0 {
                    step = step.min(mu[i] / (mu[i] - v));
                }
            }
            for (&i, &v) in idx.iter().zip(sol.iter()) {
                mu[i] += step * (v - mu[i]);
                if mu[i] <= 1e-14 * v.abs().max(1e-300) || mu[i] <= 0.0 {
                    mu[i] = 0.0;
                    active[i] = false;
                }
            }
            if iterations >= opts.max_iter {
                let (_, residual) = kkt(k, &mu, &active, opts.tol);
                return Ok((mu, iterations, residual, false));
            }
        }
    }
}

/// Without self-interaction the program is not convex; start from the full
/// cloud, drop negative weights, re-admit points whose potential falls
/// below 1.
fn full_support_active_set(k: &DMatrix<f64>, opts: &LinearOptions) -> Result<Solution> {
    let n = k.nrows();
    let mut active = vec![true; n];
    let mut mu = vec![0.0; n];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        if idx.is_empty() {
            return Err(Error::Degenerate("every weight left the active set".into()));
        }
        let sol = solve_on(k, &idx)?;
        mu.iter_mut().for_each(|v| *v = 0.0);
        let mut dropped = false;
        for (&i, &v) in idx.iter().zip(sol.iter()) {
            if v < 0.0 {
                active[i] = false;
                dropped = true;
            } else {
                mu[i] = v;
            }
        }
        if dropped {
            continue;
        }
        match kkt(k, &mu, &active, opts.tol) {
            (Some(i), _) => active[i] = true,
            (None, residual) => return Ok((mu, iterations, residual, true)),
        }
    }
    let (_, residual) = kkt(k, &mu, &active, opts.tol);
    Ok((mu, iterations, residual, false))
}

/// Linear capacity: maximize `μ(cloud)` subject to `(Kμ)_i ≤ 1` where
/// `μ_i > 0`, with the symmetrized `Γ^{2α}` matrix.
///
/// With a positive diagonal this is the complementarity problem
/// `μ ≥ 0, Kμ ≥ 1, μ·(Kμ - 1) = 0`, solved by Lawson–Hanson; with the
/// diagonal excluded a full-support active set is used.
pub fn linear_capacity_q2(
    cloud: &[SpaceTimePoint],
    alpha: f64,
    kernel: Q2Kernel,
    diagonal: DiagonalPolicy,
    opts: &LinearOptions,
) -> Result<CapacityEstimate> {
    if cloud.is_empty() {
        return Ok(CapacityEstimate::empty(0, Method::LinearQ2));
    }
    let d = cloud[0].dim();
    let k = q2_matrix(cloud, alpha, kernel, diagonal)?;
    let (mu, iterations, residual, converged) = match diagonal {
        DiagonalPolicy::Exclude => full_support_active_set(&k, opts)?,
        DiagonalPolicy::CellAverage { .. } => lawson_hanson(&k, opts)?,
    };
    let value: f64 = mu.iter().sum();
    if !(value > 0.0) {
        return Err(Error::Degenerate("no admissible mass".into()));
    }
    let mv = DVector::from_column_slice(&mu);
    let self_energy = mv.dot(&(&k * &mv));
    let capacitary_measure = DiscreteMeasure::from_atoms(d, cloud.iter().cloned().zip(mu.iter().copied()))?;
    let extremal_measure = capacitary_measure.scaled(1.0 / value)?;
    Ok(CapacityEstimate {
        value,
        extremal_measure,
        capacitary_measure,
        energy: self_energy / (value * value),
        iterations,
        duality_gap: residual,
        method: Method::LinearQ2,
        converged,
        trace: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingShape {
    HeatBall,
    FullRectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingMode {
    /// Fit `log 𝒞` against `log r`.
    Power,
    /// Fit `log 𝒞` against `log log(1/r)`.
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub center: SpaceTimePoint,
    /// Net spacing relative to the spatial size of the set.
    pub net_ratio: f64,
    /// Lattice generations kept below the net spacing.
    pub extra_depth: i32,
    pub fw: FwOptions,
}

impl ScalingConfig {
    pub fn new(center: SpaceTimePoint, shape: ScalingShape) -> Self {
        Self {
            center,
            net_ratio: match shape {
                ScalingShape::FullRectangle => 0.5,
                ScalingShape::HeatBall => 0.4,
            },
            extra_depth: 2,
            fw: FwOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub radius: f64,
    pub capacity: f64,
    pub points: usize,
    pub depth: i32,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub shape: ScalingShape,
    pub mode: ScalingMode,
    pub slope: f64,
    pub intercept: f64,
    pub expected_slope: f64,
    pub rows: Vec<ScalingRow>,
}

/// Same lattice and truncation with the finest generation set
/// `extra_depth` levels below the net spacing.
///
/// Point masses have zero capacity when `αq < n`, so the energy of a net
/// grows without bound as generations are added under its spacing; tying
/// the depth to the spacing keeps the nets of different sizes comparable.
pub fn refined_context(ctx: &WolffContext, spacing: f64, extra_depth: i32) -> Result<WolffContext> {
    if !(spacing > 0.0) {
        return Err(Error::Argument("net spacing must be positive".into()));
    }
    let base = ctx.lattice.base_side;
    let lo = match ctx.truncation {
        crate::wolff::Truncation::Homogeneous => ctx.lattice.k_min,
        crate::wolff::Truncation::Inhomogeneous => ctx.lattice.k_min.max(1),
    };
    let k_max = ((base / spacing).log2().ceil() as i32 + extra_depth).max(lo);
    let lattice = ParabolicLattice::new(base, ctx.lattice.anchor.clone(), ctx.lattice.k_min, k_max)?;
    WolffContext::new(ctx.params, lattice, ctx.truncation, ctx.delta)
}

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Cell-centre grid of `box`, spatial step `h`, time step `h²`.
fn grid(x_lo: &[f64], x_hi: &[f64], t_lo: f64, t_hi: f64, h: f64, keep: impl Fn(&SpaceTimePoint) -> bool) -> Vec<SpaceTimePoint> {
    let d = x_lo.len();
    let counts: Vec<usize> = (0..d).map(|i| (((x_hi[i] - x_lo[i]) / h).round() as usize).max(1)).collect();
    let nt = (((t_hi - t_lo) / (h * h)).round() as usize).max(1);
    let sx: Vec<f64> = (0..d).map(|i| (x_hi[i] - x_lo[i]) / counts[i] as f64).collect();
    let st = (t_hi - t_lo) / nt as f64;
    let total: usize = counts.iter().product::<usize>() * nt;
    let mut out = Vec::new();
    for cell in 0..total {
        let mut c = cell;
        let it = c % nt;
        c /= nt;
        let mut x = vec![0.0; d];
        for i in 0..d {
            x[i] = x_lo[i] + (c % counts[i]) as f64 * sx[i] + 0.5 * sx[i];
            c /= counts[i];
        }
        let p = SpaceTimePoint::new(x, t_lo + (it as f64 + 0.5) * st);
        if keep(&p) {
            out.push(p);
        }
    }
    out
}

/// Grid net of the full rectangle `|x - x₀|_∞ < r`, `|t - t₀| < r²`.
pub fn rectangle_net(center: &SpaceTimePoint, r: f64, net_ratio: f64) -> Vec<SpaceTimePoint> {
    let lo: Vec<f64> = center.x.iter().map(|c| c - r).collect();
    let hi: Vec<f64> = center.x.iter().map(|c| c + r).collect();
    grid(&lo, &hi, center.t - r * r, center.t + r * r, net_ratio * r, |_| true)
}

/// Grid net of the heat ball `Θ^α_ρ(z₀)`.
pub fn heat_ball_net(ball: &HeatBall, net_ratio: f64) -> Vec<SpaceTimePoint> {
    let r = ball.max_radius();
    let lo: Vec<f64> = ball.center.x.iter().map(|c| c - r).collect();
    let hi: Vec<f64> = ball.center.x.iter().map(|c| c + r).collect();
    let h = net_ratio * ball.rho.sqrt();
    grid(&lo, &hi, ball.center.t - ball.rho, ball.center.t, h, |p| {
        crate::geometry::heat_ball_contains(ball, p)
    })
}

/// Capacity of self-similar nets of heat balls `Θ^α_r` or full rectangles
/// of radius `r`, on lattices refined with the net, and the fitted exponent.
///
/// Power mode (`αq < n`) expects `n - αq` for rectangles and `(n - αq)/2`
/// for heat balls (radius measured in time units); log mode (`αq = n`)
/// expects `1 - q` against `log log(1/r)`.
pub fn ball_capacity_scaling(
    shape: ScalingShape,
    radii: &[f64],
    ctx: &WolffContext,
    cfg: &ScalingConfig,
) -> Result<ScalingFit> {
    if radii.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("radii must be positive".into()));
    }
    let p = ctx.params;
    p.require_nonlinear()?;
    let log_mode = (p.alpha * p.q - p.nf()).abs() < 1e-12;
    if log_mode && radii.iter().any(|&r| r >= 1.0) {
        return Err(Error::Argument("log mode needs radii below 1".into()));
    }
    let mut rows = Vec::new();
    for &r in radii {
        let (cloud, spacing) = match shape {
            ScalingShape::FullRectangle => (rectangle_net(&cfg.center, r, cfg.net_ratio), cfg.net_ratio * r),
            ScalingShape::HeatBall => {
                let ball = HeatBall::new(cfg.center.clone(), r, p.alpha)?;
                (heat_ball_net(&ball, cfg.net_ratio), cfg.net_ratio * r.sqrt())
            }
        };
        let local = refined_context(ctx, spacing, cfg.extra_depth)?;
        let k_max = local.lattice.k_max;
        let est = capacity_frank_wolfe(&cloud, &local, &cfg.fw)?;
        rows.push(ScalingRow {
            radius: r,
            capacity: est.value,
            points: cloud.len(),
            depth: k_max,
            converged: est.converged,
        });
    }
    let y: Vec<f64> = rows.iter().map(|r| r.capacity.ln()).collect();
    let (mode, x, expected) = if log_mode {
        (
            ScalingMode::Log,
            rows.iter().map(|r| (1.0 / r.radius).ln().ln()).collect::<Vec<_>>(),
            1.0 - p.q,
        )
    } else {
        let e = match shape {
            ScalingShape::FullRectangle => p.codim(),
            ScalingShape::HeatBall => 0.5 * p.codim(),
        };
        (ScalingMode::Power, rows.iter().map(|r| r.radius.ln()).collect(), e)
    };
    let (slope, intercept) = fit_line(&x, &y);
    Ok(ScalingFit {
        shape,
        mode,
        slope,
        intercept,
        expected_slope: expected,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetReport {
    pub vartheta: f64,
    pub level_set_size: usize,
    pub capacity: f64,
    /// `ℰμ` (regularized).
    pub energy: f64,
    /// `ϑ^{-q} ℰμ`.
    pub energy_bound: f64,
    /// `ϑ^{1-q} μ(ℝ^{d+1})`.
    pub mass_bound_unit: f64,
    /// `𝒞 / (ϑ^{1-q} μ(ℝ^{d+1}))`.
    pub empirical_c: f64,
    pub energy_bound_holds: bool,
    /// `𝒞 / (ϑ^{-q} ℰμ)`.
    pub tightness: f64,
}

/// Capacity of `{𝒲^𝒟μ > ϑ}` sampled on `probe_cloud`, against the energy and
/// mass bounds.
pub fn level_set_capacity_bound(
    mu: &DiscreteMeasure,
    vartheta: f64,
    ctx: &WolffContext,
    probe_cloud: &[SpaceTimePoint],
    opts: &FwOptions,
) -> Result<LevelSetReport> {
    if !(vartheta > 0.0) {
        return Err(Error::Argument(format!("threshold must be positive, got {vartheta}")));
    }
    let q = ctx.params.q;
    let level: Vec<SpaceTimePoint> = probe_cloud
        .iter()
        .filter(|z| regularized_wolff(ctx, mu, z) > vartheta)
        .cloned()
        .collect();
    let est = capacity_frank_wolfe(&level, ctx, opts)?;
    let energy = regularized_energy(ctx, mu);
    let energy_bound = vartheta.powf(-q) * energy;
    let mass_bound_unit = vartheta.powf(1.0 - q) * mu.total_mass();
    Ok(LevelSetReport {
        vartheta,
        level_set_size: level.len(),
        capacity: est.value,
        energy,
        energy_bound,
        mass_bound_unit,
        empirical_c: est.value / mass_bound_unit,
        energy_bound_holds: est.value <= energy_bound * (1.0 + 1e-9),
        tightness: est.value / energy_bound,
    })
}

/// Clarkson-type inequality for `1 < p < ∞`.
pub fn clarkson_check(a: f64, b: f64, p: f64) -> bool {
    assert!(p > 1.0 && p.is_finite(), "Clarkson exponent must lie in (1, inf)");
    let lhs = ((a - b) / 2.0).abs().powf(p) + ((a + b) / 2.0).abs().powf(p);
    let s = a.abs().powf(p) + b.abs().powf(p);
    let rhs = if p <= 2.0 { 2f64.powf(1.0 - p) * s } else { 0.5 * s };
    lhs <= rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE
}
