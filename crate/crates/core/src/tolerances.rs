//! Pinned numerical tolerances of the library and the `verify` suite. The
//! acceptance test keeps its own copy so it cannot drift with these.

/// Kernel scaling identity, relative.
pub const KERNEL_SCALING_REL: f64 = 1e-10;
/// Unit mass of the Bessel kernel, relative.
pub const BESSEL_MASS_REL: f64 = 0.02;
/// Doubling the outer radius changes a finite tail by less than this.
pub const TAIL_CONVERGENCE_REL: f64 = 0.05;
/// Heat-ball layer-cake versus direct kernel sum.
pub const LAYER_CAKE_REL: f64 = 1e-2;
/// Grid density for the layer-cake quadrature.
pub const LAYER_CAKE_PER_DECADE: usize = 400;
/// Discrete Wolff identity, relative.
pub const WOLFF_IDENTITY_REL: f64 = 1e-12;
/// Largest admissible `c2 / c1` for an energy-ratio bracket.
pub const BRACKET_MAX_SPREAD: f64 = 100.0;
/// Brackets across seeds may differ by at most this factor.
pub const BRACKET_SEED_FACTOR: f64 = 2.0;
/// Monte Carlo slack in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// Frank–Wolfe stopping gap relative to the energy.
pub const FW_GAP_REL: f64 = 1e-3;
/// Equilibrium (A)/(B) and capacitary normalization.
pub const EQUILIBRIUM_TOL: f64 = 0.05;
/// Support threshold relative to total mass.
pub const WEIGHT_FLOOR_REL: f64 = 1e-10;
/// Capacity slopes.
pub const RECT_SLOPE_TOL: f64 = 0.3;
pub const HEATBALL_SLOPE_TOL: f64 = 0.2;
pub const LOG_SLOPE_TOL: f64 = 0.3;
/// Scaling of capacity under `δ_λ`, relative.
pub const CAPACITY_SCALING_REL: f64 = 0.25;
/// Nonlinear versus linear capacity at `q = 2`.
pub const Q2_ROUTE_REL: f64 = 0.10;
/// Separating measure: potential at the point and floor on the net.
pub const SEPARATION_EPS: f64 = 0.1;
pub const SEPARATION_FLOOR: f64 = 0.9;
/// Kellogg surrogate threshold.
pub const KELLOGG_RATIO: f64 = 0.05;
/// Verdict rule knobs.
pub const VERDICT_DIV_REL: f64 = 1e-3;
pub const VERDICT_DIV_FLOOR: f64 = 1e-9;
pub const VERDICT_CONV_RATIO: f64 = 0.9;
/// Envelope tail must be below this fraction of the partial sum.
pub const VERDICT_CONV_TAIL_REL: f64 = 0.5;
