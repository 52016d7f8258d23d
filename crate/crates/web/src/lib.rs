//! Browser bindings: a kernel slice, a heat-ball outline and Wolff
//! potentials of a small measure.
//!
//! Each export is a thin wrapper over a plain function that returns
//! `Result<_, String>`, so the logic is testable off the browser.

use parawolff::geometry::heat_ball_profile;
use parawolff::kernels::{BesselKernel, Kernel, RieszKernel};
use parawolff::wolff::{continuous_wolff, dyadic_wolff, regularized_wolff, WolffContext};
use parawolff::{DiscreteMeasure, HeatBall, ParabolicParams, SpaceTimePoint};
use wasm_bindgen::prelude::*;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// `Γ^α` (or `𝒢_α`) at `(r e₁, t)` for `n` times evenly spaced in `(0, t_max]`.
pub fn kernel_slice_impl(d: usize, alpha: f64, r: f64, t_max: f64, n: usize, bessel: bool) -> Result<Vec<f64>, String> {
    if !(t_max > 0.0) || n == 0 {
        return Err("need t_max > 0 and n ≥ 1".into());
    }
    let p = ParabolicParams::new(d, alpha, 2.0).map_err(|e| e.to_string())?;
    let mut x = vec![0.0; d];
    x[0] = r;
    let ts = (1..=n).map(|i| t_max * i as f64 / n as f64);
    Ok(if bessel {
        let k = BesselKernel::new(p);
        ts.map(|t| k.eval(&x, t)).collect()
    } else {
        let k = RieszKernel::new(p);
        ts.map(|t| k.eval(&x, t)).collect()
    })
}

/// Closed outline of `Θ^α_ρ(0)` in the `(x₁, t)` plane, flattened as
/// `[x, t, x, t, …]`.
pub fn heat_ball_outline_impl(d: usize, alpha: f64, rho: f64, n: usize) -> Result<Vec<f64>, String> {
    let ball = HeatBall::new(SpaceTimePoint::origin(d), rho, alpha).map_err(|e| e.to_string())?;
    let ts: Vec<f64> = (0..=n).map(|i| -rho * i as f64 / n.max(1) as f64).collect();
    let mut out = Vec::with_capacity(4 * ts.len());
    for &t in &ts {
        out.extend([heat_ball_profile(&ball, t), t]);
    }
    for &t in ts.iter().rev() {
        out.extend([-heat_ball_profile(&ball, t), t]);
    }
    Ok(out)
}

/// `[W^𝒟μ(z), 𝒲^𝒟μ(z), W^1μ(z)]` for atoms given as rows `x₁ … x_d t w`.
pub fn wolff_at_impl(atoms: &[f64], d: usize, alpha: f64, q: f64, depth: i32, probe: &[f64]) -> Result<Vec<f64>, String> {
    let row = d + 2;
    if d == 0 || !atoms.len().is_multiple_of(row) || probe.len() != d + 1 {
        return Err(format!("atoms need rows of {row} numbers and the probe {} numbers", d + 1));
    }
    let p = ParabolicParams::new(d, alpha, q).map_err(|e| e.to_string())?;
    let mu = DiscreteMeasure::from_atoms(
        d,
        atoms.chunks_exact(row).map(|c| (SpaceTimePoint::new(c[..d].to_vec(), c[d]), c[d + 1])),
    )
    .map_err(|e| e.to_string())?;
    let z = SpaceTimePoint::new(probe[..d].to_vec(), probe[d]);
    let ctx = WolffContext::unit(p, depth).map_err(|e| e.to_string())?;
    Ok(vec![
        dyadic_wolff(&ctx, &mu, &z),
        regularized_wolff(&ctx, &mu, &z),
        continuous_wolff(&mu, &z, &p, 1.0).map_err(|e| e.to_string())?,
    ])
}

#[wasm_bindgen]
pub fn kernel_slice(d: usize, alpha: f64, r: f64, t_max: f64, n: usize, bessel: bool) -> Result<Vec<f64>, JsError> {
    kernel_slice_impl(d, alpha, r, t_max, n, bessel).map_err(js)
}

#[wasm_bindgen]
pub fn heat_ball_outline(d: usize, alpha: f64, rho: f64, n: usize) -> Result<Vec<f64>, JsError> {
    heat_ball_outline_impl(d, alpha, rho, n).map_err(js)
}

#[wasm_bindgen]
pub fn wolff_at(atoms: &[f64], d: usize, alpha: f64, q: f64, depth: i32, probe: &[f64]) -> Result<Vec<f64>, JsError> {
    wolff_at_impl(atoms, d, alpha, q, depth, probe).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_peaks_then_decays() {
        let v = kernel_slice_impl(1, 1.0, 0.5, 2.0, 200, false).unwrap();
        let (imax, _) = v.iter().enumerate().fold((0, 0.0), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
        assert!(imax > 0 && imax < 199);
        let b = kernel_slice_impl(1, 1.0, 0.5, 2.0, 200, true).unwrap();
        assert!(b.iter().zip(&v).all(|(b, r)| *b <= *r));
        assert!(kernel_slice_impl(1, 1.0, 0.5, 0.0, 10, false).is_err());
    }

    #[test]
    fn outline_is_closed_and_symmetric() {
        let o = heat_ball_outline_impl(2, 1.0, 1.0, 50).unwrap();
        assert_eq!(o.len(), 4 * 51);
        let m = o.len() / 2;
        assert_eq!(o[0], 0.0);
        assert_eq!(o[m - 2], -o[m]);
        assert!(o.chunks(2).all(|p| p[1] <= 0.0 && p[1] >= -1.0));
    }

    #[test]
    fn wolff_values_are_positive_near_atoms() {
        let atoms = [0.1, 0.1, -0.2, 1.0, 0.3, 0.2, -0.4, 0.5];
        let v = wolff_at_impl(&atoms, 2, 1.0, 2.0, 5, &[0.15, 0.15, -0.1]).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(wolff_at_impl(&atoms[..5], 2, 1.0, 2.0, 5, &[0.0, 0.0, 0.0]).is_err());
        assert!(wolff_at_impl(&atoms, 2, 1.0, 1.0, 5, &[0.2, 0.2, 0.1]).is_err());
    }
}
