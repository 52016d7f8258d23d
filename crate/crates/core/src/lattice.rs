//! Time-backward parabolic dyadic lattice.
//!
//! Generation `k` has side `ℓ = 2^{-k} ℓ₀`. With anchor `(a, t_a)` the
//! rectangle of spatial index `i` and time index `j` is
//! `Π [a_m + i_m ℓ, a_m + (i_m + 1) ℓ) × (t_a - (j + 1) ℓ², t_a - j ℓ²]`.
//! Children halve space and quarter time, so they are again parabolic.
//!
//! Membership is decided by recomputing the indices, never by comparing
//! against stored bounds, so tiling and nesting hold exactly in floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ParabolicRectangle, RectKind, SpaceTimePoint};
use crate::measure::{DiscreteMeasure, Window};

/// Index part of a dyadic rectangle; cheap to hash.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RectKey {
    pub k: i32,
    pub i: Vec<i64>,
    pub j: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicRectangle {
    pub generation: i32,
    pub spatial_index: Vec<i64>,
    pub time_index: i64,
    pub base_side: f64,
    pub anchor: SpaceTimePoint,
}

fn side_of(base: f64, k: i32) -> f64 {
    base * 2f64.powi(-k)
}

/// Quintic smoothstep, 0 at 0 and 1 at 1 with two vanishing derivatives.
fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    }
}

/// 1 for `u ≤ 1`, 0 for `u ≥ outer`.
fn ramp(u: f64, outer: f64) -> f64 {
    smoothstep((outer - u) / (outer - 1.0))
}

impl DyadicRectangle {
    pub fn key(&self) -> RectKey {
        RectKey {
            k: self.generation,
            i: self.spatial_index.clone(),
            j: self.time_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.spatial_index.len()
    }

    pub fn side(&self) -> f64 {
        side_of(self.base_side, self.generation)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32 + 2)
    }

    /// `(x_lo, x_hi, t_lo, t_hi)`; space half-open on the right, time on the left.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let l = self.side();
        let lo: Vec<f64> = self
            .anchor
            .x
            .iter()
            .zip(&self.spatial_index)
            .map(|(a, &i)| a + i as f64 * l)
            .collect();
        let hi = lo.iter().map(|v| v + l).collect();
        let t_hi = self.anchor.t - self.time_index as f64 * l * l;
        (lo, hi, t_hi - l * l, t_hi)
    }

    /// Spatial center and time midpoint.
    pub fn center(&self) -> SpaceTimePoint {
        let l = self.side();
        let x = self
            .anchor
            .x
            .iter()
            .zip(&self.spatial_index)
            .map(|(a, &i)| a + (i as f64 + 0.5) * l)
            .collect();
        SpaceTimePoint::new(x, self.anchor.t - (self.time_index as f64 + 0.5) * l * l)
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let l = self.side();
        if time_index(self.anchor.t, l, p.t) != self.time_index {
            return false;
        }
        self.anchor
            .x
            .iter()
            .zip(&p.x)
            .zip(&self.spatial_index)
            .all(|((a, x), &i)| space_index(*a, l, *x) == i)
    }

    /// `δ₃R` about the center: spatial side `3ℓ`, depth `9ℓ²`.
    pub fn triple_dilate(&self) -> ParabolicRectangle {
        let l = self.side();
        let mut c = self.center();
        c.t += 4.5 * l * l;
        ParabolicRectangle {
            center: c,
            side: 3.0 * l,
            kind: RectKind::Backward,
        }
    }

    /// Cutoff `η_R`: product of quintic ramps, 1 on `R`, 0 off `δ₃R`.
    pub fn bump(&self, p: &SpaceTimePoint) -> f64 {
        let l = self.side();
        let c = self.center();
        bump_at(&c, l, p)
    }

    pub fn parent(&self) -> DyadicRectangle {
        DyadicRectangle {
            generation: self.generation - 1,
            spatial_index: self.spatial_index.iter().map(|i| i.div_euclid(2)).collect(),
            time_index: self.time_index.div_euclid(4),
            base_side: self.base_side,
            anchor: self.anchor.clone(),
        }
    }

    /// All `2^{d+2}` children, spatial index fastest.
    pub fn children_unchecked(&self) -> Vec<DyadicRectangle> {
        let d = self.dim();
        let mut out = Vec::with_capacity(4 << d);
        for dj in 0..4 {
            for mask in 0..(1usize << d) {
                let spatial_index = (0..d)
                    .map(|m| 2 * self.spatial_index[m] + ((mask >> m) & 1) as i64)
                    .collect();
                out.push(DyadicRectangle {
                    generation: self.generation + 1,
                    spatial_index,
                    time_index: 4 * self.time_index + dj,
                    base_side: self.base_side,
                    anchor: self.anchor.clone(),
                });
            }
        }
        out
    }
}

pub(crate) fn bump_at(c: &SpaceTimePoint, l: f64, p: &SpaceTimePoint) -> f64 {
    let half = 0.5 * l;
    let mut v = ramp((p.t - c.t).abs() / (half * l), 9.0);
    if v == 0.0 {
        return 0.0;
    }
    for (a, b) in c.x.iter().zip(&p.x) {
        v *= ramp((b - a).abs() / half, 3.0);
        if v == 0.0 {
            return 0.0;
        }
    }
    v
}

fn space_index(a: f64, l: f64, x: f64) -> i64 {
    ((x - a) / l).floor() as i64
}

fn time_index(ta: f64, l: f64, t: f64) -> i64 {
    ((ta - t) / (l * l)).floor() as i64
}

/// Finite window `[k_min, k_max]` of the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicLattice {
    pub base_side: f64,
    pub anchor: SpaceTimePoint,
    pub k_min: i32,
    pub k_max: i32,
}

impl ParabolicLattice {
    pub fn new(base_side: f64, anchor: SpaceTimePoint, k_min: i32, k_max: i32) -> Result<Self> {
        if !(base_side > 0.0) || !base_side.is_finite() {
            return Err(Error::Argument(format!("base side must be positive, got {base_side}")));
        }
        if k_min > k_max {
            return Err(Error::Argument(format!("empty generation range {k_min}..={k_max}")));
        }
        if !anchor.is_finite() {
            return Err(Error::Argument("anchor must be finite".into()));
        }
        Ok(Self {
            base_side,
            anchor,
            k_min,
            k_max,
        })
    }

    /// Unit lattice anchored at the origin with generations `1..=depth`.
    pub fn unit(d: usize, depth: i32) -> Result<Self> {
        Self::new(1.0, SpaceTimePoint::origin(d), 1, depth)
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    pub fn side(&self, k: i32) -> f64 {
        side_of(self.base_side, k)
    }

    pub fn generations(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    fn check_level(&self, k: i32) -> Result<()> {
        if k < self.k_min || k > self.k_max {
            return Err(Error::Range(format!(
                "generation {k} outside {}..={}",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }

    pub fn key_of(&self, z: &SpaceTimePoint, k: i32) -> RectKey {
        let l = self.side(k);
        RectKey {
            k,
            i: self.anchor.x.iter().zip(&z.x).map(|(a, x)| space_index(*a, l, *x)).collect(),
            j: time_index(self.anchor.t, l, z.t),
        }
    }

    pub fn rect(&self, key: &RectKey) -> DyadicRectangle {
        DyadicRectangle {
            generation: key.k,
            spatial_index: key.i.clone(),
            time_index: key.j,
            base_side: self.base_side,
            anchor: self.anchor.clone(),
        }
    }

    pub fn locate(&self, z: &SpaceTimePoint, k: i32) -> Result<DyadicRectangle> {
        self.check_level(k)?;
        if z.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.dim(),
            });
        }
        Ok(self.rect(&self.key_of(z, k)))
    }

    pub fn children(&self, r: &DyadicRectangle) -> Result<Vec<DyadicRectangle>> {
        self.check_level(r.generation + 1)?;
        Ok(r.children_unchecked())
    }

    pub fn parent(&self, r: &DyadicRectangle) -> Result<DyadicRectangle> {
        self.check_level(r.generation - 1)?;
        Ok(r.parent())
    }

    pub fn center_of(&self, key: &RectKey) -> SpaceTimePoint {
        let l = self.side(key.k);
        let x = self
            .anchor
            .x
            .iter()
            .zip(&key.i)
            .map(|(a, &i)| a + (i as f64 + 0.5) * l)
            .collect();
        SpaceTimePoint::new(x, self.anchor.t - (key.j as f64 + 0.5) * l * l)
    }

    /// Rectangles of generation `k` whose cutoff `η_R` is positive at `z`,
    /// paired with `η_R(z)`.
    pub fn bump_support(&self, z: &SpaceTimePoint, k: i32) -> Vec<(RectKey, f64)> {
        let l = self.side(k);
        let d = self.dim();
        let base = self.key_of(z, k);
        let mut out = Vec::new();
        let spatial = 3usize.pow(d as u32);
        for dj in -5i64..=4 {
            for m in 0..spatial {
                let mut c = m;
                let i: Vec<i64> = (0..d)
                    .map(|ax| {
                        let off = (c % 3) as i64 - 1;
                        c /= 3;
                        base.i[ax] + off
                    })
                    .collect();
                let key = RectKey { k, i, j: base.j + dj };
                let v = bump_at(&self.center_of(&key), l, z);
                if v > 0.0 {
                    out.push((key, v));
                }
            }
        }
        out
    }

    /// Generation-`k` rectangles meeting the closed window, time index
    /// outermost then spatial indices in lexicographic order.
    pub fn rectangles_in_window(&self, k: i32, w: &Window) -> Result<Vec<DyadicRectangle>> {
        self.check_level(k)?;
        let d = self.dim();
        if w.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: w.dim(),
            });
        }
        if w.t_lo > w.t_hi || (0..d).any(|m| w.x_lo[m] > w.x_hi[m]) {
            return Ok(Vec::new());
        }
        let l = self.side(k);
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|m| {
                let a = self.anchor.x[m];
                (space_index(a, l, w.x_lo[m]), space_index(a, l, w.x_hi[m]))
            })
            .collect();
        // slab j is (t_a-(j+1)ℓ², t_a-jℓ²]; the closed window touches slab j iff
        // t_lo ≤ t_a-jℓ² and t_hi > t_a-(j+1)ℓ²
        let j_lo = time_index(self.anchor.t, l, w.t_hi);
        let j_hi = ((self.anchor.t - w.t_lo) / (l * l)).floor() as i64;
        let count: i64 = ranges.iter().map(|(a, b)| b - a + 1).product::<i64>() * (j_hi - j_lo + 1);
        if count > 10_000_000 {
            return Err(Error::Range(format!("window covers {count} rectangles")));
        }
        let mut out = Vec::new();
        for j in j_lo..=j_hi {
            let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'odometer: loop {
                out.push(self.rect(&RectKey { k, i: idx.clone(), j }));
                for m in (0..d).rev() {
                    if idx[m] < ranges[m].1 {
                        idx[m] += 1;
                        continue 'odometer;
                    }
                    idx[m] = ranges[m].0;
                }
                break;
            }
        }
        Ok(out)
    }
}

pub fn measure_of(r: &DyadicRectangle, mu: &DiscreteMeasure) -> f64 {
    mu.mass_where(|p| r.contains(p))
}

pub fn bump_mass(r: &DyadicRectangle, mu: &DiscreteMeasure) -> f64 {
    let l = r.side();
    let c = r.center();
    mu.atoms().iter().map(|a| a.weight * bump_at(&c, l, &a.point)).sum()
}
