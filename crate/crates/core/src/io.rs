//! Text formats for measures and regions.
//!
//! Measures: one atom per line, `x1 … xd t w`, whitespace separated; blank
//! lines and lines starting with `#` are skipped. Floats are written in their
//! shortest round-trip form so reading back is bit-exact.
//!
//! Regions: JSON, `{"d": 2, "shapes": [{"type": "backward_ball", ...}]}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::SpaceTimePoint;
use crate::measure::{DiscreteMeasure, RegionSet};

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Parse a measure; `d` is inferred from the first atom unless given.
pub fn read_measure(text: &str, source: &str, d: Option<usize>) -> Result<DiscreteMeasure> {
    let mut mu: Option<DiscreteMeasure> = d.map(DiscreteMeasure::new);
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut vals = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(source, no + 1, format!("expected a number, found `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_err(source, no + 1, format!("non-finite value `{tok}`")));
            }
            vals.push(v);
        }
        if vals.len() < 3 {
            return Err(parse_err(
                source,
                no + 1,
                format!("expected `x1 … xd t w` with d ≥ 1, found {} fields", vals.len()),
            ));
        }
        let m = mu.get_or_insert_with(|| DiscreteMeasure::new(vals.len() - 2));
        if vals.len() != m.dim() + 2 {
            return Err(parse_err(
                source,
                no + 1,
                format!("expected {} fields, found {}", m.dim() + 2, vals.len()),
            ));
        }
        let w = vals[vals.len() - 1];
        let t = vals[vals.len() - 2];
        vals.truncate(vals.len() - 2);
        m.push(SpaceTimePoint::new(vals, t), w)
            .map_err(|e| parse_err(source, no + 1, e.to_string()))?;
    }
    mu.ok_or_else(|| parse_err(source, 0, "no atoms and no dimension given"))
}

pub fn write_measure(mu: &DiscreteMeasure) -> String {
    let mut s = String::new();
    for a in mu.atoms() {
        for x in &a.point.x {
            let _ = write!(s, "{x:?} ");
        }
        let _ = writeln!(s, "{:?} {:?}", a.point.t, a.weight);
    }
    s
}

pub fn read_region(text: &str, source: &str) -> Result<RegionSet> {
    let r: RegionSet =
        serde_json::from_str(text).map_err(|e| parse_err(source, e.line(), e.to_string()))?;
    for (i, s) in r.shapes.iter().enumerate() {
        if s.dim() != r.d {
            return Err(parse_err(
                source,
                0,
                format!("shape {i} has dimension {}, region has {}", s.dim(), r.d),
            ));
        }
    }
    Ok(r)
}

pub fn write_region(r: &RegionSet) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("regions serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BackwardBall, HeatBall};
    use crate::measure::{Shape, Spine, SpineProfile};

    #[test]
    fn measure_round_trip_bit_exact() {
        let mu = DiscreteMeasure::from_atoms(
            2,
            [
                (SpaceTimePoint::new(vec![0.1, -1e-300], 1.0 / 3.0), 0.7),
                (SpaceTimePoint::new(vec![123456.789, 2f64.sqrt()], -5e-17), 1e300),
            ],
        )
        .unwrap();
        let text = write_measure(&mu);
        let back = read_measure(&text, "mem", None).unwrap();
        assert_eq!(back, mu);
        for (a, b) in back.atoms().iter().zip(mu.atoms()) {
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
            assert_eq!(a.point.t.to_bits(), b.point.t.to_bits());
        }
    }

    #[test]
    fn measure_parse_errors_name_line() {
        let e = read_measure("# c\n0 0 1\n0 x 1\n", "m.txt", None).unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                source_name: "m.txt".into(),
                line: 3,
                message: "expected a number, found `x`".into()
            }
        );
        assert!(read_measure("0 0 1\n0 0 0 1\n", "m", None).is_err());
        assert!(read_measure("0 0 -1\n", "m", None).is_err());
    }

    #[test]
    fn region_round_trip() {
        let z = SpaceTimePoint::new(vec![0.1, 0.2], 0.3);
        let r = RegionSet::single(Shape::BackwardBall(BackwardBall::new(z.clone(), 0.7).unwrap()))
            .with(Shape::HeatBall(HeatBall::new(z.clone(), 1.0 / 3.0, 1.0).unwrap()))
            .unwrap()
            .with(Shape::TimeHalfSpace { d: 2, t0: -0.1 })
            .unwrap()
            .with(Shape::Spine(Spine {
                apex: z,
                profile: SpineProfile::Exponential,
                depth: Some(1.0),
            }))
            .unwrap();
        let text = write_region(&r);
        assert_eq!(read_region(&text, "r.json").unwrap(), r);
        assert!(read_region("{\"d\": 1, \"shapes\": [{\"type\": \"blob\"}]}", "r").is_err());
    }
}
