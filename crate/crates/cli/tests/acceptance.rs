//! Acceptance suite: runs `parawolff verify` twice, re-checks every row of
//! `verify.csv` against the thresholds pinned below, and prints one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const KERNEL_SCALING_REL: f64 = 1e-10;
const BESSEL_MASS_REL: f64 = 0.02;
const LAYER_CAKE_REL: f64 = 0.01;
const WOLFF_IDENTITY_REL: f64 = 1e-12;
const BRACKET_MAX_SPREAD: f64 = 100.0;
const BRACKET_SEED_FACTOR: f64 = 2.0;
const FW_GAP_REL: f64 = 1e-3;
const EQUILIBRIUM_TOL: f64 = 0.05;
const EQUILIBRIUM_CLOUDS: usize = 10;
// d = 2, α = 1, q = 2: n - αq = 2; heat balls (n - αq)/2 = 1; α = 2 log mode 1 - q = -1
const RECT_SLOPE: (f64, f64) = (2.0, 0.3);
const HEAT_SLOPE: (f64, f64) = (1.0, 0.2);
const LOG_SLOPE: (f64, f64) = (-1.0, 0.3);
const Q2_ROUTE_REL: f64 = 0.10;
const Q2_MAX_POINTS: usize = 40;
const SEPARATION_EPS: f64 = 0.1;
const SEPARATION_FLOOR: f64 = 0.9;
const KELLOGG_RATIO: f64 = 0.05;
const TOTAL_RUNTIME_SECS: f64 = 600.0;

struct Row {
    status: String,
    value: String,
    bracket: String,
}

type Rows = BTreeMap<String, Row>;

fn run_verify(dir: &Path) -> f64 {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_parawolff"))
        .arg("verify")
        .arg("--out")
        .arg(dir)
        .env_remove("PARAWOLFF_SEED")
        .output()
        .expect("spawn parawolff");
    // exit 0 iff every row passes, 1 otherwise; anything else is a crash
    assert!(
        matches!(out.status.code(), Some(0) | Some(1)),
        "verify crashed: {:?}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    start.elapsed().as_secs_f64()
}

fn read_rows(dir: &Path) -> Rows {
    let mut rd = csv::Reader::from_path(dir.join("verify.csv")).expect("verify.csv");
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["name", "status", "value", "bracket"]
    );
    let mut rows = Rows::new();
    for rec in rd.records() {
        let r = rec.expect("csv record");
        let prev = rows.insert(
            r[0].to_string(),
            Row {
                status: r[1].to_string(),
                value: r[2].to_string(),
                bracket: r[3].to_string(),
            },
        );
        assert!(prev.is_none(), "duplicate row {}", &r[0]);
    }
    rows
}

/// Outcome of one criterion: `Err` carries the first offending detail.
type Verdict = Result<String, String>;

struct Ctx<'a> {
    rows: &'a Rows,
}

impl Ctx<'_> {
    fn errors(&self, prefix: &str) -> Result<(), String> {
        match self.rows.iter().find(|(k, _)| k.starts_with(prefix) && k.ends_with(".error")) {
            Some((k, r)) => Err(format!("{k}: {}", r.value)),
            None => Ok(()),
        }
    }

    fn get(&self, name: &str) -> Result<&Row, String> {
        self.rows.get(name).ok_or_else(|| format!("missing row {name}"))
    }

    fn num(&self, name: &str) -> Result<f64, String> {
        let r = self.get(name)?;
        r.value.parse().map_err(|_| format!("{name}: `{}` is not a number", r.value))
    }

    fn count(&self, name: &str) -> Result<u64, String> {
        let r = self.get(name)?;
        r.value.parse().map_err(|_| format!("{name}: `{}` is not a count", r.value))
    }

    fn matching(&self, prefix: &str) -> Vec<(&String, &Row)> {
        self.rows.iter().filter(|(k, _)| k.starts_with(prefix)).collect()
    }
}

fn need(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1(c: &Ctx) -> Verdict {
    c.errors("kernels.")?;
    let v = c.num("kernels.scaling_max_rel")?;
    need(v < KERNEL_SCALING_REL, || format!("max rel {v:e}"))?;
    Ok(format!("max rel {v:e} < {KERNEL_SCALING_REL:e}"))
}

fn c2(c: &Ctx) -> Verdict {
    c.errors("kernels.")?;
    let mut seen = Vec::new();
    for case in ["d1.a1", "d2.a1", "d2.a2"] {
        let name = format!("kernels.bessel_mass.{case}");
        let v = c.num(&name)?;
        need((v - 1.0).abs() <= BESSEL_MASS_REL, || format!("{name} = {v}"))?;
        seen.push(format!("{v:.4}"));
    }
    Ok(format!("masses {}", seen.join(", ")))
}

fn c3(c: &Ctx) -> Verdict {
    c.errors("measure.")?;
    let v = c.num("measure.layer_cake_max_rel")?;
    need(v < LAYER_CAKE_REL, || format!("max rel {v}"))?;
    Ok(format!("max rel {v:.2e} < {LAYER_CAKE_REL}"))
}

fn c4(c: &Ctx) -> Verdict {
    c.errors("geometry.")?;
    let mut total = 0;
    let mut detail = Vec::new();
    for name in [
        "geometry.containment_violations",
        "geometry.counterexample_violations.a1",
        "geometry.counterexample_violations.a2",
    ] {
        let v = c.count(name)?;
        total += v;
        if v > 0 {
            detail.push(format!("{name} = {v} ({})", c.get(name)?.bracket));
        }
    }
    need(total == 0, || detail.join("; "))?;
    Ok("0 violations".into())
}

fn c5(c: &Ctx) -> Verdict {
    c.errors("wolff.identity")?;
    let v = c.num("wolff.identity_max_rel")?;
    need(v <= WOLFF_IDENTITY_REL, || format!("max rel {v:e}"))?;
    Ok(format!("max rel {v:e}"))
}

fn c6(c: &Ctx) -> Verdict {
    c.errors("wolff.brackets")?;
    let mut worst = (0.0f64, 0.0f64);
    for name in ["dyadic", "continuous", "regularized"] {
        let rows = c.matching(&format!("wolff.bracket.{name}."));
        need(!rows.is_empty(), || format!("no {name} bracket rows"))?;
        let bases: std::collections::BTreeSet<String> = rows
            .iter()
            .map(|(k, _)| k.rsplit_once('.').unwrap().0.to_string())
            .collect();
        for b in bases {
            let lo = c.num(&format!("{b}.c1"))?;
            let hi = c.num(&format!("{b}.c2"))?;
            let spread = c.num(&format!("{b}.spread"))?;
            let factor = c.num(&format!("{b}.seed_factor"))?;
            need(lo > 0.0 && hi.is_finite(), || format!("{b}: [{lo}, {hi}]"))?;
            need((spread - hi / lo).abs() <= 1e-9 * spread, || format!("{b}: spread {spread} ≠ c2/c1"))?;
            need(spread < BRACKET_MAX_SPREAD, || format!("{b}: spread {spread}"))?;
            need(factor <= BRACKET_SEED_FACTOR, || format!("{b}: seed factor {factor}"))?;
            worst = (worst.0.max(spread), worst.1.max(factor));
        }
    }
    Ok(format!("worst spread {:.3}, worst seed factor {:.3}", worst.0, worst.1))
}

fn c7(c: &Ctx) -> Verdict {
    c.errors("wolff.easy_part")?;
    let c0 = c.num("wolff.easy_part.c0")?;
    let bad = c.count("wolff.easy_part.sign_violations")?;
    need(c0 > 0.0 && c0.is_finite(), || format!("c0 = {c0}"))?;
    need(bad == 0, || format!("{bad} sign violations"))?;
    Ok(format!("c0 = {c0:.4}, 0 violations"))
}

fn c8(c: &Ctx) -> Verdict {
    c.errors("capacity.equilibrium")?;
    let clouds: std::collections::BTreeSet<String> = c
        .matching("capacity.equilibrium.")
        .iter()
        .map(|(k, _)| k.rsplit_once('.').unwrap().0.to_string())
        .collect();
    need(clouds.len() == EQUILIBRIUM_CLOUDS, || format!("{} clouds", clouds.len()))?;
    let mut worst_gap = 0.0f64;
    for b in &clouds {
        let gap = c.num(&format!("{b}.gap_rel"))?;
        let lo = c.num(&format!("{b}.min_ratio"))?;
        let hi = c.num(&format!("{b}.max_support_ratio"))?;
        need(gap < FW_GAP_REL, || format!("{b}: gap {gap}"))?;
        need(lo >= 1.0 - EQUILIBRIUM_TOL, || format!("{b}: (A) min ratio {lo}"))?;
        need(hi <= 1.0 + EQUILIBRIUM_TOL, || format!("{b}: (B) max support ratio {hi}"))?;
        worst_gap = worst_gap.max(gap);
    }
    Ok(format!("{} clouds, worst gap {worst_gap:.2e}", clouds.len()))
}

fn c9(c: &Ctx) -> Verdict {
    c.errors("capacity.scaling")?;
    let mut got = Vec::new();
    for (name, (want, tol)) in [("rectangle", RECT_SLOPE), ("heat_ball", HEAT_SLOPE), ("log_mode", LOG_SLOPE)] {
        let s = c.num(&format!("capacity.scaling.{name}.slope"))?;
        need((s - want).abs() <= tol, || format!("{name} slope {s} vs {want} ± {tol}"))?;
        got.push(format!("{name} {s:.3}"));
    }
    Ok(got.join(", "))
}

fn c10(c: &Ctx) -> Verdict {
    c.errors("capacity.q2_routes")?;
    let rows = c.matching("capacity.q2_routes.");
    need(rows.len() >= 2, || "no route rows".into())?;
    let mut worst = 0.0f64;
    for (k, r) in rows {
        let v: f64 = r.value.parse().map_err(|_| format!("{k}: {}", r.value))?;
        let pts: usize = r
            .bracket
            .split('(')
            .nth(1)
            .and_then(|s| s.split_whitespace().next())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("{k}: no point count in `{}`", r.bracket))?;
        need(pts <= Q2_MAX_POINTS, || format!("{k}: {pts} points"))?;
        need(v < Q2_ROUTE_REL, || format!("{k}: rel {v}"))?;
        worst = worst.max(v);
    }
    Ok(format!("worst rel {worst:.2e}"))
}

fn c11(c: &Ctx) -> Verdict {
    c.errors("thinness.dichotomy")?;
    for (set, want) in [("half_space", "Divergent"), ("spine", "Convergent")] {
        for form in ["integral", "dyadic_balls", "annuli", "heat_balls"] {
            let name = format!("thinness.{set}.{form}");
            let v = &c.get(&name)?.value;
            need(v == want, || format!("{name} = {v}"))?;
        }
        let name = format!("thinness.{set}.heat_domination_violations");
        let bad = c.count(&name)?;
        need(bad == 0, || format!("{name} = {bad}"))?;
    }
    Ok("half-space Divergent, spine Convergent, heat terms dominated".into())
}

fn c12(c: &Ctx) -> Verdict {
    c.errors("thinness.separation")?;
    let level = &c.get("thinness.separation.nonvacuous")?.value;
    need(level.parse::<usize>().is_ok(), || format!("no level: {level}"))?;
    let w = c.num("thinness.separation.potential_at_apex")?;
    let m = c.num("thinness.separation.net_min")?;
    need(w < SEPARATION_EPS, || format!("W(z0) = {w}"))?;
    need(m >= SEPARATION_FLOOR, || format!("net min {m}"))?;
    Ok(format!("level {level}, W(z0) = {w:.5}, net min {m:.4}"))
}

fn c13(c: &Ctx) -> Verdict {
    c.errors("thinness.kellogg")?;
    let v = c.num("thinness.kellogg.ratio")?;
    need(v < KELLOGG_RATIO, || format!("ratio {v}"))?;
    Ok(format!("ratio {v}"))
}

fn c14(c: &Ctx) -> Verdict {
    c.errors("capacity.clarkson")?;
    let v = c.count("capacity.clarkson_violations")?;
    need(v == 0, || format!("{v} violations"))?;
    Ok("0 violations".into())
}

fn c15(a: &Path, b: &Path) -> Verdict {
    let list = |d: &Path| -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    };
    let (la, lb) = (list(a), list(b));
    need(la == lb, || format!("file lists differ: {la:?} vs {lb:?}"))?;
    for f in &la {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        need(x == y, || format!("{f} differs"))?;
    }
    Ok(format!("{} artifacts identical", la.len()))
}

#[test]
fn acceptance() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let t1 = run_verify(d1.path());
    let t2 = run_verify(d2.path());
    let rows = read_rows(d1.path());
    let ctx = Ctx { rows: &rows };
    let checks: [(&str, fn(&Ctx) -> Verdict); 14] = [
        ("kernel scaling", c1),
        ("Bessel normalization", c2),
        ("layer-cake oracle", c3),
        ("heat-ball containment and counterexample points", c4),
        ("dyadic Wolff identity", c5),
        ("energy-ratio brackets", c6),
        ("easy part", c7),
        ("equilibrium conditions", c8),
        ("capacity scaling", c9),
        ("q=2 route consistency", c10),
        ("thinness dichotomy", c11),
        ("separation construction", c12),
        ("Kellogg surrogate", c13),
        ("Clarkson sweep", c14),
    ];
    let mut failed = Vec::new();
    println!();
    let mut report = |i: usize, name: &str, v: Verdict| match v {
        Ok(msg) => println!("PASS {i:>2} {name}: {msg}"),
        Err(msg) => {
            println!("FAIL {i:>2} {name}: {msg}");
            failed.push(i);
        }
    };
    for (i, (name, f)) in checks.iter().enumerate() {
        report(i + 1, name, f(&ctx));
    }
    report(15, "determinism", c15(d1.path(), d2.path()));
    // the CSV's own status column must agree with the recomputation above
    let csv_fails: Vec<&String> = rows.iter().filter(|(_, r)| r.status != "PASS").map(|(k, _)| k).collect();
    println!("verify runtime {t1:.1} s and {t2:.1} s; rows marked FAIL in verify.csv: {csv_fails:?}");
    assert!(t1 < TOTAL_RUNTIME_SECS, "verify took {t1:.0} s");
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
