//! `parawolff`: command-line front end.

mod config;
mod svg;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parawolff::capacity::{capacity_frank_wolfe, fit_line, refined_context, FwOptions};
use parawolff::geometry::heat_ball_profile;
use parawolff::lattice::ParabolicLattice;
use parawolff::measure::{RegionSet, Window};
use parawolff::suite::{run_all, Plots};
use parawolff::thinness::{ball_net, wiener_series, wiener_series_heatball, WienerConfig, WienerForm, WienerSeriesReport};
use parawolff::wolff::{
    continuous_wolff, dyadic_wolff, energy_report, havin_mazya, regularized_wolff, Truncation, WolffContext,
};
use parawolff::{HeatBall, SpaceTimePoint};

use config::{ConfigError, Overrides, RunConfig};
use svg::{Chart, Series};

#[derive(Parser, Debug)]
#[command(name = "parawolff", version, about = "Parabolic Wolff potentials, capacities and Wiener series")]
struct Cli {
    /// Flat JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Lattice depth.
    #[arg(long, global = true)]
    depth: Option<i32>,
    /// Accepted for compatibility; work runs on one thread.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the seeded check suite and write verify.csv plus charts.
    Verify,
    /// Capacity of `E ∩ Q_r(z)` for one radius or a geometric sweep.
    Capacity(CapacityArgs),
    /// Dyadic, regularized and continuous Wolff potentials of a measure.
    Wolff(WolffArgs),
    /// Wiener series of a region at a point.
    Thinness(ThinnessArgs),
    /// Lattice utilities.
    Lattice {
        #[command(subcommand)]
        cmd: LatticeCmd,
    },
}

#[derive(Args, Debug)]
struct CapacityArgs {
    /// Region JSON file.
    #[arg(long)]
    region: PathBuf,
    /// Base point `x1,...,xd,t`; defaults to the first shape's reference point.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, conflicts_with = "radius_sweep")]
    radius: Option<f64>,
    /// Geometric sweep `lo:hi:count`.
    #[arg(long, value_name = "LO:HI:COUNT")]
    radius_sweep: Option<String>,
}

#[derive(Args, Debug)]
struct WolffArgs {
    /// Measure file, one atom `x1 ... xd t w` per line.
    #[arg(long)]
    measure: PathBuf,
    /// Evaluation point `x1,...,xd,t`; repeatable. Defaults to the atoms.
    #[arg(long, allow_hyphen_values = true)]
    probe: Vec<String>,
    /// Also write the energy report.
    #[arg(long)]
    energy: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    Integral,
    DyadicBalls,
    Annuli,
}

#[derive(Args, Debug)]
struct ThinnessArgs {
    #[arg(long)]
    region: PathBuf,
    /// Base point `x1,...,xd,t`; defaults to the first shape's reference point.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, value_enum, default_value = "dyadic-balls")]
    form: FormArg,
    /// Use the linear heat-ball series (q = 2) instead.
    #[arg(long)]
    heatball: bool,
    /// Also write the partial sums chart.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand, Debug)]
enum LatticeCmd {
    /// Rectangles of one generation meeting a box.
    Dump {
        /// Spatial range `lo:hi` of every coordinate.
        #[arg(long = "box", value_name = "LO:HI", allow_hyphen_values = true)]
        bounds: String,
        /// Time range `lo:hi`; defaults to the spatial range.
        #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
        time: Option<String>,
        #[arg(long)]
        generation: i32,
    },
}

enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl From<parawolff::Error> for Failure {
    fn from(e: parawolff::Error) -> Self {
        use parawolff::Error as E;
        match e {
            E::Degenerate(_) | E::Level { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(..) => Failure::Io(e.to_string()),
            ConfigError::Invalid(_) => Failure::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Io(format!("csv: {e}"))
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    ExitCode::from(real_main(std::env::args_os()))
}

/// Parses `args` (program name first), runs, and returns the exit code.
fn real_main<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Numeric(m) => (1, m),
                Failure::Usage(m) => (2, m),
                Failure::Io(m) => (3, m),
            };
            eprintln!("error: {msg}");
            code
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let flags = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        depth: cli.depth,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &flags, std::env::var("PARAWOLFF_SEED").ok())?;
    // CSV goes to stdout unless an output directory was asked for.
    let out_dir = cli.out.is_some() || cli.config.is_some();
    match cli.cmd {
        Cmd::Verify => verify(&cfg),
        Cmd::Capacity(a) => capacity(&cfg, &a, out_dir),
        Cmd::Wolff(a) => wolff(&cfg, &a, out_dir),
        Cmd::Thinness(a) => thinness(&cfg, &a, out_dir),
        Cmd::Lattice {
            cmd: LatticeCmd::Dump { bounds, time, generation },
        } => lattice_dump(&cfg, &bounds, time.as_deref(), generation, out_dir),
    }
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Writes rows either to `<out>/<name>` or to stdout.
fn emit(cfg: &RunConfig, to_dir: bool, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    }
    if to_dir {
        write_file(&cfg.out, name, &buf)
    } else {
        std::io::stdout().write_all(&buf).map_err(|e| Failure::Io(format!("stdout: {e}")))
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join(name);
    std::fs::write(&p, bytes).map_err(io_err(&p))
}

/// Summary line: stdout when the data went to files, stderr otherwise.
fn note(to_dir: bool, msg: &str) {
    if to_dir {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

fn parse_point(s: &str, d: usize) -> Result<SpaceTimePoint, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("point `{s}`: expected comma-separated numbers")))?;
    if v.len() != d + 1 {
        return Err(Failure::Usage(format!("point `{s}`: expected {} coordinates, got {}", d + 1, v.len())));
    }
    let t = v[d];
    Ok(SpaceTimePoint::new(v[..d].to_vec(), t))
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("{what} `{s}`: expected `lo:hi` with lo ≤ hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("radius sweep `{s}`: expected `lo:hi:count` with 0 < lo < hi and count ≥ 2"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(bad());
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    let mut r: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    r[n - 1] = hi;
    Ok(r)
}

fn load_region(path: &Path, cfg: &RunConfig) -> Result<RegionSet, Failure> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let r = parawolff::io::read_region(&text, &path.display().to_string())?;
    if r.d != cfg.d {
        return Err(Failure::Usage(format!("region has d = {}, config has d = {}", r.d, cfg.d)));
    }
    Ok(r)
}

fn base_point(region: &RegionSet, point: Option<&str>) -> Result<SpaceTimePoint, Failure> {
    match point {
        Some(s) => parse_point(s, region.d),
        None => region
            .shapes
            .first()
            .map(|s| s.reference_point())
            .ok_or_else(|| Failure::Usage("empty region needs --point".into())),
    }
}

fn wiener_config(cfg: &RunConfig) -> WienerConfig {
    WienerConfig {
        eps0: cfg.epsilon0,
        seed: cfg.seed,
        fw: fw_options(cfg),
        ..WienerConfig::default()
    }
}

fn fw_options(cfg: &RunConfig) -> FwOptions {
    FwOptions {
        tol: cfg.solver_tol,
        max_iter: cfg.max_iter,
        ..FwOptions::default()
    }
}

fn verify(cfg: &RunConfig) -> Outcome {
    let (checks, plots) = run_all(&cfg.suite())?;
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["name", "status", "value", "bracket"]).map_err(csv_err)?;
        for c in &checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            w.write_record([c.name.as_str(), status, c.value.as_str(), c.bracket.as_str()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    }
    write_file(&cfg.out, "verify.csv", &buf)?;
    let resolved = serde_json::to_string_pretty(cfg).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    write_file(&cfg.out, "config.json", resolved.as_bytes())?;
    write_verify_charts(cfg, &plots)?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {} = {} [{}]", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.bracket);
        failed += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(failed == 0)
}

fn write_verify_charts(cfg: &RunConfig, plots: &Plots) -> Result<(), Failure> {
    for set in ["half_space", "spine"] {
        let series = plots
            .series
            .iter()
            .filter(|(label, _)| label.starts_with(set))
            .map(|(label, sums)| Series {
                label: label[set.len() + 1..].to_string(),
                points: sums.iter().enumerate().map(|(j, s)| ((j + 1) as f64, *s)).collect(),
                scatter: false,
            })
            .collect();
        let chart = Chart {
            title: format!("Wiener partial sums, {}", set.replace('_', " ")),
            x_label: "j".into(),
            y_label: "partial sum".into(),
            series,
        };
        write_file(&cfg.out, &format!("series_{set}.svg"), svg::render(&chart).as_bytes())?;
    }
    let mut series = Vec::new();
    for p in plots.scaling.iter().filter(|p| p.name != "log_mode") {
        series.push(Series {
            label: p.name.clone(),
            points: p.x.iter().copied().zip(p.log_capacity.iter().copied()).collect(),
            scatter: true,
        });
        let (lo, hi) = p.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        series.push(Series {
            label: format!("fit {:.3}", p.slope),
            points: vec![(lo, p.intercept + p.slope * lo), (hi, p.intercept + p.slope * hi)],
            scatter: false,
        });
    }
    let chart = Chart {
        title: "Capacity against radius".into(),
        x_label: "log r".into(),
        y_label: "log capacity".into(),
        series,
    };
    write_file(&cfg.out, "capacity_scaling.svg", svg::render(&chart).as_bytes())?;
    write_file(&cfg.out, "heat_ball.svg", svg::render(&heat_ball_chart()?).as_bytes())
}

/// Outline of `Θ^α_1(0)` cut by a plane through the axis.
fn heat_ball_chart() -> Result<Chart, Failure> {
    let mut series = Vec::new();
    for alpha in [1.0, 2.0, 3.0] {
        let ball = HeatBall::new(SpaceTimePoint::origin(2), 1.0, alpha)?;
        let ts: Vec<f64> = (0..=200).map(|i| -(i as f64) / 200.0).collect();
        let mut pts: Vec<(f64, f64)> = ts.iter().map(|&t| (heat_ball_profile(&ball, t), t)).collect();
        pts.extend(ts.iter().rev().map(|&t| (-heat_ball_profile(&ball, t), t)));
        series.push(Series {
            label: format!("alpha = {alpha}"),
            points: pts,
            scatter: false,
        });
    }
    Ok(Chart {
        title: "Heat ball cross-section, radius 1".into(),
        x_label: "x1".into(),
        y_label: "t".into(),
        series,
    })
}

fn capacity(cfg: &RunConfig, a: &CapacityArgs, to_dir: bool) -> Outcome {
    let region = load_region(&a.region, cfg)?;
    let z0 = base_point(&region, a.point.as_deref())?;
    let radii = match (&a.radius, &a.radius_sweep) {
        (Some(r), None) if *r > 0.0 => vec![*r],
        (Some(r), None) => return Err(Failure::Usage(format!("radius must be positive, got {r}"))),
        (None, Some(s)) => parse_sweep(s)?,
        _ => return Err(Failure::Usage("give --radius or --radius-sweep".into())),
    };
    let params = cfg.params();
    let base = WolffContext::unit(params, 1)?;
    let wc = wiener_config(cfg);
    let codim = params.codim();
    let mut rows = Vec::new();
    let mut fit_pts = Vec::new();
    let mut converged = true;
    for (i, &r) in radii.iter().enumerate() {
        let net = ball_net(&region, &z0, r, false, &wc, 10_000 + i as u64)?;
        let (cap, conv) = if net.is_empty() {
            (0.0, true)
        } else {
            let ctx = refined_context(&base, wc.eps0 * r, wc.extra_depth)?;
            let est = capacity_frank_wolfe(&net, &ctx, &wc.fw)?;
            (est.value, est.converged)
        };
        converged &= conv;
        if cap > 0.0 {
            fit_pts.push((r.ln(), cap.ln()));
        }
        rows.push(vec![f(r), f(cap), f(cap / r.powf(codim)), net.len().to_string(), conv.to_string()]);
    }
    let header: Vec<String> = ["radius", "capacity", "normalized", "points", "converged"].map(String::from).to_vec();
    emit(cfg, to_dir, "capacity.csv", &header, &rows)?;
    if fit_pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit_pts.iter().copied().unzip();
        let (slope, intercept) = fit_line(&x, &y);
        note(to_dir, &format!("slope {slope:?} (n - αq = {codim:?})"));
        if to_dir {
            let chart = Chart {
                title: "Capacity against radius".into(),
                x_label: "log r".into(),
                y_label: "log capacity".into(),
                series: vec![
                    Series {
                        label: "capacity".into(),
                        points: fit_pts.clone(),
                        scatter: true,
                    },
                    Series {
                        label: format!("fit {slope:.3}"),
                        points: x.iter().map(|&v| (v, intercept + slope * v)).collect(),
                        scatter: false,
                    },
                ],
            };
            write_file(&cfg.out, "capacity.svg", svg::render(&chart).as_bytes())?;
        }
    }
    if !converged {
        note(to_dir, "warning: the solver hit max_iter before reaching solver_tol");
    }
    Ok(converged)
}

fn wolff(cfg: &RunConfig, a: &WolffArgs, to_dir: bool) -> Outcome {
    let text = std::fs::read_to_string(&a.measure).map_err(io_err(&a.measure))?;
    let mu = parawolff::io::read_measure(&text, &a.measure.display().to_string(), Some(cfg.d))?;
    let params = cfg.params();
    let probes: Vec<SpaceTimePoint> = if a.probe.is_empty() {
        mu.points()
    } else {
        a.probe.iter().map(|s| parse_point(s, cfg.d)).collect::<Result<_, _>>()?
    };
    let inhom = WolffContext::new(params, ParabolicLattice::unit(cfg.d, cfg.depth)?, Truncation::Inhomogeneous, cfg.delta)?;
    // the homogeneous potential only exists below the critical exponent
    let hom = if params.alpha * params.q < params.nf() {
        let lat = ParabolicLattice::new(1.0, SpaceTimePoint::origin(cfg.d), -cfg.depth, cfg.depth)?;
        Some(WolffContext::new(params, lat, Truncation::Homogeneous, cfg.delta)?)
    } else {
        None
    };
    let mut header: Vec<String> = (1..=cfg.d).map(|i| format!("x{i}")).collect();
    header.push("t".into());
    for h in ["W_dot_dyadic", "W_dyadic", "W_regularized", "W_delta", "V_delta", "V_delta_stderr"] {
        header.push(h.into());
    }
    let mut rows = Vec::new();
    for (i, z) in probes.iter().enumerate() {
        let mut r: Vec<String> = z.x.iter().map(|v| f(*v)).collect();
        r.push(f(z.t));
        r.push(hom.as_ref().map(|c| f(dyadic_wolff(c, &mu, z))).unwrap_or_default());
        r.push(f(dyadic_wolff(&inhom, &mu, z)));
        r.push(f(regularized_wolff(&inhom, &mu, z)));
        r.push(f(continuous_wolff(&mu, z, &params, cfg.delta)?));
        let hm = havin_mazya(&mu, z, &params, cfg.delta, cfg.mc_samples, parawolff::rng::mix(cfg.seed, i as u64))?;
        r.push(f(hm.value));
        r.push(f(hm.std_error));
        rows.push(r);
    }
    emit(cfg, to_dir, "wolff.csv", &header, &rows)?;
    if a.energy {
        let rep = energy_report(&inhom, &mu);
        let header = ["sum_form", "integral_form", "ratio", "mc_error"].map(String::from).to_vec();
        let row = vec![f(rep.sum_form), f(rep.integral_form), f(rep.ratio), f(rep.mc_error)];
        if to_dir {
            emit(cfg, true, "energy.csv", &header, &[row])?;
        } else {
            eprintln!(
                "energy sum_form={} integral_form={} ratio={} mc_error={}",
                row[0], row[1], row[2], row[3]
            );
        }
    }
    Ok(true)
}

fn thinness(cfg: &RunConfig, a: &ThinnessArgs, to_dir: bool) -> Outcome {
    let region = load_region(&a.region, cfg)?;
    let z0 = base_point(&region, a.point.as_deref())?;
    let params = cfg.params();
    let wc = wiener_config(cfg);
    let depth = cfg.depth as usize;
    let rep: WienerSeriesReport = if a.heatball {
        if params.q != 2.0 {
            return Err(Failure::Usage(format!("the heat-ball series is the q = 2 case, got q = {}", params.q)));
        }
        wiener_series_heatball(&region, &z0, params.alpha, depth, &wc)?
    } else {
        let form = match a.form {
            FormArg::Integral => WienerForm::Integral,
            FormArg::DyadicBalls => WienerForm::DyadicBalls,
            FormArg::Annuli => WienerForm::Annuli,
        };
        let ctx = WolffContext::unit(params, 1)?;
        wiener_series(&region, &z0, &ctx, form, depth, &wc)?
    };
    let header = ["j", "radius", "cap", "term", "partial_sum"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = rep
        .terms
        .iter()
        .zip(&rep.partial_sums)
        .map(|(t, s)| vec![t.j.to_string(), f(t.radius), f(t.capacity), f(t.term), f(*s)])
        .collect();
    emit(cfg, to_dir, "thinness.csv", &header, &rows)?;
    if a.svg {
        let chart = Chart {
            title: format!("Wiener partial sums, {}", rep.form.name().replace('_', " ")),
            x_label: "j".into(),
            y_label: "partial sum".into(),
            series: vec![Series {
                label: rep.form.name().into(),
                points: rep.terms.iter().zip(&rep.partial_sums).map(|(t, s)| (t.j as f64, *s)).collect(),
                scatter: false,
            }],
        };
        write_file(&cfg.out, "thinness.svg", svg::render(&chart).as_bytes())?;
    }
    note(to_dir, &format!("verdict: {:?}", rep.verdict));
    Ok(true)
}

fn lattice_dump(cfg: &RunConfig, bounds: &str, time: Option<&str>, k: i32, to_dir: bool) -> Outcome {
    let (lo, hi) = parse_range(bounds, "box")?;
    let (t_lo, t_hi) = match time {
        Some(s) => parse_range(s, "time")?,
        None => (lo, hi),
    };
    let lat = ParabolicLattice::unit(cfg.d, cfg.depth)?;
    let w = Window {
        x_lo: vec![lo; cfg.d],
        x_hi: vec![hi; cfg.d],
        t_lo,
        t_hi,
    };
    let rects = lat.rectangles_in_window(k, &w)?;
    let mut header = vec!["generation".to_string()];
    header.extend((1..=cfg.d).map(|i| format!("i{i}")));
    header.push("j".into());
    header.extend((1..=cfg.d).map(|i| format!("center_x{i}")));
    header.extend(["center_t".to_string(), "side".to_string()]);
    let rows: Vec<Vec<String>> = rects
        .iter()
        .map(|r| {
            let c = r.center();
            let mut row = vec![r.generation.to_string()];
            row.extend(r.spatial_index.iter().map(|i| i.to_string()));
            row.push(r.time_index.to_string());
            row.extend(c.x.iter().map(|v| f(*v)));
            row.push(f(c.t));
            row.push(f(r.side()));
            row
        })
        .collect();
    emit(cfg, to_dir, "lattice.csv", &header, &rows)?;
    Ok(true)
}
