//! One runner per subcommand. Each reads its parameters, rejects unknown
//! ones, computes everything in memory and returns rows plus data files.

use integrable_core::bachet::{chain_with_budget, format_rational, BigRational, Curve, CurvePoint, DEFAULT_CHAIN_BUDGET};
use integrable_core::catmap::{
    exact_period, extended_step, group_period, hyperbolic_data, integral_f1, integral_f2, ExtendedTorusState,
    RationalTorusPoint, ToralAutomorphism,
};
use integrable_core::euler_top::{
    hamiltonian, hamiltonian_period_defect, modulated_flow, modulated_samples, orbit_drift, t_shift_orbit,
    EulerDriftReport, InertiaSpec, RigidBodyState,
};
use integrable_core::modulation::{oscillator_action, oscillator_flow, oscillator_samples, ModulationProfile, OscillatorState};
use integrable_core::numerics::{dot, IntegratorConfig, SkewMatrix, SquareMatrix, SymMatrix};
use integrable_core::quadrics::{
    affine_metric, closure_residual, equiv_metric_geodesic, geodesic_samples, hyperbola_tau_tail, integrate_geodesic,
    integrate_neumann, joachimsthal, knoerrer_transform, neumann_energy, neumann_residual, neumann_samples,
    points_at_infinity, projective_chart_metric, psi0, reparametrization_defect, return_time, to_projective_chart,
    trace_distance, uniform_grid, GeodesicState, NeumannState, ProjectiveChart, Quadric,
};
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Params};
use crate::error::{CliError, Result};
use crate::report::{fmt_f64, DriftRow};

/// A file written into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub rows: Vec<DriftRow>,
    pub steps: u64,
    pub files: Vec<DataFile>,
}

struct Ctx {
    experiment: Experiment,
    tol: f64,
    steps: Option<usize>,
    seed: u64,
    jobs: usize,
}

impl Ctx {
    fn module<T>(&self, r: integrable_core::Result<T>) -> Result<T> {
        r.map_err(|source| CliError::Module { experiment: self.experiment, source })
    }

    fn adaptive(&self) -> IntegratorConfig {
        IntegratorConfig::adaptive(self.tol)
    }

    /// Runs `f` over `items` on `jobs` threads; results keep input order.
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        if self.jobs == 1 {
            return items.iter().map(f).collect();
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .expect("thread pool")
            .install(|| items.par_iter().map(f).collect())
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ctx = Ctx { experiment: cfg.experiment, tol: cfg.tol, steps: cfg.steps, seed: cfg.seed, jobs: cfg.jobs };
    let p = Params::new(&cfg.params);
    match cfg.experiment {
        Experiment::Oscillator => oscillator(&p, &ctx),
        Experiment::EulerTop => euler_top(&p, &ctx),
        Experiment::Tshift => tshift(&p, &ctx),
        Experiment::Catmap => catmap(&p, &ctx),
        Experiment::Bachet => bachet(&p, &ctx),
        Experiment::Geodesic => geodesic(&p, &ctx),
        Experiment::Knoerrer => knoerrer(&p, &ctx),
        Experiment::Neumann => neumann(&p, &ctx),
        Experiment::GeodesicEquivalence => geodesic_equivalence(&p, &ctx),
        Experiment::ProjectiveChart => projective_chart(&p, &ctx),
    }
}

fn csv_file(name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> DataFile {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    DataFile { name: name.into(), contents: w.into_inner().expect("in-memory flush") }
}

fn floats(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_f64).collect()
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |k| format!("{prefix}{k}"))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn oscillator(p: &Params, c: &Ctx) -> Result<Outcome> {
    let tau = std::f64::consts::TAU;
    let default = vec![
        vec![1.0, 0.0, 1.0],
        vec![1.0, 0.5, tau],
        vec![1.5, 1.0, tau / 2.0],
        vec![2.0, 1.5, 1.0],
        vec![0.2, 0.9, 0.37],
    ];
    let profiles = p.opt_f64_rows("profiles")?.unwrap_or(default);
    let p0 = p.f64("p0", 1.0)?;
    let q0 = p.f64("q0", 0.0)?;
    let t_end = positive("t_end", p.f64("t_end", 100.0)?)?;
    p.finish()?;
    let omegas = profiles
        .iter()
        .map(|v| match v.as_slice() {
            &[offset, amplitude, period] => Ok(ModulationProfile::sinusoidal(offset, amplitude, positive("profile period", period)?)),
            _ => Err(invalid("each profile is [offset, amplitude, period]")),
        })
        .collect::<Result<Vec<_>>>()?;
    if omegas.is_empty() {
        return Err(invalid("profiles must not be empty"));
    }
    let cfg = c.adaptive();
    let s0 = OscillatorState::new(p0, q0);
    let runs = c.par_map(&omegas, |w| oscillator_flow(s0, w, t_end, &cfg));
    let runs = c.module(runs.into_iter().collect::<integrable_core::Result<Vec<_>>>())?;
    let i0 = oscillator_action(&s0);
    let mut rows = Vec::new();
    for (k, (w, run)) in omegas.iter().zip(&runs).enumerate() {
        rows.push(DriftRow::new(format!("action[{k}] omega = {}", w.label()), i0, run.action_drift, 1e-8));
        rows.push(DriftRow::new(format!("phase[{k}]"), 0.0, run.phase_drift, 1e-6));
    }
    let n = c.steps.unwrap_or(1000);
    let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    let sampled = c.module(oscillator_samples(s0, &omegas[0], &times, &cfg))?;
    let header: Vec<String> = ["t", "p", "q", "tau", "action"].map(String::from).to_vec();
    let data = sampled
        .states
        .iter()
        .zip(&sampled.tau)
        .map(|(s, t)| floats([s.t, s.p, s.q, *t, oscillator_action(s)]));
    Ok(Outcome {
        rows,
        steps: runs.iter().map(|r| r.steps as u64).sum(),
        files: vec![csv_file("trajectory.csv", &header, data)],
    })
}

struct TopSetup {
    inertia: InertiaSpec,
    m0: SkewMatrix,
    t_end: f64,
}

fn top_setup(p: &Params, c: &Ctx, default_t_end: f64) -> Result<TopSetup> {
    let n = p.usize("n", 3)?;
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    let diag_default: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let j0 = match p.opt_f64_rows("j0_rows")? {
        Some(rows) => SymMatrix::from_rows(&rows).map_err(|e| invalid(format!("j0_rows: {e}")))?,
        None => SymMatrix::diagonal(&p.f64_list("j0", &diag_default)?),
    };
    if j0.dim() != n {
        return Err(invalid(format!("J0 has dimension {}, expected n = {n}", j0.dim())));
    }
    let f = ModulationProfile::sinusoidal(
        p.f64("f_offset", 0.0)?,
        p.f64("f_amplitude", 0.3)?,
        positive("f_period", p.f64("f_period", 1.0)?)?,
    );
    let m0 = match p.opt_f64_list("m0")? {
        Some(upper) => SkewMatrix::from_upper(n, &upper).map_err(|e| invalid(format!("m0: {e}")))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            SkewMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
        }
    };
    let t_end = positive("t_end", p.f64("t_end", default_t_end)?)?;
    let inertia = c.module(InertiaSpec::new(j0, Some(f)))?;
    c.module(inertia.validate_over(0.0, t_end, 4096))?;
    Ok(TopSetup { inertia, m0, t_end })
}

fn upper_names(n: usize) -> Vec<String> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| format!("m{i}{j}"))).collect()
}

fn spectral_rows(report: &EulerDriftReport, threshold: f64) -> Vec<DriftRow> {
    let mut rows: Vec<DriftRow> = report
        .coefficients
        .iter()
        .map(|d| DriftRow::new(d.name.clone(), d.initial, d.max_drift, threshold))
        .collect();
    rows.push(DriftRow::new("probe spectrum", 0.0, report.probe_spectrum_drift, threshold));
    rows
}

fn euler_top(p: &Params, c: &Ctx) -> Result<Outcome> {
    let setup = top_setup(p, c, 20.0)?;
    let frame = p.bool("frame", true)?;
    p.finish()?;
    let TopSetup { inertia, m0, t_end } = setup;
    let n = inertia.dim();
    let cfg = c.adaptive();
    let mut s0 = RigidBodyState::new(m0.clone());
    if frame {
        s0 = s0.with_frame(SquareMatrix::identity(n));
    }
    let run = c.module(modulated_flow(&s0, &inertia, t_end, &cfg))?;
    let h0 = c.module(hamiltonian(&m0, &c.module(inertia.j_at(0.0))?))?;
    let defect = c.module(hamiltonian_period_defect(&RigidBodyState::new(m0.clone()), &inertia, t_end, &cfg))?;
    let mut rows = spectral_rows(&run.report, 1e-7);
    rows.push(DriftRow::new("H period defect", h0, defect, 1e-7));
    rows.push(DriftRow::new("skewness", 0.0, run.report.skewness, 1e-12));
    if let Some(o) = run.report.orthogonality {
        rows.push(DriftRow::new("frame orthogonality", 0.0, o, 1e-8));
    }
    let samples = c.steps.unwrap_or(200);
    let times: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let sampled = c.module(modulated_samples(&RigidBodyState::new(m0), &inertia, &times, &cfg))?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(upper_names(n))
        .chain(std::iter::once("H".to_string()))
        .collect();
    let mut data = Vec::with_capacity(sampled.states.len());
    for s in &sampled.states {
        let h = c.module(hamiltonian(&s.m, &c.module(inertia.j_at(s.t))?))?;
        data.push(floats(std::iter::once(s.t).chain(s.m.upper()).chain(std::iter::once(h))));
    }
    Ok(Outcome { rows, steps: run.steps as u64, files: vec![csv_file("trajectory.csv", &header, data)] })
}

fn tshift(p: &Params, c: &Ctx) -> Result<Outcome> {
    let setup = top_setup(p, c, 1.0)?;
    p.finish()?;
    let iterations = c.steps.unwrap_or(50);
    let orbit = c.module(t_shift_orbit(&setup.inertia, &setup.m0, iterations, &c.adaptive()))?;
    let report = c.module(orbit_drift(&orbit, setup.inertia.j0()))?;
    let n = setup.inertia.dim();
    let header: Vec<String> = std::iter::once("k".to_string()).chain(upper_names(n)).collect();
    let data = orbit
        .iter()
        .enumerate()
        .map(|(k, m)| std::iter::once(k.to_string()).chain(floats(m.upper())).collect());
    Ok(Outcome {
        rows: spectral_rows(&report, 5e-6),
        steps: iterations as u64,
        files: vec![csv_file("trajectory.csv", &header, data)],
    })
}

fn torus_point(coords: &[BigRational]) -> Result<RationalTorusPoint> {
    let [x, y] = coords else {
        return Err(invalid("point needs two coordinates"));
    };
    let parts = |r: &BigRational| -> Result<(i64, i64)> {
        let too_large = || invalid("point coordinates too large");
        Ok((r.numer().to_i64().ok_or_else(too_large)?, r.denom().to_i64().ok_or_else(too_large)?))
    };
    let (nx, dx) = parts(x)?;
    let (ny, dy) = parts(y)?;
    let den = dx.checked_mul(dy).ok_or_else(|| invalid("point denominators too large"))?;
    RationalTorusPoint::new([nx * dy, ny * dx], den).map_err(|e| invalid(e.to_string()))
}

fn catmap(p: &Params, c: &Ctx) -> Result<Outcome> {
    let m = p.i64_list("matrix", &[2, 1, 1, 1])?;
    let states = p.usize("states", 100)?;
    let range = positive("momentum_range", p.f64("momentum_range", 2.0)?)?;
    let point = p.rational_list("point", &["1/2", "1/2"])?;
    let expected_period = p.opt_usize("expected_period")?;
    p.finish()?;
    let [a11, a12, a21, a22] = m[..] else {
        return Err(invalid("matrix is [a11, a12, a21, a22]"));
    };
    let a = c.module(ToralAutomorphism::new(a11, a12, a21, a22))?;
    let hd = hyperbolic_data(&a);
    let iterations = c.steps.unwrap_or(10_000);
    let tr = a.trace() as f64;
    let expected_entropy = ((tr.abs() + (tr * tr - 4.0).sqrt()) / 2.0).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let starts: Vec<ExtendedTorusState> = (0..states)
        .map(|_| {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let q = [rng.random_range(-range..range), rng.random_range(-range..range)];
            ExtendedTorusState::from_standard(&hd, x, q)
        })
        .collect();
    // Largest per-step change of F₁ (relative) and F₂.
    let drifts = c.par_map(&starts, |s0| {
        let mut s = *s0;
        let (mut f1, mut f2) = (integral_f1(&s, &hd), integral_f2(&s, &hd));
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        for _ in 0..iterations {
            s = extended_step(&a, &hd, &s);
            let (g1, g2) = (integral_f1(&s, &hd), integral_f2(&s, &hd));
            d1 = d1.max((g1 - f1).abs() / f1.abs().max(1.0));
            d2 = d2.max((g2 - f2).abs());
            f1 = g1;
            f2 = g2;
        }
        (d1, d2)
    });
    let d1 = drifts.iter().map(|d| d.0).fold(0.0, f64::max);
    let d2 = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let x = torus_point(&point)?;
    let q = x.reduced_denominator();
    let group = group_period(&a, q);
    let period = exact_period(&a, &x, group).unwrap_or(0);
    let first = starts.first();
    let mut rows = vec![
        DriftRow::new("entropy", hd.entropy, (hd.entropy - expected_entropy).abs(), 1e-12),
        DriftRow::new("F1 per step", first.map_or(0.0, |s| integral_f1(s, &hd)), d1, 1e-10),
        DriftRow::new("F2 per step", first.map_or(0.0, |s| integral_f2(s, &hd)), d2, 1e-10),
        DriftRow::check(format!("orbit period divides group period {group}"), period as f64, period > 0 && group.is_multiple_of(period)),
    ];
    if let Some(e) = expected_period {
        rows.push(DriftRow::new(format!("orbit period (expected {e})"), period as f64, (period as f64 - e as f64).abs(), 0.0));
    }
    let header: Vec<String> = ["step", "x1", "x2", "pu_mantissa", "pu_exponent", "pv_mantissa", "pv_exponent", "F1", "F2"]
        .map(String::from)
        .to_vec();
    let mut data = Vec::new();
    if let Some(s0) = first {
        let mut s = *s0;
        for k in 0..=iterations {
            data.push(vec![
                k.to_string(),
                fmt_f64(s.x[0]),
                fmt_f64(s.x[1]),
                fmt_f64(s.p_u.mantissa),
                s.p_u.exponent.to_string(),
                fmt_f64(s.p_v.mantissa),
                s.p_v.exponent.to_string(),
                fmt_f64(integral_f1(&s, &hd)),
                fmt_f64(integral_f2(&s, &hd)),
            ]);
            s = extended_step(&a, &hd, &s);
        }
    }
    Ok(Outcome {
        rows,
        steps: (states * iterations) as u64,
        files: vec![csv_file("trajectory.csv", &header, data)],
    })
}

fn bachet(p: &Params, c: &Ctx) -> Result<Outcome> {
    let cval = p.rational("c", "-2")?;
    let start = p.rational_list("start", &["3", "5"])?;
    let budget = p.usize("budget", DEFAULT_CHAIN_BUDGET as usize)?;
    let expected_x = p.opt_rational_list("expected_x")?;
    let expected_abs_y = p.opt_rational_list("expected_abs_y")?;
    p.finish()?;
    let [x0, y0] = &start[..] else {
        return Err(invalid("start is [x, y]"));
    };
    let k = c.steps.unwrap_or(2);
    let curve = c.module(Curve::new(cval))?;
    let p0 = c.module(curve.point(x0.clone(), y0.clone()))?;
    let ch = c.module(chain_with_budget(&p0, &curve, k, budget as u64))?;
    let mut rows = Vec::new();
    let points: Vec<&CurvePoint> = ch.points().collect();
    for (i, pt) in points.iter().enumerate().skip(1) {
        let on_curve = match pt {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => curve.contains(x, y),
        };
        rows.push(DriftRow::check(format!("on curve [{i}]"), i as f64, on_curve));
        rows.push(DriftRow::check(format!("equals +-2P [{i}]"), i as f64, curve.double(points[i - 1]).eq_up_to_sign(pt)));
    }
    if let Some(xs) = &expected_x {
        for (i, want) in xs.iter().enumerate() {
            let ok = points.get(i + 1).and_then(|pt| pt.x()) == Some(want);
            rows.push(DriftRow::check(format!("x [{}] = {}", i + 1, format_rational(want)), (i + 1) as f64, ok));
        }
    }
    if let Some(ys) = &expected_abs_y {
        for (i, want) in ys.iter().enumerate() {
            let ok = points.get(i + 1).and_then(|pt| pt.y()).map(|y| y.abs()) == Some(want.clone());
            rows.push(DriftRow::check(format!("|y| [{}] = {}", i + 1, format_rational(want)), (i + 1) as f64, ok));
        }
    }
    let header: Vec<String> = ["step", "x", "y", "x_num_bits", "x_den_bits"].map(String::from).to_vec();
    let data = ch.entries.iter().enumerate().map(|(i, e)| {
        vec![
            i.to_string(),
            e.point.x().map(format_rational).unwrap_or_default(),
            e.point.y().map(format_rational).unwrap_or_default(),
            e.x_num_bits.to_string(),
            e.x_den_bits.to_string(),
        ]
    });
    let trajectory = csv_file("trajectory.csv", &header, data);
    let mut json = ch.to_json().into_bytes();
    json.push(b'\n');
    Ok(Outcome { rows, steps: k as u64, files: vec![trajectory, DataFile { name: "chain.json".into(), contents: json }] })
}

struct GeodesicSetup {
    q: Quadric,
    s0: GeodesicState,
}

fn geodesic_setup(p: &Params, c: &Ctx, default_b: &[f64], default_x: &[f64], default_v: &[f64]) -> Result<GeodesicSetup> {
    let b = p.f64_list("b", default_b)?;
    let x0 = p.f64_list("x0", default_x)?;
    let v0 = p.f64_list("v0", default_v)?;
    let q = c.module(Quadric::new(b))?;
    if x0.len() != q.dim() || v0.len() != q.dim() {
        return Err(invalid(format!("x0 and v0 need {} components", q.dim())));
    }
    let s0 = c.module(GeodesicState::on_quadric(&q, &x0, &v0))?;
    Ok(GeodesicSetup { q, s0 })
}

const X0: [f64; 3] = [0.6, 0.4, 0.3];
const V0: [f64; 3] = [0.3, -0.7, 0.5];

fn geodesic_header(d: usize) -> Vec<String> {
    std::iter::once("s".to_string()).chain(names("x", d)).chain(names("xp", d)).collect()
}

fn geodesic(p: &Params, c: &Ctx) -> Result<Outcome> {
    let GeodesicSetup { q, s0 } = geodesic_setup(p, c, &[1.0, 2.0, 3.0], &X0, &V0)?;
    let s_end = positive("s_end", p.f64("s_end", 50.0)?)?;
    let projection = p.bool("projection", true)?;
    p.finish()?;
    let cfg = c.adaptive().with_projection(projection);
    let run = c.module(integrate_geodesic(&s0, &q, s_end, &cfg))?;
    let r = &run.report;
    let rows = vec![
        DriftRow::new("Joachimsthal F", r.f_initial, r.f_drift, 1e-8 * (1.0 + r.f_initial.abs())),
        DriftRow::new("lambda + F/|Bx|^4", 0.0, r.lambda_identity, 1e-10),
        DriftRow::new("(Bx,x) - 1", 0.0, r.constraint_residuals[0], 1e-8),
        DriftRow::new("(Bx,x')", 0.0, r.constraint_residuals[1], 1e-8),
        DriftRow::new("|x'| - 1", 0.0, r.constraint_residuals[2], 1e-8),
    ];
    let n = c.steps.unwrap_or(1000);
    let sampled = c.module(geodesic_samples(&s0, &q, &uniform_grid(0.0, s_end, s_end / n as f64), &cfg))?;
    let mut header = geodesic_header(q.dim());
    header.push("F".into());
    let data = sampled
        .states
        .iter()
        .map(|s| floats(std::iter::once(s.s).chain(s.x.iter().copied()).chain(s.xp.iter().copied()).chain([joachimsthal(s, &q)])));
    Ok(Outcome { rows, steps: run.steps as u64, files: vec![csv_file("trajectory.csv", &header, data)] })
}

fn knoerrer(p: &Params, c: &Ctx) -> Result<Outcome> {
    let b = p.f64_list("b", &[1.0, 2.0, 3.0])?;
    let hyperbola = b.len() == 2 && b[0] > 0.0 && b[1] < 0.0;
    let (default_x, default_v): (&[f64], &[f64]) = if hyperbola { (&[1.0, 0.0], &[0.0, 1.0]) } else { (&X0, &V0) };
    let x0 = p.f64_list("x0", default_x)?;
    let v0 = p.f64_list("v0", default_v)?;
    let s_end = positive("s_end", p.f64("s_end", 10.0)?)?;
    let h = positive("h", p.f64("h", 1e-3)?)?;
    let s_max = positive("s_max", p.f64("s_max", 1e4)?)?;
    let s_fit_start = positive("s_fit_start", p.f64("s_fit_start", 1e3)?)?;
    p.finish()?;
    let q = c.module(Quadric::new(b))?;
    let cfg = c.adaptive().with_projection(true);
    let d = q.dim();
    let header: Vec<String> = ["s", "tau"]
        .map(String::from)
        .into_iter()
        .chain(names("q", d))
        .chain(names("qp", d))
        .chain(std::iter::once("alpha".to_string()))
        .collect();
    let limit = c.steps.unwrap_or(1000);
    let thin = |kn: &integrable_core::quadrics::KnoerrerRun| {
        let stride = kn.samples.len().div_ceil(limit).max(1);
        kn.samples
            .iter()
            .step_by(stride)
            .map(|s| floats([s.s, s.tau].into_iter().chain(s.q.iter().copied()).chain(s.qp.iter().copied()).chain([s.alpha])))
            .collect::<Vec<_>>()
    };
    if hyperbola {
        // The geodesic starts at the vertex; x0 and v0 are not used.
        let _ = (x0, v0);
        let (tail, kn) = c.module(hyperbola_tau_tail(&q, s_max, s_fit_start, &cfg))?;
        let ev = c.module(return_time(&kn.samples[0].state(), &kn.b_eff, 6.0 * tail.tau_infinity, &cfg))?;
        let rows = vec![
            DriftRow::new("tau tail fraction", tail.tau_infinity, tail.increment_ratio, 1e-6),
            DriftRow::new("Neumann return |q(T) - q(0)|", ev.period, ev.position_error, 1e-6),
            DriftRow::new("Neumann return |q'(T) - q'(0)|", ev.period, ev.velocity_error, 1e-6),
        ];
        let data = thin(&kn);
        return Ok(Outcome { rows, steps: kn.samples.len() as u64, files: vec![csv_file("trajectory.csv", &header, data)] });
    }
    if x0.len() != d || v0.len() != d {
        return Err(invalid(format!("x0 and v0 need {d} components")));
    }
    let s0 = c.module(GeodesicState::on_quadric(&q, &x0, &v0))?;
    let transform = |h: f64| -> Result<(integrable_core::quadrics::KnoerrerRun, f64, u64)> {
        let run = c.module(geodesic_samples(&s0, &q, &uniform_grid(0.0, s_end, h), &cfg))?;
        let kn = c.module(knoerrer_transform(&run.states, &q))?;
        let r = neumann_residual(&kn.samples, &kn.b_eff);
        Ok((kn, r, run.steps as u64))
    };
    let (kn, coarse, steps1) = transform(h)?;
    let (_, fine, steps2) = transform(h / 2.0)?;
    let psi = kn.samples.iter().map(|s| psi0(&s.qp, &s.q, &kn.b_eff).abs()).fold(0.0, f64::max);
    let ratio = coarse / fine;
    let rows = vec![
        DriftRow::new("Neumann residual", 0.0, coarse, 1e-5),
        DriftRow::new("|Psi0|", 0.0, psi, 1e-5),
        DriftRow::new("refinement ratio (expected 4)", ratio, (ratio - 4.0).abs(), 1.0),
    ];
    Ok(Outcome { rows, steps: steps1 + steps2, files: vec![csv_file("trajectory.csv", &header, thin(&kn))] })
}

fn neumann(p: &Params, c: &Ctx) -> Result<Outcome> {
    let b = p.f64_list("b", &[1.0, 2.0, 3.0])?;
    let q0 = p.f64_list("q0", &[0.6, 0.0, 0.8])?;
    let qp0 = p.f64_list("qp0", &[0.2, 0.5, -0.15])?;
    let tau_end = positive("tau_end", p.f64("tau_end", 10.0)?)?;
    let shifts = p.f64_list("shifts", &[-1.0, 0.5, 2.0])?;
    p.finish()?;
    if q0.len() != b.len() || qp0.len() != b.len() {
        return Err(invalid(format!("q0 and qp0 need {} components", b.len())));
    }
    let nq = dot(&q0, &q0).sqrt();
    if nq == 0.0 {
        return Err(invalid("q0 must be nonzero"));
    }
    let q: Vec<f64> = q0.iter().map(|v| v / nq).collect();
    let along = dot(&qp0, &q);
    let qp: Vec<f64> = qp0.iter().zip(&q).map(|(v, w)| v - along * w).collect();
    let s0 = NeumannState::new(q, qp);
    let cfg = c.adaptive().with_projection(true);
    let run = c.module(integrate_neumann(&s0, &b, tau_end, &cfg))?;
    let p0 = psi0(&s0.qp, &s0.q, &b);
    let psi_drift = run.states.iter().map(|s| (psi0(&s.qp, &s.q, &b) - p0).abs()).fold(0.0, f64::max);
    let r = &run.report;
    let mut rows = vec![
        DriftRow::new("energy", r.energy_initial, r.energy_drift, 1e-8),
        DriftRow::new("|q| - 1", 0.0, r.constraint_residuals[0], 1e-8),
        DriftRow::new("(q,q')", 0.0, r.constraint_residuals[1], 1e-8),
        DriftRow::new("Psi0", p0, psi_drift, 1e-7),
    ];
    let n = c.steps.unwrap_or(1000);
    let times = uniform_grid(0.0, tau_end, tau_end / n as f64);
    let base = c.module(neumann_samples(&s0, &b, &times, &cfg))?;
    let shifted = c.par_map(&shifts, |z| {
        let bz: Vec<f64> = b.iter().map(|v| v - z).collect();
        neumann_samples(&s0, &bz, &times, &cfg)
    });
    for (z, other) in shifts.iter().zip(shifted) {
        let other = c.module(other)?;
        let dev = base
            .states
            .iter()
            .zip(&other.states)
            .flat_map(|(u, w)| u.q.iter().zip(&w.q).chain(u.qp.iter().zip(&w.qp)).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        rows.push(DriftRow::new(format!("shift b - {z}"), 0.0, dev, 1e-7));
    }
    let d = b.len();
    let header: Vec<String> = std::iter::once("tau".to_string())
        .chain(names("q", d))
        .chain(names("qp", d))
        .chain(std::iter::once("energy".to_string()))
        .collect();
    let data = base.states.iter().map(|s| {
        floats(std::iter::once(s.tau).chain(s.q.iter().copied()).chain(s.qp.iter().copied()).chain([neumann_energy(&s.q, &s.qp, &b)]))
    });
    Ok(Outcome { rows, steps: run.steps as u64, files: vec![csv_file("trajectory.csv", &header, data)] })
}

fn geodesic_equivalence(p: &Params, c: &Ctx) -> Result<Outcome> {
    let GeodesicSetup { q, s0 } = geodesic_setup(p, c, &[1.0, 2.0, 3.0], &X0, &V0)?;
    let length = positive("length", p.f64("length", 5.0)?)?;
    let h = positive("h", p.f64("h", 2.5e-4)?)?;
    p.finish()?;
    let eq = c.module(equiv_metric_geodesic(&s0, &q, length, &c.adaptive()))?;
    let s_last = eq.s.last().copied().unwrap_or(length);
    let grid = uniform_grid(0.0, s_last + 0.1, h);
    let reference = c.module(geodesic_samples(&s0, &q, &grid, &c.adaptive().with_projection(true)))?;
    let polyline: Vec<Vec<f64>> = reference.states.iter().map(|s| s.x.clone()).collect();
    let trace = trace_distance(&eq.points, &polyline);
    let kn = c.module(knoerrer_transform(&reference.states, &q))?;
    let reparam = c.module(reparametrization_defect(&eq, &kn))?;
    let rows = vec![
        DriftRow::new("trace distance", length, trace, 1e-5),
        DriftRow::new("r affine in tau", 0.0, reparam, 1e-6),
        DriftRow::new("chart switches", eq.chart_switches as f64, 0.0, 0.0),
    ];
    let d = q.dim();
    let header: Vec<String> = ["r", "s"].map(String::from).into_iter().chain(names("x", d)).collect();
    let data = eq
        .r
        .iter()
        .zip(&eq.s)
        .zip(&eq.points)
        .map(|((r, s), x)| floats([*r, *s].into_iter().chain(x.iter().copied())));
    Ok(Outcome {
        rows,
        steps: (eq.points.len() + reference.steps) as u64,
        files: vec![csv_file("trajectory.csv", &header, data)],
    })
}

fn projective_chart(p: &Params, c: &Ctx) -> Result<Outcome> {
    let b = p.f64_list("b", &[-1.0, 2.0, 3.0])?;
    let index = p.usize("chart", 0)?;
    let samples = p.usize("samples", 100)?;
    let infinity = p.usize("infinity_points", 20)?;
    let box_size = positive("box", p.f64("box", 3.0)?)?;
    p.finish()?;
    let q = c.module(Quadric::new(b))?;
    let d = q.dim();
    if index >= d {
        return Err(invalid(format!("chart index {index} out of range for dimension {d}")));
    }
    let chart = ProjectiveChart { index };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rel: f64 = 0.0;
    let mut data = Vec::new();
    let mut attempts = 0usize;
    while data.len() < samples {
        attempts += 1;
        if attempts > 1000 * samples.max(1) {
            return Err(invalid("could not sample affine points away from the chart boundary"));
        }
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-box_size..box_size)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(s) = GeodesicState::on_quadric(&q, &x, &v) else { continue };
        if s.x[index].abs() < 0.1 {
            continue;
        }
        let (y, dy) = c.module(to_projective_chart(&s.x, &s.xp, &q, chart))?;
        let lhs = c.module(projective_chart_metric(&y, &dy, &q, chart))?;
        let rhs = c.module(affine_metric(&s.x, &s.xp, &q))?;
        rel = rel.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
        data.push(std::iter::once("affine".to_string()).chain(floats(y.into_iter().chain(dy).chain([lhs]))).collect());
    }
    let pts = points_at_infinity(&q, chart, infinity);
    let mut closure: f64 = 0.0;
    let mut finite = true;
    for y in &pts {
        closure = closure.max(closure_residual(y, &q, chart).abs());
        // A tangent to the closure: a fixed vector minus its normal part.
        let mut grad = vec![-2.0 * y[0]];
        grad.extend((0..d).filter(|&k| k != index).enumerate().map(|(j, k)| 2.0 * q.b()[k] * y[j + 1]));
        let e: Vec<f64> = (0..d).map(|k| 0.7 - 0.3 * k as f64).collect();
        let c0 = dot(&e, &grad) / dot(&grad, &grad);
        let dy: Vec<f64> = e.iter().zip(&grad).map(|(a, g)| a - c0 * g).collect();
        let value = projective_chart_metric(y, &dy, &q, chart);
        finite &= value.as_ref().is_ok_and(|v| v.is_finite());
        let shown = value.unwrap_or(f64::NAN);
        data.push(std::iter::once("infinity".to_string()).chain(floats(y.iter().copied().chain(dy).chain([shown]))).collect());
    }
    let rows = vec![
        DriftRow::new("chart metric vs affine metric", samples as f64, rel, 1e-9),
        DriftRow::new("closure residual at infinity", pts.len() as f64, closure, 1e-12),
        DriftRow::check("metric finite at infinity", pts.len() as f64, finite),
    ];
    let header: Vec<String> = std::iter::once("kind".to_string())
        .chain(names("y", d))
        .chain(names("dy", d))
        .chain(std::iter::once("metric".to_string()))
        .collect();
    Ok(Outcome { rows, steps: attempts as u64, files: vec![csv_file("trajectory.csv", &header, data)] })
}
