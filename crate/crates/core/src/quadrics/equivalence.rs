//! Geodesics of `dr² = (B dx, dx) / |Bx|²` restricted to the quadric,
//! computed in graph charts, and the form of that metric in a projective
//! chart of the closure.

use serde::{Deserialize, Serialize};

use super::Quadric;
use crate::error::{Error, Result};
use crate::numerics::{dot, integrate, sym_eigen, IntegratorConfig, OdeSystem, SquareMatrix, SymMatrix};

use super::knoerrer::KnoerrerRun;
use super::GeodesicState;

/// Step for the central differences of the chart metric.
const METRIC_FD_STEP: f64 = 1e-5;
/// Switch to another chart once the solved coordinate falls below this
/// fraction of the largest one.
const SWITCH_RATIO: f64 = 0.6;

/// `dr²(v, v) = (Bv, v) / |Bx|²`.
pub fn affine_metric(x: &[f64], v: &[f64], q: &Quadric) -> Result<f64> {
    let bx = q.apply_b(x);
    let nb = dot(&bx, &bx);
    if nb.sqrt() <= 1e-12 {
        return Err(Error::DegeneratePoint);
    }
    Ok(q.b_form(v, v) / nb)
}

/// Graph chart solving for coordinate `k` with sign `sign`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GraphChart {
    k: usize,
    sign: f64,
}

impl GraphChart {
    fn best(x: &[f64]) -> Self {
        let k = (0..x.len()).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).expect("nonempty");
        Self { k, sign: if x[k] < 0.0 { -1.0 } else { 1.0 } }
    }

    fn coords(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().filter(|(i, _)| *i != self.k).map(|(_, v)| *v).collect()
    }

    fn ambient_index(&self, j: usize) -> usize {
        if j < self.k {
            j
        } else {
            j + 1
        }
    }

    fn embed(&self, q: &Quadric, w: &[f64]) -> Result<Vec<f64>> {
        let b = q.b();
        let mut rest = 1.0;
        for (j, wj) in w.iter().enumerate() {
            rest -= b[self.ambient_index(j)] * wj * wj;
        }
        let val = rest / b[self.k];
        if !(val > 0.0) {
            return Err(Error::ChartSwitch);
        }
        let mut x = Vec::with_capacity(w.len() + 1);
        x.extend_from_slice(&w[..self.k]);
        x.push(self.sign * val.sqrt());
        x.extend_from_slice(&w[self.k..]);
        Ok(x)
    }

    /// Columns `∂x/∂w_j`.
    fn jacobian(&self, q: &Quadric, x: &[f64]) -> Vec<Vec<f64>> {
        let b = q.b();
        let n = x.len() - 1;
        (0..n)
            .map(|j| {
                let i = self.ambient_index(j);
                let mut col = vec![0.0; n + 1];
                col[i] = 1.0;
                col[self.k] = -b[i] * x[i] / (b[self.k] * x[self.k]);
                col
            })
            .collect()
    }

    fn metric(&self, q: &Quadric, w: &[f64]) -> Result<SquareMatrix> {
        let x = self.embed(q, w)?;
        let cols = self.jacobian(q, &x);
        let bx = q.apply_b(&x);
        let nb = dot(&bx, &bx);
        Ok(SquareMatrix::from_fn(w.len(), |i, j| q.b_form(&cols[i], &cols[j]) / nb))
    }

    fn velocity(&self, q: &Quadric, w: &[f64], wp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.embed(q, w)?;
        let cols = self.jacobian(q, &x);
        let mut v = vec![0.0; x.len()];
        for (c, a) in cols.iter().zip(wp) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += a * ci;
            }
        }
        Ok((x, v))
    }
}

/// Geodesic equation of the chart metric, with Christoffel symbols from
/// central differences. State: `(w, w′, s)` with `s` the Euclidean arclength.
struct ChartFlow<'a> {
    q: &'a Quadric,
    chart: GraphChart,
}

impl OdeSystem for ChartFlow<'_> {
    fn dim(&self) -> usize {
        2 * (self.q.dim() - 1) + 1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.q.dim() - 1;
        let (w, rest) = y.split_at(n);
        let wp = &rest[..n];
        let g = self.chart.metric(self.q, w)?;
        let ginv = invert(&g)?;
        let dg: Vec<SquareMatrix> = (0..n)
            .map(|l| {
                let mut plus = w.to_vec();
                let mut minus = w.to_vec();
                plus[l] += METRIC_FD_STEP;
                minus[l] -= METRIC_FD_STEP;
                Ok((&self.chart.metric(self.q, &plus)? - &self.chart.metric(self.q, &minus)?).scale(0.5 / METRIC_FD_STEP))
            })
            .collect::<Result<_>>()?;
        // Γ_lij w′ⁱ w′ʲ with Γ_lij = ½(∂ᵢg_lj + ∂ⱼg_li − ∂_l g_ij).
        let lowered: Vec<f64> = (0..n)
            .map(|l| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]) * wp[i] * wp[j];
                    }
                }
                acc
            })
            .collect();
        dy[..n].copy_from_slice(wp);
        for m in 0..n {
            dy[n + m] = -(0..n).map(|l| ginv[(m, l)] * lowered[l]).sum::<f64>();
        }
        let (_, v) = self.chart.velocity(self.q, w, wp)?;
        dy[2 * n] = dot(&v, &v).sqrt();
        Ok(())
    }
}

fn invert(g: &SquareMatrix) -> Result<SquareMatrix> {
    let n = g.dim();
    let det = g.determinant();
    if det.abs() <= 1e-300 {
        return Err(Error::DegeneratePoint);
    }
    if n == 1 {
        return Ok(SquareMatrix::from_fn(1, |_, _| 1.0 / g[(0, 0)]));
    }
    if n == 2 {
        return Ok(SquareMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => g[(1, 1)] / det,
            (1, 1) => g[(0, 0)] / det,
            _ => -g[(i, j)] / det,
        }));
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            crate::numerics::solve_dense(g, &e).ok_or(Error::DegeneratePoint)
        })
        .collect::<Result<_>>()?;
    Ok(SquareMatrix::from_fn(n, |i, j| cols[j][i]))
}

/// A geodesic of the second metric, sampled at accepted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentGeodesic {
    /// Ambient points.
    pub points: Vec<Vec<f64>>,
    /// Unit (Euclidean) tangents.
    pub tangents: Vec<Vec<f64>>,
    /// Affine parameter of `dr²`.
    pub r: Vec<f64>,
    /// Euclidean arclength along the trace.
    pub s: Vec<f64>,
    pub chart_switches: usize,
}

/// Integrates the `dr²` geodesic from the point and direction of `s0` until
/// the trace has Euclidean length `length`. The initial velocity is `s0.xp`.
pub fn equiv_metric_geodesic(s0: &GeodesicState, q: &Quadric, length: f64, cfg: &IntegratorConfig) -> Result<EquivalentGeodesic> {
    if s0.x.len() != q.dim() || s0.xp.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: s0.x.len() });
    }
    let n = q.dim() - 1;
    let speed = affine_metric(&s0.x, &s0.xp, q)?.abs().sqrt();
    // Segment length in r, roughly 0.05 in Euclidean arclength.
    let segment = 0.05 * speed.max(1e-6);
    let mut x = s0.x.clone();
    let mut v = s0.xp.clone();
    let mut r0 = 0.0;
    let mut s_acc = 0.0;
    let mut out = EquivalentGeodesic { points: vec![], tangents: vec![], r: vec![], s: vec![], chart_switches: 0 };
    let mut chart = GraphChart::best(&x);
    let push = |out: &mut EquivalentGeodesic, x: Vec<f64>, v: &[f64], r: f64, s: f64| {
        let len = dot(v, v).sqrt();
        out.tangents.push(v.iter().map(|c| c / len).collect());
        out.points.push(x);
        out.r.push(r);
        out.s.push(s);
    };
    push(&mut out, x.clone(), &v, 0.0, 0.0);
    let mut guard = 0usize;
    while s_acc < length {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::StepBudgetExceeded { max_steps: guard, t: r0 });
        }
        let better = GraphChart::best(&x);
        if x[chart.k].abs() < SWITCH_RATIO * x[better.k].abs() || x[chart.k].signum() != chart.sign {
            chart = better;
            out.chart_switches += 1;
        }
        let w = chart.coords(&x);
        let wp = chart.coords(&v);
        let mut y0 = w;
        y0.extend_from_slice(&wp);
        y0.push(s_acc);
        let flow = ChartFlow { q, chart };
        let traj = integrate(&flow, &y0, (r0, r0 + segment), cfg)?;
        let mut done = false;
        for (t, y) in traj.iter().skip(1) {
            let (xx, vv) = chart.velocity(q, &y[..n], &y[n..2 * n])?;
            push(&mut out, xx.clone(), &vv, t, y[2 * n]);
            x = xx;
            v = vv;
            s_acc = y[2 * n];
            r0 = t;
            if s_acc >= length {
                done = true;
                break;
            }
        }
        if done {
            break;
        }
    }
    Ok(out)
}

/// Largest distance from the points of `curve` to the polyline `reference`.
pub fn trace_distance(curve: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let seg_dist = |p: &[f64], a: &[f64], b: &[f64]| -> f64 {
        let ab: Vec<f64> = b.iter().zip(a).map(|(u, v)| u - v).collect();
        let ap: Vec<f64> = p.iter().zip(a).map(|(u, v)| u - v).collect();
        let l2 = dot(&ab, &ab);
        let t = if l2 == 0.0 { 0.0 } else { (dot(&ap, &ab) / l2).clamp(0.0, 1.0) };
        ap.iter().zip(&ab).map(|(u, w)| (u - t * w).powi(2)).sum::<f64>().sqrt()
    };
    curve
        .iter()
        .map(|p| {
            reference
                .windows(2)
                .map(|w| seg_dist(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// How far the `dr²` parameter of `eq` is from an affine function of the
/// Neumann time `τ(s)` of the standard geodesic behind `kn`: largest residual
/// of the least-squares line `r ≈ aτ + c`, relative to the range of `r`.
/// `τ` is interpolated by cubic Hermite using `dτ/ds = α`.
pub fn reparametrization_defect(eq: &EquivalentGeodesic, kn: &KnoerrerRun) -> Result<f64> {
    let samples = &kn.samples;
    if samples.len() < 2 || eq.r.len() < 3 {
        return Err(Error::InvalidConfig("need at least two Neumann samples and three curve points".into()));
    }
    let s_last = samples.last().expect("nonempty").s;
    let mut taus = Vec::with_capacity(eq.s.len());
    for &s in &eq.s {
        if s < samples[0].s || s > s_last {
            return Err(Error::InvalidConfig(format!("arclength {s} outside the sampled geodesic")));
        }
        let i = samples.partition_point(|p| p.s <= s).clamp(1, samples.len() - 1) - 1;
        let (a, b) = (&samples[i], &samples[i + 1]);
        let h = b.s - a.s;
        let t = (s - a.s) / h;
        let (t2, t3) = (t * t, t * t * t);
        taus.push(
            (2.0 * t3 - 3.0 * t2 + 1.0) * a.tau
                + (t3 - 2.0 * t2 + t) * h * a.alpha
                + (-2.0 * t3 + 3.0 * t2) * b.tau
                + (t3 - t2) * h * b.alpha,
        );
    }
    let n = taus.len() as f64;
    let mx = taus.iter().sum::<f64>() / n;
    let my = eq.r.iter().sum::<f64>() / n;
    let sxx: f64 = taus.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = taus.iter().zip(&eq.r).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let (lo, hi) = eq.r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    Ok(taus.iter().zip(&eq.r).map(|(x, y)| (y - my - slope * (x - mx)).abs()).fold(0.0, f64::max) / (hi - lo))
}

/// Affine chart of the projective closure in which ambient coordinate
/// `index` is scaled to one: `y₀ = 1/x_index`, `y_k = x_k/x_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectiveChart {
    pub index: usize,
}

impl ProjectiveChart {
    fn others(&self, d: usize) -> impl Iterator<Item = usize> + '_ {
        (0..d).filter(move |&k| k != self.index)
    }
}

/// Chart coordinates `(y₀, y_k…)` and the pushed-forward tangent.
pub fn to_projective_chart(x: &[f64], v: &[f64], q: &Quadric, chart: ProjectiveChart) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = q.dim();
    if chart.index >= d || x.len() != d || v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    let x1 = x[chart.index];
    let v1 = v[chart.index];
    if x1 == 0.0 {
        return Err(Error::DegenerateChartPoint { denominator: 0.0 });
    }
    let mut y = vec![1.0 / x1];
    let mut dy = vec![-v1 / (x1 * x1)];
    for k in chart.others(d) {
        y.push(x[k] / x1);
        dy.push((v[k] * x1 - x[k] * v1) / (x1 * x1));
    }
    Ok((y, dy))
}

/// `dr̃² = (−dy₀² + Σ b_k dy_k²) / (b_index² + Σ b_k² y_k²)`.
pub fn projective_chart_metric(y: &[f64], dy: &[f64], q: &Quadric, chart: ProjectiveChart) -> Result<f64> {
    chart_form(y, dy, dy, q, chart)
}

fn chart_form(y: &[f64], a: &[f64], c: &[f64], q: &Quadric, chart: ProjectiveChart) -> Result<f64> {
    let b = q.b();
    let d = q.dim();
    if y.len() != d || a.len() != d || c.len() != d || chart.index >= d {
        return Err(Error::DimensionMismatch { expected: d, found: y.len() });
    }
    let mut den = b[chart.index] * b[chart.index];
    let mut num = -a[0] * c[0];
    for (j, k) in chart.others(d).enumerate() {
        den += b[k] * b[k] * y[j + 1] * y[j + 1];
        num += b[k] * a[j + 1] * c[j + 1];
    }
    if den <= 1e-14 {
        return Err(Error::DegenerateChartPoint { denominator: den });
    }
    Ok(num / den)
}

/// Points of the closure with `y₀ = 0` (the points at infinity of `Q`) in
/// the given chart, found along `count` equally spaced directions in the
/// first two `y_k` coordinates.
pub fn points_at_infinity(q: &Quadric, chart: ProjectiveChart, count: usize) -> Vec<Vec<f64>> {
    let b = q.b();
    let d = q.dim();
    let others: Vec<usize> = chart.others(d).collect();
    let mut out = Vec::new();
    for j in 0..count.max(1) * 4 {
        if out.len() == count {
            break;
        }
        let theta = std::f64::consts::TAU * (j as f64 + 0.5) / (4 * count.max(1)) as f64;
        let mut dir = vec![0.0; others.len()];
        dir[0] = theta.cos();
        if dir.len() > 1 {
            dir[1] = theta.sin();
        }
        let form: f64 = others.iter().zip(&dir).map(|(&k, u)| b[k] * u * u).sum();
        let t2 = -b[chart.index] / form;
        if t2 > 0.0 && t2.is_finite() {
            let t = t2.sqrt();
            let mut y = vec![0.0];
            y.extend(dir.iter().map(|u| t * u));
            out.push(y);
        }
    }
    out
}

/// Residual of the closure equation `b_index + Σ b_k y_k² − y₀² = 0`.
pub fn closure_residual(y: &[f64], q: &Quadric, chart: ProjectiveChart) -> f64 {
    let b = q.b();
    let mut r = b[chart.index] - y[0] * y[0];
    for (j, k) in chart.others(q.dim()).enumerate() {
        r += b[k] * y[j + 1] * y[j + 1];
    }
    r
}

/// Numbers of positive and negative eigenvalues of `dr̃²` on the tangent
/// space of the closure at `y`.
pub fn closure_metric_signature(y: &[f64], q: &Quadric, chart: ProjectiveChart) -> Result<(usize, usize)> {
    let b = q.b();
    let d = q.dim();
    let mut grad = vec![-2.0 * y[0]];
    for (j, k) in chart.others(d).enumerate() {
        grad.push(2.0 * b[k] * y[j + 1]);
    }
    let gn = dot(&grad, &grad).sqrt();
    if gn == 0.0 {
        return Err(Error::DegenerateChartPoint { denominator: 0.0 });
    }
    let normal: Vec<f64> = grad.iter().map(|v| v / gn).collect();
    // Gram–Schmidt of the standard basis against the normal.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut e: Vec<f64> = (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        for u in std::iter::once(&normal).chain(basis.iter()) {
            let c = dot(&e, u);
            e.iter_mut().zip(u).for_each(|(a, w)| *a -= c * w);
        }
        let len = dot(&e, &e).sqrt();
        if len > 1e-8 {
            basis.push(e.iter().map(|v| v / len).collect());
        }
        if basis.len() == d - 1 {
            break;
        }
    }
    let m = basis.len();
    let mut entries = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            entries[i][j] = chart_form(y, &basis[i], &basis[j], q, chart)?;
        }
    }
    let eig = sym_eigen(&SymMatrix::from_rows(&entries)?)?;
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let pos = eig.values.iter().filter(|&&v| v > 1e-12 * scale).count();
    let neg = eig.values.iter().filter(|&&v| v < -1e-12 * scale).count();
    Ok((pos, neg))
}
