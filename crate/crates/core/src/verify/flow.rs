//! Normalized gradient flow `ẋ = ∇f/|∇f|²` of a grid function and the
//! product-metric test in flow coordinates `(θ₀, s) ↦ Υ(θ₀, s)`, where `θ₀`
//! parametrizes the level set `f = 0`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::geometry::{Manifold, WarpProfile};

use super::forms::{differential, sup_on_rings};
use super::{require_surface, VerifyError};

/// Catmull–Rom tensor interpolant of ring data, periodic in `θ`, with
/// linear ghost rings beyond the first and last `t` node.
#[derive(Debug, Clone)]
pub struct GridInterpolant {
    t0: f64,
    h: f64,
    rings: usize,
    points: usize,
    values: Vec<f64>,
    radius: f64,
    warp: WarpProfile,
}

fn cubic(p: [f64; 4], u: f64) -> (f64, f64) {
    let a = -p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3];
    let b = 2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3];
    let c = -p[0] + p[2];
    let d = 2.0 * p[1];
    (
        0.5 * (((a * u + b) * u + c) * u + d),
        0.5 * ((3.0 * a * u + 2.0 * b) * u + c),
    )
}

impl GridInterpolant {
    pub fn new(m: &Manifold, f: &[f64]) -> Result<Self, VerifyError> {
        let radius = require_surface(m)?;
        let g = &m.grid;
        let points = g.ring_size();
        let mut values = Vec::with_capacity(g.rings() * points);
        for i in 0..g.rings() {
            for j in 0..points {
                values.push(f[g.node(i, j)]);
            }
        }
        Ok(GridInterpolant {
            t0: g.t_nodes()[0],
            h: g.h_t(),
            rings: g.rings(),
            points,
            values,
            radius,
            warp: m.spec.warp,
        })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.h * (self.rings - 1) as f64)
    }

    fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.rings as isize;
        let jj = j.rem_euclid(self.points as isize) as usize;
        let get = |i: isize| self.values[i as usize * self.points + jj];
        if i < 0 {
            2.0 * get(0) - get(1)
        } else if i >= n {
            2.0 * get(n - 1) - get(n - 2)
        } else {
            get(i)
        }
    }

    /// `(F, ∂_t F, ∂_θ F)`.
    pub fn eval(&self, t: f64, theta: f64) -> (f64, f64, f64) {
        let x = (t - self.t0) / self.h;
        let i = (x.floor() as isize).clamp(0, self.rings as isize - 2);
        let u = x - i as f64;
        let ht = TAU / self.points as f64;
        let y = theta.rem_euclid(TAU) / ht;
        let j = y.floor() as isize;
        let v = y - j as f64;
        let mut rows = [(0.0, 0.0); 4];
        for (k, row) in rows.iter_mut().enumerate() {
            let ii = i - 1 + k as isize;
            *row = cubic(
                [self.at(ii, j - 1), self.at(ii, j), self.at(ii, j + 1), self.at(ii, j + 2)],
                v,
            );
        }
        let (f, ft) = cubic([rows[0].0, rows[1].0, rows[2].0, rows[3].0], u);
        let (fth, _) = cubic([rows[0].1, rows[1].1, rows[2].1, rows[3].1], u);
        (f, ft / self.h, fth / ht)
    }

    /// `r² w(t)²`.
    pub fn g_theta_theta(&self, t: f64) -> f64 {
        (self.radius * self.warp.value(t)).powi(2)
    }

    pub fn gradient_norm(&self, t: f64, theta: f64) -> f64 {
        let (_, ft, fth) = self.eval(t, theta);
        (ft * ft + fth * fth / self.g_theta_theta(t)).sqrt()
    }

    fn scaled(mut self, c: f64) -> Self {
        self.values.iter_mut().for_each(|x| *x *= c);
        self
    }
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Local error tolerance per step (step doubling).
    pub tol: f64,
    pub initial_step: f64,
    pub critical_threshold: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tol: 1e-12,
            initial_step: 0.05,
            critical_threshold: 1e-8,
        }
    }
}

fn field(f: &GridInterpolant, x: [f64; 2], opts: &FlowOptions) -> Result<[f64; 2], VerifyError> {
    let (lo, hi) = f.t_range();
    if !(x[0] >= lo && x[0] <= hi) {
        return Err(VerifyError::LeftDomain { t: x[0] });
    }
    let (_, ft, fth) = f.eval(x[0], x[1]);
    let gtt = f.g_theta_theta(x[0]);
    let n2 = ft * ft + fth * fth / gtt;
    if n2.sqrt() < opts.critical_threshold {
        return Err(VerifyError::CriticalPoint {
            norm: n2.sqrt(),
            threshold: opts.critical_threshold,
            t: x[0],
            theta: x[1],
        });
    }
    Ok([ft / n2, fth / (gtt * n2)])
}

fn rk4(f: &GridInterpolant, x: [f64; 2], h: f64, opts: &FlowOptions) -> Result<[f64; 2], VerifyError> {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = field(f, x, opts)?;
    let k2 = field(f, add(x, k1, 0.5 * h), opts)?;
    let k3 = field(f, add(x, k2, 0.5 * h), opts)?;
    let k4 = field(f, add(x, k3, h), opts)?;
    Ok([
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Flows `x0 = (t, θ)` for time `s`; `F` increases by exactly `s` along the
/// continuous flow. `θ` is returned unwrapped.
pub fn gradient_flow(
    f: &GridInterpolant,
    x0: [f64; 2],
    s: f64,
    opts: &FlowOptions,
) -> Result<[f64; 2], VerifyError> {
    let mut x = x0;
    let mut done = 0.0;
    let dir = s.signum();
    let mut h = opts.initial_step.min(s.abs());
    while (s - done).abs() > 1e-15 {
        h = h.min((s - done).abs());
        if h < 1e-12 {
            return Err(VerifyError::StepUnderflow { s: done });
        }
        let big = rk4(f, x, dir * h, opts);
        let half = rk4(f, x, 0.5 * dir * h, opts).and_then(|m| rk4(f, m, 0.5 * dir * h, opts));
        let (big, two) = match (big, half) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e @ VerifyError::CriticalPoint { .. }), _) | (_, Err(e @ VerifyError::CriticalPoint { .. })) => {
                return Err(e)
            }
            (Err(e), _) | (_, Err(e)) => {
                if h < 1e-6 {
                    return Err(e);
                }
                h *= 0.5;
                continue;
            }
        };
        let err = ((two[0] - big[0]).powi(2) + (two[1] - big[1]).powi(2)).sqrt() / 15.0;
        if err <= opts.tol {
            x = [two[0] + (two[0] - big[0]) / 15.0, two[1] + (two[1] - big[1]) / 15.0];
            done += dir * h;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 4.0) };
        h *= factor;
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub seeds: usize,
    pub times: Vec<f64>,
    pub tol: f64,
    pub flow: FlowOptions,
    /// Step for the differences in `θ₀` and `s`.
    pub fd_step: f64,
}

impl SplitOptions {
    pub fn with_tol(tol: f64) -> Self {
        SplitOptions {
            seeds: 8,
            times: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            tol,
            flow: FlowOptions::default(),
            fd_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSample {
    pub theta0: f64,
    pub s: f64,
    pub t: f64,
    pub theta: f64,
    pub g_ss: f64,
    pub g_s_theta: f64,
    pub g_theta_theta: f64,
    pub ds_g_theta_theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    /// `f` was divided by this mean of `|df|` before flowing.
    pub normalization: f64,
    pub samples: Vec<SplitSample>,
    /// `max |F(Υ(θ₀, s)) - s|`.
    pub level_residual: f64,
    pub defect_g_ss: f64,
    pub defect_g_s_theta: f64,
    pub defect_ds_g_theta_theta: f64,
    /// Distinct seeds stayed distinct at every sampled time.
    pub injective: bool,
    pub tol: f64,
    pub passed: bool,
}

/// Point of `F = level` on the ray `θ = theta`, by bracketing on the rings
/// and bisection on the interpolant.
pub fn level_point(f: &GridInterpolant, level: f64, theta: f64) -> Result<f64, VerifyError> {
    let (lo, hi) = f.t_range();
    let n = f.rings;
    let g = |t: f64| f.eval(t, theta).0 - level;
    let mut prev = (lo, g(lo));
    for k in 1..n {
        let t = (lo + k as f64 * f.h).min(hi);
        let cur = (t, g(t));
        if prev.1 == 0.0 {
            return Ok(prev.0);
        }
        if prev.1.signum() != cur.1.signum() {
            let (mut a, mut b) = (prev, cur);
            for _ in 0..200 {
                let mid = 0.5 * (a.0 + b.0);
                let gm = g(mid);
                if gm == 0.0 || (b.0 - a.0) < 1e-15 {
                    return Ok(mid);
                }
                if gm.signum() == a.1.signum() {
                    a = (mid, gm);
                } else {
                    b = (mid, gm);
                }
            }
            return Ok(0.5 * (a.0 + b.0));
        }
        prev = cur;
    }
    Err(VerifyError::NoLevelPoint { level, theta })
}

/// Flow coordinates over `f = 0` and the defects of the pulled-back metric
/// from `ds² + g_θθ(θ₀) dθ₀²`.
pub fn split_check(m: &Manifold, f: &[f64], opts: &SplitOptions) -> Result<SplitReport, VerifyError> {
    let gamma = differential(m, f)?;
    let (mut count, mut sum) = (0usize, 0.0);
    sup_on_rings(m, |v, _| {
        sum += gamma.norm[v];
        count += 1;
        0.0
    });
    let normalization = sum / count as f64;
    if !(normalization > opts.flow.critical_threshold) {
        return Err(VerifyError::CriticalPoint {
            norm: normalization,
            threshold: opts.flow.critical_threshold,
            t: 0.0,
            theta: 0.0,
        });
    }
    let interp = GridInterpolant::new(m, f)?.scaled(1.0 / normalization);
    let d = opts.fd_step;
    let flow_from = |theta0: f64, s: f64| -> Result<[f64; 2], VerifyError> {
        let t0 = level_point(&interp, 0.0, theta0)?;
        if s == 0.0 {
            return Ok([t0, theta0]);
        }
        gradient_flow(&interp, [t0, theta0], s, &opts.flow)
    };
    let metric_at = |x: [f64; 2], e: [f64; 2]| -> f64 { e[0] * e[0] + interp.g_theta_theta(x[0]) * e[1] * e[1] };

    let mut samples = Vec::new();
    let mut level_residual = 0.0f64;
    for k in 0..opts.seeds {
        let theta0 = TAU * k as f64 / opts.seeds as f64;
        for &s in &opts.times {
            let x = flow_from(theta0, s)?;
            level_residual = level_residual.max((interp.eval(x[0], x[1]).0 - s).abs());
            let v = field(&interp, x, &opts.flow)?;
            let tangent = |s: f64| -> Result<([f64; 2], [f64; 2]), VerifyError> {
                let p = flow_from(theta0 + d, s)?;
                let q = flow_from(theta0 - d, s)?;
                let mid = flow_from(theta0, s)?;
                Ok((mid, [(p[0] - q[0]) / (2.0 * d), (p[1] - q[1]) / (2.0 * d)]))
            };
            let (_, e) = tangent(s)?;
            let (xp, ep) = tangent(s + d)?;
            let (xm, em) = tangent(s - d)?;
            let g_ss = metric_at(x, v);
            let g_s_theta = v[0] * e[0] + interp.g_theta_theta(x[0]) * v[1] * e[1];
            samples.push(SplitSample {
                theta0,
                s,
                t: x[0],
                theta: x[1],
                g_ss,
                g_s_theta,
                g_theta_theta: metric_at(x, e),
                ds_g_theta_theta: (metric_at(xp, ep) - metric_at(xm, em)) / (2.0 * d),
            });
        }
    }
    let defect = |f: &dyn Fn(&SplitSample) -> f64| samples.iter().map(f).fold(0.0f64, f64::max);
    let defect_g_ss = defect(&|s| (s.g_ss - 1.0).abs());
    let defect_g_s_theta = defect(&|s| s.g_s_theta.abs());
    let defect_ds_g_theta_theta = defect(&|s| s.ds_g_theta_theta.abs());
    let injective = opts.times.iter().all(|&s| {
        let pts: Vec<&SplitSample> = samples.iter().filter(|x| x.s == s).collect();
        pts.iter().enumerate().all(|(a, p)| {
            pts[a + 1..].iter().all(|q| {
                let dth = (p.theta - q.theta).rem_euclid(TAU);
                (p.t - q.t).abs() > 1e-9 || dth.min(TAU - dth) > 1e-9
            })
        })
    });
    let passed = defect_g_ss <= opts.tol
        && defect_g_s_theta <= opts.tol
        && defect_ds_g_theta_theta <= opts.tol
        && injective;
    Ok(SplitReport {
        normalization,
        samples,
        level_residual,
        defect_g_ss,
        defect_g_s_theta,
        defect_ds_g_theta_theta,
        injective,
        tol: opts.tol,
        passed,
    })
}
