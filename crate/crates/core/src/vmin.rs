//! The minimum-volume aggregation `V_min(τ)|_t`, Horn's preemptive
//! feasibility test, the threshold constant `f(m, ε)` and the shape
//! function `V(x)` used to state the acceptance invariants.

use crate::error::{Error, Result};
use crate::model::{approx_le, Time, TOL};

/// An accepted, not yet completed job as seen at some time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveJob {
    pub id: usize,
    pub remaining: f64,
    pub deadline: Time,
}

impl ActiveJob {
    pub fn new(id: usize, remaining: f64, deadline: Time) -> Self {
        ActiveJob {
            id,
            remaining,
            deadline,
        }
    }

    pub fn latest_start(&self) -> Time {
        self.deadline - self.remaining
    }

    /// This job's summand of `V_min(tau)`: the part of it that must run before `tau`.
    pub fn contribution(&self, tau: Time) -> f64 {
        (tau - self.latest_start()).clamp(0.0, self.remaining.max(0.0))
    }
}

/// Minimum volume of `active` that any valid schedule executes in `[t, tau)`.
pub fn v_min(active: &[ActiveJob], t: Time, tau: Time) -> Result<f64> {
    if tau < t - TOL {
        return Err(Error::InvalidArgument(format!(
            "v_min evaluated at tau={tau} before t={t}"
        )));
    }
    Ok(active.iter().map(|j| j.contribution(tau)).sum())
}

/// Continuous, nondecreasing piecewise-linear function on `[origin, ∞)`.
///
/// `slopes[0]` applies on `[origin, breakpoints[0])`, `slopes[i]` on
/// `[breakpoints[i-1], breakpoints[i])` and the last entry beyond the final
/// breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    origin: Time,
    origin_value: f64,
    breakpoints: Vec<Time>,
    slopes: Vec<u32>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn origin(&self) -> Time {
        self.origin
    }

    pub fn breakpoints(&self) -> &[Time] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[u32] {
        &self.slopes
    }

    /// Function value at each breakpoint.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, tau: Time) -> f64 {
        // index of the first breakpoint strictly greater than tau
        let idx = self.breakpoints.partition_point(|&b| b <= tau);
        let (base_t, base_v) = if idx == 0 {
            (self.origin, self.origin_value)
        } else {
            (self.breakpoints[idx - 1], self.values[idx - 1])
        };
        base_v + f64::from(self.slopes[idx]) * (tau - base_t)
    }

    /// `(start, value at start, slope, end)` for every segment, in order. The
    /// last segment ends at infinity.
    pub fn segments(&self) -> impl Iterator<Item = (Time, f64, u32, Time)> + '_ {
        let starts = std::iter::once((self.origin, self.origin_value)).chain(
            self.breakpoints
                .iter()
                .copied()
                .zip(self.values.iter().copied()),
        );
        let ends = self
            .breakpoints
            .iter()
            .copied()
            .chain(std::iter::once(f64::INFINITY));
        starts
            .zip(self.slopes.iter().copied())
            .zip(ends)
            .map(|(((s, v), k), e)| (s, v, k, e))
    }
}

/// Exact piecewise-linear form of `tau ↦ V_min(tau)|_t`.
pub fn v_min_curve(active: &[ActiveJob], t: Time) -> PiecewiseLinear {
    let jobs: Vec<&ActiveJob> = active.iter().filter(|j| j.remaining > 0.0).collect();
    let mut breakpoints: Vec<Time> = jobs
        .iter()
        .flat_map(|j| [j.latest_start().max(t), j.deadline.max(t)])
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let origin_value: f64 = jobs.iter().map(|j| j.contribution(t)).sum();
    let mut slopes = Vec::with_capacity(breakpoints.len() + 1);
    let mut left = t;
    for &right in breakpoints.iter().chain(std::iter::once(&f64::INFINITY)) {
        let k = jobs
            .iter()
            .filter(|j| j.latest_start().max(t) <= left && j.deadline >= right)
            .count();
        slopes.push(k as u32);
        left = right;
    }
    let mut values = Vec::with_capacity(breakpoints.len());
    let mut prev_t = t;
    let mut prev_v = origin_value;
    for (i, &b) in breakpoints.iter().enumerate() {
        prev_v += f64::from(slopes[i]) * (b - prev_t);
        values.push(prev_v);
        prev_t = b;
    }
    PiecewiseLinear {
        origin: t,
        origin_value,
        breakpoints,
        slopes,
        values,
    }
}

/// Horn's criterion: a valid preemptive schedule of `active` from `t` on
/// `machines` identical machines exists iff every job fits its own window and
/// `V_min(tau)|_t <= (tau - t)·m` for all `tau`. Piecewise linearity of both
/// sides means the breakpoints suffice.
pub fn horn_feasible(active: &[ActiveJob], t: Time, machines: usize) -> bool {
    if active
        .iter()
        .any(|j| j.remaining > 0.0 && !approx_le(t + j.remaining, j.deadline))
    {
        return false;
    }
    let curve = v_min_curve(active, t);
    let m = machines as f64;
    curve
        .breakpoints()
        .iter()
        .zip(curve.values())
        .all(|(&tau, &v)| approx_le(v, (tau - t) * m))
}

/// `(1+ε)/ε`, the growth base used throughout.
#[inline]
pub fn growth(epsilon: f64) -> f64 {
    (1.0 + epsilon) / epsilon
}

/// `f(m, ε) = 1 / ((1+ε)·(((1+ε)/ε)^{1/m} − 1))`.
pub fn f_threshold(machines: usize, epsilon: f64) -> f64 {
    let m = machines as f64;
    // exp_m1 keeps the small difference accurate for large m
    let root_minus_one = (growth(epsilon).ln() / m).exp_m1();
    1.0 / ((1.0 + epsilon) * root_minus_one)
}

/// Sum form of `f(m, ε)`: `ε/(1+ε) · Σ_{j<m} ((1+ε)/ε)^{j/m}`.
pub fn f_threshold_sum(machines: usize, epsilon: f64) -> f64 {
    let m = machines as f64;
    let q = growth(epsilon);
    let sum: f64 = (0..machines).map(|j| q.powf(j as f64 / m)).sum();
    epsilon / (1.0 + epsilon) * sum
}

/// The shape function `V(x)` bounding `V_min` below `d_min`.
///
/// Linear with slope `m` up to `ε/(1+ε)`, then concave with slopes
/// `m-1, m-2, …, 0` on the geometric grid `(ε/(1+ε))^{(m-h)/m}`, and
/// `x·f(m, ε)` from 1 onwards.
pub fn v_shape(x: f64, machines: usize, epsilon: f64) -> f64 {
    let m = machines as f64;
    let a = epsilon / (1.0 + epsilon);
    if x >= 1.0 {
        return x * f_threshold(machines, epsilon);
    }
    if x <= a {
        return x.max(0.0) * m;
    }
    let branch = |h: usize| -> f64 {
        let head: f64 = (0..=h).map(|i| a.powf((m - i as f64) / m)).sum();
        head + x * (m - h as f64 - 1.0)
    };
    let s = m * (1.0 + x.ln() / growth(epsilon).ln());
    let h = (s.floor().max(0.0) as usize).min(machines - 1);
    let nearest = s.round();
    if (s - nearest).abs() < 1e-9 && nearest >= 1.0 && (nearest as usize) < machines {
        let k = nearest as usize;
        return branch(k - 1).max(branch(k));
    }
    branch(h)
}
