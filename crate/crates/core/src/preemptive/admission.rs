//! Admission rules for the preemptive simulator.

use crate::error::{Error, Result};
use crate::model::{Job, Time, TOL};
use crate::vmin::{f_threshold, horn_feasible, v_min_curve, v_shape, ActiveJob};

/// `a <= b` up to a tolerance that grows with the magnitude of the operands.
pub(crate) fn scaled_le(a: f64, b: f64) -> bool {
    a <= b + TOL * (1.0 + a.abs().max(b.abs()))
}

/// An acceptance rule. `admit` is called at the job's release with the
/// accepted, unfinished jobs and must not mutate anything but its own state.
pub trait Admission {
    fn name(&self) -> &'static str;

    /// Returns whether `job` is accepted and the threshold it was compared
    /// against, if the rule uses one.
    fn admit(
        &mut self,
        active: &[ActiveJob],
        t: Time,
        machines: usize,
        job: &Job,
    ) -> Result<(bool, Option<Time>)>;

    fn threshold(&self) -> Option<Time> {
        None
    }

    fn compensation(&self) -> Option<f64> {
        None
    }

    /// Checks the rule's own invariants for the state at time `t`.
    fn check(&self, _active: &[ActiveJob], _t: Time, _machines: usize) -> Result<()> {
        Ok(())
    }
}

/// Lazy acceptance with the deadline threshold `d_min` and compensation
/// volume `V_Δ`.
#[derive(Debug, Clone)]
pub struct LazyAcceptance {
    machines: usize,
    epsilon: f64,
    f: f64,
    d_min: Time,
    v_delta: f64,
}

impl LazyAcceptance {
    pub fn new(machines: usize, epsilon: f64) -> Self {
        LazyAcceptance {
            machines,
            epsilon,
            f: f_threshold(machines, epsilon),
            d_min: 0.0,
            v_delta: 0.0,
        }
    }

    pub fn d_min(&self) -> Time {
        self.d_min
    }

    pub fn v_delta(&self) -> f64 {
        self.v_delta
    }
}

/// Largest `τ ≥ t` with `(τ − t)·f = V_min(τ)|_t + v_delta`, found by solving
/// the linear equation on each segment of the curve from the right.
pub fn solve_dmin(active: &[ActiveJob], t: Time, f: f64, v_delta: f64) -> Result<Time> {
    let curve = v_min_curve(active, t);
    let segments: Vec<_> = curve.segments().collect();
    for &(a, va, slope, b) in segments.iter().rev() {
        let ga = (a - t) * f - va - v_delta;
        if ga <= TOL {
            let rise = f - f64::from(slope);
            let root = if rise > 0.0 { a + (-ga).max(0.0) / rise } else { a };
            return Ok(root.min(b));
        }
    }
    Err(Error::invariant(
        t,
        format!("no crossing for the d_min equation (f={f}, V_delta={v_delta})"),
    ))
}

impl Admission for LazyAcceptance {
    fn name(&self) -> &'static str {
        "alg1+2"
    }

    fn admit(
        &mut self,
        active: &[ActiveJob],
        t: Time,
        _machines: usize,
        job: &Job,
    ) -> Result<(bool, Option<Time>)> {
        self.d_min = self.d_min.max(t);
        let curve = v_min_curve(active, t);
        self.v_delta = (self.d_min - t) * self.f - curve.eval(self.d_min);
        if !scaled_le(0.0, self.v_delta) {
            return Err(Error::invariant(
                t,
                format!("V_delta = {} is negative", self.v_delta),
            ));
        }
        let threshold = self.d_min;
        if job.deadline < threshold - TOL {
            return Ok((false, Some(threshold)));
        }
        let mut with_job = active.to_vec();
        with_job.push(ActiveJob::new(job.id, job.processing, job.deadline));
        self.d_min = solve_dmin(&with_job, t, self.f, self.v_delta)?;
        Ok((true, Some(threshold)))
    }

    fn threshold(&self) -> Option<Time> {
        Some(self.d_min)
    }

    fn compensation(&self) -> Option<f64> {
        Some(self.v_delta)
    }

    /// The two envelope bounds on `V_min`: below `d_min` by the scaled shape
    /// function, beyond it by the line of slope `f(m, ε)`.
    fn check(&self, active: &[ActiveJob], t: Time, _machines: usize) -> Result<()> {
        let d = self.d_min.max(t);
        let curve = v_min_curve(active, t);
        let at_d = curve.eval(d);
        for (&tau, &v) in curve.breakpoints().iter().zip(curve.values()) {
            if tau >= d {
                let bound = at_d + (tau - d) * self.f;
                if !scaled_le(v, bound) {
                    return Err(Error::invariant(
                        t,
                        format!("V_min({tau}) = {v} exceeds the line bound {bound} beyond d_min = {d}"),
                    ));
                }
            }
        }
        if d > t {
            let span = d - t;
            let probes = curve
                .breakpoints()
                .iter()
                .copied()
                .filter(|&tau| tau > t && tau < d)
                .chain(std::iter::once(d));
            for tau in probes {
                let v = curve.eval(tau);
                let bound = span * v_shape((tau - t) / span, self.machines, self.epsilon);
                if !scaled_le(v, bound) {
                    return Err(Error::invariant(
                        t,
                        format!("V_min({tau}) = {v} exceeds the shape bound {bound} below d_min = {d}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Accepts a job whenever the accepted set stays feasible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Admission for Greedy {
    fn name(&self) -> &'static str {
        "greedy-p"
    }

    fn admit(
        &mut self,
        active: &[ActiveJob],
        t: Time,
        machines: usize,
        job: &Job,
    ) -> Result<(bool, Option<Time>)> {
        let mut with_job = active.to_vec();
        with_job.push(ActiveJob::new(job.id, job.processing, job.deadline));
        Ok((horn_feasible(&with_job, t, machines), None))
    }
}

/// Accepts everything. Only meaningful for job sets known to be feasible.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl Admission for AcceptAll {
    fn name(&self) -> &'static str {
        "accept-all"
    }

    fn admit(
        &mut self,
        _active: &[ActiveJob],
        _t: Time,
        _machines: usize,
        _job: &Job,
    ) -> Result<(bool, Option<Time>)> {
        Ok((true, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aj(id: usize, rem: f64, d: f64) -> ActiveJob {
        ActiveJob::new(id, rem, d)
    }

    // Oracle: the largest grid point where the sign of the residual changes.
    fn scan_largest_root(active: &[ActiveJob], t: f64, f: f64, vd: f64) -> f64 {
        let g = |tau: f64| (tau - t) * f - crate::vmin::v_min(active, t, tau).unwrap() - vd;
        let step = 1e-4;
        let mut tau = t + 200.0;
        while tau > t {
            if g(tau - step) <= 0.0 {
                return tau - step;
            }
            tau -= step;
        }
        t
    }

    #[test]
    fn solve_dmin_examples() {
        let f = f_threshold(1, 1.0);
        assert!((solve_dmin(&[aj(0, 1.0, 2.0)], 0.0, f, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(solve_dmin(&[], 3.0, f, 0.0).unwrap(), 3.0);
        let two = [aj(0, 1.0, 2.0), aj(1, 1.0, 2.0)];
        assert!((solve_dmin(&two, 0.0, f, 0.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((scan_largest_root(&two, 0.0, f, 0.0) - 4.0).abs() < 1e-3);
    }

    #[test]
    fn solve_dmin_matches_scan() {
        let cases = [
            (vec![aj(0, 2.0, 7.0), aj(1, 0.5, 3.0), aj(2, 3.0, 4.5)], 0.5, 2, 0.5, 0.3),
            (vec![aj(0, 1.0, 3.0), aj(1, 4.0, 12.0)], 1.0, 1, 0.2, 0.0),
            (vec![aj(0, 1.0, 2.5), aj(1, 1.0, 2.5), aj(2, 1.0, 2.5)], 0.0, 3, 1.0, 1.0),
        ];
        for (active, t, m, eps, vd) in cases {
            let f = f_threshold(m, eps);
            let exact = solve_dmin(&active, t, f, vd).unwrap();
            let scanned = scan_largest_root(&active, t, f, vd);
            assert!((exact - scanned).abs() < 2e-4, "exact {exact} scanned {scanned}");
        }
    }

    #[test]
    fn lazy_rejects_early_deadline() {
        let mut lazy = LazyAcceptance::new(1, 1.0);
        let j0 = Job::new(0, 0.0, 1.0, 2.0);
        assert_eq!(lazy.admit(&[], 0.0, 1, &j0).unwrap(), (true, Some(0.0)));
        assert!((lazy.d_min() - 2.0).abs() < 1e-12);
        let j1 = Job::new(1, 0.0, 0.4, 1.3);
        let (ok, thr) = lazy.admit(&[aj(0, 1.0, 2.0)], 0.0, 1, &j1).unwrap();
        assert!(!ok);
        assert!((thr.unwrap() - 2.0).abs() < 1e-12);
        assert!((lazy.d_min() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lazy_accepts_at_threshold() {
        let mut lazy = LazyAcceptance::new(1, 1.0);
        lazy.admit(&[], 0.0, 1, &Job::new(0, 0.0, 1.0, 2.0)).unwrap();
        let (ok, _) = lazy
            .admit(&[aj(0, 1.0, 2.0)], 0.0, 1, &Job::new(1, 0.0, 1.0, 2.0))
            .unwrap();
        assert!(ok);
        assert!((lazy.d_min() - 4.0).abs() < 1e-12);
        assert!(lazy.v_delta().abs() < 1e-12);
    }

    #[test]
    fn greedy_accepts_what_fits() {
        let mut g = Greedy;
        let (ok, _) = g
            .admit(&[aj(0, 1.0, 2.0)], 0.0, 1, &Job::new(1, 0.0, 0.4, 1.3))
            .unwrap();
        assert!(ok);
        let (ok, _) = g
            .admit(&[aj(0, 1.0, 1.0)], 0.0, 1, &Job::new(1, 0.0, 0.5, 1.0))
            .unwrap();
        assert!(!ok);
    }
}
