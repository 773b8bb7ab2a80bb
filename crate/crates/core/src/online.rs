//! The interface between online algorithms and the job sources that drive them.

use crate::error::Result;
use crate::model::{Decision, Job};

/// An online algorithm that must decide on each job as it is submitted.
///
/// Jobs arrive in nondecreasing release order; the call advances the
/// algorithm's clock to the job's release before deciding.
pub trait OnlinePolicy {
    fn offer(&mut self, job: &Job) -> Result<Decision>;
}

impl<P: OnlinePolicy + ?Sized> OnlinePolicy for &mut P {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        (**self).offer(job)
    }
}

/// A job source that chooses its next submission from the decisions so far.
pub trait AdaptiveAdversary {
    /// The next job, or `None` once the sequence is over.
    fn next_job(&mut self) -> Option<Job>;
    /// Feedback for the job most recently returned by `next_job`.
    fn observe(&mut self, decision: &Decision);
}

/// Runs `adversary` against `policy` until the adversary stops. Returns the
/// realized job sequence and the decision for each job.
pub fn replay<A, P>(adversary: &mut A, policy: &mut P) -> Result<(Vec<Job>, Vec<Decision>)>
where
    A: AdaptiveAdversary + ?Sized,
    P: OnlinePolicy + ?Sized,
{
    let mut jobs = Vec::new();
    let mut decisions = Vec::new();
    while let Some(job) = adversary.next_job() {
        let decision = policy.offer(&job)?;
        adversary.observe(&decision);
        jobs.push(job);
        decisions.push(decision);
    }
    Ok((jobs, decisions))
}
