//! Plan generation: preallocation of the earliest deadline classes plus
//! LRPT on the remaining machines, realized as constant-rate windows.

use crate::error::{Error, Result};
use crate::model::{Segment, Time};
use crate::vmin::ActiveJob;

/// Remaining work or contribution at or below this is treated as zero.
pub const DONE_TOL: f64 = 1e-10;
/// Contributions closer than this share one LRPT level.
const TIE_TOL: f64 = 1e-11;

/// A set of jobs sharing `machines` machines evenly for the whole window.
/// A single job with one machine runs at full speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub jobs: Vec<usize>,
    pub machines: usize,
}

impl Allocation {
    /// Execution rate of each member job.
    pub fn rate(&self) -> f64 {
        self.machines as f64 / self.jobs.len() as f64
    }
}

/// Constant-rate plan over `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanWindow {
    pub start: Time,
    pub end: Time,
    pub allocations: Vec<Allocation>,
}

impl PlanWindow {
    pub fn rate_of(&self, job: usize) -> f64 {
        self.allocations
            .iter()
            .find(|a| a.jobs.contains(&job))
            .map_or(0.0, Allocation::rate)
    }

    /// Segments executed if the plan runs over `[start, until)`, `until`
    /// clipped to the window. Each allocation is packed McNaughton-style onto
    /// its own block of machines, so a cut at any time is exact sharing.
    pub fn realize(&self, until: Time) -> Vec<Segment> {
        let end = until.min(self.end);
        let mut out = Vec::new();
        if end <= self.start {
            return out;
        }
        let mut first_machine = 0;
        for alloc in &self.allocations {
            let share = (end - self.start) * alloc.rate();
            wrap_around(
                &alloc.jobs,
                share,
                first_machine,
                self.start,
                end,
                &mut out,
            );
            first_machine += alloc.machines;
        }
        out
    }
}

/// McNaughton's wrap-around rule: each of `jobs` receives `share` time units
/// on the machines starting at `first_machine`, within `[start, end)`.
/// `share` must not exceed `end - start`.
fn wrap_around(
    jobs: &[usize],
    share: f64,
    first_machine: usize,
    start: Time,
    end: Time,
    out: &mut Vec<Segment>,
) {
    let mut machine = first_machine;
    let mut cursor = start;
    for &job in jobs {
        let mut left = share;
        while left > 0.0 {
            let room = end - cursor;
            if room <= 0.0 {
                machine += 1;
                cursor = start;
                continue;
            }
            let piece = left.min(room);
            let seg_end = if piece == room { end } else { cursor + piece };
            out.push(Segment {
                machine,
                job,
                start: cursor,
                end: seg_end,
            });
            left -= piece;
            cursor = seg_end;
            if left <= TIE_TOL {
                break;
            }
        }
    }
}

/// One LRPT phase: which jobs run at which rate on `machines` machines until
/// the first rank change or exhaustion, and how long that takes.
fn lrpt_phase(volumes: &[(usize, f64)], machines: usize) -> (Vec<Allocation>, f64) {
    let mut sorted: Vec<(usize, f64)> = volumes
        .iter()
        .copied()
        .filter(|&(_, v)| v > DONE_TOL)
        .collect();
    if sorted.is_empty() || machines == 0 {
        return (Vec::new(), f64::INFINITY);
    }
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    // levels of (near-)equal volume, largest first
    let mut levels: Vec<(f64, Vec<usize>)> = Vec::new();
    for (id, v) in sorted {
        match levels.last_mut() {
            Some((lv, ids)) if *lv - v <= TIE_TOL => ids.push(id),
            _ => levels.push((v, vec![id])),
        }
    }

    let mut allocations = Vec::new();
    let mut rates = Vec::with_capacity(levels.len());
    let mut free = machines;
    for (_, ids) in &levels {
        if free == 0 {
            rates.push(0.0);
        } else if ids.len() <= free {
            for &id in ids {
                allocations.push(Allocation {
                    jobs: vec![id],
                    machines: 1,
                });
            }
            free -= ids.len();
            rates.push(1.0);
        } else {
            allocations.push(Allocation {
                jobs: ids.clone(),
                machines: free,
            });
            rates.push(free as f64 / ids.len() as f64);
            free = 0;
        }
    }

    let mut len = f64::INFINITY;
    for i in 0..levels.len() {
        let (v, r) = (levels[i].0, rates[i]);
        if r > 0.0 {
            len = len.min(v / r);
        }
        if i + 1 < levels.len() {
            let (w, s) = (levels[i + 1].0, rates[i + 1]);
            if r > s {
                len = len.min((v - w) / (r - s));
            }
        }
    }
    (allocations, len)
}

/// Longest-remaining-processing-time schedule of `volumes` on `machines`
/// machines (numbered from 0) over `[start, end)`. Equal volumes share
/// machines through wrap-around splitting.
pub fn lrpt_assign(
    volumes: &[(usize, f64)],
    machines: usize,
    start: Time,
    end: Time,
) -> Vec<Segment> {
    let mut left: Vec<(usize, f64)> = volumes.to_vec();
    let mut out = Vec::new();
    let mut t = start;
    while end - t > DONE_TOL {
        let (allocations, len) = lrpt_phase(&left, machines);
        if allocations.is_empty() {
            break;
        }
        let phase_end = if t + len >= end { end } else { t + len };
        let window = PlanWindow {
            start: t,
            end: phase_end,
            allocations,
        };
        for (id, v) in left.iter_mut() {
            *v -= window.rate_of(*id) * (phase_end - t);
        }
        out.extend(window.realize(phase_end));
        t = phase_end;
    }
    out
}

/// Builds the next constant-rate plan for `active` at time `t`.
///
/// Deadline classes `d_1 < d_2 < …` beyond `t` are scanned for the latest
/// one whose minimum volume comes from at most `m` jobs. Those jobs each get
/// a dedicated machine until the smallest of their contributions is done;
/// idle machines run LRPT over the contributions to the next class. With no
/// such class, LRPT runs over the contributions to `d_1` until `d_1`.
/// The window is cut at the first LRPT rank change so the plan is
/// constant-rate. Returns `None` when nothing is left to run.
pub fn generate_plan(active: &[ActiveJob], t: Time, machines: usize) -> Result<Option<PlanWindow>> {
    let live: Vec<&ActiveJob> = active.iter().filter(|j| j.remaining > DONE_TOL).collect();
    if live.is_empty() {
        return Ok(None);
    }
    if let Some(late) = live.iter().find(|j| j.deadline <= t) {
        return Err(Error::invariant(
            t,
            format!(
                "job {} has {} left at or after its deadline {}",
                late.id, late.remaining, late.deadline
            ),
        ));
    }
    let mut deadlines: Vec<Time> = live.iter().map(|j| j.deadline).collect();
    deadlines.sort_by(f64::total_cmp);
    deadlines.dedup();

    let contributions = |d: Time| -> Vec<(usize, f64)> {
        live.iter()
            .map(|j| (j.id, j.contribution(d)))
            .filter(|&(_, c)| c > DONE_TOL)
            .collect()
    };

    // contributor counts are nondecreasing in the deadline, so the classes
    // with at most m contributors form a prefix
    let k = deadlines
        .iter()
        .take_while(|&&d| contributions(d).len() <= machines)
        .count();

    let (mut allocations, end) = if k == 0 {
        let (allocs, len) = lrpt_phase(&contributions(deadlines[0]), machines);
        (allocs, (t + len).min(deadlines[0]))
    } else {
        let dk = deadlines[k - 1];
        let dedicated = contributions(dk);
        let shortest = dedicated
            .iter()
            .map(|&(_, c)| c)
            .fold(f64::INFINITY, f64::min);
        let mut allocs: Vec<Allocation> = dedicated
            .iter()
            .map(|&(id, _)| Allocation {
                jobs: vec![id],
                machines: 1,
            })
            .collect();
        let mut end = t + shortest;
        let idle = machines - dedicated.len();
        if k < deadlines.len() && idle > 0 {
            let next: Vec<(usize, f64)> = contributions(deadlines[k])
                .into_iter()
                .filter(|(id, _)| !dedicated.iter().any(|(d, _)| d == id))
                .collect();
            let (lrpt, len) = lrpt_phase(&next, idle);
            allocs.extend(lrpt);
            end = end.min(t + len);
        }
        (allocs, end)
    };
    if end <= t {
        return Err(Error::invariant(t, "plan window has no length"));
    }
    allocations.retain(|a| !a.jobs.is_empty());
    if end.is_infinite() {
        return Err(Error::invariant(t, "plan window is unbounded"));
    }
    Ok(Some(PlanWindow {
        start: t,
        end,
        allocations,
    }))
}
