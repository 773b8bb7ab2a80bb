//! Exact offline optima for small instances.
//!
//! Preemptive feasibility with release dates is a max-flow question: jobs
//! send their processing time into the elementary intervals of their
//! windows, each interval can absorb `m` times its length. The preemptive
//! optimum is the heaviest flow-feasible subset. The non-preemptive optimum
//! comes from a dynamic program over subsets and machines.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{Instance, Job, Time, TOL};

/// Largest instance the preemptive oracle accepts.
pub const PREEMPTIVE_LIMIT: usize = 16;
/// Largest instance the non-preemptive oracle accepts.
pub const NONPREEMPTIVE_LIMIT: usize = 16;

const FLOW_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Dinic's algorithm on a small dense graph with `f64` capacities.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if self.edges[e].cap > FLOW_EPS && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn push(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.edges[e].to;
            if self.edges[e].cap > FLOW_EPS && level[v] == level[u] + 1 {
                let pushed = self.push(v, t, limit.min(self.edges[e].cap), level, next);
                if pushed > FLOW_EPS {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.push(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}

/// Maximum volume of `jobs` that `machines` machines can process, with each
/// job confined to its window and to at most one machine at a time.
pub fn max_flow_value(jobs: &[Job], machines: usize) -> f64 {
    let jobs: Vec<&Job> = jobs.iter().filter(|j| j.deadline > j.release).collect();
    if jobs.is_empty() {
        return 0.0;
    }
    let mut points: Vec<Time> = jobs.iter().flat_map(|j| [j.release, j.deadline]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let n = jobs.len();
    let k = points.len() - 1;
    let (source, sink) = (0, n + k + 1);
    let mut net = FlowNetwork::new(n + k + 2);
    for (i, job) in jobs.iter().enumerate() {
        net.add_edge(source, 1 + i, job.processing);
        for (w, pair) in points.windows(2).enumerate() {
            if pair[0] >= job.release && pair[1] <= job.deadline {
                net.add_edge(1 + i, 1 + n + w, pair[1] - pair[0]);
            }
        }
    }
    for (w, pair) in points.windows(2).enumerate() {
        net.add_edge(1 + n + w, sink, machines as f64 * (pair[1] - pair[0]));
    }
    net.max_flow(source, sink)
}

/// Whether all of `jobs` fit preemptively on `machines` machines.
pub fn flow_feasible(jobs: &[Job], machines: usize) -> bool {
    let demand: f64 = jobs.iter().map(|j| j.processing).sum();
    max_flow_value(jobs, machines) >= demand - TOL * (1.0 + demand)
}

/// Largest volume of `jobs` any schedule can execute inside `[0, t)`.
///
/// When `jobs` is feasible as a whole this is also the most any schedule
/// completing all of them can execute before `t`: augmenting paths never
/// reduce the flow into the sink, so a maximum flow restricted to the
/// intervals before `t` extends to a full one.
pub fn max_volume_before(jobs: &[Job], machines: usize, t: Time) -> f64 {
    let clipped: Vec<Job> = jobs
        .iter()
        .filter(|j| j.release < t)
        .map(|j| Job {
            deadline: j.deadline.min(t),
            ..*j
        })
        .collect();
    max_flow_value(&clipped, machines)
}

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::OracleUnavailable { n, limit });
    }
    Ok(())
}

/// Volume of every subset, indexed by bitmask, each built from the subset
/// without its lowest job.
fn subset_volumes(jobs: &[Job]) -> Vec<f64> {
    let mut volume = vec![0.0; 1 << jobs.len()];
    for mask in 1..volume.len() {
        let low = mask.trailing_zeros() as usize;
        volume[mask] = volume[mask & (mask - 1)] + jobs[low].processing;
    }
    volume
}

fn subset(jobs: &[Job], mask: usize) -> Vec<Job> {
    (0..jobs.len())
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| jobs[b])
        .collect()
}

/// Heaviest preemptively feasible subset, as job ids, and its volume.
pub fn best_preemptive_subset(instance: &Instance) -> Result<(Vec<usize>, f64)> {
    let n = instance.jobs.len();
    check_size(n, PREEMPTIVE_LIMIT)?;
    let jobs = &instance.jobs;
    if flow_feasible(jobs, instance.machines) {
        return Ok((jobs.iter().map(|j| j.id).collect(), instance.total_processing()));
    }
    let volume = subset_volumes(jobs);
    let mut order: Vec<usize> = (0..volume.len()).collect();
    order.sort_by(|&a, &b| volume[b].total_cmp(&volume[a]).then(a.cmp(&b)));
    // a superset of an infeasible set is infeasible
    let mut infeasible: Vec<usize> = Vec::new();
    for mask in order {
        if infeasible.iter().any(|&bad| bad & !mask == 0) {
            continue;
        }
        let chosen = subset(jobs, mask);
        if flow_feasible(&chosen, instance.machines) {
            return Ok((chosen.iter().map(|j| j.id).collect(), volume[mask]));
        }
        if infeasible.len() < 256 {
            infeasible.push(mask);
        }
    }
    Ok((Vec::new(), 0.0))
}

/// Maximum accepted volume over all preemptive schedules.
pub fn opt_preemptive(instance: &Instance) -> Result<f64> {
    best_preemptive_subset(instance).map(|(_, v)| v)
}

/// Maximum accepted volume over all non-preemptive schedules.
///
/// Machines are filled one after another. For a set of scheduled jobs and a
/// count of closed machines, only the earliest time the open machine becomes
/// free matters, so the search collapses to a table over subsets.
pub fn opt_nonpreemptive(instance: &Instance) -> Result<f64> {
    let n = instance.jobs.len();
    check_size(n, NONPREEMPTIVE_LIMIT)?;
    let m = instance.machines;
    let jobs = &instance.jobs;
    let full = 1usize << n;
    let mut free = vec![vec![f64::INFINITY; full]; m];
    free[0][0] = 0.0;
    let mut best = 0.0f64;
    let volume = subset_volumes(jobs);
    for k in 0..m {
        for mask in 0..full {
            let at = free[k][mask];
            if at.is_infinite() {
                continue;
            }
            best = best.max(volume[mask]);
            if k + 1 < m {
                free[k + 1][mask] = 0.0;
            }
            for (b, job) in jobs.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    continue;
                }
                let end = at.max(job.release) + job.processing;
                if end <= job.deadline + TOL {
                    let slot = &mut free[k][mask | (1 << b)];
                    *slot = slot.min(end);
                }
            }
        }
    }
    Ok(best)
}
