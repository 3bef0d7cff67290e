//! Group-wise updates.
//!
//! When group `h` acts it absorbs, in one step, the limit of its members
//! pushing to each other forever: with `Q̌_hh` the block of `Q` inside the
//! group,
//!
//! ```text
//! z̄    = (I - Q̌_hh)^{-1} ž_h
//! x̌_g += Q̌_gh z̄          for every group g (h included)
//! ž_g += Q̌_gh z̄          for g ≠ h
//! ž_h  = 0
//! ```
//!
//! `(I - Q̌_hh)` is factored once per group up front. Blocks larger than the
//! dense cap are solved by the fixed-point iteration `z̄ ← ž + Q̌_hh z̄`,
//! which contracts because `Q̌_hh` is a sub-block of a Schur-stable
//! nonnegative matrix.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Damping, Partition, WebGraph};
use crate::linalg::DenseLu;
use crate::push::{drive, init_state, PushState};
use crate::schedule::Schedule;
use crate::trace::{StopRule, Trace, TraceOptions};

pub const DEFAULT_GROUP_DENSE_CAP: usize = 512;
pub const LOCAL_SOLVE_TOL: f64 = 1e-13;
const LOCAL_SOLVE_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone)]
enum LocalSolver {
    /// No intra-group links: `Q̌_hh = 0`.
    Identity,
    Dense(DenseLu),
    /// Intra-group links as `(local source, local target, weight)`.
    Iterative(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone)]
struct GroupFactor {
    members: Vec<usize>,
    solver: LocalSolver,
}

/// Per-group local solvers for `(I - Q̌_hh)`.
#[derive(Debug, Clone)]
pub struct GroupFactors {
    m: Damping,
    n: usize,
    group_of: Vec<usize>,
    groups: Vec<GroupFactor>,
}

fn factor_group(
    graph: &WebGraph,
    m: Damping,
    partition: &Partition,
    h: usize,
    dense_cap: usize,
) -> Result<GroupFactor> {
    let members = partition.members(h).to_vec();
    let local = |page: usize| members.binary_search(&page).ok();
    let mut intra = Vec::new();
    for (a, &j) in members.iter().enumerate() {
        let w = graph.link_weight(j, m);
        for &t in graph.out_neighbors(j) {
            if let Some(b) = local(t) {
                intra.push((a, b, w));
            }
        }
    }
    let l = members.len();
    let solver = if intra.is_empty() {
        LocalSolver::Identity
    } else if l <= dense_cap {
        let mut a = vec![0.0; l * l];
        for i in 0..l {
            a[i * l + i] = 1.0;
        }
        for &(src, dst, w) in &intra {
            a[dst * l + src] -= w;
        }
        LocalSolver::Dense(DenseLu::factor(l, a).ok_or(Error::SingularBlock { group: h })?)
    } else {
        LocalSolver::Iterative(intra)
    };
    Ok(GroupFactor { members, solver })
}

impl GroupFactors {
    /// Factors every group's `(I - Q̌_hh)`; groups are independent and are
    /// processed in parallel.
    pub fn precompute(
        graph: &WebGraph,
        m: Damping,
        partition: &Partition,
        dense_cap: usize,
    ) -> Result<Self> {
        graph.require_stochastic()?;
        if partition.num_pages() != graph.n() {
            return Err(Error::domain(format!(
                "partition covers {} pages, graph has {}",
                partition.num_pages(),
                graph.n()
            )));
        }
        let groups = (0..partition.num_groups())
            .into_par_iter()
            .map(|h| factor_group(graph, m, partition, h, dense_cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m,
            n: graph.n(),
            group_of: (0..graph.n()).map(|i| partition.group_of(i)).collect(),
            groups,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn members(&self, h: usize) -> &[usize] {
        &self.groups[h].members
    }

    pub fn damping(&self) -> Damping {
        self.m
    }

    pub fn is_dense(&self, h: usize) -> bool {
        matches!(
            self.groups[h].solver,
            LocalSolver::Dense(_) | LocalSolver::Identity
        )
    }

    /// Overwrites `rhs` with `(I - Q̌_hh)^{-1} rhs`.
    pub fn local_solve(&self, h: usize, rhs: &mut [f64]) -> Result<()> {
        let g = &self.groups[h];
        assert_eq!(rhs.len(), g.members.len());
        match &g.solver {
            LocalSolver::Identity => Ok(()),
            LocalSolver::Dense(lu) => {
                lu.solve_in_place(rhs);
                Ok(())
            }
            LocalSolver::Iterative(intra) => {
                let base = rhs.to_vec();
                let scale: f64 = base.iter().map(|v| v.abs()).sum();
                if scale == 0.0 {
                    return Ok(());
                }
                let mut next = vec![0.0; base.len()];
                for _ in 0..LOCAL_SOLVE_MAX_ITERS {
                    next.copy_from_slice(&base);
                    for &(src, dst, w) in intra {
                        next[dst] += w * rhs[src];
                    }
                    let diff: f64 = next
                        .iter()
                        .zip(rhs.iter())
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    rhs.copy_from_slice(&next);
                    if diff <= LOCAL_SOLVE_TOL * scale {
                        return Ok(());
                    }
                }
                Err(Error::Numerical(format!(
                    "local solve of group {h} did not converge"
                )))
            }
        }
    }
}

/// One group update; returns `1ᵀz̄`.
fn group_update(
    state: &mut PushState,
    graph: &WebGraph,
    factors: &GroupFactors,
    h: usize,
) -> Result<f64> {
    if h >= factors.num_groups() {
        return Err(Error::domain(format!(
            "group {h} out of range for {} groups",
            factors.num_groups()
        )));
    }
    let members = factors.members(h);
    let mut zbar: Vec<f64> = members
        .iter()
        .map(|&j| std::mem::take(&mut state.z[j]))
        .collect();
    state.step += 1;
    state.cumulative_updates += members.len() as u64;
    if zbar.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    factors.local_solve(h, &mut zbar)?;
    for (&j, &zj) in members.iter().zip(&zbar) {
        if zj == 0.0 {
            continue;
        }
        let share = graph.link_weight(j, factors.m) * zj;
        for &t in graph.out_neighbors(j) {
            state.x[t] += share;
            if factors.group_of[t] != h {
                state.z[t] += share;
            }
        }
    }
    Ok(zbar.iter().sum())
}

/// Group `h` absorbs its residual through the local solve and pushes the
/// result across its outgoing links.
pub fn step_group(
    state: &mut PushState,
    graph: &WebGraph,
    factors: &GroupFactors,
    h: usize,
) -> Result<()> {
    if state.n() != factors.n || graph.n() != factors.n {
        return Err(Error::domain(
            "state, graph and factors disagree on the page count",
        ));
    }
    group_update(state, graph, factors, h).map(drop)
}

/// Runs group updates from the uniform start; `schedule` picks groups.
pub fn run_clustered(
    graph: &WebGraph,
    factors: &GroupFactors,
    schedule: &mut Schedule,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(PushState, Trace)> {
    let state = init_state(graph.n(), factors.m, None)?;
    run_clustered_from(state, graph, factors, schedule, stop, opts)
}

pub fn run_clustered_from(
    state: PushState,
    graph: &WebGraph,
    factors: &GroupFactors,
    schedule: &mut Schedule,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(PushState, Trace)> {
    graph.require_stochastic()?;
    if state.n() != factors.n || graph.n() != factors.n {
        return Err(Error::domain(
            "state, graph and factors disagree on the page count",
        ));
    }
    if schedule.domain() != factors.num_groups() {
        return Err(Error::domain(format!(
            "schedule picks from {} indices but there are {} groups",
            schedule.domain(),
            factors.num_groups()
        )));
    }
    drive(state, factors.m, schedule, stop, opts, |state, set| {
        set.iter().try_fold(0.0, |acc, &h| {
            Ok(acc + group_update(state, graph, factors, h)?)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::push::{exact_error, step_set};
    use crate::reference::solve_dense;

    fn m15() -> Damping {
        Damping::new(0.15).unwrap()
    }

    fn ring_with_chords(n: usize) -> WebGraph {
        let edges = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i * 3 + 2) % n)]);
        WebGraph::from_edges(n, edges).unwrap()
    }

    fn factor_scalar(g: &WebGraph, h: usize) -> f64 {
        let f = GroupFactors::precompute(g, m15(), &Partition::trivial(g), 8).unwrap();
        let mut v = [1.0];
        f.local_solve(h, &mut v).unwrap();
        v[0]
    }

    #[test]
    fn singleton_factors() {
        let g = WebGraph::load_edge_list("0 1\n0 0\n1 0", 0).unwrap();
        assert_eq!(factor_scalar(&g, 1), 1.0);
        assert!((factor_scalar(&g, 0) - 1.0 / (1.0 - 0.425)).abs() < 1e-15);
    }

    #[test]
    fn local_solve_inverts_block() {
        let g = ring_with_chords(12);
        let labels: Vec<usize> = (0..12).map(|i| i / 5).collect();
        let p = Partition::from_labels(&labels).unwrap();
        for cap in [512, 1] {
            let f = GroupFactors::precompute(&g, m15(), &p, cap).unwrap();
            for h in 0..p.num_groups() {
                let members = p.members(h);
                let input: Vec<f64> = (0..members.len()).map(|a| 1.0 + a as f64).collect();
                let mut y = input.clone();
                f.local_solve(h, &mut y).unwrap();
                // (I - Q̌_hh) y
                let mut back = y.clone();
                for (a, &j) in members.iter().enumerate() {
                    let w = g.link_weight(j, m15());
                    for &t in g.out_neighbors(j) {
                        if let Ok(b) = members.binary_search(&t) {
                            back[b] -= w * y[a];
                        }
                    }
                }
                for (u, v) in back.iter().zip(&input) {
                    assert!((u - v).abs() < 1e-12, "cap {cap}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn whole_graph_group_reaches_pagerank_in_one_step() {
        let g = ring_with_chords(9);
        let xs = solve_dense(&g, m15()).unwrap();
        let f = GroupFactors::precompute(&g, m15(), &Partition::whole_graph(&g), 512).unwrap();
        let mut s = init_state(9, m15(), None).unwrap();
        step_group(&mut s, &g, &f, 0).unwrap();
        assert!(xs.l1_distance(&s.x) < 1e-10);
        assert!(s.z.iter().all(|&v| v == 0.0));
        assert_eq!(s.cumulative_updates, 9);
    }

    #[test]
    fn singleton_group_matches_set_step() {
        let g = WebGraph::from_edges(7, (0..7).flat_map(|i| [(i, (i + 1) % 7), (i, (i + 3) % 7)]))
            .unwrap();
        assert!(!g.has_self_loops());
        let f = GroupFactors::precompute(&g, m15(), &Partition::trivial(&g), 512).unwrap();
        let mut a = init_state(7, m15(), None).unwrap();
        let mut b = a.clone();
        for k in 0..40 {
            let i = (k * 5 + 1) % 7;
            step_group(&mut a, &g, &f, i).unwrap();
            step_set(&mut b, &g, m15(), &[i]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn idle_group_changes_nothing() {
        let g = ring_with_chords(6);
        let p = Partition::from_labels(&[0, 0, 1, 1, 2, 2]).unwrap();
        let f = GroupFactors::precompute(&g, m15(), &p, 512).unwrap();
        let mut s = init_state(6, m15(), None).unwrap();
        s.z[2] = 0.0;
        s.z[3] = 0.0;
        let before = s.clone();
        step_group(&mut s, &g, &f, 1).unwrap();
        assert_eq!(s.x, before.x);
        assert_eq!(s.z, before.z);
    }

    #[test]
    fn iterative_and_dense_agree() {
        let g = ring_with_chords(30);
        let labels: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let p = Partition::from_labels(&labels).unwrap();
        let dense = GroupFactors::precompute(&g, m15(), &p, 512).unwrap();
        let iter = GroupFactors::precompute(&g, m15(), &p, 2).unwrap();
        assert!(!iter.is_dense(0));
        let mut a = init_state(30, m15(), None).unwrap();
        let mut b = a.clone();
        for k in 0..20 {
            step_group(&mut a, &g, &dense, k % 3).unwrap();
            step_group(&mut b, &g, &iter, k % 3).unwrap();
        }
        for i in 0..30 {
            assert!((a.x[i] - b.x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_run_converges() {
        let g = ring_with_chords(20);
        let labels: Vec<usize> = (0..20).map(|i| i / 4).collect();
        let p = Partition::from_labels(&labels).unwrap();
        let f = GroupFactors::precompute(&g, m15(), &p, 512).unwrap();
        let mut sched = Schedule::periodic_groups(5).unwrap();
        let (s, _) = run_clustered(
            &g,
            &f,
            &mut sched,
            StopRule::until(10_000, 1e-10),
            &TraceOptions::default(),
        )
        .unwrap();
        assert!(exact_error(&s, m15()) <= 1e-10);
        let xs = solve_dense(&g, m15()).unwrap();
        assert!(xs.l1_distance(&s.x) < 1e-9);
    }

    #[test]
    fn schedule_domain_must_match_groups() {
        let g = ring_with_chords(6);
        let f = GroupFactors::precompute(&g, m15(), &Partition::whole_graph(&g), 512).unwrap();
        let mut sched = Schedule::round_robin(6).unwrap();
        assert!(run_clustered(
            &g,
            &f,
            &mut sched,
            StopRule::steps(3),
            &TraceOptions::default()
        )
        .is_err());
        let mut s = init_state(6, m15(), None).unwrap();
        assert!(matches!(
            step_group(&mut s, &g, &f, 1),
            Err(Error::Domain(_))
        ));
    }
}
