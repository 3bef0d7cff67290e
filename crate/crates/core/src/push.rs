//! Two-state push engines.
//!
//! Every engine keeps an estimate `x` and an undistributed residual `z`,
//! both starting at `(m/n) 1` (or `m v`). A page that acts hands its whole
//! residual to its out-neighbours: each neighbour adds `(1 - m)/n_j · z_j` to
//! both of its states and the sender's residual restarts from zero. With
//! `Q = (1 - m) A` the quantity `x + (I - Q)^{-1} Q z` never changes and
//! equals `x*`, so `((1 - m)/m) · 1ᵀz` is the exact L1 distance to `x*`.
//!
//! * [`step_sync`]: all pages act at once and the residual is replaced by
//!   `Q z`; after `k` steps `x` is the `k`-th Neumann partial sum.
//! * [`step_gossip`]: a single page acts.
//! * [`step_set`]: any set of pages acts simultaneously.

use crate::error::{Error, Result};
use crate::graph::{Damping, WebGraph};
use crate::reference::check_probability_vector;
use crate::schedule::Schedule;
use crate::trace::{Recorder, StopRule, Trace, TraceOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PushState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub step: usize,
    /// Pages that have initiated an update so far.
    pub cumulative_updates: u64,
}

impl PushState {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn residual_mass(&self) -> f64 {
        self.z.iter().sum()
    }
}

/// `x = z = (m/n) 1`, or `m v` for a personalization vector `v`.
pub fn init_state(n: usize, m: Damping, v: Option<&[f64]>) -> Result<PushState> {
    let x = match v {
        None => vec![m.value() / n as f64; n],
        Some(v) => {
            check_probability_vector(v, n, "personalization vector")?;
            v.iter().map(|vi| m.value() * vi).collect()
        }
    };
    Ok(PushState {
        z: x.clone(),
        x,
        step: 0,
        cumulative_updates: 0,
    })
}

/// `‖x* - x‖₁ = ((1 - m)/m) · 1ᵀz`, valid on stochastic graphs.
pub fn exact_error(state: &PushState, m: Damping) -> f64 {
    m.link_mass() / m.value() * state.residual_mass()
}

/// `x ← x + Q z`, `z ← Q z`.
pub fn step_sync(state: &mut PushState, graph: &WebGraph, m: Damping) {
    let mut qz = vec![0.0; state.n()];
    graph.apply_q(m, &state.z, &mut qz);
    state.x.iter_mut().zip(&qz).for_each(|(x, q)| *x += q);
    state.z = qz;
    state.step += 1;
    state.cumulative_updates += state.n() as u64;
}

#[inline]
fn scatter(state: &mut PushState, graph: &WebGraph, m: Damping, j: usize, sent: f64) {
    if sent == 0.0 {
        return;
    }
    let share = graph.link_weight(j, m) * sent;
    for &t in graph.out_neighbors(j) {
        state.x[t] += share;
        state.z[t] += share;
    }
}

/// Page `theta` pushes its residual to its out-neighbours.
///
/// A self-loop returns the page's own share to it, so its residual becomes
/// `q_θθ z_θ` rather than zero.
pub fn step_gossip(
    state: &mut PushState,
    graph: &WebGraph,
    m: Damping,
    theta: usize,
) -> Result<()> {
    gossip(state, graph, m, theta).map(drop)
}

fn gossip(state: &mut PushState, graph: &WebGraph, m: Damping, theta: usize) -> Result<f64> {
    if theta >= state.n() {
        return Err(Error::domain(format!(
            "page {theta} out of range for n = {}",
            state.n()
        )));
    }
    let sent = std::mem::take(&mut state.z[theta]);
    scatter(state, graph, m, theta, sent);
    state.step += 1;
    state.cumulative_updates += 1;
    Ok(sent)
}

/// Every page in `phi` pushes the residual it held at the start of the step.
/// Duplicate indices count once.
pub fn step_set(state: &mut PushState, graph: &WebGraph, m: Damping, phi: &[usize]) -> Result<()> {
    push_set(state, graph, m, phi).map(drop)
}

/// Returns the residual mass sent.
fn push_set(state: &mut PushState, graph: &WebGraph, m: Damping, phi: &[usize]) -> Result<f64> {
    let n = state.n();
    if let Some(&bad) = phi.iter().find(|&&i| i >= n) {
        return Err(Error::domain(format!(
            "page {bad} out of range for n = {n}"
        )));
    }
    let owned;
    let phi = if phi.windows(2).all(|w| w[0] < w[1]) {
        phi
    } else {
        let mut v = phi.to_vec();
        v.sort_unstable();
        v.dedup();
        owned = v;
        &owned[..]
    };
    // take all residuals before any of them is refilled by a co-sender
    let sent: Vec<f64> = phi
        .iter()
        .map(|&j| std::mem::take(&mut state.z[j]))
        .collect();
    for (&j, &s) in phi.iter().zip(&sent) {
        scatter(state, graph, m, j, s);
    }
    state.step += 1;
    state.cumulative_updates += phi.len() as u64;
    Ok(sent.iter().sum())
}

/// Which single-page or set update a scheduled run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushEngine {
    /// One page per step; the schedule must yield singletons.
    Gossip,
    /// Any set per step.
    Multi,
}

/// Keeps `‖z‖₁` cheaply between exact resummations.
pub(crate) struct ResidualTracker {
    estimate: f64,
    since_sync: usize,
    resync_every: usize,
}

impl ResidualTracker {
    pub(crate) fn new(state: &PushState) -> Self {
        Self {
            estimate: state.residual_mass(),
            since_sync: 0,
            resync_every: state.n().max(64),
        }
    }

    pub(crate) fn sync(&mut self, state: &PushState) -> f64 {
        self.estimate = state.residual_mass();
        self.since_sync = 0;
        self.estimate
    }

    /// Applies a change and reports whether the certificate may have
    /// reached `tol`, checking the exact sum before saying so.
    pub(crate) fn reached(
        &mut self,
        state: &PushState,
        delta: f64,
        threshold: Option<f64>,
    ) -> bool {
        self.estimate += delta;
        self.since_sync += 1;
        if self.since_sync >= self.resync_every {
            self.sync(state);
        }
        match threshold {
            Some(t) if self.estimate <= t * (1.0 + 1e-6) + f64::MIN_POSITIVE => {
                self.sync(state) <= t
            }
            _ => false,
        }
    }
}

/// Runs scheduled push steps from the uniform start.
pub fn run(
    graph: &WebGraph,
    m: Damping,
    engine: PushEngine,
    schedule: &mut Schedule,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(PushState, Trace)> {
    let state = init_state(graph.n(), m, None)?;
    run_from(state, graph, m, engine, schedule, stop, opts)
}

pub fn run_from(
    state: PushState,
    graph: &WebGraph,
    m: Damping,
    engine: PushEngine,
    schedule: &mut Schedule,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(PushState, Trace)> {
    graph.require_stochastic()?;
    if state.n() != graph.n() || schedule.domain() != graph.n() {
        return Err(Error::domain(format!(
            "state has {} pages and schedule {} indices, graph has {}",
            state.n(),
            schedule.domain(),
            graph.n()
        )));
    }
    drive(state, m, schedule, stop, opts, |state, set| match engine {
        PushEngine::Gossip => match set {
            [theta] => gossip(state, graph, m, *theta),
            _ => Err(Error::domain(format!(
                "gossip needs one page per step, schedule gave {}",
                set.len()
            ))),
        },
        PushEngine::Multi => push_set(state, graph, m, set),
    })
}

/// Runs the synchronous engine from the uniform start.
pub fn run_sync(
    graph: &WebGraph,
    m: Damping,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(PushState, Trace)> {
    graph.require_stochastic()?;
    let state = init_state(graph.n(), m, None)?;
    let mut all = Schedule::round_robin(1)?;
    drive(state, m, &mut all, stop, opts, |state, _| {
        let sent = state.residual_mass();
        step_sync(state, graph, m);
        Ok(sent)
    })
}

/// Shared outer loop: pull a set, apply it, trace, test the stop rule.
///
/// `apply` returns the residual mass it absorbed; the total residual then
/// drops by `m` times that amount.
pub(crate) fn drive<F>(
    mut state: PushState,
    m: Damping,
    schedule: &mut Schedule,
    stop: StopRule,
    opts: &TraceOptions<'_>,
    mut apply: F,
) -> Result<(PushState, Trace)>
where
    F: FnMut(&mut PushState, &[usize]) -> Result<f64>,
{
    let ratio = m.link_mass() / m.value();
    // certificate ≤ tol  ⇔  ‖z‖₁ ≤ m·tol/(1 - m)
    let threshold = stop.tol.map(|t| t / ratio);
    let mut rec = Recorder::new(opts);
    let mut residual = ResidualTracker::new(&state);
    let start = state.step;
    let mut done = threshold.is_some_and(|t| residual.estimate <= t) || stop.max_steps == 0;
    rec.record(
        state.step,
        state.cumulative_updates,
        &state.x,
        Some(&state.z),
        Some(exact_error(&state, m)),
        true,
    )?;
    while !done {
        let k = state.step;
        let Some(set) = schedule.next(k) else {
            break;
        };
        let absorbed = apply(&mut state, set)?;
        let reached = residual.reached(&state, -m.value() * absorbed, threshold);
        done = reached || state.step - start >= stop.max_steps;
        if done || rec.wants(state.step, state.cumulative_updates) {
            rec.record(
                state.step,
                state.cumulative_updates,
                &state.x,
                Some(&state.z),
                Some(exact_error(&state, m)),
                done,
            )?;
        }
    }
    rec.record(
        state.step,
        state.cumulative_updates,
        &state.x,
        Some(&state.z),
        Some(exact_error(&state, m)),
        true,
    )?;
    Ok((state, rec.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{neumann_partial, solve_dense};

    fn m15() -> Damping {
        Damping::new(0.15).unwrap()
    }

    fn cycle2() -> WebGraph {
        WebGraph::load_edge_list("0 1\n1 0", 0).unwrap()
    }

    #[test]
    fn init_values() {
        let s = init_state(7, m15(), None).unwrap();
        assert!(s.x.iter().all(|&v| v == 0.15 / 7.0));
        assert!((s.x[0] - 0.0214286).abs() < 1e-7);
        let mut e1 = vec![0.0; 7];
        e1[0] = 1.0;
        let s = init_state(7, m15(), Some(&e1)).unwrap();
        assert_eq!(s.z[0], 0.15);
        assert!(s.z[1..].iter().all(|&v| v == 0.0));
        let s = init_state(2, Damping::new(0.5).unwrap(), None).unwrap();
        assert_eq!(s.x, vec![0.25, 0.25]);
        assert!(init_state(2, m15(), Some(&[0.7, 0.7])).is_err());
    }

    #[test]
    fn sync_step_by_hand() {
        let mut s = init_state(2, m15(), None).unwrap();
        step_sync(&mut s, &cycle2(), m15());
        let x1 = 0.075 + 0.85 * 0.075;
        assert!((s.x[0] - x1).abs() < 1e-16 && (s.x[1] - x1).abs() < 1e-16);
        assert!((s.x[0] - 0.13875).abs() < 1e-15);
        assert!((s.z[0] - 0.06375).abs() < 1e-15);
        assert_eq!(s.cumulative_updates, 2);
    }

    #[test]
    fn sync_with_zero_residual_is_idle() {
        let mut s = init_state(2, m15(), None).unwrap();
        s.z = vec![0.0, 0.0];
        let before = s.clone();
        step_sync(&mut s, &cycle2(), m15());
        assert_eq!(s.x, before.x);
        assert_eq!(s.z, before.z);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn sync_equals_neumann_partial_sums() {
        let g = WebGraph::load_edge_list("0 1\n0 2\n1 2\n2 0\n3 0\n3 2\n2 3", 0).unwrap();
        let mut s = init_state(4, m15(), None).unwrap();
        for k in 1..=60 {
            step_sync(&mut s, &g, m15());
            assert_eq!(s.x, neumann_partial(&g, m15(), k).into_inner());
        }
    }

    #[test]
    fn set_step_by_hand() {
        let mut s = init_state(2, m15(), None).unwrap();
        step_set(&mut s, &cycle2(), m15(), &[0]).unwrap();
        assert!((s.x[0] - 0.075).abs() < 1e-16);
        assert!((s.x[1] - 0.13875).abs() < 1e-15);
        assert_eq!(s.z[0], 0.0);
        assert!((s.z[1] - 0.13875).abs() < 1e-15);
    }

    #[test]
    fn set_step_edge_cases() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 0\n2 1", 0).unwrap();
        let mut s = init_state(3, m15(), None).unwrap();
        let before = s.clone();
        step_set(&mut s, &g, m15(), &[]).unwrap();
        assert_eq!(
            (s.x.clone(), s.z.clone()),
            (before.x.clone(), before.z.clone())
        );
        assert!(matches!(
            step_set(&mut s, &g, m15(), &[3]),
            Err(Error::Domain(_))
        ));

        let mut all = before.clone();
        let mut sync = before.clone();
        step_set(&mut all, &g, m15(), &[0, 1, 2]).unwrap();
        step_sync(&mut sync, &g, m15());
        for i in 0..3 {
            assert!((all.x[i] - sync.x[i]).abs() < 1e-16);
            assert!((all.z[i] - sync.z[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn duplicates_and_order_do_not_matter() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 0\n2 1\n1 0", 0).unwrap();
        let mut a = init_state(3, m15(), None).unwrap();
        let mut b = a.clone();
        step_set(&mut a, &g, m15(), &[0, 2]).unwrap();
        step_set(&mut b, &g, m15(), &[2, 0, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gossip_matches_singleton_set_bitwise() {
        let g = WebGraph::load_edge_list("0 1\n0 0\n1 2\n2 0\n2 1", 0).unwrap();
        let mut a = init_state(3, m15(), None).unwrap();
        let mut b = a.clone();
        for k in 0..50 {
            let theta = (k * 7 + 3) % 3;
            step_gossip(&mut a, &g, m15(), theta).unwrap();
            step_set(&mut b, &g, m15(), &[theta]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn error_certificate_at_start_and_end() {
        let s = init_state(5, m15(), None).unwrap();
        assert!((exact_error(&s, m15()) - 0.85).abs() < 1e-15);
        let mut s = s;
        s.z.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(exact_error(&s, m15()), 0.0);
    }

    #[test]
    fn certificate_matches_oracle_mid_run() {
        let g = WebGraph::load_edge_list("0 1", 0)
            .unwrap()
            .patch_dangling()
            .0;
        let xs = solve_dense(&g, m15()).unwrap();
        let mut s = init_state(2, m15(), None).unwrap();
        for theta in [0, 1, 1, 0, 1] {
            step_gossip(&mut s, &g, m15(), theta).unwrap();
            assert!((exact_error(&s, m15()) - xs.l1_distance(&s.x)).abs() < 1e-10);
        }
    }

    #[test]
    fn gossip_run_on_cycle_converges() {
        let mut sched = Schedule::uniform(2, 42).unwrap();
        let (s, trace) = run(
            &cycle2(),
            m15(),
            PushEngine::Gossip,
            &mut sched,
            StopRule::steps(10_000),
            &TraceOptions::default(),
        )
        .unwrap();
        assert!(s.residual_mass() < 1e-8);
        assert_eq!(trace.last().unwrap().step, s.step);
    }

    #[test]
    fn empty_schedule_freezes_state() {
        let g = cycle2();
        let mut sched = Schedule::fixed_sequence(2, vec![vec![]; 10]).unwrap();
        let (s, trace) = run(
            &g,
            m15(),
            PushEngine::Multi,
            &mut sched,
            StopRule::steps(100),
            &TraceOptions::default(),
        )
        .unwrap();
        assert_eq!(s.step, 10);
        assert_eq!(s.x, vec![0.075, 0.075]);
        assert!(trace
            .rows
            .iter()
            .all(|r| r.cert == Some(0.85) && r.updates == 0));
    }

    #[test]
    fn gossip_rejects_sets() {
        let mut sched = Schedule::random_subset(2, 1.0, 0).unwrap();
        let res = run(
            &cycle2(),
            m15(),
            PushEngine::Gossip,
            &mut sched,
            StopRule::steps(3),
            &TraceOptions::default(),
        );
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn run_stops_at_tolerance() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 0\n0 2", 0).unwrap();
        let mut sched = Schedule::round_robin(3).unwrap();
        let (s, trace) = run(
            &g,
            m15(),
            PushEngine::Multi,
            &mut sched,
            StopRule::until(1_000_000, 1e-9),
            &TraceOptions::default(),
        )
        .unwrap();
        let e = exact_error(&s, m15());
        assert!(e <= 1e-9);
        // the previous row was still above tolerance
        let rows = &trace.rows;
        assert!(rows[rows.len() - 2].cert.unwrap() > 1e-9);
    }

    #[test]
    fn run_refuses_dangling_graph() {
        let g = WebGraph::load_edge_list("0 1", 0).unwrap();
        let mut sched = Schedule::round_robin(2).unwrap();
        assert!(run(
            &g,
            m15(),
            PushEngine::Multi,
            &mut sched,
            StopRule::steps(3),
            &TraceOptions::default()
        )
        .is_err());
    }
}
