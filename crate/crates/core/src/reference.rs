//! Ground-truth PageRank: dense linear solve, power method and truncated
//! Neumann sums.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::graph::{Damping, WebGraph};
use crate::trace::{Recorder, StopRule, Trace, TraceOptions};

pub const DEFAULT_DENSE_CAP: usize = 5_000;
pub const DEFAULT_POWER_TOL: f64 = 1e-12;

/// Nonnegative per-page scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector(Vec<f64>);

impl RankVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl Deref for RankVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Dense `I - Q`.
fn i_minus_q(graph: &WebGraph, m: Damping) -> DMatrix<f64> {
    let n = graph.n();
    let mut a = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        let w = graph.link_weight(j, m);
        for &i in graph.out_neighbors(j) {
            a[(i, j)] -= w;
        }
    }
    a
}

/// Exact PageRank together with the factorization of `I - Q`, for measuring
/// engine errors and conservation defects.
#[derive(Debug, Clone)]
pub struct Oracle {
    m: Damping,
    x_star: RankVector,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Oracle {
    pub fn new(graph: &WebGraph, m: Damping) -> Result<Self> {
        Self::with_cap(graph, m, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(graph: &WebGraph, m: Damping, cap: usize) -> Result<Self> {
        graph.require_stochastic()?;
        let n = graph.n();
        if n > cap {
            return Err(Error::TooLarge { n, cap });
        }
        let lu = i_minus_q(graph, m).lu();
        let rhs = DVector::from_element(n, m.value() / n as f64);
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("I - (1 - m)A is singular".into()))?;
        Ok(Self {
            m,
            x_star: RankVector(x.iter().copied().collect()),
            lu,
        })
    }

    pub fn damping(&self) -> Damping {
        self.m
    }

    pub fn x_star(&self) -> &RankVector {
        &self.x_star
    }

    pub fn l1_error(&self, x: &[f64]) -> f64 {
        self.x_star.l1_distance(x)
    }

    /// `‖x + (I - Q)^{-1} Q z - x*‖₁`, zero for every reachable push state.
    pub fn conservation_defect(&self, x: &[f64], z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        // (I - Q)^{-1} Q z = (I - Q)^{-1} z - z
        let w = self
            .lu
            .solve(&zv)
            .expect("factorization checked on construction");
        x.iter()
            .zip(w.iter())
            .zip(z)
            .zip(self.x_star.iter())
            .map(|(((xi, wi), zi), si)| (xi + (wi - zi) - si).abs())
            .sum()
    }
}

/// `x* = (I - (1 - m)A)^{-1} (m/n) 1` by dense LU.
pub fn solve_dense(graph: &WebGraph, m: Damping) -> Result<RankVector> {
    Ok(Oracle::new(graph, m)?.x_star)
}

pub fn solve_dense_capped(graph: &WebGraph, m: Damping, cap: usize) -> Result<RankVector> {
    Ok(Oracle::with_cap(graph, m, cap)?.x_star)
}

pub(crate) fn check_probability_vector(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::domain(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )));
    }
    if let Some(i) = v.iter().position(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::domain(format!(
            "{what} has invalid entry {} at {i}",
            v[i]
        )));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Power iteration `x(k+1) = (1 - m) A x(k) + (m/n) 1`.
///
/// Starts from `x0` (uniform when `None`) and stops once the L1 step
/// difference drops to `stop.tol` (default [`DEFAULT_POWER_TOL`]) or after
/// `stop.max_steps` iterations. The certificate column holds the a-posteriori
/// bound `(1 - m)/m · ‖x(k) - x(k-1)‖₁`.
pub fn power_method(
    graph: &WebGraph,
    m: Damping,
    x0: Option<&[f64]>,
    stop: StopRule,
    opts: &TraceOptions<'_>,
) -> Result<(RankVector, Trace)> {
    graph.require_stochastic()?;
    let n = graph.n();
    let mut x = match x0 {
        Some(v) => {
            check_probability_vector(v, n, "initial vector")?;
            v.to_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let tol = stop.tol.unwrap_or(DEFAULT_POWER_TOL);
    let teleport = m.value() / n as f64;
    let ratio = m.link_mass() / m.value();
    let mut next = vec![0.0; n];
    let mut rec = Recorder::new(opts);
    rec.record(0, 0, &x, None, None, true)?;
    let mut step = 0;
    while step < stop.max_steps {
        graph.apply_q(m, &x, &mut next);
        next.iter_mut().for_each(|v| *v += teleport);
        let diff = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum::<f64>();
        std::mem::swap(&mut x, &mut next);
        step += 1;
        let done = diff <= tol || step == stop.max_steps;
        rec.record(step, (step * n) as u64, &x, None, Some(ratio * diff), done)?;
        if done {
            break;
        }
    }
    Ok((RankVector(x), rec.finish()))
}

/// `Σ_{t=0}^{k} ((1 - m) A)^t (m/n) 1`, accumulated term by term.
pub fn neumann_partial(graph: &WebGraph, m: Damping, k: usize) -> RankVector {
    let n = graph.n();
    let mut term = vec![m.value() / n as f64; n];
    let mut acc = term.clone();
    let mut next = vec![0.0; n];
    for _ in 0..k {
        graph.apply_q(m, &term, &mut next);
        std::mem::swap(&mut term, &mut next);
        acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
    }
    RankVector(acc)
}
