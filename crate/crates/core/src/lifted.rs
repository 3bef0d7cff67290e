//! Dense lifted matrices for small graphs.
//!
//! Each engine step is a linear map on `(x, z)`: `x ← x + R z`,
//! `z ← Q' z` for a pair `(R, Q')` that depends on who acts. These
//! constructions exist only as test oracles and are capped at
//! [`LIFT_CAP`] pages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Damping, Partition, WebGraph};
use crate::reference::check_probability_vector;

pub const LIFT_CAP: usize = 200;

fn check_cap(graph: &WebGraph) -> Result<()> {
    if graph.n() > LIFT_CAP {
        Err(Error::TooLarge {
            n: graph.n(),
            cap: LIFT_CAP,
        })
    } else {
        Ok(())
    }
}

/// `Q = R + S`: the step's residual map split into the pushed columns `R`
/// and the untouched identity columns `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// Dense `Q = (1 - m) A`.
pub fn q_matrix(graph: &WebGraph, m: Damping) -> Result<DMatrix<f64>> {
    check_cap(graph)?;
    let n = graph.n();
    let mut q = DMatrix::zeros(n, n);
    for j in 0..n {
        for (i, v) in graph.q_column(m, j)? {
            q[(i, j)] = v;
        }
    }
    Ok(q)
}

/// Lift of the set `phi`: columns in `phi` are those of `Q`, the rest are
/// identity columns (in `S`) or zero (in `R`).
pub fn lift_set(graph: &WebGraph, m: Damping, phi: &[usize]) -> Result<Lifted> {
    let q_full = q_matrix(graph, m)?;
    let n = graph.n();
    if let Some(&bad) = phi.iter().find(|&&i| i >= n) {
        return Err(Error::domain(format!(
            "page {bad} out of range for n = {n}"
        )));
    }
    let mut in_set = vec![false; n];
    phi.iter().for_each(|&i| in_set[i] = true);
    let mut r = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for c in 0..n {
        if in_set[c] {
            r.set_column(c, &q_full.column(c));
        } else {
            s[(c, c)] = 1.0;
        }
    }
    Ok(Lifted { q: &r + &s, r, s })
}

/// `(Q_i, R_i, S_i)` for a single acting page.
pub fn lift_single(graph: &WebGraph, m: Damping, i: usize) -> Result<Lifted> {
    lift_set(graph, m, &[i])
}

/// `R_j^{(i)}`: zero except for column `j`, which holds `q_i`.
pub fn r_shifted(graph: &WebGraph, m: Damping, i: usize, j: usize) -> Result<DMatrix<f64>> {
    let q = q_matrix(graph, m)?;
    let mut out = DMatrix::zeros(graph.n(), graph.n());
    out.set_column(j, &q.column(i));
    Ok(out)
}

/// `R̂ = R (I - R)^{-1}` for the members of group `h`.
pub fn lift_group_hat(
    graph: &WebGraph,
    m: Damping,
    partition: &Partition,
    h: usize,
) -> Result<DMatrix<f64>> {
    let lifted = lift_set(graph, m, partition.members(h))?;
    let n = graph.n();
    let inv = (DMatrix::identity(n, n) - &lifted.r)
        .try_inverse()
        .ok_or(Error::SingularBlock { group: h })?;
    Ok(&lifted.r * inv)
}

/// Block form of `R̂`: columns of group `h` equal `Q[:, V_h] (I - Q̌_hh)^{-1}`,
/// every other column is zero.
pub fn group_hat_blocks(
    graph: &WebGraph,
    m: Damping,
    partition: &Partition,
    h: usize,
) -> Result<DMatrix<f64>> {
    let q = q_matrix(graph, m)?;
    let members = partition.members(h);
    let l = members.len();
    let q_cols = q.select_columns(members);
    let q_hh = q_cols.select_rows(members);
    let inv = (DMatrix::identity(l, l) - q_hh)
        .try_inverse()
        .ok_or(Error::SingularBlock { group: h })?;
    let block = q_cols * inv;
    let mut out = DMatrix::zeros(graph.n(), graph.n());
    for (a, &c) in members.iter().enumerate() {
        out.set_column(c, &block.column(a));
    }
    Ok(out)
}

fn check_selection(p: &[f64], n: usize) -> Result<()> {
    check_probability_vector(p, n, "selection distribution")?;
    match p.iter().position(|&v| v <= 0.0) {
        Some(i) => Err(Error::domain(format!(
            "selection probability p_{i} must be positive"
        ))),
        None => Ok(()),
    }
}

/// `(Q̄', R̄') = (I - P + Q P, Q P)` with `P = diag(p)`: the expected step
/// maps when page `i` acts with probability `p_i`.
pub fn mean_matrices(
    graph: &WebGraph,
    m: Damping,
    p: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let q = q_matrix(graph, m)?;
    let n = graph.n();
    check_selection(p, n)?;
    let pd = DMatrix::from_diagonal(&DVector::from_column_slice(p));
    let r_bar = &q * &pd;
    let q_bar = DMatrix::identity(n, n) - pd + &r_bar;
    Ok((q_bar, r_bar))
}

/// `Σ_i p_i (Q_i, R_i)` by enumeration.
pub fn mean_matrices_brute(
    graph: &WebGraph,
    m: Damping,
    p: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_cap(graph)?;
    let n = graph.n();
    check_selection(p, n)?;
    let mut q_bar = DMatrix::zeros(n, n);
    let mut r_bar = DMatrix::zeros(n, n);
    for (i, &pi) in p.iter().enumerate() {
        let l = lift_single(graph, m, i)?;
        q_bar += l.q * pi;
        r_bar += l.r * pi;
    }
    Ok((q_bar, r_bar))
}

/// `E[x(0)], ..., E[x(K)]` under i.i.d. selection with distribution `p`.
pub fn analytic_mean_trace(
    graph: &WebGraph,
    m: Damping,
    p: &[f64],
    k_max: usize,
) -> Result<Vec<Vec<f64>>> {
    let (q_bar, r_bar) = mean_matrices(graph, m, p)?;
    let n = graph.n();
    let mut w = DVector::from_element(n, m.value() / n as f64);
    let mut x = w.clone();
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(x.iter().copied().collect());
    for _ in 0..k_max {
        x += &r_bar * &w;
        w = &q_bar * &w;
        out.push(x.iter().copied().collect());
    }
    Ok(out)
}

/// Spectral radius of a nonnegative matrix by power iteration on a positive
/// start vector.
pub fn spectral_radius(mat: &DMatrix<f64>, max_iters: usize) -> f64 {
    let n = mat.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut rho = 0.0;
    for _ in 0..max_iters {
        let next = mat * &v;
        let norm = next.iter().map(|x| x.abs()).sum::<f64>();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = rho;
        rho = norm / v.iter().map(|x| x.abs()).sum::<f64>();
        v = next / norm;
        if (rho - prev).abs() <= 1e-15 * rho {
            break;
        }
    }
    rho
}
