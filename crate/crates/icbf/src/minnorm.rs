//! Exact min-norm QP solvers for halfspace-constrained problems
//! `argmin ||v||^2  s.t.  p_i' v >= d_i`, plus the single-constraint
//! closed form, the offset-objective variant, and an independently coded
//! brute-force oracle used by the test suites.

use crate::linalg;
use crate::{Error, Result};

const DEGENERATE_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

/// A small stack of halfspace constraints `p_i' v >= d_i`.
#[derive(Clone, Debug)]
pub struct HalfspaceProblem {
    rows: Vec<(Vec<f64>, f64)>,
    pub m: usize,
}

impl HalfspaceProblem {
    /// Constraint count must be in `1..=8`; all gradients share dimension.
    pub fn new(rows: Vec<(Vec<f64>, f64)>) -> Self {
        assert!(!rows.is_empty() && rows.len() <= 8, "1..=8 constraints supported");
        let m = rows[0].0.len();
        assert!(rows.iter().all(|(p, _)| p.len() == m), "mixed constraint dimensions");
        Self { rows, m }
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QPStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct QPSolution {
    pub v_star: Vec<f64>,
    /// Indices of constraints tight at the optimum.
    pub active_set: Vec<usize>,
    pub status: QPStatus,
}

impl QPSolution {
    fn infeasible(m: usize) -> Self {
        Self { v_star: vec![f64::NAN; m], active_set: vec![], status: QPStatus::Infeasible }
    }
}

/// Closed form of the single-constraint min-norm QP:
/// zero when the constraint is slack, `(d/||p||^2) p` otherwise.
///
/// Errors when `p` vanishes while `d > 0`: the barrier is not an I-CBF
/// at this point.
pub fn minnorm_single(p: &[f64], d: f64) -> Result<Vec<f64>> {
    let p_norm = linalg::norm(p);
    if p_norm < DEGENERATE_TOL {
        if d > DEGENERATE_TOL {
            return Err(Error::RelativeDegree { p_norm, d });
        }
        return Ok(vec![0.0; p.len()]);
    }
    if d <= 0.0 {
        return Ok(vec![0.0; p.len()]);
    }
    let scale = d / (p_norm * p_norm);
    Ok(p.iter().map(|&pi| scale * pi).collect())
}

/// Single-constraint QP with a shifted objective:
/// `argmin ||mu + bias||^2  s.t.  p' mu >= d`.
///
/// The unconstrained optimum `mu = -bias` is returned when feasible;
/// otherwise `-bias` is projected onto the constraint hyperplane.
pub fn minnorm_offset(p: &[f64], d: f64, bias: &[f64]) -> Result<Vec<f64>> {
    let unconstrained: Vec<f64> = bias.iter().map(|b| -b).collect();
    let slack = linalg::dot(p, &unconstrained) - d;
    let p_norm = linalg::norm(p);
    if p_norm < DEGENERATE_TOL {
        if slack < -DEGENERATE_TOL {
            return Err(Error::RelativeDegree { p_norm, d });
        }
        return Ok(unconstrained);
    }
    if slack >= 0.0 {
        return Ok(unconstrained);
    }
    let scale = -slack / (p_norm * p_norm);
    Ok(unconstrained.iter().zip(p).map(|(v, pi)| v + scale * pi).collect())
}

fn feasible_everywhere(rows: &[(Vec<f64>, f64)], v: &[f64]) -> bool {
    rows.iter().all(|(p, d)| {
        let tol = FEAS_TOL * (1.0 + d.abs() + linalg::norm(p) * linalg::norm(v));
        linalg::dot(p, v) >= d - tol
    })
}

fn tight_rows(rows: &[(Vec<f64>, f64)], v: &[f64]) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, (p, d))| {
            let tol = FEAS_TOL * (1.0 + d.abs() + linalg::norm(p) * linalg::norm(v));
            (linalg::dot(p, v) - d).abs() <= tol
        })
        .map(|(i, _)| i)
        .collect()
}

/// Exact global minimizer of `||v||^2` over the stacked halfspaces, by
/// KKT active-set enumeration. Every minimizer of this coercive convex
/// QP over a nonempty polyhedron admits a KKT point with linearly
/// independent active gradients, so exhausting those subsets without
/// finding a feasible candidate certifies emptiness.
pub fn minnorm_multi(problem: &HalfspaceProblem) -> QPSolution {
    let m = problem.m;

    // Degenerate rows: vacuous when d <= 0, contradictory otherwise.
    let mut live: Vec<(Vec<f64>, f64)> = Vec::new();
    for (p, d) in &problem.rows {
        if linalg::norm(p) < DEGENERATE_TOL {
            if *d > DEGENERATE_TOL {
                return QPSolution::infeasible(m);
            }
        } else {
            live.push((p.clone(), *d));
        }
    }
    if live.is_empty() {
        return QPSolution { v_star: vec![0.0; m], active_set: vec![], status: QPStatus::Optimal };
    }

    let k = live.len();
    let mut best: Option<(f64, Vec<f64>)> = None; // (norm^2, v)

    // Subsets ordered by size then index order: on ties the first (and
    // thus smallest, lexicographically earliest) active set wins, making
    // the result deterministic.
    let mut masks: Vec<u32> = (0u32..(1 << k))
        .filter(|mask| (mask.count_ones() as usize) <= m)
        .collect();
    masks.sort_by_key(|mask| (mask.count_ones(), *mask));

    for mask in masks {
        let subset: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if let Some(v) = kkt_candidate(&live, &subset) {
            if feasible_everywhere(&live, &v) {
                let norm2 = linalg::dot(&v, &v);
                let better = match &best {
                    None => true,
                    Some((bn, _)) => norm2 < bn - 1e-12,
                };
                if better {
                    best = Some((norm2, v));
                }
            }
        }
    }

    match best {
        Some((_, v)) => {
            let active_set = tight_rows(&problem.rows, &v);
            QPSolution { v_star: v, active_set, status: QPStatus::Optimal }
        }
        None => QPSolution::infeasible(m),
    }
}

/// Equality-constrained candidate for an active subset: `v = P' lambda`
/// with `(P P') lambda = d`, kept only when all multipliers are
/// nonnegative. `None` for dependent subsets or negative multipliers.
fn kkt_candidate(rows: &[(Vec<f64>, f64)], subset: &[usize]) -> Option<Vec<f64>> {
    let m = rows[0].0.len();
    if subset.is_empty() {
        return Some(vec![0.0; m]);
    }
    let gram: Vec<Vec<f64>> = subset
        .iter()
        .map(|&i| subset.iter().map(|&j| linalg::dot(&rows[i].0, &rows[j].0)).collect())
        .collect();
    let rhs: Vec<f64> = subset.iter().map(|&i| rows[i].1).collect();
    let lambda = linalg::solve(&gram, &rhs, 1e-10)?;
    if lambda.iter().any(|&l| l < -FEAS_TOL) {
        return None;
    }
    let mut v = vec![0.0; m];
    for (pos, &i) in subset.iter().enumerate() {
        for (vj, pj) in v.iter_mut().zip(&rows[i].0) {
            *vj += lambda[pos] * pj;
        }
    }
    Some(v)
}

/// Independent oracle: minimizer of `||v - center||^2` over the same
/// polyhedron, by exhaustive active-set enumeration. Shares no code with
/// `minnorm_multi`; its linear solves use an unpivoted Cramer-style
/// elimination written separately on purpose.
pub fn oracle_qp(problem: &HalfspaceProblem, center: &[f64]) -> QPSolution {
    let m = problem.m;
    assert!(m <= 4, "oracle supports m <= 4");
    assert_eq!(center.len(), m);

    let rows = &problem.rows;
    let k = rows.len();
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;

    for mask in 0u32..(1 << k) {
        let subset: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if subset.len() > m {
            continue;
        }
        let Some(v) = oracle_candidate(rows, &subset, center) else { continue };

        // feasibility over every constraint
        let mut ok = true;
        for (p, d) in rows {
            let pv: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            if pv < d - 1e-8 {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let obj: f64 = v.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
        let better = match &best {
            None => true,
            Some((b, _, _)) => obj < b - 1e-12,
        };
        if better {
            best = Some((obj, v, subset));
        }
    }

    match best {
        Some((_, v, _)) => {
            let active_set: Vec<usize> = rows
                .iter()
                .enumerate()
                .filter(|(_, (p, d))| {
                    let pv: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
                    (pv - d).abs() <= 1e-8 * (1.0 + d.abs())
                })
                .map(|(i, _)| i)
                .collect();
            QPSolution { v_star: v, active_set, status: QPStatus::Optimal }
        }
        None => QPSolution::infeasible(m),
    }
}

/// Stationary point of the oracle objective on an affine active set:
/// `v = center + sum lambda_i p_i`, multipliers from the normal
/// equations, rejected when any multiplier is negative.
fn oracle_candidate(rows: &[(Vec<f64>, f64)], subset: &[usize], center: &[f64]) -> Option<Vec<f64>> {
    let m = center.len();
    if subset.is_empty() {
        return Some(center.to_vec());
    }
    let s = subset.len();
    // gram[i][j] = p_i . p_j, rhs_i = d_i - p_i . center
    let mut gram = vec![vec![0.0; s]; s];
    let mut rhs = vec![0.0; s];
    for (a, &i) in subset.iter().enumerate() {
        for (b, &j) in subset.iter().enumerate() {
            gram[a][b] = rows[i].0.iter().zip(&rows[j].0).map(|(x, y)| x * y).sum();
        }
        let pc: f64 = rows[i].0.iter().zip(center).map(|(x, y)| x * y).sum();
        rhs[a] = rows[i].1 - pc;
    }
    // forward elimination without pivoting (deliberately not shared with
    // the production solver); bail out on tiny diagonals
    for col in 0..s {
        if gram[col][col].abs() < 1e-9 {
            // try to repair with a row swap below
            let swap = (col + 1..s).find(|&r| gram[r][col].abs() >= 1e-9)?;
            gram.swap(col, swap);
            rhs.swap(col, swap);
        }
        for row in col + 1..s {
            let f = gram[row][col] / gram[col][col];
            for j in col..s {
                gram[row][j] -= f * gram[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut lambda = vec![0.0; s];
    for col in (0..s).rev() {
        let mut acc = rhs[col];
        for j in col + 1..s {
            acc -= gram[col][j] * lambda[j];
        }
        if gram[col][col].abs() < 1e-9 {
            return None;
        }
        lambda[col] = acc / gram[col][col];
    }
    if lambda.iter().any(|&l| l < -1e-8) {
        return None;
    }
    let mut v = center.to_vec();
    for (pos, &i) in subset.iter().enumerate() {
        for j in 0..m {
            v[j] += lambda[pos] * rows[i].0[j];
        }
    }
    Some(v)
}
