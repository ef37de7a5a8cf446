//! Transportation simplex on the dense transportation polytope, generic
//! over the scalar so the same pivoting runs in f64 and in exact rational
//! arithmetic (the latter serves as the test oracle on small instances).

use crate::{Error, Result};
use num::BigRational;

/// Scalar requirements for the pivoting loop.
pub trait TransportScalar: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn add(a: &Self, b: &Self) -> Self;
    fn sub(a: &Self, b: &Self) -> Self;
    fn mul(a: &Self, b: &Self) -> Self;
    /// Is this reduced cost negative enough to enter the basis?
    fn improves(reduced: &Self) -> bool;
}

impl TransportScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(a: &Self, b: &Self) -> Self {
        a + b
    }
    fn sub(a: &Self, b: &Self) -> Self {
        a - b
    }
    fn mul(a: &Self, b: &Self) -> Self {
        a * b
    }
    fn improves(reduced: &Self) -> bool {
        *reduced < -1e-12
    }
}

impl TransportScalar for BigRational {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn add(a: &Self, b: &Self) -> Self {
        a + b
    }
    fn sub(a: &Self, b: &Self) -> Self {
        a - b
    }
    fn mul(a: &Self, b: &Self) -> Self {
        a * b
    }
    fn improves(reduced: &Self) -> bool {
        reduced < &num::Zero::zero()
    }
}

pub struct TransportSolution<T> {
    /// Row-major n×m optimal plan.
    pub flow: Vec<T>,
    /// Row potentials (u) and column potentials (v); `u_i + v_j ≤ c_ij`
    /// at optimality with equality on basic cells.
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub value: T,
}

/// Solves `min Σ x_ij c_ij` over nonnegative x with row sums `supply` and
/// column sums `demand` (both strictly positive, equal totals). Northwest
/// corner start, Dantzig pricing with a Bland fallback against cycling.
pub fn solve<T: TransportScalar>(
    supply: &[T],
    demand: &[T],
    cost: &[T],
) -> Result<TransportSolution<T>> {
    let n = supply.len();
    let m = demand.len();
    assert_eq!(cost.len(), n * m);
    let zero = T::zero();

    let mut flow: Vec<T> = vec![zero.clone(); n * m];
    let mut basic: Vec<bool> = vec![false; n * m];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);

    // Northwest corner initial basic feasible solution.
    {
        let mut ra: Vec<T> = supply.to_vec();
        let mut cb: Vec<T> = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = if ra[i] < cb[j] { ra[i].clone() } else { cb[j].clone() };
            flow[i * m + j] = q.clone();
            basic[i * m + j] = true;
            basis.push((i, j));
            ra[i] = T::sub(&ra[i], &q);
            cb[j] = T::sub(&cb[j], &q);
            if i == n - 1 && j == m - 1 {
                break;
            }
            if !(zero < ra[i]) && i < n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(basis.len(), n + m - 1);
    }

    let mut u: Vec<T> = vec![zero.clone(); n];
    let mut v: Vec<T> = vec![zero.clone(); m];
    let max_iters = 2000 * (n + m) * (n + m) + 10_000;
    let bland_after = 50 * (n + m) * (n + m) + 1_000;

    for iter in 0..max_iters {
        // Duals from the spanning tree of basic cells.
        {
            let mut row_cells: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut col_cells: Vec<Vec<usize>> = vec![Vec::new(); m];
            for &(i, j) in &basis {
                row_cells[i].push(j);
                col_cells[j].push(i);
            }
            let mut row_done = vec![false; n];
            let mut col_done = vec![false; m];
            u[0] = zero.clone();
            row_done[0] = true;
            let mut queue: Vec<(bool, usize)> = vec![(true, 0)];
            while let Some((is_row, idx)) = queue.pop() {
                if is_row {
                    for &j in &row_cells[idx] {
                        if !col_done[j] {
                            v[j] = T::sub(&cost[idx * m + j], &u[idx]);
                            col_done[j] = true;
                            queue.push((false, j));
                        }
                    }
                } else {
                    for &i in &col_cells[idx] {
                        if !row_done[i] {
                            u[i] = T::sub(&cost[i * m + idx], &v[idx]);
                            row_done[i] = true;
                            queue.push((true, i));
                        }
                    }
                }
            }
            if row_done.iter().any(|d| !d) || col_done.iter().any(|d| !d) {
                return Err(Error::Solver("transport basis is not a spanning tree".into()));
            }
        }

        // Pricing.
        let mut entering: Option<(usize, usize)> = None;
        let mut best: Option<T> = None;
        'scan: for i in 0..n {
            for j in 0..m {
                if basic[i * m + j] {
                    continue;
                }
                let reduced = T::sub(&T::sub(&cost[i * m + j], &u[i]), &v[j]);
                if T::improves(&reduced) {
                    if iter >= bland_after {
                        entering = Some((i, j));
                        break 'scan;
                    }
                    if best.as_ref().map_or(true, |b| reduced < *b) {
                        best = Some(reduced);
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut value = zero.clone();
            for idx in 0..n * m {
                value = T::add(&value, &T::mul(&flow[idx], &cost[idx]));
            }
            return Ok(TransportSolution { flow, u, v, value });
        };

        // Path from Row(ei) to Col(ej) through the basis tree.
        let path = tree_path(n, m, &basis, ei, ej)?;
        // Cycle = entering edge (+) followed by the path edges with
        // alternating signs starting at −.
        let mut theta: Option<T> = None;
        let mut leaving: Option<(usize, usize)> = None;
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = &flow[i * m + j];
                let smaller = match &theta {
                    None => true,
                    Some(t) => f < t || (!(t < f) && Some((i, j)) < leaving),
                };
                if smaller {
                    theta = Some(f.clone());
                    leaving = Some((i, j));
                }
            }
        }
        let theta = theta.ok_or_else(|| Error::Solver("degenerate transport cycle".into()))?;
        let (li, lj) = leaving.unwrap();

        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flow[i * m + j] = T::sub(&flow[i * m + j], &theta);
            } else {
                flow[i * m + j] = T::add(&flow[i * m + j], &theta);
            }
        }
        flow[ei * m + ej] = T::add(&flow[ei * m + ej], &theta);
        basic[li * m + lj] = false;
        basic[ei * m + ej] = true;
        flow[li * m + lj] = zero.clone();
        let kpos = basis.iter().position(|&e| e == (li, lj)).unwrap();
        basis[kpos] = (ei, ej);
    }
    Err(Error::Solver("transportation simplex did not converge".into()))
}

/// Basis edges on the unique tree path from Row(start) to Col(goal),
/// ordered from the Row(start) end. Consecutive edges alternate row/col
/// incidence, so signs alternate along the returned sequence.
fn tree_path(
    n: usize,
    m: usize,
    basis: &[(usize, usize)],
    start_row: usize,
    goal_col: usize,
) -> Result<Vec<(usize, usize)>> {
    // Nodes: rows 0..n, cols n..n+m.
    let node = |is_row: bool, idx: usize| if is_row { idx } else { n + idx };
    let mut adj: Vec<Vec<(usize, (usize, usize))>> = vec![Vec::new(); n + m];
    for &(i, j) in basis {
        adj[node(true, i)].push((node(false, j), (i, j)));
        adj[node(false, j)].push((node(true, i), (i, j)));
    }
    let source = node(true, start_row);
    let target = node(false, goal_col);
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; n + m];
    let mut seen = vec![false; n + m];
    seen[source] = true;
    let mut stack = vec![source];
    while let Some(x) = stack.pop() {
        if x == target {
            break;
        }
        for &(y, edge) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some((x, edge));
                stack.push(y);
            }
        }
    }
    if !seen[target] {
        return Err(Error::Solver("transport basis disconnected".into()));
    }
    let mut path = Vec::new();
    let mut cur = target;
    while cur != source {
        let (prev, edge) = parent[cur].unwrap();
        path.push(edge);
        cur = prev;
    }
    path.reverse();
    Ok(path)
}
