//! Transportation simplex (MODI method) on a dense `m x n` cost matrix.
//!
//! Starts from the north-west corner basis, which is always a spanning tree of
//! `m + n - 1` cells. Entering cells follow the most negative reduced cost with
//! row-major tie-breaking; after a run of degenerate pivots the rule switches
//! to Bland's (first negative cell) until progress resumes. The leaving cell is
//! the minus-cell of smallest flow, ties going to the smallest row-major index.

use crate::error::{Error, Result};

/// Returns the positive flows `(row, col, flow)` of an optimal plan.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    debug_assert_eq!(cost.len(), m * n);

    let mut flow = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<usize> = Vec::with_capacity(m + n - 1);
    {
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(0.0);
            flow[i * n + j] = x;
            a[i] -= x;
            b[j] -= x;
            basic[i * n + j] = true;
            basis.push(i * n + j);
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cmax = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    if cmax == 0.0 {
        return Ok(collect(&flow, m, n));
    }
    let tol = 1e-12 * cmax;
    let max_iter = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    let mut parent = vec![usize::MAX; m + n];
    let mut queue = Vec::with_capacity(m + n);

    for _ in 0..max_iter {
        // tree adjacency: node r for rows, m + c for columns
        for a in adj.iter_mut() {
            a.clear();
        }
        for &cell in &basis {
            let (r, c) = (cell / n, cell % n);
            adj[r].push(m + c);
            adj[m + c].push(r);
        }

        // potentials u_r + v_c = cost on basic cells
        let mut seen = vec![false; m + n];
        seen[0] = true;
        u[0] = 0.0;
        queue.clear();
        queue.push(0);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &nb in &adj[node] {
                if seen[nb] {
                    continue;
                }
                seen[nb] = true;
                if node < m {
                    let c = nb - m;
                    v[c] = cost[node * n + c] - u[node];
                } else {
                    let c = node - m;
                    u[nb] = cost[nb * n + c] - v[c];
                }
                queue.push(nb);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Numeric("transport basis is not a spanning tree".into()));
        }

        let bland = degenerate_run > 2 * (m + n);
        let mut enter: Option<(usize, f64)> = None;
        'scan: for r in 0..m {
            for c in 0..n {
                let cell = r * n + c;
                if basic[cell] {
                    continue;
                }
                let red = cost[cell] - u[r] - v[c];
                if red < -tol {
                    match enter {
                        Some((_, best)) if red >= best => {}
                        _ => enter = Some((cell, red)),
                    }
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((entering, _)) = enter else {
            return Ok(collect(&flow, m, n));
        };
        let (re, ce) = (entering / n, entering % n);

        // path in the tree from row re to column ce
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[re] = re;
        queue.clear();
        queue.push(re);
        let mut head = 0;
        let target = m + ce;
        while head < queue.len() && parent[target] == usize::MAX {
            let node = queue[head];
            head += 1;
            for &nb in &adj[node] {
                if parent[nb] == usize::MAX {
                    parent[nb] = node;
                    queue.push(nb);
                }
            }
        }
        let mut path = vec![target];
        let mut node = target;
        while node != re {
            node = parent[node];
            path.push(node);
        }
        path.reverse();
        // cells along path re -> ... -> ce alternate minus, plus, ..., minus
        let cells: Vec<usize> = path
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if a < m {
                    a * n + (b - m)
                } else {
                    b * n + (a - m)
                }
            })
            .collect();

        let mut leave: Option<usize> = None;
        for (k, &cell) in cells.iter().enumerate() {
            if k % 2 == 1 {
                continue;
            }
            leave = match leave {
                None => Some(cell),
                Some(l) if flow[cell] < flow[l] || (flow[cell] == flow[l] && cell < l) => Some(cell),
                keep => keep,
            };
        }
        let leaving = leave.expect("cycle has a minus cell");
        let theta = flow[leaving].max(0.0);
        for (k, &cell) in cells.iter().enumerate() {
            if k % 2 == 0 {
                flow[cell] = (flow[cell] - theta).max(0.0);
            } else {
                flow[cell] += theta;
            }
        }
        flow[entering] = theta;
        flow[leaving] = 0.0;
        basic[leaving] = false;
        basic[entering] = true;
        let pos = basis.iter().position(|&c| c == leaving).expect("leaving cell is basic");
        basis[pos] = entering;

        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }
    Err(Error::Numeric(format!("transport simplex did not converge in {max_iter} pivots")))
}

fn collect(flow: &[f64], m: usize, n: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for r in 0..m {
        for c in 0..n {
            let f = flow[r * n + c];
            if f > 0.0 {
                out.push((r, c, f));
            }
        }
    }
    out
}
