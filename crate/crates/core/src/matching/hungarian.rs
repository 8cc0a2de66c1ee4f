//! Maximum-profit rectangular assignment (Kuhn-Munkres).

/// Minimum-cost assignment of every row of a square matrix; returns the
/// column of each row.
fn min_cost_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; p[j] is the row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best total profit of assigning `rows` injectively into `cols`.
fn best_total(profit: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let n = cols.len();
    let hi = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| profit[r][c]))
        .fold(f64::NEG_INFINITY, f64::max);
    // pad with zero-profit dummy rows up to a square matrix
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| if a < rows.len() { hi - profit[rows[a]][cols[b]] } else { hi })
                .collect()
        })
        .collect();
    let asg = min_cost_square(&cost);
    rows.iter().enumerate().map(|(a, &r)| profit[r][cols[asg[a]]]).sum()
}

/// Row-to-column assignment maximizing total profit, rows <= columns.
/// Among optimal assignments the lexicographically smallest column vector
/// is returned.
pub fn max_profit_assignment(profit: &[Vec<f64>]) -> Vec<usize> {
    let n_rows = profit.len();
    if n_rows == 0 {
        return Vec::new();
    }
    let n_cols = profit[0].len();
    assert!(n_rows <= n_cols, "more rows than columns");
    let all_rows: Vec<usize> = (0..n_rows).collect();
    let all_cols: Vec<usize> = (0..n_cols).collect();
    let opt = best_total(profit, &all_rows, &all_cols);
    let tol = 1e-12 * opt.abs().max(1.0);

    let mut chosen = Vec::with_capacity(n_rows);
    let mut fixed = 0.0;
    let mut used = vec![false; n_cols];
    for i in 0..n_rows {
        let rest_rows: Vec<usize> = (i + 1..n_rows).collect();
        let mut pick = None;
        for c in 0..n_cols {
            if used[c] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..n_cols).filter(|&j| !used[j] && j != c).collect();
            let total = fixed + profit[i][c] + best_total(profit, &rest_rows, &rest_cols);
            if total >= opt - tol {
                pick = Some(c);
                break;
            }
        }
        // rounding can hide every completion by a hair; fall back to the best one
        let c = pick.unwrap_or_else(|| {
            (0..n_cols)
                .filter(|&c| !used[c])
                .max_by(|&a, &b| {
                    let rest = |c: usize| {
                        let cols: Vec<usize> = (0..n_cols).filter(|&j| !used[j] && j != c).collect();
                        profit[i][c] + best_total(profit, &rest_rows, &cols)
                    };
                    rest(a).total_cmp(&rest(b)).then(b.cmp(&a))
                })
                .expect("a free column exists")
        });
        used[c] = true;
        fixed += profit[i][c];
        chosen.push(c);
    }
    chosen
}
