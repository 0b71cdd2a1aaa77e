//! Maximum-weight bipartite matching between MSs (rows) and PRBs (columns).

/// Maximum-weight matching of a dense `rows x cols` weight matrix.
///
/// Returns the column matched to each row. Edges with weight `<= 0` are never
/// reported: leaving a row unmatched is worth zero, so such edges cannot
/// improve the total.
///
/// Kuhn-Munkres with potentials on the square matrix padded with zeros,
/// `O(n^3)` for `n = max(rows, cols)`. The result depends only on the input,
/// rows are inserted in index order and columns scanned in index order.
pub fn max_weight_matching(weights: &[Vec<i64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    debug_assert!(weights.iter().all(|r| r.len() == cols));
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            -weights[i][j].max(0)
        } else {
            0
        }
    };

    // 1-based potentials; column 0 is the virtual root.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for j in 1..=n {
        let i = owner[j];
        if i >= 1 && i <= rows && j <= cols && weights[i - 1][j - 1] > 0 {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}

/// Matching for the case where every column carries the same weight for a
/// given row: the `min(rows, cols)` best positive rows take the columns in
/// order. Ties go to the lower row index.
pub fn top_rows_matching(row_weights: &[i64], cols: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..row_weights.len())
        .filter(|&i| row_weights[i] > 0)
        .collect();
    order.sort_by(|&a, &b| row_weights[b].cmp(&row_weights[a]).then(a.cmp(&b)));
    let mut assignment = vec![None; row_weights.len()];
    for (col, &row) in order.iter().take(cols).enumerate() {
        assignment[row] = Some(col);
    }
    assignment
}

/// Total weight of an assignment.
pub fn matching_weight(weights: &[Vec<i64>], assignment: &[Option<usize>]) -> i64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| weights[i][c]))
        .sum()
}
