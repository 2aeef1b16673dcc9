//! Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
//! potentials, O(n^3)).

/// Solves the assignment problem for a square matrix of integer costs.
///
/// Returns `(assignment, total)` where `assignment[row]` is the column matched
/// to `row`. Rows are inserted in index order and ties between columns go to
/// the lowest column index, so the result is deterministic.
///
/// # Panics
///
/// Panics if the matrix is not square.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    assert!(cost.iter().all(|row| row.len() == n), "cost matrix must be square");
    if n == 0 {
        return (Vec::new(), 0);
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; column 0 is the virtual column holding the row being inserted.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<i64>]) -> i64 {
        fn rec(cost: &[Vec<i64>], row: usize, used: &mut Vec<bool>, acc: i64, best: &mut i64) {
            if row == cost.len() {
                *best = (*best).min(acc);
                return;
            }
            for c in 0..cost.len() {
                if !used[c] {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost[row][c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = i64::MAX;
        rec(cost, 0, &mut vec![false; cost.len()], 0, &mut best);
        best
    }

    #[test]
    fn small_known_instance() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let (a, total) = min_cost_assignment(&cost);
        assert_eq!(total, 5);
        let mut cols = a.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(min_cost_assignment(&[]), (vec![], 0));
        assert_eq!(min_cost_assignment(&[vec![7]]), (vec![0], 7));
    }

    #[test]
    fn all_zero_is_identity() {
        let cost = vec![vec![0; 4]; 4];
        assert_eq!(min_cost_assignment(&cost).0, vec![0, 1, 2, 3]);
    }

    proptest! {
        #[test]
        fn matches_permutation_brute_force(n in 1usize..=6, seed in prop::collection::vec(0i64..20, 36)) {
            let cost: Vec<Vec<i64>> = (0..n).map(|r| (0..n).map(|c| seed[r * 6 + c]).collect()).collect();
            let (a, total) = min_cost_assignment(&cost);
            prop_assert_eq!(total, brute_force(&cost));
            let mut cols = a.clone();
            cols.sort();
            prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
        }
    }
}
