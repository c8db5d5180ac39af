//! Minimum-cost assignment (Hungarian algorithm with potentials) for
//! detection-to-track association.

/// Cost used for forbidden pairings; any admissible assignment beats it.
pub const FORBIDDEN: f64 = 1e30;

/// Solve the square minimum-cost assignment problem. `cost[i][j]` is the
/// cost of assigning row `i` to column `j`; returns `assignment[i] = j`.
///
/// O(n^3) shortest-augmenting-path formulation with row/column potentials.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    // 1-indexed potentials; p[j] = row matched to column j (0 = none).
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

/// Total cost of an assignment.
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn permute(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    permute(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        permute(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn two_by_two_crossed_costs() {
        // Nearest-neighbor would pick (0,0)+(1,1) = 1 + 10; the optimal
        // global pairing is (0,1)+(1,0) = 2 + 3.
        let cost = vec![vec![1.0, 2.0], vec![3.0, 10.0]];
        let a = hungarian(&cost);
        assert_eq!(assignment_cost(&cost, &a), brute_force(&cost));
        assert_eq!(a, vec![1, 0]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut state = 0x12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 10.0
        };
        for n in 2..=5 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
                let a = hungarian(&cost);
                let mut seen = vec![false; n];
                for &j in &a {
                    assert!(!seen[j], "column assigned twice");
                    seen[j] = true;
                }
                let optimal = brute_force(&cost);
                assert!(
                    (assignment_cost(&cost, &a) - optimal).abs() < 1e-9,
                    "n={n}: {} vs brute force {optimal}",
                    assignment_cost(&cost, &a)
                );
            }
        }
    }

    #[test]
    fn single_cell() {
        assert_eq!(hungarian(&[vec![3.0]]), vec![0]);
    }
}
