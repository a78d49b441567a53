//! Dense phase-one simplex for small feasibility problems `A x = b, x >= 0`.

const PIVOT_EPS: f64 = 1e-12;

/// Returns a feasible `x` or `None` when the system is infeasible (phase-one
/// objective above `tol`). Uses Bland's rule, so it terminates on degenerate
/// problems; intended for a few dozen variables.
pub(crate) fn feasible_point(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    // tableau columns: n structural, m artificial, rhs
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase-one cost: sum of artificials, expressed in reduced form
    let reduced = |t: &Vec<Vec<f64>>, basis: &Vec<usize>| -> Vec<f64> {
        let mut c = vec![0.0; width];
        for j in n..n + m {
            c[j] = 1.0;
        }
        for (i, &bi) in basis.iter().enumerate() {
            let cb = c[bi];
            if cb != 0.0 {
                for j in 0..width {
                    c[j] -= cb * t[i][j];
                }
            }
        }
        c
    };

    for _ in 0..10_000 {
        let c = reduced(&t, &basis);
        let Some(enter) = (0..n + m).find(|&j| c[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > PIVOT_EPS {
                let ratio = t[i][width - 1] / t[i][enter];
                let better = ratio < best - PIVOT_EPS
                    || (ratio <= best + PIVOT_EPS && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else { break };
        let p = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        for i in 0..m {
            if i != r {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..width {
                        t[i][j] -= f * t[r][j];
                    }
                }
            }
        }
        basis[r] = enter;
    }

    let infeasibility: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &bi)| bi >= n)
        .map(|(i, _)| t[i][width - 1].abs())
        .sum();
    if infeasibility > tol {
        return None;
    }
    let mut x = vec![0.0; n];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < n {
            x[bi] = t[i][width - 1].max(0.0);
        }
    }
    Some(x)
}
