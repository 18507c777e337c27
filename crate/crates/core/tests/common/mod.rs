//! Independent oracles shared by integration tests.

use pairmine::text::{Sentence, TokenId};

/// Relative error with a small absolute floor so exact zeros compare cleanly.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Numeric gradient of `f` at `x` by perturbing each coordinate by `+-step`.
pub fn central_diff(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn sentence(ids: &[u32]) -> Sentence {
    Sentence {
        ids: ids.iter().map(|&i| TokenId(i)).collect(),
        surface: String::new(),
    }
}

/// Greedy decoding by exhaustion: enumerates every partial matching of an
/// `rows x cols` score matrix and keeps those where each member clears `rho`
/// and every non-member that clears `rho` is blocked by a better-ranked member
/// sharing its row or column. Rank is `p` descending, then `(row, col)`.
pub fn brute_force_greedy(p: &[Vec<f64>], rho: f64) -> Vec<Vec<(usize, usize)>> {
    let rows = p.len();
    let cols = p.first().map_or(0, Vec::len);
    let better = |a: (usize, usize), b: (usize, usize)| {
        let (pa, pb) = (p[a.0][a.1], p[b.0][b.1]);
        pa > pb || (pa == pb && a < b)
    };
    let mut found = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; cols];
    enumerate(rows, cols, 0, &mut used, &mut current, &mut |m: &[(usize, usize)]| {
        if m.iter().any(|&(i, j)| p[i][j] < rho) {
            return;
        }
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < rho || m.contains(&(i, j)) {
                    continue;
                }
                let blocked = m
                    .iter()
                    .any(|&f| (f.0 == i || f.1 == j) && better(f, (i, j)));
                if !blocked {
                    return;
                }
            }
        }
        let mut m = m.to_vec();
        m.sort_unstable();
        found.push(m);
    });
    found
}

fn enumerate(
    rows: usize,
    cols: usize,
    row: usize,
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    visit: &mut impl FnMut(&[(usize, usize)]),
) {
    if row == rows {
        visit(current);
        return;
    }
    enumerate(rows, cols, row + 1, used, current, visit);
    for j in 0..cols {
        if !used[j] {
            used[j] = true;
            current.push((row, j));
            enumerate(rows, cols, row + 1, used, current, visit);
            current.pop();
            used[j] = false;
        }
    }
}
