//! Shared oracle machinery for the integration suites: exact enumeration of
//! margin-constrained integer tables, the conditional count law at a fixed
//! probability table, total-variation distance, and midpoint-grid quadrature
//! for low-dimensional posterior integrals. Everything here is independent
//! of the sampler implementation so it can serve as a reference.

#![allow(dead_code)]

/// Exact factorial as f64; the enumerable tables keep counts small enough
/// that every value is exactly representable.
pub fn factorial(n: i64) -> f64 {
    assert!((0..=18).contains(&n), "factorial oracle covers 0..=18, got {n}");
    (1..=n).map(|k| k as f64).product()
}

/// All nonnegative integer tables (row-major) with the given margins and
/// optional cell-wise lower bounds. Cells are filled row-major; the last
/// cell of each row and the whole last row are forced by the remaining
/// budgets, so the recursion only branches on the free block.
pub fn enumerate_fiber(rows: &[i64], cols: &[i64], floors: Option<&[i64]>) -> Vec<Vec<i64>> {
    let nr = rows.len();
    let nc = cols.len();
    assert_eq!(
        rows.iter().sum::<i64>(),
        cols.iter().sum::<i64>(),
        "margins must agree on the total"
    );
    let floors = match floors {
        Some(f) => f.to_vec(),
        None => vec![0; nr * nc],
    };
    assert_eq!(floors.len(), nr * nc);
    let mut out = Vec::new();
    let mut cur = vec![0i64; nr * nc];
    let mut rows_rem = rows.to_vec();
    let mut cols_rem = cols.to_vec();
    fill_cell(0, nr, nc, &mut rows_rem, &mut cols_rem, &floors, &mut cur, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn fill_cell(
    idx: usize,
    nr: usize,
    nc: usize,
    rows_rem: &mut [i64],
    cols_rem: &mut [i64],
    floors: &[i64],
    cur: &mut [i64],
    out: &mut Vec<Vec<i64>>,
) {
    if idx == nr * nc {
        out.push(cur.to_vec());
        return;
    }
    let r = idx / nc;
    let c = idx % nc;
    let mut lo = floors[idx].max(0);
    let mut hi = rows_rem[r].min(cols_rem[c]);
    if c == nc - 1 {
        lo = lo.max(rows_rem[r]);
        hi = hi.min(rows_rem[r]);
    }
    if r == nr - 1 {
        lo = lo.max(cols_rem[c]);
        hi = hi.min(cols_rem[c]);
    }
    let mut v = lo;
    while v <= hi {
        cur[idx] = v;
        rows_rem[r] -= v;
        cols_rem[c] -= v;
        fill_cell(idx + 1, nr, nc, rows_rem, cols_rem, floors, cur, out);
        rows_rem[r] += v;
        cols_rem[c] += v;
        v += 1;
    }
    cur[idx] = 0;
}

/// Normalized conditional law over the fiber tables, each weighted by
/// prod_cells theta^(n - floor) / (n - floor)! — the count kernel's
/// stationary law at a fixed probability table (`log_theta` row-major,
/// same layout as the tables).
pub fn fiber_law(tables: &[Vec<i64>], floors: Option<&[i64]>, log_theta: &[f64]) -> Vec<f64> {
    let log_w: Vec<f64> = tables
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(i, &n)| {
                    let m = n - floors.map_or(0, |f| f[i]);
                    assert!(m >= 0, "table violates its floors");
                    m as f64 * log_theta[i] - factorial(m).ln()
                })
                .sum()
        })
        .collect();
    normalize_log_weights(&log_w)
}

/// exp-normalize a log-weight vector into a probability vector.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let mx = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_w.iter().map(|&w| (w - mx).exp()).collect();
    let z: f64 = p.iter().sum();
    assert!(z > 0.0, "all weights vanished");
    for q in &mut p {
        *q /= z;
    }
    p
}

/// Total-variation distance between two probability vectors on the same
/// support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Midpoint-rule integral of `f` over [lo, hi] with `n` panels.
pub fn grid1<F: FnMut(f64) -> f64>(lo: f64, hi: f64, n: usize, mut f: F) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Midpoint-rule integral of `f` over a box with `n` panels per axis.
pub fn grid2<F: FnMut(f64, f64) -> f64>(
    lo: (f64, f64),
    hi: (f64, f64),
    n: usize,
    mut f: F,
) -> f64 {
    let h0 = (hi.0 - lo.0) / n as f64;
    let h1 = (hi.1 - lo.1) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x = lo.0 + (i as f64 + 0.5) * h0;
        for j in 0..n {
            let y = lo.1 + (j as f64 + 0.5) * h1;
            total += f(x, y);
        }
    }
    total * h0 * h1
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One verdict line per acceptance criterion, printed before the assertion
/// so failures still show the measured numbers.
pub fn report(criterion: u32, desc: &str, pass: bool) {
    println!("criterion {criterion} {}: {desc}", if pass { "PASS" } else { "FAIL" });
}
