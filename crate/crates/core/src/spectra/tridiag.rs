//! Householder reduction to tridiagonal form and implicit QL on the result.
//!
//! Only the lower triangle of the row-major input is read. Each step of the
//! reduction makes a single pass over the trailing lower triangle: the rank-2
//! update of step k is fused with the symmetric matrix-vector product that
//! step k + 1 needs, so the O(n^3) part streams the matrix once per column.

use crate::error::{LabError, Result};

/// Elementary reflector `H = I - tau v v^T` with `H x = beta e_1`, `v[0] = 1`.
fn householder(x: &[f64], v: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    v[0] = 1.0;
    if x.len() == 1 {
        return (0.0, alpha);
    }
    let tail_sq: f64 = x[1..].iter().map(|t| t * t).sum();
    if tail_sq == 0.0 {
        v[1..].iter_mut().for_each(|t| *t = 0.0);
        return (0.0, alpha);
    }
    let norm = (alpha * alpha + tail_sq).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for (vi, xi) in v[1..].iter_mut().zip(&x[1..]) {
        *vi = xi * scale;
    }
    (tau, beta)
}

/// Applies the pending rank-2 update to `r[j] -= vi w[j] + wi v[j]` while
/// accumulating `u . r` and scattering `r[j] ui` into `p`.
#[inline]
fn fused_update_symv(r: &mut [f64], w: &[f64], v: &[f64], u: &[f64], p: &mut [f64], vi: f64, wi: f64, ui: f64) -> f64 {
    let len = r.len();
    let (w, v, u, p) = (&w[..len], &v[..len], &u[..len], &mut p[..len]);
    let mut acc = [0.0f64; 4];
    let split = len - len % 4;
    let (r_main, r_tail) = r.split_at_mut(split);
    for (c, rc) in r_main.chunks_exact_mut(4).enumerate() {
        let base = c * 4;
        for l in 0..4 {
            let j = base + l;
            let a = rc[l] - vi * w[j] - wi * v[j];
            rc[l] = a;
            acc[l] += a * u[j];
            p[j] += a * ui;
        }
    }
    let mut tail = 0.0;
    for (l, rj) in r_tail.iter_mut().enumerate() {
        let j = split + l;
        let a = *rj - vi * w[j] - wi * v[j];
        *rj = a;
        tail += a * u[j];
        p[j] += a * ui;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn symv_row(r: &[f64], u: &[f64], p: &mut [f64], ui: f64) -> f64 {
    let len = r.len();
    let (u, p) = (&u[..len], &mut p[..len]);
    let mut acc = [0.0f64; 4];
    let split = len - len % 4;
    for (c, rc) in r[..split].chunks_exact(4).enumerate() {
        let base = c * 4;
        for l in 0..4 {
            let j = base + l;
            acc[l] += rc[l] * u[j];
            p[j] += rc[l] * ui;
        }
    }
    let mut tail = 0.0;
    for j in split..len {
        tail += r[j] * u[j];
        p[j] += r[j] * ui;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Reduces the symmetric matrix `a` (row-major, lower triangle used) to a
/// symmetric tridiagonal with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples `d[i]` and `d[i + 1]`). `a` is overwritten.
pub fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return (d, e);
    }
    d[0] = a[0];
    if n == 1 {
        return (d, e);
    }

    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut v_next = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_next = vec![0.0; n];

    // step 0: reflector from column 0 and a plain symv on the trailing block
    let m0 = n - 1;
    for i in 0..m0 {
        x[i] = a[(i + 1) * n];
    }
    let (mut tau, beta) = householder(&x[..m0], &mut v[..m0]);
    e[0] = beta;
    p[..m0].iter_mut().for_each(|t| *t = 0.0);
    if tau != 0.0 {
        for i in 0..m0 {
            let row = (1 + i) * n + 1;
            let r = &a[row..row + i + 1];
            let dot = symv_row(&r[..i], &v[..i], &mut p[..i], v[i]);
            p[i] += dot + r[i] * v[i];
        }
    }

    for k in 0..n - 1 {
        let m = n - k - 1;
        let off = k + 1;
        if tau != 0.0 {
            let pv: f64 = p[..m].iter().zip(&v[..m]).map(|(pi, vi)| pi * vi).sum();
            let alpha = -0.5 * tau * tau * pv;
            for i in 0..m {
                w[i] = tau * p[i] + alpha * v[i];
            }
        } else {
            w[..m].iter_mut().for_each(|t| *t = 0.0);
            v[..m].iter_mut().for_each(|t| *t = 0.0);
        }
        d[off] = a[off * n + off] - 2.0 * v[0] * w[0];
        if m == 1 {
            break;
        }

        // updated column `off` below the diagonal feeds the next reflector
        let mm = m - 1;
        for i in 1..m {
            x[i - 1] = a[(off + i) * n + off] - v[i] * w[0] - w[i] * v[0];
        }
        let (tau_next, beta_next) = householder(&x[..mm], &mut v_next[..mm]);
        e[off] = beta_next;

        p_next[..mm].iter_mut().for_each(|t| *t = 0.0);
        for i in 1..m {
            let row = (off + i) * n + off;
            let r = &mut a[row..row + i + 1];
            let (vi, wi) = (v[i], w[i]);
            r[0] -= vi * w[0] + wi * v[0];
            let ui = v_next[i - 1];
            let dot = fused_update_symv(&mut r[1..i], &w[1..i], &v[1..i], &v_next[..i - 1], &mut p_next[..i - 1], vi, wi, ui);
            let diag = r[i] - 2.0 * vi * wi;
            r[i] = diag;
            p_next[i - 1] += dot + diag * ui;
        }

        std::mem::swap(&mut v, &mut v_next);
        std::mem::swap(&mut p, &mut p_next);
        tau = tau_next;
    }
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.
///
/// `budget` caps the total number of QL sweeps across all eigenvalues.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, e: &[f64], budget: usize) -> Result<Vec<f64>> {
    let n = d.len();
    if n <= 1 {
        return Ok(d);
    }
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut sweeps = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > budget {
                return Err(LabError::NoConvergence { index: l, residual: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence).
pub fn sturm_count_below(d: &[f64], e_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q == 0.0 { f64::EPSILON * (e_sq[i - 1].sqrt() + 1e-300) } else { q };
        q = d[i] - x - e_sq[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_max_eigenvalue(d: &[f64], e: &[f64]) -> f64 {
    let n = d.len();
    let e_sq: Vec<f64> = e.iter().map(|t| t * t).collect();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let rad = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - rad);
        hi = hi.max(d[i] + rad);
    }
    while hi - lo > 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count_below(d, &e_sq, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
