//! One-dimensional derivative-free maximization.
//!
//! A dense grid scan locates the best basin; Brent's method (parabolic
//! interpolation with golden-section fallback) then polishes the grid winner
//! inside the bracket formed by its two neighbours.

use crate::error::{Error, Result};

/// Default number of grid points for acquisition and incumbent searches.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Default Brent x-tolerance on the unit interval.
pub const DEFAULT_BRENT_TOL: f64 = 1e-6;

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const MAX_BRENT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptResult {
    pub x_star: f64,
    pub f_star: f64,
    /// Number of objective calls.
    pub evaluations: usize,
}

fn checked(x: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { x, value })
    }
}

/// `i`-th of `n` equally spaced points on `[lo, hi]`, hitting both ends exactly.
fn grid_point(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

struct GridScan {
    best: usize,
    values: Vec<f64>,
}

fn scan<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, n: usize) -> Result<GridScan> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!(
            "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
    }
    let mut values = Vec::with_capacity(n);
    let mut best = 0;
    for i in 0..n {
        let x = grid_point(lo, hi, n, i);
        let v = checked(x, f(x))?;
        // strict comparison keeps the smallest x on ties
        if v > values.get(best).copied().unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
        values.push(v);
    }
    Ok(GridScan { best, values })
}

/// Evaluates `f` on `n` equally spaced points of `[lo, hi]` (endpoints
/// included) and returns the best one; ties go to the smallest `x`.
pub fn grid_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize) -> Result<OptResult> {
    let g = scan(&mut f, lo, hi, n)?;
    Ok(OptResult {
        x_star: grid_point(lo, hi, n, g.best),
        f_star: g.values[g.best],
        evaluations: n,
    })
}

/// Brent maximization on the bracket `a < b < c` with `f(b) >= max(f(a), f(c))`.
pub fn brent_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, c: f64, tol: f64) -> Result<OptResult> {
    if !(a < b && b < c) {
        return Err(Error::InvalidBracket { a, b, c });
    }
    let fa = checked(a, f(a))?;
    let fb = checked(b, f(b))?;
    let fc = checked(c, f(c))?;
    if fb < fa || fb < fc {
        return Err(Error::InvalidBracket { a, b, c });
    }
    let mut r = brent_from(&mut f, a, b, c, fb, tol)?;
    r.evaluations += 3;
    Ok(r)
}

/// Core of Brent's method, phrased as minimization of `-f`. Starts from the
/// interior point `b` whose value is already known, so the returned point is
/// never worse than `b`.
fn brent_from<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, b: f64, hi: f64, fb: f64, tol: f64) -> Result<OptResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("Brent tolerance must be > 0, got {tol}")));
    }
    let (mut a, mut c) = (lo, hi);
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut gx, mut gw, mut gv) = (-fb, -fb, -fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evaluations = 0;

    for _ in 0..MAX_BRENT_ITERS {
        let xm = 0.5 * (a + c);
        let tol1 = 0.5 * tol + 2.0 * f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (c - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // trial parabola through x, w, v
            let r = (x - w) * (gx - gv);
            let mut q = (x - v) * (gx - gw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (c - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || c - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { c - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let gu = -checked(u, f(u))?;
        evaluations += 1;
        if gu <= gx {
            if u >= x {
                a = x;
            } else {
                c = x;
            }
            v = w;
            gv = gw;
            w = x;
            gw = gx;
            x = u;
            gx = gu;
        } else {
            if u < x {
                a = u;
            } else {
                c = u;
            }
            if gu <= gw || w == x {
                v = w;
                gv = gw;
                w = u;
                gw = gu;
            } else if gu <= gv || v == x || v == w {
                v = u;
                gv = gu;
            }
        }
    }
    Ok(OptResult {
        x_star: x,
        f_star: -gx,
        evaluations,
    })
}

/// Grid scan followed by Brent refinement around the grid winner. A winner
/// on either endpoint is returned as-is.
pub fn grid_then_brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, tol: f64) -> Result<OptResult> {
    let g = scan(&mut f, lo, hi, n)?;
    let k = g.best;
    let grid_best = OptResult {
        x_star: grid_point(lo, hi, n, k),
        f_star: g.values[k],
        evaluations: n,
    };
    if k == 0 || k + 1 == n {
        return Ok(grid_best);
    }
    let refined = brent_from(
        &mut f,
        grid_point(lo, hi, n, k - 1),
        grid_best.x_star,
        grid_point(lo, hi, n, k + 1),
        grid_best.f_star,
        tol,
    )?;
    Ok(OptResult {
        evaluations: n + refined.evaluations,
        ..if refined.f_star >= grid_best.f_star {
            refined
        } else {
            grid_best
        }
    })
}
