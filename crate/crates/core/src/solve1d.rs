//! Scalar bracketing, root finding and line minimization used by the
//! spectral-curve and critical-point searches.

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub f: f64,
}

/// Illinois-damped false position on a sign-changing bracket `[a, b]`.
///
/// Stops when the bracket width drops below `x_tol` or `|f|` below `f_tol`.
/// The function must satisfy `fa * fb <= 0` on entry.
pub(crate) fn illinois<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Root {
    if fa == 0.0 {
        return Root { x: a, f: fa };
    }
    if fb == 0.0 {
        return Root { x: b, f: fb };
    }
    debug_assert!(fa * fb < 0.0, "illinois requires a sign change");
    let mut side = 0i8;
    let (mut best_x, mut best_f) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..max_iter {
        let mut x = (a * fb - b * fa) / (fb - fa);
        // Guard against stagnation at an endpoint.
        if !(x > a.min(b) && x < a.max(b)) || !x.is_finite() {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() < best_f.abs() {
            best_x = x;
            best_f = fx;
        }
        if fx == 0.0 || fx.abs() <= f_tol {
            return Root { x, f: fx };
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= x_tol {
            let x = 0.5 * (a + b);
            let fx = f(x);
            if fx.abs() < best_f.abs() {
                best_x = x;
                best_f = fx;
            }
            return Root {
                x: best_x,
                f: best_f,
            };
        }
    }
    Root {
        x: best_x,
        f: best_f,
    }
}
