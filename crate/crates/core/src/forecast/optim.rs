//! One-dimensional solvers used by the update rules.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximiser of a unimodal `f` on `[lo, hi]` by golden-section search,
/// accurate to `tol`. The endpoints are checked last so boundary maxima are
/// returned exactly.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let (flo, fhi) = (f(lo), f(hi));
    if fhi > fm && fhi >= flo {
        hi
    } else if flo > fm {
        lo
    } else {
        mid
    }
}

/// Root of a strictly decreasing function `g` on `[lo, hi]` with
/// `g(lo) > 0 > g(hi)`, by Newton steps safeguarded with bisection.
/// `eval` returns `(g(x), g'(x))`. Newton steps that leave the bracket or
/// fail to halve the step of two iterations ago are replaced by bisection.
pub fn decreasing_root<F: Fn(f64) -> (f64, f64)>(eval: F, lo: f64, hi: f64, xtol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    let mut dx_old = b - a;
    let mut dx = dx_old;
    let (mut g, mut dg) = eval(x);
    for _ in 0..300 {
        if g == 0.0 {
            return x;
        }
        if g > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - g / dg;
        let use_newton = dg < 0.0 && newton > a && newton < b && (2.0 * g).abs() <= (dx_old * dg).abs();
        dx_old = dx;
        if use_newton {
            dx = newton - x;
            x = newton;
        } else {
            dx = 0.5 * (b - a);
            x = a + dx;
        }
        if dx.abs() <= xtol || b - a <= xtol {
            return x;
        }
        (g, dg) = eval(x);
    }
    x
}
