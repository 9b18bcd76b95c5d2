//! Bracketing scalar search: grid bracketing, golden-section maximization and
//! monotone root bisection.

/// Grid points used to bracket a maximum before refinement.
pub const GRID_POINTS: usize = 64;
/// Argument tolerance of the golden-section refinement.
pub const GOLDEN_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Evaluate `f` on `n` equally spaced points of `[a, b]` (endpoints included)
/// and return the neighbours of the best point as a bracket, together with
/// the best point. Ties go to the lowest argument.
pub fn grid_bracket_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (f64, f64, f64, f64) {
    assert!(n >= 3 && b > a);
    let step = (b - a) / (n - 1) as f64;
    let at = |i: usize| if i == n - 1 { b } else { a + step * i as f64 };
    let mut best = 0;
    let mut best_val = f(a);
    for i in 1..n {
        let v = f(at(i));
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    let lo = at(best.saturating_sub(1));
    let hi = at((best + 1).min(n - 1));
    (lo, hi, at(best), best_val)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
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
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse grid followed by golden-section refinement; never returns a value
/// below the best grid point.
pub fn maximize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    let (lo, hi, x_grid, f_grid) = grid_bracket_max(&f, a, b, GRID_POINTS);
    let (x, fx) = golden_section_max(&f, lo, hi, GOLDEN_TOL);
    if fx >= f_grid {
        (x, fx)
    } else {
        (x_grid, f_grid)
    }
}

/// Midpoint in the IEEE ordering of two non-negative doubles.
fn bit_midpoint(lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.to_bits(), hi.to_bits());
    f64::from_bits(a + (b - a) / 2)
}

/// Root of a monotone `f` on `[lo, hi] ⊂ [0, ∞)` with a sign change.
///
/// Bisects in the bit ordering of the doubles, so the bracket shrinks to two
/// adjacent floats (far below any fixed absolute width) in at most 64 steps
/// and tiny roots keep their relative precision. Returns the bracket end
/// with the smaller `|f|`. If `f` does not change sign, the endpoint with the
/// smaller `|f|` is returned.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    assert!(lo >= 0.0 && hi >= lo);
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return lo;
    }
    if f_hi == 0.0 {
        return hi;
    }
    if f_lo.signum() == f_hi.signum() {
        return if f_lo.abs() <= f_hi.abs() { lo } else { hi };
    }
    for _ in 0..128 {
        let mid = bit_midpoint(lo, hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        lo
    } else {
        hi
    }
}
