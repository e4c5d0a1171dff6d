//! Real-root extraction for cubic and quartic polynomials with a Newton
//! cleanup pass. Root acceptance elsewhere is by feasibility and stationarity
//! residual, so the solver only has to land close.

/// Real roots of `a x^3 + b x^2 + c x + d`.
pub fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        return real_quadratic_roots(b, c, d);
    }
    let b = b / a;
    let c = c / a;
    let d = d / a;
    // depressed cubic t^3 + p t + q with x = t - b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let mut roots = Vec::with_capacity(3);
    let disc = q * q / 4.0 + p * p * p / 27.0;
    if disc > 0.0 {
        // one real root (Cardano)
        let sq = disc.sqrt();
        let u = cbrt(-q / 2.0 + sq);
        let v = cbrt(-q / 2.0 - sq);
        roots.push(u + v - shift);
    } else if p.abs() < 1e-14 {
        roots.push(cbrt(-q) - shift);
    } else {
        // three real roots (trigonometric form)
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift);
        }
    }
    for r in &mut roots {
        *r = polish(*r, &[1.0, b, c, d]);
    }
    roots
}

/// Real roots of `a x^2 + b x + c`.
pub fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // Citardauq form for the smaller-magnitude root
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0, -b / a];
    }
    vec![q / a, c / q]
}

/// Real roots of `a x^4 + b x^3 + c x^2 + d x + e` via Ferrari's resolvent.
pub fn real_quartic_roots(a: f64, b: f64, c: f64, d: f64, e: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        return real_cubic_roots(b, c, d, e);
    }
    let b = b / a;
    let c = c / a;
    let d = d / a;
    let e = e / a;
    // depressed quartic y^4 + p y^2 + q y + r with x = y - b/4
    let shift = b / 4.0;
    let b2 = b * b;
    let p = c - 3.0 * b2 / 8.0;
    let q = d - b * c / 2.0 + b2 * b / 8.0;
    let r = e - b * d / 4.0 + b2 * c / 16.0 - 3.0 * b2 * b2 / 256.0;

    let mut ys = Vec::with_capacity(4);
    if q.abs() < 1e-12 * (1.0 + p.abs() + r.abs()) {
        // biquadratic
        for z in real_quadratic_roots(1.0, p, r) {
            if z >= 0.0 {
                let s = z.sqrt();
                ys.push(s);
                ys.push(-s);
            }
        }
    } else {
        // resolvent cubic z^3 + 2p z^2 + (p^2 - 4r) z - q^2
        let z0 = real_cubic_roots(1.0, 2.0 * p, p * p - 4.0 * r, -q * q)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if z0 > 0.0 {
            // (y^2 + a y + beta)(y^2 - a y + gamma) with a^2 = z0
            let alpha = z0.sqrt();
            let beta = (p + z0 - q / alpha) / 2.0;
            let gamma = (p + z0 + q / alpha) / 2.0;
            ys.extend(real_quadratic_roots(1.0, alpha, beta));
            ys.extend(real_quadratic_roots(1.0, -alpha, gamma));
        }
    }

    let coeffs = [1.0, b, c, d, e];
    let mut roots: Vec<f64> = ys
        .into_iter()
        .map(|y| polish(y - shift, &coeffs))
        .collect();
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-10 * (1.0 + x.abs()));
    roots
}

fn cbrt(x: f64) -> f64 {
    x.signum() * x.abs().powf(1.0 / 3.0)
}

/// A few Newton steps on the monic polynomial given by `coeffs`.
fn polish(mut x: f64, coeffs: &[f64]) -> f64 {
    for _ in 0..3 {
        let mut val = 0.0;
        let mut der = 0.0;
        for &c in coeffs {
            der = der * x + val;
            val = val * x + c;
        }
        if der.abs() < 1e-300 {
            break;
        }
        let step = val / der;
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_roots(mut got: Vec<f64>, mut want: Vec<f64>) {
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got.len(), want.len(), "got {got:?}, want {want:?}");
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-8, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn cubic_three_real() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        assert_roots(real_cubic_roots(1.0, -6.0, 11.0, -6.0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cubic_one_real() {
        // (x-2)(x^2+1) = x^3 - 2x^2 + x - 2
        assert_roots(real_cubic_roots(1.0, -2.0, 1.0, -2.0), vec![2.0]);
    }

    #[test]
    fn quartic_four_real() {
        // (x+1)(x-0.5)(x-2)(x-4) = x^4 - 5.5x^3 + 5.5x^2 + 5.5x - 4... expand directly
        // roots: -1, 0.5, 2, 4
        let (r1, r2, r3, r4) = (-1.0, 0.5, 2.0, 4.0);
        let b = -(r1 + r2 + r3 + r4);
        let c = r1 * r2 + r1 * r3 + r1 * r4 + r2 * r3 + r2 * r4 + r3 * r4;
        let d = -(r1 * r2 * r3 + r1 * r2 * r4 + r1 * r3 * r4 + r2 * r3 * r4);
        let e = r1 * r2 * r3 * r4;
        assert_roots(real_quartic_roots(1.0, b, c, d, e), vec![r1, r2, r3, r4]);
    }

    #[test]
    fn quartic_two_real() {
        // (x^2+1)(x-1)(x-3) = (x^2+1)(x^2-4x+3)
        assert_roots(
            real_quartic_roots(1.0, -4.0, 4.0, -4.0, 3.0),
            vec![1.0, 3.0],
        );
    }

    #[test]
    fn quartic_no_real() {
        // (x^2+1)(x^2+4)
        assert_roots(real_quartic_roots(1.0, 0.0, 5.0, 0.0, 4.0), vec![]);
    }

    #[test]
    fn biquadratic() {
        // x^4 - 5x^2 + 4 = (x^2-1)(x^2-4)
        assert_roots(
            real_quartic_roots(1.0, 0.0, -5.0, 0.0, 4.0),
            vec![-2.0, -1.0, 1.0, 2.0],
        );
    }
}
