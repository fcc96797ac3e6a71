//! Adaptive Gauss-Kronrod quadrature and brute-force posterior oracles.
//!
//! Nothing outside tests and diagnostics depends on this module; the
//! production posterior is the closed form in `ebpredict`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::normal::ln_pdf;
use crate::prior::FamilyParams;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// 7-point Gauss weights at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub const MAX_INTERVALS: usize = 5000;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Integral of `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`, splitting
/// the worst interval until the error estimate meets the target.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    quad_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`quad`], starting from the pieces between sorted `breaks`.
pub fn quad_breaks(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if breaks.len() < 2 || !(abs_tol > 0.0 || rel_tol > 0.0) {
        return Err(Error::invalid(
            "quadrature needs two breakpoints and a positive tolerance",
        ));
    }
    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, err) = gk15(&f, w[0], w[1]);
        total += value;
        total_err += err;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let p = heap.pop().expect("non-empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            value: v2,
            err: e2,
        });
    }
    Ok(total)
}

/// Composite trapezoid rule on `n` equal pieces.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Posterior moments of mu given t, by numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMoments {
    pub mean: f64,
    pub var: f64,
}

enum Rule {
    Adaptive(f64),
    Trapezoid(usize),
}

fn oracle_moments(t: f64, p: &FamilyParams, rule: Rule) -> Result<OracleMoments> {
    p.validate()?;
    let comps = [
        (p.lambda, p.theta1, p.sigma1),
        (1.0 - p.lambda, p.theta2, p.sigma2),
    ];
    // log of weight * likelihood * prior density, shifted by a common
    // constant so tails far from t stay representable
    let ln_joint =
        |mu: f64, w: f64, m: f64, s: f64| w.ln() + ln_pdf(t, mu, 1.0) + ln_pdf(mu, m, s * s);
    let mut shift = f64::NEG_INFINITY;
    for &(w, m, s) in &comps {
        if w == 0.0 {
            continue;
        }
        if s == 0.0 {
            shift = shift.max(w.ln() + ln_pdf(t, m, 1.0));
        } else {
            let (lo, hi) = (m.min(t) - 1.0, m.max(t) + 1.0);
            for i in 0..=400 {
                let mu = lo + (hi - lo) * i as f64 / 400.0;
                shift = shift.max(ln_joint(mu, w, m, s));
            }
        }
    }
    let mut z = [0.0; 3];
    for &(w, m, s) in &comps {
        if w == 0.0 {
            continue;
        }
        if s == 0.0 {
            let d = (w.ln() + ln_pdf(t, m, 1.0) - shift).exp();
            z[0] += d;
            z[1] += d * m;
            z[2] += d * m * m;
            continue;
        }
        let lo = (m - 40.0 * s).min(t - 40.0);
        let hi = (m + 40.0 * s).max(t + 40.0);
        let mut breaks = vec![lo, t.min(m), t.max(m), hi];
        breaks.dedup();
        for (power, slot) in z.iter_mut().enumerate() {
            let g = |mu: f64| mu.powi(power as i32) * (ln_joint(mu, w, m, s) - shift).exp();
            *slot += match rule {
                Rule::Adaptive(tol) => quad_breaks(g, &breaks, tol * 1e-3, tol * 1e-3)?,
                Rule::Trapezoid(n) => trapezoid(g, lo, hi, n),
            };
        }
    }
    let mean = z[1] / z[0];
    Ok(OracleMoments {
        mean,
        var: z[2] / z[0] - mean * mean,
    })
}

/// `E(mu | t)` by adaptive quadrature; point masses enter as exact terms.
pub fn oracle_posterior_mean(t: f64, p: &FamilyParams, tol: f64) -> Result<f64> {
    Ok(oracle_posterior_moments(t, p, tol)?.mean)
}

pub fn oracle_posterior_moments(t: f64, p: &FamilyParams, tol: f64) -> Result<OracleMoments> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    oracle_moments(t, p, Rule::Adaptive(tol))
}

/// Second oracle on a fixed grid, for cross-checking the adaptive one.
pub fn trapezoid_posterior_moments(t: f64, p: &FamilyParams, n: usize) -> Result<OracleMoments> {
    oracle_moments(t, p, Rule::Trapezoid(n))
}
