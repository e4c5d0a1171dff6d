//! Constrained and unconstrained maximum-likelihood estimation.
//!
//! Under the null (common proportion) the MLE has a closed form: the pooled
//! stationarity equations reduce to a cubic in pi, solved trigonometrically,
//! with R recovered as a rational function of pi. Every closed-form result is
//! verified against the stationarity equations and a numeric profile search
//! takes over if the residual is too large.
//!
//! The unconstrained MLE alternates per-group quartic solves for each pi_i
//! with Newton updates of the shared R until the R increments fall below
//! 1e-5, then polishes to a gradient norm below 1e-6.

use crate::data::{GroupCounts, StudyData};
use crate::error::{Error, Result};
use crate::model::{cell_probabilities, log_likelihood, pi_max, ModelParams};
use crate::poly::real_quartic_roots;

/// How an estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FitMethod {
    ClosedForm,
    FisherScoring,
    NumericFallback,
}

/// A maximum-likelihood fit.
///
/// For constrained fits `pi_hat` holds the common value replicated across
/// groups. `r_hat` is `None` when the data contain no bilateral subjects
/// (R is not estimable).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MleFit {
    pub pi_hat: Vec<f64>,
    pub r_hat: Option<f64>,
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: u32,
    pub gradient_norm: f64,
    pub method: FitMethod,
}

impl MleFit {
    /// The fitted parameters, when R was estimable.
    pub fn params(&self) -> Result<ModelParams> {
        let r = self.r_hat.ok_or(Error::RNotEstimable)?;
        ModelParams::new(self.pi_hat.clone(), r)
    }

    /// Per-group intraclass correlations at the fit.
    pub fn rho_hat(&self) -> Result<Vec<f64>> {
        let r = self.r_hat.ok_or(Error::RNotEstimable)?;
        self.pi_hat
            .iter()
            .map(|&p| crate::model::rho_from(p, r))
            .collect()
    }
}

const GRAD_TOL: f64 = 1e-6;
const R_STEP_TOL: f64 = 1e-5;
const MAX_ITER: u32 = 500;
const BOUNDARY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// score equations and second derivatives
// ---------------------------------------------------------------------------

/// dl/dpi for one group. Zero-count terms are dropped exactly.
pub(crate) fn dl_dpi(g: &GroupCounts, pi: f64, r: f64) -> Result<f64> {
    let p0 = r * pi * pi - 2.0 * pi + 1.0;
    let rp1 = r * pi - 1.0;
    let mut total = 0.0;
    if g.m2 > 0 {
        guard(pi, "pi")?;
        total += 2.0 * g.m2 as f64 / pi;
    }
    if g.m0 > 0 {
        guard(p0, "p0 cell")?;
        total += (2.0 * r * pi - 2.0) * g.m0 as f64 / p0;
    }
    if g.m1 > 0 {
        guard(-rp1, "p1 cell")?;
        guard(pi, "pi")?;
        total += (2.0 * r * pi - 1.0) * g.m1 as f64 / (pi * rp1);
    }
    if g.n1 > 0 {
        guard(pi, "pi")?;
        total += g.n1 as f64 / pi;
    }
    if g.n0 > 0 {
        guard(1.0 - pi, "1 - pi")?;
        total -= g.n0 as f64 / (1.0 - pi);
    }
    Ok(total)
}

/// dl/dR over all groups.
pub(crate) fn dl_dr(data: &StudyData, pis: &[f64], r: f64) -> Result<f64> {
    guard(r, "R")?;
    let mut total = data.s(2) as f64 / r;
    for (g, &pi) in data.groups().iter().zip(pis) {
        let p0 = r * pi * pi - 2.0 * pi + 1.0;
        let rp1 = r * pi - 1.0;
        if g.m0 > 0 {
            guard(p0, "p0 cell")?;
            total += pi * pi * g.m0 as f64 / p0;
        }
        if g.m1 > 0 {
            guard(-rp1, "p1 cell")?;
            total += pi * g.m1 as f64 / rp1;
        }
    }
    Ok(total)
}

/// Observed d2l/dpi2 for one group (zero-count terms dropped).
fn d2l_dpi2(g: &GroupCounts, pi: f64, r: f64) -> f64 {
    let p0 = r * pi * pi - 2.0 * pi + 1.0;
    let rp1 = r * pi - 1.0;
    let mut total = 0.0;
    if g.m0 > 0 {
        total += g.m0 as f64 * (-2.0 * r * r * pi * pi + 4.0 * r * pi + 2.0 * r - 4.0) / (p0 * p0);
    }
    if g.m1 > 0 {
        total -= g.m1 as f64 * (2.0 * r * r * pi * pi - 2.0 * r * pi + 1.0) / (pi * pi * rp1 * rp1);
    }
    if g.m2 > 0 {
        total -= 2.0 * g.m2 as f64 / (pi * pi);
    }
    if g.n1 > 0 {
        total -= g.n1 as f64 / (pi * pi);
    }
    if g.n0 > 0 {
        total -= g.n0 as f64 / ((1.0 - pi) * (1.0 - pi));
    }
    total
}

/// Observed d2l/dpi dR for one group.
fn d2l_dpi_dr(g: &GroupCounts, pi: f64, r: f64) -> f64 {
    let p0 = r * pi * pi - 2.0 * pi + 1.0;
    let rp1 = r * pi - 1.0;
    let mut total = 0.0;
    if g.m0 > 0 {
        total += 2.0 * pi * (1.0 - pi) * g.m0 as f64 / (p0 * p0);
    }
    if g.m1 > 0 {
        total -= g.m1 as f64 / (rp1 * rp1);
    }
    total
}

/// Observed d2l/dR2 over all groups; strictly negative on the interior.
pub(crate) fn d2l_dr2(data: &StudyData, pis: &[f64], r: f64) -> f64 {
    let mut total = -(data.s(2) as f64) / (r * r);
    for (g, &pi) in data.groups().iter().zip(pis) {
        let p0 = r * pi * pi - 2.0 * pi + 1.0;
        let rp1 = r * pi - 1.0;
        if g.m0 > 0 {
            total -= pi.powi(4) * g.m0 as f64 / (p0 * p0);
        }
        if g.m1 > 0 {
            total -= pi * pi * g.m1 as f64 / (rp1 * rp1);
        }
    }
    total
}

fn guard(v: f64, what: &str) -> Result<()> {
    if v <= 0.0 {
        return Err(Error::DomainError(format!(
            "{what} is {v} at a point with positive count"
        )));
    }
    Ok(())
}

/// Score vector `(dl/dpi_1, ..., dl/dpi_g, dl/dR)` at interior parameters.
pub fn score_gradient(data: &StudyData, params: &ModelParams) -> Result<Vec<f64>> {
    if params.pi().len() != data.g() {
        return Err(Error::InfeasibleParams(format!(
            "{} proportions for {} groups",
            params.pi().len(),
            data.g()
        )));
    }
    let r = params.r();
    let mut grad = Vec::with_capacity(data.g() + 1);
    for (g, &pi) in data.groups().iter().zip(params.pi()) {
        grad.push(dl_dpi(g, pi, r)?);
    }
    grad.push(dl_dr(data, params.pi(), r)?);
    Ok(grad)
}

// ---------------------------------------------------------------------------
// per-group quartic
// ---------------------------------------------------------------------------

/// Coefficients `(a, b, c, d, e)` of the stationarity quartic
/// `a pi^4 + b pi^3 + c pi^2 + d pi + e = 0` for one group at fixed R.
///
/// Obtained by clearing the denominators of dl/dpi; the quartic vanishes at
/// every stationary point of the group's log-likelihood in pi. The
/// correctness of the coefficients against a bracketing solve of dl/dpi is
/// pinned by the test suite, so no per-call rederivation is needed.
pub fn quartic_coefficients(group: &GroupCounts, r: f64) -> [f64; 5] {
    let [m0, m1, m2, n0, n1] = group.as_array();
    let m = m0 + m1 + m2;
    let n = n0 + n1;
    let a = r * r * (2.0 * m + n);
    let b = -r * ((4.0 * m0 + 5.0 * m1 + 6.0 * m2 + 3.0 * n0 + 3.0 * n1)
        + r * (2.0 * m0 + 2.0 * m1 + 2.0 * m2 + n1));
    let c = r * (4.0 * m0 + 7.0 * m1 + 8.0 * m2 + n0 + 4.0 * n1) + 2.0 * (m + n) + 2.0 * m2;
    let d = -(2.0 * m0
        + (3.0 + 2.0 * r) * m1
        + (6.0 + 2.0 * r) * m2
        + n0
        + (3.0 + r) * n1);
    let e = m1 + 2.0 * m2 + n1;
    [a, b, c, d, e]
}

/// Group log-likelihood contribution; `-inf` when a positive count sits on a
/// zero cell.
fn group_log_lik(g: &GroupCounts, pi: f64, r: f64) -> f64 {
    let Ok(cells) = cell_probabilities(pi, r) else {
        return f64::NEG_INFINITY;
    };
    let mut total = 0.0;
    for (count, p) in [
        (g.m0, cells.p0),
        (g.m1, cells.p1),
        (g.m2, cells.p2),
        (g.n0, 1.0 - pi),
        (g.n1, pi),
    ] {
        if count > 0 {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += count as f64 * p.ln();
        }
    }
    total
}

/// Newton iteration on dl/dpi with a bisection safeguard inside `(lo, hi)`.
fn refine_stationary(g: &GroupCounts, r: f64, mut x: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..60 {
        let Ok(f) = dl_dpi(g, x, r) else { break };
        if f.abs() < 1e-12 {
            break;
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = d2l_dpi2(g, x, r);
        let mut next = if d.abs() > 1e-300 { x - f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// MLE of pi for one group at fixed R.
///
/// Stationary candidates come from the quartic restricted to the feasible
/// interval `(0, pi_max(R))`; each is polished against dl/dpi and the one
/// with the largest group log-likelihood wins, provided it also beats the
/// attainable boundary values. A group with only unilateral data returns the
/// binomial MLE `n1/n` directly.
pub fn solve_pi_given_r(group: &GroupCounts, r: f64) -> Result<f64> {
    if group.m() + group.n() == 0 {
        return Err(Error::DegenerateData("group has no subjects".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InfeasibleParams(format!("R = {r} must be positive")));
    }
    if group.m() == 0 {
        // binomial: R drops out
        let pi = group.n1 as f64 / group.n() as f64;
        if pi <= 0.0 || pi >= 1.0 {
            return Err(Error::NoInteriorRoot { boundary: pi });
        }
        return Ok(pi);
    }

    let hi = pi_max(r);
    let inset = 1e-9 * hi;
    let [a, b, c, d, e] = quartic_coefficients(group, r);

    let mut best: Option<(f64, f64)> = None;
    for root in real_quartic_roots(a, b, c, d, e) {
        if !(root > inset && root < hi - inset) {
            continue;
        }
        let root = refine_stationary(group, r, root, inset, hi - inset);
        let ll = group_log_lik(group, root, r);
        if ll.is_finite() && best.map_or(true, |(_, b_ll)| ll > b_ll) {
            best = Some((root, ll));
        }
    }

    // attainable boundary suprema (finite only when no count blocks the edge)
    let ll_lo = group_log_lik(group, hi * 1e-12, r);
    let ll_hi = group_log_lik(group, hi * (1.0 - 1e-12), r);
    match best {
        Some((root, ll)) if ll >= ll_lo && ll >= ll_hi => {
            if dl_dpi(group, root, r)?.abs() > GRAD_TOL {
                return Err(Error::NoInteriorRoot {
                    boundary: if ll_hi > ll_lo { hi } else { 0.0 },
                });
            }
            Ok(root)
        }
        _ => Err(Error::NoInteriorRoot {
            boundary: if ll_hi > ll_lo { hi } else { 0.0 },
        }),
    }
}

// ---------------------------------------------------------------------------
// constrained MLE
// ---------------------------------------------------------------------------

struct Totals {
    s0: f64,
    s1: f64,
    s2: f64,
    n0: f64,
    n1: f64,
    m: f64,
    n: f64,
}

impl Totals {
    fn of(data: &StudyData) -> Self {
        let (s0, s1, s2) = (data.s(0) as f64, data.s(1) as f64, data.s(2) as f64);
        let (n0, n1) = (data.n_t(0) as f64, data.n_t(1) as f64);
        Self {
            s0,
            s1,
            s2,
            n0,
            n1,
            m: s0 + s1 + s2,
            n: n0 + n1,
        }
    }
}

/// Trigonometric root of the pooled stationarity cubic plus the rational
/// expression for R at that root. `t = M + N` is the total subject count.
fn constrained_closed_form(tt: &Totals) -> Option<(f64, f64)> {
    let t = tt.m + tt.n;
    let a = tt.n0 + 5.0 * tt.n1 + 2.0 * tt.s0 + 3.0 * tt.s1 + 4.0 * tt.s2;
    let c = (3.0 * tt.n1 + tt.s1 + 2.0 * tt.s2) * tt.s0
        + tt.n1 * (4.0 * tt.n1 + 5.0 * tt.s1 + 6.0 * tt.s2 + 2.0 * tt.n0)
        + tt.s1 * (tt.s1 + 3.0 * tt.s2 + tt.n0)
        + (2.0 * tt.s2 + tt.n0) * tt.s2;
    let disc = a * a - 6.0 * c;
    if disc <= 0.0 {
        return None;
    }
    let arg = ((18.0 * a * c - 2.0 * a.powi(3)
        - 108.0 * t * tt.n1 * (tt.n1 + tt.s1 + tt.s2))
        / (2.0 * disc.powf(1.5)))
    .clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let pi = (a + disc.sqrt() * (theta.cos() - 3f64.sqrt() * theta.sin())) / (6.0 * t);
    if !(pi > 0.0 && pi < 1.0) {
        return None;
    }
    let num = 2.0 * t * pi * pi + (-2.0 * tt.m - tt.n0 - 3.0 * tt.n1 - tt.s1) * pi + tt.n1 + tt.s1;
    let den = pi * (tt.n1 - pi * (2.0 * tt.m + tt.n0 + 3.0 * tt.n1 - 2.0 * t * pi));
    if den.abs() < 1e-300 {
        return None;
    }
    let r = num / den;
    (r > 0.0).then_some((pi, r))
}

/// Pooled constrained gradient `(dl/dpi, dl/dR)` at common pi.
fn constrained_gradient(data: &StudyData, pi: f64, r: f64) -> Result<[f64; 2]> {
    let pooled = data.pooled();
    let gp = dl_dpi(&pooled, pi, r)?;
    let pis = vec![pi; data.g()];
    let gr = dl_dr(data, &pis, r)?;
    Ok([gp, gr])
}

/// A couple of joint Newton steps to drive the closed-form result to
/// machine-level stationarity.
fn newton_polish_constrained(data: &StudyData, mut pi: f64, mut r: f64) -> (f64, f64) {
    let pooled = data.pooled();
    for _ in 0..4 {
        let Ok([gp, gr]) = constrained_gradient(data, pi, r) else {
            break;
        };
        if gp.abs() < 1e-11 && gr.abs() < 1e-11 {
            break;
        }
        let pis = vec![pi; data.g()];
        let hpp = d2l_dpi2(&pooled, pi, r);
        let hpr = d2l_dpi_dr(&pooled, pi, r);
        let hrr = d2l_dr2(data, &pis, r);
        let det = hpp * hrr - hpr * hpr;
        if det.abs() < 1e-300 {
            break;
        }
        let dpi = (-gp * hrr + gr * hpr) / det;
        let dr = (-gr * hpp + gp * hpr) / det;
        let pi_new = pi + dpi;
        let r_new = r + dr;
        if !(pi_new > 0.0 && pi_new < 1.0 && r_new > 0.0 && pi_new < pi_max(r_new)) {
            break;
        }
        pi = pi_new;
        r = r_new;
    }
    (pi, r)
}

/// Profile value of R at fixed pi: the unique zero of dl/dR on the feasible
/// interval (dl/dR is strictly decreasing in R). Returns `None` when the
/// profile optimum sits on the boundary.
fn profile_r(data: &StudyData, pi: f64) -> Option<f64> {
    let r_lo = ((2.0 * pi - 1.0) / (pi * pi)).max(0.0);
    let r_hi = 1.0 / pi;
    let width = r_hi - r_lo;
    let mut lo = r_lo + 1e-10 * width.max(1.0);
    let mut hi = r_hi - 1e-10 * width.max(1.0);
    let pis = vec![pi; data.g()];
    let f_lo = dl_dr(data, &pis, lo).ok()?;
    let f_hi = dl_dr(data, &pis, hi).ok()?;
    if f_lo <= 0.0 || f_hi >= 0.0 {
        return None;
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = dl_dr(data, &pis, r).ok()?;
        if f.abs() < 1e-12 {
            break;
        }
        if f > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let d = d2l_dr2(data, &pis, r);
        let mut next = if d.abs() > 1e-300 { r - f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() < 1e-15 * (1.0 + r) {
            r = next;
            break;
        }
        r = next;
    }
    Some(r)
}

/// Golden-section maximization of the profile likelihood over pi.
fn constrained_fallback(data: &StudyData) -> Result<(f64, f64)> {
    let phi = |pi: f64| -> f64 {
        match profile_r(data, pi) {
            Some(r) => {
                let params = match ModelParams::pooled(pi, r, data.g()) {
                    Ok(p) => p,
                    Err(_) => return f64::NEG_INFINITY,
                };
                log_likelihood(data, &params).unwrap_or(f64::NEG_INFINITY)
            }
            None => f64::NEG_INFINITY,
        }
    };

    // coarse scan, then golden-section refinement between the neighbors
    const GRID: usize = 257;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..GRID {
        let pi = (i as f64 + 0.5) / GRID as f64;
        let v = phi(pi);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    if best_v == f64::NEG_INFINITY {
        return Err(Error::DegenerateData(
            "profile likelihood has no interior optimum".into(),
        ));
    }
    let mut lo = (best_i as f64 - 0.5) / GRID as f64;
    let mut hi = (best_i as f64 + 1.5) / GRID as f64;
    lo = lo.max(1e-12);
    hi = hi.min(1.0 - 1e-12);
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = phi(x1);
    let mut f2 = phi(x2);
    for _ in 0..120 {
        if (hi - lo).abs() < 1e-13 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = phi(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = phi(x1);
        }
    }
    let pi = 0.5 * (lo + hi);
    let r = profile_r(data, pi)
        .ok_or_else(|| Error::DegenerateData("profile optimum on the R boundary".into()))?;
    Ok(newton_polish_constrained(data, pi, r))
}

fn interior_or_degenerate(pi: f64, r: f64) -> Result<()> {
    if !(pi > BOUNDARY_TOL && pi < 1.0 - BOUNDARY_TOL) {
        return Err(Error::DegenerateData(format!(
            "constrained MLE pi = {pi} lies on the boundary"
        )));
    }
    if r <= BOUNDARY_TOL {
        return Err(Error::DegenerateData(format!(
            "constrained MLE R = {r} lies on the boundary"
        )));
    }
    if pi >= pi_max(r) * (1.0 - BOUNDARY_TOL) {
        return Err(Error::DegenerateData(format!(
            "constrained MLE (pi = {pi}, R = {r}) lies on the feasibility boundary"
        )));
    }
    Ok(())
}

/// Constrained (common-proportion) MLE.
///
/// Combined data use the closed-form cubic solution verified against the
/// stationarity equations, with a numeric profile fallback. Bilateral-only
/// and unilateral-only data use their exact simplifications. Boundary optima
/// are reported as [`Error::DegenerateData`].
pub fn constrained_mle(data: &StudyData) -> Result<MleFit> {
    let tt = Totals::of(data);
    let g = data.g();

    if tt.m == 0.0 {
        // unilateral only: binomial MLE, R not estimable
        let pi = tt.n1 / tt.n;
        if pi <= 0.0 || pi >= 1.0 {
            return Err(Error::DegenerateData(format!(
                "unilateral-only MLE pi = {pi} lies on the boundary"
            )));
        }
        let log_lik = tt.n1 * pi.ln() + tt.n0 * (1.0 - pi).ln();
        return Ok(MleFit {
            pi_hat: vec![pi; g],
            r_hat: None,
            log_lik,
            converged: true,
            iterations: 0,
            gradient_norm: (tt.n1 / pi - tt.n0 / (1.0 - pi)).abs(),
            method: FitMethod::ClosedForm,
        });
    }

    if tt.n == 0.0 {
        // bilateral only: multinomial cell MLEs, exact
        let denom = tt.s1 + 2.0 * tt.s2;
        if denom == 0.0 {
            return Err(Error::DegenerateData(
                "no responses at all; constrained MLE pi = 0".into(),
            ));
        }
        let pi = denom / (2.0 * tt.m);
        let r = 4.0 * tt.m * tt.s2 / (denom * denom);
        interior_or_degenerate(pi, r)?;
        let params = ModelParams::pooled(pi, r, g)?;
        let log_lik = log_likelihood(data, &params)?;
        let grad = constrained_gradient(data, pi, r)?;
        return Ok(MleFit {
            pi_hat: vec![pi; g],
            r_hat: Some(r),
            log_lik,
            converged: true,
            iterations: 0,
            gradient_norm: grad[0].hypot(grad[1]),
            method: FitMethod::ClosedForm,
        });
    }

    // combined data
    let closed = constrained_closed_form(&tt).map(|(pi, r)| newton_polish_constrained(data, pi, r));
    let (pi, r, method) = match closed {
        Some((pi, r))
            if pi > 0.0
                && pi < 1.0
                && r > 0.0
                && pi < pi_max(r)
                && constrained_gradient(data, pi, r)
                    .map(|[gp, gr]| gp.abs() <= GRAD_TOL && gr.abs() <= GRAD_TOL)
                    .unwrap_or(false) =>
        {
            (pi, r, FitMethod::ClosedForm)
        }
        _ => {
            let (pi, r) = constrained_fallback(data)?;
            (pi, r, FitMethod::NumericFallback)
        }
    };
    interior_or_degenerate(pi, r)?;
    let grad = constrained_gradient(data, pi, r)?;
    let gradient_norm = grad[0].hypot(grad[1]);
    if method == FitMethod::NumericFallback && gradient_norm > GRAD_TOL {
        return Err(Error::NotConverged {
            iterations: 0,
            gradient_norm,
        });
    }
    let params = ModelParams::pooled(pi, r, g)?;
    let log_lik = log_likelihood(data, &params)?;
    Ok(MleFit {
        pi_hat: vec![pi; g],
        r_hat: Some(r),
        log_lik,
        converged: true,
        iterations: 0,
        gradient_norm,
        method,
    })
}

// ---------------------------------------------------------------------------
// unconstrained MLE
// ---------------------------------------------------------------------------

fn solve_all_pis(data: &StudyData, r: f64) -> Result<Vec<f64>> {
    data.groups()
        .iter()
        .map(|g| {
            solve_pi_given_r(g, r).map_err(|e| match e {
                Error::NoInteriorRoot { boundary } => Error::DegenerateData(format!(
                    "group MLE at the boundary pi = {boundary} for R = {r}"
                )),
                other => other,
            })
        })
        .collect()
}

/// Feasible open interval for R given fixed group proportions.
fn r_interval(pis: &[f64]) -> (f64, f64) {
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for &pi in pis {
        lo = lo.max((2.0 * pi - 1.0) / (pi * pi));
        hi = hi.min(1.0 / pi);
    }
    (lo, hi)
}

fn full_gradient_norm(data: &StudyData, pis: &[f64], r: f64) -> Result<f64> {
    let params = ModelParams::new(pis.to_vec(), r)?;
    let grad = score_gradient(data, &params)?;
    Ok(grad.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Unconstrained MLE by alternating quartic solves with Newton updates of R.
///
/// Starts from the constrained `R`, enforces monotone likelihood ascent by
/// step-halving, stops the R iteration at `|dR| < 1e-5`, and then polishes
/// until the full gradient norm is below 1e-6. When `max_iter` is exhausted
/// the best iterate is returned with `converged = false`.
pub fn unconstrained_mle(data: &StudyData) -> Result<MleFit> {
    if data.m_total() == 0 {
        return Err(Error::RNotEstimable);
    }
    let con = constrained_mle(data)?;
    let mut r = con.r_hat.expect("bilateral data present");
    let mut pis = solve_all_pis(data, r)?;

    let log_lik_at = |pis: &[f64], r: f64| -> f64 {
        ModelParams::new(pis.to_vec(), r)
            .and_then(|p| log_likelihood(data, &p))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut ll = log_lik_at(&pis, r);
    let mut iterations = 0u32;
    let mut r_converged = false;

    while iterations < MAX_ITER {
        iterations += 1;
        let g_r = dl_dr(data, &pis, r)?;
        let h_rr = d2l_dr2(data, &pis, r);
        let mut step = if h_rr.abs() > 1e-300 { -g_r / h_rr } else { 0.0 };
        let (r_lo, r_hi) = r_interval(&pis);
        let mut r_new = r;
        for _ in 0..30 {
            let cand = r + step;
            if cand > r_lo && cand < r_hi && log_lik_at(&pis, cand) >= ll - 1e-12 {
                r_new = cand;
                break;
            }
            step *= 0.5;
        }
        let dr = (r_new - r).abs();
        r = r_new;
        pis = solve_all_pis(data, r)?;
        ll = log_lik_at(&pis, r);
        if dr < R_STEP_TOL {
            r_converged = true;
            // polish: keep alternating until the full gradient settles
            let mut norm = full_gradient_norm(data, &pis, r)?;
            let mut extra = 0;
            while norm > GRAD_TOL && extra < 50 {
                extra += 1;
                iterations += 1;
                let g_r = dl_dr(data, &pis, r)?;
                let h_rr = d2l_dr2(data, &pis, r);
                if h_rr.abs() < 1e-300 {
                    break;
                }
                let (r_lo, r_hi) = r_interval(&pis);
                let cand = (r - g_r / h_rr).clamp(
                    r_lo + 1e-12 * (1.0 + r_lo.abs()),
                    r_hi * (1.0 - 1e-12),
                );
                r = cand;
                pis = solve_all_pis(data, r)?;
                norm = full_gradient_norm(data, &pis, r)?;
            }
            ll = log_lik_at(&pis, r);
            break;
        }
    }

    let gradient_norm = full_gradient_norm(data, &pis, r)?;
    let converged = r_converged && gradient_norm <= GRAD_TOL;
    Ok(MleFit {
        pi_hat: pis,
        r_hat: Some(r),
        log_lik: ll,
        converged,
        iterations,
        gradient_norm,
        method: FitMethod::FisherScoring,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GroupCounts;

    fn worked_example() -> StudyData {
        StudyData::new(vec![
            GroupCounts::new(9, 7, 23, 20, 34),
            GroupCounts::new(7, 5, 13, 19, 36),
        ])
        .unwrap()
    }

    fn rp_data() -> StudyData {
        StudyData::new(vec![
            GroupCounts::new(15, 6, 7, 0, 0),
            GroupCounts::new(7, 5, 9, 0, 0),
            GroupCounts::new(3, 2, 14, 0, 0),
            GroupCounts::new(67, 24, 57, 0, 0),
        ])
        .unwrap()
    }

    #[test]
    fn constrained_worked_example() {
        let fit = constrained_mle(&worked_example()).unwrap();
        // full-precision values frozen from an independent optimizer
        assert!((fit.pi_hat[0] - 0.648177967543).abs() < 1e-8);
        assert!((fit.r_hat.unwrap() - 1.318157845935).abs() < 1e-8);
        assert!((fit.log_lik - -134.084971856088).abs() < 1e-8);
        assert_eq!(fit.method, FitMethod::ClosedForm);
        assert!(fit.converged);
        // table values at 4 decimals
        assert_eq!(format!("{:.4}", fit.pi_hat[0]), "0.6482");
        assert_eq!(format!("{:.4}", fit.r_hat.unwrap()), "1.3182");
        let rho = fit.rho_hat().unwrap();
        assert_eq!(format!("{:.4}", rho[0]), "0.5862");
    }

    #[test]
    fn unconstrained_worked_example() {
        let fit = unconstrained_mle(&worked_example()).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_norm < 1e-6);
        assert!((fit.pi_hat[0] - 0.652822002774).abs() < 1e-7);
        assert!((fit.pi_hat[1] - 0.642458812917).abs() < 1e-7);
        assert!((fit.r_hat.unwrap() - 1.317154614284).abs() < 1e-7);
        assert!((fit.log_lik - -134.065248008781).abs() < 1e-8);
        assert_eq!(format!("{:.4}", fit.pi_hat[0]), "0.6528");
        assert_eq!(format!("{:.4}", fit.pi_hat[1]), "0.6425");
        assert_eq!(format!("{:.4}", fit.r_hat.unwrap()), "1.3172");
        let rho = fit.rho_hat().unwrap();
        assert_eq!(format!("{:.4}", rho[0]), "0.5964");
        assert_eq!(format!("{:.4}", rho[1]), "0.5699");
    }

    #[test]
    fn nesting_on_worked_example() {
        let d = worked_example();
        let con = constrained_mle(&d).unwrap();
        let unc = unconstrained_mle(&d).unwrap();
        assert!(unc.log_lik >= con.log_lik - 1e-10);
    }

    #[test]
    fn bilateral_only_exact_simplification() {
        let d = rp_data();
        let fit = constrained_mle(&d).unwrap();
        let (s1, s2, m) = (37.0, 87.0, 216.0);
        assert_eq!(fit.pi_hat[0], (s1 + 2.0 * s2) / (2.0 * m));
        assert_eq!(fit.r_hat.unwrap(), 4.0 * m * s2 / (s1 + 2.0 * s2).powi(2));
        assert!(fit.gradient_norm < 1e-8);
        assert!((fit.log_lik - -222.9176178805).abs() < 1e-8);
    }

    #[test]
    fn unilateral_only_exact_simplification() {
        let d = StudyData::new(vec![
            GroupCounts::new(0, 0, 0, 40, 20),
            GroupCounts::new(0, 0, 0, 30, 10),
        ])
        .unwrap();
        let fit = constrained_mle(&d).unwrap();
        assert_eq!(fit.pi_hat[0], 30.0 / 100.0);
        assert_eq!(fit.r_hat, None);
        assert!(matches!(unconstrained_mle(&d), Err(Error::RNotEstimable)));
    }

    #[test]
    fn unilateral_only_single_group() {
        let d = StudyData::new(vec![GroupCounts::new(0, 0, 0, 70, 30)]).unwrap();
        let fit = constrained_mle(&d).unwrap();
        assert_eq!(fit.pi_hat, vec![0.30]);
    }

    #[test]
    fn degenerate_no_responses() {
        let d = StudyData::new(vec![GroupCounts::new(10, 0, 0, 5, 0)]).unwrap();
        assert!(matches!(
            constrained_mle(&d),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn quartic_constant_coefficient() {
        // all-responders group: e = 2 m2
        let g = GroupCounts::new(0, 0, 11, 0, 0);
        let [_, _, _, _, e] = quartic_coefficients(&g, 1.0);
        assert_eq!(e, 22.0);
        // boundary MLE at pi_max(1) = 1
        match solve_pi_given_r(&g, 1.0) {
            Err(Error::NoInteriorRoot { boundary }) => assert_eq!(boundary, 1.0),
            other => panic!("expected boundary report, got {other:?}"),
        }
    }

    #[test]
    fn solve_pi_worked_example_group1() {
        let g = GroupCounts::new(9, 7, 23, 20, 34);
        let pi = solve_pi_given_r(&g, 1.3172).unwrap();
        assert!((pi - 0.6528).abs() < 1e-4);
    }

    #[test]
    fn solve_pi_unilateral_group_ignores_r() {
        let g = GroupCounts::new(0, 0, 0, 60, 40);
        for &r in &[0.5, 1.0, 2.0] {
            assert_eq!(solve_pi_given_r(&g, r).unwrap(), 0.4);
        }
    }

    #[test]
    fn solve_pi_symmetric_group_is_half() {
        let g = GroupCounts::new(12, 9, 12, 17, 17);
        let pi = solve_pi_given_r(&g, 1.0).unwrap();
        assert!((pi - 0.5).abs() < 1e-10);
    }

    #[test]
    fn constrained_gradient_sums_at_pooled_mle() {
        let d = worked_example();
        let fit = constrained_mle(&d).unwrap();
        let params = fit.params().unwrap();
        let grad = score_gradient(&d, &params).unwrap();
        // pooled stationarity: group pi-scores sum to zero
        assert!((grad[0] + grad[1]).abs() < 1e-6);
        assert!(grad[2].abs() < 1e-6);
    }

    #[test]
    fn score_vanishes_at_unconstrained_mle() {
        let d = worked_example();
        let fit = unconstrained_mle(&d).unwrap();
        let grad = score_gradient(&d, &fit.params().unwrap()).unwrap();
        for g in grad {
            assert!(g.abs() < 1e-6);
        }
    }

    #[test]
    fn single_group_unconstrained_matches_constrained() {
        let d = StudyData::new(vec![GroupCounts::new(15, 6, 7, 0, 0)]).unwrap();
        let con = constrained_mle(&d).unwrap();
        let unc = unconstrained_mle(&d).unwrap();
        assert!((con.pi_hat[0] - unc.pi_hat[0]).abs() < 1e-6);
        assert!((con.r_hat.unwrap() - unc.r_hat.unwrap()).abs() < 1e-5);
    }

    #[test]
    fn gradient_domain_error_at_boundary() {
        let d = worked_example();
        let params = ModelParams::pooled(0.5, 2.0, 2).unwrap(); // R pi = 1 with m1 > 0
        assert!(matches!(
            score_gradient(&d, &params),
            Err(Error::DomainError(_))
        ));
    }
}
