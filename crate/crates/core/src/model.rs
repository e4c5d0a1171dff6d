//! The constant-R dependence model for paired binary organs.
//!
//! A bilateral subject in group i responds in each organ with probability
//! `pi_i`, and the conditional probability of a response given a response in
//! the fellow organ is `R * pi_i`, with one R shared by all groups. The
//! per-subject number of responses is then trinomial with cells
//! `(R pi^2 - 2 pi + 1, 2 pi (1 - R pi), R pi^2)`; a unilateral subject is
//! Bernoulli(pi_i).

use crate::data::StudyData;
use crate::error::{Error, Result};

/// Tolerance for probability-boundary checks; values within it are clamped.
pub(crate) const FEAS_TOL: f64 = 1e-12;

/// Proportion vector plus the shared dependence parameter R.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pi: Vec<f64>,
    r: f64,
}

impl ModelParams {
    /// Validates that every `(pi_i, R)` pair yields cell probabilities in
    /// [0, 1] (within tolerance) and that each `pi_i` is interior.
    pub fn new(pi: Vec<f64>, r: f64) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::InfeasibleParams("empty proportion vector".into()));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InfeasibleParams(format!("R = {r} must be positive")));
        }
        for &p in &pi {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InfeasibleParams(format!(
                    "pi = {p} outside the open interval (0, 1)"
                )));
            }
            cell_probabilities(p, r)?;
        }
        Ok(Self { pi, r })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Common-proportion parameters (every group shares `pi`).
    pub fn pooled(pi: f64, r: f64, g: usize) -> Result<Self> {
        Self::new(vec![pi; g], r)
    }
}

/// Probabilities of 0/1/2 responses for one bilateral subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Trinomial cell probabilities `(R pi^2 - 2 pi + 1, 2 pi (1 - R pi), R pi^2)`.
///
/// Components within `1e-12` of the [0, 1] boundary are clamped; anything
/// farther outside is an infeasible `(pi, R)` pair.
pub fn cell_probabilities(pi: f64, r: f64) -> Result<CellProbabilities> {
    let raw = [r * pi * pi - 2.0 * pi + 1.0, 2.0 * pi * (1.0 - r * pi), r * pi * pi];
    let mut clamped = [0.0f64; 3];
    for (dst, &p) in clamped.iter_mut().zip(raw.iter()) {
        if !(-FEAS_TOL..=1.0 + FEAS_TOL).contains(&p) {
            return Err(Error::InfeasibleParams(format!(
                "cell probabilities ({:.6}, {:.6}, {:.6}) at pi = {pi}, R = {r} leave [0, 1]",
                raw[0], raw[1], raw[2]
            )));
        }
        *dst = p.clamp(0.0, 1.0);
    }
    Ok(CellProbabilities {
        p0: clamped[0],
        p1: clamped[1],
        p2: clamped[2],
    })
}

/// Largest feasible proportion for a given R: the cell probabilities stay in
/// [0, 1] exactly for `pi` in `(0, pi_max(R))`.
///
/// For R >= 1 the binding constraint is `R pi <= 1`; for R < 1 it is
/// `R pi^2 - 2 pi + 1 >= 0`, whose smaller root is `(1 - sqrt(1 - R)) / R`.
pub fn pi_max(r: f64) -> f64 {
    if r >= 1.0 {
        1.0 / r
    } else {
        (1.0 - (1.0 - r).sqrt()) / r
    }
}

/// Intraclass correlation `rho = pi (R - 1) / (1 - pi)`.
pub fn rho_from(pi: f64, r: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InfeasibleParams(format!(
            "pi = {pi} outside the open interval (0, 1)"
        )));
    }
    Ok(pi * (r - 1.0) / (1.0 - pi))
}

/// Inverse of [`rho_from`]: `R = (1 - pi) rho / pi + 1`.
pub fn r_from(pi: f64, rho: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InfeasibleParams(format!(
            "pi = {pi} outside the open interval (0, 1)"
        )));
    }
    let r = (1.0 - pi) * rho / pi + 1.0;
    if !(r > 0.0) {
        return Err(Error::InfeasibleParams(format!(
            "rho = {rho} at pi = {pi} implies non-positive R = {r}"
        )));
    }
    cell_probabilities(pi, r)?;
    Ok(r)
}

/// Adds `count * ln(p)` with the convention `0 * ln 0 = 0`.
fn count_log(count: u64, p: f64, what: &str) -> Result<f64> {
    if count == 0 {
        return Ok(0.0);
    }
    if p <= 0.0 {
        return Err(Error::DomainError(format!(
            "{what} has probability {p} but count {count}"
        )));
    }
    Ok(count as f64 * p.ln())
}

/// Log-likelihood of the study under the model, up to the additive constant
/// (the multinomial coefficients are omitted).
pub fn log_likelihood(data: &StudyData, params: &ModelParams) -> Result<f64> {
    if params.pi().len() != data.g() {
        return Err(Error::InfeasibleParams(format!(
            "{} proportions for {} groups",
            params.pi().len(),
            data.g()
        )));
    }
    let r = params.r();
    let mut total = 0.0;
    for (grp, &pi) in data.groups().iter().zip(params.pi()) {
        let cells = cell_probabilities(pi, r)?;
        total += count_log(grp.m0, cells.p0, "bilateral 0-response cell")?;
        total += count_log(grp.m1, cells.p1, "bilateral 1-response cell")?;
        total += count_log(grp.m2, cells.p2, "bilateral 2-response cell")?;
        total += count_log(grp.n0, 1.0 - pi, "unilateral non-response")?;
        total += count_log(grp.n1, pi, "unilateral response")?;
    }
    Ok(total)
}
