//! Fisher information, its closed-form inverse, and the homogeneity tests.
//!
//! The contrast/quadratic-form ("matrix") versions of the Wald, pairwise
//! Wald, and score statistics are authoritative; the algebraically
//! simplified forms are evaluated alongside and must agree to 1e-8 relative,
//! which turns any transcription slip into a hard error instead of a silent
//! wrong answer.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::StudyData;
use crate::error::{Error, Result};
use crate::mle::{constrained_mle, dl_dpi, unconstrained_mle, MleFit};
use crate::model::ModelParams;
use crate::special::chi_square_sf;

const FORM_AGREEMENT: f64 = 1e-8;

/// Which homogeneity test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TestMethod {
    Lr,
    Wald,
    Score,
    DonnerAdjusted,
    PairwiseWald,
}

impl TestMethod {
    pub fn label(&self) -> &'static str {
        match self {
            TestMethod::Lr => "lr",
            TestMethod::Wald => "wald",
            TestMethod::Score => "score",
            TestMethod::DonnerAdjusted => "donner",
            TestMethod::PairwiseWald => "pairwise-wald",
        }
    }
}

/// A test statistic with its chi-square reference.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    /// Group pair for pairwise Wald tests (0-based indices).
    pub pair: Option<(usize, usize)>,
}

impl TestResult {
    fn new(method: TestMethod, statistic: f64, df: u32) -> Self {
        Self {
            method,
            statistic,
            df,
            p_value: chi_square_sf(statistic, df),
            pair: None,
        }
    }
}

/// The (g+1) x (g+1) expected information, stored through its structure:
/// the pi-block is diagonal (`a`), the pi-R cross terms are `b`, and the
/// R-corner is `h`.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    a: Vec<f64>,
    b: Vec<f64>,
    h: f64,
}

impl InfoMatrix {
    /// Diagonal entry `I_ii` for group `i`.
    pub fn a(&self, i: usize) -> f64 {
        self.a[i]
    }

    /// Cross entry `I_{i,g+1}`.
    pub fn b(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// Corner entry `I_{g+1,g+1}`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn g(&self) -> usize {
        self.a.len()
    }

    /// Dense symmetric matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let g = self.g();
        let mut m = DMatrix::zeros(g + 1, g + 1);
        for i in 0..g {
            m[(i, i)] = self.a[i];
            m[(i, g)] = self.b[i];
            m[(g, i)] = self.b[i];
        }
        m[(g, g)] = self.h;
        m
    }

    /// Schur complement of the pi-block: the reciprocal of the `f` entry of
    /// the closed-form inverse.
    fn schur(&self) -> f64 {
        self.h - self.a.iter().zip(&self.b).map(|(a, b)| b * b / a).sum::<f64>()
    }

    /// Closed-form inverse.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let g = self.g();
        let denom = self.schur();
        if denom <= 1e-12 {
            return Err(Error::SingularInformation(denom));
        }
        let f = 1.0 / denom;
        let mut inv = DMatrix::zeros(g + 1, g + 1);
        for i in 0..g {
            for j in 0..g {
                inv[(i, j)] = if i == j {
                    1.0 / self.a[i] + self.b[i] * self.b[i] * f / (self.a[i] * self.a[i])
                } else {
                    self.b[i] * self.b[j] * f / (self.a[i] * self.a[j])
                };
            }
            let d = -self.b[i] * f / self.a[i];
            inv[(i, g)] = d;
            inv[(g, i)] = d;
        }
        inv[(g, g)] = f;
        Ok(inv)
    }
}

/// Expected information at interior parameters.
pub fn information_matrix(params: &ModelParams, data: &StudyData) -> Result<InfoMatrix> {
    if params.pi().len() != data.g() {
        return Err(Error::InfeasibleParams(format!(
            "{} proportions for {} groups",
            params.pi().len(),
            data.g()
        )));
    }
    let r = params.r();
    let g = data.g();
    let mut a = Vec::with_capacity(g);
    let mut b = Vec::with_capacity(g);
    let mut h = 0.0;
    for (grp, &pi) in data.groups().iter().zip(params.pi()) {
        let m = grp.m() as f64;
        let n = grp.n() as f64;
        let p0 = r * pi * pi - 2.0 * pi + 1.0;
        let one_minus_rpi = 1.0 - r * pi;
        if m > 0.0 && (p0 <= 0.0 || one_minus_rpi <= 0.0) {
            return Err(Error::DomainError(format!(
                "information undefined on the boundary (pi = {pi}, R = {r})"
            )));
        }
        let mut ai = n / (pi * (1.0 - pi));
        let mut bi = 0.0;
        if m > 0.0 {
            ai += 2.0 * m * (2.0 * r * r * pi * pi - r * pi * pi - 2.0 * r * pi + 1.0)
                / (pi * p0 * one_minus_rpi);
            bi = -2.0 * (1.0 - r) * pi * pi * m / (p0 * one_minus_rpi);
            h += pi * pi * m * (r * pi - 2.0 * pi + 1.0) / (r * p0 * one_minus_rpi);
        }
        a.push(ai);
        b.push(bi);
    }
    Ok(InfoMatrix { a, b, h })
}

/// Closed-form inverse of the expected information.
pub fn information_inverse(params: &ModelParams, data: &StudyData) -> Result<DMatrix<f64>> {
    information_matrix(params, data)?.inverse()
}

fn require_two_groups(data: &StudyData) -> Result<()> {
    if data.g() < 2 {
        return Err(Error::InvalidConfig(
            "homogeneity tests need at least 2 groups".into(),
        ));
    }
    Ok(())
}

fn require_converged(fit: &MleFit) -> Result<()> {
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
        });
    }
    Ok(())
}

fn check_agreement(matrix: f64, simplified: f64) -> Result<()> {
    if (matrix - simplified).abs() > FORM_AGREEMENT * matrix.abs().max(1.0) {
        return Err(Error::SimplifiedFormMismatch { matrix, simplified });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// likelihood ratio
// ---------------------------------------------------------------------------

/// Likelihood-ratio statistic from precomputed fits.
pub fn lr_test_with(data: &StudyData, con: &MleFit, unc: &MleFit) -> Result<TestResult> {
    require_two_groups(data)?;
    require_converged(con)?;
    require_converged(unc)?;
    let raw = 2.0 * (unc.log_lik - con.log_lik);
    if raw < -1e-9 {
        return Err(Error::DegenerateData(format!(
            "nested likelihoods out of order (2*dl = {raw})"
        )));
    }
    Ok(TestResult::new(TestMethod::Lr, raw.max(0.0), data.g() as u32 - 1))
}

/// Likelihood-ratio test of common proportions.
pub fn lr_test(data: &StudyData) -> Result<TestResult> {
    require_two_groups(data)?;
    let con = constrained_mle(data)?;
    let unc = unconstrained_mle(data)?;
    lr_test_with(data, &con, &unc)
}

// ---------------------------------------------------------------------------
// Wald
// ---------------------------------------------------------------------------

/// Quadratic form `(C beta)' (C Iinv C')^{-1} (C beta)` for successive
/// differences.
fn wald_matrix_form(pis: &[f64], r: f64, iinv: &DMatrix<f64>) -> Result<f64> {
    let g = pis.len();
    let mut contrast = DMatrix::zeros(g - 1, g + 1);
    for i in 0..g - 1 {
        contrast[(i, i)] = 1.0;
        contrast[(i, i + 1)] = -1.0;
    }
    let mut beta = DVector::zeros(g + 1);
    for (i, &p) in pis.iter().enumerate() {
        beta[i] = p;
    }
    beta[g] = r;
    let cb = &contrast * &beta;
    let mid = &contrast * iinv * contrast.transpose();
    let solved = mid
        .lu()
        .solve(&cb)
        .ok_or_else(|| Error::SingularInformation(0.0))?;
    Ok(cb.dot(&solved))
}

/// Simplified omnibus Wald statistic from the information entries.
fn wald_simplified(pis: &[f64], info: &InfoMatrix) -> f64 {
    let g = pis.len();
    let a = &info.a;
    let b = &info.b;
    let h = info.h;
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    let mut num = 0.0;
    for i in 0..g {
        for j in 0..g {
            let d_ij = if i == j {
                (h * a[i] - b[i] * b[i]) * (sum_a - a[i]) - a[i] * (sum_b - b[i]).powi(2)
            } else {
                sum_b * (b[i] * a[j] + b[j] * a[i]) - h * a[i] * a[j] - b[i] * b[j] * sum_a
            };
            num += pis[i] * pis[j] * d_ij;
        }
    }
    num / (h * sum_a - sum_b * sum_b)
}

/// Wald test from a precomputed unconstrained fit.
pub fn wald_test_with(data: &StudyData, unc: &MleFit) -> Result<TestResult> {
    require_two_groups(data)?;
    require_converged(unc)?;
    let params = unc.params()?;
    let info = information_matrix(&params, data)?;
    let iinv = info.inverse()?;
    let matrix = wald_matrix_form(&unc.pi_hat, params.r(), &iinv)?;
    let simplified = wald_simplified(&unc.pi_hat, &info);
    check_agreement(matrix, simplified)?;
    Ok(TestResult::new(TestMethod::Wald, matrix, data.g() as u32 - 1))
}

/// Wald-type test of common proportions.
pub fn wald_test(data: &StudyData) -> Result<TestResult> {
    require_two_groups(data)?;
    let unc = unconstrained_mle(data)?;
    wald_test_with(data, &unc)
}

/// Pairwise Wald test from a precomputed unconstrained fit.
pub fn pairwise_wald_with(data: &StudyData, unc: &MleFit, i: usize, j: usize) -> Result<TestResult> {
    require_two_groups(data)?;
    let g = data.g();
    if i == j || i >= g || j >= g {
        return Err(Error::InvalidConfig(format!(
            "pairwise test needs two distinct group indices below {g}, got ({i}, {j})"
        )));
    }
    require_converged(unc)?;
    let params = unc.params()?;
    let info = information_matrix(&params, data)?;
    let iinv = info.inverse()?;

    // contrast form
    let mut c = DVector::zeros(g + 1);
    c[i] = 1.0;
    c[j] = -1.0;
    let quad = (iinv * &c).dot(&c);
    let diff = unc.pi_hat[i] - unc.pi_hat[j];
    let matrix = diff * diff / quad;

    // closed form
    let (a, b, h) = (&info.a, &info.b, info.h);
    let sum_ba: f64 = (0..g).map(|k| b[k] * b[k] / a[k]).sum();
    let sum_ba_excl = sum_ba - b[i] * b[i] / a[i] - b[j] * b[j] / a[j];
    let num = a[i] * a[j] * diff * diff * (h - sum_ba);
    let den = (a[i] + a[j]) * (h - sum_ba_excl) - (b[i] + b[j]).powi(2);
    let simplified = num / den;
    check_agreement(matrix, simplified)?;

    let mut result = TestResult::new(TestMethod::PairwiseWald, matrix, 1);
    result.pair = Some((i, j));
    Ok(result)
}

/// Wald test of `pi_i = pi_j` for one pair of groups.
pub fn pairwise_wald(data: &StudyData, i: usize, j: usize) -> Result<TestResult> {
    require_two_groups(data)?;
    let unc = unconstrained_mle(data)?;
    pairwise_wald_with(data, &unc, i, j)
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

/// Score test from a precomputed constrained fit.
pub fn score_test_with(data: &StudyData, con: &MleFit) -> Result<TestResult> {
    require_two_groups(data)?;
    require_converged(con)?;
    let params = con.params()?;
    let r = params.r();
    let g = data.g();

    // U = (dl/dpi_1, ..., dl/dpi_g, 0) at the constrained fit
    let mut u = DVector::zeros(g + 1);
    for (idx, grp) in data.groups().iter().enumerate() {
        u[idx] = dl_dpi(grp, con.pi_hat[idx], r)?;
    }

    let info = information_matrix(&params, data)?;
    let iinv = info.inverse()?;
    let matrix = (&iinv * &u).dot(&u);

    let f = 1.0 / info.schur();
    let mut quad = 0.0;
    let mut cross = 0.0;
    for i in 0..g {
        quad += u[i] * u[i] / info.a[i];
        cross += info.b[i] * u[i] / info.a[i];
    }
    let simplified = quad + cross * cross * f;
    check_agreement(matrix, simplified)?;

    Ok(TestResult::new(TestMethod::Score, matrix, g as u32 - 1))
}

/// Score test of common proportions.
pub fn score_test(data: &StudyData) -> Result<TestResult> {
    require_two_groups(data)?;
    let con = constrained_mle(data)?;
    score_test_with(data, &con)
}

// ---------------------------------------------------------------------------
// Donner's adjusted chi-square
// ---------------------------------------------------------------------------

/// Pooled one-way ANOVA estimate of the intraclass correlation, treating each
/// subject as a cluster of one or two organs. Clamped to [0, 1).
pub fn anova_icc(data: &StudyData) -> f64 {
    let (s0, s1, s2) = (data.s(0) as f64, data.s(1) as f64, data.s(2) as f64);
    let (n0, n1) = (data.n_t(0) as f64, data.n_t(1) as f64);
    let m = s0 + s1 + s2;
    if m == 0.0 {
        return 0.0;
    }
    let n = n0 + n1;
    let clusters = m + n;
    let organs = 2.0 * m + n;
    let pbar = (s1 + 2.0 * s2 + n1) / organs;
    if pbar <= 0.0 || pbar >= 1.0 || clusters < 2.0 {
        return 0.0;
    }
    let msb = (2.0 * s0 * pbar * pbar
        + 2.0 * s1 * (0.5 - pbar) * (0.5 - pbar)
        + 2.0 * s2 * (1.0 - pbar) * (1.0 - pbar)
        + n0 * pbar * pbar
        + n1 * (1.0 - pbar) * (1.0 - pbar))
        / (clusters - 1.0);
    let msw = s1 * 0.5 / m;
    let n0_weight = (organs - (4.0 * m + n) / organs) / (clusters - 1.0);
    let den = msb + (n0_weight - 1.0) * msw;
    if den <= 0.0 {
        return 0.0;
    }
    ((msb - msw) / den).clamp(0.0, 1.0 - 1e-12)
}

/// Donner's adjusted chi-square: the pooled-organ Pearson statistic with each
/// group's contribution divided by its design effect
/// `[2 m_i (1 + rho) + n_i] / M_i`.
pub fn donner_adjusted_test(data: &StudyData) -> Result<TestResult> {
    require_two_groups(data)?;
    let mut a_sum = 0.0;
    let mut m_sum = 0.0;
    let per_group: Vec<(f64, f64, f64, f64)> = data
        .groups()
        .iter()
        .map(|grp| {
            let a_i = (grp.m1 + grp.n1 + 2 * grp.m2) as f64;
            let m_i = (2 * grp.m() + grp.n()) as f64;
            a_sum += a_i;
            m_sum += m_i;
            (a_i, m_i, grp.m() as f64, grp.n() as f64)
        })
        .collect();
    let theta = a_sum / m_sum;
    if theta <= 0.0 || theta >= 1.0 {
        return Err(Error::DegenerateData(format!(
            "pooled response rate {theta} admits no chi-square comparison"
        )));
    }
    let q = 1.0 - theta;
    let rho = anova_icc(data);
    let mut statistic = 0.0;
    for (a_i, m_i, m, n) in per_group {
        let expected = m_i * theta;
        let pearson = (a_i - expected).powi(2) / expected
            + (m_i - a_i - m_i * q).powi(2) / (m_i * q);
        let design_effect = (2.0 * m * (1.0 + rho) + n) / m_i;
        statistic += pearson / design_effect;
    }
    Ok(TestResult::new(
        TestMethod::DonnerAdjusted,
        statistic,
        data.g() as u32 - 1,
    ))
}

/// Runs the selected omnibus tests, computing each required fit once.
pub fn run_selected(data: &StudyData, methods: &[TestMethod]) -> Vec<(TestMethod, Result<TestResult>)> {
    let need_con = methods
        .iter()
        .any(|m| matches!(m, TestMethod::Lr | TestMethod::Score));
    let need_unc = methods
        .iter()
        .any(|m| matches!(m, TestMethod::Lr | TestMethod::Wald));
    let con = need_con.then(|| constrained_mle(data));
    let unc = need_unc.then(|| unconstrained_mle(data));
    methods
        .iter()
        .map(|&method| {
            let result = match method {
                TestMethod::Lr => match (con.as_ref().unwrap(), unc.as_ref().unwrap()) {
                    (Ok(c), Ok(u)) => lr_test_with(data, c, u),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                },
                TestMethod::Wald => match unc.as_ref().unwrap() {
                    Ok(u) => wald_test_with(data, u),
                    Err(e) => Err(e.clone()),
                },
                TestMethod::Score => match con.as_ref().unwrap() {
                    Ok(c) => score_test_with(data, c),
                    Err(e) => Err(e.clone()),
                },
                TestMethod::DonnerAdjusted => donner_adjusted_test(data),
                TestMethod::PairwiseWald => Err(Error::InvalidConfig(
                    "pairwise test needs explicit group indices".into(),
                )),
            };
            (method, result)
        })
        .collect()
}

/// Cholesky check used by tests and diagnostics.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    Cholesky::new(m.clone()).is_some()
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

    #[test]
    fn lr_matches_table() {
        let t = lr_test(&worked_example()).unwrap();
        assert!((t.statistic - 0.039447694614).abs() < 1e-7);
        assert!((t.p_value - 0.842564359451).abs() < 1e-7);
        assert_eq!(format!("{:.4}", t.statistic), "0.0394");
        assert_eq!(format!("{:.4}", t.p_value), "0.8426");
        assert_eq!(t.df, 1);
    }

    #[test]
    fn wald_matches_table() {
        let t = wald_test(&worked_example()).unwrap();
        assert!((t.statistic - 0.039135664002).abs() < 1e-7);
        assert_eq!(format!("{:.4}", t.statistic), "0.0391");
        assert_eq!(format!("{:.4}", t.p_value), "0.8432");
    }

    #[test]
    fn score_matches_table() {
        let t = score_test(&worked_example()).unwrap();
        assert!((t.statistic - 0.039520909291).abs() < 1e-7);
        assert_eq!(format!("{:.4}", t.statistic), "0.0395");
        assert_eq!(format!("{:.4}", t.p_value), "0.8424");
    }

    #[test]
    fn donner_matches_table_within_calibration() {
        let t = donner_adjusted_test(&worked_example()).unwrap();
        // ANOVA intraclass estimate, frozen from independent arithmetic
        assert!((t.statistic - 0.0864606355).abs() < 1e-8);
        assert!((t.statistic - 0.0864).abs() < 5e-3);
        assert!((t.p_value - 0.7688).abs() < 5e-3);
    }

    #[test]
    fn donner_reduces_to_pearson_without_clusters() {
        // unilateral-only: design effect is exactly 1, so the statistic is the
        // ordinary two-sample Pearson chi-square on the organ counts
        let d = StudyData::new(vec![
            GroupCounts::new(0, 0, 0, 30, 20),
            GroupCounts::new(0, 0, 0, 20, 30),
        ])
        .unwrap();
        let t = donner_adjusted_test(&d).unwrap();
        // hand arithmetic: theta = 0.5, each term (±5)^2/25 * (1/2 + 1/2)
        assert!((t.statistic - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_equals_omnibus_for_two_groups() {
        let d = worked_example();
        let w = wald_test(&d).unwrap();
        let pw = pairwise_wald(&d, 0, 1).unwrap();
        assert!((w.statistic - pw.statistic).abs() < 1e-12);
        assert_eq!(pw.df, 1);
        assert_eq!(pw.pair, Some((0, 1)));
    }

    #[test]
    fn symmetric_groups_give_zero_statistics() {
        let d = StudyData::new(vec![
            GroupCounts::new(10, 14, 10, 25, 25),
            GroupCounts::new(10, 14, 10, 25, 25),
        ])
        .unwrap();
        assert!(wald_test(&d).unwrap().statistic < 1e-12);
        assert!(score_test(&d).unwrap().statistic < 1e-10);
        assert!(lr_test(&d).unwrap().statistic < 1e-10);
        assert!(pairwise_wald(&d, 0, 1).unwrap().statistic < 1e-12);
    }

    #[test]
    fn cross_information_vanishes_at_independence() {
        let d = worked_example();
        let params = ModelParams::pooled(0.55, 1.0, 2).unwrap();
        let info = information_matrix(&params, &d).unwrap();
        assert_eq!(info.b(0), 0.0);
        assert_eq!(info.b(1), 0.0);
        // and the inverse is block diagonal with c_ii = 1/I_ii
        let inv = info.inverse().unwrap();
        assert!((inv[(0, 0)] - 1.0 / info.a(0)).abs() < 1e-15);
        assert!(inv[(0, 1)].abs() < 1e-18);
        assert!(inv[(0, 2)].abs() < 1e-18);
    }

    #[test]
    fn information_positive_definite_at_fit() {
        let d = worked_example();
        let con = constrained_mle(&d).unwrap();
        let info = information_matrix(&con.params().unwrap(), &d).unwrap();
        let dense = info.dense();
        assert!(is_positive_definite(&dense));
        // identity check against the closed-form inverse
        let prod = &dense * info.inverse().unwrap();
        let id = DMatrix::identity(3, 3);
        assert!((prod - id).abs().max() < 1e-8);
    }

    #[test]
    fn information_domain_error_on_boundary() {
        let d = worked_example();
        let params = ModelParams::pooled(0.5, 2.0, 2).unwrap(); // R pi = 1
        assert!(matches!(
            information_matrix(&params, &d),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn tests_reject_single_group() {
        let d = StudyData::new(vec![GroupCounts::new(9, 7, 23, 20, 34)]).unwrap();
        assert!(matches!(lr_test(&d), Err(Error::InvalidConfig(_))));
        assert!(matches!(donner_adjusted_test(&d), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn donner_degenerate_when_no_responses_vary() {
        let d = StudyData::new(vec![
            GroupCounts::new(10, 0, 0, 10, 0),
            GroupCounts::new(8, 0, 0, 12, 0),
        ])
        .unwrap();
        assert!(matches!(
            donner_adjusted_test(&d),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn run_selected_shares_fits() {
        let d = worked_example();
        let all = [
            TestMethod::Lr,
            TestMethod::Wald,
            TestMethod::Score,
            TestMethod::DonnerAdjusted,
        ];
        let results = run_selected(&d, &all);
        assert_eq!(results.len(), 4);
        for (method, res) in results {
            let t = res.unwrap();
            assert_eq!(t.method, method);
            assert!(t.statistic >= 0.0);
        }
    }
}
