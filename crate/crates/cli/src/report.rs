//! Rendering: human tables at 4 decimals, JSON at full precision.

use serde::Serialize;

use corrtest::{FitMethod, MleFit, TestResult};

use crate::input::DataFile;
use crate::Failure;

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::ClosedForm => "closed-form",
        FitMethod::FisherScoring => "fisher-scoring",
        FitMethod::NumericFallback => "numeric-fallback",
    }
}

#[derive(Serialize)]
struct FitSide {
    pi_hat: Vec<f64>,
    r_hat: Option<f64>,
    rho_hat: Option<Vec<f64>>,
    log_lik: f64,
    converged: bool,
    iterations: u32,
    gradient_norm: f64,
    method: &'static str,
}

impl FitSide {
    fn of(fit: &MleFit) -> Self {
        Self {
            pi_hat: fit.pi_hat.clone(),
            r_hat: fit.r_hat,
            rho_hat: fit.rho_hat().ok(),
            log_lik: fit.log_lik,
            converged: fit.converged,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
            method: method_name(fit.method),
        }
    }
}

#[derive(Serialize)]
struct FitJson<'a> {
    groups: &'a [String],
    constrained: FitSide,
    unconstrained: FitSide,
}

pub fn fit_json(file: &DataFile, con: &MleFit, unc: &MleFit) -> Result<String, Failure> {
    serde_json::to_string_pretty(&FitJson {
        groups: &file.labels,
        constrained: FitSide::of(con),
        unconstrained: FitSide::of(unc),
    })
    .map_err(|e| Failure::numerical(e.to_string()))
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "not estimable".into(),
    }
}

pub fn fit_table(file: &DataFile, con: &MleFit, unc: &MleFit) -> String {
    let mut out = String::new();
    let width = file
        .labels
        .iter()
        .map(|l| l.len())
        .max()
        .unwrap_or(5)
        .max(5);

    out.push_str("Constrained MLEs (common proportion)\n");
    out.push_str(&format!("  pi_H0  = {:.4}\n", con.pi_hat[0]));
    out.push_str(&format!("  R_H0   = {}\n", fmt_opt(con.r_hat)));
    if let Ok(rho) = con.rho_hat() {
        out.push_str(&format!("  rho_H0 = {:.4}\n", rho[0]));
    }
    out.push_str(&format!("  log-likelihood = {:.4}\n", con.log_lik));
    out.push_str(&format!(
        "  method = {}, converged = {}, |grad| = {:.2e}\n",
        method_name(con.method),
        con.converged,
        con.gradient_norm
    ));

    out.push_str("\nUnconstrained MLEs\n");
    let rho = unc.rho_hat().ok();
    out.push_str(&format!("  {:width$}  pi_hat  rho_hat\n", "group"));
    for (i, label) in file.labels.iter().enumerate() {
        let rho_txt = rho
            .as_ref()
            .map(|r| format!("{:.4}", r[i]))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "  {:width$}  {:.4}  {}\n",
            label, unc.pi_hat[i], rho_txt
        ));
    }
    out.push_str(&format!("  R_hat  = {}\n", fmt_opt(unc.r_hat)));
    out.push_str(&format!("  log-likelihood = {:.4}\n", unc.log_lik));
    out.push_str(&format!(
        "  method = {}, converged = {}, iterations = {}, |grad| = {:.2e}\n",
        method_name(unc.method),
        unc.converged,
        unc.iterations,
        unc.gradient_norm
    ));
    out
}

pub fn tests_json(results: &[TestResult]) -> Result<String, Failure> {
    let rendered = if results.len() == 1 {
        serde_json::to_string_pretty(&results[0])
    } else {
        serde_json::to_string_pretty(results)
    };
    rendered.map_err(|e| Failure::numerical(e.to_string()))
}

pub fn tests_table(labels: &[String], results: &[TestResult]) -> String {
    let mut out = String::from("method         statistic  df  p-value\n");
    for t in results {
        let name = match t.pair {
            Some((i, j)) => format!(
                "wald[{} vs {}]",
                labels.get(i).cloned().unwrap_or_else(|| (i + 1).to_string()),
                labels.get(j).cloned().unwrap_or_else(|| (j + 1).to_string())
            ),
            None => t.method.label().to_string(),
        };
        out.push_str(&format!(
            "{:<14} {:>9.4}  {:>2}  {:.4}\n",
            name, t.statistic, t.df, t.p_value
        ));
    }
    out
}
