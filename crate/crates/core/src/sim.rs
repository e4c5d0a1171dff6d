//! Seeded Monte Carlo harness for empirical type I error and power.
//!
//! Every replicate draws its own ChaCha8 stream from (seed, scenario,
//! replicate), so results are byte-identical across runs and across thread
//! counts, and any single replicate can be reproduced standalone.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{GroupCounts, StudyData};
use crate::error::{Error, Result};
use crate::inference::{run_selected, TestMethod};
use crate::model::{cell_probabilities, r_from};

/// Dependence specification: either the intraclass correlation rho0 (with R0
/// derived at the first group's proportion) or R0 directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Dependence {
    Rho(f64),
    R(f64),
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub m_sizes: Vec<u64>,
    pub n_sizes: Vec<u64>,
    pub pi_true: Vec<f64>,
    pub dependence: Dependence,
    pub replicates: u64,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<TestMethod>,
}

impl SimConfig {
    pub fn g(&self) -> usize {
        self.pi_true.len()
    }

    /// Resolved R0 for the generator.
    pub fn r0(&self) -> Result<f64> {
        match self.dependence {
            Dependence::R(r) => Ok(r),
            Dependence::Rho(rho) => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::InvalidConfig(format!(
                        "rho0 = {rho} outside [0, 1)"
                    )));
                }
                r_from(self.pi_true[0], rho)
            }
        }
    }

    pub fn validate(&self) -> Result<f64> {
        let g = self.g();
        if g < 2 {
            return Err(Error::InvalidConfig("need at least 2 groups".into()));
        }
        if self.m_sizes.len() != g || self.n_sizes.len() != g {
            return Err(Error::InvalidConfig(format!(
                "m sizes ({}), n sizes ({}) and pi ({}) must all have length g",
                self.m_sizes.len(),
                self.n_sizes.len(),
                g
            )));
        }
        if self
            .m_sizes
            .iter()
            .zip(&self.n_sizes)
            .any(|(&m, &n)| m + n == 0)
        {
            return Err(Error::InvalidConfig(
                "every group needs at least one subject".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} outside (0, 1]",
                self.alpha
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no test methods selected".into()));
        }
        let r0 = self.r0()?;
        for &pi in &self.pi_true {
            cell_probabilities(pi, r0)?;
        }
        Ok(r0)
    }
}

/// Per-method aggregate of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: TestMethod,
    pub rejections: u64,
    pub used: u64,
    pub skipped: u64,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

/// Aggregate report with the resolved configuration echoed back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub r0: f64,
    pub outcomes: Vec<MethodOutcome>,
    /// Set when any method skipped more than 1% of replicates.
    pub high_skip_warning: bool,
    pub wall_ms: u128,
}

impl SimReport {
    /// CSV table: one row per method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,rejections,used,skipped,rejection_rate,mc_se\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.method.label(),
                o.rejections,
                o.used,
                o.skipped,
                o.rejection_rate,
                o.mc_se
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// deterministic stream derivation
// ---------------------------------------------------------------------------

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 stream for replicate `replicate` of scenario `scenario`.
pub fn replicate_rng(seed: u64, scenario: u64, replicate: u64) -> ChaCha8Rng {
    let s0 = splitmix(seed);
    let s1 = splitmix(s0 ^ splitmix(scenario ^ 0x53_43_45_4E));
    let s2 = splitmix(s1 ^ splitmix(replicate ^ 0x52_45_50_4C));
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix(s2.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

// ---------------------------------------------------------------------------
// data generation
// ---------------------------------------------------------------------------

fn binomial(rng: &mut impl Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability already clamped to (0, 1)")
        .sample(rng)
}

/// Draws one study: per group, the bilateral triple is multinomial in the
/// model's cells and the unilateral responders are binomial.
pub fn generate_study(
    m_sizes: &[u64],
    n_sizes: &[u64],
    pi_true: &[f64],
    r0: f64,
    rng: &mut impl Rng,
) -> Result<StudyData> {
    let mut groups = Vec::with_capacity(pi_true.len());
    for ((&m, &n), &pi) in m_sizes.iter().zip(n_sizes).zip(pi_true) {
        let cells = cell_probabilities(pi, r0)?;
        let m0 = binomial(rng, m, cells.p0);
        let rest = m - m0;
        let p1_cond = if cells.p1 + cells.p2 > 0.0 {
            cells.p1 / (cells.p1 + cells.p2)
        } else {
            0.0
        };
        let m1 = binomial(rng, rest, p1_cond);
        let m2 = rest - m1;
        let n1 = binomial(rng, n, pi);
        groups.push(GroupCounts::new(m0, m1, m2, n0_of(n, n1), n1));
    }
    StudyData::new(groups)
}

fn n0_of(n: u64, n1: u64) -> u64 {
    n - n1
}

// ---------------------------------------------------------------------------
// rejection studies
// ---------------------------------------------------------------------------

/// Per-method decision for a single replicate: `Some(reject)` or `None` when
/// the replicate is skipped for that method (degenerate data, failed fit).
pub fn replicate_decisions(
    config: &SimConfig,
    r0: f64,
    scenario: u64,
    replicate: u64,
) -> Vec<Option<bool>> {
    let mut rng = replicate_rng(config.seed, scenario, replicate);
    let data = match generate_study(
        &config.m_sizes,
        &config.n_sizes,
        &config.pi_true,
        r0,
        &mut rng,
    ) {
        Ok(d) => d,
        Err(_) => return vec![None; config.methods.len()],
    };
    run_selected(&data, &config.methods)
        .into_iter()
        .map(|(_, res)| res.ok().map(|t| t.p_value <= config.alpha))
        .collect()
}

fn run_scenario(config: &SimConfig, scenario: u64) -> Result<SimReport> {
    let r0 = config.validate()?;
    let start = Instant::now();
    let decisions: Vec<Vec<Option<bool>>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| replicate_decisions(config, r0, scenario, rep))
        .collect();

    let outcomes = aggregate(&config.methods, &decisions);
    let high_skip_warning = outcomes
        .iter()
        .any(|o| o.skipped * 100 > config.replicates);
    Ok(SimReport {
        config: config.clone(),
        r0,
        outcomes,
        high_skip_warning,
        wall_ms: start.elapsed().as_millis(),
    })
}

fn aggregate(methods: &[TestMethod], decisions: &[Vec<Option<bool>>]) -> Vec<MethodOutcome> {
    methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut rejections = 0u64;
            let mut used = 0u64;
            let mut skipped = 0u64;
            for row in decisions {
                match row[k] {
                    Some(true) => {
                        rejections += 1;
                        used += 1;
                    }
                    Some(false) => used += 1,
                    None => skipped += 1,
                }
            }
            let rate = if used > 0 {
                rejections as f64 / used as f64
            } else {
                f64::NAN
            };
            let mc_se = if used > 0 {
                (rate * (1.0 - rate) / used as f64).sqrt()
            } else {
                f64::NAN
            };
            MethodOutcome {
                method,
                rejections,
                used,
                skipped,
                rejection_rate: rate,
                mc_se,
            }
        })
        .collect()
}

/// Empirical type I error under the null: all `pi_true` entries must agree.
pub fn estimate_type_i_error(config: &SimConfig) -> Result<SimReport> {
    let first = config.pi_true[0];
    if config.pi_true.iter().any(|&p| p != first) {
        return Err(Error::InvalidConfig(
            "type I error runs need a common proportion".into(),
        ));
    }
    run_scenario(config, 0)
}

/// Empirical power under an alternative: `pi_true` must contain unequal
/// entries.
pub fn estimate_power(config: &SimConfig) -> Result<SimReport> {
    let first = config.pi_true[0];
    if config.pi_true.iter().all(|&p| p == first) {
        return Err(Error::InvalidConfig(
            "power runs need unequal proportions".into(),
        ));
    }
    run_scenario(config, 0)
}

// ---------------------------------------------------------------------------
// uniform parameter sweep
// ---------------------------------------------------------------------------

/// Configuration of the uniform (pi0, rho0) sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub m_sizes: Vec<u64>,
    pub n_sizes: Vec<u64>,
    pub n_pairs: u64,
    pub replicates: u64,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<TestMethod>,
}

/// One (pair, method) cell of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub pair_index: u64,
    pub pi0: f64,
    pub rho0: f64,
    pub method: TestMethod,
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub skipped: u64,
}

/// Sweep result plus the count of redrawn infeasible parameter pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub infeasible_redraws: u64,
    pub wall_ms: u128,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair_index,pi0,rho0,method,rejection_rate,mc_se,skipped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.pair_index,
                r.pi0,
                r.rho0,
                r.method.label(),
                r.rejection_rate,
                r.mc_se,
                r.skipped
            ));
        }
        out
    }
}

/// Reserved replicate index used for the per-pair parameter draw.
const PARAM_DRAW: u64 = u64::MAX;

/// Per-pair type I error rates for (pi0, rho0) drawn uniformly on (0, 1)^2.
///
/// Infeasible draws are redrawn and counted; with rho0 in (0, 1) the derived
/// R0 always satisfies R0 <= 1/pi0, so redraws only guard boundary rounding.
pub fn sweep_uniform(config: &SweepConfig) -> Result<SweepReport> {
    if config.n_pairs == 0 {
        return Err(Error::InvalidConfig("n_pairs must be positive".into()));
    }
    let g = config.m_sizes.len();
    if g < 2 || config.n_sizes.len() != g {
        return Err(Error::InvalidConfig(
            "sweep needs g >= 2 with matching m and n size lists".into(),
        ));
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.n_pairs as usize * config.methods.len());
    let mut infeasible_redraws = 0u64;
    for pair in 0..config.n_pairs {
        let mut rng = replicate_rng(config.seed, pair, PARAM_DRAW);
        let (pi0, rho0) = loop {
            let pi0: f64 = rng.random();
            let rho0: f64 = rng.random();
            if pi0 > 0.0
                && pi0 < 1.0
                && rho0 < 1.0
                && r_from(pi0, rho0)
                    .and_then(|r| cell_probabilities(pi0, r))
                    .is_ok()
            {
                break (pi0, rho0);
            }
            infeasible_redraws += 1;
        };
        let pair_config = SimConfig {
            m_sizes: config.m_sizes.clone(),
            n_sizes: config.n_sizes.clone(),
            pi_true: vec![pi0; g],
            dependence: Dependence::Rho(rho0),
            replicates: config.replicates,
            alpha: config.alpha,
            seed: config.seed,
            methods: config.methods.clone(),
        };
        let r0 = pair_config.validate()?;
        let decisions: Vec<Vec<Option<bool>>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| replicate_decisions(&pair_config, r0, pair, rep))
            .collect();
        for outcome in aggregate(&config.methods, &decisions) {
            rows.push(SweepRow {
                pair_index: pair,
                pi0,
                rho0,
                method: outcome.method,
                rejection_rate: outcome.rejection_rate,
                mc_se: outcome.mc_se,
                skipped: outcome.skipped,
            });
        }
    }
    Ok(SweepReport {
        config: config.clone(),
        rows,
        infeasible_redraws,
        wall_ms: start.elapsed().as_millis(),
    })
}

/// All four omnibus tests.
pub fn all_methods() -> Vec<TestMethod> {
    vec![
        TestMethod::Lr,
        TestMethod::Wald,
        TestMethod::Score,
        TestMethod::DonnerAdjusted,
    ]
}
