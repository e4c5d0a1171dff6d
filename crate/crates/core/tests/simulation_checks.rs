//! Statistical checks of the generator and harness: empirical frequencies
//! against the model cells, determinism across thread counts, and the Monte
//! Carlo verification of the expected information matrix.

use corrtest::{
    all_methods, estimate_type_i_error, generate_study, information_matrix, log_likelihood,
    replicate_rng, Dependence, ModelParams, SimConfig, StudyData,
};

/// Empirical bilateral cell frequencies over ~1e6 subjects.
fn empirical_cells(pi: f64, r: f64, seed: u64) -> ([f64; 3], u64) {
    let mut rng = replicate_rng(seed, 0, 0);
    let per_draw = 10_000u64;
    let draws = 100;
    let mut counts = [0u64; 3];
    for _ in 0..draws {
        let d = generate_study(&[per_draw, per_draw], &[0, 0], &[pi, pi], r, &mut rng).unwrap();
        counts[0] += d.s(0);
        counts[1] += d.s(1);
        counts[2] += d.s(2);
    }
    let total = (2 * per_draw * draws) as f64;
    (
        [
            counts[0] as f64 / total,
            counts[1] as f64 / total,
            counts[2] as f64 / total,
        ],
        2 * per_draw * draws,
    )
}

#[test]
fn generator_matches_independence_cells() {
    // rho = 0: cells are ((1-pi)^2, 2 pi (1-pi), pi^2)
    let pi = 0.37;
    let (freq, n) = empirical_cells(pi, 1.0, 11);
    let expect = [(1.0 - pi) * (1.0 - pi), 2.0 * pi * (1.0 - pi), pi * pi];
    for (f, e) in freq.iter().zip(expect.iter()) {
        let se = (e * (1.0 - e) / n as f64).sqrt();
        assert!(
            (f - e).abs() <= 3.0 * se,
            "frequency {f} vs {e} (3 se = {})",
            3.0 * se
        );
    }
}

#[test]
fn generator_matches_dependent_cells() {
    // pi = 0.5, rho = 0.5 -> R = 1.5 -> cells (0.375, 0.25, 0.375)
    let (freq, n) = empirical_cells(0.5, 1.5, 12);
    for (f, e) in freq.iter().zip([0.375, 0.25, 0.375].iter()) {
        let se = (e * (1.0 - e) / n as f64).sqrt();
        assert!((f - e).abs() <= 3.0 * se, "frequency {f} vs {e}");
    }
}

#[test]
fn organ_level_mean_matches_pi() {
    // mean of A_i / M_i over replicates approaches pi_i
    let pis = [0.35, 0.6];
    let reps = 2_000u64;
    let mut sums = [0.0f64; 2];
    for rep in 0..reps {
        let mut rng = replicate_rng(13, 0, rep);
        let d = generate_study(&[40, 40], &[40, 40], &pis, 1.3, &mut rng).unwrap();
        for (i, grp) in d.groups().iter().enumerate() {
            let a = (grp.m1 + 2 * grp.m2 + grp.n1) as f64;
            let m = (2 * grp.m() + grp.n()) as f64;
            sums[i] += a / m;
        }
    }
    for (i, &pi) in pis.iter().enumerate() {
        let mean = sums[i] / reps as f64;
        // var(A/M) <= 1/(4*120) per replicate; 3 se with slack
        let se = (0.25 / 120.0f64 / reps as f64).sqrt();
        assert!(
            (mean - pi).abs() <= 4.0 * se,
            "group {i}: mean {mean} vs {pi}"
        );
    }
}

#[test]
fn reports_identical_across_thread_counts() {
    let config = SimConfig {
        m_sizes: vec![25, 25, 25],
        n_sizes: vec![25, 25, 25],
        pi_true: vec![0.55; 3],
        dependence: Dependence::Rho(0.4),
        replicates: 300,
        alpha: 0.05,
        seed: 2024,
        methods: all_methods(),
    };
    let runs: Vec<_> = [1usize, 4]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| estimate_type_i_error(&config).unwrap())
        })
        .collect();
    assert_eq!(runs[0].outcomes, runs[1].outcomes);
    assert_eq!(runs[0].to_csv(), runs[1].to_csv());
}

#[test]
fn average_hessian_matches_expected_information() {
    // -E[Hessian] at the generating parameters, estimated from 20k datasets
    // with central finite differences of the log-likelihood
    let pis = vec![0.45, 0.65];
    let r = 1.25;
    let params = ModelParams::new(pis.clone(), r).unwrap();
    let m_sizes = [60u64, 40];
    let n_sizes = [30u64, 50];
    let reps = 20_000u64;
    let h = 1e-4;
    let dim = 3;

    let mut acc = vec![0.0f64; dim * dim];
    let mut used = 0u64;
    for rep in 0..reps {
        let mut rng = replicate_rng(99, 0, rep);
        let data = generate_study(&m_sizes, &n_sizes, &pis, r, &mut rng).unwrap();
        let at = |t: &[f64; 3]| -> Option<f64> {
            let p = ModelParams::new(vec![t[0], t[1]], t[2]).ok()?;
            log_likelihood(&data, &p).ok()
        };
        let base = [pis[0], pis[1], r];
        let mut ok = true;
        let mut local = vec![0.0f64; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let mut pp = base;
                let mut pm = base;
                let mut mp = base;
                let mut mm = base;
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                match (at(&pp), at(&pm), at(&mp), at(&mm)) {
                    (Some(a), Some(b), Some(c), Some(d)) => {
                        let second = (a - b - c + d) / (4.0 * h * h);
                        local[i * dim + j] = second;
                        local[j * dim + i] = second;
                    }
                    _ => {
                        ok = false;
                    }
                }
            }
        }
        if ok {
            for (dst, src) in acc.iter_mut().zip(&local) {
                *dst += src;
            }
            used += 1;
        }
    }
    assert!(used > reps * 99 / 100);

    let info = information_matrix(&params, &study_of(&m_sizes, &n_sizes)).unwrap();
    let expected = info.dense();
    for i in 0..dim {
        for j in 0..dim {
            let avg = -acc[i * dim + j] / used as f64;
            let want = expected[(i, j)];
            let scale = if want != 0.0 {
                want.abs()
            } else {
                // exact zeros (the off-diagonal pi block) are judged against
                // the natural scale of their row and column
                (expected[(i, i)] * expected[(j, j)]).sqrt()
            };
            assert!(
                (avg - want).abs() <= 0.02 * scale,
                "I[{i},{j}]: mc {avg} vs closed form {want}"
            );
        }
    }
}

/// A study whose group sizes match the generator's, for evaluating the
/// expected information (which depends on the data only through m_i, n_i).
fn study_of(m_sizes: &[u64], n_sizes: &[u64]) -> StudyData {
    StudyData::new(
        m_sizes
            .iter()
            .zip(n_sizes)
            .map(|(&m, &n)| corrtest::GroupCounts::new(m, 0, 0, n, 0))
            .collect(),
    )
    .unwrap()
}
