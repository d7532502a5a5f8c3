use covpair::analytic::marginal_density;
use covpair::numerics::{integrate_1d, QuadratureConfig};
use covpair::simulation::{cholesky, clt_check, empirical_quadrant, observations, sample_cov_pair, SimulationPlan};
use covpair::CovarianceStructure;

const REPS: u64 = 1_000_000;

fn structure(rho: f64, sigma: f64) -> CovarianceStructure {
    CovarianceStructure::new(rho, sigma).unwrap()
}

/// Statistical checks get one rerun with the next seed and fail only if both
/// runs exceed their band.
fn passes_with_retry(seed: u64, check: impl Fn(u64) -> Result<(), String>) {
    if let Err(first) = check(seed) {
        if let Err(second) = check(seed + 1) {
            panic!("failed twice:\n  seed {seed}: {first}\n  seed {}: {second}", seed + 1);
        }
    }
}

#[test]
fn cholesky_reproduces_sigma() {
    for (r, s) in [(0.0, 0.0), (0.5, 0.5), (-0.3, 0.2), (0.6, 0.1), (0.69, 0.0), (0.1, -0.95)] {
        let st = structure(r, s);
        let l = cholesky(&st).lower();
        let m = st.matrix();
        for i in 0..3 {
            assert!(l[i][i] > 0.0);
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - m[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn identical_plans_identical_outputs() {
    let plan = SimulationPlan::new(structure(0.5, 0.5), 3, 20_000, 42).unwrap();
    let a = sample_cov_pair(&plan);
    let b = sample_cov_pair(&plan);
    let bits = |v: &[(f64, f64)]| v.iter().flat_map(|p| [p.0.to_bits(), p.1.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let other = SimulationPlan { seed: 43, ..plan };
    assert_ne!(bits(&a), bits(&sample_cov_pair(&other)));
}

#[test]
fn sampler_marginals_and_covariances() {
    passes_with_retry(2024, |seed| {
        let plan = SimulationPlan::new(structure(0.5, 0.5), 1_000_000, 1, seed).unwrap();
        let draws = observations(&plan, 0);
        let count = draws.len() as f64;
        let mean = |k: usize| draws.iter().map(|t| t[k]).sum::<f64>() / count;
        for k in 0..3 {
            let m = mean(k);
            let var = draws.iter().map(|t| (t[k] - m).powi(2)).sum::<f64>() / (count - 1.0);
            if m.abs() > 4.0 / count.sqrt() {
                return Err(format!("mean of component {k} = {m}"));
            }
            if (var - 1.0).abs() > 4.0 * (2.0 / count).sqrt() {
                return Err(format!("variance of component {k} = {var}"));
            }
        }
        for (i, j, want) in [(0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.5)] {
            let products: Vec<f64> = draws.iter().map(|t| t[i] * t[j]).collect();
            let m = products.iter().sum::<f64>() / count;
            let sd = (products.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (count - 1.0)).sqrt();
            if (m - want).abs() > 4.0 * sd / count.sqrt() {
                return Err(format!("cov({i},{j}) = {m}"));
            }
        }
        Ok(())
    });
}

#[test]
fn mean_of_first_covariance() {
    passes_with_retry(42, |seed| {
        let plan = SimulationPlan::new(structure(0.5, 0.5), 3, REPS, seed).unwrap();
        let pairs = sample_cov_pair(&plan);
        let mean = pairs.iter().map(|p| p.0).sum::<f64>() / REPS as f64;
        let se = (3.0 * (0.25 + 1.0) / REPS as f64).sqrt();
        if (mean - 1.5).abs() <= 4.0 * se {
            Ok(())
        } else {
            Err(format!("mean {mean}, se {se}"))
        }
    });
}

#[test]
fn quadrant_frequencies() {
    let cases = [((0.0, 0.0), 1, 0.25), ((0.5, 0.5), 2, 0.608_173_447), ((0.5, 0.5), 3, 0.683_776_298_4)];
    for ((r, s), n, want) in cases {
        passes_with_retry(7, |seed| {
            let plan = SimulationPlan::new(structure(r, s), n, REPS, seed).unwrap();
            let q = empirical_quadrant(&plan, 0.0, 0.0);
            if (q.estimate - want).abs() <= 3.0 * q.std_error {
                Ok(())
            } else {
                Err(format!("n={n}: {q:?} vs {want}"))
            }
        });
    }
}

#[test]
fn clt_covariance_at_n32() {
    passes_with_retry(5, |seed| {
        let rows = clt_check(&structure(0.5, 0.5), &[32], REPS, seed).map_err(|e| e.to_string())?;
        let row = &rows[0];
        assert_eq!(row.limit, [[1.25, 0.75], [0.75, 1.25]]);
        if row.max_z <= 4.0 {
            Ok(())
        } else {
            Err(format!("{row:?}"))
        }
    });
    let rows = clt_check(&structure(0.0, 0.0), &[8], 1000, 1).unwrap();
    assert_eq!(rows[0].limit, [[1.0, 0.0], [0.0, 1.0]]);
}

#[test]
fn clt_deviation_shrinks_with_reps() {
    passes_with_retry(9, |seed| {
        let st = structure(0.5, 0.5);
        let small = clt_check(&st, &[16], 10_000, seed).map_err(|e| e.to_string())?;
        let large = clt_check(&st, &[16], REPS, seed).map_err(|e| e.to_string())?;
        let band = 4.0 * large[0].std_error.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        if large[0].max_deviation <= small[0].max_deviation.max(band) {
            Ok(())
        } else {
            Err(format!("{:?} vs {:?}", large[0], small[0]))
        }
    });
}

#[test]
fn histogram_of_first_covariance_matches_marginal() {
    // 50 bins on [-6, 9] plus the two overflow cells: 51 degrees of freedom,
    // chi-square 0.999 quantile 87.968 (scipy.stats.chi2.ppf)
    const CRITICAL: f64 = 87.967_980_475_628_68;
    let st = structure(0.5, 0.5);
    let cfg = QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadratureConfig::default() };
    let f = |x: f64| marginal_density(&st, 3, x).unwrap();
    let edges: Vec<f64> = (0..=50).map(|i| -6.0 + 0.3 * f64::from(i)).collect();
    let mut probs: Vec<f64> =
        edges.windows(2).map(|w| integrate_1d(f, w[0], w[1], &[0.0], &cfg).unwrap().value).collect();
    let below = integrate_1d(f, -80.0, -6.0, &[], &cfg).unwrap().value;
    let above = integrate_1d(f, 9.0, 120.0, &[], &cfg).unwrap().value;
    probs.push(below);
    probs.push(above);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    passes_with_retry(11, |seed| {
        let plan = SimulationPlan::new(st, 3, REPS, seed).unwrap();
        let mut counts = vec![0u64; 52];
        for (g, _) in sample_cov_pair(&plan) {
            let cell = if g < -6.0 {
                50
            } else if g >= 9.0 {
                51
            } else {
                (((g + 6.0) / 0.3) as usize).min(49)
            };
            counts[cell] += 1;
        }
        let total = REPS as f64;
        let chi2: f64 = counts.iter().zip(&probs).map(|(&c, &p)| (c as f64 - total * p).powi(2) / (total * p)).sum();
        if chi2 < CRITICAL {
            Ok(())
        } else {
            Err(format!("chi-square {chi2}"))
        }
    });
}
