//! Seeded Monte Carlo from the generative model.
//!
//! Replication `r` of a plan with seed `s` draws from its own ChaCha8 stream:
//! the generator is seeded with `seed_from_u64(s)` and switched to stream `r`,
//! so any replication can be regenerated alone and parallel runs are
//! byte-identical for every worker count. Standard normals come from the
//! ziggurat sampler of `rand_distr::StandardNormal`; the components of each
//! triple are drawn in the order `z_1, z_2, z_3` and mapped through the lower
//! Cholesky factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analytic::{check_sample_size, clt_covariance};
use crate::error::{Error, Result};
use crate::linalg::{cholesky3, Mat3};
use crate::params::CovarianceStructure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationPlan {
    pub structure: CovarianceStructure,
    pub n: u32,
    pub reps: u64,
    pub seed: u64,
}

impl SimulationPlan {
    pub fn new(structure: CovarianceStructure, n: u32, reps: u64, seed: u64) -> Result<Self> {
        check_sample_size(n)?;
        if reps == 0 {
            return Err(Error::Domain("reps must be at least 1".into()));
        }
        Ok(Self { structure, n, reps, seed })
    }
}

/// Lower-triangular `L` with `L L^T = Sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyFactor {
    lower: Mat3,
}

impl CholeskyFactor {
    pub fn lower(&self) -> [[f64; 3]; 3] {
        self.lower
    }

    /// `L z`
    pub fn apply(&self, z: [f64; 3]) -> [f64; 3] {
        let l = &self.lower;
        [l[0][0] * z[0], l[1][0] * z[0] + l[1][1] * z[1], l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2]]
    }
}

/// Cholesky factor of the structure's covariance matrix.
///
/// # Panics
/// Never for a validated structure; a failure means the admissibility check
/// and positive definiteness disagree.
pub fn cholesky(structure: &CovarianceStructure) -> CholeskyFactor {
    let lower = cholesky3(&structure.matrix()).expect("admissible covariance structures are positive definite");
    CholeskyFactor { lower }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_triple<R: Rng>(rng: &mut R, factor: &CholeskyFactor) -> [f64; 3] {
    let z = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    factor.apply(z)
}

/// The `n` observations `(A_j, B_j, C_j)` behind replication `rep`.
pub fn observations(plan: &SimulationPlan, rep: u64) -> Vec<[f64; 3]> {
    let factor = cholesky(&plan.structure);
    let mut rng = stream(plan.seed, rep);
    (0..plan.n).map(|_| draw_triple(&mut rng, &factor)).collect()
}

fn pair_for_rep(plan: &SimulationPlan, factor: &CholeskyFactor, rep: u64) -> (f64, f64) {
    let mut rng = stream(plan.seed, rep);
    let (mut g_ac, mut g_bc) = (0.0, 0.0);
    for _ in 0..plan.n {
        let [a, b, c] = draw_triple(&mut rng, factor);
        g_ac += a * c;
        g_bc += b * c;
    }
    (g_ac, g_bc)
}

/// `(sum_j A_j C_j, sum_j B_j C_j)` for every replication, in replication
/// order. Computed in parallel.
pub fn sample_cov_pair(plan: &SimulationPlan) -> Vec<(f64, f64)> {
    let factor = cholesky(&plan.structure);
    (0..plan.reps).into_par_iter().map(|rep| pair_for_rep(plan, &factor, rep)).collect()
}

/// The same values as [`sample_cov_pair`], produced lazily on one thread.
pub fn cov_pair_stream(plan: &SimulationPlan) -> impl Iterator<Item = (f64, f64)> + '_ {
    let factor = cholesky(&plan.structure);
    (0..plan.reps).map(move |rep| pair_for_rep(plan, &factor, rep))
}

/// Frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub reps: u64,
}

/// Fraction of replications with `g_ac > x0` and `g_bc > y0`.
pub fn empirical_quadrant(plan: &SimulationPlan, x0: f64, y0: f64) -> QuadrantEstimate {
    let factor = cholesky(&plan.structure);
    let hits: u64 = (0..plan.reps)
        .into_par_iter()
        .map(|rep| {
            let (g_ac, g_bc) = pair_for_rep(plan, &factor, rep);
            u64::from(g_ac > x0 && g_bc > y0)
        })
        .sum();
    QuadrantEstimate::from_counts(hits, plan.reps)
}

impl QuadrantEstimate {
    pub fn from_counts(hits: u64, reps: u64) -> Self {
        let p = hits as f64 / reps as f64;
        Self { estimate: p, std_error: (p * (1.0 - p) / reps as f64).sqrt(), hits, reps }
    }
}

/// Empirical covariance of the standardized pair `(g - n rho) / sqrt(n)`
/// against the large-`n` limit, for one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub n: u32,
    pub empirical: [[f64; 2]; 2],
    pub limit: [[f64; 2]; 2],
    /// Standard error of each empirical entry.
    pub std_error: [[f64; 2]; 2],
    /// Largest `|empirical - limit|` over the entries.
    pub max_deviation: f64,
    /// Largest deviation in units of its standard error.
    pub max_z: f64,
}

/// Runs one simulation per `n` (all with `seed`) and compares covariances.
pub fn clt_check(structure: &CovarianceStructure, n_list: &[u32], reps: u64, seed: u64) -> Result<Vec<CltRow>> {
    if reps < 2 {
        return Err(Error::Domain("clt_check needs at least 2 reps".into()));
    }
    let limit = clt_covariance(structure);
    n_list
        .iter()
        .map(|&n| {
            let plan = SimulationPlan::new(*structure, n, reps, seed)?;
            let shift = f64::from(n) * structure.rho();
            let scale = f64::from(n).sqrt();
            let z: Vec<[f64; 2]> = sample_cov_pair(&plan)
                .into_iter()
                .map(|(g1, g2)| [(g1 - shift) / scale, (g2 - shift) / scale])
                .collect();
            let count = z.len() as f64;
            let mean = [0, 1].map(|k| z.iter().map(|p| p[k]).sum::<f64>() / count);
            let mut empirical = [[0.0; 2]; 2];
            let mut std_error = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let products: Vec<f64> = z.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).collect();
                    let m = products.iter().sum::<f64>() / count;
                    let var = products.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / (count - 1.0);
                    empirical[i][j] = m * count / (count - 1.0);
                    std_error[i][j] = (var / count).sqrt();
                }
            }
            let mut max_deviation: f64 = 0.0;
            let mut max_z: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let dev = (empirical[i][j] - limit[i][j]).abs();
                    max_deviation = max_deviation.max(dev);
                    max_z = max_z.max(dev / std_error[i][j]);
                }
            }
            Ok(CltRow { n, empirical, limit, std_error, max_deviation, max_z })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> CovarianceStructure {
        CovarianceStructure::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn cholesky_examples() {
        let id = cholesky(&CovarianceStructure::new(0.0, 0.0).unwrap()).lower();
        assert_eq!(id, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let l = cholesky(&half()).lower();
        // independent closed forms: l11 = sqrt(3)/2, l21 = (1/2 - 1/4)/l11, l22 = sqrt(2/3)
        let expect =
            [[1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0], [0.5, 0.25 / (3f64.sqrt() / 2.0), (2.0f64 / 3.0).sqrt()]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((l[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plan_validation() {
        assert!(SimulationPlan::new(half(), 0, 10, 1).is_err());
        assert!(SimulationPlan::new(half(), 3, 0, 1).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let plan = SimulationPlan::new(half(), 3, 10_000, 7).unwrap();
        let par = sample_cov_pair(&plan);
        let seq: Vec<_> = cov_pair_stream(&plan).collect();
        assert_eq!(par.len(), seq.len());
        for (p, s) in par.iter().zip(&seq) {
            assert_eq!(p.0.to_bits(), s.0.to_bits());
            assert_eq!(p.1.to_bits(), s.1.to_bits());
        }
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sample_cov_pair(&plan));
        assert_eq!(single, par);
    }

    #[test]
    fn replications_regenerate_alone() {
        let plan = SimulationPlan::new(half(), 4, 50, 11).unwrap();
        let pairs = sample_cov_pair(&plan);
        let obs = observations(&plan, 37);
        let g_ac: f64 = obs.iter().map(|t| t[0] * t[2]).sum();
        let g_bc: f64 = obs.iter().map(|t| t[1] * t[2]).sum();
        assert_eq!(pairs[37], (g_ac, g_bc));
    }

    #[test]
    fn far_quadrant_is_empty() {
        let plan = SimulationPlan::new(half(), 3, 1000, 3).unwrap();
        let q = empirical_quadrant(&plan, 1e9, 1e9);
        assert_eq!(q.estimate, 0.0);
        assert_eq!(q.std_error, 0.0);
    }
}
