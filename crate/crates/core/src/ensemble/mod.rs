//! Exact enumeration of finite grand-canonical ensembles.
//!
//! An [`EnsembleSpec`] lists every microstate of a small system explicitly,
//! so the partition function, microstate probabilities, and count moments can
//! be computed exactly. The module also carries an independent
//! finite-difference route to the same moments: differences of the scaled
//! log-partition `(1/beta) ln Z` over the chemical potentials recover the
//! mean counts at first order and `beta` times the count covariance at
//! second order, and [`count_moments`] reports both sides so the identity
//! can be checked numerically.

mod io;
mod reservoir;

pub use io::{load_ensemble, load_reservoir, parse_ensemble, parse_reservoir};
pub use reservoir::{
    boltzmann_limit_check, enumerate_reservoir_probabilities, reservoir_probabilities,
    BoltzmannLimitEntry, BoltzmannLimitReport, ReservoirModel,
};

use crate::{Error, Result};

/// Default step for central finite differences over the potentials.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// One complete configuration of the system: a per-species count vector and
/// the configuration's energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Microstate {
    pub counts: Vec<u64>,
    pub energy: f64,
}

impl Microstate {
    pub fn new(counts: Vec<u64>, energy: f64) -> Self {
        Microstate { counts, energy }
    }
}

/// A finite multi-species grand-canonical ensemble: inverse temperature,
/// one chemical potential per species, and an explicit microstate list.
///
/// `beta` is the primitive temperature parameter; Boltzmann's constant and
/// the temperature are never represented separately.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub beta: f64,
    pub potentials: Vec<f64>,
    pub microstates: Vec<Microstate>,
}

impl EnsembleSpec {
    pub fn new(beta: f64, potentials: Vec<f64>, microstates: Vec<Microstate>) -> Result<Self> {
        let spec = EnsembleSpec {
            beta,
            potentials,
            microstates,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Number of particle species `K`.
    pub fn species_count(&self) -> usize {
        self.potentials.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be a positive finite real, got {}",
                self.beta
            )));
        }
        if self.microstates.is_empty() {
            return Err(Error::InvalidInput(
                "ensemble must contain at least one microstate".into(),
            ));
        }
        if let Some(mu) = self.potentials.iter().find(|mu| !mu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite chemical potential {mu}"
            )));
        }
        let k = self.species_count();
        for (i, state) in self.microstates.iter().enumerate() {
            if state.counts.len() != k {
                return Err(Error::InvalidInput(format!(
                    "microstate {i} has {} count entries, expected {k}",
                    state.counts.len()
                )));
            }
            if !state.energy.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "microstate {i} has non-finite energy {}",
                    state.energy
                )));
            }
        }
        Ok(())
    }

    /// Exponent `beta * (sum_k mu_k N_{k,i} - E_i)` for every microstate.
    fn exponents_at(&self, potentials: &[f64]) -> Vec<f64> {
        self.microstates
            .iter()
            .map(|state| {
                let coupling: f64 = potentials
                    .iter()
                    .zip(&state.counts)
                    .map(|(mu, &n)| mu * n as f64)
                    .sum();
                self.beta * (coupling - state.energy)
            })
            .collect()
    }
}

/// Moments of the ensemble together with the finite-difference Hessian of
/// the scaled log-partition `(1/beta) ln Z` over the potentials.
///
/// The scaling makes the pair of derivative identities exact: the gradient
/// of `(1/beta) ln Z` is the mean count vector and its Hessian is
/// `beta * covariance` (the bare `ln Z` carries one extra `beta` per
/// derivative). For a valid report `hessian[k][j]` equals
/// `beta * covariance[k][j]` up to finite-difference error of order `h^2`,
/// and the covariance matrix is symmetric positive semi-definite.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub log_z: f64,
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub hessian: Vec<Vec<f64>>,
}

impl MomentReport {
    /// Largest elementwise deviation `|hessian - beta * covariance|`.
    pub fn max_identity_deviation(&self, beta: f64) -> f64 {
        let mut worst = 0.0f64;
        for (hrow, crow) in self.hessian.iter().zip(&self.covariance) {
            for (h, c) in hrow.iter().zip(crow) {
                worst = worst.max((h - beta * c).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the analytic covariance matrix.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.covariance)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Tab-separated rendering: one line per scalar quantity.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("log_z\t{}\n", self.log_z));
        for (k, m) in self.means.iter().enumerate() {
            out.push_str(&format!("mean\t{k}\t{m}\n"));
        }
        for (k, row) in self.covariance.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out.push_str(&format!("covariance\t{k}\t{j}\t{v}\n"));
            }
        }
        for (k, row) in self.hessian.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out.push_str(&format!("hessian\t{k}\t{j}\t{v}\n"));
            }
        }
        out
    }
}

/// `ln Z` of the ensemble, computed with max-subtraction so large exponents
/// cannot overflow.
pub fn log_partition(spec: &EnsembleSpec) -> Result<f64> {
    spec.validate()?;
    Ok(log_partition_at(spec, &spec.potentials))
}

fn log_partition_at(spec: &EnsembleSpec, potentials: &[f64]) -> f64 {
    let exponents = spec.exponents_at(potentials);
    log_sum_exp(&exponents)
}

fn log_sum_exp(exponents: &[f64]) -> f64 {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
    max + sum.ln()
}

/// Probability of every microstate: `p_i = exp(e_i - ln Z)`.
///
/// The result sums to 1 within 1e-12 and every component lies in `[0, 1]`.
pub fn microstate_probabilities(spec: &EnsembleSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let exponents = spec.exponents_at(&spec.potentials);
    let log_z = log_sum_exp(&exponents);
    Ok(exponents.iter().map(|e| (e - log_z).exp()).collect())
}

/// Mean count of every species, `<N_k> = sum_i N_{k,i} p_i`, computed from
/// the analytic probabilities rather than by differentiation.
pub fn mean_counts(spec: &EnsembleSpec) -> Result<Vec<f64>> {
    let probabilities = microstate_probabilities(spec)?;
    Ok(means_from(spec, &probabilities))
}

fn means_from(spec: &EnsembleSpec, probabilities: &[f64]) -> Vec<f64> {
    let k = spec.species_count();
    let mut means = vec![0.0; k];
    for (state, &p) in spec.microstates.iter().zip(probabilities) {
        for (mean, &n) in means.iter_mut().zip(&state.counts) {
            *mean += n as f64 * p;
        }
    }
    means
}

/// First-derivative route to the means: `(1/beta)` times the central
/// difference of `ln Z` with respect to each potential.
///
/// This shares no code with [`mean_counts`] beyond `log_partition` itself,
/// so agreement between the two is a genuine consistency check.
pub fn finite_difference_means(spec: &EnsembleSpec, step: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    validate_step(step)?;
    let k = spec.species_count();
    let mut means = vec![0.0; k];
    for (i, mean) in means.iter_mut().enumerate() {
        let plus = log_partition_at(spec, &shifted(&spec.potentials, &[(i, step)]));
        let minus = log_partition_at(spec, &shifted(&spec.potentials, &[(i, -step)]));
        *mean = (plus - minus) / (2.0 * step * spec.beta);
    }
    Ok(means)
}

/// Full moment report with the default finite-difference step.
pub fn count_moments(spec: &EnsembleSpec) -> Result<MomentReport> {
    count_moments_with_step(spec, DEFAULT_FD_STEP)
}

/// Full moment report: analytic `ln Z`, means, and covariance, plus the
/// Hessian of `(1/beta) ln Z` over the potentials computed independently by
/// central finite differences of [`log_partition`] with the given step.
pub fn count_moments_with_step(spec: &EnsembleSpec, step: f64) -> Result<MomentReport> {
    spec.validate()?;
    validate_step(step)?;
    let exponents = spec.exponents_at(&spec.potentials);
    let log_z = log_sum_exp(&exponents);
    let probabilities: Vec<f64> = exponents.iter().map(|e| (e - log_z).exp()).collect();
    let means = means_from(spec, &probabilities);

    let k = spec.species_count();
    // Centered accumulation keeps the covariance positive semi-definite up to
    // rounding, which the raw <NN> - <N><N> form does not guarantee.
    let mut covariance = vec![vec![0.0; k]; k];
    for (state, &p) in spec.microstates.iter().zip(&probabilities) {
        for a in 0..k {
            let da = state.counts[a] as f64 - means[a];
            for b in 0..k {
                let db = state.counts[b] as f64 - means[b];
                covariance[a][b] += p * da * db;
            }
        }
    }

    let mut hessian = vec![vec![0.0; k]; k];
    let f0 = log_z;
    let scale = 1.0 / spec.beta;
    for a in 0..k {
        let plus = log_partition_at(spec, &shifted(&spec.potentials, &[(a, step)]));
        let minus = log_partition_at(spec, &shifted(&spec.potentials, &[(a, -step)]));
        hessian[a][a] = scale * (plus - 2.0 * f0 + minus) / (step * step);
        for b in (a + 1)..k {
            let pp = log_partition_at(spec, &shifted(&spec.potentials, &[(a, step), (b, step)]));
            let pm = log_partition_at(spec, &shifted(&spec.potentials, &[(a, step), (b, -step)]));
            let mp = log_partition_at(spec, &shifted(&spec.potentials, &[(a, -step), (b, step)]));
            let mm = log_partition_at(spec, &shifted(&spec.potentials, &[(a, -step), (b, -step)]));
            let mixed = scale * (pp - pm - mp + mm) / (4.0 * step * step);
            hessian[a][b] = mixed;
            hessian[b][a] = mixed;
        }
    }

    Ok(MomentReport {
        log_z,
        means,
        covariance,
        hessian,
    })
}

fn validate_step(step: f64) -> Result<()> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    Ok(())
}

fn shifted(potentials: &[f64], deltas: &[(usize, f64)]) -> Vec<f64> {
    let mut out = potentials.to_vec();
    for &(index, delta) in deltas {
        out[index] += delta;
    }
    out
}

/// Eigenvalues of a small symmetric matrix via cyclic Jacobi rotations.
///
/// Intended for the covariance matrices produced here (a handful of species);
/// not a general-purpose eigensolver.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    if n == 0 {
        return Vec::new();
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(beta: f64, potentials: Vec<f64>, states: Vec<(Vec<u64>, f64)>) -> EnsembleSpec {
        EnsembleSpec {
            beta,
            potentials,
            microstates: states
                .into_iter()
                .map(|(counts, energy)| Microstate::new(counts, energy))
                .collect(),
        }
    }

    /// beta=1, mu=[0.5], states N in {0,1,2} with E_i = N_i. Reference values
    /// from a 50-digit summation of ln(1 + e^{-0.5} + e^{-1}).
    fn three_state() -> EnsembleSpec {
        spec(
            1.0,
            vec![0.5],
            vec![(vec![0], 0.0), (vec![1], 1.0), (vec![2], 2.0)],
        )
    }

    const THREE_STATE_LOG_Z: f64 = 0.68026967064173457586;
    const THREE_STATE_P: [f64; 3] = [
        0.5064803910556540259,
        0.30719588571849839707,
        0.18632372322584757702,
    ];
    const THREE_STATE_MEAN: f64 = 0.67984333217019355112;
    const THREE_STATE_VAR: f64 = 0.59030382232561657938;

    #[test]
    fn log_partition_single_empty_state_is_zero() {
        let s = spec(1.0, vec![0.0], vec![(vec![0], 0.0)]);
        assert_eq!(log_partition(&s).unwrap(), 0.0);
    }

    #[test]
    fn log_partition_two_identical_states() {
        let s = spec(0.7, vec![1.5], vec![(vec![3], 2.0), (vec![3], 2.0)]);
        let expected = 2.0f64.ln() + 0.7 * (1.5 * 3.0 - 2.0);
        assert!((log_partition(&s).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn log_partition_three_state_matches_reference() {
        let got = log_partition(&three_state()).unwrap();
        assert!((got - THREE_STATE_LOG_Z).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn log_partition_survives_large_exponents() {
        let s = spec(1.0, vec![0.0], vec![(vec![0], -800.0), (vec![0], -800.0)]);
        let got = log_partition(&s).unwrap();
        assert!((got - (800.0 + 2.0f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn probabilities_equal_counts_equal_energy_are_uniform() {
        let s = spec(2.0, vec![0.3], vec![(vec![1], 0.5), (vec![1], 0.5)]);
        let p = microstate_probabilities(&s).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn probabilities_three_state_match_reference() {
        let p = microstate_probabilities(&three_state()).unwrap();
        for (got, want) in p.iter().zip(THREE_STATE_P) {
            assert!((got - want).abs() < 1e-14);
        }
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_lie_in_unit_interval_and_normalize() {
        let s = spec(
            3.0,
            vec![-1.0, 2.0],
            vec![
                (vec![0, 4], 3.0),
                (vec![1, 1], -2.0),
                (vec![2, 0], 0.0),
                (vec![5, 5], 10.0),
            ],
        );
        let p = microstate_probabilities(&s).unwrap();
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_counts_single_state_is_deterministic() {
        let s = spec(1.0, vec![0.0], vec![(vec![3], 1.0)]);
        assert_eq!(mean_counts(&s).unwrap(), vec![3.0]);
    }

    #[test]
    fn mean_counts_symmetric_two_state() {
        let s = spec(1.0, vec![0.0], vec![(vec![0], 1.0), (vec![2], 1.0)]);
        let means = mean_counts(&s).unwrap();
        assert!((means[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mean_counts_three_state_matches_reference() {
        let means = mean_counts(&three_state()).unwrap();
        assert!((means[0] - THREE_STATE_MEAN).abs() < 1e-14);
    }

    #[test]
    fn single_state_covariance_is_zero() {
        let report = count_moments(&spec(1.0, vec![0.2, -0.4], vec![(vec![2, 7], 3.0)])).unwrap();
        for row in &report.covariance {
            for &v in row {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn anticorrelated_two_species_covariance() {
        // Two states [1,0] and [0,1] with equal energies and zero potentials:
        // p = [1/2, 1/2], var_k = 1/4, cov_12 = -1/4 = -var (hand enumeration).
        let s = spec(1.0, vec![0.0, 0.0], vec![(vec![1, 0], 0.0), (vec![0, 1], 0.0)]);
        let report = count_moments(&s).unwrap();
        assert!((report.covariance[0][0] - 0.25).abs() < 1e-14);
        assert!((report.covariance[1][1] - 0.25).abs() < 1e-14);
        assert!((report.covariance[0][1] + 0.25).abs() < 1e-14);
        assert!((report.covariance[0][1] + report.covariance[0][0]).abs() < 1e-14);
    }

    #[test]
    fn covariance_diagonal_equals_direct_variance() {
        let s = three_state();
        let report = count_moments(&s).unwrap();
        // Variance computed along the direct <N^2> - <N>^2 path.
        let p = microstate_probabilities(&s).unwrap();
        let mean: f64 = s
            .microstates
            .iter()
            .zip(&p)
            .map(|(m, &pi)| m.counts[0] as f64 * pi)
            .sum();
        let second: f64 = s
            .microstates
            .iter()
            .zip(&p)
            .map(|(m, &pi)| (m.counts[0] as f64).powi(2) * pi)
            .sum();
        let var = second - mean * mean;
        assert!((report.covariance[0][0] - var).abs() < 1e-13);
        assert!((var - THREE_STATE_VAR).abs() < 1e-13);
    }

    #[test]
    fn hessian_matches_beta_covariance_three_state() {
        let report = count_moments(&three_state()).unwrap();
        let dev = report.max_identity_deviation(1.0);
        assert!(dev < 100.0 * DEFAULT_FD_STEP * DEFAULT_FD_STEP, "dev {dev}");
    }

    #[test]
    fn finite_difference_means_match_analytic() {
        let s = spec(
            1.7,
            vec![0.4, -0.9],
            vec![
                (vec![0, 1], 0.3),
                (vec![1, 0], -0.2),
                (vec![2, 2], 0.8),
                (vec![0, 0], 0.0),
            ],
        );
        let h = DEFAULT_FD_STEP;
        let fd = finite_difference_means(&s, h).unwrap();
        let analytic = mean_counts(&s).unwrap();
        for (f, a) in fd.iter().zip(&analytic) {
            assert!((f - a).abs() < 10.0 * h * h, "fd {f} analytic {a}");
        }
    }

    #[test]
    fn shift_invariance_of_probabilities() {
        let base = spec(
            2.5,
            vec![1.0, -0.5],
            vec![(vec![0, 2], 1.0), (vec![1, 1], -0.7), (vec![3, 0], 2.2)],
        );
        let mut shifted = base.clone();
        for m in &mut shifted.microstates {
            m.energy += 17.25;
        }
        let p0 = microstate_probabilities(&base).unwrap();
        let p1 = microstate_probabilities(&shifted).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad_beta = spec(0.0, vec![0.0], vec![(vec![0], 0.0)]);
        assert!(matches!(
            log_partition(&bad_beta),
            Err(Error::InvalidInput(_))
        ));

        let empty = EnsembleSpec {
            beta: 1.0,
            potentials: vec![0.0],
            microstates: vec![],
        };
        assert!(log_partition(&empty).is_err());

        let bad_energy = spec(1.0, vec![0.0], vec![(vec![0], f64::NAN)]);
        assert!(log_partition(&bad_energy).is_err());

        let bad_mu = spec(1.0, vec![f64::INFINITY], vec![(vec![0], 0.0)]);
        assert!(log_partition(&bad_mu).is_err());

        let bad_counts = spec(1.0, vec![0.0, 0.0], vec![(vec![0], 0.0)]);
        assert!(log_partition(&bad_counts).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let mut eig = symmetric_eigenvalues(&m);
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let s = spec(
            0.8,
            vec![0.5, -1.0, 0.25],
            vec![
                (vec![0, 1, 2], 0.1),
                (vec![1, 1, 0], -0.4),
                (vec![2, 0, 1], 0.9),
                (vec![0, 0, 0], 0.0),
                (vec![1, 2, 1], 0.3),
            ],
        );
        let report = count_moments(&s).unwrap();
        assert!(report.min_covariance_eigenvalue() > -1e-9);
    }

    #[test]
    fn moment_report_tsv_is_complete() {
        let report = count_moments(&three_state()).unwrap();
        let tsv = report.to_tsv();
        assert!(tsv.starts_with("log_z\t"));
        assert_eq!(tsv.lines().filter(|l| l.starts_with("mean\t")).count(), 1);
        assert_eq!(
            tsv.lines().filter(|l| l.starts_with("covariance\t")).count(),
            1
        );
        assert_eq!(tsv.lines().filter(|l| l.starts_with("hessian\t")).count(), 1);
    }
}
