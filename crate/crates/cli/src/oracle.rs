//! The `oracle` subcommand: runs the ensemble identity suite and prints a
//! tab-separated pass/fail table.
//!
//! Checks cover probability normalization, the derivative identities (means
//! against first differences, beta times covariance against the
//! finite-difference Hessian), positive semi-definiteness of the covariance,
//! energy-shift invariance, exact reservoir counting against brute-force
//! enumeration, and the Boltzmann limit of the counting probabilities.

use std::path::PathBuf;

use anyhow::Result;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use thermovec::ensemble::{
    boltzmann_limit_check, count_moments_with_step, enumerate_reservoir_probabilities,
    finite_difference_means, load_ensemble, load_reservoir, log_partition, mean_counts,
    microstate_probabilities, reservoir_probabilities, EnsembleSpec, Microstate, ReservoirModel,
};

pub struct OracleOptions {
    pub ensemble_files: Vec<PathBuf>,
    pub reservoir_files: Vec<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub fd_step: f64,
}

struct Table {
    failures: usize,
}

impl Table {
    fn new() -> Self {
        println!("check\tsubject\tmeasured\tbound\tstatus");
        Table { failures: 0 }
    }

    fn row(&mut self, check: &str, subject: &str, measured: f64, bound: f64, pass: bool) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "{check}\t{subject}\t{measured:.3e}\t{bound:.3e}\t{}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

/// Returns true when every check passed.
pub fn run(options: &OracleOptions) -> Result<bool> {
    let mut table = Table::new();
    let h = options.fd_step;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst_norm = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut worst_hessian = 0.0f64;
    let mut worst_eigen = f64::INFINITY;
    let mut worst_shift = 0.0f64;
    for _ in 0..options.trials {
        let spec = random_ensemble(&mut rng);
        let p = microstate_probabilities(&spec)?;
        worst_norm = worst_norm.max((p.iter().sum::<f64>() - 1.0).abs());

        let analytic = mean_counts(&spec)?;
        let fd = finite_difference_means(&spec, h)?;
        for (a, f) in analytic.iter().zip(&fd) {
            worst_mean = worst_mean.max((a - f).abs());
        }

        let report = count_moments_with_step(&spec, h)?;
        worst_hessian = worst_hessian.max(report.max_identity_deviation(spec.beta));
        worst_eigen = worst_eigen.min(report.min_covariance_eigenvalue());

        let mut shifted = spec.clone();
        for state in &mut shifted.microstates {
            state.energy += 13.5;
        }
        let q = microstate_probabilities(&shifted)?;
        for (a, b) in p.iter().zip(&q) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    let subject = format!("{} random ensembles", options.trials);
    table.row("normalization", &subject, worst_norm, 1e-12, worst_norm < 1e-12);
    table.row(
        "mean-derivative-identity",
        &subject,
        worst_mean,
        10.0 * h * h,
        worst_mean < 10.0 * h * h,
    );
    table.row(
        "hessian-covariance-identity",
        &subject,
        worst_hessian,
        100.0 * h * h,
        worst_hessian < 100.0 * h * h,
    );
    table.row(
        "covariance-min-eigenvalue",
        &subject,
        worst_eigen,
        -1e-9,
        worst_eigen > -1e-9,
    );
    table.row(
        "energy-shift-invariance",
        &subject,
        worst_shift,
        1e-12,
        worst_shift < 1e-12,
    );

    // Exact reservoir counting against brute-force enumeration.
    let mut worst_reservoir = 0.0f64;
    for sites in 1..=4u64 {
        for total_energy in 0..=8u64 {
            let model = ReservoirModel {
                system_states: vec![
                    Microstate::new(vec![0], 0.0),
                    Microstate::new(vec![1], 1.0),
                    Microstate::new(vec![2], 3.0),
                ],
                reservoir_sites: sites,
                total_energy,
                total_particles: None,
            };
            let fast = reservoir_probabilities(&model)?;
            let slow = enumerate_reservoir_probabilities(&model)?;
            for (a, b) in fast.iter().zip(&slow) {
                worst_reservoir = worst_reservoir.max((a - b).abs());
            }
        }
    }
    table.row(
        "reservoir-exact-counting",
        "sites<=4 total_energy<=8",
        worst_reservoir,
        1e-13,
        worst_reservoir < 1e-13,
    );

    // Boltzmann limit of the counting probabilities.
    let states = vec![Microstate::new(vec![0], 0.0), Microstate::new(vec![0], 1.0)];
    let reference = EnsembleSpec {
        beta: 1.0,
        potentials: vec![0.0],
        microstates: states.clone(),
    };
    let models: Vec<ReservoirModel> = [8u64, 16, 32, 64, 128]
        .iter()
        .map(|&m| ReservoirModel {
            system_states: states.clone(),
            reservoir_sites: m,
            total_energy: 2 * m,
            total_particles: None,
        })
        .collect();
    let limit = boltzmann_limit_check(&models, &reference)?;
    let final_tv = limit.entries.last().map_or(f64::INFINITY, |e| e.tv_distance);
    table.row(
        "boltzmann-limit-monotone",
        "M in {8..128}, E_tot = 2M",
        final_tv,
        1e-3,
        limit.is_strictly_decreasing() && final_tv < 1e-3,
    );

    for path in &options.ensemble_files {
        let spec = load_ensemble(path)?;
        let name = path.display().to_string();
        let p = microstate_probabilities(&spec)?;
        let norm_dev = (p.iter().sum::<f64>() - 1.0).abs();
        table.row("normalization", &name, norm_dev, 1e-12, norm_dev < 1e-12);

        let analytic = mean_counts(&spec)?;
        let fd = finite_difference_means(&spec, h)?;
        let mean_dev = analytic
            .iter()
            .zip(&fd)
            .map(|(a, f)| (a - f).abs())
            .fold(0.0f64, f64::max);
        table.row(
            "mean-derivative-identity",
            &name,
            mean_dev,
            10.0 * h * h,
            mean_dev < 10.0 * h * h,
        );

        let report = count_moments_with_step(&spec, h)?;
        let hessian_dev = report.max_identity_deviation(spec.beta);
        table.row(
            "hessian-covariance-identity",
            &name,
            hessian_dev,
            100.0 * h * h,
            hessian_dev < 100.0 * h * h,
        );
        let min_eigen = report.min_covariance_eigenvalue();
        table.row("covariance-min-eigenvalue", &name, min_eigen, -1e-9, min_eigen > -1e-9);
        print!("{}", report.to_tsv());
    }

    for path in &options.reservoir_files {
        let model = load_reservoir(path)?;
        let name = path.display().to_string();
        let p = reservoir_probabilities(&model)?;
        let norm_dev = (p.iter().sum::<f64>() - 1.0).abs();
        table.row("normalization", &name, norm_dev, 1e-12, norm_dev < 1e-12);
        if model.reservoir_sites <= 4 && model.total_energy <= 8 {
            let slow = enumerate_reservoir_probabilities(&model)?;
            let dev = p
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            table.row("reservoir-exact-counting", &name, dev, 1e-13, dev < 1e-13);
        }
        for (i, value) in p.iter().enumerate() {
            println!("probability\t{name}\t{i}\t{value}");
        }
    }

    Ok(table.failures == 0)
}

/// Random small ensemble: up to 4 species, up to 50 states, counts 0..=2,
/// potentials in [-2, 2], beta in [0.1, 5]. Energies are recentred so ln Z
/// sits near zero, which keeps the difference quotients well conditioned;
/// moments and probabilities are shift-invariant.
fn random_ensemble(rng: &mut ChaCha8Rng) -> EnsembleSpec {
    let species = rng.gen_range(1..=4usize);
    let states = rng.gen_range(1..=50usize);
    let mut spec = EnsembleSpec {
        beta: rng.gen_range(0.1..=5.0),
        potentials: (0..species).map(|_| rng.gen_range(-2.0..=2.0)).collect(),
        microstates: (0..states)
            .map(|_| {
                Microstate::new(
                    (0..species).map(|_| rng.gen_range(0..=2u64)).collect(),
                    rng.gen_range(-2.0..=2.0),
                )
            })
            .collect(),
    };
    let log_z = log_partition(&spec).expect("generated spec is valid");
    for state in &mut spec.microstates {
        state.energy += log_z / spec.beta;
    }
    spec
}
