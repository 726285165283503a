//! Toy system-plus-reservoir model with exact combinatorial counting.
//!
//! The reservoir is a set of `M` distinguishable sites, each holding any
//! number of energy quanta (and, when particle exchange is enabled, any
//! number of particles). The number of reservoir microstates that leave `R`
//! quanta for the reservoir is the composition count `C(R + M - 1, M - 1)`,
//! evaluated in exact big-integer arithmetic; probabilities are formed from
//! these counts and only converted to floating point at normalization.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{microstate_probabilities, EnsembleSpec, Microstate};
use crate::{Error, Result};

/// System states plus the conserved totals shared with the reservoir.
///
/// Every system state has exactly one species count and an integer-valued
/// non-negative energy. States whose energy (or count) exceeds the conserved
/// total are legal but have zero compatible reservoir states.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirModel {
    pub system_states: Vec<Microstate>,
    pub reservoir_sites: u64,
    pub total_energy: u64,
    pub total_particles: Option<u64>,
}

impl ReservoirModel {
    pub fn new(
        system_states: Vec<Microstate>,
        reservoir_sites: u64,
        total_energy: u64,
        total_particles: Option<u64>,
    ) -> Result<Self> {
        let model = ReservoirModel {
            system_states,
            reservoir_sites,
            total_energy,
            total_particles,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reservoir_sites == 0 {
            return Err(Error::InvalidInput(
                "reservoir must have at least one site".into(),
            ));
        }
        if self.system_states.is_empty() {
            return Err(Error::InvalidInput(
                "reservoir model must list at least one system state".into(),
            ));
        }
        for (i, state) in self.system_states.iter().enumerate() {
            if state.counts.len() != 1 {
                return Err(Error::InvalidInput(format!(
                    "system state {i} must have exactly one species count, got {}",
                    state.counts.len()
                )));
            }
            if !state.energy.is_finite() || state.energy < 0.0 || state.energy.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "system state {i} energy must be a non-negative integer, got {}",
                    state.energy
                )));
            }
        }
        Ok(())
    }

    fn state_quanta(&self, index: usize) -> (u64, u64) {
        let state = &self.system_states[index];
        (state.counts[0], state.energy as u64)
    }
}

/// Number of compatible reservoir microstates for each system state, as a
/// normalized probability vector.
pub fn reservoir_probabilities(model: &ReservoirModel) -> Result<Vec<f64>> {
    model.validate()?;
    let counts = compatibility_counts(model);
    let total: BigUint = counts.iter().sum();
    if total.is_zero() {
        return Err(Error::InvalidInput(
            "no system state is compatible with the conserved totals".into(),
        ));
    }
    Ok(counts.iter().map(|c| ratio_to_f64(c, &total)).collect())
}

fn compatibility_counts(model: &ReservoirModel) -> Vec<BigUint> {
    let m = model.reservoir_sites;
    (0..model.system_states.len())
        .map(|i| {
            let (particles, energy) = model.state_quanta(i);
            if energy > model.total_energy {
                return BigUint::zero();
            }
            let mut count = compositions(model.total_energy - energy, m);
            if let Some(total_particles) = model.total_particles {
                if particles > total_particles {
                    return BigUint::zero();
                }
                count *= compositions(total_particles - particles, m);
            }
            count
        })
        .collect()
}

/// Ways to distribute `units` indistinguishable quanta over `sites`
/// distinguishable sites: `C(units + sites - 1, sites - 1)`.
fn compositions(units: u64, sites: u64) -> BigUint {
    binomial(units + sites - 1, sites - 1)
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut result = BigUint::one();
    for i in 0..k {
        result = result * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    result
}

/// Convert `numer / denom` to `f64` without overflowing, assuming
/// `numer <= denom`. Both operands are truncated to the same power of two
/// before division, which loses nothing at `f64` precision.
fn ratio_to_f64(numer: &BigUint, denom: &BigUint) -> f64 {
    if numer.is_zero() {
        return 0.0;
    }
    let shift = denom.bits().saturating_sub(512);
    let n = (numer >> shift).to_f64().unwrap_or(f64::MAX);
    let d = (denom >> shift).to_f64().unwrap_or(f64::MAX);
    n / d
}

/// Brute-force reference: enumerates every assignment of quanta to sites one
/// by one instead of using the composition formula. Exponential in the model
/// size, so inputs are capped; intended as an independent cross-check on
/// [`reservoir_probabilities`] for small models.
pub fn enumerate_reservoir_probabilities(model: &ReservoirModel) -> Result<Vec<f64>> {
    model.validate()?;
    if model.reservoir_sites > 8 || model.total_energy > 32 || model.total_particles.unwrap_or(0) > 32
    {
        return Err(Error::InvalidInput(
            "enumeration reference is limited to sites <= 8 and totals <= 32".into(),
        ));
    }

    fn assignments(units: u64, sites: u64) -> u128 {
        if sites == 0 {
            return u128::from(units == 0);
        }
        (0..=units).map(|u| assignments(units - u, sites - 1)).sum()
    }

    let m = model.reservoir_sites;
    let counts: Vec<u128> = (0..model.system_states.len())
        .map(|i| {
            let (particles, energy) = model.state_quanta(i);
            if energy > model.total_energy {
                return 0;
            }
            let mut count = assignments(model.total_energy - energy, m);
            if let Some(total_particles) = model.total_particles {
                if particles > total_particles {
                    return 0;
                }
                count *= assignments(total_particles - particles, m);
            }
            count
        })
        .collect();
    let total: u128 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput(
            "no system state is compatible with the conserved totals".into(),
        ));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// One reservoir size in a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannLimitEntry {
    pub sites: u64,
    pub total_energy: u64,
    /// Fitted inverse temperature `ln(1 + M / E_tot)`.
    pub beta: f64,
    /// Total-variation distance between the counting probabilities and the
    /// fitted exponential-form probabilities.
    pub tv_distance: f64,
}

/// Convergence report produced by [`boltzmann_limit_check`].
#[derive(Debug, Clone)]
pub struct BoltzmannLimitReport {
    pub entries: Vec<BoltzmannLimitEntry>,
}

impl BoltzmannLimitReport {
    pub fn tv_distances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.tv_distance).collect()
    }

    /// True when the distances never increase from `skip` onward.
    pub fn is_monotone_nonincreasing(&self, skip: usize) -> bool {
        self.entries
            .windows(2)
            .skip(skip)
            .all(|w| w[1].tv_distance <= w[0].tv_distance)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].tv_distance < w[0].tv_distance)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sites\ttotal_energy\tbeta\ttv_distance\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.sites, e.total_energy, e.beta, e.tv_distance
            ));
        }
        out
    }
}

/// Compares the counting probabilities of each model in `models` against the
/// exponential form with `beta` fitted as `ln(1 + M / E_tot)`, using the
/// reference ensemble's microstates.
///
/// Every model must list the same system states as the reference (same counts
/// and energies, in order); the reference's own `beta` is ignored.
pub fn boltzmann_limit_check(
    models: &[ReservoirModel],
    reference: &EnsembleSpec,
) -> Result<BoltzmannLimitReport> {
    reference.validate()?;
    if reference.species_count() != 1 {
        return Err(Error::InvalidInput(
            "reference ensemble must have exactly one species".into(),
        ));
    }
    if models.is_empty() {
        return Err(Error::InvalidInput(
            "at least one reservoir model is required".into(),
        ));
    }

    let mut entries = Vec::with_capacity(models.len());
    for model in models {
        model.validate()?;
        if model.total_energy == 0 {
            return Err(Error::InvalidInput(
                "total_energy must be positive to fit a temperature".into(),
            ));
        }
        if model.system_states.len() != reference.microstates.len() {
            return Err(Error::InvalidInput(format!(
                "model lists {} system states but the reference has {}",
                model.system_states.len(),
                reference.microstates.len()
            )));
        }
        for (i, (got, want)) in model
            .system_states
            .iter()
            .zip(&reference.microstates)
            .enumerate()
        {
            if got.counts != want.counts || (got.energy - want.energy).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "system state {i} differs between model and reference"
                )));
            }
        }

        let beta = (1.0 + model.reservoir_sites as f64 / model.total_energy as f64).ln();
        let fitted = EnsembleSpec {
            beta,
            potentials: reference.potentials.clone(),
            microstates: reference.microstates.clone(),
        };
        let counting = reservoir_probabilities(model)?;
        let exponential = microstate_probabilities(&fitted)?;
        let tv_distance = 0.5
            * counting
                .iter()
                .zip(&exponential)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>();
        entries.push(BoltzmannLimitEntry {
            sites: model.reservoir_sites,
            total_energy: model.total_energy,
            beta,
            tv_distance,
        });
    }
    Ok(BoltzmannLimitReport { entries })
}
