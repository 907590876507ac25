//! Closed worldline loops and their free energies.
//!
//! A loop visiting the cyclic state sequence s₀ → s₁ → … → s_{n−1} → s₀
//! (one spin flip per step) has weight
//! `e^{−F} = (βΔ)^n · I_n / w`, where I_n is the simplex integral over the
//! n segment energies and w corrects for rotational overcounting when the
//! sequence repeats with a period shorter than n.

use crate::error::{Error, Result};
use crate::model::{hamming_distance, IsingProblem, SpinConfiguration};
use crate::perturbation::divdiff::divided_difference_exp_scaled;
use crate::scalar::Real;

/// A validated closed loop: cyclically adjacent states at Hamming distance 1
/// with their classical energies. A single state is the trivial (flipless)
/// loop.
#[derive(Debug, Clone)]
pub struct LoopRecord {
    states: Vec<SpinConfiguration>,
    energies: Vec<Real>,
}

impl LoopRecord {
    pub fn new(problem: &IsingProblem<Real>, states: Vec<SpinConfiguration>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::contract("LoopRecord: empty state sequence"));
        }
        if states.len() > 1 {
            for i in 0..states.len() {
                let j = (i + 1) % states.len();
                if hamming_distance(&states[i], &states[j])? != 1 {
                    return Err(Error::contract(format!(
                        "LoopRecord: states {i} and {j} are not one flip apart"
                    )));
                }
            }
        }
        let energies = states
            .iter()
            .map(|s| problem.classical_energy(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(LoopRecord { states, energies })
    }

    /// Out-and-back loop along an open walk s₀ … s_k: visits the walk
    /// forward then retraces it, for 2k flips total.
    pub fn out_and_back(
        problem: &IsingProblem<Real>,
        walk: &[SpinConfiguration],
    ) -> Result<Self> {
        if walk.len() < 2 {
            return Err(Error::contract("out_and_back: walk needs ≥ 2 states"));
        }
        let mut states = walk.to_vec();
        states.extend(walk[1..walk.len() - 1].iter().rev().cloned());
        Self::new(problem, states)
    }

    pub fn states(&self) -> &[SpinConfiguration] {
        &self.states
    }

    pub fn energies(&self) -> &[Real] {
        &self.energies
    }

    /// Number of flips (0 for the trivial loop).
    pub fn flips(&self) -> usize {
        if self.states.len() == 1 {
            0
        } else {
            self.states.len()
        }
    }
}

/// Rotational symmetry factor w = n / (smallest cyclic period of the state
/// sequence); 1 for the trivial loop and for aperiodic loops.
pub fn loop_symmetry_factor(rec: &LoopRecord) -> usize {
    let n = rec.states.len();
    if n == 1 {
        return 1;
    }
    for p in 1..n {
        if !n.is_multiple_of(p) {
            continue;
        }
        if (0..n).all(|i| rec.states[i] == rec.states[(i + p) % n]) {
            return n / p;
        }
    }
    1
}

/// ln of the loop weight, computed entirely in log space so it stays finite
/// even when e^{−βE₀} alone would overflow.
pub fn loop_log_weight(rec: &LoopRecord, beta: Real, delta: Real) -> Result<Real> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::contract("loop_log_weight: β must be > 0"));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::contract("loop_log_weight: Δ must be ≥ 0"));
    }
    let n = rec.flips();
    let nodes: Vec<(Real, usize)> = rec.energies.iter().map(|&e| (e, 1)).collect();
    let (mantissa, log_factor) = divided_difference_exp_scaled(&nodes, beta)?;
    if mantissa <= 0.0 {
        return Err(Error::Numerical {
            what: "loop_log_weight: non-positive simplex integral".into(),
            residual: mantissa,
        });
    }
    let w = loop_symmetry_factor(rec) as Real;
    Ok(n as Real * (beta * delta).ln() + mantissa.ln() + log_factor - w.ln())
}

/// Loop free energy F, with e^{−F} the loop weight: F = −[loop_log_weight].
pub fn loop_free_energy(rec: &LoopRecord, beta: Real, delta: Real) -> Result<Real> {
    Ok(-loop_log_weight(rec, beta, delta)?)
}
