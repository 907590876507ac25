//! Minimal tunneling paths between two degenerate minima and the
//! lowest-order amplitude `g = Σ_paths Δ^L / Π (E_l − E₀)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{hamming_distance, IsingProblem, SpinConfiguration};
use crate::scalar::Real;

/// Exhaustive enumeration cap on the Hamming distance.
pub const MAX_PATH_LENGTH: usize = 12;

/// A minimal path from |u⟩ to |d⟩: L+1 states, consecutive at Hamming
/// distance 1, each differing bit flipped exactly once.
#[derive(Debug, Clone)]
pub struct TunnelingPath {
    states: Vec<SpinConfiguration>,
    energies: Vec<Real>,
    flip_order: Vec<usize>,
}

impl TunnelingPath {
    pub fn states(&self) -> &[SpinConfiguration] {
        &self.states
    }

    /// Classical energies E_l per state (E_0 first, E_L last).
    pub fn energies(&self) -> &[Real] {
        &self.energies
    }

    /// Spin indices in flip order.
    pub fn flip_order(&self) -> &[usize] {
        &self.flip_order
    }

    pub fn len(&self) -> usize {
        self.flip_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flip_order.is_empty()
    }

    /// Maximum interior barrier E_l − E₀ along the path.
    pub fn barrier(&self) -> Real {
        let e0 = self.energies[0];
        self.energies[1..self.energies.len() - 1]
            .iter()
            .fold(0.0, |m, &e| m.max(e - e0))
    }

    /// Per-path lowest-order amplitude g₁ = Δ^L / Π_{l=1}^{L−1} (E_l − E₀).
    pub fn amplitude(&self, delta: Real) -> Real {
        let e0 = self.energies[0];
        let l = self.flip_order.len();
        let mut g = delta.powi(l as i32);
        for &e in &self.energies[1..l] {
            g /= e - e0;
        }
        g
    }
}

struct Enumerator<'a> {
    problem: &'a IsingProblem<Real>,
    bits: Vec<usize>,
    e0: Real,
    ceiling: Real,
    tol: Real,
    paths: Vec<TunnelingPath>,
}

impl Enumerator<'_> {
    fn dfs(
        &mut self,
        config: &mut SpinConfiguration,
        energy: Real,
        used: &mut Vec<bool>,
        states: &mut Vec<SpinConfiguration>,
        energies: &mut Vec<Real>,
        order: &mut Vec<usize>,
    ) -> Result<()> {
        if order.len() == self.bits.len() {
            self.paths.push(TunnelingPath {
                states: states.clone(),
                energies: energies.clone(),
                flip_order: order.clone(),
            });
            return Ok(());
        }
        for bi in 0..self.bits.len() {
            if used[bi] {
                continue;
            }
            let spin = self.bits[bi];
            let de = self.problem.energy_delta(config, spin)?;
            let e = energy + de;
            let interior = order.len() + 1 < self.bits.len();
            if interior {
                if (e - self.e0).abs() <= self.tol {
                    return Err(Error::DegeneratePath(format!(
                        "interior state at flip sequence {:?}+{spin} is degenerate with E₀",
                        order
                    )));
                }
                if e < self.e0 || e > self.ceiling + self.tol {
                    continue;
                }
            }
            used[bi] = true;
            config.flip_in_place(spin);
            states.push(config.clone());
            energies.push(e);
            order.push(spin);
            self.dfs(config, e, used, states, energies, order)?;
            order.pop();
            energies.pop();
            states.pop();
            config.flip_in_place(spin);
            used[bi] = false;
        }
        Ok(())
    }
}

fn differing_bits(u: &SpinConfiguration, d: &SpinConfiguration) -> Vec<usize> {
    u.spins()
        .iter()
        .zip(d.spins())
        .enumerate()
        .filter_map(|(i, (a, b))| (a != b).then_some(i))
        .collect()
}

fn check_wells(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> Result<(Real, usize)> {
    let eu = problem.classical_energy(u)?;
    let ed = problem.classical_energy(d)?;
    let tol = 1e-9 * problem.energy_scale();
    if (eu - ed).abs() > tol {
        return Err(Error::contract(
            "u and d must be degenerate classical minima",
        ));
    }
    let l = hamming_distance(u, d)?;
    if l == 0 {
        return Err(Error::contract("u and d must differ"));
    }
    if l > MAX_PATH_LENGTH {
        return Err(Error::capability(format!(
            "path enumeration capped at Hamming distance {MAX_PATH_LENGTH}, got {l}"
        )));
    }
    Ok((eu, l))
}

/// Lowest possible barrier over all minimal paths (subset dynamic program).
pub fn minimax_barrier(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> Result<Real> {
    let (e0, _) = check_wells(problem, u, d)?;
    let bits = differing_bits(u, d);
    let l = bits.len();
    // best[mask] = minimal over orderings of the max interior energy after
    // flipping exactly the bits in `mask`.
    let mut best = vec![Real::INFINITY; 1 << l];
    let mut energy_of = vec![0.0; 1 << l];
    for mask in 0u32..(1 << l) as u32 {
        let mut c = u.clone();
        for (bi, &spin) in bits.iter().enumerate() {
            if mask >> bi & 1 == 1 {
                c.flip_in_place(spin);
            }
        }
        energy_of[mask as usize] = problem.classical_energy(&c)?;
    }
    best[0] = 0.0;
    for mask in 0u32..(1 << l) as u32 {
        let m = mask as usize;
        if best[m].is_infinite() {
            continue;
        }
        for bi in 0..l {
            if mask >> bi & 1 == 1 {
                continue;
            }
            let next = m | (1 << bi);
            let peak = if next + 1 == 1 << l {
                best[m] // final state is not interior
            } else {
                best[m].max(energy_of[next] - e0)
            };
            if peak < best[next] {
                best[next] = peak;
            }
        }
    }
    Ok(best[(1 << l) - 1])
}

/// All minimal paths from u to d whose interior energies are strictly above
/// E₀ and at most `ceiling` above it (`None` → unrestricted).
/// Errors if any candidate interior state is degenerate with E₀.
pub fn enumerate_minimal_paths(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    ceiling: Option<Real>,
) -> Result<Vec<TunnelingPath>> {
    let (e0, _) = check_wells(problem, u, d)?;
    let bits = differing_bits(u, d);
    let tol = 1e-9 * problem.energy_scale();
    let mut en = Enumerator {
        problem,
        bits,
        e0,
        ceiling: ceiling.map_or(Real::INFINITY, |c| e0 + c),
        tol,
        paths: Vec::new(),
    };
    let mut config = u.clone();
    let mut used = vec![false; en.bits.len()];
    let mut states = vec![u.clone()];
    let mut energies = vec![e0];
    let mut order = Vec::new();
    en.dfs(&mut config, e0, &mut used, &mut states, &mut energies, &mut order)?;
    Ok(en.paths)
}

/// Number of equivalence classes of dominant (minimax-barrier) paths, where
/// two paths are equivalent iff one deforms into the other by swapping
/// adjacent flips without leaving the dominant low-energy subspace. This is
/// the operational count of homotopy-inequivalent tunneling channels:
/// 2 for the frustrated ring, 2^K for the shamrock, 1 for the uniform
/// ferromagnet.
pub fn path_class_count(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> Result<usize> {
    let barrier = minimax_barrier(problem, u, d)?;
    let tol = 1e-9 * problem.energy_scale();
    let paths = enumerate_minimal_paths(problem, u, d, Some(barrier + tol))?;
    let e0 = problem.classical_energy(u)?;
    let ceiling = e0 + barrier + tol;

    let index: HashMap<&[usize], usize> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (p.flip_order(), i))
        .collect();
    let mut parent: Vec<usize> = (0..paths.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, p) in paths.iter().enumerate() {
        let l = p.len();
        for t in 0..l - 1 {
            // Swap flips t and t+1; only the intermediate state at t+1 changes.
            let mut swapped = p.flip_order().to_vec();
            swapped.swap(t, t + 1);
            // New intermediate = state t with flip (t+1 of the new order).
            let mid = p.states()[t].flipped(swapped[t]);
            let e = problem.classical_energy(&mid)?;
            if e <= e0 + tol || e > ceiling {
                continue;
            }
            if let Some(&j) = index.get(swapped.as_slice()) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..paths.len())
        .map(|i| find(&mut parent, i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(roots.len())
}

/// Count of homotopy-inequivalent tunneling channels between the two
/// degenerate minima (alias for [`path_class_count`]).
pub fn tunneling_path_count(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> Result<usize> {
    path_class_count(problem, u, d)
}

/// Lowest-order tunneling amplitude: sum of per-path contributions over all
/// admissible minimal paths (exhaustive enumeration, no energy ceiling).
pub fn g_lowest_order(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> Result<Real> {
    let paths = enumerate_minimal_paths(problem, u, d, None)?;
    let delta = problem.transverse_field();
    // Fixed summation order (enumeration order) for reproducibility.
    Ok(paths.iter().map(|p| p.amplitude(delta)).sum())
}

/// Z₀, Z_B and their ratio to lowest order: Z₀ = e^{−βE₀},
/// Z_B = Z₀ β² g², ratio = β²g².
#[derive(Debug, Clone, Copy)]
pub struct ZbSplit {
    pub z0: Real,
    pub zb: Real,
    pub ratio: Real,
}

pub fn z0_zb_lowest_order(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    beta: Real,
) -> Result<ZbSplit> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::contract("beta must be > 0"));
    }
    let g = g_lowest_order(problem, u, d)?;
    let e0 = problem.classical_energy(u)?;
    let z0 = (-beta * e0).exp();
    let ratio = beta * beta * g * g;
    Ok(ZbSplit {
        z0,
        zb: z0 * ratio,
        ratio,
    })
}

/// Lowest-order weight e^{−F} of the round-trip loop assembled from an
/// ordered pair of minimal paths: β² Δ^{2L} e^{−βE₀} / (Π Π).
pub fn round_trip_weight_lowest_order(
    path_out: &TunnelingPath,
    path_back: &TunnelingPath,
    delta: Real,
    beta: Real,
) -> Real {
    let e0 = path_out.energies()[0];
    beta * beta * path_out.amplitude(delta) * path_back.amplitude(delta) * (-beta * e0).exp()
}
