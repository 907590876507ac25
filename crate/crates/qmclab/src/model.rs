//! Ising problem definitions, energy evaluation and the three benchmark
//! instance families: uniform ferromagnet, frustrated ring and shamrock.
//!
//! Conventions: the classical energy is
//! `B · (Σ_i h_i s_i + Σ_{i<j} J_ij s_i s_j)` with each unordered pair
//! counted once, and the transverse field couples bit-flip neighbours with
//! weight `−Δ`. All quantities are dimensionless.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// A classical computational-basis state: length-N sequence of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::contract("spins must be ±1"));
        }
        Ok(SpinConfiguration { spins })
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfiguration { spins: vec![1; n] }
    }

    pub fn all_down(n: usize) -> Self {
        SpinConfiguration { spins: vec![-1; n] }
    }

    /// Decode from a bitmask where bit i set means spin i is down (−1).
    pub fn from_mask(mask: u32, n: usize) -> Self {
        let spins = (0..n)
            .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
            .collect();
        SpinConfiguration { spins }
    }

    /// Bitmask with bit i set iff spin i is down.
    pub fn to_mask(&self) -> u32 {
        self.spins
            .iter()
            .enumerate()
            .fold(0u32, |m, (i, &s)| if s < 0 { m | 1 << i } else { m })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Copy with spin `i` flipped.
    pub fn flipped(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.spins[i] = -s.spins[i];
        s
    }

    pub fn flip_in_place(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    /// Global Z₂ flip of all spins.
    pub fn global_flip(&self) -> Self {
        SpinConfiguration {
            spins: self.spins.iter().map(|&s| -s).collect(),
        }
    }
}

/// A 2-local Ising problem at a fixed annealing point: fields `h_i`, pair
/// couplings `J_ij` (unordered, single-counted), overall classical scale
/// `B > 0` and transverse field `Δ ≥ 0`.
#[derive(Debug, Clone)]
pub struct IsingProblem<F = Real> {
    n_spins: usize,
    fields: Vec<F>,
    couplings: Vec<(usize, usize, F)>,
    adjacency: Vec<Vec<(usize, F)>>,
    classical_scale: F,
    transverse_field: F,
}

impl<F: Scalar> IsingProblem<F> {
    /// Build a problem, validating all type invariants.
    ///
    /// `fields` maps spin index to h_i (absent spins get h = 0); `couplings`
    /// maps unordered pairs {i, j}, i ≠ j, to J_ij, each pair at most once.
    pub fn new(
        n_spins: usize,
        fields: &BTreeMap<usize, F>,
        couplings: &BTreeMap<(usize, usize), F>,
        classical_scale: F,
        transverse_field: F,
    ) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::contract("n_spins must be positive"));
        }
        if !(classical_scale.is_finite() && classical_scale > F::zero()) {
            return Err(Error::contract("classical scale B must be finite and > 0"));
        }
        if !(transverse_field.is_finite() && transverse_field >= F::zero()) {
            return Err(Error::contract("transverse field Δ must be finite and ≥ 0"));
        }
        let mut h = vec![F::zero(); n_spins];
        for (&i, &v) in fields {
            if i >= n_spins {
                return Err(Error::contract(format!("field index {i} out of range")));
            }
            if !v.is_finite() {
                return Err(Error::contract("field values must be finite"));
            }
            h[i] = v;
        }
        let mut normalized: BTreeMap<(usize, usize), F> = BTreeMap::new();
        for (&(i, j), &v) in couplings {
            if i >= n_spins || j >= n_spins {
                return Err(Error::contract(format!("coupling ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::contract("self-couplings are not allowed"));
            }
            if !v.is_finite() {
                return Err(Error::contract("coupling values must be finite"));
            }
            let key = (i.min(j), i.max(j));
            if normalized.insert(key, v).is_some() {
                return Err(Error::contract(format!(
                    "pair {{{},{}}} appears more than once",
                    key.0, key.1
                )));
            }
        }
        let couplings: Vec<(usize, usize, F)> =
            normalized.iter().map(|(&(i, j), &v)| (i, j, v)).collect();
        let mut adjacency = vec![Vec::new(); n_spins];
        for &(i, j, v) in &couplings {
            adjacency[i].push((j, v));
            adjacency[j].push((i, v));
        }
        Ok(IsingProblem {
            n_spins,
            fields: h,
            couplings,
            adjacency,
            classical_scale,
            transverse_field,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn field(&self, i: usize) -> F {
        self.fields[i]
    }

    /// Couplings as (i, j, J_ij) with i < j, sorted.
    pub fn couplings(&self) -> &[(usize, usize, F)] {
        &self.couplings
    }

    /// Neighbours of spin i with their couplings.
    pub fn neighbours(&self, i: usize) -> &[(usize, F)] {
        &self.adjacency[i]
    }

    pub fn classical_scale(&self) -> F {
        self.classical_scale
    }

    pub fn transverse_field(&self) -> F {
        self.transverse_field
    }

    /// Copy of this problem with a different transverse field.
    pub fn with_transverse_field(&self, delta: F) -> Result<Self> {
        if !(delta.is_finite() && delta >= F::zero()) {
            return Err(Error::contract("transverse field Δ must be finite and ≥ 0"));
        }
        let mut p = self.clone();
        p.transverse_field = delta;
        Ok(p)
    }

    fn check_len(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.n_spins {
            return Err(Error::contract(format!(
                "configuration length {} does not match n_spins {}",
                config.len(),
                self.n_spins
            )));
        }
        Ok(())
    }

    /// Classical energy `B · (Σ h_i s_i + Σ_{i<j} J_ij s_i s_j)`.
    pub fn classical_energy(&self, config: &SpinConfiguration) -> Result<F> {
        self.check_len(config)?;
        let mut e = F::zero();
        for (i, &h) in self.fields.iter().enumerate() {
            e = e + h * F::from_i8(config.spin(i)).unwrap();
        }
        for &(i, j, v) in &self.couplings {
            e = e + v * F::from_i8(config.spin(i) * config.spin(j)).unwrap();
        }
        Ok(self.classical_scale * e)
    }

    /// Energy change from flipping spin `i`, in time proportional to the
    /// degree of `i`.
    pub fn energy_delta(&self, config: &SpinConfiguration, i: usize) -> Result<F> {
        self.check_len(config)?;
        if i >= self.n_spins {
            return Err(Error::contract(format!("spin index {i} out of range")));
        }
        let si = F::from_i8(config.spin(i)).unwrap();
        let mut local = self.fields[i] * si;
        for &(j, v) in &self.adjacency[i] {
            local = local + v * si * F::from_i8(config.spin(j)).unwrap();
        }
        // Flipping s_i negates every term containing it.
        Ok(-(F::from_f64(2.0).unwrap() * self.classical_scale * local))
    }

    /// Classical energy of the basis state encoded by `mask`
    /// (bit set = spin down). Used by the spectral solvers.
    pub fn classical_energy_of_mask(&self, mask: u32) -> F {
        let spin = |i: usize| {
            if mask >> i & 1 == 1 {
                -F::one()
            } else {
                F::one()
            }
        };
        let mut e = F::zero();
        for (i, &h) in self.fields.iter().enumerate() {
            e = e + h * spin(i);
        }
        for &(i, j, v) in &self.couplings {
            e = e + v * spin(i) * spin(j);
        }
        self.classical_scale * e
    }

    /// All configurations attaining the minimum classical energy, in
    /// lexicographic order (all-up first). Exhaustive; N ≤ 24.
    pub fn classical_minima(&self) -> Result<Vec<SpinConfiguration>> {
        if self.n_spins > 24 {
            return Err(Error::capability(format!(
                "classical_minima enumerates 2^N states; N = {} > 24",
                self.n_spins
            )));
        }
        let n = self.n_spins;
        let mut best = F::infinity();
        let mut minima: Vec<u32> = Vec::new();
        // Degeneracy tolerance relative to the energy scale of the problem.
        let scale = self.energy_scale();
        let tol = F::from_f64_lit(1e-9) * scale;
        for mask in 0u32..(1u32 << n) {
            let e = self.classical_energy_of_mask(mask);
            if e < best - tol {
                best = e;
                minima.clear();
                minima.push(mask);
            } else if e <= best + tol {
                if e < best {
                    best = e;
                }
                minima.push(mask);
            }
        }
        minima.retain(|&m| self.classical_energy_of_mask(m) <= best + tol);
        minima.sort_unstable();
        Ok(minima
            .into_iter()
            .map(|m| SpinConfiguration::from_mask(m, n))
            .collect())
    }

    /// Rough magnitude of the classical energy terms, used for tolerances.
    pub fn energy_scale(&self) -> F {
        let mut s = F::one();
        for &h in &self.fields {
            s = s + h.abs();
        }
        for &(_, _, v) in &self.couplings {
            s = s + v.abs();
        }
        self.classical_scale * s
    }

    /// Serialize to the instance text format (see [`parse_problem`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "N {}", self.n_spins);
        let _ = writeln!(out, "B {}", self.classical_scale);
        let _ = writeln!(out, "Delta {}", self.transverse_field);
        for (i, &h) in self.fields.iter().enumerate() {
            if h != F::zero() {
                let _ = writeln!(out, "h {i} {h}");
            }
        }
        for &(i, j, v) in &self.couplings {
            let _ = writeln!(out, "J {i} {j} {v}");
        }
        out
    }
}

/// Count of differing positions between two equal-length configurations.
pub fn hamming_distance(a: &SpinConfiguration, b: &SpinConfiguration) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::contract("hamming_distance: length mismatch"));
    }
    Ok(a.spins()
        .iter()
        .zip(b.spins())
        .filter(|(x, y)| x != y)
        .count())
}

/// Fully-connected ferromagnet: all N(N−1)/2 pairs coupled with −J, h = 0.
pub fn make_uniform_ferromagnet<F: Scalar>(
    n: usize,
    j: F,
    classical_scale: F,
    transverse_field: F,
) -> Result<IsingProblem<F>> {
    if n < 2 {
        return Err(Error::contract("uniform ferromagnet requires N ≥ 2"));
    }
    if j.is_nan() || j <= F::zero() {
        return Err(Error::contract("J must be positive"));
    }
    let mut couplings = BTreeMap::new();
    for i in 0..n {
        for k in i + 1..n {
            couplings.insert((i, k), -j);
        }
    }
    IsingProblem::new(n, &BTreeMap::new(), &couplings, classical_scale, transverse_field)
}

/// Frustrated ring: ferromagnetic ring couplings −J, except the closing
/// bond {N−1, 0} which is antiferromagnetic with J − ε.
pub fn make_frustrated_ring<F: Scalar>(
    n: usize,
    j: F,
    eps: F,
    classical_scale: F,
    transverse_field: F,
) -> Result<IsingProblem<F>> {
    if n < 3 {
        return Err(Error::contract("frustrated ring requires N ≥ 3"));
    }
    if !(j > F::zero() && eps > F::zero() && eps < j) {
        return Err(Error::contract("frustrated ring requires 0 < ε < J"));
    }
    let mut couplings = BTreeMap::new();
    for i in 0..n - 1 {
        couplings.insert((i, i + 1), -j);
    }
    couplings.insert((0, n - 1), j - eps);
    IsingProblem::new(n, &BTreeMap::new(), &couplings, classical_scale, transverse_field)
}

/// Shamrock: K three-spin frustrated rings sharing a central spin (index 0).
/// Ring r has outer spins 2r+1 and 2r+2; both centre–outer bonds are
/// ferromagnetic (−J) and the outer–outer bond is antiferromagnetic (J − ε),
/// so all-up and all-down are the two degenerate ground states and the
/// dominant tunneling barrier is 2Kε.
pub fn make_shamrock<F: Scalar>(
    k: usize,
    j: F,
    eps: F,
    classical_scale: F,
    transverse_field: F,
) -> Result<IsingProblem<F>> {
    if k < 1 {
        return Err(Error::contract("shamrock requires K ≥ 1"));
    }
    if !(j > F::zero() && eps > F::zero() && eps < j) {
        return Err(Error::contract("shamrock requires 0 < ε < J"));
    }
    let n = 2 * k + 1;
    let mut couplings = BTreeMap::new();
    for r in 0..k {
        let a = 2 * r + 1;
        let b = 2 * r + 2;
        couplings.insert((0, a), -j);
        couplings.insert((0, b), -j);
        couplings.insert((a, b), j - eps);
    }
    IsingProblem::new(n, &BTreeMap::new(), &couplings, classical_scale, transverse_field)
}

/// Parse the instance text format: `#` comments, a header line `N n`, scale
/// lines `B v` and `Delta v`, then `h i v` and `J i j v` lines, 0-based.
/// Round-trips with [`IsingProblem::to_text`].
pub fn parse_problem(text: &str) -> Result<IsingProblem<Real>> {
    let mut n: Option<usize> = None;
    let mut b: Option<Real> = None;
    let mut delta: Option<Real> = None;
    let mut fields: BTreeMap<usize, Real> = BTreeMap::new();
    let mut couplings: BTreeMap<(usize, usize), Real> = BTreeMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        match toks[0] {
            "N" => {
                if toks.len() != 2 {
                    return Err(bad("expected `N n`"));
                }
                n = Some(toks[1].parse().map_err(|_| bad("bad spin count"))?);
            }
            "B" => {
                if toks.len() != 2 {
                    return Err(bad("expected `B value`"));
                }
                b = Some(toks[1].parse().map_err(|_| bad("bad B value"))?);
            }
            "Delta" => {
                if toks.len() != 2 {
                    return Err(bad("expected `Delta value`"));
                }
                delta = Some(toks[1].parse().map_err(|_| bad("bad Delta value"))?);
            }
            "h" => {
                if toks.len() != 3 {
                    return Err(bad("expected `h i value`"));
                }
                let i: usize = toks[1].parse().map_err(|_| bad("bad spin index"))?;
                let v: Real = toks[2].parse().map_err(|_| bad("bad field value"))?;
                if fields.insert(i, v).is_some() {
                    return Err(bad("duplicate field line"));
                }
            }
            "J" => {
                if toks.len() != 4 {
                    return Err(bad("expected `J i j value`"));
                }
                let i: usize = toks[1].parse().map_err(|_| bad("bad spin index"))?;
                let j: usize = toks[2].parse().map_err(|_| bad("bad spin index"))?;
                let v: Real = toks[3].parse().map_err(|_| bad("bad coupling value"))?;
                if couplings.insert((i.min(j), i.max(j)), v).is_some() {
                    return Err(bad("duplicate coupling line"));
                }
            }
            other => {
                return Err(bad(&format!("unknown record `{other}`")));
            }
        }
    }
    let n = n.ok_or(Error::Parse {
        line: 0,
        msg: "missing `N` header".into(),
    })?;
    let b = b.ok_or(Error::Parse {
        line: 0,
        msg: "missing `B` scale line".into(),
    })?;
    let delta = delta.ok_or(Error::Parse {
        line: 0,
        msg: "missing `Delta` scale line".into(),
    })?;
    IsingProblem::new(n, &fields, &couplings, b, delta)
        .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize) -> IsingProblem<Real> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fields = BTreeMap::new();
        let mut couplings = BTreeMap::new();
        for i in 0..n {
            fields.insert(i, rng.gen_range(-1.0..1.0));
            for j in i + 1..n {
                if rng.gen_bool(0.7) {
                    couplings.insert((i, j), rng.gen_range(-2.0..2.0));
                }
            }
        }
        IsingProblem::new(n, &fields, &couplings, 1.0, 0.3).unwrap()
    }

    #[test]
    fn ferromagnet_all_up_energy() {
        let p = make_uniform_ferromagnet(3, 1.0, 1.0, 0.0).unwrap();
        let e = p.classical_energy(&SpinConfiguration::all_up(3)).unwrap();
        assert_eq!(e, -3.0);
        assert_eq!(p.couplings().len(), 3);
        let p2 = make_uniform_ferromagnet(2, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(p2.couplings().len(), 1);
    }

    #[test]
    fn ring_all_up_energy() {
        // Bond-by-bond: (N-1) satisfied FM bonds at -J each, one violated
        // AFM bond at +(J-ε)  →  -(N-1)J + J - ε = -(N-2)J - ε.
        let p = make_frustrated_ring(4, 6.0, 0.2, 1.0, 0.0).unwrap();
        let e = p.classical_energy(&SpinConfiguration::all_up(4)).unwrap();
        assert_relative_eq!(e, -12.2, max_relative = 1e-14);
        let positive: Vec<_> = p.couplings().iter().filter(|&&(_, _, v)| v > 0.0).collect();
        assert_eq!(positive.len(), 1);
        assert_relative_eq!(positive[0].2, 5.8);
    }

    #[test]
    fn global_flip_symmetry_without_fields() {
        let p = make_frustrated_ring(5, 3.0, 0.5, 2.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = SpinConfiguration::from_mask(rng.gen_range(0..32), 5);
            let e1 = p.classical_energy(&c).unwrap();
            let e2 = p.classical_energy(&c.global_flip()).unwrap();
            assert_relative_eq!(e1, e2, max_relative = 1e-14);
        }
    }

    #[test]
    fn energy_delta_matches_brute_force() {
        let p = random_problem(42, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let c = SpinConfiguration::from_mask(rng.gen_range(0..64), 6);
            for i in 0..6 {
                let fast = p.energy_delta(&c, i).unwrap();
                let slow = p.classical_energy(&c.flipped(i)).unwrap()
                    - p.classical_energy(&c).unwrap();
                assert_relative_eq!(fast, slow, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn energy_delta_ring_afm_adjacent() {
        let p = make_frustrated_ring(5, 6.0, 0.2, 1.0, 0.0).unwrap();
        let up = SpinConfiguration::all_up(5);
        // Spins 0 and N-1 touch the antiferromagnetic bond.
        assert_relative_eq!(p.energy_delta(&up, 0).unwrap(), 0.4, epsilon = 1e-12);
        assert_relative_eq!(p.energy_delta(&up, 4).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn energy_delta_isolated_spin() {
        let p = IsingProblem::new(1, &BTreeMap::new(), &BTreeMap::new(), 1.0, 0.0).unwrap();
        let c = SpinConfiguration::all_up(1);
        assert_eq!(p.energy_delta(&c, 0).unwrap(), 0.0);
    }

    #[test]
    fn hamming_basics() {
        let a = SpinConfiguration::all_up(5);
        let b = SpinConfiguration::all_down(5);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 5);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        assert_eq!(hamming_distance(&a, &a.flipped(2)).unwrap(), 1);
        assert!(hamming_distance(&a, &SpinConfiguration::all_up(4)).is_err());
    }

    #[test]
    fn minima_of_benchmark_families() {
        let fm = make_uniform_ferromagnet(5, 1.0, 1.0, 0.0).unwrap();
        let m = fm.classical_minima().unwrap();
        assert_eq!(
            m,
            vec![SpinConfiguration::all_up(5), SpinConfiguration::all_down(5)]
        );

        let ring = make_frustrated_ring(5, 6.0, 0.2, 1.0, 0.0).unwrap();
        let m = ring.classical_minima().unwrap();
        assert_eq!(
            m,
            vec![SpinConfiguration::all_up(5), SpinConfiguration::all_down(5)]
        );

        let sham = make_shamrock(2, 6.0, 0.2, 1.0, 0.0).unwrap();
        let m = sham.classical_minima().unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(
            m,
            vec![SpinConfiguration::all_up(5), SpinConfiguration::all_down(5)]
        );
    }

    #[test]
    fn ring_first_excited_sits_two_eps_above() {
        let p = make_frustrated_ring(4, 6.0, 0.2, 1.0, 0.0).unwrap();
        let e0 = p.classical_energy(&SpinConfiguration::all_up(4)).unwrap();
        let mut above = Real::INFINITY;
        for mask in 0u32..16 {
            let e = p.classical_energy_of_mask(mask);
            if e > e0 + 1e-9 {
                above = above.min(e);
            }
        }
        assert_relative_eq!(above - e0, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn single_spin_with_field_minimum() {
        let mut fields = BTreeMap::new();
        fields.insert(0usize, 1.0);
        let p = IsingProblem::new(1, &fields, &BTreeMap::new(), 1.0, 0.0).unwrap();
        let m = p.classical_minima().unwrap();
        assert_eq!(m, vec![SpinConfiguration::all_down(1)]);
    }

    #[test]
    fn shamrock_structure() {
        let p = make_shamrock(1, 6.0, 0.2, 1.0, 0.0).unwrap();
        assert_eq!(p.n_spins(), 3);
        let neg: Vec<_> = p.couplings().iter().filter(|&&(_, _, v)| v < 0.0).collect();
        let pos: Vec<_> = p.couplings().iter().filter(|&&(_, _, v)| v > 0.0).collect();
        assert_eq!(neg.len(), 2);
        assert_eq!(pos.len(), 1);
        assert_relative_eq!(pos[0].2, 5.8);
    }

    #[test]
    fn shamrock_barrier_along_dominant_path() {
        // Flip one outer spin per ring: each costs +2ε; the peak is 2Kε.
        let k = 3;
        let p = make_shamrock(k, 6.0, 0.2, 1.0, 0.0).unwrap();
        let mut c = SpinConfiguration::all_up(2 * k + 1);
        let e0 = p.classical_energy(&c).unwrap();
        for r in 0..k {
            c.flip_in_place(2 * r + 1);
        }
        let peak = p.classical_energy(&c).unwrap();
        assert_relative_eq!(peak - e0, 2.0 * k as Real * 0.2, epsilon = 1e-12);
        // The central spin then flips with no energy cost.
        assert_relative_eq!(p.energy_delta(&c, 0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn flip_involution_property() {
        let p = random_problem(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let c = SpinConfiguration::from_mask(rng.gen_range(0..32), 5);
            for i in 0..5 {
                let d1 = p.energy_delta(&c, i).unwrap();
                let d2 = p.energy_delta(&c.flipped(i), i).unwrap();
                assert_relative_eq!(d1 + d2, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_uniform_ferromagnet::<Real>(1, 1.0, 1.0, 0.0).is_err());
        assert!(make_frustrated_ring::<Real>(2, 6.0, 0.2, 1.0, 0.0).is_err());
        assert!(make_frustrated_ring::<Real>(4, 6.0, 7.0, 1.0, 0.0).is_err());
        assert!(make_shamrock::<Real>(0, 6.0, 0.2, 1.0, 0.0).is_err());
        assert!(make_shamrock::<Real>(2, 6.0, -0.1, 1.0, 0.0).is_err());
        // B must be positive, Δ nonnegative.
        assert!(IsingProblem::<Real>::new(2, &BTreeMap::new(), &BTreeMap::new(), 0.0, 0.1).is_err());
        assert!(
            IsingProblem::<Real>::new(2, &BTreeMap::new(), &BTreeMap::new(), 1.0, -0.1).is_err()
        );
    }

    #[test]
    fn text_round_trip() {
        let p = make_shamrock(2, 6.0, 0.2, 1.0, 0.5).unwrap();
        let text = p.to_text();
        let q = parse_problem(&text).unwrap();
        assert_eq!(q.to_text(), text);
        assert_eq!(q.n_spins(), p.n_spins());
        assert_eq!(q.couplings(), p.couplings());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_problem("N 2\nB 1\nDelta 0\nQ 0 1 2\n").is_err());
        assert!(parse_problem("B 1\nDelta 0\n").is_err());
        assert!(parse_problem("N 2\nB 1\nDelta 0\nJ 0 5 1\n").is_err());
        assert!(parse_problem("N 2\nB 1\nDelta 0\nJ 0 1 1\nJ 1 0 2\n").is_err());
    }

    proptest! {
        #[test]
        fn generators_satisfy_invariants(n in 3usize..9, jx in 0.5f64..8.0, ex in 0.01f64..0.49) {
            let eps = ex * jx;
            for p in [
                make_uniform_ferromagnet(n, jx, 1.0, 0.3).unwrap(),
                make_frustrated_ring(n, jx, eps, 1.0, 0.3).unwrap(),
                make_shamrock((n - 1) / 2, jx, eps, 1.0, 0.3).unwrap(),
            ] {
                // Each unordered pair appears once and indices are in range.
                let mut seen = std::collections::BTreeSet::new();
                for &(i, j, _) in p.couplings() {
                    prop_assert!(i < j && j < p.n_spins());
                    prop_assert!(seen.insert((i, j)));
                }
            }
        }

        #[test]
        fn frustrated_families_have_two_ferromagnetic_minima(
            n in 3usize..8, jx in 1.0f64..8.0, ex in 0.05f64..0.8
        ) {
            let eps = ex.min(0.9 * jx);
            let ring = make_frustrated_ring(n, jx, eps, 1.0, 0.0).unwrap();
            let m = ring.classical_minima().unwrap();
            prop_assert_eq!(m, vec![SpinConfiguration::all_up(n), SpinConfiguration::all_down(n)]);
        }
    }
}
