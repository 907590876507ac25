//! Continuous-time worldline Monte Carlo for the transverse-field Ising
//! Hamiltonian.
//!
//! A configuration is a periodic worldline on [0, β): a base spin state at
//! τ = 0 plus, per spin, an even number of flip times. Its weight density is
//! Δ^n e^{−∫ E(τ) dτ} with n the total flip count and E the instantaneous
//! classical energy. Local updates: insert a flip pair on a spin, delete a
//! pair, and shift a single flip inside its inter-flip window (a shift
//! sliding across τ = 0 toggles the base spin, which is what lets the base
//! state itself diffuse).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng as _;

use crate::error::{Error, Result};
use crate::model::{IsingProblem, SpinConfiguration};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct QmcParams {
    pub beta: Real,
    pub sweeps: u64,
    pub seed: u64,
    /// Proposal mix (insert, delete, shift); must sum to 1.
    pub move_mix: (f64, f64, f64),
    /// Sweeps between measurements after burn-in.
    pub measure_every: u64,
}

impl Default for QmcParams {
    fn default() -> Self {
        QmcParams {
            beta: 10.0,
            sweeps: 200_000,
            seed: 0,
            move_mix: (0.4, 0.4, 0.2),
            measure_every: 10,
        }
    }
}

impl QmcParams {
    fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::contract("qmc: β must be > 0"));
        }
        let (a, b, c) = self.move_mix;
        if a < 0.0 || b < 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-12 {
            return Err(Error::contract("qmc: move mix must be ≥ 0 and sum to 1"));
        }
        if self.measure_every == 0 {
            return Err(Error::contract("qmc: measure_every must be ≥ 1"));
        }
        Ok(())
    }
}

/// Attempt/accept counters per move type.
#[derive(Debug, Clone, Copy, Default)]
pub struct MoveStats {
    pub insert: (u64, u64),
    pub delete: (u64, u64),
    pub shift: (u64, u64),
}

impl MoveStats {
    pub fn acceptance_rate(&self) -> f64 {
        let att = self.insert.0 + self.delete.0 + self.shift.0;
        let acc = self.insert.1 + self.delete.1 + self.shift.1;
        if att == 0 {
            0.0
        } else {
            acc as f64 / att as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Worldline {
    beta: Real,
    base: SpinConfiguration,
    flips: Vec<Vec<Real>>,
}

pub fn init_worldline(beta: Real, start: &SpinConfiguration) -> Worldline {
    Worldline {
        beta,
        base: start.clone(),
        flips: vec![Vec::new(); start.len()],
    }
}

impl Worldline {
    pub fn beta(&self) -> Real {
        self.beta
    }

    pub fn base(&self) -> &SpinConfiguration {
        &self.base
    }

    pub fn flips(&self, spin: usize) -> &[Real] {
        &self.flips[spin]
    }

    pub fn n_flips(&self) -> usize {
        self.flips.iter().map(Vec::len).sum()
    }

    /// Spin value just after imaginary time τ.
    pub fn spin_at(&self, spin: usize, tau: Real) -> i8 {
        let k = self.flips[spin].partition_point(|&t| t <= tau);
        if k % 2 == 0 {
            self.base.spin(spin)
        } else {
            -self.base.spin(spin)
        }
    }

    pub fn state_at(&self, tau: Real) -> SpinConfiguration {
        let spins = (0..self.base.len())
            .map(|i| self.spin_at(i, tau))
            .collect();
        SpinConfiguration::new(spins).expect("worldline state is well-formed")
    }

    /// All flips as (time, spin), sorted by time.
    fn events(&self) -> Vec<(Real, usize)> {
        let mut ev: Vec<(Real, usize)> = self
            .flips
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, i)))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        ev
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        for (i, ts) in self.flips.iter().enumerate() {
            debug_assert!(ts.len() % 2 == 0, "odd flip count on spin {i}");
            debug_assert!(
                ts.windows(2).all(|w| w[0] < w[1]),
                "unsorted flips on spin {i}"
            );
            debug_assert!(ts.iter().all(|&t| (0.0..self.beta).contains(&t)));
        }
    }

    #[cfg(not(debug_assertions))]
    fn check_invariants(&self) {}
}

/// ∫ₛᵗ δE(τ) dτ for toggling `spin` over the non-wrapping interval (s, t),
/// everything else held fixed.
///
/// Events are gathered as (time, field jump); a zero jump marks a flip of
/// `spin` itself (neighbours with zero coupling are skipped, so the marker
/// is unambiguous).
fn toggle_cost(
    problem: &IsingProblem<Real>,
    w: &Worldline,
    spin: usize,
    s: Real,
    t: Real,
) -> Real {
    thread_local! {
        static SCRATCH: std::cell::RefCell<Vec<(Real, Real)>> =
            const { std::cell::RefCell::new(Vec::new()) };
    }
    SCRATCH.with(|scratch| {
        let events = &mut *scratch.borrow_mut();
        events.clear();
        let b = problem.classical_scale();
        for &x in &w.flips[spin] {
            if x > s && x < t {
                events.push((x, 0.0));
            }
        }
        let mut field = problem.field(spin);
        for &(j, v) in problem.neighbours(spin) {
            let mut vj = Real::from(w.spin_at(j, s));
            field += v * vj;
            if v == 0.0 {
                continue;
            }
            for &x in &w.flips[j] {
                if x > s && x < t {
                    // The neighbour's old value contributed +v·vj; toggling
                    // it moves the field by −2·v·vj.
                    events.push((x, -2.0 * v * vj));
                    vj = -vj;
                }
            }
        }
        events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut vi = Real::from(w.spin_at(spin, s));
        let mut cur = s;
        let mut cost = 0.0;
        for &(x, dfield) in events.iter() {
            cost += -2.0 * b * vi * field * (x - cur);
            cur = x;
            if dfield == 0.0 {
                vi = -vi;
            } else {
                field += dfield;
            }
        }
        cost + -2.0 * b * vi * field * (t - cur)
    })
}

/// ln of the worldline weight density: n ln Δ − ∫ E(τ) dτ.
pub fn worldline_log_weight(problem: &IsingProblem<Real>, w: &Worldline) -> Result<Real> {
    let delta = problem.transverse_field();
    let n = w.n_flips();
    if delta == 0.0 && n > 0 {
        return Ok(Real::NEG_INFINITY);
    }
    let mut config = w.base().clone();
    let mut energy = problem.classical_energy(&config)?;
    let mut integral = 0.0;
    let mut cur = 0.0;
    for (t, i) in w.events() {
        integral += energy * (t - cur);
        cur = t;
        energy += problem.energy_delta(&config, i)?;
        config.flip_in_place(i);
    }
    integral += energy * (w.beta - cur);
    let ln_delta = if n == 0 { 0.0 } else { delta.ln() * n as Real };
    Ok(ln_delta - integral)
}

fn metropolis(rng: &mut impl Rng, ln_ratio: Real) -> bool {
    ln_ratio >= 0.0 || rng.gen::<f64>().ln() < ln_ratio
}

/// One sweep = `n_spins` proposal attempts drawn from the move mix.
///
/// Insert draws two independent uniform times (unordered-pair density 2/β²);
/// delete picks uniformly among the m(m−1)/2 existing pairs. The Hastings
/// factors below make the two exactly reverse each other.
pub fn sweep(
    problem: &IsingProblem<Real>,
    w: &mut Worldline,
    rng: &mut impl Rng,
    params: &QmcParams,
    stats: &mut MoveStats,
) {
    let n = problem.n_spins();
    let beta = w.beta;
    let delta = problem.transverse_field();
    let mix = params.move_mix;
    for _ in 0..n {
        let r: f64 = rng.gen();
        let spin = rng.gen_range(0..n);
        if r < mix.0 {
            stats.insert.0 += 1;
            if delta == 0.0 {
                continue;
            }
            let (t1, t2) = (rng.gen::<Real>() * beta, rng.gen::<Real>() * beta);
            if t1 == t2 {
                continue;
            }
            let (s, t) = (t1.min(t2), t1.max(t2));
            let m = w.flips[spin].len() as Real;
            let cost = toggle_cost(problem, w, spin, s, t);
            let ln_a = 2.0 * (beta * delta).ln() - cost - ((m + 2.0) * (m + 1.0)).ln()
                + (mix.1 / mix.0).ln();
            if metropolis(rng, ln_a) {
                stats.insert.1 += 1;
                let k = w.flips[spin].partition_point(|&x| x < s);
                w.flips[spin].insert(k, s);
                let k = w.flips[spin].partition_point(|&x| x < t);
                w.flips[spin].insert(k, t);
            }
        } else if r < mix.0 + mix.1 {
            stats.delete.0 += 1;
            let m = w.flips[spin].len();
            if m < 2 {
                continue;
            }
            let k1 = rng.gen_range(0..m);
            let mut k2 = rng.gen_range(0..m - 1);
            if k2 >= k1 {
                k2 += 1;
            }
            let (k1, k2) = (k1.min(k2), k1.max(k2));
            let (s, t) = (w.flips[spin][k1], w.flips[spin][k2]);
            let cost = toggle_cost(problem, w, spin, s, t);
            let mf = m as Real;
            let ln_a = -2.0 * (beta * delta).ln() - cost + (mf * (mf - 1.0)).ln()
                + (mix.0 / mix.1).ln();
            if metropolis(rng, ln_a) {
                stats.delete.1 += 1;
                w.flips[spin].remove(k2);
                w.flips[spin].remove(k1);
            }
        } else {
            stats.shift.0 += 1;
            let m = w.flips[spin].len();
            if m == 0 {
                continue;
            }
            let k = rng.gen_range(0..m);
            let t_old = w.flips[spin][k];
            // Circular inter-flip window around flip k.
            let (prev, window) = if m == 1 {
                unreachable!("flip counts stay even")
            } else {
                let prev = w.flips[spin][(k + m - 1) % m];
                let next = w.flips[spin][(k + 1) % m];
                let len = if m == 2 && prev == next {
                    beta
                } else {
                    (next - prev).rem_euclid(beta)
                };
                (prev, len)
            };
            let pos_old = (t_old - prev).rem_euclid(beta);
            let pos_new = rng.gen::<Real>() * window;
            if pos_new == 0.0 || pos_new == pos_old {
                continue;
            }
            let (a, bnd) = (pos_old.min(pos_new), pos_old.max(pos_new));
            // Toggled arc in absolute time, possibly wrapping τ = 0.
            let lo = (prev + a).rem_euclid(beta);
            let hi = (prev + bnd).rem_euclid(beta);
            let (cost, wraps) = if lo < hi {
                (toggle_cost(problem, w, spin, lo, hi), false)
            } else {
                (
                    toggle_cost(problem, w, spin, lo, beta)
                        + toggle_cost(problem, w, spin, 0.0, hi),
                    true,
                )
            };
            if metropolis(rng, -cost) {
                stats.shift.1 += 1;
                w.flips[spin].remove(k);
                let t_new = (prev + pos_new).rem_euclid(beta);
                let kk = w.flips[spin].partition_point(|&x| x < t_new);
                w.flips[spin].insert(kk, t_new);
                if wraps {
                    w.base.flip_in_place(spin);
                }
            }
        }
    }
    w.check_invariants();
}

/// Fraction of imaginary time the worldline spends exactly at the target
/// configuration `d` (its support on the minimum).
pub fn support_fraction(w: &Worldline, d: &SpinConfiguration) -> Real {
    let mut hd = 0usize;
    for i in 0..w.base.len() {
        if w.base.spin(i) != d.spin(i) {
            hd += 1;
        }
    }
    let mut time_d = 0.0;
    let mut cur = 0.0;
    for (t, i) in w.events() {
        if hd == 0 {
            time_d += t - cur;
        }
        cur = t;
        if w.spin_at(i, t) == d.spin(i) {
            hd -= 1;
        } else {
            hd += 1;
        }
    }
    if hd == 0 {
        time_d += w.beta - cur;
    }
    time_d / w.beta
}

/// Number of completed u → d → u (or d → u → d) round trips along τ.
pub fn round_trip_count(
    w: &Worldline,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
) -> usize {
    let mu = u.to_mask();
    let md = d.to_mask();
    let mut mask = w.base.to_mask();
    let mut visits = Vec::new();
    let push = |mask: u32, visits: &mut Vec<bool>| {
        let at = if mask == mu {
            Some(true)
        } else if mask == md {
            Some(false)
        } else {
            None
        };
        if let Some(v) = at {
            if visits.last() != Some(&v) {
                visits.push(v);
            }
        }
    };
    push(mask, &mut visits);
    for (_, i) in w.events() {
        mask ^= 1 << i;
        push(mask, &mut visits);
    }
    visits.len().saturating_sub(1) / 2
}

#[derive(Debug, Clone, Copy)]
pub struct EscapeResult {
    pub sweeps: u64,
    pub timed_out: bool,
    pub final_support: Real,
}

/// Sweeps until the worldline, started in `u`, first spends at least
/// `threshold` of its imaginary time closer to `d`. `params.sweeps` is the
/// cap.
pub fn escape_time(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    params: &QmcParams,
    threshold: Real,
) -> Result<EscapeResult> {
    params.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::contract("escape threshold must be in [0, 1]"));
    }
    let mut w = init_worldline(params.beta, u);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stats = MoveStats::default();
    // The escape time is a first-passage quantity: excursions above the
    // threshold can be short-lived, so the support must be checked after
    // every sweep or brief crossings get missed and the result is inflated.
    for s in 1..=params.sweeps {
        sweep(problem, &mut w, &mut rng, params, &mut stats);
        let f = support_fraction(&w, d);
        if f >= threshold {
            return Ok(EscapeResult {
                sweeps: s,
                timed_out: false,
                final_support: f,
            });
        }
    }
    Ok(EscapeResult {
        sweeps: params.sweeps,
        timed_out: true,
        final_support: support_fraction(&w, d),
    })
}

fn batch_mean_err(samples: &[Real]) -> (Real, Real) {
    let n = samples.len();
    let mean = samples.iter().sum::<Real>() / n as Real;
    let batches = 32.min(n);
    let per = n / batches;
    if per == 0 || batches < 2 {
        return (mean, Real::INFINITY);
    }
    let mut means = Vec::with_capacity(batches);
    for b in 0..batches {
        let chunk = &samples[b * per..(b + 1) * per];
        means.push(chunk.iter().sum::<Real>() / per as Real);
    }
    let bm = means.iter().sum::<Real>() / batches as Real;
    let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<Real>()
        / (batches as Real - 1.0);
    (mean, (var / batches as Real).sqrt())
}

#[derive(Debug, Clone)]
pub struct EquilibriumEstimate {
    pub mean_energy: Real,
    pub mean_energy_err: Real,
    pub sigma_x: Vec<Real>,
    pub sigma_x_err: Vec<Real>,
    pub sigma_z: Vec<Real>,
    pub sigma_z_err: Vec<Real>,
    pub stats: MoveStats,
}

/// Thermal estimates from a single chain started at `start`; the first 20%
/// of sweeps are burn-in.
pub fn measure_equilibrium(
    problem: &IsingProblem<Real>,
    start: &SpinConfiguration,
    params: &QmcParams,
) -> Result<EquilibriumEstimate> {
    params.validate()?;
    let n = problem.n_spins();
    let beta = params.beta;
    let delta = problem.transverse_field();
    let mut w = init_worldline(beta, start);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stats = MoveStats::default();
    let burn = params.sweeps / 5;
    let mut e_samples = Vec::new();
    let mut x_samples: Vec<Vec<Real>> = vec![Vec::new(); n];
    let mut z_samples: Vec<Vec<Real>> = vec![Vec::new(); n];
    for s in 1..=params.sweeps {
        sweep(problem, &mut w, &mut rng, params, &mut stats);
        if s <= burn || !(s - burn).is_multiple_of(params.measure_every) {
            continue;
        }
        // Diagonal-energy integral and per-spin magnetization integrals.
        let mut config = w.base().clone();
        let mut energy = problem.classical_energy(&config)?;
        let mut e_int = 0.0;
        let mut z_int = vec![0.0; n];
        let mut cur = 0.0;
        for (t, i) in w.events() {
            e_int += energy * (t - cur);
            for (j, zi) in z_int.iter_mut().enumerate() {
                *zi += Real::from(config.spin(j)) * (t - cur);
            }
            cur = t;
            energy += problem.energy_delta(&config, i)?;
            config.flip_in_place(i);
        }
        e_int += energy * (beta - cur);
        for (j, zi) in z_int.iter_mut().enumerate() {
            *zi += Real::from(config.spin(j)) * (beta - cur);
        }
        e_samples.push(e_int / beta - w.n_flips() as Real / beta);
        for j in 0..n {
            z_samples[j].push(z_int[j] / beta);
            let nx = w.flips[j].len() as Real;
            x_samples[j].push(if delta == 0.0 { 0.0 } else { nx / (beta * delta) });
        }
    }
    if e_samples.len() < 64 {
        return Err(Error::InsufficientSampling(format!(
            "only {} measurements; increase sweeps or lower measure_every",
            e_samples.len()
        )));
    }
    let (mean_energy, mean_energy_err) = batch_mean_err(&e_samples);
    let mut sigma_x = Vec::new();
    let mut sigma_x_err = Vec::new();
    let mut sigma_z = Vec::new();
    let mut sigma_z_err = Vec::new();
    for j in 0..n {
        let (m, e) = batch_mean_err(&x_samples[j]);
        sigma_x.push(m);
        sigma_x_err.push(e);
        let (m, e) = batch_mean_err(&z_samples[j]);
        sigma_z.push(m);
        sigma_z_err.push(e);
    }
    Ok(EquilibriumEstimate {
        mean_energy,
        mean_energy_err,
        sigma_x,
        sigma_x_err,
        sigma_z,
        sigma_z_err,
        stats,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ZbEstimate {
    pub ratio: Real,
    pub stderr: Real,
    pub bridging_fraction: Real,
}

/// Estimate Z_B/Z₀: the weight of bridging worldlines (those visiting both
/// wells) relative to the confined weight of a single well. By symmetry the
/// non-bridging weight splits evenly between the wells, so with bridging
/// fraction m the ratio is 2m/(1−m). In the dilute-crossing regime
/// (βg ≪ 1 ≪ β·ΔE) this approaches β²g².
pub fn measure_zb_ratio(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    params: &QmcParams,
) -> Result<ZbEstimate> {
    params.validate()?;
    let mut w = init_worldline(params.beta, u);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stats = MoveStats::default();
    let burn = params.sweeps / 5;
    let (mu, md) = (u.to_mask(), d.to_mask());
    let mut samples = Vec::new();
    for s in 1..=params.sweeps {
        sweep(problem, &mut w, &mut rng, params, &mut stats);
        if s <= burn || !(s - burn).is_multiple_of(params.measure_every) {
            continue;
        }
        let mut mask = w.base().to_mask();
        let (mut saw_u, mut saw_d) = (mask == mu, mask == md);
        for (_, i) in w.events() {
            mask ^= 1 << i;
            saw_u |= mask == mu;
            saw_d |= mask == md;
        }
        samples.push(if saw_u && saw_d { 1.0 } else { 0.0 });
    }
    if samples.len() < 64 {
        return Err(Error::InsufficientSampling(format!(
            "only {} measurements; increase sweeps or lower measure_every",
            samples.len()
        )));
    }
    let (m, err) = batch_mean_err(&samples);
    if m >= 1.0 {
        return Err(Error::InsufficientSampling(
            "every sample bridged; sectors cannot be separated".into(),
        ));
    }
    Ok(ZbEstimate {
        ratio: 2.0 * m / (1.0 - m),
        stderr: 2.0 * err / ((1.0 - m) * (1.0 - m)),
        bridging_fraction: m,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct TrotterCouplings {
    pub gamma: Real,
    pub j_perp: Real,
    pub prefactor: Real,
}

/// Discrete-time mapping with M slices: γ = βΔ/M, ferromagnetic time-like
/// coupling J⊥ = −(M/2β) ln tanh γ and bond prefactor C = √(½ sinh 2γ).
pub fn trotter_couplings(beta: Real, delta: Real, slices: usize) -> Result<TrotterCouplings> {
    if !(beta.is_finite() && beta > 0.0) || !(delta.is_finite() && delta > 0.0) {
        return Err(Error::contract("trotter_couplings: need β > 0 and Δ > 0"));
    }
    if slices == 0 {
        return Err(Error::contract("trotter_couplings: need ≥ 1 slice"));
    }
    let m = slices as Real;
    let gamma = beta * delta / m;
    Ok(TrotterCouplings {
        gamma,
        j_perp: -(m / (2.0 * beta)) * gamma.tanh().ln(),
        prefactor: (0.5 * (2.0 * gamma).sinh()).sqrt(),
    })
}
