//! Confluent divided differences of the exponential.
//!
//! `divided_difference_exp` evaluates the simplex integral
//! `∫_{Σ_{n−1}} e^{−β Σ_l λ_l E_l} dλ` (measure normalized so the segment
//! n = 2 has unit mass), which equals the divided difference of `e^{−βx}`
//! over the energy multiset up to a sign and a power of β.
//!
//! Naive recurrence evaluation cancels catastrophically when nodes cluster.
//! We instead take the top-right entry of the matrix exponential of the
//! Opitz bidiagonal matrix (nodes on the diagonal, ones above), computed by
//! scaling and squaring. Confluent nodes need no special casing, and for a
//! decaying exponential over shifted nonnegative nodes every squaring step
//! multiplies nonnegative matrices, so no cancellation occurs anywhere.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported total multiplicity.
pub const MAX_NODES: usize = 64;

fn flatten<F: Scalar>(nodes: &[(F, usize)]) -> Result<Vec<F>> {
    if nodes.is_empty() {
        return Err(Error::contract("divided_difference_exp: empty node list"));
    }
    let mut xs = Vec::new();
    for &(e, m) in nodes {
        if !e.is_finite() {
            return Err(Error::contract("divided_difference_exp: non-finite node"));
        }
        if m == 0 {
            return Err(Error::contract("divided_difference_exp: zero multiplicity"));
        }
        for _ in 0..m {
            xs.push(e);
        }
    }
    if xs.len() > MAX_NODES {
        return Err(Error::capability(format!(
            "divided_difference_exp supports at most {MAX_NODES} nodes, got {}",
            xs.len()
        )));
    }
    Ok(xs)
}

/// Top-right entry of exp(M) for the upper bidiagonal M with diagonal `d`
/// (all ≤ 0) and unit superdiagonal, by scaling and squaring.
fn exp_bidiagonal_corner<F: Scalar>(d: &[F]) -> F {
    let n = d.len();
    if n == 1 {
        return d[0].exp();
    }
    let two = F::from_f64_lit(2.0);
    let max_abs = d.iter().fold(F::zero(), |m, &x| m.max(x.abs()));
    // Scale so ‖M/2^s‖ is comfortably below 1.
    let mut s = 0u32;
    let mut scale = F::one();
    while (max_abs + F::one()) / scale > F::from_f64_lit(0.25) && s < 64 {
        s += 1;
        scale = scale * two;
    }

    // Upper triangular matrices, row-major.
    let idx = |i: usize, j: usize| i * n + j;
    let mut a = vec![F::zero(); n * n]; // M / 2^s
    for i in 0..n {
        a[idx(i, i)] = d[i] / scale;
        if i + 1 < n {
            a[idx(i, i + 1)] = F::one() / scale;
        }
    }

    // exp(A) by Taylor; terms decay fast because ‖A‖ ≤ 0.5.
    let mut result = vec![F::zero(); n * n];
    for i in 0..n {
        result[idx(i, i)] = F::one();
    }
    let mut term = result.clone();
    let mut k = 1usize;
    loop {
        // term <- term * A / k
        let mut next = vec![F::zero(); n * n];
        let kf = F::from_usize(k).unwrap();
        for i in 0..n {
            for j in i..n {
                let mut acc = F::zero();
                for l in i..=j {
                    acc = acc + term[idx(i, l)] * a[idx(l, j)];
                }
                next[idx(i, j)] = acc / kf;
            }
        }
        let mag = next.iter().fold(F::zero(), |m, &x| m.max(x.abs()));
        for (r, &t) in result.iter_mut().zip(&next) {
            *r = *r + t;
        }
        term = next;
        k += 1;
        if mag < F::from_f64_lit(1e-22) || k > 40 {
            break;
        }
    }

    // Square s times.
    for _ in 0..s {
        let mut sq = vec![F::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let mut acc = F::zero();
                for l in i..=j {
                    acc = acc + result[idx(i, l)] * result[idx(l, j)];
                }
                sq[idx(i, j)] = acc;
            }
        }
        result = sq;
    }
    result[idx(0, n - 1)]
}

/// Simplex integral split as `(mantissa, log_factor)`: the true value is
/// `mantissa · exp(log_factor)`. Useful when `β·E_min` would overflow.
pub fn divided_difference_exp_scaled<F: Scalar>(
    nodes: &[(F, usize)],
    beta: F,
) -> Result<(F, F)> {
    if !(beta.is_finite() && beta > F::zero()) {
        return Err(Error::contract("divided_difference_exp: β must be > 0"));
    }
    let xs = flatten(nodes)?;
    let e_min = xs.iter().fold(F::infinity(), |m, &x| m.min(x));
    // Shifted nodes y_i = −β(E_i − E_min) ≤ 0; the integral is
    // e^{−β E_min} · [exp(bidiag(y; 1))]_{0,n−1}.
    let d: Vec<F> = xs.iter().map(|&x| -(beta * (x - e_min))).collect();
    let corner = exp_bidiagonal_corner(&d);
    Ok((corner, -(beta * e_min)))
}

/// The simplex integral `∫_{Σ_{n−1}} e^{−β Σ λ_l E_l} dλ` over the energy
/// multiset `{(E_k, m_k)}` with `n = Σ m_k` ≥ 1.
pub fn divided_difference_exp<F: Scalar>(nodes: &[(F, usize)], beta: F) -> Result<F> {
    let (mantissa, log_factor) = divided_difference_exp_scaled(nodes, beta)?;
    Ok(mantissa * log_factor.exp())
}

/// Mean simplex coordinate ⟨λ₀⟩ of the designated segment (index 0 of
/// `energies`): the average imaginary-time fraction the worldline spends in
/// that state. Equals the ratio of two divided differences, the numerator
/// with the designated node's multiplicity raised by one.
pub fn lambda0_mean<F: Scalar>(energies: &[F], beta: F) -> Result<F> {
    if energies.is_empty() {
        return Err(Error::contract("lambda0_mean: empty energy list"));
    }
    let base: Vec<(F, usize)> = energies.iter().map(|&e| (e, 1)).collect();
    let mut raised = base.clone();
    raised.push((energies[0], 1));
    let (m0, l0) = divided_difference_exp_scaled(&base, beta)?;
    let (m1, l1) = divided_difference_exp_scaled(&raised, beta)?;
    if m0 <= F::zero() {
        return Err(Error::Numerical {
            what: "lambda0_mean: vanishing denominator integral".into(),
            residual: 0.0,
        });
    }
    Ok(m1 / m0 * (l1 - l0).exp())
}
