//! Free-energy profiles of stretched worldline loops.
//!
//! Two families of loops probe how a round-trip excursion between the wells
//! can be grown or shrunk:
//! * intra-path: out-and-back along a single dominant path, depth k = 1..L;
//! * inter-path: out along one dominant path, back along another, the open
//!   ends joined by the cheapest connector walk through configuration space
//!   (bottleneck-minimal, avoiding both wells).
//!
//! When every connector between the strands must climb above a configured
//! energy ceiling, the inter-path loop cannot be contracted within that
//! budget; those depths are reported as obstructed instead of scored.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::model::{IsingProblem, SpinConfiguration};
use crate::perturbation::loops::{loop_free_energy, LoopRecord};
use crate::perturbation::paths::{enumerate_minimal_paths, minimax_barrier, TunnelingPath};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub descriptor: String,
    pub depth: usize,
    pub loop_len: usize,
    pub free_energy: Real,
}

#[derive(Debug, Clone)]
pub struct StretchProfiles {
    pub intra: Vec<ProfilePoint>,
    pub inter: Vec<ProfilePoint>,
    pub obstructed: Vec<String>,
}

impl StretchProfiles {
    pub fn max_intra(&self) -> Option<Real> {
        self.intra
            .iter()
            .map(|p| p.free_energy)
            .fold(None, |m, f| Some(m.map_or(f, |v: Real| v.max(f))))
    }

    pub fn max_inter(&self) -> Option<Real> {
        self.inter
            .iter()
            .map(|p| p.free_energy)
            .fold(None, |m, f| Some(m.map_or(f, |v: Real| v.max(f))))
    }
}

#[derive(PartialEq)]
struct HeapItem {
    bottleneck: Real,
    mask: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on the bottleneck.
        other
            .bottleneck
            .total_cmp(&self.bottleneck)
            .then(other.mask.cmp(&self.mask))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Walk from `s1` to `s2` minimizing the maximum classical energy of its
/// interior states, never visiting `avoid`. Returns (interior states,
/// bottleneck energy); the bottleneck is −∞ when the endpoints are adjacent.
fn bottleneck_connector(
    problem: &IsingProblem<Real>,
    s1: u32,
    s2: u32,
    avoid: [u32; 2],
) -> Result<(Vec<u32>, Real)> {
    let n = problem.n_spins();
    let mut best: HashMap<u32, Real> = HashMap::new();
    let mut parent: HashMap<u32, u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(s1, Real::NEG_INFINITY);
    heap.push(HeapItem {
        bottleneck: Real::NEG_INFINITY,
        mask: s1,
    });
    while let Some(HeapItem { bottleneck, mask }) = heap.pop() {
        if mask == s2 {
            let mut interior = Vec::new();
            let mut m = *parent.get(&s2).expect("connector endpoint has a parent");
            while m != s1 {
                interior.push(m);
                m = parent[&m];
            }
            interior.reverse();
            return Ok((interior, bottleneck));
        }
        if bottleneck > best[&mask] {
            continue;
        }
        for bit in 0..n {
            let next = mask ^ (1 << bit);
            if avoid.contains(&next) || next == s1 {
                continue;
            }
            let cand = if next == s2 {
                bottleneck
            } else {
                bottleneck.max(problem.classical_energy_of_mask(next))
            };
            if best.get(&next).is_none_or(|&b| cand < b) {
                best.insert(next, cand);
                parent.insert(next, mask);
                heap.push(HeapItem {
                    bottleneck: cand,
                    mask: next,
                });
            }
        }
    }
    Err(Error::contract(
        "no connector walk exists between the strand endpoints",
    ))
}

/// Among the dominant paths, the one whose flip order departs most from
/// `reference` (position-wise) — for two-channel problems this picks the
/// other channel.
fn most_distinct<'a>(paths: &'a [TunnelingPath], reference: &TunnelingPath) -> &'a TunnelingPath {
    paths
        .iter()
        .max_by_key(|p| {
            p.flip_order()
                .iter()
                .zip(reference.flip_order())
                .filter(|(a, b)| a != b)
                .count()
        })
        .expect("non-empty dominant path set")
}

pub fn stretch_profiles(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    beta: Real,
    connector_ceiling: Option<Real>,
) -> Result<StretchProfiles> {
    let delta = problem.transverse_field();
    let e0 = problem.classical_energy(u)?;
    let tol = 1e-9 * problem.energy_scale();
    let barrier = minimax_barrier(problem, u, d)?;
    let dominant = enumerate_minimal_paths(problem, u, d, Some(barrier + tol))?;
    let path1 = &dominant[0];
    let path2 = most_distinct(&dominant, path1);
    let l = path1.len();

    let mut intra = Vec::new();
    for k in 1..=l {
        let rec = LoopRecord::out_and_back(problem, &path1.states()[..=k])?;
        intra.push(ProfilePoint {
            descriptor: format!("intra depth {k}"),
            depth: k,
            loop_len: rec.flips(),
            free_energy: loop_free_energy(&rec, beta, delta)?,
        });
    }

    let mut inter = Vec::new();
    let mut obstructed = Vec::new();
    let avoid = [u.to_mask(), d.to_mask()];
    for k in 1..=l {
        let s1 = &path1.states()[k];
        let s2 = &path2.states()[k];
        let mut states: Vec<SpinConfiguration> = path1.states()[..=k].to_vec();
        let descriptor;
        if s1 == s2 {
            descriptor = format!("inter depth {k}");
        } else {
            let (interior, bottleneck) =
                bottleneck_connector(problem, s1.to_mask(), s2.to_mask(), avoid)?;
            if let Some(c) = connector_ceiling {
                if bottleneck - e0 > c + tol {
                    obstructed.push(format!(
                        "inter depth {k}: connector bottleneck {:.6} exceeds ceiling {:.6}",
                        bottleneck - e0,
                        c
                    ));
                    continue;
                }
            }
            descriptor = format!("inter depth {k} (connector {} states)", interior.len());
            states.extend(
                interior
                    .into_iter()
                    .map(|m| SpinConfiguration::from_mask(m, problem.n_spins())),
            );
            states.push(s2.clone());
        }
        states.extend(path2.states()[1..k].iter().rev().cloned());
        let rec = LoopRecord::new(problem, states)?;
        inter.push(ProfilePoint {
            descriptor,
            depth: k,
            loop_len: rec.flips(),
            free_energy: loop_free_energy(&rec, beta, delta)?,
        });
    }
    Ok(StretchProfiles {
        intra,
        inter,
        obstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_frustrated_ring, make_shamrock, make_uniform_ferromagnet};

    fn wells(n: usize) -> (SpinConfiguration, SpinConfiguration) {
        (SpinConfiguration::all_up(n), SpinConfiguration::all_down(n))
    }

    #[test]
    fn ring_inter_loops_cost_more_than_intra() {
        let p = make_frustrated_ring(6, 6.0, 0.2, 1.0, 0.1).unwrap();
        let (u, d) = wells(6);
        let prof = stretch_profiles(&p, &u, &d, 10.0, None).unwrap();
        assert_eq!(prof.intra.len(), 6);
        assert_eq!(prof.inter.len(), 6);
        assert!(prof.obstructed.is_empty());
        // Intra stretches get steadily more expensive at small Δ.
        for w in prof.intra.windows(2) {
            assert!(w[1].free_energy > w[0].free_energy);
        }
        let gap = prof.max_inter().unwrap() - prof.max_intra().unwrap();
        assert!(gap > 0.0, "gap {gap}");
        // The final inter point is the full round trip: no connector.
        assert_eq!(prof.inter.last().unwrap().loop_len, 12);
    }

    #[test]
    fn obstruction_gap_shrinks_with_weaker_couplings() {
        let (u, d) = wells(6);
        let mut last_gap = Real::INFINITY;
        for j in [6.0, 3.0, 1.5] {
            let p = make_frustrated_ring(6, j, 0.2, 1.0, 0.1).unwrap();
            let prof = stretch_profiles(&p, &u, &d, 10.0, None).unwrap();
            let gap = prof.max_inter().unwrap() - prof.max_intra().unwrap();
            assert!(gap < last_gap, "J={j}: gap {gap} vs {last_gap}");
            last_gap = gap;
        }
    }

    #[test]
    fn connector_ceiling_reports_obstructions() {
        let p = make_frustrated_ring(6, 6.0, 0.2, 1.0, 0.1).unwrap();
        let (u, d) = wells(6);
        // Connectors between distinct strands must break extra bonds (~4J);
        // a ceiling at the path barrier shuts them all out.
        let prof = stretch_profiles(&p, &u, &d, 10.0, Some(0.5)).unwrap();
        assert_eq!(prof.obstructed.len(), 5);
        assert_eq!(prof.inter.len(), 1); // only the connector-free round trip
        assert_eq!(prof.intra.len(), 6);
    }

    #[test]
    fn single_channel_ferromagnet_is_unobstructed_at_the_path_barrier() {
        // All orderings are one homotopy class: strands deform into each
        // other without climbing above the intra-path barrier, so a ceiling
        // right at that barrier obstructs nothing. (Contrast with the ring,
        // where the same ceiling shuts out every connector.)
        let p = make_uniform_ferromagnet(4, 1.0, 1.0, 0.1).unwrap();
        let (u, d) = wells(4);
        let barrier = minimax_barrier(&p, &u, &d).unwrap();
        let prof = stretch_profiles(&p, &u, &d, 8.0, Some(barrier)).unwrap();
        assert!(prof.obstructed.is_empty(), "{:?}", prof.obstructed);
        assert_eq!(prof.inter.len(), 4);
    }

    #[test]
    fn shamrock_profiles_are_well_formed() {
        let p = make_shamrock(2, 6.0, 0.2, 1.0, 0.1).unwrap();
        let (u, d) = wells(5);
        let prof = stretch_profiles(&p, &u, &d, 10.0, None).unwrap();
        assert_eq!(prof.intra.len(), 5);
        assert_eq!(prof.inter.len(), 5);
        for pt in prof.intra.iter().chain(&prof.inter) {
            assert!(pt.free_energy.is_finite(), "{}", pt.descriptor);
        }
    }
}
