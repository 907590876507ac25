//! Analytic machinery of the loop expansion: lowest-order path sums for the
//! tunneling amplitude, divided-difference loop free energies, stretched-loop
//! barrier profiles, and the all-orders two-level resolvent reduction.

mod divdiff;
mod loops;
mod paths;
mod profiles;
mod resolvent;

pub use divdiff::{divided_difference_exp, divided_difference_exp_scaled, lambda0_mean};
pub use loops::{loop_free_energy, loop_log_weight, loop_symmetry_factor, LoopRecord};
pub use paths::{
    enumerate_minimal_paths, g_lowest_order, minimax_barrier, path_class_count,
    round_trip_weight_lowest_order, tunneling_path_count, z0_zb_lowest_order, TunnelingPath,
    ZbSplit, MAX_PATH_LENGTH,
};
pub use profiles::{stretch_profiles, ProfilePoint, StretchProfiles};
pub use resolvent::{
    eigenvalues_from_ab, resolvent_ab, two_level_reduction, ResolventSolver, TwoLevelReduction,
};
