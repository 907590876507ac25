//! Experiment driver: TOML-configured runs over the model families, with
//! CSV emission for every subcommand of the `qmclab` binary.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Deserialize;

use crate::ctqmc::{
    escape_time, measure_equilibrium, measure_zb_ratio, QmcParams,
};
use crate::error::{Error, Result};
use crate::exactdiag::{equilibrium_observables, tunneling_gap};
use crate::model::{
    make_frustrated_ring, make_shamrock, make_uniform_ferromagnet, IsingProblem,
    SpinConfiguration,
};
use crate::perturbation::{
    enumerate_minimal_paths, g_lowest_order, stretch_profiles, tunneling_path_count,
    two_level_reduction, z0_zb_lowest_order,
};
use crate::scalar::Real;

/// Which instance family an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ring,
    Shamrock,
    Ferromagnet,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Ring/ferromagnet: number of spins. Shamrock: number of leaves.
    pub size: usize,
    #[serde(default = "default_coupling")]
    pub coupling: Real,
    #[serde(default = "default_asymmetry")]
    pub asymmetry: Real,
    #[serde(default = "default_scale")]
    pub classical_scale: Real,
    #[serde(default = "default_delta")]
    pub transverse_field: Real,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_beta")]
    pub beta: Real,
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default = "default_measure_every")]
    pub measure_every: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_threshold")]
    pub escape_threshold: Real,
}

fn default_coupling() -> Real {
    6.0
}
fn default_asymmetry() -> Real {
    0.2
}
fn default_scale() -> Real {
    1.0
}
fn default_delta() -> Real {
    0.5
}
fn default_beta() -> Real {
    20.0
}
fn default_sweeps() -> u64 {
    200_000
}
fn default_measure_every() -> u64 {
    10
}
fn default_runs() -> usize {
    100
}
fn default_threshold() -> Real {
    0.05
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            beta: default_beta(),
            sweeps: default_sweeps(),
            measure_every: default_measure_every(),
            runs: default_runs(),
            escape_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start].lines().count());
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })
}

/// Instantiate the configured problem together with its two degenerate
/// classical wells.
pub fn build_instance(
    cfg: &ModelConfig,
) -> Result<(IsingProblem<Real>, SpinConfiguration, SpinConfiguration)> {
    let m = cfg;
    let problem = match m.kind {
        ModelKind::Ring => make_frustrated_ring(
            m.size,
            m.coupling,
            m.asymmetry,
            m.classical_scale,
            m.transverse_field,
        )?,
        ModelKind::Shamrock => make_shamrock(
            m.size,
            m.coupling,
            m.asymmetry,
            m.classical_scale,
            m.transverse_field,
        )?,
        ModelKind::Ferromagnet => make_uniform_ferromagnet(
            m.size,
            m.coupling,
            m.classical_scale,
            m.transverse_field,
        )?,
    };
    let n = problem.n_spins();
    Ok((
        problem,
        SpinConfiguration::all_up(n),
        SpinConfiguration::all_down(n),
    ))
}

fn push_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "{}", cells.join(","));
}

fn fmt(x: Real) -> String {
    format!("{x:.12e}")
}

/// Low doublet and tunneling gap of the configured instance.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<String> {
    let (problem, _, _) = build_instance(&cfg.model)?;
    let s = tunneling_gap(&problem)?;
    let mut out = String::from("n_spins,delta,e_minus,e_plus,g,delta_e\n");
    push_row(
        &mut out,
        &[
            problem.n_spins().to_string(),
            fmt(problem.transverse_field()),
            fmt(s.e_minus),
            fmt(s.e_plus),
            fmt(s.g),
            fmt(s.delta_e),
        ],
    );
    Ok(out)
}

/// Path-sum diagnostics: minimal-path count, homotopy channel count, the
/// lowest-order gap, and the all-orders two-level reduction for comparison.
pub fn run_perturb(cfg: &ExperimentConfig) -> Result<String> {
    let (problem, u, d) = build_instance(&cfg.model)?;
    let paths = enumerate_minimal_paths(&problem, &u, &d, None)?;
    let n_classes = tunneling_path_count(&problem, &u, &d)?;
    let g_pert = g_lowest_order(&problem, &u, &d)?;
    let reduction = two_level_reduction(&problem, &u, &d)?;
    let g_exact = reduction.g_allorders;
    let zb = z0_zb_lowest_order(&problem, &u, &d, cfg.sampling.beta)?;
    let mut out = String::from(
        "n_spins,delta,path_len,n_paths,n_classes,g_pert,g_allorders,ratio,zb_over_z0\n",
    );
    push_row(
        &mut out,
        &[
            problem.n_spins().to_string(),
            fmt(problem.transverse_field()),
            paths[0].len().to_string(),
            paths.len().to_string(),
            n_classes.to_string(),
            fmt(g_pert),
            fmt(g_exact),
            fmt(g_pert / g_exact),
            fmt(zb.ratio),
        ],
    );
    Ok(out)
}

/// Out-and-back loop free energies along the dominant channel (intra) and
/// well-to-well loops through a second channel (inter).
pub fn run_profiles(cfg: &ExperimentConfig) -> Result<String> {
    let (problem, u, d) = build_instance(&cfg.model)?;
    let profiles = stretch_profiles(&problem, &u, &d, cfg.sampling.beta, None)?;
    let mut out = String::from("kind,depth,loop_len,free_energy\n");
    for (kind, points) in [("intra", &profiles.intra), ("inter", &profiles.inter)] {
        for p in points {
            push_row(
                &mut out,
                &[
                    kind.to_string(),
                    p.depth.to_string(),
                    p.loop_len.to_string(),
                    fmt(p.free_energy),
                ],
            );
        }
    }
    Ok(out)
}

/// Sampled thermal observables next to the spectral reference (small
/// instances only).
pub fn run_equilibrium(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let (problem, u, _) = build_instance(&cfg.model)?;
    let params = QmcParams {
        beta: cfg.sampling.beta,
        sweeps: cfg.sampling.sweeps,
        seed,
        measure_every: cfg.sampling.measure_every,
        ..QmcParams::default()
    };
    let est = measure_equilibrium(&problem, &u, &params)?;
    let exact = equilibrium_observables(&problem, cfg.sampling.beta)?;
    let mut out = String::from("observable,estimate,stderr,reference,n_sigma\n");
    let mut row = |name: String, est: Real, err: Real, exact: Real| {
        let ns = if err > 0.0 { (est - exact).abs() / err } else { Real::INFINITY };
        push_row(&mut out, &[name, fmt(est), fmt(err), fmt(exact), format!("{ns:.2}")]);
    };
    row(
        "energy".into(),
        est.mean_energy,
        est.mean_energy_err,
        exact.mean_energy,
    );
    for i in 0..problem.n_spins() {
        row(
            format!("sigma_x_{i}"),
            est.sigma_x[i],
            est.sigma_x_err[i],
            exact.sigma_x[i],
        );
        row(
            format!("sigma_z_{i}"),
            est.sigma_z[i],
            est.sigma_z_err[i],
            exact.sigma_z[i],
        );
    }
    Ok(out)
}

/// Sampled bridging-sector ratio next to the β²g² prediction from the exact
/// gap.
pub fn run_zb_ratio(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let (problem, u, d) = build_instance(&cfg.model)?;
    let params = QmcParams {
        beta: cfg.sampling.beta,
        sweeps: cfg.sampling.sweeps,
        seed,
        measure_every: cfg.sampling.measure_every,
        ..QmcParams::default()
    };
    let est = measure_zb_ratio(&problem, &u, &d, &params)?;
    let g = tunneling_gap(&problem)?.g;
    let beta = cfg.sampling.beta;
    let predicted = beta * beta * g * g;
    let mut out = String::from("ratio,stderr,bridging_fraction,predicted,n_sigma\n");
    let ns = if est.stderr > 0.0 {
        (est.ratio - predicted).abs() / est.stderr
    } else {
        Real::INFINITY
    };
    push_row(
        &mut out,
        &[
            fmt(est.ratio),
            fmt(est.stderr),
            fmt(est.bridging_fraction),
            fmt(predicted),
            format!("{ns:.2}"),
        ],
    );
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct EscapeSummary {
    pub runs: usize,
    pub timeouts: usize,
    pub mean_sweeps: Real,
    pub stderr_sweeps: Real,
}

/// Per-chain escape record: (sweeps, timed out, final support fraction).
pub type EscapeRun = (u64, bool, Real);

/// First-passage statistics over independent chains; timeouts enter the mean
/// at the sweep cap, so a summary with timeouts is a lower bound.
pub fn escape_ensemble(
    problem: &IsingProblem<Real>,
    u: &SpinConfiguration,
    d: &SpinConfiguration,
    sampling: &SamplingConfig,
    base_seed: u64,
) -> Result<(Vec<EscapeRun>, EscapeSummary)> {
    if sampling.runs == 0 {
        return Err(Error::contract("escape: need at least one run"));
    }
    let results: Vec<_> = (0..sampling.runs)
        .into_par_iter()
        .map(|chain| {
            let params = QmcParams {
                beta: sampling.beta,
                sweeps: sampling.sweeps,
                // Decorrelate chains; ChaCha streams make any injective map fine.
                seed: base_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(chain as u64),
                measure_every: sampling.measure_every,
                ..QmcParams::default()
            };
            escape_time(problem, u, d, &params, sampling.escape_threshold)
                .map(|r| (r.sweeps, r.timed_out, r.final_support))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as Real;
    let mean = results.iter().map(|r| r.0 as Real).sum::<Real>() / n;
    let var = results
        .iter()
        .map(|r| (r.0 as Real - mean) * (r.0 as Real - mean))
        .sum::<Real>()
        / (n - 1.0).max(1.0);
    let summary = EscapeSummary {
        runs: results.len(),
        timeouts: results.iter().filter(|r| r.1).count(),
        mean_sweeps: mean,
        stderr_sweeps: (var / n).sqrt(),
    };
    Ok((results, summary))
}

/// Per-chain escape results as CSV, with a trailing summary row.
pub fn run_escape(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let (problem, u, d) = build_instance(&cfg.model)?;
    let (results, summary) = escape_ensemble(&problem, &u, &d, &cfg.sampling, seed)?;
    let mut out = String::from("chain,sweeps,timed_out,final_support\n");
    for (chain, (sweeps, timed_out, support)) in results.iter().enumerate() {
        push_row(
            &mut out,
            &[
                chain.to_string(),
                sweeps.to_string(),
                timed_out.to_string(),
                fmt(*support),
            ],
        );
    }
    let _ = writeln!(
        out,
        "# runs={} timeouts={} mean_sweeps={:.6e} stderr={:.6e}",
        summary.runs, summary.timeouts, summary.mean_sweeps, summary.stderr_sweeps
    );
    Ok(out)
}

/// One row of an escape-scaling study: observed cost next to the two
/// candidate laws, 1/g² and n_channels/g².
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub label: String,
    pub n_spins: usize,
    pub n_channels: u64,
    pub g: Real,
    pub mean_sweeps: Real,
    pub stderr_sweeps: Real,
    pub timeouts: usize,
}

/// Escape-scaling sweep over a list of instances (all sharing the sampling
/// settings), e.g. shamrocks of growing leaf count.
pub fn run_escape_scaling(
    instances: &[(String, IsingProblem<Real>)],
    sampling: &SamplingConfig,
    base_seed: u64,
) -> Result<Vec<ScalingRow>> {
    instances
        .iter()
        .enumerate()
        .map(|(idx, (label, problem))| {
            let n = problem.n_spins();
            let u = SpinConfiguration::all_up(n);
            let d = SpinConfiguration::all_down(n);
            let n_channels = tunneling_path_count(problem, &u, &d)? as u64;
            let g = tunneling_gap(problem)?.g;
            let (_, summary) =
                escape_ensemble(problem, &u, &d, sampling, base_seed ^ (idx as u64) << 32)?;
            Ok(ScalingRow {
                label: label.clone(),
                n_spins: n,
                n_channels,
                g,
                mean_sweeps: summary.mean_sweeps,
                stderr_sweeps: summary.stderr_sweeps,
                timeouts: summary.timeouts,
            })
        })
        .collect()
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out =
        String::from("label,n_spins,n_channels,g,mean_sweeps,stderr,inv_g2,channels_inv_g2,timeouts\n");
    for r in rows {
        push_row(
            &mut out,
            &[
                r.label.clone(),
                r.n_spins.to_string(),
                r.n_channels.to_string(),
                fmt(r.g),
                fmt(r.mean_sweeps),
                fmt(r.stderr_sweeps),
                fmt(1.0 / (r.g * r.g)),
                fmt(r.n_channels as Real / (r.g * r.g)),
                r.timeouts.to_string(),
            ],
        );
    }
    out
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(points: &[(Real, Real)]) -> Result<(Real, Real)> {
    if points.len() < 3 {
        return Err(Error::contract("log_log_slope: need at least 3 points"));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::contract("log_log_slope: points must be positive"));
    }
    let n = points.len() as Real;
    let (lx, ly): (Vec<Real>, Vec<Real>) =
        points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<Real>() / n;
    let my = ly.iter().sum::<Real>() / n;
    let sxx: Real = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: Real = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::contract("log_log_slope: x values are all equal"));
    }
    let slope = sxy / sxx;
    // Standard error of the slope from the residual variance.
    let ss_res: Real = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = (y - my) - slope * (x - mx);
            r * r
        })
        .sum();
    let se = if points.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        Real::INFINITY
    };
    Ok((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_config_and_defaults() {
        let cfg = parse_config(
            "[model]\nkind = \"shamrock\"\nsize = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.model.kind, ModelKind::Shamrock);
        assert_eq!(cfg.model.size, 2);
        assert_eq!(cfg.model.coupling, 6.0);
        assert_eq!(cfg.model.asymmetry, 0.2);
        assert_eq!(cfg.model.transverse_field, 0.5);
        assert_eq!(cfg.sampling.beta, 20.0);
        assert_eq!(cfg.sampling.runs, 100);
    }

    #[test]
    fn parse_rejects_unknown_fields_with_line() {
        let err = parse_config("[model]\nkind = \"ring\"\nsize = 4\ntypo = 1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert!(line >= 3, "line {line}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_instance_covers_all_kinds() {
        for (kind, size, n) in [
            (ModelKind::Ring, 5, 5),
            (ModelKind::Shamrock, 2, 5),
            (ModelKind::Ferromagnet, 4, 4),
        ] {
            let cfg = ModelConfig {
                kind,
                size,
                coupling: 6.0,
                asymmetry: 0.2,
                classical_scale: 1.0,
                transverse_field: 0.1,
            };
            let (p, u, d) = build_instance(&cfg).unwrap();
            assert_eq!(p.n_spins(), n);
            assert_eq!(u.len(), n);
            assert_eq!(d.to_mask(), (1u32 << n) - 1);
        }
    }

    #[test]
    fn spectrum_and_perturb_emit_one_data_row() {
        let cfg = parse_config(
            "[model]\nkind = \"ring\"\nsize = 4\nasymmetry = 0.5\ntransverse_field = 0.1\n",
        )
        .unwrap();
        let csv = run_spectrum(&cfg).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("n_spins,"));
        let csv = run_perturb(&cfg).unwrap();
        assert_eq!(csv.lines().count(), 2);
        let row = csv.lines().nth(1).unwrap();
        // Ring N=4: 4! flip orderings collapsing into 2 channels.
        assert!(row.starts_with("4,"), "{row}");
        assert!(row.contains(",24,2,"), "{row}");
    }

    #[test]
    fn escape_ensemble_summarizes_chains() {
        let cfg = parse_config(
            "[model]\nkind = \"ring\"\nsize = 3\nasymmetry = 0.5\ntransverse_field = 0.7\n\
             [sampling]\nbeta = 6.0\nsweeps = 100000\nruns = 8\n",
        )
        .unwrap();
        let (p, u, d) = build_instance(&cfg.model).unwrap();
        let (results, summary) = escape_ensemble(&p, &u, &d, &cfg.sampling, 1).unwrap();
        assert_eq!(results.len(), 8);
        assert_eq!(summary.runs, 8);
        assert_eq!(summary.timeouts, 0, "chains timed out: {results:?}");
        assert!(summary.mean_sweeps >= 1.0);
        assert!(summary.stderr_sweeps.is_finite());
    }

    #[test]
    fn log_log_slope_recovers_power_law() {
        let pts: Vec<(Real, Real)> = (1..=6)
            .map(|k| {
                let x = (2.0 as Real).powi(k);
                (x, 3.5 * x.powf(1.25))
            })
            .collect();
        let (slope, se) = log_log_slope(&pts).unwrap();
        assert!((slope - 1.25).abs() < 1e-12);
        assert!(se < 1e-12);
        assert!(log_log_slope(&pts[..2]).is_err());
    }
}
