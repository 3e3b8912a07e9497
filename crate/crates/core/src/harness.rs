//! Seeded Monte Carlo harness: count simulation under the true fuzzy model,
//! reconstruction under competing models, Bloch-sphere loss maps and
//! bandwidth sweeps.
//!
//! Reproducibility contract: every random draw comes from a ChaCha12 stream
//! whose 32-byte seed is SHA-256 of the master seed plus a role tag and the
//! (experiment, config/model) indices. Experiments are independent work
//! items executed in parallel; results are collected in experiment order, so
//! identical plans produce bit-identical summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::fidelity::{loss_function, LossSpectrum};
use crate::measurement::{measurement_matrix, MeasurementModel, ModelKind};
use crate::mle::{
    chi_squared_test, mle_reconstruct, ConfigCounts, ExperimentRecord, MleOptions,
};
use crate::optics::PlateConfig;
use crate::protocol::Protocol;
use crate::states::{bloch_to_state, fidelity_pure, BlochAngles, PureState};
use crate::stats::{quantiles, Histogram};
use crate::{Error, Result};

/// Stream-role tags for the counter-based seed split.
const TAG_COUNTS: u64 = 1;
const TAG_MLE_INIT: u64 = 2;

/// ChaCha12 stream derived from the master seed and a role/index path.
pub fn substream_rng(master_seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    for t in tags {
        hasher.update(t.to_le_bytes());
    }
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

/// One Monte Carlo study: a true state measured under a fuzzy model and
/// reconstructed under each listed model kind.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub true_state: PureState,
    pub protocol: Protocol,
    pub lambda0_um: f64,
    /// Bandwidth of the true (data-generating) fuzzy model.
    pub true_bandwidth_um: f64,
    /// Spectral quadrature nodes of the fuzzy models.
    pub spectral_samples: usize,
    pub reconstruction_models: Vec<ModelKind>,
    pub n_tot: u64,
    pub n_experiments: usize,
    pub seed: u64,
}

/// Flat per-reconstruction outcome, one CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOutcome {
    pub experiment: usize,
    pub model: ModelKind,
    pub fidelity: f64,
    pub infidelity: f64,
    pub chi2: f64,
    pub p_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Aggregates for one reconstruction model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStats {
    pub kind: ModelKind,
    /// 25 / 50 / 75% fidelity quantiles over converged reconstructions.
    pub fidelity_quartiles: [f64; 3],
    pub mean_infidelity: f64,
    pub mean_chi2: f64,
    pub infidelity_hist: Histogram,
    pub chi2_hist: Histogram,
    pub non_converged: usize,
}

/// Full output of [`run_comparison`].
#[derive(Debug, Clone)]
pub struct ComparisonSummary {
    pub outcomes: Vec<ExperimentOutcome>,
    pub per_model: Vec<ModelStats>,
    /// Information-matrix reference at the true state under the true model.
    pub theory: LossSpectrum,
    pub n_tot: u64,
    pub n_experiments: usize,
    pub seed: u64,
}

/// Draws one experiment's counts: per configuration, k0 ~ Binomial(n, p0)
/// with p0 from the true operators, k1 = n - k0. Deterministic under
/// (seed, experiment) with independent per-config substreams.
pub fn simulate_counts(
    true_state: &PureState,
    true_model: &MeasurementModel,
    trials: &[u64],
    seed: u64,
    experiment: u64,
) -> Result<ExperimentRecord> {
    if trials.len() != true_model.n_configs() {
        return Err(Error::DimensionMismatch {
            expected: true_model.n_configs(),
            got: trials.len(),
        });
    }
    let psi = crate::states::PurifiedState::from_pure(true_state);
    let probs = crate::mle::outcome_probabilities(&psi, true_model);
    let counts = trials
        .iter()
        .enumerate()
        .map(|(cfg, &n)| {
            let p0 = probs[2 * cfg].clamp(0.0, 1.0);
            let mut rng = substream_rng(seed, &[TAG_COUNTS, experiment, cfg as u64]);
            let k0 = rand_distr::Binomial::new(n, p0)
                .expect("clamped probability")
                .sample(&mut rng);
            ConfigCounts {
                n: n as f64,
                k0: k0 as f64,
                k1: (n - k0) as f64,
            }
        })
        .collect();
    ExperimentRecord::new(counts, true_model.clone())
}

/// Runs the full plan: simulate counts under the true fuzzy model, then
/// reconstruct every experiment once per listed model (rank 1), recording
/// fidelity to the true state and the chi-squared adequacy report.
/// Non-converged reconstructions are kept in the outcome rows and counted,
/// but excluded from the quantile statistics.
pub fn run_comparison(plan: &SimulationPlan) -> Result<ComparisonSummary> {
    let configs = &plan.protocol.configs;
    let true_model = MeasurementModel::with_order10_plates(
        ModelKind::Fuzzy,
        configs,
        plan.lambda0_um,
        plan.true_bandwidth_um,
        plan.spectral_samples,
    )?;
    let recon_models: Vec<MeasurementModel> = plan
        .reconstruction_models
        .iter()
        .map(|kind| {
            MeasurementModel::with_order10_plates(
                *kind,
                configs,
                plan.lambda0_um,
                plan.true_bandwidth_um,
                plan.spectral_samples,
            )
        })
        .collect::<Result<_>>()?;

    let trials = plan
        .protocol
        .clone()
        .allocate_trials(plan.n_tot)
        .trials_per_config;

    let (_, theory) = loss_function(&plan.true_state, &true_model, plan.n_tot as f64)?;

    let outcomes: Vec<ExperimentOutcome> = (0..plan.n_experiments)
        .into_par_iter()
        .map(|exp| -> Result<Vec<ExperimentOutcome>> {
            let record = simulate_counts(
                &plan.true_state,
                &true_model,
                &trials,
                plan.seed,
                exp as u64,
            )?;
            let mut rows = Vec::with_capacity(recon_models.len());
            for (mi, model) in recon_models.iter().enumerate() {
                let rec = record.with_model(model.clone())?;
                let init_seed = substream_rng(plan.seed, &[TAG_MLE_INIT, exp as u64, mi as u64])
                    .gen::<u64>();
                let options = MleOptions {
                    seed: init_seed,
                    ..Default::default()
                };
                let result = mle_reconstruct(&rec, 1, &options)?;
                let fidelity = fidelity_pure(
                    &result.psi_hat.as_pure().expect("rank-1 reconstruction"),
                    &plan.true_state,
                )?;
                let report = chi_squared_test(&result.psi_hat, &rec)?;
                rows.push(ExperimentOutcome {
                    experiment: exp,
                    model: plan.reconstruction_models[mi],
                    fidelity,
                    infidelity: 1.0 - fidelity,
                    chi2: report.chi2,
                    p_value: report.p_value,
                    converged: result.converged,
                    iterations: result.iterations,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let per_model = plan
        .reconstruction_models
        .iter()
        .map(|&kind| summarize_model(kind, &outcomes))
        .collect();

    Ok(ComparisonSummary {
        outcomes,
        per_model,
        theory,
        n_tot: plan.n_tot,
        n_experiments: plan.n_experiments,
        seed: plan.seed,
    })
}

fn summarize_model(kind: ModelKind, outcomes: &[ExperimentOutcome]) -> ModelStats {
    let rows: Vec<&ExperimentOutcome> = outcomes.iter().filter(|o| o.model == kind).collect();
    let converged: Vec<&&ExperimentOutcome> = rows.iter().filter(|o| o.converged).collect();
    let fidelities: Vec<f64> = converged.iter().map(|o| o.fidelity).collect();
    let infidelities: Vec<f64> = converged.iter().map(|o| o.infidelity).collect();
    let chi2s: Vec<f64> = converged.iter().map(|o| o.chi2).collect();

    let quartiles = if fidelities.is_empty() {
        [f64::NAN; 3]
    } else {
        let q = quantiles(&fidelities, &[0.25, 0.5, 0.75]);
        [q[0], q[1], q[2]]
    };

    // histograms cover every experiment so their mass equals the run size
    let all_inf: Vec<f64> = rows.iter().map(|o| o.infidelity).collect();
    let all_chi2: Vec<f64> = rows.iter().map(|o| o.chi2).collect();
    let inf_hi = all_inf.iter().copied().fold(f64::MIN, f64::max).max(1e-12);
    let chi2_hi = all_chi2.iter().copied().fold(f64::MIN, f64::max).max(1.0);

    ModelStats {
        kind,
        fidelity_quartiles: quartiles,
        mean_infidelity: crate::stats::mean(&infidelities),
        mean_chi2: crate::stats::mean(&chi2s),
        infidelity_hist: Histogram::new(&all_inf, 0.0, inf_hi, 50),
        chi2_hist: Histogram::new(&all_chi2, 0.0, chi2_hi, 50),
        non_converged: rows.len() - converged.len(),
    }
}

/// Rectangular evaluation grid over the Bloch sphere, endpoints included in
/// theta, phi half-open on [0, 2 pi).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub theta_steps: usize,
    pub phi_steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            theta_steps: 50,
            phi_steps: 100,
        }
    }
}

/// A located loss value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub theta: f64,
    pub phi: f64,
    pub loss: f64,
}

/// Loss map over the grid plus locally refined extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    pub points: Vec<LossPoint>,
    pub min: LossPoint,
    pub max: LossPoint,
}

/// Reference sample size for loss evaluation; L itself is n-independent.
const LOSS_REFERENCE_N: f64 = 1e4;

/// Evaluates the loss function over the grid and refines both extremes by
/// three rounds of per-axis golden-section search within one grid cell.
pub fn loss_map(
    configs: &[PlateConfig],
    lambda0_um: f64,
    bandwidth_um: f64,
    spectral_samples: usize,
    grid: &GridSpec,
) -> Result<LossMap> {
    if grid.theta_steps < 2 || grid.phi_steps < 1 {
        return Err(Error::InvalidGrid(
            "loss map needs at least 2 theta and 1 phi steps".into(),
        ));
    }
    let model = MeasurementModel::with_order10_plates(
        ModelKind::Fuzzy,
        configs,
        lambda0_um,
        bandwidth_um,
        spectral_samples,
    )?;

    let thetas: Vec<f64> = (0..grid.theta_steps)
        .map(|i| std::f64::consts::PI * i as f64 / (grid.theta_steps - 1) as f64)
        .collect();
    let phis: Vec<f64> = (0..grid.phi_steps)
        .map(|j| std::f64::consts::TAU * j as f64 / grid.phi_steps as f64)
        .collect();

    let points: Vec<LossPoint> = thetas
        .par_iter()
        .map(|&theta| -> Result<Vec<LossPoint>> {
            phis.iter()
                .map(|&phi| {
                    let state = bloch_to_state(&BlochAngles::new(theta, phi, 0.0));
                    let (loss, _) = loss_function(&state, &model, LOSS_REFERENCE_N)?;
                    Ok(LossPoint { theta, phi, loss })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let eval = |theta: f64, phi: f64| -> Result<f64> {
        let state = bloch_to_state(&BlochAngles::new(theta, phi, 0.0));
        Ok(loss_function(&state, &model, LOSS_REFERENCE_N)?.0)
    };

    let min_seed = points
        .iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .copied()
        .expect("non-empty grid");
    let max_seed = points
        .iter()
        .max_by(|a, b| a.loss.total_cmp(&b.loss))
        .copied()
        .expect("non-empty grid");

    let d_theta = std::f64::consts::PI / (grid.theta_steps - 1) as f64;
    let d_phi = std::f64::consts::TAU / grid.phi_steps as f64;
    let min = refine_extreme(&eval, min_seed, d_theta, d_phi, false)?;
    let max = refine_extreme(&eval, max_seed, d_theta, d_phi, true)?;

    Ok(LossMap { points, min, max })
}

/// Three rounds of coordinate descent, golden-section on each axis within
/// one grid step of the current best point.
fn refine_extreme<F: Fn(f64, f64) -> Result<f64>>(
    eval: &F,
    seed: LossPoint,
    d_theta: f64,
    d_phi: f64,
    maximize: bool,
) -> Result<LossPoint> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut best = seed;
    for _ in 0..3 {
        let (theta, value) = golden_section(
            |t| eval(t, best.phi).map(|l| sign * l),
            (best.theta - d_theta).max(0.0),
            (best.theta + d_theta).min(std::f64::consts::PI),
            1e-6,
        )?;
        best = LossPoint {
            theta,
            phi: best.phi,
            loss: sign * value,
        };
        let (phi, value) = golden_section(
            |p| eval(best.theta, p).map(|l| sign * l),
            best.phi - d_phi,
            best.phi + d_phi,
            1e-6,
        )?;
        best = LossPoint {
            theta: best.theta,
            phi,
            loss: sign * value,
        };
    }
    // keep the better of seed and refined (the search never regresses, but
    // guard against a flat bracket returning its midpoint)
    if sign * best.loss <= sign * seed.loss {
        Ok(best)
    } else {
        Ok(seed)
    }
}

fn golden_section<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// One row of a bandwidth sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub bandwidth_um: f64,
    pub loss_min: f64,
    pub loss_max: f64,
    pub condition_number: f64,
}

/// Loss-map extremes and measurement-matrix condition number per bandwidth.
pub fn bandwidth_sweep(
    configs: &[PlateConfig],
    lambda0_um: f64,
    bandwidths_um: &[f64],
    spectral_samples: usize,
    grid: &GridSpec,
) -> Result<Vec<SweepPoint>> {
    bandwidths_um
        .iter()
        .map(|&bw| {
            let map = loss_map(configs, lambda0_um, bw, spectral_samples, grid)?;
            let model = MeasurementModel::with_order10_plates(
                ModelKind::Fuzzy,
                configs,
                lambda0_um,
                bw,
                spectral_samples,
            )?;
            let k = measurement_matrix(&model)?.condition_number();
            Ok(SweepPoint {
                bandwidth_um: bw,
                loss_min: map.min.loss,
                loss_max: map.max.loss,
                condition_number: k,
            })
        })
        .collect()
}
