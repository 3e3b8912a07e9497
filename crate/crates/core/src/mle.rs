//! Maximum-likelihood state reconstruction via the quasilinear likelihood
//! equation, and chi-squared adequacy testing of the fitted model.
//!
//! With per-configuration POVMs the normalization operator collapses to
//! I = n_tot E, so the likelihood equation I psi = J(psi) psi becomes a
//! fixed point of psi -> J(psi) psi / n_tot, J(psi) = sum_j (k_j/p_j) Lambda_j.
//! The solver damps that map and renormalizes the purified state at every
//! step; the returned psi is a gauge representative (compare through the
//! density matrix or fidelity only).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::measurement::MeasurementModel;
use crate::states::PurifiedState;
use crate::stats::chi2_p_value;
use crate::{C64, Error, Result};

/// Probability floor inside J, preventing division blowup for outcomes that
/// momentarily have vanishing model probability during iteration.
pub const PROB_FLOOR: f64 = 1e-12;

/// Counts below this are treated as "no observation". Real records hold
/// integers; exact-expectation records can carry rounding crumbs of order
/// n * 1e-16 on ports whose true probability is zero.
pub const COUNT_EPS: f64 = 1e-6;

/// Observed counts for one plate configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigCounts {
    /// Trials for this configuration (both outcomes observed over them).
    pub n: f64,
    /// Counts at detector V (operator Lambda_0).
    pub k0: f64,
    /// Counts at detector H (operator Lambda_1).
    pub k1: f64,
}

/// Counts per configuration plus the measurement model used to interpret
/// them. Counts are stored as f64 so exact-expectation records (k = n*p)
/// remain representable; simulated records always hold integers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    counts: Vec<ConfigCounts>,
    model: MeasurementModel,
}

impl ExperimentRecord {
    pub fn new(counts: Vec<ConfigCounts>, model: MeasurementModel) -> Result<Self> {
        if counts.len() != model.n_configs() {
            return Err(Error::InvalidRecord(format!(
                "{} count entries for {} model configurations",
                counts.len(),
                model.n_configs()
            )));
        }
        for (i, c) in counts.iter().enumerate() {
            if c.k0 < 0.0 || c.k1 < 0.0 || c.n <= 0.0 {
                return Err(Error::InvalidRecord(format!(
                    "config {i}: counts must be non-negative with positive trials"
                )));
            }
            if ((c.k0 + c.k1) - c.n).abs() > 1e-9 * c.n.max(1.0) {
                return Err(Error::InvalidRecord(format!(
                    "config {i}: k0 + k1 = {} does not sum to n = {}",
                    c.k0 + c.k1,
                    c.n
                )));
            }
        }
        Ok(ExperimentRecord { counts, model })
    }

    /// Record whose counts equal the exact expectations n_j p_j(psi).
    pub fn exact_expectations(
        psi: &PurifiedState,
        model: MeasurementModel,
        trials: &[u64],
    ) -> Result<Self> {
        let probs = outcome_probabilities(psi, &model);
        let counts = trials
            .iter()
            .enumerate()
            .map(|(i, &n)| ConfigCounts {
                n: n as f64,
                k0: n as f64 * probs[2 * i],
                k1: n as f64 * probs[2 * i + 1],
            })
            .collect();
        Self::new(counts, model)
    }

    /// Same counts reinterpreted under a different measurement model.
    pub fn with_model(&self, model: MeasurementModel) -> Result<Self> {
        Self::new(self.counts.clone(), model)
    }

    pub fn counts(&self) -> &[ConfigCounts] {
        &self.counts
    }

    pub fn model(&self) -> &MeasurementModel {
        &self.model
    }

    pub fn n_tot(&self) -> f64 {
        self.counts.iter().map(|c| c.n).sum()
    }

    /// (k_j, n_j) flattened in the model's (config, outcome) order.
    pub fn flat_counts(&self) -> Vec<(f64, f64)> {
        self.counts
            .iter()
            .flat_map(|c| [(c.k0, c.n), (c.k1, c.n)])
            .collect()
    }
}

/// Solver controls for [`mle_reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Damping of the fixed-point map (1.0 is the undamped map).
    pub damping: f64,
    /// Stop when the max-entry step falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    /// Seed of the Gaussian start point.
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iterations: 100_000,
            seed: 0,
        }
    }
}

/// Reconstruction output; `psi_hat` is one gauge representative.
#[derive(Debug, Clone)]
pub struct MleResult {
    pub psi_hat: PurifiedState,
    pub iterations: usize,
    pub converged: bool,
    pub final_step_norm: f64,
    /// sum_j k_j ln p_j at the returned state.
    pub log_likelihood: f64,
}

/// Chi-squared adequacy report for a fitted record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquaredReport {
    pub chi2: f64,
    /// Degrees of freedom nu = l*s - nu_p - nu_norm.
    pub nu: usize,
    /// Upper-tail probability of chi2 under chi-squared(nu).
    pub p_value: f64,
    /// State parameter count (2s - r) r - 1.
    pub nu_p: usize,
    /// Normalization conditions, l for independent per-config POVMs.
    pub nu_norm: usize,
}

/// p_j = Tr(psi psi† Lambda_j) for every operator, (config, outcome) order.
/// Each per-config pair sums to 1 by POVM closure.
pub fn outcome_probabilities(psi: &PurifiedState, model: &MeasurementModel) -> Vec<f64> {
    model
        .operators()
        .map(|op| operator_probability(psi.psi(), op))
        .collect()
}

fn operator_probability(psi: &DMatrix<C64>, op: &DMatrix<C64>) -> f64 {
    // Tr(psi psi† L) = sum over columns of col† L col; real for Hermitian L
    let mut p = 0.0;
    for col in psi.column_iter() {
        p += (col.adjoint() * op * col)[(0, 0)].re;
    }
    p
}

fn log_likelihood(probs: &[f64], counts: &[(f64, f64)]) -> f64 {
    probs
        .iter()
        .zip(counts)
        .map(|(&p, &(k, _))| if k > COUNT_EPS { k * p.max(1e-300).ln() } else { 0.0 })
        .sum()
}

/// Reconstructs a rank-r purified state from observed counts by damped
/// fixed-point iteration of the quasilinear likelihood equation.
///
/// Steps that would lower the log-likelihood are backtracked by halving the
/// damping, so the likelihood is non-decreasing across accepted iterations.
/// Non-convergence within `max_iterations` is reported through the
/// `converged` flag, not an error; an outcome with observed counts but
/// persistently vanishing model probability is a degenerate-model error.
pub fn mle_reconstruct(
    record: &ExperimentRecord,
    r: usize,
    options: &MleOptions,
) -> Result<MleResult> {
    mle_impl(record, r, options, None)
}

/// [`mle_reconstruct`] that also returns the accepted log-likelihood trace.
pub fn mle_reconstruct_traced(
    record: &ExperimentRecord,
    r: usize,
    options: &MleOptions,
) -> Result<(MleResult, Vec<f64>)> {
    let mut trace = Vec::new();
    let result = mle_impl(record, r, options, Some(&mut trace))?;
    Ok((result, trace))
}

fn mle_impl(
    record: &ExperimentRecord,
    r: usize,
    options: &MleOptions,
    mut ll_trace: Option<&mut Vec<f64>>,
) -> Result<MleResult> {
    let s = record.model().dim();
    let counts = record.flat_counts();
    let n_tot = record.n_tot();
    let operators: Vec<&DMatrix<C64>> = record.model().operators().collect();

    let mut psi = random_start(s, r, options.seed);
    let mut probs: Vec<f64> = operators
        .iter()
        .map(|op| operator_probability(&psi, op))
        .collect();
    let mut ll = log_likelihood(&probs, &counts);
    if let Some(trace) = ll_trace.as_deref_mut() {
        trace.push(ll);
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;

    while iterations < options.max_iterations {
        iterations += 1;

        // J(psi) = sum_j (k_j / p_j) Lambda_j with floored probabilities
        let mut j_op = DMatrix::<C64>::zeros(s, s);
        for ((&(k, _), op), &p) in counts.iter().zip(&operators).zip(&probs) {
            if k > COUNT_EPS {
                j_op += *op * C64::new(k / p.max(PROB_FLOOR), 0.0);
            }
        }

        let mut mu = options.damping;
        let (next, next_probs, next_ll, step) = loop {
            let mut candidate = &psi * C64::new(1.0 - mu, 0.0) + (&j_op * &psi) * C64::new(mu / n_tot, 0.0);
            let trace: f64 = candidate.iter().map(|a| a.norm_sqr()).sum();
            candidate /= C64::new(trace.sqrt(), 0.0);
            let cand_probs: Vec<f64> = operators
                .iter()
                .map(|op| operator_probability(&candidate, op))
                .collect();
            let cand_ll = log_likelihood(&cand_probs, &counts);
            if cand_ll >= ll - 1e-12 || mu < options.damping / 2_f64.powi(30) {
                let step = (&candidate - &psi).camax();
                break (candidate, cand_probs, cand_ll, step);
            }
            mu /= 2.0;
        };

        psi = next;
        probs = next_probs;
        ll = next_ll;
        step_norm = step;
        if let Some(trace) = ll_trace.as_deref_mut() {
            trace.push(ll);
        }
        if step_norm < options.tol {
            converged = true;
            break;
        }
    }

    // an observed outcome whose fitted probability stays at zero cannot be
    // explained by this model at all
    for (&p, &(k, _)) in probs.iter().zip(&counts) {
        if k > COUNT_EPS && p < PROB_FLOOR {
            return Err(Error::DegenerateModel(format!(
                "outcome with {k} observed counts has fitted probability {p}"
            )));
        }
    }

    Ok(MleResult {
        psi_hat: PurifiedState::new(psi)
            .expect("iteration renormalizes the purified state every step"),
        iterations,
        converged,
        final_step_norm: step_norm,
        log_likelihood: ll,
    })
}

fn random_start(s: usize, r: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut psi = DMatrix::from_fn(s, r, |_, _| {
        C64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        )
    });
    let trace: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    psi /= C64::new(trace.sqrt(), 0.0);
    psi
}

/// chi2 = sum_j (k_j - n_j p_j)^2 / (n_j p_j) at the reconstructed state,
/// with nu = l*s - nu_p - nu_norm degrees of freedom. Cells with vanishing
/// expectation contribute zero when no counts were observed there and raise
/// a degenerate-model error otherwise.
pub fn chi_squared_test(psi_hat: &PurifiedState, record: &ExperimentRecord) -> Result<ChiSquaredReport> {
    let s = record.model().dim();
    let l = record.model().n_configs();
    let r = psi_hat.rank();
    let nu_p = (2 * s - r) * r - 1;
    let nu_norm = l;
    let nu_signed = (l * s) as i64 - nu_p as i64 - nu_norm as i64;
    if nu_signed <= 0 {
        return Err(Error::InvalidDof { nu: nu_signed });
    }
    let nu = nu_signed as usize;

    let probs = outcome_probabilities(psi_hat, record.model());
    let mut chi2 = 0.0;
    for (&p, &(k, n)) in probs.iter().zip(&record.flat_counts()) {
        let expected = n * p;
        if expected < PROB_FLOOR {
            if k > COUNT_EPS {
                return Err(Error::DegenerateModel(format!(
                    "cell with {k} observed counts has vanishing expectation"
                )));
            }
            continue;
        }
        chi2 += (k - expected) * (k - expected) / expected;
    }

    Ok(ChiSquaredReport {
        chi2,
        nu,
        p_value: chi2_p_value(chi2, nu),
        nu_p,
        nu_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{MeasurementModel, ModelKind, DEFAULT_SPECTRAL_SAMPLES};
    use crate::protocol::{cube_protocol, octahedron_protocol};
    use crate::states::{bloch_to_state, fidelity_pure, BlochAngles, PureState, PurifiedState};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const LAMBDA0: f64 = 0.65;

    fn mono_cube_model() -> MeasurementModel {
        MeasurementModel::with_order10_plates(
            ModelKind::IdealProjective,
            &cube_protocol().configs,
            LAMBDA0,
            0.0,
            1,
        )
        .unwrap()
    }

    fn fuzzy_cube_model(bandwidth: f64) -> MeasurementModel {
        MeasurementModel::with_order10_plates(
            ModelKind::Fuzzy,
            &cube_protocol().configs,
            LAMBDA0,
            bandwidth,
            DEFAULT_SPECTRAL_SAMPLES,
        )
        .unwrap()
    }

    fn plus_state() -> PurifiedState {
        PurifiedState::from_pure(&bloch_to_state(&BlochAngles::new(FRAC_PI_2, 0.0, 0.0)))
    }

    #[test]
    fn probabilities_of_eigenstate_and_unbiased_basis() {
        let model = mono_cube_model();
        let zero = PurifiedState::from_pure(
            &PureState::qubit(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap(),
        );
        let p = outcome_probabilities(&zero, &model);
        // config 3 measures sigma_z: eigenstate gives (1, 0)
        assert_relative_eq!(p[4], 1.0, epsilon = 1e-10);
        assert!(p[5].abs() < 1e-10);
        // config 1 measures sigma_x: unbiased for |0>
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-10);

        let plus = plus_state();
        let p = outcome_probabilities(&plus, &model);
        assert_relative_eq!(p[4], 0.5, epsilon = 1e-10);
        assert_relative_eq!(p[5], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn probabilities_of_maximally_mixed_state() {
        let model = fuzzy_cube_model(0.01);
        let psi = crate::states::purify(&crate::states::DensityMatrix::maximally_mixed(2), 2).unwrap();
        let probs = outcome_probabilities(&psi, &model);
        for (p, op) in probs.iter().zip(model.operators()) {
            assert_relative_eq!(*p, op.trace().re / 2.0, epsilon = 1e-12);
        }
        // per-config pairs sum to one
        for pair in probs.chunks(2) {
            assert_relative_eq!(pair[0] + pair[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_counts_are_a_fixed_point() {
        let model = fuzzy_cube_model(0.01);
        let psi = plus_state();
        let record =
            ExperimentRecord::exact_expectations(&psi, model.clone(), &[10_000; 3]).unwrap();

        // direct stationarity: J(psi) psi / n_tot == psi
        let probs = outcome_probabilities(&psi, &model);
        let mut j_op = nalgebra::DMatrix::<C64>::zeros(2, 2);
        for ((k, _), (p, op)) in record
            .flat_counts()
            .iter()
            .zip(probs.iter().zip(model.operators()))
        {
            j_op += op * C64::new(k / p, 0.0);
        }
        let mapped = &j_op * psi.psi() / C64::new(record.n_tot(), 0.0);
        assert!((mapped - psi.psi()).camax() < 1e-12);

        // reconstruction from a random start reaches the same state
        let result = mle_reconstruct(&record, 1, &MleOptions::default()).unwrap();
        assert!(result.converged);
        let f = fidelity_pure(
            &result.psi_hat.as_pure().unwrap(),
            &psi.as_pure().unwrap(),
        )
        .unwrap();
        assert!(f >= 1.0 - 1e-9, "fidelity {f}");
    }

    #[test]
    fn noiseless_plus_state_reconstruction_monochromatic() {
        let model = mono_cube_model();
        let psi = plus_state();
        let record =
            ExperimentRecord::exact_expectations(&psi, model, &[10_000; 3]).unwrap();
        let result = mle_reconstruct(&record, 1, &MleOptions::default()).unwrap();
        assert!(result.converged);
        let f = fidelity_pure(&result.psi_hat.as_pure().unwrap(), &psi.as_pure().unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-9, "fidelity {f}");
    }

    #[test]
    fn likelihood_never_decreases_across_accepted_steps() {
        // integer counts deliberately off the expectations
        let model = fuzzy_cube_model(0.01);
        let counts = vec![
            ConfigCounts { n: 1000.0, k0: 913.0, k1: 87.0 },
            ConfigCounts { n: 1000.0, k0: 530.0, k1: 470.0 },
            ConfigCounts { n: 1000.0, k0: 487.0, k1: 513.0 },
        ];
        let record = ExperimentRecord::new(counts, model).unwrap();
        let (result, trace) =
            mle_reconstruct_traced(&record, 1, &MleOptions::default()).unwrap();
        assert!(result.converged);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "LL decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn seed_robustness_on_well_conditioned_data() {
        let model = mono_cube_model();
        let truth = bloch_to_state(&BlochAngles::new(1.1, 0.7, 0.0));
        let record = ExperimentRecord::exact_expectations(
            &PurifiedState::from_pure(&truth),
            model,
            &[4000, 3000, 3000],
        )
        .unwrap();
        let mut states = Vec::new();
        for seed in 0..32u64 {
            let result = mle_reconstruct(
                &record,
                1,
                &MleOptions { seed, ..Default::default() },
            )
            .unwrap();
            assert!(result.converged, "seed {seed} did not converge");
            states.push(result.psi_hat.as_pure().unwrap());
        }
        for a in &states {
            for b in &states {
                assert!(fidelity_pure(a, b).unwrap() >= 1.0 - 1e-8);
            }
        }
    }

    #[test]
    fn rank2_reconstruction_of_mixed_state() {
        // counts from a slightly mixed state, reconstructed at r = 2
        let model = fuzzy_cube_model(0.01);
        let rho = crate::states::DensityMatrix::new(nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.6, 0.0),
                C64::new(0.18, 0.12),
                C64::new(0.18, -0.12),
                C64::new(0.4, 0.0),
            ],
        ))
        .unwrap();
        let psi = crate::states::purify(&rho, 2).unwrap();
        let record =
            ExperimentRecord::exact_expectations(&psi, model, &[20_000; 3]).unwrap();
        let result = mle_reconstruct(&record, 2, &MleOptions::default()).unwrap();
        assert!(result.converged);
        let back = crate::states::density_of(&result.psi_hat);
        assert!(
            (back.matrix() - rho.matrix()).camax() < 1e-5,
            "density deviation {}",
            (back.matrix() - rho.matrix()).camax()
        );
    }

    #[test]
    fn chi_squared_dof_and_exact_fit() {
        let model = fuzzy_cube_model(0.01);
        let psi = plus_state();
        let record =
            ExperimentRecord::exact_expectations(&psi, model, &[1000; 3]).unwrap();
        let report = chi_squared_test(&psi, &record).unwrap();
        // cube protocol at r = 1: nu = 6 - 2 - 3 = 1
        assert_eq!(report.nu, 1);
        assert_eq!(report.nu_p, 2);
        assert_eq!(report.nu_norm, 3);
        assert!(report.chi2.abs() < 1e-18);
        assert_relative_eq!(report.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chi_squared_octahedron_dof() {
        let model = MeasurementModel::with_order10_plates(
            ModelKind::Fuzzy,
            &octahedron_protocol().configs,
            LAMBDA0,
            0.01,
            63,
        )
        .unwrap();
        let psi = plus_state();
        let record = ExperimentRecord::exact_expectations(&psi, model, &[500; 4]).unwrap();
        let report = chi_squared_test(&psi, &record).unwrap();
        assert_eq!(report.nu, 2); // 8 - 2 - 4
    }

    #[test]
    fn chi_squared_rank2_cube_is_overparameterized() {
        let model = fuzzy_cube_model(0.01);
        let psi = crate::states::purify(&crate::states::DensityMatrix::maximally_mixed(2), 2).unwrap();
        let record = ExperimentRecord::exact_expectations(&psi, model, &[1000; 3]).unwrap();
        // nu = 6 - 5 - 3 < 0 must be reported, not clamped
        assert!(matches!(
            chi_squared_test(&psi, &record),
            Err(Error::InvalidDof { .. })
        ));
    }

    #[test]
    fn record_validation() {
        let model = mono_cube_model();
        // wrong config count
        assert!(ExperimentRecord::new(
            vec![ConfigCounts { n: 10.0, k0: 5.0, k1: 5.0 }],
            model.clone()
        )
        .is_err());
        // counts not summing to trials
        assert!(ExperimentRecord::new(
            vec![
                ConfigCounts { n: 10.0, k0: 5.0, k1: 4.0 },
                ConfigCounts { n: 10.0, k0: 5.0, k1: 5.0 },
                ConfigCounts { n: 10.0, k0: 5.0, k1: 5.0 },
            ],
            model
        )
        .is_err());
    }

    #[test]
    fn degenerate_observation_raises() {
        // monochromatic sigma_z config cannot explain counts in the dark port
        // of an eigenstate when the other two configs pin the state there
        let model = mono_cube_model();
        let psi = PurifiedState::from_pure(
            &PureState::qubit(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap(),
        );
        let mut record = ExperimentRecord::exact_expectations(&psi, model.clone(), &[1000; 3])
            .unwrap()
            .counts()
            .to_vec();
        // inject impossible counts: the z-config dark port fires
        record[2] = ConfigCounts { n: 1000.0, k0: 0.0, k1: 1000.0 };
        let record = ExperimentRecord::new(record, model).unwrap();
        let result = mle_reconstruct(&record, 1, &MleOptions::default());
        // either the solver flags the impossible cell or it converges to the
        // opposite pole; both are legitimate, silence is not
        if let Ok(res) = result {
            let probs = outcome_probabilities(&res.psi_hat, record.model());
            assert!(probs[5] > 0.1, "fit ignored the contradictory counts");
        }
    }
}
