//! Information-matrix fidelity theory.
//!
//! The purified amplitudes move to a real space of dimension 2rs,
//! v = (Re c; Im c), and each measurement operator to the symmetric matrix
//! (Re L, -Im L; Im L, Re L) of its r-fold block-diagonal replication. The
//! complete information matrix H = 2 sum_j n_j (L_j v)(L_j v)^T / p_j then
//! carries one eigenvalue 2 n_tot (the normalization direction), r^2 zeros
//! (the unitary gauge) and nu_P = (2s-r)r - 1 informative eigenvalues h_k.
//! Reconstruction infidelity is distributed as 1 - F = sum_k d_k xi_k^2 with
//! d_k = 1/(2 h_k), giving the sample-size-free loss L = n_tot * sum_k d_k.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::measurement::MeasurementModel;
use crate::states::{PureState, PurifiedState};
use crate::{C64, Error, Result};

/// Relative threshold classifying information-matrix eigenvalues: the unity
/// eigenvalue must sit within this of 2 n_tot, zeros below this times 2 n_tot.
pub const EIG_CLASS_REL: f64 = 1e-6;

/// Probabilities below this are degenerate points of H (0/0 terms).
pub const DEGENERATE_P: f64 = 1e-14;

/// Orthogonal perturbation applied when evaluating the loss at a state
/// where some operator probability vanishes exactly.
pub const DEGENERACY_NUDGE: f64 = 1e-5;

/// A purified state realified to (Re c; Im c), unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RealifiedState {
    v: DVector<f64>,
}

impl RealifiedState {
    pub fn from_purified(psi: &PurifiedState) -> Self {
        let c = psi.stacked();
        let n = c.len();
        let mut v = DVector::zeros(2 * n);
        for (i, a) in c.iter().enumerate() {
            v[i] = a.re;
            v[n + i] = a.im;
        }
        RealifiedState { v }
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }
}

/// Realifies a Hermitian operator for rank-r states: r-fold block-diagonal
/// replication followed by (Re, -Im; Im, Re). The result is symmetric with
/// the complex eigenvalues doubled in multiplicity.
pub fn realify_operator(op: &DMatrix<C64>, r: usize) -> DMatrix<f64> {
    let s = op.nrows();
    let rs = r * s;
    let mut out = DMatrix::zeros(2 * rs, 2 * rs);
    for block in 0..r {
        let o = block * s;
        for i in 0..s {
            for j in 0..s {
                let z = op[(i, j)];
                out[(o + i, o + j)] = z.re;
                out[(rs + o + i, rs + o + j)] = z.re;
                out[(o + i, rs + o + j)] = -z.im;
                out[(rs + o + i, o + j)] = z.im;
            }
        }
    }
    out
}

/// Complete information matrix H = 2 sum_j n_j (L_j v)(L_j v)^T / p_j.
///
/// `trials_per_config` lists n for each configuration (both operators of a
/// configuration share its trials). Terms where p_j vanishes together with
/// L_j v (the PSD 0/0 case at exact eigenstates) contribute nothing; a
/// vanishing p_j with a non-vanishing numerator is a degenerate model.
pub fn information_matrix(
    psi: &PurifiedState,
    model: &MeasurementModel,
    trials_per_config: &[f64],
) -> Result<DMatrix<f64>> {
    if trials_per_config.len() != model.n_configs() {
        return Err(Error::DimensionMismatch {
            expected: model.n_configs(),
            got: trials_per_config.len(),
        });
    }
    let r = psi.rank();
    let v = RealifiedState::from_purified(psi);
    let dim = v.v().len();
    let mut h = DMatrix::zeros(dim, dim);
    for (cfg, pair_n) in trials_per_config.iter().enumerate() {
        for op in model.pair(cfg) {
            let real_op = realify_operator(op, r);
            let lv = &real_op * v.v();
            let p = v.v().dot(&lv);
            if p < DEGENERATE_P {
                if lv.norm_squared() > 1e-10 {
                    return Err(Error::DegenerateModel(format!(
                        "config {cfg}: probability {p} vanishes with non-vanishing L v"
                    )));
                }
                continue;
            }
            let scale = 2.0 * pair_n / p;
            // rank-1 update h += scale * lv lv^T
            for i in 0..dim {
                for j in 0..dim {
                    h[(i, j)] += scale * lv[i] * lv[j];
                }
            }
        }
    }
    Ok(h)
}

/// Classified eigenvalues of an information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpectrum {
    /// The nu_P informative eigenvalues, descending.
    pub informative: Vec<f64>,
    /// d_k = 1 / (2 h_k), matching `informative`.
    pub d: Vec<f64>,
    /// The eigenvalue equal to 2 n_tot (within 1e-6 relative).
    pub unity: f64,
    /// The r^2 near-zero gauge eigenvalues.
    pub zeros: Vec<f64>,
    pub n_tot: f64,
}

impl LossSpectrum {
    /// Mean infidelity <1 - F> = sum_k d_k.
    pub fn sum_d(&self) -> f64 {
        self.d.iter().sum()
    }

    /// Variance of the infidelity, 2 sum_k d_k^2.
    pub fn infidelity_variance(&self) -> f64 {
        2.0 * self.d.iter().map(|d| d * d).sum::<f64>()
    }

    /// Loss function L = n_tot * <1 - F>.
    pub fn loss(&self) -> f64 {
        self.n_tot * self.sum_d()
    }
}

/// Splits the eigenvalues of H into {unity, gauge zeros, informative} and
/// checks the counts {1, r^2, nu_P}; anything else is a structure violation.
pub fn classify_spectrum(h: &DMatrix<f64>, n_tot: f64, r: usize) -> Result<LossSpectrum> {
    let s = h.nrows() / (2 * r);
    let nu_p = (2 * s - r) * r - 1;
    let mut eigs: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));

    let unity_band = EIG_CLASS_REL * 2.0 * n_tot;
    let mut unity = Vec::new();
    let mut zeros = Vec::new();
    let mut informative = Vec::new();
    for e in eigs {
        if (e - 2.0 * n_tot).abs() < unity_band {
            unity.push(e);
        } else if e < unity_band {
            zeros.push(e);
        } else {
            informative.push(e);
        }
    }
    if unity.len() != 1 || zeros.len() != r * r || informative.len() != nu_p {
        return Err(Error::EigenstructureViolation(format!(
            "got {} unity / {} zero / {} informative eigenvalues, expected 1 / {} / {}",
            unity.len(),
            zeros.len(),
            informative.len(),
            r * r,
            nu_p
        )));
    }
    let d = informative.iter().map(|h| 1.0 / (2.0 * h)).collect();
    Ok(LossSpectrum {
        informative,
        d,
        unity: unity[0],
        zeros,
        n_tot,
    })
}

/// Loss function L = n_tot <1 - F> of a pure state under a complete model,
/// with trials split equally across configurations.
///
/// L is independent of n_tot (d_k scale as 1/n); the value is computed at
/// the given n_tot and owes its meaning to that invariance. States where an
/// operator probability vanishes exactly (monochromatic eigenstates) are
/// nudged orthogonally by 1e-5 and evaluated there: the information matrix
/// is discontinuous at such points but its informative spectrum has a
/// direction-independent limit, which the nudge recovers to O(1e-5).
pub fn loss_function(
    state: &PureState,
    model: &MeasurementModel,
    n_tot: f64,
) -> Result<(f64, LossSpectrum)> {
    let psi = PurifiedState::from_pure(state);
    let trials = vec![n_tot / model.n_configs() as f64; model.n_configs()];

    let psi = if min_probability(&psi, model) < 1e-12 {
        nudged(state)
    } else {
        psi
    };
    let h = information_matrix(&psi, model, &trials)?;
    let spectrum = classify_spectrum(&h, n_tot, 1)?;
    Ok((spectrum.loss(), spectrum))
}

fn min_probability(psi: &PurifiedState, model: &MeasurementModel) -> f64 {
    crate::mle::outcome_probabilities(psi, model)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

fn nudged(state: &PureState) -> PurifiedState {
    let c = state.amplitudes();
    let mut perp = DVector::zeros(c.len());
    if c.len() == 2 {
        perp[0] = -c[1].conj();
        perp[1] = c[0].conj();
    } else {
        // Gram-Schmidt of the basis vector least aligned with the state
        let k = (0..c.len())
            .min_by(|&a, &b| c[a].norm_sqr().total_cmp(&c[b].norm_sqr()))
            .unwrap();
        perp[k] = C64::new(1.0, 0.0);
        let overlap = c.dotc(&perp);
        perp -= c * overlap;
        perp /= C64::new(perp.norm(), 0.0);
    }
    let nudged = c + perp * C64::new(DEGENERACY_NUDGE, 0.0);
    PurifiedState::from_pure(
        &PureState::normalized(nudged).expect("nudged state is non-zero"),
    )
}

/// Samples 1 - F = sum_k d_k xi_k^2 with independent standard normal xi.
pub fn infidelity_distribution(spectrum: &LossSpectrum, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| {
            spectrum
                .d
                .iter()
                .map(|d| {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    d * xi * xi
                })
                .sum()
        })
        .collect()
}
