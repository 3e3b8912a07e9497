//! Quantum state representations: pure states, Bloch-angle parameterization,
//! density matrices and their rank-r purifications.
//!
//! Purified states are `s x r` block matrices `psi` with `rho = psi psi†`;
//! the equivalent column vector `c` stacks the columns (second column under
//! the first). Purification carries a unitary gauge `psi -> psi V`, so state
//! equality is always judged through the density matrix or fidelity.

use nalgebra::{DMatrix, DVector};

use crate::{C64, Error, Result};

/// Absolute tolerance for norm / trace / Hermiticity validation.
pub const STATE_TOL: f64 = 1e-12;

/// Eigenvalues in [-EIG_CLIP, 0] are clipped to zero before square roots.
pub const EIG_CLIP: f64 = 1e-12;

/// Spherical angles of a pure qubit state plus an explicit global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAngles {
    /// Polar angle in [0, pi].
    pub theta: f64,
    /// Azimuthal angle in [0, 2*pi).
    pub phi: f64,
    /// Global phase, reported modulo 2*pi.
    pub chi: f64,
}

impl BlochAngles {
    /// Builds angles from arbitrary real inputs, folding them into the
    /// canonical ranges: theta into [0, pi] (reflecting phi when the polar
    /// angle wraps past pi), phi into [0, 2*pi), chi modulo 2*pi.
    pub fn new(theta: f64, phi: f64, chi: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let mut theta = theta.rem_euclid(tau);
        let mut phi = phi;
        if theta > std::f64::consts::PI {
            theta = tau - theta;
            phi += std::f64::consts::PI;
        }
        BlochAngles {
            theta,
            phi: phi.rem_euclid(tau),
            chi: chi.rem_euclid(tau),
        }
    }
}

/// A unit-norm vector state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Wraps an amplitude vector, requiring unit norm within [`STATE_TOL`].
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm {norm_sq} deviates from 1 beyond {STATE_TOL}"
            )));
        }
        Ok(PureState { amplitudes })
    }

    /// Normalizes an arbitrary non-zero vector into a state.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("cannot normalize the zero vector".into()));
        }
        Ok(PureState {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    /// Two-level state from a pair of amplitudes.
    pub fn qubit(c0: C64, c1: C64) -> Result<Self> {
        Self::new(DVector::from_vec(vec![c0, c1]))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// Rank-1 projector |psi><psi|.
    pub fn projector(&self) -> DMatrix<C64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Bloch vector (x, y, z) of a qubit state.
    pub fn bloch_vector(&self) -> [f64; 3] {
        assert_eq!(self.dim(), 2, "bloch_vector is defined for qubits");
        let c0 = self.amplitudes[0];
        let c1 = self.amplitudes[1];
        let cross = c0.conj() * c1;
        [
            2.0 * cross.re,
            2.0 * cross.im,
            c0.norm_sqr() - c1.norm_sqr(),
        ]
    }
}

/// exp(i*chi) * (cos(theta/2), sin(theta/2) * exp(i*phi)).
pub fn bloch_to_state(angles: &BlochAngles) -> PureState {
    let half = angles.theta / 2.0;
    let phase = C64::from_polar(1.0, angles.chi);
    PureState {
        amplitudes: DVector::from_vec(vec![
            phase * C64::new(half.cos(), 0.0),
            phase * C64::from_polar(1.0, angles.phi) * C64::new(half.sin(), 0.0),
        ]),
    }
}

/// Fidelity |<a|b>|^2 between two vector states.
pub fn fidelity_pure(a: &PureState, b: &PureState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.amplitudes.dotc(&b.amplitudes).norm_sqr())
}

/// A Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (eigenvalues >= -1e-12).
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let herm_dev = (&matrix - matrix.adjoint()).camax();
        if herm_dev > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity deviation {herm_dev} beyond {STATE_TOL}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {trace} deviates from 1 beyond {STATE_TOL}"
            )));
        }
        let min_eig = hermitian_eigenvalues(&matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -EIG_CLIP {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig} below -{EIG_CLIP}"
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        DensityMatrix {
            matrix: state.projector(),
        }
    }

    /// Maximally mixed state E/s.
    pub fn maximally_mixed(s: usize) -> Self {
        DensityMatrix {
            matrix: DMatrix::from_diagonal_element(s, s, C64::new(1.0 / s as f64, 0.0)),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// An `s x r` purification block matrix with Tr(psi psi†) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedState {
    psi: DMatrix<C64>,
}

impl PurifiedState {
    pub fn new(psi: DMatrix<C64>) -> Result<Self> {
        let trace: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (trace - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "Tr(psi psi+) = {trace} deviates from 1 beyond {STATE_TOL}"
            )));
        }
        Ok(PurifiedState { psi })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let s = state.dim();
        PurifiedState {
            psi: DMatrix::from_column_slice(s, 1, state.amplitudes().as_slice()),
        }
    }

    pub fn psi(&self) -> &DMatrix<C64> {
        &self.psi
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    /// Column-stacked amplitude vector c (second column under the first).
    pub fn stacked(&self) -> DVector<C64> {
        DVector::from_column_slice(self.psi.as_slice())
    }

    /// Inverse of [`stacked`](Self::stacked): reshape a length s*r vector.
    pub fn from_stacked(c: &DVector<C64>, s: usize, r: usize) -> Result<Self> {
        if c.len() != s * r {
            return Err(Error::DimensionMismatch {
                expected: s * r,
                got: c.len(),
            });
        }
        Self::new(DMatrix::from_column_slice(s, r, c.as_slice()))
    }

    /// The underlying vector state when r = 1.
    pub fn as_pure(&self) -> Option<PureState> {
        (self.rank() == 1).then(|| PureState {
            amplitudes: DVector::from_column_slice(self.psi.as_slice()),
        })
    }
}

/// Eigenvalues of a Hermitian matrix (unordered).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Eigendecomposition of a Hermitian matrix in a deterministic order:
/// eigenvalues descending, each eigenvector's phase fixed so its
/// largest-magnitude entry is real positive, ties broken by lexicographic
/// comparison of (re, im) eigenvector components.
pub fn hermitian_eigen_sorted(m: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let eig = m.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<C64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &val)| {
            let mut v: DVector<C64> = eig.eigenvectors.column(i).into_owned();
            let lead = v
                .iter()
                .copied()
                .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
                .unwrap_or_else(|| C64::new(1.0, 0.0));
            if lead.norm() > 0.0 {
                let phase = lead / C64::new(lead.norm(), 0.0);
                v /= phase;
            }
            (val, v)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        lb.total_cmp(la).then_with(|| {
            for (a, b) in va.iter().zip(vb.iter()) {
                let ord = a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    pairs
}

/// Builds the rank-r purification with columns sqrt(lambda_i) v_i ordered by
/// descending eigenvalue. Errors when r is smaller than the numerical rank
/// (eigenvalues above [`EIG_CLIP`]).
pub fn purify(rho: &DensityMatrix, r: usize) -> Result<PurifiedState> {
    let s = rho.dim();
    let pairs = hermitian_eigen_sorted(rho.matrix());
    let numerical_rank = pairs.iter().filter(|(l, _)| *l > EIG_CLIP).count();
    if r < numerical_rank {
        return Err(Error::RankTooSmall {
            required: numerical_rank,
            requested: r,
        });
    }
    let mut psi = DMatrix::zeros(s, r);
    for (col, (lambda, v)) in pairs.into_iter().take(r).enumerate() {
        let clipped = if lambda < 0.0 { 0.0 } else { lambda };
        psi.set_column(col, &(v * C64::new(clipped.sqrt(), 0.0)));
    }
    PurifiedState::new(psi)
}

/// rho = psi psi†.
pub fn density_of(psi: &PurifiedState) -> DensityMatrix {
    DensityMatrix {
        matrix: psi.psi() * psi.psi().adjoint(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn bloch_poles_and_equator() {
        let north = bloch_to_state(&BlochAngles::new(0.0, 0.0, 0.0));
        assert_relative_eq!(north.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(north.amplitudes()[1].norm(), 0.0, epsilon = 1e-15);

        let south = bloch_to_state(&BlochAngles::new(PI, 0.0, 0.0));
        assert!(south.amplitudes()[0].norm() < 1e-15);
        assert_relative_eq!(south.amplitudes()[1].re, 1.0, epsilon = 1e-15);

        // equatorial sigma_y eigenstate: (1, i)/sqrt(2)
        let y = bloch_to_state(&BlochAngles::new(FRAC_PI_2, FRAC_PI_2, 0.0));
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(y.amplitudes()[0].re, inv_sqrt2, epsilon = 1e-15);
        assert_relative_eq!(y.amplitudes()[1].im, inv_sqrt2, epsilon = 1e-15);
    }

    #[test]
    fn bloch_norm_over_angle_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let angles = BlochAngles::new(PI * i as f64 / 19.0, 0.1 + 0.3 * j as f64, 0.7);
                let st = bloch_to_state(&angles);
                let norm_sq: f64 = st.amplitudes().iter().map(|a| a.norm_sqr()).sum();
                assert!((norm_sq - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let zero = PureState::qubit(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let one = PureState::qubit(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let plus = PureState::normalized(DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).unwrap();

        assert_relative_eq!(fidelity_pure(&zero, &zero).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(fidelity_pure(&zero, &one).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(fidelity_pure(&zero, &plus).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_phase_invariant_and_symmetric() {
        let a = bloch_to_state(&BlochAngles::new(0.7, 1.3, 0.0));
        let a_phased = bloch_to_state(&BlochAngles::new(0.7, 1.3, 2.1));
        let b = bloch_to_state(&BlochAngles::new(2.2, 4.0, 0.0));
        assert_relative_eq!(
            fidelity_pure(&a, &b).unwrap(),
            fidelity_pure(&a_phased, &b).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(
            fidelity_pure(&a, &b).unwrap(),
            fidelity_pure(&b, &a).unwrap()
        );
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = PureState::qubit(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let b = PureState::new(DVector::from_vec(vec![c(1.0, 0.0)])).unwrap();
        assert!(matches!(
            fidelity_pure(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn purify_pure_state() {
        let zero = PureState::qubit(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let rho = DensityMatrix::from_pure(&zero);
        let psi = purify(&rho, 1).unwrap();
        assert_eq!(psi.rank(), 1);
        assert!((psi.psi()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(psi.psi()[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn purify_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(2);
        let psi = purify(&rho, 2).unwrap();
        let back = density_of(&psi);
        assert!((back.matrix() - rho.matrix()).camax() < 1e-12);
    }

    #[test]
    fn purify_rank_error() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            purify(&rho, 1),
            Err(Error::RankTooSmall { required: 2, requested: 1 })
        ));
    }

    /// Round-trip oracle: rho = A A† / Tr(A A†) for random complex A.
    #[test]
    fn purify_density_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 2, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let raw = &a * a.adjoint();
            let trace = raw.trace().re;
            let rho = DensityMatrix::new(raw / c(trace, 0.0)).unwrap();
            let psi = purify(&rho, 2).unwrap();
            let back = density_of(&psi);
            assert!(
                (back.matrix() - rho.matrix()).camax() < 1e-10,
                "round trip deviation {}",
                (back.matrix() - rho.matrix()).camax()
            );
        }
    }

    /// Gauge freedom: psi and psi V give identical density matrices.
    #[test]
    fn density_gauge_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let rho = DensityMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)],
        ))
        .unwrap();
        let psi = purify(&rho, 2).unwrap();
        for _ in 0..20 {
            // random 2x2 unitary from the QR of a random complex matrix
            let a = DMatrix::from_fn(2, 2, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let v = a.qr().q();
            let gauged = PurifiedState::new(psi.psi() * &v).unwrap();
            assert!((density_of(&gauged).matrix() - density_of(&psi).matrix()).camax() < 1e-12);
        }
    }

    #[test]
    fn stacking_is_a_bijection() {
        let psi = purify(&DensityMatrix::maximally_mixed(2), 2).unwrap();
        let c_vec = psi.stacked();
        let back = PurifiedState::from_stacked(&c_vec, 2, 2).unwrap();
        assert_eq!(psi.psi(), back.psi());
        // column-major stacking: second column under the first
        assert_eq!(c_vec[0], psi.psi()[(0, 0)]);
        assert_eq!(c_vec[1], psi.psi()[(1, 0)]);
        assert_eq!(c_vec[2], psi.psi()[(0, 1)]);
        assert_eq!(c_vec[3], psi.psi()[(1, 1)]);
    }

    #[test]
    fn density_validation_rejects_bad_inputs() {
        // non-Hermitian
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.1, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        // trace != 1
        let m = DMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        // negative eigenvalue
        let m = DMatrix::from_row_slice(2, 2, &[c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn bloch_angle_normalization() {
        let a = BlochAngles::new(-0.3, 0.0, 0.0);
        assert!((0.0..=PI).contains(&a.theta));
        let b = BlochAngles::new(4.0, 1.0, -1.0);
        assert!((0.0..=PI).contains(&b.theta));
        assert!((0.0..std::f64::consts::TAU).contains(&b.phi));
        // folded angles still describe the same ray
        let direct = bloch_to_state(&BlochAngles::new(4.0, 1.0, 0.0));
        let folded = bloch_to_state(&b);
        assert_relative_eq!(
            fidelity_pure(&direct, &folded).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }
}
