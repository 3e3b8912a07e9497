//! Measurement operators: ideal projectors, chromatic-aberration-averaged
//! fuzzy POVM elements, and the measurement-matrix completeness diagnostics.
//!
//! For a spectral distribution P(lambda_k) the fuzzy operators are
//! Lambda_j = sum_k U_k† P_j U_k P(lambda_k), j = 0, 1. They close to the
//! identity like the projectors they average, reduce to ideal projectors in
//! the monochromatic limit, and become strict (non-projective) POVM elements
//! at any finite bandwidth.

use nalgebra::DMatrix;

use crate::optics::{basis_change_unitary, plate_pair, PlateConfig, WavePlateSpec};
use crate::states::hermitian_eigenvalues;
use crate::{C64, Error, Result};

/// Default midpoint-rule node count for spectral averaging. Doubling it
/// changes order-10 operator entries by < 1e-6 at 0.01 um bandwidth.
pub const DEFAULT_SPECTRAL_SAMPLES: usize = 401;

/// Operator-closure validation tolerance.
pub const POVM_TOL: f64 = 1e-12;

/// Singular values below this fraction of the largest count as zero.
pub const SV_ZERO_REL: f64 = 1e-10;

/// Wavelength nodes and probability weights of the radiation spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    samples: Vec<(f64, f64)>,
    lambda0_um: f64,
    bandwidth_um: f64,
}

impl SpectralGrid {
    /// Midpoint-rule discretization of a uniform spectrum over
    /// [lambda0 - bw/2, lambda0 + bw/2]: nodes lambda0 + bw*(k + 1/2 - N/2)/N
    /// with weights 1/N. Zero bandwidth forces a single node.
    pub fn uniform(lambda0_um: f64, bandwidth_um: f64, n_samples: usize) -> Result<Self> {
        if bandwidth_um < 0.0 {
            return Err(Error::InvalidGrid(format!(
                "bandwidth {bandwidth_um} um must be >= 0"
            )));
        }
        if n_samples < 1 {
            return Err(Error::InvalidGrid("n_samples must be >= 1".into()));
        }
        let n = if bandwidth_um == 0.0 { 1 } else { n_samples };
        let w = 1.0 / n as f64;
        let samples = (0..n)
            .map(|k| {
                (
                    lambda0_um + bandwidth_um * (k as f64 + 0.5 - n as f64 / 2.0) / n as f64,
                    w,
                )
            })
            .collect();
        Ok(SpectralGrid {
            samples,
            lambda0_um,
            bandwidth_um,
        })
    }

    pub fn monochromatic(lambda0_um: f64) -> Self {
        SpectralGrid {
            samples: vec![(lambda0_um, 1.0)],
            lambda0_um,
            bandwidth_um: 0.0,
        }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn lambda0_um(&self) -> f64 {
        self.lambda0_um
    }

    pub fn bandwidth_um(&self) -> f64 {
        self.bandwidth_um
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Which physics the operators encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Sharp projectors evaluated at the central wavelength.
    IdealProjective,
    /// Spectrally averaged POVM elements.
    Fuzzy,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::IdealProjective => "ideal",
            ModelKind::Fuzzy => "fuzzy",
        }
    }
}

/// Spectrally averaged operator pair for one plate configuration.
pub fn fuzzy_operators(
    config: &PlateConfig,
    hwp: &WavePlateSpec,
    qwp: &WavePlateSpec,
    grid: &SpectralGrid,
) -> Result<[DMatrix<C64>; 2]> {
    let mut lambda0 = DMatrix::<C64>::zeros(2, 2);
    let mut lambda1 = DMatrix::<C64>::zeros(2, 2);
    for &(lam, w) in grid.samples() {
        let u = basis_change_unitary(config, hwp, qwp, lam)?;
        let ud = u.adjoint();
        // U† P_j U for P_0 = |0><0|, P_1 = |1><1| from the columns of U†
        let col0 = ud.column(0);
        let col1 = ud.column(1);
        let wc = C64::new(w, 0.0);
        lambda0 += (&col0 * col0.adjoint()) * wc;
        lambda1 += (&col1 * col1.adjoint()) * wc;
    }
    Ok([lambda0, lambda1])
}

/// Sharp projector pair U†P_jU at the central wavelength.
pub fn ideal_projectors(
    config: &PlateConfig,
    hwp: &WavePlateSpec,
    qwp: &WavePlateSpec,
    lambda0_um: f64,
) -> Result<[DMatrix<C64>; 2]> {
    fuzzy_operators(config, hwp, qwp, &SpectralGrid::monochromatic(lambda0_um))
}

/// Hermitian operator pairs (Lambda_0, Lambda_1) for every configuration of a
/// protocol, together with the plates and spectrum they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    kind: ModelKind,
    configs: Vec<PlateConfig>,
    pairs: Vec<[DMatrix<C64>; 2]>,
    hwp: WavePlateSpec,
    qwp: WavePlateSpec,
    grid: SpectralGrid,
}

impl MeasurementModel {
    /// Fuzzy model over an explicit spectral grid.
    pub fn fuzzy(
        configs: &[PlateConfig],
        hwp: WavePlateSpec,
        qwp: WavePlateSpec,
        grid: SpectralGrid,
    ) -> Result<Self> {
        let pairs = configs
            .iter()
            .map(|cfg| fuzzy_operators(cfg, &hwp, &qwp, &grid))
            .collect::<Result<Vec<_>>>()?;
        let model = MeasurementModel {
            kind: ModelKind::Fuzzy,
            configs: configs.to_vec(),
            pairs,
            hwp,
            qwp,
            grid,
        };
        model.validate()?;
        Ok(model)
    }

    /// Ideal projective model at the central wavelength.
    pub fn ideal(
        configs: &[PlateConfig],
        hwp: WavePlateSpec,
        qwp: WavePlateSpec,
        lambda0_um: f64,
    ) -> Result<Self> {
        let grid = SpectralGrid::monochromatic(lambda0_um);
        let mut model = Self::fuzzy(configs, hwp, qwp, grid)?;
        model.kind = ModelKind::IdealProjective;
        Ok(model)
    }

    /// Convenience constructor with order-10 plates and a uniform spectrum.
    pub fn with_order10_plates(
        kind: ModelKind,
        configs: &[PlateConfig],
        lambda0_um: f64,
        bandwidth_um: f64,
        n_samples: usize,
    ) -> Result<Self> {
        let (hwp, qwp) = plate_pair(10, lambda0_um)?;
        match kind {
            ModelKind::IdealProjective => Self::ideal(configs, hwp, qwp, lambda0_um),
            ModelKind::Fuzzy => Self::fuzzy(
                configs,
                hwp,
                qwp,
                SpectralGrid::uniform(lambda0_um, bandwidth_um, n_samples)?,
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        let identity = DMatrix::<C64>::identity(2, 2);
        for (i, [l0, l1]) in self.pairs.iter().enumerate() {
            let closure = (l0 + l1 - &identity).camax();
            if closure > POVM_TOL {
                return Err(Error::DegenerateModel(format!(
                    "config {i}: Lambda_0 + Lambda_1 deviates from identity by {closure}"
                )));
            }
            for l in [l0, l1] {
                let herm = (l - l.adjoint()).camax();
                if herm > POVM_TOL {
                    return Err(Error::DegenerateModel(format!(
                        "config {i}: operator not Hermitian ({herm})"
                    )));
                }
                for eig in hermitian_eigenvalues(l) {
                    if !(-POVM_TOL..=1.0 + POVM_TOL).contains(&eig) {
                        return Err(Error::DegenerateModel(format!(
                            "config {i}: operator eigenvalue {eig} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_configs(&self) -> usize {
        self.pairs.len()
    }

    /// Hilbert-space dimension (2 outcomes per configuration).
    pub fn dim(&self) -> usize {
        2
    }

    /// Total operator count l*s.
    pub fn n_operators(&self) -> usize {
        self.pairs.len() * 2
    }

    pub fn pair(&self, config: usize) -> &[DMatrix<C64>; 2] {
        &self.pairs[config]
    }

    /// Operators flattened in (config, outcome) order.
    pub fn operators(&self) -> impl Iterator<Item = &DMatrix<C64>> {
        self.pairs.iter().flat_map(|p| p.iter())
    }

    pub fn configs(&self) -> &[PlateConfig] {
        &self.configs
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn plates(&self) -> (&WavePlateSpec, &WavePlateSpec) {
        (&self.hwp, &self.qwp)
    }
}

/// Row-flattened operator matrix B (ls x s^2) with its singular spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    b: DMatrix<C64>,
    singular_values: Vec<f64>,
    condition_number: f64,
}

impl MeasurementMatrix {
    pub fn b(&self) -> &DMatrix<C64> {
        &self.b
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// sigma_max / sigma_min over the full spectrum.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// Count of singular values above 1e-10 * sigma_max.
    pub fn numerical_rank(&self) -> usize {
        let threshold = SV_ZERO_REL * self.singular_values[0];
        self.singular_values.iter().filter(|&&s| s > threshold).count()
    }

    /// Informationally complete iff the rank is the full s^2.
    pub fn is_complete(&self) -> bool {
        self.numerical_rank() == self.b.ncols()
    }
}

/// Builds B by flattening every operator row-major into a matrix row
/// (second matrix row to the right of the first) and taking its SVD.
pub fn measurement_matrix(model: &MeasurementModel) -> Result<MeasurementMatrix> {
    if model.n_configs() == 0 {
        return Err(Error::DegenerateModel("model has no configurations".into()));
    }
    let s = model.dim();
    let rows = model.n_operators();
    let mut b = DMatrix::<C64>::zeros(rows, s * s);
    for (row, op) in model.operators().enumerate() {
        for i in 0..s {
            for j in 0..s {
                b[(row, i * s + j)] = op[(i, j)];
            }
        }
    }
    let mut singular_values: Vec<f64> = b.clone().svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values[0];
    if sigma_max <= 0.0 {
        return Err(Error::DegenerateModel(
            "all singular values of the measurement matrix vanish".into(),
        ));
    }
    let sigma_min = *singular_values.last().expect("non-empty spectrum");
    Ok(MeasurementMatrix {
        b,
        singular_values,
        condition_number: sigma_max / sigma_min,
    })
}
