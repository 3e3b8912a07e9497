//! Birefringent waveplate optics: quartz dispersion, relative optical
//! thickness, Jones matrices and the HWP+QWP basis-change unitary.
//!
//! A plate of geometrical thickness `h` has retardance
//! `delta = pi * h * |n_o - n_e| / lambda`; plates are cut so that at the
//! design wavelength `delta` is (k + 1/2) pi (half-wave) or (k + 1/4) pi
//! (quarter-wave) for order k. Away from the design wavelength the crystal
//! dispersion makes the induced qubit rotation wavelength-dependent.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::{C64, Error, Result};

/// Validity window of the quartz dispersion fit, micrometers.
pub const DISPERSION_WINDOW_UM: (f64, f64) = (0.4, 1.0);

/// Half-wave or quarter-wave cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateKind {
    Half,
    Quarter,
}

impl PlateKind {
    /// Target retardance at the design wavelength for a given order, radians.
    pub fn target_retardance(self, order: u32) -> f64 {
        match self {
            PlateKind::Half => (order as f64 + 0.5) * PI,
            PlateKind::Quarter => (order as f64 + 0.25) * PI,
        }
    }
}

/// Birefringent crystal the plate is cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Crystal {
    #[default]
    Quartz,
}

/// A physical waveplate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlateSpec {
    pub kind: PlateKind,
    /// Geometrical thickness, micrometers. Always > 0.
    pub thickness_um: f64,
    pub crystal: Crystal,
}

impl WavePlateSpec {
    pub fn new(kind: PlateKind, thickness_um: f64, crystal: Crystal) -> Result<Self> {
        if thickness_um <= 0.0 {
            return Err(Error::InvalidState(format!(
                "plate thickness {thickness_um} um must be positive"
            )));
        }
        Ok(WavePlateSpec {
            kind,
            thickness_um,
            crystal,
        })
    }

    /// Quartz plate whose retardance at `lambda0` is exactly the order-k
    /// target (so an order-10 half-wave plate at 0.65 um is ~756 um thick).
    pub fn for_order(kind: PlateKind, order: u32, lambda0_um: f64) -> Result<Self> {
        let thickness = thickness_for_order(kind, order, lambda0_um)?;
        Self::new(kind, thickness, Crystal::Quartz)
    }
}

/// Fast-axis angles of the HWP/QWP pair, radians to vertical, stored mod pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateConfig {
    alpha: f64,
    beta: f64,
}

impl PlateConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        // rem_euclid of a tiny negative can round to pi itself
        let fold = |x: f64| {
            let r = x.rem_euclid(PI);
            if r >= PI { 0.0 } else { r }
        };
        PlateConfig {
            alpha: fold(alpha),
            beta: fold(beta),
        }
    }

    /// HWP fast-axis angle in [0, pi).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// QWP fast-axis angle in [0, pi).
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Ordinary / extraordinary refractive indices at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractiveIndices {
    pub n_o: f64,
    pub n_e: f64,
    /// |n_o - n_e|.
    pub birefringence: f64,
}

// Ghosh (1999) two-pole Sellmeier fits for alpha-quartz, lambda in um.
const QUARTZ_O: [f64; 5] = [1.28604141, 1.07044083, 0.0100585997, 1.10202242, 100.0];
const QUARTZ_E: [f64; 5] = [1.28851804, 1.09509924, 0.0102101864, 1.15662475, 100.0];

fn sellmeier(coeffs: &[f64; 5], lambda_um: f64) -> f64 {
    let l2 = lambda_um * lambda_um;
    (coeffs[0] + coeffs[1] * l2 / (l2 - coeffs[2]) + coeffs[3] * l2 / (l2 - coeffs[4])).sqrt()
}

/// Quartz indices at `lambda_um`; errors outside [0.4, 1.0] um rather than
/// extrapolating (order-10 plates amplify index errors ~20x).
pub fn quartz_indices(lambda_um: f64) -> Result<RefractiveIndices> {
    let (lo, hi) = DISPERSION_WINDOW_UM;
    if !(lo..=hi).contains(&lambda_um) {
        return Err(Error::WavelengthOutOfRange {
            lambda_um,
            min_um: lo,
            max_um: hi,
        });
    }
    let n_o = sellmeier(&QUARTZ_O, lambda_um);
    let n_e = sellmeier(&QUARTZ_E, lambda_um);
    Ok(RefractiveIndices {
        n_o,
        n_e,
        birefringence: (n_o - n_e).abs(),
    })
}

/// Relative optical thickness delta = pi h |n_o - n_e| / lambda, radians.
pub fn optical_thickness(plate: &WavePlateSpec, lambda_um: f64) -> Result<f64> {
    let indices = match plate.crystal {
        Crystal::Quartz => quartz_indices(lambda_um)?,
    };
    Ok(PI * plate.thickness_um * indices.birefringence / lambda_um)
}

/// Thickness realizing the order-k target retardance at `lambda0`, um.
pub fn thickness_for_order(kind: PlateKind, order: u32, lambda0_um: f64) -> Result<f64> {
    let indices = quartz_indices(lambda0_um)?;
    Ok(kind.target_retardance(order) * lambda0_um / (PI * indices.birefringence))
}

/// HWP + QWP pair of the same order, cut for `lambda0`.
pub fn plate_pair(order: u32, lambda0_um: f64) -> Result<(WavePlateSpec, WavePlateSpec)> {
    Ok((
        WavePlateSpec::for_order(PlateKind::Half, order, lambda0_um)?,
        WavePlateSpec::for_order(PlateKind::Quarter, order, lambda0_um)?,
    ))
}

/// Waveplate Jones matrix
/// [[cos d - i sin d cos 2a, -i sin d sin 2a],
///  [-i sin d sin 2a,         cos d + i sin d cos 2a]];
/// equals a Bloch rotation by 2*delta about (sin 2a, 0, cos 2a).
pub fn waveplate_unitary(delta: f64, alpha: f64) -> DMatrix<C64> {
    let (c, s) = (delta.cos(), delta.sin());
    let (c2a, s2a) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, -s * c2a),
            C64::new(0.0, -s * s2a),
            C64::new(0.0, -s * s2a),
            C64::new(c, s * c2a),
        ],
    )
}

/// Total transformation U = U_QWP(delta_QWP, beta) * U_HWP(delta_HWP, alpha)
/// at one wavelength; the photon passes the half-wave plate first.
pub fn basis_change_unitary(
    config: &PlateConfig,
    hwp: &WavePlateSpec,
    qwp: &WavePlateSpec,
    lambda_um: f64,
) -> Result<DMatrix<C64>> {
    let d_hwp = optical_thickness(hwp, lambda_um)?;
    let d_qwp = optical_thickness(qwp, lambda_um)?;
    Ok(waveplate_unitary(d_qwp, config.beta()) * waveplate_unitary(d_hwp, config.alpha()))
}
