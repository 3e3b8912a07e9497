//! Waveplate angle synthesis and the shipped measurement protocols.
//!
//! Writing the total HWP+QWP transformation as
//! U = (1/sqrt2) [[cos g + i cos d, -sin g + i sin d],
//!                [sin g + i sin d,  cos g - i cos d]]
//! with g = 2(beta - alpha) and d = 2 alpha, the detector-V projection state
//! is U†|0> = (1/sqrt2)(cos g - i cos d, -sin g - i sin d). Matching it to a
//! target Bloch direction (theta, phi) requires choosing a global phase chi;
//! the phase equation admits four branches k = 0..3. Every branch induces the
//! same projector, which is the binding contract here — exact angle values
//! are branch- and convention-dependent.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::optics::PlateConfig;
use crate::states::{bloch_to_state, BlochAngles, PureState};
use crate::{Error, Result};

/// One solution of the angle-synthesis equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSolution {
    /// g = 2(beta - alpha).
    pub gamma: f64,
    /// d = 2 alpha (an auxiliary angle, not an optical thickness).
    pub delta2: f64,
    /// Global phase used for the match.
    pub chi: f64,
    /// HWP fast-axis angle, in [0, pi).
    pub alpha: f64,
    /// QWP fast-axis angle, in [0, pi).
    pub beta: f64,
    /// Phase branch index 0..3.
    pub branch_k: u8,
}

impl AngleSolution {
    pub fn config(&self) -> PlateConfig {
        PlateConfig::new(self.alpha, self.beta)
    }
}

/// An ordered list of plate configurations with per-configuration trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub configs: Vec<PlateConfig>,
    pub trials_per_config: Vec<u64>,
    pub label: String,
}

impl Protocol {
    pub fn new(configs: Vec<PlateConfig>, label: impl Into<String>) -> Self {
        let n = configs.len();
        Protocol {
            configs,
            trials_per_config: vec![1; n],
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn total_trials(&self) -> u64 {
        self.trials_per_config.iter().sum()
    }

    /// Splits `n_tot` equally across configurations, remainder to the first.
    pub fn allocate_trials(mut self, n_tot: u64) -> Self {
        let l = self.configs.len() as u64;
        let base = n_tot / l;
        let rem = n_tot % l;
        self.trials_per_config = (0..l).map(|i| base + u64::from(i < rem)).collect();
        self
    }
}

/// Global phase chi(theta, phi; k) solving the synthesis normalization,
/// chi = (1/2) atan2(cos^2(t/2) + sin^2(t/2) cos 2p, sin^2(t/2) sin 2p) + k pi/2.
/// The degenerate atan2(0, 0) input returns 0 by convention; arguments below
/// 1e-12 are snapped to zero so rounding crumbs cannot pick a junk branch
/// (any chi is a valid solution at the degenerate directions).
pub fn global_phase(theta: f64, phi: f64, k: u8) -> f64 {
    let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
    let half = theta / 2.0;
    let num = snap(half.cos().powi(2) + half.sin().powi(2) * (2.0 * phi).cos());
    let den = snap(half.sin().powi(2) * (2.0 * phi).sin());
    0.5 * num.atan2(den) + FRAC_PI_2 * f64::from(k % 4)
}

/// x mod pi, guaranteed inside [0, pi) even when rounding lands on pi.
fn mod_pi(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    if r >= PI { 0.0 } else { r }
}

/// Plate angles measuring the Bloch direction (theta, phi) on branch k.
///
/// The monochromatic projector induced by the returned angles equals
/// |psi(theta, phi)><psi(theta, phi)| within 1e-10 at the design wavelength;
/// this holds for all four branches even where chi itself is degenerate.
pub fn plate_angles_from_bloch(theta: f64, phi: f64, k: u8) -> Result<AngleSolution> {
    let chi = global_phase(theta, phi, k);
    let half = theta / 2.0;

    let cos_g = SQRT_2 * half.cos() * chi.cos();
    let sin_g = -SQRT_2 * half.sin() * (phi + chi).cos();
    check_angle_pair(cos_g, sin_g)?;
    // atan2 realizes "arccos(cos) when sin >= 0, else -arccos(cos)" without
    // the arccos precision loss near |cos| = 1
    let gamma = sin_g.atan2(cos_g);

    let cos_d = -SQRT_2 * half.cos() * chi.sin();
    let sin_d = -SQRT_2 * half.sin() * (phi + chi).sin();
    check_angle_pair(cos_d, sin_d)?;
    let delta2 = sin_d.atan2(cos_d);

    Ok(AngleSolution {
        gamma,
        delta2,
        chi,
        alpha: mod_pi(delta2 / 2.0),
        beta: mod_pi((gamma + delta2) / 2.0),
        branch_k: k % 4,
    })
}

fn check_angle_pair(c: f64, s: f64) -> Result<()> {
    let norm = c * c + s * s;
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InconsistentAngles { norm });
    }
    Ok(())
}

/// The detector-V projection state U†|0> for auxiliary angles (gamma, delta2).
pub fn detector_v_state(gamma: f64, delta2: f64) -> PureState {
    use crate::C64;
    let inv = 1.0 / SQRT_2;
    PureState::qubit(
        C64::new(inv * gamma.cos(), -inv * delta2.cos()),
        C64::new(-inv * gamma.sin(), -inv * delta2.sin()),
    )
    .expect("detector state is unit-norm by construction")
}

/// Three-configuration protocol measuring the sigma_x, sigma_y, sigma_z
/// eigenbases: {(5pi/8, pi/2), (11pi/16, 3pi/4), (pi/2, pi/2)}.
pub fn cube_protocol() -> Protocol {
    Protocol::new(
        vec![
            PlateConfig::new(5.0 * PI / 8.0, FRAC_PI_2),
            PlateConfig::new(11.0 * PI / 16.0, 3.0 * PI / 4.0),
            PlateConfig::new(FRAC_PI_2, FRAC_PI_2),
        ],
        "cube",
    )
}

/// Polar angle of the octahedron-face directions, arccos(1/sqrt 3).
pub fn octahedron_theta() -> f64 {
    (1.0 / 3.0_f64.sqrt()).acos()
}

/// Azimuths of the four upper-hemisphere octahedron-face directions.
pub fn octahedron_phis() -> [f64; 4] {
    [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0]
}

/// Four-configuration protocol whose eight induced projectors point at the
/// octahedron-face directions (+-1, +-1, +-1)/sqrt(3) on the Bloch sphere.
pub fn octahedron_protocol() -> Protocol {
    // branch per configuration keeps chi on the principal arctan branch, so
    // the emitted angles land in the conventional table form
    let branches: [u8; 4] = [0, 3, 0, 3];
    let theta = octahedron_theta();
    let configs = octahedron_phis()
        .iter()
        .zip(branches)
        .map(|(&phi, k)| {
            plate_angles_from_bloch(theta, phi, k)
                .expect("octahedron directions are regular synthesis inputs")
                .config()
        })
        .collect();
    Protocol::new(configs, "octahedron")
}

/// Target state of an octahedron configuration (for reference outputs).
pub fn octahedron_target(index: usize) -> BlochAngles {
    BlochAngles::new(octahedron_theta(), octahedron_phis()[index], 0.0)
}
