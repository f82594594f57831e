use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance of the degeneracy predicate.
pub const DEGENERACY_RTOL: f64 = 1e-12;

/// Single-site and lattice parameters. Energies are in units of the photon frequency.
///
/// Missing fields deserialize to the defaults: omega1 = omega2 = omega0 = 1,
/// g1 = g2 = 0, N = 1, mu = 0, z = 2, t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega0: f64,
    pub g1: f64,
    pub g2: f64,
    pub n_atoms: usize,
    pub mu: f64,
    pub z: usize,
    pub t: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::degenerate(1.0, 1.0, 0.0, 1)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEGENERACY_RTOL * a.abs().max(b.abs())
}

impl ModelParams {
    /// Degenerate model (omega1 = omega2, g1 = g2) with mu = 0, z = 2, t = 0.
    pub fn degenerate(omega: f64, omega0: f64, g: f64, n_atoms: usize) -> Self {
        Self {
            omega1: omega,
            omega2: omega,
            omega0,
            g1: g,
            g2: g,
            n_atoms,
            mu: 0.0,
            z: 2,
            t: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let finite = [
            self.omega1, self.omega2, self.omega0, self.g1, self.g2, self.mu, self.t,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("parameters must be finite");
        }
        if !(self.omega1 > 0.0 && self.omega2 > 0.0 && self.omega0 > 0.0) {
            return bad("omega1, omega2, omega0 must be > 0");
        }
        if self.g1 < 0.0 || self.g2 < 0.0 {
            return bad("g1, g2 must be >= 0");
        }
        if self.n_atoms < 1 {
            return bad("n_atoms must be >= 1");
        }
        if self.z < 1 {
            return bad("z must be >= 1");
        }
        if self.t < 0.0 {
            return bad("t must be >= 0");
        }
        Ok(())
    }

    /// omega1 == omega2 and g1 == g2 within relative tolerance 1e-12.
    pub fn is_degenerate(&self) -> bool {
        close(self.omega1, self.omega2) && close(self.g1, self.g2)
    }

    pub fn g_max(&self) -> f64 {
        self.g1.max(self.g2)
    }

    /// Ratio g2/g1 used when sweeping the coupling (1 when g1 = 0).
    pub fn coupling_ratio(&self) -> f64 {
        if self.g1 > 0.0 {
            self.g2 / self.g1
        } else {
            1.0
        }
    }

    /// Sets the coupling scale: g1 = g, g2 = g * coupling_ratio().
    pub fn with_coupling(mut self, g: f64) -> Self {
        let r = self.coupling_ratio();
        self.g1 = g;
        self.g2 = g * r;
        self
    }

    /// Same parameters with a fixed g2/g1 ratio.
    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.g2 = self.g1 * ratio;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_z(mut self, z: usize) -> Self {
        self.z = z;
        self
    }

    /// z * t, the hopping scale entering mean-field and perturbative expressions.
    pub fn zt(&self) -> f64 {
        self.z as f64 * self.t
    }

    /// Displacement-based default Fock cutoff: ceil(4 N (g_max/omega1)^2) + 12.
    pub fn default_cutoff(&self) -> usize {
        let r = self.g_max() / self.omega1;
        (4.0 * self.n_atoms as f64 * r * r).ceil() as usize + 12
    }
}
