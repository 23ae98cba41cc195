//! Closed-form Stokes benchmark solutions and their forcing terms.
//!
//! All benchmarks share one family: a Kovasznay-type exponential profile
//! carrying one or more plane waves,
//!
//! ```text
//! u1 = K - sum_k e^{lambda x} cos(theta_k)
//! u2 = sum_k (lambda / (2 m_k pi)) e^{lambda x} sin(theta_k)
//!            + (n_k / m_k) e^{lambda x} cos(theta_k)
//! p  = (1/2) e^{2 lambda x},     theta_k = 2 n_k pi x + 2 m_k pi y
//! ```
//!
//! with `K` the number of waves and `lambda = Re/2 - sqrt(Re^2/4 + 4 pi^2)`.
//! Every member is divergence free; the forcing that makes it satisfy the
//! steady Stokes momentum equation is computed here from second-order jets.

use std::f64::consts::TAU;

use crate::autodiff::{jet_seed, Jet2, JetOrder};
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Wave {
    pub n: f64,
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub nu: f64,
    pub lambda: f64,
    pub waves: Vec<Wave>,
}

/// Decaying root of the Kovasznay dispersion relation.
pub fn lambda_for_reynolds(re: f64) -> Result<f64> {
    if !(re > 0.0) || !re.is_finite() {
        return Err(Error::domain(format!("Reynolds number must be positive, got {re}")));
    }
    Ok(0.5 * re - (0.25 * re * re + 4.0 * std::f64::consts::PI * std::f64::consts::PI).sqrt())
}

impl ExactSolution {
    pub fn new(nu: f64, waves: Vec<Wave>) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::domain(format!("viscosity must be positive, got {nu}")));
        }
        if waves.is_empty() {
            return Err(Error::domain("an exact solution needs at least one wave"));
        }
        for (k, w) in waves.iter().enumerate() {
            if w.m == 0.0 || !w.m.is_finite() || !w.n.is_finite() {
                return Err(Error::domain(format!(
                    "wave {k} must have finite frequencies and m != 0"
                )));
            }
        }
        let lambda = lambda_for_reynolds(1.0 / nu)?;
        Ok(ExactSolution { nu, lambda, waves })
    }

    /// Classical Kovasznay flow: a single (0, 1) wave.
    pub fn kovasznay(nu: f64) -> Result<Self> {
        Self::new(nu, vec![Wave { n: 0.0, m: 1.0 }])
    }

    /// One oscillatory wave with the given integer frequencies.
    pub fn two_frequency(nu: f64, n: f64, m: f64) -> Result<Self> {
        Self::new(nu, vec![Wave { n, m }])
    }

    /// The two-wave benchmark mixing (35, 30) and (40, 45).
    pub fn multi_frequency(nu: f64) -> Result<Self> {
        Self::new(nu, vec![Wave { n: 35.0, m: 30.0 }, Wave { n: 40.0, m: 45.0 }])
    }

    pub fn velocity_jets(&self, p: [f64; 2], order: JetOrder) -> [Jet2; 2] {
        let [jx, jy] = jet_seed(p, order);
        let ex = (jx * self.lambda).exp();
        let mut u1 = Jet2::constant(self.waves.len() as f64, order);
        let mut u2 = Jet2::constant(0.0, order);
        for w in &self.waves {
            let theta = jx * (TAU * w.n) + jy * (TAU * w.m);
            let (sin, cos) = (theta.sin(), theta.cos());
            u1 = u1 - ex * cos;
            u2 = u2 + ex * sin * (self.lambda / (TAU * w.m)) + ex * cos * (w.n / w.m);
        }
        [u1, u2]
    }

    pub fn pressure_jet(&self, p: [f64; 2], order: JetOrder) -> Jet2 {
        let [jx, _] = jet_seed(p, order);
        (jx * (2.0 * self.lambda)).exp() * 0.5
    }

    pub fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        self.velocity_jets(p, JetOrder::First).map(|j| j.val)
    }

    pub fn pressure(&self, p: [f64; 2]) -> f64 {
        self.pressure_jet(p, JetOrder::First).val
    }

    /// Momentum forcing `f = -nu lap(u) + grad p` for this solution.
    pub fn forcing(&self, p: [f64; 2]) -> [f64; 2] {
        let [u1, u2] = self.velocity_jets(p, JetOrder::Second);
        let pj = self.pressure_jet(p, JetOrder::Second);
        [
            -self.nu * (u1.hxx() + u1.hyy()) + pj.gx,
            -self.nu * (u2.hxx() + u2.hyy()) + pj.gy,
        ]
    }

    /// `div f`: because u is divergence free this reduces to `lap p`,
    /// which is `2 lambda^2 e^{2 lambda x}` in closed form.
    pub fn div_forcing(&self, p: [f64; 2]) -> f64 {
        2.0 * self.lambda * self.lambda * (2.0 * self.lambda * p[0]).exp()
    }
}
