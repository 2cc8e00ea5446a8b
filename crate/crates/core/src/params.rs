use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants shared by every model in the hierarchy.
///
/// `nu` is the reduced viscosity: the viscous term of the momentum equation
/// is `eps * nu * Δu`. `period` is the length of the periodic retarded-time
/// (KZK) or propagation (NPE) variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub rho0: f64,
    pub c: f64,
    pub gamma: f64,
    pub nu: f64,
    pub eps: f64,
    pub period: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::nondim(0.1)
    }
}

impl ModelParams {
    /// Nondimensional set used by the validation experiments.
    pub fn nondim(eps: f64) -> Self {
        Self { rho0: 1.0, c: 1.0, gamma: 1.4, nu: 0.0, eps, period: 1.0 }
    }

    /// Water-like preset. `gamma` is a placeholder, `nu` is whatever the caller sets.
    pub fn water(nu: f64, eps: f64) -> Self {
        Self { rho0: 1000.0, c: 1500.0, gamma: 1.4, nu, eps, period: 1.0 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }

    /// Coefficient of the quadratic term of the state law, `(γ-1)c²/(2ρ₀)`.
    pub fn b_over_a(&self) -> f64 {
        (self.gamma - 1.0) * self.c * self.c / (2.0 * self.rho0)
    }
}

fn bound(name: &'static str, ok: bool, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Param { name, reason: reason.into() })
    }
}

/// Returns `p` unchanged iff every bound holds; otherwise names the first violated one.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    // `!(x > 0)` rather than `x <= 0` so NaN is rejected too.
    bound("rho0", p.rho0 > 0.0 && p.rho0.is_finite(), format!("need rho0 > 0, got {}", p.rho0))?;
    bound("c", p.c > 0.0 && p.c.is_finite(), format!("need c > 0, got {}", p.c))?;
    bound("gamma", p.gamma > 1.0 && p.gamma.is_finite(), format!("need gamma > 1, got {}", p.gamma))?;
    bound("nu", p.nu >= 0.0 && p.nu.is_finite(), format!("need nu >= 0, got {}", p.nu))?;
    bound("eps", p.eps > 0.0 && p.eps < 1.0, format!("need 0 < eps < 1, got {}", p.eps))?;
    bound(
        "period",
        p.period > 0.0 && p.period.is_finite(),
        format!("need period > 0, got {}", p.period),
    )?;
    Ok(p)
}

/// Switches for the individual physical effects of an evolution law.
///
/// Tests use these to isolate the linear, viscous or diffractive parts of an
/// operator; production runs keep everything on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Terms {
    pub nonlinear: bool,
    pub viscous: bool,
    pub diffraction: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Self { nonlinear: true, viscous: true, diffraction: true }
    }
}

impl Terms {
    pub const LINEAR: Terms = Terms { nonlinear: false, viscous: true, diffraction: true };

    pub fn without_nonlinearity(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn without_viscosity(mut self) -> Self {
        self.viscous = false;
        self
    }

    pub fn without_diffraction(mut self) -> Self {
        self.diffraction = false;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn water_example() -> ModelParams {
        ModelParams { rho0: 1000.0, c: 1500.0, gamma: 1.4, nu: 0.001, eps: 1e-5, period: 1.0 }
    }

    fn violated(p: ModelParams) -> &'static str {
        match validate_params(p) {
            Err(Error::Param { name, .. }) => name,
            other => panic!("expected a parameter error, got {other:?}"),
        }
    }

    #[test]
    fn water_scale_example_is_valid() {
        assert_eq!(validate_params(water_example()).unwrap(), water_example());
    }

    #[test]
    fn open_interval_bounds() {
        let p = water_example();
        assert_eq!(violated(ModelParams { eps: 0.0, ..p }), "eps");
        assert_eq!(violated(ModelParams { eps: 1.0, ..p }), "eps");
        assert_eq!(violated(ModelParams { gamma: 1.0, ..p }), "gamma");
        assert_eq!(violated(ModelParams { nu: -1e-9, ..p }), "nu");
        assert_eq!(violated(ModelParams { rho0: 0.0, ..p }), "rho0");
        assert_eq!(violated(ModelParams { c: f64::NAN, ..p }), "c");
        assert_eq!(violated(ModelParams { period: 0.0, ..p }), "period");
    }

    #[test]
    fn nu_zero_is_allowed() {
        assert!(validate_params(ModelParams::nondim(0.1)).is_ok());
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_params(water_example()).unwrap();
        let twice = validate_params(once).unwrap();
        assert_eq!(once, twice);
    }
}
