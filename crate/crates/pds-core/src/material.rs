//! Constitutive laws and their secant (finite-difference) forms.
//!
//! All constitutive behavior is isotropic and driven by a scalar damage
//! variable `α ∈ [0, 1]` with the convention `α = 1` undamaged, `α = 0`
//! fully damaged. Damage only ever decreases in time (no healing).
//!
//! * Elasticity: `C(α) = g(α)·C₁` with `g(α) = eps_res + α²` and
//!   `C₁ e = λ₁ tr(e) I + 2 μ₁ e`. The quadratic `g` is nondecreasing on
//!   `[0, 1]` with `g'(0) = 0` (cohesive damage) and keeps every secant
//!   integral below in closed form.
//! * Viscosity: `D(α) = D₀ + χ·C(α)` with `D₀ e = λ₀ tr(e) I + 2 μ₀ e`
//!   positive definite, so the mechanical step stays uniformly elliptic
//!   even at full damage.
//! * Yield stress: `σ_yld(α) = sigma0 + sigma1·α`, positive and
//!   nondecreasing.
//! * Damage potential: `φ(α) = -Gc (1-α)² / (2 eps_at)`, the quadratic
//!   phase-field (Ambrosio-Tortorelli) surface-energy density; the stored
//!   term is `-φ ≥ 0`.
//!
//! The incremental damage problem needs the *secant* of `g` and `φ` rather
//! than the derivative: `g°(a, b) = (g(a) - g(b))/(a - b)`, extended by
//! `g'(a)` on the diagonal. For quadratic `g` and `φ` the secants and their
//! primitives integrate exactly (see [`MaterialParams::damage_primitives`]),
//! which is what makes the discrete energy identity telescope without
//! quadrature error.

use crate::error::ConfigError;
use crate::tensor::Sym2;

/// All constitutive constants of the model.
///
/// Invariants (checked by [`MaterialParams::validate`]):
/// * `mu1 > 0`, `lambda1 + mu1 > 0` — reference elasticity positive definite;
/// * `eps_res ≥ 0` — residual stiffness fraction;
/// * `mu0 > 0`, `lambda0 + mu0 > 0` — `D₀` positive definite;
/// * `chi ≥ 0` — relaxation time;
/// * `sigma0 > 0`, `sigma1 ≥ 0` — yield stress positive, nondecreasing in `α`;
/// * `gc ≥ 0`, `eps_at > 0` — fracture toughness and phase-field length;
/// * `eta > 0`, `kappa > 0`, `p_exp ≥ 2`, `rho > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    /// First Lamé modulus of the reference elasticity tensor `C₁` (stress).
    pub lambda1: f64,
    /// Shear modulus of `C₁` (stress).
    pub mu1: f64,
    /// Residual stiffness fraction in `g(α) = eps_res + α²` (dimensionless).
    ///
    /// Kept strictly positive by default so the displacement system stays
    /// uniformly SPD even at `α = 0`; zero is allowed but relies on `D₀`
    /// alone for ellipticity of the elastic block.
    pub eps_res: f64,
    /// First Lamé modulus of the damage-independent viscosity `D₀` (stress·time).
    pub lambda0: f64,
    /// Shear modulus of `D₀` (stress·time).
    pub mu0: f64,
    /// Relaxation time `χ` in `D(α) = D₀ + χ·C(α)` (time).
    pub chi: f64,
    /// Yield stress at full damage: `σ_yld(α) = sigma0 + sigma1·α` (stress).
    pub sigma0: f64,
    /// Damage hardening of the yield stress (stress).
    pub sigma1: f64,
    /// Fracture toughness `Gc` (energy/area).
    pub gc: f64,
    /// Phase-field internal length `ε` in `φ(α) = -Gc(1-α)²/(2ε)` (length).
    pub eps_at: f64,
    /// Damage viscosity `η > 0` (stress·time).
    pub eta: f64,
    /// Damage gradient coefficient `κ > 0` in `(κ/p)|∇α|^p`.
    pub kappa: f64,
    /// Gradient exponent `p ≥ 2`.
    pub p_exp: f64,
    /// Mass density `ρ > 0`.
    pub rho: f64,
}

impl Default for MaterialParams {
    /// Desk-scale defaults: order-one elastic moduli, mild Kelvin-Voigt
    /// viscosity, and a quadratic phase-field with internal length 0.1.
    fn default() -> Self {
        MaterialParams {
            lambda1: 2.0,
            mu1: 1.0,
            eps_res: 1e-4,
            lambda0: 0.02,
            mu0: 0.01,
            chi: 0.01,
            sigma0: 0.1,
            sigma1: 0.0,
            gc: 1.0,
            eps_at: 0.1,
            eta: 1e-3,
            kappa: 0.1,
            p_exp: 2.0,
            rho: 1.0,
        }
    }
}

impl MaterialParams {
    /// Check every parameter invariant; the error names the violated
    /// constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::InvalidParameter(msg.to_string()))
            }
        };
        check(self.mu1 > 0.0, "mu1 must be > 0 (C1 positive definite)")?;
        check(
            self.lambda1 + self.mu1 > 0.0,
            "lambda1 + mu1 must be > 0 (C1 positive definite)",
        )?;
        check(self.eps_res >= 0.0, "eps_res must be >= 0")?;
        check(self.mu0 > 0.0, "mu0 must be > 0 (D0 positive definite)")?;
        check(
            self.lambda0 + self.mu0 > 0.0,
            "lambda0 + mu0 must be > 0 (D0 positive definite)",
        )?;
        check(self.chi >= 0.0, "chi must be >= 0")?;
        check(self.sigma0 > 0.0, "sigma0 must be > 0 (yield stress positive)")?;
        check(self.sigma1 >= 0.0, "sigma1 must be >= 0 (yield stress nondecreasing)")?;
        check(self.gc >= 0.0, "gc must be >= 0")?;
        check(self.eps_at > 0.0, "eps_at must be > 0")?;
        check(self.eta > 0.0, "eta must be > 0")?;
        check(self.kappa > 0.0, "kappa must be > 0")?;
        check(self.p_exp >= 2.0, "p must be >= 2")?;
        check(self.rho > 0.0, "rho must be > 0")?;
        Ok(())
    }

    /// Degradation function `g(α) = eps_res + α²`.
    #[inline]
    pub fn g(&self, alpha: f64) -> f64 {
        self.eps_res + alpha * alpha
    }

    /// `g'(α) = 2α`.
    #[inline]
    pub fn g_prime(&self, alpha: f64) -> f64 {
        2.0 * alpha
    }

    /// Reference elastic stress `C₁ e = λ₁ tr(e) I + 2 μ₁ e` (no damage factor).
    #[inline]
    pub fn stiffness_ref(&self, e: Sym2) -> Sym2 {
        let lt = self.lambda1 * e.tr();
        Sym2::new(lt + 2.0 * self.mu1 * e.xx, lt + 2.0 * self.mu1 * e.yy, 2.0 * self.mu1 * e.xy)
    }

    /// Elastic stress `C(α) e = g(α)·(λ₁ tr(e) I + 2 μ₁ e)`.
    #[inline]
    pub fn stiffness_apply(&self, alpha: f64, e: Sym2) -> Sym2 {
        self.stiffness_ref(e) * self.g(alpha)
    }

    /// Elastic energy density `½ C(α) e : e`.
    #[inline]
    pub fn elastic_density(&self, alpha: f64, e: Sym2) -> f64 {
        self.g(alpha) * self.elastic_density_ref(e)
    }

    /// Reference elastic energy density `½ C₁ e : e = ½ λ₁ tr(e)² + μ₁ e:e`.
    #[inline]
    pub fn elastic_density_ref(&self, e: Sym2) -> f64 {
        let t = e.tr();
        0.5 * self.lambda1 * t * t + self.mu1 * e.norm_sq()
    }

    /// Viscous stress `D(α) ė = D₀ ė + χ C(α) ė`.
    #[inline]
    pub fn viscosity_apply(&self, alpha: f64, edot: Sym2) -> Sym2 {
        let lt = self.lambda0 * edot.tr();
        let d0 = Sym2::new(
            lt + 2.0 * self.mu0 * edot.xx,
            lt + 2.0 * self.mu0 * edot.yy,
            2.0 * self.mu0 * edot.xy,
        );
        d0 + self.stiffness_apply(alpha, edot) * self.chi
    }

    /// Viscous dissipation density `D(α) ė : ė`.
    #[inline]
    pub fn viscous_density(&self, alpha: f64, edot: Sym2) -> f64 {
        self.viscosity_apply(alpha, edot).dot(edot)
    }

    /// Effective Lamé moduli `(λ, μ)` of `C(α) + D(α)/τ`, the operator of the
    /// displacement solve.
    #[inline]
    pub fn visc_elast_moduli(&self, alpha: f64, tau: f64) -> (f64, f64) {
        let g = self.g(alpha);
        let lam = self.lambda1 * g + (self.lambda0 + self.chi * self.lambda1 * g) / tau;
        let mu = self.mu1 * g + (self.mu0 + self.chi * self.mu1 * g) / tau;
        (lam, mu)
    }

    /// Yield stress `σ_yld(α) = sigma0 + sigma1·α`.
    #[inline]
    pub fn yield_stress(&self, alpha: f64) -> f64 {
        self.sigma0 + self.sigma1 * alpha
    }

    /// Secant of the degradation function:
    /// `(g(a) - g(b))/(a - b)` for `a ≠ b`, else `g'(a)`.
    ///
    /// For the quadratic `g` both branches equal `a + b` exactly, so this is
    /// total and cancellation-free.
    #[inline]
    pub fn secant_g(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    /// Damage potential `φ(α) = -Gc (1-α)² / (2 eps_at)` (nonpositive; the
    /// stored surface energy is `-φ`).
    #[inline]
    pub fn phi(&self, alpha: f64) -> f64 {
        let w = 1.0 - alpha;
        -self.gc * w * w / (2.0 * self.eps_at)
    }

    /// `φ'(α) = Gc (1-α) / eps_at ≥ 0` on `[0, 1]`.
    #[inline]
    pub fn phi_prime(&self, alpha: f64) -> f64 {
        self.gc * (1.0 - alpha) / self.eps_at
    }

    /// Secant of `φ`: `(φ(a) - φ(b))/(a - b)` for `a ≠ b`, else `φ'(a)`;
    /// equals `Gc/(2 eps_at)·(2 - a - b)` exactly for the quadratic `φ`.
    #[inline]
    pub fn secant_phi(&self, a: f64, b: f64) -> f64 {
        self.gc / (2.0 * self.eps_at) * (2.0 - a - b)
    }

    /// Closed-form primitives of the secants, the integrands of the
    /// incremental damage objective:
    ///
    /// ```text
    /// H_C(α; α_prev)   = ∫₀^α g°(s, α_prev) ds   = α²/2 + α_prev·α
    /// H_phi(α; α_prev) = ∫₀^α φ°(s, α_prev) ds  = Gc/(2 eps_at)·(2α - α²/2 - α_prev·α)
    /// ```
    ///
    /// `H_C` multiplies `½ C₁ e : e` in the damage objective; `H_phi` enters
    /// with a minus sign. Both are exact for the quadratic `g` and `φ`, so
    /// the damage optimality condition telescopes against the stored-energy
    /// difference without quadrature error.
    #[inline]
    pub fn damage_primitives(&self, alpha: f64, alpha_prev: f64) -> (f64, f64) {
        let h_c = 0.5 * alpha * alpha + alpha_prev * alpha;
        let h_phi =
            self.gc / (2.0 * self.eps_at) * (2.0 * alpha - 0.5 * alpha * alpha - alpha_prev * alpha);
        (h_c, h_phi)
    }
}
