//! Damage half-step: minimize the incremental damage functional over the box
//! `0 ≤ α ≤ α_prev` (componentwise) with the elastic strain frozen at the
//! value the mechanical step just produced.
//!
//! The functional
//!
//! ```text
//! G(α) = Σ_tri area·[ g(ᾱ)·(½C₁e:e) + (κ/p)|∇α|^p − φ(ᾱ) ]
//!      + (η/2τ)·Σ_node m_v·(α_v − α_prev_v)²
//! ```
//!
//! is convex (strictly, through the rate term), so projected gradient
//! descent with a Barzilai–Borwein step and a backtracking sufficient-
//! decrease check converges to the unique minimizer. The upper bound
//! `α ≤ α_prev` is what makes damage irreversible; projection enforces it
//! exactly, never to within a tolerance.

use crate::error::NumericalError;
use crate::fem::{p_laplacian_energy_grad, scalar_lumped_area, Mesh};
use crate::material::MaterialParams;
use crate::parallel;
use crate::tensor::Sym2;

/// Tolerance and budget of the projected gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageSolveOpts {
    /// Convergence threshold on the ℓ² norm of the unit-step projected
    /// gradient residual `α − Π(α − ∇G(α))`.
    pub tol: f64,
    /// Iteration budget.
    pub maxit: usize,
}

impl Default for DamageSolveOpts {
    fn default() -> Self {
        DamageSolveOpts { tol: 1e-9, maxit: 5000 }
    }
}

/// Frozen data of one damage step.
pub struct DamageProblem<'a> {
    pub mesh: &'a Mesh,
    pub mat: &'a MaterialParams,
    /// Damage field at the previous step; simultaneously the upper bound.
    pub alpha_prev: &'a [f64],
    /// Time-step size.
    pub tau: f64,
    /// Reference elastic energy density `½C₁e:e` per triangle, precomputed
    /// from the strain the mechanical step produced.
    ref_dens: Vec<f64>,
    /// Per-node lumped area shares weighting the rate term.
    node_area: Vec<f64>,
}

impl<'a> DamageProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        mat: &'a MaterialParams,
        e_el: &[Sym2],
        alpha_prev: &'a [f64],
        tau: f64,
    ) -> Self {
        assert_eq!(e_el.len(), mesh.n_tris());
        assert_eq!(alpha_prev.len(), mesh.n_nodes());
        assert!(tau > 0.0);
        let ref_dens = e_el.iter().map(|&e| mat.elastic_density_ref(e)).collect();
        let node_area = scalar_lumped_area(mesh);
        DamageProblem { mesh, mat, alpha_prev, tau, ref_dens, node_area }
    }
}

/// Output of one damage step.
pub struct DamageResult {
    /// Minimizer; satisfies `0 ≤ α ≤ α_prev` exactly.
    pub alpha_new: Vec<f64>,
    /// Objective value after each accepted iteration (nonincreasing up to
    /// round-off slack).
    pub objective_trace: Vec<f64>,
    /// Nodes clamped at the irreversibility bound `α = α_prev`.
    pub active_upper: Vec<bool>,
    /// Nodes clamped at total damage `α = 0`.
    pub active_lower: Vec<bool>,
    /// Final projected-gradient residual norm.
    pub pg_norm: f64,
    /// Iterations used (0 when `α_prev` is already optimal).
    pub iters: usize,
}

/// Incremental damage objective `G(α)` (see the module docs).
pub fn damage_objective(p: &DamageProblem, alpha: &[f64]) -> f64 {
    let (reg, _) = p_laplacian_energy_grad(p.mesh, alpha, p.mat.kappa, p.mat.p_exp);
    let local = parallel::sum_over(p.mesh.n_tris(), |t| {
        let abar = p.mesh.tri_avg(alpha, t);
        (p.mat.g(abar) * p.ref_dens[t] - p.mat.phi(abar)) * p.mesh.tri_area[t]
    });
    let half_eta_tau = 0.5 * p.mat.eta / p.tau;
    let rate = parallel::sum_over(p.mesh.n_nodes(), |v| {
        let da = alpha[v] - p.alpha_prev[v];
        half_eta_tau * p.node_area[v] * da * da
    });
    reg + local + rate
}

/// Exact gradient of `G`; also the gradient tested in the variational
/// inequality that certifies the step.
pub fn damage_gradient(p: &DamageProblem, alpha: &[f64]) -> Vec<f64> {
    let (_, mut grad) = p_laplacian_energy_grad(p.mesh, alpha, p.mat.kappa, p.mat.p_exp);
    let local = parallel::scatter_over(p.mesh.n_tris(), p.mesh.n_nodes(), |t, out| {
        let abar = p.mesh.tri_avg(alpha, t);
        // d/dα_v of area·[g(ᾱ)ρ_ref − φ(ᾱ)], with ∂ᾱ/∂α_v = 1/3.
        let w = p.mesh.tri_area[t] / 3.0
            * (p.mat.g_prime(abar) * p.ref_dens[t] - p.mat.phi_prime(abar));
        for &v in &p.mesh.tris[t] {
            out[v] += w;
        }
    });
    let eta_tau = p.mat.eta / p.tau;
    for v in 0..p.mesh.n_nodes() {
        grad[v] += local[v] + eta_tau * p.node_area[v] * (alpha[v] - p.alpha_prev[v]);
    }
    grad
}

fn project(x: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter().zip(upper).map(|(&v, &ub)| v.clamp(0.0, ub)).collect()
}

fn pg_residual_norm(x: &[f64], grad: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .zip(upper)
        .map(|((&xi, &gi), &ub)| {
            let r = xi - (xi - gi).clamp(0.0, ub);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Run the projected gradient iteration for one step.
///
/// Starts from `α_prev` and checks optimality before moving, so a state
/// where no damage wants to evolve is returned bitwise unchanged — this is
/// what makes a resting simulation an exact fixed point.
pub fn damage_step(
    p: &DamageProblem,
    opts: &DamageSolveOpts,
) -> Result<DamageResult, NumericalError> {
    let upper = p.alpha_prev;
    let mut x = upper.to_vec();
    let mut gx = damage_gradient(p, &x);
    let mut fx = damage_objective(p, &x);
    let mut trace = vec![fx];
    let mut pg_norm = pg_residual_norm(&x, &gx, upper);
    let mut iters = 0;

    let mut step = {
        let gn = gx.iter().map(|g| g * g).sum::<f64>().sqrt();
        1.0 / (1.0 + gn)
    };
    while pg_norm > opts.tol {
        if iters >= opts.maxit {
            return Err(NumericalError::DamageMaxIter {
                maxit: opts.maxit,
                pg_norm,
                trace_len: trace.len(),
            });
        }
        iters += 1;

        // Backtrack until the prox-descent inequality
        //   G(x⁺) ≤ G(x) + ⟨∇G(x), x⁺−x⟩ + ‖x⁺−x‖²/(2·step)
        // holds (up to round-off slack); for convex G this enforces descent.
        let mut accepted = None;
        for _ in 0..60 {
            let xn = project(
                &x.iter().zip(&gx).map(|(xi, gi)| xi - step * gi).collect::<Vec<_>>(),
                upper,
            );
            let fxn = damage_objective(p, &xn);
            let (mut lin, mut sq) = (0.0, 0.0);
            for ((xni, xi), gi) in xn.iter().zip(&x).zip(&gx) {
                let d = xni - xi;
                lin += gi * d;
                sq += d * d;
            }
            if fxn <= fx + lin + sq / (2.0 * step) + 1e-12 * (1.0 + fx.abs()) {
                accepted = Some((xn, fxn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            // No representable step decreases the model further; treat the
            // current iterate as the numerical floor.
            break;
        };

        let gn = damage_gradient(p, &xn);
        // Barzilai–Borwein step for the next iteration.
        let (mut ss, mut sy) = (0.0, 0.0);
        for ((xni, xi), (gni, gi)) in xn.iter().zip(&x).zip(gn.iter().zip(&gx)) {
            let s = xni - xi;
            ss += s * s;
            sy += s * (gni - gi);
        }
        if sy > 0.0 {
            step = (ss / sy).clamp(1e-12, 1e12);
        }
        x = xn;
        gx = gn;
        fx = fxn;
        trace.push(fx);
        pg_norm = pg_residual_norm(&x, &gx, upper);
    }

    let active_upper = x.iter().zip(upper).map(|(a, b)| a == b).collect();
    let active_lower = x.iter().map(|&a| a == 0.0).collect();
    Ok(DamageResult { alpha_new: x, objective_trace: trace, active_upper, active_lower, pg_norm, iters })
}
