//! Mechanical half-step: minimize the incremental visco-elasto-plastic
//! functional over displacement and plastic strain with the damage field
//! frozen at its previous level.
//!
//! The functional
//!
//! ```text
//! J(u, π) = ½⟨C(ᾱ)(e(u)−π), e(u)−π⟩ + (1/2τ)⟨D(ᾱ)Δe, Δe⟩
//!         + Σ σ_yld(ᾱ)|π − π_prev|·area + (1/2τ²)‖u − 2u_prev + u_prev2‖²_ρ
//!         − ⟨f, u⟩,         Δe = e(u) − π − e_el_prev,
//! ```
//!
//! is minimized by alternating two exact partial minimizations: a linear SPD
//! solve in `u` at fixed `π` (conjugate gradients, warm-started), and a
//! closed-form radial return in `π` triangle by triangle at fixed `u`. Both
//! sub-steps decrease `J`, so the objective trace is nonincreasing; the loop
//! ends right after a `π` update so the returned plastic strain satisfies the
//! yield bound and the flow-rule complementarity exactly.

use crate::error::NumericalError;
use crate::fem::{
    assemble_visc_elast_matrix, cg_solve_warm, lumped_mass, strain_of, ConstrainedSystem, Mesh,
};
use crate::material::MaterialParams;
use crate::parallel;
use crate::tensor::{Dev2, Sym2};

/// Tolerances and budgets of the alternating minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechSolveOpts {
    /// Relative objective-decrease threshold between outer iterations.
    pub tol: f64,
    /// Threshold on the largest per-triangle plastic-strain update of the
    /// last outer iteration (keeps the equilibrium residual small after the
    /// final radial return).
    pub tol_pi: f64,
    /// Outer-iteration budget.
    pub maxit: usize,
    /// Relative residual tolerance of the inner CG solve.
    pub tol_lin: f64,
    /// CG iteration budget.
    pub maxit_lin: usize,
}

impl Default for MechSolveOpts {
    fn default() -> Self {
        MechSolveOpts { tol: 1e-12, tol_pi: 1e-10, maxit: 200, tol_lin: 1e-12, maxit_lin: 50_000 }
    }
}

/// Frozen data of one mechanical step.
pub struct MechProblem<'a> {
    pub mesh: &'a Mesh,
    pub mat: &'a MaterialParams,
    /// Displacement at the previous step, length `2·n_nodes`.
    pub u_prev: &'a [f64],
    /// Displacement two steps back (defines the discrete acceleration).
    pub u_prev2: &'a [f64],
    /// Elastic strain per triangle at the previous step.
    pub e_el_prev: &'a [Sym2],
    /// Plastic strain per triangle at the previous step.
    pub pi_prev: &'a [Dev2],
    /// Nodal damage field frozen at the previous step.
    pub alpha_prev: &'a [f64],
    /// Body-force dof vector, already integrated against the shape functions.
    pub f_k: &'a [f64],
    /// Prescribed displacement field at the new time, full nodal length;
    /// only the entries at Dirichlet dofs are read.
    pub u_d_k: &'a [f64],
    /// Per-triangle yield offset (uniform `sigma0` unless a region override
    /// is active).
    pub sigma0_tri: &'a [f64],
    /// Time-step size.
    pub tau: f64,
}

/// Output of one mechanical step.
pub struct MechResult {
    /// New displacement, with prescribed values exact at Dirichlet dofs.
    pub u_new: Vec<f64>,
    /// New elastic strain per triangle, `e(u_new) − π_new`.
    pub e_el_new: Vec<Sym2>,
    /// New plastic strain per triangle.
    pub pi_new: Vec<Dev2>,
    /// Total stress `C(ᾱ)e_el + D(ᾱ)(e_el − e_el_prev)/τ` per triangle.
    pub sigma: Vec<Sym2>,
    /// Deviatoric part of the total stress, taken verbatim from the radial
    /// return: in plastic triangles it has norm `σ_yld(ᾱ)` by construction.
    pub s_dev: Vec<Dev2>,
    /// Objective value after each outer iteration (nonincreasing).
    pub objective_trace: Vec<f64>,
    /// Outer iterations used.
    pub iters: usize,
    /// ℓ² norm of the free-dof equilibrium residual at the returned state.
    pub eq_residual: f64,
}

/// Yield stress with a per-triangle offset: `sigma0_tri + sigma1·α`.
#[inline]
pub fn tri_yield(mat: &MaterialParams, sigma0_tri: f64, alpha: f64) -> f64 {
    sigma0_tri + mat.sigma1 * alpha
}

/// Closed-form minimization of the per-triangle plastic increment
///
/// ```text
/// q ↦ μ_c|E_dev − π_prev − q|² + μ_dτ|E_dev − π_prev − d_prev − q|² + σ_y|q|
/// ```
///
/// with `μ_c` the elastic and `μ_dτ = μ_d/τ` the viscous shear modulus.
/// Returns `(π_new, s_dev)` where `s_dev` is the deviatoric total stress at
/// the minimizer. The trial stress is
/// `s_tr = 2μ_c(E_dev − π_prev) + 2μ_dτ(E_dev − π_prev − d_prev)`; if
/// `|s_tr| ≤ σ_y` the update is elastic and `π_prev` is returned unchanged
/// (bitwise). Otherwise the increment is radial,
/// `Δπ = (|s_tr| − σ_y)/(2(μ_c + μ_dτ)) · s_tr/|s_tr|`, and the stress is
/// returned in polar form `σ_y·s_tr/|s_tr|` so that `|s_dev| = σ_y` and
/// `s_dev : Δπ = σ_y|Δπ|` hold to machine precision.
#[inline]
pub fn radial_return(
    e_dev_tot: Dev2,
    pi_prev: Dev2,
    d_prev: Dev2,
    mu_c: f64,
    mu_d_tau: f64,
    sig_y: f64,
) -> (Dev2, Dev2) {
    debug_assert!(sig_y > 0.0, "yield stress must be positive");
    let a1 = e_dev_tot - pi_prev;
    let a2 = a1 - d_prev;
    let s_tr = a1 * (2.0 * mu_c) + a2 * (2.0 * mu_d_tau);
    let s_norm = s_tr.norm();
    if s_norm <= sig_y {
        return (pi_prev, s_tr);
    }
    let dir = s_tr * (1.0 / s_norm);
    let dpi = dir * ((s_norm - sig_y) / (2.0 * (mu_c + mu_d_tau)));
    (pi_prev + dpi, dir * sig_y)
}

/// Incremental mechanical objective `J(u, π)` (see the module docs).
pub fn objective_j(p: &MechProblem, mass: &[f64], u: &[f64], pi: &[Dev2]) -> f64 {
    let mesh = p.mesh;
    let mat = p.mat;
    let tau = p.tau;
    let elem = parallel::sum_over(mesh.n_tris(), |t| {
        let abar = mesh.tri_avg(p.alpha_prev, t);
        let e_el = strain_of(mesh, u, t) - pi[t].to_sym();
        let de = e_el - p.e_el_prev[t];
        let dpi = pi[t] - p.pi_prev[t];
        let dens = mat.elastic_density(abar, e_el)
            + 0.5 / tau * mat.viscous_density(abar, de)
            + tri_yield(mat, p.sigma0_tri[t], abar) * dpi.norm();
        dens * mesh.tri_area[t]
    });
    let nodal = parallel::sum_over(mesh.n_dofs(), |d| {
        let acc = u[d] - 2.0 * p.u_prev[d] + p.u_prev2[d];
        0.5 / (tau * tau) * mass[d] * acc * acc - p.f_k[d] * u[d]
    });
    elem + nodal
}

/// Right-hand side of the displacement solve at fixed plastic strain:
/// body force, inertial history, and the stress the frozen `π` and the
/// viscous history exert on the test functions.
fn displacement_rhs(p: &MechProblem, mass: &[f64], pi: &[Dev2]) -> Vec<f64> {
    let mesh = p.mesh;
    let tau = p.tau;
    let inv_tau2 = 1.0 / (tau * tau);
    let mut rhs = parallel::scatter_over(mesh.n_tris(), mesh.n_dofs(), |t, out| {
        let abar = mesh.tri_avg(p.alpha_prev, t);
        let pi_sym = pi[t].to_sym();
        // S = C(ᾱ)π + (D(ᾱ)/τ)(π + e_el_prev)
        let s = p.mat.stiffness_apply(abar, pi_sym)
            + p.mat.viscosity_apply(abar, pi_sym + p.e_el_prev[t]) * (1.0 / tau);
        let area = mesh.tri_area[t];
        for (v, g) in mesh.tris[t].into_iter().zip(&mesh.tri_grads[t]) {
            out[2 * v] += area * (s.xx * g[0] + s.xy * g[1]);
            out[2 * v + 1] += area * (s.xy * g[0] + s.yy * g[1]);
        }
    });
    for d in 0..mesh.n_dofs() {
        rhs[d] += p.f_k[d] + inv_tau2 * mass[d] * (2.0 * p.u_prev[d] - p.u_prev2[d]);
    }
    rhs
}

/// Run the alternating minimization for one step.
///
/// The operator of the `u`-solve depends only on the frozen damage field, so
/// it is assembled once; the right-hand side is rebuilt every outer iteration
/// from the current plastic strain. Convergence requires both a relative
/// objective decrease below `opts.tol` and a last plastic update below
/// `opts.tol_pi` in the per-triangle max norm.
pub fn mechanical_step(p: &MechProblem, opts: &MechSolveOpts) -> Result<MechResult, NumericalError> {
    let mesh = p.mesh;
    let n_tris = mesh.n_tris();
    assert_eq!(p.u_prev.len(), mesh.n_dofs());
    assert_eq!(p.u_prev2.len(), mesh.n_dofs());
    assert_eq!(p.f_k.len(), mesh.n_dofs());
    assert_eq!(p.u_d_k.len(), mesh.n_dofs());
    assert_eq!(p.e_el_prev.len(), n_tris);
    assert_eq!(p.pi_prev.len(), n_tris);
    assert_eq!(p.sigma0_tri.len(), n_tris);
    assert_eq!(p.alpha_prev.len(), mesh.n_nodes());

    let stiffness = assemble_visc_elast_matrix(mesh, p.mat, p.alpha_prev, p.tau);
    let mass = lumped_mass(mesh, p.mat.rho);
    let sys = ConstrainedSystem::new(&stiffness, mesh.dirichlet_dof_mask());

    // Per-triangle frozen coefficients.
    let coeffs: Vec<(f64, f64, f64, Dev2)> = (0..n_tris)
        .map(|t| {
            let abar = mesh.tri_avg(p.alpha_prev, t);
            let mu_c = p.mat.mu1 * p.mat.g(abar);
            let mu_d_tau = (p.mat.mu0 + p.mat.chi * mu_c) / p.tau;
            (mu_c, mu_d_tau, tri_yield(p.mat, p.sigma0_tri[t], abar), p.e_el_prev[t].dev())
        })
        .collect();

    let mut u = p.u_prev.to_vec();
    sys.enforce(&mut u, p.u_d_k);
    let mut pi: Vec<Dev2> = p.pi_prev.to_vec();
    let mut s_dev: Vec<Dev2> = pi.iter().map(|_| Dev2::ZERO).collect();
    let mut trace = vec![objective_j(p, &mass, &u, &pi)];
    let mut converged = false;
    let mut iters = 0;
    let mut last_decrease = f64::INFINITY;

    for _ in 0..opts.maxit {
        iters += 1;
        let mut rhs = displacement_rhs(p, &mass, &pi);
        sys.constrain_rhs(&mut rhs, p.u_d_k);
        u = cg_solve_warm(&sys.matrix, &rhs, u, opts.tol_lin, opts.maxit_lin)?;
        sys.enforce(&mut u, p.u_d_k);

        let mut dpi_max: f64 = 0.0;
        for t in 0..n_tris {
            let (mu_c, mu_d_tau, sig_y, d_prev) = coeffs[t];
            let e_dev = strain_of(mesh, &u, t).dev();
            // The dissipation in J measures the increment from the step-level
            // π_prev, so the partial minimization must too — the return is
            // re-solved from π_prev each outer iteration, not chained.
            let (pi_new, s) = radial_return(e_dev, p.pi_prev[t], d_prev, mu_c, mu_d_tau, sig_y);
            dpi_max = dpi_max.max((pi_new - pi[t]).norm());
            pi[t] = pi_new;
            s_dev[t] = s;
        }

        let j = objective_j(p, &mass, &u, &pi);
        let prev = *trace.last().unwrap();
        trace.push(j);
        last_decrease = (prev - j) / (1.0 + j.abs());
        if last_decrease <= opts.tol && dpi_max <= opts.tol_pi {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericalError::MechMaxIter {
            maxit: opts.maxit,
            last: *trace.last().unwrap(),
            decrease: last_decrease,
            trace_len: trace.len(),
        });
    }

    // Derived per-triangle fields. The deviatoric stress comes straight from
    // the radial return; only the volumetric part is recomputed, so the yield
    // bound certified by the return survives verbatim.
    let tau = p.tau;
    let mut e_el_new = Vec::with_capacity(n_tris);
    let mut sigma = Vec::with_capacity(n_tris);
    for t in 0..n_tris {
        let abar = mesh.tri_avg(p.alpha_prev, t);
        let e_el = strain_of(mesh, &u, t) - pi[t].to_sym();
        let g = p.mat.g(abar);
        let (lam_c, mu_c) = (p.mat.lambda1 * g, p.mat.mu1 * g);
        let (lam_d, mu_d) = (p.mat.lambda0 + p.mat.chi * lam_c, p.mat.mu0 + p.mat.chi * mu_c);
        let mean = (lam_c + mu_c) * e_el.tr()
            + (lam_d + mu_d) / tau * (e_el.tr() - p.e_el_prev[t].tr());
        sigma.push(s_dev[t].to_sym() + Sym2::new(mean, mean, 0.0));
        e_el_new.push(e_el);
    }

    // Free-dof equilibrium residual at the returned (u, π).
    let mut rhs = displacement_rhs(p, &mass, &pi);
    sys.constrain_rhs(&mut rhs, p.u_d_k);
    let mut ku = vec![0.0; mesh.n_dofs()];
    sys.matrix.matvec(&u, &mut ku);
    let mask = mesh.dirichlet_dof_mask();
    let eq_residual = ku
        .iter()
        .zip(&rhs)
        .zip(&mask)
        .filter(|&(_, &dir)| !dir)
        .map(|((a, b), _)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    Ok(MechResult {
        u_new: u,
        e_el_new,
        pi_new: pi,
        sigma,
        s_dev,
        objective_trace: trace,
        iters,
        eq_residual,
    })
}
