//! Certification layer: energy ledger, discrete energy-inequality residual,
//! yield/complementarity/damage-inequality residuals, and the a-priori norm
//! monitors.
//!
//! Every quantity uses exactly the quadrature of the solvers (P0 strains,
//! triangle-averaged damage, lumped nodal masses), so the per-step residual
//!
//! ```text
//! r_k = W_k − ΔK − ΔE_el − ΔE_dmg − D_visc − D_plast − D_dmg − τ²-terms
//! ```
//!
//! is an algebraic identity up to (a) the equilibrium residual of the
//! mechanical solve and (b) the optimality slack of the damage solve, both
//! driven below the gate tolerances by the solver settings. The τ²-weighted
//! terms are the extra dissipation the implicit scheme itself generates
//! (`(τ²/2)‖δ²u‖²_ρ` and `(τ²/2)⟨C(ᾱ)δe, δe⟩`); they belong on the
//! dissipated side, which makes the certified inequality strictly sharper
//! than plain energy decay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::damage_step::{damage_gradient, DamageProblem};
use crate::driver::State;
use crate::fem::{lumped_mass, p_laplacian_energy_grad, scalar_lumped_area, strain_of, Mesh};
use crate::material::MaterialParams;
use crate::mech_step::tri_yield;
use crate::parallel;
use crate::tensor::{Dev2, Sym2};

/// Relative gate on the cumulative energy-inequality residual.
pub const INEQ_RTOL: f64 = 1e-8;
/// Gate on the normalized yield-admissibility residual.
pub const YIELD_TOL: f64 = 1e-8;
/// Gate on the normalized flow-rule complementarity residual.
pub const COMPL_TOL: f64 = 1e-7;
/// Gate on the energy-normalized damage variational-inequality residual.
pub const VI_TOL: f64 = 1e-7;

/// Every term of the discrete energy inequality for one step, plus the
/// admissibility residuals. Scalars are in energy units unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// Step index; row 0 carries the initial energies.
    pub k: usize,
    /// Time `k·τ`.
    pub t: f64,
    /// Kinetic energy `½‖δu^k‖²_ρ` (lumped).
    pub kinetic: f64,
    /// Stored elastic energy `∫ ½C(ᾱ^k)e^k:e^k` (new-damage weighting).
    pub stored_elastic: f64,
    /// Same strain weighted with the previous damage level `ᾱ^{k−1}`; the
    /// inequality bookkeeping needs both weightings.
    pub stored_elastic_alpha_prev: f64,
    /// Stored damage energy `∫ (κ/p)|∇α^k|^p − φ(ᾱ^k)`.
    pub stored_damage: f64,
    /// Viscous dissipation of the step, `τ·∫ D(ᾱ^{k−1})δe:δe`.
    pub visc_dissip_step: f64,
    /// Plastic dissipation of the step, `Σ σ_yld(ᾱ^{k−1})|Δπ|·area`.
    pub plastic_dissip_step: f64,
    /// Damage-rate dissipation of the step, `τ·∫ η(δα)²` (lumped).
    pub damage_dissip_step: f64,
    /// Body-force work against the relative motion, `τ⟨f^k, δu − δu_D⟩`.
    pub work_body_step: f64,
    /// Dirichlet work: `τ⟨σ^k, e(δu_D)⟩ + τ⟨ρδ²u^k, δu_D⟩` (lumped inertia).
    pub work_dirichlet_step: f64,
    /// Per-step inequality residual (work minus energy increments minus
    /// dissipation minus the τ²-terms); certified `≥ −solver slack`.
    pub ineq_residual: f64,
    /// `max_tri (|dev σ| − σ_yld)₊ / σ_yld` at the `ᾱ^{k−1}` weighting.
    pub yield_residual: f64,
    /// `max_tri |dev σ : Δπ − σ_yld|Δπ|| / (σ_yld|Δπ|)` over plastifying
    /// triangles.
    pub complementarity_residual: f64,
    /// Worst normalized violation of the damage variational inequality over
    /// the probe suite.
    pub damage_vi_residual: f64,
}

impl EnergyLedger {
    /// CSV column order of the external ledger format.
    pub const CSV_HEADER: &'static str = "k,t,kinetic,stored_elastic,stored_damage,visc_d,\
                                          plast_d,dmg_d,work_body,work_dir,ineq_res,yield_res,\
                                          compl_res,vi_res";

    /// Row 0 of a run: initial energies, everything incremental zero.
    pub fn initial(mesh: &Mesh, mat: &MaterialParams, state: &State, tau: f64) -> EnergyLedger {
        let mass = lumped_mass(mesh, mat.rho);
        let v: Vec<f64> =
            state.u.iter().zip(&state.u_prev).map(|(a, b)| (a - b) / tau).collect();
        let kinetic = kinetic_energy(&mass, &v);
        let stored_elastic = stored_elastic(mesh, mat, &state.alpha, &state.e_el);
        EnergyLedger {
            k: 0,
            t: 0.0,
            kinetic,
            stored_elastic,
            stored_elastic_alpha_prev: stored_elastic,
            stored_damage: stored_damage(mesh, mat, &state.alpha),
            visc_dissip_step: 0.0,
            plastic_dissip_step: 0.0,
            damage_dissip_step: 0.0,
            work_body_step: 0.0,
            work_dirichlet_step: 0.0,
            ineq_residual: 0.0,
            yield_residual: 0.0,
            complementarity_residual: 0.0,
            damage_vi_residual: 0.0,
        }
    }

    /// One CSV data row, 17 significant digits (lossless f64 round-trip).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.k,
            self.t,
            self.kinetic,
            self.stored_elastic,
            self.stored_damage,
            self.visc_dissip_step,
            self.plastic_dissip_step,
            self.damage_dissip_step,
            self.work_body_step,
            self.work_dirichlet_step,
            self.ineq_residual,
            self.yield_residual,
            self.complementarity_residual,
            self.damage_vi_residual,
        )
    }
}

/// Everything `energy_terms` needs about one completed step: the two state
/// levels, the exact per-triangle stresses of the mechanical solve, the data
/// fields of the step, and the damage problem whose gradient defines the
/// variational inequality.
pub struct StepData<'a> {
    pub mesh: &'a Mesh,
    pub mat: &'a MaterialParams,
    pub tau: f64,
    pub old: &'a State,
    pub new: &'a State,
    /// Deviatoric total stress per triangle, verbatim from the radial return.
    pub s_dev: &'a [Dev2],
    /// Total stress per triangle at the `ᾱ^{k−1}` weighting.
    pub sigma: &'a [Sym2],
    pub sigma0_tri: &'a [f64],
    /// Body-force dof vector of the step.
    pub f_k: &'a [f64],
    /// Discrete Dirichlet velocity `(u_D^k − u_D^{k−1})/τ`, full nodal field.
    pub du_d: &'a [f64],
    /// The damage problem the step solved (frozen strain `e^k`, bound
    /// `α^{k−1}`); its gradient is the inequality being certified.
    pub dmg: &'a DamageProblem<'a>,
    /// Number of random probe fields for the damage inequality.
    pub probes: usize,
    /// Base RNG seed; mixed with the step index per step.
    pub seed: u64,
}

fn kinetic_energy(mass: &[f64], v: &[f64]) -> f64 {
    parallel::sum_over(v.len(), |d| 0.5 * mass[d] * v[d] * v[d])
}

/// `∫ ½C(ᾱ)e:e` with triangle-averaged damage.
pub fn stored_elastic(mesh: &Mesh, mat: &MaterialParams, alpha: &[f64], e: &[Sym2]) -> f64 {
    parallel::sum_over(mesh.n_tris(), |t| {
        mat.elastic_density(mesh.tri_avg(alpha, t), e[t]) * mesh.tri_area[t]
    })
}

/// `∫ (κ/p)|∇α|^p − φ(ᾱ)`: gradient regularizer plus local damage energy.
pub fn stored_damage(mesh: &Mesh, mat: &MaterialParams, alpha: &[f64]) -> f64 {
    let (reg, _) = p_laplacian_energy_grad(mesh, alpha, mat.kappa, mat.p_exp);
    reg + parallel::sum_over(mesh.n_tris(), |t| {
        -mat.phi(mesh.tri_avg(alpha, t)) * mesh.tri_area[t]
    })
}

/// Assemble the full ledger for one completed step.
pub fn energy_terms(d: &StepData) -> EnergyLedger {
    let mesh = d.mesh;
    let mat = d.mat;
    let tau = d.tau;
    let n_dofs = mesh.n_dofs();
    let mass = lumped_mass(mesh, mat.rho);
    let node_area = scalar_lumped_area(mesh);

    // Rates entering multiple terms.
    let v_new: Vec<f64> = d.new.u.iter().zip(&d.old.u).map(|(a, b)| (a - b) / tau).collect();
    let v_old: Vec<f64> =
        d.old.u.iter().zip(&d.old.u_prev).map(|(a, b)| (a - b) / tau).collect();
    let acc: Vec<f64> = v_new.iter().zip(&v_old).map(|(a, b)| (a - b) / tau).collect();

    let kinetic = kinetic_energy(&mass, &v_new);
    let kinetic_old = kinetic_energy(&mass, &v_old);

    let stored_el_new = stored_elastic(mesh, mat, &d.new.alpha, &d.new.e_el);
    let stored_el_new_aprev = stored_elastic(mesh, mat, &d.old.alpha, &d.new.e_el);
    let stored_el_old = stored_elastic(mesh, mat, &d.old.alpha, &d.old.e_el);
    let stored_dmg_new = stored_damage(mesh, mat, &d.new.alpha);
    let stored_dmg_old = stored_damage(mesh, mat, &d.old.alpha);

    // Dissipation: viscous, plastic, damage-rate; plus the τ²-weighted
    // scheme-generated terms.
    let (visc_d, plast_d, strong_el) = {
        let sums = parallel::map_over(mesh.n_tris(), |t| {
            let abar = mesh.tri_avg(&d.old.alpha, t);
            let area = mesh.tri_area[t];
            let de = (d.new.e_el[t] - d.old.e_el[t]) * (1.0 / tau);
            let dpi = (d.new.pi[t] - d.old.pi[t]).norm();
            let visc = tau * mat.viscous_density(abar, de) * area;
            let plast = tri_yield(mat, d.sigma0_tri[t], abar) * dpi * area;
            let strong = tau * tau * mat.elastic_density(abar, de) * area;
            [visc, plast, strong]
        });
        let mut acc3 = [0.0; 3];
        for s in sums {
            acc3[0] += s[0];
            acc3[1] += s[1];
            acc3[2] += s[2];
        }
        (acc3[0], acc3[1], acc3[2])
    };
    let dmg_d = parallel::sum_over(mesh.n_nodes(), |v| {
        let da = d.new.alpha[v] - d.old.alpha[v];
        mat.eta / tau * node_area[v] * da * da
    });
    let strong_kin = parallel::sum_over(n_dofs, |i| 0.5 * tau * tau * mass[i] * acc[i] * acc[i]);

    // External work.
    let work_body =
        tau * parallel::sum_over(n_dofs, |i| d.f_k[i] * (v_new[i] - d.du_d[i]));
    let work_dir_stress = tau
        * parallel::sum_over(mesh.n_tris(), |t| {
            d.sigma[t].dot(strain_of(mesh, d.du_d, t)) * mesh.tri_area[t]
        });
    let work_dir_inertia =
        tau * parallel::sum_over(n_dofs, |i| mass[i] * acc[i] * d.du_d[i]);
    let work_dir = work_dir_stress + work_dir_inertia;

    let ineq_residual = work_body + work_dir
        - (kinetic - kinetic_old)
        - (stored_el_new - stored_el_old)
        - (stored_dmg_new - stored_dmg_old)
        - visc_d
        - plast_d
        - dmg_d
        - strong_kin
        - strong_el;

    // Admissibility residuals from the radial-return stresses.
    let yield_residual = (0..mesh.n_tris())
        .map(|t| {
            let sig_y = tri_yield(mat, d.sigma0_tri[t], mesh.tri_avg(&d.old.alpha, t));
            (d.s_dev[t].norm() - sig_y).max(0.0) / sig_y
        })
        .fold(0.0, f64::max);
    let complementarity_residual = (0..mesh.n_tris())
        .map(|t| {
            let dpi = d.new.pi[t] - d.old.pi[t];
            let dpi_norm = dpi.norm();
            if dpi_norm == 0.0 {
                return 0.0;
            }
            let sig_y = tri_yield(mat, d.sigma0_tri[t], mesh.tri_avg(&d.old.alpha, t));
            (d.s_dev[t].dot(dpi) - sig_y * dpi_norm).abs() / (sig_y * dpi_norm)
        })
        .fold(0.0, f64::max);

    let damage_vi_residual = damage_vi_residual(d, kinetic + stored_el_new + stored_dmg_new + 1.0);

    EnergyLedger {
        k: d.new.k,
        t: d.new.k as f64 * tau,
        kinetic,
        stored_elastic: stored_el_new,
        stored_elastic_alpha_prev: stored_el_new_aprev,
        stored_damage: stored_dmg_new,
        visc_dissip_step: visc_d,
        plastic_dissip_step: plast_d,
        damage_dissip_step: dmg_d,
        work_body_step: work_body,
        work_dirichlet_step: work_dir,
        ineq_residual,
        yield_residual,
        complementarity_residual,
        damage_vi_residual,
    }
}

/// Worst normalized violation of the discrete damage variational inequality
///
/// ```text
/// ⟨∇G(α^k), z − α^k⟩ ≥ 0   for all z with 0 ≤ z ≤ α^{k−1},
/// ```
///
/// probed at the two distinguished fields `z = α^{k−1}` (the direction the
/// energy certificate uses) and `z = 0` (total failure), plus `probes`
/// seeded-random admissible fields alternating between downward probes
/// `z ∈ [0, α^k]` and box probes `z ∈ [0, α^{k−1}]`.
pub fn damage_vi_residual(d: &StepData, scale: f64) -> f64 {
    let n = d.mesh.n_nodes();
    let grad = damage_gradient(d.dmg, &d.new.alpha);
    let pairing = |z: &[f64]| -> f64 {
        parallel::sum_over(n, |v| grad[v] * (z[v] - d.new.alpha[v]))
    };
    let mut worst = (-pairing(&d.old.alpha)).max(0.0);
    worst = worst.max(-pairing(&vec![0.0; n]));
    let mut rng = ChaCha8Rng::seed_from_u64(
        d.seed ^ (d.new.k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    for j in 0..d.probes {
        let bound = if j % 2 == 0 { &d.new.alpha } else { &d.old.alpha };
        let z: Vec<f64> = bound.iter().map(|&ub| rng.random::<f64>() * ub).collect();
        worst = worst.max(-pairing(&z));
    }
    worst.max(0.0) / scale
}

/// Report of the cumulative energy-inequality check over a ledger sequence.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    /// Most negative cumulative residual divided by its scale (≥ 0 when the
    /// inequality holds everywhere with margin).
    pub worst_normalized: f64,
    /// Step index attaining the worst normalized residual.
    pub worst_k: usize,
    /// Steps whose cumulative residual undershoots `−atol − rtol·scale`.
    pub violations: Vec<usize>,
    /// Steps with a negative dissipation entry (must be empty).
    pub negative_dissipation: Vec<usize>,
    pub pass: bool,
}

/// Check the accumulated inequality at every truncation point `[0, kτ]`:
/// the running sum of per-step residuals must stay above
/// `−atol − rtol·scale_k` with `scale_k = kinetic + stored + cumulative
/// dissipation + 1` at level `k`.
pub fn check_energy_inequality(
    ledgers: &[EnergyLedger],
    atol: f64,
    rtol: f64,
) -> InequalityReport {
    assert!(!ledgers.is_empty(), "ledger sequence must be nonempty");
    let mut cum_residual = 0.0;
    let mut cum_dissip = 0.0;
    let mut worst_normalized = f64::INFINITY;
    let mut worst_k = ledgers[0].k;
    let mut violations = Vec::new();
    let mut negative_dissipation = Vec::new();
    for l in ledgers {
        if l.visc_dissip_step < 0.0 || l.plastic_dissip_step < 0.0 || l.damage_dissip_step < 0.0 {
            negative_dissipation.push(l.k);
        }
        cum_residual += l.ineq_residual;
        cum_dissip += l.visc_dissip_step + l.plastic_dissip_step + l.damage_dissip_step;
        let scale = l.kinetic + l.stored_elastic + l.stored_damage + cum_dissip + 1.0;
        let normalized = cum_residual / scale;
        if normalized < worst_normalized {
            worst_normalized = normalized;
            worst_k = l.k;
        }
        if cum_residual < -atol - rtol * scale {
            violations.push(l.k);
        }
    }
    let pass = violations.is_empty() && negative_dissipation.is_empty();
    InequalityReport { worst_normalized, worst_k, violations, negative_dissipation, pass }
}

/// Discrete surrogates of the a-priori bounded quantities; stable under
/// τ-refinement, which the acceptance suite checks across halvings.
#[derive(Debug, Clone, Default)]
pub struct Monitors {
    /// `max_k ‖δu^k‖_{L²}` (plain lumped L², density-free).
    pub max_velocity_l2: f64,
    /// `(Σ_k τ‖δe^k‖²_{L²})^½`.
    pub strain_rate_l2l2: f64,
    /// `Σ_k |Δπ^k|(Ω)` — total plastic variation.
    pub plastic_variation: f64,
    /// `max_k ‖∇α^k‖_{L^p}`.
    pub max_grad_alpha_lp: f64,
    /// `(Σ_k τ‖δα^k‖²_{L²})^½` (lumped).
    pub damage_rate_l2l2: f64,
    /// `max_k ‖δe^k‖_{L²}` — higher-order monitor.
    pub max_strain_rate_l2: f64,
    /// `max_k |δπ^k|(Ω)` — higher-order monitor.
    pub max_plastic_rate_tv: f64,
}

impl Monitors {
    /// Name/value rows in a fixed order, for tables and sweep comparisons.
    pub fn rows(&self) -> [(&'static str, f64); 7] {
        [
            ("max |velocity| L2", self.max_velocity_l2),
            ("strain rate L2(L2)", self.strain_rate_l2l2),
            ("plastic variation", self.plastic_variation),
            ("max |grad alpha| Lp", self.max_grad_alpha_lp),
            ("damage rate L2(L2)", self.damage_rate_l2l2),
            ("max strain rate L2", self.max_strain_rate_l2),
            ("max plastic rate TV", self.max_plastic_rate_tv),
        ]
    }
}

/// Streaming accumulator for [`Monitors`]; feed the initial state with
/// [`MonitorAccumulator::start`], then every consecutive pair.
#[derive(Debug, Default)]
pub struct MonitorAccumulator {
    max_velocity_sq: f64,
    sum_tau_de_sq: f64,
    plastic_variation: f64,
    max_grad_alpha_p: f64,
    sum_tau_dalpha_sq: f64,
    max_de_sq: f64,
    max_dpi_tv: f64,
}

impl MonitorAccumulator {
    pub fn start(&mut self, mesh: &Mesh, mat: &MaterialParams, tau: f64, s0: &State) {
        let node_area = scalar_lumped_area(mesh);
        let mut v_sq = 0.0;
        for n in 0..mesh.n_nodes() {
            let vx = (s0.u[2 * n] - s0.u_prev[2 * n]) / tau;
            let vy = (s0.u[2 * n + 1] - s0.u_prev[2 * n + 1]) / tau;
            v_sq += node_area[n] * (vx * vx + vy * vy);
        }
        self.max_velocity_sq = self.max_velocity_sq.max(v_sq);
        self.max_grad_alpha_p = self.max_grad_alpha_p.max(grad_alpha_lp_pow(mesh, mat, &s0.alpha));
    }

    pub fn observe(
        &mut self,
        mesh: &Mesh,
        mat: &MaterialParams,
        tau: f64,
        old: &State,
        new: &State,
    ) {
        let node_area = scalar_lumped_area(mesh);
        let (mut v_sq, mut dalpha_sq) = (0.0, 0.0);
        for n in 0..mesh.n_nodes() {
            let vx = (new.u[2 * n] - old.u[2 * n]) / tau;
            let vy = (new.u[2 * n + 1] - old.u[2 * n + 1]) / tau;
            v_sq += node_area[n] * (vx * vx + vy * vy);
            let da = (new.alpha[n] - old.alpha[n]) / tau;
            dalpha_sq += node_area[n] * da * da;
        }
        let (mut de_sq, mut dpi_tv) = (0.0, 0.0);
        for t in 0..mesh.n_tris() {
            let de = (new.e_el[t] - old.e_el[t]) * (1.0 / tau);
            de_sq += mesh.tri_area[t] * de.norm_sq();
            dpi_tv += mesh.tri_area[t] * (new.pi[t] - old.pi[t]).norm();
        }
        self.max_velocity_sq = self.max_velocity_sq.max(v_sq);
        self.sum_tau_de_sq += tau * de_sq;
        self.plastic_variation += dpi_tv;
        self.max_grad_alpha_p = self.max_grad_alpha_p.max(grad_alpha_lp_pow(mesh, mat, &new.alpha));
        self.sum_tau_dalpha_sq += tau * dalpha_sq;
        self.max_de_sq = self.max_de_sq.max(de_sq);
        self.max_dpi_tv = self.max_dpi_tv.max(dpi_tv / tau);
    }

    pub fn finish(self, mat: &MaterialParams) -> Monitors {
        Monitors {
            max_velocity_l2: self.max_velocity_sq.sqrt(),
            strain_rate_l2l2: self.sum_tau_de_sq.sqrt(),
            plastic_variation: self.plastic_variation,
            max_grad_alpha_lp: self.max_grad_alpha_p.powf(1.0 / mat.p_exp),
            damage_rate_l2l2: self.sum_tau_dalpha_sq.sqrt(),
            max_strain_rate_l2: self.max_de_sq.sqrt(),
            max_plastic_rate_tv: self.max_dpi_tv,
        }
    }
}

fn grad_alpha_lp_pow(mesh: &Mesh, mat: &MaterialParams, alpha: &[f64]) -> f64 {
    let (reg, _) = p_laplacian_energy_grad(mesh, alpha, 1.0, mat.p_exp);
    // reg = (1/p)·Σ|∇α|^p·area at unit κ.
    reg * mat.p_exp
}

/// Monitor table over a stored trajectory of consecutive states.
pub fn apriori_norms(
    mesh: &Mesh,
    mat: &MaterialParams,
    tau: f64,
    trajectory: &[State],
) -> Monitors {
    assert!(!trajectory.is_empty());
    let mut acc = MonitorAccumulator::default();
    acc.start(mesh, mat, tau, &trajectory[0]);
    for pair in trajectory.windows(2) {
        acc.observe(mesh, mat, tau, &pair[0], &pair[1]);
    }
    acc.finish(mat)
}
