//! Time loop: scenario configuration, two-level state, initialization, the
//! staggered step (mechanical solve → damage solve → ledger), and the run
//! driver with output writing.
//!
//! A step advances the state from level `k−1` to `k` by
//! 1. minimizing the incremental mechanical functional with damage frozen at
//!    `α^{k−1}` ([`crate::mech_step`]),
//! 2. minimizing the incremental damage functional with the fresh elastic
//!    strain frozen ([`crate::damage_step`]),
//! 3. assembling the energy ledger and residuals ([`crate::diagnostics`]).
//!
//! Identical configurations produce bitwise-identical trajectories on a
//! fixed build: every accumulation order is fixed (see [`crate::parallel`]).

use std::path::PathBuf;
use std::time::Instant;

use crate::damage_step::{damage_step, DamageProblem, DamageSolveOpts};
use crate::diagnostics::{
    check_energy_inequality, energy_terms, EnergyLedger, InequalityReport, MonitorAccumulator,
    Monitors, StepData, COMPL_TOL, INEQ_RTOL, VI_TOL, YIELD_TOL,
};
use crate::error::{ConfigError, Error};
use crate::fem::{build_rect_mesh, scalar_lumped_area, strain_of, Mesh, Side, SideSet};
use crate::material::MaterialParams;
use crate::mech_step::{mechanical_step, MechProblem, MechSolveOpts};
use crate::tensor::{Dev2, Sym2};

/// Mesh source: a structured rectangle or an external plain-text file.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Rect { nx: usize, ny: usize, lx: f64, ly: f64, dirichlet: SideSet },
    File(PathBuf),
}

/// Spatially constant body force with a preset time profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyLoad {
    None,
    Constant([f64; 2]),
    /// `t·(fx, fy)`.
    Ramp([f64; 2]),
    /// `sin(2π·freq·t)·(fx, fy)`.
    Sinus([f64; 2], f64),
}

/// Spatial shape of the prescribed boundary displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcProfile {
    /// Homogeneous (clamped) boundary.
    None,
    /// `(y, 0)` — engineering shear driven by the boundary.
    Shear,
    /// `(x, 0)` — uniaxial stretch driven by the boundary.
    Stretch,
}

/// Time factor multiplying the boundary profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcDrive {
    /// Constant factor 1.
    Fixed,
    /// `rate·t`.
    Ramp(f64),
    /// `amp·sin(2π·freq·t)`.
    Sinus(f64, f64),
}

/// Initial displacement preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitU {
    Zero,
    /// The Dirichlet field at `t = 0` (always admissible).
    Bc,
}

/// Initial velocity preset; sines use the mesh bounding box and vanish on
/// the respective opposite sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitV {
    Zero,
    /// `(a·sin(π(x−x₀)/Lx), 0)`.
    SineX(f64),
    /// `(0, a·sin(π(y−y₀)/Ly))`.
    SineY(f64),
}

/// Initial plastic strain (or plastic rate) preset — uniform deviatoric
/// tensor given by `(π₁₁, π₁₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPi {
    Zero,
    Const(f64, f64),
}

/// Initial damage preset (`1` = undamaged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitAlpha {
    One,
    Const(f64),
}

/// Horizontal band `y0 ≤ y ≤ y1` (by triangle centroid) with an overridden
/// yield offset — a soft stripe that localizes plastic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandOverride {
    pub y0: f64,
    pub y1: f64,
    pub sigma0: f64,
}

/// Solver tolerances and budgets for both half-steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOpts {
    pub mech: MechSolveOpts,
    pub dmg: DamageSolveOpts,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts { mech: MechSolveOpts::default(), dmg: DamageSolveOpts::default() }
    }
}

/// Residual-probe settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagOpts {
    /// Random damage-inequality probes per step.
    pub probes: usize,
    /// Base RNG seed for the probe fields.
    pub seed: u64,
}

impl Default for DiagOpts {
    fn default() -> Self {
        DiagOpts { probes: 32, seed: 0x5EED_5EED }
    }
}

/// Output destination and cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputOpts {
    /// Output directory; `None` disables file output.
    pub dir: Option<PathBuf>,
    /// Write a field snapshot every this many steps.
    pub every: usize,
}

impl Default for OutputOpts {
    fn default() -> Self {
        OutputOpts { dir: None, every: 10 }
    }
}

/// Complete description of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mesh: MeshSpec,
    pub mat: MaterialParams,
    /// Time-step size.
    pub tau: f64,
    /// Final time; the run takes `⌈t_end/τ⌉` steps.
    pub t_end: f64,
    pub body: BodyLoad,
    pub bc_profile: BcProfile,
    pub bc_drive: BcDrive,
    pub init_u0: InitU,
    pub init_v0: InitV,
    pub init_pi0: InitPi,
    pub init_pidot0: InitPi,
    pub init_alpha0: InitAlpha,
    pub region: Option<BandOverride>,
    pub solver: SolverOpts,
    pub diag: DiagOpts,
    pub output: OutputOpts,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mesh: MeshSpec::Rect {
                nx: 16,
                ny: 16,
                lx: 1.0,
                ly: 1.0,
                dirichlet: SideSet::empty().with(Side::Left),
            },
            mat: MaterialParams::default(),
            tau: 1e-3,
            t_end: 0.2,
            body: BodyLoad::None,
            bc_profile: BcProfile::None,
            bc_drive: BcDrive::Fixed,
            init_u0: InitU::Zero,
            init_v0: InitV::Zero,
            init_pi0: InitPi::Zero,
            init_pidot0: InitPi::Zero,
            init_alpha0: InitAlpha::One,
            region: None,
            solver: SolverOpts::default(),
            diag: DiagOpts::default(),
            output: OutputOpts::default(),
        }
    }
}

impl ScenarioConfig {
    /// Validate everything that does not need the mesh realized.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mat.validate()?;
        let bad = |msg: &str| Err(ConfigError::InvalidParameter(msg.to_string()));
        if !(self.tau > 0.0) {
            return bad("time.tau must be > 0");
        }
        if self.t_end < self.tau {
            return bad("time.t_end must be >= time.tau");
        }
        if self.output.every == 0 {
            return bad("output.every must be >= 1");
        }
        if let MeshSpec::Rect { nx, ny, lx, ly, dirichlet } = &self.mesh {
            if *nx == 0 || *ny == 0 {
                return bad("mesh.nx and mesh.ny must be >= 1");
            }
            if !(*lx > 0.0 && *ly > 0.0) {
                return bad("mesh.lx and mesh.ly must be > 0");
            }
            if dirichlet.is_empty() {
                return bad("mesh.dirichlet must name at least one side");
            }
        }
        if let Some(b) = &self.region {
            if b.y0 > b.y1 {
                return bad("region.band must satisfy y0 <= y1");
            }
            if !(b.sigma0 > 0.0) {
                return bad("region.sigma0 must be > 0");
            }
        }
        if let InitAlpha::Const(c) = self.init_alpha0 {
            if !(0.0..=1.0).contains(&c) {
                return bad("init.alpha0 must lie in [0, 1]");
            }
        }
        let s = &self.solver;
        if !(s.mech.tol > 0.0 && s.mech.tol_pi > 0.0 && s.mech.tol_lin > 0.0 && s.dmg.tol > 0.0) {
            return bad("solver tolerances must be > 0");
        }
        if s.mech.maxit == 0 || s.mech.maxit_lin == 0 || s.dmg.maxit == 0 {
            return bad("solver iteration budgets must be >= 1");
        }
        Ok(())
    }

    /// Number of time steps of a run.
    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.tau) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Two consecutive levels of every unknown. Level `k` is the current one;
/// the `_prev` fields hold level `k−1`, which the inertial term and every
/// rate quotient read.
#[derive(Debug, Clone)]
pub struct State {
    /// Step index; the current time is `k·τ`.
    pub k: usize,
    pub u: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub e_el: Vec<Sym2>,
    pub e_el_prev: Vec<Sym2>,
    pub pi: Vec<Dev2>,
    pub pi_prev: Vec<Dev2>,
    pub alpha: Vec<f64>,
    pub alpha_prev: Vec<f64>,
}

impl State {
    /// Backward-difference velocity `(u − u_prev)/τ`.
    pub fn velocity(&self, tau: f64) -> Vec<f64> {
        self.u.iter().zip(&self.u_prev).map(|(a, b)| (a - b) / tau).collect()
    }
}

/// A validated, mesh-realized scenario ready to step.
#[derive(Debug)]
pub struct Simulation {
    pub cfg: ScenarioConfig,
    pub mesh: Mesh,
    /// Per-triangle yield offset after the optional band override.
    pub sigma0_tri: Vec<f64>,
    node_area: Vec<f64>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Simulation, Error> {
        cfg.validate()?;
        let mesh = match &cfg.mesh {
            MeshSpec::Rect { nx, ny, lx, ly, dirichlet } => {
                build_rect_mesh(*nx, *ny, *lx, *ly, *dirichlet)?
            }
            MeshSpec::File(path) => Mesh::read_file(path)?,
        };
        let mut sigma0_tri = vec![cfg.mat.sigma0; mesh.n_tris()];
        if let Some(band) = &cfg.region {
            for t in 0..mesh.n_tris() {
                let c = mesh.centroid(t);
                if c[1] >= band.y0 && c[1] <= band.y1 {
                    sigma0_tri[t] = band.sigma0;
                }
            }
        }
        let node_area = scalar_lumped_area(&mesh);
        let sim = Simulation { cfg, mesh, sigma0_tri, node_area };
        sim.check_initial_admissibility()?;
        Ok(sim)
    }

    /// `u0` must coincide with the Dirichlet data at `t = 0` on the
    /// constrained boundary.
    fn check_initial_admissibility(&self) -> Result<(), ConfigError> {
        if self.cfg.init_u0 == InitU::Bc {
            return Ok(());
        }
        let u_d0 = self.dirichlet_field(0.0);
        let worst = (0..self.mesh.n_nodes())
            .filter(|&n| self.mesh.is_dirichlet(n))
            .flat_map(|n| [u_d0[2 * n].abs(), u_d0[2 * n + 1].abs()])
            .fold(0.0, f64::max);
        if worst > 0.0 {
            return Err(ConfigError::InadmissibleInitialData(format!(
                "init.u0 = zero but the Dirichlet data at t = 0 reach {worst:.3e} on the \
                 constrained boundary; use init.u0 = bc or a drive vanishing at t = 0"
            )));
        }
        Ok(())
    }

    /// Prescribed boundary displacement at time `t`, interpolated to every
    /// node (only Dirichlet entries are consumed by the solver).
    pub fn dirichlet_field(&self, t: f64) -> Vec<f64> {
        let factor = match self.cfg.bc_drive {
            BcDrive::Fixed => 1.0,
            BcDrive::Ramp(rate) => rate * t,
            BcDrive::Sinus(amp, freq) => amp * (2.0 * std::f64::consts::PI * freq * t).sin(),
        };
        let mut out = vec![0.0; self.mesh.n_dofs()];
        if factor == 0.0 || self.cfg.bc_profile == BcProfile::None {
            return out;
        }
        for (n, p) in self.mesh.nodes.iter().enumerate() {
            out[2 * n] = factor
                * match self.cfg.bc_profile {
                    BcProfile::None => unreachable!(),
                    BcProfile::Shear => p[1],
                    BcProfile::Stretch => p[0],
                };
        }
        out
    }

    /// Body-force dof vector of step `k`: the 2-point Gauss time average of
    /// the load over `((k−1)τ, kτ]`, integrated against the lumped shape
    /// functions.
    pub fn body_force_vector(&self, k: usize) -> Vec<f64> {
        let tau = self.cfg.tau;
        let (amp, time_factor): ([f64; 2], Box<dyn Fn(f64) -> f64>) = match self.cfg.body {
            BodyLoad::None => ([0.0, 0.0], Box::new(|_| 0.0)),
            BodyLoad::Constant(a) => (a, Box::new(|_| 1.0)),
            BodyLoad::Ramp(a) => (a, Box::new(|t| t)),
            BodyLoad::Sinus(a, freq) => {
                (a, Box::new(move |t| (2.0 * std::f64::consts::PI * freq * t).sin()))
            }
        };
        let tm = (k as f64 - 0.5) * tau;
        let h = 0.5 * tau / 3.0f64.sqrt();
        let avg = 0.5 * (time_factor(tm - h) + time_factor(tm + h));
        let mut out = vec![0.0; self.mesh.n_dofs()];
        if avg != 0.0 {
            for n in 0..self.mesh.n_nodes() {
                out[2 * n] = avg * amp[0] * self.node_area[n];
                out[2 * n + 1] = avg * amp[1] * self.node_area[n];
            }
        }
        out
    }

    /// Build the level-0 state from the configured initial data.
    ///
    /// The fictitious level −1 encodes the initial rates:
    /// `u⁻¹ = u0 − τ·v0`, `π⁻¹ = π0 − τ·π̇0`, and the elastic strain at
    /// level −1 is the strain of that history, `e⁻¹ = e(u⁻¹) − π⁻¹`
    /// (equivalently `e(u0) − π0 − τ(e(v0) − π̇0)`).
    pub fn initialize(&self) -> State {
        let mesh = &self.mesh;
        let n = mesh.n_dofs();
        let u0 = match self.cfg.init_u0 {
            InitU::Zero => vec![0.0; n],
            InitU::Bc => self.dirichlet_field(0.0),
        };
        let (xmin, xmax, ymin, ymax) = mesh.nodes.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
        );
        let mut v0 = vec![0.0; n];
        match self.cfg.init_v0 {
            InitV::Zero => {}
            InitV::SineX(a) => {
                for (i, p) in mesh.nodes.iter().enumerate() {
                    v0[2 * i] =
                        a * (std::f64::consts::PI * (p[0] - xmin) / (xmax - xmin)).sin();
                }
            }
            InitV::SineY(a) => {
                for (i, p) in mesh.nodes.iter().enumerate() {
                    v0[2 * i + 1] =
                        a * (std::f64::consts::PI * (p[1] - ymin) / (ymax - ymin)).sin();
                }
            }
        }
        let uniform_pi = |init: InitPi| -> Dev2 {
            match init {
                InitPi::Zero => Dev2::ZERO,
                InitPi::Const(d, s) => Dev2 { d, s },
            }
        };
        let pi0 = uniform_pi(self.cfg.init_pi0);
        let pidot0 = uniform_pi(self.cfg.init_pidot0);
        let alpha0 = match self.cfg.init_alpha0 {
            InitAlpha::One => 1.0,
            InitAlpha::Const(c) => c,
        };
        let tau = self.cfg.tau;
        let u_prev: Vec<f64> = u0.iter().zip(&v0).map(|(u, v)| u - tau * v).collect();
        let pi = vec![pi0; mesh.n_tris()];
        let pi_prev = vec![pi0 - pidot0 * tau; mesh.n_tris()];
        let e_el: Vec<Sym2> =
            (0..mesh.n_tris()).map(|t| strain_of(mesh, &u0, t) - pi.to_sym_at(t)).collect();
        let e_el_prev: Vec<Sym2> = (0..mesh.n_tris())
            .map(|t| strain_of(mesh, &u_prev, t) - pi_prev.to_sym_at(t))
            .collect();
        let alpha = vec![alpha0; mesh.n_nodes()];
        State {
            k: 0,
            u: u0,
            u_prev,
            e_el,
            e_el_prev,
            pi,
            pi_prev,
            alpha: alpha.clone(),
            alpha_prev: alpha,
        }
    }

    /// Advance one step: mechanical solve with frozen damage, damage solve
    /// with frozen strain, then the full ledger.
    pub fn step(&self, state: &State) -> Result<(State, EnergyLedger), Error> {
        let k_new = state.k + 1;
        let tau = self.cfg.tau;
        let u_d_new = self.dirichlet_field(k_new as f64 * tau);
        let u_d_old = self.dirichlet_field(state.k as f64 * tau);
        let du_d: Vec<f64> =
            u_d_new.iter().zip(&u_d_old).map(|(a, b)| (a - b) / tau).collect();
        let f_k = self.body_force_vector(k_new);

        let mech = MechProblem {
            mesh: &self.mesh,
            mat: &self.cfg.mat,
            u_prev: &state.u,
            u_prev2: &state.u_prev,
            e_el_prev: &state.e_el,
            pi_prev: &state.pi,
            alpha_prev: &state.alpha,
            f_k: &f_k,
            u_d_k: &u_d_new,
            sigma0_tri: &self.sigma0_tri,
            tau,
        };
        let mr = mechanical_step(&mech, &self.cfg.solver.mech)
            .map_err(|e| Error::at_step(k_new, e))?;

        let dmg =
            DamageProblem::new(&self.mesh, &self.cfg.mat, &mr.e_el_new, &state.alpha, tau);
        let dr =
            damage_step(&dmg, &self.cfg.solver.dmg).map_err(|e| Error::at_step(k_new, e))?;

        let new_state = State {
            k: k_new,
            u: mr.u_new,
            u_prev: state.u.clone(),
            e_el: mr.e_el_new,
            e_el_prev: state.e_el.clone(),
            pi: mr.pi_new,
            pi_prev: state.pi.clone(),
            alpha: dr.alpha_new,
            alpha_prev: state.alpha.clone(),
        };
        let ledger = energy_terms(&StepData {
            mesh: &self.mesh,
            mat: &self.cfg.mat,
            tau,
            old: state,
            new: &new_state,
            s_dev: &mr.s_dev,
            sigma: &mr.sigma,
            sigma0_tri: &self.sigma0_tri,
            f_k: &f_k,
            du_d: &du_d,
            dmg: &dmg,
            probes: self.cfg.diag.probes,
            seed: self.cfg.diag.seed,
        });
        Ok((new_state, ledger))
    }

    /// Run the full time loop, invoking `on_state` for every state level
    /// including the initial one. Pure: writes nothing.
    pub fn run_with(
        &self,
        mut on_state: impl FnMut(&State),
    ) -> Result<RunSummary, Error> {
        let started = Instant::now();
        let n = self.cfg.n_steps();
        let mut state = self.initialize();
        let mut ledgers =
            vec![EnergyLedger::initial(&self.mesh, &self.cfg.mat, &state, self.cfg.tau)];
        let mut monitors = MonitorAccumulator::default();
        monitors.start(&self.mesh, &self.cfg.mat, self.cfg.tau, &state);
        on_state(&state);
        for _ in 0..n {
            let (new_state, ledger) = self.step(&state)?;
            monitors.observe(&self.mesh, &self.cfg.mat, self.cfg.tau, &state, &new_state);
            ledgers.push(ledger);
            state = new_state;
            on_state(&state);
        }
        let report = check_energy_inequality(&ledgers, 0.0, INEQ_RTOL);
        let max_yield = ledgers.iter().map(|l| l.yield_residual).fold(0.0, f64::max);
        let max_compl =
            ledgers.iter().map(|l| l.complementarity_residual).fold(0.0, f64::max);
        let max_vi = ledgers.iter().map(|l| l.damage_vi_residual).fold(0.0, f64::max);
        let pass =
            report.pass && max_yield <= YIELD_TOL && max_compl <= COMPL_TOL && max_vi <= VI_TOL;
        Ok(RunSummary {
            steps: n,
            wall_seconds: started.elapsed().as_secs_f64(),
            monitors: monitors.finish(&self.cfg.mat),
            report,
            max_yield_residual: max_yield,
            max_complementarity_residual: max_compl,
            max_vi_residual: max_vi,
            pass,
            final_state: state,
            ledgers,
        })
    }

    /// Run and, when an output directory is configured, write the snapshot
    /// series, ledger CSV, config echo, mesh, and summary.
    pub fn run(&self) -> Result<RunSummary, Error> {
        let Some(dir) = self.cfg.output.dir.clone() else {
            return self.run_with(|_| {});
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let every = self.cfg.output.every;
        let mut vtk_error = None;
        let summary = self.run_with(|state| {
            if state.k % every == 0 && vtk_error.is_none() {
                let path = dir.join(format!("state_{:06}.vtk", state.k));
                if let Err(e) =
                    crate::io::write_vtk(&path, &self.mesh, &self.cfg.mat, state, self.cfg.tau)
                {
                    vtk_error = Some(e);
                }
            }
        })?;
        if let Some(e) = vtk_error {
            return Err(e);
        }
        crate::io::write_ledger_csv(&dir.join("ledger.csv"), &summary.ledgers)?;
        std::fs::write(dir.join("config.echo.cfg"), crate::io::emit_config(&self.cfg))
            .map_err(|e| Error::io(dir.join("config.echo.cfg").display().to_string(), e))?;
        self.mesh.write_file(&dir.join("mesh.txt"))?;
        std::fs::write(dir.join("summary.txt"), summary.text())
            .map_err(|e| Error::io(dir.join("summary.txt").display().to_string(), e))?;
        Ok(summary)
    }
}

/// Final report of a completed run.
pub struct RunSummary {
    pub steps: usize,
    pub wall_seconds: f64,
    pub final_state: State,
    /// Rows `k = 0..=steps`.
    pub ledgers: Vec<EnergyLedger>,
    pub monitors: Monitors,
    pub report: InequalityReport,
    pub max_yield_residual: f64,
    pub max_complementarity_residual: f64,
    pub max_vi_residual: f64,
    /// All four residual gates green.
    pub pass: bool,
}

impl RunSummary {
    /// Human-readable summary block.
    pub fn text(&self) -> String {
        let last = self.ledgers.last().expect("at least the initial row");
        let mut s = String::new();
        s.push_str(&format!("steps              {}\n", self.steps));
        s.push_str(&format!("wall seconds       {:.3}\n", self.wall_seconds));
        s.push_str(&format!("final kinetic      {:.6e}\n", last.kinetic));
        s.push_str(&format!("final stored el.   {:.6e}\n", last.stored_elastic));
        s.push_str(&format!("final stored dmg.  {:.6e}\n", last.stored_damage));
        s.push_str(&format!(
            "worst energy residual {:.3e} (step {})\n",
            self.report.worst_normalized, self.report.worst_k
        ));
        s.push_str(&format!("max yield residual    {:.3e}\n", self.max_yield_residual));
        s.push_str(&format!(
            "max compl. residual   {:.3e}\n",
            self.max_complementarity_residual
        ));
        s.push_str(&format!("max damage-VI resid.  {:.3e}\n", self.max_vi_residual));
        for (name, value) in self.monitors.rows() {
            s.push_str(&format!("{name:<22} {value:.6e}\n"));
        }
        s.push_str(if self.pass { "gates: PASS\n" } else { "gates: FAIL\n" });
        s
    }
}

/// Helper: view a `Vec<Dev2>` entry as a symmetric tensor.
trait ToSymAt {
    fn to_sym_at(&self, t: usize) -> Sym2;
}

impl ToSymAt for Vec<Dev2> {
    fn to_sym_at(&self, t: usize) -> Sym2 {
        self[t].to_sym()
    }
}
