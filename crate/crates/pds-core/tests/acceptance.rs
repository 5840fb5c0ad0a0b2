//! Acceptance suite: ten certified solver properties, one test per
//! criterion. Each prints an `acceptance NN <name>: PASS`/`FAIL` line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The oracles here are deliberately independent of the production kernels:
//! grid search plus golden-section refinement against the radial return, a
//! dense Voigt-assembled Kelvin–Voigt integrator against the full staggered
//! driver, and an active-set box-QP against the projected-gradient damage
//! step.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pds_core::damage_step::{
    damage_gradient, damage_objective, damage_step, DamageProblem, DamageSolveOpts,
};
use pds_core::diagnostics::{COMPL_TOL, VI_TOL, YIELD_TOL};
use pds_core::driver::{
    InitV, MeshSpec, RunSummary, ScenarioConfig, Simulation, State,
};
use pds_core::fem::{
    build_rect_mesh, p_laplacian_energy_grad, scalar_lumped_area, Mesh, Side, SideSet,
};
use pds_core::io::read_config;
use pds_core::material::MaterialParams;
use pds_core::mech_step::radial_return;
use pds_core::tensor::Dev2;

/// Run a criterion body and print its verdict line either way.
fn gate(name: &str, body: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(e) => {
            println!("acceptance {name}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

fn preset(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    read_config(&path).unwrap()
}

/// Lumped L² norm of a nodal vector field.
fn l2_norm(areas: &[f64], u: &[f64]) -> f64 {
    areas
        .iter()
        .enumerate()
        .map(|(v, a)| a * (u[2 * v] * u[2 * v] + u[2 * v + 1] * u[2 * v + 1]))
        .sum::<f64>()
        .sqrt()
}

fn l2_diff(areas: &[f64], u: &[f64], w: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
    l2_norm(areas, &d)
}

// ---------------------------------------------------------------------------
// 1. Radial return against brute-force minimization
// ---------------------------------------------------------------------------

/// The per-element incremental objective the radial return minimizes.
fn element_objective(
    pi: Dev2,
    e: Dev2,
    pi_prev: Dev2,
    d_prev: Dev2,
    mu_c: f64,
    mu_d_tau: f64,
    sig_y: f64,
) -> f64 {
    mu_c * (e - pi).norm_sq() + mu_d_tau * (e - pi - d_prev).norm_sq()
        + sig_y * (pi - pi_prev).norm()
}

/// Brute-force minimizer: a 2-parameter grid over a box containing both the
/// previous plastic strain and the unconstrained quadratic minimizer,
/// followed by golden-section refinement on the segment between those two
/// points. Restricting to the segment is exact: projection onto it shortens
/// the distance to both of its endpoints, hence decreases both objective
/// terms; the grid argmin cross-checks the reduction per instance.
fn brute_force_pi(
    e: Dev2,
    pi_prev: Dev2,
    d_prev: Dev2,
    mu_c: f64,
    mu_d_tau: f64,
    sig_y: f64,
) -> Dev2 {
    let f = |pi: Dev2| element_objective(pi, e, pi_prev, d_prev, mu_c, mu_d_tau, sig_y);
    // Unconstrained minimizer of the quadratic part.
    let pi_u = e - d_prev * (mu_d_tau / (mu_c + mu_d_tau));

    // Coarse 2-D grid over a covering box.
    let cx = 0.5 * (pi_prev.d + pi_u.d);
    let cy = 0.5 * (pi_prev.s + pi_u.s);
    let w = 0.65 * (pi_prev.d - pi_u.d).abs().max((pi_prev.s - pi_u.s).abs()) + 1e-3;
    let n = 64;
    let mut grid_best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let p = Dev2::new(
                cx - w + 2.0 * w * i as f64 / n as f64,
                cy - w + 2.0 * w * j as f64 / n as f64,
            );
            let fp = f(p);
            if fp < grid_best {
                grid_best = fp;
            }
        }
    }

    // Golden-section refinement on the segment pi_prev → pi_u.
    let at = |t: f64| pi_prev + (pi_u - pi_prev) * t;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-1e-3, 1.0 + 1e-3);
    let (mut c1, mut c2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (f(at(c1)), f(at(c2)));
    for _ in 0..120 {
        if f1 <= f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = f(at(c1));
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = f(at(c2));
        }
    }
    let refined = at(0.5 * (a + b));
    // The segment optimum must be at least as good as any grid point.
    assert!(
        f(refined) <= grid_best + 1e-12 * (1.0 + grid_best.abs()),
        "segment reduction missed the grid minimum: {} vs {}",
        f(refined),
        grid_best
    );
    refined
}

#[test]
fn criterion_01_radial_return_matches_brute_force() {
    gate("01 radial return vs brute-force minimization", || {
        let started = Instant::now();
        let mut rng = StdRng::seed_from_u64(0xACCE_0001);
        let sym = |rng: &mut StdRng| {
            Dev2::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        };
        for case in 0..1000 {
            let e = sym(&mut rng);
            let pi_prev = sym(&mut rng);
            let d_prev = sym(&mut rng);
            let mu_c = 10.0 * rng.random::<f64>(); // [0, 10)
            let mu_d_tau = 10.0 * (1.0 - rng.random::<f64>()); // (0, 10]
            let sig_y = 5.0 * (1.0 - rng.random::<f64>()); // (0, 5]
            let (pi_rr, _) = radial_return(e, pi_prev, d_prev, mu_c, mu_d_tau, sig_y);
            let pi_bf = brute_force_pi(e, pi_prev, d_prev, mu_c, mu_d_tau, sig_y);
            assert!(
                (pi_rr.d - pi_bf.d).abs() <= 1e-6 && (pi_rr.s - pi_bf.s).abs() <= 1e-6,
                "case {case}: radial return {pi_rr:?} vs brute force {pi_bf:?} \
                 (mu_c {mu_c:.3}, mu_d_tau {mu_d_tau:.3}, sig_y {sig_y:.3})"
            );
        }
        let secs = started.elapsed().as_secs_f64();
        assert!(secs < 10.0, "brute-force comparison took {secs:.1} s");
    });
}

// ---------------------------------------------------------------------------
// 2–4. Certified runs of the two reference scenarios
// ---------------------------------------------------------------------------

/// Run a scenario while asserting the exact damage box/monotonicity
/// invariants on every state.
fn certified_run(cfg: ScenarioConfig) -> RunSummary {
    let sim = Simulation::new(cfg).unwrap();
    let mut prev_alpha: Option<Vec<f64>> = None;
    sim.run_with(|s: &State| {
        for (v, &a) in s.alpha.iter().enumerate() {
            assert!((0.0..=1.0).contains(&a), "alpha out of [0,1] at node {v}: {a}");
            if let Some(pa) = &prev_alpha {
                assert!(a <= pa[v], "damage increased at node {v}: {a} > {}", pa[v]);
            }
        }
        prev_alpha = Some(s.alpha.clone());
    })
    .unwrap()
}

#[test]
fn criterion_02_discrete_energy_inequality() {
    gate("02 discrete energy inequality on both reference scenarios", || {
        for name in ["shear_band.cfg", "elastic_wave.cfg"] {
            let started = Instant::now();
            let summary = certified_run(preset(name));
            let secs = started.elapsed().as_secs_f64();
            assert!(
                summary.report.pass,
                "{name}: cumulative energy residual {:.3e} below −1e−8·scale at step {} \
                 (violations {:?})",
                summary.report.worst_normalized,
                summary.report.worst_k,
                summary.report.violations
            );
            assert!(secs < 60.0, "{name} took {secs:.1} s");
        }
    });
}

#[test]
fn criterion_03_yield_and_complementarity() {
    gate("03 yield admissibility and flow-rule complementarity", || {
        for name in ["shear_band.cfg", "elastic_wave.cfg"] {
            let summary = certified_run(preset(name));
            assert!(
                summary.max_yield_residual <= YIELD_TOL,
                "{name}: yield residual {:.3e} above {YIELD_TOL:e}",
                summary.max_yield_residual
            );
            assert!(
                summary.max_complementarity_residual <= COMPL_TOL,
                "{name}: complementarity residual {:.3e} above {COMPL_TOL:e}",
                summary.max_complementarity_residual
            );
        }
    });
}

#[test]
fn criterion_04_damage_monotonicity_and_inequality() {
    gate("04 damage unidirectionality, box, variational inequality", || {
        for name in ["shear_band.cfg", "elastic_wave.cfg", "bar_stretch.cfg"] {
            let cfg = preset(name);
            assert_eq!(cfg.diag.probes, 32, "reference scenarios probe 32 fields");
            // Exact box and monotonicity asserted inside certified_run.
            let summary = certified_run(cfg);
            assert!(
                summary.max_vi_residual <= VI_TOL,
                "{name}: damage inequality residual {:.3e} above {VI_TOL:e}",
                summary.max_vi_residual
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 5. Elastic-limit regression against a dense Kelvin–Voigt integrator
// ---------------------------------------------------------------------------

/// Dense Voigt-notation assembly of the isotropic stiffness with moduli
/// `(lam, mu)`: per element `area·BᵀDB` accumulated into the global matrix.
fn dense_stiffness(mesh: &Mesh, lam: f64, mu: f64) -> DMatrix<f64> {
    let nd = mesh.n_dofs();
    let mut k = DMatrix::zeros(nd, nd);
    let d_mat =
        nalgebra::Matrix3::new(lam + 2.0 * mu, lam, 0.0, lam, lam + 2.0 * mu, 0.0, 0.0, 0.0, mu);
    for t in 0..mesh.n_tris() {
        let g = &mesh.tri_grads[t];
        // Rows of B: e_xx, e_yy, gamma_xy against the 6 local dofs.
        let mut b = nalgebra::Matrix3x6::zeros();
        for (a, ga) in g.iter().enumerate() {
            b[(0, 2 * a)] = ga[0];
            b[(1, 2 * a + 1)] = ga[1];
            b[(2, 2 * a)] = ga[1];
            b[(2, 2 * a + 1)] = ga[0];
        }
        let ke = b.transpose() * d_mat * b * mesh.tri_area[t];
        let verts = mesh.tris[t];
        for a in 0..3 {
            for ca in 0..2 {
                for bb in 0..3 {
                    for cb in 0..2 {
                        k[(2 * verts[a] + ca, 2 * verts[bb] + cb)] +=
                            ke[(2 * a + ca, 2 * bb + cb)];
                    }
                }
            }
        }
    }
    k
}

#[test]
fn criterion_05_elastic_limit_matches_dense_kelvin_voigt() {
    gate("05 elastic-limit regression vs dense Kelvin-Voigt integrator", || {
        let started = Instant::now();
        let mut cfg = ScenarioConfig {
            mesh: MeshSpec::Rect {
                nx: 8,
                ny: 8,
                lx: 1.0,
                ly: 1.0,
                dirichlet: SideSet::empty().with(Side::Left).with(Side::Right),
            },
            tau: 1e-3,
            t_end: 0.1,
            init_v0: InitV::SineX(0.5),
            ..ScenarioConfig::default()
        };
        cfg.mat.sigma0 = 1e12;
        cfg.mat.gc = 1e12;
        let tau = cfg.tau;
        let mat = cfg.mat.clone();
        let sim = Simulation::new(cfg).unwrap();
        let mut traj = Vec::new();
        sim.run_with(|s: &State| traj.push(s.u.clone())).unwrap();
        assert_eq!(traj.len(), 101);

        // Independent dense integrator: same central second difference in
        // time, Kelvin-Voigt moduli frozen at the undamaged value.
        let mesh = &sim.mesh;
        let g1 = mat.g(1.0);
        let (lam_c, mu_c) = (mat.lambda1 * g1, mat.mu1 * g1);
        let (lam_d, mu_d) = (mat.lambda0 + mat.chi * lam_c, mat.mu0 + mat.chi * mu_c);
        let k_c = dense_stiffness(mesh, lam_c, mu_c);
        let k_d = dense_stiffness(mesh, lam_d, mu_d);
        let nd = mesh.n_dofs();
        let mass: Vec<f64> = {
            let areas = scalar_lumped_area(mesh);
            (0..nd).map(|d| mat.rho * areas[d / 2]).collect()
        };
        let mut a_sys = &k_c + &k_d / tau;
        for d in 0..nd {
            a_sys[(d, d)] += mass[d] / (tau * tau);
        }
        // Homogeneous Dirichlet rows/columns.
        let mask = mesh.dirichlet_dof_mask();
        for d in 0..nd {
            if mask[d] {
                for j in 0..nd {
                    a_sys[(d, j)] = 0.0;
                    a_sys[(j, d)] = 0.0;
                }
                a_sys[(d, d)] = 1.0;
            }
        }
        let chol = a_sys.cholesky().expect("dense system SPD");
        let (xmin, xmax) = mesh
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
        let mut u21: Vec<DVector<f64>> = {
            let mut v0 = DVector::zeros(nd);
            for (i, p) in mesh.nodes.iter().enumerate() {
                v0[2 * i] =
                    0.5 * (std::f64::consts::PI * (p[0] - xmin) / (xmax - xmin)).sin();
            }
            vec![-tau * v0, DVector::zeros(nd)] // levels −1 and 0
        };
        let areas = scalar_lumped_area(mesh);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for k in 1..=100 {
            let (up, u) = (&u21[0], &u21[1]);
            let mut rhs = &k_d * u / tau;
            for d in 0..nd {
                rhs[d] += mass[d] / (tau * tau) * (2.0 * u[d] - up[d]);
                if mask[d] {
                    rhs[d] = 0.0;
                }
            }
            let next = chol.solve(&rhs);
            worst = worst.max(l2_diff(&areas, next.as_slice(), &traj[k]));
            scale = scale.max(l2_norm(&areas, next.as_slice()));
            u21 = vec![u21.pop().unwrap(), next];
        }
        let rel = worst / scale;
        assert!(rel <= 1e-6, "trajectories diverge: relative L∞(L²) error {rel:.3e}");
        let secs = started.elapsed().as_secs_f64();
        assert!(secs < 20.0, "regression took {secs:.1} s");
    });
}

// ---------------------------------------------------------------------------
// 6 & 9. Step-size refinement: consistency order and monitor stability
// ---------------------------------------------------------------------------

/// Run `bar_stretch` at one step size, returning displacement snapshots at
/// the common coarse times (multiples of 2e−3) and the norm monitors.
fn bar_stretch_at(tau: f64) -> (Vec<Vec<f64>>, Vec<(&'static str, f64)>) {
    let mut cfg = preset("bar_stretch.cfg");
    cfg.tau = tau;
    let stride = (2e-3 / tau).round() as usize;
    assert!((stride as f64 * tau - 2e-3).abs() < 1e-12);
    let sim = Simulation::new(cfg).unwrap();
    let mut snaps = Vec::new();
    let summary = sim
        .run_with(|s: &State| {
            if s.k % stride == 0 {
                snaps.push(s.u.clone());
            }
        })
        .unwrap();
    assert!(summary.pass);
    (snaps, summary.monitors.rows().to_vec())
}

#[test]
fn criterion_06_step_size_consistency_order() {
    gate("06 step-size refinement converges with order >= 0.8", || {
        let started = Instant::now();
        let h = 5e-4;
        let taus = [4.0 * h, 2.0 * h, h, 0.5 * h];
        let runs: Vec<_> = taus.iter().map(|&t| bar_stretch_at(t).0).collect();
        let mesh = Simulation::new(preset("bar_stretch.cfg")).unwrap().mesh;
        let areas = scalar_lumped_area(&mesh);
        let mut d = Vec::new();
        for pair in runs.windows(2) {
            assert_eq!(pair[0].len(), pair[1].len());
            let diff = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| l2_diff(&areas, a, b))
                .fold(0.0, f64::max);
            d.push(diff);
        }
        println!("  successive differences: {d:?}");
        for i in 0..d.len() - 1 {
            assert!(d[i] > d[i + 1], "differences not monotone: {d:?}");
            let order = (d[i] / d[i + 1]).log2();
            assert!(order >= 0.8, "empirical order {order:.2} below 0.8 (diffs {d:?})");
        }
        let secs = started.elapsed().as_secs_f64();
        assert!(secs < 120.0, "sweep took {secs:.1} s");
    });
}

#[test]
fn criterion_09_monitor_stability_under_refinement() {
    gate("09 norm monitors stable across step-size refinement", || {
        let h = 5e-4;
        let taus = [4.0 * h, 2.0 * h, h, 0.5 * h];
        let tables: Vec<_> = taus.iter().map(|&t| bar_stretch_at(t).1).collect();
        for pair in tables.windows(2) {
            for ((name, a), (_, b)) in pair[0].iter().zip(&pair[1]) {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
                assert!(
                    rel < 0.25,
                    "monitor `{name}` varies by {:.1}% between refinements ({a:e} vs {b:e})",
                    100.0 * rel
                );
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 7. Damage step against an active-set box QP
// ---------------------------------------------------------------------------

/// Textbook primal active-set solver for `min ½xᵀHx − bᵀx` over
/// `0 ≤ x ≤ ub`, H symmetric positive definite: solve the equality-
/// constrained problem on the free set, walk with a ratio test, exchange
/// the blocking or most-negative-multiplier constraint, repeat.
fn box_qp_active_set(h: &DMatrix<f64>, b: &DVector<f64>, ub: &[f64]) -> DVector<f64> {
    let n = ub.len();
    #[derive(Clone, Copy, PartialEq)]
    enum Bound {
        Free,
        Lower,
        Upper,
    }
    let mut state = vec![Bound::Upper; n];
    let mut x = DVector::from_iterator(n, ub.iter().copied());
    for _ in 0..20 * n + 20 {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        // Equality-constrained optimum with the bound variables pinned.
        let mut target = x.clone();
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
            let mut rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| b[i]));
            for (fi, &i) in free.iter().enumerate() {
                for j in 0..n {
                    if state[j] != Bound::Free {
                        rhs[fi] -= h[(i, j)] * x[j];
                    }
                }
            }
            let sol = hff.cholesky().expect("free block SPD").solve(&rhs);
            for (fi, &i) in free.iter().enumerate() {
                target[i] = sol[fi];
            }
        }
        // Ratio test toward the equality-constrained optimum.
        let step = &target - &x;
        let mut gamma = 1.0f64;
        let mut blocker: Option<(usize, Bound)> = None;
        for &i in &free {
            if step[i] < 0.0 && x[i] + step[i] < 0.0 {
                let g = -x[i] / step[i];
                if g < gamma {
                    gamma = g;
                    blocker = Some((i, Bound::Lower));
                }
            } else if step[i] > 0.0 && x[i] + step[i] > ub[i] {
                let g = (ub[i] - x[i]) / step[i];
                if g < gamma {
                    gamma = g;
                    blocker = Some((i, Bound::Upper));
                }
            }
        }
        x += gamma * step;
        if let Some((i, bound)) = blocker {
            x[i] = if bound == Bound::Lower { 0.0 } else { ub[i] };
            state[i] = bound;
            continue;
        }
        // Full step taken: check multiplier signs at the active bounds.
        let grad = h * &x - b;
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let viol = match state[i] {
                Bound::Upper => grad[i].max(0.0),   // wants to move down
                Bound::Lower => (-grad[i]).max(0.0), // wants to move up
                Bound::Free => 0.0,
            };
            if viol > 1e-12 && worst.map_or(true, |(_, w)| viol > w) {
                worst = Some((i, viol));
            }
        }
        match worst {
            Some((i, _)) => state[i] = Bound::Free,
            None => return x,
        }
    }
    panic!("active-set iteration did not terminate");
}

#[test]
fn criterion_07_damage_step_matches_box_qp_oracle() {
    gate("07 damage step vs active-set box-QP oracle", || {
        let mesh = build_rect_mesh(5, 4, 1.0, 0.8, SideSet::empty().with(Side::Left)).unwrap();
        let n = mesh.n_nodes();
        assert!(n <= 50, "oracle mesh should stay small, got {n} nodes");
        let mut mat = MaterialParams::default();
        mat.gc = 0.02;
        mat.kappa = 2e-3;
        assert_eq!(mat.p_exp, 2.0, "the QP oracle needs the quadratic regularizer");
        let tau = 1e-3;
        let mut rng = StdRng::seed_from_u64(0xACCE_0007);
        for field in 0..50 {
            let e_el: Vec<_> = (0..mesh.n_tris())
                .map(|_| {
                    pds_core::tensor::Sym2::new(
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                    )
                })
                .collect();
            let alpha_prev: Vec<f64> =
                (0..n).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect();
            let p = DamageProblem::new(&mesh, &mat, &e_el, &alpha_prev, tau);

            // At p = 2 the objective is an exact quadratic: recover H and b
            // from the affine gradient, then verify the recovery on a probe.
            let zero = vec![0.0; n];
            let g0 = damage_gradient(&p, &zero);
            let f0 = damage_objective(&p, &zero);
            let mut h = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut ej = zero.clone();
                ej[j] = 1.0;
                let gj = damage_gradient(&p, &ej);
                for i in 0..n {
                    h[(i, j)] = gj[i] - g0[i];
                }
            }
            let asym = (&h - h.transpose()).abs().max();
            assert!(asym < 1e-10, "recovered Hessian asymmetric by {asym:e}");
            h = (&h + h.transpose()) * 0.5;
            let b = -DVector::from_iterator(n, g0.iter().copied());
            {
                let probe =
                    DVector::from_iterator(n, (0..n).map(|_| rng.random::<f64>()));
                let quad = f0 - b.dot(&probe) + 0.5 * (&h * &probe).dot(&probe);
                let direct = damage_objective(&p, probe.as_slice());
                assert!(
                    (quad - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                    "objective is not the recovered quadratic: {quad} vs {direct}"
                );
            }

            let x_qp = box_qp_active_set(&h, &b, &alpha_prev);
            let pg = damage_step(&p, &DamageSolveOpts::default()).unwrap();
            let obj_pg = damage_objective(&p, &pg.alpha_new);
            let obj_qp = damage_objective(&p, x_qp.as_slice());
            assert!(
                (obj_pg - obj_qp).abs() <= 1e-8,
                "field {field}: objective gap {:.3e} (pg {obj_pg}, qp {obj_qp})",
                (obj_pg - obj_qp).abs()
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 8. p-Laplacian gradient against central finite differences
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_p_laplacian_gradient_check() {
    gate("08 p-Laplacian analytic gradient vs finite differences", || {
        let mesh = build_rect_mesh(5, 4, 1.3, 0.9, SideSet::empty().with(Side::Left)).unwrap();
        let kappa = 0.37;
        let mut rng = StdRng::seed_from_u64(0xACCE_0008);
        for p_exp in [2.0, 3.0] {
            for _ in 0..5 {
                let alpha: Vec<f64> =
                    (0..mesh.n_nodes()).map(|_| 0.2 + 0.8 * rng.random::<f64>()).collect();
                let (_, grad) = p_laplacian_energy_grad(&mesh, &alpha, kappa, p_exp);
                for v in 0..mesh.n_nodes() {
                    let h = 1e-6;
                    let mut ap = alpha.clone();
                    ap[v] += h;
                    let mut am = alpha.clone();
                    am[v] -= h;
                    let (ep, _) = p_laplacian_energy_grad(&mesh, &ap, kappa, p_exp);
                    let (em, _) = p_laplacian_energy_grad(&mesh, &am, kappa, p_exp);
                    let fd = (ep - em) / (2.0 * h);
                    let rel = (grad[v] - fd).abs() / grad[v].abs().max(fd.abs()).max(1e-10);
                    assert!(
                        rel < 1e-6,
                        "p = {p_exp}, node {v}: analytic {} vs fd {fd} (rel {rel:.2e})",
                        grad[v]
                    );
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 10. Exact fixed point at rest
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_rest_state_is_exact_fixed_point() {
    gate("10 resting state is a bitwise fixed point for 50 steps", || {
        let cfg = ScenarioConfig { t_end: 50e-3, ..ScenarioConfig::default() };
        let sim = Simulation::new(cfg).unwrap();
        let mut states_seen = 0;
        let summary = sim
            .run_with(|s: &State| {
                states_seen += 1;
                assert!(s.u.iter().all(|&v| v == 0.0), "displacement moved at step {}", s.k);
                assert!(s.u_prev.iter().all(|&v| v == 0.0));
                assert!(s.alpha.iter().all(|&a| a == 1.0), "damage moved at step {}", s.k);
                assert!(s.pi.iter().all(|q| q.d == 0.0 && q.s == 0.0));
                assert!(
                    s.e_el.iter().all(|e| e.xx == 0.0 && e.yy == 0.0 && e.xy == 0.0),
                    "elastic strain moved at step {}",
                    s.k
                );
            })
            .unwrap();
        assert_eq!(states_seen, 51);
        for l in &summary.ledgers {
            assert_eq!(l.visc_dissip_step, 0.0, "viscous dissipation at step {}", l.k);
            assert_eq!(l.plastic_dissip_step, 0.0, "plastic dissipation at step {}", l.k);
            assert_eq!(l.damage_dissip_step, 0.0, "damage dissipation at step {}", l.k);
            assert_eq!(l.kinetic, 0.0);
            assert_eq!(l.ineq_residual, 0.0);
        }
        assert!(summary.pass);
    });
}
