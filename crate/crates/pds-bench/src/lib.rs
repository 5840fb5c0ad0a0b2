//! Shared fixtures for the kernel benchmarks: deterministic meshes, strain
//! batches, and a mid-run simulation state with active plasticity and
//! damage, so the measured kernels see representative data.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pds_core::driver::{
    BandOverride, BcDrive, BcProfile, MeshSpec, ScenarioConfig, Simulation, State,
};
use pds_core::fem::{build_rect_mesh, Mesh, Side, SideSet};
use pds_core::tensor::{Dev2, Sym2};

/// Structured unit-square mesh clamped on bottom and top.
pub fn bench_mesh(n: usize) -> Mesh {
    build_rect_mesh(n, n, 1.0, 1.0, SideSet::empty().with(Side::Bottom).with(Side::Top))
        .unwrap()
}

/// Deterministic batch of total deviatoric strains and plastic history for
/// the radial-return benchmark; with that benchmark's moduli and yield
/// stress, roughly half the entries end up yielding.
pub fn strain_batch(len: usize) -> Vec<(Dev2, Dev2, Dev2)> {
    let mut rng = StdRng::seed_from_u64(7);
    (0..len)
        .map(|_| {
            let e = Dev2::new(rng.random::<f64>() * 0.2 - 0.1, rng.random::<f64>() * 0.2 - 0.1);
            let pi = Dev2::new(rng.random::<f64>() * 0.02 - 0.01, 0.0);
            let d = Dev2::new(0.0, rng.random::<f64>() * 0.02 - 0.01);
            (e, pi, d)
        })
        .collect()
}

/// Random nodal damage field in `[0.3, 1]`.
pub fn damage_field(mesh: &Mesh) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(11);
    (0..mesh.n_nodes()).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect()
}

/// Random elastic strain field with moderate magnitudes.
pub fn strain_field(mesh: &Mesh) -> Vec<Sym2> {
    let mut rng = StdRng::seed_from_u64(13);
    (0..mesh.n_tris())
        .map(|_| {
            Sym2::new(
                rng.random::<f64>() * 0.1 - 0.05,
                rng.random::<f64>() * 0.1 - 0.05,
                rng.random::<f64>() * 0.1 - 0.05,
            )
        })
        .collect()
}

/// Sheared square with a soft mid-stripe, advanced until plasticity and
/// damage are both active; the returned state is ready for stepping.
pub fn active_simulation(n: usize) -> (Simulation, State) {
    let mut cfg = ScenarioConfig {
        mesh: MeshSpec::Rect {
            nx: n,
            ny: n,
            lx: 1.0,
            ly: 1.0,
            dirichlet: SideSet::empty().with(Side::Bottom).with(Side::Top),
        },
        tau: 1e-3,
        t_end: 0.2,
        bc_profile: BcProfile::Shear,
        bc_drive: BcDrive::Ramp(0.25),
        region: Some(BandOverride { y0: 0.45, y1: 0.55, sigma0: 0.03 }),
        ..ScenarioConfig::default()
    };
    cfg.mat.rho = 0.02;
    cfg.mat.gc = 5e-4;
    cfg.mat.kappa = 5e-5;
    let sim = Simulation::new(cfg).unwrap();
    let mut state = sim.initialize();
    // Advance deep into the plastic regime so step benches measure the
    // expensive branch.
    for _ in 0..120 {
        state = sim.step(&state).unwrap().0;
    }
    (sim, state)
}
