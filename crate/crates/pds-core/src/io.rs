//! Plain-text scenario files, the energy-ledger CSV, and legacy-VTK field
//! snapshots.
//!
//! The scenario grammar is flat `key = value` with `#` comments. Every key
//! has a default, unknown keys are hard errors carrying their line number,
//! and emission is canonical: `parse_config(emit_config(c)) == c` for every
//! valid configuration (floats are printed with their shortest lossless
//! representation).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::EnergyLedger;
use crate::driver::{
    BandOverride, BcDrive, BcProfile, BodyLoad, InitAlpha, InitPi, InitU, InitV, MeshSpec,
    ScenarioConfig, State,
};
use crate::error::{ConfigError, Error};
use crate::fem::{Mesh, SideSet};
use crate::material::MaterialParams;
use crate::tensor::Sym2;

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

fn syntax(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, ConfigError> {
    s.parse::<T>().map_err(|_| syntax(line, format!("expected {what}, got `{s}`")))
}

/// Parse a scenario file. Strict: every key must be known, every value
/// well-formed; errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let (mut nx, mut ny, mut lx, mut ly, mut dirichlet) = match &cfg.mesh {
        MeshSpec::Rect { nx, ny, lx, ly, dirichlet } => (*nx, *ny, *lx, *ly, *dirichlet),
        MeshSpec::File(_) => unreachable!("default mesh is rectangular"),
    };
    let mut mesh_file: Option<PathBuf> = None;
    let mut rect_key_seen = false;
    let mut band: Option<(f64, f64)> = None;
    let mut band_sigma: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, val) = stripped
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let key = key.trim();
        let val = val.trim();
        let toks: Vec<&str> = val.split_whitespace().collect();
        let f = |s: &str| num::<f64>(line, s, "a number");
        // Modes with numeric tails share one shape-error message per key.
        match key {
            "mesh.nx" => {
                nx = num(line, val, "an integer")?;
                rect_key_seen = true;
            }
            "mesh.ny" => {
                ny = num(line, val, "an integer")?;
                rect_key_seen = true;
            }
            "mesh.lx" => {
                lx = f(val)?;
                rect_key_seen = true;
            }
            "mesh.ly" => {
                ly = f(val)?;
                rect_key_seen = true;
            }
            "mesh.dirichlet" => {
                dirichlet = SideSet::parse(val)
                    .map_err(|e| syntax(line, e.to_string()))?;
                rect_key_seen = true;
            }
            "mesh.file" => mesh_file = Some(PathBuf::from(val)),
            "material.lambda1" => cfg.mat.lambda1 = f(val)?,
            "material.mu1" => cfg.mat.mu1 = f(val)?,
            "material.eps_res" => cfg.mat.eps_res = f(val)?,
            "material.lambda0" => cfg.mat.lambda0 = f(val)?,
            "material.mu0" => cfg.mat.mu0 = f(val)?,
            "material.chi" => cfg.mat.chi = f(val)?,
            "material.sigma0" => cfg.mat.sigma0 = f(val)?,
            "material.sigma1" => cfg.mat.sigma1 = f(val)?,
            "material.gc" => cfg.mat.gc = f(val)?,
            "material.eps_at" => cfg.mat.eps_at = f(val)?,
            "material.eta" => cfg.mat.eta = f(val)?,
            "material.kappa" => cfg.mat.kappa = f(val)?,
            "material.p" => cfg.mat.p_exp = f(val)?,
            "material.rho" => cfg.mat.rho = f(val)?,
            "time.tau" => cfg.tau = f(val)?,
            "time.t_end" => cfg.t_end = f(val)?,
            "load.body" => {
                cfg.body = match toks.as_slice() {
                    ["none"] => BodyLoad::None,
                    ["constant", x, y] => BodyLoad::Constant([f(x)?, f(y)?]),
                    ["ramp", x, y] => BodyLoad::Ramp([f(x)?, f(y)?]),
                    ["sinus", x, y, fr] => BodyLoad::Sinus([f(x)?, f(y)?], f(fr)?),
                    _ => {
                        return Err(syntax(
                            line,
                            "load.body expects none | constant FX FY | ramp FX FY | \
                             sinus FX FY FREQ",
                        ))
                    }
                }
            }
            "bc.profile" => {
                cfg.bc_profile = match val {
                    "none" => BcProfile::None,
                    "shear" => BcProfile::Shear,
                    "stretch" => BcProfile::Stretch,
                    _ => return Err(syntax(line, "bc.profile expects none | shear | stretch")),
                }
            }
            "bc.dirichlet" => {
                cfg.bc_drive = match toks.as_slice() {
                    ["fixed"] => BcDrive::Fixed,
                    ["ramp", r] => BcDrive::Ramp(f(r)?),
                    ["sinus", a, fr] => BcDrive::Sinus(f(a)?, f(fr)?),
                    _ => {
                        return Err(syntax(
                            line,
                            "bc.dirichlet expects fixed | ramp RATE | sinus AMP FREQ",
                        ))
                    }
                }
            }
            "init.u0" => {
                cfg.init_u0 = match val {
                    "zero" => InitU::Zero,
                    "bc" => InitU::Bc,
                    _ => return Err(syntax(line, "init.u0 expects zero | bc")),
                }
            }
            "init.v0" => {
                cfg.init_v0 = match toks.as_slice() {
                    ["zero"] => InitV::Zero,
                    ["sinex", a] => InitV::SineX(f(a)?),
                    ["siney", a] => InitV::SineY(f(a)?),
                    _ => return Err(syntax(line, "init.v0 expects zero | sinex A | siney A")),
                }
            }
            "init.pi0" | "init.pidot0" => {
                let v = match toks.as_slice() {
                    ["zero"] => InitPi::Zero,
                    ["const", p11, p12] => InitPi::Const(f(p11)?, f(p12)?),
                    _ => {
                        return Err(syntax(
                            line,
                            format!("{key} expects zero | const P11 P12"),
                        ))
                    }
                };
                if key == "init.pi0" {
                    cfg.init_pi0 = v;
                } else {
                    cfg.init_pidot0 = v;
                }
            }
            "init.alpha0" => {
                cfg.init_alpha0 = match toks.as_slice() {
                    ["one"] => InitAlpha::One,
                    ["const", c] => InitAlpha::Const(f(c)?),
                    _ => return Err(syntax(line, "init.alpha0 expects one | const C")),
                }
            }
            "region.band" => {
                band = match toks.as_slice() {
                    [y0, y1] => Some((f(y0)?, f(y1)?)),
                    _ => return Err(syntax(line, "region.band expects Y0 Y1")),
                }
            }
            "region.sigma0" => band_sigma = Some(f(val)?),
            "solver.tol_mech" => cfg.solver.mech.tol = f(val)?,
            "solver.tol_pi" => cfg.solver.mech.tol_pi = f(val)?,
            "solver.maxit_mech" => cfg.solver.mech.maxit = num(line, val, "an integer")?,
            "solver.tol_lin" => cfg.solver.mech.tol_lin = f(val)?,
            "solver.maxit_lin" => cfg.solver.mech.maxit_lin = num(line, val, "an integer")?,
            "solver.tol_dmg" => cfg.solver.dmg.tol = f(val)?,
            "solver.maxit_dmg" => cfg.solver.dmg.maxit = num(line, val, "an integer")?,
            "diag.probes" => cfg.diag.probes = num(line, val, "an integer")?,
            "diag.seed" => cfg.diag.seed = num(line, val, "an integer")?,
            "output.dir" => {
                cfg.output.dir =
                    if val == "none" { None } else { Some(PathBuf::from(val)) }
            }
            "output.every" => cfg.output.every = num(line, val, "an integer")?,
            _ => {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
        }
    }

    cfg.mesh = match mesh_file {
        Some(file) => {
            if rect_key_seen {
                return Err(ConfigError::InvalidParameter(
                    "mesh.file conflicts with mesh.nx/ny/lx/ly/dirichlet".into(),
                ));
            }
            MeshSpec::File(file)
        }
        None => MeshSpec::Rect { nx, ny, lx, ly, dirichlet },
    };
    cfg.region = match (band, band_sigma) {
        (None, None) => None,
        (Some((y0, y1)), Some(sigma0)) => Some(BandOverride { y0, y1, sigma0 }),
        _ => {
            return Err(ConfigError::InvalidParameter(
                "region.band and region.sigma0 must be given together".into(),
            ))
        }
    };
    Ok(cfg)
}

/// Read and parse a scenario file.
pub fn read_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(parse_config(&text)?)
}

/// Canonical emission of a configuration; inverse of [`parse_config`].
pub fn emit_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "# scenario file: `key = value`, `#` starts a comment");
    match &cfg.mesh {
        MeshSpec::Rect { nx, ny, lx, ly, dirichlet } => {
            let _ = writeln!(w, "mesh.nx = {nx}");
            let _ = writeln!(w, "mesh.ny = {ny}");
            let _ = writeln!(w, "mesh.lx = {lx:?}");
            let _ = writeln!(w, "mesh.ly = {ly:?}");
            let _ = writeln!(w, "mesh.dirichlet = {}", dirichlet.render());
        }
        MeshSpec::File(p) => {
            let _ = writeln!(w, "mesh.file = {}", p.display());
        }
    }
    let m = &cfg.mat;
    let _ = writeln!(w, "material.lambda1 = {:?}", m.lambda1);
    let _ = writeln!(w, "material.mu1 = {:?}", m.mu1);
    let _ = writeln!(w, "material.eps_res = {:?}", m.eps_res);
    let _ = writeln!(w, "material.lambda0 = {:?}", m.lambda0);
    let _ = writeln!(w, "material.mu0 = {:?}", m.mu0);
    let _ = writeln!(w, "material.chi = {:?}", m.chi);
    let _ = writeln!(w, "material.sigma0 = {:?}", m.sigma0);
    let _ = writeln!(w, "material.sigma1 = {:?}", m.sigma1);
    let _ = writeln!(w, "material.gc = {:?}", m.gc);
    let _ = writeln!(w, "material.eps_at = {:?}", m.eps_at);
    let _ = writeln!(w, "material.eta = {:?}", m.eta);
    let _ = writeln!(w, "material.kappa = {:?}", m.kappa);
    let _ = writeln!(w, "material.p = {:?}", m.p_exp);
    let _ = writeln!(w, "material.rho = {:?}", m.rho);
    let _ = writeln!(w, "time.tau = {:?}", cfg.tau);
    let _ = writeln!(w, "time.t_end = {:?}", cfg.t_end);
    let body = match cfg.body {
        BodyLoad::None => "none".to_string(),
        BodyLoad::Constant([x, y]) => format!("constant {x:?} {y:?}"),
        BodyLoad::Ramp([x, y]) => format!("ramp {x:?} {y:?}"),
        BodyLoad::Sinus([x, y], fr) => format!("sinus {x:?} {y:?} {fr:?}"),
    };
    let _ = writeln!(w, "load.body = {body}");
    let profile = match cfg.bc_profile {
        BcProfile::None => "none",
        BcProfile::Shear => "shear",
        BcProfile::Stretch => "stretch",
    };
    let _ = writeln!(w, "bc.profile = {profile}");
    let drive = match cfg.bc_drive {
        BcDrive::Fixed => "fixed".to_string(),
        BcDrive::Ramp(r) => format!("ramp {r:?}"),
        BcDrive::Sinus(a, fr) => format!("sinus {a:?} {fr:?}"),
    };
    let _ = writeln!(w, "bc.dirichlet = {drive}");
    let _ = writeln!(
        w,
        "init.u0 = {}",
        match cfg.init_u0 {
            InitU::Zero => "zero",
            InitU::Bc => "bc",
        }
    );
    let v0 = match cfg.init_v0 {
        InitV::Zero => "zero".to_string(),
        InitV::SineX(a) => format!("sinex {a:?}"),
        InitV::SineY(a) => format!("siney {a:?}"),
    };
    let _ = writeln!(w, "init.v0 = {v0}");
    let render_pi = |p: InitPi| match p {
        InitPi::Zero => "zero".to_string(),
        InitPi::Const(a, b) => format!("const {a:?} {b:?}"),
    };
    let _ = writeln!(w, "init.pi0 = {}", render_pi(cfg.init_pi0));
    let _ = writeln!(w, "init.pidot0 = {}", render_pi(cfg.init_pidot0));
    let alpha0 = match cfg.init_alpha0 {
        InitAlpha::One => "one".to_string(),
        InitAlpha::Const(c) => format!("const {c:?}"),
    };
    let _ = writeln!(w, "init.alpha0 = {alpha0}");
    if let Some(b) = &cfg.region {
        let _ = writeln!(w, "region.band = {:?} {:?}", b.y0, b.y1);
        let _ = writeln!(w, "region.sigma0 = {:?}", b.sigma0);
    }
    let so = &cfg.solver;
    let _ = writeln!(w, "solver.tol_mech = {:?}", so.mech.tol);
    let _ = writeln!(w, "solver.tol_pi = {:?}", so.mech.tol_pi);
    let _ = writeln!(w, "solver.maxit_mech = {}", so.mech.maxit);
    let _ = writeln!(w, "solver.tol_lin = {:?}", so.mech.tol_lin);
    let _ = writeln!(w, "solver.maxit_lin = {}", so.mech.maxit_lin);
    let _ = writeln!(w, "solver.tol_dmg = {:?}", so.dmg.tol);
    let _ = writeln!(w, "solver.maxit_dmg = {}", so.dmg.maxit);
    let _ = writeln!(w, "diag.probes = {}", cfg.diag.probes);
    let _ = writeln!(w, "diag.seed = {}", cfg.diag.seed);
    match &cfg.output.dir {
        Some(d) => {
            let _ = writeln!(w, "output.dir = {}", d.display());
        }
        None => {
            let _ = writeln!(w, "output.dir = none");
        }
    }
    let _ = writeln!(w, "output.every = {}", cfg.output.every);
    s
}

// ---------------------------------------------------------------------------
// Energy-ledger CSV
// ---------------------------------------------------------------------------

/// Write the ledger sequence as CSV (one header, one row per level).
pub fn write_ledger_csv(path: &Path, ledgers: &[EnergyLedger]) -> Result<(), Error> {
    let mut s = String::with_capacity(64 + 340 * ledgers.len());
    s.push_str(EnergyLedger::CSV_HEADER);
    s.push('\n');
    for l in ledgers {
        s.push_str(&l.csv_row());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a ledger CSV back. The intermediate stored-energy column at the old
/// damage is not part of the format; it is restored as the stored energy
/// itself, which every downstream check accepts.
pub fn read_ledger_csv(path: &Path) -> Result<Vec<EnergyLedger>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EnergyLedger::CSV_HEADER => {}
        _ => {
            return Err(syntax(1, "ledger header does not match the expected column list").into())
        }
    }
    let mut out = Vec::new();
    for (idx, row) in lines.enumerate() {
        let line = idx + 2;
        if row.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 14 {
            return Err(syntax(line, format!("expected 14 columns, got {}", cols.len())).into());
        }
        let fv = |i: usize| num::<f64>(line, cols[i], "a number");
        let stored_elastic = fv(3)?;
        out.push(EnergyLedger {
            k: num::<usize>(line, cols[0], "an integer")?,
            t: fv(1)?,
            kinetic: fv(2)?,
            stored_elastic,
            stored_elastic_alpha_prev: stored_elastic,
            stored_damage: fv(4)?,
            visc_dissip_step: fv(5)?,
            plastic_dissip_step: fv(6)?,
            damage_dissip_step: fv(7)?,
            work_body_step: fv(8)?,
            work_dirichlet_step: fv(9)?,
            ineq_residual: fv(10)?,
            yield_residual: fv(11)?,
            complementarity_residual: fv(12)?,
            damage_vi_residual: fv(13)?,
        });
    }
    if out.is_empty() {
        return Err(syntax(2, "ledger has no data rows").into());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// VTK snapshots
// ---------------------------------------------------------------------------

/// Write one state as a legacy-ASCII VTK unstructured grid: point data
/// `displacement`, `velocity`, `alpha`; cell data `plastic_strain` and
/// `elastic_strain` (components 11, 12, 22) and the deviatoric stress
/// magnitude `mises` at the previous damage level (the weighting the
/// mechanical solve used).
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    mat: &MaterialParams,
    state: &State,
    tau: f64,
) -> Result<(), Error> {
    let n = mesh.n_nodes();
    let m = mesh.n_tris();
    let mut s = String::with_capacity(80 * (n + m));
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "plastic-damage state at step {}", state.k);
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.9e} {:.9e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for tri in &mesh.tris {
        let _ = writeln!(s, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS displacement double\n");
    for v in 0..n {
        let _ = writeln!(s, "{:.9e} {:.9e} 0", state.u[2 * v], state.u[2 * v + 1]);
    }
    s.push_str("VECTORS velocity double\n");
    let vel = state.velocity(tau);
    for v in 0..n {
        let _ = writeln!(s, "{:.9e} {:.9e} 0", vel[2 * v], vel[2 * v + 1]);
    }
    s.push_str("SCALARS alpha double 1\nLOOKUP_TABLE default\n");
    for &a in &state.alpha {
        let _ = writeln!(s, "{a:.9e}");
    }
    let _ = writeln!(s, "CELL_DATA {m}");
    let _ = writeln!(s, "FIELD strains 2");
    let _ = writeln!(s, "plastic_strain 3 {m} double");
    for q in &state.pi {
        let _ = writeln!(s, "{:.9e} {:.9e} {:.9e}", q.d, q.s, -q.d);
    }
    let _ = writeln!(s, "elastic_strain 3 {m} double");
    for e in &state.e_el {
        let _ = writeln!(s, "{:.9e} {:.9e} {:.9e}", e.xx, e.xy, e.yy);
    }
    s.push_str("SCALARS mises double 1\nLOOKUP_TABLE default\n");
    for t in 0..m {
        let a = mesh.tri_avg(&state.alpha_prev, t);
        let de = (state.e_el[t] - state.e_el_prev[t]) * (1.0 / tau);
        let sigma: Sym2 = mat.stiffness_apply(a, state.e_el[t]) + mat.viscosity_apply(a, de);
        let _ = writeln!(s, "{:.9e}", sigma.dev().norm());
    }
    std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
}
