//! Global assembly: visco-elastic stiffness, lumped mass, and the
//! p-Laplacian damage regularizer.

use super::{Mesh, SparseSym};
use crate::material::MaterialParams;
use crate::parallel;

/// Assemble the SPD operator of the displacement solve,
///
/// ```text
/// K = Σ_tri area·Bᵀ[C(ᾱ) + D(ᾱ)/τ]B + (ρ/τ²)·M_lumped
/// ```
///
/// with `ᾱ` the triangle average of the nodal damage field frozen at the
/// previous level. The damage enters only through the effective Lamé moduli
/// of `C(ᾱ) + D(ᾱ)/τ`, so each element block is the standard isotropic P1
/// elasticity matrix. The lumped-mass diagonal is strictly positive, hence
/// the sum is SPD even at full damage with zero residual stiffness.
pub fn assemble_visc_elast_matrix(
    mesh: &Mesh,
    mat: &MaterialParams,
    alpha_prev: &[f64],
    tau: f64,
) -> SparseSym {
    assert!(tau > 0.0, "time step must be > 0");
    assert_eq!(alpha_prev.len(), mesh.n_nodes());
    let ndof = mesh.n_dofs();
    let mut triplets = Vec::with_capacity(36 * mesh.n_tris() + ndof);
    for t in 0..mesh.n_tris() {
        let area = mesh.tri_area[t];
        let grads = &mesh.tri_grads[t];
        let verts = mesh.tris[t];
        let (lam, mu) = mat.visc_elast_moduli(mesh.tri_avg(alpha_prev, t), tau);
        for a in 0..3 {
            let ga = grads[a];
            for b in 0..3 {
                let gb = grads[b];
                let gagb = ga[0] * gb[0] + ga[1] * gb[1];
                for ca in 0..2 {
                    for cb in 0..2 {
                        // Isotropic element block:
                        //   λ·g_a[ca]·g_b[cb] + μ·(δ_{ca,cb}·(g_a·g_b) + g_a[cb]·g_b[ca])
                        let mut v = lam * ga[ca] * gb[cb] + mu * ga[cb] * gb[ca];
                        if ca == cb {
                            v += mu * gagb;
                        }
                        triplets.push((2 * verts[a] + ca, 2 * verts[b] + cb, area * v));
                    }
                }
            }
        }
    }
    let m = lumped_mass(mesh, mat.rho);
    let inv_tau2 = 1.0 / (tau * tau);
    for (d, md) in m.iter().enumerate() {
        triplets.push((d, d, md * inv_tau2));
    }
    SparseSym::from_triplets(ndof, &triplets)
}

/// Row-sum lumped P1 mass "matrix" as a per-dof diagonal:
/// each triangle sends `ρ·area/3` to both dofs of each of its vertices.
/// The diagonal sums to `2·ρ·|Ω|` (two dofs per node).
pub fn lumped_mass(mesh: &Mesh, rho: f64) -> Vec<f64> {
    assert!(rho > 0.0, "density must be > 0");
    let mut m = vec![0.0; mesh.n_dofs()];
    for t in 0..mesh.n_tris() {
        let share = rho * mesh.tri_area[t] / 3.0;
        for &v in &mesh.tris[t] {
            m[2 * v] += share;
            m[2 * v + 1] += share;
        }
    }
    m
}

/// Per-node lumped area shares (`Σ area/3` over incident triangles), the
/// scalar counterpart of [`lumped_mass`]; sums to `|Ω|`. Used as the
/// quadrature weight of nodal scalar fields such as the damage rate.
pub fn scalar_lumped_area(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_tris() {
        let share = mesh.tri_area[t] / 3.0;
        for &v in &mesh.tris[t] {
            m[v] += share;
        }
    }
    m
}

/// Energy and exact nodal gradient of the damage regularizer
/// `Σ_tri (κ/p)·|∇α|^p·area`.
///
/// The per-triangle gradient of the energy with respect to the nodal value
/// at vertex `v` is `κ·|∇α|^{p-2}·(∇α·g_v)·area`; at `p = 2` this is linear
/// in `α`. For `p > 2` the factor `|∇α|^{p-2}` vanishes continuously as
/// `∇α → 0`, so the gradient is total.
pub fn p_laplacian_energy_grad(
    mesh: &Mesh,
    alpha: &[f64],
    kappa: f64,
    p_exp: f64,
) -> (f64, Vec<f64>) {
    assert!(p_exp >= 2.0, "gradient exponent must be >= 2");
    assert_eq!(alpha.len(), mesh.n_nodes());
    let tri_term = |t: usize| -> ([f64; 2], f64, f64) {
        let grads = &mesh.tri_grads[t];
        let verts = mesh.tris[t];
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (v, g) in verts.into_iter().zip(grads) {
            gx += alpha[v] * g[0];
            gy += alpha[v] * g[1];
        }
        let norm_sq = gx * gx + gy * gy;
        // |∇α|^{p-2}, with the p = 2 and ∇α = 0 cases exact.
        let weight = if p_exp == 2.0 {
            1.0
        } else if norm_sq == 0.0 {
            0.0
        } else {
            norm_sq.powf(0.5 * p_exp - 1.0)
        };
        ([gx, gy], weight, norm_sq)
    };
    let energy = parallel::sum_over(mesh.n_tris(), |t| {
        let (_, weight, norm_sq) = tri_term(t);
        kappa / p_exp * weight * norm_sq * mesh.tri_area[t]
    });
    let grad = parallel::scatter_over(mesh.n_tris(), mesh.n_nodes(), |t, out| {
        let (g_alpha, weight, _) = tri_term(t);
        let scale = kappa * weight * mesh.tri_area[t];
        for (v, g) in mesh.tris[t].into_iter().zip(&mesh.tri_grads[t]) {
            out[v] += scale * (g_alpha[0] * g[0] + g_alpha[1] * g[1]);
        }
    });
    (energy, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_rect_mesh, Side, SideSet};
    use crate::tensor::Sym2;

    fn mesh_4x3() -> Mesh {
        build_rect_mesh(4, 3, 1.0, 1.0, SideSet::empty().with(Side::Left)).unwrap()
    }

    #[test]
    fn lumped_mass_conserves_total_mass() {
        let mesh = mesh_4x3();
        let rho = 2.5;
        let m = lumped_mass(&mesh, rho);
        let total: f64 = m.iter().sum();
        assert!((total - 2.0 * rho).abs() < 1e-12, "total {total}");
        assert!(m.iter().all(|&v| v > 0.0));
        // Refinement does not change the diagonal sum.
        let fine = build_rect_mesh(8, 6, 1.0, 1.0, SideSet::empty().with(Side::Left)).unwrap();
        let total_fine: f64 = lumped_mass(&fine, rho).iter().sum();
        assert!((total - total_fine).abs() < 1e-12);
    }

    #[test]
    fn scalar_lumped_area_partitions_domain() {
        let mesh = mesh_4x3();
        let m = scalar_lumped_area(&mesh);
        let total: f64 = m.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(m.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn single_triangle_mass_share() {
        let mesh = Mesh::from_raw(
            vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]],
            vec![[0, 1, 2]],
            vec![true, false, false],
        )
        .unwrap();
        let m = lumped_mass(&mesh, 3.0);
        // area = 2, each vertex gets rho·A/3 = 2 per dof.
        for v in m {
            assert!((v - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stiffness_spd_even_at_full_damage() {
        let mesh = mesh_4x3();
        let mat = MaterialParams { eps_res: 1e-4, ..MaterialParams::default() };
        let alpha = vec![0.0; mesh.n_nodes()];
        let k = assemble_visc_elast_matrix(&mesh, &mat, &alpha, 1e-2);
        assert!(k.asymmetry() < 1e-12);
        // Cholesky succeeds iff SPD.
        assert!(nalgebra::Cholesky::new(k.to_dense()).is_some());
    }

    #[test]
    fn quadratic_form_dominates_scaled_mass() {
        let mesh = mesh_4x3();
        let mat = MaterialParams::default();
        let tau = 5e-3;
        let alpha = vec![0.7; mesh.n_nodes()];
        let k = assemble_visc_elast_matrix(&mesh, &mat, &alpha, tau);
        let m = lumped_mass(&mesh, mat.rho);
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..10 {
            let u: Vec<f64> = (0..mesh.n_dofs()).map(|_| next()).collect();
            let q = k.quadratic_form(&u);
            let mass_part: f64 =
                u.iter().zip(&m).map(|(ui, mi)| mi * ui * ui).sum::<f64>() / (tau * tau);
            assert!(q >= mass_part - 1e-9 * q.abs(), "q {q} < mass part {mass_part}");
        }
    }

    /// Hand-assembled 6×6 element matrix on a single unit triangle, built
    /// independently from the bilinear form ∫ λ tr e(u) tr e(v) + 2μ e(u):e(v)
    /// by evaluating shape-function strains directly.
    #[test]
    fn element_matrix_matches_symbolic_oracle() {
        let mesh = Mesh::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![true, false, false],
        )
        .unwrap();
        let mat = MaterialParams {
            lambda1: 1.3,
            mu1: 0.9,
            eps_res: 0.0,
            lambda0: 0.0,
            mu0: 1e-9, // keep D0 valid but negligible
            chi: 0.0,
            rho: 1e-9,
            ..MaterialParams::default()
        };
        let tau = 1.0;
        let alpha = vec![1.0; 3];
        let k = assemble_visc_elast_matrix(&mesh, &mat, &alpha, tau).to_dense();

        // Oracle: strain of the (vertex a, component c) shape function is
        // sym(e_c ⊗ g_a); integrate the bilinear form over the element.
        let g = mesh.tri_grads[0];
        let area = mesh.tri_area[0];
        let g_one = mat.g(1.0);
        let shape_strain = |a: usize, c: usize| -> Sym2 {
            let gv = g[a];
            match c {
                0 => Sym2::new(gv[0], 0.0, 0.5 * gv[1]),
                _ => Sym2::new(0.0, gv[1], 0.5 * gv[0]),
            }
        };
        for a in 0..3 {
            for c in 0..2 {
                for b in 0..3 {
                    for d in 0..2 {
                        let ea = shape_strain(a, c);
                        let eb = shape_strain(b, d);
                        let lam_eff = g_one * mat.lambda1;
                        let mu_eff = g_one * mat.mu1;
                        let mut want = area * (lam_eff * ea.tr() * eb.tr() + 2.0 * mu_eff * ea.dot(eb));
                        // The implementation also carries D0/τ and mass terms;
                        // they were made negligible (1e-9 scale) above.
                        let got = k[(2 * mesh.tris[0][a] + c, 2 * mesh.tris[0][b] + d)];
                        if (a, c) == (b, d) {
                            want += 2.0 * mat.mu0 / tau * ea.dot(ea) * area;
                        }
                        assert!(
                            (got - want).abs() < 1e-7,
                            "entry ({a},{c})x({b},{d}): got {got}, want {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn assembly_is_permutation_invariant() {
        let mesh = mesh_4x3();
        let mat = MaterialParams::default();
        let alpha: Vec<f64> = (0..mesh.n_nodes()).map(|v| 0.3 + 0.5 * (v as f64 / 40.0)).collect();
        let k1 = assemble_visc_elast_matrix(&mesh, &mat, &alpha, 1e-2);
        // Reverse the element order.
        let mut rev = mesh.clone();
        rev.tris.reverse();
        rev.tri_area.reverse();
        rev.tri_grads.reverse();
        let k2 = assemble_visc_elast_matrix(&rev, &mat, &alpha, 1e-2);
        let d = (k1.to_dense() - k2.to_dense()).abs().max();
        assert!(d < 1e-12, "permutation changed assembly by {d}");
    }

    #[test]
    fn p_laplacian_constant_field_is_flat() {
        let mesh = mesh_4x3();
        let alpha = vec![0.4; mesh.n_nodes()];
        let (e, g) = p_laplacian_energy_grad(&mesh, &alpha, 1.0, 3.0);
        assert_eq!(e, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn p_laplacian_linear_field_energy() {
        // alpha = x on the unit square with p = 2, kappa = 1: energy = 1/2.
        let mesh = build_rect_mesh(5, 4, 1.0, 1.0, SideSet::empty().with(Side::Left)).unwrap();
        let alpha: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
        let (e, _) = p_laplacian_energy_grad(&mesh, &alpha, 1.0, 2.0);
        assert!((e - 0.5).abs() < 1e-12, "energy {e}");
    }

    #[test]
    fn p_laplacian_gradient_matches_finite_differences() {
        let mesh = build_rect_mesh(3, 3, 1.0, 1.0, SideSet::empty().with(Side::Left)).unwrap();
        let base: Vec<f64> =
            mesh.nodes.iter().map(|p| 0.5 + 0.3 * (3.0 * p[0]).sin() * (2.0 * p[1]).cos()).collect();
        for p_exp in [2.0, 3.0] {
            let (_, grad) = p_laplacian_energy_grad(&mesh, &base, 0.7, p_exp);
            let h = 1e-6;
            for v in 0..mesh.n_nodes() {
                let mut plus = base.clone();
                plus[v] += h;
                let mut minus = base.clone();
                minus[v] -= h;
                let (ep, _) = p_laplacian_energy_grad(&mesh, &plus, 0.7, p_exp);
                let (em, _) = p_laplacian_energy_grad(&mesh, &minus, 0.7, p_exp);
                let fd = (ep - em) / (2.0 * h);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (grad[v] - fd).abs() / denom < 1e-6,
                    "p = {p_exp}, node {v}: analytic {} vs fd {fd}",
                    grad[v]
                );
            }
        }
    }
}
