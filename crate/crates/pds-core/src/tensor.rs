//! Small-tensor algebra for the 2-D solver.
//!
//! Two value types cover every field in the model:
//!
//! * [`Sym2`] — a symmetric 2×2 tensor (strains, stresses),
//! * [`Dev2`] — a symmetric *trace-free* 2×2 tensor (plastic strain and
//!   deviatoric stress), stored as the two independent components
//!   `(d11, d12)` with `d22 = -d11` implied. Storing only the deviatoric
//!   coordinates makes `tr π = 0` impossible to violate.
//!
//! The inner product is the full tensor contraction `A : B = Σ_ij A_ij B_ij`,
//! so off-diagonal components count twice. All norms are Frobenius norms of
//! that contraction, matching the yield constraint `|dev σ| ≤ σ_yld`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Symmetric 2×2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };

    /// Identity tensor.
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, yy: 1.0, xy: 0.0 };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Sym2 { xx, yy, xy }
    }

    /// Trace `tr A = A_11 + A_22`.
    pub fn tr(self) -> f64 {
        self.xx + self.yy
    }

    /// Deviatoric (trace-free) part `A - (tr A / 2) I` in `d = 2`.
    pub fn dev(self) -> Dev2 {
        Dev2 { d: 0.5 * (self.xx - self.yy), s: self.xy }
    }

    /// Full contraction `A : B` (off-diagonal entries count twice).
    pub fn dot(self, o: Sym2) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    /// Squared Frobenius norm `A : A`.
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm `|A| = sqrt(A : A)`.
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// Symmetric trace-free 2×2 tensor `[[d, s], [s, -d]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dev2 {
    /// Diagonal coordinate: the `(1,1)` entry (the `(2,2)` entry is `-d`).
    pub d: f64,
    /// Off-diagonal coordinate: the `(1,2)` entry.
    pub s: f64,
}

impl Dev2 {
    pub const ZERO: Dev2 = Dev2 { d: 0.0, s: 0.0 };

    pub const fn new(d: f64, s: f64) -> Self {
        Dev2 { d, s }
    }

    /// Full contraction `A : B = 2(d·d' + s·s')`.
    pub fn dot(self, o: Dev2) -> f64 {
        2.0 * (self.d * o.d + self.s * o.s)
    }

    /// Squared Frobenius norm `A : A = 2(d² + s²)`.
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm.
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Widen to a general symmetric tensor.
    pub fn to_sym(self) -> Sym2 {
        Sym2 { xx: self.d, yy: -self.d, xy: self.s }
    }
}

impl From<Dev2> for Sym2 {
    fn from(q: Dev2) -> Sym2 {
        q.to_sym()
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx + o.xx, yy: self.yy + o.yy, xy: self.xy + o.xy }
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx - o.xx, yy: self.yy - o.yy, xy: self.xy - o.xy }
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, c: f64) -> Sym2 {
        Sym2 { xx: self.xx * c, yy: self.yy * c, xy: self.xy * c }
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        self * -1.0
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        *self = *self + o;
    }
}

impl Add for Dev2 {
    type Output = Dev2;
    fn add(self, o: Dev2) -> Dev2 {
        Dev2 { d: self.d + o.d, s: self.s + o.s }
    }
}

impl Sub for Dev2 {
    type Output = Dev2;
    fn sub(self, o: Dev2) -> Dev2 {
        Dev2 { d: self.d - o.d, s: self.s - o.s }
    }
}

impl Mul<f64> for Dev2 {
    type Output = Dev2;
    fn mul(self, c: f64) -> Dev2 {
        Dev2 { d: self.d * c, s: self.s * c }
    }
}

impl Neg for Dev2 {
    type Output = Dev2;
    fn neg(self) -> Dev2 {
        self * -1.0
    }
}

impl AddAssign for Dev2 {
    fn add_assign(&mut self, o: Dev2) {
        *self = *self + o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dev_removes_trace() {
        let a = Sym2::new(3.0, 1.0, -2.0);
        let d = a.dev();
        // [[1, -2], [-2, -1]] as a full tensor; trace vanishes.
        assert_eq!(d.to_sym().tr(), 0.0);
        assert_eq!(d.d, 1.0);
        assert_eq!(d.s, -2.0);
    }

    #[test]
    fn contraction_counts_off_diagonal_twice() {
        let a = Sym2::new(1.0, 2.0, 3.0);
        // A : A = 1 + 4 + 2·9 = 23.
        assert_eq!(a.norm_sq(), 23.0);
        let q = Dev2::new(1.0, -1.0);
        // [[1,-1],[-1,-1]] : itself = 1 + 1 + 2·1 = 4.
        assert_eq!(q.norm_sq(), 4.0);
    }

    #[test]
    fn dev_of_identity_is_zero() {
        assert_eq!(Sym2::IDENTITY.dev(), Dev2::ZERO);
    }

    proptest! {
        /// Orthogonal split: |A|² = |dev A|² + tr(A)²/2 in two dimensions.
        #[test]
        fn deviatoric_volumetric_split(xx in -10.0..10.0f64, yy in -10.0..10.0f64, xy in -10.0..10.0f64) {
            let a = Sym2::new(xx, yy, xy);
            let lhs = a.norm_sq();
            let rhs = a.dev().norm_sq() + 0.5 * a.tr() * a.tr();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        /// Sym2 and Dev2 contractions agree after widening.
        #[test]
        fn dev_contraction_consistent(d1 in -10.0..10.0f64, s1 in -10.0..10.0f64,
                                      d2 in -10.0..10.0f64, s2 in -10.0..10.0f64) {
            let p = Dev2::new(d1, s1);
            let q = Dev2::new(d2, s2);
            prop_assert!((p.dot(q) - p.to_sym().dot(q.to_sym())).abs() <= 1e-12);
        }
    }
}
