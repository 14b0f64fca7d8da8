//! Element matrices for the mass, stiffness and convection terms and the
//! element-level treatment of the `v^{4/3}` nonlinearity.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::ElementOrder;

/// Dense `k×k` element matrix, `k ∈ {2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMatrix {
    k: usize,
    data: [[f64; 3]; 3],
}

impl LocalMatrix {
    fn from_rows(k: usize, scale: f64, rows: [[f64; 3]; 3]) -> Self {
        let mut data = [[0.0; 3]; 3];
        for i in 0..k {
            for j in 0..k {
                data[i][j] = scale * rows[i][j];
            }
        }
        Self { k, data }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.k && j < self.k);
        self.data[i][j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.data[i][..self.k].iter().sum()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.k);
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.data[i][j] * x[j]).sum())
            .collect()
    }
}

/// Exact element integrals on an element of size `h`. Row `j` is the test
/// function, column `i` the trial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrices {
    /// `∫ ψ_j ψ_i`
    pub mass: LocalMatrix,
    /// `∫ ψ_j' ψ_i'`
    pub stiff: LocalMatrix,
    /// `∫ ψ_j ψ_i'`
    pub conv: LocalMatrix,
}

pub fn element_matrices(h: f64, order: ElementOrder) -> Result<ElementMatrices> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidSize(h));
    }
    Ok(match order {
        ElementOrder::P1 => ElementMatrices {
            mass: LocalMatrix::from_rows(2, h / 6.0, [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0; 3]]),
            stiff: LocalMatrix::from_rows(2, 1.0 / h, [[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0; 3]]),
            conv: LocalMatrix::from_rows(2, 0.5, [[-1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [0.0; 3]]),
        },
        ElementOrder::P2 => ElementMatrices {
            mass: LocalMatrix::from_rows(3, h / 30.0, [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]]),
            stiff: LocalMatrix::from_rows(
                3,
                1.0 / (3.0 * h),
                [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]],
            ),
            conv: LocalMatrix::from_rows(3, 1.0 / 6.0, [[-3.0, 4.0, -1.0], [-4.0, 0.0, 4.0], [1.0, -4.0, 3.0]]),
        },
    })
}

/// How `∫ ψ_j v^{4/3}` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NonlinearVariant {
    /// Interpolate `v^{4/3}` in the nodal basis; the element operator is the
    /// consistent mass matrix.
    GroupFe,
    /// Trapezoidal rule (P1) or Simpson's rule (P2); the element operator is
    /// diagonal.
    Quadrature,
}

impl fmt::Display for NonlinearVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonlinearVariant::GroupFe => "group",
            NonlinearVariant::Quadrature => "quadrature",
        })
    }
}

impl FromStr for NonlinearVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "group" | "groupfe" | "group-fe" => Ok(NonlinearVariant::GroupFe),
            "quadrature" | "quad" => Ok(NonlinearVariant::Quadrature),
            other => Err(format!("unknown nonlinearity `{other}` (expected group or quadrature)")),
        }
    }
}

/// Treatment of negative `v` in the 4/3 power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PowerMode {
    /// `g(v) = v · cbrt(v)` with the real cube root, so `g(v) = |v|^{4/3}`
    /// and the frozen-factor linearization `cbrt(vⁿ) v` is exact at `v = vⁿ`.
    #[default]
    Signed,
    /// `g(v) = max(v, 0)^{4/3}`.
    Clamped,
}

impl PowerMode {
    /// `g(v)`.
    pub fn pow43(self, v: f64) -> f64 {
        v * self.cbrt_factor(v)
    }

    /// The factor `w(v)` with `g(v) = w(v) · v`, used by the linearization.
    pub fn cbrt_factor(self, v: f64) -> f64 {
        match self {
            PowerMode::Signed => v.cbrt(),
            PowerMode::Clamped => v.max(0.0).cbrt(),
        }
    }
}

impl fmt::Display for PowerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerMode::Signed => "signed",
            PowerMode::Clamped => "clamped",
        })
    }
}

impl FromStr for PowerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "signed" => Ok(PowerMode::Signed),
            "clamped" | "clamp" => Ok(PowerMode::Clamped),
            other => Err(format!("unknown power mode `{other}` (expected signed or clamped)")),
        }
    }
}

/// Element-level nonlinear operator. Every variant is linear in the nodal
/// values `g(v_i)`: the contribution is `weights(h) · [g(v_i)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonlinearElementOp {
    pub variant: NonlinearVariant,
    pub order: ElementOrder,
}

impl NonlinearElementOp {
    pub fn new(variant: NonlinearVariant, order: ElementOrder) -> Self {
        Self { variant, order }
    }

    /// Matrix applied to nodal `g(v)` values.
    pub fn weights(&self, h: f64) -> Result<LocalMatrix> {
        match self.variant {
            NonlinearVariant::GroupFe => Ok(element_matrices(h, self.order)?.mass),
            NonlinearVariant::Quadrature => {
                if !(h > 0.0) || !h.is_finite() {
                    return Err(Error::InvalidSize(h));
                }
                Ok(match self.order {
                    ElementOrder::P1 => {
                        LocalMatrix::from_rows(2, h / 2.0, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]])
                    }
                    ElementOrder::P2 => {
                        LocalMatrix::from_rows(3, h / 6.0, [[1.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
                    }
                })
            }
        }
    }

    /// Approximation of `∫_element ψ_j v^{4/3}` for each local node `j`.
    pub fn action(&self, h: f64, v_nodal: &[f64], power: PowerMode) -> Result<Vec<f64>> {
        let k = self.order.nodes_per_element();
        if v_nodal.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: v_nodal.len(),
            });
        }
        let g: Vec<f64> = v_nodal.iter().map(|&v| power.pow43(v)).collect();
        Ok(self.weights(h)?.mul_vec(&g))
    }
}

/// Element-level convenience wrapper around [`NonlinearElementOp::action`].
pub fn nonlinear_action(op: NonlinearElementOp, h: f64, v_nodal: &[f64], power: PowerMode) -> Result<Vec<f64>> {
    op.action(h, v_nodal, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shape_eval;
    use approx::assert_relative_eq;

    /// 12-point Gauss–Legendre on [0, 1].
    fn gauss12() -> Vec<(f64, f64)> {
        // nodes/weights on [-1, 1]
        const X: [f64; 6] = [
            0.125_233_408_511_468_9,
            0.367_831_498_998_180_2,
            0.587_317_954_286_617_5,
            0.769_902_674_194_304_7,
            0.904_117_256_370_474_8,
            0.981_560_634_246_719_2,
        ];
        const W: [f64; 6] = [
            0.249_147_045_813_402_7,
            0.233_492_536_538_354_64,
            0.203_167_426_723_065_65,
            0.160_078_328_543_346_1,
            0.106_939_325_995_318_88,
            0.047_175_336_386_512_02,
        ];
        let mut out = Vec::new();
        for (x, w) in X.iter().zip(W) {
            out.push((0.5 * (1.0 - x), 0.5 * w));
            out.push((0.5 * (1.0 + x), 0.5 * w));
        }
        out
    }

    fn quadrature_matrices(h: f64, order: ElementOrder) -> [Vec<Vec<f64>>; 3] {
        let k = order.nodes_per_element();
        let mut mass = vec![vec![0.0; k]; k];
        let mut stiff = vec![vec![0.0; k]; k];
        let mut conv = vec![vec![0.0; k]; k];
        for (xi, w) in gauss12() {
            let s = shape_eval(order, xi).unwrap();
            for j in 0..k {
                for i in 0..k {
                    let (pj, pi) = (s.values()[j], s.values()[i]);
                    let (dj, di) = (s.derivs()[j] / h, s.derivs()[i] / h);
                    mass[j][i] += w * h * pj * pi;
                    stiff[j][i] += w * h * dj * di;
                    conv[j][i] += w * h * pj * di;
                }
            }
        }
        [mass, stiff, conv]
    }

    #[test]
    fn analytic_matrices_match_gauss_quadrature() {
        for order in [ElementOrder::P1, ElementOrder::P2] {
            for h in [0.01, 0.37, 1.0, 6.0] {
                let em = element_matrices(h, order).unwrap();
                let [m, s, c] = quadrature_matrices(h, order);
                let k = order.nodes_per_element();
                for j in 0..k {
                    for i in 0..k {
                        assert_relative_eq!(em.mass.get(j, i), m[j][i], max_relative = 1e-13, epsilon = 1e-15);
                        assert_relative_eq!(em.stiff.get(j, i), s[j][i], max_relative = 1e-13, epsilon = 1e-13);
                        assert_relative_eq!(em.conv.get(j, i), c[j][i], max_relative = 1e-13, epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn row_sum_identities() {
        let p1 = element_matrices(1.0, ElementOrder::P1).unwrap();
        assert_eq!(p1.mass.row_sums(), vec![0.5, 0.5]);
        let p1 = element_matrices(6.0, ElementOrder::P1).unwrap();
        assert_eq!(p1.mass.get(0, 0), 2.0);
        assert_eq!(p1.mass.get(0, 1), 1.0);
        assert_eq!(p1.mass.get(1, 1), 2.0);

        let p2 = element_matrices(1.0, ElementOrder::P2).unwrap();
        for s in p2.stiff.row_sums() {
            assert!(s.abs() < 1e-15);
        }
        for s in p2.conv.row_sums() {
            assert!(s.abs() < 1e-15);
        }
        let w = p2.mass.row_sums();
        assert_relative_eq!(w[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(w[2], 1.0 / 6.0, epsilon = 1e-15);

        for order in [ElementOrder::P1, ElementOrder::P2] {
            let em = element_matrices(0.3, order).unwrap();
            let k = order.nodes_per_element();
            for i in 0..k {
                for j in 0..k {
                    assert_eq!(em.mass.get(i, j), em.mass.get(j, i));
                    assert_eq!(em.stiff.get(i, j), em.stiff.get(j, i));
                }
            }
        }
        assert!(matches!(
            element_matrices(0.0, ElementOrder::P1),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn nonlinear_actions() {
        let q1 = NonlinearElementOp::new(NonlinearVariant::Quadrature, ElementOrder::P1);
        let q2 = NonlinearElementOp::new(NonlinearVariant::Quadrature, ElementOrder::P2);
        let g1 = NonlinearElementOp::new(NonlinearVariant::GroupFe, ElementOrder::P1);
        let g2 = NonlinearElementOp::new(NonlinearVariant::GroupFe, ElementOrder::P2);
        let s = PowerMode::Signed;

        assert_eq!(q1.action(2.0, &[1.0, 1.0], s).unwrap(), vec![1.0, 1.0]);
        let out = q2.action(6.0, &[0.0, 1.0, 8.0], s).unwrap();
        assert_eq!(out[0], 0.0);
        assert_relative_eq!(out[1], 4.0, epsilon = 1e-14);
        assert_relative_eq!(out[2], 16.0, epsilon = 1e-13);
        assert_eq!(g1.action(6.0, &[1.0, 1.0], s).unwrap(), vec![3.0, 3.0]);

        for op in [q1, g1] {
            assert_eq!(op.action(0.4, &[0.0, 0.0], s).unwrap(), vec![0.0, 0.0]);
        }
        for op in [q2, g2] {
            assert_eq!(op.action(0.4, &[0.0, 0.0, 0.0], s).unwrap(), vec![0.0; 3]);
        }
        assert!(matches!(
            q2.action(1.0, &[1.0, 2.0], s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn group_and_quadrature_agree_on_constants() {
        for order in [ElementOrder::P1, ElementOrder::P2] {
            let k = order.nodes_per_element();
            let g = NonlinearElementOp::new(NonlinearVariant::GroupFe, order);
            let q = NonlinearElementOp::new(NonlinearVariant::Quadrature, order);
            for c in [0.0, 1.0, 2.7] {
                let v = vec![c; k];
                let a = g.action(0.7, &v, PowerMode::Signed).unwrap();
                let b = q.action(0.7, &v, PowerMode::Signed).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert_relative_eq!(*x, *y, max_relative = 1e-14, epsilon = 1e-16);
                }
            }
        }
    }

    #[test]
    fn quadrature_action_is_diagonal_and_linear_in_h() {
        for order in [ElementOrder::P1, ElementOrder::P2] {
            let k = order.nodes_per_element();
            let q = NonlinearElementOp::new(NonlinearVariant::Quadrature, order);
            let base: Vec<f64> = (0..k).map(|i| 0.5 + i as f64).collect();
            let out0 = q.action(0.5, &base, PowerMode::Signed).unwrap();
            for i in 0..k {
                let mut pert = base.clone();
                pert[i] += 0.3;
                let out = q.action(0.5, &pert, PowerMode::Signed).unwrap();
                for j in 0..k {
                    if j != i {
                        assert_eq!(out[j], out0[j]);
                    } else {
                        assert!(out[j] != out0[j]);
                    }
                }
            }
            for variant in [NonlinearVariant::GroupFe, NonlinearVariant::Quadrature] {
                let op = NonlinearElementOp::new(variant, order);
                let a = op.action(0.25, &base, PowerMode::Signed).unwrap();
                let b = op.action(0.75, &base, PowerMode::Signed).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert_relative_eq!(3.0 * x, *y, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn power_modes() {
        assert_eq!(PowerMode::Signed.pow43(8.0), 16.0);
        assert_eq!(PowerMode::Signed.pow43(-8.0), 16.0);
        assert_eq!(PowerMode::Clamped.pow43(-8.0), 0.0);
        assert_eq!(PowerMode::Clamped.pow43(8.0), 16.0);
        assert_eq!(PowerMode::Signed.cbrt_factor(-27.0), -3.0);
        assert_eq!(PowerMode::Clamped.cbrt_factor(-27.0), 0.0);
    }
}
