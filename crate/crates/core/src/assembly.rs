//! Global assembly over the interior nodes and Dirichlet lifting vectors.
//!
//! The unknowns are the `n` interior nodal values; the two boundary nodes
//! carry prescribed data. Their columns in each assembled matrix are kept as
//! lifting templates so that, for boundary values `u_0` and `u_{n+1}`,
//!
//! ```text
//! b_M = u_0 M[:, 0] + u_{n+1} M[:, n+1]
//! ```
//!
//! and likewise for `b_K` and `b_P`.

use crate::banded::BandMatrix;
use crate::elements::{element_matrices, NonlinearElementOp, NonlinearVariant};
use crate::error::Result;
use crate::mesh::Mesh1D;

/// Interior-row entries of the two boundary columns of a global matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryColumns {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl BoundaryColumns {
    fn zeros(n: usize) -> Self {
        Self {
            left: vec![0.0; n],
            right: vec![0.0; n],
        }
    }

    /// `u_left * left + u_right * right`.
    pub fn combine(&self, u_left: f64, u_right: f64) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| u_left * l + u_right * r)
            .collect()
    }
}

/// Assembled interior matrices `M`, `K`, `P`, `N` and their boundary columns.
///
/// `P[j][i] = ∫ ψ_j ψ_i'`. `N` is the geometry-only nonlinear weight matrix;
/// the coefficient `C_R` is applied by the time stepper.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub variant: NonlinearVariant,
    pub mass: BandMatrix,
    pub stiff: BandMatrix,
    pub conv: BandMatrix,
    pub nonlin: BandMatrix,
    pub mass_bc: BoundaryColumns,
    pub stiff_bc: BoundaryColumns,
    pub conv_bc: BoundaryColumns,
    pub nonlin_bc: BoundaryColumns,
    /// `∫ ψ_j` for each interior node (row sums of the full mass matrix).
    pub lumped_mass: Vec<f64>,
    nodes: Vec<f64>,
}

impl GlobalSystem {
    pub fn num_interior(&self) -> usize {
        self.lumped_mass.len()
    }

    /// Full node coordinates, boundary nodes included.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

struct Target<'a> {
    interior: &'a mut BandMatrix,
    bc: &'a mut BoundaryColumns,
}

impl Target<'_> {
    fn add(&mut self, row: usize, col: usize, n_full: usize, value: f64) {
        // row and col are full node indices; boundary rows are dropped
        if row == 0 || row == n_full - 1 {
            return;
        }
        let r = row - 1;
        if col == 0 {
            self.bc.left[r] += value;
        } else if col == n_full - 1 {
            self.bc.right[r] += value;
        } else {
            self.interior.add(r, col - 1, value);
        }
    }
}

/// Sums the element matrices of `mesh` into interior band matrices.
pub fn assemble(mesh: &Mesh1D, variant: NonlinearVariant) -> Result<GlobalSystem> {
    let order = mesh.order();
    let n = mesh.num_interior();
    let n_full = mesh.num_nodes();
    let bw = order.bandwidth();
    let nl_op = NonlinearElementOp::new(variant, order);

    let mut mass = BandMatrix::zeros(n, bw, bw);
    let mut stiff = BandMatrix::zeros(n, bw, bw);
    let mut conv = BandMatrix::zeros(n, bw, bw);
    let mut nonlin = BandMatrix::zeros(n, bw, bw);
    let mut mass_bc = BoundaryColumns::zeros(n);
    let mut stiff_bc = BoundaryColumns::zeros(n);
    let mut conv_bc = BoundaryColumns::zeros(n);
    let mut nonlin_bc = BoundaryColumns::zeros(n);
    let mut lumped_mass = vec![0.0; n];

    for e in 0..mesh.num_elements() {
        let h = mesh.element_size(e);
        let em = element_matrices(h, order)?;
        let nw = nl_op.weights(h)?;
        let ids = mesh.element_nodes(e);
        for (a, &row) in ids.iter().enumerate() {
            if row != 0 && row != n_full - 1 {
                lumped_mass[row - 1] += em.mass.row_sums()[a];
            }
            for (b, &col) in ids.iter().enumerate() {
                Target {
                    interior: &mut mass,
                    bc: &mut mass_bc,
                }
                .add(row, col, n_full, em.mass.get(a, b));
                Target {
                    interior: &mut stiff,
                    bc: &mut stiff_bc,
                }
                .add(row, col, n_full, em.stiff.get(a, b));
                Target {
                    interior: &mut conv,
                    bc: &mut conv_bc,
                }
                .add(row, col, n_full, em.conv.get(a, b));
                Target {
                    interior: &mut nonlin,
                    bc: &mut nonlin_bc,
                }
                .add(row, col, n_full, nw.get(a, b));
            }
        }
    }

    Ok(GlobalSystem {
        variant,
        mass,
        stiff,
        conv,
        nonlin,
        mass_bc,
        stiff_bc,
        conv_bc,
        nonlin_bc,
        lumped_mass,
        nodes: mesh.nodes().to_vec(),
    })
}

/// Transformed Dirichlet data on `[-R, R]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub d_coeff: f64,
    pub radius: f64,
}

impl BoundaryState {
    pub fn new(d_coeff: f64, radius: f64) -> Self {
        Self { d_coeff, radius }
    }

    pub fn u_left(&self, _tau: f64) -> f64 {
        0.0
    }

    /// `1 − e^{−Dτ − R}`.
    pub fn u_right(&self, tau: f64) -> f64 {
        1.0 - (-self.d_coeff * tau - self.radius).exp()
    }

    /// `D e^{−Dτ − R}`; diagnostics only, the scheme differences `b_M`.
    pub fn du_right(&self, tau: f64) -> f64 {
        self.d_coeff * (-self.d_coeff * tau - self.radius).exp()
    }
}

/// `b_M`, `b_K`, `b_P` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingVectors {
    pub b_m: Vec<f64>,
    pub b_k: Vec<f64>,
    pub b_p: Vec<f64>,
}

impl LiftingVectors {
    pub fn from_values(sys: &GlobalSystem, u_left: f64, u_right: f64) -> Self {
        Self {
            b_m: sys.mass_bc.combine(u_left, u_right),
            b_k: sys.stiff_bc.combine(u_left, u_right),
            b_p: sys.conv_bc.combine(u_left, u_right),
        }
    }
}

pub fn lifting_vectors(sys: &GlobalSystem, bstate: &BoundaryState, tau: f64) -> LiftingVectors {
    LiftingVectors::from_values(sys, bstate.u_left(tau), bstate.u_right(tau))
}
