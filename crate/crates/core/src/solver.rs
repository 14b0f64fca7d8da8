//! Linearized θ-scheme for the mixed system
//!
//! ```text
//! d/dτ (M u + b_M) = F(u),
//! F(u) = −K u + (1+D) P u + C_R N v^{4/3} − b_K + (1+D) b_P,
//! M v  = −K u + P u − b_K + b_P,
//! ```
//!
//! where the implicit level freezes the cube-root factor of `v`:
//! `N (v^{n+1})^{4/3} ≈ N diag((vⁿ)^{1/3}) v^{n+1}`. The first macro step
//! is replaced by `n_R` backward Euler substeps (Rannacher startup).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble, BoundaryState, GlobalSystem, LiftingVectors};
use crate::banded::{BandLu, BandMatrix};
use crate::elements::{NonlinearVariant, PowerMode};
use crate::error::{Error, NonFiniteFailure, Result};
use crate::mesh::{ElementOrder, Mesh1D};
use crate::model::{bs_call_price, initial_profile, RapmParams};

pub const MAX_RANNACHER_SUBSTEPS: usize = 16;

/// Largest interior system for which the consistent-mass step matrix (dense)
/// is formed.
pub const MAX_CONSISTENT_UNKNOWNS: usize = 2000;

/// Which mass matrix inverts the `v` relation (recovery and step matrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MassMode {
    /// Row-sum diagonal; keeps the step matrix banded.
    #[default]
    Lumped,
    /// Consistent `M`; the step matrix becomes dense.
    Consistent,
}

/// How `v` is continued to the two boundary nodes, where no condition is
/// imposed on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoundaryExtrapolation {
    /// Copy the nearest interior value.
    #[default]
    Copy,
    /// Linear extrapolation from the two nearest interior nodes.
    Linear,
}

/// Placement of the boundary source terms at the new time level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoundaryWeighting {
    /// `θΔτ [−b_K + (1+D) b_P + C_R N W M⁻¹(−b_K + b_P)]` at level `n+1`,
    /// which keeps steady states fixed points of the step.
    #[default]
    Consistent,
    /// Only `− C_R N W (−b_K + b_P)` at level `n+1`, as the time stepping
    /// formula is usually written out; kept for comparison.
    Literal,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($text $(| $alias)* => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}` (expected one of: {})",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

text_enum!(MassMode { Lumped => "lumped", Consistent => "consistent" });
text_enum!(BoundaryExtrapolation { Copy => "copy", Linear => "linear" | "linear-extrapolate" });
text_enum!(BoundaryWeighting { Consistent => "consistent", Literal => "literal" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub theta: f64,
    pub dtau: f64,
    pub rannacher_substeps: usize,
    pub mass_mode: MassMode,
    pub nonlinearity: NonlinearVariant,
    pub power_mode: PowerMode,
    pub boundary_v: BoundaryExtrapolation,
    pub boundary_weighting: BoundaryWeighting,
    /// Every `history_stride`-th time level is kept in the returned surface
    /// (the initial and final levels always are). Larger values save memory
    /// when only `t = 0` prices are needed.
    pub history_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            dtau: 0.0005,
            rannacher_substeps: 4,
            mass_mode: MassMode::Lumped,
            nonlinearity: NonlinearVariant::GroupFe,
            power_mode: PowerMode::Signed,
            boundary_v: BoundaryExtrapolation::Copy,
            boundary_weighting: BoundaryWeighting::Consistent,
            history_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dtau",
                value: self.dtau,
                reason: "must be finite and > 0",
            });
        }
        if self.rannacher_substeps > MAX_RANNACHER_SUBSTEPS {
            return Err(Error::InvalidParameter {
                name: "rannacher_substeps",
                value: self.rannacher_substeps as f64,
                reason: "must be at most 16",
            });
        }
        if self.history_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "history_stride",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

enum MassInverse {
    Lumped(Vec<f64>),
    Consistent {
        lu: BandLu,
        // M⁻¹(−K + P), constant over the run
        recovery_dense: DMatrix<f64>,
        mass_dense: DMatrix<f64>,
        linear_dense: DMatrix<f64>,
    },
}

/// Step matrix `A` of the linearized scheme.
pub enum StepMatrix {
    Band(BandMatrix),
    Dense(DMatrix<f64>),
}

impl StepMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            StepMatrix::Band(b) => b.get(i, j),
            StepMatrix::Dense(d) => d[(i, j)],
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            StepMatrix::Band(b) => b.solve(rhs),
            StepMatrix::Dense(d) => {
                let lu = d.clone().lu();
                let b = DVector::from_column_slice(rhs);
                match lu.solve(&b) {
                    Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x.as_slice().to_vec()),
                    _ => Err(Error::LinearSolveFailure {
                        row: 0,
                        pivot: 0.0,
                        dtau_dx2: None,
                    }),
                }
            }
        }
    }
}

/// One-step machinery for a fixed assembled system.
pub struct Stepper<'a> {
    sys: &'a GlobalSystem,
    d_coeff: f64,
    c_r: f64,
    boundary: BoundaryState,
    power: PowerMode,
    extrapolation: BoundaryExtrapolation,
    weighting: BoundaryWeighting,
    // −K + (1+D) P
    linear_op: BandMatrix,
    // −K + P
    recovery_op: BandMatrix,
    mass_inv: MassInverse,
    // boundary v as weights on the first/last two interior values
    left_ext: [f64; 2],
    right_ext: [f64; 2],
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a GlobalSystem,
        d_coeff: f64,
        c_r: f64,
        boundary: BoundaryState,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let n = sys.num_interior();
        if n == 0 {
            return Err(Error::InvalidConfig("mesh has no interior nodes".into()));
        }
        let linear_op = sys.stiff.linear_combination(-1.0, &sys.conv, 1.0 + d_coeff);
        let recovery_op = sys.stiff.linear_combination(-1.0, &sys.conv, 1.0);
        let mass_inv = match cfg.mass_mode {
            MassMode::Lumped => {
                if sys.lumped_mass.iter().any(|&m| !(m > 0.0)) {
                    return Err(Error::SingularMass);
                }
                MassInverse::Lumped(sys.lumped_mass.iter().map(|m| 1.0 / m).collect())
            }
            MassMode::Consistent => {
                if n > MAX_CONSISTENT_UNKNOWNS {
                    return Err(Error::InvalidConfig(format!(
                        "consistent mass mode supports at most {MAX_CONSISTENT_UNKNOWNS} unknowns, mesh has {n}"
                    )));
                }
                let lu = sys.mass.factor().map_err(|_| Error::SingularMass)?;
                let mut recovery_dense = DMatrix::zeros(n, n);
                let mut col = vec![0.0; n];
                for j in 0..n {
                    col.iter_mut().for_each(|c| *c = 0.0);
                    for i in
                        j.saturating_sub(recovery_op.upper_bandwidth())..(j + recovery_op.lower_bandwidth() + 1).min(n)
                    {
                        col[i] = recovery_op.get(i, j);
                    }
                    lu.solve_in_place(&mut col);
                    recovery_dense.column_mut(j).copy_from_slice(&col);
                }
                MassInverse::Consistent {
                    lu,
                    recovery_dense,
                    mass_dense: band_to_dense(&sys.mass),
                    linear_dense: band_to_dense(&linear_op),
                }
            }
        };
        let nodes = sys.nodes();
        let (left_ext, right_ext) = match cfg.boundary_v {
            BoundaryExtrapolation::Linear if n >= 2 => {
                let t = (nodes[0] - nodes[1]) / (nodes[2] - nodes[1]);
                let m = nodes.len() - 1;
                let s = (nodes[m] - nodes[m - 1]) / (nodes[m - 2] - nodes[m - 1]);
                ([1.0 - t, t], [1.0 - s, s])
            }
            _ => ([1.0, 0.0], [1.0, 0.0]),
        };
        Ok(Self {
            sys,
            d_coeff,
            c_r,
            boundary,
            power: cfg.power_mode,
            extrapolation: cfg.boundary_v,
            weighting: cfg.boundary_weighting,
            linear_op,
            recovery_op,
            mass_inv,
            left_ext,
            right_ext,
        })
    }

    pub fn system(&self) -> &GlobalSystem {
        self.sys
    }

    pub fn extrapolation(&self) -> BoundaryExtrapolation {
        self.extrapolation
    }

    pub fn lifting(&self, tau: f64) -> LiftingVectors {
        crate::assembly::lifting_vectors(self.sys, &self.boundary, tau)
    }

    pub fn boundary(&self) -> &BoundaryState {
        &self.boundary
    }

    fn apply_mass_inverse(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        match &self.mass_inv {
            MassInverse::Lumped(inv) => {
                rhs.iter_mut().zip(inv).for_each(|(r, m)| *r *= m);
                rhs
            }
            MassInverse::Consistent { lu, .. } => {
                lu.solve_in_place(&mut rhs);
                rhs
            }
        }
    }

    /// Solves `M v = −K u + P u − b_K + b_P`.
    pub fn recover_v(&self, u: &[f64], lift: &LiftingVectors) -> Result<Vec<f64>> {
        let n = self.sys.num_interior();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut rhs = self.recovery_op.mul_vec(u);
        for ((r, bk), bp) in rhs.iter_mut().zip(&lift.b_k).zip(&lift.b_p) {
            *r += bp - bk;
        }
        Ok(self.apply_mass_inverse(rhs))
    }

    /// Boundary values of `v` from the interior values.
    pub fn boundary_v(&self, v: &[f64]) -> (f64, f64) {
        let n = v.len();
        let left = self.left_ext[0] * v[0] + if n > 1 { self.left_ext[1] * v[1] } else { 0.0 };
        let right = self.right_ext[0] * v[n - 1] + if n > 1 { self.right_ext[1] * v[n - 2] } else { 0.0 };
        (left, right)
    }

    /// Full nodal `v` (boundary nodes included).
    pub fn extend_v(&self, v: &[f64]) -> Vec<f64> {
        let (l, r) = self.boundary_v(v);
        let mut full = Vec::with_capacity(v.len() + 2);
        full.push(l);
        full.extend_from_slice(v);
        full.push(r);
        full
    }

    /// `N g(v)` without the `C_R` factor.
    pub fn nonlinear_term(&self, v: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = v.iter().map(|&x| self.power.pow43(x)).collect();
        let mut out = self.sys.nonlin.mul_vec(&g);
        let (l, r) = self.boundary_v(v);
        let (gl, gr) = (self.power.pow43(l), self.power.pow43(r));
        for ((o, bl), br) in out
            .iter_mut()
            .zip(&self.sys.nonlin_bc.left)
            .zip(&self.sys.nonlin_bc.right)
        {
            *o += bl * gl + br * gr;
        }
        out
    }

    /// `F(u) = −K u + (1+D) P u + C_R N g(v) − b_K + (1+D) b_P`.
    pub fn rhs_f(&self, u: &[f64], v: &[f64], lift: &LiftingVectors) -> Vec<f64> {
        let mut f = self.linear_op.mul_vec(u);
        let scale = 1.0 + self.d_coeff;
        for ((fi, bk), bp) in f.iter_mut().zip(&lift.b_k).zip(&lift.b_p) {
            *fi += scale * bp - bk;
        }
        if self.c_r != 0.0 {
            for (fi, nl) in f.iter_mut().zip(self.nonlinear_term(v)) {
                *fi += self.c_r * nl;
            }
        }
        f
    }

    /// `N diag(w(vⁿ)) E` as an interior band matrix, `E` being the boundary
    /// extension of `v`. Satisfies `G(v) v = N g(v)`.
    pub fn linearized_nonlinear_op(&self, v: &[f64]) -> BandMatrix {
        let n = v.len();
        let w: Vec<f64> = v.iter().map(|&x| self.power.cbrt_factor(x)).collect();
        let mut g = self.sys.nonlin.scale_columns(&w);
        let (l, r) = self.boundary_v(v);
        let (wl, wr) = (self.power.cbrt_factor(l), self.power.cbrt_factor(r));
        let reach = g.lower_bandwidth().max(1).min(n);
        for row in 0..reach {
            let c = self.sys.nonlin_bc.left[row] * wl;
            if c != 0.0 {
                g.add(row, 0, c * self.left_ext[0]);
                if n > 1 && self.left_ext[1] != 0.0 {
                    g.add(row, 1, c * self.left_ext[1]);
                }
            }
        }
        for row in n - reach..n {
            let c = self.sys.nonlin_bc.right[row] * wr;
            if c != 0.0 {
                g.add(row, n - 1, c * self.right_ext[0]);
                if n > 1 && self.right_ext[1] != 0.0 {
                    g.add(row, n - 2, c * self.right_ext[1]);
                }
            }
        }
        g
    }

    /// Step matrix for the linear problem, `M − θΔτ(−K + (1+D)P)`.
    pub fn linear_step_matrix(&self, dtau: f64, theta: f64) -> BandMatrix {
        self.sys.mass.linear_combination(1.0, &self.linear_op, -theta * dtau)
    }

    /// `A = M − θΔτ(−K + (1+D)P + C_R G(vⁿ) M⁻¹(−K + P))`.
    pub fn step_matrix(&self, v: &[f64], dtau: f64, theta: f64) -> StepMatrix {
        match &self.mass_inv {
            MassInverse::Lumped(inv) => {
                if self.c_r == 0.0 {
                    return StepMatrix::Band(self.linear_step_matrix(dtau, theta));
                }
                let g = self.linearized_nonlinear_op(v);
                let coupled = g.scale_columns(inv).matmul(&self.recovery_op);
                let inner = self.linear_op.linear_combination(1.0, &coupled, self.c_r);
                StepMatrix::Band(self.sys.mass.linear_combination(1.0, &inner, -theta * dtau))
            }
            MassInverse::Consistent {
                recovery_dense,
                mass_dense,
                linear_dense,
                ..
            } => {
                let mut inner = linear_dense.clone();
                if self.c_r != 0.0 {
                    let g = band_to_dense(&self.linearized_nonlinear_op(v));
                    inner += (g * recovery_dense) * self.c_r;
                }
                StepMatrix::Dense(mass_dense - inner * (theta * dtau))
            }
        }
    }

    /// Advances `uⁿ` at `tau` by `dtau` with weight `theta`.
    pub fn step(&self, u: &[f64], v: &[f64], tau: f64, dtau: f64, theta: f64) -> Result<Vec<f64>> {
        let lift_old = self.lifting(tau);
        let lift_new = self.lifting(tau + dtau);
        let f_old = self.rhs_f(u, v, &lift_old);

        let mut rhs = self.sys.mass.mul_vec(u);
        for i in 0..rhs.len() {
            rhs[i] += (1.0 - theta) * dtau * f_old[i] - lift_new.b_m[i] + lift_old.b_m[i];
        }

        let src: Vec<f64> = lift_new.b_p.iter().zip(&lift_new.b_k).map(|(bp, bk)| bp - bk).collect();
        match self.weighting {
            BoundaryWeighting::Consistent => {
                let scale = 1.0 + self.d_coeff;
                for ((r, bp), bk) in rhs.iter_mut().zip(&lift_new.b_p).zip(&lift_new.b_k) {
                    *r += theta * dtau * (scale * bp - bk);
                }
                if self.c_r != 0.0 {
                    let g = self.linearized_nonlinear_op(v);
                    let coupled = g.mul_vec(&self.apply_mass_inverse(src));
                    for (r, c) in rhs.iter_mut().zip(coupled) {
                        *r += theta * dtau * self.c_r * c;
                    }
                }
            }
            BoundaryWeighting::Literal => {
                if self.c_r != 0.0 {
                    let coupled = self.linearized_nonlinear_op(v).mul_vec(&src);
                    for (r, c) in rhs.iter_mut().zip(coupled) {
                        *r -= self.c_r * c;
                    }
                }
            }
        }

        self.step_matrix(v, dtau, theta).solve(&rhs)
    }
}

fn band_to_dense(b: &BandMatrix) -> DMatrix<f64> {
    let n = b.dim();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in b.row_range(i) {
            d[(i, j)] = b.get(i, j);
        }
    }
    d
}

/// Run statistics attached to a [`SolutionSurface`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Element size (uniform meshes) or largest element size.
    pub dx: f64,
    /// Effective macro time step after rounding.
    pub dtau: f64,
    pub steps: usize,
    pub theta: f64,
    pub rannacher_substeps: usize,
    /// `Δτ / Δx²`.
    pub dtau_dx2: f64,
    /// Largest `|v|` seen over the run.
    pub max_abs_v: f64,
}

/// Nodal history of the nonlinear phase from `τ*` to `τ_max`.
#[derive(Debug, Clone)]
pub struct SolutionSurface {
    pub params: RapmParams,
    pub mesh: Mesh1D,
    pub tau_grid: Vec<f64>,
    /// Full nodal `u` per stored time, boundary nodes included.
    pub u_history: Vec<Vec<f64>>,
    /// Full nodal `v` per stored time (boundary values extrapolated).
    pub v_history: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl SolutionSurface {
    /// Nodal `u` at `τ_max` (calendar time `t = 0`).
    pub fn final_u(&self) -> &[f64] {
        self.u_history.last().expect("surface holds at least one level")
    }

    pub fn strike(&self) -> f64 {
        self.params.strike()
    }

    fn check_spot(&self, spot: f64) -> Result<f64> {
        let k = self.params.strike();
        let (lo, hi) = (k * self.mesh.left().exp(), k * self.mesh.right().exp());
        let tol = 1e-12 * hi;
        if !(spot >= lo - tol && spot <= hi + tol) {
            return Err(Error::SpotOutOfDomain { spot, lo, hi });
        }
        Ok((spot / k).ln().clamp(self.mesh.left(), self.mesh.right()))
    }

    /// Option value at `t = 0` for spot `spot`.
    pub fn price_at_spot(&self, spot: f64) -> Result<f64> {
        let x = self.check_spot(spot)?;
        let u = self.mesh.interpolate(self.final_u(), x).expect("x is inside the mesh");
        Ok(spot * u)
    }

    /// Option value at calendar time `t ∈ [0, T]`. After the switching time
    /// the closed-form Black–Scholes value is returned; before it the stored
    /// levels are interpolated linearly in `τ`.
    pub fn price(&self, spot: f64, t: f64) -> Result<f64> {
        let dc = self.params.derived();
        if t >= dc.t_star {
            if !(spot > 0.0) {
                return Err(Error::NonpositiveSpot(spot));
            }
            return Ok(bs_call_price(spot, t, &self.params));
        }
        let x = self.check_spot(spot)?;
        let s2 = self.params.sigma() * self.params.sigma();
        let tau = (0.5 * s2 * (self.params.expiry() - t)).min(dc.tau_max);
        let k = self
            .tau_grid
            .partition_point(|&tk| tk <= tau)
            .clamp(1, self.tau_grid.len() - 1);
        let (t0, t1) = (self.tau_grid[k - 1], self.tau_grid[k]);
        let w = ((tau - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let u0 = self.mesh.interpolate(&self.u_history[k - 1], x).unwrap();
        let u1 = self.mesh.interpolate(&self.u_history[k], x).unwrap();
        Ok(spot * ((1.0 - w) * u0 + w * u1))
    }
}

fn non_finite(step: usize, tau: f64, u: &[f64], v: &[f64], dtau_dx2: f64) -> Error {
    Error::NonFiniteState(Box::new(NonFiniteFailure {
        step,
        tau,
        u: u.to_vec(),
        v: v.to_vec(),
        dtau_dx2,
    }))
}

/// Integrates the nonlinear phase on `mesh` from `τ*` to `τ_max`.
///
/// The mesh must be symmetric, `[-R, R]`.
pub fn solve_nonlinear_phase(params: &RapmParams, mesh: &Mesh1D, cfg: &SolverConfig) -> Result<SolutionSurface> {
    cfg.validate()?;
    let radius = mesh.right();
    if (mesh.left() + radius).abs() > 1e-12 * radius {
        return Err(Error::InvalidConfig("mesh must span a symmetric domain [-R, R]".into()));
    }
    let dc = params.derived();
    let span = dc.tau_max - dc.tau_star;
    if !(span > 0.0) {
        return Err(Error::InvalidConfig("switching time must precede t = 0".into()));
    }
    let steps = ((span / cfg.dtau).round() as usize).max(1);
    let dtau = span / steps as f64;
    let dx = mesh.max_element_size();
    let dtau_dx2 = dtau / (dx * dx);

    let sys = assemble(mesh, cfg.nonlinearity)?;
    let boundary = BoundaryState::new(dc.d_coeff, radius);
    let stepper = Stepper::new(&sys, dc.d_coeff, dc.c_r, boundary, cfg)?;
    let nodes = mesh.nodes();
    let n = sys.num_interior();

    let mut u: Vec<f64> = nodes[1..=n].iter().map(|&x| initial_profile(x, params)).collect();
    let mut tau = dc.tau_star;
    let mut v = stepper.recover_v(&u, &stepper.lifting(tau))?;

    let full = |u: &[f64], tau: f64| {
        let mut out = Vec::with_capacity(n + 2);
        out.push(boundary.u_left(tau));
        out.extend_from_slice(u);
        out.push(boundary.u_right(tau));
        out
    };

    let mut max_abs_v = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut tau_grid = vec![tau];
    let mut u_history = vec![full(&u, tau)];
    let mut v_history = vec![stepper.extend_v(&v)];
    if !u.iter().chain(&v).all(|x| x.is_finite()) {
        return Err(non_finite(0, tau, &u_history[0], &v_history[0], dtau_dx2));
    }

    let with_ratio = |e: Error| match e {
        Error::LinearSolveFailure { row, pivot, .. } => Error::LinearSolveFailure {
            row,
            pivot,
            dtau_dx2: Some(dtau_dx2),
        },
        other => other,
    };

    for step in 0..steps {
        let next_tau = dc.tau_star + (step + 1) as f64 * dtau;
        let (u_new, v_new) = if step == 0 && cfg.rannacher_substeps > 0 {
            let sub = cfg.rannacher_substeps;
            let h = (next_tau - tau) / sub as f64;
            let (mut us, mut vs) = (u.clone(), v.clone());
            for s in 0..sub {
                let t0 = tau + s as f64 * h;
                us = stepper.step(&us, &vs, t0, h, 1.0).map_err(with_ratio)?;
                vs = stepper.recover_v(&us, &stepper.lifting(t0 + h))?;
                if !us.iter().chain(&vs).all(|x| x.is_finite()) {
                    break;
                }
            }
            (us, vs)
        } else {
            let un = stepper
                .step(&u, &v, tau, next_tau - tau, cfg.theta)
                .map_err(with_ratio)?;
            let vn = stepper.recover_v(&un, &stepper.lifting(next_tau))?;
            (un, vn)
        };

        if !u_new.iter().chain(&v_new).all(|x| x.is_finite()) {
            return Err(non_finite(step, tau, &full(&u, tau), &stepper.extend_v(&v), dtau_dx2));
        }
        u = u_new;
        v = v_new;
        tau = next_tau;
        max_abs_v = v.iter().fold(max_abs_v, |m, x| m.max(x.abs()));
        if (step + 1) % cfg.history_stride == 0 || step + 1 == steps {
            tau_grid.push(tau);
            u_history.push(full(&u, tau));
            v_history.push(stepper.extend_v(&v));
        }
    }

    Ok(SolutionSurface {
        params: *params,
        mesh: mesh.clone(),
        tau_grid,
        u_history,
        v_history,
        diagnostics: Diagnostics {
            dx,
            dtau,
            steps,
            theta: cfg.theta,
            rannacher_substeps: cfg.rannacher_substeps,
            dtau_dx2,
            max_abs_v,
        },
    })
}

/// Solves the nonlinear phase and returns `(S, V(S, 0))` for each spot.
pub fn price_option(params: &RapmParams, mesh: &Mesh1D, cfg: &SolverConfig, spots: &[f64]) -> Result<Vec<(f64, f64)>> {
    let k = params.strike();
    let (lo, hi) = (k * mesh.left().exp(), k * mesh.right().exp());
    if let Some(&spot) = spots
        .iter()
        .find(|&&s| !(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)))
    {
        return Err(Error::SpotOutOfDomain { spot, lo, hi });
    }
    let surface = solve_nonlinear_phase(params, mesh, cfg)?;
    spots
        .iter()
        .map(|&s| surface.price_at_spot(s).map(|v| (s, v)))
        .collect()
}

/// Element order label used in reports, e.g. `p1-group`.
pub fn variant_label(order: ElementOrder, variant: NonlinearVariant) -> String {
    format!("{order}-{variant}")
}
