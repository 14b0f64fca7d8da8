//! Finite difference solver for the transformed equation, used as an
//! independent check on the finite element path.
//!
//! Centered differences on a uniform grid; the linear part
//! `w + D u_x` (with `w = u_xx + u_x`) is advanced by the θ-scheme and the
//! nonlinear part `C_R g(w)` is evaluated explicitly at the old level.
//! The explicit term makes the scheme first order in `Δτ`; refining with
//! `Δτ ∝ Δx²` (see [`FdmConfig::parabolic`]) restores second-order
//! convergence of the whole scheme.

use crate::assembly::BoundaryState;
use crate::banded::BandMatrix;
use crate::elements::PowerMode;
use crate::error::{Error, NonFiniteFailure, Result};
use crate::mesh::{uniform_mesh, ElementOrder, Mesh1D};
use crate::model::{initial_profile, RapmParams, TruncatedDomain};
use crate::solver::{Diagnostics, SolutionSurface};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdmConfig {
    pub dx: f64,
    pub dtau: f64,
    pub radius: f64,
    pub theta: f64,
    pub power_mode: PowerMode,
    pub rannacher_substeps: usize,
}

impl Default for FdmConfig {
    fn default() -> Self {
        Self {
            dx: 0.01,
            dtau: 0.0005,
            radius: TruncatedDomain::DEFAULT_RADIUS,
            theta: 0.5,
            power_mode: PowerMode::Signed,
            rannacher_substeps: 4,
        }
    }
}

impl FdmConfig {
    /// Default configuration with `Δτ = Δx²`.
    pub fn parabolic(dx: f64) -> Self {
        Self {
            dx,
            dtau: dx * dx,
            ..Self::default()
        }
    }
}

/// Matrix of the centered stencil for `u_xx + a·u_x` on the interior of a
/// uniform grid with spacing `h`, and its two boundary columns.
pub fn fd_operator(n: usize, h: f64, a: f64) -> (BandMatrix, [f64; 2]) {
    let lower = 1.0 / (h * h) - a / (2.0 * h);
    let upper = 1.0 / (h * h) + a / (2.0 * h);
    let mut m = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        m.set(i, i, -2.0 / (h * h));
        if i > 0 {
            m.set(i, i - 1, lower);
        }
        if i + 1 < n {
            m.set(i, i + 1, upper);
        }
    }
    (m, [lower, upper])
}

struct Grid {
    mesh: Mesh1D,
    h: f64,
    n: usize,
}

fn apply(op: &(BandMatrix, [f64; 2]), u: &[f64], ul: f64, ur: f64) -> Vec<f64> {
    let mut out = op.0.mul_vec(u);
    let n = out.len();
    out[0] += op.1[0] * ul;
    out[n - 1] += op.1[1] * ur;
    out
}

pub fn fdm_solve(params: &RapmParams, cfg: &FdmConfig) -> Result<SolutionSurface> {
    if !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: cfg.theta,
            reason: "must lie in [0, 1]",
        });
    }
    if !(cfg.dtau > 0.0) || !cfg.dtau.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dtau",
            value: cfg.dtau,
            reason: "must be finite and > 0",
        });
    }
    let mesh = uniform_mesh(cfg.radius, cfg.dx, ElementOrder::P1)?;
    let grid = Grid {
        h: mesh.max_element_size(),
        n: mesh.num_interior(),
        mesh,
    };
    let dc = params.derived();
    let d = dc.d_coeff;
    let boundary = BoundaryState::new(d, cfg.radius);

    let span = dc.tau_max - dc.tau_star;
    if !(span > 0.0) {
        return Err(Error::InvalidConfig("switching time must precede t = 0".into()));
    }
    let steps = ((span / cfg.dtau).round() as usize).max(1);
    let dtau = span / steps as f64;
    let dtau_dx2 = dtau / (grid.h * grid.h);

    // full linear operator u_xx + (1+D) u_x and the mixed variable u_xx + u_x
    let lin = fd_operator(grid.n, grid.h, 1.0 + d);
    let mixed = fd_operator(grid.n, grid.h, 1.0);

    let nodes = grid.mesh.nodes().to_vec();
    let mut u: Vec<f64> = nodes[1..=grid.n].iter().map(|&x| initial_profile(x, params)).collect();
    let mut tau = dc.tau_star;

    let w_of = |u: &[f64], tau: f64| apply(&mixed, u, boundary.u_left(tau), boundary.u_right(tau));
    let full_u = |u: &[f64], tau: f64| {
        let mut f = Vec::with_capacity(u.len() + 2);
        f.push(boundary.u_left(tau));
        f.extend_from_slice(u);
        f.push(boundary.u_right(tau));
        f
    };
    let full_w = |w: &[f64]| {
        let mut f = Vec::with_capacity(w.len() + 2);
        f.push(w[0]);
        f.extend_from_slice(w);
        f.push(w[w.len() - 1]);
        f
    };

    let step = |u: &[f64], w: &[f64], tau: f64, dt: f64, theta: f64| -> Result<Vec<f64>> {
        let (ul0, ur0) = (boundary.u_left(tau), boundary.u_right(tau));
        let (ul1, ur1) = (boundary.u_left(tau + dt), boundary.u_right(tau + dt));
        let lu_old = apply(&lin, u, ul0, ur0);
        let mut rhs: Vec<f64> = (0..u.len())
            .map(|i| u[i] + (1.0 - theta) * dt * lu_old[i] + dt * dc.c_r * cfg.power_mode.pow43(w[i]))
            .collect();
        let n = rhs.len();
        rhs[0] += theta * dt * lin.1[0] * ul1;
        rhs[n - 1] += theta * dt * lin.1[1] * ur1;
        let identity = BandMatrix::from_diagonal(&vec![1.0; n]);
        let a = identity.linear_combination(1.0, &lin.0, -theta * dt);
        a.solve(&rhs)
    };

    let mut w = w_of(&u, tau);
    let mut max_abs_v = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut tau_grid = vec![tau];
    let mut u_history = vec![full_u(&u, tau)];
    let mut v_history = vec![full_w(&w)];

    for k in 0..steps {
        let next_tau = dc.tau_star + (k + 1) as f64 * dtau;
        let u_new = if k == 0 && cfg.rannacher_substeps > 0 {
            let sub = cfg.rannacher_substeps;
            let h = (next_tau - tau) / sub as f64;
            let mut us = u.clone();
            for s in 0..sub {
                let t0 = tau + s as f64 * h;
                let ws = w_of(&us, t0);
                us = step(&us, &ws, t0, h, 1.0)?;
            }
            us
        } else {
            step(&u, &w, tau, next_tau - tau, cfg.theta)?
        };
        let w_new = w_of(&u_new, next_tau);
        if !u_new.iter().chain(&w_new).all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState(Box::new(NonFiniteFailure {
                step: k,
                tau,
                u: u_history.last().unwrap().clone(),
                v: v_history.last().unwrap().clone(),
                dtau_dx2,
            })));
        }
        u = u_new;
        w = w_new;
        tau = next_tau;
        max_abs_v = w.iter().fold(max_abs_v, |m, x| m.max(x.abs()));
        tau_grid.push(tau);
        u_history.push(full_u(&u, tau));
        v_history.push(full_w(&w));
    }

    Ok(SolutionSurface {
        params: *params,
        mesh: grid.mesh,
        tau_grid,
        u_history,
        v_history,
        diagnostics: Diagnostics {
            dx: grid.h,
            dtau,
            steps,
            theta: cfg.theta,
            rannacher_substeps: cfg.rannacher_substeps,
            dtau_dx2,
            max_abs_v,
        },
    })
}
