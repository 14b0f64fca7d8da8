//! One-dimensional meshes on `[-R, R]` with linear (P1) and quadratic (P2)
//! Lagrange elements.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementOrder {
    P1,
    P2,
}

impl ElementOrder {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementOrder::P1 => 2,
            ElementOrder::P2 => 3,
        }
    }

    /// Half-bandwidth of the assembled matrices.
    pub fn bandwidth(self) -> usize {
        self.nodes_per_element() - 1
    }
}

impl fmt::Display for ElementOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementOrder::P1 => "p1",
            ElementOrder::P2 => "p2",
        })
    }
}

impl FromStr for ElementOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(ElementOrder::P1),
            "p2" => Ok(ElementOrder::P2),
            other => Err(format!("unknown element order `{other}` (expected p1 or p2)")),
        }
    }
}

/// Shape function values and `d/dξ` derivatives on the reference element
/// `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFunctionSet {
    len: usize,
    values: [f64; 3],
    derivs: [f64; 3],
}

impl ShapeFunctionSet {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    /// Derivatives with respect to the reference coordinate. Divide by the
    /// element size for `d/dx`.
    pub fn derivs(&self) -> &[f64] {
        &self.derivs[..self.len]
    }
}

/// Evaluates all shape functions of `order` at reference coordinate `xi`.
///
/// Local node order is left endpoint, (midpoint,) right endpoint.
pub fn shape_eval(order: ElementOrder, xi: f64) -> Result<ShapeFunctionSet> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::OutOfRange(xi));
    }
    Ok(shape_eval_unchecked(order, xi))
}

pub(crate) fn shape_eval_unchecked(order: ElementOrder, xi: f64) -> ShapeFunctionSet {
    match order {
        ElementOrder::P1 => ShapeFunctionSet {
            len: 2,
            values: [1.0 - xi, xi, 0.0],
            derivs: [-1.0, 1.0, 0.0],
        },
        ElementOrder::P2 => ShapeFunctionSet {
            len: 3,
            values: [
                2.0 * (xi - 0.5) * (xi - 1.0),
                -4.0 * xi * (xi - 1.0),
                2.0 * xi * (xi - 0.5),
            ],
            derivs: [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0],
        },
    }
}

/// A mesh of `[-R, R]`. Nodes are sorted; for P2 every element owns the
/// midpoint between its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    order: ElementOrder,
    nodes: Vec<f64>,
    connectivity: Vec<usize>,
}

impl Mesh1D {
    /// Builds a mesh from element endpoints `x_0 < x_1 < … < x_{n_E}`.
    /// P2 midpoints are inserted automatically.
    pub fn from_endpoints(endpoints: &[f64], order: ElementOrder) -> Result<Self> {
        if endpoints.len() < 2 {
            return Err(Error::InvalidConfig("a mesh needs at least two endpoints".into()));
        }
        for w in endpoints.windows(2) {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::InvalidConfig(
                    "mesh endpoints must be finite and strictly increasing".into(),
                ));
            }
        }
        let n_elem = endpoints.len() - 1;
        let k = order.nodes_per_element();
        let mut nodes = Vec::with_capacity(n_elem * (k - 1) + 1);
        let mut connectivity = Vec::with_capacity(n_elem * k);
        nodes.push(endpoints[0]);
        for e in 0..n_elem {
            let first = nodes.len() - 1;
            if order == ElementOrder::P2 {
                nodes.push(0.5 * (endpoints[e] + endpoints[e + 1]));
            }
            nodes.push(endpoints[e + 1]);
            connectivity.extend(first..first + k);
        }
        Ok(Self {
            order,
            nodes,
            connectivity,
        })
    }

    pub fn order(&self) -> ElementOrder {
        self.order
    }

    /// All node coordinates, boundary nodes included.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of unknowns once both boundary nodes are eliminated.
    pub fn num_interior(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn num_elements(&self) -> usize {
        self.connectivity.len() / self.order.nodes_per_element()
    }

    /// Global node indices of element `e`, in local order.
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        let k = self.order.nodes_per_element();
        &self.connectivity[e * k..(e + 1) * k]
    }

    pub fn element_size(&self, e: usize) -> f64 {
        let ids = self.element_nodes(e);
        self.nodes[ids[ids.len() - 1]] - self.nodes[ids[0]]
    }

    pub fn element_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_elements()).map(|e| self.element_size(e))
    }

    pub fn left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn right(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Largest element size (the `Δx` of a uniform mesh).
    pub fn max_element_size(&self) -> f64 {
        self.element_sizes().fold(0.0, f64::max)
    }

    /// Smallest distance between neighbouring nodes.
    pub fn min_node_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Element containing `x` and the local reference coordinate.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.left() && x <= self.right()) {
            return None;
        }
        let step = self.order.nodes_per_element() - 1;
        // endpoints sit at node indices 0, step, 2*step, ...
        let n_elem = self.num_elements();
        let idx = self.nodes.partition_point(|&node| node <= x);
        let node = idx.saturating_sub(1);
        let e = (node / step).min(n_elem - 1);
        let a = self.nodes[e * step];
        let h = self.element_size(e);
        Some((e, ((x - a) / h).clamp(0.0, 1.0)))
    }

    /// Evaluates the finite element function with full nodal values `values`
    /// at `x`, using the element's own basis.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.nodes.len());
        let (e, xi) = self.locate(x)?;
        let shape = shape_eval_unchecked(self.order, xi);
        Some(
            self.element_nodes(e)
                .iter()
                .zip(shape.values())
                .map(|(&i, &psi)| values[i] * psi)
                .sum(),
        )
    }
}

/// Uniform mesh of `[-R, R]` with element size as close to `dx` as possible.
///
/// When `2R/dx` is not an integer the element count is rounded up and the
/// spacing recomputed, so the domain endpoints stay exact.
pub fn uniform_mesh(radius: f64, dx: f64, order: ElementOrder) -> Result<Mesh1D> {
    if !(radius > 0.0) || !radius.is_finite() || !(dx > 0.0) || !(dx < 2.0 * radius) {
        return Err(Error::InvalidSpacing { dx, radius });
    }
    let ratio = 2.0 * radius / dx;
    let rounded = ratio.round();
    // absorb floating-point noise like 6/0.01 = 599.9999999999999
    let n_elem = if (ratio - rounded).abs() <= 1e-9 * rounded {
        rounded as usize
    } else {
        ratio.ceil() as usize
    };
    uniform_mesh_with_elements(radius, n_elem, order)
}

/// Uniform mesh of `[-R, R]` with exactly `n_elem` elements.
pub fn uniform_mesh_with_elements(radius: f64, n_elem: usize, order: ElementOrder) -> Result<Mesh1D> {
    if !(radius > 0.0) || n_elem < 2 {
        return Err(Error::InvalidSpacing {
            dx: 2.0 * radius / n_elem as f64,
            radius,
        });
    }
    let h = 2.0 * radius / n_elem as f64;
    let mut endpoints: Vec<f64> = (0..=n_elem).map(|i| -radius + i as f64 * h).collect();
    endpoints[n_elem] = radius;
    Mesh1D::from_endpoints(&endpoints, order)
}
