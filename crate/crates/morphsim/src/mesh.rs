//! Tensor-product grids on an interval or an axis-aligned rectangle, with a
//! mixed Dirichlet/Neumann partition of the boundary, and the trapezoidal
//! quadrature every integral in this crate uses.
//!
//! Dirichlet nodes are eliminated from the unknown vector: a [`Field`] holds
//! one value per remaining lattice node (lexicographic order, x fastest) and
//! eliminated nodes are implicitly zero. Nodes that sit on both a Dirichlet
//! and a Neumann face (2D corners) count as Dirichlet.

use crate::error::{Error, Result};

/// Boundary condition kind for one face of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Value pinned to zero; the node is eliminated.
    Dirichlet,
    /// Prescribed inward flux (homogeneous unless boundary data says otherwise).
    Neumann,
}

/// A face of the domain. 1D domains have `West`/`East` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Face {
    West,
    East,
    South,
    North,
}

impl Face {
    /// Axis the face is orthogonal to.
    pub fn axis(self) -> usize {
        match self {
            Face::West | Face::East => 0,
            Face::South | Face::North => 1,
        }
    }

    /// True for the high-coordinate end of the axis.
    pub fn is_high(self) -> bool {
        matches!(self, Face::East | Face::North)
    }

    /// The faces a domain of the given dimension has.
    pub fn all(dim: usize) -> &'static [Face] {
        match dim {
            1 => &[Face::West, Face::East],
            _ => &[Face::West, Face::East, Face::South, Face::North],
        }
    }

    fn index(self) -> usize {
        match self {
            Face::West => 0,
            Face::East => 1,
            Face::South => 2,
            Face::North => 3,
        }
    }
}

/// Everything needed to build a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Physical extent per axis; length gives the dimension (1 or 2).
    pub extents: Vec<f64>,
    /// Lattice nodes per axis, boundary nodes included (>= 3).
    pub nodes: Vec<usize>,
    /// Boundary condition per face; every face of the dimension exactly once.
    pub conditions: Vec<(Face, BcKind)>,
}

impl GridSpec {
    /// Interval [0, length] with the two endpoint conditions.
    pub fn interval(length: f64, nodes: usize, west: BcKind, east: BcKind) -> Self {
        GridSpec {
            extents: vec![length],
            nodes: vec![nodes],
            conditions: vec![(Face::West, west), (Face::East, east)],
        }
    }

    /// Rectangle [0, lx] x [0, ly].
    pub fn rectangle(
        extents: [f64; 2],
        nodes: [usize; 2],
        west: BcKind,
        east: BcKind,
        south: BcKind,
        north: BcKind,
    ) -> Self {
        GridSpec {
            extents: extents.to_vec(),
            nodes: nodes.to_vec(),
            conditions: vec![
                (Face::West, west),
                (Face::East, east),
                (Face::South, south),
                (Face::North, north),
            ],
        }
    }
}

/// A Neumann boundary node together with its precomputed geometric factors.
#[derive(Debug, Clone)]
pub(crate) struct NeumannNode {
    pub dof: usize,
    /// Sum over the Neumann faces the node lies on of (transverse weight)/h_axis;
    /// multiplies nu in the discrete source.
    pub source_coef: f64,
    /// Trapezoidal surface measure of the node on the Neumann boundary.
    pub measure: f64,
}

/// Validated grid: lattice, boundary partition, DoF numbering and quadrature
/// weights.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    nodes: [usize; 2],
    h: [f64; 2],
    bc: [Option<BcKind>; 4],
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    /// Relative trapezoid weight per DoF (product of per-axis 1/2 endpoint factors).
    weights: Vec<f64>,
    neumann: Vec<NeumannNode>,
}

/// Builds a grid from its spec.
///
/// Fails when the dimension is not 1 or 2, any extent is nonpositive, any
/// axis has fewer than 3 nodes, a face condition is missing or duplicated, or
/// the partition lacks a Dirichlet or a Neumann face.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    let dim = spec.extents.len();
    if dim != 1 && dim != 2 {
        return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if spec.nodes.len() != dim {
        return Err(Error::Grid(format!(
            "got {} node counts for a {dim}-dimensional domain",
            spec.nodes.len()
        )));
    }
    for (a, (&ext, &n)) in spec.extents.iter().zip(&spec.nodes).enumerate() {
        if !(ext.is_finite() && ext > 0.0) {
            return Err(Error::Grid(format!("extent of axis {a} must be positive, got {ext}")));
        }
        if n < 3 {
            return Err(Error::Grid(format!("axis {a} needs at least 3 nodes, got {n}")));
        }
    }

    let mut bc: [Option<BcKind>; 4] = [None; 4];
    for &(face, kind) in &spec.conditions {
        if face.axis() >= dim {
            return Err(Error::Grid(format!("face {face:?} does not exist in {dim}D")));
        }
        if bc[face.index()].replace(kind).is_some() {
            return Err(Error::Grid(format!("face {face:?} specified twice")));
        }
    }
    for &face in Face::all(dim) {
        if bc[face.index()].is_none() {
            return Err(Error::Grid(format!("no condition given for face {face:?}")));
        }
    }
    let kinds: Vec<BcKind> = Face::all(dim).iter().map(|f| bc[f.index()].unwrap()).collect();
    if !kinds.contains(&BcKind::Dirichlet) {
        return Err(Error::Grid("at least one face must be Dirichlet".into()));
    }
    if !kinds.contains(&BcKind::Neumann) {
        return Err(Error::Grid("at least one face must be Neumann".into()));
    }

    // Virtual singleton second axis lets the 1D case reuse every 2D loop.
    let nodes = [spec.nodes[0], if dim == 2 { spec.nodes[1] } else { 1 }];
    let extents = [spec.extents[0], if dim == 2 { spec.extents[1] } else { 1.0 }];
    let h = [
        extents[0] / (nodes[0] - 1) as f64,
        if dim == 2 { extents[1] / (nodes[1] - 1) as f64 } else { 1.0 },
    ];

    let mut grid = Grid {
        dim,
        extents,
        nodes,
        h,
        bc,
        dof_of_node: Vec::new(),
        node_of_dof: Vec::new(),
        weights: Vec::new(),
        neumann: Vec::new(),
    };

    let n_total = nodes[0] * nodes[1];
    grid.dof_of_node = vec![None; n_total];
    for node in 0..n_total {
        let (i, j) = (node % nodes[0], node / nodes[0]);
        if grid.is_dirichlet_node(i, j) {
            continue;
        }
        let dof = grid.node_of_dof.len();
        grid.dof_of_node[node] = Some(dof);
        grid.node_of_dof.push(node);
        grid.weights.push(grid.axis_weight(0, i) * grid.axis_weight(1, j));

        let mut source_coef = 0.0;
        let mut measure = 0.0;
        for &face in Face::all(dim) {
            if grid.bc[face.index()] != Some(BcKind::Neumann) {
                continue;
            }
            let a = face.axis();
            let c = if a == 0 { i } else { j };
            let on_face = if face.is_high() { c == nodes[a] - 1 } else { c == 0 };
            if !on_face {
                continue;
            }
            // Transverse trapezoid weight and surface measure of this node on the face.
            let (tc, ta) = if a == 0 { (j, 1) } else { (i, 0) };
            let tw = grid.axis_weight(ta, tc);
            source_coef += tw / h[a];
            measure += if dim == 2 { h[ta] * tw } else { 1.0 };
        }
        if source_coef > 0.0 {
            grid.neumann.push(NeumannNode { dof, source_coef, measure });
        }
    }

    Ok(grid)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dof_count(&self) -> usize {
        self.node_of_dof.len()
    }

    /// Total lattice nodes, eliminated ones included.
    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        self.nodes[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    /// Volume of one full cell, h_x (* h_y).
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 2 {
            self.h[0] * self.h[1]
        } else {
            self.h[0]
        }
    }

    pub fn condition(&self, face: Face) -> Option<BcKind> {
        self.bc[face.index()]
    }

    /// Relative trapezoid weight per DoF.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of Neumann boundary nodes (= length of any boundary data vector).
    pub fn neumann_count(&self) -> usize {
        self.neumann.len()
    }

    pub(crate) fn neumann_nodes(&self) -> &[NeumannNode] {
        &self.neumann
    }

    pub(crate) fn axis_weight(&self, axis: usize, c: usize) -> f64 {
        if self.nodes[axis] == 1 {
            1.0
        } else if c == 0 || c == self.nodes[axis] - 1 {
            0.5
        } else {
            1.0
        }
    }

    fn is_dirichlet_node(&self, i: usize, j: usize) -> bool {
        let coords = [i, j];
        for &face in Face::all(self.dim) {
            if self.bc[face.index()] != Some(BcKind::Dirichlet) {
                continue;
            }
            let a = face.axis();
            let on = if face.is_high() { coords[a] == self.nodes[a] - 1 } else { coords[a] == 0 };
            if on {
                return true;
            }
        }
        false
    }

    pub(crate) fn dof_at(&self, i: usize, j: usize) -> Option<usize> {
        self.dof_of_node[j * self.nodes[0] + i]
    }

    /// Physical coordinates of a lattice node.
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = (node % self.nodes[0], node / self.nodes[0]);
        [i as f64 * self.h[0], j as f64 * self.h[1]]
    }

    /// Physical coordinates of a DoF.
    pub fn dof_coords(&self, dof: usize) -> [f64; 2] {
        self.node_coords(self.node_of_dof[dof])
    }

    pub(crate) fn node_to_dof(&self) -> &[Option<usize>] {
        &self.dof_of_node
    }

    /// Trapezoidal quadrature of a field over the domain; eliminated Dirichlet
    /// nodes contribute their exact zero.
    pub fn integrate_volume(&self, f: &Field) -> f64 {
        self.integrate_with(|dof| f.values[dof])
    }

    pub(crate) fn integrate_with(&self, g: impl Fn(usize) -> f64) -> f64 {
        let vol = self.cell_volume();
        let mut acc = 0.0;
        for (dof, &w) in self.weights.iter().enumerate() {
            acc += w * g(dof);
        }
        vol * acc
    }

    /// Trapezoidal quadrature of boundary data over the Neumann part of the
    /// boundary. In 1D a boundary point has measure one.
    pub fn integrate_boundary(&self, nu: &BoundaryData) -> f64 {
        debug_assert_eq!(nu.values.len(), self.neumann.len());
        self.neumann.iter().zip(&nu.values).map(|(n, &v)| n.measure * v).sum()
    }

    /// Visits every lattice edge with at least one non-Dirichlet endpoint.
    /// The callback gets the two endpoint DoFs (None = eliminated), the axis
    /// of the edge, and the transverse trapezoid weight shared by both
    /// endpoints.
    pub(crate) fn for_each_edge(
        &self,
        mut f: impl FnMut(Option<usize>, Option<usize>, usize, f64),
    ) {
        let [nx, ny] = self.nodes;
        for j in 0..ny {
            let wy = self.axis_weight(1, j);
            for i in 0..nx {
                if i + 1 < nx {
                    let d1 = self.dof_at(i, j);
                    let d2 = self.dof_at(i + 1, j);
                    if d1.is_some() || d2.is_some() {
                        f(d1, d2, 0, wy);
                    }
                }
                if j + 1 < ny {
                    let d1 = self.dof_at(i, j);
                    let d2 = self.dof_at(i, j + 1);
                    if d1.is_some() || d2.is_some() {
                        f(d1, d2, 1, self.axis_weight(0, i));
                    }
                }
            }
        }
    }

    /// True when every axis has at least two interior nodes, the minimum for
    /// centered second differences to be meaningful on the interior.
    pub fn supports_second_differences(&self) -> bool {
        (0..self.dim).all(|a| self.nodes[a] >= 4)
    }

    /// Visits every DoF that is interior along `axis` (both lattice neighbors
    /// exist), passing the neighbor DoFs (None = Dirichlet zero) and the
    /// node's full trapezoid weight.
    pub(crate) fn for_each_axis_interior(
        &self,
        axis: usize,
        mut f: impl FnMut(usize, Option<usize>, Option<usize>, f64),
    ) {
        let [nx, ny] = self.nodes;
        for j in 0..ny {
            for i in 0..nx {
                let Some(dof) = self.dof_at(i, j) else { continue };
                let c = if axis == 0 { i } else { j };
                if c == 0 || c + 1 >= self.nodes[axis] {
                    continue;
                }
                let (lo, hi) = if axis == 0 {
                    (self.dof_at(i - 1, j), self.dof_at(i + 1, j))
                } else {
                    (self.dof_at(i, j - 1), self.dof_at(i, j + 1))
                };
                f(dof, lo, hi, self.weights[dof]);
            }
        }
    }
}

/// Nodal values on the free (non-Dirichlet) nodes of a grid, lexicographic
/// order, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field { values: vec![0.0; grid.dof_count()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Field {
        assert!(c.is_finite(), "field value must be finite");
        Field { values: vec![c; grid.dof_count()] }
    }

    /// Builds a field from a function of the physical coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Field {
        let values: Vec<f64> = (0..grid.dof_count())
            .map(|dof| {
                let xy = grid.dof_coords(dof);
                let v = f(&xy[..grid.dim()]);
                assert!(v.is_finite(), "field value must be finite");
                v
            })
            .collect();
        Field { values }
    }

    /// Wraps raw values; the length must match the grid and every entry must
    /// be finite.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.dof_count() {
            return Err(Error::Field(format!(
                "expected {} values, got {}",
                grid.dof_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Field(format!("non-finite value at dof {bad}")));
        }
        Ok(Field { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Field {
        Field { values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max_i |self_i - other_i|
    pub fn sup_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// self - other, elementwise.
    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    /// self + other, elementwise.
    pub fn add(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, c: f64) -> Field {
        Field { values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Nonnegative influx values, one per Neumann boundary node, in the grid's
/// lattice order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn zeros(grid: &Grid) -> BoundaryData {
        BoundaryData { values: vec![0.0; grid.neumann_count()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<BoundaryData> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Param(format!("influx must be finite and >= 0, got {c}")));
        }
        Ok(BoundaryData { values: vec![c; grid.neumann_count()] })
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<BoundaryData> {
        if values.len() != grid.neumann_count() {
            return Err(Error::Param(format!(
                "expected {} influx values (one per Neumann node), got {}",
                grid.neumann_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Param("influx values must be finite and >= 0".into()));
        }
        Ok(BoundaryData { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}
