//! Uniform quadrilateral mesh with Q1 fields and 2x2 Gauss quadrature.
//!
//! Nodes are numbered row-major with `x` fastest: node `(i, j)` has index
//! `j * (nx + 1) + i`; cell `(i, j)` has index `j * nx + i`. Local cell nodes
//! run counter-clockwise from the lower-left corner.

use serde::{Deserialize, Serialize};

use crate::admissible::RegionMask;
use crate::error::{Error, Result};
use crate::tensor::Sym2;

/// Quadrature points per cell.
pub const QP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A boundary edge: `index` counts cells along the side (bottom-to-top for
/// left/right, left-to-right for bottom/top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub side: Side,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirichletSelector {
    Sides(Vec<Side>),
    Edges(Vec<BoundaryEdge>),
}

impl DirichletSelector {
    pub fn left() -> Self {
        Self::Sides(vec![Side::Left])
    }
}

/// Shape functions and gradients at the four Gauss points of a cell.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// `n[q][a]`: value of local shape function `a` at point `q`.
    pub n: [[f64; 4]; QP],
    pub dx: [[f64; 4]; QP],
    pub dy: [[f64; 4]; QP],
    /// Reference coordinates in `[0,1]^2` of each point.
    pub xi: [[f64; 2]; QP],
    /// Weight of each point (cell area / 4).
    pub w: f64,
}

impl QuadRule {
    fn new(hx: f64, hy: f64) -> Self {
        let g = 0.5 / 3f64.sqrt();
        let pts = [0.5 - g, 0.5 + g];
        let mut n = [[0.0; 4]; QP];
        let mut dx = [[0.0; 4]; QP];
        let mut dy = [[0.0; 4]; QP];
        let mut xi = [[0.0; 2]; QP];
        for (q, (s, t)) in [(0, 0), (1, 0), (1, 1), (0, 1)]
            .iter()
            .map(|&(a, b)| (pts[a], pts[b]))
            .enumerate()
        {
            xi[q] = [s, t];
            n[q] = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
            dx[q] = [-(1.0 - t) / hx, (1.0 - t) / hx, t / hx, -t / hx];
            dy[q] = [-(1.0 - s) / hy, -s / hy, s / hy, (1.0 - s) / hy];
        }
        Self { n, dx, dy, xi, w: 0.25 * hx * hy }
    }

    #[inline]
    pub fn value(&self, q: usize, v: &[f64; 4]) -> f64 {
        let n = &self.n[q];
        n[0] * v[0] + n[1] * v[1] + n[2] * v[2] + n[3] * v[3]
    }

    #[inline]
    pub fn grad(&self, q: usize, v: &[f64; 4]) -> [f64; 2] {
        let (dx, dy) = (&self.dx[q], &self.dy[q]);
        [
            dx[0] * v[0] + dx[1] * v[1] + dx[2] * v[2] + dx[3] * v[3],
            dy[0] * v[0] + dy[1] * v[1] + dy[2] * v[2] + dy[3] * v[3],
        ]
    }
}

/// Uniform rectangular grid on `[0, lx] x [0, ly]` with a Dirichlet part `D`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    dirichlet_left: Vec<bool>,
    dirichlet_right: Vec<bool>,
    dirichlet_bottom: Vec<bool>,
    dirichlet_top: Vec<bool>,
    quad: QuadRule,
}

pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64, selector: &DirichletSelector) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly, selector)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, selector: &DirichletSelector) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2x2 cells, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("side lengths must be positive, got {lx}x{ly}")));
        }
        let mut left = vec![false; ny];
        let mut right = vec![false; ny];
        let mut bottom = vec![false; nx];
        let mut top = vec![false; nx];
        match selector {
            DirichletSelector::Sides(sides) => {
                for side in sides {
                    let flags = match side {
                        Side::Left => &mut left,
                        Side::Right => &mut right,
                        Side::Bottom => &mut bottom,
                        Side::Top => &mut top,
                    };
                    flags.iter_mut().for_each(|f| *f = true);
                }
            }
            DirichletSelector::Edges(edges) => {
                for e in edges {
                    let flags = match e.side {
                        Side::Left => &mut left,
                        Side::Right => &mut right,
                        Side::Bottom => &mut bottom,
                        Side::Top => &mut top,
                    };
                    let len = flags.len();
                    *flags.get_mut(e.index).ok_or_else(|| {
                        Error::InvalidGrid(format!("edge index {} out of range on {:?} side ({len} edges)", e.index, e.side))
                    })? = true;
                }
            }
        }
        let count = [&left, &right, &bottom, &top].iter().map(|v| v.iter().filter(|&&f| f).count()).sum::<usize>();
        if count == 0 {
            return Err(Error::InvalidGrid("Dirichlet part is empty".into()));
        }
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx,
            hy,
            dirichlet_left: left,
            dirichlet_right: right,
            dirichlet_bottom: bottom,
            dirichlet_top: top,
            quad: QuadRule::new(hx, hy),
        })
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn quad(&self) -> &QuadRule {
        &self.quad
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    #[inline]
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    #[inline]
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        let n0 = self.node(i, j);
        let up = self.nx + 1;
        [n0, n0 + 1, n0 + up + 1, n0 + up]
    }

    pub fn node_xy(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(node);
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    /// Physical coordinates of quadrature point `q` in `cell`.
    pub fn qp_xy(&self, cell: usize, q: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(cell);
        let xi = self.quad.xi[q];
        [(i as f64 + xi[0]) * self.hx, (j as f64 + xi[1]) * self.hy]
    }

    /// Cells sharing `node` (up to four).
    pub fn node_cells(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.node_ij(node);
        let candidates = [
            (i.checked_sub(1), j.checked_sub(1)),
            (Some(i), j.checked_sub(1)),
            (i.checked_sub(1), Some(j)),
            (Some(i), Some(j)),
        ];
        candidates.into_iter().filter_map(move |(ci, cj)| match (ci, cj) {
            (Some(ci), Some(cj)) if ci < self.nx && cj < self.ny => Some(self.cell(ci, cj)),
            _ => None,
        })
    }

    /// Dirichlet edges of `cell`, as pairs of node indices.
    pub fn cell_dirichlet_edges(&self, cell: usize) -> impl Iterator<Item = [usize; 2]> {
        let (i, j) = self.cell_ij(cell);
        let [n0, n1, n2, n3] = self.cell_nodes(cell);
        let mut out: Vec<[usize; 2]> = Vec::new();
        if i == 0 && self.dirichlet_left[j] {
            out.push([n0, n3]);
        }
        if i + 1 == self.nx && self.dirichlet_right[j] {
            out.push([n1, n2]);
        }
        if j == 0 && self.dirichlet_bottom[i] {
            out.push([n0, n1]);
        }
        if j + 1 == self.ny && self.dirichlet_top[i] {
            out.push([n3, n2]);
        }
        out.into_iter()
    }

    pub fn cell_touches_dirichlet(&self, cell: usize) -> bool {
        self.cell_dirichlet_edges(cell).next().is_some()
    }

    pub fn dirichlet_edge_count(&self) -> usize {
        [&self.dirichlet_left, &self.dirichlet_right, &self.dirichlet_bottom, &self.dirichlet_top]
            .iter()
            .map(|v| v.iter().filter(|&&f| f).count())
            .sum()
    }

    /// Nodes carrying Dirichlet data for a problem posed on `region`.
    pub fn dirichlet_nodes(&self, region: &RegionMask) -> Vec<bool> {
        let mut flags = vec![false; self.node_count()];
        for cell in region.cells() {
            for [a, b] in self.cell_dirichlet_edges(cell) {
                flags[a] = true;
                flags[b] = true;
            }
        }
        flags
    }

    /// Nodes belonging to at least one cell of `region`.
    pub fn region_nodes(&self, region: &RegionMask) -> Vec<bool> {
        let mut flags = vec![false; self.node_count()];
        for cell in region.cells() {
            for n in self.cell_nodes(cell) {
                flags[n] = true;
            }
        }
        flags
    }

    /// Nodes all of whose adjacent cells lie in `region`.
    pub fn interior_nodes(&self, region: &RegionMask) -> Vec<bool> {
        (0..self.node_count())
            .map(|n| self.node_cells(n).all(|c| region.contains(c)))
            .collect()
    }

    /// `\int_region phi_a dx` for every node.
    pub fn lumped_mass(&self, region: &RegionMask) -> Vec<f64> {
        let mut m = vec![0.0; self.node_count()];
        let quarter = 0.25 * self.cell_area();
        for cell in region.cells() {
            for n in self.cell_nodes(cell) {
                m[n] += quarter;
            }
        }
        m
    }

    #[inline]
    pub fn gather(&self, cell: usize, values: &[f64]) -> [f64; 4] {
        let n = self.cell_nodes(cell);
        [values[n[0]], values[n[1]], values[n[2]], values[n[3]]]
    }

    pub fn full_mask(&self) -> RegionMask {
        RegionMask::full(self.nx, self.ny)
    }

    pub(crate) fn check_nodal(&self, len: usize) -> Result<()> {
        if len != self.node_count() {
            return Err(Error::SizeMismatch { expected: self.node_count(), got: len });
        }
        Ok(())
    }
}

/// Nodal scalar field (`c`, `z`, `mu`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_nodal(values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfRange(format!("non-finite value at node {k}")));
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &Grid, v: f64) -> Self {
        Self { values: vec![v; grid.node_count()] }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self {
            values: (0..grid.node_count())
                .map(|n| {
                    let [x, y] = grid.node_xy(n);
                    f(x, y)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Nodal displacement-like field. Nodes outside a solved region hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![[0.0; 2]; grid.node_count()] }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> [f64; 2]) -> Self {
        Self {
            values: (0..grid.node_count())
                .map(|n| {
                    let [x, y] = grid.node_xy(n);
                    f(x, y)
                })
                .collect(),
        }
    }

    #[inline]
    pub fn gather(&self, grid: &Grid, cell: usize) -> ([f64; 4], [f64; 4]) {
        let n = grid.cell_nodes(cell);
        let v = &self.values;
        (
            [v[n[0]][0], v[n[1]][0], v[n[2]][0], v[n[3]][0]],
            [v[n[0]][1], v[n[1]][1], v[n[2]][1], v[n[3]][1]],
        )
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }
}

/// Per-quadrature-point symmetric tensor field (`4` entries per cell).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub values: Vec<Sym2>,
}

impl SymTensorField {
    #[inline]
    pub fn at(&self, cell: usize, q: usize) -> Sym2 {
        self.values[cell * QP + q]
    }
}

/// Strain of the Q1 displacement at quadrature point `q`, given local nodal components.
#[inline]
pub fn strain_at(quad: &QuadRule, q: usize, ux: &[f64; 4], uy: &[f64; 4]) -> Sym2 {
    let gx = quad.grad(q, ux);
    let gy = quad.grad(q, uy);
    Sym2::new(gx[0], gy[1], 0.5 * (gx[1] + gy[0]))
}

/// Symmetrized gradient of `u` at every quadrature point.
pub fn sym_gradient(grid: &Grid, u: &VectorField) -> SymTensorField {
    let quad = grid.quad();
    let mut values = Vec::with_capacity(grid.cell_count() * QP);
    for cell in 0..grid.cell_count() {
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            values.push(strain_at(quad, q, &ux, &uy));
        }
    }
    SymTensorField { values }
}

/// 2x2 Gauss sum of a per-quadrature-point density, over `region` or all cells.
pub fn integrate_cellwise(grid: &Grid, density: &[f64], region: Option<&RegionMask>) -> f64 {
    assert_eq!(density.len(), grid.cell_count() * QP, "density must have one value per quadrature point");
    let w = grid.quad().w;
    let cell_sum = |cell: usize| density[cell * QP..(cell + 1) * QP].iter().sum::<f64>() * w;
    match region {
        Some(mask) => mask.cells().map(cell_sum).sum(),
        None => (0..grid.cell_count()).map(cell_sum).sum(),
    }
}

/// `|x|^(p-2) x`.
#[inline]
pub fn p_flux(g: [f64; 2], p: f64) -> [f64; 2] {
    let n2 = g[0] * g[0] + g[1] * g[1];
    let s = if p == 2.0 { 1.0 } else if n2 == 0.0 { 0.0 } else { n2.powf(0.5 * (p - 2.0)) };
    [s * g[0], s * g[1]]
}

/// `\int |grad z|^(p-2) grad z . grad zeta dx` over `region` (all cells if `None`).
pub fn p_laplacian_residual(grid: &Grid, z: &ScalarField, p: f64, zeta: &ScalarField, region: Option<&RegionMask>) -> f64 {
    let quad = grid.quad();
    let cell_term = |cell: usize| {
        let zl = grid.gather(cell, &z.values);
        let tl = grid.gather(cell, &zeta.values);
        (0..QP)
            .map(|q| {
                let flux = p_flux(quad.grad(q, &zl), p);
                let gt = quad.grad(q, &tl);
                flux[0] * gt[0] + flux[1] * gt[1]
            })
            .sum::<f64>()
            * quad.w
    };
    match region {
        Some(mask) => mask.cells().map(cell_term).sum(),
        None => (0..grid.cell_count()).map(cell_term).sum(),
    }
}
