//! Cell masks, maximal admissible subsets, and material exclusion.
//!
//! A cell mask stands for a relatively open subset of the domain. Path
//! connectedness is discretized as 4-connectivity of cells, and a component is
//! anchored when it owns at least one Dirichlet boundary edge.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub nx: usize,
    pub ny: usize,
    cells: Vec<bool>,
}

impl RegionMask {
    pub fn full(nx: usize, ny: usize) -> Self {
        Self { nx, ny, cells: vec![true; nx * ny] }
    }

    pub fn empty(nx: usize, ny: usize) -> Self {
        Self { nx, ny, cells: vec![false; nx * ny] }
    }

    pub fn from_cells(nx: usize, ny: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), nx * ny, "mask size must match the grid");
        Self { nx, ny, cells }
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.cells[cell]
    }

    pub fn set(&mut self, cell: usize, value: bool) {
        self.cells[cell] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    /// Indices of the cells in the mask.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter_map(|(k, &b)| b.then_some(k))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.cells.len() == other.cells.len() && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn intersection(&self, other: &RegionMask) -> RegionMask {
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a && b).collect();
        RegionMask { nx: self.nx, ny: self.ny, cells }
    }

    /// Cells in `self` but not in `other`.
    pub fn difference(&self, other: &RegionMask) -> Vec<usize> {
        self.cells().filter(|&c| !other.contains(c)).collect()
    }
}

/// Disjoint-set forest with path halving and union by size.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Cells whose four nodes all carry `z > z_tol`.
pub fn threshold_mask(grid: &Grid, z: &ScalarField, z_tol: f64) -> RegionMask {
    let cells = (0..grid.cell_count()).map(|c| grid.cell_nodes(c).iter().all(|&n| z.values[n] > z_tol)).collect();
    RegionMask::from_cells(grid.nx, grid.ny, cells)
}

/// Union of the 4-connected components of `mask` that own a Dirichlet edge.
pub fn maximal_admissible(grid: &Grid, mask: &RegionMask) -> RegionMask {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut uf = UnionFind::new(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.cell(i, j);
            if !mask.contains(c) {
                continue;
            }
            if i + 1 < nx && mask.contains(c + 1) {
                uf.union(c, c + 1);
            }
            if j + 1 < ny && mask.contains(c + nx) {
                uf.union(c, c + nx);
            }
        }
    }
    let mut anchored = vec![false; nx * ny];
    for c in mask.cells() {
        if grid.cell_touches_dirichlet(c) {
            let r = uf.find(c);
            anchored[r] = true;
        }
    }
    let cells = (0..nx * ny).map(|c| mask.contains(c) && anchored[uf.find(c)]).collect();
    RegionMask::from_cells(nx, ny, cells)
}

/// `A_D({z > z_tol})`.
pub fn admissible_region(grid: &Grid, z: &ScalarField, z_tol: f64) -> RegionMask {
    maximal_admissible(grid, &threshold_mask(grid, z, z_tol))
}

/// A recorded jump `z+ = z- 1_F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionEvent {
    pub step: usize,
    pub time: f64,
    pub removed_cells: Vec<usize>,
    pub zeroed_nodes: Vec<usize>,
    /// Free energy of the pre-jump state on the previous region.
    pub energy_before: f64,
    /// Free energy after the jump, re-equilibrated on the new region.
    pub energy_after: f64,
    /// `energy_before - energy_after`.
    pub jump: f64,
}

/// Outcome of zeroing `z` outside the retained region.
#[derive(Debug, Clone)]
pub struct Exclusion {
    pub z: ScalarField,
    pub removed_cells: Vec<usize>,
    pub zeroed_nodes: Vec<usize>,
}

impl Exclusion {
    /// Whether anything changed, i.e. whether an event has to be recorded.
    pub fn is_event(&self) -> bool {
        !self.removed_cells.is_empty() || !self.zeroed_nodes.is_empty()
    }

    /// Attach the ledger's energies; the jump is `before - after`.
    pub fn into_event(self, step: usize, time: f64, energy_before: f64, energy_after: f64) -> ExclusionEvent {
        ExclusionEvent {
            step,
            time,
            removed_cells: self.removed_cells,
            zeroed_nodes: self.zeroed_nodes,
            energy_before,
            energy_after,
            jump: energy_before - energy_after,
        }
    }
}

/// Apply `z+ = z- 1_F` nodally: nodes of retained cells keep their value, every
/// other node is set to zero. `previous` is the region in force before the
/// jump; cells it loses are reported even if no nodal value changes.
pub fn apply_exclusion(grid: &Grid, z: &ScalarField, retained: &RegionMask, previous: &RegionMask) -> Exclusion {
    let keep = grid.region_nodes(retained);
    let mut out = z.clone();
    let mut zeroed_nodes = Vec::new();
    for (n, v) in out.values.iter_mut().enumerate() {
        if !keep[n] && *v != 0.0 {
            *v = 0.0;
            zeroed_nodes.push(n);
        }
    }
    Exclusion { z: out, removed_cells: previous.difference(retained), zeroed_nodes }
}

/// True iff every mask is contained in all earlier ones.
pub fn check_shrinking(history: &[RegionMask]) -> bool {
    // containment is transitive, so consecutive pairs suffice
    history.windows(2).all(|w| w[1].is_subset_of(&w[0]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fineness {
    pub ok: bool,
    /// Area of `F \ A_D({z > z_tol})`.
    pub measure: f64,
}

pub fn check_fineness(grid: &Grid, region: &RegionMask, z: &ScalarField, z_tol: f64, eta: f64) -> Fineness {
    let exact = admissible_region(grid, z, z_tol);
    let contained = exact.is_subset_of(region);
    let measure = region.difference(&exact).len() as f64 * grid.cell_area();
    Fineness { ok: contained && measure < eta, measure }
}
