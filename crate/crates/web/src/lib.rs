//! Browser bindings: a running phase-separation simulation, the admissible
//! region of a hand-drawn mask, and the single-step damage response.

use wasm_bindgen::prelude::*;

use chdamage::admissible::{maximal_admissible, RegionMask};
use chdamage::config::{canonical, ScenarioConfig};
use chdamage::damage::step_damage;
use chdamage::grid::{build_grid, DirichletSelector, ScalarField, Side, VectorField};
use chdamage::material::{MaterialModel, Poly, RegularizationParams};
use chdamage::stepper::Simulation;

fn js_err(e: chdamage::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Loaded spinodal decomposition on an `n x n` grid, clamped left and right.
#[wasm_bindgen]
pub struct SpinodalDemo {
    sim: Simulation,
}

#[wasm_bindgen]
impl SpinodalDemo {
    /// `load_rate` is the horizontal stretch rate of the clamped sides.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u64, load_rate: f64) -> Result<SpinodalDemo, JsError> {
        let mut cfg: ScenarioConfig = canonical::spinodal_damage();
        cfg.grid.nx = n;
        cfg.grid.ny = n;
        cfg.grid.lx = n as f64;
        cfg.grid.ly = n as f64;
        cfg.initial.seed = seed;
        cfg.boundary.grad_rate = [[load_rate, 0.0], [0.0, 0.0]];
        cfg.t_end = 1e6;
        Simulation::new(&cfg).map(|sim| SpinodalDemo { sim }).map_err(js_err)
    }

    /// Advance `count` steps.
    pub fn step(&mut self, count: usize) -> Result<(), JsError> {
        for _ in 0..count {
            self.sim.step().map_err(js_err)?;
        }
        Ok(())
    }

    pub fn nodes_per_side(&self) -> usize {
        self.sim.grid().nx + 1
    }

    pub fn time(&self) -> f64 {
        self.sim.state().t
    }

    pub fn energy(&self) -> f64 {
        self.sim.ledger().rows.last().map_or(self.sim.ledger().e0, |r| r.energy)
    }

    /// Energy-inequality slack of the latest step (0 before the first).
    pub fn slack(&self) -> f64 {
        self.sim.ledger().rows.last().map_or(0.0, |r| r.slack)
    }

    pub fn event_count(&self) -> usize {
        self.sim.events().len()
    }

    /// Nodal concentration, row-major from the bottom-left node.
    pub fn concentration(&self) -> Vec<f64> {
        self.sim.state().c.values.clone()
    }

    /// Nodal damage variable.
    pub fn damage(&self) -> Vec<f64> {
        self.sim.state().z.values.clone()
    }

    /// One byte per cell: 1 inside the current region.
    pub fn region(&self) -> Vec<u8> {
        self.sim.state().region.as_slice().iter().map(|&b| u8::from(b)).collect()
    }
}

/// Maximal admissible subset of a cell mask (one byte per cell, row-major
/// from the bottom). `sides` is a bit set: 1 left, 2 right, 4 bottom, 8 top.
#[wasm_bindgen]
pub fn admissible_mask(nx: usize, ny: usize, cells: &[u8], sides: u8) -> Result<Vec<u8>, JsError> {
    let chosen: Vec<Side> = [(1, Side::Left), (2, Side::Right), (4, Side::Bottom), (8, Side::Top)]
        .into_iter()
        .filter(|(bit, _)| sides & bit != 0)
        .map(|(_, s)| s)
        .collect();
    let grid = build_grid(nx, ny, nx as f64, ny as f64, &DirichletSelector::Sides(chosen)).map_err(js_err)?;
    if cells.len() != nx * ny {
        return Err(JsError::new(&format!("expected {} cells, got {}", nx * ny, cells.len())));
    }
    let mask = RegionMask::from_cells(nx, ny, cells.iter().map(|&b| b != 0).collect());
    Ok(maximal_admissible(&grid, &mask).as_slice().iter().map(|&b| u8::from(b)).collect())
}

/// Spatially uniform damage history under a constant elastic energy density
/// `phi`: `z` after each of `steps` steps of length `tau`, starting from 1.
#[wasm_bindgen]
pub fn damage_response(phi: f64, beta: f64, tau: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    let grid = build_grid(2, 2, 1.0, 1.0, &DirichletSelector::left()).map_err(js_err)?;
    let mut model = MaterialModel::homogeneous(1.0, 1.0, 0.0, beta).map_err(js_err)?;
    model.phi3 = Poly::constant(phi);
    let reg = RegularizationParams { epsilon: 0.0, delta: 0.0, tau, p: 4.0, z_tol: 1e-8 };
    reg.validate().map_err(js_err)?;
    let c = ScalarField::constant(&grid, 0.0);
    let u = VectorField::zeros(&grid);
    let mut z = ScalarField::constant(&grid, 1.0);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        z = step_damage(&grid, &model, &z, &c, &u, &reg, None).map_err(js_err)?.z;
        out.push(z.values[0]);
    }
    Ok(out)
}
