//! Damage step: minimize
//!
//! ```text
//! J(z) = \int_F |grad z|^p / p + W^eps(c, e(u), z) + f(z) + (z - z_prev)^2 / (2 tau)
//! ```
//!
//! over nodal values `0 <= z <= z_prev` by spectral projected gradients:
//! Barzilai-Borwein step lengths with a nonmonotone Armijo backtracking
//! search. The gradient is scaled by the lumped mass so step lengths are mesh
//! independent.

use crate::admissible::RegionMask;
use crate::error::{Error, Result};
use crate::grid::{p_flux, strain_at, Grid, ScalarField, VectorField, QP};
use crate::material::{MaterialModel, RegularizationParams};

pub const PG_TOL: f64 = 1e-8;
pub const PG_MAX_ITER: usize = 50_000;

#[derive(Debug, Clone)]
pub struct DamageStep {
    pub z: ScalarField,
    pub iterations: usize,
    /// Max-norm of the mass-scaled projected gradient at exit.
    pub projected_gradient: f64,
    pub objective: f64,
}

/// The damage objective for fixed `(c, u, z_prev)` on a region.
#[derive(Debug, Clone)]
pub struct DamageObjective<'a> {
    grid: &'a Grid,
    model: &'a MaterialModel,
    region: RegionMask,
    z_prev: &'a [f64],
    /// `phi(c, e(u))` per quadrature point.
    phi: Vec<f64>,
    eps: f64,
    tau: f64,
    p: f64,
    /// `\int_F phi_i` per node.
    lumped: Vec<f64>,
}

impl<'a> DamageObjective<'a> {
    pub fn new(
        grid: &'a Grid,
        model: &'a MaterialModel,
        z_prev: &'a ScalarField,
        c: &ScalarField,
        u: &VectorField,
        reg: &RegularizationParams,
        region: Option<&RegionMask>,
    ) -> Result<Self> {
        grid.check_nodal(z_prev.len())?;
        grid.check_nodal(c.len())?;
        grid.check_nodal(u.values.len())?;
        if let Some(v) = z_prev.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("previous damage value {v} outside [0, 1]")));
        }
        let region = region.cloned().unwrap_or_else(|| grid.full_mask());
        let quad = grid.quad();
        let mut phi = vec![0.0; grid.cell_count() * QP];
        for cell in region.cells() {
            let cl = grid.gather(cell, &c.values);
            let (ux, uy) = u.gather(grid, cell);
            for q in 0..QP {
                let e = strain_at(quad, q, &ux, &uy);
                let v = model.phi(quad.value(q, &cl), &e);
                if !v.is_finite() {
                    return Err(Error::OutOfRange(format!("elastic density undefined in region cell {cell}")));
                }
                phi[cell * QP + q] = v;
            }
        }
        let lumped = grid.lumped_mass(&region);
        Ok(Self {
            grid,
            model,
            region,
            z_prev: &z_prev.values,
            phi,
            eps: reg.epsilon,
            tau: reg.tau,
            p: reg.p,
            lumped,
        })
    }

    pub fn region(&self) -> &RegionMask {
        &self.region
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Objective value and its nodal gradient (zero at nodes outside the region).
    pub fn value_and_gradient(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let grid = self.grid;
        let quad = grid.quad();
        let m = self.model;
        let mut grad = vec![0.0; z.len()];
        let mut value = 0.0;
        for cell in self.region.cells() {
            let nodes = grid.cell_nodes(cell);
            let zl = nodes.map(|n| z[n]);
            let zpl = nodes.map(|n| self.z_prev[n]);
            for q in 0..QP {
                let zq = quad.value(q, &zl);
                let dz = zq - quad.value(q, &zpl);
                let gz = quad.grad(q, &zl);
                let n2 = gz[0] * gz[0] + gz[1] * gz[1];
                let phi = self.phi[cell * QP + q];
                value += quad.w
                    * (n2.powf(0.5 * self.p) / self.p
                        + m.stiffness_factor(zq, self.eps) * phi
                        + m.f(zq)
                        + dz * dz / (2.0 * self.tau));
                let flux = p_flux(gz, self.p);
                let local = m.g.deriv(zq) * phi + m.f_prime(zq) + dz / self.tau;
                for a in 0..4 {
                    grad[nodes[a]] += quad.w
                        * (flux[0] * quad.dx[q][a] + flux[1] * quad.dy[q][a] + local * quad.n[q][a]);
                }
            }
        }
        (value, grad)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.value_and_gradient(z).0
    }

    /// Projected box-constrained minimization starting from `z_prev`.
    pub fn minimize(&self) -> Result<DamageStep> {
        let n = self.z_prev.len();
        let free: Vec<bool> = (0..n).map(|i| self.lumped[i] > 0.0 && self.z_prev[i] > 0.0).collect();
        let upper = self.z_prev;
        let project = |i: usize, v: f64| v.clamp(0.0, upper[i]);
        let mut x = self.z_prev.to_vec();
        if !free.iter().any(|&f| f) {
            let objective = self.value(&x);
            return Ok(DamageStep { z: ScalarField { values: x }, iterations: 0, projected_gradient: 0.0, objective });
        }
        let (mut fx, mut gx) = self.value_and_gradient(&x);
        let mut history = std::collections::VecDeque::from([fx]);
        let mut alpha = self.tau;
        let mut iterations = 0;
        loop {
            let mut pg = 0.0f64;
            for i in (0..n).filter(|&i| free[i]) {
                pg = pg.max((project(i, x[i] - gx[i] / self.lumped[i]) - x[i]).abs());
            }
            if pg <= PG_TOL * (1.0 + fx.abs()) {
                return Ok(DamageStep { z: ScalarField { values: x }, iterations, projected_gradient: pg, objective: fx });
            }
            if iterations >= PG_MAX_ITER {
                return Err(Error::NoConvergence(format!(
                    "damage step stopped after {iterations} iterations with projected gradient {pg:.3e}"
                )));
            }
            iterations += 1;

            // spectral projected gradient with a nonmonotone Armijo search along d
            let mut d = vec![0.0; n];
            let mut slope = 0.0;
            for i in (0..n).filter(|&i| free[i]) {
                d[i] = project(i, x[i] - alpha * gx[i] / self.lumped[i]) - x[i];
                slope += gx[i] * d[i];
            }
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut lambda = 1.0;
            let (xn, fxn, gxn) = loop {
                let xn: Vec<f64> = (0..n).map(|i| if free[i] { (x[i] + lambda * d[i]).clamp(0.0, upper[i]) } else { x[i] }).collect();
                let (fxn, gxn) = self.value_and_gradient(&xn);
                if fxn <= reference + 1e-4 * lambda * slope {
                    break (xn, fxn, gxn);
                }
                lambda *= 0.5;
                if lambda < 1e-12 {
                    return Err(Error::NoConvergence(format!(
                        "damage line search failed with projected gradient {pg:.3e}"
                    )));
                }
            };
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in (0..n).filter(|&i| free[i]) {
                let s = xn[i] - x[i];
                ss += self.lumped[i] * s * s;
                sy += s * (gxn[i] - gx[i]);
            }
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1e12 };
            x = xn;
            fx = fxn;
            gx = gxn;
            history.push_back(fx);
            if history.len() > 10 {
                history.pop_front();
            }
        }
    }
}

/// One damage step on `region` (all cells if `None`). Nodes outside the
/// region keep their previous value.
pub fn step_damage(
    grid: &Grid,
    model: &MaterialModel,
    z_prev: &ScalarField,
    c: &ScalarField,
    u: &VectorField,
    reg: &RegularizationParams,
    region: Option<&RegionMask>,
) -> Result<DamageStep> {
    DamageObjective::new(grid, model, z_prev, c, u, reg, region)?.minimize()
}

/// `\int_F (W_z + f') phi_i / \int_F phi_i` per node (zero outside the region).
fn nodal_driving_force(
    grid: &Grid,
    model: &MaterialModel,
    z: &ScalarField,
    c: &ScalarField,
    u: &VectorField,
    region: &RegionMask,
) -> Vec<f64> {
    let quad = grid.quad();
    let mut acc = vec![0.0; grid.node_count()];
    for cell in region.cells() {
        let nodes = grid.cell_nodes(cell);
        let zl = grid.gather(cell, &z.values);
        let cl = grid.gather(cell, &c.values);
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            let zq = quad.value(q, &zl);
            let e = strain_at(quad, q, &ux, &uy);
            let v = model.g.deriv(zq) * model.phi(quad.value(q, &cl), &e) + model.f_prime(zq);
            for a in 0..4 {
                acc[nodes[a]] += quad.w * v * quad.n[q][a];
            }
        }
    }
    let lumped = grid.lumped_mass(region);
    acc.iter().zip(&lumped).map(|(a, m)| if *m > 0.0 { a / m } else { 0.0 }).collect()
}

/// Violation of the damage variational inequality: the largest
/// `\int (|grad z|^(p-2) grad z . grad zeta + (W_z + f' + (z - z_prev)/tau + r) zeta)`
/// over `zeta = -phi_i / \int_F phi_i`, clipped at zero.
///
/// At nodes with `z <= z_tol` the reaction `r = -chi (W_z + f')^+` is taken
/// with the best `chi` in `[0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn vi_residual(
    grid: &Grid,
    model: &MaterialModel,
    z: &ScalarField,
    z_prev: &ScalarField,
    c: &ScalarField,
    u: &VectorField,
    reg: &RegularizationParams,
    region: Option<&RegionMask>,
) -> Result<f64> {
    grid.check_nodal(z.len())?;
    let tol = 1e-12;
    for (i, (&a, &b)) in z.values.iter().zip(&z_prev.values).enumerate() {
        if a < 0.0 || a > b + tol {
            return Err(Error::Inadmissible(format!("damage {a} at node {i} violates 0 <= z <= z_prev = {b}")));
        }
    }
    let obj = DamageObjective::new(grid, model, z_prev, c, u, reg, region)?;
    let (_, grad) = obj.value_and_gradient(&z.values);
    let driving = nodal_driving_force(grid, model, z, c, u, obj.region());
    let lumped = obj.lumped_mass();
    Ok((0..grid.node_count())
        .filter(|&i| lumped[i] > 0.0)
        .map(|i| {
            let g = grad[i] / lumped[i];
            let reaction = if z.values[i] <= reg.z_tol { driving[i].max(0.0) } else { 0.0 };
            (g - reaction).max(0.0)
        })
        .fold(0.0, f64::max))
}

/// Nodal reconstruction of `r = -chi (W_z + f')^+` with `chi = 1` where `z <= z_tol`.
pub fn residual_r(
    grid: &Grid,
    model: &MaterialModel,
    z: &ScalarField,
    c: &ScalarField,
    u: &VectorField,
    reg: &RegularizationParams,
    region: Option<&RegionMask>,
) -> ScalarField {
    let full = grid.full_mask();
    let driving = nodal_driving_force(grid, model, z, c, u, region.unwrap_or(&full));
    ScalarField {
        values: z
            .values
            .iter()
            .zip(&driving)
            .map(|(&zi, &d)| if zi <= reg.z_tol { -d.max(0.0) } else { 0.0 })
            .collect(),
    }
}

/// `tau \int |(z - z_prev) / tau|^2` over `region` (all cells if `None`).
pub fn damage_dissipation_increment(
    grid: &Grid,
    z: &ScalarField,
    z_prev: &ScalarField,
    tau: f64,
    region: Option<&RegionMask>,
) -> f64 {
    let quad = grid.quad();
    let cell_term = |cell: usize| {
        let zl = grid.gather(cell, &z.values);
        let zpl = grid.gather(cell, &z_prev.values);
        (0..QP)
            .map(|q| {
                let d = quad.value(q, &zl) - quad.value(q, &zpl);
                quad.w * d * d
            })
            .sum::<f64>()
    };
    let total: f64 = match region {
        Some(m) => m.cells().map(cell_term).sum(),
        None => (0..grid.cell_count()).map(cell_term).sum(),
    };
    total / tau
}
