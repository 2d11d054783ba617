//! Semi-implicit Cahn-Hilliard step in mixed `(c, mu)` form.
//!
//! On the region `F` the step solves, for every admissible nodal test function,
//!
//! ```text
//! M (c - c_prev) + tau K_m mu = 0                                   (nodes of F)
//! M mu - K c - N(c) - (delta / tau) M (c - c_prev) = 0              (interior nodes of F)
//! N_i(c) = \int_F (Psi'(c) + s (c - c_prev) + W_c(c, e, z_en)) phi_i
//! ```
//!
//! with consistent mass `M`, stiffness `K` and mobility-weighted stiffness
//! `K_m` assembled over the cells of `F`. The term `s (c - c_prev)` is the
//! explicit concave part of the splitting `Psi = (Psi + s c^2/2) - s c^2/2`.
//! Concentrations at nodes touching cells outside `F` are held fixed, so the
//! total mass on the whole grid is conserved exactly.

use crate::admissible::{RegionMask, UnionFind};
use crate::error::{Error, Result};
use crate::grid::{strain_at, Grid, ScalarField, VectorField, QP};
use crate::linalg::{pcg, BandedMatrix};
use crate::material::{MaterialModel, RegularizationParams};
use crate::tensor::Sym2;

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone)]
pub struct ChStep {
    pub c: ScalarField,
    pub mu: ScalarField,
    pub newton_iterations: usize,
    /// Max-norm of the discrete residual at the accepted iterate.
    pub residual: f64,
}

/// Element mass and stiffness matrices of the reference cell.
fn element_matrices(grid: &Grid) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let quad = grid.quad();
    let mut m = [[0.0; 4]; 4];
    let mut k = [[0.0; 4]; 4];
    for q in 0..QP {
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += quad.w * quad.n[q][a] * quad.n[q][b];
                k[a][b] += quad.w * (quad.dx[q][a] * quad.dx[q][b] + quad.dy[q][a] * quad.dy[q][b]);
            }
        }
    }
    (m, k)
}

/// Pre-evaluated coefficients of one step.
struct ChSystem<'a> {
    grid: &'a Grid,
    model: &'a MaterialModel,
    region: RegionMask,
    in_region: Vec<bool>,
    interior: Vec<bool>,
    /// Nodes whose mu row is replaced by `mu = 0` (one per component without interior nodes).
    pinned: Vec<bool>,
    c_prev: &'a [f64],
    mass: [[f64; 4]; 4],
    stiff: [[f64; 4]; 4],
    /// Mobility-weighted element stiffness per region cell (indexed by cell).
    stiff_m: Vec<[[f64; 4]; 4]>,
    /// Stiffness factor and strain per quadrature point.
    k: Vec<f64>,
    strain: Vec<Sym2>,
    tau: f64,
    delta: f64,
    s: f64,
}

impl<'a> ChSystem<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        grid: &'a Grid,
        model: &'a MaterialModel,
        c_prev: &'a ScalarField,
        z_mob: &ScalarField,
        u: &VectorField,
        z_en: &ScalarField,
        reg: &RegularizationParams,
        region: Option<&RegionMask>,
    ) -> Result<Self> {
        grid.check_nodal(c_prev.len())?;
        grid.check_nodal(z_mob.len())?;
        grid.check_nodal(z_en.len())?;
        grid.check_nodal(u.values.len())?;
        if !(reg.tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        let region = region.cloned().unwrap_or_else(|| grid.full_mask());
        let quad = grid.quad();
        let (mass, stiff) = element_matrices(grid);
        let nc = grid.cell_count();
        let mut stiff_m = vec![[[0.0; 4]; 4]; nc];
        let mut k = vec![0.0; nc * QP];
        let mut strain = vec![Sym2::ZERO; nc * QP];
        for cell in region.cells() {
            let zm = grid.gather(cell, &z_mob.values);
            let ze = grid.gather(cell, &z_en.values);
            let (ux, uy) = u.gather(grid, cell);
            let km = &mut stiff_m[cell];
            for q in 0..QP {
                let mq = model.mobility(quad.value(q, &zm), reg.epsilon);
                for a in 0..4 {
                    for b in 0..4 {
                        km[a][b] += quad.w * mq * (quad.dx[q][a] * quad.dx[q][b] + quad.dy[q][a] * quad.dy[q][b]);
                    }
                }
                k[cell * QP + q] = model.stiffness_factor(quad.value(q, &ze), reg.epsilon);
                let e = strain_at(quad, q, &ux, &uy);
                if !e.is_finite() {
                    return Err(Error::OutOfRange(format!("displacement undefined in region cell {cell}")));
                }
                strain[cell * QP + q] = e;
            }
        }
        let in_region = grid.region_nodes(&region);
        let interior: Vec<bool> =
            grid.interior_nodes(&region).iter().zip(&in_region).map(|(&i, &r)| i && r).collect();

        // components of the node graph of F; those without interior nodes get mu pinned
        let nn = grid.node_count();
        let mut uf = UnionFind::new(nn);
        for cell in region.cells() {
            let nodes = grid.cell_nodes(cell);
            for &n in &nodes[1..] {
                uf.union(nodes[0], n);
            }
        }
        let mut has_interior = vec![false; nn];
        for n in (0..nn).filter(|&n| interior[n]) {
            let r = uf.find(n);
            has_interior[r] = true;
        }
        let mut pinned = vec![false; nn];
        let mut seen = vec![false; nn];
        for n in (0..nn).filter(|&n| in_region[n]) {
            let r = uf.find(n);
            if !has_interior[r] && !seen[r] {
                seen[r] = true;
                pinned[n] = true;
            }
        }

        Ok(Self {
            grid,
            model,
            region,
            in_region,
            interior,
            pinned,
            c_prev: &c_prev.values,
            mass,
            stiff,
            stiff_m,
            k,
            strain,
            tau: reg.tau,
            delta: reg.delta,
            s: model.psi_stabilizer,
        })
    }

    /// Residual (interleaved `[R_c, R_mu]` per node) and optionally the Jacobian.
    fn evaluate(&self, x: &[f64], mut jac: Option<&mut BandedMatrix>) -> Vec<f64> {
        let grid = self.grid;
        let quad = grid.quad();
        let nn = grid.node_count();
        let mut r = vec![0.0; 2 * nn];
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }
        let visc = self.delta / self.tau;
        for cell in self.region.cells() {
            let nodes = grid.cell_nodes(cell);
            let c = nodes.map(|n| x[2 * n]);
            let mu = nodes.map(|n| x[2 * n + 1]);
            let cp = nodes.map(|n| self.c_prev[n]);
            let dc = [c[0] - cp[0], c[1] - cp[1], c[2] - cp[2], c[3] - cp[3]];
            let km = &self.stiff_m[cell];

            // nonlinear local terms
            let mut nl = [0.0; 4];
            let mut nl_jac = [[0.0; 4]; 4];
            for q in 0..QP {
                let cq = quad.value(q, &c);
                let cpq = quad.value(q, &cp);
                let e = &self.strain[cell * QP + q];
                let kq = self.k[cell * QP + q];
                let val = self.model.psi_prime(cq) + self.s * (cq - cpq) + kq * self.model.phi_c(cq, e);
                let der = self.model.psi_second(cq) + self.s + kq * self.model.phi_cc(cq, e);
                let nq = &quad.n[q];
                for a in 0..4 {
                    nl[a] += quad.w * val * nq[a];
                    for b in 0..4 {
                        nl_jac[a][b] += quad.w * der * nq[a] * nq[b];
                    }
                }
            }

            for a in 0..4 {
                let row_c = 2 * nodes[a];
                let row_mu = row_c + 1;
                let mut mu_eq = -nl[a];
                let mut diff_eq = 0.0;
                for b in 0..4 {
                    mu_eq += self.mass[a][b] * (mu[b] - visc * dc[b]) - self.stiff[a][b] * c[b];
                    diff_eq += self.mass[a][b] * dc[b] + self.tau * km[a][b] * mu[b];
                }
                r[row_c] += mu_eq;
                r[row_mu] += diff_eq;
                if let Some(j) = jac.as_deref_mut() {
                    for b in 0..4 {
                        let col_c = 2 * nodes[b];
                        let col_mu = col_c + 1;
                        j.add(row_c, col_c, -self.stiff[a][b] - nl_jac[a][b] - visc * self.mass[a][b]);
                        j.add(row_c, col_mu, self.mass[a][b]);
                        j.add(row_mu, col_c, self.mass[a][b]);
                        j.add(row_mu, col_mu, self.tau * km[a][b]);
                    }
                }
            }
        }
        for n in 0..nn {
            if !self.interior[n] {
                r[2 * n] = x[2 * n] - self.c_prev[n];
                if let Some(j) = jac.as_deref_mut() {
                    j.set_identity_row(2 * n);
                }
            }
            if !self.in_region[n] || self.pinned[n] {
                r[2 * n + 1] = x[2 * n + 1];
                if let Some(j) = jac.as_deref_mut() {
                    j.set_identity_row(2 * n + 1);
                }
            }
        }
        r
    }

    fn solve(&self, mu_guess: Option<&ScalarField>) -> Result<ChStep> {
        let nn = self.grid.node_count();
        let mut x = vec![0.0; 2 * nn];
        for n in 0..nn {
            x[2 * n] = self.c_prev[n];
            if self.in_region[n] {
                x[2 * n + 1] = mu_guess.map_or(0.0, |m| m.values[n]);
            }
        }
        let band = 2 * (self.grid.nx + 2) + 1;
        let mut jac = BandedMatrix::zeros(2 * nn, band, band);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut r = self.evaluate(&x, None);
        let mut rnorm = inf(&r);
        let mut iterations = 0;
        while rnorm > NEWTON_TOL {
            if iterations >= NEWTON_MAX_ITER {
                return Err(Error::NoConvergence(format!(
                    "Cahn-Hilliard Newton stopped after {iterations} iterations at residual {rnorm:.3e}; reduce tau"
                )));
            }
            self.evaluate(&x, Some(&mut jac));
            let lu = std::mem::replace(&mut jac, BandedMatrix::zeros(0, 0, 0)).factor()?;
            let mut dx: Vec<f64> = r.iter().map(|v| -v).collect();
            lu.solve(&mut dx);
            jac = BandedMatrix::zeros(2 * nn, band, band);

            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
                let rt = self.evaluate(&trial, None);
                let tn = inf(&rt);
                if tn < rnorm || tn <= NEWTON_TOL {
                    x = trial;
                    r = rt;
                    rnorm = tn;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-6 {
                    // accept the full step when backtracking stalls near round-off
                    if rnorm < 1e3 * NEWTON_TOL {
                        x = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
                        r = self.evaluate(&x, None);
                        rnorm = inf(&r);
                        break;
                    }
                    return Err(Error::NoConvergence(format!(
                        "Cahn-Hilliard line search failed at residual {rnorm:.3e}; reduce tau"
                    )));
                }
            }
            iterations += 1;
        }
        let c = ScalarField { values: (0..nn).map(|n| x[2 * n]).collect() };
        let mu = ScalarField { values: (0..nn).map(|n| x[2 * n + 1]).collect() };
        Ok(ChStep { c, mu, newton_iterations: iterations, residual: rnorm })
    }
}

/// One Cahn-Hilliard step restricted to `region` (the full grid if `None`).
/// `z_mob` enters the mobility, `z_en` and `u` the elastic coupling `W_c`.
#[allow(clippy::too_many_arguments)]
pub fn step_ch(
    grid: &Grid,
    model: &MaterialModel,
    c_prev: &ScalarField,
    z_mob: &ScalarField,
    u: &VectorField,
    z_en: &ScalarField,
    reg: &RegularizationParams,
    region: Option<&RegionMask>,
) -> Result<ChStep> {
    step_ch_from(grid, model, c_prev, z_mob, u, z_en, reg, region, None)
}

/// As [`step_ch`], starting Newton from the given chemical potential.
#[allow(clippy::too_many_arguments)]
pub fn step_ch_from(
    grid: &Grid,
    model: &MaterialModel,
    c_prev: &ScalarField,
    z_mob: &ScalarField,
    u: &VectorField,
    z_en: &ScalarField,
    reg: &RegularizationParams,
    region: Option<&RegionMask>,
    mu_guess: Option<&ScalarField>,
) -> Result<ChStep> {
    ChSystem::new(grid, model, c_prev, z_mob, u, z_en, reg, region)?.solve(mu_guess)
}

/// Extra terms of the time-discrete chemical potential: the explicit
/// splitting contribution `s (c - c_prev)` and the viscosity `delta (c - c_prev) / tau`.
#[derive(Debug, Clone, Copy)]
pub struct SchemeTerms<'a> {
    pub c_prev: &'a ScalarField,
    pub stabilizer: f64,
    pub delta: f64,
    pub tau: f64,
}

/// Defect of `\int_F mu zeta = \int_F (grad c . grad zeta + Psi'(c) zeta + W_c zeta)`
/// over nodal test functions supported in `F`, each normalized by `\int_F phi_i`.
#[allow(clippy::too_many_arguments)]
pub fn chemical_potential_residual(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    mu: &ScalarField,
    u: &VectorField,
    z: &ScalarField,
    eps: f64,
    region: &RegionMask,
    scheme: Option<&SchemeTerms<'_>>,
) -> f64 {
    let quad = grid.quad();
    let nn = grid.node_count();
    let mut r = vec![0.0; nn];
    let mut weight = vec![0.0; nn];
    for cell in region.cells() {
        let nodes = grid.cell_nodes(cell);
        let cl = grid.gather(cell, &c.values);
        let ml = grid.gather(cell, &mu.values);
        let zl = grid.gather(cell, &z.values);
        let cp = scheme.map(|s| grid.gather(cell, &s.c_prev.values));
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            let cq = quad.value(q, &cl);
            let e = strain_at(quad, q, &ux, &uy);
            let gc = quad.grad(q, &cl);
            let mut val = model.psi_prime(cq) + model.stiffness_factor(quad.value(q, &zl), eps) * model.phi_c(cq, &e)
                - quad.value(q, &ml);
            if let (Some(s), Some(cp)) = (scheme, cp.as_ref()) {
                let d = cq - quad.value(q, cp);
                val += s.stabilizer * d + s.delta / s.tau * d;
            }
            for a in 0..4 {
                let n = nodes[a];
                r[n] += quad.w * (val * quad.n[q][a] + gc[0] * quad.dx[q][a] + gc[1] * quad.dy[q][a]);
                weight[n] += quad.w * quad.n[q][a];
            }
        }
    }
    let interior = grid.interior_nodes(region);
    let in_region = grid.region_nodes(region);
    (0..nn).filter(|&n| interior[n] && in_region[n]).map(|n| r[n].abs() / weight[n]).fold(0.0, f64::max)
}

/// `tau \int m^eps(z_mob) |grad mu|^2` over `region` (all cells if `None`).
pub fn dissipation_increment(
    grid: &Grid,
    model: &MaterialModel,
    mu: &ScalarField,
    z_mob: &ScalarField,
    eps: f64,
    tau: f64,
    region: Option<&RegionMask>,
) -> f64 {
    tau * weighted_gradient_norm2(grid, mu, |zq| model.mobility(zq, eps), z_mob, region)
}

/// `\int w(z) |grad v|^2` over `region`.
pub(crate) fn weighted_gradient_norm2(
    grid: &Grid,
    v: &ScalarField,
    weight: impl Fn(f64) -> f64,
    z: &ScalarField,
    region: Option<&RegionMask>,
) -> f64 {
    let quad = grid.quad();
    let cell_term = |cell: usize| {
        let vl = grid.gather(cell, &v.values);
        let zl = grid.gather(cell, &z.values);
        (0..QP)
            .map(|q| {
                let g = quad.grad(q, &vl);
                quad.w * weight(quad.value(q, &zl)) * (g[0] * g[0] + g[1] * g[1])
            })
            .sum::<f64>()
    };
    match region {
        Some(m) => m.cells().map(cell_term).sum(),
        None => (0..grid.cell_count()).map(cell_term).sum(),
    }
}

/// Chemical potential of a given state: the `L^2(F)` projection of
/// `-Delta c + Psi'(c) + W_c(c, e(u), z)` onto the nodes of `F`; zero elsewhere.
#[allow(clippy::too_many_arguments)]
pub fn chemical_potential(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    u: &VectorField,
    z: &ScalarField,
    eps: f64,
    region: &RegionMask,
) -> Result<ScalarField> {
    let quad = grid.quad();
    let nn = grid.node_count();
    let (mass, _) = element_matrices(grid);
    let mut rhs = vec![0.0; nn];
    for cell in region.cells() {
        let nodes = grid.cell_nodes(cell);
        let cl = grid.gather(cell, &c.values);
        let zl = grid.gather(cell, &z.values);
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            let cq = quad.value(q, &cl);
            let e = strain_at(quad, q, &ux, &uy);
            let gc = quad.grad(q, &cl);
            let val = model.psi_prime(cq) + model.stiffness_factor(quad.value(q, &zl), eps) * model.phi_c(cq, &e);
            for a in 0..4 {
                rhs[nodes[a]] += quad.w * (val * quad.n[q][a] + gc[0] * quad.dx[q][a] + gc[1] * quad.dy[q][a]);
            }
        }
    }
    let in_region = grid.region_nodes(region);
    let apply = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for cell in region.cells() {
            let nodes = grid.cell_nodes(cell);
            for a in 0..4 {
                out[nodes[a]] += (0..4).map(|b| mass[a][b] * v[nodes[b]]).sum::<f64>();
            }
        }
        for n in 0..nn {
            if !in_region[n] {
                out[n] = v[n];
            }
        }
    };
    let mut diag = vec![0.0; nn];
    for cell in region.cells() {
        for (a, n) in grid.cell_nodes(cell).into_iter().enumerate() {
            diag[n] += mass[a][a];
        }
    }
    for n in (0..nn).filter(|&n| !in_region[n]) {
        diag[n] = 1.0;
    }
    let mut mu = vec![0.0; nn];
    pcg(apply, &diag, &rhs, &mut mu, 1e-13, 10 * nn + 10)?;
    Ok(ScalarField { values: mu })
}
