//! Quasi-static equilibrium: minimize `\int_F W^eps(c, e(u), z) dx` over Q1
//! displacements with `u = b` on the Dirichlet nodes of `F`.
//!
//! The problem is always posed on a region mask `F` (the full grid when no
//! mask is given). Nodes outside `F` carry no unknowns and are stored as NaN.

use crate::admissible::{maximal_admissible, RegionMask};
use crate::error::{Error, Result};
use crate::grid::{strain_at, Grid, ScalarField, VectorField, QP};
use crate::linalg::{pcg, CgStats};
use crate::material::MaterialModel;
use crate::tensor::{Sym2, SymMap};

pub const CG_REL_TOL: f64 = 1e-10;

/// Sentinel stored at nodes where the displacement is undefined.
pub const UNDEFINED: f64 = f64::NAN;

/// Equilibrium problem for fixed `(c, z)` on a region.
#[derive(Debug, Clone)]
pub struct ElasticProblem<'a> {
    grid: &'a Grid,
    tangent: SymMap,
    /// `g(z) + eps` per quadrature point.
    k: Vec<f64>,
    /// `phi2(c)` per quadrature point.
    prestress: Vec<Sym2>,
    region: RegionMask,
    in_region: Vec<bool>,
    dirichlet: Vec<bool>,
}

impl<'a> ElasticProblem<'a> {
    pub fn new(
        grid: &'a Grid,
        model: &MaterialModel,
        c: &ScalarField,
        z: &ScalarField,
        eps: f64,
        region: Option<&RegionMask>,
    ) -> Result<Self> {
        grid.check_nodal(c.len())?;
        grid.check_nodal(z.len())?;
        let region = match region {
            Some(r) => {
                if maximal_admissible(grid, r) != *r {
                    return Err(Error::Inadmissible("region has a component without Dirichlet boundary".into()));
                }
                r.clone()
            }
            None => grid.full_mask(),
        };
        let quad = grid.quad();
        let mut k = vec![0.0; grid.cell_count() * QP];
        let mut prestress = vec![Sym2::ZERO; grid.cell_count() * QP];
        for cell in region.cells() {
            let cl = grid.gather(cell, &c.values);
            let zl = grid.gather(cell, &z.values);
            for q in 0..QP {
                let zq = quad.value(q, &zl);
                if !(0.0..=1.0).contains(&zq) {
                    return Err(Error::OutOfRange(format!("damage value {zq} outside [0, 1] in cell {cell}")));
                }
                let kq = model.stiffness_factor(zq, eps);
                if !(kq > 0.0) {
                    return Err(Error::Inadmissible(format!(
                        "vanishing stiffness in cell {cell}; exclude completely damaged cells or use eps > 0"
                    )));
                }
                k[cell * QP + q] = kq;
                prestress[cell * QP + q] = model.phi2.eval(quad.value(q, &cl));
            }
        }
        Ok(Self {
            grid,
            tangent: model.phi1.scale(2.0),
            k,
            prestress,
            in_region: grid.region_nodes(&region),
            dirichlet: grid.dirichlet_nodes(&region),
            region,
        })
    }

    pub fn region(&self) -> &RegionMask {
        &self.region
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.in_region[node] && !self.dirichlet[node]
    }

    pub fn dirichlet_nodes(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Nodal forces `\int_F k (2 phi1 e(u) + prestress * with_prestress) : e(N_a e_d)`,
    /// interleaved as `[x0, y0, x1, y1, ...]`.
    fn forces(&self, u: &[f64], with_prestress: bool, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let quad = self.grid.quad();
        for cell in self.region.cells() {
            let nodes = self.grid.cell_nodes(cell);
            let ux = nodes.map(|n| u[2 * n]);
            let uy = nodes.map(|n| u[2 * n + 1]);
            for q in 0..QP {
                let e = strain_at(quad, q, &ux, &uy);
                let mut s = self.tangent.apply(&e);
                if with_prestress {
                    s += self.prestress[cell * QP + q];
                }
                let s = (quad.w * self.k[cell * QP + q]) * s;
                for (a, &n) in nodes.iter().enumerate() {
                    let (dx, dy) = (quad.dx[q][a], quad.dy[q][a]);
                    out[2 * n] += s.xx * dx + s.xy * dy;
                    out[2 * n + 1] += s.xy * dx + s.yy * dy;
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; 2 * self.grid.node_count()];
        let quad = self.grid.quad();
        for cell in self.region.cells() {
            let nodes = self.grid.cell_nodes(cell);
            for q in 0..QP {
                let w = quad.w * self.k[cell * QP + q];
                for (a, &n) in nodes.iter().enumerate() {
                    let (dx, dy) = (quad.dx[q][a], quad.dy[q][a]);
                    let ex = Sym2::new(dx, 0.0, 0.5 * dy);
                    let ey = Sym2::new(0.0, dy, 0.5 * dx);
                    d[2 * n] += w * self.tangent.apply(&ex).ddot(&ex);
                    d[2 * n + 1] += w * self.tangent.apply(&ey).ddot(&ey);
                }
            }
        }
        d
    }

    /// Residual of the weak equation at every node, `[f64; 2]` per node.
    pub fn residual(&self, u: &VectorField) -> Vec<[f64; 2]> {
        let flat = self.flatten(u);
        let mut out = vec![0.0; flat.len()];
        self.forces(&flat, true, &mut out);
        out.chunks(2).map(|p| [p[0], p[1]]).collect()
    }

    fn flatten(&self, u: &VectorField) -> Vec<f64> {
        let mut flat = vec![0.0; 2 * u.values.len()];
        for (n, v) in u.values.iter().enumerate() {
            if self.in_region[n] {
                flat[2 * n] = v[0];
                flat[2 * n + 1] = v[1];
            }
        }
        flat
    }

    /// Solves for `u` with `u = b` on the Dirichlet nodes. `guess` seeds the
    /// free unknowns.
    pub fn solve(&self, b: &VectorField, guess: Option<&VectorField>) -> Result<(VectorField, CgStats)> {
        let nn = self.grid.node_count();
        self.grid.check_nodal(b.values.len())?;
        let free: Vec<bool> = (0..2 * nn).map(|i| self.is_free(i / 2)).collect();
        let unknowns = free.iter().filter(|&&f| f).count();

        let mut lifted = vec![0.0; 2 * nn];
        for n in 0..nn {
            if self.dirichlet[n] {
                lifted[2 * n] = b.values[n][0];
                lifted[2 * n + 1] = b.values[n][1];
            }
        }
        let mut rhs = vec![0.0; 2 * nn];
        self.forces(&lifted, true, &mut rhs);
        for i in 0..2 * nn {
            rhs[i] = if free[i] { -rhs[i] } else { 0.0 };
        }
        let mut diag = self.diagonal();
        for i in 0..2 * nn {
            if !free[i] {
                diag[i] = 1.0;
            }
        }
        let mut x = vec![0.0; 2 * nn];
        if let Some(g) = guess {
            for n in 0..nn {
                if self.is_free(n) && g.values[n][0].is_finite() && g.values[n][1].is_finite() {
                    x[2 * n] = g.values[n][0];
                    x[2 * n + 1] = g.values[n][1];
                }
            }
        }
        let apply = |v: &[f64], out: &mut [f64]| {
            self.forces(v, false, out);
            for i in 0..out.len() {
                if !free[i] {
                    out[i] = 0.0;
                }
            }
        };
        let max_iter = ((50.0 * (unknowns.max(1) as f64).sqrt()).ceil() as usize).max(10);
        let stats = pcg(apply, &diag, &rhs, &mut x, CG_REL_TOL, max_iter)?;

        let mut u = VectorField { values: vec![[UNDEFINED; 2]; nn] };
        for n in 0..nn {
            if self.dirichlet[n] {
                u.values[n] = b.values[n];
            } else if self.in_region[n] {
                u.values[n] = [x[2 * n], x[2 * n + 1]];
            }
        }
        Ok((u, stats))
    }

    /// `max |R_a| / \int_F phi_a` over free nodal test functions.
    pub fn residual_norm(&self, u: &VectorField) -> f64 {
        let r = self.residual(u);
        let mass = self.grid.lumped_mass(&self.region);
        (0..self.grid.node_count())
            .filter(|&n| self.is_free(n))
            .map(|n| r[n][0].abs().max(r[n][1].abs()) / mass[n])
            .fold(0.0, f64::max)
    }
}

/// Solves the equilibrium equation; see [`ElasticProblem::solve`].
pub fn solve_equilibrium(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    z: &ScalarField,
    b: &VectorField,
    eps: f64,
    region: Option<&RegionMask>,
) -> Result<VectorField> {
    Ok(ElasticProblem::new(grid, model, c, z, eps, region)?.solve(b, None)?.0)
}

pub fn equilibrium_residual(
    grid: &Grid,
    model: &MaterialModel,
    u: &VectorField,
    c: &ScalarField,
    z: &ScalarField,
    eps: f64,
    region: Option<&RegionMask>,
) -> Result<f64> {
    Ok(ElasticProblem::new(grid, model, c, z, eps, region)?.residual_norm(u))
}

/// `\int_F W^eps(c, e(u), z) dx`.
pub fn elastic_energy(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    u: &VectorField,
    z: &ScalarField,
    eps: f64,
    region: &RegionMask,
) -> f64 {
    let quad = grid.quad();
    let mut total = 0.0;
    for cell in region.cells() {
        let cl = grid.gather(cell, &c.values);
        let zl = grid.gather(cell, &z.values);
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            let e = strain_at(quad, q, &ux, &uy);
            total += quad.w * model.stiffness_factor(quad.value(q, &zl), eps) * model.phi(quad.value(q, &cl), &e);
        }
    }
    total
}

/// Both sides of `\int W^eps(c,e(u),z) = \int (g+eps)(phi1 e(u):e(v) + 1/2 phi2(c):(e(u)+e(v)) + phi3(c))`
/// for an equilibrium `u` and any `v` with the same Dirichlet trace.
pub fn energy_transform_check(
    grid: &Grid,
    model: &MaterialModel,
    u: &VectorField,
    c: &ScalarField,
    z: &ScalarField,
    eps: f64,
    u_tilde: &VectorField,
    region: Option<&RegionMask>,
) -> Result<(f64, f64)> {
    let full = grid.full_mask();
    let region = region.unwrap_or(&full);
    let dirichlet = grid.dirichlet_nodes(region);
    let scale = u.values.iter().flatten().filter(|v| v.is_finite()).fold(1.0f64, |a, v| a.max(v.abs()));
    for n in (0..grid.node_count()).filter(|&n| dirichlet[n]) {
        for d in 0..2 {
            if (u.values[n][d] - u_tilde.values[n][d]).abs() > 1e-12 * scale {
                return Err(Error::Inadmissible(format!("trace mismatch at Dirichlet node {n}")));
            }
        }
    }
    let quad = grid.quad();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for cell in region.cells() {
        let cl = grid.gather(cell, &c.values);
        let zl = grid.gather(cell, &z.values);
        let (ux, uy) = u.gather(grid, cell);
        let (vx, vy) = u_tilde.gather(grid, cell);
        for q in 0..QP {
            let cq = quad.value(q, &cl);
            let k = model.stiffness_factor(quad.value(q, &zl), eps);
            let e = strain_at(quad, q, &ux, &uy);
            let et = strain_at(quad, q, &vx, &vy);
            lhs += quad.w * k * model.phi(cq, &e);
            rhs += quad.w
                * k
                * (model.phi1.apply(&e).ddot(&et) + 0.5 * model.phi2.eval(cq).ddot(&(e + et)) + model.phi3.eval(cq));
        }
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DirichletSelector, Side};
    use crate::material::{Poly, TensorPoly};
    use crate::rng::Lcg64;

    fn all_sides() -> DirichletSelector {
        DirichletSelector::Sides(vec![Side::Left, Side::Right, Side::Bottom, Side::Top])
    }

    fn no_prestrain() -> MaterialModel {
        let mut m = MaterialModel::default();
        m.phi2 = TensorPoly::default();
        m.phi3 = Poly::zero();
        m
    }

    #[test]
    fn zero_data_gives_zero_displacement() {
        let g = build_grid(6, 5, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let c = ScalarField::constant(&g, 0.3);
        let z = ScalarField::constant(&g, 1.0);
        let u = solve_equilibrium(&g, &no_prestrain(), &c, &z, &VectorField::zeros(&g), 1e-3, None).unwrap();
        assert!(u.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn affine_data_is_reproduced() {
        let g = build_grid(7, 6, 1.3, 1.0, &all_sides()).unwrap();
        let m = MaterialModel::default();
        let c = ScalarField::constant(&g, 0.4);
        let z = ScalarField::constant(&g, 1.0);
        let b = VectorField::from_fn(&g, |x, y| [0.1 * x - 0.05 * y + 0.2, 0.03 * x + 0.07 * y - 0.1]);
        let u = solve_equilibrium(&g, &m, &c, &z, &b, 0.0, None).unwrap();
        for (a, e) in u.values.iter().zip(&b.values) {
            assert!((a[0] - e[0]).abs() < 1e-9 && (a[1] - e[1]).abs() < 1e-9);
        }
        assert!(equilibrium_residual(&g, &m, &b, &c, &z, 0.0, None).unwrap() < 1e-10);
    }

    #[test]
    fn completely_damaged_body_with_floor_is_solvable() {
        let g = build_grid(6, 6, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let m = MaterialModel::default();
        let c = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() * y);
        let z = ScalarField::constant(&g, 0.0);
        let u = solve_equilibrium(&g, &m, &c, &z, &VectorField::zeros(&g), 1e-3, None).unwrap();
        assert!(u.values.iter().all(|v| v[0].is_finite() && v[1].abs() < 10.0));
        assert!(solve_equilibrium(&g, &m, &c, &z, &VectorField::zeros(&g), 0.0, None).is_err());
    }

    #[test]
    fn residual_detects_non_equilibrium_and_is_linear() {
        let g = build_grid(8, 8, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let m = MaterialModel::default();
        let c = ScalarField::from_fn(&g, |x, y| 0.5 * (x - y));
        let z = ScalarField::from_fn(&g, |x, _| 0.5 + 0.5 * x);
        let b = VectorField::from_fn(&g, |_, y| [0.1, 0.02 * y]);
        assert!(equilibrium_residual(&g, &m, &VectorField::zeros(&g), &c, &z, 1e-3, None).unwrap() > 1e-3);

        let p = ElasticProblem::new(&g, &m, &c, &z, 1e-3, None).unwrap();
        let (u, _) = p.solve(&b, None).unwrap();
        let r0 = p.residual_norm(&u);
        assert!(r0 < 1e-8, "{r0}");
        let mut rng = Lcg64::new(5);
        let dir: Vec<[f64; 2]> = (0..g.node_count())
            .map(|n| if p.is_free(n) { [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)] } else { [0.0, 0.0] })
            .collect();
        let perturbed = |h: f64| VectorField {
            values: u.values.iter().zip(&dir).map(|(a, d)| [a[0] + h * d[0], a[1] + h * d[1]]).collect(),
        };
        let r1 = p.residual_norm(&perturbed(1e-3));
        let r2 = p.residual_norm(&perturbed(2e-3));
        assert!(((r2 - r0) / (r1 - r0) - 2.0).abs() < 1e-4, "{r1} {r2}");
    }

    #[test]
    fn solution_minimizes_energy() {
        let g = build_grid(8, 6, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let m = MaterialModel::default();
        let c = ScalarField::from_fn(&g, |x, y| (4.0 * x).cos() * (3.0 * y).sin());
        let z = ScalarField::from_fn(&g, |x, y| 0.2 + 0.8 * x * y);
        let b = VectorField::from_fn(&g, |_, y| [0.05 * y, 0.0]);
        let full = g.full_mask();
        let p = ElasticProblem::new(&g, &m, &c, &z, 1e-3, None).unwrap();
        let (u, _) = p.solve(&b, None).unwrap();
        let e0 = elastic_energy(&g, &m, &c, &u, &z, 1e-3, &full);
        let mut rng = Lcg64::new(17);
        for _ in 0..20 {
            let v = VectorField {
                values: (0..g.node_count())
                    .map(|n| {
                        let d = if p.is_free(n) { [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)] } else { [0.0; 2] };
                        [u.values[n][0] + d[0], u.values[n][1] + d[1]]
                    })
                    .collect(),
            };
            assert!(elastic_energy(&g, &m, &c, &v, &z, 1e-3, &full) >= e0 - 1e-12);
        }
    }

    #[test]
    fn energy_transform_identity() {
        let g = build_grid(10, 10, 1.0, 1.0, &DirichletSelector::Sides(vec![Side::Left, Side::Right])).unwrap();
        let m = MaterialModel::default();
        let c = ScalarField::from_fn(&g, |x, y| (5.0 * x).sin() * (2.0 * y).cos());
        let z = ScalarField::from_fn(&g, |x, _| 0.3 + 0.7 * (1.0 - x));
        let b = VectorField::from_fn(&g, |x, y| [0.2 * x, 0.05 * y]);
        let u = solve_equilibrium(&g, &m, &c, &z, &b, 1e-3, None).unwrap();
        let (lhs, rhs) = energy_transform_check(&g, &m, &u, &c, &z, 1e-3, &b, None).unwrap();
        assert!((lhs - rhs).abs() / lhs.abs() <= 1e-8, "{lhs} {rhs}");
        let (l2, r2) = energy_transform_check(&g, &m, &u, &c, &z, 1e-3, &u, None).unwrap();
        assert!((l2 - r2).abs() <= 1e-14 * (1.0 + l2.abs()));
        // a non-equilibrium state breaks the identity
        let (l3, r3) = energy_transform_check(&g, &m, &b, &c, &z, 1e-3, &VectorField::from_fn(&g, |x, y| {
            let s = (std::f64::consts::PI * x).sin();
            [0.2 * x + 0.1 * s * y, 0.05 * y]
        }), None)
        .unwrap();
        assert!((l3 - r3).abs() / l3.abs() > 1e-6);
        let shifted = VectorField::from_fn(&g, |x, y| [0.2 * x + 1.0, 0.05 * y]);
        assert!(energy_transform_check(&g, &m, &u, &c, &z, 1e-3, &shifted, None).is_err());
    }

    #[test]
    fn region_restriction_isolates_outside_values() {
        let g = build_grid(6, 4, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let m = MaterialModel::default();
        let mut region = g.full_mask();
        for j in 0..4 {
            for i in 3..6 {
                region.set(g.cell(i, j), false);
            }
        }
        let b = VectorField::from_fn(&g, |_, y| [0.1 * y, 0.0]);
        let mut rng = Lcg64::new(23);
        let base_c = ScalarField::from_fn(&g, |x, y| x * y);
        let base_z = ScalarField::constant(&g, 1.0);
        let u0 = solve_equilibrium(&g, &m, &base_c, &base_z, &b, 0.0, Some(&region)).unwrap();
        let inside = g.region_nodes(&region);
        let mut c = base_c.clone();
        let mut z = base_z.clone();
        for n in 0..g.node_count() {
            if !inside[n] {
                c.values[n] = rng.uniform(-5.0, 5.0);
                z.values[n] = rng.next_f64();
            }
        }
        let u1 = solve_equilibrium(&g, &m, &c, &z, &b, 0.0, Some(&region)).unwrap();
        for n in 0..g.node_count() {
            if inside[n] {
                assert_eq!(u0.values[n], u1.values[n]);
            } else {
                assert!(u1.values[n][0].is_nan());
            }
        }
        let mut island = region.clone();
        island.set(g.cell(5, 0), true);
        assert!(matches!(
            solve_equilibrium(&g, &m, &c, &z, &b, 0.0, Some(&island)),
            Err(Error::Inadmissible(_))
        ));
    }

    #[test]
    fn operator_has_positive_floor() {
        let g = build_grid(6, 6, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let m = no_prestrain();
        let c = ScalarField::constant(&g, 0.0);
        let z = ScalarField::constant(&g, 0.0);
        let p = ElasticProblem::new(&g, &m, &c, &z, 1e-3, None).unwrap();
        let mut rng = Lcg64::new(8);
        for _ in 0..50 {
            let v = VectorField {
                values: (0..g.node_count())
                    .map(|n| if p.is_free(n) { [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)] } else { [0.0; 2] })
                    .collect(),
            };
            let r = p.residual(&v);
            let quad: f64 = r.iter().zip(&v.values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
            let norm: f64 = v.values.iter().map(|a| a[0] * a[0] + a[1] * a[1]).sum();
            assert!(quad / norm > 1e-3 * 1e-3, "{}", quad / norm);
        }
    }
}
