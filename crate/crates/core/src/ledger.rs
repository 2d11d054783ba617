//! Energy accounting: free energy, external work, dissipation and jump
//! bookkeeping, the energy-inequality verdict and a-priori monitors.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::admissible::{threshold_mask, RegionMask};
use crate::cahn_hilliard::weighted_gradient_norm2;
use crate::error::{Error, Result};
use crate::grid::{strain_at, Grid, ScalarField, VectorField, QP};
use crate::material::MaterialModel;

/// `\int_F (|grad z|^p / p + |grad c|^2 / 2 + Psi(c) + W^eps(c, e(u), z) + f(z))`.
#[allow(clippy::too_many_arguments)]
pub fn free_energy(
    grid: &Grid,
    model: &MaterialModel,
    c: &ScalarField,
    u: &VectorField,
    z: &ScalarField,
    eps: f64,
    p: f64,
    region: &RegionMask,
) -> f64 {
    let quad = grid.quad();
    let mut total = 0.0;
    for cell in region.cells() {
        let cl = grid.gather(cell, &c.values);
        let zl = grid.gather(cell, &z.values);
        let (ux, uy) = u.gather(grid, cell);
        for q in 0..QP {
            let cq = quad.value(q, &cl);
            let zq = quad.value(q, &zl);
            let gc = quad.grad(q, &cl);
            let gz = quad.grad(q, &zl);
            let e = strain_at(quad, q, &ux, &uy);
            total += quad.w
                * ((gz[0] * gz[0] + gz[1] * gz[1]).powf(0.5 * p) / p
                    + 0.5 * (gc[0] * gc[0] + gc[1] * gc[1])
                    + model.psi(cq)
                    + model.stiffness_factor(zq, eps) * model.phi(cq, &e)
                    + model.f(zq));
        }
    }
    total
}

/// A borrowed `(c, u, z)` triple.
#[derive(Debug, Clone, Copy)]
pub struct Fields<'a> {
    pub c: &'a ScalarField,
    pub u: &'a VectorField,
    pub z: &'a ScalarField,
}

/// `\int_F 1/2 (W_e(a) + W_e(b)) : e(b_new - b_old)`, the trapezoidal rule in
/// time for `\int W_e : e(d_t b)`. It is exact when `a` and `b` are
/// equilibria for the old and new boundary data at the same `(c, z)`.
pub fn external_work_increment(
    grid: &Grid,
    model: &MaterialModel,
    eps: f64,
    region: &RegionMask,
    before: Fields<'_>,
    after: Fields<'_>,
    b_old: &VectorField,
    b_new: &VectorField,
) -> f64 {
    let quad = grid.quad();
    let mut total = 0.0;
    for cell in region.cells() {
        let (bx0, by0) = b_old.gather(grid, cell);
        let (bx1, by1) = b_new.gather(grid, cell);
        let dbx = [bx1[0] - bx0[0], bx1[1] - bx0[1], bx1[2] - bx0[2], bx1[3] - bx0[3]];
        let dby = [by1[0] - by0[0], by1[1] - by0[1], by1[2] - by0[2], by1[3] - by0[3]];
        let stress = |f: &Fields<'_>, q: usize| {
            let (ux, uy) = f.u.gather(grid, cell);
            let e = strain_at(quad, q, &ux, &uy);
            let cq = quad.value(q, &grid.gather(cell, &f.c.values));
            let zq = quad.value(q, &grid.gather(cell, &f.z.values));
            model.stiffness_factor(zq, eps) * model.phi_e(cq, &e)
        };
        for q in 0..QP {
            let de = strain_at(quad, q, &dbx, &dby);
            let s = 0.5 * (stress(&before, q) + stress(&after, q));
            total += quad.w * s.ddot(&de);
        }
    }
    total
}

/// One row per completed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    /// Free energy on `F(t)` after the step.
    pub energy: f64,
    pub mass: f64,
    pub d_ch: f64,
    pub d_dam: f64,
    pub w_ext: f64,
    pub j_cum: f64,
    pub slack: f64,
    pub res_equil: f64,
    pub res_mu: f64,
    pub res_vi: f64,
    pub apriori: [f64; 7],
    pub fineness: f64,
}

pub const CSV_HEADER: &str =
    "step,t,E,mass,d_ch,d_dam,w_ext,J_cum,slack,res_equil,res_mu,res_vi,a1,a2,a3,a4,a5,a6,a7,fineness";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyVerdict {
    pub ok: bool,
    /// Smallest recomputed slack and the step where it occurs.
    pub worst_slack: f64,
    pub worst_step: usize,
    /// First row whose increments or recorded slack are inconsistent.
    pub inconsistent_row: Option<usize>,
}

/// Complete energy ledger of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    /// `E+(0)`: energy of the initial equilibrium state.
    pub e0: f64,
    pub eta: f64,
    pub z_tol: f64,
    pub rows: Vec<LedgerRow>,
    /// Verdict of the final verification pass, if run.
    pub verdict: Option<bool>,
}

impl Ledger {
    pub fn new(e0: f64, eta: f64, z_tol: f64) -> Self {
        Self { e0, eta, z_tol, rows: Vec::new(), verdict: None }
    }

    pub fn tol_e(&self) -> f64 {
        1e-8 * (1.0 + self.e0.abs())
    }

    /// Cumulative `(W_ext, D)` up to and including row `k`.
    pub fn cumulative(&self, k: usize) -> (f64, f64) {
        self.rows[..=k].iter().fold((0.0, 0.0), |(w, d), r| (w + r.w_ext, d + r.d_ch + r.d_dam))
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut s = String::with_capacity(256 * (self.rows.len() + 2));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}", r.step);
            let mut values = vec![
                r.t, r.energy, r.mass, r.d_ch, r.d_dam, r.w_ext, r.j_cum, r.slack, r.res_equil, r.res_mu, r.res_vi,
            ];
            values.extend_from_slice(&r.apriori);
            values.push(r.fineness);
            for v in values {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        let verdict = match self.verdict {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "unchecked",
        };
        let _ = writeln!(
            s,
            "# e0={:.16e} tol_e={:.16e} eta={:.16e} z_tol={:.16e} verdict={verdict}",
            self.e0,
            self.tol_e(),
            self.eta,
            self.z_tol
        );
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Format("ledger: missing or unexpected header".into())),
        }
        let mut rows = Vec::new();
        let mut footer = None;
        for (no, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                footer = Some(rest.trim().to_string());
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 20 {
                return Err(Error::Format(format!("ledger line {}: expected 20 columns, got {}", no + 1, fields.len())));
            }
            let step = fields[0]
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("ledger line {}: step: {e}", no + 1)))?;
            let mut v = [0.0; 19];
            for (k, f) in fields[1..].iter().enumerate() {
                v[k] = f.parse::<f64>().map_err(|e| Error::Format(format!("ledger line {}: column {}: {e}", no + 1, k + 2)))?;
            }
            rows.push(LedgerRow {
                step,
                t: v[0],
                energy: v[1],
                mass: v[2],
                d_ch: v[3],
                d_dam: v[4],
                w_ext: v[5],
                j_cum: v[6],
                slack: v[7],
                res_equil: v[8],
                res_mu: v[9],
                res_vi: v[10],
                apriori: [v[11], v[12], v[13], v[14], v[15], v[16], v[17]],
                fineness: v[18],
            });
        }
        let footer = footer.ok_or_else(|| Error::Format("ledger: missing footer".into()))?;
        let mut ledger = Ledger::new(f64::NAN, f64::NAN, f64::NAN);
        for item in footer.split_whitespace() {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Format(format!("ledger footer item {item:?}")))?;
            let num = || v.parse::<f64>().map_err(|e| Error::Format(format!("ledger footer {k}: {e}")));
            match k {
                "e0" => ledger.e0 = num()?,
                "eta" => ledger.eta = num()?,
                "z_tol" => ledger.z_tol = num()?,
                "tol_e" => {}
                "verdict" => {
                    ledger.verdict = match v {
                        "pass" => Some(true),
                        "fail" => Some(false),
                        _ => None,
                    }
                }
                _ => return Err(Error::Format(format!("ledger footer: unknown key {k}"))),
            }
        }
        if !ledger.e0.is_finite() {
            return Err(Error::Format("ledger footer lacks e0".into()));
        }
        ledger.rows = rows;
        Ok(ledger)
    }
}

/// Checks `E(t) + J(0,t) + D(0,t) <= E+(0) + W_ext(0,t) + tol_E` at every row,
/// recomputing the slack from the increments. Negative dissipation or jump
/// increments, and recorded slacks that disagree with the recomputation, fail
/// the verdict as well.
pub fn check_energy_inequality(ledger: &Ledger) -> EnergyVerdict {
    let tol = ledger.tol_e();
    let (mut w, mut d, mut j_prev) = (0.0, 0.0, 0.0);
    let mut worst = (f64::INFINITY, 0);
    let mut inconsistent = None;
    for (k, r) in ledger.rows.iter().enumerate() {
        w += r.w_ext;
        d += r.d_ch + r.d_dam;
        let slack = ledger.e0 + w - r.energy - r.j_cum - d;
        if slack < worst.0 {
            worst = (slack, r.step);
        }
        let bad_increment = r.d_ch < 0.0 || r.d_dam < 0.0 || r.j_cum < j_prev;
        let scale = 1.0 + ledger.e0.abs() + w.abs() + r.energy.abs() + r.j_cum.abs() + d.abs();
        let bad_slack = !((slack - r.slack).abs() <= 1e-9 * scale);
        if inconsistent.is_none() && (bad_increment || bad_slack) {
            inconsistent = Some(k);
        }
        j_prev = r.j_cum;
    }
    if ledger.rows.is_empty() {
        worst = (0.0, 0);
    }
    EnergyVerdict { ok: worst.0 >= -tol && inconsistent.is_none(), worst_slack: worst.0, worst_step: worst.1, inconsistent_row: inconsistent }
}

/// Discrete versions of the seven a-priori quantities:
/// `sup ||c||_H1`, `||e 1_{z>0}||_L2(Q)`, `sup ||z||_W1p`, `||d_t z||_L2(Q)`,
/// `sup \int W^eps`, `||(m^eps)^(1/2) grad mu||_L2(Q)`, `||m^eps grad mu||_L2(Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AprioriMonitor {
    sup_c_h1: f64,
    ehat_sq: f64,
    sup_z_w1p: f64,
    dz_sq: f64,
    sup_w: f64,
    mob_sq: f64,
    flux_sq: f64,
}

/// A state as seen by the monitor.
#[derive(Debug, Clone, Copy)]
pub struct MonitorState<'a> {
    pub c: &'a ScalarField,
    pub u: &'a VectorField,
    pub z: &'a ScalarField,
    pub region: &'a RegionMask,
}

impl AprioriMonitor {
    /// Record the time-pointwise quantities of a state.
    #[allow(clippy::too_many_arguments)]
    pub fn observe_state(&mut self, grid: &Grid, model: &MaterialModel, s: MonitorState<'_>, eps: f64, p: f64) {
        let quad = grid.quad();
        let (mut c_h1, mut z_w1p, mut w) = (0.0, 0.0, 0.0);
        for cell in 0..grid.cell_count() {
            let cl = grid.gather(cell, &s.c.values);
            let zl = grid.gather(cell, &s.z.values);
            for q in 0..QP {
                let cq = quad.value(q, &cl);
                let gc = quad.grad(q, &cl);
                let zq = quad.value(q, &zl);
                let gz = quad.grad(q, &zl);
                c_h1 += quad.w * (cq * cq + gc[0] * gc[0] + gc[1] * gc[1]);
                z_w1p += quad.w * (zq.abs().powf(p) + (gz[0] * gz[0] + gz[1] * gz[1]).powf(0.5 * p));
            }
        }
        for cell in s.region.cells() {
            let cl = grid.gather(cell, &s.c.values);
            let zl = grid.gather(cell, &s.z.values);
            let (ux, uy) = s.u.gather(grid, cell);
            for q in 0..QP {
                let e = strain_at(quad, q, &ux, &uy);
                w += quad.w * model.stiffness_factor(quad.value(q, &zl), eps) * model.phi(quad.value(q, &cl), &e);
            }
        }
        self.sup_c_h1 = self.sup_c_h1.max(c_h1.sqrt());
        self.sup_z_w1p = self.sup_z_w1p.max(z_w1p.powf(1.0 / p));
        self.sup_w = self.sup_w.max(w);
    }

    /// Record the time-integrated quantities of one step of length `tau`.
    /// `mu` and `z_mob` are the chemical potential and mobility damage of the
    /// step; `d_ch` and `d_dam` its dissipation increments.
    #[allow(clippy::too_many_arguments)]
    pub fn observe_step(
        &mut self,
        grid: &Grid,
        model: &MaterialModel,
        s: MonitorState<'_>,
        mu: &ScalarField,
        z_mob: &ScalarField,
        eps: f64,
        z_tol: f64,
        tau: f64,
        d_ch: f64,
        d_dam: f64,
    ) {
        let quad = grid.quad();
        let positive = threshold_mask(grid, s.z, z_tol).intersection(s.region);
        let mut e2 = 0.0;
        for cell in positive.cells() {
            let (ux, uy) = s.u.gather(grid, cell);
            for q in 0..QP {
                let e = strain_at(quad, q, &ux, &uy);
                e2 += quad.w * e.ddot(&e);
            }
        }
        self.ehat_sq += tau * e2;
        self.dz_sq += d_dam;
        self.mob_sq += d_ch;
        let m2 = weighted_gradient_norm2(grid, mu, |z| model.mobility(z, eps).powi(2), z_mob, Some(s.region));
        self.flux_sq += tau * m2;
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.sup_c_h1,
            self.ehat_sq.sqrt(),
            self.sup_z_w1p,
            self.dz_sq.sqrt(),
            self.sup_w,
            self.mob_sq.sqrt(),
            self.flux_sq.sqrt(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DirichletSelector};
    use crate::material::{Poly, TensorPoly};
    use crate::tensor::SymMap;

    fn unit(n: usize) -> Grid {
        build_grid(n, n, 1.0, 1.0, &DirichletSelector::left()).unwrap()
    }

    #[test]
    fn free_energy_examples() {
        let g = unit(4);
        let full = g.full_mask();
        let one = ScalarField::constant(&g, 1.0);
        let zero = ScalarField::constant(&g, 0.0);
        let u = VectorField::zeros(&g);
        let m = MaterialModel::default();
        // phi(1, 0) = 1/2 C e*:e* with e* = 0.2 I and C I = (2 lambda + 2 mu) I = 4 I
        let expect = 0.5 * 4.0 * 0.2 * 0.2 * 2.0;
        let e = free_energy(&g, &m, &one, &u, &one, 0.0, 4.0, &full);
        assert!((e - expect).abs() < 1e-14, "{e} vs {expect}");
        let plain = MaterialModel::homogeneous(1.0, 1.0, 0.0, 0.1).unwrap();
        assert!(free_energy(&g, &plain, &one, &u, &one, 0.0, 4.0, &full).abs() < 1e-15);
        assert!((free_energy(&g, &plain, &zero, &u, &one, 0.0, 4.0, &full) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn external_work_single_cell_bar() {
        // one homogeneous cell pulled uniaxially: u = (s x, 0) with s going 0 -> h
        let g = build_grid(2, 2, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let mut m = MaterialModel::default();
        m.phi1 = SymMap::isotropic(1.0, 1.0).scale(0.5);
        m.phi2 = TensorPoly::default();
        m.phi3 = Poly::zero();
        let c = ScalarField::constant(&g, 0.0);
        let z = ScalarField::constant(&g, 1.0);
        let h = 0.01;
        let b0 = VectorField::zeros(&g);
        let b1 = VectorField::from_fn(&g, |x, _| [h * x, 0.0]);
        let full = g.full_mask();
        let w = external_work_increment(
            &g,
            &m,
            0.0,
            &full,
            Fields { c: &c, u: &b0, z: &z },
            Fields { c: &c, u: &b1, z: &z },
            &b0,
            &b1,
        );
        // sigma_xx = (lambda + 2 mu) s; work = 1/2 (0 + 3h) h * area
        assert!((w - 0.5 * 3.0 * h * h).abs() < 1e-15, "{w}");
        let none = external_work_increment(&g, &m, 0.0, &full, Fields { c: &c, u: &b1, z: &z }, Fields { c: &c, u: &b1, z: &z }, &b1, &b1);
        assert_eq!(none, 0.0);
        let stress_free = external_work_increment(&g, &m, 0.0, &full, Fields { c: &c, u: &b0, z: &z }, Fields { c: &c, u: &b0, z: &z }, &b0, &b1);
        assert_eq!(stress_free, 0.0);
    }

    fn sample_ledger() -> Ledger {
        let mut l = Ledger::new(1.0, 0.1, 1e-8);
        let mut e = 1.0;
        let mut d = 0.0;
        for k in 1..=3 {
            let (d_ch, d_dam) = (0.01, 0.02);
            e -= 0.04;
            d += d_ch + d_dam;
            l.rows.push(LedgerRow {
                step: k,
                t: 0.1 * k as f64,
                energy: e,
                mass: 0.0,
                d_ch,
                d_dam,
                w_ext: 0.0,
                j_cum: 0.0,
                slack: 1.0 - e - d,
                res_equil: 0.0,
                res_mu: 0.0,
                res_vi: 0.0,
                apriori: [1.0; 7],
                fineness: 0.0,
            });
        }
        l
    }

    #[test]
    fn energy_verdict_and_tampering() {
        let l = sample_ledger();
        assert!(check_energy_inequality(&l).ok);
        let mut bad = l.clone();
        bad.rows[1].d_ch = -bad.rows[1].d_ch;
        assert!(!check_energy_inequality(&bad).ok);
        let mut bad = l.clone();
        bad.rows[2].energy += 1.0;
        assert!(!check_energy_inequality(&bad).ok);
    }

    #[test]
    fn csv_round_trip() {
        let mut l = sample_ledger();
        l.verdict = Some(true);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().last().unwrap().ends_with("verdict=pass"));
        let back = Ledger::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn monitor_examples() {
        let g = unit(4);
        let m = MaterialModel::default();
        let c = ScalarField::from_fn(&g, |x, _| x);
        let z = ScalarField::constant(&g, 0.0);
        let u = VectorField::from_fn(&g, |x, _| [x, 0.0]);
        let full = g.full_mask();
        let mut mon = AprioriMonitor::default();
        let s = MonitorState { c: &c, u: &u, z: &z, region: &full };
        mon.observe_state(&g, &m, s, 0.0, 4.0);
        mon.observe_state(&g, &m, s, 0.0, 4.0);
        mon.observe_step(&g, &m, s, &c, &z, 0.0, 1e-8, 0.1, 0.0, 0.361);
        let v = mon.values();
        // ||x||_H1^2 = 1/3 + 1
        assert!((v[0] - (4.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert_eq!(v[1], 0.0);
        assert!((v[3] - 1.9 * 0.1f64.sqrt()).abs() < 1e-12);
    }
}
