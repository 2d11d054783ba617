//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::VecDeque;
use std::time::Instant;

use chdamage::admissible::{maximal_admissible, threshold_mask, RegionMask};
use chdamage::cahn_hilliard::step_ch;
use chdamage::config::{canonical, ScenarioConfig};
use chdamage::damage::{step_damage, DamageObjective};
use chdamage::grid::{build_grid, p_flux, BoundaryEdge, DirichletSelector, Grid, ScalarField, Side, VectorField};
use chdamage::ledger::{check_energy_inequality, Ledger};
use chdamage::material::{MaterialModel, Poly, RegularizationParams, TensorPoly};
use chdamage::rng::Lcg64;
use chdamage::stepper::{run, sweep_epsilon, Simulation, StepDiagnostics};
use chdamage::tensor::{Sym2, SymMap};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// `\int c` of a Q1 field: each cell contributes its area times the corner mean.
fn integral(grid: &Grid, c: &ScalarField) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let corners = [grid.node(i, j), grid.node(i + 1, j), grid.node(i + 1, j + 1), grid.node(i, j + 1)];
            s += grid.hx * grid.hy * 0.25 * corners.iter().map(|&n| c.values[n]).sum::<f64>();
        }
    }
    s
}

/// Recomputed slack of every row; the smallest one.
fn min_slack(ledger: &Ledger) -> f64 {
    let (mut w, mut d) = (0.0, 0.0);
    let mut worst = f64::INFINITY;
    for r in &ledger.rows {
        w += r.w_ext;
        d += r.d_ch + r.d_dam;
        worst = worst.min(ledger.e0 + w - r.energy - r.j_cum - d);
    }
    worst
}

struct CanonicalRun {
    ledger: Ledger,
    diagnostics: Vec<StepDiagnostics>,
    initial_defect: f64,
    seconds: f64,
    max_mass_drift: f64,
    area: f64,
    monotone_exact: bool,
    bounds_exact: bool,
    damaged: bool,
}

fn canonical_run(cfg: &ScenarioConfig) -> CanonicalRun {
    let t0 = Instant::now();
    let mut sim = Simulation::new(cfg).expect("scenario initializes");
    let grid = sim.grid().clone();
    let m0 = integral(&grid, &sim.state().c);
    let mut drift: f64 = 0.0;
    let mut monotone = true;
    let mut bounds = true;
    let mut z_prev = sim.state().z.clone();
    while !sim.is_finished() {
        sim.step().expect("step succeeds");
        let s = sim.state();
        drift = drift.max((integral(&grid, &s.c) - m0).abs());
        monotone &= s.z.values.iter().zip(&z_prev.values).all(|(a, b)| a <= b);
        bounds &= s.z.values.iter().all(|v| (0.0..=1.0).contains(v));
        z_prev = s.z.clone();
    }
    let damaged = z_prev.values.iter().any(|&v| v < 1.0);
    sim.verify();
    let initial_defect = sim.max_transform_defect();
    CanonicalRun {
        seconds: t0.elapsed().as_secs_f64(),
        ledger: sim.ledger().clone(),
        diagnostics: sim.diagnostics().to_vec(),
        initial_defect,
        max_mass_drift: drift,
        area: grid.area(),
        monotone_exact: monotone,
        bounds_exact: bounds,
        damaged,
    }
}

fn criterion_1(spinodal: &CanonicalRun) -> Outcome {
    let tol = 1e-9 * spinodal.area;
    let pass = spinodal.max_mass_drift <= tol && spinodal.seconds <= 60.0 && spinodal.ledger.rows.len() == 200;
    outcome(
        pass,
        format!(
            "mass conservation: max |int c - int c0| = {:.3e} <= {:.3e} over {} steps, {:.1} s <= 60 s",
            spinodal.max_mass_drift,
            tol,
            spinodal.ledger.rows.len(),
            spinodal.seconds
        ),
    )
}

fn criterion_2(spinodal: &CanonicalRun) -> Outcome {
    let pass = spinodal.monotone_exact && spinodal.bounds_exact && spinodal.damaged;
    outcome(
        pass,
        format!(
            "damage monotone and bounded: z^k <= z^(k-1) exactly: {}, 0 <= z <= 1 exactly: {}, damage active: {}",
            spinodal.monotone_exact, spinodal.bounds_exact, spinodal.damaged
        ),
    )
}

fn criterion_3(runs: &[(&str, &CanonicalRun)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in runs {
        let tol = 1e-8 * (1.0 + r.ledger.e0.abs());
        let s = min_slack(&r.ledger);
        let verdict = check_energy_inequality(&r.ledger);
        let ok = s >= -tol && verdict.ok && !r.ledger.rows.is_empty();
        pass &= ok;
        parts.push(format!("{name} min slack {s:.3e} (tol {tol:.1e})"));
    }
    outcome(pass, format!("energy inequality: {}", parts.join(", ")))
}

/// Components by breadth-first search over edge-adjacent cells, kept if any
/// cell carries a Dirichlet edge.
fn bfs_admissible(nx: usize, ny: usize, mask: &[bool], anchored_cell: &dyn Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut out = vec![false; nx * ny];
    let mut seen = vec![false; nx * ny];
    for start in 0..nx * ny {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(c) = queue.pop_front() {
            comp.push(c);
            let (i, j) = (c % nx, c / nx);
            let mut nb = Vec::new();
            if i > 0 {
                nb.push(c - 1);
            }
            if i + 1 < nx {
                nb.push(c + 1);
            }
            if j > 0 {
                nb.push(c - nx);
            }
            if j + 1 < ny {
                nb.push(c + nx);
            }
            for n in nb {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if comp.iter().any(|&c| anchored_cell(c % nx, c / nx)) {
            for c in comp {
                out[c] = true;
            }
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let mut mismatches = 0;
    let mut cases = 0;
    // 3x3, Dirichlet on the left side
    let g3 = build_grid(3, 3, 1.0, 1.0, &DirichletSelector::left()).unwrap();
    for bits in 0u32..512 {
        let cells: Vec<bool> = (0..9).map(|k| bits >> k & 1 == 1).collect();
        let fast = maximal_admissible(&g3, &RegionMask::from_cells(3, 3, cells.clone()));
        let slow = bfs_admissible(3, 3, &cells, &|i, _| i == 0);
        mismatches += usize::from(fast.as_slice() != slow.as_slice());
        cases += 1;
    }
    // 8x8, Dirichlet on the bottom side and two edges of the right side
    let edges = vec![
        BoundaryEdge { side: Side::Bottom, index: 0 },
        BoundaryEdge { side: Side::Bottom, index: 1 },
        BoundaryEdge { side: Side::Bottom, index: 2 },
        BoundaryEdge { side: Side::Bottom, index: 3 },
        BoundaryEdge { side: Side::Bottom, index: 4 },
        BoundaryEdge { side: Side::Bottom, index: 5 },
        BoundaryEdge { side: Side::Bottom, index: 6 },
        BoundaryEdge { side: Side::Bottom, index: 7 },
        BoundaryEdge { side: Side::Right, index: 5 },
        BoundaryEdge { side: Side::Right, index: 6 },
    ];
    let g8 = build_grid(8, 8, 1.0, 1.0, &DirichletSelector::Edges(edges)).unwrap();
    let anchored = |i: usize, j: usize| j == 0 || (i == 7 && (j == 5 || j == 6));
    let mut rng = Lcg64::new(2024);
    for k in 0..10_000 {
        let density = 0.35 + 0.5 * (k % 7) as f64 / 6.0;
        let cells: Vec<bool> = (0..64).map(|_| rng.next_f64() < density).collect();
        let fast = maximal_admissible(&g8, &RegionMask::from_cells(8, 8, cells.clone()));
        let slow = bfs_admissible(8, 8, &cells, &anchored);
        mismatches += usize::from(fast.as_slice() != slow.as_slice());
        cases += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs <= 5.0,
        format!("admissible-set oracle: {mismatches} mismatches in {cases} masks, {secs:.2} s <= 5 s"),
    )
}

fn criterion_5() -> Outcome {
    let cfg = canonical::island();
    let out = run(&cfg).expect("island run");
    let grid = cfg.build_grid().unwrap();
    let tol = cfg.regularization.z_tol;
    let mut pass = out.events.len() == 1;
    let mut detail = format!("exclusion: {} event(s)", out.events.len());
    if let Some(e) = out.events.first() {
        // every snapshot after the event
        let fixpoint = out.snapshots.iter().filter(|s| s.step >= e.step).all(|s| {
            let thr = threshold_mask(&grid, &s.z, tol);
            maximal_admissible(&grid, &thr) == thr
        });
        let shrinking = out.masks.windows(2).all(|w| w[1].as_slice().iter().zip(w[0].as_slice()).all(|(a, b)| !a || *b));
        let j_inc = out.ledger.rows.iter().map(|r| r.j_cum).collect::<Vec<_>>();
        let j_nonneg = j_inc.windows(2).all(|w| w[1] >= w[0]) && j_inc.first().is_none_or(|&j| j >= 0.0) && e.jump >= 0.0;
        let expected: Vec<bool> = (0..grid.cell_count()).map(|c| c % grid.nx < 4).collect();
        let region_ok = out.final_state.region.as_slice() == expected.as_slice();
        pass &= fixpoint && shrinking && j_nonneg && region_ok && e.step == 1;
        detail += &format!(
            " at step {}, threshold = A_D(threshold): {fixpoint}, shrinking: {shrinking}, jump {:.4e} >= 0: {j_nonneg}, F = columns 0..3: {region_ok}",
            e.step, e.jump
        );
    }
    outcome(pass, detail)
}

/// Lumped-free reference: consistent Q1 mass and stiffness, explicit Euler on
/// `M c' = -K mu`, `M mu = K c + F(c)` with `F_i = \int Psi'(c) phi_i`.
fn explicit_ch_oracle(grid: &Grid, c0: &[f64], psi_prime: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Vec<f64> {
    let n = grid.node_count();
    let (hx, hy) = (grid.hx, grid.hy);
    let g = 1.0 / 3.0f64.sqrt();
    let pts = [(-g, -g), (g, -g), (g, g), (-g, g)];
    let local = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let shape = |a: usize, xi: f64, eta: f64| 0.25 * (1.0 + local[a].0 * xi) * (1.0 + local[a].1 * eta);
    let dshape = |a: usize, xi: f64, eta: f64| {
        [0.25 * local[a].0 * (1.0 + local[a].1 * eta) * 2.0 / hx, 0.25 * local[a].1 * (1.0 + local[a].0 * xi) * 2.0 / hy]
    };
    let w = hx * hy / 4.0;
    let mut m = vec![vec![0.0; n]; n];
    let mut k = vec![vec![0.0; n]; n];
    let cells: Vec<[usize; 4]> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| [grid.node(i, j), grid.node(i + 1, j), grid.node(i + 1, j + 1), grid.node(i, j + 1)])
        .collect();
    for nodes in &cells {
        for &(xi, eta) in &pts {
            for a in 0..4 {
                for b in 0..4 {
                    let da = dshape(a, xi, eta);
                    let db = dshape(b, xi, eta);
                    m[nodes[a]][nodes[b]] += w * shape(a, xi, eta) * shape(b, xi, eta);
                    k[nodes[a]][nodes[b]] += w * (da[0] * db[0] + da[1] * db[1]);
                }
            }
        }
    }
    // dense inverse of M by Gauss-Jordan
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = m[i].clone();
            r.extend((0..n).map(|j| f64::from(u8::from(i == j))));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    let minv: Vec<Vec<f64>> = aug.into_iter().map(|r| r[n..].to_vec()).collect();
    let matvec = |a: &Vec<Vec<f64>>, x: &[f64]| -> Vec<f64> { a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect() };
    let mut c = c0.to_vec();
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let mut rhs = matvec(&k, &c);
        for nodes in &cells {
            for &(xi, eta) in &pts {
                let cq: f64 = (0..4).map(|a| shape(a, xi, eta) * c[nodes[a]]).sum();
                let f = psi_prime(cq);
                for a in 0..4 {
                    rhs[nodes[a]] += w * f * shape(a, xi, eta);
                }
            }
        }
        let mu = matvec(&minv, &rhs);
        let dc = matvec(&minv, &matvec(&k, &mu));
        for (ci, d) in c.iter_mut().zip(&dc) {
            *ci -= dt * d;
        }
    }
    c
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let grid = build_grid(16, 16, 16.0, 16.0, &DirichletSelector::left()).unwrap();
    let mut model = MaterialModel::homogeneous(1.0, 1.0, 0.0, 0.1).unwrap();
    model.phi2 = TensorPoly::default();
    model.phi3 = Poly::zero();
    let reg = RegularizationParams { epsilon: 0.0, delta: 0.0, tau: 0.01, p: 4.0, z_tol: 1e-8 };
    let mut rng = Lcg64::new(11);
    let pi = std::f64::consts::PI;
    let c0 = ScalarField::from_fn(&grid, |x, y| {
        0.3 * (2.0 * pi * x / 16.0).cos() * (2.0 * pi * y / 16.0).cos() + 0.05 * (2.0 * rng.next_f64() - 1.0)
    });
    let z = ScalarField::constant(&grid, 1.0);
    let u = VectorField::zeros(&grid);
    let mut c = c0.clone();
    for _ in 0..20 {
        c = step_ch(&grid, &model, &c, &z, &u, &z, &reg, None).expect("CH step").c;
    }
    let reference = explicit_ch_oracle(&grid, &c0.values, |v| v * v * v - v, 20.0 * reg.tau, reg.tau / 1000.0);
    let d = integral(&grid, &ScalarField { values: c.values.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).collect() });
    let r = integral(&grid, &ScalarField { values: reference.iter().map(|b| b * b).collect() });
    // L2 norms through the Q1 interpolant of the squared nodal values
    let rel = (d / r).sqrt();
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        rel <= 1e-2 && secs <= 120.0,
        format!("Cahn-Hilliard vs explicit fine-step oracle: relative L2 difference {rel:.3e} <= 1e-2, {secs:.1} s <= 120 s"),
    )
}

/// Golden-section minimizer of a convex function on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-13 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + b)
}

fn criterion_7() -> Outcome {
    let (phi, beta, tau) = (2.0, 0.1, 0.1);
    let oracle = golden_min(|z| phi * z + beta * (1.0 - z) + (z - 1.0) * (z - 1.0) / (2.0 * tau), 0.0, 1.0);
    let grid = build_grid(6, 5, 1.0, 1.0, &DirichletSelector::left()).unwrap();
    let mut model = MaterialModel::homogeneous(1.0, 1.0, 0.0, beta).unwrap();
    model.phi3 = Poly::constant(phi);
    let reg = RegularizationParams { epsilon: 0.0, delta: 0.0, tau, p: 4.0, z_tol: 1e-8 };
    let one = ScalarField::constant(&grid, 1.0);
    let c = ScalarField::constant(&grid, 0.0);
    let u = VectorField::zeros(&grid);
    let z = step_damage(&grid, &model, &one, &c, &u, &reg, None).expect("damage step").z;
    let err = z.values.iter().map(|v| (v - oracle).abs()).fold(0.0, f64::max);
    let err_closed = z.values.iter().map(|v| (v - 0.81).abs()).fold(0.0, f64::max);
    outcome(
        err <= 1e-6 && err_closed <= 1e-6,
        format!("scalar damage oracle: 1D minimizer {oracle:.9}, max nodal deviation {err:.2e} (vs 0.81: {err_closed:.2e}) <= 1e-6"),
    )
}

fn rel_err(a: f64, fd: f64) -> f64 {
    (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3)
}

fn criterion_8() -> Outcome {
    let mut rng = Lcg64::new(77);
    let mut model = MaterialModel::homogeneous(1.3, 0.7, 0.15, 0.2).unwrap();
    model.phi1 = SymMap::isotropic(1.3, 0.7).scale(0.5);
    model.g = Poly(vec![0.0, 0.5, 0.5]);
    model.f = Poly(vec![0.2, -0.1, -0.1]);
    let h = 1e-6;
    let n = 1000;
    let mut worst = [0.0f64; 5];
    for _ in 0..n {
        let c = rng.uniform(-1.5, 1.5);
        let z = rng.uniform(0.0, 1.0);
        let eps = rng.uniform(0.0, 0.1);
        let e = Sym2::new(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        let ev = model.w_and_derivatives(c, &e, z, eps).unwrap();
        let w = |c: f64, z: f64| model.elastic(c, &e, z, eps).w;
        worst[0] = worst[0].max(rel_err(ev.w_c, (w(c + h, z) - w(c - h, z)) / (2.0 * h)));
        worst[1] = worst[1].max(rel_err(ev.w_z, (w(c, z + h) - w(c, z - h)) / (2.0 * h)));
        worst[2] = worst[2].max(rel_err(model.psi_prime(c), (model.psi(c + h) - model.psi(c - h)) / (2.0 * h)));
        worst[3] = worst[3].max(rel_err(model.f_prime(z), (model.f(z + h) - model.f(z - h)) / (2.0 * h)));
    }
    // damage objective gradient on a small grid, random states and components
    let grid = build_grid(5, 4, 1.0, 0.8, &DirichletSelector::left()).unwrap();
    let reg = RegularizationParams { epsilon: 0.01, delta: 0.0, tau: 0.05, p: 4.0, z_tol: 1e-8 };
    let mut samples = 0;
    while samples < n {
        let z_prev = ScalarField::from_fn(&grid, |_, _| rng.uniform(0.5, 1.0));
        let c = ScalarField::from_fn(&grid, |_, _| rng.uniform(-1.0, 1.0));
        let u = VectorField::from_fn(&grid, |_, _| [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)]);
        let obj = DamageObjective::new(&grid, &model, &z_prev, &c, &u, &reg, None).unwrap();
        let z: Vec<f64> = z_prev.values.iter().map(|v| v * rng.uniform(0.2, 1.0)).collect();
        let (_, grad) = obj.value_and_gradient(&z);
        for _ in 0..20 {
            let i = (rng.next_u64() % z.len() as u64) as usize;
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[i] += h;
            zm[i] -= h;
            let fd = (obj.value(&zp) - obj.value(&zm)) / (2.0 * h);
            worst[4] = worst[4].max(rel_err(grad[i], fd));
            samples += 1;
        }
    }
    let pass = worst.iter().all(|&w| w <= 1e-5);
    outcome(
        pass,
        format!(
            "derivative consistency ({n} points each): W_c {:.1e}, W_z {:.1e}, Psi' {:.1e}, f' {:.1e}, objective gradient {:.1e} <= 1e-5",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn criterion_9(runs: &[(&str, &CanonicalRun)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut solves = 0;
    for (_, r) in runs {
        worst = worst.max(r.initial_defect);
        for d in &r.diagnostics {
            worst = worst.max(d.transform_defect);
        }
        solves += 1 + r.diagnostics.len();
    }
    outcome(worst <= 1e-8, format!("energy-transform identity: worst |lhs - rhs| / (1 + |lhs|) = {worst:.3e} <= 1e-8 over {solves}+ solves"))
}

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let cfg = canonical::spinodal_damage();
    let report = sweep_epsilon(&cfg, &[1e-1, 1e-2, 1e-3, 1e-4], chdamage::stepper::worker_threads()).expect("sweep runs");
    let secs = t0.elapsed().as_secs_f64();
    let worst = report.spread.iter().copied().fold(0.0, f64::max);
    let pass = report.all_succeeded() && worst <= 10.0 && secs <= 600.0;
    outcome(
        pass,
        format!(
            "eps-sweep boundedness: max/min ratios {:?}, worst {worst:.3} <= 10, {secs:.1} s <= 600 s",
            report.spread.map(|s| (s * 1000.0).round() / 1000.0)
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = Lcg64::new(5);
    let mut negative = 0;
    let mut below = 0;
    let mut total = 0;
    for p in [3.0, 4.0, 6.0] {
        for _ in 0..100_000 {
            let x = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
            let y = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
            let (fx, fy) = (p_flux(x, p), p_flux(y, p));
            let d = [x[0] - y[0], x[1] - y[1]];
            let prod = (fx[0] - fy[0]) * d[0] + (fx[1] - fy[1]) * d[1];
            let bound = 2f64.powf(2.0 - p) * (d[0] * d[0] + d[1] * d[1]).powf(0.5 * p);
            negative += usize::from(prod < 0.0);
            below += usize::from(prod < bound);
            total += 1;
        }
    }
    outcome(
        negative == 0 && below == 0,
        format!("p-monotonicity: {total} pairs, {negative} negative products, {below} below 2^(2-p)|x-y|^p"),
    )
}

fn main() {
    let mut lines: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, o: Outcome| {
        println!("{} [{k:2}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((k, o));
    };
    let spinodal = canonical_run(&canonical::spinodal());
    let trivial = canonical_run(&canonical::trivial());
    let island = canonical_run(&canonical::island());
    report(1, criterion_1(&spinodal));
    report(2, criterion_2(&spinodal));
    report(3, criterion_3(&[("trivial", &trivial), ("spinodal", &spinodal), ("island", &island)]));
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9(&[("trivial", &trivial), ("spinodal", &spinodal), ("island", &island)]));
    report(10, criterion_10());
    report(11, criterion_11());
    let failed = lines.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {}/{} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
