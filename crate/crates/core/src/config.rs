//! Scenario files: JSON with sections `grid`, `material`, `regularization`,
//! `initial`, `boundary`, `output` and the end time `t_end`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::admissible::{maximal_admissible, threshold_mask};
use crate::error::{Error, Result};
use crate::grid::{build_grid, BoundaryEdge, DirichletSelector, Grid, ScalarField, Side, VectorField};
use crate::material::{GrowthConstants, LinearEigenstrain, MaterialModel, Poly, RegularizationParams};
use crate::rng::Lcg64;
use crate::tensor::SymMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub t_end: f64,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
    /// Whole sides carrying Dirichlet data.
    #[serde(default = "left_side")]
    pub dirichlet: Vec<Side>,
    /// Individual Dirichlet edges; replaces `dirichlet` when non-empty.
    #[serde(default)]
    pub dirichlet_edges: Vec<BoundaryEdge>,
}

fn one() -> f64 {
    1.0
}

fn left_side() -> Vec<Side> {
    vec![Side::Left]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub lambda: f64,
    pub mu: f64,
    /// Isotropic eigenstrain slope: `e*(c) = eigenstrain * c * I`.
    pub eigenstrain: f64,
    /// General linear eigenstrain; replaces `eigenstrain` when present.
    pub eigenstrain_law: Option<LinearEigenstrain>,
    pub beta: f64,
    /// Polynomial overrides, ascending coefficients.
    pub psi: Option<Vec<f64>>,
    pub phi3: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub psi_stabilizer: Option<f64>,
    pub growth: GrowthConstants,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            eigenstrain: 0.2,
            eigenstrain_law: None,
            beta: 0.1,
            psi: None,
            phi3: None,
            g: None,
            f: None,
            m: None,
            psi_stabilizer: None,
            growth: GrowthConstants::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubstepOrder {
    /// `u -> (c, mu) -> z`.
    #[default]
    ChFirst,
    /// `u -> z -> (c, mu)`.
    DamageFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub tau: f64,
    pub p: f64,
    pub z_tol: f64,
    /// Fineness bound on the area of `F \ A_D({z > 0})`.
    pub eta: f64,
    pub substep_order: SubstepOrder,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        let r = RegularizationParams::default();
        Self {
            epsilon: r.epsilon,
            delta: r.delta,
            tau: r.tau,
            p: r.p,
            z_tol: r.z_tol,
            eta: 1e-2,
            substep_order: SubstepOrder::ChFirst,
        }
    }
}

impl RegularizationConfig {
    pub fn params(&self) -> RegularizationParams {
        RegularizationParams { epsilon: self.epsilon, delta: self.delta, tau: self.tau, p: self.p, z_tol: self.z_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub c_mean: f64,
    /// Nodal perturbation uniform in `[-c_amplitude, c_amplitude)`.
    pub c_amplitude: f64,
    pub seed: u64,
    pub z: InitialDamage,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { c_mean: 0.0, c_amplitude: 0.0, seed: 0, z: InitialDamage::Uniform { value: 1.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDamage {
    Uniform { value: f64 },
    /// `z = value` on the node column `index`, 1 elsewhere.
    ColumnNotch { index: usize, value: f64 },
    /// `z = value` at nodes within `radius` of `center`, 1 elsewhere.
    Disk { center: [f64; 2], radius: f64, value: f64 },
}

/// `b(t, x) = (grad0 + t grad_rate) x + offset0 + t offset_rate`, matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub grad0: [[f64; 2]; 2],
    pub grad_rate: [[f64; 2]; 2],
    pub offset0: [f64; 2],
    pub offset_rate: [f64; 2],
}

impl BoundaryConfig {
    pub fn is_static(&self) -> bool {
        self.grad_rate == [[0.0; 2]; 2] && self.offset_rate == [0.0; 2]
    }

    pub fn at(&self, grid: &Grid, t: f64) -> VectorField {
        let g = |i: usize, j: usize| self.grad0[i][j] + t * self.grad_rate[i][j];
        let o = |i: usize| self.offset0[i] + t * self.offset_rate[i];
        VectorField::from_fn(grid, |x, y| [g(0, 0) * x + g(0, 1) * y + o(0), g(1, 0) * x + g(1, 1) * y + o(1)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Snapshot cadence in steps; the initial and final states are always written.
    pub every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { every: 10 }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let selector = if g.dirichlet_edges.is_empty() {
            DirichletSelector::Sides(g.dirichlet.clone())
        } else {
            DirichletSelector::Edges(g.dirichlet_edges.clone())
        };
        build_grid(g.nx, g.ny, g.lx, g.ly, &selector)
    }

    pub fn build_model(&self) -> Result<MaterialModel> {
        let m = &self.material;
        let mut model = MaterialModel::homogeneous(m.lambda, m.mu, 0.0, m.beta)?;
        let law = m.eigenstrain_law.unwrap_or_else(|| LinearEigenstrain::isotropic(m.eigenstrain));
        let pieces = crate::material::from_homogeneous(&SymMap::isotropic(m.lambda, m.mu), &law)?;
        model.phi2 = pieces.phi2;
        model.phi3 = pieces.phi3;
        if let Some(c) = &m.phi3 {
            model.phi3 = Poly(c.clone());
        }
        if let Some(c) = &m.psi {
            model.psi = Poly(c.clone());
        }
        if let Some(c) = &m.g {
            model.g = Poly(c.clone());
        }
        if let Some(c) = &m.f {
            model.f = Poly(c.clone());
        }
        if let Some(c) = &m.m {
            model.m = Poly(c.clone());
        }
        if let Some(s) = m.psi_stabilizer {
            model.psi_stabilizer = s;
        }
        model.growth = m.growth;
        model.check()?;
        Ok(model)
    }

    pub fn initial_c(&self, grid: &Grid) -> ScalarField {
        let i = &self.initial;
        let mut rng = Lcg64::new(i.seed);
        ScalarField::from_fn(grid, |_, _| i.c_mean + i.c_amplitude * (2.0 * rng.next_f64() - 1.0))
    }

    pub fn initial_z(&self, grid: &Grid) -> ScalarField {
        match self.initial.z {
            InitialDamage::Uniform { value } => ScalarField::constant(grid, value),
            InitialDamage::ColumnNotch { index, value } => {
                let mut z = ScalarField::constant(grid, 1.0);
                for j in 0..=grid.ny {
                    z.values[grid.node(index, j)] = value;
                }
                z
            }
            InitialDamage::Disk { center, radius, value } => ScalarField::from_fn(grid, |x, y| {
                if (x - center[0]).hypot(y - center[1]) <= radius {
                    value
                } else {
                    1.0
                }
            }),
        }
    }

    /// Number of steps `ceil(t_end / tau)`.
    pub fn steps(&self) -> usize {
        let n = self.t_end / self.regularization.tau;
        // tolerate round-off in t_end / tau
        (n - 1e-9 * n.max(1.0)).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        self.regularization.params().validate()?;
        if !(self.regularization.eta > 0.0) {
            return Err(Error::Config("eta must be positive".into()));
        }
        if self.output.every == 0 {
            return Err(Error::Config("output.every must be at least 1".into()));
        }
        let grid = self.build_grid()?;
        self.build_model()?;
        if let InitialDamage::ColumnNotch { index, .. } = self.initial.z {
            if index > grid.nx {
                return Err(Error::Config(format!("notch column {index} outside 0..={}", grid.nx)));
            }
        }
        let z = self.initial_z(&grid);
        if let Some(v) = z.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("initial damage {v} outside [0, 1]")));
        }
        check_initial_admissible(&grid, &z, self.regularization.z_tol)
    }
}

/// `{z > z_tol}` must equal its maximal admissible subset, and every node with
/// `z > z_tol` must belong to a retained cell.
pub fn check_initial_admissible(grid: &Grid, z: &ScalarField, z_tol: f64) -> Result<()> {
    let thr = threshold_mask(grid, z, z_tol);
    let adm = maximal_admissible(grid, &thr);
    if adm != thr {
        let lost = thr.difference(&adm);
        return Err(Error::Inadmissible(format!(
            "initial damage has {} cell(s) with z > z_tol not connected to the Dirichlet boundary (first: cell {})",
            lost.len(),
            lost[0]
        )));
    }
    let kept = grid.region_nodes(&adm);
    if let Some(n) = (0..grid.node_count()).find(|&n| z.values[n] > z_tol && !kept[n]) {
        return Err(Error::Inadmissible(format!("initial damage positive at node {n} outside every retained cell")));
    }
    Ok(())
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)
}

/// Built-in scenarios.
pub mod canonical {
    use super::ScenarioConfig;

    pub const TRIVIAL: &str = include_str!("../scenarios/trivial.json");
    pub const SPINODAL: &str = include_str!("../scenarios/spinodal.json");
    pub const ISLAND: &str = include_str!("../scenarios/island.json");
    pub const SPINODAL_DAMAGE: &str = include_str!("../scenarios/spinodal_damage.json");

    pub fn trivial() -> ScenarioConfig {
        ScenarioConfig::from_json(TRIVIAL).expect("built-in scenario")
    }

    pub fn spinodal() -> ScenarioConfig {
        ScenarioConfig::from_json(SPINODAL).expect("built-in scenario")
    }

    pub fn island() -> ScenarioConfig {
        ScenarioConfig::from_json(ISLAND).expect("built-in scenario")
    }

    pub fn spinodal_damage() -> ScenarioConfig {
        ScenarioConfig::from_json(SPINODAL_DAMAGE).expect("built-in scenario")
    }

    pub fn by_name(name: &str) -> Option<ScenarioConfig> {
        match name {
            "trivial" => Some(trivial()),
            "spinodal" => Some(spinodal()),
            "island" => Some(island()),
            "spinodal_damage" => Some(spinodal_damage()),
            _ => None,
        }
    }
}
