//! Constitutive laws.
//!
//! The elastic density has the product form `W(c, e, z) = g(z) phi(c, e)` with
//! `phi(c, e) = phi1 e:e + phi2(c):e + phi3(c)`. With the elastic floor `eps`
//! the regularized density is `(g(z) + eps) phi(c, e)` and the mobility is
//! `m(z) + eps`. Scalar laws are polynomials so that every derivative is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Lcg64;
use crate::tensor::{Sym2, SymMap};

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn constant(a: f64) -> Self {
        Self(vec![a])
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.0.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * x + k as f64 * a)
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> f64 {
        self.0.iter().enumerate().skip(2).rev().fold(0.0, |acc, (k, &a)| acc * x + (k * (k - 1)) as f64 * a)
    }
}

/// Tensor-valued polynomial `sum_k A_k c^k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TensorPoly(pub Vec<Sym2>);

impl TensorPoly {
    #[inline]
    pub fn eval(&self, x: f64) -> Sym2 {
        self.0.iter().rev().fold(Sym2::ZERO, |acc, &a| x * acc + a)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> Sym2 {
        self.0.iter().enumerate().skip(1).rev().fold(Sym2::ZERO, |acc, (k, &a)| x * acc + (k as f64) * a)
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> Sym2 {
        self.0
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(Sym2::ZERO, |acc, (k, &a)| x * acc + ((k * (k - 1)) as f64) * a)
    }
}

/// Constants of the growth conditions checked by [`validate_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c: f64,
    pub eta: f64,
    /// Exponent of the growth bound on `Psi'`.
    pub r: f64,
}

impl Default for GrowthConstants {
    fn default() -> Self {
        Self { c: 10.0, eta: 0.5, r: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub phi1: SymMap,
    pub phi2: TensorPoly,
    pub phi3: Poly,
    pub g: Poly,
    pub psi: Poly,
    pub f: Poly,
    pub m: Poly,
    pub growth: GrowthConstants,
    /// `s` such that `Psi(c) + s c^2 / 2` is convex; the concave remainder is
    /// treated explicitly in the Cahn-Hilliard step.
    pub psi_stabilizer: f64,
}

/// Value and first derivatives of the regularized elastic density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticEval {
    pub w: f64,
    pub w_e: Sym2,
    pub w_c: f64,
    pub w_z: f64,
}

/// Concentration-dependent eigenstrain `e*(c) = base + c * slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearEigenstrain {
    pub base: Sym2,
    pub slope: Sym2,
}

impl LinearEigenstrain {
    pub fn isotropic(kappa: f64) -> Self {
        Self { base: Sym2::ZERO, slope: kappa * Sym2::IDENTITY }
    }

    pub fn eval(&self, c: f64) -> Sym2 {
        self.base + c * self.slope
    }
}

/// The product-form pieces that reproduce `W = z/2 C(e - e*(c)):(e - e*(c))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPieces {
    pub phi1: SymMap,
    pub phi2: TensorPoly,
    pub phi3: Poly,
    pub g: Poly,
}

pub fn from_homogeneous(stiffness: &SymMap, e_star: &LinearEigenstrain) -> Result<HomogeneousPieces> {
    stiffness.require_spd("stiffness tensor")?;
    let cb = stiffness.apply(&e_star.base);
    let cs = stiffness.apply(&e_star.slope);
    Ok(HomogeneousPieces {
        phi1: stiffness.scale(0.5),
        phi2: TensorPoly(vec![-cb, -cs]),
        phi3: Poly(vec![0.5 * cb.ddot(&e_star.base), cb.ddot(&e_star.slope), 0.5 * cs.ddot(&e_star.slope)]),
        g: Poly(vec![0.0, 1.0]),
    })
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self::homogeneous(1.0, 1.0, 0.2, 0.1).expect("default material is valid")
    }
}

impl MaterialModel {
    /// Isotropic Lame pair, eigenstrain `kappa c I`, double well `(c^2-1)^2/4`,
    /// `f(z) = beta (1 - z)`, `g(z) = z`, `m(z) = z`.
    pub fn homogeneous(lambda: f64, mu: f64, kappa: f64, beta: f64) -> Result<Self> {
        let pieces = from_homogeneous(&SymMap::isotropic(lambda, mu), &LinearEigenstrain::isotropic(kappa))?;
        let model = Self {
            phi1: pieces.phi1,
            phi2: pieces.phi2,
            phi3: pieces.phi3,
            g: pieces.g,
            psi: Poly(vec![0.25, 0.0, -0.5, 0.0, 0.25]),
            f: Poly(vec![beta, -beta]),
            m: Poly(vec![0.0, 1.0]),
            growth: GrowthConstants::default(),
            psi_stabilizer: 1.0,
        };
        model.check()?;
        Ok(model)
    }

    /// Structural checks: `phi1` symmetric positive definite, `g(0) = 0` with
    /// `g` nondecreasing, `m(0) = 0` with `m > 0` on `(0, 1]`.
    pub fn check(&self) -> Result<()> {
        self.phi1.require_spd("phi1")?;
        if self.g.eval(0.0) != 0.0 {
            return Err(Error::InvalidMaterial("complete damage requires g(0) = 0".into()));
        }
        if self.m.eval(0.0) != 0.0 {
            return Err(Error::InvalidMaterial("degenerate mobility requires m(0) = 0".into()));
        }
        for k in 1..=1000 {
            let z = k as f64 / 1000.0;
            if self.g.deriv(z) < 0.0 {
                return Err(Error::InvalidMaterial(format!("g decreases at z = {z}")));
            }
            if self.m.eval(z) <= 0.0 {
                return Err(Error::InvalidMaterial(format!("mobility vanishes or is negative at z = {z}")));
            }
        }
        if self.g.deriv(0.0) < 0.0 {
            return Err(Error::InvalidMaterial("g decreases at z = 0".into()));
        }
        if !(self.psi_stabilizer >= 0.0) {
            return Err(Error::InvalidMaterial("psi stabilizer must be nonnegative".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn phi(&self, c: f64, e: &Sym2) -> f64 {
        self.phi1.apply(e).ddot(e) + self.phi2.eval(c).ddot(e) + self.phi3.eval(c)
    }

    /// `d phi / d e = 2 phi1 e + phi2(c)`.
    #[inline]
    pub fn phi_e(&self, c: f64, e: &Sym2) -> Sym2 {
        2.0 * self.phi1.apply(e) + self.phi2.eval(c)
    }

    #[inline]
    pub fn phi_c(&self, c: f64, e: &Sym2) -> f64 {
        self.phi2.deriv(c).ddot(e) + self.phi3.deriv(c)
    }

    #[inline]
    pub fn phi_cc(&self, c: f64, e: &Sym2) -> f64 {
        self.phi2.deriv2(c).ddot(e) + self.phi3.deriv2(c)
    }

    /// `g(z) + eps`, the stiffness factor of the regularized density.
    #[inline]
    pub fn stiffness_factor(&self, z: f64, eps: f64) -> f64 {
        self.g.eval(z) + eps
    }

    /// Regularized density and derivatives, without range checks.
    #[inline]
    pub fn elastic(&self, c: f64, e: &Sym2, z: f64, eps: f64) -> ElasticEval {
        let k = self.stiffness_factor(z, eps);
        let phi = self.phi(c, e);
        ElasticEval { w: k * phi, w_e: k * self.phi_e(c, e), w_c: k * self.phi_c(c, e), w_z: self.g.deriv(z) * phi }
    }

    /// Regularized density and derivatives; `z` must lie in `[0, 1]`.
    pub fn w_and_derivatives(&self, c: f64, e: &Sym2, z: f64, eps: f64) -> Result<ElasticEval> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfRange(format!("damage value {z} outside [0, 1]")));
        }
        Ok(self.elastic(c, e, z, eps))
    }

    #[inline]
    pub fn mobility(&self, z: f64, eps: f64) -> f64 {
        self.m.eval(z) + eps
    }

    #[inline]
    pub fn psi(&self, c: f64) -> f64 {
        self.psi.eval(c)
    }

    #[inline]
    pub fn psi_prime(&self, c: f64) -> f64 {
        self.psi.deriv(c)
    }

    #[inline]
    pub fn psi_second(&self, c: f64) -> f64 {
        self.psi.deriv2(c)
    }

    #[inline]
    pub fn f(&self, z: f64) -> f64 {
        self.f.eval(z)
    }

    #[inline]
    pub fn f_prime(&self, z: f64) -> f64 {
        self.f.deriv(z)
    }
}

/// Time-discretization and regularization parameters in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    /// Elastic and mobility floor.
    pub epsilon: f64,
    /// Viscosity in the chemical potential.
    pub delta: f64,
    pub tau: f64,
    /// Exponent of the damage gradient term.
    pub p: f64,
    /// Threshold that defines the discrete set `{z > 0}`.
    pub z_tol: f64,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        Self { epsilon: 1e-3, delta: 0.0, tau: 1e-2, p: 4.0, z_tol: 1e-8 }
    }
}

impl RegularizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.p > 2.0) {
            return Err(Error::Config(format!("p > n = 2 required, got p = {}", self.p)));
        }
        if !(self.z_tol >= 0.0 && self.z_tol < 1.0) {
            return Err(Error::Config(format!("z_tol must lie in [0, 1), got {}", self.z_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub name: &'static str,
    pub holds: bool,
    /// Smallest constant consistent with the samples (for `eta`: the smallest `g'` seen).
    pub constant: f64,
    /// Sample at which the extreme value was attained.
    pub witness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<GrowthCheck>,
    pub smallest_c: f64,
    pub smallest_eta: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &GrowthCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Randomized check of the growth conditions
/// `|phi2|, |phi2'| <= C(1+|c|)`, `|phi3|, |phi3'| <= C(1+|c|^2)`,
/// `|Psi'| <= C(1+|c|^r)` and `eta <= g'(z)`.
///
/// Concentrations are sampled with log-uniform magnitude in `[1e-2, 1e3]`, so
/// a super-critical term shows up as a constant far above the configured one.
pub fn validate_model(model: &MaterialModel, sample_count: usize) -> ValidationReport {
    let n = sample_count.max(1);
    let mut rng = Lcg64::new(0x5eed_0001);
    let mut cs: Vec<f64> = vec![0.0, 1e3, -1e3];
    cs.extend((0..n).map(|_| {
        let mag = 10f64.powf(rng.uniform(-2.0, 3.0));
        if rng.next_f64() < 0.5 {
            -mag
        } else {
            mag
        }
    }));
    let mut zs: Vec<f64> = vec![0.0, 1.0];
    zs.extend((0..n).map(|_| rng.next_f64()));

    let r = model.growth.r;
    type Bound = Box<dyn Fn(f64) -> f64>;
    let conditions: Vec<(&'static str, Bound, Bound)> = vec![
        ("phi2", Box::new({ let m = model.clone(); move |c| m.phi2.eval(c).norm() }), Box::new(|c: f64| 1.0 + c.abs())),
        ("phi2'", Box::new({ let m = model.clone(); move |c| m.phi2.deriv(c).norm() }), Box::new(|c: f64| 1.0 + c.abs())),
        ("phi3", Box::new({ let m = model.clone(); move |c| m.phi3.eval(c).abs() }), Box::new(|c: f64| 1.0 + c * c)),
        ("phi3'", Box::new({ let m = model.clone(); move |c| m.phi3.deriv(c).abs() }), Box::new(|c: f64| 1.0 + c * c)),
        ("psi'", Box::new({ let m = model.clone(); move |c| m.psi.deriv(c).abs() }), Box::new(move |c: f64| 1.0 + c.abs().powf(r))),
    ];

    let mut checks = Vec::new();
    let mut smallest_c: f64 = 0.0;
    for (name, value, bound) in conditions {
        let (mut worst, mut witness) = (0.0f64, 0.0);
        for &c in &cs {
            let ratio = value(c) / bound(c);
            if ratio > worst {
                worst = ratio;
                witness = c;
            }
        }
        smallest_c = smallest_c.max(worst);
        checks.push(GrowthCheck { name, holds: worst <= model.growth.c, constant: worst, witness });
    }

    let (mut min_slope, mut witness) = (f64::INFINITY, 0.0);
    for &z in &zs {
        let s = model.g.deriv(z);
        if s < min_slope {
            min_slope = s;
            witness = z;
        }
    }
    checks.push(GrowthCheck { name: "g' >= eta", holds: min_slope >= model.growth.eta, constant: min_slope, witness });

    ValidationReport { checks, smallest_c, smallest_eta: min_slope }
}
