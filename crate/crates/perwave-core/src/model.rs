//! Evolution systems `u_t = alpha_k(x) d^k u + ... + alpha_1(x) d u + N(u, x)`
//! with T-periodic coefficients: their linearizations, first-order reductions,
//! exponential weights, and the built-in benchmark models.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Interpolant, Profile};
use crate::linalg::{CMat, RMat, RVec};
use crate::potential::{FourierSeries, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Real,
    /// Complex equation shipped as a real system of doubled dimension.
    ComplexAsRealPair,
}

type CoeffFn = Arc<dyn Fn(f64) -> RMat + Send + Sync>;
type NonlinFn = Arc<dyn Fn(&RVec, f64) -> RVec + Send + Sync>;
type JacFn = Arc<dyn Fn(&RVec, f64) -> RMat + Send + Sync>;
type RebuildFn = Arc<dyn Fn(&BTreeMap<String, f64>) -> Result<ModelSpec> + Send + Sync>;

/// A semilinear evolution system with spatially periodic coefficients.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    /// Differential order k.
    pub order: usize,
    /// Number of components m.
    pub dim: usize,
    /// Coefficient period T.
    pub period: f64,
    pub field_kind: FieldKind,
    coeff: Vec<CoeffFn>,
    nonlin: NonlinFn,
    nonlin_jac: JacFn,
    pub params: BTreeMap<String, f64>,
    rebuild: Option<RebuildFn>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("params", &self.params)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        name: &str,
        order: usize,
        dim: usize,
        period: f64,
        field_kind: FieldKind,
        coeff: Vec<CoeffFn>,
        nonlin: NonlinFn,
        nonlin_jac: JacFn,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if order == 0 || dim == 0 {
            return Err(Error::Invalid("order and dimension must be positive".into()));
        }
        if coeff.len() != order {
            return Err(Error::DimensionMismatch {
                expected: order,
                got: coeff.len(),
            });
        }
        Ok(ModelSpec {
            name: name.to_string(),
            order,
            dim,
            period,
            field_kind,
            coeff,
            nonlin,
            nonlin_jac,
            params,
            rebuild: None,
        })
    }

    /// First-order system dimension `k m`.
    pub fn km(&self) -> usize {
        self.order * self.dim
    }

    /// Coefficient matrix `alpha_i(x)`, 1-based in the derivative order.
    pub fn alpha(&self, i: usize, x: f64) -> RMat {
        (self.coeff[i - 1])(x)
    }

    pub fn nonlin(&self, u: &RVec, x: f64) -> RVec {
        (self.nonlin)(u, x)
    }

    pub fn nonlin_jac(&self, u: &RVec, x: f64) -> RMat {
        (self.nonlin_jac)(u, x)
    }

    /// Rebuild the model with a changed parameter (built-ins only).
    pub fn with_param(&self, name: &str, value: f64) -> Result<ModelSpec> {
        let rebuild = self
            .rebuild
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("model `{}` is not rebuildable", self.name)))?;
        let mut params = self.params.clone();
        if !params.contains_key(name) {
            return Err(Error::MissingParameter(name.to_string()));
        }
        params.insert(name.to_string(), value);
        rebuild(&params)
    }

    /// Spot-check the structural invariants: invertibility of `alpha_k`,
    /// T-periodicity of coefficients and nonlinearity, and agreement of the
    /// analytic Jacobian with central differences.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // alpha_k invertible with finite condition number
        for i in 0..64 {
            let x = self.period * i as f64 / 64.0;
            let ak = self.alpha(self.order, x);
            let svd = ak.svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smin <= 0.0 || smax / smin > 1e12 {
                return Err(Error::Invalid(format!(
                    "alpha_k nearly singular at x = {x} (cond {:.3e})",
                    smax / smin
                )));
            }
        }
        // periodicity
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            let x = -3.0 + 11.0 * i as f64 / 64.0;
            for ord in 1..=self.order {
                worst = worst.max((self.alpha(ord, x + self.period) - self.alpha(ord, x)).norm());
            }
            let u = RVec::from_fn(self.dim, |_, _| rng.gen_range(-1.5..1.5));
            worst = worst.max((self.nonlin(&u, x + self.period) - self.nonlin(&u, x)).norm());
        }
        if worst > 1e-12 {
            return Err(Error::Invalid(format!(
                "coefficients not T-periodic (defect {worst:.3e})"
            )));
        }
        // Jacobian vs central differences
        let h = 1e-5;
        for _ in 0..100 {
            let x = rng.gen_range(-5.0..5.0);
            let u = RVec::from_fn(self.dim, |_, _| rng.gen_range(-2.0..2.0));
            let jac = self.nonlin_jac(&u, x);
            let mut fd = RMat::zeros(self.dim, self.dim);
            for c in 0..self.dim {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[c] += h;
                dn[c] -= h;
                let col = (self.nonlin(&up, x) - self.nonlin(&dn, x)) / (2.0 * h);
                fd.set_column(c, &col);
            }
            let scale = jac.norm().max(1.0);
            if (jac - fd).norm() / scale > 1e-6 {
                return Err(Error::Invalid("nonlin_jac disagrees with finite differences".into()));
            }
        }
        Ok(())
    }

    /// Residual of the stationary equation for a closed-form candidate with
    /// caller-supplied exact derivatives `derivs(x) = (u, u', ..., u^(k))`.
    pub fn stationary_residual_exact<F>(&self, derivs: F, x: f64) -> RVec
    where
        F: Fn(f64) -> Vec<RVec>,
    {
        let d = derivs(x);
        assert_eq!(d.len(), self.order + 1);
        let mut r = self.nonlin(&d[0], x);
        for i in 1..=self.order {
            r += self.alpha(i, x) * &d[i];
        }
        r
    }
}

// ---------------------------------------------------------------------------
// Exponential weights
// ---------------------------------------------------------------------------

/// Two-sided exponential weight: `omega'(x) = eta_minus` left of the
/// transition zone and `eta_plus` right of it, joined by a quintic smoothstep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub half_width: f64,
}

impl WeightSpec {
    pub fn new(eta_minus: f64, eta_plus: f64) -> Self {
        WeightSpec {
            eta_minus,
            eta_plus,
            half_width: 1.0,
        }
    }

    pub fn uniform(eta: f64) -> Self {
        WeightSpec::new(eta, eta)
    }

    pub fn is_uniform(&self) -> bool {
        self.eta_minus == self.eta_plus
    }

    pub fn omega_prime(&self, x: f64) -> f64 {
        if self.is_uniform() {
            return self.eta_minus;
        }
        let w = self.half_width;
        if x <= -w {
            self.eta_minus
        } else if x >= w {
            self.eta_plus
        } else {
            let t = (x + w) / (2.0 * w);
            self.eta_minus + (self.eta_plus - self.eta_minus) * smoothstep(t)
        }
    }

    /// Primitive with `omega(0) = 0`; equals `eta x` exactly for uniform weights.
    pub fn omega(&self, x: f64) -> f64 {
        if self.is_uniform() {
            return self.eta_minus * x;
        }
        let w = self.half_width;
        let de = self.eta_plus - self.eta_minus;
        // F(x) = integral from -w, valid on [-w, w]
        let f = |x: f64| {
            let t = (x + w) / (2.0 * w);
            self.eta_minus * (x + w) + de * 2.0 * w * smoothstep_integral(t)
        };
        if x <= -w {
            f(-w.min(w)) - f(0.0) + self.eta_minus * (x + w) - 0.0
        } else if x >= w {
            f(w) - f(0.0) + self.eta_plus * (x - w)
        } else {
            f(x) - f(0.0)
        }
    }
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[inline]
fn smoothstep_integral(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let t4 = t * t * t * t;
    2.5 * t4 - 3.0 * t4 * t + t4 * t * t
}

// ---------------------------------------------------------------------------
// First-order reduction of the eigenvalue problem
// ---------------------------------------------------------------------------

/// The coefficient matrix of the first-order eigenvalue system
/// `U' = (A(x, u(x); lambda) - omega'(x)) U`, bound to a model and a profile.
///
/// Companion-block structure: the first `(k-1) m` rows carry the shift
/// identity; only the last `m` rows depend on `lambda` and the wave, affinely
/// in `lambda`.
#[derive(Clone)]
pub struct FirstOrderField {
    model: ModelSpec,
    interp: Interpolant,
    weight: Option<WeightSpec>,
}

impl FirstOrderField {
    pub fn dim(&self) -> usize {
        self.model.km()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn eval(&self, x: f64, lambda: Complex64) -> CMat {
        let k = self.model.order;
        let m = self.model.dim;
        let km = k * m;
        let mut a = CMat::zeros(km, km);
        for b in 0..k.saturating_sub(1) {
            for r in 0..m {
                a[(b * m + r, (b + 1) * m + r)] = Complex64::new(1.0, 0.0);
            }
        }
        let u = self.interp.eval(x);
        let jac = self.model.nonlin_jac(&u, x);
        let ak_inv = self
            .model
            .alpha(k, x)
            .lu()
            .try_inverse()
            .expect("alpha_k invertible");
        // block (k, 1): alpha_k^{-1} (lambda I - dN)
        let lead = &ak_inv * &jac;
        for r in 0..m {
            for c in 0..m {
                let mut v = Complex64::new(-lead[(r, c)], 0.0);
                v += lambda * Complex64::new(ak_inv[(r, c)], 0.0);
                a[((k - 1) * m + r, c)] = v;
            }
        }
        // blocks (k, j+1): -alpha_k^{-1} alpha_j
        for j in 1..k {
            let blk = &ak_inv * self.model.alpha(j, x);
            for r in 0..m {
                for c in 0..m {
                    a[((k - 1) * m + r, j * m + c)] = Complex64::new(-blk[(r, c)], 0.0);
                }
            }
        }
        if let Some(w) = &self.weight {
            let shift = Complex64::new(w.omega_prime(x), 0.0);
            for i in 0..km {
                a[(i, i)] -= shift;
            }
        }
        a
    }

    /// Real part of the trace, used in Liouville checks.
    pub fn trace_re(&self, x: f64, lambda: Complex64) -> f64 {
        self.eval(x, lambda).trace().re
    }
}

/// First-order reduction of the (optionally weighted) eigenvalue problem
/// along a given wave.
pub fn linearize_first_order(
    model: &ModelSpec,
    profile: &Profile,
    weight: Option<WeightSpec>,
) -> Result<FirstOrderField> {
    if profile.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: profile.dim(),
        });
    }
    Ok(FirstOrderField {
        model: model.clone(),
        interp: profile.interpolant(),
        weight,
    })
}

// ---------------------------------------------------------------------------
// Built-in benchmark models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    ToyRde,
    Klausmeier,
    GpReal,
    GpScalar,
}

impl std::str::FromStr for BuiltinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy_rde" => Ok(BuiltinModel::ToyRde),
            "klausmeier" => Ok(BuiltinModel::Klausmeier),
            "gp_real" => Ok(BuiltinModel::GpReal),
            "gp_scalar" => Ok(BuiltinModel::GpScalar),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl BuiltinModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinModel::ToyRde => "toy_rde",
            BuiltinModel::Klausmeier => "klausmeier",
            BuiltinModel::GpReal => "gp_real",
            BuiltinModel::GpScalar => "gp_scalar",
        }
    }

    pub fn all() -> [BuiltinModel; 4] {
        [
            BuiltinModel::ToyRde,
            BuiltinModel::Klausmeier,
            BuiltinModel::GpReal,
            BuiltinModel::GpScalar,
        ]
    }
}

/// Periodic coefficient functions a built-in model may need.
#[derive(Clone, Default)]
pub struct PotentialSet {
    /// Linear potential V for `toy_rde`, `gp_real`, `gp_scalar`.
    pub v: Option<Potential>,
    /// Advective heterogeneity f for `klausmeier`.
    pub f: Option<Potential>,
    /// Source heterogeneity g for `klausmeier`.
    pub g: Option<Potential>,
}

fn require(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::MissingParameter(key.to_string()))
}

/// Construct one of the four benchmark models.
pub fn build_builtin(
    kind: BuiltinModel,
    params: &BTreeMap<String, f64>,
    pots: &PotentialSet,
) -> Result<ModelSpec> {
    let mut spec = match kind {
        BuiltinModel::ToyRde => {
            let eps = require(params, "eps")?;
            let v = pots
                .v
                .clone()
                .ok_or_else(|| Error::MissingParameter("potential V".to_string()))?;
            let period = v.period();
            let coeff: Vec<CoeffFn> = vec![
                Arc::new(|_| RMat::zeros(1, 1)),
                Arc::new(|_| RMat::identity(1, 1)),
            ];
            let v_n = v.clone();
            let nonlin: NonlinFn = Arc::new(move |u: &RVec, x: f64| {
                RVec::from_element(1, eps * v_n.eval(x) * u[0] - u[0].sin())
            });
            let v_j = v;
            let jac: JacFn = Arc::new(move |u: &RVec, x: f64| {
                RMat::from_element(1, 1, eps * v_j.eval(x) - u[0].cos())
            });
            ModelSpec::new(
                "toy_rde",
                2,
                1,
                period,
                FieldKind::Real,
                coeff,
                nonlin,
                jac,
                params.clone(),
            )?
        }
        BuiltinModel::Klausmeier => {
            let d = require(params, "d")?;
            let a = require(params, "a")?;
            let m = require(params, "m")?;
            let eps = require(params, "eps")?;
            if d <= 0.0 {
                return Err(Error::BadParameter {
                    name: "d".into(),
                    value: d,
                });
            }
            let f = pots
                .f
                .clone()
                .ok_or_else(|| Error::MissingParameter("heterogeneity f".to_string()))?;
            let g = pots
                .g
                .clone()
                .ok_or_else(|| Error::MissingParameter("heterogeneity g".to_string()))?;
            let period = f.period();
            if (g.period() - period).abs() > 1e-12 * period {
                return Err(Error::Invalid("f and g must share one period".into()));
            }
            let f1 = f.clone();
            let coeff: Vec<CoeffFn> = vec![
                Arc::new(move |x: f64| {
                    let mut a1 = RMat::zeros(2, 2);
                    a1[(0, 0)] = eps * f1.eval(x);
                    a1
                }),
                Arc::new(move |_| {
                    let mut a2 = RMat::identity(2, 2);
                    a2[(1, 1)] = d * d;
                    a2
                }),
            ];
            let g_n = g.clone();
            let nonlin: NonlinFn = Arc::new(move |u: &RVec, x: f64| {
                let (w, p) = (u[0], u[1]);
                RVec::from_vec(vec![
                    eps * g_n.eval(x) * w - w - w * p * p + a,
                    -m * p + w * p * p,
                ])
            });
            let g_j = g;
            let jac: JacFn = Arc::new(move |u: &RVec, x: f64| {
                let (w, p) = (u[0], u[1]);
                RMat::from_row_slice(
                    2,
                    2,
                    &[
                        eps * g_j.eval(x) - 1.0 - p * p,
                        -2.0 * w * p,
                        p * p,
                        -m + 2.0 * w * p,
                    ],
                )
            });
            ModelSpec::new(
                "klausmeier",
                2,
                2,
                period,
                FieldKind::Real,
                coeff,
                nonlin,
                jac,
                params.clone(),
            )?
        }
        BuiltinModel::GpScalar | BuiltinModel::GpReal => {
            let kappa = require(params, "kappa")?;
            if kappa != 1.0 && kappa != -1.0 {
                return Err(Error::BadParameter {
                    name: "kappa".into(),
                    value: kappa,
                });
            }
            let mu = require(params, "mu")?;
            let omega = require(params, "omega")?;
            let v = pots
                .v
                .clone()
                .ok_or_else(|| Error::MissingParameter("potential V".to_string()))?;
            let period = v.period();
            if kind == BuiltinModel::GpScalar {
                // -psi'' + (mu V + omega) psi + kappa psi^3 = 0 as a scalar
                // reaction-diffusion system with alpha_2 = -1
                let coeff: Vec<CoeffFn> = vec![
                    Arc::new(|_| RMat::zeros(1, 1)),
                    Arc::new(|_| RMat::from_element(1, 1, -1.0)),
                ];
                let v_n = v.clone();
                let nonlin: NonlinFn = Arc::new(move |u: &RVec, x: f64| {
                    RVec::from_element(
                        1,
                        (mu * v_n.eval(x) + omega) * u[0] + kappa * u[0] * u[0] * u[0],
                    )
                });
                let v_j = v;
                let jac: JacFn = Arc::new(move |u: &RVec, x: f64| {
                    RMat::from_element(1, 1, mu * v_j.eval(x) + omega + 3.0 * kappa * u[0] * u[0])
                });
                ModelSpec::new(
                    "gp_scalar",
                    2,
                    1,
                    period,
                    FieldKind::Real,
                    coeff,
                    nonlin,
                    jac,
                    params.clone(),
                )?
            } else {
                // psi_t = J(-psi'' + (mu V + omega) psi + kappa |psi|^2 psi)
                // in psi = (Re, Im); alpha_2 = -J
                let coeff: Vec<CoeffFn> = vec![
                    Arc::new(|_| RMat::zeros(2, 2)),
                    Arc::new(|_| RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])),
                ];
                let v_n = v.clone();
                let nonlin: NonlinFn = Arc::new(move |u: &RVec, x: f64| {
                    let q = mu * v_n.eval(x) + omega;
                    let norm2 = u[0] * u[0] + u[1] * u[1];
                    let f0 = q * u[0] + kappa * norm2 * u[0];
                    let f1 = q * u[1] + kappa * norm2 * u[1];
                    // J (f0, f1) = (f1, -f0)
                    RVec::from_vec(vec![f1, -f0])
                });
                let v_j = v;
                let jac: JacFn = Arc::new(move |u: &RVec, x: f64| {
                    let q = mu * v_j.eval(x) + omega;
                    let norm2 = u[0] * u[0] + u[1] * u[1];
                    // d(f0,f1)/du then multiplied by J
                    let d00 = q + kappa * (norm2 + 2.0 * u[0] * u[0]);
                    let d01 = kappa * 2.0 * u[0] * u[1];
                    let d10 = kappa * 2.0 * u[1] * u[0];
                    let d11 = q + kappa * (norm2 + 2.0 * u[1] * u[1]);
                    RMat::from_row_slice(2, 2, &[d10, d11, -d00, -d01])
                });
                ModelSpec::new(
                    "gp_real",
                    2,
                    2,
                    period,
                    FieldKind::ComplexAsRealPair,
                    coeff,
                    nonlin,
                    jac,
                    params.clone(),
                )?
            }
        }
    };
    let pots_cl = pots.clone();
    spec.rebuild = Some(Arc::new(move |p: &BTreeMap<String, f64>| {
        build_builtin(kind, p, &pots_cl)
    }));
    Ok(spec)
}

// ---------------------------------------------------------------------------
// JSON model configuration
// ---------------------------------------------------------------------------

/// On-disk model description: name, scalar parameters, and Fourier
/// descriptors for the periodic coefficient functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub potential: Option<FourierSeries>,
    #[serde(default)]
    pub f: Option<FourierSeries>,
    #[serde(default)]
    pub g: Option<FourierSeries>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let kind: BuiltinModel = self.name.parse()?;
        let pots = PotentialSet {
            v: self.potential.clone().map(Potential::Fourier),
            f: self.f.clone().map(Potential::Fourier),
            g: self.g.clone().map(Potential::Fourier),
        };
        build_builtin(kind, &self.params, &pots)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    fn toy(eps: f64) -> ModelSpec {
        let mut p = BTreeMap::new();
        p.insert("eps".to_string(), eps);
        build_builtin(
            BuiltinModel::ToyRde,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, 2.0)),
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn gp(kind: BuiltinModel, kappa: f64, mu: f64, omega: f64) -> ModelSpec {
        let mut p = BTreeMap::new();
        p.insert("kappa".to_string(), kappa);
        p.insert("mu".to_string(), mu);
        p.insert("omega".to_string(), omega);
        build_builtin(
            kind,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, std::f64::consts::PI)),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn builtins_validate() {
        toy(0.0).validate(1).unwrap();
        toy(0.3).validate(2).unwrap();
        gp(BuiltinModel::GpScalar, -1.0, 0.4, 1.0).validate(3).unwrap();
        gp(BuiltinModel::GpReal, 1.0, 0.2, -1.0).validate(4).unwrap();
        let mut p = BTreeMap::new();
        for (k, v) in [("d", 0.04), ("a", 0.5), ("m", 0.4), ("eps", 0.2)] {
            p.insert(k.to_string(), v);
        }
        build_builtin(
            BuiltinModel::Klausmeier,
            &p,
            &PotentialSet {
                f: Some(Potential::Fourier(FourierSeries {
                    constant: 0.0,
                    cos: vec![],
                    sin: vec![0.2],
                    period: std::f64::consts::PI,
                })),
                g: Some(Potential::Fourier(FourierSeries {
                    constant: 0.0,
                    cos: vec![0.4],
                    sin: vec![],
                    period: std::f64::consts::PI,
                })),
                ..Default::default()
            },
        )
        .unwrap()
        .validate(5)
        .unwrap();
    }

    #[test]
    fn unknown_model_and_bad_kappa() {
        assert!(matches!(
            "frobnicator".parse::<BuiltinModel>(),
            Err(Error::UnknownModel(_))
        ));
        let mut p = BTreeMap::new();
        p.insert("kappa".to_string(), 0.5);
        p.insert("mu".to_string(), 0.0);
        p.insert("omega".to_string(), 1.0);
        let err = build_builtin(
            BuiltinModel::GpScalar,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, 1.0)),
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::BadParameter { .. })));
    }

    #[test]
    fn toy_first_order_at_background() {
        // background u = 2 pi k, eps = 0: A(x; lambda) = [[0, 1], [1 + lambda, 0]]
        let model = toy(0.0);
        let g = Grid::line(-5.0, 5.0, 64).unwrap();
        let state = Profile::constant(g, &RVec::from_element(1, 2.0 * std::f64::consts::PI))
            .unwrap();
        let field = linearize_first_order(&model, &state, None).unwrap();
        let lam = Complex64::new(0.7, 0.0);
        let a = field.eval(0.3, lam);
        assert_relative_eq!(a[(0, 1)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a[(1, 0)].re, 1.7, epsilon = 1e-12);
        assert!(a[(0, 0)].norm() < 1e-14 && a[(1, 1)].norm() < 1e-14);

        // uniform weight subtracts eta I
        let wfield =
            linearize_first_order(&model, &state, Some(WeightSpec::uniform(0.25))).unwrap();
        let aw = wfield.eval(0.3, lam);
        assert_relative_eq!(aw[(0, 0)].re, -0.25, epsilon = 1e-14);
        assert_relative_eq!(aw[(1, 1)].re, -0.25, epsilon = 1e-14);
        assert_relative_eq!(aw[(1, 0)].re, 1.7, epsilon = 1e-12);
    }

    #[test]
    fn field_affine_in_lambda_in_last_rows() {
        let model = toy(0.2);
        let g = Grid::line(-5.0, 5.0, 128).unwrap();
        let prof = Profile::from_fn(g, 1, |x| RVec::from_element(1, (x * 0.3).sin())).unwrap();
        let field = linearize_first_order(&model, &prof, None).unwrap();
        let a0 = field.eval(1.1, Complex64::new(0.0, 0.0));
        let a1 = field.eval(1.1, Complex64::new(2.0, 1.0));
        let diff = a1 - a0;
        // only the last m rows change
        for c in 0..2 {
            assert!(diff[(0, c)].norm() < 1e-14);
        }
        assert!((diff[(1, 0)] - Complex64::new(2.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn gp_real_zero_state_block_structure() {
        let model = gp(BuiltinModel::GpReal, -1.0, 0.3, 1.0);
        let g = Grid::line(-5.0, 5.0, 64).unwrap();
        let zero = Profile::constant(g, &RVec::zeros(2)).unwrap();
        let field = linearize_first_order(&model, &zero, None).unwrap();
        let x = 0.4f64;
        let q = 0.3 * (2.0 * x).cos() + 1.0;
        let a = field.eval(x, Complex64::new(0.0, 0.0));
        // bottom-left block must be q I at lambda = 0 (decoupled Schroedinger pair)
        assert_relative_eq!(a[(2, 0)].re, q, epsilon = 1e-12);
        assert_relative_eq!(a[(3, 1)].re, q, epsilon = 1e-12);
        assert!(a[(2, 1)].norm() < 1e-13 && a[(3, 0)].norm() < 1e-13);
        // at lambda != 0 the blocks couple with +-lambda
        let lam = Complex64::new(0.0, 0.5);
        let al = field.eval(x, lam);
        assert!((al[(2, 1)] - lam).norm() < 1e-13);
        assert!((al[(3, 0)] + lam).norm() < 1e-13);
    }

    #[test]
    fn bright_soliton_exact_residual() {
        // kappa = -1, mu = 0, omega = 1: phi = sqrt(2) sech(x)
        let model = gp(BuiltinModel::GpScalar, -1.0, 0.0, 1.0);
        let derivs = |x: f64| {
            let s = 1.0 / x.cosh();
            let t = x.tanh();
            let phi = 2.0f64.sqrt() * s;
            let d1 = -2.0f64.sqrt() * s * t;
            let d2 = 2.0f64.sqrt() * (s - 2.0 * s * s * s);
            vec![
                RVec::from_element(1, phi),
                RVec::from_element(1, d1),
                RVec::from_element(1, d2),
            ]
        };
        for i in 0..400 {
            let x = -8.0 + 16.0 * i as f64 / 399.0;
            let r = model.stationary_residual_exact(derivs, x);
            assert!(r[0].abs() < 1e-10, "residual {} at x = {x}", r[0]);
        }
    }

    #[test]
    fn weight_uniform_is_linear() {
        let w = WeightSpec::uniform(0.7);
        for x in [-3.0, 0.0, 1.2, 10.0] {
            assert_relative_eq!(w.omega(x), 0.7 * x, epsilon = 1e-15);
        }
        let tw = WeightSpec::new(-0.5, 0.8);
        // plateau derivatives
        assert_relative_eq!(tw.omega_prime(-2.0), -0.5, epsilon = 1e-15);
        assert_relative_eq!(tw.omega_prime(3.0), 0.8, epsilon = 1e-15);
        // C1: primitive consistent with derivative by quadrature
        let mut acc = 0.0;
        let n = 20000;
        let (a, b) = (-2.0, 2.0);
        let h = (b - a) / n as f64;
        for i in 0..n {
            let x0 = a + i as f64 * h;
            acc += 0.5 * h * (tw.omega_prime(x0) + tw.omega_prime(x0 + h));
        }
        assert_relative_eq!(tw.omega(b) - tw.omega(a), acc, epsilon = 1e-8);
    }

    #[test]
    fn model_config_json_roundtrip() {
        let text = r#"{
            "name": "toy_rde",
            "params": {"eps": 0.1},
            "potential": {"cos": [1.0], "sin": [], "period": 2.0}
        }"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        let model = cfg.build().unwrap();
        assert_eq!(model.name, "toy_rde");
        assert_eq!(model.period, 2.0);
        model.validate(11).unwrap();
    }
}
