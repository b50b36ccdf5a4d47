//! Benchmark-model recipes: effective potentials and critical-eigenvalue
//! slopes for the scalar reaction-diffusion model, Melnikov integrals for the
//! Klausmeier system, and Krein-count reports with the multipulse
//! instability case table for the Gross-Pitaevskii equation.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evans::locate_roots;
use crate::grid::{Grid, Profile};
use crate::linalg::{RMat, RVec};
use crate::model::{build_builtin, BuiltinModel, ModelSpec, PotentialSet};
use crate::oracle::{adjoint_kernel, inertia_count, SturmOperator};
use crate::potential::Potential;
use crate::solver::{
    localized_residual_norm, solve_localized, solve_periodic_state, BoundaryKind, NewtonOptions,
};

// ---------------------------------------------------------------------------
// Model and profile builders
// ---------------------------------------------------------------------------

pub fn toy_model(eps: f64, v: &Potential) -> ModelSpec {
    let mut p = BTreeMap::new();
    p.insert("eps".to_string(), eps);
    build_builtin(
        BuiltinModel::ToyRde,
        &p,
        &PotentialSet {
            v: Some(v.clone()),
            ..Default::default()
        },
    )
    .expect("toy model")
}

pub fn gp_scalar_model(kappa: f64, mu: f64, omega: f64, v: &Potential) -> ModelSpec {
    let mut p = BTreeMap::new();
    p.insert("kappa".to_string(), kappa);
    p.insert("mu".to_string(), mu);
    p.insert("omega".to_string(), omega);
    build_builtin(
        BuiltinModel::GpScalar,
        &p,
        &PotentialSet {
            v: Some(v.clone()),
            ..Default::default()
        },
    )
    .expect("gp model")
}

pub fn gp_real_model(kappa: f64, mu: f64, omega: f64, v: &Potential) -> ModelSpec {
    let mut p = BTreeMap::new();
    p.insert("kappa".to_string(), kappa);
    p.insert("mu".to_string(), mu);
    p.insert("omega".to_string(), omega);
    build_builtin(
        BuiltinModel::GpReal,
        &p,
        &PotentialSet {
            v: Some(v.clone()),
            ..Default::default()
        },
    )
    .expect("gp model")
}

pub fn klausmeier_model(d: f64, a: f64, m: f64, eps: f64, f: &Potential, g: &Potential) -> ModelSpec {
    let mut p = BTreeMap::new();
    p.insert("d".to_string(), d);
    p.insert("a".to_string(), a);
    p.insert("m".to_string(), m);
    p.insert("eps".to_string(), eps);
    build_builtin(
        BuiltinModel::Klausmeier,
        &p,
        &PotentialSet {
            f: Some(f.clone()),
            g: Some(g.clone()),
            ..Default::default()
        },
    )
    .expect("klausmeier model")
}

/// Explicit front of the unperturbed scalar model connecting `2 pi k` to
/// `2 pi (k + l)`, shifted by `sigma`.
pub fn sine_gordon_front(grid: Grid, k: i32, l: i32, sigma: f64) -> Result<Profile> {
    assert!(l == 1 || l == -1);
    let base = 2.0 * std::f64::consts::PI * k.min(k + l) as f64;
    Profile::from_fn(grid, 1, |x| {
        RVec::from_element(1, 4.0 * ((l as f64) * (x - sigma)).exp().atan() + base)
    })
}

/// Bright NLS soliton `sqrt(2 omega) sech(sqrt(omega) (x - sigma))`.
pub fn bright_soliton(grid: Grid, omega: f64, sigma: f64) -> Result<Profile> {
    assert!(omega > 0.0);
    Profile::from_fn(grid, 1, |x| {
        RVec::from_element(
            1,
            (2.0 * omega).sqrt() / ((omega.sqrt()) * (x - sigma)).cosh(),
        )
    })
}

/// Black NLS soliton `sqrt(-omega) tanh(sqrt(-omega/2) x)`.
pub fn black_soliton(grid: Grid, omega: f64) -> Result<Profile> {
    assert!(omega < 0.0);
    Profile::from_fn(grid, 1, |x| {
        RVec::from_element(1, (-omega).sqrt() * ((-omega / 2.0).sqrt() * x).tanh())
    })
}

/// Periodic state of a model solved from a constant seed.
pub fn periodic_state_from_constant(
    model: &ModelSpec,
    value: &RVec,
    nodes_per_period: usize,
    opts: &NewtonOptions,
) -> Result<Arc<Profile>> {
    let cell = Grid::periodic(0.0, model.period, nodes_per_period)?;
    let guess = Profile::constant(cell, value)?;
    let (state, _) = solve_periodic_state(model, &guess, opts)?;
    Ok(Arc::new(state))
}

/// Pinned front of the scalar reaction-diffusion model at small eps, seeded
/// by the explicit front shifted to the pinning site.
pub fn toy_pinned_front(
    v: &Potential,
    eps: f64,
    sigma0: f64,
    k: i32,
    l: i32,
    half_length: f64,
    h_target: f64,
    opts: &NewtonOptions,
) -> Result<Profile> {
    let model = toy_model(eps, v);
    let t = model.period;
    let grid = Grid::line_commensurate(sigma0 - half_length, sigma0 + half_length, t, h_target)?;
    let nodes = (t / h_target).round().max(32.0) as usize;
    let two_pi = 2.0 * std::f64::consts::PI;
    let lo = two_pi * k.min(k + l) as f64;
    let hi = two_pi * k.max(k + l) as f64;
    let left_val = if l > 0 { lo } else { hi };
    let right_val = if l > 0 { hi } else { lo };
    let left = periodic_state_from_constant(&model, &RVec::from_element(1, left_val), nodes, opts)?;
    let right =
        periodic_state_from_constant(&model, &RVec::from_element(1, right_val), nodes, opts)?;
    let guess = sine_gordon_front(grid, k, l, sigma0)?.with_asymptotics(left, right);
    let (front, report) = solve_localized(&model, &guess, BoundaryKind::DirichletToStates, opts)?;
    if report.wandered {
        return Err(Error::Invalid(format!(
            "front wandered away from the pinning site {sigma0}"
        )));
    }
    Ok(front)
}

/// Pinned pulse of the focusing GP equation at potential strength mu, seeded
/// by the bright soliton at the pinning site. End states are the trivial
/// solution.
pub fn gp_pinned_pulse(
    v: &Potential,
    mu: f64,
    omega: f64,
    sigma0: f64,
    half_length: f64,
    h_target: f64,
    opts: &NewtonOptions,
) -> Result<Profile> {
    let model = gp_scalar_model(-1.0, mu, omega, v);
    let t = model.period;
    let grid = Grid::line_commensurate(sigma0 - half_length, sigma0 + half_length, t, h_target)?;
    let nodes = (t / h_target).round().max(32.0) as usize;
    let zero = Arc::new(Profile::constant(
        Grid::periodic(0.0, t, nodes)?,
        &RVec::zeros(1),
    )?);
    let guess = bright_soliton(grid, omega, sigma0)?.with_asymptotics(zero.clone(), zero);
    let (pulse, _) = solve_localized(&model, &guess, BoundaryKind::DirichletToStates, opts)?;
    Ok(pulse)
}

/// Lift a scalar GP profile to the 2-component real system `(psi, 0)`.
pub fn lift_to_gp_real(profile: &Profile) -> Result<Profile> {
    let lift_values = |p: &Profile| -> RMat {
        let mut v = RMat::zeros(2, p.grid.n);
        v.row_mut(0).copy_from(&p.values.row(0));
        v
    };
    let mut out = Profile::new(profile.grid.clone(), lift_values(profile))?;
    if let Some(asym) = &profile.asymptotics {
        let lift_state = |s: &Profile| -> Result<Arc<Profile>> {
            Ok(Arc::new(Profile::new(s.grid.clone(), lift_values(s))?))
        };
        out = out.with_asymptotics(lift_state(&asym.left)?, lift_state(&asym.right)?);
    }
    out.meta = profile.meta.clone();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Quadrature helpers
// ---------------------------------------------------------------------------

/// Composite Simpson over a uniform sample vector (trapezoid closure on the
/// last interval when the count is even).
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return values.iter().sum::<f64>() * h;
    }
    let pairs = (n - 1) / 2;
    let mut acc = 0.0;
    for p in 0..pairs {
        let i = 2 * p;
        acc += (values[i] + 4.0 * values[i + 1] + values[i + 2]) * h / 3.0;
    }
    if (n - 1) % 2 == 1 {
        acc += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    acc
}

/// Fourth-order centered derivative samples of a single-component profile.
fn derivative_samples(p: &Profile) -> Vec<f64> {
    let n = p.grid.n;
    let h = p.grid.h();
    let v = |i: i64| -> f64 {
        if p.grid.is_periodic() {
            p.values[(0, i.rem_euclid(n as i64) as usize)]
        } else {
            p.values[(0, i.clamp(0, n as i64 - 1) as usize)]
        }
    };
    (0..n as i64)
        .map(|i| (-v(i + 2) + 8.0 * v(i + 1) - 8.0 * v(i - 1) + v(i - 2)) / (12.0 * h))
        .collect()
}

// ---------------------------------------------------------------------------
// Effective potential (toy model)
// ---------------------------------------------------------------------------

/// Effective potential of a front against a periodic potential, on a grid of
/// shifts over one period, with located simple zeros of its derivative.
#[derive(Debug, Clone)]
pub struct EffectivePotentialTable {
    pub sigma: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Located zeros of V_eff' with the second-derivative margin.
    pub zeros: Vec<(f64, f64)>,
}

impl EffectivePotentialTable {
    /// Stable pinning sites have `eps * V_eff'(sigma0) > 0` slope criterion;
    /// with the located zero this means V_eff'' decides the side.
    pub fn stable_zero(&self) -> Option<f64> {
        self.zeros.iter().find(|(_, dd)| *dd > 0.0).map(|(z, _)| *z)
    }

    pub fn unstable_zero(&self) -> Option<f64> {
        self.zeros.iter().find(|(_, dd)| *dd < 0.0).map(|(z, _)| *z)
    }
}

/// `V_eff(s) = integral V(x + s) u(x) u'(x) dx` over one period of shifts.
pub fn effective_potential_toy(v: &Potential, front: &Profile) -> Result<EffectivePotentialTable> {
    let t = v.period();
    let n_sigma = 257;
    let h = front.grid.h();
    let du = derivative_samples(front);
    let uu: Vec<f64> = (0..front.grid.n)
        .map(|i| front.values[(0, i)] * du[i])
        .collect();
    let integral = |f: &dyn Fn(f64) -> f64| -> f64 {
        let samples: Vec<f64> = (0..front.grid.n)
            .map(|i| f(front.grid.x(i)) * uu[i])
            .collect();
        simpson(&samples, h)
    };
    let veff = |s: f64| integral(&|x| v.eval(x + s));
    let dveff = |s: f64| integral(&|x| v.deriv(x + s));
    let ddveff = |s: f64| integral(&|x| v.second_deriv(x + s));
    let sigma: Vec<f64> = (0..n_sigma).map(|i| t * i as f64 / (n_sigma - 1) as f64).collect();
    let values: Vec<f64> = sigma.iter().map(|&s| veff(s)).collect();
    let derivative: Vec<f64> = sigma.iter().map(|&s| dveff(s)).collect();
    // bisection on sign changes of V_eff'
    let mut zeros = Vec::new();
    for i in 0..n_sigma - 1 {
        let (fa, fb) = (derivative[i], derivative[i + 1]);
        if fa == 0.0 {
            zeros.push((sigma[i], ddveff(sigma[i])));
        } else if fa * fb < 0.0 {
            let (mut a, mut b) = (sigma[i], sigma[i + 1]);
            let mut fa = fa;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = dveff(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            let z = 0.5 * (a + b);
            zeros.push((z, ddveff(z)));
        }
    }
    Ok(EffectivePotentialTable {
        sigma,
        values,
        derivative,
        zeros,
    })
}

/// Defect of the integration-by-parts identity
/// `int V(x+s) u u' = 1/2 [V(x+s) u^2]_a^b - 1/2 int V'(x+s) u^2`,
/// both sides by quadrature (identical up to quadrature error).
pub fn effective_potential_ibp_defect(v: &Potential, front: &Profile, s: f64) -> f64 {
    let h = front.grid.h();
    let n = front.grid.n;
    let du = derivative_samples(front);
    let lhs_samples: Vec<f64> = (0..n)
        .map(|i| v.eval(front.grid.x(i) + s) * front.values[(0, i)] * du[i])
        .collect();
    let lhs = simpson(&lhs_samples, h);
    let rhs_samples: Vec<f64> = (0..n)
        .map(|i| {
            let u = front.values[(0, i)];
            v.deriv(front.grid.x(i) + s) * u * u
        })
        .collect();
    let boundary = if front.grid.is_periodic() {
        0.0
    } else {
        let ua = front.values[(0, 0)];
        let ub = front.values[(0, n - 1)];
        0.5 * (v.eval(front.grid.x(n - 1) + s) * ub * ub - v.eval(front.grid.x(0) + s) * ua * ua)
    };
    let rhs = boundary - 0.5 * simpson(&rhs_samples, h);
    (lhs - rhs).abs()
}

/// Pinning integral `int V'(x) psi(x) psi'(x) dx` of a wave against the
/// potential (the quantity whose nonvanishing pins GP fronts).
pub fn pinning_integral(v: &Potential, profile: &Profile) -> f64 {
    let h = profile.grid.h();
    let du = derivative_samples(profile);
    let samples: Vec<f64> = (0..profile.grid.n)
        .map(|i| v.deriv(profile.grid.x(i)) * profile.values[(0, i)] * du[i])
        .collect();
    simpson(&samples, h)
}

// ---------------------------------------------------------------------------
// Critical-eigenvalue slope (toy model)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub measured_slope: f64,
    pub predicted_slope: f64,
    pub rel_error: f64,
    /// (eps, lambda_0) samples.
    pub samples: Vec<(f64, f64)>,
}

/// Sine-Gordon front H1-derivative mass: `int (u')^2 = int 4 sech^2 = 8`.
pub const SINE_GORDON_DERIV_MASS: f64 = 8.0;

/// Pin the front at a located zero of V_eff', track the critical eigenvalue
/// over a list of eps values with the Evans function, and fit the slope
/// `lambda_0(eps) = s eps + O(eps^2)` through the origin.
pub fn lambda0_slope_toy(
    v: &Potential,
    sigma0: f64,
    eps_list: &[f64],
    opts: &NewtonOptions,
) -> Result<SlopeReport> {
    if eps_list.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: eps_list.len(),
        });
    }
    let half_length = 20.0;
    let h_target = 0.01;
    // predicted slope from the unperturbed front
    let grid0 = Grid::line_commensurate(-half_length, half_length, v.period(), h_target)?;
    let front0 = sine_gordon_front(grid0, 0, 1, 0.0)?;
    let table = effective_potential_toy(v, &front0)?;
    let dveff = interpolate_derivative(&table, sigma0);
    let predicted_slope = -dveff / SINE_GORDON_DERIV_MASS;

    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let front = toy_pinned_front(v, eps, sigma0, 0, 1, half_length, h_target, opts)?;
        let model = toy_model(eps, v);
        let eval = |z: Complex64| crate::evans::evans_line(&model, &front, z, None).map(|e| e.value);
        let roots = locate_roots(&eval, Complex64::new(0.0, 0.0), 0.3, Some(1))?;
        let lam = roots[0].0;
        if lam.im.abs() > 1e-6 {
            return Err(Error::Invalid(format!(
                "critical eigenvalue not real: {lam}"
            )));
        }
        samples.push((eps, lam.re));
    }
    // least squares for lambda = s eps + c eps^2 (through the origin)
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(e, l) in &samples {
        s11 += e * e;
        s12 += e * e * e;
        s22 += e * e * e * e;
        b1 += e * l;
        b2 += e * e * l;
    }
    let det = s11 * s22 - s12 * s12;
    let measured_slope = (b1 * s22 - b2 * s12) / det;
    let rel_error = (measured_slope - predicted_slope).abs() / predicted_slope.abs().max(1e-300);
    Ok(SlopeReport {
        measured_slope,
        predicted_slope,
        rel_error,
        samples,
    })
}

fn interpolate_derivative(table: &EffectivePotentialTable, s: f64) -> f64 {
    // derivative samples are dense; linear interpolation suffices between them
    let t = table.sigma.last().unwrap() - table.sigma[0];
    let pos = (s - table.sigma[0]).rem_euclid(t);
    let step = table.sigma[1] - table.sigma[0];
    let i = ((pos / step).floor() as usize).min(table.sigma.len() - 2);
    let w = (pos - i as f64 * step) / step;
    table.derivative[i] * (1.0 - w) + table.derivative[i + 1] * w
}

// ---------------------------------------------------------------------------
// Melnikov integral (Klausmeier)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MelnikovReport {
    pub integral: f64,
    /// Leading-order slope of the critical eigenvalue: `lambda_0 ~ -eps M`.
    pub predicted_slope: f64,
}

/// Singular-perturbation seed for the unperturbed Klausmeier pulse: a fast
/// `sech^2` vegetation spike over a slow water dip. `upper_branch` selects
/// the root of the matching condition for the water level at the spike.
pub fn klausmeier_pulse_seed(
    d: f64,
    a: f64,
    m: f64,
    grid: Grid,
    upper_branch: bool,
) -> Result<Profile> {
    let disc = a * a - 12.0 * d * m.powf(1.5);
    if disc <= 0.0 {
        return Err(Error::Invalid(
            "no singular-perturbation pulse at these parameters".into(),
        ));
    }
    let w0 = if upper_branch {
        0.5 * (a + disc.sqrt())
    } else {
        0.5 * (a - disc.sqrt())
    };
    let bmatch = 0.5 * (a - w0); // w = a - B e^{-|x|} with w(0) = w0
    Profile::from_fn(grid, 2, |x| {
        let w = a - (a - w0) * (-x.abs()).exp();
        let p = (3.0 * m / (2.0 * w0)) / ((m.sqrt() * x / (2.0 * d)).cosh().powi(2));
        let _ = bmatch;
        RVec::from_vec(vec![w, p])
    })
}

/// Melnikov pairing of the heterogeneities with the translational adjoint
/// mode of an unperturbed pulse; the adjoint kernel comes from the dense
/// oracle, normalized so `<d_x u_0, Psi_ad> = 1`.
pub fn melnikov_klausmeier(
    model: &ModelSpec,
    f: &Potential,
    g: &Potential,
    pulse: &Profile,
) -> Result<MelnikovReport> {
    let resid = localized_residual_norm(model, pulse)?;
    if resid > 1e-6 {
        return Err(Error::Invalid(format!(
            "pulse does not solve the unperturbed problem (residual {resid:.3e})"
        )));
    }
    let psi = adjoint_kernel(model, pulse)?;
    let h = pulse.grid.h();
    let n = pulse.grid.n;
    let s = model.order.div_ceil(2);
    let mut samples = Vec::with_capacity(n - 2 * s);
    for i in 0..n - 2 * s {
        let node = i + s;
        let x = pulse.grid.x(node);
        let du1 =
            (pulse.values[(0, node + 1)] - pulse.values[(0, node - 1)]) / (2.0 * h);
        let u1 = pulse.values[(0, node)];
        samples.push((f.deriv(x) * du1 + g.deriv(x) * u1) * psi[i][0]);
    }
    let integral = simpson(&samples, h);
    Ok(MelnikovReport {
        integral,
        predicted_slope: -integral,
    })
}

// ---------------------------------------------------------------------------
// GP Krein counts and the multipulse case table
// ---------------------------------------------------------------------------

/// Inertia counts, frequency slope and structural flags of a real GP wave.
#[derive(Debug, Clone)]
pub struct KreinReport {
    pub n_plus: usize,
    pub z_plus: usize,
    pub n_minus: usize,
    pub z_minus: usize,
    /// `<d_omega psi~, psi>` computed from one linear solve
    /// `L_+ w = -psi`.
    pub slope: f64,
    pub zero_count: usize,
    pub profile_even: bool,
    pub profile_odd: bool,
    pub potential_even: bool,
}

/// Krein bookkeeping of a real stationary GP wave on its own domain
/// (periodic cell or truncated line with Dirichlet ends).
pub fn gp_krein_report(model: &ModelSpec, profile: &Profile, v: &Potential) -> Result<KreinReport> {
    if profile.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: profile.dim(),
        });
    }
    let kappa = model.params["kappa"];
    let mu = model.params["mu"];
    let omega = model.params["omega"];
    let grid = profile.grid.clone();
    let offset = if grid.is_periodic() { 0 } else { 1 };
    let q_of = |factor: f64| -> RVec {
        let len = if grid.is_periodic() { grid.n } else { grid.n - 2 };
        RVec::from_fn(len, |i, _| {
            let node = i + offset;
            let x = grid.x(node);
            let psi = profile.values[(0, node)];
            mu * v.eval(x) + omega + factor * kappa * psi * psi
        })
    };
    let l_plus = SturmOperator::new(grid.clone(), q_of(3.0))?;
    let l_minus = SturmOperator::new(grid.clone(), q_of(1.0))?;
    let cp = inertia_count(&l_plus, 0.0)?;
    let cm = inertia_count(&l_minus, 0.0)?;
    if cp.z_at != 0 {
        return Err(Error::LPlusSingular);
    }
    // slope <d_omega psi~, psi> from L_+ w = -psi
    let len = if grid.is_periodic() { grid.n } else { grid.n - 2 };
    let rhs = RVec::from_fn(len, |i, _| -profile.values[(0, i + offset)]);
    let w = l_plus.solve_shifted(0.0, &rhs)?;
    let h = grid.h();
    let slope = (0..len).map(|i| w[i] * profile.values[(0, i + offset)]).sum::<f64>() * h;

    // zero count with a dead band against tangencies
    let amp = profile.values.amax();
    let band = 1e-9 * amp;
    let mut zero_count = 0;
    let mut last_sign = 0i8;
    for i in 0..grid.n {
        let val = profile.values[(0, i)];
        if val.abs() <= band {
            continue;
        }
        let sign = if val > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            zero_count += 1;
        }
        last_sign = sign;
    }

    // parity about the grid center
    let center = 0.5 * (grid.start() + grid.end());
    let interp = profile.interpolant();
    let mut even_defect = 0.0f64;
    let mut odd_defect = 0.0f64;
    let probe = 64;
    for i in 0..probe {
        let dx = (grid.end() - center) * (i as f64 + 0.5) / probe as f64;
        let p = interp.eval(center + dx)[0];
        let q = interp.eval(center - dx)[0];
        even_defect = even_defect.max((p - q).abs());
        odd_defect = odd_defect.max((p + q).abs());
    }
    let tol = 1e-6 * amp.max(1e-12);
    let mut v_even = true;
    for i in 0..probe {
        let x = v.period() * i as f64 / probe as f64;
        if (v.eval(x) - v.eval(-x)).abs() > 1e-10 * (1.0 + v.eval(x).abs()) {
            v_even = false;
            break;
        }
    }
    Ok(KreinReport {
        n_plus: cp.n_below,
        z_plus: cp.z_at,
        n_minus: cm.n_below,
        z_minus: cm.z_at,
        slope,
        zero_count,
        profile_even: even_defect <= tol,
        profile_odd: odd_defect <= tol,
        potential_even: v_even,
    })
}

/// Verdict of the multipulse instability case table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MultipulseVerdict {
    UnstableNegativeSlope,
    UnstableCaseI,
    UnstableCaseII,
    UnstableCaseIII,
    UnstableCaseIV,
    UnstableCaseV,
    StableCandidate,
    Inconclusive,
}

impl MultipulseVerdict {
    pub fn is_unstable(&self) -> bool {
        !matches!(
            self,
            MultipulseVerdict::StableCandidate | MultipulseVerdict::Inconclusive
        )
    }
}

/// Apply the instability case table to an M-pulse Krein report:
/// (i) nodeless; (ii) M = 2m with 2l zeros; (iii) odd profile, even V,
/// M = 2m, 2l+1 zeros, m+l even; (iv) even profile and V, M = 2m+1,
/// 2l zeros, m+l odd; (v) M = 2m+1 with 2l+1 zeros. A negative frequency
/// slope is unstable outright.
pub fn classify_gp_multipulse(report: &KreinReport, m_pulses: usize) -> MultipulseVerdict {
    if report.slope < 0.0 {
        return MultipulseVerdict::UnstableNegativeSlope;
    }
    let zeros = report.zero_count;
    let m_even = m_pulses % 2 == 0;
    let half_m = m_pulses / 2; // m in M = 2m or M = 2m+1
    if m_pulses < 2 {
        // the case table is a multipulse statement; a single pulse can only
        // be a stability candidate
        if report.slope > 0.0
            && report.n_plus == 1
            && report.z_plus == 0
            && report.n_minus == 0
            && report.z_minus == 1
        {
            return MultipulseVerdict::StableCandidate;
        }
        return MultipulseVerdict::Inconclusive;
    }
    if zeros == 0 {
        return MultipulseVerdict::UnstableCaseI;
    }
    if m_even && zeros % 2 == 0 && zeros >= 2 {
        return MultipulseVerdict::UnstableCaseII;
    }
    if m_even && zeros % 2 == 1 && report.profile_odd && report.potential_even {
        let l = zeros / 2;
        if (half_m + l) % 2 == 0 {
            return MultipulseVerdict::UnstableCaseIII;
        }
    }
    if !m_even && m_pulses >= 3 && zeros % 2 == 0 && zeros >= 2 && report.profile_even
        && report.potential_even
    {
        let l = zeros / 2;
        if (half_m + l) % 2 == 1 {
            return MultipulseVerdict::UnstableCaseIV;
        }
    }
    if !m_even && m_pulses >= 3 && zeros % 2 == 1 {
        return MultipulseVerdict::UnstableCaseV;
    }
    // the co-periodic stability pattern of a single pulse
    if report.slope > 0.0
        && report.n_plus == 1
        && report.z_plus == 0
        && report.n_minus == 0
        && report.z_minus == 1
    {
        return MultipulseVerdict::StableCandidate;
    }
    MultipulseVerdict::Inconclusive
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn effective_potential_constant_v_is_flat() {
        let v = Potential::constant(0.7, 2.0);
        let g = Grid::line_commensurate(-20.0, 20.0, 2.0, 0.01).unwrap();
        let front = sine_gordon_front(g, 0, 1, 0.0).unwrap();
        let table = effective_potential_toy(&v, &front).unwrap();
        let spread = table
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        assert!(spread.1 - spread.0 < 1e-12);
        assert!(table.derivative.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn effective_potential_periodicity_and_zeros() {
        let v = Potential::cosine(1.0, 2.0);
        let g = Grid::line_commensurate(-20.0, 20.0, 2.0, 0.01).unwrap();
        let front = sine_gordon_front(g, 0, 1, 0.0).unwrap();
        let table = effective_potential_toy(&v, &front).unwrap();
        assert_relative_eq!(
            table.values[0],
            *table.values.last().unwrap(),
            epsilon = 1e-10
        );
        // two simple zeros of V_eff' per period, one of each stability
        assert_eq!(table.zeros.len(), 2, "zeros: {:?}", table.zeros);
        assert!(table.stable_zero().is_some());
        assert!(table.unstable_zero().is_some());
    }

    #[test]
    fn ibp_identity_with_boundary_term() {
        let v = Potential::cosine(1.0, 2.0);
        let g = Grid::line_commensurate(-20.0, 20.0, 2.0, 0.005).unwrap();
        let front = sine_gordon_front(g, 0, 1, 0.0).unwrap();
        for s in [0.0, 0.37, 1.2] {
            let defect = effective_potential_ibp_defect(&v, &front, s);
            assert!(defect < 1e-8, "defect {defect} at shift {s}");
        }
    }

    #[test]
    fn gp_pinning_integral_closed_form() {
        // V = cos(2x), omega = -1: integral = -8 pi / sinh(sqrt(2) pi)
        let v = Potential::cosine(1.0, std::f64::consts::PI);
        let g = Grid::line_commensurate(-30.0, 30.0, std::f64::consts::PI, 0.005).unwrap();
        let psi0 = black_soliton(g, -1.0).unwrap();
        let got = pinning_integral(&v, &psi0);
        let want = -8.0 * std::f64::consts::PI / (2.0f64.sqrt() * std::f64::consts::PI).sinh();
        assert_relative_eq!(got, want, max_relative = 1e-6);
        assert_relative_eq!(want, -0.5914, max_relative = 1e-3);
    }

    #[test]
    fn bright_soliton_slope_formula() {
        // mu = 0: <d_omega psi~, psi> = 1 / sqrt(omega)
        for omega in [1.0, 4.0] {
            let v = Potential::cosine(1.0, std::f64::consts::PI);
            let model = gp_scalar_model(-1.0, 0.0, omega, &v);
            let g = Grid::line(-20.0, 20.0, 8001).unwrap();
            let zero = Arc::new(
                Profile::constant(
                    Grid::periodic(0.0, std::f64::consts::PI, 64).unwrap(),
                    &RVec::zeros(1),
                )
                .unwrap(),
            );
            let seed = bright_soliton(g, omega, 0.0)
                .unwrap()
                .with_asymptotics(zero.clone(), zero);
            // the discrete solve makes psi an exact discrete kernel of L_-
            let (psi, _) = solve_localized(
                &model,
                &seed,
                BoundaryKind::DirichletToStates,
                &NewtonOptions::default(),
            )
            .unwrap();
            let report = gp_krein_report(&model, &psi, &v).unwrap();
            assert_relative_eq!(report.slope, 1.0 / omega.sqrt(), max_relative = 2e-5);
            // n_plus is 1 or 2 here: at mu = 0 the translational direction is
            // a discrete near-kernel whose O(h^2) shift has indefinite sign
            assert!(report.n_plus == 1 || report.n_plus == 2);
            assert_eq!(report.n_minus, 0);
            assert_eq!(report.z_minus, 1);
            assert_eq!(report.zero_count, 0);
            assert!(report.profile_even);
        }
    }

    #[test]
    fn case_table_matches_examples() {
        let base = KreinReport {
            n_plus: 2,
            z_plus: 0,
            n_minus: 0,
            z_minus: 1,
            slope: 1.0,
            zero_count: 0,
            profile_even: true,
            profile_odd: false,
            potential_even: true,
        };
        // nodeless 2-pulse
        assert_eq!(
            classify_gp_multipulse(&base, 2),
            MultipulseVerdict::UnstableCaseI
        );
        // 3-pulse with one zero
        let mut r = base.clone();
        r.n_plus = 3;
        r.n_minus = 1;
        r.zero_count = 1;
        assert_eq!(classify_gp_multipulse(&r, 3), MultipulseVerdict::UnstableCaseV);
        // odd 2-pulse with one zero, m + l odd: no case fires
        let mut r2 = base.clone();
        r2.zero_count = 1;
        r2.profile_even = false;
        r2.profile_odd = true;
        r2.n_minus = 1;
        assert_eq!(classify_gp_multipulse(&r2, 2), MultipulseVerdict::Inconclusive);
        // negative slope is always unstable
        let mut r3 = base.clone();
        r3.slope = -0.3;
        assert_eq!(
            classify_gp_multipulse(&r3, 2),
            MultipulseVerdict::UnstableNegativeSlope
        );
        // single-pulse stability pattern
        let mut r4 = base;
        r4.n_plus = 1;
        assert_eq!(classify_gp_multipulse(&r4, 1), MultipulseVerdict::StableCandidate);
    }

    #[test]
    fn melnikov_vanishes_for_constant_heterogeneities() {
        let per = std::f64::consts::PI;
        let f = Potential::constant(0.3, per);
        let g = Potential::constant(0.1, per);
        let (d, a, m) = (0.04, 0.5, 0.4);
        let model = klausmeier_model(d, a, m, 0.0, &f, &g);
        let grid = Grid::line_commensurate(-8.0, 8.0, per, 0.008).unwrap();
        let seed = klausmeier_pulse_seed(d, a, m, grid, true).unwrap();
        let state = Arc::new(
            Profile::constant(
                Grid::periodic(0.0, per, 64).unwrap(),
                &RVec::from_vec(vec![a, 0.0]),
            )
            .unwrap(),
        );
        let seed = seed.with_asymptotics(state.clone(), state);
        let opts = NewtonOptions {
            abs_tol: 1e-9, // residual floor of the stiff fast-slow system
            ..Default::default()
        };
        let (pulse, _) =
            solve_localized(&model, &seed, BoundaryKind::DirichletToStates, &opts).unwrap();
        let report = melnikov_klausmeier(&model, &f, &g, &pulse).unwrap();
        assert!(
            report.integral.abs() < 1e-8,
            "constant heterogeneities must give M = 0, got {}",
            report.integral
        );
    }

    #[test]
    fn melnikov_even_integrand_nonzero() {
        // f odd, g even, pulse even: integrand even, M generically nonzero
        let per = std::f64::consts::PI;
        let f = Potential::Fourier(crate::potential::FourierSeries {
            constant: 0.0,
            cos: vec![],
            sin: vec![0.2],
            period: per,
        });
        let g = Potential::Fourier(crate::potential::FourierSeries {
            constant: 0.0,
            cos: vec![0.4],
            sin: vec![],
            period: per,
        });
        let (d, a, m) = (0.04, 0.5, 0.4);
        let model = klausmeier_model(d, a, m, 0.0, &f, &g);
        let grid = Grid::line_commensurate(-8.0, 8.0, per, 0.008).unwrap();
        let seed = klausmeier_pulse_seed(d, a, m, grid, true).unwrap();
        let state = Arc::new(
            Profile::constant(
                Grid::periodic(0.0, per, 64).unwrap(),
                &RVec::from_vec(vec![a, 0.0]),
            )
            .unwrap(),
        );
        let seed = seed.with_asymptotics(state.clone(), state);
        let opts = NewtonOptions {
            abs_tol: 1e-9,
            ..Default::default()
        };
        let (pulse, _) =
            solve_localized(&model, &seed, BoundaryKind::DirichletToStates, &opts).unwrap();
        let report = melnikov_klausmeier(&model, &f, &g, &pulse).unwrap();
        assert!(
            report.integral.abs() > 1e-4,
            "expected a nonzero Melnikov integral, got {}",
            report.integral
        );
    }
}
