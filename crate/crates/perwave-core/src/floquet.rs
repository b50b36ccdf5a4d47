//! Monodromy and Floquet analysis of the T-periodic first-order systems at
//! asymptotic states: multipliers, exponents, Morse indices, essential
//! spectrum membership and the absolute spectrum test.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{complex_det, complex_eigenvalues, CMat};
use crate::model::{linearize_first_order, FirstOrderField, ModelSpec, WeightSpec};
use crate::ode::{adaptive_simpson, integrate_matrix};
use crate::grid::Profile;

/// Local integration tolerance for monodromy evolution.
pub const MONODROMY_TOL: f64 = 1e-11;
/// Multipliers this close to the unit circle flag a spectral boundary.
pub const UNIT_CIRCLE_TOL: f64 = 1e-7;

/// Floquet data of a T-periodic first-order system at one spectral point.
#[derive(Debug, Clone)]
pub struct FloquetData {
    pub lambda: Complex64,
    pub monodromy: CMat,
    /// Eigenvalues of the monodromy matrix.
    pub multipliers: Vec<Complex64>,
    /// Principal-log exponents, sorted by real part ascending (ties by
    /// imaginary part ascending).
    pub exponents: Vec<Complex64>,
    /// Number of exponents with negative real part.
    pub morse_index: usize,
    /// min over multipliers of | |rho| - 1 |.
    pub unit_circle_distance: f64,
    pub period: f64,
    pub base_point: f64,
    /// Weight shift eta applied as A - eta I before integration.
    pub weight_shift: f64,
}

impl FloquetData {
    pub fn is_hyperbolic(&self) -> bool {
        self.unit_circle_distance > UNIT_CIRCLE_TOL
    }
}

/// Fundamental solution of `U' = A(x; lambda) U` over `[base, base + period]`.
pub fn monodromy(field: &FirstOrderField, base: f64, period: f64, lambda: Complex64) -> Result<CMat> {
    let km = field.dim();
    let f = |x: f64| field.eval(x, lambda);
    integrate_matrix(&f, base, base + period, CMat::identity(km, km), MONODROMY_TOL)
}

/// Monodromy of the eta-shifted system `U' = (A - eta I) U`.
fn monodromy_shifted(
    field: &FirstOrderField,
    base: f64,
    period: f64,
    lambda: Complex64,
    eta: f64,
) -> Result<CMat> {
    let km = field.dim();
    let f = move |x: f64| {
        let mut a = field.eval(x, lambda);
        if eta != 0.0 {
            for i in 0..km {
                a[(i, i)] -= Complex64::new(eta, 0.0);
            }
        }
        a
    };
    integrate_matrix(&f, base, base + period, CMat::identity(km, km), MONODROMY_TOL)
}

/// Full Floquet data at one spectral point, with optional weight shift.
pub fn floquet_data(
    field: &FirstOrderField,
    base: f64,
    period: f64,
    lambda: Complex64,
    eta: f64,
) -> Result<FloquetData> {
    let m = monodromy_shifted(field, base, period, lambda, eta)?;
    let mut multipliers = complex_eigenvalues(&m)?;
    // defensive residual check: eigenvalues must reproduce the determinant
    let det_from_eigs: Complex64 = multipliers.iter().product();
    let det = complex_det(&m);
    let scale = det.norm().max(1e-300);
    if (det_from_eigs - det).norm() / scale > 1e-6 {
        return Err(Error::LinearSolve(
            "monodromy eigenvalue decomposition inconsistent with determinant".into(),
        ));
    }
    multipliers.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut exponents: Vec<Complex64> = multipliers
        .iter()
        .map(|rho| Complex64::new(rho.norm().ln(), rho.arg()) / period)
        .collect();
    exponents.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    // multipliers hugging the unit circle (non-hyperbolic) are not counted
    let morse_index = multipliers
        .iter()
        .filter(|r| r.norm() < 1.0 - UNIT_CIRCLE_TOL)
        .count();
    let unit_circle_distance = multipliers
        .iter()
        .map(|r| (r.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(FloquetData {
        lambda,
        monodromy: m,
        multipliers,
        exponents,
        morse_index,
        unit_circle_distance,
        period,
        base_point: base,
        weight_shift: eta,
    })
}

/// |det T| vs exp(int Re tr(A - eta)) relative defect (Liouville identity).
pub fn liouville_defect(
    field: &FirstOrderField,
    base: f64,
    period: f64,
    lambda: Complex64,
    eta: f64,
) -> Result<f64> {
    let m = monodromy_shifted(field, base, period, lambda, eta)?;
    let det = complex_det(&m).norm();
    let tr = adaptive_simpson(
        &|x: f64| Complex64::new(field.trace_re(x, lambda) - eta * field.dim() as f64, 0.0),
        base,
        base + period,
        1e-12,
    );
    let expected = tr.re.exp();
    Ok((det - expected).abs() / expected.max(1e-300))
}

/// Outcome of the essential-spectrum membership test at one point.
#[derive(Debug, Clone)]
pub struct EssentialSpectrumResult {
    pub in_spectrum: bool,
    pub morse: (usize, usize),
    /// `l_minus - l_plus` when both ends are hyperbolic.
    pub fredholm_index: Option<i64>,
    pub unit_circle_distance: f64,
}

/// Membership of `lambda` in the essential spectrum determined by the two
/// periodic end states (weighted by `eta_minus`, `eta_plus`).
pub fn essential_spectrum_test(
    model: &ModelSpec,
    end_states: (&Profile, &Profile),
    lambda: Complex64,
    weights: (f64, f64),
) -> Result<EssentialSpectrumResult> {
    let fl = linearize_first_order(model, end_states.0, None)?;
    let fr = linearize_first_order(model, end_states.1, None)?;
    let dl = floquet_data(&fl, end_states.0.grid.start(), model.period, lambda, weights.0)?;
    let dr = floquet_data(&fr, end_states.1.grid.start(), model.period, lambda, weights.1)?;
    let ucd = dl.unit_circle_distance.min(dr.unit_circle_distance);
    let on_circle = ucd <= UNIT_CIRCLE_TOL;
    let morse = (dl.morse_index, dr.morse_index);
    let in_spectrum = on_circle || morse.0 != morse.1;
    let fredholm_index =
        (!on_circle).then(|| morse.0 as i64 - morse.1 as i64);
    Ok(EssentialSpectrumResult {
        in_spectrum,
        morse,
        fredholm_index,
        unit_circle_distance: ucd,
    })
}

/// Absolute-spectrum test: true iff at some junction state the sorted
/// exponent real parts collide at position `l_plus` (1-based).
pub fn absolute_spectrum_test(
    model: &ModelSpec,
    junction_states: &[&Profile],
    lambda: Complex64,
    l_plus: usize,
) -> Result<bool> {
    let km = model.km();
    if l_plus == 0 || l_plus >= km {
        return Err(Error::Invalid(format!(
            "l_plus must lie in 1..{}, got {l_plus}",
            km - 1
        )));
    }
    for state in junction_states {
        let field = linearize_first_order(model, state, None)?;
        let fd = floquet_data(&field, state.grid.start(), model.period, lambda, 0.0)?;
        let gap = fd.exponents[l_plus].re - fd.exponents[l_plus - 1].re;
        if gap.abs() <= UNIT_CIRCLE_TOL {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Search a 1-D grid of weights for one that splits the Floquet exponents of
/// a junction state into `l_plus` stable and `km - l_plus` unstable ones.
///
/// Heuristic companion to the absolute-spectrum test: existence of such a
/// weight is guaranteed off the absolute spectrum, but no constructive choice
/// is available, so failure here is reported rather than fatal.
pub fn find_separating_weight(
    model: &ModelSpec,
    state: &Profile,
    lambda: Complex64,
    l_plus: usize,
    eta_max: f64,
    grid_points: usize,
) -> Result<Option<f64>> {
    let field = linearize_first_order(model, state, None)?;
    for i in 0..grid_points {
        let eta = -eta_max + 2.0 * eta_max * i as f64 / (grid_points - 1).max(1) as f64;
        let fd = floquet_data(&field, state.grid.start(), model.period, lambda, eta)?;
        if fd.morse_index == l_plus && fd.unit_circle_distance > UNIT_CIRCLE_TOL {
            return Ok(Some(eta));
        }
    }
    Ok(None)
}

/// Convenience: Floquet data of a periodic end state under the model's
/// linearization, based at the state's grid origin.
pub fn end_state_floquet(
    model: &ModelSpec,
    state: &Profile,
    lambda: Complex64,
    eta: f64,
) -> Result<FloquetData> {
    let field = linearize_first_order(model, state, None)?;
    floquet_data(&field, state.grid.start(), model.period, lambda, eta)
}

/// Slowest Floquet decay rate `min |Re nu|` of a periodic state at `lambda`,
/// requiring hyperbolicity.
pub fn slowest_decay_rate(model: &ModelSpec, state: &Profile, lambda: Complex64) -> Result<f64> {
    let fd = end_state_floquet(model, state, lambda, 0.0)?;
    if !fd.is_hyperbolic() {
        return Err(Error::NonHyperbolic(fd.unit_circle_distance));
    }
    Ok(fd
        .exponents
        .iter()
        .map(|nu| nu.re.abs())
        .fold(f64::INFINITY, f64::min))
}

/// Weighted linearization field `A(x, v(x); lambda) - eta I` at a state, as a
/// reusable [`FirstOrderField`] (uniform weight).
pub fn weighted_state_field(
    model: &ModelSpec,
    state: &Profile,
    eta: f64,
) -> Result<FirstOrderField> {
    linearize_first_order(model, state, Some(WeightSpec::uniform(eta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::linalg::RVec;
    use crate::model::{build_builtin, BuiltinModel, PotentialSet};
    use crate::potential::Potential;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn toy_state(k: i32, eps: f64) -> (crate::model::ModelSpec, Profile) {
        let mut p = BTreeMap::new();
        p.insert("eps".to_string(), eps);
        let model = build_builtin(
            BuiltinModel::ToyRde,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, 2.0)),
                ..Default::default()
            },
        )
        .unwrap();
        let g = Grid::periodic(0.0, 2.0, 64).unwrap();
        let state =
            Profile::constant(g, &RVec::from_element(1, 2.0 * std::f64::consts::PI * k as f64))
                .unwrap();
        (model, state)
    }

    #[test]
    fn constant_system_multipliers() {
        // exponents +-sqrt(1 + lambda) = +-2 at lambda = 3, T = 2: rho = e^{+-4}
        let (model, state) = toy_state(1, 0.0);
        let field = linearize_first_order(&model, &state, None).unwrap();
        let m = monodromy(&field, 0.0, 2.0, Complex64::new(3.0, 0.0)).unwrap();
        let mut eigs = complex_eigenvalues(&m).unwrap();
        eigs.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        assert_relative_eq!(eigs[0].re, (-4.0f64).exp(), epsilon = 1e-9);
        assert_relative_eq!(eigs[1].re, (4.0f64).exp(), max_relative = 1e-8);
        // Liouville: tr A = 0 here, det T = 1
        assert!((complex_det(&m).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn double_multiplier_at_branch_point() {
        let (model, state) = toy_state(0, 0.0);
        let field = linearize_first_order(&model, &state, None).unwrap();
        let fd = floquet_data(&field, 0.0, 2.0, Complex64::new(-1.0, 0.0), 0.0).unwrap();
        for rho in &fd.multipliers {
            assert!((rho - Complex64::new(1.0, 0.0)).norm() < 1e-7, "rho = {rho}");
        }
        assert!(!fd.is_hyperbolic());
    }

    #[test]
    fn exponents_and_morse_index() {
        let (model, state) = toy_state(0, 0.0);
        let field = linearize_first_order(&model, &state, None).unwrap();
        // lambda = 0: nu = {-1, +1}, l = 1
        let fd = floquet_data(&field, 0.0, 2.0, Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(fd.exponents[0].re, -1.0, epsilon = 1e-9);
        assert_relative_eq!(fd.exponents[1].re, 1.0, epsilon = 1e-9);
        assert_eq!(fd.morse_index, 1);
        // lambda = -5: nu = +-2i up to the principal-log fold; with T = 2 the
        // multipliers are e^{+-4i}, whose principal exponents are -+(pi - 2)i
        let fd2 = floquet_data(&field, 0.0, 2.0, Complex64::new(-5.0, 0.0), 0.0).unwrap();
        assert!(fd2.exponents.iter().all(|nu| nu.re.abs() < 1e-9));
        let fold = std::f64::consts::PI - 2.0;
        assert_relative_eq!(fd2.exponents[0].im, -fold, epsilon = 1e-8);
        assert_relative_eq!(fd2.exponents[1].im, fold, epsilon = 1e-8);
        assert_eq!(fd2.morse_index, 0);
        assert!(fd2.unit_circle_distance < 1e-9);
        // weight shift: exponents shift by -eta
        let fd3 = floquet_data(&field, 0.0, 2.0, Complex64::new(0.0, 0.0), 0.5).unwrap();
        assert_relative_eq!(fd3.exponents[0].re, -1.5, epsilon = 1e-9);
        assert_relative_eq!(fd3.exponents[1].re, 0.5, epsilon = 1e-9);
        assert_eq!(fd3.morse_index, 1);
    }

    #[test]
    fn essential_spectrum_of_toy_background() {
        let (model, state) = toy_state(0, 0.0);
        // sigma(L_0(2 pi k)) = (-inf, -1]
        let r1 = essential_spectrum_test(
            &model,
            (&state, &state),
            Complex64::new(-0.5, 0.0),
            (0.0, 0.0),
        )
        .unwrap();
        assert!(!r1.in_spectrum);
        assert_eq!(r1.morse, (1, 1));
        assert_eq!(r1.fredholm_index, Some(0));
        let r2 = essential_spectrum_test(
            &model,
            (&state, &state),
            Complex64::new(-2.0, 0.0),
            (0.0, 0.0),
        )
        .unwrap();
        assert!(r2.in_spectrum);
        let r3 = essential_spectrum_test(
            &model,
            (&state, &state),
            Complex64::new(-1.0, 0.0),
            (0.0, 0.0),
        )
        .unwrap();
        assert!(r3.in_spectrum);
        assert!(r3.unit_circle_distance <= UNIT_CIRCLE_TOL);
    }

    #[test]
    fn absolute_spectrum_collision() {
        let (model, state) = toy_state(0, 0.0);
        let t = absolute_spectrum_test(&model, &[&state], Complex64::new(-2.0, 0.0), 1).unwrap();
        assert!(t);
        let f = absolute_spectrum_test(&model, &[&state], Complex64::new(0.5, 0.0), 1).unwrap();
        assert!(!f);
        // empty junction list: vacuously false
        let e = absolute_spectrum_test(&model, &[], Complex64::new(-2.0, 0.0), 1).unwrap();
        assert!(!e);
    }

    #[test]
    fn separating_weight_found_off_absolute_spectrum() {
        let (model, state) = toy_state(0, 0.0);
        // lambda = 0.5: exponents +-sqrt(1.5); eta = 0 already splits 1|1
        let eta = find_separating_weight(&model, &state, Complex64::new(0.5, 0.0), 1, 0.8, 9)
            .unwrap();
        assert!(eta.is_some());
        // lambda = -2 lies in the absolute spectrum: the exponents are a
        // purely imaginary pair, so every shift moves both real parts
        // together and no weight splits them 1|1
        let eta2 = find_separating_weight(&model, &state, Complex64::new(-2.0, 0.0), 1, 0.8, 9)
            .unwrap();
        assert!(eta2.is_none());
    }

    #[test]
    fn liouville_identity_weighted() {
        let (model, state) = toy_state(0, 0.1);
        let field = linearize_first_order(&model, &state, None).unwrap();
        for (lam, eta) in [
            (Complex64::new(0.3, 0.2), 0.0),
            (Complex64::new(-0.4, 1.0), 0.3),
        ] {
            let defect = liouville_defect(&field, 0.0, 2.0, lam, eta).unwrap();
            assert!(defect < 1e-8, "defect {defect}");
        }
    }
}
