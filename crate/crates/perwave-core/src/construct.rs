//! Multifront gluing and periodic pulse extension: build the formal
//! concatenation or periodic extension of primary waves, correct it to a true
//! solution by Newton iteration, and measure the error decay in the spacing
//! multiplier n.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    discrete_norm, l2_distance, partition_at_crossings, periodic_cutoff, resample, CutoffFamily,
    Grid, NormKind, Profile,
};
use crate::linalg::{RMat, RVec};
use crate::model::ModelSpec;
use crate::solver::{
    localized_sigma_min, solve_localized, solve_periodic_state, BoundaryKind, NewtonOptions,
    SolveReport,
};

/// Threshold on the discrete L2 distance of adjacent end states over one cell.
const MATCHING_TOL: f64 = 1e-8;
/// Nondegeneracy proxy threshold on the primaries' Jacobians.
const SIGMA_MIN_FLOOR: f64 = 1e-6;

/// A gluing plan: M primary waves with matching end states, interface
/// spacing `n` periods, optional per-interface extra offsets (multiples of
/// the coefficient period) and per-primary signs.
#[derive(Clone)]
pub struct GluePlan {
    pub primaries: Vec<Profile>,
    pub n: usize,
    /// Extra interface offsets in multiples of T (pinning allows no other
    /// positions); `None` places interface j at `j n T`.
    pub offsets: Option<Vec<i64>>,
    /// Per-primary sign flips (for odd nonlinearities); `None` means all +1.
    pub signs: Option<Vec<f64>>,
    /// Target grid spacing; `None` inherits the finest primary spacing.
    pub h_target: Option<f64>,
}

impl GluePlan {
    pub fn new(primaries: Vec<Profile>, n: usize) -> Self {
        GluePlan {
            primaries,
            n,
            offsets: None,
            signs: None,
            h_target: None,
        }
    }

    fn sign(&self, j: usize) -> f64 {
        self.signs.as_ref().map_or(1.0, |s| s[j])
    }

    /// Interface position of primary j (0-based), in physical units.
    fn interface(&self, j: usize, t: f64) -> f64 {
        let base = (j as f64 + 1.0) * self.n as f64 * t;
        let off = self.offsets.as_ref().map_or(0, |o| o[j]) as f64 * t;
        base + off
    }
}

/// Result of a gluing or extension run.
#[derive(Debug, Clone)]
pub struct ConstructResult {
    pub profile: Profile,
    /// H^k distance between the corrected solution and the formal ansatz.
    pub err_norm: f64,
    pub report: SolveReport,
    /// Located interface/pulse positions (max-gradient points).
    pub interfaces: Vec<f64>,
    /// Tail norm of the primary outside the cut-off plateau (extension only).
    pub tail_norm: Option<f64>,
}

fn flipped(p: &Profile, sign: f64) -> Profile {
    if sign == 1.0 {
        return p.clone();
    }
    let mut out = p.clone();
    out.values *= sign;
    if let Some(asym) = &p.asymptotics {
        let mut l = (*asym.left).clone();
        l.values *= sign;
        let mut r = (*asym.right).clone();
        r.values *= sign;
        out.asymptotics = Some(crate::grid::Asymptotics {
            left: Arc::new(l),
            right: Arc::new(r),
        });
    }
    out
}

/// State distance over one periodic cell (resampled to a common grid).
fn state_distance(a: &Profile, b: &Profile) -> Result<f64> {
    let grid = if a.grid.n >= b.grid.n {
        a.grid.clone()
    } else {
        b.grid.clone()
    };
    let ra = resample(a, grid.clone())?;
    let rb = resample(b, grid)?;
    Ok(l2_distance(&ra, &rb))
}

/// Realize an M-front solution near the formal concatenation of the plan's
/// primaries, interfaces at `j n T`. Returns the corrected wave and
/// `err_norm = |u_n - w_n|_{H^k}`.
pub fn glue_multifront(
    model: &ModelSpec,
    plan: &GluePlan,
    opts: &NewtonOptions,
) -> Result<ConstructResult> {
    let m_fronts = plan.primaries.len();
    if m_fronts == 0 {
        return Err(Error::Invalid("gluing plan has no primaries".into()));
    }
    if plan.n < 2 {
        return Err(Error::Invalid(format!("spacing multiplier n = {} < 2", plan.n)));
    }
    let t = model.period;
    let primaries: Vec<Profile> = (0..m_fronts)
        .map(|j| flipped(&plan.primaries[j], plan.sign(j)))
        .collect();
    for (j, p) in primaries.iter().enumerate() {
        if p.asymptotics.is_none() {
            return Err(Error::BoundaryInconsistent(format!(
                "primary {j} has no attached end states"
            )));
        }
    }
    // matching condition v_{j,+} = v_{j+1,-}
    for j in 0..m_fronts.saturating_sub(1) {
        let right = &primaries[j].asymptotics.as_ref().unwrap().right;
        let left = &primaries[j + 1].asymptotics.as_ref().unwrap().left;
        let d = state_distance(right, left)?;
        if d > MATCHING_TOL {
            return Err(Error::MatchingConditionViolated {
                left: j,
                right: j + 1,
                distance: d,
            });
        }
    }
    // nondegeneracy proxy on each primary
    for p in &primaries {
        let sigma = localized_sigma_min(model, p, opts.sigma_min_iters)?;
        if sigma < SIGMA_MIN_FLOOR {
            return Err(Error::SingularJacobian { sigma_min: sigma });
        }
    }

    let interfaces: Vec<f64> = (0..m_fronts).map(|j| plan.interface(j, t)).collect();
    for w in interfaces.windows(2) {
        if w[1] - w[0] < 2.0 * t {
            return Err(Error::Invalid(format!(
                "interfaces at {} and {} are too close",
                w[0], w[1]
            )));
        }
    }
    let span = plan.n as f64 * t * 0.5;
    let x_left = interfaces[0] - span;
    let x_right = interfaces[m_fronts - 1] + span;
    let h_target = plan
        .h_target
        .unwrap_or_else(|| primaries.iter().map(|p| p.grid.h()).fold(f64::INFINITY, f64::min));
    let grid = Grid::line_commensurate(x_left, x_right, t, h_target)?;
    // overlap regions (width 2) must resolve on the grid
    if grid.h() > 0.5 {
        return Err(Error::GridTooShort(
            "grid spacing too coarse for the overlap regions".into(),
        ));
    }

    let family: CutoffFamily = if m_fronts == 1 {
        partition_at_crossings(&[])
    } else {
        let crossings: Vec<f64> = interfaces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        partition_at_crossings(&crossings)
    };

    // formal concatenation w_n = sum_j chi_j Z_j(. - p_j)
    let interps: Vec<_> = primaries.iter().map(|p| p.interpolant()).collect();
    let mut w_values = RMat::zeros(model.dim, grid.n);
    for i in 0..grid.n {
        let x = grid.x(i);
        let mut acc = RVec::zeros(model.dim);
        for (j, interp) in interps.iter().enumerate() {
            let chi = family.parts[j].eval(x);
            if chi != 0.0 {
                acc += interp.eval(x - interfaces[j]) * chi;
            }
        }
        w_values.set_column(i, &acc);
    }
    let left_state = primaries[0].asymptotics.as_ref().unwrap().left.clone();
    let right_state = primaries[m_fronts - 1]
        .asymptotics
        .as_ref()
        .unwrap()
        .right
        .clone();
    let w_n = Profile::new(grid.clone(), w_values)?
        .with_asymptotics(left_state, right_state)
        .with_meta(&model.name, &model.params);

    let (solution, report) = match solve_localized(model, &w_n, BoundaryKind::DirichletToStates, opts)
    {
        Ok(ok) => ok,
        Err(Error::NoConvergence {
            iterations,
            last_residual,
            residual_history,
        }) => {
            return Err(Error::Invalid(format!(
                "gluing Newton did not converge at n = {} ({iterations} iterations, residual \
                 {last_residual:.3e}, history {residual_history:?}); a larger n separates the \
                 interfaces further",
                plan.n
            )))
        }
        Err(e) => return Err(e),
    };

    let diff = Profile::new(grid.clone(), &solution.values - &w_n.values)?;
    let err_norm = discrete_norm(&diff, NormKind::Hk(model.order));
    let located = locate_interfaces(&solution, &interfaces, span);
    Ok(ConstructResult {
        profile: solution,
        err_norm,
        report,
        interfaces: located,
        tail_norm: None,
    })
}

/// Max-gradient point within `halfwidth` of each nominal interface position.
pub fn locate_interfaces(profile: &Profile, nominal: &[f64], halfwidth: f64) -> Vec<f64> {
    let grid = &profile.grid;
    nominal
        .iter()
        .map(|&p| {
            let mut best = p;
            let mut best_v = -1.0;
            for i in 1..grid.n - 1 {
                let x = grid.x(i);
                if (x - p).abs() <= halfwidth {
                    let d = (profile.values.column(i + 1) - profile.values.column(i - 1)).norm();
                    if d > best_v {
                        best_v = d;
                        best = x;
                    }
                }
            }
            best
        })
        .collect()
}

/// Periodically extend a nondegenerate pulse `z + v` to an nT-periodic pulse
/// train. Returns the corrected wave, `err_norm = |u_n - w_n|_{H^k_per}`,
/// and the tail norm of `z` outside the cut-off plateau.
pub fn extend_periodic_pulse(
    model: &ModelSpec,
    primary: &Profile,
    n: usize,
    opts: &NewtonOptions,
) -> Result<ConstructResult> {
    let asym = primary
        .asymptotics
        .as_ref()
        .ok_or_else(|| Error::BoundaryInconsistent("pulse has no attached end states".into()))?;
    let d = state_distance(&asym.left, &asym.right)?;
    if d > MATCHING_TOL {
        return Err(Error::NotAPulse(d));
    }
    let t = model.period;
    let h_target = primary.grid.h();
    let grid = Grid::periodic_cell(t, n, h_target)?;
    let family = periodic_cutoff(n, t, &grid)?;
    let chi = &family.parts[0];

    let pulse_interp = primary.interpolant();
    let state_interp = asym.left.interpolant();
    let mut w_values = RMat::zeros(model.dim, grid.n);
    for i in 0..grid.n {
        let x = grid.x(i);
        let v = state_interp.eval(x);
        let z = pulse_interp.eval(x) - &v;
        w_values.set_column(i, &(v + z * chi.eval(x)));
    }
    let w_n = Profile::new(grid.clone(), w_values)?.with_meta(&model.name, &model.params);

    let (solution, report) = solve_periodic_state(model, &w_n, opts)?;
    let diff = Profile::new(grid.clone(), &solution.values - &w_n.values)?;
    let err_norm = discrete_norm(&diff, NormKind::Hk(model.order));

    // tail norm of z outside the plateau (-nT/6, nT/6)
    let plateau = n as f64 * t / 6.0;
    let mut tail_values = RMat::zeros(model.dim, grid.n);
    for i in 0..grid.n {
        let x = grid.x(i);
        if x.abs() >= plateau {
            let z = pulse_interp.eval(x) - state_interp.eval(x);
            tail_values.set_column(i, &z);
        }
    }
    let tail = discrete_norm(
        &Profile::new(grid.clone(), tail_values)?,
        NormKind::Hk(model.order),
    );

    let located = locate_interfaces(&solution, &[0.0], 0.5 * n as f64 * t);
    Ok(ConstructResult {
        profile: solution,
        err_norm,
        report,
        interfaces: located,
        tail_norm: Some(tail),
    })
}

/// One decay-study row.
#[derive(Debug, Clone)]
pub struct DecayRow {
    pub n: usize,
    pub err_norm: f64,
    pub tail_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// rho in err ~ C exp(-rho n T), from least squares on log err.
    pub fitted_rate: f64,
    /// Errors at the numerical noise floor; the fit is unreliable.
    pub saturated: bool,
}

/// Run a construction over increasing n and fit the exponential decay rate
/// of the ansatz error.
pub fn decay_study<B>(builder: B, n_list: &[usize], period: f64) -> Result<DecayTable>
where
    B: Fn(usize) -> Result<ConstructResult> + Sync,
{
    if n_list.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: n_list.len(),
        });
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("n_list must be strictly increasing".into()));
    }
    let results: Vec<(usize, ConstructResult)> = n_list
        .par_iter()
        .map(|&n| builder(n).map(|r| (n, r)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<DecayRow> = results
        .iter()
        .map(|(n, r)| DecayRow {
            n: *n,
            err_norm: r.err_norm,
            tail_norm: r.tail_norm,
        })
        .collect();
    let saturated = rows.iter().any(|r| r.err_norm < 1e-11)
        || rows.windows(2).any(|w| w[1].err_norm >= w[0].err_norm);
    // least squares of log err against n T
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64 * period, r.err_norm.max(1e-300).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(DecayTable {
        rows,
        fitted_rate: -slope,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_builtin, BuiltinModel, PotentialSet};
    use crate::potential::Potential;
    use crate::solver::solve_localized;
    use std::collections::BTreeMap;

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

    /// Solved sine-Gordon front on [-L, L] with constant end states.
    fn solved_front(model: &ModelSpec, l: f64, lo: f64, hi: f64) -> Profile {
        let g = Grid::line_commensurate(-l, l, 2.0, 0.02).unwrap();
        let cell = Grid::periodic(0.0, 2.0, 100).unwrap();
        let left = Arc::new(Profile::constant(cell.clone(), &RVec::from_element(1, lo)).unwrap());
        let right = Arc::new(Profile::constant(cell, &RVec::from_element(1, hi)).unwrap());
        let guess = Profile::from_fn(g, 1, |x| {
            RVec::from_element(1, lo + 4.0 * x.exp().atan() * (hi - lo) / (2.0 * std::f64::consts::PI))
        })
        .unwrap()
        .with_asymptotics(left, right);
        solve_localized(model, &guess, BoundaryKind::DirichletToStates, &NewtonOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn single_front_needs_no_correction() {
        // the eps = 0 front is translationally degenerate; pin it at eps = 0.1
        let model = toy(0.1);
        let front = {
            let f = solved_front(&toy(0.0), 20.0, 0.0, 2.0 * std::f64::consts::PI);
            crate::solver::continue_parameter(&toy(0.0), &f, "eps", &[0.1], &NewtonOptions::default())
                .unwrap()
                .remove(0)
        };
        // the primary pinned somewhere inside one period; the glued interface
        // must land at nT plus that intrinsic offset, within one grid cell
        let own = locate_interfaces(&front, &[0.0], 2.0)[0];
        let plan = GluePlan::new(vec![front], 20);
        let out = glue_multifront(&model, &plan, &NewtonOptions::default()).unwrap();
        assert!(out.err_norm <= 1e-8, "err {}", out.err_norm);
        assert!(
            (out.interfaces[0] - (40.0 + own)).abs() <= out.profile.grid.h() + 1e-12,
            "interface at {} vs expected {}",
            out.interfaces[0],
            40.0 + own
        );
    }

    #[test]
    fn mismatched_end_states_rejected() {
        let model = toy(0.0);
        let a = solved_front(&model, 20.0, 0.0, 2.0 * std::f64::consts::PI);
        let b = solved_front(&model, 20.0, 4.0 * std::f64::consts::PI, 6.0 * std::f64::consts::PI);
        let plan = GluePlan::new(vec![a, b], 6);
        let err = glue_multifront(&model, &plan, &NewtonOptions::default());
        assert!(matches!(err, Err(Error::MatchingConditionViolated { .. })));
    }

    #[test]
    fn two_front_error_decreases_in_n() {
        let model = toy(0.1);
        // pinned fronts at eps = 0.1: continue from the explicit fronts
        let front_a = {
            let f = solved_front(&toy(0.0), 16.0, -2.0 * std::f64::consts::PI, 0.0);
            crate::solver::continue_parameter(&toy(0.0), &f, "eps", &[0.1], &NewtonOptions::default())
                .unwrap()
                .remove(0)
        };
        let front_b = {
            let f = solved_front(&toy(0.0), 16.0, 0.0, 2.0 * std::f64::consts::PI);
            crate::solver::continue_parameter(&toy(0.0), &f, "eps", &[0.1], &NewtonOptions::default())
                .unwrap()
                .remove(0)
        };
        let mut errs = Vec::new();
        for n in [6usize, 8] {
            let plan = GluePlan {
                primaries: vec![front_a.clone(), front_b.clone()],
                n,
                offsets: None,
                signs: None,
                h_target: Some(0.02),
            };
            let out = glue_multifront(&model, &plan, &NewtonOptions::default()).unwrap();
            errs.push(out.err_norm);
        }
        assert!(
            errs[1] < errs[0],
            "err did not decrease: {:?} (expected decay in n)",
            errs
        );
    }

    #[test]
    fn pure_state_extends_with_zero_error() {
        // primary == periodic state (zero pulse part): u_n = v, err ~ 0
        let model = toy(0.1);
        let cell = Grid::periodic(0.0, 2.0, 128).unwrap();
        let guess =
            Profile::constant(cell, &RVec::from_element(1, 2.0 * std::f64::consts::PI)).unwrap();
        let (state, _) = solve_periodic_state(&model, &guess, &NewtonOptions::default()).unwrap();
        let state = Arc::new(state);
        // a "pulse" that is identically the state on a line window
        let g = Grid::line_commensurate(-10.0, 10.0, 2.0, 2.0 / 128.0).unwrap();
        let interp = state.interpolant();
        let flat = Profile::from_fn(g, 1, |x| interp.eval(x))
            .unwrap()
            .with_asymptotics(state.clone(), state.clone());
        let out = extend_periodic_pulse(&model, &flat, 4, &NewtonOptions::default()).unwrap();
        assert!(out.err_norm <= 1e-9, "err {}", out.err_norm);
    }

    #[test]
    fn decay_study_requires_three_points() {
        let err = decay_study(|_| unreachable!(), &[4, 6], 2.0);
        assert!(matches!(
            err,
            Err(Error::InsufficientPoints { needed: 3, got: 2 })
        ));
    }
}
