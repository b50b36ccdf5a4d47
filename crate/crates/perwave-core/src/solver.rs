//! Damped Newton solvers for the stationary equation `A u + N(u, .) = 0` on
//! periodic cells and truncated lines, plus natural parameter continuation.
//!
//! Spatial discretization is second-order central finite differences for all
//! derivative orders, assembled as a banded Jacobian (periodic wrap corners
//! are carried as a low-rank correction and solved by the Woodbury identity).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, Interpolant, Profile};
use crate::linalg::{
    band_smallest_singular_value, BandMatrix, FactoredSystem, LowRankUpdatedLu, RMat, RVec,
};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Absolute tolerance on the discrete L2 residual.
    pub abs_tol: f64,
    pub backtrack_factor: f64,
    pub min_step: f64,
    /// Iterations of inverse power iteration for the sigma_min report.
    pub sigma_min_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 50,
            abs_tol: 1e-10,
            backtrack_factor: 0.5,
            min_step: 1e-4,
            sigma_min_iters: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Match the k/2 lowest derivatives of the end states at each end.
    DirichletToStates,
    /// Project the boundary deviation onto the stable/unstable Floquet
    /// directions of the end states (for slow Floquet decay).
    Projection,
}

/// Convergence report attached to every solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Smallest singular value of the Jacobian at the solution
    /// (nondegeneracy indicator).
    pub sigma_min: f64,
    /// Set when a front interface moved by more than half a period from the
    /// initial guess (pinning-site wandering is reported, not corrected).
    pub wandered: bool,
}

// ---------------------------------------------------------------------------
// Finite-difference discretization
// ---------------------------------------------------------------------------

/// Fornberg weights for the d-th derivative on the uniform stencil
/// `-s..=s` (second-order accurate for the centered choice `s = ceil(d/2)`).
pub fn fd_weights(d: usize, s: usize) -> Vec<f64> {
    let offsets: Vec<f64> = (-(s as i64)..=(s as i64)).map(|o| o as f64).collect();
    let n = offsets.len();
    // Fornberg's recursion at evaluation point 0
    let mut c = vec![vec![0.0; d + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(d);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for kk in (1..=mn).rev() {
                    c[i][kk] = c1 * (kk as f64 * c[i - 1][kk - 1] - c5 * c[i - 1][kk]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for kk in (1..=mn).rev() {
                c[j][kk] = (c4 * c[j][kk] - kk as f64 * c[j][kk - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[d]).collect()
}

fn stencil_radius(order: usize) -> usize {
    order.div_ceil(2)
}

enum DiscreteBc {
    Periodic,
    Dirichlet {
        left: Interpolant,
        right: Interpolant,
    },
    Projection {
        left: Interpolant,
        right: Interpolant,
        /// rows spanning the stable range of the left end-state monodromy
        rows_left: RMat,
        /// rows spanning the unstable range of the right end-state monodromy
        rows_right: RMat,
    },
}

/// One stationary problem: model + grid + boundary treatment.
pub(crate) struct Discretization {
    model: ModelSpec,
    grid: Grid,
    bc: DiscreteBc,
    /// per-derivative stencil weights, scaled by h^{-d}
    weights: Vec<Vec<f64>>,
    radius: usize,
}

impl Discretization {
    fn new(model: &ModelSpec, grid: &Grid, bc: DiscreteBc) -> Result<Self> {
        let k = model.order;
        let s = stencil_radius(k);
        if !grid.is_periodic() && k % 2 != 0 {
            return Err(Error::Invalid(
                "line boundary conditions implemented for even-order operators only".into(),
            ));
        }
        let h = grid.h();
        let weights = (1..=k)
            .map(|d| {
                fd_weights(d, s)
                    .into_iter()
                    .map(|w| w / h.powi(d as i32))
                    .collect()
            })
            .collect();
        Ok(Discretization {
            model: model.clone(),
            grid: grid.clone(),
            bc,
            weights,
            radius: s,
        })
    }

    fn unknowns(&self) -> usize {
        self.grid.n * self.model.dim
    }

    fn is_interior(&self, node: usize) -> bool {
        self.grid.is_periodic() || (node >= self.radius && node + self.radius < self.grid.n)
    }

    /// Discrete stationary residual; boundary rows encode the boundary
    /// conditions.
    fn residual(&self, values: &RMat) -> RVec {
        let m = self.model.dim;
        let n = self.grid.n;
        let mut r = RVec::zeros(self.unknowns());
        for i in 0..n {
            if self.is_interior(i) {
                let x = self.grid.x(i);
                let u = values.column(i).into_owned();
                let mut ri = self.model.nonlin(&u, x);
                for (dm1, w) in self.weights.iter().enumerate() {
                    let alpha = self.model.alpha(dm1 + 1, x);
                    let mut du = RVec::zeros(m);
                    for (oi, &wv) in w.iter().enumerate() {
                        if wv == 0.0 {
                            continue;
                        }
                        let off = oi as i64 - self.radius as i64;
                        let j = self.wrap(i as i64 + off);
                        for c in 0..m {
                            du[c] += wv * values[(c, j)];
                        }
                    }
                    ri += alpha * du;
                }
                for c in 0..m {
                    r[i * m + c] = ri[c];
                }
            }
        }
        self.boundary_residual(values, &mut r);
        r
    }

    fn wrap(&self, j: i64) -> usize {
        let n = self.grid.n as i64;
        (j.rem_euclid(n)) as usize
    }

    fn boundary_residual(&self, values: &RMat, r: &mut RVec) {
        let m = self.model.dim;
        let n = self.grid.n;
        let s = self.radius;
        match &self.bc {
            DiscreteBc::Periodic => {}
            DiscreteBc::Dirichlet { left, right } => {
                // fix the s boundary nodes on each side to the end-state values
                for side in 0..2 {
                    let interp = if side == 0 { left } else { right };
                    for d in 0..s {
                        let node = if side == 0 { d } else { n - 1 - d };
                        let x = self.grid.x(node);
                        let target = interp.eval(x);
                        for c in 0..m {
                            r[node * m + c] = values[(c, node)] - target[c];
                        }
                    }
                }
            }
            DiscreteBc::Projection {
                left,
                right,
                rows_left,
                rows_right,
            } => {
                let du_left = self.boundary_state_deviation(values, left, true);
                let du_right = self.boundary_state_deviation(values, right, false);
                let rl = rows_left * du_left;
                let rr = rows_right * du_right;
                for c in 0..m {
                    r[c] = rl[c];
                    r[(n - 1) * m + c] = rr[c];
                }
            }
        }
    }

    /// (u - v, u' - v') at a boundary, with one-sided differences for u'.
    fn boundary_state_deviation(&self, values: &RMat, state: &Interpolant, left: bool) -> RVec {
        let m = self.model.dim;
        let n = self.grid.n;
        let h = self.grid.h();
        let x = if left { self.grid.x(0) } else { self.grid.x(n - 1) };
        let v = state.eval(x);
        let dv = {
            let e = 1e-5;
            (state.eval(x + e) - state.eval(x - e)) / (2.0 * e)
        };
        let mut du = RVec::zeros(2 * m);
        for c in 0..m {
            let (u0, up) = if left {
                (
                    values[(c, 0)],
                    (-3.0 * values[(c, 0)] + 4.0 * values[(c, 1)] - values[(c, 2)]) / (2.0 * h),
                )
            } else {
                (
                    values[(c, n - 1)],
                    (3.0 * values[(c, n - 1)] - 4.0 * values[(c, n - 2)] + values[(c, n - 3)])
                        / (2.0 * h),
                )
            };
            du[c] = u0 - v[c];
            du[m + c] = up - dv[c];
        }
        du
    }

    /// Banded Jacobian plus the periodic wrap correction (if any).
    fn jacobian(&self, values: &RMat) -> (BandMatrix, Option<(RMat, RMat)>) {
        let m = self.model.dim;
        let n = self.grid.n;
        let s = self.radius;
        let half = (s + 2) * m; // widened for one-sided boundary stencils
        let mut band = BandMatrix::zeros(self.unknowns(), half, half);
        let mut corner_tr = RMat::zeros(s * m, s * m);
        let mut corner_bl = RMat::zeros(s * m, s * m);
        for i in 0..n {
            if !self.is_interior(i) {
                continue;
            }
            let x = self.grid.x(i);
            let u = values.column(i).into_owned();
            let jac = self.model.nonlin_jac(&u, x);
            for rr in 0..m {
                for cc in 0..m {
                    band.add(i * m + rr, i * m + cc, jac[(rr, cc)]);
                }
            }
            for (dm1, w) in self.weights.iter().enumerate() {
                let alpha = self.model.alpha(dm1 + 1, x);
                for (oi, &wv) in w.iter().enumerate() {
                    if wv == 0.0 {
                        continue;
                    }
                    let off = oi as i64 - s as i64;
                    let tgt = i as i64 + off;
                    for rr in 0..m {
                        for cc in 0..m {
                            let v = alpha[(rr, cc)] * wv;
                            if v == 0.0 {
                                continue;
                            }
                            if (0..n as i64).contains(&tgt) {
                                band.add(i * m + rr, tgt as usize * m + cc, v);
                            } else if tgt < 0 {
                                // wraps to the right edge
                                let j = self.wrap(tgt);
                                corner_tr[(i * m + rr, (j - (n - s)) * m + cc)] += v;
                            } else {
                                let j = self.wrap(tgt);
                                corner_bl[((i - (n - s)) * m + rr, j * m + cc)] += v;
                            }
                        }
                    }
                }
            }
        }
        let low_rank = if self.grid.is_periodic() {
            let nu = self.unknowns();
            let r = 2 * s * m;
            let mut uu = RMat::zeros(nu, r);
            let mut vv = RMat::zeros(nu, r);
            for q in 0..s * m {
                uu[(q, q)] = 1.0;
                uu[(nu - s * m + q, s * m + q)] = 1.0;
            }
            for q in 0..s * m {
                for j in 0..s * m {
                    vv[(nu - s * m + j, q)] = corner_tr[(q, j)];
                    vv[(j, s * m + q)] = corner_bl[(q, j)];
                }
            }
            Some((uu, vv))
        } else {
            self.boundary_jacobian(&mut band);
            None
        };
        (band, low_rank)
    }

    fn boundary_jacobian(&self, band: &mut BandMatrix) {
        let m = self.model.dim;
        let n = self.grid.n;
        let s = self.radius;
        let h = self.grid.h();
        match &self.bc {
            DiscreteBc::Periodic => {}
            DiscreteBc::Dirichlet { .. } => {
                for d in 0..s {
                    for c in 0..m {
                        band.set(d * m + c, d * m + c, 1.0);
                        band.set((n - 1 - d) * m + c, (n - 1 - d) * m + c, 1.0);
                    }
                }
            }
            DiscreteBc::Projection {
                rows_left,
                rows_right,
                ..
            } => {
                let one_sided = [-3.0 / (2.0 * h), 4.0 / (2.0 * h), -1.0 / (2.0 * h)];
                for c in 0..m {
                    for cc in 0..m {
                        band.set(c, cc, rows_left[(c, cc)]);
                        band.set((n - 1) * m + c, (n - 1) * m + cc, rows_right[(c, cc)]);
                    }
                    for (q, w) in one_sided.iter().enumerate() {
                        for cc in 0..m {
                            band.add(c, q * m + cc, rows_left[(c, m + cc)] * w);
                            band.add(
                                (n - 1) * m + c,
                                (n - 1 - q) * m + cc,
                                -rows_right[(c, m + cc)] * w,
                            );
                        }
                    }
                }
            }
        }
    }

    /// Discrete L2 norm with trapezoid weights.
    fn weighted_norm(&self, r: &RVec) -> f64 {
        let m = self.model.dim;
        let n = self.grid.n;
        let h = self.grid.h();
        let mut acc = 0.0;
        for i in 0..n {
            let w = if self.grid.is_periodic() || (i > 0 && i + 1 < n) {
                1.0
            } else {
                0.5
            };
            for c in 0..m {
                acc += w * r[i * m + c] * r[i * m + c];
            }
        }
        (acc * h).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Newton iteration
// ---------------------------------------------------------------------------

fn newton(disc: &Discretization, guess: &RMat, opts: &NewtonOptions) -> Result<(RMat, SolveReport)> {
    let m = disc.model.dim;
    let n = disc.grid.n;
    let mut values = guess.clone();
    let mut history = Vec::new();
    let mut res = disc.residual(&values);
    let mut rnorm = disc.weighted_norm(&res);
    history.push(rnorm);
    let mut iterations = 0;
    while rnorm > opts.abs_tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                last_residual: rnorm,
                residual_history: history,
            });
        }
        let (band, low_rank) = disc.jacobian(&values);
        let solver = match low_rank {
            None => FactoredSystem::Band(band.factor()?),
            Some((u, v)) => FactoredSystem::Cyclic(LowRankUpdatedLu::new(band, u, v)?),
        };
        let delta = solver.solve(&res);
        // backtracking on the weighted residual norm
        let mut step = 1.0;
        let mut accepted = false;
        while step >= opts.min_step {
            let mut trial = values.clone();
            for i in 0..n {
                for c in 0..m {
                    trial[(c, i)] -= step * delta[i * m + c];
                }
            }
            let tres = disc.residual(&trial);
            let tnorm = disc.weighted_norm(&tres);
            if tnorm < rnorm * (1.0 - 1e-4 * step) || tnorm < opts.abs_tol {
                values = trial;
                res = tres;
                rnorm = tnorm;
                accepted = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        iterations += 1;
        history.push(rnorm);
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                last_residual: rnorm,
                residual_history: history,
            });
        }
    }
    // nondegeneracy indicator at the solution
    let (band, low_rank) = disc.jacobian(&values);
    let sigma_min = band_smallest_singular_value(
        &band,
        low_rank.as_ref().map(|(u, v)| (u, v)),
        opts.sigma_min_iters,
    )?;
    Ok((
        values,
        SolveReport {
            iterations,
            residual_history: history,
            sigma_min,
            wandered: false,
        },
    ))
}

// ---------------------------------------------------------------------------
// Public solves
// ---------------------------------------------------------------------------

/// Solve the stationary equation on a periodic cell whose length is an
/// integer multiple of the coefficient period.
pub fn solve_periodic_state(
    model: &ModelSpec,
    guess: &Profile,
    opts: &NewtonOptions,
) -> Result<(Profile, SolveReport)> {
    let grid = &guess.grid;
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid("periodic solve needs a periodic grid".into()));
    }
    let cell = grid.end() - grid.start();
    let ratio = cell / model.period;
    if (ratio - ratio.round()).abs() > 1e-8 {
        return Err(Error::InvalidGrid(format!(
            "cell length {cell} is not an integer multiple of the period {}",
            model.period
        )));
    }
    if guess.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: guess.dim(),
        });
    }
    let disc = Discretization::new(model, grid, DiscreteBc::Periodic)?;
    let (values, report) = newton(&disc, &guess.values, opts)?;
    let prof = Profile::new(grid.clone(), values)?.with_meta(&model.name, &model.params);
    Ok((prof, report))
}

/// Solve the stationary equation on a truncated line with end states taken
/// from the guess's attached asymptotics.
pub fn solve_localized(
    model: &ModelSpec,
    guess: &Profile,
    bc: BoundaryKind,
    opts: &NewtonOptions,
) -> Result<(Profile, SolveReport)> {
    let grid = &guess.grid;
    if grid.is_periodic() {
        return Err(Error::InvalidGrid("localized solve needs a line grid".into()));
    }
    let asym = guess
        .asymptotics
        .as_ref()
        .ok_or_else(|| Error::BoundaryInconsistent("guess has no attached end states".into()))?;
    // end states must themselves solve the stationary problem
    for (side, state) in [("left", &asym.left), ("right", &asym.right)] {
        let r = periodic_residual_norm(model, state)?;
        if r > (opts.abs_tol * 1e3).max(1e-6) {
            return Err(Error::BoundaryInconsistent(format!(
                "{side} end state has stationary residual {r:.3e}"
            )));
        }
    }
    let left = asym.left.interpolant();
    let right = asym.right.interpolant();
    let disc_bc = match bc {
        BoundaryKind::DirichletToStates => DiscreteBc::Dirichlet { left, right },
        BoundaryKind::Projection => {
            let rows_left = stable_projection_rows(model, &asym.left, grid.start(), true)?;
            let rows_right = stable_projection_rows(model, &asym.right, grid.end(), false)?;
            DiscreteBc::Projection {
                left,
                right,
                rows_left,
                rows_right,
            }
        }
    };
    let disc = Discretization::new(model, grid, disc_bc)?;
    let (values, mut report) = newton(&disc, &guess.values, opts)?;
    report.wandered = interface_moved(guess, &values, model.period);
    let prof = Profile::new(grid.clone(), values)?
        .with_asymptotics(asym.left.clone(), asym.right.clone())
        .with_meta(&model.name, &model.params);
    Ok((prof, report))
}

/// Interior stationary residual norm of a periodic state.
pub fn periodic_residual_norm(model: &ModelSpec, state: &Profile) -> Result<f64> {
    let disc = Discretization::new(model, &state.grid, DiscreteBc::Periodic)?;
    let r = disc.residual(&state.values);
    Ok(disc.weighted_norm(&r))
}

/// Smallest singular value of the Dirichlet-BC Jacobian at a localized
/// profile (nondegeneracy proxy without re-solving).
pub fn localized_sigma_min(model: &ModelSpec, profile: &Profile, iters: usize) -> Result<f64> {
    let asym = profile
        .asymptotics
        .as_ref()
        .ok_or_else(|| Error::BoundaryInconsistent("profile has no end states".into()))?;
    let disc = Discretization::new(
        model,
        &profile.grid,
        DiscreteBc::Dirichlet {
            left: asym.left.interpolant(),
            right: asym.right.interpolant(),
        },
    )?;
    let (band, low_rank) = disc.jacobian(&profile.values);
    band_smallest_singular_value(&band, low_rank.as_ref().map(|(u, v)| (u, v)), iters)
}

/// Interior residual norm of a localized profile (boundary rows excluded).
pub fn localized_residual_norm(model: &ModelSpec, profile: &Profile) -> Result<f64> {
    let asym = profile
        .asymptotics
        .as_ref()
        .ok_or_else(|| Error::BoundaryInconsistent("profile has no end states".into()))?;
    let disc = Discretization::new(
        model,
        &profile.grid,
        DiscreteBc::Dirichlet {
            left: asym.left.interpolant(),
            right: asym.right.interpolant(),
        },
    )?;
    let mut r = disc.residual(&profile.values);
    // zero out the boundary rows: this norm measures the interior defect
    let m = model.dim;
    let s = stencil_radius(model.order);
    for d in 0..s {
        for c in 0..m {
            r[d * m + c] = 0.0;
            r[(profile.grid.n - 1 - d) * m + c] = 0.0;
        }
    }
    Ok(disc.weighted_norm(&r))
}

/// Rows spanning the stable (left end) or unstable (right end) range of the
/// end-state monodromy at `lambda = 0`, used by the projection boundary
/// condition. Only second-order systems are supported.
fn stable_projection_rows(
    model: &ModelSpec,
    state: &Profile,
    base: f64,
    left: bool,
) -> Result<RMat> {
    if model.order != 2 {
        return Err(Error::Invalid(
            "projection boundary conditions implemented for k = 2 only".into(),
        ));
    }
    let m = model.dim;
    let km = model.km();
    let field = crate::model::linearize_first_order(model, state, None)?;
    let fd =
        crate::floquet::floquet_data(&field, base, model.period, Complex64::new(0.0, 0.0), 0.0)?;
    if !fd.is_hyperbolic() {
        return Err(Error::NonHyperbolic(fd.unit_circle_distance));
    }
    if fd.morse_index != m {
        return Err(Error::BoundaryInconsistent(format!(
            "projection BC needs Morse index {m}, found {}",
            fd.morse_index
        )));
    }
    let r_in = fd
        .multipliers
        .iter()
        .filter(|r| r.norm() < 1.0)
        .map(|r| r.norm())
        .fold(0.0f64, f64::max);
    let r_out = fd
        .multipliers
        .iter()
        .filter(|r| r.norm() > 1.0)
        .map(|r| r.norm())
        .fold(f64::INFINITY, f64::min);
    let radius = (r_in * r_out).sqrt();
    let p_s = crate::linalg::spectral_projector(&fd.monodromy, radius, 64)?;
    // deviation must lie in the unstable subspace at the left end
    // (P_s delta = 0) and in the stable subspace at the right (P_u delta = 0)
    let proj = if left {
        p_s.map(|z| z.re)
    } else {
        (nalgebra::DMatrix::<Complex64>::identity(km, km) - p_s).map(|z| z.re)
    };
    // pick the m best-conditioned rows
    let mut order: Vec<usize> = (0..km).collect();
    order.sort_by(|&a, &b| {
        proj.row(b)
            .norm()
            .partial_cmp(&proj.row(a).norm())
            .unwrap()
    });
    let mut rows = RMat::zeros(m, km);
    for (out_r, &src) in order.iter().take(m).enumerate() {
        rows.set_row(out_r, &proj.row(src));
    }
    Ok(rows)
}

fn interface_moved(guess: &Profile, solution: &RMat, period: f64) -> bool {
    let find_interface = |vals: &RMat| -> f64 {
        let n = vals.ncols();
        let mut best = 0usize;
        let mut best_v = -1.0;
        for i in 1..n - 1 {
            let d = (vals.column(i + 1) - vals.column(i - 1)).norm();
            if d > best_v {
                best_v = d;
                best = i;
            }
        }
        guess.grid.x(best)
    };
    let a = find_interface(&guess.values);
    let b = find_interface(solution);
    (a - b).abs() > 0.5 * period
}

/// Natural continuation in one scalar parameter with automatic step halving
/// (step floor 1e-4). End states of line profiles are continued alongside
/// the wave. Returns one converged profile per target value.
pub fn continue_parameter(
    model: &ModelSpec,
    start: &Profile,
    param: &str,
    targets: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<Profile>> {
    let mut out = Vec::with_capacity(targets.len());
    if targets.is_empty() {
        out.push(start.clone());
        return Ok(out);
    }
    let mut reached = *model
        .params
        .get(param)
        .ok_or_else(|| Error::MissingParameter(param.to_string()))?;
    let mut current = start.clone();
    for &target in targets {
        while (reached - target).abs() > 1e-14 * (1.0 + target.abs()) {
            let mut attempt = target;
            loop {
                match solve_at(model, &current, param, attempt, opts) {
                    Ok(prof) => {
                        current = prof;
                        reached = attempt;
                        break;
                    }
                    Err(_) if (attempt - reached).abs() * 0.5 >= 1e-4 => {
                        attempt = 0.5 * (reached + attempt);
                    }
                    Err(_) => {
                        return Err(Error::ContinuationStalled {
                            param_value: attempt,
                        });
                    }
                }
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

fn solve_at(
    model: &ModelSpec,
    guess: &Profile,
    param: &str,
    value: f64,
    opts: &NewtonOptions,
) -> Result<Profile> {
    let stepped_model = model.with_param(param, value)?;
    if guess.grid.is_periodic() {
        let (prof, _) = solve_periodic_state(&stepped_model, guess, opts)?;
        return Ok(prof);
    }
    // continue the end states first, then the wave
    let asym = guess
        .asymptotics
        .as_ref()
        .ok_or_else(|| Error::BoundaryInconsistent("guess has no attached end states".into()))?;
    let (new_left, _) = solve_periodic_state(&stepped_model, &asym.left, opts)?;
    let (new_right, _) = solve_periodic_state(&stepped_model, &asym.right, opts)?;
    let seeded = Profile::new(guess.grid.clone(), guess.values.clone())?.with_asymptotics(
        std::sync::Arc::new(new_left),
        std::sync::Arc::new(new_right),
    );
    let (prof, _) =
        solve_localized(&stepped_model, &seeded, BoundaryKind::DirichletToStates, opts)?;
    Ok(prof)
}

/// Dense interior matrix of the linearization `L(u)` for the oracle:
/// Dirichlet elimination on line grids, wrap-around stencils on periodic
/// cells (so the matrix represents the co-periodic operator).
pub(crate) fn dense_linearization(model: &ModelSpec, profile: &Profile) -> Result<RMat> {
    let m = model.dim;
    let n = profile.grid.n;
    let s = stencil_radius(model.order);
    let h = profile.grid.h();
    let periodic = profile.grid.is_periodic();
    let rows = if periodic { n } else { n - 2 * s };
    let size = rows * m;
    let mut a = RMat::zeros(size, size);
    let weights: Vec<Vec<f64>> = (1..=model.order)
        .map(|d| {
            fd_weights(d, s)
                .into_iter()
                .map(|w| w / h.powi(d as i32))
                .collect()
        })
        .collect();
    for row_node in 0..rows {
        let node = if periodic { row_node } else { row_node + s };
        let x = profile.grid.x(node);
        let u = profile.values.column(node).into_owned();
        let jac = model.nonlin_jac(&u, x);
        for rr in 0..m {
            for cc in 0..m {
                a[(row_node * m + rr, row_node * m + cc)] += jac[(rr, cc)];
            }
        }
        for (dm1, w) in weights.iter().enumerate() {
            let alpha = model.alpha(dm1 + 1, x);
            for (oi, &wv) in w.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                let off = oi as i64 - s as i64;
                let tgt = node as i64 + off;
                let col_node = if periodic {
                    Some((tgt.rem_euclid(n as i64)) as usize)
                } else if tgt >= s as i64 && tgt < (n - s) as i64 {
                    Some(tgt as usize - s)
                } else {
                    None // Dirichlet-eliminated boundary node
                };
                if let Some(cn) = col_node {
                    for rr in 0..m {
                        for cc in 0..m {
                            a[(row_node * m + rr, cn * m + cc)] += alpha[(rr, cc)] * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
pub(crate) fn sine_gordon_front(grid: Grid) -> Profile {
    Profile::from_fn(grid, 1, |x| RVec::from_element(1, 4.0 * x.exp().atan())).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;
    use crate::model::{build_builtin, BuiltinModel, PotentialSet};
    use crate::potential::Potential;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;
    use std::sync::Arc;

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

    fn gp_scalar(kappa: f64, mu: f64, omega: f64, period: f64) -> ModelSpec {
        let mut p = BTreeMap::new();
        p.insert("kappa".to_string(), kappa);
        p.insert("mu".to_string(), mu);
        p.insert("omega".to_string(), omega);
        build_builtin(
            BuiltinModel::GpScalar,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, period)),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn fornberg_weights_match_classics() {
        assert_eq!(fd_weights(1, 1), vec![-0.5, 0.0, 0.5]);
        assert_eq!(fd_weights(2, 1), vec![1.0, -2.0, 1.0]);
        let w4 = fd_weights(4, 2);
        for (a, b) in w4.iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn trivial_state_needs_no_steps() {
        // sin(0) = 0: the zero state solves the eps = 0 problem exactly
        let model = toy(0.0);
        let g = Grid::periodic(0.0, 2.0, 64).unwrap();
        let guess = Profile::constant(g, &RVec::zeros(1)).unwrap();
        let (sol, report) =
            solve_periodic_state(&model, &guess, &NewtonOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.residual_history[0] == 0.0);
        assert!(sol.values.amax() == 0.0);
    }

    #[test]
    fn periodic_state_near_two_pi() {
        // eps = 0.1, V = cos(pi x): periodic state within O(eps) of 2 pi
        let model = toy(0.1);
        let g = Grid::periodic(0.0, 2.0, 200).unwrap();
        let guess =
            Profile::constant(g, &RVec::from_element(1, 2.0 * std::f64::consts::PI)).unwrap();
        let (sol, report) =
            solve_periodic_state(&model, &guess, &NewtonOptions::default()).unwrap();
        let dev: f64 = sol
            .values
            .iter()
            .map(|v| (v - 2.0 * std::f64::consts::PI).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.2, "deviation {dev}");
        assert!(dev > 1e-4, "state should move at eps > 0");
        assert!(report.sigma_min > 1e-6);
    }

    #[test]
    fn sine_gordon_front_converges_fast() {
        let model = toy(0.0);
        let g = Grid::line_commensurate(-20.0, 20.0, 2.0, 0.01).unwrap();
        let state0 = Arc::new(
            Profile::constant(Grid::periodic(0.0, 2.0, 64).unwrap(), &RVec::zeros(1)).unwrap(),
        );
        let state1 = Arc::new(
            Profile::constant(
                Grid::periodic(0.0, 2.0, 64).unwrap(),
                &RVec::from_element(1, 2.0 * std::f64::consts::PI),
            )
            .unwrap(),
        );
        let guess = sine_gordon_front(g).with_asymptotics(state0, state1);
        let opts = NewtonOptions::default();
        let (sol, report) =
            solve_localized(&model, &guess, BoundaryKind::DirichletToStates, &opts).unwrap();
        assert!(report.iterations <= 2, "iterations {}", report.iterations);
        assert!(*report.residual_history.last().unwrap() <= 1e-10);
        assert!(!report.wandered);
        // the solution stays close to the explicit front
        let mid = sol.grid.n / 2;
        assert_relative_eq!(sol.values[(0, mid)], std::f64::consts::PI, epsilon = 1e-5);
    }

    #[test]
    fn black_soliton_reproduced() {
        // defocusing, mu = 0, omega = -1: psi = tanh(x / sqrt(2))
        let model = gp_scalar(1.0, 0.0, -1.0, std::f64::consts::PI);
        let g = Grid::line(-20.0, 20.0, 2001).unwrap();
        let cell = Grid::periodic(0.0, std::f64::consts::PI, 64).unwrap();
        let left =
            Arc::new(Profile::constant(cell.clone(), &RVec::from_element(1, -1.0)).unwrap());
        let right = Arc::new(Profile::constant(cell, &RVec::from_element(1, 1.0)).unwrap());
        let guess = Profile::from_fn(g, 1, |x| RVec::from_element(1, (x / 2.0f64.sqrt()).tanh()))
            .unwrap()
            .with_asymptotics(left, right);
        let (sol, _) = solve_localized(
            &model,
            &guess,
            BoundaryKind::DirichletToStates,
            &NewtonOptions::default(),
        )
        .unwrap();
        let interp = sol.interpolant();
        for x in [-3.0, 0.5, 2.0] {
            assert_relative_eq!(interp.eval(x)[0], (x / 2.0f64.sqrt()).tanh(), epsilon = 5e-5);
        }
    }

    #[test]
    fn bright_soliton_reproduced_with_projection_bc() {
        let model = gp_scalar(-1.0, 0.0, 1.0, std::f64::consts::PI);
        let g = Grid::line(-15.0, 15.0, 1501).unwrap();
        let cell = Grid::periodic(0.0, std::f64::consts::PI, 64).unwrap();
        let zero = Arc::new(Profile::constant(cell, &RVec::zeros(1)).unwrap());
        let guess = Profile::from_fn(g, 1, |x| RVec::from_element(1, 2.0f64.sqrt() / x.cosh()))
            .unwrap()
            .with_asymptotics(zero.clone(), zero);
        for bc in [BoundaryKind::DirichletToStates, BoundaryKind::Projection] {
            let (sol, report) =
                solve_localized(&model, &guess, bc, &NewtonOptions::default()).unwrap();
            assert!(*report.residual_history.last().unwrap() <= 1e-10);
            let interp = sol.interpolant();
            for x in [-1.0, 0.0, 2.5] {
                assert_relative_eq!(interp.eval(x)[0], 2.0f64.sqrt() / x.cosh(), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn residual_drops_second_order_under_refinement() {
        // explicit sine-Gordon front: residual norm drops by >= 3.8 per halving
        let model = toy(0.0);
        let norm_at = |n: usize| {
            let g = Grid::line(-20.0, 20.0, n).unwrap();
            let front = sine_gordon_front(g);
            let cell = Grid::periodic(0.0, 2.0, 64).unwrap();
            let p = front.with_asymptotics(
                Arc::new(Profile::constant(cell.clone(), &RVec::zeros(1)).unwrap()),
                Arc::new(
                    Profile::constant(cell, &RVec::from_element(1, 2.0 * std::f64::consts::PI))
                        .unwrap(),
                ),
            );
            localized_residual_norm(&model, &p).unwrap()
        };
        let r1 = norm_at(1001);
        let r2 = norm_at(2001);
        assert!(r1 / r2 >= 3.8, "ratio {}", r1 / r2);
    }

    #[test]
    fn analytic_jacobian_matches_fd_directional() {
        let model = toy(0.15);
        let g = Grid::periodic(0.0, 4.0, 96).unwrap();
        let vals = RMat::from_fn(1, 96, |_, i| 0.3 * (i as f64 * 0.21).sin());
        let disc = Discretization::new(&model, &g, DiscreteBc::Periodic).unwrap();
        let (band, low_rank) = disc.jacobian(&vals);
        let mut rng_state = 12345u64;
        let mut rand = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..5 {
            let dir = RVec::from_fn(96, |_, _| rand());
            let e = 1e-6;
            let mut up = vals.clone();
            let mut dn = vals.clone();
            for i in 0..96 {
                up[(0, i)] += e * dir[i];
                dn[(0, i)] -= e * dir[i];
            }
            let fd = (disc.residual(&up) - disc.residual(&dn)) / (2.0 * e);
            let mut jv = band.mul_vec(&dir);
            if let Some((u, v)) = &low_rank {
                jv += u * (v.transpose() * &dir);
            }
            assert!(
                (jv.clone() - fd.clone()).norm() / jv.norm().max(1e-12) < 1e-5,
                "direction mismatch {}",
                (jv - fd).norm()
            );
        }
    }

    #[test]
    fn continuation_follows_front_into_potential() {
        let model = toy(0.0);
        let g = Grid::line_commensurate(-20.0, 20.0, 2.0, 0.02).unwrap();
        let cell = Grid::periodic(0.0, 2.0, 100).unwrap();
        let front = sine_gordon_front(g).with_asymptotics(
            Arc::new(Profile::constant(cell.clone(), &RVec::zeros(1)).unwrap()),
            Arc::new(
                Profile::constant(cell, &RVec::from_element(1, 2.0 * std::f64::consts::PI))
                    .unwrap(),
            ),
        );
        let targets: Vec<f64> = (1..=5).map(|i| 0.02 * i as f64).collect();
        let profiles =
            continue_parameter(&model, &front, "eps", &targets, &NewtonOptions::default())
                .unwrap();
        assert_eq!(profiles.len(), 5);
        for prof in &profiles {
            assert!(matches!(prof.grid.kind, GridKind::Line { .. }));
        }
        // empty target list returns the start
        let same =
            continue_parameter(&model, &front, "eps", &[], &NewtonOptions::default()).unwrap();
        assert_eq!(same.len(), 1);
    }
}
