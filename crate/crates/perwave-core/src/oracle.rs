//! Independent brute-force spectral checks: dense eigendecomposition of the
//! discretized linearization and LDL^T inertia counts for scalar
//! self-adjoint operators. Everything here is deliberately simple; the value
//! of the oracle is that it shares nothing with the Evans machinery beyond
//! the finite-difference discretization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, Profile};
use crate::linalg::{dense_eigenvalues, RVec};
use crate::model::ModelSpec;
use crate::solver::dense_linearization;

/// Hard cap on the dense matrix size; larger problems are refused rather
/// than silently switching method.
pub const DENSE_CAP: usize = 4096;

/// All eigenvalues of the discrete linearization inside a rectangle
/// `[re_min, re_max] x [im_min, im_max]`.
///
/// Line grids use the same Dirichlet boundary treatment as the solver;
/// periodic grids assemble with wrap-around stencils, so the matrix
/// represents the co-periodic operator.
pub fn direct_spectrum(
    model: &ModelSpec,
    profile: &Profile,
    window: (f64, f64, f64, f64),
) -> Result<Vec<Complex64>> {
    let a = sized_linearization(model, profile)?;
    let eig = dense_eigenvalues(&a, false)?;
    let (re0, re1, im0, im1) = window;
    let mut vals: Vec<Complex64> = eig
        .values
        .into_iter()
        .filter(|z| z.re >= re0 && z.re <= re1 && z.im >= im0 && z.im <= im1)
        .collect();
    vals.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Ok(vals)
}

fn sized_linearization(model: &ModelSpec, profile: &Profile) -> Result<crate::linalg::RMat> {
    let s = model.order.div_ceil(2);
    let rows = if profile.grid.is_periodic() {
        profile.grid.n
    } else {
        profile.grid.n - 2 * s
    };
    let size = rows * model.dim;
    if size > DENSE_CAP {
        return Err(Error::TooLarge(size, DENSE_CAP));
    }
    dense_linearization(model, profile)
}

// ---------------------------------------------------------------------------
// Inertia counts for -d^2/dx^2 + q(x)
// ---------------------------------------------------------------------------

/// A scalar self-adjoint second-order operator `-u'' + q(x) u` sampled on a
/// grid (periodic cell or Dirichlet line).
#[derive(Debug, Clone)]
pub struct SturmOperator {
    pub grid: Grid,
    /// Potential samples at the grid nodes (interior nodes for line grids).
    pub q: RVec,
}

impl SturmOperator {
    pub fn new(grid: Grid, q: RVec) -> Result<Self> {
        let expected = if grid.is_periodic() { grid.n } else { grid.n - 2 };
        if q.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: q.len(),
            });
        }
        Ok(SturmOperator { grid, q })
    }

    /// Sample a potential function on the operator's nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let offset = if grid.is_periodic() { 0 } else { 1 };
        let expected = if grid.is_periodic() { grid.n } else { grid.n - 2 };
        let q = RVec::from_fn(expected, |i, _| f(grid.x(i + offset)));
        SturmOperator::new(grid, q)
    }

    fn size(&self) -> usize {
        self.q.len()
    }

    fn diag(&self, shift: f64) -> (RVec, f64) {
        let h = self.grid.h();
        let e = -1.0 / (h * h);
        let d = RVec::from_fn(self.size(), |i, _| 2.0 / (h * h) + self.q[i] - shift);
        (d, e)
    }

    /// Magnitude scale of the operator entries (pivot breakdown threshold).
    pub fn scale(&self) -> f64 {
        let h = self.grid.h();
        2.0 / (h * h) + self.q.amax()
    }

    /// Grid-independent spectral scale for kernel dead bands: eigenvalues
    /// near zero live on the scale of the potential, not of `2/h^2`.
    pub fn potential_scale(&self) -> f64 {
        self.q.amax().max(1.0)
    }

    /// Number of eigenvalues strictly below `shift` by Sylvester inertia of
    /// the LDL^T factorization; wrap-around corners are handled by bordered
    /// elimination (Schur complement of the leading tridiagonal block).
    pub fn eigenvalues_below(&self, shift: f64) -> Result<usize> {
        let n = self.size();
        let (d, e) = self.diag(shift);
        let breakdown = 1e-14 * self.scale().max(1.0);
        if !self.grid.is_periodic() {
            let mut count = 0;
            let mut p = d[0];
            if p.abs() < breakdown {
                return Err(Error::BreakdownAtShift(shift));
            }
            if p < 0.0 {
                count += 1;
            }
            for i in 1..n {
                p = d[i] - e * e / p;
                if p.abs() < breakdown {
                    return Err(Error::BreakdownAtShift(shift));
                }
                if p < 0.0 {
                    count += 1;
                }
            }
            return Ok(count);
        }
        // cyclic: leading (n-1) tridiagonal block T plus border (last row/col)
        // with b[0] = corner, b[n-2] = e
        let mut pivots = Vec::with_capacity(n - 1);
        let mut p = d[0];
        if p.abs() < breakdown {
            return Err(Error::BreakdownAtShift(shift));
        }
        pivots.push(p);
        for i in 1..n - 1 {
            p = d[i] - e * e / p;
            if p.abs() < breakdown {
                return Err(Error::BreakdownAtShift(shift));
            }
            pivots.push(p);
        }
        let mut count = pivots.iter().filter(|p| **p < 0.0).count();
        // solve T y = b with the symmetric factor (L D L^T)
        let corner = e;
        let mut b = RVec::zeros(n - 1);
        b[0] = corner;
        b[n - 2] += e;
        // forward: L z = b with L[i, i-1] = e / pivot[i-1]
        let mut z = b.clone();
        for i in 1..n - 1 {
            let l = e / pivots[i - 1];
            z[i] -= l * z[i - 1];
        }
        // diagonal + backward
        let mut y = z.clone();
        for i in 0..n - 1 {
            y[i] /= pivots[i];
        }
        for i in (0..n - 2).rev() {
            let l = e / pivots[i];
            y[i] -= l * y[i + 1];
        }
        let bty = b.dot(&y);
        let schur = d[n - 1] - bty;
        if schur.abs() < breakdown {
            return Err(Error::BreakdownAtShift(shift));
        }
        if schur < 0.0 {
            count += 1;
        }
        Ok(count)
    }

    /// Apply `(-d^2 + q - shift)` to a vector, matrix-free.
    fn apply(&self, shift: f64, v: &RVec) -> RVec {
        let n = self.size();
        let (d, e) = self.diag(shift);
        let mut out = RVec::from_fn(n, |i, _| d[i] * v[i]);
        for i in 0..n - 1 {
            out[i] += e * v[i + 1];
            out[i + 1] += e * v[i];
        }
        if self.grid.is_periodic() {
            out[0] += e * v[n - 1];
            out[n - 1] += e * v[0];
        }
        out
    }

    /// Solve `(A - shift) y = r` with the bordered LDL^T factorization.
    pub fn solve_shifted(&self, shift: f64, rhs: &RVec) -> Result<RVec> {
        let n = self.size();
        let (d, e) = self.diag(shift);
        let breakdown = 1e-14 * self.scale().max(1.0);
        let tridiag_solve = |d: &[f64], rhs: &RVec| -> Result<RVec> {
            let m = d.len();
            let mut pivots = Vec::with_capacity(m);
            let mut p = d[0];
            if p.abs() < breakdown {
                return Err(Error::BreakdownAtShift(shift));
            }
            pivots.push(p);
            for i in 1..m {
                p = d[i] - e * e / p;
                if p.abs() < breakdown {
                    return Err(Error::BreakdownAtShift(shift));
                }
                pivots.push(p);
            }
            let mut z = rhs.clone();
            for i in 1..m {
                z[i] -= (e / pivots[i - 1]) * z[i - 1];
            }
            for i in 0..m {
                z[i] /= pivots[i];
            }
            for i in (0..m - 1).rev() {
                z[i] -= (e / pivots[i]) * z[i + 1];
            }
            Ok(z)
        };
        if !self.grid.is_periodic() {
            return tridiag_solve(d.as_slice(), rhs);
        }
        // bordered solve: leading (n-1) block plus last unknown
        let dt = &d.as_slice()[..n - 1];
        let mut b = RVec::zeros(n - 1);
        b[0] = e;
        b[n - 2] += e;
        let r1 = RVec::from_fn(n - 1, |i, _| rhs[i]);
        let z1 = tridiag_solve(dt, &r1)?;
        let z2 = tridiag_solve(dt, &b)?;
        let schur = d[n - 1] - b.dot(&z2);
        if schur.abs() < breakdown {
            return Err(Error::BreakdownAtShift(shift));
        }
        let t = (rhs[n - 1] - b.dot(&z1)) / schur;
        let mut y = RVec::zeros(n);
        for i in 0..n - 1 {
            y[i] = z1[i] - t * z2[i];
        }
        y[n - 1] = t;
        Ok(y)
    }

    /// Dense symmetric matrix (test comparisons only).
    #[cfg(test)]
    fn dense(&self, shift: f64) -> crate::linalg::RMat {
        let n = self.size();
        let (d, e) = self.diag(shift);
        let mut a = crate::linalg::RMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = d[i];
            let j = (i + 1) % n;
            if j != i && (i + 1 < n || self.grid.is_periodic()) {
                a[(i, j)] += e;
                a[(j, i)] += e;
            }
        }
        a
    }
}

/// Inertia report at one shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InertiaCount {
    /// Eigenvalues strictly below `shift - deadband`.
    pub n_below: usize,
    /// Kernel dimension: eigenvalues within the dead band of the shift.
    pub z_at: usize,
}

/// Count eigenvalues below a shift and the kernel dimension at it.
///
/// The dead band is `1e-7 * scale`; the kernel count from the inertia
/// difference is refined by one step of inverse iteration when positive.
pub fn inertia_count(op: &SturmOperator, shift: f64) -> Result<InertiaCount> {
    let delta = 1e-7 * op.potential_scale();
    let lo = op.eigenvalues_below(shift - delta)?;
    let hi = op.eigenvalues_below(shift + delta)?;
    let mut z = hi - lo;
    if z > 0 {
        // confirm with inverse iteration at the shift edge
        let n = op.size();
        let mut v = RVec::from_fn(n, |i, _| ((i * 37 + 11) % 17) as f64 / 17.0 - 0.4);
        v /= v.norm();
        let mut ok = true;
        for _ in 0..8 {
            match op.solve_shifted(shift - delta, &v) {
                Ok(w) => {
                    let nw = w.norm();
                    if nw == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w / nw;
                }
                Err(_) => {
                    // factorization breakdown right at the band edge is
                    // itself evidence of an eigenvalue there
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let rayleigh = v.dot(&op.apply(shift, &v));
            if rayleigh.abs() > 4.0 * delta {
                // nothing actually inside the band
                z = 0;
            }
        }
    }
    Ok(InertiaCount { n_below: lo, z_at: z })
}

// ---------------------------------------------------------------------------
// Adjoint kernel (Melnikov bookkeeping)
// ---------------------------------------------------------------------------

/// Kernel of the adjoint linearization about a wave with a simple eigenvalue
/// at 0, as interior node samples, normalized so that
/// `<d_x u, Psi_ad>_{L2} = 1`.
pub fn adjoint_kernel(model: &ModelSpec, profile: &Profile) -> Result<Vec<RVec>> {
    let a = sized_linearization(model, profile)?;
    let eig = dense_eigenvalues(&a.transpose(), true)?;
    // eigenvalue closest to zero must be isolated from the runner-up
    let mut idx: Vec<usize> = (0..eig.values.len()).collect();
    idx.sort_by(|&i, &j| {
        eig.values[i]
            .norm()
            .partial_cmp(&eig.values[j].norm())
            .unwrap()
    });
    let nearest = eig.values[idx[0]];
    let runner = eig.values[idx[1]];
    if nearest.norm() > 1e-2 || runner.norm() < 4.0 * nearest.norm().max(1e-6) {
        return Err(Error::AdjointKernelNotOneDimensional);
    }
    if nearest.im.abs() > 1e-8 {
        return Err(Error::AdjointKernelNotOneDimensional);
    }
    let left = eig.left.expect("left eigenvectors requested");
    // real simple eigenvalue: the corresponding column is the real eigenvector
    let col = left.column(idx[0]).into_owned();
    let m = model.dim;
    let s = model.order.div_ceil(2);
    let n_int = col.len() / m;
    let h = profile.grid.h();
    // normalization <d_x u0, Psi> = 1 with centered differences of the wave
    let mut inner = 0.0;
    for i in 0..n_int {
        let node = i + s;
        for c in 0..m {
            let du =
                (profile.values[(c, node + 1)] - profile.values[(c, node - 1)]) / (2.0 * h);
            inner += du * col[i * m + c] * h;
        }
    }
    if inner.abs() < 1e-12 {
        return Err(Error::AdjointKernelNotOneDimensional);
    }
    let scaled = col / inner;
    Ok((0..n_int)
        .map(|i| RVec::from_fn(m, |c, _| scaled[i * m + c]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;
    use crate::model::{build_builtin, BuiltinModel, FieldKind, ModelSpec, PotentialSet};
    use crate::potential::Potential;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    /// Pure second-derivative operator as a model (zero nonlinearity).
    fn laplacian_model() -> ModelSpec {
        ModelSpec::new(
            "laplacian",
            2,
            1,
            2.0 * std::f64::consts::PI,
            FieldKind::Real,
            vec![
                Arc::new(|_| RMat::zeros(1, 1)),
                Arc::new(|_| RMat::identity(1, 1)),
            ],
            Arc::new(|_: &RVec, _| RVec::zeros(1)),
            Arc::new(|_: &RVec, _| RMat::zeros(1, 1)),
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn periodic_laplacian_spectrum_closed_form() {
        let model = laplacian_model();
        let n = 64;
        let g = Grid::periodic(0.0, 2.0 * std::f64::consts::PI, n).unwrap();
        let zero = Profile::constant(g.clone(), &RVec::zeros(1)).unwrap();
        let vals = direct_spectrum(&model, &zero, (-1e6, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(vals.len(), n);
        let h = g.h();
        let mut expected: Vec<f64> = (0..n)
            .map(|j| {
                -(2.0 / (h * h))
                    * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            })
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (v, e) in vals.iter().zip(expected) {
            assert_relative_eq!(v.re, e, epsilon = 1e-8, max_relative = 1e-10);
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn cap_refused() {
        let model = laplacian_model();
        let g = Grid::periodic(0.0, 2.0 * std::f64::consts::PI, 5000).unwrap();
        let zero = Profile::constant(g, &RVec::zeros(1)).unwrap();
        assert!(matches!(
            direct_spectrum(&model, &zero, (-1.0, 1.0, -1.0, 1.0)),
            Err(Error::TooLarge(5000, DENSE_CAP))
        ));
    }

    #[test]
    fn front_spectrum_translational_eigenvalue() {
        // eps = 0 sine-Gordon front: one eigenvalue near 0, the rest <= -1 + 0.01
        let mut p = BTreeMap::new();
        p.insert("eps".to_string(), 0.0);
        let model = build_builtin(
            BuiltinModel::ToyRde,
            &p,
            &PotentialSet {
                v: Some(Potential::cosine(1.0, 2.0)),
                ..Default::default()
            },
        )
        .unwrap();
        let g = Grid::line(-20.0, 20.0, 2001).unwrap();
        let front =
            Profile::from_fn(g, 1, |x| RVec::from_element(1, 4.0 * x.exp().atan())).unwrap();
        let vals = direct_spectrum(&model, &front, (-2.0, 1.0, -1e-6, 1e-6)).unwrap();
        let near_zero: Vec<_> = vals.iter().filter(|z| z.re.abs() < 1e-4).collect();
        assert_eq!(near_zero.len(), 1, "eigenvalues near zero: {near_zero:?}");
        for v in &vals {
            assert!(
                v.re.abs() < 1e-4 || v.re <= -1.0 + 0.01,
                "unexpected eigenvalue {v}"
            );
        }
    }

    #[test]
    fn inertia_of_positive_operator() {
        // q = 1: -u'' + 1 > 0 on the periodic cell
        let g = Grid::periodic(0.0, 2.0 * std::f64::consts::PI, 256).unwrap();
        let op = SturmOperator::from_fn(g, |_| 1.0).unwrap();
        let c = inertia_count(&op, 0.0).unwrap();
        assert_eq!(c, InertiaCount { n_below: 0, z_at: 0 });
        // eigenvalues of -u'' + 1 are 1 + j^2: three below 2.5 (j = 0, +-1)
        let c2 = inertia_count(&op, 2.5).unwrap();
        assert_eq!(c2.n_below, 3);
        // monotone in the shift
        let mut prev = 0;
        for shift in [-1.0, 0.5, 1.5, 3.0, 6.0] {
            let c = inertia_count(&op, shift).unwrap();
            assert!(c.n_below >= prev);
            prev = c.n_below;
        }
    }

    #[test]
    fn inertia_detects_kernel() {
        // -u'' on the periodic cell has a simple kernel (constants)
        let g = Grid::periodic(0.0, 2.0 * std::f64::consts::PI, 128).unwrap();
        let op = SturmOperator::from_fn(g, |_| 0.0).unwrap();
        let c = inertia_count(&op, 0.0).unwrap();
        assert_eq!(c.n_below, 0);
        assert_eq!(c.z_at, 1);
    }

    #[test]
    fn inertia_matches_dense_counts() {
        let g = Grid::periodic(0.0, 4.0 * std::f64::consts::PI, 200).unwrap();
        let op = SturmOperator::from_fn(g.clone(), |x| (x).sin() - 0.3).unwrap();
        for shift in [-0.5, 0.0, 0.7, 2.0] {
            let inertia = inertia_count(&op, shift).unwrap();
            let dense = op.dense(0.0);
            let eigs = dense_eigenvalues(&dense, false).unwrap().values;
            let below = eigs
                .iter()
                .filter(|z| z.re < shift - 1e-7 * op.scale())
                .count();
            assert_eq!(inertia.n_below, below, "shift {shift}");
        }
    }

    #[test]
    fn dirichlet_line_inertia() {
        // -u'' on [0, pi] Dirichlet: eigenvalues j^2, j >= 1
        let g = Grid::line(0.0, std::f64::consts::PI, 400).unwrap();
        let op = SturmOperator::from_fn(g, |_| 0.0).unwrap();
        let c = inertia_count(&op, 5.0).unwrap();
        assert_eq!(c.n_below, 2); // 1 and 4
    }
}
