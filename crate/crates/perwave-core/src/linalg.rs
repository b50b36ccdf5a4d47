//! Dense and banded linear algebra kernels shared across the crate.
//!
//! The banded LU (LAPACK `dgbtrf`-style, partial pivoting) backs the Newton
//! solvers; cyclic systems from periodic cells are handled as a banded core
//! plus a low-rank corner correction solved with the Woodbury identity.
//! Dense nonsymmetric eigensolves go straight to the system LAPACK.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

// ---------------------------------------------------------------------------
// Banded matrices
// ---------------------------------------------------------------------------

/// Band matrix in LAPACK storage with `kl` extra rows of fill-in workspace.
///
/// Entry `(i, j)` lives at `data[j * ldab + kl + ku + i - j]` for
/// `j - ku <= i <= j + kl`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku >= j && j + self.kl >= i);
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku >= j && j + self.kl >= i {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Transposed copy (bandwidths swap).
    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                let v = self.get(i, j);
                if v != 0.0 {
                    t.set(j, i, v);
                }
            }
        }
        t
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.n, self.n);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &RVec) -> RVec {
        let mut y = RVec::zeros(self.n);
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.get(i, j) * xj;
            }
        }
        y
    }

    /// LU factorization with partial pivoting; consumes the storage.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku; // fill-in widened upper bandwidth
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in A(j..=j+km, j)
            let base = j * ldab + kl + ku;
            let mut jp = 0usize;
            let mut pmax = self.data[base].abs();
            for p in 1..=km {
                let v = self.data[base + p].abs();
                if v > pmax {
                    pmax = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if pmax == 0.0 {
                return Err(Error::LinearSolve(format!(
                    "banded LU: zero pivot at column {j}"
                )));
            }
            if jp != 0 {
                // swap rows j and j+jp over columns j..=min(n-1, j+kv)
                let hi = (j + kv).min(n - 1);
                for col in j..=hi {
                    let a = col * ldab + kl + ku + j - col;
                    let b = a + jp;
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[base];
            for p in 1..=km {
                self.data[base + p] /= piv;
            }
            let hi = (j + kv).min(n - 1);
            for col in (j + 1)..=hi {
                let u = col * ldab + kl + ku + j - col;
                let ujc = self.data[u];
                if ujc != 0.0 {
                    for p in 1..=km {
                        let l = self.data[base + p];
                        self.data[u + p] -= l * ujc;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            data: self.data,
            ipiv,
        })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &RVec) -> RVec {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut RVec) {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        // forward substitution with row swaps
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap_rows(j, p);
            }
            let km = kl.min(n - 1 - j);
            let base = j * ldab + kl + ku;
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= self.data[base + q] * bj;
                }
            }
        }
        // back substitution
        for j in (0..n).rev() {
            let diag = self.data[j * ldab + kl + ku];
            b[j] /= diag;
            let xj = b[j];
            if xj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.data[j * ldab + kl + ku + i - j] * xj;
                }
            }
        }
    }
}

/// Band matrix plus a low-rank correction `B + U V^T` (periodic wrap corners).
pub struct LowRankUpdatedLu {
    lu: BandLu,
    w: RMat,       // B^{-1} U
    v: RMat,       // n x r
    cap_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, // I + V^T B^{-1} U
}

impl LowRankUpdatedLu {
    /// Factor `B + U V^T` given the banded part `B` and the correction factors.
    pub fn new(band: BandMatrix, u: RMat, v: RMat) -> Result<Self> {
        let lu = band.factor()?;
        let r = u.ncols();
        let mut w = RMat::zeros(u.nrows(), r);
        for c in 0..r {
            let mut col = RVec::from_column_slice(u.column(c).as_slice());
            lu.solve_in_place(&mut col);
            w.set_column(c, &col);
        }
        let cap = RMat::identity(r, r) + v.transpose() * &w;
        let cap_lu = cap.lu();
        if cap_lu.determinant().abs() == 0.0 {
            return Err(Error::LinearSolve(
                "singular capacitance matrix in Woodbury solve".into(),
            ));
        }
        Ok(LowRankUpdatedLu { lu, w, v, cap_lu })
    }

    pub fn solve(&self, b: &RVec) -> RVec {
        let mut x = self.lu.solve(b);
        let rhs = self.v.transpose() * &x;
        let y = self.cap_lu.solve(&rhs).expect("capacitance solve");
        x -= &self.w * y;
        x
    }
}

/// Linear operator with a banded core, optionally wrap-corrected.
pub enum FactoredSystem {
    Band(BandLu),
    Cyclic(LowRankUpdatedLu),
}

impl FactoredSystem {
    pub fn solve(&self, b: &RVec) -> RVec {
        match self {
            FactoredSystem::Band(lu) => lu.solve(b),
            FactoredSystem::Cyclic(w) => w.solve(b),
        }
    }
}

/// Smallest singular value of `B + U V^T` by inverse power iteration on
/// `A^T A`, using factorizations of the matrix and its transpose.
pub fn band_smallest_singular_value(
    band: &BandMatrix,
    low_rank: Option<(&RMat, &RMat)>,
    iters: usize,
) -> Result<f64> {
    let n = band.n;
    let fwd = match low_rank {
        None => FactoredSystem::Band(band.clone().factor()?),
        Some((u, v)) => FactoredSystem::Cyclic(LowRankUpdatedLu::new(band.clone(), u.clone(), v.clone())?),
    };
    let bwd = match low_rank {
        None => FactoredSystem::Band(band.transpose().factor()?),
        Some((u, v)) => FactoredSystem::Cyclic(LowRankUpdatedLu::new(band.transpose(), v.clone(), u.clone())?),
    };
    // deterministic pseudo-random start
    let mut x = RVec::from_fn(n, |i, _| ((i * 2654435761 + 12345) % 1000) as f64 / 1000.0 - 0.5);
    x /= x.norm();
    let mut sigma = f64::INFINITY;
    for _ in 0..iters {
        let w = bwd.solve(&x);
        let y = fwd.solve(&w);
        let ny = y.norm();
        if !ny.is_finite() || ny == 0.0 {
            break;
        }
        sigma = 1.0 / ny.sqrt();
        x = y / ny;
    }
    Ok(sigma)
}

// ---------------------------------------------------------------------------
// Dense eigensolver (LAPACK dgeev)
// ---------------------------------------------------------------------------

extern "C" {
    fn dgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

pub struct DenseEig {
    pub values: Vec<Complex64>,
    /// Left eigenvectors (columns, conjugate-pair packed as per LAPACK), if requested.
    pub left: Option<RMat>,
}

/// All eigenvalues of a real dense matrix; optionally left eigenvectors.
pub fn dense_eigenvalues(a: &RMat, want_left: bool) -> Result<DenseEig> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let ni = n as i32;
    let mut af = a.as_slice().to_vec(); // nalgebra is column-major, as LAPACK wants
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut vl = if want_left { vec![0.0f64; n * n] } else { vec![0.0f64; 1] };
    let jobvl = if want_left { b"V" } else { b"N" };
    let ldvl = if want_left { ni } else { 1 };
    let mut info = 0i32;
    // workspace query
    let mut wkopt = [0.0f64];
    let lwork_query = -1i32;
    unsafe {
        dgeev_(
            jobvl.as_ptr(),
            b"N".as_ptr(),
            &ni,
            af.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vl.as_mut_ptr(),
            &ldvl,
            std::ptr::null_mut(),
            &1,
            wkopt.as_mut_ptr(),
            &lwork_query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::LinearSolve(format!("dgeev workspace query: info = {info}")));
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        dgeev_(
            jobvl.as_ptr(),
            b"N".as_ptr(),
            &ni,
            af.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vl.as_mut_ptr(),
            &ldvl,
            std::ptr::null_mut(),
            &1,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::LinearSolve(format!("dgeev: info = {info}")));
    }
    let values = wr
        .iter()
        .zip(&wi)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    let left = want_left.then(|| RMat::from_column_slice(n, n, &vl));
    Ok(DenseEig { values, left })
}

// ---------------------------------------------------------------------------
// Complex helpers
// ---------------------------------------------------------------------------

/// Eigenvalues of a small complex matrix via unitary Schur reduction.
pub fn complex_eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 100_000)
        .or_else(|| m.clone().try_schur(1e-11, 100_000))
        .ok_or_else(|| Error::LinearSolve("complex Schur iteration failed".into()))?;
    let t = schur.unpack().1;
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn complex_det(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

/// Spectral projector of `m` onto eigenvalues inside the circle of radius
/// `radius`, computed by resolvent quadrature (trapezoid on the circle).
pub fn spectral_projector(m: &CMat, radius: f64, nodes: usize) -> Result<CMat> {
    let n = m.nrows();
    let id = CMat::identity(n, n);
    let mut nodes = nodes;
    loop {
        let mut p = CMat::zeros(n, n);
        for j in 0..nodes {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            let z = Complex64::from_polar(radius, th);
            let shifted = &id * z - m;
            let inv = shifted
                .lu()
                .try_inverse()
                .ok_or(Error::NonHyperbolic(0.0))?;
            p += inv * z;
        }
        p /= Complex64::new(nodes as f64, 0.0);
        let resid = (&p * &p - &p).norm();
        if resid < 1e-9 {
            return Ok(p);
        }
        if nodes >= 2048 {
            return Err(Error::LinearSolve(format!(
                "spectral projector quadrature stalled (idempotency residual {resid:.3e})"
            )));
        }
        nodes *= 2;
    }
}

/// Smallest singular value of a (possibly rectangular) complex matrix,
/// via the Gram matrix of the thinner dimension.
pub fn smallest_singular_value_complex(f: &CMat) -> f64 {
    let g = if f.nrows() >= f.ncols() {
        f.adjoint() * f
    } else {
        f * f.adjoint()
    };
    let r = g.nrows();
    if r == 0 {
        return 0.0;
    }
    // inverse power iteration on the Hermitian Gram matrix
    let lu = g.clone().lu();
    let det = lu.determinant();
    if det.norm() == 0.0 {
        return 0.0;
    }
    let mut x = CVec::from_fn(r, |i, _| Complex64::new(1.0 + i as f64 * 0.3, 0.1 * i as f64));
    x /= Complex64::new(x.norm(), 0.0);
    let mut mu = 0.0f64;
    for _ in 0..60 {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        let ny = y.norm();
        if !ny.is_finite() || ny == 0.0 {
            return 0.0;
        }
        mu = 1.0 / ny;
        x = y / Complex64::new(ny, 0.0);
    }
    mu.max(0.0).sqrt()
}

/// Largest singular value (power iteration on the Gram matrix).
pub fn largest_singular_value_complex(f: &CMat) -> f64 {
    let g = if f.nrows() >= f.ncols() {
        f.adjoint() * f
    } else {
        f * f.adjoint()
    };
    let r = g.nrows();
    if r == 0 {
        return 0.0;
    }
    let mut x = CVec::from_fn(r, |i, _| Complex64::new(1.0, 0.05 * i as f64));
    x /= Complex64::new(x.norm(), 0.0);
    let mut lam = 0.0;
    for _ in 0..60 {
        let y = &g * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        lam = ny;
        x = y / Complex64::new(ny, 0.0);
    }
    lam.sqrt()
}

/// Operator 2-norm of a complex matrix.
pub fn spectral_norm(m: &CMat) -> f64 {
    largest_singular_value_complex(m)
}

/// Projection onto `ran(P)` along `ker(Q)` for projections with |P - Q| < 1.
///
/// Solves `R (I - Q + P) = P`, which characterizes the pasted projection.
pub fn paste_projections(p: &CMat, q: &CMat) -> Result<CMat> {
    let dist = spectral_norm(&(p - q));
    if dist >= 1.0 {
        return Err(Error::ProjectionsTooFar(dist));
    }
    let n = p.nrows();
    let id = CMat::identity(n, n);
    // R restricted by R x = x on ran(P), R x = 0 on ker(Q):
    // any v splits as v = (I-Q)v + Qv with (I-Q)v in ker(Q);
    // define R = P (Q P + (I-Q)(I-P))^{-1} ... use the direct construction:
    // M = P + (I - Q) maps ran(P) id-like and ker(Q) id-like; R = P M^{-1}.
    let m = p + (&id - q);
    let minv = m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::LinearSolve("pasting: P + (I-Q) singular".into()))?;
    Ok(p * minv)
}

/// Real-valued trapezoid weights are used in several norms; this is the
/// complex inner product `conj(a) . b` with uniform weight `h`.
pub fn weighted_inner(a: &CVec, b: &CVec, h: f64) -> Complex64 {
    a.dotc(b) * Complex64::new(h, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_fill(n: usize, seed: u64) -> Vec<f64> {
        // small deterministic generator for test matrices
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
            })
            .collect()
    }

    #[test]
    fn banded_lu_matches_dense() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let vals = rng_fill(n * (kl + ku + 1), 7);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut k = 0;
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                let mut v = vals[k % vals.len()];
                if i == j {
                    v += 4.0; // keep comfortably nonsingular
                }
                band.set(i, j, v);
                k += 1;
            }
        }
        let dense = band.to_dense();
        let b = RVec::from_vec(rng_fill(n, 99));
        let lu = band.clone().factor().unwrap();
        let x = lu.solve(&b);
        let xd = dense.lu().solve(&b).unwrap();
        assert!((x - xd).norm() < 1e-10);
    }

    #[test]
    fn woodbury_matches_dense_cyclic() {
        let n = 60;
        let mut band = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            band.set(i, i, 2.5 + 0.1 * (i as f64).sin());
            if i + 1 < n {
                band.set(i, i + 1, -1.0);
                band.set(i + 1, i, -1.0);
            }
        }
        // wrap corners
        let mut u = RMat::zeros(n, 2);
        let mut v = RMat::zeros(n, 2);
        u[(0, 0)] = 1.0;
        v[(n - 1, 0)] = -1.0;
        u[(n - 1, 1)] = 1.0;
        v[(0, 1)] = -1.0;
        let mut dense = band.to_dense();
        dense[(0, n - 1)] = -1.0;
        dense[(n - 1, 0)] = -1.0;
        let rhs = RVec::from_vec(rng_fill(n, 3));
        let solver = LowRankUpdatedLu::new(band, u, v).unwrap();
        let x = solver.solve(&rhs);
        let xd = dense.lu().solve(&rhs).unwrap();
        assert!((x - xd).norm() < 1e-9);
    }

    #[test]
    fn dgeev_known_spectrum() {
        // companion of x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let a = RMat::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let mut eig = dense_eigenvalues(&a, false).unwrap().values;
        eig.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (e, want) in eig.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e.re - want).abs() < 1e-10 && e.im.abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_projector_splits_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(0.3, 0.1),
            Complex64::new(2.0, -0.5),
            Complex64::new(0.0, 0.7),
        ]));
        let p = spectral_projector(&m, 1.0, 64).unwrap();
        // trapezoid quadrature converges like (|rho|/r)^K: 0.7^64 ~ 1e-10
        assert!((p[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(p[(1, 1)].norm() < 1e-8);
        assert!((p[(2, 2)] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn paste_bound_holds() {
        // projections with |P - Q| = 0.5: bound |R| <= |P| / (1 - 0.5) = 2
        let p = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let q = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let r = paste_projections(&p, &q).unwrap();
        assert!((&r * &r - &r).norm() < 1e-12);
        let np = spectral_norm(&p);
        let dist = spectral_norm(&(&p - &q));
        assert!(spectral_norm(&r) <= np / (1.0 - dist) + 1e-9);
    }

    #[test]
    fn smallest_sv_of_known_matrix() {
        let f = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(3.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        );
        let s = smallest_singular_value_complex(&f);
        assert!((s - 0.5).abs() < 1e-8);
        assert!((largest_singular_value_complex(&f) - 3.0).abs() < 1e-8);
    }
}
