//! Grids, grid functions, discrete Sobolev norms, and the smooth cut-off /
//! partition-of-unity constructions used to concatenate waves.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

/// One-dimensional uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// Truncated line `[a, b]`, both endpoints included.
    Line { a: f64, b: f64 },
    /// Periodic cell `[start, start + length)`, right endpoint excluded.
    Periodic { start: f64, length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kind: GridKind,
    pub n: usize,
}

impl Grid {
    pub fn line(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::InvalidGrid(format!("need at least 16 nodes, got {n}")));
        }
        if !(b > a) {
            return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}]")));
        }
        Ok(Grid {
            kind: GridKind::Line { a, b },
            n,
        })
    }

    pub fn periodic(start: f64, length: f64, n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::InvalidGrid(format!("need at least 16 nodes, got {n}")));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidGrid(format!("cell length {length} must be positive")));
        }
        Ok(Grid {
            kind: GridKind::Periodic { start, length },
            n,
        })
    }

    /// Line grid whose spacing divides `t_div` so that multiples of `t_div`
    /// land on nodes; the requested endpoints must be multiples of `t_div`
    /// up to rounding.
    pub fn line_commensurate(a: f64, b: f64, t_div: f64, h_target: f64) -> Result<Self> {
        let m = (t_div / h_target).round().max(1.0) as usize;
        let h = t_div / m as f64;
        let n = ((b - a) / h).round() as usize + 1;
        Grid::line(a, a + h * (n - 1) as f64, n)
    }

    /// Periodic cell `[-n_periods T / 2, n_periods T / 2)` with spacing
    /// dividing `t`.
    pub fn periodic_cell(t: f64, n_periods: usize, h_target: f64) -> Result<Self> {
        let m = (t / h_target).round().max(1.0) as usize;
        let n = m * n_periods;
        let length = t * n_periods as f64;
        Grid::periodic(-0.5 * length, length, n)
    }

    pub fn h(&self) -> f64 {
        match self.kind {
            GridKind::Line { a, b } => (b - a) / (self.n - 1) as f64,
            GridKind::Periodic { length, .. } => length / self.n as f64,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::Line { a, .. } => a + self.h() * i as f64,
            GridKind::Periodic { start, .. } => start + self.h() * i as f64,
        }
    }

    pub fn start(&self) -> f64 {
        match self.kind {
            GridKind::Line { a, .. } => a,
            GridKind::Periodic { start, .. } => start,
        }
    }

    /// Right edge: for periodic grids the (excluded) endpoint `start + length`.
    pub fn end(&self) -> f64 {
        match self.kind {
            GridKind::Line { b, .. } => b,
            GridKind::Periodic { start, length } => start + length,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, GridKind::Periodic { .. })
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }
}

/// Metadata attached to a wave profile.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub model: String,
    pub params: BTreeMap<String, f64>,
}

/// A wave sampled on a grid, with optional periodic end states.
#[derive(Debug, Clone)]
pub struct Profile {
    pub grid: Grid,
    /// `m x N` values, one row per component.
    pub values: RMat,
    pub asymptotics: Option<Asymptotics>,
    pub meta: ProfileMeta,
}

#[derive(Debug, Clone)]
pub struct Asymptotics {
    pub left: Arc<Profile>,
    pub right: Arc<Profile>,
}

impl Profile {
    pub fn new(grid: Grid, values: RMat) -> Result<Self> {
        if values.ncols() != grid.n {
            return Err(Error::DimensionMismatch {
                expected: grid.n,
                got: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("profile contains non-finite values".into()));
        }
        Ok(Profile {
            grid,
            values,
            asymptotics: None,
            meta: ProfileMeta::default(),
        })
    }

    pub fn from_fn<F>(grid: Grid, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> RVec,
    {
        let mut values = RMat::zeros(dim, grid.n);
        for i in 0..grid.n {
            values.set_column(i, &f(grid.x(i)));
        }
        Profile::new(grid, values)
    }

    pub fn constant(grid: Grid, state: &RVec) -> Result<Self> {
        let mut values = RMat::zeros(state.len(), grid.n);
        for i in 0..grid.n {
            values.set_column(i, state);
        }
        Profile::new(grid, values)
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn with_asymptotics(mut self, left: Arc<Profile>, right: Arc<Profile>) -> Self {
        self.asymptotics = Some(Asymptotics { left, right });
        self
    }

    pub fn with_meta(mut self, model: &str, params: &BTreeMap<String, f64>) -> Self {
        self.meta = ProfileMeta {
            model: model.to_string(),
            params: params.clone(),
        };
        self
    }

    /// Mismatch between the profile and its attached end states at the
    /// domain boundary (max over components), if asymptotics are present.
    pub fn boundary_mismatch(&self) -> Option<f64> {
        let asym = self.asymptotics.as_ref()?;
        let li = asym.left.interpolant();
        let ri = asym.right.interpolant();
        let a = self.grid.start();
        let b = self.grid.end();
        let dl = (self.values.column(0) - li.eval(a)).amax();
        let last = self.grid.n - 1;
        let xb = if self.grid.is_periodic() { b - self.grid.h() } else { b };
        let dr = (self.values.column(last) - ri.eval(xb)).amax();
        Some(dl.max(dr))
    }

    pub fn interpolant(&self) -> Interpolant {
        Interpolant::from_profile(self)
    }

    // -- serialization -------------------------------------------------------

    /// Write `x, u1..um` rows to a CSV file and a JSON sidecar with the grid,
    /// metadata and (inline) asymptotic states.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push('x');
        for c in 1..=self.dim() {
            out.push_str(&format!(",u{c}"));
        }
        out.push('\n');
        for i in 0..self.grid.n {
            out.push_str(&format!("{:.17e}", self.grid.x(i)));
            for c in 0..self.dim() {
                out.push_str(&format!(",{:.17e}", self.values[(c, i)]));
            }
            out.push('\n');
        }
        crate::write_atomic(path, out.as_bytes())?;
        let sidecar = SidecarData::from_profile(self);
        let json = serde_json::to_string_pretty(&sidecar)?;
        crate::write_atomic(&path.with_extension("json"), json.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 {
                continue; // header
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            rows.push(vals.map_err(|e| Error::Invalid(format!("csv line {}: {e}", ln + 1)))?);
        }
        if rows.len() < 2 {
            return Err(Error::Invalid("csv has fewer than two data rows".into()));
        }
        let m = rows[0].len() - 1;
        let n = rows.len();
        let mut values = RMat::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            for c in 0..m {
                values[(c, i)] = row[c + 1];
            }
        }
        // sidecar restores the exact grid and asymptotics when available
        let sidecar_path = path.with_extension("json");
        if sidecar_path.exists() {
            let sc: SidecarData = serde_json::from_str(&std::fs::read_to_string(&sidecar_path)?)?;
            return sc.into_profile(values);
        }
        let a = rows[0][0];
        let b = rows[n - 1][0];
        Ok(Profile::new(Grid::line(a, b, n)?, values)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SidecarData {
    grid: Grid,
    meta: ProfileMeta,
    asymptotics: Option<(SidecarState, SidecarState)>,
}

#[derive(Serialize, Deserialize)]
struct SidecarState {
    grid: Grid,
    values: Vec<Vec<f64>>,
    meta: ProfileMeta,
}

impl SidecarData {
    fn from_profile(p: &Profile) -> Self {
        let enc = |q: &Profile| SidecarState {
            grid: q.grid.clone(),
            values: (0..q.dim())
                .map(|c| q.values.row(c).iter().cloned().collect())
                .collect(),
            meta: q.meta.clone(),
        };
        SidecarData {
            grid: p.grid.clone(),
            meta: p.meta.clone(),
            asymptotics: p.asymptotics.as_ref().map(|a| (enc(&a.left), enc(&a.right))),
        }
    }

    fn into_profile(self, values: RMat) -> Result<Profile> {
        let dec = |s: SidecarState| -> Result<Profile> {
            let m = s.values.len();
            let n = s.grid.n;
            let mut vals = RMat::zeros(m, n);
            for (c, row) in s.values.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Invalid("sidecar state length mismatch".into()));
                }
                for i in 0..n {
                    vals[(c, i)] = row[i];
                }
            }
            let mut p = Profile::new(s.grid, vals)?;
            p.meta = s.meta;
            Ok(p)
        };
        let mut p = Profile::new(self.grid, values)?;
        p.meta = self.meta;
        if let Some((l, r)) = self.asymptotics {
            p.asymptotics = Some(Asymptotics {
                left: Arc::new(dec(l)?),
                right: Arc::new(dec(r)?),
            });
        }
        Ok(p)
    }
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Piecewise-cubic (4-point Lagrange) interpolant of a profile. Outside a
/// truncated-line grid the attached periodic end states take over; without
/// asymptotics the edge value is held.
#[derive(Clone)]
pub struct Interpolant {
    grid: Grid,
    values: Arc<RMat>,
    left: Option<Arc<Interpolant>>,
    right: Option<Arc<Interpolant>>,
}

impl Interpolant {
    pub fn from_profile(p: &Profile) -> Self {
        Interpolant {
            grid: p.grid.clone(),
            values: Arc::new(p.values.clone()),
            left: p
                .asymptotics
                .as_ref()
                .map(|a| Arc::new(a.left.interpolant())),
            right: p
                .asymptotics
                .as_ref()
                .map(|a| Arc::new(a.right.interpolant())),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn eval(&self, x: f64) -> RVec {
        let mut out = RVec::zeros(self.dim());
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: f64, out: &mut RVec) {
        let n = self.grid.n;
        let h = self.grid.h();
        match self.grid.kind {
            GridKind::Periodic { start, length } => {
                let mut t = (x - start).rem_euclid(length) / h;
                if t >= n as f64 {
                    t = 0.0;
                }
                let i = t.floor() as isize;
                let idx = |k: isize| -> usize { (k.rem_euclid(n as isize)) as usize };
                let cols = [idx(i - 1), idx(i), idx(i + 1), idx(i + 2)];
                let s = t - i as f64 + 1.0; // measured from the first stencil node
                lagrange4(&self.values, &cols, s, out);
            }
            GridKind::Line { a, b } => {
                if x < a {
                    if let Some(l) = &self.left {
                        l.eval_into(x, out);
                    } else {
                        out.copy_from(&self.values.column(0));
                    }
                    return;
                }
                if x > b {
                    if let Some(r) = &self.right {
                        r.eval_into(x, out);
                    } else {
                        out.copy_from(&self.values.column(n - 1));
                    }
                    return;
                }
                let t = (x - a) / h;
                let i = (t.floor() as usize).min(n - 2);
                let base = i.saturating_sub(1).min(n - 4);
                let cols = [base, base + 1, base + 2, base + 3];
                let s = t - base as f64; // in [0,3]
                lagrange4(&self.values, &cols, s, out);
            }
        }
    }
}

/// Cubic Lagrange through 4 equispaced samples; `s` measured in grid units
/// from the first stencil node (nodes sit at 0, 1, 2, 3).
fn lagrange4(values: &RMat, cols: &[usize; 4], s: f64, out: &mut RVec) {
    let (w0, w1, w2, w3) = lag_weights(s);
    for r in 0..out.len() {
        out[r] = w0 * values[(r, cols[0])]
            + w1 * values[(r, cols[1])]
            + w2 * values[(r, cols[2])]
            + w3 * values[(r, cols[3])];
    }
}

#[inline]
fn lag_weights(s: f64) -> (f64, f64, f64, f64) {
    // nodes at 0,1,2,3
    let w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    (w0, w1, w2, w3)
}

// ---------------------------------------------------------------------------
// Smooth cut-offs
// ---------------------------------------------------------------------------

/// C-infinity ramp r(t): 0 at t<=0, 1 at t>=1, built from exp(-1/t) ratios.
#[inline]
pub fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let e = (-1.0 / t).exp();
        let eb = (-1.0 / (1.0 - t)).exp();
        e / (e + eb)
    }
}

/// Analytic derivative of [`ramp`].
#[inline]
pub fn ramp_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let e = (-1.0 / t).exp();
        let eb = (-1.0 / (1.0 - t)).exp();
        let d = e + eb;
        (e * eb / (d * d)) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)))
    }
}

/// One member of a cut-off family: plateau with smooth ramps, optionally
/// periodized.
#[derive(Debug, Clone)]
pub struct CutoffFn {
    /// Ramp up over `[x0, x0 + w]`; `None` means the function is 1 on the left.
    pub up: Option<(f64, f64)>,
    /// Ramp down over `[x0, x0 + w]`; `None` means the function stays 1 on the right.
    pub down: Option<(f64, f64)>,
    /// Periodize with this period (evaluation wraps to the base cell).
    pub period: Option<f64>,
}

impl CutoffFn {
    pub fn eval(&self, x: f64) -> f64 {
        let x = self.fold(x);
        let mut v = 1.0;
        if let Some((x0, w)) = self.up {
            v *= ramp((x - x0) / w);
        }
        if let Some((x0, w)) = self.down {
            v *= 1.0 - ramp((x - x0) / w);
        }
        v
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let x = self.fold(x);
        match (self.up, self.down) {
            (None, None) => 0.0,
            (Some((x0, w)), None) => ramp_deriv((x - x0) / w) / w,
            (None, Some((x0, w))) => -ramp_deriv((x - x0) / w) / w,
            (Some((u0, uw)), Some((d0, dw))) => {
                let ru = ramp((x - u0) / uw);
                let rd = 1.0 - ramp((x - d0) / dw);
                ramp_deriv((x - u0) / uw) / uw * rd - ru * ramp_deriv((x - d0) / dw) / dw
            }
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        // ramps do not overlap in any construction here; a small central
        // difference of the analytic first derivative is accurate enough
        // for the Sobolev-bound diagnostics
        let d = 1e-6;
        (self.deriv(x + d) - self.deriv(x - d)) / (2.0 * d)
    }

    fn fold(&self, x: f64) -> f64 {
        match self.period {
            Some(p) => x - p * (x / p).round(),
            None => x,
        }
    }
}

/// A family of smooth cut-offs with recorded supports, plateaus and the
/// measured W^{k,inf} bound.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub parts: Vec<CutoffFn>,
    /// `(support_lo, support_hi)` per part; infinite ends use +-inf.
    pub supports: Vec<(f64, f64)>,
    /// `(plateau_lo, plateau_hi)` per part.
    pub plateaus: Vec<(f64, f64)>,
    /// max over parts and derivative orders 0..=2 of the sup norm.
    pub sobolev_bound: f64,
}

impl CutoffFamily {
    pub fn sum_at(&self, x: f64) -> f64 {
        self.parts.iter().map(|c| c.eval(x)).sum()
    }

    fn measure_bound(parts: &[CutoffFn], supports: &[(f64, f64)]) -> f64 {
        let mut bound: f64 = 1.0; // sup |chi| = 1 on a plateau
        for (c, (lo, hi)) in parts.iter().zip(supports) {
            let lo = lo.max(-1e6);
            let hi = hi.min(1e6);
            let steps = 2000;
            for i in 0..=steps {
                let x = lo + (hi - lo) * i as f64 / steps as f64;
                bound = bound.max(c.deriv(x).abs());
                bound = bound.max(c.second_deriv(x).abs());
            }
        }
        bound
    }

    fn verify_pointwise(&self, partition: bool, probe: &[f64]) -> Result<()> {
        for &x in probe {
            for (c, (plo, phi)) in self.parts.iter().zip(&self.plateaus) {
                if x >= *plo && x <= *phi {
                    let v = c.eval(x);
                    if (v - 1.0).abs() > 1e-13 {
                        return Err(Error::Invalid(format!(
                            "cut-off plateau violated at x = {x}: value {v}"
                        )));
                    }
                }
            }
            for (c, (slo, shi)) in self.parts.iter().zip(&self.supports) {
                if x < *slo || x > *shi {
                    let v = c.eval(x);
                    if v.abs() > 1e-13 {
                        return Err(Error::Invalid(format!(
                            "cut-off support violated at x = {x}: value {v}"
                        )));
                    }
                }
            }
            if partition {
                let s = self.sum_at(x);
                if (s - 1.0).abs() > 1e-13 {
                    return Err(Error::Invalid(format!(
                        "partition of unity broken at x = {x}: sum {s}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Partition of unity with the given interior crossings: member j ramps up
/// around crossing j-1 and down around crossing j, with overlap width 2.
/// Adjacent ramps are exact complements, so the family sums to 1 pointwise.
pub fn partition_at_crossings(crossings: &[f64]) -> CutoffFamily {
    let m = crossings.len() + 1;
    let mut parts = Vec::with_capacity(m);
    let mut supports = Vec::with_capacity(m);
    let mut plateaus = Vec::with_capacity(m);
    for j in 0..m {
        let up = (j > 0).then(|| (crossings[j - 1] - 1.0, 2.0));
        let down = (j < m - 1).then(|| (crossings[j] - 1.0, 2.0));
        let s_lo = up.map_or(f64::NEG_INFINITY, |(x0, _)| x0);
        let s_hi = down.map_or(f64::INFINITY, |(x0, w)| x0 + w);
        let p_lo = up.map_or(f64::NEG_INFINITY, |(x0, w)| x0 + w);
        let p_hi = down.map_or(f64::INFINITY, |(x0, _)| x0);
        parts.push(CutoffFn { up, down, period: None });
        supports.push((s_lo, s_hi));
        plateaus.push((p_lo, p_hi));
    }
    let sobolev_bound = CutoffFamily::measure_bound(&parts, &supports);
    CutoffFamily {
        parts,
        supports,
        plateaus,
        sobolev_bound,
    }
}

/// Partition of unity with crossings at `(j + 1/2) n T`, `j = 1..M-1`,
/// ramp half-overlap of width 1 on each side.
pub fn partition_of_unity(grid: &Grid, m_fronts: usize, n: usize, t: f64) -> Result<CutoffFamily> {
    if m_fronts < 2 {
        return Err(Error::Invalid(format!(
            "partition of unity needs at least two members, got {m_fronts}"
        )));
    }
    if n < 2 {
        return Err(Error::Invalid(format!("spacing multiplier n = {n} < 2")));
    }
    let nt = n as f64 * t;
    let lo_req = 0.5 * nt;
    let hi_req = (m_fronts as f64 + 0.5) * nt;
    if grid.start() > lo_req || grid.end() < hi_req {
        return Err(Error::GridTooShort(format!(
            "grid [{}, {}] must cover [{lo_req}, {hi_req}]",
            grid.start(),
            grid.end()
        )));
    }
    let crossings: Vec<f64> = (1..m_fronts).map(|j| (j as f64 + 0.5) * nt).collect();
    let family = partition_at_crossings(&crossings);
    let probe: Vec<f64> = grid.nodes().collect();
    family.verify_pointwise(true, &probe)?;
    Ok(family)
}

/// Even nT-periodic cut-off: 1 on `[-nT/6, nT/6]`, 0 on
/// `[-nT/2, -nT/3] U [nT/3, nT/2]`, smooth in between.
pub fn periodic_cutoff(n: usize, t: f64, grid: &Grid) -> Result<CutoffFamily> {
    if n < 3 {
        return Err(Error::Invalid(format!("periodic cut-off needs n >= 3, got {n}")));
    }
    let nt = n as f64 * t;
    match grid.kind {
        GridKind::Periodic { length, .. } if (length - nt).abs() < 1e-9 * nt => {}
        _ => return Err(Error::InvalidGrid("expected a periodic grid of cell length nT".into())),
    }
    let zone = nt / 6.0;
    if zone < 2.0 * grid.h() {
        return Err(Error::GridTooShort(format!(
            "transition zone {zone} narrower than 2h = {}",
            2.0 * grid.h()
        )));
    }
    let part = CutoffFn {
        up: Some((-2.0 * zone, zone)),
        down: Some((zone, zone)),
        period: Some(nt),
    };
    let supports = vec![(-2.0 * zone, 2.0 * zone)];
    let plateaus = vec![(-zone, zone)];
    let sobolev_bound = CutoffFamily::measure_bound(std::slice::from_ref(&part), &supports);
    let family = CutoffFamily {
        parts: vec![part],
        supports,
        plateaus,
        sobolev_bound,
    };
    // verify on the base cell only (supports recorded for the base cell)
    let probe: Vec<f64> = (0..grid.n)
        .map(|i| {
            let x = grid.x(i);
            x - nt * (x / nt).round()
        })
        .collect();
    family.verify_pointwise(false, &probe)?;
    Ok(family)
}

// ---------------------------------------------------------------------------
// Discrete norms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// Sobolev norm including central-difference derivatives up to the order.
    Hk(usize),
}

/// Trapezoidal L2 / H^j norm of a profile (all components together).
pub fn discrete_norm(p: &Profile, kind: NormKind) -> f64 {
    let order = match kind {
        NormKind::L2 => 0,
        NormKind::Hk(j) => {
            assert!(j <= 4, "H^j norms supported for j <= 4");
            j
        }
    };
    let mut total = 0.0;
    let mut current = p.values.clone();
    for _ in 0..=order {
        total += l2_sq(&current, &p.grid);
        current = diff_matrix(&current, &p.grid);
    }
    total.sqrt()
}

fn l2_sq(values: &RMat, grid: &Grid) -> f64 {
    let h = grid.h();
    let n = grid.n;
    let mut s = 0.0;
    for i in 0..n {
        let w = if grid.is_periodic() || (i > 0 && i + 1 < n) {
            1.0
        } else {
            0.5
        };
        for r in 0..values.nrows() {
            s += w * values[(r, i)] * values[(r, i)];
        }
    }
    s * h
}

/// Central first difference with 2nd-order one-sided closure at line ends.
fn diff_matrix(values: &RMat, grid: &Grid) -> RMat {
    let n = grid.n;
    let h = grid.h();
    let m = values.nrows();
    let mut d = RMat::zeros(m, n);
    for r in 0..m {
        for i in 0..n {
            d[(r, i)] = if grid.is_periodic() {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                (values[(r, ip)] - values[(r, im)]) / (2.0 * h)
            } else if i == 0 {
                (-3.0 * values[(r, 0)] + 4.0 * values[(r, 1)] - values[(r, 2)]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[(r, n - 1)] - 4.0 * values[(r, n - 2)] + values[(r, n - 3)]) / (2.0 * h)
            } else {
                (values[(r, i + 1)] - values[(r, i - 1)]) / (2.0 * h)
            };
        }
    }
    d
}

/// L2 distance between two profiles on the same grid.
pub fn l2_distance(a: &Profile, b: &Profile) -> f64 {
    assert_eq!(a.grid.n, b.grid.n);
    let diff = &a.values - &b.values;
    l2_sq(&diff, &a.grid).sqrt()
}

/// Resample a profile onto a new grid through its interpolant.
pub fn resample(p: &Profile, grid: Grid) -> Result<Profile> {
    let interp = p.interpolant();
    let mut values = RMat::zeros(p.dim(), grid.n);
    for i in 0..grid.n {
        values.set_column(i, &interp.eval(grid.x(i)));
    }
    let mut out = Profile::new(grid, values)?;
    out.asymptotics = p.asymptotics.clone();
    out.meta = p.meta.clone();
    Ok(out)
}
