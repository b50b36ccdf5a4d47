//! Construction and spectral stability analysis of stationary multifront and
//! periodic pulse solutions of 1-D semilinear evolution systems with
//! spatially periodic coefficients.
//!
//! The crate builds waves by damped Newton iteration on finite-difference
//! discretizations, concatenates or periodically extends them with smooth
//! cut-off families, and decides spectral stability through Floquet analysis
//! of the periodic end states, analytic Evans functions evaluated with
//! renormalized dichotomy frames, and argument-principle root counting.
//! Brute-force spectral checks (dense eigensolves, LDL^T inertia counts)
//! provide an independent oracle for every count the Evans machinery
//! produces.

pub mod error;
pub mod linalg;
pub mod ode;
pub mod potential;
pub mod grid;
pub mod model;
pub mod floquet;
pub mod solver;
pub mod construct;
pub mod evans;
pub mod oracle;
pub mod applications;

pub use error::{Error, Result};
pub use grid::{discrete_norm, partition_of_unity, periodic_cutoff, Grid, GridKind, NormKind, Profile};
pub use model::{
    build_builtin, linearize_first_order, BuiltinModel, FirstOrderField, ModelConfig, ModelSpec,
    PotentialSet, WeightSpec,
};
pub use floquet::{
    absolute_spectrum_test, essential_spectrum_test, floquet_data, monodromy, FloquetData,
};
pub use potential::{FourierSeries, Potential};

use std::io::Write;
use std::path::Path;

/// Write a file atomically (temp file in the same directory, then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
