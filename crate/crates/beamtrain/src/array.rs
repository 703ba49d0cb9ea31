//! Steering vectors, inner products, and beam-gain evaluation for uniform
//! linear arrays with half-wavelength spacing.
//!
//! Directions are direction cosines `omega` in `[-1, 1]` throughout; the
//! physical angle itself never appears. All functions are pure and safe to
//! call concurrently.

use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;

/// Rejects non-finite or out-of-range direction cosines.
fn check_omega(omega: f64) -> Result<()> {
    if omega.is_nan() || omega.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "direction cosine {omega} outside [-1, 1]"
        )));
    }
    Ok(())
}

/// Channel steering vector `(1/sqrt(N)) [1, e^{j pi omega}, ..., e^{j (N-1) pi omega}]`.
///
/// Unit Euclidean norm for every `n >= 1`.
pub fn steering_vector(n: usize, omega: f64) -> Result<Vec<Complex64>> {
    check_omega(omega)?;
    if n < 1 {
        return Err(Error::InvalidArgument("array size must be >= 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|k| Complex64::from_polar(scale, PI * k as f64 * omega))
        .collect())
}

/// Conjugate inner product `a^H b`.
pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "inner product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
}

/// Beam gain of `v` along `omega`: `sum_n v_n e^{-j pi (n-1) omega}`.
///
/// Equals `sqrt(N) * steering_vector(N, omega)^H v`.
pub fn beam_gain(v: &[Complex64], omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("beam gain of empty vector".into()));
    }
    Ok(v.iter()
        .enumerate()
        .map(|(k, w)| w * Complex64::from_polar(1.0, -PI * k as f64 * omega))
        .sum())
}

/// `|beam_gain|` sampled on a uniform `omega` grid over `[-1, 1]`,
/// endpoints included.
pub fn pattern_samples(v: &[Complex64], grid_size: usize) -> Result<Vec<(f64, f64)>> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "pattern grid size {grid_size} must be >= 2"
        )));
    }
    (0..grid_size)
        .map(|k| {
            let omega = -1.0 + 2.0 * k as f64 / (grid_size - 1) as f64;
            beam_gain(v, omega).map(|g| (omega, g.norm()))
        })
        .collect()
}

/// Center direction cosine of the `i`th (1-based) bottom-layer steering bin,
/// `-1 + (2i - 1)/n`. The bin covers `[-1 + 2(i-1)/n, -1 + 2i/n]`.
pub fn bin_center(n: usize, i: usize) -> f64 {
    -1.0 + (2 * i - 1) as f64 / n as f64
}

/// Writes a pattern dump: `#`-prefixed header lines, then one
/// `omega |gain|` row per grid point.
pub fn write_pattern<W: Write>(
    mut out: W,
    header: &[String],
    samples: &[(f64, f64)],
) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    for (omega, gain) in samples {
        writeln!(out, "{omega} {gain}")?;
    }
    Ok(())
}
