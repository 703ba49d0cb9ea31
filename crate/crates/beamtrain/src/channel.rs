//! Sparse multipath MIMO channel realizations and the noisy single-symbol
//! training measurement.
//!
//! A channel is `L` path triples (complex gain, departure cosine, arrival
//! cosine); the matrix `H = sqrt(Nt Nr / L) sum_l gain_l a(Nr, aoa_l)
//! a(Nt, aod_l)^H` is never materialized — products are evaluated path-wise.

use crate::array::{bin_center, inner_product, steering_vector};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, Write};

/// How path angles are drawn in a random channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleMode {
    /// Direction cosines uniform on `[-1, 1]`.
    Continuous,
    /// Direction cosines on bottom-layer bin centers, with all-distinct
    /// (departure bin, arrival bin) pairs.
    OnGrid,
}

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Departure direction cosine.
    pub aod: f64,
    /// Arrival direction cosine.
    pub aoa: f64,
}

/// Immutable multipath channel between an `nt`- and an `nr`-element array.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    nt: usize,
    nr: usize,
    paths: Vec<PathComponent>,
}

impl ChannelRealization {
    pub fn new(nt: usize, nr: usize, paths: Vec<PathComponent>) -> Result<Self> {
        if nt < 1 || nr < 1 {
            return Err(Error::InvalidArgument("array sizes must be >= 1".into()));
        }
        if paths.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one path".into()));
        }
        for (l, p) in paths.iter().enumerate() {
            if p.aod.is_nan() || p.aoa.is_nan() || p.aod.abs() > 1.0 || p.aoa.abs() > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "path {l} angle cosines ({}, {}) outside [-1, 1]",
                    p.aod, p.aoa
                )));
            }
            if !p.gain.re.is_finite() || !p.gain.im.is_finite() {
                return Err(Error::InvalidArgument(format!("path {l} gain not finite")));
            }
        }
        Ok(Self { nt, nr, paths })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    /// `H v` evaluated path-wise:
    /// `sqrt(Nt Nr / L) sum_l gain_l a(Nr, aoa_l) (a(Nt, aod_l)^H v)`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.nt {
            return Err(Error::DimensionMismatch(format!(
                "precoder length {} on an Nt={} channel",
                v.len(),
                self.nt
            )));
        }
        let scale = ((self.nt * self.nr) as f64 / self.paths.len() as f64).sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); self.nr];
        for p in &self.paths {
            let at = steering_vector(self.nt, p.aod)?;
            let ar = steering_vector(self.nr, p.aoa)?;
            let coeff = scale * p.gain * inner_product(&at, v)?;
            for (o, a) in out.iter_mut().zip(ar) {
                *o += coeff * a;
            }
        }
        Ok(out)
    }
}

/// One `CN(0, 1)` sample.
fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let half = 0.5f64.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * half, im * half)
}

/// Draws a random `l`-path channel: gains i.i.d. `CN(0, 1)`, angles per
/// `mode`. In [`AngleMode::OnGrid`], colliding (departure bin, arrival bin)
/// pairs are redrawn so the strongest-beam ground truth is unambiguous.
pub fn draw_channel<R: Rng + ?Sized>(
    nt: usize,
    nr: usize,
    l: usize,
    mode: AngleMode,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if l < 1 {
        return Err(Error::InvalidArgument("path count must be >= 1".into()));
    }
    if mode == AngleMode::OnGrid && l > nt * nr {
        return Err(Error::InvalidArgument(format!(
            "cannot place {l} distinct on-grid paths in {} bins",
            nt * nr
        )));
    }
    let mut paths = Vec::with_capacity(l);
    let mut used_bins: Vec<(usize, usize)> = Vec::with_capacity(l);
    for _ in 0..l {
        let gain = complex_gaussian(rng);
        let (aod, aoa) = match mode {
            AngleMode::Continuous => (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)),
            AngleMode::OnGrid => loop {
                let i = rng.random_range(1..=nt);
                let j = rng.random_range(1..=nr);
                if !used_bins.contains(&(i, j)) {
                    used_bins.push((i, j));
                    break (bin_center(nt, i), bin_center(nr, j));
                }
            },
        };
        paths.push(PathComponent { gain, aod, aoa });
    }
    ChannelRealization::new(nt, nr, paths)
}

/// Transmit power, noise level, seeded randomness, and the running
/// measurement counter for one training session.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    power: f64,
    noise_var: f64,
    rng: ChaCha8Rng,
    count: u64,
}

impl MeasurementModel {
    pub fn new(power: f64, noise_var: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !power.is_finite() || power <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "transmit power {power} must be positive"
            )));
        }
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise variance {noise_var} must be >= 0"
            )));
        }
        Ok(Self {
            power,
            noise_var,
            rng,
            count: 0,
        })
    }

    pub fn from_seed(power: f64, noise_var: f64, seed: u64) -> Result<Self> {
        Self::new(power, noise_var, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Measurements taken so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// One training measurement `y = sqrt(P) w^H H v + w^H eta` with
    /// `eta ~ CN(0, noise_var I)` freshly drawn; bumps the counter.
    pub fn measure(
        &mut self,
        ch: &ChannelRealization,
        v: &[Complex64],
        w: &[Complex64],
    ) -> Result<Complex64> {
        if w.len() != ch.nr() {
            return Err(Error::DimensionMismatch(format!(
                "combiner length {} on an Nr={} channel",
                w.len(),
                ch.nr()
            )));
        }
        let hv = ch.apply(v)?;
        let mut y = self.power.sqrt() * inner_product(w, &hv)?;
        if self.noise_var > 0.0 {
            let scale = self.noise_var.sqrt();
            let noise: Complex64 = w
                .iter()
                .map(|wk| wk.conj() * (scale * complex_gaussian(&mut self.rng)))
                .sum();
            y += noise;
        }
        self.count += 1;
        Ok(y)
    }
}

/// Noise variance for a target SNR: `sigma^2 = P / 10^(snr_db / 10)`.
pub fn snr_to_noise(snr_db: f64, power: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// Writes a channel fixture: header `Nt Nr L`, then one
/// `gain_re gain_im aod aoa` line per path.
pub fn write_fixture<W: Write>(mut out: W, ch: &ChannelRealization) -> Result<()> {
    writeln!(out, "{} {} {}", ch.nt(), ch.nr(), ch.paths().len())?;
    for p in ch.paths() {
        writeln!(out, "{} {} {} {}", p.gain.re, p.gain.im, p.aod, p.aoa)?;
    }
    Ok(())
}

/// Reads a channel fixture written by [`write_fixture`]. Blank lines and
/// `#` comment lines are ignored.
pub fn read_fixture<R: BufRead>(input: R) -> Result<ChannelRealization> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut paths = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        if header.is_none() {
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected header `Nt Nr L`, got {} fields",
                    fields.len()
                )));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(format!("header: {e}")))?;
            header = Some((nums[0], nums[1], nums[2]));
        } else {
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "expected `gain_re gain_im aod aoa`, got {} fields",
                    fields.len()
                )));
            }
            let nums: Vec<f64> = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(format!("path: {e}")))?;
            paths.push(PathComponent {
                gain: Complex64::new(nums[0], nums[1]),
                aod: nums[2],
                aoa: nums[3],
            });
        }
    }
    let (nt, nr, l) = header.ok_or(Error::Parse {
        line: 1,
        message: "missing header `Nt Nr L`".into(),
    })?;
    if paths.len() != l {
        return Err(Error::Parse {
            line: 1,
            message: format!("header declares {l} paths, found {}", paths.len()),
        });
    }
    ChannelRealization::new(nt, nr, paths)
}
