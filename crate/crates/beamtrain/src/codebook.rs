//! Hierarchical beam codebook synthesis and dynamic index-removal updates.
//!
//! Every codeword is a normalized weighted sum of bottom-layer steering
//! vectors. The binary hierarchy assigns layer `s`, position `m` the index
//! set `{(m-1)N/2^s + 1, ..., m N/2^s}`; removing a bottom index from the
//! state deletes it from the one covering set per layer, which places an
//! exact null toward that bin center in every regenerated codeword while
//! the retained bin centers keep gain `sqrt(N/|set|)`.

use crate::array::{bin_center, steering_vector};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

/// Set of 1-based bottom-layer steering indices backing one codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    n: usize,
    members: BTreeSet<usize>,
}

/// Layer count of a hierarchy over `n` beams, i.e. `log2 n`.
fn total_layers(n: usize) -> Result<u32> {
    if n < 1 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "array size {n} is not a power of two"
        )));
    }
    Ok(n.trailing_zeros())
}

impl IndexSet {
    /// The initial set for layer `s`, position `m` of a hierarchy over `n` beams.
    pub fn initial(s: u32, m: usize, n: usize) -> Result<Self> {
        let layers = total_layers(n)?;
        if s > layers {
            return Err(Error::IndexOutOfRange(format!(
                "layer {s} exceeds {layers} for n={n}"
            )));
        }
        if m < 1 || m > (1usize << s) {
            return Err(Error::IndexOutOfRange(format!(
                "position {m} outside [1, {}] at layer {s}",
                1usize << s
            )));
        }
        let width = n >> s;
        Ok(Self {
            n,
            members: ((m - 1) * width + 1..=m * width).collect(),
        })
    }

    /// An empty set over `n` beams.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            members: BTreeSet::new(),
        }
    }

    /// Builds a set from explicit members, validating the range `[1, n]`.
    pub fn from_members<I: IntoIterator<Item = usize>>(n: usize, members: I) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&i| i < 1 || i > n) {
            return Err(Error::IndexOutOfRange(format!(
                "member {bad} outside [1, {n}]"
            )));
        }
        Ok(Self { n, members })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.contains(&i)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    fn remove(&mut self, i: usize) -> bool {
        self.members.remove(&i)
    }
}

/// Unit-norm (or zero) beamforming weight vector plus the index set it was
/// synthesized from.
#[derive(Debug, Clone)]
pub struct Codeword {
    weights: Vec<Complex64>,
    source: IndexSet,
}

impl Codeword {
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn source_set(&self) -> &IndexSet {
        &self.source
    }

    /// True when the source set is empty and the weights are identically zero.
    pub fn is_zero(&self) -> bool {
        self.source.is_empty()
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }
}

/// Phase applied to the `i`th bottom steering vector during synthesis,
/// `pi (-1 + 1/n) i`. Consecutive indices then add constructively at the
/// direction midway between their bin centers.
pub fn alignment_phase(n: usize, i: usize) -> f64 {
    PI * (-1.0 + 1.0 / n as f64) * i as f64
}

/// Phase increment `theta_{i+1} - theta_i` of the synthesis schedule,
/// `pi (-1 + 1/n)` independent of `i`. With this increment the gains of
/// beams `i` and `i+1` agree at their shared coverage edge `-1 + 2i/n`.
pub fn midpoint_phase_check(n: usize, i: usize) -> Result<f64> {
    total_layers(n)?;
    if i < 1 || i >= n {
        return Err(Error::IndexOutOfRange(format!(
            "adjacent pair ({i}, {}) outside [1, {n}]",
            i + 1
        )));
    }
    Ok(alignment_phase(n, i + 1) - alignment_phase(n, i))
}

/// The `i`th (1-based) bottom-layer codeword: a plain steering vector
/// toward `-1 + (2i - 1)/n`, covering `[-1 + 2(i-1)/n, -1 + 2i/n]`.
pub fn bottom_codeword(n: usize, i: usize) -> Result<Codeword> {
    total_layers(n)?;
    if i < 1 || i > n {
        return Err(Error::IndexOutOfRange(format!(
            "bottom index {i} outside [1, {n}]"
        )));
    }
    Ok(Codeword {
        weights: steering_vector(n, bin_center(n, i))?,
        source: IndexSet::from_members(n, [i])?,
    })
}

/// Unnormalized synthesis `sum_{i in set} e^{j theta_i} f_i`.
/// Empty sets yield the zero vector.
pub fn synthesize_raw(set: &IndexSet) -> Vec<Complex64> {
    let n = set.n();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for i in set.iter() {
        let rot = Complex64::from_polar(1.0, alignment_phase(n, i));
        let f = steering_vector(n, bin_center(n, i)).expect("bin center in range");
        for (a, x) in acc.iter_mut().zip(f) {
            *a += rot * x;
        }
    }
    acc
}

/// Normalized codeword for an index set. Nonempty sets yield unit norm;
/// the empty set yields the zero codeword.
pub fn synthesize(set: &IndexSet) -> Codeword {
    let mut weights = synthesize_raw(set);
    if !set.is_empty() {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        for w in &mut weights {
            *w /= norm;
        }
    }
    Codeword {
        weights,
        source: set.clone(),
    }
}

/// Mutable per-side hierarchy of index sets with lazily synthesized,
/// cached codewords.
///
/// `sets(s, m)` always equals the initial set minus every removed index;
/// within a layer the sets stay pairwise disjoint.
#[derive(Debug, Clone)]
pub struct CodebookState {
    n: usize,
    s0: u32,
    layers: u32,
    sets: Vec<Vec<IndexSet>>,
    cache: Vec<Vec<Option<Codeword>>>,
    removed: BTreeSet<usize>,
}

impl CodebookState {
    /// Fresh state over `n` beams with layers `s0..=log2 n` populated from
    /// the initial index sets.
    pub fn new(n: usize, s0: u32) -> Result<Self> {
        let layers = total_layers(n)?;
        if s0 > layers {
            return Err(Error::InvalidArgument(format!(
                "start layer {s0} exceeds log2({n}) = {layers}"
            )));
        }
        let mut sets = Vec::new();
        let mut cache = Vec::new();
        for s in s0..=layers {
            let row: Result<Vec<IndexSet>> = (1..=1usize << s)
                .map(|m| IndexSet::initial(s, m, n))
                .collect();
            let row = row?;
            cache.push(vec![None; row.len()]);
            sets.push(row);
        }
        Ok(Self {
            n,
            s0,
            layers,
            sets,
            cache,
            removed: BTreeSet::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start_layer(&self) -> u32 {
        self.s0
    }

    /// Bottom layer index, `log2 n`.
    pub fn total_layers(&self) -> u32 {
        self.layers
    }

    /// Bottom-layer indices removed so far.
    pub fn removed(&self) -> &BTreeSet<usize> {
        &self.removed
    }

    fn check_slot(&self, s: u32, m: usize) -> Result<()> {
        if s < self.s0 || s > self.layers {
            return Err(Error::IndexOutOfRange(format!(
                "layer {s} outside [{}, {}]",
                self.s0, self.layers
            )));
        }
        if m < 1 || m > (1usize << s) {
            return Err(Error::IndexOutOfRange(format!(
                "position {m} outside [1, {}] at layer {s}",
                1usize << s
            )));
        }
        Ok(())
    }

    /// Current index set at layer `s`, position `m`.
    pub fn set_at(&self, s: u32, m: usize) -> Result<&IndexSet> {
        self.check_slot(s, m)?;
        Ok(&self.sets[(s - self.s0) as usize][m - 1])
    }

    /// The position at layer `s` whose initial set covers bottom index `p`.
    pub fn position_containing(&self, s: u32, p: usize) -> usize {
        (p - 1) / (self.n >> s) + 1
    }

    /// Deletes bottom index `p` from the one covering set per layer and
    /// invalidates those cached codewords. Removing an index twice is a
    /// no-op.
    pub fn remove_index(&mut self, p: usize) -> Result<()> {
        if p < 1 || p > self.n {
            return Err(Error::IndexOutOfRange(format!(
                "bottom index {p} outside [1, {}]",
                self.n
            )));
        }
        if !self.removed.insert(p) {
            return Ok(());
        }
        for s in self.s0..=self.layers {
            let m = self.position_containing(s, p);
            let li = (s - self.s0) as usize;
            self.sets[li][m - 1].remove(p);
            self.cache[li][m - 1] = None;
        }
        Ok(())
    }

    /// Codeword for slot `(s, m)`, synthesized on demand and cached until
    /// an overlapping removal invalidates it.
    pub fn codeword_at(&mut self, s: u32, m: usize) -> Result<Codeword> {
        self.check_slot(s, m)?;
        let li = (s - self.s0) as usize;
        if self.cache[li][m - 1].is_none() {
            self.cache[li][m - 1] = Some(synthesize(&self.sets[li][m - 1]));
        }
        Ok(self.cache[li][m - 1].clone().expect("just filled"))
    }

    /// Number of slots whose codeword is currently cached.
    pub fn cached_slots(&self) -> usize {
        self.cache
            .iter()
            .map(|row| row.iter().filter(|c| c.is_some()).count())
            .sum()
    }

    /// Textual descriptor `N S0 removed=<comma list>`.
    pub fn descriptor(&self) -> String {
        let removed: Vec<String> = self.removed.iter().map(|p| p.to_string()).collect();
        format!("{} {} removed={}", self.n, self.s0, removed.join(","))
    }

    /// Rebuilds a state from [`descriptor`](Self::descriptor) text.
    pub fn from_descriptor(text: &str) -> Result<Self> {
        let parse = |msg: String| Error::Parse { line: 1, message: msg };
        let mut fields = text.split_whitespace();
        let n: usize = fields
            .next()
            .ok_or_else(|| parse("missing array size".into()))?
            .parse()
            .map_err(|e| parse(format!("array size: {e}")))?;
        let s0: u32 = fields
            .next()
            .ok_or_else(|| parse("missing start layer".into()))?
            .parse()
            .map_err(|e| parse(format!("start layer: {e}")))?;
        let mut state = Self::new(n, s0)?;
        if let Some(tail) = fields.next() {
            let list = tail
                .strip_prefix("removed=")
                .ok_or_else(|| parse(format!("expected removed=<list>, got {tail}")))?;
            for part in list.split(',').filter(|p| !p.is_empty()) {
                let p: usize = part
                    .parse()
                    .map_err(|e| parse(format!("removed index {part}: {e}")))?;
                state.remove_index(p)?;
            }
        }
        if let Some(extra) = fields.next() {
            return Err(parse(format!("unexpected trailing field {extra}")));
        }
        Ok(state)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
