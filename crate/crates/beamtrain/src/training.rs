//! Hierarchical beam search: the per-path joint descent, the multi-path
//! loop that nulls detected paths by codebook index removal, the
//! subtraction-based static-codebook baseline, and the exhaustive-sweep
//! oracle.
//!
//! Every descent burns a fixed, data-independent number of measurements:
//! `4^S0` pairs at the start layer, then 4 child pairs per joint layer
//! (and 2 per remaining layer when one array is deeper). Zero codewords
//! still occupy their training slot but never win the argmax.

use crate::array::inner_product;
use crate::channel::{ChannelRealization, MeasurementModel};
use crate::codebook::{bottom_codeword, synthesize, Codeword, CodebookState, IndexSet};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::io::Write;

/// One recorded measurement of a search.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub layer: u32,
    pub tx_pos: usize,
    pub rx_pos: usize,
    /// Magnitude of the (corrected) measurement used for selection.
    pub magnitude: f64,
}

/// Ordered measurement log of one per-path search.
#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
    pub measurements_used: u64,
}

/// Result of one multi-path training session.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Detected (departure bin, arrival bin) pairs in detection order.
    pub detected: Vec<(usize, usize)>,
    /// Set of detected departure bins.
    pub tx_indices: BTreeSet<usize>,
    /// Set of detected arrival bins.
    pub rx_indices: BTreeSet<usize>,
    pub total_measurements: u64,
    pub traces: Vec<SearchTrace>,
}

/// Per-path measurement count of the descent:
/// `4^S0 + 4 (min(St, Sr) - S0) + 2 (max(St, Sr) - min(St, Sr))`.
pub fn descent_measurements(nt: usize, nr: usize, s0: u32) -> u64 {
    let st = nt.trailing_zeros() as u64;
    let sr = nr.trailing_zeros() as u64;
    let joint = st.min(sr);
    4u64.pow(s0) + 4 * (joint - s0 as u64) + 2 * (st.max(sr) - joint)
}

struct Descent {
    tx_bin: usize,
    rx_bin: usize,
    trace: SearchTrace,
    /// Corrected value of the winning bottom-layer measurement.
    best_y: Complex64,
}

/// Runs the joint argmax over a candidate list, measuring every pair and
/// excluding zero codewords from selection. Ties keep the first candidate
/// in iteration order.
#[allow(clippy::too_many_arguments)]
fn scan_candidates(
    candidates: &[(usize, usize)],
    tx_layer: u32,
    rx_layer: u32,
    tx: &mut CodebookState,
    rx: &mut CodebookState,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
    trace: &mut SearchTrace,
    correct: &mut dyn FnMut(&Codeword, &Codeword, Complex64) -> Complex64,
) -> Result<(usize, usize, Complex64)> {
    let mut best: Option<(f64, usize, usize, Complex64)> = None;
    for &(mt, mr) in candidates {
        let v = tx.codeword_at(tx_layer, mt)?;
        let w = rx.codeword_at(rx_layer, mr)?;
        let y_raw = mm.measure(ch, v.weights(), w.weights())?;
        let y = correct(&v, &w, y_raw);
        let mag = y.norm();
        trace.entries.push(TraceEntry {
            layer: tx_layer.max(rx_layer),
            tx_pos: mt,
            rx_pos: mr,
            magnitude: mag,
        });
        trace.measurements_used += 1;
        if !v.is_zero() && !w.is_zero() && best.as_ref().is_none_or(|b| mag > b.0) {
            best = Some((mag, mt, mr, y));
        }
    }
    let (_, mt, mr, y) = best.ok_or_else(|| {
        Error::DegenerateCodebook(format!(
            "every candidate codeword at layers ({tx_layer}, {rx_layer}) is zero"
        ))
    })?;
    Ok((mt, mr, y))
}

fn descend(
    tx: &mut CodebookState,
    rx: &mut CodebookState,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
    s0: u32,
    correct: &mut dyn FnMut(&Codeword, &Codeword, Complex64) -> Complex64,
) -> Result<Descent> {
    if tx.start_layer() != s0 || rx.start_layer() != s0 {
        return Err(Error::InvalidArgument(format!(
            "states start at layers {}/{}, search at {s0}",
            tx.start_layer(),
            rx.start_layer()
        )));
    }
    if tx.n() != ch.nt() || rx.n() != ch.nr() {
        return Err(Error::DimensionMismatch(format!(
            "codebooks over {}x{} beams on an {}x{} channel",
            tx.n(),
            rx.n(),
            ch.nt(),
            ch.nr()
        )));
    }
    let st = tx.total_layers();
    let sr = rx.total_layers();
    let joint = st.min(sr);
    let mut trace = SearchTrace::default();

    // Stage 1: full scan of the start layer.
    let side = 1usize << s0;
    let stage1: Vec<(usize, usize)> = (1..=side)
        .flat_map(|mt| (1..=side).map(move |mr| (mt, mr)))
        .collect();
    let (mut mt, mut mr, mut best_y) =
        scan_candidates(&stage1, s0, s0, tx, rx, ch, mm, &mut trace, correct)?;

    // Stage 2: joint binary descent, 2x2 child pairs per layer.
    for s in s0..joint {
        let children = [
            (2 * mt - 1, 2 * mr - 1),
            (2 * mt - 1, 2 * mr),
            (2 * mt, 2 * mr - 1),
            (2 * mt, 2 * mr),
        ];
        (mt, mr, best_y) =
            scan_candidates(&children, s + 1, s + 1, tx, rx, ch, mm, &mut trace, correct)?;
    }

    // One side deeper: keep the shallow side's bottom codeword fixed and
    // halve the other side, two measurements per remaining layer.
    for s in joint..st {
        let children = [(2 * mt - 1, mr), (2 * mt, mr)];
        (mt, mr, best_y) =
            scan_candidates(&children, s + 1, sr, tx, rx, ch, mm, &mut trace, correct)?;
    }
    for s in joint..sr {
        let children = [(mt, 2 * mr - 1), (mt, 2 * mr)];
        (mt, mr, best_y) =
            scan_candidates(&children, st, s + 1, tx, rx, ch, mm, &mut trace, correct)?;
    }

    Ok(Descent {
        tx_bin: mt,
        rx_bin: mr,
        trace,
        best_y,
    })
}

/// One hierarchical search for a single path: full start-layer scan, then
/// 2x2 child scans down to the bottom. Returns the detected bottom
/// (departure bin, arrival bin) and the measurement log.
pub fn descend_one_path(
    tx: &mut CodebookState,
    rx: &mut CodebookState,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
    s0: u32,
) -> Result<(usize, usize, SearchTrace)> {
    let d = descend(tx, rx, ch, mm, s0, &mut |_, _, y| y)?;
    Ok((d.tx_bin, d.rx_bin, d.trace))
}

/// Multi-path training with dynamic codebook updates; also returns the
/// final codebook states (their removed sets equal the detected bins).
pub fn train_dynamic_with_states(
    nt: usize,
    nr: usize,
    l_d: usize,
    s0: u32,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
) -> Result<(TrainingOutcome, CodebookState, CodebookState)> {
    if l_d < 1 {
        return Err(Error::InvalidArgument("must detect at least one path".into()));
    }
    let mut tx = CodebookState::new(nt, s0)?;
    let mut rx = CodebookState::new(nr, s0)?;
    let mut outcome = TrainingOutcome {
        detected: Vec::with_capacity(l_d),
        tx_indices: BTreeSet::new(),
        rx_indices: BTreeSet::new(),
        total_measurements: 0,
        traces: Vec::with_capacity(l_d),
    };
    for _ in 0..l_d {
        let (p, q, trace) = descend_one_path(&mut tx, &mut rx, ch, mm, s0)?;
        outcome.detected.push((p, q));
        outcome.tx_indices.insert(p);
        outcome.rx_indices.insert(q);
        outcome.total_measurements += trace.measurements_used;
        outcome.traces.push(trace);
        tx.remove_index(p)?;
        rx.remove_index(q)?;
    }
    Ok((outcome, tx, rx))
}

/// Multi-path training with dynamic codebook updates: after each detected
/// path, its bins are removed from the codebooks, nulling it for every
/// later search.
pub fn train_dynamic(
    nt: usize,
    nr: usize,
    l_d: usize,
    s0: u32,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
) -> Result<TrainingOutcome> {
    train_dynamic_with_states(nt, nr, l_d, s0, ch, mm).map(|(outcome, _, _)| outcome)
}

/// Effective complex gain of a detected path from its winning bottom-layer
/// measurement: `y_best / sqrt(P)`. The matched bottom codeword pair is
/// taken as the unit of array response, so the estimate absorbs the
/// `sqrt(Nt Nr / L)` channel scale and the codebook phase convention.
pub fn estimate_gain(y_best: Complex64, power: f64) -> Complex64 {
    y_best / power.sqrt()
}

/// Running reconstruction of already-estimated paths for the subtraction
/// baseline. `correct` subtracts each estimate's predicted contribution
/// from a raw measurement.
#[derive(Debug, Clone)]
pub struct SubtractionCanceller {
    power: f64,
    estimates: Vec<(Codeword, Codeword, Complex64)>,
}

impl SubtractionCanceller {
    pub fn new(power: f64) -> Self {
        Self {
            power,
            estimates: Vec::new(),
        }
    }

    /// Records a detected path: bottom bins `(p, q)` and effective gain.
    /// The reconstruction uses the codebook's own singleton codewords so
    /// that a gain estimated from the matched pair cancels exactly when
    /// the path sits on its bin centers.
    pub fn add_estimate(&mut self, nt: usize, nr: usize, p: usize, q: usize, gain: Complex64) -> Result<()> {
        let bt = synthesize(&IndexSet::from_members(nt, [p])?);
        let br = synthesize(&IndexSet::from_members(nr, [q])?);
        self.estimates.push((bt, br, gain));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// `y - sum_l sqrt(P) g_l (w^H b_{q_l}) (b_{p_l}^H v)`.
    pub fn correct(&self, v: &[Complex64], w: &[Complex64], y: Complex64) -> Complex64 {
        let mut corrected = y;
        for (bt, br, gain) in &self.estimates {
            let tx_resp = inner_product(bt.weights(), v).expect("tx dimensions fixed");
            let rx_resp = inner_product(w, br.weights()).expect("rx dimensions fixed");
            corrected -= self.power.sqrt() * gain * rx_resp * tx_resp;
        }
        corrected
    }
}

/// Multi-path training with static codebooks: detected paths are cancelled
/// by subtracting their reconstructed contribution from every later
/// measurement. Uses the same number of measurements as [`train_dynamic`].
pub fn train_baseline_subtraction(
    nt: usize,
    nr: usize,
    l_d: usize,
    s0: u32,
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
) -> Result<TrainingOutcome> {
    if l_d < 1 {
        return Err(Error::InvalidArgument("must detect at least one path".into()));
    }
    let mut tx = CodebookState::new(nt, s0)?;
    let mut rx = CodebookState::new(nr, s0)?;
    let mut canceller = SubtractionCanceller::new(mm.power());
    let mut outcome = TrainingOutcome {
        detected: Vec::with_capacity(l_d),
        tx_indices: BTreeSet::new(),
        rx_indices: BTreeSet::new(),
        total_measurements: 0,
        traces: Vec::with_capacity(l_d),
    };
    for _ in 0..l_d {
        let d = {
            let canceller = &canceller;
            descend(&mut tx, &mut rx, ch, mm, s0, &mut |v, w, y| {
                canceller.correct(v.weights(), w.weights(), y)
            })?
        };
        let gain = estimate_gain(d.best_y, mm.power());
        canceller.add_estimate(nt, nr, d.tx_bin, d.rx_bin, gain)?;
        outcome.detected.push((d.tx_bin, d.rx_bin));
        outcome.tx_indices.insert(d.tx_bin);
        outcome.rx_indices.insert(d.rx_bin);
        outcome.total_measurements += d.trace.measurements_used;
        outcome.traces.push(d.trace);
    }
    Ok(outcome)
}

/// Measures every bottom codeword pair and returns the argmax
/// (departure bin, arrival bin). Oracle search; costs `Nt * Nr`
/// measurements.
pub fn exhaustive_sweep(
    ch: &ChannelRealization,
    mm: &mut MeasurementModel,
) -> Result<(usize, usize)> {
    let (nt, nr) = (ch.nt(), ch.nr());
    let tx_beams: Vec<Codeword> = (1..=nt).map(|i| bottom_codeword(nt, i)).collect::<Result<_>>()?;
    let rx_beams: Vec<Codeword> = (1..=nr).map(|j| bottom_codeword(nr, j)).collect::<Result<_>>()?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, v) in tx_beams.iter().enumerate() {
        for (j, w) in rx_beams.iter().enumerate() {
            let mag = mm.measure(ch, v.weights(), w.weights())?.norm();
            if best.as_ref().is_none_or(|b| mag > b.0) {
                best = Some((mag, i + 1, j + 1));
            }
        }
    }
    let (_, p, q) = best.expect("at least one beam pair");
    Ok((p, q))
}

/// Writes the trace dump: one `path layer mt mr |y|` line per measurement,
/// paths numbered from 1 in detection order.
pub fn write_trace<W: Write>(mut out: W, outcome: &TrainingOutcome) -> Result<()> {
    for (idx, trace) in outcome.traces.iter().enumerate() {
        for e in &trace.entries {
            writeln!(
                out,
                "{} {} {} {} {}",
                idx + 1,
                e.layer,
                e.tx_pos,
                e.rx_pos,
                e.magnitude
            )?;
        }
    }
    Ok(())
}
