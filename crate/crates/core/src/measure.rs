//! Discrete order parameters: c.d.f.s on `[0, 1]` with finitely many atoms.
//!
//! A measure with atoms `q_1 ≤ … ≤ q_k` and cumulative masses
//! `m_1 ≤ … ≤ m_k = 1` is the step function `m(q) = m_l` on
//! `[q_l, q_{l+1})`, with `m(q) = 0` below `q_1`. Atom `l` carries the jump
//! `m_l − m_{l−1}`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for merging atom locations and dropping empty jumps.
pub const MERGE_TOL: f64 = 1e-12;

/// Canonical k-atom measure: strictly increasing locations and cumulative
/// masses, last mass exactly one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureFile", into = "MeasureFile")]
pub struct DiscreteMeasure {
    q: Vec<f64>,
    m: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    q: Vec<f64>,
    m: Vec<f64>,
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = Error;
    fn try_from(file: MeasureFile) -> Result<Self> {
        DiscreteMeasure::new(&file.q, &file.m)
    }
}

impl From<DiscreteMeasure> for MeasureFile {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureFile { q: m.q, m: m.m }
    }
}

impl DiscreteMeasure {
    /// Validates and canonicalizes `(q_l, m_l)` sequences.
    pub fn new(qs: &[f64], ms: &[f64]) -> Result<Self> {
        validate_sequences(qs, ms)?;
        let last = *ms.last().unwrap();
        if (last - 1.0).abs() > MERGE_TOL {
            return Err(Error::InvalidMeasure(format!(
                "final cumulative mass {last} differs from 1"
            )));
        }
        let mut m = ms.to_vec();
        *m.last_mut().unwrap() = 1.0;
        Ok(canonicalize(qs, &m))
    }

    /// Single atom of mass one at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("Dirac location {x} outside [0, 1]")));
        }
        Ok(Self {
            q: vec![x],
            m: vec![1.0],
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.q
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Jump sizes `m_l − m_{l−1}`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.q.iter().zip(&self.m).scan(0.0, |prev, (&q, &m)| {
            let w = m - *prev;
            *prev = m;
            Some((q, w))
        })
    }

    pub fn is_dirac(&self) -> bool {
        self.q.len() == 1
    }

    /// `∫ qᵖ dm`.
    pub fn moment(&self, p: u32) -> f64 {
        self.jumps().map(|(q, w)| w * q.powi(p as i32)).sum()
    }

    /// `∫ q dm`.
    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `∫ (q − q̄)² dm`.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.jumps().map(|(q, w)| w * (q - mean) * (q - mean)).sum()
    }

    /// Right-continuous c.d.f. value.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("c.d.f. argument {x} outside [0, 1]")));
        }
        Ok(self.cdf_at(x))
    }

    pub(crate) fn cdf_at(&self, x: f64) -> f64 {
        match self.q.iter().rposition(|&q| q <= x) {
            Some(l) => self.m[l],
            None => 0.0,
        }
    }

    /// `∫₀¹ |m₁(q) − m₂(q)| dq`, exact over the merged breakpoints.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let mut breaks: Vec<f64> = self.q.iter().chain(&other.q).copied().collect();
        breaks.push(0.0);
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .map(|w| (w[1] - w[0]) * (self.cdf_at(w[0]) - other.cdf_at(w[0])).abs())
            .sum()
    }

    /// `min_x ∫ |q − x| dm`, attained at a median of the measure.
    pub fn l1_spread(&self) -> f64 {
        let median = self
            .q
            .iter()
            .zip(&self.m)
            .find(|(_, &m)| m >= 0.5)
            .map(|(&q, _)| q)
            .unwrap_or(0.0);
        self.jumps().map(|(q, w)| w * (q - median).abs()).sum()
    }

    /// Staircase vertices of the c.d.f. as `q,m` CSV rows, for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,m\n");
        let mut prev = 0.0;
        let _ = writeln!(out, "{:.16e},{:.16e}", 0.0, 0.0);
        for (&q, &m) in self.q.iter().zip(&self.m) {
            let _ = writeln!(out, "{q:.16e},{prev:.16e}");
            let _ = writeln!(out, "{q:.16e},{m:.16e}");
            prev = m;
        }
        let _ = writeln!(out, "{:.16e},{:.16e}", 1.0, 1.0);
        out
    }
}

/// Ordering and range checks shared with raw-sequence evaluation.
pub(crate) fn validate_sequences(qs: &[f64], ms: &[f64]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::InvalidMeasure("at least one atom is required".into()));
    }
    if qs.len() != ms.len() {
        return Err(Error::InvalidMeasure(format!(
            "{} locations but {} cumulative masses",
            qs.len(),
            ms.len()
        )));
    }
    for (name, seq) in [("location", qs), ("cumulative mass", ms)] {
        if let Some(v) = seq.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidMeasure(format!("{name} {v} outside [0, 1]")));
        }
        if seq.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidMeasure(format!("{name}s are not nondecreasing")));
        }
    }
    Ok(())
}

/// Merges co-located atoms and drops atoms with (near) zero jump. The step
/// function is unchanged up to [`MERGE_TOL`].
fn canonicalize(qs: &[f64], ms: &[f64]) -> DiscreteMeasure {
    let mut q: Vec<f64> = Vec::with_capacity(qs.len());
    let mut m: Vec<f64> = Vec::with_capacity(ms.len());
    for (&ql, &ml) in qs.iter().zip(ms) {
        let prev_m = m.last().copied().unwrap_or(0.0);
        if ml - prev_m <= MERGE_TOL {
            continue;
        }
        match q.last() {
            Some(&last) if ql - last <= MERGE_TOL => *m.last_mut().unwrap() = ml,
            _ => {
                q.push(ql);
                m.push(ml);
            }
        }
    }
    // the last mass is exactly 1, so the loop above always keeps an atom,
    // and a dropped final atom can only happen through the tolerance
    if let Some(last) = m.last_mut() {
        *last = 1.0;
    } else {
        q.push(*qs.last().unwrap());
        m.push(1.0);
    }
    DiscreteMeasure { q, m }
}
