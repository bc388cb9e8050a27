//! Minimization of `P(m, β)` over measures with at most `k` atoms, and the
//! increasing-`k` ladder.
//!
//! The search runs over `2k − 1` unconstrained parameters
//! `(a_1..a_k, b_1..b_{k−1})` with
//!
//! ```text
//! q_l = Σ_{j≤l} a_j² / (1 + Σ_{j≤k} a_j²),   m_l = Σ_{j≤l} b_j² / (1 + Σ_{j<k} b_j²),   m_k = 1,
//! ```
//!
//! so every point is an admissible (possibly non-canonical) measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Coordinate, Evaluator, FunctionalValue, QuadratureConfig};
use crate::measure::DiscreteMeasure;
use crate::mixture::MixtureSpec;
use crate::par::Parallelism;
use crate::phase::rs_best_dirac;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Derivative-free simplex search in the squared-increment parameters.
    #[default]
    NelderMead,
    /// Finite-difference gradient steps in `(q, m)` with isotonic projection.
    ProjectedGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub restarts: usize,
    /// Objective evaluations allowed per start.
    pub max_iters: usize,
    /// A local search stops when a full pass improves by less than this.
    pub value_tol: f64,
    pub stationarity_tol: f64,
    pub seed: u64,
    pub strategy: Strategy,
    /// Simplifications (snapping to 0, merging atoms) are kept when the
    /// value rises by at most this much.
    pub tie_tol: f64,
    /// Near-minimizers farther apart than this in L1 are listed separately.
    pub distinct_tol: f64,
    /// Step for finite-difference derivatives in `q` and `m`.
    pub fd_step: f64,
    pub parallelism: Parallelism,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 20_000,
            value_tol: 1e-12,
            stationarity_tol: 1e-3,
            seed: 1,
            strategy: Strategy::NelderMead,
            tie_tol: 1e-10,
            distinct_tol: 1e-3,
            fd_step: 1e-4,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.value_tol,
            self.stationarity_tol,
            self.tie_tol,
            self.distinct_tol,
            self.fd_step,
        ];
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("restarts and max_iters must be at least 1".into()));
        }
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("optimizer tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A distinct near-minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub measure: DiscreteMeasure,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub k: usize,
    pub measure: DiscreteMeasure,
    pub value: FunctionalValue,
    /// Every start stopped on the value tolerance.
    pub converged: bool,
    pub evaluations: usize,
    pub stationarity: StationarityReport,
    /// Distinct measures within `tie_tol` of the best value, best first.
    pub candidates: Vec<Candidate>,
}

/// Best measure with at most `k` atoms over the configured starts.
pub fn minimize_k(
    spec: &MixtureSpec,
    k: usize,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
) -> Result<MinimizeResult> {
    minimize_k_from(spec, k, opts, quad, &[])
}

/// As [`minimize_k`], with additional starting measures (at most `k` atoms
/// each; they are embedded by repeating atoms).
pub fn minimize_k_from(
    spec: &MixtureSpec,
    k: usize,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
    extra: &[DiscreteMeasure],
) -> Result<MinimizeResult> {
    opts.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if let Some(m) = extra.iter().find(|m| m.len() > k) {
        return Err(Error::InvalidMeasure(format!(
            "start with {} atoms exceeds k = {k}",
            m.len()
        )));
    }
    let ev = Evaluator::new(spec, quad)?;
    let (dirac_q, _) = rs_best_dirac(spec, quad)?;

    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    starts.push(embed(&DiscreteMeasure::dirac(dirac_q)?, k));
    if dirac_q > 0.0 {
        starts.push(embed(&DiscreteMeasure::dirac(0.0)?, k));
    }
    starts.extend(extra.iter().map(|m| embed(m, k)));
    let mut restart = 0u64;
    while starts.len() < opts.restarts.max(extra.len() + 1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(((k as u64) << 32) | restart);
        starts.push(random_measure(&mut rng, k));
        restart += 1;
    }

    let runs = opts
        .parallelism
        .map(&starts, |(qs, ms)| local_search(&ev, qs, ms, opts));
    let evaluations: usize = runs.iter().map(|r| r.evaluations).sum();
    let converged = runs.iter().all(|r| r.converged);

    let mut finals: Vec<(DiscreteMeasure, f64)> = Vec::new();
    let mut extra_evals = 0;
    for run in &runs {
        let (m, v, n) = simplify(&ev, &run.qs, &run.ms, run.value, opts)?;
        extra_evals += n;
        finals.push((m, v));
    }
    let best_value = finals.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let mut near: Vec<(DiscreteMeasure, f64)> = finals
        .into_iter()
        .filter(|(_, v)| *v <= best_value + opts.tie_tol)
        .collect();
    // smallest k, then lexicographically smallest atoms
    near.sort_by(|a, b| {
        a.0.len()
            .cmp(&b.0.len())
            .then_with(|| lex_cmp(a.0.atoms(), b.0.atoms()))
            .then_with(|| lex_cmp(a.0.cumulative(), b.0.cumulative()))
    });
    let mut candidates: Vec<Candidate> = Vec::new();
    for (m, v) in near {
        if candidates.iter().all(|c| c.measure.l1_distance(&m) > opts.distinct_tol) {
            candidates.push(Candidate { measure: m, value: v });
        }
    }
    let measure = candidates[0].measure.clone();
    let value = crate::functional::evaluate(spec, &measure, quad)?;
    let stationarity = certificate_with(&ev, &measure, opts.stationarity_tol, opts.fd_step)?;
    Ok(MinimizeResult {
        k,
        measure,
        value,
        converged,
        evaluations: evaluations + extra_evals,
        stationarity,
        candidates,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn random_measure(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut qs: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let mut ms: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    qs.sort_by(f64::total_cmp);
    ms.sort_by(f64::total_cmp);
    ms[k - 1] = 1.0;
    (qs, ms)
}

/// Raw sequences of length `k` representing `m`: the top atom is repeated
/// with zero jumps.
fn embed(m: &DiscreteMeasure, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = m.len();
    let mut qs = m.atoms().to_vec();
    qs.resize(k, m.atoms()[n - 1]);
    let below = if n >= 2 { m.cumulative()[n - 2] } else { 0.0 };
    let mut ms = m.cumulative()[..n - 1].to_vec();
    ms.resize(k - 1, below);
    ms.push(1.0);
    (qs, ms)
}

const UPPER: f64 = 1.0 - 1e-12;

fn encode(qs: &[f64], ms: &[f64]) -> Vec<f64> {
    let k = qs.len();
    let q_top = qs[k - 1].min(UPPER);
    let s = q_top / (1.0 - q_top);
    let mut p = Vec::with_capacity(2 * k - 1);
    let mut prev = 0.0;
    for &q in qs {
        let q = q.min(q_top);
        p.push(((q - prev).max(0.0) * (1.0 + s)).sqrt());
        prev = q;
    }
    if k > 1 {
        let m_top = ms[k - 2].min(UPPER);
        let t = m_top / (1.0 - m_top);
        let mut prev = 0.0;
        for &m in &ms[..k - 1] {
            let m = m.min(m_top);
            p.push(((m - prev).max(0.0) * (1.0 + t)).sqrt());
            prev = m;
        }
    }
    p
}

fn decode(p: &[f64], k: usize, qs: &mut Vec<f64>, ms: &mut Vec<f64>) {
    qs.clear();
    ms.clear();
    let s: f64 = p[..k].iter().map(|a| a * a).sum();
    let mut acc = 0.0;
    for a in &p[..k] {
        acc += a * a;
        qs.push((acc / (1.0 + s)).min(1.0));
    }
    let t: f64 = p[k..].iter().map(|b| b * b).sum();
    let mut acc = 0.0;
    for b in &p[k..] {
        acc += b * b;
        ms.push((acc / (1.0 + t)).min(1.0));
    }
    ms.push(1.0);
}

struct LocalResult {
    qs: Vec<f64>,
    ms: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

fn local_search(ev: &Evaluator, qs: &[f64], ms: &[f64], opts: &OptimizerOptions) -> LocalResult {
    match opts.strategy {
        Strategy::NelderMead => nelder_mead_search(ev, qs, ms, opts),
        Strategy::ProjectedGradient => projected_gradient(ev, qs, ms, opts),
    }
}

fn nelder_mead_search(ev: &Evaluator, qs: &[f64], ms: &[f64], opts: &OptimizerOptions) -> LocalResult {
    let k = qs.len();
    let mut bq = Vec::with_capacity(k);
    let mut bm = Vec::with_capacity(k);
    let mut f = |p: &[f64]| {
        decode(p, k, &mut bq, &mut bm);
        debug_assert!(crate::measure::validate_sequences(&bq, &bm).is_ok());
        ev.value(&bq, &bm)
    };
    let mut x = encode(qs, ms);
    let mut fx = f(&x);
    let mut evaluations = 1;
    let mut scale = 0.15;
    let mut converged = false;
    while evaluations < opts.max_iters {
        let budget = opts.max_iters - evaluations;
        let run = nelder_mead(&mut f, &x, scale, opts.value_tol, budget);
        evaluations += run.evaluations;
        let improved = fx - run.value;
        if run.value < fx {
            x = run.x;
            fx = run.value;
        }
        if improved <= opts.value_tol && run.converged {
            converged = true;
            break;
        }
        scale = 0.05;
    }
    let (mut rq, mut rm) = (Vec::new(), Vec::new());
    decode(&x, k, &mut rq, &mut rm);
    LocalResult {
        qs: rq,
        ms: rm,
        value: fx,
        evaluations,
        converged,
    }
}

struct SimplexRun {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Nelder–Mead with dimension-adapted coefficients; stops when the value
/// spread over the simplex falls below `tol`.
fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], scale: f64, tol: f64, budget: usize) -> SimplexRun {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += scale * x0[i].abs().max(0.5);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evaluations = n + 1;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while evaluations < budget {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        if vals[worst] - vals[best] <= tol {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[worst]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha);
        let fr = f(&xr);
        evaluations += 1;
        if fr < vals[best] {
            let xe = along(gamma);
            let fe = f(&xe);
            evaluations += 1;
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[worst] {
            let xc = along(rho * alpha);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evaluations += 1;
        if fc < vals[worst].min(fr) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for (p, a) in pts[i].iter_mut().zip(&anchor) {
                *p = a + sigma * (*p - a);
            }
            vals[i] = f(&pts[i]);
        }
        evaluations += n;
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)))
        .unwrap();
    SimplexRun {
        x: pts[best].clone(),
        value: vals[best],
        evaluations,
        converged,
    }
}

/// Pool-adjacent-violators projection onto nondecreasing sequences,
/// clamped to `[0, 1]`.
fn isotonic(v: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    let mut i = 0;
    for (x, n) in blocks {
        for slot in &mut v[i..i + n] {
            *slot = x.clamp(0.0, 1.0);
        }
        i += n;
    }
}

fn projected_gradient(ev: &Evaluator, qs: &[f64], ms: &[f64], opts: &OptimizerOptions) -> LocalResult {
    let k = qs.len();
    let dim = 2 * k - 1;
    let split = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut m = x[k..].to_vec();
        m.push(1.0);
        (x[..k].to_vec(), m)
    };
    let project = |x: &mut Vec<f64>| {
        isotonic(&mut x[..k]);
        isotonic(&mut x[k..]);
    };
    let f = |x: &[f64]| {
        let (q, m) = split(x);
        ev.value(&q, &m)
    };
    let mut x: Vec<f64> = qs.iter().chain(&ms[..k - 1]).copied().collect();
    project(&mut x);
    let mut fx = f(&x);
    let mut evaluations = 1;
    let mut step = 0.5;
    let mut converged = false;
    let h = 1e-6;
    while evaluations < opts.max_iters {
        let mut grad = vec![0.0; dim];
        for i in 0..dim {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] = (up[i] + h).min(1.0);
            dn[i] = (dn[i] - h).max(0.0);
            project(&mut up);
            project(&mut dn);
            let width = up[i] - dn[i];
            grad[i] = if width > 0.0 { (f(&up) - f(&dn)) / width } else { 0.0 };
            evaluations += 2;
        }
        let mut accepted = false;
        while step > 1e-12 && evaluations < opts.max_iters {
            let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            project(&mut trial);
            let ft = f(&trial);
            evaluations += 1;
            if ft < fx {
                let gain = fx - ft;
                x = trial;
                fx = ft;
                step *= 2.0;
                accepted = true;
                if gain <= opts.value_tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    let (q, m) = split(&x);
    LocalResult {
        qs: q,
        ms: m,
        value: fx,
        evaluations,
        converged,
    }
}

/// Canonicalizes, then snaps the first atom to 0 and merges neighbouring
/// atoms while the value rises by at most `tie_tol`, re-polishing after
/// each accepted change.
fn simplify(
    ev: &Evaluator,
    qs: &[f64],
    ms: &[f64],
    value: f64,
    opts: &OptimizerOptions,
) -> Result<(DiscreteMeasure, f64, usize)> {
    let mut m = DiscreteMeasure::new(qs, ms)?;
    let mut v = ev.value(m.atoms(), m.cumulative()).min(value);
    let mut evaluations = 1;
    for _ in 0..4 {
        let mut changed = false;
        loop {
            let mut accepted = None;
            for trial in simplifications(&m) {
                let tv = ev.value(trial.atoms(), trial.cumulative());
                evaluations += 1;
                if tv <= v + opts.tie_tol {
                    accepted = Some((trial, tv));
                    break;
                }
            }
            match accepted {
                Some((t, tv)) => {
                    m = t;
                    v = tv;
                    changed = true;
                }
                None => break,
            }
        }
        if !changed {
            break;
        }
        let polish = local_search(ev, m.atoms(), m.cumulative(), opts);
        evaluations += polish.evaluations;
        if polish.value < v {
            let pm = DiscreteMeasure::new(&polish.qs, &polish.ms)?;
            let pv = ev.value(pm.atoms(), pm.cumulative());
            if pv < v {
                m = pm;
                v = pv;
                continue;
            }
        }
        break;
    }
    Ok((m, v, evaluations))
}

fn simplifications(m: &DiscreteMeasure) -> Vec<DiscreteMeasure> {
    let (q, c) = (m.atoms(), m.cumulative());
    let k = q.len();
    let mut out = Vec::new();
    if q[0] > 0.0 {
        let mut q0 = q.to_vec();
        q0[0] = 0.0;
        if let Ok(t) = DiscreteMeasure::new(&q0, c) {
            out.push(t);
        }
    }
    for l in 0..k.saturating_sub(1) {
        // move atom l up onto atom l + 1, or atom l + 1 down onto atom l
        let mut up_q = q.to_vec();
        up_q[l] = q[l + 1];
        let mut down_q = q.to_vec();
        down_q[l + 1] = q[l];
        for tq in [up_q, down_q] {
            if let Ok(t) = DiscreteMeasure::new(&tq, c) {
                out.push(t);
            }
        }
    }
    out
}

/// One coordinate of a stationarity certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Zero-based atom index.
    pub index: usize,
    /// `"q"` or `"m"`.
    pub coordinate: String,
    pub interior: bool,
    /// Interior: the derivative. Boundary: the smallest one-sided quotient
    /// `(P(perturbed) − P)/t` over the probe steps.
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub residuals: Vec<Residual>,
    pub max_interior_residual: f64,
    pub pass: bool,
}

/// Steps of the one-sided boundary probes. Finite steps catch descent
/// directions whose first derivative vanishes, as at `q = 0` for `h = 0`.
pub const BOUNDARY_STEPS: [f64; 3] = [1e-4, 1e-3, 1e-2];

/// Stationarity residuals of `m`: interior coordinates must have
/// `|∂P| ≤ tol`, coordinates on a constraint must not decrease `P` along
/// the admissible direction by more than `tol` per unit step.
pub fn stationarity_certificate(
    spec: &MixtureSpec,
    m: &DiscreteMeasure,
    quad: &QuadratureConfig,
    tol: f64,
) -> Result<StationarityReport> {
    let ev = Evaluator::new(spec, quad)?;
    certificate_with(&ev, m, tol, OptimizerOptions::default().fd_step)
}

fn certificate_with(ev: &Evaluator, m: &DiscreteMeasure, tol: f64, step: f64) -> Result<StationarityReport> {
    let (q, c) = (m.atoms(), m.cumulative());
    let k = q.len();
    let base = ev.value(q, c);
    let mut residuals = Vec::new();
    let coords = (0..k)
        .map(Coordinate::Location)
        .chain((0..k.saturating_sub(1)).map(Coordinate::Mass));
    for coord in coords {
        let (seq, l, lo, hi, name) = match coord {
            Coordinate::Location(l) => (
                q,
                l,
                if l == 0 { 0.0 } else { q[l - 1] },
                if l + 1 < k { q[l + 1] } else { 1.0 },
                "q",
            ),
            Coordinate::Mass(l) => (c, l, if l == 0 { 0.0 } else { c[l - 1] }, c[l + 1], "m"),
        };
        let x = seq[l];
        let interior = x - step >= lo && x + step <= hi;
        if interior {
            let d = ev.partial(q, c, coord, step)?.value;
            residuals.push(Residual {
                index: l,
                coordinate: name.into(),
                interior: true,
                value: d,
                pass: d.abs() <= tol,
            });
            continue;
        }
        let mut worst = f64::INFINITY;
        for dir in [1.0, -1.0] {
            for t in BOUNDARY_STEPS {
                let y = x + dir * t;
                if y < lo || y > hi {
                    continue;
                }
                let mut s = seq.to_vec();
                s[l] = y;
                let v = match coord {
                    Coordinate::Location(_) => ev.value(&s, c),
                    Coordinate::Mass(_) => ev.value(q, &s),
                };
                worst = worst.min((v - base) / t);
            }
        }
        if worst == f64::INFINITY {
            return Err(Error::Admissibility(format!(
                "{coord:?} has no admissible perturbation within [{lo}, {hi}]"
            )));
        }
        residuals.push(Residual {
            index: l,
            coordinate: name.into(),
            interior: false,
            value: worst,
            pass: worst >= -tol,
        });
    }
    let max_interior_residual = residuals
        .iter()
        .filter(|r| r.interior)
        .map(|r| r.value.abs())
        .fold(0.0, f64::max);
    let pass = residuals.iter().all(|r| r.pass);
    Ok(StationarityReport {
        residuals,
        max_interior_residual,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub k: usize,
    pub measure: DiscreteMeasure,
    pub value: f64,
    pub quad_error_estimate: f64,
    pub stationarity_max_residual: f64,
    pub stationarity_pass: bool,
    pub converged: bool,
    /// The `k`-atom search did worse than level `k − 1`, whose measure was
    /// kept.
    pub inherited: bool,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub levels: Vec<LadderLevel>,
    /// `value(k) − value(k_max)`.
    pub eps: Vec<f64>,
    pub converged: bool,
}

impl LadderReport {
    pub fn top(&self) -> &LadderLevel {
        self.levels.last().expect("ladder has at least one level")
    }

    /// Last decrement `value(k_max − 1) − value(k_max)`, a computable
    /// stand-in for the unknown gap of the top level.
    pub fn top_gap(&self) -> f64 {
        let n = self.levels.len();
        if n < 2 {
            0.0
        } else {
            (self.levels[n - 2].value - self.levels[n - 1].value).max(0.0)
        }
    }
}

/// Minimizers for `k = 1..=k_max`, each warm-started from the previous
/// level with one atom inserted in the largest gap.
pub fn minimize_ladder(
    spec: &MixtureSpec,
    k_max: usize,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
) -> Result<LadderReport> {
    ladder_from(spec, k_max, opts, quad, &[])
}

/// As [`minimize_ladder`], with extra starts offered at every level they fit.
pub fn ladder_from(
    spec: &MixtureSpec,
    k_max: usize,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
    extra: &[DiscreteMeasure],
) -> Result<LadderReport> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    let mut levels: Vec<LadderLevel> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut starts: Vec<DiscreteMeasure> = extra.iter().filter(|m| m.len() <= k).cloned().collect();
        if let Some(prev) = levels.last() {
            starts.push(insert_atom(&prev.measure)?);
        }
        let res = minimize_k_from(spec, k, opts, quad, &starts)?;
        let level = match levels.last() {
            Some(prev) if res.value.value > prev.value => LadderLevel {
                k,
                inherited: true,
                converged: res.converged,
                ..prev.clone()
            },
            _ => LadderLevel {
                k,
                measure: res.measure,
                value: res.value.value,
                quad_error_estimate: res.value.quad_error_estimate,
                stationarity_max_residual: res.stationarity.max_interior_residual,
                stationarity_pass: res.stationarity.pass,
                converged: res.converged,
                inherited: false,
                candidates: res.candidates,
            },
        };
        levels.push(level);
    }
    let top = levels.last().unwrap().value;
    let eps = levels.iter().map(|l| l.value - top).collect();
    let converged = levels.iter().all(|l| l.converged);
    Ok(LadderReport { levels, eps, converged })
}

/// `m` with a zero-jump atom at the midpoint of its largest gap in
/// `[0, q_1], …, [q_k, 1]`.
fn insert_atom(m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    // a zero-jump atom is dropped by canonicalization, so give it a tiny
    // jump taken from its upper neighbour
    let (q, c) = (m.atoms(), m.cumulative());
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(q);
    bounds.push(1.0);
    let (gap, _) = bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[1] - w[0]))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mid = 0.5 * (bounds[gap] + bounds[gap + 1]);
    let mut nq = q.to_vec();
    let mut nc = c.to_vec();
    let below = if gap == 0 { 0.0 } else { c[gap - 1] };
    let above = if gap < c.len() { c[gap] } else { 1.0 };
    let mass = below + 1e-6 * (above - below).max(1e-3);
    if gap < q.len() {
        nq.insert(gap, mid);
        nc.insert(gap, mass.min(above));
    } else {
        // beyond the last atom: the new atom becomes the top one
        nq.push(mid);
        let last = nc.len() - 1;
        nc[last] = 1.0 - 1e-6;
        nc.push(1.0);
    }
    DiscreteMeasure::new(&nq, &nc)
}

/// Midpoint-convexity violations of `P` along c.d.f. mixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProbe {
    pub pairs: usize,
    pub checks: usize,
    /// Largest `P(mix) − (λP(m1) + (1 − λ)P(m2))`; positive means a
    /// violation.
    pub max_excess: f64,
    pub violations: usize,
}

/// `λ m1 + (1 − λ) m2` as c.d.f.s.
pub fn mix(m1: &DiscreteMeasure, m2: &DiscreteMeasure, lambda: f64) -> Result<DiscreteMeasure> {
    let mut qs: Vec<f64> = m1.atoms().iter().chain(m2.atoms()).copied().collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    let ms: Vec<f64> = qs
        .iter()
        .map(|&q| lambda * m1.cdf_at(q) + (1.0 - lambda) * m2.cdf_at(q))
        .collect();
    DiscreteMeasure::new(&qs, &ms)
}

/// Diagnostic only: samples random measure pairs and reports convexity
/// violations of `P` in `m` on a `λ` grid.
pub fn convexity_probe(
    spec: &MixtureSpec,
    quad: &QuadratureConfig,
    pairs: usize,
    lambdas: &[f64],
    seed: u64,
    slack: f64,
) -> Result<ConvexityProbe> {
    let ev = Evaluator::new(spec, quad)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConvexityProbe {
        pairs,
        checks: 0,
        max_excess: f64::NEG_INFINITY,
        violations: 0,
    };
    for _ in 0..pairs {
        let k1 = rng.random_range(1..=3);
        let (q1, c1) = random_measure(&mut rng, k1);
        let k2 = rng.random_range(1..=3);
        let (q2, c2) = random_measure(&mut rng, k2);
        let m1 = DiscreteMeasure::new(&q1, &c1)?;
        let m2 = DiscreteMeasure::new(&q2, &c2)?;
        let v1 = ev.value(m1.atoms(), m1.cumulative());
        let v2 = ev.value(m2.atoms(), m2.cumulative());
        for &l in lambdas {
            let mm = mix(&m1, &m2, l)?;
            let excess = ev.value(mm.atoms(), mm.cumulative()) - (l * v1 + (1.0 - l) * v2);
            out.checks += 1;
            out.max_excess = out.max_excess.max(excess);
            if excess > slack {
                out.violations += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn encode_decode_round_trip() {
        let qs = [0.1, 0.4, 0.4, 0.9];
        let ms = [0.2, 0.2, 0.7, 1.0];
        let p = encode(&qs, &ms);
        assert_eq!(p.len(), 7);
        let (mut q, mut m) = (Vec::new(), Vec::new());
        decode(&p, 4, &mut q, &mut m);
        for (a, b) in q.iter().zip(&qs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in m.iter().zip(&ms) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn embedding_keeps_the_measure() {
        let m = DiscreteMeasure::new(&[0.2, 0.6], &[0.3, 1.0]).unwrap();
        let (q, c) = embed(&m, 4);
        assert_eq!(q.len(), 4);
        assert_eq!(DiscreteMeasure::new(&q, &c).unwrap(), m);
    }

    #[test]
    fn isotonic_projection() {
        let mut v = [0.5, 0.2, 0.9, -0.3, 1.4];
        isotonic(&mut v);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn inserted_atom_lands_in_largest_gap() {
        let m = DiscreteMeasure::dirac(0.8).unwrap();
        let n = insert_atom(&m).unwrap();
        assert_eq!(n.len(), 2);
        assert_abs_diff_eq!(n.atoms()[0], 0.4);
        let z = insert_atom(&DiscreteMeasure::dirac(0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(z.atoms()[1], 0.5);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let r = nelder_mead(&mut f, &[0.0, 0.0], 0.5, 1e-16, 5000);
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.x[1], -0.5, epsilon = 1e-6);
    }

    #[test]
    fn mixture_of_cdfs() {
        let a = DiscreteMeasure::dirac(0.2).unwrap();
        let b = DiscreteMeasure::dirac(0.8).unwrap();
        let m = mix(&a, &b, 0.25).unwrap();
        assert_eq!(m.atoms(), &[0.2, 0.8]);
        assert_abs_diff_eq!(m.cumulative()[0], 0.25);
    }
}
