//! mBVD parameter extraction from one-port admittance data.
//!
//! The fit works on `(fs, k², Q, C0, Rs)` plus `(fs, k², Q)` per spur, each
//! mapped to an unbounded coordinate (log, or logit for `k²`), and minimizes
//! the mean squared distance between `log10 Y` of model and data over the
//! real and imaginary channels of the complex logarithm.

use std::f64::consts::LN_10;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbvd::{
    admittance, admittance_sweep, k2_from_fs_fp, synthesize_mbvd, CouplingConvention, MbvdParams,
    ResonatorSpec, SpurSpec,
};
use crate::simplex::{Bounds, NelderMead};

/// Fewest samples accepted for a fit.
pub const MIN_RECORD_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceRecord {
    pub frequencies_ghz: Vec<f64>,
    pub y: Vec<Complex64>,
}

impl AdmittanceRecord {
    pub fn new(frequencies_ghz: Vec<f64>, y: Vec<Complex64>) -> Result<Self> {
        let record = Self { frequencies_ghz, y };
        record.validate()?;
        Ok(record)
    }

    /// Samples `params` on the given grid.
    pub fn from_params(params: &MbvdParams, frequencies_ghz: Vec<f64>) -> Result<Self> {
        let y = admittance_sweep(params, &frequencies_ghz);
        Self::new(frequencies_ghz, y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies_ghz.len() != self.y.len() {
            return Err(Error::invalid("frequency and admittance columns differ in length"));
        }
        if self.frequencies_ghz.len() < MIN_RECORD_POINTS {
            return Err(Error::invalid(format!(
                "admittance record needs at least {MIN_RECORD_POINTS} points, got {}",
                self.frequencies_ghz.len()
            )));
        }
        if let Some(i) = self.frequencies_ghz.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("frequencies not strictly ascending at index {}", i + 1)));
        }
        if self.frequencies_ghz[0] <= 0.0 {
            return Err(Error::invalid("frequencies must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Copy with complex multiplicative noise `Y·(1 + n)` where `n` has
    /// total power `10^(-snr_db/10)`.
    pub fn with_noise(&self, snr_db: f64, seed: u64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::invalid("noise level must be finite"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = 10f64.powf(-snr_db / 20.0) / 2f64.sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let y = self
            .y
            .iter()
            .map(|&y| y * Complex64::new(1.0 + normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        Self::new(self.frequencies_ghz.clone(), y)
    }
}

fn magnitude(y: &Complex64) -> f64 {
    y.norm()
}

fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

fn first_local_minimum_after(values: &[f64], start: usize) -> Option<usize> {
    (start + 1..values.len().saturating_sub(1)).find(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
}

/// Heuristic starting point for [`fit_mbvd`].
pub fn initial_guess(data: &AdmittanceRecord, n_spurs: usize) -> Result<ResonatorSpec> {
    data.validate()?;
    let f = &data.frequencies_ghz;
    let mags: Vec<f64> = data.y.iter().map(magnitude).collect();
    let n = mags.len();
    let peak = (0..n).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).expect("validated non-empty");
    if peak == 0 || peak == n - 1 {
        return Err(Error::NoResonance);
    }
    let dip = first_local_minimum_after(&mags, peak)
        .ok_or_else(|| Error::Degenerate("no admittance minimum above the main peak".into()))?;
    let (fs, fp) = (f[peak], f[dip]);
    let k2 = k2_from_fs_fp(fs, fp, CouplingConvention::CapacitanceRatio)?;

    // Im(Y)/ω over the lowest decile, corrected for the motional branch's
    // capacitive contribution below fs.
    let r = (fp / fs).powi(2) - 1.0;
    let decile = (n / 10).max(1);
    let mut c0s: Vec<f64> = (0..decile)
        .map(|i| {
            let c_apparent = data.y[i].im / (2.0 * std::f64::consts::PI * f[i] * 1e-6);
            let x = f[i] / fs;
            if x < 0.95 {
                c_apparent / (1.0 + r / (1.0 - x * x))
            } else {
                c_apparent
            }
        })
        .collect();
    c0s.sort_by(f64::total_cmp);
    let c0 = c0s[c0s.len() / 2];
    if !(c0 > 0.0) {
        return Err(Error::Degenerate("low-frequency susceptance is not capacitive".into()));
    }

    let conductance: Vec<f64> = data.y.iter().map(|y| y.re).collect();
    let q = conductance_width_q(f, &conductance, peak).unwrap_or(100.0);

    let mut spurs = Vec::new();
    if n_spurs > 0 {
        let mut candidates: Vec<usize> = local_maxima(&mags).into_iter().filter(|&i| i != peak).collect();
        candidates.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
        for &i in candidates.iter().take(n_spurs) {
            let spur_k2 = first_local_minimum_after(&mags, i)
                .and_then(|j| k2_from_fs_fp(f[i], f[j], CouplingConvention::CapacitanceRatio).ok())
                .filter(|k| *k > 0.0)
                .unwrap_or(0.1 * k2)
                .min(0.5 * k2);
            spurs.push(SpurSpec { fs_ghz: f[i], k2: spur_k2, q: Some(q) });
        }
        spurs.sort_by(|a, b| a.fs_ghz.total_cmp(&b.fs_ghz));
    }

    let mut spec = ResonatorSpec::new(fs, k2.clamp(1e-4, 0.9), q, c0)?;
    spec.spurs = spurs;
    Ok(spec)
}

/// Q from the half-maximum width of the conductance peak nearest `start`.
fn conductance_width_q(f: &[f64], g: &[f64], start: usize) -> Option<f64> {
    let n = g.len();
    let mut peak = start;
    while peak + 1 < n && g[peak + 1] > g[peak] {
        peak += 1;
    }
    while peak > 0 && g[peak - 1] > g[peak] {
        peak -= 1;
    }
    let level = 0.5 * g[peak];
    let lo = (0..peak).rev().find(|&i| g[i] <= level)?;
    let hi = (peak + 1..n).find(|&i| g[i] <= level)?;
    let interp = |a: usize, b: usize| f[a] + (level - g[a]) * (f[b] - f[a]) / (g[b] - g[a]);
    let (f1, f2) = (interp(lo, lo + 1), interp(hi - 1, hi));
    (f2 > f1).then(|| (f1 * f2).sqrt() / (f2 - f1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Independent simplex starts; the first starts at the initial guess.
    pub restarts: usize,
    pub seed: u64,
    /// Fits with a higher residual are reported as not converged.
    pub residual_ceiling: f64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Only samples inside this band take part in the fit.
    pub window_ghz: Option<(f64, f64)>,
    /// Samples inside these bands are ignored, e.g. electromagnetic artifacts.
    pub exclude_ghz: Vec<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            residual_ceiling: 0.05,
            max_evals: 20_000,
            window_ghz: None,
            exclude_ghz: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    /// Halving the branch coupling barely changes the residual.
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitFlag {
    /// A localized mismatch the model does not explain, at `frequency_ghz`.
    UnmodeledFeature { frequency_ghz: f64 },
    /// A parameter ended on its search bound.
    AtBound { branch: usize, parameter: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MbvdParams,
    pub spec: ResonatorSpec,
    /// RMS distance between model and data in log10 units.
    pub residual: f64,
    pub converged: bool,
    pub branch_confidence: Vec<Confidence>,
    pub flags: Vec<FitFlag>,
    /// Index of the winning start.
    pub start: usize,
    pub evals: usize,
    /// Best-so-far residual of the winning start, per simplex iteration.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn has_unmodeled_feature(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, FitFlag::UnmodeledFeature { .. }))
    }
}

/// Pointwise mismatch above which a localized feature is flagged, both
/// relative to the median mismatch and in absolute log10 units.
const UNMODELED_RATIO: f64 = 5.0;
const UNMODELED_FLOOR: f64 = 0.01;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps between the spec and the unbounded search coordinates.
struct Coordinates {
    n_spurs: usize,
}

impl Coordinates {
    fn encode(&self, spec: &ResonatorSpec) -> Vec<f64> {
        let mut x = vec![
            spec.fs_ghz.ln(),
            logit(spec.k2),
            spec.q.ln(),
            spec.c0_ff.ln(),
            spec.rs_ohm.max(1e-3).ln(),
        ];
        for s in &spec.spurs {
            x.extend([s.fs_ghz.ln(), logit(s.k2), s.q.unwrap_or(spec.q).ln()]);
        }
        x
    }

    fn decode(&self, x: &[f64]) -> ResonatorSpec {
        let spurs = (0..self.n_spurs)
            .map(|i| {
                let o = 5 + 3 * i;
                SpurSpec { fs_ghz: x[o].exp(), k2: sigmoid(x[o + 1]), q: Some(x[o + 2].exp()) }
            })
            .collect();
        ResonatorSpec {
            fs_ghz: x[0].exp(),
            k2: sigmoid(x[1]),
            q: x[2].exp(),
            c0_ff: x[3].exp(),
            spurs,
            rs_ohm: x[4].exp(),
            r0_ohm: 0.0,
        }
    }

    fn bounds(&self, f_range: (f64, f64), c0: f64) -> Bounds {
        let fs = (f_range.0.ln(), f_range.1.ln());
        let k2 = (logit(1e-5), logit(0.9));
        let q = (0.0, 1e5f64.ln());
        let mut lower = vec![fs.0, k2.0, q.0, (c0 / 100.0).ln(), 1e-9f64.ln()];
        let mut upper = vec![fs.1, k2.1, q.1, (c0 * 100.0).ln(), 1e4f64.ln()];
        for _ in 0..self.n_spurs {
            lower.extend([fs.0, k2.0, q.0]);
            upper.extend([fs.1, k2.1, q.1]);
        }
        Bounds::new(lower, upper)
    }

    fn names(&self, index: usize) -> (usize, &'static str) {
        const MAIN: [&str; 5] = ["fs", "k2", "q", "c0", "rs"];
        const SPUR: [&str; 3] = ["fs", "k2", "q"];
        if index < 5 {
            (0, MAIN[index])
        } else {
            (1 + (index - 5) / 3, SPUR[(index - 5) % 3])
        }
    }
}

/// Complex log10 distance per sample, in the two channels.
fn sample_error(model: Complex64, data: Complex64) -> f64 {
    let ratio = model / data;
    let e = Complex64::new(ratio.norm().ln(), ratio.arg()) / LN_10;
    if e.is_finite() {
        e.norm_sqr()
    } else {
        1e6
    }
}

struct Objective<'a> {
    frequencies: Vec<f64>,
    data: Vec<Complex64>,
    coords: &'a Coordinates,
}

impl Objective<'_> {
    fn mean_square(&self, spec: &ResonatorSpec) -> f64 {
        let Ok(params) = synthesize_mbvd(spec) else { return f64::INFINITY };
        let total: f64 = self
            .frequencies
            .iter()
            .zip(&self.data)
            .map(|(&f, &y)| sample_error(admittance(&params, f), y))
            .sum();
        total / (2.0 * self.frequencies.len() as f64)
    }

    fn at(&self, x: &[f64]) -> f64 {
        self.mean_square(&self.coords.decode(x))
    }
}

fn jitter(x0: &[f64], coords: &Coordinates, bounds: &Bounds, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = x0
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let sigma = match coords.names(i).1 {
                "fs" => 0.002,
                "k2" => 0.1,
                "q" => 0.2,
                "c0" => 0.05,
                _ => 1.0,
            };
            v + Normal::new(0.0, sigma).expect("positive sigma").sample(&mut rng)
        })
        .collect();
    bounds.project(&mut x);
    x
}

/// Least-squares mBVD fit of `data`, seeded from `init`.
///
/// Starts run in parallel; the winner is the lowest residual with ties going
/// to the lower start index. Returns [`Error::NotConverged`] carrying the
/// best-effort result when the residual exceeds the ceiling.
pub fn fit_mbvd(data: &AdmittanceRecord, init: &ResonatorSpec, options: &FitOptions) -> Result<FitResult> {
    data.validate()?;
    init.validate()?;
    let coords = Coordinates { n_spurs: init.spurs.len() };
    let keep = |f: f64| {
        options.window_ghz.is_none_or(|(a, b)| f >= a && f <= b)
            && !options.exclude_ghz.iter().any(|&(a, b)| f >= a && f <= b)
    };
    let (frequencies, samples): (Vec<f64>, Vec<Complex64>) = data
        .frequencies_ghz
        .iter()
        .zip(&data.y)
        .filter(|(f, _)| keep(**f))
        .map(|(f, y)| (*f, *y))
        .unzip();
    if frequencies.len() < 10 {
        return Err(Error::invalid("fit window leaves fewer than 10 samples"));
    }
    let objective = Objective { frequencies, data: samples, coords: &coords };
    let f_range = (objective.frequencies[0], *objective.frequencies.last().expect("non-empty"));
    let bounds = coords.bounds(f_range, init.c0_ff);
    let mut x0 = coords.encode(init);
    bounds.project(&mut x0);

    let simplex = NelderMead {
        max_evals: options.max_evals,
        f_tol: 1e-24,
        x_tol: 1e-11,
        initial_step: 0.02,
        restarts: 4,
    };
    let runs: Vec<_> = (0..options.restarts.max(1))
        .into_par_iter()
        .map(|start| {
            let from = if start == 0 {
                x0.clone()
            } else {
                jitter(&x0, &coords, &bounds, options.seed.wrapping_add(start as u64))
            };
            simplex.minimize(|x| objective.at(x), &from, Some(&bounds))
        })
        .collect();
    let (start, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.value.total_cmp(&b.value).then(ia.cmp(ib)))
        .expect("at least one start");

    let spec = coords.decode(&best.x);
    let params = synthesize_mbvd(&spec)?;
    let residual = best.value.sqrt();

    let mut flags = Vec::new();
    for (i, (&x, (&lo, &hi))) in best.x.iter().zip(bounds.lower.iter().zip(&bounds.upper)).enumerate() {
        let (branch, parameter) = coords.names(i);
        // the series-resistance floor is an expected resting place
        if (parameter != "rs" && (x - lo).abs() < 1e-9) || (x - hi).abs() < 1e-9 {
            flags.push(FitFlag::AtBound { branch, parameter: parameter.to_string() });
        }
    }
    if let Some(frequency_ghz) = unmodeled_feature(&objective, &params) {
        flags.push(FitFlag::UnmodeledFeature { frequency_ghz });
    }
    let branch_confidence = (0..=spec.spurs.len())
        .map(|b| {
            let mut weaker = spec.clone();
            match b {
                0 => weaker.k2 *= 0.5,
                _ => weaker.spurs[b - 1].k2 *= 0.5,
            }
            let degraded = objective.mean_square(&weaker).sqrt();
            if degraded - residual > 0.1 * residual.max(1e-6) {
                Confidence::High
            } else {
                Confidence::Low
            }
        })
        .collect();

    let result = FitResult {
        params,
        spec,
        residual,
        converged: residual <= options.residual_ceiling,
        branch_confidence,
        flags,
        start,
        evals: best.evals,
        trace: best.trace.iter().map(|v| v.sqrt()).collect(),
    };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

fn unmodeled_feature(objective: &Objective, params: &MbvdParams) -> Option<f64> {
    let errors: Vec<f64> = objective
        .frequencies
        .iter()
        .zip(&objective.data)
        .map(|(&f, &y)| sample_error(admittance(params, f), y).sqrt())
        .collect();
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let (i, &worst) = errors.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    (worst > UNMODELED_FLOOR && worst > UNMODELED_RATIO * median).then(|| objective.frequencies[i])
}
