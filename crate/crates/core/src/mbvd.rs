//! Modified Butterworth-Van Dyke (mBVD) resonator model.
//!
//! A static branch `R0 + C0` sits in parallel with one or more motional
//! `Rm-Lm-Cm` branches, all behind a series electrode resistance `Rs`. The
//! first motional branch is the main mode; any further branches model
//! spurious overtones that share the static capacitance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Angular frequency in rad/ns, so that `omega·L[nH]` is in Ω and
/// `omega·C[fF]·1e-6` is in S.
fn omega(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz
}

/// `1/z`, mapping zero to infinity and infinity to zero.
pub(crate) fn recip(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        Complex64::new(f64::INFINITY, 0.0)
    } else if !z.is_finite() {
        Complex64::new(0.0, 0.0)
    } else {
        z.inv()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpurSpec {
    pub fs_ghz: f64,
    pub k2: f64,
    /// Falls back to the main-mode Q when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub fs_ghz: f64,
    pub k2: f64,
    pub q: f64,
    pub c0_ff: f64,
    #[serde(default)]
    pub spurs: Vec<SpurSpec>,
    #[serde(default)]
    pub rs_ohm: f64,
    #[serde(default)]
    pub r0_ohm: f64,
}

impl ResonatorSpec {
    pub fn new(fs_ghz: f64, k2: f64, q: f64, c0_ff: f64) -> Result<Self> {
        let spec = Self { fs_ghz, k2, q, c0_ff, spurs: Vec::new(), rs_ohm: 0.0, r0_ohm: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_spur(mut self, spur: SpurSpec) -> Self {
        self.spurs.push(spur);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_mode("main mode", self.fs_ghz, self.k2, self.q)?;
        if !(self.c0_ff.is_finite() && self.c0_ff > 0.0) {
            return Err(Error::invalid(format!("c0 must be positive, got {}", self.c0_ff)));
        }
        if !(self.rs_ohm >= 0.0 && self.r0_ohm >= 0.0) {
            return Err(Error::invalid("rs and r0 must be non-negative"));
        }
        for (i, spur) in self.spurs.iter().enumerate() {
            check_mode(&format!("spur {i}"), spur.fs_ghz, spur.k2, spur.q.unwrap_or(self.q))?;
        }
        Ok(())
    }

    /// Warnings for spurs whose coupling rivals the main mode.
    pub fn lint(&self) -> Vec<String> {
        self.spurs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.k2 > self.k2)
            .map(|(i, s)| format!("spur {i} at {} GHz couples more strongly ({}) than the main mode ({})", s.fs_ghz, s.k2, self.k2))
            .collect()
    }
}

fn check_mode(what: &str, fs: f64, k2: f64, q: f64) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid(format!("{what}: fs must be positive, got {fs}")));
    }
    if !(k2 > 0.0 && k2 < 1.0) {
        return Err(Error::invalid(format!("{what}: k2 must lie in (0, 1), got {k2}")));
    }
    if !(q > 0.0) {
        return Err(Error::invalid(format!("{what}: q must be positive, got {q}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalBranch {
    pub rm_ohm: f64,
    pub lm_nh: f64,
    pub cm_ff: f64,
}

impl MotionalBranch {
    pub fn resonance_ghz(&self) -> f64 {
        1e3 / (2.0 * PI * (self.lm_nh * self.cm_ff).sqrt())
    }

    pub fn quality_factor(&self) -> f64 {
        omega(self.resonance_ghz()) * self.lm_nh / self.rm_ohm
    }

    pub fn admittance(&self, f_ghz: f64) -> Complex64 {
        let w = omega(f_ghz);
        let z = Complex64::new(self.rm_ohm, w * self.lm_nh) + recip(J * (w * self.cm_ff * 1e-6));
        recip(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbvdParams {
    pub rs_ohm: f64,
    pub r0_ohm: f64,
    pub c0_ff: f64,
    /// Motional branches; the first is the main mode.
    pub branches: Vec<MotionalBranch>,
}

impl MbvdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0_ff > 0.0 && self.rs_ohm >= 0.0 && self.r0_ohm >= 0.0) {
            return Err(Error::invalid("mBVD static branch needs c0 > 0 and non-negative resistances"));
        }
        for b in &self.branches {
            if !(b.lm_nh > 0.0 && b.cm_ff > 0.0 && b.rm_ohm >= 0.0) {
                return Err(Error::invalid(format!("invalid motional branch {b:?}")));
            }
        }
        Ok(())
    }

    pub fn main_branch(&self) -> Option<&MotionalBranch> {
        self.branches.first()
    }

    /// Same circuit with every resistance set to zero.
    pub fn lossless(&self) -> Self {
        Self {
            rs_ohm: 0.0,
            r0_ohm: 0.0,
            c0_ff: self.c0_ff,
            branches: self
                .branches
                .iter()
                .map(|b| MotionalBranch { rm_ohm: 0.0, ..*b })
                .collect(),
        }
    }

    /// Copy with the electrical admittance multiplied by `alpha`.
    pub fn scaled_admittance(&self, alpha: f64) -> Self {
        Self {
            rs_ohm: self.rs_ohm / alpha,
            r0_ohm: self.r0_ohm / alpha,
            c0_ff: self.c0_ff * alpha,
            branches: self
                .branches
                .iter()
                .map(|b| MotionalBranch { rm_ohm: b.rm_ohm / alpha, lm_nh: b.lm_nh / alpha, cm_ff: b.cm_ff * alpha })
                .collect(),
        }
    }
}

/// How a coupling coefficient relates to the fs/fp spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConvention {
    /// `k² = Cm/(Cm + C0) = 1 − (fs/fp)²`.
    #[default]
    CapacitanceRatio,
    /// `k² = (π²/8)·(fp² − fs²)/fp²`.
    Pi2Over8,
}

impl CouplingConvention {
    /// Converts a coupling in this convention to the capacitance-ratio form.
    fn to_capacitance_ratio(self, k2: f64) -> f64 {
        match self {
            CouplingConvention::CapacitanceRatio => k2,
            CouplingConvention::Pi2Over8 => k2 * 8.0 / (PI * PI),
        }
    }
}

/// Coupling coefficient implied by a series/parallel resonance pair.
pub fn k2_from_fs_fp(fs_ghz: f64, fp_ghz: f64, convention: CouplingConvention) -> Result<f64> {
    if !(fs_ghz > 0.0) || fp_ghz < fs_ghz {
        return Err(Error::ResonanceOrdering { fs: fs_ghz, fp: fp_ghz });
    }
    let ratio = (fp_ghz - fs_ghz) * (fp_ghz + fs_ghz) / (fp_ghz * fp_ghz);
    Ok(match convention {
        CouplingConvention::CapacitanceRatio => ratio,
        CouplingConvention::Pi2Over8 => PI * PI / 8.0 * ratio,
    })
}

fn branch_for(fs_ghz: f64, k2_ratio: f64, q: f64, c0_ff: f64) -> Result<MotionalBranch> {
    if !(k2_ratio > 0.0 && k2_ratio < 1.0) {
        return Err(Error::invalid(format!("coupling {k2_ratio} has no capacitance-ratio equivalent")));
    }
    let cm_ff = c0_ff * k2_ratio / (1.0 - k2_ratio);
    let w = omega(fs_ghz);
    // w in rad/ns: L[nH] = 1/(w²·C[F]·1e9) with C[F] = C[fF]·1e-15
    let lm_nh = 1e6 / (w * w * cm_ff);
    let rm_ohm = 1e6 / (w * cm_ff * q);
    Ok(MotionalBranch { rm_ohm, lm_nh, cm_ff })
}

/// Lumped circuit for a behavioral resonator spec, using the default
/// capacitance-ratio coupling convention.
pub fn synthesize_mbvd(spec: &ResonatorSpec) -> Result<MbvdParams> {
    synthesize_mbvd_with(spec, CouplingConvention::CapacitanceRatio)
}

pub fn synthesize_mbvd_with(spec: &ResonatorSpec, convention: CouplingConvention) -> Result<MbvdParams> {
    spec.validate()?;
    let mut branches = vec![branch_for(spec.fs_ghz, convention.to_capacitance_ratio(spec.k2), spec.q, spec.c0_ff)?];
    for spur in &spec.spurs {
        branches.push(branch_for(
            spur.fs_ghz,
            convention.to_capacitance_ratio(spur.k2),
            spur.q.unwrap_or(spec.q),
            spec.c0_ff,
        )?);
    }
    Ok(MbvdParams { rs_ohm: spec.rs_ohm, r0_ohm: spec.r0_ohm, c0_ff: spec.c0_ff, branches })
}

/// Input admittance (S) at `f_ghz`.
pub fn admittance(params: &MbvdParams, f_ghz: f64) -> Complex64 {
    let w = omega(f_ghz);
    let stat = recip(Complex64::new(params.r0_ohm, 0.0) + recip(J * (w * params.c0_ff * 1e-6)));
    let total = params.branches.iter().fold(stat, |acc, b| acc + b.admittance(f_ghz));
    recip(Complex64::new(params.rs_ohm, 0.0) + recip(total))
}

pub fn admittance_sweep(params: &MbvdParams, frequencies_ghz: &[f64]) -> Vec<Complex64> {
    frequencies_ghz.iter().map(|&f| admittance(params, f)).collect()
}

/// Reflection coefficient of an admittance against a real reference impedance.
pub fn admittance_to_s11(y: Complex64, z0: f64) -> Complex64 {
    if !y.is_finite() {
        return Complex64::new(-1.0, 0.0);
    }
    let zy = y * z0;
    (1.0 - zy) / (1.0 + zy)
}

pub fn s11_to_admittance(s11: Complex64, z0: f64) -> Complex64 {
    (1.0 - s11) / ((1.0 + s11) * z0)
}

/// Log-spaced scan window around the main branch used for extremum search.
const SCAN_SPAN: (f64, f64) = (0.5, 2.0);
const SCAN_POINTS: usize = 20_001;

fn golden_section(mut a: f64, mut b: f64, mut value: impl FnMut(f64) -> f64, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut cost = |x: f64| {
        let v = value(x);
        if v.is_nan() {
            sign * f64::INFINITY
        } else {
            sign * v
        }
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..300 {
        if (b - a).abs() <= 1e-13 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = cost(d);
        }
    }
    0.5 * (a + b)
}

fn magnitude(y: Complex64) -> f64 {
    let m = y.norm();
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

fn scan_grid(center: f64) -> Vec<f64> {
    let (lo, hi) = (center * SCAN_SPAN.0, center * SCAN_SPAN.1);
    let step = (hi / lo).ln() / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Series (max |Y|) and parallel (min |Y| above fs) resonances of the main mode.
pub fn resonance_frequencies(params: &MbvdParams) -> Result<(f64, f64)> {
    let main = params
        .main_branch()
        .ok_or_else(|| Error::Degenerate("no motional branch".into()))?;
    let grid = scan_grid(main.resonance_ghz());
    let mags: Vec<f64> = grid.iter().map(|&f| magnitude(admittance(params, f))).collect();

    let peak = (1..grid.len() - 1)
        .filter(|&i| mags[i] >= mags[i - 1] && mags[i] >= mags[i + 1])
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .ok_or_else(|| Error::Degenerate("no admittance maximum in the scan window".into()))?;
    let fs = golden_section(grid[peak - 1], grid[peak + 1], |f| magnitude(admittance(params, f)), true);

    let dip = (peak + 1..grid.len() - 1)
        .find(|&i| mags[i] <= mags[i - 1] && mags[i] <= mags[i + 1])
        .ok_or_else(|| Error::Degenerate("no admittance minimum above fs in the scan window".into()))?;
    let fp = golden_section(grid[dip - 1], grid[dip + 1], |f| magnitude(admittance(params, f)), false);
    Ok((fs, fp))
}

/// Quality factor of the main resonance from the half-maximum width of the
/// conductance peak. Exact for a lone branch with `Rs = R0 = 0`.
pub fn conductance_q(params: &MbvdParams) -> Result<f64> {
    let main = params
        .main_branch()
        .ok_or_else(|| Error::Degenerate("no motional branch".into()))?;
    if main.rm_ohm == 0.0 && params.r0_ohm == 0.0 && params.rs_ohm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let g = |f: f64| admittance(params, f).re;
    let grid = scan_grid(main.resonance_ghz());
    let values: Vec<f64> = grid.iter().map(|&f| g(f)).collect();
    let f0 = main.resonance_ghz();
    let nearest = grid.partition_point(|&f| f < f0).min(grid.len() - 2).max(1);
    // climb to the conductance peak closest to the branch resonance
    let mut i = nearest;
    while i + 1 < grid.len() - 1 && values[i + 1] > values[i] {
        i += 1;
    }
    while i > 1 && values[i - 1] > values[i] {
        i -= 1;
    }
    let f_peak = golden_section(grid[i - 1], grid[i + 1], g, true);
    let half = 0.5 * g(f_peak);

    let mut lo = i;
    while lo > 0 && values[lo] > half {
        lo -= 1;
    }
    let mut hi = i;
    while hi < grid.len() - 1 && values[hi] > half {
        hi += 1;
    }
    if values[lo] > half || values[hi] > half {
        return Err(Error::Degenerate("conductance peak wider than the scan window".into()));
    }
    let f_lo = bisect(grid[lo], f_peak, |f| g(f) - half);
    let f_hi = bisect(f_peak, grid[hi], |f| g(f) - half);
    Ok((f_lo * f_hi).sqrt() / (f_hi - f_lo))
}

fn bisect(mut a: f64, mut b: f64, h: impl Fn(f64) -> f64) -> f64 {
    let ha = h(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (h(m) > 0.0) == (ha > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-15 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Behavioral summary recovered from a circuit's admittance response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceSummary {
    pub fs_ghz: f64,
    pub fp_ghz: f64,
    pub k2: f64,
    pub q: f64,
}

pub fn characterize(params: &MbvdParams, convention: CouplingConvention) -> Result<ResonanceSummary> {
    let (fs_ghz, fp_ghz) = resonance_frequencies(params)?;
    Ok(ResonanceSummary {
        fs_ghz,
        fp_ghz,
        k2: k2_from_fs_fp(fs_ghz, fp_ghz, convention)?,
        q: conductance_q(params)?,
    })
}
