//! Ladder filters as cascades of series and shunt resonators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbvd::{admittance, MbvdParams};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Series,
    Shunt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderElement {
    pub placement: Placement,
    pub resonator: MbvdParams,
    /// Layout inductance in series with the resonator (nH).
    #[serde(default)]
    pub parasitic_nh: f64,
}

impl LadderElement {
    pub fn series(resonator: MbvdParams) -> Self {
        Self { placement: Placement::Series, resonator, parasitic_nh: 0.0 }
    }

    pub fn shunt(resonator: MbvdParams) -> Self {
        Self { placement: Placement::Shunt, resonator, parasitic_nh: 0.0 }
    }

    pub fn with_parasitic(mut self, nh: f64) -> Self {
        self.parasitic_nh = nh;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub elements: Vec<LadderElement>,
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
}

fn default_z0() -> f64 {
    50.0
}

impl FilterDesign {
    pub fn new(elements: Vec<LadderElement>, z0_ohm: f64) -> Result<Self> {
        let design = Self { elements, z0_ohm };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("a ladder needs at least one element"));
        }
        if !(self.z0_ohm.is_finite() && self.z0_ohm > 0.0) {
            return Err(Error::invalid(format!("z0 must be positive, got {}", self.z0_ohm)));
        }
        for e in &self.elements {
            if !(e.parasitic_nh >= 0.0) {
                return Err(Error::invalid("parasitic inductance must be non-negative"));
            }
            e.resonator.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub n_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepGrid {
    pub fn linear(f_start_ghz: f64, f_stop_ghz: f64, n_points: usize) -> Result<Self> {
        let grid = Self { f_start_ghz, f_stop_ghz, n_points, spacing: Spacing::Linear };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start_ghz > 0.0 && self.f_stop_ghz > self.f_start_ghz && self.f_stop_ghz.is_finite()) {
            return Err(Error::invalid("sweep needs 0 < f_start < f_stop"));
        }
        if self.n_points < 2 {
            return Err(Error::invalid("sweep needs at least 2 points"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i == self.n_points - 1 {
                    return self.f_stop_ghz;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.f_start_ghz + (self.f_stop_ghz - self.f_start_ghz) * t,
                    Spacing::Logarithmic => self.f_start_ghz * (self.f_stop_ghz / self.f_start_ghz).powf(t),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub frequencies_ghz: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
    pub s12: Vec<Complex64>,
    pub s22: Vec<Complex64>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.frequencies_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_ghz.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [self.s11.len(), self.s21.len(), self.s12.len(), self.s22.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("S-parameter columns differ in length"));
        }
        Ok(())
    }

    pub fn s21_db(&self) -> Vec<f64> {
        self.s21.iter().map(|s| 20.0 * s.norm().log10()).collect()
    }
}

/// Two-port chain matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub fn identity() -> Self {
        Self { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    pub fn series_impedance(z: Complex64) -> Self {
        Self { a: ONE, b: z, c: ZERO, d: ONE }
    }

    pub fn shunt_admittance(y: Complex64) -> Self {
        Self { a: ONE, b: ZERO, c: y, d: ONE }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn then(&self, next: &Abcd) -> Abcd {
        Abcd {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Impedance seen at port 1 with port 2 terminated in `load`.
    /// `None` stands for an open circuit.
    fn input_impedance(&self, load: Option<Complex64>) -> Option<Complex64> {
        let (num, den) = match load {
            None => (self.a, self.c),
            Some(z) => (self.a * z + self.b, self.c * z + self.d),
        };
        ratio(num, den)
    }

    /// Impedance seen at port 2 with port 1 terminated in `source`.
    fn output_impedance(&self, source: Option<Complex64>) -> Option<Complex64> {
        let (num, den) = match source {
            None => (self.d, self.c),
            Some(z) => (self.d * z + self.b, self.c * z + self.a),
        };
        ratio(num, den)
    }
}

fn ratio(num: Complex64, den: Complex64) -> Option<Complex64> {
    if den == ZERO {
        None
    } else {
        Some(num / den)
    }
}

/// Chain matrix of one element, or the ideal open/short it degenerates to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementMatrix {
    Finite(Abcd),
    /// Series element with zero admittance.
    OpenSeries,
    /// Shunt element with infinite admittance.
    ShortedShunt,
}

pub fn element_abcd(element: &LadderElement, f_ghz: f64) -> ElementMatrix {
    let y = admittance(&element.resonator, f_ghz);
    let z_parasitic = Complex64::new(0.0, 2.0 * PI * f_ghz * element.parasitic_nh);
    match element.placement {
        Placement::Series => {
            if y == ZERO {
                return ElementMatrix::OpenSeries;
            }
            let z = if y.is_finite() { y.inv() } else { ZERO };
            ElementMatrix::Finite(Abcd::series_impedance(z + z_parasitic))
        }
        Placement::Shunt => {
            let branch_y = if !y.is_finite() {
                if z_parasitic == ZERO {
                    return ElementMatrix::ShortedShunt;
                }
                z_parasitic.inv()
            } else if z_parasitic == ZERO {
                y
            } else {
                (y.inv() + z_parasitic).inv()
            };
            ElementMatrix::Finite(Abcd::shunt_admittance(branch_y))
        }
    }
}

/// Cascade outcome: a finite chain matrix, or a chain interrupted by ideal
/// opens/shorts. For a broken chain the sections before the first break and
/// after the last are kept to compute port reflections.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Cascade {
    Finite(Abcd),
    Broken {
        before: Abcd,
        first: ElementMatrix,
        after: Abcd,
        last: ElementMatrix,
    },
}

pub fn cascade_matrices(matrices: &[ElementMatrix]) -> Cascade {
    let breaks: Vec<usize> = matrices
        .iter()
        .enumerate()
        .filter(|(_, m)| !matches!(m, ElementMatrix::Finite(_)))
        .map(|(i, _)| i)
        .collect();
    let product = |ms: &[ElementMatrix]| {
        ms.iter().fold(Abcd::identity(), |acc, m| match m {
            ElementMatrix::Finite(x) => acc.then(x),
            _ => acc,
        })
    };
    match (breaks.first(), breaks.last()) {
        (Some(&first), Some(&last)) => Cascade::Broken {
            before: product(&matrices[..first]),
            first: matrices[first],
            after: product(&matrices[last + 1..]),
            last: matrices[last],
        },
        _ => Cascade::Finite(product(matrices)),
    }
}

/// Chain matrix of the ladder at one frequency, input port first.
pub fn cascade(elements: &[LadderElement], f_ghz: f64) -> Cascade {
    let matrices: Vec<ElementMatrix> = elements.iter().map(|e| element_abcd(e, f_ghz)).collect();
    cascade_matrices(&matrices)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParams {
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
}

/// ABCD to S with the same real reference impedance on both ports.
pub fn s_params(abcd: &Abcd, z0: f64) -> Result<SParams> {
    if !(z0 > 0.0) {
        return Err(Error::invalid(format!("z0 must be positive, got {z0}")));
    }
    let Abcd { a, b, c, d } = *abcd;
    let bz = b / z0;
    let cz = c * z0;
    let den = a + bz + cz + d;
    if den == ZERO || !den.is_finite() {
        return Err(Error::invalid("ABCD to S conversion is singular"));
    }
    Ok(SParams {
        s11: (a + bz - cz - d) / den,
        s21: 2.0 / den,
        s12: 2.0 * abcd.determinant() / den,
        s22: (-a + bz - cz + d) / den,
    })
}

fn reflection(z: Option<Complex64>, z0: f64) -> Complex64 {
    match z {
        None => ONE,
        Some(z) if !z.is_finite() => ONE,
        Some(z) => (z - z0) / (z + z0),
    }
}

fn termination(m: &ElementMatrix) -> Option<Complex64> {
    match m {
        ElementMatrix::ShortedShunt => Some(ZERO),
        _ => None,
    }
}

/// S-parameters of a reciprocal cascade. `s12` is assigned from `s21`.
pub fn cascade_s_params(cascade: &Cascade, z0: f64) -> Result<SParams> {
    match cascade {
        Cascade::Finite(m) => {
            let s = s_params(m, z0)?;
            Ok(SParams { s12: s.s21, ..s })
        }
        Cascade::Broken { before, first, after, last } => Ok(SParams {
            s11: reflection(before.input_impedance(termination(first)), z0),
            s21: ZERO,
            s12: ZERO,
            s22: reflection(after.output_impedance(termination(last)), z0),
        }),
    }
}

/// Frequency sweep of the ladder. Points are evaluated in parallel and
/// assembled in grid order.
pub fn simulate(design: &FilterDesign, grid: &SweepGrid) -> Result<SweepResult> {
    design.validate()?;
    grid.validate()?;
    simulate_at(design, &grid.frequencies())
}

pub fn simulate_at(design: &FilterDesign, frequencies_ghz: &[f64]) -> Result<SweepResult> {
    let points: Vec<SParams> = frequencies_ghz
        .par_iter()
        .enumerate()
        .map(|(index, &f)| {
            cascade_s_params(&cascade(&design.elements, f), design.z0_ohm)
                .map_err(|_| Error::NonPhysical { index, frequency_ghz: f })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        frequencies_ghz: frequencies_ghz.to_vec(),
        s11: points.iter().map(|p| p.s11).collect(),
        s21: points.iter().map(|p| p.s21).collect(),
        s12: points.iter().map(|p| p.s12).collect(),
        s22: points.iter().map(|p| p.s22).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbvd::{synthesize_mbvd, ResonatorSpec, SpurSpec};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn table_series() -> MbvdParams {
        synthesize_mbvd(&ResonatorSpec::new(49.6, 0.048, 80.0, 37.0).unwrap()).unwrap()
    }

    fn table_shunt() -> MbvdParams {
        synthesize_mbvd(&ResonatorSpec::new(47.7, 0.075, 80.0, 80.0).unwrap()).unwrap()
    }

    fn three_stage_ladder(series: MbvdParams, shunt: MbvdParams) -> FilterDesign {
        FilterDesign::new(
            vec![
                LadderElement::series(series.clone()),
                LadderElement::shunt(shunt),
                LadderElement::series(series),
            ],
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn matched_through_and_series_load() {
        let s = s_params(&Abcd::identity(), 50.0).unwrap();
        assert_eq!(s.s21, ONE);
        assert_eq!(s.s11, ZERO);
        let s = s_params(&Abcd::series_impedance(c(50.0, 0.0)), 50.0).unwrap();
        assert!((s.s21 - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((s.s11 - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let m = Abcd::series_impedance(c(50.0, 0.0));
        assert_eq!(m.b, c(50.0, 0.0));
        assert_eq!(m.determinant(), ONE);
        assert!(s_params(&Abcd::identity(), 0.0).is_err());
        let singular = Abcd { a: c(1.0, 0.0), b: c(-50.0, 0.0), c: ZERO, d: ZERO };
        assert!(s_params(&singular, 50.0).is_err());
    }

    #[test]
    fn shunt_admittances_add() {
        let (y1, y2) = (c(0.01, 0.02), c(0.003, -0.05));
        let both = Abcd::shunt_admittance(y1).then(&Abcd::shunt_admittance(y2));
        let one = Abcd::shunt_admittance(y1 + y2);
        assert!((both.c - one.c).norm() < 1e-18 && both.a == ONE && both.d == ONE && both.b == ZERO);
        let zero = Abcd::shunt_admittance(ZERO);
        assert_eq!(zero, Abcd::identity());
    }

    #[test]
    fn single_element_cascade_is_itself() {
        let e = LadderElement::series(table_series());
        match (cascade(std::slice::from_ref(&e), 48.0), element_abcd(&e, 48.0)) {
            (Cascade::Finite(m), ElementMatrix::Finite(x)) => assert_eq!(m, x),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn series_resonator_is_nearly_short_at_fs() {
        let e = LadderElement::series(table_series());
        let b_at = |f: f64| match element_abcd(&e, f) {
            ElementMatrix::Finite(m) => m.b.norm(),
            other => panic!("{other:?}"),
        };
        let at_fs = b_at(49.6);
        let expected = 1.0 / admittance(&e.resonator, 49.6).norm();
        assert!((at_fs - expected).abs() < 1e-9 * expected);
        assert!(at_fs < b_at(48.5) && at_fs < b_at(50.5));
        assert!(at_fs < 30.0);
    }

    #[test]
    fn open_series_and_shorted_shunt() {
        let open = cascade_matrices(&[ElementMatrix::OpenSeries]);
        let s = cascade_s_params(&open, 50.0).unwrap();
        assert_eq!((s.s11, s.s21, s.s22), (ONE, ZERO, ONE));

        let shorted = cascade_matrices(&[
            ElementMatrix::Finite(Abcd::series_impedance(c(50.0, 0.0))),
            ElementMatrix::ShortedShunt,
        ]);
        let s = cascade_s_params(&shorted, 50.0).unwrap();
        assert!(s.s11.norm() < 1e-15, "50 Ω into a short looks matched");
        assert_eq!(s.s22, c(-1.0, 0.0));
        assert_eq!(s.s21, ZERO);
    }

    #[test]
    fn table_ladder_passband_near_49_ghz() {
        let design = three_stage_ladder(table_series(), table_shunt());
        let sweep = simulate(&design, &SweepGrid::linear(40.0, 60.0, 4001).unwrap()).unwrap();
        let db = sweep.s21_db();
        let peak = (0..db.len()).max_by(|&a, &b| db[a].total_cmp(&db[b])).unwrap();
        assert!((sweep.frequencies_ghz[peak] - 49.3).abs() < 0.6);
    }

    #[test]
    fn lossless_ladder_conserves_energy() {
        let design = three_stage_ladder(table_series().lossless(), table_shunt().lossless());
        let sweep = simulate(&design, &SweepGrid::linear(40.0, 60.0, 4001).unwrap()).unwrap();
        for i in 0..sweep.len() {
            let e = sweep.s11[i].norm_sqr() + sweep.s21[i].norm_sqr();
            assert!((e - 1.0).abs() < 1e-9, "{} GHz: {e}", sweep.frequencies_ghz[i]);
            assert_eq!(sweep.s12[i], sweep.s21[i]);
        }
    }

    #[test]
    fn spurs_add_out_of_band_tones() {
        let grid = SweepGrid::linear(40.0, 60.0, 4001).unwrap();
        let spec = ResonatorSpec::new(49.6, 0.048, 80.0, 37.0).unwrap();
        let spurred = spec
            .clone()
            .with_spur(SpurSpec { fs_ghz: 45.47, k2: 0.004, q: None })
            .with_spur(SpurSpec { fs_ghz: 53.73, k2: 0.004, q: None });
        let clean = simulate(&three_stage_ladder(synthesize_mbvd(&spec).unwrap(), table_shunt()), &grid).unwrap();
        let noisy = simulate(&three_stage_ladder(synthesize_mbvd(&spurred).unwrap(), table_shunt()), &grid).unwrap();
        // each spur adds a resonance/anti-resonance pair, seen as local ripple
        let ripple = |sweep: &SweepResult, f0: f64| {
            let window: Vec<f64> = sweep
                .frequencies_ghz
                .iter()
                .zip(sweep.s21_db())
                .filter(|(f, _)| (**f - f0).abs() < 0.3)
                .map(|(_, d)| d)
                .collect();
            window.iter().copied().fold(f64::NEG_INFINITY, f64::max) - window.iter().copied().fold(f64::INFINITY, f64::min)
        };
        assert!(ripple(&noisy, 45.47) > ripple(&clean, 45.47) + 1.0);
        assert!(ripple(&noisy, 53.73) > ripple(&clean, 53.73) + 1.0);
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let design = three_stage_ladder(table_series(), table_shunt());
        let grid = SweepGrid::linear(40.0, 60.0, 501).unwrap();
        let parallel = simulate(&design, &grid).unwrap();
        for (i, &f) in grid.frequencies().iter().enumerate() {
            let s = cascade_s_params(&cascade(&design.elements, f), 50.0).unwrap();
            assert_eq!(s.s21, parallel.s21[i]);
            assert_eq!(s.s11, parallel.s11[i]);
        }
    }

    #[test]
    fn grid_spacing() {
        let lin = SweepGrid::linear(40.0, 60.0, 5).unwrap().frequencies();
        assert_eq!(lin, vec![40.0, 45.0, 50.0, 55.0, 60.0]);
        let log = SweepGrid { f_start_ghz: 1.0, f_stop_ghz: 100.0, n_points: 3, spacing: Spacing::Logarithmic };
        let f = log.frequencies();
        assert!((f[1] - 10.0).abs() < 1e-12 && f[2] == 100.0);
        assert!(SweepGrid::linear(60.0, 40.0, 10).is_err());
        assert!(SweepGrid::linear(40.0, 60.0, 1).is_err());
    }

    #[test]
    fn parasitic_inductance_composes_in_series() {
        let e = LadderElement::series(table_series()).with_parasitic(0.05);
        let f = 47.0;
        let ElementMatrix::Finite(m) = element_abcd(&e, f) else { panic!() };
        let expected = admittance(&e.resonator, f).inv() + c(0.0, 2.0 * PI * f * 0.05);
        assert!((m.b - expected).norm() < 1e-12);
        assert!(FilterDesign::new(vec![e.with_parasitic(-1.0)], 50.0).is_err());
        assert!(FilterDesign::new(vec![], 50.0).is_err());
    }

    fn arb_element() -> impl Strategy<Value = LadderElement> {
        (any::<bool>(), 40.0f64..60.0, 0.01f64..0.2, 10.0f64..500.0, 10.0f64..200.0, 0.0f64..0.1, 0.0f64..5.0)
            .prop_map(|(series, fs, k2, q, c0, lp, rs)| {
                let mut spec = ResonatorSpec::new(fs, k2, q, c0).unwrap();
                spec.rs_ohm = rs;
                let p = synthesize_mbvd(&spec).unwrap();
                let e = if series { LadderElement::series(p) } else { LadderElement::shunt(p) };
                e.with_parasitic(lp)
            })
    }

    proptest! {
        #[test]
        fn random_ladders_are_reciprocal_and_passive(
            elements in prop::collection::vec(arb_element(), 1..6),
            f in 40.0f64..60.0,
        ) {
            let Cascade::Finite(m) = cascade(&elements, f) else { return Ok(()) };
            prop_assert!((m.determinant() - ONE).norm() < 1e-9);
            let full = s_params(&m, 50.0).unwrap();
            prop_assert!((full.s12 - full.s21).norm() < 1e-9);
            for s in [full.s11, full.s21, full.s22] {
                prop_assert!(s.norm() <= 1.0 + 1e-9);
            }
        }
    }
}
