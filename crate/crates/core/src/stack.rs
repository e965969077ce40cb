//! Thickness-overtone dispersion of layered piezoelectric stacks.
//!
//! A resonance of thickness order `N` and lateral wavelength `λ` in a stack of
//! total thickness `h` sits at
//!
//! ```text
//! f = sqrt((v_lateral / λ)^2 + (N · v_thickness / (2h))^2)
//! ```
//!
//! With `h` in nm, `λ` in µm and velocities in m/s the thickness term in GHz is
//! `N·v/(2h)` and the lateral term is `v/(1000·λ)`, so no unit factors leak
//! into the arithmetic below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Velocities outside this band are accepted but reported as implausible.
pub const PLAUSIBLE_VELOCITY: (f64, f64) = (1000.0, 10000.0);

/// Lateral velocity used when a configuration does not provide one.
pub const DEFAULT_LATERAL_VELOCITY: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticConstants {
    /// Velocity in the thickness direction (m/s).
    pub v_thickness: f64,
    /// Velocity in the lateral direction (m/s).
    pub v_lateral: f64,
}

impl AcousticConstants {
    pub fn new(v_thickness: f64, v_lateral: f64) -> Result<Self> {
        for (name, v) in [("v_thickness", v_thickness), ("v_lateral", v_lateral)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { v_thickness, v_lateral })
    }

    /// Human-readable warnings for velocities outside [`PLAUSIBLE_VELOCITY`].
    pub fn warnings(&self) -> Vec<String> {
        let (lo, hi) = PLAUSIBLE_VELOCITY;
        [("v_thickness", self.v_thickness), ("v_lateral", self.v_lateral)]
            .into_iter()
            .filter(|(_, v)| *v < lo || *v > hi)
            .map(|(name, v)| format!("{name} = {v} m/s is outside the plausible range {lo}..{hi} m/s"))
            .collect()
    }

    /// Lateral contribution to the resonance (GHz).
    pub fn lateral_term(&self, lateral_wavelength_um: f64) -> f64 {
        self.v_lateral / (1000.0 * lateral_wavelength_um)
    }

    /// Thickness contribution to the resonance (GHz).
    pub fn thickness_term(&self, thickness_nm: f64, order: u32) -> f64 {
        order as f64 * self.v_thickness / (2.0 * thickness_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Poling {
    Up,
    Down,
}

impl Poling {
    pub fn sign(self) -> i8 {
        match self {
            Poling::Up => 1,
            Poling::Down => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Poling::Up => Poling::Down,
            Poling::Down => Poling::Up,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Poling::Up),
            -1 => Ok(Poling::Down),
            other => Err(Error::invalid(format!("orientation must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness_nm: f64,
    pub orientation: Poling,
}

impl Layer {
    pub fn new(thickness_nm: f64, orientation: Poling) -> Result<Self> {
        if !(thickness_nm.is_finite() && thickness_nm > 0.0) {
            return Err(Error::invalid(format!("layer thickness must be positive, got {thickness_nm}")));
        }
        Ok(Self { thickness_nm, orientation })
    }
}

/// Ordered piezoelectric layers, bottom first. The last layer is the one
/// exposed to trimming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    layers: Vec<Layer>,
    material: AcousticConstants,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, material: AcousticConstants) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a stack needs at least one layer"));
        }
        for layer in &layers {
            Layer::new(layer.thickness_nm, layer.orientation)?;
        }
        AcousticConstants::new(material.v_thickness, material.v_lateral)?;
        Ok(Self { layers, material })
    }

    /// `count` equal layers of alternating orientation, starting poled up.
    pub fn periodically_poled(count: usize, layer_nm: f64, material: AcousticConstants) -> Result<Self> {
        let thicknesses = vec![layer_nm; count];
        Self::alternating(&thicknesses, material)
    }

    /// Alternating orientations with the given per-layer thicknesses.
    pub fn alternating(thicknesses_nm: &[f64], material: AcousticConstants) -> Result<Self> {
        let mut orientation = Poling::Up;
        let mut layers = Vec::with_capacity(thicknesses_nm.len());
        for &t in thicknesses_nm {
            layers.push(Layer::new(t, orientation)?);
            orientation = orientation.flipped();
        }
        Self::new(layers, material)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn material(&self) -> &AcousticConstants {
        &self.material
    }

    pub fn with_material(&self, material: AcousticConstants) -> Self {
        Self { layers: self.layers.clone(), material }
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    pub fn top_layer(&self) -> &Layer {
        self.layers.last().expect("stack is never empty")
    }

    /// True when every adjacent pair of layers has opposite poling.
    pub fn is_periodically_poled(&self) -> bool {
        self.layers.windows(2).all(|w| w[0].orientation != w[1].orientation)
    }

    /// True when all layers share one thickness (to 1e-6 nm).
    pub fn is_uniform(&self) -> bool {
        let first = self.layers[0].thickness_nm;
        self.layers.iter().all(|l| (l.thickness_nm - first).abs() <= 1e-6)
    }

    /// Copy of the stack with `depth_nm` removed from the top layer.
    pub fn trimmed(&self, depth_nm: f64) -> Result<Self> {
        let top = self.top_layer();
        if !(0.0..top.thickness_nm).contains(&depth_nm) {
            return Err(Error::InfeasibleTrim { depth_nm, available_nm: top.thickness_nm });
        }
        let mut layers = self.layers.clone();
        let last = layers.len() - 1;
        layers[last].thickness_nm -= depth_nm;
        Self::new(layers, self.material)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Thickness overtone order.
    pub order: u32,
    /// Lateral wavelength (µm). `f64::INFINITY` drops the lateral term.
    pub lateral_wavelength_um: f64,
}

impl ModeSpec {
    pub fn new(order: u32, lateral_wavelength_um: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("mode order must be at least 1"));
        }
        if lateral_wavelength_um.is_nan() || lateral_wavelength_um <= 0.0 {
            return Err(Error::invalid(format!(
                "lateral wavelength must be positive, got {lateral_wavelength_um}"
            )));
        }
        Ok(Self { order, lateral_wavelength_um })
    }
}

/// Resonance of `mode` for a film of total thickness `thickness_nm`.
pub fn frequency_at_thickness(thickness_nm: f64, mode: &ModeSpec, constants: &AcousticConstants) -> f64 {
    constants
        .lateral_term(mode.lateral_wavelength_um)
        .hypot(constants.thickness_term(thickness_nm, mode.order))
}

/// Resonance frequency (GHz) of `mode` in `stack`.
pub fn mode_frequency(stack: &LayerStack, mode: &ModeSpec) -> f64 {
    frequency_at_thickness(stack.total_thickness_nm(), mode, stack.material())
}

/// Total thickness (nm) that places `mode` at `frequency_ghz`.
pub fn thickness_for_frequency(frequency_ghz: f64, mode: &ModeSpec, constants: &AcousticConstants) -> Result<f64> {
    let lateral = constants.lateral_term(mode.lateral_wavelength_um);
    if !(frequency_ghz > lateral) {
        return Err(Error::InfeasibleFrequency { frequency_ghz, lateral_ghz: lateral });
    }
    let thickness_term = ((frequency_ghz - lateral) * (frequency_ghz + lateral)).sqrt();
    Ok(mode.order as f64 * constants.v_thickness / (2.0 * thickness_term))
}

/// Analytic df/dh (GHz per nm) at the stack's total thickness.
pub fn frequency_sensitivity(stack: &LayerStack, mode: &ModeSpec) -> f64 {
    sensitivity_at_thickness(stack.total_thickness_nm(), mode, stack.material())
}

pub fn sensitivity_at_thickness(thickness_nm: f64, mode: &ModeSpec, constants: &AcousticConstants) -> f64 {
    let t = constants.thickness_term(thickness_nm, mode.order);
    let f = frequency_at_thickness(thickness_nm, mode, constants);
    -t * t / (thickness_nm * f)
}

/// Thickness reduction from `thickness_nm` that raises the resonance by
/// `delta_f_ghz`, by exact inversion of the dispersion relation.
pub fn thickness_shift_for(
    thickness_nm: f64,
    mode: &ModeSpec,
    constants: &AcousticConstants,
    delta_f_ghz: f64,
) -> Result<f64> {
    if !(delta_f_ghz >= 0.0) {
        return Err(Error::invalid(format!("frequency offset must be non-negative, got {delta_f_ghz}")));
    }
    if !(thickness_nm > 0.0) {
        return Err(Error::invalid(format!("effective thickness must be positive, got {thickness_nm}")));
    }
    if delta_f_ghz == 0.0 {
        return Ok(0.0);
    }
    let target = frequency_at_thickness(thickness_nm, mode, constants) + delta_f_ghz;
    Ok(thickness_nm - thickness_for_frequency(target, mode, constants)?)
}

/// Trim depth that shifts `mode` up by `delta_f_ghz`.
///
/// The shift is solved on the effective thickness `h + electrode_offset_nm`,
/// which lumps electrode mass loading into a single offset. The resulting
/// depth must fit inside the top layer.
pub fn trim_depth_for_offset(
    stack: &LayerStack,
    mode: &ModeSpec,
    delta_f_ghz: f64,
    electrode_offset_nm: f64,
) -> Result<f64> {
    let effective = stack.total_thickness_nm() + electrode_offset_nm;
    let depth = thickness_shift_for(effective, mode, stack.material(), delta_f_ghz)?;
    let available = stack.top_layer().thickness_nm;
    if depth >= available {
        return Err(Error::InfeasibleTrim { depth_nm: depth, available_nm: available });
    }
    Ok(depth)
}

/// Electrode offset (nm) under which [`trim_depth_for_offset`] returns
/// `target_trim_nm` for the given frequency step.
pub fn electrode_offset_for_trim(
    stack: &LayerStack,
    mode: &ModeSpec,
    delta_f_ghz: f64,
    target_trim_nm: f64,
) -> Result<f64> {
    if !(delta_f_ghz > 0.0 && target_trim_nm > 0.0) {
        return Err(Error::invalid("offset calibration needs positive frequency step and trim depth"));
    }
    let h = stack.total_thickness_nm();
    let depth = |offset: f64| thickness_shift_for(h + offset, mode, stack.material(), delta_f_ghz);
    // depth grows monotonically with effective thickness
    let (mut lo, mut hi) = (-h * (1.0 - 1e-9), 10.0 * h);
    if depth(lo)? > target_trim_nm || depth(hi)? < target_trim_nm {
        return Err(Error::invalid(format!(
            "no electrode offset in [{lo:.1}, {hi:.1}] nm yields a {target_trim_nm} nm trim"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if depth(mid)? < target_trim_nm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingClass {
    Strong,
    /// Adjacent to a strong order in a stack whose layers differ in
    /// thickness, so the stress field no longer cancels completely.
    PartiallyUnsuppressed,
    Suppressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvertoneCoupling {
    pub order: u32,
    pub class: CouplingClass,
}

/// Classify overtone orders `1..=max_order` by the alternating-poling parity
/// rule: an `M`-layer stack couples strongly at `N = M·n` for odd `n`.
pub fn coupled_overtone_orders(stack: &LayerStack, max_order: u32) -> Result<Vec<OvertoneCoupling>> {
    if !stack.is_periodically_poled() {
        return Err(Error::NotPeriodicallyPoled);
    }
    let m = stack.layers().len() as u32;
    let strong = |n: u32| n.is_multiple_of(m) && (n / m) % 2 == 1;
    let uniform = stack.is_uniform();
    Ok((1..=max_order)
        .map(|order| {
            let class = if strong(order) {
                CouplingClass::Strong
            } else if !uniform && (strong(order + 1) || (order > 1 && strong(order - 1))) {
                CouplingClass::PartiallyUnsuppressed
            } else {
                CouplingClass::Suppressed
            };
            OvertoneCoupling { order, class }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub thickness_nm: f64,
    pub order: u32,
    pub lateral_wavelength_um: f64,
    pub frequency_ghz: f64,
}

impl CalibrationPoint {
    fn thickness_coefficient(&self) -> f64 {
        self.order as f64 / (2.0 * self.thickness_nm)
    }

    fn lateral_coefficient(&self) -> f64 {
        1.0 / (1000.0 * self.lateral_wavelength_um)
    }

    fn model(&self, constants: &AcousticConstants) -> f64 {
        let mode = ModeSpec { order: self.order, lateral_wavelength_um: self.lateral_wavelength_um };
        frequency_at_thickness(self.thickness_nm, &mode, constants)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityFit {
    /// Fit the thickness velocity only, holding the lateral velocity fixed.
    ThicknessOnly { v_lateral: f64 },
    /// Fit both velocities.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub constants: AcousticConstants,
    /// Model minus measured frequency per point (GHz).
    pub residuals_ghz: Vec<f64>,
}

/// Least-squares velocities from measured `(h, N, λ, f)` resonances.
///
/// Starts from the linear fit of `f²` (linear in the squared velocities) and
/// refines with Gauss-Newton on the frequency residuals themselves.
pub fn calibrate_velocity(points: &[CalibrationPoint], fit: VelocityFit) -> Result<Calibration> {
    for p in points {
        if !(p.thickness_nm > 0.0 && p.order >= 1 && p.lateral_wavelength_um > 0.0 && p.frequency_ghz > 0.0) {
            return Err(Error::invalid(format!("invalid calibration point {p:?}")));
        }
    }
    let constants = match fit {
        VelocityFit::ThicknessOnly { v_lateral } => fit_thickness_velocity(points, v_lateral)?,
        VelocityFit::Both => fit_both_velocities(points)?,
    };
    let residuals_ghz = points.iter().map(|p| p.model(&constants) - p.frequency_ghz).collect();
    Ok(Calibration { constants, residuals_ghz })
}

fn fit_thickness_velocity(points: &[CalibrationPoint], v_lateral: f64) -> Result<AcousticConstants> {
    let usable: Vec<_> = points
        .iter()
        .filter(|p| p.frequency_ghz > v_lateral * p.lateral_coefficient())
        .collect();
    if usable.is_empty() {
        return Err(Error::Underdetermined { unknowns: 1, points: 0 });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for p in &usable {
        let a2 = p.thickness_coefficient().powi(2);
        let l = v_lateral * p.lateral_coefficient();
        num += a2 * (p.frequency_ghz.powi(2) - l * l);
        den += a2 * a2;
    }
    let mut v = (num / den).sqrt();
    for _ in 0..100 {
        let c = AcousticConstants::new(v, v_lateral)?;
        let (mut jr, mut jj) = (0.0, 0.0);
        for p in &usable {
            let f = p.model(&c);
            let a = p.thickness_coefficient();
            let j = a * a * v / f;
            jr += j * (f - p.frequency_ghz);
            jj += j * j;
        }
        let step = jr / jj;
        v -= step;
        if step.abs() <= 1e-14 * v {
            break;
        }
    }
    AcousticConstants::new(v, v_lateral)
}

fn fit_both_velocities(points: &[CalibrationPoint]) -> Result<AcousticConstants> {
    if points.len() < 2 {
        return Err(Error::Underdetermined { unknowns: 2, points: points.len() });
    }
    // f² = u·b² + w·a² with u = v_lateral², w = v_thickness²
    let (mut sbb, mut sba, mut saa, mut sbf, mut saf) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let a2 = p.thickness_coefficient().powi(2);
        let b2 = p.lateral_coefficient().powi(2);
        let f2 = p.frequency_ghz.powi(2);
        sbb += b2 * b2;
        sba += b2 * a2;
        saa += a2 * a2;
        sbf += b2 * f2;
        saf += a2 * f2;
    }
    let det = sbb * saa - sba * sba;
    if det.abs() <= 1e-10 * sbb * saa {
        return Err(Error::Underdetermined { unknowns: 2, points: points.len() });
    }
    let u = (saa * sbf - sba * saf) / det;
    let w = (sbb * saf - sba * sbf) / det;
    if !(u > 0.0 && w > 0.0) {
        return Err(Error::invalid("calibration points imply a non-positive squared velocity"));
    }
    let (mut vh, mut vl) = (w.sqrt(), u.sqrt());
    for _ in 0..100 {
        let c = AcousticConstants::new(vh, vl)?;
        // normal equations of the 2-parameter Gauss-Newton step
        let (mut j11, mut j12, mut j22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in points {
            let f = p.model(&c);
            let r = f - p.frequency_ghz;
            let jh = p.thickness_coefficient().powi(2) * vh / f;
            let jl = p.lateral_coefficient().powi(2) * vl / f;
            j11 += jh * jh;
            j12 += jh * jl;
            j22 += jl * jl;
            g1 += jh * r;
            g2 += jl * r;
        }
        let d = j11 * j22 - j12 * j12;
        if d.abs() <= f64::MIN_POSITIVE {
            break;
        }
        let dh = (j22 * g1 - j12 * g2) / d;
        let dl = (j11 * g2 - j12 * g1) / d;
        vh -= dh;
        vl -= dl;
        if !(vh > 0.0 && vl > 0.0) {
            return Err(Error::invalid("velocity calibration diverged"));
        }
        if dh.abs() <= 1e-14 * vh && dl.abs() <= 1e-14 * vl {
            break;
        }
    }
    AcousticConstants::new(vh, vl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub thickness_nm: f64,
    pub order: u32,
    pub frequency_ghz: f64,
}

/// Resonance versus total thickness for each order, on an evenly spaced
/// thickness grid.
pub fn dispersion_curve(
    constants: &AcousticConstants,
    orders: &[u32],
    lateral_wavelength_um: f64,
    thickness_range_nm: (f64, f64),
    n_points: usize,
) -> Result<Vec<DispersionPoint>> {
    let (lo, hi) = thickness_range_nm;
    if !(lo > 0.0 && hi > lo && n_points >= 2) {
        return Err(Error::invalid("dispersion grid needs 0 < start < stop and at least 2 points"));
    }
    let mut out = Vec::with_capacity(orders.len() * n_points);
    for &order in orders {
        let mode = ModeSpec::new(order, lateral_wavelength_um)?;
        for i in 0..n_points {
            let thickness_nm = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
            out.push(DispersionPoint {
                thickness_nm,
                order,
                frequency_ghz: frequency_at_thickness(thickness_nm, &mode, constants),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lithium_niobate() -> AcousticConstants {
        AcousticConstants::new(3498.0, 4000.0).unwrap()
    }

    fn mode(order: u32) -> ModeSpec {
        ModeSpec::new(order, 8.0).unwrap()
    }

    /// Bisection on the forward model; independent of the closed-form inverse.
    fn bisect_thickness(f: f64, mode: &ModeSpec, c: &AcousticConstants) -> f64 {
        let (mut lo, mut hi) = (1e-3_f64, 1e6_f64);
        for _ in 0..300 {
            let mid = (lo * hi).sqrt();
            if frequency_at_thickness(mid, mode, c) > f {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn shunt_stack_resonance() {
        let stack = LayerStack::periodically_poled(4, 110.0, lithium_niobate()).unwrap();
        let f = mode_frequency(&stack, &mode(12));
        assert!((f - 47.70).abs() < 0.01, "{f}");
        let lateral = lithium_niobate().lateral_term(8.0);
        assert!(f - 12.0 * 3498.0 / 880.0 < 0.01 && lateral == 0.5);
    }

    #[test]
    fn infinite_wavelength_drops_lateral_term() {
        let stack = LayerStack::periodically_poled(4, 110.0, lithium_niobate()).unwrap();
        let m = ModeSpec::new(12, f64::INFINITY).unwrap();
        assert_eq!(mode_frequency(&stack, &m), 12.0 * 3498.0 / (2.0 * 440.0));
        let s = frequency_sensitivity(&stack, &m);
        assert_relative_eq!(s, -mode_frequency(&stack, &m) / 440.0, max_relative = 1e-15);
    }

    #[test]
    fn single_layer_matches_four_layer_overtone() {
        let single = LayerStack::alternating(&[110.0], lithium_niobate()).unwrap();
        let quad = LayerStack::periodically_poled(4, 110.0, lithium_niobate()).unwrap();
        assert_relative_eq!(
            mode_frequency(&single, &mode(3)),
            mode_frequency(&quad, &mode(12)),
            max_relative = 1e-15
        );
    }

    #[test]
    fn thickness_inversion_against_bisection() {
        let c = AcousticConstants::new(3530.0, 4000.0).unwrap();
        let m = mode(3);
        let h = thickness_for_frequency(50.0, &m, &c).unwrap();
        let oracle = bisect_thickness(50.0, &m, &c);
        assert_relative_eq!(h, oracle, max_relative = 1e-10);
        assert!((105.0..=110.0).contains(&h), "{h}");
    }

    #[test]
    fn frequency_at_lateral_cutoff_is_infeasible() {
        let c = lithium_niobate();
        let cutoff = c.lateral_term(8.0);
        assert!(matches!(
            thickness_for_frequency(cutoff, &mode(12), &c),
            Err(Error::InfeasibleFrequency { .. })
        ));
    }

    #[test]
    fn calibration_from_table_rows() {
        let fit = VelocityFit::ThicknessOnly { v_lateral: 4000.0 };
        let shunt = CalibrationPoint { thickness_nm: 440.0, order: 12, lateral_wavelength_um: 8.0, frequency_ghz: 47.7 };
        let series = CalibrationPoint { thickness_nm: 427.0, order: 12, lateral_wavelength_um: 8.0, frequency_ghz: 49.6 };
        // closed form: v = 2h·sqrt(f² − (v_l/λ)²)/N
        let closed = |p: &CalibrationPoint| 2.0 * p.thickness_nm * (p.frequency_ghz.powi(2) - 0.25).sqrt() / 12.0;

        let c = calibrate_velocity(&[shunt], fit).unwrap();
        assert_relative_eq!(c.constants.v_thickness, closed(&shunt), max_relative = 1e-12);
        assert!((c.constants.v_thickness - 3498.0).abs() < 1.0);

        let c = calibrate_velocity(&[series], fit).unwrap();
        assert!((c.constants.v_thickness - 3530.0).abs() < 1.0);

        let c = calibrate_velocity(&[shunt, shunt], fit).unwrap();
        assert!(c.residuals_ghz.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn calibration_of_both_velocities() {
        let truth = AcousticConstants::new(3600.0, 4200.0).unwrap();
        let points: Vec<_> = [(200.0, 3, 1.0), (300.0, 5, 2.0), (440.0, 12, 0.5)]
            .iter()
            .map(|&(h, n, l)| CalibrationPoint {
                thickness_nm: h,
                order: n,
                lateral_wavelength_um: l,
                frequency_ghz: frequency_at_thickness(h, &ModeSpec::new(n, l).unwrap(), &truth),
            })
            .collect();
        let c = calibrate_velocity(&points, VelocityFit::Both).unwrap();
        assert_relative_eq!(c.constants.v_thickness, 3600.0, max_relative = 1e-9);
        assert_relative_eq!(c.constants.v_lateral, 4200.0, max_relative = 1e-9);
        assert!(matches!(
            calibrate_velocity(&points[..1], VelocityFit::Both),
            Err(Error::Underdetermined { unknowns: 2, points: 1 })
        ));
        assert!(matches!(
            calibrate_velocity(&[points[0], points[0]], VelocityFit::Both),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn sensitivity_values() {
        let c = lithium_niobate();
        let single = LayerStack::alternating(&[110.0], c).unwrap();
        let quad = LayerStack::periodically_poled(4, 110.0, c).unwrap();
        let s1 = frequency_sensitivity(&single, &mode(3));
        let s4 = frequency_sensitivity(&quad, &mode(12));
        assert!((s1 + 0.434).abs() < 0.01, "{s1}");
        assert!((s4 + 0.108).abs() < 0.005, "{s4}");
        assert_relative_eq!(s1 / s4, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn trim_depths() {
        let c = lithium_niobate();
        let quad = LayerStack::periodically_poled(4, 110.0, c).unwrap();
        let single = LayerStack::alternating(&[110.0], c).unwrap();
        let d4 = trim_depth_for_offset(&quad, &mode(12), 1.9, 0.0).unwrap();
        let d1 = trim_depth_for_offset(&single, &mode(3), 1.9, 0.0).unwrap();
        // oracle: bisection for the thickness that lands on f + Δf
        let target = mode_frequency(&quad, &mode(12)) + 1.9;
        assert_relative_eq!(d4, 440.0 - bisect_thickness(target, &mode(12), &c), max_relative = 1e-9);
        assert!((16.0..=17.0).contains(&d4), "{d4}");
        assert!((d1 - 4.0).abs() < 0.5, "{d1}");
        assert_eq!(trim_depth_for_offset(&quad, &mode(12), 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            trim_depth_for_offset(&quad, &mode(12), 40.0, 0.0),
            Err(Error::InfeasibleTrim { .. })
        ));
        assert!(trim_depth_for_offset(&quad, &mode(12), -1.0, 0.0).is_err());
    }

    #[test]
    fn electrode_offset_reproduces_chosen_trim() {
        let c = lithium_niobate();
        let quad = LayerStack::periodically_poled(4, 110.0, c).unwrap();
        let offset = electrode_offset_for_trim(&quad, &mode(12), 1.9, 13.0).unwrap();
        let depth = trim_depth_for_offset(&quad, &mode(12), 1.9, offset).unwrap();
        assert!((depth - 13.0).abs() < 1e-9);
        assert!(offset < 0.0);
    }

    #[test]
    fn overtone_parity_rule() {
        let c = lithium_niobate();
        let strong = |stack: &LayerStack, max| -> Vec<u32> {
            coupled_overtone_orders(stack, max)
                .unwrap()
                .into_iter()
                .filter(|o| o.class == CouplingClass::Strong)
                .map(|o| o.order)
                .collect()
        };
        let quad = LayerStack::periodically_poled(4, 110.0, c).unwrap();
        assert_eq!(strong(&quad, 20), vec![4, 12, 20]);
        let bi = LayerStack::periodically_poled(2, 110.0, c).unwrap();
        assert_eq!(strong(&bi, 10), vec![2, 6, 10]);
        let single = LayerStack::periodically_poled(1, 110.0, c).unwrap();
        assert_eq!(strong(&single, 7), vec![1, 3, 5, 7]);
        assert!(coupled_overtone_orders(&quad, 20)
            .unwrap()
            .iter()
            .all(|o| o.class != CouplingClass::PartiallyUnsuppressed));

        let trimmed = quad.trimmed(13.0).unwrap();
        let classes = coupled_overtone_orders(&trimmed, 14).unwrap();
        let partial: Vec<u32> = classes
            .iter()
            .filter(|o| o.class == CouplingClass::PartiallyUnsuppressed)
            .map(|o| o.order)
            .collect();
        assert_eq!(partial, vec![3, 5, 11, 13]);

        let same = LayerStack::new(
            vec![Layer::new(110.0, Poling::Up).unwrap(), Layer::new(110.0, Poling::Up).unwrap()],
            c,
        )
        .unwrap();
        assert!(matches!(coupled_overtone_orders(&same, 10), Err(Error::NotPeriodicallyPoled)));
    }

    #[test]
    fn invalid_inputs() {
        assert!(AcousticConstants::new(0.0, 4000.0).is_err());
        assert!(AcousticConstants::new(f64::NAN, 4000.0).is_err());
        assert_eq!(AcousticConstants::new(500.0, 4000.0).unwrap().warnings().len(), 1);
        assert!(lithium_niobate().warnings().is_empty());
        assert!(ModeSpec::new(0, 8.0).is_err());
        assert!(ModeSpec::new(3, 0.0).is_err());
        assert!(Layer::new(-1.0, Poling::Up).is_err());
        assert!(LayerStack::new(vec![], lithium_niobate()).is_err());
    }

    proptest! {
        #[test]
        fn inversion_round_trip(h in 20.0f64..2000.0, order in 1u32..30, lambda in 0.5f64..50.0) {
            let c = lithium_niobate();
            let m = ModeSpec::new(order, lambda).unwrap();
            let f = frequency_at_thickness(h, &m, &c);
            let back = thickness_for_frequency(f, &m, &c).unwrap();
            prop_assert!(((back - h) / h).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_thickness_and_order(h in 20.0f64..2000.0, order in 1u32..30, lambda in 0.5f64..50.0) {
            let c = lithium_niobate();
            let m = ModeSpec::new(order, lambda).unwrap();
            let up = ModeSpec::new(order + 1, lambda).unwrap();
            let f = frequency_at_thickness(h, &m, &c);
            prop_assert!(frequency_at_thickness(h * 1.001, &m, &c) < f);
            prop_assert!(frequency_at_thickness(h, &up, &c) > f);
        }

        #[test]
        fn geometric_scaling(h in 20.0f64..2000.0, order in 1u32..30, lambda in 0.5f64..50.0, s in 0.1f64..10.0) {
            let c = lithium_niobate();
            let f = frequency_at_thickness(h, &ModeSpec::new(order, lambda).unwrap(), &c);
            let fs = frequency_at_thickness(h * s, &ModeSpec::new(order, lambda * s).unwrap(), &c);
            prop_assert!((fs * s - f).abs() <= 1e-12 * f);
        }
    }
}
