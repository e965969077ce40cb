//! Numerical tuning of a fixed ladder template.
//!
//! The decision variables are the static capacitance of the series and shunt
//! resonators and the frequency offset between them. Quality factors and
//! couplings stay at their template values. The shunt resonance is held fixed
//! and the series resonance (with any series spurs) moves with the offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{simulate, FilterDesign, LadderElement, Placement, SweepGrid, SweepResult};
use crate::mbvd::{synthesize_mbvd, ResonatorSpec};
use crate::metrics::{extract_metrics, FilterMetrics, SpurWindows};
use crate::simplex::{Bounds, NelderMead};

/// Cost assigned to designs whose response cannot be evaluated.
pub const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTemplate {
    pub series: ResonatorSpec,
    pub shunt: ResonatorSpec,
    pub topology: Vec<Placement>,
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
    /// Layout inductance added to every element (nH).
    #[serde(default)]
    pub parasitic_nh: f64,
}

fn default_z0() -> f64 {
    50.0
}

impl LadderTemplate {
    /// Series–shunt–series ladder.
    pub fn three_element(series: ResonatorSpec, shunt: ResonatorSpec) -> Self {
        Self {
            series,
            shunt,
            topology: vec![Placement::Series, Placement::Shunt, Placement::Series],
            z0_ohm: 50.0,
            parasitic_nh: 0.0,
        }
    }

    pub fn variables(&self) -> DesignVariables {
        DesignVariables {
            c0_series_ff: self.series.c0_ff,
            c0_shunt_ff: self.shunt.c0_ff,
            delta_f_ghz: self.series.fs_ghz - self.shunt.fs_ghz,
        }
    }

    /// Resonator specs with `vars` applied.
    pub fn specs(&self, vars: &DesignVariables) -> Result<(ResonatorSpec, ResonatorSpec)> {
        vars.validate()?;
        let mut series = self.series.clone();
        let mut shunt = self.shunt.clone();
        let shift = shunt.fs_ghz + vars.delta_f_ghz - series.fs_ghz;
        series.fs_ghz += shift;
        for spur in &mut series.spurs {
            spur.fs_ghz += shift;
        }
        series.c0_ff = vars.c0_series_ff;
        shunt.c0_ff = vars.c0_shunt_ff;
        series.validate()?;
        shunt.validate()?;
        Ok((series, shunt))
    }

    pub fn instantiate(&self, vars: &DesignVariables) -> Result<FilterDesign> {
        let (series, shunt) = self.specs(vars)?;
        self.build(&series, &shunt)
    }

    /// The template topology populated with the given resonators.
    pub fn build(&self, series: &ResonatorSpec, shunt: &ResonatorSpec) -> Result<FilterDesign> {
        if self.topology.is_empty() {
            return Err(Error::invalid("template topology is empty"));
        }
        let (series, shunt) = (synthesize_mbvd(series)?, synthesize_mbvd(shunt)?);
        let elements = self
            .topology
            .iter()
            .map(|p| {
                let resonator = match p {
                    Placement::Series => series.clone(),
                    Placement::Shunt => shunt.clone(),
                };
                LadderElement { placement: *p, resonator, parasitic_nh: self.parasitic_nh }
            })
            .collect();
        FilterDesign::new(elements, self.z0_ohm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVariables {
    pub c0_series_ff: f64,
    pub c0_shunt_ff: f64,
    /// Series minus shunt resonance (GHz).
    pub delta_f_ghz: f64,
}

impl DesignVariables {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0_series_ff > 0.0 && self.c0_shunt_ff > 0.0) {
            return Err(Error::invalid("static capacitances must be positive"));
        }
        if !(self.delta_f_ghz > 0.0) {
            return Err(Error::invalid(format!("frequency offset must be positive, got {}", self.delta_f_ghz)));
        }
        Ok(())
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.c0_series_ff, self.c0_shunt_ff, self.delta_f_ghz]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self { c0_series_ff: x[0], c0_shunt_ff: x[1], delta_f_ghz: x[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignBounds {
    pub lower: DesignVariables,
    pub upper: DesignVariables,
}

impl DesignBounds {
    pub fn new(lower: DesignVariables, upper: DesignVariables) -> Result<Self> {
        let bounds = Self { lower, upper };
        bounds.validate()?;
        Ok(bounds)
    }

    /// Box of ±`fraction` around `center` in every variable.
    pub fn relative(center: &DesignVariables, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid(format!("relative bound must lie in [0, 1), got {fraction}")));
        }
        let scale = |v: &DesignVariables, s: f64| DesignVariables {
            c0_series_ff: v.c0_series_ff * s,
            c0_shunt_ff: v.c0_shunt_ff * s,
            delta_f_ghz: v.delta_f_ghz * s,
        };
        Self::new(scale(center, 1.0 - fraction), scale(center, 1.0 + fraction))
    }

    pub fn around(template: &LadderTemplate, fraction: f64) -> Result<Self> {
        Self::relative(&template.variables(), fraction)
    }

    pub fn validate(&self) -> Result<()> {
        self.lower.validate()?;
        let (l, u) = (self.lower.to_vec(), self.upper.to_vec());
        if l.iter().zip(&u).any(|(a, b)| !(a <= b)) {
            return Err(Error::invalid("lower design bound exceeds upper bound"));
        }
        Ok(())
    }

    pub fn contains(&self, vars: &DesignVariables) -> bool {
        let (l, u, x) = (self.lower.to_vec(), self.upper.to_vec(), vars.to_vec());
        x.iter().zip(l.iter().zip(&u)).all(|(v, (a, b))| a <= v && v <= b)
    }

    fn denormalize(&self, t: &[f64]) -> DesignVariables {
        let (l, u) = (self.lower.to_vec(), self.upper.to_vec());
        DesignVariables::from_slice(&(0..3).map(|i| l[i] + t[i] * (u[i] - l[i])).collect::<Vec<_>>())
    }

    fn normalize(&self, vars: &DesignVariables) -> Vec<f64> {
        let (l, u, x) = (self.lower.to_vec(), self.upper.to_vec(), vars.to_vec());
        (0..3)
            .map(|i| if u[i] > l[i] { ((x[i] - l[i]) / (u[i] - l[i])).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    fn unit_box(&self) -> Bounds {
        let (l, u) = (self.lower.to_vec(), self.upper.to_vec());
        Bounds::new(vec![0.0; 3], (0..3).map(|i| if u[i] > l[i] { 1.0 } else { 0.0 }).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Objective {
    pub target_fbw_pct: f64,
    pub il_weight: f64,
    /// Cost per percentage point of bandwidth deviation.
    pub fbw_weight: f64,
    pub ripple_weight: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self { target_fbw_pct: 3.3, il_weight: 1.0, fbw_weight: 2.0, ripple_weight: 0.5 }
    }
}

impl Objective {
    pub fn il_only() -> Self {
        Self { il_weight: 1.0, fbw_weight: 0.0, ripple_weight: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.il_weight, self.fbw_weight, self.ripple_weight];
        if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || w.iter().all(|x| *x == 0.0) {
            return Err(Error::invalid("objective weights must be non-negative with at least one positive"));
        }
        if !(self.target_fbw_pct.is_finite() && self.target_fbw_pct >= 0.0) {
            return Err(Error::invalid("target bandwidth must be non-negative"));
        }
        Ok(())
    }
}

/// In-band max minus min of |S21| in dB.
pub fn passband_ripple_db(sweep: &SweepResult, metrics: &FilterMetrics) -> f64 {
    let (lo, hi) = metrics.band_edges_ghz;
    let (min, max) = sweep
        .frequencies_ghz
        .iter()
        .zip(sweep.s21_db())
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, d)| (a.min(d), b.max(d)));
    if max >= min {
        max - min
    } else {
        0.0
    }
}

/// Cost of an already simulated response.
pub fn response_cost(sweep: &SweepResult, obj: &Objective) -> (f64, Option<FilterMetrics>) {
    match extract_metrics(sweep, &SpurWindows::None) {
        Ok(m) => {
            let cost = obj.il_weight * m.il_db
                + obj.fbw_weight * (m.fbw_3db_pct - obj.target_fbw_pct).abs()
                + obj.ripple_weight * passband_ripple_db(sweep, &m);
            if cost.is_finite() {
                (cost, Some(m))
            } else {
                (PENALTY, None)
            }
        }
        Err(_) => (PENALTY, None),
    }
}

pub fn design_cost(design: &FilterDesign, grid: &SweepGrid, obj: &Objective) -> f64 {
    simulate(design, grid).map(|s| response_cost(&s, obj).0).unwrap_or(PENALTY)
}

/// Scalar cost of `vars` applied to `template`; never fails.
pub fn evaluate_design(vars: &DesignVariables, template: &LadderTemplate, grid: &SweepGrid, obj: &Objective) -> f64 {
    template
        .instantiate(vars)
        .map(|design| design_cost(&design, grid, obj))
        .unwrap_or(PENALTY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub starts: usize,
    pub seed: u64,
    /// Objective evaluations per start.
    pub max_evals: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { starts: 16, seed: 0, max_evals: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub index: usize,
    pub initial: DesignVariables,
    pub initial_cost: f64,
    pub best: DesignVariables,
    pub cost: f64,
    pub evals: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimization {
    pub best: DesignVariables,
    pub cost: f64,
    /// Cost of the template point itself (clamped into the bounds).
    pub template_cost: f64,
    /// Best-so-far cost over all starts, in start order; never increases.
    pub trace: Vec<f64>,
    pub starts: Vec<StartOutcome>,
    pub winner: usize,
    pub improved: bool,
    pub design: FilterDesign,
    pub sweep: SweepResult,
    pub metrics: Option<FilterMetrics>,
}

/// Start points: the template first, then uniform draws from the box, each
/// from its own generator seeded with `seed + index`.
pub fn start_points(template: &LadderTemplate, bounds: &DesignBounds, settings: &OptimizerSettings) -> Vec<Vec<f64>> {
    let unit = bounds.unit_box();
    (0..settings.starts.max(1))
        .map(|i| {
            if i == 0 {
                bounds.normalize(&template.variables())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(i as u64));
                unit.upper.iter().map(|&u| if u > 0.0 { rng.gen::<f64>() } else { 0.0 }).collect()
            }
        })
        .collect()
}

/// Multi-start bounded simplex search. Starts run concurrently; the winner
/// is the lowest cost with ties going to the lower start index.
pub fn optimize(
    template: &LadderTemplate,
    bounds: &DesignBounds,
    obj: &Objective,
    grid: &SweepGrid,
    settings: &OptimizerSettings,
) -> Result<Optimization> {
    bounds.validate()?;
    obj.validate()?;
    grid.validate()?;
    if template.topology.is_empty() {
        return Err(Error::invalid("template topology is empty"));
    }
    let unit = bounds.unit_box();
    let simplex = NelderMead { max_evals: settings.max_evals, f_tol: 1e-9, x_tol: 1e-7, initial_step: 0.1, restarts: 1 };
    let cost_at = |t: &[f64]| evaluate_design(&bounds.denormalize(t), template, grid, obj);

    let outcomes: Vec<(StartOutcome, Vec<f64>)> = start_points(template, bounds, settings)
        .into_par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let r = simplex.minimize(cost_at, &x0, Some(&unit));
            let outcome = StartOutcome {
                index,
                initial: bounds.denormalize(&x0),
                initial_cost: r.trace[0],
                best: bounds.denormalize(&r.x),
                cost: r.value,
                evals: r.evals,
                iterations: r.iterations,
            };
            (outcome, r.trace)
        })
        .collect();

    let mut trace = Vec::new();
    let mut running = f64::INFINITY;
    for (_, t) in &outcomes {
        for &v in t {
            running = running.min(v);
            trace.push(running);
        }
    }
    let starts: Vec<StartOutcome> = outcomes.into_iter().map(|(o, _)| o).collect();
    let winner = starts
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.index.cmp(&b.index)))
        .map(|o| o.index)
        .expect("at least one start");
    let best = starts[winner].best;
    let template_cost = starts[0].initial_cost;
    let design = template.instantiate(&best)?;
    let sweep = simulate(&design, grid)?;
    let (cost, metrics) = response_cost(&sweep, obj);
    Ok(Optimization {
        best,
        cost,
        template_cost,
        trace,
        improved: cost < template_cost,
        starts,
        winner,
        design,
        sweep,
        metrics,
    })
}
