//! Monte Carlo propagation of film thickness errors.
//!
//! Each trial draws a thickness deviation, moves the resonance through the
//! dispersion relation (to first order or exactly), and, when a filter is
//! attached, resimulates it and checks the result against pass thresholds.
//! Trial `i` draws from a generator seeded with `seed + i`, so reports do not
//! depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{simulate, SweepGrid};
use crate::mbvd::ResonatorSpec;
use crate::metrics::{extract_metrics, FilterMetrics, SpurWindows};
use crate::optimizer::LadderTemplate;
use crate::stack::{frequency_at_thickness, frequency_sensitivity, mode_frequency, trim_depth_for_offset, LayerStack, ModeSpec};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Normal,
    /// Uniform with the same standard deviation, i.e. half-width `σ·√3`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// One deviation shared by every resonator on the die.
    #[default]
    Correlated,
    /// Series and shunt resonators deviate independently.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// `Δf = df/dh · Δh`.
    FirstOrder,
    /// Re-evaluate the dispersion relation at `h + Δh`.
    #[default]
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceScenario {
    pub stack: LayerStack,
    pub mode: ModeSpec,
    pub sigma_h_nm: f64,
    #[serde(default)]
    pub distribution: Distribution,
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default)]
    pub propagation: Propagation,
}

impl ToleranceScenario {
    pub fn new(stack: LayerStack, mode: ModeSpec, sigma_h_nm: f64, n_trials: usize, seed: u64) -> Result<Self> {
        let s = Self {
            stack,
            mode,
            sigma_h_nm,
            distribution: Distribution::Normal,
            n_trials,
            seed,
            correlation: Correlation::Correlated,
            propagation: Propagation::Exact,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_h_nm >= 0.0 && self.sigma_h_nm.is_finite()) {
            return Err(Error::invalid(format!("thickness sigma must be non-negative, got {}", self.sigma_h_nm)));
        }
        if self.sigma_h_nm > 0.1 * self.stack.total_thickness_nm() {
            return Err(Error::invalid("thickness sigma must stay below 10% of the stack thickness"));
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.sigma_h_nm == 0.0 {
            return 0.0;
        }
        match self.distribution {
            Distribution::Normal => Normal::new(0.0, self.sigma_h_nm).expect("validated sigma").sample(rng),
            Distribution::Uniform => {
                let half = self.sigma_h_nm * 3f64.sqrt();
                rng.gen_range(-half..=half)
            }
        }
    }

    fn shift(&self, stack: &LayerStack, mode: &ModeSpec, dh_nm: f64) -> f64 {
        match self.propagation {
            Propagation::FirstOrder => frequency_sensitivity(stack, mode) * dh_nm,
            Propagation::Exact => {
                let h = stack.total_thickness_nm();
                frequency_at_thickness(h + dh_nm, mode, stack.material()) - mode_frequency(stack, mode)
            }
        }
    }
}

/// Film that sets one resonator's frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorFilm {
    pub stack: LayerStack,
    pub mode: ModeSpec,
}

/// A ladder whose resonators move with their films.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceDesign {
    pub template: LadderTemplate,
    pub series_film: ResonatorFilm,
    pub shunt_film: ResonatorFilm,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub max_il_db: f64,
    /// Allowed relative deviation of the fractional bandwidth from nominal.
    pub fbw_relative_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { max_il_db: 3.0, fbw_relative_tolerance: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub dh_nm: f64,
    pub dh_shunt_nm: f64,
    pub shift_ghz: f64,
    pub fs_series_ghz: Option<f64>,
    pub fs_shunt_ghz: Option<f64>,
    pub il_db: Option<f64>,
    pub fbw_pct: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub nominal_frequency_ghz: f64,
    pub sensitivity_ghz_per_nm: f64,
    /// `σ·|df/dh|`.
    pub predicted_std_ghz: f64,
    pub shift: Summary,
    pub nominal_metrics: Option<FilterMetrics>,
    pub il_db: Option<Summary>,
    pub fbw_pct: Option<Summary>,
    pub pass_rate: Option<f64>,
    pub trials: Vec<TrialRecord>,
}

fn shifted(spec: &ResonatorSpec, delta_ghz: f64) -> ResonatorSpec {
    let mut s = spec.clone();
    s.fs_ghz += delta_ghz;
    for spur in &mut s.spurs {
        spur.fs_ghz += delta_ghz;
    }
    s
}

fn filter_metrics(design: &ToleranceDesign, d_series: f64, d_shunt: f64) -> Option<FilterMetrics> {
    let series = shifted(&design.template.series, d_series);
    let shunt = shifted(&design.template.shunt, d_shunt);
    let filter = design.template.build(&series, &shunt).ok()?;
    let sweep = simulate(&filter, &design.grid).ok()?;
    extract_metrics(&sweep, &SpurWindows::None).ok()
}

pub fn run_tolerance(
    scenario: &ToleranceScenario,
    design: Option<&ToleranceDesign>,
    thresholds: Option<&Thresholds>,
) -> Result<ToleranceReport> {
    scenario.validate()?;
    if let Some(d) = design {
        d.grid.validate()?;
        d.template.build(&d.template.series, &d.template.shunt)?;
    }
    let thresholds = thresholds.copied().unwrap_or_default();
    let nominal_metrics = design.and_then(|d| filter_metrics(d, 0.0, 0.0));

    let trials: Vec<TrialRecord> = (0..scenario.n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_add(trial as u64));
            let dh_nm = scenario.draw(&mut rng);
            let dh_shunt_nm = match scenario.correlation {
                Correlation::Correlated => dh_nm,
                Correlation::Independent => scenario.draw(&mut rng),
            };
            let shift_ghz = scenario.shift(&scenario.stack, &scenario.mode, dh_nm);
            let mut record = TrialRecord {
                trial,
                dh_nm,
                dh_shunt_nm,
                shift_ghz,
                fs_series_ghz: None,
                fs_shunt_ghz: None,
                il_db: None,
                fbw_pct: None,
                pass: None,
            };
            if let Some(d) = design {
                let ds = scenario.shift(&d.series_film.stack, &d.series_film.mode, dh_nm);
                let dp = scenario.shift(&d.shunt_film.stack, &d.shunt_film.mode, dh_shunt_nm);
                record.fs_series_ghz = Some(d.template.series.fs_ghz + ds);
                record.fs_shunt_ghz = Some(d.template.shunt.fs_ghz + dp);
                let metrics = filter_metrics(d, ds, dp);
                record.il_db = metrics.as_ref().map(|m| m.il_db);
                record.fbw_pct = metrics.as_ref().map(|m| m.fbw_3db_pct);
                record.pass = Some(match &metrics {
                    None => false,
                    Some(m) => {
                        let fbw_ok = nominal_metrics.as_ref().is_none_or(|n| {
                            (m.fbw_3db_pct - n.fbw_3db_pct).abs() <= thresholds.fbw_relative_tolerance * n.fbw_3db_pct
                        });
                        m.il_db <= thresholds.max_il_db && fbw_ok
                    }
                });
            }
            record
        })
        .collect();

    let shifts: Vec<f64> = trials.iter().map(|t| t.shift_ghz).collect();
    let il: Vec<f64> = trials.iter().filter_map(|t| t.il_db).collect();
    let fbw: Vec<f64> = trials.iter().filter_map(|t| t.fbw_pct).collect();
    let pass_rate = design.map(|_| {
        trials.iter().filter(|t| t.pass == Some(true)).count() as f64 / trials.len() as f64
    });
    let sensitivity = frequency_sensitivity(&scenario.stack, &scenario.mode);
    Ok(ToleranceReport {
        nominal_frequency_ghz: mode_frequency(&scenario.stack, &scenario.mode),
        sensitivity_ghz_per_nm: sensitivity,
        predicted_std_ghz: scenario.sigma_h_nm * sensitivity.abs(),
        shift: Summary::of(&shifts).expect("at least one trial"),
        nominal_metrics,
        il_db: Summary::of(&il),
        fbw_pct: Summary::of(&fbw),
        pass_rate,
        trials,
    })
}

/// Thickness change that moves `mode` by `delta_f_budget_ghz`, from exact
/// inversion of the dispersion relation.
pub fn required_thickness_margin(stack: &LayerStack, mode: &ModeSpec, delta_f_budget_ghz: f64) -> Result<f64> {
    trim_depth_for_offset(stack, mode, delta_f_budget_ghz, 0.0)
}
