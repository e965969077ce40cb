//! Command-line front end.
//!
//! Every subcommand reads a design configuration (the bundled reference
//! configuration when `--config` is absent), writes its artifacts into
//! `--out`, and prints a short summary. Exit status is 0 on success, 1 on
//! domain errors and 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{DesignConfig, Resolved};
use crate::error::{Error, Result};
use crate::export::{admittance_csv, dispersion_csv, filter_csv, metrics_json, to_json, tolerance_csv};
use crate::extraction::{fit_mbvd, initial_guess, AdmittanceRecord, FitOptions, FitResult};
use crate::ladder::simulate;
use crate::mbvd::{admittance_sweep, admittance_to_s11, characterize, synthesize_mbvd, CouplingConvention, MbvdParams, ResonatorSpec, ResonanceSummary};
use crate::metrics::{compare_to_soa, extract_metrics, FilterMetrics, SoaEntry};
use crate::optimizer::{optimize, DesignBounds, DesignVariables, Objective, OptimizerSettings, StartOutcome};
use crate::stack::{
    coupled_overtone_orders, dispersion_curve, electrode_offset_for_trim, frequency_sensitivity, mode_frequency,
    trim_depth_for_offset, AcousticConstants, CouplingClass,
};
use crate::stats::Summary;
use crate::tolerance::{required_thickness_margin, run_tolerance, ToleranceReport};
use crate::touchstone::{parse_touchstone, write_s1p, write_s2p};

#[derive(Debug, Parser)]
#[command(name = "xfl", version, about = "Overtone acoustic filter design toolkit", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Design configuration (JSON); the bundled reference design when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every randomized stage; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dispersion curves, stack resonances and trim planning.
    Stack(Common),
    /// Synthesize every configured resonator and sweep its admittance.
    Resonator(Common),
    /// Simulate the ladder; writes filter.s2p and metrics.json.
    Filter(Common),
    /// Extract mBVD parameters from admittance data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// One-port Touchstone (.s1p) or admittance CSV; synthesized from the
        /// configuration when omitted.
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
    },
    /// Tune static capacitances and the series/shunt offset for low loss.
    Optimize(Common),
    /// Monte Carlo thickness tolerance analysis.
    Tolerance(Common),
    /// Filter metrics against reported acoustic filters.
    Report(Common),
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match crate::parallel::install(|| dispatch(cli.command)) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Stack(c) => Session::open(&c)?.stack(),
        Command::Resonator(c) => Session::open(&c)?.resonator(),
        Command::Filter(c) => Session::open(&c)?.filter(),
        Command::Fit { common, data } => Session::open(&common)?.fit(data.as_deref()),
        Command::Optimize(c) => Session::open(&c)?.optimize(),
        Command::Tolerance(c) => Session::open(&c)?.tolerance(),
        Command::Report(c) => Session::open(&c)?.report(),
    }
}

struct Session {
    design: Resolved,
    seed: u64,
    out: PathBuf,
    log: String,
}

impl Session {
    fn open(common: &Common) -> Result<Self> {
        let config = match &common.config {
            Some(path) => DesignConfig::load(path)?,
            None => DesignConfig::bundled(),
        };
        let design = config.resolve()?;
        std::fs::create_dir_all(&common.out)?;
        Ok(Self { seed: common.seed.unwrap_or(config.seed), design, out: common.out.clone(), log: String::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        let _ = writeln!(self.log, "wrote {}", path.display());
        Ok(())
    }

    fn finish(self, body: String) -> String {
        body + &self.log
    }

    fn stack(mut self) -> Result<String> {
        let d = &self.design;
        let cfg = &d.config;
        let trim = &cfg.trim;
        let mut rows = Vec::new();
        let mut details = Vec::new();
        for (name, (stack, mode)) in &d.stacks {
            let layers: Vec<String> = stack.layers().iter().map(|l| format!("{}", l.thickness_nm)).collect();
            let margin = trim_depth_for_offset(stack, mode, trim.delta_f_ghz, trim.electrode_offset_nm);
            let offset = trim
                .target_trim_nm
                .and_then(|t| electrode_offset_for_trim(stack, mode, trim.delta_f_ghz, t).ok());
            let row = StackRow {
                name: name.clone(),
                layers_nm: layers.join("/"),
                total_thickness_nm: stack.total_thickness_nm(),
                order: mode.order,
                lateral_wavelength_um: mode.lateral_wavelength_um,
                frequency_ghz: mode_frequency(stack, mode),
                sensitivity_ghz_per_nm: frequency_sensitivity(stack, mode),
                trim_margin_nm: margin.as_ref().ok().copied(),
            };
            let max_order = (2 * mode.order).max(4);
            let coupling = coupled_overtone_orders(stack, max_order).ok().map(|c| {
                let pick = |class: CouplingClass| c.iter().filter(|o| o.class == class).map(|o| o.order).collect();
                CouplingOrders { strong: pick(CouplingClass::Strong), partial: pick(CouplingClass::PartiallyUnsuppressed) }
            });
            details.push(StackDetail {
                row: row.clone(),
                trim_error: margin.err().map(|e| e.to_string()),
                electrode_offset_for_target_nm: offset,
                coupling,
            });
            rows.push(row);
        }
        let dc = &cfg.dispersion;
        let curve = dispersion_curve(
            &d.material,
            &dc.orders,
            cfg.stacks.values().next().map_or(8.0, |s| s.lateral_wavelength_um),
            dc.thickness_range_nm,
            dc.n_points,
        )?;
        let report = StackReport {
            material: d.material,
            calibration_residuals_ghz: d.calibration.as_ref().map(|c| c.residuals_ghz.clone()),
            delta_f_ghz: trim.delta_f_ghz,
            electrode_offset_nm: trim.electrode_offset_nm,
            target_trim_nm: trim.target_trim_nm,
            stacks: details,
        };

        let mut table = String::new();
        let _ = writeln!(table, "v_thickness = {:.1} m/s, v_lateral = {:.1} m/s", d.material.v_thickness, d.material.v_lateral);
        let _ = writeln!(table, "{:<14} {:>22} {:>9} {:>3} {:>9} {:>10} {:>9}", "stack", "layers_nm", "h_nm", "N", "f_ghz", "df/dh", "trim_nm");
        for r in &rows {
            let trim = r.trim_margin_nm.map_or("-".to_string(), |m| format!("{m:.2}"));
            let _ = writeln!(
                table,
                "{:<14} {:>22} {:>9.1} {:>3} {:>9.3} {:>10.4} {:>9}",
                r.name, r.layers_nm, r.total_thickness_nm, r.order, r.frequency_ghz, r.sensitivity_ghz_per_nm, trim
            );
        }
        let mut csv = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            csv.serialize(r)?;
        }
        let csv = String::from_utf8(csv.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8");
        self.write("stack_table.csv", &csv)?;
        self.write("dispersion.csv", &dispersion_csv(&curve)?)?;
        self.write("stack.json", &to_json(&report)?)?;
        Ok(self.finish(table))
    }

    fn resonator(mut self) -> Result<String> {
        let freqs = self.design.config.sweep.frequencies();
        let z0 = self.design.config.ladder.z0_ohm;
        let mut summaries = BTreeMap::new();
        let mut body = String::new();
        for (name, spec) in self.design.resonators.clone() {
            let params = synthesize_mbvd(&spec)?;
            let y = admittance_sweep(&params, &freqs);
            let s11: Vec<_> = y.iter().map(|&v| admittance_to_s11(v, z0)).collect();
            let summary = characterize(&params, CouplingConvention::CapacitanceRatio);
            match &summary {
                Ok(s) => {
                    let _ = writeln!(body, "{name}: fs {:.4} GHz, fp {:.4} GHz, k2 {:.4} %, Q {:.2}", s.fs_ghz, s.fp_ghz, 100.0 * s.k2, s.q);
                }
                Err(e) => {
                    let _ = writeln!(body, "{name}: {e}");
                }
            }
            summaries.insert(
                name.clone(),
                ResonatorReport { spec, params, characterized: summary.as_ref().ok().copied(), error: summary.err().map(|e| e.to_string()) },
            );
            self.write(&format!("{name}.s1p"), &write_s1p(&freqs, &s11, z0))?;
            self.write(&format!("{name}_admittance.csv"), &admittance_csv(&freqs, &y)?)?;
        }
        self.write("resonator.json", &to_json(&summaries)?)?;
        Ok(self.finish(body))
    }

    fn filter(mut self) -> Result<String> {
        let design = self.design.filter()?;
        let sweep = simulate(&design, &self.design.config.sweep)?;
        let metrics = extract_metrics(&sweep, &self.design.config.spur_windows.windows())?;
        self.write("filter.s2p", &write_s2p(&sweep, design.z0_ohm))?;
        self.write("filter.csv", &filter_csv(&sweep)?)?;
        self.write("metrics.json", &metrics_json(&metrics)?)?;
        Ok(self.finish(describe_metrics(&metrics)))
    }

    fn fit(mut self, data: Option<&Path>) -> Result<String> {
        let fit_cfg = self.design.config.fit.clone();
        let (record, truth) = match data {
            Some(path) => (load_admittance(path)?, None),
            None => {
                let cfg = fit_cfg.as_ref().ok_or_else(|| Error::Config("fit needs --data or a fit section".into()))?;
                let spec = self.design.resonators[&cfg.resonator].clone();
                let (a, b) = cfg.span;
                let n = cfg.n_points.max(2);
                let freqs: Vec<f64> = (0..n).map(|i| spec.fs_ghz * (a + (b - a) * i as f64 / (n - 1) as f64)).collect();
                let clean = AdmittanceRecord::from_params(&synthesize_mbvd(&spec)?, freqs)?;
                let noisy = clean.with_noise(cfg.snr_db, self.seed)?;
                self.write("fit_data.csv", &admittance_csv(&noisy.frequencies_ghz, &noisy.y)?)?;
                (noisy, Some(spec))
            }
        };
        let n_spurs = fit_cfg.as_ref().map_or(0, |c| c.n_spurs);
        let options = FitOptions { seed: self.seed, ..fit_cfg.and_then(|c| c.options).unwrap_or_default() };
        let init = initial_guess(&record, n_spurs)?;
        let (result, failure) = match fit_mbvd(&record, &init, &options) {
            Ok(r) => (r, None),
            Err(Error::NotConverged(r)) => {
                let msg = format!("fit did not converge: residual {:.3e}", r.residual);
                (*r, Some(msg))
            }
            Err(e) => return Err(e),
        };
        let model = admittance_sweep(&result.params, &record.frequencies_ghz);
        self.write("fit_model.csv", &admittance_csv(&record.frequencies_ghz, &model)?)?;
        self.write("fit.json", &to_json(&FitReport { initial_guess: &init, truth: truth.as_ref(), result: &result })?)?;
        let s = &result.spec;
        let body = format!(
            "fs {:.4} GHz, k2 {:.4} %, Q {:.2}, C0 {:.3} fF, Rs {:.3} ohm, residual {:.3e}\n",
            s.fs_ghz,
            100.0 * s.k2,
            s.q,
            s.c0_ff,
            s.rs_ohm,
            result.residual
        );
        match failure {
            Some(msg) => {
                eprint!("{}", self.finish(body));
                Err(Error::invalid(msg))
            }
            None => Ok(self.finish(body)),
        }
    }

    fn optimize(mut self) -> Result<String> {
        let template = self.design.template()?;
        let cfg = self.design.config.optimizer.clone();
        let bounds = DesignBounds::around(&template, cfg.bounds_fraction)?;
        let settings = self.design.optimizer_settings(self.seed);
        let result = optimize(&template, &bounds, &cfg.objective, &self.design.config.sweep, &settings)?;
        let windows = self.design.config.spur_windows.windows();
        let metrics = extract_metrics(&result.sweep, &windows).ok();
        let report = OptimizeReport {
            settings,
            objective: cfg.objective,
            bounds,
            template: template.variables(),
            template_cost: result.template_cost,
            best: result.best,
            cost: result.cost,
            improved: result.improved,
            winner: result.winner,
            metrics: metrics.clone(),
            starts: result.starts.clone(),
            trace: result.trace.clone(),
        };
        self.write("optimize.json", &to_json(&report)?)?;
        self.write("optimized.s2p", &write_s2p(&result.sweep, result.design.z0_ohm))?;
        if let Some(m) = &metrics {
            self.write("optimized_metrics.json", &metrics_json(m)?)?;
        }
        let mut body = format!(
            "C0 series {:.3} fF, C0 shunt {:.3} fF, offset {:.4} GHz, cost {:.4} (template {:.4})\n",
            result.best.c0_series_ff, result.best.c0_shunt_ff, result.best.delta_f_ghz, result.cost, result.template_cost
        );
        if let Some(m) = &metrics {
            body.push_str(&describe_metrics(m));
        }
        Ok(self.finish(body))
    }

    fn tolerance(mut self) -> Result<String> {
        let scenarios = self.design.config.tolerance.clone();
        if scenarios.is_empty() {
            return Err(Error::Config("no tolerance scenarios configured".into()));
        }
        let delta_f = self.design.config.trim.delta_f_ghz;
        let mut owned = Vec::new();
        let mut body = String::new();
        for t in &scenarios {
            let scenario = self.design.tolerance_scenario(t, self.seed)?;
            let design = if t.with_filter { Some(self.design.tolerance_design()?) } else { None };
            let report = run_tolerance(&scenario, design.as_ref(), t.thresholds.as_ref())?;
            let margin = required_thickness_margin(&scenario.stack, &scenario.mode, delta_f).ok();
            let _ = write!(
                body,
                "{}: shift std {:.4} GHz (predicted {:.4}), margin for {delta_f} GHz: {}",
                t.name,
                report.shift.std,
                report.predicted_std_ghz,
                margin.map_or("-".into(), |m| format!("{m:.2} nm"))
            );
            if let Some(rate) = report.pass_rate {
                let _ = write!(body, ", pass rate {:.3}", rate);
            }
            body.push('\n');
            self.write(&format!("tolerance_{}.csv", t.name), &tolerance_csv(&report.trials)?)?;
            owned.push((t.name.as_str(), margin, report));
        }
        let reports: Vec<ScenarioReport> = owned
            .iter()
            .map(|(name, margin, report)| ScenarioReport { name, margin_nm: *margin, delta_f_ghz: delta_f, report: ReportView::from(report) })
            .collect();
        self.write("tolerance.json", &to_json(&reports)?)?;
        Ok(self.finish(body))
    }

    fn report(mut self) -> Result<String> {
        let design = self.design.filter()?;
        let sweep = simulate(&design, &self.design.config.sweep)?;
        let metrics = extract_metrics(&sweep, &self.design.config.spur_windows.windows())?;
        let rows = compare_to_soa(&metrics, "simulated");
        let mut body = describe_metrics(&metrics);
        let _ = writeln!(body, "{:<12} {:>8} {:>7} {:>7} {:>9}", "reference", "fc_ghz", "il_db", "fbw_%", "rej_db");
        for r in &rows {
            let rej = r.rejection_db.map_or("-".into(), |v| format!("{v:.1}"));
            let _ = writeln!(body, "{:<12} {:>8.2} {:>7.2} {:>7.2} {:>9}", r.reference, r.f_c_ghz, r.il_db, r.fbw_pct, rej);
        }
        let mut csv = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            csv.serialize(r)?;
        }
        let csv = String::from_utf8(csv.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8");
        self.write("report.csv", &csv)?;
        self.write("report.json", &to_json(&FullReport { metrics: &metrics, comparison: &rows })?)?;
        Ok(self.finish(body))
    }
}

fn describe_metrics(m: &FilterMetrics) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2} dB"));
    format!(
        "center {:.3} GHz, IL {:.3} dB, FBW {:.3} %, OoB {}, OoB excluding spurs {}\n",
        m.f_center_ghz,
        m.il_db,
        m.fbw_3db_pct,
        opt(m.oob_db),
        opt(m.oob_excl_spurs_db)
    )
}

fn load_admittance(path: &Path) -> Result<AdmittanceRecord> {
    let text = std::fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("csv") => crate::export::read_admittance_csv(&text),
        Some("s1p") => parse_touchstone(&text)?.to_admittance(),
        _ => Err(Error::UnsupportedFormat(format!("{}: expected .s1p or .csv", path.display()))),
    }
}

#[derive(Debug, Clone, Serialize)]
struct StackRow {
    name: String,
    layers_nm: String,
    total_thickness_nm: f64,
    order: u32,
    lateral_wavelength_um: f64,
    frequency_ghz: f64,
    sensitivity_ghz_per_nm: f64,
    trim_margin_nm: Option<f64>,
}

#[derive(Serialize)]
struct CouplingOrders {
    strong: Vec<u32>,
    partial: Vec<u32>,
}

#[derive(Serialize)]
struct StackDetail {
    #[serde(flatten)]
    row: StackRow,
    trim_error: Option<String>,
    electrode_offset_for_target_nm: Option<f64>,
    coupling: Option<CouplingOrders>,
}

#[derive(Serialize)]
struct StackReport {
    material: AcousticConstants,
    calibration_residuals_ghz: Option<Vec<f64>>,
    delta_f_ghz: f64,
    electrode_offset_nm: f64,
    target_trim_nm: Option<f64>,
    stacks: Vec<StackDetail>,
}

#[derive(Serialize)]
struct ResonatorReport {
    spec: ResonatorSpec,
    params: MbvdParams,
    characterized: Option<ResonanceSummary>,
    error: Option<String>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    initial_guess: &'a ResonatorSpec,
    truth: Option<&'a ResonatorSpec>,
    result: &'a FitResult,
}

#[derive(Serialize)]
struct OptimizeReport {
    settings: OptimizerSettings,
    objective: Objective,
    bounds: DesignBounds,
    template: DesignVariables,
    template_cost: f64,
    best: DesignVariables,
    cost: f64,
    improved: bool,
    winner: usize,
    metrics: Option<FilterMetrics>,
    starts: Vec<StartOutcome>,
    trace: Vec<f64>,
}

/// Tolerance report without the per-trial rows, which go to CSV.
#[derive(Serialize)]
struct ReportView<'a> {
    nominal_frequency_ghz: f64,
    sensitivity_ghz_per_nm: f64,
    predicted_std_ghz: f64,
    shift: &'a Summary,
    nominal_metrics: Option<&'a FilterMetrics>,
    il_db: Option<&'a Summary>,
    fbw_pct: Option<&'a Summary>,
    pass_rate: Option<f64>,
    n_trials: usize,
}

impl<'a> From<&'a ToleranceReport> for ReportView<'a> {
    fn from(r: &'a ToleranceReport) -> Self {
        Self {
            nominal_frequency_ghz: r.nominal_frequency_ghz,
            sensitivity_ghz_per_nm: r.sensitivity_ghz_per_nm,
            predicted_std_ghz: r.predicted_std_ghz,
            shift: &r.shift,
            nominal_metrics: r.nominal_metrics.as_ref(),
            il_db: r.il_db.as_ref(),
            fbw_pct: r.fbw_pct.as_ref(),
            pass_rate: r.pass_rate,
            n_trials: r.trials.len(),
        }
    }
}

#[derive(Serialize)]
struct ScenarioReport<'a> {
    name: &'a str,
    delta_f_ghz: f64,
    margin_nm: Option<f64>,
    report: ReportView<'a>,
}

#[derive(Serialize)]
struct FullReport<'a> {
    metrics: &'a FilterMetrics,
    comparison: &'a [SoaEntry],
}
