//! Filter figures of merit from a transmission sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::SweepResult;

/// Pass/reject bookkeeping for one extracted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMetrics {
    pub f_center_ghz: f64,
    pub il_db: f64,
    pub fbw_3db_pct: f64,
    /// Minimum attenuation outside the rejection guard band; `None` when the
    /// sweep has no points there.
    pub oob_db: Option<f64>,
    pub oob_excl_spurs_db: Option<f64>,
    pub band_edges_ghz: (f64, f64),
    pub spur_windows_ghz: Vec<(f64, f64)>,
    /// Grid points between the 3-dB edges.
    pub in_band_points: usize,
    /// Best in-band return loss, informational only.
    pub in_band_s11_min_db: f64,
}

impl FilterMetrics {
    pub fn bandwidth_ghz(&self) -> f64 {
        self.band_edges_ghz.1 - self.band_edges_ghz.0
    }

    /// At least 50 grid points inside the passband.
    pub fn is_resolved(&self) -> bool {
        self.in_band_points >= 50
    }
}

/// How spur windows are chosen for the spur-excluded rejection figure.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SpurWindows {
    /// No windows; both rejection figures coincide.
    #[default]
    None,
    /// Caller-declared windows (GHz).
    Declared(Vec<(f64, f64)>),
    /// Runs of out-of-band points more than 6 dB above the median
    /// out-of-band level.
    Auto,
}

/// Level above the median stopband transmission that marks a spur.
pub const AUTO_SPUR_THRESHOLD_DB: f64 = 6.0;

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Frequency where the segment (f0, y0)–(f1, y1) crosses `level`.
fn crossing(f0: f64, y0: f64, f1: f64, y1: f64, level: f64) -> f64 {
    f0 + (level - y0) * (f1 - f0) / (y1 - y0)
}

pub fn extract_metrics(sweep: &SweepResult, spur_windows: &SpurWindows) -> Result<FilterMetrics> {
    sweep.validate()?;
    let n = sweep.len();
    if n < 3 {
        return Err(Error::invalid("metric extraction needs at least 3 sweep points"));
    }
    let f = &sweep.frequencies_ghz;
    let s21: Vec<f64> = sweep.s21.iter().map(|s| db(s.norm())).collect();
    let peak = (0..n)
        .max_by(|&a, &b| s21[a].total_cmp(&s21[b]).then(b.cmp(&a)))
        .expect("non-empty sweep");
    let peak_db = s21[peak];
    let level = peak_db - 3.0;

    if peak == 0 || peak == n - 1 {
        let min = s21.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(if min > level {
            Error::BandNotResolved { side: if peak == 0 { "lower" } else { "upper" } }
        } else {
            Error::NoPassband
        });
    }

    let lo = (0..peak).rev().find(|&i| s21[i] <= level).ok_or(Error::BandNotResolved { side: "lower" })?;
    let hi = (peak + 1..n).find(|&i| s21[i] <= level).ok_or(Error::BandNotResolved { side: "upper" })?;
    let f_lo = crossing(f[lo], s21[lo], f[lo + 1], s21[lo + 1], level);
    let f_hi = crossing(f[hi - 1], s21[hi - 1], f[hi], s21[hi], level);
    let f_center = 0.5 * (f_lo + f_hi);
    let bw = f_hi - f_lo;

    let in_band: Vec<usize> = (0..n).filter(|&i| f[i] >= f_lo && f[i] <= f_hi).collect();
    let in_band_s11_min_db = in_band
        .iter()
        .map(|&i| db(sweep.s11[i].norm()))
        .fold(f64::INFINITY, f64::min);

    let stopband: Vec<usize> = (0..n).filter(|&i| f[i] < f_lo - bw || f[i] > f_hi + bw).collect();
    let windows = match spur_windows {
        SpurWindows::None => Vec::new(),
        SpurWindows::Declared(w) => w.clone(),
        SpurWindows::Auto => propose_spur_windows(f, &s21, &stopband),
    };
    let worst = |idx: &mut dyn Iterator<Item = usize>| idx.map(|i| -s21[i]).reduce(f64::min);
    let oob = worst(&mut stopband.iter().copied());
    let oob_excl = worst(
        &mut stopband
            .iter()
            .copied()
            .filter(|&i| !windows.iter().any(|&(a, b)| f[i] >= a && f[i] <= b)),
    );

    Ok(FilterMetrics {
        f_center_ghz: f_center,
        il_db: -peak_db,
        fbw_3db_pct: 100.0 * bw / f_center,
        oob_db: oob,
        oob_excl_spurs_db: oob_excl,
        band_edges_ghz: (f_lo, f_hi),
        spur_windows_ghz: windows,
        in_band_points: in_band.len(),
        in_band_s11_min_db,
    })
}

/// Contiguous stopband runs that rise more than [`AUTO_SPUR_THRESHOLD_DB`]
/// above the median stopband level and contain a local maximum.
pub fn propose_spur_windows(f: &[f64], s21_db: &[f64], stopband: &[usize]) -> Vec<(f64, f64)> {
    if stopband.is_empty() {
        return Vec::new();
    }
    let mut levels: Vec<f64> = stopband.iter().map(|&i| s21_db[i]).collect();
    levels.sort_by(f64::total_cmp);
    let median = levels[levels.len() / 2];
    let threshold = median + AUTO_SPUR_THRESHOLD_DB;

    let mut windows = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let flush = |run: Option<(usize, usize)>, windows: &mut Vec<(f64, f64)>| {
        if let Some((a, b)) = run {
            let has_peak = (a..=b).any(|i| {
                i > 0 && i + 1 < s21_db.len() && s21_db[i] >= s21_db[i - 1] && s21_db[i] >= s21_db[i + 1]
            });
            if has_peak {
                windows.push((f[a], f[b]));
            }
        }
    };
    for (k, &i) in stopband.iter().enumerate() {
        let contiguous = k > 0 && stopband[k - 1] + 1 == i;
        if s21_db[i] > threshold {
            run = match run {
                Some((a, _)) if contiguous => Some((a, i)),
                prev => {
                    flush(prev, &mut windows);
                    Some((i, i))
                }
            };
        } else {
            flush(run.take(), &mut windows);
        }
    }
    flush(run, &mut windows);
    windows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoaEntry {
    pub reference: String,
    pub f_c_ghz: f64,
    pub il_db: f64,
    pub fbw_pct: f64,
    pub rejection_db: Option<f64>,
}

/// Reported acoustic filters above 10 GHz (reference data only).
pub fn soa_dataset() -> Vec<SoaEntry> {
    [
        ("Giribaldi 2024", 9.96, 0.76, 5.7, 3.8),
        ("Izhar 2025", 17.4, 3.3, 3.4, 16.6),
        ("Gao 2020", 19.0, 8.0, 2.4, 13.0),
        ("Barrera 2023", 23.5, 2.4, 18.2, 13.0),
        ("Cho 2024", 23.8, 1.5, 19.4, 12.1),
        ("Barrera 2024", 38.7, 5.6, 17.6, 15.8),
        ("4-layer P3F (measured)", 50.1, 3.3, 2.9, 15.2),
    ]
    .into_iter()
    .map(|(reference, f_c_ghz, il_db, fbw_pct, rej)| SoaEntry {
        reference: reference.to_string(),
        f_c_ghz,
        il_db,
        fbw_pct,
        rejection_db: Some(rej),
    })
    .collect()
}

/// The bundled dataset plus `metrics` (labelled `label`), ordered by center
/// frequency with ties broken by insertion loss.
pub fn compare_to_soa(metrics: &FilterMetrics, label: &str) -> Vec<SoaEntry> {
    let mut rows = soa_dataset();
    rows.push(SoaEntry {
        reference: label.to_string(),
        f_c_ghz: metrics.f_center_ghz,
        il_db: metrics.il_db,
        fbw_pct: metrics.fbw_3db_pct,
        rejection_db: metrics.oob_excl_spurs_db,
    });
    rows.sort_by(|a, b| a.f_c_ghz.total_cmp(&b.f_c_ghz).then(a.il_db.total_cmp(&b.il_db)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// |S21| from a dB curve, with zero reflection.
    fn sweep_from_db(f: Vec<f64>, curve: impl Fn(f64) -> f64) -> SweepResult {
        let s21: Vec<Complex64> = f.iter().map(|&x| Complex64::new(10f64.powf(curve(x) / 20.0), 0.0)).collect();
        let zero = vec![Complex64::new(0.0, 0.0); f.len()];
        SweepResult { frequencies_ghz: f, s11: zero.clone(), s21: s21.clone(), s12: s21, s22: zero }
    }

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    /// Gaussian |S21| peaking at `peak_db` with a 3-dB full width `width`:
    /// 20·log10(e)·(w/2)²/(2σ²) = 3 dB.
    fn gaussian(center: f64, width: f64, peak_db: f64) -> impl Fn(f64) -> f64 {
        let sigma2 = 20.0 * std::f64::consts::E.log10() * (width / 2.0).powi(2) / 6.0;
        move |x| peak_db - 20.0 * std::f64::consts::E.log10() * (x - center).powi(2) / (2.0 * sigma2)
    }

    #[test]
    fn through_line_has_no_band() {
        let s = sweep_from_db(grid(40.0, 60.0, 101), |_| 0.0);
        assert!(matches!(extract_metrics(&s, &SpurWindows::None), Err(Error::BandNotResolved { .. })));
    }

    #[test]
    fn gaussian_band() {
        let s = sweep_from_db(grid(40.0, 60.0, 20001), gaussian(50.0, 1.5, -1.0));
        let m = extract_metrics(&s, &SpurWindows::None).unwrap();
        assert!((m.il_db - 1.0).abs() < 1e-9);
        assert!((m.f_center_ghz - 50.0).abs() < 1e-6);
        assert!((m.fbw_3db_pct - 3.0).abs() < 1e-4, "{}", m.fbw_3db_pct);
        assert!(m.is_resolved());
        assert_eq!(m.oob_db, m.oob_excl_spurs_db);
    }

    #[test]
    fn edge_peaks() {
        let rising = sweep_from_db(grid(40.0, 60.0, 201), |x| -(60.0 - x));
        assert!(matches!(extract_metrics(&rising, &SpurWindows::None), Err(Error::NoPassband)));
        let half = sweep_from_db(grid(49.8, 60.0, 2001), gaussian(50.0, 1.5, -1.0));
        assert!(matches!(
            extract_metrics(&half, &SpurWindows::None),
            Err(Error::BandNotResolved { side: "lower" })
        ));
    }

    #[test]
    fn spur_windows_exclude_tones() {
        let base = gaussian(50.0, 1.5, -1.0);
        let curve = |x: f64| {
            // the guard band edge sits 27 dB below the peak, so a -20 dB floor sets the rejection
            let spur = if (x - 45.5).abs() < 0.1 { 15.0 } else { 0.0 };
            base(x).max(-20.0) + spur
        };
        let s = sweep_from_db(grid(40.0, 60.0, 4001), curve);
        let plain = extract_metrics(&s, &SpurWindows::None).unwrap();
        assert!((plain.oob_db.unwrap() - 5.0).abs() < 1e-9);
        let declared = extract_metrics(&s, &SpurWindows::Declared(vec![(45.3, 45.7)])).unwrap();
        assert!((declared.oob_excl_spurs_db.unwrap() - 20.0).abs() < 1e-9);
        let auto = extract_metrics(&s, &SpurWindows::Auto).unwrap();
        assert_eq!(auto.spur_windows_ghz.len(), 1);
        let (a, b) = auto.spur_windows_ghz[0];
        assert!(a > 45.35 && b < 45.65);
        assert!((auto.oob_excl_spurs_db.unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn soa_ranking() {
        let m = |fc, il| FilterMetrics {
            f_center_ghz: fc,
            il_db: il,
            fbw_3db_pct: 3.0,
            oob_db: None,
            oob_excl_spurs_db: None,
            band_edges_ghz: (fc - 0.5, fc + 0.5),
            spur_windows_ghz: vec![],
            in_band_points: 100,
            in_band_s11_min_db: -20.0,
        };
        let table = compare_to_soa(&m(49.3, 1.7), "simulated");
        assert_eq!(table.last().unwrap().reference, "4-layer P3F (measured)");
        assert_eq!(table.len(), 8);
        assert_eq!(compare_to_soa(&m(5.0, 1.0), "low")[0].reference, "low");
        let tie = compare_to_soa(&m(50.1, 1.0), "tie");
        let n = tie.len();
        assert_eq!(tie[n - 2].reference, "tie");
        assert_eq!(tie[n - 1].reference, "4-layer P3F (measured)");
    }

    proptest! {
        #[test]
        fn frequency_shift_moves_edges(delta in -5.0f64..5.0) {
            let base = sweep_from_db(grid(40.0, 60.0, 2001), gaussian(50.0, 1.5, -2.0));
            let mut shifted = base.clone();
            shifted.frequencies_ghz.iter_mut().for_each(|f| *f += delta);
            let a = extract_metrics(&base, &SpurWindows::None).unwrap();
            let b = extract_metrics(&shifted, &SpurWindows::None).unwrap();
            prop_assert!((b.f_center_ghz - a.f_center_ghz - delta).abs() < 1e-9);
            prop_assert!((b.band_edges_ghz.0 - a.band_edges_ghz.0 - delta).abs() < 1e-9);
            prop_assert!((b.bandwidth_ghz() - a.bandwidth_ghz()).abs() < 1e-9);
            prop_assert!((b.il_db - a.il_db).abs() < 1e-12);
            prop_assert!((b.fbw_3db_pct * b.f_center_ghz - a.fbw_3db_pct * a.f_center_ghz).abs() < 1e-7);
            prop_assert!((b.oob_db.unwrap() - a.oob_db.unwrap()).abs() < 1e-12);
        }

        #[test]
        fn uniform_attenuation_shifts_il(alpha in 0.05f64..1.0) {
            let base = sweep_from_db(grid(40.0, 60.0, 2001), gaussian(50.0, 1.5, -2.0));
            let mut scaled = base.clone();
            scaled.s21.iter_mut().for_each(|s| *s *= alpha);
            let a = extract_metrics(&base, &SpurWindows::None).unwrap();
            let b = extract_metrics(&scaled, &SpurWindows::None).unwrap();
            prop_assert!((b.il_db - a.il_db + 20.0 * alpha.log10()).abs() < 1e-9);
            prop_assert!((b.band_edges_ghz.0 - a.band_edges_ghz.0).abs() < 1e-9);
            prop_assert!((b.band_edges_ghz.1 - a.band_edges_ghz.1).abs() < 1e-9);
            prop_assert!((b.fbw_3db_pct - a.fbw_3db_pct).abs() < 1e-9);
        }

        #[test]
        fn edges_converge_under_refinement(n in 200usize..2000) {
            let coarse = sweep_from_db(grid(40.0, 60.0, n), gaussian(50.0, 1.5, -2.0));
            let fine = sweep_from_db(grid(40.0, 60.0, 2 * n - 1), gaussian(50.0, 1.5, -2.0));
            let step = 20.0 / (2 * n - 2) as f64;
            let a = extract_metrics(&coarse, &SpurWindows::None).unwrap();
            let b = extract_metrics(&fine, &SpurWindows::None).unwrap();
            prop_assert!((a.band_edges_ghz.0 - b.band_edges_ghz.0).abs() < step);
            prop_assert!((a.band_edges_ghz.1 - b.band_edges_ghz.1).abs() < step);
        }
    }
}
