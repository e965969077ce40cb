//! CSV series and JSON reports.
//!
//! Floats are written in shortest round-trip form, so every file re-reads
//! to the same values and output never depends on the locale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::AdmittanceRecord;
use crate::ladder::SweepResult;
use crate::metrics::FilterMetrics;
use crate::stack::DispersionPoint;
use crate::tolerance::TrialRecord;

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn dispersion_csv(points: &[DispersionPoint]) -> Result<String> {
    to_csv(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct AdmittanceRow {
    frequency_ghz: f64,
    re_y_s: f64,
    im_y_s: f64,
}

pub fn admittance_csv(frequencies_ghz: &[f64], y: &[Complex64]) -> Result<String> {
    to_csv(frequencies_ghz.iter().zip(y).map(|(&f, y)| AdmittanceRow { frequency_ghz: f, re_y_s: y.re, im_y_s: y.im }))
}

/// Reads `frequency_ghz,re_y_s,im_y_s` rows with a header line.
pub fn read_admittance_csv(text: &str) -> Result<AdmittanceRecord> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let (mut f, mut y) = (Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<AdmittanceRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        f.push(row.frequency_ghz);
        y.push(Complex64::new(row.re_y_s, row.im_y_s));
    }
    AdmittanceRecord::new(f, y)
}

fn db(s: Complex64) -> f64 {
    20.0 * s.norm().log10()
}

#[derive(Serialize)]
struct FilterRow {
    frequency_ghz: f64,
    s11_db: f64,
    s21_db: f64,
    s12_db: f64,
    s22_db: f64,
    s21_phase_deg: f64,
}

pub fn filter_csv(sweep: &SweepResult) -> Result<String> {
    to_csv((0..sweep.len()).map(|i| FilterRow {
        frequency_ghz: sweep.frequencies_ghz[i],
        s11_db: db(sweep.s11[i]),
        s21_db: db(sweep.s21[i]),
        s12_db: db(sweep.s12[i]),
        s22_db: db(sweep.s22[i]),
        s21_phase_deg: sweep.s21[i].arg().to_degrees(),
    }))
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    dh_nm: f64,
    fs_series_ghz: Option<f64>,
    fs_shunt_ghz: Option<f64>,
    il_db: Option<f64>,
    fbw_pct: Option<f64>,
    pass: Option<bool>,
}

pub fn tolerance_csv(trials: &[TrialRecord]) -> Result<String> {
    to_csv(trials.iter().map(|t| TrialRow {
        trial: t.trial,
        dh_nm: t.dh_nm,
        fs_series_ghz: t.fs_series_ghz,
        fs_shunt_ghz: t.fs_shunt_ghz,
        il_db: t.il_db,
        fbw_pct: t.fbw_pct,
        pass: t.pass,
    }))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Metrics report; keys keep the field order of [`FilterMetrics`].
pub fn metrics_json(metrics: &FilterMetrics) -> Result<String> {
    to_json(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::{dispersion_curve, AcousticConstants};

    #[test]
    fn dispersion_header_and_rows() {
        let c = AcousticConstants::new(3500.0, 4000.0).unwrap();
        let points = dispersion_curve(&c, &[3, 12], 8.0, (100.0, 500.0), 3).unwrap();
        let text = dispersion_csv(&points).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("thickness_nm,order,frequency_ghz"));
        assert_eq!(lines.count(), 6);
    }

    #[test]
    fn admittance_round_trip_is_exact() {
        let f: Vec<f64> = (0..120).map(|i| 40.0 + 0.1 * i as f64).collect();
        let y: Vec<Complex64> = f.iter().map(|x| Complex64::new(1e-3 / x, x.sin() * 1e-2)).collect();
        let text = admittance_csv(&f, &y).unwrap();
        assert!(text.starts_with("frequency_ghz,re_y_s,im_y_s\n"));
        let back = read_admittance_csv(&text).unwrap();
        assert_eq!(back.frequencies_ghz, f);
        assert_eq!(back.y, y);
    }

    #[test]
    fn bad_admittance_rows_report_lines() {
        let err = read_admittance_csv("frequency_ghz,re_y_s,im_y_s\n1,0,0\n2,x,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn metrics_keys_in_order() {
        let m = FilterMetrics {
            f_center_ghz: 49.3,
            il_db: 1.7,
            fbw_3db_pct: 3.3,
            oob_db: Some(12.0),
            oob_excl_spurs_db: None,
            band_edges_ghz: (48.5, 50.1),
            spur_windows_ghz: vec![],
            in_band_points: 320,
            in_band_s11_min_db: -20.0,
        };
        let text = metrics_json(&m).unwrap();
        let keys = ["f_center_ghz", "il_db", "fbw_3db_pct", "oob_db", "oob_excl_spurs_db", "band_edges_ghz", "spur_windows_ghz"];
        let positions: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let back: FilterMetrics = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn trial_columns() {
        let t = TrialRecord {
            trial: 0,
            dh_nm: 0.5,
            dh_shunt_nm: 0.5,
            shift_ghz: -0.1,
            fs_series_ghz: Some(49.5),
            fs_shunt_ghz: Some(47.6),
            il_db: None,
            fbw_pct: None,
            pass: Some(false),
        };
        let text = tolerance_csv(&[t]).unwrap();
        assert_eq!(text, "trial,dh_nm,fs_series_ghz,fs_shunt_ghz,il_db,fbw_pct,pass\n0,0.5,49.5,47.6,,,false\n");
    }
}
