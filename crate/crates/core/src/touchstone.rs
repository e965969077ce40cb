//! Touchstone v1 (.s1p / .s2p) reading and writing.
//!
//! Reading accepts `HZ`/`KHZ`/`MHZ`/`GHZ` units and the `RI` and `MA` data
//! formats. `DB` data is rejected with [`Error::UnsupportedFormat`]; convert
//! such files to `RI` or `MA` first. Files are written as `# GHZ S RI R <z0>`
//! with 12 significant digits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::extraction::AdmittanceRecord;
use crate::ladder::SweepResult;
use crate::mbvd::s11_to_admittance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    fn to_ghz(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1e-9,
            FrequencyUnit::KHz => 1e-6,
            FrequencyUnit::MHz => 1e-3,
            FrequencyUnit::GHz => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    RealImaginary,
    MagnitudeAngle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLine {
    pub unit: FrequencyUnit,
    pub format: DataFormat,
    pub z0_ohm: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        Self { unit: FrequencyUnit::GHz, format: DataFormat::MagnitudeAngle, z0_ohm: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TouchstoneData {
    OnePort { z0_ohm: f64, frequencies_ghz: Vec<f64>, s11: Vec<Complex64> },
    TwoPort { z0_ohm: f64, sweep: SweepResult },
}

impl TouchstoneData {
    pub fn z0_ohm(&self) -> f64 {
        match self {
            TouchstoneData::OnePort { z0_ohm, .. } | TouchstoneData::TwoPort { z0_ohm, .. } => *z0_ohm,
        }
    }

    /// One-port data as admittance against the file's reference impedance.
    pub fn to_admittance(&self) -> Result<AdmittanceRecord> {
        match self {
            TouchstoneData::OnePort { z0_ohm, frequencies_ghz, s11 } => AdmittanceRecord::new(
                frequencies_ghz.clone(),
                s11.iter().map(|&s| s11_to_admittance(s, *z0_ohm)).collect(),
            ),
            TouchstoneData::TwoPort { .. } => Err(Error::invalid("admittance needs one-port data")),
        }
    }

    pub fn into_sweep(self) -> Result<SweepResult> {
        match self {
            TouchstoneData::TwoPort { sweep, .. } => Ok(sweep),
            TouchstoneData::OnePort { .. } => Err(Error::invalid("expected two-port data")),
        }
    }
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let mut opts = OptionLine::default();
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit = FrequencyUnit::Hz,
            "KHZ" => opts.unit = FrequencyUnit::KHz,
            "MHZ" => opts.unit = FrequencyUnit::MHz,
            "GHZ" => opts.unit = FrequencyUnit::GHz,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(Error::UnsupportedFormat(format!("{p}-parameters (line {line})")));
            }
            "RI" => opts.format = DataFormat::RealImaginary,
            "MA" => opts.format = DataFormat::MagnitudeAngle,
            "DB" => return Err(Error::UnsupportedFormat(format!("DB data format (line {line})"))),
            "R" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| Error::Parse { line, message: "missing reference impedance after R".into() })?;
                opts.z0_ohm = value
                    .parse()
                    .ok()
                    .filter(|z: &f64| *z > 0.0)
                    .ok_or_else(|| Error::Parse { line, message: format!("bad reference impedance {value:?}") })?;
            }
            other => return Err(Error::Parse { line, message: format!("unknown option {other:?}") }),
        }
    }
    Ok(opts)
}

pub fn parse_touchstone(text: &str) -> Result<TouchstoneData> {
    let mut options: Option<OptionLine> = None;
    let mut ports: Option<usize> = None;
    let mut frequencies = Vec::new();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(body) = content.strip_prefix('#') {
            // only the first option line counts
            if options.is_none() {
                options = Some(parse_option_line(body, line)?);
            }
            continue;
        }
        let opts = *options.get_or_insert_with(OptionLine::default);
        let values: Vec<f64> = content
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("not a number: {t:?}") }))
            .collect::<Result<_>>()?;
        let n_ports = match (ports, values.len()) {
            (Some(p), _) => p,
            (None, 3) => 1,
            (None, 9) => 2,
            (None, n) => {
                return Err(Error::Parse { line, message: format!("expected 3 or 9 values per row, found {n}") });
            }
        };
        ports = Some(n_ports);
        let expected = 1 + 2 * n_ports * n_ports;
        if values.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} values, found {}", values.len()),
            });
        }
        let f = values[0] * opts.unit.to_ghz();
        if let Some(&prev) = frequencies.last() {
            if !(f > prev) {
                return Err(Error::Parse { line, message: format!("frequency {f} GHz does not ascend") });
            }
        }
        frequencies.push(f);
        columns.resize_with(n_ports * n_ports, Vec::new);
        for (k, pair) in values[1..].chunks(2).enumerate() {
            let s = match opts.format {
                DataFormat::RealImaginary => Complex64::new(pair[0], pair[1]),
                DataFormat::MagnitudeAngle => Complex64::from_polar(pair[0], pair[1].to_radians()),
            };
            columns[k].push(s);
        }
    }

    let z0_ohm = options.unwrap_or_default().z0_ohm;
    match ports {
        None => Err(Error::Parse { line: text.lines().count().max(1), message: "no data rows".into() }),
        Some(1) => Ok(TouchstoneData::OnePort { z0_ohm, frequencies_ghz: frequencies, s11: columns.remove(0) }),
        Some(_) => {
            // two-port row order is f, S11, S21, S12, S22
            let mut it = columns.into_iter();
            let (s11, s21, s12, s22) = (
                it.next().unwrap_or_default(),
                it.next().unwrap_or_default(),
                it.next().unwrap_or_default(),
                it.next().unwrap_or_default(),
            );
            Ok(TouchstoneData::TwoPort {
                z0_ohm,
                sweep: SweepResult { frequencies_ghz: frequencies, s11, s21, s12, s22 },
            })
        }
    }
}

/// 12 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    format!("{x:.11e}")
}

fn header(z0_ohm: f64, kind: &str) -> String {
    format!("! {kind} written by xfl\n# GHZ S RI R {z0_ohm}\n")
}

pub fn write_s1p(frequencies_ghz: &[f64], s11: &[Complex64], z0_ohm: f64) -> String {
    let mut out = header(z0_ohm, "one-port S-parameters");
    for (f, s) in frequencies_ghz.iter().zip(s11) {
        out.push_str(&format!("{} {} {}\n", format_number(*f), format_number(s.re), format_number(s.im)));
    }
    out
}

pub fn write_s2p(sweep: &SweepResult, z0_ohm: f64) -> String {
    let mut out = header(z0_ohm, "two-port S-parameters");
    for i in 0..sweep.len() {
        let mut row = format_number(sweep.frequencies_ghz[i]);
        for s in [sweep.s11[i], sweep.s21[i], sweep.s12[i], sweep.s22[i]] {
            row.push(' ');
            row.push_str(&format_number(s.re));
            row.push(' ');
            row.push_str(&format_number(s.im));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matched_load_is_fifty_ohm_admittance() {
        let data = parse_touchstone("# GHZ S RI R 50\n50.0 0.0 0.0\n").unwrap();
        let TouchstoneData::OnePort { frequencies_ghz, s11, .. } = &data else { panic!() };
        assert_eq!(frequencies_ghz, &vec![50.0]);
        assert_eq!(s11[0], Complex64::new(0.0, 0.0));
        let y = s11_to_admittance(s11[0], data.z0_ohm());
        assert_eq!(y, Complex64::new(1.0 / 50.0, 0.0));
    }

    #[test]
    fn units_formats_and_comments() {
        let text = "! measured\n# MHZ S MA R 25 ! trailing\n1000 1.0 90 ! first\n2000 0.5 180\n";
        let TouchstoneData::OnePort { z0_ohm, frequencies_ghz, s11 } = parse_touchstone(text).unwrap() else {
            panic!()
        };
        assert_eq!(z0_ohm, 25.0);
        assert_eq!(frequencies_ghz, vec![1.0, 2.0]);
        assert!((s11[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((s11[1] - Complex64::new(-0.5, 0.0)).norm() < 1e-15);

        let hz = parse_touchstone("# HZ S RI R 50\n1e9 0 0\n").unwrap();
        let TouchstoneData::OnePort { frequencies_ghz, .. } = hz else { panic!() };
        assert_eq!(frequencies_ghz, vec![1.0]);
    }

    #[test]
    fn missing_option_line_uses_defaults() {
        let TouchstoneData::OnePort { z0_ohm, s11, .. } = parse_touchstone("1 1 0\n").unwrap() else { panic!() };
        assert_eq!(z0_ohm, 50.0);
        assert_eq!(s11[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_touchstone("# GHZ S RI R 50\n50 0 0\n49 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_touchstone("# GHZ S RI R 50\n! c\n50 0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_touchstone("# GHZ S RI R 50\n50 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(parse_touchstone("# GHZ S DB R 50\n50 0 0\n"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(parse_touchstone("# GHZ Y RI R 50\n50 0 0\n"), Err(Error::UnsupportedFormat(_))));
        assert!(parse_touchstone("# GHZ S RI R\n").is_err());
        assert!(parse_touchstone("! nothing\n").is_err());
    }

    #[test]
    fn two_port_column_order() {
        let text = "# GHZ S RI R 50\n50 1 0 2 0 3 0 4 0\n";
        let sweep = parse_touchstone(text).unwrap().into_sweep().unwrap();
        assert_eq!(sweep.s11[0].re, 1.0);
        assert_eq!(sweep.s21[0].re, 2.0);
        assert_eq!(sweep.s12[0].re, 3.0);
        assert_eq!(sweep.s22[0].re, 4.0);
    }

    fn same_to_12_digits(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 5e-12 * a.abs().max(b.abs())
    }

    proptest! {
        #[test]
        fn s2p_round_trip(
            rows in prop::collection::vec(prop::array::uniform8(-1.0f64..1.0), 1..20),
            start in 1.0f64..100.0,
        ) {
            let c = |re: f64, im: f64| Complex64::new(re, im);
            let sweep = SweepResult {
                frequencies_ghz: (0..rows.len()).map(|i| start + 0.37 * i as f64).collect(),
                s11: rows.iter().map(|r| c(r[0], r[1])).collect(),
                s21: rows.iter().map(|r| c(r[2], r[3])).collect(),
                s12: rows.iter().map(|r| c(r[4], r[5])).collect(),
                s22: rows.iter().map(|r| c(r[6], r[7])).collect(),
            };
            let text = write_s2p(&sweep, 50.0);
            prop_assert!(text.contains("# GHZ S RI R 50\n"));
            let back = parse_touchstone(&text).unwrap().into_sweep().unwrap();
            for i in 0..sweep.len() {
                prop_assert!(same_to_12_digits(back.frequencies_ghz[i], sweep.frequencies_ghz[i]));
                for (x, y) in [(back.s11[i], sweep.s11[i]), (back.s21[i], sweep.s21[i]), (back.s12[i], sweep.s12[i]), (back.s22[i], sweep.s22[i])] {
                    prop_assert!(same_to_12_digits(x.re, y.re) && same_to_12_digits(x.im, y.im));
                }
            }
            // a second pass is exact
            let again = write_s2p(&back, 50.0);
            prop_assert_eq!(text, again);
        }
    }
}
