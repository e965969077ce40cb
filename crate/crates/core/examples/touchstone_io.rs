//! Write a simulated two-port to Touchstone, read it back, and turn a
//! one-port file into an admittance record.

use xfl::config::DesignConfig;
use xfl::ladder::simulate;
use xfl::mbvd::{admittance_sweep, admittance_to_s11, synthesize_mbvd};
use xfl::touchstone::{parse_touchstone, write_s1p, write_s2p, TouchstoneData};

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;
    let sweep = simulate(&resolved.filter()?, &resolved.config.sweep)?;

    let text = write_s2p(&sweep, 50.0);
    println!("{}", text.lines().take(3).collect::<Vec<_>>().join("\n"));
    let back = parse_touchstone(&text)?.into_sweep()?;
    let worst = sweep.s21.iter().zip(&back.s21).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("s2p round trip: {} points, max |dS21| = {worst:.1e}", back.len());

    let params = synthesize_mbvd(&resolved.resonators["measured_shunt"])?;
    let f: Vec<f64> = (0..401).map(|i| 45.0 + 0.0125 * i as f64).collect();
    let s11: Vec<_> = admittance_sweep(&params, &f).into_iter().map(|y| admittance_to_s11(y, 50.0)).collect();
    let one_port = parse_touchstone(&write_s1p(&f, &s11, 50.0))?;
    if let TouchstoneData::OnePort { z0_ohm, .. } = &one_port {
        println!("s1p reference impedance {z0_ohm} ohm");
    }
    let record = one_port.to_admittance()?;
    let peak = record.y.iter().map(|y| y.norm()).fold(0.0, f64::max);
    println!("admittance record: {} points, peak |Y| = {:.2} mS", record.len(), 1e3 * peak);

    let err = parse_touchstone("# GHz S DB R 50\n1 0 0\n").unwrap_err();
    println!("dB data is rejected: {err}");
    Ok(())
}
