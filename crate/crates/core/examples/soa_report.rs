//! Place the simulated filter among reported acoustic filters above 10 GHz.

use xfl::config::DesignConfig;
use xfl::ladder::simulate;
use xfl::metrics::{compare_to_soa, extract_metrics};

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;
    let sweep = simulate(&resolved.filter()?, &resolved.config.sweep)?;
    let m = extract_metrics(&sweep, &resolved.config.spur_windows.windows())?;

    println!("{:<24} {:>8} {:>8} {:>8} {:>10}", "reference", "fc GHz", "IL dB", "FBW %", "rej. dB");
    for row in compare_to_soa(&m, "simulated") {
        let rej = row.rejection_db.map(|r| format!("{r:.1}")).unwrap_or_else(|| "-".into());
        println!("{:<24} {:>8.2} {:>8.2} {:>8.2} {:>10}", row.reference, row.f_c_ghz, row.il_db, row.fbw_pct, rej);
    }
    Ok(())
}
