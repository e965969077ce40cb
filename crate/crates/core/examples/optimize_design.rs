//! Multi-start search over resonator sizes and the series/shunt frequency
//! offset of the bundled ladder.

use xfl::config::DesignConfig;
use xfl::optimizer::{optimize, DesignBounds};

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;
    let template = resolved.template()?;
    let opt = &resolved.config.optimizer;
    let bounds = DesignBounds::around(&template, opt.bounds_fraction)?;
    let settings = resolved.optimizer_settings(resolved.config.seed);

    let grid = &resolved.config.sweep;
    let result = optimize(&template, &bounds, &opt.objective, grid, &settings)?;

    for s in &result.starts {
        println!("start {:2}: cost {:8.4} -> {:8.4} ({} evals)", s.index, s.initial_cost, s.cost, s.evals);
    }
    let b = &result.best;
    println!("template cost {:.4}, best {:.4} from start {}", result.template_cost, result.cost, result.winner);
    println!(
        "C0 series {:.2} fF, C0 shunt {:.2} fF, offset {:.3} GHz",
        b.c0_series_ff, b.c0_shunt_ff, b.delta_f_ghz
    );
    if let Some(m) = &result.metrics {
        println!("IL {:.2} dB, FBW {:.2} %, center {:.3} GHz", m.il_db, m.fbw_3db_pct, m.f_center_ghz);
    }
    Ok(())
}
