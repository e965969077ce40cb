//! Thickness-mode dispersion, overtone selection and trim planning for the
//! periodically poled stacks in the bundled design.

use xfl::config::DesignConfig;
use xfl::stack::{
    coupled_overtone_orders, frequency_sensitivity, mode_frequency, thickness_for_frequency, trim_depth_for_offset,
    CouplingClass, ModeSpec,
};

fn main() -> xfl::Result<()> {
    let resolved = DesignConfig::bundled().resolve()?;
    let c = resolved.material;
    println!("v_thickness = {:.1} m/s, v_lateral = {:.1} m/s", c.v_thickness, c.v_lateral);

    println!("{:<14} {:>9} {:>6} {:>10} {:>12}", "stack", "h (nm)", "N", "f (GHz)", "df/dh");
    for (name, (stack, mode)) in &resolved.stacks {
        println!(
            "{:<14} {:>9.1} {:>6} {:>10.3} {:>12.4}",
            name,
            stack.total_thickness_nm(),
            mode.order,
            mode_frequency(stack, mode),
            frequency_sensitivity(stack, mode),
        );
    }

    let (shunt, mode) = &resolved.stacks["shunt"];
    let orders: Vec<u32> = coupled_overtone_orders(shunt, 16)?
        .iter()
        .filter(|o| o.class != CouplingClass::Suppressed)
        .map(|o| o.order)
        .collect();
    println!("orders coupled by the 4-layer stack: {orders:?}");

    let h = thickness_for_frequency(50.0, &ModeSpec::new(3, mode.lateral_wavelength_um)?, &c)?;
    println!("single layer for A3 at 50 GHz: {h:.1} nm");

    let depth = trim_depth_for_offset(shunt, mode, 1.9, 0.0)?;
    println!("trim for +1.9 GHz on the 4-layer stack: {depth:.2} nm");
    Ok(())
}
