//! Flat-top transmit beam over a 90 degree sector, then the steered receive
//! codebook and a flat-top schedule built from it.
//!
//! cargo run --release --example beam_synthesis

use otfs_radar::array::UlaArray;
use otfs_radar::beamforming::{
    array_factor_matrix, build_codebook, build_schedule, design_flat_top, AngleGrid, BeamQuality, FistaParams,
    ScheduleStrategy,
};

fn main() -> otfs_radar::Result<()> {
    let arr = UlaArray::new(16)?;
    let grid = AngleGrid::synthesis(181)?;
    let deg = f64::to_radians;

    let tx = design_flat_top(&arr, &grid, 0.0, deg(90.0), deg(15.0), -25.0, &FistaParams::default())?;
    let q = BeamQuality::measure(&tx.beam, &arr, 0.0, deg(45.0), deg(15.0));
    println!(
        "tx beam: {} iterations, ripple {:.2} dB, sidelobes {:.2} dB below the main level",
        tx.iterations, q.ripple_db, -q.sll_db
    );

    let atom = design_flat_top(&arr, &grid, 0.0, deg(15.0), deg(5.0), -25.0, &FistaParams::default())?;
    let a = array_factor_matrix(&arr, &grid);
    let cb = build_codebook(&arr, &a, (deg(-45.0), deg(45.0)), deg(15.0), deg(5.0), &atom.beam)?;
    println!("codebook: {} atoms ({} coarse x {} fine)", cb.len(), cb.n_coarse, cb.n_fine);

    let sched = build_schedule(&cb, &arr, 6, 4, ScheduleStrategy::FlatTop, 7, 0.1)?;
    for (b, dirs) in sched.directions.iter().enumerate() {
        let centres: Vec<String> = dirs.iter().map(|d| format!("{:+.0}", d.unwrap_or(f64::NAN).to_degrees())).collect();
        println!("block {b}: beams at [{}] deg, max overlap {:.3}", centres.join(", "), sched.max_overlap(b));
    }
    Ok(())
}
