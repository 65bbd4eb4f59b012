//! Synthesize a short capture with one tag and write the RS resource grid
//! as CSV, then show the direct path cancelling in the correlators.
//!
//!     cargo run --example synthesize_grid [out.csv]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, synthesize, ChannelCoeffs, NoiseModel, PhaseJitter};
use zed_detect::detector::{correlate, path_power_estimate};

fn main() -> zed_detect::Result<()> {
    let out = std::env::args().nth(1);
    let p = reference_params();
    let k = p.grid.subcarriers();

    // Strong direct path, weak tag 26 dB below it.
    let direct = ChannelCoeffs::flat(k, Complex64::from_polar(1.0, 0.7));
    let tag = p.tag_a(Complex64::new(0.05, 0.0), 0.1);
    let noise = NoiseModel { sigma2: 0.0, jitter: PhaseJitter::None, seed: 3 };
    let grid = synthesize(&p.grid, &[tag.clone()], &direct, &noise, 2.0)?;
    println!("{} subcarriers x {} RS samples ({:.3} s)", grid.subcarriers(), grid.len(), grid.duration());

    let first = tag.sequence_starts(0.0, 2.0)[0];
    println!("first sequence at {first:.3} s, code {}", tag.code);
    for bit in 0..4 {
        let start = first + bit as f64 * p.fsk.bit_duration();
        let o = correlate(&grid, &p.fsk, start, 0)?;
        let sent = tag.code.bits()[bit];
        println!(
            "bit {bit} (sent {sent}): |e0| {:.4}  |e1| {:.4}  path power {:.5}",
            o.e0.norm(),
            o.e1.norm(),
            path_power_estimate(&o, sent, 0.0)
        );
    }
    // Idle between sequences: the direct path is constant and both
    // correlators vanish. (At t = 0 the previous cycle is still running.)
    let idle = correlate(&grid, &p.fsk, 0.2, 0)?;
    println!("idle window: |e0| {:.1e}  |e1| {:.1e}", idle.e0.norm(), idle.e1.norm());

    if let Some(path) = out {
        grid.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
