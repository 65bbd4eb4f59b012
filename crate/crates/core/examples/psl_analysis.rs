//! Autocorrelation and peak-to-sidelobe level of the 25-bit near-perfect
//! code, next to Barker-13 for comparison.
//!
//!     cargo run --example psl_analysis

use zed_detect::sequences::{aperiodic_autocorrelation, barker13, max_sidelobe, npc25, psl_db, BitSequence};

fn report(name: &str, code: &BitSequence) {
    let acf = aperiodic_autocorrelation(code);
    println!("{name} ({} bits): {code}", code.len());
    let lags: Vec<String> = acf.iter().map(|v| format!("{v:>3}")).collect();
    println!("  acf  {}", lags.join(""));
    println!(
        "  peak {}  max sidelobe {}  PSL {:.3} dB",
        acf[0],
        max_sidelobe(code),
        psl_db(code)
    );
}

fn main() {
    report("NPC", &npc25());
    report("Barker", &barker13());

    // A weaker tag must clear the stronger tag's sidelobes, so the PSL
    // bounds how far below the primary a secondary can still be trusted.
    let psl = psl_db(&npc25());
    println!("\nsidelobe floor relative to the primary: -{psl:.2} dB (contrast scale)");
}
