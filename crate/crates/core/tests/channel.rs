mod common;

use common::{c, tag_a};
use num_complex::Complex64;
use zed_detect::channel::{reference_params, synthesize, ChannelCoeffs, GridParams, NoiseModel, PhaseJitter};
use zed_detect::harness::Moments;
use zed_detect::sequences::ReflectionState;

fn quiet() -> NoiseModel {
    NoiseModel { sigma2: 0.0, jitter: PhaseJitter::None, seed: 0 }
}

#[test]
fn samples_follow_the_tag_state() {
    let grid = reference_params().grid;
    let direct = Complex64::from_polar(0.8, -0.4);
    let ch = ChannelCoeffs::flat(grid.subcarriers(), direct);
    let tag = tag_a(&grid, 0.1, 0.25);
    let g = synthesize(&grid, &[tag.clone()], &ch, &quiet(), 3.0).unwrap();
    for l in (0..g.len()).step_by(7) {
        let expected = direct + c(0.1) * tag.state_at(g.time(l)).value();
        for k in [0, 11, 23] {
            assert!((g.get(k, l) - expected).norm() < 1e-12, "k {k} l {l}");
        }
    }
    let reflective = (0..g.len()).filter(|&l| tag.state_at(g.time(l)) == ReflectionState::Reflective).count();
    let transparent = (0..g.len()).filter(|&l| tag.state_at(g.time(l)) == ReflectionState::Transparent).count();
    assert!(reflective > 0 && transparent > 0);
}

#[test]
fn noise_has_the_requested_variance() {
    let grid = GridParams::new(6, 71.35e-6, [0, 7], 1.0).unwrap();
    let ch = ChannelCoeffs::flat(grid.subcarriers(), c(0.0));
    let noise = NoiseModel { sigma2: 2.0, jitter: PhaseJitter::None, seed: 5 };
    let g = synthesize(&grid, &[], &ch, &noise, 5.0).unwrap();
    let re: Vec<f64> = (0..24).flat_map(|k| g.row(k).iter().map(|v| v.re).collect::<Vec<_>>()).collect();
    let im: Vec<f64> = (0..24).flat_map(|k| g.row(k).iter().map(|v| v.im).collect::<Vec<_>>()).collect();
    let (mr, mi) = (Moments::from_slice(&re), Moments::from_slice(&im));
    // Each component carries half the power; var of a sample variance is 2σ⁴/n.
    let se = (2.0 * 1.0f64.powi(2) / re.len() as f64).sqrt();
    assert!((mr.variance - 1.0).abs() < 4.0 * se, "{}", mr.variance);
    assert!((mi.variance - 1.0).abs() < 4.0 * se, "{}", mi.variance);
    assert!(mr.mean.abs() < 4.0 * mr.std_error());
}

#[test]
fn jitter_is_one_phase_per_tti() {
    let grid = reference_params().grid;
    let ch = ChannelCoeffs::flat(grid.subcarriers(), c(1.0));
    let noise = NoiseModel { sigma2: 0.0, jitter: PhaseJitter::IidUniform, seed: 9 };
    let g = synthesize(&grid, &[], &ch, &noise, 0.2).unwrap();
    for l in (0..g.len() - 1).step_by(2) {
        assert!((g.get(0, l) - g.get(0, l + 1)).norm() < 1e-12);
        assert!((g.get(0, l) - g.get(5, l)).norm() < 1e-12);
        assert!((g.get(0, l).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn same_seed_same_grid() {
    let grid = reference_params().grid;
    let ch = ChannelCoeffs::flat(grid.subcarriers(), c(1.0));
    let noise = NoiseModel { sigma2: 0.3, jitter: PhaseJitter::RandomWalk { step_rad: 0.01 }, seed: 4 };
    let tag = tag_a(&grid, 0.05, 0.1);
    let a = synthesize(&grid, &[tag.clone()], &ch, &noise, 1.5).unwrap();
    let b = synthesize(&grid, &[tag.clone()], &ch, &noise, 1.5).unwrap();
    assert_eq!(a, b);
    let other = synthesize(&grid, &[tag], &ch, &NoiseModel { seed: 5, ..noise }, 1.5).unwrap();
    assert_ne!(a, other);
}

#[test]
fn capture_must_hold_a_cycle() {
    let grid = reference_params().grid;
    let ch = ChannelCoeffs::flat(grid.subcarriers(), c(1.0));
    let err = synthesize(&grid, &[tag_a(&grid, 0.05, 0.0)], &ch, &quiet(), 1.0).unwrap_err();
    assert!(err.to_string().contains("duration"), "{err}");
}
