use ponsim::equalize::{downsample_align, make_pilot};
use ponsim::fiber::{self, Band, FiberSpec};
use ponsim::filter::FilterSpec;
use ponsim::metrics::{simulate_ber, sensitivity, transmit, BerOutcome, LinkScenario, PreparedLink};
use ponsim::rx;
use ponsim::signal::intensity;
use ponsim::tx::{self, ModFormat};

fn gf(b3: f64, b20: f64, rb: f64) -> FilterSpec {
    FilterSpec::from_normalized(b3, b20, rb).unwrap()
}

#[test]
fn noiseless_formats_are_error_free() {
    for format in ModFormat::ALL {
        let s = LinkScenario::new(format, 25e9, gf(50.0, 120.0, 25e9)).without_noise();
        let out = simulate_ber(&s, -20.0).unwrap();
        assert_eq!(out, BerOutcome::Measured(0.0), "{format}");
    }
}

#[test]
fn noiseless_unfiltered_chain_is_linear_in_drive() {
    for format in [ModFormat::Pam2, ModFormat::Pam4, ModFormat::Edb] {
        let s = LinkScenario {
            tx_filter: FilterSpec::Bypass,
            rx_filter: FilterSpec::Bypass,
            ..LinkScenario::new(format, 50e9, FilterSpec::Bypass)
        }
        .without_noise();
        let (data, field) = transmit(&s).unwrap();
        let rop = -13.0;
        let power = intensity(&fiber::set_rop(&field, rop).unwrap()).unwrap();
        let current = rx::detect(&power, &s.apd, 0, false).unwrap();
        let x = tx::map_to_drive(&data, format, s.bit_rate).unwrap();
        let x = x.as_real().unwrap();
        let mean_x = x.iter().sum::<f64>() / x.len() as f64;
        let scale = s.apd.conversion_gain() * fiber::dbm_to_watts(rop) / mean_x;
        for (i, xi) in current.as_real().unwrap().iter().zip(x) {
            let expected = scale * xi;
            assert!((i - expected).abs() <= 1e-9 * scale, "{format}: {i} vs {expected}");
        }
    }
}

#[test]
fn alignment_lands_mid_symbol_for_zero_phase_filters() {
    let s = LinkScenario::new(ModFormat::Pam2, 25e9, gf(100.0, 200.0, 25e9)).without_noise();
    let (data, field) = transmit(&s).unwrap();
    let power = intensity(&fiber::set_rop(&field, -20.0).unwrap()).unwrap();
    let current = rx::detect(&power, &s.apd, 0, false).unwrap();
    let current = rx::rx_filter(&current, &s.rx_filter).unwrap();
    let pilot = make_pilot(&data, s.format).unwrap();
    let a = downsample_align(&current, &pilot).unwrap();
    // Zero group delay: symbol 0 occupies samples 0..8, its centre is 3.5.
    assert!((3..=4).contains(&a.delay), "delay {}", a.delay);
    assert!(a.correlation > 0.95);
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let s = LinkScenario::new(ModFormat::Pam4, 25e9, gf(40.0, 90.0, 25e9));
    let a = simulate_ber(&s, -22.0).unwrap();
    assert_eq!(a, simulate_ber(&s, -22.0).unwrap());
    let other = simulate_ber(&s.clone().with_noise_seed(77), -22.0).unwrap();
    assert_ne!(a, other);
}

#[test]
fn ber_falls_with_received_power() {
    let s = LinkScenario::new(ModFormat::Edb, 25e9, gf(30.0, 70.0, 25e9))
        .with_fiber(FiberSpec::in_band(100.0, Band::O));
    let link = PreparedLink::new(&s).unwrap();
    let bers: Vec<f64> = [-30.0, -27.0, -25.0, -23.0, -21.0]
        .iter()
        .map(|&rop| link.ber_at(rop).unwrap().ber().unwrap())
        .collect();
    assert!(bers.windows(2).all(|w| w[1] <= w[0]), "{bers:?}");
    assert!(bers[0] > 1e-3 && bers[4] < 1e-3);
}

#[test]
fn sensitivity_brackets_the_target() {
    let s = LinkScenario::new(ModFormat::Pam2, 25e9, gf(60.0, 150.0, 25e9));
    let r = sensitivity(&s).unwrap();
    let sens = r.sensitivity_dbm.unwrap();
    assert!(r.converged);
    let below = r.ber_curve.iter().filter(|(p, _)| *p < sens).all(|(_, b)| *b > 1e-3);
    let above = r.ber_curve.iter().filter(|(p, _)| *p > sens).all(|(_, b)| *b <= 1e-3);
    assert!(below && above, "{:?}", r.ber_curve);
}
