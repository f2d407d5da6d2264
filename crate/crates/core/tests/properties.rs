use num_complex::Complex64;
use proptest::prelude::*;
use satground::functionals::{
    energy, f_aux, g_sat, h_ratio, kinetic, polar_energy, potential, power, quartic, rayleigh_quotient,
};
use satground::propagator::Field2D;
use satground::radial::{RadialGrid, RadialProfile};
use satground::threshold::dilate;

/// Discrete Townes mass on R = 12, n = 1024.
const TOWNES_MASS: f64 = 11.700_072_981_4;

fn grid() -> RadialGrid {
    RadialGrid::new(12.0, 768).unwrap()
}

/// Unit-power sums of one to three Gaussian bumps, zero at the rim.
fn profiles() -> impl Strategy<Value = RadialProfile> {
    prop::collection::vec((0.1f64..2.0, 0.4f64..3.0), 1..4).prop_map(|bumps| {
        let g = grid();
        let mut v: Vec<f64> = g
            .nodes()
            .map(|r| bumps.iter().map(|&(a, w)| a * (-(r / w).powi(2)).exp()).sum())
            .collect();
        v[g.intervals()] = 0.0;
        RadialProfile::new(g, v).unwrap().normalized().unwrap()
    })
}

fn fields() -> impl Strategy<Value = Field2D> {
    (2u32..6).prop_flat_map(|k| {
        let m = 1usize << k;
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * m).prop_map(move |v| {
            let values = v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            Field2D::new(3.0, m, values).unwrap()
        })
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

proptest! {
    #[test]
    fn h_stays_below_half_and_decreases(s in 1e-9f64..1e7, t in 1.001f64..50.0) {
        let h = h_ratio(s).unwrap();
        prop_assert!(h > 0.0 && h < 0.5);
        prop_assert!(h_ratio(s * t).unwrap() < h);
    }

    #[test]
    fn f_is_nonnegative_and_increasing(s in 0.0f64..1e7, t in 1.001f64..50.0) {
        let f = f_aux(s).unwrap();
        prop_assert!(f >= 0.0);
        if s > 1e-3 {
            prop_assert!(f_aux(s * t).unwrap() > f);
        }
    }

    #[test]
    fn g_lies_between_zero_and_half_square(s in 0.0f64..1e6) {
        let g = g_sat(s).unwrap();
        prop_assert!(g >= 0.0);
        prop_assert!(g <= 0.5 * s * s);
        prop_assert!(g <= s);
    }

    #[test]
    fn saturable_potential_is_dominated_by_half_quartic(p in profiles()) {
        prop_assert!(potential(&p) <= 0.5 * quartic(&p));
        prop_assert!(potential(&p) <= power(&p));
    }

    #[test]
    fn energy_is_bounded_below_by_the_coupling(p in profiles(), gamma in -200.0f64..0.0) {
        prop_assert!(energy(&p, gamma) >= gamma);
    }

    #[test]
    fn quotient_exceeds_the_townes_mass(p in profiles()) {
        let q = rayleigh_quotient(&p).unwrap();
        prop_assert!(q > kinetic(&p) / (0.5 * quartic(&p)));
        prop_assert!(q > TOWNES_MASS, "quotient {}", q);
    }

    #[test]
    fn pair_energy_ignores_the_phase(p in profiles(), phi in -10.0f64..10.0, gamma in -100.0f64..0.0) {
        let e = energy(&p, gamma);
        prop_assert!(close(polar_energy(&p, phi, gamma), e, 1e-12));
    }

    #[test]
    fn dilation_keeps_power_and_scales_gradient_and_quartic(p in profiles(), k in 0usize..4, f in 0.6f64..1.0) {
        let delta = f * 0.5f64.powi(k as i32);
        let d = dilate(&p, delta).unwrap();
        prop_assert!(close(power(&d), 1.0, 1e-12));
        prop_assert!(close(kinetic(&d), delta * delta * kinetic(&p), 1e-12));
        prop_assert!(close(quartic(&d), delta * delta * quartic(&p), 1e-12));
    }

    #[test]
    fn profile_csv_round_trips(p in profiles()) {
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = RadialProfile::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid().intervals(), p.grid().intervals());
        prop_assert_eq!(back.values(), p.values());
    }

    #[test]
    fn snapshot_round_trips(field in fields()) {
        let m = field.m();
        let mut buf = Vec::new();
        field.write_snapshot(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 16 + 16 * m * m);
        let back = Field2D::read_snapshot(buf.as_slice(), 3.0).unwrap();
        prop_assert_eq!(back.values(), field.values());
    }
}

#[test]
fn truncated_snapshot_is_rejected() {
    let field = Field2D::new(1.0, 4, vec![Complex64::new(1.0, 0.0); 16]).unwrap();
    let mut buf = Vec::new();
    field.write_snapshot(&mut buf).unwrap();
    buf.pop();
    assert!(Field2D::read_snapshot(buf.as_slice(), 1.0).is_err());
    buf[0] = b'X';
    assert!(Field2D::read_snapshot(buf.as_slice(), 1.0).is_err());
}
