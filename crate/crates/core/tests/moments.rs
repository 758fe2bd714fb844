use granular_core::collision::{Intensity, KernelSpec, Restitution};
use granular_core::dsmc::{InitialDistribution, init_ensemble};
use granular_core::moments::{
    MomentOdeSystem, MomentsError, TailClass, Verdict, classify_bounds, classify_cooling, cooling_time_bound,
    default_povzner_constant, half_integer_grid, integrate_moment_bounds, invariant_region_check, minimal_povzner_constant,
    moments, povzner_check, CoolingBounds,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn povzner_holds_with_default_constant(x in 0.0f64..1e3, y in 0.0f64..1e3) {
        prop_assert!(povzner_check(x, y, default_povzner_constant()).holds);
    }

    #[test]
    fn povzner_homogeneous(x in 1e-3f64..10.0, y in 1e-3f64..10.0, s in 0.1f64..10.0) {
        // Both sides are homogeneous of degree 2 in (x, y).
        let a = povzner_check(x, y, 1.0);
        let b = povzner_check(s * x, s * y, 1.0);
        prop_assert!((b.lhs - s * s * a.lhs).abs() <= 1e-9 * b.lhs.abs().max(1e-300));
        prop_assert!((b.rhs - s * s * a.rhs).abs() <= 1e-9 * b.rhs);
    }
}

#[test]
fn minimal_constant_attained_on_diagonal() {
    let grid: Vec<f64> = (0..200).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0)).collect();
    let c = minimal_povzner_constant(&grid);
    assert!((c - default_povzner_constant::<f64>()).abs() < 1e-12, "{c}");
}

#[test]
fn gaussian_moments_match_closed_form() {
    // |v|² ~ σ² χ²₃ with σ² = 1/3: m_p = (2σ²)^p Γ(p + 3/2) / Γ(3/2).
    let ens = init_ensemble(3, &InitialDistribution::Maxwellian { temperature: 1.0 / 3.0 }, 200_000, 4, None).unwrap();
    let mv = moments(&ens, &[1.0, 1.5, 2.0], 1.0);
    let g = |x: f64| granular_core::numerics::ln_gamma(x).exp();
    for (i, &p) in mv.indices.iter().enumerate() {
        let exact = (2.0f64 / 3.0).powf(p) * g(p + 1.5) / g(1.5);
        assert!((mv.values[i] - exact).abs() < 4.0 * mv.std_errors[i], "p={p}: {} vs {exact}", mv.values[i]);
    }
}

#[test]
fn bounds_dominate_initial_and_stay_finite() {
    let ens = init_ensemble(3, &InitialDistribution::UniformBall { radius: 1.0 }, 5000, 2, Some(1.0)).unwrap();
    let sys = MomentOdeSystem::new(1.0, 0.1, 4.0, Intensity::Constant(1.0)).unwrap();
    let mv = moments(&ens, &half_integer_grid(4.0), 1.0);
    let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    let b = integrate_moment_bounds(&sys, &mv, |_| 1.0, &times).unwrap();
    for k in 0..times.len() {
        for &p in sys.indices() {
            assert!(b.m_bound(k, p).unwrap().is_finite());
        }
    }
    assert!((b.m_bound(0, 2.0).unwrap() - mv.get(2.0).unwrap()).abs() < 1e-12);
}

#[test]
fn invariant_region_holds_above_p0() {
    let sys = MomentOdeSystem::new(2.0, 0.1, 8.0, Intensity::Constant(1.0)).unwrap();
    assert!(sys.p0() <= 1.5 + 1e-12, "p0 = {}", sys.p0());
    let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
    let chk = invariant_region_check(&sys, 4.0, |_| 1.0, &times).unwrap();
    assert!(chk.face_condition && chk.holds, "{chk:?}");
}

#[test]
fn classifier_canonical_cases() {
    let sticky = KernelSpec {
        intensity: Intensity::Power { c: 1.0, k: -1.0 },
        restitution: Restitution::Sticky,
        ..KernelSpec::<f64>::elastic(3)
    };
    let v = classify_cooling(&sticky, TailClass::Gaussian, 1.0).unwrap();
    assert_eq!(v.verdict, Verdict::Finite);
    assert!((v.bound.unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);

    let bounded = KernelSpec::<f64>::constant(3, 0.9);
    assert_eq!(classify_cooling(&bounded, TailClass::Gaussian, 1.0).unwrap().verdict, Verdict::Infinite);

    let coupled = KernelSpec {
        intensity: Intensity::Power { c: 1.0, k: -1.0 },
        restitution: Restitution::EnergyDependent { c: 1.0, p: 1.0 },
        ..KernelSpec::<f64>::elastic(3)
    };
    let v = classify_cooling(&coupled, TailClass::Gaussian, 1.0).unwrap();
    assert_eq!((v.verdict, v.rationale.tag()), (Verdict::Infinite, "deltale0"));
}

#[test]
fn contradictory_bounds_rejected() {
    let b = CoolingBounds {
        alpha_bounded_near_zero: true,
        spreading_uniform_near_zero: true,
        lower: Some((1.0, -1.0)),
        upper_increasing: false,
        h4: true,
        tail_eta: Some(2.0),
        initial_energy: 1.0,
    };
    assert!(matches!(classify_bounds(&b), Err(MomentsError::Contradiction(_))));
}

#[test]
fn cooling_bound_solves_ode() {
    // E' = -Δ₀ (2E)^{3/2} E^δ integrated with small explicit steps.
    let (d0, delta, e0) = (0.3, -0.8, 2.0);
    let t = cooling_time_bound(d0, delta, e0);
    let mut e: f64 = e0;
    let dt = t * 1e-6;
    let mut time = 0.0;
    while e > 0.0 && time < 2.0 * t {
        e -= dt * d0 * (2.0 * e).powf(1.5) * e.powf(delta);
        time += dt;
    }
    assert!((time - t).abs() < 1e-3 * t, "{time} vs {t}");
}
