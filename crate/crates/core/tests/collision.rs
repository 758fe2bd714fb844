use granular_core::collision::{
    Angular, Intensity, KernelSpec, QuadratureConfig, Restitution, angular_spreading, dissipation_rate,
    post_collisional, visco_elastic_outcome, z_from_sigma,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 3)
}

fn unit3() -> impl Strategy<Value = Vec<f64>> {
    vec3().prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6).prop_map(|v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    })
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

proptest! {
    #[test]
    fn momentum_and_energy_identity(v in vec3(), w in vec3(), sigma in unit3(), e in 0.0f64..=1.0) {
        let u: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let mut z = vec![0.0; 3];
        z_from_sigma(&u, &sigma, e, &mut z);
        let out = post_collisional(&v, &w, &z).unwrap();
        let scale = sq(&v) + sq(&w) + 1.0;
        for i in 0..3 {
            prop_assert!((out.v_prime[i] + out.v_star_prime[i] - v[i] - w[i]).abs() <= 1e-12 * scale.sqrt());
        }
        let lost = sq(&v) + sq(&w) - sq(&out.v_prime) - sq(&out.v_star_prime);
        prop_assert!((lost - out.energy_loss).abs() <= 1e-12 * scale);
        prop_assert!(out.energy_loss >= 0.0);
    }

    #[test]
    fn sigma_form_matches_z_form(v in vec3(), w in vec3(), sigma in unit3(), e in 0.0f64..=1.0) {
        let a = visco_elastic_outcome(&v, &w, &sigma, e).unwrap();
        let b = post_collisional(&v, &w, &a.z).unwrap();
        let scale = (sq(&v) + sq(&w)).sqrt() + 1.0;
        for i in 0..3 {
            prop_assert!((a.v_prime[i] - b.v_prime[i]).abs() <= 1e-12 * scale);
            prop_assert!((a.v_star_prime[i] - b.v_star_prime[i]).abs() <= 1e-12 * scale);
        }
        prop_assert!((a.energy_loss - b.energy_loss).abs() <= 1e-12 * scale * scale);
    }

    #[test]
    fn sampled_z_in_unit_ball(u in vec3(), seed in any::<u64>(), which in 0usize..4) {
        let restitution = match which {
            0 => Restitution::Constant(0.7),
            1 => Restitution::ViscoElastic { c: 0.3, p: 0.2 },
            2 => Restitution::EnergyDependent { c: 1.0, p: 1.0 },
            _ => Restitution::Sticky,
        };
        let spec = KernelSpec { restitution, ..KernelSpec::<f64>::elastic(3) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; 3];
        spec.sample_z(0.5, &u, &mut rng, &mut z);
        prop_assert!(sq(&z) <= 1.0 + 1e-12);
    }

    #[test]
    fn collision_symmetry(v in vec3(), w in vec3(), sigma in unit3(), e in 0.0f64..=1.0) {
        // Swapping the partners with σ → -σ swaps the outcomes.
        let a = visco_elastic_outcome(&v, &w, &sigma, e).unwrap();
        let neg: Vec<f64> = sigma.iter().map(|s| -s).collect();
        let b = visco_elastic_outcome(&w, &v, &neg, e).unwrap();
        for i in 0..3 {
            prop_assert!((a.v_prime[i] - b.v_star_prime[i]).abs() < 1e-11 * (1.0 + sq(&v) + sq(&w)));
        }
    }
}

#[test]
fn isotropic_dissipation_closed_form() {
    let quad = QuadratureConfig::new(3, 32);
    for e in [0.0, 0.3, 0.9, 1.0] {
        let spec = KernelSpec::<f64>::constant(3, e);
        let d = dissipation_rate(&spec, 1.0, &[1.0, 0.0, 0.0], &quad).unwrap();
        assert!((d.value - (1.0 - e * e) / 8.0).abs() < 1e-12, "e={e}: {}", d.value);
    }
}

#[test]
fn dissipation_scales_with_alpha_and_sticky_value() {
    let quad = QuadratureConfig::new(3, 32);
    let sticky = KernelSpec { restitution: Restitution::Sticky, intensity: Intensity::Constant(2.0), ..KernelSpec::<f64>::elastic(3) };
    let d = dissipation_rate(&sticky, 1.0, &[0.0, 3.0, 0.0], &quad).unwrap();
    assert!((d.value - 0.5).abs() < 1e-14);
}

#[test]
fn even_dimension_dissipation() {
    // In N = 2 the isotropic average of 1 - x is 1, so Δ = (1-e²)/8 again.
    let quad = QuadratureConfig::new(2, 48);
    let spec = KernelSpec::<f64>::constant(2, 0.5);
    let d = dissipation_rate(&spec, 1.0, &[1.0, 0.0], &quad).unwrap();
    assert!((d.value - 0.75 / 8.0).abs() < 1e-10);
}

#[test]
fn angular_spreading_monotone_in_eps() {
    let quad = QuadratureConfig::new(3, 32);
    let specs = [
        KernelSpec::<f64>::constant(3, 0.8),
        KernelSpec { restitution: Restitution::ViscoElastic { c: 0.5, p: 0.4 }, ..KernelSpec::elastic(3) },
        KernelSpec { angular: Angular::Linear { slope: 0.5 }, ..KernelSpec::constant(3, 0.5) },
    ];
    for spec in &specs {
        let mut prev = 0.0;
        for k in 1..=20 {
            let j = angular_spreading(spec, 1.0, k as f64 / 20.0, &quad);
            assert!(j + 1e-12 >= prev, "{spec:?} eps={}", k as f64 / 20.0);
            assert!((0.0..=1.0).contains(&j));
            prev = j;
        }
    }
}

#[test]
fn sticky_spreading_vanishes() {
    let quad = QuadratureConfig::new(3, 16);
    let sticky = KernelSpec { restitution: Restitution::Sticky, ..KernelSpec::<f64>::elastic(3) };
    assert_eq!(angular_spreading(&sticky, 1.0, 0.5, &quad), 0.0);
}

#[test]
fn rejects_invalid_kernels() {
    assert!(KernelSpec::<f64>::new(3, Intensity::Constant(1.0), Restitution::Constant(1.5), Angular::Isotropic).is_err());
    assert!(KernelSpec::<f64>::new(1, Intensity::Constant(1.0), Restitution::Constant(0.5), Angular::Isotropic).is_err());
    assert!(KernelSpec::<f64>::new(3, Intensity::Constant(1.0), Restitution::Constant(0.5), Angular::Linear { slope: 1.0 }).is_err());
    assert!(post_collisional(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.5]).is_err());
}

#[test]
fn f32_instantiation() {
    let out = post_collisional(&[1.0f32, 0.0], &[-1.0, 0.0], &[0.0, 0.5]).unwrap();
    assert!((out.energy_loss - 1.5).abs() < 1e-6);
}
