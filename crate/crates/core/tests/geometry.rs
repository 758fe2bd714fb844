use granular_core::geometry::{
    PrePostMap, coordinate_interpolation, in_cone, omega_e, shift_jacobian, shift_map, shift_map_inverse,
};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 3).prop_filter("away from 0", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
}

fn unit3() -> impl Strategy<Value = Vec<f64>> {
    vec3().prop_map(|v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64]) -> f64 {
    let h = 1e-6;
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut p = x.to_vec();
        let mut q = x.to_vec();
        p[j] += h;
        q[j] -= h;
        let (fp, fq) = (f(&p), f(&q));
        for i in 0..3 {
            m[i][j] = (fp[i] - fq[i]) / (2.0 * h);
        }
    }
    det3(&m)
}

proptest! {
    #[test]
    fn shift_jacobian_matches_fd(u in vec3(), dir in unit3(), r in 0.0f64..0.95) {
        let z: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let fd = fd_jacobian(|x| shift_map(&z, x), &u);
        let exact = shift_jacobian(&z, &u).unwrap();
        prop_assert!((fd - exact).abs() < 1e-6, "fd {fd} exact {exact}");
    }

    #[test]
    fn shift_round_trip(u in vec3(), dir in unit3(), r in 0.0f64..0.99) {
        let z: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let w = shift_map(&z, &u);
        let back = shift_map_inverse(&z, &w, None).unwrap();
        for i in 0..3 {
            prop_assert!((back[i] - u[i]).abs() < 1e-10 * (1.0 + u[i].abs()));
        }
    }

    #[test]
    fn pre_post_round_trip(v in vec3(), anchor in vec3(), sigma in unit3(), e in 0.0f64..1.0) {
        let map = PrePostMap::new(e, sigma, anchor).unwrap();
        let vp = map.forward(&v);
        let back = map.inverse(&vp, None).unwrap();
        for i in 0..3 {
            prop_assert!((back[i] - v[i]).abs() < 1e-10 * (1.0 + v[i].abs()));
        }
    }

    #[test]
    fn pre_post_jacobian_matches_fd(v in vec3(), anchor in vec3(), sigma in unit3(), e in 0.0f64..1.0) {
        let map = PrePostMap::new(e, sigma, anchor).unwrap();
        let fd = fd_jacobian(|x| map.forward(x), &v);
        prop_assert!((fd - map.jacobian(&v).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn cone_maps_into_image_cone(u in vec3(), sigma in unit3(), e in 0.0f64..1.0, gamma in -0.9f64..0.9) {
        prop_assume!(in_cone(&u, &sigma, gamma));
        let map = PrePostMap::new(e, sigma.clone(), vec![0.0; 3]).unwrap();
        let w = map.forward(&u);
        prop_assert!(in_cone(&w, &sigma, omega_e(e, gamma)));
    }

    #[test]
    fn coordinate_interpolation_exact(vp in vec3(), vs in vec3(), sigma in unit3(), e in 0.0f64..1.0, e2 in 0.0f64..1.0, t in 0.0f64..=1.0) {
        let out = coordinate_interpolation(e, e2, t, &vp, &vs, &sigma).unwrap();
        let (lo, hi) = if e <= e2 { (e, e2) } else { (e2, e) };
        prop_assert!(out.e_doubleprime >= lo - 1e-12 && out.e_doubleprime <= hi + 1e-12);
    }
}

#[test]
fn unit_z_not_invertible_behind() {
    assert!(shift_map_inverse(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], None).is_err());
}

#[test]
fn gamma_outside_image_cone_rejected() {
    assert!(shift_map_inverse(&[0.5, 0.0, 0.0], &[-1.0, 0.1, 0.0], Some(0.2)).is_err());
}

#[test]
fn vector_interpolation_exact_along_sigma() {
    use granular_core::geometry::restitution_interpolation_residual;
    let sigma = [0.0, 0.6, 0.8];
    let vs = [0.3, -0.2, 0.1];
    let vp: Vec<f64> = vs.iter().zip(&sigma).map(|(a, s)| a + 1.7 * s).collect();
    let out = restitution_interpolation_residual(0.2, 0.9, 0.35, &vp, &vs, &sigma).unwrap();
    assert!(out.residual < 1e-10, "{out:?}");
}
