use gridsync::dqframe::*;
use gridsync::poly::Poly;
use gridsync::C64;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = RationalTransfer> {
    (prop::collection::vec(-2.0..2.0f64, 1..4), prop::collection::vec(-2.0..2.0f64, 0..3), 0.5..2.0f64).prop_map(
        |(num, den_tail, lead)| {
            let mut den = vec![lead];
            den.extend(den_tail);
            RationalTransfer::new(Poly::real(&num), Poly::real(&den), Unit::Dimensionless).unwrap()
        },
    )
}

fn dq_matrix() -> impl Strategy<Value = TransferMatrix2> {
    [rational(), rational(), rational(), rational()]
        .prop_map(|[a, b, c, d]| TransferMatrix2::new([[a, b], [c, d]], Frame::Dq).unwrap())
}

fn probe() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, 5.0..50.0f64).prop_map(|(re, im)| C64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dq_to_dqpm_and_back_is_identity(g in dq_matrix(), s in probe()) {
        let pm = model_to_dqpm(&g).unwrap();
        let back = model_from_dqpm(&pm).unwrap();
        let (a, b) = (g.eval(s), back.eval(s));
        let scale = g.norm_at(s).max(1.0);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((a[i][j] - b[i][j]).norm() / scale < 1e-12);
            }
        }
    }

    #[test]
    fn dqpm_models_are_mirrored(g in dq_matrix()) {
        let pm = model_to_dqpm(&g).unwrap();
        prop_assert!(pm.mirror_error() < 1e-12);
    }

    #[test]
    fn signal_round_trip(d in -10.0..10.0f64, q in -10.0..10.0f64) {
        let (p, m) = signal_to_dqpm(d, q);
        prop_assert_eq!(p, m.conj());
        let (d2, q2) = signal_from_dqpm(p, m);
        prop_assert!((d2 - d).abs() < 1e-12 && (q2 - q).abs() < 1e-12);
    }

    #[test]
    fn frame_rotation_identities(vd in -2.0..2.0f64, vq in -2.0..2.0f64, id in -2.0..2.0f64, iq in -2.0..2.0f64) {
        let op = OperatingPoint::new(vd, vq, id, iq);
        let (vhd, vhq) = frame_rotation(&op, signal_to_dqpm(vd, vq)).unwrap().dq();
        let (ihd, ihq) = frame_rotation(&op, signal_to_dqpm(id, iq)).unwrap().dq();
        prop_assert!((vhq + vd).abs() < 1e-12);
        prop_assert!((vhd - vq).abs() < 1e-12);
        prop_assert!((ihd - iq).abs() < 1e-12);
        prop_assert!((ihq + id).abs() < 1e-12);
    }

    #[test]
    fn roots_of_products_recovered(
        roots in prop::collection::vec((0.2..5.0f64, -std::f64::consts::PI..std::f64::consts::PI), 1..=12),
    ) {
        let r: Vec<C64> = roots.iter().map(|&(m, a)| C64::from_polar(m, a)).collect();
        for i in 0..r.len() {
            for j in 0..i {
                prop_assume!((r[i] - r[j]).norm() > 0.3);
            }
        }
        let got = Poly::from_roots(&r).roots().unwrap();
        prop_assert_eq!(got.len(), r.len());
        let mut used = vec![false; got.len()];
        for want in &r {
            let (k, e) = got
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, z)| (k, (z - want).norm() / want.norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[k] = true;
            prop_assert!(e < 1e-8, "root {want} recovered with relative error {e:e}");
        }
    }
}

#[test]
fn complex_dq_coefficients_have_no_dqpm_form() {
    let g = RationalTransfer::gain(C64::new(0.0, 1.0), Unit::Dimensionless);
    let z = RationalTransfer::zero(Unit::Dimensionless);
    let m = TransferMatrix2::new([[g, z.clone()], [z.clone(), z]], Frame::Dq).unwrap();
    assert!(model_to_dqpm(&m).is_err());
}
