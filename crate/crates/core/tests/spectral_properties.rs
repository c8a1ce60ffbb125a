use enkcf::spectral::{dft2, dft2_pair, hann2, idft2};
use enkcf::RealPlane;
use proptest::prelude::*;

fn plane() -> impl Strategy<Value = RealPlane> {
    (1usize..=12, 1usize..=12).prop_flat_map(|(w, h)| {
        prop::collection::vec(-100.0f64..100.0, w * h)
            .prop_map(move |v| RealPlane::new(w, h, v).unwrap())
    })
}

fn plane_pair() -> impl Strategy<Value = (RealPlane, RealPlane)> {
    (1usize..=10, 1usize..=10).prop_flat_map(|(w, h)| {
        let v = || prop::collection::vec(-10.0f64..10.0, w * h);
        (v(), v()).prop_map(move |(a, b)| {
            (
                RealPlane::new(w, h, a).unwrap(),
                RealPlane::new(w, h, b).unwrap(),
            )
        })
    })
}

proptest! {
    #[test]
    fn inverse_undoes_forward(p in plane()) {
        let back = idft2(&dft2(&p));
        let scale = p.max_abs().max(1e-300);
        for (a, b) in back.values().iter().zip(p.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn energy_is_preserved(p in plane()) {
        let spatial = p.sum_squares();
        let spectral: f64 = dft2(&p).values().iter().map(|c| c.norm_sqr()).sum::<f64>() / p.len() as f64;
        prop_assert!((spatial - spectral).abs() <= 1e-6 * spatial.max(1e-12));
    }

    #[test]
    fn transform_is_linear((p, q) in plane_pair(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mix = RealPlane::from_fn(p.width(), p.height(), |x, y| a * p.get(x, y) + b * q.get(x, y)).unwrap();
        let (fp, fq, fm) = (dft2(&p), dft2(&q), dft2(&mix));
        for ((m, u), v) in fm.values().iter().zip(fp.values()).zip(fq.values()) {
            prop_assert!((m - (u * a + v * b)).norm() < 1e-9);
        }
    }

    #[test]
    fn paired_transform_equals_two_single_ones((p, q) in plane_pair()) {
        let (fp, fq) = dft2_pair(&p, &q).unwrap();
        prop_assert!(fp.max_abs_diff(&dft2(&p)) < 1e-9);
        prop_assert!(fq.max_abs_diff(&dft2(&q)) < 1e-9);
    }

    #[test]
    fn hann_window_is_symmetric_and_bounded(w in 2usize..40, h in 2usize..40) {
        let win = hann2(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let v = win.get(x, y);
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!((v - win.get(w - 1 - x, h - 1 - y)).abs() < 1e-12);
            }
        }
    }
}
