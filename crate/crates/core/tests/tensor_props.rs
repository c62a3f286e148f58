use nirmal_core::tensor::elementwise_relu;
use nirmal_core::{Shape4, Tensor4};
use proptest::prelude::*;

fn shape_strategy() -> impl Strategy<Value = Shape4> {
    (1usize..=8, 1usize..=8, 1usize..=8, 1usize..=8)
        .prop_map(|(b, h, w, c)| Shape4::new(b, h, w, c).unwrap())
}

proptest! {
    #[test]
    fn relu_is_idempotent(data in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let n = data.len();
        let t = Tensor4::from_vec(Shape4::new(1, 1, n, 1).unwrap(), data).unwrap();
        let once = elementwise_relu(&t);
        prop_assert_eq!(elementwise_relu(&once), once.clone());
        prop_assert!(once.data().iter().all(|&v| v >= 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn get_set_round_trip(shape in shape_strategy(), seed in any::<u32>()) {
        let mut t = Tensor4::zeros(shape);
        let idx = |k: u32, n: usize| (seed.wrapping_mul(2654435761).wrapping_add(k) as usize) % n;
        let (b, h, w, c) = (idx(1, shape.batch), idx(2, shape.height), idx(3, shape.width), idx(4, shape.channels));
        t.set(b, h, w, c, f64::from(seed)).unwrap();
        prop_assert_eq!(t.get(b, h, w, c).unwrap(), f64::from(seed));
        prop_assert_eq!(t.sum(), f64::from(seed));
    }

    #[test]
    fn lexicographic_order_is_storage_order(shape in shape_strategy()) {
        let t = Tensor4::from_fn(shape, |b, h, w, c| shape.offset(b, h, w, c) as f64);
        let mut expected = 0.0;
        for b in 0..shape.batch {
            for h in 0..shape.height {
                for w in 0..shape.width {
                    for c in 0..shape.channels {
                        prop_assert_eq!(t.get(b, h, w, c).unwrap(), expected);
                        prop_assert_eq!(t.data()[expected as usize], expected);
                        expected += 1.0;
                    }
                }
            }
        }
    }
}
