//! Randomized invariance properties of the slicing losses: which input
//! reorderings each term must ignore, nonnegativity, the self-distance
//! fixed point, and agreement between the value and gradient entry points.

use ndarray::Array3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slicetex::sw::{
    slicing_loss, slicing_loss_grad, slicing_loss_with_plan, sw1d, sw1d_interp, FeatureStack,
    LossWeights, SliceCounts, SlicePlan,
};

const H: usize = 2;
const W: usize = 3;
const N: usize = 4;

fn stack_from(vals: &[f64]) -> FeatureStack<f64> {
    let data = Array3::from_shape_vec((H, W, N), vals.to_vec()).unwrap();
    FeatureStack::new(vec![("f".to_string(), data)]).unwrap()
}

fn vals_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, H * W * N)
}

fn permute_pixels(vals: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; vals.len()];
    for (dst, &src) in perm.iter().enumerate() {
        out[dst * N..(dst + 1) * N].copy_from_slice(&vals[src * N..(src + 1) * N]);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_term_ignores_pixel_order(
        a in vals_strategy(),
        b in vals_strategy(),
        perm in Just((0..H * W).collect::<Vec<usize>>()).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        // The channel term treats pixels as an unordered cloud, so shuffling
        // pixel positions in either input cannot move the loss.
        let sa = stack_from(&a);
        let sb = stack_from(&b);
        let weights = LossWeights::channel_only(&["f"]);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let plan = SlicePlan::draw(&sa, &weights, &SliceCounts::default(), &mut r).unwrap();
        let base = slicing_loss_with_plan(&sa, &sb, &weights, &plan).unwrap();
        let shuffled_a = stack_from(&permute_pixels(&a, &perm));
        let shuffled_b = stack_from(&permute_pixels(&b, &perm));
        let moved_a = slicing_loss_with_plan(&shuffled_a, &sb, &weights, &plan).unwrap();
        let moved_b = slicing_loss_with_plan(&sa, &shuffled_b, &weights, &plan).unwrap();
        prop_assert!((moved_a - base).abs() <= 1e-12 + 1e-10 * base.abs());
        prop_assert!((moved_b - base).abs() <= 1e-12 + 1e-10 * base.abs());
    }

    #[test]
    fn height_term_ignores_column_and_channel_order(
        a in vals_strategy(),
        b in vals_strategy(),
        perm_w in Just((0..W).collect::<Vec<usize>>()).prop_shuffle(),
        perm_n in Just((0..N).collect::<Vec<usize>>()).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        // Height profiles are indexed by (column, channel); permuting either
        // index only reorders the sample set.
        let sa = stack_from(&a);
        let sb = stack_from(&b);
        let weights = LossWeights::height_only(&["f"]);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let plan = SlicePlan::draw(&sa, &weights, &SliceCounts::default(), &mut r).unwrap();
        let base = slicing_loss_with_plan(&sa, &sb, &weights, &plan).unwrap();
        let data = Array3::from_shape_vec((H, W, N), a.clone()).unwrap();
        let moved = Array3::from_shape_fn((H, W, N), |(y, x, c)| {
            data[[y, perm_w[x], perm_n[c]]]
        });
        let sm = FeatureStack::new(vec![("f".to_string(), moved)]).unwrap();
        let loss = slicing_loss_with_plan(&sm, &sb, &weights, &plan).unwrap();
        prop_assert!((loss - base).abs() <= 1e-12 + 1e-10 * base.abs());
    }

    #[test]
    fn combined_loss_is_finite_nonnegative_and_zero_on_itself(
        a in vals_strategy(),
        b in vals_strategy(),
        seed in any::<u64>(),
    ) {
        let sa = stack_from(&a);
        let sb = stack_from(&b);
        let weights = LossWeights::uniform(&["f"], &["f"]);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let loss = slicing_loss(&sa, &sb, &weights, &mut r).unwrap();
        prop_assert!(loss.is_finite());
        prop_assert!(loss >= 0.0);
        let self_loss = slicing_loss(&sa, &sa, &weights, &mut r).unwrap();
        prop_assert_eq!(self_loss, 0.0);
    }

    #[test]
    fn gradient_entry_point_agrees_with_the_value_and_is_symmetric(
        a in vals_strategy(),
        b in vals_strategy(),
        seed in any::<u64>(),
    ) {
        let sa = stack_from(&a);
        let sb = stack_from(&b);
        let weights = LossWeights::uniform(&["f"], &["f"]);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let plan = SlicePlan::draw(&sa, &weights, &SliceCounts::default(), &mut r).unwrap();
        let value = slicing_loss_with_plan(&sa, &sb, &weights, &plan).unwrap();
        let (from_grad, grads) = slicing_loss_grad(&sa, &sb, &weights, &plan).unwrap();
        prop_assert!((from_grad - value).abs() <= 1e-12 + 1e-10 * value.abs());
        prop_assert_eq!(grads.len(), 1);
        let swapped = slicing_loss_with_plan(&sb, &sa, &weights, &plan).unwrap();
        prop_assert!((swapped - value).abs() <= 1e-12 + 1e-10 * value.abs());
        // At the global minimum the sorted lists coincide pairwise, so the
        // scattered gradient must vanish identically.
        let (zero_loss, zero_grads) = slicing_loss_grad(&sa, &sa, &weights, &plan).unwrap();
        prop_assert_eq!(zero_loss, 0.0);
        prop_assert!(zero_grads[0].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn interp_distance_is_symmetric_and_reduces_to_exact(
        p in prop::collection::vec(-10.0f64..10.0, 1..12),
        q in prop::collection::vec(-10.0f64..10.0, 1..12),
    ) {
        let pq = sw1d_interp(&p, &q).unwrap();
        let qp = sw1d_interp(&q, &p).unwrap();
        prop_assert_eq!(pq, qp);
        prop_assert!(pq >= 0.0);
        if p.len() == q.len() {
            prop_assert_eq!(pq, sw1d(&p, &q).unwrap());
        }
    }
}

#[test]
fn height_term_is_sensitive_to_row_order() {
    // Flipping an image vertically preserves every per-pixel statistic but
    // reverses every height profile: the channel term must stay at zero
    // while the height term picks the change up.
    let data = Array3::from_shape_fn((6, 3, 2), |(y, _, c)| y as f64 + 0.1 * c as f64);
    let flipped = Array3::from_shape_fn((6, 3, 2), |(y, x, c)| data[[5 - y, x, c]]);
    let sa = FeatureStack::new(vec![("f".to_string(), data)]).unwrap();
    let sb = FeatureStack::new(vec![("f".to_string(), flipped)]).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let weights = LossWeights::uniform(&["f"], &["f"]);
    let plan = SlicePlan::draw(&sa, &weights, &SliceCounts::default(), &mut r).unwrap();
    let channel_only = LossWeights::channel_only(&["f"]);
    let channel = slicing_loss_with_plan(&sa, &sb, &channel_only, &plan).unwrap();
    assert_eq!(channel, 0.0, "pixel statistics are unchanged by the flip");
    let height_only = LossWeights::height_only(&["f"]);
    let height = slicing_loss_with_plan(&sa, &sb, &height_only, &plan).unwrap();
    assert!(
        height > 1.0,
        "reversed profiles should register strongly, got {height}"
    );
}
