use kinflow::flow::{MadeBlock, Maf};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_block(dim: usize, hidden: usize, seed: u64) -> MadeBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dim).collect();
    // Fisher-Yates with the test's own RNG.
    for i in (1..dim).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut block = MadeBlock::new(dim, hidden, order).unwrap();
    block.randomize(0.6, &mut rng);
    block
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perturbing_x_d_leaves_earlier_heads_alone(
        dim in 1usize..=8,
        hidden in 0usize..=6,
        seed in any::<u64>(),
        delta in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
    ) {
        let block = random_block(dim, hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (mu0, a0) = block.heads(&x);
        let order = block.order().to_vec();
        for (pos, &d) in order.iter().enumerate() {
            let mut xp = x.clone();
            xp[d] += delta;
            let (mu1, a1) = block.heads(&xp);
            // Heads at ordering positions up to and including `pos` see only earlier inputs.
            for &e in &order[..=pos] {
                prop_assert_eq!(mu0[e].to_bits(), mu1[e].to_bits());
                prop_assert_eq!(a0[e].to_bits(), a1[e].to_bits());
            }
        }
    }

    #[test]
    fn forward_of_inverse_is_identity(
        dim in 1usize..=8,
        hidden in 0usize..=8,
        seed in any::<u64>(),
    ) {
        let block = random_block(dim, hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = block.inverse(&u).unwrap();
        let (back, _) = block.forward(&x).unwrap();
        for (a, b) in back.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn thousand_round_trips_per_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for model in 0..8 {
        let dim = 1 + model % 6;
        let block = random_block(dim, model % 5 * 2, model as u64);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (u, _) = block.forward(&x).unwrap();
            let back = block.inverse(&u).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "model {model}: round-trip error {err}");
        }
    }
}

#[test]
fn identity_block_inverse_is_identity() {
    let block = MadeBlock::new(4, 3, vec![0, 1, 2, 3]).unwrap();
    let u = [0.3, -1.0, 2.5, 0.0];
    assert_eq!(block.inverse(&u).unwrap(), u.to_vec());
}

#[test]
fn same_seed_gives_bit_identical_flow() {
    let make = || Maf::new(6, 3, 8, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    let (a, b) = (make(), make());
    let pa: Vec<u64> = a.params().iter().map(|p| p.to_bits()).collect();
    let pb: Vec<u64> = b.params().iter().map(|p| p.to_bits()).collect();
    assert_eq!(pa, pb);
    let mut ra = a.clone();
    let mut rb = b.clone();
    ra.randomize(0.3, &mut ChaCha8Rng::seed_from_u64(5));
    rb.randomize(0.3, &mut ChaCha8Rng::seed_from_u64(5));
    let x = [0.1, -0.4, 1.2, 0.0, 2.0, -1.5];
    assert_eq!(
        ra.log_prob(&x).unwrap().to_bits(),
        rb.log_prob(&x).unwrap().to_bits()
    );
}

#[test]
fn two_dimensional_density_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 401;
    let (lo, hi) = (-10.0, 10.0);
    let h = (hi - lo) / (n - 1) as f64;
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    for _ in 0..3 {
        let mut flow = Maf::identity(2, 2, 4).unwrap();
        flow.randomize(0.3, &mut rng);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [lo + h * i as f64, lo + h * j as f64];
                total += weight(i) * weight(j) * flow.log_prob(&x).unwrap().exp();
            }
        }
        let integral = total * h * h;
        assert!((integral - 1.0).abs() <= 1e-2, "integral {integral}");
    }
}

#[test]
fn log_prob_rejects_wrong_dimension_and_nan() {
    let flow = Maf::identity(3, 1, 0).unwrap();
    assert!(flow.log_prob(&[0.0, 0.0]).is_err());
    assert!(flow.log_prob(&[0.0, f64::NAN, 0.0]).is_err());
}
