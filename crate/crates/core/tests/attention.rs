use nwpcorr::attention::{
    apply_decoder_block, apply_encoder_block, attention_weights, cross_attention, mhsa, AttentionMask, DecoderBlock,
    EncoderBlock, HeadProjections, TargetMixing,
};
use nwpcorr::Mat;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_mat(r: usize, c: usize, g: &mut ChaCha8Rng, scale: f64) -> Mat {
    Mat::from_vec(r, c, (0..r * c).map(|_| g.gen_range(-scale..scale)).collect()).unwrap()
}

/// Mask with at least one valid key.
fn rand_mask(n: usize, g: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| g.gen_bool(0.6)).collect();
    let k = g.gen_range(0..n);
    m[k] = true;
    m
}

struct Case {
    g: ChaCha8Rng,
    dim: usize,
    heads: usize,
    n: usize,
}

fn case(seed: u64) -> Case {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let heads = [1, 2, 4][g.gen_range(0..3)];
    let dim = heads * g.gen_range(1..5);
    let n = g.gen_range(1..12);
    Case { g, dim, heads, n }
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rows_equal(a: &Mat, b: &Mat, rows: impl Iterator<Item = usize>) -> bool {
    rows.into_iter().all(|r| a.row(r) == b.row(r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn masked_keys_have_no_influence(seed in any::<u64>()) {
        let Case { mut g, dim, heads, n } = case(seed);
        let x = rand_mat(n, dim, &mut g, 1.0);
        let valid = rand_mask(n, &mut g);
        let mask = AttentionMask::new(valid.clone()).unwrap();
        let mut y = x.clone();
        for r in (0..n).filter(|&r| !valid[r]) {
            for c in 0..dim {
                y[(r, c)] = g.gen_range(-1e3..1e3);
            }
        }
        let p = HeadProjections::init(dim, heads, &mut g);
        let valid_rows = || (0..n).filter(|&r| valid[r]);
        prop_assert!(rows_equal(&mhsa(&x, &mask, &p).unwrap(), &mhsa(&y, &mask, &p).unwrap(), valid_rows()));
        let q = rand_mat(3, dim, &mut g, 1.0);
        prop_assert_eq!(cross_attention(&q, &x, &mask, &p).unwrap(), cross_attention(&q, &y, &mask, &p).unwrap());
        let block = EncoderBlock::init(dim, heads, 2, &mut g);
        prop_assert!(rows_equal(
            &apply_encoder_block(&x, &mask, &block).unwrap(),
            &apply_encoder_block(&y, &mask, &block).unwrap(),
            valid_rows()
        ));
    }

    #[test]
    fn attention_rows_are_stochastic(seed in any::<u64>()) {
        let Case { mut g, dim, n, .. } = case(seed);
        let q = rand_mat(g.gen_range(1..6), dim, &mut g, 3.0);
        let k = rand_mat(n, dim, &mut g, 3.0);
        let valid = rand_mask(n, &mut g);
        let w = attention_weights(&q, &k, &AttentionMask::new(valid.clone()).unwrap()).unwrap();
        for r in 0..w.rows() {
            let s: f64 = w.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-6);
            for (c, &v) in valid.iter().enumerate() {
                let ok = if v { w[(r, c)] >= 0.0 } else { w[(r, c)] == 0.0 };
                prop_assert!(ok);
            }
        }
    }

    #[test]
    fn self_attention_is_permutation_equivariant(seed in any::<u64>()) {
        let Case { mut g, dim, heads, n } = case(seed);
        let x = rand_mat(n, dim, &mut g, 1.0);
        let valid = rand_mask(n, &mut g);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut g);
        let px = x.select_rows(&perm);
        let pvalid: Vec<bool> = perm.iter().map(|&i| valid[i]).collect();
        let p = HeadProjections::init(dim, heads, &mut g);
        let a = mhsa(&x, &AttentionMask::new(valid).unwrap(), &p).unwrap().select_rows(&perm);
        let b = mhsa(&px, &AttentionMask::new(pvalid).unwrap(), &p).unwrap();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-9);
    }

    #[test]
    fn cross_attention_is_key_permutation_invariant(seed in any::<u64>()) {
        let Case { mut g, dim, heads, n } = case(seed);
        let q = rand_mat(4, dim, &mut g, 1.0);
        let kv = rand_mat(n, dim, &mut g, 1.0);
        let valid = rand_mask(n, &mut g);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut g);
        let pvalid: Vec<bool> = perm.iter().map(|&i| valid[i]).collect();
        let p = HeadProjections::init(dim, heads, &mut g);
        let a = cross_attention(&q, &kv, &AttentionMask::new(valid).unwrap(), &p).unwrap();
        let b = cross_attention(&q, &kv.select_rows(&perm), &AttentionMask::new(pvalid).unwrap(), &p).unwrap();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-9);
    }

    #[test]
    fn masking_equals_deleting(seed in any::<u64>()) {
        let Case { mut g, dim, heads, n } = case(seed);
        let q = rand_mat(3, dim, &mut g, 1.0);
        let kv = rand_mat(n, dim, &mut g, 1.0);
        let valid = rand_mask(n, &mut g);
        let keep: Vec<usize> = (0..n).filter(|&i| valid[i]).collect();
        let p = HeadProjections::init(dim, heads, &mut g);
        let masked = cross_attention(&q, &kv, &AttentionMask::new(valid.clone()).unwrap(), &p).unwrap();
        let deleted = cross_attention(&q, &kv.select_rows(&keep), &AttentionMask::all_valid(keep.len()), &p).unwrap();
        prop_assert!(max_abs_diff(&masked, &deleted) <= 1e-9);

        let block = DecoderBlock::init(dim, heads, 2, &mut g);
        let t = rand_mat(2, dim, &mut g, 1.0);
        let tm = AttentionMask::all_valid(2);
        for mixing in [TargetMixing::Isolated, TargetMixing::Full] {
            let a = apply_decoder_block(&t, &kv, &tm, &AttentionMask::new(valid.clone()).unwrap(), mixing, &block).unwrap();
            let b = apply_decoder_block(&t, &kv.select_rows(&keep), &tm, &AttentionMask::all_valid(keep.len()), mixing, &block).unwrap();
            prop_assert!(max_abs_diff(&a, &b) <= 1e-9);
        }
    }
}
