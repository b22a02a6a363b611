//! Codec exactness, rate control and robustness.

mod common;

use ctam_core::codec::entropy::{BlockDecoder, BlockEncoder, MAX_SYMBOL};
use ctam_core::codec::range_coder::{Prob, RangeDecoder, RangeEncoder};
use ctam_core::codec::{decode, decode_with_limit, encode, rd_sweep, Gamma, Preset};
use ctam_core::guidance::GuidanceMap;
use ctam_core::metrics::psnr;
use ctam_core::{synth, RgbImage};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn million_random_decisions_round_trip() {
    let mut r = common::rng(1);
    const N: usize = 1_000_000;
    const CTX: usize = 64;
    let skew: Vec<f64> = (0..CTX).map(|_| r.random::<f64>()).collect();
    let seq: Vec<(u8, bool)> = (0..N)
        .map(|_| {
            let c = r.random_range(0..=CTX);
            // index CTX means bypass
            let p = if c == CTX { 0.5 } else { skew[c] };
            (c as u8, r.random_bool(p))
        })
        .collect();
    let mut probs = [Prob::default(); CTX];
    let mut enc = RangeEncoder::new();
    for &(c, b) in &seq {
        if usize::from(c) == CTX {
            enc.encode_bypass(b);
        } else {
            enc.encode(&mut probs[usize::from(c)], b);
        }
    }
    let bytes = enc.finish();
    let mut probs = [Prob::default(); CTX];
    let mut dec = RangeDecoder::new(&bytes, 0).unwrap();
    for (i, &(c, b)) in seq.iter().enumerate() {
        let got = if usize::from(c) == CTX { dec.decode_bypass() } else { dec.decode(&mut probs[usize::from(c)]) };
        assert_eq!(got.unwrap(), b, "decision {i}");
    }
    assert!(dec.is_exhausted());
}

fn symbol() -> impl Strategy<Value = i32> {
    prop_oneof![
        6 => Just(0),
        3 => -20i32..=20,
        1 => -MAX_SYMBOL / 2..=MAX_SYMBOL / 2,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn block_sequences_round_trip(
        blocks in prop::collection::vec((0usize..3, prop::collection::vec(symbol(), 64)), 1..40)
    ) {
        let blocks: Vec<(usize, [i32; 64])> = blocks.into_iter().map(|(c, v)| (c, v.try_into().unwrap())).collect();
        let mut enc = BlockEncoder::new();
        for (c, b) in &blocks {
            enc.encode_block(*c, b);
        }
        let bytes = enc.finish();
        let mut dec = BlockDecoder::new(&bytes, 0).unwrap();
        for (c, b) in &blocks {
            prop_assert_eq!(&dec.decode_block(*c).unwrap(), b);
        }
        prop_assert!(dec.finish().is_ok());
    }

    #[test]
    fn mutated_streams_never_panic(seed in any::<u64>(), flips in prop::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
        let img = common::random_image(seed, 24, 16);
        let m = GuidanceMap::new(2, 2, vec![1, 0, -1, 0], 3).unwrap();
        let mut bs = encode(&img, Preset::new(5).unwrap(), Gamma::default(), Some(&m)).unwrap().bitstream;
        for (pos, v) in flips {
            let i = pos % bs.len();
            bs[i] ^= v | 1;
        }
        let _ = decode_with_limit(&bs, 1 << 16);
    }
}

#[test]
fn hundred_images_three_presets_exact_and_deterministic() {
    let r = common::codec::exactness_corpus();
    assert_eq!(r.mismatches, 0);
    assert_eq!(r.nondeterministic, 0);
    assert_eq!(r.digest, common::codec::golden_digest(r.digest));
}

#[test]
fn region_rate_and_distortion_follow_levels() {
    for gamma in [1.5, 2.0, 4.0] {
        let [plus, zero, minus] = common::codec::region_costs(gamma, 4);
        assert!(plus.0 >= zero.0 && zero.0 >= minus.0, "bits at gamma {gamma}: {plus:?} {zero:?} {minus:?}");
        assert!(plus.1 <= zero.1 && zero.1 <= minus.1, "mse at gamma {gamma}: {plus:?} {zero:?} {minus:?}");
    }
}

#[test]
fn rd_curves_on_natural_images() {
    let presets: Vec<Preset> = Preset::all().collect();
    for seed in 0..5 {
        let img = synth::image(synth::Pattern::Natural, 64, 64, 500 + seed);
        let pts = rd_sweep(&img, &presets, Gamma::default(), None).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].bpp > w[0].bpp, "seed {seed}: {pts:?}");
            assert!(w[1].quality >= w[0].quality, "seed {seed}: {pts:?}");
        }
    }
    let flat = RgbImage::filled(64, 64, [40, 200, 120]);
    let pts = rd_sweep(&flat, &presets, Gamma::default(), None).unwrap();
    assert!(pts.last().unwrap().quality >= 50.0);
}

#[test]
fn decoded_images_are_near_fixed_points() {
    for seed in 0..5 {
        let img = synth::image(synth::Pattern::ALL[seed as usize % 5], 40, 40, seed);
        for p in [2u8, 6] {
            let p = Preset::new(p).unwrap();
            let once = decode(&encode(&img, p, Gamma::default(), None).unwrap().bitstream).unwrap().image;
            let twice = decode(&encode(&once, p, Gamma::default(), None).unwrap().bitstream).unwrap().image;
            let worst = once.data().iter().zip(twice.data()).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
            assert!(worst <= 1, "seed {seed} preset {}: {worst}", p.index());
        }
    }
}

#[test]
fn random_guidance_maps_round_trip() {
    let mut r = common::rng(99);
    for _ in 0..50 {
        let (rows, cols) = (r.random_range(1..10usize), r.random_range(1..10usize));
        let five = r.random_bool(0.5);
        let lim = if five { 2 } else { 1 };
        let levels = (0..rows * cols).map(|_| r.random_range(-lim..=lim)).collect();
        let m = GuidanceMap::new(rows, cols, levels, if five { 5 } else { 3 }).unwrap();
        let img = common::random_image(r.random(), 32, 24);
        let out = encode(&img, Preset::new(3).unwrap(), Gamma::new(1.5).unwrap(), Some(&m)).unwrap();
        let d = decode(&out.bitstream).unwrap();
        assert_eq!(d.guidance.as_ref(), Some(&m));
        assert_eq!(d.symbols, out.symbols);
        assert!(psnr(&img, &d.image).unwrap() > 10.0);
    }
}
