//! Attention-analysis properties against brute-force oracles.

mod common;

use ctam_core::analysis::{
    attention_distances, inflow_outflow, layer_similarity, pca_project, segment_stages, PatchGrid,
};
use ctam_core::codec::{decode, encode, Gamma, Preset};
use ctam_core::vit::Capture;
use ctam_core::{synth, Tensor};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn stochastic(n: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(0.001f64..1.0, n * n).prop_map(move |mut v| {
        for r in 0..n {
            let s: f64 = v[r * n..(r + 1) * n].iter().sum();
            v[r * n..(r + 1) * n].iter_mut().for_each(|x| *x /= s);
        }
        Tensor::new(vec![n, n], v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distances_match_brute_force(a in stochastic(25)) {
        let grid = PatchGrid::new(5, 5);
        let (avg, top) = attention_distances(&a, grid).unwrap();
        let (bavg, btop) = common::oracles::brute_force(&a, 5, 5);
        prop_assert!((avg - bavg).abs() < 1e-12);
        prop_assert!((top - btop).abs() < 1e-12);
        prop_assert!(avg <= grid.diagonal() && top <= grid.diagonal());
    }

    #[test]
    fn flow_is_invariant_to_positive_scaling(
        a in stochastic(9),
        row_scale in prop::collection::vec(0.01f64..100.0, 9),
        col_scale in prop::collection::vec(0.01f64..100.0, 9),
    ) {
        let base = inflow_outflow(&a, 0).unwrap();
        let rows = Tensor::new(vec![9, 9], (0..81).map(|i| a.data()[i] * row_scale[i / 9]).collect()).unwrap();
        let cols = Tensor::new(vec![9, 9], (0..81).map(|i| a.data()[i] * col_scale[i % 9]).collect()).unwrap();
        prop_assert_eq!(&inflow_outflow(&rows, 0).unwrap().inflow, &base.inflow);
        prop_assert_eq!(&inflow_outflow(&cols, 0).unwrap().outflow, &base.outflow);
    }

    #[test]
    fn stage_boundaries_are_ordered(d in prop::collection::vec(0.0f64..5.0, 4..24)) {
        let r = segment_stages(&d).unwrap();
        prop_assert!(r.s <= r.min_layer && r.min_layer <= r.t && r.t < d.len());
    }
}

#[test]
fn uniform_two_by_two_closed_form() {
    let a = Tensor::full(&[4, 4], 0.25);
    let (avg, top) = attention_distances(&a, PatchGrid::new(2, 2)).unwrap();
    let expect = (2.0 + 2f64.sqrt()) / 4.0;
    assert!((avg - expect).abs() < 1e-12);
    assert!((top - expect).abs() < 1e-12);
}

#[test]
fn isotropic_gaussian_has_even_explained_variance() {
    let mut r = common::rng(1000);
    let data: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut r)).collect();
    let t = Tensor::new(vec![1000, 3], data).unwrap();
    let p = pca_project(&t, 2).unwrap();
    let third = 1.0 - p.explained.iter().sum::<f64>();
    for share in p.explained.iter().chain([third].iter()) {
        assert!((share - 1.0 / 3.0).abs() < 0.1, "{:?}", p.explained);
    }
    assert_eq!(pca_project(&t, 2).unwrap(), p);
}

#[test]
fn rank_k_data_reconstructs() {
    let mut r = common::rng(3);
    let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let mut rows = Vec::new();
    for _ in 0..40 {
        let (a, b): (f64, f64) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        rows.extend((0..6).map(|j| 0.5 + a * basis[0][j] + b * basis[1][j]));
    }
    let t = Tensor::new(vec![40, 6], rows).unwrap();
    let p = pca_project(&t, 2).unwrap();
    for (i, row) in p.reconstruct().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((v - t.at(i, j)).abs() < 1e-6);
        }
    }
}

#[test]
fn compression_dips_similarity_before_the_last_layer() {
    let model = common::toy_model(8);
    let img = synth::image(synth::Pattern::Natural, 32, 32, 12);
    let bs = encode(&img, Preset::new(0).unwrap(), Gamma::default(), None).unwrap().bitstream;
    let dec = decode(&bs).unwrap().image;
    let a = model.forward(&img.to_tensor(), Capture::all()).unwrap();
    let b = model.forward(&dec.to_tensor(), Capture::all()).unwrap();
    let prof = layer_similarity(&a, &b).unwrap();
    let last = *prof.per_layer.last().unwrap();
    assert!(last < 1.0);
    assert!(last > prof.per_layer[prof.min_layer()], "{:?}", prof.per_layer);
}
