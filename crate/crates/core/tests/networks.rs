use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdfc_core::autodiff::{Graph, ParamStore, Tensor};
use sdfc_core::geometry::dist_sq;
use sdfc_core::nn::{
    farthest_point_sample, Discriminator, DiscriminatorKind, Encoder, Generator, NetConfig,
    SetAbstraction,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| [0; 3].map(|_| r.random_range(-1.0..1.0)))
        .collect()
}

fn small_config() -> NetConfig {
    NetConfig {
        latent_dim: 16,
        encoder_widths: vec![8, 16],
        generator_depth: 6,
        generator_width: 12,
        skip_layer: 4,
        set_abstraction: vec![
            SetAbstraction {
                ratio: 0.25,
                radius: 0.5,
                max_neighbors: 8,
                mlp: vec![8],
            },
            SetAbstraction {
                ratio: 0.5,
                radius: 1.0,
                max_neighbors: 8,
                mlp: vec![8, 12],
            },
        ],
        global_mlp: vec![16],
        head_widths: [8, 4],
        ..NetConfig::default()
    }
}

#[test]
fn latent_dimensions() {
    let pts = random_points(20, 1);
    let (enc, store) = Encoder::new(&NetConfig::default(), &mut rng(0)).unwrap();
    assert_eq!(enc.encode_points(&store, &pts).unwrap().shape(), [1, 64]);
    let (enc, store) = Encoder::new(&NetConfig::full_scale(), &mut rng(0)).unwrap();
    assert_eq!(enc.encode_points(&store, &pts).unwrap().shape(), [1, 512]);
}

#[test]
fn encoder_rejects_empty_cloud() {
    let (enc, store) = Encoder::new(&small_config(), &mut rng(0)).unwrap();
    assert!(enc.encode_points(&store, &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoder_permutation_and_duplication_invariant(n in 1usize..40, seed in 0u64..1000) {
        let (enc, store) = Encoder::new(&small_config(), &mut rng(7)).unwrap();
        let pts = random_points(n, seed);
        let z = enc.encode_points(&store, &pts).unwrap();
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut rng(seed + 1));
        prop_assert_eq!(&enc.encode_points(&store, &shuffled).unwrap(), &z);
        let doubled: Vec<_> = pts.iter().chain(&pts).copied().collect();
        prop_assert_eq!(&enc.encode_points(&store, &doubled).unwrap(), &z);
    }

    #[test]
    fn generator_is_batch_decomposable(n in 2usize..60, split in 1usize..59, seed in 0u64..1000) {
        let split = split.min(n - 1);
        let cfg = small_config();
        let (gen, store) = Generator::new(&cfg, &mut rng(3)).unwrap();
        let mut r = rng(seed);
        let z = Tensor::new(1, 16, (0..16).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let q = random_points(n, seed);
        let joint = gen.evaluate(&store, &z, &q).unwrap();
        let mut parts = gen.evaluate(&store, &z, &q[..split]).unwrap();
        parts.extend(gen.evaluate(&store, &z, &q[split..]).unwrap());
        prop_assert_eq!(joint.len(), n);
        prop_assert_eq!(parts, joint);
    }
}

#[test]
fn generator_with_only_output_bias_is_constant() {
    let cfg = small_config();
    let (gen, mut store) = Generator::new(&cfg, &mut rng(0)).unwrap();
    let (_, out_b) = gen.output_layer();
    for i in 0..store.len() {
        let v = store.value_mut(i);
        let fill = if i == out_b { 0.37 } else { 0.0 };
        v.data_mut().iter_mut().for_each(|x| *x = fill);
    }
    let z = Tensor::full(1, 16, 0.5);
    let d = gen.evaluate(&store, &z, &random_points(10, 4)).unwrap();
    assert!(d.iter().all(|&x| x == 0.37));
}

#[test]
fn generator_rejects_wrong_latent() {
    let cfg = small_config();
    let (gen, store) = Generator::new(&cfg, &mut rng(0)).unwrap();
    assert!(gen.evaluate(&store, &Tensor::zeros(1, 15), &random_points(3, 0)).is_err());
}

#[test]
fn output_layer_starts_small() {
    let cfg = NetConfig::default();
    let (gen, store) = Generator::new(&cfg, &mut rng(0)).unwrap();
    let (w, _) = gen.output_layer();
    let bound = 0.1 / (cfg.generator_width as f64).sqrt();
    assert!(store.value(w).data().iter().all(|x| x.abs() <= bound));
}

#[test]
fn networks_are_deterministic() {
    let cfg = small_config();
    let (gen_a, sa) = Generator::new(&cfg, &mut rng(11)).unwrap();
    let (_, sb) = Generator::new(&cfg, &mut rng(11)).unwrap();
    assert_eq!(sa.to_bytes(), sb.to_bytes());
    let z = Tensor::full(1, 16, 0.1);
    let q = random_points(30, 2);
    assert_eq!(gen_a.evaluate(&sa, &z, &q).unwrap(), gen_a.evaluate(&sa, &z, &q).unwrap());
}

#[test]
fn fps_line_example() {
    let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.25, 0.0, 0.0]];
    assert_eq!(farthest_point_sample(&pts, 3, 0).unwrap(), vec![0, 1, 2]);
    let mut all = farthest_point_sample(&pts, 4, 0).unwrap();
    all.sort();
    assert_eq!(all, vec![0, 1, 2, 3]);
    assert!(farthest_point_sample(&pts, 5, 0).is_err());
}

fn min_pairwise(pts: &[[f64; 3]], idx: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            best = best.min(dist_sq(pts[i], pts[j]));
        }
    }
    best
}

#[test]
fn fps_spreads_better_than_random_subsets() {
    let mut wins = 0;
    let trials = 50;
    for t in 0..trials {
        let pts = random_points(20, 100 + t);
        let fps = farthest_point_sample(&pts, 6, 0).unwrap();
        let mut idx: Vec<usize> = (0..20).collect();
        idx.shuffle(&mut rng(t));
        if min_pairwise(&pts, &fps) >= min_pairwise(&pts, &idx[..6]) {
            wins += 1;
        }
    }
    // greedy max-min is a 2-approximation, not optimal, so a rare loss is allowed
    assert!(wins >= 45, "fps won only {wins}/{trials}");
}

#[test]
fn discriminator_outputs_a_finite_scalar() {
    for kind in [DiscriminatorKind::PointNetPlusPlus, DiscriminatorKind::PointNet] {
        let cfg = NetConfig {
            discriminator: kind,
            ..small_config()
        };
        let (d, store) = Discriminator::new(&cfg, &mut rng(0)).unwrap();
        for k in [1, 2, 7, 64] {
            let xyz = random_points(k, k as u64);
            let field: Vec<f64> = xyz.iter().map(|p| p[0] - 0.2).collect();
            assert!(d.score(&store, &xyz, &field).unwrap().is_finite());
        }
        assert!(d.score(&store, &random_points(3, 0), &[0.0; 2]).is_err());
    }
}

#[test]
fn discriminator_invariant_to_permutations_fixing_the_fps_seed() {
    let mut cfg = small_config();
    for level in &mut cfg.set_abstraction {
        level.max_neighbors = 1000;
    }
    let (d, store) = Discriminator::new(&cfg, &mut rng(5)).unwrap();
    let xyz = random_points(48, 9);
    let field: Vec<f64> = xyz.iter().map(|p| p[1] * p[2] - 0.1).collect();
    let base = d.score(&store, &xyz, &field).unwrap();
    for seed in 0..5 {
        let mut perm: Vec<usize> = (1..48).collect();
        perm.shuffle(&mut rng(seed));
        perm.insert(0, 0);
        let px: Vec<_> = perm.iter().map(|&i| xyz[i]).collect();
        let pf: Vec<_> = perm.iter().map(|&i| field[i]).collect();
        assert_eq!(d.score(&store, &px, &pf).unwrap(), base);
    }
}

#[test]
fn single_global_ball_reduces_to_pointnet() {
    let widths = vec![6, 5];
    let pp_cfg = NetConfig {
        set_abstraction: vec![SetAbstraction {
            ratio: 1e-6,
            radius: 2.5,
            max_neighbors: 1000,
            mlp: widths.clone(),
        }],
        global_mlp: vec![],
        head_widths: [4, 3],
        ..NetConfig::default()
    };
    let pn_cfg = NetConfig {
        discriminator: DiscriminatorKind::PointNet,
        global_mlp: widths,
        ..pp_cfg.clone()
    };
    let (pp, mut pp_store) = Discriminator::new(&pp_cfg, &mut rng(1)).unwrap();
    let (pn, pn_store) = Discriminator::new(&pn_cfg, &mut rng(2)).unwrap();
    assert_eq!(pp_store.scalar_count(), pn_store.scalar_count());
    let xyz = random_points(30, 3);
    // pointnet++ sees coordinates relative to its only centroid, point 0
    copy_params(&pn_store, &mut pp_store);
    let w = pp_store.value(0).clone();
    let b = pp_store.value_mut(1);
    for j in 0..b.cols() {
        let shift: f64 = (0..3).map(|a| xyz[0][a] * w.get(a, j)).sum();
        b.data_mut()[j] += shift;
    }
    let field: Vec<f64> = xyz.iter().map(|p| p[0] * p[0] - 0.3).collect();
    let a = pp.score(&pp_store, &xyz, &field).unwrap();
    let b = pn.score(&pn_store, &xyz, &field).unwrap();
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

fn copy_params(from: &ParamStore, to: &mut ParamStore) {
    for i in 0..from.len() {
        assert_eq!(from.value(i).shape(), to.value(i).shape());
        *to.value_mut(i) = from.value(i).clone();
    }
}

#[test]
fn encoder_gradient_reaches_every_layer() {
    let (enc, store) = Encoder::new(&small_config(), &mut rng(0)).unwrap();
    let mut g = Graph::new();
    let p = store.bind(&mut g);
    let x = g.leaf(Tensor::from_points(&random_points(12, 1)));
    let z = enc.encode(&mut g, &p, x).unwrap();
    let s = g.sum(z).unwrap();
    assert_eq!(g.grad(s, &p, false).unwrap().len(), store.len());
}
