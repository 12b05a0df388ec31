use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdfc_core::data::{generate_toy_corpus, Corpus, CorpusSpec, Family};
use sdfc_core::eval::{
    ablate_density, ablate_partiality, cumulative_curve, curve_thresholds, eval_completion, eval_csv,
    eval_with_input, test_partial, EvalConfig, InputSpec,
};
use sdfc_core::geometry::retained_count;
use sdfc_core::nn::{NetConfig, SetAbstraction};
use sdfc_core::train::Model;

fn net() -> NetConfig {
    NetConfig {
        latent_dim: 8,
        encoder_widths: vec![8],
        generator_depth: 3,
        generator_width: 8,
        skip_layer: 2,
        set_abstraction: vec![SetAbstraction {
            ratio: 0.25,
            radius: 0.5,
            max_neighbors: 8,
            mlp: vec![8],
        }],
        global_mlp: vec![8],
        head_widths: [8, 4],
        ..NetConfig::default()
    }
}

/// Generator that ignores its input and outputs a negative constant, so the
/// completion is the bounding unit sphere.
fn unit_sphere_model() -> Model {
    let mut m = Model::new(&net(), 0).unwrap();
    for i in 0..m.gen.len() {
        m.gen.value_mut(i).data_mut().fill(0.0);
    }
    let (_, b) = m.generator.output_layer();
    m.gen.value_mut(b).data_mut().fill(-0.5);
    m
}

fn corpus(family: Family) -> Corpus {
    let spec = CorpusSpec {
        count: 3,
        families: vec![family],
        sdf_samples: 2000,
        surface_points: 4000,
        mesh_resolution: 40,
        ..CorpusSpec::default()
    };
    generate_toy_corpus(&spec).unwrap()
}

fn spheres() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let spec = CorpusSpec {
            count: 3,
            families: vec![Family::Ellipsoid],
            ellipsoid_radii: [0.6, 0.6],
            sdf_samples: 2000,
            surface_points: 4000,
            mesh_resolution: 40,
            ..CorpusSpec::default()
        };
        generate_toy_corpus(&spec).unwrap()
    })
}

fn cfg() -> EvalConfig {
    EvalConfig {
        eval_points: 3000,
        resolution: 48,
        ..EvalConfig::default()
    }
}

#[test]
fn sphere_completion_sits_at_the_sampling_floor() {
    let recs: Vec<_> = spheres().records.iter().collect();
    let report = eval_completion(&unit_sphere_model(), &recs, &cfg(), 1).unwrap();
    report.check().unwrap();
    assert_eq!(report.shapes.len(), recs.len());
    // two independent uniform samples of n points on the unit sphere: the
    // squared nearest-neighbour distance is exponential with mean 1/(pi rho),
    // rho = n / (4 pi), so each one-sided term is close to 4/n
    let floor = 4.0 / cfg().eval_points as f64;
    for s in &report.shapes {
        assert!((s.gen_to_gt - floor).abs() < 0.05 * floor, "{s:?}");
        assert!((s.gt_to_gen - floor).abs() < 0.05 * floor, "{s:?}");
        assert!((s.cd - s.gen_to_gt - s.gt_to_gen).abs() < 1e-15);
    }
    let last = report.curve.last().unwrap();
    assert_eq!((last.fraction_gen_to_gt, last.fraction_gt_to_gen), (1.0, 1.0));
}

#[test]
fn gt_to_sphere_matches_radial_deviation() {
    let c = corpus(Family::Capsule);
    let recs: Vec<_> = c.records.iter().collect();
    let report = eval_completion(&unit_sphere_model(), &recs, &cfg(), 2).unwrap();
    for (s, r) in report.shapes.iter().zip(&recs) {
        // radial offset to the unit sphere plus the in-surface sampling floor
        let pts = &r.surface.points;
        let radial = pts
            .iter()
            .map(|p| (1.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).powi(2))
            .sum::<f64>()
            / pts.len() as f64;
        let expected = radial + 4.0 / cfg().eval_points as f64;
        assert!((s.gt_to_gen - expected).abs() < 0.1 * expected, "{} vs {expected}", s.gt_to_gen);
    }
}

#[test]
fn evaluation_is_deterministic_and_seed_dependent() {
    let model = Model::new(&net(), 5).unwrap();
    let recs: Vec<_> = spheres().records.iter().collect();
    let a = eval_completion(&model, &recs, &cfg(), 3).unwrap();
    let b = eval_completion(&model, &recs, &cfg(), 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(eval_csv(&a).lines().count(), 1 + a.shapes.len());
    assert_eq!(a.shapes.len() + a.failures.len(), recs.len());
    let sphere = unit_sphere_model();
    let c = eval_completion(&sphere, &recs, &cfg(), 3).unwrap();
    let d = eval_completion(&sphere, &recs, &cfg(), 4).unwrap();
    assert_ne!(c, d);
}

#[test]
fn density_above_every_cut_size_matches_plain_evaluation() {
    let model = unit_sphere_model();
    let recs: Vec<_> = spheres().records.iter().collect();
    let plain = eval_completion(&model, &recs, &cfg(), 7).unwrap();
    let rows = ablate_density(&model, &recs, &[100, 1_000_000], &cfg(), 7).unwrap();
    assert!(!rows[0].clamped);
    assert_eq!(rows[0].mean_input_points, 100.0);
    assert!(rows[1].clamped);
    assert_eq!(rows[1].cd, plain.mean_cd());
}

#[test]
fn partiality_rows_use_the_requested_ratio() {
    let model = unit_sphere_model();
    let recs: Vec<_> = spheres().records.iter().collect();
    let rows = ablate_partiality(&model, &recs, &[0.3, 1.0], &cfg(), 9).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, ratio) in rows.iter().zip([0.3, 1.0]) {
        let report = eval_with_input(&model, &recs, &cfg(), InputSpec { ratio: Some(ratio), points: None }, 9).unwrap();
        assert!((row.cd - report.mean_cd()).abs() <= 1e-12 * row.cd);
        let n = report.shapes[0].input_points;
        assert_eq!(n, retained_count(ratio, recs[0].surface.len()));
    }
}

#[test]
fn test_partial_sizes() {
    let rec = &spheres().records[0];
    let n = rec.surface.len();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = test_partial(rec, InputSpec { ratio: Some(0.4), points: None }, &mut rng).unwrap();
        assert_eq!(p.len(), retained_count(0.4, n));
        let p = test_partial(rec, InputSpec { ratio: None, points: Some(50) }, &mut rng).unwrap();
        assert_eq!(p.len(), 50);
        let p = test_partial(rec, InputSpec::default(), &mut rng).unwrap();
        assert!(p.len() >= retained_count(0.05, n) && p.len() <= n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(test_partial(rec, InputSpec { ratio: Some(0.0), points: None }, &mut rng).is_err());
}

#[test]
fn curve_extends_past_the_grid() {
    let curve = cumulative_curve(&[0.001, 0.2], &[0.0]);
    assert_eq!(curve.len(), curve_thresholds().len() + 1);
    let last = curve.last().unwrap();
    assert_eq!(last.threshold, 0.2);
    assert_eq!(last.fraction_gen_to_gt, 1.0);
    assert_eq!(curve[curve_thresholds().len() - 1].fraction_gen_to_gt, 0.5);
}

proptest! {
    #[test]
    fn curve_matches_brute_force_count(
        a in prop::collection::vec(0.0f64..0.08, 1..60),
        b in prop::collection::vec(0.0f64..0.04, 1..60),
    ) {
        let curve = cumulative_curve(&a, &b);
        for p in &curve {
            let fa = a.iter().filter(|&&x| x <= p.threshold).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&x| x <= p.threshold).count() as f64 / b.len() as f64;
            prop_assert_eq!(p.fraction_gen_to_gt, fa);
            prop_assert_eq!(p.fraction_gt_to_gen, fb);
        }
        prop_assert!(curve.windows(2).all(|w| w[0].threshold < w[1].threshold));
        let last = curve.last().unwrap();
        prop_assert_eq!((last.fraction_gen_to_gt, last.fraction_gt_to_gen), (1.0, 1.0));
    }
}

