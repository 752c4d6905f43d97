use mmfusion::fusion::{fit_late_fusion, modality_importance, BranchSpec, FusionNet, FusionNetSpec};
use mmfusion::nn::{Activation, DenseLayerSpec, Matrix, Mlp, Network};
use mmfusion::postproc::{decimal_scale, min_max_scale, std_ratio_scale, LabelStats};
use mmfusion::Modality;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn spread(v: &[f64]) -> bool {
    v.iter().any(|x| *x != v[0])
}

fn std_pop(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn affine_rss(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (my + slope * (a - mx));
            r * r
        })
        .sum()
}

fn finite_difference_error<N: Network>(net: &mut N, inputs: &[Matrix], targets: &Matrix) -> f64 {
    let refs: Vec<&Matrix> = inputs.iter().collect();
    let (_, analytic) = net.loss_and_gradients(&refs, targets).unwrap();
    let h = 1e-5;
    let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
    for (t, grad) in analytic.iter().enumerate() {
        for (i, a) in grad.iter().enumerate() {
            let orig = net.parameters()[t][i];
            net.parameters_mut()[t][i] = orig + h;
            let up = net.loss_and_gradients(&refs, targets).unwrap().0;
            net.parameters_mut()[t][i] = orig - h;
            let down = net.loss_and_gradients(&refs, targets).unwrap().0;
            net.parameters_mut()[t][i] = orig;
            let n = (up - down) / (2.0 * h);
            diff += (a - n) * (a - n);
            na += a * a;
            nn += n * n;
        }
    }
    let scale = na.sqrt().max(nn.sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

fn jitter<N: Network>(net: &mut N, rng: &mut ChaCha8Rng) {
    for p in net.parameters_mut() {
        for v in p.iter_mut() {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, normals(rng, rows * cols)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_max_hits_label_range(y in prop::collection::vec(-1e3f64..1e3, 2..100), lo in -2.0f64..1.0, width in 0.01f64..3.0) {
        prop_assume!(spread(&y));
        let stats = LabelStats::new(lo, lo + width, 0.5).unwrap();
        let out = min_max_scale(&y, &stats).unwrap();
        let mn = out.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((mn - stats.min).abs() <= 1e-10);
        prop_assert!((mx - stats.max).abs() <= 1e-10);
    }

    #[test]
    fn std_ratio_matches_label_spread(y in prop::collection::vec(-50.0f64..50.0, 2..100), sigma in 0.01f64..5.0) {
        prop_assume!(std_pop(&y) > 1e-6);
        let stats = LabelStats::new(-1.0, 1.0, sigma).unwrap();
        let out = std_ratio_scale(&y, &stats).unwrap();
        prop_assert!((std_pop(&out) - sigma).abs() <= 1e-10 * sigma);
    }

    #[test]
    fn decimal_is_minimal(y in prop::collection::vec(-1e6f64..1e6, 1..50), exp in -8i32..8) {
        let y: Vec<f64> = y.iter().map(|v| v * 10f64.powi(exp)).collect();
        prop_assume!(y.iter().any(|v| *v != 0.0));
        let (out, _) = decimal_scale(&y).unwrap();
        let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(peak < 1.0);
        prop_assert!(10.0 * peak >= 1.0);
    }

    #[test]
    fn late_fit_no_worse_than_any_single_modality(seed in any::<u64>(), n in 8usize..200, k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold = normals(&mut rng, n);
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let w: f64 = rng.gen_range(-1.0..1.0);
                let noise = normals(&mut rng, n);
                gold.iter().zip(noise).map(|(g, e)| w * g + e).collect()
            })
            .collect();
        let preds: Vec<(Modality, &[f64])> = Modality::ALL.iter().copied().zip(cols.iter().map(|c| c.as_slice())).collect();
        let model = fit_late_fusion(&preds, &gold).unwrap();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let rss = model.residual_sum_of_squares(&refs, &gold).unwrap();
        for c in &cols {
            let single = affine_rss(c, &gold);
            prop_assert!(rss <= single * (1.0 + 1e-9) + 1e-12, "{} > {}", rss, single);
        }
        if let Ok(imp) = modality_importance(&model) {
            prop_assert!((imp.iter().sum::<f64>() - 100.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn mlp_gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rng.gen_range(1..=16);
        let depth = rng.gen_range(1..=3);
        let mut specs = Vec::new();
        let mut width = input;
        for l in 0..depth {
            let last = l + 1 == depth;
            let out = if last { rng.gen_range(1..=2) } else { rng.gen_range(1..=16) };
            let act = if last || rng.gen_bool(0.3) { Activation::Linear } else { Activation::Relu };
            specs.push(DenseLayerSpec::new(width, out, act).unwrap());
            width = out;
        }
        let mut net = Mlp::new(input, &specs, &mut rng).unwrap();
        jitter(&mut net, &mut rng);
        let batch = rng.gen_range(1..=5);
        let x = random_matrix(&mut rng, batch, input);
        let y = random_matrix(&mut rng, batch, width);
        let err = finite_difference_error(&mut net, &[x], &y);
        prop_assert!(err <= 1e-4, "relative error {}", err);
    }

    #[test]
    fn fused_gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = FusionNetSpec {
            branches: Modality::ALL
                .iter()
                .map(|&m| BranchSpec {
                    modality: m,
                    input_dim: rng.gen_range(1..=8),
                    widths: (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(1..=8)).collect(),
                })
                .collect(),
            fusion_widths: (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(1..=8)).collect(),
            hidden_activation: Activation::Relu,
        };
        let mut net = FusionNet::new(spec, rng.gen()).unwrap();
        jitter(&mut net, &mut rng);
        let batch = rng.gen_range(1..=5);
        let xs: Vec<Matrix> = net.input_dims().iter().map(|&d| random_matrix(&mut rng, batch, d)).collect();
        let y = random_matrix(&mut rng, batch, 1);
        let err = finite_difference_error(&mut net, &xs, &y);
        prop_assert!(err <= 1e-4, "relative error {}", err);
    }

    #[test]
    fn forward_is_pure_and_compositional(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = FusionNetSpec {
            branches: Modality::ALL
                .iter()
                .map(|&m| BranchSpec::two_layer(m, rng.gen_range(1..=20), rng.gen_range(1..=10), rng.gen_range(1..=10)))
                .collect(),
            fusion_widths: vec![rng.gen_range(1..=10)],
            hidden_activation: Activation::Relu,
        };
        let net = FusionNet::new(spec, rng.gen()).unwrap();
        let before = net.clone();
        let dims = net.input_dims();
        let (a, v, t) = (normals(&mut rng, dims[0]), normals(&mut rng, dims[1]), normals(&mut rng, dims[2]));
        let first = net.forward_fused(&a, &v, &t).unwrap();
        let second = net.forward_fused(&a, &v, &t).unwrap();
        prop_assert_eq!(first.to_bits(), second.to_bits());
        prop_assert_eq!(&net, &before);

        let b = net.branches();
        let mut h = b[0].forward(&a).unwrap();
        h.extend(b[1].forward(&v).unwrap());
        h.extend(b[2].forward(&t).unwrap());
        prop_assert_eq!(net.trunk().forward(&h).unwrap()[0].to_bits(), first.to_bits());
    }
}
