use super::*;
use crate::nn::{finite_diff_grad, mse_grad, mse_loss};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::distributions::{Distribution, Uniform};

fn cfg(variant: Variant, stages: usize, width: usize) -> ArchConfig {
    ArchConfig {
        variant,
        width,
        bands: doubling_bands(2.0, stages),
        ..ArchConfig::default()
    }
}

fn probe(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(-1.0, 1.0);
    Array2::from_shape_fn((n, 2), |_| u.sample(&mut rng))
}

fn sin_mlp_scalar(layers: &[DenseLayer], omega: f64, x: &[f64]) -> Vec<f64> {
    // first layer unscaled, hidden scaled, last linear
    let mut h = x.to_vec();
    let last = layers.len() - 1;
    for (k, l) in layers.iter().enumerate() {
        let mut z = vec![0.0; l.out_dim()];
        for r in 0..l.out_dim() {
            let mut acc = l.bias()[r];
            for c in 0..l.in_dim() {
                acc += l.weights()[r * l.in_dim() + c] * h[c];
            }
            z[r] = match k {
                0 => acc.sin(),
                k if k == last => acc,
                _ => (omega * acc).sin(),
            };
        }
        h = z;
    }
    h
}

#[test]
fn first_layer_weights_respect_bands() {
    let c = ArchConfig { bands: vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0], ..ArchConfig::default() };
    let net = init_mrnet(&c, 9).unwrap();
    assert_eq!(net.num_stages(), 7);
    for (st, b) in net.stages().iter().zip(&c.bands) {
        assert!(st.first().weights().iter().all(|w| w.abs() < *b));
        assert!(st.first().bias().iter().all(|&v| v == 0.0));
        assert_eq!(st.band_limit, *b);
        assert_eq!(st.alpha, 1.0);
        assert!(!st.frozen);
    }
}

#[test]
fn band_sampler_approaches_but_never_exceeds_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layer = DenseLayer::uniform(2, 50_000, 4.0, 0.0, &mut rng);
    let max = layer.weights().iter().fold(0.0f64, |m, w| m.max(w.abs()));
    assert!(max < 4.0 && max > 3.999, "{max}");
}

#[test]
fn init_is_deterministic() {
    let c = cfg(Variant::M, 3, 8);
    assert_eq!(init_mrnet(&c, 42).unwrap(), init_mrnet(&c, 42).unwrap());
    assert_ne!(init_mrnet(&c, 42).unwrap(), init_mrnet(&c, 43).unwrap());
}

#[test]
fn init_rejects_bad_configs() {
    let mut c = cfg(Variant::L, 3, 8);
    c.bands = vec![4.0, 4.0, 8.0];
    assert!(init_mrnet(&c, 0).is_err());
    c.bands = vec![];
    assert!(init_mrnet(&c, 0).is_err());
    let mut c = cfg(Variant::M, 2, 8);
    c.hidden_layers = 0;
    assert!(init_mrnet(&c, 0).is_err());
    let mut c = cfg(Variant::S, 2, 0);
    assert!(init_mrnet(&c, 0).is_err());
    c.width = 4;
    assert!(init_mrnet(&c, 0).unwrap().stages().iter().all(|s| s.hidden().is_empty()));
}

#[test]
fn zero_linear_layers_give_constant_bias() {
    let mut net = init_mrnet(&cfg(Variant::M, 3, 6), 3).unwrap();
    for i in 0..3 {
        let lin = net.stage_mut(i).layers_mut().last_mut().unwrap();
        lin.weights_mut().fill(0.0);
        lin.bias_mut()[0] = 0.1 * (i + 1) as f64;
    }
    let outs = net.stage_outputs(probe(20, 0).view()).unwrap();
    for (i, g) in outs.details.iter().enumerate() {
        assert!(g.iter().all(|&v| v == 0.1 * (i + 1) as f64));
    }
}

#[test]
fn single_stage_variants_coincide() {
    let m = init_mrnet(&cfg(Variant::M, 1, 8), 5).unwrap();
    let l = MrNet { variant: Variant::L, ..m.clone() };
    let x = probe(30, 1);
    let a = m.forward(x.view(), &[1.0]).unwrap();
    let b = l.forward(x.view(), &[1.0]).unwrap();
    assert_eq!(a, b);
    let layers = m.stage(0).layers();
    for (r, row) in x.rows().into_iter().enumerate() {
        let s = sin_mlp_scalar(layers, 30.0, &row.to_vec());
        assert!((s[0] - a[[r, 0]]).abs() < 1e-12);
    }
}

#[test]
fn two_stage_mnet_matches_scalar_unrolling() {
    for wiring in [Wiring::Concat, Wiring::Add] {
        let c = ArchConfig { wiring, ..cfg(Variant::M, 2, 4) };
        let net = init_mrnet(&c, 17).unwrap();
        let x = [0.3, -0.7];
        let outs = net.stage_outputs(array![[0.3, -0.7]].view()).unwrap();

        let s1 = net.stage(0);
        let first1 = sin_mlp_scalar(&s1.layers()[..1], 30.0, &x);
        let h1 = hidden(&s1.hidden()[0], &first1);
        let g1 = lin(s1.linear(), &h1);
        let s2 = net.stage(1);
        let first2 = sin_mlp_scalar(&s2.layers()[..1], 30.0, &x);
        let input2: Vec<f64> = match wiring {
            Wiring::Concat => first2.iter().chain(&h1).copied().collect(),
            Wiring::Add => first2.iter().zip(&h1).map(|(a, b)| a + b).collect(),
        };
        let h2 = hidden(&s2.hidden()[0], &input2);
        let g2 = lin(s2.linear(), &h2);
        assert!((outs.details[0][[0, 0]] - g1).abs() < 1e-12);
        assert!((outs.details[1][[0, 0]] - g2).abs() < 1e-12);
    }

    fn hidden(l: &DenseLayer, x: &[f64]) -> Vec<f64> {
        (0..l.out_dim())
            .map(|r| {
                let z: f64 = (0..l.in_dim()).map(|c| l.weights()[r * l.in_dim() + c] * x[c]).sum::<f64>() + l.bias()[r];
                (30.0 * z).sin()
            })
            .collect()
    }
    fn lin(l: &DenseLayer, x: &[f64]) -> f64 {
        (0..l.in_dim()).map(|c| l.weights()[c] * x[c]).sum::<f64>() + l.bias()[0]
    }
}

#[test]
fn snet_is_a_sum_of_sinusoids() {
    let c = ArchConfig { variant: Variant::S, input_dim: 1, ..cfg(Variant::S, 1, 5) };
    let net = init_mrnet(&c, 4).unwrap();
    let st = net.stage(0);
    let (w1, b1) = (st.first().weights(), st.first().bias());
    let (a, c0) = (st.linear().weights(), st.linear().bias()[0]);
    let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
    let coords = Array2::from_shape_vec((11, 1), xs.clone()).unwrap();
    let out = net.forward(coords.view(), &[1.0]).unwrap();
    for (i, &x) in xs.iter().enumerate() {
        let expect: f64 = c0 + (0..5).map(|k| a[k] * (w1[k] * x + b1[k]).sin()).sum::<f64>();
        assert!((out[[i, 0]] - expect).abs() < 1e-12);
    }
}

#[test]
fn control_weights_select_and_blend() {
    let net = init_mrnet(&cfg(Variant::M, 4, 6), 8).unwrap();
    let x = probe(25, 2);
    let outs = net.stage_outputs(x.view()).unwrap();
    assert!(net.forward(x.view(), &[0.0; 4]).unwrap().iter().all(|&v| v == 0.0));
    assert_eq!(net.forward(x.view(), &[1.0, 0.0, 0.0, 0.0]).unwrap(), outs.details[0]);
    let blend = net.forward(x.view(), &[1.0, 1.0, 0.5, 0.0]).unwrap();
    let expect = &outs.details[0] + &outs.details[1] + &(&outs.details[2] * 0.5);
    assert!(blend.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-14));

    assert!(net.forward(x.view(), &[1.0; 3]).is_err());
    assert!(net.forward(x.view(), &[1.0, 1.5, 0.0, 0.0]).is_err());
    assert!(net.forward(Array2::zeros((3, 3)).view(), &[1.0; 4]).is_err());
}

#[test]
fn zero_weight_stage_ignores_its_parameters() {
    let x = probe(16, 3);
    let w = [1.0, 0.0, 1.0];
    // L-Net: nothing of stage 2 matters.
    let net = init_mrnet(&cfg(Variant::L, 3, 5), 1).unwrap();
    let mut other = net.clone();
    for l in other.stage_mut(1).layers_mut() {
        l.map_params(|v| v * -3.0 + 0.5);
    }
    assert_eq!(net.forward(x.view(), &w).unwrap(), other.forward(x.view(), &w).unwrap());
    // M-Net: only the linear layer of stage 2 is unread.
    let net = init_mrnet(&cfg(Variant::M, 3, 5), 1).unwrap();
    let mut other = net.clone();
    other.stage_mut(1).layers_mut().last_mut().unwrap().map_params(|v| v + 1.0);
    assert_eq!(net.forward(x.view(), &w).unwrap(), other.forward(x.view(), &w).unwrap());
    let mut other = net.clone();
    other.stage_mut(1).layers_mut()[1].map_params(|v| v + 0.01);
    assert_ne!(net.forward(x.view(), &w).unwrap(), other.forward(x.view(), &w).unwrap());
}

#[test]
fn param_counts() {
    let s = init_mrnet(&ArchConfig { width: 4, ..cfg(Variant::S, 1, 4) }, 0).unwrap();
    assert_eq!(s.count_params(), 17);
    let m = init_mrnet(&ArchConfig::default(), 0).unwrap();
    assert_eq!(m.count_params(), 9697 + 6 * 18913);
    assert_eq!(m.count_params(), 123_175);
    let l = init_mrnet(&ArchConfig { variant: Variant::L, ..ArchConfig::default() }, 0).unwrap();
    assert_eq!(l.count_params(), 67_879);
    let a = init_mrnet(&ArchConfig { wiring: Wiring::Add, ..ArchConfig::default() }, 0).unwrap();
    assert_eq!(a.count_params(), 67_879);
}

#[test]
fn model_round_trip_is_bit_exact() {
    for precision in [Precision::F32, Precision::F64] {
        for variant in [Variant::S, Variant::L, Variant::M] {
            let mut net = init_mrnet(&ArchConfig { precision, ..cfg(variant, 3, 7) }, 21).unwrap();
            net.stage_mut(0).frozen = true;
            net.stage_mut(2).alpha = 0.25;
            let bytes = write_model(&net);
            let back = read_model(&bytes).unwrap();
            assert_eq!(back, net);
            assert_eq!(write_model(&back), bytes);
            let scalars = bytes.len() - 13 - 3 * (8 * 3 + 1 + 4 + 1) - 4 * net.layers_total();
            assert_eq!(scalars, net.count_params() * precision.bytes() as usize);
            let x = probe(10, 9);
            let (a, b) = (net.forward(x.view(), &[1.0, 1.0, 0.25]).unwrap(), back.forward(x.view(), &[1.0, 1.0, 0.25]).unwrap());
            assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

impl MrNet {
    fn layers_total(&self) -> usize {
        self.stages.iter().map(|s| s.layers().len()).sum()
    }
}

#[test]
fn model_file_errors_are_distinct() {
    let net = init_mrnet(&cfg(Variant::M, 2, 4), 2).unwrap();
    let bytes = write_model(&net);
    assert!(matches!(read_model(&bytes[..bytes.len() - 3]), Err(Error::Truncated { .. })));
    assert!(matches!(read_model(&bytes[..20]), Err(Error::Truncated { .. })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_model(&bad), Err(Error::Format(_))));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(read_model(&bad), Err(Error::Version { found: 9, .. })));
    let mut bad = bytes.clone();
    bad.push(0);
    assert!(matches!(read_model(&bad), Err(Error::Format(_))));
    assert!(matches!(read_model(b"MR"), Err(Error::Format(_))));
}

#[test]
fn model_header_layout() {
    let net = init_mrnet(&ArchConfig { precision: Precision::F32, ..cfg(Variant::L, 2, 300) }, 2).unwrap();
    let b = write_model(&net);
    assert_eq!(&b[..4], b"MRN1");
    assert_eq!(b[4..9], [VERSION, 1, 4, 2, 1]);
    assert_eq!(u16::from_le_bytes([b[9], b[10]]), 300);
    assert_eq!(u16::from_le_bytes([b[11], b[12]]), 2);
    assert_eq!(f64::from_le_bytes(b[13..21].try_into().unwrap()), 2.0);
    assert_eq!(f64::from_le_bytes(b[21..29].try_into().unwrap()), 30.0);
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

#[test]
fn backward_matches_finite_differences_on_two_stage_mnet() {
    let mut net = init_mrnet(&cfg(Variant::M, 2, 6), 31).unwrap();
    let x = probe(5, 4);
    let target = probe(5, 5).slice(s![.., ..1]).to_owned();
    let w = [1.0, 1.0];
    let (out, trace) = net.forward_traced(x.view(), &w).unwrap();
    let grads = net.backward(&trace, mse_grad(out.view(), target.view()).view()).unwrap();
    let fd = finite_diff_grad(&mut net, 1e-6, |n| {
        mse_loss(n.forward(x.view(), &w).unwrap().view(), target.view()).unwrap()
    })
    .unwrap();
    assert_eq!(grads.len(), fd.len());
    let worst = grads.values().zip(fd.values()).map(|(a, b)| rel_err(a, b)).fold(0.0, f64::max);
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn frozen_stages_get_no_gradient() {
    let mut net = init_mrnet(&cfg(Variant::M, 3, 4), 3).unwrap();
    net.stage_mut(0).frozen = true;
    let x = probe(4, 1);
    let (out, trace) = net.forward_traced(x.view(), &[1.0; 3]).unwrap();
    let g = net.backward(&trace, out.view()).unwrap();
    assert!(g.groups[0].is_none());
    assert!(g.groups[1].is_some() && g.groups[2].is_some());
    let zero = net.backward(&trace, Array2::zeros((4, 1)).view()).unwrap();
    assert!(zero.is_zero());
    assert!(net.backward(&trace, Array2::zeros((3, 1)).view()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_weights_equal_sum_of_details(seed in any::<u64>(), variant in 0u8..3, stages in 1usize..4) {
        let net = init_mrnet(&cfg(Variant::from_code(variant).unwrap(), stages, 6), seed).unwrap();
        let x = probe(50, seed ^ 1);
        let outs = net.stage_outputs(x.view()).unwrap();
        let mut sum = Array2::<f64>::zeros((50, 1));
        for g in &outs.details {
            sum += g;
        }
        let f = net.forward(x.view(), &vec![1.0; stages]).unwrap();
        prop_assert!(f.iter().zip(sum.iter()).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn forward_is_lipschitz_in_control_weights(seed in any::<u64>(), w in proptest::collection::vec(0.0f64..=1.0, 3), eps in 0.0f64..0.1) {
        let net = init_mrnet(&cfg(Variant::M, 3, 5), seed).unwrap();
        let x = probe(20, seed);
        let outs = net.stage_outputs(x.view()).unwrap();
        let bound: f64 = outs.details.iter().map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum::<f64>() * eps;
        let w2: Vec<f64> = w.iter().enumerate().map(|(i, v)| if i % 2 == 0 { (v + eps).min(1.0) } else { (v - eps).max(0.0) }).collect();
        let a = net.forward(x.view(), &w).unwrap();
        let b = net.forward(x.view(), &w2).unwrap();
        let diff = a.iter().zip(b.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        prop_assert!(diff <= bound + 1e-12);
    }
}
