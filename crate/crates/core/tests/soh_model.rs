use drtsoh_core::soh::{ModelConfig, SohModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_inputs(seed: u64, steps: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect()
}

fn loss(model: &SohModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let out = model.predict(x).unwrap();
    out.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

#[test]
fn finite_difference_matches_every_parameter() {
    let cfg = ModelConfig::tiny();
    let mut model = SohModel::init(cfg.clone(), 11).unwrap();
    // Larger weights push some pre-activations negative so both SELU
    // branches are exercised.
    model.params_mut().iter_mut().for_each(|p| *p *= 2.5);
    let x = random_inputs(3, 5, cfg.input_dim);
    let y = vec![0.95, 0.9, 0.87, 0.8, 0.72];
    let (out, cache) = model.forward(&x).unwrap();
    let grad = model.backward(&cache, &out, &y).unwrap();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for tensor in model.tensors().to_vec() {
        for i in tensor.range() {
            let mut plus = model.clone();
            plus.params_mut()[i] += h;
            let mut minus = model.clone();
            minus.params_mut()[i] -= h;
            let fd = (loss(&plus, &x, &y) - loss(&minus, &x, &y)) / (2.0 * h);
            let a = grad[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            assert!(
                rel < 1e-5,
                "{} [{}]: analytic {a:e} vs finite difference {fd:e} (rel {rel:e})",
                tensor.name,
                i - tensor.offset
            );
            worst = worst.max(rel);
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn doubling_loss_scale_doubles_gradients() {
    let cfg = ModelConfig::tiny();
    let model = SohModel::init(cfg.clone(), 2).unwrap();
    let x = random_inputs(9, 4, cfg.input_dim);
    let (out, cache) = model.forward(&x).unwrap();
    let dy: Vec<f64> = out.iter().map(|o| o - 0.9).collect();
    let mut g1 = vec![0.0; model.param_count()];
    model.backward_accumulate(&cache, &dy, &mut g1);
    let dy2: Vec<f64> = dy.iter().map(|d| 2.0 * d).collect();
    let mut g2 = vec![0.0; model.param_count()];
    model.backward_accumulate(&cache, &dy2, &mut g2);
    for (a, b) in g1.iter().zip(&g2) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
fn samples_do_not_interact() {
    let cfg = ModelConfig::tiny();
    let model = SohModel::init(cfg.clone(), 5).unwrap();
    let a = random_inputs(1, 5, cfg.input_dim);
    let b = random_inputs(2, 5, cfg.input_dim);
    let run = |batch: &[&Vec<Vec<f64>>]| -> Vec<Vec<f64>> {
        batch.iter().map(|s| model.predict(s).unwrap()).collect()
    };
    let ab = run(&[&a, &b]);
    let ba = run(&[&b, &a]);
    assert_eq!(ab[0], ba[1]);
    assert_eq!(ab[1], ba[0]);
    assert_ne!(ab[0], ab[1]);
}

/// Step-by-step scalar recurrence written against the named tensors only.
fn reference_forward(model: &SohModel, x: &[Vec<f64>]) -> Vec<f64> {
    let cfg = model.config();
    let p = model.params();
    let t = |name: &str| {
        let info = model.tensors().iter().find(|t| t.name == name).unwrap();
        (info.offset, info.rows, info.cols)
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let selu = |v: f64| {
        if v > 0.0 {
            cfg.selu_scale * v
        } else {
            cfg.selu_scale * cfg.selu_alpha * (v.exp() - 1.0)
        }
    };
    let mut seq: Vec<Vec<f64>> = x.to_vec();
    for (l, &hd) in cfg.lstm_hidden.iter().enumerate() {
        let (wo, _, wc) = t(&format!("lstm{l}.w"));
        let (uo, _, _) = t(&format!("lstm{l}.u"));
        let (bo, _, _) = t(&format!("lstm{l}.b"));
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut out = Vec::new();
        for xt in &seq {
            let pre = |gate: usize, k: usize| {
                let row = gate * hd + k;
                let mut s = p[bo + row];
                for j in 0..wc {
                    s += p[wo + row * wc + j] * xt[j];
                }
                for j in 0..hd {
                    s += p[uo + row * hd + j] * h[j];
                }
                s
            };
            let mut h_new = vec![0.0; hd];
            let mut c_new = vec![0.0; hd];
            for k in 0..hd {
                let i = sig(pre(0, k));
                let f = sig(pre(1, k));
                let g = pre(2, k).tanh();
                let o = sig(pre(3, k));
                c_new[k] = f * c[k] + i * g;
                h_new[k] = o * c_new[k].tanh();
            }
            h = h_new;
            c = c_new;
            out.push(h.iter().map(|&v| selu(v)).collect());
        }
        seq = out;
    }
    for k in 0..cfg.fc_dims.len() {
        let (wo, rows, cols) = t(&format!("fc{k}.w"));
        let (bo, _, _) = t(&format!("fc{k}.b"));
        seq = seq
            .iter()
            .map(|v| {
                (0..rows)
                    .map(|r| p[bo + r] + (0..cols).map(|j| p[wo + r * cols + j] * v[j]).sum::<f64>())
                    .collect()
            })
            .collect();
    }
    seq.iter().map(|v| v[0]).collect()
}

#[test]
fn matches_scalar_reference() {
    let cfg = ModelConfig::tiny();
    let model = SohModel::init(cfg.clone(), 42).unwrap();
    let x = random_inputs(7, 6, cfg.input_dim);
    let fast = model.predict(&x).unwrap();
    let slow = reference_forward(&model, &x);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn default_param_count_is_stable() {
    let m = SohModel::zeros(ModelConfig::default()).unwrap();
    // 4·128·(81+128+1) + 4·96·(128+96+1) + 4·64·(96+64+1)
    //   + (64·64+64) + (32·64+32) + (1·32+1)
    let hand = 107_520 + 86_400 + 41_216 + 4_160 + 2_080 + 33;
    assert_eq!(hand, 241_409);
    assert_eq!(m.param_count(), hand);
}
