use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rand_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, rand_vec(n, rng)).unwrap()
}

fn random_lstm(input: usize, hidden: usize, rng: &mut impl Rng) -> LstmParams {
    LstmParams {
        input_dim: input,
        hidden_dim: hidden,
        w_ih: rand_tensor(vec![4 * hidden, input], rng),
        w_hh: rand_tensor(vec![4 * hidden, hidden], rng),
        bias: rand_tensor(vec![4 * hidden], rng),
    }
}

/// Gate equations written out one unit at a time, independent of the
/// matrix kernels.
fn oracle_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden_dim;
    let logistic = |z: f64| 1.0 / (1.0 + (-z).exp());
    let pre = |gate: usize, j: usize| {
        let row = gate * hd + j;
        let mut z = p.bias.data[row];
        for k in 0..p.input_dim {
            z += p.w_ih.data[row * p.input_dim + k] * x[k];
        }
        for k in 0..hd {
            z += p.w_hh.data[row * hd + k] * h[k];
        }
        z
    };
    let mut h_new = Vec::new();
    let mut c_new = Vec::new();
    for j in 0..hd {
        let i = logistic(pre(0, j));
        let f = logistic(pre(1, j));
        let g = pre(2, j).tanh();
        let o = logistic(pre(3, j));
        let cj = f * c[j] + i * g;
        c_new.push(cj);
        h_new.push(o * cj.tanh());
    }
    (h_new, c_new)
}

#[test]
fn zero_weights_give_zero_hidden() {
    let p = LstmParams::zeros(5, 4);
    let (h, _) = lstm_cell(&[3.0, -1.0, 2.0, 0.5, 9.0], &[0.0; 4], &[0.0; 4], &p).unwrap();
    assert_eq!(h, vec![0.0; 4]);
}

#[test]
fn lstm_cell_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let p = random_lstm(6, 5, &mut rng);
        let (x, h, c) = (rand_vec(6, &mut rng), rand_vec(5, &mut rng), rand_vec(5, &mut rng));
        let (h1, c1) = lstm_cell(&x, &h, &c, &p).unwrap();
        let (h2, c2) = oracle_cell(&x, &h, &c, &p);
        for (a, b) in h1.iter().chain(&c1).zip(h2.iter().chain(&c2)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn lstm_cell_is_deterministic_and_checks_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_lstm(3, 2, &mut rng);
    let x = rand_vec(3, &mut rng);
    let a = lstm_cell(&x, &[0.1, 0.2], &[0.3, 0.4], &p).unwrap();
    let b = lstm_cell(&x, &[0.1, 0.2], &[0.3, 0.4], &p).unwrap();
    assert_eq!(a, b);
    assert!(lstm_cell(&[1.0], &[0.1, 0.2], &[0.3, 0.4], &p).is_err());
    assert!(lstm_cell(&x, &[0.1], &[0.3, 0.4], &p).is_err());
}

#[test]
fn bilstm_output_length_and_empty_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let f = LstmParams::init(8, 100, &mut rng);
    let b = LstmParams::init(8, 100, &mut rng);
    let seq: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(8, &mut rng)).collect();
    assert_eq!(bilstm_last(&seq, &f, &b).unwrap().len(), 200);
    assert!(bilstm_last(&[], &f, &b).is_err());
}

#[test]
fn bilstm_single_step_runs_each_direction_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let f = random_lstm(4, 3, &mut rng);
    let b = random_lstm(4, 3, &mut rng);
    let x = rand_vec(4, &mut rng);
    let out = bilstm_last(std::slice::from_ref(&x), &f, &b).unwrap();
    let (hf, _) = oracle_cell(&x, &[0.0; 3], &[0.0; 3], &f);
    let (hb, _) = oracle_cell(&x, &[0.0; 3], &[0.0; 3], &b);
    let expected: Vec<f64> = hf.into_iter().chain(hb).collect();
    for (a, e) in out.iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn bilstm_palindrome_with_shared_params_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = random_lstm(4, 6, &mut rng);
    let a = rand_vec(4, &mut rng);
    let b = rand_vec(4, &mut rng);
    let seq = vec![a.clone(), b, a];
    let out = bilstm_last(&seq, &p, &p).unwrap();
    assert_eq!(out[..6], out[6..]);
}

#[test]
fn attention_identical_rows_uniform_and_single_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p = AttentionParams::init(5, &mut rng);
    let v = rand_vec(5, &mut rng);
    let (out, alpha) = feature_attention(&[v.clone(), v.clone()], &p).unwrap();
    assert!((alpha[0] - 0.5).abs() < 1e-15 && (alpha[1] - 0.5).abs() < 1e-15);
    for (o, x) in out.iter().zip(&v) {
        assert!((o - x).abs() < 1e-12);
    }
    let (out, alpha) = feature_attention(std::slice::from_ref(&v), &p).unwrap();
    assert_eq!(alpha, vec![1.0]);
    assert_eq!(out, v);
    assert!(feature_attention(&[vec![1.0; 4]], &p).is_err());
    assert!(feature_attention(&[], &p).is_err());
}

#[test]
fn attention_matches_formula_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = 4;
    let p = AttentionParams::init(d, &mut rng);
    let rows: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(d, &mut rng)).collect();
    // Scores computed directly from the definition.
    let scores: Vec<f64> = rows
        .iter()
        .map(|v| {
            (0..d)
                .map(|j| {
                    let proj: f64 = (0..d).map(|k| p.m.data[k * d + j] * v[k]).sum();
                    (proj + p.b.data[j]).tanh() * p.c.data[j]
                })
                .sum()
        })
        .collect();
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    let alpha_ref: Vec<f64> = scores.iter().map(|s| s.exp() / z).collect();
    let (out, alpha) = feature_attention(&rows, &p).unwrap();
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (a, r) in alpha.iter().zip(&alpha_ref) {
        assert!((a - r).abs() < 1e-12);
    }
    for j in 0..d {
        let expected: f64 = (0..3).map(|r| alpha_ref[r] * rows[r][j]).sum();
        assert!((out[j] - expected).abs() < 1e-12);
    }
}

#[test]
fn heads_and_losses_closed_forms() {
    let w3 = Tensor::zeros(vec![3, 4]);
    let b3 = Tensor::zeros(vec![3]);
    let probs = output_head(&[1.0, 2.0, 3.0, 4.0], Head::Softmax3, &w3, &b3).unwrap();
    for p in &probs {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
    let w1 = Tensor::zeros(vec![1, 4]);
    let b1 = Tensor::zeros(vec![1]);
    assert_eq!(output_head(&[1.0; 4], Head::Sigmoid1, &w1, &b1).unwrap(), vec![0.5]);
    assert!(output_head(&[1.0; 4], Head::Sigmoid1, &w3, &b3).is_err());

    for gold in 0..3 {
        assert!((loss(&probs, gold, Head::Softmax3).unwrap() - 3f64.ln()).abs() < 1e-12);
    }
    for gold in 0..2 {
        assert!((loss(&[0.5], gold, Head::Sigmoid1).unwrap() - 2f64.ln()).abs() < 1e-12);
    }
    assert_eq!(loss(&[0.0, 1.0, 0.0], 1, Head::Softmax3).unwrap(), 0.0);
    assert_eq!(loss(&[1.0], 1, Head::Sigmoid1).unwrap(), 0.0);
    let clamped = loss(&[1.0, 0.0, 0.0], 2, Head::Softmax3).unwrap();
    assert!((clamped + PROB_EPS.ln()).abs() < 1e-9);
    assert!(loss(&probs, 3, Head::Softmax3).is_err());
    assert!(loss(&[0.5], 2, Head::Sigmoid1).is_err());
}

#[test]
fn softmax_head_normalizes_random_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..100 {
        let w = Tensor::new(vec![3, 5], (0..15).map(|_| rng.gen_range(-20.0..20.0)).collect()).unwrap();
        let b = rand_tensor(vec![3], &mut rng);
        let p = output_head(&rand_vec(5, &mut rng), Head::Softmax3, &w, &b).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

fn double_store() -> ParamStore {
    ParamStore::new(7, Precision::Double)
}

fn assert_gradcheck(store: &mut ParamStore, build: impl Fn(&mut Graph) -> Result<NodeId, crate::Error>) {
    let report = check_gradients(store, build, gradcheck::DEFAULT_EPS, gradcheck::DEFAULT_FLOOR, None).unwrap();
    assert!(report.checked > 0);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn gradcheck_lstm_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut s = double_store();
    random_lstm(3, 4, &mut rng).register(&mut s, "cell").unwrap();
    s.insert("x", rand_tensor(vec![3], &mut rng)).unwrap();
    s.insert("state", rand_tensor(vec![8], &mut rng)).unwrap();
    s.insert("probe", rand_tensor(vec![8], &mut rng)).unwrap();
    assert_gradcheck(&mut s, |g| {
        let n = LstmNodes::from_store(g, "cell")?;
        let x = g.param("x")?;
        let st = g.param("state")?;
        let out = n.step(g, x, Some(st))?;
        let probe = g.param("probe")?;
        g.dot(out, probe)
    });
}

#[test]
fn gradcheck_bilstm_with_embeddings() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut s = double_store();
    s.insert("emb", rand_tensor(vec![5, 3], &mut rng)).unwrap();
    random_lstm(3, 4, &mut rng).register(&mut s, "fwd").unwrap();
    random_lstm(3, 4, &mut rng).register(&mut s, "bwd").unwrap();
    s.insert("probe", rand_tensor(vec![8], &mut rng)).unwrap();
    assert_gradcheck(&mut s, |g| {
        let table = g.param("emb")?;
        let xs = [g.embed(table, 1)?, g.embed(table, 4)?, g.embed(table, 1)?, g.embed(table, 0)?];
        let f = LstmNodes::from_store(g, "fwd")?;
        let b = LstmNodes::from_store(g, "bwd")?;
        let out = bilstm_last_graph(g, &f, &b, &xs)?;
        let probe = g.param("probe")?;
        g.dot(out, probe)
    });
}

#[test]
fn gradcheck_attention() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut s = double_store();
    AttentionParams::init(4, &mut rng).register(&mut s, "att").unwrap();
    for r in 0..3 {
        s.insert(format!("row{r}"), rand_tensor(vec![4], &mut rng)).unwrap();
    }
    s.insert("probe", rand_tensor(vec![4], &mut rng)).unwrap();
    assert_gradcheck(&mut s, |g| {
        let att = AttentionNodes::from_store(g, "att")?;
        let rows = [g.param("row0")?, g.param("row1")?, g.param("row2")?];
        let (out, _) = att.apply(g, &rows)?;
        let probe = g.param("probe")?;
        g.dot(out, probe)
    });
}

#[test]
fn gradcheck_heads_with_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for head in [Head::Softmax3, Head::Sigmoid1] {
        for gold in 0..head.classes() {
            let mut s = double_store();
            s.insert("w", rand_tensor(vec![head.outputs(), 5], &mut rng)).unwrap();
            s.insert("b", rand_tensor(vec![head.outputs()], &mut rng)).unwrap();
            s.insert("x", rand_tensor(vec![5], &mut rng)).unwrap();
            let mask: Vec<f64> = (0..5).map(|k| if k % 2 == 0 { 2.0 } else { 0.0 }).collect();
            assert_gradcheck(&mut s, |g| {
                let (w, b, x) = (g.param("w")?, g.param("b")?, g.param("x")?);
                let dropped = g.mask(x, mask.clone())?;
                let pred = output_head_graph(g, w, b, dropped, head)?;
                loss_graph(g, pred, gold, head)
            });
        }
    }
}

#[test]
fn gradcheck_summed_and_scaled_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut s = double_store();
    s.insert("w", rand_tensor(vec![3, 4], &mut rng)).unwrap();
    s.insert("b", rand_tensor(vec![3], &mut rng)).unwrap();
    s.insert("x", rand_tensor(vec![4], &mut rng)).unwrap();
    s.insert("y", rand_tensor(vec![4], &mut rng)).unwrap();
    assert_gradcheck(&mut s, |g| {
        let (w, b, x, y) = (g.param("w")?, g.param("b")?, g.param("x")?, g.param("y")?);
        let xy = g.add(x, y)?;
        let both = g.concat(&[x, y]);
        let first = g.slice(both, 2, 4)?;
        let p1 = output_head_graph(g, w, b, xy, Head::Softmax3)?;
        let p2 = output_head_graph(g, w, b, first, Head::Softmax3)?;
        let l1 = loss_graph(g, p1, 0, Head::Softmax3)?;
        let l2 = loss_graph(g, p2, 2, Head::Softmax3)?;
        let total = g.sum(&[l1, l2])?;
        Ok(g.scale(total, 0.5))
    });
}

#[test]
fn unused_parameter_gradient_is_exactly_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut s = double_store();
    s.insert("used", rand_tensor(vec![3], &mut rng)).unwrap();
    s.insert("unused", rand_tensor(vec![3], &mut rng)).unwrap();
    let mut g = Graph::new(&s);
    let u = g.param("used").unwrap();
    let _ = g.param("unused").unwrap();
    let l = g.dot(u, u).unwrap();
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.dense(1), vec![0.0; 3]);
    assert!(grads.get(0).is_some());
}

#[test]
fn perfect_prediction_has_near_zero_gradient() {
    let mut s = double_store();
    s.insert("w", Tensor::new(vec![3, 1], vec![-40.0, 40.0, -40.0]).unwrap()).unwrap();
    s.insert("b", Tensor::zeros(vec![3])).unwrap();
    let mut g = Graph::new(&s);
    let (w, b) = (g.param("w").unwrap(), g.param("b").unwrap());
    let x = g.vector(vec![1.0]);
    let p = output_head_graph(&mut g, w, b, x, Head::Softmax3).unwrap();
    let l = loss_graph(&mut g, p, 1, Head::Softmax3).unwrap();
    assert!(g.scalar(l) < 1e-30);
    assert!(g.backward(l).unwrap().l2_norm() < 1e-30);
}

#[test]
fn backward_rejects_foreign_or_non_scalar_nodes() {
    let mut s = double_store();
    s.insert("v", Tensor::vector(vec![1.0, 2.0])).unwrap();
    let mut other = Graph::new(&s);
    let mut ids = Vec::new();
    for _ in 0..5 {
        ids.push(other.vector(vec![1.0]));
    }
    let mut g = Graph::new(&s);
    let v = g.param("v").unwrap();
    assert!(g.backward(ids[4]).is_err());
    assert!(g.backward(v).is_err());
    assert!(Graph::detached().backward(ids[0]).is_err());
}
