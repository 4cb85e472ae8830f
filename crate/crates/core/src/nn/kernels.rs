//! Value-level numeric kernels shared by the graph's forward pass.

/// `y = W x (+ b)` with `W` row-major `[out, in]`.
pub fn matvec(w: &[f64], x: &[f64], bias: Option<&[f64]>, out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    debug_assert_eq!(w.len(), out_dim * in_dim);
    (0..out_dim)
        .map(|r| {
            let row = &w[r * in_dim..(r + 1) * in_dim];
            let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            bias.map_or(dot, |b| dot + b[r])
        })
        .collect()
}

/// `y = Mᵀ x` with `M` row-major `[in, out]`.
pub fn matvec_t(m: &[f64], x: &[f64], out_dim: usize) -> Vec<f64> {
    let mut y = vec![0.0; out_dim];
    for (k, xk) in x.iter().enumerate() {
        let row = &m[k * out_dim..(k + 1) * out_dim];
        for (yj, mkj) in y.iter_mut().zip(row) {
            *yj += mkj * xk;
        }
    }
    y
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax via the max-shifted log-sum-exp.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Activated gates of one LSTM step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStep {
    /// `[i, f, g, o]`, each `hidden` long.
    pub gates: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// One LSTM step with gate order input, forget, candidate, output:
/// `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub fn lstm_step(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    hidden: usize,
) -> LstmStep {
    let mut z = matvec(w_ih, x, Some(bias), 4 * hidden);
    let zh = matvec(w_hh, h, None, 4 * hidden);
    for (a, b) in z.iter_mut().zip(&zh) {
        *a += b;
    }
    for (k, v) in z.iter_mut().enumerate() {
        *v = if (2 * hidden..3 * hidden).contains(&k) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
    let mut c_new = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h_new = vec![0.0; hidden];
    for j in 0..hidden {
        let (i, f, g, o) = (z[j], z[hidden + j], z[2 * hidden + j], z[3 * hidden + j]);
        c_new[j] = f * c[j] + i * g;
        tanh_c[j] = c_new[j].tanh();
        h_new[j] = o * tanh_c[j];
    }
    LstmStep {
        gates: z,
        c_prev: c.to_vec(),
        tanh_c,
        h: h_new,
        c: c_new,
    }
}
