//! Two-hidden-layer ReLU network trained with Adam on squared error.
//!
//! Inputs and the target are standardised on the training rows; predictions
//! are mapped back to bid units. All weights live in one flat vector so the
//! optimiser update is a single pass.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaselineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpOptions {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        MlpOptions {
            hidden: 128,
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// `C = A·B + beta·C` on row/column-strided slices.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len());
    }
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: the asserts above keep every strided access inside its slice,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Layer sizes and offsets into the flat weight vector:
/// `w1 (in×h), b1 (h), w2 (h×h), b2 (h), w3 (h), b3 (1)`, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    inputs: usize,
    hidden: usize,
}

impl Layout {
    fn b1(&self) -> usize {
        self.inputs * self.hidden
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.hidden
    }
    fn w3(&self) -> usize {
        self.b2() + self.hidden
    }
    fn b3(&self) -> usize {
        self.w3() + self.hidden
    }
    fn len(&self) -> usize {
        self.b3() + 1
    }

    fn glorot(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        let h = self.hidden;
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut w[range] {
                *v = rng.random_range(-limit..limit);
            }
        };
        fill(0..self.b1(), self.inputs, h);
        fill(self.w2()..self.b2(), h, h);
        fill(self.w3()..self.b3(), h, 1);
        w
    }
}

/// Activations of one batch, reused across batches.
struct Workspace {
    a1: Vec<f64>,
    a2: Vec<f64>,
    out: Vec<f64>,
    d: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Workspace {
    fn new(rows: usize, hidden: usize) -> Self {
        Workspace {
            a1: vec![0.0; rows * hidden],
            a2: vec![0.0; rows * hidden],
            out: vec![0.0; rows],
            d: vec![0.0; rows],
            d1: vec![0.0; rows * hidden],
            d2: vec![0.0; rows * hidden],
        }
    }
}

fn add_bias_relu(a: &mut [f64], bias: &[f64]) {
    for row in a.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v = (*v + b).max(0.0);
        }
    }
}

fn column_sums(m: &[f64], cols: usize, out: &mut [f64]) {
    out.fill(0.0);
    for row in m.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Forward pass on `rows` inputs stored row-major in `x`.
fn forward(l: Layout, w: &[f64], x: &[f64], rows: usize, ws: &mut Workspace) {
    let (p, h) = (l.inputs, l.hidden);
    let a1 = &mut ws.a1[..rows * h];
    gemm(rows, p, h, x, (p, 1), &w[..l.b1()], (h, 1), 0.0, a1, (h, 1));
    add_bias_relu(a1, &w[l.b1()..l.w2()]);
    let a2 = &mut ws.a2[..rows * h];
    gemm(rows, h, h, a1, (h, 1), &w[l.w2()..l.b2()], (h, 1), 0.0, a2, (h, 1));
    add_bias_relu(a2, &w[l.b2()..l.w3()]);
    let out = &mut ws.out[..rows];
    gemm(rows, h, 1, a2, (h, 1), &w[l.w3()..l.b3()], (1, 1), 0.0, out, (1, 1));
    let b3 = w[l.b3()];
    out.iter_mut().for_each(|o| *o += b3);
}

/// Half mean squared error of a batch; writes its gradient into `g`.
fn loss_grad(l: Layout, w: &[f64], x: &[f64], y: &[f64], ws: &mut Workspace, g: &mut [f64]) -> f64 {
    let (p, h, rows) = (l.inputs, l.hidden, y.len());
    forward(l, w, x, rows, ws);
    let n = rows as f64;
    let d = &mut ws.d[..rows];
    for i in 0..rows {
        d[i] = (ws.out[i] - y[i]) / n;
    }
    let loss = d.iter().map(|v| v * v).sum::<f64>() * n / 2.0;
    let (a1, a2) = (&ws.a1[..rows * h], &ws.a2[..rows * h]);

    gemm(h, rows, 1, a2, (1, h), d, (1, 1), 0.0, &mut g[l.w3()..l.b3()], (1, 1));
    g[l.b3()] = d.iter().sum();

    let d2 = &mut ws.d2[..rows * h];
    let w3 = &w[l.w3()..l.b3()];
    for i in 0..rows {
        for j in 0..h {
            d2[i * h + j] = if a2[i * h + j] > 0.0 { d[i] * w3[j] } else { 0.0 };
        }
    }
    gemm(h, rows, h, a1, (1, h), d2, (h, 1), 0.0, &mut g[l.w2()..l.b2()], (h, 1));
    column_sums(d2, h, &mut g[l.b2()..l.w3()]);

    let d1 = &mut ws.d1[..rows * h];
    // d1 = d2 · w2ᵀ, masked by the first layer's activity.
    gemm(rows, h, h, d2, (h, 1), &w[l.w2()..l.b2()], (1, h), 0.0, d1, (h, 1));
    for (v, a) in d1.iter_mut().zip(a1) {
        if *a <= 0.0 {
            *v = 0.0;
        }
    }
    gemm(p, rows, h, x, (1, p), d1, (h, 1), 0.0, &mut g[..l.b1()], (h, 1));
    column_sums(d1, h, &mut g[l.b1()..l.w2()]);
    loss
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, w: &mut [f64], g: &[f64], o: &MlpOptions) {
        self.t += 1;
        let step = o.learning_rate / (1.0 - o.beta1.powi(self.t));
        let c2 = 1.0 / (1.0 - o.beta2.powi(self.t));
        for (((w, g), m), v) in w.iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            *m = o.beta1 * *m + (1.0 - o.beta1) * g;
            *v = o.beta2 * *v + (1.0 - o.beta2) * g * g;
            *w -= step * *m / ((*v * c2).sqrt() + o.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layout: Layout,
    weights: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl MlpModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let row: Vec<f64> = (0..x.len()).map(|j| (x[j] - self.x_mean[j]) / self.x_scale[j]).collect();
        let mut ws = Workspace::new(1, self.layout.hidden);
        forward(self.layout, &self.weights, &row, 1, &mut ws);
        self.y_mean + self.y_scale * ws.out[0]
    }
}

fn mean_scale(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let sd = (v.map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

pub fn fit_mlp(xs: &[Vec<f64>], ys: &[f64], opts: &MlpOptions, seed: u64) -> Result<MlpModel, BaselineError> {
    if xs.len() < 10 {
        return Err(BaselineError::TooFewRows { needed: 10, found: xs.len() });
    }
    let p = xs[0].len();
    let (x_mean, x_scale): (Vec<f64>, Vec<f64>) = (0..p).map(|j| mean_scale(xs.iter().map(move |r| r[j]))).unzip();
    let (y_mean, y_scale) = mean_scale(ys.iter().copied());
    let xn: Vec<f64> = xs
        .iter()
        .flat_map(|r| (0..p).map(|j| (r[j] - x_mean[j]) / x_scale[j]).collect::<Vec<_>>())
        .collect();
    let yn: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();

    let layout = Layout {
        inputs: p,
        hidden: opts.hidden,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = layout.glorot(&mut rng);
    let mut grad = vec![0.0; layout.len()];
    let mut adam = Adam {
        m: vec![0.0; layout.len()],
        v: vec![0.0; layout.len()],
        t: 0,
    };
    let batch_size = opts.batch_size.max(1);
    let mut ws = Workspace::new(batch_size, opts.hidden);
    let (mut bx, mut by) = (Vec::with_capacity(batch_size * p), Vec::with_capacity(batch_size));
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.extend_from_slice(&xn[i * p..(i + 1) * p]);
                by.push(yn[i]);
            }
            loss_grad(layout, &weights, &bx, &by, &mut ws, &mut grad);
            adam.step(&mut weights, &grad, opts);
        }
    }
    Ok(MlpModel {
        layout,
        weights,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    })
}
