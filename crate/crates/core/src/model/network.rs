use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_rows, ModelKind, PropagationSet};
use crate::error::{Error, Result};
use crate::sparse::DenseMatrix;

/// Weights of one layer. `w1` is present only for mixed models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w0: DenseMatrix,
    pub w1: Option<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<LayerParams>,
    pub alpha: f64,
    pub beta: f64,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

impl Params {
    /// Glorot-uniform weights, `α = β = 0.5`.
    pub fn init(kind: ModelKind, input: usize, hidden: usize, classes: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..layers)
            .map(|l| {
                let fan_in = if l == 0 { input } else { hidden };
                let fan_out = if l + 1 == layers { classes } else { hidden };
                let w0 = glorot(fan_in, fan_out, &mut rng);
                let w1 = kind.is_mixed().then(|| glorot(fan_in, fan_out, &mut rng));
                LayerParams { w0, w1 }
            })
            .collect();
        Self { layers, alpha: 0.5, beta: 0.5 }
    }

    /// All parameters in a fixed order: per layer `W₀` then `W₁`
    /// (column-major), then `α`, `β` when `mixed`.
    pub fn flatten(&self, mixed: bool) -> Vec<f64> {
        flatten_layers(&self.layers, mixed.then_some((self.alpha, self.beta)))
    }

    /// Inverse of [`Params::flatten`], reusing `self` for the shapes.
    pub fn unflatten(&self, flat: &[f64], mixed: bool) -> Self {
        let mut out = self.clone();
        let mut it = flat.iter().copied();
        for l in &mut out.layers {
            l.w0.iter_mut().for_each(|v| *v = it.next().expect("length"));
            if let Some(w1) = l.w1.as_mut() {
                w1.iter_mut().for_each(|v| *v = it.next().expect("length"));
            }
        }
        if mixed {
            out.alpha = it.next().expect("length");
            out.beta = it.next().expect("length");
        }
        out
    }

    /// `½ Σ ‖W‖²` over all weight matrices.
    pub fn half_sq_norm(&self) -> f64 {
        self.layers.iter().map(|l| 0.5 * (l.w0.norm_squared() + l.w1.as_ref().map_or(0.0, |w| w.norm_squared()))).sum()
    }
}

fn flatten_layers(layers: &[LayerParams], scalars: Option<(f64, f64)>) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.w0.iter());
        if let Some(w1) = &l.w1 {
            out.extend(w1.iter());
        }
    }
    if let Some((a, b)) = scalars {
        out.push(a);
        out.push(b);
    }
    out
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Layer input after dropout.
    input: DenseMatrix,
    /// Inverted-dropout multipliers applied to the input, if any.
    mask: Option<DenseMatrix>,
    /// `P_u X W₁` (mixed) or `X W` (GCN).
    p_y: Option<DenseMatrix>,
    /// `M X W₁` (mixed).
    m_y: Option<DenseMatrix>,
    pre: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct Cache {
    layers: Vec<LayerCache>,
    /// Row-softmax of the last pre-activation.
    pub probabilities: DenseMatrix,
}

fn dropout(x: &DenseMatrix, rate: f64, rng: &mut ChaCha8Rng) -> (DenseMatrix, DenseMatrix) {
    let keep = 1.0 - rate;
    let mask =
        DenseMatrix::from_fn(x.nrows(), x.ncols(), |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
    (x.component_mul(&mask), mask)
}

/// Runs the network. `dropout` is `Some((rate, rng))` in training mode.
pub fn forward(
    kind: ModelKind,
    x: &DenseMatrix,
    props: &PropagationSet,
    params: &Params,
    mut dropout_rng: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<Cache> {
    props.check(kind, x.nrows())?;
    let mut h = x.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for (l, lp) in params.layers.iter().enumerate() {
        if h.ncols() != lp.w0.nrows() {
            return Err(Error::ShapeMismatch(format!("layer {l} expects {} inputs, got {}", lp.w0.nrows(), h.ncols())));
        }
        let (input, mask) = match dropout_rng.as_mut() {
            Some((rate, rng)) if *rate > 0.0 => {
                let (d, m) = dropout(&h, *rate, rng);
                (d, Some(m))
            }
            _ => (h, None),
        };
        let (pre, p_y, m_y) = match kind {
            ModelKind::Mlp => (&input * &lp.w0, None, None),
            ModelKind::Gcn => {
                let y = &input * &lp.w0;
                let a = props.undirected.as_ref().expect("checked");
                (a.matrix.mul_dense(&y), Some(y), None)
            }
            _ => {
                let w1 = lp.w1.as_ref().ok_or_else(|| Error::ShapeMismatch("mixed layer without W1".into()))?;
                let y = &input * w1;
                let py = props.undirected.as_ref().expect("checked").matrix.mul_dense(&y);
                let my = props.directed.as_ref().expect("checked").matrix.mul_dense(&y);
                let pre = &input * &lp.w0 + &py * params.alpha + &my * params.beta;
                (pre, Some(py), Some(my))
            }
        };
        h = if l + 1 == params.layers.len() { pre.clone() } else { pre.map(|v| v.max(0.0)) };
        layers.push(LayerCache { input, mask, p_y, m_y, pre });
    }
    let probabilities = softmax_rows(&h);
    Ok(Cache { layers, probabilities })
}

/// Mean cross-entropy over `train` plus `weight_decay · ½Σ‖W‖²`.
pub fn loss(
    probabilities: &DenseMatrix,
    labels: &[usize],
    train: &[usize],
    params: &Params,
    weight_decay: f64,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let ce: f64 = train.iter().map(|&i| -probabilities[(i, labels[i])].max(f64::MIN_POSITIVE).ln()).sum();
    Ok(ce / train.len() as f64 + weight_decay * params.half_sq_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
    pub alpha: f64,
    pub beta: f64,
}

impl Gradients {
    /// Same order as [`Params::flatten`].
    pub fn flatten(&self, mixed: bool) -> Vec<f64> {
        flatten_layers(&self.layers, mixed.then_some((self.alpha, self.beta)))
    }
}

/// Gradient of [`loss`] with respect to every parameter.
pub fn backward(
    kind: ModelKind,
    cache: &Cache,
    props: &PropagationSet,
    params: &Params,
    labels: &[usize],
    train: &[usize],
    weight_decay: f64,
) -> Result<Gradients> {
    if train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let probs = &cache.probabilities;
    let mut g = DenseMatrix::zeros(probs.nrows(), probs.ncols());
    let scale = 1.0 / train.len() as f64;
    for &i in train {
        for c in 0..probs.ncols() {
            g[(i, c)] += scale * probs[(i, c)];
        }
        g[(i, labels[i])] -= scale;
    }

    let mut grads: Vec<LayerParams> = Vec::with_capacity(params.layers.len());
    let (mut d_alpha, mut d_beta) = (0.0, 0.0);
    for l in (0..params.layers.len()).rev() {
        let lc = &cache.layers[l];
        let lp = &params.layers[l];
        let x_t = lc.input.transpose();
        let (mut dw0, dw1, dx) = match kind {
            ModelKind::Mlp => (&x_t * &g, None, &g * lp.w0.transpose()),
            ModelKind::Gcn => {
                let dy = props.undirected.as_ref().expect("checked").transpose.mul_dense(&g);
                (&x_t * &dy, None, &dy * lp.w0.transpose())
            }
            _ => {
                let (py, my) = (lc.p_y.as_ref().expect("mixed"), lc.m_y.as_ref().expect("mixed"));
                d_alpha += g.dot(py);
                d_beta += g.dot(my);
                let dy = props.undirected.as_ref().expect("checked").transpose.mul_dense(&g) * params.alpha
                    + props.directed.as_ref().expect("checked").transpose.mul_dense(&g) * params.beta;
                let w1 = lp.w1.as_ref().expect("mixed");
                let dx = &g * lp.w0.transpose() + &dy * w1.transpose();
                (&x_t * &g, Some(&x_t * &dy), dx)
            }
        };
        dw0 += &lp.w0 * weight_decay;
        let dw1 = dw1.map(|d| d + lp.w1.as_ref().expect("mixed") * weight_decay);
        grads.push(LayerParams { w0: dw0, w1: dw1 });

        if l > 0 {
            let mut dh = dx;
            if let Some(mask) = &lc.mask {
                dh.component_mul_assign(mask);
            }
            let prev_pre = &cache.layers[l - 1].pre;
            dh.zip_apply(prev_pre, |d, z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
            g = dh;
        }
    }
    grads.reverse();
    Ok(Gradients { layers: grads, alpha: d_alpha, beta: d_beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gcn_normalize, undirected_walk, PropagationSet};
    use crate::sparse::{CsrMatrix, Duplicates};

    fn instance(kind: ModelKind) -> (DenseMatrix, PropagationSet, Vec<usize>, Vec<usize>) {
        let n = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, (i + 1) % n, 1.0));
            t.push((i, rng.random_range(0..n), 1.0));
        }
        t.retain(|&(a, b, _)| a != b);
        let a = CsrMatrix::from_triplets(n, n, &t, Duplicates::Max).unwrap();
        let m = crate::model::directed_walk(&a);
        let props = match kind {
            ModelKind::Mlp => PropagationSet::none(),
            ModelKind::Gcn => PropagationSet::gcn(gcn_normalize(&a).unwrap()).unwrap(),
            _ => PropagationSet::mixed(undirected_walk(&a).unwrap(), m).unwrap(),
        };
        let x = DenseMatrix::from_fn(n, 4, |_, _| rng.random_range(-1.0..1.0));
        let labels = (0..n).map(|i| i % 3).collect();
        (x, props, labels, vec![0, 2, 3, 5, 7, 8])
    }

    #[test]
    fn zero_mixing_reduces_to_mlp() {
        let (x, props, _, _) = instance(ModelKind::Diglacian);
        let mut p = Params::init(ModelKind::Diglacian, 4, 5, 3, 2, 1);
        p.alpha = 0.0;
        p.beta = 0.0;
        let mlp = Params {
            layers: p.layers.iter().map(|l| LayerParams { w0: l.w0.clone(), w1: None }).collect(),
            alpha: 0.0,
            beta: 0.0,
        };
        let a = forward(ModelKind::Diglacian, &x, &props, &p, None).unwrap();
        let b = forward(ModelKind::Mlp, &x, &PropagationSet::none(), &mlp, None).unwrap();
        assert!((a.probabilities - b.probabilities).abs().max() < 1e-14);
    }

    #[test]
    fn zero_w1_removes_propagation() {
        let (x, props, _, _) = instance(ModelKind::AdaSage);
        let mut p = Params::init(ModelKind::AdaSage, 4, 5, 3, 2, 2);
        for l in &mut p.layers {
            l.w1 = Some(DenseMatrix::zeros(l.w0.nrows(), l.w0.ncols()));
        }
        let base = forward(ModelKind::AdaSage, &x, &props, &p, None).unwrap().probabilities;
        p.alpha = 3.0;
        p.beta = -7.0;
        let moved = forward(ModelKind::AdaSage, &x, &props, &p, None).unwrap().probabilities;
        assert_eq!(base, moved);
    }

    #[test]
    fn loss_reference_values() {
        let p = Params { layers: vec![], alpha: 0.5, beta: 0.5 };
        let uniform = DenseMatrix::from_element(4, 3, 1.0 / 3.0);
        assert!((loss(&uniform, &[0, 1, 2, 0], &[0, 1, 2, 3], &p, 0.0).unwrap() - 3f64.ln()).abs() < 1e-12);
        let onehot = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(loss(&onehot, &[0, 1], &[0, 1], &p, 0.0).unwrap(), 0.0);
        let w = Params {
            layers: vec![LayerParams { w0: DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), w1: None }],
            alpha: 0.5,
            beta: 0.5,
        };
        assert!((loss(&onehot, &[0, 1], &[0, 1], &w, 0.1).unwrap() - 0.5 * 0.1 * 30.0).abs() < 1e-12);
        assert_eq!(loss(&onehot, &[0, 1], &[], &w, 0.1), Err(Error::EmptyMask));
    }

    fn objective(
        kind: ModelKind,
        x: &DenseMatrix,
        props: &PropagationSet,
        p: &Params,
        y: &[usize],
        tr: &[usize],
    ) -> f64 {
        let c = forward(kind, x, props, p, None).unwrap();
        loss(&c.probabilities, y, tr, p, 1e-3).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let eps = 1e-5;
        for kind in [ModelKind::Diglacian, ModelKind::AdaSage, ModelKind::Gcn, ModelKind::Mlp] {
            let (x, props, y, tr) = instance(kind);
            let p = Params::init(kind, 4, 5, 3, 2, 7);
            let cache = forward(kind, &x, &props, &p, None).unwrap();
            let analytic = backward(kind, &cache, &props, &p, &y, &tr, 1e-3).unwrap().flatten(kind.is_mixed());
            let flat = p.flatten(kind.is_mixed());
            assert_eq!(flat.len(), analytic.len());
            for idx in 0..flat.len() {
                let mut plus = flat.clone();
                let mut minus = flat.clone();
                plus[idx] += eps;
                minus[idx] -= eps;
                let fd = (objective(kind, &x, &props, &p.unflatten(&plus, kind.is_mixed()), &y, &tr)
                    - objective(kind, &x, &props, &p.unflatten(&minus, kind.is_mixed()), &y, &tr))
                    / (2.0 * eps);
                let e = rel_err(analytic[idx], fd);
                assert!(e < 1e-4, "{kind} parameter {idx}: {e}");
            }
        }
    }

    #[test]
    fn flatten_round_trip() {
        let p = Params::init(ModelKind::Diglacian, 3, 4, 2, 2, 5);
        assert_eq!(p.unflatten(&p.flatten(true), true), p);
    }
}
