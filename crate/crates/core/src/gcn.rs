//! Two-layer graph convolutional network for semi-supervised label
//! inference over a knowledge graph.
//!
//! Forward rule: `Z = row_softmax( A * relu(A * X * W0) * W1 )` where `A` is
//! the symmetrically normalized adjacency with self-loops. Dropout is applied
//! to the inputs of both layers in train mode. Training minimizes masked
//! cross-entropy plus L2 weight decay on `W0` with Adam.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::citation::KnowledgeGraph;
use crate::error::{Error, Result};
use crate::numerics::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::numerics::layers::{argmax_row, row_softmax};
use crate::numerics::sparse::SparseMatrix;
use crate::numerics::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::util::seeded_rng;

/// Symmetrically normalized adjacency `D^-1/2 (A + I) D^-1/2` where `A` is
/// the symmetrized citation graph and `D` the degree of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(SparseMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn num_nodes(&self) -> usize {
        self.0.rows()
    }
}

/// Builds the normalized adjacency: edges symmetrized, self-loops added.
pub fn normalize_adjacency(g: &KnowledgeGraph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        if a == b {
            continue;
        }
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for (i, nb) in neighbors.iter_mut().enumerate() {
        nb.push(i); // self-loop
        nb.sort_unstable();
        nb.dedup();
    }
    let inv_sqrt: Vec<f64> = neighbors
        .iter()
        .map(|nb| 1.0 / (nb.len() as f64).sqrt())
        .collect();
    let mut triplets = Vec::new();
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            triplets.push((i, j, inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    NormalizedAdjacency(
        SparseMatrix::from_triplets(n, n, triplets).expect("indices bounded by n"),
    )
}

#[derive(Debug, Clone)]
pub struct GcnHyperparams {
    pub hidden: usize,
    pub dropout: f64,
    /// L2 coefficient applied to the first layer only.
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for GcnHyperparams {
    fn default() -> Self {
        GcnHyperparams {
            hidden: 16,
            dropout: 0.5,
            weight_decay: 5e-4,
            learning_rate: 0.01,
            // the classic 200-epoch budget assumes early stopping on a small
            // mask; at the label fractions used here training is still
            // descending at epoch 200, so the fixed budget is doubled
            epochs: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w0: Tensor<f64>,
    pub w1: Tensor<f64>,
    pub dropout: f64,
    pub weight_decay: f64,
}

impl GcnModel {
    /// Glorot-uniform init, deterministic under the seed.
    pub fn init(num_features: usize, hidden: usize, classes: usize, hp: &GcnHyperparams, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Tensor::random_uniform(vec![rows, cols], -bound, bound, &mut rng)
        };
        GcnModel {
            w0: glorot(num_features, hidden),
            w1: glorot(hidden, classes),
            dropout: hp.dropout,
            weight_decay: hp.weight_decay,
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::checkpoint::save(path, &[("w0", &self.w0), ("w1", &self.w1)])
    }
}

/// Which nodes' labels the destination has received.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask(Vec<bool>);

impl LabelMask {
    pub fn new(mask: Vec<bool>) -> Self {
        LabelMask(mask)
    }

    pub fn all(n: usize) -> Self {
        LabelMask(vec![true; n])
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn masked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Feature matrix, stored sparse when it pays off.
enum Features {
    Dense(Tensor<f64>),
    Sparse(SparseMatrix),
}

impl Features {
    fn from_dense(x: &Tensor<f64>) -> Self {
        let total = x.len().max(1);
        let nnz = x.as_slice().iter().filter(|&&v| v != 0.0).count();
        if (nnz as f64) / (total as f64) <= 0.25 {
            Features::Sparse(SparseMatrix::from_dense(x).expect("rank-2 feature tensor"))
        } else {
            Features::Dense(x.clone())
        }
    }

    fn mm(&self, w: &Tensor<f64>) -> Result<Tensor<f64>> {
        match self {
            Features::Dense(x) => matmul(x, w),
            Features::Sparse(x) => x.spmm(w),
        }
    }

    /// transpose(self) * m
    fn tn_mm(&self, m: &Tensor<f64>) -> Result<Tensor<f64>> {
        match self {
            Features::Dense(x) => matmul_tn(x, m),
            Features::Sparse(x) => x.transpose().spmm(m),
        }
    }

    /// Inverted dropout; for the sparse form only stored entries are drawn,
    /// which is distribution-equivalent since dropped zeros stay zero.
    fn dropout(&self, rate: f64, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (1.0 - rate);
        match self {
            Features::Dense(x) => Features::Dense(x.map(|v| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    v * scale
                }
            })),
            Features::Sparse(x) => Features::Sparse(x.map_values(|v| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    v * scale
                }
            })),
        }
    }
}

/// Rows scaled to unit sum; all-zero rows stay zero.
pub fn row_normalize(x: &Tensor<f64>) -> Tensor<f64> {
    let (n, f) = (x.dim(0), x.dim(1));
    let mut out = x.clone();
    for r in 0..n {
        let row = &mut out.as_mut_slice()[r * f..(r + 1) * f];
        let sum: f64 = row.iter().sum();
        if sum != 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

fn dense_dropout_mask(shape: &[usize], rate: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let scale = 1.0 / (1.0 - rate);
    Tensor::from_fn(shape.to_vec(), |_| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            scale
        }
    })
}

fn elementwise_mul(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    let mut out = a.clone();
    for (o, &m) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o *= m;
    }
    out
}

/// Eval- or train-mode forward pass over raw (unnormalized) inputs.
/// `Z = row_softmax(A * relu(A * X * W0) * W1)`; dropout on both layer
/// inputs only in train mode, drawn deterministically from `seed`.
pub fn gcn_forward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Tensor<f64>,
    train_mode: bool,
    seed: u64,
) -> Result<Tensor<f64>> {
    if x.rank() != 2 || x.dim(0) != adj.num_nodes() || x.dim(1) != model.w0.dim(0) {
        return Err(Error::dimension("gcn_forward", x.shape(), model.w0.shape()));
    }
    let features = Features::from_dense(x);
    let mut rng = seeded_rng(seed);
    let (s, h) = forward_hidden(model, adj, &features, train_mode, &mut rng)?;
    let _ = s;
    let z = adj.matrix().spmm(&matmul(&h, &model.w1)?)?;
    Ok(row_softmax(&z))
}

/// Shared first-layer computation; returns (pre-activation, layer-2 input).
fn forward_hidden(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    features: &Features,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<f64>, Tensor<f64>)> {
    let xw = if train_mode && model.dropout > 0.0 {
        features.dropout(model.dropout, rng).mm(&model.w0)?
    } else {
        features.mm(&model.w0)?
    };
    let s = adj.matrix().spmm(&xw)?;
    let mut h = s.clone();
    for v in h.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    if train_mode && model.dropout > 0.0 {
        let mask = dense_dropout_mask(h.shape(), model.dropout, rng);
        h = elementwise_mul(&h, &mask);
    }
    Ok((s, h))
}

/// Masked mean cross-entropy over `P` plus the W0 weight-decay term.
fn masked_objective(
    p: &Tensor<f64>,
    labels: &[usize],
    mask: &LabelMask,
    w0: &Tensor<f64>,
    weight_decay: f64,
) -> (f64, Tensor<f64>) {
    let (n, c) = (p.dim(0), p.dim(1));
    let m = mask.count() as f64;
    let mut d = Tensor::zeros(vec![n, c]);
    let mut loss = 0.0;
    for i in mask.masked_indices() {
        let row = p.row(i);
        loss -= row[labels[i]].max(f64::MIN_POSITIVE).ln();
        let drow = &mut d.as_mut_slice()[i * c..(i + 1) * c];
        for (j, &pv) in row.iter().enumerate() {
            drow[j] = (pv - if j == labels[i] { 1.0 } else { 0.0 }) / m;
        }
    }
    let l2: f64 = w0.as_slice().iter().map(|&v| v * v).sum();
    (loss / m + 0.5 * weight_decay * l2, d)
}

struct Adam {
    m: Tensor<f64>,
    v: Tensor<f64>,
    t: u64,
}

impl Adam {
    fn new(shape: &[usize]) -> Self {
        Adam {
            m: Tensor::zeros(shape.to_vec()),
            v: Tensor::zeros(shape.to_vec()),
            t: 0,
        }
    }

    fn step(&mut self, w: &mut Tensor<f64>, g: &Tensor<f64>, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for ((wv, &gv), (mv, vv)) in w
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(self.m.as_mut_slice().iter_mut().zip(self.v.as_mut_slice()))
        {
            *mv = B1 * *mv + (1.0 - B1) * gv;
            *vv = B2 * *vv + (1.0 - B2) * gv * gv;
            *wv -= lr * (*mv / bc1) / ((*vv / bc2).sqrt() + EPS);
        }
    }
}

/// Trains a fresh model on the masked nodes of `g`. Features are
/// row-normalized internally. Returns the model and the per-epoch loss curve.
pub fn gcn_train(
    g: &KnowledgeGraph,
    adj: &NormalizedAdjacency,
    mask: &LabelMask,
    hp: &GcnHyperparams,
    seed: u64,
) -> Result<(GcnModel, Vec<f64>)> {
    if mask.len() != g.num_nodes() {
        return Err(Error::dimension(
            "gcn_train",
            &[mask.len()],
            &[g.num_nodes()],
        ));
    }
    if mask.count() == 0 {
        return Err(Error::Argument("label mask is empty".into()));
    }
    let mut class_seen = vec![false; g.num_classes()];
    for i in mask.masked_indices() {
        class_seen[g.labels[i]] = true;
    }
    if let Some(missing) = class_seen.iter().position(|&b| !b) {
        return Err(Error::Argument(format!(
            "label mask covers no node of class {missing} ({})",
            g.class_names[missing]
        )));
    }

    let xn = row_normalize(&g.features);
    let features = Features::from_dense(&xn);
    // the sparse path shares the feature structure across epochs and lets
    // dropout ride along as per-entry scale factors, also through X^T
    let sparse_path = match &features {
        Features::Sparse(x) => {
            let (xt, tmap) = x.transpose_with_map();
            Some((x, xt, tmap))
        }
        Features::Dense(_) => None,
    };

    let mut model = GcnModel::init(g.num_features(), hp.hidden, g.num_classes(), hp, seed);
    let mut adam_w0 = Adam::new(model.w0.shape());
    let mut adam_w1 = Adam::new(model.w1.shape());
    let mut rng = seeded_rng(seed ^ 0x6463_6f70); // dropout stream
    let mut curve = Vec::with_capacity(hp.epochs);

    let n = g.num_nodes();
    let keep_scale = 1.0 / (1.0 - model.dropout);
    let mut xw = Tensor::zeros(vec![n, hp.hidden]);
    let mut d_w0 = Tensor::zeros(vec![g.num_features(), hp.hidden]);
    let (mut factors, mut factors_t) = match &sparse_path {
        Some((x, _, _)) => (vec![1.0f64; x.nnz()], vec![1.0f64; x.nnz()]),
        None => (Vec::new(), Vec::new()),
    };

    for _ in 0..hp.epochs {
        // forward; dropout on the inputs of both layers
        let dense_xd = match &sparse_path {
            Some((x, _, tmap)) => {
                if model.dropout > 0.0 {
                    for f in factors.iter_mut() {
                        *f = if rng.random::<f64>() < model.dropout {
                            0.0
                        } else {
                            keep_scale
                        };
                    }
                    for (ft, &src) in factors_t.iter_mut().zip(tmap) {
                        *ft = factors[src];
                    }
                }
                x.spmm_scaled(&factors, &model.w0, &mut xw)?;
                None
            }
            None => {
                let Features::Dense(x) = &features else { unreachable!() };
                let xd = if model.dropout > 0.0 {
                    x.map(|v| {
                        if rng.random::<f64>() < model.dropout {
                            0.0
                        } else {
                            v * keep_scale
                        }
                    })
                } else {
                    x.clone()
                };
                xw = matmul(&xd, &model.w0)?;
                Some(xd)
            }
        };
        let s = adj.matrix().spmm(&xw)?;
        let mut h = s.clone();
        for v in h.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let hmask = if model.dropout > 0.0 {
            Some(dense_dropout_mask(h.shape(), model.dropout, &mut rng))
        } else {
            None
        };
        let hd = match &hmask {
            Some(m) => elementwise_mul(&h, m),
            None => h.clone(),
        };
        let z = adj.matrix().spmm(&matmul(&hd, &model.w1)?)?;
        let p = row_softmax(&z);

        let (loss, dz) = masked_objective(&p, &g.labels, mask, &model.w0, model.weight_decay);
        curve.push(loss);

        // backward
        let a_dz = adj.matrix().spmm(&dz)?; // A^T = A
        let d_w1 = matmul_tn(&hd, &a_dz)?;
        let mut d_h = matmul_nt(&a_dz, &model.w1)?;
        if let Some(m) = &hmask {
            d_h = elementwise_mul(&d_h, m);
        }
        for (g_v, &s_v) in d_h.as_mut_slice().iter_mut().zip(s.as_slice()) {
            if s_v <= 0.0 {
                *g_v = 0.0;
            }
        }
        let a_dh = adj.matrix().spmm(&d_h)?;
        match (&sparse_path, &dense_xd) {
            (Some((_, xt, _)), _) => xt.spmm_scaled(&factors_t, &a_dh, &mut d_w0)?,
            (None, Some(xd)) => d_w0 = matmul_tn(xd, &a_dh)?,
            (None, None) => unreachable!(),
        }
        for (dv, &wv) in d_w0.as_mut_slice().iter_mut().zip(model.w0.as_slice()) {
            *dv += model.weight_decay * wv;
        }

        adam_w0.step(&mut model.w0, &d_w0, hp.learning_rate);
        adam_w1.step(&mut model.w1, &d_w1, hp.learning_rate);
    }
    Ok((model, curve))
}

/// Eval-mode prediction per node; ties break toward the lowest class index.
/// Features are row-normalized internally, matching `gcn_train`.
pub fn gcn_infer(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Tensor<f64>,
) -> Result<Vec<usize>> {
    let z = gcn_forward(model, adj, &row_normalize(x), false, 0)?;
    Ok((0..z.dim(0)).map(|r| argmax_row(z.row(r))).collect())
}

/// Accuracy of `predicted` on nodes where `mask` is false.
pub fn unmasked_accuracy(predicted: &[usize], labels: &[usize], mask: &LabelMask) -> f64 {
    let mut total = 0usize;
    let mut hit = 0usize;
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            total += 1;
            if predicted[i] == labels[i] {
                hit += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Finite-difference check of the full masked objective (eval mode, no
/// dropout) w.r.t. both weight matrices.
pub fn gcn_grad_check(
    g: &KnowledgeGraph,
    adj: &NormalizedAdjacency,
    mask: &LabelMask,
    hp: &GcnHyperparams,
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let xn = row_normalize(&g.features);
    let features = Features::from_dense(&xn);
    let mut model = GcnModel::init(g.num_features(), hp.hidden, g.num_classes(), hp, seed);
    model.dropout = 0.0;

    // analytic gradient at the init point
    let s = adj.matrix().spmm(&features.mm(&model.w0)?)?;
    let mut h = s.clone();
    for v in h.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let z = adj.matrix().spmm(&matmul(&h, &model.w1)?)?;
    let p = row_softmax(&z);
    let (_, dz) = masked_objective(&p, &g.labels, mask, &model.w0, model.weight_decay);
    let a_dz = adj.matrix().spmm(&dz)?;
    let d_w1 = matmul_tn(&h, &a_dz)?;
    let mut d_h = matmul_nt(&a_dz, &model.w1)?;
    for (g_v, &s_v) in d_h.as_mut_slice().iter_mut().zip(s.as_slice()) {
        if s_v <= 0.0 {
            *g_v = 0.0;
        }
    }
    let a_dh = adj.matrix().spmm(&d_h)?;
    let mut d_w0 = features.tn_mm(&a_dh)?;
    for (dv, &wv) in d_w0.as_mut_slice().iter_mut().zip(model.w0.as_slice()) {
        *dv += model.weight_decay * wv;
    }

    let mut analytic = d_w0.as_slice().to_vec();
    analytic.extend_from_slice(d_w1.as_slice());
    let mut params = model.w0.as_slice().to_vec();
    params.extend_from_slice(model.w1.as_slice());

    let (f_dim, hidden) = (model.w0.dim(0), model.w0.dim(1));
    let classes = model.w1.dim(1);
    let labels = g.labels.clone();
    let mask = mask.clone();
    let wd = model.weight_decay;
    let adj = adj.clone();
    let xn2 = xn.clone();
    grad_check(
        move |pv: &[f64]| {
            let w0 = Tensor::new(vec![f_dim, hidden], pv[..f_dim * hidden].to_vec())?;
            let w1 = Tensor::new(vec![hidden, classes], pv[f_dim * hidden..].to_vec())?;
            let probe = GcnModel { w0, w1, dropout: 0.0, weight_decay: wd };
            let z = gcn_forward(&probe, &adj, &xn2, false, 0)?;
            Ok(masked_objective(&z, &labels, &mask, &probe.w0, wd).0)
        },
        &mut params,
        &analytic,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small synthetic graph: `classes` clusters of `per_class` nodes,
    /// one-hot class features, ring edges inside each cluster.
    pub(crate) fn separable_fixture(classes: usize, per_class: usize) -> KnowledgeGraph {
        let n = classes * per_class;
        let mut features = Tensor::zeros(vec![n, classes]);
        let mut labels = Vec::with_capacity(n);
        let mut edges = Vec::new();
        for c in 0..classes {
            for k in 0..per_class {
                let i = c * per_class + k;
                features.as_mut_slice()[i * classes + c] = 1.0;
                labels.push(c);
                if k > 0 {
                    edges.push((i - 1, i));
                }
            }
        }
        KnowledgeGraph {
            node_ids: (0..n).map(|i| format!("n{i}")).collect(),
            features,
            labels,
            edges,
            class_names: (0..classes).map(|c| format!("c{c}")).collect(),
        }
    }

    fn stratified_every_other(g: &KnowledgeGraph) -> LabelMask {
        LabelMask::new((0..g.num_nodes()).map(|i| i % 2 == 0).collect())
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let g = KnowledgeGraph {
            node_ids: vec!["a".into()],
            features: Tensor::zeros(vec![1, 2]),
            labels: vec![0],
            edges: vec![],
            class_names: vec!["c".into()],
        };
        let adj = normalize_adjacency(&g);
        assert_eq!(adj.matrix().densify().as_slice(), &[1.0]);
    }

    #[test]
    fn two_nodes_one_edge_gives_half_everywhere() {
        let g = KnowledgeGraph {
            node_ids: vec!["a".into(), "b".into()],
            features: Tensor::zeros(vec![2, 1]),
            labels: vec![0, 0],
            edges: vec![(0, 1)],
            class_names: vec!["c".into()],
        };
        let adj = normalize_adjacency(&g);
        let dense = adj.matrix().densify();
        for &v in dense.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn random_graph_matches_dense_normalization_oracle() {
        use rand::Rng;
        let n = 30;
        let mut rng = seeded_rng(60);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < 0.1 {
                    edges.push((i, j));
                }
            }
        }
        let g = KnowledgeGraph {
            node_ids: (0..n).map(|i| i.to_string()).collect(),
            features: Tensor::zeros(vec![n, 1]),
            labels: vec![0; n],
            edges: edges.clone(),
            class_names: vec!["c".into()],
        };
        let adj = normalize_adjacency(&g);
        adj.matrix().check_canonical().unwrap();

        // dense oracle
        let mut a = vec![vec![0.0f64; n]; n];
        for &(u, v) in &edges {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let dense = adj.matrix().densify();
        for i in 0..n {
            for j in 0..n {
                let expected = a[i][j] / (deg[i] * deg[j]).sqrt();
                assert!(
                    (dense.as_slice()[i * n + j] - expected).abs() < 1e-12,
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn adjacency_is_symmetric_and_scaled_degree_vector_is_fixed() {
        let g = separable_fixture(3, 8);
        let adj = normalize_adjacency(&g);
        let m = adj.matrix();
        let t = m.transpose();
        assert!(m.densify().max_abs_diff(&t.densify()) < 1e-12);

        // A * (D^{1/2} 1) == D^{1/2} 1
        let n = g.num_nodes();
        let mut neighbors = vec![1.0f64; n]; // self-loop
        for &(a, b) in &g.edges {
            neighbors[a] += 1.0;
            neighbors[b] += 1.0;
        }
        let v = Tensor::new(vec![n, 1], neighbors.iter().map(|d| d.sqrt()).collect()).unwrap();
        let av = m.spmm(&v).unwrap();
        assert!(av.max_abs_diff(&v) < 1e-9);
    }

    #[test]
    fn single_node_forward_reduces_to_plain_mlp() {
        let g = KnowledgeGraph {
            node_ids: vec!["a".into()],
            features: Tensor::new(vec![1, 4], vec![0.3, -0.2, 0.5, 0.1]).unwrap(),
            labels: vec![0],
            edges: vec![],
            class_names: vec!["x".into(), "y".into()],
        };
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 3, ..Default::default() };
        let model = GcnModel::init(4, 3, 2, &hp, 5);
        let z = gcn_forward(&model, &adj, &g.features, false, 0).unwrap();

        // matrix-free reference: softmax(relu(x W0) W1)
        let xw = matmul(&g.features, &model.w0).unwrap();
        let h = xw.map(|v| v.max(0.0));
        let logits = matmul(&h, &model.w1).unwrap();
        let expected = row_softmax(&logits);
        assert!(z.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn forward_rows_sum_to_one() {
        let g = separable_fixture(3, 10);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 5, ..Default::default() };
        let model = GcnModel::init(3, 5, 3, &hp, 1);
        for train_mode in [false, true] {
            let z = gcn_forward(&model, &adj, &g.features, train_mode, 9).unwrap();
            for r in 0..g.num_nodes() {
                let s: f64 = z.row(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eval_forward_ignores_dropout_seed() {
        let g = separable_fixture(2, 6);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 4, ..Default::default() };
        let model = GcnModel::init(2, 4, 2, &hp, 2);
        let a = gcn_forward(&model, &adj, &g.features, false, 1).unwrap();
        let b = gcn_forward(&model, &adj, &g.features, false, 999).unwrap();
        assert_eq!(a, b);
        // train mode differs across seeds
        let c = gcn_forward(&model, &adj, &g.features, true, 1).unwrap();
        let d = gcn_forward(&model, &adj, &g.features, true, 2).unwrap();
        assert_ne!(c, d);
    }

    #[test]
    fn masked_loss_gradient_check_on_small_fixture() {
        let g = separable_fixture(3, 4); // 12 nodes
        let adj = normalize_adjacency(&g);
        let mask = stratified_every_other(&g);
        let hp = GcnHyperparams { hidden: 5, ..Default::default() };
        let report = gcn_grad_check(&g, &adj, &mask, &hp, 3, &GradCheckOptions::default()).unwrap();
        assert_eq!(report.params_total, 3 * 5 + 5 * 3);
        assert!(
            report.max_relative_error < 1e-4,
            "max rel err {} (kinks {})",
            report.max_relative_error,
            report.kinks_skipped
        );
    }

    #[test]
    fn trains_separable_fixture_to_high_accuracy() {
        let g = separable_fixture(3, 10);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 8, epochs: 150, ..Default::default() };

        // mask = all nodes: training accuracy >= 99%
        let (model, curve) = gcn_train(&g, &adj, &LabelMask::all(30), &hp, 4).unwrap();
        assert_eq!(curve.len(), 150);
        let pred = gcn_infer(&model, &adj, &g.features).unwrap();
        let train_acc =
            pred.iter().zip(&g.labels).filter(|(a, b)| a == b).count() as f64 / 30.0;
        assert!(train_acc >= 0.99, "train accuracy {train_acc}");

        // half-masked: >= 95% on the unmasked half
        let mask = stratified_every_other(&g);
        let (model, _) = gcn_train(&g, &adj, &mask, &hp, 5).unwrap();
        let pred = gcn_infer(&model, &adj, &g.features).unwrap();
        let acc = unmasked_accuracy(&pred, &g.labels, &mask);
        assert!(acc >= 0.95, "unmasked accuracy {acc}");
    }

    #[test]
    fn zero_epochs_returns_init_and_empty_curve() {
        let g = separable_fixture(2, 4);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 3, epochs: 0, ..Default::default() };
        let (model, curve) = gcn_train(&g, &adj, &LabelMask::all(8), &hp, 6).unwrap();
        assert!(curve.is_empty());
        assert_eq!(model, GcnModel::init(2, 3, 2, &hp, 6));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let g = separable_fixture(3, 6);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams { hidden: 4, epochs: 40, ..Default::default() };
        let mask = stratified_every_other(&g);
        let (m1, c1) = gcn_train(&g, &adj, &mask, &hp, 11).unwrap();
        let (m2, c2) = gcn_train(&g, &adj, &mask, &hp, 11).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(c1, c2);
        let (_, c3) = gcn_train(&g, &adj, &mask, &hp, 12).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn empty_mask_and_uncovered_class_are_rejected() {
        let g = separable_fixture(2, 4);
        let adj = normalize_adjacency(&g);
        let hp = GcnHyperparams::default();
        let err = gcn_train(&g, &adj, &LabelMask::new(vec![false; 8]), &hp, 0).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        // mask covering only class 0
        let mask = LabelMask::new((0..8).map(|i| i < 4).collect());
        let err = gcn_train(&g, &adj, &mask, &hp, 0).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn uniform_rows_predict_class_zero() {
        // model with zero weights: logits all zero -> ties -> class 0
        let g = separable_fixture(3, 4);
        let adj = normalize_adjacency(&g);
        let model = GcnModel {
            w0: Tensor::zeros(vec![3, 4]),
            w1: Tensor::zeros(vec![4, 3]),
            dropout: 0.5,
            weight_decay: 0.0,
        };
        let pred = gcn_infer(&model, &adj, &g.features).unwrap();
        assert!(pred.iter().all(|&p| p == 0));
    }
}
