//! Semantic layer: message encoding, knowledge-base-driven label
//! compression with GCN recovery, a no-knowledge baseline, Hamming
//! distortion, scenario-aware prediction filtering, and new-class discovery
//! by clustering.
//!
//! Wire format for label subsets: per node, an unsigned LEB128 varint of the
//! node index followed by one class byte, nodes in ascending index order.

use rand::Rng;

use crate::cnn::{evaluate_accuracy, CnnModel};
use crate::datasets::citation::KnowledgeGraph;
use crate::datasets::mnist::LabeledImageSet;
use crate::error::{Error, Result};
use crate::gcn::{gcn_infer, gcn_train, normalize_adjacency, GcnHyperparams, LabelMask};
use crate::numerics::layers::argmax_row;
use crate::numerics::precision::Scalar;
use crate::numerics::tensor::Tensor;
use crate::util::{derive_seed, seeded_permutation, seeded_rng};

pub const RAW_IMAGE_BITS: u64 = 28 * 28 * 8;
pub const SEMANTIC_DIGIT_BITS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Raw,
    SemanticCode,
    LabelSubset,
}

/// A message on the wire: what kind of payload, the bytes, and the exact
/// bit count (always 8x byte length for these byte-granular kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMessage {
    pub kind: PayloadKind,
    pub payload: Vec<u8>,
    pub bits: u64,
}

impl SemanticMessage {
    pub fn new(kind: PayloadKind, payload: Vec<u8>) -> Self {
        let bits = payload.len() as u64 * 8;
        SemanticMessage { kind, payload, bits }
    }
}

/// The raw transmission of one 28x28 image: its original bytes.
pub fn raw_digit_message(image: &Tensor<f32>) -> SemanticMessage {
    let payload: Vec<u8> = image
        .as_slice()
        .iter()
        .map(|&p| (p * 255.0).round() as u8)
        .collect();
    SemanticMessage::new(PayloadKind::Raw, payload)
}

/// Runs the recognizer and sends the predicted digit as one ASCII byte.
pub fn encode_semantic_digit(
    image: &Tensor<f32>,
    recognizer: &CnnModel<f32>,
) -> Result<SemanticMessage> {
    let batch = image.reshaped(vec![1, 1, 28, 28])?;
    let (logits, _) = recognizer.forward(&batch)?;
    let digit = argmax_row(logits.row(0)) as u8;
    Ok(SemanticMessage::new(
        PayloadKind::SemanticCode,
        vec![b'0' + digit],
    ))
}

/// Transfer economics of raw vs semantic digit delivery.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitEconomics {
    pub images: u64,
    pub raw_bits: u64,
    pub semantic_bits: u64,
    /// raw bits per semantic bit
    pub ratio: f64,
    pub recognizer_accuracy: f64,
    /// A semantic message is wrong exactly when the recognizer is.
    pub expected_delivery_error: f64,
}

/// Accounts raw vs semantic bits over a test set by building the actual
/// messages, and reports the recognizer's accuracy alongside.
pub fn digit_economics(
    recognizer: &CnnModel<f32>,
    test: &LabeledImageSet,
    images: usize,
) -> Result<DigitEconomics> {
    let n = images.min(test.len());
    let mut raw_bits = 0u64;
    let mut semantic_bits = 0u64;
    for i in 0..n {
        let image = test.image(i);
        raw_bits += raw_digit_message(&image).bits;
        semantic_bits += encode_semantic_digit(&image, recognizer)?.bits;
    }
    let accuracy = evaluate_accuracy(recognizer, test)?;
    Ok(DigitEconomics {
        images: n as u64,
        raw_bits,
        semantic_bits,
        ratio: raw_bits as f64 / semantic_bits as f64,
        recognizer_accuracy: accuracy,
        expected_delivery_error: 1.0 - accuracy,
    })
}

// label-subset wire format

fn push_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

fn varint_len(v: u64) -> usize {
    (((64 - v.max(1).leading_zeros() as usize) + 6) / 7).max(1)
}

/// Serializes (node index, label) pairs: ascending node order, varint index
/// plus one label byte each.
pub fn encode_label_subset(pairs: &[(u64, u8)]) -> SemanticMessage {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable_by_key(|&(i, _)| i);
    let mut payload = Vec::new();
    for (idx, label) in sorted {
        push_varint(&mut payload, idx);
        payload.push(label);
    }
    SemanticMessage::new(PayloadKind::LabelSubset, payload)
}

/// Parses a label-subset payload back into (node index, label) pairs.
pub fn decode_label_subset(payload: &[u8]) -> Result<Vec<(u64, u8)>> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < payload.len() {
        let mut v = 0u64;
        let mut shift = 0u32;
        loop {
            if pos >= payload.len() {
                return Err(Error::format(
                    "<label-subset>",
                    format!("offset {pos}"),
                    "truncated varint",
                ));
            }
            let byte = payload[pos];
            pos += 1;
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                break;
            }
            shift += 7;
            if shift >= 64 {
                return Err(Error::format(
                    "<label-subset>",
                    format!("offset {pos}"),
                    "varint too long",
                ));
            }
        }
        if pos >= payload.len() {
            return Err(Error::format(
                "<label-subset>",
                format!("offset {pos}"),
                "missing label byte",
            ));
        }
        out.push((v, payload[pos]));
        pos += 1;
    }
    Ok(out)
}

/// Payload bytes for one mask over the graph's labels.
fn label_subset_bytes(g: &KnowledgeGraph, mask: &LabelMask) -> SemanticMessage {
    let pairs: Vec<(u64, u8)> = mask
        .masked_indices()
        .map(|i| (i as u64, g.labels[i] as u8))
        .collect();
    encode_label_subset(&pairs)
}

/// Stratified random mask of exactly `target` nodes: per-class quotas
/// proportional to class size, leftover seats by a seeded lottery weighted by
/// the fractional remainders. Errors if any class would end up uncovered.
fn stratified_mask(g: &KnowledgeGraph, target: usize, seed: u64) -> Result<LabelMask> {
    let n = g.num_nodes();
    let c = g.num_classes();
    if target > n {
        return Err(Error::Argument(format!("mask of {target} nodes on {n}-node graph")));
    }
    let hist = g.class_histogram();
    let mut quota: Vec<usize> = Vec::with_capacity(c);
    let mut frac: Vec<f64> = Vec::with_capacity(c);
    for &count in &hist {
        let exact = target as f64 * count as f64 / n as f64;
        quota.push(exact.floor() as usize);
        frac.push(exact - exact.floor());
    }
    let mut remaining = target - quota.iter().sum::<usize>();

    // weighted lottery without replacement over the fractional remainders
    let mut rng = seeded_rng(derive_seed(seed, 0x6c6f_7474, target as u64));
    let mut candidates: Vec<usize> = (0..c).filter(|&i| frac[i] > 0.0 && quota[i] < hist[i]).collect();
    while remaining > 0 && !candidates.is_empty() {
        let total: f64 = candidates.iter().map(|&i| frac[i]).sum();
        let mut draw = rng.random::<f64>() * total;
        let mut pick = candidates.len() - 1;
        for (pos, &i) in candidates.iter().enumerate() {
            draw -= frac[i];
            if draw <= 0.0 {
                pick = pos;
                break;
            }
        }
        let class = candidates.swap_remove(pick);
        quota[class] += 1;
        remaining -= 1;
    }
    if remaining > 0 {
        // all remainders exhausted; pad classes with spare nodes deterministically
        for i in 0..c {
            while remaining > 0 && quota[i] < hist[i] {
                quota[i] += 1;
                remaining -= 1;
            }
        }
    }
    if let Some(missing) = quota.iter().position(|&q| q == 0) {
        return Err(Error::Argument(format!(
            "mask of {target} nodes cannot cover class {} ({})",
            missing, g.class_names[missing]
        )));
    }

    let mut mask = vec![false; n];
    for class in 0..c {
        let members: Vec<usize> = (0..n).filter(|&i| g.labels[i] == class).collect();
        let order = seeded_permutation(members.len(), derive_seed(seed, 0x7374_7261, class as u64));
        for &slot in order.iter().take(quota[class]) {
            mask[members[slot]] = true;
        }
    }
    Ok(LabelMask::new(mask))
}

/// Stratified mask of floor(fraction * N) nodes covering every class.
pub fn select_label_subset(g: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<LabelMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!("fraction {fraction} outside (0, 1]")));
    }
    let target = (fraction * g.num_nodes() as f64).floor() as usize;
    if target == 0 {
        return Err(Error::Argument(format!(
            "fraction {fraction} selects zero of {} nodes",
            g.num_nodes()
        )));
    }
    stratified_mask(g, target, seed)
}

/// Source sends a stratified label subset; the destination (sharing graph
/// structure and features) trains the label-inference model on it and
/// recovery accuracy is measured on the unsent nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub fraction_labels_sent: f64,
    pub mask_size: usize,
    pub bytes_sent: u64,
    pub bits_sent: u64,
    pub compression_rate: f64,
    pub recovery_accuracy: f64,
    /// True when nothing was left to recover (fraction 1.0).
    pub vacuous: bool,
    pub seed: u64,
}

pub fn compress_and_recover(
    g: &KnowledgeGraph,
    fraction: f64,
    seed: u64,
) -> Result<CompressionReport> {
    compress_and_recover_with(g, fraction, seed, &GcnHyperparams::default())
}

pub fn compress_and_recover_with(
    g: &KnowledgeGraph,
    fraction: f64,
    seed: u64,
    hp: &GcnHyperparams,
) -> Result<CompressionReport> {
    let mask = select_label_subset(g, fraction, seed)?;
    let message = label_subset_bytes(g, &mask);
    let unsent = g.num_nodes() - mask.count();

    let (recovery_accuracy, vacuous) = if unsent == 0 {
        (1.0, true)
    } else {
        let adj = normalize_adjacency(g);
        let (model, _) = gcn_train(g, &adj, &mask, hp, seed)?;
        let predicted = gcn_infer(&model, &adj, &g.features)?;
        (
            crate::gcn::unmasked_accuracy(&predicted, &g.labels, &mask),
            false,
        )
    };
    Ok(CompressionReport {
        fraction_labels_sent: fraction,
        mask_size: mask.count(),
        bytes_sent: message.payload.len() as u64,
        bits_sent: message.bits,
        compression_rate: 1.0 - fraction,
        recovery_accuracy,
        vacuous,
        seed,
    })
}

/// Fraction of positions where the two label vectors disagree.
pub fn hamming_distortion(truth: &[usize], recovered: &[usize]) -> Result<f64> {
    if truth.len() != recovered.len() {
        return Err(Error::Argument(format!(
            "hamming_distortion: {} vs {} labels",
            truth.len(),
            recovered.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let mismatches = truth
        .iter()
        .zip(recovered)
        .filter(|(a, b)| a != b)
        .count();
    Ok(mismatches as f64 / truth.len() as f64)
}

fn majority_fill(received: &[(usize, usize)], n: usize, classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; classes.max(1)];
    for &(_, label) in received {
        counts[label] += 1;
    }
    // tie-break toward the lowest class index; empty reception gives class 0
    let mut majority = 0usize;
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > counts[majority] {
            majority = c;
        }
    }
    let mut out = vec![majority; n];
    for &(i, label) in received {
        out[i] = label;
    }
    out
}

fn baseline_selection(g: &KnowledgeGraph, bit_budget: u64, seed: u64) -> (Vec<usize>, u64) {
    let n = g.num_nodes();
    let order = seeded_permutation(n, derive_seed(seed, 0x6261_7365, bit_budget));
    let mut bytes = 0u64;
    let mut chosen: Vec<usize> = Vec::new();
    for &i in &order {
        let record = varint_len(i as u64) as u64 + 1;
        if (bytes + record) * 8 > bit_budget {
            break;
        }
        bytes += record;
        chosen.push(i);
    }
    (chosen, bytes * 8)
}

/// How many nodes (and bits) the baseline sends at a budget.
pub fn baseline_sent_count(g: &KnowledgeGraph, bit_budget: u64, seed: u64) -> (usize, u64) {
    let (chosen, bits) = baseline_selection(g, bit_budget, seed);
    (chosen.len(), bits)
}

/// Destination without any knowledge base: the source sends labels for as
/// many seeded-random nodes as the bit budget allows (same wire format) and
/// the unsent nodes are filled with the majority class of what arrived.
pub fn baseline_no_knowledge(
    g: &KnowledgeGraph,
    bit_budget: u64,
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    let (chosen, _) = baseline_selection(g, bit_budget, seed);
    let received: Vec<(usize, usize)> = chosen.iter().map(|&i| (i, g.labels[i])).collect();
    let recovered = majority_fill(&received, g.num_nodes(), g.num_classes());
    let distortion = hamming_distortion(&g.labels, &recovered)?;
    Ok((recovered, distortion))
}

/// Outcome of the knowledge-base scheme at a fixed bit budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedRecovery {
    pub sent_nodes: usize,
    pub bits_sent: u64,
    pub recovered: Vec<usize>,
    pub distortion: f64,
    /// True when the budget could not cover one node per class and the
    /// scheme degraded to majority fill over the sent labels.
    pub degraded: bool,
}

/// Semantic scheme under a bit budget: send the largest stratified label
/// subset whose serialization fits, infer the rest over the shared graph.
/// Budgets too small to cover every class degrade to the baseline fill.
pub fn semantic_scheme_at_budget(
    g: &KnowledgeGraph,
    bit_budget: u64,
    seed: u64,
) -> Result<BudgetedRecovery> {
    semantic_scheme_at_budget_with(g, bit_budget, seed, &GcnHyperparams::default())
}

pub fn semantic_scheme_at_budget_with(
    g: &KnowledgeGraph,
    bit_budget: u64,
    seed: u64,
    hp: &GcnHyperparams,
) -> Result<BudgetedRecovery> {
    let n = g.num_nodes();
    let payload_bits = |k: usize| -> Result<Option<u64>> {
        match stratified_mask(g, k, seed) {
            Ok(mask) => Ok(Some(label_subset_bytes(g, &mask).bits)),
            Err(Error::Argument(_)) => Ok(None), // cannot cover classes at this k
            Err(e) => Err(e),
        }
    };

    // payload grows ~linearly in k; binary search then settle locally
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        let fits = match payload_bits(mid)? {
            Some(bits) => bits <= bit_budget,
            None => mid <= g.num_classes(), // keep searching upward while below coverage
        };
        if fits {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut k = lo;
    while k < n && matches!(payload_bits(k + 1)?, Some(b) if b <= bit_budget) {
        k += 1;
    }
    while k > 0 && matches!(payload_bits(k)?, Some(b) if b > bit_budget) {
        k -= 1;
    }

    let mask = if k == 0 { None } else { stratified_mask(g, k, seed).ok() };
    match mask {
        Some(mask) if mask.count() > 0 => {
            let message = label_subset_bytes(g, &mask);
            debug_assert!(message.bits <= bit_budget);
            let recovered = if mask.count() == n {
                g.labels.clone()
            } else {
                let adj = normalize_adjacency(g);
                let (model, _) = gcn_train(g, &adj, &mask, hp, seed)?;
                let mut predicted = gcn_infer(&model, &adj, &g.features)?;
                for i in mask.masked_indices() {
                    predicted[i] = g.labels[i];
                }
                predicted
            };
            let distortion = hamming_distortion(&g.labels, &recovered)?;
            Ok(BudgetedRecovery {
                sent_nodes: mask.count(),
                bits_sent: message.bits,
                recovered,
                distortion,
                degraded: false,
            })
        }
        _ => {
            let (recovered, distortion) = baseline_no_knowledge(g, bit_budget, seed)?;
            let sent = recovered.len().min(
                (bit_budget / 8 / 2) as usize, // lower bound, reporting only
            );
            Ok(BudgetedRecovery {
                sent_nodes: sent,
                bits_sent: bit_budget.min(8 * 2 * sent as u64),
                recovered,
                distortion,
                degraded: true,
            })
        }
    }
}

// scenario-aware sensing filter

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationKind {
    Road,
    Residential,
    Factory,
    Office,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Day,
    Night,
    Peak,
    Idle,
}

/// Sensing context: scenario tags plus the class subset they admit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioContext {
    pub location: LocationKind,
    pub time: TimeKind,
    admissible: Vec<usize>,
}

impl ScenarioContext {
    pub fn new(location: LocationKind, time: TimeKind, mut admissible: Vec<usize>) -> Result<Self> {
        admissible.sort_unstable();
        admissible.dedup();
        if admissible.is_empty() {
            return Err(Error::Argument("admissible class set is empty".into()));
        }
        Ok(ScenarioContext { location, time, admissible })
    }

    /// Canonical tag-to-digit-subset table for the digit recognizer.
    pub fn for_digits(location: LocationKind, time: TimeKind) -> Self {
        let admissible: Vec<usize> = match location {
            LocationKind::Road => (0..10).collect(),
            LocationKind::Residential => vec![0, 1, 2, 3, 4, 5, 6],
            LocationKind::Factory => vec![0, 1, 2, 3, 4],
            LocationKind::Office => vec![5, 6, 7, 8, 9],
        };
        ScenarioContext { location, time, admissible }
    }

    pub fn admissible(&self) -> &[usize] {
        &self.admissible
    }
}

/// Argmax restricted to the admissible classes, per row.
pub fn apply_scenario_filter<T: Scalar>(logits: &Tensor<T>, ctx: &ScenarioContext) -> Vec<usize> {
    debug_assert_eq!(logits.rank(), 2);
    let rows = logits.dim(0);
    (0..rows)
        .map(|r| {
            let row = logits.row(r);
            let mut best = ctx.admissible[0];
            for &c in &ctx.admissible[1..] {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

// new-class discovery

#[derive(Debug, Clone)]
pub struct ClassDiscovery {
    /// Cluster index in [0, k) per input row.
    pub assignments: Vec<usize>,
    /// Fresh label ids to append to the knowledge-base class list.
    pub new_label_ids: Vec<usize>,
    pub centroids: Tensor<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_per_iteration: Vec<f64>,
    pub iterations: usize,
}

const LLOYD_CAP: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters unrecognized feature vectors with seeded k-means++ and Lloyd
/// iterations to an assignment fixpoint (or an iteration cap); each cluster
/// receives a fresh label id starting at `existing_classes`.
pub fn discover_new_classes(
    features: &Tensor<f64>,
    k: usize,
    seed: u64,
    existing_classes: usize,
) -> Result<ClassDiscovery> {
    if features.rank() != 2 {
        return Err(Error::Argument(format!(
            "discover_new_classes: expected M x F features, got {:?}",
            features.shape()
        )));
    }
    let (m, f) = (features.dim(0), features.dim(1));
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    if m < k {
        return Err(Error::Argument(format!("{m} samples for {k} clusters")));
    }

    // k-means++ seeding
    let mut rng = seeded_rng(seed);
    let row = |i: usize| &features.as_slice()[i * f..(i + 1) * f];
    let mut centroid_rows: Vec<usize> = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = (0..m).map(|i| sq_dist(row(i), row(centroid_rows[0]))).collect();
    while centroid_rows.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total == 0.0 {
            rng.random_range(0..m)
        } else {
            let mut draw = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroid_rows.push(next);
        for i in 0..m {
            d2[i] = d2[i].min(sq_dist(row(i), row(next)));
        }
    }
    let mut centroids: Vec<Vec<f64>> = centroid_rows.iter().map(|&i| row(i).to_vec()).collect();

    let mut assignments = vec![0usize; m];
    let mut wcss_trace = Vec::new();
    let mut iterations = 0;
    loop {
        // assignment step (ties toward the lowest cluster index)
        let mut wcss = 0.0;
        let mut changed = false;
        for i in 0..m {
            let mut best = 0usize;
            let mut best_d = sq_dist(row(i), &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(row(i), centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            wcss += best_d;
        }
        wcss_trace.push(wcss);
        iterations += 1;
        if (!changed && iterations > 1) || iterations >= LLOYD_CAP {
            break;
        }
        // update step; empty clusters keep their previous centroid
        let mut sums = vec![vec![0.0f64; f]; k];
        let mut counts = vec![0usize; k];
        for i in 0..m {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }

    Ok(ClassDiscovery {
        assignments,
        new_label_ids: (existing_classes..existing_classes + k).collect(),
        centroids: Tensor::new(vec![k, f], centroids.into_iter().flatten().collect())
            .expect("k x f centroid matrix"),
        wcss_per_iteration: wcss_trace,
        iterations,
    })
}
