//! Collaboration layer: edge servers holding shards and local models, a
//! coordinator running parameter-averaging rounds, and the resource ledger
//! (samples, simulated compute time, storage, uplink/downlink bits).
//!
//! One round: broadcast the global model to the selected servers, each runs
//! its local epochs, the coordinator aggregates the returned parameters
//! weighted by shard size, then evaluates on the test set. Simulated compute
//! time is `samples x per-sample cost`; a round's parallel time is the max
//! across its participants.

use rand::Rng;

use crate::cnn::{cnn_train_epoch, evaluate_accuracy, CnnModel, TrainConfig};
use crate::datasets::mnist::LabeledImageSet;
use crate::datasets::partition::{partition_iid, Shard};
use crate::error::{Error, Result};
use crate::numerics::precision::Scalar;
use crate::util::{derive_seed, seeded_rng};

const STREAM_PARTITION: u64 = 0xfeed_0001;
const STREAM_TRAIN: u64 = 0xfeed_0002;
const STREAM_SELECT: u64 = 0xfeed_0003;

/// Bytes a server commits to its shard: 784 pixel bytes + 1 label byte per
/// sample.
pub const SHARD_BYTES_PER_SAMPLE: u64 = 28 * 28 + 1;

#[derive(Debug, Clone)]
pub struct FedConfig {
    pub train: TrainConfig,
    /// Fraction of servers selected each round (1.0 = all).
    pub participation: f64,
    pub round_cap: usize,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            train: TrainConfig::default(),
            participation: 1.0,
            round_cap: 30,
        }
    }
}

/// One edge server: its shard, its current local model, and its cumulative
/// slice of the cost ledger.
#[derive(Debug, Clone)]
pub struct EdgeServerState<T: Scalar> {
    pub id: usize,
    pub shard: Shard,
    pub model: CnnModel<T>,
    pub costs: ServerCosts,
}

/// Cumulative per-server resource counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerCosts {
    pub samples_processed: u64,
    pub sim_compute_seconds: f64,
    pub measured_wall_seconds: f64,
    pub storage_bytes: u64,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
}

/// Coordinator: the global model plus round bookkeeping.
#[derive(Debug, Clone)]
pub struct CoordinatorState<T: Scalar> {
    pub global: CnnModel<T>,
    pub round: usize,
    pub participation: f64,
    pub history: Vec<RoundReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub participants: Vec<usize>,
    pub test_accuracy: f64,
    pub mean_local_loss: f64,
    /// Max of the participants' simulated compute seconds this round.
    pub parallel_sim_seconds: f64,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
}

/// Full ledger of a run: per-server cumulative costs plus per-round reports.
#[derive(Debug, Clone, Default)]
pub struct CostLedger {
    pub per_server: Vec<ServerCosts>,
    pub rounds: Vec<RoundReport>,
}

impl CostLedger {
    /// Simulated wall-clock of the whole run with rounds costed in parallel.
    pub fn parallel_sim_seconds(&self) -> f64 {
        self.rounds.iter().map(|r| r.parallel_sim_seconds).sum()
    }

    pub fn total_uplink_bits(&self) -> u64 {
        self.rounds.iter().map(|r| r.uplink_bits).sum()
    }

    pub fn total_downlink_bits(&self) -> u64 {
        self.rounds.iter().map(|r| r.downlink_bits).sum()
    }
}

/// Per-parameter weighted mean of the models, weights proportional to
/// sample counts.
///
/// Contributions are accumulated in f64 in a canonical order (sorted by
/// weight, then by parameter bit pattern), which makes the result exactly
/// invariant to permutations of the (model, weight) pairs; weights are
/// gcd-reduced first so scaling them all by a constant changes nothing.
pub fn fedavg_aggregate<T: Scalar>(models: &[&CnnModel<T>], weights: &[u64]) -> Result<CnnModel<T>> {
    if models.is_empty() {
        return Err(Error::Aggregation("no models to aggregate".into()));
    }
    if models.len() != weights.len() {
        return Err(Error::Aggregation(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w == 0) {
        return Err(Error::Aggregation("weights must be positive".into()));
    }
    let shape0: Vec<Vec<usize>> = models[0]
        .tensors()
        .iter()
        .map(|(_, t)| t.shape().to_vec())
        .collect();
    for m in models.iter().skip(1) {
        for ((_, t), expected) in m.tensors().iter().zip(&shape0) {
            if t.shape() != expected.as_slice() {
                return Err(Error::Aggregation(format!(
                    "tensor shape {:?} does not match {:?}",
                    t.shape(),
                    expected
                )));
            }
        }
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = weights.iter().copied().fold(0, gcd);
    let reduced: Vec<u64> = weights.iter().map(|&w| w / g).collect();
    let total: u64 = reduced.iter().sum();

    let mut order: Vec<usize> = (0..models.len()).collect();
    order.sort_by(|&a, &b| {
        reduced[a].cmp(&reduced[b]).then_with(|| {
            for ((_, ta), (_, tb)) in models[a].tensors().iter().zip(models[b].tensors()) {
                for (&va, &vb) in ta.as_slice().iter().zip(tb.as_slice()) {
                    match va.to_bits_u64().cmp(&vb.to_bits_u64()) {
                        std::cmp::Ordering::Equal => continue,
                        other => return other,
                    }
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let mut out = models[0].zeros_like();
    let mut acc: Vec<Vec<f64>> = out
        .tensors()
        .iter()
        .map(|(_, t)| vec![0.0f64; t.len()])
        .collect();
    for &i in &order {
        let w = reduced[i] as f64 / total as f64;
        for ((_, t), accum) in models[i].tensors().iter().zip(acc.iter_mut()) {
            for (a, &v) in accum.iter_mut().zip(t.as_slice()) {
                *a += w * v.to_f64();
            }
        }
    }
    for ((_, t), accum) in out.tensors_mut().into_iter().zip(acc) {
        for (dst, a) in t.as_mut_slice().iter_mut().zip(accum) {
            *dst = T::from_f64(a);
        }
    }
    Ok(out)
}

/// Creates the servers for a run by IID-partitioning the training set.
pub fn make_servers<T: Scalar>(
    train: &LabeledImageSet,
    servers: usize,
    global: &CnnModel<T>,
    cfg: &FedConfig,
) -> Result<Vec<EdgeServerState<T>>> {
    let shards = partition_iid(
        train.len(),
        servers,
        derive_seed(cfg.train.seed, STREAM_PARTITION, servers as u64),
    )?;
    Ok(shards
        .into_iter()
        .map(|shard| {
            let storage =
                shard.len() as u64 * SHARD_BYTES_PER_SAMPLE + global.storage_bytes();
            EdgeServerState {
                id: shard.owner,
                shard,
                model: global.clone(),
                costs: ServerCosts {
                    storage_bytes: storage,
                    ..Default::default()
                },
            }
        })
        .collect())
}

fn select_participants(round: usize, servers: usize, cfg: &FedConfig) -> Vec<usize> {
    let k = ((cfg.participation * servers as f64).ceil() as usize).clamp(1, servers);
    if k == servers {
        return (0..servers).collect();
    }
    let mut rng = seeded_rng(derive_seed(cfg.train.seed, STREAM_SELECT, round as u64));
    let mut pool: Vec<usize> = (0..servers).collect();
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Executes one federation round; mutates the coordinator and the selected
/// servers, returns the round report.
pub fn run_round<T: Scalar>(
    coord: &mut CoordinatorState<T>,
    servers: &mut [EdgeServerState<T>],
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    cfg: &FedConfig,
) -> Result<RoundReport> {
    let round = coord.round;
    let participants = select_participants(round, servers.len(), cfg);
    let model_bits = coord.global.storage_bytes() * 8;

    let mut trained: Vec<(usize, CnnModel<T>, u64)> = Vec::with_capacity(participants.len());
    let mut parallel_sim = 0.0f64;
    let mut loss_sum = 0.0;
    let mut sample_sum = 0u64;
    for &id in &participants {
        let server = &mut servers[id];
        let wall = std::time::Instant::now();
        server.model = coord.global.clone();
        server.costs.downlink_bits += model_bits;
        let mut server_sim = 0.0;
        let mut last_loss = 0.0;
        for epoch in 0..cfg.train.local_epochs {
            let mut epoch_cfg = cfg.train.clone();
            epoch_cfg.seed = derive_seed(
                cfg.train.seed,
                STREAM_TRAIN,
                (round as u64) << 32 | (id as u64) << 8 | epoch as u64,
            );
            let stats = cnn_train_epoch(&mut server.model, train, &server.shard, &epoch_cfg)?;
            server.costs.samples_processed += stats.samples_processed;
            server.costs.sim_compute_seconds += stats.sim_compute_seconds;
            server_sim += stats.sim_compute_seconds;
            last_loss = stats.mean_loss;
        }
        server.costs.uplink_bits += model_bits;
        server.costs.measured_wall_seconds += wall.elapsed().as_secs_f64();
        parallel_sim = parallel_sim.max(server_sim);
        loss_sum += last_loss * server.shard.len() as f64;
        sample_sum += server.shard.len() as u64;
        trained.push((id, server.model.clone(), server.shard.len() as u64));
    }

    let models: Vec<&CnnModel<T>> = trained.iter().map(|(_, m, _)| m).collect();
    let weights: Vec<u64> = trained.iter().map(|(_, _, w)| *w).collect();
    coord.global = fedavg_aggregate(&models, &weights)?;
    coord.round += 1;
    let test_accuracy = evaluate_accuracy(&coord.global, test)?;

    let report = RoundReport {
        round,
        participants: participants.clone(),
        test_accuracy,
        mean_local_loss: loss_sum / sample_sum as f64,
        parallel_sim_seconds: parallel_sim,
        uplink_bits: participants.len() as u64 * model_bits,
        downlink_bits: participants.len() as u64 * model_bits,
    };
    coord.history.push(report.clone());
    Ok(report)
}

/// Outcome of a full run; non-convergence within the round cap is a result,
/// not an error.
#[derive(Debug, Clone)]
pub struct FedRunOutcome<T: Scalar> {
    pub model: CnnModel<T>,
    pub ledger: CostLedger,
    pub rounds_run: usize,
    pub converged: bool,
    pub final_accuracy: f64,
    pub shard_sizes: Vec<usize>,
}

/// Repeats rounds until the post-aggregation test accuracy reaches
/// `target_accuracy` or the round cap is hit.
pub fn train_to_target<T: Scalar>(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    servers: usize,
    target_accuracy: f64,
    cfg: &FedConfig,
) -> Result<FedRunOutcome<T>> {
    if !(target_accuracy > 0.0 && target_accuracy < 1.0) {
        return Err(Error::Argument(format!(
            "target accuracy {target_accuracy} outside (0, 1)"
        )));
    }
    let global = CnnModel::<T>::init(cfg.train.seed);
    let mut edge = make_servers(train, servers, &global, cfg)?;
    let mut coord = CoordinatorState {
        global,
        round: 0,
        participation: cfg.participation,
        history: Vec::new(),
    };
    let mut converged = false;
    let mut final_accuracy = 0.0;
    while coord.round < cfg.round_cap {
        let report = run_round(&mut coord, &mut edge, train, test, cfg)?;
        final_accuracy = report.test_accuracy;
        if report.test_accuracy >= target_accuracy {
            converged = true;
            break;
        }
    }
    Ok(FedRunOutcome {
        model: coord.global,
        ledger: CostLedger {
            per_server: edge.iter().map(|s| s.costs.clone()).collect(),
            rounds: coord.history,
        },
        rounds_run: coord.round,
        converged,
        final_accuracy,
        shard_sizes: edge.iter().map(|s| s.shard.len()).collect(),
    })
}

/// The per-server averages behind the resource plots: running time, local
/// storage, held labeled samples (plus cumulative processed samples).
#[derive(Debug, Clone, PartialEq)]
pub struct PerServerAverages {
    pub servers: usize,
    pub avg_sim_compute_seconds: f64,
    pub avg_storage_bytes: f64,
    pub avg_labeled_samples: f64,
    pub avg_samples_processed: f64,
    pub parallel_sim_seconds: f64,
}

pub fn ledger_report<T: Scalar>(outcome: &FedRunOutcome<T>) -> PerServerAverages {
    let k = outcome.ledger.per_server.len().max(1);
    let kf = k as f64;
    PerServerAverages {
        servers: k,
        avg_sim_compute_seconds: outcome
            .ledger
            .per_server
            .iter()
            .map(|c| c.sim_compute_seconds)
            .sum::<f64>()
            / kf,
        avg_storage_bytes: outcome
            .ledger
            .per_server
            .iter()
            .map(|c| c.storage_bytes as f64)
            .sum::<f64>()
            / kf,
        avg_labeled_samples: outcome.shard_sizes.iter().map(|&s| s as f64).sum::<f64>() / kf,
        avg_samples_processed: outcome
            .ledger
            .per_server
            .iter()
            .map(|c| c.samples_processed as f64)
            .sum::<f64>()
            / kf,
        parallel_sim_seconds: outcome.ledger.parallel_sim_seconds(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::mnist::Split;
    use crate::numerics::tensor::Tensor;
    use crate::util::seeded_rng;
    use proptest::prelude::*;

    fn tiny_set(n: usize, seed: u64) -> LabeledImageSet {
        let mut rng = seeded_rng(seed);
        use rand::Rng;
        LabeledImageSet {
            images: Tensor::<f32>::random_uniform(vec![n, 1, 28, 28], 0.0, 1.0, &mut rng),
            labels: (0..n).map(|_| rng.random_range(0..10)).collect(),
            split: Split::Train,
        }
    }

    fn one_param_model(v: f64) -> CnnModel<f64> {
        let mut m = CnnModel::<f64>::init(0).zeros_like();
        m.fc2_b.as_mut_slice()[0] = v;
        m
    }

    #[test]
    fn identical_models_are_a_fixed_point() {
        let m = CnnModel::<f32>::init(7);
        let agg = fedavg_aggregate(&[&m, &m, &m], &[5, 1, 9]).unwrap();
        assert_eq!(agg, m);
    }

    #[test]
    fn equal_weights_give_arithmetic_mean() {
        let a = one_param_model(1.0);
        let b = one_param_model(3.0);
        let agg = fedavg_aggregate(&[&a, &b], &[4, 4]).unwrap();
        assert_eq!(agg.fc2_b.as_slice()[0], 2.0);
    }

    #[test]
    fn hand_computed_weighted_mean() {
        let a = one_param_model(2.0);
        let b = one_param_model(6.0);
        let agg = fedavg_aggregate(&[&a, &b], &[1, 3]).unwrap();
        assert_eq!(agg.fc2_b.as_slice()[0], 5.0);
    }

    #[test]
    fn aggregation_rejects_bad_inputs() {
        let a = one_param_model(1.0);
        assert!(matches!(
            fedavg_aggregate::<f64>(&[], &[]),
            Err(Error::Aggregation(_))
        ));
        assert!(fedavg_aggregate(&[&a], &[0]).is_err());
        assert!(fedavg_aggregate(&[&a], &[1, 2]).is_err());
    }

    #[test]
    fn weight_scaling_leaves_aggregate_bitwise_unchanged() {
        let a = CnnModel::<f32>::init(1);
        let b = CnnModel::<f32>::init(2);
        let c = CnnModel::<f32>::init(3);
        let base = fedavg_aggregate(&[&a, &b, &c], &[2, 3, 5]).unwrap();
        for scale in [2u64, 7, 1000] {
            let scaled = fedavg_aggregate(&[&a, &b, &c], &[2 * scale, 3 * scale, 5 * scale]).unwrap();
            assert_eq!(base, scaled, "scale {scale}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_aggregation_is_permutation_invariant(
            seeds in proptest::collection::vec(0u64..50, 2..5),
            weights in proptest::collection::vec(1u64..100, 2..5),
            perm_seed in 0u64..1000,
        ) {
            let n = seeds.len().min(weights.len());
            let models: Vec<CnnModel<f32>> = seeds[..n].iter().map(|&s| CnnModel::init(s)).collect();
            let refs: Vec<&CnnModel<f32>> = models.iter().collect();
            let base = fedavg_aggregate(&refs, &weights[..n]).unwrap();

            let perm = crate::util::seeded_permutation(n, perm_seed);
            let p_models: Vec<&CnnModel<f32>> = perm.iter().map(|&i| refs[i]).collect();
            let p_weights: Vec<u64> = perm.iter().map(|&i| weights[i]).collect();
            let permuted = fedavg_aggregate(&p_models, &p_weights).unwrap();
            prop_assert_eq!(base, permuted);
        }
    }

    #[test]
    fn single_server_round_equals_plain_epoch_bitwise() {
        let train = tiny_set(24, 80);
        let test = tiny_set(12, 81);
        let cfg = FedConfig {
            train: TrainConfig { seed: 5, ..Default::default() },
            ..Default::default()
        };
        let global = CnnModel::<f32>::init(5);
        let mut servers = make_servers(&train, 1, &global, &cfg).unwrap();
        let mut coord = CoordinatorState {
            global: global.clone(),
            round: 0,
            participation: 1.0,
            history: Vec::new(),
        };
        run_round(&mut coord, &mut servers, &train, &test, &cfg).unwrap();

        // plain SGD epoch over the same shard with the same derived seed
        let mut plain = global.clone();
        let mut epoch_cfg = cfg.train.clone();
        epoch_cfg.seed = derive_seed(5, STREAM_TRAIN, 0);
        cnn_train_epoch(&mut plain, &train, &servers[0].shard, &epoch_cfg).unwrap();
        assert_eq!(coord.global, plain);
    }

    #[test]
    fn zero_learning_rate_round_is_a_null_step() {
        let train = tiny_set(20, 90);
        let test = tiny_set(10, 91);
        let cfg = FedConfig {
            train: TrainConfig { learning_rate: 0.0, seed: 2, ..Default::default() },
            ..Default::default()
        };
        let global = CnnModel::<f32>::init(2);
        let mut servers = make_servers(&train, 2, &global, &cfg).unwrap();
        let mut coord = CoordinatorState {
            global: global.clone(),
            round: 0,
            participation: 1.0,
            history: Vec::new(),
        };
        run_round(&mut coord, &mut servers, &train, &test, &cfg).unwrap();
        assert_eq!(coord.global, global);
    }

    #[test]
    fn rounds_are_deterministic_across_reruns() {
        let train = tiny_set(32, 95);
        let test = tiny_set(16, 96);
        let cfg = FedConfig {
            train: TrainConfig { seed: 13, ..Default::default() },
            ..Default::default()
        };
        let mk = || {
            let global = CnnModel::<f32>::init(13);
            let mut servers = make_servers(&train, 4, &global, &cfg).unwrap();
            let mut coord = CoordinatorState {
                global,
                round: 0,
                participation: 1.0,
                history: Vec::new(),
            };
            let r = run_round(&mut coord, &mut servers, &train, &test, &cfg).unwrap();
            (r, coord.global)
        };
        let (r1, g1) = mk();
        let (r2, g2) = mk();
        assert_eq!(r1, r2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn uplink_and_downlink_account_model_bits_per_participant() {
        let train = tiny_set(30, 97);
        let test = tiny_set(10, 98);
        let cfg = FedConfig {
            train: TrainConfig { seed: 3, ..Default::default() },
            ..Default::default()
        };
        let global = CnnModel::<f32>::init(3);
        let bits = global.storage_bytes() * 8;
        let mut servers = make_servers(&train, 3, &global, &cfg).unwrap();
        let mut coord = CoordinatorState {
            global,
            round: 0,
            participation: 1.0,
            history: Vec::new(),
        };
        let report = run_round(&mut coord, &mut servers, &train, &test, &cfg).unwrap();
        assert_eq!(report.uplink_bits, 3 * bits);
        assert_eq!(report.downlink_bits, report.uplink_bits);
        for s in &servers {
            assert_eq!(s.costs.uplink_bits, bits);
            assert_eq!(s.costs.downlink_bits, bits);
        }
    }

    #[test]
    fn vacuous_target_terminates_in_one_round() {
        let train = tiny_set(40, 99);
        let test = tiny_set(20, 100);
        let cfg = FedConfig {
            train: TrainConfig { seed: 4, ..Default::default() },
            ..Default::default()
        };
        let outcome: FedRunOutcome<f32> =
            train_to_target(&train, &test, 2, 0.02, &cfg).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.rounds_run, 1);
        assert_eq!(outcome.ledger.rounds.len(), 1);
    }

    #[test]
    fn round_cap_yields_nonconverged_result_with_ledger() {
        let train = tiny_set(24, 101);
        let test = tiny_set(12, 102);
        let cfg = FedConfig {
            train: TrainConfig { learning_rate: 0.0, seed: 6, ..Default::default() },
            round_cap: 2,
            ..Default::default()
        };
        // random labels + zero learning rate: chance accuracy, impossible target
        let outcome: FedRunOutcome<f32> =
            train_to_target(&train, &test, 2, 0.999, &cfg).unwrap();
        assert!(!outcome.converged);
        assert_eq!(outcome.rounds_run, 2);
        assert_eq!(outcome.ledger.rounds.len(), 2);
        assert!(train_to_target::<f32>(&train, &test, 2, 1.5, &cfg).is_err());
    }

    #[test]
    fn per_server_shares_shrink_with_more_servers() {
        let train = tiny_set(64, 103);
        let test = tiny_set(16, 104);
        let cfg = FedConfig {
            train: TrainConfig { seed: 8, ..Default::default() },
            round_cap: 1,
            ..Default::default()
        };
        let mut prev_samples = f64::INFINITY;
        let mut prev_storage = f64::INFINITY;
        for k in [1usize, 2, 4, 8] {
            let outcome: FedRunOutcome<f32> =
                train_to_target(&train, &test, k, 0.9999, &cfg).unwrap_or_else(|e| panic!("{e}"));
            let report = ledger_report(&outcome);
            assert!(report.avg_labeled_samples < prev_samples);
            assert!(report.avg_storage_bytes < prev_storage);
            prev_samples = report.avg_labeled_samples;
            prev_storage = report.avg_storage_bytes;
        }
    }

    #[test]
    fn ledger_report_on_empty_run_is_zero() {
        let outcome = FedRunOutcome::<f32> {
            model: CnnModel::init(0),
            ledger: CostLedger::default(),
            rounds_run: 0,
            converged: false,
            final_accuracy: 0.0,
            shard_sizes: vec![],
        };
        let report = ledger_report(&outcome);
        assert_eq!(report.avg_labeled_samples, 0.0);
        assert_eq!(report.parallel_sim_seconds, 0.0);
        assert_eq!(report.avg_samples_processed, 0.0);
    }
}
