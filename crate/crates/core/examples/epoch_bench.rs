//! Times one training epoch and one test evaluation on the real data.

use semnet::cnn::{cnn_train_epoch, evaluate_accuracy, CnnModel, TrainConfig};
use semnet::datasets::mnist::Split;
use semnet::datasets::{load_mnist_idx, partition_iid};
use std::time::Instant;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into());
    let train = load_mnist_idx(
        format!("{dir}/train-images-idx3-ubyte"),
        format!("{dir}/train-labels-idx1-ubyte"),
        Split::Train,
    )
    .unwrap();
    let test = load_mnist_idx(
        format!("{dir}/t10k-images-idx3-ubyte"),
        format!("{dir}/t10k-labels-idx1-ubyte"),
        Split::Test,
    )
    .unwrap();
    let shards = partition_iid(train.len(), 1, 7).unwrap();
    let mut model = CnnModel::<f32>::init(17);
    let cfg = TrainConfig { seed: 17, ..Default::default() };

    let t = Instant::now();
    let stats = cnn_train_epoch(&mut model, &train, &shards[0], &cfg).unwrap();
    let train_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let acc = evaluate_accuracy(&model, &test).unwrap();
    let eval_s = t.elapsed().as_secs_f64();
    println!(
        "epoch: {train_s:.1}s (loss {:.4}), eval: {eval_s:.1}s (accuracy {acc:.4})",
        stats.mean_loss
    );
}
