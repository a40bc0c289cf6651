//! Quick real-data check of the compression pipeline.

use semnet::datasets::load_linqs_citation;
use semnet::semantics::compress_and_recover;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let content = &args[1];
    let cites = &args[2];
    let fraction: f64 = args[3].parse().unwrap();
    let seeds: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3);

    let t = Instant::now();
    let (g, dropped) = load_linqs_citation(content, cites).unwrap();
    println!(
        "loaded {} nodes, {} features, {} classes, {} edges ({} dangling dropped) in {:.2}s",
        g.num_nodes(),
        g.num_features(),
        g.num_classes(),
        g.edges.len(),
        dropped,
        t.elapsed().as_secs_f64()
    );
    for seed in 0..seeds {
        let t = Instant::now();
        let report = compress_and_recover(&g, fraction, seed).unwrap();
        println!(
            "fraction {:.4} seed {}: sent {} nodes ({} bytes), compression {:.4}, recovery {:.4} [{:.2}s]",
            report.fraction_labels_sent,
            seed,
            report.mask_size,
            report.bytes_sent,
            report.compression_rate,
            report.recovery_accuracy,
            t.elapsed().as_secs_f64()
        );
    }
}
