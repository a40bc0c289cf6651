//! Loss/accuracy diagnostics for one compression run.

use semnet::datasets::load_linqs_citation;
use semnet::gcn::{gcn_infer, gcn_train, normalize_adjacency, unmasked_accuracy, GcnHyperparams};
use semnet::semantics::select_label_subset;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let (g, _) = load_linqs_citation(&args[1], &args[2]).unwrap();
    let fraction: f64 = args[3].parse().unwrap();
    let seed: u64 = args[4].parse().unwrap();
    let epochs: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(200);

    let adj = normalize_adjacency(&g);
    let mask = select_label_subset(&g, fraction, seed).unwrap();
    let hp = GcnHyperparams { epochs, ..Default::default() };
    let (model, curve) = gcn_train(&g, &adj, &mask, &hp, seed).unwrap();
    let pred = gcn_infer(&model, &adj, &g.features).unwrap();

    let masked_acc = {
        let mut hit = 0;
        for i in mask.masked_indices() {
            if pred[i] == g.labels[i] {
                hit += 1;
            }
        }
        hit as f64 / mask.count() as f64
    };
    let tail: Vec<String> = curve
        .iter()
        .rev()
        .take(5)
        .rev()
        .map(|l| format!("{l:.4}"))
        .collect();
    println!(
        "seed {seed} epochs {epochs}: loss[0] {:.4} tail [{}] masked_acc {:.4} unmasked_acc {:.4}",
        curve[0],
        tail.join(", "),
        masked_acc,
        unmasked_accuracy(&pred, &g.labels, &mask)
    );
}
