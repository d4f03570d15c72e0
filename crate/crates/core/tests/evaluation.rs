use centroid_htc::metrics::{evaluate, EvalInstance};
use centroid_htc::pipeline::{generate_synthetic, SynthSpec};
use centroid_htc::workflow::{run_experiment, ExperimentConfig};

#[test]
fn oracle_predictions_score_one_everywhere() {
    let corpus = generate_synthetic(&SynthSpec {
        categories: 15,
        samples: 300,
        seed: 1,
        ..SynthSpec::default()
    })
    .unwrap();
    let instances: Vec<EvalInstance> = corpus
        .samples
        .iter()
        .map(|s| EvalInstance::new(s.path.clone(), vec![s.path.clone()]))
        .collect();
    let r = evaluate(&instances, 3).unwrap();
    assert_eq!(
        (r.h_precision, r.h_recall, r.h_f1, r.top_k_accuracy, r.h_top_k_accuracy, r.exact_match),
        (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    );
}

#[test]
fn majority_on_uniform_sixty_classes_hits_one_in_sixty() {
    let corpus = generate_synthetic(&SynthSpec {
        categories: 60,
        samples: 3000,
        imbalance: 0.0,
        seed: 11,
        ..SynthSpec::default()
    })
    .unwrap();
    let run = run_experiment(&corpus.samples, &ExperimentConfig::default(), 11).unwrap();
    let majority = run.methods.iter().find(|m| m.method == "majority").unwrap();
    let p = 1.0 / 60.0;
    let n = run.test as f64;
    let tolerance = 3.0 * (p * (1.0 - p) / n).sqrt();
    assert!(
        (majority.report.exact_match - p).abs() <= tolerance,
        "majority exact {} vs {p} (+/- {tolerance})",
        majority.report.exact_match
    );
}
