//! End-to-end checks on the default synthetic benchmark.

use svdnet::config::RunConfig;
use svdnet::diagnostics::s_of_w;
use svdnet::eval::{generate_synthetic, SyntheticConfig};
use svdnet::network::FeatureKind;
use svdnet::trainer::{evaluate_model, train_svdnet, EvalOptions, Phase};

#[test]
fn default_benchmark_run() {
    let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let cfg = RunConfig::default();
    let run = train_svdnet(&data, &cfg, None).unwrap();

    let step0 = &run.trace.records[0];
    assert_eq!(step0.phase, Phase::Step0);
    assert!(step0.s_of_w < 0.9, "step-0 S(W) {}", step0.s_of_w);
    // calibration of the generator defaults for the network without RRI
    assert!(step0.rank1 > 0.3 && step0.rank1 < 0.95, "step-0 rank-1 {}", step0.rank1);
    assert!((step0.rank1 - 0.531).abs() <= 0.1);
    assert_eq!(s_of_w(&run.step0_model.eigenlayer).unwrap().value, step0.s_of_w);

    // restraint raises quality over the preceding decorrelation on average
    let records = &run.trace.records;
    let mut gain = 0.0;
    for w in records.windows(2) {
        if w[1].phase == Phase::Restraint {
            gain += w[1].map - w[0].map;
        }
    }
    assert!(gain > 0.0);

    // on this benchmark the Eigenlayer output is the stronger retrieval
    // feature, by more than 0.05 mAP both before and after RRI
    for model in [&run.step0_model, &run.model] {
        let out = evaluate_model(model, &data, EvalOptions { feature: FeatureKind::Output, normalize: false }).unwrap();
        let inp = evaluate_model(model, &data, EvalOptions { feature: FeatureKind::Input, normalize: false }).unwrap();
        assert!(out.map > inp.map + 0.05, "output {} vs input {}", out.map, inp.map);
    }
}
