use std::path::Path;

use nclink::exec::Execution;
use nclink::harness::{
    csv_rows, expand, run_specs, write_csv, write_plot, Manifest, PlotSeries, Reliability,
    TrialKind,
};

#[test]
fn shipped_example_expands() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/example.toml");
    let m = Manifest::load(&path).unwrap();
    let trials = expand(&m).unwrap();
    assert_eq!(trials.len(), (6 + 8) * 2);
    assert!(
        trials
            .iter()
            .filter(|t| t.config.kind == TrialKind::File)
            .count()
            == 4
    );
    let sweep: Vec<_> = trials.iter().filter(|t| t.sweep.is_some()).collect();
    assert!(sweep
        .iter()
        .all(|t| t.config.channel.loss.mean_loss() == 0.18));
    assert_eq!(sweep[0].config.reliability, Reliability::Nc(10));
}

#[test]
fn small_manifest_end_to_end() {
    let m = Manifest::from_toml(
        r#"
        seed = 3
        repeat = 2
        [base]
        duration_s = 2
        channel.loss = { model = "bernoulli", p = 0.1 }
        [[trial]]
        reliability = "arq"
        [[sweep]]
        name = "loss"
        vary = "channel.loss.p"
        values = [0.0, 0.3]
        metrics = ["loss_pct", "rounds"]
        set = { reliability = "raw" }
        "#,
    )
    .unwrap();
    let trials = expand(&m).unwrap();
    let results = run_specs(&trials, Execution::Sequential);
    assert!(results.iter().all(Result::is_ok));

    let mut csv = Vec::new();
    write_csv(&mut csv, &csv_rows(&trials, &results)).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 6);

    let s = PlotSeries::collect(0, &m.sweeps()[0], &trials, &results);
    assert_eq!(s.points.len(), 2);
    assert_eq!(s.points[0].0, 0.0);
    assert_eq!(s.points[0].1[0], 0.0);
    assert!(s.points[0].1[1].is_nan());
    assert!((s.points[1].1[0] - 30.0).abs() < 3.0, "{:?}", s.points[1]);
    let mut dat = Vec::new();
    write_plot(&mut dat, &s).unwrap();
    assert!(String::from_utf8(dat)
        .unwrap()
        .starts_with("# sweep loss over channel.loss.p\n"));
}

#[test]
fn bad_manifests_name_the_field() {
    let e = Manifest::from_toml(
        "[base]\nchannel.loss = { model = \"bernoulli\", p = 1.5 }\n[[trial]]\n",
    )
    .and_then(|m| expand(&m))
    .unwrap_err()
    .to_string();
    assert!(e.contains("trial 0"), "{e}");
    let e = Manifest::from_toml("[[trial]]\nreliabilty = \"raw\"\n")
        .and_then(|m| expand(&m))
        .unwrap_err()
        .to_string();
    assert!(e.contains("reliabilty"), "{e}");
}
