use tpm_core::pipeline::{quickstart, run_benchmark, BenchmarkConfig};

fn main() {
    let cfg: BenchmarkConfig = match std::env::args().nth(1) {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap(),
        None => quickstart(),
    };
    let res = run_benchmark(&cfg).unwrap();
    for r in &res.reports {
        println!(
            "{:16} mae_ms {:10.1} space {:7.3} mdr {:8.4}/{:8.4} map {:.4}",
            r.model, r.time_mae_ms, r.space_mae, r.mdr_as_written, r.mdr_error, r.map
        );
    }
    for (k, t) in &res.timings {
        println!("{k}: {t:.1}s");
    }
}
