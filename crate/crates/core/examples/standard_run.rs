//! Replays the bundled 5000-query workload and prints the summary.
//!
//! cargo run --release -p patterncard --example standard_run -- [seed] [scale]

use patterncard::hierarchy::Provenance;
use patterncard::sim::{cumulative_rows, percentile, render_summary, run_simulation, DataSource, RunConfig};

fn main() -> patterncard::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(42, |s| s.parse().expect("seed"));
    let scale = args.next().map_or(1.0, |s| s.parse().expect("scale"));
    let config = RunConfig {
        seed,
        data: DataSource::Standard { scale },
        ..RunConfig::default()
    };
    let out = run_simulation(&config, &mut |n| {
        if n % 500 == 0 {
            eprintln!("{n} queries");
        }
    })?;
    print!("{}", render_summary(&out.summary));
    let t = &out.summary.timings;
    println!("oracle {:.1}s  heuristic {:.1}s  wall {:.1}s", t.oracle_s, t.heuristic_s, t.wall_s);
    let median = |f: &dyn Fn(usize) -> bool| {
        let v: Vec<f64> = out.records.iter().filter(|r| f(r.bucket_size())).map(|r| r.q_error).collect();
        (v.len(), percentile(&v, 50.0).unwrap_or(f64::NAN))
    };
    println!("median by bucket size: <10 {:?}  >=50 {:?}", median(&|b| b < 10), median(&|b| b >= 50));
    let n = out.records.len();
    let deciles: Vec<String> = (0..10)
        .map(|d| {
            let w = &out.records[d * n / 10..(d + 1) * n / 10];
            let h = w.iter().filter(|r| r.provenance == Provenance::Heuristic).count();
            format!("{:.3}", h as f64 / w.len() as f64)
        })
        .collect();
    println!("heuristic share by decile: {}", deciles.join(" "));
    let cum: Vec<String> = cumulative_rows(&out, 250).iter().map(|r| format!("{:.3}", r.learned_p50)).collect();
    println!("cumulative p50: {}", cum.join(" "));
    Ok(())
}
