use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patterncard::baseline::{analyze_with, heuristic_estimate, Statistics, DEFAULT_BUCKETS, DEFAULT_MCV};
use patterncard::hierarchy::LevelConfig;
use patterncard::oracle::{
    generate_workload, make_correlated_dataset, read_sql, standard_dataset_spec, standard_workload_spec,
    validate_workload, write_sql, Dataset, DatasetSpec, Executor, WorkloadSpec,
};
use patterncard::querygraph::{enumerate_subqueries, parse_sql};
use patterncard::schema::Schema;
use patterncard::sim::{
    emit_reports, read_baseline, read_replay, render_summary, simulate, summary_from_rows, DataSource, RunConfig,
    WorkloadSource,
};
use patterncard::Error;
use serde::Serialize;

/// Online cardinality estimation with pattern-keyed local models.
#[derive(Parser, Debug)]
#[command(name = "patterncard", version)]
struct Cli {
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build histogram statistics; with queries, describe their subqueries.
    Analyze(AnalyzeArgs),
    /// Generate the bundled synthetic dataset (or one from a spec) as CSV.
    GenData(GenDataArgs),
    /// Render a workload from templates into a .sql file.
    GenWorkload(GenWorkloadArgs),
    /// Replay a workload with online learning and write reports.
    Simulate(SimulateArgs),
    /// Summarise the reports of a previous run.
    Report(ReportArgs),
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Schema JSON; derived from the tables when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Directory with one `<table>.csv` per schema table.
    #[arg(long)]
    tables: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write the statistics here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SQL file whose queries are analysed.
    #[arg(long)]
    sql: Option<PathBuf>,
    /// A single query to analyse.
    #[arg(long)]
    query: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    buckets: usize,
    #[arg(long, default_value_t = DEFAULT_MCV)]
    mcv: usize,
    /// Also execute every subquery for its true cardinality.
    #[arg(long)]
    truth: bool,
}

#[derive(Args, Debug, Serialize)]
struct GenDataArgs {
    /// Output directory for the CSV files and `schema.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Size factor of the bundled dataset, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Dataset spec JSON instead of the bundled dataset.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct GenWorkloadArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Workload spec JSON; the bundled 40 templates when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Queries per bundled template.
    #[arg(long, default_value_t = 125)]
    queries_per_template: usize,
    /// Output .sql file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the spec that produced the workload.
    #[arg(long)]
    dump_spec: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// SQL workload; the configured source when omitted.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Run configuration JSON; fields given as flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for replay.csv, baseline.csv, cumulative.csv and
    /// summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Write zeros in the latency columns so the replay log is reproducible.
    #[arg(long)]
    no_latency: bool,
    /// Dump per-bucket statistics of the final store to this CSV.
    #[arg(long)]
    dump_buckets: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    /// replay.csv of a run.
    #[arg(long)]
    replay: PathBuf,
    /// baseline.csv of the same run; looked up next to the replay log when
    /// omitted.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

/// Failures before any work starts are configuration errors (exit 2); the
/// rest abort the run (exit 3).
enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn config<T>(r: patterncard::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn print_json<T: Serialize>(v: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.into()))?);
    Ok(())
}

fn load_data(args: &DataArgs) -> patterncard::Result<(Dataset, Schema)> {
    let Some(dir) = &args.tables else {
        return Err(Error::Config("--tables is required".into()));
    };
    let schema = match &args.schema {
        Some(p) => Schema::load(p)?,
        None => {
            let p = dir.join("schema.json");
            if !p.exists() {
                return Err(Error::Config(format!("no --schema given and {} is missing", p.display())));
            }
            Schema::load(&p)?
        }
    };
    let data = Dataset::load_csv_dir(dir, &schema)?;
    Ok((data, schema))
}

fn analyze_cmd(args: AnalyzeArgs, print: bool) -> Result<(), Failure> {
    if print {
        return print_json(&args);
    }
    let (data, schema) = config(load_data(&args.data))?;
    let stats = analyze_with(&data, args.buckets, args.mcv);
    if let Some(out) = &args.out {
        stats.save(out)?;
    }
    let mut queries = Vec::new();
    if let Some(p) = &args.sql {
        queries.extend(config(read_sql(p))?);
    }
    queries.extend(args.query.clone());
    if queries.is_empty() && args.out.is_none() {
        print_stats(&stats);
        return Ok(());
    }
    let levels: Vec<LevelConfig> = (1..=3).map(LevelConfig::default_level).collect();
    let mut exec = Executor::new(&data);
    println!("query\tsubquery\tn_join\th1\th2\th3\tdims\theuristic\ttruth");
    for (qi, q) in queries.iter().enumerate() {
        let dag = parse_sql(q, Some(&schema))?;
        for (si, sub) in enumerate_subqueries(&dag).iter().enumerate() {
            let fv = levels
                .iter()
                .map(|l| l.featurize(sub, Some(&schema)))
                .collect::<patterncard::Result<Vec<_>>>()?;
            let h = heuristic_estimate(sub, &stats)?;
            let truth = if args.truth { exec.count(sub)?.to_string() } else { "-".into() };
            let dims: Vec<String> = fv.iter().map(|f| f.dim().to_string()).collect();
            println!(
                "{qi}\t{si}\t{}\t{}\t{}\t{}\t{}\t{h}\t{truth}",
                sub.join_count(),
                &fv[0].pattern.to_hex()[..16],
                &fv[1].pattern.to_hex()[..16],
                &fv[2].pattern.to_hex()[..16],
                dims.join("/"),
            );
        }
        exec.clear_cache();
    }
    Ok(())
}

fn print_stats(stats: &Statistics) {
    for t in stats.tables.values() {
        println!("{} ({} rows)", t.name, t.row_count);
        for c in t.columns.values() {
            println!(
                "  {:<20} {:<7} distinct {:>8}  mcv {:>2}  buckets {:>3}",
                c.column,
                c.ty,
                c.num_distinct,
                c.mcv.len(),
                c.bounds.len().saturating_sub(1)
            );
        }
    }
}

fn gen_data_cmd(args: GenDataArgs, print: bool) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(io_error(p, e)))?;
            config(serde_json::from_str::<DatasetSpec>(&text).map_err(Error::from))?
        }
        None => {
            if !(args.scale > 0.0 && args.scale <= 1.0) {
                return Err(Failure::Config(Error::Config(format!("--scale must lie in (0, 1], got {}", args.scale))));
            }
            standard_dataset_spec(args.seed, args.scale)
        }
    };
    if print {
        return print_json(&spec);
    }
    let data = config(make_correlated_dataset(&spec))?;
    data.write_csv_dir(&args.out)?;
    data.schema().save(&args.out.join("schema.json"))?;
    for t in data.tables() {
        eprintln!("{}: {} rows", t.name, t.len());
    }
    Ok(())
}

fn io_error(p: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", p.display()))
}

fn gen_workload_cmd(args: GenWorkloadArgs, print: bool) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(p) => config(WorkloadSpec::load(p))?,
        None => standard_workload_spec(args.seed, args.queries_per_template),
    };
    if print {
        return print_json(&spec);
    }
    let (data, schema) = config(load_data(&args.data))?;
    config(validate_workload(&spec, Some(&data), &schema))?;
    let queries = generate_workload(&spec, Some(&data))?;
    write_sql(&queries, &args.out)?;
    if let Some(p) = &args.dump_spec {
        spec.save(p)?;
    }
    eprintln!("{} queries from {} templates", queries.len(), spec.templates.len());
    Ok(())
}

fn run_config(args: &SimulateArgs) -> patterncard::Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &args.data.tables {
        c.data = DataSource::Csv { dir: dir.clone() };
        if args.data.schema.is_none() && c.schema.is_none() {
            c.schema = Some(dir.join("schema.json"));
        }
    }
    if let Some(s) = &args.data.schema {
        c.schema = Some(s.clone());
    }
    if let Some(w) = &args.workload {
        c.workload = WorkloadSource::File { path: w.clone() };
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(w) = args.warmup {
        c.warmup_queries = w;
    }
    if args.no_latency {
        c.latency_columns = false;
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    c.validate()?;
    Ok(c)
}

fn simulate_cmd(args: SimulateArgs, print: bool) -> Result<(), Failure> {
    let c = config(run_config(&args))?;
    if print {
        return print_json(&c);
    }
    let resolved = config(c.resolve())?;
    let quiet = args.quiet;
    let total = resolved.queries.len();
    let out = simulate(&resolved.data, &resolved.schema, &resolved.queries, &c, &mut |n| {
        if !quiet && (n % 500 == 0 || n == total) {
            eprintln!("{n}/{total} queries");
        }
    })?;
    if let Some(dir) = &c.out {
        emit_reports(&out, dir, &c)?;
    }
    if let Some(p) = &args.dump_buckets {
        out.store.debug_dump(p)?;
    }
    print!("{}", render_summary(&out.summary));
    Ok(())
}

fn report_cmd(args: ReportArgs, print: bool) -> Result<(), Failure> {
    if print {
        return print_json(&args);
    }
    let replay = config(read_replay(&args.replay))?;
    let baseline_path = args
        .baseline
        .clone()
        .or_else(|| args.replay.parent().map(|d| d.join("baseline.csv")).filter(|p| p.exists()));
    let baseline = baseline_path.as_deref().map(read_baseline).transpose()?;
    let summary = summary_from_rows(&replay, baseline.as_deref(), args.warmup)?;
    if args.json {
        print_json(&summary)
    } else {
        print!("{}", render_summary(&summary));
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let print = cli.print_config;
    let result = match cli.command {
        Command::Analyze(a) => analyze_cmd(a, print),
        Command::GenData(a) => gen_data_cmd(a, print),
        Command::GenWorkload(a) => gen_workload_cmd(a, print),
        Command::Simulate(a) => simulate_cmd(a, print),
        Command::Report(a) => report_cmd(a, print),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
