//! Ground truth: typed in-memory tables, exact counting, and synthetic data
//! and workload generators.

mod dataset;
mod exec;

pub use dataset::{load_csv, ColumnData, Dataset, Table, Value};
pub use exec::{literal_value, true_cardinality, Executor, JoinStrategy, DEFAULT_BUDGET};
mod synth;

pub use synth::{
    make_correlated_dataset, standard_dataset_spec, ColumnGen, ColumnSpec, DatasetSpec, IntMap,
    TableSpec,
};
mod workload;

pub use workload::{
    generate_workload, read_sql, standard_templates, standard_workload_spec, validate_workload, write_sql,
    QueryTemplate, Sampler, WorkloadSpec,
};
