//! Datasets, query streams, the B+-tree baseline and the measurement runner.

pub mod btree;
pub mod dataset;
pub mod error;
pub mod oracle;
pub mod runner;
pub mod structure;
pub mod workload;

pub use btree::BTree;
pub use dataset::{gen_dataset, read_dataset, write_dataset, Dataset, DatasetSpec, Distribution};
pub use error::{BenchError, BenchResultT};
pub use oracle::{check_against_map, OracleReport};
pub use runner::{compare, run, run_workload, sweep, training_for, write_csv, BenchResult, Comparison, SweepRow};
pub use structure::{build_fixed_alex, build_fixed_rmi, build_structure, KvIndex, Structure};
pub use workload::{gen_workload, Access, Mix, Workload, WorkloadSpec};
