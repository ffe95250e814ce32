//! Scenario ingestion, experiment runners and CSV output.

pub mod exp;
pub mod output;
pub mod scenario;

pub use exp::{
    run_exp1, run_exp1_with_workers, run_exp2, run_exp2_with_workers, run_scenario, simulate,
    Comparison, ExperimentSpec, RunOutput, DEFAULT_SEEDS,
};
pub use output::{emit_csv, Row, CSV_HEADER};
pub use scenario::Scenario;
