//! Metrics, ablation runs, throughput benchmarks and report emission.

mod ablation;
mod bench;
mod gradcheck;
mod metrics;

pub use ablation::{
    desk_model_config, desk_train_config, mean_sd, run_ablation, AblationConfig, AblationOutcome,
    AblationRow, AblationRun, AblationTable, BenchmarkSplits, SyntheticBenchmark, Variant,
};
pub use bench::{bench_inference, BenchConfig, BenchReport, BenchRow};
pub use gradcheck::{gradcheck_model, GradCheckConfig};
pub use metrics::{
    evaluate, extract_spans, metrics_csv, metrics_markdown, prf1, score, span_f1, token_confusion,
    ConfusionCounts, MetricsMode, MetricsReport, Prf1, SluPredictor, SpanScore,
};
