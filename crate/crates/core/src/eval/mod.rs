//! Reconstruction metrics, evaluation sweeps, parameter accounting and
//! report serialization.

mod metrics;
mod pipeline;
mod report;

pub use metrics::{
    chamfer_l2, chamfer_samples, voxel_iou, voxel_iou_at, SurfaceSample, CHAMFER_REPORT_SCALE, DEFAULT_CHAMFER_POINTS,
    DEFAULT_CHAMFER_SEED, DEFAULT_IOU_RESOLUTION,
};
pub use pipeline::{
    accumulate_shapes, aggregate, bench_decode, categories_of, explained_variance_sweep, fit_shapes, latent_size_sweep,
    perturbation_sweep, split_shapes, unseen_category_sweep, AggregateRow, DecodeTiming, EvalSettings, EvalShape, PerturbationRow,
    PreparedShape, ShapeMetrics, ShapeSource, UnseenRow, VarianceRow,
};
pub use report::{
    basis_parameters, representation_parameters, round_to, table5_rows, ChamferProtocol, EvalReport, FitSummary,
    Table5Row, TimingReport,
};
