pub mod baselines;
pub mod cv;
pub mod design;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod ingest;
pub mod mcvar;
pub mod methods;
pub mod model;
pub mod panel;
pub mod scvar;
pub mod simulate;
pub mod solvers;
pub mod structure;

pub use baselines::{fit_baseline, BaselineKind, BaselineModel};
pub use design::{build_lag_design, holdout_design, DesignGram, LagDesign};
pub use error::{Error, ErrorKind, Result};
pub use methods::{FitState, FittedModel, Hyper, Method, MethodRegistry};
pub use cv::{grid_search_cv, CvResult, Grid};
pub use mcvar::{cluster_assignments, fit_mcvar, fit_mcvar_gram, McvarInit, McvarState};
pub use model::{assemble_w, gamma_from_alpha, VarModel};
pub use panel::{
    apply_transform, apply_transform_to, split_holdout, SeriesStats, TimeSeriesPanel,
    TransformKind, TransformRecord, TransformSpec,
};
pub use scvar::{fit_scvar, ScvarState};
pub use structure::FitOptions;
