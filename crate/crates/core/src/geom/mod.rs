//! Chart-based tensor calculus and the sampling check runner.

pub mod chart;
pub mod fields;
pub mod ops;
pub mod sample;
pub mod tensor;

pub use chart::{Chart, ChartError};
pub use fields::{
    at_chart_point, ConformalMetric, Connection, ConnectionField, Differential, ExprConnection, ExprMetric,
    ExprOneForm, ExprVectorField, FieldError, LeviCivita, Metric, MetricField, OneForm, OneFormField, OneFormSum,
    Scalar, ScalarField, ScaledVector, Vector, VectorField,
};
pub use sample::{sample_check, sample_components, sample_points, CheckReport, PlanError, SamplePlan};
pub use tensor::{is_positive_definite, min_eigenvalue, relative_diff, relative_size, Tensor};
