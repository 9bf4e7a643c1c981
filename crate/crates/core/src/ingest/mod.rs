//! Loading tables, filtering them with conjunctive predicates, and
//! estimating predicate cardinality from a uniform row sample.

mod estimate;
mod predicate;
mod table;

pub use estimate::{
    draw_sample_indices, estimate_with_bounds, BoundAtQ, EstimateReport, EstimateRequest,
    SelectivitySource,
};
pub use predicate::{
    parse_predicate, true_cardinality, Atom, BoundPredicate, CompareOp, Literal, Predicate,
};
pub use table::{load_table, read_table, Column, ColumnType, LoadOptions, TableData};
