//! Reflexive game theory decision engine.
//!
//! The pipeline runs from a group's alliance/conflict graph and its
//! influence matrix to every subject's decision interval:
//!
//! 1. [`group::RelationshipGraph::decompose`] turns the graph into a
//!    [`group::Polynomial`] (alliance is meet, conflict is join);
//! 2. [`solver::decision_equation`] derives `x = A·x + B·x̄` for each subject;
//! 3. [`solver::solve_session`] substitutes influences and yields the
//!    intervals `B ⊆ x ⊆ A`, branching over small interval influences.
//!
//! [`scenario`] chains sessions: earlier stages decide points of view and
//! group membership for the final session.

pub mod algebra;
pub mod error;
pub mod group;
pub mod report;
pub mod scenario;
pub mod schema;
pub mod solver;
pub mod subject;
pub mod symbolic;

pub use algebra::{enumerate_between, ActionUniverse, Alternative};
pub use error::{Error, Result};
pub use group::{Polynomial, Relation, RelationshipGraph};
pub use report::{ScenarioReport, SolveOutput};
pub use scenario::{run_scenario, step_scenario, Scenario, ScenarioRun, ScenarioState, Stage};
pub use schema::{GraphFile, ScenarioFile, SessionFile};
pub use solver::{
    decision_equation, render_diagonal_form, solve_session, solve_subject, DecisionEquation,
    DecisionInterval, InfluenceMatrix, InfluenceValue, IntervalKind, SessionOptions, SessionResult,
};
pub use subject::SubjectId;
pub use symbolic::{Guard, SymbolicExpr};
