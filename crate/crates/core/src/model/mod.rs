//! Variables, DAGs, CPTs and the factorized joint distribution.

mod dag;
mod network;
pub mod reference;
mod schema;

pub use dag::{validate_dag, ArcConstraints, Dag, DagViolation, NamedConstraints, NamedDag};
pub use network::{BayesianNetwork, Cpt};
pub use reference::{reference_crc_network, reference_schema};
pub use schema::{Assignment, ConfigIndexer, Evidence, NetworkSchema, Variable};
