//! Maximal leakage over discrete channels and Bayesian networks.
//!
//! Everything is exact rational arithmetic; the only floating-point outputs are
//! logarithms taken for reporting.

pub mod bayes_net;
pub mod bounds;
pub mod constructions;
pub mod coupling;
pub mod error;
pub mod lp;
pub mod measures;
pub mod random;
pub mod rational;
pub mod simplex;
pub mod simultaneous;

pub use bayes_net::{BayesNet, Issue, Node, NodeQuery};
pub use bounds::{
    bound_report, corollary1_bound, example1_report, example2_report, recursive_bound, subadditivity_baseline,
    theorem2_bound, BoundReport, ExampleReport, Method, PeelError, PreconditionCheck, RecursiveBound, SingleBound,
};
pub use constructions::{
    build_n4_coupling, choose_abc, layered_coupling, maximal_coupling_pair, n4_condition, verify_intersection_property,
    IntersectionCheck, MixtureWeights, N4Coupling, N4Ingredients,
};
pub use coupling::{union_mass, Coupling};
pub use error::{Error, Result};
pub use lp::{min_union_coupling, min_union_coupling_diag, LpResult};
pub use measures::{
    doeblin, make_erasure, make_q_ary_symmetric, maximal_leakage, tau_k_sum, tau_max, tau_max2, tau_subset,
    DiscreteChannel, MeasureSet, Pmf,
};
pub use rational::Rational;
pub use simultaneous::{build_simultaneous_coupling, IngredientSource, JointPmf, SimulCoupling};
