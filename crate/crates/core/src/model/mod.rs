pub mod hamiltonian;
pub mod operator;
pub mod params;
pub mod sector;
pub mod space;
pub mod symmetry;

pub use hamiltonian::{h_dicke, h_mean_field, h_single_site};
pub use operator::{commutator, operator, quadrature, OperatorKind, OperatorMatrix};
pub use params::ModelParams;
pub use space::{build_space, build_space_total, HilbertSpace, Truncation, DEFAULT_DIM_CEILING};
