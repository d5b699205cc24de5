//! Benchmark fixtures shared by the criterion targets.

use stokes_core::assembly::{assemble_stokes, Load, SaddleSystem};
use stokes_core::spaces::{project_p0_vector, DiscreteField};
use stokes_core::{Example1, Triangulation, VelocityElement};

/// Mesh, projected source and assembled source system at `level`.
pub struct SourceFixture {
    pub mesh: Triangulation,
    pub source: DiscreteField,
    pub system: SaddleSystem,
}

impl SourceFixture {
    pub fn new(kind: VelocityElement, level: u32) -> Self {
        let mesh = Triangulation::build_uniform(level).expect("valid level");
        let source = project_p0_vector(&mesh, &Example1::new().source);
        let system = assemble_stokes(kind, &mesh, Load::ElementMeans(&source)).expect("assembly");
        Self {
            mesh,
            source,
            system,
        }
    }
}
