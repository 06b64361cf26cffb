//! Synthesis and far-field analysis of optically transparent transmissive
//! skins applied to insulating-glass windows.
//!
//! The pipeline runs bottom-up: a plane wave hits a lattice of meta-atoms,
//! each filters it through a tabulated transmission tensor, the resulting
//! equivalent currents radiate into the indoor half-space, and the layout of
//! ring radii is chosen so that those currents add in phase at a receiver.

pub mod analysis;
pub mod aperture;
pub mod atom;
pub mod em;
pub mod error;
pub mod multilayer;
pub mod synthesis;

pub use aperture::{
    equivalent_currents, pattern_cut, pixel_integral, transmitted_field, uniform_currents, CurrentSheet, EmsLayout,
    PatternCut, PatternSample, PatternTable, DEFAULT_RADIUS_M,
};
pub use atom::{
    atom_cost, atom_optical_transmittance, default_surrogate_table, lookup_tensor, AtomCost, AtomDescriptors,
    AtomWeights, FeasibilitySet, ResponseTable, TableRow, TransmissionTensor, SURROGATE_TABLE_ID,
};
pub use em::{ComplexFieldSample, Direction, Frequency, PlaneWave, Polarization, FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT};
pub use error::{Error, Result};
pub use multilayer::{stack_transmission, Layer, LayerStack, StackPolarization};
pub use synthesis::{
    current_mismatch, ideal_current_phases, ideal_currents, synthesize, synthesize_per_cell, synthesize_pso,
    LayoutDocument, Method, OptimizerConfig, Synthesis, SynthesisSpec,
};
