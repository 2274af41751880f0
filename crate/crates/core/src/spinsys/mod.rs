//! Spin Hamiltonians of multi-site crystals, their ESR transitions and
//! rendered spectra.

mod hamiltonian;
mod spectrum;
mod tensor;

pub use hamiltonian::{
    build_hamiltonian, moment_operator, spin_matrices, FieldVector, Spin, SpinSystem,
    MAX_HILBERT_DIM,
};
pub use spectrum::{
    combine_traces, crystal_transitions, level_transitions, linear_grid, populations,
    synthesize_spectrum, transition_strengths, transitions, CrystalConfig, FrequencyWindow,
    Lineshape, SpectrumTrace, Transition, TransitionList, MERGE_TOLERANCE_HZ,
};
pub use tensor::{
    apply_subclass, euler_zyz, mat_mul, mat_vec, rotate_tensor, AxisRotation, Mat3, TensorSpec,
    IDENTITY,
};
