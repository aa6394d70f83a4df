"""Executable semantics for definite and indefinite causal scenarios in quantum theory."""
from .causal import (
    CompatibleScenario,
    DefiniteCausalScenario,
    Edge,
    EnumerationCapExceeded,
    FramedMultigraph,
    IndefiniteCausalScenario,
    as_compatible,
    canonical_key,
    check_compatible,
    definite_to_indefinite,
    enumerate_compatible,
    is_acyclic,
    topological_order,
    validate_framed,
)
from .control import (
    ControlledProcess,
    PhaseVector,
    ProcessFamily,
    SuperpositionInstrument,
    build_switch,
    classical_control,
    coherent_control_cp,
    coherent_control_of_diagram,
    coherent_control_pure,
    discard_control_mixture,
    extract_phase,
    nogo_witness,
    superpose,
    verify_eq1,
)
from .diagram import (
    CompiledProcess,
    DiagramAssignment,
    PurifiedDiagram,
    TypingError,
    contract,
    contract_purified,
    induce,
    purify_diagram,
)
from .process import (
    CPMap,
    ClassicalSet,
    Purification,
    QuantumInstrument,
    SPOPair,
    canonical_spo,
    channel_distance,
    check_no_signalling,
    compose,
    dbl,
    discard,
    is_normalised,
    is_pure,
    purify,
    tensor,
)
from .tensor import (
    HermitianSpectrum,
    SystemDims,
    choi_to_kraus,
    hermitian_spectrum,
    kraus_to_choi,
    kron,
    partial_trace,
    permute_factors,
)

__version__ = "0.1.0"
