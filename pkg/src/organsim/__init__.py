"""Soft-body simulation of rhythmically moving organs.

Surface meshes become coarse voxel lattices of spring-coupled particles;
named regions drive their constraints with periodic rest-length signals.
Motion can be prescribed by keyframe tracks, distilled into signals by
Fourier fitting, refined by simulated annealing, and steered live over
WebSockets.
"""

from .actuation import (
    ActuationSignal,
    FitReport,
    Harmonic,
    RestLengthTable,
    TrainingCoupling,
    apply_signals,
    couple_to_keyframes,
    eval_rest,
    fit_regions,
    fit_signal,
    load_params,
    record_training_run,
    save_params,
)
from .dynamics import (
    SimConfig,
    SimState,
    initial_state,
    kinetic_energy,
    momentum,
    run,
    spring_energy,
    spring_forces,
    stability_margin,
    step,
    total_energy,
)
from .errors import (
    DegenerateMesh,
    EmptyRegionWarning,
    InstabilityDetected,
    InstabilityRisk,
    MissingBinding,
    OrganSimError,
    ParseError,
    PartitionError,
    SchemaError,
    TooFewSamples,
    ValidationError,
    WidthMismatch,
)
from .lattice import (
    Lattice,
    Material,
    Region,
    RegionRule,
    SkinBinding,
    SpringConstraint,
    VoxelGrid,
    assign_regions,
    bind_skin,
    build_lattice,
    load_region_spec,
    skin_update,
    skinned_mesh,
    voxelize,
)
from .mesh_io import (
    KeyframeTrack,
    TriMesh,
    export_frame,
    frame_path,
    load_keyframes,
    load_mesh,
    save_keyframes,
)
from .scene import Scene, build_scene, load_scene, save_scene
from .tuner import AnnealConfig, TuneResult, anneal, coupled_objective, drift, objective

__version__ = "0.1.0"

__all__ = [
    "ActuationSignal",
    "AnnealConfig",
    "DegenerateMesh",
    "EmptyRegionWarning",
    "FitReport",
    "Harmonic",
    "InstabilityDetected",
    "InstabilityRisk",
    "KeyframeTrack",
    "Lattice",
    "Material",
    "MissingBinding",
    "OrganSimError",
    "ParseError",
    "PartitionError",
    "Region",
    "RegionRule",
    "RestLengthTable",
    "Scene",
    "SchemaError",
    "SimConfig",
    "SimState",
    "SkinBinding",
    "SpringConstraint",
    "TooFewSamples",
    "TrainingCoupling",
    "TriMesh",
    "TuneResult",
    "ValidationError",
    "VoxelGrid",
    "WidthMismatch",
    "anneal",
    "apply_signals",
    "assign_regions",
    "bind_skin",
    "build_lattice",
    "build_scene",
    "couple_to_keyframes",
    "coupled_objective",
    "drift",
    "eval_rest",
    "export_frame",
    "fit_regions",
    "fit_signal",
    "frame_path",
    "initial_state",
    "kinetic_energy",
    "load_keyframes",
    "load_mesh",
    "load_params",
    "load_region_spec",
    "load_scene",
    "momentum",
    "objective",
    "record_training_run",
    "run",
    "save_keyframes",
    "save_params",
    "save_scene",
    "skin_update",
    "skinned_mesh",
    "spring_energy",
    "spring_forces",
    "stability_margin",
    "step",
    "total_energy",
    "voxelize",
]
