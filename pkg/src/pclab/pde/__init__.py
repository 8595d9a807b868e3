from .energy import compliance, local_energy
from .force import ForceSpec, IntegrabilityWarning, q0, q1
from .mesh import ConstrainedMesh, build_mesh
from .solver import ScalarField, solve_p_poisson

__all__ = [
    "compliance",
    "local_energy",
    "ForceSpec",
    "IntegrabilityWarning",
    "q0",
    "q1",
    "ConstrainedMesh",
    "build_mesh",
    "ScalarField",
    "solve_p_poisson",
]
