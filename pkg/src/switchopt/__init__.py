"""Switched optimal control via binary mode embedding and direct collocation.

Workflow: define a :class:`~switchopt.problem.SwitchedProblem` (or grab a
benchmark from :mod:`switchopt.bench`), pair it with an
:class:`~switchopt.encoding.EmbeddingConfig` into an
:class:`~switchopt.embed.EmbeddedSystem`, transcribe on a
:class:`~switchopt.transcribe.Mesh`, solve with
:func:`~switchopt.solver.solve_meocp`, and extract a feasible switching
schedule with :mod:`switchopt.extract`.  The mode-insertion baseline lives
in :mod:`switchopt.mig`.
"""

from .encoding import (
    EmbeddingConfig,
    decode,
    encode,
    num_bits,
    penalty,
    penalty_gradient,
    vertex_weight,
    vertex_weight_gradient,
    vertex_weights,
)
from .problem import (
    SwitchedProblem,
    SwitchSchedule,
    evaluate_schedule_cost,
    simulate_schedule,
    validate,
)
from .embed import (
    EmbeddedSystem,
    embedded_dynamics,
    embedded_running_cost,
    hamiltonian,
    jacobians,
    meocp_integrand,
)
from .transcribe import Mesh, NlpProblem, build_nlp
from .solver import MeocpSolution, SolveResult, SolverConfig, project_box, solve, solve_meocp
from .extract import (
    EmbeddedTrajectory,
    bang_bang_fraction,
    extract_schedule,
    round_node,
)
from .mig import MigConfig, MigResult, costate_backward, insertion_gradient, mig_solve
from . import bench

__version__ = "0.1.0"

__all__ = [
    "EmbeddingConfig",
    "EmbeddedSystem",
    "EmbeddedTrajectory",
    "Mesh",
    "MeocpSolution",
    "MigConfig",
    "MigResult",
    "NlpProblem",
    "SolveResult",
    "SolverConfig",
    "SwitchSchedule",
    "SwitchedProblem",
    "bang_bang_fraction",
    "bench",
    "build_nlp",
    "costate_backward",
    "decode",
    "embedded_dynamics",
    "embedded_running_cost",
    "encode",
    "evaluate_schedule_cost",
    "extract_schedule",
    "hamiltonian",
    "insertion_gradient",
    "jacobians",
    "meocp_integrand",
    "mig_solve",
    "num_bits",
    "penalty",
    "penalty_gradient",
    "project_box",
    "round_node",
    "simulate_schedule",
    "solve",
    "solve_meocp",
    "validate",
    "vertex_weight",
    "vertex_weight_gradient",
    "vertex_weights",
]
