"""demplast: J2 elastoplasticity solved by training a neural displacement
field to minimize the incremental free energy on a hex/tet mesh."""

from .bc import BCError, DirichletBC, LoadProgram, TractionBC
from .config import ConfigError, ProblemSpec, build_problem, parse_config, \
    serialize_spec
from .energy import EnergyWorkspace
from .material import ElasticConstants, HardeningLaw, PlasticState, \
    energy_density, radial_return, von_mises
from .mesh import Mesh, MeshError, build_grad_operators, \
    generate_structured_box, read_mesh, write_mesh
from .network import Network, NetworkError, init_network
from .optim import ConvergenceMonitor, DivergenceError, Lbfgs
from .presets import PRESETS, get_preset
from .solver import NetworkConfig, OptimizerConfig, Problem, SolverError, \
    StepRecord, infer, run

__version__ = "0.1.0"

__all__ = [
    "BCError", "ConfigError", "ConvergenceMonitor", "DirichletBC",
    "DivergenceError", "ElasticConstants", "EnergyWorkspace", "HardeningLaw",
    "Lbfgs", "LoadProgram", "Mesh", "MeshError", "Network", "NetworkConfig",
    "NetworkError", "OptimizerConfig", "PlasticState", "PRESETS", "Problem",
    "ProblemSpec", "SolverError", "StepRecord", "TractionBC",
    "build_grad_operators", "build_problem", "energy_density",
    "generate_structured_box", "get_preset", "infer", "init_network",
    "parse_config", "radial_return", "read_mesh", "run", "serialize_spec",
    "von_mises", "write_mesh", "__version__",
]
