"""Three-body bound states in a harmonic-oscillator basis with two sizes.

The wave function is expanded on products of oscillator states in the two
Jacobi coordinates, each with its own length parameter.  Matrix elements
of central two-body potentials and of the semirelativistic kinetic energy
are exact; Brody-Moshinsky brackets at arbitrary angles relate the pair
coordinates to the Jacobi ones.

Submodules are imported on first attribute access so that the command line
entry point can configure thread pools before numpy loads.
"""
from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "make_system": "system",
    "constrained_sizes": "system",
    "free_sizes": "system",
    "SizeParams": "system",
    "ParticleSystem": "system",
    "clebsch_gordan": "angmom",
    "wigner_3j": "angmom",
    "wigner_6j": "angmom",
    "wigner_9j": "angmom",
    "enumerate_basis": "hobasis",
    "build_bmc_table": "moshinsky",
    "bmc": "moshinsky",
    "census": "moshinsky",
    "BmcCache": "moshinsky",
    "FormFactor": "radial",
    "talmi_integral": "radial",
    "talmi_b": "radial",
    "potential_me": "radial",
    "sqrt_kernel": "radial",
    "kummer_u": "radial",
    "scale_overlap": "radial",
    "Particle": "model",
    "Structure": "model",
    "PotentialModel": "model",
    "RunSpec": "model",
    "ConfigError": "model",
    "load_model": "model",
    "load_run": "model",
    "make_problem": "hamiltonian",
    "AssemblyContext": "hamiltonian",
    "p13_matrix": "hamiltonian",
    "symmetry_project": "hamiltonian",
    "MinimizerConfig": "solver",
    "Evaluator": "solver",
    "eigensolve": "solver",
    "minimize_1d": "solver",
    "minimize_2d": "solver",
    "solve_two_step": "solver",
    "scan": "solver",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'ho3b' has no attribute {name!r}")
    value = getattr(import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
