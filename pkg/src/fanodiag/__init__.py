"""Normal-mode (Fano) diagonalization of a damped polariton model in one dimension.

Modules: ``material`` (susceptibility from a bath), ``greenfn`` (wave-equation
Green functions), ``modes`` (mode coefficient kernels and their identities),
``fields`` (field kernels and vacuum correlators), ``oracle`` (brute-force
discrete Hamiltonian), ``cli`` (config-driven batch runs).
"""

__version__ = "0.1.0"
