"""Transition densities of Bessel processes killed at a positive barrier.

Three independent routes to the killed kernel and its hitting law:

- :mod:`bkk.kernels`: closed forms (free kernel, half-index killed kernel,
  hitting density and CDF, two-sided envelope, scaling and reflection maps);
- :mod:`bkk.hunt`: the killed kernel as free kernel minus a hitting-time
  convolution, by adaptive log-domain quadrature;
- :mod:`bkk.pde`: a finite-difference march of the killed generator;
- :mod:`bkk.mc`: Monte Carlo path simulation with bridge-corrected killing.

:mod:`bkk.certify` cross-checks the routes and the closed-form inequalities
over parameter grids and emits machine-readable reports; the ``bkk`` command
line (:mod:`bkk.cli`) wraps evaluation, certification, tables, simulation,
and kernel slices.
"""

from .bessel import (
    log_bessel_i,
    log_bessel_i_ratio,
    log_bessel_i_scaled,
)
from .certify import (
    GridSpec,
    build_tables,
    emit_report,
    parse_report,
    run_envelope_report,
    run_inequality_suite,
)
from .hunt import (
    QuadratureConfig,
    exact_half_source,
    killed_kernel_via_hunt,
    tabulated_source,
)
from .kernels import (
    KernelQuery,
    log_envelope,
    log_free_kernel,
    log_half_hitting_cdf,
    log_half_hitting_density,
    log_half_killed_kernel,
    reduce_to_unit_barrier,
    reflect_index,
)
from .mc import (
    McConfig,
    simulate_hitting_histogram,
    simulate_killed_histogram,
    simulate_survival,
)
from .pde import (
    PdeConfig,
    hitting_density_flux,
    solve_killed_kernel,
    survival_probability,
)

__all__ = [
    "GridSpec",
    "KernelQuery",
    "McConfig",
    "PdeConfig",
    "QuadratureConfig",
    "build_tables",
    "emit_report",
    "exact_half_source",
    "hitting_density_flux",
    "killed_kernel_via_hunt",
    "log_bessel_i",
    "log_bessel_i_ratio",
    "log_bessel_i_scaled",
    "log_envelope",
    "log_free_kernel",
    "log_half_hitting_cdf",
    "log_half_hitting_density",
    "log_half_killed_kernel",
    "parse_report",
    "reduce_to_unit_barrier",
    "reflect_index",
    "run_envelope_report",
    "run_inequality_suite",
    "simulate_hitting_histogram",
    "simulate_killed_histogram",
    "simulate_survival",
    "solve_killed_kernel",
    "survival_probability",
    "tabulated_source",
]
