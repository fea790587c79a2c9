"""Executable shadowing theory for flows on boxes and flat tori."""

from .flow import (DEFAULT, EscapeError, IntegratorConfig, distance, flow_many, flow_to,
                   lipschitz_estimate, sample_orbit, sample_times, trajectory)
from .pseudo import (ClassificationReport, PseudoOrbit, classify, defects, make_alpha_beta,
                     make_concat_ab, perturb_orbit)
from .sysdef import (CATALOG, SpaceSpec, SystemSpec, builtin, eval_field, format_system,
                     parse_expr, parse_system)

__version__ = "0.1.0"
