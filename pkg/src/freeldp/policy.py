"""Central numeric policy: tolerances, iteration budgets, caps.

Every tolerance used by the solvers lives here so that accuracy contracts
are pinned in one place.  The environment variable ``FREELDP_NUMERIC_POLICY``
may hold a JSON object overriding any field, e.g.::

    FREELDP_NUMERIC_POLICY='{"root_tol": 1e-12}' freeldp rate --config cfg.json

Individual operations also accept an explicit ``policy=`` argument which
takes precedence over the environment.
"""

from __future__ import annotations

import dataclasses
import json
import os

from .errors import ConfigError


@dataclasses.dataclass(frozen=True)
class NumericPolicy:
    # root finding (k_inverse, q_inverse, real-axis convolution solves)
    root_tol: float = 1e-10          # relative tolerance contract
    bisect_iters: int = 80           # fixed vectorized-bisection depth
    newton_polish: int = 2           # Newton steps after bisection

    # quadrature used by grid-measure integrals and test oracles
    quad_tol: float = 1e-9

    # subordination fixed point
    fixed_point_tol: float = 1e-12
    max_fixed_point_iters: int = 10_000
    eps_schedule: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    # a point whose residual stops improving is accepted once it is below
    # this floor: map evaluation carries floating noise ~ eps_mach * |omega|^2
    # in spectral gaps, where the nominal tolerance is unattainable
    fp_noise_floor: float = 1e-8

    # edge handling
    edge_cap: float = 1e8            # Stieltjes values above this count as +inf
    support_density_floor: float = 1e-12
    ineq_tol: float = 1e-9           # slack for closed-form inequality checks

    # consistency assertions between dual computation routes
    route_agreement_tol: float = 1e-7

    def replace(self, **kw) -> "NumericPolicy":
        return dataclasses.replace(self, **kw)


def policy_from_env() -> NumericPolicy:
    """Build the default policy, applying FREELDP_NUMERIC_POLICY overrides."""
    raw = os.environ.get("FREELDP_NUMERIC_POLICY", "")
    if not raw.strip():
        return NumericPolicy()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"FREELDP_NUMERIC_POLICY is not valid JSON: {exc}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("FREELDP_NUMERIC_POLICY must be a JSON object")
    known = {f.name for f in dataclasses.fields(NumericPolicy)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"unknown numeric-policy fields: {sorted(unknown)}; known: {sorted(known)}"
        )
    if "eps_schedule" in data:
        data["eps_schedule"] = tuple(float(e) for e in data["eps_schedule"])
    return NumericPolicy(**data)


def default_policy() -> NumericPolicy:
    """The process-wide policy (environment overrides applied at call time)."""
    return policy_from_env()


def resolve(policy: NumericPolicy | None) -> NumericPolicy:
    return policy if policy is not None else default_policy()
