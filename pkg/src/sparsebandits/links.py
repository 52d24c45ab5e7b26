"""Inverse link functions for the GLM reward model.

Each link bundles the inverse link mu, its derivative mu_dot, and the
cumulant m whose gradient is mu.  Rewards follow Y = mu(x' beta) + eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class Link:
    name: str
    mu: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    mu_dot: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    cumulant: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _logistic_mu_dot(z):
    p = expit(z)
    return p * (1.0 - p)


LINEAR = Link(
    name="linear",
    mu=lambda z: np.asarray(z, dtype=float),
    mu_dot=lambda z: np.ones_like(np.asarray(z, dtype=float)),
    cumulant=lambda z: 0.5 * np.square(z),
)

# cumulant log(1 + e^z) computed via logaddexp for overflow safety
LOGISTIC = Link(
    name="logistic",
    mu=expit,
    mu_dot=_logistic_mu_dot,
    cumulant=lambda z: np.logaddexp(0.0, z),
)

_LINKS = {"linear": LINEAR, "logistic": LOGISTIC}


def get_link(name: str) -> Link:
    try:
        return _LINKS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown link {name!r}; expected one of {sorted(_LINKS)}")
