"""Response families and link functions.

Supported kind/link pairs are the canonical ones: poisson/log,
negative_binomial/log, bernoulli/logit, gaussian/identity.  The negative
binomial uses the mean/overdispersion convention Var = mu + mu^2/r_disp.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, gammaln

from .errors import ConfigurationError, NumericError

__all__ = ["Family", "CANONICAL_LINKS", "log_likelihood"]

CANONICAL_LINKS = {
    "poisson": "log",
    "negative_binomial": "log",
    "bernoulli": "logit",
    "gaussian": "identity",
}

_NEEDS_DISPERSION = {"negative_binomial", "gaussian"}


@dataclass(frozen=True)
class Family:
    """Response distribution plus link.

    ``dispersion`` is the NB overdispersion r_disp (> 0) or the gaussian
    residual variance sigma^2 (> 0); it must be absent for the other kinds.
    """

    kind: str
    link: str | None = None
    dispersion: float | None = None

    def __post_init__(self):
        if self.kind not in CANONICAL_LINKS:
            raise ConfigurationError(f"unsupported family kind {self.kind!r}")
        link = self.link if self.link is not None else CANONICAL_LINKS[self.kind]
        if link != CANONICAL_LINKS[self.kind]:
            raise ConfigurationError(
                f"unsupported link {link!r} for family {self.kind!r}"
            )
        object.__setattr__(self, "link", link)
        if self.kind in _NEEDS_DISPERSION:
            if self.dispersion is None or not self.dispersion > 0:
                raise ConfigurationError(
                    f"family {self.kind!r} requires a positive dispersion"
                )
        elif self.dispersion is not None:
            raise ConfigurationError(f"family {self.kind!r} takes no dispersion")

    def with_dispersion(self, value: float) -> "Family":
        return replace(self, dispersion=value)

    def mean(self, eta: np.ndarray) -> np.ndarray:
        """Inverse link applied to the linear predictor."""
        eta = np.asarray(eta, dtype=float)
        if self.link == "log":
            with np.errstate(over="ignore"):
                return np.exp(eta)
        if self.link == "logit":
            return expit(eta)
        return eta

    def log_likelihood(self, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """Elementwise log f(y | mu = g^-1(eta)); -inf at impossible boundaries."""
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if np.any(np.isnan(eta)):
            raise NumericError("linear predictor contains NaN")
        with np.errstate(over="ignore", invalid="ignore"):
            if self.kind == "poisson":
                return y * eta - np.exp(eta) - gammaln(y + 1.0)
            if self.kind == "negative_binomial":
                r = self.dispersion
                mu = np.exp(eta)
                return (
                    gammaln(y + r)
                    - gammaln(r)
                    - gammaln(y + 1.0)
                    + r * np.log(r)
                    + y * eta
                    - (y + r) * np.log(r + mu)
                )
            if self.kind == "bernoulli":
                # y*eta - log(1 + exp(eta)), stable for large |eta|
                return y * eta - np.logaddexp(0.0, eta)
            sigma2 = self.dispersion
            return -0.5 * (np.log(2.0 * np.pi * sigma2) + (y - eta) ** 2 / sigma2)

    def sample(self, rng: np.random.Generator, eta: np.ndarray, eta_cap: float = 30.0) -> np.ndarray:
        """Draw responses at the given linear predictor.

        For log-link families eta is capped at ``eta_cap`` before
        exponentiation so extreme draws cannot overflow the count sampler;
        the number of capped entries is available via :func:`clipped_count`.
        """
        eta = np.asarray(eta, dtype=float)
        if self.link == "log":
            eta = np.minimum(eta, eta_cap)
        mu = self.mean(eta)
        if self.kind == "poisson":
            return rng.poisson(mu).astype(float)
        if self.kind == "negative_binomial":
            r = self.dispersion
            return rng.negative_binomial(r, r / (r + mu)).astype(float)
        if self.kind == "bernoulli":
            return (rng.random(mu.shape) < mu).astype(float)
        return rng.normal(eta, np.sqrt(self.dispersion))

    def clipped_count(self, eta: np.ndarray, eta_cap: float = 30.0) -> int:
        if self.link != "log":
            return 0
        return int(np.sum(np.asarray(eta) > eta_cap))

    def validate_response(self, y: np.ndarray) -> None:
        y = np.asarray(y)
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("responses must be finite")
        if self.kind in ("poisson", "negative_binomial", "bernoulli"):
            if np.any(y < 0) or np.any(y != np.floor(y)):
                raise ConfigurationError(
                    f"family {self.kind!r} requires nonnegative integer responses"
                )
        if self.kind == "bernoulli" and np.any(y > 1):
            raise ConfigurationError("bernoulli responses must be 0 or 1")


def log_likelihood(family: Family, y, eta) -> float:
    """Scalar log-likelihood of one observation."""
    if not np.isfinite(eta):
        if np.isnan(eta):
            raise NumericError("eta is NaN")
    return float(family.log_likelihood(np.asarray([y], dtype=float), np.asarray([eta], dtype=float))[0])
