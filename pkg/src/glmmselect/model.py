"""Model definition: data container, model configuration, parameter state,
and the reparameterized linear predictor / log-likelihood.

The linear predictor for observation j of subject i is

    eta = X' (J * beta) + sum_blocks Z' Lambda_eff Gamma_eff xi_group + offset

where J are fixed-effect inclusion indicators and the effective factors come
from :mod:`glmmselect.cholesky` given the random-effect indicators I.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .cholesky import CholeskyFactors, project_constraints
from .errors import ConfigurationError
from .families import Family

__all__ = [
    "Dataset",
    "BlockData",
    "RandomBlock",
    "Hyperparameters",
    "SamplerSettings",
    "ModelSpec",
    "BlockState",
    "ParameterState",
    "ModelDims",
    "MODES",
    "linear_predictor",
    "linear_predictor_all",
    "total_log_likelihood",
]

MODES = ("ssvs-full", "ssvs-diagonal", "no-selection")


@dataclass(frozen=True)
class BlockData:
    """Per-observation random design and grouping for one random-effect block."""

    Z: np.ndarray          # (n_obs, q)
    groups: np.ndarray     # (n_obs,) dense 0-based subject index
    n_groups: int

    def __post_init__(self):
        object.__setattr__(self, "Z", np.asarray(self.Z, dtype=float))
        object.__setattr__(self, "groups", np.asarray(self.groups, dtype=np.int64))
        if self.Z.ndim != 2:
            raise ConfigurationError("Z must be 2-dimensional")
        if self.groups.shape != (self.Z.shape[0],):
            raise ConfigurationError("groups length must match number of observations")
        if not np.all(np.isfinite(self.Z)):
            raise ConfigurationError("random design columns must be finite")
        if self.n_groups < 1 or self.groups.min(initial=0) < 0 or (
            self.groups.size and self.groups.max() >= self.n_groups
        ):
            raise ConfigurationError("group indices must lie in [0, n_groups)")

    @property
    def q(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Column-oriented observations: response, fixed design, random blocks, offset."""

    y: np.ndarray                       # (n_obs,)
    X: np.ndarray                       # (n_obs, l)
    blocks: tuple[BlockData, ...] = ()
    offset: np.ndarray | None = None    # (n_obs,), natural-log scale

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ConfigurationError("X must be (n_obs, l) matching y")
        if not np.all(np.isfinite(self.X)):
            raise ConfigurationError("fixed design columns must be finite")
        for b in self.blocks:
            if b.Z.shape[0] != self.y.shape[0]:
                raise ConfigurationError("block design rows must match n_obs")
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=float)
            if off.shape != self.y.shape:
                raise ConfigurationError("offset length must match n_obs")
            if not np.all(np.isfinite(off)):
                raise ConfigurationError("offset must be finite")
            object.__setattr__(self, "offset", off)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def l(self) -> int:
        return self.X.shape[1]

    def validate_for(self, family: Family) -> None:
        family.validate_response(self.y)


@dataclass(frozen=True)
class RandomBlock:
    """Named random-effect block of a model spec (column-level description)."""

    group: str
    columns: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(self.columns) < 1:
            raise ConfigurationError("random block needs at least one column")


@dataclass(frozen=True)
class Hyperparameters:
    """Prior hyperparameters.

    h            slab scale multiplier for the random-effect standard deviations
    v, nu        inverse-gamma controls of the slab variance: tau2 ~ IG(nu/2, v/2)
    g_shrink     fixed-effect prior precision multiplier: beta ~ N(0, sigma2/(g*theta))
    prior_inclusion  Bernoulli prior probability that an effect is included
    """

    h: float = 1.0
    v: float = 0.01
    nu: float = 0.01
    g_shrink: float = 1.0
    prior_inclusion: float = 0.5

    def __post_init__(self):
        for name in ("h", "v", "nu", "g_shrink"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"hyperparameter {name} must be positive")
        if not 0.0 < self.prior_inclusion < 1.0:
            raise ConfigurationError("prior_inclusion must lie in (0, 1)")


@dataclass(frozen=True)
class SamplerSettings:
    """Chain layout and slice-sampler controls."""

    chains: int = 3
    adapt: int = 1000
    burnin: int = 1000
    kept: int = 3000
    thin: int = 1
    seed: int = 0
    slice_widths: dict = field(default_factory=dict)
    max_stepouts: int = 50

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigurationError("chains must be >= 1")
        for name in ("adapt", "burnin", "kept"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.thin < 1:
            raise ConfigurationError("thin must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model description.

    ``fixed_effects`` lists design column names (by convention the first is an
    intercept; the literal name "1" denotes a constant column).  Each random
    block names its grouping column and design columns.  ``mode`` selects the
    sampler variant: "ssvs-full" (lower-triangular Gamma), "ssvs-diagonal"
    (Gamma = I), or "no-selection" (all indicators fixed at 1).
    """

    family: Family
    response: str
    fixed_effects: tuple[str, ...]
    random_blocks: tuple[RandomBlock, ...] = ()
    offset: str | None = None
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    mode: str = "ssvs-full"

    def __post_init__(self):
        object.__setattr__(self, "fixed_effects", tuple(self.fixed_effects))
        object.__setattr__(self, "random_blocks", tuple(self.random_blocks))
        if len(self.fixed_effects) < 1:
            raise ConfigurationError("need at least one fixed-effect column")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; choose from {MODES}")

    @property
    def l(self) -> int:
        return len(self.fixed_effects)

    def with_mode(self, mode: str) -> "ModelSpec":
        return replace(self, mode=mode)


@dataclass(frozen=True)
class ModelDims:
    """Shape summary used by prior sampling and state validation."""

    l: int
    blocks: tuple[tuple[int, int], ...]  # (q, n_groups) per block

    @staticmethod
    def of(spec: ModelSpec, data: Dataset) -> "ModelDims":
        if data.l != spec.l:
            raise ConfigurationError(
                f"data has {data.l} fixed columns, spec expects {spec.l}"
            )
        if len(data.blocks) != len(spec.random_blocks):
            raise ConfigurationError("data and spec disagree on number of random blocks")
        for b, rb in zip(data.blocks, spec.random_blocks):
            if b.q != len(rb.columns):
                raise ConfigurationError(
                    f"block {rb.group!r}: data has {b.q} columns, spec lists {len(rb.columns)}"
                )
        return ModelDims(l=data.l, blocks=tuple((b.q, b.n_groups) for b in data.blocks))


@dataclass
class BlockState:
    """Sampler state for one random-effect block."""

    lam: np.ndarray     # (q,) raw slab values, >= 0
    include: np.ndarray  # (q,) 0/1
    tau2: np.ndarray    # (q,) slab variances
    r: np.ndarray       # (q*(q-1)/2,) raw subdiagonal values
    xi: np.ndarray      # (n_groups, q) latent effects
    kappa: np.ndarray   # (q,) latent-effect variances
    m: np.ndarray       # (q,) rate latents for kappa

    def factors(self) -> CholeskyFactors:
        return CholeskyFactors(lam=self.lam, r=self.r)

    def effective(self):
        return project_constraints(self.factors(), self.include)

    def copy(self) -> "BlockState":
        return BlockState(
            lam=self.lam.copy(),
            include=self.include.copy(),
            tau2=self.tau2.copy(),
            r=self.r.copy(),
            xi=self.xi.copy(),
            kappa=self.kappa.copy(),
            m=self.m.copy(),
        )


@dataclass
class ParameterState:
    """One point in the sampler's state space (raw values plus indicators)."""

    beta: np.ndarray     # (l,) raw coefficients
    J: np.ndarray        # (l,) 0/1 inclusion indicators
    theta: np.ndarray    # (l,) positive precision latents
    phi: np.ndarray      # (l,) positive rate latents
    blocks: list[BlockState]
    dispersion: float | None = None   # NB overdispersion, sampled
    sigma2: float = 1.0               # gaussian residual variance; fixed 1 otherwise

    def beta_eff(self) -> np.ndarray:
        return self.beta * self.J

    def copy(self) -> "ParameterState":
        return ParameterState(
            beta=self.beta.copy(),
            J=self.J.copy(),
            theta=self.theta.copy(),
            phi=self.phi.copy(),
            blocks=[b.copy() for b in self.blocks],
            dispersion=self.dispersion,
            sigma2=self.sigma2,
        )

    def check_dims(self, dims: ModelDims) -> None:
        if self.beta.shape != (dims.l,):
            raise ConfigurationError("beta length does not match spec")
        for arr in (self.J, self.theta, self.phi):
            if arr.shape != (dims.l,):
                raise ConfigurationError("fixed-effect latents do not match spec")
        if len(self.blocks) != len(dims.blocks):
            raise ConfigurationError("state has wrong number of random blocks")
        for bs, (q, n_groups) in zip(self.blocks, dims.blocks):
            if bs.lam.shape != (q,) or bs.include.shape != (q,):
                raise ConfigurationError("block state has wrong q")
            if bs.xi.shape != (n_groups, q):
                raise ConfigurationError("xi has wrong shape")


def _family_with_state(spec: ModelSpec, state: ParameterState) -> Family:
    fam = spec.family
    if fam.kind == "negative_binomial":
        return fam.with_dispersion(float(state.dispersion))
    if fam.kind == "gaussian":
        return fam.with_dispersion(float(state.sigma2))
    return fam


def linear_predictor_all(spec: ModelSpec, state: ParameterState, data: Dataset) -> np.ndarray:
    """Linear predictor for every observation, using effective values."""
    ModelDims.of(spec, data)  # raises on mismatch
    state.check_dims(ModelDims.of(spec, data))
    eta = data.X @ state.beta_eff()
    for bdata, bstate in zip(data.blocks, state.blocks):
        eff = bstate.effective()
        rho = bstate.xi @ eff.loadings().T          # (n_groups, q) effect vectors
        eta = eta + np.einsum("ij,ij->i", bdata.Z, rho[bdata.groups])
    if data.offset is not None:
        eta = eta + data.offset
    return eta


def linear_predictor(spec: ModelSpec, state: ParameterState, data: Dataset, obs: int) -> float:
    """Linear predictor of a single observation."""
    if not 0 <= obs < data.n_obs:
        raise ConfigurationError(f"observation index {obs} out of range")
    return float(linear_predictor_all(spec, state, data)[obs])


def total_log_likelihood(spec: ModelSpec, state: ParameterState, data: Dataset) -> float:
    """Sum of per-observation log-likelihoods, in fixed observation order."""
    if data.n_obs == 0:
        return 0.0
    fam = _family_with_state(spec, state)
    eta = linear_predictor_all(spec, state, data)
    return float(np.sum(fam.log_likelihood(data.y, eta)))
