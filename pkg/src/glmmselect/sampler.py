"""Multi-chain orchestration and trace storage.

Chains are initialized from the prior with sub-seeds ``base_seed + chain``;
adaptation scans tune slice widths and are then frozen before burn-in.
Recorded draws keep everything downstream consumers need (coefficients,
indicators, factor values, latent effects, variances, log posterior).
"""

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import GibbsEngine
from .errors import ConfigurationError, SamplerError
from .ioutil import atomic_write_text, format_float
from .model import Dataset, ModelDims, ModelSpec, SamplerSettings

__all__ = ["SamplerConfig", "ChainTrace", "Trace", "run_chains", "save_trace", "load_trace"]

log = logging.getLogger(__name__)

# the sampler's configuration is the spec's sampler settings block
SamplerConfig = SamplerSettings


@dataclass
class ChainTrace:
    """Recorded draws of one chain (arrays indexed by recorded iteration)."""

    seed: int
    beta: np.ndarray                  # (K, l) raw values
    J: np.ndarray                     # (K, l) 0/1
    lam: list                         # per block: (K, q)
    include: list                     # per block: (K, q) 0/1
    r: list                           # per block: (K, q(q-1)/2)
    xi: list                          # per block: (K, n_groups, q)
    kappa: list                       # per block: (K, q)
    log_posterior: np.ndarray         # (K,)
    dispersion: np.ndarray | None = None
    sigma2: np.ndarray | None = None
    stepout_fallbacks: int = 0

    @property
    def n_recorded(self) -> int:
        return self.beta.shape[0]

    def beta_eff(self) -> np.ndarray:
        return self.beta * self.J


@dataclass
class Trace:
    """All chains plus an echo of how they were produced."""

    chains: list
    settings: SamplerSettings
    dims: ModelDims
    family_kind: str = "poisson"

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_recorded(self) -> int:
        return sum(c.n_recorded for c in self.chains)

    def pooled_beta_eff(self) -> np.ndarray:
        return np.concatenate([c.beta_eff() for c in self.chains], axis=0)

    def pooled(self, name: str, block: int | None = None) -> np.ndarray:
        if block is None:
            return np.concatenate([getattr(c, name) for c in self.chains], axis=0)
        return np.concatenate([getattr(c, name)[block] for c in self.chains], axis=0)

    def scalar_matrix(self, name: str) -> np.ndarray:
        """(chains, K) matrix of one named scalar column (diagnostics input)."""
        cols = [chain_columns(c, self.dims, self.family_kind) for c in self.chains]
        out = []
        for mapping in cols:
            if name not in mapping:
                raise ConfigurationError(f"unknown trace column {name!r}")
            out.append(mapping[name])
        return np.stack(out, axis=0)

    def column_names(self) -> list:
        return list(chain_columns(self.chains[0], self.dims, self.family_kind).keys())


def chain_columns(chain: ChainTrace, dims: ModelDims, family_kind: str) -> dict:
    """Flatten one chain into named scalar columns, in stable order."""
    cols = {"log_posterior": chain.log_posterior}
    for p in range(dims.l):
        cols[f"beta{p + 1}"] = chain.beta[:, p]
    for p in range(dims.l):
        cols[f"J{p + 1}"] = chain.J[:, p]
    for bi, (q, n_groups) in enumerate(dims.blocks):
        tag = bi + 1
        for k in range(q):
            cols[f"lam{tag}_{k + 1}"] = chain.lam[bi][:, k]
        for k in range(q):
            cols[f"I{tag}_{k + 1}"] = chain.include[bi][:, k]
        rows, colids = np.tril_indices(q, k=-1)
        for j, (u, v) in enumerate(zip(rows, colids)):
            cols[f"r{tag}_{u + 1}_{v + 1}"] = chain.r[bi][:, j]
        for k in range(q):
            cols[f"kappa{tag}_{k + 1}"] = chain.kappa[bi][:, k]
        for i in range(n_groups):
            for k in range(q):
                cols[f"xi{tag}_g{i + 1}_{k + 1}"] = chain.xi[bi][:, i, k]
    if family_kind == "negative_binomial":
        cols["dispersion"] = chain.dispersion
    elif family_kind == "gaussian":
        cols["sigma2"] = chain.sigma2
    return cols


def _run_single_chain(spec: ModelSpec, data: Dataset, settings: SamplerSettings, chain: int) -> ChainTrace:
    seed = settings.seed + chain
    rng = np.random.default_rng(seed)
    engine = GibbsEngine(spec, data, settings=settings, rng=rng)
    dims = engine.dims

    engine.adapting = True
    for _ in range(settings.adapt):
        engine.scan()
    engine.adapting = False
    for _ in range(settings.burnin):
        engine.scan()

    n_rec = settings.kept // settings.thin
    l = dims.l
    rec = ChainTrace(
        seed=seed,
        beta=np.zeros((n_rec, l)),
        J=np.zeros((n_rec, l), dtype=np.int8),
        lam=[np.zeros((n_rec, q)) for q, _ in dims.blocks],
        include=[np.zeros((n_rec, q), dtype=np.int8) for q, _ in dims.blocks],
        r=[np.zeros((n_rec, q * (q - 1) // 2)) for q, _ in dims.blocks],
        xi=[np.zeros((n_rec, n_g, q)) for q, n_g in dims.blocks],
        kappa=[np.zeros((n_rec, q)) for q, _ in dims.blocks],
        log_posterior=np.zeros(n_rec),
        dispersion=np.zeros(n_rec) if spec.family.kind == "negative_binomial" else None,
        sigma2=np.zeros(n_rec) if spec.family.kind == "gaussian" else None,
    )
    idx = 0
    for it in range(settings.kept):
        engine.scan()
        if (it + 1) % settings.thin == 0:
            st = engine.state
            rec.beta[idx] = st.beta
            rec.J[idx] = st.J
            for bi, bs in enumerate(st.blocks):
                rec.lam[bi][idx] = bs.lam
                rec.include[bi][idx] = bs.include
                rec.r[bi][idx] = bs.r
                rec.xi[bi][idx] = bs.xi
                rec.kappa[bi][idx] = bs.kappa
            rec.log_posterior[idx] = engine.log_posterior()
            if rec.dispersion is not None:
                rec.dispersion[idx] = st.dispersion
            if rec.sigma2 is not None:
                rec.sigma2[idx] = st.sigma2
            engine.check_exclusion_invariant()
            idx += 1
    rec.stepout_fallbacks = sum(s.fallbacks for s in engine.stats.values())
    if rec.stepout_fallbacks:
        log.info("chain %d: %d slice step-out fallbacks", chain, rec.stepout_fallbacks)
    return rec


def run_chains(
    spec: ModelSpec,
    data: Dataset,
    settings: SamplerSettings | None = None,
    workers: int = 1,
) -> Trace:
    """Run all chains and collect recorded draws.

    Chains are independent; with ``workers > 1`` they run in separate
    processes.  Results are identical either way.
    """
    if settings is None:
        settings = spec.sampler
    dims = ModelDims.of(spec, data)
    n_chains = settings.chains
    try:
        if workers > 1 and n_chains > 1:
            with ProcessPoolExecutor(max_workers=min(workers, n_chains)) as pool:
                futures = [
                    pool.submit(_run_single_chain, spec, data, settings, c)
                    for c in range(n_chains)
                ]
                chains = [f.result() for f in futures]
        else:
            chains = [_run_single_chain(spec, data, settings, c) for c in range(n_chains)]
    except SamplerError as exc:
        raise SamplerError(f"chain failed: {exc}") from exc
    return Trace(chains=chains, settings=settings, dims=dims, family_kind=spec.family.kind)


def save_trace(trace: Trace, outdir: str) -> list:
    """One CSV per chain: iteration, log_posterior, then every scalar column."""
    paths = []
    for ci, chain in enumerate(trace.chains):
        cols = chain_columns(chain, trace.dims, trace.family_kind)
        names = list(cols.keys())
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration"] + names)
        n = chain.n_recorded
        for i in range(n):
            row = [i + 1] + [format_float(float(cols[name][i])) for name in names]
            writer.writerow(row)
        path = os.path.join(outdir, f"chain_{ci + 1}.csv")
        atomic_write_text(path, buf.getvalue())
        paths.append(path)
    return paths


def load_trace(outdir: str, spec: ModelSpec, data: Dataset) -> Trace:
    """Rebuild a Trace from chain CSVs written by :func:`save_trace`."""
    dims = ModelDims.of(spec, data)
    chains = []
    ci = 1
    while True:
        path = os.path.join(outdir, f"chain_{ci}.csv")
        if not os.path.exists(path):
            break
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader]
        data_cols = {name: np.array([float(r[j]) for r in rows]) for j, name in enumerate(header)}
        n = len(rows)
        l = dims.l
        chain = ChainTrace(
            seed=spec.sampler.seed + ci - 1,
            beta=np.column_stack([data_cols[f"beta{p + 1}"] for p in range(l)]) if n else np.zeros((0, l)),
            J=np.column_stack([data_cols[f"J{p + 1}"] for p in range(l)]).astype(np.int8) if n else np.zeros((0, l), dtype=np.int8),
            lam=[],
            include=[],
            r=[],
            xi=[],
            kappa=[],
            log_posterior=data_cols["log_posterior"] if n else np.zeros(0),
        )
        for bi, (q, n_groups) in enumerate(dims.blocks):
            tag = bi + 1
            chain.lam.append(
                np.column_stack([data_cols[f"lam{tag}_{k + 1}"] for k in range(q)]) if n else np.zeros((0, q))
            )
            chain.include.append(
                np.column_stack([data_cols[f"I{tag}_{k + 1}"] for k in range(q)]).astype(np.int8)
                if n
                else np.zeros((0, q), dtype=np.int8)
            )
            rws, cls = np.tril_indices(q, k=-1)
            names = [f"r{tag}_{u + 1}_{v + 1}" for u, v in zip(rws, cls)]
            chain.r.append(
                np.column_stack([data_cols[nm] for nm in names]) if (n and names) else np.zeros((n, len(names)))
            )
            xi = np.zeros((n, n_groups, q))
            for i in range(n_groups):
                for k in range(q):
                    xi[:, i, k] = data_cols[f"xi{tag}_g{i + 1}_{k + 1}"]
            chain.xi.append(xi)
            chain.kappa.append(
                np.column_stack([data_cols[f"kappa{tag}_{k + 1}"] for k in range(q)]) if n else np.zeros((0, q))
            )
        if spec.family.kind == "negative_binomial":
            chain.dispersion = data_cols["dispersion"]
        elif spec.family.kind == "gaussian":
            chain.sigma2 = data_cols["sigma2"]
        chains.append(chain)
        ci += 1
    if not chains:
        raise ConfigurationError(f"no chain CSVs found under {outdir}")
    return Trace(chains=chains, settings=spec.sampler, dims=dims, family_kind=spec.family.kind)
