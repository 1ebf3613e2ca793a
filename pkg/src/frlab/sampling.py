"""Seeded generation of factor-regression datasets and loading matrices.

Random streams are counter-based (Philox) and keyed by
``(master_seed, grid_index, replicate_index, role)``, so a replicate can be
regenerated in isolation and results do not depend on execution order.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import ContractViolation
from .model import FactorModel

_SQRT3 = math.sqrt(3.0)


class NoiseLaw(enum.Enum):
    """Zero-mean, unit-variance sub-Gaussian entry laws."""

    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self is NoiseLaw.GAUSSIAN:
            return rng.standard_normal(shape)
        if self is NoiseLaw.RADEMACHER:
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)


GAUSSIAN = NoiseLaw.GAUSSIAN
RADEMACHER = NoiseLaw.RADEMACHER
UNIFORM = NoiseLaw.UNIFORM


def _role_code(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = 0
    grid_index: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ContractViolation("master_seed must be a 64-bit unsigned integer")

    def rng(self, role: str) -> np.random.Generator:
        ss = np.random.SeedSequence(
            int(self.master_seed),
            spawn_key=(int(self.grid_index), int(self.replicate_index), _role_code(role)),
        )
        return np.random.Generator(np.random.Philox(ss))

    def child(self, grid_index: int | None = None, replicate_index: int | None = None) -> "SeedSpec":
        return SeedSpec(
            self.master_seed,
            self.grid_index if grid_index is None else grid_index,
            self.replicate_index if replicate_index is None else replicate_index,
        )


def as_generator(seed, role: str = "default") -> np.random.Generator:
    """Accept a SeedSpec, an int or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng(role)
    return SeedSpec(int(seed)).rng(role)


class Dataset(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    eps: np.ndarray
    E: np.ndarray | None = None


def sample_dataset(
    model: FactorModel,
    n: int,
    law: NoiseLaw = GAUSSIAN,
    seed: SeedSpec | int = 0,
    *,
    keep_E: bool = False,
    stream: str = "",
) -> Dataset:
    """Draw ``n`` i.i.d. rows ``X_i = A Z_i + E_i``, ``y_i = Z_i'beta + eps_i``.

    ``stream`` prefixes the role names, giving an independent draw (e.g. a
    holdout set) under the same seed.
    """
    if n < 1:
        raise ContractViolation("n must be at least 1")
    spec = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    p, k = model.p, model.K
    z = law.draw(spec.rng(stream + "factors"), (n, k)) @ model.sigma_z_sqrt
    if model.noise_cov.is_zero:
        e = np.zeros((n, p))
    else:
        e = model.noise_cov.sqrt_apply(law.draw(spec.rng(stream + "noise"), (n, p)).T).T
    eps = model.sigma_eps * law.draw(spec.rng(stream + "response"), n)
    x = z @ model.loading.T + e
    y = z @ model.beta + eps
    return Dataset(x, y, z, eps, e if keep_E else None)


# --------------------------------------------------------------------------
# Loading constructions
# --------------------------------------------------------------------------


def _check_pk(p: int, k: int) -> None:
    if k < 1 or p < 1:
        raise ContractViolation("p and K must be positive")
    if k > p:
        raise ContractViolation(f"K={k} exceeds p={p}")


def haar_frame(p: int, k: int, seed) -> np.ndarray:
    """First K rows of a Haar orthogonal p x p matrix, as a p x K frame.

    The QR factor of a p x K Gaussian matrix (with R's diagonal made
    positive) has the same law, without forming the full p x p matrix.
    """
    _check_pk(p, k)
    g = as_generator(seed, "loading").standard_normal((p, k))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def loading_scaled_orthogonal(p: int, k: int, seed=0) -> np.ndarray:
    """``A = sqrt(p) V_K`` with orthonormal columns, so ``A'A = p I_K``."""
    return math.sqrt(p) * haar_frame(p, k, seed)


def loading_gaussian(p: int, k: int, seed=0, *, convention: str = "variance") -> np.ndarray:
    """I.i.d. centred Gaussian entries with variance ``1/sqrt(K)``.

    ``convention="std"`` reads the parameter as a standard deviation instead.
    """
    if k < 1 or p < 1:
        raise ContractViolation("p and K must be positive")
    if convention == "variance":
        scale = k**-0.25
    elif convention == "std":
        scale = k**-0.5
    else:
        raise ContractViolation(f"unknown convention {convention!r}")
    return scale * as_generator(seed, "loading").standard_normal((p, k))


def loading_canonical_sparse(p: int, k: int, scale: float | None = None) -> np.ndarray:
    """Columns ``scale * e_a`` (default ``scale = sqrt(p)``)."""
    _check_pk(p, k)
    a = np.zeros((p, k))
    a[np.arange(k), np.arange(k)] = math.sqrt(p) if scale is None else scale
    return a


def loading_cluster_assignment(p: int, k: int, sizes) -> np.ndarray:
    """0/1 membership matrix; cluster ``a`` owns ``sizes[a]`` consecutive rows."""
    sizes = [int(s) for s in sizes]
    if len(sizes) != k or any(s < 1 for s in sizes):
        raise ContractViolation("sizes must hold K positive counts")
    if sum(sizes) > p:
        raise ContractViolation(f"cluster sizes sum to {sum(sizes)} > p={p}")
    a = np.zeros((p, k))
    start = 0
    for j, s in enumerate(sizes):
        a[start : start + s, j] = 1.0
        start += s
    return a


# --------------------------------------------------------------------------
# Concentration probe
# --------------------------------------------------------------------------

# Frozen from a one-off calibration (Gaussian law, Sigma = I_r, r/n in
# {1, 2, 5, 10, 100}, n in {10, 50}, 50 seeds each): the largest required
# constant was 5.30, rounded up with margin.
CONCENTRATION_C = 6.0


class ProbeResult(NamedTuple):
    lambda_min: float
    lambda_max: float
    trace_sigma: float
    within_band: bool


def concentration_probe(n: int, sigma, law: NoiseLaw = GAUSSIAN, seed=0, *, c: float = CONCENTRATION_C) -> ProbeResult:
    """Extreme eigenvalues of ``W Sigma W'`` for an n x r matrix W of i.i.d. law entries."""
    s = linalg.as_matrix(sigma, "sigma")
    r = s.shape[0]
    if s.shape != (r, r):
        raise ContractViolation("sigma must be square")
    w = law.draw(as_generator(seed, "probe"), (n, r))
    d = np.diag(s)
    if np.count_nonzero(s - np.diag(d)) == 0:
        m = (w * d) @ w.T
        norm = float(np.max(np.abs(d)))
    else:
        m = w @ s @ w.T
        norm = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (s + s.T)))))
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    tr = float(np.trace(s))
    lo = tr / 2 - c * norm * n
    hi = 1.5 * tr + c * norm * n
    slack = 1e-9 * max(hi, 1.0)
    ok = bool(ev[0] >= lo - slack and ev[-1] <= hi + slack)
    return ProbeResult(float(ev[0]), float(ev[-1]), tr, ok)
