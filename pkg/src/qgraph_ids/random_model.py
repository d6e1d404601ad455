"""Random edge lengths: C^1 densities, keyed sampling, the logarithmic
change of variables and the lattice action on samples."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

KNOTS = 2048


class ModelError(ValueError):
    """Raised for invalid random length models."""


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """C^1 probability density supported in ``[l_min, l_max]``.

    ``sup_h`` and ``sup_dh`` are the attained sup norms of ``h`` and ``h'``;
    ``c_h`` is the declared bound ``max(sup_h, sup_dh)``.
    """

    l_min: float
    l_max: float
    family: str
    sup_h: float
    sup_dh: float
    c_h: float
    _h: Callable = field(repr=False)
    _dh: Callable = field(repr=False)
    _cdf: Callable = field(repr=False)

    def __reduce__(self):
        # rebuilt from its parameters so samples can cross process boundaries
        return make_density, (self.l_min, self.l_max, self.family)

    @property
    def width(self) -> float:
        return self.l_max - self.l_min

    def pdf(self, x):
        x = np.asarray(x, float)
        inside = (x >= self.l_min) & (x <= self.l_max)
        return np.where(inside, self._h(np.clip(x, self.l_min, self.l_max)), 0.0)

    def dpdf(self, x):
        x = np.asarray(x, float)
        inside = (x >= self.l_min) & (x <= self.l_max)
        return np.where(inside, self._dh(np.clip(x, self.l_min, self.l_max)), 0.0)

    def cdf(self, x):
        x = np.asarray(x, float)
        return np.where(x <= self.l_min, 0.0,
                        np.where(x >= self.l_max, 1.0,
                                 self._cdf(np.clip(x, self.l_min, self.l_max))))

    def mean(self) -> float:
        return quad(lambda x: x * float(self.pdf(x)), self.l_min, self.l_max,
                    epsabs=1e-13, epsrel=1e-13)[0]

    def variance(self) -> float:
        m = self.mean()
        return quad(lambda x: (x - m) ** 2 * float(self.pdf(x)), self.l_min, self.l_max,
                    epsabs=1e-13, epsrel=1e-13)[0]

    @property
    def inverse_cdf(self) -> PchipInterpolator:
        inv = self.__dict__.get("_inv")
        if inv is None:
            x = np.linspace(self.l_min, self.l_max, KNOTS)
            y = self.cdf(x)
            keep = np.concatenate([[True], np.diff(y) > 0])
            inv = PchipInterpolator(y[keep], x[keep])
            self.__dict__["_inv"] = inv
        return inv

    def quantile(self, u):
        return np.clip(self.inverse_cdf(np.asarray(u, float)), self.l_min, self.l_max)


def make_density(l_min: float, l_max: float, family: str = "cos2") -> DensitySpec:
    """Density on ``[l_min, l_max]`` vanishing to first order at both ends.

    Families
    --------
    ``"cos2"``
        ``h = (2/w) cos^2(pi (l - mid)/w)``; ``||h|| = 2/w``,
        ``||h'|| = 2 pi / w^2``.
    ``"poly"``
        ``h = 30 w^-5 ((l - l_min)(l_max - l))^2``.

    A uniform density is rejected: it jumps at the interval ends and so is
    not C^1 on the real line.
    """
    l_min, l_max = float(l_min), float(l_max)
    if not 0 < l_min < l_max:
        raise ModelError("need 0 < l_min < l_max")
    w = l_max - l_min
    mid = 0.5 * (l_min + l_max)
    if family == "cos2":
        h = lambda x: (2 / w) * np.cos(np.pi * (x - mid) / w) ** 2
        dh = lambda x: -(2 * np.pi / w ** 2) * np.sin(2 * np.pi * (x - mid) / w)
        cdf = lambda x: (x - mid) / w + 0.5 + np.sin(2 * np.pi * (x - mid) / w) / (2 * np.pi)
        sup_h, sup_dh = 2 / w, 2 * np.pi / w ** 2
    elif family == "poly":
        h = lambda x: 30 / w ** 5 * ((x - l_min) * (l_max - x)) ** 2
        dh = lambda x: 60 / w ** 5 * (x - l_min) * (l_max - x) * (l_min + l_max - 2 * x)
        cdf = lambda x: _smoothstep((x - l_min) / w)
        sup_h = 30 / (16 * w)
        # |t (1 - t)(1 - 2t)| peaks at t = (3 - sqrt 3)/6
        t = (3 - math.sqrt(3)) / 6
        sup_dh = 60 / w ** 2 * t * (1 - t) * (1 - 2 * t)
    elif family == "uniform":
        raise ModelError("the uniform density is not C^1 on R (it jumps at l_min and l_max); "
                         "use 'cos2' or 'poly'")
    else:
        raise ModelError(f"unknown density family {family!r}")
    return DensitySpec(l_min, l_max, family, float(sup_h), float(sup_dh),
                       float(max(sup_h, sup_dh)), h, dh, cdf)


def _smoothstep(t):
    return t ** 3 * (10 - 15 * t + 6 * t ** 2)


# ---------------------------------------------------------------- model

@dataclass(frozen=True, eq=False)
class RandomLengthModel:
    """Independent edge lengths.

    ``densities`` maps an orbit index to its density (lattice labels
    ``(orbit, gamma)``); ``default`` serves all other edges. A model with
    ``fixed`` set is deterministic: every edge gets that length.
    """

    default: DensitySpec | None = None
    densities: Mapping = field(default_factory=dict)
    fixed: float | None = None

    def __post_init__(self):
        if self.fixed is None and self.default is None and not self.densities:
            raise ModelError("a model needs a density or a fixed length")
        if self.fixed is not None and not self.fixed > 0:
            raise ModelError("fixed length must be positive")

    @property
    def deterministic(self) -> bool:
        return self.fixed is not None

    def density_for(self, label) -> DensitySpec:
        if isinstance(label, tuple) and len(label) == 2 and label[0] in self.densities:
            return self.densities[label[0]]
        if self.default is None:
            raise ModelError(f"no density for edge {label!r}")
        return self.default

    @property
    def l_min(self) -> float:
        if self.fixed is not None:
            return self.fixed
        ds = list(self.densities.values()) + ([self.default] if self.default else [])
        return min(d.l_min for d in ds)

    @property
    def l_max(self) -> float:
        if self.fixed is not None:
            return self.fixed
        ds = list(self.densities.values()) + ([self.default] if self.default else [])
        return max(d.l_max for d in ds)

    @property
    def c_h(self) -> float:
        if self.fixed is not None:
            return 0.0
        ds = list(self.densities.values()) + ([self.default] if self.default else [])
        return max(d.c_h for d in ds)


def deterministic_model(length: float = 1.0) -> RandomLengthModel:
    return RandomLengthModel(fixed=float(length))


def model_from_config(block: Mapping) -> RandomLengthModel:
    """``{"l_min": .., "l_max": .., "family": ..}``; equal bounds give a fixed length."""
    lo, hi = float(block["l_min"]), float(block["l_max"])
    if lo == hi:
        return deterministic_model(lo)
    return RandomLengthModel(make_density(lo, hi, block.get("family", "cos2")))


def _canonical(label):
    if isinstance(label, (tuple, list)):
        return tuple(_canonical(x) for x in label)
    if isinstance(label, np.integer):
        return int(label)
    return label


def _label_words(label) -> list:
    digest = hashlib.blake2b(repr(_canonical(label)).encode(), digest_size=16).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def edge_uniform(seed: int, label) -> float:
    """Uniform variate in ``(0, 1)`` keyed by ``(seed, label)``.

    A Philox generator is keyed from a seed sequence over the seed and a
    digest of the label, so the value depends on nothing else.
    """
    ss = np.random.SeedSequence(entropy=[int(seed) & (2 ** 64 - 1)] + _label_words(label))
    key = ss.generate_state(2, dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return float(gen.random())


@dataclass(frozen=True, eq=False)
class LengthSample:
    """One configuration ``omega``: ``length(e)`` is the draw for edge ``T_shift e``.

    Lengths are computed from ``(seed, key)`` on demand, so every subgraph
    sees the same lengths on shared edges.
    """

    model: RandomLengthModel
    seed: int
    shift: tuple | None = None

    def key(self, label):
        if not self.shift:
            return label
        orbit, gamma = label
        return (orbit, tuple(g + s for g, s in zip(gamma, self.shift)))

    def length(self, label) -> float:
        if self.model.fixed is not None:
            return self.model.fixed
        k = self.key(label)
        d = self.model.density_for(k)
        return float(d.quantile(edge_uniform(self.seed, k)))

    __call__ = length

    def lengths(self, edges: Iterable) -> np.ndarray:
        edges = list(edges)
        if self.model.fixed is not None:
            return np.full(len(edges), self.model.fixed)
        keys = [self.key(e) for e in edges]
        u = np.array([edge_uniform(self.seed, k) for k in keys])
        out = np.empty(len(edges))
        groups: dict[int, list] = {}
        for i, k in enumerate(keys):
            groups.setdefault(id(self.model.density_for(k)), []).append(i)
        for idx in groups.values():
            d = self.model.density_for(keys[idx[0]])
            out[idx] = d.quantile(u[idx])
        return out

    def materialize(self, edges: Iterable) -> dict:
        edges = list(edges)
        return dict(zip(edges, self.lengths(edges)))


def sample(model: RandomLengthModel, seed: int, periodic: bool = False) -> LengthSample:
    """Sample ``omega`` for ``seed``. Set ``periodic`` for lattice labels so
    that :func:`act` is available."""
    return LengthSample(model, int(seed), None if not periodic else ())


def act(gamma, s: LengthSample) -> LengthSample:
    """``(gamma omega)``: the sample with ``l_{gamma omega}(e) = l_omega(gamma e)``."""
    if s.shift is None:
        raise ModelError("the group action needs a sample on a periodic graph")
    gamma = tuple(int(g) for g in gamma)
    base = s.shift if s.shift else (0,) * len(gamma)
    return LengthSample(s.model, s.seed, tuple(a + b for a, b in zip(base, gamma)))


def draws(model: RandomLengthModel, n: int, seed: int, label=0) -> np.ndarray:
    """``n`` independent draws for a single edge, one per derived seed."""
    if model.fixed is not None:
        return np.full(n, model.fixed)
    d = model.density_for(label)
    ss = np.random.SeedSequence(int(seed))
    u = np.random.Generator(np.random.Philox(ss)).random(n)
    return d.quantile(u)


# ---------------------------------------------------------------- log coordinates

@dataclass(frozen=True)
class LogCoordinates:
    """``alpha = ln l`` on ``[omega_-, omega_+]`` with density
    ``g(x) = e^x h(e^x)``; ``d_h = (l_max + l_max^2) C_h`` bounds ``|g'|``."""

    omega_minus: float
    omega_plus: float
    d_h: float
    sup_dg: float
    integral: float
    alphas: np.ndarray | None = None

    @property
    def within_bound(self) -> bool:
        return self.sup_dg <= self.d_h


def log_density(d: DensitySpec):
    g = lambda x: np.exp(x) * d.pdf(np.exp(x))
    dg = lambda x: np.exp(x) * d.pdf(np.exp(x)) + np.exp(2 * x) * d.dpdf(np.exp(x))
    return g, dg


def log_transform(d: DensitySpec, lengths=None, grid: int = 20001) -> LogCoordinates:
    """Change of variables to ``ln l``, with the derivative bound evaluated on a grid."""
    lo, hi = math.log(d.l_min), math.log(d.l_max)
    g, dg = log_density(d)
    x = np.linspace(lo, hi, grid)
    sup = float(np.abs(dg(x)).max())
    integral = quad(lambda t: float(g(t)), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    alphas = None if lengths is None else np.log(np.asarray(lengths, float))
    return LogCoordinates(lo, hi, (d.l_max + d.l_max ** 2) * d.c_h, sup, integral, alphas)
