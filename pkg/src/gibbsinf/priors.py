"""Prior distributions: log-density/log-mass evaluation and exact sampling.

Families: iid Gaussian and Laplace coefficient priors, the sparse
configuration (spike-and-slab) prior with a truncated-geometric complexity
penalty and Laplace slabs, a hierarchical prior over basis dimension with a
Gaussian conditional, and a sup-norm truncation wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from .errors import (DegenerateEstimateError, PreconditionError, ShapeError)
from .model import BasisSpec

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SparseParam:
    """Sparse classifier parameter: sign alpha, support S, and slab coefficients.

    S holds 0-based coordinate indices (sorted, unique); beta_s[i] is the
    coefficient of coordinate S[i].
    """

    alpha: int
    S: tuple[int, ...]
    beta_s: np.ndarray

    def __post_init__(self):
        if self.alpha not in (-1, 1):
            raise ShapeError("alpha must be -1 or +1")
        s = tuple(int(i) for i in self.S)
        if list(s) != sorted(set(s)):
            raise ShapeError("S must be sorted and duplicate-free")
        object.__setattr__(self, "S", s)
        b = np.asarray(self.beta_s, dtype=float)
        if b.shape != (len(s),):
            raise ShapeError("beta_s length must equal |S|")
        object.__setattr__(self, "beta_s", b)

    def dense(self, q: int) -> np.ndarray:
        """The length-q coefficient vector with zeros off the support."""
        beta = np.zeros(q)
        if self.S:
            beta[list(self.S)] = self.beta_s
        return beta

    def dense_theta(self, q: int) -> np.ndarray:
        """(1+q)-vector (alpha, beta) for the linear classifier."""
        return np.concatenate([[float(self.alpha)], self.dense(q)])


class GaussianIID:
    """Independent N(mean, sd^2) on each of `dim` coordinates."""

    kind = "gaussian"

    def __init__(self, mean: float, sd: float, dim: int):
        if sd <= 0:
            raise PreconditionError("sd must be positive")
        self.mean, self.sd, self.dim = float(mean), float(sd), int(dim)

    def log_density(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ShapeError(f"expected shape ({self.dim},), got {theta.shape}")
        z = (theta - self.mean) / self.sd
        return float(-0.5 * np.dot(z, z) - self.dim * (math.log(self.sd) + 0.5 * _LOG_2PI))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.sd * rng.standard_normal(self.dim)

    def sd_vector(self) -> np.ndarray:
        return np.full(self.dim, self.sd)


class LaplaceIID:
    """Independent Laplace(rate) on each coordinate: density (rate/2) e^{-rate|t|}."""

    kind = "laplace"

    def __init__(self, rate: float, dim: int):
        if rate <= 0:
            raise PreconditionError("rate must be positive")
        self.rate, self.dim = float(rate), int(dim)

    def log_density(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ShapeError(f"expected shape ({self.dim},), got {theta.shape}")
        return float(self.dim * math.log(self.rate / 2.0) - self.rate * np.abs(theta).sum())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.laplace(0.0, 1.0 / self.rate, size=self.dim)

    def sd_vector(self) -> np.ndarray:
        return np.full(self.dim, math.sqrt(2.0) / self.rate)


class SpikeSlab:
    """Sparse configuration prior on (S, beta_S) with Laplace slabs.

    The support S gets mass pi(S) = C(q,|S|)^{-1} f(|S|) with the
    truncated-geometric size prior f(s) = (c q^a)^{-s} / sum_t (c q^a)^{-t},
    computed in log space.  Given S, coefficients are iid Laplace(lam); the
    classifier sign alpha is uniform on {-1,+1} but its constant mass
    (-log 2) is *excluded* from log_density, matching the documented
    convention that the density covers the (S, beta_S) part only.
    """

    kind = "spikeslab"

    def __init__(self, q: int, a: float, c: float, lam: float | None = None):
        if q < 1:
            raise PreconditionError("q must be >= 1")
        if a <= 0 or c <= 0:
            raise PreconditionError("a and c must be positive")
        self.q, self.a, self.c = int(q), float(a), float(c)
        # default slab rate sqrt(log q), floored for tiny q where log q <= 0
        self.lam = float(lam) if lam is not None else math.sqrt(max(math.log(q), 1e-2))
        if self.lam <= 0:
            raise PreconditionError("slab rate must be positive")
        # log f(s) for s = 0..q
        log_ratio = math.log(c) + a * math.log(q)
        raw = -log_ratio * np.arange(q + 1)
        self._log_f = raw - logsumexp(raw)

    def log_size_mass(self, s: int) -> float:
        """log f(s), the prior mass of support size s."""
        if not 0 <= s <= self.q:
            raise PreconditionError(f"size {s} outside 0..{self.q}")
        return float(self._log_f[s])

    def log_config_mass(self, S) -> float:
        """log pi(S) = log f(|S|) - log C(q, |S|)."""
        s_idx = sorted(int(i) for i in S)
        if s_idx and (s_idx[0] < 0 or s_idx[-1] >= self.q):
            raise PreconditionError("support index out of range")
        if len(set(s_idx)) != len(s_idx):
            raise PreconditionError("support indices must be unique")
        s = len(s_idx)
        log_binom = gammaln(self.q + 1) - gammaln(s + 1) - gammaln(self.q - s + 1)
        return float(self._log_f[s] - log_binom)

    def slab_log_density(self, beta_s) -> float:
        beta_s = np.asarray(beta_s, dtype=float)
        return float(len(beta_s) * math.log(self.lam / 2.0)
                     - self.lam * np.abs(beta_s).sum())

    def log_density(self, param: SparseParam) -> float:
        if not isinstance(param, SparseParam):
            raise ShapeError("spike-slab prior expects a SparseParam")
        return self.log_config_mass(param.S) + self.slab_log_density(param.beta_s)

    def sample(self, rng: np.random.Generator) -> SparseParam:
        alpha = -1 if rng.random() < 0.5 else 1
        size = int(rng.choice(self.q + 1, p=np.exp(self._log_f)))
        S = tuple(sorted(rng.choice(self.q, size=size, replace=False).tolist()))
        beta_s = rng.laplace(0.0, 1.0 / self.lam, size=size)
        return SparseParam(alpha, S, beta_s)


class PoissonJPrior:
    """Poisson prior over the basis dimension J, restricted to J >= j_min.

    log_pmf reports the raw Poisson log-mass (the J >= j_min normalizer is a
    constant that cancels in any Metropolis ratio); sampling rejects draws
    below j_min.  pmf_conditional gives the properly normalized restricted
    mass for frequency checks.
    """

    def __init__(self, mean: float, j_min: int = 1):
        if mean <= 0:
            raise PreconditionError("Poisson mean must be positive")
        self.mean, self.j_min = float(mean), int(j_min)

    def log_pmf(self, j: int) -> float:
        if j < self.j_min:
            return -math.inf
        return float(poisson.logpmf(j, self.mean))

    def pmf_conditional(self, j: int) -> float:
        if j < self.j_min:
            return 0.0
        tail = 1.0 - poisson.cdf(self.j_min - 1, self.mean)
        return float(poisson.pmf(j, self.mean) / tail)

    def sample(self, rng: np.random.Generator) -> int:
        for _ in range(100000):
            j = int(rng.poisson(self.mean))
            if j >= self.j_min:
                return j
        raise DegenerateEstimateError("Poisson truncation rejected 1e5 straight draws")


class HierarchicalBasis:
    """Mixture prior over basis dimension J and coefficients beta | J.

    j_prior is a distribution over J >= 1; the conditional puts independent
    N(cond_mean, cond_sd^2) mass on each of the J coefficients; basis_factory
    maps J to the function basis used at that dimension.  Samplers in this
    package keep J fixed within a run, so this class mainly serves prior-mass
    evaluation and exact sampling.
    """

    kind = "hierarchical"

    def __init__(self, j_prior: PoissonJPrior, cond_mean: float, cond_sd: float,
                 basis_factory: Callable[[int], BasisSpec] | None = None):
        if cond_sd <= 0:
            raise PreconditionError("conditional sd must be positive")
        self.j_prior = j_prior
        self.cond_mean, self.cond_sd = float(cond_mean), float(cond_sd)
        self.basis_factory = basis_factory

    def log_density(self, J: int, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (int(J),):
            raise ShapeError("beta length must equal J")
        lj = self.j_prior.log_pmf(int(J))
        if lj == -math.inf:
            return -math.inf
        return lj + GaussianIID(self.cond_mean, self.cond_sd, int(J)).log_density(beta)

    def sample(self, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        j = self.j_prior.sample(rng)
        beta = self.cond_mean + self.cond_sd * rng.standard_normal(j)
        return j, beta


class TruncatedPrior:
    """Sup-norm truncation of an inner prior: support {theta : ||theta||_inf <= bound}.

    With no basis attached the sup-norm is max|theta_j| of the coefficient
    vector; with a basis and evaluation grid it is max over the grid of the
    function values |beta' f(x)|.  log_density returns the *unnormalized*
    restricted density (`normalized` is False); the missing -log Z constant
    cancels in Metropolis ratios.  Exact sampling is by rejection.
    """

    kind = "truncated"
    normalized = False

    MAX_ATTEMPTS = 1_000_000
    MIN_RATE = 1e-4

    def __init__(self, inner, bound: float, basis: BasisSpec | None = None,
                 grid=None):
        if bound <= 0:
            raise PreconditionError("truncation bound must be positive")
        self.inner = inner
        self.bound = float(bound)
        self.basis = basis
        self.grid = None if grid is None else np.asarray(grid, dtype=float)
        if basis is not None and self.grid is None:
            raise PreconditionError("a basis-aware truncation needs an evaluation grid")
        self._design = None if basis is None else basis.design(self.grid)

    def sup_norm(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if self._design is None:
            return float(np.abs(theta).max())
        return float(np.abs(self._design @ theta).max())

    def log_density(self, theta) -> float:
        if self.sup_norm(theta) > self.bound:
            return -math.inf
        return self.inner.log_density(theta)

    def sample(self, rng: np.random.Generator):
        for _ in range(self.MAX_ATTEMPTS):
            draw = self.inner.sample(rng)
            if self.sup_norm(draw) <= self.bound:
                return draw
        raise DegenerateEstimateError(
            f"truncation rejection accepted nothing in {self.MAX_ATTEMPTS} attempts "
            f"(acceptance rate below {self.MIN_RATE})")

    def sd_vector(self) -> np.ndarray:
        return self.inner.sd_vector()


PriorSpec = GaussianIID | LaplaceIID | SpikeSlab | HierarchicalBasis | TruncatedPrior


def default_truncation_bound(n: int) -> float:
    """The default truncation radius log(n) used when an experiment asks for
    a sup-norm-restricted prior without giving an explicit bound."""
    if n < 2:
        raise PreconditionError("need n >= 2 for a log-n bound")
    return math.log(n)


# ---------------------------------------------------------------------------
# module operations
# ---------------------------------------------------------------------------

def log_prior(prior: PriorSpec, theta) -> float:
    """Log prior density/mass of theta under the declared prior.

    theta's shape must match the prior family: an array for iid priors, a
    SparseParam for the sparse configuration prior, a (J, beta) pair for the
    hierarchical prior.
    """
    if isinstance(prior, HierarchicalBasis):
        j, beta = theta
        return prior.log_density(int(j), beta)
    return prior.log_density(theta)


def spike_slab_log_mass(prior: SpikeSlab, S) -> float:
    """log pi(S) of a support configuration."""
    return prior.log_config_mass(S)


def sample_prior(prior: PriorSpec, rng: np.random.Generator):
    """One exact draw from the prior."""
    return prior.sample(rng)


def hierarchical_log_density(prior: HierarchicalBasis, J: int, beta) -> float:
    """log pi(J) + log of the conditional Gaussian density of beta given J."""
    return prior.log_density(J, beta)
