"""Experiment configuration: versioned JSON schema and component builders.

A config is a plain JSON object (schema version 1) naming each component:

    {
      "schema": 1,
      "generator": {"name": "mcid1"},
      "loss": {"name": "mcid", "numBasis": 6},
      "prior": {"name": "gaussian", "mean": 0.0, "sd": 6.0},
      "rate": {"name": "fixed", "omega": 1.0},
      "mh": {"steps": 6000, "burnIn": 1000, "thin": 5, "proposalScale": 0.55},
      "divergence": {"name": "empirical_l2"},
      "nGrid": [100],
      "replications": 50,
      "baseSeed": 20240801,
      "holdout": 100
    }

Everything a run needs is derived from this dict plus the derived row seed,
which is what makes serial and parallel execution byte-identical.
proposalScale may be a number or {"c": c, "gamma": g} for a per-n scale
c * n^(-g).  The optional "fullReplications" count is activated by the CLI
flag --full.
"""

from __future__ import annotations

import json

import numpy as np

from ..diagnostics import (AbsScalarDistance, EmpiricalL2, EuclideanDistance,
                           L2PDistance, MCIDMeasure, RiskDiffSqrt)
from ..errors import ConfigError
from ..losses import (AUCLoss, CappedSquaredLoss, CheckLoss, MCIDLoss,
                      SquaredLoss, ZeroOneLinearLoss)
from ..model import CubicBSpline, TensorBSpline
from ..priors import GaussianIID, LaplaceIID, SpikeSlab
from ..rates import (AUCDataDriven, FixedRate, HeavyTailRate, PowerLawRate,
                     TsybakovRate)
from ..sampler import MHConfig
from .generators import (AUCSim, HeavyTailSim, MCID1, MCID2, MeanCurveSim,
                         QuantileRegSim, SparseClassSim, affine_features)

SCHEMA_VERSION = 1

_EXPERIMENT_KEYS = {"schema", "generator", "loss", "prior", "rate", "mh",
                    "divergence", "nGrid", "replications", "baseSeed",
                    "holdout", "fullReplications"}


def load_config(path) -> dict:
    """Read and validate a JSON config file.

    Raises ConfigError naming the file when missing, and quoting the line and
    column when the JSON itself is malformed.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config field 'schema' must be {SCHEMA_VERSION}")
    return cfg


def validate_experiment_config(cfg: dict) -> None:
    required = ["generator", "loss", "prior", "rate", "mh", "divergence",
                "nGrid", "replications", "baseSeed"]
    for key in required:
        if key not in cfg:
            raise ConfigError(f"config field {key!r} is required")
    unknown = set(cfg) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    n_grid = cfg["nGrid"]
    if not isinstance(n_grid, list) or not n_grid or \
            any(not isinstance(n, int) or n < 1 for n in n_grid):
        raise ConfigError("nGrid must be a nonempty list of positive integers")
    if not isinstance(cfg["replications"], int) or cfg["replications"] < 1:
        raise ConfigError("replications must be a positive integer")
    if not isinstance(cfg["baseSeed"], int):
        raise ConfigError("baseSeed must be an integer")
    full = cfg.get("fullReplications")
    if full is not None and (not isinstance(full, int) or full < 1):
        raise ConfigError("fullReplications must be a positive integer")


def _namespec(spec, what: str) -> tuple[str, dict]:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"{what} spec must be an object with a 'name' field")
    rest = {k: v for k, v in spec.items() if k != "name"}
    return str(spec["name"]), rest


def build_generator(spec: dict):
    name, kw = _namespec(spec, "generator")
    try:
        if name == "mcid1":
            return MCID1(**kw)
        if name == "mcid2":
            return MCID2(**kw)
        if name == "quantilereg":
            return QuantileRegSim(tau=kw.pop("tau"),
                                  beta_star=kw.pop("betaStar", (1.0, 2.0)),
                                  noise_sd=kw.pop("noiseSd", 1.0), **kw)
        if name == "heavytail":
            return HeavyTailSim(df=kw.pop("df"),
                                theta_star=kw.pop("thetaStar", (1.0, 2.0, -1.0)),
                                **kw)
        if name == "meancurve":
            return MeanCurveSim(curve=kw.pop("curve", "sine"),
                                noise_sd=kw.pop("noiseSd", 0.3), **kw)
        if name == "aucsim":
            return AUCSim(mu=kw.pop("mu"), **kw)
        if name == "sparseclass":
            return SparseClassSim(q=kw.pop("q"), support=kw.pop("support"),
                                  beta_values=kw.pop("betaValues"),
                                  flip_rho=kw.pop("flipRho", 0.1), **kw)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad generator parameters for {name!r}: {exc}") from None
    raise ConfigError(f"unknown generator {name!r}")


def build_basis(generator, loss_spec: dict):
    """The function basis implied by the loss spec and generator."""
    num = loss_spec.get("numBasis")
    if isinstance(generator, MCID1):
        return generator.default_basis(num or 6)
    if isinstance(generator, MCID2):
        return generator.default_basis(num or 4)
    if isinstance(generator, MeanCurveSim):
        return CubicBSpline((0.0, 1.0), num or 8)
    domain = loss_spec.get("domain")
    if num and domain:
        lo, hi = float(domain[0]), float(domain[1])
        return CubicBSpline((lo, hi), int(num))
    return None


def build_loss(spec: dict, generator, schedule=None, n: int | None = None):
    """Construct the loss; the capped squared cap may be schedule-resolved.

    A "cap": "auto" entry takes the heavy-tail schedule's truncation level
    t_n at the current sample size.
    """
    name, kw = _namespec(spec, "loss")
    if name == "check":
        return CheckLoss(tau=float(kw.get("tau", 0.5)), features=affine_features())
    if name == "squared":
        basis = build_basis(generator, spec)
        return SquaredLoss(features=basis)
    if name == "cappedsquared":
        cap = kw.get("cap", "auto")
        if cap == "auto":
            if not isinstance(schedule, HeavyTailRate) or n is None:
                raise ConfigError("cap 'auto' needs a heavytail rate schedule")
            cap = schedule.cap_at(n)
        return CappedSquaredLoss(features=None, cap=float(cap))
    if name == "zeroone":
        return ZeroOneLinearLoss()
    if name == "mcid":
        basis = build_basis(generator, spec)
        if basis is None:
            raise ConfigError("mcid loss needs a basis (numBasis/domain)")
        return MCIDLoss(basis=basis)
    if name == "auc":
        return AUCLoss()
    raise ConfigError(f"unknown loss {name!r}")


def parameter_dim(loss, generator) -> int:
    """Dimension of the continuous parameter the sampler walks on."""
    if isinstance(loss, MCIDLoss):
        return loss.basis.num_basis
    if isinstance(loss, (CheckLoss, SquaredLoss)) and loss.features is not None:
        return loss.features.num_basis
    if isinstance(loss, CappedSquaredLoss):
        if loss.features is not None:
            return loss.features.num_basis
        if isinstance(generator, HeavyTailSim):
            return generator.dim
        raise ConfigError("cannot infer parameter dimension for capped loss")
    if isinstance(loss, AUCLoss):
        return 1
    if isinstance(loss, (CheckLoss, SquaredLoss)):
        return 1
    raise ConfigError(f"cannot infer parameter dimension for {loss.kind!r}")


def build_prior(spec: dict, dim: int):
    name, kw = _namespec(spec, "prior")
    try:
        if name == "gaussian":
            return GaussianIID(mean=float(kw.get("mean", 0.0)),
                               sd=float(kw["sd"]), dim=dim)
        if name == "laplace":
            return LaplaceIID(rate=float(kw["rate"]), dim=dim)
        if name == "spikeslab":
            lam = kw.get("lam")
            return SpikeSlab(q=int(kw["q"]), a=float(kw.get("a", 1.0)),
                             c=float(kw.get("c", 1.0)),
                             lam=None if lam is None else float(lam))
    except KeyError as exc:
        raise ConfigError(f"prior {name!r} missing parameter {exc}") from None
    raise ConfigError(f"unknown prior {name!r}")


def build_rate(spec: dict):
    name, kw = _namespec(spec, "rate")
    try:
        if name == "fixed":
            return FixedRate(omega=float(kw["omega"]))
        if name == "power":
            return PowerLawRate(c=float(kw["c"]), gamma=float(kw["gamma"]))
        if name == "heavytail":
            return HeavyTailRate(s=float(kw["s"]))
        if name == "tsybakov":
            return TsybakovRate(gamma=float(kw["gamma"]))
        if name == "aucdata":
            mult = kw.get("multiplier")
            if isinstance(mult, list):
                mult = (float(mult[0]), float(mult[1]))
            elif mult is not None:
                mult = float(mult)
            return AUCDataDriven(multiplier=mult)
    except KeyError as exc:
        raise ConfigError(f"rate {name!r} missing parameter {exc}") from None
    raise ConfigError(f"unknown rate schedule {name!r}")


def build_divergence(spec: dict, generator, loss, basis=None):
    """Divergence used for radius/point-estimate reporting.

    MC divergences draw their reference samples from the generator's own
    law, so reported divergences are against the population, not the
    fitting data.
    """
    name, kw = _namespec(spec, "divergence")
    if name == "euclid":
        return EuclideanDistance()
    if name == "abs":
        return AbsScalarDistance()
    if name == "empirical_l2":
        if basis is None:
            raise ConfigError("empirical_l2 divergence needs a function basis")
        if hasattr(generator, "divergence_grid"):
            grid = generator.divergence_grid(int(kw.get("gridSize", 0))) \
                if kw.get("gridSize") else generator.divergence_grid()
        else:
            raise ConfigError("generator provides no divergence grid")
        return EmpiricalL2(basis, grid)
    if name == "risk_diff_sqrt":
        return RiskDiffSqrt(loss, generator.mc_sample,
                            n_draws=int(kw.get("nDraws", 4096)))
    if name == "l2p":
        if not hasattr(generator, "sample_x"):
            raise ConfigError("l2p divergence needs a covariate sampler")
        return L2PDistance(generator.sample_x, n_draws=int(kw.get("nDraws", 4096)))
    if name == "mcid_measure":
        if not hasattr(generator, "sample_zx"):
            raise ConfigError("mcid_measure divergence needs a (z,x) sampler")
        return MCIDMeasure(generator.sample_zx, n_draws=int(kw.get("nDraws", 4096)))
    raise ConfigError(f"unknown divergence {name!r}")


def resolve_proposal_scale(mh_spec: dict, n: int):
    scale = mh_spec.get("proposalScale")
    if scale is None:
        return None
    if isinstance(scale, dict):
        try:
            return float(scale["c"]) * float(n) ** (-float(scale["gamma"]))
        except KeyError as exc:
            raise ConfigError(f"proposalScale object missing {exc}") from None
    if isinstance(scale, list):
        return np.asarray(scale, dtype=float)
    return float(scale)


def build_mh(spec: dict, n: int, seed: int, init=None) -> MHConfig:
    if not isinstance(spec, dict):
        raise ConfigError("mh spec must be an object")
    try:
        return MHConfig(
            steps=int(spec.get("steps", 50_000)),
            burn_in=int(spec.get("burnIn", 10_000)),
            thin=int(spec.get("thin", 5)),
            proposal_scale=resolve_proposal_scale(spec, n),
            seed=seed,
            init=init,
            alpha_flip_prob=float(spec.get("alphaFlipProb", 0.05)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mh parameters: {exc}") from None
