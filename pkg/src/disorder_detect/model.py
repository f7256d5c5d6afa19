"""Disorder model: geometric change-time prior, two Markov kernels, precision window.

States are handled internally by their position in ``states`` (an integer index);
labels only matter at the I/O boundary.  Every window, path and table in the
package is a sequence of state indices.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FilePath
from typing import Any, Hashable, Sequence

import numpy as np

from .errors import ModelError

ROW_SUM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriorParams:
    """Prior of the change time: atom ``pi`` at 0, geometric tail on {1, 2, ...}."""

    pi: float
    p: float

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class MarkovKernel:
    """Row-stochastic transition matrix over an ordered, finite state set."""

    states: tuple
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "rows", _frozen(self.rows))

    @property
    def size(self) -> int:
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, MarkovKernel):
            return NotImplemented
        return self.states == other.states and np.array_equal(self.rows, other.rows)

    __hash__ = None


@dataclass(frozen=True)
class PrecisionWindow:
    """Success window: stop at most ``d1`` steps late and at most ``d2`` steps early."""

    d1: int
    d2: int


@dataclass(frozen=True)
class DisorderModel:
    prior: PriorParams
    kernel0: MarkovKernel
    kernel1: MarkovKernel
    window: PrecisionWindow
    x0: Hashable

    # convenience accessors used all over the numerical code
    @property
    def pi(self) -> float:
        return self.prior.pi

    @property
    def p(self) -> float:
        return self.prior.p

    @property
    def q(self) -> float:
        return self.prior.q

    @property
    def d1(self) -> int:
        return self.window.d1

    @property
    def d2(self) -> int:
        return self.window.d2

    @property
    def states(self) -> tuple:
        return self.kernel0.states

    @property
    def n_states(self) -> int:
        return len(self.kernel0.states)

    @cached_property
    def x0_index(self) -> int:
        return self.index(self.x0)

    @cached_property
    def P0(self) -> np.ndarray:
        return self.kernel0.rows

    @cached_property
    def P1(self) -> np.ndarray:
        return self.kernel1.rows

    @cached_property
    def logP0(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return _frozen(np.log(self.kernel0.rows))

    @cached_property
    def logP1(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return _frozen(np.log(self.kernel1.rows))

    @cached_property
    def _label_index(self) -> dict:
        return {label: i for i, label in enumerate(self.states)}

    def index(self, label) -> int:
        """Position of ``label`` in the state set; raises ModelError if unknown."""
        try:
            return self._label_index[label]
        except (KeyError, TypeError):
            raise ModelError(f"unknown state label {label!r}") from None

    def indices(self, labels: Sequence) -> list[int]:
        return [self.index(x) for x in labels]

    def with_(self, **changes) -> "DisorderModel":
        """Copy with some of pi, p, d1, d2, x0, P0, P1 replaced."""
        d = to_dict(self)
        d.update(changes)
        return from_dict(d)


@dataclass(frozen=True)
class Path:
    theta: int
    observations: tuple


def make_model(pi, p, P0, P1, d1, d2, x0=None, states=None) -> DisorderModel:
    P0 = np.asarray(P0, dtype=float)
    if states is None:
        states = tuple(range(P0.shape[0]))
    if x0 is None:
        x0 = states[0]
    return DisorderModel(
        prior=PriorParams(float(pi), float(p)),
        kernel0=MarkovKernel(states, P0),
        kernel1=MarkovKernel(states, P1),
        window=PrecisionWindow(int(d1), int(d2)),
        x0=x0,
    )


def _kernel_violations(name: str, k: MarkovKernel) -> list[str]:
    out = []
    rows = k.rows
    if len(k.states) < 2:
        out.append(f"{name} needs at least 2 states")
    if len(set(k.states)) != len(k.states):
        out.append(f"{name} has duplicate state labels")
    if rows.ndim != 2 or rows.shape != (len(k.states), len(k.states)):
        out.append(f"{name} must be a {len(k.states)}x{len(k.states)} matrix, got shape {rows.shape}")
        return out
    if not np.all(np.isfinite(rows)):
        out.append(f"{name} has non-finite entries")
        return out
    for i, row in enumerate(rows):
        if np.any(row < 0):
            out.append(f"{name} row {i} has negative entries")
        s = math.fsum(row)
        if abs(s - 1.0) > ROW_SUM_TOL:
            out.append(f"{name} row {i} sums to {s:.15g}")
    return out


def validate_model(model: DisorderModel) -> list[str]:
    """Return every violated invariant as a message; an empty list means valid."""
    v: list[str] = []
    pi, p = model.prior.pi, model.prior.p
    if not (0.0 <= pi < 1.0):
        v.append("pi must lie in [0,1)")
    if not (0.0 < p < 1.0):
        v.append("p must lie in (0,1)")
    v += _kernel_violations("kernel0", model.kernel0)
    v += _kernel_violations("kernel1", model.kernel1)
    if model.kernel0.states != model.kernel1.states:
        v.append("kernel0 and kernel1 must share the same ordered state set")
    for name in ("d1", "d2"):
        d = getattr(model.window, name)
        if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 0:
            v.append(f"{name} must be a nonnegative integer")
    if model.x0 not in model.kernel0.states:
        v.append(f"x0 {model.x0!r} is not a state label")
    return v


def check_model(model: DisorderModel) -> DisorderModel:
    """Raise ModelError listing all violations, else return the model unchanged."""
    v = validate_model(model)
    if v:
        raise ModelError("; ".join(v))
    return model


def prior_pmf(prior: PriorParams, j: int) -> float:
    """P(theta = j)."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j == 0:
        return prior.pi
    return (1.0 - prior.pi) * prior.p ** (j - 1) * prior.q


def prior_cdf(prior: PriorParams, j: int) -> float:
    """P(theta <= j); zero for negative j."""
    if j < 0:
        return 0.0
    return 1.0 - (1.0 - prior.pi) * prior.p**j


def sample_theta(prior: PriorParams, rng: np.random.Generator, size=None):
    """Draw change times; ``size=None`` returns a Python int."""
    if size is None:
        if rng.random() < prior.pi:
            return 0
        return int(rng.geometric(prior.q))
    atom = rng.random(size) < prior.pi
    tail = rng.geometric(prior.q, size)
    return np.where(atom, 0, tail).astype(np.int64)


def _cumulative(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=1)
    cum[:, -1] = 1.0
    return cum


def next_states(cum: np.ndarray, current: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF step: for each chain, the successor of ``current`` driven by uniform ``u``."""
    return (u[..., None] >= cum[current]).sum(axis=-1)


def sample_paths(model: DisorderModel, theta, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized path sampler: returns an int array of shape (len(theta), n_steps + 1).

    Transition r (into X_r) uses the post-change kernel iff r >= max(theta, 1).
    """
    theta = np.asarray(theta, dtype=np.int64)
    u = rng.random((theta.shape[0], n_steps))
    return paths_from_uniforms(model, theta, u)


def paths_from_uniforms(model: DisorderModel, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum0, cum1 = _cumulative(model.P0), _cumulative(model.P1)
    reps, n_steps = u.shape
    x = np.empty((reps, n_steps + 1), dtype=np.int64)
    x[:, 0] = model.x0_index
    switch = np.maximum(theta, 1)
    for r in range(1, n_steps + 1):
        prev = x[:, r - 1]
        post = r >= switch
        x[:, r] = np.where(post, next_states(cum1, prev, u[:, r - 1]), next_states(cum0, prev, u[:, r - 1]))
    return x


def sample_path(model: DisorderModel, theta: int, n_steps: int, rng: np.random.Generator) -> Path:
    """One disordered path X_0..X_{n_steps} given the change time, as state labels."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    idx = sample_paths(model, np.array([theta]), n_steps, rng)[0]
    return Path(theta=int(theta), observations=tuple(model.states[i] for i in idx))


def transition_density(model: DisorderModel, regime: str, x, y) -> float:
    """f^0_x(y) for regime 'pre', f^1_x(y) for 'post'; x, y are state labels."""
    if regime not in ("pre", "post"):
        raise ValueError("regime must be 'pre' or 'post'")
    rows = model.P0 if regime == "pre" else model.P1
    return float(rows[model.index(x), model.index(y)])


def auto_horizon(model: DisorderModel, residual: float = 1e-6) -> int:
    """Smallest horizon H with P(theta > H - d2) < residual (and H >= d1 + 2)."""
    tail = 1.0 - model.pi
    k = math.floor(math.log(residual / tail) / math.log(model.p)) + 1 if tail > residual else 0
    while tail * model.p**k >= residual:
        k += 1
    return max(model.d2 + k, model.d1 + 2)


# ---------------------------------------------------------------- serialization

REQUIRED_FIELDS = ("pi", "p", "d1", "d2", "states", "P0", "P1", "x0")


def to_dict(model: DisorderModel) -> dict[str, Any]:
    return {
        "pi": float(model.pi),
        "p": float(model.p),
        "d1": int(model.d1),
        "d2": int(model.d2),
        "states": list(model.states),
        "P0": [[float(v) for v in row] for row in model.P0],
        "P1": [[float(v) for v in row] for row in model.P1],
        "x0": model.x0,
    }


def from_dict(d: dict[str, Any]) -> DisorderModel:
    missing = [k for k in REQUIRED_FIELDS if k not in d]
    if missing:
        raise ModelError(f"model is missing field(s): {', '.join(missing)}")
    try:
        states = tuple(d["states"])
        return DisorderModel(
            prior=PriorParams(float(d["pi"]), float(d["p"])),
            kernel0=MarkovKernel(states, np.array(d["P0"], dtype=float)),
            kernel1=MarkovKernel(states, np.array(d["P1"], dtype=float)),
            window=PrecisionWindow(_as_int(d["d1"], "d1"), _as_int(d["d2"], "d2")),
            x0=d["x0"],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model: {exc}") from exc


def _as_int(v, name):
    if isinstance(v, bool) or not float(v).is_integer():
        raise ModelError(f"{name} must be an integer")
    return int(v)


def load_model(path) -> DisorderModel:
    try:
        text = FilePath(path).read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelError("model file must contain a JSON object")
    return from_dict(d)


def save_model(model: DisorderModel, path) -> None:
    FilePath(path).write_text(json.dumps(to_dict(model), indent=2) + "\n")


def model_hash(model: DisorderModel) -> str:
    """SHA-256 over the canonical JSON form; floats use round-trip repr."""
    blob = json.dumps(to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
