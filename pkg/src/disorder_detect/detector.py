"""Online optimal detector: stop at the first n >= d1 + 1 with g(window) >= r*(trailing tuple)."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ConfigurationError, ContractError, ModelError
from .likelihood import detection_statistic_g
from .model import DisorderModel, model_hash
from .posterior import PosteriorState, initial_state, posterior_step
from .solver import ThresholdTable, encode


@dataclass(frozen=True)
class Decision:
    stop: bool
    n: int

    def __bool__(self):
        return self.stop


@dataclass(frozen=True)
class TraceRecord:
    n: int
    g: float | None
    r_star: float | None
    pi_n: float


@dataclass
class DetectorState:
    model: DisorderModel
    table: ThresholdTable
    ring: deque
    n: int = -1
    posterior: PosteriorState | None = None
    stopped_at: int | None = None
    trace: list[TraceRecord] | None = None


@dataclass
class DetectionReport:
    stop_time: int | None
    undecided: bool
    success: bool | None
    theta: int | None = None
    observations_used: int = 0
    trace: list[TraceRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stop_time": self.stop_time,
            "undecided": self.undecided,
            "success": self.success,
            "theta": self.theta,
            "observations_used": self.observations_used,
            "trace": [
                {"n": t.n, "g": _jsonable(t.g), "r_star": _jsonable(t.r_star), "pi_n": t.pi_n}
                for t in self.trace
            ],
        }


def _jsonable(v):
    if v is None:
        return None
    return "inf" if math.isinf(v) else v


def new_detector(model: DisorderModel, r_star: ThresholdTable, record_trace: bool = False) -> DetectorState:
    if r_star.d1 != model.d1 or r_star.d2 != model.d2 or r_star.n_states != model.n_states:
        raise ConfigurationError("threshold table shape does not match the model (d1, d2 or state count)")
    if r_star.model_hash != model_hash(model):
        raise ConfigurationError("threshold table was built for a different model")
    return DetectorState(
        model=model,
        table=r_star,
        ring=deque(maxlen=model.d1 + 2),
        trace=[] if record_trace else None,
    )


def push_index(state: DetectorState, x: int) -> Decision:
    """Feed one observation given as a state index."""
    model = state.model
    if state.stopped_at is not None:
        raise ContractError(f"detector already stopped at n={state.stopped_at}")
    if not 0 <= x < model.n_states:
        raise ModelError(f"state index {x} outside the state set")
    if state.n == -1:
        if x != model.x0_index:
            raise ModelError(f"first observation must be x0={model.x0!r}")
        state.posterior = initial_state(model)
    else:
        state.posterior = posterior_step(model, state.posterior, state.ring[-1], x)
    state.ring.append(x)
    state.n += 1
    n = state.n

    if n < model.d1 + 1:
        if state.trace is not None:
            state.trace.append(TraceRecord(n, None, None, state.posterior.pi_n))
        return Decision(False, n)

    window = tuple(state.ring)
    g = detection_statistic_g(model, window)
    r = float(state.table.values[encode(window[1:], model.n_states)])
    if state.trace is not None:
        state.trace.append(TraceRecord(n, g, r, state.posterior.pi_n))
    if g >= r:
        state.stopped_at = n
        return Decision(True, n)
    return Decision(False, n)


def push_observation(state: DetectorState, x) -> Decision:
    """Feed one observation given as a state label."""
    return push_index(state, state.model.index(x))


def is_success(theta: int, tau: int, d1: int, d2: int) -> bool:
    return -d1 <= theta - tau <= d2


def run_to_decision(
    model: DisorderModel,
    r_star: ThresholdTable,
    observations: Iterable,
    theta: int | None = None,
    record_trace: bool = True,
    as_indices: bool = False,
) -> DetectionReport:
    """Run the detector over a finite sequence; observations after the stop are ignored."""
    state = new_detector(model, r_star, record_trace)
    push = push_index if as_indices else push_observation
    used = 0
    for x in observations:
        used += 1
        if push(state, x):
            break
    tau = state.stopped_at
    success = None
    if theta is not None:
        success = tau is not None and is_success(theta, tau, model.d1, model.d2)
    return DetectionReport(
        stop_time=tau,
        undecided=tau is None,
        success=success,
        theta=theta,
        observations_used=used,
        trace=state.trace or [],
    )


def parse_stream(model: DisorderModel, lines: Iterable[str]) -> list[int]:
    """Observation stream -> state indices.

    Accepts newline-delimited labels, or a single-column CSV whose header is ``x``.
    Blank lines are skipped; errors cite the 1-based line number.
    """
    lookup = {str(s): i for i, s in enumerate(model.states)}
    out: list[int] = []
    first = True
    for lineno, raw in enumerate(lines, start=1):
        tok = raw.strip()
        if not tok:
            continue
        if first and tok == "x" and "x" not in lookup:
            first = False
            continue
        first = False
        if "," in tok:
            raise ModelError(f"line {lineno}: expected a single column, got {tok!r}")
        if tok not in lookup:
            raise ModelError(f"line {lineno}: unknown state label {tok!r}")
        out.append(lookup[tok])
    return out
