"""Batched decoding drivers over a stream of inputs.

Three strategies share one driver loop and differ only in when they admit
new inputs and which live beams they expand:

* run_varbeam: fixed batches of n; the next batch loads only after every
  beam in the current one terminates.
* run_varstream: admits new inputs whenever the live count drops to
  floor(epsilon * n), then expands only the least-advanced beams each step,
  pausing the rest until the newcomers catch up.
* run_varfifo: keeps the batch topped up at every step and expands the
  most-advanced beams first, paying the padding cost of the longest beam
  selected.

All three apply the identical per-beam expansion, so for every input they
emit exactly the candidate list the unbatched reference produces; only the
timestep count and the simulated cost differ. Beams are atomic in capacity
packing: a beam whose active width does not fit is skipped, never split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import Beam, Candidate, DecodeConfig
from .errors import ConfigError, InvariantViolation
from .metrics import MetricsReport
from .model import CostParams, Encoding, Scorer
from .search import advance_beam, beam_finished

__all__ = [
    "BeamSlot",
    "BatchState",
    "StepSelection",
    "StepEvent",
    "refill",
    "select_min_lt",
    "select_fifo_max_lt",
    "flush_all",
    "run_varbeam",
    "run_varstream",
    "run_varfifo",
]


@dataclass
class BeamSlot:
    """A live beam paired with its input's encoding."""

    beam: Beam
    encoding: Encoding
    input_id: int


@dataclass
class BatchState:
    """Scheduler-owned mutable state: live beams in arrival order, per-input
    outputs, the stream cursor, and the global timestep counter."""

    beams: list[BeamSlot] = field(default_factory=list)
    outputs: dict[int, list[Candidate]] = field(default_factory=dict)
    cursor: int = 0
    timestep: int = 0


@dataclass(frozen=True)
class StepSelection:
    """The beams chosen for one timestep plus their padded scoring shape."""

    selected: tuple[BeamSlot, ...]
    total_expansions: int
    effective_len: int


@dataclass(frozen=True)
class StepEvent:
    """Observability record handed to an on_step callback after each step."""

    timestep: int
    phase: str  # "stream" or "flush"
    refilled: tuple[int, ...]
    selected: tuple[int, ...]
    expansions: int
    effective_len: int
    finished: tuple[int, ...]
    live_after: tuple[int, ...]


OnStep = Callable[[StepEvent], None]


def refill(
    state: BatchState,
    corpus: Sequence[Sequence[int]],
    config: DecodeConfig,
    scorer: Scorer,
) -> list[int]:
    """Encode and admit fresh inputs until the batch holds n beams or the
    stream runs out. New beams start as a lone start-token candidate."""
    admitted: list[int] = []
    while len(state.beams) < config.n and state.cursor < len(corpus):
        input_id = state.cursor
        encoding = scorer.encode(corpus[input_id], input_id=input_id)
        state.beams.append(
            BeamSlot(
                beam=Beam.initial(input_id, scorer.vocab.sos),
                encoding=encoding,
                input_id=input_id,
            )
        )
        state.outputs[input_id] = []
        state.cursor += 1
        admitted.append(input_id)
    return admitted


def _pack(slots: Sequence[BeamSlot], capacity: int) -> tuple[list[BeamSlot], int]:
    # Greedy fill that skips beams that would overflow and keeps scanning.
    chosen: list[BeamSlot] = []
    total = 0
    for slot in slots:
        width = slot.beam.active_width()
        if width > capacity:
            raise ConfigError(
                f"a single beam needs {width} expansions but capacity is {capacity}"
            )
        if total + width <= capacity:
            chosen.append(slot)
            total += width
    return chosen, total


def select_min_lt(state: BatchState, capacity: int) -> StepSelection:
    """Expand only the least-advanced beams, in arrival order, up to
    capacity. All selected beams share the minimum length, which is also the
    padded scoring length."""
    if not state.beams:
        raise InvariantViolation("selection requires at least one live beam")
    lowest = min(slot.beam.l_t for slot in state.beams)
    front = [slot for slot in state.beams if slot.beam.l_t == lowest]
    chosen, total = _pack(front, capacity)
    return StepSelection(tuple(chosen), total, lowest)


def select_fifo_max_lt(state: BatchState, capacity: int) -> StepSelection:
    """Expand the most-advanced beams first (ties by arrival), up to
    capacity; every selected beam is padded to the longest one chosen."""
    if not state.beams:
        raise InvariantViolation("selection requires at least one live beam")
    order = sorted(
        range(len(state.beams)), key=lambda i: (-state.beams[i].beam.l_t, i)
    )
    chosen, total = _pack([state.beams[i] for i in order], capacity)
    effective = max(slot.beam.l_t for slot in chosen) if chosen else 0
    return StepSelection(tuple(chosen), total, effective)


def _select_all(state: BatchState, capacity: int) -> StepSelection:
    # Flush selection: every live beam regardless of length, arrival order,
    # padded to the longest one chosen.
    chosen, total = _pack(state.beams, capacity)
    effective = max(slot.beam.l_t for slot in chosen) if chosen else 0
    return StepSelection(tuple(chosen), total, effective)


def _execute_step(
    state: BatchState,
    selection: StepSelection,
    scorer: Scorer,
    config: DecodeConfig,
    report: MetricsReport,
    cost: CostParams,
    *,
    phase: str,
    refilled: Sequence[int],
    on_step: OnStep | None,
) -> None:
    for slot in selection.selected:
        slot.beam, emitted = advance_beam(slot.beam, slot.encoding, scorer, config)
        state.outputs[slot.input_id].extend(emitted)
    state.timestep += 1
    report.record_step(selection.total_expansions, selection.effective_len, cost)
    finished = tuple(
        slot.input_id
        for slot in selection.selected
        if beam_finished(slot.beam, config)
    )
    state.beams = [
        slot for slot in state.beams if not beam_finished(slot.beam, config)
    ]
    if on_step is not None:
        on_step(
            StepEvent(
                timestep=state.timestep,
                phase=phase,
                refilled=tuple(refilled),
                selected=tuple(slot.input_id for slot in selection.selected),
                expansions=selection.total_expansions,
                effective_len=selection.effective_len,
                finished=finished,
                live_after=tuple(slot.input_id for slot in state.beams),
            )
        )


def flush_all(
    state: BatchState,
    scorer: Scorer,
    config: DecodeConfig,
    report: MetricsReport | None = None,
    on_step: OnStep | None = None,
) -> BatchState:
    """Run every live beam to termination, ignoring length-based selection
    but honoring capacity. The stream cursor is untouched, so refills resume
    afterwards."""
    if report is None:
        report = MetricsReport.new()
    cost = CostParams(config.cost_c0, config.cost_c1)
    while state.beams:
        selection = _select_all(state, config.capacity)
        _execute_step(
            state,
            selection,
            scorer,
            config,
            report,
            cost,
            phase="flush",
            refilled=(),
            on_step=on_step,
        )
    return state


def _refill_threshold(config: DecodeConfig) -> int:
    # Integer form of "live beam count <= epsilon * n"; the nudge absorbs
    # float error in epsilon itself (e.g. 1/3 * 3).
    return math.floor(config.epsilon * config.n + 1e-9)


def _drive(
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    *,
    admit_when: Callable[[BatchState], bool],
    select: Callable[[BatchState, int], StepSelection],
    flush_enabled: bool,
    trace: bool,
    on_step: OnStep | None,
) -> tuple[list[list[Candidate]], MetricsReport]:
    state = BatchState()
    report = MetricsReport.new(trace=trace)
    cost = CostParams(config.cost_c0, config.cost_c1)
    next_flush = (
        config.flush_interval if flush_enabled and config.flush_interval else None
    )
    total = len(corpus)
    while state.cursor < total or state.beams:
        if next_flush is not None and state.timestep >= next_flush:
            if state.beams:
                flush_all(state, scorer, config, report, on_step)
            next_flush = state.timestep + config.flush_interval
        refilled: list[int] = []
        if state.cursor < total and admit_when(state):
            refilled = refill(state, corpus, config, scorer)
        if not state.beams:
            break
        selection = select(state, config.capacity)
        _execute_step(
            state,
            selection,
            scorer,
            config,
            report,
            cost,
            phase="stream",
            refilled=refilled,
            on_step=on_step,
        )
    if len(state.outputs) != total:
        raise InvariantViolation(
            f"run consumed {len(state.outputs)} of {total} inputs"
        )
    return [state.outputs[i] for i in range(total)], report


def run_varbeam(
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    *,
    trace: bool = False,
    on_step: OnStep | None = None,
) -> tuple[list[list[Candidate]], MetricsReport]:
    """Traditional batching: load n inputs, decode until all of them finish,
    repeat. Stragglers keep the whole batch occupied."""
    if not len(corpus):
        raise ConfigError("corpus must be nonempty")
    return _drive(
        corpus,
        scorer,
        config,
        admit_when=lambda state: not state.beams,
        select=select_min_lt,
        flush_enabled=False,
        trace=trace,
        on_step=on_step,
    )


def run_varstream(
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    *,
    trace: bool = False,
    on_step: OnStep | None = None,
) -> tuple[list[list[Candidate]], MetricsReport]:
    """Streaming refill with least-advanced-first selection.

    New inputs are admitted at the top of a timestep once the live count
    drops to floor(epsilon * n). When flush_interval is set, all live beams
    are periodically run to termination so no input can starve.
    """
    if not len(corpus):
        raise ConfigError("corpus must be nonempty")
    threshold = _refill_threshold(config)
    return _drive(
        corpus,
        scorer,
        config,
        admit_when=lambda state: len(state.beams) <= threshold,
        select=select_min_lt,
        flush_enabled=True,
        trace=trace,
        on_step=on_step,
    )


def run_varfifo(
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    *,
    trace: bool = False,
    on_step: OnStep | None = None,
) -> tuple[list[list[Candidate]], MetricsReport]:
    """Streaming with an always-full batch and most-advanced-first selection.

    Uses the fewest timesteps of the three drivers but pays the padding cost
    of the longest beam in every step.
    """
    if not len(corpus):
        raise ConfigError("corpus must be nonempty")
    return _drive(
        corpus,
        scorer,
        config,
        admit_when=lambda state: len(state.beams) < config.n,
        select=select_fifo_max_lt,
        flush_enabled=False,
        trace=trace,
        on_step=on_step,
    )
