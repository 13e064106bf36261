"""Single-input decoding engines: greedy search and beam expansion.

expand_beam is the one step every engine shares. The batched drivers in
``scheduler`` call the same advance_beam used by beam_decode, which is what
makes their per-input outputs bit-identical to the unbatched reference.

Finalization policies:

* deferred (default): finalized candidates stay on the beam as no-op
  proposals, are emitted once they reach rank 1, and can be displaced and
  lost if enough better candidates appear first.
* immediate: end-token expansions are emitted straight from a top-2k scan of
  the pool and never occupy the next beam. The 2k scan width guarantees k
  non-end survivors whenever the vocabulary has more than one token.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

from .core import (
    Beam,
    Candidate,
    DecodeConfig,
    FinalizationPolicy,
    Proposal,
    Vocabulary,
    extend,
    proposal_order,
)
from .errors import InvariantViolation
from .heuristics import absolute_threshold_filter, apply_heuristics
from .model import Encoding, Scorer


def greedy_decode(encoding: Encoding, scorer: Scorer, max_len: int) -> Candidate:
    """Repeatedly append the argmax token (ties to the lower id) until the
    end token or max_len finalizes the candidate."""
    vocab = scorer.vocab
    candidate = Candidate(
        tokens=(vocab.sos,), score=0.0, finalized=False, input_id=encoding.input_id
    )
    while not candidate.finalized:
        row = scorer.score_next(encoding, candidate)
        token = min(range(vocab.size), key=lambda t: (-row[t], t))
        candidate = extend(candidate, token, row[token], vocab.eos, max_len)
    return candidate


def _candidate_pool(
    beam: Beam,
    actives: list[tuple[int, Candidate]],
    score_rows: Sequence[Sequence[float]],
    per_parent_cap: int,
    vocab: Vocabulary,
    include_noops: bool,
) -> list[Proposal]:
    # Only a parent's top per_parent_cap extensions can ever be accepted by
    # the capped scan, so the pool is pre-truncated per parent. With the cap
    # at k this is still exact for plain top-k.
    pool: list[Proposal] = []
    if include_noops:
        pool.extend(
            Proposal(c.score, i, None) for i, c in enumerate(beam.candidates) if c.finalized
        )
    for (index, candidate), row in zip(actives, score_rows):
        best_tokens = sorted(range(vocab.size), key=lambda t: (-row[t], t))[:per_parent_cap]
        pool.extend(
            Proposal(candidate.score + float(row[t]), index, t) for t in best_tokens
        )
    return pool


def expand_beam(
    beam: Beam,
    score_rows: Sequence[Sequence[float]],
    config: DecodeConfig,
    vocab: Vocabulary,
) -> tuple[Beam, list[Candidate]]:
    """One expansion step: returns the next beam and the candidates emitted.

    score_rows holds one vocabulary-sized row per active candidate, in beam
    order; finalized candidates receive no row.
    """
    if not beam.candidates:
        raise InvariantViolation("cannot expand an empty beam")
    actives = [(i, c) for i, c in enumerate(beam.candidates) if not c.finalized]
    if len(score_rows) != len(actives):
        raise InvariantViolation(
            f"expected {len(actives)} score rows, got {len(score_rows)}"
        )
    for row in score_rows:
        if len(row) != vocab.size:
            raise InvariantViolation(
                f"score row of length {len(row)} for vocabulary of size {vocab.size}"
            )
    rows_by_parent = {i: row for (i, _), row in zip(actives, score_rows)}

    if config.policy is FinalizationPolicy.IMMEDIATE:
        return _expand_immediate(beam, actives, rows_by_parent, config, vocab)
    return _expand_deferred(beam, actives, score_rows, rows_by_parent, config, vocab)


def _materialize(
    beam: Beam,
    proposal: Proposal,
    rows_by_parent: dict[int, Sequence[float]],
    config: DecodeConfig,
    vocab: Vocabulary,
) -> Candidate:
    parent = beam.candidates[proposal.parent]
    if proposal.token is None:
        return parent
    logp = rows_by_parent[proposal.parent][proposal.token]
    return extend(parent, proposal.token, logp, vocab.eos, config.max_len)


def _expand_deferred(
    beam: Beam,
    actives: list[tuple[int, Candidate]],
    score_rows: Sequence[Sequence[float]],
    rows_by_parent: dict[int, Sequence[float]],
    config: DecodeConfig,
    vocab: Vocabulary,
) -> tuple[Beam, list[Candidate]]:
    pool = _candidate_pool(
        beam, actives, score_rows, config.max_candidates, vocab, include_noops=True
    )
    kept = apply_heuristics(
        pool, k=config.k, delta=config.delta, max_candidates=config.max_candidates
    )
    next_candidates = [
        _materialize(beam, p, rows_by_parent, config, vocab) for p in kept
    ]
    emitted: list[Candidate] = []
    total_emitted = beam.emitted
    while next_candidates and next_candidates[0].finalized and total_emitted < config.k:
        emitted.append(next_candidates.pop(0))
        total_emitted += 1
    return (
        Beam(beam.input_id, tuple(next_candidates), beam.l_t + 1, total_emitted),
        emitted,
    )


def _expand_immediate(
    beam: Beam,
    actives: list[tuple[int, Candidate]],
    rows_by_parent: dict[int, Sequence[float]],
    config: DecodeConfig,
    vocab: Vocabulary,
) -> tuple[Beam, list[Candidate]]:
    if len(actives) != len(beam.candidates):
        raise InvariantViolation(
            "immediate policy never keeps finalized candidates on the beam"
        )
    pool: list[Proposal] = []
    for index, candidate in actives:
        row = rows_by_parent[index]
        pool.extend(
            Proposal(candidate.score + float(row[t]), index, t)
            for t in range(vocab.size)
        )
    scan = sorted(pool, key=proposal_order)[: 2 * config.k]
    quota = config.k - beam.emitted
    emitted: list[Candidate] = []
    fill: list[Candidate] = []
    for proposal in scan:
        if proposal.token == vocab.eos:
            if len(emitted) < quota:
                emitted.append(
                    _materialize(beam, proposal, rows_by_parent, config, vocab)
                )
        elif len(fill) < config.k:
            fill.append(_materialize(beam, proposal, rows_by_parent, config, vocab))
    anchor = -math.inf
    if emitted:
        anchor = emitted[0].score
    if fill:
        anchor = max(anchor, fill[0].score)
    kept = absolute_threshold_filter(fill, config.delta, anchor)
    return (
        Beam(beam.input_id, tuple(kept), beam.l_t + 1, beam.emitted + len(emitted)),
        emitted,
    )


def _drain_at_length_cap(beam: Beam, config: DecodeConfig) -> tuple[Beam, list[Candidate]]:
    # At l_t = max_len the search is over: emit finalized candidates in score
    # order, then any stragglers finalized by the cap itself, up to k total.
    finalized = [c for c in beam.candidates if c.finalized]
    capped = [replace(c, finalized=True) for c in beam.candidates if not c.finalized]
    emitted: list[Candidate] = []
    total_emitted = beam.emitted
    for candidate in finalized + capped:
        if total_emitted >= config.k:
            break
        emitted.append(candidate)
        total_emitted += 1
    return Beam(beam.input_id, (), beam.l_t, total_emitted), emitted


def beam_finished(beam: Beam, config: DecodeConfig) -> bool:
    """A beam terminates once k candidates are emitted, it empties, or its
    active length reaches max_len."""
    return (
        not beam.candidates
        or beam.emitted >= config.k
        or beam.l_t >= config.max_len
    )


def advance_beam(
    beam: Beam, encoding: Encoding, scorer: Scorer, config: DecodeConfig
) -> tuple[Beam, list[Candidate]]:
    """Score the beam's active candidates and run one expansion step.

    Both the unbatched reference and every batched driver go through this
    function, which is what pins their outputs to each other.
    """
    rows = [
        scorer.score_next(encoding, c) for c in beam.candidates if not c.finalized
    ]
    next_beam, emitted = expand_beam(beam, rows, config, scorer.vocab)
    if next_beam.l_t >= config.max_len and next_beam.candidates:
        next_beam, drained = _drain_at_length_cap(next_beam, config)
        emitted = emitted + drained
    return next_beam, emitted


def beam_decode(encoding: Encoding, scorer: Scorer, config: DecodeConfig) -> list[Candidate]:
    """Full unbatched search for one input: up to k finalized candidates in
    emission order."""
    beam = Beam.initial(encoding.input_id, scorer.vocab.sos)
    outputs: list[Candidate] = []
    while True:
        beam, emitted = advance_beam(beam, encoding, scorer, config)
        outputs.extend(emitted)
        if beam_finished(beam, config):
            return outputs
