"""Shared test scorers and independent brute-force oracles.

The oracles re-implement the contracts naively (repeated argmax, full pool
materialization) so they share no code path with the package internals they
check.
"""

from __future__ import annotations

import math
from dataclasses import replace

from beambatch import (
    Beam,
    Candidate,
    DecodeConfig,
    Encoding,
    FinalizationPolicy,
    Proposal,
    Vocabulary,
)


def prob_row(probs: dict[int, float], vocab_size: int) -> list[float]:
    """Log-probability row from explicit probabilities; leftover mass is
    spread uniformly over unspecified tokens."""
    assigned = sum(probs.values())
    rest = [t for t in range(vocab_size) if t not in probs]
    if assigned > 1.0 + 1e-12:
        raise ValueError(f"probabilities sum to {assigned} > 1")
    if rest and assigned >= 1.0:
        raise ValueError("no probability mass left for unspecified tokens")
    fill = (1.0 - assigned) / len(rest) if rest else 0.0
    return [math.log(probs.get(t, fill)) for t in range(vocab_size)]


def total_table(
    vocab: Vocabulary,
    order: int,
    rows: dict[tuple[int, ...], list[float]],
    default: list[float] | None = None,
) -> dict[tuple[int, ...], list[float]]:
    """Fill every unspecified context with a default (uniform) row so the
    table is total."""
    from itertools import product

    if default is None:
        default = [math.log(1.0 / vocab.size)] * vocab.size
    table = {}
    for context in product(range(vocab.size), repeat=order):
        table[context] = rows.get(context, default)
    return table


def table_scorer(vocab: Vocabulary, rows_by_context: dict, order: int = 1):
    """NgramTableScorer from {context: {token: prob}} with uniform filler
    rows for unspecified contexts."""
    from beambatch import NgramTableScorer

    table = {ctx: prob_row(probs, vocab.size) for ctx, probs in rows_by_context.items()}
    return NgramTableScorer(vocab, order, total_table(vocab, order, table))


def displacement_scorer(vocab: Vocabulary):
    """An early end-token candidate enters the beam, then two higher-scoring
    extensions displace it before it can reach rank 1."""
    return table_scorer(
        vocab,
        {
            (vocab.sos,): {vocab.sos: 0.002, 1: 0.98, vocab.eos: 0.018},
            (1,): {vocab.sos: 0.001, 1: 0.449, vocab.eos: 0.55},
        },
    )


def agreement_scorer(vocab: Vocabulary):
    """The end token dominates every step, so finalized candidates are never
    displaced and both policies emit the same set."""
    heavy = {vocab.sos: 0.02, 1: 0.08, vocab.eos: 0.90}
    return table_scorer(vocab, {(vocab.sos,): heavy, (1,): heavy})


class FnScorer:
    """Scorer driven by an arbitrary deterministic function
    (encoding, candidate) -> row."""

    def __init__(self, vocab: Vocabulary, fn):
        self.vocab = vocab
        self._fn = fn

    def encode(self, tokens, input_id: int = 0) -> Encoding:
        tokens = tuple(int(t) for t in tokens)
        if not tokens:
            raise ValueError("empty input")
        return Encoding(input_id=input_id, tokens=tokens, input_len=len(tokens))

    def score_next(self, encoding, candidate):
        return self._fn(encoding, candidate)


class TwoRegimeScorer:
    """Deterministic scorer mapping short inputs to short outputs and long
    inputs to long outputs; all candidates of a beam finalize at the same
    length. Models a short-vs-long query mix."""

    def __init__(self, vocab: Vocabulary, split: int = 18, short_len: int = 6, long_len: int = 42):
        self.vocab = vocab
        self.split = split
        self.short_len = short_len
        self.long_len = long_len

    def encode(self, tokens, input_id: int = 0) -> Encoding:
        tokens = tuple(int(t) for t in tokens)
        if not tokens:
            raise ValueError("empty input")
        return Encoding(input_id=input_id, tokens=tokens, input_len=len(tokens))

    def score_next(self, encoding, candidate):
        target = self.short_len if encoding.input_len <= self.split else self.long_len
        size = self.vocab.size
        base = (
            encoding.input_len * 131
            + len(candidate.tokens) * 17
            + candidate.tokens[-1] * 7
        )
        row = [-0.05 * ((base + t * 13) % 29) - 0.01 * t for t in range(size)]
        row[self.vocab.eos] = 5.0 if len(candidate.tokens) >= target - 1 else -50.0
        peak = max(row)
        lse = peak + math.log(sum(math.exp(x - peak) for x in row))
        return [x - lse for x in row]


def _tie_key(p: Proposal):
    return (-p.score, p.parent, -1 if p.token is None else p.token)


def oracle_prune(pool, k: int, delta: float, max_candidates: int) -> list[Proposal]:
    """Greedy-by-score pruning oracle: repeatedly take the best remaining
    proposal whose parent is below the cap, stop at k, then drop everything
    beyond delta of the best accepted."""
    remaining = list(pool)
    accepted: list[Proposal] = []
    per_parent: dict[int, int] = {}
    while remaining and len(accepted) < k:
        best = min(remaining, key=_tie_key)
        remaining.remove(best)
        if best.token is not None:
            if per_parent.get(best.parent, 0) >= max_candidates:
                continue
            per_parent[best.parent] = per_parent.get(best.parent, 0) + 1
        accepted.append(best)
    if not accepted:
        return []
    floor = accepted[0].score - delta
    return [p for p in accepted if delta == math.inf or p.score >= floor]


def oracle_expand(
    beam: Beam, rows: list[list[float]], config: DecodeConfig, vocab: Vocabulary
) -> tuple[list[Candidate], list[Candidate], int]:
    """Naive one-step expansion: materialize the full pool, replay the
    policy's selection and emission rules literally. Returns (next beam
    candidates, emitted, new emitted total)."""
    actives = [(i, c) for i, c in enumerate(beam.candidates) if not c.finalized]
    assert len(rows) == len(actives)

    def child(parent: Candidate, token: int, logp: float) -> Candidate:
        tokens = parent.tokens + (token,)
        return Candidate(
            tokens=tokens,
            score=parent.score + logp,
            finalized=token == vocab.eos or len(tokens) >= config.max_len,
            input_id=parent.input_id,
        )

    pool: list[tuple[Proposal, Candidate]] = []
    if config.policy is FinalizationPolicy.DEFERRED:
        for i, c in enumerate(beam.candidates):
            if c.finalized:
                pool.append((Proposal(c.score, i, None), c))
    for (i, c), row in zip(actives, rows):
        for t in range(vocab.size):
            pool.append((Proposal(c.score + row[t], i, t), child(c, t, row[t])))
    pool.sort(key=lambda pair: _tie_key(pair[0]))

    if config.policy is FinalizationPolicy.DEFERRED:
        kept_props = oracle_prune(
            [p for p, _ in pool], config.k, config.delta, config.max_candidates
        )
        by_key = {p: cand for p, cand in pool}
        next_cands = [by_key[p] for p in kept_props]
        emitted: list[Candidate] = []
        total = beam.emitted
        while next_cands and next_cands[0].finalized and total < config.k:
            emitted.append(next_cands.pop(0))
            total += 1
        return next_cands, emitted, total

    scan = pool[: 2 * config.k]
    emitted = []
    fill: list[Candidate] = []
    for proposal, cand in scan:
        if proposal.token == vocab.eos:
            if beam.emitted + len(emitted) < config.k:
                emitted.append(cand)
        elif len(fill) < config.k:
            fill.append(cand)
    anchor = -math.inf
    if emitted:
        anchor = emitted[0].score
    if fill:
        anchor = max(anchor, fill[0].score)
    if config.delta != math.inf:
        fill = [c for c in fill if c.score >= anchor - config.delta]
    return fill, emitted, beam.emitted + len(emitted)


def oracle_drain(candidates: list[Candidate], emitted_total: int, config: DecodeConfig):
    """Length-cap drain: finalized first in score order, then cap-finalized
    actives, up to k total emissions."""
    done = [c for c in candidates if c.finalized]
    done += [replace(c, finalized=True) for c in candidates if not c.finalized]
    out = []
    for c in done:
        if emitted_total >= config.k:
            break
        out.append(c)
        emitted_total += 1
    return out, emitted_total


def signature(outputs):
    """Comparable form of per-input outputs: (tokens, score) in emission
    order."""
    return [[(c.tokens, c.score) for c in per_input] for per_input in outputs]


class RowsScorer:
    """Returns pre-drawn rows in call order; for driving advance_beam with
    the exact rows an oracle saw."""

    def __init__(self, vocab: Vocabulary, rows):
        self.vocab = vocab
        self._rows = list(rows)

    def encode(self, tokens, input_id: int = 0) -> Encoding:
        return Encoding(input_id=input_id, tokens=tuple(tokens), input_len=len(tokens))

    def score_next(self, encoding, candidate):
        return self._rows.pop(0)


def random_beam_case(rng, max_k: int = 3, max_vocab: int = 4, len_cap: int = 5):
    """A random but invariant-respecting (beam, rows, config, vocab) case.

    Scores and log-probabilities are snapped to a coarse grid so ties occur
    often and the deterministic tie-break is exercised.
    """
    size = rng.randint(2, max_vocab)
    vocab = Vocabulary(size=size, sos=0, eos=size - 1)
    k = rng.randint(1, max_k)
    policy = rng.choice([FinalizationPolicy.DEFERRED, FinalizationPolicy.IMMEDIATE])
    max_len = rng.randint(3, len_cap)
    l_t = rng.randint(2, max_len - 1)
    width = rng.randint(1, k)

    def snap(x):
        return round(x * 4) / 4

    candidates = []
    for _ in range(width):
        score = snap(rng.uniform(-4, 0))
        finalized = policy is FinalizationPolicy.DEFERRED and rng.random() < 0.3
        if finalized:
            length = rng.randint(2, l_t)
            body = [rng.randrange(size - 1) for _ in range(length - 2)]
            tokens = (0, *body, vocab.eos)
        else:
            body = [rng.randrange(size - 1) for _ in range(l_t - 1)]
            tokens = (0, *body)
        candidates.append(Candidate(tokens=tokens, score=score, finalized=finalized))
    candidates.sort(key=lambda c: -c.score)
    if all(c.finalized for c in candidates):
        # a live beam always has an active rank-somewhere candidate
        candidates[0] = replace(candidates[0], tokens=(0,) * l_t, finalized=False)
        candidates.sort(key=lambda c: -c.score)
    beam = Beam(
        input_id=0,
        candidates=tuple(candidates),
        l_t=l_t,
        emitted=rng.randint(0, k - 1),
    )
    config = DecodeConfig(
        k=k,
        n=1,
        delta=rng.choice([math.inf, 0.5, 1.0, 2.0]),
        max_candidates=rng.randint(1, k),
        max_len=max_len,
        policy=policy,
    )
    rows = [
        [snap(rng.uniform(-3, 0)) for _ in range(size)]
        for _ in range(beam.active_width())
    ]
    return beam, rows, config, vocab
