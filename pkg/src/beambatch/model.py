"""Scorer abstraction, deterministic synthetic scorers, and the step cost model.

Two loadable scorer kinds drive experiments without any trained model:

* ``ngram_table`` looks up a log-probability row keyed by the last ``order``
  output tokens (start-token padded). Tables are human-auditable fixtures.
* ``seeded_hash`` derives every row from a keyed hash of (seed, input,
  candidate), so arbitrarily large workloads stay reproducible. Its
  ``eos_bias`` shifts the end-token component in proportion to the candidate
  length relative to the input length, which makes expected output length
  track input length.

Both scorers are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .core import Candidate, Vocabulary
from .errors import ConfigError, DataError, InvariantViolation


@dataclass(frozen=True, slots=True)
class Encoding:
    """Deterministic function of the input tokens and the model parameters.

    seed is the hash-derived state used by the seeded-hash scorer; table
    scorers leave it at 0.
    """

    input_id: int
    tokens: tuple[int, ...]
    input_len: int
    seed: int = 0


@dataclass(frozen=True, slots=True)
class CostParams:
    """Affine per-expansion cost: c0 fixed plus c1 per unit of padded length."""

    c0: float
    c1: float

    def __post_init__(self) -> None:
        if self.c0 < 0 or self.c1 < 0:
            raise ConfigError("cost coefficients must be non-negative")
        if self.c0 + self.c1 <= 0:
            raise ConfigError("at least one cost coefficient must be positive")


def step_cost(num_expansions: int, effective_len: int, params: CostParams) -> float:
    """Simulated cost of one timestep.

    effective_len is the maximum active length among the beams scored this
    step (shorter ones are padded up to it), so the cost is
    num_expansions * (c0 + c1 * effective_len).
    """
    if num_expansions < 0:
        raise InvariantViolation(f"negative expansion count {num_expansions}")
    if num_expansions == 0:
        return 0.0
    if effective_len < 1:
        raise InvariantViolation(f"effective length {effective_len} < 1")
    return num_expansions * (params.c0 + params.c1 * effective_len)


class Scorer(Protocol):
    """Pluggable model interface used by every engine."""

    vocab: Vocabulary

    def encode(self, tokens: Sequence[int], input_id: int = 0) -> Encoding:
        ...

    def score_next(self, encoding: Encoding, candidate: Candidate) -> Sequence[float]:
        ...


def _check_input_tokens(tokens: Sequence[int], vocab: Vocabulary) -> tuple[int, ...]:
    if len(tokens) == 0:
        raise DataError("inputs must be nonempty")
    out = []
    for position, token in enumerate(tokens):
        t = int(token)
        if not (0 <= t < vocab.size):
            raise DataError(
                f"token {t} at position {position} is outside the vocabulary "
                f"(size {vocab.size})"
            )
        out.append(t)
    return tuple(out)


class NgramTableScorer:
    """Scores from an explicit context table.

    The table must be total: one row for every length-``order`` context over
    the vocabulary. Each row holds finite log-probabilities whose
    exponentials sum to 1 within 1e-9; pass renormalize=True to shift
    offending rows instead of rejecting them.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        table: dict[tuple[int, ...], Sequence[float]],
        renormalize: bool = False,
    ) -> None:
        if order < 1:
            raise ConfigError(f"order must be >= 1, got {order}")
        self.vocab = vocab
        self.order = order
        self._table: dict[tuple[int, ...], tuple[float, ...]] = {}
        expected = vocab.size**order
        if len(table) != expected:
            missing = next(
                ctx for ctx in product(range(vocab.size), repeat=order) if ctx not in table
            )
            raise DataError(
                f"table must be total over contexts: expected {expected} rows, "
                f"got {len(table)} (e.g. missing context {missing})"
            )
        for context, row in table.items():
            key = tuple(int(t) for t in context)
            if len(key) != order or any(not (0 <= t < vocab.size) for t in key):
                raise DataError(f"bad table context {context} for order {order}")
            values = [float(v) for v in row]
            if len(values) != vocab.size:
                raise DataError(
                    f"row for context {key} has {len(values)} entries, "
                    f"expected {vocab.size}"
                )
            if any(not math.isfinite(v) for v in values):
                raise DataError(f"row for context {key} contains non-finite values")
            mass = math.fsum(math.exp(v) for v in values)
            if abs(mass - 1.0) > 1e-9:
                if not renormalize:
                    raise DataError(
                        f"row for context {key} is not normalized "
                        f"(probability mass {mass!r})"
                    )
                shift = math.log(mass)
                values = [v - shift for v in values]
            self._table[key] = tuple(values)

    def encode(self, tokens: Sequence[int], input_id: int = 0) -> Encoding:
        checked = _check_input_tokens(tokens, self.vocab)
        return Encoding(input_id=input_id, tokens=checked, input_len=len(checked))

    def score_next(self, encoding: Encoding, candidate: Candidate) -> Sequence[float]:
        if candidate.finalized:
            raise InvariantViolation("scoring a finalized candidate")
        context = candidate.tokens[-self.order :]
        if len(context) < self.order:
            context = (self.vocab.sos,) * (self.order - len(context)) + context
        row = self._table.get(context)
        if row is None:
            raise DataError(f"no table row for context {context}")
        return row

    def rows(self) -> dict[tuple[int, ...], tuple[float, ...]]:
        return dict(self._table)


class SeededHashScorer:
    """Scores derived from a keyed hash; pure in (seed, encoding, candidate).

    Non-end logits are uniform draws from a PCG64 generator seeded by the
    hash; the end-token logit starts at zero and is shifted by
    eos_bias * candidate_len / input_len before log-softmax normalization.
    The end token therefore never wins early by chance, and expected output
    length scales with input length: roughly input_len / eos_bias. A zero or
    negative bias never finalizes, so outputs run to the configured maximum
    length.
    """

    def __init__(self, vocab: Vocabulary, seed: int, eos_bias: float = 0.0) -> None:
        self.vocab = vocab
        self.seed = int(seed)
        self.eos_bias = float(eos_bias)
        self._key = struct.pack("<q", self.seed)

    def _digest(self, tag: bytes, tokens: tuple[int, ...], extra: int = 0) -> int:
        payload = tag + struct.pack("<Q", extra) + struct.pack(f"<{len(tokens)}Q", *tokens)
        h = hashlib.blake2b(payload, digest_size=8, key=self._key)
        return int.from_bytes(h.digest(), "little")

    def encode(self, tokens: Sequence[int], input_id: int = 0) -> Encoding:
        checked = _check_input_tokens(tokens, self.vocab)
        return Encoding(
            input_id=input_id,
            tokens=checked,
            input_len=len(checked),
            seed=self._digest(b"enc", checked),
        )

    def score_next(self, encoding: Encoding, candidate: Candidate) -> Sequence[float]:
        if candidate.finalized:
            raise InvariantViolation("scoring a finalized candidate")
        state = self._digest(b"dec", candidate.tokens, extra=encoding.seed)
        rng = np.random.Generator(np.random.PCG64(state))
        logits = rng.random(self.vocab.size)
        logits[self.vocab.eos] = self.eos_bias * len(candidate.tokens) / encoding.input_len
        peak = logits.max()
        row = logits - (peak + math.log(np.exp(logits - peak).sum()))
        return row.tolist()


@dataclass(frozen=True)
class ScorerSpec:
    """Parsed, validated form of a model file; build() yields the scorer."""

    kind: str
    vocab: Vocabulary
    order: int | None = None
    table: dict[tuple[int, ...], tuple[float, ...]] | None = None
    seed: int | None = None
    eos_bias: float = 0.0
    renormalize: bool = False

    @classmethod
    def from_dict(cls, raw: dict, renormalize: bool = False) -> "ScorerSpec":
        try:
            kind = raw["kind"]
            vocab = Vocabulary(
                size=int(raw["vocab_size"]), sos=int(raw["sos"]), eos=int(raw["eos"])
            )
        except KeyError as exc:
            raise DataError(f"model file missing field {exc}") from exc
        if kind == "ngram_table":
            if "order" not in raw or "table" not in raw:
                raise DataError("ngram_table model requires 'order' and 'table' fields")
            table: dict[tuple[int, ...], tuple[float, ...]] = {}
            for key, row in raw["table"].items():
                try:
                    context = tuple(int(part) for part in str(key).split())
                except ValueError as exc:
                    raise DataError(f"malformed table context key {key!r}") from exc
                table[context] = tuple(float(v) for v in row)
            return cls(
                kind=kind,
                vocab=vocab,
                order=int(raw["order"]),
                table=table,
                renormalize=renormalize,
            )
        if kind == "seeded_hash":
            if "seed" not in raw:
                raise DataError("seeded_hash model requires a 'seed' field")
            return cls(
                kind=kind,
                vocab=vocab,
                seed=int(raw["seed"]),
                eos_bias=float(raw.get("eos_bias", 0.0)),
            )
        raise DataError(f"unknown model kind {kind!r}")

    @classmethod
    def from_file(cls, path: str | Path, renormalize: bool = False) -> "ScorerSpec":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"model file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError(f"model file {path} must hold a JSON object")
        return cls.from_dict(raw, renormalize=renormalize)

    def build(self) -> Scorer:
        if self.kind == "ngram_table":
            assert self.order is not None and self.table is not None
            return NgramTableScorer(
                self.vocab, self.order, self.table, renormalize=self.renormalize
            )
        if self.kind == "seeded_hash":
            assert self.seed is not None
            return SeededHashScorer(self.vocab, self.seed, eos_bias=self.eos_bias)
        raise DataError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> dict:
        base = {
            "kind": self.kind,
            "vocab_size": self.vocab.size,
            "sos": self.vocab.sos,
            "eos": self.vocab.eos,
        }
        if self.kind == "ngram_table":
            assert self.order is not None and self.table is not None
            base["order"] = self.order
            base["table"] = {
                " ".join(str(t) for t in context): list(row)
                for context, row in self.table.items()
            }
        else:
            base["seed"] = self.seed
            base["eos_bias"] = self.eos_bias
        return base
