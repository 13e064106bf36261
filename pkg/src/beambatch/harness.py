"""Corpus handling, experiment configuration, engine dispatch, and results.

Corpora are plain text, one input per line as whitespace-separated token
ids. Inputs are sorted by length (descending, stable) before decoding and
results are written back in original input order. Results documents are
JSON; per-step traces are CSV with columns timestep, expansions,
effective_len, cost.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import Candidate, DecodeConfig
from .errors import ConfigError, DataError
from .metrics import MetricsReport
from .model import CostParams, Scorer, ScorerSpec
from .scheduler import run_varbeam, run_varfifo, run_varstream
from .search import greedy_decode

ENGINES = ("greedy", "fixed", "varbeam", "varstream", "varfifo", "fixedstream")

# Engines that are pruning-off aliases of a batched driver; their configs
# must already have both heuristics disabled.
_PRUNING_OFF = {"fixed": "varbeam", "fixedstream": "varstream"}


@dataclass(frozen=True)
class Corpus:
    """Ordered token-id input sequences."""

    inputs: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.inputs)

    def __getitem__(self, index: int) -> tuple[int, ...]:
        return self.inputs[index]


def load_corpus(path: str | Path) -> Corpus:
    """Parse a corpus file; malformed lines are reported by line number."""
    text = Path(path).read_text()
    inputs: list[tuple[int, ...]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            tokens = tuple(int(part) for part in line.split())
        except ValueError as exc:
            raise DataError(f"{path}: malformed token on line {number}") from exc
        if any(t < 0 for t in tokens):
            raise DataError(f"{path}: negative token on line {number}")
        inputs.append(tokens)
    if not inputs:
        raise DataError(f"{path}: empty corpus")
    return Corpus(tuple(inputs))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        "".join(" ".join(str(t) for t in line) + "\n" for line in corpus.inputs)
    )


def bucket_by_length(corpus: Corpus) -> tuple[Corpus, list[int]]:
    """Stable descending sort by input length.

    Returns the reordered corpus and the permutation mapping each new
    position to its original index, so results can be restored to input
    order.
    """
    if not len(corpus):
        raise DataError("cannot bucket an empty corpus")
    permutation = sorted(range(len(corpus)), key=lambda i: -len(corpus.inputs[i]))
    return Corpus(tuple(corpus.inputs[i] for i in permutation)), permutation


def generate_synthetic_corpus(
    seed: int,
    n_inputs: int,
    vocab_size: int,
    *,
    distribution: str = "geometric",
    mean_len: float = 8.0,
    min_len: int = 1,
    max_len: int = 16,
) -> Corpus:
    """Deterministic random corpus with geometric or uniform input lengths."""
    if n_inputs < 1:
        raise ConfigError(f"n_inputs must be >= 1, got {n_inputs}")
    if vocab_size < 2:
        raise ConfigError(f"vocab_size must be >= 2, got {vocab_size}")
    rng = random.Random(seed)
    inputs: list[tuple[int, ...]] = []
    for _ in range(n_inputs):
        if distribution == "geometric":
            if mean_len < 1.0:
                raise ConfigError(f"mean_len must be >= 1, got {mean_len}")
            p = 1.0 / mean_len
            length = int(math.log(1.0 - rng.random()) / math.log(1.0 - p)) + 1 if p < 1.0 else 1
        elif distribution == "uniform":
            if not (1 <= min_len <= max_len):
                raise ConfigError(f"bad uniform length range [{min_len}, {max_len}]")
            length = rng.randint(min_len, max_len)
        else:
            raise ConfigError(f"unknown length distribution {distribution!r}")
        inputs.append(tuple(rng.randrange(vocab_size) for _ in range(length)))
    return Corpus(tuple(inputs))


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    n_inputs: int
    distribution: str = "geometric"
    mean_len: float = 8.0
    min_len: int = 1
    max_len: int = 16

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticCorpusSpec":
        try:
            return cls(
                n_inputs=int(raw["n_inputs"]),
                distribution=str(raw.get("distribution", "geometric")),
                mean_len=float(raw.get("mean_len", 8.0)),
                min_len=int(raw.get("min_len", 1)),
                max_len=int(raw.get("max_len", 16)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad synthetic corpus spec: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs."""

    engine: str
    scorer_spec: ScorerSpec
    decode: DecodeConfig
    corpus_path: str | None = None
    synthetic: SyntheticCorpusSpec | None = None
    out_path: str | None = None
    trace: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigError(
                f"unknown engine {self.engine!r}; expected one of {', '.join(ENGINES)}"
            )
        if (self.corpus_path is None) == (self.synthetic is None):
            raise ConfigError("exactly one of corpus_path or synthetic is required")
        if self.trace and self.out_path is None:
            raise ConfigError("trace output requires an output path")
        if self.engine in _PRUNING_OFF:
            if self.decode.delta != math.inf or self.decode.max_candidates != self.decode.k:
                raise ConfigError(
                    f"engine {self.engine!r} requires pruning off: "
                    "delta=inf and max_candidates=k"
                )


@dataclass(frozen=True)
class ResultsDocument:
    """Per-input candidate records (in input order), run metrics, and a
    config echo."""

    engine: str
    config: dict
    metrics: dict
    records: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "config": self.config,
            "metrics": self.metrics,
            "records": list(self.records),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ResultsDocument":
        return cls(
            engine=raw["engine"],
            config=raw["config"],
            metrics=raw["metrics"],
            records=tuple(raw["records"]),
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "ResultsDocument":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"results file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


def trace_path_for(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".trace.csv")


def write_trace(report: MetricsReport, path: str | Path) -> None:
    if report.per_step_trace is None:
        raise ConfigError("run was not executed with tracing enabled")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestep", "expansions", "effective_len", "cost"])
        writer.writerows(report.per_step_trace)


def _run_greedy(
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    trace: bool,
) -> tuple[list[list[Candidate]], MetricsReport]:
    # Unbatched: one input at a time, one timestep per appended token.
    report = MetricsReport.new(trace=trace)
    cost = CostParams(config.cost_c0, config.cost_c1)
    outputs: list[list[Candidate]] = []
    for input_id, tokens in enumerate(corpus):
        encoding = scorer.encode(tokens, input_id=input_id)
        candidate = greedy_decode(encoding, scorer, config.max_len)
        for length in range(1, len(candidate.tokens)):
            report.record_step(1, length, cost)
        outputs.append([candidate])
    return outputs, report


def dispatch_engine(
    engine: str,
    corpus: Sequence[Sequence[int]],
    scorer: Scorer,
    config: DecodeConfig,
    *,
    trace: bool = False,
) -> tuple[list[list[Candidate]], MetricsReport]:
    if engine == "greedy":
        return _run_greedy(corpus, scorer, config, trace)
    runner = {
        "fixed": run_varbeam,
        "varbeam": run_varbeam,
        "varstream": run_varstream,
        "fixedstream": run_varstream,
        "varfifo": run_varfifo,
    }.get(engine)
    if runner is None:
        raise ConfigError(f"unknown engine {engine!r}")
    return runner(corpus, scorer, config, trace=trace)


def _decode_config_echo(config: DecodeConfig) -> dict:
    echo = {
        "k": config.k,
        "n": config.n,
        "epsilon": config.epsilon,
        "delta": "inf" if config.delta == math.inf else config.delta,
        "max_candidates": config.max_candidates,
        "max_len": config.max_len,
        "policy": config.policy.value,
        "capacity": config.capacity,
        "flush_interval": config.flush_interval,
        "cost_c0": config.cost_c0,
        "cost_c1": config.cost_c1,
    }
    return echo


def run_experiment(config: ExperimentConfig) -> ResultsDocument:
    """Load or synthesize the corpus, bucket by length, decode with the
    configured engine, and restore input order in the results."""
    scorer = config.scorer_spec.build()
    if config.corpus_path is not None:
        corpus = load_corpus(config.corpus_path)
        corpus_echo: dict = {"path": config.corpus_path}
    else:
        spec = config.synthetic
        corpus = generate_synthetic_corpus(
            config.seed,
            spec.n_inputs,
            config.scorer_spec.vocab.size,
            distribution=spec.distribution,
            mean_len=spec.mean_len,
            min_len=spec.min_len,
            max_len=spec.max_len,
        )
        corpus_echo = {"synthetic": spec.__dict__ | {"seed": config.seed}}

    bucketed, permutation = bucket_by_length(corpus)
    outputs, report = dispatch_engine(
        config.engine, bucketed.inputs, scorer, config.decode, trace=config.trace
    )

    records: list[dict | None] = [None] * len(corpus)
    for position, original in enumerate(permutation):
        records[original] = {
            "input_id": original,
            "candidates": [
                {"tokens": list(c.tokens), "score": c.score}
                for c in outputs[position]
            ],
        }
    document = ResultsDocument(
        engine=config.engine,
        config={
            "decode": _decode_config_echo(config.decode),
            "model": config.scorer_spec.to_dict()
            if config.scorer_spec.kind == "seeded_hash"
            else {"kind": config.scorer_spec.kind},
            "corpus": corpus_echo,
            "seed": config.seed,
        },
        metrics=report.summarize(),
        records=tuple(records),
    )
    if config.out_path is not None:
        document.write(config.out_path)
        if config.trace:
            write_trace(report, trace_path_for(config.out_path))
    return document
