"""Command line experiment runner.

One experiment per invocation. Flags can come from a JSON config file
(--config), from the command line, or both; explicit flags win. Exit codes:
0 success, 1 configuration error, 2 I/O or data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import DecodeConfig
from .errors import ConfigError, DataError, InvariantViolation
from .harness import ENGINES, ExperimentConfig, SyntheticCorpusSpec, run_experiment
from .model import ScorerSpec


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; bad flags are config errors here.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="beambatch",
        description="Run one batched-decoding experiment and write its results.",
    )
    parser.add_argument("--config", help="JSON config file; explicit flags override it")
    parser.add_argument("--engine", choices=ENGINES, help="decoding engine to run")
    parser.add_argument("--model", help="model file (JSON)")
    parser.add_argument("--corpus", help="corpus file, one input per line")
    parser.add_argument("--out", help="results file to write (JSON)")
    parser.add_argument("--k", type=int, help="beam width")
    parser.add_argument("--n", type=int, help="batch size in beams (required)")
    parser.add_argument("--epsilon", type=float, help="refill threshold in (0,1)")
    parser.add_argument("--delta", type=float, help="score-gap threshold; inf disables")
    parser.add_argument(
        "--max-candidates", type=int, dest="max_candidates",
        help="per-parent candidate cap; equal to k disables",
    )
    parser.add_argument("--max-len", type=int, dest="max_len", help="maximum output length")
    parser.add_argument(
        "--policy", choices=["immediate", "deferred"], help="finalization policy"
    )
    parser.add_argument("--capacity", type=int, help="max candidate expansions per step")
    parser.add_argument(
        "--flush-interval", type=int, dest="flush_interval",
        help="periodically finish all live beams every this many timesteps",
    )
    parser.add_argument("--cost-c0", type=float, dest="cost_c0", help="fixed cost per expansion")
    parser.add_argument(
        "--cost-c1", type=float, dest="cost_c1", help="cost per unit length per expansion"
    )
    parser.add_argument(
        "--trace", action="store_true", default=None,
        help="also write a per-step CSV trace next to the results file",
    )
    parser.add_argument("--seed", type=int, help="seed for synthetic corpus generation")
    return parser


_DECODE_FIELDS = (
    "k", "n", "epsilon", "delta", "max_candidates", "max_len",
    "policy", "capacity", "flush_interval", "cost_c0", "cost_c1",
)


def _load_config_file(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return raw


def _parse_delta(value) -> float:
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"bad delta value {value!r}") from exc
    return float(value)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}
    decode_cfg = dict(file_cfg.get("decode", {}))
    for name in _DECODE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            decode_cfg[name] = value

    engine = args.engine or file_cfg.get("engine")
    if engine is None:
        raise ConfigError("an engine is required (--engine or config file)")
    if "k" not in decode_cfg or "n" not in decode_cfg:
        raise ConfigError("k and n must be stated explicitly")
    if "delta" in decode_cfg:
        decode_cfg["delta"] = _parse_delta(decode_cfg["delta"])
    decode = DecodeConfig(**{k: v for k, v in decode_cfg.items() if v is not None})

    model = args.model or file_cfg.get("model")
    if model is None:
        raise ConfigError("a model is required (--model or config file)")
    scorer_spec = (
        ScorerSpec.from_dict(model) if isinstance(model, dict) else ScorerSpec.from_file(model)
    )

    corpus = args.corpus or file_cfg.get("corpus")
    synthetic = None
    corpus_path = None
    if isinstance(corpus, dict):
        if "synthetic" not in corpus:
            raise ConfigError("corpus object form must contain a 'synthetic' block")
        synthetic = SyntheticCorpusSpec.from_dict(corpus["synthetic"])
    elif corpus is not None:
        corpus_path = str(corpus)
    else:
        raise ConfigError("a corpus is required (--corpus or config file)")

    trace = args.trace if args.trace is not None else bool(file_cfg.get("trace", False))
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    out = args.out or file_cfg.get("out")
    return ExperimentConfig(
        engine=engine,
        scorer_spec=scorer_spec,
        decode=decode,
        corpus_path=corpus_path,
        synthetic=synthetic,
        out_path=out,
        trace=trace,
        seed=seed,
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        document = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    metrics = document.metrics
    print(
        f"engine={document.engine} inputs={len(document.records)} "
        f"timesteps={metrics['timesteps']} "
        f"expansions={metrics['candidate_expansions']} "
        f"expansions_per_step={metrics['expansions_per_step']} "
        f"simulated_cost={metrics['simulated_cost']}"
    )
    if config.out_path:
        print(f"results written to {config.out_path}")
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
