"""Deterministic training schedules for mixing synthetic and real data.

Two strategies are covered: mixed batches holding a fixed synthetic:real
ratio (default 2:1), and a two-phase fine-tune (all epochs on synthetic
data, then all epochs on real data, all weights unfrozen in both). Plans
are pure data, a pure function of their config, and serialize to JSON for
consumption by any trainer.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Union

from .errors import InvalidConfig, ParseError

SYNTHETIC = "syn"
REAL = "real"

DEFAULT_RATIO = (2, 1)

Entry = tuple[str, int]
Batch = tuple[Entry, ...]
Epoch = tuple[Batch, ...]


@dataclass(frozen=True)
class MixConfig:
    """Inputs that fully determine a mixed-batch plan."""

    n_synthetic: int
    n_real: int
    batch_size: int
    ratio: tuple[int, int] = DEFAULT_RATIO
    seed: int = 0
    epochs: int = 1


@dataclass(frozen=True)
class BatchPlan:
    config: MixConfig
    epochs: tuple[Epoch, ...]


@dataclass(frozen=True)
class FineTunePhase:
    dataset: str
    epochs: int
    all_weights_unfrozen: bool = True


@dataclass(frozen=True)
class FineTunePlan:
    phase1: FineTunePhase
    phase2: FineTunePhase


def _permutation(n: int, *tokens: object) -> list[int]:
    """Seeded permutation of range(n); the seed is derived from the tokens."""
    digest = hashlib.sha256("/".join(str(t) for t in tokens).encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    indices = list(range(n))
    rng.shuffle(indices)
    return indices


def _validate_mix_config(config: MixConfig) -> tuple[int, int]:
    syn_parts, real_parts = config.ratio
    if syn_parts < 0 or real_parts < 0 or syn_parts + real_parts == 0:
        raise InvalidConfig("ratio parts must be non-negative with at least one positive")
    if config.n_synthetic < 0 or config.n_real < 0:
        raise InvalidConfig("dataset sizes must be non-negative")
    if config.batch_size <= 0:
        raise InvalidConfig("batch_size must be positive")
    if config.batch_size % (syn_parts + real_parts) != 0:
        raise InvalidConfig(
            f"batch_size {config.batch_size} is not divisible by "
            f"ratio total {syn_parts + real_parts}"
        )
    if config.epochs <= 0:
        raise InvalidConfig("epochs must be positive")
    per_part = config.batch_size // (syn_parts + real_parts)
    syn_per_batch = per_part * syn_parts
    real_per_batch = per_part * real_parts
    if syn_per_batch > 0 and config.n_synthetic < syn_per_batch:
        raise InvalidConfig(
            f"synthetic dataset ({config.n_synthetic}) cannot fill one batch "
            f"({syn_per_batch} synthetic slots)"
        )
    if real_per_batch > 0 and config.n_real <= 0:
        raise InvalidConfig("real parts are positive but the real dataset is empty")
    return syn_per_batch, real_per_batch


class _WraparoundStream:
    """Hands out dataset indices, reshuffling each time the set is exhausted.

    Consuming whole permutations back to back keeps occurrence counts of any
    two indices within 1 of each other at every point in the stream.
    """

    def __init__(self, n: int, seed: int, epoch: int):
        self._n = n
        self._seed = seed
        self._epoch = epoch
        self._chunk = 0
        self._buffer: list[int] = []

    def take(self, count: int) -> list[int]:
        out: list[int] = []
        while len(out) < count:
            if not self._buffer:
                self._buffer = _permutation(self._n, self._seed, REAL, self._epoch, self._chunk)
                self._chunk += 1
            need = count - len(out)
            out.extend(self._buffer[:need])
            del self._buffer[:need]
        return out


def plan_mixed_batches(config: MixConfig) -> BatchPlan:
    """Lay out every batch of every epoch for ratio-mixed training.

    Per epoch, synthetic indices form a fresh seeded permutation consumed in
    order; the epoch ends when the remaining synthetic samples cannot fill a
    batch (partial batches are dropped). Real indices come from an
    independent reshuffled-wraparound stream, reset each epoch, so the
    smaller real set is oversampled evenly. With no synthetic parts the real
    permutation drives the epoch instead.
    """
    syn_per_batch, real_per_batch = _validate_mix_config(config)
    if syn_per_batch > 0:
        n_batches = config.n_synthetic // syn_per_batch
    else:
        n_batches = config.n_real // real_per_batch
        if n_batches == 0:
            raise InvalidConfig(
                f"real dataset ({config.n_real}) cannot fill one batch "
                f"({real_per_batch} real slots)"
            )

    epochs: list[Epoch] = []
    for epoch in range(config.epochs):
        syn_order = _permutation(config.n_synthetic, config.seed, SYNTHETIC, epoch)
        real_stream = _WraparoundStream(config.n_real, config.seed, epoch)
        batches: list[Batch] = []
        for b in range(n_batches):
            entries: list[Entry] = [
                (SYNTHETIC, i)
                for i in syn_order[b * syn_per_batch : (b + 1) * syn_per_batch]
            ]
            if real_per_batch > 0:
                entries.extend((REAL, i) for i in real_stream.take(real_per_batch))
            batches.append(tuple(entries))
        epochs.append(tuple(batches))
    return BatchPlan(config=config, epochs=tuple(epochs))


def plan_finetune(phase1_epochs: int, phase2_epochs: int) -> FineTunePlan:
    """Two-step schedule: synthetic epochs first, then real, nothing frozen."""
    if phase1_epochs < 1 or phase2_epochs < 1:
        raise InvalidConfig("both phases need at least one epoch")
    return FineTunePlan(
        phase1=FineTunePhase(dataset=SYNTHETIC, epochs=phase1_epochs),
        phase2=FineTunePhase(dataset=REAL, epochs=phase2_epochs),
    )


def serialize_plan(plan: Union[BatchPlan, FineTunePlan]) -> str:
    """Serialize a plan as deterministic JSON with its config echoed back.

    Mixed plans list each epoch as a flat run of [domain, index] entries;
    batch boundaries are implicit because every batch holds exactly
    config.batch_size entries.
    """
    if isinstance(plan, BatchPlan):
        cfg = plan.config
        doc = {
            "config": {
                "n_synthetic": cfg.n_synthetic,
                "n_real": cfg.n_real,
                "batch_size": cfg.batch_size,
                "ratio": list(cfg.ratio),
                "seed": cfg.seed,
                "epochs": cfg.epochs,
            },
            "kind": "mixed",
            "epochs": [
                [[domain, index] for batch in epoch for domain, index in batch]
                for epoch in plan.epochs
            ],
        }
    elif isinstance(plan, FineTunePlan):
        doc = {
            "config": {
                "phase1_epochs": plan.phase1.epochs,
                "phase2_epochs": plan.phase2.epochs,
            },
            "kind": "finetune",
            "phases": [
                {
                    "dataset": phase.dataset,
                    "epochs": phase.epochs,
                    "all_weights_unfrozen": phase.all_weights_unfrozen,
                }
                for phase in (plan.phase1, plan.phase2)
            ],
        }
    else:
        raise InvalidConfig(f"cannot serialize {type(plan).__name__}")
    return json.dumps(doc, separators=(",", ":"))


def parse_plan(source: str) -> Union[BatchPlan, FineTunePlan]:
    """Inverse of serialize_plan: parse(serialize(p)) == p."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "kind" not in doc or "config" not in doc:
        raise ParseError("expected a plan document with 'kind' and 'config'")
    kind = doc["kind"]
    cfg = doc["config"]
    if kind == "finetune":
        phases = doc.get("phases")
        if not isinstance(phases, list) or len(phases) != 2:
            raise ParseError("finetune plan needs exactly two phases")
        parsed = []
        for idx, phase in enumerate(phases):
            if not isinstance(phase, dict) or phase.get("dataset") not in (SYNTHETIC, REAL):
                raise ParseError(f"bad phase {idx}: {phase!r}")
            parsed.append(
                FineTunePhase(
                    dataset=phase["dataset"],
                    epochs=int(phase["epochs"]),
                    all_weights_unfrozen=bool(phase.get("all_weights_unfrozen", True)),
                )
            )
        return FineTunePlan(phase1=parsed[0], phase2=parsed[1])
    if kind == "mixed":
        try:
            config = MixConfig(
                n_synthetic=int(cfg["n_synthetic"]),
                n_real=int(cfg["n_real"]),
                batch_size=int(cfg["batch_size"]),
                ratio=(int(cfg["ratio"][0]), int(cfg["ratio"][1])),
                seed=int(cfg["seed"]),
                epochs=int(cfg["epochs"]),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"bad mixed-plan config: {exc}") from exc
        epochs: list[Epoch] = []
        for e_idx, flat in enumerate(doc.get("epochs", [])):
            if not isinstance(flat, list) or len(flat) % config.batch_size != 0:
                raise ParseError(
                    f"epoch {e_idx} length is not a multiple of batch_size"
                )
            entries: list[Entry] = []
            for entry in flat:
                if (
                    not isinstance(entry, list)
                    or len(entry) != 2
                    or entry[0] not in (SYNTHETIC, REAL)
                    or not isinstance(entry[1], int)
                ):
                    raise ParseError(f"bad plan entry {entry!r} in epoch {e_idx}")
                entries.append((entry[0], entry[1]))
            batches = tuple(
                tuple(entries[i : i + config.batch_size])
                for i in range(0, len(entries), config.batch_size)
            )
            epochs.append(batches)
        return BatchPlan(config=config, epochs=tuple(epochs))
    raise ParseError(f"unknown plan kind {kind!r}")
