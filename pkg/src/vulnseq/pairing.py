"""Function pairing, change labeling, and training-pair materialization.

Before-fix and after-fix functions are matched by signature key. A matched
pair whose noise-stripped token streams differ is a vulnerable/fixed pair;
an identical pair is an unchanged (non-vulnerable) function. Training data
is built from three pair types: vulnerable chunk → fixed chunk, fixed
chunk → itself, and non-vulnerable chunk → itself (downsampled).

Only fix-pair components contribute training sequences; components that
were never vulnerable have no after-version to compare against and are
used by the baseline models alone.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

from .abstraction import (
    AbstractedSequence,
    SeqRole,
    SequenceMeta,
    abstract_function,
    to_sequences,
)
from .corpus import Label, TrainingMaterial
from .cparse import FunctionUnit, extract_functions, tokenize
from .errors import ConfigError


@dataclass(frozen=True)
class FunctionPair:
    before: FunctionUnit
    after: FunctionUnit
    signature_key: str


@dataclass(frozen=True)
class LabeledFunction:
    label: Label
    before: FunctionUnit
    after: FunctionUnit | None  # None iff NonVulnerable
    path: str
    function_name: str


class PairKind(enum.Enum):
    VULN_TO_FIXED = "VulnToFixed"
    FIXED_TO_FIXED = "FixedToFixed"
    NON_VULN_TO_SELF = "NonVulnToSelf"


@dataclass(frozen=True)
class TrainingPair:
    input: AbstractedSequence
    target: AbstractedSequence
    kind: PairKind


@dataclass(frozen=True)
class PairingConfig:
    non_vuln_ratio: float = 5.0
    seed: int = 0


def pair_functions(
    before: list[FunctionUnit], after: list[FunctionUnit]
) -> tuple[list[FunctionPair], list[FunctionUnit], list[FunctionUnit]]:
    """Match by signature key; duplicates in file order; extras discarded."""
    buckets: dict[str, list[FunctionUnit]] = {}
    for unit in after:
        buckets.setdefault(unit.signature_key, []).append(unit)
    pairs: list[FunctionPair] = []
    discarded_before: list[FunctionUnit] = []
    matched_after: set[int] = set()
    for unit in before:
        bucket = buckets.get(unit.signature_key)
        if bucket:
            partner = bucket.pop(0)
            matched_after.add(id(partner))
            pairs.append(FunctionPair(unit, partner, unit.signature_key))
        else:
            discarded_before.append(unit)
    discarded_after = [u for u in after if id(u) not in matched_after]
    return pairs, discarded_before, discarded_after


def label_pair(pair: FunctionPair, path: str = "") -> LabeledFunction:
    """Changed (beyond whitespace/comments) means vulnerable."""
    before_texts = [t.text for t in pair.before.significant_tokens()]
    after_texts = [t.text for t in pair.after.significant_tokens()]
    if before_texts != after_texts:
        return LabeledFunction(
            Label.VULNERABLE, pair.before, pair.after, path, pair.before.name
        )
    return LabeledFunction(
        Label.NON_VULNERABLE, pair.before, None, path, pair.before.name
    )


def labeled_functions_from_component(
    source: str, fixed_source: str, path: str
) -> list[LabeledFunction]:
    before = extract_functions(tokenize(source))
    after = extract_functions(tokenize(fixed_source))
    pairs, _, _ = pair_functions(before, after)
    return [label_pair(p, path) for p in pairs]


def labeled_functions_from_material(
    material: TrainingMaterial,
) -> list[LabeledFunction]:
    labeled: list[LabeledFunction] = []
    for comp in material.fix_pairs:
        assert comp.fixed_source is not None
        labeled.extend(
            labeled_functions_from_component(comp.source, comp.fixed_source, comp.path)
        )
    return labeled


def _empty_target(seq: AbstractedSequence) -> AbstractedSequence:
    return AbstractedSequence(
        tokens=(),
        source_path=seq.source_path,
        function_name=seq.function_name,
        chunk_index=seq.chunk_index,
        role=SeqRole.FIXED_AFTER,
    )


def _priority(seed: int, seq: AbstractedSequence) -> tuple:
    key = f"{seed}|{seq.source_path}|{seq.function_name}|{seq.chunk_index}"
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return (digest, seq.source_path, seq.function_name, seq.chunk_index)


def build_training_pairs(
    labeled: list[LabeledFunction], cfg: PairingConfig
) -> list[TrainingPair]:
    """Materialize the three pair types.

    Identity pairs from non-vulnerable functions are capped at
    non_vuln_ratio times the vulnerable-pair count, chosen by a hash
    priority keyed on (seed, path, function, chunk) so that input order
    cannot change the sample.
    """
    if cfg.non_vuln_ratio <= 0:
        raise ConfigError("non_vuln_ratio must be positive")
    vuln_to_fixed: list[TrainingPair] = []
    fixed_identity: list[TrainingPair] = []
    candidates: list[TrainingPair] = []
    for lf in labeled:
        if lf.label is Label.VULNERABLE:
            before_tokens, idmap = abstract_function(lf.before)
            after_tokens, _ = abstract_function(lf.after, shared=idmap)
            before_seqs = to_sequences(
                before_tokens,
                SequenceMeta(lf.path, lf.function_name, SeqRole.VULN_BEFORE),
            )
            after_seqs = to_sequences(
                after_tokens,
                SequenceMeta(lf.path, lf.function_name, SeqRole.FIXED_AFTER),
            )
            shared = min(len(before_seqs), len(after_seqs))
            for k in range(shared):
                vuln_to_fixed.append(
                    TrainingPair(before_seqs[k], after_seqs[k], PairKind.VULN_TO_FIXED)
                )
            # surplus input chunks learn to produce nothing
            for k in range(shared, len(before_seqs)):
                vuln_to_fixed.append(
                    TrainingPair(
                        before_seqs[k],
                        _empty_target(before_seqs[k]),
                        PairKind.VULN_TO_FIXED,
                    )
                )
            for seq in after_seqs:
                fixed_identity.append(
                    TrainingPair(seq, seq, PairKind.FIXED_TO_FIXED)
                )
        else:
            tokens, _ = abstract_function(lf.before)
            seqs = to_sequences(
                tokens,
                SequenceMeta(lf.path, lf.function_name, SeqRole.NON_VULNERABLE),
            )
            for seq in seqs:
                candidates.append(
                    TrainingPair(seq, seq, PairKind.NON_VULN_TO_SELF)
                )
    cap = int(cfg.non_vuln_ratio * len(vuln_to_fixed))
    ranked = sorted(candidates, key=lambda tp: _priority(cfg.seed, tp.input))
    return vuln_to_fixed + fixed_identity + ranked[:cap]
