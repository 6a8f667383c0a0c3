"""Render vulnerable/non-vulnerable verdicts with a trained model.

A component is decomposed exactly like training material: functions are
extracted, abstracted with a fresh ID map, and chunked. Each chunk is
round-tripped through the model; the component is flagged as vulnerable
when any decoded sequence differs from its input. Comparison happens in
index space after UNK mapping, so out-of-vocabulary tokens the model
echoes back as UNK do not count as modifications. A length mismatch,
including early-EOS truncation, does.
"""

from __future__ import annotations

import functools
import multiprocessing
from dataclasses import dataclass

from .abstraction import SeqRole, SequenceMeta, abstract_function, to_sequences
from .corpus import ComponentRecord, Release
from .cparse import extract_functions, tokenize
from .errors import ConfigError, EmptyFunction, LexError, StructureError
from .seq2seq import Seq2SeqModel, decode_greedy, encode


@dataclass(frozen=True)
class ComponentVerdict:
    path: str
    predicted_vulnerable: bool
    modified_sequences: tuple[tuple[str, int], ...]
    total_sequences: int

    def __post_init__(self):
        assert self.predicted_vulnerable == bool(self.modified_sequences)


def predict_component(
    model: Seq2SeqModel, component: ComponentRecord
) -> ComponentVerdict:
    try:
        functions = extract_functions(tokenize(component.source))
    except (LexError, StructureError):
        return ComponentVerdict(component.path, False, (), 0)
    vocab = model.vocabulary
    modified: list[tuple[str, int]] = []
    total = 0
    for fn in functions:
        tokens, _ = abstract_function(fn)
        try:
            seqs = to_sequences(
                tokens,
                SequenceMeta(component.path, fn.name, SeqRole.NON_VULNERABLE),
            )
        except EmptyFunction:
            continue
        for seq in seqs:
            total += 1
            ids = vocab.encode(seq.tokens)
            _, state = encode(ids, model)
            if decode_greedy(state, model) != ids:
                modified.append((fn.name, seq.chunk_index))
    return ComponentVerdict(
        component.path, bool(modified), tuple(modified), total
    )


def predict_release(
    model: Seq2SeqModel, release: Release, jobs: int = 1
) -> list[ComponentVerdict]:
    """Verdicts in component order.

    With jobs > 1 components are scored in worker processes; the merge
    order is fixed, so results match a sequential run.
    """
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if jobs == 1 or len(release.components) <= 1:
        return [predict_component(model, c) for c in release.components]
    with multiprocessing.Pool(processes=jobs) as pool:
        return pool.map(functools.partial(predict_component, model), release.components)
