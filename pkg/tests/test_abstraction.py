from __future__ import annotations

import random
import re

import pytest

from vulnseq.abstraction import (
    CHUNK_LIMIT,
    ID_TOKEN_RE,
    IdMap,
    SeqRole,
    SequenceMeta,
    abstract_function,
    to_sequences,
)
from vulnseq.cparse import KEYWORDS, PUNCTUATORS, extract_functions, tokenize
from vulnseq.errors import EmptyFunction

from conftest import DEV_LOAD, DEV_LOAD_ABSTRACTED, IGMP_FIXED, IGMP_VULN

NUMBER_RE = re.compile(r"^(?:\d|\.\d)(?:[\w.]|[eEpP][+-])*$")

META = SequenceMeta(source_path="x.c", function_name="f", role=SeqRole.NON_VULNERABLE)


def _abstract_source(src: str, shared: IdMap | None = None):
    fns = extract_functions(tokenize(src))
    assert len(fns) == 1
    return abstract_function(fns[0], shared)


def _valid_token(tok: str) -> bool:
    return bool(
        tok in KEYWORDS
        or tok in PUNCTUATORS
        or ID_TOKEN_RE.match(tok)
        or NUMBER_RE.match(tok)
    )


def test_dev_load_matches_published_abstraction():
    tokens, _ = _abstract_source(DEV_LOAD)
    assert " ".join(tokens) == DEV_LOAD_ABSTRACTED


def test_minimal_function_only_f1():
    tokens, idmap = _abstract_source("int main(void){return 0;}")
    assert tokens == ["int", "F_1", "(", "void", ")", "{", "return", "0", ";", "}"]
    assert idmap.size() == {"F": 1, "T": 0, "V": 0, "L": 0}


def test_repeated_entity_reuses_id():
    tokens, _ = _abstract_source("void f(int a) { a = a + a; }")
    assert tokens.count("V_1") == 4


def test_number_literals_kept_char_literals_abstracted():
    tokens, idmap = _abstract_source("void f(void) { c = 'x'; n = 0x10 + 2.5f; }")
    assert "0x10" in tokens and "2.5f" in tokens
    assert idmap.entries["L"] == {"'x'": "L_1"}


def test_string_literal_identity():
    tokens, _ = _abstract_source('void f(void) { g("a"); g("a"); g("b"); }')
    assert tokens.count("L_1") == 2 and tokens.count("L_2") == 1


def test_comments_do_not_change_abstraction():
    with_note = DEV_LOAD.replace("rcu_read_lock();", "rcu_read_lock(); /* note */")
    assert _abstract_source(with_note)[0] == _abstract_source(DEV_LOAD)[0]


def test_alpha_renaming_invariance():
    renamed = re.sub(r"\bnetw\b", "current_net", DEV_LOAD)
    assert _abstract_source(renamed)[0] == _abstract_source(DEV_LOAD)[0]


def test_shared_map_adds_only_new_entities():
    before = "void f(int a) { a = a + 1; }"
    after = "void f(int a) { int tmp; tmp = a + 1; a = tmp; }"
    _, map_b = _abstract_source(before)
    snapshot = map_b.copy()
    tokens_a, map_a = _abstract_source(after, shared=map_b)
    assert map_a.entries["F"] == snapshot.entries["F"]
    assert map_a.entries["T"] == snapshot.entries["T"]
    new_vars = set(map_a.entries["V"]) - set(snapshot.entries["V"])
    assert new_vars == {"tmp"}
    assert map_a.entries["V"]["tmp"] == "V_2"
    assert "V_2" in tokens_a


def test_shared_map_preserves_diff_locality(igmp_pair):
    vuln_fn = extract_functions(tokenize(igmp_pair[0]))[0]
    fixed_fn = extract_functions(tokenize(igmp_pair[1]))[0]
    src_b = [t.text for t in vuln_fn.significant_tokens()]
    src_a = [t.text for t in fixed_fn.significant_tokens()]
    abs_b, idmap = abstract_function(vuln_fn)
    abs_a, _ = abstract_function(fixed_fn, shared=idmap)

    def prefix(a, b):
        i = 0
        while i < min(len(a), len(b)) and a[i] == b[i]:
            i += 1
        return i

    p_src = prefix(src_b, src_a)
    p_abs = prefix(abs_b, abs_a)
    s_src = prefix(src_b[p_src:][::-1], src_a[p_src:][::-1])
    s_abs = prefix(abs_b[p_abs:][::-1], abs_a[p_abs:][::-1])
    assert (p_src, s_src) == (p_abs, s_abs)
    v_md = idmap.entries["V"]["max_delay"]
    inserted = abs_a[p_abs : len(abs_a) - s_abs]
    assert inserted == ["if", "(", "!", v_md, ")", v_md, "=", "1", ";"]


def test_unchanged_function_identical_under_shared_map(igmp_pair):
    vuln_units = extract_functions(tokenize(igmp_pair[0]))
    fixed_units = extract_functions(tokenize(igmp_pair[1]))
    abs_b, idmap = abstract_function(vuln_units[1])
    abs_a, _ = abstract_function(fixed_units[1], shared=idmap)
    assert abs_b == abs_a


def test_idempotent_on_own_output():
    tokens, _ = _abstract_source(DEV_LOAD)
    again, _ = _abstract_source(" ".join(tokens))
    assert again == tokens
    seeded = IdMap()
    seeded.seed_identity(tokens)
    again2, _ = _abstract_source(" ".join(tokens), shared=seeded)
    assert again2 == tokens


def test_seeded_map_handles_sparse_ids():
    # a stream whose IDs are not dense from 1, as the after-side of a
    # shared map can produce
    src = "void F_3 ( void ) { V_2 = V_2 + 1 ; }"
    seeded = IdMap()
    seeded.seed_identity(src.split())
    tokens, idmap = _abstract_source(src, shared=seeded)
    assert " ".join(tokens) == src
    assert idmap.counters["V"] == 3 and idmap.counters["F"] == 4


def test_vocabulary_bound(igmp_pair):
    for src in igmp_pair + (DEV_LOAD,):
        for fn in extract_functions(tokenize(src)):
            tokens, _ = abstract_function(fn)
            bad = [t for t in tokens if not _valid_token(t)]
            assert bad == []


def test_chunk_sizes_exact():
    toks = [f"V_{i}" for i in range(1, 121)]
    seqs = to_sequences(toks, META)
    assert [len(s.tokens) for s in seqs] == [50, 50, 20]
    assert [s.chunk_index for s in seqs] == [0, 1, 2]


def test_chunk_boundary_single():
    seqs = to_sequences(["x"] * CHUNK_LIMIT, META)
    assert len(seqs) == 1 and len(seqs[0].tokens) == 50


def test_chunk_concatenation_property():
    rng = random.Random(4242)
    for _ in range(100):
        n = rng.randint(1, 317)
        toks = [str(i) for i in range(n)]
        seqs = to_sequences(toks, META)
        assert [t for s in seqs for t in s.tokens] == toks
        assert max(len(s.tokens) for s in seqs) <= CHUNK_LIMIT
        assert [s.chunk_index for s in seqs] == list(range(len(seqs)))
        assert all(len(s.tokens) == CHUNK_LIMIT for s in seqs[:-1])


def test_chunk_empty_raises():
    with pytest.raises(EmptyFunction):
        to_sequences([], META)


def test_sequence_line_form():
    seqs = to_sequences(["int", "F_1", "(", ")", ";"], META)
    assert seqs[0].line() == "int F_1 ( ) ;\n"
