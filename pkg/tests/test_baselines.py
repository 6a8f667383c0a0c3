"""Classical per-component classifiers: features, training, experiment runs."""

import json

import pytest

from vulnseq.baselines import (
    BaselinePrediction,
    ClassifierConfig,
    FeatureVector,
    LinearClassifier,
    Technique,
    bow_features,
    call_features,
    extract_features,
    import_features,
    run_baseline,
    static_metric_features,
    token_frequencies,
    train_classifier,
)
from vulnseq.corpus import ComponentRecord, Label
from vulnseq.errors import ConfigError, DegenerateLabels
from vulnseq.evaluate import Setting, report_to_dict
from vulnseq.synth import SynthesisSpec, generate_synthetic_corpus

from conftest import IGMP_VULN, IGMP_FIXED


def _component(source, path="c.c"):
    return ComponentRecord(path=path, source=source, label=Label.NON_VULNERABLE)


# --- feature extraction -------------------------------------------------


def test_token_frequencies_counts_noise_stripped_tokens():
    counts = token_frequencies("int x; /* int */ int y; // int\n")
    assert counts["int"] == 2
    assert counts["x"] == 1
    assert counts["y"] == 1
    assert counts[";"] == 2


def test_bow_bins_are_log2_of_count():
    # x once, y twice, z four times -> bins 0, 1, 2
    fv = bow_features(_component("x y y z z z z"))
    assert fv.values["bow:x"] == 0.0
    assert fv.values["bow:y"] == 1.0
    assert fv.values["bow:z"] == 2.0


def test_bow_bin_count_caps_the_index():
    fv = bow_features(_component("z z z z z z z z"), bins=2)
    assert fv.values["bow:z"] == 1.0
    presence = bow_features(_component("z z z z z z z z"), bins=1)
    assert presence.values["bow:z"] == 0.0


def test_bow_rejects_nonpositive_bins():
    with pytest.raises(ConfigError):
        bow_features(_component("x"), bins=0)


def test_import_targets_are_extracted():
    source = (
        '#include <stdio.h>\n'
        ' # include "local.h"\n'
        "int x;\n"
        "// #include <commented.h>\n"
    )
    fv = import_features(_component(source))
    assert fv.values == {"imp:stdio.h": 1.0, "imp:local.h": 1.0}


def test_no_imports_yields_empty_features():
    assert import_features(_component("int x;\n")).values == {}


def test_call_features_exclude_locally_defined_functions():
    fv = call_features(_component(IGMP_VULN))
    names = {n.removeprefix("call:") for n in fv.values}
    assert {"mod_timer", "atomic_inc", "net_random"} <= names
    assert "igmp_start_timer" not in names
    assert "igmp_heard_query" not in names


def test_static_metrics_on_nested_branches():
    source = (
        "int f(void)\n"
        "{\n"
        " if (a) {\n"
        "  if (b) {\n"
        "  }\n"
        " }\n"
        " return 0;\n"
        "}\n"
    )
    fv = static_metric_features(_component(source))
    assert fv.values["met:loc"] == 8.0
    assert fv.values["met:cyclomatic"] == 3.0
    assert fv.values["met:maxNesting"] == 3.0
    assert fv.values["met:nFunctions"] == 1.0


def test_fix_with_added_guard_raises_cyclomatic_by_one():
    vuln = static_metric_features(_component(IGMP_VULN))
    fixed = static_metric_features(_component(IGMP_FIXED))
    assert fixed.values["met:cyclomatic"] == vuln.values["met:cyclomatic"] + 1.0
    assert fixed.values["met:nFunctions"] == vuln.values["met:nFunctions"]


def test_metrics_on_empty_source_are_zero():
    fv = static_metric_features(_component(""))
    assert fv.values == {
        "met:loc": 0.0,
        "met:cyclomatic": 0.0,
        "met:maxNesting": 0.0,
        "met:nFunctions": 0.0,
    }


def test_unlexable_source_yields_empty_token_features():
    # a lexer failure downgrades to "no tokens", not an exception
    broken = 'int f(void) { char *s = "unterminated; }\n'
    assert bow_features(_component(broken)).values == {}
    assert call_features(_component(broken)).values == {}


def test_extract_features_dispatch():
    comp = _component('#include <a.h>\nint f(void)\n{\n return g();\n}\n')
    assert "imp:a.h" in extract_features(comp, Technique.IMPORTS).values
    assert "call:g" in extract_features(comp, Technique.FUNCTION_CALLS).values
    assert "bow:int" in extract_features(comp, Technique.TEXT_MINING).values
    assert "met:loc" in extract_features(comp, Technique.SOFTWARE_METRICS).values


def test_feature_vector_rejects_non_finite_values():
    with pytest.raises(ConfigError):
        FeatureVector("p.c", {"bad": float("nan")})


# --- classifier ---------------------------------------------------------


def _toy_features(n_per_class=6):
    rows = []
    for i in range(n_per_class):
        rows.append((FeatureVector(f"v{i}.c", {"sig": 1.0, "noise": float(i % 2)}), True))
        rows.append((FeatureVector(f"n{i}.c", {"sig": 0.0, "noise": float(i % 2)}), False))
    return rows


def test_classifier_separates_a_separable_toy_problem():
    rows = _toy_features()
    model = train_classifier(rows, ClassifierConfig())
    assert all(model.predict(fv) == label for fv, label in rows)


def test_zero_iterations_yield_neutral_classifier():
    model = train_classifier(_toy_features(), ClassifierConfig(iterations=0))
    fv = FeatureVector("q.c", {"sig": 1.0})
    assert model.score(fv) == 0.5
    assert model.predict(fv) is False  # strictly-greater threshold


def test_threshold_comparison_is_strict():
    model = LinearClassifier(weights={}, bias=0.0, threshold=0.5)
    assert model.score(FeatureVector("q.c", {})) == 0.5
    assert model.predict(FeatureVector("q.c", {})) is False


def test_duplicating_the_dataset_preserves_the_model():
    rows = _toy_features()
    a = train_classifier(rows, ClassifierConfig(iterations=50))
    b = train_classifier(rows + rows, ClassifierConfig(iterations=50))
    assert a.bias == pytest.approx(b.bias, rel=1e-9, abs=1e-12)
    for name in a.weights:
        assert a.weights[name] == pytest.approx(b.weights[name], rel=1e-9, abs=1e-12)


def test_unknown_features_at_prediction_time_are_ignored():
    model = train_classifier(_toy_features(), ClassifierConfig())
    with_unknown = FeatureVector("u.c", {"sig": 1.0, "never_seen": 4.0})
    without = FeatureVector("u.c", {"sig": 1.0})
    assert model.score(with_unknown) == model.score(without)


def test_single_class_training_is_rejected():
    rows = [(FeatureVector("a.c", {"f": 1.0}), True), (FeatureVector("b.c", {"f": 0.0}), True)]
    with pytest.raises(DegenerateLabels):
        train_classifier(rows, ClassifierConfig())
    with pytest.raises(DegenerateLabels):
        train_classifier([], ClassifierConfig())


def test_classifier_config_validation():
    with pytest.raises(ConfigError):
        train_classifier(_toy_features(), ClassifierConfig(learning_rate=0.0))
    with pytest.raises(ConfigError):
        train_classifier(_toy_features(), ClassifierConfig(iterations=-1))
    with pytest.raises(ConfigError):
        train_classifier(_toy_features(), ClassifierConfig(l2=-0.1))


# --- experiment runs ----------------------------------------------------


@pytest.fixture(scope="module")
def synth_corpus():
    return generate_synthetic_corpus(7, SynthesisSpec())


def test_lexical_techniques_recover_the_planted_signal():
    # vulnerable sources call a helper that clean sources never do, and
    # rewrite-style fixes keep patched files from lingering with a
    # vulnerable-looking shape, so token- and call-based classifiers
    # should near-perfectly separate the classes
    corpus = generate_synthetic_corpus(7, SynthesisSpec(fix_replaces_file=True))
    for technique in (Technique.TEXT_MINING, Technique.FUNCTION_CALLS):
        reports = run_baseline(corpus, technique, Setting.CLEAN)
        assert reports, technique
        for report in reports:
            assert not report.failed, (technique, report.error)
            assert report.mcc >= 0.9, (technique, report.test_release, report.mcc)


def test_patch_style_fixes_confuse_token_classifiers(synth_corpus):
    # with guard-patch fixes the just-fixed file keeps its old token
    # profile, so the token classifier flags it; this asymmetry is the
    # point of comparing against the sequence model
    reports = run_baseline(synth_corpus, Technique.TEXT_MINING, Setting.CLEAN)
    assert any(r.mcc is not None and r.mcc < 0.9 for r in reports)


def test_all_techniques_produce_complete_report_rows(synth_corpus):
    n = len(synth_corpus.releases)
    for technique in Technique:
        reports = run_baseline(synth_corpus, technique, Setting.CLEAN)
        assert len(reports) == n - 1
        for i, report in enumerate(reports):
            assert report.train_release == synth_corpus.releases[i].name
            assert report.test_release == synth_corpus.releases[i + 1].name
            assert report.setting is Setting.CLEAN
            if not report.failed:
                assert report.matrix is not None
                assert report.matrix.total() == len(synth_corpus.releases[i + 1].components)
                for value in (report.precision, report.recall, report.f_measure, report.mcc):
                    assert value is not None
            json.dumps(report_to_dict(report))  # schema must serialize


def test_realistic_setting_runs_for_baselines(synth_corpus):
    reports = run_baseline(synth_corpus, Technique.TEXT_MINING, Setting.REALISTIC)
    assert len(reports) == len(synth_corpus.releases) - 1
    for report in reports:
        assert report.setting is Setting.REALISTIC


def test_baseline_requires_two_releases(synth_corpus):
    import dataclasses

    single = dataclasses.replace(synth_corpus, releases=synth_corpus.releases[:1])
    with pytest.raises(ConfigError):
        run_baseline(single, Technique.TEXT_MINING, Setting.CLEAN)


def test_baseline_predictions_are_plain_records():
    p = BaselinePrediction("a.c", True)
    assert p.path == "a.c"
    assert p.predicted_vulnerable is True
