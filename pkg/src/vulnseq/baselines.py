"""Classical per-component predictors used for comparison.

Four feature families over raw component text: binned bag-of-words,
include targets, called function names, and static size/complexity
metrics. All feed one logistic-loss linear classifier trained by
full-batch gradient descent. Feature standardization is folded back into
the returned weights, so the classifier applies directly to raw feature
maps.
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass

from .corpus import ComponentRecord, Corpus, clean_training_set, realistic_training_set
from .cparse import (
    Role,
    classify_identifier_roles,
    extract_functions,
    strip_noise,
    tokenize,
)
from .errors import ConfigError, DegenerateLabels, LexError, StructureError, VulnseqError
from .evaluate import (
    EvaluationReport,
    Setting,
    confusion,
    metrics,
    novel_existing_breakdown,
)

DEFAULT_BINS = 10


@dataclass(frozen=True)
class FeatureVector:
    component_path: str
    values: dict[str, float]

    def __post_init__(self):
        for name, value in self.values.items():
            if not math.isfinite(value):
                raise ConfigError(f"non-finite feature {name}")


class Technique(enum.Enum):
    SOFTWARE_METRICS = "SoftwareMetrics"
    IMPORTS = "Imports"
    FUNCTION_CALLS = "FunctionCalls"
    TEXT_MINING = "TextMining"


def _safe_tokens(source: str):
    try:
        return strip_noise(tokenize(source))
    except LexError:
        return []


def _safe_functions(source: str):
    try:
        return extract_functions(tokenize(source))
    except (LexError, StructureError):
        return []


def token_frequencies(source: str) -> Counter[str]:
    """Raw counts over noise-stripped tokens (pre-binning)."""
    return Counter(t.text for t in _safe_tokens(source))


def bow_features(component: ComponentRecord, bins: int = DEFAULT_BINS) -> FeatureVector:
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    values = {}
    for token, count in token_frequencies(component.source).items():
        # equal-width bins in log2 space: 1 -> 0, 2-3 -> 1, 4-7 -> 2, ...
        bin_index = min(bins - 1, int(math.log2(count)))
        values[f"bow:{token}"] = float(bin_index)
    return FeatureVector(component.path, values)


_INCLUDE_RE = re.compile(r'^[ \t]*#[ \t]*include[ \t]*[<"]([^>"\n]+)[>"]', re.MULTILINE)


def import_features(component: ComponentRecord) -> FeatureVector:
    targets = set(_INCLUDE_RE.findall(component.source))
    return FeatureVector(component.path, {f"imp:{t}": 1.0 for t in targets})


def call_features(component: ComponentRecord) -> FeatureVector:
    functions = _safe_functions(component.source)
    defined = {fn.name for fn in functions}
    called: set[str] = set()
    for fn in functions:
        roles = classify_identifier_roles(fn)
        called.update(
            name for name, role in roles.items() if role is Role.FUNCTION
        )
    return FeatureVector(
        component.path, {f"call:{name}": 1.0 for name in called - defined}
    )


_BRANCH_TOKENS = {"if", "while", "for", "case", "&&", "||"}


def static_metric_features(component: ComponentRecord) -> FeatureVector:
    loc = sum(1 for line in component.source.splitlines() if line.strip())
    functions = _safe_functions(component.source)
    cyclomatic = 0
    max_nesting = 0
    for fn in functions:
        body = strip_noise(list(fn.body_tokens))
        cyclomatic += 1 + sum(1 for t in body if t.text in _BRANCH_TOKENS)
        depth = 0
        for t in body:
            if t.text == "{":
                depth += 1
                max_nesting = max(max_nesting, depth)
            elif t.text == "}":
                depth -= 1
    values = {
        "met:loc": float(loc),
        "met:cyclomatic": float(cyclomatic),
        "met:maxNesting": float(max_nesting),
        "met:nFunctions": float(len(functions)),
    }
    return FeatureVector(component.path, values)


@dataclass(frozen=True)
class ClassifierConfig:
    learning_rate: float = 1.0
    iterations: int = 300
    l2: float = 1e-3
    threshold: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")


@dataclass(frozen=True)
class LinearClassifier:
    weights: dict[str, float]
    bias: float
    threshold: float = 0.5

    def score(self, fv: FeatureVector) -> float:
        z = self.bias + sum(
            self.weights.get(name, 0.0) * value for name, value in fv.values.items()
        )
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        ez = math.exp(z)
        return ez / (1.0 + ez)

    def predict(self, fv: FeatureVector) -> bool:
        return self.score(fv) > self.threshold


def train_classifier(
    features: list[tuple[FeatureVector, bool]], cfg: ClassifierConfig
) -> LinearClassifier:
    """Logistic regression, full-batch gradient descent on standardized
    features; the standardization is folded into the returned weights."""
    cfg.validate()
    if not features:
        raise DegenerateLabels("no training components")
    labels = {label for _, label in features}
    if len(labels) < 2:
        raise DegenerateLabels("training components carry a single label")
    names = sorted({name for fv, _ in features for name in fv.values})
    n, d = len(features), len(names)
    index = {name: j for j, name in enumerate(names)}
    x = [[0.0] * d for _ in range(n)]
    y = [1.0 if label else 0.0 for _, label in features]
    for i, (fv, _) in enumerate(features):
        for name, value in fv.values.items():
            x[i][index[name]] = value
    mean = [sum(row[j] for row in x) / n for j in range(d)]
    std = []
    for j in range(d):
        var = sum((row[j] - mean[j]) ** 2 for row in x) / n
        std.append(math.sqrt(var) if var > 0 else 1.0)
    for row in x:
        for j in range(d):
            row[j] = (row[j] - mean[j]) / std[j]

    w = [0.0] * d
    b = 0.0
    for _ in range(cfg.iterations):
        gw = [cfg.l2 * 2.0 * w[j] for j in range(d)]
        gb = 0.0
        for i, row in enumerate(x):
            z = b + sum(w[j] * row[j] for j in range(d))
            if z >= 0:
                p = 1.0 / (1.0 + math.exp(-z))
            else:
                ez = math.exp(z)
                p = ez / (1.0 + ez)
            err = (p - y[i]) / n
            gb += err
            for j in range(d):
                gw[j] += err * row[j]
        for j in range(d):
            w[j] -= cfg.learning_rate * gw[j]
        b -= cfg.learning_rate * gb

    # fold standardization: w_raw = w/std, bias absorbs the means
    weights = {}
    bias = b
    for name, j in index.items():
        weights[name] = w[j] / std[j]
        bias -= w[j] * mean[j] / std[j]
    return LinearClassifier(weights, bias, cfg.threshold)


@dataclass(frozen=True)
class BaselinePrediction:
    path: str
    predicted_vulnerable: bool


def extract_features(
    component: ComponentRecord, technique: Technique, bins: int = DEFAULT_BINS
) -> FeatureVector:
    if technique is Technique.TEXT_MINING:
        return bow_features(component, bins)
    if technique is Technique.IMPORTS:
        return import_features(component)
    if technique is Technique.FUNCTION_CALLS:
        return call_features(component)
    return static_metric_features(component)


def run_baseline(
    corpus: Corpus,
    technique: Technique,
    setting: Setting,
    classifier_config: ClassifierConfig | None = None,
    bins: int = DEFAULT_BINS,
) -> list[EvaluationReport]:
    """Release-pair protocol mirroring the translation-model experiment."""
    if len(corpus.releases) < 2:
        raise ConfigError("an experiment needs at least two releases")
    cfg = classifier_config if classifier_config is not None else ClassifierConfig()
    reports: list[EvaluationReport] = []
    for i in range(len(corpus.releases) - 1):
        train_release = corpus.releases[i]
        test_release = corpus.releases[i + 1]
        try:
            if setting is Setting.CLEAN:
                material = clean_training_set(corpus, i)
            else:
                material = realistic_training_set(corpus, i)
            training = [
                (extract_features(c, technique, bins), True)
                for c in material.fix_pairs
            ] + [
                (extract_features(c, technique, bins), False)
                for c in material.non_vulnerable
            ]
            model = train_classifier(training, cfg)
            predictions = [
                BaselinePrediction(c.path, model.predict(extract_features(c, technique, bins)))
                for c in test_release.components
            ]
            truth = {c.path: c.label for c in test_release.components}
            cm = confusion(predictions, truth)
            m = metrics(cm)
            existing, novel = novel_existing_breakdown(
                predictions, test_release, train_release
            )
            reports.append(
                EvaluationReport(
                    train_release=train_release.name,
                    test_release=test_release.name,
                    setting=setting,
                    matrix=cm,
                    precision=m.precision,
                    recall=m.recall,
                    f_measure=m.f_measure,
                    mcc=m.mcc,
                    existing_detected_pct=existing,
                    novel_detected_pct=novel,
                )
            )
        except VulnseqError as exc:
            reports.append(
                EvaluationReport(
                    train_release=train_release.name,
                    test_release=test_release.name,
                    setting=setting,
                    failed=True,
                    error=str(exc),
                )
            )
    return reports
