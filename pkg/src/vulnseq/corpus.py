"""Release-indexed corpus model, JSONL persistence, and training splits.

A corpus is a project's ordered release history. Each release holds
components (source files) labeled Vulnerable or NonVulnerable; vulnerable
components carry their post-fix source. Vulnerability records attach
detection dates, which drive the realistic training split.
"""

from __future__ import annotations

import datetime
import enum
import json
from dataclasses import dataclass

from .errors import ConfigError, IntegrityError, ParseError, VersionError
from .fileio import atomic_write_text

FORMAT_VERSION = 1


class Label(enum.Enum):
    VULNERABLE = "Vulnerable"
    NON_VULNERABLE = "NonVulnerable"


@dataclass(frozen=True)
class ComponentRecord:
    path: str
    source: str
    label: Label
    fixed_source: str | None = None
    vuln_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Release:
    name: str
    release_date: datetime.date
    components: tuple[ComponentRecord, ...]

    def component(self, path: str) -> ComponentRecord | None:
        for comp in self.components:
            if comp.path == path:
                return comp
        return None


@dataclass(frozen=True)
class VulnerabilityRecord:
    vuln_id: str
    detection_date: datetime.date
    affected_paths: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Corpus:
    project_name: str
    releases: tuple[Release, ...]
    vulnerabilities: tuple[VulnerabilityRecord, ...]

    def vulnerability(self, vuln_id: str) -> VulnerabilityRecord | None:
        for rec in self.vulnerabilities:
            if rec.vuln_id == vuln_id:
                return rec
        return None


@dataclass(frozen=True)
class TrainingMaterial:
    """One release's training view under a chosen setting.

    fix_pairs are components usable as (vulnerable, fixed) sources;
    non_vulnerable are components to treat as clean in this setting,
    which under the realistic split can include mislabeled ones.
    """

    release_name: str
    fix_pairs: tuple[ComponentRecord, ...]
    non_vulnerable: tuple[ComponentRecord, ...]


def _ws_normalize(text: str) -> str:
    return " ".join(text.split())


def validate_corpus(corpus: Corpus) -> None:
    """Check every structural invariant; raise IntegrityError on the first hit."""
    known_vuln_ids = {v.vuln_id for v in corpus.vulnerabilities}
    if len(known_vuln_ids) != len(corpus.vulnerabilities):
        raise IntegrityError("duplicate vulnerability ids")
    prev_date = None
    seen_names = set()
    for rel in corpus.releases:
        if rel.name in seen_names:
            raise IntegrityError(f"duplicate release name {rel.name!r}")
        seen_names.add(rel.name)
        if prev_date is not None and rel.release_date <= prev_date:
            raise IntegrityError(
                f"release dates must strictly increase (at {rel.name!r})"
            )
        prev_date = rel.release_date
        paths = set()
        for comp in rel.components:
            if comp.path in paths:
                raise IntegrityError(
                    f"duplicate path {comp.path!r} in release {rel.name!r}"
                )
            paths.add(comp.path)
            if comp.label is Label.VULNERABLE and comp.fixed_source is None:
                raise IntegrityError(
                    f"vulnerable component {comp.path!r} lacks fixed source"
                )
            if comp.label is Label.NON_VULNERABLE and comp.fixed_source is not None:
                raise IntegrityError(
                    f"non-vulnerable component {comp.path!r} has a fixed source"
                )
            if comp.fixed_source is not None and _ws_normalize(
                comp.fixed_source
            ) == _ws_normalize(comp.source):
                raise IntegrityError(
                    f"fix for {comp.path!r} is a whitespace-only change"
                )
            for vid in comp.vuln_ids:
                if vid not in known_vuln_ids:
                    raise IntegrityError(
                        f"component {comp.path!r} references unknown {vid!r}"
                    )
    by_name = {rel.name: rel for rel in corpus.releases}
    for rec in corpus.vulnerabilities:
        for rel_name, path in rec.affected_paths:
            rel = by_name.get(rel_name)
            comp = rel.component(path) if rel is not None else None
            if comp is None:
                raise IntegrityError(
                    f"{rec.vuln_id} affects unknown component {rel_name}:{path}"
                )
            if comp.label is not Label.VULNERABLE:
                raise IntegrityError(
                    f"{rec.vuln_id} affects non-vulnerable component {rel_name}:{path}"
                )


def _parse_date(raw: object, line_no: int, what: str) -> datetime.date:
    if not isinstance(raw, str):
        raise ParseError(f"{what} must be a YYYY-MM-DD string", line_no)
    try:
        return datetime.date.fromisoformat(raw)
    except ValueError as exc:
        raise ParseError(f"bad {what} {raw!r}: {exc}", line_no) from None


def _require(record: dict, key: str, line_no: int) -> object:
    if key not in record:
        raise ParseError(f"record missing {key!r}", line_no)
    return record[key]


def load_corpus(path: str) -> Corpus:
    """Read and fully validate a JSONL corpus file."""
    header = None
    release_rows: list[tuple[str, datetime.date]] = []
    comp_rows: dict[str, list[ComponentRecord]] = {}
    vuln_rows: list[VulnerabilityRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc.msg}", line_no) from None
            if not isinstance(record, dict):
                raise ParseError("record is not an object", line_no)
            kind = _require(record, "kind", line_no)
            if kind == "header":
                if header is not None:
                    raise ParseError("duplicate header record", line_no)
                version = _require(record, "format_version", line_no)
                if version != FORMAT_VERSION:
                    raise VersionError(
                        f"unsupported corpus format_version {version!r}"
                    )
                header = record
            elif header is None:
                raise ParseError("first record must be the format header", line_no)
            elif kind == "release":
                name = _require(record, "name", line_no)
                date = _parse_date(_require(record, "date", line_no), line_no, "date")
                release_rows.append((str(name), date))
                comp_rows.setdefault(str(name), [])
            elif kind == "component":
                rel_name = str(_require(record, "release", line_no))
                label_raw = _require(record, "label", line_no)
                try:
                    label = Label(label_raw)
                except ValueError:
                    raise ParseError(f"unknown label {label_raw!r}", line_no) from None
                fixed = record.get("fixed_source")
                vuln_ids = record.get("vuln_ids", [])
                if not isinstance(vuln_ids, list):
                    raise ParseError("vuln_ids must be a list", line_no)
                comp = ComponentRecord(
                    path=str(_require(record, "path", line_no)),
                    source=str(_require(record, "source", line_no)),
                    label=label,
                    fixed_source=None if fixed is None else str(fixed),
                    vuln_ids=tuple(str(v) for v in vuln_ids),
                )
                if rel_name not in comp_rows:
                    raise IntegrityError(
                        f"component {comp.path!r} references unknown release {rel_name!r}"
                    )
                comp_rows[rel_name].append(comp)
            elif kind == "vuln":
                affected = _require(record, "affected", line_no)
                if not isinstance(affected, list):
                    raise ParseError("affected must be a list of [release, path]", line_no)
                pairs = []
                for item in affected:
                    if not isinstance(item, (list, tuple)) or len(item) != 2:
                        raise ParseError("affected entry must be [release, path]", line_no)
                    pairs.append((str(item[0]), str(item[1])))
                vuln_rows.append(
                    VulnerabilityRecord(
                        vuln_id=str(_require(record, "id", line_no)),
                        detection_date=_parse_date(
                            _require(record, "detected", line_no), line_no, "detected"
                        ),
                        affected_paths=tuple(pairs),
                    )
                )
            else:
                raise ParseError(f"unknown record kind {kind!r}", line_no)
    if header is None:
        raise ParseError("empty file: missing format header", 1)
    releases = tuple(
        Release(name=name, release_date=date, components=tuple(comp_rows[name]))
        for name, date in release_rows
    )
    corpus = Corpus(
        project_name=str(header.get("project", "unnamed")),
        releases=releases,
        vulnerabilities=tuple(vuln_rows),
    )
    validate_corpus(corpus)
    return corpus


def corpus_to_jsonl(corpus: Corpus) -> str:
    rows: list[dict] = [
        {
            "kind": "header",
            "format_version": FORMAT_VERSION,
            "project": corpus.project_name,
        }
    ]
    for rel in corpus.releases:
        rows.append(
            {"kind": "release", "name": rel.name, "date": rel.release_date.isoformat()}
        )
        for comp in rel.components:
            rows.append(
                {
                    "kind": "component",
                    "release": rel.name,
                    "path": comp.path,
                    "label": comp.label.value,
                    "source": comp.source,
                    "fixed_source": comp.fixed_source,
                    "vuln_ids": list(comp.vuln_ids),
                }
            )
    for rec in corpus.vulnerabilities:
        rows.append(
            {
                "kind": "vuln",
                "id": rec.vuln_id,
                "detected": rec.detection_date.isoformat(),
                "affected": [list(p) for p in rec.affected_paths],
            }
        )
    return "".join(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n" for row in rows)


def save_corpus(corpus: Corpus, path: str) -> None:
    validate_corpus(corpus)
    atomic_write_text(path, corpus_to_jsonl(corpus))


def _check_release_index(corpus: Corpus, release_index: int) -> None:
    # the last release has no following release to test against
    if not 0 <= release_index < len(corpus.releases) - 1:
        raise ConfigError(
            f"release index {release_index} out of range: corpus has "
            f"{len(corpus.releases)} releases, so valid train indices are "
            f"0..{len(corpus.releases) - 2}"
        )


def _still_vulnerable_next(corpus: Corpus, release_index: int) -> set[str]:
    nxt = corpus.releases[release_index + 1]
    return {c.path for c in nxt.components if c.label is Label.VULNERABLE}


def clean_training_set(
    corpus: Corpus, release_index: int, include_unfixed: bool = True
) -> TrainingMaterial:
    """All vulnerable components of the release, regardless of detection date.

    include_unfixed=False omits components that are still vulnerable at the
    same path in the next release (they reappear in the test ground truth);
    by default they train here and are tested there.
    """
    _check_release_index(corpus, release_index)
    release = corpus.releases[release_index]
    skip = set() if include_unfixed else _still_vulnerable_next(corpus, release_index)
    fix_pairs = []
    non_vulnerable = []
    for comp in release.components:
        if comp.label is Label.VULNERABLE:
            if comp.path not in skip:
                fix_pairs.append(comp)
        else:
            non_vulnerable.append(comp)
    return TrainingMaterial(release.name, tuple(fix_pairs), tuple(non_vulnerable))


def realistic_training_set(
    corpus: Corpus, release_index: int, include_unfixed: bool = True
) -> TrainingMaterial:
    """Only vulnerabilities detected strictly before the next release date.

    A vulnerable component whose detections all come later (or that has no
    detection record at all) lands in the non_vulnerable bucket: that
    mislabeling is the noise the realistic setting models.
    """
    _check_release_index(corpus, release_index)
    release = corpus.releases[release_index]
    next_date = corpus.releases[release_index + 1].release_date
    skip = set() if include_unfixed else _still_vulnerable_next(corpus, release_index)
    fix_pairs = []
    treated_non_vulnerable = []
    for comp in release.components:
        if comp.label is Label.NON_VULNERABLE:
            treated_non_vulnerable.append(comp)
            continue
        if comp.path in skip:
            continue
        dates = []
        for vid in comp.vuln_ids:
            rec = corpus.vulnerability(vid)
            if rec is None:
                raise IntegrityError(
                    f"component {comp.path!r} references unknown {vid!r}"
                )
            dates.append(rec.detection_date)
        if dates and min(dates) < next_date:
            fix_pairs.append(comp)
        else:
            treated_non_vulnerable.append(comp)
    return TrainingMaterial(
        release.name, tuple(fix_pairs), tuple(treated_non_vulnerable)
    )
