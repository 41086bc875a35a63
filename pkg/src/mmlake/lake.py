"""Data lake: loaded sources, the discovery registry, and the manifest loader.

Manifest (JSON or YAML)::

    {"sources": [
        {"id": "teams", "modality": "table", "name": "Team", "path": "teams.csv"},
        {"id": "nba_graph", "modality": "graph", "nodes": "nodes.csv", "edges": "edges.csv"},
        {"id": "nba_docs", "modality": "text", "path": "docs.jsonl"}],
     "discovery": {"threshold": 0.05, "top_k": 3},
     "verifier": {"strategy": "rule"},
     "answerer_script": "answers.json"}

Paths are relative to the manifest file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import yaml

from .discovery import DiscoveryConfig, Registry
from .errors import ManifestError, UnknownTable
from .graph import PropertyGraph, load_graph
from .model import Modality
from .operators import OperatorRegistry, default_registry
from .relational import Table, read_csv_table
from .text import DOC_SCHEMA, ScriptedAnswerer, TextCorpus, load_corpus
from .verifier import VerifierConfig


@dataclass(frozen=True)
class SourceHandle:
    id: str
    modality: Modality
    name: str
    backend: Any


_EXPECTED_SUFFIX = {Modality.TABLE: (".csv",), Modality.TEXT: (".jsonl", ".ndjson")}


class DataLake:
    """A set of loaded sources plus the configuration used to query them."""

    def __init__(
        self,
        sources: Iterable[SourceHandle],
        *,
        answerer=None,
        discovery: DiscoveryConfig = DiscoveryConfig(),
        verifier: VerifierConfig = VerifierConfig(),
        operators: Optional[OperatorRegistry] = None,
    ):
        self.sources: Dict[str, SourceHandle] = {}
        for s in sources:
            if s.id in self.sources:
                raise ManifestError(f"duplicate source id {s.id!r}")
            self.sources[s.id] = s
        self.answerer = answerer
        self.discovery = discovery
        self.verifier = verifier
        self.operators = operators or default_registry()
        self.registry = Registry(self.sources.values())

    @classmethod
    def from_manifest(cls, path, **overrides) -> "DataLake":
        return load_manifest(path, **overrides)

    def handle(self, source_id: str) -> SourceHandle:
        try:
            return self.sources[source_id]
        except KeyError:
            raise UnknownTable(f"unknown source {source_id!r}") from None

    def backend(self, source_id: str):
        return self.handle(source_id).backend

    def modality(self, source_id: str) -> Modality:
        return self.handle(source_id).modality

    def scan_schema(self, source_id: str, label: Optional[str] = None) -> Tuple[str, ...]:
        backend = self.backend(source_id)
        if isinstance(backend, Table):
            return backend.schema
        if isinstance(backend, PropertyGraph):
            return backend.node_schema(label)
        return DOC_SCHEMA

    def cardinality(self, source_id: str) -> int:
        return len(self.backend(source_id))

    def graphs(self) -> List[PropertyGraph]:
        return [s.backend for s in self.sources.values() if isinstance(s.backend, PropertyGraph)]

    def reset_counters(self) -> None:
        for g in self.graphs():
            g.reset_counter()

    def visited(self) -> int:
        return sum(g.visited for g in self.graphs())


def _read_manifest(path) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    try:
        if str(path).endswith(".json"):
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ManifestError(f"manifest {path} is not valid JSON/YAML: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("sources"), list):
        raise ManifestError("manifest needs a 'sources' list")
    return data


def _config(cls, raw: Optional[Mapping[str, Any]], what: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ManifestError(f"'{what}' must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ManifestError(f"unknown {what} settings {sorted(extra)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad {what} settings: {exc}") from None


def _path(base: str, entry: Mapping[str, Any], key: str, sid: str) -> str:
    paths = entry.get("paths") if isinstance(entry.get("paths"), dict) else {}
    rel = entry.get(key, paths.get(key))
    if not isinstance(rel, str) or not rel:
        raise ManifestError(f"source {sid!r} needs a '{key}' path")
    full = os.path.join(base, rel)
    if not os.path.isfile(full):
        raise ManifestError(f"source {sid!r}: {rel} does not exist")
    return full


def load_source(base: str, entry: Mapping[str, Any]) -> SourceHandle:
    if not isinstance(entry, dict):
        raise ManifestError("each source must be an object")
    sid = entry.get("id")
    if not isinstance(sid, str) or not sid:
        raise ManifestError("every source needs a non-empty 'id'")
    try:
        modality = Modality.parse(str(entry.get("modality")))
    except ValueError:
        raise ManifestError(f"source {sid!r}: unknown modality {entry.get('modality')!r}") from None
    name = str(entry.get("name") or sid)
    if modality == Modality.GRAPH:
        backend = load_graph(_path(base, entry, "nodes", sid), _path(base, entry, "edges", sid), sid)
    else:
        path = _path(base, entry, "path", sid)
        if not path.lower().endswith(_EXPECTED_SUFFIX[modality]):
            raise ManifestError(f"source {sid!r}: {modality} expects {'/'.join(_EXPECTED_SUFFIX[modality])}, got {path}")
        if modality == Modality.TABLE:
            backend = read_csv_table(path, name, sid)
        else:
            backend = load_corpus(path, sid)
    return SourceHandle(sid, modality, name, backend)


def load_manifest(path, *, discovery: Optional[DiscoveryConfig] = None, verifier: Optional[VerifierConfig] = None,
                  answerer=None, operators: Optional[OperatorRegistry] = None) -> DataLake:
    """Load every source named in a manifest. Raises ManifestError."""
    data = _read_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    handles = [load_source(base, e) for e in data["sources"]]
    if answerer is None and data.get("answerer_script"):
        script = os.path.join(base, data["answerer_script"])
        if not os.path.isfile(script):
            raise ManifestError(f"answerer script {data['answerer_script']} does not exist")
        answerer = ScriptedAnswerer.from_file(script)
    return DataLake(
        handles,
        answerer=answerer,
        discovery=discovery or _config(DiscoveryConfig, data.get("discovery"), "discovery"),
        verifier=verifier or _config(VerifierConfig, data.get("verifier"), "verifier"),
        operators=operators,
    )


def in_memory_lake(tables: Mapping[str, Table] = None, graphs: Mapping[str, PropertyGraph] = None,
                   corpora: Mapping[str, TextCorpus] = None, **kwargs) -> DataLake:
    """Build a lake from already-loaded backends (used by tests and generators)."""
    handles = []
    for sid, t in (tables or {}).items():
        handles.append(SourceHandle(sid, Modality.TABLE, t.name, t))
    for sid, g in (graphs or {}).items():
        handles.append(SourceHandle(sid, Modality.GRAPH, sid, g))
    for sid, c in (corpora or {}).items():
        handles.append(SourceHandle(sid, Modality.TEXT, sid, c))
    return DataLake(handles, **kwargs)
