"""
Data ingestion, PCA, and the JSON / CSV / DOT artifacts.

``tree.json`` layout (schema 1.x)::

    {"schema_version": "1.0", "levels": L, "loglik": float or null,
     "hyperparams": {...},
     "nodes": [{"id", "parent", "depth", "n_thru",
                "top_components": [[k, weight], ...], "remainder"}, ...],
     "paths": [[root_id, ..., leaf_id], ...],
     "assignments": [k, ...],            # 1-based component labels
     "component_means": [[...], ...]}

Component labels in every exported file are 1-based.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import InputError
from .hierarchy import topdown_order

SCHEMA_VERSION = "1.0"
SUPPORTED_MAJOR = 1


def load_csv(path, has_header: bool = False) -> np.ndarray:
    """Read a rectangular numeric CSV into an N x D float matrix."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, raw in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not raw or all(not c.strip() for c in raw):
                continue
            if width is None:
                width = len(raw)
            elif len(raw) != width:
                raise InputError(f"{path}: row {line_no} has {len(raw)} columns, expected {width}")
            values = []
            for col, cell in enumerate(raw, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}: row {line_no}, column {col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}: row {line_no}, column {col}: non-finite value {cell!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def standardize(X: np.ndarray) -> np.ndarray:
    """Per-column z-scores; constant columns are only centred."""
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def pca_reduce(X: np.ndarray, target_dim: int) -> np.ndarray:
    """Project centred data onto the top ``target_dim`` covariance eigenvectors.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    D = X.shape[1]
    if not 1 <= target_dim <= D:
        raise InputError(f"pca_dim must lie in 1..{D}, got {target_dim}")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(len(X) - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:target_dim]
    vecs = vecs[:, order]
    pivot = np.abs(vecs).argmax(axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(target_dim)])
    return Xc @ vecs


@dataclass
class TreeExport:
    levels: int
    nodes: List[Dict[str, Any]]
    paths: List[List[int]]
    assignments: List[int] = field(default_factory=list)
    component_means: List[List[float]] = field(default_factory=list)
    hyperparams: Dict[str, Any] = field(default_factory=dict)
    loglik: Optional[float] = None
    schema_version: str = SCHEMA_VERSION

    def to_json(self) -> str:
        doc = dict(schema_version=self.schema_version, levels=self.levels, loglik=self.loglik,
                   hyperparams=self.hyperparams, nodes=self.nodes, paths=self.paths,
                   assignments=self.assignments, component_means=self.component_means)
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TreeExport":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"tree export is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or "schema_version" not in doc:
            raise InputError("tree export has no schema_version")
        major = str(doc["schema_version"]).split(".")[0]
        if major != str(SUPPORTED_MAJOR):
            raise InputError(f"unsupported tree export schema version {doc['schema_version']}")
        for key in ("levels", "nodes", "paths"):
            if key not in doc:
                raise InputError(f"tree export is missing '{key}'")
        return cls(levels=doc["levels"], nodes=doc["nodes"], paths=doc["paths"],
                   assignments=doc.get("assignments", []),
                   component_means=doc.get("component_means", []),
                   hyperparams=doc.get("hyperparams", {}), loglik=doc.get("loglik"),
                   schema_version=doc["schema_version"])

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TreeExport":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"tree export not found: {path}")
        return cls.from_json(path.read_text(encoding="utf-8"))


def export_state(state, loglik: Optional[float] = None, top_m: int = 5) -> TreeExport:
    """Snapshot a sampler state (or generated data state) as a :class:`TreeExport`."""
    h = state.tree
    nodes = []
    for z in topdown_order(h):
        nd = h.nodes[z]
        w = nd.mixing.weights
        top = sorted(range(len(w)), key=lambda k: (-w[k], k))[:top_m]
        nodes.append(dict(id=z, parent=nd.parent, depth=nd.depth, n_thru=int(nd.n_thru),
                          top_components=[[k + 1, float(w[k])] for k in top],
                          remainder=float(nd.mixing.remainder)))
    hp = state.hp.to_dict()
    return TreeExport(levels=h.levels, nodes=nodes,
                      paths=[[int(z) for z in p] for p in state.paths],
                      assignments=[int(k) + 1 for k in state.assignments],
                      component_means=[[float(v) for v in m] for m in state.means],
                      hyperparams=hp,
                      loglik=None if loglik is None or not math.isfinite(loglik) else float(loglik))


def write_trace_csv(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "loglik", "K", "nodes", "path_accepts", "hyper_accept"])
        for row in zip(trace.iteration, trace.loglik, trace.n_components, trace.n_nodes,
                       trace.path_accepts, trace.hyper_accept):
            w.writerow([row[0], repr(float(row[1])), *row[2:]])


def write_data_csv(X: np.ndarray, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def report_to_json(report) -> str:
    return json.dumps({"levels": report.rows()}, indent=1, sort_keys=True) + "\n"


def write_report_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "purity", "nmi", "ari", "f_measure"])
        for r in report.rows():
            w.writerow([r["level"], repr(r["purity"]), repr(r["nmi"]), repr(r["ari"]), repr(r["f_measure"])])


def to_dot(tree: TreeExport, top: int = 3) -> str:
    """Graphviz DOT text; node labels carry id, n_thru and the top components."""
    ids = {nd["id"] for nd in tree.nodes}
    lines = ["digraph bhmc {", "  node [shape=box];"]
    for nd in tree.nodes:
        try:
            z, parent, n_thru = nd["id"], nd["parent"], nd["n_thru"]
            comps = nd.get("top_components", [])[:top]
        except (KeyError, TypeError):
            raise InputError(f"malformed node entry: {nd!r}") from None
        if parent is not None and parent not in ids:
            raise InputError(f"node {z} references missing parent {parent}")
        comp_txt = ", ".join(f"k{k}:{w:.3f}" for k, w in comps)
        lines.append(f'  n{z} [label="z{z}\\nN={n_thru}\\n{comp_txt}"];')
    for nd in tree.nodes:
        if nd["parent"] is not None:
            lines.append(f'  n{nd["parent"]} -> n{nd["id"]} [label="{nd["n_thru"]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

