"""Result documents, edge tables and heatmap figures."""
from __future__ import annotations

import io
import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from .graphcore import EdgeIndex, Subnetwork

SCHEMA = 1
HEATMAP_CLIP = 10.0


def _jsonable(obj):
    """Plain JSON types; non-finite floats become strings so output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def subnetwork_record(sub: Subnetwork, signs=None, significant=None) -> dict:
    """JSON view of a subnetwork, with counts of edge sign (case - control)."""
    rec = {"nodes": list(sub.nodes), "edges": list(sub.edges), "topology": sub.topology,
           "n_nodes": len(sub.nodes), "n_edges": len(sub.edges),
           "statistic": sub.statistic, "p_value": sub.p_value}
    if signs is not None:
        s = np.asarray(signs)[list(sub.edges)]
        rec["sign_counts"] = {"positive": int((s > 0).sum()), "negative": int((s < 0).sum()),
                              "zero": int((s == 0).sum())}
    if significant is not None:
        rec["significant"] = bool(significant)
    if sub.metrics:
        rec["metrics"] = sub.metrics
    return _jsonable(rec)


@dataclass
class ResultDocument:
    """Everything one command produced, as JSON-ready data.

    ``created`` is the only field allowed to differ between identical runs.
    """

    command: str
    config: dict
    seed: int | None
    version: str
    edge_tests: dict | None = None
    detection: dict | None = None
    inference: dict | None = None
    baselines: dict | None = None
    extra: dict | None = None
    node_order: list | None = None
    schema: int = SCHEMA
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self, include_timestamp: bool = True) -> dict:
        d = _jsonable(asdict(self))
        if not include_timestamp:
            d.pop("created")
        return d

    def to_json(self, include_timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(include_timestamp), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ResultDocument":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown result fields {sorted(unknown)}")
        if d.get("schema", SCHEMA) != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ResultDocument":
        return cls.from_dict(json.loads(text))


def node_order(n: int, subnetworks) -> list[int]:
    """Subnetwork nodes first (in subnetwork order), then the rest ascending."""
    seen, order = set(), []
    for s in subnetworks:
        for v in s.nodes:
            if v not in seen:
                seen.add(v)
                order.append(int(v))
    order.extend(v for v in range(1, n + 1) if v not in seen)
    return order


def edges_csv(p_values, signs, weights, subnetworks, n: int) -> str:
    """Edge table: i, j, p, sign, w and one 0/1 membership column per subnetwork."""
    r, c = EdgeIndex(n).pairs
    member = np.zeros((len(subnetworks), r.size), dtype=np.int8)
    for k, s in enumerate(subnetworks):
        member[k, list(s.edges)] = 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "p", "sign", "w"] + [f"in_subnetwork_{k + 1}" for k in range(len(subnetworks))])
    for e in range(r.size):
        w.writerow([int(r[e]) + 1, int(c[e]) + 1, repr(float(p_values[e])), int(signs[e]),
                    repr(float(weights[e]))] + member[:, e].tolist())
    return buf.getvalue()


def _ramp(v: float) -> str:
    """White to dark red over [0, 1]."""
    lo, hi = np.array([255, 255, 255]), np.array([103, 0, 13])
    rgb = np.rint(lo + (hi - lo) * min(max(v, 0.0), 1.0)).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(p_values, n: int, order, cell: int = 6, labels=None) -> str:
    """Heatmap of -log p (clipped at 10) with rows and columns in ``order``."""
    r, c = EdgeIndex(n).pairs
    mat = np.zeros((n, n))
    val = np.minimum(-np.log(np.maximum(np.asarray(p_values, float), 1e-300)), HEATMAP_CLIP)
    mat[r, c] = val
    mat[c, r] = val
    pos = np.asarray(order, dtype=np.int64) - 1
    mat = mat[np.ix_(pos, pos)]
    margin = 40
    size = n * cell + margin
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'data-node-order="{",".join(str(v) for v in order)}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>']
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            out.append(f'<rect x="{margin + b * cell}" y="{margin + a * cell}" width="{cell}" '
                       f'height="{cell}" fill="{_ramp(mat[a, b] / HEATMAP_CLIP)}"/>')
    if labels is not None:
        for a, v in enumerate(order):
            out.append(f'<text x="{margin - 2}" y="{margin + (a + 1) * cell - 1}" '
                       f'font-size="{cell}" text-anchor="end">{labels[v - 1]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
