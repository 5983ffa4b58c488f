"""Reasoning traces as validated, immutable values.

A trace is an ordered list of textual steps plus the structure the
reasoning paradigm implies: a path (``chain``), a rooted tree given by
per-step depth/branch indices (``tree``), or an explicit undirected edge
list (``graph``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ChainFormatError, ChainValidationError, StructureError


class Paradigm(str, Enum):
    CHAIN = "chain"
    TREE = "tree"
    GRAPH = "graph"


class View(str, Enum):
    FULL_GRAPH = "full_graph"
    FINAL_PATH = "final_path"


@dataclass(frozen=True)
class ReasoningStep:
    id: int
    text: str
    depth: int | None = None
    branch: int | None = None


@dataclass(frozen=True)
class ReasoningChain:
    paradigm: Paradigm
    steps: tuple[ReasoningStep, ...]
    edges: tuple[tuple[int, int], ...] = ()
    label: str | None = None
    final_path: tuple[int, ...] | None = None
    view: View = View.FULL_GRAPH
    # Tree edges were supplied explicitly rather than reconstructed.
    explicit_edges: bool = False
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __len__(self):
        return len(self.steps)

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.steps]

    @property
    def depths(self) -> list[int | None]:
        return [s.depth for s in self.steps]

    @property
    def branches(self) -> list[int | None]:
        return [s.branch for s in self.steps]

    @property
    def outcome(self) -> int | None:
        return outcome_value(self.label)


def outcome_value(label):
    """Map an outcome tag to 1/0; any other tag has no numeric outcome."""
    if label is None:
        return None
    tag = str(label).strip().lower()
    if tag == "correct":
        return 1
    if tag == "incorrect":
        return 0
    return None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _as_int(value, what, step_id=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ChainValidationError(f"{what} must be an integer, got {value!r}",
                                   rule="integer", step_id=step_id)
    return int(value)


def _normalize_edges(raw_edges, n) -> tuple[tuple[int, int], ...]:
    seen = set()
    out = []
    for pair in raw_edges:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ChainValidationError(f"edge {pair!r} is not an [i, j] pair", rule="edge-shape")
        i = _as_int(pair[0], "edge endpoint")
        j = _as_int(pair[1], "edge endpoint")
        for v in (i, j):
            if not 0 <= v < n:
                raise ChainValidationError(
                    f"edge ({i}, {j}) references step id {v}, but only ids 0..{n - 1} exist",
                    rule="edge-range", step_id=v)
        if i == j:
            raise ChainValidationError(f"self-loop on step id {i}", rule="self-loop", step_id=i)
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return tuple(sorted(out))


def _validate_tree_levels(steps: Sequence[ReasoningStep]):
    roots = [s.id for s in steps if s.depth == 0]
    if len(roots) != 1:
        raise ChainValidationError(
            f"tree must have exactly one step at depth 0, found {len(roots)}",
            rule="single-root", step_id=roots[1] if len(roots) > 1 else None)
    present = {s.depth for s in steps}
    for s in steps:
        if s.depth > 0 and (s.depth - 1) not in present:
            raise ChainValidationError(
                f"step {s.id} has depth {s.depth} but no step has depth {s.depth - 1}",
                rule="depth-gap", step_id=s.id)


def validate_chain(chain: ReasoningChain) -> ReasoningChain:
    """Check every structural invariant; return the chain unchanged."""
    n = chain.n
    for pos, step in enumerate(chain.steps):
        if step.id != pos:
            raise ChainValidationError(f"step ids must be 0..n-1 in order; position {pos} has id {step.id}",
                                       rule="ids", step_id=step.id)
        if not isinstance(step.text, str):
            raise ChainValidationError(f"step {step.id} text is not a string", rule="text", step_id=step.id)
        has_db = (step.depth is not None, step.branch is not None)
        if chain.paradigm is Paradigm.TREE:
            if not all(has_db):
                raise ChainValidationError(f"tree step {step.id} needs both depth and branch",
                                           rule="tree-annotations", step_id=step.id)
            if step.depth < 0 or step.branch < 0:
                raise ChainValidationError(f"step {step.id} has a negative depth/branch",
                                           rule="non-negative", step_id=step.id)
        elif any(has_db):
            raise ChainValidationError(
                f"step {step.id} carries depth/branch but paradigm is {chain.paradigm.value}",
                rule="tree-annotations", step_id=step.id)

    if chain.paradigm is Paradigm.CHAIN and chain.edges:
        raise ChainValidationError("chain paradigm takes no explicit edges", rule="chain-edges")
    if chain.paradigm is Paradigm.TREE and n:
        _validate_tree_levels(chain.steps)
    if chain.paradigm is not Paradigm.GRAPH and chain.edges and not chain.explicit_edges:
        raise ChainValidationError("edges are only accepted for graph chains or explicit tree edges",
                                   rule="edges")
    _normalize_edges(chain.edges, n)

    if chain.final_path is not None:
        for sid in chain.final_path:
            if not 0 <= sid < n:
                raise ChainValidationError(f"final_path references unknown step id {sid}",
                                           rule="final-path", step_id=sid)
        if len(set(chain.final_path)) != len(chain.final_path):
            raise ChainValidationError("final_path lists a step twice", rule="final-path")
    return chain


# ---------------------------------------------------------------------------
# construction / parsing
# ---------------------------------------------------------------------------

def make_chain(paradigm, steps, edges=None, label=None, final_path=None,
               view=View.FULL_GRAPH) -> ReasoningChain:
    """Build a validated chain from loosely-typed pieces.

    ``steps`` is a list of strings, or of dicts with ``text`` and optional
    ``depth``/``branch``. Explicit edges on a tree override reconstruction.
    """
    try:
        paradigm = Paradigm(paradigm)
    except ValueError:
        raise ChainFormatError(f"unknown paradigm {paradigm!r}; expected chain, tree or graph") from None
    if not isinstance(steps, (list, tuple)):
        raise ChainFormatError("`steps` must be an array")

    parsed = []
    for i, raw in enumerate(steps):
        if isinstance(raw, ReasoningStep):
            parsed.append(replace(raw, id=i))
            continue
        if isinstance(raw, str):
            parsed.append(ReasoningStep(i, raw))
            continue
        if not isinstance(raw, dict) or "text" not in raw:
            raise ChainFormatError(f"step {i} must be a string or an object with `text`")
        unknown = set(raw) - {"text", "depth", "branch", "id"}
        if unknown:
            raise ChainFormatError(f"step {i} has unknown keys {sorted(unknown)}")
        if "id" in raw and raw["id"] != i:
            raise ChainValidationError(f"step at position {i} declares id {raw['id']}", rule="ids",
                                       step_id=raw["id"])
        depth = raw.get("depth")
        branch = raw.get("branch")
        parsed.append(ReasoningStep(
            i, raw["text"],
            None if depth is None else _as_int(depth, "depth", i),
            None if branch is None else _as_int(branch, "branch", i),
        ))

    n = len(parsed)
    explicit = False
    norm_edges: tuple = ()
    if edges:
        norm_edges = _normalize_edges(edges, n)
        explicit = paradigm is Paradigm.TREE
    if final_path is not None:
        final_path = tuple(_as_int(v, "final_path entry") for v in final_path)
    chain = ReasoningChain(paradigm=paradigm, steps=tuple(parsed), edges=norm_edges, label=label,
                           final_path=final_path, view=View(view), explicit_edges=explicit)
    return validate_chain(chain)


_TOP_KEYS = {"paradigm", "steps", "edges", "label", "final_path", "view", "id", "dataset", "method"}


def chain_from_dict(obj: dict) -> ReasoningChain:
    if not isinstance(obj, dict):
        raise ChainFormatError("chain document must be a JSON object")
    for key in ("paradigm", "steps"):
        if key not in obj:
            raise ChainFormatError(f"missing required key `{key}`")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise ChainFormatError(f"unknown top-level keys {sorted(unknown)}")
    chain = make_chain(obj["paradigm"], obj["steps"], obj.get("edges"), obj.get("label"),
                       obj.get("final_path"), obj.get("view", View.FULL_GRAPH.value))
    meta = {k: obj[k] for k in ("id", "dataset", "method") if k in obj}
    if meta:
        chain.meta.update(meta)
    return chain


def _loads(document: str | bytes):
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ChainFormatError(f"document is not valid UTF-8 at byte {exc.start}") from None
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        raise ChainFormatError(f"invalid JSON: {exc.msg}", position=(exc.lineno, exc.colno)) from None


def parse_chain(document: str | bytes) -> ReasoningChain:
    """Parse one chain document (JSON text) into a validated chain."""
    return chain_from_dict(_loads(document))


def parse_batch(document: str | bytes) -> list:
    """Parse a batch document: a JSON array of chain objects.

    Returns a list where each entry is either a chain or the exception raised
    for that entry, so callers can report partial failures.
    """
    data = _loads(document)
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise ChainFormatError("batch document must be a JSON array of chain objects")
    out = []
    for obj in data:
        try:
            out.append(chain_from_dict(obj))
        except (ChainFormatError, ChainValidationError) as exc:
            out.append(exc)
    return out


def chain_to_dict(chain: ReasoningChain) -> dict[str, Any]:
    if chain.paradigm is Paradigm.TREE:
        steps = [{"text": s.text, "depth": s.depth, "branch": s.branch} for s in chain.steps]
    else:
        steps = [s.text for s in chain.steps]
    out: dict[str, Any] = {"paradigm": chain.paradigm.value, "steps": steps}
    if chain.edges:
        out["edges"] = [list(e) for e in chain.edges]
    if chain.label is not None:
        out["label"] = chain.label
    if chain.final_path is not None:
        out["final_path"] = list(chain.final_path)
    if chain.view is not View.FULL_GRAPH:
        out["view"] = chain.view.value
    for k, v in chain.meta.items():
        out[k] = v
    return out


def serialize_chain(chain: ReasoningChain) -> str:
    return json.dumps(chain_to_dict(chain), ensure_ascii=False, sort_keys=True)


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------

def tree_parents(chain: ReasoningChain) -> list[int | None]:
    """Parent of each tree step: the nearest earlier step one level up."""
    parents: list[int | None] = []
    last_at_depth: dict[int, int] = {}
    for s in chain.steps:
        if s.depth == 0:
            parents.append(None)
        else:
            p = last_at_depth.get(s.depth - 1)
            if p is None:
                raise StructureError(
                    f"cannot place tree step {s.id}: no earlier step at depth {s.depth - 1}",
                    rule="parent-reconstruction", step_id=s.id)
            parents.append(p)
        last_at_depth[s.depth] = s.id
    return parents


def chain_edges(chain: ReasoningChain) -> tuple[tuple[int, int], ...]:
    """Undirected edge list implied by the chain's paradigm."""
    if chain.paradigm is Paradigm.CHAIN:
        return tuple((i, i + 1) for i in range(chain.n - 1))
    if chain.paradigm is Paradigm.GRAPH or chain.explicit_edges:
        return chain.edges
    return tuple(sorted((min(p, c), max(p, c))
                        for c, p in enumerate(tree_parents(chain)) if p is not None))


def adjacency_matrix(chain: ReasoningChain) -> np.ndarray:
    n = chain.n
    adj = np.zeros((n, n), dtype=np.int8)
    for i, j in chain_edges(chain):
        adj[i, j] = adj[j, i] = 1
    return adj


def select_view(chain: ReasoningChain, view: View | str) -> ReasoningChain:
    """Restrict a chain to the steps of the requested view.

    Surviving steps are renumbered in their original order and keep only
    the edges induced among them.
    """
    view = View(view)
    if view is View.FULL_GRAPH:
        return chain
    if chain.final_path is None:
        raise ChainValidationError("final_path view requested but the chain records no final path",
                                   rule="final-path")
    keep = sorted(chain.final_path)
    remap = {old: new for new, old in enumerate(keep)}
    steps = tuple(replace(chain.steps[old], id=new) for new, old in enumerate(keep))
    edges = ()
    explicit = False
    if chain.paradigm is not Paradigm.CHAIN:
        edges = tuple(sorted((remap[i], remap[j]) for i, j in chain_edges(chain)
                             if i in remap and j in remap))
        explicit = chain.paradigm is Paradigm.TREE
    restricted = ReasoningChain(paradigm=chain.paradigm, steps=steps, edges=edges, label=chain.label,
                                final_path=tuple(range(len(keep))), view=View.FINAL_PATH,
                                explicit_edges=explicit, meta=dict(chain.meta))
    return validate_chain(restricted)


def iter_components(adj: np.ndarray) -> Iterable[list[int]]:
    """Connected components of an adjacency matrix, smallest vertex first."""
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.flatnonzero(adj[v]):
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        yield sorted(comp)
