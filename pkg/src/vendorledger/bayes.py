"""Discrete Bayesian networks for zero-day attack-path analysis.

Networks are immutable once built. Posterior queries run exact variable
elimination (min-degree ordering) over the ancestors of the query and
evidence; attack paths are the maximal directed paths through nodes whose
posterior compromise probability clears a threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    IncompleteAssignment,
    InvalidEvidence,
    InvalidNetwork,
    MalformedCPT,
    MissingCompromisedState,
    PreconditionViolation,
    QueryIsEvidence,
    UnknownNode,
    UnknownParent,
    ZeroProbabilityEvidence,
)

ROW_TOLERANCE = 1e-9
DEFAULT_STATES = ("true", "false")
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class BayesNode:
    name: str
    states: tuple[str, ...]
    parents: tuple[str, ...]
    cpt: Mapping[tuple[str, ...], tuple[float, ...]]

    def distribution(self, parent_states: Sequence[str]) -> dict[str, float]:
        return dict(zip(self.states, self.cpt[tuple(parent_states)]))


class BayesNetwork:
    """Validated DAG of discrete nodes.

    Parameters
    ----------
    nodes : iterable of BayesNode
        Any order; parents are resolved by name.
    """

    def __init__(self, nodes: Iterable[BayesNode]):
        nodes = tuple(nodes)
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise InvalidNetwork("node names must be unique")
        self._nodes = {n.name: n for n in nodes}
        self.order = tuple(names)
        for node in nodes:
            for parent in node.parents:
                if parent not in self._nodes:
                    raise UnknownParent(f"{node.name!r} names unknown parent {parent!r}")
            _validate_cpt(node, [self._nodes[p] for p in node.parents])
        self.topological_order = _toposort(self._nodes)
        self._children = {n: [] for n in names}
        for node in nodes:
            for parent in node.parents:
                self._children[parent].append(node.name)
        self._tables = {n.name: self._table(n) for n in nodes}

    def __contains__(self, name: object) -> bool:
        return name in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self):
        return (self._nodes[n] for n in self.order)

    def node(self, name: str) -> BayesNode:
        try:
            return self._nodes[name]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(sorted(self._children[self.node(name).name]))

    def edges(self) -> list[tuple[str, str]]:
        return [(p, n.name) for n in self for p in n.parents]

    def ancestors(self, names: Iterable[str]) -> set[str]:
        seen: set[str] = set()
        stack = list(names)
        while stack:
            name = stack.pop()
            if name in seen:
                continue
            seen.add(name)
            stack.extend(self._nodes[name].parents)
        return seen

    def _table(self, node: BayesNode) -> np.ndarray:
        """CPT as an array indexed (parent_0, ..., parent_k, own state)."""
        shape = tuple(len(self._nodes[p].states) for p in node.parents) + (len(node.states),)
        table = np.empty(shape)
        parent_states = [self._nodes[p].states for p in node.parents]
        for idx in product(*(range(len(s)) for s in parent_states)):
            key = tuple(parent_states[i][j] for i, j in enumerate(idx))
            table[idx] = node.cpt[key]
        return table

    def to_spec(self) -> dict:
        return {"nodes": [
            {
                "name": n.name,
                "states": list(n.states),
                "parents": list(n.parents),
                "cpt": {",".join(k): list(v) for k, v in n.cpt.items()},
            }
            for n in self
        ]}


def _validate_cpt(node: BayesNode, parents: list[BayesNode]) -> None:
    if len(node.states) < 2 or len(set(node.states)) != len(node.states):
        raise MalformedCPT(f"{node.name!r} needs at least two distinct states")
    expected = set(product(*(p.states for p in parents)))
    keys = set(node.cpt)
    if keys != expected:
        raise MalformedCPT(
            f"{node.name!r} CPT has {len(keys)} rows, expected {len(expected)} "
            f"(one per parent-state combination)"
        )
    for key, row in node.cpt.items():
        if len(row) != len(node.states):
            raise MalformedCPT(f"{node.name!r} row {key} has arity {len(row)}")
        if any(not (0.0 <= p <= 1.0) for p in row):
            raise MalformedCPT(f"{node.name!r} row {key} has entries outside [0, 1]")
        if abs(math.fsum(row) - 1.0) > ROW_TOLERANCE:
            raise MalformedCPT(f"{node.name!r} row {key} sums to {math.fsum(row)!r}")


def _toposort(nodes: Mapping[str, BayesNode]) -> tuple[str, ...]:
    indegree = {name: len(n.parents) for name, n in nodes.items()}
    children: dict[str, list[str]] = {name: [] for name in nodes}
    for name, n in nodes.items():
        for p in n.parents:
            children[p].append(name)
    ready = sorted(name for name, d in indegree.items() if d == 0)
    out = []
    while ready:
        name = ready.pop(0)
        out.append(name)
        for child in children[name]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
        ready.sort()
    if len(out) != len(nodes):
        stuck = sorted(set(nodes) - set(out))
        raise CycleDetected(f"cycle among nodes {stuck}")
    return tuple(out)


# -- construction -------------------------------------------------------------

def _probability(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedCPT(f"probability must be a number, got {value!r}")
    return float(value)


def _row(value, states: tuple[str, ...], where: str) -> tuple[float, ...]:
    if isinstance(value, Mapping):
        if set(value) != set(states):
            raise MalformedCPT(f"{where}: row keys {sorted(value)} do not match states")
        return tuple(_probability(value[s]) for s in states)
    if isinstance(value, (list, tuple)):
        return tuple(_probability(v) for v in value)
    raise MalformedCPT(f"{where}: row must be a list or an object")


def _parse_cpt(raw, name: str, states: tuple[str, ...], parents: tuple[str, ...]):
    if raw is None:
        raise MalformedCPT(f"{name!r} has no cpt")
    if not parents and isinstance(raw, (list, tuple)) and not any(isinstance(r, Mapping) for r in raw):
        return {(): _row(raw, states, name)}
    cpt: dict[tuple[str, ...], tuple[float, ...]] = {}
    if isinstance(raw, Mapping):
        items = []
        for key, value in raw.items():
            if isinstance(key, tuple):
                items.append((key, value))
            else:
                items.append((tuple(key.split(",")) if key else (), value))
    elif isinstance(raw, (list, tuple)):
        items = []
        for row in raw:
            given = row.get("given", [])
            if isinstance(given, Mapping):
                given = [given.get(p) for p in parents]
            items.append((tuple(given), row["p"]))
    else:
        raise MalformedCPT(f"{name!r} cpt must be an object or a list of rows")
    for key, value in items:
        if key in cpt:
            raise MalformedCPT(f"{name!r} repeats row {key}")
        cpt[key] = _row(value, states, f"{name!r} row {key}")
    return cpt


def build_network(spec: Mapping) -> BayesNetwork:
    """Build and validate a network from its JSON-shaped description.

    Each node is ``{name, states?, parents?, cpt}``. ``cpt`` maps the
    comma-joined parent states (``""`` for a root) to a probability row in
    state order, or to a ``{state: p}`` object. A root may give the row
    directly as a list.
    """
    nodes = []
    for raw in spec.get("nodes", ()):
        name = raw["name"]
        states = tuple(raw.get("states", DEFAULT_STATES))
        parents = tuple(raw.get("parents", ()))
        cpt = _parse_cpt(raw.get("cpt"), name, states, parents)
        nodes.append(BayesNode(name, states, parents, cpt))
    return BayesNetwork(nodes)


def load_network(path: str | Path) -> BayesNetwork:
    """Load a network file, falling back to the packaged example of that name."""
    path = Path(path)
    if path.exists():
        text = path.read_text()
    else:
        text = resources.files("vendorledger.data").joinpath(path.name).read_text()
    return build_network(json.loads(text))


# -- inference ----------------------------------------------------------------

@dataclass(frozen=True)
class _Factor:
    scope: tuple[str, ...]
    table: np.ndarray


def _multiply(a: _Factor, b: _Factor) -> _Factor:
    scope = a.scope + tuple(v for v in b.scope if v not in a.scope)
    ids = {v: i for i, v in enumerate(scope)}
    table = np.einsum(
        a.table, [ids[v] for v in a.scope],
        b.table, [ids[v] for v in b.scope],
        [ids[v] for v in scope],
    )
    return _Factor(scope, table)


def _sum_out(f: _Factor, var: str) -> _Factor:
    axis = f.scope.index(var)
    return _Factor(f.scope[:axis] + f.scope[axis + 1:], f.table.sum(axis=axis))


def _reduce(f: _Factor, var: str, index: int) -> _Factor:
    axis = f.scope.index(var)
    return _Factor(f.scope[:axis] + f.scope[axis + 1:], np.take(f.table, index, axis=axis))


def _check_evidence(network: BayesNetwork, evidence: Mapping[str, str]) -> dict[str, int]:
    indices = {}
    for name, state in evidence.items():
        node = network.node(name)
        if state not in node.states:
            raise InvalidEvidence(f"{state!r} is not a state of {name!r}")
        indices[name] = node.states.index(state)
    return indices


def elimination_order(factors: Sequence[_Factor], hidden: Iterable[str]) -> list[str]:
    """Greedy min-degree order over the factors' interaction graph; ties by name."""
    graph: dict[str, set[str]] = {}
    for f in factors:
        for v in f.scope:
            graph.setdefault(v, set()).update(u for u in f.scope if u != v)
    remaining = set(hidden)
    order = []
    while remaining:
        var = min(remaining, key=lambda v: (len(graph.get(v, ())), v))
        neighbours = graph.pop(var, set())
        for u in neighbours:
            graph[u].discard(var)
            graph[u].update(neighbours - {u})
        remaining.discard(var)
        order.append(var)
    return order


def posterior(
    network: BayesNetwork, query: str, evidence: Mapping[str, str] | None = None
) -> dict[str, float]:
    """Exact ``P(query | evidence)`` as ``{state: probability}``."""
    evidence = dict(evidence or {})
    qnode = network.node(query)
    if query in evidence:
        raise QueryIsEvidence(f"{query!r} is observed; query a different node")
    observed = _check_evidence(network, evidence)

    relevant = network.ancestors([query, *evidence])
    factors = []
    for name in network.topological_order:
        if name not in relevant:
            continue
        node = network.node(name)
        f = _Factor(node.parents + (name,), network._tables[name])
        for var, idx in observed.items():
            if var in f.scope:
                f = _reduce(f, var, idx)
        factors.append(f)

    hidden = relevant - {query} - set(evidence)
    for var in elimination_order(factors, hidden):
        touching = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        merged = touching[0]
        for f in touching[1:]:
            merged = _multiply(merged, f)
        factors.append(_sum_out(merged, var))

    result = factors[0]
    for f in factors[1:]:
        result = _multiply(result, f)
    values = result.table.reshape(-1)
    total = float(values.sum())
    if total <= 0.0:
        raise ZeroProbabilityEvidence("the evidence has probability zero")
    return {s: float(v) / total for s, v in zip(qnode.states, values)}


def joint_probability(network: BayesNetwork, assignment: Mapping[str, str]) -> float:
    """Chain-rule product of each node's CPT entry under a full assignment."""
    missing = [n for n in network.order if n not in assignment]
    if missing:
        raise IncompleteAssignment(f"assignment lacks {missing}")
    _check_evidence(network, {k: v for k, v in assignment.items() if k in network})
    extra = [k for k in assignment if k not in network]
    if extra:
        raise UnknownNode(f"unknown node {extra[0]!r}")
    p = 1.0
    for node in network:
        row = node.cpt[tuple(assignment[q] for q in node.parents)]
        p *= row[node.states.index(assignment[node.name])]
    return p


def posterior_compromise_map(
    network: BayesNetwork,
    evidence: Mapping[str, str] | None = None,
    compromised_state: str = "true",
) -> dict[str, float]:
    evidence = dict(evidence or {})
    _check_evidence(network, evidence)
    targets = [n for n in network.order if n not in evidence]
    lacking = [n for n in targets if compromised_state not in network.node(n).states]
    if lacking:
        raise MissingCompromisedState(f"nodes {lacking} have no state {compromised_state!r}")
    return {n: posterior(network, n, evidence)[compromised_state] for n in targets}


@dataclass(frozen=True)
class AttackPath:
    nodes: tuple[str, ...]
    score: float

    def to_record(self) -> dict:
        """Ledger-safe form: the score as a 12-digit decimal string."""
        return {"nodes": list(self.nodes), "score": f"{self.score:.12f}"}


def compromise_probabilities(
    network: BayesNetwork,
    evidence: Mapping[str, str] | None = None,
    compromised_state: str = "true",
) -> dict[str, float]:
    """Posterior compromise per node; observed nodes count as 1 or 0."""
    evidence = dict(evidence or {})
    probs = posterior_compromise_map(network, evidence, compromised_state)
    for name, state in evidence.items():
        probs[name] = 1.0 if state == compromised_state else 0.0
    return {n: probs[n] for n in network.order}


def extract_attack_paths(
    network: BayesNetwork,
    evidence: Mapping[str, str] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    compromised_state: str = "true",
) -> list[AttackPath]:
    """Maximal directed paths through nodes with compromise probability >= threshold.

    Scores multiply the members' probabilities. Results are sorted by score,
    highest first, then by node-name sequence.
    """
    if not 0.0 <= threshold <= 1.0:
        raise PreconditionViolation(f"threshold must lie in [0, 1], got {threshold}")
    probs = compromise_probabilities(network, evidence, compromised_state)
    candidates = {n for n, p in probs.items() if p >= threshold}
    kids = {n: [c for c in network.children(n) if c in candidates] for n in candidates}
    has_parent = {c for n in candidates for c in kids[n]}

    paths: list[tuple[str, ...]] = []

    def walk(path: tuple[str, ...]) -> None:
        nxt = kids[path[-1]]
        if not nxt:
            paths.append(path)
        for child in nxt:
            walk(path + (child,))

    for source in sorted(candidates - has_parent):
        walk((source,))

    scored = [AttackPath(p, math.prod(probs[n] for n in p)) for p in paths]
    scored.sort(key=lambda ap: (-ap.score, ap.nodes))
    return scored


def candidate_nodes(
    network: BayesNetwork,
    evidence: Mapping[str, str] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    compromised_state: str = "true",
) -> set[str]:
    probs = compromise_probabilities(network, evidence, compromised_state)
    return {n for n, p in probs.items() if p >= threshold}


def parse_evidence(pairs: Iterable[str]) -> dict[str, str]:
    """``["A=true", "B=false"]`` -> ``{"A": "true", "B": "false"}``."""
    out = {}
    for pair in pairs:
        name, sep, state = pair.partition("=")
        if not sep or not name or not state:
            raise InvalidEvidence(f"evidence must look like name=state, got {pair!r}")
        out[name.strip()] = state.strip()
    return out
