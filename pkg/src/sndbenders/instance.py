"""Problem data model and instance I/O.

Defines the network instance (nodes, modular-capacity edges, demands,
failure scenarios), a JSON-style native format reader/writer, a reader for
the NODES/LINKS/DEMANDS subset of the SNDlib native text format, N-1
scenario construction with connectivity filtering, a synthetic instance
generator that merges BFS subgraphs of source networks, and demand-pair
edge betweenness.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .errors import GenerationError, SchemaError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Module:
    """One installable capacity module type: `capacity` units at `cost`."""

    capacity: float
    cost: float


@dataclass(frozen=True)
class Edge:
    """Undirected edge with preinstalled capacity and installable modules.

    Each edge induces two directed arcs (u, v) and (v, u) in the flow LPs.
    """

    id: str
    u: str
    v: str
    preinstalled: float = 0.0
    modules: tuple[Module, ...] = ()


@dataclass(frozen=True)
class Demand:
    id: str
    source: str
    target: str
    value: float


@dataclass(frozen=True)
class Scenario:
    """Failure scenario: the set of edges that are simultaneously down.

    The base scenario (no failures) is implicit and never stored.
    """

    id: str
    failed_edges: frozenset[str]


@dataclass(frozen=True)
class NetworkInstance:
    name: str
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    demands: tuple[Demand, ...]
    scenarios: tuple[Scenario, ...]

    # derived lookups, built once in __post_init__
    node_index: dict = field(default_factory=dict, compare=False, repr=False)
    edge_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "node_index", {n: i for i, n in enumerate(self.nodes)})
        object.__setattr__(self, "edge_index", {e.id: i for i, e in enumerate(self.edges)})

    @property
    def num_arcs(self) -> int:
        return 2 * len(self.edges)

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self.edge_index[edge_id]]

    def total_demand(self) -> float:
        return sum(d.value for d in self.demands)

    def adjacency(self, exclude: frozenset[str] | set[str] = frozenset()) -> dict[str, list[str]]:
        """Node -> sorted neighbor list, skipping edges in `exclude`."""
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            if e.id in exclude:
                continue
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
        for n in adj:
            adj[n].sort()
        return adj


# ---------------------------------------------------------------------------
# validation and scenario construction
# ---------------------------------------------------------------------------


def validate_instance(inst: NetworkInstance) -> None:
    """Check all structural invariants; raises ValidationError on the first hit."""
    seen_nodes = set()
    for n in inst.nodes:
        if n in seen_nodes:
            raise ValidationError("duplicate node id", entity=n)
        seen_nodes.add(n)
    seen_pairs = set()
    seen_edge_ids = set()
    for e in inst.edges:
        if e.id in seen_edge_ids:
            raise ValidationError("duplicate edge id", entity=e.id)
        seen_edge_ids.add(e.id)
        if e.u == e.v:
            raise ValidationError("edge endpoints must be distinct", entity=e.id)
        if e.u not in seen_nodes or e.v not in seen_nodes:
            raise ValidationError("edge endpoint not a known node", entity=e.id)
        pair = (e.u, e.v) if e.u < e.v else (e.v, e.u)
        if pair in seen_pairs:
            raise ValidationError("duplicate undirected edge between node pair", entity=e.id)
        seen_pairs.add(pair)
        if e.preinstalled < 0:
            raise ValidationError("preinstalled capacity must be >= 0", entity=e.id)
        if not e.modules and e.preinstalled <= 0:
            raise ValidationError("edge without modules needs preinstalled capacity", entity=e.id)
        for m in e.modules:
            if m.capacity <= 0:
                raise ValidationError("module capacity must be > 0", entity=e.id)
            if m.cost < 0:
                raise ValidationError("module cost must be >= 0", entity=e.id)
    for d in inst.demands:
        if d.source == d.target:
            raise ValidationError("demand source equals target", entity=d.id)
        if d.source not in seen_nodes or d.target not in seen_nodes:
            raise ValidationError("demand endpoint not a known node", entity=d.id)
        if d.value <= 0:
            raise ValidationError("demand value must be > 0", entity=d.id)
    for s in inst.scenarios:
        if not s.failed_edges:
            raise ValidationError("scenario must fail at least one edge", entity=s.id)
        for eid in s.failed_edges:
            if eid not in seen_edge_ids:
                raise ValidationError("scenario fails unknown edge", entity=s.id)
    # every demand must survive every stored scenario
    for s in inst.scenarios:
        bad = _disconnected_demands(inst, s.failed_edges)
        if bad:
            raise ValidationError(
                f"scenario disconnects demand(s) {sorted(d.id for d in bad)}", entity=s.id
            )


def _components(nodes, adj) -> dict[str, int]:
    comp = {}
    cid = 0
    for start in nodes:
        if start in comp:
            continue
        comp[start] = cid
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if nxt not in comp:
                    comp[nxt] = cid
                    queue.append(nxt)
        cid += 1
    return comp


def _disconnected_demands(inst: NetworkInstance, failed: frozenset[str] | set[str]):
    comp = _components(inst.nodes, inst.adjacency(exclude=failed))
    return [d for d in inst.demands if comp[d.source] != comp[d.target]]


def build_scenarios(inst: NetworkInstance) -> tuple[Scenario, ...]:
    """N-1 scenarios (one per edge), dropping those that disconnect a demand.

    The scenario id is the failed edge's id. A warning is logged when
    scenarios are filtered out.
    """
    kept = []
    dropped = []
    for e in inst.edges:
        failed = frozenset([e.id])
        if _disconnected_demands(inst, failed):
            dropped.append(e.id)
        else:
            kept.append(Scenario(id=e.id, failed_edges=failed))
    if dropped:
        log.warning(
            "filtered %d/%d single-edge scenarios that disconnect a demand: %s",
            len(dropped), len(inst.edges), dropped,
        )
    return tuple(kept)


def filter_scenarios(inst: NetworkInstance) -> NetworkInstance:
    """Drop stored scenarios that disconnect any demand. Idempotent."""
    kept = tuple(s for s in inst.scenarios if not _disconnected_demands(inst, s.failed_edges))
    if len(kept) == len(inst.scenarios):
        return inst
    return NetworkInstance(inst.name, inst.nodes, inst.edges, inst.demands, kept)


# ---------------------------------------------------------------------------
# native format (JSON)
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise SchemaError(f"missing field '{key}' in {ctx}")
    return obj[key]


def _number(value, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number for {ctx}, got {value!r}")
    return float(value)


def parse_instance(text: str) -> NetworkInstance:
    """Parse the native JSON format into a validated NetworkInstance.

    When the document carries no `scenarios` array, N-1 scenarios are built
    and filtered for demand connectivity.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")

    name = _require(doc, "name", "document")
    if not isinstance(name, str):
        raise SchemaError("'name' must be a string")
    nodes_raw = _require(doc, "nodes", "document")
    if not isinstance(nodes_raw, list) or not all(isinstance(n, str) for n in nodes_raw):
        raise SchemaError("'nodes' must be a list of strings")

    edges = []
    for i, e in enumerate(_require(doc, "edges", "document")):
        if not isinstance(e, dict):
            raise SchemaError(f"edge #{i} must be an object")
        ctx = f"edge #{i}"
        modules = []
        for j, m in enumerate(e.get("modules", [])):
            if not isinstance(m, dict):
                raise SchemaError(f"module #{j} of {ctx} must be an object")
            modules.append(Module(
                capacity=_number(_require(m, "capacity", ctx), f"{ctx} module capacity"),
                cost=_number(_require(m, "cost", ctx), f"{ctx} module cost"),
            ))
        edges.append(Edge(
            id=str(_require(e, "id", ctx)),
            u=str(_require(e, "u", ctx)),
            v=str(_require(e, "v", ctx)),
            preinstalled=_number(e.get("preinstalled", 0.0), f"{ctx} preinstalled"),
            modules=tuple(modules),
        ))

    demands = []
    for i, d in enumerate(_require(doc, "demands", "document")):
        if not isinstance(d, dict):
            raise SchemaError(f"demand #{i} must be an object")
        ctx = f"demand #{i}"
        demands.append(Demand(
            id=str(d.get("id", f"d{i}")),
            source=str(_require(d, "source", ctx)),
            target=str(_require(d, "target", ctx)),
            value=_number(_require(d, "value", ctx), f"{ctx} value"),
        ))

    scenarios = None
    if "scenarios" in doc:
        scenarios = []
        for i, s in enumerate(doc["scenarios"]):
            if not isinstance(s, dict):
                raise SchemaError(f"scenario #{i} must be an object")
            failed = _require(s, "failed_edges", f"scenario #{i}")
            if not isinstance(failed, list):
                raise SchemaError(f"scenario #{i} 'failed_edges' must be a list")
            scenarios.append(Scenario(
                id=str(s.get("id", f"s{i}")),
                failed_edges=frozenset(str(x) for x in failed),
            ))

    inst = NetworkInstance(
        name=name,
        nodes=tuple(nodes_raw),
        edges=tuple(edges),
        demands=tuple(demands),
        scenarios=tuple(scenarios) if scenarios is not None else (),
    )
    if scenarios is None:
        base = NetworkInstance(name, inst.nodes, inst.edges, inst.demands, ())
        validate_instance(base)
        inst = NetworkInstance(name, inst.nodes, inst.edges, inst.demands, build_scenarios(base))
    validate_instance(inst)
    return inst


def instance_to_native(inst: NetworkInstance) -> str:
    """Serialize to the native JSON format (scenarios written explicitly)."""
    doc = {
        "name": inst.name,
        "nodes": list(inst.nodes),
        "edges": [
            {
                "id": e.id, "u": e.u, "v": e.v, "preinstalled": e.preinstalled,
                "modules": [{"capacity": m.capacity, "cost": m.cost} for m in e.modules],
            }
            for e in inst.edges
        ],
        "demands": [
            {"id": d.id, "source": d.source, "target": d.target, "value": d.value}
            for d in inst.demands
        ],
        "scenarios": [
            {"id": s.id, "failed_edges": sorted(s.failed_edges)} for s in inst.scenarios
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# SNDlib native text subset (NODES / LINKS / DEMANDS)
# ---------------------------------------------------------------------------


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_sndlib(text: str, name: str = "sndlib") -> NetworkInstance:
    """Parse the NODES/LINKS/DEMANDS sections of an SNDlib native document.

    Link module (capacity, cost) pairs map to Edge.modules in file order;
    the preinstalled-capacity field maps to Edge.preinstalled (its cost is
    sunk and ignored). Any other section is skipped with a warning. N-1
    scenarios are generated and filtered.
    """
    lines = text.splitlines()
    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        stripped = _strip_comment(lines[i]).strip()
        i += 1
        if not stripped:
            continue
        if stripped.startswith("?"):
            continue
        if stripped.endswith("("):
            header = stripped[:-1].strip()
            body: list[str] = []
            depth = 1
            while i < len(lines) and depth > 0:
                raw = _strip_comment(lines[i]).strip()
                i += 1
                depth += raw.count("(") - raw.count(")")
                if depth > 0 and raw:
                    body.append(raw)
                elif depth == 0 and raw != ")":
                    # closing paren shared a line with content
                    tail = raw.rsplit(")", 1)[0].strip()
                    if tail:
                        body.append(tail)
            if header in ("NODES", "LINKS", "DEMANDS"):
                sections[header] = body
            else:
                log.warning("ignoring unsupported SNDlib section %s", header)

    for required in ("NODES", "LINKS", "DEMANDS"):
        if required not in sections:
            raise SchemaError(f"SNDlib document missing {required} section")

    nodes = []
    for line in sections["NODES"]:
        node_name = line.split("(")[0].strip() if "(" in line else line.split()[0]
        if not node_name:
            raise SchemaError(f"cannot parse SNDlib node line: {line!r}")
        nodes.append(node_name)

    edges = []
    for line in sections["LINKS"]:
        # linkId ( src dst ) preCap preCapCost routingCost setupCost ( cap cost ... )
        try:
            head, rest = line.split("(", 1)
            link_id = head.strip()
            endpoints, rest = rest.split(")", 1)
            u, v = endpoints.split()
            if "(" in rest:
                fixed_part, module_part = rest.split("(", 1)
                module_tokens = module_part.split(")", 1)[0].split()
            else:
                fixed_part, module_tokens = rest, []
            fixed = fixed_part.split()
            pre_cap = float(fixed[0]) if fixed else 0.0
            if len(module_tokens) % 2 != 0:
                raise ValueError("odd module token count")
            modules = tuple(
                Module(capacity=float(module_tokens[k]), cost=float(module_tokens[k + 1]))
                for k in range(0, len(module_tokens), 2)
            )
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"cannot parse SNDlib link line: {line!r}") from exc
        edges.append(Edge(id=link_id, u=u, v=v, preinstalled=pre_cap, modules=modules))

    demands = []
    for line in sections["DEMANDS"]:
        # demandId ( src dst ) routingUnit demandValue maxPathLength
        try:
            head, rest = line.split("(", 1)
            demand_id = head.strip()
            endpoints, rest = rest.split(")", 1)
            src, dst = endpoints.split()
            fields = rest.split()
            value = float(fields[1])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"cannot parse SNDlib demand line: {line!r}") from exc
        demands.append(Demand(id=demand_id, source=src, target=dst, value=value))

    base = NetworkInstance(name, tuple(nodes), tuple(edges), tuple(demands), ())
    validate_instance(base)
    inst = NetworkInstance(name, base.nodes, base.edges, base.demands, build_scenarios(base))
    validate_instance(inst)
    return inst


# ---------------------------------------------------------------------------
# synthetic instance generation
# ---------------------------------------------------------------------------


def _degrees(inst: NetworkInstance) -> dict[str, int]:
    deg = {n: 0 for n in inst.nodes}
    for e in inst.edges:
        deg[e.u] += 1
        deg[e.v] += 1
    return deg


def _highest_degree_node(nodes, deg) -> str:
    # ties broken by smallest node id for determinism
    return min(nodes, key=lambda n: (-deg[n], n))


def _bfs_subset(inst: NetworkInstance, start: str, count: int) -> list[str]:
    adj = inst.adjacency()
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue and len(order) < count:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
                if len(order) >= count:
                    break
    return order


def generate_instance(
    sources: list[NetworkInstance],
    count_subgraphs: int,
    proportion: float,
    seed: int,
    name: str | None = None,
) -> NetworkInstance:
    """Build a synthetic instance by merging BFS subgraphs of source networks.

    From each chosen source, a BFS from a highest-degree node collects
    ceil(proportion * |V|) nodes with the induced edges and the demands
    whose endpoints both fall inside the subgraph. Subgraphs are chained
    with connector edges between their highest-degree nodes; a connector
    copies the module list of the incident edge with the largest total
    module capacity and carries no preinstalled capacity. N-1 scenarios are
    built and filtered. Deterministic for a fixed seed.
    """
    if not sources:
        raise GenerationError("no source instances given")
    if not 2 <= count_subgraphs <= 5:
        raise GenerationError(f"count_subgraphs must be in 2..5, got {count_subgraphs}")
    if not 0.45 <= proportion <= 0.65:
        raise GenerationError(f"proportion must be in [0.45, 0.65], got {proportion}")

    rng = random.Random(seed)
    if len(sources) >= count_subgraphs:
        chosen = rng.sample(range(len(sources)), count_subgraphs)
    else:
        chosen = [rng.randrange(len(sources)) for _ in range(count_subgraphs)]

    nodes: list[str] = []
    edges: list[Edge] = []
    demands: list[Demand] = []
    anchors: list[str] = []  # one highest-degree node per subgraph, renamed
    for gi, si in enumerate(chosen):
        src = sources[si]
        if not src.nodes:
            raise GenerationError(f"source #{si} has no nodes")
        deg = _degrees(src)
        start = _highest_degree_node(src.nodes, deg)
        want = math.ceil(proportion * len(src.nodes))
        subset = _bfs_subset(src, start, want)
        if not subset:
            raise GenerationError(f"empty subgraph extracted from source #{si}")
        inside = set(subset)
        rename = {n: f"g{gi}:{n}" for n in subset}
        nodes.extend(rename[n] for n in subset)
        sub_edges = [e for e in src.edges if e.u in inside and e.v in inside]
        for e in sub_edges:
            edges.append(Edge(
                id=f"g{gi}:{e.id}", u=rename[e.u], v=rename[e.v],
                preinstalled=e.preinstalled, modules=e.modules,
            ))
        for d in src.demands:
            if d.source in inside and d.target in inside:
                demands.append(Demand(
                    id=f"g{gi}:{d.id}", source=rename[d.source],
                    target=rename[d.target], value=d.value,
                ))
        sub_deg = {rename[n]: 0 for n in subset}
        for e in sub_edges:
            sub_deg[rename[e.u]] += 1
            sub_deg[rename[e.v]] += 1
        anchors.append(_highest_degree_node([rename[n] for n in subset], sub_deg))

    # chain the subgraphs with connector edges between their anchors
    for gi in range(count_subgraphs - 1):
        a, b = anchors[gi], anchors[gi + 1]
        incident = [e for e in edges if a in (e.u, e.v) or b in (e.u, e.v)]
        donors = [e for e in incident if e.modules]
        if not donors:
            raise GenerationError(f"no module-carrying edge incident to anchors {a}, {b}")
        donor = min(donors, key=lambda e: (-sum(m.capacity for m in e.modules), e.id))
        edges.append(Edge(id=f"x{gi}", u=a, v=b, preinstalled=0.0, modules=donor.modules))

    inst_name = name or f"gen-s{seed}-k{count_subgraphs}-p{proportion:g}"
    base = NetworkInstance(inst_name, tuple(nodes), tuple(edges), tuple(demands), ())
    try:
        validate_instance(base)
    except ValidationError as exc:
        raise GenerationError(f"merged graph invalid: {exc}") from exc
    if _disconnected_demands(base, frozenset()):
        raise GenerationError("merged base graph disconnects a demand pair")
    inst = NetworkInstance(inst_name, base.nodes, base.edges, base.demands,
                           build_scenarios(base))
    validate_instance(inst)
    return inst


# ---------------------------------------------------------------------------
# edge betweenness over demand pairs
# ---------------------------------------------------------------------------


def _bfs_counts(adj, start):
    """Hop distance and number of shortest paths from `start` to every node."""
    dist = {start: 0}
    count = {start: 1}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                count[nxt] = count[cur]
                queue.append(nxt)
            elif dist[nxt] == dist[cur] + 1:
                count[nxt] += count[cur]
    return dist, count


def edge_betweenness(inst: NetworkInstance) -> dict[str, float]:
    """Fraction of hop-shortest demand paths through each edge, averaged.

    For every demand, counts the shortest source-target paths containing
    each edge (unit hop weights, modules ignored) and averages the per-edge
    fractions over all demands. Values lie in [0, 1].
    """
    beta = {e.id: 0.0 for e in inst.edges}
    if not inst.demands:
        return beta
    adj = inst.adjacency()
    for d in inst.demands:
        dist_s, cnt_s = _bfs_counts(adj, d.source)
        dist_t, cnt_t = _bfs_counts(adj, d.target)
        if d.target not in dist_s:
            continue  # unreachable pairs are excluded by instance invariants
        total_len = dist_s[d.target]
        total_paths = cnt_s[d.target]
        for e in inst.edges:
            through = 0
            for a, b in ((e.u, e.v), (e.v, e.u)):
                if a in dist_s and b in dist_t and dist_s[a] + 1 + dist_t[b] == total_len:
                    through += cnt_s[a] * cnt_t[b]
            beta[e.id] += through / total_paths
    n = len(inst.demands)
    return {eid: val / n for eid, val in beta.items()}
