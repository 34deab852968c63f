"""Task dependency networks, allocations, and their value/feasibility predicates.

A network is a bipartite DAG of goods and agents.  Producers turn input goods
(with unit multiplicities) into a single unit of one output good at a fixed
cost; consumers want one unit of one good from a valued set.  Allocations are
subgraphs of traded unit-edges and carry all the derived predicates: material
balance, feasibility, solutions, dead ends, value and per-agent surplus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

from .money import (
    DEFAULT_RESOLUTION,
    Money,
    format_money,
    parse_money,
    parse_resolution,
)

GoodId = str
AgentId = str

PROVIDE = "provide"
ACQUIRE = "acquire"


class Edge(NamedTuple):
    """One unit-edge of an allocation.

    ``kind`` is "provide" (agent -> good) or "acquire" (good -> agent);
    ``unit`` is the 1-based subscript distinguishing multi-unit input edges.
    """

    kind: str
    agent: AgentId
    good: GoodId
    unit: int


def provide(agent: AgentId, good: GoodId, unit: int = 1) -> Edge:
    return Edge(PROVIDE, agent, good, unit)


def acquire(agent: AgentId, good: GoodId, unit: int = 1) -> Edge:
    return Edge(ACQUIRE, agent, good, unit)


Allocation = frozenset  # of Edge
PriceSystem = Mapping[GoodId, Money]


@dataclass(frozen=True)
class Consumer:
    id: AgentId
    values: dict[GoodId, Money]  # strictly positive, keys = consumable goods


@dataclass(frozen=True)
class Producer:
    id: AgentId
    output: GoodId
    inputs: dict[GoodId, int]  # good -> units required
    cost: Money

    def input_edges(self) -> list[tuple[GoodId, int]]:
        """Unit-expanded input edges in canonical (good, subscript) order."""
        return [(g, k) for g in sorted(self.inputs) for k in range(1, self.inputs[g] + 1)]

    @property
    def input_unit_count(self) -> int:
        return sum(self.inputs.values())


@dataclass
class TaskDependencyNetwork:
    goods: list[GoodId]
    consumers: list[Consumer]
    producers: list[Producer]
    resolution: Fraction = DEFAULT_RESOLUTION
    name: str = ""
    policy_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.consumer_by_id = {c.id: c for c in self.consumers}
        self.producer_by_id = {p.id: p for p in self.producers}
        self.providers_of: dict[GoodId, list[Producer]] = {g: [] for g in self.goods}
        self.acquirers_of: dict[GoodId, list[AgentId]] = {g: [] for g in self.goods}
        for p in self.producers:
            if p.output in self.providers_of:
                self.providers_of[p.output].append(p)
            for g in p.inputs:
                if g in self.acquirers_of:
                    self.acquirers_of[g].append(p.id)
        for c in self.consumers:
            for g in c.values:
                if g in self.acquirers_of:
                    self.acquirers_of[g].append(c.id)

    @property
    def agents(self) -> list[AgentId]:
        return [c.id for c in self.consumers] + [p.id for p in self.producers]

    def is_agent(self, aid: AgentId) -> bool:
        return aid in self.consumer_by_id or aid in self.producer_by_id

    def edges(self) -> list[Edge]:
        """Every unit-edge of the full network graph."""
        out: list[Edge] = []
        for c in self.consumers:
            out.extend(acquire(c.id, g) for g in sorted(c.values))
        for p in self.producers:
            out.append(provide(p.id, p.output))
            out.extend(acquire(p.id, g, k) for g, k in p.input_edges())
        return out


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str
    severity: str = "error"  # or "warning"


def validate_network(net: TaskDependencyNetwork) -> list[Violation]:
    """Check all structural invariants; returns findings (errors and warnings).

    The network is acceptable for simulation iff no finding has severity
    "error".
    """
    out: list[Violation] = []
    good_set = set(net.goods)
    if len(good_set) != len(net.goods):
        out.append(Violation("duplicate-good", "", "duplicate good ids"))
    seen_agents: set[str] = set()
    for aid in net.agents:
        if aid in seen_agents:
            out.append(Violation("duplicate-agent", aid, f"duplicate agent id {aid}"))
        seen_agents.add(aid)
        if aid in good_set:
            out.append(Violation("id-collision", aid, f"{aid} used as both good and agent"))
    for c in net.consumers:
        if not c.values:
            out.append(Violation("empty-values", c.id, f"consumer {c.id} values no goods"))
        for g, v in c.values.items():
            if g not in good_set:
                out.append(Violation("unknown-good", c.id, f"consumer {c.id} values unknown good {g}"))
            if v <= 0:
                out.append(Violation("nonpositive-value", c.id, f"consumer {c.id} value for {g} must be positive"))
    for p in net.producers:
        if p.output not in good_set:
            out.append(Violation("unknown-good", p.id, f"producer {p.id} outputs unknown good {p.output}"))
        if p.output in p.inputs:
            out.append(Violation("output-in-inputs", p.id, f"producer {p.id} output {p.output} is in its input set"))
        if p.cost < 0:
            out.append(Violation("negative-cost", p.id, f"producer {p.id} has negative cost"))
        for g, units in p.inputs.items():
            if g not in good_set:
                out.append(Violation("unknown-good", p.id, f"producer {p.id} uses unknown good {g}"))
            if units < 1:
                out.append(Violation("bad-multiplicity", p.id, f"producer {p.id} needs {units} units of {g}"))
    cycle = _find_cycle(net)
    if cycle:
        out.append(Violation("cycle", " -> ".join(cycle), "network graph is cyclic"))
    else:
        levels = c_levels(net)
        for p in net.producers:
            if levels.get(p.id) is None:
                out.append(
                    Violation(
                        "unconsumed-output",
                        p.id,
                        f"no agent consumes output {p.output} of producer {p.id}; it is inert",
                        severity="warning",
                    )
                )
    return out


def _find_cycle(net: TaskDependencyNetwork) -> list[str] | None:
    """DFS for a directed cycle over the good/agent graph; returns one if found."""
    succ: dict[str, list[str]] = {g: [] for g in net.goods}
    for p in net.producers:
        succ[p.id] = [p.output] if p.output in succ else []
        for g in p.inputs:
            if g in succ:
                succ[g].append(p.id)
    for c in net.consumers:
        succ[c.id] = []
        for g in c.values:
            if g in succ:
                succ[g].append(c.id)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {v: WHITE for v in succ}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = GREY
        stack.append(v)
        for w in succ.get(v, ()):
            if color[w] == GREY:
                return stack[stack.index(w):] + [w]
            if color[w] == WHITE:
                found = visit(w)
                if found:
                    return found
        stack.pop()
        color[v] = BLACK
        return None

    for v in list(succ):
        if color[v] == WHITE:
            found = visit(v)
            if found:
                return found
    return None


# ---------------------------------------------------------------------------
# Allocation predicates


def _check_subgraph(net: TaskDependencyNetwork, alloc: Allocation) -> None:
    legal = set(net.edges())
    for e in alloc:
        if e not in legal:
            raise ValueError(f"edge {e} is not part of the network")


def active_producers(net: TaskDependencyNetwork, alloc: Allocation) -> set[AgentId]:
    """Producers that provide their output in the allocation."""
    return {
        p.id for p in net.producers if provide(p.id, p.output) in alloc
    }


def is_feasible(net: TaskDependencyNetwork, alloc: Allocation) -> bool:
    """All agents feasible and every good in material balance.

    An active producer must acquire every input unit; inactive producers are
    feasible by definition, so dead ends do not affect feasibility.
    """
    _check_subgraph(net, alloc)
    active = active_producers(net, alloc)
    for p in net.producers:
        if p.id in active:
            for g, k in p.input_edges():
                if acquire(p.id, g, k) not in alloc:
                    return False
    provided: dict[GoodId, int] = {}
    acquired: dict[GoodId, int] = {}
    for e in alloc:
        if e.kind == PROVIDE:
            provided[e.good] = provided.get(e.good, 0) + 1
        else:
            acquired[e.good] = acquired.get(e.good, 0) + 1
    goods = set(provided) | set(acquired)
    return all(provided.get(g, 0) == acquired.get(g, 0) for g in goods)


def consumers_served(net: TaskDependencyNetwork, alloc: Allocation) -> frozenset[AgentId]:
    """The set of consumers acquiring a good in the allocation."""
    return frozenset(
        e.agent for e in alloc if e.kind == ACQUIRE and e.agent in net.consumer_by_id
    )


def is_solution(net: TaskDependencyNetwork, alloc: Allocation) -> bool:
    """A solution is a feasible allocation in which some consumer is served."""
    return bool(consumers_served(net, alloc)) and is_feasible(net, alloc)


def consumer_value(net: TaskDependencyNetwork, alloc: Allocation, cid: AgentId) -> Money:
    """Max value over goods the consumer acquires (0 if it acquires none)."""
    c = net.consumer_by_id[cid]
    acquired = [e.good for e in alloc if e.kind == ACQUIRE and e.agent == cid]
    return max((c.values[g] for g in acquired if g in c.values), default=0)


def allocation_value(net: TaskDependencyNetwork, alloc: Allocation) -> Money:
    """Sum of consumer values minus costs of producers that provide output."""
    _check_subgraph(net, alloc)
    total = sum(consumer_value(net, alloc, c.id) for c in net.consumers)
    active = active_producers(net, alloc)
    total -= sum(p.cost for p in net.producers if p.id in active)
    return total


def agent_surplus(
    net: TaskDependencyNetwork,
    alloc: Allocation,
    prices: PriceSystem,
    agent: AgentId,
) -> Money:
    """Quasilinear surplus of one agent under the allocation at the prices."""
    paid = sum(prices.get(e.good, 0) for e in alloc if e.kind == ACQUIRE and e.agent == agent)
    if agent in net.consumer_by_id:
        return consumer_value(net, alloc, agent) - paid
    if agent in net.producer_by_id:
        p = net.producer_by_id[agent]
        earned = sum(prices.get(e.good, 0) for e in alloc if e.kind == PROVIDE and e.agent == agent)
        cost = p.cost if provide(p.id, p.output) in alloc else 0
        return earned - paid - cost
    raise KeyError(f"unknown agent {agent}")


def total_surplus(net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem) -> Money:
    return sum(agent_surplus(net, alloc, prices, a) for a in net.agents)


def dead_ends(net: TaskDependencyNetwork, alloc: Allocation) -> set[AgentId]:
    """Inactive producers that nonetheless acquire at least one input."""
    active = active_producers(net, alloc)
    return {
        e.agent
        for e in alloc
        if e.kind == ACQUIRE and e.agent in net.producer_by_id and e.agent not in active
    }


def positive_price_dead_ends(
    net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem
) -> set[AgentId]:
    """Dead-end producers that pay a positive price for some acquired input."""
    active = active_producers(net, alloc)
    return {
        e.agent
        for e in alloc
        if e.kind == ACQUIRE
        and e.agent in net.producer_by_id
        and e.agent not in active
        and prices.get(e.good, 0) > 0
    }


def is_valid_solution(
    net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem
) -> bool:
    """Solution validity: consumers pay within value for one good and pay
    zero for any other acquired good; active producers are not unprofitable.

    Dead ends are permitted.
    """
    if not is_solution(net, alloc):
        return False
    for cid in consumers_served(net, alloc):
        c = net.consumer_by_id[cid]
        acquired = [e.good for e in alloc if e.kind == ACQUIRE and e.agent == cid]
        affordable = [g for g in acquired if prices.get(g, 0) <= c.values.get(g, 0)]
        if not any(
            all(prices.get(g2, 0) == 0 for g2 in acquired if g2 != g) for g in affordable
        ):
            return False
    active = active_producers(net, alloc)
    for pid in active:
        if agent_surplus(net, alloc, prices, pid) < 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Producer levels and network parameters


def c_levels(net: TaskDependencyNetwork) -> dict[AgentId, int | None]:
    """C-level per producer: max distance downstream to any consumer.

    1 when no producer, but some consumer, uses the output; undefined (None)
    when nothing consumes the output.
    """
    consumed_by_consumer: set[GoodId] = set()
    for c in net.consumers:
        consumed_by_consumer.update(c.values)
    memo: dict[AgentId, int | None] = {}

    def level(p: Producer) -> int | None:
        if p.id in memo:
            return memo[p.id]
        memo[p.id] = None  # acyclic, so never revisited on the stack
        downstream = [q for q in net.producers if p.output in q.inputs]
        best: int | None = None
        for q in downstream:
            lq = level(q)
            if lq is not None:
                best = lq if best is None else max(best, lq)
        if best is not None:
            memo[p.id] = best + 1
        elif p.output in consumed_by_consumer:
            memo[p.id] = 1
        else:
            memo[p.id] = None
        return memo[p.id]

    for p in net.producers:
        level(p)
    return memo


def s_levels(net: TaskDependencyNetwork) -> dict[AgentId, int | None]:
    """S-level per producer: max distance upstream to an input-less producer.

    0 for producers with no inputs; undefined when some input chain has no
    providers at all.
    """
    memo: dict[AgentId, int | None] = {}

    def level(p: Producer) -> int | None:
        if p.id in memo:
            return memo[p.id]
        if not p.inputs:
            memo[p.id] = 0
            return 0
        memo[p.id] = None
        best: int | None = None
        for g in p.inputs:
            providers = net.providers_of.get(g, [])
            if not providers:
                memo[p.id] = None
                return None
            for q in providers:
                lq = level(q)
                if lq is None:
                    memo[p.id] = None
                    return None
                best = lq if best is None else max(best, lq)
        memo[p.id] = (best + 1) if best is not None else None
        return memo[p.id]

    for p in net.producers:
        level(p)
    return memo


def network_parameters(net: TaskDependencyNetwork) -> tuple[int, int, Money]:
    """(phi, upsilon, r): max C-level, max producer input-unit count, and max
    consumer value.  Producers with undefined C-level are inert and excluded
    from phi."""
    levels = c_levels(net)
    phi = max((lv for lv in levels.values() if lv is not None), default=0)
    upsilon = max((p.input_unit_count for p in net.producers), default=0)
    r = max((v for c in net.consumers for v in c.values.values()), default=0)
    return phi, upsilon, r


# ---------------------------------------------------------------------------
# File formats


class NetworkFormatError(ValueError):
    pass


def network_from_dict(doc: dict) -> TaskDependencyNetwork:
    try:
        rho = parse_resolution(doc.get("resolution", "0.0001"))
        goods = list(doc["goods"])
        consumers = [
            Consumer(
                id=str(c["id"]),
                values={str(g): parse_money(v, rho) for g, v in c["values"].items()},
            )
            for c in doc.get("consumers", [])
        ]
        producers = [
            Producer(
                id=str(p["id"]),
                output=str(p["output"]),
                inputs={str(i["good"]): int(i.get("units", 1)) for i in p.get("inputs", [])},
                cost=parse_money(p.get("cost", "0"), rho),
            )
            for p in doc.get("producers", [])
        ]
    except (KeyError, TypeError) as exc:
        raise NetworkFormatError(f"malformed network document: {exc}") from exc
    return TaskDependencyNetwork(
        goods=goods,
        consumers=consumers,
        producers=producers,
        resolution=rho,
        name=str(doc.get("name", "")),
        policy_overrides=doc.get("policy", {}),
    )


def network_to_dict(net: TaskDependencyNetwork, provenance: str | None = None) -> dict:
    doc: dict = {"resolution": format_money(1, net.resolution)}
    if net.name:
        doc["name"] = net.name
    if provenance:
        doc["provenance"] = provenance
    doc["goods"] = list(net.goods)
    doc["consumers"] = [
        {
            "id": c.id,
            "values": {g: format_money(v, net.resolution) for g, v in sorted(c.values.items())},
        }
        for c in net.consumers
    ]
    doc["producers"] = [
        {
            "id": p.id,
            "output": p.output,
            "inputs": [{"good": g, "units": u} for g, u in sorted(p.inputs.items())],
            "cost": format_money(p.cost, net.resolution),
        }
        for p in net.producers
    ]
    if net.policy_overrides:
        doc["policy"] = net.policy_overrides
    return doc


def load_network(path: str) -> TaskDependencyNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_network(net: TaskDependencyNetwork, path: str, provenance: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net, provenance), fh, indent=2, sort_keys=False)
        fh.write("\n")


def allocation_to_list(alloc: Allocation) -> list[dict]:
    """Allocation snapshot: traded unit-edges as {from, to, good, unit}."""
    rows = []
    for e in sorted(alloc):
        src, dst = (e.agent, e.good) if e.kind == PROVIDE else (e.good, e.agent)
        rows.append({"from": src, "to": dst, "good": e.good, "unit": e.unit})
    return rows


def allocation_from_list(rows: Iterable[dict], net: TaskDependencyNetwork) -> Allocation:
    edges = []
    for row in rows:
        good = str(row["good"])
        unit = int(row.get("unit", 1))
        if row["from"] == good:
            edges.append(acquire(str(row["to"]), good, unit))
        elif row["to"] == good:
            edges.append(provide(str(row["from"]), good, unit))
        else:
            raise NetworkFormatError(f"edge {row} has no endpoint equal to its good")
    alloc = frozenset(edges)
    _check_subgraph(net, alloc)
    return alloc
