"""Ground-truth oracles and equilibrium machinery.

Provides the efficient-allocation search (exhaustive and branch-and-bound),
exact competitive-equilibrium checking and existence decisions via rational
linear feasibility, the approximate-equilibrium checker with its efficiency
bounds, the two constructive pricing procedures (single-input networks and
polytrees), structural classifiers, and the classifier that grades protocol
outcomes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import lpfeas, netmodel
from .money import Money
from .netmodel import (
    ACQUIRE,
    Allocation,
    AgentId,
    GoodId,
    PROVIDE,
    TaskDependencyNetwork,
    acquire,
    provide,
)

LAMBDA_DELTA_EQUILIBRIUM = "lambda-delta-equilibrium"
VALID_SOLUTION_ONLY = "valid-solution-only"
NON_SOLUTION = "non-solution"


# ---------------------------------------------------------------------------
# Efficient allocations


def _allocation_for(assignment: dict[AgentId, GoodId], activation: frozenset[AgentId], net) -> Allocation:
    edges = []
    for cid, g in assignment.items():
        if g is not None:
            edges.append(acquire(cid, g))
    for pid in activation:
        p = net.producer_by_id[pid]
        edges.append(provide(pid, p.output))
        edges.extend(acquire(pid, g, k) for g, k in p.input_edges())
    return frozenset(edges)


def _min_cost_covers(
    net: TaskDependencyNetwork,
    demand: dict[GoodId, int],
    best_cap: Money | None = None,
    collect_all: bool = False,
) -> tuple[Money, list[frozenset[AgentId]]] | None:
    """Cheapest producer activations exactly covering the demand.

    Activating a producer adds its own input demand, so the search closes the
    chain upstream.  Returns (cost, activations) or None when uncoverable;
    branches whose cost already exceeds ``best_cap`` are pruned.
    """
    best: list[Money | None] = [best_cap]
    found: dict[Money, set[frozenset[AgentId]]] = {}

    def dfs(pending: dict[GoodId, int], used: frozenset[AgentId], cost: Money) -> None:
        if best[0] is not None and cost > best[0]:
            return
        live = {g: u for g, u in pending.items() if u > 0}
        if not live:
            if best[0] is None or cost < best[0]:
                best[0] = cost
                if not collect_all:
                    found.clear()
            found.setdefault(cost, set()).add(used)
            return
        g = sorted(live)[0]
        need = live[g]
        providers = [p for p in net.providers_of.get(g, []) if p.id not in used]
        if len(providers) < need:
            return
        for combo in itertools.combinations(providers, need):
            extra = sum(p.cost for p in combo)
            if best[0] is not None and cost + extra > best[0]:
                continue
            nxt = dict(pending)
            nxt[g] = 0
            ok = True
            for p in combo:
                for gi, units in p.inputs.items():
                    nxt[gi] = nxt.get(gi, 0) + units
                    if not net.providers_of.get(gi):
                        ok = False
            if not ok:
                continue
            dfs(nxt, used | frozenset(p.id for p in combo), cost + extra)

    dfs(dict(demand), frozenset(), 0)
    if best[0] is None or best[0] not in found:
        return None
    return best[0], sorted(found[best[0]], key=sorted)


def _consumer_assignments(net: TaskDependencyNetwork, restrict: set[AgentId] | None = None):
    consumers = [c for c in net.consumers if restrict is None or c.id in restrict]
    option_lists = [[None] + sorted(c.values) for c in consumers]
    for choice in itertools.product(*option_lists):
        yield {c.id: g for c, g in zip(consumers, choice)}


def all_efficient_allocations(
    net: TaskDependencyNetwork, cap: int = 50
) -> tuple[list[Allocation], Money]:
    """Every maximum-value feasible allocation (up to ``cap``), with the value."""
    best_value: Money = 0
    best: list[Allocation] = [frozenset()]
    for assignment in _consumer_assignments(net):
        chosen = {c: g for c, g in assignment.items() if g is not None}
        gross = sum(net.consumer_by_id[c].values[g] for c, g in chosen.items())
        if gross < best_value:
            continue
        demand: dict[GoodId, int] = {}
        for g in chosen.values():
            demand[g] = demand.get(g, 0) + 1
        res = _min_cost_covers(net, demand, best_cap=gross - best_value, collect_all=True)
        if res is None:
            continue
        cost, activations = res
        value = gross - cost
        if value > best_value:
            best_value = value
            best = []
        if value == best_value:
            for act in activations:
                alloc = _allocation_for(assignment, act, net)
                if alloc not in best:
                    best.append(alloc)
                if len(best) >= cap:
                    break
    return best, best_value


def efficient_allocation(net: TaskDependencyNetwork) -> tuple[Allocation, Money]:
    """One maximum-value feasible allocation (branch-and-bound search)."""
    allocs, value = all_efficient_allocations(net, cap=1)
    return allocs[0], value


def efficient_allocation_exhaustive(net: TaskDependencyNetwork) -> tuple[Allocation, Money]:
    """Plain enumeration over activation sets and consumer choices.

    Independent oracle for the branch-and-bound search; exponential in the
    producer count, so keep inputs small.
    """
    producers = net.producers
    best_value: Money = 0
    best: Allocation = frozenset()
    for mask in range(1 << len(producers)):
        activation = frozenset(p.id for i, p in enumerate(producers) if mask >> i & 1)
        supply: dict[GoodId, int] = {}
        internal: dict[GoodId, int] = {}
        cost = 0
        for p in producers:
            if p.id in activation:
                supply[p.output] = supply.get(p.output, 0) + 1
                cost += p.cost
                for g, units in p.inputs.items():
                    internal[g] = internal.get(g, 0) + units
        residual = {g: supply.get(g, 0) - internal.get(g, 0) for g in set(supply) | set(internal)}
        if any(v < 0 for v in residual.values()):
            continue
        for assignment in _consumer_assignments(net):
            chosen: dict[GoodId, int] = {}
            gross = 0
            for cid, g in assignment.items():
                if g is not None:
                    chosen[g] = chosen.get(g, 0) + 1
                    gross += net.consumer_by_id[cid].values[g]
            if any(residual.get(g, 0) != chosen.get(g, 0) for g in set(residual) | set(chosen)):
                continue
            value = gross - cost
            if value > best_value:
                best_value = value
                best = _allocation_for(assignment, activation, net)
    return best, best_value


def min_cost_solution(
    net: TaskDependencyNetwork, consumer: AgentId, good: GoodId | None = None
) -> tuple[Money, GoodId] | None:
    """Cheapest production cost of any solution serving one consumer.

    Considers each of the consumer's goods (or only ``good``), ignoring all
    consumer values; None when no solution can serve the consumer.
    """
    c = net.consumer_by_id[consumer]
    goods = [good] if good is not None else sorted(c.values)
    best: tuple[Money, GoodId] | None = None
    for g in goods:
        res = _min_cost_covers(net, {g: 1}, best_cap=None if best is None else best[0])
        if res is not None and (best is None or res[0] < best[0]):
            best = (res[0], g)
    return best


# ---------------------------------------------------------------------------
# Exact competitive equilibrium


def _full_activity_surplus(net, prices, producer) -> Fraction | Money:
    inputs = sum(prices.get(g, 0) * units for g, units in producer.inputs.items())
    return prices.get(producer.output, 0) - inputs - producer.cost


def check_competitive_equilibrium(
    net: TaskDependencyNetwork, alloc: Allocation, prices
) -> list[str]:
    """All equilibrium conditions; empty list means verified.

    In-allocation producers must be active, feasible, and profitable at full
    activity; out-of-allocation producers must not profit; in-allocation
    consumers hold a surplus-maximizing good with nonnegative surplus and pay
    zero for anything else; out-of-allocation consumers see no positive
    surplus anywhere.
    """
    problems: list[str] = []
    if not netmodel.is_feasible(net, alloc):
        problems.append("allocation is not feasible")
    in_alloc = {e.agent for e in alloc}
    active = netmodel.active_producers(net, alloc)
    for p in net.producers:
        sigma = _full_activity_surplus(net, prices, p)
        if p.id in in_alloc:
            if p.id not in active:
                problems.append(f"producer {p.id} is in the allocation but inactive")
            elif sigma < 0:
                problems.append(f"active producer {p.id} has negative surplus {sigma}")
        else:
            if sigma > 0:
                problems.append(f"idle producer {p.id} could profit by {sigma}")
    for c in net.consumers:
        acquired = [e.good for e in alloc if e.kind == ACQUIRE and e.agent == c.id]
        if c.id in in_alloc:
            best = max(c.values[g] - prices.get(g, 0) for g in c.values)
            holds = [
                g
                for g in acquired
                if g in c.values
                and c.values[g] - prices.get(g, 0) == best
                and c.values[g] - prices.get(g, 0) >= 0
            ]
            if not holds:
                problems.append(f"consumer {c.id} does not hold a surplus-maximizing good")
            elif not any(
                all(prices.get(g2, 0) == 0 for g2 in acquired if g2 != g) for g in holds
            ):
                problems.append(f"consumer {c.id} pays a positive price for an extra good")
        else:
            for g, v in c.values.items():
                if v - prices.get(g, 0) > 0:
                    problems.append(f"unserved consumer {c.id} forgoes positive surplus on {g}")
    return problems


@dataclass
class ExistenceReport:
    exists: bool
    prices: dict[GoodId, Fraction] | None = None
    on_grid: bool = False
    clash: lpfeas.Clash | None = None
    allocation: Allocation | None = None
    efficient_value: Money = 0


def _good_depths(net: TaskDependencyNetwork) -> dict[GoodId, int]:
    depth: dict[GoodId, int] = {}

    def visit(g: GoodId) -> int:
        if g in depth:
            return depth[g]
        depth[g] = 0
        best = 0
        for p in net.providers_of.get(g, []):
            for gi in p.inputs:
                best = max(best, visit(gi) + 1)
        depth[g] = best
        return best

    for g in net.goods:
        visit(g)
    return depth


def equilibrium_system(
    net: TaskDependencyNetwork, alloc: Allocation
) -> list[lpfeas.Constraint]:
    """The price inequalities characterizing competitive equilibrium at alloc."""
    cons: list[lpfeas.Constraint] = []
    for g in net.goods:
        cons.append(lpfeas.Constraint.make({g: -1}, 0, f"p({g}) >= 0"))
    active = netmodel.active_producers(net, alloc)
    for p in net.producers:
        coeffs = {p.output: Fraction(-1)}
        for g, units in p.inputs.items():
            coeffs[g] = coeffs.get(g, Fraction(0)) + units
        if p.id in active:
            # p(out) - sum inputs >= cost
            cons.append(lpfeas.Constraint.make(coeffs, -p.cost, f"{p.id} active"))
        else:
            neg = {g: -c for g, c in coeffs.items()}
            cons.append(lpfeas.Constraint.make(neg, p.cost, f"{p.id} idle"))
    for c in net.consumers:
        acquired = [e.good for e in alloc if e.kind == ACQUIRE and e.agent == c.id]
        if acquired:
            g_star = acquired[0]
            cons.append(
                lpfeas.Constraint.make({g_star: 1}, c.values[g_star], f"{c.id} affords {g_star}")
            )
            for g in c.values:
                if g != g_star:
                    # v(g*) - p(g*) >= v(g) - p(g)
                    cons.append(
                        lpfeas.Constraint.make(
                            {g_star: 1, g: -1},
                            c.values[g_star] - c.values[g],
                            f"{c.id} prefers {g_star} to {g}",
                        )
                    )
        else:
            for g, v in c.values.items():
                cons.append(lpfeas.Constraint.make({g: -1}, -v, f"{c.id} priced out of {g}"))
    return cons


def competitive_equilibrium_exists(net: TaskDependencyNetwork) -> ExistenceReport:
    """Decide equilibrium existence by exact linear feasibility.

    Each maximum-value allocation is tried in turn (the optimum need not be
    unique); the first feasible system yields witness prices, rounded onto
    the money grid when re-verification allows.
    """
    allocs, value = all_efficient_allocations(net)
    depths = _good_depths(net)
    order = sorted(net.goods, key=lambda g: (depths[g], g))
    first_clash: lpfeas.Clash | None = None
    first_alloc: Allocation | None = None
    for alloc in allocs:
        result = lpfeas.solve(equilibrium_system(net, alloc), order)
        if result.feasible:
            witness = {g: result.witness.get(g, Fraction(0)) for g in net.goods}
            snapped = {g: Money(round(v)) for g, v in witness.items()}
            if not check_competitive_equilibrium(net, alloc, snapped):
                return ExistenceReport(True, dict(snapped), True, None, alloc, value)
            assert not check_competitive_equilibrium(net, alloc, witness)
            return ExistenceReport(True, witness, False, None, alloc, value)
        if first_clash is None:
            first_clash = result.clash
            first_alloc = alloc
    return ExistenceReport(False, None, False, first_clash, first_alloc, value)


# ---------------------------------------------------------------------------
# Approximate (lambda-delta) equilibrium


@dataclass
class LambdaParams:
    delta_buy: Money
    delta_sell: Money
    lam: dict[tuple[AgentId, GoodId], Money] = field(default_factory=dict)

    @classmethod
    def zero(cls) -> "LambdaParams":
        return cls(0, 0, {})

    @classmethod
    def from_trace(cls, trace) -> "LambdaParams":
        return cls(trace.policy.delta_buy, trace.policy.delta_sell, dict(trace.lambda_params))

    def producer_slack(self, producer) -> Money:
        total = self.delta_sell
        for g, units in producer.inputs.items():
            total += units * self.lam.get((producer.id, g), self.delta_buy)
        return total


@dataclass
class BoundReport:
    achieved: Money
    efficient: Money
    theorem3_bound: Money
    theorem12_bound: Money


def consumer_max_surplus(net, prices, consumer) -> Money:
    return max(
        (consumer.values[g] - prices.get(g, 0) for g in consumer.values),
        default=0,
    )


def producer_max_surplus(net, prices, producer) -> Money:
    return max(0, _full_activity_surplus(net, prices, producer))


def max_surplus(net: TaskDependencyNetwork, prices, agent: AgentId) -> Money:
    """Best surplus the agent could get at the prices, subject to feasibility."""
    if agent in net.consumer_by_id:
        return max(0, consumer_max_surplus(net, prices, net.consumer_by_id[agent]))
    return producer_max_surplus(net, prices, net.producer_by_id[agent])


def check_lambda_delta(
    net: TaskDependencyNetwork,
    alloc: Allocation,
    prices,
    params: LambdaParams,
    efficient_value: Money | None = None,
) -> tuple[list[str], BoundReport]:
    """Approximate-equilibrium conditions plus efficiency bound report.

    Conditions: every agent's surplus is nonnegative; consumers are within
    delta_b of their best surplus; producers are feasible and within their
    input slack plus delta_s of best; goods balance.
    """
    problems: list[str] = []
    provided: dict[GoodId, int] = {}
    acquired: dict[GoodId, int] = {}
    for e in alloc:
        d = provided if e.kind == PROVIDE else acquired
        d[e.good] = d.get(e.good, 0) + 1
    for g in set(provided) | set(acquired):
        if provided.get(g, 0) != acquired.get(g, 0):
            problems.append(f"good {g} out of material balance")
    active = netmodel.active_producers(net, alloc)
    for p in net.producers:
        if p.id in active:
            missing = [
                (g, k) for g, k in p.input_edges() if acquire(p.id, g, k) not in alloc
            ]
            if missing:
                problems.append(f"active producer {p.id} missing inputs {missing}")
    for aid in net.agents:
        sigma = netmodel.agent_surplus(net, alloc, prices, aid)
        if sigma < 0:
            problems.append(f"agent {aid} has negative surplus {sigma}")
        if aid in net.consumer_by_id:
            h = max_surplus(net, prices, aid)
            if sigma < h - params.delta_buy:
                problems.append(f"consumer {aid} is {h - sigma} below its best surplus")
        else:
            h = max_surplus(net, prices, aid)
            slack = params.producer_slack(net.producer_by_id[aid])
            if sigma < h - slack:
                problems.append(f"producer {aid} is {h - sigma} below its best surplus")
    achieved = netmodel.allocation_value(net, alloc)
    if efficient_value is None:
        _, efficient = efficient_allocation(net)
    else:
        efficient = efficient_value
    t3 = sum(params.producer_slack(p) for p in net.producers) + len(net.consumers) * params.delta_buy
    t12 = (
        sum(p.input_unit_count * params.delta_buy + params.delta_sell for p in net.producers)
        + len(net.consumers) * params.delta_buy
    )
    return problems, BoundReport(achieved, efficient, t3, t12)


@dataclass
class EquilibriumCertificate:
    allocation: Allocation
    prices: dict[GoodId, Money]
    kind: str  # "exact" | "lambda-delta"
    params: LambdaParams | None = None
    slacks: dict[AgentId, Money] = field(default_factory=dict)
    bounds: BoundReport | None = None

    def recheck(self, net: TaskDependencyNetwork) -> list[str]:
        if self.kind == "exact":
            return check_competitive_equilibrium(net, self.allocation, self.prices)
        problems, _ = check_lambda_delta(net, self.allocation, self.prices, self.params or LambdaParams.zero())
        return problems


def certificate_from_trace(trace) -> EquilibriumCertificate:
    params = LambdaParams.from_trace(trace)
    net = trace.net
    problems, bounds = check_lambda_delta(net, trace.final_allocation, trace.final_prices, params)
    slacks = {
        aid: max_surplus(net, trace.final_prices, aid)
        - netmodel.agent_surplus(net, trace.final_allocation, trace.final_prices, aid)
        for aid in net.agents
    }
    return EquilibriumCertificate(
        allocation=trace.final_allocation,
        prices=dict(trace.final_prices),
        kind="lambda-delta",
        params=params,
        slacks=slacks,
        bounds=bounds,
    )


def classify_protocol_outcome(trace) -> str:
    """Grade a cleared run: approximate equilibrium, valid solution, or neither."""
    net = trace.net
    problems, _ = check_lambda_delta(
        net, trace.final_allocation, trace.final_prices, LambdaParams.from_trace(trace)
    )
    if not problems:
        return LAMBDA_DELTA_EQUILIBRIUM
    if netmodel.is_valid_solution(net, trace.final_allocation, trace.final_prices):
        return VALID_SOLUTION_ONLY
    return NON_SOLUTION


# ---------------------------------------------------------------------------
# Structural classifiers


def _undirected_unit_edges(net: TaskDependencyNetwork) -> list[tuple[str, str]]:
    edges = []
    for c in net.consumers:
        edges.extend((g, c.id) for g in c.values)
    for p in net.producers:
        edges.append((p.id, p.output))
        for g, k in p.input_edges():
            edges.append((g, p.id))
    return edges


def is_polytree(net: TaskDependencyNetwork) -> bool:
    """At most one undirected path between any two vertices.

    Multi-unit inputs are parallel edges and immediately break the property.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in _undirected_unit_edges(net):
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def is_tree(net: TaskDependencyNetwork) -> bool:
    return len(net.consumers) <= 1 and is_polytree(net)


def has_input_complementarities(net: TaskDependencyNetwork) -> bool:
    return any(p.input_unit_count > 1 for p in net.producers)


# ---------------------------------------------------------------------------
# Constructive procedure: no input complementarities


def equilibrium_no_input_complementarities(
    net: TaskDependencyNetwork, alloc: Allocation
) -> dict[GoodId, Money]:
    """Fixed-point price construction for networks whose producers have at
    most one input unit, supporting the given efficient allocation."""
    if has_input_complementarities(net):
        raise ValueError("network has input complementarities")
    prices: dict[GoodId, Money] = {g: 0 for g in net.goods}
    in_alloc = {e.agent for e in alloc}
    acquired_by = {
        c.id: [e.good for e in alloc if e.kind == ACQUIRE and e.agent == c.id]
        for c in net.consumers
    }
    alloc_edges = set(alloc)

    def single_input(p) -> GoodId | None:
        return next(iter(p.inputs), None)

    for _ in range(10_000_000):
        changed = False
        for c in net.consumers:
            if c.id not in in_alloc:
                for g, v in sorted(c.values.items()):
                    if v > prices[g]:
                        prices[g] = v
                        changed = True
            else:
                g = acquired_by[c.id][0]
                base = c.values[g] - prices[g]
                if base >= 0:
                    for g2, v2 in sorted(c.values.items()):
                        if g2 != g and v2 - prices[g2] > base:
                            prices[g2] = v2 - base
                            changed = True
        for p in net.producers:
            gin = single_input(p)
            if p.id in in_alloc:
                if gin is None:
                    if prices[p.output] < p.cost:
                        prices[p.output] = p.cost
                        changed = True
                elif provide(p.id, p.output) in alloc_edges:
                    if prices[p.output] < prices[gin] + p.cost:
                        prices[p.output] = prices[gin] + p.cost
                        changed = True
            elif gin is not None:
                if prices[p.output] > prices[gin] + p.cost:
                    prices[gin] = prices[p.output] - p.cost
                    changed = True
        if not changed:
            return prices
    raise AssertionError("price construction failed to terminate")


# ---------------------------------------------------------------------------
# Constructive procedure: polytrees


@dataclass
class _Rewritten:
    net: TaskDependencyNetwork
    alloc: Allocation
    synthetic_goods: set[GoodId]


def _rewrite_single_good_consumers(net: TaskDependencyNetwork, alloc: Allocation) -> _Rewritten:
    """Give every consumer a single synthetic good, with zero-surplus adapter
    producers priced at the consumer's value differences."""
    goods = list(net.goods)
    consumers = []
    producers = list(net.producers)
    edges = set(alloc)
    synthetic: set[GoodId] = set()
    for c in net.consumers:
        if len(c.values) == 1:
            consumers.append(c)
            continue
        gc = f"__want_{c.id}"
        assert gc not in net.goods
        goods.append(gc)
        synthetic.add(gc)
        vmax = max(c.values.values())
        consumers.append(netmodel.Consumer(c.id, {gc: vmax}))
        held = [e for e in alloc if e.kind == ACQUIRE and e.agent == c.id]
        for g in sorted(c.values):
            pid = f"__adapt_{c.id}_{g}"
            producers.append(netmodel.Producer(pid, gc, {g: 1}, vmax - c.values[g]))
            synthetic_held = [e for e in held if e.good == g]
            if synthetic_held:
                edges.discard(synthetic_held[0])
                edges.add(acquire(pid, g))
                edges.add(provide(pid, gc))
                edges.add(acquire(c.id, gc))
    rewritten = TaskDependencyNetwork(
        goods=goods,
        consumers=consumers,
        producers=producers,
        resolution=net.resolution,
    )
    return _Rewritten(rewritten, frozenset(edges), synthetic)


def equilibrium_polytree(
    net: TaskDependencyNetwork, alloc: Allocation
) -> dict[GoodId, Money]:
    """Single-pass bound construction for polytrees, rooted per component.

    Visits the polytree in postorder; each agent pins the prices of its
    already-finalized neighbor goods and then tightens the lower or upper
    bound of the good it was reached from.  Every good's price is assigned
    exactly once, and lower bounds never exceed upper bounds.
    """
    if not is_polytree(net):
        raise ValueError("network is not a polytree")
    rw = _rewrite_single_good_consumers(net, alloc)
    rnet, ralloc = rw.net, rw.alloc
    big = (
        sum(v for c in rnet.consumers for v in c.values.values())
        + sum(p.cost for p in rnet.producers)
        + 1
    )
    in_alloc = {e.agent for e in ralloc}

    lower: dict[GoodId, Money] = {g: 0 for g in rnet.goods}
    upper: dict[GoodId, Money | None] = {g: None for g in rnet.goods}
    prices: dict[GoodId, Money] = {}

    neighbors: dict[str, list[str]] = {g: [] for g in rnet.goods}
    for c in rnet.consumers:
        neighbors[c.id] = sorted(c.values)
        for g in c.values:
            neighbors[g].append(c.id)
    for p in rnet.producers:
        neighbors[p.id] = sorted(p.inputs) + [p.output]
        neighbors[p.output].append(p.id)
        for g in p.inputs:
            neighbors[g].append(p.id)

    def raise_lower(g: GoodId, value: Money) -> None:
        if value > lower[g]:
            lower[g] = value
        assert upper[g] is None or lower[g] <= upper[g], "price bounds crossed"

    def drop_upper(g: GoodId, value: Money) -> None:
        if upper[g] is None or value < upper[g]:
            upper[g] = value
        assert lower[g] <= upper[g], "price bounds crossed"

    def assign(g: GoodId, value: Money | None, from_lower: bool) -> None:
        if g in prices:
            raise AssertionError(f"price of {g} set twice")
        prices[g] = lower[g] if from_lower else (big if value is None else value)

    def set_bounds(n: str, parent: str | None) -> None:
        for z in neighbors.get(n, []):
            if z != parent:
                set_bounds(z, n)
        if n in rnet.consumer_by_id:
            c = rnet.consumer_by_id[n]
            value = next(iter(c.values.values()))
            if n not in in_alloc:
                raise_lower(parent, value)
            else:
                drop_upper(parent, value)
        elif n in rnet.producer_by_id:
            p = rnet.producer_by_id[n]
            member = n in in_alloc
            for g in neighbors[n]:
                if g == parent:
                    continue
                is_input = g in p.inputs
                if member:
                    assign(g, lower[g] if is_input else upper[g], from_lower=is_input)
                else:
                    assign(g, upper[g] if is_input else lower[g], from_lower=not is_input)
            if parent == p.output:
                other = sum(prices[g] for g in p.inputs)
                if member:
                    raise_lower(parent, other + p.cost)
                else:
                    drop_upper(parent, other + p.cost)
            else:
                others = sum(prices[g] for g in p.inputs if g != parent)
                out_price = prices[p.output]
                if member:
                    drop_upper(parent, out_price - others - p.cost)
                else:
                    raise_lower(parent, out_price - others - p.cost)

    seen: set[str] = set()

    def component(start: str) -> list[str]:
        stack, comp = [start], []
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            comp.append(v)
            stack.extend(neighbors.get(v, []))
        return comp

    for g in rnet.goods:
        if g in seen:
            continue
        component(g)
        set_bounds(g, None)
        assign(g, lower[g], from_lower=True)

    return {g: prices[g] for g in net.goods}
