"""Deterministic discrete-event execution of the market protocol.

One auction per good and one policy agent per network agent exchange bid and
quote messages through a seeded delay model.  Delivery is reliable, per
channel FIFO, and batched per (tick, receiver); the same seed, network and
configuration always reproduce the identical trace.  The kernel detects
quiescence and quasi-quiescence centrally, clears the auctions at
quiescence, and optionally applies the contract decommitment phase that
removes positive-price dead ends.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Iterable

from . import netmodel
from .agents import AgentBase, ConsumerAgent, PolicyConfig, ProducerAgent, build_agents
from .auction import (
    BUY,
    SELL,
    AuctionState,
    BidMessage,
    Clearing,
    Contract,
    PriceQuote,
    Rejection,
)
from .money import Money, format_money
from .netmodel import (
    Allocation,
    GoodId,
    TaskDependencyNetwork,
    acquire,
    provide,
)


class EventCapExceeded(RuntimeError):
    """The run passed the configured event budget without quiescing."""


# ---------------------------------------------------------------------------
# Delay models


class SyncDelay:
    name = "sync"

    def delay(self, seq: int, sender: str, receiver: str, rng: random.Random) -> int:
        return 1


@dataclass
class UniformDelay:
    low: int
    high: int
    name: str = "uniform"

    def delay(self, seq: int, sender: str, receiver: str, rng: random.Random) -> int:
        return rng.randint(self.low, self.high)


class WorstCaseDelay:
    """Serializes every message onto its own tick.

    No two messages are ever delivered together, so no agent ever coalesces
    concurrent quotes; this realizes the adversarial interleaving that blows
    up bid counts on deeply staged networks.
    """

    name = "script:worst"

    def __init__(self) -> None:
        self._last = 0

    def delay(self, seq: int, sender: str, receiver: str, rng: random.Random) -> int:
        self._last += 1
        return self._last

    def absolute(self) -> bool:
        return True


@dataclass
class ScriptDelay:
    """Explicit per-message delivery-tick assignments loaded from a file."""

    assignments: dict[int, int]
    default: int = 1
    name: str = "script"

    @classmethod
    def load(cls, path: str) -> "ScriptDelay":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(
            assignments={int(k): int(v) for k, v in doc.get("assignments", {}).items()},
            default=int(doc.get("default_delay", 1)),
        )

    def delay(self, seq: int, sender: str, receiver: str, rng: random.Random) -> int:
        return self.assignments.get(seq, self.default)

    def absolute(self) -> bool:
        return False


def parse_delay_model(spec: str):
    """Parse a delay spec: sync | uniform:MIN,MAX | script:worst | script:PATH."""
    if spec == "sync":
        return SyncDelay()
    if spec.startswith("uniform:"):
        low, high = spec.split(":", 1)[1].split(",")
        return UniformDelay(int(low), int(high))
    if spec == "script:worst":
        return WorstCaseDelay()
    if spec.startswith("script:"):
        return ScriptDelay.load(spec.split(":", 1)[1])
    raise ValueError(f"unknown delay model {spec!r}")


@dataclass
class RunConfig:
    seed: int = 0
    delay: str = "uniform:1,8"
    event_cap: int = 10_000_000
    record_trace: bool = False
    monitor: bool = False


# ---------------------------------------------------------------------------
# Messages and traces


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    receiver: str
    payload: object
    send_tick: int
    delivery_tick: int


@dataclass
class TraceEvent:
    seq: int
    tick: int
    good: GoodId
    kind: str  # bid-accept | bid-reject | quote | clear
    fields: dict

    def format(self, resolution) -> str:
        parts = [f"seq={self.seq}", f"tick={self.tick}", f"good={self.good}", f"kind={self.kind}"]
        for key, value in self.fields.items():
            if key in ("price", "ask") or key.endswith("prices"):
                if isinstance(value, tuple):
                    value = ",".join(format_money(v, resolution) for v in value)
                else:
                    value = format_money(value, resolution)
            parts.append(f"{key}={value}")
        return " ".join(parts)


@dataclass
class MonitorViolation:
    tick: int
    kind: str
    detail: str


@dataclass
class RunTrace:
    net: TaskDependencyNetwork
    policy: PolicyConfig
    events: list[TraceEvent]
    final_prices: dict[GoodId, Money]
    final_asks: dict[GoodId, Money]
    final_contracts: list[Contract]
    final_allocation: Allocation
    bid_counts: dict[str, int]
    buy_offer_changes: dict[str, int]
    max_buy_offer: Money
    meaningful_bids: int
    quiescence_tick: int
    quasi_quiescence_tick: int | None
    event_count: int
    monitor_violations: list[MonitorViolation]
    lambda_params: dict  # (producer, good) -> max(ask - price, delta_b), from quotes
    decommitted: list[Contract] = field(default_factory=list)
    pruned_allocation: Allocation | None = None

    def dead_ends(self) -> set[str]:
        return netmodel.dead_ends(self.net, self.final_allocation)

    def positive_price_dead_ends(self) -> set[str]:
        return netmodel.positive_price_dead_ends(
            self.net, self.final_allocation, self.final_prices
        )


def count_meaningful_bids(trace: RunTrace) -> int:
    """Bids placed by consumers and by producers active at bid time."""
    return trace.meaningful_bids


# ---------------------------------------------------------------------------
# Kernel


class Kernel:
    def __init__(
        self,
        net: TaskDependencyNetwork,
        policy: PolicyConfig,
        config: RunConfig,
    ) -> None:
        self.net = net
        self.policy = policy
        self.config = config
        self.rng = random.Random(config.seed)
        self.delay_model = parse_delay_model(config.delay)
        self.agents: dict[str, AgentBase] = build_agents(net, policy)
        self.auctions: dict[GoodId, AuctionState] = {}
        for g in net.goods:
            auction = AuctionState(g, policy.delta_buy, policy.delta_sell)
            for p in net.providers_of.get(g, []):
                auction.register(p.id)
            for aid in net.acquirers_of.get(g, []):
                auction.register(aid)
            self.auctions[g] = auction
        self.queue: list[tuple[int, int, Message]] = []
        self.seq = 0
        self.tick = 0
        self.event_count = 0
        self.last_channel_tick: dict[tuple[str, str], int] = {}
        self.events: list[TraceEvent] = []
        self.bid_counts: dict[str, int] = {a: 0 for a in net.agents}
        self.buy_offer_changes: dict[str, int] = {a: 0 for a in net.agents}
        self.max_buy_offer: Money = 0
        self.meaningful_bids = 0
        self.quasi_q_tick: int | None = None
        self.frozen_state: tuple | None = None
        self.monitor_violations: list[MonitorViolation] = []

    # -- plumbing ---------------------------------------------------------

    def _send(self, sender: str, receiver: str, payload: object) -> None:
        self.seq += 1
        raw = self.delay_model.delay(self.seq, sender, receiver, self.rng)
        if getattr(self.delay_model, "absolute", lambda: False)():
            tick = max(raw, self.tick + 1)
        else:
            tick = self.tick + max(1, raw)
        # reliable channels deliver in send order
        tick = max(tick, self.last_channel_tick.get((sender, receiver), 0))
        self.last_channel_tick[(sender, receiver)] = tick
        msg = Message(self.seq, sender, receiver, payload, self.tick, tick)
        heapq.heappush(self.queue, (tick, self.seq, msg))

    def _log(self, good: GoodId, kind: str, **fields) -> None:
        if self.config.record_trace:
            self.events.append(TraceEvent(self.seq, self.tick, good, kind, fields))

    def _quote_wave(self, auction: AuctionState) -> None:
        clearing = auction.compute_clearing()
        for bidder in sorted(auction.offers):
            quote = auction.quote_for(bidder, clearing)
            self._send(auction.good, bidder, quote)
            self._log(
                auction.good,
                "quote",
                recipient=bidder,
                price=quote.price,
                ask=quote.ask,
                winning="".join(map(str, quote.winning)),
                bid_id=quote.bid_id,
            )

    def _producer_active_now(self, pid: str) -> bool:
        agent = self.agents[pid]
        if not isinstance(agent, ProducerAgent):
            return False
        clearing = self.auctions[agent.output].compute_clearing()
        return any(c.seller == pid for c in clearing.contracts)

    def _process_bid(self, auction: AuctionState, bid: BidMessage) -> bool:
        sender = bid.bidder
        meaningful = isinstance(self.agents[sender], ConsumerAgent) or self._producer_active_now(sender)
        old = {o.unit: o.price for o in auction.offers.get(sender, [])}
        rejection = auction.submit_bid(bid)
        if rejection is not None:
            self._send(auction.good, sender, rejection)
            self._log(auction.good, "bid-reject", bidder=sender, reason=rejection.reason, bid_id=bid.bid_id)
            return False
        self.bid_counts[sender] += 1
        if meaningful:
            self.meaningful_bids += 1
        if bid.side == BUY:
            changed = sum(
                1 for slot, price in enumerate(bid.prices, start=1) if old.get(slot) != price
            )
            self.buy_offer_changes[sender] += changed
            self.max_buy_offer = max(self.max_buy_offer, max(bid.prices))
        self._log(
            auction.good,
            "bid-accept",
            bidder=sender,
            side=bid.side,
            prices=bid.prices,
            bid_id=bid.bid_id,
            meaningful=int(meaningful),
        )
        return True

    def _deliver_batch(self, receiver: str, messages: list[Message]) -> None:
        if receiver in self.auctions:
            auction = self.auctions[receiver]
            any_accepted = False
            for msg in messages:
                if self._process_bid(auction, msg.payload):
                    any_accepted = True
            if not auction.first_quote_issued:
                # quotes start only once every registered bidder has bid
                if auction.all_initial_bids_in():
                    auction.first_quote_issued = True
                    self._quote_wave(auction)
            elif any_accepted:
                self._quote_wave(auction)
        else:
            agent = self.agents[receiver]
            for bid in agent.react([m.payload for m in messages]):
                self._send(receiver, bid.good, bid)

    # -- monitors ---------------------------------------------------------

    def current_clearings(self) -> dict[GoodId, Clearing]:
        return {g: a.compute_clearing() for g, a in self.auctions.items()}

    def current_state(self) -> tuple[dict[GoodId, Money], Allocation]:
        clearings = self.current_clearings()
        prices = {g: c.price for g, c in clearings.items()}
        alloc = allocation_from_contracts(
            [c for cl in clearings.values() for c in cl.contracts]
        )
        return prices, alloc

    def pending_messages(self) -> list[Message]:
        return [m for _, _, m in sorted(self.queue)]

    def detect_quiescence(self) -> bool:
        """No messages in flight and no agent would revise any bid."""
        if self.queue:
            return False
        return not any(agent.would_bid() for agent in self.agents.values())

    def detect_quasi_quiescence(self) -> bool:
        """Consumers and currently active producers are settled.

        Each such agent must have no bid in flight and must stay silent when
        fed every quote already transmitted to it, in delivery order.
        """
        pending = self.pending_messages()
        for aid, agent in self.agents.items():
            relevant = isinstance(agent, ConsumerAgent) or self._producer_active_now(aid)
            if not relevant:
                continue
            if any(m.sender == aid and isinstance(m.payload, BidMessage) for m in pending):
                return False
            if agent.would_bid():
                return False
            inbound = [m.payload for m in pending if m.receiver == aid]
            if inbound:
                ghost = agent.clone()
                for payload in inbound:
                    if ghost.react([payload]):
                        return False
        return True

    def _run_monitors(self) -> None:
        qq = self.detect_quasi_quiescence()
        if qq and self.quasi_q_tick is None:
            self.quasi_q_tick = self.tick
            self.frozen_state = self.current_state()
            self._check_theorem16()
        elif self.quasi_q_tick is not None:
            if not qq:
                self.monitor_violations.append(
                    MonitorViolation(self.tick, "quasi-quiescence-lost", "state left quasi-quiescence")
                )
            else:
                state = self.current_state()
                if state != self.frozen_state:
                    self.monitor_violations.append(
                        MonitorViolation(self.tick, "state-not-frozen", "prices or allocation changed after quasi-quiescence")
                    )

    def _check_theorem16(self) -> None:
        prices, alloc = self.current_state()
        cheap_edge = any(
            prices.get(g, 0) < v
            for c in self.net.consumers
            for g, v in c.values.items()
        )
        if cheap_edge and not netmodel.is_valid_solution(self.net, alloc, prices):
            self.monitor_violations.append(
                MonitorViolation(self.tick, "not-valid-solution", "quasi-quiescent under-value state is not a valid solution")
            )

    # -- main loop --------------------------------------------------------

    def run(self) -> RunTrace:
        for aid in sorted(self.agents):
            for bid in self.agents[aid].start():
                self._send(aid, bid.good, bid)
        while self.queue:
            tick = self.queue[0][0]
            self.tick = tick
            batch: list[Message] = []
            while self.queue and self.queue[0][0] == tick:
                batch.append(heapq.heappop(self.queue)[2])
            by_receiver: dict[str, list[Message]] = {}
            order: list[str] = []
            for msg in batch:
                if msg.receiver not in by_receiver:
                    by_receiver[msg.receiver] = []
                    order.append(msg.receiver)
                by_receiver[msg.receiver].append(msg)
            for receiver in order:
                self.event_count += len(by_receiver[receiver])
                if self.event_count > self.config.event_cap:
                    raise EventCapExceeded(
                        f"exceeded {self.config.event_cap} events without quiescence"
                    )
                self._deliver_batch(receiver, by_receiver[receiver])
            if self.config.monitor:
                self._run_monitors()
        assert self.detect_quiescence(), "event queue drained but agents still want to act"
        if self.config.monitor and not self.detect_quasi_quiescence():
            self.monitor_violations.append(
                MonitorViolation(self.tick, "quiescent-not-quasi", "quiescent state fails quasi-quiescence")
            )
        return self._finish()

    def _finish(self) -> RunTrace:
        prices: dict[GoodId, Money] = {}
        asks: dict[GoodId, Money] = {}
        contracts: list[Contract] = []
        lambda_params: dict[tuple[str, GoodId], Money] = {}
        for g in self.net.goods:
            auction = self.auctions[g]
            auction.close()
            clearing = auction.clear()
            prices[g] = clearing.price
            asks[g] = clearing.ask
            contracts.extend(clearing.contracts)
            self._log(
                g,
                "clear",
                price=clearing.price,
                ask=clearing.ask,
                trades=";".join(f"{c.buyer}:{c.seller}" for c in clearing.contracts),
            )
        for p in self.net.producers:
            for good in p.inputs:
                lam = max(asks.get(good, 0) - prices.get(good, 0), self.policy.delta_buy)
                lambda_params[(p.id, good)] = lam
        alloc = allocation_from_contracts(contracts)
        return RunTrace(
            net=self.net,
            policy=self.policy,
            events=self.events,
            final_prices=prices,
            final_asks=asks,
            final_contracts=contracts,
            final_allocation=alloc,
            bid_counts=self.bid_counts,
            buy_offer_changes=self.buy_offer_changes,
            max_buy_offer=self.max_buy_offer,
            meaningful_bids=self.meaningful_bids,
            quiescence_tick=self.tick,
            quasi_quiescence_tick=self.quasi_q_tick,
            event_count=self.event_count,
            monitor_violations=self.monitor_violations,
            lambda_params=lambda_params,
        )


def allocation_from_contracts(contracts: Iterable[Contract]) -> Allocation:
    edges = []
    for c in contracts:
        edges.append(acquire(c.buyer, c.good, c.buyer_unit))
        edges.append(provide(c.seller, c.good, c.seller_unit))
    return frozenset(edges)


def run(net: TaskDependencyNetwork, policy: PolicyConfig | None = None, config: RunConfig | None = None) -> RunTrace:
    """Execute one full protocol run to quiescence and clear the auctions."""
    return Kernel(net, policy or PolicyConfig(), config or RunConfig()).run()


# ---------------------------------------------------------------------------
# Decommitment (the post-quiescence phase of the decommitting protocol)


def decommit_contracts(
    net: TaskDependencyNetwork,
    contracts: list[Contract],
    prices: dict[GoodId, Money],
) -> tuple[list[Contract], list[Contract]]:
    """Recursively release positive-price input contracts of inactive producers.

    Producers whose output sale is cancelled become inactive and are processed
    in turn.  Returns (remaining contracts, removed contracts).
    """
    remaining = list(contracts)
    removed: list[Contract] = []
    while True:
        active = {c.seller for c in remaining}
        drops = [
            c
            for c in remaining
            if c.buyer in net.producer_by_id and c.buyer not in active and c.price > 0
        ]
        if not drops:
            return remaining, removed
        remaining = [c for c in remaining if c not in drops]
        removed.extend(drops)


def decommit(
    net: TaskDependencyNetwork,
    alloc: Allocation,
    prices: dict[GoodId, Money],
    contracts: list[Contract] | None = None,
) -> tuple[Allocation, list[Contract]]:
    """Allocation-level decommitment.

    When the true contract pairing is unknown (offline snapshots), providers
    and acquirers of each good are paired canonically in sorted order.
    """
    if contracts is None:
        contracts = _canonical_contracts(alloc, prices)
    remaining, removed = decommit_contracts(net, contracts, prices)
    return allocation_from_contracts(remaining), removed


def _canonical_contracts(alloc: Allocation, prices: dict[GoodId, Money]) -> list[Contract]:
    by_good: dict[GoodId, tuple[list, list]] = {}
    for e in sorted(alloc):
        providers, acquirers = by_good.setdefault(e.good, ([], []))
        if e.kind == netmodel.PROVIDE:
            providers.append(e)
        else:
            acquirers.append(e)
    contracts = []
    for good, (providers, acquirers) in sorted(by_good.items()):
        if len(providers) != len(acquirers):
            raise ValueError(f"good {good} is not in material balance")
        for pe, ae in zip(providers, acquirers):
            contracts.append(
                Contract(ae.agent, ae.unit, pe.agent, pe.unit, good, prices.get(good, 0))
            )
    return contracts


def run_with_decommit(
    net: TaskDependencyNetwork,
    policy: PolicyConfig | None = None,
    config: RunConfig | None = None,
    base_trace: RunTrace | None = None,
) -> RunTrace:
    """SAMP-SB plus the decommitment phase, as one trace.

    ``base_trace`` lets callers reuse an already-completed plain run so that
    the decommitted outcome is directly comparable to it.
    """
    trace = base_trace or run(net, policy, config)
    remaining, removed = decommit_contracts(net, trace.final_contracts, trace.final_prices)
    trace.decommitted = removed
    trace.pruned_allocation = allocation_from_contracts(remaining)
    return trace
