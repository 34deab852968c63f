"""Myopic bidding policies for consumers and producers.

Consumers open at zero on every valued good, hold still while winning
anything, and otherwise chase the single good with the best surplus at one
increment above the quoted price, stopping when no good is worth that much.

Producers open at zero on every input unit, track a perceived cost per input
offer (the price when winning, max(ask, price + increment) when losing), and
re-offer their output whenever total perceived cost rises.  The plain policy
raises a losing input offer whenever the producer believes it is winning its
output; the safe variant additionally requires that the output offer did not
just change and that the producer is winning its most recent output offer.

Agents act only on price quotes that echo their latest bid for that auction;
anything staler is discarded.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .auction import BUY, SELL, BidMessage, Clearing, PriceQuote, Rejection
from .money import Money
from .netmodel import AgentId, Consumer, GoodId, Producer

PLAIN = "plain"
SAFE = "safe"


@dataclass(frozen=True)
class PolicyConfig:
    variant: str = PLAIN
    include_cost: bool = True
    delta_buy: Money = 100
    delta_sell: Money = 100


@dataclass
class QuoteView:
    """An agent's belief about one auction, from its last consistent quote."""

    price: Money = 0
    ask: Money = 0
    winning: tuple[int, ...] = ()
    seen: bool = False
    bid_id: int = 0


class AgentBase:
    id: AgentId

    def __init__(self) -> None:
        self.sent_bid_id: dict[GoodId, int] = {}
        self.views: dict[GoodId, QuoteView] = {}
        self.rejections: list[Rejection] = []

    def _next_bid_id(self, good: GoodId) -> int:
        nxt = self.sent_bid_id.get(good, 0) + 1
        self.sent_bid_id[good] = nxt
        return nxt

    def _ingest(self, messages: list) -> None:
        for msg in messages:
            if isinstance(msg, PriceQuote):
                if msg.bid_id == self.sent_bid_id.get(msg.good, 0):
                    self.views[msg.good] = QuoteView(
                        msg.price, msg.ask, msg.winning, True, msg.bid_id
                    )
            elif isinstance(msg, Rejection):
                self.rejections.append(msg)
                if self.sent_bid_id.get(msg.good) == msg.bid_id:
                    self.sent_bid_id[msg.good] = msg.bid_id - 1

    def view_current(self, good: GoodId) -> bool:
        """The stored view for a good reflects the agent's latest bid there."""
        view = self.views.get(good)
        return bool(view and view.seen and view.bid_id == self.sent_bid_id.get(good, 0))

    def clone(self):
        return copy.deepcopy(self)

    def start(self) -> list[BidMessage]:
        raise NotImplementedError

    def react(self, messages: list) -> list[BidMessage]:
        raise NotImplementedError

    def would_bid(self) -> bool:
        """True iff the agent would emit a bid given its current beliefs."""
        raise NotImplementedError


class ConsumerAgent(AgentBase):
    def __init__(self, consumer: Consumer, config: PolicyConfig) -> None:
        super().__init__()
        self.id = consumer.id
        self.values = dict(consumer.values)
        self.config = config
        self.standing: dict[GoodId, Money] = {}
        self.stopped = False

    def start(self) -> list[BidMessage]:
        out = []
        for g in sorted(self.values):
            self.standing[g] = 0
            out.append(BidMessage(self.id, g, BUY, (0,), self._next_bid_id(g)))
        return out

    def winning_some_good(self) -> bool:
        return any(v.seen and sum(v.winning) > 0 for v in self.views.values())

    def _target(self) -> tuple[GoodId, Money] | None:
        """Best good to chase, or None when no nonnegative surplus remains."""
        best: tuple[Money, GoodId] | None = None
        for g in sorted(self.values):
            p = self.views[g].price if g in self.views else 0
            surplus = self.values[g] - p - self.config.delta_buy
            if surplus >= 0 and (best is None or surplus > best[0]):
                best = (surplus, g)
        if best is None:
            return None
        g = best[1]
        p = self.views[g].price if g in self.views else 0
        return g, p + self.config.delta_buy

    def _decide(self) -> list[BidMessage] | None:
        """Planned bids; None means the consumer should mark itself stopped."""
        if self.stopped or self.winning_some_good():
            return []
        target = self._target()
        if target is None:
            return None
        g, price = target
        if g in self.standing and price <= self.standing[g]:
            return []
        return [BidMessage(self.id, g, BUY, (price,), self.sent_bid_id.get(g, 0) + 1)]

    def react(self, messages: list) -> list[BidMessage]:
        self._ingest(messages)
        planned = self._decide()
        if planned is None:
            self.stopped = True
            return []
        out = []
        for bid in planned:
            self.standing[bid.good] = bid.prices[0]
            out.append(
                BidMessage(bid.bidder, bid.good, bid.side, bid.prices, self._next_bid_id(bid.good))
            )
        return out

    def would_bid(self) -> bool:
        return bool(self._decide())


@dataclass
class InputSlot:
    good: GoodId
    unit: int
    standing: Money = 0
    perceived: Money | None = None  # unknown until the first quote arrives


class ProducerAgent(AgentBase):
    def __init__(self, producer: Producer, config: PolicyConfig) -> None:
        super().__init__()
        self.id = producer.id
        self.output = producer.output
        self.cost = producer.cost
        self.config = config
        self.slots = [InputSlot(g, k) for g, k in producer.input_edges()]
        self.slots_by_good: dict[GoodId, list[InputSlot]] = {}
        for s in self.slots:
            self.slots_by_good.setdefault(s.good, []).append(s)
        self.beta: Money | None = None  # standing output offer
        self.last_basis: Money | None = None  # perceived-cost total at last offer

    def start(self) -> list[BidMessage]:
        out = []
        for g in sorted(self.slots_by_good):
            prices = tuple(0 for _ in self.slots_by_good[g])
            out.append(BidMessage(self.id, g, BUY, prices, self._next_bid_id(g)))
        if not self.slots:
            basis = self.cost if self.config.include_cost else 0
            self.beta = basis
            self.last_basis = basis
            out.append(BidMessage(self.id, self.output, SELL, (basis,), self._next_bid_id(self.output)))
        return out

    # -- beliefs ----------------------------------------------------------

    def _refresh_perceived(self) -> None:
        for g, slots in self.slots_by_good.items():
            view = self.views.get(g)
            if view is None or not view.seen:
                continue
            for idx, slot in enumerate(slots):
                won = idx < len(view.winning) and view.winning[idx] == 1
                if won:
                    slot.perceived = view.price
                else:
                    slot.perceived = max(view.ask, view.price + self.config.delta_buy)

    def all_inputs_quoted(self) -> bool:
        return all(s.perceived is not None for s in self.slots)

    def _basis(self) -> Money:
        total = sum(s.perceived for s in self.slots)
        return total + (self.cost if self.config.include_cost else 0)

    def winning_output_belief(self) -> bool:
        """Winning per the last consistent output quote; no offer means losing.

        The plain policy intentionally consults the standing offer's quote
        even when a newer output offer is still in flight.
        """
        if self.beta is None:
            return False
        view = self.views.get(self.output)
        return bool(view and view.seen and sum(view.winning) > 0)

    def _decide(self) -> tuple[BidMessage | None, list[BidMessage]]:
        """(output bid, input bids) the producer would place right now."""
        output_bid = None
        if self.all_inputs_quoted() and self.slots:
            basis = self._basis()
            if self.beta is None:
                output_bid = BidMessage(self.id, self.output, SELL, (basis,), 0)
            elif self.last_basis is not None and basis > self.last_basis:
                price = max(self.beta + self.config.delta_sell, basis)
                if price != self.beta:
                    output_bid = BidMessage(self.id, self.output, SELL, (price,), 0)

        if self.config.variant == SAFE:
            may_raise = (
                output_bid is None
                and self.winning_output_belief()
                and self.view_current(self.output)
            )
        else:
            may_raise = self.winning_output_belief()

        input_bids = []
        if may_raise:
            for g in sorted(self.slots_by_good):
                view = self.views.get(g)
                if view is None or not view.seen or not self.view_current(g):
                    continue
                slots = self.slots_by_good[g]
                raised = False
                prices = []
                for idx, slot in enumerate(slots):
                    won = idx < len(view.winning) and view.winning[idx] == 1
                    if not won:
                        prices.append(slot.standing + self.config.delta_buy)
                        raised = True
                    else:
                        prices.append(slot.standing)
                if raised:
                    input_bids.append(BidMessage(self.id, g, BUY, tuple(prices), 0))
        return output_bid, input_bids

    def react(self, messages: list) -> list[BidMessage]:
        self._ingest(messages)
        self._refresh_perceived()
        output_bid, input_bids = self._decide()
        out = []
        if output_bid is not None:
            self.beta = output_bid.prices[0]
            self.last_basis = self._basis()
            out.append(
                BidMessage(self.id, self.output, SELL, output_bid.prices, self._next_bid_id(self.output))
            )
        for bid in input_bids:
            for slot, price in zip(self.slots_by_good[bid.good], bid.prices):
                slot.standing = price
            out.append(
                BidMessage(self.id, bid.good, BUY, bid.prices, self._next_bid_id(bid.good))
            )
        return out

    def would_bid(self) -> bool:
        output_bid, input_bids = self._decide()
        return output_bid is not None or bool(input_bids)


def perceived_cost(winning: bool, price: Money, ask: Money, delta_buy: Money) -> Money:
    """Perceived acquisition cost of one input offer given its latest quote."""
    if winning:
        return price
    return max(ask, price + delta_buy)


def is_active(producer_id: AgentId, clearing: Clearing) -> bool:
    """A producer is active iff its output offer matched in the clearing."""
    return any(c.seller == producer_id for c in clearing.contracts)


def exposure(producer_id: AgentId, clearings: dict[GoodId, Clearing], output: GoodId) -> Money:
    """Total price payable for won inputs when the output did not sell."""
    out_clearing = clearings.get(output)
    if out_clearing is not None and is_active(producer_id, out_clearing):
        return 0
    total = 0
    for good, clearing in clearings.items():
        if good == output:
            continue
        total += sum(c.price for c in clearing.contracts if c.buyer == producer_id)
    return total


def build_agents(net, config: PolicyConfig) -> dict[AgentId, AgentBase]:
    """Instantiate policy agents for a network, honoring per-agent overrides."""
    overrides = net.policy_overrides.get("agents", {}) if net.policy_overrides else {}

    def cfg_for(aid: AgentId) -> PolicyConfig:
        o = overrides.get(aid)
        if not o:
            return config
        return PolicyConfig(
            variant=o.get("variant", config.variant),
            include_cost=o.get("include-cost", config.include_cost),
            delta_buy=config.delta_buy,
            delta_sell=config.delta_sell,
        )

    agents: dict[AgentId, AgentBase] = {}
    for c in net.consumers:
        agents[c.id] = ConsumerAgent(c, cfg_for(c.id))
    for p in net.producers:
        agents[p.id] = ProducerAgent(p, cfg_for(p.id))
    return agents
