"""One ascending (M+1)st-price auction per good.

The auction keeps one standing bid per registered agent (a list of unit
offers, all-buy or all-sell), enforces the ascending-offer restriction, and
prices every clearing at the (M+1)st highest offer over all offers, where M
is the number of sell offers.  The ask price is the Mth highest offer.  Books
shorter than M+1 (or M) offers are padded with zero-price phantom entries;
with no sell offers at all the ask equals the price.

Ties at the clearing price are resolved by temporal precedence: strict
winners always trade, and offers exactly at the price are promoted, earliest
arrival first, only as needed to equalize winning-buy and winning-sell
counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .money import Money
from .netmodel import AgentId, GoodId

BUY = "buy"
SELL = "sell"


@dataclass(frozen=True)
class Offer:
    bidder: AgentId
    side: str
    price: Money
    unit: int  # slot subscript within the bidder's bid, 1-based
    arrival_seq: tuple[int, int]  # (bid arrival counter, slot) for precedence


@dataclass(frozen=True)
class BidMessage:
    """Replaces the bidder's standing offers in one auction wholesale."""

    bidder: AgentId
    good: GoodId
    side: str
    prices: tuple[Money, ...]  # price per unit slot, slot k = prices[k-1]
    bid_id: int


@dataclass(frozen=True)
class PriceQuote:
    good: GoodId
    price: Money
    ask: Money
    winning: tuple[int, ...]  # per slot of the recipient's standing offers
    bid_id: int  # echo of the recipient's most recent accepted bid


@dataclass(frozen=True)
class Rejection:
    good: GoodId
    bid_id: int
    reason: str


@dataclass(frozen=True)
class Contract:
    buyer: AgentId
    buyer_unit: int
    seller: AgentId
    seller_unit: int
    good: GoodId
    price: Money


@dataclass
class Clearing:
    price: Money
    ask: Money
    contracts: list[Contract]


class AuctionClosedError(RuntimeError):
    pass


class AuctionOpenError(RuntimeError):
    """clear() was invoked before the kernel signalled quiescence."""


@dataclass
class AuctionState:
    good: GoodId
    delta_buy: Money
    delta_sell: Money
    registered: set[AgentId] = field(default_factory=set)
    offers: dict[AgentId, list[Offer]] = field(default_factory=dict)
    last_bid_id: dict[AgentId, int] = field(default_factory=dict)
    first_quote_issued: bool = False
    closed: bool = False
    _arrivals: int = 0

    def register(self, bidder: AgentId) -> None:
        self.registered.add(bidder)

    def has_bid(self, bidder: AgentId) -> bool:
        return bidder in self.offers

    def all_initial_bids_in(self) -> bool:
        return all(a in self.offers for a in self.registered)

    def submit_bid(self, msg: BidMessage) -> Rejection | None:
        """Accept or reject a bid; on accept the standing offers are replaced.

        Unchanged slot prices keep their original arrival precedence; raised
        slots are stamped with a fresh arrival sequence.
        """
        if self.closed:
            raise AuctionClosedError(f"auction {self.good} already cleared")
        if msg.side not in (BUY, SELL):
            return Rejection(self.good, msg.bid_id, "mixed-sides")
        if self.first_quote_issued and msg.bidder not in self.offers:
            return Rejection(self.good, msg.bid_id, "unregistered-after-open")
        old = self.offers.get(msg.bidder, [])
        if old and old[0].side != msg.side:
            return Rejection(self.good, msg.bid_id, "mixed-sides")
        if len(msg.prices) < len(old):
            return Rejection(self.good, msg.bid_id, "ascending-violation")
        delta = self.delta_buy if msg.side == BUY else self.delta_sell
        old_sorted = sorted(old, key=lambda o: -o.price)
        new_sorted = sorted(msg.prices, reverse=True)
        for prev, new in zip(old_sorted, new_sorted):
            if new != prev.price and new < prev.price + delta:
                return Rejection(self.good, msg.bid_id, "ascending-violation")
        self._arrivals += 1
        old_by_slot = {o.unit: o for o in old}
        replacement = []
        for slot, price in enumerate(msg.prices, start=1):
            prior = old_by_slot.get(slot)
            if prior is not None and prior.price == price:
                seq = prior.arrival_seq
            else:
                seq = (self._arrivals, slot)
            replacement.append(Offer(msg.bidder, msg.side, price, slot, seq))
        self.offers[msg.bidder] = replacement
        self.last_bid_id[msg.bidder] = msg.bid_id
        return None

    # -- clearing ---------------------------------------------------------

    def all_offers(self) -> list[Offer]:
        return [o for offers in self.offers.values() for o in offers]

    def compute_clearing(self) -> Clearing:
        """Current hypothetical clearing: price, ask and one-to-one matches."""
        offers = self.all_offers()
        sells = [o for o in offers if o.side == SELL]
        buys = [o for o in offers if o.side == BUY]
        m = len(sells)
        prices = sorted((o.price for o in offers), reverse=True)
        prices += [0] * max(0, m + 1 - len(prices))
        price = prices[m]
        ask = prices[m - 1] if m >= 1 else price
        win_buys = sorted(
            (o for o in buys if o.price > price), key=lambda o: (-o.price, o.arrival_seq)
        )
        win_sells = sorted(
            (o for o in sells if o.price < price), key=lambda o: (o.price, o.arrival_seq)
        )
        target = max(len(win_buys), len(win_sells))
        tied_buys = sorted((o for o in buys if o.price == price), key=lambda o: o.arrival_seq)
        tied_sells = sorted((o for o in sells if o.price == price), key=lambda o: o.arrival_seq)
        win_buys += tied_buys[: target - len(win_buys)]
        win_sells += tied_sells[: target - len(win_sells)]
        contracts = [
            Contract(b.bidder, b.unit, s.bidder, s.unit, self.good, price)
            for b, s in zip(win_buys, win_sells)
        ]
        return Clearing(price, ask, contracts)

    def winning_slots(self, bidder: AgentId, clearing: Clearing | None = None) -> tuple[int, ...]:
        """Per-slot winning quantity (0/1) for one bidder's standing offers."""
        clearing = clearing or self.compute_clearing()
        won = set()
        for c in clearing.contracts:
            if c.buyer == bidder:
                won.add(c.buyer_unit)
            if c.seller == bidder:
                won.add(c.seller_unit)
        slots = self.offers.get(bidder, [])
        return tuple(1 if o.unit in won else 0 for o in slots)

    def quote_for(self, recipient: AgentId, clearing: Clearing | None = None) -> PriceQuote:
        clearing = clearing or self.compute_clearing()
        return PriceQuote(
            good=self.good,
            price=clearing.price,
            ask=clearing.ask,
            winning=self.winning_slots(recipient, clearing),
            bid_id=self.last_bid_id.get(recipient, 0),
        )

    def close(self) -> None:
        self.closed = True

    def clear(self) -> Clearing:
        """Final binding clearing; only legal once the kernel closed the book."""
        if not self.closed:
            raise AuctionOpenError(f"auction {self.good} has not been closed")
        return self.compute_clearing()


def brute_force_winners(
    buys: list[tuple[Money, int]], sells: list[tuple[Money, int]]
) -> tuple[Money, Money, set[int], set[int]]:
    """Independent winner-set oracle by exhaustive subset enumeration.

    Offers are (price, arrival) pairs with globally unique arrivals.  Returns
    (price, ask, winning buy arrivals, winning sell arrivals).  Enumerates
    every equal-cardinality pair of offer subsets and keeps the unique pair
    that (a) contains all strict winners, (b) contains no strict loser,
    (c) respects temporal precedence among offers tied at the price, and
    (d) has cardinality max(|strict buys|, |strict sells|).
    """
    from itertools import combinations

    m = len(sells)
    all_prices = sorted((p for p, _ in buys + sells), reverse=True)
    all_prices += [0] * max(0, m + 1 - len(all_prices))
    price = all_prices[m]
    ask = all_prices[m - 1] if m >= 1 else price
    strict_buys = {a for p, a in buys if p > price}
    strict_sells = {a for p, a in sells if p < price}
    tied_buys = sorted(a for p, a in buys if p == price)
    tied_sells = sorted(a for p, a in sells if p == price)
    target = max(len(strict_buys), len(strict_sells))
    candidates = []
    for nb in range(len(tied_buys) + 1):
        for chosen_b in combinations(tied_buys, nb):
            # precedence: a tied offer may win only if all earlier tied ones do
            if list(chosen_b) != tied_buys[:nb]:
                continue
            bset = strict_buys | set(chosen_b)
            if len(bset) != target:
                continue
            for ns in range(len(tied_sells) + 1):
                for chosen_s in combinations(tied_sells, ns):
                    if list(chosen_s) != tied_sells[:ns]:
                        continue
                    sset = strict_sells | set(chosen_s)
                    if len(sset) == target:
                        candidates.append((bset, sset))
    assert len(candidates) == 1, f"winner rule is ambiguous: {candidates}"
    bset, sset = candidates[0]
    return price, ask, bset, sset
