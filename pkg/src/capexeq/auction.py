"""Forward capacity auction clearing.

Maximizes capacity-market welfare

    sum_c [A_c * d_c + 1/2 * M_c * d_c^2]  -  sum_u B_u * m_u * Pmax_u
    s.t.  sum_u derate_u * m_u * Pmax_u = sum_c d_c,
          0 <= d_c <= D_c,   0 <= m_u <= 1

by intersecting the aggregate marginal-value (demand) curve with the
derated-cost (supply) curve directly: after eliminating the balance
constraint the problem is a one-dimensional concave maximization, so no QP
solver is needed.  The clearing price is the dual of the balance constraint;
when the crossing leaves an interval of valid duals we report the
seller-favorable endpoint: the marginal value of the last cleared MW, capped
by the ask of the cheapest uncleared offer.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DemandSegment:
    """One administratively set slice of the capacity demand curve.

    ``price_intercept`` is the willingness to pay for the first MW,
    ``slope`` (<= 0) its decline per MW, ``max_quantity`` the slice width.
    """

    price_intercept: float
    slope: float
    max_quantity: float

    def __post_init__(self):
        if self.max_quantity < 0:
            raise ValueError("segment max_quantity must be >= 0")
        if self.slope > 0:
            raise ValueError("segment slope must be <= 0 (downward-sloping demand)")


@dataclass(frozen=True)
class CapacityOffer:
    """A project offering ``pmax`` nameplate MW at ``bid`` per nameplate MW.

    Only ``derate * pmax`` MW count toward the cleared capacity, so the
    effective ask per cleared MW is ``bid / derate``.
    """

    bid: float
    pmax: float
    derate: float

    def __post_init__(self):
        if self.bid < 0:
            raise ValueError("offer bid must be >= 0")
        if self.pmax <= 0:
            raise ValueError("offer pmax must be > 0")
        if not 0.0 <= self.derate <= 1.0:
            raise ValueError("offer derate must lie in [0, 1]")


@dataclass(frozen=True)
class AuctionResult:
    cleared_demand: tuple[float, ...]
    cleared_fraction: tuple[float, ...]
    clearing_price: float
    cleared_mw: float
    welfare: float


@dataclass
class _Piece:
    # one stretch of the aggregate demand curve, marginal value falling
    # linearly from v_hi to v_lo over `width` MW
    width: float
    v_hi: float
    v_lo: float
    shares: list[tuple[int, float]]  # (segment index, fraction of this piece)
    used: float = 0.0

    def value_at_used(self) -> float:
        if self.width == 0.0 or self.v_hi == self.v_lo:
            return self.v_hi
        return self.v_hi + (self.v_lo - self.v_hi) * self.used / self.width


def _demand_pieces(segments: list[DemandSegment]) -> list[_Piece]:
    flats = []
    sloped = []
    for c, seg in enumerate(segments):
        if seg.max_quantity <= 0:
            continue
        if seg.slope == 0.0:
            flats.append(_Piece(seg.max_quantity, seg.price_intercept, seg.price_intercept, [(c, 1.0)]))
        else:
            sloped.append(c)

    pieces = list(flats)
    if sloped:
        levels = set()
        for c in sloped:
            seg = segments[c]
            levels.add(seg.price_intercept)
            levels.add(seg.price_intercept + seg.slope * seg.max_quantity)
        for p in flats:
            levels.add(p.v_hi)  # break sloped stretches where flat slices interleave
        ordered = sorted(levels, reverse=True)
        for v_hi, v_lo in zip(ordered, ordered[1:]):
            shares = []
            width = 0.0
            for c in sloped:
                seg = segments[c]
                bottom = seg.price_intercept + seg.slope * seg.max_quantity
                if seg.price_intercept >= v_hi and bottom <= v_lo:
                    w = (v_hi - v_lo) / (-seg.slope)
                    shares.append((c, w))
                    width += w
            if width > 0.0:
                pieces.append(_Piece(width, v_hi, v_lo, [(c, w / width) for c, w in shares]))

    # descending marginal value; flat slices ahead of the sloped stretch that
    # starts at the same level; declaration order breaks remaining ties
    pieces.sort(key=lambda p: (-p.v_hi, 0 if p.v_hi == p.v_lo else 1, p.shares[0][0]))
    return pieces


def clear_auction(segments: list[DemandSegment], offers: list[CapacityOffer]) -> AuctionResult:
    """Clear the capacity auction; see the module docstring for conventions.

    Always feasible: with no viable offers everything clears at zero and the
    price is the intercept of the highest-value segment.
    """
    if len(segments) == 0:
        raise ValueError("auction needs at least one demand segment")

    pieces = _demand_pieces(segments)
    supply = sorted(
        (
            (off.bid / off.derate, off.derate * off.pmax, u)
            for u, off in enumerate(offers)
            if off.derate > 0.0
        ),
        key=lambda item: item[0],
    )

    with_width = [seg.price_intercept for seg in segments if seg.max_quantity > 0]
    v_at_zero = max(with_width) if with_width else max(seg.price_intercept for seg in segments)

    cleared_demand = [0.0] * len(segments)
    cleared_fraction = [0.0] * len(offers)
    cleared = 0.0
    last_value = v_at_zero
    clearing_price = None
    piece_idx = 0

    for ask, width, u in supply:
        taken = 0.0
        full = False
        while piece_idx < len(pieces):
            piece = pieces[piece_idx]
            if piece.used >= piece.width:
                piece_idx += 1
                continue
            if piece.value_at_used() < ask:
                break  # this and every later offer is priced out
            if ask <= piece.v_lo:
                avail = piece.width - piece.used
                hits_cutoff = False
            else:
                cutoff = piece.width * (piece.v_hi - ask) / (piece.v_hi - piece.v_lo)
                avail = cutoff - piece.used
                hits_cutoff = True
            if avail <= 0.0:
                break
            need = width - taken
            if need <= avail:
                # offer exhausts inside this piece (a tie counts as a full clear)
                piece.used += need
                for c, share in piece.shares:
                    cleared_demand[c] += need * share
                cleared += need
                last_value = piece.value_at_used()
                taken = width
                full = True
                break
            for c, share in piece.shares:
                cleared_demand[c] += avail * share
            cleared += avail
            taken += avail
            if hits_cutoff:
                piece.used += avail
                last_value = ask  # marginal value at the cutoff equals the ask
                break
            piece.used = piece.width
            last_value = piece.v_lo
            piece_idx += 1

        cleared_fraction[u] = 1.0 if full else taken / width
        if not full:
            # crossing at or inside this offer: a partially cleared offer pins
            # the dual at its ask; an untouched one only caps it
            clearing_price = ask if taken > 0.0 else min(last_value, ask)
            break

    if clearing_price is None:
        # every viable offer cleared in full; the demand side sets the price
        clearing_price = last_value

    welfare = sum(
        seg.price_intercept * d + 0.5 * seg.slope * d * d
        for seg, d in zip(segments, cleared_demand)
    ) - sum(off.bid * m * off.pmax for off, m in zip(offers, cleared_fraction))

    return AuctionResult(
        cleared_demand=tuple(cleared_demand),
        cleared_fraction=tuple(cleared_fraction),
        clearing_price=clearing_price,
        cleared_mw=cleared,
        welfare=welfare,
    )
