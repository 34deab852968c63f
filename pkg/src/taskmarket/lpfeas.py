"""Exact rational linear feasibility by Fourier-Motzkin elimination.

Constraints are kept as ``sum(coeff[v] * x[v]) <= bound`` rows over Fraction
coefficients.  Variables are eliminated in a caller-chosen order; on success
a witness is recovered by back-substitution, and on failure the solver
reports the contradictory pair of bounds on the variable where the clash
surfaced.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class Constraint:
    """sum(coeffs[v] * x[v]) <= bound"""

    coeffs: tuple[tuple[str, Fraction], ...]
    bound: Fraction
    label: str = ""

    @classmethod
    def make(cls, coeffs: dict[str, Fraction | int], bound, label: str = "") -> "Constraint":
        items = tuple(
            sorted((v, Fraction(c)) for v, c in coeffs.items() if Fraction(c) != 0)
        )
        return cls(items, Fraction(bound), label)

    def coeff_map(self) -> dict[str, Fraction]:
        return dict(self.coeffs)


@dataclass
class Clash:
    """Contradictory derived bounds: lower > upper for one variable."""

    variable: str
    lower: Fraction
    upper: Fraction
    lower_label: str = ""
    upper_label: str = ""


@dataclass
class FeasibilityResult:
    feasible: bool
    witness: dict[str, Fraction] | None = None
    clash: Clash | None = None


def _canonical(con: Constraint) -> tuple:
    if not con.coeffs:
        return ((), con.bound)
    scale = abs(con.coeffs[0][1])
    return (tuple((v, c / scale) for v, c in con.coeffs), con.bound / scale)


def solve(constraints: list[Constraint], order: list[str]) -> FeasibilityResult:
    """Decide feasibility of the system over the variables in ``order``.

    Variables are eliminated front to back, so put the variable whose derived
    bounds should be reported on infeasibility at the end of the order.
    """
    rows = list(constraints)
    eliminated: list[tuple[str, list[Constraint], list[Constraint]]] = []
    for idx, var in enumerate(order):
        lowers: list[Constraint] = []  # rows giving x >= ... (negative coeff)
        uppers: list[Constraint] = []  # rows giving x <= ... (positive coeff)
        rest: list[Constraint] = []
        for con in rows:
            c = con.coeff_map().get(var)
            if c is None:
                rest.append(con)
            elif c > 0:
                uppers.append(con)
            else:
                lowers.append(con)
        if idx == len(order) - 1:
            clash = _last_variable_clash(var, lowers, uppers)
            if clash is not None:
                return FeasibilityResult(False, clash=clash)
        new_rows = dict((_canonical(r), r) for r in rest)
        for lo in lowers:
            for up in uppers:
                combined = _combine(lo, up, var)
                if combined.coeffs:
                    new_rows.setdefault(_canonical(combined), combined)
                elif combined.bound < 0:
                    # 0 <= negative: contradiction without a single pivot var
                    return FeasibilityResult(
                        False,
                        clash=Clash(var, Fraction(0), combined.bound, lo.label, up.label),
                    )
        for con in rest:
            if not con.coeffs and con.bound < 0:
                return FeasibilityResult(False, clash=Clash(var, Fraction(0), con.bound))
        rows = list(new_rows.values())
        eliminated.append((var, lowers, uppers))
    for con in rows:
        if not con.coeffs and con.bound < 0:
            return FeasibilityResult(False, clash=Clash(order[-1] if order else "", Fraction(0), con.bound))
    witness = _back_substitute(eliminated)
    return FeasibilityResult(True, witness=witness)


def _combine(lo: Constraint, up: Constraint, var: str) -> Constraint:
    cl = lo.coeff_map()
    cu = up.coeff_map()
    a = -cl[var]  # > 0
    b = cu[var]  # > 0
    coeffs: dict[str, Fraction] = {}
    for v, c in cl.items():
        if v != var:
            coeffs[v] = coeffs.get(v, Fraction(0)) + c * b
    for v, c in cu.items():
        if v != var:
            coeffs[v] = coeffs.get(v, Fraction(0)) + c * a
    return Constraint.make(coeffs, lo.bound * b + up.bound * a)


def _bounds_for(var: str, lowers: list[Constraint], uppers: list[Constraint], values: dict[str, Fraction]):
    lo_best: tuple[Fraction, str] | None = None
    up_best: tuple[Fraction, str] | None = None
    for con in lowers:
        cm = con.coeff_map()
        rest = sum((c * values[v] for v, c in cm.items() if v != var), Fraction(0))
        bound = (con.bound - rest) / cm[var]  # negative coeff: x >= bound
        if lo_best is None or bound > lo_best[0]:
            lo_best = (bound, con.label)
    for con in uppers:
        cm = con.coeff_map()
        rest = sum((c * values[v] for v, c in cm.items() if v != var), Fraction(0))
        bound = (con.bound - rest) / cm[var]
        if up_best is None or bound < up_best[0]:
            up_best = (bound, con.label)
    return lo_best, up_best


def _last_variable_clash(var, lowers, uppers) -> Clash | None:
    # after eliminating everything else, remaining rows mention only var
    if any(len(c.coeffs) > 1 for c in lowers + uppers):
        return None
    lo, up = _bounds_for(var, lowers, uppers, {})
    if lo is not None and up is not None and lo[0] > up[0]:
        return Clash(var, lo[0], up[0], lo[1], up[1])
    return None


def _back_substitute(eliminated) -> dict[str, Fraction]:
    values: dict[str, Fraction] = {}
    for var, lowers, uppers in reversed(eliminated):
        lo, up = _bounds_for(var, lowers, uppers, values)
        if lo is not None:
            values[var] = lo[0]
        elif up is not None:
            values[var] = min(up[0], Fraction(0)) if up[0] < 0 else Fraction(0)
        else:
            values[var] = Fraction(0)
        if lo is not None and up is not None:
            assert lo[0] <= up[0], "back-substitution hit an infeasible interval"
    return values
