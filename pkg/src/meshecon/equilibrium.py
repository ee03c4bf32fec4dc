"""Density equilibria: free entry, club optimum, and congestion scaling.

Free entry: nodes keep joining while a marginal node's total expected
utility (originator + intermediate + outsider) is positive, so the
equilibrium density is the largest downcrossing of total utility through
zero — entry accumulates until utility hits zero from above, and any
smaller root is unstable under that dynamic. The curve is scanned on a
grid, then the crossing is refined by bisection on the residual.

Club: an entry-controlling club admits members up to the density that
maximizes the same per-node total under competitive relay pricing (not
aggregate welfare n^2 x per-node utility — the per-node sum is the club
member's objective). Grid scan plus golden-section refinement; a maximum
pinned to a bracket edge is surfaced as BoundaryOptimum rather than
reported as an interior solution, since its economics are ambiguous.

Density is a continuous control throughout; "slots" map to choosing n.
Grid scans are pure and independent per density, so callers may evaluate
them concurrently; the refinement phases are sequential.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BoundaryOptimum, NoCrossing, NumericsError, ParamError
from .model import ModelParams, connect_probability, max_peers, params_to_dict, validate
from .regimes import (
    DEFAULT_TOL,
    Regime,
    RegimeUtilities,
    UTILITIES_CSV_HEADER,
    competitive_price,
    intermediate_count,
    leapfrog_threshold,
    regime_utilities,
)

__all__ = [
    "DensityBracket",
    "EquilibriumKind",
    "EquilibriumResult",
    "SolverDiagnostics",
    "RegimeComparison",
    "total_eu",
    "default_bracket",
    "free_entry_density",
    "club_optimal_density",
    "congestion_scaling_exponent",
    "compare_regimes",
]

RESIDUAL_TOL = 1e-9          # |total utility| at a reported free-entry root
DENSITY_TOL = 1e-6           # golden-section interval width at the club optimum
BRACKET_CAP = 1e5            # hard ceiling for automatic bracket growth
SCALING_MIN_P = 0.99         # demand saturation required for a clean exponent fit

_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class DensityBracket:
    """Density search interval with a scan resolution."""

    n_lo: float
    n_hi: float
    grid_points: int = 200

    def validate_for(self, template: ModelParams) -> "DensityBracket":
        if not (1 / template.d_max < self.n_lo < self.n_hi):
            raise ParamError(
                f"bracket must satisfy 1/d_max < n_lo < n_hi, got "
                f"[{self.n_lo!r}, {self.n_hi!r}] with d_max={template.d_max!r}"
            )
        if self.grid_points < 2:
            raise ParamError(f"grid_points must be >= 2, got {self.grid_points!r}")
        return self


class EquilibriumKind(Enum):
    FREE_ENTRY = "FREE_ENTRY"
    CLUB_OPTIMUM = "CLUB_OPTIMUM"


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    n_lo: float
    n_hi: float
    grid_points: int
    residual: float
    notes: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "n_lo": self.n_lo,
            "n_hi": self.n_hi,
            "grid_points": self.grid_points,
            "residual": self.residual,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class EquilibriumResult:
    """A solved density with the utilities prevailing there."""

    kind: EquilibriumKind
    regime: Regime
    n_star: float
    total_eu_at_n_star: float
    utilities: RegimeUtilities
    diagnostics: SolverDiagnostics

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "regime": self.regime.value,
            "n_star": self.n_star,
            "total_eu_at_n_star": self.total_eu_at_n_star,
            "utilities": self.utilities.to_json_dict(),
            "diagnostics": self.diagnostics.to_json_dict(),
        }


def total_eu(
    template: ModelParams, n: float, regime: Regime, tol: float = DEFAULT_TOL
) -> float:
    """Total per-node expected utility at density n (template's other
    parameters unchanged)."""
    return regime_utilities(template.with_n(n), regime, tol).total


def default_bracket(
    template: ModelParams,
    regime: Regime,
    grid_points: int = 200,
    tol: float = DEFAULT_TOL,
) -> DensityBracket:
    """Bracket [2/d_max, n_hi] with n_hi grown by doubling until total
    utility turns negative (capped at BRACKET_CAP).

    With the lower edge at 2/d_max the peering formulas are non-degenerate
    over most of the distance range. If the cap is reached with utility
    still positive the bracket ends at the cap; downstream scans then report
    the absence of a crossing rather than inventing one.
    """
    n_lo = 2 / template.d_max
    n_hi = 2 * n_lo
    while total_eu(template, n_hi, regime, tol) >= 0 and n_hi < BRACKET_CAP:
        n_hi = min(2 * n_hi, BRACKET_CAP)
    return DensityBracket(n_lo=n_lo, n_hi=n_hi, grid_points=grid_points)


def _scan(template, regime, bracket, tol):
    grid = np.linspace(bracket.n_lo, bracket.n_hi, bracket.grid_points)
    values = np.array([total_eu(template, float(x), regime, tol) for x in grid])
    return grid, values


def free_entry_density(
    template: ModelParams,
    regime: Regime,
    bracket: DensityBracket | None = None,
    tol: float = DEFAULT_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> EquilibriumResult:
    """Solve total utility = 0 for density under free entry.

    Scans the bracket grid for sign changes from positive to negative and
    refines the largest such downcrossing by bisection until the residual
    |total utility| falls to residual_tol. Raises NoCrossing when the curve
    never passes from positive to negative inside the bracket.
    """
    validate(template)
    if bracket is None:
        bracket = default_bracket(template, regime)
    bracket.validate_for(template)
    grid, values = _scan(template, regime, bracket, tol)

    root = None
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            root = (float(grid[i]), float(grid[i]), 0.0, 0)
        elif values[i] > 0 and values[i + 1] < 0:
            root = (float(grid[i]), float(grid[i + 1]), None, None)
    if values[-1] == 0.0:
        root = (float(grid[-1]), float(grid[-1]), 0.0, 0)
    if root is None:
        raise NoCrossing(regime, bracket.n_lo, bracket.n_hi)

    lo, hi, residual, iterations = root
    if residual is None:
        f_lo = total_eu(template, lo, regime, tol)
        iterations = 0
        mid, f_mid = lo, f_lo
        while True:
            mid = 0.5 * (lo + hi)
            f_mid = total_eu(template, mid, regime, tol)
            iterations += 1
            if abs(f_mid) <= residual_tol or iterations >= 200:
                break
            if (f_lo > 0) == (f_mid > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        if abs(f_mid) > residual_tol:
            raise NumericsError(
                f"bisection stalled at n={mid!r} with residual {f_mid!r} "
                f"above {residual_tol!r}"
            )
        n_star, residual = mid, f_mid
    else:
        n_star = lo

    utilities = regime_utilities(template.with_n(n_star), regime, tol)
    return EquilibriumResult(
        kind=EquilibriumKind.FREE_ENTRY,
        regime=regime,
        n_star=n_star,
        total_eu_at_n_star=utilities.total,
        utilities=utilities,
        diagnostics=SolverDiagnostics(
            iterations=iterations,
            n_lo=bracket.n_lo,
            n_hi=bracket.n_hi,
            grid_points=bracket.grid_points,
            residual=residual,
        ),
    )


def club_optimal_density(
    template: ModelParams,
    bracket: DensityBracket | None = None,
    tol: float = DEFAULT_TOL,
    density_tol: float = DENSITY_TOL,
) -> EquilibriumResult:
    """Maximize per-node total utility under competitive peering over density.

    Grid scan locates the hump; golden-section refines the argmax to
    density_tol. A grid argmax on a bracket edge raises BoundaryOptimum.
    """
    regime = Regime.PEERING_PERFECT_COMPETITION
    validate(template)
    if bracket is None:
        bracket = default_bracket(template, regime, tol=tol)
    bracket.validate_for(template)
    grid, values = _scan(template, regime, bracket, tol)

    k = int(np.argmax(values))
    if k == 0:
        raise BoundaryOptimum(float(grid[0]), "low", float(values[0]))
    if k == len(grid) - 1:
        raise BoundaryOptimum(float(grid[-1]), "high", float(values[-1]))

    notes = []
    rising = np.flatnonzero(np.diff(values[: k + 1]) < 0)
    falling = np.flatnonzero(np.diff(values[k:]) > 0)
    if len(rising) or len(falling):
        notes.append("multimodal grid profile")

    a, b = float(grid[k - 1]), float(grid[k + 1])
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1 = total_eu(template, x1, regime, tol)
    f2 = total_eu(template, x2, regime, tol)
    iterations = 0
    while (b - a) > density_tol and iterations < 300:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = total_eu(template, x2, regime, tol)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = total_eu(template, x1, regime, tol)
        iterations += 1
    n_club = 0.5 * (a + b)

    utilities = regime_utilities(template.with_n(n_club), regime, tol)
    if not (utilities.total >= 0):
        raise NumericsError(
            f"club optimum at n={n_club!r} has negative member utility "
            f"{utilities.total!r}; the objective should be nonnegative there"
        )
    return EquilibriumResult(
        kind=EquilibriumKind.CLUB_OPTIMUM,
        regime=regime,
        n_star=n_club,
        total_eu_at_n_star=utilities.total,
        utilities=utilities,
        diagnostics=SolverDiagnostics(
            iterations=iterations,
            n_lo=bracket.n_lo,
            n_hi=bracket.n_hi,
            grid_points=bracket.grid_points,
            residual=b - a,
            notes=tuple(notes),
        ),
    )


def congestion_scaling_exponent(
    template: ModelParams,
    regime: Regime,
    n_values,
    tol: float = DEFAULT_TOL,
) -> float:
    """Least-squares slope of log|outsider utility| against log density.

    Requires at least four densities, all with demand effectively saturated
    (P(N(d_max)) > 0.99) so the fit isolates the congestion term's growth.
    """
    n_values = [float(x) for x in n_values]
    if len(n_values) < 4:
        raise ParamError(f"need >= 4 densities for a fit, got {len(n_values)}")
    outs = []
    for n in n_values:
        p = template.with_n(n)
        if not (connect_probability(p, max_peers(p)) > SCALING_MIN_P):
            raise ParamError(
                f"density n={n!r} leaves demand unsaturated "
                f"(P <= {SCALING_MIN_P}); the congestion fit requires large P"
            )
        eu_out = regime_utilities(p, regime, tol).eu_outsider
        if eu_out == 0.0:
            raise ParamError(
                f"outsider utility is zero at n={n!r} (w=0?); log-log fit undefined"
            )
        outs.append(abs(eu_out))
    slope = np.polyfit(np.log(n_values), np.log(outs), 1)[0]
    return float(slope)


# --------------------------------------------------------------------------
# Regime comparison report

_SCALING_N_VALUES = (50.0, 100.0, 200.0, 400.0)


@dataclass(frozen=True)
class RegimeComparison:
    """One-stop comparison of the regimes on a parameter template.

    Solver findings (no crossing, boundary optimum) appear as string markers
    in place of numbers. leapfrog_profile rows are (d, threshold c(2D),
    competitive price c(D)) at the club density.
    """

    params: ModelParams
    free_entry_no_peering: EquilibriumResult | str
    free_entry_perfcomp: EquilibriumResult | str
    club: EquilibriumResult | str
    scaling_no_peering: float | str
    scaling_perfcomp: float | str
    leapfrog_profile: tuple = ()

    def has_findings(self) -> bool:
        return any(
            isinstance(x, str)
            for x in (
                self.free_entry_no_peering,
                self.free_entry_perfcomp,
                self.club,
            )
        )

    def solved_points(self):
        out = []
        for res in (self.free_entry_no_peering, self.free_entry_perfcomp, self.club):
            if isinstance(res, EquilibriumResult):
                out.append(res)
        return out

    def to_json_dict(self) -> dict:
        def enc(x):
            if isinstance(x, EquilibriumResult):
                return x.to_json_dict()
            return x

        return {
            "params": params_to_dict(self.params),
            "free_entry_no_peering": enc(self.free_entry_no_peering),
            "free_entry_perfcomp": enc(self.free_entry_perfcomp),
            "club": enc(self.club),
            "scaling_no_peering": self.scaling_no_peering,
            "scaling_perfcomp": self.scaling_perfcomp,
            "leapfrog_profile": [
                {"d": d, "threshold": thr, "competitive_price": cp}
                for d, thr, cp in self.leapfrog_profile
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def csv_rows(self) -> list:
        rows = [list(UTILITIES_CSV_HEADER)]
        for res in self.solved_points():
            rows.append(res.utilities.csv_row())
        return rows


def compare_regimes(
    template: ModelParams,
    bracket: DensityBracket | None = None,
    tol: float = DEFAULT_TOL,
) -> RegimeComparison:
    """Assemble the full comparison: free-entry densities, club density,
    scaling exponents, and the leapfrog price profile at the club density."""
    validate(template)

    def attempt(fn):
        try:
            return fn()
        except NoCrossing:
            return "NO_CROSSING"
        except BoundaryOptimum as exc:
            return f"BOUNDARY_OPTIMUM@{exc.n_boundary!r}"

    fe_np = attempt(
        lambda: free_entry_density(template, Regime.NO_PEERING, bracket, tol)
    )
    fe_pc = attempt(
        lambda: free_entry_density(
            template, Regime.PEERING_PERFECT_COMPETITION, bracket, tol
        )
    )
    club = attempt(lambda: club_optimal_density(template, bracket, tol))

    def scaling(regime):
        try:
            return congestion_scaling_exponent(
                template, regime, [x / template.d_max for x in _SCALING_N_VALUES], tol
            )
        except ParamError as exc:
            return f"UNDEFINED ({exc})"

    profile = ()
    if isinstance(club, EquilibriumResult):
        p_club = template.with_n(club.n_star)
        lo = 3 / p_club.n  # I(d) >= 1 from here
        if lo < p_club.d_max:
            ds = np.linspace(lo, p_club.d_max, 12)
            profile = tuple(
                (float(d), leapfrog_threshold(p_club, float(d)),
                 competitive_price(p_club, float(d)))
                for d in ds
                if intermediate_count(p_club, float(d)) >= 1
            )

    return RegimeComparison(
        params=template,
        free_entry_no_peering=fe_np,
        free_entry_perfcomp=fe_pc,
        club=club,
        scaling_no_peering=scaling(Regime.NO_PEERING),
        scaling_perfcomp=scaling(Regime.PEERING_PERFECT_COMPETITION),
        leapfrog_profile=profile,
    )
