"""
Typy dziedzinowe i wspólna matematyka dla wszystkich solverów.

Zawiera:
- funkcje potęgowe Φ_q(z) = |z|^{q-1} sign z (wektorowo po numpy),
- całkę θ z linearyzacji w postaci zamkniętej,
- funkcję źródła jako wielomian kawałkami z dokładnymi całkami,
- siatki na [-1, 1] oraz niezmienne kontenery wyników (profile, tabele).

Wszystkie obiekty są niezmienne po utworzeniu - można je współdzielić
między wątkami bez synchronizacji.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray, Sequence[float]]

# Próg degeneracji całki θ: |b| <= THETA_DEGENERACY * |a|
THETA_DEGENERACY = 1e-12
# Tolerancja sklejania przedziałów źródła
BREAKPOINT_TOL = 1e-14


# ============================================================
# Wyjątki
# ============================================================


class ConfigError(ValueError):
    """Błędna konfiguracja scenariusza (nieznany klucz, zła wartość)."""


class UnsupportedRegimeError(ValueError):
    """Reżim parametrów bez linearyzacji (p <= 2)."""


class SolverError(RuntimeError):
    """Bazowy błąd solvera numerycznego."""


class NoBracketError(SolverError):
    """Funkcja końca strzału nie zmienia znaku w rozszerzonym przedziale."""


class InfeasibleError(SolverError):
    """Każda próba strzału spycha u+H poniżej strażnika."""


class ToleranceError(SolverError):
    """Iteracja pierwiastka utknęła przed osiągnięciem tolerancji."""


class NewtonDivergedError(SolverError):
    """Newton nie zbiegł się na danym poziomie kontynuacji."""

    def __init__(self, message: str, level: int = 0):
        super().__init__(message)
        self.level = level


class JacobianSingularError(SolverError):
    """Osobliwy jakobian - raportuje osiągnięty poziom kontynuacji."""

    def __init__(self, message: str, level: int = 0):
        super().__init__(message)
        self.level = level


class CflViolation(SolverError):
    """Krok czasowy łamie warunek CFL; niesie sugerowany krok."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(message)
        self.suggested_dt = suggested_dt


# ============================================================
# Funkcje skalarne
# ============================================================


def _as_output(value: np.ndarray, like) -> Union[float, np.ndarray]:
    if np.ndim(like) == 0:
        return float(value)
    return value


def phi_pow(q: float, z: ArrayLike) -> Union[float, np.ndarray]:
    """
    Nieparzysta funkcja potęgowa Φ_q(z) = |z|^{q-1} sign z.

    Konwencja sign(0) = 0, więc Φ_q(0) = 0.

    Args:
        q: Wykładnik (> 1)
        z: Skalar lub tablica

    Returns:
        Wartość tego samego kształtu co z
    """
    if q <= 1:
        raise ValueError(f"Wykładnik q musi być > 1, otrzymano {q}")
    arr = np.asarray(z, dtype=float)
    return _as_output(np.sign(arr) * np.abs(arr) ** (q - 1.0), z)


def _psi(t: np.ndarray, p: float) -> np.ndarray:
    # ψ(t) = |t|^{p-2} t
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def theta_integral(a: ArrayLike, b: ArrayLike, p: float) -> Union[float, np.ndarray]:
    """
    Całka ∫_0^1 |a + θ b|^{p-2} dθ w postaci zamkniętej.

    Dla |b| powyżej progu degeneracji: (ψ(a+b) - ψ(a)) / ((p-1) b),
    ψ(t) = |t|^{p-2} t. Gdy a i a+b mają ten sam znak, a |b| <= |a|, różnica
    liczona jest przez expm1/log1p, bez utraty cyfr przy małym b/a. Poniżej
    progu: |a|^{p-2} z poprawką pierwszego rzędu; dla a = 0 wprost
    |b|^{p-2} / (p-1).
    """
    if p <= 1:
        raise ValueError(f"Wykładnik p musi być > 1, otrzymano {p}")
    a_arr, b_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    a_arr = a_arr.astype(float)
    b_arr = b_arr.astype(float)
    c = a_arr + b_arr

    if p < 2 and np.any((a_arr == 0.0) & (c == 0.0)):
        raise ValueError("Całka θ osobliwa: a = 0 i a + b = 0 przy p < 2")

    degenerate = (np.abs(b_arr) <= THETA_DEGENERACY * np.abs(a_arr)) | (a_arr == 0.0)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        same_sign = (
            (~degenerate)
            & (np.sign(c) == np.sign(a_arr))
            & (np.abs(b_arr) <= np.abs(a_arr))
        )
        ratio = np.where(same_sign, b_arr / np.where(a_arr == 0.0, 1.0, a_arr), 0.0)
        diff_same = _psi(a_arr, p) * np.expm1((p - 1.0) * np.log1p(ratio))
        diff_cross = _psi(c, p) - _psi(a_arr, p)
        diff = np.where(same_sign, diff_same, diff_cross)
        closed = diff / ((p - 1.0) * np.where(degenerate, 1.0, b_arr))

        abs_a = np.abs(a_arr)
        safe_a = np.where(a_arr == 0.0, 1.0, a_arr)
        limit = np.where(
            a_arr == 0.0,
            np.where(
                b_arr == 0.0,
                1.0 if p == 2 else 0.0,
                np.abs(b_arr) ** (p - 2.0) / (p - 1.0),
            ),
            abs_a ** (p - 2.0) * (1.0 + 0.5 * (p - 2.0) * b_arr / safe_a),
        )
    out = np.where(degenerate, limit, closed)
    out = np.maximum(out, 0.0)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out)
    return out


def require_linear_regime(p: float):
    """Linearyzacja i łańcuch funkcji Greena istnieją tylko dla p > 2."""
    if p <= 2:
        raise UnsupportedRegimeError(
            f"Linearyzacja wymaga p > 2 (otrzymano p = {p}); "
            "przypadek 1 < p < 2 pozostaje problemem otwartym"
        )


def truncate(value: ArrayLike, k: float) -> Union[float, np.ndarray]:
    """Obcięcie T_k(value) = max(-k, min(value, k))."""
    if k < 0:
        raise ValueError(f"Poziom obcięcia k musi być >= 0, otrzymano {k}")
    return _as_output(np.clip(np.asarray(value, dtype=float), -k, k), value)


# ============================================================
# Funkcja źródła
# ============================================================


@dataclass(frozen=True)
class SourcePiece:
    """Wielomian f ograniczony do przedziału [lo, hi]; współczynniki rosnąco."""

    lo: float
    hi: float
    coeffs: tuple

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coeffs)

    @property
    def degree(self) -> int:
        return max(len(self.coeffs) - 1, 0)


@dataclass(frozen=True)
class SourceFunction:
    """
    Profil opadu/parowania f jako wielomian kawałkami na [-1, 1].

    Całka ogonowa F(x) = ∫_x^1 f liczona jest dokładnie z funkcji pierwotnych.
    """

    pieces: tuple
    _breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _tails: np.ndarray = field(init=False, repr=False, compare=False)
    _antiderivs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("Funkcja źródła wymaga co najmniej jednego kawałka")
        if abs(pieces[0].lo + 1.0) > BREAKPOINT_TOL or abs(pieces[-1].hi - 1.0) > (
            BREAKPOINT_TOL
        ):
            raise ValueError("Przedziały źródła muszą pokrywać dokładnie [-1, 1]")
        for left, right in zip(pieces, pieces[1:]):
            if abs(left.hi - right.lo) > BREAKPOINT_TOL:
                raise ValueError(
                    f"Przedziały źródła nie sklejają się: {left.hi} != {right.lo}"
                )
        for piece in pieces:
            if not piece.hi > piece.lo:
                raise ValueError(f"Pusty przedział źródła [{piece.lo}, {piece.hi}]")
            if not piece.coeffs:
                raise ValueError("Kawałek źródła bez współczynników")

        antiderivs = tuple(piece.poly.integ() for piece in pieces)
        full = np.array(
            [P(piece.hi) - P(piece.lo) for P, piece in zip(antiderivs, pieces)]
        )
        # tails[i] = ∫_{hi_i}^1 f
        tails = np.concatenate([np.cumsum(full[::-1])[::-1][1:], [0.0]])
        breaks = np.array([piece.lo for piece in pieces[1:]], dtype=float)

        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "_breaks", breaks)
        object.__setattr__(self, "_tails", tails)
        object.__setattr__(self, "_antiderivs", antiderivs)

    # --- konstruktory ---

    @classmethod
    def constant(cls, value: float) -> "SourceFunction":
        return cls((SourcePiece(-1.0, 1.0, (float(value),)),))

    @classmethod
    def from_json(cls, data: list) -> "SourceFunction":
        """Wczytuje listę {"interval": [a, b], "coeffs": [c0, c1, ...]}."""
        if not isinstance(data, list):
            raise ConfigError("Źródło musi być listą kawałków")
        pieces = []
        for i, item in enumerate(data):
            if not isinstance(item, dict) or set(item) != {"interval", "coeffs"}:
                raise ConfigError(
                    f"Kawałek źródła #{i} musi mieć dokładnie klucze interval i coeffs"
                )
            try:
                lo, hi = (float(v) for v in item["interval"])
                coeffs = tuple(float(c) for c in item["coeffs"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"Kawałek źródła #{i}: interval i coeffs muszą być liczbami"
                ) from exc
            pieces.append(SourcePiece(lo, hi, coeffs))
        try:
            return cls(tuple(pieces))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> list:
        return [
            {"interval": [piece.lo, piece.hi], "coeffs": list(piece.coeffs)}
            for piece in self.pieces
        ]

    def scaled(self, factor: float) -> "SourceFunction":
        return SourceFunction(
            tuple(
                SourcePiece(piece.lo, piece.hi, tuple(factor * c for c in piece.coeffs))
                for piece in self.pieces
            )
        )

    # --- ewaluacja ---

    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._breaks, x, side="right")

    def _check_domain(self, x: np.ndarray):
        if np.any(x < -1.0 - BREAKPOINT_TOL) or np.any(x > 1.0 + BREAKPOINT_TOL):
            raise ValueError("Argument źródła poza przedziałem [-1, 1]")

    def evaluate(self, x: ArrayLike) -> Union[float, np.ndarray]:
        """Wartość f(x); w punkcie sklejenia obowiązuje prawy kawałek."""
        arr = np.asarray(x, dtype=float)
        self._check_domain(arr)
        idx = self._piece_index(arr)
        out = np.zeros_like(arr)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece.poly(arr[mask])
        return _as_output(out, x)

    def tail(self, x: ArrayLike) -> Union[float, np.ndarray]:
        """Dokładna całka ogonowa F(x) = ∫_x^1 f."""
        arr = np.asarray(x, dtype=float)
        self._check_domain(arr)
        arr = np.clip(arr, -1.0, 1.0)
        idx = self._piece_index(arr)
        out = np.zeros_like(arr)
        for i, (piece, P) in enumerate(zip(self.pieces, self._antiderivs)):
            mask = idx == i
            if np.any(mask):
                out[mask] = P(piece.hi) - P(arr[mask]) + self._tails[i]
        return _as_output(out, x)

    def integral(self) -> float:
        return float(self.tail(-1.0))

    @property
    def breakpoints(self) -> tuple:
        """Wewnętrzne punkty sklejenia kawałków."""
        return tuple(float(b) for b in self._breaks)

    @property
    def max_degree(self) -> int:
        return max(piece.degree for piece in self.pieces)

    def _real_points_inside(self, poly: Polynomial, lo: float, hi: float) -> list:
        if poly.degree() < 1:
            return []
        roots = poly.roots()
        real = roots[np.abs(np.imag(roots)) < 1e-12].real
        return sorted(r for r in real if lo < r < hi)

    def l1_norm(self) -> float:
        """Dokładna norma ‖f‖₁ (podział kawałków w pierwiastkach)."""
        total = 0.0
        for piece, P in zip(self.pieces, self._antiderivs):
            cuts = [piece.lo] + self._real_points_inside(
                piece.poly.trim(), piece.lo, piece.hi
            ) + [piece.hi]
            for a, b in zip(cuts, cuts[1:]):
                total += abs(P(b) - P(a))
        return float(total)

    def is_nonnegative(self, tol: float = 0.0, samples: int = 33) -> bool:
        """Znak f: próbkowanie plus ekstrema (pierwiastki pochodnej) na kawałkach."""
        for piece in self.pieces:
            poly = piece.poly
            candidates = list(np.linspace(piece.lo, piece.hi, samples))
            candidates += self._real_points_inside(poly.deriv(), piece.lo, piece.hi)
            if float(np.min(poly(np.array(candidates)))) < -tol:
                return False
        return True

    def is_zero(self) -> bool:
        return all(all(c == 0.0 for c in piece.coeffs) for piece in self.pieces)

    def hat_moments(self, nodes: np.ndarray) -> np.ndarray:
        """
        Dokładne momenty b_i = ∫ f v_i dla funkcji daszkowych na węzłach.

        Każda komórka dzielona jest w punktach sklejenia źródła; kwadratura
        Gaussa-Legendre'a jest dokładna dla wielomianu stopnia deg(f) + 1.
        """
        nodes = np.asarray(nodes, dtype=float)
        inner = self._breaks[(self._breaks > -1.0) & (self._breaks < 1.0)]
        pts = np.union1d(nodes, inner)
        a, b = pts[:-1], pts[1:]
        cell = np.clip(np.searchsorted(nodes, 0.5 * (a + b), side="right") - 1, 0,
                       len(nodes) - 2)
        m = self.max_degree // 2 + 2
        xi, wi = leggauss(m)
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        xq = mid[:, None] + half[:, None] * xi[None, :]
        wq = half[:, None] * wi[None, :]
        fq = self.evaluate(xq.ravel()).reshape(xq.shape)
        x_left = nodes[cell][:, None]
        h = (nodes[cell + 1] - nodes[cell])[:, None]
        right_w = (xq - x_left) / h
        left_part = np.sum(wq * fq * (1.0 - right_w), axis=1)
        right_part = np.sum(wq * fq * right_w, axis=1)
        moments = np.zeros(len(nodes))
        np.add.at(moments, cell, left_part)
        np.add.at(moments, cell + 1, right_part)
        return moments


def source_tail(source: SourceFunction, x: ArrayLike) -> Union[float, np.ndarray]:
    """∫_x^1 f(σ) dσ; błąd dziedziny poza [-1, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -1.0) or np.any(arr > 1.0):
        raise ValueError(f"source_tail: x poza [-1, 1]: {x}")
    return source.tail(x)


# ============================================================
# Siatki
# ============================================================


@dataclass(frozen=True, eq=False)
class Grid:
    """Węzły rosnąco od -1 do 1."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise ValueError("Siatka wymaga co najmniej dwóch węzłów")
        if nodes[0] != -1.0 or nodes[-1] != 1.0:
            raise ValueError("Siatka musi zaczynać się w -1 i kończyć w 1")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("Węzły siatki muszą być ściśle rosnące")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, n_cells: int) -> "Grid":
        if n_cells < 1:
            raise ValueError(f"Liczba komórek musi być >= 1, otrzymano {n_cells}")
        nodes = np.linspace(-1.0, 1.0, n_cells + 1)
        nodes[0], nodes[-1] = -1.0, 1.0
        return cls(nodes)

    @classmethod
    def graded(cls, n_cells: int, grading: float = 0.5) -> "Grid":
        """Mieszanka siatki równomiernej i Czebyszewa (zagęszczenie przy rowach)."""
        if not 0.0 <= grading <= 1.0:
            raise ValueError("Parametr zagęszczenia musi leżeć w [0, 1]")
        uniform = np.linspace(-1.0, 1.0, n_cells + 1)
        cheb = -np.cos(np.pi * np.arange(n_cells + 1) / n_cells)
        nodes = (1.0 - grading) * uniform + grading * cheb
        nodes[0], nodes[-1] = -1.0, 1.0
        return cls(nodes)

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        h = self.spacing
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))

    def digest(self) -> str:
        raw = np.ascontiguousarray(self.nodes).tobytes()
        return hashlib.sha256(raw).hexdigest()[:16]


# ============================================================
# Specyfikacja problemu i wyniki
# ============================================================


@dataclass(frozen=True)
class ProblemSpec:
    """
    Parametry fizyczne problemu.

    Args:
        p: Wykładnik prawa potęgowego (p = m + 1 > 1)
        H: Poziom wody w rowach (> 0)
        phi: Nachylenie dna w radianach, (0, π/2)
        source: Funkcja źródła f
        conductivity: Przewodność c > 0
        beta: Margines β >= ‖f‖₁ dla stałych pochodnej (domyślnie ‖f‖₁)
        H_minus, H_plus: Poziomy brzegowe dla przebiegu nieustalonego
    """

    p: float
    H: float
    phi: float
    source: SourceFunction
    conductivity: float = 1.0
    beta: Optional[float] = None
    H_minus: Optional[float] = None
    H_plus: Optional[float] = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"Wykładnik p musi być > 1, otrzymano {self.p}")
        if not self.H > 0:
            raise ValueError(f"Poziom H musi być > 0, otrzymano {self.H}")
        if not 0.0 < self.phi < math.pi / 2:
            raise ValueError(f"Kąt phi musi leżeć w (0, π/2), otrzymano {self.phi}")
        if not self.conductivity > 0:
            raise ValueError(f"Przewodność musi być > 0, otrzymano {self.conductivity}")
        for name in ("H_minus", "H_plus"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} musi być >= 0, otrzymano {value}")
        if self.beta is not None and self.beta < 0:
            raise ValueError(f"beta musi być >= 0, otrzymano {self.beta}")

    @property
    def conj_p(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def lam(self) -> float:
        """λ = (sin φ)^{p-1}."""
        return math.sin(self.phi) ** (self.p - 1.0)

    @property
    def steady_source(self) -> SourceFunction:
        """Źródło problemu ustalonego po normalizacji przewodnością (f / c)."""
        if self.conductivity == 1.0:
            return self.source
        return self.source.scaled(1.0 / self.conductivity)

    @property
    def source_l1(self) -> float:
        return self.steady_source.l1_norm()

    @property
    def margin_beta(self) -> float:
        return self.source_l1 if self.beta is None else float(self.beta)

    @property
    def boundary_levels(self) -> tuple:
        lo = self.H if self.H_minus is None else self.H_minus
        hi = self.H if self.H_plus is None else self.H_plus
        return lo, hi

    def with_source(self, source: SourceFunction) -> "ProblemSpec":
        return replace(self, source=source)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "H": self.H,
            "phi": self.phi,
            "conductivity": self.conductivity,
            "source": self.source.to_json(),
            "beta": self.beta,
            "H_minus": self.H_minus,
            "H_plus": self.H_plus,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SolutionProfile:
    """Profil ustalony (u, u') na węzłach wraz z certyfikatami rezydualnymi."""

    grid: Grid
    u: np.ndarray
    du: np.ndarray
    s_end: float
    kappa: float
    residual_first_order: float
    min_head: float
    method: str = "shooting"
    roots: tuple = ()
    iterations: int = 0

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.u)))

    @property
    def du_sup_norm(self) -> float:
        return float(np.max(np.abs(self.du)))


@dataclass(frozen=True, eq=False)
class DiffusionProfile:
    """Współczynnik dyfuzji D(x) linearyzacji z użytym dolnym ograniczeniem."""

    grid: Grid
    D: np.ndarray
    floor_used: float
    floor_kind: str = "K"

    def __post_init__(self):
        if not self.floor_used > 0:
            raise ValueError(f"Dolne ograniczenie D musi być > 0: {self.floor_used}")

    @property
    def min_value(self) -> float:
        return float(np.min(self.D))


@dataclass(frozen=True, eq=False)
class GreensTable:
    """Stablicowane E± i G(x_i, y_j) operatora zlinearyzowanego."""

    grid: Grid
    E_minus: np.ndarray
    E_plus: np.ndarray
    G: np.ndarray
    lam: float
    D: np.ndarray
    cumulative: np.ndarray

    @property
    def total_integral(self) -> float:
        """∫_{-1}^{1} λ/D."""
        return float(self.cumulative[-1])
