"""
Influence functional of a harmonic bath on a discretised forward-backward path.

Every time point ``k`` of a path owns a quadrature window: ``[0, dt/2]`` for the initial
point, ``[t_k - dt/2, t_k + dt/2]`` for interior points and ``[t_N - dt/2, t_N]`` for the
last point of the path. The coefficient ``eta(k, k')`` is the double integral of the bath
correlation function over the windows of ``k`` and ``k'`` (an ordered simplex when
``k == k'``), evaluated through the lineshape function ``g`` with ``g'' = C``.
"""
from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad

from .constants import (
    ETA_CACHE_FORMAT_VERSION,
    OHMIC_FREQUENCY_SPAN,
    QUADRATURE_EPSREL,
    QUADRATURE_FAILURE_RTOL,
    QUADRATURE_LIMIT,
    SPIN_VALUES,
    IndexKind,
    WindowKind,
)
from .exceptions import ParameterError, QuadratureError, StructuralError
from .grid import GridColumn
from .model import BathModel, SpectralKind
from .mp import MatrixProductOperator
from .tensor import Index, Tensor, TruncationRecord, compress_chain, contract, fuse, reindex

logger = logging.getLogger(__name__)

EtaKey = tuple[WindowKind, WindowKind, int]


def _integrate(integrand: Callable[[float], float], upper: float, what: str) -> float:
    result = quad(
        integrand,
        0.0,
        upper,
        epsabs=1e-14,
        epsrel=QUADRATURE_EPSREL,
        limit=QUADRATURE_LIMIT,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        achieved = abserr / max(abs(value), 1e-300)
        if achieved > QUADRATURE_FAILURE_RTOL:
            raise QuadratureError(
                f"Quadrature of {what} did not converge (relative error {achieved:.1e}): "
                f"{result[3]}",
                achieved_tolerance=achieved,
            )
        logger.warning(f"Quadrature of {what} reached relative error {achieved:.1e} only")
    return value


def _coth(x):
    return 1.0 / np.tanh(x)


def bath_correlation(bath: BathModel, t: float) -> complex:
    """
    C(t) = 1/pi int_0^inf J(w) [coth(beta w / 2) cos(w t) - i sin(w t)] dw
    """
    if t < 0:
        raise ParameterError(f"The bath correlation function is evaluated for t >= 0, got {t}")
    if bath.is_trivial:
        return 0j

    if bath.kind is SpectralKind.DISCRETE:
        frequencies, couplings = (np.array(column) for column in zip(*bath.modes))
        weights = couplings**2 / (2.0 * frequencies)
        thermal = _coth(0.5 * bath.beta * frequencies)
        return complex(
            np.sum(weights * (thermal * np.cos(frequencies * t) - 1j * np.sin(frequencies * t)))
        )

    upper = OHMIC_FREQUENCY_SPAN * bath.omega_c

    def real_part(w):
        return bath.spectral_density(w) * _coth(0.5 * bath.beta * w) * np.cos(w * t)

    def imag_part(w):
        return -bath.spectral_density(w) * np.sin(w * t)

    real = _integrate(real_part, upper, f"Re C({t})")
    imag = _integrate(imag_part, upper, f"Im C({t})") if t > 0 else 0.0
    return complex(real, imag) / np.pi


def lineshape(bath: BathModel, t: float) -> complex:
    """
    g(t) = int_0^t dt' int_0^t' dt'' C(t''), i.e.
    1/pi int J(w) / w**2 [coth(beta w / 2) (1 - cos w t) + i (sin w t - w t)] dw
    """
    if t < 0:
        raise ParameterError(f"The lineshape function is evaluated for t >= 0, got {t}")
    if t == 0 or bath.is_trivial:
        return 0j

    if bath.kind is SpectralKind.DISCRETE:
        frequencies, couplings = (np.array(column) for column in zip(*bath.modes))
        weights = couplings**2 / (2.0 * frequencies**3)
        thermal = _coth(0.5 * bath.beta * frequencies)
        phase = frequencies * t
        real = thermal * 2.0 * np.sin(0.5 * phase) ** 2
        return complex(np.sum(weights * (real + 1j * (np.sin(phase) - phase))))

    upper = OHMIC_FREQUENCY_SPAN * bath.omega_c

    def density_over_w2(w):
        return 0.5 * np.pi * bath.xi * np.exp(-w / bath.omega_c) / w

    def real_part(w):
        return density_over_w2(w) * _coth(0.5 * bath.beta * w) * 2.0 * np.sin(0.5 * w * t) ** 2

    def imag_part(w):
        return density_over_w2(w) * (np.sin(w * t) - w * t)

    real = _integrate(real_part, upper, f"Re g({t})")
    imag = _integrate(imag_part, upper, f"Im g({t})")
    return complex(real, imag) / np.pi


def window(kind: WindowKind, point: int) -> tuple[int, int]:
    """Quadrature window of a time point in units of dt / 2"""
    if kind is WindowKind.INITIAL:
        return 0, 1
    if kind is WindowKind.INTERIOR:
        return 2 * point - 1, 2 * point + 1
    return 2 * point - 1, 2 * point


def tabulated_keys(memory_length: int) -> list[EtaKey]:
    """Every (kind of k, kind of k', k - k') combination a path of any length needs"""
    keys: list[EtaKey] = [
        (WindowKind.INITIAL, WindowKind.INITIAL, 0),
        (WindowKind.TERMINAL, WindowKind.TERMINAL, 0),
        (WindowKind.INTERIOR, WindowKind.INTERIOR, 0),
    ]
    for delta in range(1, memory_length + 1):
        keys.extend(
            [
                (WindowKind.INTERIOR, WindowKind.INITIAL, delta),
                (WindowKind.INTERIOR, WindowKind.INTERIOR, delta),
                (WindowKind.TERMINAL, WindowKind.INITIAL, delta),
                (WindowKind.TERMINAL, WindowKind.INTERIOR, delta),
            ]
        )
    return keys


@dataclass(frozen=True)
class EtaTable:
    """
    Bath coefficients indexed by the window kinds of both points and their separation.
    Separations beyond ``memory_length`` are not tabulated.
    """

    dt: float
    memory_length: int
    entries: Mapping[EtaKey, complex] = field(default_factory=dict)
    bath_key: str = "none"

    @staticmethod
    def kind_of(point: int, final_point: int) -> WindowKind:
        if point == 0:
            return WindowKind.INITIAL
        if point == final_point:
            return WindowKind.TERMINAL
        return WindowKind.INTERIOR

    def get(self, k: int, k_prime: int, final_point: int) -> complex:
        """eta(k, k') on a path whose last point is ``final_point``"""
        delta = k - k_prime
        if k_prime < 0 or delta < 0 or k > final_point:
            raise ParameterError(
                f"No coefficient for the pair ({k}, {k_prime}) of a path to {final_point}"
            )
        if delta > self.memory_length:
            raise ParameterError(
                f"The pair ({k}, {k_prime}) is beyond the memory length {self.memory_length}"
            )
        key = (self.kind_of(k, final_point), self.kind_of(k_prime, final_point), delta)
        return self.entries.get(key, 0j)

    @property
    def is_zero(self) -> bool:
        return all(value == 0 for value in self.entries.values())


def eta_coefficients(
    bath: Optional[BathModel],
    dt: float,
    memory_length: int,
    cache_path: Optional[Path] = None,
) -> EtaTable:
    """
    Tabulates eta for separations up to ``memory_length``. A bath-free chain gets an
    all-zero table. With ``cache_path`` the table is read from (or written to) a cache
    file whose header matches this bath, dt and memory length.
    """
    if dt <= 0:
        raise ParameterError(f"The time step must be positive, got {dt}")
    if memory_length < 1:
        raise ParameterError(f"L out of range: memory length must be >= 1, got {memory_length}")

    keys = tabulated_keys(memory_length)
    if bath is None or bath.is_trivial:
        return EtaTable(dt, memory_length, {key: 0j for key in keys})

    if cache_path is not None:
        cached = load_eta_table(cache_path, bath, dt, memory_length)
        if cached is not None:
            return cached

    @lru_cache(maxsize=None)
    def g(half_steps: int) -> complex:
        return lineshape(bath, 0.5 * dt * half_steps)

    entries = {}
    for kind_k, kind_kp, delta in keys:
        point_kp = 0 if kind_kp is WindowKind.INITIAL else 1
        a, b = window(kind_k, point_kp + delta)
        c, d = window(kind_kp, point_kp)
        if delta == 0:
            entries[(kind_k, kind_kp, delta)] = g(b - a)
        else:
            entries[(kind_k, kind_kp, delta)] = g(b - c) - g(b - d) - g(a - c) + g(a - d)

    table = EtaTable(dt, memory_length, entries, bath.cache_key())
    logger.debug(f"eta table for {table.bath_key}, dt={dt}, L={memory_length}")

    if cache_path is not None:
        save_eta_table(table, cache_path)
    return table


def eta_cache_header(bath_key: str, dt: float, memory_length: int) -> str:
    return f"# ms-tnpi eta v{ETA_CACHE_FORMAT_VERSION} dt={dt!r} L={memory_length} bath={bath_key}"


def save_eta_table(table: EtaTable, path: Path) -> None:
    """Writes the cache layout: one header line, then ``kind_k kind_k' delta re im`` lines"""
    lines = [eta_cache_header(table.bath_key, table.dt, table.memory_length)]
    for (kind_k, kind_kp, delta), value in sorted(
        table.entries.items(), key=lambda item: (item[0][2], str(item[0][0]), str(item[0][1]))
    ):
        lines.append(f"{kind_k} {kind_kp} {delta} {value.real!r} {value.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote eta cache {path}")


def load_eta_table(
    path: Path, bath: BathModel, dt: float, memory_length: int
) -> Optional[EtaTable]:
    """Cached table, or ``None`` when the file is missing, stale or unreadable"""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError:
        return None

    if not lines or lines[0].strip() != eta_cache_header(bath.cache_key(), dt, memory_length):
        logger.info(f"Ignoring eta cache {path}: written for another bath, dt or L")
        return None

    entries = {}
    try:
        for line in lines[1:]:
            if not line.strip():
                continue
            kind_k, kind_kp, delta, real, imag = line.split()
            entries[(WindowKind(kind_k), WindowKind(kind_kp), int(delta))] = complex(
                float(real), float(imag)
            )
    except ValueError as exc:
        logger.warning(f"Ignoring malformed eta cache {path}: {exc}")
        return None

    missing = set(tabulated_keys(memory_length)) - set(entries)
    if missing:
        logger.warning(f"Ignoring eta cache {path}: {len(missing)} entries missing")
        return None

    logger.info(f"Loaded eta cache {path}")
    return EtaTable(dt, memory_length, entries, bath.cache_key())


def path_weights(values: np.ndarray = SPIN_VALUES) -> tuple[np.ndarray, np.ndarray]:
    """Differences s+ - s- and means (s+ + s-) / 2 over the fused index a = s+ * d + s-"""
    plus, minus = np.meshgrid(values, values, indexing="ij")
    return (plus - minus).reshape(-1), (0.5 * (plus + minus)).reshape(-1)


def influence_multipliers(eta: complex, values: np.ndarray = SPIN_VALUES) -> np.ndarray:
    """exp(-ds_k (Re eta ds_k' + 2i Im eta mean_k')) laid out ``[a_k, a_k']``"""
    difference, mean = path_weights(values)
    return np.exp(-np.outer(difference, eta.real * difference + 2j * eta.imag * mean))


@dataclass(frozen=True)
class InfluenceFactor:
    k: int
    k_prime: int
    multipliers: np.ndarray

    def __call__(self, a_k: int, a_k_prime: int) -> complex:
        return complex(self.multipliers[a_k, a_k_prime])


def _pair_eta(
    eta: EtaTable, k: int, k_prime: int, final_point: int, previous_final: Optional[int]
) -> complex:
    value = eta.get(k, k_prime, final_point)
    if previous_final is not None:
        value -= eta.get(k, k_prime, previous_final)
    return value


def if_factor(
    eta: EtaTable,
    k: int,
    k_prime: int,
    final_point: Optional[int] = None,
    values: np.ndarray = SPIN_VALUES,
) -> InfluenceFactor:
    """Multiplier table of the pair (k, k') on a path ending at ``final_point`` (default k)"""
    final_point = k if final_point is None else final_point
    return InfluenceFactor(
        k, k_prime, influence_multipliers(eta.get(k, k_prime, final_point), values)
    )


def build_if_mpo(
    eta: EtaTable,
    k: int,
    span: int,
    final_point: Optional[int] = None,
    previous_final: Optional[int] = None,
    values: np.ndarray = SPIN_VALUES,
) -> MatrixProductOperator:
    """
    Diagonal MPO along the time points ``k - span .. k`` holding every factor of the
    influence functional that couples point ``k`` to an earlier (or the same) point. The
    bond carries the forward-backward value at ``k`` down to the earlier points.

    With ``previous_final`` the factors are the ratio between a path ending at
    ``final_point`` and one ending at ``previous_final``.
    """
    final_point = k if final_point is None else final_point
    if span < 0 or span > min(k, eta.memory_length):
        raise ParameterError(
            f"Span {span} at point {k} exceeds the memory length {eta.memory_length}"
        )

    d2 = len(values) ** 2
    identity = np.eye(d2)
    points = list(range(k - span, k + 1))
    in_indices = [Index(d2, IndexKind.SITE, ("n", m)) for m in points]
    out_indices = [index.clone() for index in in_indices]
    bonds = [Index(d2, IndexKind.TEMPORAL_BOND, ("n", m)) for m in points[:-1]]

    tensors = []
    for position, m in enumerate(points):
        factor = influence_multipliers(_pair_eta(eta, k, m, final_point, previous_final), values)
        site_in, site_out = in_indices[position], out_indices[position]
        if span == 0:
            tensors.append(Tensor([site_in, site_out], np.diag(np.diag(factor))))
        elif m == k:
            data = np.einsum("x,xy,bx->bxy", np.diag(factor), identity, identity)
            tensors.append(Tensor([bonds[-1], site_in, site_out], data))
        elif position == 0:
            data = np.einsum("bx,xy->xyb", factor, identity)
            tensors.append(Tensor([site_in, site_out, bonds[0]], data))
        else:
            data = np.einsum("bx,xy,bc->bxyc", factor, identity, identity)
            tensors.append(
                Tensor([bonds[position - 1], site_in, site_out, bonds[position]], data)
            )

    return MatrixProductOperator(tensors, in_indices, out_indices, bonds)


def apply_if_rows(
    columns: Sequence[GridColumn],
    eta: Union[EtaTable, Sequence[EtaTable]],
    k: int,
    span: int,
    cutoff: float,
    max_dim: Optional[int] = None,
    final_point: Optional[int] = None,
    previous_final: Optional[int] = None,
    values: np.ndarray = SPIN_VALUES,
    record: Optional[TruncationRecord] = None,
) -> list[GridColumn]:
    """
    Multiplies every row of the grid by the influence functional MPO of point ``k`` and
    recompresses the row. Rows are independent; ``eta`` is either one table shared by all
    sites or one table per site. Site indices stay open and keep their identity.
    """
    by_point = {column.point: column for column in columns}
    points = list(range(k - span, k + 1))
    missing = [m for m in points if m not in by_point]
    if missing:
        raise StructuralError(f"Influence functional of point {k} needs columns {missing}")

    sites = by_point[k].P
    tables = [eta] * sites if isinstance(eta, EtaTable) else list(eta)
    if len(tables) != sites:
        raise StructuralError(f"{len(tables)} eta tables given for {sites} sites")

    new_tensors = {m: list(by_point[m].tensors) for m in points}
    new_in = {m: list(by_point[m].temporal_in or ()) for m in points}
    new_out = {m: list(by_point[m].temporal_out or ()) for m in points}
    mpo_cache: dict[int, MatrixProductOperator] = {}

    for site in range(sites):
        table = tables[site]
        if id(table) not in mpo_cache:
            mpo_cache[id(table)] = build_if_mpo(
                table, k, span, final_point, previous_final, values
            )
        mpo = mpo_cache[id(table)]

        row = []
        for position, m in enumerate(points):
            site_index = by_point[m].site_indices[site]
            scratch = site_index.clone()
            factor = reindex(
                mpo.tensors[position],
                {mpo.in_indices[position]: site_index, mpo.out_indices[position]: scratch},
            )
            tensor = contract(new_tensors[m][site], factor)
            row.append(reindex(tensor, {scratch: site_index}))

        if span == 0:
            new_tensors[k][site] = row[0]
            continue

        bonds = []
        for position, m in enumerate(points[:-1]):
            row_bond = new_out[m][site]
            dim = row_bond.dim * mpo.bonds[position].dim
            fused = Index(dim, IndexKind.TEMPORAL_BOND, row_bond.tags)
            row[position] = fuse(row[position], [row_bond, mpo.bonds[position]], fused)
            row[position + 1] = fuse(row[position + 1], [row_bond, mpo.bonds[position]], fused)
            bonds.append(fused)

        row, bonds, truncation = compress_chain(row, bonds, cutoff, max_dim)
        if record is not None:
            record.ranks.extend(truncation.ranks)
            record.discarded.extend(truncation.discarded)

        for position, m in enumerate(points):
            new_tensors[m][site] = row[position]
        for position, m in enumerate(points[:-1]):
            new_out[m][site] = bonds[position]
            new_in[m + 1][site] = bonds[position]

    updated = []
    for column in columns:
        m = column.point
        if m not in new_tensors:
            updated.append(column)
            continue
        updated.append(
            column.replace(
                tensors=tuple(new_tensors[m]),
                temporal_in=tuple(new_in[m]) if column.temporal_in is not None else None,
                temporal_out=tuple(new_out[m]) if column.temporal_out is not None else None,
            )
        )
    return updated
