"""
Dense tensors with labelled index kinds, symmetry operations, the rank-4 Young
projectors and the least-squares removal step used at every order of the
defining-map constructions.

Normal-frame (Greek) indices are orthonormal labels: they contract by plain
summation and are never raised or lowered.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import factorial
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .exceptions import IndexKindError
from .jets import JetSeries, jet_einsum

logger = logging.getLogger(__name__)

Data = Union[np.ndarray, JetSeries]

KINDS = ("bulk", "tangent", "normal")
VARIANCES = ("up", "down")
NULL_UPDATE_TOL = 1e-10


@dataclass(frozen=True)
class IndexSlot:
    kind: str
    variance: str = "down"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IndexKindError(f"Unknown index kind '{self.kind}'")
        if self.variance not in VARIANCES:
            raise IndexKindError(f"Unknown variance '{self.variance}'")


@dataclass(frozen=True)
class Tensor:
    """Dense array (numbers or jets) with one IndexSlot per leading axis."""

    data: Data
    slots: Tuple[IndexSlot, ...]
    weight: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.slots) != _ndim(self.data):
            raise IndexKindError(
                f"{len(self.slots)} index slots for data of rank {_ndim(self.data)}"
            )

    @classmethod
    def of(cls, data: Data, spec: str, weight: float = 0.0, name: str = "") -> "Tensor":
        """Build from a compact spec such as ``"bd,nd,nd"`` (kind letter + variance letter)."""
        kinds = {"b": "bulk", "t": "tangent", "n": "normal"}
        variances = {"u": "up", "d": "down"}
        slots = tuple(
            IndexSlot(kinds[s[0]], variances[s[1]]) for s in spec.split(",") if s
        )
        return cls(data, slots, weight, name)

    @property
    def rank(self) -> int:
        return len(self.slots)

    def with_data(self, data: Data, slots: Optional[Tuple[IndexSlot, ...]] = None) -> "Tensor":
        return Tensor(data, self.slots if slots is None else slots, self.weight, self.name)

    def values(self) -> np.ndarray:
        """Numeric entries at the base point."""
        return self.data.value if isinstance(self.data, JetSeries) else np.asarray(self.data)


def _ndim(data: Data) -> int:
    return data.ndim if isinstance(data, JetSeries) else np.ndim(data)


def _permute(data: Data, perm: Sequence[int]) -> Data:
    """out[i_0, ..., i_{r-1}] = data[i_perm[0], ..., i_perm[r-1]] on the listed axes."""
    inverse = np.argsort(perm)
    return data.transpose(tuple(int(i) for i in inverse))


def permute_indices(data: Data, perm: Sequence[int]) -> Data:
    return _permute(data, perm)


def _check_positions(t: Tensor, positions: Sequence[int]) -> None:
    kinds = {t.slots[p] for p in positions}
    if len(kinds) > 1:
        raise IndexKindError(f"Positions {list(positions)} mix index kinds {kinds}")


def _sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def _group_average(data: Data, positions: Sequence[int], signed: bool) -> Data:
    rank = _ndim(data)
    total = None
    count = 0
    for image in permutations(positions):
        perm = list(range(rank))
        for src, dst in zip(positions, image):
            perm[src] = dst
        sign = _sign([positions.index(i) for i in image]) if signed else 1
        term = _permute(data, perm) * float(sign)
        total = term if total is None else total + term
        count += 1
    return total * (1.0 / count)


def symmetrize(t: Union[Tensor, Data], positions: Sequence[int]) -> Union[Tensor, Data]:
    """Unit-normalized symmetrization over ``positions``."""
    if isinstance(t, Tensor):
        _check_positions(t, positions)
        return t.with_data(_group_average(t.data, list(positions), signed=False))
    return _group_average(t, list(positions), signed=False)


def antisymmetrize(t: Union[Tensor, Data], positions: Sequence[int]) -> Union[Tensor, Data]:
    """Unit-normalized antisymmetrization over ``positions``."""
    if isinstance(t, Tensor):
        _check_positions(t, positions)
        return t.with_data(_group_average(t.data, list(positions), signed=True))
    return _group_average(t, list(positions), signed=True)


def contract(t: Tensor, first: int, second: int) -> Tensor:
    """Trace over two index positions."""
    a, b = t.slots[first], t.slots[second]
    if a.kind != b.kind:
        raise IndexKindError(f"Cannot contract {a.kind} with {b.kind}")
    if a.kind != "normal" and a.variance == b.variance:
        raise IndexKindError("Contraction needs one upper and one lower index")
    letters = "abcdefghijklmnop"[: t.rank]
    out = "".join(c for i, c in enumerate(letters) if i not in (first, second))
    subscripts = list(letters)
    subscripts[second] = subscripts[first]
    spec = "".join(subscripts) + "->" + out
    data = jet_einsum(spec, t.data) if isinstance(t.data, JetSeries) else np.einsum(spec, t.data)
    slots = tuple(s for i, s in enumerate(t.slots) if i not in (first, second))
    return Tensor(data, slots, t.weight, t.name)


def _move_index(t: Tensor, position: int, metric: Data, variance: str, kind: str) -> Tensor:
    slot = t.slots[position]
    if slot.kind == "normal":
        raise IndexKindError("Normal-frame indices are never raised or lowered")
    if slot.kind != kind:
        raise IndexKindError(f"Metric for {kind} indices applied to a {slot.kind} index")
    if slot.variance == variance:
        return t
    letters = "abcdefghijklmnop"[: t.rank]
    target = "z"
    spec = f"{letters},{target}{letters[position]}->" + letters.replace(letters[position], target)
    data = jet_einsum(spec, t.data, metric)
    slots = list(t.slots)
    slots[position] = IndexSlot(kind, variance)
    return Tensor(data, tuple(slots), t.weight, t.name)


def raise_index(t: Tensor, position: int, inverse_metric: Data, kind: str = "bulk") -> Tensor:
    return _move_index(t, position, inverse_metric, "up", kind)


def lower_index(t: Tensor, position: int, metric: Data, kind: str = "bulk") -> Tensor:
    return _move_index(t, position, metric, "down", kind)


# rank-4 Young projectors --------------------------------------------------


def _as_data(F: Union[Tensor, Data]) -> Data:
    data = F.data if isinstance(F, Tensor) else F
    if _ndim(data) != 4:
        raise IndexKindError(f"Projector needs a rank-4 tensor, got rank {_ndim(data)}")
    if isinstance(F, Tensor) and any(s.kind != "normal" for s in F.slots):
        raise IndexKindError("Young projectors act on normal-frame indices only")
    return data


def _wrap(F: Union[Tensor, Data], data: Data) -> Union[Tensor, Data]:
    return F.with_data(data) if isinstance(F, Tensor) else data


def _swap(data: Data, spec: str) -> Data:
    """Reorder axes: ``spec`` names which input letter sits in each output slot."""
    return _permute(data, ["abcd".index(c) for c in spec])


def project_window22(F: Union[Tensor, Data]) -> Union[Tensor, Data]:
    """Projection onto the [2,2] (window) class.

    Sixteen-term formula: symmetrize the pairs (12), (34) of the result of
    antisymmetrizing the columns (13), (24), normalized by 1/12.
    """
    data = _as_data(F)
    column = data - _swap(data, "cbad") - _swap(data, "adcb") + _swap(data, "cdab")
    row = column + _swap(column, "bacd") + _swap(column, "abdc") + _swap(column, "badc")
    return _wrap(F, row * (1.0 / 12.0))


def project_pistol31(F: Union[Tensor, Data]) -> Union[Tensor, Data]:
    """Projection onto the [3,1] class: rows (123), column (14), normalized by 1/8."""
    data = _as_data(F)
    column = data - _swap(data, "dbca")
    total = None
    for perm in permutations("abc"):
        term = _swap(column, "".join(perm) + "d")
        total = term if total is None else total + term
    return _wrap(F, total * (1.0 / 8.0))


def project_symmetric(F: Union[Tensor, Data]) -> Union[Tensor, Data]:
    return _wrap(F, _group_average(_as_data(F), [0, 1, 2, 3], signed=False))


def projector_matrix(projector, k: int, rank: int = 4) -> np.ndarray:
    """Dense matrix of a tensor-valued linear map on (R^k)^{⊗rank}."""
    size = k ** rank
    basis = np.eye(size).reshape((size,) + (k,) * rank)
    columns = [np.asarray(projector(basis[i])).reshape(-1) for i in range(size)]
    return np.stack(columns, axis=1)


def window_dimension(k: int) -> int:
    return k * k * (k * k - 1) // 12


def pistol_dimension(k: int) -> int:
    return k * (k + 1) * (k + 2) * (k - 1) // 8


def symmetric_dimension(k: int) -> int:
    return factorial(k + 3) // (factorial(4) * factorial(k - 1))


# least-squares removal ----------------------------------------------------


@dataclass
class RemovalResult:
    """Outcome of remove_correctable."""

    solution: np.ndarray
    residual: np.ndarray
    residual_norm: float
    rank: int
    singular_values: np.ndarray
    projected_matrix: np.ndarray

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.projected_matrix.shape[1]


def remove_correctable(
    F: np.ndarray,
    update_matrix: np.ndarray,
    cancel_projector: Optional[np.ndarray] = None,
    rcond: float = 1e-10,
) -> RemovalResult:
    """Least-squares choice of A minimizing |Q(F + M A)|.

    ``F`` is a flattened tensor (or a stack of them as columns), ``update_matrix``
    M maps correction parameters to the change of F, and Q is the projector onto
    the components that must be cancelled (identity when omitted). The residual
    F + M A is returned in full; rank-deficient systems give the minimum-norm A.
    """
    F = np.asarray(F, dtype=float)
    columns = F if F.ndim == 2 else F[:, None]
    M = np.asarray(update_matrix, dtype=float)
    Q = np.eye(M.shape[0]) if cancel_projector is None else np.asarray(cancel_projector)
    QM = Q @ M
    if QM.size == 0 or np.max(np.abs(QM)) < NULL_UPDATE_TOL:
        # nothing reachable; roundoff in M must not be inverted
        solution = np.zeros((M.shape[1], columns.shape[1]))
        rank = 0
        singular_values = linalg.svdvals(QM) if QM.size else np.zeros(0)
    else:
        solution, _, rank, singular_values = linalg.lstsq(QM, -(Q @ columns), cond=rcond)
    residual = columns + M @ solution
    if F.ndim == 1:
        solution = solution[:, 0]
        residual = residual[:, 0]
    norm = float(np.linalg.norm(residual))
    logger.debug(
        f"remove_correctable: {M.shape[1]} parameters, rank {rank}, residual {norm:.3e}"
    )
    return RemovalResult(
        solution=solution,
        residual=residual,
        residual_norm=norm,
        rank=int(rank),
        singular_values=np.asarray(singular_values),
        projected_matrix=QM,
    )


def symmetric_monomials(k: int, degree: int) -> Tuple[Tuple[int, ...], ...]:
    """Exponent vectors of the degree-``degree`` monomials in k normal variables."""
    from .jets import jet_space

    return tuple(jet_space(k, degree).monomials(degree))


def symmetric_tensor_from_coefficients(coeffs: np.ndarray, k: int, degree: int) -> np.ndarray:
    """Fully symmetric tensor T with T·s^degree reproducing the monomial coefficients.

    ``coeffs`` has shape (..., n_monomials); the result has shape (..., k, ..., k).
    """
    monomials = symmetric_monomials(k, degree)
    lead = coeffs.shape[:-1]
    out = np.zeros(lead + (k,) * degree)
    for position, exponent in enumerate(monomials):
        indices = [v for v, e in enumerate(exponent) for _ in range(e)]
        multiplicity = factorial(degree) / np.prod([factorial(e) for e in exponent])
        value = coeffs[..., position] / multiplicity
        for perm in set(permutations(indices)):
            out[(Ellipsis,) + tuple(perm)] = value
    return out


def coefficients_from_symmetric_tensor(tensor: np.ndarray, k: int, degree: int) -> np.ndarray:
    """Inverse of symmetric_tensor_from_coefficients (symmetrizes first)."""
    monomials = symmetric_monomials(k, degree)
    lead = tensor.shape[: tensor.ndim - degree]
    out = np.zeros(lead + (len(monomials),))
    for position, exponent in enumerate(monomials):
        indices = [v for v, e in enumerate(exponent) for _ in range(e)]
        perms = set(permutations(indices))
        value = sum(tensor[(Ellipsis,) + p] for p in perms)
        out[..., position] = value
    return out


def trace_free(tensor: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto tensors with every pairwise trace zero."""
    tensor = np.asarray(tensor, dtype=float)
    rank = tensor.ndim
    if rank < 2:
        return tensor.copy()
    k = tensor.shape[0]
    delta = np.eye(k)
    columns = []
    for first, second in combinations(range(rank), 2):
        rest = [axis for axis in range(rank) if axis not in (first, second)]
        for index in np.ndindex(*(k,) * (rank - 2)):
            column = np.zeros((k,) * rank)
            for i in range(k):
                position = [0] * rank
                position[first] = position[second] = i
                for axis, value in zip(rest, index):
                    position[axis] = value
                column[tuple(position)] = 1.0
            columns.append(column.reshape(-1))
    E = np.stack(columns, axis=1)
    flat = tensor.reshape(-1)
    coefficients = linalg.lstsq(E, flat, cond=1e-12)[0]
    return (flat - E @ coefficients).reshape(tensor.shape)
