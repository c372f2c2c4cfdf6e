"""Generalized Gell-Mann generators, adjoint representations and su(n) root systems.

Generator ordering (``gellmann-v1``)
------------------------------------
Index 0 is the identity.  Generators are then added level by level: for
``k = 2, ..., n`` and every ``j < k`` the symmetric matrix ``E_jk + E_kj``
followed by the antisymmetric matrix ``-i E_jk + i E_kj``, and finally the
diagonal generator of level ``k``, which therefore sits at index ``k**2 - 1``.
For n = 2 this is (I, sx, sy, sz); for n = 3 it is the usual Gell-Mann order.

The ladder (gl(n)) basis replaces every symmetric/antisymmetric pair
``(m, m + 1)`` by ``K_m = E_jk`` and ``K_{m+1} = E_kj`` and keeps the
identity and the diagonal generators.  Root indices are the ladder indices
``m``, so ``alpha_1`` belongs to ``E_12``, ``alpha_4`` to ``E_13``, ``alpha_6``
to ``E_23`` and so on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

GENERATOR_ORDER = "gellmann-v1"
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class GeneratorSet:
    n: int
    generators: np.ndarray  # (n**2, n, n), index 0 = identity
    structure_constants: np.ndarray  # (n**2-1,)*3, generator indices shifted by one

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def csa_indices(self) -> tuple[int, ...]:
        return tuple(k * k - 1 for k in range(2, self.n + 1))

    def coordinates(self, A: np.ndarray) -> np.ndarray:
        """Coordinates of ``A`` in the generator basis (``A = sum_j c_j L_j``)."""
        return generator_coordinates(A, self)

    def matrix(self, coords: np.ndarray) -> np.ndarray:
        return np.tensordot(coords, self.generators, axes=(0, 0))


@dataclass(frozen=True)
class LadderBasis:
    n: int
    operators: np.ndarray  # (n**2, n, n)
    csa_indices: tuple[int, ...]
    # ladder index -> (row, col) of the single unit entry
    positions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AdjointMap:
    n: int
    matrix: np.ndarray
    basis_tag: str  # "generator" or "ladder"


@dataclass(frozen=True)
class RootSystem:
    n: int
    roots: tuple  # ((ladder index, root vector), ...)
    positive_indices: tuple[int, ...]
    simple_indices: tuple[int, ...]
    change_matrix: np.ndarray  # rows are the simple roots
    jacobian: float

    def root(self, m: int) -> np.ndarray:
        for idx, vec in self.roots:
            if idx == m:
                return vec
        raise KeyError(f"no root with ladder index {m}")

    def simple_coefficients(self, m: int) -> np.ndarray:
        """Coefficients of root ``m`` in the simple-root basis."""
        return np.linalg.solve(self.change_matrix.T, self.root(m))

    def pairing(self, m: int) -> int:
        """Ladder index of the root opposite to ``m``."""
        return m + 1 if m in self.positive_indices else m - 1


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n!r}")


def _pair_layout(n: int) -> list[tuple[int, int, int]]:
    """(symmetric index, j, k) for every off-diagonal pair, 0-based j < k."""
    out = []
    idx = 1
    for k in range(1, n):
        for j in range(k):
            out.append((idx, j, k))
            idx += 2
        idx += 1  # diagonal generator of this level
    return out


def _diagonal_generator(k: int, n: int) -> np.ndarray:
    # level k (1-based, k >= 2) acts on the first k basis states
    d = np.zeros(n)
    d[: k - 1] = 1.0
    d[k - 1] = -(k - 1)
    return np.diag(d * np.sqrt(2.0 / (k * (k - 1)))).astype(complex)


@lru_cache(maxsize=None)
def _build_generators(n: int) -> GeneratorSet:
    N = n * n
    gens = np.zeros((N, n, n), dtype=complex)
    gens[0] = np.eye(n)
    for idx, j, k in _pair_layout(n):
        gens[idx, j, k] = gens[idx, k, j] = 1.0
        gens[idx + 1, j, k] = -1j
        gens[idx + 1, k, j] = 1j
    for k in range(2, n + 1):
        gens[k * k - 1] = _diagonal_generator(k, n)

    L = gens[1:]
    # [L_k, L_l] = 2i c_klm L_m  and  Tr(L_m L_n) = 2 delta_mn
    comm = np.einsum("kab,lbc->klac", L, L) - np.einsum("lab,kbc->klac", L, L)
    c = np.einsum("klab,mba->klm", comm, L) / 4j
    gens.setflags(write=False)
    c = np.ascontiguousarray(c.real)
    c.setflags(write=False)
    return GeneratorSet(n=n, generators=gens, structure_constants=c)


def build_generators(n: int) -> GeneratorSet:
    """Identity plus the n**2 - 1 generalized Gell-Mann matrices for u(n)."""
    _check_n(n)
    return _build_generators(int(n))


def generator_coordinates(A: np.ndarray, gens: GeneratorSet) -> np.ndarray:
    A = np.asarray(A)
    n = gens.n
    # c_0 = Tr(A)/n, c_j = Tr(L_j A)/2
    c = np.einsum("jab,...ba->...j", gens.generators, A) / 2.0
    c[..., 0] = np.trace(A, axis1=-2, axis2=-1) / n
    return c


@lru_cache(maxsize=None)
def _ladder(n: int) -> LadderBasis:
    gens = _build_generators(n)
    ops = np.array(gens.generators, dtype=complex)
    positions = {}
    for idx, j, k in _pair_layout(n):
        ops[idx] = 0
        ops[idx + 1] = 0
        ops[idx, j, k] = 1.0
        ops[idx + 1, k, j] = 1.0
        positions[idx] = (j, k)
        positions[idx + 1] = (k, j)
    ops.setflags(write=False)
    return LadderBasis(n=n, operators=ops, csa_indices=gens.csa_indices, positions=positions)


def ladder_basis(n: int) -> LadderBasis:
    _check_n(n)
    return _ladder(int(n))


@lru_cache(maxsize=None)
def _diagonalizer(n: int) -> tuple[np.ndarray, np.ndarray]:
    N = n * n
    X = np.eye(N, dtype=complex)
    Xinv = np.eye(N, dtype=complex)
    for idx, _, _ in _pair_layout(n):
        s, a = idx, idx + 1
        # ladder coordinates: d_m = c_s - i c_a, d_{m+1} = c_s + i c_a
        X[s, s], X[s, a] = 1.0, -1j
        X[a, s], X[a, a] = 1.0, 1j
        Xinv[s, s], Xinv[s, a] = 0.5, 0.5
        Xinv[a, s], Xinv[a, a] = 0.5j, -0.5j
    X.setflags(write=False)
    Xinv.setflags(write=False)
    return X, Xinv


def simultaneous_diagonalizer(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Change of basis (X, X^-1) from generator to ladder coordinates.

    ``X @ ad(H) @ X^-1`` is diagonal for every H in the Cartan subalgebra.
    """
    _check_n(n)
    return _diagonalizer(int(n))


def adjoint_rep(
    H: np.ndarray, gens: GeneratorSet, basis: str = "generator", tol: float = DEFAULT_TOL
) -> AdjointMap:
    """Matrix of ``[H, .]`` acting on u(n) coordinates.

    Columns are images of basis elements: ``[H, B_k] = sum_j B_j M_jk``.
    """
    H = np.asarray(H, dtype=complex)
    n = gens.n
    if H.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got shape {H.shape}")
    if np.max(np.abs(H - H.conj().T)) > tol:
        raise ValueError("adjoint_rep requires a Hermitian matrix")
    L = gens.generators
    comm = np.einsum("ab,kbc->kac", H, L) - np.einsum("kab,bc->kac", L, H)
    M = generator_coordinates(comm, gens).T  # M[j, k] = coord_j([H, L_k])
    if basis == "ladder":
        X, Xinv = simultaneous_diagonalizer(n)
        M = X @ M @ Xinv
    elif basis != "generator":
        raise ValueError(f"unknown basis {basis!r}")
    return AdjointMap(n=n, matrix=M, basis_tag=basis)


def cartan_element(lam, gens: GeneratorSet) -> np.ndarray:
    """H_lambda = sum_k lambda_{k^2-1} L_{k^2-1} / 2."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    idx = gens.csa_indices
    if lam.size != len(idx):
        raise ValueError(f"expected {len(idx)} Cartan parameters, got {lam.size}")
    return np.tensordot(lam, gens.generators[list(idx)], axes=(0, 0)) / 2.0


def _is_positive(vec: np.ndarray, tol: float) -> bool:
    # first nonzero coordinate, scanning from the highest Cartan index down
    for v in vec[::-1]:
        if abs(v) > tol:
            return v > 0
    raise ValueError("zero root")


@lru_cache(maxsize=None)
def _root_system(n: int) -> RootSystem:
    gens = _build_generators(n)
    lad = _ladder(n)
    diag = np.array([np.real(np.diag(gens.generators[i])) for i in gens.csa_indices])
    roots = []
    for m in sorted(lad.positions):
        j, k = lad.positions[m]
        # [H_lambda, E_jk] = (h_j - h_k) E_jk with h = diag(H_lambda)
        roots.append((m, (diag[:, j] - diag[:, k]) / 2.0))
    tol = DEFAULT_TOL
    positive = [m for m, v in roots if _is_positive(v, tol)]
    vec = dict(roots)
    pos_set = {m: vec[m] for m in positive}
    sums = [vec[a] + vec[b] for a, b in combinations(positive, 2)]
    simple = [
        m
        for m in positive
        if not any(np.allclose(pos_set[m], s, atol=tol, rtol=0) for s in sums)
    ]
    A = np.array([vec[m] for m in simple])
    for arr in [A] + [v for _, v in roots]:
        arr.setflags(write=False)
    return RootSystem(
        n=n,
        roots=tuple(roots),
        positive_indices=tuple(positive),
        simple_indices=tuple(simple),
        change_matrix=A,
        jacobian=float(1.0 / abs(np.linalg.det(A))),
    )


def root_system(n: int) -> RootSystem:
    """Roots alpha_m of su(n) with ``[H_lambda, K_m] = (alpha_m . lambda) K_m``."""
    _check_n(n)
    return _root_system(int(n))


def positive_root_pairs(n: int) -> dict[int, tuple[int, int]]:
    """Map positive-root ladder index to the (row, col) coherence it multiplies."""
    lad = ladder_basis(n)
    rs = root_system(n)
    return {m: lad.positions[m] for m in rs.positive_indices}
