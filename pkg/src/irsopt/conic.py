"""Thin cone-programming layer.

Represents a problem as

    min  c'x   s.t.   b_j - A_j x  in  K_j   for every constraint block j,

with cones K_j drawn from {zero, nonnegative, second-order, PSD-triangle},
and solves it with the Clarabel interior-point solver.  Complex Hermitian
PSD constraints are handled through the real symmetric embedding
[[Re, -Im], [Im, Re]].

Sign conventions used throughout the package:

* the dual z_j of a block lives in the dual cone; the Lagrangian is
  ``c'x + sum_j z_j'(A_j x - b_j)`` (inequality residuals in "<= 0" form),
* for a PSD block encoding M(x) >> 0, the recovered complex dual Q is
  positive semidefinite and contributes ``-Tr(Q M(x))`` to the Lagrangian.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

import clarabel

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200

_SQRT2 = np.sqrt(2.0)


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


class NumericalFailure(RuntimeError):
    """Solver stopped without a trustworthy answer (iteration cap, stall)."""


# ---------------------------------------------------------------------------
# symmetric / Hermitian vectorization helpers
# ---------------------------------------------------------------------------

def svec(M: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle (column-major) vectorization of a symmetric matrix.

    Off-diagonal entries are multiplied by sqrt(2) so that
    ``svec(A) @ svec(B) == <A, B>_F``.
    """
    d = M.shape[0]
    out = np.empty(d * (d + 1) // 2)
    k = 0
    for j in range(d):
        for i in range(j + 1):
            out[k] = M[i, j] if i == j else _SQRT2 * M[i, j]
            k += 1
    return out


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    n = v.shape[0]
    d = round_side(n)
    M = np.empty((d, d))
    k = 0
    for j in range(d):
        for i in range(j + 1):
            if i == j:
                M[i, j] = v[k]
            else:
                M[i, j] = M[j, i] = v[k] / _SQRT2
            k += 1
    return M


def round_side(tri_len: int) -> int:
    d = int((np.sqrt(8 * tri_len + 1) - 1) / 2)
    if d * (d + 1) // 2 != tri_len:
        raise ValueError(f"{tri_len} is not a triangular number")
    return d


def real_embed(M: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a complex Hermitian matrix.

    M >> 0 (Hermitian sense) iff the embedding is PSD.
    """
    A, B = M.real, M.imag
    return np.block([[A, -B], [B, A]])


def complex_dual_from_real(Y: np.ndarray) -> np.ndarray:
    """Recover the complex PSD dual Q from the dual Y of an embedded block.

    Q is scaled so that ``<Y, real_embed(M)>_F == Tr(Q @ M)`` for every
    Hermitian M; hence Q is the multiplier of the complex constraint.
    """
    d = Y.shape[0] // 2
    Y11, Y12 = Y[:d, :d], Y[:d, d:]
    Y21, Y22 = Y[d:, :d], Y[d:, d:]
    P = (Y11 + Y22) / 2.0
    R = (Y21 - Y12) / 2.0
    Q = P + 1j * R
    # symmetrize away solver round-off
    Q = (Q + Q.conj().T) / 2.0
    return 2.0 * Q


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    dim: int


@dataclass(frozen=True)
class NonNeg:
    dim: int


@dataclass(frozen=True)
class SecondOrder:
    """s[0] >= ||s[1:]||_2; ``dim`` counts all components including s[0]."""
    dim: int


@dataclass(frozen=True)
class PSDTriangle:
    """Real symmetric PSD cone given by its matrix side length."""
    side: int

    @property
    def dim(self) -> int:
        return self.side * (self.side + 1) // 2


Cone = Zero | NonNeg | SecondOrder | PSDTriangle


def _clarabel_cone(cone: Cone):
    if isinstance(cone, Zero):
        return clarabel.ZeroConeT(cone.dim)
    if isinstance(cone, NonNeg):
        return clarabel.NonnegativeConeT(cone.dim)
    if isinstance(cone, SecondOrder):
        return clarabel.SecondOrderConeT(cone.dim)
    if isinstance(cone, PSDTriangle):
        return clarabel.PSDTriangleConeT(cone.side)
    raise TypeError(f"unknown cone {cone!r}")


# ---------------------------------------------------------------------------
# program container
# ---------------------------------------------------------------------------

@dataclass
class _Block:
    name: str
    cone: Cone
    A: np.ndarray  # (cone.dim, nvar)
    b: np.ndarray  # (cone.dim,)


class ConeProgram:
    """A conic program over a flat real variable vector with named slices.

    Variables are declared first; constraint blocks may then be added either
    from explicit (A, b) data or from an affine callable evaluated at the
    origin and at unit vectors.
    """

    def __init__(self):
        self._var_offsets: dict[str, slice] = {}
        self._nvar = 0
        self._frozen = False
        self._objective: np.ndarray | None = None
        self.blocks: list[_Block] = []

    # -- variables ---------------------------------------------------------

    def add_var(self, name: str, size: int) -> slice:
        if self._frozen:
            raise RuntimeError("cannot add variables after constraints")
        if name in self._var_offsets:
            raise ValueError(f"duplicate variable {name!r}")
        sl = slice(self._nvar, self._nvar + size)
        self._var_offsets[name] = sl
        self._nvar += size
        return sl

    @property
    def nvar(self) -> int:
        return self._nvar

    def var_slice(self, name: str) -> slice:
        return self._var_offsets[name]

    # -- objective ----------------------------------------------------------

    def _obj(self) -> np.ndarray:
        if self._objective is None:
            self._objective = np.zeros(self._nvar)
        return self._objective

    def add_cost(self, name: str, coeff) -> None:
        """Add a linear cost term ``coeff . x[name]``."""
        self._frozen = True
        self._obj()[self._var_offsets[name]] += coeff

    # -- constraints ---------------------------------------------------------

    def add_block(self, name: str, cone: Cone, A, b) -> None:
        self._frozen = True
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape != (cone.dim, self._nvar) or b.shape != (cone.dim,):
            raise ValueError(
                f"block {name!r}: expected A {(cone.dim, self._nvar)}, b ({cone.dim},), "
                f"got {A.shape}, {b.shape}"
            )
        self.blocks.append(_Block(name, cone, A, b))

    def _affine_columns(self, fn) -> tuple[np.ndarray, np.ndarray]:
        """Extract (A, b) with s(x) = b - A x from an affine callable s(x)."""
        self._frozen = True
        x0 = np.zeros(self._nvar)
        b = np.asarray(fn(x0), dtype=float)
        A = np.empty((b.shape[0], self._nvar))
        e = np.zeros(self._nvar)
        for j in range(self._nvar):
            e[j] = 1.0
            A[:, j] = b - np.asarray(fn(e), dtype=float)
            e[j] = 0.0
        return A, b

    def add_affine(self, name: str, cone: Cone, fn) -> None:
        """Add a block from an affine callable ``fn(x) -> member vector``.

        The callable must return the vector required to lie in ``cone``
        (for SecondOrder, component 0 is the norm bound).
        """
        A, b = self._affine_columns(fn)
        self.add_block(name, cone, A, b)

    def add_psd_complex(self, name: str, fn) -> None:
        """Add ``fn(x) >> 0`` for an affine Hermitian-matrix-valued callable."""
        def embedded(x):
            return svec(real_embed(np.asarray(fn(x))))
        A, b = self._affine_columns(embedded)
        side = 2 * np.asarray(fn(np.zeros(self._nvar))).shape[0]
        self.add_block(name, PSDTriangle(side), A, b)

    # -- solve ---------------------------------------------------------------

    def solve(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> "ConicSolution":
        if not self.blocks:
            raise ValueError("program has no constraints")
        q = self._obj().copy()
        A = sp.csc_matrix(sp.vstack([sp.csc_matrix(blk.A) for blk in self.blocks]))
        b = np.concatenate([blk.b for blk in self.blocks])
        cones = [_clarabel_cone(blk.cone) for blk in self.blocks]
        P = sp.csc_matrix((self._nvar, self._nvar))

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iter
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol

        raw = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
        status = _map_status(raw.status)
        return ConicSolution(
            status=status,
            x=np.asarray(raw.x),
            z=np.asarray(raw.z),
            s=np.asarray(raw.s),
            objective=float(raw.obj_val) if status is SolveStatus.OPTIMAL else float("nan"),
            dual_objective=float(raw.obj_val_dual) if status is SolveStatus.OPTIMAL else float("nan"),
            iterations=int(raw.iterations),
            solve_time=float(raw.solve_time),
            primal_residual=float(raw.r_prim),
            dual_residual=float(raw.r_dual),
            program=self,
        )

    # -- block bookkeeping ----------------------------------------------------

    def block_rows(self, name: str) -> slice:
        off = 0
        for blk in self.blocks:
            if blk.name == name:
                return slice(off, off + blk.cone.dim)
            off += blk.cone.dim
        raise KeyError(name)

    def block(self, name: str) -> _Block:
        for blk in self.blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    # -- debugging dump --------------------------------------------------------
    #
    # Sparse-text format, one record per line:
    #   var <name> <offset> <size>
    #   obj <index> <value>              (nonzeros of the cost vector)
    #   block <name> <cone> <dim-or-side>
    #   a <row> <col> <value>            (nonzeros of the block's A, local rows)
    #   b <row> <value>                  (nonzeros of the block's b)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"coneprogram nvar {self._nvar}\n")
            for name, sl in self._var_offsets.items():
                fh.write(f"var {name} {sl.start} {sl.stop - sl.start}\n")
            for idx in np.nonzero(self._obj())[0]:
                fh.write(f"obj {idx} {self._obj()[idx]!r}\n")
            for blk in self.blocks:
                kind = type(blk.cone).__name__
                size = blk.cone.side if isinstance(blk.cone, PSDTriangle) else blk.cone.dim
                fh.write(f"block {blk.name} {kind} {size}\n")
                rows, cols = np.nonzero(blk.A)
                for r, c in zip(rows, cols):
                    fh.write(f"a {r} {c} {blk.A[r, c]!r}\n")
                for r in np.nonzero(blk.b)[0]:
                    fh.write(f"b {r} {blk.b[r]!r}\n")


def _map_status(raw_status) -> SolveStatus:
    name = str(raw_status)
    if name == "Solved":
        return SolveStatus.OPTIMAL
    if name == "PrimalInfeasible":
        return SolveStatus.INFEASIBLE
    if name == "DualInfeasible":
        return SolveStatus.UNBOUNDED
    return SolveStatus.NUMERICAL_FAILURE


# ---------------------------------------------------------------------------
# solution
# ---------------------------------------------------------------------------

@dataclass
class ConicSolution:
    status: SolveStatus
    x: np.ndarray
    z: np.ndarray
    s: np.ndarray
    objective: float
    dual_objective: float
    iterations: int
    solve_time: float
    primal_residual: float
    dual_residual: float
    program: ConeProgram

    def primal(self, name: str) -> np.ndarray:
        return self.x[self.program.var_slice(name)]

    def primal_complex(self, re_name: str, im_name: str, shape) -> np.ndarray:
        re = self.primal(re_name).reshape(shape)
        im = self.primal(im_name).reshape(shape)
        return re + 1j * im

    def dual(self, name: str) -> np.ndarray:
        """Raw dual vector of a constraint block (Farkas ray when infeasible)."""
        return self.z[self.program.block_rows(name)]

    def slack(self, name: str) -> np.ndarray:
        return self.s[self.program.block_rows(name)]

    def psd_dual_complex(self, name: str) -> np.ndarray:
        """Complex Hermitian PSD dual of a block added via add_psd_complex."""
        return complex_dual_from_real(smat(self.dual(name)))

    def require_optimal(self) -> "ConicSolution":
        if self.status is SolveStatus.NUMERICAL_FAILURE:
            raise NumericalFailure(
                f"solver failed after {self.iterations} iterations "
                f"(r_prim={self.primal_residual:.2e}, r_dual={self.dual_residual:.2e})"
            )
        return self

    def certificate_violation(self) -> float:
        """b'z for an infeasibility certificate; strictly negative when valid."""
        b = np.concatenate([blk.b for blk in self.program.blocks])
        return float(b @ self.z)
