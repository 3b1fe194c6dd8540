"""Exact reformulation of the joint beamforming / discrete phase problem.

The N diagonal phase coefficients are encoded by a one-hot selection matrix B
acting on a fixed block-diagonal matrix Theta of the L-th roots of unity, so
that Phi = B @ Theta and the lifted channel Hhat = Theta @ F is a constant of
the instance.  The bilinear coupling X = Phi F W is replaced by a PSD block
constraint plus a linear trace bound, and each SINR constraint by a
second-order-cone inequality plus one phase-alignment equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet


def build_phase_vector(L: int) -> np.ndarray:
    """The L-th roots of unity [1, e^{j 2pi/L}, ..., e^{j (L-1) 2pi/L}]."""
    if L < 1:
        raise ValueError("need at least one phase level")
    return np.exp(2j * np.pi * np.arange(L) / L)


@dataclass(frozen=True)
class PhaseSelection:
    """One phase level index in {0, ..., L-1} per IRS element."""
    levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if any(v < 0 for v in self.levels):
            raise ValueError("levels must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.levels)

    def onehot(self, L: int) -> np.ndarray:
        """Stacked one-hot rows, shape (N, L)."""
        self._check(L)
        out = np.zeros((self.n, L))
        out[np.arange(self.n), list(self.levels)] = 1.0
        return out

    def matrix(self, L: int) -> np.ndarray:
        """Block-diagonal selection matrix B, shape (N, N*L)."""
        self._check(L)
        B = np.zeros((self.n, self.n * L))
        for n, lvl in enumerate(self.levels):
            B[n, n * L + lvl] = 1.0
        return B

    def _check(self, L: int) -> None:
        if any(v >= L for v in self.levels):
            raise ValueError(f"level index out of range for L={L}")


def expand_selection(sel: PhaseSelection, L: int) -> np.ndarray:
    """Diagonal of Phi: the selected unit-modulus coefficient per element."""
    theta = build_phase_vector(L)
    sel._check(L)
    return theta[list(sel.levels)]


def recover_selection(phi: np.ndarray, L: int) -> PhaseSelection:
    """Inverse of expand_selection by nearest root-of-unity matching."""
    theta = build_phase_vector(L)
    levels = [int(np.argmin(np.abs(theta - p))) for p in phi]
    return PhaseSelection(tuple(levels))


@dataclass(frozen=True)
class ReformulatedData:
    """Instance constants derived from one channel realization."""
    Theta: np.ndarray   # (N*L, N) block diagonal of the phase vector
    Hhat: np.ndarray    # (N*L, M) lifted channel Theta @ F
    hbar: np.ndarray    # (N, L) real; hbar[n, l] = squared norm of row n*L+l of Hhat
    channels: ChannelSet
    L: int

    @property
    def N(self) -> int:
        return self.Theta.shape[1]

    @property
    def M(self) -> int:
        return self.Hhat.shape[1]

    @property
    def K(self) -> int:
        return self.channels.h.shape[0]

    def effective_channel(self, sel: PhaseSelection) -> np.ndarray:
        """B @ Hhat = Phi @ F for the given selection, shape (N, M)."""
        idx = np.arange(self.N) * self.L + np.asarray(sel.levels)
        return self.Hhat[idx, :]


def build_reformulated(channels: ChannelSet, L: int) -> ReformulatedData:
    theta = build_phase_vector(L)
    N = channels.F.shape[0]
    Theta = np.zeros((N * L, N), dtype=complex)
    for n in range(N):
        Theta[n * L:(n + 1) * L, n] = theta
    Hhat = Theta @ channels.F
    hbar = np.linalg.norm(Hhat, axis=1).reshape(N, L) ** 2
    data = ReformulatedData(Theta=Theta, Hhat=Hhat, hbar=hbar, channels=channels, L=L)
    _self_check(data)
    return data


def _self_check(data: ReformulatedData) -> None:
    # unit-modulus phases preserve row norms, so every level must give the
    # same squared norm as the underlying row of F
    row_norms = np.linalg.norm(data.channels.F, axis=1) ** 2
    if not np.allclose(data.hbar, row_norms[:, None], rtol=1e-12, atol=1e-12 * max(1.0, row_norms.max())):
        raise AssertionError("lifted row norms disagree with channel row norms")


# ---------------------------------------------------------------------------
# evaluation utilities
# ---------------------------------------------------------------------------

def sinr(X: np.ndarray, channels: ChannelSet, sigma2: np.ndarray, k: int) -> float:
    """Linear SINR of user k for effective precoder columns X (N x K)."""
    g = channels.h[k].conj() @ X  # row of h_k^H x_j over j
    signal = np.abs(g[k]) ** 2
    interference = np.sum(np.abs(g) ** 2) - signal
    return float(signal / (interference + sigma2[k]))


def transmit_power(W: np.ndarray) -> float:
    """Total radiated power: sum of squared column norms of W, watts."""
    return float(np.sum(np.abs(W) ** 2))


def sinr_soc_residuals(X: np.ndarray, channels: ChannelSet, gamma: np.ndarray,
                       sigma2: np.ndarray, k: int) -> tuple[float, float]:
    """Residuals of the convex SINR reformulation for user k.

    Returns (cone_residual, alignment_residual): the SINR constraint holds,
    after rotating column k so its useful gain is real nonnegative, iff the
    first is <= 0 and the second is 0.
    """
    g = channels.h[k].conj() @ X
    interference = np.sum(np.abs(g) ** 2) - np.abs(g[k]) ** 2
    cone = float(np.sqrt(interference + sigma2[k]) - g[k].real / np.sqrt(gamma[k]))
    return cone, float(g[k].imag)


def normalize_phases(X: np.ndarray, channels: ChannelSet) -> np.ndarray:
    """Rotate each column so the own-user gain h_k^H x_k is real nonnegative.

    An admissible per-column rotation: it changes neither any SINR nor the
    transmit power.
    """
    out = X.copy()
    for k in range(X.shape[1]):
        g = channels.h[k].conj() @ X[:, k]
        if abs(g) > 0:
            out[:, k] = X[:, k] * (g.conj() / abs(g))
    return out


@dataclass(frozen=True)
class DesignPoint:
    """Continuous variables of the lifted problem for one selection."""
    X: np.ndarray  # (N, K) effective precoder
    W: np.ndarray  # (M, K) BS beamformers
    S: np.ndarray  # (N, N) Hermitian PSD
    T: np.ndarray  # (K, K) Hermitian PSD


def lifting_witness(B: np.ndarray, Hhat: np.ndarray, W: np.ndarray) -> DesignPoint:
    """The canonical point satisfying the PSD lifting with the trace bound tight.

    With G = B @ Hhat: X = G W, S = G G^H, T = W^H W makes the block matrix
    [[S, X, G], [X^H, T, W^H], [G^H, W, I]] equal V V^H for V = [G; W^H; I],
    hence PSD, and Tr(S) equals the selected-row norm sum exactly.
    """
    G = B @ Hhat
    return DesignPoint(X=G @ W, W=W, S=G @ G.conj().T, T=W.conj().T @ W)


def lifting_block_matrix(S: np.ndarray, X: np.ndarray, G: np.ndarray,
                         T: np.ndarray, W: np.ndarray) -> np.ndarray:
    """The Hermitian block matrix of the PSD lifting constraint."""
    M = W.shape[0]
    return np.block([
        [S, X, G],
        [X.conj().T, T, W.conj().T],
        [G.conj().T, W, np.eye(M, dtype=complex)],
    ])
