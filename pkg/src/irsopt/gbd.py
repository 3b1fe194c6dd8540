"""Benders-style optimal solver for the joint beamforming / phase problem.

Alternates between a convex subproblem (beamformers for a fixed selection) and
an MILP master over the phase selections built from dual-derived cuts; the
master is solved exactly by best-bound branch-and-bound on LP relaxations.

Numerics.  The lifted SDP form of the subproblem (variables X, W, S, T with
the PSD block coupling them to the selection) has no strictly feasible point:
the trace bound pins S to a boundary face, and for the pure power objective
the dual is not even attained (the free T block forces the matching dual
block to zero, contradicting stationarity in W).  Interior-point solvers
stall on it.  We therefore solve the equivalent *natural* SOCP in W alone
(X = G W substituted), which satisfies Slater's condition and yields exact
infeasibility certificates, and then construct the lifted-problem dual bundle
(alpha, beta, q, Q) in closed form from the SOCP's KKT conditions.  A small
exact regularizer (see EPS_T) makes the constructed dual exist; the cut
coefficients and bounds it produces are exactly valid for the true value
function.

All subproblems are solved in normalized units (channels and noise rescaled to
order one) and primal/dual quantities are converted back exactly, which keeps
the arithmetic sane despite physical powers of order 1e-15 W.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, ScenarioConfig
from .conic import ConeProgram, NonNeg, NumericalFailure, SecondOrder, SolveStatus, Zero
from .reformulation import (
    DesignPoint,
    PhaseSelection,
    ReformulatedData,
    build_reformulated,
    lifting_block_matrix,
    normalize_phases,
    transmit_power,
)

DEFAULT_SOLVE_TOL = 1e-7
MASTER_SOLVE_TOL = 1e-8

# Weight of the exact Tr(T) term folded into the constructed dual.  The
# lifting constraints pin T >= W^H W with minimal trace ||W||^2, so a
# (1 + EPS_T) scaling of the subproblem value function is exact and is
# divided back out of every reported quantity; EPS_T > 0 is what makes a
# positive-semidefinite dual block Q with the required structure exist.
EPS_T = 1e-4
# Same role for the feasibility subproblem's dual; there the regularizer is
# not divided out (the slack optimum is reproduced exactly regardless), but
# it biases the cut upward at other selections by at most EPS_F times their
# power, so it is kept much smaller.
EPS_F = 1e-8


class CutValidityError(RuntimeError):
    """The master revisited a selection below the incumbent: a cut is wrong
    or the subproblem duals are inaccurate."""


class GbdNumericalError(RuntimeError):
    def __init__(self, msg: str, state: "GbdState | None" = None):
        super().__init__(msg)
        self.state = state


# ---------------------------------------------------------------------------
# unit normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Scaling:
    """Exact reparametrization mapping the instance to order-one units.

    Scaled data: F/t, h/s, sigma * r/(s t); scaled beamformer r*W, so the
    scaled power objective is r**2 times the true one.
    """
    s: float
    t: float
    r: float
    data: ReformulatedData       # scaled instance constants
    sigma2: np.ndarray           # scaled noise variances
    sigma: np.ndarray

    @property
    def rho_c1a(self) -> float:
        """Scale factor of the SINR-cone residuals (scaled = rho * true)."""
        return self.r / (self.s * self.t)

    @property
    def rho_c2b(self) -> float:
        return 1.0 / self.t ** 2

    def psd_diag(self) -> np.ndarray:
        n, k, m = self.data.N, self.data.K, self.data.M
        return np.concatenate([np.full(n, 1.0 / self.t), np.full(k, self.r), np.ones(m)])


def _make_scaling(data: ReformulatedData, cfg: ScenarioConfig) -> _Scaling:
    F = data.channels.F
    h = data.channels.h
    t = float(np.sqrt(np.mean(np.abs(F) ** 2)))
    s = float(np.sqrt(np.mean(np.abs(h) ** 2)))
    if not (t > 0 and s > 0):
        raise ValueError("degenerate (all-zero) channels")
    sigma_max = float(np.sqrt(np.max(cfg.sigma2)))
    r = s * t / sigma_max
    scaled_channels = ChannelSet(F=F / t, h=h / s)
    sigma2 = cfg.sigma2 * (r / (s * t)) ** 2
    return _Scaling(s=s, t=t, r=r, data=build_reformulated(scaled_channels, data.L),
                    sigma2=sigma2, sigma=np.sqrt(sigma2))


def _herm_from_params(v: np.ndarray, d: int) -> np.ndarray:
    """Hermitian matrix from d**2 real parameters (sym real + antisym imag)."""
    R = np.zeros((d, d))
    I = np.zeros((d, d))
    k = 0
    for j in range(d):
        for i in range(j + 1):
            R[i, j] = R[j, i] = v[k]
            k += 1
    for j in range(d):
        for i in range(j):
            I[i, j] = -v[k]
            I[j, i] = v[k]
            k += 1
    return R + 1j * I


# ---------------------------------------------------------------------------
# dual bundle
# ---------------------------------------------------------------------------

@dataclass
class DualBundle:
    """Multipliers of the SINR cone (alpha), phase alignment (beta), PSD
    lifting (Q) and trace-bound (q) constraints of one subproblem, in original
    units, under the convention: Lagrangian = objective + sum(duals *
    residuals-in-"<= 0"-form) - Tr(Q M)."""
    alpha: np.ndarray  # (K,) >= 0
    beta: np.ndarray   # (K,) free
    Q: np.ndarray      # (N+K+M, N+K+M) complex Hermitian PSD
    q: float           # >= 0
    dims: tuple[int, int, int]

    def q_block(self, i: int, j: int) -> np.ndarray:
        n, k, m = self.dims
        edges = np.cumsum([0, n, k, m])
        return self.Q[edges[i]:edges[i + 1], edges[j]:edges[j + 1]]

    @property
    def Q31(self) -> np.ndarray:
        return self.q_block(2, 0)

    @property
    def Q32(self) -> np.ndarray:
        return self.q_block(2, 1)


# ---------------------------------------------------------------------------
# natural subproblem (SOCP in W)
# ---------------------------------------------------------------------------

def _build_natural(sc: _Scaling, gamma: np.ndarray, G: np.ndarray,
                   with_slack: bool) -> ConeProgram:
    """SOCP for the fixed-selection subproblem with X = G W substituted.

    with_slack=False: power minimization under the SINR constraints.
    with_slack=True: l1 feasibility check, minimizing the sum of per-user
    slacks added to the SINR cone constraints (always feasible).
    """
    d = sc.data
    K, M = d.K, d.M
    heff = d.channels.h.conj() @ G       # (K, M); row k maps W columns to h_k^H x_j

    prog = ConeProgram()
    wre = prog.add_var("Wre", M * K)
    wim = prog.add_var("Wim", M * K)
    if with_slack:
        lam = prog.add_var("lam", K)
    else:
        upow = prog.add_var("u", 1)

    def wmat(x):
        return x[wre].reshape(M, K) + 1j * x[wim].reshape(M, K)

    for k in range(K):
        others = [j for j in range(K) if j != k]

        def soc_k(x, k=k, others=others):
            g = heff[k] @ wmat(x)
            head = g[k].real / np.sqrt(gamma[k])
            if with_slack:
                head = head + x[lam][k]
            tail = [sc.sigma[k]]
            for j in others:
                tail.extend([g[j].real, g[j].imag])
            return np.concatenate([[head], tail])

        def align_k(x, k=k):
            g = heff[k] @ wmat(x)
            return np.array([g[k].imag])

        prog.add_affine(f"C1a[{k}]", SecondOrder(2 * (K - 1) + 2), soc_k)
        prog.add_affine(f"C1b[{k}]", Zero(1), align_k)

    if with_slack:
        prog.add_affine("C4", NonNeg(K), lambda x: x[lam])
        prog.add_cost("lam", np.ones(K))
    else:
        def power_epi(x):
            u = x[upow][0]
            flat = np.concatenate([2.0 * x[wre], 2.0 * x[wim], [u - 1.0]])
            return np.concatenate([[u + 1.0], flat])

        prog.add_affine("power", SecondOrder(2 * M * K + 2), power_epi)
        prog.add_cost("u", np.array([1.0]))
    return prog


def _sinr_gradient(sc: _Scaling, gamma: np.ndarray, X: np.ndarray,
                   alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Gradient (in the convention df = 2 Re Tr(D^H dX)) of the weighted SINR
    residuals f1 = sum_k alpha_k * cone_residual_k + beta_k * Im(h_k^H x_k)."""
    h = sc.data.channels.h
    N, K = X.shape
    D = np.zeros((N, K), dtype=complex)
    for k in range(K):
        g = h[k].conj() @ X
        interf = float(np.sum(np.abs(g) ** 2) - np.abs(g[k]) ** 2)
        sq = np.sqrt(interf + sc.sigma2[k])
        for j in range(K):
            if j != k:
                D[:, j] += alpha[k] * h[k] * g[j] / (2.0 * sq)
        D[:, k] += -alpha[k] * h[k] / (2.0 * np.sqrt(gamma[k])) + beta[k] * 1j * h[k] / 2.0
    return D


def _min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((M + M.conj().T) / 2.0)[0])


def _construct_duals(sc: _Scaling, G: np.ndarray, W: np.ndarray, X: np.ndarray,
                     alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray,
                     feasibility: bool, eps: float) -> tuple[float, np.ndarray]:
    """Closed-form (q, Q) of the lifted subproblem from the natural SOCP KKT
    point, in scaled units.

    The block structure is fixed by stationarity and complementary slackness
    (Q11 = q I, Q22 = eps I, Q12 from the SINR-residual gradient, bottom
    blocks from Q [G; W^H; I] = 0); q is the one remaining degree of freedom
    and is chosen minimally such that Q is positive semidefinite.
    """
    d = sc.data
    N, K, M = d.N, d.K, d.M
    Q12 = _sinr_gradient(sc, gamma, X, alpha, beta)
    # Positive semidefiniteness of Q for some finite q requires the coupling
    # identity G^H Q12 = -(1 + eps) * W (power) / = 0 (feasibility), which the
    # solver's W-stationarity satisfies only to its own tolerance; project the
    # residual out exactly.
    target = np.zeros((M, K), dtype=complex) if feasibility else -(1.0 + eps) * W
    resid = target - G.conj().T @ Q12
    Q12 = Q12 + G @ np.linalg.lstsq(G.conj().T @ G, resid, rcond=None)[0]
    if feasibility:
        Q32 = np.zeros((M, K), dtype=complex)
    else:
        Q32 = -G.conj().T @ Q12 - eps * W      # now exactly W

    def assemble(q: float) -> np.ndarray:
        Q13 = -q * G - Q12 @ W.conj().T
        Q33 = -(Q13.conj().T @ G + Q32 @ W.conj().T)
        Q33 = (Q33 + Q33.conj().T) / 2.0
        Q = np.zeros((N + K + M, N + K + M), dtype=complex)
        Q[:N, :N] = q * np.eye(N)
        Q[:N, N:N + K] = Q12
        Q[N:N + K, :N] = Q12.conj().T
        Q[:N, N + K:] = Q13
        Q[N + K:, :N] = Q13.conj().T
        Q[N:N + K, N:N + K] = eps * np.eye(K)
        Q[N:N + K, N + K:] = Q32.conj().T
        Q[N + K:, N:N + K] = Q32
        Q[N + K:, N + K:] = Q33
        return Q

    scale = max(1.0, float(np.abs(Q12).max()) ** 2 / eps)
    psd_tol = -1e-9 * scale
    q_hi = scale
    for _ in range(200):
        if _min_eig(assemble(q_hi)) >= psd_tol:
            break
        q_hi *= 2.0
    else:
        raise NumericalFailure("could not find a PSD dual block Q")
    # shrink q toward the minimal PSD choice: smaller q gives tighter cuts
    q_lo = 0.0
    for _ in range(60):
        mid = 0.5 * (q_lo + q_hi)
        if _min_eig(assemble(mid)) >= psd_tol:
            q_hi = mid
        else:
            q_lo = mid
    return q_hi, assemble(q_hi)


# ---------------------------------------------------------------------------
# primal / feasibility solves
# ---------------------------------------------------------------------------

@dataclass
class PrimalResult:
    feasible: bool
    objective: float                      # watts, or sum of slacks for the feasibility problem
    design: DesignPoint | None
    duals: DualBundle | None
    slacks: np.ndarray | None = None      # feasibility problem only
    iterations: int = 0


def _unscale_duals(sc: _Scaling, alpha, beta, q, Q, rho_obj: float) -> DualBundle:
    """Map scaled-unit multipliers to multipliers of the original-unit
    constraints (scaled residual = rho_c * true residual, scaled objective =
    rho_obj * true objective => true dual = scaled dual * rho_c / rho_obj)."""
    diag = sc.psd_diag()
    return DualBundle(
        alpha=np.asarray(alpha) * (sc.rho_c1a / rho_obj),
        beta=np.asarray(beta) * (sc.rho_c1a / rho_obj),
        q=float(q) * (sc.rho_c2b / rho_obj),
        Q=(Q * np.outer(diag, diag)) / rho_obj,
        dims=(sc.data.N, sc.data.K, sc.data.M),
    )


def _socp_multipliers(sol, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers (alpha_k, beta_k) of the scalar-form SINR constraints from
    the SOCP block duals.  alpha is the cone dual's norm-bound component; the
    alignment block member is +Im(h^H x), whose "+beta*Im" multiplier is the
    negative of the solver dual."""
    alpha = np.array([sol.dual(f"C1a[{k}]")[0] for k in range(K)])
    beta = np.array([-sol.dual(f"C1b[{k}]")[0] for k in range(K)])
    return alpha, beta


def solve_primal(data: ReformulatedData, sel: PhaseSelection, cfg: ScenarioConfig,
                 tol: float = DEFAULT_SOLVE_TOL) -> PrimalResult:
    """Minimize transmit power for a fixed phase selection.

    Returns the optimal design, power and constructed dual bundle, or flags
    infeasibility (without duals) so the caller can run the slack-relaxed
    feasibility check.
    """
    sc = _make_scaling(data, cfg)
    G = sc.data.effective_channel(sel)
    prog = _build_natural(sc, cfg.gamma, G, with_slack=False)
    sol = prog.solve(tol=tol).require_optimal()
    if sol.status is SolveStatus.INFEASIBLE:
        return PrimalResult(feasible=False, objective=math.inf, design=None, duals=None,
                            iterations=sol.iterations)
    if sol.status is not SolveStatus.OPTIMAL:
        raise NumericalFailure(f"unexpected subproblem status {sol.status}")
    M, K = sc.data.M, sc.data.K
    Ws = sol.primal_complex("Wre", "Wim", (M, K))
    Xs = G @ Ws
    alpha, beta = _socp_multipliers(sol, K)
    alpha_eps = alpha * (1.0 + EPS_T)
    beta_eps = beta * (1.0 + EPS_T)
    qs, Qs = _construct_duals(sc, G, Ws, Xs, alpha_eps, beta_eps, cfg.gamma,
                              feasibility=False, eps=EPS_T)
    rho_obj = sc.r ** 2 * (1.0 + EPS_T)
    duals = _unscale_duals(sc, alpha_eps, beta_eps, qs, Qs, rho_obj)
    design = DesignPoint(X=Xs * (sc.t / sc.r), W=Ws / sc.r,
                         S=(G @ G.conj().T) * sc.t ** 2,
                         T=(Ws.conj().T @ Ws) / sc.r ** 2)
    design = _normalized(design, data)
    objective = float(np.sum(np.abs(Ws) ** 2)) / sc.r ** 2
    return PrimalResult(feasible=True, objective=objective, design=design, duals=duals,
                        iterations=sol.iterations)


def solve_feasibility(data: ReformulatedData, sel: PhaseSelection, cfg: ScenarioConfig,
                      tol: float = DEFAULT_SOLVE_TOL) -> PrimalResult:
    """l1 feasibility check: minimize the total SINR-cone slack.

    Always feasible; a strictly positive optimum certifies that the fixed
    selection admits no feasible beamformer.
    """
    sc = _make_scaling(data, cfg)
    G = sc.data.effective_channel(sel)
    prog = _build_natural(sc, cfg.gamma, G, with_slack=True)
    sol = prog.solve(tol=tol).require_optimal()
    if sol.status is not SolveStatus.OPTIMAL:
        raise NumericalFailure(f"feasibility subproblem ended with status {sol.status}")
    M, K = sc.data.M, sc.data.K
    Ws = sol.primal_complex("Wre", "Wim", (M, K))
    Xs = G @ Ws
    alpha, beta = _socp_multipliers(sol, K)
    qs, Qs = _construct_duals(sc, G, Ws, Xs, alpha, beta, cfg.gamma,
                              feasibility=True, eps=EPS_F)
    rho_obj = sc.rho_c1a
    duals = _unscale_duals(sc, alpha, beta, qs, Qs, rho_obj)
    slacks = sol.primal("lam") / rho_obj
    design = DesignPoint(X=Xs * (sc.t / sc.r), W=Ws / sc.r,
                         S=(G @ G.conj().T) * sc.t ** 2,
                         T=(Ws.conj().T @ Ws) / sc.r ** 2)
    return PrimalResult(feasible=False, objective=float(slacks.sum()), design=design,
                        duals=duals, slacks=slacks, iterations=sol.iterations)


def _normalized(design: DesignPoint, data: ReformulatedData) -> DesignPoint:
    """Apply the admissible per-column rotation to X and W jointly."""
    h = data.channels.h
    X, W = design.X.copy(), design.W.copy()
    for k in range(X.shape[1]):
        g = h[k].conj() @ X[:, k]
        if abs(g) > 0:
            rot = g.conj() / abs(g)
            X[:, k] *= rot
            W[:, k] *= rot
    return DesignPoint(X=X, W=W, S=design.S, T=design.T)


def lagrangian_value(data: ReformulatedData, cfg: ScenarioConfig, sel: PhaseSelection,
                     design: DesignPoint, duals: DualBundle) -> float:
    """Power-minimization Lagrangian at a point, with the extracted duals.

    Inequality residuals enter in "<= 0" form; the PSD lifting constraint
    contributes -Tr(Q M).
    """
    h = data.channels.h
    K = data.K
    G = data.effective_channel(sel)
    val = transmit_power(design.W)
    for k in range(K):
        g = h[k].conj() @ design.X
        interf = float(np.sum(np.abs(g) ** 2) - np.abs(g[k]) ** 2)
        cone_res = np.sqrt(interf + cfg.sigma2[k]) - g[k].real / np.sqrt(cfg.gamma[k])
        val += duals.alpha[k] * cone_res + duals.beta[k] * g[k].imag
    hbar_sel = sum(data.hbar[n, sel.levels[n]] for n in range(data.N))
    val += duals.q * (np.trace(design.S).real - hbar_sel)
    Mblk = lifting_block_matrix(design.S, design.X, G, design.T, design.W)
    val -= float(np.trace(duals.Q @ Mblk).real)
    return float(val)


# ---------------------------------------------------------------------------
# cuts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cut:
    """Affine-in-selection inequality for the master problem.

    Optimality: eta >= value(B).  Feasibility: 0 >= value(B).  coeffs[n, l]
    multiplies the indicator of element n taking level l.  The cut is tight
    at its origin by construction (value(origin) == objective), so values are
    evaluated as origin-relative differences, which avoids the catastrophic
    cancellation that the raw constant + <coeffs, B> form would suffer when
    the coefficients dwarf the objective.
    """
    kind: str                  # "optimality" | "feasibility"
    objective: float           # subproblem optimum at the origin
    coeffs: np.ndarray         # (N, L)
    origin: PhaseSelection
    origin_iteration: int = 0

    @property
    def constant(self) -> float:
        return self.objective - sum(self.coeffs[n, lvl] for n, lvl in enumerate(self.origin.levels))

    def value(self, sel: PhaseSelection) -> float:
        diff = sum(self.coeffs[n, lvl] - self.coeffs[n, olvl]
                   for n, (lvl, olvl) in enumerate(zip(sel.levels, self.origin.levels)))
        return float(self.objective + diff)

    def value_relaxed(self, b: np.ndarray) -> float:
        onehot = np.zeros_like(self.coeffs)
        for n, lvl in enumerate(self.origin.levels):
            onehot[n, lvl] = 1.0
        return float(self.objective + np.sum(self.coeffs * (b - onehot)))


def _selection_coeffs(duals: DualBundle, data: ReformulatedData) -> np.ndarray:
    """Selection-coupled Lagrangian coefficients: entry (n, l) multiplies
    b_n[l] through the trace bound (via q) and the PSD lifting (via Q31)."""
    N, L = data.N, data.L
    HQ = data.Hhat @ duals.Q31          # (N*L, N)
    coeffs = np.empty((N, L))
    for n in range(N):
        for l in range(L):
            coeffs[n, l] = -duals.q * data.hbar[n, l] - 2.0 * HQ[n * L + l, n].real
    return coeffs


def build_optimality_cut(res: PrimalResult, data: ReformulatedData,
                         origin: PhaseSelection, iteration: int = 0) -> Cut:
    if not res.feasible or res.duals is None:
        raise ValueError("optimality cut requires a feasible primal result with duals")
    coeffs = _selection_coeffs(res.duals, data)
    return Cut(kind="optimality", objective=res.objective, coeffs=coeffs,
               origin=origin, origin_iteration=iteration)


def build_feasibility_cut(res: PrimalResult, data: ReformulatedData,
                          origin: PhaseSelection, iteration: int = 0) -> Cut:
    if res.slacks is None or res.objective <= 0.0:
        raise ValueError("feasibility cut requires a strictly positive slack optimum")
    coeffs = _selection_coeffs(res.duals, data)
    return Cut(kind="feasibility", objective=res.objective, coeffs=coeffs,
               origin=origin, origin_iteration=iteration)


# ---------------------------------------------------------------------------
# master problem (MILP via branch-and-bound on LP relaxations)
# ---------------------------------------------------------------------------

@dataclass
class MasterResult:
    status: str                 # "Optimal" | "Infeasible"
    eta: float = math.nan
    selection: PhaseSelection | None = None
    nodes: int = 0


def solve_master(cuts: list[Cut], N: int, L: int,
                 tol: float = MASTER_SOLVE_TOL) -> MasterResult:
    """Exact minimum of the epigraph master over one-hot selections.

    Best-bound branch-and-bound.  LP relaxations (selection entries relaxed
    to [0, 1]) solved by the conic layer provide pruning bounds only; every
    candidate selection is scored by exact cut evaluation, because the cut
    coefficients can exceed the objective by several orders of magnitude and
    LP-tolerance violations would otherwise leak through (in particular, a
    feasibility cut must exclude its own origin exactly).  The epigraph
    variable is floored at zero since transmit power is nonnegative.
    """
    opt_cuts = [c for c in cuts if c.kind == "optimality"]
    feas_cuts = [c for c in cuts if c.kind == "feasibility"]
    # normalize cut magnitudes so LP tolerances are meaningful in any unit
    scale = max([1e-300] + [max(abs(c.constant), np.abs(c.coeffs).max()) for c in cuts])
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0

    nb = N * L
    integrality_tol = 1e-6
    eps_mach = np.finfo(float).eps

    def exact_eval(levels: tuple[int, ...]) -> float:
        """Exact master objective at a selection; +inf when a cut excludes it."""
        sel = PhaseSelection(levels)
        for c in feas_cuts:
            roundoff = 64.0 * eps_mach * N * float(np.abs(c.coeffs).max())
            if c.value(sel) > max(1e-7 * c.objective, roundoff):
                return math.inf
        eta = 0.0
        for c in opt_cuts:
            eta = max(eta, c.value(sel))
        return eta

    def solve_lp(fixed: dict[int, int]):
        prog = ConeProgram()
        prog.add_var("eta", 1)
        prog.add_var("b", nb)
        prog.add_cost("eta", np.array([1.0]))
        nv = prog.nvar

        def rowvec(eta_c, b_c):
            row = np.zeros(nv)
            row[0] = eta_c
            row[1:] = b_c
            return row

        # one-hot sums
        A = np.zeros((N, nv))
        for n in range(N):
            A[n, 1 + n * L:1 + (n + 1) * L] = 1.0
        prog.add_block("onehot", Zero(N), A, np.ones(N))
        # bounds 0 <= b <= 1, eta >= 0
        Alo = np.zeros((nb, nv)); Alo[:, 1:] = -np.eye(nb)
        prog.add_block("b_lo", NonNeg(nb), Alo, np.zeros(nb))
        Ahi = np.zeros((nb, nv)); Ahi[:, 1:] = np.eye(nb)
        prog.add_block("b_hi", NonNeg(nb), Ahi, np.ones(nb))
        prog.add_block("eta_lo", NonNeg(1), -rowvec(1.0, np.zeros(nb)), np.zeros(1))
        if opt_cuts:
            Ao = np.array([-rowvec(1.0, -c.coeffs.ravel() / scale) for c in opt_cuts])
            bo = np.array([-c.constant / scale for c in opt_cuts])
            prog.add_block("optcuts", NonNeg(len(opt_cuts)), Ao, bo)
        if feas_cuts:
            Af = np.array([rowvec(0.0, c.coeffs.ravel() / scale) for c in feas_cuts])
            bf = np.array([-c.constant / scale for c in feas_cuts])
            prog.add_block("feascuts", NonNeg(len(feas_cuts)), Af, bf)
        if fixed:
            rows, rhs = [], []
            for n, lvl in fixed.items():
                for l in range(L):
                    row = np.zeros(nv)
                    row[1 + n * L + l] = 1.0
                    rows.append(row)
                    rhs.append(1.0 if l == lvl else 0.0)
            prog.add_block("fixed", Zero(len(rows)), np.array(rows), np.array(rhs))
        sol = prog.solve(tol=tol).require_optimal()
        if sol.status is SolveStatus.INFEASIBLE:
            return None
        if sol.status is not SolveStatus.OPTIMAL:
            raise NumericalFailure(f"master LP status {sol.status}")
        return float(sol.primal("eta")[0]), sol.primal("b").reshape(N, L)

    if L ** N <= 256:
        # small selection spaces: exact evaluation of every candidate is
        # cheaper than LP-based branch-and-bound and shares its tie-breaking
        # (lexicographically first minimizer)
        best_val, best_sel, nodes = math.inf, None, 0
        for levels in itertools.product(range(L), repeat=N):
            nodes += 1
            val = exact_eval(levels)
            if val < best_val:
                best_val, best_sel = val, PhaseSelection(levels)
        if best_sel is None or not math.isfinite(best_val):
            return MasterResult(status="Infeasible", nodes=nodes)
        return MasterResult(status="Optimal", eta=best_val, selection=best_sel, nodes=nodes)

    counter = 0
    heap: list[tuple[float, int, dict]] = [(-math.inf, counter, {})]
    best_val, best_sel = math.inf, None
    nodes = 0
    # LP bounds are only trusted up to solver tolerance in cut-normalized units
    slop = 10.0 * tol * scale

    while heap:
        bound, _, fixed = heapq.heappop(heap)
        if best_sel is not None and bound - slop >= best_val - 1e-12:
            continue
        nodes += 1
        if len(fixed) == N:
            val = exact_eval(tuple(fixed[n] for n in range(N)))
            if val < best_val:
                best_val, best_sel = val, PhaseSelection(tuple(fixed[n] for n in range(N)))
            continue
        lp = solve_lp(fixed)
        if lp is None:
            continue
        eta, b = lp
        bound_true = eta * scale
        if best_sel is not None and bound_true - slop >= best_val - 1e-12:
            continue
        if np.abs(b - np.round(b)).max() <= integrality_tol:
            levels = tuple(int(np.argmax(b[n])) for n in range(N))
            val = exact_eval(levels)
            if val < best_val:
                best_val, best_sel = val, PhaseSelection(levels)
            # keep branching: at LP tolerance the subtree may still hide a
            # strictly better selection than the integral LP vertex
        # branch on the one-hot group with the most fractional LP value
        scores = 1.0 - b.max(axis=1)
        cand = [n for n in range(N) if n not in fixed]
        n_star = max(cand, key=lambda n: (scores[n], -n))
        for l in range(L):
            child = dict(fixed)
            child[n_star] = l
            counter += 1
            heapq.heappush(heap, (bound_true, counter, child))

    if best_sel is None or not math.isfinite(best_val):
        return MasterResult(status="Infeasible", nodes=nodes)
    return MasterResult(status="Optimal", eta=best_val, selection=best_sel, nodes=nodes)


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

@dataclass
class TraceRow:
    iteration: int
    feasible: bool
    primal_objective: float
    eta: float
    ub: float
    lb: float
    selection: PhaseSelection


@dataclass
class GbdState:
    ub: float = math.inf
    lb: float = 0.0
    incumbent_selection: PhaseSelection | None = None
    incumbent_design: DesignPoint | None = None
    cuts: list[Cut] = field(default_factory=list)
    feasible_iterations: list[int] = field(default_factory=list)
    infeasible_iterations: list[int] = field(default_factory=list)
    iteration: int = 0
    trace: list[TraceRow] = field(default_factory=list)
    status: str = "NotConverged"   # "Converged" | "NotConverged" | "InfeasibleEverywhere"
    detail: str = ""
    delta_used: float = math.nan

    @property
    def converged(self) -> bool:
        return self.status == "Converged"

    @property
    def objective(self) -> float:
        return self.ub


def run(data: ReformulatedData, cfg: ScenarioConfig, delta: float | None = None,
        max_iter: int | None = None, tol: float = DEFAULT_SOLVE_TOL) -> GbdState:
    """Full decomposition loop; on convergence the incumbent is the global
    optimum over all L**N selections within the gap tolerance.

    delta=None uses a relative gap of 1e-6 * UB; an explicit delta is an
    absolute gap in watts.
    """
    N, L = data.N, data.L
    if max_iter is None:
        max_iter = L ** N + 8
    state = GbdState()
    sel = PhaseSelection((0,) * N)
    visited: set[tuple[int, ...]] = set()

    try:
        for it in range(1, max_iter + 1):
            state.iteration = it
            visited.add(sel.levels)
            res = solve_primal(data, sel, cfg, tol=tol)
            if res.feasible:
                if res.objective < state.ub:
                    state.ub = res.objective
                    state.incumbent_selection = sel
                    state.incumbent_design = res.design
                state.cuts.append(build_optimality_cut(res, data, sel, iteration=it))
                state.feasible_iterations.append(it)
                primal_obj = res.objective
            else:
                fres = solve_feasibility(data, sel, cfg, tol=tol)
                if fres.objective <= 0.0:
                    raise NumericalFailure(
                        "subproblem reported infeasible but the slack optimum is zero")
                state.cuts.append(build_feasibility_cut(fres, data, sel, iteration=it))
                state.infeasible_iterations.append(it)
                primal_obj = fres.objective

            master = solve_master(state.cuts, N, L)
            if master.status == "Infeasible":
                state.status = "InfeasibleEverywhere"
                state.detail = (f"no phase selection can satisfy the SINR targets "
                                f"gamma={np.array2string(cfg.gamma, precision=4)}")
                state.trace.append(TraceRow(it, res.feasible, primal_obj, math.nan,
                                            state.ub, state.lb, sel))
                return state
            state.lb = max(state.lb, master.eta)
            state.trace.append(TraceRow(it, res.feasible, primal_obj, master.eta,
                                        state.ub, state.lb, sel))

            eff_delta = delta if delta is not None else 1e-6 * state.ub
            state.delta_used = eff_delta
            if state.ub < math.inf and state.ub - state.lb <= eff_delta:
                state.status = "Converged"
                return state
            nxt = master.selection
            if nxt.levels in visited and master.eta < state.ub - eff_delta:
                raise CutValidityError(
                    f"master revisited {nxt.levels} with eta={master.eta:.6g} "
                    f"below UB={state.ub:.6g}: dual-derived cut is inaccurate")
            sel = nxt
    except NumericalFailure as exc:
        raise GbdNumericalError(str(exc), state) from exc

    state.status = "NotConverged"
    return state


def export_trace_csv(state: GbdState, path) -> None:
    """Per-iteration trace: iteration, feasibility, objectives, bounds, selection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "feasible", "primal_objective", "eta", "ub", "lb", "levels"])
        for row in state.trace:
            writer.writerow([
                row.iteration, int(row.feasible),
                repr(row.primal_objective), repr(row.eta), repr(row.ub), repr(row.lb),
                ";".join(str(v) for v in row.selection.levels),
            ])


def solve_instance(cfg: ScenarioConfig, **kwargs) -> GbdState:
    """Convenience wrapper: generate channels from cfg and run the solver."""
    from .channel import generate_channels

    data = build_reformulated(generate_channels(cfg), cfg.L)
    return run(data, cfg, **kwargs)
