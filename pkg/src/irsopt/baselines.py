"""Suboptimal baselines for the joint beamforming / phase problem.

All baselines report honest objectives: whatever heuristic picks the phase
selection, the returned power always comes from an exact fixed-selection
beamforming solve at that selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ScenarioConfig
from .conic import ConeProgram, NonNeg, NumericalFailure, SecondOrder, SolveStatus, Zero
from .gbd import _herm_from_params, _make_scaling, solve_primal
from .reformulation import DesignPoint, PhaseSelection, ReformulatedData, lifting_block_matrix


@dataclass
class BaselineResult:
    scheme: str
    feasible: bool
    objective: float                  # watts (inf if the final selection is infeasible)
    selection: PhaseSelection | None
    design: DesignPoint | None
    subproblems: int = 0              # number of exact beamforming solves performed
    trace: list[float] = field(default_factory=list)


def _evaluate(data: ReformulatedData, cfg: ScenarioConfig, sel: PhaseSelection):
    """Exact beamforming solve at one selection; (objective, design)."""
    res = solve_primal(data, sel, cfg)
    if res.feasible:
        return res.objective, res.design
    return math.inf, None


def random_phase_baseline(data: ReformulatedData, cfg: ScenarioConfig,
                          seed: int = 0, draws: int = 1) -> BaselineResult:
    """Uniformly random phase levels; with draws > 1, keep the best draw."""
    rng = np.random.default_rng(seed)
    best = BaselineResult(scheme="random", feasible=False, objective=math.inf,
                          selection=None, design=None)
    for _ in range(draws):
        sel = PhaseSelection(tuple(int(v) for v in rng.integers(0, data.L, size=data.N)))
        obj, design = _evaluate(data, cfg, sel)
        best.subproblems += 1
        best.trace.append(obj)
        if obj < best.objective or best.selection is None:
            best.objective, best.selection, best.design = obj, sel, design
            best.feasible = math.isfinite(obj)
    return best


def alternating_opt_baseline(data: ReformulatedData, cfg: ScenarioConfig,
                             start: PhaseSelection | None = None,
                             max_rounds: int = 20, rel_tol: float = 1e-9) -> BaselineResult:
    """Block-coordinate descent over phase elements.

    Alternates exact beamforming solves with single-element discrete phase
    updates (each element tries all L levels, keeping the best); the achieved
    power is non-increasing by construction.  Converges to a coordinate-wise
    local optimum, not the global one.
    """
    N, L = data.N, data.L
    sel = start if start is not None else PhaseSelection((0,) * N)
    best_obj, best_design = _evaluate(data, cfg, sel)
    result = BaselineResult(scheme="ao", feasible=math.isfinite(best_obj),
                            objective=best_obj, selection=sel, design=best_design,
                            subproblems=1, trace=[best_obj])
    for _ in range(max_rounds):
        improved = False
        for n in range(N):
            current = result.selection.levels[n]
            for l in range(L):
                if l == current:
                    continue
                cand = PhaseSelection(result.selection.levels[:n]
                                      + (l,) + result.selection.levels[n + 1:])
                obj, design = _evaluate(data, cfg, cand)
                result.subproblems += 1
                threshold = result.objective * (1.0 - rel_tol) \
                    if math.isfinite(result.objective) else math.inf
                if obj < threshold:
                    result.objective, result.selection, result.design = obj, cand, design
                    result.feasible = math.isfinite(obj)
                    result.trace.append(obj)
                    current = l
                    improved = True
        if not improved:
            break
    return result


def penalty_sca_baseline(data: ReformulatedData, cfg: ScenarioConfig,
                         mu: float = 1.0, max_iters: int = 50,
                         step_tol: float = 1e-6) -> BaselineResult:
    """Penalized continuous relaxation with successive convex approximation.

    The one-hot selection indicators are relaxed to the simplex and pushed
    toward binary values by the concave penalty (1/mu) * sum b(1-b), whose
    linearization around the previous iterate makes each step a cone program.
    The penalized surrogate objective is non-increasing across iterations.
    The final iterate is rounded per element to the largest indicator (lowest
    level on ties) and the power at the rounded selection is re-solved exactly.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    N, L = data.N, data.L
    sc = _make_scaling(data, cfg)
    b = np.full((N, L), 1.0 / L)
    surrogate_trace: list[float] = []
    n_solves = 0
    for _ in range(max_iters):
        try:
            u, b_new = _solve_sca_step(sc, cfg.gamma, b, mu)
        except NumericalFailure:
            # near-binary iterates lose strict feasibility of the relaxation;
            # stop and round what we have
            break
        n_solves += 1
        penalty = float(np.sum(b_new * (1.0 - b_new))) / mu
        surrogate_trace.append(u + penalty)
        if np.max(np.abs(b_new - b)) <= step_tol:
            b = b_new
            break
        b = b_new
    levels = tuple(int(np.argmax(b[n])) for n in range(N))
    sel = PhaseSelection(levels)
    obj, design = _evaluate(data, cfg, sel)
    return BaselineResult(scheme="sca", feasible=math.isfinite(obj), objective=obj,
                          selection=sel, design=design, subproblems=n_solves + 1,
                          trace=surrogate_trace)


def _solve_sca_step(sc, gamma: np.ndarray, b_prev: np.ndarray,
                    mu: float) -> tuple[float, np.ndarray]:
    """One convex step: continuous selection with the penalty linearized at
    b_prev.  Returns (scaled power, new selection weights)."""
    d = sc.data
    N, K, M, L = d.N, d.K, d.M, d.L
    h = d.channels.h

    prog = ConeProgram()
    xre = prog.add_var("Xre", N * K)
    xim = prog.add_var("Xim", N * K)
    wre = prog.add_var("Wre", M * K)
    wim = prog.add_var("Wim", M * K)
    spar = prog.add_var("S", N * N)
    tpar = prog.add_var("T", K * K)
    upow = prog.add_var("u", 1)
    bsl = prog.add_var("b", N * L)

    def parts(x):
        X = x[xre].reshape(N, K) + 1j * x[xim].reshape(N, K)
        W = x[wre].reshape(M, K) + 1j * x[wim].reshape(M, K)
        return X, W

    for k in range(K):
        hk = h[k]
        others = [j for j in range(K) if j != k]

        def soc_k(x, k=k, hk=hk, others=others):
            X, _ = parts(x)
            g = hk.conj() @ X
            tail = [sc.sigma[k]]
            for j in others:
                tail.extend([g[j].real, g[j].imag])
            return np.concatenate([[g[k].real / np.sqrt(gamma[k])], tail])

        def align_k(x, k=k, hk=hk):
            X, _ = parts(x)
            return np.array([(hk.conj() @ X[:, k]).imag])

        prog.add_affine(f"C1a[{k}]", SecondOrder(2 * (K - 1) + 2), soc_k)
        prog.add_affine(f"C1b[{k}]", Zero(1), align_k)

    def lifting(x):
        X, W = parts(x)
        S = _herm_from_params(x[spar], N)
        T = _herm_from_params(x[tpar], K)
        bm = x[bsl].reshape(N, L)
        G = np.vstack([bm[n] @ d.Hhat[n * L:(n + 1) * L] for n in range(N)])
        return lifting_block_matrix(S, X, G, T, W)

    prog.add_psd_complex("C2a", lifting)

    def trace_bound(x):
        S = _herm_from_params(x[spar], N)
        return np.array([float(np.sum(d.hbar * x[bsl].reshape(N, L))) - np.trace(S).real])

    prog.add_affine("C2b", NonNeg(1), trace_bound)
    prog.add_affine("onehot", Zero(N),
                    lambda x: x[bsl].reshape(N, L).sum(axis=1) - 1.0)
    prog.add_affine("b_lo", NonNeg(N * L), lambda x: x[bsl])
    prog.add_affine("b_hi", NonNeg(N * L), lambda x: 1.0 - x[bsl])

    def power_epi(x):
        _, W = parts(x)
        u = x[upow][0]
        flat = np.concatenate([2.0 * W.real.ravel(), 2.0 * W.imag.ravel(), [u - 1.0]])
        return np.concatenate([[u + 1.0], flat])

    prog.add_affine("power", SecondOrder(2 * M * K + 2), power_epi)

    prog.add_cost("u", np.array([1.0]))
    # linearized penalty: (1/mu) * sum(b - 2 b_prev b) up to a constant
    prog.add_cost("b", (1.0 - 2.0 * b_prev.ravel()) / mu)

    sol = prog.solve().require_optimal()
    if sol.status is not SolveStatus.OPTIMAL:
        raise NumericalFailure(f"penalized relaxation step ended with {sol.status}")
    return float(sol.primal("u")[0]), sol.primal("b").reshape(N, L).clip(0.0, 1.0)
