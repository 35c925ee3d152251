"""
TV-ULoG as a second-order cone program.

With ``q_l >= ||A_l z||`` for every site ``l`` the problem becomes

    minimize    sum_l q_l
    subject to  z_low <= z <= z_upp,  ||A_l z|| <= q_l

which cvxopt's cone LP solver handles by a primal-dual path-following
method with Nesterov-Todd scaling. Variables pinned by a degenerate tube
(``z_low == z_upp``) are removed before the solve.
"""

import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from cvxopt import matrix, solvers, spmatrix

from core.config.settings import config
from core.exceptions import DimensionMismatchError, InvalidArgumentError
from core.monitoring.logger import get_logger
from core.services.solvers.problem import (
    SolverOptions,
    SolverResult,
    SolverStatus,
    TracePoint,
    TvUlogProblem,
    clamp,
)

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ConeProgram:
    """
    Cone program over ``x = [z; q]`` with ``n`` box-constrained variables and
    one second-order cone per site.

    Constraint ``i`` reads ``||B_i x + c_i|| <= d_i^T x + eta_i``: rows
    ``0 .. n-1`` are the lower bounds, ``n .. 2n-1`` the upper bounds (both
    with empty ``B_i``), and the remaining rows the site cones.
    """
    lower: np.ndarray
    upper: np.ndarray
    operator: sp.csr_matrix
    components: int

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        operator = sp.csr_matrix(self.operator, dtype=np.float64)
        if lower.shape != upper.shape:
            raise DimensionMismatchError("bounds differ in length", expected=lower.size, actual=upper.size)
        if np.any(lower > upper):
            raise InvalidArgumentError("lower bound exceeds upper bound")
        if operator.shape[1] != lower.size or operator.shape[0] % self.components != 0:
            raise DimensionMismatchError("cone operator does not fit the variables",
                                         expected=(None, lower.size), actual=operator.shape)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "operator", operator)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def sites(self) -> int:
        return self.operator.shape[0] // self.components

    @property
    def num_variables(self) -> int:
        return self.n + self.sites

    @property
    def num_constraints(self) -> int:
        return 2 * self.n + self.sites

    @property
    def objective(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n), np.ones(self.sites)])

    def block(self, i: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """``(B_i, c_i, d_i, eta_i)`` of constraint ``i``."""
        nv = self.num_variables
        d = np.zeros(nv)
        if 0 <= i < self.n:
            d[i] = 1.0
            return np.zeros((0, nv)), np.zeros(0), d, -float(self.lower[i])
        if self.n <= i < 2 * self.n:
            d[i - self.n] = -1.0
            return np.zeros((0, nv)), np.zeros(0), d, float(self.upper[i - self.n])
        if 2 * self.n <= i < self.num_constraints:
            site = i - 2 * self.n
            rows = self.operator[site * self.components:(site + 1) * self.components].toarray()
            B = np.hstack([rows, np.zeros((self.components, self.sites))])
            d[self.n + site] = 1.0
            return B, np.zeros(self.components), d, 0.0
        raise InvalidArgumentError(f"constraint index {i} out of range")

    def site_norms(self, z: np.ndarray) -> np.ndarray:
        return np.linalg.norm((self.operator @ z).reshape(-1, self.components), axis=1)


def to_socp(problem: TvUlogProblem) -> ConeProgram:
    """Cone program equivalent to the TV-ULoG problem."""
    return ConeProgram(problem.lower, problem.upper, problem.operators.A, problem.components)


@dataclass
class SocpSolution:
    """Cone solution. Under ``NUMERICAL_FAILURE`` ``z`` is the tube's lower bound, not an estimate."""
    z: np.ndarray
    q: np.ndarray
    gap: float
    primal_objective: float
    dual_objective: float
    status: SolverStatus
    iterations: int
    info: Dict[str, Any] = field(default_factory=dict)


def _to_cvxopt(mat: sp.spmatrix) -> spmatrix:
    coo = mat.tocoo()
    return spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), coo.shape)


def _number(value, default: float) -> float:
    return default if value is None else float(value)


def _column(values: np.ndarray) -> matrix:
    return matrix(np.asarray(values, dtype=np.float64).tolist(), (len(values), 1), "d")


def _assemble(cp: ConeProgram, free: np.ndarray):
    """``(c, G, h, dims)`` of the cone LP in the free variables and ``q``."""
    nf = int(free.sum())
    m = cp.components
    N = cp.sites
    fixed_values = cp.lower[~free]
    A_free = cp.operator[:, free]
    A_fixed = cp.operator[:, ~free]

    eye = sp.identity(nf, format="csr")
    box = sp.vstack([
        sp.hstack([-eye, sp.csr_matrix((nf, N))]),
        sp.hstack([eye, sp.csr_matrix((nf, N))]),
    ])
    box_h = np.concatenate([-cp.lower[free], cp.upper[free]])

    # Cone block of site l: rows [q_l; A_l z], stacked as (N, m + 1)
    head = sp.hstack([sp.csr_matrix((N, nf)), -sp.identity(N, format="csr")])
    tail = sp.hstack([-A_free, sp.csr_matrix((N * m, N))])
    order = np.empty(N * (m + 1), dtype=np.int64)
    positions = (np.arange(N) * (m + 1))
    order[positions] = np.arange(N)
    for r in range(m):
        order[positions + 1 + r] = N + np.arange(N) * m + r
    cone = sp.vstack([head, tail]).tocsr()[order]
    offset = A_fixed @ fixed_values if A_fixed.shape[1] else np.zeros(N * m)
    cone_h = np.concatenate([np.zeros(N), offset])[order]

    G = sp.vstack([box, cone]).tocsr()
    h = np.concatenate([box_h, cone_h])
    c = np.concatenate([np.zeros(nf), np.ones(N)])
    dims = {"l": 2 * nf, "q": [m + 1] * N, "s": []}
    return _column(c), G, _column(h), dims


def _scaling(W, dims) -> sp.csr_matrix:
    """Sparse Nesterov-Todd scaling ``W`` (block diagonal, symmetric)."""
    nl = dims["l"]
    rows = [np.arange(nl)]
    cols = [np.arange(nl)]
    vals = [np.array(W["d"]).reshape(-1)]
    offset = nl
    sizes = dims["q"]
    if sizes:
        p = sizes[0]
        # W_k = beta_k (2 v v^T - J) with J = diag(1, -1, ..., -1)
        signs = -np.ones(p)
        signs[0] = 1.0
        v = np.array([np.array(vk).reshape(-1) for vk in W["v"]])
        beta = np.asarray(W["beta"], dtype=np.float64)
        blocks = (2.0 * v[:, :, None] * v[:, None, :] - np.diag(signs)[None]) * beta[:, None, None]
        base = offset + p * np.arange(len(sizes))
        a, b = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
        rows.append((base[:, None, None] + a[None]).ravel())
        cols.append((base[:, None, None] + b[None]).ravel())
        vals.append(blocks.ravel())
        offset += p * len(sizes)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, offset))


def sparse_kkt_solver(G: sp.csr_matrix, dims, refinement_steps: int = 3):
    """
    KKT solver for cvxopt working on sparse matrices.

    Without equality constraints each Newton step solves the quasi-definite
    system

        [ 0   G^T     ] [ux]   [bx]
        [ G  -W^T W   ] [uz] = [bz]

    which is factored by sparse LU and polished by a few steps of iterative
    refinement. On exit ``x`` holds ``ux`` and ``z`` holds ``W uz``.
    """
    if any(size != dims["q"][0] for size in dims["q"]):
        raise InvalidArgumentError("sparse KKT solver expects cones of equal size")
    n = G.shape[1]

    def factor(W):
        scaling = _scaling(W, dims)
        K = sp.bmat([[None, G.T], [G, -(scaling.T @ scaling)]], format="csc")
        try:
            lu = splu(K)
        except RuntimeError as e:
            raise ArithmeticError(str(e)) from e

        def solve(x, y, z):
            rhs = np.concatenate([np.array(x).reshape(-1), np.array(z).reshape(-1)])
            u = lu.solve(rhs)
            for _ in range(refinement_steps):
                residual = rhs - K @ u
                if not np.all(np.isfinite(residual)):
                    raise ArithmeticError("KKT residual is not finite")
                u = u + lu.solve(residual)
            x[:] = _column(u[:n])
            z[:] = _column(scaling @ u[n:])

        return solve

    return factor


def _conelp(c, G, h, dims, G_sparse, options):
    """
    Cone LP with the sparse KKT solver, retried with cvxopt's own KKT solver
    when it breaks down or stops early on a singular system.
    """
    try:
        sol = solvers.conelp(c, G, h, dims, kktsolver=sparse_kkt_solver(G_sparse, dims), options=options)
        stopped_early = sol["status"] == "unknown" and int(sol["iterations"]) < options["maxiters"]
        if sol["x"] is not None and not stopped_early:
            return sol
        logger.warning("Sparse KKT solve stopped early, retrying with the built-in solver",
                       cvxopt_status=sol["status"], iterations=int(sol["iterations"]))
    except (ArithmeticError, ValueError) as e:
        logger.warning("Sparse KKT solve broke down, retrying with the built-in solver", error=str(e))
    return solvers.conelp(c, G, h, dims, options=options)


def solve_socp_interior_point(cp: ConeProgram, opts: SolverOptions) -> SocpSolution:
    """
    Solve a cone program to relative duality gap ``opts.tol``.

    Returns:
        SocpSolution with the full ``z`` (pinned entries restored), ``q``
        and the gap reported by the solver
    """
    free = cp.lower < cp.upper
    z = cp.lower.copy()
    if not free.any():
        q = cp.site_norms(z)
        value = float(q.sum())
        return SocpSolution(z, q, 0.0, value, value, SolverStatus.CONVERGED, 0)

    c, G_sparse, h, dims = _assemble(cp, free)
    G = _to_cvxopt(G_sparse)
    nf = int(free.sum())
    options = {
        "show_progress": False,
        "maxiters": int(opts.max_iters),
        "reltol": float(opts.tol),
        "abstol": float(opts.tol),
        "feastol": float(config.solver.socp_feastol),
    }
    logger.debug("Cone program assembled", variables=nf + cp.sites, rows=G.size[0], fixed=int((~free).sum()))
    try:
        sol = _conelp(c, G, h, dims, G_sparse, options)
    except (ArithmeticError, ValueError) as e:
        logger.error("Cone solver broke down", error=str(e))
        q = cp.site_norms(z)
        return SocpSolution(z, q, float("inf"), float(q.sum()), float("-inf"),
                            SolverStatus.NUMERICAL_FAILURE, 0, {"error": str(e)})

    if sol["x"] is None:
        q = cp.site_norms(z)
        return SocpSolution(z, q, float("inf"), float(q.sum()), float("-inf"),
                            SolverStatus.NUMERICAL_FAILURE, int(sol.get("iterations", 0)),
                            {"cvxopt_status": sol["status"]})

    x = np.array(sol["x"]).reshape(-1)
    z[free] = clamp(x[:nf], cp.lower[free], cp.upper[free])
    q = x[nf:]
    gap = _number(sol.get("gap"), float("inf"))
    relative_gap = _number(sol.get("relative gap"), gap)
    primal = _number(sol.get("primal objective"), float(q.sum()))
    dual = _number(sol.get("dual objective"), float("-inf"))

    if sol["status"] == "optimal":
        status = SolverStatus.CONVERGED
    elif sol["status"] == "unknown":
        near = min(gap, relative_gap) <= 10.0 * opts.tol
        status = SolverStatus.CONVERGED if near else SolverStatus.ITERATION_LIMIT
    else:
        status = SolverStatus.NUMERICAL_FAILURE
    return SocpSolution(z, q, gap, primal, dual, status, int(sol["iterations"]),
                        {"cvxopt_status": sol["status"], "relative_gap": relative_gap})


def solve_tv_ulog_socp(problem: TvUlogProblem, opts: Optional[SolverOptions] = None) -> SolverResult:
    """Interior-point solution of the TV-ULoG problem."""
    name = "socp"
    opts = SolverOptions.interior_point() if opts is None else opts
    started = time.perf_counter()
    cp = to_socp(problem)
    logger.info(f"{name} started", size=problem.size, constraints=cp.num_constraints)

    solution = solve_socp_interior_point(cp, opts)
    elapsed = time.perf_counter() - started
    value = problem.tv(solution.z)
    trace = [TracePoint(max(1, solution.iterations), elapsed, value)]
    logger.info(
        f"{name} finished",
        status=solution.status.value,
        iterations=solution.iterations,
        objective=value,
        gap=solution.gap,
        seconds=round(elapsed, 6),
    )
    return SolverResult(
        minimizer=problem.cube(solution.z),
        objective=value,
        trace=trace,
        status=solution.status,
        solver_name=name,
        iterations=solution.iterations,
        info={
            "gap": solution.gap,
            "primal_objective": solution.primal_objective,
            "dual_objective": solution.dual_objective,
            "cone_objective": float(solution.q.sum()),
            **solution.info,
        },
    )


def socp_iteration_trace(problem: TvUlogProblem, opts: Optional[SolverOptions] = None) -> SolverResult:
    """
    Interior-point run with a per-iteration trace.

    The cone solver exposes no iteration callback, so the program is solved
    again with iteration caps 1, 2, ... and the TV of each capped iterate
    (clamped into the tube) is recorded against the time of its run.
    """
    opts = SolverOptions.interior_point() if opts is None else opts
    cp = to_socp(problem)
    trace = []
    final = None
    for cap in range(1, opts.max_iters + 1):
        started = time.perf_counter()
        solution = solve_socp_interior_point(cp, SolverOptions(max_iters=cap, tol=opts.tol))
        trace.append(TracePoint(cap, time.perf_counter() - started, problem.tv(solution.z)))
        final = solution
        if solution.status != SolverStatus.ITERATION_LIMIT or solution.iterations < cap:
            break
    value = problem.tv(final.z)
    return SolverResult(
        minimizer=problem.cube(final.z),
        objective=value,
        trace=trace,
        status=final.status,
        solver_name="socp",
        iterations=final.iterations,
        info={"gap": final.gap, "dual_objective": final.dual_objective, "cone_objective": float(final.q.sum())},
    )
