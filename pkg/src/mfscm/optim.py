"""Simplex-constrained least squares and the lifted joint weight problem.

The joint estimation of unit weights and dictionary MIDAS coefficients
is bilinear in the original parameters but becomes an exact convex QP
after the substitution eta_j = w_j * zeta_j: the sum-to-one weight
normalization makes each high-frequency unit's weight a linear
functional of its eta block, so the whole problem is quadratic over a
polyhedron. The solver is projected gradient with a Barzilai-Borwein
step proposal and backtracking, finished by an exact active-face solve
once the optimal face is identified; every accepted step decreases the
objective.

When the dictionary degree equals the lag window of every
high-frequency unit (the default), the eta blocks are re-expressed as
per-lag weight blocks b_j[k] = w_j * B_j(k), under which the feasible
set is exactly the probability simplex and projections reduce to the
sort-based simplex projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import DomainError, IllPosedError
from .midas import LagPolyBasis

_FEAS_TOL = 1e-11
_DUP_TOL = 1e-12


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = 1} (sort-based, exact)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DomainError("project_simplex needs a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (css - 1.0))[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _affine_project(v: np.ndarray, C: np.ndarray, b: np.ndarray) -> np.ndarray:
    lam = np.linalg.lstsq(C @ C.T, C @ v - b, rcond=None)[0]
    return v - C.T @ lam


def _project_polyhedron(v, G, a, x_feas, max_pass=None):
    """Projection onto {Gx >= 0, a'x = 1} by a primal active-set sweep.

    ``x_feas`` must be feasible; it anchors the line searches. Falls back
    to Dykstra's alternating projections if the sweep fails to settle.
    """
    n_ineq, d = G.shape
    if max_pass is None:
        max_pass = 10 * (n_ineq + d + 2)
    x = np.asarray(x_feas, dtype=float).copy()
    work: list[int] = []
    for _ in range(max_pass):
        if work:
            C = np.vstack([G[work], a[None, :]])
            b = np.zeros(len(work) + 1)
            b[-1] = 1.0
        else:
            C = a[None, :]
            b = np.ones(1)
        xstar = _affine_project(v, C, b)
        if np.min(G @ xstar, initial=np.inf) >= -_FEAS_TOL:
            if not work:
                return xstar
            M = np.vstack([G[work], a[None, :]]).T
            coef = np.linalg.lstsq(M, xstar - v, rcond=None)[0]
            mu = coef[:-1]
            k = int(np.argmin(mu))
            if mu[k] >= -_FEAS_TOL:
                return xstar
            work.pop(k)
            continue
        p = xstar - x
        Gp = G @ p
        Gx = G @ x
        steps = np.full(n_ineq, np.inf)
        mask = Gp < -1e-15
        steps[mask] = -Gx[mask] / Gp[mask]
        if work:
            steps[work] = np.inf
        j = int(np.argmin(steps))
        if not np.isfinite(steps[j]):
            break  # no blocking row despite infeasible target: numerics degenerate
        x = x + min(max(steps[j], 0.0), 1.0) * p
        work.append(j)
    return _dykstra(v, G, a, x)


def _dykstra(v, G, a, x0, max_sweep=20000, tol=1e-12):
    """Alternating-projection fallback for the polyhedral projection."""
    norms2 = np.sum(G * G, axis=1)
    a2 = float(a @ a)
    x = np.asarray(v, dtype=float).copy()
    incs = np.zeros((G.shape[0] + 1, x.size))
    for _ in range(max_sweep):
        x_old = x.copy()
        for i in range(G.shape[0]):
            y = x + incs[i]
            viol = float(G[i] @ y)
            proj = y if viol >= 0.0 else y - (viol / norms2[i]) * G[i]
            incs[i] = y - proj
            x = proj
        y = x + incs[-1]
        x = y - ((float(a @ y) - 1.0) / a2) * a
        incs[-1] = y - x
        if float(np.max(np.abs(x - x_old))) <= tol:
            break
    # final clean-up onto the equality
    x = x - ((float(a @ x) - 1.0) / a2) * a
    return x


def project_metric(target: np.ndarray, M: np.ndarray, tol: float = 1e-10, max_iter: int = 50000) -> np.ndarray:
    """Projection of ``target`` onto the probability simplex in the M-weighted norm.

    Minimizes (target - x)' M (target - x) over the simplex for symmetric
    positive semidefinite M; with M = I this coincides with project_simplex.
    """
    target = np.asarray(target, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != (target.size, target.size):
        raise DomainError(f"metric shape {M.shape} does not match vector length {target.size}")
    if float(np.max(np.abs(M - M.T))) > 1e-8 * (1.0 + float(np.max(np.abs(M)))):
        raise DomainError("metric matrix must be symmetric")
    M = 0.5 * (M + M.T)
    feas = _Feasible.simplex(target.size)
    x0 = np.full(target.size, 1.0 / target.size)
    sol = _solve_polyhedral_qp(M, M @ target, 1.0, feas, x0, tol=tol, max_iter=max_iter)
    return sol.x


# ---------------------------------------------------------------------------
# feasible sets and the canonical QP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Feasible:
    """Polyhedron {x : G x >= 0, a' x = 1} with a simplex fast path."""

    G: np.ndarray
    a: np.ndarray
    is_simplex: bool

    @classmethod
    def simplex(cls, d: int) -> "_Feasible":
        return cls(np.eye(d), np.ones(d), True)

    @classmethod
    def general(cls, G: np.ndarray, a: np.ndarray) -> "_Feasible":
        G = np.asarray(G, dtype=float)
        a = np.asarray(a, dtype=float)
        d = a.size
        is_simplex = G.shape == (d, d) and np.array_equal(G, np.eye(d)) and np.array_equal(a, np.ones(d))
        return cls(G, a, is_simplex)

    def project(self, v: np.ndarray, x_feas: np.ndarray) -> np.ndarray:
        if self.is_simplex:
            return project_simplex(v)
        return _project_polyhedron(v, self.G, self.a, x_feas)

    def violation(self, x: np.ndarray) -> float:
        return max(float(-np.min(self.G @ x, initial=0.0)), abs(float(self.a @ x) - 1.0))


@dataclass
class SimplexQP:
    """Canonical quadratic program min (1/T0) ||z1 - A x||^2 over a polyhedron.

    ``lift`` describes how solver coordinates map back to donor weights
    and per-unit dictionary coefficients; for fixed-column problems it is
    the identity over donors.
    """

    A: np.ndarray  # (rows, d) design
    z1: np.ndarray  # (rows,)
    scale: float  # 1 / normalizer (typically 1 / T0)
    feasible: _Feasible
    lift: "LiftMap"
    AtA: np.ndarray = field(init=False)
    Atz: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.A.shape[0] != self.z1.shape[0]:
            raise DomainError(
                f"design has {self.A.shape[0]} rows but target has {self.z1.shape[0]}"
            )
        self.AtA = self.A.T @ self.A
        self.Atz = self.A.T @ self.z1

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * self.scale * self.AtA

    @property
    def linear(self) -> np.ndarray:
        return -2.0 * self.scale * self.Atz

    def objective(self, x: np.ndarray) -> float:
        r = self.z1 - self.A @ x
        return self.scale * float(r @ r)

    def validate(self, eig_tol: float = 1e-10, sym_tol: float = 1e-12) -> None:
        H = self.hessian
        if float(np.max(np.abs(H - H.T))) > sym_tol * (1.0 + float(np.max(np.abs(H)))):
            raise IllPosedError("hessian is not symmetric")
        if float(np.linalg.eigvalsh(H)[0]) < -eig_tol:
            raise IllPosedError("hessian has a negative eigenvalue")


@dataclass(frozen=True)
class LiftMap:
    """Mapping from solver coordinates to (donor weights, dictionary coefficients).

    Donor columns appear in panel order. ``blocks`` lists, per donor,
    either a single solver index (fixed column) or a contiguous index
    range paired with the matrices needed to read off the implied weight
    and per-lag weights.
    """

    n_donors: int
    fixed: tuple[tuple[int, int], ...]  # (donor_index, solver_index)
    lifted: tuple["LiftedBlock", ...]

    def weights(self, x: np.ndarray) -> np.ndarray:
        w = np.zeros(self.n_donors)
        for donor, col in self.fixed:
            w[donor] = x[col]
        for blk in self.lifted:
            w[blk.donor] = float(blk.weight_row @ x[blk.sl])
        return w


@dataclass(frozen=True)
class LiftedBlock:
    donor: int
    sl: slice  # solver coordinates of this unit's block
    m: int
    weight_row: np.ndarray  # implied weight = weight_row @ x[sl]
    lag_map: np.ndarray  # per-lag weights w*B(k) = lag_map @ x[sl]
    to_zeta: np.ndarray  # zeta = to_zeta @ (x[sl] / weight)
    per_lag_coords: bool = False  # block coordinates are w*B(k) rather than eta


@dataclass
class JointSolution:
    """Solver output: donor weights, per-unit coefficients, diagnostics."""

    w: np.ndarray
    zeta: dict[int, np.ndarray]
    lag_weights: dict[int, np.ndarray]
    objective: float
    iterations: int
    status: str  # "converged" | "max_iter"
    kkt_residual: float
    degenerate_units: tuple[int, ...] = ()
    duplicate_columns: tuple[tuple[int, ...], ...] = ()
    x: np.ndarray | None = None


# ---------------------------------------------------------------------------
# core solver: projected gradient + BB step + active-face finish
# ---------------------------------------------------------------------------


@dataclass
class _QPResult:
    x: np.ndarray
    iterations: int
    status: str
    kkt: float


def _solve_polyhedral_qp(AtA, Atz, scale, feas, x0, tol, max_iter, A=None, z1=None, trace=None) -> _QPResult:
    """min scale * (x'AtA x - 2 Atz'x) over the feasible polyhedron.

    Deterministic: fixed starting point, fixed iteration rule. The
    Barzilai-Borwein proposal is safeguarded by an exact line search on
    the projected segment, so the objective never increases. Periodic
    active-face solves certify optimality through the projected-gradient
    residual ||x - P(x - grad)||_inf <= tol.
    """
    x = np.asarray(x0, dtype=float).copy()
    H2 = 2.0 * scale * AtA
    g0 = -2.0 * scale * Atz

    def grad(x):
        return H2 @ x + g0

    def fval(x):
        return 0.5 * float(x @ (H2 @ x)) + float(g0 @ x)

    def kkt_res(x, g):
        return float(np.max(np.abs(x - feas.project(x - g, x))))

    def try_face(act, f_ref):
        d = x.size
        C = np.vstack([feas.a[None, :], feas.G[act]]) if len(act) else feas.a[None, :]
        nC = C.shape[0]
        K = np.zeros((d + nC, d + nC))
        K[:d, :d] = H2
        K[:d, d:] = -C.T
        K[d:, :d] = C
        rhs = np.zeros(d + nC)
        rhs[:d] = -g0
        rhs[d] = 1.0
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        xp = sol[:d]
        if feas.violation(xp) > _FEAS_TOL:
            return None
        if fval(xp) > f_ref + 1e-12 * (abs(f_ref) + 1.0):
            return None
        if kkt_res(xp, grad(xp)) > tol:
            return None
        return xp

    def polish(x, p1, deep):
        f_x = fval(x)
        guesses = [np.nonzero(feas.G @ p1 <= 1e-12)[0]]
        slack = feas.G @ x
        for eps in (1e-10, 1e-8, 1e-6):
            guesses.append(np.nonzero(slack <= eps)[0])
        if deep:
            order = np.argsort(slack, kind="stable")
            lo = int(np.sum(slack <= 1e-9))
            hi = int(np.sum(slack <= 5e-2))
            for k in range(lo, hi + 1):
                guesses.append(np.sort(order[:k]))
            if feas.is_simplex and A is not None:
                guesses.append(_nnls_support(A, z1))
        seen = set()
        for act in guesses:
            act = np.asarray(act, dtype=int)
            key = act.tobytes()
            if key in seen:
                continue
            seen.add(key)
            xp = try_face(act, f_x)
            if xp is not None:
                return xp
        return None

    g = grad(x)
    lam_max = float(np.linalg.eigvalsh(H2)[-1]) if x.size > 1 else float(H2[0, 0])
    t_def = 1.0 / max(lam_max, 1e-300)
    x_prev = g_prev = None
    kkt = np.inf
    for it in range(1, max_iter + 1):
        p1 = feas.project(x - g, x)
        kkt = float(np.max(np.abs(x - p1)))
        if kkt <= tol:
            return _QPResult(x, it, "converged", kkt)
        if it % 10 == 0 or kkt <= 1e3 * tol:
            xp = polish(x, p1, deep=(it % 50 == 0))
            if xp is not None:
                return _QPResult(xp, it, "converged", kkt_res(xp, grad(xp)))
        if x_prev is not None:
            s = x - x_prev
            y = g - g_prev
            sy = float(s @ y)
            t = float(s @ s) / sy if sy > 1e-300 else t_def
            t = min(max(t, 1e-2 * t_def), 1e12)
        else:
            t = t_def
        xt = feas.project(x - t * g, x) if t != 1.0 else p1
        d = xt - x
        hd = H2 @ d
        dhd = float(d @ hd)
        gd = float(g @ d)
        # exact minimizer of the quadratic on the feasible segment [x, xt]
        theta = 1.0 if dhd <= 0.0 else min(1.0, max(-gd / dhd, 0.0))
        x_prev, g_prev = x, g
        x = x + theta * d
        g = g + theta * hd
        if trace is not None:
            trace.append(fval(x))
    return _QPResult(x, max_iter, "max_iter", kkt)


def _nnls_support(A, z1):
    """Active set suggested by a penalized nonnegative least-squares solve."""
    rho = 1e6 * max(1.0, float(np.sqrt(np.mean(np.sum(A * A, axis=0)))))
    Aaug = np.vstack([A, np.full((1, A.shape[1]), rho)])
    baug = np.concatenate([z1, [rho]])
    try:
        w, _ = nnls(Aaug, baug)
    except Exception:  # pragma: no cover - nnls failure is harmless here
        return np.empty(0, dtype=int)
    return np.nonzero(w <= 1e-10)[0]


def _duplicate_groups(AtA: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Groups of identical design columns, detected from the Gram matrix."""
    d = AtA.shape[0]
    diag = np.diag(AtA)
    scale = float(np.max(diag)) + 1.0
    # ||a_i - a_j||^2 = G_ii + G_jj - 2 G_ij
    dist2 = diag[:, None] + diag[None, :] - 2.0 * AtA
    pairs = np.nonzero(np.triu(dist2 <= _DUP_TOL * scale, k=1))
    if pairs[0].size == 0:
        return ()
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*pairs):
        parent[find(int(j))] = find(int(i))
    groups: dict[int, list[int]] = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for g in groups.values() if len(g) > 1)


# ---------------------------------------------------------------------------
# public fixed-column operations
# ---------------------------------------------------------------------------


def solve_simplex_ls(
    z1: np.ndarray,
    z_cols: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 50000,
    scale: float | None = None,
    x0: np.ndarray | None = None,
) -> JointSolution:
    """Least squares over the probability simplex with fixed donor columns.

    Minimizes (1/T0) ||z1 - Z w||^2 over w >= 0, sum(w) = 1, where T0 is
    taken as the number of rows unless ``scale`` overrides it. ``x0`` is
    an optional feasible warm start (default: uniform weights).
    """
    z1 = np.asarray(z1, dtype=float)
    Z = np.asarray(z_cols, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != z1.shape[0]:
        raise DomainError(f"design shape {Z.shape} does not match target length {z1.shape[0]}")
    J = Z.shape[1]
    sc = (1.0 / z1.shape[0]) if scale is None else scale
    feas = _Feasible.simplex(J)
    qp = SimplexQP(Z, z1, sc, feas, _identity_lift(J))
    return solve_joint(qp, tol=tol, max_iter=max_iter, x0=x0)


def solve_ols(z1: np.ndarray, z_cols: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    """Unconstrained least-squares coefficients of z1 on the donor columns."""
    z1 = np.asarray(z1, dtype=float)
    Z = np.asarray(z_cols, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != z1.shape[0]:
        raise DomainError(f"design shape {Z.shape} does not match target length {z1.shape[0]}")
    if np.linalg.cond(Z) > cond_limit:
        raise IllPosedError(f"normal equations numerically singular (cond > {cond_limit:.0e})")
    coef, _, _, _ = np.linalg.lstsq(Z, z1, rcond=None)
    return coef


def _identity_lift(J: int) -> LiftMap:
    return LiftMap(n_donors=J, fixed=tuple((j, j) for j in range(J)), lifted=())


# ---------------------------------------------------------------------------
# the lifted joint problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignedDesign:
    """Baseline-frequency design ready for weight optimization.

    ``z1`` stacks the treated unit's pre-treatment outcomes over its
    scaled covariate rows. Each donor contributes either a fixed column
    of the same layout or, for a higher-frequency donor, its per-lag
    outcome block plus covariate rows to be expanded by the lift.
    """

    z1: np.ndarray  # (T_z,)
    columns: tuple["DesignColumn", ...]
    T0: int
    Q: int
    covariate_scale: float

    def __post_init__(self):
        T_z = (self.Q + 1) * self.T0
        if self.z1.shape[0] != T_z:
            raise DomainError(f"z1 has length {self.z1.shape[0]}, expected (Q+1)*T0 = {T_z}")


@dataclass(frozen=True)
class DesignColumn:
    """One donor's contribution to the aligned design."""

    donor: int
    outcome: np.ndarray  # (T0,) fixed column or (T0, m) per-lag block
    covariate_rows: np.ndarray  # (Q*T0,), already scaled
    m: int | None = None  # lag window for higher-frequency donors

    @property
    def is_lifted(self) -> bool:
        return self.outcome.ndim == 2


def build_lifted_problem(
    design: AlignedDesign, basis: LagPolyBasis, nonneg_midas: bool = True
) -> SimplexQP:
    """Assemble the convex joint problem over (fixed weights, eta blocks).

    For each higher-frequency donor the eta block satisfies
    eta = w * zeta; its columns are the basis-aggregated outcomes, the
    implied weight is a linear functional of eta, and the covariate rows
    enter multiplied by that functional. Constraints: fixed weights
    nonnegative, implied weights nonnegative, the total weight equal to
    one, and (optionally) every per-lag weight nonnegative.

    When every lifted donor has lag window equal to the basis degree and
    per-lag nonnegativity is on, the problem is assembled directly in
    per-lag coordinates, under which the feasible set is the probability
    simplex.
    """
    cols = design.columns
    n_donors = len(cols)
    if n_donors == 0:
        raise DomainError("design has no donor columns")
    lifted_cols = [c for c in cols if c.is_lifted]
    simplex_form = nonneg_midas and all(c.m == basis.degree for c in lifted_cols)

    blocks: list[np.ndarray] = []
    fixed: list[tuple[int, int]] = []
    lifted: list[LiftedBlock] = []
    G_rows: list[np.ndarray] = []
    a_parts: list[np.ndarray] = []

    # first pass: column layout
    offsets = []
    pos = 0
    for c in cols:
        width = (c.m if simplex_form else basis.degree) if c.is_lifted else 1
        offsets.append(pos)
        pos += width
    dim = pos

    for c, off in zip(cols, offsets):
        if not c.is_lifted:
            blocks.append(np.concatenate([c.outcome, c.covariate_rows])[:, None])
            fixed.append((c.donor, off))
            a_part = np.zeros(1)
            a_part[0] = 1.0
            a_parts.append(a_part)
            continue
        m = c.m
        Phi = basis.design(m)  # (m, L)
        if simplex_form:
            # per-lag coordinates: columns are the raw lag outcomes
            top = c.outcome  # (T0, m)
            bot = np.outer(c.covariate_rows, np.ones(m))
            blocks.append(np.vstack([top, bot]))
            weight_row = np.ones(m)
            lag_map = np.eye(m)
            to_zeta = np.linalg.inv(Phi)
        else:
            top = c.outcome @ Phi  # (T0, L)
            s = Phi.sum(axis=0)
            bot = np.outer(c.covariate_rows, s)
            blocks.append(np.vstack([top, bot]))
            weight_row = s
            lag_map = Phi
            to_zeta = np.eye(basis.degree)
        sl = slice(off, off + blocks[-1].shape[1])
        lifted.append(LiftedBlock(c.donor, sl, m, weight_row, lag_map, to_zeta, simplex_form))
        a_parts.append(weight_row)

    A = np.hstack(blocks)
    a = np.concatenate(a_parts)
    if simplex_form:
        feas = _Feasible.simplex(dim)
    else:
        for donor, off in fixed:
            row = np.zeros(dim)
            row[off] = 1.0
            G_rows.append(row)
        for blk in lifted:
            row = np.zeros(dim)
            row[blk.sl] = blk.weight_row
            G_rows.append(row)
            if nonneg_midas:
                for k in range(blk.lag_map.shape[0]):
                    row = np.zeros(dim)
                    row[blk.sl] = blk.lag_map[k]
                    G_rows.append(row)
        feas = _Feasible.general(np.asarray(G_rows), a)

    lift = LiftMap(n_donors=n_donors, fixed=tuple(fixed), lifted=tuple(lifted))
    return SimplexQP(A, design.z1, 1.0 / design.T0, feas, lift)


def solve_joint(
    qp: SimplexQP,
    tol: float = 1e-10,
    max_iter: int = 50000,
    zeta_threshold: float = 1e-8,
    trace: list | None = None,
    x0: np.ndarray | None = None,
) -> JointSolution:
    """Solve the lifted convex problem and recover per-unit coefficients.

    Units whose implied weight falls at or below ``zeta_threshold`` have
    no identified coefficients; they are reported as degenerate with
    uniform per-lag weights. Passing a list as ``trace`` records the
    objective after every accepted step.
    """
    if x0 is None:
        x0 = _feasible_start(qp)
    elif qp.feasible.violation(np.asarray(x0, dtype=float)) > _FEAS_TOL:
        raise DomainError("warm start is not feasible")
    res = _solve_polyhedral_qp(
        qp.AtA, qp.Atz, qp.scale, qp.feasible, x0, tol, max_iter,
        A=qp.A if qp.feasible.is_simplex else None,
        z1=qp.z1 if qp.feasible.is_simplex else None,
        trace=trace,
    )
    x = res.x
    w = qp.lift.weights(x)
    zeta: dict[int, np.ndarray] = {}
    lag_weights: dict[int, np.ndarray] = {}
    degenerate: list[int] = []
    for blk in qp.lift.lifted:
        wj = w[blk.donor]
        if wj > zeta_threshold:
            lag_weights[blk.donor] = (blk.lag_map @ x[blk.sl]) / wj
            zeta[blk.donor] = blk.to_zeta @ (x[blk.sl] / wj)
        else:
            degenerate.append(blk.donor)
            lag_weights[blk.donor] = np.full(blk.m, 1.0 / blk.m)
            zeta[blk.donor] = _uniform_zeta_for(blk)
    return JointSolution(
        w=w,
        zeta=zeta,
        lag_weights=lag_weights,
        objective=qp.objective(x),
        iterations=res.iterations,
        status=res.status,
        kkt_residual=res.kkt,
        degenerate_units=tuple(degenerate),
        duplicate_columns=_duplicate_groups(qp.AtA),
        x=x,
    )


def _uniform_zeta_for(blk: LiftedBlock) -> np.ndarray:
    L = blk.to_zeta.shape[0]
    zeta = np.zeros(L)
    zeta[0] = 1.0 / blk.m
    return zeta


def _feasible_start(qp: SimplexQP) -> np.ndarray:
    """Uniform donor weights with uniform per-lag weights: always feasible."""
    d = qp.dim
    if qp.feasible.is_simplex:
        return np.full(d, 1.0 / d)
    n = qp.lift.n_donors
    x = np.zeros(d)
    for _, col in qp.lift.fixed:
        x[col] = 1.0 / n
    for blk in qp.lift.lifted:
        if blk.per_lag_coords:
            x[blk.sl] = 1.0 / (n * blk.m)
        else:
            zeta = np.zeros(blk.sl.stop - blk.sl.start)
            zeta[0] = 1.0 / blk.m
            x[blk.sl] = zeta / n
    return x
