"""Dense block-diagonal semidefinite programming with an embedded solver.

Problems are stated in standard primal form

    minimize    sum_b <C_b, X_b> + c_f . u
    subject to  sum_b <A_ib, X_b> + F_i . u = b_i,   i = 1..m
                X_b >= 0 (PSD),  u free

where the X_b are symmetric matrix blocks and u is an optional vector of
free scalar variables. The solver is an infeasible-start primal-dual
path-following method with Nesterov-Todd scaling and a Mehrotra-style
predictor-corrector, using dense Schur-complement normal equations. It is
sized for desk-scale instances (blocks up to a few dozen rows, up to a few
thousand constraints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ddlqr.errors import DimensionError


@dataclass
class Constraint:
    """One equality <A, X> + F.u = b, stored per touched block.

    coeffs maps block index -> symmetric dense coefficient matrix;
    free maps free-variable index -> scalar coefficient.
    """

    coeffs: dict
    b: float
    free: dict = field(default_factory=dict)


@dataclass
class SdpProblem:
    block_dims: list
    C: list
    constraints: list
    n_free: int = 0
    c_free: np.ndarray | None = None

    def __post_init__(self):
        if len(self.C) != len(self.block_dims):
            raise DimensionError(
                f"{len(self.C)} objective blocks for {len(self.block_dims)} block dims"
            )
        self.C = [np.asarray(Cb, dtype=float) for Cb in self.C]
        for b, (d, Cb) in enumerate(zip(self.block_dims, self.C)):
            if Cb.shape != (d, d):
                raise DimensionError(f"C block {b} has shape {Cb.shape}, expected ({d},{d})")
            if np.max(np.abs(Cb - Cb.T), initial=0.0) > 1e-12:
                raise DimensionError(f"C block {b} is not symmetric")
        for i, con in enumerate(self.constraints):
            for b, Ab in con.coeffs.items():
                d = self.block_dims[b]
                Ab = np.asarray(Ab, dtype=float)
                if Ab.shape != (d, d):
                    raise DimensionError(
                        f"constraint {i} block {b}: shape {Ab.shape}, expected ({d},{d})"
                    )
                if np.max(np.abs(Ab - Ab.T), initial=0.0) > 1e-12:
                    raise DimensionError(f"constraint {i} block {b} is not symmetric")
                con.coeffs[b] = Ab
        if self.c_free is None:
            self.c_free = np.zeros(self.n_free)
        else:
            self.c_free = np.asarray(self.c_free, dtype=float).reshape(-1)
            if self.c_free.shape[0] != self.n_free:
                raise DimensionError("c_free length does not match n_free")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


@dataclass
class SdpSolution:
    X: list
    y: np.ndarray
    Z: list
    u: np.ndarray
    objective: float
    status: str  # optimal | max_iters | infeasible_suspected
    gap: float
    residuals: dict
    iterations: int
    # Per-iteration (pobj, dobj, mu, rp_norm, rd_norm, corr). corr is the
    # infeasibility correction -y'rp + <Rd, X> + rf'wf; the exact identity
    # pobj - dobj - corr = <X, Z> >= 0 is weak duality in the form valid for
    # an infeasible-start method (corr -> 0 as the residuals vanish, leaving
    # the plain pobj >= dobj).
    trace: list
    dropped_constraints: list


@dataclass
class KktReport:
    primal_ok: bool
    dual_ok: bool
    comp_ok: bool
    psd_ok: bool
    primal_norm: float
    dual_norm: float
    comp: float
    min_eig: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.primal_ok and self.dual_ok and self.comp_ok and self.psd_ok


class _Compiled:
    """Per-block stacked constraint tensors plus the free-variable matrix."""

    def __init__(self, prob: SdpProblem):
        self.dims = list(prob.block_dims)
        self.nb = len(self.dims)
        self.m = prob.n_constraints
        self.idx = []    # block -> constraint indices touching it
        self.A = []      # block -> (k_b, d, d) stacked coefficients
        for b, d in enumerate(self.dims):
            idx = [i for i, con in enumerate(prob.constraints) if b in con.coeffs]
            stack = (
                np.stack([prob.constraints[i].coeffs[b] for i in idx])
                if idx else np.zeros((0, d, d))
            )
            self.idx.append(np.asarray(idx, dtype=int))
            self.A.append(stack)
        self.b = np.array([con.b for con in prob.constraints], dtype=float)
        self.F = np.zeros((self.m, prob.n_free))
        for i, con in enumerate(prob.constraints):
            for j, v in con.free.items():
                self.F[i, j] = v

    def opA(self, X: list) -> np.ndarray:
        out = np.zeros(self.m)
        for b in range(self.nb):
            if self.idx[b].size:
                out[self.idx[b]] += np.tensordot(self.A[b], X[b], axes=([1, 2], [0, 1]))
        return out

    def opAstar(self, y: np.ndarray, b: int) -> np.ndarray:
        if not self.idx[b].size:
            return np.zeros((self.dims[b], self.dims[b]))
        return np.tensordot(y[self.idx[b]], self.A[b], axes=(0, 0))

    def gram(self) -> np.ndarray:
        """Gram matrix of constraint rows, G G' with G the flattened row matrix."""
        M = np.zeros((self.m, self.m))
        for b in range(self.nb):
            if self.idx[b].size:
                flat = self.A[b].reshape(self.A[b].shape[0], -1)
                ix = np.ix_(self.idx[b], self.idx[b])
                M[ix] += flat @ flat.T
        M += self.F @ self.F.T
        return M


def _drop_dependent_rows(prob: SdpProblem):
    """Return (problem without dependent rows, dropped indices)."""
    comp = _Compiled(prob)
    if comp.m == 0:
        return prob, []
    gram = comp.gram()
    diag = np.sqrt(np.maximum(np.diag(gram), 0.0))
    scale = np.where(diag > 0, diag, 1.0)
    normalized = gram / scale[:, None] / scale[None, :]
    try:
        L = np.linalg.cholesky(normalized + 1e-14 * np.eye(comp.m))
        if np.min(np.diag(L)) > 1e-6:
            return prob, []
    except np.linalg.LinAlgError:
        pass
    # Slow path: rank-revealing QR on the transposed row matrix.
    cols = []
    for b in range(comp.nb):
        flat = np.zeros((comp.m, comp.dims[b] ** 2))
        if comp.idx[b].size:
            flat[comp.idx[b]] = comp.A[b].reshape(comp.A[b].shape[0], -1)
        cols.append(flat)
    cols.append(comp.F)
    G = np.hstack(cols)
    _, R, piv = scipy.linalg.qr(G.T, mode="economic", pivoting=True)
    rdiag = np.abs(np.diag(R))
    tol = max(G.shape) * (rdiag[0] if rdiag.size else 0.0) * np.finfo(float).eps
    rank = int(np.sum(rdiag > tol))
    keep = sorted(piv[:rank])
    dropped = sorted(set(range(comp.m)) - set(keep))
    if not dropped:
        return prob, []
    import warnings

    warnings.warn(f"dropping {len(dropped)} linearly dependent constraint rows")
    reduced = SdpProblem(
        block_dims=list(prob.block_dims),
        C=[Cb.copy() for Cb in prob.C],
        constraints=[prob.constraints[i] for i in keep],
        n_free=prob.n_free,
        c_free=prob.c_free.copy(),
    )
    return reduced, dropped


def _chol_jitter(S: np.ndarray) -> np.ndarray:
    """Cholesky with escalating diagonal jitter for nearly singular PD blocks."""
    scale = max(float(np.trace(S)) / S.shape[0], 1.0)
    jitter = 0.0
    for attempt in range(12):
        try:
            return np.linalg.cholesky(S + jitter * np.eye(S.shape[0]))
        except np.linalg.LinAlgError:
            jitter = scale * (1e-16 * 10.0 ** attempt)
    raise np.linalg.LinAlgError("block not positive definite even with jitter")


def _max_step(S: np.ndarray, dS: np.ndarray) -> float:
    """Largest alpha with S + alpha*dS still PSD (S assumed PD)."""
    L = _chol_jitter(S)
    Y = scipy.linalg.solve_triangular(L, dS, lower=True)
    Y = scipy.linalg.solve_triangular(L, Y.T, lower=True)
    lam = float(np.linalg.eigvalsh((Y + Y.T) / 2.0)[0])
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _nt_scaling(X: np.ndarray, Z: np.ndarray):
    """Nesterov-Todd scaling point: returns (G, Ginv, W, d) with W Z W = X."""
    Lx = _chol_jitter(X)
    Lz = _chol_jitter(Z)
    _, sv, Vt = np.linalg.svd(Lz.T @ Lx)
    sqrt_sv = np.sqrt(sv)
    G = (Lx @ Vt.T) / sqrt_sv[None, :]
    Linv = scipy.linalg.solve_triangular(Lx, np.eye(X.shape[0]), lower=True)
    Ginv = sqrt_sv[:, None] * (Vt @ Linv)
    W = G @ G.T
    return G, Ginv, (W + W.T) / 2.0, sv


def solve(
    prob: SdpProblem,
    tol_gap: float = 1e-8,
    tol_feas: float = 1e-8,
    max_iters: int = 200,
) -> SdpSolution:
    """Solve the SDP by infeasible-start NT predictor-corrector iterations."""
    prob, dropped = _drop_dependent_rows(prob)
    comp = _Compiled(prob)
    dims = comp.dims
    m = comp.m
    total_dim = sum(dims)

    # Row equilibration: normalize each constraint row to unit norm. The
    # solution X is invariant; the dual y is rescaled back on exit.
    rownorm_sq = np.zeros(m)
    for b in range(comp.nb):
        if comp.idx[b].size:
            flat = comp.A[b].reshape(comp.A[b].shape[0], -1)
            rownorm_sq[comp.idx[b]] += np.sum(flat * flat, axis=1)
    rownorm_sq += np.sum(comp.F * comp.F, axis=1)
    rscale = 1.0 / np.sqrt(np.maximum(rownorm_sq, 1e-300))
    rscale[rownorm_sq == 0.0] = 1.0
    for b in range(comp.nb):
        if comp.idx[b].size:
            comp.A[b] = comp.A[b] * rscale[comp.idx[b]][:, None, None]
    comp.F = comp.F * rscale[:, None]
    comp.b = comp.b * rscale

    # Free variables: reduce once to an orthonormal full-column-rank basis.
    # With F = U S V', the reduced coordinate is w = S V' u, so F u = U_r w
    # and the returned representative is u = V_r S_r^(-1) w (minimum norm).
    if prob.n_free > 0 and m > 0:
        Uf, sf, Vtf = np.linalg.svd(comp.F, full_matrices=False)
        frank_tol = max(comp.F.shape) * (sf[0] if sf.size else 0.0) * np.finfo(float).eps
        r = int(np.sum(sf > frank_tol))
        V = Vtf[:r].T                      # (n_free, r)
        sfr = sf[:r]
        Ft = Uf[:, :r]                     # orthonormal columns
        cf = (V.T @ prob.c_free) / sfr if r else np.zeros(0)
    else:
        r = 0
        V = np.zeros((prob.n_free, 0))
        sfr = np.zeros(0)
        Ft = np.zeros((m, 0))
        cf = np.zeros(0)

    # Start X on the scale of the right-hand side and Z on the scale of the
    # objective, so neither side begins orders of magnitude off target.
    tau_p = 1.0 + (np.max(np.abs(comp.b)) if m else 0.0)
    tau_d = 1.0 + max(
        (float(np.max(np.abs(Cb))) for Cb in prob.C if Cb.size), default=0.0
    )
    X = [tau_p * np.eye(d) for d in dims]
    Z = [tau_d * np.eye(d) for d in dims]
    y = np.zeros(m)
    wf = np.zeros(r)

    bnorm = 1.0 + (np.linalg.norm(comp.b) if m else 0.0)
    cnorm = 1.0 + np.sqrt(sum(np.linalg.norm(Cb) ** 2 for Cb in prob.C) + np.dot(cf, cf))

    trace = []
    status = "max_iters"
    it = 0
    rp = np.zeros(m)
    Rd = [np.zeros((d, d)) for d in dims]
    rf = np.zeros(r)
    gap_rel = np.inf
    best_merit = np.inf
    best_state = None
    no_improve = 0

    def residuals():
        ax = comp.opA(X) + Ft @ wf
        rp = comp.b - ax
        Rd = [prob.C[b] - comp.opAstar(y, b) - Z[b] for b in range(comp.nb)]
        rf = cf - Ft.T @ y
        # Backward-error normalization: with equilibrated (unit-norm) rows, a
        # residual is measured against the magnitude of the iterate entering
        # it. Otherwise problems whose optimal X is large can never converge
        # below the rounding floor of <A, X>.
        xnorm = np.sqrt(sum(float(np.linalg.norm(Xb)) ** 2 for Xb in X))
        znorm = np.sqrt(sum(float(np.linalg.norm(Zb)) ** 2 for Zb in Z))
        pscale = bnorm + xnorm + float(np.linalg.norm(wf))
        dscale = cnorm + znorm + float(np.linalg.norm(y))
        return rp, Rd, rf, pscale, dscale

    for it in range(max_iters):
        rp, Rd, rf, pscale, dscale = residuals()
        xz = sum(float(np.tensordot(X[b], Z[b], 2)) for b in range(comp.nb))
        mu = xz / total_dim if total_dim else 0.0
        pobj = sum(float(np.tensordot(prob.C[b], X[b], 2)) for b in range(comp.nb))
        pobj += float(np.dot(cf, wf))
        dobj = float(np.dot(comp.b, y)) if m else 0.0
        obj_scale = 1.0 + abs(pobj) + abs(dobj)
        gap_rel = xz / obj_scale
        rp_rel = np.linalg.norm(rp) / pscale
        rd_rel = np.sqrt(
            sum(np.linalg.norm(Rdb) ** 2 for Rdb in Rd) + np.dot(rf, rf)
        ) / dscale
        corr = -float(np.dot(y, rp)) + float(np.dot(rf, wf))
        corr += sum(float(np.tensordot(Rd[b], X[b], 2)) for b in range(comp.nb))
        trace.append((pobj, dobj, mu, rp_rel, rd_rel, corr))

        if gap_rel <= tol_gap and rp_rel <= tol_feas and rd_rel <= tol_feas:
            status = "optimal"
            break
        iterate_norm = max(
            max(float(np.linalg.norm(Xb)) for Xb in X),
            max(float(np.linalg.norm(Zb)) for Zb in Z),
        )
        if iterate_norm > 1e13 or abs(pobj) > 1e13 or abs(dobj) > 1e13:
            status = "infeasible_suspected"
            break

        merit = max(abs(gap_rel), rp_rel, rd_rel)
        if merit < 0.95 * best_merit:
            best_merit = merit
            best_state = ([Xb.copy() for Xb in X], [Zb.copy() for Zb in Z],
                          y.copy(), wf.copy())
            no_improve = 0
        else:
            no_improve += 1
            # Treat a long flat stretch as a stall only once the best
            # iterate is already close; early on, the gap legitimately
            # grows while the iterate travels toward a distant optimum.
            if no_improve > 30 and best_merit <= 1e3 * max(tol_gap, tol_feas):
                if best_state is not None:
                    X, Z, y, wf = best_state
                    rp, Rd, rf, pscale, dscale = residuals()
                break

        # NT scaling and the Schur complement of the normal equations.
        Gs, Ginvs, Ws, Ds = [], [], [], []
        for b in range(comp.nb):
            G, Ginv, W, sv = _nt_scaling(X[b], Z[b])
            Gs.append(G)
            Ginvs.append(Ginv)
            Ws.append(W)
            Ds.append(sv)
        M = np.zeros((m, m))
        WAW = []
        for b in range(comp.nb):
            if comp.idx[b].size:
                waw = np.einsum("ij,kjl,lm->kim", Ws[b], comp.A[b], Ws[b])
                ix = np.ix_(comp.idx[b], comp.idx[b])
                M[ix] += np.tensordot(comp.A[b], waw, axes=([1, 2], [1, 2]))
                WAW.append(waw)
            else:
                WAW.append(None)

        # Factor the (augmented, when free variables exist) normal equations.
        lu = None
        K = None
        if m:
            K = np.zeros((m + r, m + r))
            K[:m, :m] = M
            if r:
                K[:m, m:] = Ft
                K[m:, :m] = Ft.T
            try:
                lu = scipy.linalg.lu_factor(K, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                status = "max_iters"
                break

        K_ext = K.astype(np.longdouble) if K is not None else None

        def solve_kkt(h, rf_):
            rhs = np.concatenate([h, rf_])
            sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            # Iterative refinement with the residual accumulated in extended
            # precision: the Schur complement is squared-conditioned, and
            # plain double-precision residuals cap the attainable duality
            # gap around 1e-9 on ill-scaled instances.
            rhs_ext = rhs.astype(np.longdouble)
            for _ in range(2):
                resid = np.asarray(
                    rhs_ext - K_ext @ sol.astype(np.longdouble), dtype=float
                )
                sol += scipy.linalg.lu_solve(lu, resid, check_finite=False)
            return sol[:m], sol[m:]

        def direction(Rc):
            h = rp.copy()
            for b in range(comp.nb):
                if comp.idx[b].size:
                    expr = Ws[b] @ Rd[b] @ Ws[b] - Rc[b]
                    h[comp.idx[b]] += np.tensordot(
                        comp.A[b], expr, axes=([1, 2], [0, 1])
                    )
            if m:
                dy, dw = solve_kkt(h, rf)
            else:
                dy, dw = h, np.zeros(0)
            dZ = [Rd[b] - comp.opAstar(dy, b) for b in range(comp.nb)]
            dZ = [(d_ + d_.T) / 2.0 for d_ in dZ]
            dX = [Rc[b] - Ws[b] @ dZ[b] @ Ws[b] for b in range(comp.nb)]
            dX = [(d_ + d_.T) / 2.0 for d_ in dX]
            return dX, dy, dZ, dw

        def step_lengths(dX, dZ):
            ap = min((_max_step(X[b], dX[b]) for b in range(comp.nb)), default=np.inf)
            ad = min((_max_step(Z[b], dZ[b]) for b in range(comp.nb)), default=np.inf)
            return ap, ad

        # Predictor (affine scaling) direction.
        Rc_aff = [-X[b] for b in range(comp.nb)]
        dXa, dya, dZa, dwa = direction(Rc_aff)
        ap, ad = step_lengths(dXa, dZa)
        ap_aff = min(1.0, 0.99 * ap)
        ad_aff = min(1.0, 0.99 * ad)
        xz_aff = sum(
            float(np.tensordot(X[b] + ap_aff * dXa[b], Z[b] + ad_aff * dZa[b], 2))
            for b in range(comp.nb)
        )
        mu_aff = max(xz_aff, 0.0) / total_dim
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-12))

        # Corrector with second-order term in the scaled space.
        Rc = []
        for b in range(comp.nb):
            d = Ds[b]
            dXs = Ginvs[b] @ dXa[b] @ Ginvs[b].T
            dZs = Gs[b].T @ dZa[b] @ Gs[b]
            Rs = sigma * mu * np.eye(dims[b]) - np.diag(d * d)
            Rs -= (dXs @ dZs + dZs @ dXs) / 2.0
            E = 2.0 / (d[:, None] + d[None, :])
            Rcb = Gs[b] @ (E * Rs) @ Gs[b].T
            Rc.append((Rcb + Rcb.T) / 2.0)
        dX, dy, dZ, dw = direction(Rc)
        ap, ad = step_lengths(dX, dZ)
        ap = min(1.0, 0.99 * ap)
        ad = min(1.0, 0.99 * ad)

        def backtrack_pd(S, dS, a):
            # The eigenvalue-based cap can overshoot by rounding; shrink
            # until Cholesky accepts every block.
            for _ in range(40):
                ok = True
                for b in range(comp.nb):
                    cand = S[b] + a * dS[b]
                    try:
                        np.linalg.cholesky((cand + cand.T) / 2.0)
                    except np.linalg.LinAlgError:
                        ok = False
                        break
                if ok:
                    return a
                a *= 0.8
            return 0.0

        ap = backtrack_pd(X, dX, ap)
        ad = backtrack_pd(Z, dZ, ad)
        if ap == 0.0 and ad == 0.0:
            break

        for b in range(comp.nb):
            X[b] = (X[b] + ap * dX[b] + X[b].T + ap * dX[b].T) / 2.0
            Z[b] = (Z[b] + ad * dZ[b] + Z[b].T + ad * dZ[b].T) / 2.0
        y = y + ad * dy
        wf = wf + ap * dw
    else:
        it = max_iters - 1
        rp, Rd, rf, pscale, dscale = residuals()

    xz = sum(float(np.tensordot(X[b], Z[b], 2)) for b in range(comp.nb))
    pobj = sum(float(np.tensordot(prob.C[b], X[b], 2)) for b in range(comp.nb))
    pobj += float(np.dot(cf, wf))
    dobj = float(np.dot(comp.b, y)) if m else 0.0
    gap_rel = xz / (1.0 + abs(pobj) + abs(dobj))
    u = V @ (wf / sfr) if r else np.zeros(prob.n_free)
    y_out = rscale * y if m else y
    return SdpSolution(
        X=X,
        y=y_out,
        Z=Z,
        u=u,
        objective=pobj,
        status=status,
        gap=gap_rel,
        residuals={
            "primal": float(np.linalg.norm(rp) / pscale),
            "dual": float(
                np.sqrt(sum(np.linalg.norm(Rdb) ** 2 for Rdb in Rd) + np.dot(rf, rf))
                / dscale
            ),
        },
        iterations=it + 1,
        trace=trace,
        dropped_constraints=dropped,
    )


def rescale_problem(prob: SdpProblem, X: list, floor: float = 1e-8):
    """Diagonally rescale each block so the given X has unit diagonal.

    Substituting X_b = D_b X'_b D_b with D_b = diag(sqrt(diag(X_b))) maps the
    problem to one whose solution has entries of order one, which collapses
    the dynamic range between large primal blocks and their tiny dual
    complements. Returns the scaled problem and the list of diagonal scale
    vectors needed to undo the substitution.
    """
    scales = [np.sqrt(np.maximum(np.diag(Xb), floor)) for Xb in X]
    C = [np.outer(d, d) * Cb for d, Cb in zip(scales, prob.C)]
    cons = []
    for con in prob.constraints:
        coeffs = {
            b: np.outer(scales[b], scales[b]) * M for b, M in con.coeffs.items()
        }
        cons.append(Constraint(coeffs=coeffs, b=con.b, free=dict(con.free)))
    scaled = SdpProblem(
        block_dims=list(prob.block_dims),
        C=C,
        constraints=cons,
        n_free=prob.n_free,
        c_free=None if prob.c_free is None else np.array(prob.c_free),
    )
    return scaled, scales


def unscale_solution(sol: SdpSolution, scales: list) -> SdpSolution:
    """Map a solution of the rescaled problem back to original coordinates.

    Residuals and gap are kept from the scaled solve; they are the honest
    measure of how well the solver did on the problem it actually saw.
    """
    X = [np.outer(d, d) * Xb for d, Xb in zip(scales, sol.X)]
    Z = [Zb / np.outer(d, d) for d, Zb in zip(scales, sol.Z)]
    return SdpSolution(
        X=X,
        y=sol.y,
        Z=Z,
        u=sol.u,
        objective=sol.objective,
        status=sol.status,
        gap=sol.gap,
        residuals=dict(sol.residuals),
        iterations=sol.iterations,
        trace=sol.trace,
        dropped_constraints=list(sol.dropped_constraints),
    )


def verify_kkt(prob: SdpProblem, sol: SdpSolution, tol: float = 1e-6) -> KktReport:
    """Re-check feasibility and complementarity of a returned solution."""
    comp = _Compiled(prob)
    m = comp.m
    if m:
        viol = comp.b - comp.opA(sol.X) - comp.F @ sol.u
        primal_norm = float(np.linalg.norm(viol) / (1.0 + np.linalg.norm(comp.b)))
    else:
        primal_norm = 0.0
    dual_sq = 0.0
    cscale = 1.0 + np.sqrt(sum(np.linalg.norm(Cb) ** 2 for Cb in prob.C))
    for b in range(comp.nb):
        Rdb = prob.C[b] - comp.opAstar(sol.y, b) - sol.Z[b]
        dual_sq += float(np.linalg.norm(Rdb) ** 2)
    if prob.n_free:
        dual_sq += float(np.linalg.norm(prob.c_free - comp.F.T @ sol.y) ** 2)
    dual_norm = float(np.sqrt(dual_sq) / cscale)
    xz = sum(float(np.tensordot(sol.X[b], sol.Z[b], 2)) for b in range(comp.nb))
    dobj = float(np.dot(comp.b, sol.y)) if m else 0.0
    comp_rel = xz / (1.0 + abs(sol.objective) + abs(dobj))
    min_eig = min(
        (float(np.linalg.eigvalsh(Xb)[0]) for Xb in sol.X), default=0.0
    )
    return KktReport(
        primal_ok=primal_norm <= tol,
        dual_ok=dual_norm <= tol,
        comp_ok=comp_rel <= tol,
        psd_ok=min_eig >= -1e-9,
        primal_norm=primal_norm,
        dual_norm=dual_norm,
        comp=comp_rel,
        min_eig=min_eig,
        tol=tol,
    )


def dump_problem(prob: SdpProblem) -> str:
    """Sparse-triplet text dump for cross-checking against external solvers.

    Format (one record per line):
        blocks <d1> <d2> ...
        nfree <count>
        b <i> <value>                  right-hand sides
        C <block> <row> <col> <value>  objective entries (upper triangle)
        A <i> <block> <row> <col> <value>  constraint entries (upper triangle)
        Af <i> <j> <value>             free-variable coefficients
    """
    lines = ["blocks " + " ".join(str(d) for d in prob.block_dims)]
    lines.append(f"nfree {prob.n_free}")
    for i, con in enumerate(prob.constraints):
        lines.append(f"b {i} {con.b!r}")
    for bidx, Cb in enumerate(prob.C):
        for i in range(Cb.shape[0]):
            for j in range(i, Cb.shape[1]):
                if Cb[i, j] != 0.0:
                    lines.append(f"C {bidx} {i} {j} {Cb[i, j]!r}")
    for k, con in enumerate(prob.constraints):
        for bidx, Ab in sorted(con.coeffs.items()):
            for i in range(Ab.shape[0]):
                for j in range(i, Ab.shape[1]):
                    if Ab[i, j] != 0.0:
                        lines.append(f"A {k} {bidx} {i} {j} {Ab[i, j]!r}")
        for jidx, v in sorted(con.free.items()):
            if v != 0.0:
                lines.append(f"Af {k} {jidx} {v!r}")
    return "\n".join(lines) + "\n"
