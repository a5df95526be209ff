"""Dense semidefinite programming: problem forms, duality, and an interior-point solver.

Problem forms follow the conventions used across the package:

* standard form      maximize -tr(E0 Z)  s.t.  Z >= 0,  tr(E_i Z) = b_i
* inequality form    minimize c^T x      s.t.  F0 + sum_j x_j F_j >= 0

The two are Lagrange duals of each other under ``c = -b, F0 = E0, F_j = -E_j``,
and weak duality reads p <= d for every feasible pair.

The solver is a primal-dual path-following method with Nesterov-Todd scaling
and Mehrotra-style adaptive centering, run on the real symmetric embedding of
complex Hermitian data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import LinalgError, hermitize


class SolverError(RuntimeError):
    """Numerical breakdown inside the interior-point iteration."""


@dataclass(frozen=True)
class SdpStandard:
    """maximize -tr(E0 Z) subject to Z >= 0 and tr(E_i Z) = b_i."""

    e0: np.ndarray
    constraints: tuple  # of (E_i, b_i)

    def __init__(self, e0, constraints):
        e0 = hermitize(np.asarray(e0, dtype=complex), atol=1e-9)
        cons = tuple(
            (hermitize(np.asarray(e, dtype=complex), atol=1e-9), float(b)) for e, b in constraints
        )
        n = e0.shape[0]
        if any(e.shape != (n, n) for e, _ in cons):
            raise LinalgError("constraint matrices must match the objective dimension")
        object.__setattr__(self, "e0", e0)
        object.__setattr__(self, "constraints", cons)

    @property
    def dim(self):
        return self.e0.shape[0]


@dataclass(frozen=True)
class SdpInequality:
    """minimize c^T x subject to F0 + sum_j x_j F_j >= 0."""

    c: np.ndarray
    f0: np.ndarray
    fs: tuple

    def __init__(self, c, f0, fs):
        c = np.asarray(c, dtype=float)
        f0 = hermitize(np.asarray(f0, dtype=complex), atol=1e-9)
        fs = tuple(hermitize(np.asarray(f, dtype=complex), atol=1e-9) for f in fs)
        if len(fs) != c.size:
            raise LinalgError("need one F_j per entry of c")
        if any(f.shape != f0.shape for f in fs):
            raise LinalgError("constraint matrices must share the dimension of F0")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "fs", fs)

    @property
    def dim(self):
        return self.f0.shape[0]

    def slack(self, x):
        """F0 + sum_j x_j F_j at the point x."""
        return self.f0 + sum(xj * fj for xj, fj in zip(np.asarray(x), self.fs))


def dualize(p: SdpStandard) -> SdpInequality:
    """Lagrange dual of the standard form: minimize -b^T nu s.t. E0 - sum nu_i E_i >= 0."""
    b = np.array([bi for _, bi in p.constraints])
    return SdpInequality(-b, p.e0, tuple(-e for e, _ in p.constraints))


@dataclass
class SolverOptions:
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    comp_tol: float = 5e-9
    max_iter: int = 200
    step_fraction: float = 0.98
    trace_iterates: bool = False


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    z: np.ndarray
    x: np.ndarray | None
    nu: np.ndarray | None
    iterations: int
    residuals: dict
    iterates: list = field(default_factory=list)


def _lift(h):
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix."""
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def _unlift(x):
    n = x.shape[0] // 2
    a = 0.5 * (x[:n, :n] + x[n:, n:])
    b = 0.5 * (x[n:, :n] - x[:n, n:])
    return a + 1j * b


def _max_step(m, delta):
    """Largest alpha in (0, 1] with m + alpha * delta staying PSD (m near-PD)."""
    w, u = np.linalg.eigh(m)
    w = np.clip(w, 1e-16 * max(w.max(), 1.0), None)
    m_ihalf = (u / np.sqrt(w)) @ u.T
    inner = m_ihalf @ delta @ m_ihalf
    lam = np.linalg.eigvalsh(0.5 * (inner + inner.T)).min()
    if lam >= 0:
        return 1.0
    return min(1.0, -1.0 / lam)


def _solve_textbook(c_mat, a_mats, b, opts: SolverOptions):
    """min tr(C X) s.t. tr(A_i X) = b_i, X >= 0, via NT path following.

    Returns (X, y, S, info).  Infeasible start; residuals are driven to zero
    together with the complementarity gap.
    """
    n = c_mat.shape[0]
    m = len(a_mats)
    a_stack = np.stack(a_mats) if m else np.zeros((0, n, n))
    x = np.eye(n)
    s = np.eye(n)
    scale = max(1.0, np.abs(c_mat).max())
    s *= scale
    y = np.zeros(m)
    iterates = []

    def a_dot(mat):
        return np.einsum("ijk,jk->i", a_stack, mat) if m else np.zeros(0)

    def a_comb(vec_):
        return np.einsum("i,ijk->jk", vec_, a_stack) if m else np.zeros((n, n))

    info = {"iterations": 0}
    best_mu = np.inf
    stall = 0
    accepted = None
    for it in range(opts.max_iter):
        rp = b - a_dot(x)
        rd = c_mat - s - a_comb(y)
        mu = np.trace(x @ s) / n
        pobj = float(np.trace(c_mat @ x))
        dobj = float(b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pres = np.linalg.norm(rp) / (1.0 + np.linalg.norm(b))
        dres = np.abs(rd).max() / (1.0 + np.abs(c_mat).max())
        if opts.trace_iterates:
            iterates.append((x.copy(), y.copy(), s.copy()))
        comp = np.abs(x @ s).max() / scale
        converged = gap <= opts.gap_tol and pres <= opts.feas_tol and dres <= opts.feas_tol
        if converged and (comp <= opts.comp_tol or mu <= 1e-13 * scale):
            info.update(iterations=it, status="optimal", gap=gap, pres=pres, dres=dres)
            return x, y, s, info, iterates
        if converged:
            # gap and feasibility are in; polish complementarity a little
            # longer, but do not chase it forever (the primal refinement step
            # removes the residual misalignment afterwards).
            if accepted is None:
                accepted = (x.copy(), y.copy(), s.copy(), it, gap, pres, dres)
            elif it - accepted[3] >= 15:
                x, y, s, it0, gap, pres, dres = accepted
                info.update(iterations=it0, status="optimal", gap=gap, pres=pres, dres=dres)
                return x, y, s, info, iterates
        if abs(dobj) > 1e12:
            info.update(iterations=it, status="infeasible_detected", gap=gap, pres=pres, dres=dres)
            return x, y, s, info, iterates

        # Anti-stall: if mu stops decreasing, lift the iterate off the cone
        # boundary (the feasibility residuals this reintroduces are handled by
        # the infeasible-start machinery).
        if mu < 0.9 * best_mu:
            best_mu, stall = mu, 0
        else:
            stall += 1
        if stall >= 4:
            lam_x = np.linalg.eigvalsh(x)
            lam_s = np.linalg.eigvalsh(s)
            bump_x = max(0.0, 1e-2 * mu / max(lam_s.max(), 1e-30) - lam_x.min())
            bump_s = max(0.0, 1e-2 * mu / max(lam_x.max(), 1e-30) - lam_s.min())
            x = x + bump_x * np.eye(n)
            s = s + bump_s * np.eye(n)
            best_mu, stall = np.inf, 0
            continue

        # Nesterov-Todd scaling point: W S W = X
        try:
            wx, ux = np.linalg.eigh(x)
            if wx.min() < -1e-10 * max(wx.max(), 1.0):
                raise SolverError("primal iterate left the cone")
            wx = np.clip(wx, 1e-16 * max(wx.max(), 1.0), None)
            x_half = (ux * np.sqrt(wx)) @ ux.T
            t_mat = x_half @ s @ x_half
            wt, ut = np.linalg.eigh(0.5 * (t_mat + t_mat.T))
            if wt.min() < -1e-10 * max(wt.max(), 1.0):
                raise SolverError("dual iterate left the cone")
            wt = np.clip(wt, 1e-16 * max(wt.max(), 1.0), None)
            t_inv_half = (ut / np.sqrt(np.sqrt(wt))) @ ut.T  # T^(-1/4) base
            t_mhalf = t_inv_half @ t_inv_half.T  # T^(-1/2)
            w_nt = x_half @ t_mhalf @ x_half
            w_nt = 0.5 * (w_nt + w_nt.T)
            ws, us = np.linalg.eigh(s)
            ws = np.clip(ws, 1e-16 * max(ws.max(), 1.0), None)
            s_inv = (us / ws) @ us.T
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SolverError(f"factorization failed: {exc}") from exc

        wa = np.stack([w_nt @ a_i @ w_nt for a_i in a_mats]) if m else np.zeros((0, n, n))
        m_mat = np.einsum("ijk,ljk->il", a_stack, wa) if m else np.zeros((0, 0))
        if m:
            ridge = 1e-14 * max(np.trace(m_mat) / m, 1.0)
            try:
                m_chol = np.linalg.cholesky(m_mat + ridge * np.eye(m))
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"singular normal system: {exc}") from exc

        def direction(sigma_mu, correction):
            rhs_mat = sigma_mu * s_inv - x if correction is None else sigma_mu * s_inv - x - correction
            rhs = rp - a_dot(rhs_mat - w_nt @ rd @ w_nt)
            if m:
                dy = np.linalg.solve(m_chol.T, np.linalg.solve(m_chol, rhs))
            else:
                dy = np.zeros(0)
            ds = rd - a_comb(dy)
            dx = rhs_mat - w_nt @ ds @ w_nt
            return 0.5 * (dx + dx.T), dy, 0.5 * (ds + ds.T)

        dx_a, dy_a, ds_a = direction(0.0, None)
        ap = _max_step(x, dx_a)
        ad = _max_step(s, ds_a)
        mu_aff = np.trace((x + ap * dx_a) @ (s + ad * ds_a)) / n
        sigma = min(1.0, max(mu_aff / mu, 0.0) ** 3)
        if max(pres, dres) > max(gap, 1e-15):
            # keep complementarity from racing ahead of feasibility
            sigma = max(sigma, 0.5)
        corr = dx_a @ ds_a @ s_inv
        corr = 0.5 * (corr + corr.T)

        rp_norm, rd_norm = np.linalg.norm(rp), np.linalg.norm(rd)

        def try_step(delta):
            dx, dy, ds = delta
            a_p = min(opts.step_fraction * _max_step(x, dx), 1.0)
            a_d = min(opts.step_fraction * _max_step(s, ds), 1.0)
            mu_n = np.trace((x + a_p * dx) @ (s + a_d * ds)) / n
            merit = mu_n + 0.1 * ((1 - a_p) * rp_norm + (1 - a_d) * rd_norm)
            return merit, a_p, a_d, delta

        candidates = [
            try_step(direction(sigma * mu, corr)),
            try_step(direction(sigma * mu, None)),
        ]
        if min(max(c[1], c[2]) for c in candidates) < 0.2:
            candidates.append(try_step(direction(0.5 * mu, None)))
        _, a_p, a_d, (dx, dy, ds) = min(candidates, key=lambda c: c[0])
        x = 0.5 * ((x + a_p * dx) + (x + a_p * dx).T)
        y = y + a_d * dy
        s = 0.5 * ((s + a_d * ds) + (s + a_d * ds).T)

    if accepted is not None:
        x, y, s, it0, gap, pres, dres = accepted
        info.update(iterations=it0, status="optimal", gap=gap, pres=pres, dres=dres)
        return x, y, s, info, iterates
    info.update(
        iterations=opts.max_iter,
        status="max_iter",
        gap=gap,
        pres=pres,
        dres=dres,
    )
    return x, y, s, info, iterates


def _refine_primal(x, y, a_stack, b, c_mat, feas_tol=1e-9):
    """Project the converged primal onto the face annihilated by the dual slack.

    Interior-point iterates satisfy ||X S|| ~ sqrt(mu); restricting X to the
    numerical null space of the slack and re-solving the equality constraints
    by least squares restores complementarity to round-off level.  The input
    is returned unchanged whenever the projection would damage feasibility.
    """
    m = len(b)
    n = x.shape[0]
    if m == 0:
        return x
    slack = c_mat - np.einsum("i,ijk->jk", y, a_stack)
    w, u = np.linalg.eigh(0.5 * (slack + slack.T))
    tau = 1e-6 * max(w.max(), 1.0)
    keep = w < tau
    r = int(keep.sum())
    if r == 0 or r == n:
        return x
    nbasis = u[:, keep]
    a_red = np.stack([nbasis.T @ a @ nbasis for a in a_stack])
    g = a_red.reshape(m, r * r)
    w0 = nbasis.T @ x @ nbasis
    resid = b - g @ w0.reshape(-1)
    try:
        dw, *_ = np.linalg.lstsq(g, resid, rcond=None)
    except np.linalg.LinAlgError:  # pragma: no cover - defensive
        return x
    w_new = w0 + 0.5 * (dw.reshape(r, r) + dw.reshape(r, r).T)
    x_new = nbasis @ w_new @ nbasis.T
    feas = np.abs(b - np.einsum("ijk,jk->i", a_stack, x_new)).max()
    lam_min = np.linalg.eigvalsh(w_new).min()
    if feas > feas_tol * (1.0 + np.abs(b).max()) or lam_min < -1e-9:
        return x
    return x_new


def _prepare(problem):
    """Map either public form onto the internal real textbook problem."""
    if isinstance(problem, SdpStandard):
        mats = [problem.e0] + [e for e, _ in problem.constraints]
        complex_data = any(np.abs(m.imag).max() > 0 for m in mats)
        b = np.array([bi for _, bi in problem.constraints])
        if complex_data:
            c_mat = _lift(problem.e0)
            a_mats = [_lift(e) for e, _ in problem.constraints]
            return c_mat, a_mats, 2.0 * b, complex_data
        return problem.e0.real.copy(), [e.real for e, _ in problem.constraints], b, complex_data
    if isinstance(problem, SdpInequality):
        mats = [problem.f0] + list(problem.fs)
        complex_data = any(np.abs(m.imag).max() > 0 for m in mats)
        if complex_data:
            c_mat = _lift(problem.f0)
            a_mats = [-_lift(f) for f in problem.fs]
        else:
            c_mat = problem.f0.real.copy()
            a_mats = [-f.real for f in problem.fs]
        return c_mat, a_mats, -problem.c, complex_data
    raise LinalgError(f"unsupported problem type {type(problem)!r}")


def solve(problem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve a standard- or inequality-form SDP; see the module docstring for signs."""
    opts = opts or SolverOptions()
    c_mat, a_mats, b, complex_data = _prepare(problem)
    x, y, s, info, iterates = _solve_textbook(c_mat, a_mats, b, opts)
    if info["status"] == "optimal" and a_mats:
        x = _refine_primal(x, y, np.stack(a_mats), np.asarray(b, dtype=float), c_mat)

    if complex_data:
        n2 = x.shape[0] // 2
        j = np.block(
            [[np.zeros((n2, n2)), -np.eye(n2)], [np.eye(n2), np.zeros((n2, n2))]]
        )
        x = 0.5 * (x + j @ x @ j.T)
        z = _unlift(x)
    else:
        z = x.copy()

    if isinstance(problem, SdpStandard):
        pval = -float(np.trace(problem.e0 @ z).real)
        dval = -float(np.array([bi for _, bi in problem.constraints]) @ y)
        sol = SdpSolution(
            status=info["status"],
            primal_value=pval,
            dual_value=dval,
            gap=dval - pval,
            z=z,
            x=None,
            nu=y,
            iterations=info["iterations"],
            residuals={"primal": info.get("pres"), "dual": info.get("dres")},
            iterates=iterates,
        )
    else:
        if complex_data:
            z = 2.0 * z
        value = float(problem.c @ y)
        bound = -float(np.trace(problem.f0 @ z).real)
        sol = SdpSolution(
            status=info["status"],
            primal_value=value,
            dual_value=bound,
            gap=value - bound,
            z=z,
            x=y,
            nu=None,
            iterations=info["iterations"],
            residuals={"primal": info.get("pres"), "dual": info.get("dres")},
            iterates=iterates,
        )
    return sol


def verify_certificate(z, nu, problem: SdpStandard, tol=1e-8):
    """Check a candidate optimal pair for the standard form.

    Reports (i) equality-constraint residuals of Z, (ii) PSD-ness of the dual
    slack E0 - sum nu_i E_i, (iii) the duality gap, and (iv) complementary
    slackness ||(E0 - sum nu_i E_i) Z||.
    """
    z = np.asarray(z, dtype=complex)
    nu = np.asarray(nu, dtype=float)
    slack = problem.e0 - sum(v * e for v, (e, _) in zip(nu, problem.constraints))
    pres = max(
        (abs(np.trace(e @ z).real - bi) for e, bi in problem.constraints), default=0.0
    )
    z_min = float(np.linalg.eigvalsh(hermitize(z, atol=1e-6)).min())
    s_min = float(np.linalg.eigvalsh(hermitize(slack, atol=1e-6)).min())
    pval = -float(np.trace(problem.e0 @ z).real)
    dval = -float(np.array([bi for _, bi in problem.constraints]) @ nu)
    comp = float(np.abs(slack @ z).max())
    scale = max(1.0, float(np.abs(problem.e0).max()))
    return {
        "primal_residual": float(pres),
        "primal_min_eig": z_min,
        "dual_slack_min_eig": s_min,
        "primal_value": pval,
        "dual_value": dval,
        "gap": dval - pval,
        "complementary_slackness": comp,
        "pass": bool(
            pres <= tol
            and z_min >= -tol
            and s_min >= -tol
            and abs(dval - pval) <= tol * scale * 10
            and comp <= tol * scale * 10
        ),
    }
