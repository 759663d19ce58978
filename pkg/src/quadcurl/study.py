"""Manufactured solutions, error norms and the convergence-study harness.

Two families of exact solutions drive the verification runs: a smooth
divergence-free trigonometric field on the unit cube, and a singular
gradient field on the L-shaped domain whose strength is set by the
regularity parameter t.  Both have p = 0, so the multiplier error
measures pure numerical pollution; it is reported anyway.
"""

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError
from .hdg import HDGSpaces, condense, recover_interior
from .mesh import generate_box_mesh, generate_lshape_mesh
from .quadrature import quad_tet
from .solver import block_jacobi, dense_solve, gmres, ilu_preconditioner

CSV_COLUMNS = ["n", "dof", "err_r", "rate_r", "err_u", "rate_u", "err_p",
               "rate_p", "err_curl_u", "err_grad_p", "gmres_iters", "seconds"]


@dataclass
class ManufacturedCase:
    """Closed-form solution with all data the scheme needs derived from it.

    Boundary data is not stored: g1 = n x u and g2 = n x curl u are
    evaluated facewise from ``u`` and ``curl_u`` during assembly.
    """

    name: str
    domain: str                       # 'cube' | 'lshape'
    relative_errors: bool             # table normalization convention
    u: Callable
    curl_u: Callable
    r: Callable
    p: Callable
    grad_p: Callable
    f: Callable
    g: Callable
    t: Optional[float] = None


def _zeros_scalar(pts):
    return np.zeros(len(pts))


def _zeros_vector(pts):
    return np.zeros((len(pts), 3))


def case_smooth() -> ManufacturedCase:
    """u = (sin y sin z, sin z sin x, sin x sin y), p = 0 on the unit cube.

    The field is divergence-free and satisfies curlcurl u = 2u, so
    r = 2u and f = 4u while g = 0.
    """

    def u(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return np.stack([np.sin(y) * np.sin(z),
                         np.sin(z) * np.sin(x),
                         np.sin(x) * np.sin(y)], axis=1)

    def curl_u(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return np.stack([np.sin(x) * (np.cos(y) - np.cos(z)),
                         np.sin(y) * (np.cos(z) - np.cos(x)),
                         np.sin(z) * (np.cos(x) - np.cos(y))], axis=1)

    return ManufacturedCase(
        name="smooth", domain="cube", relative_errors=True,
        u=u, curl_u=curl_u,
        r=lambda pts: 2.0 * u(pts),
        p=_zeros_scalar, grad_p=_zeros_vector,
        f=lambda pts: 4.0 * u(pts),
        g=_zeros_scalar)


def case_lshape(t: float) -> ManufacturedCase:
    """Gradient of the harmonic function rho^t sin(t theta) on the L-shape.

    u = grad(rho^t sin(t theta)) about the reentrant edge x = y = 0, so
    curl u = 0, div u = 0, r = 0, p = 0 and f = 0; only g1 = n x u is
    nonzero.  For t < 1 the field blows up like rho^(t-1) at the edge.
    """
    if t <= 0:
        raise InvalidParameterError(f"regularity parameter must be positive, got {t}")

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        rho = np.hypot(x, y)
        theta = np.arctan2(y, x)
        # on the closed reentrant edge the tangential datum is exactly
        # zero, so clamp the unbounded radial factor there
        with np.errstate(divide="ignore"):
            amp = np.where(rho > 0.0, t * rho ** (t - 1.0), 0.0)
        out = np.zeros((len(pts), 3))
        out[:, 0] = amp * np.sin((t - 1.0) * theta)
        out[:, 1] = amp * np.cos((t - 1.0) * theta)
        return out

    return ManufacturedCase(
        name=f"lshape-t{t}", domain="lshape", relative_errors=False,
        u=u, curl_u=_zeros_vector, r=_zeros_vector,
        p=_zeros_scalar, grad_p=_zeros_vector,
        f=_zeros_vector, g=_zeros_scalar, t=t)


def make_case(name: str, t: float = 0.9) -> ManufacturedCase:
    if name == "smooth":
        return case_smooth()
    if name == "lshape":
        return case_lshape(t)
    raise InvalidParameterError(f"unknown case '{name}'")


def make_mesh(case: ManufacturedCase, n: int):
    if case.domain == "cube":
        return generate_box_mesh(n)
    return generate_lshape_mesh(n)


@dataclass
class ErrorReport:
    """Absolute L2 errors plus the exact-solution norms for normalization."""

    err_r: float
    err_u: float
    err_p: float
    err_curl_u: float
    err_grad_p: float
    norm_r: float
    norm_u: float

    def table(self, relative: bool):
        """(err_r, err_u, err_p) in the normalization of the tables."""
        if relative:
            return (self.err_r / self.norm_r, self.err_u / self.norm_u,
                    self.err_p)
        return (self.err_r, self.err_u, self.err_p)


def compute_errors(spaces: HDGSpaces, fields, case: ManufacturedCase,
                   boost: int = 6) -> ErrorReport:
    """Elementwise L2 errors at quadrature exactness 2k + boost."""
    mesh = spaces.mesh
    rule = quad_tet(2 * spaces.k + boost)
    acc = np.zeros(7)
    for t in range(mesh.ntets):
        pts, w = rule.map_to(mesh.tet_verts(t))
        uh = np.einsum("qcj,j->qc", spaces.u_basis[t].eval(pts), fields.u[t])
        rh = np.einsum("qcj,j->qc", spaces.r_basis[t].eval(pts), fields.r[t])
        ch = np.einsum("qcj,j->qc", spaces.u_basis[t].curl(pts), fields.u[t])
        ph = spaces.p_basis[t].eval(pts) @ fields.p[t]
        _, gp = spaces.p_basis[t].eval_grad(pts)
        gph = np.einsum("qjc,j->qc", gp, fields.p[t])

        ue = np.asarray(case.u(pts), dtype=float)
        re = np.asarray(case.r(pts), dtype=float)
        ce = np.asarray(case.curl_u(pts), dtype=float)
        pe = np.asarray(case.p(pts), dtype=float)
        ge = np.asarray(case.grad_p(pts), dtype=float)

        acc[0] += np.einsum("qc,qc,q->", rh - re, rh - re, w)
        acc[1] += np.einsum("qc,qc,q->", uh - ue, uh - ue, w)
        acc[2] += np.einsum("q,q,q->", ph - pe, ph - pe, w)
        acc[3] += np.einsum("qc,qc,q->", ch - ce, ch - ce, w)
        acc[4] += np.einsum("qc,qc,q->", gph - ge, gph - ge, w)
        acc[5] += np.einsum("qc,qc,q->", re, re, w)
        acc[6] += np.einsum("qc,qc,q->", ue, ue, w)
    vals = np.sqrt(acc)
    return ErrorReport(err_r=vals[0], err_u=vals[1], err_p=vals[2],
                       err_curl_u=vals[3], err_grad_p=vals[4],
                       norm_r=vals[5], norm_u=vals[6])


def solve_case(case: ManufacturedCase, k: int, n: int, tol: float = 1e-10,
               method: str = "gmres", precond: str = "ilu",
               restart: int = 100, maxiter: int = 10000):
    """Full pipeline for one level: mesh, condense, solve, recover.

    Returns ``(spaces, fields, info)`` where info carries dof count,
    iteration count and wall time.  ``precond`` selects 'ilu' (default)
    or 'block-jacobi' for the GMRES path.
    """
    t0 = time.perf_counter()
    mesh = make_mesh(case, n)
    spaces = HDGSpaces(mesh, k)
    cs = condense(spaces, case)
    if method == "dense":
        x = dense_solve(cs.matrix, cs.rhs)
        iters = 0
    elif method == "gmres":
        if precond == "ilu":
            pre = ilu_preconditioner(cs.matrix)
        elif precond == "block-jacobi":
            pre = block_jacobi(cs.matrix, spaces.layout.face_block)
        else:
            raise InvalidParameterError(f"unknown preconditioner '{precond}'")
        x, rep = gmres(cs.matrix, cs.rhs, tol=tol, restart=restart,
                       maxiter=maxiter, precond=pre)
        iters = rep.iterations
    else:
        raise InvalidParameterError(f"unknown solve method '{method}'")
    fields = recover_interior(cs, x)
    info = {"dof": cs.ndof_total, "nfree": cs.nfree, "gmres_iters": iters,
            "seconds": time.perf_counter() - t0}
    return spaces, fields, info


@dataclass
class StudyRow:
    n: int
    dof: int
    err_r: float
    err_u: float
    err_p: float
    err_curl_u: float
    err_grad_p: float
    gmres_iters: int
    seconds: float
    rate_r: Optional[float] = None
    rate_u: Optional[float] = None
    rate_p: Optional[float] = None


def _rate(coarse, fine, n_coarse, n_fine):
    if coarse <= 0 or fine <= 0:
        return None
    return float(np.log(coarse / fine) / np.log(n_fine / n_coarse))


def run_study(case: ManufacturedCase, k: int, levels, tol: float = 1e-10,
              method: str = "gmres", boost: int = 6, out=None,
              markdown: bool = False, log=None):
    """One full pipeline run per level; rates are log2 of error ratios.

    ``levels`` must be ascending.  Writes the CSV schema to ``out`` when
    given and returns the list of StudyRow.
    """
    levels = list(levels)
    if levels != sorted(levels):
        raise InvalidParameterError("levels must be ascending")
    rows = []
    for n in levels:
        t0 = time.perf_counter()
        spaces, fields, info = solve_case(case, k, n, tol=tol, method=method)
        err = compute_errors(spaces, fields, case, boost=boost)
        er, eu, ep = err.table(case.relative_errors)
        row = StudyRow(n=n, dof=info["dof"], err_r=er, err_u=eu, err_p=ep,
                       err_curl_u=err.err_curl_u, err_grad_p=err.err_grad_p,
                       gmres_iters=info["gmres_iters"],
                       seconds=time.perf_counter() - t0)
        if rows:
            prev = rows[-1]
            row.rate_r = _rate(prev.err_r, row.err_r, prev.n, row.n)
            row.rate_u = _rate(prev.err_u, row.err_u, prev.n, row.n)
            row.rate_p = _rate(prev.err_p, row.err_p, prev.n, row.n)
        rows.append(row)
        if log is not None:
            log(f"n={n} dof={row.dof} err_u={row.err_u:.3e} "
                f"rate_u={row.rate_u if row.rate_u is not None else '-'} "
                f"iters={row.gmres_iters} ({row.seconds:.1f}s)")
    if out is not None:
        write_csv(rows, out)
    if markdown:
        return rows, format_markdown(case, k, rows)
    return rows


def _fmt(x, digits=4):
    if x is None:
        return ""
    return f"{x:.{digits}g}" if abs(x) < 1e4 else f"{x:.3e}"


def write_csv(rows, out):
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    w = csv.writer(out)
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.n, r.dof,
                    f"{r.err_r:.6e}", _fmt(r.rate_r),
                    f"{r.err_u:.6e}", _fmt(r.rate_u),
                    f"{r.err_p:.6e}", _fmt(r.rate_p),
                    f"{r.err_curl_u:.6e}", f"{r.err_grad_p:.6e}",
                    r.gmres_iters, f"{r.seconds:.3f}"])
    if close:
        out.close()


def format_markdown(case, k, rows):
    buf = io.StringIO()
    buf.write(f"### case={case.name} k={k}\n\n")
    buf.write("| n | dof | err_r | rate | err_u | rate | err_p | rate |"
              " iters | s |\n")
    buf.write("|---|-----|-------|------|-------|------|-------|------|"
              "-------|---|\n")
    for r in rows:
        buf.write(f"| {r.n} | {r.dof} | {r.err_r:.3e} | {_fmt(r.rate_r, 3)} "
                  f"| {r.err_u:.3e} | {_fmt(r.rate_u, 3)} "
                  f"| {r.err_p:.3e} | {_fmt(r.rate_p, 3)} "
                  f"| {r.gmres_iters} | {r.seconds:.1f} |\n")
    return buf.getvalue()
