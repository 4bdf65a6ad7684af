"""Energy, conservation and equivalence audits for overset runs.

The composite energy of an overset pair is

    E = ||u||^2_u + ||v||^2_v - eta ||u||^2_O - (1 - eta) ||v||^2_O,

which removes the double-counted overlap energy; with the block structure
of the grids this is the weighted block sum with weights (1, 1 - eta) on
the u blocks and (eta, 1) on the v blocks.  All rates are exact
semi-discrete rates, 2 <q, qdot>_H with qdot from the actual right-hand
side, never finite differences of E(t): stability verdicts then measure
the spatial coupling alone.

For penalty problems the records close an exact ledger,

    dE/dt + P_b + P_c + P_overlap + D_a + D_d + D_glue = 0,

where P_b, P_c are the interface quadratic forms, P_overlap the mean of
the overlap point forms, D_a, D_d the physical-boundary dissipation
q^T |A| q, and D_glue the block-glue jump dissipation.  The conservation
record closes d/dt(weighted total) = fluxIn - fluxOut exactly whenever
the couplings satisfy the flux-balance condition.
"""

from __future__ import annotations

import csv

import numpy as np

from .coupling import InterfaceCoupling, OverlapCoupling, overlap_quadratic_form

CSV_BASE_COLUMNS = [
    "t",
    "E",
    "dEdt",
    "normU",
    "normV",
    "normU_O",
    "normV_O",
    "P_b",
    "P_c",
    "P_overlap",
    "consResidual",
]


# ---------------------------------------------------------------------------
# block-level quadrature helpers (1D blocks, optionally extruded in y)
# ---------------------------------------------------------------------------


def _norm_sq(blk, yline, q) -> float:
    q2 = (q * q).sum(axis=-1)
    if yline is None:
        return float(blk.H @ q2)
    return float(blk.H @ (q2 @ yline.H))


def _inner(blk, yline, a, b) -> float:
    prod = (a * b).sum(axis=-1)
    if yline is None:
        return float(blk.H @ prod)
    return float(blk.H @ (prod @ yline.H))


def _integral(blk, yline, q) -> np.ndarray:
    if yline is None:
        return blk.H @ q
    return np.einsum("i,ijn,j->n", blk.H, q, yline.H)


def _weights(problem):
    if problem.mode == "single":
        return [1.0]
    eta = problem.eta
    return [1.0, 1.0 - eta, eta, 1.0]


def _yline(problem):
    return getattr(problem, "yline", None)


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------


def composite_energy(problem, y, eta: float | None = None) -> float:
    """Overlap-corrected total energy of the current state."""
    return energy_breakdown(problem, y, eta)["E"]


def energy_breakdown(problem, y, eta: float | None = None) -> dict:
    eta = problem.eta if eta is None else float(eta)
    if not 0.0 < eta < 1.0 and problem.mode != "single":
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    yl = _yline(problem)
    fields = problem.fields(y)
    if problem.mode == "single":
        n2 = _norm_sq(problem.blocks[0], yl, fields[0])
        return {"E": n2, "normU": np.sqrt(n2), "normV": 0.0, "normU_O": 0.0, "normV_O": 0.0}
    u0, u1, v0, v1 = fields
    bu0, bu1, bv0, bv1 = problem.blocks
    nu = _norm_sq(bu0, yl, u0) + _norm_sq(bu1, yl, u1)
    nv = _norm_sq(bv0, yl, v0) + _norm_sq(bv1, yl, v1)
    nuo = _norm_sq(bu1, yl, u1)
    nvo = _norm_sq(bv0, yl, v0)
    e = nu + nv - eta * nuo - (1.0 - eta) * nvo
    return {
        "E": e,
        "normU": float(np.sqrt(nu)),
        "normV": float(np.sqrt(nv)),
        "normU_O": float(np.sqrt(nuo)),
        "normV_O": float(np.sqrt(nvo)),
    }


def energy_rate(problem, y, ydot=None, eta: float | None = None) -> float:
    """Exact semi-discrete dE/dt = sum of weighted 2<q, qdot>_H."""
    eta_w = problem.eta if eta is None else float(eta)
    if ydot is None:
        ydot = problem.rhs(0.0, y)
    yl = _yline(problem)
    fields = problem.fields(y)
    dots = problem.fields(ydot)
    if problem.mode == "single":
        return 2.0 * _inner(problem.blocks[0], yl, fields[0], dots[0])
    w = [1.0, 1.0 - eta_w, eta_w, 1.0]
    return 2.0 * sum(
        wk * _inner(blk, yl, q, qd)
        for wk, blk, q, qd in zip(w, problem.blocks, fields, dots)
    )


# ---------------------------------------------------------------------------
# interface forms and ledger
# ---------------------------------------------------------------------------


def _form_rows(u, v, coupling: InterfaceCoupling) -> np.ndarray:
    """Interface quadratic form evaluated rowwise (vectorized over y)."""
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    a, b = coupling.a_n, coupling.beta
    d = u - v
    return (
        b * np.einsum("jn,nm,jm->j", u, a, u)
        - b * np.einsum("jn,nm,jm->j", v, a, v)
        + 2.0 * np.einsum("jn,nm,jm->j", u, coupling.sigma_u, d)
        - 2.0 * np.einsum("jn,nm,jm->j", v, coupling.sigma_v, d)
    )


def _quad_rows(q, mat) -> np.ndarray:
    q = np.atleast_2d(q)
    return np.einsum("jn,nm,jm->j", q, mat, q)


def _line_sum(rows, yline) -> float:
    if yline is None:
        return float(rows[0])
    return float(rows @ yline.H)


def energy_ledger(problem, y, ydot=None) -> dict:
    """All terms of the semi-discrete energy identity, plus its closure.

    Returns P_b, P_c, P_overlap, boundary dissipation D_a / D_d, glue
    dissipation, dEdt, and ``closure`` = dEdt + sum of all the rest
    (zero to roundoff for penalty problems).
    """
    if ydot is None:
        ydot = problem.rhs(0.0, y)
    yl = _yline(problem)
    sysm = problem.system
    fields = problem.fields(y)
    dedt = energy_rate(problem, y, ydot)
    out = {"dEdt": dedt, "P_b": None, "P_c": None, "P_overlap": None}
    if problem.mode == "single":
        (q,) = fields
        out["D_a"] = _line_sum(_quad_rows(q[0], sysm.aabs), yl)
        out["D_d"] = _line_sum(_quad_rows(q[-1], sysm.aabs), yl)
        out["D_glue"] = 0.0
        out["closure"] = dedt + out["D_a"] + out["D_d"]
        return out
    u0, u1, v0, v1 = fields
    eta = problem.eta
    out["D_a"] = _line_sum(_quad_rows(u0[0], sysm.aabs), yl)
    out["D_d"] = _line_sum(_quad_rows(v1[-1], sysm.aabs), yl)
    if problem.mode == "penalty":
        cb, cc = problem.couplings
        out["P_b"] = _line_sum(_form_rows(u0[-1], v0[0], cb), yl)
        out["P_c"] = _line_sum(_form_rows(u1[-1], v1[0], cc), yl)
        db = u0[-1] - u1[0]
        dc = v0[-1] - v1[0]
        out["D_glue"] = (1.0 - eta) * _line_sum(_quad_rows(db, sysm.aabs), yl) + eta * _line_sum(
            _quad_rows(dc, sysm.aabs), yl
        )
        out["P_overlap"] = overlap_penalty_sum(problem, y)
        out["closure"] = (
            dedt
            + out["P_b"]
            + out["P_c"]
            + (out["P_overlap"] or 0.0)
            + out["D_a"]
            + out["D_d"]
            + out["D_glue"]
        )
    else:
        out["D_glue"] = None
        out["closure"] = None
    return out


def overlap_penalty_sum(problem, y):
    """Mean of the overlap point forms, (1/M) sum_m P_m; None without points."""
    overlap = getattr(problem, "overlap", None)
    geometry = getattr(problem, "geometry", None)
    points = getattr(geometry, "overlap_points", None)
    if overlap is None or points is None or len(points) == 0:
        return None
    _, u1, v0, _ = problem.fields(y)
    total = 0.0
    for iu, iv, j in points:
        total += overlap_quadratic_form(u1[iu, j], v0[iv, j], overlap)
    return total / len(points)


# ---------------------------------------------------------------------------
# conservation
# ---------------------------------------------------------------------------


def conservation_residual(problem, y, ydot=None):
    """(residual, fluxIn, fluxOut): d/dt of the weighted total minus fluxes.

    The weighted total is 1^T H u + 1^T H v - eta 1^T H_O u -
    (1 - eta) 1^T H_O v componentwise; fluxes are the characteristic
    boundary fluxes A^- u at the inflow end and A^+ v at the outflow end.
    """
    if ydot is None:
        ydot = problem.rhs(0.0, y)
    yl = _yline(problem)
    sysm = problem.system
    fields = problem.fields(y)
    dots = problem.fields(ydot)
    w = _weights(problem)
    wdot = sum(wk * _integral(blk, yl, qd) for wk, blk, qd in zip(w, problem.blocks, dots))
    first = fields[0]
    last = fields[-1]
    if yl is None:
        flux_in = -(sysm.aminus_abs @ first[0])
        flux_out = sysm.aplus @ last[-1]
    else:
        flux_in = -np.einsum("nm,jm,j->n", sysm.aminus_abs, first[0], yl.H)
        flux_out = np.einsum("nm,jm,j->n", sysm.aplus, last[-1], yl.H)
    residual = wdot - (flux_in - flux_out)
    return residual, flux_in, flux_out


def weighted_total(problem, y) -> np.ndarray:
    yl = _yline(problem)
    w = _weights(problem)
    return sum(wk * _integral(blk, yl, q) for wk, blk, q in zip(w, problem.blocks, problem.fields(y)))


# ---------------------------------------------------------------------------
# parasitic interface terms (characteristic coupling without decoupling)
# ---------------------------------------------------------------------------


def parasitic_terms(problem, y):
    """The two interface combinations with no data bound.

    term_c = {v' A+ v - u' A+ u} at the right interface,
    term_b = {u' |A-| u - v' |A-| v} at the left interface.
    """
    if problem.mode == "single":
        raise ValueError("parasitic terms are defined for overset problems")
    yl = _yline(problem)
    u0, u1, v0, v1 = problem.fields(y)
    sysm = problem.system
    term_c = _line_sum(
        _quad_rows(v1[0], sysm.aplus) - _quad_rows(u1[-1], sysm.aplus), yl
    )
    term_b = _line_sum(
        _quad_rows(u0[-1], sysm.aminus_abs) - _quad_rows(v0[0], sysm.aminus_abs), yl
    )
    return term_c, term_b


# ---------------------------------------------------------------------------
# equivalence against a single-domain reference
# ---------------------------------------------------------------------------


def _ref_indices(blk, ref_block):
    pos = (blk.x - ref_block.left) / ref_block.h
    idx = np.rint(pos).astype(int)
    if np.abs(pos - idx).max() > 1e-9:
        raise ValueError("component grid nodes do not align with the reference grid")
    if idx.min() < 0 or idx.max() >= ref_block.n:
        raise ValueError("component grid extends outside the reference grid")
    return idx


def equivalence_error(problem, y, ref_problem, y_ref):
    """H-norm errors (errU, errV) against a single-domain reference state."""
    yl = _yline(problem)
    ref_block = ref_problem.blocks[0]
    (ref_field,) = ref_problem.fields(y_ref)
    fields = problem.fields(y)
    errs = []
    for blk, q in zip(problem.blocks, fields):
        idx = _ref_indices(blk, ref_block)
        diff = q - ref_field[idx]
        errs.append(_norm_sq(blk, yl, diff))
    if problem.mode == "single":
        return float(np.sqrt(errs[0])), 0.0
    err_u = float(np.sqrt(errs[0] + errs[1]))
    err_v = float(np.sqrt(errs[2] + errs[3]))
    return err_u, err_v


def oracle_error(problem, y, t, oracle):
    """H-norm errors against a callable oracle(x_nodes, t) -> field."""
    yl = _yline(problem)
    fields = problem.fields(y)
    errs = []
    for blk, q in zip(problem.blocks, fields):
        diff = q - np.asarray(oracle(blk.x, t), dtype=float)
        errs.append(_norm_sq(blk, yl, diff))
    if problem.mode == "single":
        return float(np.sqrt(errs[0])), 0.0
    return float(np.sqrt(errs[0] + errs[1])), float(np.sqrt(errs[2] + errs[3]))


# ---------------------------------------------------------------------------
# per-run record series
# ---------------------------------------------------------------------------


class DiagnosticsSeries:
    """Append-only per-step records with a fixed CSV column schema."""

    def __init__(self, n_components: int):
        self.n = n_components
        self.records: list[dict] = []

    def append(self, record: dict) -> None:
        if self.records and record["t"] <= self.records[-1]["t"]:
            raise ValueError("records must have strictly increasing t")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, key: str) -> np.ndarray:
        return np.array([r.get(key) if r.get(key) is not None else np.nan for r in self.records])

    def columns(self):
        cols = list(CSV_BASE_COLUMNS)
        cols += [f"fluxIn_{k + 1}" for k in range(self.n)]
        cols += [f"fluxOut_{k + 1}" for k in range(self.n)]
        cols += ["errU", "errV"]
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for rec in self.records:
                row = []
                for col in cols:
                    val = rec.get(col)
                    row.append("" if val is None else f"{val:.17g}")
                writer.writerow(row)


def collect(problem, t, y, ydot=None, reference=None, oracle=None) -> dict:
    """One full diagnostics record for the current state."""
    if ydot is None:
        ydot = problem.rhs(t, y)
    rec = {"t": t}
    rec.update(energy_breakdown(problem, y))
    rec["dEdt"] = energy_rate(problem, y, ydot)
    ledger = energy_ledger(problem, y, ydot)
    rec["P_b"] = ledger["P_b"]
    rec["P_c"] = ledger["P_c"]
    rec["P_overlap"] = ledger["P_overlap"]
    rec["ledger_closure"] = ledger["closure"]
    rec["D_boundary"] = (ledger["D_a"] or 0.0) + (ledger["D_d"] or 0.0)
    rec["D_glue"] = ledger["D_glue"]
    residual, flux_in, flux_out = conservation_residual(problem, y, ydot)
    rec["consResidual"] = float(np.abs(residual).max())
    for k in range(problem.system.n):
        rec[f"fluxIn_{k + 1}"] = float(flux_in[k])
        rec[f"fluxOut_{k + 1}"] = float(flux_out[k])
    if problem.mode != "single":
        term_c, term_b = parasitic_terms(problem, y)
        rec["parasitic_c"] = term_c
        rec["parasitic_b"] = term_b
    if reference is not None:
        ref_problem, y_ref = reference
        rec["errU"], rec["errV"] = equivalence_error(problem, y, ref_problem, y_ref)
    elif oracle is not None:
        rec["errU"], rec["errV"] = oracle_error(problem, y, t, oracle)
    else:
        rec["errU"] = rec["errV"] = None
    return rec
