"""Construction and certification of interface and overlap penalty couplings.

An interface coupling is a tuple (A_n, beta, Sigma_u, Sigma_v) acting at one
interface line.  The coupled pair is energy bounded and conservative when

    beta * A_n + Sigma_u = Sigma_v          (flux exchange balances)
    2 * Sigma_v - beta * A_n  >=  0         (interface form nonnegative)

hold; both together are equivalent to positive semidefiniteness of the block
quadratic form

    M = [[beta A + 2 Su,  -(Su + Sv)],
         [-(Su + Sv),     -beta A + 2 Sv]],

and then the interface form collapses to

    P(u, v) = (u - v)^T (Sigma_u + Sigma_v) (u - v) >= 0.

Overlap-point couplings (Sigma_u^m, Sigma_v^m) must satisfy
(1 - eta) Sigma_u^m = eta Sigma_v^m with Sigma_u^m >= 0, which makes every
overlap penalty purely dissipative and conservation-neutral.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_sym, eig_sym, flux_split, is_psd, min_eig_witness

DEFAULT_TOL = 1e-12


def _scale(*mats) -> float:
    return max([1.0] + [float(np.abs(m).max()) for m in mats])


@dataclass(frozen=True)
class Verdict:
    """Outcome of a coupling certification check."""

    passed: bool
    reason: str = ""
    witness: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class InterfaceCoupling:
    """Penalty matrices and weight for one interface.

    ``a_n`` is the normal coefficient matrix at the interface and ``beta``
    the energy weight carried by that interface (eta at the left interface
    and 1 - eta at the right one in 1D; -eta / 1 - eta with the geometric
    normals in 2D).
    """

    a_n: np.ndarray
    beta: float
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    verdict: Verdict = field(default=Verdict(False, "unchecked"))

    @property
    def certified(self) -> bool:
        return self.verdict.passed

    @property
    def n(self) -> int:
        return self.a_n.shape[0]

    def as_dict(self) -> dict:
        return {
            "A_n": self.a_n.tolist(),
            "beta": self.beta,
            "SigmaU": self.sigma_u.tolist(),
            "SigmaV": self.sigma_v.tolist(),
        }

    @staticmethod
    def from_dict(data: dict, tol: float = DEFAULT_TOL) -> "InterfaceCoupling":
        a_n = as_sym(data["A_n"])
        beta = float(data["beta"])
        sigma_u = as_sym(data["SigmaU"])
        sigma_v = as_sym(data["SigmaV"])
        verdict = check_interface_coupling(a_n, beta, sigma_u, sigma_v, tol)
        return InterfaceCoupling(a_n, beta, sigma_u, sigma_v, verdict)


def check_interface_coupling(a_n, beta: float, sigma_u, sigma_v, tol: float = DEFAULT_TOL) -> Verdict:
    """Certify the two interface conditions, with a witness on PSD failure."""
    a_n = as_sym(a_n)
    sigma_u = as_sym(sigma_u)
    sigma_v = as_sym(sigma_v)
    if not (a_n.shape == sigma_u.shape == sigma_v.shape):
        raise ValueError("matrix dimensions disagree")
    scale = _scale(a_n, sigma_u, sigma_v)
    residual = beta * a_n + sigma_u - sigma_v
    if np.abs(residual).max() > tol * scale:
        return Verdict(
            False,
            f"flux-balance condition violated: ||beta*A + Su - Sv|| = "
            f"{np.abs(residual).max():.3e} > {tol * scale:.3e}",
        )
    form = 2.0 * sigma_v - beta * a_n
    if not is_psd(form, tol):
        lam, vec = min_eig_witness(form)
        return Verdict(
            False,
            f"interface form 2*Sv - beta*A has negative eigenvalue {lam:.3e}",
            witness=vec,
        )
    return Verdict(True)


def make_upwind_coupling(a_n, beta: float = 0.5, tol: float = DEFAULT_TOL) -> InterfaceCoupling:
    """Upwind coupling: penalize incoming characteristics on each side.

    With B = beta * A_n, choose Sigma_u = |B^-| and Sigma_v = B^+, so the
    flux-balance condition holds identically and the interface form is
    (u - v)^T |B| (u - v).  For beta = 1/2 this is Sigma_u = |A^-| / 2 and
    Sigma_v = A^+ / 2.
    """
    a_n = as_sym(a_n)
    split = flux_split(beta * a_n)
    sigma_u = split.aminus_abs
    sigma_v = split.aplus
    verdict = check_interface_coupling(a_n, beta, sigma_u, sigma_v, tol)
    return InterfaceCoupling(a_n, beta, sigma_u, sigma_v, verdict)


def complete_coupling(a_n, beta: float, sigma_u, tol: float = DEFAULT_TOL) -> InterfaceCoupling:
    """Complete Sigma_v from the flux-balance condition; PSD may still fail."""
    a_n = as_sym(a_n)
    sigma_u = as_sym(sigma_u)
    sigma_v = beta * a_n + sigma_u
    verdict = check_interface_coupling(a_n, beta, sigma_u, sigma_v, tol)
    return InterfaceCoupling(a_n, beta, sigma_u, sigma_v, verdict)


def interface_block_form(coupling: InterfaceCoupling) -> np.ndarray:
    """The 2n x 2n matrix M with P(u, v) = [u; v]^T M [u; v]."""
    a, b = coupling.a_n, coupling.beta
    su, sv = coupling.sigma_u, coupling.sigma_v
    cross = -(su + sv)
    top = np.hstack([b * a + 2.0 * su, cross])
    bot = np.hstack([cross, -b * a + 2.0 * sv])
    return np.vstack([top, bot])


def interface_quadratic_form(u, v, coupling: InterfaceCoupling) -> float:
    """Interface energy form P = beta u'Au - beta v'Av + 2u'Su(u-v) + 2v'Sv(v-u)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (coupling.n,) or v.shape != (coupling.n,):
        raise ValueError("state dimensions disagree with coupling")
    a, b = coupling.a_n, coupling.beta
    d = u - v
    return float(
        b * (u @ a @ u) - b * (v @ a @ v) + 2.0 * u @ coupling.sigma_u @ d - 2.0 * v @ coupling.sigma_v @ d
    )


def interface_quadratic_form_reduced(u, v, coupling: InterfaceCoupling) -> float:
    """Reduced form (u-v)^T (Su + Sv) (u-v); equals the full form when certified."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return float(d @ (coupling.sigma_u + coupling.sigma_v) @ d)


@dataclass(frozen=True)
class OverlapCoupling:
    """Penalty matrices for interior overlap points.

    ``eta`` is the overlap energy weight; certification requires
    (1 - eta) Sigma_u^m = eta Sigma_v^m and Sigma_u^m >= 0.
    """

    sigma_u: np.ndarray
    sigma_v: np.ndarray
    eta: float
    verdict: Verdict = field(default=Verdict(False, "unchecked"))

    @property
    def certified(self) -> bool:
        return self.verdict.passed

    def as_dict(self) -> dict:
        return {"SigmaUm": self.sigma_u.tolist(), "SigmaVm": self.sigma_v.tolist(), "eta": self.eta}


def check_overlap_coupling(eta: float, sigma_um, sigma_vm, tol: float = DEFAULT_TOL) -> Verdict:
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    su = as_sym(sigma_um)
    sv = as_sym(sigma_vm)
    scale = _scale(su, sv)
    residual = (1.0 - eta) * su - eta * sv
    if np.abs(residual).max() > tol * scale:
        return Verdict(
            False,
            f"overlap balance violated: ||(1-eta)Su - eta*Sv|| = {np.abs(residual).max():.3e}",
        )
    if not is_psd(su, tol):
        lam, vec = min_eig_witness(su)
        return Verdict(False, f"Sigma_u^m has negative eigenvalue {lam:.3e}", witness=vec)
    return Verdict(True)


def make_overlap_coupling(eta: float, sigma_um, tol: float = DEFAULT_TOL) -> OverlapCoupling:
    """Complete Sigma_v^m = (1 - eta)/eta * Sigma_u^m from the balance condition."""
    su = as_sym(sigma_um)
    sv = (1.0 - eta) / eta * su
    verdict = check_overlap_coupling(eta, su, sv, tol)
    return OverlapCoupling(sigma_u=su, sigma_v=sv, eta=eta, verdict=verdict)


def overlap_quadratic_form(u, v, coupling: OverlapCoupling) -> float:
    """Overlap point form P_m = 2(1-eta) u'Su(u-v) + 2 eta v'Sv(v-u)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = u - v
    eta = coupling.eta
    return float(2.0 * (1.0 - eta) * u @ coupling.sigma_u @ d - 2.0 * eta * v @ coupling.sigma_v @ d)


def make_antidissipative_coupling(a_n, beta: float, strength: float = 1.0, tol: float = DEFAULT_TOL):
    """Deliberately uncertified coupling for energy-growth demonstrations.

    Starts from the upwind coupling and subtracts a rank-one term along the
    leading eigenvector of the interface form 2*Sv - beta*A, which both
    breaks the flux-balance condition and makes the form indefinite.
    Returns the coupling and the witness direction used.
    """
    base = make_upwind_coupling(a_n, beta, tol)
    form = 2.0 * base.sigma_v - beta * base.a_n
    dec = eig_sym(form)
    w = dec.P[:, 0]
    kappa = strength * max(dec.lam[0], 1.0)
    sigma_v = base.sigma_v - kappa * np.outer(w, w)
    verdict = check_interface_coupling(base.a_n, beta, base.sigma_u, sigma_v, tol)
    return InterfaceCoupling(base.a_n, beta, base.sigma_u, sigma_v, verdict), w
