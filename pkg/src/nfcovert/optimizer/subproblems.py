"""SCA surrogates of the BS-precoder and RIS-phase subproblems.

Both subproblems share one structure.  Every received stream amplitude is a
linear function ``g[k, j] = c[k, j]^H z`` of the complex decision vector
``z`` (vec(W) for the BS step, the relaxed reflection vector for the RIS
step), with noise normalised to one.  For user ``k``:

* ``kappa_k >= sum_{i >= 1} |g[k, i]|^2 + 1``          (common interference)
* ``eta_k   >= sum_{i >= 1, i != k} |g[k, i]|^2 + 1``  (private interference)
* ``nu_k    <= 2 Re(a* g[k, 0]) / kappa0 - |a|^2 kappa_k / kappa0^2``
* ``beth_k  <= 2 Re(b* g[k, k]) / eta0 - |b|^2 eta_k / eta0^2``

where ``a, b, kappa0, eta0`` are evaluated at the anchor, followed by the
rate caps ``sum(p_c) <= log2(1 + nu_k)`` and ``R_p,k <= log2(1 + beth_k)``
and the QoS rows.

By default each rate cap uses the minorant
``ln(1 + v) >= ln(1 + v0) + 1 - (1 + v0) / (1 + v)``, tight at the anchor
value ``v0``.  It is second-order-cone representable; the exact
exponential-cone form (``exact_log=True``) makes the interior-point
solvers stall on instances with a few hundred RIS elements.  Because the
minorant is tight at the anchor the SCA properties (surrogate below the
true rate, equality at the anchor) are unchanged.  The QoS rows carry a common slack ``s >= 0`` penalised
in the objective, so an infeasible anchor still yields a feasible surrogate
and the slack is driven to zero when the QoS targets are attainable.

Problems are written over ``x = [Re z; Im z]`` with cvxpy parameters so one
compiled problem is re-solved for every anchor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import cvxpy as cp
import numpy as np

from ..errors import InfeasibleError, InvalidArgument
from .solver import OPTIMAL, solve_convex

LN2 = np.log(2.0)


def realify(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows acting on ``x = [Re z; Im z]`` that give ``Re(c^H z)``, ``Im(c^H z)``."""
    c = np.atleast_2d(c)
    re = np.hstack([c.real, c.imag])
    im = np.hstack([-c.imag, c.real])
    return re, im


def _stack(c: np.ndarray) -> np.ndarray:
    re, im = realify(c)
    return np.vstack([re, im])


def to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def to_complex(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n] + 1j * x[n:]


@dataclass
class SurrogateSolution:
    z: np.ndarray
    objective: float
    slack: float
    p_c: np.ndarray
    nu: np.ndarray
    beth: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    status: str


class _SCASubproblem:
    """Shared rate block; subclasses add their domain constraints."""

    def __init__(self, n_complex: int, k: int, qos_penalty: float = 1e3,
                 exact_log: bool = False):
        self.n = n_complex
        self.exact_log = exact_log
        self.k = k
        n2 = 2 * n_complex
        self.x = cp.Variable(n2, name="x")
        self.kappa = cp.Variable(k, name="kappa")
        self.eta = cp.Variable(k, name="eta")
        self.nu = cp.Variable(k, nonneg=True, name="nu")
        self.beth = cp.Variable(k, nonneg=True, name="beth")
        self.p_c = cp.Variable(k, nonneg=True, name="p_c")
        self.ups = cp.Variable(k, nonneg=True, name="ups")
        self.s = cp.Variable(nonneg=True, name="s")

        self.A_c = [cp.Parameter((2 * k, n2), name=f"A_c{i}") for i in range(k)]
        self.A_p = [cp.Parameter((2 * (k - 1), n2), name=f"A_p{i}") for i in range(k)] if k > 1 else []
        self.L_c = cp.Parameter((k, n2), name="L_c")
        self.L_p = cp.Parameter((k, n2), name="L_p")
        self.b_c = cp.Parameter(k, nonneg=True, name="b_c")
        self.b_p = cp.Parameter(k, nonneg=True, name="b_p")
        self.r_min = cp.Parameter(k, name="r_min")
        self.nu0 = cp.Parameter(k, nonneg=True, name="nu0")
        self.beth0 = cp.Parameter(k, nonneg=True, name="beth0")
        self.log_nu0 = cp.Parameter(k, name="log_nu0")
        self.log_beth0 = cp.Parameter(k, name="log_beth0")

        cons = []
        for i in range(k):
            cons.append(cp.sum_squares(self.A_c[i] @ self.x) + 1 <= self.kappa[i])
            if k > 1:
                cons.append(cp.sum_squares(self.A_p[i] @ self.x) + 1 <= self.eta[i])
            else:
                cons.append(self.eta[i] >= 1)
        cons += [
            self.L_c @ self.x - cp.multiply(self.b_c, self.kappa) >= self.nu,
            self.L_p @ self.x - cp.multiply(self.b_p, self.eta) >= self.beth,
            cp.sum(self.p_c) <= self._log1p(self.nu, self.nu0, self.log_nu0) / LN2,
            self.ups <= self._log1p(self.beth, self.beth0, self.log_beth0) / LN2,
            self.p_c + self.ups >= self.r_min - self.s,
        ]
        cons += self._domain_constraints()
        objective = cp.Maximize(cp.sum(self.p_c + self.ups) - qos_penalty * self.s)
        self.problem = cp.Problem(objective, cons)
        self.C: Optional[np.ndarray] = None

    def _domain_constraints(self) -> list:
        raise NotImplementedError

    def _log1p(self, v, v0, log_v0):
        if self.exact_log:
            return cp.log(1 + v)
        return log_v0 + 1 - cp.multiply(1 + v0, cp.inv_pos(1 + v))

    # -- anchor handling ----------------------------------------------------

    def set_coefficients(self, C: np.ndarray):
        """``C[k, j]`` is the complex coefficient vector of stream ``j``
        (0 = common, ``1 + i`` = private ``i``) at user ``k``."""
        K = self.k
        if C.shape != (K, K + 1, self.n):
            raise InvalidArgument("coefficient tensor has the wrong shape")
        self.C = C
        for k in range(K):
            self.A_c[k].value = _stack(C[k, 1:])
            if K > 1:
                others = [1 + i for i in range(K) if i != k]
                self.A_p[k].value = _stack(C[k, others])

    def amplitudes(self, z: np.ndarray) -> np.ndarray:
        return np.einsum("kjn,n->kj", self.C.conj(), z)

    def set_anchor(self, z0: np.ndarray) -> dict:
        """Linearise the SINR terms at ``z0``; returns the anchor auxiliaries."""
        K = self.k
        G = self.amplitudes(z0)
        P = np.abs(G) ** 2
        kappa0 = P[:, 1:].sum(axis=1) + 1.0
        own = np.array([P[k, k + 1] for k in range(K)])
        eta0 = kappa0 - own
        L_c = np.zeros((K, 2 * self.n))
        L_p = np.zeros((K, 2 * self.n))
        for k in range(K):
            re, im = realify(self.C[k, 0])
            a = G[k, 0]
            L_c[k] = 2 * (a.real * re[0] + a.imag * im[0]) / kappa0[k]
            re, im = realify(self.C[k, k + 1])
            b = G[k, k + 1]
            L_p[k] = 2 * (b.real * re[0] + b.imag * im[0]) / eta0[k]
        self.L_c.value = L_c
        self.L_p.value = L_p
        self.b_c.value = P[:, 0] / kappa0 ** 2
        self.b_p.value = own / eta0 ** 2
        self.nu0.value = P[:, 0] / kappa0
        self.beth0.value = own / eta0
        self.log_nu0.value = np.log1p(self.nu0.value)
        self.log_beth0.value = np.log1p(self.beth0.value)
        return {"kappa": kappa0, "eta": eta0, "nu": P[:, 0] / kappa0, "beth": own / eta0}

    def solve(self, solver: str = "CLARABEL", tol_feas: float = 1e-6,
              tol_opt: float = 1e-6) -> SurrogateSolution:
        sol, status = solve_convex(self, solver=solver, tol_feas=tol_feas, tol_opt=tol_opt)
        if sol is None:
            raise InfeasibleError(f"surrogate solve failed ({status})", family="solver")
        return SurrogateSolution(
            z=to_complex(self.x.value), objective=float(self.problem.value),
            slack=float(self.s.value), p_c=np.maximum(self.p_c.value, 0.0),
            nu=self.nu.value, beth=self.beth.value, kappa=self.kappa.value,
            eta=self.eta.value, status=status)


class SubproblemBS(_SCASubproblem):
    """Precoder surrogate for a fixed reflection vector.

    ``z = vec(W) / sqrt(p_ref)`` with ``W = [w_c, w_1, ..., w_K]``; the power
    cap reads ``|x|^2 <= p_max / p_ref`` and the leakage cap
    ``leak_weight |x|^2 <= 1``.
    """

    def __init__(self, m_bs: int, k: int, qos_penalty: float = 1e3, exact_log: bool = False):
        self.m_bs = m_bs
        self.power_cap = cp.Parameter(nonneg=True, name="power_cap")
        self.leak_weight = cp.Parameter(nonneg=True, name="leak_weight")
        super().__init__(m_bs * (k + 1), k, qos_penalty, exact_log)

    def _domain_constraints(self):
        return [cp.sum_squares(self.x) <= self.power_cap,
                self.leak_weight * cp.sum_squares(self.x) <= 1]

    def configure(self, h_norm: np.ndarray, power_cap: float, leak_weight: float,
                  r_min: np.ndarray):
        """``h_norm[k]`` is user k's cascaded channel times sqrt(p_ref)/sigma_k."""
        K, M = self.k, self.m_bs
        C = np.zeros((K, K + 1, M * (K + 1)), dtype=complex)
        for k in range(K):
            for j in range(K + 1):
                C[k, j, j * M:(j + 1) * M] = h_norm[k]
        self.set_coefficients(C)
        self.power_cap.value = float(power_cap)
        self.leak_weight.value = float(min(leak_weight, 1e12))
        self.r_min.value = np.asarray(r_min, dtype=float)


class SubproblemRIS(_SCASubproblem):
    """Reflection surrogate for fixed precoder directions.

    The decision vector is ``z = sqrt(tau) psi`` where ``tau`` rescales the
    fixed precoders ``W``; the received amplitudes are then exactly those of
    ``(sqrt(tau) W, psi)``.  ``|z_n|^2 <= tau`` encodes ``|psi_n| <= 1``,
    ``tau <= tau_max`` the power budget and ``|Q z|^2 <= 1`` the leakage cap
    (``Q`` already scaled by ``sqrt(P_max / leak_cap)``, ``W`` at full
    power).  With ``tau_max = 1`` and the anchor ``tau = 1`` this is the
    plain relaxed reflection step;
    the extra scalar lets the step trade warden nulling against power.
    """

    def __init__(self, n_ris: int, m_bs: int, k: int, qos_penalty: float = 1e3,
                 exact_log: bool = False):
        self.m_bs = m_bs
        self.Q = cp.Parameter((2 * m_bs, 2 * n_ris), name="Q")
        self.tau = cp.Variable(nonneg=True, name="tau")
        self.tau_max = cp.Parameter(nonneg=True, name="tau_max")
        super().__init__(n_ris, k, qos_penalty, exact_log)

    def _domain_constraints(self):
        pairs = cp.reshape(self.x, (self.n, 2), order="F")
        return [cp.norm(pairs, 2, axis=1) <= cp.sqrt(self.tau), self.tau <= self.tau_max,
                cp.sum_squares(self.Q @ self.x) <= 1]

    def split(self, sol: "SurrogateSolution") -> tuple[np.ndarray, float]:
        """Recover ``(psi, tau)`` from the scaled solution."""
        tau = float(max(self.tau.value, 0.0))
        if tau <= 0:
            return np.zeros_like(sol.z), 0.0
        return sol.z / np.sqrt(tau), tau

    def configure(self, H_br: np.ndarray, g_users: np.ndarray, g_rw: np.ndarray,
                  W: np.ndarray, noise: np.ndarray, leak_scale: float, r_min: np.ndarray,
                  tau_max: float = 1.0):
        """Coefficients for fixed ``W`` (columns ``[w_c, w_1, ..., w_K]``).

        ``|h_k^H w_j| = |c^H psi|`` with ``c = conj(g_k) * (H_br w_j)``.
        """
        K = self.k
        HW = H_br @ W                                # (N, K + 1)
        C = np.empty((K, K + 1, self.n), dtype=complex)
        for k in range(K):
            C[k] = (g_users[k].conj()[:, None] * HW).T / np.sqrt(noise[k])
        self.set_coefficients(C)
        Qc = H_br.conj().T * g_rw[None, :]          # H^H diag(g_w), (M, N)
        self.Q.value = np.sqrt(min(leak_scale, 1e24)) * _stack(Qc.conj())
        self.tau_max.value = float(tau_max)
        self.r_min.value = np.asarray(r_min, dtype=float)


def build_bs_subproblem(h_norm: np.ndarray, anchor_z: np.ndarray, power_cap: float,
                        leak_weight: float, r_min: np.ndarray, qos_penalty: float = 1e3,
                        reuse: Optional[SubproblemBS] = None) -> SubproblemBS:
    """Configure (or build) the precoder surrogate anchored at ``anchor_z``."""
    K, M = h_norm.shape
    if np.sum(np.abs(anchor_z) ** 2) > power_cap * (1 + 1e-6) + 1e-12:
        raise InfeasibleError("anchor precoder exceeds the power budget; re-initialise W",
                              family="power")
    sub = reuse if reuse is not None else SubproblemBS(M, K, qos_penalty)
    sub.configure(h_norm, power_cap, leak_weight, r_min)
    sub.set_anchor(anchor_z)
    return sub


def build_ris_subproblem(H_br, g_users, g_rw, W, noise, leak_scale, anchor_psi, r_min,
                         qos_penalty: float = 1e3, tau_max: float = 1.0,
                         reuse: Optional[SubproblemRIS] = None) -> SubproblemRIS:
    if np.any(np.abs(anchor_psi) > 1 + 1e-9):
        raise InfeasibleError("anchor reflection vector leaves the unit disc", family="modulus")
    K = g_users.shape[0]
    sub = reuse if reuse is not None else SubproblemRIS(H_br.shape[0], H_br.shape[1], K,
                                                        qos_penalty)
    sub.configure(H_br, g_users, g_rw, W, np.broadcast_to(noise, (K,)), leak_scale, r_min,
                  tau_max)
    sub.set_anchor(anchor_psi)
    return sub


__all__ = ["SubproblemBS", "SubproblemRIS", "SurrogateSolution", "build_bs_subproblem",
           "build_ris_subproblem", "realify", "OPTIMAL"]
