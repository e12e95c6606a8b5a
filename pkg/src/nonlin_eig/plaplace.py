"""Mean-value discrete p-Laplacian, its Jacobian, energy and norms.

The operator on the lattice is
    Delta_p^h u(x) = C_h * sum_{y in B_r(x)} |u(y)-u(x)|^(p-2) (u(y)-u(x))
with C_h = h^2 / (D_{2,p} pi r^(p+2)).  Reads outside the domain (and at
non-interior nodes) are 0.  The discrete Dirichlet energy is defined as the
symmetrized double sum whose exact gradient under the h^2-weighted pairing
is -Delta_p^h, which makes the discrete Euler identity hold to roundoff.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .functional import FunctionalPair, power_map
from .grid import GridDomain, GridFunction, Stencil
from . import newton


def _values(u) -> np.ndarray:
    if isinstance(u, GridFunction):
        return u.values
    return np.asarray(u, dtype=float)


class PLaplaceInstance(FunctionalPair):
    """FunctionalPair for the grid p-Laplacian.

    J is the discrete p-Dirichlet energy, H(u) = (1/p) ||u||_p^p, and the
    pairing carries the volume weight h^2 so that discrete quantities
    approximate their continuum counterparts.  The instance is immutable
    and shareable across threads.
    """

    def __init__(self, domain: GridDomain, stencil: Stencil, p: float,
                 epsilon: float = 1e-9) -> None:
        if p <= 1:
            raise ValueError("p must be > 1")
        self.domain = domain
        self.stencil = stencil
        self.p = float(p)
        self.epsilon = float(epsilon)
        self._mask = domain.interior_mask
        self._h2 = domain.h ** 2
        # interior node numbering, row-major
        idx = -np.ones((domain.ny, domain.nx), dtype=np.int64)
        idx[self._mask] = np.arange(self._mask.sum())
        self._index = idx
        m = stencil.margin
        self._index_padded = -np.ones((domain.ny + 2 * m, domain.nx + 2 * m),
                                      dtype=np.int64)
        self._index_padded[m:m + domain.ny, m:m + domain.nx] = idx

    # --- array plumbing ------------------------------------------------------

    @property
    def n_interior(self) -> int:
        return self.domain.n_interior

    def free_flatten(self, u):
        return _values(u)[self._mask].copy()

    def lift_free(self, x):
        out = np.zeros((self.domain.ny, self.domain.nx))
        out[self._mask] = x
        return out

    def _pad(self, values: np.ndarray, margin: int) -> np.ndarray:
        ny, nx = values.shape
        out = np.zeros((ny + 2 * margin, nx + 2 * margin))
        out[margin:margin + ny, margin:margin + nx] = values
        return out

    # --- operator, energy, Jacobian ------------------------------------------

    def neg_plaplacian(self, u) -> np.ndarray:
        """-Delta_p^h u; zero at non-interior nodes (= subgrad of J)."""
        vals = np.where(self._mask, _values(u), 0.0)
        m = self.stencil.margin
        P = self._pad(vals, m)
        ny, nx = vals.shape
        acc = np.zeros_like(vals)
        for dy, dx in self.stencil.offsets:
            nb = P[m + dy:m + dy + ny, m + dx:m + dx + nx]
            acc += power_map(nb - vals, self.p)
        return np.where(self._mask, -self.stencil.weight * acc, 0.0)

    def dirichlet_energy(self, u) -> float:
        """J_h(u) = (C_h h^2 / (2p)) * sum over directed stencil pairs."""
        vals = np.where(self._mask, _values(u), 0.0)
        m = self.stencil.margin
        P = self._pad(vals, m)
        Q = self._pad(P, m)
        hy, hx = P.shape
        total = 0.0
        for dy, dx in self.stencil.offsets:
            nb = Q[m + dy:m + dy + hy, m + dx:m + dx + hx]
            total += float(np.sum(np.abs(nb - P) ** self.p))
        return self.stencil.weight * self._h2 * total / (2.0 * self.p)

    def kernel_derivative(self, d: np.ndarray, epsilon: float | None = None
                          ) -> np.ndarray:
        """(p-1)(d^2 + eps^2)^((p-2)/2), the smoothed derivative of power_map.

        The smoothing keeps Newton's Jacobian nonsingular (p<2: singular
        kernel, p>2: degenerate at flat regions); the residual itself is
        never modified.
        """
        if epsilon is None:
            epsilon = self.epsilon * max(1.0, float(np.max(np.abs(d))) if d.size else 1.0)
        return (self.p - 1.0) * (d * d + epsilon * epsilon) ** ((self.p - 2.0) / 2.0)

    def jacobian_matrix(self, u, epsilon: float | None = None):
        """Sparse symmetric PSD Jacobian of -Delta_p^h over interior nodes."""
        vals = np.where(self._mask, _values(u), 0.0)
        m = self.stencil.margin
        P = self._pad(vals, m)
        ny, nx = vals.shape
        n = self.n_interior
        rows_int = self._index[self._mask]
        diag = np.zeros(n)
        rows, cols, data = [], [], []
        if epsilon is None:
            scale = float(np.max(np.abs(vals))) if vals.size else 0.0
            epsilon = self.epsilon * max(1.0, scale)
        for dy, dx in self.stencil.offsets:
            nb = P[m + dy:m + dy + ny, m + dx:m + dx + nx]
            d = (nb - vals)[self._mask]
            w = self.stencil.weight * (self.p - 1.0) \
                * (d * d + epsilon * epsilon) ** ((self.p - 2.0) / 2.0)
            diag[rows_int] += w
            nb_idx = self._index_padded[m + dy:m + dy + ny,
                                        m + dx:m + dx + nx][self._mask]
            inside = nb_idx >= 0
            rows.append(rows_int[inside])
            cols.append(nb_idx[inside])
            data.append(-w[inside])
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        data.append(diag)
        A = scipy.sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return A.tocsr()

    # --- FunctionalPair interface ---------------------------------------------

    def energy_J(self, u):
        return self.dirichlet_energy(u)

    def subgrad_J(self, u):
        return self.neg_plaplacian(u)

    def inverse_subgrad_J(self, zeta, tol=1e-12, max_iter=500, warm_start=None):
        settings = newton.NewtonSettings(tol_abs=tol, max_iter=max_iter)
        init = _values(warm_start) if warm_start is not None \
            else np.zeros((self.domain.ny, self.domain.nx))
        return newton.solve_p_poisson(self, _values(zeta), init, settings)

    def prox_J(self, u_ref, tau, tol=1e-12, max_iter=500):
        settings = newton.NewtonSettings(tol_abs=tol, max_iter=max_iter)
        return newton.solve_prox(self, _values(u_ref), tau, settings)

    def duality_map_H(self, u):
        vals = np.where(self._mask, _values(u), 0.0)
        return np.where(self._mask, power_map(vals, self.p), 0.0)

    def norm_H(self, u):
        vals = np.where(self._mask, _values(u), 0.0)
        return float((self._h2 * np.sum(np.abs(vals) ** self.p)) ** (1.0 / self.p))

    def dual_norm_H(self, zeta):
        vals = np.where(self._mask, _values(zeta), 0.0)
        return float((self._h2 * np.sum(np.abs(vals) ** self.q)) ** (1.0 / self.q))

    def pairing(self, zeta, u):
        return float(self._h2 * np.sum(_values(zeta) * _values(u)))

    def hess_J_matrix(self, u):
        return self.jacobian_matrix(u)

    def duality_map_H_prime(self, w):
        vals = _values(w)
        return self.kernel_derivative(vals[self._mask])


# --- module-level operations on GridFunction (thin wrappers) -----------------

def apply_plaplacian(inst: PLaplaceInstance, u: GridFunction) -> GridFunction:
    """Delta_p^h u as a GridFunction (note: subgrad_J is the negative)."""
    return GridFunction(-inst.neg_plaplacian(u), inst.domain)


def jacobian(inst: PLaplaceInstance, u, epsilon: float | None = None):
    return inst.jacobian_matrix(u, epsilon=epsilon)


def dirichlet_energy(inst: PLaplaceInstance, u) -> float:
    return inst.dirichlet_energy(u)


def lp_norm(inst: PLaplaceInstance, u) -> float:
    return inst.norm_H(u)


def lq_dual_norm(inst: PLaplaceInstance, zeta) -> float:
    return inst.dual_norm_H(zeta)


def duality_map(inst: PLaplaceInstance, u: GridFunction) -> GridFunction:
    return GridFunction(inst.duality_map_H(u), inst.domain)
