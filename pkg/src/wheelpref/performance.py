"""Finite-element performance features for wheel rasters.

Each pixel becomes one plane-stress bilinear quad element with Young's
modulus rho**3 (SIMP-style interpolation, void floor 1e-3). The hub core is
fully fixed, the outer rim ring is loaded with unit forces per node, either
radially inward (normal case) or tangentially (shear case), and compliance
f.T @ u is read off a Jacobi-preconditioned conjugate-gradient solve.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

RHO_MIN = 1e-3
PENALTY = 3
POISSON = 0.3
E0 = 1.0
CG_TOL = 1e-8

PERF_FEATURE_NAMES = ["compliance_normal", "compliance_shear", "volume_fraction", "weight"]


class StructuralError(ValueError):
    """The model cannot carry load: no material, no hub support, or no rim."""


class SolverError(RuntimeError):
    """The iterative solve ran out of iterations; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DensityField:
    nelx: int
    nely: int
    rho: np.ndarray  # (nely, nelx) float64 in [RHO_MIN, 1]


@dataclass(frozen=True)
class LoadCase:
    kind: str  # "normal" or "shear"
    magnitude: float = 1.0


@dataclass(frozen=True)
class ComplianceResult:
    compliance: float
    solve_iterations: int
    residual: float


def image_to_density(pixels):
    px = np.asarray(pixels)
    rho = np.where(px > 0, 1.0, RHO_MIN)
    return DensityField(nelx=px.shape[1], nely=px.shape[0], rho=rho)


def element_stiffness(nu=POISSON):
    """Unit-square plane-stress Q4 stiffness for E = 1.

    Degree-of-freedom order is (x, y) per node for nodes top-left, top-right,
    bottom-right, bottom-left in image coordinates (x right, y down).
    """
    k = np.array([1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
                  -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8])
    idx = np.array([[0, 1, 2, 3, 4, 5, 6, 7],
                    [1, 0, 7, 6, 5, 4, 3, 2],
                    [2, 7, 0, 5, 6, 3, 4, 1],
                    [3, 6, 5, 0, 7, 2, 1, 4],
                    [4, 5, 6, 7, 0, 1, 2, 3],
                    [5, 4, 3, 2, 1, 0, 7, 6],
                    [6, 3, 4, 1, 2, 7, 0, 5],
                    [7, 2, 1, 4, 3, 6, 5, 0]])
    return k[idx] / (1 - nu * nu)


def _element_dofs(nelx, nely):
    ex, ey = np.meshgrid(np.arange(nelx), np.arange(nely))
    ex, ey = ex.ravel(), ey.ravel()
    n1 = (nely + 1) * ex + ey
    n2 = (nely + 1) * (ex + 1) + ey
    return np.stack([2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1,
                     2 * n2 + 2, 2 * n2 + 3, 2 * n1 + 2, 2 * n1 + 3], axis=1)


def assemble_stiffness(field):
    ke = element_stiffness()
    dofs = _element_dofs(field.nelx, field.nely)
    e = E0 * field.rho.ravel() ** PENALTY
    data = (ke[None, :, :] * e[:, None, None]).ravel()
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    ndof = 2 * (field.nelx + 1) * (field.nely + 1)
    return sparse.csr_array((data, (rows, cols)), shape=(ndof, ndof))


def _pcg(A, b, tol, maxiter):
    """Conjugate gradients with a Jacobi preconditioner on a SPD system."""
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    dinv = 1.0 / A.diagonal()
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    res = 1.0
    for it in range(1, maxiter + 1):
        ap = A @ p
        pap = p @ ap
        if pap <= 0.0:
            raise StructuralError("stiffness matrix is not positive definite (missing support?)")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"conjugate gradients did not reach {tol:g} in {maxiter} iterations "
                      f"(residual {res:g})", residual=res)


def solve_system(field, f, fixed_dofs):
    """Solve K u = f with the given dofs pinned to zero.

    Returns (u, iterations, relative residual) with u defined on all dofs.
    """
    K = assemble_stiffness(field) if isinstance(field, DensityField) else field
    fixed = np.unique(np.asarray(fixed_dofs, dtype=int))
    if fixed.size == 0:
        raise StructuralError("no fixed support: the system is singular")
    free = np.setdiff1d(np.arange(K.shape[0]), fixed)
    Kff = K[free, :][:, free]
    uf, iters, res = _pcg(Kff, np.asarray(f, dtype=float)[free], CG_TOL, 10 * free.size)
    u = np.zeros(K.shape[0])
    u[free] = uf
    return u, iters, res


def _node_positions(nelx, nely):
    n = np.arange((nelx + 1) * (nely + 1))
    return np.stack([n // (nely + 1), n % (nely + 1)], axis=1).astype(float)  # (x, y)


def support_and_rim_nodes(field):
    """Hub-core node ids (to fix) and outer-rim node ids (to load).

    Both are found from the density field alone: the hub core is the solid
    disk around the grid center up to the nearest void element, the rim ring
    is the outermost band of nodes touching solid elements. Distances are
    measured from the grid center, so the sets rotate exactly with the image.
    """
    solid = field.rho >= 0.5
    if not solid.any():
        raise StructuralError("empty density field: no material to load")
    cy, cx = field.nely / 2.0, field.nelx / 2.0
    ry, rx = np.nonzero(solid)
    d_solid = np.hypot(ry + 0.5 - cy, rx + 0.5 - cx)
    r_out = d_solid.max()
    vy, vx = np.nonzero(~solid)
    r_hub = np.hypot(vy + 0.5 - cy, vx + 0.5 - cx).min() if vy.size else r_out / 3.0

    pos = _node_positions(field.nelx, field.nely)
    nd = np.hypot(pos[:, 1] - cy, pos[:, 0] - cx)
    touches = np.zeros((field.nely + 1, field.nelx + 1), dtype=bool)
    for dr in (0, 1):
        for dc in (0, 1):
            touches[dr:dr + field.nely, dc:dc + field.nelx] |= solid
    touch_flat = touches.T.ravel()  # node id order is column-major
    hub_nodes = np.nonzero((nd <= r_hub - 0.5) & touch_flat)[0]
    if hub_nodes.size == 0:
        raise StructuralError("no hub support: no solid core around the center")

    rim_nodes = np.nonzero((nd >= r_out - 0.5) & touch_flat)[0]
    if rim_nodes.size == 0:
        raise StructuralError("no rim nodes to load")
    return hub_nodes, rim_nodes


def rim_load_vector(field, rim_nodes, load):
    if load.kind not in ("normal", "shear"):
        raise ValueError(f"unknown load kind {load.kind!r}: expected 'normal' or 'shear'")
    pos = _node_positions(field.nelx, field.nely)
    cy, cx = field.nely / 2.0, field.nelx / 2.0
    f = np.zeros(2 * (field.nelx + 1) * (field.nely + 1))
    for n in rim_nodes:
        ox, oy = pos[n, 0] - cx, pos[n, 1] - cy
        norm = np.hypot(ox, oy)
        ox, oy = ox / norm, oy / norm
        if load.kind == "normal":
            dx, dy = -ox, -oy  # radially inward
        else:
            dx, dy = oy, -ox  # counterclockwise on screen (row 0 at top)
        f[2 * n] += load.magnitude * dx
        f[2 * n + 1] += load.magnitude * dy
    return f


def compute_compliance(field, load):
    hub_nodes, rim_nodes = support_and_rim_nodes(field)
    f = rim_load_vector(field, rim_nodes, load)
    fixed = np.concatenate([2 * hub_nodes, 2 * hub_nodes + 1])
    u, iters, res = solve_system(field, f, fixed)
    return ComplianceResult(compliance=float(f @ u), solve_iterations=iters, residual=float(res))


def volume_fraction(pixels):
    """Foreground fraction of the full disk bounded by the outermost material.

    An image with no foreground has no rim circle and yields 0.0.
    """
    px = np.asarray(pixels)
    ys, xs = np.nonzero(px > 0)
    if ys.size == 0:
        return 0.0
    cy, cx = (px.shape[0] - 1) / 2.0, (px.shape[1] - 1) / 2.0
    r_rim = np.hypot(ys - cy, xs - cx).max()
    gy, gx = np.mgrid[0:px.shape[0], 0:px.shape[1]]
    inside = np.hypot(gy - cy, gx - cx) <= r_rim
    return float(((px > 0) & inside).sum() / inside.sum())


def weight_proxy(pixels):
    """Foreground pixel count times a unit areal density."""
    return float((np.asarray(pixels) > 0).sum())


def extract_performance_features(pixels):
    """The four performance features as an ordered dict (PERF_FEATURE_NAMES order)."""
    field = image_to_density(pixels)
    return {
        "compliance_normal": compute_compliance(field, LoadCase("normal")).compliance,
        "compliance_shear": compute_compliance(field, LoadCase("shear")).compliance,
        "volume_fraction": volume_fraction(pixels),
        "weight": weight_proxy(pixels),
    }
