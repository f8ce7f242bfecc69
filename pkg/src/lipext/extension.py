"""Linear extension of Lipschitz data and of C^1 jets through random projections."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import DataError, PointSet, dist_to_set


@dataclass(frozen=True)
class ScalarField:
    """Values in R^k at each point of X; stored with shape (N, k)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Jet:
    """Values (N, k) and differentials (N, k, d) on X."""

    values: np.ndarray
    differentials: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        L = np.asarray(self.differentials, dtype=float)
        if L.ndim == 2:
            L = L[:, None, :]
        if L.shape[:2] != v.shape:
            raise DataError(f"differentials {L.shape} do not match values {v.shape}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "differentials", L)

    def __len__(self):
        return self.values.shape[0]

    @classmethod
    def from_function(cls, X: PointSet, f, df) -> "Jet":
        """Jet of a smooth map: ``f`` gives (N, k) values, ``df`` (N, k, d)."""
        return cls(f(X.points), df(X.points))

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.values + other.values, self.differentials + other.differentials)

    def scale(self, a: float) -> "Jet":
        return Jet(a * self.values, a * self.differentials)


def _as_queries(ys):
    ys = np.asarray(ys, dtype=float)
    single = ys.ndim == 1
    return np.atleast_2d(ys), single


def extend_lip(f: ScalarField, proj, ys) -> np.ndarray:
    """(Tf)(y) = int f dmu_y; shape (k,) for one query or (q, k) for several."""
    from .projection import project_batch

    if len(f) != len(proj.X):
        raise DataError(f"{len(f)} values for {len(proj.X)} points")
    Q, single = _as_queries(ys)
    B = project_batch(proj, Q)
    out = B.integrate(f.values)
    on = np.flatnonzero(B.on_set)
    out[on] = f.values[B.support[np.searchsorted(B.query, on)]]
    return out[0] if single else out


def _affine_at(j: Jet, X: PointSet, support, Y) -> np.ndarray:
    """f(z) + L_z (y - z) for each (z, y) entry, shape (s, k)."""
    dz = Y - X.points[support]
    return j.values[support] + np.einsum("skd,sd->sk", j.differentials[support], dz)


def _c1_parts(j: Jet, rrp, Q, want_value=True, want_diff=True):
    from .projection import project_batch

    X = rrp.X
    if len(j) != len(X):
        raise DataError(f"jet has {len(j)} entries for {len(X)} points")
    B = project_batch(rrp, Q)
    nq, (k_dim, d) = Q.shape[0], j.differentials.shape[1:]
    aff = _affine_at(j, X, B.support, Q[B.query])
    on = np.flatnonzero(B.on_set)
    on_idx = B.support[np.searchsorted(B.query, on)]
    val = dif = None
    if want_value:
        wa = aff * B.weights[:, None]
        val = np.stack([np.bincount(B.query, weights=wa[:, c], minlength=nq)
                        for c in range(k_dim)], axis=1)
        val[on] = j.values[on_idx]
    if want_diff:
        terms = (j.differentials[B.support] * B.weights[:, None, None]
                 + aff[:, :, None] * B.covectors[:, None, :]).reshape(-1, k_dim * d)
        dif = np.stack([np.bincount(B.query, weights=terms[:, c], minlength=nq)
                        for c in range(k_dim * d)], axis=1).reshape(nq, k_dim, d)
        dif[on] = j.differentials[on_idx]
    return val, dif


def extend_c1(j: Jet, rrp, ys) -> np.ndarray:
    """f~(y) = int [f(z) + L_z (y - z)] dmu_y(z); f on X."""
    Q, single = _as_queries(ys)
    val, _ = _c1_parts(j, rrp, Q, want_diff=False)
    return val[0] if single else val


def differential_c1(j: Jet, rrp, ys) -> np.ndarray:
    """df~_y = int L_z dmu_y + int [f(z) + L_z (y - z)] dnu_y, shape (k, d).

    On X the differential is L_x itself.
    """
    Q, single = _as_queries(ys)
    _, dif = _c1_parts(j, rrp, Q, want_value=False)
    return dif[0] if single else dif


def value_and_differential(j: Jet, rrp, ys):
    """f~ and df~ from a single projection pass."""
    Q, single = _as_queries(ys)
    val, dif = _c1_parts(j, rrp, Q)
    return (val[0], dif[0]) if single else (val, dif)


def remainder(j: Jet, X: PointSet, x_idx: int, y_idx: int) -> np.ndarray:
    """R(x, y) = f(y) - f(x) - L_x (y - x)."""
    if x_idx == y_idx:
        raise ValueError("remainder needs two distinct points")
    dx = X.points[y_idx] - X.points[x_idx]
    return j.values[y_idx] - j.values[x_idx] - j.differentials[x_idx] @ dx


def remainder_matrix(j: Jet, X: PointSet) -> np.ndarray:
    """|R(x, y)| in the max norm over components, for all ordered pairs."""
    P = X.points
    diff = P[None, :, :] - P[:, None, :]  # y - x, indexed [x, y]
    R = (j.values[None, :, :] - j.values[:, None, :]
         - np.einsum("xkd,xyd->xyk", j.differentials, diff))
    return np.max(np.abs(R), axis=-1)


@dataclass
class ModulusCurve:
    radii: np.ndarray
    omega: np.ndarray
    hypothesis_ok: bool
    note: str = ""

    def to_dict(self):
        return {"radii": self.radii.tolist(), "omega": self.omega.tolist(),
                "hypothesis_ok": self.hypothesis_ok, "note": self.note}


def remainder_modulus(j: Jet, X: PointSet, radii=None, decay=0.5) -> ModulusCurve:
    """omega(t) = max over pairs with 0 < |x - y| <= t of |R(x, y)| / |x - y|.

    ``hypothesis_ok`` flags whether omega visibly tends to 0: the value at the
    smallest radius must be at most ``decay`` times the value at the largest
    (or identically zero). On finite data this is a diagnostic, not a proof.
    """
    if len(X) < 2:
        raise DataError("remainder modulus needs at least two points")
    D = X.pairwise()
    R = remainder_matrix(j, X)
    off = ~np.eye(len(X), dtype=bool)
    ratio = np.zeros_like(D)
    ratio[off] = R[off] / D[off]
    if radii is None:
        ds = np.unique(D[off])
        radii = ds[::-1]
    radii = np.asarray(radii, float)
    omega = np.array([ratio[off & (D <= t)].max(initial=0.0) for t in radii])
    # remainders at rounding level count as exact zeros
    scale = np.abs(j.values).max() / D[off].max() + np.abs(j.differentials).max()
    omega[omega <= 64 * np.finfo(float).eps * scale] = 0.0
    top, bottom = omega[np.argmax(radii)], omega[np.argmin(radii)]
    ok = bool(top == 0.0 or bottom <= decay * top)
    note = "" if ok else "remainder ratio does not decay at small separations"
    return ModulusCurve(radii, omega, ok, note)


def approach_sequence(x, direction, first_step: float, steps: int, ratio: float = 0.5):
    """Points x + first_step * ratio^k * direction, k = 0..steps-1."""
    x = np.asarray(x, dtype=float)
    direction = np.asarray(direction, dtype=float)
    return np.array([x + first_step * ratio ** k * direction for k in range(steps)])


@dataclass
class DecayCurve:
    distances: np.ndarray
    bar_ratio: np.ndarray  # with mu_bar = dist * |nu| / C
    mu_ratio: np.ndarray   # with mu_y itself
    C: float

    def to_dict(self):
        return {"distances": self.distances.tolist(), "bar_ratio": self.bar_ratio.tolist(),
                "mu_ratio": self.mu_ratio.tolist(), "C": self.C}


def remainder_integral_audit(j: Jet, rrp, x_idx: int, sequence) -> DecayCurve:
    """Ratios (int |R(z, x)| d mu(z)) / |x - y| along a sequence y_k -> x.

    mu_bar_y = dist(y, X) |nu_y| / C, with C the largest dist * ||nu||_TV
    seen on the sequence so that every mu_bar has mass at most 1.
    """
    X = rrp.X
    space = X.space
    x = X.points[x_idx]
    seq = np.atleast_2d(np.asarray(sequence, float))
    pairs, dists, offsets, scales = [], [], [], []
    for y in seq:
        D, _ = dist_to_set(y, X)
        if D == 0.0:
            raise DataError("sequence points must lie off X")
        mu, nu = rrp.pair(y)
        pairs.append((mu, nu))
        dists.append(float(space.norm(y - x)))
        offsets.append(D)
        scales.append(D * nu.total_variation(space))
    C = max(max(scales), 1e-300)
    bar, plain = [], []
    for (mu, nu), dxy, D in zip(pairs, dists, offsets):
        Rz = _abs_remainder_to(j, X, mu.support, x_idx)
        plain.append(float(mu.weights @ Rz) / dxy)
        if nu.support.size:
            bar_w = D * space.dual_norm(nu.covectors) / C
            Rn = _abs_remainder_to(j, X, nu.support, x_idx)
            bar.append(float(bar_w @ Rn) / dxy)
        else:
            bar.append(0.0)
    return DecayCurve(np.asarray(dists), np.asarray(bar), np.asarray(plain), float(C))


def _abs_remainder_to(j: Jet, X: PointSet, support, x_idx: int) -> np.ndarray:
    """|R(z, x)| for z in the support (0 where z = x)."""
    dz = X.points[x_idx] - X.points[support]
    R = (j.values[x_idx][None, :] - j.values[support]
         - np.einsum("skd,sd->sk", j.differentials[support], dz))
    return np.max(np.abs(R), axis=-1)


def lipschitz_constant(values: np.ndarray, X: PointSet, max_points: int = 5000,
                       seed: int = 0) -> float:
    """Exact pairwise Lipschitz constant (max norm on values); sampled beyond max_points."""
    v = np.asarray(values, float)
    if v.ndim == 1:
        v = v[:, None]
    idx = np.arange(len(X))
    if len(X) > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(len(X), max_points, replace=False))
    P = X.points[idx]
    best = 0.0
    for s in range(0, idx.size, 512):
        block = P[s:s + 512]
        D = X.space.norm(block[:, None, :] - P[None, :, :])
        dv = np.max(np.abs(v[idx][s:s + 512][:, None, :] - v[idx][None, :, :]), axis=-1)
        off = D > 0
        if off.any():
            best = max(best, float(np.max(dv[off] / D[off])))
    return best


@dataclass
class ExtensionReport:
    lip_ratio: float | None = None
    c1_gradient_error: float | None = None
    remainder_decay: list = field(default_factory=list)
    affine_reproduction_error: float | None = None

    def to_dict(self):
        return {"lip_ratio": self.lip_ratio, "c1_gradient_error": self.c1_gradient_error,
                "remainder_decay": self.remainder_decay,
                "affine_reproduction_error": self.affine_reproduction_error}
