"""Verification suite: runs every acceptance row and assembles a JSON report.

Each suite instance is evaluated independently (optionally in worker
processes); global rows that use their own fixed inputs are evaluated once.
The report is assembled in suite order, so its bytes depend only on the specs,
the configuration and the calibration file, apart from the ``timing`` block.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .covering import CellComplex, locate_cells_batch
from .extension import (ScalarField, differential_c1, extend_c1, extend_lip,
                        lipschitz_constant, remainder_integral_audit, remainder_modulus,
                        value_and_differential, approach_sequence)
from .metric import (DataError, PointSet, default_doubling, dyadic_k, estimate_capacity,
                     estimate_doubling)
from .partitions import (C1Partition, LipPartition, XiError, build_xi, eval_c1_batch,
                         eval_lip_batch, slope_sum_audit)
from .projection import (CellProjection, DiscreteMeasure, KernelProfile, KernelProjection,
                         RegularProjection, audit_pairs, project_batch)
from .spaces import (SpaceSpec, affine_jet, generate_space, mcshane_function, random_jet,
                     sample_queries, square_jet)
from .wasserstein import w1_exact, w1_line

log = logging.getLogger(__name__)

PASS, FAIL, NA, VACUOUS = "pass", "fail", "not-applicable", "vacuous-pass"

CRITERIA = {
    1: ("partition of unity", "partition_sums", False),
    2: ("covering lower bound", "covering_bound", True),
    3: ("restriction and linearity", "restriction", False),
    4: ("affine reproduction", "affine_reproduction", False),
    5: ("gradient consistency", "c1_gradient_errors", False),
    6: ("differential continuity at X", "differential_continuity", False),
    7: ("remainder integral decay", "remainder_decay", False),
    8: ("W1 correctness", "w1_correctness", False),
    9: ("projection Lipschitz audit", "w1_lip_audit", False),
    10: ("extension Lipschitz ratio", "lip_ratio", False),
    11: ("doubling versus capacity", "capacity_bounds", True),
    12: ("xi validity", "xi_validity", True),
}
"""criterion id -> (name, report field, hard assert)"""


def standard_suite() -> list[SpaceSpec]:
    grids = [SpaceSpec("grid", d, n) for d in (1, 2, 3) for n in (4, 8, 16)]
    return grids + [SpaceSpec("cantor", 1, level) for level in (3, 4, 5)]


def exhaustive_suite() -> list[SpaceSpec]:
    """Sets of at most 8 points on which doubling and capacity are computed exactly."""
    fixed = [SpaceSpec("grid", 1, 4), SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 2),
             SpaceSpec("cantor", 1, 1), SpaceSpec("cantor", 1, 2)]
    clouds = [SpaceSpec("random-cloud", d, n, seed=s)
              for d in (1, 2, 3) for n in (5, 8) for s in range(3)]
    return fixed + clouds


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 0
    jet: str = "square"  # "square" or "random" (a corrupted jet)
    queries: int = 10_000
    sum_tol: float = 1e-12
    gauge_ratio: float = 0.25
    linear_tol: float = 1e-12
    affine_tol: float = 1e-10
    fd_queries: int = 1000
    fd_step: float = 1e-5
    fd_min_dist: float = 1e-3
    fd_rel_tol: float = 1e-4
    fd_fraction: float = 0.99
    fd_max: float = 1e-3
    continuity_points: int = 17
    continuity_steps: int = 12
    continuity_ratio: float = 0.5
    continuity_first: float = 0.45  # first step as a fraction of the grid spacing
    continuity_final: float = 1e-3
    decay_factor: float = 1.5
    w1_instances: int = 100
    w1_support: int = 6
    w1_tol: float = 1e-8
    line_tol: float = 1e-10
    w1_pairs: int = 1000
    lip_pairs: int = 10_000
    mcshane_anchors: int = 4
    calibration_factor: float = 1.25
    growth_factor: float = 1.5
    refinement_tol: float = 0.10
    capacity_eps: tuple = (0.1, 0.2, 0.25, 1 / 3, 0.5)
    slope_queries: int = 40
    jobs: int = 1

    def __post_init__(self):
        if self.jet not in ("square", "random"):
            raise DataError(f"jet must be 'square' or 'random', not {self.jet!r}")

    def with_overrides(self, overrides: dict) -> "SuiteConfig":
        fields = {f for f in self.__dataclass_fields__}
        bad = set(overrides) - fields
        if bad:
            raise DataError(f"unknown threshold keys: {sorted(bad)}")
        cast = {k: type(getattr(self, k))(v) if not isinstance(getattr(self, k), tuple) else v
                for k, v in overrides.items()}
        return replace(self, **cast)

    def to_dict(self):
        """Settings that affect results; the worker count is left out."""
        d = asdict(self)
        d.pop("jobs")
        return d


# ---------------------------------------------------------------- calibration

def calibration_path() -> Path:
    return Path(str(resources.files("lipext") / "data" / "calibration.json"))


def load_calibration(path=None) -> dict:
    p = Path(path) if path is not None else calibration_path()
    if not p.exists():
        return {}
    with open(p) as fh:
        data = json.load(fh)
    return {k: v for k, v in data.items() if k.isdigit()}


def calibration_from_report(report: "VerifyReport") -> dict:
    """Frozen values of the calibrated rows: criterion id -> {instance -> value}."""
    return {
        "9": {k: v["max_ratio"] for k, v in report.w1_lip_audit["instances"].items()
              if v.get("max_ratio") is not None},
        "10": {k: v["cells"] for k, v in report.lip_ratio["instances"].items()
               if v.get("cells") is not None},
    }


def write_calibration(data: dict, path=None) -> Path:
    p = Path(path) if path is not None else calibration_path()
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return p


# ---------------------------------------------------------------- helpers

def _queries_at_least(X: PointSet, count: int, min_dist: float, seed: int) -> np.ndarray:
    rng_seed, out = seed, np.empty((0, X.d))
    while out.shape[0] < count:
        Q = sample_queries(X, 4 * count, seed=rng_seed)
        dd, _ = X.tree.query(Q, k=1, p=X.space.p)
        out = np.vstack([out, Q[dd >= min_dist]])
        rng_seed += 1
    return out[:count]


def _fd_jet(X: PointSet, kind: str, seed: int):
    if kind == "random":
        return random_jet(X, seed=seed)
    # shifted so that the gradient stays away from zero on the unit box
    return square_jet(X, center=-np.ones(X.d))


def _relative_max(err: np.ndarray, ref: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(ref)))) if ref.size else 1.0
    return float(np.max(np.abs(err))) / scale if err.size else 0.0


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


# ---------------------------------------------------------------- per instance

def evaluate_instance(spec: SpaceSpec, cfg: SuiteConfig) -> dict:
    """Every per-instance measurement; values only, judgement happens later."""
    t0 = time.perf_counter()
    X = generate_space(spec)
    out = {"label": spec.label, "points": len(X), "spec": spec.to_dict()}
    lam = default_doubling(X).lambda_hat
    out["lambda_hat"] = lam
    out["kappa"] = {repr(e): estimate_capacity(X, e, seed=cfg.seed).kappa_hat
                    for e in (0.2, 0.5)}
    rng = np.random.default_rng(cfg.seed + 11)
    out["restriction"] = _restriction(X, rng, cfg, lam)
    if len(X) < 2:
        out["vacuous"] = True
        out["seconds"] = time.perf_counter() - t0
        return out

    Q = sample_queries(X, cfg.queries, seed=cfg.seed + 1)
    FDQ = _queries_at_least(X, cfg.fd_queries, cfg.fd_min_dist, cfg.seed + 5)
    w1_pairs = audit_pairs(X, cfg.w1_pairs, seed=cfg.seed + 2)
    lip_pairs = audit_pairs(X, cfg.lip_pairs, seed=cfg.seed + 4)
    eye = np.eye(X.d)
    fd_stack = np.vstack([FDQ + s * cfg.fd_step * e for e in eye for s in (1.0, -1.0)])
    everything = np.vstack([Q, FDQ, fd_stack, *w1_pairs, *lip_pairs])
    C = CellComplex.for_queries(X, everything)
    lip_part = LipPartition(C, lambda_hat=lam)
    c1_part = C1Partition(C, lambda_hat=lam)
    cells = CellProjection(lip_part)
    regular = RegularProjection(c1_part)
    kernel = KernelProjection(X, KernelProfile.for_points(X, lam))
    out["m"] = {"lip": lip_part.m, "c1": c1_part.m, "delta": c1_part.delta,
                "kernel": kernel.profile.m}

    # 1 and multiplicities
    BL, BC = eval_lip_batch(lip_part, Q), eval_c1_batch(c1_part, Q)
    out["partition_sums"] = {"lip": float(np.max(np.abs(BL.sums() - 1.0))),
                             "c1": float(np.max(np.abs(BC.sums() - 1.0)))}
    out["multiplicity"] = {
        name: {"max": int(c.max()), "mean": float(c.mean())}
        for name, c in (("lip", np.bincount(BL.query, minlength=len(Q))),
                        ("c1", np.bincount(BC.query, minlength=len(Q))))}

    # 2
    H = locate_cells_batch(Q, C)
    gmax = np.zeros(len(Q))
    np.maximum.at(gmax, H.query, H.gauges)
    out["covering_bound"] = {"min_ratio": float(np.min(gmax / H.dist))}

    # slope audits (informational)
    sq = Q[:cfg.slope_queries]
    out["slope_audits"] = {"lip": slope_sum_audit(lip_part, sq, seed=cfg.seed),
                           "c1": slope_sum_audit(c1_part, sq, seed=cfg.seed)}

    # 4
    A = rng.standard_normal((2, X.d))
    b = rng.standard_normal(2)
    val, dif = value_and_differential(affine_jet(X, A, b), regular, Q)
    out["affine_reproduction"] = {
        "value": float(np.max(np.abs(val - (Q @ A.T + b)))),
        "differential": float(np.max(np.abs(dif - A[None])))}

    # 5
    jet = _fd_jet(X, cfg.jet, cfg.seed)
    g = differential_c1(jet, regular, FDQ)
    vals = extend_c1(jet, regular, fd_stack).reshape(X.d, 2, len(FDQ), -1)
    fd = np.transpose((vals[:, 0] - vals[:, 1]) / (2 * cfg.fd_step), (1, 2, 0))
    rel = np.linalg.norm((g - fd).reshape(len(FDQ), -1), axis=1) / np.maximum(
        np.linalg.norm(fd.reshape(len(FDQ), -1), axis=1), 1e-300)
    out["c1_gradient_errors"] = {
        "queries": len(FDQ), "max": float(rel.max()),
        "fraction_within": float(np.mean(rel <= cfg.fd_rel_tol)),
        "median": float(np.median(rel)),
        "fine_step_max": _fine_step_recheck(jet, regular, FDQ[rel > cfg.fd_rel_tol],
                                            g[rel > cfg.fd_rel_tol], cfg.fd_step / 10)}

    # 9
    ys, ys2 = w1_pairs
    B1, B2 = project_batch(cells, ys), project_batch(cells, ys2)
    steps = X.space.norm(ys - ys2)
    ratios = [w1_exact(B1.measure(r), B2.measure(r), X)[0] / steps[r] for r in range(len(ys))]
    out["w1_lip"] = {"pairs": len(ys), "max_ratio": float(max(ratios)),
                     "mean_ratio": float(np.mean(ratios))}

    # 10
    f, _ = mcshane_function(X, anchors=cfg.mcshane_anchors, seed=cfg.seed)
    lip_f = lipschitz_constant(f.values, X)
    ys, ys2 = lip_pairs
    steps = X.space.norm(ys - ys2)
    lr = {"lip_f": lip_f, "pairs": len(ys)}
    for proj in (cells, kernel):
        diff = np.max(np.abs(extend_lip(f, proj, ys) - extend_lip(f, proj, ys2)), axis=1)
        lr[proj.name] = float(np.max(diff / steps)) / lip_f
    out["lip_ratio"] = lr
    out["seconds"] = time.perf_counter() - t0
    return out


def _fine_step_recheck(jet, regular, Y: np.ndarray, g: np.ndarray, step: float):
    """Worst relative error at ``Y`` with a smaller central-difference step.

    A drop by roughly the square of the step ratio points to truncation error
    of the difference quotient rather than a wrong analytic differential.
    """
    if len(Y) == 0:
        return None
    d = Y.shape[1]
    stack = np.vstack([Y + s * step * e for e in np.eye(d) for s in (1.0, -1.0)])
    vals = extend_c1(jet, regular, stack).reshape(d, 2, len(Y), -1)
    fd = np.transpose((vals[:, 0] - vals[:, 1]) / (2 * step), (1, 2, 0))
    err = np.linalg.norm((g - fd).reshape(len(Y), -1), axis=1)
    return float(np.max(err / np.linalg.norm(fd.reshape(len(Y), -1), axis=1)))


def _restriction(X: PointSet, rng, cfg: SuiteConfig, lam: int) -> dict:
    """Exact restriction on X and linearity at off-set queries."""
    f1, f2 = rng.standard_normal((len(X), 2)), rng.standard_normal((len(X), 2))
    a, b = 0.7, -1.3
    kernel = KernelProjection(X, KernelProfile.for_points(X, lam))
    res = {"exact_lip": bool(np.array_equal(extend_lip(ScalarField(f1), kernel, X.points), f1))}
    if len(X) < 2:
        res.update(exact_c1=True, linear_lip=0.0, linear_c1=0.0, vacuous_c1=True)
        return res
    Q = sample_queries(X, 500, seed=cfg.seed + 3)
    C = CellComplex.for_queries(X, Q)
    cells = CellProjection(LipPartition(C, lambda_hat=lam))
    regular = RegularProjection(C1Partition(C, lambda_hat=lam))
    res["exact_lip"] &= bool(np.array_equal(extend_lip(ScalarField(f1), cells, X.points), f1))
    j1, j2 = random_jet(X, seed=cfg.seed + 21, k=2), random_jet(X, seed=cfg.seed + 22, k=2)
    v, dv = value_and_differential(j1, regular, X.points)
    res["exact_c1"] = bool(np.array_equal(v, j1.values) and np.array_equal(dv, j1.differentials))
    lin = 0.0
    for proj in (kernel, cells):
        lhs = extend_lip(ScalarField(a * f1 + b * f2), proj, Q)
        rhs = a * extend_lip(ScalarField(f1), proj, Q) + b * extend_lip(ScalarField(f2), proj, Q)
        lin = max(lin, _relative_max(lhs - rhs, rhs))
    res["linear_lip"] = lin
    jc = j1.scale(a) + j2.scale(b)
    v, dv = value_and_differential(jc, regular, Q)
    v1, d1 = value_and_differential(j1, regular, Q)
    v2, d2 = value_and_differential(j2, regular, Q)
    res["linear_c1"] = max(_relative_max(v - (a * v1 + b * v2), a * v1 + b * v2),
                           _relative_max(dv - (a * d1 + b * d2), a * d1 + b * d2))
    return res


# ---------------------------------------------------------------- global rows

def continuity_rows(cfg: SuiteConfig) -> tuple[dict, dict, list]:
    """Criteria 6 and 7 on a fixed 1-d grid; returns (row6, row7, warnings)."""
    X = generate_space(SpaceSpec("grid", 1, cfg.continuity_points, seed=cfg.seed))
    jet = square_jet(X) if cfg.jet == "square" else random_jet(X, seed=cfg.seed)
    modulus = remainder_modulus(jet, X)
    warnings = [] if modulus.hypothesis_ok else [f"remainder hypothesis flagged: {modulus.note}"]
    spacing = 1.0 / (cfg.continuity_points - 1)
    first = cfg.continuity_first * spacing
    seqs = [(i, s) for i in range(len(X)) for s in (-1.0, 1.0)]
    allq = np.vstack([approach_sequence(X.points[i], [s], first, cfg.continuity_steps,
                                        cfg.continuity_ratio) for i, s in seqs])
    regular = RegularProjection(C1Partition(CellComplex.for_queries(X, allq)))
    dif = differential_c1(jet, regular, allq).reshape(len(seqs), cfg.continuity_steps, -1)
    curves6, curves7 = [], []
    for k, (i, s) in enumerate(seqs):
        e = np.max(np.abs(dif[k] - jet.differentials[i].ravel()), axis=1)
        seq = allq[k * cfg.continuity_steps:(k + 1) * cfg.continuity_steps]
        audit = remainder_integral_audit(jet, regular, i, seq)
        curves6.append({"x": i, "side": s, "errors": e.tolist()})
        curves7.append({"x": i, "side": s, "bar_ratio": audit.bar_ratio.tolist(),
                        "mu_ratio": audit.mu_ratio.tolist()})
    row6 = {"hypothesis_ok": modulus.hypothesis_ok, "sequences": curves6,
            "modulus": modulus.to_dict()}
    row7 = {"hypothesis_ok": modulus.hypothesis_ok, "sequences": curves7}
    return row6, row7, warnings


def _dual_vertices_optimum(c: np.ndarray, D: np.ndarray, tol=1e-12) -> float:
    """max sum_i c_i f_i over 1-Lipschitz f, by enumerating polytope vertices.

    With f_0 = 0 every vertex is pinned by a spanning tree of tight edges
    f_v = f_u +- D[u, v]; trees are grown one vertex at a time, discarding
    infeasible partial assignments and duplicate states.
    """
    n = len(c)
    best = -math.inf
    seen = set()
    stack = [({0: 0.0})]
    while stack:
        f = stack.pop()
        if len(f) == n:
            best = max(best, sum(c[i] * v for i, v in f.items()))
            continue
        for v in range(n):
            if v in f:
                continue
            for u, fu in f.items():
                for s in (1.0, -1.0):
                    val = fu + s * D[u, v]
                    if all(abs(val - fw) <= D[v, w] + tol for w, fw in f.items()):
                        g = dict(f)
                        g[v] = val
                        key = tuple(sorted((k, round(x, 12)) for k, x in g.items()))
                        if key not in seen:
                            seen.add(key)
                            stack.append(g)
    return best


def w1_rows(cfg: SuiteConfig) -> dict:
    rng = np.random.default_rng(cfg.seed + 8)
    primal_dual = []
    for _ in range(cfg.w1_instances):
        d = int(rng.integers(1, 4))
        X = PointSet(rng.random((cfg.w1_support, d)))
        mu, nu = (_random_measure(rng, len(X), cfg.w1_support) for _ in range(2))
        w, _ = w1_exact(mu, nu, X)
        c = np.zeros(len(X))
        np.add.at(c, mu.support, mu.weights)
        np.add.at(c, nu.support, -nu.weights)
        dual = _dual_vertices_optimum(c, X.pairwise())
        primal_dual.append(abs(w - dual))
    line = []
    for _ in range(cfg.w1_instances):
        n = int(rng.integers(2, 12))
        X = PointSet(np.sort(rng.random(n))[:, None])
        wa, wb = rng.random(n), rng.random(n)
        wa, wb = wa / wa.sum(), wb / wb.sum()
        w, _ = w1_exact(DiscreteMeasure(np.arange(n), wa), DiscreteMeasure(np.arange(n), wb), X)
        line.append(abs(w - w1_line(X.points, wa, wb)))
    return {"instances": cfg.w1_instances, "primal_dual_max": float(max(primal_dual)),
            "line_max": float(max(line))}


def _random_measure(rng, n: int, max_support: int) -> DiscreteMeasure:
    size = int(rng.integers(1, min(n, max_support) + 1))
    support = np.sort(rng.choice(n, size, replace=False))
    w = rng.random(size) + 0.05
    return DiscreteMeasure(support, w / w.sum())


def capacity_rows(cfg: SuiteConfig) -> dict:
    rows = {}
    for spec in exhaustive_suite():
        X = generate_space(spec)
        lam = estimate_doubling(X, exact=True).lambda_hat
        kap = {repr(e): estimate_capacity(X, e, exhaustive=True).kappa_hat
               for e in cfg.capacity_eps}
        bound = {repr(e): lam ** dyadic_k(e) for e in cfg.capacity_eps}
        key = f"{spec.label}-s{spec.seed}" if spec.family == "random-cloud" else spec.label
        rows[key] = {"lambda": lam, "kappa": kap, "bound": bound,
                     "lambda_le_kappa_fifth": lam <= estimate_capacity(
                         X, 0.2, exhaustive=True).kappa_hat,
                     "kappa_le_bound": all(kap[k] <= bound[k] for k in kap)}
    return rows


def xi_rows(ms: list[tuple[float, float]]) -> dict:
    checked = {}
    for m, delta in sorted(set(ms)):
        try:
            build_xi(m, delta)
            checked[repr(m)] = {"delta": delta, "ok": True}
        except XiError as exc:
            checked[repr(m)] = {"delta": delta, "ok": False, "error": str(exc)}
    return checked


# ---------------------------------------------------------------- report

@dataclass
class CriterionResult:
    id: int
    name: str
    field: str
    hard: bool
    status: str
    summary: str

    def line(self) -> str:
        tag = " [hard]" if self.hard else ""
        return f"criterion {self.id:2d} {self.status.upper():15s} {self.name}{tag}: {self.summary}"


@dataclass
class VerifyReport:
    suite: list
    config: dict
    lambda_hat: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)
    partition_sums: dict = field(default_factory=dict)
    multiplicity: dict = field(default_factory=dict)
    slope_audits: dict = field(default_factory=dict)
    covering_bound: dict = field(default_factory=dict)
    restriction: dict = field(default_factory=dict)
    affine_reproduction: dict = field(default_factory=dict)
    c1_gradient_errors: dict = field(default_factory=dict)
    differential_continuity: dict = field(default_factory=dict)
    remainder_decay: dict = field(default_factory=dict)
    w1_correctness: dict = field(default_factory=dict)
    w1_lip_audit: dict = field(default_factory=dict)
    lip_ratio: dict = field(default_factory=dict)
    capacity_bounds: dict = field(default_factory=dict)
    xi_validity: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 3 if any(c.status == FAIL for c in self.criteria) else 0

    @property
    def hard_failures(self) -> list:
        return [c for c in self.criteria if c.hard and c.status == FAIL]

    def criterion(self, cid: int) -> CriterionResult:
        return next(c for c in self.criteria if c.id == cid)

    def to_dict(self, timing=True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("timing")
        return d

    def to_json(self, timing=True) -> str:
        return json.dumps(self.to_dict(timing), indent=1, sort_keys=True)


def _evaluate_all(specs, cfg: SuiteConfig) -> list[dict]:
    if cfg.jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(evaluate_instance, specs, [cfg] * len(specs)))
    return [evaluate_instance(s, cfg) for s in specs]


def run_suite(specs=None, config: SuiteConfig | None = None, calibration: dict | None = None,
              global_rows: bool = True) -> VerifyReport:
    """Evaluate all criteria on ``specs`` (the standard suite by default).

    ``calibration`` maps criterion ids ("9", "10") to per-instance frozen
    values; instances without a frozen value are reported uncalibrated.
    ``global_rows=False`` skips the rows with fixed inputs (6, 7, 8, 11),
    which are then marked not-applicable.
    """
    cfg = config or SuiteConfig()
    specs = list(specs) if specs is not None else standard_suite()
    calibration = load_calibration() if calibration is None else calibration
    rep = VerifyReport([s.to_dict() for s in specs], cfg.to_dict())
    t0 = time.perf_counter()
    rows = _evaluate_all(specs, cfg)
    rep.timing["instances"] = {r["label"]: r["seconds"] for r in rows}
    live = [r for r in rows if not r.get("vacuous")]
    for r in rows:
        rep.lambda_hat[r["label"]] = r["lambda_hat"]
        rep.kappa[r["label"]] = r["kappa"]
        rep.restriction[r["label"]] = r["restriction"]
    for r in live:
        lab = r["label"]
        rep.partition_sums[lab] = r["partition_sums"]
        rep.multiplicity[lab] = r["multiplicity"]
        rep.slope_audits[lab] = r["slope_audits"]
        rep.covering_bound[lab] = r["covering_bound"]
        rep.affine_reproduction[lab] = r["affine_reproduction"]
        rep.c1_gradient_errors[lab] = r["c1_gradient_errors"]
    crit = []

    def add(cid, status, summary):
        name, fld, hard = CRITERIA[cid]
        crit.append(CriterionResult(cid, name, fld, hard, status, summary))

    # 1
    if live:
        worst = max(max(r["partition_sums"].values()) for r in live)
        add(1, _status(worst <= cfg.sum_tol), f"max |sum - 1| = {worst:.3g} (tol {cfg.sum_tol:g})")
    else:
        add(1, VACUOUS, "no instance with two or more points")
    # 2
    if live:
        worst = min(r["covering_bound"]["min_ratio"] for r in live)
        add(2, _status(worst >= cfg.gauge_ratio),
            f"min max-gauge / dist = {worst:.4f} (bound {cfg.gauge_ratio:g})")
    else:
        add(2, VACUOUS, "no instance with two or more points")
    # 3
    ok_exact = all(r["restriction"]["exact_lip"] and r["restriction"]["exact_c1"] for r in rows)
    lin = max(max(r["restriction"]["linear_lip"], r["restriction"]["linear_c1"]) for r in rows)
    add(3, _status(ok_exact and lin <= cfg.linear_tol),
        f"restriction exact: {ok_exact}; linearity defect {lin:.3g} (tol {cfg.linear_tol:g})")
    # 4
    if live:
        worst = max(max(r["affine_reproduction"].values()) for r in live)
        add(4, _status(worst <= cfg.affine_tol), f"max error {worst:.3g} (tol {cfg.affine_tol:g})")
    else:
        add(4, VACUOUS, "no instance with two or more points")
    # 5
    if live:
        bad = [r["label"] for r in live
               if r["c1_gradient_errors"]["fraction_within"] < cfg.fd_fraction
               or r["c1_gradient_errors"]["max"] > cfg.fd_max]
        worst = max(r["c1_gradient_errors"]["max"] for r in live)
        frac = min(r["c1_gradient_errors"]["fraction_within"] for r in live)
        fine = [r["c1_gradient_errors"]["fine_step_max"] for r in live]
        fine = max((v for v in fine if v is not None), default=0.0)
        add(5, _status(not bad), f"worst fraction within {cfg.fd_rel_tol:g}: {frac:.3f}, "
            f"worst max {worst:.3g} ({fine:.3g} at step {cfg.fd_step / 10:g}); "
            f"failing: {', '.join(bad) or 'none'}")
    else:
        add(5, VACUOUS, "no instance with two or more points")

    # 6, 7
    if global_rows:
        t = time.perf_counter()
        row6, row7, warn = continuity_rows(cfg)
        rep.timing["continuity"] = time.perf_counter() - t
        rep.differential_continuity, rep.remainder_decay = row6, row7
        rep.warnings.extend(warn)
        if not row6["hypothesis_ok"]:
            add(6, NA, "jet fails the remainder hypothesis")
            add(7, NA, "jet fails the remainder hypothesis")
        else:
            bad6 = [s for s in row6["sequences"]
                    if np.any(np.diff(s["errors"][2:]) > 0) or s["errors"][-1] > cfg.continuity_final]
            final = max(s["errors"][-1] for s in row6["sequences"])
            add(6, _status(not bad6), f"{len(row6['sequences'])} sequences, max final error "
                f"{final:.3g}; violations {len(bad6)}")
            bad7 = [s for s in row7["sequences"]
                    if s["bar_ratio"][0] > 0 and s["bar_ratio"][-1] * cfg.decay_factor
                    > s["bar_ratio"][0]]
            add(7, _status(not bad7), f"{len(row7['sequences'])} sequences; "
                f"{len(bad7)} without a {cfg.decay_factor:g}x decrease")
    else:
        add(6, NA, "global rows skipped")
        add(7, NA, "global rows skipped")

    # 8
    if global_rows:
        t = time.perf_counter()
        rep.w1_correctness = w1_rows(cfg)
        rep.timing["w1"] = time.perf_counter() - t
        pd, ln = rep.w1_correctness["primal_dual_max"], rep.w1_correctness["line_max"]
        add(8, _status(pd <= cfg.w1_tol and ln <= cfg.line_tol),
            f"primal-dual gap {pd:.3g} (tol {cfg.w1_tol:g}); 1-d CDF gap {ln:.3g} "
            f"(tol {cfg.line_tol:g})")
    else:
        add(8, NA, "global rows skipped")

    # 9, 10
    _calibrated_rows(rep, live, cfg, calibration, add)

    # 11
    if global_rows:
        t = time.perf_counter()
        rep.capacity_bounds = capacity_rows(cfg)
        rep.timing["capacity"] = time.perf_counter() - t
        bad = [k for k, v in rep.capacity_bounds.items()
               if not (v["lambda_le_kappa_fifth"] and v["kappa_le_bound"])]
        add(11, _status(not bad), f"{len(rep.capacity_bounds)} exhaustive sets; "
            f"violations: {', '.join(bad) or 'none'}")
    else:
        add(11, NA, "global rows skipped")

    # 12
    ms = [(r["m"]["c1"], r["m"]["delta"]) for r in live]
    if global_rows:
        X17 = generate_space(SpaceSpec("grid", 1, cfg.continuity_points))
        ms.append((C1Partition(CellComplex(X17, -8, 0)).m, 0.5))
    rep.xi_validity = xi_rows(ms)
    if rep.xi_validity:
        bad = [k for k, v in rep.xi_validity.items() if not v["ok"]]
        add(12, _status(not bad), f"{len(rep.xi_validity)} (m, delta) pairs checked; "
            f"failing: {', '.join(bad) or 'none'}")
    else:
        add(12, VACUOUS, "no C^1 partition was built")

    rep.criteria = sorted(crit, key=lambda c: c.id)
    rep.timing["total"] = time.perf_counter() - t0
    for c in rep.hard_failures:
        log.error("hard assert failed: %s", c.line())
    return rep


def _calibrated_rows(rep, live, cfg, calibration, add):
    factor = cfg.calibration_factor
    cal9, cal10 = calibration.get("9", {}), calibration.get("10", {})
    w1, lr = {}, {}
    for r in live:
        lab = r["label"]
        w1[lab] = dict(r["w1_lip"], calibrated=cal9.get(lab))
        lr[lab] = dict(r["lip_ratio"], calibrated=cal10.get(lab))
    growth = _dimension_growth(live, lambda r: r["w1_lip"]["max_ratio"])
    refine = _refinement(live, lambda r: r["lip_ratio"]["cells"])
    refine_kernel = _refinement(live, lambda r: r["lip_ratio"]["kernel"])
    rep.w1_lip_audit = {"method": "cells", "instances": w1, "dimension_growth": growth}
    rep.lip_ratio = {"method": "cells", "instances": lr, "refinement": refine,
                     "refinement_kernel": refine_kernel}
    rep.sweep = _sweep(live)
    for a, b in zip(rep.sweep, rep.sweep[1:]):
        if a["size"] == b["size"] and b["dimension"] == a["dimension"] + 1 \
                and b["lip_ratio_cells"] * cfg.growth_factor < a["lip_ratio_cells"]:
            rep.warnings.append(f"sweep not monotone in d at n={a['size']}: "
                                f"{a['lip_ratio_cells']:.3f} -> {b['lip_ratio_cells']:.3f}")

    def judge(cid, table, key, extra_fail, extra_note):
        if not table:
            add(cid, VACUOUS, "no instance with two or more points")
            return
        missing = [k for k, v in table.items() if v["calibrated"] is None]
        off = [k for k, v in table.items() if v["calibrated"] is not None
               and not (v["calibrated"] / factor <= v[key] <= v["calibrated"] * factor)]
        if missing:
            rep.warnings.append(f"criterion {cid}: no calibration for {', '.join(missing)}")
        if len(missing) == len(table) and not extra_fail:
            add(cid, NA, f"uncalibrated; {extra_note}")
            return
        status = _status(not off and not extra_fail)
        add(cid, status, f"outside {factor:g}x of calibration: {', '.join(off) or 'none'}; "
            f"{extra_note}")

    bad_growth = [g for g in growth if g["factor"] > cfg.growth_factor]
    judge(9, w1, "max_ratio", bad_growth,
          f"{len(growth)} dimension steps, over {cfg.growth_factor:g}x: "
          + (", ".join(f"n={g['size']} d{g['from']}->d{g['to']} ({g['factor']:.2f})"
                       for g in bad_growth) or "none"))
    bad_ref = [g for g in refine if abs(g["change"]) > cfg.refinement_tol]
    judge(10, lr, "cells", bad_ref,
          f"{len(refine)} refinement steps, over {cfg.refinement_tol:.0%}: "
          + (", ".join(f"d{g['dimension']} n{g['from']}->n{g['to']} ({g['change']:+.1%})"
                       for g in bad_ref) or "none"))


def _grid_rows(live):
    return {(r["spec"]["dimension"], r["spec"]["size"]): r for r in live
            if r["spec"]["family"] == "grid"}


def _dimension_growth(live, value) -> list:
    grid = _grid_rows(live)
    out = []
    for (d, n), r in sorted(grid.items()):
        nxt = grid.get((d + 1, n))
        if nxt is not None:
            out.append({"size": n, "from": d, "to": d + 1, "factor": value(nxt) / value(r)})
    return out


def _refinement(live, value) -> list:
    grid = _grid_rows(live)
    out = []
    for (d, n), r in sorted(grid.items()):
        nxt = grid.get((d, 2 * n))
        if nxt is not None:
            out.append({"dimension": d, "from": n, "to": 2 * n,
                        "change": value(nxt) / value(r) - 1.0})
    return out


def _sweep(live) -> list:
    grid = _grid_rows(live)
    return [{"dimension": d, "size": n, "lambda_hat": r["lambda_hat"],
             "lip_ratio_cells": r["lip_ratio"]["cells"],
             "lip_ratio_kernel": r["lip_ratio"]["kernel"]}
            for (d, n), r in sorted(grid.items(), key=lambda kv: (kv[0][1], kv[0][0]))]


def sweep_table(dimensions=(1, 2, 3), sizes=(4, 8), config: SuiteConfig | None = None) -> list:
    """lambda_hat against the measured Lip(Tf) / Lip(f) on grids."""
    cfg = config or SuiteConfig()
    specs = [SpaceSpec("grid", d, n, seed=cfg.seed) for n in sizes for d in dimensions]
    return _sweep([_sweep_instance(s, cfg) for s in specs])


def _sweep_instance(spec: SpaceSpec, cfg: SuiteConfig) -> dict:
    X = generate_space(spec)
    lam = default_doubling(X).lambda_hat
    ys, ys2 = audit_pairs(X, cfg.lip_pairs, seed=cfg.seed + 4)
    C = CellComplex.for_queries(X, np.vstack([ys, ys2]))
    f, _ = mcshane_function(X, anchors=cfg.mcshane_anchors, seed=cfg.seed)
    lip_f = lipschitz_constant(f.values, X)
    steps = X.space.norm(ys - ys2)
    lr = {}
    for proj in (CellProjection(LipPartition(C, lambda_hat=lam)),
                 KernelProjection(X, KernelProfile.for_points(X, lam))):
        diff = np.max(np.abs(extend_lip(f, proj, ys) - extend_lip(f, proj, ys2)), axis=1)
        lr[proj.name] = float(np.max(diff / steps)) / lip_f
    return {"spec": spec.to_dict(), "lambda_hat": lam, "lip_ratio": lr}
