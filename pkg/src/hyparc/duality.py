"""Dual certificates for the fixed-binary problem, Gram matrices and feature maps.

With the binaries fixed, the margin problem is a convex program whose
Lagrangian dual reads the data only through inner products.  This module
harvests the optimal multipliers of that program, checks the KKT identities
and evaluates the dual objective from a Gram matrix alone, which is how the
kernel representability of the classifier is verified numerically.

Multiplier families (rows of the fixed-binary problem, f = w_r x_i + w_r0):

    mu1  -f <= kappa1(t)          mu2   f <= kappa2(t)
    mu3  -f - e <= kappa3(u+)     mu4   f - e <= kappa3(u-)
    mu5  -f - d <= kappa3(q+)     mu6   f - d <= kappa3(q-)
    mu7  -d <= 0                  mu8  -e <= 0
    mu0  0.5 ||w_r||^2 <= Theta   (epigraph of the margin term)
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, Hyperparameters
from .formulation import estimate_big_m
from .solver import Binaries, PhiResult, check_binaries, eval_phi

CERT_SCHEMA = "hyparc-cert/1"
KKT_TOL = 1e-6
MU0_FLOOR = 1e-9

FAMILIES = {"t+": "mu1", "t-": "mu2", "q4": "mu3", "q5": "mu4", "q8": "mu5", "q9": "mu6"}


class CertificateError(ValueError):
    """KKT identities fail beyond tolerance."""


class UnsupportedNormError(ValueError):
    pass


def kappa(kind: int, t: int, T: float) -> float:
    """kappa1(t) = T(1-t), kappa2(t) = Tt, kappa3(t) = -1 + Tt."""
    if t not in (0, 1):
        raise ValueError("t must be 0 or 1")
    if kind == 1:
        return T * (1 - t)
    if kind == 2:
        return T * t
    if kind == 3:
        return -1.0 + T * t
    raise ValueError("kind must be 1, 2 or 3")


def _kappa3(v, T):
    # the switch values u, q range over integers; same affine formula
    return -1.0 + T * np.asarray(v, dtype=float)


# ------------------------------------------------------------------- kernels
@dataclass(frozen=True, eq=False)
class GramMatrix:
    K: np.ndarray
    kernel: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("Gram matrix must be square")
        if not np.allclose(K, K.T, atol=1e-12, rtol=0):
            raise ValueError("Gram matrix must be symmetric")
        K = 0.5 * (K + K.T)
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.K).min()) if self.n else 0.0

    def is_psd(self, tol: float = 1e-8) -> bool:
        return self.min_eigenvalue() >= -tol * max(1.0, float(np.abs(self.K).max(initial=0)))


def _points(data) -> np.ndarray:
    return data.points if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))


def gram(data, kernel: str = "linear", degree: int = 2, coef0: float = 0.0, sigma: float = 1.0) -> GramMatrix:
    """K_ij = k(x_i, x_j) for the linear, polynomial or gaussian kernel."""
    X = _points(data)
    G = X @ X.T
    if kernel == "linear":
        return GramMatrix(G, "linear")
    if kernel in ("poly", "polynomial"):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        return GramMatrix((G + coef0) ** degree, "polynomial", {"degree": degree, "coef0": coef0})
    if kernel == "gaussian":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        sq = np.diag(G)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0)
        np.fill_diagonal(D, 0.0)
        return GramMatrix(np.exp(-D / (2.0 * sigma ** 2)), "gaussian", {"sigma": sigma})
    raise ValueError(f"unknown kernel {kernel!r}")


def poly2_features(X, coef0: float = 0.0) -> np.ndarray:
    """Explicit map with phi(a).phi(b) = (a.b + coef0)^2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = X.shape[1]
    cols = [X[:, j] ** 2 for j in range(p)]
    cols += [np.sqrt(2.0) * X[:, j] * X[:, l] for j, l in itertools.combinations(range(p), 2)]
    if coef0:
        if coef0 < 0:
            raise ValueError("coef0 must be nonnegative")
        cols += [np.sqrt(2.0 * coef0) * X[:, j] for j in range(p)]
        cols.append(np.full(X.shape[0], coef0))
    return np.column_stack(cols)


def feature_map_poly2(dataset: Dataset, coef0: float = 0.0) -> Dataset:
    """The dataset mapped by the degree-2 monomial embedding (no re-normalization)."""
    Z = poly2_features(dataset.points, coef0)
    return Dataset(Z, dataset.labels, dataset.k, None, dataset.label_names)


# ------------------------------------------------------------- certificates
@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Optimal multipliers of the fixed-binary problem, one array per constraint family.

    Pair families ``mu3..mu6`` are ``(n, n, m)`` arrays indexed ``[i, j, r]``;
    a row shared by several partners j carries its multiplier on the partner
    that produced it.  ``mu_theta`` belongs to ``Theta >= 0``.
    """

    norm: str
    loss: str
    C1: float
    C2: float
    T: float
    mu0: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    mu3: np.ndarray
    mu4: np.ndarray
    mu5: np.ndarray
    mu6: np.ndarray
    mu7: np.ndarray
    mu8: np.ndarray
    mu_theta: float
    omega: np.ndarray
    omega0: np.ndarray
    primal: float
    rho: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.mu1.shape[0]

    @property
    def m(self) -> int:
        return self.mu1.shape[1]

    @property
    def alpha(self) -> np.ndarray:
        """alpha_ir = mu1 - mu2 + sum_j (mu3 - mu4 + mu5 - mu6)."""
        pair = (self.mu3 - self.mu4 + self.mu5 - self.mu6).sum(axis=1)
        return self.mu1 - self.mu2 + pair

    @property
    def Gamma(self) -> np.ndarray:
        """Per-hyperplane margin values 0.5 ||w_r||^2."""
        return 0.5 * np.sum(self.omega ** 2, axis=1)

    @property
    def gamma(self) -> np.ndarray:
        return np.ones(self.m)

    def replace(self, **changes) -> "DualCertificate":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return DualCertificate(**fields)

    def to_dict(self) -> dict:
        out = {"schema": CERT_SCHEMA}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        out["alpha"] = self.alpha.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "DualCertificate":
        if doc.get("schema") != CERT_SCHEMA:
            raise ValueError(f"not a {CERT_SCHEMA} document")
        kw = {}
        for k, f in cls.__dataclass_fields__.items():
            v = doc.get(k)
            if k.startswith("mu") and k != "mu_theta" or k in ("omega", "omega0", "rho"):
                v = None if v is None else np.asarray(v, dtype=float)
            kw[k] = v
        return cls(**kw)


def _assemble(dataset: Dataset, params: Hyperparameters, phi: PhiResult) -> DualCertificate:
    n, m = dataset.n, params.m
    fam = {name: np.zeros((n, m)) for name in ("mu1", "mu2", "mu7", "mu8")}
    fam.update({name: np.zeros((n, n, m)) for name in ("mu3", "mu4", "mu5", "mu6")})
    z = np.asarray(phi.multipliers, dtype=float)
    for q, (kind, i, r, j, _) in enumerate(phi.rows):
        name = FAMILIES[kind]
        if name in ("mu1", "mu2"):
            fam[name][i, r] += z[q]
        else:
            fam[name][i, j, r] += z[q]
    hinge = params.loss == "hinge"
    nr = len(phi.rows)
    rho = None
    if params.norm == "l2":
        ne = n * m
        mu_theta = float(z[nr])
        fam["mu8"] = z[nr + 1:nr + 1 + ne].reshape(n, m)
        if hinge:
            fam["mu7"] = z[nr + 1 + ne:nr + 1 + 2 * ne].reshape(n, m)
        mu0 = np.asarray(phi.quad_multipliers, dtype=float)
    else:
        # bounds are not rows in the l1 LP: their multipliers are reduced costs
        nw = m * dataset.p
        ext = z[nr:nr + 2 * nw]
        # rows w - theta <= 0 and -w - theta <= 0: stationarity gives sum_i alpha_i x_i = rho
        rho = (ext[0::2] - ext[1::2]).reshape(m, dataset.p)
        mu0 = np.zeros(m)
        mu_theta = float(1.0 - ext.sum())
        fam["mu8"] = params.C1 - (fam["mu3"] + fam["mu4"]).sum(axis=1)
        if hinge:
            fam["mu7"] = params.C2 - (fam["mu5"] + fam["mu6"]).sum(axis=1)
    return DualCertificate(params.norm, params.loss, params.C1, params.C2, phi.T, mu0,
                           fam["mu1"], fam["mu2"], fam["mu3"], fam["mu4"], fam["mu5"], fam["mu6"],
                           fam["mu7"], fam["mu8"], mu_theta, phi.omega.copy(), phi.omega0.copy(),
                           float(phi.value), rho)


def kkt_residuals(cert: DualCertificate, dataset: Dataset) -> dict:
    """Named residuals of the KKT identities (all should be ~0)."""
    X = dataset.points
    A = cert.alpha
    res = {}
    fams = [cert.mu1, cert.mu2, cert.mu3, cert.mu4, cert.mu5, cert.mu6, cert.mu7, cert.mu8]
    res["nonnegativity"] = float(max(0.0, -min(float(f.min(initial=0)) for f in fams), -cert.mu_theta,
                                     -float(cert.mu0.min(initial=0))))
    res["sum_alpha"] = float(np.abs(A.sum(axis=0)).max(initial=0))
    c1 = (cert.mu3 + cert.mu4).sum(axis=1) + cert.mu8 - cert.C1
    res["c1_identity"] = float(np.abs(c1).max(initial=0))
    if cert.loss == "hinge":
        c2 = (cert.mu5 + cert.mu6).sum(axis=1) + cert.mu7 - cert.C2
        res["c2_identity"] = float(np.abs(c2).max(initial=0))
    if cert.norm == "l2":
        recon = cert.mu0[:, None] * cert.omega - A.T @ X
        res["reconstruction"] = float(np.abs(recon).max(initial=0))
        res["theta_stationarity"] = float(abs(cert.mu0.sum() + cert.mu_theta - 1.0))
    else:
        res["reconstruction"] = float(np.abs(A.T @ X - cert.rho).max(initial=0))
        res["theta_stationarity"] = float(abs(np.abs(cert.rho).sum() + cert.mu_theta - 1.0)) \
            if cert.mu_theta > KKT_TOL else 0.0
    return res


def extract_certificate(dataset: Dataset, params: Hyperparameters, binaries: Binaries,
                        T: Optional[float] = None, tol: float = KKT_TOL) -> DualCertificate:
    """Solve the fixed-binary problem and collect its optimal multipliers.

    l2 multipliers come from the interior point method, l1 multipliers from
    the simplex duals.  Raises :class:`CertificateError` when any KKT
    identity is off by more than ``tol``.
    """
    check_binaries(dataset, binaries, params.m)
    T = estimate_big_m(dataset, params) if T is None else float(T)
    phi = eval_phi(dataset, params, binaries, T, check=False, tol=1e-11)
    cert = _assemble(dataset, params, phi)
    res = kkt_residuals(cert, dataset)
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise CertificateError("KKT residuals above tolerance: "
                               + ", ".join(f"{k}={v:.2e}" for k, v in sorted(bad.items())))
    return cert


def _switches(binaries: Binaries):
    """u+, u-, q+, q- as (n, n, m) arrays indexed [i, j, r]."""
    t, h = binaries.t.astype(float), binaries.h.astype(float)
    ti, tj = t[:, None, :], t[None, :, :]
    hh = h[:, :, None]
    return 3 - ti - tj - hh, 1 + ti + tj - hh, 2 + ti - tj - hh, 2 - ti + tj - hh


def dual_objective(cert: DualCertificate, gram_matrix: GramMatrix, binaries: Binaries,
                   params: Hyperparameters) -> float:
    """Lagrangian dual value computed from the Gram matrix and the multipliers.

    ``- sum mu * kappa - sum_r alpha_r' K alpha_r / (2 mu0_r)``, plus the
    constant ``C2 * sum(xi)`` for the ramp loss.  Terms whose kappa is zero or
    positive vanish at the optimum by complementary slackness; the surviving
    ones are the +mu sums over pairs with switch value zero.  A block with
    ``mu0_r`` below a small floor contributes no quadratic term.
    """
    if cert.norm != "l2":
        raise UnsupportedNormError("the dual objective is derived for the Euclidean margin")
    K = gram_matrix.K
    A = cert.alpha
    if K.shape[0] != A.shape[0]:
        raise ValueError("Gram matrix and certificate sizes differ")
    T = cert.T
    t = binaries.t
    up, um, qp, qm = _switches(binaries)
    value = -float(np.sum(cert.mu1 * T * (1 - t)) + np.sum(cert.mu2 * T * t))
    value -= float(np.sum(cert.mu3 * _kappa3(up, T)) + np.sum(cert.mu4 * _kappa3(um, T)))
    value -= float(np.sum(cert.mu5 * _kappa3(qp, T)) + np.sum(cert.mu6 * _kappa3(qm, T)))
    for r in range(cert.m):
        if cert.mu0[r] > MU0_FLOOR:
            value -= float(A[:, r] @ K @ A[:, r]) / (2.0 * cert.mu0[r])
    if cert.loss == "ramp":
        value += params.C2 * float(binaries.xi.sum())
    return value


@dataclass
class DualityReport:
    status: str
    passed: bool
    primal: float = float("nan")
    dual: float = float("nan")
    gap: float = float("nan")
    residuals: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "passed": self.passed, "primal": self.primal, "dual": self.dual,
                "gap": self.gap, "residuals": dict(sorted(self.residuals.items())),
                "failed": list(self.failed), "message": self.message}


def check_certificate(cert: DualCertificate, dataset: Dataset, binaries: Binaries,
                      params: Hyperparameters, tol: float = KKT_TOL, gram_matrix=None) -> DualityReport:
    """Check a given certificate against its primal value and the KKT identities."""
    res = kkt_residuals(cert, dataset)
    K = gram(dataset) if gram_matrix is None else gram_matrix
    dual = dual_objective(cert, K, binaries, params)
    gap = float(abs(cert.primal - dual))
    res = dict(res, duality_gap=gap)
    failed = sorted(k for k, v in res.items() if not v <= tol)
    return DualityReport("ok" if not failed else "failed", not failed, cert.primal, dual, gap, res, failed)


def verify_strong_duality(dataset: Dataset, params: Hyperparameters, binaries: Binaries,
                          tol: float = KKT_TOL, T: Optional[float] = None) -> DualityReport:
    """Primal value vs. the dual value built from inner products only."""
    if params.norm != "l2":
        return DualityReport("unsupported_norm", False,
                             message="strong-duality check is derived for the l2 margin only")
    T = estimate_big_m(dataset, params) if T is None else float(T)
    phi = eval_phi(dataset, params, binaries, T, tol=1e-11)
    cert = _assemble(dataset, params, phi)
    report = check_certificate(cert, dataset, binaries, params, tol)
    report.primal = float(phi.value)
    report.gap = float(abs(report.primal - report.dual))
    report.residuals["duality_gap"] = report.gap
    report.failed = sorted(k for k, v in report.residuals.items() if not v <= tol)
    report.passed = not report.failed
    report.status = "ok" if report.passed else "failed"
    return report
