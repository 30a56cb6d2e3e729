"""Kernel SHAP attributions for any fitted model.

Coalitions are sampled by size in proportion to total kernel mass per size,
uniformly within a size, and in complement pairs to cut sampling variance.
The empty and full coalitions never enter the sample: they are imposed as
the two local-accuracy constraints, and the last feature's value is
eliminated through them, so every returned explanation satisfies
phi_0 + sum(phi) = f(query) by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import comb

from .errors import DomainError, SingularityError
from .learners import FittedModel


@dataclass(frozen=True)
class ShapExplanation:
    phi_0: float
    phi: np.ndarray
    query: np.ndarray
    references: np.ndarray
    n_samples: int

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))

    @property
    def total(self) -> float:
        return float(self.phi_0 + self.phi.sum())


def shap_kernel_weight(M: int, size: int) -> float:
    """(M-1) / (C(M, size) * size * (M - size))."""
    if size <= 0 or size >= M:
        raise DomainError(
            f"kernel weight is infinite for coalition size {size} of {M}; "
            "empty/full coalitions are handled by constraints"
        )
    return float((M - 1) / (comb(M, size, exact=True) * size * (M - size)))


def _sample_masks(M: int, S: int, rng: np.random.Generator) -> np.ndarray:
    """S coalition masks with 1 <= |z| <= M-1, paired with their complements."""
    sizes = np.arange(1, M)
    # total kernel mass of a size: C(M,s) * pi(s) = (M-1)/(s*(M-s))
    mass = (M - 1) / (sizes * (M - sizes))
    prob = mass / mass.sum()
    masks = np.zeros((S, M), dtype=np.int8)
    k = 0
    while k < S:
        s = int(rng.choice(sizes, p=prob))
        members = rng.choice(M, size=s, replace=False)
        masks[k, members] = 1
        k += 1
        if k < S:
            masks[k] = 1 - masks[k - 1]
            k += 1
    return masks


def explain(model: FittedModel, query: np.ndarray, references: np.ndarray,
            n_samples: int = 1000, seed: int = 0) -> ShapExplanation:
    """Estimate Shapley values via the kernel-weighted linear surrogate."""
    query = np.asarray(query, dtype=float).ravel()
    references = np.asarray(references, dtype=float).ravel()
    M = len(query)
    if references.shape != query.shape:
        raise DomainError("references must match query dimension")
    f_ref = model.predict_one(references)
    f_query = model.predict_one(query)
    delta = f_query - f_ref

    if M == 1:
        return ShapExplanation(f_ref, np.array([delta]), query, references, 0)

    if n_samples < M + 2:
        raise DomainError(f"need at least M+2={M + 2} samples, got {n_samples}")

    rng = np.random.default_rng(seed)
    masks = _sample_masks(M, n_samples, rng)

    perturbed = np.where(masks == 1, query, references)
    predictions = model.predict(perturbed)
    weights = np.array([shap_kernel_weight(M, int(s)) for s in masks.sum(axis=1)])

    # eliminate phi_M with the two constraints g(0)=f(ref), g(1)=f(query)
    z = masks.astype(float)
    y = predictions - f_ref - z[:, M - 1] * delta
    A = z[:, : M - 1] - z[:, [M - 1]]
    sw = np.sqrt(weights)
    Aw = A * sw[:, None]
    yw = y * sw
    phi_head, _, rank, _ = np.linalg.lstsq(Aw, yw, rcond=None)
    if rank < M - 1:
        raise SingularityError(
            f"degenerate weighted system: rank {rank} < {M - 1}; increase n_samples"
        )
    phi = np.append(phi_head, delta - phi_head.sum())
    return ShapExplanation(f_ref, phi, query, references, n_samples)


def mean_attributions(model: FittedModel, rows: np.ndarray, references: np.ndarray,
                      n_samples: int = 1000, seed: int = 0) -> pd.DataFrame:
    """Mean phi per feature over rows, with positive/negative parts split out.

    Each row's explanation gets its own stream derived from (seed, row), so
    results do not depend on evaluation order.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        raise DomainError("need at least one row to attribute")
    phis = np.empty((rows.shape[0], rows.shape[1]))
    for i, row in enumerate(rows):
        row_seed = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        expl = explain(model, row, references,
                       n_samples=n_samples,
                       seed=row_seed)
        phis[i] = expl.phi
    names = getattr(model, "feature_names", None) or [f"x{j}" for j in range(rows.shape[1])]
    return pd.DataFrame({
        "feature": list(names),
        "mean_phi": phis.mean(axis=0),
        "mean_abs_phi": np.abs(phis).mean(axis=0),
        "mean_positive_phi": np.where(phis > 0, phis, 0.0).mean(axis=0),
        "mean_negative_phi": np.where(phis < 0, phis, 0.0).mean(axis=0),
    })


def write_attributions(tables: dict[str, pd.DataFrame], path) -> None:
    """Delimited export: feature,mean_phi,mean_abs_phi,model."""
    frames = []
    for model_tag, table in tables.items():
        frame = table[["feature", "mean_phi", "mean_abs_phi"]].copy()
        frame["model"] = model_tag
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
