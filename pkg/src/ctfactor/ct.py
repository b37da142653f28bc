"""Threshold sweep: candidate structures from a correlation matrix.

For every threshold in a grid, the correlation matrix is thresholded into
a graph, the graph's independent maximal cliques become factors (clique
membership is the loading support), duplicate structures across thresholds
are merged, and, under likelihood selection, each distinct structure is
fitted so the lowest BIC wins. Selection can also defer to an oracle
structure (smallest Hamming distance) or be skipped.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MissingTruth, NonPDSampleWarning
from .estimate import FitOptions, fit_mle
from .graph import build_graph, independent_maximal_cliques, structure_from_cliques
from .metrics import hamming_distance

__all__ = ["CtConfig", "CtCandidate", "CtResult", "default_thresholds", "dedupe_structures", "ct_run"]

SELECTIONS = ("bic", "min-hd-oracle", "none")


def default_thresholds():
    """40 equidistant thresholds spanning [0, 1] inclusive."""
    return np.linspace(0.0, 1.0, 40)


@dataclass(frozen=True)
class CtConfig:
    """Sweep settings.

    ``selection`` is one of ``"bic"`` (fit every candidate, lowest BIC
    wins), ``"min-hd-oracle"`` (closest support to ``truth`` wins, no
    fitting), or ``"none"`` (candidates only). ``seed`` feeds the fit
    restarts.
    """

    thresholds: tuple = field(default_factory=lambda: tuple(default_thresholds()))
    selection: str = "bic"
    fit_options: FitOptions = field(default_factory=FitOptions)
    truth: object = None
    seed: int = 0

    def __post_init__(self):
        taus = tuple(float(t) for t in self.thresholds)
        if len(taus) == 0:
            raise DomainError("thresholds must be non-empty")
        for t in taus:
            if not 0.0 <= t <= 1.0:
                raise DomainError(f"threshold {t} outside [0, 1]")
        object.__setattr__(self, "thresholds", tuple(sorted(set(taus))))
        if self.selection not in SELECTIONS:
            raise DomainError(
                f"selection must be one of {SELECTIONS}, got {self.selection!r}"
            )
        if self.selection == "min-hd-oracle" and self.truth is None:
            raise MissingTruth("min-hd-oracle selection requires a truth structure")


@dataclass
class CtCandidate:
    """One distinct structure found by the sweep."""

    structure: object
    tau_values: tuple
    flags: tuple = ()
    fit: object = None
    bic: float = None
    loglik: float = None
    hd: int = None
    error: str = None

    def to_json_dict(self):
        fitdoc = None
        if self.fit is not None:
            fitdoc = {
                "converged": self.fit.converged,
                "n_iterations": self.fit.n_iterations,
            }
        return {
            "tau_values": list(self.tau_values),
            "structure": self.structure.to_json_dict(),
            "flags": list(self.flags),
            "bic": self.bic,
            "loglik": self.loglik,
            "hd": self.hd,
            "fit": fitdoc,
            "error": self.error,
        }


@dataclass
class CtResult:
    """Sweep outcome: deduplicated candidates plus the selection."""

    candidates: list
    selected_index: int
    models_evaluated: int
    skipped_taus: tuple
    timings_s: dict
    selection: str

    @property
    def selected(self):
        if self.selected_index is None:
            return None
        return self.candidates[self.selected_index]

    def to_json_dict(self):
        return {
            "selection": self.selection,
            "candidates": [c.to_json_dict() for c in self.candidates],
            "selected_index": self.selected_index,
            "models_evaluated": self.models_evaluated,
            "skipped_taus": list(self.skipped_taus),
            "timings_s": {k: float(v) for k, v in self.timings_s.items()},
        }


def dedupe_structures(structures):
    """Merge structures equal up to factor relabeling.

    Returns ``(unique, groups)`` where ``groups[k]`` lists the input
    indices collapsed into ``unique[k]``, in first-appearance order.
    """
    unique = []
    groups = []
    by_key = {}
    for idx, s in enumerate(structures):
        key = s.canonical_key()
        at = by_key.get(key)
        if at is None:
            by_key[key] = len(unique)
            unique.append(s)
            groups.append([idx])
        else:
            groups[at].append(idx)
    return unique, groups


def ct_run(corr, n, config=None):
    """Run the full threshold sweep on a correlation matrix.

    Parameters
    ----------
    corr : array_like
        Symmetric unit-diagonal matrix (sample or population correlation).
    n : int
        Sample size behind ``corr``; drives likelihoods and the BIC.
    config : CtConfig, optional

    Returns
    -------
    CtResult
    """
    config = config or CtConfig()
    corr = np.asarray(corr, dtype=float)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = corr.shape[0] if corr.ndim == 2 else 0
    if config.selection == "bic" and n < p:
        warnings.warn(
            f"BIC selection with n={n} < p={p}: the sample correlation matrix "
            "is rank deficient and likelihoods are unreliable",
            NonPDSampleWarning,
            stacklevel=2,
        )

    t0 = time.perf_counter()
    candidates = []
    by_key = {}
    skipped = []
    prev_edges = None
    for tau in config.thresholds:
        graph = build_graph(corr, tau)
        edges = graph.edge_count()
        # thresholds are ascending, so edge sets can only shrink
        assert prev_edges is None or edges <= prev_edges
        prev_edges = edges
        cliques = independent_maximal_cliques(graph)
        if len(cliques) == 0:
            skipped.append(float(tau))
            continue
        structure = structure_from_cliques(cliques)
        key = structure.canonical_key()
        at = by_key.get(key)
        if at is None:
            flags = []
            if structure.d == structure.p:
                flags.append("trivial")
            if structure.zero_rows():
                flags.append("zero_rows")
            by_key[key] = len(candidates)
            candidates.append(
                CtCandidate(
                    structure=structure,
                    tau_values=(float(tau),),
                    flags=tuple(flags),
                )
            )
        else:
            cand = candidates[at]
            cand.tau_values = cand.tau_values + (float(tau),)
    sweep_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    if config.selection == "bic":
        for k, cand in enumerate(candidates):
            try:
                fit = fit_mle(
                    corr,
                    n,
                    cand.structure,
                    options=config.fit_options,
                    seed=config.seed + k,
                )
            except Exception as exc:  # a broken fit excludes the candidate only
                cand.error = f"{type(exc).__name__}: {exc}"
                continue
            cand.fit = fit
            cand.bic = fit.bic
            cand.loglik = fit.loglik
    fit_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    selected = None
    if config.selection == "bic":
        fitted = [k for k, c in enumerate(candidates) if c.bic is not None]
        if fitted:
            selected = min(fitted, key=lambda k: candidates[k].bic)
    elif config.selection == "min-hd-oracle":
        for cand in candidates:
            cand.hd = hamming_distance(cand.structure, config.truth).hd
        if candidates:
            selected = min(range(len(candidates)), key=lambda k: candidates[k].hd)
    select_s = time.perf_counter() - t0

    return CtResult(
        candidates=candidates,
        selected_index=selected,
        models_evaluated=len(candidates),
        skipped_taus=tuple(skipped),
        timings_s={"sweep": sweep_s, "fit": fit_s, "select": select_s},
        selection=config.selection,
    )
