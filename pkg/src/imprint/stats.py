"""Rank-based comparison of classifier configurations.

The evaluation chain for comparing many configurations across many
evaluation instances: per-instance ranking (rank 1 = highest accuracy,
average ranks for ties), the Friedman test as a global gate, pairwise
two-sided Wilcoxon signed-rank tests corrected with Holm's step-down
procedure, and critical-difference (CD) diagram construction with a
deterministic SVG renderer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import chi2, norm

# Sample sizes up to this bound get the exact signed-rank null distribution;
# larger ones use the tie- and continuity-corrected normal approximation.
WILCOXON_EXACT_LIMIT = 20


@dataclass(frozen=True)
class RankMatrix:
    """Configurations x instances matrix of per-column ranks."""

    ranks: np.ndarray
    config_names: tuple[str, ...]
    instance_names: tuple[str, ...]


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    p_value: float


@dataclass(frozen=True)
class PairwiseResult:
    """One post-hoc comparison between configs ``a`` and ``b`` (indices)."""

    a: int
    b: int
    p_raw: float
    p_adjusted: float
    significant: bool


@dataclass(frozen=True)
class CDDiagram:
    """Average ranks plus the significance cliques backing a CD diagram.

    Cliques are maximal rank-contiguous groups without a significant internal
    pair; they may be singletons. ``friedman_rejected`` is None when the
    global test was not applicable (fewer than 3 configurations).
    """

    config_names: tuple[str, ...]
    avg_ranks: np.ndarray
    cliques: tuple[tuple[int, ...], ...]
    alpha: float
    friedman_statistic: float | None
    friedman_p: float | None
    friedman_rejected: bool | None
    pairwise: tuple[PairwiseResult, ...] = ()


def _rank_descending(column: np.ndarray) -> np.ndarray:
    """Rank 1 for the largest value; tied values share the average rank."""
    order = np.argsort(-column, kind="stable")
    sorted_vals = column[order]
    ranks = np.empty(column.size, dtype=np.float64)
    i = 0
    while i < column.size:
        j = i
        while j + 1 < column.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    return ranks


def rank_columns(
    accuracies: np.ndarray,
    config_names: tuple[str, ...] | None = None,
    instance_names: tuple[str, ...] | None = None,
) -> RankMatrix:
    """Per-instance (column-wise) ranks of an accuracy matrix."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 2 or acc.size == 0:
        raise ValueError("accuracies must be a non-empty 2-D matrix")
    if np.isnan(acc).any():
        raise ValueError("accuracies contain NaN")
    k, n = acc.shape
    ranks = np.column_stack([_rank_descending(acc[:, j]) for j in range(n)])
    if config_names is None:
        config_names = tuple(f"config{i}" for i in range(k))
    if instance_names is None:
        instance_names = tuple(f"instance{j}" for j in range(n))
    if len(config_names) != k or len(instance_names) != n:
        raise ValueError("name lengths do not match the accuracy matrix")
    return RankMatrix(ranks, tuple(config_names), tuple(instance_names))


def friedman_test(rank_matrix: RankMatrix) -> FriedmanResult:
    """Friedman chi-square statistic with tie correction.

    statistic = [12 n / (k (k+1))] * [sum_j mean_rank_j^2 - k (k+1)^2 / 4]
    divided by the tie-correction factor; the p-value comes from the
    chi-square distribution with k - 1 degrees of freedom.
    """
    ranks = rank_matrix.ranks
    k, n = ranks.shape
    if k < 3:
        raise ValueError("Friedman test needs at least 3 configurations")
    if n < 2:
        raise ValueError("Friedman test needs at least 2 instances")
    mean_ranks = ranks.mean(axis=1)
    uncorrected = (12.0 * n / (k * (k + 1))) * (
        np.sum(mean_ranks**2) - k * (k + 1) ** 2 / 4.0
    )
    ties = 0.0
    for j in range(n):
        _, counts = np.unique(ranks[:, j], return_counts=True)
        ties += float(np.sum(counts.astype(np.float64) ** 3 - counts))
    correction = 1.0 - ties / (n * k * (k**2 - 1))
    if correction <= 0.0:
        # Every column fully tied: no evidence of any difference.
        return FriedmanResult(0.0, 1.0)
    statistic = float(uncorrected / correction)
    return FriedmanResult(statistic, float(chi2.sf(statistic, k - 1)))


def _signed_rank_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Exact null distribution of the positive rank sum, in doubled units.

    counts[w] = number of sign assignments whose positive-rank sum equals
    w / 2. Exact integer arithmetic; feasible because n <= 20 here.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def _wilcoxon_exact_p(ranks: np.ndarray, w_plus: float) -> float:
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    counts = _signed_rank_counts(doubled)
    total2 = int(doubled.sum())
    w2 = int(np.rint(2.0 * w_plus))
    lo, hi = min(w2, total2 - w2), max(w2, total2 - w2)
    extreme = int(counts[: lo + 1].sum()) + int(counts[hi:].sum())
    return min(1.0, extreme / 2 ** len(ranks))


def _wilcoxon_approx_p(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts)) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    z = (abs(w_plus - mu) - 0.5) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(max(z, 0.0))))


def _abs_rank(values: np.ndarray) -> np.ndarray:
    """Ascending average ranks of absolute values."""
    return (values.size + 1) - _rank_descending(values)


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped; at least 5 nonzero differences are
    required. Absolute differences receive average ranks. Up to
    ``WILCOXON_EXACT_LIMIT`` differences the p-value is exact (all 2^n sign
    assignments); beyond that a normal approximation with tie and continuity
    corrections is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D arrays of equal length")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    if diffs.size == 0:
        raise ValueError("all differences are zero")
    if diffs.size < 5:
        raise ValueError(
            f"need at least 5 nonzero differences, got {diffs.size}"
        )
    ranks = _abs_rank(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    if diffs.size <= WILCOXON_EXACT_LIMIT:
        return _wilcoxon_exact_p(ranks, w_plus)
    return _wilcoxon_approx_p(ranks, w_plus)


def holm_correct(p_values) -> list[float]:
    """Holm step-down adjusted p-values, returned in the original order.

    adjusted_(i) = max over j <= i of min(1, (m - j + 1) * p_(j)) on the
    ascending-sorted p-values.
    """
    ps = np.asarray(list(p_values), dtype=np.float64)
    if ps.size == 0:
        return []
    if np.any((ps < 0.0) | (ps > 1.0)) or np.isnan(ps).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = ps.size
    order = np.argsort(ps, kind="stable")
    adjusted = np.empty(m, dtype=np.float64)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * ps[idx]))
        adjusted[idx] = running
    return adjusted.tolist()


def _pair_p_value(a: np.ndarray, b: np.ndarray) -> float:
    """Wilcoxon p for the diagram pipeline; degenerate pairs count as 1.

    Pairs with all-zero differences (duplicated configurations) or fewer
    than 5 nonzero differences carry no evidence, so they are treated as
    maximally non-significant instead of raising.
    """
    diffs = a - b
    if np.count_nonzero(diffs) < 5:
        return 1.0
    return wilcoxon_signed_rank(a, b)


def _extract_cliques(
    avg_ranks: np.ndarray, significant: np.ndarray
) -> tuple[tuple[int, ...], ...]:
    """Maximal rank-contiguous windows without a significant internal pair."""
    order = np.argsort(avg_ranks, kind="stable")
    k = avg_ranks.size
    cliques: list[tuple[int, ...]] = []
    deepest = -1
    for start in range(k):
        end = start
        while end + 1 < k and not any(
            significant[order[t], order[end + 1]] for t in range(start, end + 1)
        ):
            end += 1
        if end > deepest:
            cliques.append(tuple(int(i) for i in order[start : end + 1]))
            deepest = end
    return tuple(cliques)


def build_cd_diagram(
    accuracies: np.ndarray,
    alpha: float = 0.05,
    config_names: tuple[str, ...] | None = None,
    instance_names: tuple[str, ...] | None = None,
) -> CDDiagram:
    """Full post-hoc analysis of an accuracy matrix.

    The Friedman test gates the pairwise analysis: if it does not reject at
    ``alpha`` the diagram contains a single all-encompassing clique and the
    ``friedman_rejected`` flag is False. With exactly two configurations the
    gate is skipped (the single pairwise test decides on its own).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    rank_matrix = rank_columns(accuracies, config_names, instance_names)
    acc = np.asarray(accuracies, dtype=np.float64)
    k = acc.shape[0]
    avg_ranks = rank_matrix.ranks.mean(axis=1)
    friedman_stat: float | None = None
    friedman_p: float | None = None
    friedman_rejected: bool | None = None
    if k >= 3:
        result = friedman_test(rank_matrix)
        friedman_stat, friedman_p = result.statistic, result.p_value
        friedman_rejected = friedman_p < alpha
        if not friedman_rejected:
            order = np.argsort(avg_ranks, kind="stable")
            return CDDiagram(
                rank_matrix.config_names,
                avg_ranks,
                (tuple(int(i) for i in order),),
                alpha,
                friedman_stat,
                friedman_p,
                friedman_rejected,
            )
    pairs = list(itertools.combinations(range(k), 2))
    raw = [_pair_p_value(acc[i], acc[j]) for i, j in pairs]
    adjusted = holm_correct(raw)
    significant = np.zeros((k, k), dtype=bool)
    pairwise = []
    for (i, j), p_raw, p_adj in zip(pairs, raw, adjusted):
        sig = p_adj < alpha
        significant[i, j] = significant[j, i] = sig
        pairwise.append(PairwiseResult(i, j, float(p_raw), float(p_adj), bool(sig)))
    cliques = _extract_cliques(avg_ranks, significant)
    return CDDiagram(
        rank_matrix.config_names,
        avg_ranks,
        cliques,
        alpha,
        friedman_stat,
        friedman_p,
        friedman_rejected,
        tuple(pairwise),
    )


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def emit_cd_svg(diagram: CDDiagram, path) -> None:
    """Render a CD diagram as a deterministic standalone SVG file.

    The average-rank axis runs left (rank 1, better) to right; every clique
    with two or more members becomes one thick bar below the axis. The same
    diagram always produces byte-identical output.
    """
    k = len(diagram.config_names)
    order = np.argsort(diagram.avg_ranks, kind="stable")
    width = 720.0
    left, right = 90.0, 630.0
    axis_y = 46.0

    def x_of(rank: float) -> float:
        if k == 1:
            return (left + right) / 2.0
        return left + (rank - 1.0) / (k - 1.0) * (right - left)

    bars = [c for c in diagram.cliques if len(c) >= 2]
    bar_gap = 14.0
    bars_bottom = axis_y + 10.0 + bar_gap * len(bars)
    label_gap = 16.0
    n_left = (k + 1) // 2
    height = bars_bottom + label_gap * max(n_left, k - n_left) + 28.0

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        '<style>text{font-family:Helvetica,Arial,sans-serif;font-size:12px;}</style>',
        f'<line class="axis" x1="{_fmt(left)}" y1="{_fmt(axis_y)}" '
        f'x2="{_fmt(right)}" y2="{_fmt(axis_y)}" stroke="black" stroke-width="1.5"/>',
    ]
    for tick in range(1, k + 1):
        tx = x_of(float(tick))
        lines.append(
            f'<line x1="{_fmt(tx)}" y1="{_fmt(axis_y - 5)}" x2="{_fmt(tx)}" '
            f'y2="{_fmt(axis_y)}" stroke="black" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_fmt(tx)}" y="{_fmt(axis_y - 10)}" '
            f'text-anchor="middle">{tick}</text>'
        )
    if diagram.friedman_rejected is False:
        lines.append(
            f'<text class="warning" x="{_fmt(width / 2)}" y="16" text-anchor="middle" '
            'fill="#a00">global test not significant; differences inconclusive</text>'
        )
    for row, clique in enumerate(bars):
        xs = [x_of(float(diagram.avg_ranks[i])) for i in clique]
        y = axis_y + 10.0 + bar_gap * row
        lines.append(
            f'<line class="clique-bar" x1="{_fmt(min(xs))}" y1="{_fmt(y)}" '
            f'x2="{_fmt(max(xs))}" y2="{_fmt(y)}" stroke="black" stroke-width="5" '
            'stroke-linecap="round"/>'
        )
    for pos, idx in enumerate(order):
        rank = float(diagram.avg_ranks[idx])
        cx = x_of(rank)
        on_left = pos < n_left
        row = pos if on_left else pos - n_left
        label_y = bars_bottom + 14.0 + label_gap * row
        label_x = left - 12.0 if on_left else right + 12.0
        anchor = "end" if on_left else "start"
        lines.append(
            f'<polyline class="config" fill="none" stroke="black" stroke-width="1" '
            f'points="{_fmt(cx)},{_fmt(axis_y)} {_fmt(cx)},{_fmt(label_y - 4)} '
            f'{_fmt(label_x)},{_fmt(label_y - 4)}"/>'
        )
        name = diagram.config_names[idx]
        lines.append(
            f'<text x="{_fmt(label_x)}" y="{_fmt(label_y)}" text-anchor="{anchor}">'
            f"{_escape(name)} ({_fmt(rank)})</text>"
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def diagram_summary(diagram: CDDiagram) -> dict:
    """JSON-ready sidecar: ranks, the global test, and all pairwise results."""
    return {
        "alpha": diagram.alpha,
        "avg_ranks": {
            name: float(rank)
            for name, rank in zip(diagram.config_names, diagram.avg_ranks)
        },
        "friedman": {
            "statistic": diagram.friedman_statistic,
            "p_value": diagram.friedman_p,
            "rejected": diagram.friedman_rejected,
        },
        "pairs": [
            {
                "a": diagram.config_names[p.a],
                "b": diagram.config_names[p.b],
                "p_raw": p.p_raw,
                "p_adjusted": p.p_adjusted,
                "significant": p.significant,
            }
            for p in diagram.pairwise
        ],
        "cliques": [
            [diagram.config_names[i] for i in clique] for clique in diagram.cliques
        ],
    }
