"""Agglomerative clustering and cluster-quality scoring."""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist

from ..errors import InvalidInput


def ward_cluster(points, k):
    """Ward minimum-variance agglomerative clustering into k groups.

    Labels are renumbered 0..k-1 in order of first appearance so the
    output is deterministic for a fixed input ordering.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if k < 1 or k > n:
        raise InvalidInput(f"k={k} outside 1..{n}")
    if k == n:
        return np.arange(n)
    z = linkage(points, method="ward")
    raw = fcluster(z, t=k, criterion="maxclust")
    labels = np.empty(n, dtype=int)
    seen = {}
    for i, lab in enumerate(raw):
        if lab not in seen:
            seen[lab] = len(seen)
        labels[i] = seen[lab]
    return labels


def silhouette(points, labels):
    """Mean silhouette coefficient over all points, in [-1, 1]."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise InvalidInput("silhouette requires at least 2 clusters")
    dist = cdist(points, points)
    n = points.shape[0]
    scores = np.zeros(n)
    masks = {lab: labels == lab for lab in uniq}
    for i in range(n):
        own = masks[labels[i]]
        n_own = own.sum()
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (n_own - 1)
        b = np.inf
        for lab in uniq:
            if lab == labels[i]:
                continue
            other = masks[lab]
            b = min(b, dist[i, other].mean())
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())
