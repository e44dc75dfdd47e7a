"""Distance geometry of co-production: affinity and distance matrices,
Euclidean embedding, Ward agglomeration, threshold cuts and the
log-rescaled integration measure derived from merge heights.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import EmptyUnion, InvalidH0, MissingEntity

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import CountTable

# Candidate merges whose squared criterion is within this absolute slack of
# the minimum are treated as tied and broken deterministically.
MERGE_TIE_EPS = 1e-12

# Eigenvalues below -EMBED_CLAMP_REL * lambda_max mark a non-embeddable
# matrix; anything negative is clamped to zero either way.
EMBED_CLAMP_REL = 1e-9

# Auto ceiling for the log rescaling: just above the tallest merge.
H0_AUTO_REL = 1e-6
H0_AUTO_ABS = 1e-9

_FMT = "%.6g"


def affinity(n_x: int, n_y: int, n_xy: int) -> float:
    """Overlap of two entities' production: n_xy / (n_x + n_y - n_xy).

    ``n_xy`` counts works produced jointly, so it can never exceed either
    marginal count. Raises EmptyUnion when both entities produced nothing.
    """
    if n_x < 0 or n_y < 0 or n_xy < 0:
        raise ValueError("counts must be non-negative")
    if n_xy > min(n_x, n_y):
        raise ValueError("joint count exceeds a marginal count")
    union = n_x + n_y - n_xy
    if union <= 0:
        raise EmptyUnion("affinity undefined: no works in the union")
    return n_xy / union


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric matrix of pairwise distances in [0, 1], zero diagonal."""

    entities: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        n = len(self.entities)
        if v.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {v.shape}")
        if len(set(self.entities)) != n:
            raise ValueError("entity names must be unique")
        if not np.array_equal(v, v.T):
            raise ValueError("matrix must be symmetric")
        if np.any(np.diagonal(v) != 0.0):
            raise ValueError("diagonal must be zero")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("distances must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return len(self.entities)

    def index_of(self, entity: str) -> int:
        try:
            return self.entities.index(entity)
        except ValueError:
            raise MissingEntity(entity) from None

    def pair(self, a: str, b: str) -> float:
        return float(self.values[self.index_of(a), self.index_of(b)])


def distance_matrix(table: "CountTable", entities: Sequence[str]) -> DistanceMatrix:
    """Jaccard distance matrix (1 - affinity) over the given entities.

    Counts come from a completed CountTable; entity order is preserved so
    downstream leaf indices stay aligned with the caller's selection.
    """
    ents = tuple(entities)
    n = len(ents)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            a = affinity(
                table.unary.get(ents[i], 0),
                table.unary.get(ents[j], 0),
                table.pair_count(ents[i], ents[j]),
            )
            values[i, j] = values[j, i] = 1.0 - a
    return DistanceMatrix(ents, values)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Coordinates realizing a distance matrix, anchored at the first entity.

    Row i of ``coordinates`` is the position of entity i; the first row is
    the origin. ``eigenvalues`` are the spectrum of the anchored Gram
    matrix in descending order, before clamping. ``embeddable`` is False
    when a significantly negative eigenvalue had to be clamped, i.e. the
    input distances are not exactly Euclidean.
    """

    entities: tuple[str, ...]
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    embeddable: bool

    def pairwise_distances(self) -> np.ndarray:
        diff = self.coordinates[:, None, :] - self.coordinates[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


def euclidean_embedding(dm: DistanceMatrix) -> Embedding:
    """Embed a distance matrix in Euclidean space via its anchored Gram form.

    G_ij = (d(1,j)^2 + d(i,1)^2 - d(i,j)^2) / 2 is the Gram matrix of the
    points relative to entity 1, so an eigendecomposition G = P L P^T gives
    coordinates P sqrt(L). Negative eigenvalues (curvature the plane cannot
    hold) are clamped to zero.
    """
    sq = dm.values**2
    gram = (sq[0, :][None, :] + sq[:, 0][:, None] - sq) / 2.0
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    lam_max = max(float(evals[0]), 0.0) if evals.size else 0.0
    embeddable = bool(evals.size == 0 or evals[-1] >= -EMBED_CLAMP_REL * lam_max)
    coords = evecs * np.sqrt(np.clip(evals, 0.0, None))[None, :]
    return Embedding(dm.entities, coords, evals, embeddable)


@dataclass(frozen=True)
class Merge:
    """One agglomeration step: node ids of the two children, the merge
    height, and the size of the resulting cluster."""

    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Full agglomeration history over ``entities``.

    Node ids follow the usual convention: leaves are 0..n-1 in entity
    order, merge k creates node n+k, the root is 2n-2. Heights are
    non-decreasing along the merge sequence.
    """

    entities: tuple[str, ...]
    merges: tuple[Merge, ...]

    def __post_init__(self) -> None:
        n = len(self.entities)
        if len(self.merges) != n - 1:
            raise ValueError(f"{n} leaves need {n - 1} merges, got {len(self.merges)}")
        consumed: set[int] = set()
        prev = 0.0
        for k, m in enumerate(self.merges):
            node = n + k
            for child in (m.left, m.right):
                if not 0 <= child < node:
                    raise ValueError(f"merge {k} references node {child} out of range")
                if child in consumed:
                    raise ValueError(f"node {child} consumed twice")
                consumed.add(child)
            if m.height < prev - 1e-9:
                raise ValueError("merge heights must be non-decreasing")
            prev = max(prev, m.height)

    @property
    def n_leaves(self) -> int:
        return len(self.entities)

    @property
    def heights(self) -> tuple[float, ...]:
        return tuple(m.height for m in self.merges)

    def subtree_leaves(self) -> list[list[int]]:
        """Leaf index lists for every node id, in node id order."""
        n = self.n_leaves
        leaves: list[list[int]] = [[i] for i in range(n)]
        for m in self.merges:
            leaves.append(leaves[m.left] + leaves[m.right])
        return leaves

    def leaf_order(self) -> list[int]:
        """Leaf indices in left-to-right display order."""
        n = self.n_leaves
        if n == 1:
            return [0]
        order: list[int] = []
        stack = [2 * n - 2]
        while stack:
            node = stack.pop()
            if node < n:
                order.append(node)
            else:
                m = self.merges[node - n]
                stack.append(m.right)
                stack.append(m.left)
        return order


def ward_cluster(dm: DistanceMatrix) -> Dendrogram:
    """Agglomerate by Ward's minimum-variance criterion on squared distances.

    The pairwise criterion is updated with the Lance-Williams recurrence
    (alpha_i = (n_i + n_k) / (n_i + n_j + n_k), beta = -n_k / (n_i + n_j + n_k)),
    and the recorded height is the square root of the minimal squared
    criterion, so two singletons merge at exactly their input distance.
    Ties within MERGE_TIE_EPS of the minimum are broken toward the pair
    whose (smallest leaf, partner's smallest leaf) index pair sorts first,
    which makes the result independent of accumulation order.
    """
    n = dm.size
    if n < 2:
        raise ValueError("clustering needs at least 2 entities")
    total = 2 * n - 1
    d2 = np.zeros((total, total))
    d2[:n, :n] = dm.values**2
    sizes = np.zeros(total, dtype=int)
    sizes[:n] = 1
    reps = list(range(total))  # smallest leaf index inside each node
    active = list(range(n))
    merges: list[Merge] = []
    for step in range(n - 1):
        best = math.inf
        for ia, a in enumerate(active):
            for b in active[ia + 1 :]:
                if d2[a, b] < best:
                    best = d2[a, b]
        pick: tuple[int, int] | None = None
        pick_key: tuple[int, int] | None = None
        for ia, a in enumerate(active):
            for b in active[ia + 1 :]:
                if d2[a, b] <= best + MERGE_TIE_EPS:
                    lo, hi = sorted((a, b), key=lambda node: reps[node])
                    key = (reps[lo], reps[hi])
                    if pick_key is None or key < pick_key:
                        pick_key = key
                        pick = (lo, hi)
        assert pick is not None
        a, b = pick
        new = n + step
        height = math.sqrt(max(d2[a, b], 0.0))
        nab = sizes[a] + sizes[b]
        for c in active:
            if c == a or c == b:
                continue
            val = (
                (sizes[a] + sizes[c]) * d2[a, c]
                + (sizes[b] + sizes[c]) * d2[b, c]
                - sizes[c] * d2[a, b]
            ) / (nab + sizes[c])
            d2[new, c] = d2[c, new] = val
        sizes[new] = nab
        reps[new] = reps[a]
        active.remove(a)
        active.remove(b)
        active.append(new)
        merges.append(Merge(left=a, right=b, height=height, size=int(nab)))
    return Dendrogram(dm.entities, tuple(merges))


@dataclass(frozen=True)
class ClusterCut:
    """Flat clustering induced by removing merges at or above a threshold.

    ``n_clusters`` is the count of removed merges plus one; labels are
    1-based and assigned in order of each cluster's first entity.
    """

    threshold: float
    assignment: dict[str, int]
    n_clusters: int


def cut_clusters(dendrogram: Dendrogram, h_star: float) -> ClusterCut:
    """Cut the tree at ``h_star``: merges with height >= h_star are undone."""
    n = dendrogram.n_leaves
    removed = sum(1 for h in dendrogram.heights if h >= h_star)
    n_clusters = removed + 1
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    leaves = dendrogram.subtree_leaves()
    for m in dendrogram.merges:
        if m.height < h_star:
            ra, rb = find(leaves[m.left][0]), find(leaves[m.right][0])
            if ra != rb:
                parent[rb] = ra
    labels: dict[int, int] = {}
    assignment: dict[str, int] = {}
    for i, entity in enumerate(dendrogram.entities):
        root = find(i)
        if root not in labels:
            labels[root] = len(labels) + 1
        assignment[entity] = labels[root]
    return ClusterCut(threshold=h_star, assignment=assignment, n_clusters=n_clusters)


@dataclass(frozen=True)
class IcdResult:
    """Log-rescaled merge heights and their summary statistics."""

    h0: float
    rescaled: tuple[float, ...]
    mean: float
    median: float


def icd(dendrogram: Dendrogram, h0: float | str = "auto") -> IcdResult:
    """Integration measure of a dendrogram: mean of -ln(h0 - h_k).

    The ceiling ``h0`` must exceed every merge height. "auto" places it
    just above the tallest merge; passing 1.0 reproduces the classical
    normalization for trees whose heights stay below one, and raises
    InvalidH0 otherwise.
    """
    heights = dendrogram.heights
    h_max = max(heights)
    if h0 == "auto":
        ceiling = h_max * (1.0 + H0_AUTO_REL) + H0_AUTO_ABS
    else:
        ceiling = float(h0)
        if ceiling <= h_max:
            raise InvalidH0(f"h0={ceiling} must exceed the tallest merge {h_max}")
    rescaled = tuple(-math.log(ceiling - h) for h in heights)
    return IcdResult(
        h0=ceiling,
        rescaled=rescaled,
        mean=statistics.fmean(rescaled),
        median=statistics.median(rescaled),
    )


def to_newick(dendrogram: Dendrogram) -> str:
    """Serialize the tree in Newick format with branch lengths.

    A child's branch length is its parent's height minus its own height
    (leaves sit at height zero), so path lengths reproduce merge heights.
    """
    n = dendrogram.n_leaves

    def node_height(node: int) -> float:
        return 0.0 if node < n else dendrogram.merges[node - n].height

    def render(node: int, parent_height: float) -> str:
        length = _FMT % (parent_height - node_height(node))
        if node < n:
            return f"{dendrogram.entities[node]}:{length}"
        m = dendrogram.merges[node - n]
        inner = f"({render(m.left, m.height)},{render(m.right, m.height)})"
        return f"{inner}:{length}"

    root = dendrogram.merges[-1]
    left = render(root.left, root.height)
    right = render(root.right, root.height)
    return f"({left},{right});"


def merges_to_json(dendrogram: Dendrogram) -> str:
    """JSON document of the merge list, suitable for replotting elsewhere."""
    doc = {
        "schema": 1,
        "leaves": list(dendrogram.entities),
        "merges": [
            {
                "left": m.left,
                "right": m.right,
                "height": float(_FMT % m.height),
                "size": m.size,
            }
            for m in dendrogram.merges
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def distance_matrix_to_csv(dm: DistanceMatrix) -> str:
    """Lower-triangle CSV of a distance matrix, one row per pair."""
    lines = ["entity_a,entity_b,distance"]
    for i in range(1, dm.size):
        for j in range(i):
            lines.append(
                f"{dm.entities[i]},{dm.entities[j]},{_FMT % dm.values[i, j]}"
            )
    return "\n".join(lines) + "\n"


def rescaled_distance(distance: float) -> float:
    """Map a distance in [0, 1) onto the unbounded scale -ln(1 - D)."""
    if not 0.0 <= distance < 1.0:
        raise ValueError("rescaling needs a distance in [0, 1)")
    return -math.log1p(-distance)


def pooled_rescaled_heights(results: Iterable[IcdResult]) -> list[float]:
    """Concatenate rescaled heights from several trees (for density plots)."""
    pooled: list[float] = []
    for r in results:
        pooled.extend(r.rescaled)
    return pooled
