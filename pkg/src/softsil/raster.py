"""Soft silhouette rasterization.

Every pixel's coverage is the T-conorm fold, in ascending face-index
order, of per-face occlusion probabilities ``cdf(d(pixel, face) / tau)``.
Pixel centers sit at (i + 0.5, j + 0.5).

For speed a face only touches the pixels inside its bounding box
expanded by a culling margin: the distance at which the configured CDF
drops below 1e-6 (found by numeric inversion, capped at the image
diagonal).  Skipped contributions are below that threshold, and folding
an exact 0 is a no-op thanks to the neutral element, so culled renders
agree with the unculled computation to ~1e-6 per face.  Culling can be
switched off per config (the finite-difference verifier does this).

Faces are batched by similar rect size so that one stretched face does
not inflate the padded workspace of every other face; the batching is
invisible to callers and does not affect fold order.

Renders are bitwise deterministic: per-face distance evaluation is
batched, the fold order over faces is fixed, and all per-pixel
arithmetic is elementwise.

Zero-area screen triangles would rasterize via the surrogate distance
-1e30 (zero occupancy under every CDF); they are skipped outright,
which folds the same value.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, cull_cutoff
from .errors import ConfigurationError
from .geometry import triangle_distances_batch
from .tconorms import TConormSpec, _apply as _tconorm_apply, \
    _partials as _tconorm_partials, tconorm_branch

DEGENERATE_DISTANCE = -1e30
CULL_THRESHOLD = 1e-6


@dataclass(frozen=True)
class RenderConfig:
    """Everything the rasterizer needs besides the screen mesh."""

    distribution: DistributionSpec
    tconorm: TConormSpec
    tau: float
    width: int = 64
    height: int = 64
    depth_softmin_tau: float | None = None
    cull: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("image size must be at least 1x1")
        if self.depth_softmin_tau is not None and not self.depth_softmin_tau > 0:
            raise ConfigurationError("depth_softmin_tau must be positive")


@dataclass
class Image:
    """Grayscale image with float values in [0, 1], row-major."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(
            self.height, self.width)

    @classmethod
    def zeros(cls, width, height):
        return cls(width, height, np.zeros((height, width)))


class Batch:
    """One similarly-sized group of face contributions, padded together."""

    __slots__ = ("positions", "pad_h", "pad_w", "distances", "values",
                 "valid", "aux")

    def __init__(self, positions, pad_h, pad_w):
        self.positions = positions  # indices into the active-face list
        self.pad_h = pad_h
        self.pad_w = pad_w


class Contributions:
    """Batched per-face rasterization state shared by forward/backward.

    Active faces (non-degenerate, rect overlapping the image) are listed
    in ascending face order; their pixel data live in size-grouped
    batches.  ``locator[k] = (batch_index, row)`` finds face k's rows.
    """

    __slots__ = ("face_indices", "x0", "y0", "rect_w", "rect_h",
                 "batches", "locator", "prefixes", "n_total_faces")

    def __init__(self):
        self.face_indices = np.zeros(0, dtype=np.int64)
        self.batches = []
        self.locator = []
        self.prefixes = None
        self.n_total_faces = 0

    def __len__(self):
        return len(self.face_indices)

    def rect_values(self, k):
        """2-D rect view of face k's occlusion probabilities."""
        b, row = self.locator[k]
        batch = self.batches[b]
        return batch.values[row].reshape(batch.pad_h, batch.pad_w)[
            :self.rect_h[k], :self.rect_w[k]]

    def rect_slice(self, k):
        return (slice(self.y0[k], self.y0[k] + self.rect_h[k]),
                slice(self.x0[k], self.x0[k] + self.rect_w[k]))


_MARGIN_CACHE = {}


def cull_margin_pixels(config):
    """Pixel margin beyond which a face's contribution stays below the
    culling threshold.  None disables culling (full-image rects)."""
    if not config.cull:
        return None
    key = (config.distribution, config.tau, config.width, config.height)
    cached = _MARGIN_CACHE.get(key)
    if cached is not None:
        return cached
    diag = float(np.hypot(config.width, config.height)) + 2.0
    cutoff = cull_cutoff(config.distribution, CULL_THRESHOLD,
                         search_limit=max(10.0, 2.0 * diag / config.tau))
    margin = min(max(0.0, -cutoff * config.tau), diag)
    if len(_MARGIN_CACHE) > 4096:
        _MARGIN_CACHE.clear()
    _MARGIN_CACHE[key] = margin
    return margin


def _rect_groups(rect_h, rect_w, slack=1.4, pad=4):
    """Partition row indices into groups of similar rect size; padding a
    group to its own max then wastes little elementwise work."""
    order = np.lexsort((rect_w, rect_h))
    groups = []
    start = 0
    while start < len(order):
        h0 = rect_h[order[start]]
        w0 = rect_w[order[start]]
        end = start + 1
        while end < len(order):
            k = order[end]
            if rect_h[k] > slack * h0 + pad or rect_w[k] > slack * w0 + pad:
                break
            w0 = max(w0, rect_w[k])
            end += 1
        sel = np.sort(order[start:end])
        groups.append((sel, int(rect_h[sel].max()), int(rect_w[sel].max())))
        start = end
    return groups


def _gather_contributions(screen_mesh, config, *, need_aux):
    """Compute distances and occlusion probabilities for all active faces."""
    width, height = config.width, config.height
    margin = cull_margin_pixels(config)
    tris = screen_mesh.positions[screen_mesh.faces]  # (F, 3, 2)
    out = Contributions()
    out.n_total_faces = screen_mesh.n_faces
    if len(tris) == 0:
        return out

    v01 = tris[:, 1, :] - tris[:, 0, :]
    v02 = tris[:, 2, :] - tris[:, 0, :]
    area2 = v01[:, 0] * v02[:, 1] - v01[:, 1] * v02[:, 0]

    if margin is None:
        x0 = np.zeros(len(tris), dtype=np.int64)
        y0 = np.zeros(len(tris), dtype=np.int64)
        x1 = np.full(len(tris), width, dtype=np.int64)
        y1 = np.full(len(tris), height, dtype=np.int64)
    else:
        mins = tris.min(axis=1)
        maxs = tris.max(axis=1)
        x0 = np.maximum(0, np.ceil(mins[:, 0] - margin - 0.5).astype(np.int64))
        y0 = np.maximum(0, np.ceil(mins[:, 1] - margin - 0.5).astype(np.int64))
        x1 = np.minimum(width, np.floor(maxs[:, 0] + margin - 0.5).astype(np.int64) + 1)
        y1 = np.minimum(height, np.floor(maxs[:, 1] + margin - 0.5).astype(np.int64) + 1)

    active = (area2 != 0.0) & (x1 > x0) & (y1 > y0)
    idx = np.nonzero(active)[0]
    if len(idx) == 0:
        return out

    out.face_indices = idx
    out.x0 = x0[idx]
    out.y0 = y0[idx]
    out.rect_w = (x1 - x0)[idx]
    out.rect_h = (y1 - y0)[idx]
    out.locator = [None] * len(idx)

    for b, (sel, gh, gw) in enumerate(_rect_groups(out.rect_h, out.rect_w)):
        batch = Batch(sel, gh, gw)
        cols = np.arange(gw)
        rows = np.arange(gh)
        px = out.x0[sel][:, None] + 0.5 + np.tile(cols, gh)[None, :]
        py = out.y0[sel][:, None] + 0.5 + np.repeat(rows, gw)[None, :]
        pixels = np.stack([px, py], axis=2)  # (Kb, gh*gw, 2)
        valid = ((np.tile(cols, gh)[None, :] < out.rect_w[sel][:, None])
                 & (np.repeat(rows, gw)[None, :] < out.rect_h[sel][:, None]))
        d, aux = triangle_distances_batch(pixels, tris[idx[sel]],
                                          need_aux=need_aux)
        vals = np.clip(config.distribution.cdf(d / config.tau), 0.0, 1.0)
        batch.distances = d
        batch.values = np.where(valid, vals, 0.0)
        batch.valid = valid
        batch.aux = aux if need_aux else None
        out.batches.append(batch)
        for row, k in enumerate(sel):
            out.locator[k] = (b, row)
    return out


def render_silhouette(screen_mesh, config, *, tape=False):
    """Render the soft coverage image.

    With ``tape=True`` also returns the forward record needed by the
    gradient module: ``(Image, Contributions, branch_codes)``.
    """
    spec = config.tconorm
    averaging = spec.family == "average"
    contrib = _gather_contributions(screen_mesh, config, need_aux=tape)
    acc = np.zeros((config.height, config.width))
    prefixes = [] if tape else None

    for k in range(len(contrib)):
        sl = contrib.rect_slice(k)
        vals = contrib.rect_values(k)
        prefix = acc[sl]
        if tape:
            prefixes.append(np.array(prefix, copy=True))
        if averaging:
            acc[sl] = prefix + vals
        else:
            acc[sl] = np.clip(_tconorm_apply(spec, prefix, vals), 0.0, 1.0)

    if averaging and screen_mesh.n_faces > 0:
        acc /= screen_mesh.n_faces
    image = Image(config.width, config.height, np.clip(acc, 0.0, 1.0))
    if not tape:
        return image

    contrib.prefixes = prefixes
    branch_codes = _branch_fingerprint(config, contrib, prefixes)
    return image, contrib, branch_codes


def _branch_fingerprint(config, contrib, prefixes):
    """Structured branch codes of the forward pass, used by the
    finite-difference verifier to detect kink crossings.  See
    :func:`branches_cross_kink` for what counts as a kink.

    Only meaningful with culling disabled (single full-image batch);
    the verifier renders that way.
    """
    if not len(contrib):
        return None
    edge = np.concatenate([b.aux["edge"].ravel() for b in contrib.batches])
    clamp = np.concatenate([b.aux["clamp"].ravel() for b in contrib.batches])
    piece = np.concatenate([
        config.distribution.piece(b.distances / config.tau).ravel()
        for b in contrib.batches])
    fold = None
    if config.tconorm.family in ("max", "yager"):
        rows = []
        for k in range(len(contrib)):
            rows.append(tconorm_branch(config.tconorm, prefixes[k],
                                       contrib.rect_values(k)).ravel())
        fold = np.concatenate(rows)
    return {"edge": edge, "clamp": clamp, "piece": piece, "fold": fold}


def branches_cross_kink(lo, hi):
    """True when two branch fingerprints straddle a non-smooth switch.

    Kinks: CDF piece-index changes, fold branch changes (max argmax /
    Yager plateau), and active-edge switches through the triangle
    interior.  Benign (C1) transitions: projection-parameter clamping
    on one edge, and edge switches whose closest feature is the shared
    corner (end-clamped on one edge <-> start-clamped on the next).
    """
    if (lo is None) != (hi is None):
        return True
    if lo is None:
        return False
    if lo["edge"].shape != hi["edge"].shape:
        return True
    if np.any(lo["piece"] != hi["piece"]):
        return True
    if (lo["fold"] is None) != (hi["fold"] is None):
        return True
    if lo["fold"] is not None and (lo["fold"].shape != hi["fold"].shape
                                   or np.any(lo["fold"] != hi["fold"])):
        return True
    switched = lo["edge"] != hi["edge"]
    if not np.any(switched):
        return False
    e_lo = lo["edge"][switched].astype(np.int64)
    e_hi = hi["edge"][switched].astype(np.int64)
    c_lo = lo["clamp"][switched]
    c_hi = hi["clamp"][switched]
    shared_fwd = (e_hi == (e_lo + 1) % 3) & (c_lo == 2) & (c_hi == 1)
    shared_bwd = (e_lo == (e_hi + 1) % 3) & (c_hi == 2) & (c_lo == 1)
    return not np.all(shared_fwd | shared_bwd)


def backpropagate_image_gradient(config, contrib, grad_image):
    """Given d(loss)/d(image), return per-batch d(loss)/d(values) arrays
    aligned with each batch's ``values``.

    Walks the fold in reverse, maintaining the running product of
    d(tconorm)/d(accumulator) per pixel.
    """
    spec = config.tconorm
    averaging = spec.family == "average"
    grads = [np.zeros_like(b.values) for b in contrib.batches]
    suffix = np.array(grad_image, dtype=np.float64, copy=True)
    for k in range(len(contrib) - 1, -1, -1):
        b, row = contrib.locator[k]
        batch = contrib.batches[b]
        sl = contrib.rect_slice(k)
        h, w = contrib.rect_h[k], contrib.rect_w[k]
        dest = grads[b][row].reshape(batch.pad_h, batch.pad_w)
        if averaging:
            dest[:h, :w] = grad_image[sl] / max(1, contrib.n_total_faces)
            continue
        vals = contrib.rect_values(k)
        prefix = contrib.prefixes[k]
        da, db = _tconorm_partials(spec, prefix, vals)
        da = np.where(vals <= 0.0, 1.0, da)
        db = np.where(prefix <= 0.0, 1.0, db)
        s_rect = suffix[sl]
        dest[:h, :w] = s_rect * db
        suffix[sl] = s_rect * da
    return grads


def hard_render(screen_mesh, width, height):
    """Binary coverage: a pixel is on iff some face's signed distance is
    >= 0 (boundary counts as covered).  Logical-or aggregation."""
    acc = np.zeros((height, width), dtype=bool)
    tris = screen_mesh.positions[screen_mesh.faces]
    for fi in range(len(tris)):
        tri = tris[fi]
        v01 = tri[1] - tri[0]
        v02 = tri[2] - tri[0]
        if v01[0] * v02[1] - v01[1] * v02[0] == 0.0:
            continue
        x0 = max(0, int(np.ceil(tri[:, 0].min() - 0.5)))
        x1 = min(width, int(np.floor(tri[:, 0].max() - 0.5)) + 1)
        y0 = max(0, int(np.ceil(tri[:, 1].min() - 0.5)))
        y1 = min(height, int(np.floor(tri[:, 1].max() - 0.5)) + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = np.arange(x0, x1) + 0.5
        ys = np.arange(y0, y1) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        pixels = np.stack([gx.ravel(), gy.ravel()], axis=1)
        d, _ = triangle_distances_batch(pixels[None], tri[None],
                                        need_aux=False)
        acc[y0:y1, x0:x1] |= (d[0] >= 0.0).reshape(y1 - y0, x1 - x0)
    return Image(width, height, acc.astype(np.float64))


def render_depth_aggregated(screen_mesh, config, face_values):
    """Blend one scalar value per face using occupancy-masked softmin
    depth weights.

    Blending formula (the module's one free choice, documented here):

        weight_f(pixel) = occupancy_f(pixel) * softmin_f(centroid depths)
        result(pixel)   = sum_f weight_f(pixel) * value_f

    The residual weight 1 - sum_f weight_f implicitly blends the
    background value 0, so a single fully-occupying face reproduces its
    value exactly and coincident-depth faces share weight equally.
    """
    if config.depth_softmin_tau is None:
        raise ConfigurationError("depth_softmin_tau is required for depth aggregation")
    face_values = np.asarray(face_values, dtype=np.float64).reshape(-1)
    if len(face_values) != screen_mesh.n_faces:
        raise ConfigurationError("need exactly one value per face")
    if screen_mesh.n_faces == 0:
        return Image.zeros(config.width, config.height)

    depths = screen_mesh.depths[screen_mesh.faces].mean(axis=1)
    z = (depths - depths.min()) / config.depth_softmin_tau
    with np.errstate(under="ignore"):
        softmin = np.exp(-z)
    softmin /= softmin.sum()

    contrib = _gather_contributions(screen_mesh, config, need_aux=False)
    acc = np.zeros((config.height, config.width))
    for k in range(len(contrib)):
        fi = contrib.face_indices[k]
        acc[contrib.rect_slice(k)] += contrib.rect_values(k) \
            * (softmin[fi] * face_values[fi])
    return Image(config.width, config.height, acc)
