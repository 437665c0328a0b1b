"""Contours of binary masks, post-filter rules and best-fit ellipses.

Point convention: boundary points and centers are (x, y) pairs with x =
column and y = row.  Orientations are measured anticlockwise from the
frame's bottom border (the visual convention with y flipped up), wrapped
to [0, pi).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError

# 8-neighborhood in clockwise order starting North, as (row, col) offsets.
_CLOCKWISE = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
_OFFSET_INDEX = {off: i for i, off in enumerate(_CLOCKWISE)}

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

DEFAULT_MIN_AREA_FACTOR = 0.1
DEFAULT_MARGIN_FACTOR = 0.05


@dataclass
class Contour:
    """Outer boundary and filled region of one connected component."""

    boundary: np.ndarray  # (n, 2) float64 (x, y) pixel coordinates
    mask: np.ndarray      # (h, w) bool, filled region (holes included)
    area: int             # filled pixel count

    def __post_init__(self):
        if self.area <= 0:
            raise DataError("contour area must be positive")


@dataclass(frozen=True)
class EllipseFit:
    center: tuple          # (cx, cy) pixels
    semi_axes: tuple       # (major, minor) pixels, major >= minor > 0
    orientation: float     # radians, anticlockwise from bottom border, [0, pi)


@dataclass(frozen=True)
class EllipseFeatures:
    """Identification features: normalized horizontal position and angle."""

    x: float      # in [0, 1]
    theta: float  # radians in [0, pi]

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise DataError(f"x must be in [0,1], got {self.x}")
        if not 0.0 <= self.theta <= math.pi:
            raise DataError(f"theta must be in [0,pi], got {self.theta}")


def _trace_boundary(component):
    """Moore-neighbor trace of one padded component, clockwise pixel centers.

    The walk state is (pixel, backtrack); tracing stops when a state repeats,
    which terminates on every shape including one-pixel-thick spurs where the
    classic stopping criterion loops.
    """
    rows, cols = np.nonzero(component)
    start = (int(rows[0]), int(cols[0]))  # row-major scan: topmost, then leftmost
    back = (start[0], start[1] - 1)       # west neighbor, background by construction

    boundary = [start]
    seen = set()
    current = start
    while (current, back) not in seen:
        seen.add((current, back))
        at = _OFFSET_INDEX[(back[0] - current[0], back[1] - current[1])]
        nxt = None
        for step in range(1, 9):
            dr, dc = _CLOCKWISE[(at + step) % 8]
            cand = (current[0] + dr, current[1] + dc)
            if component[cand]:
                nxt = cand
                break
            back = cand
        if nxt is None:
            break  # isolated pixel
        boundary.append(nxt)
        current = nxt
    if len(boundary) > 1 and boundary[-1] == boundary[0]:
        boundary.pop()
    return boundary


def extract_contours(mask):
    """One contour per 8-connected component of 1-pixels, outer boundary only."""
    mask = np.asarray(mask).astype(bool)
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    contours = []
    for i, slc in enumerate(ndimage.find_objects(labels, count), start=1):
        component = np.pad(labels[slc] == i, 1, constant_values=False)
        trace = _trace_boundary(component)
        r0 = slc[0].start - 1
        c0 = slc[1].start - 1
        boundary = np.array([(c + c0, r + r0) for r, c in trace], dtype=np.float64)

        filled = np.zeros(mask.shape, dtype=bool)
        filled[slc] = ndimage.binary_fill_holes(labels[slc] == i)
        contours.append(Contour(boundary=boundary, mask=filled, area=int(filled.sum())))
    return contours


def filter_contours(contours, frame_size, min_area_factor=DEFAULT_MIN_AREA_FACTOR,
                    margin_factor=DEFAULT_MARGIN_FACTOR):
    """Post-processing rules: keep plausible hand contours, at most 3.

    A contour survives when some boundary point lies within
    ``margin_factor * min(w, h)`` of the left, bottom or right border (hands
    enter the frame there) and its filled area is at least
    ``(min_area_factor * w)**2``.  The 3 largest survivors are returned in
    descending area order.
    """
    w, h = frame_size
    margin = margin_factor * min(w, h)
    min_area = (min_area_factor * w) ** 2

    kept = []
    for contour in contours:
        if contour.area < min_area:
            continue
        xs, ys = contour.boundary[:, 0], contour.boundary[:, 1]
        near_border = (
            xs.min() <= margin
            or xs.max() >= (w - 1) - margin
            or ys.max() >= (h - 1) - margin
        )
        if near_border:
            kept.append(contour)
    kept.sort(key=lambda c: -c.area)
    return kept[:3]


def fit_ellipse(points):
    """Direct least-squares ellipse fit (Halir/Flusser formulation).

    ``points`` is a Contour or an (n, 2) array of (x, y) boundary points;
    at least 6 points are required and they must not be (near-)collinear.
    """
    if isinstance(points, Contour):
        points = points.boundary
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 6:
        raise DataError("degenerate contour: ellipse fit needs >= 6 boundary points")

    mean = pts.mean(axis=0)
    x = pts[:, 0] - mean[0]
    y = pts[:, 1] - mean[1]

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise DataError("degenerate contour: singular scatter matrix") from exc
    m = s1 + s2 @ t
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])

    eigvals, eigvecs = np.linalg.eig(m)
    if np.iscomplexobj(eigvecs):
        if np.abs(eigvecs.imag).max() > 1e-9:
            raise DataError("degenerate contour: no real ellipse solution")
        eigvecs = eigvecs.real
    cond = 4.0 * eigvecs[0] * eigvecs[2] - eigvecs[1] ** 2
    candidates = np.nonzero(cond > 0)[0]
    if len(candidates) == 0:
        raise DataError("degenerate contour: no ellipse satisfies the constraint")
    a1 = eigvecs[:, candidates[0]]
    conic = np.concatenate([a1, t @ a1])

    # Undo the centroid shift: substitute x -> x - mx, y -> y - my.
    A, B, C, D, E, F = conic
    mx, my = mean
    D2_ = D - 2 * A * mx - B * my
    E2_ = E - B * mx - 2 * C * my
    F2_ = F + A * mx * mx + B * mx * my + C * my * my - D * mx - E * my
    return _conic_to_ellipse(A, B, C, D2_, E2_, F2_)


def _conic_to_ellipse(A, B, C, D, E, F):
    if A + C < 0:  # conics are sign-free; make the quadratic part positive-definite
        A, B, C, D, E, F = -A, -B, -C, -D, -E, -F
    m2 = np.array([[A, B / 2.0], [B / 2.0, C]])
    if np.linalg.det(m2) <= 0:
        raise DataError("degenerate contour: conic is not an ellipse")
    center = -0.5 * np.linalg.solve(m2, np.array([D, E]))
    f0 = F + 0.5 * (D * center[0] + E * center[1])

    eigvals, eigvecs = np.linalg.eigh(m2)
    axes_sq = -f0 / eigvals
    if axes_sq.min() <= 0:
        raise DataError("degenerate contour: non-positive axis")
    axes = np.sqrt(axes_sq)
    # eigh sorts ascending, so column 0 pairs with the larger (major) axis.
    major_vec = eigvecs[:, 0]
    orientation = math.atan2(-major_vec[1], major_vec[0]) % math.pi
    return EllipseFit(
        center=(float(center[0]), float(center[1])),
        semi_axes=(float(axes[0]), float(axes[1])),
        orientation=float(orientation),
    )


def extract_features(ellipse, frame_size):
    """Map an ellipse fit to the (x, theta) identification features."""
    w, _ = frame_size
    cx = min(max(ellipse.center[0], 0.0), float(w))
    return EllipseFeatures(x=cx / w, theta=ellipse.orientation)
