"""Trajectory reconstruction and evaluation: ATE with rigid alignment,
relative pose error, drift averaged over 100..800 m sub-sequences, and the
glimpse information fraction.

Alignment is rigid (rotation + translation, scale fixed at 1): monocular
scale is part of what is being evaluated.  Segment averages weight segments
equally within a length and lengths equally overall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .glimpse import PIXELS_PER_GLIMPSE
from .pose import Pose6DoF, PoseSE3, pose6dof_to_se3, rotation_angle

DRIFT_LENGTHS = tuple(range(100, 801, 100))


@dataclass
class DriftReport:
    t_rpe: float       # translational drift, %
    r_rpe: float       # rotational drift, deg per 100 m
    ate: float         # absolute trajectory error RMSE, m
    n_segments: int = 0
    degenerate_alignment: bool = False


def accumulate(relatives):
    """Compose relative 6-DoF motions into a trajectory starting at identity."""
    traj = [PoseSE3.identity()]
    for rel in relatives:
        step = pose6dof_to_se3(rel) if isinstance(rel, Pose6DoF) else rel
        traj.append(traj[-1].compose(step))
    return traj


def _translations(traj):
    return np.stack([p.translation for p in traj])


def rigid_align(gt, est):
    """Closed-form rigid transform A minimizing sum ||t_gt - A t_est||^2.

    Returns (R, t, degenerate).  Degenerate inputs (< 3 points or a rank-
    deficient cross-covariance) fall back to centroid translation only.
    """
    p = _translations(gt)
    q = _translations(est)
    if len(p) != len(q):
        raise ValueError(f"trajectory length mismatch: {len(p)} vs {len(q)}")
    pc = p.mean(axis=0)
    qc = q.mean(axis=0)
    if len(p) < 3:
        return np.eye(3), pc - qc, True
    h = (q - qc).T @ (p - pc)
    u, s, vt = np.linalg.svd(h)
    if s[1] < 1e-12 * max(s[0], 1.0):   # collinear or worse
        return np.eye(3), pc - qc, True
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, pc - r @ qc, False


def ate(gt, est):
    """Absolute trajectory error: RMSE of translation residuals after rigid
    alignment of the estimate onto the ground truth."""
    r, t, degenerate = rigid_align(gt, est)
    q = _translations(est) @ r.T + t
    resid = _translations(gt) - q
    return float(np.sqrt((resid ** 2).sum(axis=1).mean())), degenerate


def rpe(gt, est, k=1):
    """Per-frame relative pose error over interval k.

    F_i = (G_i^-1 G_{i+k})^-1 (H_i^-1 H_{i+k}); returns arrays
    (trans_err [m], rot_err [rad]) of length N - k.
    """
    if len(gt) != len(est):
        raise ValueError("trajectory length mismatch")
    if len(gt) <= k:
        raise ValueError(f"need more than k={k} poses")
    terr = np.empty(len(gt) - k)
    rerr = np.empty(len(gt) - k)
    for i in range(len(gt) - k):
        dg = gt[i].inverse().compose(gt[i + k])
        dh = est[i].inverse().compose(est[i + k])
        f = dg.inverse().compose(dh)
        terr[i] = np.linalg.norm(f.translation)
        rerr[i] = rotation_angle(f.rotation)
    return terr, rerr


def path_lengths(traj):
    t = _translations(traj)
    steps = np.linalg.norm(np.diff(t, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def drift_over_lengths(gt, est, lengths=DRIFT_LENGTHS):
    """Average sub-sequence drift: for every start frame and every length,
    the relative-segment error divided by the nominal length."""
    cum = path_lengths(gt)
    per_length_t = []
    per_length_r = []
    n_segments = 0
    for length in lengths:
        terrs = []
        rerrs = []
        j = 0
        for i in range(len(gt)):
            if j < i:
                j = i
            while j < len(gt) and cum[j] - cum[i] <= length:
                j += 1
            if j >= len(gt):
                break
            dg = gt[i].inverse().compose(gt[j])
            dh = est[i].inverse().compose(est[j])
            f = dg.inverse().compose(dh)
            terrs.append(np.linalg.norm(f.translation) / length * 100.0)
            rerrs.append(np.degrees(rotation_angle(f.rotation)) / length * 100.0)
        if terrs:
            per_length_t.append(np.mean(terrs))
            per_length_r.append(np.mean(rerrs))
            n_segments += len(terrs)
    ate_val, degenerate = ate(gt, est)
    if not per_length_t:
        return DriftReport(float("nan"), float("nan"), ate_val, 0, degenerate)
    return DriftReport(float(np.mean(per_length_t)), float(np.mean(per_length_r)),
                       ate_val, n_segments, degenerate)


def info_fraction(num_glimpses, image_w, image_h):
    """Fraction of raw input pixels consumed by num_glimpses observations."""
    if num_glimpses <= 0 or image_w <= 0 or image_h <= 0:
        raise ValueError("arguments must be positive")
    return num_glimpses * PIXELS_PER_GLIMPSE / (image_w * image_h)


# ----------------------------------------------------------------------
# report emission
# ----------------------------------------------------------------------
REPORT_HEADER = (
    "# drift averages: segments weighted equally within a length, "
    "lengths (100..800 m) averaged equally\n"
)


def write_report_csv(path, rows):
    """rows: list of (sequence, DriftReport)."""
    with open(path, "w") as f:
        f.write("sequence,t_rpe_percent,r_rpe_deg_per_100m,ate_m,n_segments\n")
        for seq, rep in rows:
            f.write(f"{seq},{rep.t_rpe:.6f},{rep.r_rpe:.6f},{rep.ate:.6f},{rep.n_segments}\n")


def format_report_text(rows):
    lines = [REPORT_HEADER.rstrip(), f"{'seq':>5} {'t_rpe(%)':>10} {'r_rpe(deg/100m)':>16} {'ATE(m)':>10}"]
    for seq, rep in rows:
        lines.append(f"{seq:>5} {rep.t_rpe:>10.4f} {rep.r_rpe:>16.4f} {rep.ate:>10.4f}")
    if rows:
        t = np.mean([r.t_rpe for _, r in rows])
        r_ = np.mean([r.r_rpe for _, r in rows])
        a = np.mean([r.ate for _, r in rows])
        lines.append(f"{'avg':>5} {t:>10.4f} {r_:>16.4f} {a:>10.4f}")
    return "\n".join(lines) + "\n"
