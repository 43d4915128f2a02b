"""Closed-form closest-approach collision prediction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from eventgraph.scene import Scene

DEGENERATE_EPS = 1e-9


@dataclass(frozen=True)
class KinematicConfig:
    velocity_window: int = 5
    tau: float = 1.7
    horizon: int = 300

    def __post_init__(self):
        if self.velocity_window < 1:
            raise ValueError("velocity_window must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str | int | float]) -> KinematicConfig:
        kw = {}
        if "velocity_window" in values:
            kw["velocity_window"] = int(values["velocity_window"])
        if "tau" in values:
            kw["tau"] = float(values["tau"])
        if "horizon" in values:
            kw["horizon"] = int(values["horizon"])
        return cls(**kw)


# A: final-frame velocity.  B: five-frame mean.  C: B plus the absolute
# threshold tau=1.7 and T=300.  A and B use the contact distance 2 * 0.7.
CONFIGS = {
    "A": KinematicConfig(velocity_window=1, tau=1.4, horizon=300),
    "B": KinematicConfig(velocity_window=5, tau=1.4, horizon=300),
    "C": KinematicConfig(velocity_window=5, tau=1.7, horizon=300),
}


@dataclass(frozen=True)
class ObjectState:
    object_id: str
    position: tuple[float, ...]
    velocity: tuple[float, ...]


def frame_velocities(scene: Scene, oid: str) -> dict[int, np.ndarray]:
    """Per-visible-frame velocity: annotated when present, else backward difference."""
    recs = scene.trajectories[oid]
    out = {}
    for i, r in enumerate(recs):
        if not r.visible or r.position is None:
            continue
        if r.velocity is not None:
            out[r.frame] = np.asarray(r.velocity, dtype=float)
            continue
        prev = recs[i - 1] if i > 0 else None
        if prev is not None and prev.visible and prev.position is not None:
            out[r.frame] = np.subtract(r.position, prev.position, dtype=float)
        else:
            out[r.frame] = np.zeros(len(r.position))
    return out


def terminal_states(scene: Scene, config: KinematicConfig) -> list[ObjectState]:
    """Position and mean velocity of every object visible at the final frame."""
    last = scene.last_frame
    states = []
    for o in scene.objects:
        recs = scene.trajectories[o.id]
        if last < 0 or not recs[last].visible or recs[last].position is None:
            continue
        vels = frame_velocities(scene, o.id)
        frames = sorted(vels)[-config.velocity_window :]
        v = np.mean([vels[f] for f in frames], axis=0)
        states.append(ObjectState(o.id, tuple(recs[last].position), tuple(float(x) for x in v)))
    return states


def closest_approach(
    pa: Sequence[float], va: Sequence[float], pb: Sequence[float], vb: Sequence[float]
) -> tuple[float, float] | None:
    """``(t*, d_min)`` of two straight-line trajectories, None if relative motion vanishes."""
    dp = np.subtract(pa, pb, dtype=float)
    dv = np.subtract(va, vb, dtype=float)
    vv = float(dv @ dv)
    if vv <= DEGENERATE_EPS:
        return None
    t = -float(dp @ dv) / vv
    return t, float(np.linalg.norm(dp + t * dv))


def predict_collisions(states: Sequence[ObjectState], config: KinematicConfig) -> set[tuple[str, str]]:
    ids = [s.object_id for s in states]
    if len(set(ids)) != len(ids):
        raise ValueError("object states must have distinct ids")
    ordered = sorted(states, key=lambda s: s.object_id)
    pairs = set()
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            ca = closest_approach(a.position, a.velocity, b.position, b.velocity)
            if ca is None:
                continue
            t, d = ca
            if 0 < t < config.horizon and d < config.tau:
                pairs.add((a.object_id, b.object_id))
    return pairs


def predict_scene(scene: Scene, config: KinematicConfig) -> set[tuple[str, str]]:
    return predict_collisions(terminal_states(scene, config), config)
