"""Brute-force 2-D elastic disc simulator used as ground truth.

Fixed timestep of 1/120 frame, elastic disc-disc response with positional
de-penetration, elastic walls.  A collision is recorded when two discs
overlap while approaching; its frame is the frame interval the substep falls
in.  Iteration order is by disc index, so removing a disc leaves the
arithmetic of non-interacting discs bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from eventgraph.events import Event, EventKind, EventSet
from eventgraph.scene import Scene, ingest_scene, object_id

SUBSTEPS = 120
MAX_COLLISIONS = 4096

COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")
MATERIALS = ("rubber", "metal")
SHAPES = ("sphere", "cube", "cylinder")


@dataclass(frozen=True)
class Disc:
    id: int
    radius: float
    mass: float
    position: tuple[float, float]
    velocity: tuple[float, float]


@dataclass(frozen=True)
class DiscScene:
    seed: int
    discs: tuple[Disc, ...]
    width: float = 12.0
    height: float = 12.0
    frames: int = 128
    substeps: int = SUBSTEPS

    def __post_init__(self):
        for i, a in enumerate(self.discs):
            for b in self.discs[i + 1 :]:
                d = np.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])
                if d < a.radius + b.radius:
                    raise ValueError(f"discs {a.id} and {b.id} overlap initially")

    def disc_ids(self) -> list[int]:
        return [d.id for d in self.discs]

    def without(self, disc_id: int) -> DiscScene:
        if disc_id not in self.disc_ids():
            raise KeyError(f"unknown disc {disc_id}")
        kept = tuple(d for d in self.discs if d.id != disc_id)
        return DiscScene(self.seed, kept, self.width, self.height, self.frames, self.substeps)


@dataclass
class OracleTrace:
    ids: list[int]
    positions: np.ndarray
    velocities: np.ndarray
    collisions: list[tuple[int, int, int]] = field(default_factory=list)
    head_on: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)

    def collision_set(self) -> set[tuple[int, int, int]]:
        return set(self.collisions)

    def event_keys(self, identity: str = "step") -> set[tuple[int, int, int]]:
        """Collision identities: ``(a, b, step)`` at integrator resolution or ``(a, b, frame)``."""
        if identity == "frame":
            return set(self.collisions)
        if identity == "step":
            return {(a, b, s) for (a, b, _), s in zip(self.collisions, self.steps)}
        raise ValueError(f"unknown event identity {identity!r}")

    def collision_pairs(self) -> set[tuple[int, int]]:
        return {(a, b) for a, b, _ in self.collisions}

    def event_set(self) -> EventSet:
        evs = [Event.collision(object_id(a), object_id(b), f) for a, b, f in self.collisions]
        evs += [Event.make(EventKind.ENTER, (object_id(i),), 0) for i in self.ids]
        return EventSet(evs)


@njit(cache=True)
def elastic_response(p1, v1, m1, p2, v2, m2):
    """Post-collision velocities of two discs exchanging momentum along the normal."""
    nx = p2[0] - p1[0]
    ny = p2[1] - p1[1]
    dist = np.sqrt(nx * nx + ny * ny)
    nx /= dist
    ny /= dist
    u1 = v1[0] * nx + v1[1] * ny
    u2 = v2[0] * nx + v2[1] * ny
    total = m1 + m2
    w1 = (u1 * (m1 - m2) + 2.0 * m2 * u2) / total
    w2 = (u2 * (m2 - m1) + 2.0 * m1 * u1) / total
    out1 = np.empty(2)
    out2 = np.empty(2)
    out1[0] = v1[0] + (w1 - u1) * nx
    out1[1] = v1[1] + (w1 - u1) * ny
    out2[0] = v2[0] + (w2 - u2) * nx
    out2[1] = v2[1] + (w2 - u2) * ny
    return out1, out2


@njit(cache=True)
def _integrate(pos, vel, rad, mass, width, height, frames, substeps, out_pos, out_vel, cols, head_on):
    n = pos.shape[0]
    dt = 1.0 / substeps
    ncol = 0
    for f in range(frames):
        for i in range(n):
            out_pos[f, i, 0] = pos[i, 0]
            out_pos[f, i, 1] = pos[i, 1]
            out_vel[f, i, 0] = vel[i, 0]
            out_vel[f, i, 1] = vel[i, 1]
        for k in range(substeps):
            for i in range(n):
                pos[i, 0] += vel[i, 0] * dt
                pos[i, 1] += vel[i, 1] * dt
                r = rad[i]
                if pos[i, 0] < r and vel[i, 0] < 0.0:
                    vel[i, 0] = -vel[i, 0]
                    pos[i, 0] = r
                elif pos[i, 0] > width - r and vel[i, 0] > 0.0:
                    vel[i, 0] = -vel[i, 0]
                    pos[i, 0] = width - r
                if pos[i, 1] < r and vel[i, 1] < 0.0:
                    vel[i, 1] = -vel[i, 1]
                    pos[i, 1] = r
                elif pos[i, 1] > height - r and vel[i, 1] > 0.0:
                    vel[i, 1] = -vel[i, 1]
                    pos[i, 1] = height - r
            for i in range(n):
                for j in range(i + 1, n):
                    dx = pos[j, 0] - pos[i, 0]
                    dy = pos[j, 1] - pos[i, 1]
                    rs = rad[i] + rad[j]
                    d2 = dx * dx + dy * dy
                    if d2 >= rs * rs or d2 == 0.0:
                        continue
                    approach = dx * (vel[j, 0] - vel[i, 0]) + dy * (vel[j, 1] - vel[i, 1])
                    if approach >= 0.0:
                        continue
                    rel = np.sqrt(
                        (vel[j, 0] - vel[i, 0]) ** 2 + (vel[j, 1] - vel[i, 1]) ** 2
                    ) * np.sqrt(d2)
                    a, b = elastic_response(pos[i], vel[i], mass[i], pos[j], vel[j], mass[j])
                    vel[i, 0] = a[0]
                    vel[i, 1] = a[1]
                    vel[j, 0] = b[0]
                    vel[j, 1] = b[1]
                    dist = np.sqrt(d2)
                    overlap = rs - dist
                    total = mass[i] + mass[j]
                    ux = dx / dist
                    uy = dy / dist
                    pos[i, 0] -= ux * overlap * mass[j] / total
                    pos[i, 1] -= uy * overlap * mass[j] / total
                    pos[j, 0] += ux * overlap * mass[i] / total
                    pos[j, 1] += uy * overlap * mass[i] / total
                    if ncol < cols.shape[0]:
                        cols[ncol, 0] = i
                        cols[ncol, 1] = j
                        cols[ncol, 2] = f
                        cols[ncol, 3] = f * substeps + k
                        head_on[ncol] = -approach / rel
                    ncol += 1
    return ncol


def run(scene: DiscScene) -> OracleTrace:
    discs = sorted(scene.discs, key=lambda d: d.id)
    n = len(discs)
    ids = [d.id for d in discs]
    pos = np.array([d.position for d in discs], dtype=np.float64).reshape(n, 2)
    vel = np.array([d.velocity for d in discs], dtype=np.float64).reshape(n, 2)
    rad = np.array([d.radius for d in discs], dtype=np.float64)
    mass = np.array([d.mass for d in discs], dtype=np.float64)
    out_pos = np.zeros((scene.frames, n, 2))
    out_vel = np.zeros((scene.frames, n, 2))
    cols = np.zeros((MAX_COLLISIONS, 4), dtype=np.int64)
    head_on = np.zeros(MAX_COLLISIONS)
    ncol = _integrate(
        pos, vel, rad, mass, float(scene.width), float(scene.height),
        scene.frames, scene.substeps, out_pos, out_vel, cols, head_on,
    )
    if ncol > MAX_COLLISIONS:
        raise RuntimeError(f"collision buffer overflow ({ncol} collisions)")
    collisions = [(ids[int(i)], ids[int(j)], int(f)) for i, j, f, _ in cols[:ncol]]
    steps = [int(s) for s in cols[:ncol, 3]]
    return OracleTrace(ids, out_pos, out_vel, collisions, [float(h) for h in head_on[:ncol]], steps)


def run_without(scene: DiscScene, removed: int) -> OracleTrace:
    return run(scene.without(removed))


def satisfies_c3(scene: DiscScene, removed: int, full: OracleTrace | None = None,
                 cf: OracleTrace | None = None, identity: str = "step") -> bool:
    """True iff removing the disc creates no collision absent from the full run.

    Collisions are compared at integrator-step resolution by default: the
    same pair meeting at a different instant is a new event.
    """
    full = run(scene) if full is None else full
    cf = run_without(scene, removed) if cf is None else cf
    return cf.event_keys(identity) <= full.event_keys(identity)


def has_shared_simultaneous(trace: OracleTrace, substeps: int = SUBSTEPS) -> bool:
    """Whether two collisions sharing a disc fall in one frame or less than a frame-time apart."""
    last_frame: dict[int, int] = {}
    last_step: dict[int, int] = {}
    for (a, b, f), step in zip(trace.collisions, trace.steps):
        for d in (a, b):
            if d in last_frame and (last_frame[d] == f or step - last_step[d] < substeps):
                return True
            last_frame[d] = f
            last_step[d] = step
    return False


def random_scene(
    seed: int,
    n_discs: tuple[int, int] = (4, 7),
    n_collisions: tuple[int, int] = (2, 5),
    frames: int = 128,
    max_attempts: int = 10_000,
) -> DiscScene:
    """Seeded scene with a disc count and collision count inside the given ranges.

    Draws are rejected until the full run has an admissible number of
    collisions and no disc takes part in two collisions within one frame
    (same frame index, or less than a frame-time apart).
    """
    rng = np.random.default_rng(seed)
    width = height = 12.0
    for _ in range(max_attempts):
        n = int(rng.integers(n_discs[0], n_discs[1] + 1))
        discs: list[Disc] = []
        tries = 0
        while len(discs) < n and tries < 1000:
            tries += 1
            r = float(rng.uniform(0.4, 0.7))
            x = float(rng.uniform(r, width - r))
            y = float(rng.uniform(r, height - r))
            if any(np.hypot(x - d.position[0], y - d.position[1]) < r + d.radius + 0.2 for d in discs):
                continue
            speed = float(rng.uniform(0.02, 0.12))
            angle = float(rng.uniform(0.0, 2.0 * np.pi))
            mass = float(rng.uniform(1.0, 3.0))
            discs.append(Disc(len(discs), r, mass, (x, y), (speed * np.cos(angle), speed * np.sin(angle))))
        if len(discs) < n:
            continue
        scene = DiscScene(seed, tuple(discs), width, height, frames)
        trace = run(scene)
        if not n_collisions[0] <= len(trace.collisions) <= n_collisions[1]:
            continue
        if has_shared_simultaneous(trace, scene.substeps):
            continue
        return scene
    raise RuntimeError(f"no admissible scene for seed {seed} after {max_attempts} attempts")


def scene_annotation(scene: DiscScene, trace: OracleTrace | None = None) -> dict:
    """Serialize a disc scene and its run in the CLEVRER annotation schema."""
    trace = run(scene) if trace is None else trace
    index = {d: k for k, d in enumerate(trace.ids)}
    props = [
        {
            "object_id": k,
            "color": COLORS[d % len(COLORS)],
            "material": MATERIALS[(d // len(COLORS)) % len(MATERIALS)],
            "shape": SHAPES[d % len(SHAPES)],
        }
        for k, d in enumerate(trace.ids)
    ]
    frames = []
    for f in range(trace.positions.shape[0]):
        frames.append(
            {
                "frame_id": f,
                "objects": [
                    {
                        "object_id": index[d],
                        "location": [float(x) for x in trace.positions[f, k]],
                        "velocity": [float(x) for x in trace.velocities[f, k]],
                        "inside_camera_view": True,
                    }
                    for k, d in enumerate(trace.ids)
                ],
            }
        )
    return {
        "scene_index": f"synthetic-{scene.seed}",
        "object_property": props,
        "motion_trajectory": frames,
        "collision": [
            {"object_ids": [index[a], index[b]], "frame_id": f} for a, b, f in trace.collisions
        ],
    }


def scene_from_oracle(scene: DiscScene, trace: OracleTrace | None = None) -> Scene:
    return ingest_scene(scene_annotation(scene, trace))


def kinetic_energy(masses: Sequence[float], velocities: np.ndarray) -> float:
    v = np.asarray(velocities, dtype=float)
    return float(0.5 * np.sum(np.asarray(masses) * np.sum(v * v, axis=-1)))


def momentum(masses: Sequence[float], velocities: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(masses)[:, None] * np.asarray(velocities, dtype=float), axis=0)


def scene_to_json(scene: DiscScene) -> dict:
    return {
        "seed": scene.seed,
        "width": scene.width,
        "height": scene.height,
        "frames": scene.frames,
        "substeps": scene.substeps,
        "discs": [
            {"id": d.id, "radius": d.radius, "mass": d.mass,
             "position": list(d.position), "velocity": list(d.velocity)}
            for d in scene.discs
        ],
    }


def scene_from_json(data: dict) -> DiscScene:
    discs = tuple(
        Disc(d["id"], d["radius"], d["mass"], tuple(d["position"]), tuple(d["velocity"]))
        for d in data["discs"]
    )
    return DiscScene(data["seed"], discs, data["width"], data["height"], data["frames"], data["substeps"])
