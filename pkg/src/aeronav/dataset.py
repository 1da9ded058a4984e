"""Episode schema, synthetic dialog/trajectory generator, augmentation, I/O.

An episode is a commander/follower exchange over a procedural map: a start
view, a goal area, a ground-truth trajectory reaching the goal in at most
`max_steps` waypoint hops, one dialog round per hop, and one goal-overlap
attention grid per trajectory view.  Everything is generated from a single
integer seed, so two calls with the same (seed, params) agree byte for byte.

Instruction text is templated from small phrase banks.  Each round is
egocentric ("turn right 30 degrees ..."), allocentric ("head northeast ..."),
or mixed (both).  The category probabilities are chosen so that about 82% of
instructions carry an egocentric phrase and about 30% an allocentric one,
with the overlap explaining why those marginals exceed 100% combined.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import (
    AREA_EPS,
    Polygon,
    Trajectory,
    ViewArea,
    intersection_area,
    normalize_angle,
    view_polygon,
)
from .worldmap import DEFAULT_WORLD_SIDE, WorldMap

SCHEMA_VERSION = 1


class GenerationError(RuntimeError):
    """Raised when no valid episode can be generated within the retry bound."""


class DialogStyle(str, Enum):
    EGOCENTRIC = "egocentric"
    ALLOCENTRIC = "allocentric"
    MIXED = "mixed"


# --------------------------------------------------------------------- types

@dataclass(frozen=True)
class DialogRound:
    """One follower question (optional) and the commander's instruction."""

    instruction: str
    question: str | None = None
    style: DialogStyle = DialogStyle.EGOCENTRIC

    def __post_init__(self):
        if not self.instruction or not self.instruction.strip():
            raise ValueError("instruction must be non-empty")
        object.__setattr__(self, "style", DialogStyle(self.style))


@dataclass(frozen=True)
class AttentionMask:
    """P-by-P grid of attention targets in [0, 1], row 0 = far edge of view."""

    grid: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.grid)
        if not rows:
            raise ValueError("attention grid must be non-empty")
        p = len(rows)
        for row in rows:
            if len(row) != p:
                raise ValueError("attention grid must be square")
            for v in row:
                if not (0.0 <= v <= 1.0):
                    raise ValueError(f"attention value {v} outside [0, 1]")
        object.__setattr__(self, "grid", rows)

    @property
    def size(self) -> int:
        return len(self.grid)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.grid, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Observation:
    """What the follower sees at one step: view pixels plus facing direction."""

    pixels: np.ndarray                 # (R, R) scalars in [0, 1]
    direction: tuple[float, float]     # (cos yaw, sin yaw), unit norm

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise ValueError(f"pixels must be square 2-D, got shape {px.shape}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ValueError("pixels must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)
        dx, dy = self.direction
        if abs(math.hypot(dx, dy) - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit length, got ({dx}, {dy})")
        object.__setattr__(self, "direction", (float(dx), float(dy)))

    @property
    def resolution(self) -> int:
        return self.pixels.shape[0]


def _require_view_inside(view: ViewArea, world_side: float, what: str) -> None:
    for cx, cy in view_polygon(view).vertices:
        if not (-1e-9 <= cx <= world_side + 1e-9
                and -1e-9 <= cy <= world_side + 1e-9):
            raise ValueError(f"{what} extends outside the world square "
                             f"[0, {world_side}]^2 (corner at ({cx}, {cy}))")


@dataclass(frozen=True)
class Episode:
    id: str
    map_seed: int
    world_side: float
    start_view: ViewArea
    start_direction: float             # yaw, radians
    goal: ViewArea
    max_steps: int
    dialog: tuple[DialogRound, ...]
    gt_trajectory: Trajectory
    gt_attention: tuple[AttentionMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "dialog", tuple(self.dialog))
        object.__setattr__(self, "gt_attention", tuple(self.gt_attention))
        if not self.id:
            raise ValueError("episode id must be non-empty")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.world_side <= 0.0:
            raise ValueError("world_side must be positive")
        if len(self.dialog) > self.max_steps:
            raise ValueError(
                f"{len(self.dialog)} dialog rounds exceed max_steps={self.max_steps}")
        for i, rnd in enumerate(self.dialog):
            if i > 0 and not rnd.question:
                raise ValueError(f"dialog round {i} lacks a follower question")
        if len(self.gt_attention) != len(self.gt_trajectory):
            raise ValueError(
                f"{len(self.gt_attention)} attention masks for "
                f"{len(self.gt_trajectory)} trajectory views")
        if self.gt_trajectory.views[0] != self.start_view:
            raise ValueError("gt_trajectory must begin at start_view")
        _require_view_inside(self.goal, self.world_side, "goal view")
        for v in self.gt_trajectory.views:
            _require_view_inside(v, self.world_side, "trajectory view")


# ----------------------------------------------------------- patch geometry

def patch_polygon(view: ViewArea, grid: int, row: int, col: int) -> Polygon:
    """World-frame polygon of one patch cell of the view's grid.

    Row 0 is the far edge of the view (matching raster row order); columns run
    left-to-right in the view frame.
    """
    if not (0 <= row < grid and 0 <= col < grid):
        raise ValueError(f"patch ({row}, {col}) outside {grid}x{grid} grid")
    s = view.side
    u0 = (-0.5 + col / grid) * s
    u1 = (-0.5 + (col + 1) / grid) * s
    v1 = (0.5 - row / grid) * s
    v0 = (0.5 - (row + 1) / grid) * s
    c, sn = math.cos(view.rotation), math.sin(view.rotation)

    # image-up (+v) is the facing direction (c, sn); image-right (+u) is (sn, -c)
    def world(u: float, v: float) -> tuple[float, float]:
        return (view.center_x + sn * u + c * v,
                view.center_y - c * u + sn * v)

    # counter-clockwise in world frame
    return Polygon((world(u1, v1), world(u0, v1), world(u0, v0), world(u1, v0)))


def goal_overlap_mask(view: ViewArea, goal: ViewArea, grid: int) -> AttentionMask:
    """Binary mask: 1 where the patch cell overlaps the goal area, else 0."""
    goal_poly = view_polygon(goal)
    rows = []
    for i in range(grid):
        row = []
        for j in range(grid):
            inter = intersection_area(patch_polygon(view, grid, i, j), goal_poly)
            row.append(1.0 if inter > AREA_EPS else 0.0)
        rows.append(tuple(row))
    return AttentionMask(tuple(rows))


# -------------------------------------------------------------- observations

def rasterize_observation(map_seed: int, view: ViewArea, resolution: int = 16,
                          world_side: float = DEFAULT_WORLD_SIDE) -> Observation:
    """Render the drone's view: map pixels plus its facing direction.

    Pure function of its arguments; the view must lie inside the world square.
    """
    world = WorldMap(map_seed=map_seed, world_side=world_side)
    pixels = world.rasterize(view, resolution)
    yaw = view.rotation
    return Observation(pixels=pixels, direction=(math.cos(yaw), math.sin(yaw)))


# ------------------------------------------------------------ language banks

COMPASS_16 = (
    "east", "east-northeast", "northeast", "north-northeast",
    "north", "north-northwest", "northwest", "west-northwest",
    "west", "west-southwest", "southwest", "south-southwest",
    "south", "south-southeast", "southeast", "east-southeast",
)

EGO_MARKERS = ("turn", "straight", "around")
ALLO_MARKERS = COMPASS_16

_QUESTIONS = (
    "which way should i go now",
    "where to next",
    "do i keep going the same way",
    "what is my next move",
)

_GOAL_DESCRIPTORS = (
    "the landing pad",
    "the marked rooftop",
    "the white helipad",
    "the target courtyard",
)


def compass_name(heading: float) -> str:
    """Nearest 16-way compass word for a heading in radians (0 = east, ccw)."""
    idx = int(round(normalize_angle(heading) / (2.0 * math.pi / 16.0))) % 16
    return COMPASS_16[idx]


def _wrap_pi(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    t = normalize_angle(theta)
    return t - 2.0 * math.pi if t > math.pi else t


def quantized_turn(current_yaw: float, target_heading: float) -> int:
    """Signed turn in degrees, quantized to 15; positive = left (ccw)."""
    delta = math.degrees(_wrap_pi(target_heading - current_yaw))
    q = int(round(delta / 15.0)) * 15
    if q == -180:
        q = 180
    return q


def _ego_phrase(rng: np.random.Generator, turn_deg: int, meters: int) -> str:
    if turn_deg == 0:
        forms = (
            f"go straight ahead for {meters} meters",
            f"keep going straight for {meters} meters",
            f"fly straight on for {meters} meters",
        )
    elif abs(turn_deg) == 180:
        forms = (
            f"turn around and go back {meters} meters",
            f"turn around then fly {meters} meters",
        )
    else:
        side = "left" if turn_deg > 0 else "right"
        d = abs(turn_deg)
        forms = (
            f"turn {side} {d} degrees then go {meters} meters",
            f"make a {d} degree {side} turn and fly {meters} meters",
        )
    return forms[int(rng.integers(len(forms)))]


def _allo_phrase(rng: np.random.Generator, heading: float, meters: int) -> str:
    c = compass_name(heading)
    forms = (
        f"head {c} for {meters} meters",
        f"fly {c} for about {meters} meters",
        f"go {c} roughly {meters} meters",
    )
    return forms[int(rng.integers(len(forms)))]


def _mixed_phrase(rng: np.random.Generator, turn_deg: int, heading: float,
                  meters: int) -> str:
    c = compass_name(heading)
    if turn_deg == 0:
        return f"continue straight heading {c} for {meters} meters"
    if abs(turn_deg) == 180:
        return f"turn around and head {c} for {meters} meters"
    side = "left" if turn_deg > 0 else "right"
    return f"turn {side} {abs(turn_deg)} degrees and head {c} for {meters} meters"


def phrase_bank_words() -> tuple[str, ...]:
    """Every word the generator can emit, sorted; the closed vocabulary."""
    words: set[str] = set()
    words.update(COMPASS_16)
    for text in _QUESTIONS + _GOAL_DESCRIPTORS:
        words.update(text.split())
    words.update(
        "go straight ahead for meters keep going fly on turn around and back "
        "then left right degrees degree make a head about roughly continue "
        "heading to reach stay where you are hold position down already at".split()
    )
    words.update(str(n) for n in range(0, 181))
    return tuple(sorted(words))


# ------------------------------------------------------------------ generator

@dataclass(frozen=True)
class GeneratorConfig:
    world_side: float = DEFAULT_WORLD_SIDE
    view_side: float = 10.0
    max_steps: int = 2                     # M: waypoint hops == dialog rounds
    step_max: float = 12.0                 # longest single hop, meters
    goal_distance: tuple[float, float] = (13.2, 20.4)
    path_jitter: float = 1.5               # lateral wobble of midpoints, meters
    patch_grid: int = 4
    resolution: int = 16
    max_retries: int = 20
    # P(egocentric only), P(allocentric only), P(mixed) -> marginals .82 / .30
    style_probs: tuple[float, float, float] = (0.70, 0.18, 0.12)

    def __post_init__(self):
        if self.world_side <= 0 or self.view_side <= 0:
            raise ValueError("world_side and view_side must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.step_max <= 0:
            raise ValueError("step_max must be positive")
        lo, hi = self.goal_distance
        if not (0.0 <= lo <= hi):
            raise ValueError(f"bad goal_distance range {self.goal_distance}")
        if hi > self.step_max * self.max_steps:
            raise ValueError(
                f"goal_distance upper bound {hi} unreachable in "
                f"{self.max_steps} hops of {self.step_max}")
        if self.patch_grid < 1 or self.resolution < 1:
            raise ValueError("patch_grid and resolution must be >= 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        p = self.style_probs
        if len(p) != 3 or any(q < 0 for q in p) or abs(sum(p) - 1.0) > 1e-9:
            raise ValueError(f"style_probs must be 3 non-negatives summing to 1, got {p}")
        margin = self.view_side * math.sqrt(2.0) / 2.0
        if 2.0 * margin >= self.world_side:
            raise ValueError("view diagonal does not fit inside the world")

    @property
    def center_margin(self) -> float:
        """Distance view centers must keep from the world edge."""
        return self.view_side * math.sqrt(2.0) / 2.0


def _plan_centers(rng: np.random.Generator, start: tuple[float, float],
                  goal: tuple[float, float], cfg: GeneratorConfig
                  ) -> list[tuple[float, float]] | None:
    """Waypoint centers after the start, straight-ish toward the goal.

    Returns None when a jittered midpoint escapes the placement margins, so
    the caller can redraw the goal.
    """
    sx, sy = start
    gx, gy = goal
    dist = math.hypot(gx - sx, gy - sy)
    if dist < 1e-9:
        return []
    n = max(1, math.ceil(dist / cfg.step_max - 1e-12))
    if n > cfg.max_steps:
        return None
    ux, uy = (gx - sx) / dist, (gy - sy) / dist
    px, py = -uy, ux                    # unit perpendicular
    slack = n * cfg.step_max - dist
    bound = min(cfg.path_jitter, 0.45 * slack)
    lo = cfg.center_margin
    hi = cfg.world_side - cfg.center_margin
    pts: list[tuple[float, float]] = []
    for k in range(1, n):
        t = k / n
        d = float(rng.uniform(-bound, bound)) if bound > 0 else 0.0
        x = sx + t * (gx - sx) + d * px
        y = sy + t * (gy - sy) + d * py
        if not (lo <= x <= hi and lo <= y <= hi):
            return None
        pts.append((x, y))
    pts.append((gx, gy))
    return pts


def _build_instruction(rng: np.random.Generator, style: DialogStyle,
                       turn_deg: int, heading: float, meters: int,
                       is_last: bool) -> str:
    if style is DialogStyle.EGOCENTRIC:
        text = _ego_phrase(rng, turn_deg, meters)
    elif style is DialogStyle.ALLOCENTRIC:
        text = _allo_phrase(rng, heading, meters)
    else:
        text = _mixed_phrase(rng, turn_deg, heading, meters)
    if is_last:
        text += f" to reach {_GOAL_DESCRIPTORS[int(rng.integers(len(_GOAL_DESCRIPTORS)))]}"
    return text


def _draw_style(rng: np.random.Generator, cfg: GeneratorConfig) -> DialogStyle:
    r = float(rng.random())
    p_ego, p_allo, _ = cfg.style_probs
    if r < p_ego:
        return DialogStyle.EGOCENTRIC
    if r < p_ego + p_allo:
        return DialogStyle.ALLOCENTRIC
    return DialogStyle.MIXED


def generate_episode(seed: int, params: GeneratorConfig | None = None) -> Episode:
    """Deterministically build one episode from an integer seed."""
    cfg = params or GeneratorConfig()
    rng = np.random.default_rng(seed)
    map_seed = int(rng.integers(0, 2 ** 63, dtype=np.int64))
    lo = cfg.center_margin
    hi = cfg.world_side - cfg.center_margin

    start_yaw = float(rng.uniform(0.0, 2.0 * math.pi))
    sx = float(rng.uniform(lo, hi))
    sy = float(rng.uniform(lo, hi))
    start_view = ViewArea(sx, sy, cfg.view_side, start_yaw)

    centers = None
    for _ in range(cfg.max_retries):
        dist = float(rng.uniform(*cfg.goal_distance))
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        gx = sx + dist * math.cos(phi)
        gy = sy + dist * math.sin(phi)
        if not (lo <= gx <= hi and lo <= gy <= hi):
            continue
        centers = _plan_centers(rng, (sx, sy), (gx, gy), cfg)
        if centers is not None:
            break
    if centers is None:
        raise GenerationError(
            f"seed {seed}: no reachable goal placement within "
            f"{cfg.max_retries} retries")

    # trajectory views: yaw faces the direction just flown
    views = [start_view]
    for (x, y) in centers:
        prev = views[-1]
        heading = math.atan2(y - prev.center_y, x - prev.center_x)
        views.append(ViewArea(x, y, cfg.view_side, heading))
    goal = views[-1] if centers else start_view
    trajectory = Trajectory(tuple(views))

    masks = tuple(goal_overlap_mask(v, goal, cfg.patch_grid) for v in views)

    rounds: list[DialogRound] = []
    if not centers:
        style = DialogStyle.EGOCENTRIC
        rounds.append(DialogRound(
            instruction="go straight down and hold position you are already "
                        f"at {_GOAL_DESCRIPTORS[int(rng.integers(len(_GOAL_DESCRIPTORS)))]}",
            question=None, style=style))
    else:
        for k in range(len(centers)):
            cur = views[k]
            nxt = views[k + 1]
            heading = nxt.rotation
            meters = max(1, round(math.hypot(nxt.center_x - cur.center_x,
                                             nxt.center_y - cur.center_y)))
            turn = quantized_turn(cur.rotation, heading)
            style = _draw_style(rng, cfg)
            text = _build_instruction(rng, style, turn, heading, meters,
                                      is_last=(k == len(centers) - 1))
            question = None if k == 0 else _QUESTIONS[int(rng.integers(len(_QUESTIONS)))]
            rounds.append(DialogRound(instruction=text, question=question, style=style))

    return Episode(
        id=f"ep-{seed}",
        map_seed=map_seed,
        world_side=cfg.world_side,
        start_view=start_view,
        start_direction=start_yaw,
        goal=goal,
        max_steps=cfg.max_steps,
        dialog=tuple(rounds),
        gt_trajectory=trajectory,
        gt_attention=masks,
    )


def generate_corpus(base_seed: int, count: int,
                    params: GeneratorConfig | None = None) -> list[Episode]:
    """Generate `count` episodes from consecutive seeds starting at base_seed.

    Seeds whose goal placement exhausts the retry bound are skipped (the next
    seed is tried), so the result is still a pure function of the arguments.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    out: list[Episode] = []
    seed = base_seed
    attempts = 0
    budget = max(10 * count, 10)
    while len(out) < count:
        if attempts >= budget:
            raise GenerationError(
                f"generated only {len(out)}/{count} episodes after "
                f"{attempts} seeds")
        try:
            out.append(generate_episode(seed, params))
        except GenerationError:
            pass
        seed += 1
        attempts += 1
    return out


# ---------------------------------------------------------------- augmenting

@dataclass(frozen=True)
class AugmentConfig:
    p_blur: float = 0.5
    p_noise: float = 0.5
    noise_eps: float = 0.05
    p_hflip: float = 0.5
    p_vflip: float = 0.5

    def __post_init__(self):
        for name in ("p_blur", "p_noise", "p_hflip", "p_vflip"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.noise_eps < 0.0:
            raise ValueError("noise_eps must be non-negative")


def _box_blur(pixels: np.ndarray) -> np.ndarray:
    """3x3 box blur with edge clamping (replicated border)."""
    padded = np.pad(pixels, 1, mode="edge")
    out = np.zeros_like(pixels)
    for di in range(3):
        for dj in range(3):
            out += padded[di:di + pixels.shape[0], dj:dj + pixels.shape[1]]
    return out / 9.0


def augment(obs: Observation, mask: AttentionMask,
            waypoint: tuple[float, float], ops: AugmentConfig, seed: int
            ) -> tuple[Observation, AttentionMask, tuple[float, float]]:
    """Seeded augmentation keeping pixels, mask, and waypoint in register.

    Draw order is fixed (blur, noise, hflip, vflip) so a given seed always
    produces the same transformation.  The waypoint is view-relative
    (rightward, forward) in meters; flips negate the matching component.
    """
    rng = np.random.default_rng(seed)
    pixels = obs.pixels.copy()
    grid = mask.array
    wx, wy = float(waypoint[0]), float(waypoint[1])

    if float(rng.random()) < ops.p_blur:
        pixels = np.clip(_box_blur(pixels), 0.0, 1.0)
    if float(rng.random()) < ops.p_noise:
        noise = rng.uniform(-ops.noise_eps, ops.noise_eps, size=pixels.shape)
        pixels = np.clip(pixels + noise, 0.0, 1.0)
    if float(rng.random()) < ops.p_hflip:      # mirror left-right
        pixels = pixels[:, ::-1].copy()
        grid = grid[:, ::-1].copy()
        wx = -wx
    if float(rng.random()) < ops.p_vflip:      # mirror far-near
        pixels = pixels[::-1, :].copy()
        grid = grid[::-1, :].copy()
        wy = -wy

    new_mask = AttentionMask(tuple(tuple(row) for row in grid.tolist()))
    new_obs = Observation(pixels=pixels, direction=obs.direction)
    return new_obs, new_mask, (wx, wy)


# --------------------------------------------------------------- persistence

def _view_to_dict(v: ViewArea) -> dict:
    return {"center_x": v.center_x, "center_y": v.center_y,
            "side": v.side, "rotation": v.rotation}


def _view_from_dict(d: dict) -> ViewArea:
    return ViewArea(center_x=d["center_x"], center_y=d["center_y"],
                    side=d["side"], rotation=d["rotation"])


def episode_to_dict(ep: Episode) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": ep.id,
        "map_seed": ep.map_seed,
        "world_side": ep.world_side,
        "start_view": _view_to_dict(ep.start_view),
        "start_direction": ep.start_direction,
        "goal": _view_to_dict(ep.goal),
        "max_steps": ep.max_steps,
        "dialog": [
            {"question": r.question, "instruction": r.instruction,
             "style": r.style.value}
            for r in ep.dialog
        ],
        "gt_trajectory": [_view_to_dict(v) for v in ep.gt_trajectory.views],
        "gt_attention": [{"grid": [list(row) for row in m.grid]}
                         for m in ep.gt_attention],
    }


def episode_from_dict(d: dict) -> Episode:
    version = d["schema_version"]
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    return Episode(
        id=d["id"],
        map_seed=d["map_seed"],
        world_side=d["world_side"],
        start_view=_view_from_dict(d["start_view"]),
        start_direction=d["start_direction"],
        goal=_view_from_dict(d["goal"]),
        max_steps=d["max_steps"],
        dialog=tuple(
            DialogRound(instruction=r["instruction"], question=r["question"],
                        style=DialogStyle(r["style"]))
            for r in d["dialog"]
        ),
        gt_trajectory=Trajectory(tuple(_view_from_dict(v)
                                       for v in d["gt_trajectory"])),
        gt_attention=tuple(AttentionMask(tuple(tuple(row) for row in m["grid"]))
                           for m in d["gt_attention"]),
    )


def save_episodes(episodes, path) -> None:
    """Write episodes as UTF-8 JSON lines, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps(episode_to_dict(ep)) + "\n")


def load_episodes(path) -> list[Episode]:
    """Read a JSONL episode file; errors carry the line number and field."""
    episodes: list[Episode] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"line {ln}: invalid JSON ({e.msg})") from e
            try:
                episodes.append(episode_from_dict(record))
            except KeyError as e:
                raise ValueError(
                    f"line {ln}: missing field {e.args[0]!r}") from e
            except (TypeError, ValueError) as e:
                raise ValueError(f"line {ln}: {e}") from e
    return episodes


# --------------------------------------------------------------------- splits

def split_dataset(episodes, ratios: tuple[float, float, float], seed: int
                  ) -> tuple[list[Episode], list[Episode], list[Episode]]:
    """Deterministic shuffled partition into train/val/test."""
    episodes = list(episodes)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be 3 positives, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got sum {sum(ratios)}")
    if len(episodes) < len(ratios):
        raise ValueError(
            f"cannot split {len(episodes)} episodes into {len(ratios)} parts")
    order = np.random.default_rng(seed).permutation(len(episodes))
    shuffled = [episodes[i] for i in order]

    n = len(episodes)
    raw = [r * n for r in ratios]
    sizes = [int(math.floor(x)) for x in raw]
    remainder = n - sum(sizes)
    frac_order = sorted(range(3), key=lambda i: raw[i] - sizes[i], reverse=True)
    for i in range(remainder):
        sizes[frac_order[i % 3]] += 1
    # every part must get at least one episode
    for i in range(3):
        if sizes[i] == 0:
            donor = max(range(3), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] += 1

    a = shuffled[:sizes[0]]
    b = shuffled[sizes[0]:sizes[0] + sizes[1]]
    c = shuffled[sizes[0] + sizes[1]:]
    return a, b, c
