"""Marathon scenario: where objects start, where they go, in which phase"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import math

import numpy as np
import yaml

from ..models.designator import Designator, a_location, an_action, an_object
from ..models.domain import ConfigError, Pose
from ..reasoner.engine import stream_seed
from ..utils.logger import logger
from ..worldmodel.loader import load_scene
from ..worldmodel.world import SceneObject, WorldState, yaw_matrix

FORMAT_TAG = "marathon-scenario/1"
# Gap between a spawned object's bottom and its supporting plane
SPAWN_GAP = 0.001


@dataclass(frozen=True)
class SpawnRule:
    """Nominal start of one object in a named location, with per-run jitter.

    ``xy`` and ``yaw`` are relative to the location frame; ``jitter`` holds
    the standard deviations of x, y and yaw.
    """
    object_id: str
    object_type: str
    location: str
    xy: Tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0
    jitter: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.xy) != 2 or len(self.jitter) != 3:
            raise ValueError(f"Spawn rule {self.object_id}: xy needs 2 and jitter 3 values")
        if min(self.jitter) < 0:
            raise ValueError(f"Spawn rule {self.object_id}: jitter must be non-negative, got {self.jitter}")


@dataclass(frozen=True)
class TransportGoal:
    """Bring one object from where it is expected to a target location"""
    object_id: str
    object_type: str
    source: str
    target: str
    placement: Optional[Tuple[float, float]] = None

    def action(self, world: WorldState) -> Designator:
        """Transport action designator; regions become ``in`` or ``on`` by their kind"""
        target = _location(world, self.target)
        if self.placement is not None:
            target = target.extend({"pose": Pose.from_xyz_rpy([self.placement[0], self.placement[1], 0.0])})
        return an_action(**{
            "type": "transporting",
            "object": an_object(type=self.object_type),
            "from": _location(world, self.source),
            "to": target,
        })


def _location(world: WorldState, region: str) -> Designator:
    kind = "in" if world.location(region).kind == "container" else "on"
    return a_location(**{kind: region})


@dataclass
class Scenario:
    """Environment, object spawn rules and the ordered goals of each phase"""
    name: str
    environment: Path
    spawns: List[SpawnRule]
    phases: Dict[str, List[TransportGoal]] = field(default_factory=dict)
    containers: List[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [rule.object_id for rule in self.spawns]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Scenario {self.name} spawns duplicate objects: {ids}")
        for phase, goals in self.phases.items():
            for goal in goals:
                if goal.object_id not in ids:
                    raise ValueError(f"Phase {phase} moves {goal.object_id}, which is never spawned")

    @property
    def object_types(self) -> Dict[str, str]:
        return {rule.object_id: rule.object_type for rule in self.spawns}

    def check(self, world: WorldState) -> None:
        """Raises ConfigError when a referenced location or object type is unknown"""
        env = world.environment
        regions = [rule.location for rule in self.spawns]
        for goals in self.phases.values():
            regions += [r for goal in goals for r in (goal.source, goal.target)]
        missing = sorted({r for r in regions if r not in env.locations})
        if missing:
            raise ConfigError(f"Scenario {self.name} refers to unknown locations {missing}")
        types = sorted({rule.object_type for rule in self.spawns} - set(env.object_types))
        if types:
            raise ConfigError(f"Scenario {self.name} refers to unknown object types {types}")
        # containers the scenario operates, in first-use order
        self.containers = list(dict.fromkeys(
            env.locations[r].container for r in regions if env.locations[r].container is not None
        ))

    def spawn(self, world: WorldState, seed: int) -> WorldState:
        """Place every object at its jittered start pose.

        Objects inside containers are attached to the container link so
        they move with drawers and doors.
        """
        rng = stream_seed(seed, f"{self.name}:spawn")
        for rule in self.spawns:
            spec = world.environment.object_types[rule.object_type]
            jitter = rng.normal(0.0, 1.0, 3) * np.asarray(rule.jitter)
            location = world.location(rule.location)
            frame = world.location_transform(rule.location)
            half_height = float(spec.shape.local_extents()[2])
            local = np.array([rule.xy[0] + jitter[0], rule.xy[1] + jitter[1], half_height + SPAWN_GAP, 1.0])
            rotation = frame[:3, :3] @ yaw_matrix(rule.yaw + float(jitter[2]))
            pose = Pose.from_rotation_matrix((frame @ local)[:3], rotation)
            world = world.with_object(SceneObject(
                id=rule.object_id,
                object_type=rule.object_type,
                shape=spec.shape,
                pose=pose,
                mass=spec.mass,
                color=spec.color,
            ))
            if location.kind == "container":
                world = world.attach(rule.object_id, location.link, tolerance=math.inf)
        logger.debug(f"Spawned {len(self.spawns)} objects for seed {seed}")
        return world


def _pair(value: Any, name: str) -> Tuple[float, float]:
    if value is None or len(value) != 2:
        raise ConfigError(f"{name} needs two values, got {value}")
    return (float(value[0]), float(value[1]))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario file; the environment path is relative to the scenario file

    Raises:
        ConfigError: missing file, wrong format tag or malformed entries
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Scenario file not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("format") != FORMAT_TAG:
        raise ConfigError(f"{path}: expected format tag {FORMAT_TAG}")
    try:
        spawns = [
            SpawnRule(
                object_id=entry["id"],
                object_type=entry["type"],
                location=entry["location"],
                xy=_pair(entry.get("xy", (0.0, 0.0)), f"{entry['id']}.xy"),
                yaw=float(entry.get("yaw", 0.0)),
                jitter=tuple(float(v) for v in entry.get("jitter", (0.0, 0.0, 0.0))),
            )
            for entry in data.get("spawn", [])
        ]
        types = {rule.object_id: rule.object_type for rule in spawns}
        phases = {}
        for phase, entries in (data.get("phases") or {}).items():
            phases[phase] = [
                TransportGoal(
                    object_id=entry["object"],
                    object_type=types.get(entry["object"], ""),
                    source=entry["from"],
                    target=entry["to"],
                    placement=_pair(entry["placement"], f"{entry['object']}.placement") if "placement" in entry else None,
                )
                for entry in entries
            ]
        scenario = Scenario(data.get("name", path.stem), path.parent / data["environment"], spawns, phases)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Malformed scenario {path}: {exc}") from exc
    return scenario


def load_scenario_world(scenario_path: Union[str, Path], robot_path: Union[str, Path]) -> Tuple[Scenario, WorldState]:
    """Scenario plus its empty world, checked against each other"""
    scenario = load_scenario(scenario_path)
    world = load_scene(robot_path, scenario.environment)
    scenario.check(world)
    logger.info(
        f"Scenario {scenario.name}: {len(scenario.spawns)} objects, "
        f"phases {list(scenario.phases)}, containers {scenario.containers}"
    )
    return scenario, world
