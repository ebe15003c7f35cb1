"""Shared fixtures"""

from pathlib import Path

import numpy as np
import pytest

from src.models.domain import Pose
from src.worldmodel.loader import load_scene
from src.worldmodel.world import SceneObject

CONFIG_DIR = Path(__file__).parent.parent / "config"


@pytest.fixture(scope="session")
def base_world():
    """Robot and apartment as loaded from config, no objects"""
    return load_scene(CONFIG_DIR / "robot_pr2_lite.yaml", CONFIG_DIR / "apartment.yaml")


@pytest.fixture
def world(base_world):
    """Robot parked in the free middle of the kitchen"""
    return base_world.with_positions({"base/x": 3.6, "base/y": 1.6, "base/theta": 0.0})


def make_object(world, object_id: str, object_type: str, xyz, rpy=(0.0, 0.0, 0.0)) -> SceneObject:
    spec = world.environment.object_types[object_type]
    return SceneObject(
        id=object_id,
        object_type=object_type,
        shape=spec.shape,
        pose=Pose.from_xyz_rpy(xyz, rpy),
        mass=spec.mass,
        color=spec.color,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(7)
