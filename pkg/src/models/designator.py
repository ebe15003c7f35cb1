"""Designators: partial symbolic descriptions of actions, objects, locations and motions"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterator, Mapping, Tuple

from .domain import Pose


class DesignatorKind(str, Enum):
    """Kinds of entities a designator can describe"""
    ACTION = "action"
    OBJECT = "object"
    LOCATION = "location"
    MOTION = "motion"


# Keys every designator of the kind must carry
MANDATORY_KEYS = {
    DesignatorKind.ACTION: ("type",),
    DesignatorKind.OBJECT: ("type",),
    DesignatorKind.LOCATION: (),
    DesignatorKind.MOTION: ("type",),
}


def _normalize_key(key: str) -> str:
    return key.replace("_", "-")


@dataclass(frozen=True)
class Designator:
    """Immutable set of key/value properties of a given kind.

    Values may be symbols, numbers, poses or nested designators. Property
    keys use hyphenated names (``base-pose``, ``collision-mode``).
    """
    kind: DesignatorKind
    properties: Tuple[Tuple[str, Any], ...] = ()

    def __post_init__(self):
        """Validate kind, key uniqueness and mandatory keys"""
        kind = DesignatorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        keys = [key for key, _ in self.properties]
        if len(keys) != len(set(keys)):
            raise ValueError(f"Duplicate designator keys in {keys}")
        for key in MANDATORY_KEYS[kind]:
            if key not in keys:
                raise ValueError(f"{kind.value} designator requires key '{key}'")

    @classmethod
    def build(cls, kind: DesignatorKind, properties: Mapping[str, Any]) -> "Designator":
        items = tuple((_normalize_key(k), v) for k, v in properties.items() if v is not None)
        return cls(kind, items)

    @property
    def type(self) -> str:
        return self.get("type")

    def get(self, key: str, default: Any = None) -> Any:
        key = _normalize_key(key)
        for k, v in self.properties:
            if k == key:
                return v
        return default

    def __getitem__(self, key: str) -> Any:
        key = _normalize_key(key)
        for k, v in self.properties:
            if k == key:
                return v
        raise KeyError(key)

    def __contains__(self, key: str) -> bool:
        key = _normalize_key(key)
        return any(k == key for k, _ in self.properties)

    def keys(self) -> Iterator[str]:
        return (k for k, _ in self.properties)

    def extend(self, updates: Mapping[str, Any]) -> "Designator":
        """Return a new designator with properties added or replaced"""
        merged = dict(self.properties)
        for key, value in updates.items():
            merged[_normalize_key(key)] = value
        return Designator(self.kind, tuple(merged.items()))

    def without(self, *keys: str) -> "Designator":
        drop = {_normalize_key(k) for k in keys}
        return Designator(self.kind, tuple((k, v) for k, v in self.properties if k not in drop))

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form with nested designators and poses expanded"""
        return {"kind": self.kind.value, "properties": {k: _serialize(v) for k, v in self.properties}}

    def describe(self) -> str:
        """Short human readable label, e.g. ``picking-up bowl``"""
        label = str(self.get("type", self.kind.value))
        for key in ("object", "container", "target", "location"):
            value = self.get(key)
            if isinstance(value, Designator):
                label += f" {value.get('name', value.get('type', ''))}"
                break
            if isinstance(value, str):
                label += f" {value}"
                break
        return label


def _serialize(value: Any) -> Any:
    if isinstance(value, Designator):
        return value.to_dict()
    if isinstance(value, Pose):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_serialize(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def an_action(**properties: Any) -> Designator:
    return Designator.build(DesignatorKind.ACTION, properties)


def an_object(**properties: Any) -> Designator:
    return Designator.build(DesignatorKind.OBJECT, properties)


def a_location(**properties: Any) -> Designator:
    return Designator.build(DesignatorKind.LOCATION, properties)


def a_motion(**properties: Any) -> Designator:
    return Designator.build(DesignatorKind.MOTION, properties)
