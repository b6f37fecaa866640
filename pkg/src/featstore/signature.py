"""Hashed feature signatures: sparse slot vectors for model consumption.

Each computed feature is assigned a role.  DISCRETE features one-hot into a
slot keyed by "name=value", CONTINUOUS features carry their numeric value in
a slot keyed by the bare name, and MULTI features explode "v1:c1,v2:c2"
frequency strings into one slot per element.  Slots are 64-bit FNV-1a hashes
reduced mod the spec dimension, which may be as large as 2^40; collisions
sum.  Signing is a pure function of (vector, spec), so identical inputs give
identical bytes on any platform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .aggregates import value_text
from .errors import InvalidSchema, RoleTypeMismatch

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

MAX_DIMENSION = 1 << 40


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


class Role(enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"
    MULTI = "multi"


@dataclass(frozen=True)
class SignatureSpec:
    dimension: int
    roles: dict  # feature name -> Role

    def __post_init__(self):
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise InvalidSchema(f"signature dimension must be in [1, 2^40], got {self.dimension}")
        for name, role in self.roles.items():
            if not isinstance(role, Role):
                raise InvalidSchema(f"feature {name!r} has no valid role")

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureSpec":
        return cls(int(d["dimension"]), {k: Role(v) for k, v in d["roles"].items()})

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "roles": {k: r.value for k, r in self.roles.items()}}


@dataclass
class SignedVector:
    slots: list  # (slot, value) with slots strictly increasing
    label: float | None = None

    def l1_mass(self) -> float:
        return math.fsum(abs(v) for _, v in self.slots)


def _slot(spec: SignatureSpec, text: str) -> int:
    return fnv1a64(text.encode("utf-8")) % spec.dimension


def _multi_elements(name, text):
    if text == "":
        return
    for part in text.split(","):
        value, sep, count = part.rpartition(":")
        if not sep:
            raise RoleTypeMismatch(f"MULTI feature {name!r} element {part!r} is not 'value:count'")
        try:
            yield value, float(count)
        except ValueError:
            raise RoleTypeMismatch(
                f"MULTI feature {name!r} has non-numeric count in {part!r}"
            ) from None


def sign_values(names, values, spec: SignatureSpec, label=None) -> SignedVector:
    if set(names) != set(spec.roles):
        missing = sorted(set(names) ^ set(spec.roles))
        raise RoleTypeMismatch(f"vector features do not match the signature spec: {missing}")
    acc: dict[int, float] = {}

    def add(slot, value):
        acc[slot] = acc.get(slot, 0.0) + value

    for name, value in zip(names, values):
        if value is None:
            continue
        role = spec.roles[name]
        if role is Role.DISCRETE:
            add(_slot(spec, f"{name}={value_text(value)}"), 1.0)
        elif role is Role.CONTINUOUS:
            if isinstance(value, str):
                raise RoleTypeMismatch(f"CONTINUOUS feature {name!r} got a string value")
            add(_slot(spec, name), float(value))
        else:
            if not isinstance(value, str):
                raise RoleTypeMismatch(f"MULTI feature {name!r} needs a 'v:c' list, got {value!r}")
            for element, count in _multi_elements(name, value):
                add(_slot(spec, f"{name}={element}"), count)
    return SignedVector(sorted(acc.items()), label)


def sign(vector, spec: SignatureSpec, label=None) -> SignedVector:
    """Sign a served FeatureVector (anything with .names and .values)."""
    return sign_values(vector.names, vector.values, spec, label)


def _num(x) -> str:
    f = float(x)
    if f.is_integer() and math.isfinite(f):
        return str(int(f))
    return repr(f)


def format_libsvm(sv: SignedVector) -> str:
    label = "0" if sv.label is None else _num(sv.label)
    return " ".join([label] + [f"{slot}:{_num(v)}" for slot, v in sv.slots])


def parse_libsvm(line: str) -> SignedVector:
    parts = line.split()
    label = float(parts[0]) if parts else 0.0
    slots = []
    for part in parts[1:]:
        slot, _, value = part.partition(":")
        slots.append((int(slot), float(value)))
    return SignedVector(slots, label)
