"""JSON wire protocol for the live steering service.

Server to client: hello (sent once per connection), frame, error,
tune_progress, snapshot. Client to server: set_params, poke, pause, resume,
reset, snapshot. Every message is one JSON object with a "type" field.
Positions travel as plain nested lists; at steering scales (hundreds of
particles) that stays well under typical frame budgets.
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np

from .errors import OrganSimError

if TYPE_CHECKING:  # pragma: no cover
    from .lattice import Region, SkinBinding
    from .mesh_io import TriMesh


class ProtocolError(OrganSimError):
    """Client message that cannot be interpreted."""


CLIENT_TYPES = ("set_params", "poke", "pause", "resume", "reset", "snapshot")


def hello_message(
    mesh: "TriMesh",
    binding: "SkinBinding",
    regions: list["Region"],
    dt: float,
    particle_regions: np.ndarray,
    particles: np.ndarray,
) -> dict:
    """Connection preamble: everything a client needs to render locally.

    Carries the mesh, the skin binding (so clients can skin vertices from
    particle frames themselves), the region table, and the rest-pose
    particle positions.
    """
    return {
        "type": "hello",
        "dt": dt,
        "mesh": {
            "name": mesh.name,
            "vertices": mesh.vertices.tolist(),
            "triangles": mesh.triangles.tolist(),
        },
        "binding": {
            "indices": binding.indices.tolist(),
            "weights": binding.weights.tolist(),
            "offsets": binding.offsets.tolist(),
        },
        "regions": [
            {
                "id": r.id,
                "name": r.name,
                "pinned": r.pinned,
                "amplitude_scale": r.amplitude_scale,
                "harmonics": r.actuation.as_dict_list(),
            }
            for r in regions
        ],
        "particle_regions": particle_regions.tolist(),
        "particles": particles.tolist(),
    }


def frame_message(step: int, t: float, positions: np.ndarray, energy: float) -> dict:
    return {
        "type": "frame",
        "step": step,
        "t": t,
        "positions": positions.tolist(),
        "energy": energy,
    }


def error_message(message: str) -> dict:
    return {"type": "error", "message": message}


def tune_progress_message(iteration: int, objective: float, best: float, temperature: float) -> dict:
    return {
        "type": "tune_progress",
        "iteration": iteration,
        "objective": objective,
        "best": best,
        "temperature": temperature,
    }


def snapshot_message(scene_doc: dict) -> dict:
    return {"type": "snapshot", "scene": scene_doc}


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def _vec3(value, what: str) -> list[float]:
    try:
        vec = [float(c) for c in value]
    except (TypeError, ValueError):
        raise ProtocolError(f"{what} must be a 3-vector") from None
    if len(vec) != 3:
        raise ProtocolError(f"{what} must have exactly 3 components")
    return vec


def decode_client(text: str) -> dict:
    """Parse and validate one client message; raises ProtocolError."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}") from None
    if not isinstance(msg, dict) or msg.get("type") not in CLIENT_TYPES:
        raise ProtocolError(f"unknown message type {msg.get('type') if isinstance(msg, dict) else None!r}")

    kind = msg["type"]
    if kind == "set_params":
        if not isinstance(msg.get("region"), int) or isinstance(msg.get("region"), bool):
            raise ProtocolError("set_params needs an integer 'region'")
        harmonics = msg.get("harmonics")
        if not isinstance(harmonics, list):
            raise ProtocolError("set_params needs a 'harmonics' list")
        for h in harmonics:
            if not isinstance(h, dict) or not {"a", "f", "phi"} <= set(h):
                raise ProtocolError("each harmonic needs a, f, phi")
            for key in ("a", "f", "phi"):
                if not isinstance(h[key], (int, float)) or isinstance(h[key], bool):
                    raise ProtocolError(f"harmonic field {key!r} must be a number")
        if "amplitude_scale" in msg and (
            not isinstance(msg["amplitude_scale"], (int, float))
            or isinstance(msg["amplitude_scale"], bool)
        ):
            raise ProtocolError("amplitude_scale must be a number")
    elif kind == "poke":
        msg["point"] = _vec3(msg.get("point"), "poke point")
        msg["force"] = _vec3(msg.get("force"), "poke force")
        for key in ("radius", "duration"):
            value = msg.get(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ProtocolError(f"poke needs a positive {key!r}")
    # pause, resume, reset, snapshot carry no payload
    return msg
