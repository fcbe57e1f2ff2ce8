"""Room geometry: AP/RIS placement, user drop, and neighbor discovery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig

SE, IOT = 0, 1


@dataclass
class Topology:
    ap_positions: np.ndarray      # (M, 3) m
    ris_positions: np.ndarray     # (J, 3) m
    user_positions: np.ndarray    # (U, 3) m
    user_kind: np.ndarray         # (U,) SE=0 / IOT=1
    ap_of_user: np.ndarray        # (U,) serving AP index
    ap_neighbor_ris: list         # per AP: sorted RIS indices within radius
    ap_neighbor_ap: list          # per AP: sorted other-AP indices within radius
    ris_neighbor_ap: list         # per RIS: sorted AP indices within radius

    def users_of(self, ap: int) -> np.ndarray:
        return np.flatnonzero(self.ap_of_user == ap)


def build_topology(config: NetworkConfig, rng: np.random.Generator) -> Topology:
    """Drop APs on the ceiling, RISs on the long walls, users uniformly.

    Deterministic for a fixed generator state; only user positions consume
    random draws, so AP/RIS placement is identical across seeds.
    """
    m, j = config.num_aps, config.num_ris
    if m <= 0 or j < 0:
        raise ValueError("need at least one AP and a non-negative RIS count")
    lx, ly, lz = config.room_x, config.room_y, config.room_z

    ap_xs = (np.arange(m) + 0.5) * lx / m
    ap_positions = np.column_stack([ap_xs, np.full(m, ly / 2), np.full(m, lz)])

    # alternate RISs between the two long walls
    ris_positions = np.zeros((j, 3))
    for idx in range(j):
        wall = idx % 2
        along = (idx // 2 + 0.5) * lx / max(1, -(-j // 2))
        ris_positions[idx] = (along, 0.0 if wall == 0 else ly, lz * 0.6)

    users = config.total_users
    user_positions = np.column_stack([
        rng.uniform(0, lx, users),
        rng.uniform(0, ly, users),
        np.full(users, 1.0),
    ])
    per_ap = config.users_per_ap
    ap_of_user = np.repeat(np.arange(m), per_ap)
    kind = np.tile(
        np.array([SE] * config.se_users_per_ap + [IOT] * config.iot_users_per_ap),
        m,
    )

    radius = config.neighbor_radius
    ap_neighbor_ris, ap_neighbor_ap = [], []
    for i in range(m):
        d_ris = np.linalg.norm(ris_positions - ap_positions[i], axis=1) if j else np.empty(0)
        ap_neighbor_ris.append(sorted(np.flatnonzero(d_ris <= radius).tolist()))
        d_ap = np.linalg.norm(ap_positions - ap_positions[i], axis=1)
        others = [k for k in np.flatnonzero(d_ap <= radius).tolist() if k != i]
        ap_neighbor_ap.append(sorted(others))
    ris_neighbor_ap = [
        sorted(np.flatnonzero(
            np.linalg.norm(ap_positions - ris_positions[idx], axis=1) <= radius
        ).tolist())
        for idx in range(j)
    ]

    return Topology(ap_positions, ris_positions, user_positions, kind,
                    ap_of_user, ap_neighbor_ris, ap_neighbor_ap, ris_neighbor_ap)


def dump_topology(topo: Topology, path) -> None:
    """Structured plain-text dump for eyeballing a generated layout."""
    lines = ["# risnoma topology dump", f"aps {len(topo.ap_positions)}"]
    for i, p in enumerate(topo.ap_positions):
        lines.append(f"ap {i} pos {p[0]:.3f} {p[1]:.3f} {p[2]:.3f} "
                     f"neighbor_ris {topo.ap_neighbor_ris[i]} "
                     f"neighbor_ap {topo.ap_neighbor_ap[i]}")
    lines.append(f"ris {len(topo.ris_positions)}")
    for i, p in enumerate(topo.ris_positions):
        lines.append(f"ris {i} pos {p[0]:.3f} {p[1]:.3f} {p[2]:.3f} "
                     f"neighbor_ap {topo.ris_neighbor_ap[i]}")
    lines.append(f"users {len(topo.user_positions)}")
    for u, p in enumerate(topo.user_positions):
        kind = "se" if topo.user_kind[u] == SE else "iot"
        lines.append(f"user {u} kind {kind} ap {topo.ap_of_user[u]} "
                     f"pos {p[0]:.3f} {p[1]:.3f} {p[2]:.3f}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
