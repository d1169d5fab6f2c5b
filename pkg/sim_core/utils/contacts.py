"""
Impulse-based contact resolution for disks and the cylindrical pusher.

Contacts are solved with sequential impulses and accumulated clamping:
normal impulses never pull, tangential impulses stay inside the Coulomb
cone mu_contact * |normal impulse|. A kinematic pusher has infinite
effective mass. Residual overlap feeds a Baumgarte velocity bias and is
removed from emitted states by positional projection.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from sim_core.constants import DEEP_PENETRATION_FACTOR

logger = logging.getLogger(__name__)

PUSHER = -1


@dataclass
class ContactDiagnostics:
    """Counters accumulated over steps."""
    deep_penetrations: int = 0
    projections: int = 0

    def merge(self, other):
        self.deep_penetrations += other.deep_penetrations
        self.projections += other.projections
        return self

    def to_dict(self):
        return {'deep_penetrations': self.deep_penetrations, 'projections': self.projections}


@dataclass
class _Contact:
    a: int                 # PUSHER or disk index
    b: int                 # disk index
    normal: np.ndarray     # (B, 2) from a to b
    active: np.ndarray     # (B,)
    target: np.ndarray     # (B,) desired separating normal velocity
    k_normal: np.ndarray   # (B,)
    k_tangent: np.ndarray  # (B,)
    acc_normal: np.ndarray
    acc_tangent: np.ndarray


def pair_geometry(pos_a, pos_b, radius_a, radius_b):
    """
    Normal (a -> b), center distance and overlap depth for batched pairs.

    Coincident centers get the +x normal.
    """
    delta = pos_b - pos_a
    dist = np.hypot(delta[:, 0], delta[:, 1])
    separated = dist > 1e-12
    safe = np.where(separated, dist, 1.0)
    normal = np.where(separated[:, None], delta / safe[:, None], np.array([1.0, 0.0]))
    depth = radius_a + radius_b - dist
    return normal, dist, depth


def contact_pairs(n_disks):
    """Fixed solver order: pusher contacts first, then disk pairs lexicographically."""
    pairs = [(PUSHER, i) for i in range(n_disks)]
    pairs += [(i, j) for i in range(n_disks) for j in range(i + 1, n_disks)]
    return pairs


def _body_position(batch, body):
    return batch.pusher_pos if body == PUSHER else batch.pose[:, body, :2]


def _body_radius(batch, body):
    if body == PUSHER:
        return np.full(batch.batch_size, batch.pusher_radius)
    return batch.radius[:, body]


def _inverse_mass(batch, body):
    if body == PUSHER:
        inv = 0.0 if batch.pusher_mass is None else 1.0 / batch.pusher_mass
        return np.full(batch.batch_size, inv)
    return 1.0 / batch.mass[:, body]


def _relative_velocity(batch, contact):
    """Normal and tangential velocity of b relative to a at the contact point."""
    n = contact.normal
    t = np.stack([-n[:, 1], n[:, 0]], axis=1)
    if contact.a == PUSHER:
        va = batch.pusher_vel
        spin_a = 0.0
    else:
        va = batch.twist[:, contact.a, :2]
        spin_a = batch.twist[:, contact.a, 2] * batch.radius[:, contact.a]
    vb = batch.twist[:, contact.b, :2]
    spin_b = batch.twist[:, contact.b, 2] * batch.radius[:, contact.b]
    rel = vb - va
    vn = (rel * n).sum(axis=1)
    vt = (rel * t).sum(axis=1) - spin_b - spin_a
    return vn, vt, t


def _apply_impulse(batch, contact, d_normal, d_tangent, tangent):
    """Apply normal/tangential impulse increments; +impulse pushes b along the normal."""
    linear = d_normal[:, None] * contact.normal + d_tangent[:, None] * tangent
    b = contact.b
    batch.twist[:, b, :2] += linear / batch.mass[:, b, None]
    batch.twist[:, b, 2] -= 2.0 * d_tangent / (batch.mass[:, b] * batch.radius[:, b])
    if contact.a == PUSHER:
        if batch.pusher_mass is not None:
            batch.pusher_vel -= linear / batch.pusher_mass
    else:
        a = contact.a
        batch.twist[:, a, :2] -= linear / batch.mass[:, a, None]
        batch.twist[:, a, 2] -= 2.0 * d_tangent / (batch.mass[:, a] * batch.radius[:, a])


def _build_contacts(batch, cfg) -> List[_Contact]:
    tol = cfg.penetration_tolerance
    bias_rate = cfg.baumgarte_beta / cfg.dt
    contacts = []
    for a, b in contact_pairs(batch.n_disks):
        normal, _, depth = pair_geometry(
            _body_position(batch, a), _body_position(batch, b),
            _body_radius(batch, a), _body_radius(batch, b),
        )
        active = depth > -tol
        if not active.any():
            continue
        inv_a = _inverse_mass(batch, a)
        inv_b = _inverse_mass(batch, b)
        # Disk spin adds 2/m per disk to the tangential effective mass (r^2 / I).
        spin_a = 0.0 if a == PUSHER else 2.0 * inv_a
        contact = _Contact(
            a=a, b=b, normal=normal, active=active,
            target=np.zeros(batch.batch_size),
            k_normal=inv_a + inv_b,
            k_tangent=inv_a + inv_b + 2.0 * inv_b + spin_a,
            acc_normal=np.zeros(batch.batch_size),
            acc_tangent=np.zeros(batch.batch_size),
        )
        vn0, _, _ = _relative_velocity(batch, contact)
        bounce = np.where(vn0 < 0.0, -cfg.restitution * vn0, 0.0)
        baumgarte = bias_rate * np.maximum(depth - tol, 0.0)
        contact.target = np.maximum(bounce, baumgarte)
        contacts.append(contact)
    return contacts


def solve_contact_velocities(batch, cfg):
    """
    Sequential-impulse velocity solve, in place on ``batch``.

    Returns:
        int: number of active contacts summed over the batch
    """
    contacts = _build_contacts(batch, cfg)
    for _ in range(int(cfg.solver_iterations)):
        for contact in contacts:
            vn, vt, tangent = _relative_velocity(batch, contact)

            new_normal = np.maximum(contact.acc_normal + (contact.target - vn) / contact.k_normal, 0.0)
            new_normal = np.where(contact.active, new_normal, 0.0)
            d_normal = new_normal - contact.acc_normal
            contact.acc_normal = new_normal

            bound = cfg.contact_mu * contact.acc_normal
            new_tangent = np.clip(contact.acc_tangent - vt / contact.k_tangent, -bound, bound)
            new_tangent = np.where(contact.active, new_tangent, 0.0)
            d_tangent = new_tangent - contact.acc_tangent
            contact.acc_tangent = new_tangent

            _apply_impulse(batch, contact, d_normal, d_tangent, tangent)
    return int(sum(c.active.sum() for c in contacts))


def project_overlaps(batch, cfg, diagnostics: Optional[ContactDiagnostics] = None, threshold=None):
    """
    Push overlapping bodies apart along the contact normal, in place.

    Only overlaps deeper than ``threshold`` (default: the penetration
    tolerance) are corrected, fully, split by inverse mass. Overlaps deeper
    than DEEP_PENETRATION_FACTOR x tolerance are counted as deep.
    """
    tol = cfg.penetration_tolerance
    threshold = tol if threshold is None else threshold
    diagnostics = diagnostics if diagnostics is not None else ContactDiagnostics()
    pairs = contact_pairs(batch.n_disks)

    for sweep in range(int(cfg.solver_iterations)):
        moved = False
        for a, b in pairs:
            normal, _, depth = pair_geometry(
                _body_position(batch, a), _body_position(batch, b),
                _body_radius(batch, a), _body_radius(batch, b),
            )
            mask = depth > threshold
            if not mask.any():
                continue
            moved = True
            if sweep == 0:
                deep = int((depth > DEEP_PENETRATION_FACTOR * tol).sum())
                if deep:
                    diagnostics.deep_penetrations += deep
                    logger.debug(f"Deep penetration between bodies {a} and {b} in {deep} batch element(s)")
            diagnostics.projections += int(mask.sum())

            inv_a = _inverse_mass(batch, a)
            inv_b = _inverse_mass(batch, b)
            correction = np.where(mask, depth, 0.0)[:, None] * normal
            share_b = (inv_b / (inv_a + inv_b))[:, None]
            batch.pose[:, b, :2] += share_b * correction
            if a == PUSHER:
                if batch.pusher_mass is not None:
                    batch.pusher_pos -= (1.0 - share_b) * correction
            else:
                batch.pose[:, a, :2] -= (1.0 - share_b) * correction
        if not moved:
            break
    return diagnostics


def resolve_contacts(world, cfg):
    """
    Resolve all contacts of a single world.

    Velocities are solved by impulses; only deep interpenetration (more than
    DEEP_PENETRATION_FACTOR x tolerance) is corrected positionally here.

    Returns:
        tuple: (WorldState, ContactDiagnostics)
    """
    from sim_core.utils.batch import WorldBatch

    batch = WorldBatch.from_world(world)
    solve_contact_velocities(batch, cfg)
    diagnostics = project_overlaps(
        batch, cfg, threshold=DEEP_PENETRATION_FACTOR * cfg.penetration_tolerance,
    )
    return batch.world(0), diagnostics
