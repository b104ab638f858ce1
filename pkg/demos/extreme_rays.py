"""Hunting a non-rank-one extreme ray of the two-ball lifted cone.

Minimizing a generic linear functional over the unit-trace section of the
cone almost always lands on a rank-one ray, the lift of a single point.  To
see the richer rays, we build a mixed-sign structured point (one atom
inside both balls, two atoms on sphere 1 with opposite ball-2 slacks), take
the functional that exposes its face, perturb it slightly and solve.
"""

import numpy as np

from ballqcqp import certify
from ballqcqp.instance import BallQcqpInstance

inst = BallQcqpInstance(centers=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], radii=[1.0, 1.2],
                        A=np.eye(3), b=np.zeros(3), witness=[0.5, 0.0, 0.0])
rng = np.random.default_rng(0)

for attempt in range(1, 11):
    Z, res = certify.hunt_extreme_ray(inst, rng)
    if Z is None:
        print(f"attempt {attempt}: solver status {res.status.value}")
        continue
    rank = certify.numerical_rank(Z)
    face = certify.face_dimension(Z, inst)
    print(f"attempt {attempt}: rank {rank}, smallest face has dimension {face}")
    if rank >= 2 and face == 1:
        break
else:
    raise SystemExit("no non-rank-one extreme ray found")

# Dimension one means Z spans an extreme ray.  Peel off the interior atom
# along Z d_1, then split the rest into points on sphere 1.
cert = certify.decompose_extreme_ray(Z, inst, tol=1e-6)
print("\nweights", cert.weights)
for k, x in enumerate(cert.points):
    g = inst.radii**2 - np.sum((x - inst.centers) ** 2, axis=1)
    print(f"atom {k}: x = {np.round(x, 6)}, ball slacks = {np.round(g, 8)}")

rep = certify.verify_decomposition(Z, cert, inst, tol=1e-6)
print("\nstructure check:", rep.details)
mm = certify.m_matrix_check(cert, inst, tol=1e-6)
print("M-matrix check:", "pass" if mm.passed else "FAIL", "-", mm.details)
